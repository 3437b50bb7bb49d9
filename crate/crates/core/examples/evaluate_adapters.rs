//! Full harness pass: build a stub corpus, run three bundled adapters
//! over it (perfect echo, token-dropping corruption, throttled echo for
//! RTF), score against the demo lexicon, and print a stratified
//! markdown report.
//!
//! Run with: `cargo run --example evaluate_adapters`

use clinasr::corpus::{build_synthetic_manifest, demo, Manifest, StubTts, Voice};
use clinasr::harness::{
    aggregate_stratified, render_report, run_transcriber, score_run, CorruptingAdapter,
    EchoReferenceAdapter, ReportFormat, StratAxis, ThrottledAdapter, TranscriberAdapter,
};
use clinasr::textnorm::NormPolicy;

fn main() -> clinasr::Result<()> {
    let dir = std::env::temp_dir().join("clinasr-example-harness");
    std::fs::create_dir_all(&dir).expect("create work directory");

    let entries = demo::demo_corpus_texts(3, 2, 9);
    let texts: Vec<String> = entries.iter().map(|(t, _, _)| t.clone()).collect();
    let manifest = build_synthetic_manifest(&texts, &[Voice::Male], &StubTts::default(), &dir)?;
    let mut records = manifest.records;
    for (record, (_, center, category)) in records.iter_mut().zip(&entries) {
        record.center = Some(center.clone());
        record.category = Some(*category);
    }
    let manifest = Manifest::new(records, manifest.norm_policy, manifest.provenance)?;
    println!("corpus: {} records under {}", manifest.records.len(), dir.display());

    let lexicon = demo::demo_lexicon(&NormPolicy::default());
    let adapters: Vec<Box<dyn TranscriberAdapter>> = vec![
        Box::new(EchoReferenceAdapter::new(&manifest)),
        Box::new(CorruptingAdapter::new(&manifest, 6)?),
        Box::new(ThrottledAdapter::new(
            EchoReferenceAdapter::new(&manifest),
            0.005,
        )),
    ];

    for adapter in &adapters {
        let mut run = run_transcriber(&manifest, &dir, adapter.as_ref(), 4, 0)?;
        score_run(&mut run, &lexicon, None)?;
        let report = aggregate_stratified(
            &run,
            &[StratAxis::Center.into(), StratAxis::Category.into()],
            false,
        )?;
        println!("\n===== adapter: {} =====", adapter.id());
        println!(
            "overall CER {:.2}%, Med ACC {:.2}%, RTF {:.6}",
            report.overall().cer.mean * 100.0,
            report.overall().med_acc.map(|m| m.mean * 100.0).unwrap_or(f64::NAN),
            report.overall().rtf
        );
        if adapter.id().starts_with("corrupting") {
            print!("{}", render_report(&report, ReportFormat::Markdown));
        }
    }
    Ok(())
}
