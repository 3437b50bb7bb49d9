//! Builds a small synthetic corpus end to end: stub TTS synthesis, noise
//! augmentation at the default 20-28 dB schedule, a stratified split, and
//! layout validation.
//!
//! Run with: `cargo run --example build_corpus [out_dir]`

use std::path::PathBuf;

use clinasr::audio::{write_wav, SnrSchedule};
use clinasr::corpus::{
    augment_with_noise, build_synthetic_manifest, demo, load_noise_bank, stratified_split,
    LayoutSpec, Manifest, SplitFractions, StubTts, Voice,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> clinasr::Result<()> {
    let out_root: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("clinasr-example-corpus"));
    std::fs::create_dir_all(&out_root).expect("create output directory");

    // 2 centers x 6 categories x 2 utterances of generated report text
    let entries = demo::demo_corpus_texts(2, 2, 42);
    let texts: Vec<String> = entries.iter().map(|(t, _, _)| t.clone()).collect();
    println!("synthesizing {} texts, e.g. {:?}", texts.len(), texts[0]);

    let clean_dir = out_root.join("clean");
    let manifest = build_synthetic_manifest(&texts, &[Voice::Female], &StubTts::default(), &clean_dir)?;

    // attach the stratification metadata the generator chose
    let mut records = manifest.records;
    for (record, (_, center, category)) in records.iter_mut().zip(&entries) {
        record.center = Some(center.clone());
        record.category = Some(*category);
    }
    let manifest = Manifest::new(records, manifest.norm_policy, manifest.provenance)?;
    manifest.write_jsonl(&clean_dir.join("manifest.jsonl"))?;

    // a couple of synthetic "room noise" recordings
    let noise_dir = out_root.join("noise");
    std::fs::create_dir_all(&noise_dir).expect("create noise directory");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in 0..2 {
        let samples: Vec<f64> = (0..32000).map(|_| rng.gen_range(-0.05..0.05)).collect();
        let wave = clinasr::audio::Waveform::new(samples, 16000)?;
        write_wav(&wave, &noise_dir.join(format!("room{k}.wav")))?;
    }

    let noisy_dir = out_root.join("noisy");
    let outcome = augment_with_noise(
        &manifest,
        &clean_dir,
        &load_noise_bank(&noise_dir)?,
        &SnrSchedule::default_noise_augmentation(),
        11,
        &noisy_dir,
        4,
    )?;
    let snrs: Vec<f64> = outcome
        .manifest
        .records
        .iter()
        .filter_map(|r| r.snr_db)
        .collect();
    println!(
        "augmented {} records, target SNRs {:.2}..{:.2} dB, {} samples clipped",
        outcome.manifest.records.len(),
        snrs.iter().cloned().fold(f64::INFINITY, f64::min),
        snrs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        outcome.clipped_samples
    );

    let split = stratified_split(
        &outcome.manifest,
        SplitFractions::new(0.5, 0.25, 0.25)?,
        3,
    )?;
    split.manifest.write_jsonl(&noisy_dir.join("split.jsonl"))?;

    let layout = LayoutSpec::parse("2x6x2")?;
    let report = split.manifest.validate(&noisy_dir, Some(&layout));
    for check in &report.checks {
        println!(
            "  [{}] {}: {}",
            if check.passed { "ok" } else { "FAIL" },
            check.rule,
            check.detail
        );
    }
    println!(
        "corpus written under {} (validation {})",
        out_root.display(),
        if report.passed() { "passed" } else { "failed" }
    );
    Ok(())
}
