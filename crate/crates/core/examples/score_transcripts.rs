//! The metric suite on hand-picked hypothesis/reference pairs: CER,
//! BLEU-1, medical-term accuracy against a lexicon, BERTScore over
//! provided embeddings, and real-time factor.
//!
//! Run with: `cargo run --example score_transcripts`

use clinasr::corpus::demo;
use clinasr::metrics::{
    bertscore_f1, bleu1, cer, med_term_accuracy, real_time_factor,
};
use clinasr::textnorm::{normalize_transcript, tokenize_chars, NormPolicy};

fn main() -> clinasr::Result<()> {
    let policy = NormPolicy::default();
    let lexicon = demo::demo_lexicon(&policy);

    let reference = "乙状结肠可见息肉，行ＥＭＲ切除。";
    println!("reference: {reference}");
    let normalized = normalize_transcript(reference, &policy);
    println!("normalized: {normalized}");
    println!("tokens: {:?}", tokenize_chars(&normalized));

    let hypotheses = [
        ("perfect", "乙状结肠可见息肉行emr切除"),
        ("one substitution", "乙状结肠可见息冈行emr切除"),
        ("term garbled", "乙状结肠可见洗肉行emr切除"),
        ("truncated", "乙状结肠可见息肉"),
    ];
    println!("\nhypothesis                     CER    BLEU-1  MedACC");
    for (label, hyp) in hypotheses {
        let c = cer(hyp, reference, &policy)?;
        let b = bleu1(hyp, reference, &policy)?;
        let m = med_term_accuracy(hyp, reference, &lexicon, &policy);
        println!(
            "  {label:27} {c:.3}  {b:.3}   {}",
            m.map(|v| format!("{v:.3}")).unwrap_or_else(|| "n/a".into())
        );
    }

    // BERTScore works on externally produced unit embeddings
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let hyp_embeddings = vec![vec![1.0, 0.0]];
    let ref_embeddings = vec![vec![1.0, 0.0], vec![s, s]];
    println!(
        "\nbertscore_f1 on a toy embedding pair: {:.4}",
        bertscore_f1(&hyp_embeddings, &ref_embeddings)?
    );

    println!(
        "real-time factor for 10 s audio in 0.05 s: {}",
        real_time_factor(10.0, 0.05)?
    );
    Ok(())
}
