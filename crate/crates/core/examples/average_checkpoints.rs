//! Checkpoint workflow: write tensor files for a fake training run,
//! retain the top 20 by validation loss, and average the best 10 into a
//! final model file.
//!
//! Run with: `cargo run --example average_checkpoints`

use clinasr::checkpoints::{
    average_checkpoint_files, select_top_checkpoints, CheckpointMeta, TensorEntry, TensorFile,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> clinasr::Result<()> {
    let dir = std::env::temp_dir().join("clinasr-example-checkpoints");
    std::fs::create_dir_all(&dir).expect("create work directory");
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    // 40 checkpoints saved every 2000 steps with a noisy, improving loss
    let mut metas = Vec::new();
    for i in 0..40u64 {
        let step = 2000 * (i + 1);
        let path = dir.join(format!("ckpt-{step:06}.tf"));
        let entries = vec![
            TensorEntry::new(
                "encoder.weight",
                vec![8, 16],
                (0..128).map(|_| rng.gen_range(-0.5f32..0.5)).collect(),
            )?,
            TensorEntry::new(
                "decoder.bias",
                vec![16],
                (0..16).map(|_| rng.gen_range(-0.1f32..0.1)).collect(),
            )?,
        ];
        TensorFile::new(entries)?.write(&path)?;
        let val_loss = 1.5 * (-(i as f64) / 15.0).exp() + rng.gen_range(0.0..0.25);
        metas.push(CheckpointMeta::new(path, step, val_loss)?);
    }

    let kept = select_top_checkpoints(&metas, 20)?;
    println!("top 20 by validation loss (best first):");
    for meta in kept.iter().take(5) {
        println!("  step {:6}  loss {:.4}", meta.step, meta.val_loss);
    }
    println!("  ...");

    let best_paths: Vec<_> = kept.iter().take(10).map(|m| m.path.clone()).collect();
    let out = dir.join("final-model.tf");
    let averaged = average_checkpoint_files(&best_paths, &out)?;
    println!(
        "averaged {} checkpoints into {} ({} tensors, sources recorded: {})",
        best_paths.len(),
        out.display(),
        averaged.entries.len(),
        averaged.sources.len()
    );

    let reread = TensorFile::read(&out)?;
    println!(
        "first weights of the final model: {:?}",
        &reread.entries[0].values[..4]
    );
    Ok(())
}
