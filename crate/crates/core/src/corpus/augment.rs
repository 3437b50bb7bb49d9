//! Noise augmentation over a manifest: per record, draw a target SNR
//! from the schedule, pick a noise clip, mix, and write the result under
//! a new corpus directory. All randomness derives from (seed, record id),
//! so output is identical across runs and worker counts.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::audio::{is_silent, mix_at_snr, read_wav, write_wav, NoiseClip, SnrSchedule};
use crate::error::{Error, Result};
use crate::pool::par_map;

use super::{record_seed, Manifest, Provenance, UtteranceRecord};

/// Augmented manifest plus the warnings a corpus report should surface.
#[derive(Debug)]
pub struct AugmentOutcome {
    pub manifest: Manifest,
    /// Ids of clean records skipped because they were silent.
    pub skipped_silent: Vec<String>,
    /// Total samples hard-clipped across the corpus.
    pub clipped_samples: u64,
}

/// Reads every `.wav` in `dir` (sorted by file name) as a noise clip.
pub fn load_noise_bank(dir: &Path) -> Result<Vec<NoiseClip>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(dir, e))?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().map(|x| x == "wav").unwrap_or(false))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Manifest(format!(
            "no .wav files in noise directory {}",
            dir.display()
        )));
    }
    paths
        .into_iter()
        .map(|p| {
            let label = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            NoiseClip::new(read_wav(&p)?, label)
        })
        .collect()
}

pub fn augment_with_noise(
    clean: &Manifest,
    clean_dir: &Path,
    noise_bank: &[NoiseClip],
    schedule: &SnrSchedule,
    seed: u64,
    out_dir: &Path,
    jobs: usize,
) -> Result<AugmentOutcome> {
    if noise_bank.is_empty() {
        return Err(Error::Manifest("noise bank is empty".into()));
    }
    let audio_dir = out_dir.join("audio");
    std::fs::create_dir_all(&audio_dir).map_err(|e| Error::io(&audio_dir, e))?;

    enum One {
        Done(Box<UtteranceRecord>, u64),
        SkippedSilent(String),
        Failed(Error),
    }

    let results = par_map(clean.records.len(), jobs, |i| {
        let record = &clean.records[i];
        let run = || -> Result<One> {
            let wave = read_wav(&clean_dir.join(&record.audio_path))?;
            if is_silent(&wave) {
                return Ok(One::SkippedSilent(record.id.clone()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(record_seed(seed, &record.id));
            let target = schedule.sample(&mut rng);
            let clip = &noise_bank[rng.gen_range(0..noise_bank.len())];
            let mixed = mix_at_snr(&wave, clip, target)?;

            let audio_path = format!("audio/{}.wav", sanitize_id(&record.id));
            write_wav(&mixed.waveform, &out_dir.join(&audio_path))?;
            let mut out = record.clone();
            out.audio_path = audio_path;
            out.snr_db = Some(target);
            Ok(One::Done(Box::new(out), mixed.clipped_samples as u64))
        };
        run().unwrap_or_else(One::Failed)
    });

    let mut records = Vec::with_capacity(results.len());
    let mut skipped_silent = Vec::new();
    let mut clipped_samples = 0u64;
    for one in results {
        match one {
            One::Done(record, clips) => {
                records.push(*record);
                clipped_samples += clips;
            }
            One::SkippedSilent(id) => skipped_silent.push(id),
            One::Failed(e) => return Err(e),
        }
    }

    let mut provenance = Provenance::tool();
    provenance.set("stage", "augment");
    provenance.set("seed", seed);
    provenance.set(
        "schedule",
        serde_json::to_value(schedule).expect("schedule serializes"),
    );
    provenance.set("noise_clips", noise_bank.len() as u64);
    provenance.set("skipped_silent", skipped_silent.clone());
    provenance.set("clipped_samples", clipped_samples);

    let manifest = Manifest::new(records, clean.norm_policy, provenance)?;
    manifest.write_jsonl(&out_dir.join("manifest.jsonl"))?;

    if !skipped_silent.is_empty() {
        eprintln!(
            "warning: skipped {} silent record(s): {}",
            skipped_silent.len(),
            skipped_silent.join(", ")
        );
    }

    Ok(AugmentOutcome {
        manifest,
        skipped_silent,
        clipped_samples,
    })
}

fn sanitize_id(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
