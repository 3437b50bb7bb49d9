//! Deterministic stratified train/val/test assignment.
//!
//! Synthetic corpora stratify by (voice, duration quartile) so each split
//! sees every voice and length regime. When any stratum is smaller than
//! the number of requested splits, the whole manifest falls back to one
//! global split and the caller is told.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{record_seed, Manifest, Split};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitFractions {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        for (name, f) in [("train", train), ("val", val), ("test", test)] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidConfig(format!(
                    "{name} fraction {f} outside [0, 1]"
                )));
            }
        }
        let sum = train + val + test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "fractions sum to {sum}, expected 1"
            )));
        }
        Ok(Self { train, val, test })
    }

    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidConfig(format!(
                "fractions {s:?} must be train,val,test"
            )));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidConfig(format!("bad fraction {p:?}")))
            })
            .collect::<Result<_>>()?;
        Self::new(nums[0], nums[1], nums[2])
    }

    fn active_splits(&self) -> usize {
        [self.train, self.val, self.test]
            .iter()
            .filter(|&&f| f > 0.0)
            .count()
    }
}

#[derive(Debug)]
pub struct SplitOutcome {
    pub manifest: Manifest,
    /// True when a too-small stratum forced a single global split.
    pub fell_back_to_global: bool,
}

pub fn stratified_split(
    manifest: &Manifest,
    fractions: SplitFractions,
    seed: u64,
) -> Result<SplitOutcome> {
    let n = manifest.records.len();

    // duration quartile per record: index-based over the sorted order so
    // assignment is total even with tied durations
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        manifest.records[a]
            .duration_s
            .partial_cmp(&manifest.records[b].duration_s)
            .expect("durations validated finite")
            .then(manifest.records[a].id.cmp(&manifest.records[b].id))
    });
    let mut quartile = vec![0usize; n];
    for (rank, &idx) in order.iter().enumerate() {
        quartile[idx] = rank * 4 / n;
    }

    let mut strata: BTreeMap<(Option<String>, usize), Vec<usize>> = BTreeMap::new();
    for (i, r) in manifest.records.iter().enumerate() {
        strata
            .entry((r.voice.map(|v| v.as_str().to_string()), quartile[i]))
            .or_default()
            .push(i);
    }

    let needed = fractions.active_splits();
    let fell_back = strata.values().any(|members| members.len() < needed);
    if fell_back {
        strata.clear();
        strata.insert((None, 0), (0..n).collect());
    }

    let mut assignment: Vec<Option<Split>> = vec![None; n];
    for ((voice, quart), mut members) in strata {
        // shuffle within the stratum, seeded by the stratum key
        let key = format!("{}|{quart}", voice.as_deref().unwrap_or("-"));
        let mut rng = ChaCha8Rng::seed_from_u64(record_seed(seed, &key));
        members.sort_by(|&a, &b| manifest.records[a].id.cmp(&manifest.records[b].id));
        members.shuffle(&mut rng);

        let counts = largest_remainder(members.len(), fractions);
        let mut cursor = 0usize;
        for (split, count) in [
            (Split::Train, counts[0]),
            (Split::Val, counts[1]),
            (Split::Test, counts[2]),
        ] {
            for &idx in &members[cursor..cursor + count] {
                assignment[idx] = Some(split);
            }
            cursor += count;
        }
    }

    let mut records = manifest.records.clone();
    for (r, split) in records.iter_mut().zip(assignment) {
        r.split = Some(split.expect("every record assigned"));
    }

    let mut provenance = manifest.provenance.clone();
    provenance.set("stage", "split");
    provenance.set("split_seed", seed);
    provenance.set(
        "split_fractions",
        vec![fractions.train, fractions.val, fractions.test],
    );
    provenance.set("split_fell_back_to_global", fell_back);

    Ok(SplitOutcome {
        manifest: Manifest::new(records, manifest.norm_policy, provenance)?,
        fell_back_to_global: fell_back,
    })
}

/// Integer allocation of `n` into three parts tracking the fractions:
/// floors first, remainder to the largest fractional parts (ties resolved
/// train > val > test).
fn largest_remainder(n: usize, fractions: SplitFractions) -> [usize; 3] {
    let targets = [
        fractions.train * n as f64,
        fractions.val * n as f64,
        fractions.test * n as f64,
    ];
    let mut counts = [0usize; 3];
    let mut rema: Vec<(f64, usize)> = Vec::with_capacity(3);
    let mut assigned = 0usize;
    for (i, t) in targets.iter().enumerate() {
        counts[i] = t.floor() as usize;
        assigned += counts[i];
        rema.push((t - t.floor(), i));
    }
    rema.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for k in 0..(n - assigned) {
        counts[rema[k % 3].1] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ContentCategory, Provenance, UtteranceRecord, Voice};
    use crate::textnorm::NormPolicy;

    fn corpus(n: usize) -> Manifest {
        let records = (0..n)
            .map(|i| UtteranceRecord {
                id: format!("u{i:04}"),
                audio_path: format!("audio/u{i:04}.wav"),
                reference: "盲肠".into(),
                speaker: None,
                center: None,
                category: Some(ContentCategory::ALL[i % 6]),
                duration_s: 0.5 + (i % 17) as f64 * 0.1,
                snr_db: None,
                voice: Some(if i % 2 == 0 { Voice::Male } else { Voice::Female }),
                split: None,
            })
            .collect();
        Manifest::new(records, NormPolicy::default(), Provenance::default()).unwrap()
    }

    fn split_sizes(m: &Manifest) -> (usize, usize, usize) {
        let count = |s: Split| m.records.iter().filter(|r| r.split == Some(s)).count();
        (count(Split::Train), count(Split::Val), count(Split::Test))
    }

    #[test]
    fn thousand_records_split_800_100_100() {
        let m = corpus(1000);
        let f = SplitFractions::new(0.8, 0.1, 0.1).unwrap();
        let out = stratified_split(&m, f, 3).unwrap();
        assert!(!out.fell_back_to_global);
        let (train, val, test) = split_sizes(&out.manifest);
        assert_eq!(train + val + test, 1000);
        // counting oracle: per-stratum largest-remainder sums stay within
        // one of the target per stratum, eight strata here
        assert!((train as i64 - 800).unsigned_abs() <= 8, "train {train}");
        assert!((val as i64 - 100).unsigned_abs() <= 8, "val {val}");
        assert!((test as i64 - 100).unsigned_abs() <= 8, "test {test}");
    }

    #[test]
    fn all_train_when_fractions_are_degenerate() {
        let m = corpus(40);
        let f = SplitFractions::new(1.0, 0.0, 0.0).unwrap();
        let out = stratified_split(&m, f, 0).unwrap();
        let (train, val, test) = split_sizes(&out.manifest);
        assert_eq!((train, val, test), (40, 0, 0));
    }

    #[test]
    fn same_seed_reproduces_assignment() {
        let m = corpus(120);
        let f = SplitFractions::new(0.8, 0.1, 0.1).unwrap();
        let a = stratified_split(&m, f, 5).unwrap();
        let b = stratified_split(&m, f, 5).unwrap();
        assert_eq!(a.manifest, b.manifest);
        let c = stratified_split(&m, f, 6).unwrap();
        assert_ne!(a.manifest.records, c.manifest.records);
    }

    #[test]
    fn tiny_strata_fall_back_to_global_split() {
        let m = corpus(5);
        let f = SplitFractions::new(0.6, 0.2, 0.2).unwrap();
        let out = stratified_split(&m, f, 1).unwrap();
        assert!(out.fell_back_to_global);
        let (train, val, test) = split_sizes(&out.manifest);
        assert_eq!(train + val + test, 5);
        assert_eq!(train, 3);
    }

    #[test]
    fn fraction_validation() {
        assert!(SplitFractions::new(0.5, 0.2, 0.2).is_err());
        assert!(SplitFractions::new(-0.1, 0.6, 0.5).is_err());
        assert!(SplitFractions::parse("0.8,0.1,0.1").is_ok());
        assert!(SplitFractions::parse("0.8,0.2").is_err());
    }

    #[test]
    fn largest_remainder_is_exact() {
        let f = SplitFractions::new(0.8, 0.1, 0.1).unwrap();
        assert_eq!(largest_remainder(1000, f), [800, 100, 100]);
        // n=7: targets (5.6, 0.7, 0.7); the two remainders go to the
        // larger fractional parts val and test
        assert_eq!(largest_remainder(7, f), [5, 1, 1]);
    }
}
