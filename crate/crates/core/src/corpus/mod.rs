//! Dataset manifests: the JSON-lines schema tying audio files to
//! reference transcripts and stratification metadata, plus layout
//! validation, synthetic-corpus construction, noise augmentation and
//! stratified splitting.
//!
//! A manifest file starts with one header line carrying the schema tag,
//! the normalization policy and free-form provenance, followed by one
//! record per line. Header-less files are accepted and get the default
//! policy.

mod augment;
pub mod demo;
mod split;
mod synth;

pub use augment::{augment_with_noise, load_noise_bank, AugmentOutcome};
pub use split::{stratified_split, SplitFractions, SplitOutcome};
pub use synth::{build_synthetic_manifest, StubTts, SubprocessTts, TtsProvider};

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textnorm::NormPolicy;

pub const MANIFEST_SCHEMA: &str = "asr-manifest/1";

/// Clinical content categories A-F covering the procedural workflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ContentCategory {
    #[serde(rename = "A")]
    PreOp,
    #[serde(rename = "B")]
    IntraOp,
    #[serde(rename = "C")]
    Lesion,
    #[serde(rename = "D")]
    Cancer,
    #[serde(rename = "E")]
    Inflammation,
    #[serde(rename = "F")]
    PostOp,
}

impl ContentCategory {
    pub const ALL: [ContentCategory; 6] = [
        Self::PreOp,
        Self::IntraOp,
        Self::Lesion,
        Self::Cancer,
        Self::Inflammation,
        Self::PostOp,
    ];

    pub fn letter(self) -> char {
        match self {
            Self::PreOp => 'A',
            Self::IntraOp => 'B',
            Self::Lesion => 'C',
            Self::Cancer => 'D',
            Self::Inflammation => 'E',
            Self::PostOp => 'F',
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::PreOp => "PreOp",
            Self::IntraOp => "IntraOp",
            Self::Lesion => "Lesion",
            Self::Cancer => "Cancer",
            Self::Inflammation => "Inflammation",
            Self::PostOp => "PostOp",
        }
    }
}

impl fmt::Display for ContentCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Voice {
    Male,
    Female,
}

impl Voice {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Male => "male",
            Self::Female => "female",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "male" => Some(Self::Male),
            "female" => Some(Self::Female),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Val => "val",
            Self::Test => "test",
        }
    }
}

/// One audio-reference pair, the unit of evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub id: String,
    /// Relative to the manifest's directory.
    pub audio_path: String,
    pub reference: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub speaker: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub center: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub category: Option<ContentCategory>,
    pub duration_s: f64,
    /// For synthetic mixtures this is the mixing target; for field
    /// recordings an estimate.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub snr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub voice: Option<Voice>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub split: Option<Split>,
}

/// Free-form creation metadata carried in the manifest header. Keys are
/// ordered so serialization is stable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Provenance(pub BTreeMap<String, serde_json::Value>);

impl Provenance {
    pub fn tool() -> Self {
        let mut p = Self::default();
        p.set("tool", env!("CARGO_PKG_NAME"));
        p.set("tool_version", env!("CARGO_PKG_VERSION"));
        p
    }

    pub fn set(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.0.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&serde_json::Value> {
        self.0.get(key)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestHeader {
    schema: String,
    norm_policy: NormPolicy,
    provenance: Provenance,
}

/// A non-empty, uniquely-keyed record list plus the policy scores must
/// use and how the data came to be.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub records: Vec<UtteranceRecord>,
    pub norm_policy: NormPolicy,
    pub provenance: Provenance,
}

impl Manifest {
    pub fn new(
        records: Vec<UtteranceRecord>,
        norm_policy: NormPolicy,
        provenance: Provenance,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Manifest("manifest has no records".into()));
        }
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            if r.id.is_empty() {
                return Err(Error::Manifest(format!("record {i} has an empty id")));
            }
            if let Some(first) = seen.insert(&r.id, i) {
                return Err(Error::Manifest(format!(
                    "duplicate id {:?} at records {first} and {i}",
                    r.id
                )));
            }
            if !r.duration_s.is_finite() || r.duration_s <= 0.0 {
                return Err(Error::Manifest(format!(
                    "record {i} ({}): duration {} must be positive",
                    r.id, r.duration_s
                )));
            }
        }
        Ok(Self {
            records,
            norm_policy,
            provenance,
        })
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let header = ManifestHeader {
            schema: MANIFEST_SCHEMA.to_string(),
            norm_policy: self.norm_policy,
            provenance: self.provenance.clone(),
        };
        let mut out = Vec::new();
        serde_json::to_writer(&mut out, &header).expect("header serializes");
        out.push(b'\n');
        for r in &self.records {
            serde_json::to_writer(&mut out, r).expect("record serializes");
            out.push(b'\n');
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&out).map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate().peekable();

        let mut norm_policy = NormPolicy::default();
        let mut provenance = Provenance::default();
        if let Some((_, first)) = lines.peek() {
            let value: serde_json::Value = serde_json::from_str(first)
                .map_err(|e| Error::parse(path, format!("line 1: {e}")))?;
            if value.get("schema").is_some() {
                let header: ManifestHeader = serde_json::from_value(value)
                    .map_err(|e| Error::parse(path, format!("header: {e}")))?;
                if header.schema != MANIFEST_SCHEMA {
                    return Err(Error::parse(
                        path,
                        format!("unsupported schema {:?}", header.schema),
                    ));
                }
                norm_policy = header.norm_policy;
                provenance = header.provenance;
                lines.next();
            }
        }

        let mut records = Vec::new();
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let record: UtteranceRecord = serde_json::from_str(line)
                .map_err(|e| Error::parse(path, format!("line {}: {e}", lineno + 1)))?;
            records.push(record);
        }
        Self::new(records, norm_policy, provenance)
            .map_err(|e| Error::parse(path, e.to_string()))
    }

    /// Runs every validation rule; findings are the return value, not
    /// errors.
    pub fn validate(&self, base_dir: &Path, layout: Option<&LayoutSpec>) -> ValidationReport {
        let mut checks = Vec::new();

        // unique ids (Manifest::new enforces this, but files edited by
        // hand arrive here through other paths)
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        let mut dups = Vec::new();
        for (i, r) in self.records.iter().enumerate() {
            if let Some(first) = seen.insert(&r.id, i) {
                dups.push(format!("{:?} at records {first} and {i}", r.id));
            }
        }
        checks.push(CheckResult {
            rule: "unique-ids".into(),
            passed: dups.is_empty(),
            detail: if dups.is_empty() {
                format!("{} unique ids", self.records.len())
            } else {
                format!("duplicates: {}", dups.join(", "))
            },
        });

        let missing: Vec<&str> = self
            .records
            .iter()
            .filter(|r| !base_dir.join(&r.audio_path).is_file())
            .map(|r| r.id.as_str())
            .collect();
        checks.push(CheckResult {
            rule: "audio-files-exist".into(),
            passed: missing.is_empty(),
            detail: if missing.is_empty() {
                "all audio files present".into()
            } else {
                format!(
                    "{} missing, first: {}",
                    missing.len(),
                    missing.iter().take(5).cloned().collect::<Vec<_>>().join(", ")
                )
            },
        });

        let bad_durations: Vec<&str> = self
            .records
            .iter()
            .filter(|r| !r.duration_s.is_finite() || r.duration_s <= 0.0)
            .map(|r| r.id.as_str())
            .collect();
        checks.push(CheckResult {
            rule: "durations-positive".into(),
            passed: bad_durations.is_empty(),
            detail: if bad_durations.is_empty() {
                "all durations positive".into()
            } else {
                format!("non-positive durations: {}", bad_durations.join(", "))
            },
        });

        if let Some(spec) = layout {
            checks.push(self.check_layout(spec));
        }

        ValidationReport { checks }
    }

    fn check_layout(&self, spec: &LayoutSpec) -> CheckResult {
        let mut cells: BTreeMap<(String, char), usize> = BTreeMap::new();
        let mut unstratified = 0usize;
        for r in &self.records {
            match (&r.center, r.category) {
                (Some(c), Some(k)) => {
                    *cells.entry((c.clone(), k.letter())).or_insert(0) += 1;
                }
                _ => unstratified += 1,
            }
        }
        let centers: std::collections::BTreeSet<&String> =
            cells.keys().map(|(c, _)| c).collect();
        let categories: std::collections::BTreeSet<char> =
            cells.keys().map(|&(_, k)| k).collect();

        let mut problems = Vec::new();
        if unstratified > 0 {
            problems.push(format!("{unstratified} records lack center or category"));
        }
        if centers.len() != spec.centers {
            problems.push(format!("{} centers, expected {}", centers.len(), spec.centers));
        }
        if categories.len() != spec.categories {
            problems.push(format!(
                "{} categories, expected {}",
                categories.len(),
                spec.categories
            ));
        }
        for center in &centers {
            for &cat in &categories {
                let n = cells.get(&((*center).clone(), cat)).copied().unwrap_or(0);
                if n != spec.per_cell {
                    problems.push(format!(
                        "({center}, {cat}) has {n} records, expected {}",
                        spec.per_cell
                    ));
                }
            }
        }

        CheckResult {
            rule: format!("layout-{spec}"),
            passed: problems.is_empty(),
            detail: if problems.is_empty() {
                format!(
                    "{} centers x {} categories x {} records",
                    spec.centers, spec.categories, spec.per_cell
                )
            } else {
                problems.join("; ")
            },
        }
    }
}

/// Expected stratification shape, e.g. `5x6x10` for five centers, six
/// categories, ten records per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayoutSpec {
    pub centers: usize,
    pub categories: usize,
    pub per_cell: usize,
}

impl LayoutSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(['x', 'X']).collect();
        let bad = || Error::Manifest(format!("bad layout spec {s:?}, want e.g. 5x6x10"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let nums: Vec<usize> = parts
            .iter()
            .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        if nums.contains(&0) {
            return Err(bad());
        }
        Ok(Self {
            centers: nums[0],
            categories: nums[1],
            per_cell: nums[2],
        })
    }
}

impl fmt::Display for LayoutSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.centers, self.categories, self.per_cell)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub rule: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Stable per-record seed: mixes the corpus seed with the record id so
/// augmentation draws do not depend on record order or worker count.
pub(crate) fn record_seed(seed: u64, id: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in id.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h ^ seed.wrapping_mul(0x9e3779b97f4a7c15)
}
