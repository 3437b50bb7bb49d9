//! Checkpoint selection by validation loss and element-wise weight
//! averaging over a framework-neutral tensor container.
//!
//! The container is a plain-text header (entry names and shapes, plus the
//! source list for averaged outputs) followed by raw little-endian
//! float32 data in header order. Converters to and from framework
//! formats are the caller's concern.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

const MAGIC: &str = "TENSORFILE 1";

/// Metadata for one saved checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub path: PathBuf,
    pub step: u64,
    pub val_loss: f64,
}

impl CheckpointMeta {
    pub fn new(path: impl Into<PathBuf>, step: u64, val_loss: f64) -> Result<Self> {
        if !val_loss.is_finite() {
            return Err(Error::Checkpoint(format!("non-finite val_loss {val_loss}")));
        }
        Ok(Self {
            path: path.into(),
            step,
            val_loss,
        })
    }
}

/// One named tensor: positive shape, row-major float32 values.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

impl TensorEntry {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, values: Vec<f32>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::Checkpoint(format!(
                "tensor name {name:?} must be non-empty without whitespace"
            )));
        }
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Checkpoint(format!("{name}: shape {shape:?} must be positive")));
        }
        let count: usize = shape.iter().product();
        if values.len() != count {
            return Err(Error::Checkpoint(format!(
                "{name}: {} values for shape {shape:?} (expected {count})",
                values.len()
            )));
        }
        Ok(Self {
            name,
            shape,
            values,
        })
    }
}

/// Ordered named tensors with an optional record of source files.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorFile {
    pub entries: Vec<TensorEntry>,
    pub sources: Vec<String>,
}

impl TensorFile {
    pub fn new(entries: Vec<TensorEntry>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for e in &entries {
            if !seen.insert(e.name.clone()) {
                return Err(Error::Checkpoint(format!("duplicate tensor name {}", e.name)));
            }
        }
        Ok(Self {
            entries,
            sources: Vec::new(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out: Vec<u8> = Vec::new();
        writeln!(out, "{MAGIC}").unwrap();
        for s in &self.sources {
            writeln!(out, "source {s}").unwrap();
        }
        writeln!(out, "entries {}", self.entries.len()).unwrap();
        for e in &self.entries {
            write!(out, "tensor {}", e.name).unwrap();
            for d in &e.shape {
                write!(out, " {d}").unwrap();
            }
            writeln!(out).unwrap();
        }
        writeln!(out).unwrap();
        for e in &self.entries {
            for v in &e.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);

        let mut line = String::new();
        reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if line.trim_end() != MAGIC {
            return Err(Error::parse(path, format!("bad magic {:?}", line.trim_end())));
        }

        let mut sources = Vec::new();
        let n_entries: usize;
        loop {
            line.clear();
            reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
            let trimmed = line.trim_end();
            if let Some(src) = trimmed.strip_prefix("source ") {
                sources.push(src.to_string());
            } else if let Some(n) = trimmed.strip_prefix("entries ") {
                n_entries = n
                    .parse()
                    .map_err(|_| Error::parse(path, format!("bad entry count {n:?}")))?;
                break;
            } else {
                return Err(Error::parse(path, format!("unexpected header line {trimmed:?}")));
            }
        }
        let mut headers = Vec::with_capacity(n_entries);
        for _ in 0..n_entries {
            line.clear();
            reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
            let trimmed = line.trim_end();
            let rest = trimmed
                .strip_prefix("tensor ")
                .ok_or_else(|| Error::parse(path, format!("expected tensor line, got {trimmed:?}")))?;
            let mut parts = rest.split(' ');
            let name = parts
                .next()
                .filter(|s| !s.is_empty())
                .ok_or_else(|| Error::parse(path, "tensor line without name"))?
                .to_string();
            let shape: Vec<usize> = parts
                .map(|p| {
                    p.parse::<usize>()
                        .map_err(|_| Error::parse(path, format!("{name}: bad dimension {p:?}")))
                })
                .collect::<Result<_>>()?;
            headers.push((name, shape));
        }
        line.clear();
        reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if !line.trim_end().is_empty() {
            return Err(Error::parse(path, "missing blank line before data"));
        }

        let mut entries = Vec::with_capacity(n_entries);
        for (name, shape) in headers {
            let count: usize = shape.iter().product();
            let mut raw = vec![0u8; count * 4];
            reader
                .read_exact(&mut raw)
                .map_err(|e| Error::parse(path, format!("{name}: truncated data: {e}")))?;
            let values = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            entries.push(TensorEntry::new(name, shape, values)?);
        }
        let mut trailing = Vec::new();
        reader
            .read_to_end(&mut trailing)
            .map_err(|e| Error::io(path, e))?;
        if !trailing.is_empty() {
            return Err(Error::parse(
                path,
                format!("{} trailing bytes after tensor data", trailing.len()),
            ));
        }

        let mut tf = Self::new(entries)?;
        tf.sources = sources;
        Ok(tf)
    }
}

/// Sorts by ascending validation loss (ties broken toward the higher,
/// i.e. later, step) and keeps the best `keep`.
pub fn select_top_checkpoints(metas: &[CheckpointMeta], keep: usize) -> Result<Vec<CheckpointMeta>> {
    if metas.is_empty() {
        return Err(Error::Checkpoint("no checkpoints to select from".into()));
    }
    if keep == 0 {
        return Err(Error::Checkpoint("keep must be at least 1".into()));
    }
    let mut sorted = metas.to_vec();
    sorted.sort_by(|a, b| {
        a.val_loss
            .partial_cmp(&b.val_loss)
            .expect("val_loss validated finite")
            .then(b.step.cmp(&a.step))
    });
    sorted.truncate(keep);
    Ok(sorted)
}

/// Element-wise arithmetic mean of the tensor files. Entry names and
/// shapes must agree across files; accumulation runs in double precision
/// so the result does not depend on input order at float32 resolution.
pub fn average_tensor_files(files: &[TensorFile]) -> Result<TensorFile> {
    if files.is_empty() {
        return Err(Error::Checkpoint("no tensor files to average".into()));
    }
    let first = &files[0];
    for (fi, f) in files.iter().enumerate().skip(1) {
        if f.entries.len() != first.entries.len() {
            return Err(Error::Checkpoint(format!(
                "file {fi} has {} entries, expected {}",
                f.entries.len(),
                first.entries.len()
            )));
        }
        for (a, b) in first.entries.iter().zip(&f.entries) {
            if a.name != b.name {
                return Err(Error::Checkpoint(format!(
                    "file {fi}: entry name {} does not match {}",
                    b.name, a.name
                )));
            }
            if a.shape != b.shape {
                return Err(Error::Checkpoint(format!(
                    "entry {}: shape {:?} in file {fi} does not match {:?}",
                    a.name, b.shape, a.shape
                )));
            }
        }
    }

    let inv = 1.0f64 / files.len() as f64;
    let entries = first
        .entries
        .iter()
        .enumerate()
        .map(|(ei, proto)| {
            let mut acc = vec![0.0f64; proto.values.len()];
            for f in files {
                for (a, v) in acc.iter_mut().zip(&f.entries[ei].values) {
                    *a += f64::from(*v);
                }
            }
            let values = acc.into_iter().map(|a| (a * inv) as f32).collect();
            TensorEntry::new(proto.name.clone(), proto.shape.clone(), values)
        })
        .collect::<Result<Vec<_>>>()?;
    TensorFile::new(entries)
}

/// Reads, averages and writes checkpoint files; the output header records
/// the source list.
pub fn average_checkpoint_files(paths: &[PathBuf], out: &Path) -> Result<TensorFile> {
    let files = paths
        .iter()
        .map(|p| TensorFile::read(p))
        .collect::<Result<Vec<_>>>()?;
    let mut avg = average_tensor_files(&files)?;
    avg.sources = paths.iter().map(|p| p.display().to_string()).collect();
    avg.write(out)?;
    Ok(avg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn meta(step: u64, loss: f64) -> CheckpointMeta {
        CheckpointMeta::new(format!("ckpt-{step}.tf"), step, loss).unwrap()
    }

    #[test]
    fn selection_sorts_by_loss() {
        let metas = vec![meta(2000, 0.5), meta(4000, 0.3), meta(6000, 0.4)];
        let top = select_top_checkpoints(&metas, 2).unwrap();
        assert_eq!(top.len(), 2);
        assert_eq!(top[0].val_loss, 0.3);
        assert_eq!(top[1].val_loss, 0.4);
    }

    #[test]
    fn selection_keeps_all_when_keep_exceeds_len() {
        let metas = vec![meta(2000, 0.5), meta(4000, 0.3)];
        let top = select_top_checkpoints(&metas, 10).unwrap();
        assert_eq!(top.len(), 2);
        assert_eq!(top[0].step, 4000);
    }

    #[test]
    fn selection_tie_breaks_toward_later_step() {
        let metas = vec![meta(2000, 0.3), meta(4000, 0.3)];
        let top = select_top_checkpoints(&metas, 2).unwrap();
        assert_eq!(top[0].step, 4000);
    }

    #[test]
    fn selection_rejects_empty_and_zero_keep() {
        assert!(select_top_checkpoints(&[], 1).is_err());
        assert!(select_top_checkpoints(&[meta(1, 0.1)], 0).is_err());
        assert!(CheckpointMeta::new("x", 1, f64::NAN).is_err());
    }

    fn tensor_file(values: &[f32]) -> TensorFile {
        TensorFile::new(vec![
            TensorEntry::new("w", vec![values.len()], values.to_vec()).unwrap()
        ])
        .unwrap()
    }

    #[test]
    fn averaging_single_file_is_identity() {
        let f = tensor_file(&[1.5, -0.25, 3.0]);
        let avg = average_tensor_files(std::slice::from_ref(&f)).unwrap();
        assert_eq!(avg.entries[0].values, f.entries[0].values);
    }

    #[test]
    fn averaging_two_scalars() {
        let avg = average_tensor_files(&[tensor_file(&[1.0]), tensor_file(&[3.0])]).unwrap();
        assert_eq!(avg.entries[0].values, vec![2.0]);
    }

    #[test]
    fn averaging_matches_mean_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let files: Vec<TensorFile> = (0..10)
            .map(|_| {
                TensorFile::new(
                    (0..3)
                        .map(|e| {
                            TensorEntry::new(
                                format!("t{e}"),
                                vec![4, 5],
                                (0..20).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
                            )
                            .unwrap()
                        })
                        .collect(),
                )
                .unwrap()
            })
            .collect();
        let avg = average_tensor_files(&files).unwrap();
        for e in 0..3 {
            for i in 0..20 {
                let mean: f64 = files
                    .iter()
                    .map(|f| f64::from(f.entries[e].values[i]))
                    .sum::<f64>()
                    / 10.0;
                assert!((f64::from(avg.entries[e].values[i]) - mean).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn averaging_rejects_shape_and_name_mismatch() {
        let a = tensor_file(&[1.0, 2.0]);
        let b = tensor_file(&[1.0]);
        let err = average_tensor_files(&[a.clone(), b]).unwrap_err();
        assert!(err.to_string().contains('w'), "{err}");

        let c = TensorFile::new(vec![
            TensorEntry::new("other", vec![2], vec![0.0, 0.0]).unwrap()
        ])
        .unwrap();
        assert!(average_tensor_files(&[a, c]).is_err());
    }

    #[test]
    fn tensor_file_roundtrip_with_sources() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.tf");
        let mut f = TensorFile::new(vec![
            TensorEntry::new("enc.w", vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap(),
            TensorEntry::new("dec.b", vec![2], vec![-1.0, 0.5]).unwrap(),
        ])
        .unwrap();
        f.sources = vec!["x.tf".into(), "y.tf".into()];
        f.write(&path).unwrap();
        let back = TensorFile::read(&path).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn tensor_file_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.tf");
        std::fs::write(&path, "NOPE\n").unwrap();
        assert!(TensorFile::read(&path).is_err());

        // truncated data
        let good = dir.path().join("good.tf");
        tensor_file(&[1.0, 2.0, 3.0]).write(&good).unwrap();
        let mut bytes = std::fs::read(&good).unwrap();
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&path, bytes).unwrap();
        assert!(TensorFile::read(&path).is_err());

        assert!(TensorEntry::new("bad name", vec![1], vec![0.0]).is_err());
        assert!(TensorEntry::new("x", vec![0], vec![]).is_err());
        assert!(TensorEntry::new("x", vec![2], vec![0.0]).is_err());
    }
}
