//! Transcription quality metrics: CER, BLEU-1, medical-term accuracy,
//! BERTScore over externally provided embeddings, and real-time factor.
//!
//! Every text metric normalizes and tokenizes its inputs through
//! [`crate::textnorm`], so raw and pre-normalized inputs score alike.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textnorm::{normalize_transcript, tokenize_chars, NormPolicy};

/// Per-utterance metric values. `med_acc` is present exactly when the
/// reference carries at least one lexicon term; CER may exceed 1.0 when
/// the hypothesis inserts tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceScore {
    pub cer: f64,
    pub bleu1: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bertscore_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub med_acc: Option<f64>,
    pub n_ref_tokens: usize,
    pub n_terms_in_ref: usize,
}

/// Unit-cost Levenshtein distance over token slices.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, ai) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, bj) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ai != bj);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Character error rate: edit distance between token sequences divided by
/// the reference token count.
pub fn cer(hyp: &str, reference: &str, policy: &NormPolicy) -> Result<f64> {
    let ref_norm = normalize_transcript(reference, policy);
    let ref_tokens = tokenize_chars(&ref_norm);
    if ref_tokens.is_empty() {
        return Err(Error::EmptyReference);
    }
    let hyp_norm = normalize_transcript(hyp, policy);
    let hyp_tokens = tokenize_chars(&hyp_norm);
    Ok(edit_distance(&hyp_tokens, &ref_tokens) as f64 / ref_tokens.len() as f64)
}

/// Unigram BLEU: clipped unigram precision times the brevity penalty
/// `min(1, e^(1 - |ref|/|hyp|))`. An empty hypothesis scores 0.
pub fn bleu1(hyp: &str, reference: &str, policy: &NormPolicy) -> Result<f64> {
    let ref_norm = normalize_transcript(reference, policy);
    let ref_tokens = tokenize_chars(&ref_norm);
    if ref_tokens.is_empty() {
        return Err(Error::EmptyReference);
    }
    let hyp_norm = normalize_transcript(hyp, policy);
    let hyp_tokens = tokenize_chars(&hyp_norm);
    if hyp_tokens.is_empty() {
        return Ok(0.0);
    }

    let mut ref_counts: HashMap<&str, usize> = HashMap::new();
    for t in &ref_tokens {
        *ref_counts.entry(t).or_insert(0) += 1;
    }
    let mut clipped = 0usize;
    for t in &hyp_tokens {
        if let Some(c) = ref_counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                clipped += 1;
            }
        }
    }
    let precision = clipped as f64 / hyp_tokens.len() as f64;
    let bp = if hyp_tokens.len() >= ref_tokens.len() {
        1.0
    } else {
        (1.0 - ref_tokens.len() as f64 / hyp_tokens.len() as f64).exp()
    };
    Ok(precision * bp)
}

/// Semantic categories for curated clinical terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermCategory {
    Anatomy,
    Morphology,
    Procedure,
    Context,
    Quality,
    Size,
}

impl TermCategory {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "anatomy" => Some(Self::Anatomy),
            "morphology" => Some(Self::Morphology),
            "procedure" => Some(Self::Procedure),
            "context" => Some(Self::Context),
            "quality" => Some(Self::Quality),
            "size" => Some(Self::Size),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Anatomy => "anatomy",
            Self::Morphology => "morphology",
            Self::Procedure => "procedure",
            Self::Context => "context",
            Self::Quality => "quality",
            Self::Size => "size",
        }
    }
}

/// Curated medical terms, stored pre-normalized under the scoring policy.
#[derive(Debug, Clone)]
pub struct TermLexicon {
    entries: Vec<(String, Option<TermCategory>)>,
}

impl TermLexicon {
    /// Builds a lexicon, normalizing each term and rejecting duplicates
    /// and terms that normalize to nothing.
    pub fn new<I, S>(terms: I, policy: &NormPolicy) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Option<TermCategory>)>,
        S: AsRef<str>,
    {
        let mut entries = Vec::new();
        let mut seen: BTreeMap<String, ()> = BTreeMap::new();
        for (i, (raw, category)) in terms.into_iter().enumerate() {
            let term = normalize_transcript(raw.as_ref(), policy);
            if term.is_empty() {
                return Err(Error::Lexicon(format!(
                    "term {i} ({:?}) normalizes to an empty string",
                    raw.as_ref()
                )));
            }
            if seen.insert(term.clone(), ()).is_some() {
                return Err(Error::Lexicon(format!("duplicate term after normalization: {term}")));
            }
            entries.push((term, category));
        }
        if entries.is_empty() {
            return Err(Error::Lexicon("lexicon is empty".into()));
        }
        Ok(Self { entries })
    }

    /// Parses the one-term-per-line format, `term[\tcategory]`, with `#`
    /// comments and blank lines ignored.
    pub fn parse(text: &str, policy: &NormPolicy) -> Result<Self> {
        let mut terms = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.splitn(2, '\t');
            let term = parts.next().unwrap().trim().to_string();
            let category = match parts.next().map(str::trim) {
                None | Some("") => None,
                Some(c) => Some(TermCategory::parse(c).ok_or_else(|| {
                    Error::Lexicon(format!("line {}: unknown category {c:?}", lineno + 1))
                })?),
            };
            terms.push((term, category));
        }
        Self::new(terms, policy)
    }

    pub fn read(path: &Path, policy: &NormPolicy) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, policy).map_err(|e| match e {
            Error::Lexicon(msg) => Error::Lexicon(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, Option<TermCategory>)> {
        self.entries.iter().map(|(t, c)| (t.as_str(), *c))
    }

    /// Stable content digest (FNV-1a over the sorted entries), recorded in
    /// report provenance so scores name the lexicon they used.
    pub fn digest(&self) -> String {
        let mut lines: Vec<String> = self
            .entries
            .iter()
            .map(|(t, c)| format!("{t}\t{}", c.map(|c| c.as_str()).unwrap_or("")))
            .collect();
        lines.sort();
        let mut hash: u64 = 0xcbf29ce484222325;
        for line in lines {
            for b in line.as_bytes() {
                hash ^= u64::from(*b);
                hash = hash.wrapping_mul(0x100000001b3);
            }
            hash ^= u64::from(b'\n');
            hash = hash.wrapping_mul(0x100000001b3);
        }
        format!("{hash:016x}")
    }
}

/// Reference-side term instances and how many the hypothesis reproduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermRecall {
    pub matched: usize,
    pub total: usize,
}

impl TermRecall {
    pub fn accuracy(&self) -> Option<f64> {
        if self.total == 0 {
            None
        } else {
            Some(self.matched as f64 / self.total as f64)
        }
    }
}

/// Counts lexicon term instances in the reference (leftmost-longest scan,
/// counted with multiplicity) and how many of them appear verbatim as
/// contiguous substrings of the hypothesis (greedy, with multiplicity).
pub fn term_recall(
    hyp: &str,
    reference: &str,
    lexicon: &TermLexicon,
    policy: &NormPolicy,
) -> TermRecall {
    let ref_norm = normalize_transcript(reference, policy);
    let hyp_norm = normalize_transcript(hyp, policy);

    // leftmost-longest segmentation of the reference
    let mut ref_counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut pos = 0;
    while pos < ref_norm.len() {
        let rest = &ref_norm[pos..];
        let hit = lexicon
            .entries
            .iter()
            .filter(|(t, _)| rest.starts_with(t.as_str()))
            .max_by_key(|(t, _)| t.len());
        match hit {
            Some((t, _)) => {
                *ref_counts.entry(t.as_str()).or_insert(0) += 1;
                pos += t.len();
            }
            None => {
                let c = rest.chars().next().expect("pos < len");
                pos += c.len_utf8();
            }
        }
    }

    let total: usize = ref_counts.values().sum();
    let mut matched = 0usize;
    for (term, &want) in &ref_counts {
        matched += want.min(count_non_overlapping(&hyp_norm, term));
    }
    TermRecall { matched, total }
}

fn count_non_overlapping(hay: &str, needle: &str) -> usize {
    let mut count = 0;
    let mut i = 0;
    while let Some(p) = hay[i..].find(needle) {
        count += 1;
        i += p + needle.len();
    }
    count
}

/// Fraction of reference term instances reproduced in the hypothesis, or
/// `None` when the reference carries no lexicon term (such utterances are
/// excluded from aggregation).
pub fn med_term_accuracy(
    hyp: &str,
    reference: &str,
    lexicon: &TermLexicon,
    policy: &NormPolicy,
) -> Option<f64> {
    term_recall(hyp, reference, lexicon, policy).accuracy()
}

const UNIT_NORM_TOL: f64 = 1e-6;

/// Greedy-matching BERTScore F1 over pre-normalized unit embeddings.
///
/// Recall averages, over reference tokens, the best cosine against any
/// hypothesis token; precision mirrors it; F1 is their harmonic mean. No
/// IDF weighting. Embeddings come from the provider file format and are
/// never computed here.
pub fn bertscore_f1(hyp_embeddings: &[Vec<f64>], ref_embeddings: &[Vec<f64>]) -> Result<f64> {
    validate_unit(hyp_embeddings)?;
    validate_unit(ref_embeddings)?;
    let dim = hyp_embeddings[0].len();
    for v in hyp_embeddings.iter().chain(ref_embeddings) {
        if v.len() != dim {
            return Err(Error::EmbeddingDimMismatch(dim, v.len()));
        }
    }

    let best = |from: &[Vec<f64>], against: &[Vec<f64>]| -> f64 {
        from.iter()
            .map(|v| {
                against
                    .iter()
                    .map(|u| dot(v, u))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .sum::<f64>()
            / from.len() as f64
    };
    let precision = best(hyp_embeddings, ref_embeddings);
    let recall = best(ref_embeddings, hyp_embeddings);
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

fn validate_unit(vectors: &[Vec<f64>]) -> Result<()> {
    if vectors.is_empty() {
        return Err(Error::EmptyEmbeddingList);
    }
    for (index, v) in vectors.iter().enumerate() {
        let norm = dot(v, v).sqrt();
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::NonUnitEmbedding { index, norm });
        }
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Processing wall time divided by audio duration.
pub fn real_time_factor(audio_seconds: f64, wall_seconds: f64) -> Result<f64> {
    if !audio_seconds.is_finite() || audio_seconds <= 0.0 {
        return Err(Error::NonPositiveAudio(audio_seconds));
    }
    if !wall_seconds.is_finite() || wall_seconds < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "wall seconds must be non-negative, got {wall_seconds}"
        )));
    }
    Ok(wall_seconds / audio_seconds)
}

/// Which side of a scored pair an embedding list belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingRole {
    Hyp,
    Ref,
}

impl EmbeddingRole {
    fn tag(self) -> u8 {
        match self {
            Self::Hyp => b'h',
            Self::Ref => b'r',
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            b'h' => Some(Self::Hyp),
            b'r' => Some(Self::Ref),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Hyp => "hyp",
            Self::Ref => "ref",
        }
    }
}

const EMBEDDING_MAGIC: &str = "ASREMB 1";

/// On-disk embedding store: one record per (utterance, role) with `n`
/// d-dimensional float32 token vectors, little-endian, plus a plain-text
/// sidecar index listing the ids.
#[derive(Debug, Default, Clone)]
pub struct EmbeddingFile {
    entries: BTreeMap<(String, EmbeddingRole), Vec<Vec<f64>>>,
}

impl EmbeddingFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        id: impl Into<String>,
        role: EmbeddingRole,
        vectors: Vec<Vec<f64>>,
    ) -> Result<()> {
        let id = id.into();
        if vectors.is_empty() {
            return Err(Error::EmptyEmbeddingList);
        }
        let dim = vectors[0].len();
        if dim == 0 || vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::EmbeddingDimMismatch(
                dim,
                vectors.iter().map(Vec::len).find(|&l| l != dim).unwrap_or(0),
            ));
        }
        if self.entries.insert((id.clone(), role), vectors).is_some() {
            return Err(Error::Lexicon(format!(
                "duplicate embedding record for ({id}, {})",
                role.as_str()
            )));
        }
        Ok(())
    }

    pub fn get(&self, id: &str, role: EmbeddingRole) -> Option<&Vec<Vec<f64>>> {
        self.entries.get(&(id.to_string(), role))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        let mut last: Option<&str> = None;
        self.entries.keys().filter_map(move |(id, _)| {
            if last == Some(id.as_str()) {
                None
            } else {
                last = Some(id.as_str());
                Some(id.as_str())
            }
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Writes the binary store plus the `<path>.idx` sidecar.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        out.extend_from_slice(EMBEDDING_MAGIC.as_bytes());
        out.push(b'\n');
        for ((id, role), vectors) in &self.entries {
            let id_bytes = id.as_bytes();
            out.extend_from_slice(&(id_bytes.len() as u32).to_le_bytes());
            out.extend_from_slice(id_bytes);
            out.push(role.tag());
            out.extend_from_slice(&(vectors.len() as u32).to_le_bytes());
            out.extend_from_slice(&(vectors[0].len() as u32).to_le_bytes());
            for v in vectors {
                for &x in v {
                    out.extend_from_slice(&(x as f32).to_le_bytes());
                }
            }
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))?;

        let mut index = String::new();
        for id in self.ids() {
            index.push_str(id);
            index.push('\n');
        }
        let idx_path = sidecar_path(path);
        std::fs::write(&idx_path, index).map_err(|e| Error::io(idx_path, e))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let mut magic = String::new();
        reader
            .read_line(&mut magic)
            .map_err(|e| Error::io(path, e))?;
        if magic.trim_end() != EMBEDDING_MAGIC {
            return Err(Error::parse(path, format!("bad magic {magic:?}")));
        }

        let mut store = Self::new();
        loop {
            let mut len_buf = [0u8; 4];
            match reader.read_exact(&mut len_buf) {
                Ok(()) => {}
                Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
                Err(e) => return Err(Error::io(path, e)),
            }
            let id_len = u32::from_le_bytes(len_buf) as usize;
            let mut id_bytes = vec![0u8; id_len];
            read_all(&mut reader, &mut id_bytes, path)?;
            let id = String::from_utf8(id_bytes)
                .map_err(|_| Error::parse(path, "id is not valid UTF-8"))?;
            let mut tag = [0u8; 1];
            read_all(&mut reader, &mut tag, path)?;
            let role = EmbeddingRole::from_tag(tag[0])
                .ok_or_else(|| Error::parse(path, format!("bad role tag {}", tag[0])))?;
            let mut counts = [0u8; 8];
            read_all(&mut reader, &mut counts, path)?;
            let n = u32::from_le_bytes(counts[0..4].try_into().unwrap()) as usize;
            let d = u32::from_le_bytes(counts[4..8].try_into().unwrap()) as usize;
            if n == 0 || d == 0 {
                return Err(Error::parse(path, format!("record {id}: empty shape {n}x{d}")));
            }
            let mut raw = vec![0u8; n * d * 4];
            read_all(&mut reader, &mut raw, path)?;
            let mut vectors = Vec::with_capacity(n);
            for chunk in raw.chunks_exact(d * 4) {
                vectors.push(
                    chunk
                        .chunks_exact(4)
                        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
                        .collect(),
                );
            }
            store.insert(id, role, vectors)?;
        }
        Ok(store)
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(".idx");
    os.into()
}

fn read_all(reader: &mut impl Read, buf: &mut [u8], path: &Path) -> Result<()> {
    reader
        .read_exact(buf)
        .map_err(|e| Error::parse(path, format!("truncated record: {e}")))
}

/// Writes `text` in the sidecar index format used next to embedding files.
pub fn write_embedding_index(path: &Path, ids: &[String]) -> Result<()> {
    let mut out = String::new();
    for id in ids {
        out.push_str(id);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy() -> NormPolicy {
        NormPolicy::default()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cer_identity_is_zero() {
        assert_eq!(cer("盲肠可见息肉", "盲肠可见息肉", &policy()).unwrap(), 0.0);
    }

    #[test]
    fn cer_single_substitution_over_six_tokens() {
        let got = cer("盲肠可见息冈", "盲肠可见息肉", &policy()).unwrap();
        assert!(close(got, 1.0 / 6.0, 1e-15));
    }

    #[test]
    fn cer_empty_hypothesis_is_all_deletions() {
        assert_eq!(cer("", "盲肠可见息肉", &policy()).unwrap(), 1.0);
    }

    #[test]
    fn cer_rejects_empty_reference() {
        assert!(matches!(
            cer("x", "。。。", &policy()),
            Err(Error::EmptyReference)
        ));
    }

    #[test]
    fn cer_can_exceed_one_on_insertions() {
        let got = cer("甲乙丙丁戊己庚", "甲", &policy()).unwrap();
        assert_eq!(got, 6.0);
    }

    #[test]
    fn bleu_identical_is_one() {
        assert_eq!(bleu1("乙状结肠息肉", "乙状结肠息肉", &policy()).unwrap(), 1.0);
    }

    #[test]
    fn bleu_half_overlap_same_length() {
        let got = bleu1("a b c d", "a b x y", &policy()).unwrap();
        assert!(close(got, 0.5, 1e-15));
    }

    #[test]
    fn bleu_brevity_penalty_applies() {
        let got = bleu1("a b", "a b c d", &policy()).unwrap();
        assert!(close(got, (-1.0f64).exp(), 1e-12));
    }

    #[test]
    fn bleu_empty_hypothesis_is_zero() {
        assert_eq!(bleu1("", "a b", &policy()).unwrap(), 0.0);
    }

    fn lexicon() -> TermLexicon {
        TermLexicon::new(
            vec![
                ("乙状结肠", Some(TermCategory::Anatomy)),
                ("结肠", Some(TermCategory::Anatomy)),
                ("息肉", Some(TermCategory::Morphology)),
                ("emr", Some(TermCategory::Procedure)),
            ],
            &policy(),
        )
        .unwrap()
    }

    #[test]
    fn med_acc_full_recall() {
        let r = "乙状结肠可见息肉";
        assert_eq!(med_term_accuracy(r, r, &lexicon(), &policy()), Some(1.0));
    }

    #[test]
    fn med_acc_half_when_one_term_garbled() {
        let got = med_term_accuracy("乙状结肠可见息冈", "乙状结肠可见息肉", &lexicon(), &policy());
        assert_eq!(got, Some(0.5));
    }

    #[test]
    fn med_acc_absent_without_reference_terms() {
        assert_eq!(
            med_term_accuracy("甲乙", "甲乙丙", &lexicon(), &policy()),
            None
        );
    }

    #[test]
    fn med_acc_prefers_longest_term_at_each_position() {
        // "乙状结肠" must win over the nested "结肠"; only one instance total
        let recall = term_recall("乙状结肠", "乙状结肠", &lexicon(), &policy());
        assert_eq!(recall, TermRecall { matched: 1, total: 1 });
    }

    #[test]
    fn med_acc_counts_multiplicity() {
        let recall = term_recall("息肉一个", "息肉两个息肉", &lexicon(), &policy());
        assert_eq!(recall, TermRecall { matched: 1, total: 2 });
    }

    #[test]
    fn bertscore_identical_lists_score_one() {
        let e = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(close(bertscore_f1(&e, &e).unwrap(), 1.0, 1e-12));
    }

    #[test]
    fn bertscore_orthogonal_single_vectors_score_zero() {
        let a = vec![vec![1.0, 0.0]];
        let b = vec![vec![0.0, 1.0]];
        assert_eq!(bertscore_f1(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn bertscore_asymmetric_example_matches_hand_computation() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let hyp = vec![vec![1.0, 0.0]];
        let refs = vec![vec![1.0, 0.0], vec![s, s]];
        // precision = 1, recall = (1 + 1/sqrt(2))/2, F1 = 2PR/(P+R)
        let p = 1.0;
        let r = (1.0 + s) / 2.0;
        let want = 2.0 * p * r / (p + r);
        let got = bertscore_f1(&hyp, &refs).unwrap();
        assert!(close(got, want, 1e-12));
        assert!(close(got, 0.9209917, 1e-6));
    }

    #[test]
    fn bertscore_rejects_bad_input() {
        assert!(matches!(
            bertscore_f1(&[], &[vec![1.0]]),
            Err(Error::EmptyEmbeddingList)
        ));
        assert!(matches!(
            bertscore_f1(&[vec![0.5, 0.0]], &[vec![1.0, 0.0]]),
            Err(Error::NonUnitEmbedding { .. })
        ));
    }

    #[test]
    fn rtf_examples() {
        assert_eq!(real_time_factor(10.0, 0.05).unwrap(), 0.005);
        assert_eq!(real_time_factor(5.0, 0.0).unwrap(), 0.0);
        assert_eq!(real_time_factor(1.0, 2.0).unwrap(), 2.0);
        assert!(real_time_factor(0.0, 1.0).is_err());
        assert!(real_time_factor(-1.0, 1.0).is_err());
    }

    #[test]
    fn edit_distance_respects_the_triangle_inequality() {
        use rand::{Rng, SeedableRng};
        let pool = ["甲", "乙", "丙", "丁", "戊"];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let sample = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<&str> {
            let len = rng.gen_range(0..12);
            (0..len).map(|_| pool[rng.gen_range(0..pool.len())]).collect()
        };
        for _ in 0..300 {
            let a = sample(&mut rng);
            let b = sample(&mut rng);
            let c = sample(&mut rng);
            assert!(edit_distance(&a, &c) <= edit_distance(&a, &b) + edit_distance(&b, &c));
            assert_eq!(edit_distance(&a, &b), edit_distance(&b, &a));
            assert_eq!(edit_distance(&a, &a), 0);
        }
    }

    #[test]
    fn cer_is_bounded_by_length_ratio() {
        use rand::{Rng, SeedableRng};
        let pool = ["甲", "乙", "丙", "丁", "emr"];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let h_len = rng.gen_range(0..10);
            let r_len = rng.gen_range(1..10usize);
            let mk = |rng: &mut rand_chacha::ChaCha8Rng, len: usize| -> String {
                let tokens: Vec<&str> =
                    (0..len).map(|_| pool[rng.gen_range(0..pool.len())]).collect();
                crate::harness::rejoin_tokens(&tokens)
            };
            let hyp = mk(&mut rng, h_len);
            let reference = mk(&mut rng, r_len);
            let got = cer(&hyp, &reference, &policy()).unwrap();
            assert!(got <= h_len.max(r_len) as f64 / r_len as f64);
        }
    }

    #[test]
    fn bleu_is_one_exactly_for_equal_token_multisets() {
        use rand::seq::SliceRandom;
        use rand::{Rng, SeedableRng};
        let pool = ["甲", "乙", "丙"];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..300 {
            let len = rng.gen_range(1..10usize);
            let ref_tokens: Vec<&str> =
                (0..len).map(|_| pool[rng.gen_range(0..pool.len())]).collect();
            let mut hyp_tokens = ref_tokens.clone();
            hyp_tokens.shuffle(&mut rng);
            let reference: String = ref_tokens.concat();
            let permuted: String = hyp_tokens.concat();
            let score = bleu1(&permuted, &reference, &policy()).unwrap();
            assert_eq!(score, 1.0);
            // any single extra token breaks exact unity
            let padded = format!("{permuted}丁");
            let score = bleu1(&padded, &reference, &policy()).unwrap();
            assert!((0.0..1.0).contains(&score));
        }
    }

    #[test]
    fn med_acc_never_decreases_when_hypothesis_gains_a_term() {
        use rand::{Rng, SeedableRng};
        let lex = lexicon();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let fillers = ["甲", "乙", "丙", "可", "见"];
        let terms = ["乙状结肠", "结肠", "息肉", "emr"];
        for _ in 0..200 {
            let mut reference = String::new();
            for _ in 0..rng.gen_range(1..4) {
                reference.push_str(terms[rng.gen_range(0..terms.len())]);
                reference.push_str(fillers[rng.gen_range(0..fillers.len())]);
            }
            let mut hyp = String::new();
            for _ in 0..rng.gen_range(0..3) {
                hyp.push_str(fillers[rng.gen_range(0..fillers.len())]);
                hyp.push_str(terms[rng.gen_range(0..terms.len())]);
            }
            let before = med_term_accuracy(&hyp, &reference, &lex, &policy());
            let grown = format!("{hyp}{}", terms[rng.gen_range(0..terms.len())]);
            let after = med_term_accuracy(&grown, &reference, &lex, &policy());
            assert!(
                after.unwrap_or(0.0) >= before.unwrap_or(0.0),
                "{hyp:?} -> {grown:?} vs {reference:?}"
            );
        }
    }

    #[test]
    fn bertscore_is_permutation_invariant_and_reflexive() {
        use rand::seq::SliceRandom;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let n = rng.gen_range(1..6);
            let m = rng.gen_range(1..6);
            let dim = rng.gen_range(2..8);
            let mk = |rng: &mut rand_chacha::ChaCha8Rng, k: usize| -> Vec<Vec<f64>> {
                (0..k)
                    .map(|_| {
                        let mut v: Vec<f64> =
                            (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
                        v.iter_mut().for_each(|x| *x /= norm);
                        v
                    })
                    .collect()
            };
            let hyp = mk(&mut rng, n);
            let refs = mk(&mut rng, m);
            assert!(close(bertscore_f1(&refs, &refs).unwrap(), 1.0, 1e-12));
            let base = bertscore_f1(&hyp, &refs).unwrap();
            let mut hyp_shuffled = hyp.clone();
            hyp_shuffled.shuffle(&mut rng);
            let mut refs_shuffled = refs.clone();
            refs_shuffled.shuffle(&mut rng);
            assert!(close(
                bertscore_f1(&hyp_shuffled, &refs_shuffled).unwrap(),
                base,
                1e-12
            ));
        }
    }

    #[test]
    fn metrics_are_stable_under_pre_normalized_input() {
        let p = policy();
        let raw = "乙状结肠可见息肉，行ＥＭＲ切除。";
        let normalized = normalize_transcript(raw, &p);
        let hyp = "乙状结肠可见息冈行emr切除";
        assert_eq!(cer(hyp, raw, &p).unwrap(), cer(hyp, &normalized, &p).unwrap());
        assert_eq!(
            bleu1(hyp, raw, &p).unwrap(),
            bleu1(hyp, &normalized, &p).unwrap()
        );
        assert_eq!(
            med_term_accuracy(hyp, raw, &lexicon(), &p),
            med_term_accuracy(hyp, &normalized, &lexicon(), &p)
        );
    }

    #[test]
    fn lexicon_rejects_duplicates_and_empty_terms() {
        assert!(TermLexicon::new(
            vec![("ＥＭＲ", None), ("emr", None)],
            &policy()
        )
        .is_err());
        assert!(TermLexicon::new(vec![("。", None)], &policy()).is_err());
    }

    #[test]
    fn lexicon_parses_categories_and_digest_is_order_independent() {
        let a = TermLexicon::parse("息肉\tmorphology\n结肠\tanatomy\n", &policy()).unwrap();
        let b = TermLexicon::parse("# comment\n结肠\tanatomy\n\n息肉\tmorphology\n", &policy())
            .unwrap();
        assert_eq!(a.digest(), b.digest());
        assert!(TermLexicon::parse("x\tnonsense\n", &policy()).is_err());
    }

    #[test]
    fn embedding_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.bin");
        let mut store = EmbeddingFile::new();
        store
            .insert("u1", EmbeddingRole::Hyp, vec![vec![1.0, 0.0], vec![0.0, 1.0]])
            .unwrap();
        store
            .insert("u1", EmbeddingRole::Ref, vec![vec![0.6, 0.8]])
            .unwrap();
        store
            .insert("u2", EmbeddingRole::Hyp, vec![vec![0.0, -1.0]])
            .unwrap();
        store.write(&path).unwrap();

        let back = EmbeddingFile::read(&path).unwrap();
        assert_eq!(back.len(), 3);
        let v = back.get("u1", EmbeddingRole::Ref).unwrap();
        assert!(close(v[0][0], 0.6, 1e-7));
        assert_eq!(back.ids().collect::<Vec<_>>(), vec!["u1", "u2"]);

        let idx = std::fs::read_to_string(dir.path().join("emb.bin.idx")).unwrap();
        assert_eq!(idx, "u1\nu2\n");
    }

    #[test]
    fn embedding_file_rejects_duplicates_and_truncation() {
        let mut store = EmbeddingFile::new();
        store
            .insert("u1", EmbeddingRole::Hyp, vec![vec![1.0]])
            .unwrap();
        assert!(store
            .insert("u1", EmbeddingRole::Hyp, vec![vec![1.0]])
            .is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.bin");
        store.write(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 2);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(EmbeddingFile::read(&path), Err(Error::Parse { .. })));
    }
}
