//! Evaluation harness: drive a transcriber over a manifest, score the
//! hypotheses, and aggregate stratified statistics.
//!
//! Transcribers attach in-process through [`TranscriberAdapter`] or as
//! subprocesses speaking the line protocol (requests `{id, wav_path}`,
//! responses `{id, text, wall_seconds?}`). When a response carries
//! `wall_seconds` that value is authoritative; otherwise the harness
//! times the call itself. Two bundled adapters exist for self-test:
//! echo-reference (returns the reference) and corrupting (drops every
//! n-th token).

mod aggregate;
mod report;

pub use aggregate::{
    aggregate_stratified, MetricStats, StratAxis, StratGroup, StratifiedReport, StratumRow,
};
pub use report::{
    emit_report, parse_csv_rows, render_report, ReportFormat, METRIC_CONVENTIONS,
};

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::{ContentCategory, Manifest};
use crate::error::{Error, Result};
use crate::metrics::{
    bertscore_f1, bleu1, cer, term_recall, EmbeddingFile, EmbeddingRole, TermLexicon,
    UtteranceScore,
};
use crate::pool::par_map;
use crate::subproc::LineProtocolChild;
use crate::textnorm::{normalize_transcript, tokenize_chars, NormPolicy};

/// What an adapter returns for one utterance. `wall_seconds`, when
/// reported, overrides the harness's own timing.
#[derive(Debug, Clone)]
pub struct AdapterReply {
    pub text: String,
    pub wall_seconds: Option<f64>,
}

pub trait TranscriberAdapter: Send + Sync {
    /// Identity string recorded in run provenance.
    fn id(&self) -> String;

    fn transcribe(&self, id: &str, wav_path: &Path, audio_seconds: f64) -> Result<AdapterReply>;
}

/// Self-test adapter: answers with the reference transcript. Reports a
/// fixed wall-clock of zero so runs are bit-reproducible.
pub struct EchoReferenceAdapter {
    references: HashMap<String, String>,
}

impl EchoReferenceAdapter {
    pub fn new(manifest: &Manifest) -> Self {
        Self {
            references: manifest
                .records
                .iter()
                .map(|r| (r.id.clone(), r.reference.clone()))
                .collect(),
        }
    }
}

impl TranscriberAdapter for EchoReferenceAdapter {
    fn id(&self) -> String {
        "echo-reference".into()
    }

    fn transcribe(&self, id: &str, _wav: &Path, _audio: f64) -> Result<AdapterReply> {
        let text = self.references.get(id).cloned().ok_or_else(|| Error::Adapter {
            adapter: self.id(),
            reason: format!("unknown utterance id {id}"),
        })?;
        Ok(AdapterReply {
            text,
            wall_seconds: Some(0.0),
        })
    }
}

/// Self-test adapter: normalizes the reference, deletes every `period`-th
/// token, and returns the rest, so the expected CER is exactly
/// `floor(n/period)/n` per utterance.
pub struct CorruptingAdapter {
    references: HashMap<String, String>,
    period: usize,
    policy: NormPolicy,
}

impl CorruptingAdapter {
    pub fn new(manifest: &Manifest, period: usize) -> Result<Self> {
        if period < 2 {
            return Err(Error::InvalidConfig("corruption period must be >= 2".into()));
        }
        Ok(Self {
            references: manifest
                .records
                .iter()
                .map(|r| (r.id.clone(), r.reference.clone()))
                .collect(),
            period,
            policy: manifest.norm_policy,
        })
    }

    fn corrupt(&self, reference: &str) -> String {
        let normalized = normalize_transcript(reference, &self.policy);
        let tokens = tokenize_chars(&normalized);
        let kept: Vec<&str> = tokens
            .iter()
            .enumerate()
            .filter(|(i, _)| (i + 1) % self.period != 0)
            .map(|(_, t)| *t)
            .collect();
        rejoin_tokens(&kept)
    }
}

/// Joins tokens back into text that re-tokenizes to exactly the same
/// sequence: adjacent Latin-letter runs need a separating space.
pub fn rejoin_tokens(tokens: &[&str]) -> String {
    let starts_latin = |t: &str| t.chars().next().map(|c| c.is_ascii_alphabetic()).unwrap_or(false);
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 && starts_latin(tokens[i - 1]) && starts_latin(t) {
            out.push(' ');
        }
        out.push_str(t);
    }
    out
}

impl TranscriberAdapter for CorruptingAdapter {
    fn id(&self) -> String {
        format!("corrupting/every-{}", self.period)
    }

    fn transcribe(&self, id: &str, _wav: &Path, _audio: f64) -> Result<AdapterReply> {
        let reference = self.references.get(id).ok_or_else(|| Error::Adapter {
            adapter: self.id(),
            reason: format!("unknown utterance id {id}"),
        })?;
        Ok(AdapterReply {
            text: self.corrupt(reference),
            wall_seconds: Some(0.0),
        })
    }
}

/// Wraps another adapter and reports wall time as a fixed real-time
/// factor of the audio duration. Used to pin RTF arithmetic in tests
/// without sleeping.
pub struct ThrottledAdapter<A> {
    inner: A,
    rtf: f64,
}

impl<A: TranscriberAdapter> ThrottledAdapter<A> {
    pub fn new(inner: A, rtf: f64) -> Self {
        Self { inner, rtf }
    }
}

impl<A: TranscriberAdapter> TranscriberAdapter for ThrottledAdapter<A> {
    fn id(&self) -> String {
        format!("throttled({})/{}", self.rtf, self.inner.id())
    }

    fn transcribe(&self, id: &str, wav: &Path, audio_seconds: f64) -> Result<AdapterReply> {
        let mut reply = self.inner.transcribe(id, wav, audio_seconds)?;
        reply.wall_seconds = Some(self.rtf * audio_seconds);
        Ok(reply)
    }
}

#[derive(Serialize)]
struct AsrRequest<'a> {
    id: &'a str,
    wav_path: &'a str,
}

#[derive(Deserialize)]
struct AsrResponse {
    id: String,
    text: String,
    #[serde(default)]
    wall_seconds: Option<f64>,
}

/// External engine attached over the line protocol. Each worker thread
/// gets its own child process, checked out of a small pool, so
/// `parallelism` concurrent utterances run against `parallelism`
/// children.
pub struct SubprocessAdapter {
    command: Vec<String>,
    pool: Mutex<Vec<LineProtocolChild>>,
}

impl SubprocessAdapter {
    pub fn new(command: Vec<String>) -> Self {
        Self {
            command,
            pool: Mutex::new(Vec::new()),
        }
    }

    /// Reaps all pooled children; nonzero exits surface as errors.
    pub fn shutdown(&self) -> Result<()> {
        let children: Vec<_> = self.pool.lock().expect("adapter pool").drain(..).collect();
        for child in children {
            child.finish()?;
        }
        Ok(())
    }
}

impl TranscriberAdapter for SubprocessAdapter {
    fn id(&self) -> String {
        format!("subprocess:{}", self.command.join(" "))
    }

    fn transcribe(&self, id: &str, wav_path: &Path, _audio: f64) -> Result<AdapterReply> {
        let mut child = {
            let mut pool = self.pool.lock().expect("adapter pool");
            pool.pop()
        };
        if child.is_none() {
            child = Some(LineProtocolChild::spawn(&self.command)?);
        }
        let mut child = child.expect("spawned above");

        let request = serde_json::to_string(&AsrRequest {
            id,
            wav_path: &wav_path.to_string_lossy(),
        })
        .expect("request serializes");
        // a failed call poisons the child; drop it instead of reusing
        let line = child.call(&request)?;
        let response: AsrResponse = serde_json::from_str(&line).map_err(|e| Error::Adapter {
            adapter: self.id(),
            reason: format!("bad response line {line:?}: {e}"),
        })?;
        if response.id != id {
            return Err(Error::Adapter {
                adapter: self.id(),
                reason: format!("response id {} for request {id}", response.id),
            });
        }
        self.pool.lock().expect("adapter pool").push(child);
        Ok(AdapterReply {
            text: response.text,
            wall_seconds: response.wall_seconds,
        })
    }
}

pub const EVALRUN_SCHEMA: &str = "asr-evalrun/1";

/// Per-utterance outcome inside a run. `error` and `hypothesis` are
/// mutually exclusive; failed utterances keep their slot so they can
/// never be silently dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalUtterance {
    pub id: String,
    pub reference: String,
    pub audio_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub speaker: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub center: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub category: Option<ContentCategory>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hypothesis: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub score: Option<UtteranceScore>,
}

/// One adapter pass over a manifest, with provenance. Utterances are
/// ordered by id regardless of completion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRun {
    pub adapter_id: String,
    pub source_manifest: String,
    pub norm_policy: NormPolicy,
    pub lexicon_hash: Option<String>,
    pub seed: u64,
    pub utterances: Vec<EvalUtterance>,
}

#[derive(Serialize, Deserialize)]
struct EvalRunHeader {
    schema: String,
    adapter_id: String,
    source_manifest: String,
    norm_policy: NormPolicy,
    lexicon_hash: Option<String>,
    seed: u64,
}

impl EvalRun {
    pub fn failed_count(&self) -> usize {
        self.utterances.iter().filter(|u| u.error.is_some()).count()
    }

    pub fn is_scored(&self) -> bool {
        self.utterances
            .iter()
            .filter(|u| u.error.is_none())
            .all(|u| u.score.is_some())
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let header = EvalRunHeader {
            schema: EVALRUN_SCHEMA.into(),
            adapter_id: self.adapter_id.clone(),
            source_manifest: self.source_manifest.clone(),
            norm_policy: self.norm_policy,
            lexicon_hash: self.lexicon_hash.clone(),
            seed: self.seed,
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for u in &self.utterances {
            out.push_str(&serde_json::to_string(u).expect("utterance serializes"));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::parse(path, "empty run file"))?;
        let header: EvalRunHeader = serde_json::from_str(first)
            .map_err(|e| Error::parse(path, format!("header: {e}")))?;
        if header.schema != EVALRUN_SCHEMA {
            return Err(Error::parse(path, format!("unsupported schema {:?}", header.schema)));
        }
        let mut utterances = Vec::new();
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let u: EvalUtterance = serde_json::from_str(line)
                .map_err(|e| Error::parse(path, format!("line {}: {e}", lineno + 1)))?;
            utterances.push(u);
        }
        Ok(Self {
            adapter_id: header.adapter_id,
            source_manifest: header.source_manifest,
            norm_policy: header.norm_policy,
            lexicon_hash: header.lexicon_hash,
            seed: header.seed,
            utterances,
        })
    }
}

/// Transcribes every record once over a bounded worker pool. Adapter
/// failures become per-utterance failure markers rather than aborting
/// sibling work; downstream reporting refuses to run while any marker is
/// present unless explicitly overridden.
pub fn run_transcriber(
    manifest: &Manifest,
    base_dir: &Path,
    adapter: &dyn TranscriberAdapter,
    parallelism: usize,
    seed: u64,
) -> Result<EvalRun> {
    let replies = par_map(manifest.records.len(), parallelism, |i| {
        let record = &manifest.records[i];
        let wav_path = base_dir.join(&record.audio_path);
        let started = Instant::now();
        let outcome = adapter.transcribe(&record.id, &wav_path, record.duration_s);
        let measured = started.elapsed().as_secs_f64();
        (i, outcome, measured)
    });

    let mut utterances: Vec<EvalUtterance> = replies
        .into_iter()
        .map(|(i, outcome, measured)| {
            let record = &manifest.records[i];
            let mut u = EvalUtterance {
                id: record.id.clone(),
                reference: record.reference.clone(),
                audio_seconds: record.duration_s,
                speaker: record.speaker.clone(),
                center: record.center.clone(),
                category: record.category,
                hypothesis: None,
                wall_seconds: None,
                error: None,
                score: None,
            };
            match outcome {
                Ok(reply) => {
                    u.hypothesis = Some(reply.text);
                    u.wall_seconds = Some(reply.wall_seconds.unwrap_or(measured));
                }
                Err(e) => u.error = Some(e.to_string()),
            }
            u
        })
        .collect();
    utterances.sort_by(|a, b| a.id.cmp(&b.id));

    Ok(EvalRun {
        adapter_id: adapter.id(),
        source_manifest: String::new(),
        norm_policy: manifest.norm_policy,
        lexicon_hash: None,
        seed,
        utterances,
    })
}

/// Populates per-utterance scores. BERTScore is computed only when an
/// embedding store is supplied, in which case every transcribed
/// utterance must have both hypothesis- and reference-side entries.
pub fn score_run(
    run: &mut EvalRun,
    lexicon: &TermLexicon,
    embeddings: Option<&EmbeddingFile>,
) -> Result<()> {
    let policy = run.norm_policy;
    for u in &mut run.utterances {
        let Some(hypothesis) = u.hypothesis.as_deref() else {
            continue;
        };
        let recall = term_recall(hypothesis, &u.reference, lexicon, &policy);
        let ref_norm = normalize_transcript(&u.reference, &policy);
        let n_ref_tokens = tokenize_chars(&ref_norm).len();
        let bert = match embeddings {
            None => None,
            Some(store) => {
                let hyp = store.get(&u.id, EmbeddingRole::Hyp).ok_or_else(|| {
                    Error::MissingEmbedding {
                        id: u.id.clone(),
                        role: "hyp".into(),
                    }
                })?;
                let reference = store.get(&u.id, EmbeddingRole::Ref).ok_or_else(|| {
                    Error::MissingEmbedding {
                        id: u.id.clone(),
                        role: "ref".into(),
                    }
                })?;
                Some(bertscore_f1(hyp, reference)?)
            }
        };
        u.score = Some(UtteranceScore {
            cer: cer(hypothesis, &u.reference, &policy)?,
            bleu1: bleu1(hypothesis, &u.reference, &policy)?,
            bertscore_f1: bert,
            med_acc: recall.accuracy(),
            n_ref_tokens,
            n_terms_in_ref: recall.total,
        });
    }
    run.lexicon_hash = Some(lexicon.digest());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_synthetic_manifest, StubTts, Voice};

    fn small_manifest(dir: &Path) -> Manifest {
        let texts = vec![
            "乙状结肠可见息肉行emr切除".to_string(),
            "直肠黏膜充血活检一次".to_string(),
            "盲肠未见明显异常建议随访".to_string(),
        ];
        build_synthetic_manifest(&texts, &[Voice::Female], &StubTts::default(), dir).unwrap()
    }

    fn lexicon() -> TermLexicon {
        crate::corpus::demo::demo_lexicon(&NormPolicy::default())
    }

    #[test]
    fn echo_adapter_transcribes_everything_perfectly() {
        let dir = tempfile::tempdir().unwrap();
        let m = small_manifest(dir.path());
        let adapter = EchoReferenceAdapter::new(&m);
        let mut run = run_transcriber(&m, dir.path(), &adapter, 2, 0).unwrap();
        score_run(&mut run, &lexicon(), None).unwrap();

        assert_eq!(run.utterances.len(), 3);
        assert_eq!(run.failed_count(), 0);
        for u in &run.utterances {
            assert_eq!(u.hypothesis.as_deref(), Some(u.reference.as_str()));
            let s = u.score.as_ref().unwrap();
            assert_eq!(s.cer, 0.0);
            assert_eq!(s.bleu1, 1.0);
            assert_eq!(s.med_acc, Some(1.0));
            assert!(s.bertscore_f1.is_none());
        }
    }

    #[test]
    fn corrupting_adapter_hits_analytic_cer() {
        let dir = tempfile::tempdir().unwrap();
        let m = small_manifest(dir.path());
        let adapter = CorruptingAdapter::new(&m, 6).unwrap();
        let mut run = run_transcriber(&m, dir.path(), &adapter, 1, 0).unwrap();
        score_run(&mut run, &lexicon(), None).unwrap();

        for u in &run.utterances {
            let s = u.score.as_ref().unwrap();
            let n = s.n_ref_tokens;
            let expected = (n / 6) as f64 / n as f64;
            assert_eq!(s.cer, expected, "utterance {}", u.id);
        }
    }

    #[test]
    fn corrupt_rejoin_round_trips_through_the_tokenizer() {
        let cases = [
            "乙状结肠emr后esd处理",
            "bbps评分3分",
            "emr切除后钛夹closure完成",
        ];
        let policy = NormPolicy::default();
        for case in cases {
            let normalized = normalize_transcript(case, &policy);
            let tokens = tokenize_chars(&normalized);
            let kept: Vec<&str> = tokens
                .iter()
                .enumerate()
                .filter(|(i, _)| (i + 1) % 3 != 0)
                .map(|(_, t)| *t)
                .collect();
            let rejoined = rejoin_tokens(&kept);
            let renorm = normalize_transcript(&rejoined, &policy);
            assert_eq!(tokenize_chars(&renorm), kept, "case {case:?}");
        }
    }

    #[test]
    fn throttled_adapter_pins_rtf_arithmetic() {
        let dir = tempfile::tempdir().unwrap();
        let m = small_manifest(dir.path());
        let adapter = ThrottledAdapter::new(EchoReferenceAdapter::new(&m), 0.005);
        let run = run_transcriber(&m, dir.path(), &adapter, 1, 0).unwrap();
        for u in &run.utterances {
            let wall = u.wall_seconds.unwrap();
            assert!((wall - 0.005 * u.audio_seconds).abs() < 1e-15);
        }
    }

    #[test]
    fn parallelism_does_not_change_run_content() {
        let dir = tempfile::tempdir().unwrap();
        let m = small_manifest(dir.path());
        let adapter = EchoReferenceAdapter::new(&m);
        let a = run_transcriber(&m, dir.path(), &adapter, 1, 0).unwrap();
        let b = run_transcriber(&m, dir.path(), &adapter, 8, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn run_jsonl_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let m = small_manifest(dir.path());
        let adapter = EchoReferenceAdapter::new(&m);
        let mut run = run_transcriber(&m, dir.path(), &adapter, 1, 3).unwrap();
        run.source_manifest = "manifest.jsonl".into();
        score_run(&mut run, &lexicon(), None).unwrap();
        let path = dir.path().join("run.jsonl");
        run.write_jsonl(&path).unwrap();
        let back = EvalRun::read_jsonl(&path).unwrap();
        assert_eq!(back, run);
    }

    #[test]
    fn missing_embedding_is_a_hard_error_naming_the_id() {
        let dir = tempfile::tempdir().unwrap();
        let m = small_manifest(dir.path());
        let adapter = EchoReferenceAdapter::new(&m);
        let mut run = run_transcriber(&m, dir.path(), &adapter, 1, 0).unwrap();
        let store = EmbeddingFile::new();
        let err = score_run(&mut run, &lexicon(), Some(&store)).unwrap_err();
        match err {
            Error::MissingEmbedding { id, .. } => assert_eq!(id, "t00000-female"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn scoring_with_embeddings_populates_bertscore() {
        let dir = tempfile::tempdir().unwrap();
        let m = small_manifest(dir.path());
        let adapter = EchoReferenceAdapter::new(&m);
        let mut run = run_transcriber(&m, dir.path(), &adapter, 1, 0).unwrap();
        let mut store = EmbeddingFile::new();
        for u in &run.utterances {
            let v = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
            store.insert(&u.id, EmbeddingRole::Hyp, v.clone()).unwrap();
            store.insert(&u.id, EmbeddingRole::Ref, v).unwrap();
        }
        score_run(&mut run, &lexicon(), Some(&store)).unwrap();
        for u in &run.utterances {
            assert_eq!(u.score.as_ref().unwrap().bertscore_f1, Some(1.0));
        }
    }

    #[test]
    fn harness_timing_is_authoritative_when_adapter_reports_none() {
        struct SilentTimer;
        impl TranscriberAdapter for SilentTimer {
            fn id(&self) -> String {
                "silent-timer".into()
            }
            fn transcribe(&self, _i: &str, _w: &Path, _a: f64) -> Result<AdapterReply> {
                std::thread::sleep(std::time::Duration::from_millis(5));
                Ok(AdapterReply {
                    text: "盲肠".into(),
                    wall_seconds: None,
                })
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let m = small_manifest(dir.path());
        let run = run_transcriber(&m, dir.path(), &SilentTimer, 1, 0).unwrap();
        for u in &run.utterances {
            assert!(u.wall_seconds.unwrap() >= 0.005, "{:?}", u.wall_seconds);
        }
    }

    #[test]
    fn adapter_failure_is_marked_not_dropped() {
        struct FailSecond;
        impl TranscriberAdapter for FailSecond {
            fn id(&self) -> String {
                "fail-second".into()
            }
            fn transcribe(&self, id: &str, _w: &Path, _a: f64) -> Result<AdapterReply> {
                if id.contains("t00001") {
                    Err(Error::Adapter {
                        adapter: self.id(),
                        reason: "simulated crash".into(),
                    })
                } else {
                    Ok(AdapterReply {
                        text: "盲肠".into(),
                        wall_seconds: Some(0.0),
                    })
                }
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let m = small_manifest(dir.path());
        let run = run_transcriber(&m, dir.path(), &FailSecond, 4, 0).unwrap();
        assert_eq!(run.utterances.len(), 3);
        assert_eq!(run.failed_count(), 1);
        let failed = run.utterances.iter().find(|u| u.error.is_some()).unwrap();
        assert_eq!(failed.id, "t00001-female");
        assert!(failed.hypothesis.is_none());
    }
}
