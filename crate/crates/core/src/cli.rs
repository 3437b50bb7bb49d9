//! Command-line front end. One verb per pipeline stage, exit codes fixed
//! so scripts can branch: 0 success, 1 validation or data error, 2 usage
//! error. Machine output goes to stdout, diagnostics to stderr. Every
//! randomized verb takes its seed from `--seed` (default 0); nothing is
//! seeded from the clock.

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::audio::SnrSchedule;
use crate::checkpoints::{select_top_checkpoints, CheckpointMeta, TensorFile};
use crate::corpus::{
    augment_with_noise, build_synthetic_manifest, load_noise_bank, stratified_split, LayoutSpec,
    Manifest, SplitFractions, StubTts, SubprocessTts, Voice,
};
use crate::error::{Error, Result};
use crate::features::{compute_mfcc, tsne_project, utterance_embedding, MfccConfig, TsneConfig};
use crate::harness::{
    aggregate_stratified, emit_report, render_report, run_transcriber, score_run,
    CorruptingAdapter, EchoReferenceAdapter, EvalRun, ReportFormat, StratGroup,
    SubprocessAdapter, ThrottledAdapter, TranscriberAdapter,
};
use crate::metrics::{EmbeddingFile, TermLexicon};
use crate::snr::estimate_snr_wada;
use crate::subproc::split_command;

#[derive(Parser, Debug)]
#[command(
    name = "clinasr",
    version,
    about = "Corpus construction and evaluation toolkit for clinical ASR",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    /// Seed for every randomized stage.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker pool bound for corpus and harness fan-out.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Suppress diagnostics on stderr.
    #[arg(long, global = true)]
    quiet: bool,

    /// Key=value file providing defaults for the global options.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a corpus from report texts through a TTS provider.
    Synth {
        /// Text file, one report per line.
        texts: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Comma-separated subset of male,female.
        #[arg(long, value_delimiter = ',', default_value = "male,female")]
        voices: Vec<String>,
        /// "stub" or "cmd:<command line>" for the subprocess protocol.
        #[arg(long, default_value = "stub")]
        provider: String,
    },
    /// Mix a clean manifest with recorded noise at scheduled SNRs.
    Augment {
        manifest: PathBuf,
        /// Directory of noise .wav files.
        #[arg(long)]
        noise_dir: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 23.98)]
        snr_mean: f64,
        #[arg(long, default_value_t = 1.16)]
        snr_sd: f64,
        #[arg(long, default_value_t = 20.0)]
        snr_low: f64,
        #[arg(long, default_value_t = 28.0)]
        snr_high: f64,
    },
    /// Blind SNR estimation, one `path<TAB>snr_db` line per file.
    #[command(name = "snr-estimate")]
    SnrEstimate {
        #[arg(required = true)]
        wavs: Vec<PathBuf>,
    },
    /// Per-utterance MFCC embeddings as CSV (id, center, 26 dims).
    Mfcc {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Project an embedding CSV to 2-D (CSV: id, x, y, center).
    Tsne {
        features: PathBuf,
        #[arg(long, default_value_t = 15.0)]
        perplexity: f64,
        #[arg(long, default_value_t = 1000)]
        iterations: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assign train/val/test splits, stratified by voice and length.
    Split {
        manifest: PathBuf,
        /// train,val,test fractions summing to 1.
        #[arg(long, default_value = "0.8,0.1,0.1")]
        fractions: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a manifest; findings print as JSON lines.
    Validate {
        manifest: PathBuf,
        /// Expected layout, e.g. 5x6x10 (centers x categories x each).
        #[arg(long)]
        expect: Option<String>,
    },
    /// Transcribe a manifest with an adapter and persist the run.
    Eval {
        manifest: PathBuf,
        /// echo | corrupt[:N] | throttle:<rtf> | cmd:<command line>
        #[arg(long)]
        adapter: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a persisted run against a term lexicon.
    Score {
        run: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        /// Embedding-provider file enabling BERTScore.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate a scored run and emit a stratified report.
    Report {
        run: PathBuf,
        /// Comma-separated stratifications from {speaker, center,
        /// category}; join axes with `+` to group by the cross, e.g.
        /// `center+category`.
        #[arg(long, default_value = "speaker,center,category")]
        axes: String,
        /// csv | jsonl | markdown
        #[arg(long, default_value = "markdown")]
        format: String,
        /// Output path; omitted means stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Aggregate even when the run contains failed utterances.
        #[arg(long)]
        allow_failures: bool,
    },
    /// Select checkpoints by validation loss and average their weights.
    #[command(name = "ckpt-avg")]
    CkptAvg {
        /// Tensor files to average (or use --metas for selection).
        files: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// CSV of path,step,val_loss rows enabling selection.
        #[arg(long)]
        metas: Option<PathBuf>,
        /// Retain this many checkpoints ranked by validation loss.
        #[arg(long)]
        keep: Option<usize>,
        /// Average the best N of the retained set.
        #[arg(long)]
        best: Option<usize>,
    },
}

struct GlobalOptions {
    seed: u64,
    jobs: usize,
    quiet: bool,
}

enum CliError {
    /// Wrong invocation: exit 2.
    Usage(String),
    /// Data or validation failure: exit 1.
    App(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::App(e)
    }
}

fn resolve_options(cli: &Cli) -> std::result::Result<GlobalOptions, CliError> {
    let mut cfg_seed = None;
    let mut cfg_jobs = None;
    let mut cfg_quiet = None;
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(path, lineno, "expected key=value"))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "seed" => {
                    cfg_seed = Some(value.parse::<u64>().map_err(|_| {
                        config_err(path, lineno, &format!("bad seed {value:?}"))
                    })?)
                }
                "jobs" => {
                    cfg_jobs = Some(value.parse::<usize>().map_err(|_| {
                        config_err(path, lineno, &format!("bad jobs {value:?}"))
                    })?)
                }
                "quiet" => {
                    cfg_quiet = Some(value.parse::<bool>().map_err(|_| {
                        config_err(path, lineno, &format!("bad quiet {value:?}"))
                    })?)
                }
                other => {
                    return Err(config_err(path, lineno, &format!("unknown key {other:?}")))
                }
            }
        }
    }
    // explicit flags override config values
    let default_jobs = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    Ok(GlobalOptions {
        seed: cli.seed.or(cfg_seed).unwrap_or(0),
        jobs: cli.jobs.or(cfg_jobs).unwrap_or(default_jobs).max(1),
        quiet: cli.quiet || cfg_quiet.unwrap_or(false),
    })
}

fn config_err(path: &Path, lineno: usize, msg: &str) -> CliError {
    CliError::Usage(format!("config {} line {}: {msg}", path.display(), lineno + 1))
}

/// Parses and runs an invocation, returning the process exit code.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    2
                }
            }
        }
    };

    let options = match resolve_options(&cli) {
        Ok(o) => o,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            return 2;
        }
        Err(CliError::App(e)) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if !options.quiet {
        eprintln!("options: seed={} jobs={}", options.seed, options.jobs);
    }

    match dispatch(cli.command, &options) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::App(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(command: Command, options: &GlobalOptions) -> std::result::Result<(), CliError> {
    match command {
        Command::Synth {
            texts,
            out_dir,
            voices,
            provider,
        } => cmd_synth(&texts, &out_dir, &voices, &provider, options),
        Command::Augment {
            manifest,
            noise_dir,
            out_dir,
            snr_mean,
            snr_sd,
            snr_low,
            snr_high,
        } => cmd_augment(
            &manifest,
            &noise_dir,
            &out_dir,
            SnrSchedule::new(snr_mean, snr_sd, snr_low, snr_high)?,
            options,
        ),
        Command::SnrEstimate { wavs } => cmd_snr_estimate(&wavs),
        Command::Mfcc { manifest, out } => cmd_mfcc(&manifest, &out, options),
        Command::Tsne {
            features,
            perplexity,
            iterations,
            out,
        } => cmd_tsne(&features, perplexity, iterations, &out, options),
        Command::Split {
            manifest,
            fractions,
            out,
        } => cmd_split(&manifest, &fractions, &out, options),
        Command::Validate { manifest, expect } => cmd_validate(&manifest, expect.as_deref()),
        Command::Eval {
            manifest,
            adapter,
            out,
        } => cmd_eval(&manifest, &adapter, &out, options),
        Command::Score {
            run,
            lexicon,
            embeddings,
            out,
        } => cmd_score(&run, &lexicon, embeddings.as_deref(), &out),
        Command::Report {
            run,
            axes,
            format,
            out,
            allow_failures,
        } => cmd_report(&run, &axes, &format, out.as_deref(), allow_failures),
        Command::CkptAvg {
            files,
            out,
            metas,
            keep,
            best,
        } => cmd_ckpt_avg(&files, &out, metas.as_deref(), keep, best, options),
    }
}

fn parse_voices(names: &[String]) -> std::result::Result<Vec<Voice>, CliError> {
    let voices: Vec<Voice> = names
        .iter()
        .map(|n| {
            Voice::parse(n).ok_or_else(|| CliError::Usage(format!("unknown voice {n:?}")))
        })
        .collect::<std::result::Result<_, _>>()?;
    if voices.is_empty() {
        return Err(CliError::Usage("no voices given".into()));
    }
    Ok(voices)
}

fn cmd_synth(
    texts_path: &Path,
    out_dir: &Path,
    voice_names: &[String],
    provider_spec: &str,
    options: &GlobalOptions,
) -> std::result::Result<(), CliError> {
    let voices = parse_voices(voice_names)?;
    let text = std::fs::read_to_string(texts_path).map_err(|e| Error::io(texts_path, e))?;
    let texts: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();

    let manifest = if provider_spec == "stub" {
        build_synthetic_manifest(&texts, &voices, &StubTts::default(), out_dir)?
    } else if let Some(cmd) = provider_spec.strip_prefix("cmd:") {
        let provider = SubprocessTts::new(split_command(cmd)?);
        let manifest = build_synthetic_manifest(&texts, &voices, &provider, out_dir)?;
        // a nonzero provider exit invalidates the corpus; take the
        // manifest back so no partial output survives
        if let Err(e) = provider.shutdown() {
            let _ = std::fs::remove_file(out_dir.join("manifest.jsonl"));
            return Err(e.into());
        }
        manifest
    } else {
        return Err(CliError::Usage(format!(
            "unknown provider {provider_spec:?} (stub or cmd:...)"
        )));
    };

    if !options.quiet {
        eprintln!(
            "synthesized {} records from {} texts",
            manifest.records.len(),
            texts.len()
        );
    }
    println!("{}", out_dir.join("manifest.jsonl").display());
    Ok(())
}

fn cmd_augment(
    manifest_path: &Path,
    noise_dir: &Path,
    out_dir: &Path,
    schedule: SnrSchedule,
    options: &GlobalOptions,
) -> std::result::Result<(), CliError> {
    let manifest = Manifest::read_jsonl(manifest_path)?;
    if !noise_dir.is_dir() {
        return Err(CliError::App(Error::Manifest(format!(
            "noise directory {} does not exist",
            noise_dir.display()
        ))));
    }
    let bank = load_noise_bank(noise_dir)?;
    let base = manifest_dir(manifest_path);
    let outcome = augment_with_noise(
        &manifest,
        &base,
        &bank,
        &schedule,
        options.seed,
        out_dir,
        options.jobs,
    )?;
    if !options.quiet {
        eprintln!(
            "augmented {} records ({} skipped silent, {} samples clipped)",
            outcome.manifest.records.len(),
            outcome.skipped_silent.len(),
            outcome.clipped_samples
        );
    }
    println!("{}", out_dir.join("manifest.jsonl").display());
    Ok(())
}

fn cmd_snr_estimate(wavs: &[PathBuf]) -> std::result::Result<(), CliError> {
    for path in wavs {
        let wave = crate::audio::read_wav(path)?;
        let estimate = estimate_snr_wada(&wave)?;
        println!("{}\t{:.2}", path.display(), estimate.snr_db);
    }
    Ok(())
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn cmd_mfcc(
    manifest_path: &Path,
    out: &Path,
    options: &GlobalOptions,
) -> std::result::Result<(), CliError> {
    let manifest = Manifest::read_jsonl(manifest_path)?;
    let base = manifest_dir(manifest_path);
    let cfg = MfccConfig::default();

    let rows = crate::pool::par_map(manifest.records.len(), options.jobs, |i| {
        let record = &manifest.records[i];
        let wave = crate::audio::read_wav(&base.join(&record.audio_path))?;
        let matrix = compute_mfcc(&wave, &cfg)?;
        let embedding = utterance_embedding(&matrix)?;
        Ok::<_, Error>((record.id.clone(), record.center.clone(), embedding))
    });

    let mut out_text = String::new();
    out_text.push_str("id,center");
    for d in 0..2 * cfg.n_coefficients {
        out_text.push_str(&format!(",e{d:02}"));
    }
    out_text.push('\n');
    for row in rows {
        let (id, center, embedding) = row?;
        out_text.push_str(&id);
        out_text.push(',');
        out_text.push_str(center.as_deref().unwrap_or(""));
        for v in embedding {
            out_text.push_str(&format!(",{v}"));
        }
        out_text.push('\n');
    }
    std::fs::write(out, out_text).map_err(|e| Error::io(out, e))?;
    println!("{}", out.display());
    Ok(())
}

fn cmd_tsne(
    features: &Path,
    perplexity: f64,
    iterations: usize,
    out: &Path,
    options: &GlobalOptions,
) -> std::result::Result<(), CliError> {
    let text = std::fs::read_to_string(features).map_err(|e| Error::io(features, e))?;
    let mut ids = Vec::new();
    let mut centers = Vec::new();
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(CliError::App(Error::parse(
                features,
                format!("line {}: expected id,center,dims...", lineno + 1),
            )));
        }
        ids.push(fields[0].to_string());
        centers.push(fields[1].to_string());
        let vector = fields[2..]
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    Error::parse(features, format!("line {}: bad number {f:?}", lineno + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        vectors.push(vector);
    }

    let cfg = TsneConfig::new(perplexity, iterations, options.seed);
    let projected = tsne_project(&vectors, &cfg)?;

    let mut out_text = String::from("id,x,y,center\n");
    for ((id, center), point) in ids.iter().zip(&centers).zip(&projected.points) {
        out_text.push_str(&format!("{id},{},{},{center}\n", point[0], point[1]));
    }
    std::fs::write(out, out_text).map_err(|e| Error::io(out, e))?;
    if !options.quiet {
        eprintln!(
            "projected {} points, final KL {:.6}",
            ids.len(),
            projected.kl_history.last().unwrap_or(&f64::NAN)
        );
    }
    println!("{}", out.display());
    Ok(())
}

fn cmd_split(
    manifest_path: &Path,
    fractions: &str,
    out: &Path,
    options: &GlobalOptions,
) -> std::result::Result<(), CliError> {
    let manifest = Manifest::read_jsonl(manifest_path)?;
    let fractions = SplitFractions::parse(fractions)?;
    let outcome = stratified_split(&manifest, fractions, options.seed)?;
    if outcome.fell_back_to_global && !options.quiet {
        eprintln!("warning: a stratum was smaller than the split count; used one global split");
    }
    outcome.manifest.write_jsonl(out)?;
    println!("{}", out.display());
    Ok(())
}

fn cmd_validate(
    manifest_path: &Path,
    expect: Option<&str>,
) -> std::result::Result<(), CliError> {
    let manifest = Manifest::read_jsonl(manifest_path)?;
    let layout = expect.map(LayoutSpec::parse).transpose()?;
    let report = manifest.validate(&manifest_dir(manifest_path), layout.as_ref());
    for check in &report.checks {
        println!("{}", serde_json::to_string(check).expect("check serializes"));
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::App(Error::Manifest(format!(
            "{} of {} checks failed",
            report.checks.iter().filter(|c| !c.passed).count(),
            report.checks.len()
        ))))
    }
}

fn parse_adapter(
    spec: &str,
    manifest: &Manifest,
) -> std::result::Result<Box<dyn TranscriberAdapter>, CliError> {
    if spec == "echo" {
        return Ok(Box::new(EchoReferenceAdapter::new(manifest)));
    }
    if spec == "corrupt" {
        return Ok(Box::new(CorruptingAdapter::new(manifest, 6)?));
    }
    if let Some(period) = spec.strip_prefix("corrupt:") {
        let period: usize = period
            .parse()
            .map_err(|_| CliError::Usage(format!("bad corrupt period {period:?}")))?;
        return Ok(Box::new(CorruptingAdapter::new(manifest, period)?));
    }
    if let Some(rtf) = spec.strip_prefix("throttle:") {
        let rtf: f64 = rtf
            .parse()
            .map_err(|_| CliError::Usage(format!("bad throttle rtf {rtf:?}")))?;
        return Ok(Box::new(ThrottledAdapter::new(
            EchoReferenceAdapter::new(manifest),
            rtf,
        )));
    }
    if let Some(cmd) = spec.strip_prefix("cmd:") {
        return Ok(Box::new(SubprocessAdapter::new(split_command(cmd)?)));
    }
    Err(CliError::Usage(format!(
        "unknown adapter {spec:?} (echo, corrupt[:N], throttle:<rtf>, cmd:...)"
    )))
}

fn cmd_eval(
    manifest_path: &Path,
    adapter_spec: &str,
    out: &Path,
    options: &GlobalOptions,
) -> std::result::Result<(), CliError> {
    let manifest = Manifest::read_jsonl(manifest_path)?;
    let base = manifest_dir(manifest_path);
    let validation = manifest.validate(&base, None);
    if !validation.passed() {
        for check in validation.checks.iter().filter(|c| !c.passed) {
            eprintln!("validation failure [{}]: {}", check.rule, check.detail);
        }
        return Err(CliError::App(Error::Manifest(
            "manifest failed validation; not running".into(),
        )));
    }

    let adapter = parse_adapter(adapter_spec, &manifest)?;
    let mut run = run_transcriber(&manifest, &base, adapter.as_ref(), options.jobs, options.seed)?;
    run.source_manifest = manifest_path.display().to_string();
    run.write_jsonl(out)?;
    println!("{}", out.display());

    let failed = run.failed_count();
    if failed > 0 {
        return Err(CliError::App(Error::RunHasFailures(failed)));
    }
    if !options.quiet {
        eprintln!("transcribed {} utterances", run.utterances.len());
    }
    Ok(())
}

fn cmd_score(
    run_path: &Path,
    lexicon_path: &Path,
    embeddings: Option<&Path>,
    out: &Path,
) -> std::result::Result<(), CliError> {
    let mut run = EvalRun::read_jsonl(run_path)?;
    let lexicon = TermLexicon::read(lexicon_path, &run.norm_policy)?;
    let store = embeddings.map(EmbeddingFile::read).transpose()?;
    score_run(&mut run, &lexicon, store.as_ref())?;
    run.write_jsonl(out)?;
    println!("{}", out.display());
    Ok(())
}

fn cmd_report(
    run_path: &Path,
    axes_spec: &str,
    format_spec: &str,
    out: Option<&Path>,
    allow_failures: bool,
) -> std::result::Result<(), CliError> {
    let run = EvalRun::read_jsonl(run_path)?;
    let groups: Vec<StratGroup> = axes_spec
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(StratGroup::parse)
        .collect::<Result<_>>()?;
    let format = ReportFormat::parse(format_spec)?;
    let report = aggregate_stratified(&run, &groups, allow_failures)?;
    match out {
        Some(path) => {
            emit_report(&report, format, path)?;
            println!("{}", path.display());
        }
        None => print!("{}", render_report(&report, format)),
    }
    Ok(())
}

fn read_metas_csv(path: &Path) -> Result<Vec<CheckpointMeta>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut metas = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                path,
                format!("line {}: expected path,step,val_loss", lineno + 1),
            ));
        }
        if lineno == 0 && fields[1].parse::<u64>().is_err() {
            continue; // header row
        }
        let step = fields[1].parse::<u64>().map_err(|_| {
            Error::parse(path, format!("line {}: bad step {:?}", lineno + 1, fields[1]))
        })?;
        let val_loss = fields[2].parse::<f64>().map_err(|_| {
            Error::parse(path, format!("line {}: bad loss {:?}", lineno + 1, fields[2]))
        })?;
        metas.push(CheckpointMeta::new(fields[0], step, val_loss)?);
    }
    if metas.is_empty() {
        return Err(Error::parse(path, "no checkpoint rows"));
    }
    Ok(metas)
}

fn cmd_ckpt_avg(
    files: &[PathBuf],
    out: &Path,
    metas: Option<&Path>,
    keep: Option<usize>,
    best: Option<usize>,
    options: &GlobalOptions,
) -> std::result::Result<(), CliError> {
    let paths: Vec<PathBuf> = match metas {
        Some(metas_path) => {
            if !files.is_empty() {
                return Err(CliError::Usage(
                    "give either positional files or --metas, not both".into(),
                ));
            }
            let metas = read_metas_csv(metas_path)?;
            let kept = select_top_checkpoints(&metas, keep.unwrap_or(metas.len()))?;
            let take = best.unwrap_or(kept.len()).min(kept.len());
            kept[..take].iter().map(|m| m.path.clone()).collect()
        }
        None => {
            if keep.is_some() || best.is_some() {
                return Err(CliError::Usage("--keep/--best require --metas".into()));
            }
            if files.is_empty() {
                return Err(CliError::Usage("no tensor files given".into()));
            }
            files.to_vec()
        }
    };

    let tensor_files = paths
        .iter()
        .map(|p| TensorFile::read(p))
        .collect::<Result<Vec<_>>>()?;
    let mut averaged = crate::checkpoints::average_tensor_files(&tensor_files)?;
    averaged.sources = paths.iter().map(|p| p.display().to_string()).collect();
    averaged.write(out)?;
    if !options.quiet {
        eprintln!("averaged {} checkpoints", paths.len());
    }
    println!("{}", out.display());
    Ok(())
}
