//! Report emission. Markdown renders "mean ± SD" percent cells in the
//! table layout evaluations are usually read in; CSV and JSON-lines carry
//! the raw fractions at full precision. Every format embeds provenance:
//! adapter identity, normalization policy, lexicon digest, seed, and the
//! failure count.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

use super::{MetricStats, StratifiedReport, StratumRow};

/// Scoring conventions embedded in every report so numbers are
/// self-describing: tokenization unit, brevity penalty, matching rule,
/// SD estimator and RTF definition.
pub const METRIC_CONVENTIONS: &str = "tokens=han-chars+latin-runs+digits; \
cer=levenshtein/ref-tokens; bleu1=clipped-unigram-precision*brevity-penalty; \
medacc=leftmost-longest-reference-terms, substring-matched; \
bertscore=greedy-max-cosine, no-idf; sd=population; rtf=total-wall/total-audio";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Jsonl,
    Markdown,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "jsonl" => Ok(Self::Jsonl),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(Error::InvalidConfig(format!(
                "unknown report format {other:?} (csv, jsonl, markdown)"
            ))),
        }
    }
}

pub fn render_report(report: &StratifiedReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Jsonl => render_jsonl(report),
        ReportFormat::Markdown => render_markdown(report),
    }
}

pub fn emit_report(report: &StratifiedReport, format: ReportFormat, path: &Path) -> Result<()> {
    std::fs::write(path, render_report(report, format)).map_err(|e| Error::io(path, e))
}

fn policy_json(report: &StratifiedReport) -> String {
    serde_json::to_string(&report.norm_policy).expect("policy serializes")
}

fn render_csv(report: &StratifiedReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("# adapter: {}\n", report.adapter_id));
    out.push_str(&format!("# norm_policy: {}\n", policy_json(report)));
    out.push_str(&format!(
        "# lexicon: {}\n",
        report.lexicon_hash.as_deref().unwrap_or("-")
    ));
    out.push_str(&format!("# seed: {}\n", report.seed));
    out.push_str(&format!("# failed_utterances: {}\n", report.failed_utterances));
    out.push_str(&format!("# conventions: {METRIC_CONVENTIONS}\n"));
    out.push_str(
        "axis,stratum,n,cer_mean,cer_sd,bleu1_mean,bleu1_sd,bertscore_mean,bertscore_sd,bertscore_n,medacc_mean,medacc_sd,medacc_n,rtf,audio_seconds,wall_seconds\n",
    );
    for row in &report.rows {
        let opt = |m: &Option<MetricStats>| match m {
            Some(s) => format!("{},{},{}", s.mean, s.sd, s.n),
            None => ",,0".to_string(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            csv_field(&row.axis),
            csv_field(&row.stratum),
            row.n,
            row.cer.mean,
            row.cer.sd,
            row.bleu1.mean,
            row.bleu1.sd,
            opt(&row.bertscore),
            opt(&row.med_acc),
            row.rtf,
            row.audio_seconds,
            row.wall_seconds,
        ));
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Parses a CSV emitted by [`render_csv`] back into (header, rows of
/// fields), skipping provenance comments. Used by round-trip checks and
/// downstream tooling.
pub fn parse_csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn render_jsonl(report: &StratifiedReport) -> String {
    #[derive(Serialize)]
    struct Header<'a> {
        schema: &'a str,
        adapter_id: &'a str,
        norm_policy: &'a crate::textnorm::NormPolicy,
        lexicon_hash: &'a Option<String>,
        seed: u64,
        failed_utterances: usize,
        conventions: &'a str,
    }
    let mut out = serde_json::to_string(&Header {
        schema: "asr-report/1",
        adapter_id: &report.adapter_id,
        norm_policy: &report.norm_policy,
        lexicon_hash: &report.lexicon_hash,
        seed: report.seed,
        failed_utterances: report.failed_utterances,
        conventions: METRIC_CONVENTIONS,
    })
    .expect("header serializes");
    out.push('\n');
    for row in &report.rows {
        out.push_str(&serde_json::to_string(row).expect("row serializes"));
        out.push('\n');
    }
    out
}

fn pct_cell(stats: &MetricStats) -> String {
    format!("{:.2} ± {:.2}", stats.mean * 100.0, stats.sd * 100.0)
}

fn opt_pct_cell(stats: &Option<MetricStats>) -> String {
    match stats {
        Some(s) => pct_cell(s),
        None => "-".to_string(),
    }
}

fn markdown_table(rows: &[&StratumRow]) -> String {
    let mut out = String::new();
    out.push_str("| Stratum | N | CER (%) | BLEU-1 (%) | BERTScore (%) | Med ACC (%) | RTF |\n");
    out.push_str("|---|---|---|---|---|---|---|\n");
    for row in rows {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {:.6} |\n",
            row.stratum,
            row.n,
            pct_cell(&row.cer),
            pct_cell(&row.bleu1),
            opt_pct_cell(&row.bertscore),
            opt_pct_cell(&row.med_acc),
            row.rtf,
        ));
    }
    out
}

fn render_markdown(report: &StratifiedReport) -> String {
    let mut out = String::new();
    out.push_str("# Evaluation report\n\n");
    out.push_str(&format!(
        "Adapter `{}`, {} scored utterances, {} failed.\n\n",
        report.adapter_id,
        report.overall().n,
        report.failed_utterances
    ));

    out.push_str("## Overall\n\n");
    out.push_str(&markdown_table(&[report.overall()]));

    let mut axes: Vec<&str> = Vec::new();
    for row in &report.rows[1..] {
        if !axes.contains(&row.axis.as_str()) {
            axes.push(&row.axis);
        }
    }
    for axis in axes {
        out.push_str(&format!("\n## By {axis}\n\n"));
        let rows: Vec<&StratumRow> = report.rows_for_axis(axis).collect();
        out.push_str(&markdown_table(&rows));
    }

    out.push_str("\n---\n");
    out.push_str(&format!(
        "Provenance: adapter `{}`; lexicon `{}`; seed {}; normalization `{}`; failed utterances {}.\n",
        report.adapter_id,
        report.lexicon_hash.as_deref().unwrap_or("-"),
        report.seed,
        policy_json(report),
        report.failed_utterances
    ));
    out.push_str(&format!("Conventions: {METRIC_CONVENTIONS}.\n"));
    out
}
