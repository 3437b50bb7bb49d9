//! Stratified aggregation of a scored run: unweighted per-utterance mean
//! and population standard deviation within each stratum and overall,
//! with RTF as ratio of totals (total wall over total audio).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textnorm::NormPolicy;

use super::{EvalRun, EvalUtterance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StratAxis {
    Speaker,
    Center,
    Category,
}

impl StratAxis {
    pub const ALL: [StratAxis; 3] = [Self::Speaker, Self::Center, Self::Category];

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "speaker" => Ok(Self::Speaker),
            "center" => Ok(Self::Center),
            "category" => Ok(Self::Category),
            other => Err(Error::UnknownAxis(other.to_string())),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Speaker => "speaker",
            Self::Center => "center",
            Self::Category => "category",
        }
    }

    fn key(self, u: &EvalUtterance) -> String {
        match self {
            Self::Speaker => u.speaker.clone(),
            Self::Center => u.center.clone(),
            Self::Category => u.category.map(|c| c.letter().to_string()),
        }
        .unwrap_or_else(|| "(none)".to_string())
    }
}

/// One stratification: a single axis or a `+`-joined cross of axes
/// (e.g. `center+category` groups by the cell).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratGroup {
    pub axes: Vec<StratAxis>,
}

impl StratGroup {
    pub fn single(axis: StratAxis) -> Self {
        Self { axes: vec![axis] }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let axes: Vec<StratAxis> = s
            .split('+')
            .map(StratAxis::parse)
            .collect::<Result<_>>()?;
        if axes.is_empty() {
            return Err(Error::UnknownAxis(s.to_string()));
        }
        Ok(Self { axes })
    }

    pub fn name(&self) -> String {
        self.axes
            .iter()
            .map(|a| a.as_str())
            .collect::<Vec<_>>()
            .join("+")
    }

    fn key(&self, u: &EvalUtterance) -> String {
        self.axes
            .iter()
            .map(|a| a.key(u))
            .collect::<Vec<_>>()
            .join("/")
    }
}

impl From<StratAxis> for StratGroup {
    fn from(axis: StratAxis) -> Self {
        Self::single(axis)
    }
}

/// Mean and population SD over the `n` utterances that carried the
/// metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

/// Population statistics; SD is zero for a single observation.
pub(crate) fn population_stats(values: &[f64]) -> Option<MetricStats> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some(MetricStats {
        mean,
        sd: var.sqrt(),
        n: values.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumRow {
    /// "overall" or the axis name.
    pub axis: String,
    /// "overall" or the stratum value (speaker id, center id, category
    /// letter; "(none)" for records missing the field).
    pub stratum: String,
    /// Scored utterances in the stratum.
    pub n: usize,
    pub cer: MetricStats,
    pub bleu1: MetricStats,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bertscore: Option<MetricStats>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub med_acc: Option<MetricStats>,
    pub audio_seconds: f64,
    pub wall_seconds: f64,
    /// Total wall over total audio.
    pub rtf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedReport {
    pub adapter_id: String,
    pub norm_policy: NormPolicy,
    pub lexicon_hash: Option<String>,
    pub seed: u64,
    pub failed_utterances: usize,
    pub rows: Vec<StratumRow>,
}

impl StratifiedReport {
    pub fn overall(&self) -> &StratumRow {
        &self.rows[0]
    }

    pub fn rows_for_axis<'a>(&'a self, axis: &'a str) -> impl Iterator<Item = &'a StratumRow> + 'a {
        self.rows.iter().filter(move |r| r.axis == axis)
    }
}

fn build_row(axis: &str, stratum: &str, members: &[&EvalUtterance]) -> StratumRow {
    let scores: Vec<_> = members.iter().filter_map(|u| u.score.as_ref()).collect();
    let cers: Vec<f64> = scores.iter().map(|s| s.cer).collect();
    let bleus: Vec<f64> = scores.iter().map(|s| s.bleu1).collect();
    let berts: Vec<f64> = scores.iter().filter_map(|s| s.bertscore_f1).collect();
    let meds: Vec<f64> = scores.iter().filter_map(|s| s.med_acc).collect();
    let audio_seconds: f64 = members.iter().map(|u| u.audio_seconds).sum();
    let wall_seconds: f64 = members.iter().filter_map(|u| u.wall_seconds).sum();
    StratumRow {
        axis: axis.to_string(),
        stratum: stratum.to_string(),
        n: scores.len(),
        cer: population_stats(&cers).expect("strata are non-empty"),
        bleu1: population_stats(&bleus).expect("strata are non-empty"),
        bertscore: population_stats(&berts),
        med_acc: population_stats(&meds),
        audio_seconds,
        wall_seconds,
        rtf: if audio_seconds > 0.0 {
            wall_seconds / audio_seconds
        } else {
            0.0
        },
    }
}

/// Aggregates a scored run overall and along the requested
/// stratifications (single axes or `+`-joined crosses). A run containing
/// failure markers is refused unless `allow_failures` is set, in which
/// case only scored utterances enter the statistics and the failure
/// count is carried in the report.
pub fn aggregate_stratified(
    run: &EvalRun,
    groups: &[StratGroup],
    allow_failures: bool,
) -> Result<StratifiedReport> {
    let failed = run.failed_count();
    if failed > 0 && !allow_failures {
        return Err(Error::RunHasFailures(failed));
    }
    if !run.is_scored() {
        return Err(Error::RunNotScored);
    }
    let scored: Vec<&EvalUtterance> = run
        .utterances
        .iter()
        .filter(|u| u.score.is_some())
        .collect();
    if scored.is_empty() {
        return Err(Error::RunHasFailures(failed));
    }

    let mut rows = vec![build_row("overall", "overall", &scored)];
    for group in groups {
        let mut strata: BTreeMap<String, Vec<&EvalUtterance>> = BTreeMap::new();
        for &u in &scored {
            strata.entry(group.key(u)).or_default().push(u);
        }
        for (stratum, members) in &strata {
            rows.push(build_row(&group.name(), stratum, members));
        }
    }

    Ok(StratifiedReport {
        adapter_id: run.adapter_id.clone(),
        norm_policy: run.norm_policy,
        lexicon_hash: run.lexicon_hash.clone(),
        seed: run.seed,
        failed_utterances: failed,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::UtteranceScore;

    pub(crate) fn utterance(
        id: &str,
        speaker: &str,
        cer: f64,
        med_acc: Option<f64>,
    ) -> EvalUtterance {
        EvalUtterance {
            id: id.into(),
            reference: "盲肠".into(),
            audio_seconds: 10.0,
            speaker: Some(speaker.into()),
            center: None,
            category: None,
            hypothesis: Some("盲肠".into()),
            wall_seconds: Some(0.05),
            error: None,
            score: Some(UtteranceScore {
                cer,
                bleu1: 1.0 - cer,
                bertscore_f1: None,
                med_acc,
                n_ref_tokens: 2,
                n_terms_in_ref: usize::from(med_acc.is_some()),
            }),
        }
    }

    fn run_with(utterances: Vec<EvalUtterance>) -> EvalRun {
        EvalRun {
            adapter_id: "fixture".into(),
            source_manifest: "fixture.jsonl".into(),
            norm_policy: NormPolicy::default(),
            lexicon_hash: None,
            seed: 0,
            utterances,
        }
    }

    #[test]
    fn per_speaker_means_recombine_to_overall() {
        // per-speaker means in percent, equal N per speaker
        let speaker_means = [25.06, 15.93, 19.24, 15.59, 23.63, 23.70];
        let mut utterances = Vec::new();
        for (si, &mean) in speaker_means.iter().enumerate() {
            for k in 0..2 {
                utterances.push(utterance(
                    &format!("p{si}-{k}"),
                    &format!("P{}", si + 1),
                    mean / 100.0,
                    Some(1.0),
                ));
            }
        }
        let run = run_with(utterances);
        let report = aggregate_stratified(&run, &[StratAxis::Speaker.into()], false).unwrap();

        let overall = report.overall();
        assert!((overall.cer.mean * 100.0 - 20.525).abs() < 1e-9);

        // weighted recombination of stratum means equals the overall mean
        let mut weighted = 0.0;
        let mut n = 0usize;
        for row in report.rows_for_axis("speaker") {
            weighted += row.cer.mean * row.n as f64;
            n += row.n;
        }
        assert_eq!(n, overall.n);
        assert!((weighted / n as f64 - overall.cer.mean).abs() < 1e-9);
    }

    #[test]
    fn single_member_stratum_has_zero_sd() {
        let run = run_with(vec![
            utterance("a", "P1", 0.1, None),
            utterance("b", "P2", 0.3, Some(0.5)),
        ]);
        let report = aggregate_stratified(&run, &[StratAxis::Speaker.into()], false).unwrap();
        for row in report.rows_for_axis("speaker") {
            assert_eq!(row.cer.sd, 0.0);
            assert_eq!(row.n, 1);
        }
        // med_acc aggregates only where present
        assert_eq!(report.overall().med_acc.unwrap().n, 1);
        assert_eq!(report.overall().med_acc.unwrap().mean, 0.5);
    }

    #[test]
    fn rtf_is_ratio_of_totals() {
        let run = run_with(vec![
            utterance("a", "P1", 0.0, None),
            utterance("b", "P1", 0.0, None),
        ]);
        let report = aggregate_stratified(&run, &[], false).unwrap();
        assert!((report.overall().rtf - 0.005).abs() < 1e-12);
    }

    #[test]
    fn failures_block_aggregation_without_override() {
        let mut bad = utterance("x", "P1", 0.0, None);
        bad.error = Some("boom".into());
        bad.hypothesis = None;
        bad.score = None;
        let run = run_with(vec![utterance("a", "P1", 0.2, None), bad]);
        assert!(matches!(
            aggregate_stratified(&run, &[], false),
            Err(Error::RunHasFailures(1))
        ));
        let report = aggregate_stratified(&run, &[], true).unwrap();
        assert_eq!(report.failed_utterances, 1);
        assert_eq!(report.overall().n, 1);
    }

    #[test]
    fn unscored_run_is_refused() {
        let mut u = utterance("a", "P1", 0.2, None);
        u.score = None;
        let run = run_with(vec![u]);
        assert!(matches!(
            aggregate_stratified(&run, &[], false),
            Err(Error::RunNotScored)
        ));
    }

    #[test]
    fn axis_parsing() {
        assert_eq!(StratAxis::parse("Speaker").unwrap(), StratAxis::Speaker);
        assert!(matches!(
            StratAxis::parse("model"),
            Err(Error::UnknownAxis(_))
        ));
    }
}
