//! Evaluation harness: scores every pair once, derives the scenario and
//! ablation reports from those raw scores, and writes report artifacts.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::ac::{AttemptProbabilities, ConfusionSummary};
use crate::config::RunConfig;
use crate::domain::{AttemptLabel, Scenario, ValidatedManifest};
use crate::error::{Error, Result};
use crate::fusion::{fuse, BonaFideRoute, FusionConfig, FusionMode, ModuleScores};
use crate::io::{write_atomic, write_json};
use crate::metrics::{det_curve, DetCurve, ErrorSummary, ScoreSet};
use crate::pipeline::{pair_ref, Pipeline};

/// Every module output for one scored pair; reports are derived from these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawResult {
    pub pair_ref: String,
    pub label: AttemptLabel,
    pub alpha: Option<f64>,
    pub cosine: f64,
    pub p_a: f64,
    pub p_b: f64,
    pub p_c: f64,
    pub s_ida: f64,
    pub s_id: f64,
    pub s_artifact: Option<f64>,
}

impl RawResult {
    pub fn probabilities(&self) -> AttemptProbabilities {
        AttemptProbabilities {
            p_a: self.p_a,
            p_b: self.p_b,
            p_c: self.p_c,
        }
    }

    pub fn module_scores(&self) -> ModuleScores {
        ModuleScores {
            s_ida: self.s_ida,
            s_id: self.s_id,
        }
    }
}

const RAW_HEADER: [&str; 10] = [
    "pair_ref", "label", "alpha", "cosine", "p_a", "p_b", "p_c", "s_ida", "s_id", "s_artifact",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Raw results as CSV. Floats use the shortest representation that parses
/// back to the same value.
pub fn raw_to_csv(raw: &[RawResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RAW_HEADER)?;
    for r in raw {
        w.write_record([
            r.pair_ref.clone(),
            r.label.as_str().to_string(),
            opt(r.alpha),
            r.cosine.to_string(),
            r.p_a.to_string(),
            r.p_b.to_string(),
            r.p_c.to_string(),
            r.s_ida.to_string(),
            r.s_id.to_string(),
            opt(r.s_artifact),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serde(e.to_string()))
}

pub fn raw_from_csv_reader<R: Read>(reader: R) -> Result<Vec<RawResult>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.iter().ne(RAW_HEADER) {
        return Err(Error::Manifest {
            row: 0,
            reason: format!("raw score header must be {}", RAW_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let num = |k: usize| -> Result<f64> {
            rec[k].parse::<f64>().map_err(|e| Error::Manifest {
                row,
                reason: format!("{}: {e}", RAW_HEADER[k]),
            })
        };
        let opt_num = |k: usize| -> Result<Option<f64>> {
            if rec[k].is_empty() {
                Ok(None)
            } else {
                num(k).map(Some)
            }
        };
        out.push(RawResult {
            pair_ref: rec[0].to_string(),
            label: AttemptLabel::from_str(&rec[1]).map_err(|e| Error::Manifest {
                row,
                reason: e.to_string(),
            })?,
            alpha: opt_num(2)?,
            cosine: num(3)?,
            p_a: num(4)?,
            p_b: num(5)?,
            p_c: num(6)?,
            s_ida: num(7)?,
            s_id: num(8)?,
            s_artifact: opt_num(9)?,
        });
    }
    Ok(out)
}

pub fn read_raw(path: &Path) -> Result<Vec<RawResult>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    raw_from_csv_reader(f)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    Full,
    IdaOnly,
    IdOnly,
    ArtifactOnly,
    OracleAc,
    BfRouteIda,
}

impl Ablation {
    pub const ALL: [Ablation; 6] = [
        Ablation::Full,
        Ablation::IdaOnly,
        Ablation::IdOnly,
        Ablation::ArtifactOnly,
        Ablation::OracleAc,
        Ablation::BfRouteIda,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::IdaOnly => "ida_only",
            Ablation::IdOnly => "id_only",
            Ablation::ArtifactOnly => "artifact_only",
            Ablation::OracleAc => "oracle_ac",
            Ablation::BfRouteIda => "bf_route_ida",
        }
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation `{s}`")))
    }
}

/// Final scores of one variant over `raw`, in order.
pub fn variant_scores(raw: &[RawResult], ablation: Ablation, fusion: FusionConfig) -> Result<Vec<f64>> {
    raw.iter()
        .map(|r| match ablation {
            Ablation::Full => fuse(fusion.mode, fusion.bona_fide_route, &r.probabilities(), &r.module_scores()),
            Ablation::IdaOnly => Ok(r.s_ida),
            Ablation::IdOnly => Ok(r.s_id),
            Ablation::ArtifactOnly => r.s_artifact.ok_or_else(|| {
                Error::Model(format!("no artifact-only score for {}", r.pair_ref))
            }),
            Ablation::OracleAc => fuse(
                fusion.mode,
                fusion.bona_fide_route,
                &AttemptProbabilities::one_hot(r.label),
                &r.module_scores(),
            ),
            Ablation::BfRouteIda => fuse(
                FusionMode::Weighted,
                BonaFideRoute::BfToIda,
                &r.probabilities(),
                &r.module_scores(),
            ),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub n_bona_fide: usize,
    pub n_morph: usize,
    /// `None` when either side of the scenario is empty.
    pub summary: Option<ErrorSummary>,
    pub det: Option<DetCurve>,
    pub warning: Option<String>,
}

/// Bona fide and morph score lists of one scenario.
pub fn scenario_score_set(raw: &[RawResult], scores: &[f64], scenario: Scenario) -> (Vec<f64>, Vec<f64>) {
    let mut bf = Vec::new();
    let mut morph = Vec::new();
    for (r, &s) in raw.iter().zip(scores) {
        if !scenario.admits(r.label) {
            continue;
        }
        if r.label.is_morph() {
            morph.push(s);
        } else {
            bf.push(s);
        }
    }
    (bf, morph)
}

fn scenario_report(raw: &[RawResult], scores: &[f64], scenario: Scenario) -> ScenarioReport {
    let (bf, morph) = scenario_score_set(raw, scores, scenario);
    let (n_bona_fide, n_morph) = (bf.len(), morph.len());
    match ScoreSet::new(bf, morph) {
        Ok(set) => ScenarioReport {
            scenario,
            n_bona_fide,
            n_morph,
            summary: Some(ErrorSummary::compute(&set)),
            det: Some(det_curve(&set)),
            warning: None,
        },
        Err(_) => {
            let warning = format!(
                "{scenario} scenario has {n_bona_fide} bona fide and {n_morph} morph scores; metrics omitted"
            );
            log::warn!("{warning}");
            ScenarioReport {
                scenario,
                n_bona_fide,
                n_morph,
                summary: None,
                det: None,
                warning: Some(warning),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityBin {
    pub lower: f64,
    pub upper: f64,
    pub n_bona_fide: usize,
    pub n_criminal: usize,
    pub n_accomplice: usize,
    /// Fractions of the bin's morph pairs; `None` without morph pairs.
    pub criminal_fraction: Option<f64>,
    pub accomplice_fraction: Option<f64>,
    /// `None` when the bin lacks bona fide or morph scores.
    pub wae: Option<f64>,
    /// Set when the bin holds only one of bona fide / morph pairs.
    pub single_class: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinTable {
    pub similarity_source: String,
    pub bins: Vec<SimilarityBin>,
}

/// Equal-width bins over the observed cosine range with per-bin WAE (of
/// `scores`) and criminal/accomplice fractions.
pub fn similarity_binned_analysis(raw: &[RawResult], scores: &[f64], n_bins: usize) -> Result<Vec<SimilarityBin>> {
    if n_bins < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 similarity bins, got {n_bins}")));
    }
    if raw.len() != scores.len() {
        return Err(Error::InvalidInput("one score per raw result is required".into()));
    }
    if raw.is_empty() {
        return Err(Error::EmptyScores);
    }
    let lo = raw.iter().map(|r| r.cosine).fold(f64::INFINITY, f64::min);
    let hi = raw.iter().map(|r| r.cosine).fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / n_bins as f64;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_bins];
    for (i, r) in raw.iter().enumerate() {
        let k = if width > 0.0 {
            (((r.cosine - lo) / width) as usize).min(n_bins - 1)
        } else {
            0
        };
        members[k].push(i);
    }
    members
        .iter()
        .enumerate()
        .map(|(k, idx)| {
            let count = |l: AttemptLabel| idx.iter().filter(|&&i| raw[i].label == l).count();
            let (n_bf, n_cr, n_ac) = (
                count(AttemptLabel::BonaFide),
                count(AttemptLabel::Criminal),
                count(AttemptLabel::Accomplice),
            );
            let n_morph = n_cr + n_ac;
            let frac = |n: usize| (n_morph > 0).then(|| n as f64 / n_morph as f64);
            let bf: Vec<f64> = idx.iter().filter(|&&i| !raw[i].label.is_morph()).map(|&i| scores[i]).collect();
            let morph: Vec<f64> = idx.iter().filter(|&&i| raw[i].label.is_morph()).map(|&i| scores[i]).collect();
            let wae = ScoreSet::new(bf, morph).ok().map(|s| ErrorSummary::compute(&s).wae);
            Ok(SimilarityBin {
                lower: lo + k as f64 * width,
                upper: if k + 1 == n_bins { hi } else { lo + (k + 1) as f64 * width },
                n_bona_fide: n_bf,
                n_criminal: n_cr,
                n_accomplice: n_ac,
                criminal_fraction: frac(n_cr),
                accomplice_fraction: frac(n_ac),
                wae,
                single_class: (n_bf == 0) != (n_morph == 0),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub ablation: Ablation,
    /// Restrict the report to one scenario; all three otherwise.
    pub scenario: Option<Scenario>,
    pub bins: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            ablation: Ablation::Full,
            scenario: None,
            bins: 10,
        }
    }
}

/// Scenario metrics under the other bona fide routing (oracle runs only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternateRouting {
    pub bona_fide_route: BonaFideRoute,
    pub scenarios: Vec<ScenarioReport>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub scoring_seconds: f64,
    pub metrics_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ablation: Ablation,
    pub fusion: FusionConfig,
    pub n_pairs: usize,
    pub scenarios: Vec<ScenarioReport>,
    pub alternate_routing: Option<AlternateRouting>,
    pub confusion: ConfusionSummary,
    pub similarity: BinTable,
    pub seed: u64,
    pub config: Option<RunConfig>,
    pub timing: Timing,
}

impl MetricsReport {
    pub fn scenario(&self, s: Scenario) -> Option<&ScenarioReport> {
        self.scenarios.iter().find(|r| r.scenario == s)
    }

    pub fn summary(&self, s: Scenario) -> Option<&ErrorSummary> {
        self.scenario(s).and_then(|r| r.summary.as_ref())
    }
}

/// Report context that does not come from the raw scores.
#[derive(Debug, Clone, Default)]
pub struct ReportContext {
    pub fusion: FusionConfig,
    pub seed: u64,
    pub config: Option<RunConfig>,
    pub similarity_source: String,
}

/// Builds the full report from raw scores alone.
pub fn report_from_raw(raw: &[RawResult], options: &EvalOptions, ctx: &ReportContext) -> Result<MetricsReport> {
    let started = Instant::now();
    let scores = variant_scores(raw, options.ablation, ctx.fusion)?;
    let wanted: Vec<Scenario> = match options.scenario {
        Some(s) => vec![s],
        None => Scenario::ALL.to_vec(),
    };
    let scenarios: Vec<ScenarioReport> = wanted.iter().map(|&s| scenario_report(raw, &scores, s)).collect();

    let alternate_routing = if options.ablation == Ablation::OracleAc {
        let other = match ctx.fusion.bona_fide_route {
            BonaFideRoute::BfToId => BonaFideRoute::BfToIda,
            BonaFideRoute::BfToIda => BonaFideRoute::BfToId,
        };
        let alt = FusionConfig {
            bona_fide_route: other,
            ..ctx.fusion
        };
        let alt_scores = variant_scores(raw, Ablation::OracleAc, alt)?;
        Some(AlternateRouting {
            bona_fide_route: other,
            scenarios: wanted.iter().map(|&s| scenario_report(raw, &alt_scores, s)).collect(),
        })
    } else {
        None
    };

    let kept: Vec<usize> = (0..raw.len())
        .filter(|&i| wanted.iter().any(|s| s.admits(raw[i].label)))
        .collect();
    let kept_raw: Vec<RawResult> = kept.iter().map(|&i| raw[i].clone()).collect();
    let kept_scores: Vec<f64> = kept.iter().map(|&i| scores[i]).collect();
    let confusion = ConfusionSummary::from_pairs(kept_raw.iter().map(|r| (r.label, r.probabilities().predicted())));
    let bins = if kept_raw.is_empty() {
        Vec::new()
    } else {
        similarity_binned_analysis(&kept_raw, &kept_scores, options.bins)?
    };

    Ok(MetricsReport {
        ablation: options.ablation,
        fusion: ctx.fusion,
        n_pairs: kept_raw.len(),
        scenarios,
        alternate_routing,
        confusion,
        similarity: BinTable {
            similarity_source: ctx.similarity_source.clone(),
            bins,
        },
        seed: ctx.seed,
        config: ctx.config.clone(),
        timing: Timing {
            scoring_seconds: 0.0,
            metrics_seconds: started.elapsed().as_secs_f64(),
        },
    })
}

/// Scores every pair of `manifest` once. `jobs == 0` uses all cores.
pub fn score_manifest(pipeline: &Pipeline, manifest: &ValidatedManifest, jobs: usize) -> Result<Vec<RawResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    pool.install(|| {
        manifest
            .entries()
            .par_iter()
            .map(|pair| {
                let s = pipeline.pair_scores(pair)?;
                Ok(RawResult {
                    pair_ref: pair_ref(pair),
                    label: pair.label,
                    alpha: pair.alpha(),
                    cosine: s.cosine,
                    p_a: s.probabilities.p_a,
                    p_b: s.probabilities.p_b,
                    p_c: s.probabilities.p_c,
                    s_ida: s.s_ida,
                    s_id: s.s_id,
                    s_artifact: s.s_artifact,
                })
            })
            .collect()
    })
}

pub fn pipeline_context(pipeline: &Pipeline) -> ReportContext {
    ReportContext {
        fusion: pipeline.fusion(),
        seed: pipeline.models.seed,
        config: Some(pipeline.models.config.clone()),
        similarity_source: pipeline.models.provider.id.clone(),
    }
}

/// Scores the manifest and builds the report; returns the raw scores too.
pub fn run_benchmark(
    pipeline: &Pipeline,
    manifest: &ValidatedManifest,
    options: &EvalOptions,
    jobs: usize,
) -> Result<(MetricsReport, Vec<RawResult>)> {
    let started = Instant::now();
    let raw = score_manifest(pipeline, manifest, jobs)?;
    let scoring_seconds = started.elapsed().as_secs_f64();
    let mut report = report_from_raw(&raw, options, &pipeline_context(pipeline))?;
    report.timing.scoring_seconds = scoring_seconds;
    Ok((report, raw))
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "    -".to_string(), |x| format!("{x:.3}"))
}

/// Human-readable tables: per-scenario errors, AC confusion, similarity bins.
pub fn render_text(report: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "variant: {}  fusion: {:?}/{:?}  pairs: {}  seed: {}",
        report.ablation.as_str(),
        report.fusion.mode,
        report.fusion.bona_fide_route,
        report.n_pairs,
        report.seed
    );
    let table = |out: &mut String, scenarios: &[ScenarioReport]| {
        let _ = writeln!(out, "{:<11} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}", "scenario", "BF", "morph", "EER", "B0.1", "B0.05", "B0.01", "WAE");
        for s in scenarios {
            let m = s.summary;
            let _ = writeln!(
                out,
                "{:<11} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}",
                s.scenario.as_str(),
                s.n_bona_fide,
                s.n_morph,
                fmt_metric(m.map(|m| m.eer)),
                fmt_metric(m.map(|m| m.b_010)),
                fmt_metric(m.map(|m| m.b_005)),
                fmt_metric(m.map(|m| m.b_001)),
                fmt_metric(m.map(|m| m.wae)),
            );
        }
    };
    table(&mut out, &report.scenarios);
    if let Some(alt) = &report.alternate_routing {
        let _ = writeln!(out, "\nalternate routing {:?}:", alt.bona_fide_route);
        table(&mut out, &alt.scenarios);
    }
    let c = &report.confusion;
    let _ = writeln!(out, "\nattempt classifier: accuracy {:.3}  macro-F1 {:.3}", c.accuracy, c.macro_f1);
    let _ = writeln!(out, "  rows = true (A, B, C), columns = predicted");
    for row in c.matrix {
        let _ = writeln!(out, "  {:>6} {:>6} {:>6}", row[0], row[1], row[2]);
    }
    let _ = writeln!(out, "\nsimilarity bins ({}):", report.similarity.similarity_source);
    let _ = writeln!(out, "{:>15} {:>5} {:>5} {:>5} {:>7} {:>7} {:>6}", "cosine", "BF", "crim", "acc", "crim%", "acc%", "WAE");
    for b in &report.similarity.bins {
        let _ = writeln!(
            out,
            "[{:>6.3},{:>6.3}] {:>5} {:>5} {:>5} {:>7} {:>7} {:>6}{}",
            b.lower,
            b.upper,
            b.n_bona_fide,
            b.n_criminal,
            b.n_accomplice,
            fmt_metric(b.criminal_fraction),
            fmt_metric(b.accomplice_fraction),
            fmt_metric(b.wae),
            if b.single_class { "  (single class)" } else { "" }
        );
    }
    out
}

/// DET curves as an SVG plot with probit-scaled axes (APCER horizontal,
/// BPCER vertical).
pub fn det_svg(curves: &[(&str, &DetCurve)]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 480.0;
    const M: f64 = 56.0;
    const LIMIT: f64 = 1e-3;
    let normal = Normal::standard();
    let probit = |p: f64| normal.inverse_cdf(p.clamp(LIMIT, 1.0 - LIMIT));
    let (zmin, zmax) = (probit(LIMIT), probit(1.0 - LIMIT));
    let sx = |p: f64| M + (probit(p) - zmin) / (zmax - zmin) * (W - 2.0 * M);
    let sy = |p: f64| H - M - (probit(p) - zmin) / (zmax - zmin) * (H - 2.0 * M);
    let colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    for t in [0.001, 0.01, 0.05, 0.1, 0.2, 0.5, 0.8, 0.95, 0.99] {
        let (x, y) = (sx(t), sy(t));
        let _ = writeln!(s, r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/>"##, M, H - M);
        let _ = writeln!(s, r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##, M, W - M);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{t}</text>"#, H - M + 14.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{t}</text>"#, M - 4.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">APCER</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(s, r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">BPCER</text>"#, H / 2.0, H / 2.0);
    for (k, (name, curve)) in curves.iter().enumerate() {
        let colour = colours[k % colours.len()];
        let pts: Vec<String> = curve
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.apcer), sy(p.bpcer)))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" fill="{colour}">{name}</text>"#, W - M - 90.0, M + 14.0 * (k as f64 + 1.0));
    }
    s.push_str("</svg>\n");
    s
}

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const RAW_CSV: &str = "raw_scores.csv";
pub const DET_SVG: &str = "det.svg";

pub fn write_det_plot(path: &Path, report: &MetricsReport) -> Result<()> {
    let curves: Vec<(&str, &DetCurve)> = report
        .scenarios
        .iter()
        .filter_map(|s| s.det.as_ref().map(|d| (s.scenario.as_str(), d)))
        .collect();
    write_atomic(path, det_svg(&curves).as_bytes())
}

/// Writes report JSON, text table, DET plot and (when given) raw scores into `dir`.
pub fn write_outputs(dir: &Path, report: &MetricsReport, raw: Option<&[RawResult]>) -> Result<()> {
    write_json(&dir.join(REPORT_JSON), report)?;
    write_atomic(&dir.join(REPORT_TEXT), render_text(report).as_bytes())?;
    write_det_plot(&dir.join(DET_SVG), report)?;
    if let Some(raw) = raw {
        write_atomic(&dir.join(RAW_CSV), raw_to_csv(raw)?.as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(label: AttemptLabel, cosine: f64, p: [f64; 3], s_ida: f64, s_id: f64) -> RawResult {
        RawResult {
            pair_ref: format!("d{cosine}|l"),
            label,
            alpha: label.is_morph().then_some(0.3),
            cosine,
            p_a: p[0],
            p_b: p[1],
            p_c: p[2],
            s_ida,
            s_id,
            s_artifact: Some(s_ida / 2.0),
        }
    }

    fn sample() -> Vec<RawResult> {
        use AttemptLabel::*;
        vec![
            r(BonaFide, 0.9, [0.1, 0.8, 0.1], 0.1, 0.2),
            r(BonaFide, 0.85, [0.2, 0.7, 0.1], 0.3, 0.1),
            r(Criminal, 0.3, [0.1, 0.1, 0.8], 0.4, 0.9),
            r(Criminal, 0.35, [0.2, 0.2, 0.6], 0.6, 0.7),
            r(Accomplice, 0.7, [0.7, 0.2, 0.1], 0.8, 0.3),
            r(Accomplice, 0.75, [0.3, 0.6, 0.1], 0.9, 0.15),
        ]
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut raw = sample();
        raw[0].cosine = 0.1 + 0.2;
        raw[1].s_artifact = None;
        raw[2].alpha = None;
        let text = raw_to_csv(&raw).unwrap();
        assert_eq!(raw_from_csv_reader(text.as_bytes()).unwrap(), raw);
    }

    #[test]
    fn both_scenario_is_the_union() {
        let raw = sample();
        let scores = variant_scores(&raw, Ablation::Full, FusionConfig::default()).unwrap();
        let (bf_a, m_a) = scenario_score_set(&raw, &scores, Scenario::Accomplice);
        let (bf_c, m_c) = scenario_score_set(&raw, &scores, Scenario::Criminal);
        let (bf_b, mut m_b) = scenario_score_set(&raw, &scores, Scenario::Both);
        assert_eq!(bf_a, bf_b);
        assert_eq!(bf_c, bf_b);
        let mut union = [m_a, m_c].concat();
        union.sort_by(f64::total_cmp);
        m_b.sort_by(f64::total_cmp);
        assert_eq!(union, m_b);
    }

    #[test]
    fn variants_follow_their_definitions() {
        let raw = sample();
        let f = FusionConfig::default();
        assert_eq!(variant_scores(&raw, Ablation::IdOnly, f).unwrap(), raw.iter().map(|r| r.s_id).collect::<Vec<_>>());
        assert_eq!(variant_scores(&raw, Ablation::IdaOnly, f).unwrap(), raw.iter().map(|r| r.s_ida).collect::<Vec<_>>());
        let oracle = variant_scores(&raw, Ablation::OracleAc, f).unwrap();
        for (r, s) in raw.iter().zip(&oracle) {
            let expected = if r.label == AttemptLabel::Accomplice { r.s_ida } else { r.s_id };
            assert_eq!(*s, expected);
        }
        let bf_ida = variant_scores(&raw, Ablation::BfRouteIda, f).unwrap();
        let expected = (0.1 + 0.8) * 0.1 + 0.1 * 0.2;
        assert!((bf_ida[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn bins_partition_pairs_and_fractions_sum_to_one() {
        let raw = sample();
        let scores = variant_scores(&raw, Ablation::Full, FusionConfig::default()).unwrap();
        assert!(similarity_binned_analysis(&raw, &scores, 1).is_err());
        let bins = similarity_binned_analysis(&raw, &scores, 3).unwrap();
        let total: usize = bins.iter().map(|b| b.n_bona_fide + b.n_criminal + b.n_accomplice).sum();
        assert_eq!(total, raw.len());
        for b in &bins {
            if let (Some(c), Some(a)) = (b.criminal_fraction, b.accomplice_fraction) {
                assert!((c + a - 1.0).abs() < 1e-12);
            }
        }
        // Lowest bin holds only criminal pairs; the top bin holds bona fide pairs.
        assert_eq!(bins[0].n_criminal, 2);
        assert!(bins[0].single_class);
        assert_eq!(bins[2].n_bona_fide, 2);
    }

    #[test]
    fn report_is_recomputable_and_filters_scenarios() {
        let raw = sample();
        let ctx = ReportContext::default();
        let opts = EvalOptions {
            bins: 3,
            ..Default::default()
        };
        let mut a = report_from_raw(&raw, &opts, &ctx).unwrap();
        let reparsed = raw_from_csv_reader(raw_to_csv(&raw).unwrap().as_bytes()).unwrap();
        let mut b = report_from_raw(&reparsed, &opts, &ctx).unwrap();
        a.timing = Timing::default();
        b.timing = Timing::default();
        assert_eq!(a, b);
        assert_eq!(a.scenarios.len(), 3);

        let crim = report_from_raw(
            &raw,
            &EvalOptions {
                scenario: Some(Scenario::Criminal),
                bins: 3,
                ..Default::default()
            },
            &ctx,
        )
        .unwrap();
        assert_eq!(crim.scenarios.len(), 1);
        assert_eq!(crim.n_pairs, 4);
        let text = render_text(&crim);
        assert!(text.contains("criminal"));
        assert!(!text.contains("accomplice "));
    }

    #[test]
    fn empty_scenario_warns_instead_of_failing() {
        let raw: Vec<RawResult> = sample().into_iter().filter(|r| r.label != AttemptLabel::Accomplice).collect();
        let rep = report_from_raw(&raw, &EvalOptions::default(), &ReportContext::default()).unwrap();
        let acc = rep.scenario(Scenario::Accomplice).unwrap();
        assert!(acc.summary.is_none() && acc.warning.is_some());
        assert!(rep.summary(Scenario::Criminal).is_some());
    }

    #[test]
    fn oracle_reports_both_routings() {
        let rep = report_from_raw(
            &sample(),
            &EvalOptions {
                ablation: Ablation::OracleAc,
                bins: 2,
                ..Default::default()
            },
            &ReportContext::default(),
        )
        .unwrap();
        assert_eq!(rep.alternate_routing.unwrap().bona_fide_route, BonaFideRoute::BfToIda);
    }

    #[test]
    fn det_svg_is_well_formed() {
        let set = ScoreSet::new(vec![0.1, 0.2, 0.4], vec![0.3, 0.8]).unwrap();
        let svg = det_svg(&[("both", &det_curve(&set))]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("polyline"));
    }

    #[test]
    fn ablation_names_parse() {
        for a in Ablation::ALL {
            assert_eq!(a.as_str().parse::<Ablation>().unwrap(), a);
        }
        assert!("nope".parse::<Ablation>().is_err());
    }
}
