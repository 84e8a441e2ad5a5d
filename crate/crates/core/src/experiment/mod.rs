//! Staged experiment runs: spectrum, then the localization analyses, then
//! dynamics and the box-doubling study, with every artifact recorded in a
//! manifest.
//!
//! Spectrum dumps carry the config hash; a rerun into the same directory with
//! the same config reloads them instead of diagonalizing again.

pub mod config;
mod study;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub use config::ExperimentConfig;
pub use study::{convergence_study, study_from_spectra, AlphaDrift, EnvelopeRatio, StudyPair, StudyReport};

use crate::dynamics::{envelope, moment_series_with, ule_implies_bounded_moments_check, MomentVerdict, VerdictStatus};
use crate::error::{Error, Result};
use crate::localization::{
    bootstrap_inequality_check_with, check_eigenvalue_asymptotics, ule_constants_with, UleReport,
};
use crate::operator::build_operator_with_limit;
use crate::spectral::{diagonalize_batch, SpectralData};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Spectrum,
    Asymptotics,
    Ule,
    Bootstrap,
    Dynamics,
    Study,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Spectrum,
        Stage::Asymptotics,
        Stage::Ule,
        Stage::Bootstrap,
        Stage::Dynamics,
        Stage::Study,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Spectrum => "spectrum",
            Stage::Asymptotics => "asymptotics",
            Stage::Ule => "ule",
            Stage::Bootstrap => "bootstrap",
            Stage::Dynamics => "dynamics",
            Stage::Study => "study",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum StageStatus {
    Completed,
    /// Spectrum reloaded from dumps written under the same config hash.
    Resumed,
    Failed { cause: String },
    Skipped { reason: String },
    /// Not enabled in the config or not requested by the caller.
    Disabled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: StageStatus,
    /// File names relative to the output directory.
    pub artifacts: Vec<String>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheck {
    pub name: String,
    pub half_width: usize,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    /// The config with all defaults filled in.
    pub config: ExperimentConfig,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub stages: Vec<StageRecord>,
    pub theorem_checks: Vec<TheoremCheck>,
}

impl RunManifest {
    pub fn stage(&self, stage: Stage) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.stage == stage)
    }

    pub fn artifacts(&self) -> impl Iterator<Item = &str> {
        self.stages.iter().flat_map(|s| s.artifacts.iter().map(String::as_str))
    }

    pub fn any_stage_failed(&self) -> bool {
        self.stages.iter().any(|s| matches!(s.status, StageStatus::Failed { .. }))
    }

    pub fn all_checks_pass(&self) -> bool {
        self.theorem_checks.iter().all(|c| c.pass)
    }

    /// 0 success, 2 stage failure, 3 a theorem check with `pass = false`.
    pub fn exit_code(&self) -> i32 {
        if self.any_stage_failed() {
            2
        } else if !self.all_checks_pass() {
            3
        } else {
            0
        }
    }

    pub fn read(dir: &Path) -> Result<RunManifest> {
        Ok(serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE))?)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub out: PathBuf,
    /// Stages the caller asked for. Stages also need to be enabled in the config.
    pub stages: BTreeSet<Stage>,
    /// Fail the spectrum stage instead of diagonalizing when a dump is missing.
    pub require_dumps: bool,
}

impl RunOptions {
    pub fn all(out: impl Into<PathBuf>) -> Self {
        RunOptions {
            out: out.into(),
            stages: Stage::ALL.into_iter().collect(),
            require_dumps: false,
        }
    }
}

/// CSV float format: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_label(x: f64) -> String {
    format!("{x}")
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    out: &'a Path,
    records: Vec<StageRecord>,
    checks: Vec<TheoremCheck>,
}

impl Runner<'_> {
    fn record(&mut self, stage: Stage, started: Instant, status: StageStatus, artifacts: Vec<String>) {
        self.records.push(StageRecord {
            stage,
            status,
            artifacts,
            seconds: started.elapsed().as_secs_f64(),
        });
    }

    fn skip(&mut self, stage: Stage, status: StageStatus) {
        self.records.push(StageRecord { stage, status, artifacts: Vec::new(), seconds: 0.0 });
    }

    fn check(&mut self, name: &str, half_width: usize, pass: bool, detail: String) {
        self.checks.push(TheoremCheck { name: name.into(), half_width, pass, detail });
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<String> {
        std::fs::write(self.out.join(name), serde_json::to_string_pretty(value)?)?;
        Ok(name.to_string())
    }

    fn csv(&self, name: &str) -> Result<csv::Writer<std::fs::File>> {
        Ok(csv::Writer::from_path(self.out.join(name))?)
    }
}

/// Executes the requested, enabled stages in dependency order and writes
/// `manifest.json` into `opts.out`.
///
/// A failing stage is recorded in the manifest; stages that depend on it are
/// skipped and independent ones still run. Only an invalid config or an I/O
/// failure on the manifest itself is returned as an error.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunManifest> {
    cfg.validate()?;
    std::fs::create_dir_all(&opts.out)?;
    let started_unix = unix_now();
    let hash = cfg.hash();
    let mut r = Runner { cfg, out: &opts.out, records: Vec::new(), checks: Vec::new() };
    let wants = |s: Stage| opts.stages.contains(&s);

    let t = Instant::now();
    let spectra = match spectrum_stage(&r, &hash, opts.require_dumps) {
        Ok((spectra, artifacts, resumed)) => {
            let status = if resumed { StageStatus::Resumed } else { StageStatus::Completed };
            r.record(Stage::Spectrum, t, status, artifacts);
            Some(spectra)
        }
        Err(e) => {
            r.record(Stage::Spectrum, t, StageStatus::Failed { cause: e.to_string() }, Vec::new());
            None
        }
    };
    let upstream_failed = || StageStatus::Skipped { reason: "spectrum stage failed".into() };

    // asymptotics
    if !(wants(Stage::Asymptotics) && cfg.asymptotics_enabled()) {
        r.skip(Stage::Asymptotics, StageStatus::Disabled);
    } else if let Some(spectra) = &spectra {
        let t = Instant::now();
        match asymptotics_stage(&mut r, spectra) {
            Ok(a) => r.record(Stage::Asymptotics, t, StageStatus::Completed, a),
            Err(e) => r.record(Stage::Asymptotics, t, StageStatus::Failed { cause: e.to_string() }, Vec::new()),
        }
    } else {
        r.skip(Stage::Asymptotics, upstream_failed());
    }

    // ule
    let mut ule_reports: Option<BTreeMap<(usize, u64), UleReport>> = None;
    match (cfg.ule_alphas(), &spectra) {
        (Some(alphas), Some(spectra)) if wants(Stage::Ule) => {
            let t = Instant::now();
            match ule_stage(&mut r, spectra, alphas) {
                Ok((reports, a)) => {
                    ule_reports = Some(reports);
                    r.record(Stage::Ule, t, StageStatus::Completed, a);
                }
                Err(e) => r.record(Stage::Ule, t, StageStatus::Failed { cause: e.to_string() }, Vec::new()),
            }
        }
        (Some(_), None) if wants(Stage::Ule) => r.skip(Stage::Ule, upstream_failed()),
        _ => r.skip(Stage::Ule, StageStatus::Disabled),
    }

    // bootstrap
    if !(wants(Stage::Bootstrap) && cfg.bootstrap_enabled()) {
        r.skip(Stage::Bootstrap, StageStatus::Disabled);
    } else if let Some(spectra) = &spectra {
        let t = Instant::now();
        match bootstrap_stage(&mut r, spectra) {
            Ok(a) => r.record(Stage::Bootstrap, t, StageStatus::Completed, a),
            Err(e) => r.record(Stage::Bootstrap, t, StageStatus::Failed { cause: e.to_string() }, Vec::new()),
        }
    } else {
        r.skip(Stage::Bootstrap, upstream_failed());
    }

    // dynamics
    if !(wants(Stage::Dynamics) && cfg.dynamics_enabled().is_some()) {
        r.skip(Stage::Dynamics, StageStatus::Disabled);
    } else if let Some(spectra) = &spectra {
        let t = Instant::now();
        match dynamics_stage(&mut r, spectra, ule_reports.as_ref()) {
            Ok(a) => r.record(Stage::Dynamics, t, StageStatus::Completed, a),
            Err(e) => r.record(Stage::Dynamics, t, StageStatus::Failed { cause: e.to_string() }, Vec::new()),
        }
    } else {
        r.skip(Stage::Dynamics, upstream_failed());
    }

    // study
    if !wants(Stage::Study) {
        r.skip(Stage::Study, StageStatus::Disabled);
    } else if cfg.half_widths.len() < 2 {
        r.skip(Stage::Study, StageStatus::Skipped { reason: "needs at least two half-widths".into() });
    } else if let Some(spectra) = &spectra {
        let t = Instant::now();
        let (sources, qs) = match cfg.dynamics_enabled() {
            Some(d) => (d.sources.clone(), d.moments.clone()),
            None => (Vec::new(), Vec::new()),
        };
        let alphas = cfg.ule_alphas().unwrap_or(&[]);
        match study_from_spectra(cfg.execution, spectra, alphas, &sources, &qs)
            .and_then(|rep| r.write_json("study.json", &rep))
        {
            Ok(a) => r.record(Stage::Study, t, StageStatus::Completed, vec![a]),
            Err(e) => r.record(Stage::Study, t, StageStatus::Failed { cause: e.to_string() }, Vec::new()),
        }
    } else {
        r.skip(Stage::Study, upstream_failed());
    }

    let manifest = RunManifest {
        tool: "ladderloc".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: hash,
        config: cfg.resolved(),
        started_unix,
        finished_unix: unix_now(),
        stages: r.records,
        theorem_checks: r.checks,
    };
    std::fs::write(opts.out.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

fn spectrum_stem(n: usize) -> String {
    format!("spectrum_N{n}")
}

/// Returns the spectra in ascending half-width, the dump file names, and
/// whether every box came from an existing dump.
fn spectrum_stage(r: &Runner, hash: &str, require_dumps: bool) -> Result<(Vec<Arc<SpectralData>>, Vec<String>, bool)> {
    let cfg = r.cfg;
    let mut found: BTreeMap<usize, SpectralData> = BTreeMap::new();
    for &n in &cfg.half_widths {
        let json = r.out.join(format!("{}.json", spectrum_stem(n)));
        if !json.exists() {
            continue;
        }
        match SpectralData::read_dump(&json) {
            Ok((sd, header)) if header.config_hash.as_deref() == Some(hash) => {
                found.insert(n, sd);
            }
            Ok(_) if require_dumps => {
                return Err(Error::MalformedDump {
                    path: json,
                    message: "written under a different config".into(),
                })
            }
            Err(e) if require_dumps => return Err(e),
            _ => {}
        }
    }
    let missing: Vec<usize> = cfg.half_widths.iter().copied().filter(|n| !found.contains_key(n)).collect();
    if require_dumps && !missing.is_empty() {
        return Err(Error::InvalidArgument(format!("no spectrum dump for half-widths {missing:?}")));
    }
    let resumed = missing.is_empty();

    let kernel = cfg.build_kernel()?;
    let potential = cfg.potential_spec();
    let ops = missing
        .iter()
        .map(|&n| build_operator_with_limit(&kernel, &potential, n, cfg.tolerances.max_dimension).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    for (n, sd) in missing.iter().zip(diagonalize_batch(cfg.execution, &ops, &cfg.spectral_options())) {
        let sd = sd?;
        sd.write_dump(r.out, &spectrum_stem(*n), Some(hash))?;
        found.insert(*n, sd);
    }

    let artifacts = cfg
        .half_widths
        .iter()
        .flat_map(|&n| [format!("{}.json", spectrum_stem(n)), format!("{}.bin", spectrum_stem(n))])
        .collect();
    Ok((found.into_values().map(Arc::new).collect(), artifacts, resumed))
}

#[derive(Serialize)]
struct AsymptoticsSummary {
    half_width: usize,
    gamma_observed: f64,
    gamma_theoretical: f64,
    kernel_norm: f64,
    perturbation_sup: f64,
    interior_indices: usize,
    violations: Vec<i64>,
    pass: bool,
}

fn asymptotics_stage(r: &mut Runner, spectra: &[Arc<SpectralData>]) -> Result<Vec<String>> {
    let reports = spectra.iter().map(|sd| check_eigenvalue_asymptotics(sd)).collect::<Result<Vec<_>>>()?;
    let mut w = r.csv("asymptotics.csv")?;
    w.write_record(["half_width", "index", "eigenvalue", "deviation", "bound"])?;
    let mut summaries = Vec::new();
    for rep in &reports {
        for &(n, dev) in &rep.per_index_deviation {
            w.write_record([
                rep.half_width.to_string(),
                n.to_string(),
                fmt_f64(n as f64 + dev),
                fmt_f64(dev),
                fmt_f64(rep.gamma_theoretical),
            ])?;
        }
        r.check(
            "eigenvalue_pinning",
            rep.half_width,
            rep.pass(),
            format!("max |lambda_n - n| = {:e} vs bound {:e}", rep.gamma_observed, rep.gamma_theoretical),
        );
        summaries.push(AsymptoticsSummary {
            half_width: rep.half_width,
            gamma_observed: rep.gamma_observed,
            gamma_theoretical: rep.gamma_theoretical,
            kernel_norm: rep.kernel_norm,
            perturbation_sup: rep.perturbation_sup,
            interior_indices: rep.per_index_deviation.len(),
            violations: rep.violations(),
            pass: rep.pass(),
        });
    }
    w.flush()?;
    Ok(vec!["asymptotics.csv".into(), r.write_json("asymptotics.json", &summaries)?])
}

#[derive(Serialize)]
struct UleSummary {
    half_width: usize,
    alpha: f64,
    gamma_alpha: f64,
    gamma_alpha_index: f64,
    max_center_offset: i64,
    interior_modes: usize,
    median_fit_alpha: Option<f64>,
    /// Relative change of `gamma_alpha` from the previous half-width, or "n/a".
    doubling_drift: serde_json::Value,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

type UleMap = BTreeMap<(usize, u64), UleReport>;

fn ule_stage(r: &mut Runner, spectra: &[Arc<SpectralData>], alphas: &[f64]) -> Result<(UleMap, Vec<String>)> {
    // everything is computed before any file is opened, so a failure leaves no
    // stray artifacts behind
    let mut computed = Vec::new();
    for &alpha in alphas {
        for sd in spectra {
            computed.push(ule_constants_with(r.cfg.execution, sd, alpha)?);
        }
    }
    let mut reports = UleMap::new();
    let mut w = r.csv("ule.csv")?;
    w.write_record([
        "half_width", "alpha", "index", "center", "eigenvalue", "gamma_center", "gamma_index", "fit_alpha",
    ])?;
    let mut summaries = Vec::new();
    let mut computed = computed.into_iter();
    for &alpha in alphas {
        let mut previous: Option<f64> = None;
        for _ in spectra {
            let rep = computed.next().expect("one report per box and exponent");
            for m in &rep.modes {
                w.write_record([
                    rep.half_width.to_string(),
                    fmt_label(alpha),
                    m.index.to_string(),
                    m.center.to_string(),
                    fmt_f64(m.eigenvalue),
                    fmt_f64(m.gamma_center),
                    fmt_f64(m.gamma_index),
                    m.fit_alpha.map(fmt_f64).unwrap_or_default(),
                ])?;
            }
            let doubling_drift = match previous {
                Some(p) if p == rep.gamma_alpha => serde_json::json!(0.0),
                Some(p) => serde_json::json!((rep.gamma_alpha - p).abs() / p),
                None => serde_json::json!("n/a"),
            };
            previous = Some(rep.gamma_alpha);
            r.check(
                "ule_constant_finite",
                rep.half_width,
                rep.gamma_alpha.is_finite(),
                format!("gamma_alpha = {:e} at alpha = {alpha}", rep.gamma_alpha),
            );
            summaries.push(UleSummary {
                half_width: rep.half_width,
                alpha,
                gamma_alpha: rep.gamma_alpha,
                gamma_alpha_index: rep.gamma_alpha_index,
                max_center_offset: rep.max_center_offset,
                interior_modes: rep.modes.len(),
                median_fit_alpha: median(rep.modes.iter().filter_map(|m| m.fit_alpha).collect()),
                doubling_drift,
            });
            reports.insert((rep.half_width, alpha.to_bits()), rep);
        }
    }
    w.flush()?;
    Ok((reports, vec!["ule.csv".into(), r.write_json("ule.json", &summaries)?]))
}

#[derive(Serialize)]
struct BootstrapSummary {
    half_width: usize,
    gamma: f64,
    gamma_required: f64,
    kernel_tail: f64,
    checked_pairs: usize,
    violation_count: usize,
    /// At most 20 of the largest violations.
    worst_violations: Vec<crate::localization::BootstrapViolation>,
    pass: bool,
}

/// Default `gamma`: `||a||_0 + 2 ||b||_inf + 1` over in-box offsets.
pub fn default_bootstrap_gamma(sd: &SpectralData) -> f64 {
    let op = sd.operator();
    op.kernel().norm_r(0.0, 2 * op.half_width() as u64).partial + 2.0 * op.perturbation_sup() + 1.0
}

fn bootstrap_stage(r: &mut Runner, spectra: &[Arc<SpectralData>]) -> Result<Vec<String>> {
    let configured = r.cfg.bootstrap.as_ref().and_then(|b| b.gamma);
    let mut summaries = Vec::new();
    for sd in spectra {
        let gamma = configured.unwrap_or_else(|| default_bootstrap_gamma(sd));
        let rep = bootstrap_inequality_check_with(r.cfg.execution, sd, gamma)?;
        let mut worst = rep.violations.clone();
        worst.sort_by(|a, b| (b.lhs - b.rhs).total_cmp(&(a.lhs - a.rhs)));
        worst.truncate(20);
        r.check(
            "bootstrap_inequality",
            sd.half_width(),
            rep.pass(),
            format!("{} violations over {} pairs at gamma = {gamma}", rep.violations.len(), rep.checked_pairs),
        );
        summaries.push(BootstrapSummary {
            half_width: sd.half_width(),
            gamma,
            gamma_required: rep.gamma_required,
            kernel_tail: rep.kernel_tail,
            checked_pairs: rep.checked_pairs,
            violation_count: rep.violations.len(),
            worst_violations: worst,
            pass: rep.pass(),
        });
    }
    Ok(vec![r.write_json("bootstrap.json", &summaries)?])
}

#[derive(Serialize)]
struct SourceSummary {
    source: i64,
    /// `B(k, k)`, which equals 1 for a complete orthonormal basis.
    diagonal_majorant: f64,
    envelope: Vec<crate::dynamics::EnvelopeMoment>,
    moment_sup: Vec<(f64, f64)>,
    max_norm_error: f64,
    domination_excess: Vec<f64>,
}

#[derive(Serialize)]
struct DynamicsSummary {
    half_width: usize,
    window: usize,
    time_grid: crate::dynamics::TimeGrid,
    samples: usize,
    sources: Vec<SourceSummary>,
    /// Base box for the verdicts and the box it is compared against.
    verdict_boxes: Option<(usize, usize)>,
    verdicts: Vec<MomentVerdict>,
}

fn dynamics_stage(r: &mut Runner, spectra: &[Arc<SpectralData>], ule: Option<&UleMap>) -> Result<Vec<String>> {
    let dcfg = r.cfg.dynamics_enabled().expect("enabled").clone();
    let sd = spectra.last().expect("at least one box");
    let times = dcfg.time_grid.times();
    let tol = r.cfg.tolerances.dynamics;
    let mut runs = Vec::new();
    for &k in &dcfg.sources {
        let env = envelope(sd, k, &dcfg.moments)?;
        let run = moment_series_with(r.cfg.execution, sd, k, &dcfg.moments, &times, Some(&env))?;
        runs.push((k, env, run));
    }
    let mut artifacts = Vec::new();
    let mut sources = Vec::new();
    for (k, env, run) in runs {
        for series in &run.series {
            let name = format!("moments_q{}_k{}.csv", fmt_label(series.q), k);
            let mut w = r.csv(&name)?;
            w.write_record(["t", "moment", "running_sup"])?;
            for ((t, m), s) in series.times.iter().zip(&series.values).zip(&series.running_sup) {
                w.write_record([fmt_f64(*t), fmt_f64(*m), fmt_f64(*s)])?;
            }
            w.flush()?;
            artifacts.push(name);
        }
        let excess = run.domination_excess.clone().unwrap_or_default();
        let diag = env.at(k).expect("source in box");
        r.check(
            "unitarity",
            sd.half_width(),
            run.max_norm_error <= tol,
            format!("source {k}: max | ||psi||^2 - 1 | = {:e}", run.max_norm_error),
        );
        r.check(
            "envelope_domination",
            sd.half_width(),
            excess.iter().all(|&e| e <= tol),
            format!("source {k}: max (M_q - E_q) / max(1, E_q) = {excess:?}"),
        );
        r.check(
            "envelope_diagonal",
            sd.half_width(),
            (diag - 1.0).abs() <= 1e-8,
            format!("source {k}: B(k, k) = {diag}"),
        );
        sources.push(SourceSummary {
            source: k,
            diagonal_majorant: diag,
            moment_sup: run.series.iter().map(|s| (s.q, s.sup())).collect(),
            envelope: env.moments,
            max_norm_error: run.max_norm_error,
            domination_excess: excess,
        });
    }

    // verdicts compare the two largest boxes
    let mut verdicts = Vec::new();
    let verdict_boxes = (spectra.len() >= 2).then(|| (spectra[spectra.len() - 2].half_width(), sd.half_width()));
    if let Some(ule) = ule {
        let (base, doubled) = match spectra.len() {
            1 => (sd, None),
            n => (&spectra[n - 2], Some(sd.as_ref())),
        };
        for (&(n, _), rep) in ule.iter().filter(|((n, _), _)| *n == base.half_width()) {
            for &k in dcfg.sources.iter().filter(|&&k| base.is_interior_site(k)) {
                for &q in &dcfg.moments {
                    let v = ule_implies_bounded_moments_check(base, doubled, rep, k, q)?;
                    r.check(
                        "ule_bounded_moments",
                        n,
                        v.status != VerdictStatus::Unbounded,
                        format!("alpha {} q {q} source {k}: {:?}, ratio {:?}", rep.alpha, v.status, v.doubling_ratio),
                    );
                    verdicts.push(v);
                }
            }
        }
    }

    let summary = DynamicsSummary {
        half_width: sd.half_width(),
        window: sd.window(),
        time_grid: dcfg.time_grid.clone(),
        samples: times.len(),
        sources,
        verdict_boxes,
        verdicts,
    };
    artifacts.push(r.write_json("envelope.json", &summary)?);
    Ok(artifacts)
}
