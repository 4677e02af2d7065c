//! Config-driven pipelines, parameter sweeps and run manifests.
//!
//! A run is described by a TOML file:
//!
//! ```toml
//! kind = "wave_attractor"   # oracle_decay | wave_attractor | sweep_l | quasistability | criteria_suite
//! output_dir = "runs/wave"
//!
//! [system]
//! model = "wave"            # or "linear_modal" with fields l, mode_count, eigenvalues
//! k = 1.0
//! l = 2.0
//! f_coeffs = [0.0, -1.0, 0.0, 1.0]
//! h_coeffs = [5.0]
//! mode_count = 32
//! dt = 1e-2
//! [[system.kernel]]
//! weight = 0.1
//! g = [1.0]
//!
//! [ensemble]
//! count = 40
//! seed = 11
//! holdout = 20
//!
//! [absorb]
//! burn_in = 20.0
//! window = 20.0
//!
//! [grids]
//! t_end = 60.0
//! t_step = 0.5
//! m_range = [1, 3]
//! orbit_horizon = 20.0
//! ```
//!
//! Sampling: each point draws `2n` standard normals (`n` = active modes) from
//! `ChaCha8Rng::seed_from_u64`, normalizes them to a direction, scales by
//! `radius · U^(1/2n)` with `U` uniform on `[0, 1)`, and maps energy
//! coordinates to coefficients by `a_j = y_j / √λ_j`, `b_j = y_{n+j}`. The
//! sample uses `seed`, the held-out sample `seed + 1`, the absorbing probe
//! `seed + 2`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alpha::{decay_trace, semidist_points, DecayTrace, TraceQuantity};
use crate::attractor::{build_attracting_set, verify_attraction, AttractingSetApprox, AttractionCertificate};
use crate::criteria::{
    check_hausdorff_criterion, contractive_inequality_check, fit_exponential_rate, predicted_rate_bounds,
    quasistability_estimate, tail_projection_decay, QuasiStabilityParams, QuasiStabilityReport, RateBounds,
    RateFit,
};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, list_files, sha256_file, write_csv};
use crate::metric::{DecayLaw, Ensemble, MetricSpec, PhasePoint};
use crate::semigroup::{
    absorbing_radius, entering_times, LinearModal, LinearModalConfig, Semigroup, WaveSystem, WaveSystemConfig,
};

/// Minimum satisfied fraction for attraction checks.
pub const SATISFIED_THRESHOLD: f64 = 0.95;
/// Fitted rates must reach this fraction of `energy_rate`.
pub const RATE_FRACTION: f64 = 0.9;
/// Multiplicative slack on per-period alpha bounds.
pub const PERIOD_SLACK: f64 = 1.15;
/// Relative noise tolerance for sweep monotonicity.
pub const SWEEP_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    OracleDecay,
    WaveAttractor,
    SweepL,
    Quasistability,
    CriteriaSuite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearModalSpec {
    pub l: f64,
    pub mode_count: usize,
    /// Defaults to `j²`.
    #[serde(default)]
    pub eigenvalues: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum SystemConfig {
    Wave(WaveSystemConfig),
    LinearModal(LinearModalSpec),
}

impl SystemConfig {
    pub fn damping(&self) -> f64 {
        match self {
            SystemConfig::Wave(c) => c.l,
            SystemConfig::LinearModal(c) => c.l,
        }
    }

    pub fn mode_count(&self) -> usize {
        match self {
            SystemConfig::Wave(c) => c.mode_count,
            SystemConfig::LinearModal(c) => c.mode_count,
        }
    }

    pub fn with_damping(&self, l: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            SystemConfig::Wave(c) => c.l = l,
            SystemConfig::LinearModal(c) => c.l = l,
        }
        out
    }

    pub fn build(&self) -> Result<Box<dyn Semigroup>> {
        Ok(match self {
            SystemConfig::Wave(c) => Box::new(WaveSystem::new(c.clone())?),
            SystemConfig::LinearModal(c) => {
                let cfg = match &c.eigenvalues {
                    Some(ev) => {
                        if ev.len() != c.mode_count {
                            return Err(Error::DimensionMismatch {
                                expected: c.mode_count,
                                found: ev.len(),
                            });
                        }
                        LinearModalConfig {
                            damping: c.l,
                            mode_eigenvalues: ev.clone(),
                        }
                    }
                    None => LinearModalConfig::dirichlet_1d(c.l, c.mode_count),
                };
                Box::new(LinearModal::new(cfg)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub count: usize,
    pub seed: u64,
    /// Sampling radius; defaults to the absorbing radius when `[absorb]` is set.
    #[serde(default)]
    pub radius: Option<f64>,
    /// Only the first `active_modes` modes are excited; defaults to all.
    #[serde(default)]
    pub active_modes: Option<usize>,
    #[serde(default = "default_holdout")]
    pub holdout: usize,
}

fn default_holdout() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorbSpec {
    #[serde(default = "default_probe_count")]
    pub probe_count: usize,
    #[serde(default = "default_one")]
    pub probe_radius: f64,
    pub burn_in: f64,
    pub window: f64,
    #[serde(default = "default_half")]
    pub sample_every: f64,
}

fn default_probe_count() -> usize {
    8
}

fn default_one() -> f64 {
    1.0
}

fn default_half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t_end: f64,
    pub t_step: f64,
    #[serde(default = "default_m_range")]
    pub m_range: (u32, u32),
    #[serde(default)]
    pub orbit_horizon: Option<f64>,
    #[serde(default)]
    pub orbit_sample_every: Option<f64>,
    #[serde(default)]
    pub l_values: Vec<f64>,
    #[serde(default = "default_floor")]
    pub fit_floor: f64,
    #[serde(default = "default_clusters")]
    pub m_clusters: usize,
    #[serde(default = "default_clusters")]
    pub n_low_modes: usize,
    /// Quasi-stability period; defaults to `3/l`.
    #[serde(default)]
    pub period: Option<f64>,
    #[serde(default = "default_periods")]
    pub n_periods: usize,
    /// Absolute closeness threshold for quasi-stability pairs; defaults to
    /// 10% of the sample diameter.
    #[serde(default)]
    pub closeness: Option<f64>,
}

fn default_m_range() -> (u32, u32) {
    (1, 3)
}

fn default_floor() -> f64 {
    1e-10
}

fn default_clusters() -> usize {
    1
}

fn default_periods() -> usize {
    8
}

impl GridSpec {
    /// `0, t_step, …, t_end`.
    pub fn times(&self) -> Result<Vec<f64>> {
        crate::semigroup::sample_grid(self.t_end, self.t_step)
    }

    pub fn orbit_horizon(&self) -> f64 {
        self.orbit_horizon.unwrap_or(self.t_end)
    }

    pub fn orbit_sample_every(&self) -> f64 {
        self.orbit_sample_every.unwrap_or(self.t_step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub output_dir: PathBuf,
    pub system: SystemConfig,
    pub ensemble: EnsembleSpec,
    #[serde(default)]
    pub absorb: Option<AbsorbSpec>,
    pub grids: GridSpec,
    /// Replaces the fitted decay law when present.
    #[serde(default)]
    pub law: Option<DecayLaw>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?, path)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.ensemble.count == 0 {
            return bad("ensemble.count must be positive".into());
        }
        if let Some(r) = self.ensemble.radius {
            if !(r.is_finite() && r >= 0.0) {
                return bad(format!("ensemble.radius must be nonnegative, got {r}"));
            }
        }
        if let Some(a) = self.ensemble.active_modes {
            if a == 0 || a > self.system.mode_count() {
                return bad(format!("ensemble.active_modes must lie in 1..={}", self.system.mode_count()));
            }
        }
        if self.ensemble.radius.is_none() && self.absorb.is_none() {
            return bad("ensemble.radius is required without an [absorb] section".into());
        }
        let g = &self.grids;
        if !(g.t_end > 0.0 && g.t_step > 0.0 && g.t_step <= g.t_end) {
            return bad("grids need 0 < t_step <= t_end".into());
        }
        if g.m_range.0 < 1 || g.m_range.1 < g.m_range.0 {
            return bad("grids.m_range must satisfy 1 <= m_min <= m_max".into());
        }
        if g.m_clusters == 0 {
            return bad("grids.m_clusters must be positive".into());
        }
        if self.kind == ExperimentKind::SweepL && g.l_values.is_empty() {
            return bad("sweep_l needs a nonempty grids.l_values".into());
        }
        if let Some(law) = &self.law {
            DecayLaw::new(law.kind, law.amplitude, law.rate, law.shift)?;
        }
        self.system.build()?;
        Ok(())
    }
}

/// Uniform sample of the phase ball of `radius` (see the module docs).
pub fn sample_ball(
    spec: &MetricSpec,
    count: usize,
    radius: f64,
    active_modes: Option<usize>,
    seed: u64,
) -> Result<Ensemble> {
    let n = spec.mode_count();
    let active = active_modes.unwrap_or(n).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..count)
        .map(|_| {
            let y: Vec<f64> = (0..2 * active).map(|_| rng.sample(StandardNormal)).collect();
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let u: f64 = rng.random();
            let scale = if norm > 0.0 {
                radius * u.powf(1.0 / (2 * active) as f64) / norm
            } else {
                0.0
            };
            let mut a = vec![0.0; n];
            let mut b = vec![0.0; n];
            for j in 0..active {
                a[j] = y[j] * scale / spec.eigenvalues()[j].sqrt();
                b[j] = y[active + j] * scale;
            }
            PhasePoint::new(a, b)
        })
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(format!("ball(seed={seed})"), points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub status: RunStatus,
    pub error: Option<String>,
    pub config: serde_json::Value,
    pub duration_seconds: f64,
    pub headlines: BTreeMap<String, f64>,
    pub rate_fit: Option<RateFit>,
    pub rate_bounds: Option<RateBounds>,
    pub quasistability: Option<QuasiStabilityReport>,
    pub checks: Vec<Check>,
    /// Every file under the output directory except `manifest.json`.
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Mutable result of a pipeline before the manifest is written.
#[derive(Default)]
struct Outcome {
    headlines: BTreeMap<String, f64>,
    rate_fit: Option<RateFit>,
    rate_bounds: Option<RateBounds>,
    quasistability: Option<QuasiStabilityReport>,
    checks: Vec<Check>,
}

impl Outcome {
    fn headline(&mut self, key: &str, value: f64) {
        self.headlines.insert(key.to_string(), value);
    }

    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    fn bounds(&mut self, l: f64, spec: &MetricSpec) {
        if let Ok(b) = predicted_rate_bounds(l, spec) {
            self.headline("energy_rate", b.energy_rate);
            self.headline("contraction_rate", b.contraction_rate);
            self.rate_bounds = Some(b);
        }
    }
}

/// Runs the configured pipeline, writes its CSV outputs and finally
/// `manifest.json`. On error the manifest is still written, marked failed,
/// and the error is returned.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let start = Instant::now();
    fs::create_dir_all(&cfg.output_dir)?;
    let mut outcome = Outcome::default();
    let result = match cfg.kind {
        ExperimentKind::OracleDecay => oracle_decay(cfg, &cfg.output_dir, &mut outcome),
        ExperimentKind::WaveAttractor => wave_attractor(cfg, &cfg.output_dir, &mut outcome).map(|_| ()),
        ExperimentKind::SweepL => sweep_rows(cfg, &cfg.grids.l_values, &mut outcome),
        ExperimentKind::Quasistability => quasistability(cfg, &cfg.output_dir, &mut outcome),
        ExperimentKind::CriteriaSuite => criteria_suite(cfg, &cfg.output_dir, &mut outcome),
    };
    let manifest = finish(cfg, &cfg.output_dir, start, outcome, result.as_ref().err())?;
    result.map(|_| manifest)
}

/// One run per value of `l`, written to `sweep.csv` with per-row
/// subdirectories. Failed rows are recorded and the sweep continues.
pub fn sweep_parameter(base: &ExperimentConfig, values: &[f64]) -> Result<RunManifest> {
    base.validate()?;
    if values.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one value".into()));
    }
    let start = Instant::now();
    fs::create_dir_all(&base.output_dir)?;
    let mut outcome = Outcome::default();
    let result = sweep_rows(base, values, &mut outcome);
    let manifest = finish(base, &base.output_dir, start, outcome, result.as_ref().err())?;
    result.map(|_| manifest)
}

fn finish(
    cfg: &ExperimentConfig,
    dir: &Path,
    start: Instant,
    outcome: Outcome,
    error: Option<&Error>,
) -> Result<RunManifest> {
    let files = list_files(dir)?
        .into_iter()
        .filter(|p| p.as_path() != Path::new(MANIFEST_NAME))
        .map(|p| {
            Ok(FileEntry {
                sha256: sha256_file(&dir.join(&p))?,
                path: p.to_string_lossy().replace('\\', "/"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        status: if error.is_some() { RunStatus::Failed } else { RunStatus::Ok },
        error: error.map(|e| e.to_string()),
        config: serde_json::to_value(cfg)?,
        duration_seconds: start.elapsed().as_secs_f64(),
        headlines: outcome.headlines,
        rate_fit: outcome.rate_fit,
        rate_bounds: outcome.rate_bounds,
        quasistability: outcome.quasistability,
        checks: outcome.checks,
        files,
    };
    fs::write(dir.join(MANIFEST_NAME), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Absorbing radius (when configured) and the main sample `B₀`.
struct Sampled {
    radius: Option<f64>,
    b0: Ensemble,
}

fn sample_main(cfg: &ExperimentConfig, sg: &dyn Semigroup, out: &mut Outcome) -> Result<Sampled> {
    let spec = sg.metric();
    let radius = match &cfg.absorb {
        Some(a) => {
            let probe = sample_ball(spec, a.probe_count, a.probe_radius, cfg.ensemble.active_modes, cfg.ensemble.seed + 2)?;
            let report = absorbing_radius(sg, &probe, a.burn_in, a.window, a.sample_every)?;
            out.headline("absorbing_radius", report.radius);
            out.headline("probe_entering_time", report.entering_time());
            Some(report.radius)
        }
        None => None,
    };
    let r = cfg.ensemble.radius.or(radius).expect("validated");
    let b0 = sample_ball(spec, cfg.ensemble.count, r, cfg.ensemble.active_modes, cfg.ensemble.seed)?;
    Ok(Sampled { radius, b0 })
}

fn fit_law(cfg: &ExperimentConfig, trace: &DecayTrace, out: &mut Outcome) -> Result<DecayLaw> {
    match fit_exponential_rate(trace, cfg.grids.fit_floor) {
        Ok(fit) => {
            out.headline("beta_hat", fit.rate);
            out.headline("fit_amplitude", fit.amplitude);
            out.headline("r_squared", fit.r_squared);
            out.rate_fit = Some(fit);
            match cfg.law {
                Some(law) => Ok(law),
                None => fit.envelope_law(trace),
            }
        }
        Err(e) => cfg.law.ok_or(e),
    }
}

fn rate_check(out: &mut Outcome) {
    if let (Some(fit), Some(b)) = (out.rate_fit, out.rate_bounds) {
        out.check(
            "beta_hat_vs_energy_rate",
            fit.rate >= RATE_FRACTION * b.energy_rate,
            format!("beta_hat = {} vs {} * energy_rate = {}", fit.rate, RATE_FRACTION, RATE_FRACTION * b.energy_rate),
        );
    }
}

fn oracle_decay(cfg: &ExperimentConfig, dir: &Path, out: &mut Outcome) -> Result<()> {
    let sg = cfg.system.build()?;
    let spec = sg.metric();
    let sampled = sample_main(cfg, sg.as_ref(), out)?;
    let times = cfg.grids.times()?;
    let origin = [PhasePoint::zeros(spec.mode_count())];
    let values = sg
        .ensemble_snapshots(&sampled.b0, &times)?
        .iter()
        .map(|(_, e)| semidist_points(e.points(), &origin, spec))
        .collect::<Result<Vec<_>>>()?;
    let trace = DecayTrace::new(times, values, TraceQuantity::Semidist, None)?;
    trace.write_csv(&dir.join("trace.csv"))?;
    out.bounds(cfg.system.damping(), spec);
    let law = fit_law(cfg, &trace, out);
    if let Some(fit) = out.rate_fit {
        fit.write_csv(&dir.join("fit.csv"))?;
    }
    law?;
    rate_check(out);
    Ok(())
}

fn alpha_trace(cfg: &ExperimentConfig, sg: &dyn Semigroup, b0: &Ensemble) -> Result<DecayTrace> {
    let times = cfg.grids.times()?;
    let snapshots = sg.ensemble_snapshots(b0, &times)?;
    decay_trace(&snapshots, cfg.grids.m_clusters, sg.metric())
}

/// Sample, absorb, fit, build, verify, export. Returns `(β̂, satisfied_fraction)`.
fn wave_attractor(cfg: &ExperimentConfig, dir: &Path, out: &mut Outcome) -> Result<(f64, f64)> {
    let sg = cfg.system.build()?;
    let spec = sg.metric();
    let sampled = sample_main(cfg, sg.as_ref(), out)?;
    out.bounds(cfg.system.damping(), spec);

    let trace = alpha_trace(cfg, sg.as_ref(), &sampled.b0)?;
    trace.write_csv(&dir.join("alpha_trace.csv"))?;
    let law = fit_law(cfg, &trace, out);
    if let Some(fit) = out.rate_fit {
        fit.write_csv(&dir.join("fit.csv"))?;
    }
    let law = law?;
    rate_check(out);

    let g = &cfg.grids;
    let aset = build_attracting_set(sg.as_ref(), &sampled.b0, g.m_range, &law, g.orbit_horizon(), g.orbit_sample_every())?;
    aset.write_dir(&dir.join("attractor"), &serde_json::to_value(&cfg.system)?)?;
    out.headline("net_entries", aset.net_entries.len() as f64);

    let cert = verify_holdout(cfg, sg.as_ref(), &aset, sampled.radius, out)?;
    cert.write_csv(&dir.join("certificate.csv"))?;
    let beta = out.rate_fit.map_or(f64::NAN, |f| f.rate);
    Ok((beta, cert.satisfied_fraction))
}

fn verify_holdout(
    cfg: &ExperimentConfig,
    sg: &dyn Semigroup,
    aset: &AttractingSetApprox,
    radius: Option<f64>,
    out: &mut Outcome,
) -> Result<AttractionCertificate> {
    let spec = sg.metric();
    let r = cfg.ensemble.radius.or(radius).expect("validated");
    let fresh = sample_ball(spec, cfg.ensemble.holdout.max(1), r, cfg.ensemble.active_modes, cfg.ensemble.seed + 1)?;
    let t_star = match radius {
        Some(r0) => entering_times(sg, &fresh, r0, aset.orbit_horizon, cfg.grids.t_step)?
            .into_iter()
            .fold(0.0, f64::max),
        None => 0.0,
    };
    let lo = t_star + 1.0 + f64::from(aset.m_range.0);
    let grid: Vec<f64> = cfg
        .grids
        .times()?
        .into_iter()
        .filter(|t| *t >= lo && *t <= aset.orbit_horizon)
        .collect();
    if grid.is_empty() {
        return Err(Error::OutsideCoverage {
            t: aset.orbit_horizon,
            lo,
            hi: aset.orbit_horizon,
        });
    }
    let cert = verify_attraction(sg, aset, &fresh, t_star, &grid)?;
    out.headline("t_star", t_star);
    out.headline("satisfied_fraction", cert.satisfied_fraction);
    out.check(
        "satisfied_fraction",
        cert.satisfied_fraction >= SATISFIED_THRESHOLD,
        format!("{} over {} times (threshold {SATISFIED_THRESHOLD})", cert.satisfied_fraction, grid.len()),
    );
    Ok(cert)
}

/// Certificate for a stored attracting set against a fresh held-out sample
/// drawn as configured.
pub fn verify_attractor_dir(dir: &Path, cfg: &ExperimentConfig) -> Result<(AttractionCertificate, Vec<Check>)> {
    cfg.validate()?;
    let (aset, _) = AttractingSetApprox::read_dir(dir)?;
    let sg = cfg.system.build()?;
    if aset.mode_count() != sg.metric().mode_count() {
        return Err(Error::DimensionMismatch {
            expected: sg.metric().mode_count(),
            found: aset.mode_count(),
        });
    }
    let mut out = Outcome::default();
    let radius = match &cfg.absorb {
        Some(_) => sample_main(cfg, sg.as_ref(), &mut out)?.radius,
        None => None,
    };
    let cert = verify_holdout(cfg, sg.as_ref(), &aset, radius, &mut out)?;
    Ok((cert, out.checks))
}

fn quasistability(cfg: &ExperimentConfig, dir: &Path, out: &mut Outcome) -> Result<()> {
    let sg = cfg.system.build()?;
    let spec = sg.metric();
    let sampled = sample_main(cfg, sg.as_ref(), out)?;
    let l = cfg.system.damping();
    out.bounds(l, spec);
    let period = match cfg.grids.period {
        Some(p) => p,
        None if l > 0.0 => 3.0 / l,
        None => return Err(Error::InvalidConfig("grids.period is required when l = 0".into())),
    };
    let mut params = QuasiStabilityParams::new(period, cfg.grids.n_periods);
    params.low_mode_threshold = cfg.grids.n_low_modes;
    params.closeness = cfg.grids.closeness;
    params.m_clusters = cfg.grids.m_clusters;
    params.sample_every = cfg.grids.t_step.min(period);
    let report = quasistability_estimate(sg.as_ref(), &sampled.b0, &params)?;
    report.write_csv(&dir.join("quasistability.csv"))?;
    out.headline("eta_hat", report.eta_hat);
    out.headline("predicted_eta", report.predicted_eta);
    let worst = report
        .per_period_alpha_ratios
        .iter()
        .zip(&report.predicted_bounds)
        .map(|(r, b)| r / b)
        .fold(0.0, f64::max);
    out.headline("max_ratio_over_bound", worst);
    out.check(
        "per_period_alpha_ratio",
        worst <= PERIOD_SLACK,
        format!("max ratio / (2 eta^n) = {worst} (slack {PERIOD_SLACK})"),
    );
    out.quasistability = Some(report);
    Ok(())
}

fn criteria_suite(cfg: &ExperimentConfig, dir: &Path, out: &mut Outcome) -> Result<()> {
    let sg = cfg.system.build()?;
    let spec = sg.metric();
    let sampled = sample_main(cfg, sg.as_ref(), out)?;
    out.bounds(cfg.system.damping(), spec);
    let trace = alpha_trace(cfg, sg.as_ref(), &sampled.b0)?;
    trace.write_csv(&dir.join("alpha_trace.csv"))?;
    let law = fit_law(cfg, &trace, out);
    if let Some(fit) = out.rate_fit {
        fit.write_csv(&dir.join("fit.csv"))?;
    }
    let law = law?;
    rate_check(out);

    let times = cfg.grids.times()?;
    // Candidate: the sample far in the future, a proxy for the attractor.
    let candidate = sg.advance_ensemble(&sampled.b0, 2.0 * cfg.grids.t_end)?;
    let positive: Vec<f64> = times.iter().copied().filter(|t| *t > 0.0).collect();
    let hausdorff = check_hausdorff_criterion(sg.as_ref(), &candidate, &sampled.b0, &positive, &law)?;
    hausdorff.write_csv(&dir.join("hausdorff.csv"))?;
    out.headline("hausdorff_satisfied_fraction", hausdorff.satisfied_fraction);
    out.check(
        "hausdorff_criterion",
        hausdorff.satisfied_fraction >= SATISFIED_THRESHOLD,
        format!("satisfied fraction {}", hausdorff.satisfied_fraction),
    );

    let n_low = cfg.grids.n_low_modes.min(spec.mode_count().saturating_sub(1));
    let tail = tail_projection_decay(sg.as_ref(), &sampled.b0, n_low, &times)?;
    tail.write_csv(&dir.join("tail_trace.csv"))?;
    if let Ok(fit) = fit_exponential_rate(&tail, cfg.grids.fit_floor) {
        out.headline("tail_beta_hat", fit.rate);
    }

    let pts = sampled.b0.points();
    let pairs: Vec<(PhasePoint, PhasePoint)> =
        pts.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
    if !pairs.is_empty() {
        let contractive = contractive_inequality_check(sg.as_ref(), &pairs, &positive, Some(&law), cfg.grids.m_clusters)?;
        contractive.write_csv(&dir.join("contractive.csv"))?;
        let frac = contractive.conclusion_fraction();
        out.headline("contractive_conclusion_fraction", frac);
        out.check(
            "contractive_conclusion",
            frac >= SATISFIED_THRESHOLD,
            format!("alpha <= 3 phi at a fraction {frac} of times"),
        );
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub l: f64,
    pub beta_hat: Option<f64>,
    pub energy_rate: Option<f64>,
    pub contraction_rate: Option<f64>,
    pub satisfied_fraction: Option<f64>,
    pub error: Option<String>,
}

fn sweep_row(base: &ExperimentConfig, index: usize, l: f64) -> SweepRow {
    let mut cfg = base.clone();
    cfg.system = base.system.with_damping(l);
    cfg.kind = match base.kind {
        ExperimentKind::OracleDecay => ExperimentKind::OracleDecay,
        _ => ExperimentKind::WaveAttractor,
    };
    let dir = base.output_dir.join(format!("row_{index:02}"));
    let mut out = Outcome::default();
    let run = fs::create_dir_all(&dir).map_err(Error::from).and_then(|_| match cfg.kind {
        ExperimentKind::OracleDecay => oracle_decay(&cfg, &dir, &mut out).map(|_| None),
        _ => wave_attractor(&cfg, &dir, &mut out).map(|(_, s)| Some(s)),
    });
    let (satisfied_fraction, error) = match run {
        Ok(s) => (s, None),
        Err(e) => (None, Some(e.to_string())),
    };
    SweepRow {
        l,
        beta_hat: out.rate_fit.map(|f| f.rate),
        energy_rate: out.rate_bounds.map(|b| b.energy_rate),
        contraction_rate: out.rate_bounds.map(|b| b.contraction_rate),
        satisfied_fraction,
        error,
    }
}

fn sweep_rows(base: &ExperimentConfig, values: &[f64], out: &mut Outcome) -> Result<()> {
    let rows: Vec<SweepRow> = values
        .par_iter()
        .enumerate()
        .map(|(i, &l)| sweep_row(base, i, l))
        .collect();
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    write_csv(
        &base.output_dir.join("sweep.csv"),
        &["l", "beta_hat", "energy_rate", "contraction_rate", "satisfied_fraction", "error"],
        rows.iter().map(|r| {
            vec![
                fmt_f64(r.l),
                opt(r.beta_hat),
                opt(r.energy_rate),
                opt(r.contraction_rate),
                opt(r.satisfied_fraction),
                r.error.clone().unwrap_or_default(),
            ]
        }),
    )?;

    out.headline("rows", rows.len() as f64);
    out.headline("failed_rows", rows.iter().filter(|r| r.error.is_some()).count() as f64);
    let spec = base.system.build()?.metric().clone();
    let saturation = 2.0 * spec.lambda_1().sqrt();
    let rate_ok = rows.iter().all(|r| match (r.beta_hat, r.energy_rate) {
        (Some(b), Some(r58)) => b >= RATE_FRACTION * r58,
        _ => false,
    });
    out.check(
        "beta_hat_vs_energy_rate",
        rate_ok,
        format!("every row needs beta_hat >= {RATE_FRACTION} * energy_rate"),
    );
    out.check(
        "monotone_until_saturation",
        monotone_until(&rows, saturation),
        format!("beta_hat nondecreasing in l for l <= {saturation} within {SWEEP_TOLERANCE}"),
    );
    Ok(())
}

/// Nondecreasing (within the relative tolerance) over rows with
/// `l ≤ saturation`, taken in increasing `l`.
fn monotone_until(rows: &[SweepRow], saturation: f64) -> bool {
    let mut pts: Vec<(f64, Option<f64>)> = rows
        .iter()
        .filter(|r| r.l <= saturation)
        .map(|r| (r.l, r.beta_hat))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.iter().any(|p| p.1.is_none()) {
        return false;
    }
    pts.windows(2)
        .all(|w| w[1].1.unwrap() >= (1.0 - SWEEP_TOLERANCE) * w[0].1.unwrap())
}
