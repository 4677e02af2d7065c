//! Decay criteria as measurements.
//!
//! Each criterion evolves an empirical absorbing sample and compares a
//! measured geometric quantity with a decay law: Hausdorff attraction to a
//! fixed candidate set, sup-norm of the high-mode tail, pairwise contraction
//! up to a contractive residual, and per-period quasi-stable contraction.
//! Rate fitting and the closed-form rate predictions for the damped wave
//! equation live here too.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alpha::{alpha_proxy, semidist_points, CoverMethod, DecayTrace, TraceQuantity};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_csv};
use crate::metric::{phase_distance_unchecked, DecayLaw, Ensemble, MetricSpec, PhasePoint};
use crate::semigroup::Semigroup;

/// Least-squares fit of `ln v = ln Ĉ − β̂ t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub amplitude: f64,
    pub rate: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub floor_used: f64,
    pub samples: usize,
}

impl RateFit {
    /// `Ĉ e^(−β̂ t)`.
    pub fn law(&self) -> Result<DecayLaw> {
        DecayLaw::exponential(self.amplitude, self.rate)
    }

    /// Law with the fitted rate and the smallest amplitude that dominates
    /// every fitted sample of `trace`.
    pub fn envelope_law(&self, trace: &DecayTrace) -> Result<DecayLaw> {
        let amplitude = trace
            .times()
            .iter()
            .zip(trace.values())
            .filter(|(t, v)| **v > self.floor_used && **t >= self.window.0 && **t <= self.window.1)
            .map(|(t, v)| v * (self.rate * t).exp())
            .fold(self.amplitude, f64::max);
        DecayLaw::exponential(amplitude, self.rate)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_csv(
            path,
            &["amplitude", "rate", "r_squared", "t_lo", "t_hi", "floor", "samples"],
            [vec![
                fmt_f64(self.amplitude),
                fmt_f64(self.rate),
                fmt_f64(self.r_squared),
                fmt_f64(self.window.0),
                fmt_f64(self.window.1),
                fmt_f64(self.floor_used),
                self.samples.to_string(),
            ]],
        )
    }
}

pub fn fit_exponential_rate(trace: &DecayTrace, floor: f64) -> Result<RateFit> {
    let (ts, ys): (Vec<f64>, Vec<f64>) = trace
        .times()
        .iter()
        .zip(trace.values())
        .filter(|(_, v)| **v > floor)
        .map(|(t, v)| (*t, v.ln()))
        .unzip();
    if ts.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            found: ts.len(),
        });
    }
    let n = ts.len() as f64;
    let t_mean = ts.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (t, y) in ts.iter().zip(&ys) {
        let (dt, dy) = (t - t_mean, y - y_mean);
        sxx += dt * dt;
        sxy += dt * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;
    let rate = -slope;
    if rate.is_nan() || rate <= 0.0 {
        return Err(Error::NonDecaying { rate });
    }
    let ss_res: f64 = ts
        .iter()
        .zip(&ys)
        .map(|(t, y)| {
            let r = y - (intercept + slope * t);
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(RateFit {
        amplitude: intercept.exp(),
        rate,
        r_squared,
        window: (ts[0], ts[ts.len() - 1]),
        floor_used: floor,
        samples: ts.len(),
    })
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::InvalidConfig("t_grid must be nonempty".into()));
    }
    if t_grid[0] < 0.0 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(
            "t_grid must be nonnegative and strictly increasing".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HausdorffCriterionReport {
    pub times: Vec<f64>,
    pub semidist: Vec<f64>,
    pub bounds: Vec<f64>,
    pub satisfied_fraction: f64,
    /// `2 φ(t)`, the alpha bound implied when the semidistance bound holds.
    pub implied_alpha_bound: Vec<f64>,
    /// Max diameter of the cover that groups evolved points by nearest candidate.
    pub nearest_cover_diameter: Vec<f64>,
    /// Greedy alpha-proxy with one cluster per candidate point.
    pub greedy_alpha: Vec<f64>,
    /// Whether the nearest-candidate cover respects `2φ` wherever the
    /// semidistance bound holds.
    pub implication_consistent: bool,
}

impl HausdorffCriterionReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_csv(
            path,
            &[
                "t",
                "semidist",
                "bound",
                "satisfied",
                "implied_alpha_bound",
                "nearest_cover_diameter",
                "greedy_alpha",
            ],
            (0..self.times.len()).map(|i| {
                vec![
                    fmt_f64(self.times[i]),
                    fmt_f64(self.semidist[i]),
                    fmt_f64(self.bounds[i]),
                    u8::from(self.semidist[i] <= self.bounds[i]).to_string(),
                    fmt_f64(self.implied_alpha_bound[i]),
                    fmt_f64(self.nearest_cover_diameter[i]),
                    fmt_f64(self.greedy_alpha[i]),
                ]
            }),
        )
    }
}

/// Attraction of `S(t)·absorbed` toward a fixed `candidate` at the speed of
/// `law`, plus the `2φ` alpha consequence.
pub fn check_hausdorff_criterion<S: Semigroup + ?Sized>(
    sg: &S,
    candidate: &Ensemble,
    absorbed: &Ensemble,
    t_grid: &[f64],
    law: &DecayLaw,
) -> Result<HausdorffCriterionReport> {
    check_grid(t_grid)?;
    let spec = sg.metric();
    let snapshots = sg.ensemble_snapshots(absorbed, t_grid)?;
    let mut report = HausdorffCriterionReport {
        times: t_grid.to_vec(),
        semidist: Vec::with_capacity(t_grid.len()),
        bounds: Vec::with_capacity(t_grid.len()),
        satisfied_fraction: 0.0,
        implied_alpha_bound: Vec::with_capacity(t_grid.len()),
        nearest_cover_diameter: Vec::with_capacity(t_grid.len()),
        greedy_alpha: Vec::with_capacity(t_grid.len()),
        implication_consistent: true,
    };
    let mut satisfied = 0;
    for (t, evolved) in &snapshots {
        let d = semidist_points(evolved.points(), candidate.points(), spec)?;
        let bound = law.eval(*t)?;
        let nearest = nearest_candidate_diameter(evolved.points(), candidate.points(), spec);
        let greedy = alpha_proxy(evolved, candidate.len(), spec, CoverMethod::Greedy)?.max_diameter;
        if d <= bound {
            satisfied += 1;
            if nearest > 2.0 * bound * (1.0 + 1e-12) {
                report.implication_consistent = false;
            }
        }
        report.semidist.push(d);
        report.bounds.push(bound);
        report.implied_alpha_bound.push(2.0 * bound);
        report.nearest_cover_diameter.push(nearest);
        report.greedy_alpha.push(greedy);
    }
    report.satisfied_fraction = satisfied as f64 / t_grid.len() as f64;
    Ok(report)
}

fn nearest_candidate_diameter(points: &[PhasePoint], candidates: &[PhasePoint], spec: &MetricSpec) -> f64 {
    let label: Vec<usize> = points
        .iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (c, q) in candidates.iter().enumerate() {
                let d = phase_distance_unchecked(p, q, spec);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best.0
        })
        .collect();
    let mut diam = 0.0f64;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            if label[i] == label[j] {
                diam = diam.max(phase_distance_unchecked(&points[i], &points[j], spec));
            }
        }
    }
    diam
}

/// Norm of the part of `x` living on modes `n_low + 1 ..= N`.
pub fn tail_norm(x: &PhasePoint, n_low: usize, spec: &MetricSpec) -> f64 {
    let pos: f64 = x.position()[n_low..]
        .iter()
        .zip(&spec.eigenvalues()[n_low..])
        .map(|(a, l)| l * a * a)
        .sum();
    let vel: f64 = x.velocity()[n_low..].iter().map(|b| b * b).sum();
    (pos + vel).sqrt()
}

/// `sup_x ‖(I − P) S(t) x‖` over the ensemble, where `P` keeps the first
/// `n_low_modes` modes.
pub fn tail_projection_decay<S: Semigroup + ?Sized>(
    sg: &S,
    absorbed: &Ensemble,
    n_low_modes: usize,
    t_grid: &[f64],
) -> Result<DecayTrace> {
    check_grid(t_grid)?;
    let spec = sg.metric();
    if n_low_modes >= spec.mode_count() {
        return Err(Error::InvalidConfig(format!(
            "n_low_modes = {n_low_modes} must be below the mode count {}",
            spec.mode_count()
        )));
    }
    let values = sg
        .ensemble_snapshots(absorbed, t_grid)?
        .iter()
        .map(|(_, e)| {
            e.points()
                .iter()
                .map(|p| tail_norm(p, n_low_modes, spec))
                .fold(0.0, f64::max)
        })
        .collect();
    DecayTrace::new(t_grid.to_vec(), values, TraceQuantity::TailNorm, None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractiveReport {
    pub times: Vec<f64>,
    /// `max(0, d(S(t)y₁, S(t)y₂) − φ(t))` per time, per input pair.
    pub pair_residuals: Vec<Vec<f64>>,
    /// Repeated-liminf diagnostic of the residual matrix over the distinct
    /// points, per time.
    pub liminf_diag: Vec<f64>,
    pub alpha_values: Vec<f64>,
    /// `3 φ(t)`.
    pub alpha_bounds: Vec<f64>,
    pub conclusion_holds: Vec<bool>,
}

impl ContractiveReport {
    pub fn conclusion_fraction(&self) -> f64 {
        let ok = self.conclusion_holds.iter().filter(|b| **b).count();
        ok as f64 / self.conclusion_holds.len().max(1) as f64
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_csv(
            path,
            &["t", "max_residual", "liminf_diag", "alpha_proxy", "alpha_bound", "conclusion_holds"],
            (0..self.times.len()).map(|i| {
                let max_res = self.pair_residuals[i].iter().copied().fold(0.0, f64::max);
                vec![
                    fmt_f64(self.times[i]),
                    fmt_f64(max_res),
                    fmt_f64(self.liminf_diag[i]),
                    fmt_f64(self.alpha_values[i]),
                    fmt_f64(self.alpha_bounds[i]),
                    u8::from(self.conclusion_holds[i]).to_string(),
                ]
            }),
        )
    }
}

/// Contractive-residual diagnostics and the `α ≤ 3φ` conclusion check.
///
/// `law = None` is the degenerate zero law, for which residuals are the raw
/// distances.
pub fn contractive_inequality_check<S: Semigroup + ?Sized>(
    sg: &S,
    pairs: &[(PhasePoint, PhasePoint)],
    t_grid: &[f64],
    law: Option<&DecayLaw>,
    m_clusters: usize,
) -> Result<ContractiveReport> {
    check_grid(t_grid)?;
    if pairs.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let spec = sg.metric();
    // Distinct points in order of first appearance; pairs index into them.
    let mut points: Vec<PhasePoint> = Vec::new();
    let mut index_of = |p: &PhasePoint| match points.iter().position(|q| q == p) {
        Some(i) => i,
        None => {
            points.push(p.clone());
            points.len() - 1
        }
    };
    let pair_idx: Vec<(usize, usize)> = pairs.iter().map(|(a, b)| (index_of(a), index_of(b))).collect();
    let ensemble = Ensemble::new("pairs", points)?;
    let snapshots = sg.ensemble_snapshots(&ensemble, t_grid)?;

    let mut report = ContractiveReport {
        times: t_grid.to_vec(),
        pair_residuals: Vec::new(),
        liminf_diag: Vec::new(),
        alpha_values: Vec::new(),
        alpha_bounds: Vec::new(),
        conclusion_holds: Vec::new(),
    };
    for (t, evolved) in &snapshots {
        let phi = match law {
            Some(l) => l.eval(*t)?,
            None => 0.0,
        };
        let pts = evolved.points();
        let residual = |i: usize, j: usize| (phase_distance_unchecked(&pts[i], &pts[j], spec) - phi).max(0.0);
        report
            .pair_residuals
            .push(pair_idx.iter().map(|&(i, j)| residual(i, j)).collect());
        let diag = if pts.len() >= 2 {
            let matrix: Vec<Vec<f64>> = (0..pts.len())
                .map(|i| (0..pts.len()).map(|j| residual(i, j)).collect())
                .collect();
            repeated_liminf_diag(&matrix)?
        } else {
            0.0
        };
        report.liminf_diag.push(diag);
        let alpha = alpha_proxy(evolved, m_clusters, spec, CoverMethod::Greedy)?.max_diameter;
        report.alpha_values.push(alpha);
        report.alpha_bounds.push(3.0 * phi);
        report.conclusion_holds.push(alpha <= 3.0 * phi);
    }
    Ok(report)
}

/// Finite-array surrogate of `liminf_m liminf_n a_{m,n}`.
///
/// Tail starts range over the first half of each index, so the value is the
/// minimum of the bottom-right quadrant `m ≥ ⌊rows/2⌋, n ≥ ⌊cols/2⌋`. It is 0
/// exactly when that deep tail contains a zero. Reversing the row order can
/// change it: for `[[0, 0], [1, 1]]` it is 1, reversed it is 0.
pub fn repeated_liminf_diag(a: &[Vec<f64>]) -> Result<f64> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidConfig(format!(
            "repeated liminf needs at least a 2x2 array, got {rows}x{cols}"
        )));
    }
    if a.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidConfig("repeated liminf needs a rectangular array".into()));
    }
    Ok(a[rows / 2..]
        .iter()
        .flat_map(|row| row[cols / 2..].iter().copied())
        .fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiStabilityParams {
    /// Period `T`.
    pub period: f64,
    pub n_periods: usize,
    /// Modes `1..=low_mode_threshold` enter the low-mode pseudometric.
    pub low_mode_threshold: usize,
    /// Closeness threshold on the pseudometrics; defaults to 10% of the
    /// ensemble diameter.
    pub closeness: Option<f64>,
    pub m_clusters: usize,
    /// Sampling step for the sup over `[0, T]`.
    pub sample_every: f64,
    pub quantile: f64,
}

impl QuasiStabilityParams {
    pub fn new(period: f64, n_periods: usize) -> Self {
        Self {
            period,
            n_periods,
            low_mode_threshold: 1,
            closeness: None,
            m_clusters: 1,
            sample_every: period / 32.0,
            quantile: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiStabilityReport {
    pub period: f64,
    pub eta_hat: f64,
    /// Pairs that passed the closeness conditioning.
    pub pair_count: usize,
    /// Pairs with identical members, excluded because the ratio is undefined.
    pub excluded_pairs: usize,
    pub closeness_threshold: f64,
    /// `α(S(nT)B₀)/α(B₀)` for `n = 1..=n_periods`.
    pub per_period_alpha_ratios: Vec<f64>,
    /// `1/√(1 + lT)`.
    pub predicted_eta: f64,
    /// `2 η^n` for `n = 1..=n_periods`.
    pub predicted_bounds: Vec<f64>,
}

impl QuasiStabilityReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_csv(
            path,
            &["n", "alpha_ratio", "predicted_bound"],
            self.per_period_alpha_ratios
                .iter()
                .zip(&self.predicted_bounds)
                .enumerate()
                .map(|(i, (r, b))| vec![(i + 1).to_string(), fmt_f64(*r), fmt_f64(*b)]),
        )
    }
}

fn position_l2(a: &PhasePoint, b: &PhasePoint, modes: usize) -> f64 {
    a.position()[..modes]
        .iter()
        .zip(&b.position()[..modes])
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Estimates the contraction factor `η` over one period from pairs whose
/// compact pseudometrics are small, and tracks per-period alpha ratios.
///
/// Pseudometrics: low-mode position distance at time 0, and the sup over
/// `[0, T]` of the `L²` position distance between the two trajectories.
pub fn quasistability_estimate<S: Semigroup + ?Sized>(
    sg: &S,
    absorbed: &Ensemble,
    params: &QuasiStabilityParams,
) -> Result<QuasiStabilityReport> {
    let period = params.period;
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::InvalidConfig(format!("period must be positive, got {period}")));
    }
    if absorbed.len() < 2 {
        return Err(Error::InvalidConfig("quasi-stability needs at least two points".into()));
    }
    let spec = sg.metric();
    let n = spec.mode_count();
    let low = params.low_mode_threshold.min(n);

    let orbits = absorbed
        .points()
        .par_iter()
        .map(|p| sg.orbit(p, period, params.sample_every))
        .collect::<Result<Vec<_>>>()?;

    let pts = absorbed.points();
    let mut diameter = 0.0f64;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            diameter = diameter.max(phase_distance_unchecked(&pts[i], &pts[j], spec));
        }
    }
    let threshold = params.closeness.unwrap_or(0.1 * diameter);

    let mut ratios = Vec::new();
    let mut excluded = 0;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let d0 = phase_distance_unchecked(&pts[i], &pts[j], spec);
            if d0 == 0.0 {
                excluded += 1;
                continue;
            }
            let rho_low = position_l2(&pts[i], &pts[j], low);
            let rho_sup = orbits[i]
                .iter()
                .zip(&orbits[j])
                .map(|((_, x), (_, y))| position_l2(x, y, n))
                .fold(0.0, f64::max);
            if rho_low <= threshold && rho_sup <= threshold {
                let end_i = &orbits[i].last().expect("orbit is nonempty").1;
                let end_j = &orbits[j].last().expect("orbit is nonempty").1;
                ratios.push(phase_distance_unchecked(end_i, end_j, spec) / d0);
            }
        }
    }
    if ratios.is_empty() {
        return Err(Error::NoConditionedPairs { threshold });
    }
    ratios.sort_by(f64::total_cmp);
    let eta_hat = quantile_sorted(&ratios, params.quantile);

    let predicted_eta = 1.0 / (1.0 + sg.linear_damping() * period).sqrt();
    let mut per_period_alpha_ratios = Vec::with_capacity(params.n_periods);
    if params.n_periods > 0 {
        let times: Vec<f64> = (0..=params.n_periods).map(|k| k as f64 * period).collect();
        let snapshots = sg.ensemble_snapshots(absorbed, &times)?;
        let alphas = snapshots
            .par_iter()
            .map(|(_, e)| alpha_proxy(e, params.m_clusters, spec, CoverMethod::Greedy).map(|r| r.max_diameter))
            .collect::<Result<Vec<_>>>()?;
        let base = alphas[0];
        per_period_alpha_ratios.extend(alphas[1..].iter().map(|a| if base > 0.0 { a / base } else { 0.0 }));
    }
    let predicted_bounds = (1..=params.n_periods)
        .map(|k| 2.0 * predicted_eta.powi(k as i32))
        .collect();

    Ok(QuasiStabilityReport {
        period,
        eta_hat,
        pair_count: ratios.len(),
        excluded_pairs: excluded,
        closeness_threshold: threshold,
        per_period_alpha_ratios,
        predicted_eta,
        predicted_bounds,
    })
}

/// Linear-interpolation quantile of an ascending slice.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Closed-form rate predictions for the damped wave equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBounds {
    /// Decay rate of the perturbed energy, `min(√λ₁/2, l/4)`.
    pub energy_rate: f64,
    /// Rate implied by halving over every period `3/l`: `(l/3) ln 2`.
    pub contraction_rate: f64,
    /// `3/l`.
    pub period: f64,
}

pub fn predicted_rate_bounds(l: f64, spec: &MetricSpec) -> Result<RateBounds> {
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "rate predictions need positive linear damping, got l = {l}"
        )));
    }
    Ok(RateBounds {
        energy_rate: (0.5 * spec.lambda_1().sqrt()).min(0.25 * l),
        contraction_rate: l / 3.0 * std::f64::consts::LN_2,
        period: 3.0 / l,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semigroup::{LinearModal, LinearModalConfig};
    use approx::assert_relative_eq;

    fn exp_trace(c: f64, beta: f64) -> DecayTrace {
        let times: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
        let values = times.iter().map(|t| c * (-beta * t).exp()).collect();
        DecayTrace::new(times, values, TraceQuantity::Semidist, None).unwrap()
    }

    #[test]
    fn fit_exact_exponentials() {
        let f = fit_exponential_rate(&exp_trace(1.0, 0.5), 1e-12).unwrap();
        assert_relative_eq!(f.rate, 0.5, max_relative = 1e-12);
        assert_relative_eq!(f.amplitude, 1.0, max_relative = 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let f = fit_exponential_rate(&exp_trace(3.0, 2.0), 1e-12).unwrap();
        assert_relative_eq!(f.rate, 2.0, max_relative = 1e-12);
        assert_relative_eq!(f.amplitude, 3.0, max_relative = 1e-12);
        for c in [1e-3, 7.0, 2e4] {
            let f = fit_exponential_rate(&exp_trace(c, 0.3), 0.0).unwrap();
            assert!((f.r_squared - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_noisy_exponential() {
        // Deterministic ±1% multiplicative noise, 50 samples.
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.2).collect();
        let values = times
            .iter()
            .enumerate()
            .map(|(i, t)| (-0.8 * t).exp() * (1.0 + 0.01 * ((i * 7919 % 13) as f64 / 6.0 - 1.0)))
            .collect();
        let tr = DecayTrace::new(times, values, TraceQuantity::AlphaProxy, Some(1)).unwrap();
        let f = fit_exponential_rate(&tr, 0.0).unwrap();
        assert!((f.rate - 0.8).abs() <= 0.02 * 0.8);
    }

    #[test]
    fn fit_errors() {
        let tr = exp_trace(1.0, 0.5);
        assert!(matches!(fit_exponential_rate(&tr, 0.9), Err(Error::TooFewPoints { .. })));
        let flat = DecayTrace::new(vec![0.0, 1.0, 2.0, 3.0, 4.0], vec![1.0, 1.0, 2.0, 2.0, 3.0], TraceQuantity::Semidist, None)
            .unwrap();
        assert!(matches!(fit_exponential_rate(&flat, 0.0), Err(Error::NonDecaying { .. })));
    }

    #[test]
    fn envelope_dominates_trace() {
        let times: Vec<f64> = (0..20).map(f64::from).collect();
        let values = times
            .iter()
            .map(|t| (-0.5 * t).exp() * if (*t as i32) % 2 == 0 { 1.5 } else { 0.7 })
            .collect();
        let tr = DecayTrace::new(times, values, TraceQuantity::AlphaProxy, Some(1)).unwrap();
        let fit = fit_exponential_rate(&tr, 0.0).unwrap();
        let law = fit.envelope_law(&tr).unwrap();
        for (t, v) in tr.times().iter().zip(tr.values()) {
            assert!(*v <= law.eval(*t).unwrap() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn rate_bounds_examples() {
        let spec = MetricSpec::dirichlet_1d(4);
        assert_eq!(predicted_rate_bounds(2.0, &spec).unwrap().energy_rate, 0.5);
        let b = predicted_rate_bounds(3.0, &spec).unwrap();
        assert_relative_eq!(b.contraction_rate, std::f64::consts::LN_2, max_relative = 1e-15);
        assert_eq!(b.period, 1.0);
        assert_eq!(predicted_rate_bounds(1e9, &spec).unwrap().energy_rate, 0.5);
        assert!(predicted_rate_bounds(0.0, &spec).is_err());
    }

    #[test]
    fn rate_bounds_monotone_and_linear() {
        let spec = MetricSpec::dirichlet_1d(4);
        let ls: Vec<f64> = (1..=40).map(|i| i as f64 * 0.1).collect();
        let b: Vec<RateBounds> = ls.iter().map(|&l| predicted_rate_bounds(l, &spec).unwrap()).collect();
        for w in b.windows(2) {
            assert!(w[1].energy_rate >= w[0].energy_rate);
            assert!(w[1].energy_rate <= 0.5);
        }
        for (l, bound) in ls.iter().zip(&b) {
            assert_relative_eq!(bound.contraction_rate / l, std::f64::consts::LN_2 / 3.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn liminf_examples() {
        let zeros = vec![vec![0.0; 5]; 4];
        assert_eq!(repeated_liminf_diag(&zeros).unwrap(), 0.0);
        let hyper: Vec<Vec<f64>> = (1..=50)
            .map(|m| (1..=50).map(|n| 1.0 / (m + n) as f64).collect())
            .collect();
        assert_eq!(repeated_liminf_diag(&hyper).unwrap(), 0.01);
        assert_eq!(repeated_liminf_diag(&vec![vec![2.5; 3]; 3]).unwrap(), 2.5);
        assert!(repeated_liminf_diag(&[vec![1.0]]).is_err());
    }

    #[test]
    fn liminf_order_and_shift() {
        let a = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let reversed: Vec<Vec<f64>> = a.iter().rev().cloned().collect();
        assert_eq!(repeated_liminf_diag(&a).unwrap(), 1.0);
        assert_eq!(repeated_liminf_diag(&reversed).unwrap(), 0.0);
        let b: Vec<Vec<f64>> = (0..6).map(|i| (0..7).map(|j| ((i * 7 + j) as f64).sin().abs()).collect()).collect();
        let shifted: Vec<Vec<f64>> = b.iter().map(|r| r.iter().map(|v| v + 0.75).collect()).collect();
        assert_relative_eq!(
            repeated_liminf_diag(&shifted).unwrap(),
            repeated_liminf_diag(&b).unwrap() + 0.75,
            max_relative = 1e-15
        );
    }

    fn modal(l: f64, n: usize) -> LinearModal {
        LinearModal::new(LinearModalConfig::dirichlet_1d(l, n)).unwrap()
    }

    fn sample(n: usize, count: usize) -> Ensemble {
        Ensemble::new(
            "s",
            (0..count)
                .map(|i| {
                    let s = i as f64 + 1.0;
                    PhasePoint::new(
                        (0..n).map(|j| (s * (j as f64 + 1.3)).sin() / (j as f64 + 1.0)).collect(),
                        (0..n).map(|j| (s * 0.7 + j as f64).cos() * 0.5).collect(),
                    )
                    .unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn hausdorff_criterion_examples() {
        let sg = modal(1.0, 3);
        let b0 = sample(3, 6);
        let grid: Vec<f64> = (1..=10).map(f64::from).collect();
        let law = DecayLaw::exponential(10.0, 0.5).unwrap();
        let origin = Ensemble::new("o", vec![PhasePoint::zeros(3)]).unwrap();
        let rep = check_hausdorff_criterion(&sg, &origin, &b0, &grid, &law).unwrap();
        assert_eq!(rep.satisfied_fraction, 1.0);
        assert!(rep.implication_consistent);

        let tiny = DecayLaw::exponential(0.01 * 10.0, 0.5).unwrap();
        let rep = check_hausdorff_criterion(&sg, &origin, &b0, &grid, &tiny).unwrap();
        assert!(rep.satisfied_fraction < 0.2);

        // Candidate equal to the evolved sample at a single time: distance 0 there.
        let at3 = sg.advance_ensemble(&b0, 3.0).unwrap();
        let rep = check_hausdorff_criterion(&sg, &at3, &b0, &[3.0], &law).unwrap();
        assert_eq!(rep.semidist, vec![0.0]);
    }

    #[test]
    fn tail_examples() {
        let sg = modal(1.0, 4);
        let low = Ensemble::new(
            "low",
            vec![PhasePoint::new(vec![1.0, 0.5, 0.0, 0.0], vec![0.0, 0.3, 0.0, 0.0]).unwrap()],
        )
        .unwrap();
        let grid = [0.0, 1.0, 2.0, 5.0];
        let tr = tail_projection_decay(&sg, &low, 2, &grid).unwrap();
        assert!(tr.values().iter().all(|v| *v == 0.0));

        let top = Ensemble::new(
            "top",
            vec![PhasePoint::new(vec![0.1, 0.0, 0.0, 0.25], vec![0.0; 4]).unwrap()],
        )
        .unwrap();
        let tr = tail_projection_decay(&sg, &top, 3, &grid).unwrap();
        for (t, v) in tr.times().iter().zip(tr.values()) {
            let x = sg.advance(&top.points()[0], *t).unwrap();
            let expected = (16.0 * x.position()[3].powi(2) + x.velocity()[3].powi(2)).sqrt();
            assert_relative_eq!(*v, expected, max_relative = 1e-14);
        }
        assert!(tail_projection_decay(&sg, &top, 4, &grid).is_err());
    }

    #[test]
    fn contractive_examples() {
        let sg = modal(1.0, 2);
        let x = PhasePoint::new(vec![1.0, 0.0], vec![0.0, 0.5]).unwrap();
        let y = PhasePoint::new(vec![-0.5, 0.2], vec![0.3, 0.0]).unwrap();
        let grid = [1.0, 2.0, 4.0];
        let same = contractive_inequality_check(&sg, &[(x.clone(), x.clone())], &grid, None, 1).unwrap();
        assert!(same.pair_residuals.iter().all(|r| r[0] == 0.0));

        let raw = contractive_inequality_check(&sg, &[(x.clone(), y.clone())], &grid, None, 1).unwrap();
        for (t, r) in grid.iter().zip(&raw.pair_residuals) {
            let d = phase_distance_unchecked(&sg.advance(&x, *t).unwrap(), &sg.advance(&y, *t).unwrap(), sg.metric());
            assert_eq!(r[0], d);
        }

        let generous = DecayLaw::exponential(10.0, 0.5).unwrap();
        let rep = contractive_inequality_check(&sg, &[(x.clone(), y.clone()), (y, x)], &grid, Some(&generous), 1)
            .unwrap();
        assert!(rep.pair_residuals.iter().flatten().all(|r| *r == 0.0));
        assert!(rep.conclusion_holds.iter().all(|b| *b));
        assert!(rep.liminf_diag.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn quasistability_basics() {
        let sg = modal(1.0, 2);
        let x = PhasePoint::new(vec![1.0, 0.0], vec![0.0, 0.5]).unwrap();
        let dup = Ensemble::new("d", vec![x.clone(), x.clone(), x.scaled(0.9)]).unwrap();
        let mut params = QuasiStabilityParams::new(3.0, 0);
        params.closeness = Some(10.0);
        let rep = quasistability_estimate(&sg, &dup, &params).unwrap();
        assert_eq!(rep.excluded_pairs, 1);
        assert_eq!(rep.pair_count, 2);
        assert!(rep.per_period_alpha_ratios.is_empty());
        assert_relative_eq!(rep.predicted_eta, 0.5, max_relative = 1e-15);
        assert!(rep.eta_hat < 1.0);

        params.closeness = Some(1e-9);
        assert!(matches!(
            quasistability_estimate(&sg, &dup, &params),
            Err(Error::NoConditionedPairs { .. })
        ));
    }

    #[test]
    fn quasistability_contracts_per_period() {
        for l in [0.5, 1.0, 2.0] {
            let sg = modal(l, 4);
            let b0 = sample(4, 12);
            let period = 3.0 / l;
            let mut params = QuasiStabilityParams::new(period, 6);
            params.closeness = Some(f64::INFINITY);
            let rep = quasistability_estimate(&sg, &b0, &params).unwrap();
            assert!(rep.eta_hat < 1.0, "l = {l}: eta_hat {}", rep.eta_hat);
            let eta = rep.predicted_eta;
            let r = &rep.per_period_alpha_ratios;
            for n in 3..r.len() {
                assert!(r[n] <= 1.15 * eta * r[n - 1], "l = {l}, n = {n}: {r:?}");
            }
        }
    }
}
