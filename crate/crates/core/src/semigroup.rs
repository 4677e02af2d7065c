//! Solution semigroups.
//!
//! [`WaveSystem`] integrates the sine-Galerkin truncation of
//!
//! ```text
//! u_tt − Δu + k‖u_t‖^p u_t + l u_t + f(u) = ∫ K(x,y) u_t(y) dy + h(x)   on (0, π)
//! ```
//!
//! with Dirichlet boundary conditions, using fixed-step RK4. The basis is
//! `e_j(x) = sqrt(2/π) sin(jx)`, orthonormal in `L²(0, π)`, so `λ_j = j²`.
//! The nonlinearity is applied pseudo-spectrally on the interior grid
//! `x_i = iπ/(M+1)`, `i = 1..M`; with `M ≥ 2N+1` the projection of a cubic
//! `f` is exact.
//!
//! [`LinearModal`] is the closed-form oracle for `z_tt − Δz + l z_t = 0`.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, indexed_columns, write_csv};
use crate::metric::{phase_distance_unchecked, Ensemble, MetricSpec, PhasePoint};

/// Hard cap on integrator steps for a single call.
pub const MAX_STEPS: u64 = 200_000_000;

/// Lower bound for empirical absorbing radii.
pub const ABSORBING_RADIUS_FLOOR: f64 = 1e-9;

/// A solution operator `S(t)` on a finite-mode phase space.
pub trait Semigroup: Sync {
    fn metric(&self) -> &MetricSpec;

    /// Linear damping coefficient `l`.
    fn linear_damping(&self) -> f64;

    /// `S(t) x`.
    fn advance(&self, x: &PhasePoint, t: f64) -> Result<PhasePoint>;

    /// States `S(t_k) x` for nondecreasing `times`, advanced incrementally.
    fn states_at(&self, x: &PhasePoint, times: &[f64]) -> Result<Vec<PhasePoint>> {
        let mut out = Vec::with_capacity(times.len());
        let mut current = x.clone();
        let mut now = 0.0;
        for &t in times {
            if t < now {
                return Err(Error::InvalidConfig(format!(
                    "sample times must be nondecreasing and nonnegative (got {t} after {now})"
                )));
            }
            if t > now {
                current = self.advance(&current, t - now)?;
                now = t;
            }
            out.push(current.clone());
        }
        Ok(out)
    }

    /// Forward orbit sampled at `0, every, 2·every, …` up to `horizon`
    /// (the horizon itself is always included).
    fn orbit(&self, x: &PhasePoint, horizon: f64, every: f64) -> Result<Vec<(f64, PhasePoint)>> {
        let times = sample_grid(horizon, every)?;
        let states = self.states_at(x, &times)?;
        Ok(times.into_iter().zip(states).collect())
    }

    /// `S(t)` applied to every point, in parallel, order preserved.
    fn advance_ensemble(&self, e: &Ensemble, t: f64) -> Result<Ensemble> {
        let points = e
            .points()
            .par_iter()
            .map(|p| self.advance(p, t))
            .collect::<Result<Vec<_>>>()?;
        Ensemble::new(e.label(), points)
    }

    /// Snapshots of the whole ensemble at each of `times`.
    fn ensemble_snapshots(&self, e: &Ensemble, times: &[f64]) -> Result<Vec<(f64, Ensemble)>> {
        let per_point = e
            .points()
            .par_iter()
            .map(|p| self.states_at(p, times))
            .collect::<Result<Vec<_>>>()?;
        times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let pts = per_point.iter().map(|states| states[k].clone()).collect();
                Ok((t, Ensemble::new(e.label(), pts)?))
            })
            .collect()
    }
}

/// `0, every, 2·every, …, horizon` with multiples computed by product, not
/// accumulation.
pub fn sample_grid(horizon: f64, every: f64) -> Result<Vec<f64>> {
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::InvalidConfig(format!("horizon must be nonnegative, got {horizon}")));
    }
    if !(every.is_finite() && every > 0.0) {
        return Err(Error::InvalidConfig(format!("sample spacing must be positive, got {every}")));
    }
    let count = (horizon / every + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=count).map(|k| k as f64 * every).collect();
    let last = *times.last().unwrap_or(&0.0);
    if horizon - last > 1e-9 * every.max(horizon) {
        times.push(horizon);
    } else if let Some(t) = times.last_mut() {
        *t = t.min(horizon);
    }
    Ok(times)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelTerm {
    /// Weight `κ_q`.
    pub weight: f64,
    /// Coefficient vector `g_q`; shorter vectors are zero-padded.
    pub g: Vec<f64>,
}

/// Coefficients of the damped wave problem on `(0, π)`.
///
/// `h_coeffs` and kernel vectors may be shorter than `mode_count`; missing
/// entries are zero. `collocation_points` defaults to `2N + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSystemConfig {
    #[serde(default)]
    pub k: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub l: f64,
    /// Polynomial coefficients of `f`, lowest degree first.
    #[serde(default)]
    pub f_coeffs: Vec<f64>,
    #[serde(default)]
    pub kernel: Vec<KernelTerm>,
    #[serde(default)]
    pub h_coeffs: Vec<f64>,
    pub mode_count: usize,
    pub dt: f64,
    #[serde(default)]
    pub collocation_points: Option<usize>,
}

fn default_p() -> f64 {
    2.0
}

impl WaveSystemConfig {
    /// `z_tt − Δz + l z_t = 0` on `mode_count` modes.
    pub fn linear(l: f64, mode_count: usize, dt: f64) -> Self {
        Self {
            k: 0.0,
            p: 2.0,
            l,
            f_coeffs: Vec::new(),
            kernel: Vec::new(),
            h_coeffs: Vec::new(),
            mode_count,
            dt,
            collocation_points: None,
        }
    }

    pub fn collocation(&self) -> usize {
        self.collocation_points.unwrap_or(2 * self.mode_count + 1)
    }

    /// Largest step allowed by the explicit stability guard `0.5/√λ_N`.
    pub fn max_stable_dt(&self) -> f64 {
        0.5 / self.mode_count as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let n = self.mode_count;
        if n == 0 {
            return bad("mode_count must be positive".into());
        }
        if !(self.k.is_finite() && self.k >= 0.0) {
            return bad(format!("k must be nonnegative, got {}", self.k));
        }
        if !(self.p.is_finite() && self.p > 0.0) {
            return bad(format!("p must be positive, got {}", self.p));
        }
        if !(self.l.is_finite() && self.l >= 0.0) {
            return bad(format!("l must be nonnegative, got {}", self.l));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.dt > self.max_stable_dt() * (1.0 + 1e-12) {
            return bad(format!(
                "dt = {} exceeds the stability guard 0.5/sqrt(lambda_N) = {}",
                self.dt,
                self.max_stable_dt()
            ));
        }
        if !self.f_coeffs.iter().all(|c| c.is_finite()) {
            return bad("f_coeffs must be finite".into());
        }
        let f = trimmed(&self.f_coeffs);
        if let Some(&lead) = f.last() {
            let degree = f.len() - 1;
            if degree.is_multiple_of(2) || lead <= 0.0 {
                return bad(format!(
                    "f must have odd top degree and positive leading coefficient (degree {degree}, leading {lead})"
                ));
            }
        }
        if self.h_coeffs.len() > n || !self.h_coeffs.iter().all(|c| c.is_finite()) {
            return bad(format!("h_coeffs must be finite with at most {n} entries"));
        }
        for (q, term) in self.kernel.iter().enumerate() {
            if !term.weight.is_finite() || term.g.len() > n || !term.g.iter().all(|c| c.is_finite()) {
                return bad(format!("kernel term {q} must be finite with at most {n} entries"));
            }
        }
        if self.collocation() < 2 * n + 1 {
            return bad(format!(
                "collocation_points = {} is below 2N+1 = {}",
                self.collocation(),
                2 * n + 1
            ));
        }
        Ok(())
    }
}

fn trimmed(coeffs: &[f64]) -> &[f64] {
    let end = coeffs.iter().rposition(|c| *c != 0.0).map_or(0, |i| i + 1);
    &coeffs[..end]
}

fn padded(v: &[f64], n: usize) -> Vec<f64> {
    let mut out = v.to_vec();
    out.resize(n, 0.0);
    out
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// One sampled energy reading along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub t: f64,
    /// `½(‖u_t‖² + ‖∇u‖²)`.
    pub energy: f64,
    /// `E + ∫F(u) − (h, u)`.
    pub lyapunov: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub config: WaveSystemConfig,
    pub initial: PhasePoint,
    pub samples: Vec<(f64, PhasePoint)>,
    pub energy_samples: Vec<EnergySample>,
}

impl TrajectoryRecord {
    pub fn final_state(&self) -> &PhasePoint {
        &self.samples.last().expect("trajectory has at least one sample").1
    }

    /// Writes `t,a_1..a_N,b_1..b_N,E,L`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let n = self.initial.mode_count();
        let mut header = vec!["t".to_string()];
        header.extend(indexed_columns("a", n));
        header.extend(indexed_columns("b", n));
        header.extend(["E".to_string(), "L".to_string()]);
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        write_csv(
            path,
            &header,
            self.samples.iter().zip(&self.energy_samples).map(|((t, p), e)| {
                std::iter::once(*t)
                    .chain(p.packed())
                    .chain([e.energy, e.lyapunov])
                    .map(fmt_f64)
                    .collect::<Vec<_>>()
            }),
        )
    }
}

/// Validated wave system with precomputed collocation tables.
#[derive(Debug, Clone)]
pub struct WaveSystem {
    cfg: WaveSystemConfig,
    metric: MetricSpec,
    /// `e_j(x_i)`, row-major `M × N`.
    basis: Vec<f64>,
    /// Quadrature weight `π/(M+1)`.
    weight: f64,
    f: Vec<f64>,
    /// Antiderivative of `f` with `F(0) = 0`.
    antiderivative: Vec<f64>,
    h: Vec<f64>,
    kernel: Vec<(f64, Vec<f64>)>,
}

impl WaveSystem {
    pub fn new(cfg: WaveSystemConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.mode_count;
        let m = cfg.collocation();
        let norm = (2.0 / PI).sqrt();
        let spacing = PI / (m as f64 + 1.0);
        let mut basis = Vec::with_capacity(m * n);
        for i in 1..=m {
            let x = i as f64 * spacing;
            basis.extend((1..=n).map(|j| norm * (j as f64 * x).sin()));
        }
        let f = trimmed(&cfg.f_coeffs).to_vec();
        let antiderivative = std::iter::once(0.0)
            .chain(f.iter().enumerate().map(|(d, c)| c / (d as f64 + 1.0)))
            .collect();
        let h = padded(&cfg.h_coeffs, n);
        let kernel = cfg
            .kernel
            .iter()
            .map(|t| (t.weight, padded(&t.g, n)))
            .collect();
        Ok(Self {
            metric: MetricSpec::dirichlet_1d(n),
            basis,
            weight: spacing,
            f,
            antiderivative,
            h,
            kernel,
            cfg,
        })
    }

    pub fn config(&self) -> &WaveSystemConfig {
        &self.cfg
    }

    pub fn mode_count(&self) -> usize {
        self.cfg.mode_count
    }

    fn check_state(&self, x: &PhasePoint) -> Result<()> {
        if x.mode_count() != self.mode_count() {
            return Err(Error::DimensionMismatch {
                expected: self.mode_count(),
                found: x.mode_count(),
            });
        }
        Ok(())
    }

    /// Physical values `u(x_i)` from position coefficients.
    fn synthesize(&self, a: &[f64], u: &mut [f64]) {
        let n = a.len();
        for (row, ui) in self.basis.chunks_exact(n).zip(u.iter_mut()) {
            *ui = row.iter().zip(a).map(|(e, c)| e * c).sum();
        }
    }

    /// Writes `(a′, b′)` into `out` for the packed state `y`.
    fn rhs(&self, y: &[f64], out: &mut [f64], grid: &mut [f64]) {
        let n = self.mode_count();
        let (a, b) = y.split_at(n);
        let (da, db) = out.split_at_mut(n);
        da.copy_from_slice(b);

        let bsq: f64 = b.iter().map(|v| v * v).sum();
        let damping = if self.cfg.k == 0.0 {
            self.cfg.l
        } else {
            self.cfg.k * bsq.powf(0.5 * self.cfg.p) + self.cfg.l
        };
        for (j, d) in db.iter_mut().enumerate() {
            *d = -self.metric.eigenvalues()[j] * a[j] - damping * b[j] + self.h[j];
        }

        if !self.f.is_empty() {
            self.synthesize(a, grid);
            for g in grid.iter_mut() {
                *g = horner(&self.f, *g);
            }
            for (row, fu) in self.basis.chunks_exact(n).zip(grid.iter()) {
                let w = self.weight * fu;
                for (d, e) in db.iter_mut().zip(row) {
                    *d -= w * e;
                }
            }
        }

        for (kappa, g) in &self.kernel {
            let proj: f64 = g.iter().zip(b).map(|(x, y)| x * y).sum();
            let s = kappa * proj;
            for (d, gj) in db.iter_mut().zip(g) {
                *d += s * gj;
            }
        }
    }

    /// Time derivative of `state`; `t` only labels a blow-up error.
    pub fn derivative(&self, state: &PhasePoint, t: f64) -> Result<PhasePoint> {
        self.check_state(state)?;
        let y = state.packed();
        let mut out = vec![0.0; y.len()];
        let mut grid = vec![0.0; self.cfg.collocation()];
        self.rhs(&y, &mut out, &mut grid);
        if !out.iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp { time: t });
        }
        PhasePoint::from_packed(&out)
    }

    /// `(E, L)` with `E = ½(Σ b² + Σ λ a²)` and `L = E + ∫F(u) − Σ h a`.
    pub fn lyapunov(&self, state: &PhasePoint) -> Result<(f64, f64)> {
        self.check_state(state)?;
        let e = kinetic_potential(state, &self.metric);
        let mut l = e;
        if !self.f.is_empty() {
            let mut grid = vec![0.0; self.cfg.collocation()];
            self.synthesize(state.position(), &mut grid);
            l += self.weight * grid.iter().map(|u| horner(&self.antiderivative, *u)).sum::<f64>();
        }
        l -= self.h.iter().zip(state.position()).map(|(h, a)| h * a).sum::<f64>();
        Ok((e, l))
    }

    /// Fixed-step RK4 from `initial` over `[0, horizon]`, sampling every
    /// `sample_every` (a positive multiple of `dt`). A horizon that is not a
    /// multiple of `dt` ends with one shortened step.
    pub fn evolve(
        &self,
        initial: &PhasePoint,
        horizon: f64,
        sample_every: f64,
    ) -> Result<TrajectoryRecord> {
        self.check_state(initial)?;
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::InvalidConfig(format!("horizon must be nonnegative, got {horizon}")));
        }
        let dt = self.cfg.dt;
        let stride = (sample_every / dt).round();
        if !(stride >= 1.0 && (stride * dt - sample_every).abs() <= 1e-9 * sample_every) {
            return Err(Error::InvalidConfig(format!(
                "sample_every = {sample_every} is not a positive multiple of dt = {dt}"
            )));
        }
        let stride = stride as u64;

        let mut samples = vec![(0.0, initial.clone())];
        let mut energy_samples = vec![self.energy_sample(0.0, initial)?];
        let final_state = self.integrate(initial, horizon, |step, t, y| {
            if step % stride == 0 {
                let p = PhasePoint::from_packed(y)?;
                energy_samples.push(self.energy_sample(t, &p)?);
                samples.push((t, p));
            }
            Ok(())
        })?;
        if samples.last().map(|(t, _)| *t) != Some(horizon) && horizon > 0.0 {
            energy_samples.push(self.energy_sample(horizon, &final_state)?);
            samples.push((horizon, final_state));
        }
        Ok(TrajectoryRecord {
            config: self.cfg.clone(),
            initial: initial.clone(),
            samples,
            energy_samples,
        })
    }

    fn energy_sample(&self, t: f64, p: &PhasePoint) -> Result<EnergySample> {
        let (energy, lyapunov) = self.lyapunov(p)?;
        Ok(EnergySample { t, energy, lyapunov })
    }

    /// Core RK4 loop. `on_step(step, t, y)` runs after every full step.
    fn integrate<F>(&self, initial: &PhasePoint, horizon: f64, mut on_step: F) -> Result<PhasePoint>
    where
        F: FnMut(u64, f64, &[f64]) -> Result<()>,
    {
        let dt = self.cfg.dt;
        let ratio = horizon / dt;
        let mut full = ratio.round();
        if (full - ratio).abs() > 1e-9 * ratio.max(1.0) {
            full = ratio.floor();
        }
        let partial = horizon - full * dt;
        let full_steps = full as u64;
        if full_steps > MAX_STEPS {
            return Err(Error::StepLimit {
                horizon,
                steps: full_steps,
                limit: MAX_STEPS,
            });
        }

        let dim = 2 * self.mode_count();
        let mut y = initial.packed();
        let mut ws = Rk4Workspace::new(dim, self.cfg.collocation());
        for step in 1..=full_steps {
            let t_prev = (step - 1) as f64 * dt;
            self.rk4_step(&mut y, dt, &mut ws, t_prev)?;
            on_step(step, step as f64 * dt, &y)?;
        }
        if partial > 1e-12 * dt {
            self.rk4_step(&mut y, partial, &mut ws, full * dt)?;
        }
        PhasePoint::from_packed(&y).map_err(|_| Error::BlowUp { time: horizon })
    }

    fn rk4_step(&self, y: &mut [f64], h: f64, ws: &mut Rk4Workspace, t: f64) -> Result<()> {
        let Rk4Workspace {
            k1,
            k2,
            k3,
            k4,
            tmp,
            grid,
        } = ws;
        self.rhs(y, k1, grid);
        for i in 0..y.len() {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        self.rhs(tmp, k2, grid);
        for i in 0..y.len() {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        self.rhs(tmp, k3, grid);
        for i in 0..y.len() {
            tmp[i] = y[i] + h * k3[i];
        }
        self.rhs(tmp, k4, grid);
        let mut finite = true;
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            finite &= y[i].is_finite();
        }
        if finite {
            Ok(())
        } else {
            Err(Error::BlowUp { time: t + h })
        }
    }
}

struct Rk4Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
    grid: Vec<f64>,
}

impl Rk4Workspace {
    fn new(dim: usize, grid: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
            grid: vec![0.0; grid],
        }
    }
}

impl Semigroup for WaveSystem {
    fn metric(&self) -> &MetricSpec {
        &self.metric
    }

    fn linear_damping(&self) -> f64 {
        self.cfg.l
    }

    fn advance(&self, x: &PhasePoint, t: f64) -> Result<PhasePoint> {
        self.check_state(x)?;
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidConfig(format!("advance time must be nonnegative, got {t}")));
        }
        self.integrate(x, t, |_, _, _| Ok(()))
    }

    /// Single pass over the longest time; requested times that fall on the
    /// step lattice are captured without restarting the integrator.
    fn states_at(&self, x: &PhasePoint, times: &[f64]) -> Result<Vec<PhasePoint>> {
        let dt = self.cfg.dt;
        let on_lattice = |t: f64| {
            let r = t / dt;
            (r.round() - r).abs() <= 1e-9 * r.max(1.0)
        };
        if times.windows(2).any(|w| w[1] < w[0])
            || times.iter().any(|t| !(t.is_finite() && *t >= 0.0))
            || !times.iter().all(|&t| on_lattice(t))
        {
            return self.states_at_incremental(x, times);
        }
        self.check_state(x)?;
        let steps: Vec<u64> = times.iter().map(|t| (t / dt).round() as u64).collect();
        let mut out = Vec::with_capacity(times.len());
        let mut next = 0;
        while next < steps.len() && steps[next] == 0 {
            out.push(x.clone());
            next += 1;
        }
        let horizon = steps.last().map_or(0.0, |&s| s as f64 * dt);
        self.integrate(x, horizon, |step, _, y| {
            while next < steps.len() && steps[next] == step {
                out.push(PhasePoint::from_packed(y)?);
                next += 1;
            }
            Ok(())
        })?;
        Ok(out)
    }
}

impl WaveSystem {
    fn states_at_incremental(&self, x: &PhasePoint, times: &[f64]) -> Result<Vec<PhasePoint>> {
        let mut out = Vec::with_capacity(times.len());
        let mut current = x.clone();
        let mut now = 0.0;
        for &t in times {
            if t.is_nan() || t < now {
                return Err(Error::InvalidConfig(format!(
                    "sample times must be nondecreasing and nonnegative (got {t} after {now})"
                )));
            }
            if t > now {
                current = self.advance(&current, t - now)?;
                now = t;
            }
            out.push(current.clone());
        }
        Ok(out)
    }
}

fn kinetic_potential(state: &PhasePoint, metric: &MetricSpec) -> f64 {
    let kinetic: f64 = state.velocity().iter().map(|b| b * b).sum();
    let potential: f64 = state
        .position()
        .iter()
        .zip(metric.eigenvalues())
        .map(|(a, l)| l * a * a)
        .sum();
    0.5 * (kinetic + potential)
}

/// Perturbed energy `E_δ(z) = E(z) + δ (z_t, z)`.
///
/// For `δ ≤ √λ₁/2` it satisfies `½E ≤ E_δ ≤ 3/2 E`.
pub fn perturbed_energy(state: &PhasePoint, metric: &MetricSpec, delta: f64) -> f64 {
    let cross: f64 = state
        .position()
        .iter()
        .zip(state.velocity())
        .map(|(a, b)| a * b)
        .sum();
    kinetic_potential(state, metric) + delta * cross
}

/// Free-function form of [`WaveSystem::derivative`].
pub fn wave_rhs(state: &PhasePoint, cfg: &WaveSystemConfig) -> Result<PhasePoint> {
    WaveSystem::new(cfg.clone())?.derivative(state, 0.0)
}

/// Free-function form of [`WaveSystem::evolve`].
pub fn evolve(
    initial: &PhasePoint,
    cfg: &WaveSystemConfig,
    horizon: f64,
    sample_every: f64,
) -> Result<TrajectoryRecord> {
    WaveSystem::new(cfg.clone())?.evolve(initial, horizon, sample_every)
}

/// Free-function form of [`WaveSystem::lyapunov`].
pub fn lyapunov(state: &PhasePoint, cfg: &WaveSystemConfig) -> Result<(f64, f64)> {
    WaveSystem::new(cfg.clone())?.lyapunov(state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearModalConfig {
    pub damping: f64,
    pub mode_eigenvalues: Vec<f64>,
}

impl LinearModalConfig {
    /// `λ_j = j²` on `(0, π)`.
    pub fn dirichlet_1d(damping: f64, mode_count: usize) -> Self {
        Self {
            damping,
            mode_eigenvalues: MetricSpec::dirichlet_1d(mode_count).eigenvalues().to_vec(),
        }
    }
}

/// Exact solution operator of `z″ + l z′ + λ_j z = 0`, mode by mode.
#[derive(Debug, Clone)]
pub struct LinearModal {
    cfg: LinearModalConfig,
    metric: MetricSpec,
}

impl LinearModal {
    pub fn new(cfg: LinearModalConfig) -> Result<Self> {
        if !(cfg.damping.is_finite() && cfg.damping > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "linear modal damping must be positive, got {}",
                cfg.damping
            )));
        }
        let metric = MetricSpec::new(cfg.mode_eigenvalues.clone(), 1)?;
        Ok(Self { cfg, metric })
    }

    pub fn config(&self) -> &LinearModalConfig {
        &self.cfg
    }
}

impl Semigroup for LinearModal {
    fn metric(&self) -> &MetricSpec {
        &self.metric
    }

    fn linear_damping(&self) -> f64 {
        self.cfg.damping
    }

    fn advance(&self, x: &PhasePoint, t: f64) -> Result<PhasePoint> {
        linear_modal_evolve(x, &self.cfg, t)
    }

    /// Closed form at every time, with no incremental error.
    fn states_at(&self, x: &PhasePoint, times: &[f64]) -> Result<Vec<PhasePoint>> {
        times.iter().map(|&t| linear_modal_evolve(x, &self.cfg, t)).collect()
    }
}

/// Exact evolution of the damped linear modal system by time `t ≥ 0`.
pub fn linear_modal_evolve(
    initial: &PhasePoint,
    cfg: &LinearModalConfig,
    t: f64,
) -> Result<PhasePoint> {
    if initial.mode_count() != cfg.mode_eigenvalues.len() {
        return Err(Error::DimensionMismatch {
            expected: cfg.mode_eigenvalues.len(),
            found: initial.mode_count(),
        });
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidConfig(format!("evolution time must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(initial.clone());
    }
    let (pos, vel): (Vec<f64>, Vec<f64>) = cfg
        .mode_eigenvalues
        .iter()
        .zip(initial.position().iter().zip(initial.velocity()))
        .map(|(&lambda, (&z0, &v0))| damped_mode(cfg.damping, lambda, z0, v0, t))
        .unzip();
    PhasePoint::new(pos, vel)
}

/// `(z(t), z′(t))` for `z″ + l z′ + λ z = 0`.
fn damped_mode(l: f64, lambda: f64, z0: f64, v0: f64, t: f64) -> (f64, f64) {
    let disc = l * l - 4.0 * lambda;
    if disc.abs() <= 1e-12 * (l * l + 4.0 * lambda) {
        let r = -0.5 * l;
        let c = v0 - r * z0;
        let e = (r * t).exp();
        let z = (z0 + c * t) * e;
        (z, (c + r * (z0 + c * t)) * e)
    } else if disc > 0.0 {
        let s = disc.sqrt();
        // r1 written to avoid cancellation when l² ≫ 4λ.
        let r1 = -2.0 * lambda / (l + s);
        let r2 = -0.5 * (l + s);
        let c1 = (v0 - r2 * z0) / (r1 - r2);
        let c2 = z0 - c1;
        let (e1, e2) = ((r1 * t).exp(), (r2 * t).exp());
        (c1 * e1 + c2 * e2, r1 * c1 * e1 + r2 * c2 * e2)
    } else {
        let sigma = -0.5 * l;
        let omega = 0.5 * (-disc).sqrt();
        let a = z0;
        let b = (v0 - sigma * z0) / omega;
        let e = (sigma * t).exp();
        let (s, c) = (omega * t).sin_cos();
        (
            e * (a * c + b * s),
            e * ((sigma * a + omega * b) * c + (sigma * b - omega * a) * s),
        )
    }
}

/// Empirical absorbing ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingReport {
    /// `R₀`.
    pub radius: f64,
    /// First sample time after which each probe stays within `R₀`.
    pub entry_times: Vec<f64>,
    /// Probe states at `burn_in + window`.
    pub final_states: Ensemble,
    pub horizon: f64,
}

impl AbsorbingReport {
    /// Latest entry time over the probe, the empirical `t*(B)`.
    pub fn entering_time(&self) -> f64 {
        self.entry_times.iter().copied().fold(0.0, f64::max)
    }
}

/// Evolves every probe to `burn_in + window` and sets
/// `R₀ = max(1.1 · max phase norm on [burn_in, burn_in + window], floor)`.
pub fn absorbing_radius<S: Semigroup + ?Sized>(
    sg: &S,
    probe: &Ensemble,
    burn_in: f64,
    window: f64,
    sample_every: f64,
) -> Result<AbsorbingReport> {
    if !(burn_in > 0.0 && window > 0.0) {
        return Err(Error::InvalidConfig("burn_in and window must be positive".into()));
    }
    let horizon = burn_in + window;
    let metric = sg.metric();
    let origin = PhasePoint::zeros(metric.mode_count());
    let orbits = probe
        .points()
        .par_iter()
        .map(|p| sg.orbit(p, horizon, sample_every))
        .collect::<Result<Vec<_>>>()?;

    let mid = burn_in + 0.5 * window;
    let (mut early, mut late) = (0.0f64, 0.0f64);
    let norms: Vec<Vec<(f64, f64)>> = orbits
        .iter()
        .map(|orbit| {
            orbit
                .iter()
                .map(|(t, x)| (*t, phase_distance_unchecked(x, &origin, metric)))
                .collect()
        })
        .collect();
    for series in &norms {
        for &(t, r) in series {
            if t >= burn_in && t <= mid {
                early = early.max(r);
            } else if t > mid {
                late = late.max(r);
            }
        }
    }
    if late > 1.5 * early && late > ABSORBING_RADIUS_FLOOR {
        return Err(Error::NonDissipative { early, late });
    }
    let radius = (1.1 * early.max(late)).max(ABSORBING_RADIUS_FLOOR);
    let entry_times = norms.iter().map(|series| entry_time(series, radius)).collect::<Option<Vec<_>>>();
    let entry_times = entry_times.ok_or(Error::NonDissipative { early, late })?;
    let final_states = Ensemble::new(
        format!("{}@{}", probe.label(), horizon),
        orbits.into_iter().map(|o| o.into_iter().last().expect("orbit is nonempty").1).collect(),
    )?;
    Ok(AbsorbingReport {
        radius,
        entry_times,
        final_states,
        horizon,
    })
}

/// First time after which the whole remaining series stays within `radius`.
fn entry_time(series: &[(f64, f64)], radius: f64) -> Option<f64> {
    let last_outside = series.iter().rposition(|&(_, r)| r > radius);
    match last_outside {
        None => series.first().map(|s| s.0),
        Some(i) => series.get(i + 1).map(|s| s.0),
    }
}

/// Entering times of `e` into the ball of radius `radius`, observed on
/// `[0, horizon]`.
pub fn entering_times<S: Semigroup + ?Sized>(
    sg: &S,
    e: &Ensemble,
    radius: f64,
    horizon: f64,
    sample_every: f64,
) -> Result<Vec<f64>> {
    let metric = sg.metric();
    let origin = PhasePoint::zeros(metric.mode_count());
    e.points()
        .par_iter()
        .map(|p| {
            let orbit = sg.orbit(p, horizon, sample_every)?;
            let series: Vec<(f64, f64)> = orbit
                .iter()
                .map(|(t, x)| (*t, phase_distance_unchecked(x, &origin, metric)))
                .collect();
            let late = series.last().map_or(0.0, |s| s.1);
            entry_time(&series, radius).ok_or(Error::NonDissipative { early: radius, late })
        })
        .collect()
}
