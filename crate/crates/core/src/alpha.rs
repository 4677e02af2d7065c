//! Empirical geometry of finite ensembles.
//!
//! The Kuratowski measure of any finite set is zero, so the decaying quantity
//! tracked here is the smallest achievable maximum cluster diameter over
//! partitions into at most `m` clusters, at a fixed `m`. The greedy
//! (farthest-point) cover is the production estimator; the exact partition
//! search is an oracle for small sets.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_csv};
use crate::metric::{phase_distance_unchecked, Ensemble, MetricSpec, PhasePoint};

/// Largest point count accepted by the exact partition search.
pub const EXACT_POINT_CAP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverMethod {
    Greedy,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    /// Number of clusters used (at most the requested budget).
    pub cluster_count: usize,
    pub max_diameter: f64,
    /// Cluster index for every point, in ensemble order.
    pub assignment: Vec<usize>,
    pub method: CoverMethod,
}

impl CoverReport {
    /// Recomputes the maximum intra-cluster distance from `assignment`.
    pub fn recompute_diameter(&self, e: &Ensemble, spec: &MetricSpec) -> f64 {
        clustered_diameter(e.points(), &self.assignment, spec)
    }
}

fn check_spec(e: &Ensemble, spec: &MetricSpec) -> Result<()> {
    if e.mode_count() != spec.mode_count() {
        return Err(Error::DimensionMismatch {
            expected: spec.mode_count(),
            found: e.mode_count(),
        });
    }
    Ok(())
}

/// Directed Hausdorff semidistance `max_{x∈a} min_{y∈b} d(x, y)`.
pub fn hausdorff_semidist(a: &Ensemble, b: &Ensemble, m: &MetricSpec) -> Result<f64> {
    semidist_points(a.points(), b.points(), m)
}

/// Slice form of [`hausdorff_semidist`] for callers holding raw point lists.
pub fn semidist_points(a: &[PhasePoint], b: &[PhasePoint], m: &MetricSpec) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    for p in a.iter().chain(b) {
        if p.mode_count() != m.mode_count() {
            return Err(Error::DimensionMismatch {
                expected: m.mode_count(),
                found: p.mode_count(),
            });
        }
    }
    // Per-point minima are independent; the final max is order-insensitive.
    let nearest: Vec<f64> = a
        .par_iter()
        .map(|x| {
            b.iter()
                .map(|y| phase_distance_unchecked(x, y, m))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(nearest.into_iter().fold(0.0, f64::max))
}

fn clustered_diameter(points: &[PhasePoint], assignment: &[usize], spec: &MetricSpec) -> f64 {
    let mut diam = 0.0f64;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            if assignment[i] == assignment[j] {
                diam = diam.max(phase_distance_unchecked(&points[i], &points[j], spec));
            }
        }
    }
    diam
}

/// Farthest-point (Gonzalez) seeding.
///
/// Starts at the point of largest norm and repeatedly adds the point farthest
/// from the chosen centers, lowest index on ties. Returns the centers and the
/// covering radius `max_x min_c d(x, c)`.
pub fn greedy_kcenter(points: &[PhasePoint], k: usize, spec: &MetricSpec) -> (Vec<usize>, f64) {
    let n = points.len();
    if n == 0 || k == 0 {
        return (Vec::new(), f64::INFINITY);
    }
    let origin = PhasePoint::zeros(spec.mode_count());
    let first = argmax(points.iter().map(|p| phase_distance_unchecked(p, &origin, spec)));
    let mut centers = vec![first];
    let mut nearest: Vec<f64> = points
        .iter()
        .map(|p| phase_distance_unchecked(p, &points[first], spec))
        .collect();
    while centers.len() < k.min(n) {
        let next = argmax(nearest.iter().copied());
        centers.push(next);
        for (i, p) in points.iter().enumerate() {
            let d = phase_distance_unchecked(p, &points[next], spec);
            if d < nearest[i] {
                nearest[i] = d;
            }
        }
    }
    let radius = nearest.into_iter().fold(0.0, f64::max);
    (centers, radius)
}

/// Index of the first maximum.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Optimal discrete k-center radius (centers drawn from the points), by
/// enumerating every center subset. Test oracle for the greedy bound.
pub fn exact_kcenter_radius(points: &[PhasePoint], k: usize, spec: &MetricSpec) -> Result<f64> {
    let n = points.len();
    if n > EXACT_POINT_CAP {
        return Err(Error::ExactCapExceeded {
            points: n,
            cap: EXACT_POINT_CAP,
        });
    }
    if n == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let k = k.min(n);
    let dist = distance_matrix(points, spec);
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let r = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|c| mask & (1 << c) != 0)
                    .map(|c| dist[i][c])
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        best = best.min(r);
    }
    Ok(best)
}

fn distance_matrix(points: &[PhasePoint], spec: &MetricSpec) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|p| points.iter().map(|q| phase_distance_unchecked(p, q, spec)).collect())
        .collect()
}

/// Covering-based noncompactness proxy at a fixed cluster budget.
pub fn alpha_proxy(
    e: &Ensemble,
    m_clusters: usize,
    spec: &MetricSpec,
    method: CoverMethod,
) -> Result<CoverReport> {
    if m_clusters == 0 {
        return Err(Error::InvalidConfig("cluster budget must be at least 1".into()));
    }
    check_spec(e, spec)?;
    match method {
        CoverMethod::Greedy => Ok(greedy_cover(e.points(), m_clusters, spec)),
        CoverMethod::Exact => exact_cover(e.points(), m_clusters, spec),
    }
}

fn greedy_cover(points: &[PhasePoint], m_clusters: usize, spec: &MetricSpec) -> CoverReport {
    let (centers, _) = greedy_kcenter(points, m_clusters, spec);
    let assignment: Vec<usize> = points
        .iter()
        .map(|p| {
            argmin(
                centers
                    .iter()
                    .map(|&c| phase_distance_unchecked(p, &points[c], spec)),
            )
        })
        .collect();
    CoverReport {
        cluster_count: centers.len(),
        max_diameter: clustered_diameter(points, &assignment, spec),
        assignment,
        method: CoverMethod::Greedy,
    }
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Branch-and-bound over restricted-growth partitions into at most
/// `m_clusters` blocks, seeded with the greedy cover as incumbent.
fn exact_cover(points: &[PhasePoint], m_clusters: usize, spec: &MetricSpec) -> Result<CoverReport> {
    let n = points.len();
    if n > EXACT_POINT_CAP {
        return Err(Error::ExactCapExceeded {
            points: n,
            cap: EXACT_POINT_CAP,
        });
    }
    let greedy = greedy_cover(points, m_clusters, spec);
    let mut search = PartitionSearch {
        dist: distance_matrix(points, spec),
        budget: m_clusters,
        best: greedy.max_diameter,
        best_assignment: greedy.assignment,
        current: vec![0; n],
    };
    search.descend(0, 0, 0.0);
    let cluster_count = search.best_assignment.iter().max().map_or(0, |&b| b + 1);
    Ok(CoverReport {
        cluster_count,
        max_diameter: search.best,
        assignment: search.best_assignment,
        method: CoverMethod::Exact,
    })
}

struct PartitionSearch {
    dist: Vec<Vec<f64>>,
    budget: usize,
    best: f64,
    best_assignment: Vec<usize>,
    current: Vec<usize>,
}

impl PartitionSearch {
    fn descend(&mut self, i: usize, blocks: usize, diam: f64) {
        let n = self.dist.len();
        if i == n {
            if diam < self.best {
                self.best = diam;
                self.best_assignment = self.current.clone();
            }
            return;
        }
        for b in 0..blocks {
            let widened = (0..i)
                .filter(|&j| self.current[j] == b)
                .map(|j| self.dist[i][j])
                .fold(diam, f64::max);
            if widened < self.best {
                self.current[i] = b;
                self.descend(i + 1, blocks, widened);
            }
        }
        if blocks < self.budget {
            self.current[i] = blocks;
            self.descend(i + 1, blocks + 1, diam);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceQuantity {
    AlphaProxy,
    Semidist,
    TailNorm,
}

impl fmt::Display for TraceQuantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceQuantity::AlphaProxy => "alpha_proxy",
            TraceQuantity::Semidist => "semidist",
            TraceQuantity::TailNorm => "tail_norm",
        })
    }
}

impl FromStr for TraceQuantity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "alpha_proxy" => Ok(TraceQuantity::AlphaProxy),
            "semidist" => Ok(TraceQuantity::Semidist),
            "tail_norm" => Ok(TraceQuantity::TailNorm),
            other => Err(format!("unknown trace quantity `{other}`")),
        }
    }
}

/// Time series of a decaying geometric quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTrace {
    times: Vec<f64>,
    values: Vec<f64>,
    quantity: TraceQuantity,
    /// Cluster budget behind alpha-proxy values; `None` for other quantities.
    m_clusters: Option<usize>,
}

impl DecayTrace {
    pub fn new(
        times: Vec<f64>,
        values: Vec<f64>,
        quantity: TraceQuantity,
        m_clusters: Option<usize>,
    ) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidConfig(format!(
                "trace has {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("trace times must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidConfig("trace values must be finite and nonnegative".into()));
        }
        Ok(Self {
            times,
            values,
            quantity,
            m_clusters,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn quantity(&self) -> TraceQuantity {
        self.quantity
    }

    pub fn m_clusters(&self) -> Option<usize> {
        self.m_clusters
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Writes `t,value,quantity,m_clusters`; `m_clusters` is 0 when not applicable.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let m = self.m_clusters.unwrap_or(0).to_string();
        let q = self.quantity.to_string();
        write_csv(
            path,
            &["t", "value", "quantity", "m_clusters"],
            self.times.iter().zip(&self.values).map(|(t, v)| {
                vec![fmt_f64(*t), fmt_f64(*v), q.clone(), m.clone()]
            }),
        )
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            message,
        };
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "value", "quantity", "m_clusters"] {
            return Err(parse_err(format!("unexpected header {headers:?}")));
        }
        let (mut times, mut values) = (Vec::new(), Vec::new());
        let mut quantity = None;
        let mut m_clusters = None;
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let num = |i: usize| -> Result<f64> {
                record[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(format!("row {}: {e}", line + 2)))
            };
            times.push(num(0)?);
            values.push(num(1)?);
            quantity = Some(record[2].trim().parse::<TraceQuantity>().map_err(parse_err)?);
            let m: usize = record[3]
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("row {}: {e}", line + 2)))?;
            m_clusters = (m > 0).then_some(m);
        }
        let quantity = quantity.ok_or_else(|| parse_err("trace has no rows".into()))?;
        DecayTrace::new(times, values, quantity, m_clusters)
    }
}

/// Greedy alpha-proxy at a fixed budget along a sequence of snapshots.
pub fn decay_trace(
    snapshots: &[(f64, Ensemble)],
    m_clusters: usize,
    spec: &MetricSpec,
) -> Result<DecayTrace> {
    let values = snapshots
        .par_iter()
        .map(|(_, e)| alpha_proxy(e, m_clusters, spec, CoverMethod::Greedy).map(|r| r.max_diameter))
        .collect::<Result<Vec<_>>>()?;
    DecayTrace::new(
        snapshots.iter().map(|(t, _)| *t).collect(),
        values,
        TraceQuantity::AlphaProxy,
        Some(m_clusters),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn line(values: &[f64]) -> Ensemble {
        Ensemble::new(
            "line",
            values
                .iter()
                .map(|&v| PhasePoint::new(vec![0.0], vec![v]).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn semidist_examples() {
        let m = MetricSpec::dirichlet_1d(1);
        let a = line(&[0.0, 2.0, -1.0]);
        assert_eq!(hausdorff_semidist(&a, &a, &m).unwrap(), 0.0);
        let b = line(&[2.0, 0.0]);
        let origin = line(&[0.0]);
        assert_eq!(hausdorff_semidist(&b, &origin, &m).unwrap(), 2.0);
        assert_eq!(hausdorff_semidist(&origin, &b, &m).unwrap(), 0.0);
    }

    #[test]
    fn semidist_matches_double_loop() {
        let m = MetricSpec::dirichlet_1d(2);
        let mk = |s: f64| {
            PhasePoint::new(vec![s.sin(), (2.0 * s).cos()], vec![0.3 * s, -s.sqrt()]).unwrap()
        };
        let a = Ensemble::new("a", (1..=6).map(|i| mk(i as f64)).collect()).unwrap();
        let b = Ensemble::new("b", (1..=4).map(|i| mk(0.5 + 1.7 * i as f64)).collect()).unwrap();
        let mut brute = 0.0f64;
        for x in a.points() {
            let mut best = f64::INFINITY;
            for y in b.points() {
                let (xa, ya) = (x.position(), y.position());
                let (xb, yb) = (x.velocity(), y.velocity());
                let d = ((xa[0] - ya[0]).powi(2)
                    + 4.0 * (xa[1] - ya[1]).powi(2)
                    + (xb[0] - yb[0]).powi(2)
                    + (xb[1] - yb[1]).powi(2))
                .sqrt();
                best = best.min(d);
            }
            brute = brute.max(best);
        }
        assert_relative_eq!(hausdorff_semidist(&a, &b, &m).unwrap(), brute, max_relative = 1e-14);
    }

    #[test]
    fn cover_examples() {
        let m = MetricSpec::dirichlet_1d(1);
        let e = line(&[0.0, 1.0, 2.0]);
        for method in [CoverMethod::Greedy, CoverMethod::Exact] {
            assert_eq!(alpha_proxy(&e, 3, &m, method).unwrap().max_diameter, 0.0);
            assert_eq!(alpha_proxy(&e, 5, &m, method).unwrap().max_diameter, 0.0);
        }
        let exact = alpha_proxy(&e, 2, &m, CoverMethod::Exact).unwrap();
        assert_eq!(exact.max_diameter, 1.0);
        assert_eq!(exact.recompute_diameter(&e, &m), 1.0);
        let pair = line(&[0.0, 1.0]);
        assert_eq!(alpha_proxy(&pair, 1, &m, CoverMethod::Greedy).unwrap().max_diameter, 1.0);
        assert_eq!(alpha_proxy(&pair, 1, &m, CoverMethod::Exact).unwrap().max_diameter, 1.0);
    }

    #[test]
    fn exact_cap_is_enforced() {
        let m = MetricSpec::dirichlet_1d(1);
        let e = line(&(0..13).map(f64::from).collect::<Vec<_>>());
        let err = alpha_proxy(&e, 2, &m, CoverMethod::Exact).unwrap_err();
        assert!(err.to_string().contains("12"));
        assert!(alpha_proxy(&e, 0, &m, CoverMethod::Greedy).is_err());
    }

    #[test]
    fn greedy_seeds_from_largest_norm() {
        let m = MetricSpec::dirichlet_1d(1);
        let e = line(&[0.5, -3.0, 3.0, 1.0]);
        let (centers, radius) = greedy_kcenter(e.points(), 2, &m);
        // |-3| and |3| tie on norm; the lower index wins.
        assert_eq!(centers, vec![1, 2]);
        assert_eq!(radius, 2.5);
    }

    #[test]
    fn exact_three_point_oracle() {
        // Every 2-block partition of {0, 1, 2} and its max diameter:
        // {0}{1,2}=1, {1}{0,2}=2, {2}{0,1}=1, {0,1,2}=2.
        let m = MetricSpec::dirichlet_1d(1);
        let e = line(&[0.0, 1.0, 2.0]);
        let r = alpha_proxy(&e, 2, &m, CoverMethod::Exact).unwrap();
        assert_eq!(r.max_diameter, 1.0);
        assert_eq!(r.cluster_count, 2);
    }

    #[test]
    fn trace_examples() {
        let m = MetricSpec::dirichlet_1d(1);
        let base = line(&[0.0, 1.0, 3.0, 3.5, 7.0]);
        let same: Vec<(f64, Ensemble)> = (0..4).map(|i| (i as f64, base.clone())).collect();
        let tr = decay_trace(&same, 2, &m).unwrap();
        assert!(tr.values().iter().all(|v| *v == tr.values()[0]));

        let shrinking: Vec<(f64, Ensemble)> =
            (0..5).map(|i| (i as f64, base.scaled((-(i as f64)).exp()))).collect();
        let tr = decay_trace(&shrinking, 2, &m).unwrap();
        for (t, v) in tr.times().iter().zip(tr.values()) {
            assert_relative_eq!(*v, tr.values()[0] * (-t).exp(), max_relative = 1e-12);
        }

        let single: Vec<(f64, Ensemble)> = (0..3).map(|i| (i as f64, line(&[4.0]))).collect();
        assert!(decay_trace(&single, 1, &m).unwrap().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn trace_rejects_unordered_times() {
        assert!(DecayTrace::new(vec![0.0, 0.0], vec![1.0, 1.0], TraceQuantity::Semidist, None).is_err());
        assert!(DecayTrace::new(vec![0.0], vec![1.0, 2.0], TraceQuantity::Semidist, None).is_err());
    }

    #[test]
    fn trace_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let tr = DecayTrace::new(vec![0.0, 0.5, 1.25], vec![1.0, 0.1, 1e-9], TraceQuantity::AlphaProxy, Some(3))
            .unwrap();
        tr.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,value,quantity,m_clusters\n"));
        assert_eq!(DecayTrace::read_csv(&path).unwrap(), tr);
    }
}
