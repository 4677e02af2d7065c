//! Finite surrogate of a compact attracting set.
//!
//! For each integer birth time `m` in a range, the absorbed sample is evolved
//! to `S(m)B₀` and covered greedily by balls of radius `φ(m)`; the chosen
//! centers are the net points. The surrogate is the union of the forward
//! orbits of all net points on `[0, T_orbit]` together with long-time states
//! of the sample, which stand in for the ω-limit set.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alpha::{semidist_points, DecayTrace, TraceQuantity};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, indexed_columns, read_float_csv, write_csv};
use crate::metric::{phase_distance_unchecked, DecayLaw, Ensemble, MetricSpec, PhasePoint};
use crate::semigroup::Semigroup;

/// Smallest covering radius accepted by the net builders.
pub const RADIUS_FLOOR: f64 = 1e-10;

/// Smallest quantization step tried by [`perturbed_net`].
pub const QUANTIZATION_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetEntry {
    pub birth_time: u32,
    pub seed: PhasePoint,
    /// `S(birth_time) seed`.
    pub evolved: PhasePoint,
}

/// Forward orbit of one net point; `samples[0]` is the net point itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub entry: usize,
    pub samples: Vec<(f64, PhasePoint)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttractingSetApprox {
    pub net_entries: Vec<NetEntry>,
    pub orbits: Vec<Orbit>,
    /// Long-time states of the absorbed sample.
    pub attractor_proxy: Ensemble,
    pub law: DecayLaw,
    pub m_range: (u32, u32),
    pub orbit_horizon: f64,
    pub orbit_sample_every: f64,
}

impl AttractingSetApprox {
    pub fn orbit_samples(&self) -> impl Iterator<Item = &PhasePoint> {
        self.orbits.iter().flat_map(|o| o.samples.iter().map(|(_, p)| p))
    }

    /// Orbit samples followed by the proxy states.
    pub fn points(&self) -> Vec<PhasePoint> {
        self.orbit_samples()
            .chain(self.attractor_proxy.points())
            .cloned()
            .collect()
    }

    pub fn mode_count(&self) -> usize {
        self.attractor_proxy.mode_count()
    }

    /// Writes `net.csv`, `orbits.csv`, `proxy.csv` and `manifest.json`.
    /// `system` is echoed into the manifest verbatim.
    pub fn write_dir(&self, dir: &Path, system: &serde_json::Value) -> Result<()> {
        fs::create_dir_all(dir)?;
        let n = self.mode_count();
        let state_cols = |prefix: &str| {
            let mut cols = indexed_columns(&format!("{prefix}a"), n);
            cols.extend(indexed_columns(&format!("{prefix}b"), n));
            cols
        };

        let mut header = vec!["m".to_string()];
        header.extend(state_cols("seed_"));
        header.extend(state_cols("evolved_"));
        write_csv(
            &dir.join("net.csv"),
            &header.iter().map(String::as_str).collect::<Vec<_>>(),
            self.net_entries.iter().map(|e| {
                std::iter::once(e.birth_time.to_string())
                    .chain(e.seed.packed().into_iter().map(fmt_f64))
                    .chain(e.evolved.packed().into_iter().map(fmt_f64))
                    .collect::<Vec<_>>()
            }),
        )?;

        let mut header = vec!["entry".to_string(), "tau".to_string()];
        header.extend(state_cols(""));
        write_csv(
            &dir.join("orbits.csv"),
            &header.iter().map(String::as_str).collect::<Vec<_>>(),
            self.orbits.iter().flat_map(|o| {
                o.samples.iter().map(move |(tau, p)| {
                    [o.entry.to_string(), fmt_f64(*tau)]
                        .into_iter()
                        .chain(p.packed().into_iter().map(fmt_f64))
                        .collect::<Vec<_>>()
                })
            }),
        )?;

        let mut header = vec!["index".to_string()];
        header.extend(state_cols(""));
        write_csv(
            &dir.join("proxy.csv"),
            &header.iter().map(String::as_str).collect::<Vec<_>>(),
            self.attractor_proxy.points().iter().enumerate().map(|(i, p)| {
                std::iter::once(i.to_string())
                    .chain(p.packed().into_iter().map(fmt_f64))
                    .collect::<Vec<_>>()
            }),
        )?;

        let manifest = AttractorManifest {
            mode_count: n,
            law: self.law,
            m_range: self.m_range,
            orbit_horizon: self.orbit_horizon,
            orbit_sample_every: self.orbit_sample_every,
            net_entries: self.net_entries.len(),
            orbit_samples: self.orbit_samples().count(),
            proxy_points: self.attractor_proxy.len(),
            system: system.clone(),
        };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(())
    }

    /// Reads a directory produced by [`write_dir`](Self::write_dir); returns
    /// the set and the echoed system description.
    pub fn read_dir(dir: &Path) -> Result<(Self, serde_json::Value)> {
        let manifest_path = dir.join("manifest.json");
        let manifest: AttractorManifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
        let n = manifest.mode_count;
        let parse_err = |path: &Path, message: String| Error::Parse {
            path: path.to_path_buf(),
            message,
        };
        let state_cols = |prefix: &str| {
            let mut cols = indexed_columns(&format!("{prefix}a"), n);
            cols.extend(indexed_columns(&format!("{prefix}b"), n));
            cols
        };

        let net_path = dir.join("net.csv");
        let mut header = vec!["m".to_string()];
        header.extend(state_cols("seed_"));
        header.extend(state_cols("evolved_"));
        let net_entries = read_float_csv(&net_path, &header)?
            .into_iter()
            .map(|row| {
                Ok(NetEntry {
                    birth_time: row[0] as u32,
                    seed: PhasePoint::from_packed(&row[1..1 + 2 * n])?,
                    evolved: PhasePoint::from_packed(&row[1 + 2 * n..])?,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let orbit_path = dir.join("orbits.csv");
        let mut header = vec!["entry".to_string(), "tau".to_string()];
        header.extend(state_cols(""));
        let mut orbits: Vec<Orbit> = Vec::new();
        for row in read_float_csv(&orbit_path, &header)? {
            let entry = row[0] as usize;
            let sample = (row[1], PhasePoint::from_packed(&row[2..])?);
            match orbits.last_mut() {
                Some(o) if o.entry == entry => o.samples.push(sample),
                _ => orbits.push(Orbit {
                    entry,
                    samples: vec![sample],
                }),
            }
        }

        let proxy_path = dir.join("proxy.csv");
        let mut header = vec!["index".to_string()];
        header.extend(state_cols(""));
        let proxy = read_float_csv(&proxy_path, &header)?
            .into_iter()
            .map(|row| PhasePoint::from_packed(&row[1..]))
            .collect::<Result<Vec<_>>>()?;
        if proxy.len() != manifest.proxy_points || net_entries.len() != manifest.net_entries {
            return Err(parse_err(&manifest_path, "manifest counts disagree with CSV files".into()));
        }
        let set = AttractingSetApprox {
            net_entries,
            orbits,
            attractor_proxy: Ensemble::new("proxy", proxy)?,
            law: manifest.law,
            m_range: manifest.m_range,
            orbit_horizon: manifest.orbit_horizon,
            orbit_sample_every: manifest.orbit_sample_every,
        };
        Ok((set, manifest.system))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct AttractorManifest {
    mode_count: usize,
    law: DecayLaw,
    m_range: (u32, u32),
    orbit_horizon: f64,
    orbit_sample_every: f64,
    net_entries: usize,
    orbit_samples: usize,
    proxy_points: usize,
    system: serde_json::Value,
}

/// Greedy ball cover at a fixed radius: start from the largest-norm point,
/// then repeatedly take the point farthest from the chosen centers (lowest
/// index on ties) until every point is within `radius`.
pub fn radius_cover(points: &[PhasePoint], radius: f64, spec: &MetricSpec) -> Vec<usize> {
    if points.is_empty() {
        return Vec::new();
    }
    let origin = PhasePoint::zeros(spec.mode_count());
    let first = first_max(points.iter().map(|p| phase_distance_unchecked(p, &origin, spec)));
    let mut centers = vec![first];
    let mut nearest: Vec<f64> = points
        .iter()
        .map(|p| phase_distance_unchecked(p, &points[first], spec))
        .collect();
    loop {
        let far = first_max(nearest.iter().copied());
        if nearest[far] <= radius {
            return centers;
        }
        centers.push(far);
        for (i, p) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(phase_distance_unchecked(p, &points[far], spec));
        }
    }
}

fn first_max(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

fn covering_radius(law: &DecayLaw, m: u32) -> Result<f64> {
    let radius = law.eval(f64::from(m))?;
    if radius < RADIUS_FLOOR {
        return Err(Error::DegenerateRadius {
            radius,
            floor: RADIUS_FLOOR,
        });
    }
    Ok(radius)
}

fn check_compatible<S: Semigroup + ?Sized>(sg: &S, e: &Ensemble) -> Result<()> {
    if sg.metric().mode_count() != e.mode_count() {
        return Err(Error::DimensionMismatch {
            expected: sg.metric().mode_count(),
            found: e.mode_count(),
        });
    }
    Ok(())
}

fn net_from_evolved(
    absorbed: &Ensemble,
    evolved: &Ensemble,
    m: u32,
    radius: f64,
    spec: &MetricSpec,
) -> Vec<NetEntry> {
    radius_cover(evolved.points(), radius, spec)
        .into_iter()
        .map(|i| NetEntry {
            birth_time: m,
            seed: absorbed.points()[i].clone(),
            evolved: evolved.points()[i].clone(),
        })
        .collect()
}

/// Net of `S(m)·absorbed` at covering radius `law(m)`.
pub fn build_net<S: Semigroup + ?Sized>(
    sg: &S,
    absorbed: &Ensemble,
    m: u32,
    law: &DecayLaw,
) -> Result<Vec<NetEntry>> {
    check_compatible(sg, absorbed)?;
    let radius = covering_radius(law, m)?;
    let evolved = sg.advance_ensemble(absorbed, f64::from(m))?;
    Ok(net_from_evolved(absorbed, &evolved, m, radius, sg.metric()))
}

/// Nets for every `m` in `m_range` (inclusive), forward orbits of the net
/// points on `[0, orbit_horizon]`, and the sample evolved to
/// `2 · orbit_horizon` as the ω-limit proxy.
pub fn build_attracting_set<S: Semigroup + ?Sized>(
    sg: &S,
    absorbed: &Ensemble,
    m_range: (u32, u32),
    law: &DecayLaw,
    orbit_horizon: f64,
    orbit_sample_every: f64,
) -> Result<AttractingSetApprox> {
    check_compatible(sg, absorbed)?;
    let (m_min, m_max) = m_range;
    if m_min < 1 || m_max < m_min {
        return Err(Error::InvalidConfig(format!(
            "m_range must satisfy 1 <= m_min <= m_max, got ({m_min}, {m_max})"
        )));
    }
    if orbit_horizon < f64::from(m_max) {
        return Err(Error::InvalidConfig(format!(
            "orbit horizon {orbit_horizon} is shorter than m_max = {m_max}"
        )));
    }
    let radii = (m_min..=m_max)
        .map(|m| covering_radius(law, m))
        .collect::<Result<Vec<_>>>()?;

    let mut times: Vec<f64> = (m_min..=m_max).map(f64::from).collect();
    times.push(2.0 * orbit_horizon);
    let snapshots = sg.ensemble_snapshots(absorbed, &times)?;

    let mut net_entries = Vec::new();
    for ((m, radius), (_, evolved)) in (m_min..=m_max).zip(radii).zip(&snapshots) {
        net_entries.extend(net_from_evolved(absorbed, evolved, m, radius, sg.metric()));
    }
    let orbits = net_entries
        .par_iter()
        .enumerate()
        .map(|(entry, e)| {
            Ok(Orbit {
                entry,
                samples: sg.orbit(&e.evolved, orbit_horizon, orbit_sample_every)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let proxy = snapshots.last().expect("proxy snapshot").1.clone();

    Ok(AttractingSetApprox {
        net_entries,
        orbits,
        attractor_proxy: Ensemble::new("proxy", proxy.into_points())?,
        law: *law,
        m_range,
        orbit_horizon,
        orbit_sample_every,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedNet {
    pub entries: Vec<NetEntry>,
    /// Quantization step finally used (0 means no quantization).
    pub quantization_step: f64,
    /// Measured `max_x min_c d(S(m)x, S(m)c)` over the absorbed sample.
    pub cover_radius: f64,
    /// `(1 + ε) · law(m)`.
    pub certified_bound: f64,
}

fn quantize(p: &PhasePoint, q: f64) -> Result<PhasePoint> {
    let round = |v: &[f64]| v.iter().map(|x| (x / q).round() * q).collect::<Vec<_>>();
    PhasePoint::new(round(p.position()), round(p.velocity()))
}

/// Net whose seeds are snapped to the lattice `q·ℤ` coefficient-wise.
///
/// The step is halved until every snapped seed lands within `ε · law(m)` of
/// the original at time `m`, so the snapped net covers `S(m)·absorbed` at
/// radius `(1 + ε) · law(m)`.
pub fn perturbed_net<S: Semigroup + ?Sized>(
    sg: &S,
    absorbed: &Ensemble,
    m: u32,
    law: &DecayLaw,
    epsilon: f64,
    quantization: f64,
) -> Result<PerturbedNet> {
    check_compatible(sg, absorbed)?;
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(quantization.is_finite() && quantization >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "quantization step must be nonnegative, got {quantization}"
        )));
    }
    let spec = sg.metric();
    let radius = covering_radius(law, m)?;
    let t = f64::from(m);
    let evolved = sg.advance_ensemble(absorbed, t)?;
    let centers = radius_cover(evolved.points(), radius, spec);

    let mut q = quantization;
    let entries = loop {
        if q == 0.0 {
            break net_from_evolved(absorbed, &evolved, m, radius, spec);
        }
        if q < QUANTIZATION_FLOOR {
            return Err(Error::ContinuityBudget {
                floor: QUANTIZATION_FLOOR,
            });
        }
        let candidates = centers
            .par_iter()
            .map(|&i| {
                let seed = quantize(&absorbed.points()[i], q)?;
                let image = sg.advance(&seed, t)?;
                let drift = phase_distance_unchecked(&image, &evolved.points()[i], spec);
                Ok((NetEntry {
                    birth_time: m,
                    seed,
                    evolved: image,
                }, drift))
            })
            .collect::<Result<Vec<_>>>()?;
        if candidates.iter().all(|(_, drift)| *drift < epsilon * radius) {
            break candidates.into_iter().map(|(e, _)| e).collect();
        }
        q *= 0.5;
    };

    let cover_radius = evolved
        .points()
        .iter()
        .map(|x| {
            entries
                .iter()
                .map(|e| phase_distance_unchecked(x, &e.evolved, spec))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    Ok(PerturbedNet {
        entries,
        quantization_step: q,
        cover_radius,
        certified_bound: (1.0 + epsilon) * radius,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractionCertificate {
    pub times: Vec<f64>,
    pub measured_semidist: Vec<f64>,
    /// `law(t − t* − 1)`.
    pub bound_values: Vec<f64>,
    pub satisfied_fraction: f64,
}

impl AttractionCertificate {
    fn from_parts(times: Vec<f64>, measured: Vec<f64>, bounds: Vec<f64>) -> Self {
        let satisfied = measured.iter().zip(&bounds).filter(|(m, b)| m <= b).count();
        let satisfied_fraction = if times.is_empty() {
            0.0
        } else {
            satisfied as f64 / times.len() as f64
        };
        Self {
            times,
            measured_semidist: measured,
            bound_values: bounds,
            satisfied_fraction,
        }
    }

    /// Measured distances as a semidistance trace.
    pub fn trace(&self) -> Result<DecayTrace> {
        DecayTrace::new(
            self.times.clone(),
            self.measured_semidist.clone(),
            TraceQuantity::Semidist,
            None,
        )
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_csv(
            path,
            &["t", "measured_semidist", "bound", "satisfied"],
            self.times
                .iter()
                .zip(&self.measured_semidist)
                .zip(&self.bound_values)
                .map(|((t, m), b)| {
                    vec![fmt_f64(*t), fmt_f64(*m), fmt_f64(*b), u8::from(m <= b).to_string()]
                }),
        )
    }
}

/// Measures `dist(S(t)·fresh, A*)` on `t_grid` against `law(t − t* − 1)`.
///
/// Every `t` must lie in `[t* + 1 + m_min, orbit_horizon]`.
pub fn verify_attraction<S: Semigroup + ?Sized>(
    sg: &S,
    aset: &AttractingSetApprox,
    fresh: &Ensemble,
    t_star: f64,
    t_grid: &[f64],
) -> Result<AttractionCertificate> {
    check_compatible(sg, fresh)?;
    let lo = t_star + 1.0 + f64::from(aset.m_range.0);
    let hi = aset.orbit_horizon;
    let slack = 1e-9 * hi.max(1.0);
    for &t in t_grid {
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(Error::OutsideCoverage { t, lo, hi });
        }
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("t_grid must be strictly increasing".into()));
    }
    let targets = aset.points();
    let snapshots = sg.ensemble_snapshots(fresh, t_grid)?;
    let measured = snapshots
        .iter()
        .map(|(_, e)| semidist_points(e.points(), &targets, sg.metric()))
        .collect::<Result<Vec<_>>>()?;
    let bounds = t_grid
        .iter()
        .map(|t| aset.law.eval(t - t_star - 1.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(AttractionCertificate::from_parts(t_grid.to_vec(), measured, bounds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semigroup::{LinearModal, LinearModalConfig};

    fn line(n: usize, spacing: f64) -> Ensemble {
        Ensemble::new(
            "line",
            (0..n)
                .map(|i| PhasePoint::new(vec![0.0], vec![i as f64 * spacing]).unwrap())
                .collect(),
        )
        .unwrap()
    }

    /// Fewest radius-`r` balls centered at sample points covering sorted 1D values.
    fn interval_cover_count(values: &[f64], r: f64) -> usize {
        let mut count = 0;
        let mut i = 0;
        while i < values.len() {
            let left = values[i];
            let mut c = i;
            while c + 1 < values.len() && values[c + 1] - left <= r {
                c += 1;
            }
            let center = values[c];
            while i < values.len() && values[i] - center <= r {
                i += 1;
            }
            count += 1;
        }
        count
    }

    #[test]
    fn interval_oracle_sanity() {
        let vals: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(interval_cover_count(&vals, 1.0), 4);
        assert_eq!(interval_cover_count(&vals, 0.5), 10);
        assert_eq!(interval_cover_count(&vals, 9.0), 1);
    }

    #[test]
    fn radius_cover_on_a_line() {
        let spec = MetricSpec::dirichlet_1d(1);
        let e = line(10, 1.0);
        let centers = radius_cover(e.points(), 1.0, &spec);
        let optimal = interval_cover_count(&(0..10).map(f64::from).collect::<Vec<_>>(), 1.0);
        assert!(centers.len() >= optimal && centers.len() <= 2 * optimal);
        for p in e.points() {
            assert!(centers
                .iter()
                .any(|&c| phase_distance_unchecked(p, &e.points()[c], &spec) <= 1.0));
        }
        assert_eq!(radius_cover(e.points(), 9.0, &spec).len(), 1);
    }

    #[test]
    fn collapsed_ensemble_gives_one_entry() {
        let sg = LinearModal::new(LinearModalConfig::dirichlet_1d(1.0, 2)).unwrap();
        let x = PhasePoint::new(vec![0.3, -0.1], vec![0.2, 0.0]).unwrap();
        let e = Ensemble::new("dup", vec![x.clone(), x.clone(), x]).unwrap();
        let law = DecayLaw::exponential(1.0, 0.5).unwrap();
        assert_eq!(build_net(&sg, &e, 2, &law).unwrap().len(), 1);
    }

    #[test]
    fn degenerate_radius_is_rejected() {
        let sg = LinearModal::new(LinearModalConfig::dirichlet_1d(1.0, 1)).unwrap();
        let law = DecayLaw::exponential(1.0, 30.0).unwrap();
        let err = build_net(&sg, &line(3, 1.0), 1, &law).unwrap_err();
        assert!(matches!(err, Error::DegenerateRadius { .. }));
    }

    #[test]
    fn perturbed_net_examples() {
        let sg = LinearModal::new(LinearModalConfig::dirichlet_1d(1.0, 3)).unwrap();
        let pts = (0..8)
            .map(|i| {
                let s = i as f64;
                PhasePoint::new(vec![s.sin(), 0.3 * s.cos(), 0.1], vec![0.2 * s, -0.5, s.cos()])
                    .unwrap()
            })
            .collect();
        let e = Ensemble::new("e", pts).unwrap();
        let law = DecayLaw::exponential(1.0, 0.5).unwrap();

        let plain = build_net(&sg, &e, 2, &law).unwrap();
        let exact = perturbed_net(&sg, &e, 2, &law, 0.1, 0.0).unwrap();
        assert_eq!(exact.entries, plain);

        let coarse = perturbed_net(&sg, &e, 2, &law, 1e6, 0.5).unwrap();
        assert_eq!(coarse.quantization_step, 0.5);

        let tight = perturbed_net(&sg, &e, 2, &law, 0.1, 0.5).unwrap();
        assert!(tight.quantization_step <= 0.5);
        assert!(tight.cover_radius <= 1.1 * law.eval(2.0).unwrap());
        assert!(tight.cover_radius <= tight.certified_bound);
    }

    #[test]
    fn attracting_set_structure() {
        let sg = LinearModal::new(LinearModalConfig::dirichlet_1d(1.0, 2)).unwrap();
        let pts = (0..6)
            .map(|i| {
                let s = i as f64 + 1.0;
                PhasePoint::new(vec![s.sin(), 0.2], vec![0.1 * s, s.cos()]).unwrap()
            })
            .collect();
        let e = Ensemble::new("b0", pts).unwrap();
        let law = DecayLaw::exponential(2.0, 0.4).unwrap();
        let aset = build_attracting_set(&sg, &e, (1, 1), &law, 30.0, 0.5).unwrap();
        assert!(aset.net_entries.iter().all(|n| n.birth_time == 1));
        for (entry, orbit) in aset.net_entries.iter().zip(&aset.orbits) {
            assert_eq!(orbit.samples[0].1, entry.evolved);
            let replay = sg.advance(&entry.seed, 1.0).unwrap();
            assert!(phase_distance_unchecked(&replay, &entry.evolved, sg.metric()) < 1e-12);
        }
        let origin = PhasePoint::zeros(2);
        for p in aset.attractor_proxy.points() {
            assert!(phase_distance_unchecked(p, &origin, sg.metric()) < 1e-6);
        }
        let origin_ens = Ensemble::new("o", vec![origin]).unwrap();
        let last: Vec<PhasePoint> = aset.orbits.iter().map(|o| o.samples.last().unwrap().1.clone()).collect();
        assert!(semidist_points(&last, origin_ens.points(), sg.metric()).unwrap() < 1e-5);
        assert!(build_attracting_set(&sg, &e, (0, 1), &law, 30.0, 0.5).is_err());
        assert!(build_attracting_set(&sg, &e, (1, 5), &law, 3.0, 0.5).is_err());
    }

    #[test]
    fn verify_rejects_uncovered_times() {
        let sg = LinearModal::new(LinearModalConfig::dirichlet_1d(1.0, 1)).unwrap();
        let e = line(3, 0.5);
        let law = DecayLaw::exponential(2.0, 0.4).unwrap();
        let aset = build_attracting_set(&sg, &e, (1, 2), &law, 6.0, 0.5).unwrap();
        let err = verify_attraction(&sg, &aset, &e, 0.0, &[1.5]).unwrap_err();
        assert!(matches!(err, Error::OutsideCoverage { .. }));
        assert!(verify_attraction(&sg, &aset, &e, 0.0, &[2.0, 7.0]).is_err());
        assert!(verify_attraction(&sg, &aset, &e, 0.0, &[2.0, 6.0]).is_ok());
    }

    #[test]
    fn directory_round_trip() {
        let sg = LinearModal::new(LinearModalConfig::dirichlet_1d(1.0, 2)).unwrap();
        let e = Ensemble::new(
            "b0",
            vec![
                PhasePoint::new(vec![1.0, 0.0], vec![0.0, 0.5]).unwrap(),
                PhasePoint::new(vec![-1.0, 0.25], vec![0.1, 0.0]).unwrap(),
            ],
        )
        .unwrap();
        let law = DecayLaw::exponential(1.0, 0.5).unwrap();
        let aset = build_attracting_set(&sg, &e, (1, 2), &law, 3.0, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let system = serde_json::json!({"model": "linear_modal"});
        aset.write_dir(dir.path(), &system).unwrap();
        let (back, sys) = AttractingSetApprox::read_dir(dir.path()).unwrap();
        assert_eq!(back, aset);
        assert_eq!(sys, system);
    }
}
