//! Phase-space geometry: Galerkin states, the `H¹₀ × L²` metric, finite
//! ensembles and parametric decay laws.
//!
//! A state is stored as sine-mode coefficients `(a, b)` of position and
//! velocity in an orthonormal eigenbasis of the Dirichlet Laplacian, so every
//! norm is a weighted sum of squares.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Galerkin state `(u, u_t)` truncated to `N` eigenmodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    position: Vec<f64>,
    velocity: Vec<f64>,
}

impl PhasePoint {
    pub fn new(position: Vec<f64>, velocity: Vec<f64>) -> Result<Self> {
        if position.len() != velocity.len() {
            return Err(Error::DimensionMismatch {
                expected: position.len(),
                found: velocity.len(),
            });
        }
        if position.is_empty() {
            return Err(Error::InvalidConfig("phase point needs at least one mode".into()));
        }
        if !position.iter().chain(&velocity).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("phase point coefficients"));
        }
        Ok(Self { position, velocity })
    }

    pub fn zeros(mode_count: usize) -> Self {
        Self {
            position: vec![0.0; mode_count],
            velocity: vec![0.0; mode_count],
        }
    }

    /// Builds a point from the packed layout `[a_1..a_N, b_1..b_N]`.
    pub fn from_packed(packed: &[f64]) -> Result<Self> {
        if !packed.len().is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "packed state has odd length {}",
                packed.len()
            )));
        }
        let n = packed.len() / 2;
        Self::new(packed[..n].to_vec(), packed[n..].to_vec())
    }

    pub fn packed(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.mode_count());
        out.extend_from_slice(&self.position);
        out.extend_from_slice(&self.velocity);
        out
    }

    pub fn mode_count(&self) -> usize {
        self.position.len()
    }

    pub fn position(&self) -> &[f64] {
        &self.position
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    /// Coefficient-wise sum, used for Minkowski sums of ensembles.
    pub fn add(&self, other: &PhasePoint) -> Result<PhasePoint> {
        check_modes(self.mode_count(), other.mode_count())?;
        let zip = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p + q).collect();
        Ok(PhasePoint {
            position: zip(&self.position, &other.position),
            velocity: zip(&self.velocity, &other.velocity),
        })
    }

    pub fn scaled(&self, s: f64) -> PhasePoint {
        PhasePoint {
            position: self.position.iter().map(|v| v * s).collect(),
            velocity: self.velocity.iter().map(|v| v * s).collect(),
        }
    }

    /// Phase norm, i.e. distance to the origin.
    pub fn norm(&self, spec: &MetricSpec) -> Result<f64> {
        phase_distance(self, &PhasePoint::zeros(self.mode_count()), spec)
    }
}

fn check_modes(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Finite labeled sample standing in for a bounded set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    points: Vec<PhasePoint>,
    label: String,
}

impl Ensemble {
    pub fn new(label: impl Into<String>, points: Vec<PhasePoint>) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyEnsemble)?;
        let n = first.mode_count();
        for p in &points {
            check_modes(n, p.mode_count())?;
        }
        Ok(Self {
            points,
            label: label.into(),
        })
    }

    pub fn points(&self) -> &[PhasePoint] {
        &self.points
    }

    pub fn into_points(self) -> Vec<PhasePoint> {
        self.points
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mode_count(&self) -> usize {
        self.points[0].mode_count()
    }

    /// Union of two ensembles, preserving order (`self` first).
    pub fn union(&self, other: &Ensemble) -> Result<Ensemble> {
        let mut points = self.points.clone();
        points.extend(other.points.iter().cloned());
        Ensemble::new(format!("{}+{}", self.label, other.label), points)
    }

    /// Minkowski sum `{a + b}` in row-major order over `(self, other)`.
    pub fn minkowski_sum(&self, other: &Ensemble) -> Result<Ensemble> {
        let mut points = Vec::with_capacity(self.len() * other.len());
        for a in &self.points {
            for b in &other.points {
                points.push(a.add(b)?);
            }
        }
        Ensemble::new(format!("{}(+){}", self.label, other.label), points)
    }

    pub fn scaled(&self, s: f64) -> Ensemble {
        Ensemble {
            points: self.points.iter().map(|p| p.scaled(s)).collect(),
            label: self.label.clone(),
        }
    }
}

/// Eigenvalues of the Dirichlet Laplacian that weight the position part of
/// the phase metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    eigenvalues: Vec<f64>,
    spatial_dim: u8,
}

impl MetricSpec {
    /// Arbitrary positive weights. Ordering is not required, which lets
    /// callers relabel modes together with their eigenvalues.
    pub fn new(eigenvalues: Vec<f64>, spatial_dim: u8) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidConfig("metric needs at least one mode".into()));
        }
        if !matches!(spatial_dim, 1 | 2) {
            return Err(Error::InvalidConfig(format!(
                "spatial dimension must be 1 or 2, got {spatial_dim}"
            )));
        }
        if !eigenvalues.iter().all(|l| l.is_finite() && *l > 0.0) {
            return Err(Error::InvalidConfig("eigenvalues must be finite and positive".into()));
        }
        Ok(Self {
            eigenvalues,
            spatial_dim,
        })
    }

    /// `λ_j = j²` on the interval `(0, π)`.
    pub fn dirichlet_1d(mode_count: usize) -> Self {
        Self {
            eigenvalues: (1..=mode_count).map(|j| (j * j) as f64).collect(),
            spatial_dim: 1,
        }
    }

    /// The `mode_count` smallest eigenvalues `j² + k²` on the square `(0, π)²`,
    /// ties ordered by `(j, k)`.
    pub fn dirichlet_square(mode_count: usize) -> Self {
        let side = (1..).find(|s| s * s >= mode_count).unwrap_or(1) + 1;
        let mut pairs: Vec<(usize, usize, usize)> = (1..=side)
            .flat_map(|j| (1..=side).map(move |k| (j * j + k * k, j, k)))
            .collect();
        pairs.sort_unstable();
        Self {
            eigenvalues: pairs
                .into_iter()
                .take(mode_count)
                .map(|(s, _, _)| s as f64)
                .collect(),
            spatial_dim: 2,
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn mode_count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn spatial_dim(&self) -> u8 {
        self.spatial_dim
    }

    /// Smallest eigenvalue `λ₁`.
    pub fn lambda_1(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `H¹₀ × L²` distance: `sqrt(Σ λ_j (Δa_j)² + Σ (Δb_j)²)`.
pub fn phase_distance(a: &PhasePoint, b: &PhasePoint, m: &MetricSpec) -> Result<f64> {
    check_modes(m.mode_count(), a.mode_count())?;
    check_modes(m.mode_count(), b.mode_count())?;
    let d = phase_distance_unchecked(a, b, m);
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::NonFinite("phase distance"))
    }
}

/// Hot-path variant for callers that already validated mode counts.
pub(crate) fn phase_distance_unchecked(a: &PhasePoint, b: &PhasePoint, m: &MetricSpec) -> f64 {
    let mut acc = 0.0;
    for ((x, y), l) in a.position.iter().zip(&b.position).zip(&m.eigenvalues) {
        let d = x - y;
        acc += l * d * d;
    }
    for (x, y) in a.velocity.iter().zip(&b.velocity) {
        let d = x - y;
        acc += d * d;
    }
    acc.sqrt()
}

/// Largest phase norm in the ensemble.
pub fn ensemble_radius(e: &Ensemble, m: &MetricSpec) -> Result<f64> {
    check_modes(m.mode_count(), e.mode_count())?;
    let origin = PhasePoint::zeros(e.mode_count());
    Ok(e.points
        .iter()
        .map(|p| phase_distance_unchecked(p, &origin, m))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayKind {
    Exponential,
    Polynomial,
    LogPolynomial,
}

/// Decreasing envelope `φ` with `φ(t) → 0`.
///
/// With `τ = t − shift`:
/// exponential `C e^(−βτ)`, polynomial `C τ^(−β)` for `τ > 0`,
/// log-polynomial `C (ln τ)^(−β)` for `τ > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayLaw {
    pub kind: DecayKind,
    pub amplitude: f64,
    pub rate: f64,
    #[serde(default)]
    pub shift: f64,
}

impl DecayLaw {
    pub fn new(kind: DecayKind, amplitude: f64, rate: f64, shift: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "decay amplitude must be positive, got {amplitude}"
            )));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidConfig(format!("decay rate must be positive, got {rate}")));
        }
        if !(shift.is_finite() && shift >= 0.0) {
            return Err(Error::InvalidConfig(format!("decay shift must be nonnegative, got {shift}")));
        }
        Ok(Self {
            kind,
            amplitude,
            rate,
            shift,
        })
    }

    pub fn exponential(amplitude: f64, rate: f64) -> Result<Self> {
        Self::new(DecayKind::Exponential, amplitude, rate, 0.0)
    }

    pub fn polynomial(amplitude: f64, rate: f64) -> Result<Self> {
        Self::new(DecayKind::Polynomial, amplitude, rate, 0.0)
    }

    pub fn log_polynomial(amplitude: f64, rate: f64) -> Result<Self> {
        Self::new(DecayKind::LogPolynomial, amplitude, rate, 0.0)
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::NonFinite("decay law argument"));
        }
        let tau = t - self.shift;
        match self.kind {
            DecayKind::Exponential => Ok(self.amplitude * (-self.rate * tau).exp()),
            DecayKind::Polynomial if tau > 0.0 => Ok(self.amplitude * tau.powf(-self.rate)),
            DecayKind::Polynomial => Err(Error::OutOfDomain {
                t,
                requirement: "t - shift > 0",
            }),
            DecayKind::LogPolynomial if tau > 1.0 => {
                Ok(self.amplitude * tau.ln().powf(-self.rate))
            }
            DecayKind::LogPolynomial => Err(Error::OutOfDomain {
                t,
                requirement: "t - shift > 1",
            }),
        }
    }

    /// Earliest time at which the law has fallen to `value`.
    pub fn inverse(&self, value: f64) -> Result<f64> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "decay inverse needs a positive value, got {value}"
            )));
        }
        let ratio = self.amplitude / value;
        let tau = match self.kind {
            DecayKind::Exponential => ratio.ln() / self.rate,
            DecayKind::Polynomial => ratio.powf(1.0 / self.rate),
            DecayKind::LogPolynomial => ratio.powf(1.0 / self.rate).exp(),
        };
        Ok(tau + self.shift)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pt(pos: &[f64], vel: &[f64]) -> PhasePoint {
        PhasePoint::new(pos.to_vec(), vel.to_vec()).unwrap()
    }

    #[test]
    fn distance_examples() {
        let m1 = MetricSpec::dirichlet_1d(1);
        let a = pt(&[0.3], &[-2.0]);
        assert_eq!(phase_distance(&a, &a, &m1).unwrap(), 0.0);
        assert_eq!(phase_distance(&pt(&[1.0], &[0.0]), &pt(&[0.0], &[0.0]), &m1).unwrap(), 1.0);

        let m2 = MetricSpec::dirichlet_1d(2);
        let d = phase_distance(&pt(&[0.0, 1.0], &[0.0, 0.0]), &PhasePoint::zeros(2), &m2).unwrap();
        assert_eq!(d, 2.0);
    }

    #[test]
    fn distance_rejects_mismatch() {
        let m = MetricSpec::dirichlet_1d(2);
        let err = phase_distance(&PhasePoint::zeros(2), &PhasePoint::zeros(3), &m).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
        assert!(PhasePoint::new(vec![f64::NAN], vec![0.0]).is_err());
        assert!(PhasePoint::new(vec![0.0], vec![f64::INFINITY]).is_err());
        assert!(PhasePoint::new(vec![0.0, 1.0], vec![0.0]).is_err());
    }

    #[test]
    fn decay_examples() {
        let e = DecayLaw::exponential(1.0, 0.5).unwrap();
        assert_eq!(e.eval(0.0).unwrap(), 1.0);
        assert_relative_eq!(e.eval(2.0).unwrap(), (-1.0f64).exp(), max_relative = 1e-15);
        let p = DecayLaw::polynomial(2.0, 1.0).unwrap();
        assert_eq!(p.eval(4.0).unwrap(), 0.5);
        assert!(p.eval(0.0).is_err());
        let lp = DecayLaw::log_polynomial(1.0, 2.0).unwrap();
        assert!(matches!(lp.eval(1.0), Err(Error::OutOfDomain { .. })));
        assert_relative_eq!(lp.eval(std::f64::consts::E).unwrap(), 1.0);
    }

    #[test]
    fn decay_law_validation() {
        assert!(DecayLaw::exponential(0.0, 1.0).is_err());
        assert!(DecayLaw::exponential(1.0, -1.0).is_err());
        assert!(DecayLaw::new(DecayKind::Polynomial, 1.0, 1.0, -0.5).is_err());
    }

    #[test]
    fn shift_moves_the_domain() {
        let p = DecayLaw::new(DecayKind::Polynomial, 1.0, 1.0, 2.0).unwrap();
        assert!(p.eval(2.0).is_err());
        assert_eq!(p.eval(3.0).unwrap(), 1.0);
    }

    #[test]
    fn radius_examples() {
        let m = MetricSpec::dirichlet_1d(1);
        let single = Ensemble::new("o", vec![PhasePoint::zeros(1)]).unwrap();
        assert_eq!(ensemble_radius(&single, &m).unwrap(), 0.0);
        let two = Ensemble::new("two", vec![pt(&[1.0], &[0.0]), pt(&[0.0], &[3.0])]).unwrap();
        assert_eq!(ensemble_radius(&two, &m).unwrap(), 3.0);
    }

    #[test]
    fn radius_matches_direct_max() {
        let m = MetricSpec::dirichlet_1d(3);
        let pts: Vec<PhasePoint> = (0..5)
            .map(|i| {
                let s = i as f64;
                pt(&[s * 0.1, -0.2 * s, 0.05], &[1.0 - s * 0.3, 0.0, s])
            })
            .collect();
        let brute = pts
            .iter()
            .map(|p| {
                let a = p.position();
                let b = p.velocity();
                (a[0] * a[0] + 4.0 * a[1] * a[1] + 9.0 * a[2] * a[2]
                    + b.iter().map(|v| v * v).sum::<f64>())
                .sqrt()
            })
            .fold(0.0, f64::max);
        let e = Ensemble::new("five", pts).unwrap();
        assert_relative_eq!(ensemble_radius(&e, &m).unwrap(), brute, max_relative = 1e-15);
    }

    #[test]
    fn ensemble_invariants() {
        assert!(matches!(Ensemble::new("e", vec![]), Err(Error::EmptyEnsemble)));
        assert!(Ensemble::new("e", vec![PhasePoint::zeros(1), PhasePoint::zeros(2)]).is_err());
    }

    #[test]
    fn square_eigenvalues() {
        let m = MetricSpec::dirichlet_square(5);
        assert_eq!(m.eigenvalues(), &[2.0, 5.0, 5.0, 8.0, 10.0]);
        assert_eq!(m.lambda_1(), 2.0);
        assert_eq!(MetricSpec::dirichlet_1d(4).lambda_1(), 1.0);
    }

    #[test]
    fn inverse_round_trips() {
        for law in [
            DecayLaw::exponential(3.0, 0.7).unwrap(),
            DecayLaw::polynomial(3.0, 0.7).unwrap(),
            DecayLaw::new(DecayKind::LogPolynomial, 3.0, 0.7, 1.5).unwrap(),
        ] {
            let t = law.inverse(0.5).unwrap();
            assert_relative_eq!(law.eval(t).unwrap(), 0.5, max_relative = 1e-10);
        }
    }

    fn coeffs(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0..10.0f64, n)
    }

    proptest! {
        #[test]
        fn triangle_inequality(a in coeffs(8), b in coeffs(8), c in coeffs(8)) {
            let m = MetricSpec::dirichlet_1d(4);
            let x = PhasePoint::from_packed(&a).unwrap();
            let y = PhasePoint::from_packed(&b).unwrap();
            let z = PhasePoint::from_packed(&c).unwrap();
            let xz = phase_distance(&x, &z, &m).unwrap();
            let xy = phase_distance(&x, &y, &m).unwrap();
            let yz = phase_distance(&y, &z, &m).unwrap();
            prop_assert!(xz <= (xy + yz) * (1.0 + 1e-12));
            prop_assert_eq!(xy, phase_distance(&y, &x, &m).unwrap());
        }

        #[test]
        fn relabeling_modes_preserves_distance(a in coeffs(10), b in coeffs(10), shift in 0usize..5) {
            let m = MetricSpec::dirichlet_1d(5);
            let x = PhasePoint::from_packed(&a).unwrap();
            let y = PhasePoint::from_packed(&b).unwrap();
            let perm: Vec<usize> = (0..5).map(|i| (i + shift) % 5).collect();
            let permute = |p: &PhasePoint| PhasePoint::new(
                perm.iter().map(|&i| p.position()[i]).collect(),
                perm.iter().map(|&i| p.velocity()[i]).collect(),
            ).unwrap();
            let pm = MetricSpec::new(perm.iter().map(|&i| m.eigenvalues()[i]).collect(), 1).unwrap();
            let d0 = phase_distance(&x, &y, &m).unwrap();
            let d1 = phase_distance(&permute(&x), &permute(&y), &pm).unwrap();
            prop_assert!((d0 - d1).abs() <= 1e-12 * (1.0 + d0));
        }

        #[test]
        fn laws_strictly_decrease(c in 0.1..10.0f64, beta in 0.1..3.0f64, t1 in 1.01..50.0f64, dt in 0.01..50.0f64) {
            for law in [
                DecayLaw::exponential(c, beta).unwrap(),
                DecayLaw::polynomial(c, beta).unwrap(),
                DecayLaw::log_polynomial(c, beta).unwrap(),
            ] {
                prop_assert!(law.eval(t1 + dt).unwrap() < law.eval(t1).unwrap());
            }
        }
    }
}
