//! Numerical laboratory for dissipative dynamical systems.
//!
//! The crate builds finite surrogates of compact attracting sets (nets of
//! evolved absorbing-set samples plus their forward orbits), estimates how
//! fast a covering-based noncompactness proxy decays along an evolved
//! ensemble, and measures the decay criteria and explicit rate bounds for a
//! semilinear damped wave equation on a spectral-Galerkin truncation.
//!
//! Module map:
//!
//! * [`metric`]: phase points, ensembles, the `H¹₀ × L²` metric and decay laws.
//! * [`alpha`]: cluster-cover noncompactness proxy and Hausdorff semidistance.
//! * [`semigroup`]: the wave-equation integrator and a closed-form linear oracle.
//! * [`attractor`]: net/orbit construction of the attracting set and its certificate.
//! * [`criteria`]: rate fitting, decay criteria, quasi-stability estimation.
//! * [`experiment`]: config-driven pipelines, sweeps and run manifests.

pub mod alpha;
pub mod attractor;
pub mod criteria;
pub mod error;
pub mod experiment;
pub mod io;
pub mod metric;
pub mod semigroup;

pub use alpha::{
    alpha_proxy, decay_trace, hausdorff_semidist, CoverMethod, CoverReport, DecayTrace, TraceQuantity,
};
pub use attractor::{
    build_attracting_set, build_net, perturbed_net, verify_attraction, AttractingSetApprox,
    AttractionCertificate, NetEntry, PerturbedNet,
};
pub use criteria::{
    check_hausdorff_criterion, contractive_inequality_check, fit_exponential_rate,
    predicted_rate_bounds, quasistability_estimate, repeated_liminf_diag, tail_projection_decay,
    QuasiStabilityReport, RateBounds, RateFit,
};
pub use error::{Error, Result};
pub use metric::{
    ensemble_radius, phase_distance, DecayKind, DecayLaw, Ensemble, MetricSpec, PhasePoint,
};
pub use semigroup::{
    absorbing_radius, evolve, linear_modal_evolve, lyapunov, wave_rhs, LinearModal,
    LinearModalConfig, Semigroup, TrajectoryRecord, WaveSystem, WaveSystemConfig,
};
