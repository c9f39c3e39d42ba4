//! Sample-complexity experiments: analytic bounds, occupancy counts,
//! moment-matched hard instances, log-log fits and the budget search.

pub mod bounds;
pub mod fit;
pub mod legendre;
pub mod occupancy;
pub mod search;

pub use bounds::{hoeffding_bound_mmd_k, hoeffding_bound_wasserstein, MmdBound, MmdBranch};
pub use fit::{fit_loglog, LogLogFit};
pub use legendre::{lower_bound_instance, moment_matched_pair, LowerBoundInstance, MomentMatchedPair};
pub use occupancy::{expected_qualifying_labels, min_samples_for_occupancy, QualifyingLabels};
pub use search::{
    bisect_min_samples, estimate_min_samples, run_trial, sweep, ComplexityConfig, ComplexityCurve, CurvePoint,
    EnsembleSpec, LabMetric, SearchOutcome, TrialOutcome,
};
