//! Distances between pure-state quantum ensembles and the sample complexity
//! of estimating them from SWAP-test outcomes.

pub mod circuit;
pub mod ensemble;
pub mod error;
pub mod estimators;
pub mod io;
pub mod lab;
pub mod metrics;
pub mod moment;
pub mod sampler;
pub mod seed;
pub mod state;
pub mod tolerance;
pub mod transport;

pub use ensemble::{Ensemble, Entry, FidelityTable};
pub use estimators::EstimateReport;
pub use error::{Error, ErrorClass, Result};
pub use metrics::{DistanceReport, Metric};
pub use moment::MomentOperator;
pub use sampler::{LabelTally, PairKind, SampleBatch, SampleRecord};
pub use state::PureState;
pub use tolerance::Tolerances;
pub use transport::{Coupling, DualPair};
