//! Explicit-rate ABR congestion avoidance: protocol state machines, an
//! event-driven simulator, and the analytic fairness-convergence model.
//!
//! The crate splits into three layers:
//!
//! - protocol pieces: [`units`], [`cell`], [`source`], [`switch`];
//! - the discrete-event [`engine`] driven by [`scenario`] descriptions,
//!   producing CSV [`trace`]s and derived [`report`]s;
//! - scalar-generic analysis: the two-source feedback model ([`tubmodel`],
//!   swept by [`tubcheck`]) and reference allocators ([`oracle`]).
//!
//! The analysis layer is generic over [`num::Real`]; the simulator itself is
//! pinned to [`Scalar`] so that event ordering and trace bytes stay
//! deterministic.

pub mod cell;
pub mod engine;
pub mod num;
pub mod oracle;
pub mod report;
pub mod scenario;
pub mod source;
pub mod switch;
pub mod trace;
pub mod tubcheck;
pub mod tubmodel;
pub mod units;

/// Scalar the simulator runs on.
pub type Scalar = f64;

/// Two-source model operating point, specialized to the simulator scalar.
pub type OperatingPoint = tubmodel::OperatingPoint<Scalar>;
/// Two-source model parameters, specialized to the simulator scalar.
pub type TubParams = tubmodel::TubParams<Scalar>;

pub use cell::{DataCell, RmCell, RmDirection};
pub use engine::{run_scenario, RunOutput, Simulation};
pub use report::{compute_report, SimulationReport};
pub use scenario::Scenario;
pub use source::{SourceConfig, SourceState};
pub use switch::{FairnessOption, SwitchConfig, SwitchPortState};
pub use units::{CellRate, LoadAdjustmentFactor, SimTime, VcId};
