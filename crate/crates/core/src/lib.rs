//! Aggregate flexibility models for a fleet of bidirectional EV chargers.
//!
//! [`fleet`] is the per-vehicle ground truth, [`aggregate`] the population
//! state-space models (conventional and boundary-extended), [`control`] the
//! dispatch planner and broadcast switching commands, [`imm`] the exact
//! per-vehicle baseline and [`scenario`] the experiment harness.

// `!(a < b)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregate;
pub mod config;
pub mod control;
pub mod error;
pub mod fleet;
pub mod imm;
pub mod scenario;

pub use aggregate::{
    AggregateState, FlexibilityEnvelope, Mode, StateLayout, SystemMatrices, Variant,
};
pub use config::{DistributionConfig, FieldDistribution, SimulationConfig};
pub use control::{DispatchCommand, DispatchPlan};
pub use error::{Error, Result};
pub use fleet::{Connection, EvCharacteristics, EvTravelPlan, Fleet, FleetSnapshot};
