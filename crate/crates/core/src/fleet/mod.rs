//! Per-vehicle ground truth: parameter sampling, SOC dynamics with the
//! operating envelope (forced charging, full/empty absorption), and the
//! stepped fleet simulator.

mod dynamics;
mod sampling;
mod sim;
mod types;

pub use dynamics::{fcs_required, step_soc};
pub use sampling::{sample_fleet, EvRecord};
pub use sim::{Ev, Fleet};
pub use types::{
    Connection, EvCharacteristics, EvOperationalState, EvTravelPlan, FleetSnapshot, SnapshotEntry,
};
