//! Experiment orchestration: the uncontrolled prediction day, closed-loop
//! tracking, fleet-size sweeps, the boundary saturation probe, error metrics
//! and CSV output.

mod metrics;
pub mod output;
mod reference;
mod runner;

pub use metrics::{error_metrics, rms_error};
pub use reference::{disturbance_reference, generate_reference, CENTRAL_BAND};
pub use runner::{
    initial_fleet, run_prediction_experiment, run_saturation_probe, run_sweep,
    run_tracking_experiment, BoundaryCase, ErrorRow, ModelSeries, ModelTrack, ProbeOutcome,
    RunResult, SaturationProbe, TrackingSummary,
};
