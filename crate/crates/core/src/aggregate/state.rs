use ndarray::Array1;

use super::layout::StateLayout;
use crate::fleet::{Connection, FleetSnapshot, SnapshotEntry};

/// Population shares over the model states plus the scalars the output
/// matrix needs.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateState {
    pub layout: StateLayout,
    pub x: Array1<f64>,
    pub n_ev: usize,
    /// Average rated charging power of charging EVs, kW.
    pub p_ac: f64,
    /// Average rated discharging power of discharging EVs, kW.
    pub p_ad: f64,
}

impl AggregateState {
    pub fn empty(layout: StateLayout) -> Self {
        Self {
            layout,
            x: Array1::zeros(layout.dimension()),
            n_ev: 0,
            p_ac: 0.0,
            p_ad: 0.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.n_ev == 0
    }

    pub fn mass(&self) -> f64 {
        self.x.sum()
    }
}

/// Head counts per model state.
pub fn state_counts(entries: &[SnapshotEntry], layout: &StateLayout) -> Array1<f64> {
    let mut counts = Array1::zeros(layout.dimension());
    for e in entries {
        if let Some(i) = layout.classify(e.connection, e.soc) {
            counts[i] += 1.0;
        }
    }
    counts
}

fn mean_of<I: Iterator<Item = f64>>(it: I) -> Option<f64> {
    let (sum, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Mean rated charging power over EVs that are charging (CS or FCS), falling
/// back to EVs able to charge, then to every connected EV.
pub fn average_charge_power(entries: &[SnapshotEntry]) -> f64 {
    mean_of(
        entries
            .iter()
            .filter(|e| {
                matches!(
                    e.connection,
                    Connection::Charging | Connection::ForcedCharging
                )
            })
            .map(|e| e.rated_charge_power),
    )
    .or_else(|| {
        mean_of(
            entries
                .iter()
                .filter(|e| e.soc < e.soc_max)
                .map(|e| e.rated_charge_power),
        )
    })
    .or_else(|| mean_of(entries.iter().map(|e| e.rated_charge_power)))
    .unwrap_or(0.0)
}

/// Mean rated discharging power over discharging EVs, falling back to EVs
/// able to discharge, then to every connected EV.
pub fn average_discharge_power(entries: &[SnapshotEntry]) -> f64 {
    mean_of(
        entries
            .iter()
            .filter(|e| e.connection == Connection::Discharging)
            .map(|e| e.rated_discharge_power),
    )
    .or_else(|| {
        mean_of(
            entries
                .iter()
                .filter(|e| e.connection != Connection::ForcedCharging && e.soc > e.soc_min)
                .map(|e| e.rated_discharge_power),
        )
    })
    .or_else(|| mean_of(entries.iter().map(|e| e.rated_discharge_power)))
    .unwrap_or(0.0)
}

/// Aggregate state of the connected population in `snapshot`.
pub fn discretize(snapshot: &FleetSnapshot, layout: &StateLayout) -> AggregateState {
    discretize_entries(&snapshot.entries, layout)
}

pub fn discretize_entries(entries: &[SnapshotEntry], layout: &StateLayout) -> AggregateState {
    if entries.is_empty() {
        return AggregateState::empty(*layout);
    }
    let n = entries.len();
    let x = state_counts(entries, layout) / n as f64;
    AggregateState {
        layout: *layout,
        x,
        n_ev: n,
        p_ac: average_charge_power(entries),
        p_ad: average_discharge_power(entries),
    }
}

/// Replaces the model state with the telemetry in `snapshot`.
pub fn resync(snapshot: &FleetSnapshot, layout: &StateLayout) -> AggregateState {
    discretize(snapshot, layout)
}
