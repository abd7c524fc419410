//! Individual modelling baseline: exact power and one-step flexibility by
//! summing over every connected EV.

use crate::aggregate::FlexibilityEnvelope;
use crate::fleet::{Connection, FleetSnapshot, SnapshotEntry};

pub type ImmEnvelope = FlexibilityEnvelope;

pub fn imm_power(snapshot: &FleetSnapshot) -> f64 {
    snapshot.entries.iter().map(SnapshotEntry::power_kw).sum()
}

/// (upper, lower) contribution of one EV.
pub fn ev_bounds(e: &SnapshotEntry) -> (f64, f64) {
    if e.connection == Connection::ForcedCharging {
        return (-e.rated_charge_power, -e.rated_charge_power);
    }
    let upper = if e.soc > e.soc_min {
        e.rated_discharge_power
    } else {
        0.0
    };
    let lower = if e.soc < e.soc_max {
        -e.rated_charge_power
    } else {
        0.0
    };
    (upper, lower)
}

pub fn imm_flexibility(snapshot: &FleetSnapshot) -> ImmEnvelope {
    let mut env = ImmEnvelope {
        p_ev: imm_power(snapshot),
        p_u: 0.0,
        p_l: 0.0,
    };
    for e in &snapshot.entries {
        let (u, l) = ev_bounds(e);
        env.p_u += u;
        env.p_l += l;
    }
    env
}
