use serde::{Deserialize, Serialize};

/// Rated power, efficiency and capacity of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvCharacteristics {
    pub rated_charge_power: f64,
    pub rated_discharge_power: f64,
    pub charge_efficiency: f64,
    pub discharge_efficiency: f64,
    pub battery_capacity: f64,
}

impl EvCharacteristics {
    /// Vehicle with the same power and efficiency in both directions.
    pub fn symmetric(power_kw: f64, efficiency: f64, capacity_kwh: f64) -> Self {
        Self {
            rated_charge_power: power_kw,
            rated_discharge_power: power_kw,
            charge_efficiency: efficiency,
            discharge_efficiency: efficiency,
            battery_capacity: capacity_kwh,
        }
    }

    /// SOC gained per hour of rated charging.
    pub fn charge_rate(&self) -> f64 {
        self.rated_charge_power * self.charge_efficiency / self.battery_capacity
    }

    /// SOC lost per hour of rated discharging.
    pub fn discharge_rate(&self) -> f64 {
        self.rated_discharge_power / self.discharge_efficiency / self.battery_capacity
    }
}

/// Travelling parameters. Times are absolute hours on the simulation clock;
/// the session repeats every 24 h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvTravelPlan {
    pub plug_in_time: f64,
    pub plug_out_time: f64,
    pub initial_soc: f64,
    pub demanded_soc: f64,
    pub soc_min: f64,
    pub soc_max: f64,
}

impl EvTravelPlan {
    pub fn session_length(&self) -> f64 {
        self.plug_out_time - self.plug_in_time
    }

    /// Hours elapsed since the most recent plug-in at or before `t`.
    fn phase(&self, t: f64) -> f64 {
        (t - self.plug_in_time).rem_euclid(24.0)
    }

    pub fn is_connected(&self, t: f64) -> bool {
        self.phase(t) < self.session_length()
    }

    /// Departure time of the session that contains `t`.
    pub fn departure_after(&self, t: f64) -> f64 {
        t - self.phase(t) + self.session_length()
    }
}

/// Grid-side connection mode of a vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connection {
    Disconnected,
    Charging,
    Idle,
    Discharging,
    ForcedCharging,
}

impl Connection {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Disconnected => "disconnected",
            Self::Charging => "CS",
            Self::Idle => "IS",
            Self::Discharging => "DS",
            Self::ForcedCharging => "FCS",
        }
    }

    pub fn is_connected(self) -> bool {
        self != Self::Disconnected
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvOperationalState {
    pub soc: f64,
    pub connection: Connection,
}

impl EvOperationalState {
    /// Grid-injection-positive power.
    pub fn power_output(&self, chars: &EvCharacteristics) -> f64 {
        connection_power(
            self.connection,
            chars.rated_charge_power,
            chars.rated_discharge_power,
        )
    }
}

pub(crate) fn connection_power(c: Connection, charge_kw: f64, discharge_kw: f64) -> f64 {
    match c {
        Connection::Charging | Connection::ForcedCharging => -charge_kw,
        Connection::Discharging => discharge_kw,
        Connection::Idle | Connection::Disconnected => 0.0,
    }
}

/// One connected vehicle as seen by the aggregator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub ev_id: usize,
    pub soc: f64,
    pub connection: Connection,
    pub rated_charge_power: f64,
    pub rated_discharge_power: f64,
    pub soc_min: f64,
    pub soc_max: f64,
}

impl SnapshotEntry {
    pub fn power_kw(&self) -> f64 {
        connection_power(
            self.connection,
            self.rated_charge_power,
            self.rated_discharge_power,
        )
    }
}

/// Telemetry after one fleet step: the connected population plus the plug
/// events processed during that step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FleetSnapshot {
    pub time: f64,
    pub entries: Vec<SnapshotEntry>,
    pub plug_ins: Vec<SnapshotEntry>,
    pub plug_outs: Vec<SnapshotEntry>,
}

impl FleetSnapshot {
    pub fn n_connected(&self) -> usize {
        self.entries.len()
    }

    /// `ev_id,time,soc,connection,power_kw` rows for every connected vehicle.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W, header: bool) -> std::io::Result<()> {
        use crate::scenario::output::fmt6;
        if header {
            writeln!(w, "ev_id,time,soc,connection,power_kw")?;
        }
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{},{},{}",
                e.ev_id,
                fmt6(self.time),
                fmt6(e.soc),
                e.connection.as_str(),
                fmt6(e.power_kw())
            )?;
        }
        Ok(())
    }
}
