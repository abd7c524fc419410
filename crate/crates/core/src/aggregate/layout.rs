use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fleet::Connection;

/// Which aggregate model is in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Conventional model: 3N regular states plus FCS.
    Ssm,
    /// Extended model: adds idle-at-S_min and idle-at-S_max boundary states.
    Essm,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ssm => "ssm",
            Self::Essm => "essm",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ssm" => Ok(Self::Ssm),
            "essm" => Ok(Self::Essm),
            other => Err(Error::InvalidConfig(format!("unknown variant `{other}`"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The four responding modes plus the two boundary moves of the extended model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    ChargeToIdle,
    IdleToDischarge,
    DischargeToIdle,
    IdleToCharge,
    /// Idle at S_min back to the lowest charging interval.
    MinIdleToCharge,
    /// Idle at S_max to the highest discharging interval.
    MaxIdleToDischarge,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Self::ChargeToIdle => "a",
            Self::IdleToDischarge => "b",
            Self::DischargeToIdle => "c",
            Self::IdleToCharge => "d",
            Self::MinIdleToCharge => "d_ns",
            Self::MaxIdleToDischarge => "b_ns",
        }
    }

    /// Connection an EV moves to when the mode fires.
    pub fn target(self) -> Connection {
        match self {
            Self::ChargeToIdle | Self::DischargeToIdle => Connection::Idle,
            Self::IdleToDischarge | Self::MaxIdleToDischarge => Connection::Discharging,
            Self::IdleToCharge | Self::MinIdleToCharge => Connection::Charging,
        }
    }
}

/// A state of the aggregate model, with 1-based interval numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateKind {
    Charging(usize),
    Idle(usize),
    Discharging(usize),
    IdleAtMin,
    IdleAtMax,
    Forced,
}

/// Index bookkeeping for the state and input vectors.
///
/// States (0-based): `[0, N)` charging intervals from low to high SOC,
/// `[N, 2N)` idle, `[2N, 3N)` discharging, then for the extended model
/// idle-at-S_min, idle-at-S_max, and finally FCS.
///
/// Inputs (0-based): `[0, N)` mode a, `[N, 2N)` mode b, `[2N, 3N)` mode c,
/// `[3N, 4N)` mode d, then for the extended model `d_ns` and `b_ns`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateLayout {
    pub n_intervals: usize,
    pub variant: Variant,
    pub soc_min: f64,
    pub soc_max: f64,
}

impl StateLayout {
    pub fn new(n_intervals: usize, variant: Variant, soc_min: f64, soc_max: f64) -> Result<Self> {
        if n_intervals < 2 {
            return Err(Error::InvalidConfig(
                "at least two SOC intervals are required".into(),
            ));
        }
        if !(soc_min < soc_max) {
            return Err(Error::InvalidConfig("soc_min must be below soc_max".into()));
        }
        Ok(Self {
            n_intervals,
            variant,
            soc_min,
            soc_max,
        })
    }

    pub fn unit(n_intervals: usize, variant: Variant) -> Result<Self> {
        Self::new(n_intervals, variant, 0.0, 1.0)
    }

    pub fn dimension(&self) -> usize {
        match self.variant {
            Variant::Essm => 3 * self.n_intervals + 3,
            Variant::Ssm => 3 * self.n_intervals + 1,
        }
    }

    pub fn input_dimension(&self) -> usize {
        match self.variant {
            Variant::Essm => 4 * self.n_intervals + 2,
            Variant::Ssm => 4 * self.n_intervals,
        }
    }

    pub fn width(&self) -> f64 {
        (self.soc_max - self.soc_min) / self.n_intervals as f64
    }

    /// 1-based SOC interval, `ceil((soc - S_min) / width)` clamped to `[1, N]`.
    pub fn interval_of(&self, soc: f64) -> usize {
        let raw = ((soc - self.soc_min) / self.width()).ceil();
        raw.clamp(1.0, self.n_intervals as f64) as usize
    }

    pub fn cs(&self, interval: usize) -> usize {
        debug_assert!((1..=self.n_intervals).contains(&interval));
        interval - 1
    }

    pub fn is(&self, interval: usize) -> usize {
        debug_assert!((1..=self.n_intervals).contains(&interval));
        self.n_intervals + interval - 1
    }

    pub fn ds(&self, interval: usize) -> usize {
        debug_assert!((1..=self.n_intervals).contains(&interval));
        2 * self.n_intervals + interval - 1
    }

    pub fn is_min(&self) -> Option<usize> {
        (self.variant == Variant::Essm).then_some(3 * self.n_intervals)
    }

    pub fn is_max(&self) -> Option<usize> {
        (self.variant == Variant::Essm).then_some(3 * self.n_intervals + 1)
    }

    pub fn fcs(&self) -> usize {
        self.dimension() - 1
    }

    pub fn kind(&self, index: usize) -> StateKind {
        let n = self.n_intervals;
        match index {
            i if i < n => StateKind::Charging(i + 1),
            i if i < 2 * n => StateKind::Idle(i - n + 1),
            i if i < 3 * n => StateKind::Discharging(i - 2 * n + 1),
            i if Some(i) == self.is_min() => StateKind::IdleAtMin,
            i if Some(i) == self.is_max() => StateKind::IdleAtMax,
            i if i == self.fcs() => StateKind::Forced,
            _ => panic!(
                "state index {index} out of range for dimension {}",
                self.dimension()
            ),
        }
    }

    /// State index of a connected EV. Returns `None` for disconnected EVs.
    ///
    /// Idle EVs sitting exactly on a SOC bound go to the boundary states in
    /// the extended model and to the first/last idle interval in the
    /// conventional one.
    pub fn classify(&self, connection: Connection, soc: f64) -> Option<usize> {
        let k = self.interval_of(soc);
        match connection {
            Connection::Disconnected => None,
            Connection::ForcedCharging => Some(self.fcs()),
            Connection::Charging => Some(self.cs(k)),
            Connection::Discharging => Some(self.ds(k)),
            Connection::Idle => {
                if soc >= self.soc_max {
                    Some(self.is_max().unwrap_or(self.is(self.n_intervals)))
                } else if soc <= self.soc_min {
                    Some(self.is_min().unwrap_or(self.is(1)))
                } else {
                    Some(self.is(k))
                }
            }
        }
    }

    pub fn mode_of_input(&self, j: usize) -> (Mode, usize) {
        let n = self.n_intervals;
        match j {
            j if j < n => (Mode::ChargeToIdle, j + 1),
            j if j < 2 * n => (Mode::IdleToDischarge, j - n + 1),
            j if j < 3 * n => (Mode::DischargeToIdle, j - 2 * n + 1),
            j if j < 4 * n => (Mode::IdleToCharge, j - 3 * n + 1),
            j if j == 4 * n && self.variant == Variant::Essm => (Mode::MinIdleToCharge, 1),
            j if j == 4 * n + 1 && self.variant == Variant::Essm => (Mode::MaxIdleToDischarge, n),
            _ => panic!(
                "input index {j} out of range for dimension {}",
                self.input_dimension()
            ),
        }
    }

    pub fn input_index(&self, mode: Mode, interval: usize) -> Option<usize> {
        let n = self.n_intervals;
        if !(1..=n).contains(&interval) {
            return None;
        }
        match mode {
            Mode::ChargeToIdle => Some(interval - 1),
            Mode::IdleToDischarge => Some(n + interval - 1),
            Mode::DischargeToIdle => Some(2 * n + interval - 1),
            Mode::IdleToCharge => Some(3 * n + interval - 1),
            Mode::MinIdleToCharge => (self.variant == Variant::Essm).then_some(4 * n),
            Mode::MaxIdleToDischarge => (self.variant == Variant::Essm).then_some(4 * n + 1),
        }
    }

    /// (source state, destination state) moved by input `j`.
    pub fn input_edge(&self, j: usize) -> (usize, usize) {
        let (mode, k) = self.mode_of_input(j);
        let n = self.n_intervals;
        match mode {
            Mode::ChargeToIdle => (self.cs(k), self.is(k)),
            Mode::IdleToDischarge => (self.is(k), self.ds(k)),
            Mode::DischargeToIdle => (self.ds(k), self.is(k)),
            Mode::IdleToCharge => (self.is(k), self.cs(k)),
            Mode::MinIdleToCharge => (self.is_min().expect("extended layout"), self.cs(1)),
            Mode::MaxIdleToDischarge => (self.is_max().expect("extended layout"), self.ds(n)),
        }
    }

    pub fn state_label(&self, index: usize) -> String {
        match self.kind(index) {
            StateKind::Charging(k) => format!("cs{k}"),
            StateKind::Idle(k) => format!("is{k}"),
            StateKind::Discharging(k) => format!("ds{k}"),
            StateKind::IdleAtMin => "is_min".into(),
            StateKind::IdleAtMax => "is_max".into(),
            StateKind::Forced => "fcs".into(),
        }
    }
}
