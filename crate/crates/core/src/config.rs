//! Parameter distributions and experiment configuration.
//!
//! Both are plain serde structs that round-trip through TOML:
//!
//! ```toml
//! [distribution.rated_power_kw]
//! kind = "uniform"
//! low = 5.0
//! high = 7.0
//! ```

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::aggregate::Variant;
use crate::error::{Error, Result};

/// Draws allowed per truncated-normal value before the range is declared infeasible.
pub const REJECTION_BUDGET: usize = 1000;

/// A scalar parameter distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldDistribution {
    Fixed {
        value: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    /// Normal with the given mean and standard deviation, truncated to `[low, high]`.
    TruncatedNormal {
        mean: f64,
        std: f64,
        low: f64,
        high: f64,
    },
}

impl FieldDistribution {
    pub fn lower(&self) -> f64 {
        match *self {
            Self::Fixed { value } => value,
            Self::Uniform { low, .. } | Self::TruncatedNormal { low, .. } => low,
        }
    }

    pub fn upper(&self) -> f64 {
        match *self {
            Self::Fixed { value } => value,
            Self::Uniform { high, .. } | Self::TruncatedNormal { high, .. } => high,
        }
    }

    fn validate(&self, field: &'static str) -> Result<()> {
        let ok = match *self {
            Self::Fixed { value } => value.is_finite(),
            Self::Uniform { low, high } => low.is_finite() && high.is_finite() && low <= high,
            Self::TruncatedNormal {
                mean,
                std,
                low,
                high,
            } => mean.is_finite() && std.is_finite() && std >= 0.0 && low <= high,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "`{field}` has malformed bounds: {self:?}"
            )))
        }
    }

    /// Draws one value; truncated normals use rejection with [`REJECTION_BUDGET`].
    pub fn sample<R: Rng + ?Sized>(&self, field: &'static str, rng: &mut R) -> Result<f64> {
        match *self {
            Self::Fixed { value } => Ok(value),
            Self::Uniform { low, high } => {
                if low == high {
                    Ok(low)
                } else {
                    Ok(rng.random_range(low..=high))
                }
            }
            Self::TruncatedNormal {
                mean,
                std,
                low,
                high,
            } => {
                if std == 0.0 {
                    return if (low..=high).contains(&mean) {
                        Ok(mean)
                    } else {
                        Err(Error::InfeasibleDistribution {
                            field,
                            budget: REJECTION_BUDGET,
                        })
                    };
                }
                let normal = Normal::new(mean, std)
                    .map_err(|e| Error::InvalidConfig(format!("`{field}`: {e}")))?;
                for _ in 0..REJECTION_BUDGET {
                    let v = normal.sample(rng);
                    if (low..=high).contains(&v) {
                        return Ok(v);
                    }
                }
                Err(Error::InfeasibleDistribution {
                    field,
                    budget: REJECTION_BUDGET,
                })
            }
        }
    }
}

/// Distributions of the characteristic and travelling parameters of the fleet.
///
/// Rated power and efficiency are drawn once per vehicle and shared by the
/// charging and discharging directions. Plug-in times are hours on a 24 h
/// clock; plug-out times are hours on the clock of the departure day (a value
/// not after the plug-in hour means the next morning).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistributionConfig {
    pub rated_power_kw: FieldDistribution,
    pub efficiency: FieldDistribution,
    pub battery_capacity_kwh: FieldDistribution,
    pub initial_soc: FieldDistribution,
    pub demanded_soc: FieldDistribution,
    pub plug_in_hour: FieldDistribution,
    pub plug_out_hour: FieldDistribution,
    pub soc_min: f64,
    pub soc_max: f64,
}

impl Default for DistributionConfig {
    fn default() -> Self {
        Self {
            rated_power_kw: FieldDistribution::Uniform {
                low: 5.0,
                high: 7.0,
            },
            efficiency: FieldDistribution::Uniform {
                low: 0.88,
                high: 0.95,
            },
            battery_capacity_kwh: FieldDistribution::Uniform {
                low: 20.0,
                high: 30.0,
            },
            initial_soc: FieldDistribution::TruncatedNormal {
                mean: 0.3,
                std: 0.5,
                low: 0.2,
                high: 0.4,
            },
            demanded_soc: FieldDistribution::TruncatedNormal {
                mean: 0.8,
                std: 0.03,
                low: 0.7,
                high: 0.9,
            },
            // Evening arrivals around 17:30 (a -6.5 h offset from midnight), +-5.5 h.
            plug_in_hour: FieldDistribution::TruncatedNormal {
                mean: 17.5,
                std: 3.4,
                low: 12.0,
                high: 23.0,
            },
            plug_out_hour: FieldDistribution::TruncatedNormal {
                mean: 8.9,
                std: 3.4,
                low: 2.0,
                high: 11.9,
            },
            soc_min: 0.0,
            soc_max: 1.0,
        }
    }
}

impl DistributionConfig {
    /// Every field collapsed to a single value.
    pub fn degenerate(power_kw: f64, efficiency: f64, capacity_kwh: f64) -> Self {
        Self {
            rated_power_kw: FieldDistribution::Fixed { value: power_kw },
            efficiency: FieldDistribution::Fixed { value: efficiency },
            battery_capacity_kwh: FieldDistribution::Fixed {
                value: capacity_kwh,
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rated_power_kw", &self.rated_power_kw),
            ("efficiency", &self.efficiency),
            ("battery_capacity_kwh", &self.battery_capacity_kwh),
            ("initial_soc", &self.initial_soc),
            ("demanded_soc", &self.demanded_soc),
            ("plug_in_hour", &self.plug_in_hour),
            ("plug_out_hour", &self.plug_out_hour),
        ];
        for (name, d) in fields {
            d.validate(name)?;
        }
        if !(self.soc_min < self.soc_max) {
            return Err(Error::InvalidConfig("soc_min must be below soc_max".into()));
        }
        if self.rated_power_kw.lower() <= 0.0 || self.battery_capacity_kwh.lower() <= 0.0 {
            return Err(Error::InvalidConfig(
                "rated power and capacity must be positive".into(),
            ));
        }
        if self.efficiency.lower() <= 0.0 || self.efficiency.upper() > 1.0 {
            return Err(Error::InvalidConfig("efficiency must lie in (0, 1]".into()));
        }
        for (name, d) in [
            ("initial_soc", &self.initial_soc),
            ("demanded_soc", &self.demanded_soc),
        ] {
            if d.lower() < self.soc_min || d.upper() > self.soc_max {
                return Err(Error::InvalidConfig(format!(
                    "`{name}` range leaves [soc_min, soc_max]"
                )));
            }
        }
        if self.plug_in_hour.lower() < 0.0 || self.plug_in_hour.upper() >= 24.0 {
            return Err(Error::InvalidConfig(
                "plug_in_hour must lie in [0, 24)".into(),
            ));
        }
        if self.plug_out_hour.lower() < 0.0 || self.plug_out_hour.upper() >= 24.0 {
            return Err(Error::InvalidConfig(
                "plug_out_hour must lie in [0, 24)".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Settings shared by the prediction and tracking experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub n_ev: usize,
    pub n_intervals: usize,
    pub dt_seconds: f64,
    pub resync_minutes: f64,
    pub horizon_hours: f64,
    /// Uncontrolled pre-roll so that overnight sessions are already in progress at t = 0.
    pub warmup_hours: f64,
    pub seed: u64,
    pub variants: Vec<Variant>,
    pub transition_samples: usize,
    /// Diagonal standard deviation of the output noise (P_EV, P_u, P_l), kW.
    pub measurement_noise_std: [f64; 3],
    pub reference_period_hours: f64,
    /// Length of each disturbance in a disturbance reference.
    pub disturbance_minutes: f64,
    pub distribution: DistributionConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_ev: 10_000,
            n_intervals: 10,
            dt_seconds: 15.0,
            resync_minutes: 5.0,
            horizon_hours: 24.0,
            warmup_hours: 24.0,
            seed: 2024,
            variants: vec![Variant::Ssm, Variant::Essm],
            transition_samples: 100_000,
            measurement_noise_std: [0.0; 3],
            reference_period_hours: 3.0,
            disturbance_minutes: 15.0,
            distribution: DistributionConfig::default(),
        }
    }
}

fn whole_ratio(num: f64, den: f64) -> Option<usize> {
    let r = num / den;
    let n = r.round();
    ((r - n).abs() < 1e-9 && n >= 1.0).then_some(n as usize)
}

impl SimulationConfig {
    pub fn dt_hours(&self) -> f64 {
        self.dt_seconds / 3600.0
    }

    pub fn steps_per_resync(&self) -> usize {
        whole_ratio(self.resync_minutes * 60.0, self.dt_seconds).unwrap_or(1)
    }

    pub fn horizon_steps(&self) -> usize {
        whole_ratio(self.horizon_hours * 3600.0, self.dt_seconds).unwrap_or(0)
    }

    pub fn warmup_steps(&self) -> usize {
        if self.warmup_hours <= 0.0 {
            0
        } else {
            (self.warmup_hours * 3600.0 / self.dt_seconds).round() as usize
        }
    }

    pub fn reference_period_steps(&self) -> usize {
        (self.reference_period_hours * 3600.0 / self.dt_seconds)
            .round()
            .max(1.0) as usize
    }

    pub fn disturbance_steps(&self) -> usize {
        (self.disturbance_minutes * 60.0 / self.dt_seconds).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.distribution.validate()?;
        if self.n_intervals < 2 {
            return Err(Error::InvalidConfig(
                "n_intervals must be at least 2".into(),
            ));
        }
        if !(self.dt_seconds > 0.0) {
            return Err(Error::InvalidConfig("dt_seconds must be positive".into()));
        }
        if whole_ratio(self.resync_minutes * 60.0, self.dt_seconds).is_none() {
            return Err(Error::InvalidConfig(
                "dt must divide the resync period".into(),
            ));
        }
        if whole_ratio(self.horizon_hours * 60.0, self.resync_minutes).is_none() {
            return Err(Error::InvalidConfig(
                "the resync period must divide the horizon".into(),
            ));
        }
        if self.variants.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one model variant is required".into(),
            ));
        }
        if self.transition_samples == 0 {
            return Err(Error::InvalidConfig(
                "transition_samples must be at least 1".into(),
            ));
        }
        if self.measurement_noise_std.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidConfig(
                "noise std must be non-negative".into(),
            ));
        }
        if !(self.reference_period_hours > 0.0) {
            return Err(Error::InvalidConfig(
                "reference period must be positive".into(),
            ));
        }
        if !(self.disturbance_minutes >= 0.0) {
            return Err(Error::InvalidConfig(
                "disturbance length must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
