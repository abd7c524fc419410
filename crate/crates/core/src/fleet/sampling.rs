use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::types::{EvCharacteristics, EvTravelPlan};
use crate::config::DistributionConfig;
use crate::error::{Error, Result};

/// Characteristic and travelling parameters of one sampled vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvRecord {
    pub chars: EvCharacteristics,
    pub plan: EvTravelPlan,
}

/// Draws `n_ev` vehicles from `config`. Deterministic in `seed`.
///
/// Plug-in times land in `[0, 24)`; a plug-out hour that is not after the
/// plug-in hour is moved to the next day.
pub fn sample_fleet(config: &DistributionConfig, n_ev: usize, seed: u64) -> Result<Vec<EvRecord>> {
    if n_ev == 0 {
        return Err(Error::InvalidConfig("n_ev must be at least 1".into()));
    }
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_ev)
        .map(|_| {
            let power = config.rated_power_kw.sample("rated_power_kw", &mut rng)?;
            let eff = config.efficiency.sample("efficiency", &mut rng)?;
            let capacity = config
                .battery_capacity_kwh
                .sample("battery_capacity_kwh", &mut rng)?;
            let initial_soc = config.initial_soc.sample("initial_soc", &mut rng)?;
            let demanded_soc = config.demanded_soc.sample("demanded_soc", &mut rng)?;
            let plug_in = config.plug_in_hour.sample("plug_in_hour", &mut rng)?;
            let mut plug_out = config.plug_out_hour.sample("plug_out_hour", &mut rng)?;
            if plug_out <= plug_in {
                plug_out += 24.0;
            }
            Ok(EvRecord {
                chars: EvCharacteristics::symmetric(power, eff, capacity),
                plan: EvTravelPlan {
                    plug_in_time: plug_in,
                    plug_out_time: plug_out,
                    initial_soc,
                    demanded_soc,
                    soc_min: config.soc_min,
                    soc_max: config.soc_max,
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::FieldDistribution;

    #[test]
    fn table_one_ranges_hold() {
        let fleet = sample_fleet(&DistributionConfig::default(), 2000, 11).unwrap();
        assert_eq!(fleet.len(), 2000);
        for r in &fleet {
            assert!((5.0..=7.0).contains(&r.chars.rated_charge_power));
            assert_eq!(r.chars.rated_charge_power, r.chars.rated_discharge_power);
            assert!((0.88..=0.95).contains(&r.chars.charge_efficiency));
            assert_eq!(r.chars.charge_efficiency, r.chars.discharge_efficiency);
            assert!((20.0..=30.0).contains(&r.chars.battery_capacity));
            assert!((0.2..=0.4).contains(&r.plan.initial_soc));
            assert!((0.7..=0.9).contains(&r.plan.demanded_soc));
            assert!((0.0..24.0).contains(&r.plan.plug_in_time));
            assert!(r.plan.plug_out_time > r.plan.plug_in_time);
            assert!(r.plan.session_length() <= 24.0);
        }
    }

    #[test]
    fn degenerate_config_gives_identical_vehicles() {
        let mut cfg = DistributionConfig::degenerate(6.0, 0.9, 24.0);
        cfg.initial_soc = FieldDistribution::Uniform {
            low: 0.3,
            high: 0.3,
        };
        let fleet = sample_fleet(&cfg, 50, 1).unwrap();
        assert!(fleet
            .iter()
            .all(|r| r.chars == fleet[0].chars && r.chars.rated_charge_power == 6.0));
        assert!(fleet.iter().all(|r| r.plan.initial_soc == 0.3));
    }

    #[test]
    fn same_seed_same_fleet() {
        let cfg = DistributionConfig::default();
        let a = sample_fleet(&cfg, 300, 99).unwrap();
        let b = sample_fleet(&cfg, 300, 99).unwrap();
        assert_eq!(a, b);
        let c = sample_fleet(&cfg, 300, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empty_request_is_rejected() {
        assert!(sample_fleet(&DistributionConfig::default(), 0, 1).is_err());
    }

    #[test]
    fn vanishing_truncation_mass_is_reported() {
        let cfg = DistributionConfig {
            demanded_soc: FieldDistribution::TruncatedNormal {
                mean: 0.1,
                std: 0.001,
                low: 0.7,
                high: 0.9,
            },
            ..Default::default()
        };
        assert!(matches!(
            sample_fleet(&cfg, 10, 1),
            Err(Error::InfeasibleDistribution {
                field: "demanded_soc",
                ..
            })
        ));
    }
}
