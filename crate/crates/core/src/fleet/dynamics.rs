use super::types::{Connection, EvCharacteristics, EvOperationalState, EvTravelPlan};

/// SOC after `dt` hours in the current connection mode, clamped to the
/// plan's `[soc_min, soc_max]`.
pub fn step_soc(
    state: &EvOperationalState,
    chars: &EvCharacteristics,
    plan: &EvTravelPlan,
    dt: f64,
) -> f64 {
    match state.connection {
        Connection::Charging | Connection::ForcedCharging => {
            (state.soc + chars.charge_rate() * dt).min(plan.soc_max)
        }
        Connection::Discharging => (state.soc - chars.discharge_rate() * dt).max(plan.soc_min),
        Connection::Idle | Connection::Disconnected => state.soc,
    }
}

/// Whether rated charging from `t` on is only just enough (or not enough)
/// to reach the demanded SOC at departure.
pub fn fcs_required(soc: f64, plan: &EvTravelPlan, chars: &EvCharacteristics, t: f64) -> bool {
    let shortfall = plan.demanded_soc - soc;
    if shortfall <= 0.0 {
        return false;
    }
    let remaining = plan.departure_after(t) - t;
    shortfall >= remaining * chars.charge_rate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const DT_15S: f64 = 15.0 / 3600.0;

    fn plan() -> EvTravelPlan {
        EvTravelPlan {
            plug_in_time: 0.0,
            plug_out_time: 12.0,
            initial_soc: 0.5,
            demanded_soc: 0.8,
            soc_min: 0.0,
            soc_max: 1.0,
        }
    }

    fn at(soc: f64, connection: Connection) -> EvOperationalState {
        EvOperationalState { soc, connection }
    }

    #[test]
    fn charging_step_matches_hand_value() {
        let c = EvCharacteristics::symmetric(6.0, 0.9, 24.0);
        let s = step_soc(&at(0.5, Connection::Charging), &c, &plan(), DT_15S);
        assert_abs_diff_eq!(s, 0.5009375, epsilon = 1e-12);
    }

    #[test]
    fn idle_step_is_constant() {
        let c = EvCharacteristics::symmetric(6.5, 0.91, 27.0);
        assert_eq!(
            step_soc(&at(0.5, Connection::Idle), &c, &plan(), DT_15S),
            0.5
        );
    }

    #[test]
    fn discharging_step_matches_hand_value() {
        let c = EvCharacteristics::symmetric(6.0, 0.9, 24.0);
        let s = step_soc(&at(0.5, Connection::Discharging), &c, &plan(), DT_15S);
        // 0.5 - (6 / 0.9 / 24) / 240
        assert_abs_diff_eq!(s, 0.498842592592592, epsilon = 1e-12);
    }

    #[test]
    fn clamps_at_bounds() {
        let c = EvCharacteristics::symmetric(6.0, 0.9, 24.0);
        assert_eq!(
            step_soc(&at(0.9999, Connection::Charging), &c, &plan(), DT_15S),
            1.0
        );
        assert_eq!(
            step_soc(&at(0.0001, Connection::Discharging), &c, &plan(), DT_15S),
            0.0
        );
    }

    #[test]
    fn deadline_already_met() {
        let c = EvCharacteristics::symmetric(6.0, 0.9, 24.0);
        assert!(!fcs_required(0.8, &plan(), &c, 11.99));
    }

    #[test]
    fn deadline_equality_point_triggers() {
        // charge rate 6 * 0.9 / 24 = 0.225 per hour
        let c = EvCharacteristics::symmetric(6.0, 0.9, 24.0);
        let p = EvTravelPlan {
            demanded_soc: 0.8,
            ..plan()
        };
        let t = 12.0 - 0.4444;
        assert!(fcs_required(0.7, &p, &c, t));
        assert!(!fcs_required(0.7, &p, &c, 2.0));
    }
}
