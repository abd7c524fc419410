use evagg::aggregate::{
    build_output_matrix, compute_noise, output, predict, resync, AggregateState, ProcessNoise,
    StateLayout, SystemMatrices, TransitionRates, Variant,
};
use evagg::control::{plan_dispatch, to_switching_probabilities};
use evagg::fleet::EvRecord;
use evagg::fleet::{
    Connection, EvCharacteristics, EvOperationalState, EvTravelPlan, Fleet, FleetSnapshot,
    SnapshotEntry,
};
use evagg::imm::{imm_flexibility, imm_power};
use ndarray::Array1;
use proptest::prelude::*;

const DT: f64 = 15.0 / 3600.0;

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![Just(Variant::Ssm), Just(Variant::Essm)]
}

fn rates() -> impl Strategy<Value = TransitionRates> {
    (0.0..0.5f64, 0.0..0.5f64).prop_map(|(up, down)| TransitionRates { up, down })
}

fn state(
    layout: StateLayout,
    weights: &[f64],
    n_ev: usize,
    p_ac: f64,
    p_ad: f64,
) -> AggregateState {
    let mut s = AggregateState::empty(layout);
    for (x, w) in s.x.iter_mut().zip(weights.iter().cycle()) {
        *x = *w;
    }
    let total = s.x.sum();
    if total > 0.0 {
        s.x /= total;
    } else {
        s.x[layout.is(1)] = 1.0;
    }
    s.n_ev = n_ev;
    s.p_ac = p_ac;
    s.p_ad = p_ad;
    s
}

prop_compose! {
    fn arb_state()(n in 2usize..14, v in variant(), weights in prop::collection::vec(0.0..1.0f64, 1..60),
                   sparsity in 0usize..4, n_ev in 1usize..5000, p_ac in 2.0..12.0f64, p_ad in 2.0..12.0f64)
                   -> AggregateState {
        let layout = StateLayout::unit(n, v).unwrap();
        let w: Vec<f64> = weights.iter().enumerate().map(|(i, w)| if sparsity > 0 && i % (sparsity + 1) == 0 { 0.0 } else { *w }).collect();
        state(layout, &w, n_ev, p_ac, p_ad)
    }
}

fn entry(id: usize, soc: f64, connection: Connection, p: f64) -> SnapshotEntry {
    SnapshotEntry {
        ev_id: id,
        soc,
        connection,
        rated_charge_power: p,
        rated_discharge_power: p,
        soc_min: 0.0,
        soc_max: 1.0,
    }
}

fn connection() -> impl Strategy<Value = Connection> {
    prop_oneof![
        Just(Connection::Charging),
        Just(Connection::Idle),
        Just(Connection::Discharging),
        Just(Connection::ForcedCharging)
    ]
}

/// Full batteries stop charging and empty ones stop discharging.
fn reachable(c: Connection, soc: f64) -> Connection {
    match c {
        Connection::Charging | Connection::ForcedCharging if soc >= 1.0 => Connection::Idle,
        Connection::Discharging if soc <= 0.0 => Connection::Idle,
        c => c,
    }
}

prop_compose! {
    fn arb_snapshot()(evs in prop::collection::vec((prop_oneof![Just(0.0), Just(1.0), 0.0..=1.0f64], connection(), 3.0..11.0f64), 1..80))
                      -> FleetSnapshot {
        FleetSnapshot {
            time: 0.0,
            entries: evs.into_iter().enumerate().map(|(i, (soc, c, p))| entry(i, soc, reachable(c, soc), p)).collect(),
            ..Default::default()
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn transition_matrix_is_column_stochastic(n in 2usize..25, v in variant(), r in rates()) {
        let m = SystemMatrices::new(StateLayout::unit(n, v).unwrap(), r);
        for col in m.a.columns() {
            prop_assert!((col.sum() - 1.0).abs() <= 1e-9);
            prop_assert!(col.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn every_control_move_conserves_population(n in 2usize..25, v in variant()) {
        let m = SystemMatrices::new(StateLayout::unit(n, v).unwrap(), TransitionRates { up: 0.0, down: 0.0 });
        for col in m.b.columns() {
            prop_assert_eq!(col.sum(), 0.0);
            prop_assert_eq!(col.iter().filter(|x| **x != 0.0).count(), 2);
        }
        prop_assert!(m.b.row(m.layout.fcs()).iter().all(|x| *x == 0.0));
    }

    #[test]
    fn prediction_conserves_population(s in arb_state(), r in rates(), frac in -1.2..1.2f64) {
        let mats = SystemMatrices::new(s.layout, r);
        let env = output(&s, &build_output_matrix(&s));
        let delta = if frac >= 0.0 { frac * (env.p_u - env.p_ev) } else { -frac * (env.p_l - env.p_ev) };
        let plan = plan_dispatch(delta, &s, &mats);
        let raw = mats.a.dot(&s.x) + mats.b.dot(&plan.u);
        prop_assert!((raw.sum() - 1.0).abs() <= 1e-9);
        let next = predict(&s, &mats, &plan.u, &ProcessNoise::zero(s.layout.dimension(), s.n_ev)).unwrap();
        prop_assert!((next.x.sum() - 1.0).abs() <= 1e-9);
        prop_assert!(next.x.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn full_and_empty_mass_saturates_the_envelope(n in 2usize..20, weights in prop::collection::vec(0.01..1.0f64, 22),
                                                  n_ev in 1usize..20000, p_ac in 2.0..12.0f64, p_ad in 2.0..12.0f64) {
        let layout = StateLayout::unit(n, Variant::Essm).unwrap();
        for full in [true, false] {
            let mut w = vec![0.0; layout.dimension()];
            for k in 1..=n {
                w[if full { layout.cs(k) } else { layout.ds(k) }] = weights[k];
            }
            w[if full { layout.is_max() } else { layout.is_min() }.unwrap()] = weights[0];
            w[layout.fcs()] = weights[21];
            let s = state(layout, &w, n_ev, p_ac, p_ad);
            let y = output(&s, &build_output_matrix(&s));
            let scale = y.p_ev.abs().max(1.0);
            if full {
                prop_assert!((y.p_l - y.p_ev).abs() <= 1e-9 * scale);
            } else {
                prop_assert!((y.p_u - y.p_ev).abs() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn plans_are_admissible(s in arb_state(), r in rates(), delta in -1e5..1e5f64) {
        let mats = SystemMatrices::new(s.layout, r);
        let plan = plan_dispatch(delta, &s, &mats);
        let l = s.layout;
        let mut outflow = Array1::<f64>::zeros(l.dimension());
        for (j, u) in plan.u.iter().enumerate() {
            prop_assert!(*u >= 0.0);
            outflow[l.input_edge(j).0] += u;
        }
        for (i, out) in outflow.iter().enumerate() {
            prop_assert!(*out <= s.x[i] + 1e-12);
        }
        prop_assert!(to_switching_probabilities(&plan, &s, 0.0).is_ok());
    }

    #[test]
    fn plans_saturate_exactly_at_the_envelope_edge(s in arb_state(), frac in -2.0..2.0f64) {
        let mats = SystemMatrices::new(s.layout, TransitionRates { up: 0.0, down: 0.0 });
        let env = output(&s, &build_output_matrix(&s));
        let (room_up, room_down) = (env.p_u - env.p_ev, env.p_l - env.p_ev);
        let delta = if frac >= 0.0 { frac * room_up } else { -frac * room_down };
        prop_assume!(delta != 0.0);
        let plan = plan_dispatch(delta, &s, &mats);
        let tol = 1e-9 * s.n_ev as f64 * s.p_ad.max(s.p_ac);
        if frac.abs() < 0.999 {
            prop_assert!(!plan.saturated);
            prop_assert!((plan.achieved_delta_kw - delta).abs() <= tol);
        } else if frac.abs() > 1.001 {
            prop_assert!(plan.saturated);
            let edge = if frac > 0.0 { room_up } else { room_down };
            prop_assert!((plan.achieved_delta_kw - edge).abs() <= tol);
        }
    }

    #[test]
    fn imm_envelope_brackets_imm_power(snapshot in arb_snapshot()) {
        let env = imm_flexibility(&snapshot);
        prop_assert!(env.brackets_power(1e-9));
        let total: f64 = snapshot.entries.iter().map(SnapshotEntry::power_kw).sum();
        prop_assert_eq!(imm_power(&snapshot), total);
        prop_assert_eq!(env.p_ev, total);
    }

    #[test]
    fn model_envelope_brackets_model_power(snapshot in arb_snapshot(), n in 2usize..14) {
        let s = resync(&snapshot, &StateLayout::unit(n, Variant::Essm).unwrap());
        prop_assert!(output(&s, &build_output_matrix(&s)).brackets_power(1e-9));
    }

    #[test]
    fn churn_noise_keeps_unit_mass(snapshot in arb_snapshot(), arrivals in arb_snapshot(), n in 2usize..14, leave in 0usize..40) {
        let layout = StateLayout::unit(n, Variant::Essm).unwrap();
        let s = resync(&snapshot, &layout);
        let leaving: Vec<SnapshotEntry> = snapshot.entries.iter().take(leave.min(snapshot.entries.len().saturating_sub(1))).cloned().collect();
        let noise = compute_noise(s.n_ev, &arrivals.entries, &leaving, &layout).unwrap();
        let mats = SystemMatrices::new(layout, TransitionRates { up: 0.0, down: 0.0 });
        let next = predict(&s, &mats, &Array1::zeros(layout.input_dimension()), &noise).unwrap();
        prop_assert!((next.x.sum() - 1.0).abs() <= 1e-9);
        prop_assert_eq!(next.n_ev, s.n_ev + arrivals.entries.len() - leaving.len());
    }
}

fn ev_record(
    power: f64,
    eff: f64,
    capacity: f64,
    plug_in: f64,
    plug_out: f64,
    initial: f64,
    demanded: f64,
) -> EvRecord {
    EvRecord {
        chars: EvCharacteristics::symmetric(power, eff, capacity),
        plan: EvTravelPlan {
            plug_in_time: plug_in,
            plug_out_time: plug_out,
            initial_soc: initial,
            demanded_soc: demanded,
            soc_min: 0.0,
            soc_max: 1.0,
        },
    }
}

prop_compose! {
    fn arb_record()(power in 3.0..11.0f64, eff in 0.85..0.98f64, capacity in 15.0..60.0f64,
                    plug_in in 0.0..1.0f64, session in 1.0..4.0f64, initial in 0.0..1.0f64, demanded in 0.0..1.0f64)
                    -> EvRecord {
        let rate = power * eff / capacity;
        // demanded SOC reachable by charging from plug-in
        let demanded = demanded.min(initial + 0.8 * session * rate).min(1.0);
        ev_record(power, eff, capacity, plug_in, plug_in + session, initial, demanded)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn randomly_commanded_fleet_respects_soc_and_departure_bounds(
        records in prop::collection::vec(arb_record(), 1..25),
        probabilities in prop::collection::vec(0.0..0.5f64, 42),
        seed in any::<u64>(),
    ) {
        let layout = StateLayout::unit(10, Variant::Essm).unwrap();
        let command = evagg::control::DispatchCommand::new(layout, probabilities, 0.0).unwrap();
        let mut fleet = Fleet::new(&records, 0.0, DT, seed).unwrap();
        for _ in 0..(5.2 / DT) as usize {
            let snap = fleet.step(Some(&command)).unwrap();
            for e in snap.entries.iter().chain(&snap.plug_ins) {
                prop_assert!((0.0..=1.0).contains(&e.soc));
            }
            for e in &snap.plug_outs {
                let r = &records[e.ev_id];
                let eps = r.chars.charge_rate() * DT + r.chars.discharge_rate() * DT;
                prop_assert!(e.soc >= r.plan.demanded_soc - eps - 1e-12,
                    "EV {} left at {} with {} demanded", e.ev_id, e.soc, r.plan.demanded_soc);
            }
        }
    }
}

#[test]
fn idle_fleet_at_bounds_keeps_its_soc() {
    let records: Vec<_> = (0..10)
        .map(|_| ev_record(6.0, 0.9, 24.0, 0.0, 10.0, 0.5, 0.0))
        .collect();
    let states: Vec<_> = (0..10)
        .map(|i| EvOperationalState {
            soc: if i % 2 == 0 { 0.0 } else { 1.0 },
            connection: Connection::Idle,
        })
        .collect();
    let layout = StateLayout::unit(10, Variant::Ssm).unwrap();
    let mut p = vec![0.0; layout.input_dimension()];
    p[layout.input_index(evagg::Mode::IdleToCharge, 10).unwrap()] = 1.0;
    p[layout.input_index(evagg::Mode::IdleToDischarge, 1).unwrap()] = 1.0;
    let command = evagg::control::DispatchCommand::new(layout, p, 0.0).unwrap();
    let mut fleet = Fleet::with_states(&records, &states, 1.0, DT, 4).unwrap();
    let snap = fleet.step(Some(&command)).unwrap();
    for (e, s) in snap.entries.iter().zip(&states) {
        assert_eq!(e.soc, s.soc);
        assert_eq!(e.connection, Connection::Idle);
        assert_eq!(e.power_kw(), 0.0);
    }
}
