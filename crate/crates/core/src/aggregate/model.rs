use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::layout::StateLayout;
use super::matrices::SystemMatrices;
use super::state::{average_charge_power, average_discharge_power, state_counts, AggregateState};
use crate::error::{Error, Result};
use crate::fleet::SnapshotEntry;

/// Hard floor for entries of `A x + B u`; anything lower is an inadmissible input.
pub const NEGATIVE_TOLERANCE: f64 = 1e-9;
/// Allowed drift of the total mass before it is renormalised.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Aggregate power and its flexibility bounds, kW, positive into the grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FlexibilityEnvelope {
    pub p_ev: f64,
    pub p_u: f64,
    pub p_l: f64,
}

impl FlexibilityEnvelope {
    pub fn brackets_power(&self, tol: f64) -> bool {
        self.p_l <= self.p_ev + tol && self.p_ev <= self.p_u + tol
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p_ev, self.p_u, self.p_l]
    }
}

/// Plug-in / plug-out contribution to one step of the recursion.
///
/// `w` is `(N_in x_in - N_out x_out) / (N_EV + N_in - N_out)`; `retain` is
/// `N_EV / (N_EV + N_in - N_out)`, the share of the next population that was
/// already connected.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessNoise {
    pub w: Array1<f64>,
    pub retain: f64,
    pub n_ev_next: usize,
    arrivals_p_ac: Option<f64>,
    arrivals_p_ad: Option<f64>,
}

impl ProcessNoise {
    pub fn zero(dimension: usize, n_ev: usize) -> Self {
        Self {
            w: Array1::zeros(dimension),
            retain: 1.0,
            n_ev_next: n_ev,
            arrivals_p_ac: None,
            arrivals_p_ad: None,
        }
    }
}

/// Noise vector for a step in which `plug_ins` arrived and `plug_outs` left
/// a population of `n_ev`.
pub fn compute_noise(
    n_ev: usize,
    plug_ins: &[SnapshotEntry],
    plug_outs: &[SnapshotEntry],
    layout: &StateLayout,
) -> Result<ProcessNoise> {
    if plug_ins.is_empty() && plug_outs.is_empty() {
        return Ok(ProcessNoise::zero(layout.dimension(), n_ev));
    }
    let next = n_ev as i64 + plug_ins.len() as i64 - plug_outs.len() as i64;
    if next <= 0 {
        return Err(Error::FleetEmptied);
    }
    let denom = next as f64;
    let w = (state_counts(plug_ins, layout) - state_counts(plug_outs, layout)) / denom;
    Ok(ProcessNoise {
        w,
        retain: n_ev as f64 / denom,
        n_ev_next: next as usize,
        arrivals_p_ac: (!plug_ins.is_empty()).then(|| average_charge_power(plug_ins)),
        arrivals_p_ad: (!plug_ins.is_empty()).then(|| average_discharge_power(plug_ins)),
    })
}

/// One step of `x' = A x + B u + w`.
///
/// `A x + B u` is rescaled by `noise.retain` so the result stays a
/// distribution over the new population. Mass removed by departures that the
/// model had already moved elsewhere is clipped at zero and the vector is
/// renormalised.
pub fn predict(
    state: &AggregateState,
    mats: &SystemMatrices,
    u: &Array1<f64>,
    noise: &ProcessNoise,
) -> Result<AggregateState> {
    let layout = state.layout;
    let dim = layout.dimension();
    if state.x.len() != dim || mats.a.nrows() != dim {
        return Err(Error::Dimension {
            expected: dim,
            actual: mats.a.nrows(),
        });
    }
    if u.len() != layout.input_dimension() {
        return Err(Error::Dimension {
            expected: layout.input_dimension(),
            actual: u.len(),
        });
    }
    if noise.w.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            actual: noise.w.len(),
        });
    }

    let mut x = mats.a.dot(&state.x) + mats.b.dot(u);
    for (index, v) in x.iter_mut().enumerate() {
        if *v < -NEGATIVE_TOLERANCE {
            return Err(Error::NegativeState { index, value: *v });
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }

    let mut next = state.clone();
    next.n_ev = noise.n_ev_next;
    if noise.n_ev_next == 0 {
        return Ok(AggregateState::empty(layout));
    }
    if state.n_ev == 0 {
        next.p_ac = noise.arrivals_p_ac.unwrap_or(0.0);
        next.p_ad = noise.arrivals_p_ad.unwrap_or(0.0);
    }
    x *= noise.retain;
    x += &noise.w;
    x.mapv_inplace(|v| v.max(0.0));
    let total = x.sum();
    if total > 0.0 && (total - 1.0).abs() > MASS_TOLERANCE {
        x /= total;
    }
    next.x = x;
    Ok(next)
}

/// `y = C x`.
pub fn output(state: &AggregateState, c: &Array2<f64>) -> FlexibilityEnvelope {
    if state.is_empty() {
        return FlexibilityEnvelope::default();
    }
    let y = c.dot(&state.x);
    FlexibilityEnvelope {
        p_ev: y[0],
        p_u: y[1],
        p_l: y[2],
    }
}

/// `y = C x + v` with independent Gaussian `v` of the given per-component std.
pub fn output_with_noise<R: Rng + ?Sized>(
    state: &AggregateState,
    c: &Array2<f64>,
    std: [f64; 3],
    rng: &mut R,
) -> FlexibilityEnvelope {
    let mut y = output(state, c).as_array();
    for (v, s) in y.iter_mut().zip(std) {
        if s > 0.0 {
            *v += Normal::new(0.0, s).expect("positive std").sample(rng);
        }
    }
    FlexibilityEnvelope {
        p_ev: y[0],
        p_u: y[1],
        p_l: y[2],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::matrices::{build_output_matrix, TransitionRates};
    use crate::aggregate::{Mode, Variant};
    use crate::fleet::Connection;
    use approx::assert_abs_diff_eq;

    fn layout() -> StateLayout {
        StateLayout::unit(10, Variant::Essm).unwrap()
    }

    fn state_with(x: Array1<f64>, n_ev: usize, p: f64) -> AggregateState {
        AggregateState {
            layout: layout(),
            x,
            n_ev,
            p_ac: p,
            p_ad: p,
        }
    }

    fn entry(soc: f64, connection: Connection) -> SnapshotEntry {
        SnapshotEntry {
            ev_id: 0,
            soc,
            connection,
            rated_charge_power: 6.0,
            rated_discharge_power: 6.0,
            soc_min: 0.0,
            soc_max: 1.0,
        }
    }

    #[test]
    fn identity_recursion_is_fixed_point() {
        let l = layout();
        let mut mats = SystemMatrices::new(l, TransitionRates { up: 0.0, down: 0.0 });
        mats.a = Array2::eye(l.dimension());
        let x = Array1::from_shape_fn(l.dimension(), |i| (i + 1) as f64);
        let x = &x / x.sum();
        let s = state_with(x.clone(), 10, 6.0);
        let next = predict(
            &s,
            &mats,
            &Array1::zeros(l.input_dimension()),
            &ProcessNoise::zero(l.dimension(), 10),
        )
        .unwrap();
        assert_eq!(next.x, x);
    }

    #[test]
    fn idle_to_discharge_moves_mass() {
        let l = layout();
        let mats = SystemMatrices::new(
            l,
            TransitionRates {
                up: 0.01,
                down: 0.01,
            },
        );
        let mut x = Array1::zeros(l.dimension());
        x[l.is(4)] = 1.0;
        let mut u = Array1::zeros(l.input_dimension());
        u[l.input_index(Mode::IdleToDischarge, 4).unwrap()] = 0.3;
        let next = predict(
            &state_with(x, 100, 6.0),
            &mats,
            &u,
            &ProcessNoise::zero(l.dimension(), 100),
        )
        .unwrap();
        assert_abs_diff_eq!(next.x[l.is(4)], 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(next.x[l.ds(4)], 0.3, epsilon = 1e-15);
    }

    #[test]
    fn inadmissible_input_is_reported() {
        let l = layout();
        let mats = SystemMatrices::new(l, TransitionRates { up: 0.0, down: 0.0 });
        let mut x = Array1::zeros(l.dimension());
        x[l.is(4)] = 0.1;
        x[l.cs(1)] = 0.9;
        let mut u = Array1::zeros(l.input_dimension());
        u[l.input_index(Mode::IdleToDischarge, 4).unwrap()] = 0.2;
        let err = predict(
            &state_with(x, 100, 6.0),
            &mats,
            &u,
            &ProcessNoise::zero(l.dimension(), 100),
        );
        assert!(matches!(err, Err(Error::NegativeState { .. })));
    }

    #[test]
    fn output_cases() {
        let l = layout();
        let mut x = Array1::zeros(l.dimension());
        for k in 1..=10 {
            x[l.is(k)] = 0.1;
        }
        let s = state_with(x, 100, 6.0);
        let y = output(&s, &build_output_matrix(&s));
        assert_abs_diff_eq!(y.p_ev, 0.0);
        assert_abs_diff_eq!(y.p_u, 600.0, epsilon = 1e-9);
        assert_abs_diff_eq!(y.p_l, -600.0, epsilon = 1e-9);

        let mut x = Array1::zeros(l.dimension());
        x[l.is_min().unwrap()] = 1.0;
        let s = state_with(x, 100, 6.0);
        let y = output(&s, &build_output_matrix(&s));
        assert_eq!((y.p_ev, y.p_u, y.p_l), (0.0, 0.0, -600.0));

        let mut x = Array1::zeros(l.dimension());
        x[l.cs(3)] = 0.5;
        x[l.cs(7)] = 0.5;
        let s = state_with(x, 100, 6.0);
        let y = output(&s, &build_output_matrix(&s));
        assert_eq!(y.p_ev, y.p_l);
        assert_eq!(y.p_ev, -600.0);

        let e = AggregateState::empty(l);
        assert_eq!(
            output(&e, &build_output_matrix(&e)),
            FlexibilityEnvelope::default()
        );
    }

    #[test]
    fn no_churn_no_noise() {
        let n = compute_noise(100, &[], &[], &layout()).unwrap();
        assert!(n.w.iter().all(|v| *v == 0.0));
        assert_eq!(n.retain, 1.0);
    }

    #[test]
    fn arrivals_in_first_interval() {
        let ins: Vec<_> = (0..10).map(|_| entry(0.05, Connection::Charging)).collect();
        let n = compute_noise(100, &ins, &[], &layout()).unwrap();
        assert_abs_diff_eq!(n.w[0], 10.0 / 110.0, epsilon = 1e-15);
        assert_eq!(n.w.iter().filter(|v| **v != 0.0).count(), 1);
        assert_eq!(n.n_ev_next, 110);
    }

    #[test]
    fn balanced_churn_cancels() {
        let flow: Vec<_> = (0..5)
            .map(|i| entry(0.15 + 0.1 * i as f64, Connection::Idle))
            .collect();
        let n = compute_noise(100, &flow, &flow, &layout()).unwrap();
        assert!(n.w.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn emptied_fleet_is_signalled() {
        let outs: Vec<_> = (0..3).map(|_| entry(0.5, Connection::Idle)).collect();
        assert!(matches!(
            compute_noise(3, &[], &outs, &layout()),
            Err(Error::FleetEmptied)
        ));
    }

    #[test]
    fn churn_keeps_unit_mass() {
        let l = layout();
        let mats = SystemMatrices::new(
            l,
            TransitionRates {
                up: 0.01,
                down: 0.01,
            },
        );
        let mut x = Array1::zeros(l.dimension());
        x[l.cs(5)] = 0.5;
        x[l.is_max().unwrap()] = 0.5;
        let ins: Vec<_> = (0..7).map(|_| entry(0.25, Connection::Charging)).collect();
        let outs: Vec<_> = (0..3).map(|_| entry(1.0, Connection::Idle)).collect();
        let noise = compute_noise(100, &ins, &outs, &l).unwrap();
        let next = predict(
            &state_with(x, 100, 6.0),
            &mats,
            &Array1::zeros(l.input_dimension()),
            &noise,
        )
        .unwrap();
        assert_eq!(next.n_ev, 104);
        assert_abs_diff_eq!(next.mass(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(next.x[l.cs(3)], 7.0 / 104.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            next.x[l.is_max().unwrap()],
            (50.0 - 3.0) / 104.0,
            epsilon = 1e-12
        );
    }
}
