use std::io::Write;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layout::{StateKind, StateLayout};
use super::state::AggregateState;
use crate::config::DistributionConfig;
use crate::error::{Error, Result};

/// Per-step probabilities of leaving an interval for its neighbour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionRates {
    /// Charging EVs moving one interval up.
    pub up: f64,
    /// Discharging EVs moving one interval down.
    pub down: f64,
}

/// Monte Carlo estimate of the interval-crossing probabilities.
///
/// With EVs spread uniformly inside an interval of width `w`, an EV whose
/// SOC moves by `dS < w` in one step crosses into the neighbouring interval
/// with probability `dS / w`. Averaging over parameter draws integrates that
/// against the joint density of (power, efficiency, capacity).
pub fn estimate_transition_rates(
    dist: &DistributionConfig,
    layout: &StateLayout,
    dt: f64,
    n_samples: usize,
    seed: u64,
) -> Result<TransitionRates> {
    if n_samples == 0 {
        return Err(Error::InvalidConfig("n_samples must be at least 1".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidConfig("dt must be positive".into()));
    }
    let width = layout.width();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut up, mut down) = (0.0, 0.0);
    for _ in 0..n_samples {
        let power = dist.rated_power_kw.sample("rated_power_kw", &mut rng)?;
        let eff = dist.efficiency.sample("efficiency", &mut rng)?;
        let capacity = dist
            .battery_capacity_kwh
            .sample("battery_capacity_kwh", &mut rng)?;
        let ds_charge = power * eff / capacity * dt;
        let ds_discharge = power / eff / capacity * dt;
        for ds in [ds_charge, ds_discharge] {
            if ds >= width {
                return Err(Error::StepTooLarge {
                    delta_soc: ds,
                    width,
                });
            }
        }
        up += ds_charge / width;
        down += ds_discharge / width;
    }
    let n = n_samples as f64;
    Ok(TransitionRates {
        up: (up / n).min(1.0),
        down: (down / n).min(1.0),
    })
}

/// Column-stochastic transition matrix; `A[m, n]` is the probability of
/// moving from state `n` to state `m` in one step.
pub fn transition_matrix(layout: &StateLayout, rates: TransitionRates) -> Array2<f64> {
    let dim = layout.dimension();
    let n = layout.n_intervals;
    let mut a = Array2::zeros((dim, dim));
    for col in 0..dim {
        match layout.kind(col) {
            StateKind::Charging(k) => {
                let next = if k < n {
                    Some(layout.cs(k + 1))
                } else {
                    layout.is_max()
                };
                match next {
                    Some(row) => {
                        a[[col, col]] = 1.0 - rates.up;
                        a[[row, col]] = rates.up;
                    }
                    None => a[[col, col]] = 1.0,
                }
            }
            StateKind::Discharging(k) => {
                let next = if k > 1 {
                    Some(layout.ds(k - 1))
                } else {
                    layout.is_min()
                };
                match next {
                    Some(row) => {
                        a[[col, col]] = 1.0 - rates.down;
                        a[[row, col]] = rates.down;
                    }
                    None => a[[col, col]] = 1.0,
                }
            }
            StateKind::Idle(_)
            | StateKind::IdleAtMin
            | StateKind::IdleAtMax
            | StateKind::Forced => {
                a[[col, col]] = 1.0;
            }
        }
    }
    a
}

pub fn estimate_transition_matrix(
    dist: &DistributionConfig,
    layout: &StateLayout,
    dt: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Array2<f64>> {
    let rates = estimate_transition_rates(dist, layout, dt, n_samples, seed)?;
    Ok(transition_matrix(layout, rates))
}

/// Signed incidence matrix of the input vector: column `j` takes mass from
/// its source state and adds it to its destination.
pub fn build_input_matrix(layout: &StateLayout) -> Array2<f64> {
    let mut b = Array2::zeros((layout.dimension(), layout.input_dimension()));
    for j in 0..layout.input_dimension() {
        let (src, dst) = layout.input_edge(j);
        b[[src, j]] = -1.0;
        b[[dst, j]] = 1.0;
    }
    b
}

/// Per-state (P_EV, P_u, P_l) coefficients in units of the average powers.
pub fn output_coefficients(kind: StateKind, p_ac: f64, p_ad: f64) -> [f64; 3] {
    match kind {
        StateKind::Charging(_) => [-p_ac, p_ad, -p_ac],
        StateKind::Idle(_) => [0.0, p_ad, -p_ac],
        StateKind::Discharging(_) => [p_ad, p_ad, -p_ac],
        StateKind::IdleAtMin => [0.0, 0.0, -p_ac],
        StateKind::IdleAtMax => [0.0, p_ad, 0.0],
        StateKind::Forced => [-p_ac, -p_ac, -p_ac],
    }
}

/// 3 x dim output matrix scaled by the connected fleet size.
pub fn build_output_matrix(state: &AggregateState) -> Array2<f64> {
    let layout = &state.layout;
    let scale = state.n_ev as f64;
    let mut c = Array2::zeros((3, layout.dimension()));
    for col in 0..layout.dimension() {
        let coeffs = output_coefficients(layout.kind(col), state.p_ac, state.p_ad);
        for (row, v) in coeffs.into_iter().enumerate() {
            c[[row, col]] = scale * v;
        }
    }
    c
}

/// A, B and the current C of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub layout: StateLayout,
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub c: Array2<f64>,
}

impl SystemMatrices {
    pub fn new(layout: StateLayout, rates: TransitionRates) -> Self {
        Self {
            layout,
            a: transition_matrix(&layout, rates),
            b: build_input_matrix(&layout),
            c: Array2::zeros((3, layout.dimension())),
        }
    }

    pub fn estimate(
        dist: &DistributionConfig,
        layout: StateLayout,
        dt: f64,
        n_samples: usize,
        seed: u64,
    ) -> Result<Self> {
        let rates = estimate_transition_rates(dist, &layout, dt, n_samples, seed)?;
        Ok(Self::new(layout, rates))
    }

    pub fn refresh_output(&mut self, state: &AggregateState) {
        self.c = build_output_matrix(state);
    }
}

/// Writes `m` row-major with a `#` metadata line and a label header.
pub fn write_matrix_csv<W: Write>(
    mut w: W,
    layout: &StateLayout,
    name: &str,
    m: &Array2<f64>,
    column_labels: &[String],
) -> std::io::Result<()> {
    use crate::scenario::output::fmt6;
    writeln!(
        w,
        "# matrix={name},variant={},n_intervals={},rows={},cols={}",
        layout.variant,
        layout.n_intervals,
        m.nrows(),
        m.ncols()
    )?;
    writeln!(w, "{}", column_labels.join(","))?;
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| fmt6(*v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}
