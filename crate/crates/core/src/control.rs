//! Power-tracking dispatch.
//!
//! A requested change in fleet injection is turned into an input vector `u`
//! (population shares to move between connection modes), broadcast as
//! per-interval switching probabilities, and actuated by each EV comparing
//! its own uniform draw against the probability addressed to its state.

use ndarray::Array1;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aggregate::{AggregateState, Mode, StateLayout, SystemMatrices};
use crate::error::{Error, Result};
use crate::fleet::{Connection, EvOperationalState, EvTravelPlan};

const PROBABILITY_SLACK: f64 = 1e-12;

/// Input vector chosen for one control step.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchPlan {
    /// Moves to broadcast now; every entry is bounded by its source mass.
    pub u: Array1<f64>,
    /// Second hop of charging-to-discharging (or reverse) moves, which needs
    /// the first hop to land before it can be broadcast.
    pub deferred: Array1<f64>,
    /// Power change of `u` and `deferred` together, kW.
    pub achieved_delta_kw: f64,
    /// Power change of `u` alone, kW.
    pub immediate_delta_kw: f64,
    pub saturated: bool,
}

impl DispatchPlan {
    pub fn idle(layout: &StateLayout) -> Self {
        Self {
            u: Array1::zeros(layout.input_dimension()),
            deferred: Array1::zeros(layout.input_dimension()),
            achieved_delta_kw: 0.0,
            immediate_delta_kw: 0.0,
            saturated: false,
        }
    }
}

struct Budget {
    remaining: f64,
}

impl Budget {
    /// Takes as much of `mass` as the remaining power allows at `kw_per_unit`.
    fn take(&mut self, mass: f64, kw_per_unit: f64) -> f64 {
        if mass <= 0.0 || kw_per_unit <= 0.0 || self.remaining <= 0.0 {
            return 0.0;
        }
        let amount = mass.min(self.remaining / kw_per_unit);
        self.remaining -= amount * kw_per_unit;
        amount
    }
}

/// Greedy two-stage allocation of a power change `delta_p` (kW, positive =
/// more injection into the grid).
///
/// For `delta_p > 0` charging EVs are first switched to idle, then idle EVs
/// to discharging; for `delta_p < 0` discharging EVs go idle first, then idle
/// EVs start charging. Discharging-direction moves take the highest SOC
/// intervals first and charging-direction moves the lowest. If the target
/// exceeds what the modelled population can deliver the plan is saturated.
///
/// A source can give up at most `min(x, A x)` of its mass, so that the next
/// prediction `A x + B u` stays non-negative.
pub fn plan_dispatch(delta_p: f64, state: &AggregateState, mats: &SystemMatrices) -> DispatchPlan {
    let l = state.layout;
    let mut plan = DispatchPlan::idle(&l);
    if delta_p == 0.0 || !delta_p.is_finite() {
        return plan;
    }
    if state.is_empty() {
        plan.saturated = true;
        return plan;
    }
    let n = l.n_intervals;
    let drifted = mats.a.dot(&state.x);
    let x: Array1<f64> = state
        .x
        .iter()
        .zip(&drifted)
        .map(|(a, b)| a.min(*b).max(0.0))
        .collect();
    let kw_ac = state.n_ev as f64 * state.p_ac;
    let kw_ad = state.n_ev as f64 * state.p_ad;
    let idx = |mode, k| l.input_index(mode, k).expect("mode exists in layout");
    let mut budget = Budget {
        remaining: delta_p.abs(),
    };

    let (stage1, stage1_kw, stage2, stage2_kw, boundary): (
        Mode,
        f64,
        Mode,
        f64,
        Option<(Mode, usize)>,
    );
    let order: Vec<usize>;
    if delta_p > 0.0 {
        stage1 = Mode::ChargeToIdle;
        stage1_kw = kw_ac;
        stage2 = Mode::IdleToDischarge;
        stage2_kw = kw_ad;
        boundary = l.is_max().map(|s| (Mode::MaxIdleToDischarge, s));
        order = (1..=n).rev().collect();
    } else {
        stage1 = Mode::DischargeToIdle;
        stage1_kw = kw_ad;
        stage2 = Mode::IdleToCharge;
        stage2_kw = kw_ac;
        boundary = l.is_min().map(|s| (Mode::MinIdleToCharge, s));
        order = (1..=n).collect();
    }
    let stage1_source = |k| if delta_p > 0.0 { l.cs(k) } else { l.ds(k) };

    for &k in &order {
        plan.u[idx(stage1, k)] = budget.take(x[stage1_source(k)], stage1_kw);
    }
    if let Some((mode, source)) = boundary {
        plan.u[idx(mode, 1)] = budget.take(x[source], stage2_kw);
    }
    for &k in &order {
        plan.u[idx(stage2, k)] = budget.take(x[l.is(k)], stage2_kw);
    }
    let immediate_remaining = budget.remaining;
    for &k in &order {
        let landed = plan.u[idx(stage1, k)];
        plan.deferred[idx(stage2, k)] = budget.take(landed, stage2_kw);
    }

    let sign = delta_p.signum();
    plan.immediate_delta_kw = sign * (delta_p.abs() - immediate_remaining);
    plan.achieved_delta_kw = sign * (delta_p.abs() - budget.remaining);
    plan.saturated = budget.remaining > 1e-9 * delta_p.abs();
    plan
}

/// Broadcast form of `u`: one probability per input element.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchCommand {
    pub layout: StateLayout,
    pub probabilities: Vec<f64>,
    pub issue_time: f64,
    /// Per state index: up to two (probability, mode) pairs leaving that state.
    routes: Vec<Vec<(f64, Mode)>>,
}

/// One nonzero broadcast entry, as written to audit logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub issue_time: f64,
    pub mode: Mode,
    pub interval: usize,
    pub probability: f64,
}

impl DispatchCommand {
    pub fn new(layout: StateLayout, probabilities: Vec<f64>, issue_time: f64) -> Result<Self> {
        if probabilities.len() != layout.input_dimension() {
            return Err(Error::Dimension {
                expected: layout.input_dimension(),
                actual: probabilities.len(),
            });
        }
        let mut routes = vec![Vec::new(); layout.dimension()];
        for (j, &p) in probabilities.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidProbability { index: j, value: p });
            }
            if p > 0.0 {
                let (src, _) = layout.input_edge(j);
                routes[src].push((p, layout.mode_of_input(j).0));
            }
        }
        for (src, r) in routes.iter().enumerate() {
            let total: f64 = r.iter().map(|(p, _)| p).sum();
            if total > 1.0 + PROBABILITY_SLACK {
                return Err(Error::InvalidProbability {
                    index: src,
                    value: total,
                });
            }
        }
        Ok(Self {
            layout,
            probabilities,
            issue_time,
            routes,
        })
    }

    pub fn none(layout: StateLayout, issue_time: f64) -> Self {
        Self::new(layout, vec![0.0; layout.input_dimension()], issue_time)
            .expect("zero command is valid")
    }

    pub fn probability(&self, mode: Mode, interval: usize) -> f64 {
        self.layout
            .input_index(mode, interval)
            .map_or(0.0, |j| self.probabilities[j])
    }

    pub fn records(&self) -> Vec<CommandRecord> {
        self.probabilities
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(j, &probability)| {
                let (mode, interval) = self.layout.mode_of_input(j);
                CommandRecord {
                    issue_time: self.issue_time,
                    mode,
                    interval,
                    probability,
                }
            })
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W, header: bool) -> std::io::Result<()> {
        use crate::scenario::output::fmt6;
        if header {
            writeln!(w, "issue_time_h,mode,interval,probability")?;
        }
        for r in self.records() {
            writeln!(
                w,
                "{},{},{},{}",
                fmt6(r.issue_time),
                r.mode.label(),
                r.interval,
                fmt6(r.probability)
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.records()).expect("records serialize")
    }
}

/// Switching probability `u_j / x_source(j)` for every input element.
pub fn to_switching_probabilities(
    plan: &DispatchPlan,
    state: &AggregateState,
    issue_time: f64,
) -> Result<DispatchCommand> {
    let l = state.layout;
    let mut probabilities = vec![0.0; l.input_dimension()];
    for (j, p) in probabilities.iter_mut().enumerate() {
        let u = plan.u[j];
        if u <= 0.0 {
            continue;
        }
        let (src, _) = l.input_edge(j);
        let mass = state.x[src];
        if mass <= 0.0 {
            continue;
        }
        let ratio = u / mass;
        if ratio > 1.0 + PROBABILITY_SLACK {
            return Err(Error::InvalidProbability {
                index: j,
                value: ratio,
            });
        }
        *p = ratio.min(1.0);
    }
    DispatchCommand::new(l, probabilities, issue_time)
}

/// Applies `command` to one EV: draw `alpha ~ U(0,1)` and switch if it falls
/// below the probability addressed to the EV's state. Forced-charging and
/// disconnected EVs ignore commands. A switch that the battery cannot honour
/// (charging when full, discharging when empty) leaves the EV where it is.
pub fn actuate<R: Rng + ?Sized>(
    state: &EvOperationalState,
    plan: &EvTravelPlan,
    command: &DispatchCommand,
    rng: &mut R,
) -> Connection {
    if matches!(
        state.connection,
        Connection::ForcedCharging | Connection::Disconnected
    ) {
        return state.connection;
    }
    let alpha: f64 = rng.random();
    let Some(index) = command.layout.classify(state.connection, state.soc) else {
        return state.connection;
    };
    let mut cumulative = 0.0;
    for &(p, mode) in &command.routes[index] {
        cumulative += p;
        if alpha < cumulative {
            let target = mode.target();
            let blocked = match target {
                Connection::Charging => state.soc >= plan.soc_max,
                Connection::Discharging => state.soc <= plan.soc_min,
                _ => false,
            };
            return if blocked { state.connection } else { target };
        }
    }
    state.connection
}
