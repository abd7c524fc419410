use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metrics::{error_metrics, rms_error};
use crate::aggregate::{
    compute_noise, estimate_transition_rates, output, output_with_noise, predict, resync,
    AggregateState, FlexibilityEnvelope, StateLayout, SystemMatrices, TransitionRates, Variant,
};
use crate::config::SimulationConfig;
use crate::control::{plan_dispatch, to_switching_probabilities, CommandRecord};
use crate::error::{Error, Result};
use crate::fleet::{sample_fleet, Connection, EvOperationalState, EvRecord, Fleet, FleetSnapshot};
use crate::imm::{imm_flexibility, imm_power};

const MATRIX_SEED_SALT: u64 = 0xa11c_e5ee_d000_0002;
const NOISE_SEED_SALT: u64 = 0x0b5e_7ae5_0000_0003;
const PROBE_SEED_SALT: u64 = 0x9_0be0_0000_0004;

/// One aggregate model following the fleet.
#[derive(Debug, Clone)]
pub struct ModelTrack {
    pub variant: Variant,
    pub matrices: SystemMatrices,
    pub state: AggregateState,
}

impl ModelTrack {
    pub fn new(
        config: &SimulationConfig,
        variant: Variant,
        rates: TransitionRates,
        snapshot: &FleetSnapshot,
    ) -> Result<Self> {
        let layout = StateLayout::new(
            config.n_intervals,
            variant,
            config.distribution.soc_min,
            config.distribution.soc_max,
        )?;
        let mut matrices = SystemMatrices::new(layout, rates);
        let state = resync(snapshot, &layout);
        matrices.refresh_output(&state);
        Ok(Self {
            variant,
            matrices,
            state,
        })
    }

    pub fn layout(&self) -> StateLayout {
        self.matrices.layout
    }

    pub fn envelope(&self) -> FlexibilityEnvelope {
        output(&self.state, &self.matrices.c)
    }

    /// P_EV one step ahead with no input and no churn.
    pub fn free_response_power(&self) -> f64 {
        if self.state.is_empty() {
            return 0.0;
        }
        self.matrices
            .c
            .row(0)
            .dot(&self.matrices.a.dot(&self.state.x))
    }

    /// Replaces the state with telemetry.
    pub fn observe(&mut self, snapshot: &FleetSnapshot) {
        self.state = resync(snapshot, &self.layout());
        self.matrices.refresh_output(&self.state);
    }

    /// Advances by one step of the recursion using the churn in `snapshot`,
    /// or resyncs to it when `resync_now` is set.
    pub fn advance(
        &mut self,
        u: Option<&Array1<f64>>,
        snapshot: &FleetSnapshot,
        resync_now: bool,
    ) -> Result<()> {
        if resync_now {
            self.observe(snapshot);
            return Ok(());
        }
        let layout = self.layout();
        match compute_noise(
            self.state.n_ev,
            &snapshot.plug_ins,
            &snapshot.plug_outs,
            &layout,
        ) {
            Ok(noise) => {
                let zero;
                let u = match u {
                    Some(u) => u,
                    None => {
                        zero = Array1::zeros(layout.input_dimension());
                        &zero
                    }
                };
                self.state = predict(&self.state, &self.matrices, u, &noise)?;
                self.matrices.refresh_output(&self.state);
            }
            Err(Error::FleetEmptied) => self.observe(snapshot),
            Err(e) => return Err(e),
        }
        Ok(())
    }
}

/// Envelope and state series of one model over a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSeries {
    pub variant: Variant,
    pub layout: StateLayout,
    /// Whether this model produced the dispatch commands.
    pub driver: bool,
    pub envelopes: Vec<FlexibilityEnvelope>,
    pub states: Vec<Array1<f64>>,
}

/// One row of the error table, in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub n_ev: usize,
    pub variant: Variant,
    pub upper_err: Option<f64>,
    pub lower_err: Option<f64>,
    pub power_err: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingSummary {
    pub driver: Variant,
    pub rms_kw: f64,
    /// Fleet size times mean rated charging power, kW.
    pub fleet_rated_kw: f64,
    pub rms_pct: f64,
    pub saturated_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub n_ev: usize,
    pub times: Vec<f64>,
    pub reference: Option<Vec<f64>>,
    pub imm: Vec<FlexibilityEnvelope>,
    pub models: Vec<ModelSeries>,
    pub commands: Vec<CommandRecord>,
    pub tracking: Option<TrackingSummary>,
}

impl RunResult {
    pub fn model(&self, variant: Variant) -> Option<&ModelSeries> {
        self.models.iter().find(|m| m.variant == variant)
    }

    pub fn imm_component(&self, pick: fn(&FlexibilityEnvelope) -> f64) -> Vec<f64> {
        self.imm.iter().map(pick).collect()
    }

    pub fn errors(&self) -> Vec<ErrorRow> {
        let base_u = self.imm_component(|e| e.p_u);
        let base_l = self.imm_component(|e| e.p_l);
        let base_p = self.imm_component(|e| e.p_ev);
        self.models
            .iter()
            .map(|m| {
                let series = |pick: fn(&FlexibilityEnvelope) -> f64| {
                    m.envelopes.iter().map(pick).collect::<Vec<_>>()
                };
                ErrorRow {
                    n_ev: self.n_ev,
                    variant: m.variant,
                    upper_err: error_metrics(&series(|e| e.p_u), &base_u).ok(),
                    lower_err: error_metrics(&series(|e| e.p_l), &base_l).ok(),
                    power_err: error_metrics(&series(|e| e.p_ev), &base_p).ok(),
                }
            })
            .collect()
    }
}

struct Recorder {
    n_ev: usize,
    times: Vec<f64>,
    reference: Vec<f64>,
    imm: Vec<FlexibilityEnvelope>,
    models: Vec<ModelSeries>,
    noise_std: [f64; 3],
    noise_rng: ChaCha8Rng,
}

impl Recorder {
    fn new(
        config: &SimulationConfig,
        n_ev: usize,
        tracks: &[&ModelTrack],
        driver: Option<Variant>,
    ) -> Self {
        let capacity = config.horizon_steps() + 1;
        Self {
            n_ev,
            times: Vec::with_capacity(capacity),
            reference: Vec::new(),
            imm: Vec::with_capacity(capacity),
            models: tracks
                .iter()
                .map(|t| ModelSeries {
                    variant: t.variant,
                    layout: t.layout(),
                    driver: driver == Some(t.variant),
                    envelopes: Vec::with_capacity(capacity),
                    states: Vec::with_capacity(capacity),
                })
                .collect(),
            noise_std: config.measurement_noise_std,
            noise_rng: ChaCha8Rng::seed_from_u64(config.seed ^ NOISE_SEED_SALT),
        }
    }

    fn push(
        &mut self,
        time: f64,
        reference: Option<f64>,
        snapshot: &FleetSnapshot,
        tracks: &[&ModelTrack],
    ) {
        self.times.push(time);
        if let Some(r) = reference {
            self.reference.push(r);
        }
        self.imm.push(imm_flexibility(snapshot));
        for (series, track) in self.models.iter_mut().zip(tracks) {
            let env = if self.noise_std.iter().any(|s| *s > 0.0) {
                output_with_noise(
                    &track.state,
                    &track.matrices.c,
                    self.noise_std,
                    &mut self.noise_rng,
                )
            } else {
                track.envelope()
            };
            series.envelopes.push(env);
            series.states.push(track.state.x.clone());
        }
    }

    fn finish(self, commands: Vec<CommandRecord>, tracking: Option<TrackingSummary>) -> RunResult {
        RunResult {
            n_ev: self.n_ev,
            times: self.times,
            reference: (!self.reference.is_empty()).then_some(self.reference),
            imm: self.imm,
            models: self.models,
            commands,
            tracking,
        }
    }
}

fn fleet_records(config: &SimulationConfig) -> Result<Vec<EvRecord>> {
    if config.n_ev == 0 {
        Ok(Vec::new())
    } else {
        sample_fleet(&config.distribution, config.n_ev, config.seed)
    }
}

/// Sampled fleet advanced through the uncontrolled warm-up, positioned at t = 0.
pub fn initial_fleet(config: &SimulationConfig) -> Result<Fleet> {
    let records = fleet_records(config)?;
    let dt = config.dt_hours();
    let warmup = config.warmup_steps();
    let mut fleet = Fleet::new(&records, -(warmup as f64) * dt, dt, config.seed)?;
    fleet.run_uncontrolled(warmup)?;
    Ok(fleet)
}

fn transition_rates(config: &SimulationConfig) -> Result<TransitionRates> {
    let layout = StateLayout::new(
        config.n_intervals,
        Variant::Essm,
        config.distribution.soc_min,
        config.distribution.soc_max,
    )?;
    estimate_transition_rates(
        &config.distribution,
        &layout,
        config.dt_hours(),
        config.transition_samples,
        config.seed ^ MATRIX_SEED_SALT,
    )
}

/// Uncontrolled day: the fleet charges freely while every configured model
/// predicts its envelope, resyncing to telemetry every resync period.
pub fn run_prediction_experiment(config: &SimulationConfig) -> Result<RunResult> {
    config.validate()?;
    let rates = transition_rates(config)?;
    let mut fleet = initial_fleet(config)?;
    let mut snapshot = fleet.snapshot();
    let mut tracks = config
        .variants
        .iter()
        .map(|v| ModelTrack::new(config, *v, rates, &snapshot))
        .collect::<Result<Vec<_>>>()?;

    let steps = config.horizon_steps();
    let resync_every = config.steps_per_resync();
    let dt = config.dt_hours();
    let mut rec = Recorder::new(
        config,
        config.n_ev,
        &tracks.iter().collect::<Vec<_>>(),
        None,
    );
    for k in 0..=steps {
        rec.push(
            k as f64 * dt,
            None,
            &snapshot,
            &tracks.iter().collect::<Vec<_>>(),
        );
        if k == steps {
            break;
        }
        snapshot = fleet.step(None)?;
        for t in &mut tracks {
            t.advance(None, &snapshot, (k + 1) % resync_every == 0)?;
        }
    }
    Ok(rec.finish(Vec::new(), None))
}

/// Closed-loop tracking of `reference` (one value per recorded step, kW).
///
/// Each configured variant in turn drives a clone of the same warmed-up
/// fleet. The command issued at step `k` aims at `reference[k + 1]`; the
/// driving model is advanced with its own input between resyncs, the other
/// models observe telemetry every step.
pub fn run_tracking_experiment(
    config: &SimulationConfig,
    reference: &[f64],
) -> Result<Vec<RunResult>> {
    config.validate()?;
    let steps = config.horizon_steps();
    if reference.len() != steps + 1 {
        return Err(Error::LengthMismatch(reference.len(), steps + 1));
    }
    let rates = transition_rates(config)?;
    let base = initial_fleet(config)?;
    let fleet_rated_kw: f64 = base.evs().iter().map(|e| e.chars.rated_charge_power).sum();
    let resync_every = config.steps_per_resync();
    let dt = config.dt_hours();

    let mut runs = Vec::with_capacity(config.variants.len());
    for &driver in &config.variants {
        let mut fleet = base.clone();
        let mut snapshot = fleet.snapshot();
        let mut tracks = config
            .variants
            .iter()
            .map(|v| ModelTrack::new(config, *v, rates, &snapshot))
            .collect::<Result<Vec<_>>>()?;
        let di = config
            .variants
            .iter()
            .position(|v| *v == driver)
            .expect("driver is configured");
        let mut rec = Recorder::new(
            config,
            config.n_ev,
            &tracks.iter().collect::<Vec<_>>(),
            Some(driver),
        );
        let mut commands = Vec::new();
        let mut saturated_steps = 0;

        for k in 0..=steps {
            rec.push(
                k as f64 * dt,
                Some(reference[k]),
                &snapshot,
                &tracks.iter().collect::<Vec<_>>(),
            );
            if k == steps {
                break;
            }
            let model = &tracks[di];
            let delta = reference[k + 1] - model.free_response_power();
            let plan = plan_dispatch(delta, &model.state, &model.matrices);
            saturated_steps += usize::from(plan.saturated);
            let command = to_switching_probabilities(&plan, &model.state, k as f64 * dt)?;
            commands.extend(command.records());
            snapshot = fleet.step(Some(&command))?;
            let resync_now = (k + 1) % resync_every == 0;
            for (i, t) in tracks.iter_mut().enumerate() {
                if i == di {
                    t.advance(Some(&plan.u), &snapshot, resync_now)?;
                } else {
                    t.observe(&snapshot);
                }
            }
        }

        let delivered: Vec<f64> = rec.imm[1..].iter().map(|e| e.p_ev).collect();
        let rms_kw = rms_error(&delivered, &reference[1..])?;
        let summary = TrackingSummary {
            driver,
            rms_kw,
            fleet_rated_kw,
            rms_pct: if fleet_rated_kw > 0.0 {
                100.0 * rms_kw / fleet_rated_kw
            } else {
                0.0
            },
            saturated_steps,
        };
        runs.push(rec.finish(commands, Some(summary)));
    }
    Ok(runs)
}

/// Prediction runs over several fleet sizes; returns every error row.
pub fn run_sweep(config: &SimulationConfig, sizes: &[usize]) -> Result<Vec<ErrorRow>> {
    let mut rows = Vec::new();
    for &n_ev in sizes {
        let cfg = SimulationConfig {
            n_ev,
            ..config.clone()
        };
        rows.extend(run_prediction_experiment(&cfg)?.errors());
    }
    Ok(rows)
}

/// The two boundary situations in which the conventional model misjudges
/// what the fleet can do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCase {
    /// Most idle EVs are full; the grid asks the fleet to consume more.
    FullyChargedConsumption,
    /// Most idle EVs are empty; the grid asks the fleet to provide more.
    FullyDischargedProvision,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOutcome {
    pub variant: Variant,
    pub planned_delta_kw: f64,
    pub saturated: bool,
    pub delivered_delta_kw: f64,
    pub error_kw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaturationProbe {
    pub case: BoundaryCase,
    pub request_kw: f64,
    pub outcomes: Vec<ProbeOutcome>,
}

impl SaturationProbe {
    pub fn outcome(&self, variant: Variant) -> Option<&ProbeOutcome> {
        self.outcomes.iter().find(|o| o.variant == variant)
    }
}

/// One control step against an idle fleet in which `boundary_share` of the
/// EVs sit exactly on a SOC bound and the rest idle inside the adjacent
/// interval. The request is `request_share` of what the non-boundary EVs
/// can actually deliver; each variant plans it against a clone of the fleet.
pub fn run_saturation_probe(
    config: &SimulationConfig,
    case: BoundaryCase,
    boundary_share: f64,
    request_share: f64,
) -> Result<SaturationProbe> {
    config.validate()?;
    if config.n_ev == 0 {
        return Err(Error::InvalidConfig(
            "the probe needs at least one EV".into(),
        ));
    }
    let dist = &config.distribution;
    let (soc_min, soc_max) = (dist.soc_min, dist.soc_max);
    let width = (soc_max - soc_min) / config.n_intervals as f64;
    let start = match case {
        BoundaryCase::FullyChargedConsumption => 6.0,
        BoundaryCase::FullyDischargedProvision => 18.0,
    };
    let mut records = sample_fleet(dist, config.n_ev, config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ PROBE_SEED_SALT);
    let n_boundary = (boundary_share.clamp(0.0, 1.0) * config.n_ev as f64).round() as usize;
    let states: Vec<EvOperationalState> = records
        .iter_mut()
        .enumerate()
        .map(|(i, r)| {
            r.plan.plug_in_time = start - 1.0;
            r.plan.plug_out_time = start + 10.0;
            r.plan.demanded_soc = soc_min;
            let inside = width * rng.random_range(0.05..0.95);
            let soc = match (case, i < n_boundary) {
                (BoundaryCase::FullyChargedConsumption, true) => soc_max,
                (BoundaryCase::FullyChargedConsumption, false) => soc_max - inside,
                (BoundaryCase::FullyDischargedProvision, true) => soc_min,
                (BoundaryCase::FullyDischargedProvision, false) => soc_min + inside,
            };
            EvOperationalState {
                soc,
                connection: Connection::Idle,
            }
        })
        .collect();
    let base = Fleet::with_states(&records, &states, start, config.dt_hours(), config.seed)?;
    let before = base.snapshot();
    let capability: f64 = before
        .entries
        .iter()
        .filter(|e| e.soc > soc_min && e.soc < soc_max)
        .map(|e| match case {
            BoundaryCase::FullyChargedConsumption => -e.rated_charge_power,
            BoundaryCase::FullyDischargedProvision => e.rated_discharge_power,
        })
        .sum();
    let request_kw = request_share * capability;
    let rates = transition_rates(config)?;

    let mut outcomes = Vec::new();
    for &variant in &config.variants {
        let mut fleet = base.clone();
        let track = ModelTrack::new(config, variant, rates, &before)?;
        let plan = plan_dispatch(request_kw, &track.state, &track.matrices);
        let command = to_switching_probabilities(&plan, &track.state, start)?;
        let after = fleet.step(Some(&command))?;
        let delivered = imm_power(&after) - imm_power(&before);
        outcomes.push(ProbeOutcome {
            variant,
            planned_delta_kw: plan.achieved_delta_kw,
            saturated: plan.saturated,
            delivered_delta_kw: delivered,
            error_kw: (delivered - request_kw).abs(),
        });
    }
    Ok(SaturationProbe {
        case,
        request_kw,
        outcomes,
    })
}
