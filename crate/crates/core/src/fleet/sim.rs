use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dynamics::{fcs_required, step_soc};
use super::sampling::EvRecord;
use super::types::{
    Connection, EvCharacteristics, EvOperationalState, EvTravelPlan, FleetSnapshot, SnapshotEntry,
};
use crate::control::{actuate, DispatchCommand};
use crate::error::{Error, Result};

const ACTUATION_STREAM_SALT: u64 = 0x5eed_a17a_0000_0001;

/// One simulated vehicle.
#[derive(Debug, Clone)]
pub struct Ev {
    pub id: usize,
    pub chars: EvCharacteristics,
    pub plan: EvTravelPlan,
    pub state: EvOperationalState,
    rng: ChaCha8Rng,
}

impl Ev {
    fn entry(&self) -> SnapshotEntry {
        SnapshotEntry {
            ev_id: self.id,
            soc: self.state.soc,
            connection: self.state.connection,
            rated_charge_power: self.chars.rated_charge_power,
            rated_discharge_power: self.chars.rated_discharge_power,
            soc_min: self.plan.soc_min,
            soc_max: self.plan.soc_max,
        }
    }

    fn plug_in(&mut self) {
        let soc = self
            .plan
            .initial_soc
            .clamp(self.plan.soc_min, self.plan.soc_max);
        let connection = if soc >= self.plan.soc_max {
            Connection::Idle
        } else {
            Connection::Charging
        };
        self.state = EvOperationalState { soc, connection };
    }

    /// FCS promotion, actuation, SOC update and boundary absorption.
    fn advance(&mut self, command: Option<&DispatchCommand>, t: f64, dt: f64) {
        if !self.state.connection.is_connected() {
            return;
        }
        if self.state.connection != Connection::ForcedCharging
            && fcs_required(self.state.soc, &self.plan, &self.chars, t)
        {
            self.state.connection = Connection::ForcedCharging;
        }
        if let Some(cmd) = command {
            self.state.connection = actuate(&self.state, &self.plan, cmd, &mut self.rng);
        }
        self.state.soc = step_soc(&self.state, &self.chars, &self.plan, dt);
        match self.state.connection {
            Connection::Charging | Connection::ForcedCharging
                if self.state.soc >= self.plan.soc_max =>
            {
                self.state.connection = Connection::Idle;
            }
            Connection::Discharging if self.state.soc <= self.plan.soc_min => {
                self.state.connection = Connection::Idle;
            }
            _ => {}
        }
    }
}

/// The ground-truth fleet.
///
/// Time advances on a fixed grid `start + k * dt`. Each step promotes EVs to
/// forced charging where the departure deadline binds, applies the broadcast
/// command, moves every SOC, and then processes the plug events that fall on
/// the new time. Every EV owns its own random stream, so results do not
/// depend on iteration order.
#[derive(Debug, Clone)]
pub struct Fleet {
    evs: Vec<Ev>,
    start: f64,
    dt: f64,
    steps: u64,
}

impl Fleet {
    /// Builds the fleet at `start` (hours) and connects every EV whose session
    /// covers that instant.
    pub fn new(records: &[EvRecord], start: f64, dt: f64, seed: u64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidConfig("dt must be positive".into()));
        }
        let evs = records
            .iter()
            .enumerate()
            .map(|(id, r)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ACTUATION_STREAM_SALT);
                rng.set_stream(id as u64);
                let mut ev = Ev {
                    id,
                    chars: r.chars,
                    plan: r.plan,
                    state: EvOperationalState {
                        soc: r.plan.initial_soc,
                        connection: Connection::Disconnected,
                    },
                    rng,
                };
                if r.plan.is_connected(start) {
                    ev.plug_in();
                }
                ev
            })
            .collect();
        Ok(Self {
            evs,
            start,
            dt,
            steps: 0,
        })
    }

    /// Fleet whose EVs start in the given operational states instead of
    /// plugging in fresh. States marked disconnected stay so until their
    /// next session starts.
    pub fn with_states(
        records: &[EvRecord],
        states: &[EvOperationalState],
        start: f64,
        dt: f64,
        seed: u64,
    ) -> Result<Self> {
        if records.len() != states.len() {
            return Err(Error::LengthMismatch(records.len(), states.len()));
        }
        let mut fleet = Self::new(records, start, dt, seed)?;
        for (ev, s) in fleet.evs.iter_mut().zip(states) {
            ev.state = *s;
        }
        Ok(fleet)
    }

    pub fn time(&self) -> f64 {
        self.start + self.steps as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn evs(&self) -> &[Ev] {
        &self.evs
    }

    pub fn len(&self) -> usize {
        self.evs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.evs.is_empty()
    }

    pub fn n_connected(&self) -> usize {
        self.evs
            .iter()
            .filter(|e| e.state.connection.is_connected())
            .count()
    }

    /// Connected population at the current time, without events.
    pub fn snapshot(&self) -> FleetSnapshot {
        FleetSnapshot {
            time: self.time(),
            entries: self
                .evs
                .iter()
                .filter(|e| e.state.connection.is_connected())
                .map(Ev::entry)
                .collect(),
            plug_ins: Vec::new(),
            plug_outs: Vec::new(),
        }
    }

    /// Advances one step of `dt` under an optional broadcast command.
    pub fn step(&mut self, command: Option<&DispatchCommand>) -> Result<FleetSnapshot> {
        if let Some(cmd) = command {
            if let Some((index, &value)) = cmd
                .probabilities
                .iter()
                .enumerate()
                .find(|(_, p)| !(0.0..=1.0).contains(*p))
            {
                return Err(Error::InvalidProbability { index, value });
            }
        }
        let t = self.time();
        let dt = self.dt;
        for ev in &mut self.evs {
            ev.advance(command, t, dt);
        }
        self.steps += 1;
        let now = self.time();

        let mut plug_ins = Vec::new();
        let mut plug_outs = Vec::new();
        let mut entries = Vec::with_capacity(self.evs.len());
        for ev in &mut self.evs {
            let connected = ev.state.connection.is_connected();
            let due = ev.plan.is_connected(now);
            if connected && !due {
                plug_outs.push(ev.entry());
                ev.state.connection = Connection::Disconnected;
            } else if !connected && due {
                ev.plug_in();
                plug_ins.push(ev.entry());
            }
            if ev.state.connection.is_connected() {
                entries.push(ev.entry());
            }
        }
        Ok(FleetSnapshot {
            time: now,
            entries,
            plug_ins,
            plug_outs,
        })
    }

    /// Runs `steps` uncontrolled steps and returns the last snapshot.
    pub fn run_uncontrolled(&mut self, steps: usize) -> Result<FleetSnapshot> {
        let mut last = self.snapshot();
        for _ in 0..steps {
            last = self.step(None)?;
        }
        Ok(last)
    }
}
