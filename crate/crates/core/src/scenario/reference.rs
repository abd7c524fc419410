use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aggregate::FlexibilityEnvelope;

/// Share of the band the reference levels are drawn from.
pub const CENTRAL_BAND: f64 = 0.8;

/// Piecewise-constant reference: every `period_steps` steps a new level is
/// drawn uniformly from the central 80 % of the band `[p_l, p_u]` at that
/// step and held until the next draw.
pub fn generate_reference(
    envelopes: &[FlexibilityEnvelope],
    period_steps: usize,
    seed: u64,
) -> Vec<f64> {
    let period = period_steps.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level = 0.0;
    envelopes
        .iter()
        .enumerate()
        .map(|(k, env)| {
            if k % period == 0 {
                let margin = 0.5 * (1.0 - CENTRAL_BAND) * (env.p_u - env.p_l);
                let (lo, hi) = (env.p_l + margin, env.p_u - margin);
                level = if hi > lo {
                    rng.random_range(lo..=hi)
                } else {
                    env.p_l
                };
            }
            level
        })
        .collect()
}

/// Baseline power with a disturbance at the start of every period: for
/// `duration_steps` the reference jumps to a level drawn uniformly from the
/// central 80 % of `[p_l, p_u]` at the disturbance onset, then returns to
/// `baseline`.
pub fn disturbance_reference(
    baseline: &[f64],
    envelopes: &[FlexibilityEnvelope],
    period_steps: usize,
    duration_steps: usize,
    seed: u64,
) -> Vec<f64> {
    let period = period_steps.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level = 0.0;
    baseline
        .iter()
        .zip(envelopes)
        .enumerate()
        .map(|(k, (&base, env))| {
            let phase = k % period;
            if phase == 0 {
                let margin = 0.5 * (1.0 - CENTRAL_BAND) * (env.p_u - env.p_l);
                let (lo, hi) = (env.p_l + margin, env.p_u - margin);
                level = if hi > lo {
                    rng.random_range(lo..=hi)
                } else {
                    env.p_l
                };
            }
            if phase < duration_steps {
                level
            } else {
                base
            }
        })
        .collect()
}
