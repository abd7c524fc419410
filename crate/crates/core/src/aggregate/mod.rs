//! Population models of the connected fleet.
//!
//! The connected EVs are binned by connection mode and SOC interval into a
//! proportion vector `x`. Between telemetry updates the vector evolves as
//!
//! ```text
//! x(k+1) = A x(k) + B u(k) + w(k)
//! y(k)   = C x(k) + v(k),        y = (P_EV, P_u, P_l)
//! ```
//!
//! with `A` the interval-crossing Markov matrix, `B` the incidence matrix of
//! the control moves, `w` the plug-in/plug-out churn and `C` the per-state
//! power coefficients. The conventional variant has 3N + 1 states; the
//! extended one adds absorbing idle-at-S_min and idle-at-S_max states so
//! that empty and full batteries stop contributing flexibility they do not
//! have.

mod layout;
mod matrices;
mod model;
mod state;

pub use layout::{Mode, StateKind, StateLayout, Variant};
pub use matrices::{
    build_input_matrix, build_output_matrix, estimate_transition_matrix, estimate_transition_rates,
    output_coefficients, transition_matrix, write_matrix_csv, SystemMatrices, TransitionRates,
};
pub use model::{
    compute_noise, output, output_with_noise, predict, FlexibilityEnvelope, ProcessNoise,
    MASS_TOLERANCE, NEGATIVE_TOLERANCE,
};
pub use state::{
    average_charge_power, average_discharge_power, discretize, discretize_entries, resync,
    state_counts, AggregateState,
};
