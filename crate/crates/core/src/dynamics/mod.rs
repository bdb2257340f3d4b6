//! Single-excitation dynamics of qubits coupled to the discretized Floquet bath of a ring.

mod evolve;
mod field;
mod modes;
mod network;
mod system;

pub use evolve::{evolve, evolve_with, fit_decay_rate, Trajectory};
pub use field::{
    field_energy, field_on_ring, fluxes, photon_population, plane_wave_amplitudes, reconstruct_field, FieldSnapshot,
    NEAR_FIELD_EXCLUSION,
};
pub use modes::{discretize_modes, Mode, ModeSet, WEIGHT_FLOOR};
pub use network::{
    analyze_two_node, fit_arrival_delay, leading_edge, refined_peak, two_node_run, TwoNodeReport, TwoNodeRun,
};
pub use system::{EmissionSystem, WINDOW_MARGIN_GAMMA0};

/// Run length for a single-emitter measurement: the decay is complete and no photon wraps around.
pub fn default_t_final(gamma_total: f64, length: f64, vg_max: f64) -> f64 {
    (8.0 / gamma_total).min(0.8 * 0.5 * length / vg_max)
}
