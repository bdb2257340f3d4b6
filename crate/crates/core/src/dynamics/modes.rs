use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::floquet::{solve_band, BandStructure, C64};
use crate::params::WaveguideSpec;

/// Floquet components lighter than this do not place a mode inside the window.
pub const WEIGHT_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mode {
    /// Zero-based band index.
    pub l: usize,
    /// k = m·Δk.
    pub m: i64,
    pub k: f64,
    pub omega: f64,
    pub u: Vec<C64>,
}

/// Bath modes of a ring of `n_cells` modulation wavelengths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeSet {
    pub spec: WaveguideSpec,
    pub n_cells: usize,
    pub length: f64,
    pub window: (f64, f64),
    pub modes: Vec<Mode>,
}

impl ModeSet {
    pub fn dk(&self) -> f64 {
        self.spec.kd / self.n_cells as f64
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Level spacing of the unmodulated line, v₀Δk.
    pub fn free_spectral_range(&self) -> f64 {
        self.spec.v0() * self.dk()
    }

    /// Wavenumber of harmonic `i` (n = i − n_floquet) of mode `j`.
    pub fn q(&self, j: usize, i: usize) -> f64 {
        let n = i as f64 - self.spec.n_floquet as f64;
        self.modes[j].k + n * self.spec.kd
    }
}

/// Quasi-momenta m·Δk in (−k_d/2, k_d/2], so every harmonic is periodic on the ring.
fn ring_indices(n_cells: usize) -> std::ops::RangeInclusive<i64> {
    let n = n_cells as i64;
    (-(n - 1) / 2)..=(n / 2)
}

/// Selects the ring modes of `bands` with some Floquet component of weight ≥ [`WEIGHT_FLOOR`]
/// whose lab frequency ω + nΩ falls inside `window`. Mode data is solved exactly at each k.
pub fn discretize_modes(bs: &BandStructure, n_cells: usize, bands: &[usize], window: (f64, f64)) -> Result<ModeSet> {
    let spec = bs.spec;
    if n_cells == 0 {
        return Err(invalid("n_cells", "must be >= 1"));
    }
    if !(window.0 < window.1) {
        return Err(invalid("window", format!("lower edge {} not below upper edge {}", window.0, window.1)));
    }
    if let Some(&l) = bands.iter().find(|&&l| l >= spec.n_harmonics()) {
        return Err(invalid("bands", format!("band {l} beyond the {} computed bands", spec.n_harmonics())));
    }
    if !bs.all_stable() {
        return Err(invalid("vd", "band structure has complex quasi-energies; no stable mode bath"));
    }
    let dk = spec.kd / n_cells as f64;
    let om = spec.omega_d();
    let per_k: Vec<Vec<Mode>> = ring_indices(n_cells)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&m| -> Result<Vec<Mode>> {
            let k = m as f64 * dk;
            let p = solve_band(&spec, k)?;
            Ok(bands
                .iter()
                .filter_map(|&l| {
                    let omega = p.omega[l].re;
                    let inside = p.u[l].iter().enumerate().any(|(i, z)| {
                        let n = i as f64 - spec.n_floquet as f64;
                        let f = omega + n * om;
                        z.norm_sqr() >= WEIGHT_FLOOR && f >= window.0 && f <= window.1
                    });
                    inside.then(|| Mode { l, m, k, omega, u: p.u[l].clone() })
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(ModeSet {
        spec,
        n_cells,
        length: n_cells as f64 * spec.lambda_d(),
        window,
        modes: per_k.into_iter().flatten().collect(),
    })
}
