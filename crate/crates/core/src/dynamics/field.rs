use std::collections::BTreeMap;

use nalgebra::DVector;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::system::EmissionSystem;
use crate::floquet::C64;

/// Half-width of the window around the reference qubit left out of the fluxes, in λ_d.
pub const NEAR_FIELD_EXCLUSION: f64 = 5.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldSnapshot {
    pub t: f64,
    pub x_grid: Vec<f64>,
    pub psi: Vec<C64>,
    pub flux_r: f64,
    pub flux_l: f64,
}

impl FieldSnapshot {
    pub fn beta_plus(&self) -> f64 {
        self.flux_r / (self.flux_r + self.flux_l)
    }

    /// ∫|ψ|² over `lo ≤ x ≤ hi` by the trapezoid rule on the snapshot grid.
    pub fn energy_between(&self, lo: f64, hi: f64) -> f64 {
        let w = trapezoid_weights(&self.x_grid);
        self.x_grid
            .iter()
            .zip(&self.psi)
            .zip(&w)
            .filter(|((x, _), _)| **x >= lo && **x <= hi)
            .map(|((_, p), w)| p.norm_sqr() * w)
            .sum()
    }

    pub fn total_energy(&self) -> f64 {
        self.energy_between(f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Energy-weighted mean position over `x > lo`.
    pub fn centroid_beyond(&self, lo: f64) -> f64 {
        let w = trapezoid_weights(&self.x_grid);
        let (mut s0, mut s1) = (0.0, 0.0);
        for ((x, p), w) in self.x_grid.iter().zip(&self.psi).zip(&w) {
            if *x > lo {
                let e = p.norm_sqr() * w;
                s0 += e;
                s1 += e * x;
            }
        }
        s1 / s0
    }
}

fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|j| {
            let left = if j > 0 { x[j] - x[j - 1] } else { 0.0 };
            let right = if j + 1 < n { x[j + 1] - x[j] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// Energies right of x_ref + exclusion and left of x_ref − exclusion.
pub fn fluxes(x: &[f64], psi: &[C64], x_ref: f64, exclusion: f64) -> (f64, f64) {
    let w = trapezoid_weights(x);
    let (mut r, mut l) = (0.0, 0.0);
    for ((xj, p), wj) in x.iter().zip(psi).zip(&w) {
        if *xj > x_ref + exclusion {
            r += p.norm_sqr() * wj;
        } else if *xj < x_ref - exclusion {
            l += p.norm_sqr() * wj;
        }
    }
    (r, l)
}

/// Plane-wave amplitudes a_p of ψ = L^{-1/2} Σ_p a_p e^{i p Δk x} at lab time `t`.
pub fn plane_wave_amplitudes(sys: &EmissionSystem, state: &DVector<C64>, t: f64) -> BTreeMap<i64, C64> {
    let spec = &sys.modes.spec;
    let nf = spec.n_floquet as i64;
    let n_cells = sys.modes.n_cells as i64;
    let om = spec.omega_d();
    let mut amps = BTreeMap::new();
    for (j, mode) in sys.modes.modes.iter().enumerate() {
        let b = state[j] * C64::from_polar(1.0, -mode.omega * t);
        for (h, u) in mode.u.iter().enumerate() {
            let n = h as i64 - nf;
            let a = b * *u * C64::from_polar(1.0, -(n as f64) * om * t);
            *amps.entry(mode.m + n * n_cells).or_insert(C64::new(0.0, 0.0)) += a;
        }
    }
    amps
}

/// ∫|ψ|² over the ring, exact through the plane-wave expansion.
pub fn field_energy(sys: &EmissionSystem, state: &DVector<C64>, t: f64) -> f64 {
    plane_wave_amplitudes(sys, state, t).values().map(|a| a.norm_sqr()).sum()
}

/// Σ|c_lk|², the photon population in the mode basis.
pub fn photon_population(sys: &EmissionSystem, state: &DVector<C64>) -> f64 {
    state.iter().take(sys.n_modes()).map(|z| z.norm_sqr()).sum()
}

fn x_ref(sys: &EmissionSystem) -> f64 {
    sys.qubits[0].x
}

/// ψ(x, t) at arbitrary points by direct summation; fluxes use the trapezoid rule on `x_grid`
/// and are measured from the first qubit.
pub fn reconstruct_field(sys: &EmissionSystem, state: &DVector<C64>, t: f64, x_grid: &[f64]) -> FieldSnapshot {
    let amps = plane_wave_amplitudes(sys, state, t);
    let dk = sys.modes.dk();
    let norm = sys.modes.length.sqrt();
    let psi: Vec<C64> = x_grid
        .iter()
        .map(|&x| amps.iter().map(|(&p, a)| *a * C64::from_polar(1.0, p as f64 * dk * x)).sum::<C64>() / norm)
        .collect();
    let (flux_r, flux_l) = fluxes(x_grid, &psi, x_ref(sys), NEAR_FIELD_EXCLUSION * sys.modes.spec.lambda_d());
    FieldSnapshot { t, x_grid: x_grid.to_vec(), psi, flux_r, flux_l }
}

/// ψ on a uniform grid x_j = −L/2 + jL/N covering the ring, by inverse FFT. N is the smallest
/// power of two holding `oversample` points per shortest retained wavelength band.
pub fn field_on_ring(sys: &EmissionSystem, state: &DVector<C64>, t: f64, oversample: usize) -> FieldSnapshot {
    let amps = plane_wave_amplitudes(sys, state, t);
    let n_cells = sys.modes.n_cells;
    let span = sys.modes.spec.n_harmonics() * n_cells + 1;
    let n_fft = (oversample.max(1) * span).next_power_of_two();
    let mut buf = vec![C64::new(0.0, 0.0); n_fft];
    for (&p, a) in &amps {
        let sign = if p.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        buf[p.rem_euclid(n_fft as i64) as usize] += *a * sign;
    }
    FftPlanner::new().plan_fft_inverse(n_fft).process(&mut buf);
    let l = sys.modes.length;
    let norm = l.sqrt();
    let x_grid: Vec<f64> = (0..n_fft).map(|j| -0.5 * l + j as f64 * l / n_fft as f64).collect();
    let psi: Vec<C64> = buf.into_iter().map(|z| z / norm).collect();
    let (flux_r, flux_l) = fluxes(&x_grid, &psi, x_ref(sys), NEAR_FIELD_EXCLUSION * sys.modes.spec.lambda_d());
    FieldSnapshot { t, x_grid, psi, flux_r, flux_l }
}
