use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{solve_band_with, BandPoint, C64, TOL_IM_REL};
use crate::error::{invalid, Result};
use crate::params::WaveguideSpec;

/// Quasi-energies and Floquet weights on a uniform grid over (−k_d/2, k_d/2].
///
/// Band l is the l-th lowest quasi-energy at each k, so bands are continuous in k and
/// cross nowhere. Eigenvector gauges are aligned along k by maximal overlap.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandStructure {
    pub spec: WaveguideSpec,
    pub k_grid: Vec<f64>,
    /// `omega[l][j]`, real part (rad/s).
    pub omega: Vec<Vec<f64>>,
    /// Largest |Im ω| over bands at each k.
    pub omega_im: Vec<f64>,
    /// `u[l][j][i]` with harmonic n = i − n_floquet.
    pub u: Vec<Vec<Vec<C64>>>,
    /// `vg[l][j]` = ∂ω_l/∂k (m/s).
    pub vg: Vec<Vec<f64>>,
    pub stable: Vec<bool>,
}

impl BandStructure {
    pub fn n_bands(&self) -> usize {
        self.omega.len()
    }

    pub fn n_k(&self) -> usize {
        self.k_grid.len()
    }

    pub fn dk(&self) -> f64 {
        self.spec.kd / self.n_k() as f64
    }

    pub fn all_stable(&self) -> bool {
        self.stable.iter().all(|&s| s)
    }

    /// |u_ln(k_j)|² for harmonic index `i` (n = i − n_floquet).
    pub fn weight(&self, l: usize, i: usize, j: usize) -> f64 {
        self.u[l][j][i].norm_sqr()
    }

    pub fn harmonic_index(&self, n: i32) -> usize {
        (n + self.spec.n_floquet as i32) as usize
    }

    /// Largest relative deviation between the lowest `bands` bands of two structures on the same
    /// grid. Frequencies below one grid step v₀Δk are measured against that step instead.
    pub fn max_relative_deviation(&self, other: &BandStructure, bands: usize) -> f64 {
        let floor = self.spec.v0() * self.dk();
        let mut worst = 0.0f64;
        for l in 0..bands {
            for (a, b) in self.omega[l].iter().zip(&other.omega[l]) {
                worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(floor));
            }
        }
        worst
    }

    pub fn band_min(&self, l: usize) -> (f64, f64) {
        self.extremum(l, |a, b| a < b)
    }

    pub fn band_max(&self, l: usize) -> (f64, f64) {
        self.extremum(l, |a, b| a > b)
    }

    fn extremum(&self, l: usize, better: impl Fn(f64, f64) -> bool) -> (f64, f64) {
        let mut best = (self.omega[l][0], self.k_grid[0]);
        for (w, k) in self.omega[l].iter().zip(&self.k_grid) {
            if better(*w, best.0) {
                best = (*w, *k);
            }
        }
        best
    }
}

pub fn band_structure(spec: &WaveguideSpec, n_k: usize) -> Result<BandStructure> {
    band_structure_with(spec, n_k, TOL_IM_REL * spec.omega_d().abs())
}

pub fn band_structure_with(spec: &WaveguideSpec, n_k: usize, tol_im: f64) -> Result<BandStructure> {
    spec.validate()?;
    if n_k < 64 {
        return Err(invalid("n_k", format!("must be >= 64, got {n_k}")));
    }
    let dk = spec.kd / n_k as f64;
    let k_grid: Vec<f64> = (0..n_k).map(|j| -0.5 * spec.kd + (j + 1) as f64 * dk).collect();
    let points: Vec<BandPoint> = k_grid.par_iter().map(|&k| solve_band_with(spec, k, tol_im)).collect::<Result<_>>()?;

    let nb = spec.n_harmonics();
    let mut omega = vec![vec![0.0; n_k]; nb];
    let mut u = vec![Vec::with_capacity(n_k); nb];
    let mut omega_im = Vec::with_capacity(n_k);
    let mut stable = Vec::with_capacity(n_k);
    for (j, p) in points.into_iter().enumerate() {
        omega_im.push(p.omega.iter().map(|w| w.im.abs()).fold(0.0, f64::max));
        stable.push(p.stable);
        for (l, (w, mut v)) in p.omega.into_iter().zip(p.u).enumerate() {
            omega[l][j] = w.re;
            if j > 0 {
                let prev: &Vec<C64> = &u[l][j - 1];
                let overlap: C64 = prev.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                if overlap.norm() > 1e-3 {
                    let phase = overlap.conj() / overlap.norm();
                    v.iter_mut().for_each(|z| *z *= phase);
                }
            }
            u[l].push(v);
        }
    }

    let vg = omega
        .iter()
        .map(|w| {
            (0..n_k)
                .map(|j| match j {
                    0 => (w[1] - w[0]) / dk,
                    _ if j == n_k - 1 => (w[j] - w[j - 1]) / dk,
                    _ => (w[j + 1] - w[j - 1]) / (2.0 * dk),
                })
                .collect()
        })
        .collect();

    Ok(BandStructure { spec: *spec, k_grid, omega, omega_im, u, vg, stable })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_layout() {
        let spec = WaveguideSpec::table1(0.05);
        let bs = band_structure(&spec, 128).unwrap();
        assert_eq!(bs.n_k(), 128);
        assert!((bs.k_grid[127] - 0.5 * spec.kd).abs() < 1e-9 * spec.kd);
        assert!(bs.k_grid[0] > -0.5 * spec.kd);
        assert!(band_structure(&spec, 32).is_err());
    }

    #[test]
    fn bands_sorted_and_continuous() {
        let spec = WaveguideSpec::table1(0.05);
        let bs = band_structure(&spec, 512).unwrap();
        let step = spec.v0() * bs.dk();
        for j in 0..bs.n_k() {
            for l in 1..bs.n_bands() {
                assert!(bs.omega[l][j] >= bs.omega[l - 1][j]);
            }
        }
        for l in 0..bs.n_bands() {
            for j in 1..bs.n_k() {
                assert!((bs.omega[l][j] - bs.omega[l][j - 1]).abs() <= 1.01 * step);
            }
        }
    }

    #[test]
    fn unmodulated_is_folded_line() {
        let spec = WaveguideSpec { delta_alpha: 0.0, c_j: 0.0, ..WaveguideSpec::table1(0.05) };
        let bs = band_structure(&spec, 256).unwrap();
        let v0 = spec.v0();
        // lowest band follows v0|k| away from the harmonic crossings, no gap between bands 1 and 2
        let j = bs.k_grid.iter().position(|&k| k > 0.1 * spec.kd).unwrap();
        assert!((bs.omega[0][j] - v0 * bs.k_grid[j]).abs() < 1e-9 * bs.omega[0][j]);
        assert!((bs.vg[0][j] - v0).abs() < 1e-6 * v0);
        assert!(bs.band_max(0).0 >= bs.band_min(1).0);
    }

    #[test]
    fn modulation_opens_gap_near_zone_edge() {
        let bs = band_structure(&WaveguideSpec::table1(0.05), 512).unwrap();
        let (top, _) = bs.band_max(0);
        let (bottom, _) = bs.band_min(1);
        assert!(bottom > top);
        let f = |w: f64| w / (2.0 * PI * 1e9);
        assert!(f(top) > 3.0 && f(bottom) < 3.6, "{} {}", f(top), f(bottom));
    }
}
