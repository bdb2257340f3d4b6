//! Wigner-Weisskopf rates: resonance roots, directional decay rates and chiral factors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::{solve_band, BandStructure};
use crate::params::{DerivedDensities, TransmonCircuit};

/// Roots slower than this fraction of v₀ are flagged and left out of the rates.
pub const EDGE_VELOCITY_REL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceRoot {
    /// Zero-based band index.
    pub l: usize,
    pub n: i32,
    pub k: f64,
    pub weight: f64,
    pub vg: f64,
    pub edge_flag: bool,
}

/// How a root's Floquet weight turns into a decay rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RateModel {
    /// Γ₀ |u_ln|² v₀/|v_ln|: golden rule with the density of states of each root.
    #[default]
    GroupVelocityWeighted,
    /// Γ₀ |u_ln|², dropping the density-of-states factor.
    WeightOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiralReport {
    pub gamma_r: f64,
    pub gamma_l: f64,
    pub gamma_0: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
    pub roots: Vec<ResonanceRoot>,
}

impl ChiralReport {
    pub fn gamma_total(&self) -> f64 {
        self.gamma_r + self.gamma_l
    }

    /// The non-flagged root with the largest weight.
    pub fn dominant(&self) -> Option<&ResonanceRoot> {
        self.roots.iter().filter(|r| !r.edge_flag).max_by(|a, b| a.weight.total_cmp(&b.weight))
    }
}

struct Bracket {
    l: usize,
    n: i32,
    /// Column index into [`Columns`]; the interval is (j, j + 1).
    j: usize,
    t: f64,
}

/// The band grid with the zone boundary k = −k_d/2 prepended, so the brackets cover the whole zone.
struct Columns<'a> {
    bs: &'a BandStructure,
    edge_omega: Vec<f64>,
    edge_weight: Vec<Vec<f64>>,
    edge_vg: Vec<f64>,
}

impl<'a> Columns<'a> {
    fn new(bs: &'a BandStructure) -> Self {
        let k = -0.5 * bs.spec.kd;
        let nb = bs.n_bands();
        match solve_band(&bs.spec, k) {
            Ok(p) => Columns {
                bs,
                edge_omega: p.omega.iter().map(|w| w.re).collect(),
                edge_weight: p.u.iter().map(|u| u.iter().map(|z| z.norm_sqr()).collect()).collect(),
                edge_vg: (0..nb).map(|l| band_slope(&bs.spec, l, k).unwrap_or(bs.vg[l][0])).collect(),
            },
            // an unsolvable boundary point leaves the first interval uncovered
            Err(_) => Columns { bs, edge_omega: Vec::new(), edge_weight: Vec::new(), edge_vg: Vec::new() },
        }
    }

    fn first(&self) -> usize {
        usize::from(self.edge_omega.is_empty())
    }

    fn len(&self) -> usize {
        self.bs.n_k() + 1
    }

    fn k(&self, j: usize) -> f64 {
        if j == 0 {
            -0.5 * self.bs.spec.kd
        } else {
            self.bs.k_grid[j - 1]
        }
    }

    fn omega(&self, l: usize, j: usize) -> f64 {
        if j == 0 {
            self.edge_omega[l]
        } else {
            self.bs.omega[l][j - 1]
        }
    }

    fn vg(&self, l: usize, j: usize) -> f64 {
        if j == 0 {
            self.edge_vg[l]
        } else {
            self.bs.vg[l][j - 1]
        }
    }

    fn weight(&self, l: usize, i: usize, j: usize) -> f64 {
        if j == 0 {
            self.edge_weight[l][i]
        } else {
            self.bs.weight(l, i, j - 1)
        }
    }

    fn brackets(&self, omega_q: f64) -> Vec<Bracket> {
        let om = self.bs.spec.omega_d();
        let mut out = Vec::new();
        for l in 0..self.bs.n_bands() {
            for n in crate::floquet::harmonics(&self.bs.spec) {
                let shift = n as f64 * om - omega_q;
                for j in self.first()..self.len() - 1 {
                    let (a, b) = (self.omega(l, j) + shift, self.omega(l, j + 1) + shift);
                    if a == 0.0 || (a < 0.0) != (b < 0.0) && b != 0.0 {
                        out.push(Bracket { l, n, j, t: if a == b { 0.0 } else { a / (a - b) } });
                    }
                }
                if self.omega(l, self.len() - 1) + shift == 0.0 {
                    out.push(Bracket { l, n, j: self.len() - 1, t: 0.0 });
                }
            }
        }
        out
    }

    fn edge_flag(&self, l: usize, j: usize, vg: f64) -> bool {
        if vg.abs() < EDGE_VELOCITY_REL * self.bs.spec.v0() {
            return true;
        }
        let lo = j.saturating_sub(2).max(self.first());
        let hi = (j + 3).min(self.len() - 1);
        (lo..=hi).any(|i| (self.vg(l, i) > 0.0) != (vg > 0.0))
    }
}

/// ∂ω_l/∂k at `k` by a central difference on the exact band.
fn band_slope(spec: &crate::WaveguideSpec, l: usize, k: f64) -> Option<f64> {
    let h = 1e-6 * spec.kd;
    let a = solve_band(spec, k - h).ok()?.omega[l].re;
    let b = solve_band(spec, k + h).ok()?.omega[l].re;
    Some((b - a) / (2.0 * h))
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Roots located by linear interpolation on the grid. Cheap enough for dense frequency scans.
pub fn find_resonances_grid(bs: &BandStructure, omega_q: f64) -> Vec<ResonanceRoot> {
    let cols = Columns::new(bs);
    cols.brackets(omega_q)
        .into_iter()
        .map(|Bracket { l, n, j, t }| {
            let i = bs.harmonic_index(n);
            let j1 = (j + 1).min(cols.len() - 1);
            let vg = lerp(cols.vg(l, j), cols.vg(l, j1), t);
            ResonanceRoot {
                l,
                n,
                k: lerp(cols.k(j), cols.k(j1), t),
                weight: lerp(cols.weight(l, i, j), cols.weight(l, i, j1), t).clamp(0.0, 1.0),
                vg,
                edge_flag: cols.edge_flag(l, j, vg),
            }
        })
        .collect()
}

/// Roots of ω_l(k) + nΩ = ω_q refined by bisection on the exact band to |Δ| < 1e−10·ω_q, with the
/// group velocity differentiated at the refined root.
pub fn find_resonances(bs: &BandStructure, omega_q: f64) -> Vec<ResonanceRoot> {
    let spec = &bs.spec;
    let om = spec.omega_d();
    let tol = 1e-10 * omega_q.abs();
    let cols = Columns::new(bs);
    cols.brackets(omega_q)
        .into_iter()
        .map(|Bracket { l, n, j, t }| {
            let i = bs.harmonic_index(n);
            let j1 = (j + 1).min(cols.len() - 1);
            let eval = |k: f64| solve_band(spec, k).ok().map(|p| (p.omega[l].re + n as f64 * om - omega_q, p));
            let (mut a, mut b) = (cols.k(j), cols.k(j1));
            let fa = cols.omega(l, j) + n as f64 * om - omega_q;
            let mut k = lerp(a, b, t);
            let mut weight = lerp(cols.weight(l, i, j), cols.weight(l, i, j1), t);
            if j1 != j && fa != 0.0 {
                let sa = fa < 0.0;
                for _ in 0..80 {
                    let mid = 0.5 * (a + b);
                    let Some((f, p)) = eval(mid) else { break };
                    k = mid;
                    weight = p.u[l][i].norm_sqr();
                    if f.abs() < tol || (b - a) < 1e-15 * spec.kd {
                        break;
                    }
                    if (f < 0.0) == sa {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
            }
            let vg = band_slope(spec, l, k).unwrap_or_else(|| lerp(cols.vg(l, j), cols.vg(l, j1), t));
            ResonanceRoot { l, n, k, weight: weight.clamp(0.0, 1.0), vg, edge_flag: cols.edge_flag(l, j, vg) }
        })
        .collect()
}

pub fn decay_rates(roots: &[ResonanceRoot], gamma_0: f64, v0: f64, model: RateModel) -> Result<ChiralReport> {
    let (mut gr, mut gl) = (0.0, 0.0);
    for r in roots.iter().filter(|r| !r.edge_flag) {
        let rate = match model {
            RateModel::GroupVelocityWeighted => gamma_0 * r.weight * v0 / r.vg.abs(),
            RateModel::WeightOnly => gamma_0 * r.weight,
        };
        if r.vg > 0.0 {
            gr += rate;
        } else {
            gl += rate;
        }
    }
    let total = gr + gl;
    if !(total >= 1e-6 * gamma_0) || total == 0.0 {
        return Err(Error::DegenerateChirality { total });
    }
    Ok(ChiralReport {
        gamma_r: gr,
        gamma_l: gl,
        gamma_0,
        beta_plus: gr / total,
        beta_minus: 1.0 - gr / total,
        roots: roots.to_vec(),
    })
}

/// Resonances plus rates at `omega_q` with the default rate model.
pub fn chiral_report(bs: &BandStructure, omega_q: f64, gamma_0: f64) -> Result<ChiralReport> {
    let roots = find_resonances(bs, omega_q);
    decay_rates(&roots, gamma_0, bs.spec.v0(), RateModel::default())
}

/// Γ₀ = g₀² L / v₀ with g₀ from the transmon charge coupling at `omega_q`. Independent of `l`.
pub fn gamma0_from_circuit(circuit: &TransmonCircuit, dens: &DerivedDensities, omega_q: f64, l: f64) -> Result<f64> {
    circuit.validate()?;
    let g0 = circuit.g(omega_q, l * dens.cg);
    Ok(g0 * g0 * l / dens.v0)
}

/// Γ₀ for a mode-independent coupling on a line of length `l`.
pub fn gamma0_from_g0(g0: f64, dens: &DerivedDensities, l: f64) -> f64 {
    g0 * g0 * l / dens.v0
}

/// g₀ that produces the characteristic rate `gamma_0` on a line of length `l`.
pub fn g0_for_gamma0(gamma_0: f64, dens: &DerivedDensities, l: f64) -> f64 {
    (gamma_0 * dens.v0 / l).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::band_structure;
    use crate::params::{WaveguideSpec, ELEMENTARY_CHARGE, HBAR};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn ghz(f: f64) -> f64 {
        2.0 * PI * f * 1e9
    }

    fn root(weight: f64, vg: f64) -> ResonanceRoot {
        ResonanceRoot { l: 0, n: 0, k: 0.0, weight, vg, edge_flag: false }
    }

    #[test]
    fn single_right_root() {
        let r = decay_rates(&[root(1.0, 2.0)], 3.0, 2.0, RateModel::default()).unwrap();
        assert_eq!((r.gamma_r, r.gamma_l, r.beta_plus), (3.0, 0.0, 1.0));
        let w = decay_rates(&[root(1.0, 5.0)], 3.0, 2.0, RateModel::WeightOnly).unwrap();
        assert_eq!(w.gamma_r, 3.0);
    }

    #[test]
    fn empty_roots_are_degenerate() {
        assert!(matches!(decay_rates(&[], 1.0, 1.0, RateModel::default()), Err(Error::DegenerateChirality { .. })));
        let mut flagged = root(1.0, 1.0);
        flagged.edge_flag = true;
        assert!(decay_rates(&[flagged], 1.0, 1.0, RateModel::default()).is_err());
    }

    #[test]
    fn unmodulated_pair() {
        let spec = WaveguideSpec { delta_alpha: 0.0, c_j: 0.0, ..WaveguideSpec::table1(0.05) };
        let bs = band_structure(&spec, 512).unwrap();
        let q = 0.3 * spec.kd;
        let roots = find_resonances(&bs, spec.v0() * q);
        let live: Vec<_> = roots.iter().filter(|r| r.weight > 0.5).collect();
        assert_eq!(live.len(), 2);
        for r in &live {
            assert_eq!(r.n, 0);
            assert_relative_eq!(r.k.abs(), q, max_relative = 1e-9);
            assert_relative_eq!(r.weight, 1.0, max_relative = 1e-12);
        }
        assert!(roots.iter().all(|r| r.weight > 0.5 || r.weight < 1e-12));
        let rep = decay_rates(&roots, 1.0, spec.v0(), RateModel::default()).unwrap();
        assert_relative_eq!(rep.beta_plus, 0.5, epsilon = 1e-6);
        assert_relative_eq!(rep.gamma_total(), 2.0, max_relative = 1e-6);
    }

    #[test]
    fn right_chiral_dominant_root() {
        let spec = WaveguideSpec::table1(0.05);
        let bs = band_structure(&spec, 1024).unwrap();
        let rep = chiral_report(&bs, ghz(3.02), 1.0).unwrap();
        let dom = rep.dominant().unwrap();
        assert_eq!((dom.l, dom.n), (0, 0));
        assert!(dom.weight > 0.9 && dom.vg > 0.0);
        assert!(rep.beta_plus > 0.9, "beta+ = {}", rep.beta_plus);
        let wq = ghz(3.02);
        for r in &rep.roots {
            let p = solve_band(&spec, r.k).unwrap();
            let resid = p.omega[r.l].re + r.n as f64 * spec.omega_d() - wq;
            assert!(resid.abs() < 1e-10 * wq);
        }
    }

    #[test]
    fn gap_has_no_weighted_root() {
        let bs = band_structure(&WaveguideSpec::table1(0.05), 1024).unwrap();
        let roots = find_resonances(&bs, ghz(3.34));
        assert!(roots.iter().all(|r| r.weight < 0.02), "{roots:?}");
    }

    #[test]
    fn weights_bounded_by_bands_hit() {
        let spec = WaveguideSpec::table1(0.05);
        let bs = band_structure(&spec, 512).unwrap();
        for f in [2.5, 2.9, 3.1, 3.5, 3.7] {
            let roots = find_resonances(&bs, ghz(f));
            let mut points: Vec<(usize, i64)> =
                roots.iter().map(|r| (r.l, (r.k / spec.kd * 1e9).round() as i64)).collect();
            points.sort();
            points.dedup();
            let total: f64 = roots.iter().map(|r| r.weight).sum();
            assert!(total <= points.len() as f64 + 1e-9);
            for r in &roots {
                let p = solve_band(&spec, r.k).unwrap();
                let sum: f64 = p.u[r.l].iter().map(|z| z.norm_sqr()).sum();
                assert!(r.weight <= sum + 1e-9);
            }
        }
    }

    #[test]
    fn drive_reversal_swaps_rates() {
        let spec = WaveguideSpec::table1(0.05);
        let rev = WaveguideSpec { vd: -spec.vd, ..spec };
        let a = chiral_report(&band_structure(&spec, 1024).unwrap(), ghz(3.02), 1.0).unwrap();
        let b = chiral_report(&band_structure(&rev, 1024).unwrap(), ghz(3.02), 1.0).unwrap();
        assert_relative_eq!(a.gamma_r, b.gamma_l, max_relative = 1e-6);
        assert_relative_eq!(a.gamma_l, b.gamma_r, max_relative = 1e-6);
    }

    #[test]
    fn roots_next_to_zone_boundary_are_grid_independent() {
        // a band-1 root sits at k ≈ −0.986·k_d/2, inside the first grid interval for n_k = 128
        let spec = WaveguideSpec::table1(0.0617);
        let reports: Vec<ChiralReport> = [128, 129, 512]
            .iter()
            .map(|&n| chiral_report(&band_structure(&spec, n).unwrap(), ghz(2.8), 1.0).unwrap())
            .collect();
        for r in &reports[1..] {
            assert_eq!(r.roots.len(), reports[0].roots.len());
            assert_relative_eq!(r.gamma_r, reports[0].gamma_r, max_relative = 1e-8);
            assert_relative_eq!(r.gamma_l, reports[0].gamma_l, max_relative = 1e-8);
        }
    }

    #[test]
    fn circuit_rate() {
        let spec = WaveguideSpec::table1(0.05);
        let dens = spec.densities();
        let c = TransmonCircuit { capacitance_ratio: 0.1, ej_over_ec: 50.0 };
        let wq = ghz(3.02);
        let g1 = gamma0_from_circuit(&c, &dens, wq, 0.1).unwrap();
        let g2 = gamma0_from_circuit(&c, &dens, wq, 0.2).unwrap();
        assert_relative_eq!(g1, g2, max_relative = 1e-12);
        // closed form after L cancels: (e r)² sqrt(E_J/4E_C) ω / (ħ v₀ c_g)
        let expect = (ELEMENTARY_CHARGE * 0.1).powi(2) * 12.5f64.sqrt() * wq / (HBAR * dens.v0 * dens.cg);
        assert_relative_eq!(g1, expect, max_relative = 1e-12);
        assert_relative_eq!(g1, 2.9810e8, max_relative = 1e-3);
        assert_eq!(gamma0_from_g0(0.0, &dens, 0.1), 0.0);
        let bad = TransmonCircuit { ej_over_ec: 10.0, ..c };
        assert!(gamma0_from_circuit(&bad, &dens, wq, 0.1).is_err());
    }

    #[test]
    fn g0_round_trip() {
        let dens = WaveguideSpec::table1(0.05).densities();
        let g0 = g0_for_gamma0(3e7, &dens, 2.4);
        assert_relative_eq!(gamma0_from_g0(g0, &dens, 2.4), 3e7, max_relative = 1e-14);
    }
}
