//! Cascaded master equation for two-level nodes on a chiral waveguide, Markov limit.
//!
//! Qubit `i` excited ↔ bit `i` of the basis index set. The generator is
//! ρ' = −i(H_eff ρ − ρ H_eff†) + L_R ρ L_R† + L_L ρ L_L† with
//! H_eff = −(i/2)(Γ_R+Γ_L) Σ σ_i⁺σ_i⁻ − iΓ_R Σ_{x_i>x_j} e^{ik_R(x_i−x_j)} σ_i⁺σ_j⁻
//!         − iΓ_L Σ_{x_i<x_j} e^{ik_L(x_j−x_i)} σ_i⁺σ_j⁻,
//! L_R = √Γ_R Σ e^{−ik_R x_i} σ_i⁻ and L_L = √Γ_L Σ e^{ik_L x_i} σ_i⁻.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{invalid, Error, Result};
use crate::floquet::C64;
use crate::markov::ChiralReport;
use crate::ode::{integrate, Tolerances};

pub const MAX_NODES: usize = 12;
/// Eigenvalue below which evolution is aborted.
pub const POSITIVITY_ABORT: f64 = -1e-8;
/// τ·Γ above which the Markov (no-delay) approximation is reported as questionable.
pub const MARKOV_WARN: f64 = 0.1;

/// Optional propagation phases; neglected by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationPhases {
    pub k_right: f64,
    pub k_left: f64,
}

impl PropagationPhases {
    /// Lab wavenumbers q = k + n·k_d of the heaviest right- and left-moving roots.
    /// A missing direction gets phase 0.
    pub fn from_report(report: &ChiralReport, kd: f64) -> Self {
        let heaviest = |right: bool| {
            report
                .roots
                .iter()
                .filter(|r| !r.edge_flag && (r.vg > 0.0) == right)
                .max_by(|a, b| a.weight.total_cmp(&b.weight))
                .map_or(0.0, |r| r.k + r.n as f64 * kd)
        };
        PropagationPhases { k_right: heaviest(true), k_left: -heaviest(false) }
    }
}

#[derive(Debug, Clone)]
pub struct CascadeGenerator {
    pub gamma_r: f64,
    pub gamma_l: f64,
    pub positions: Vec<f64>,
    pub phases: Option<PropagationPhases>,
    /// H_eff as (i, j, c): c σ_i⁺σ_j⁻.
    heff: Vec<(usize, usize, C64)>,
    jumps: Vec<Vec<C64>>,
}

pub fn build_cascaded_generator(
    gamma_r: f64,
    gamma_l: f64,
    positions: &[f64],
    phases: Option<PropagationPhases>,
) -> Result<CascadeGenerator> {
    if !(gamma_r.is_finite() && gamma_r >= 0.0) {
        return Err(invalid("gamma_r", format!("must be >= 0, got {gamma_r}")));
    }
    if !(gamma_l.is_finite() && gamma_l >= 0.0) {
        return Err(invalid("gamma_l", format!("must be >= 0, got {gamma_l}")));
    }
    let q = positions.len();
    if q == 0 || q > MAX_NODES {
        return Err(invalid("positions", format!("need 1..={MAX_NODES} nodes, got {q}")));
    }
    if positions.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("positions", "must be strictly ascending"));
    }
    let (kr, kl) = phases.map_or((0.0, 0.0), |p| (p.k_right, p.k_left));
    let mut heff = Vec::with_capacity(q * q);
    for i in 0..q {
        heff.push((i, i, C64::new(0.0, -0.5 * (gamma_r + gamma_l))));
        for j in 0..q {
            let dx = positions[i] - positions[j];
            if dx > 0.0 && gamma_r > 0.0 {
                heff.push((i, j, C64::new(0.0, -gamma_r) * C64::from_polar(1.0, kr * dx)));
            } else if dx < 0.0 && gamma_l > 0.0 {
                heff.push((i, j, C64::new(0.0, -gamma_l) * C64::from_polar(1.0, -kl * dx)));
            }
        }
    }
    let mut jumps = Vec::new();
    if gamma_r > 0.0 {
        jumps.push(positions.iter().map(|x| C64::from_polar(gamma_r.sqrt(), -kr * x)).collect());
    }
    if gamma_l > 0.0 {
        jumps.push(positions.iter().map(|x| C64::from_polar(gamma_l.sqrt(), kl * x)).collect());
    }
    Ok(CascadeGenerator { gamma_r, gamma_l, positions: positions.to_vec(), phases, heff, jumps })
}

impl CascadeGenerator {
    pub fn n_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn dim(&self) -> usize {
        1 << self.n_nodes()
    }

    /// Row-major `out = L(ρ)`.
    pub fn apply(&self, rho: &[C64], out: &mut [C64]) {
        let d = self.dim();
        let mut h_rho = vec![C64::new(0.0, 0.0); d * d];
        for &(i, j, c) in &self.heff {
            let (bi, bj) = (1usize << i, 1usize << j);
            for a in 0..d {
                let src = if i == j {
                    if a & bi == 0 {
                        continue;
                    }
                    a
                } else {
                    if a & bi == 0 || a & bj != 0 {
                        continue;
                    }
                    a ^ bi ^ bj
                };
                let (dst_row, src_row) = (&mut h_rho[a * d..(a + 1) * d], &rho[src * d..(src + 1) * d]);
                for (o, r) in dst_row.iter_mut().zip(src_row) {
                    *o += c * r;
                }
            }
        }
        // −i(Hρ − ρH†) = −i(Hρ − (Hρ)†)
        for a in 0..d {
            for b in 0..d {
                let x = h_rho[a * d + b] - h_rho[b * d + a].conj();
                out[a * d + b] = C64::new(x.im, -x.re);
            }
        }
        let mut l_rho = vec![C64::new(0.0, 0.0); d * d];
        for l in &self.jumps {
            l_rho.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            for (i, li) in l.iter().enumerate() {
                let bi = 1usize << i;
                for a in (0..d).filter(|a| a & bi == 0) {
                    let (dst, src) = (a * d, (a | bi) * d);
                    for b in 0..d {
                        l_rho[dst + b] += li * rho[src + b];
                    }
                }
            }
            for (k, lk) in l.iter().enumerate() {
                let bk = 1usize << k;
                let lkc = lk.conj();
                for a in 0..d {
                    for b in (0..d).filter(|b| b & bk == 0) {
                        out[a * d + b] += lkc * l_rho[a * d + (b | bk)];
                    }
                }
            }
        }
    }

    /// max τ_ij·(Γ_R+Γ_L) over node pairs for a photon speed `vg`.
    pub fn markov_parameter(&self, vg: f64) -> f64 {
        let span = self.positions.last().unwrap_or(&0.0) - self.positions.first().unwrap_or(&0.0);
        span / vg.abs() * (self.gamma_r + self.gamma_l)
    }

    pub fn markov_warning(&self, vg: f64) -> Option<String> {
        let m = self.markov_parameter(vg);
        (m > MARKOV_WARN).then(|| {
            format!("max delay × decay rate = {m:.3} exceeds {MARKOV_WARN}; the cascaded (no-delay) description is questionable")
        })
    }
}

#[derive(Debug, Clone)]
pub struct NetworkState {
    pub rho: DMatrix<C64>,
    pub gamma_r: f64,
    pub gamma_l: f64,
    pub positions: Vec<f64>,
}

impl NetworkState {
    /// Pure product state with the listed nodes excited.
    pub fn excited(gen: &CascadeGenerator, nodes: &[usize]) -> Result<Self> {
        let mut idx = 0usize;
        for &n in nodes {
            if n >= gen.n_nodes() {
                return Err(invalid("nodes", format!("node {n} out of range")));
            }
            idx |= 1 << n;
        }
        let d = gen.dim();
        let mut rho = DMatrix::zeros(d, d);
        rho[(idx, idx)] = C64::new(1.0, 0.0);
        Ok(NetworkState { rho, gamma_r: gen.gamma_r, gamma_l: gen.gamma_l, positions: gen.positions.clone() })
    }

    /// Pure state from amplitudes over the 2^Q basis.
    pub fn pure(gen: &CascadeGenerator, amplitudes: &[C64]) -> Result<Self> {
        if amplitudes.len() != gen.dim() {
            return Err(invalid("amplitudes", format!("need {} amplitudes, got {}", gen.dim(), amplitudes.len())));
        }
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(invalid("amplitudes", format!("norm {norm} is not 1")));
        }
        let v = nalgebra::DVector::from_column_slice(amplitudes);
        Ok(NetworkState {
            rho: &v * v.adjoint(),
            gamma_r: gen.gamma_r,
            gamma_l: gen.gamma_l,
            positions: gen.positions.clone(),
        })
    }

    pub fn trace_error(&self) -> f64 {
        (self.rho.trace() - C64::new(1.0, 0.0)).norm()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.rho - self.rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.rho + self.rho.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Excited-state population of node `i`.
    pub fn population(&self, i: usize) -> f64 {
        let bit = 1usize << i;
        (0..self.rho.nrows()).filter(|a| a & bit != 0).map(|a| self.rho[(a, a)].re).sum()
    }
}

#[derive(Debug, Clone)]
pub struct NetworkTrajectory {
    pub t: Vec<f64>,
    pub states: Vec<NetworkState>,
}

impl NetworkTrajectory {
    pub fn populations(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.population(i)).collect()
    }

    pub fn max_trace_error(&self) -> f64 {
        self.states.iter().map(|s| s.trace_error()).fold(0.0, f64::max)
    }

    pub fn max_hermiticity_error(&self) -> f64 {
        self.states.iter().map(|s| s.hermiticity_error()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.states.iter().map(|s| s.min_eigenvalue()).fold(f64::INFINITY, f64::min)
    }
}

fn pack(rho: &DMatrix<C64>) -> Vec<f64> {
    let d = rho.nrows();
    (0..d * d)
        .flat_map(|k| {
            let z = rho[(k / d, k % d)];
            [z.re, z.im]
        })
        .collect()
}

fn unpack(y: &[f64], d: usize) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |a, b| C64::new(y[2 * (a * d + b)], y[2 * (a * d + b) + 1]))
}

pub fn evolve_network(
    gen: &CascadeGenerator,
    init: &NetworkState,
    t_final: f64,
    dt_out: f64,
) -> Result<NetworkTrajectory> {
    evolve_network_with(gen, init, t_final, dt_out, Tolerances::default())
}

/// Integrates the master equation; each output state is checked for positivity. On a violation
/// below [`POSITIVITY_ABORT`] the run is repeated once with 100× tighter tolerances.
pub fn evolve_network_with(
    gen: &CascadeGenerator,
    init: &NetworkState,
    t_final: f64,
    dt_out: f64,
    tol: Tolerances,
) -> Result<NetworkTrajectory> {
    let d = gen.dim();
    if init.rho.nrows() != d || init.rho.ncols() != d {
        return Err(invalid("rho", format!("expected {d}×{d}, got {}×{}", init.rho.nrows(), init.rho.ncols())));
    }
    if init.trace_error() > 1e-10 || init.hermiticity_error() > 1e-10 || init.min_eigenvalue() < -1e-10 {
        return Err(invalid("rho", "initial state is not a density matrix"));
    }
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let rho: Vec<C64> = y.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
        let mut out = vec![C64::new(0.0, 0.0); d * d];
        gen.apply(&rho, &mut out);
        for (k, z) in out.iter().enumerate() {
            dy[2 * k] = z.re;
            dy[2 * k + 1] = z.im;
        }
    };
    let mut tol = tol;
    for attempt in 0..2 {
        let (t, ys, _) = integrate(rhs, pack(&init.rho), t_final, dt_out, tol)?;
        let states: Vec<NetworkState> = ys
            .iter()
            .map(|y| NetworkState {
                rho: unpack(y, d),
                gamma_r: gen.gamma_r,
                gamma_l: gen.gamma_l,
                positions: gen.positions.clone(),
            })
            .collect();
        let bad = t.iter().zip(&states).map(|(t, s)| (*t, s.min_eigenvalue())).find(|(_, m)| *m < POSITIVITY_ABORT);
        match bad {
            None => return Ok(NetworkTrajectory { t, states }),
            Some((t, min_eig)) if attempt == 1 => return Err(Error::PositivityLoss { t, min_eig }),
            Some(_) => {
                tol.rtol *= 1e-2;
                tol.atol *= 1e-2;
            }
        }
    }
    unreachable!("second attempt always returns")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CascadeComparison {
    /// sup_t |p_i^cascade − p_i^exact| per node.
    pub sup_norm: Vec<f64>,
    pub max_sup_norm: f64,
    /// Cascade populations per node on the exact time grid.
    pub populations: Vec<Vec<f64>>,
}

/// Runs the cascade from |e, g, …⟩ on the time grid of `exact` (which must start from qubit 1
/// excited) and compares node populations.
pub fn compare_with_exact(gen: &CascadeGenerator, exact: &Trajectory) -> Result<CascadeComparison> {
    let t_final = *exact.t.last().ok_or_else(|| invalid("trajectory", "empty"))?;
    let dt = exact.t.get(1).map_or(t_final, |t1| t1 - exact.t[0]);
    let init = NetworkState::excited(gen, &[0])?;
    let net = evolve_network(gen, &init, t_final, dt)?;
    let n = net.t.len().min(exact.t.len());
    let populations: Vec<Vec<f64>> = (0..gen.n_nodes()).map(|i| net.populations(i)[..n].to_vec()).collect();
    let sup_norm: Vec<f64> = populations
        .iter()
        .enumerate()
        .map(|(i, pc)| {
            let pe = exact.excitation(i);
            (0..n).map(|j| (pc[j] - pe[j]).abs()).fold(0.0, f64::max)
        })
        .collect();
    let max_sup_norm = sup_norm.iter().cloned().fold(0.0, f64::max);
    Ok(CascadeComparison { sup_norm, max_sup_norm, populations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn run(gr: f64, gl: f64, x: &[f64], excite: &[usize], t: f64) -> NetworkTrajectory {
        let gen = build_cascaded_generator(gr, gl, x, None).unwrap();
        let init = NetworkState::excited(&gen, excite).unwrap();
        evolve_network(&gen, &init, t, t / 200.0).unwrap()
    }

    #[test]
    fn phases_follow_heaviest_roots() {
        use crate::markov::ResonanceRoot;
        let root = |n, k, weight, vg, edge_flag| ResonanceRoot { l: 0, n, k, weight, vg, edge_flag };
        let report = ChiralReport {
            gamma_r: 1.0,
            gamma_l: 0.1,
            gamma_0: 1.0,
            beta_plus: 0.9,
            beta_minus: 0.1,
            roots: vec![
                root(0, 2.0, 0.9, 1.0, false),
                root(1, -3.0, 0.05, 1.0, false),
                root(-1, 1.5, 0.3, -1.0, false),
                root(0, -2.5, 0.6, -1.0, true),
            ],
        };
        let p = PropagationPhases::from_report(&report, 10.0);
        assert_eq!(p.k_right, 2.0);
        assert_eq!(p.k_left, 8.5);
    }

    #[test]
    fn single_node_decays_at_total_rate() {
        let traj = run(0.7, 0.3, &[0.0], &[0], 10.0);
        for (t, p) in traj.t.iter().zip(traj.populations(0)) {
            assert!((p - (-t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn perfectly_chiral_pair_closed_form() {
        let g = 1.3;
        let traj = run(g, 0.0, &[0.0, 1.0], &[0], 10.0 / g);
        let p2 = traj.populations(1);
        let err = traj.t.iter().zip(&p2).map(|(t, p)| (p - (g * t).powi(2) * (-g * t).exp()).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        let peak = p2.iter().cloned().fold(0.0, f64::max);
        assert!((peak - 4.0 * (-2.0f64).exp()).abs() < 1e-3);
    }

    #[test]
    fn no_back_flow() {
        let traj = run(1.0, 0.0, &[0.0, 1.0, 2.0], &[2], 10.0);
        for i in 0..2 {
            assert!(traj.populations(i).iter().all(|p| p.abs() < 1e-10));
        }
    }

    #[test]
    fn bidirectional_limit_is_mirror_symmetric() {
        let a = run(0.5, 0.5, &[0.0, 1.0], &[0], 10.0);
        let b = run(0.5, 0.5, &[0.0, 1.0], &[1], 10.0);
        for (pa, pb) in a.populations(0).iter().zip(b.populations(1)) {
            assert!((pa - pb).abs() < 1e-10);
        }
        for (pa, pb) in a.populations(1).iter().zip(b.populations(0)) {
            assert!((pa - pb).abs() < 1e-10);
        }
    }

    #[test]
    fn bidirectional_limit_matches_standard_form() {
        // Γ_R = Γ_L = γ/2 with no phases: collective decay with L = √γ Σσ⁻, no coherent exchange
        let gen = build_cascaded_generator(0.5, 0.5, &[0.0, 1.0], None).unwrap();
        let init = NetworkState::excited(&gen, &[0]).unwrap();
        let rho: Vec<C64> = init.rho.transpose().iter().cloned().collect();
        let mut out = vec![C64::new(0.0, 0.0); 16];
        gen.apply(&rho, &mut out);
        let sm = |i: usize| {
            DMatrix::from_fn(4, 4, |a, b| {
                if b == a | (1 << i) && a & (1 << i) == 0 {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
        };
        let l = sm(0) + sm(1);
        let ld = l.adjoint();
        let r = &init.rho;
        let expected = &l * r * &ld - (&ld * &l * r + r * &ld * &l) * C64::new(0.5, 0.0);
        for a in 0..4 {
            for b in 0..4 {
                assert!((out[a * 4 + b] - expected[(a, b)]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_cascaded_generator(-1.0, 0.0, &[0.0], None).is_err());
        assert!(build_cascaded_generator(1.0, 0.0, &[1.0, 0.0], None).is_err());
        assert!(build_cascaded_generator(1.0, 0.0, &[0.0; 0], None).is_err());
        let x: Vec<f64> = (0..13).map(|i| i as f64).collect();
        assert!(build_cascaded_generator(1.0, 0.0, &x, None).is_err());
        let gen = build_cascaded_generator(1.0, 0.0, &[0.0, 1.0], None).unwrap();
        assert!(NetworkState::excited(&gen, &[2]).is_err());
    }

    #[test]
    fn markov_parameter() {
        let gen = build_cascaded_generator(0.9, 0.1, &[0.0, 2.0], None).unwrap();
        assert!((gen.markov_parameter(4.0) - 0.5).abs() < 1e-15);
        assert!(gen.markov_warning(4.0).is_some());
        assert!(gen.markov_warning(400.0).is_none());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn density_matrix_invariants(
            gr in 0.0f64..2.0,
            gl in 0.0f64..2.0,
            gaps in prop::collection::vec(0.1f64..3.0, 1..3),
            seed in prop::collection::vec(-1.0f64..1.0, 16),
            phases in prop::option::of((0.0f64..5.0, 0.0f64..5.0)),
        ) {
            let mut x = vec![0.0];
            for g in &gaps {
                x.push(x.last().unwrap() + g);
            }
            let phases = phases.map(|(k_right, k_left)| PropagationPhases { k_right, k_left });
            let gen = build_cascaded_generator(gr, gl, &x, phases).unwrap();
            let d = gen.dim();
            let amps: Vec<C64> = (0..d).map(|a| C64::new(seed[(2 * a) % 16], seed[(2 * a + 1) % 16])).collect();
            let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            prop_assume!(norm > 1e-3);
            let amps: Vec<C64> = amps.iter().map(|z| z / norm).collect();
            let init = NetworkState::pure(&gen, &amps).unwrap();
            let traj = evolve_network(&gen, &init, 3.0, 0.1).unwrap();
            prop_assert!(traj.max_trace_error() < 1e-10);
            prop_assert!(traj.max_hermiticity_error() < 1e-10);
            prop_assert!(traj.min_eigenvalue() > -1e-10);
        }

        #[test]
        fn relabeling_is_consistent(gr in 0.1f64..2.0, gl in 0.0f64..2.0) {
            // mirror the chain and swap Γ_R ↔ Γ_L: node i ↦ node Q−1−i
            let a = run(gr, gl, &[0.0, 1.0, 2.5], &[0], 4.0);
            let b = run(gl, gr, &[0.0, 1.5, 2.5], &[2], 4.0);
            for i in 0..3 {
                for (pa, pb) in a.populations(i).iter().zip(b.populations(2 - i)) {
                    prop_assert!((pa - pb).abs() < 1e-9);
                }
            }
        }
    }
}
