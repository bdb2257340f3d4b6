use nalgebra::DVector;

use super::system::EmissionSystem;
use crate::error::{invalid, Result};
use crate::floquet::C64;
use crate::ode::{integrate, IntegrationStats, Tolerances};

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub states: Vec<DVector<C64>>,
    pub n_modes: usize,
    pub stats: IntegrationStats,
}

impl Trajectory {
    /// |c_e|² of qubit `i` at every sample.
    pub fn excitation(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[self.n_modes + i].norm_sqr()).collect()
    }

    pub fn norm(&self, j: usize) -> f64 {
        self.states[j].iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn max_norm_drift(&self) -> f64 {
        let n0 = self.norm(0);
        (0..self.t.len()).map(|j| (self.norm(j) - n0).abs()).fold(0.0, f64::max)
    }

    pub fn last(&self) -> (&f64, &DVector<C64>) {
        (self.t.last().expect("non-empty"), self.states.last().expect("non-empty"))
    }
}

fn pack(state: &DVector<C64>) -> Vec<f64> {
    state.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn unpack(y: &[f64]) -> DVector<C64> {
    DVector::from_iterator(y.len() / 2, y.chunks_exact(2).map(|p| C64::new(p[0], p[1])))
}

pub fn evolve(sys: &EmissionSystem, init: &DVector<C64>, t_final: f64, dt_out: f64) -> Result<Trajectory> {
    evolve_with(sys, init, t_final, dt_out, Tolerances::default())
}

/// Integrates i ψ' = H(t) ψ in the interaction picture.
pub fn evolve_with(
    sys: &EmissionSystem,
    init: &DVector<C64>,
    t_final: f64,
    dt_out: f64,
    tol: Tolerances,
) -> Result<Trajectory> {
    if init.len() != sys.dim() {
        return Err(invalid("initial_state", format!("dimension {} != system dimension {}", init.len(), sys.dim())));
    }
    let norm: f64 = init.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(invalid("initial_state", format!("norm {norm} is not 1")));
    }
    let dim = sys.dim();
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let psi: Vec<C64> = y.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
        let mut hpsi = vec![C64::new(0.0, 0.0); dim];
        sys.apply_hamiltonian(t, &psi, &mut hpsi);
        for (j, z) in hpsi.iter().enumerate() {
            // ψ' = −i Hψ
            dy[2 * j] = z.im;
            dy[2 * j + 1] = -z.re;
        }
    };
    let (t, y, stats) = integrate(rhs, pack(init), t_final, dt_out, tol)?;
    Ok(Trajectory { t, states: y.iter().map(|v| unpack(v)).collect(), n_modes: sys.n_modes(), stats })
}

/// Least-squares slope of −ln p over samples with `p_hi ≥ p ≥ p_lo`. Returns None with fewer than 3 samples.
pub fn fit_decay_rate(t: &[f64], p: &[f64], p_hi: f64, p_lo: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(p)
        .filter(|(_, &pv)| pv <= p_hi && pv >= p_lo && pv > 0.0)
        .map(|(&tv, &pv)| (tv, pv.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Some(-sxy / sxx)
}
