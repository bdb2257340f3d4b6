use nalgebra::{DMatrix, DVector};

use super::modes::ModeSet;
use crate::error::{invalid, Error, Result};
use crate::floquet::C64;
use crate::params::QubitSpec;

/// Required distance between each qubit frequency and the window edges, in units of Γ₀.
pub const WINDOW_MARGIN_GAMMA0: f64 = 20.0;

/// Qubits coupled to a discretized Floquet bath in the single-excitation sector.
///
/// State layout: mode amplitudes first, then qubit amplitudes, all in the interaction picture.
#[derive(Debug, Clone)]
pub struct EmissionSystem {
    pub modes: ModeSet,
    pub qubits: Vec<QubitSpec>,
    /// `coef[(i·M + m)·N + h]` = g_im u_mh e^{i q_mh x_i}.
    coef: Vec<C64>,
    n_harm: usize,
}

impl EmissionSystem {
    pub fn new(modes: ModeSet, qubits: Vec<QubitSpec>) -> Result<Self> {
        if qubits.is_empty() {
            return Err(invalid("qubits", "at least one qubit is required"));
        }
        for q in &qubits {
            q.validate()?;
            if q.x.abs() >= 0.5 * modes.length {
                return Err(invalid(
                    "x",
                    format!("qubit at {} m lies outside the ring of length {} m", q.x, modes.length),
                ));
            }
        }
        let dens = modes.spec.densities();
        for q in &qubits {
            let gamma0 = q.g0(&dens, modes.length).powi(2) * modes.length / dens.v0;
            let margin = (q.omega_q - modes.window.0).min(modes.window.1 - q.omega_q);
            let required = WINDOW_MARGIN_GAMMA0 * gamma0;
            if margin < required {
                return Err(Error::WindowTooNarrow { margin, required });
            }
        }
        let n_harm = modes.spec.n_harmonics();
        let mut coef = Vec::with_capacity(qubits.len() * modes.len() * n_harm);
        for q in &qubits {
            for (j, mode) in modes.modes.iter().enumerate() {
                let g = q.g(mode.omega, &dens, modes.length);
                for (h, u) in mode.u.iter().enumerate() {
                    let phase = C64::from_polar(1.0, modes.q(j, h) * q.x);
                    coef.push(*u * phase * g);
                }
            }
        }
        Ok(EmissionSystem { modes, qubits, coef, n_harm })
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn dim(&self) -> usize {
        self.n_modes() + self.n_qubits()
    }

    /// Γ₀ = g₀²L/v₀ of qubit `i`.
    pub fn gamma0(&self, i: usize) -> f64 {
        let dens = self.modes.spec.densities();
        self.qubits[i].g0(&dens, self.modes.length).powi(2) * self.modes.length / dens.v0
    }

    /// Qubit `i` excited, field in vacuum.
    pub fn excited(&self, i: usize) -> DVector<C64> {
        let mut s = DVector::zeros(self.dim());
        s[self.n_modes() + i] = C64::new(1.0, 0.0);
        s
    }

    /// Qubit-mode couplings H_im(t) for one qubit, in mode order.
    fn couplings_into(&self, t: f64, i: usize, out: &mut [C64]) {
        let nf = self.modes.spec.n_floquet as f64;
        let om = self.modes.spec.omega_d();
        let drive: Vec<C64> = (0..self.n_harm).map(|h| C64::from_polar(1.0, -(h as f64 - nf) * om * t)).collect();
        let qubit_phase = C64::from_polar(1.0, self.qubits[i].omega_q * t);
        let m_total = self.n_modes();
        for (m, mode) in self.modes.modes.iter().enumerate() {
            let base = (i * m_total + m) * self.n_harm;
            let mut acc = C64::new(0.0, 0.0);
            for h in 0..self.n_harm {
                acc += self.coef[base + h] * drive[h];
            }
            out[m] = acc * qubit_phase * C64::from_polar(1.0, -mode.omega * t);
        }
    }

    /// `out = H(t)·state`.
    pub fn apply_hamiltonian(&self, t: f64, state: &[C64], out: &mut [C64]) {
        let m_total = self.n_modes();
        out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        let mut h = vec![C64::new(0.0, 0.0); m_total];
        for i in 0..self.n_qubits() {
            self.couplings_into(t, i, &mut h);
            let c = state[m_total + i];
            let mut acc = C64::new(0.0, 0.0);
            for m in 0..m_total {
                acc += h[m] * state[m];
                out[m] += h[m].conj() * c;
            }
            out[m_total + i] = acc;
        }
    }

    /// Dense H(t). Intended for small systems and checks.
    pub fn hamiltonian_matrix(&self, t: f64) -> DMatrix<C64> {
        let m_total = self.n_modes();
        let mut hm = DMatrix::zeros(self.dim(), self.dim());
        let mut h = vec![C64::new(0.0, 0.0); m_total];
        for i in 0..self.n_qubits() {
            self.couplings_into(t, i, &mut h);
            for m in 0..m_total {
                hm[(m_total + i, m)] = h[m];
                hm[(m, m_total + i)] = h[m].conj();
            }
        }
        hm
    }
}
