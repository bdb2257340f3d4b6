//! Time-domain simulation of the discrete Kirchhoff equation of the modulated SQUID chain.
//!
//! Node j sits at x_j = j·d and link j joins nodes j−1 and j with inverse inductance
//! G_j(t) = (α₀ + δα·cos(Ωt − k_d x_j))/L. Each step solves
//! (C_g + C_J·(2 − S))·φ̈ = F(φ, t), S the nearest-neighbour shift, for the accelerations.

mod dispersion;
mod tridiag;

pub use dispersion::{
    compare_gap_edges, compare_ridges, extract_dispersion, floquet_lab_frequencies, ridges, BranchCheck, DispersionMap,
    LabBranch, RidgePoint,
};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::params::WaveguideSpec;
use tridiag::MassMatrix;

/// Default time step as a fraction of d/v_max.
pub const DEFAULT_COURANT: f64 = 0.2;
/// Default absorbing layer width, in λ_d.
pub const DEFAULT_ABSORBER_WIDTH: f64 = 5.0;
/// With sources off, energy above this multiple of its reference value is an instability.
pub const INSTABILITY_GROWTH: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Boundary {
    /// Open ends with an exponential damping ramp of the given width (m) inside each end.
    Absorbing { width: f64 },
    /// Ring; the length must hold a whole number of modulation wavelengths.
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub spec: WaveguideSpec,
    pub n_sites: usize,
    /// Physical cells per simulated site.
    pub coarse: usize,
    pub boundary: Boundary,
    /// Time step in units of d/v_max.
    pub courant: f64,
    /// Modulated span [lo, hi] in m; the chain is static outside. `None` modulates everywhere.
    pub modulated: Option<(f64, f64)>,
}

impl LatticeConfig {
    pub fn new(spec: WaveguideSpec, n_sites: usize, coarse: usize, boundary: Boundary) -> Self {
        LatticeConfig { spec, n_sites, coarse, boundary, courant: DEFAULT_COURANT, modulated: None }
    }

    pub fn absorbing(spec: WaveguideSpec, n_sites: usize, coarse: usize) -> Self {
        let width = DEFAULT_ABSORBER_WIDTH * spec.lambda_d();
        Self::new(spec, n_sites, coarse, Boundary::Absorbing { width })
    }

    pub fn spacing(&self) -> f64 {
        self.coarse as f64 * self.spec.d0
    }
}

/// Initial conditions and sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Source {
    /// Gaussian packet of carrier ω on the static chain, centred at `x0`, moving right for
    /// `direction` > 0 and left otherwise.
    Packet { x0: f64, sigma: f64, omega: f64, direction: f64, amplitude: f64 },
    /// φ̇ = `amplitude` at the site nearest `x0`: every wavenumber at once.
    Kick { x0: f64, amplitude: f64 },
    /// Current I(t) = amplitude·sin(ωt) injected at the site nearest `x0`, switched on over
    /// `ramp` seconds with a sin² envelope and off at `until`.
    Drive { x0: f64, omega: f64, amplitude: f64, ramp: f64, until: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    pub t: f64,
    pub phi: Vec<f64>,
    pub phi_dot: Vec<f64>,
    accel: Vec<f64>,
}

/// Samples of φ on every `site_stride`-th site every `step_stride` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordSpec {
    pub step_stride: usize,
    pub site_stride: usize,
    pub first_site: usize,
    pub n_sites: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeRecord {
    pub x0: f64,
    pub dx: f64,
    pub t0: f64,
    pub dt: f64,
    /// `data[i][j]`: φ at time t0 + i·dt and position x0 + j·dx.
    pub data: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeRun {
    pub state: LatticeState,
    /// (t, E) after every step.
    pub energy: Vec<(f64, f64)>,
    pub record: Option<SpaceTimeRecord>,
}

#[derive(Debug, Clone)]
pub struct Lattice {
    pub config: LatticeConfig,
    pub d: f64,
    pub dt: f64,
    cg: f64,
    cj: f64,
    inv_l: f64,
    x: Vec<f64>,
    modulated: Vec<bool>,
    damping: Vec<f64>,
    mass: MassMatrix,
}

impl Lattice {
    pub fn new(config: LatticeConfig) -> Result<Self> {
        let spec = config.spec;
        spec.validate()?;
        spec.check_regime()?;
        if config.coarse == 0 {
            return Err(invalid("coarse", "must be >= 1"));
        }
        if !(config.courant.is_finite() && config.courant > 0.0) {
            return Err(invalid("courant", format!("must be finite and > 0, got {}", config.courant)));
        }
        let n = config.n_sites;
        let d = config.spacing();
        let lambda_d = spec.lambda_d();
        if (n as f64) * d < 10.0 * lambda_d * (1.0 - 1e-12) {
            return Err(invalid("n_sites", format!("chain of {n} sites is shorter than 10 λ_d")));
        }
        let s = config.coarse as f64;
        let (cg, cj, inv_l) = (s * spec.c_g, spec.c_j / s, 1.0 / (s * spec.l0));
        let x: Vec<f64> = (0..n).map(|j| j as f64 * d).collect();
        let modulated = x.iter().map(|&xj| config.modulated.is_none_or(|(lo, hi)| xj >= lo && xj <= hi)).collect();
        let v_max = spec.v0() * ((spec.alpha0 + spec.delta_alpha.abs()) / spec.alpha0).sqrt();
        let dt = config.courant * d / v_max;
        let mut damping = vec![0.0; n];
        let periodic = match config.boundary {
            Boundary::Periodic => {
                let cycles = n as f64 * d / lambda_d;
                if (cycles - cycles.round()).abs() > 1e-9 * cycles {
                    return Err(invalid(
                        "n_sites",
                        format!("ring holds {cycles} modulation wavelengths, not a whole number"),
                    ));
                }
                true
            }
            Boundary::Absorbing { width } => {
                if !(width > 0.0 && 2.0 * width < n as f64 * d) {
                    return Err(invalid("absorber width", format!("{width} m does not fit the chain")));
                }
                // damping rate at the wall: several e-folds across the layer at v₀
                let gamma_max = 30.0 * spec.v0() / width;
                let ramp = |depth: f64| gamma_max * ((3.0 * depth).exp() - 1.0) / (3f64.exp() - 1.0);
                for (j, g) in damping.iter_mut().enumerate() {
                    let from_edge = (x[j] - x[0]).min(x[n - 1] - x[j]);
                    if from_edge < width {
                        *g = ramp(1.0 - from_edge / width);
                    }
                }
                false
            }
        };
        let mass = MassMatrix::new(n, cg, cj, periodic);
        Ok(Lattice { config, d, dt, cg, cj, inv_l, x, modulated, damping, mass })
    }

    pub fn n_sites(&self) -> usize {
        self.x.len()
    }

    pub fn positions(&self) -> &[f64] {
        &self.x
    }

    fn periodic(&self) -> bool {
        matches!(self.config.boundary, Boundary::Periodic)
    }

    /// 1/L_j of the link joining nodes j−1 and j.
    pub fn inverse_inductance(&self, j: usize, t: f64) -> f64 {
        let spec = &self.config.spec;
        let f = if self.modulated[j] { (spec.omega_d() * t - spec.kd * self.x[j]).cos() } else { 0.0 };
        (spec.alpha0 + spec.delta_alpha * f) * self.inv_l
    }

    fn site(&self, x0: f64) -> usize {
        ((x0 - self.x[0]) / self.d).round().clamp(0.0, (self.n_sites() - 1) as f64) as usize
    }

    /// Net current into each node from the inductive links, plus an injected current.
    fn force(&self, phi: &[f64], t: f64, injected: Option<(usize, f64)>, out: &mut [f64]) {
        let n = phi.len();
        out.iter_mut().for_each(|f| *f = 0.0);
        let first = if self.periodic() { 0 } else { 1 };
        for j in first..n {
            let prev = if j == 0 { n - 1 } else { j - 1 };
            let current = self.inverse_inductance(j, t) * (phi[j] - phi[prev]);
            out[j] -= current;
            out[prev] += current;
        }
        if let Some((site, i)) = injected {
            out[site] += i;
        }
    }

    fn drive_current(&self, source: Option<&Source>, t: f64) -> Option<(usize, f64)> {
        match source {
            Some(Source::Drive { x0, omega, amplitude, ramp, until }) if t <= *until => {
                let env =
                    if *ramp > 0.0 && t < *ramp { (0.5 * std::f64::consts::PI * t / ramp).sin().powi(2) } else { 1.0 };
                Some((self.site(*x0), amplitude * env * (omega * t).sin()))
            }
            _ => None,
        }
    }

    fn sources_off(&self, source: Option<&Source>, t: f64) -> bool {
        !matches!(source, Some(Source::Drive { until, .. }) if t <= *until)
    }

    fn accelerations(&self, phi: &[f64], t: f64, source: Option<&Source>, out: &mut [f64]) {
        self.force(phi, t, self.drive_current(source, t), out);
        self.mass.solve(out);
    }

    /// Frequency and group velocity of the static discrete chain at wavenumber k.
    pub fn static_dispersion(&self, k: f64) -> (f64, f64) {
        let g = self.config.spec.alpha0 * self.inv_l;
        let omega = |k: f64| {
            let s = (0.5 * k * self.d).sin().powi(2);
            (4.0 * g * s / (self.cg + 4.0 * self.cj * s)).sqrt()
        };
        let h = 1e-6 * k.abs().max(1.0 / self.d * 1e-3);
        (omega(k), (omega(k + h) - omega(k - h)) / (2.0 * h))
    }

    /// Inverts the static dispersion for 0 < ω below the band top.
    pub fn static_wavenumber(&self, omega: f64) -> Result<f64> {
        let (top, _) = self.static_dispersion(std::f64::consts::PI / self.d);
        if !(omega > 0.0 && omega < top) {
            return Err(invalid("omega", format!("{omega} rad/s is outside the static band (0, {top})")));
        }
        let (mut lo, mut hi) = (0.0, std::f64::consts::PI / self.d);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.static_dispersion(mid).0 < omega {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    pub fn initial_state(&self, source: Option<&Source>) -> Result<LatticeState> {
        let n = self.n_sites();
        let mut phi = vec![0.0; n];
        let mut phi_dot = vec![0.0; n];
        match source {
            Some(Source::Packet { x0, sigma, omega, direction, amplitude }) => {
                if *sigma < 10.0 * self.config.spec.d0 {
                    return Err(invalid("sigma", "packet width must be at least 10 d₀"));
                }
                let k = self.static_wavenumber(*omega)?;
                let (_, vg) = self.static_dispersion(k);
                let s = if *direction > 0.0 { 1.0 } else { -1.0 };
                for j in 0..n {
                    let u = self.x[j] - x0;
                    let env = amplitude * (-0.5 * u * u / (sigma * sigma)).exp();
                    let denv = -u / (sigma * sigma) * env;
                    let ph = s * k * u;
                    // φ = env(x − s v_g t)·cos(s k x − ω t)
                    phi[j] = env * ph.cos();
                    phi_dot[j] = env * omega * ph.sin() - s * vg * denv * ph.cos();
                }
            }
            Some(Source::Kick { x0, amplitude }) => {
                phi_dot[self.site(*x0)] = *amplitude;
            }
            Some(Source::Drive { .. }) | None => {}
        }
        let mut accel = vec![0.0; n];
        self.accelerations(&phi, 0.0, source, &mut accel);
        Ok(LatticeState { t: 0.0, phi, phi_dot, accel })
    }

    /// ½φ̇ᵀMφ̇ + ½Σ G_j(t)(φ_j − φ_{j−1})².
    pub fn energy(&self, state: &LatticeState) -> f64 {
        let n = self.n_sites();
        let v = &state.phi_dot;
        let mut kinetic = 0.0;
        let mut potential = 0.0;
        let first = if self.periodic() { 0 } else { 1 };
        for j in 0..n {
            kinetic += self.cg * v[j] * v[j];
        }
        for j in first..n {
            let prev = if j == 0 { n - 1 } else { j - 1 };
            kinetic += self.cj * (v[j] - v[prev]).powi(2);
            potential += self.inverse_inductance(j, state.t) * (state.phi[j] - state.phi[prev]).powi(2);
        }
        0.5 * (kinetic + potential)
    }

    /// One velocity-Verlet step of length `dt`, with the absorber damping split symmetrically
    /// around it.
    pub fn step_lattice(&self, state: &mut LatticeState, dt: f64, source: Option<&Source>) {
        let half_damp: Vec<f64> = self.damping.iter().map(|g| (-0.5 * g * dt).exp()).collect();
        for (v, f) in state.phi_dot.iter_mut().zip(&half_damp) {
            *v *= f;
        }
        for j in 0..state.phi.len() {
            state.phi_dot[j] += 0.5 * dt * state.accel[j];
            state.phi[j] += dt * state.phi_dot[j];
        }
        state.t += dt;
        let mut accel = std::mem::take(&mut state.accel);
        self.accelerations(&state.phi, state.t, source, &mut accel);
        state.accel = accel;
        for j in 0..state.phi.len() {
            state.phi_dot[j] += 0.5 * dt * state.accel[j];
            state.phi_dot[j] *= half_damp[j];
        }
    }

    /// Advances `n_steps` of the default step. With sources off, energy exceeding
    /// [`INSTABILITY_GROWTH`] times its value at source shutoff is reported as an instability.
    pub fn run(
        &self,
        mut state: LatticeState,
        n_steps: usize,
        source: Option<&Source>,
        record: Option<RecordSpec>,
    ) -> Result<LatticeRun> {
        let dt = self.dt;
        let mut energy = Vec::with_capacity(n_steps + 1);
        let mut reference: Option<f64> = None;
        let e0 = self.energy(&state);
        energy.push((state.t, e0));
        if self.sources_off(source, state.t) {
            reference = Some(e0);
        }
        let mut rec = match record {
            Some(r) => {
                if r.step_stride == 0 || r.site_stride == 0 || r.n_sites == 0 {
                    return Err(invalid("record", "strides and site count must be >= 1"));
                }
                if r.first_site + (r.n_sites - 1) * r.site_stride >= self.n_sites() {
                    return Err(invalid("record", "recorded sites run past the chain"));
                }
                Some(SpaceTimeRecord {
                    x0: self.x[r.first_site],
                    dx: r.site_stride as f64 * self.d,
                    t0: state.t,
                    dt: r.step_stride as f64 * dt,
                    data: Vec::with_capacity(n_steps / r.step_stride + 1),
                })
            }
            None => None,
        };
        let sample = |state: &LatticeState, rec: &mut Option<SpaceTimeRecord>| {
            if let (Some(r), Some(out)) = (record, rec.as_mut()) {
                out.data.push((0..r.n_sites).map(|i| state.phi[r.first_site + i * r.site_stride]).collect());
            }
        };
        sample(&state, &mut rec);
        for step in 1..=n_steps {
            self.step_lattice(&mut state, dt, source);
            let e = self.energy(&state);
            energy.push((state.t, e));
            if !e.is_finite() {
                return Err(Error::Instability { from: reference.unwrap_or(e0), to: e });
            }
            if self.sources_off(source, state.t) {
                match reference {
                    None => reference = Some(e),
                    Some(r) if e > INSTABILITY_GROWTH * r && e > 0.0 => {
                        return Err(Error::Instability { from: r, to: e });
                    }
                    _ => {}
                }
            }
            if let Some(r) = record {
                if step % r.step_stride == 0 {
                    sample(&state, &mut rec);
                }
            }
        }
        Ok(LatticeRun { state, energy, record: rec })
    }

    /// Energy on sites with `lo ≤ x ≤ hi`, splitting link energy between its two nodes.
    pub fn energy_between(&self, state: &LatticeState, lo: f64, hi: f64) -> f64 {
        let n = self.n_sites();
        let inside = |j: usize| self.x[j] >= lo && self.x[j] <= hi;
        let mut e = 0.0;
        for j in 0..n {
            if inside(j) {
                e += 0.5 * self.cg * state.phi_dot[j].powi(2);
            }
        }
        let first = if self.periodic() { 0 } else { 1 };
        for j in first..n {
            let prev = if j == 0 { n - 1 } else { j - 1 };
            let link = 0.5 * self.cj * (state.phi_dot[j] - state.phi_dot[prev]).powi(2)
                + 0.5 * self.inverse_inductance(j, state.t) * (state.phi[j] - state.phi[prev]).powi(2);
            let share = 0.5 * (inside(j) as u8 as f64 + inside(prev) as u8 as f64);
            e += share * link;
        }
        e
    }
}

/// Samples per period of the highest frequency of interest kept by [`kicked_ring`].
const RECORD_OVERSAMPLING: f64 = 2.5;

/// Periodic ring of `wavelengths` modulation wavelengths, kicked at x = 0 and recorded at every
/// site for `duration`. The record stride keeps `omega_max` below the temporal Nyquist frequency.
pub fn kicked_ring(
    spec: WaveguideSpec,
    wavelengths: usize,
    coarse: usize,
    duration: f64,
    omega_max: f64,
) -> Result<(Lattice, SpaceTimeRecord)> {
    if !(duration > 0.0 && omega_max > 0.0) {
        return Err(invalid("duration", "duration and omega_max must be > 0"));
    }
    let sites_per_ld = (spec.lambda_d() / (coarse.max(1) as f64 * spec.d0)).round() as usize;
    let lat = Lattice::new(LatticeConfig::new(spec, sites_per_ld * wavelengths, coarse, Boundary::Periodic))?;
    let period = 2.0 * std::f64::consts::PI / omega_max;
    let step_stride = ((period / (RECORD_OVERSAMPLING * lat.dt)).floor() as usize).clamp(1, 16);
    let init = lat.initial_state(Some(&Source::Kick { x0: 0.0, amplitude: 1.0 }))?;
    let rec = RecordSpec { step_stride, site_stride: 1, first_site: 0, n_sites: lat.n_sites() };
    let run = lat.run(init, (duration / lat.dt).ceil() as usize, None, Some(rec))?;
    let record = run.record.expect("record requested");
    Ok((lat, record))
}
