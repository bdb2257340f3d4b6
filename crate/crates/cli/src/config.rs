//! TOML experiment configuration. Every key is optional except where an experiment needs it;
//! unknown keys are rejected.

use std::f64::consts::PI;
use std::path::Path;

use chiralguide::markov::g0_for_gamma0;
use chiralguide::params::{Coupling, QubitSpec, TransmonCircuit, WaveguideSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::units::{Context, Dimension, Quantity};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub waveguide: RawWaveguide,
    #[serde(default)]
    pub qubits: Vec<RawQubit>,
    #[serde(default)]
    pub numerics: RawNumerics,
    pub sweep: Option<RawSweep>,
    pub network: Option<RawNetwork>,
    pub oracle: Option<RawOracle>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawWaveguide {
    pub preset: Option<String>,
    pub d0: Option<Quantity>,
    pub c_g: Option<Quantity>,
    pub c_j: Option<Quantity>,
    pub l0: Option<Quantity>,
    pub alpha0: Option<f64>,
    pub delta_alpha: Option<f64>,
    pub kd: Option<Quantity>,
    pub vd: Option<Quantity>,
    pub n_floquet: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawQubit {
    pub frequency: Quantity,
    pub position: Option<Quantity>,
    pub gamma0: Option<Quantity>,
    pub g0: Option<Quantity>,
    pub circuit: Option<RawCircuit>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCircuit {
    pub capacitance_ratio: f64,
    pub ej_over_ec: f64,
    #[serde(default)]
    pub per_mode: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawNumerics {
    pub n_k: Option<usize>,
    pub n_cells: Option<usize>,
    pub bands: Option<Vec<usize>>,
    pub window: Option<[Quantity; 2]>,
    pub t_final: Option<Quantity>,
    pub dt_out: Option<Quantity>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub weight_threshold: Option<f64>,
    pub snapshots: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRange {
    pub start: Quantity,
    pub stop: Quantity,
    pub points: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    pub frequencies: RawRange,
    pub vd: Option<Vec<Quantity>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawNetwork {
    pub separation: Quantity,
    #[serde(default)]
    pub phases: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOracle {
    pub wavelengths: Option<usize>,
    pub coarse: Option<usize>,
    pub duration: Option<Quantity>,
    pub threshold: Option<f64>,
    pub max_frequency: Option<Quantity>,
    pub write_map: Option<bool>,
}

/// Fully resolved configuration in SI units, as recorded in the run manifest.
#[derive(Debug, Clone, Serialize)]
pub struct Config {
    pub waveguide: WaveguideSpec,
    pub qubits: Vec<Qubit>,
    pub numerics: Numerics,
    pub sweep: Option<Sweep>,
    pub network: Option<Network>,
    pub oracle: Oracle,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Qubit {
    pub omega_q: f64,
    pub x: f64,
    pub coupling: QubitCoupling,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub enum QubitCoupling {
    /// Bare decay rate Γ₀ (rad/s); g₀ follows from the ring length.
    Gamma0(f64),
    Direct(f64),
    Circuit(TransmonCircuit, bool),
}

impl Qubit {
    /// Core qubit on a ring of length `l`.
    pub fn spec(&self, waveguide: &WaveguideSpec, l: f64) -> QubitSpec {
        let coupling = match self.coupling {
            QubitCoupling::Gamma0(gamma0) => Coupling::Direct(g0_for_gamma0(gamma0, &waveguide.densities(), l)),
            QubitCoupling::Direct(g) => Coupling::Direct(g),
            QubitCoupling::Circuit(c, false) => Coupling::Circuit(c),
            QubitCoupling::Circuit(c, true) => Coupling::CircuitPerMode(c),
        };
        QubitSpec { omega_q: self.omega_q, x: self.x, coupling }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Numerics {
    pub n_k: usize,
    pub n_cells: usize,
    pub bands: Vec<usize>,
    /// Mode window (rad/s); `None` means ±0.5 GHz around the qubits.
    pub window: Option<(f64, f64)>,
    pub t_final: Option<f64>,
    pub dt_out: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
    pub weight_threshold: f64,
    pub snapshots: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Sweep {
    pub omega: Vec<f64>,
    /// Drive speeds (m/s).
    pub vd: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Network {
    pub separation: f64,
    pub phases: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Oracle {
    pub wavelengths: usize,
    pub coarse: usize,
    pub duration: f64,
    pub threshold: f64,
    pub max_omega: f64,
    pub write_map: bool,
}

pub const DEFAULT_WINDOW_HALF_WIDTH: f64 = 2.0 * PI * 0.5e9;

fn key<T>(r: Result<T, String>, key: &str) -> Result<T, CliError> {
    r.map_err(|e| CliError::Config(format!("{key}: {e}")))
}

fn quantity(q: &Quantity, dim: Dimension, ctx: &Context, name: &str) -> Result<f64, CliError> {
    key(q.to_si(dim, ctx), name)
}

pub fn load(path: Option<&Path>) -> Result<Config, CliError> {
    let raw = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            parse(&text)?
        }
        None => RawConfig::default(),
    };
    resolve(&raw)
}

pub fn parse(text: &str) -> Result<RawConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
}

pub fn resolve(raw: &RawConfig) -> Result<Config, CliError> {
    let waveguide = resolve_waveguide(&raw.waveguide)?;
    let ctx = Context { v0: Some(waveguide.v0()), lambda_d: Some(waveguide.lambda_d()) };
    let mut qubits = Vec::new();
    for (i, q) in raw.qubits.iter().enumerate() {
        let name = |field: &str| format!("qubits[{i}].{field}");
        let omega_q = quantity(&q.frequency, Dimension::Frequency, &ctx, &name("frequency"))?;
        let x = match &q.position {
            Some(p) => quantity(p, Dimension::Length, &ctx, &name("position"))?,
            None => 0.0,
        };
        let coupling = match (&q.gamma0, &q.g0, &q.circuit) {
            (Some(g), None, None) => QubitCoupling::Gamma0(quantity(g, Dimension::Frequency, &ctx, &name("gamma0"))?),
            (None, Some(g), None) => QubitCoupling::Direct(quantity(g, Dimension::Frequency, &ctx, &name("g0"))?),
            (None, None, Some(c)) => QubitCoupling::Circuit(
                TransmonCircuit { capacitance_ratio: c.capacitance_ratio, ej_over_ec: c.ej_over_ec },
                c.per_mode,
            ),
            _ => return Err(CliError::Config(format!("qubits[{i}]: give exactly one of gamma0, g0, circuit"))),
        };
        qubits.push(Qubit { omega_q, x, coupling });
    }
    let n = &raw.numerics;
    let window = match &n.window {
        Some([lo, hi]) => Some((
            quantity(lo, Dimension::Frequency, &ctx, "numerics.window")?,
            quantity(hi, Dimension::Frequency, &ctx, "numerics.window")?,
        )),
        None => None,
    };
    let opt_time = |q: &Option<Quantity>, name: &str| -> Result<Option<f64>, CliError> {
        q.as_ref().map(|q| quantity(q, Dimension::Time, &ctx, name)).transpose()
    };
    let numerics = Numerics {
        n_k: n.n_k.unwrap_or(512),
        n_cells: n.n_cells.unwrap_or(12000),
        bands: n.bands.clone().unwrap_or_else(|| vec![0, 1]),
        window,
        t_final: opt_time(&n.t_final, "numerics.t_final")?,
        dt_out: opt_time(&n.dt_out, "numerics.dt_out")?,
        rtol: n.rtol.unwrap_or(1e-10),
        atol: n.atol.unwrap_or(1e-13),
        weight_threshold: n.weight_threshold.unwrap_or(chiralguide::floquet::DEFAULT_WEIGHT_THRESHOLD),
        snapshots: n.snapshots.unwrap_or(12),
    };
    if numerics.n_k < 2 {
        return Err(CliError::Config("numerics.n_k: must be >= 2".into()));
    }
    if !(numerics.rtol > 0.0 && numerics.atol > 0.0) {
        return Err(CliError::Config("numerics.rtol/atol: must be > 0".into()));
    }
    let sweep = match &raw.sweep {
        Some(s) => {
            let lo = quantity(&s.frequencies.start, Dimension::Frequency, &ctx, "sweep.frequencies.start")?;
            let hi = quantity(&s.frequencies.stop, Dimension::Frequency, &ctx, "sweep.frequencies.stop")?;
            let points = s.frequencies.points;
            if points == 0 {
                return Err(CliError::Config("sweep.frequencies.points: must be >= 1".into()));
            }
            let omega = (0..points)
                .map(|i| if points == 1 { lo } else { lo + (hi - lo) * i as f64 / (points - 1) as f64 })
                .collect();
            let vd = match &s.vd {
                Some(list) => list
                    .iter()
                    .enumerate()
                    .map(|(i, q)| quantity(q, Dimension::Velocity, &ctx, &format!("sweep.vd[{i}]")))
                    .collect::<Result<_, _>>()?,
                None => vec![waveguide.vd],
            };
            Some(Sweep { omega, vd })
        }
        None => None,
    };
    let network = match &raw.network {
        Some(nw) => Some(Network {
            separation: quantity(&nw.separation, Dimension::Length, &ctx, "network.separation")?,
            phases: nw.phases,
        }),
        None => None,
    };
    let o = raw.oracle.clone().unwrap_or_default();
    let oracle = Oracle {
        wavelengths: o.wavelengths.unwrap_or(16),
        coarse: o.coarse.unwrap_or(10),
        duration: match &o.duration {
            Some(q) => quantity(q, Dimension::Time, &ctx, "oracle.duration")?,
            None => 60e-9,
        },
        threshold: o.threshold.unwrap_or(1e-3),
        max_omega: match &o.max_frequency {
            Some(q) => quantity(q, Dimension::Frequency, &ctx, "oracle.max_frequency")?,
            None => 2.0 * PI * 8e9,
        },
        write_map: o.write_map.unwrap_or(false),
    };
    Ok(Config { waveguide, qubits, numerics, sweep, network, oracle })
}

fn resolve_waveguide(w: &RawWaveguide) -> Result<WaveguideSpec, CliError> {
    let base = match w.preset.as_deref() {
        None | Some("table1") => WaveguideSpec::table1(0.05),
        Some("table1-printed") => WaveguideSpec::table1_printed(0.05),
        Some(other) => {
            return Err(CliError::Config(format!(
                "waveguide.preset: unknown preset \"{other}\" (table1, table1-printed)"
            )))
        }
    };
    let none = Context::default();
    let mut spec = base;
    if let Some(q) = &w.d0 {
        spec.d0 = quantity(q, Dimension::Length, &none, "waveguide.d0")?;
    }
    if let Some(q) = &w.c_g {
        spec.c_g = quantity(q, Dimension::Capacitance, &none, "waveguide.c_g")?;
    }
    if let Some(q) = &w.c_j {
        spec.c_j = quantity(q, Dimension::Capacitance, &none, "waveguide.c_j")?;
    }
    if let Some(q) = &w.l0 {
        spec.l0 = quantity(q, Dimension::Inductance, &none, "waveguide.l0")?;
    }
    if let Some(a) = w.alpha0 {
        spec.alpha0 = a;
    }
    if let Some(a) = w.delta_alpha {
        spec.delta_alpha = a;
    }
    if let Some(q) = &w.kd {
        spec.kd = quantity(q, Dimension::Wavenumber, &none, "waveguide.kd")?;
    }
    if let Some(n) = w.n_floquet {
        spec.n_floquet = n;
    }
    // vd may be relative to v0 of the chain defined so far
    let ctx = Context { v0: Some(spec.v0()), lambda_d: Some(spec.lambda_d()) };
    spec.vd = match &w.vd {
        Some(q) => quantity(q, Dimension::Velocity, &ctx, "waveguide.vd")?,
        None => 0.05 * spec.v0(),
    };
    Ok(spec)
}
