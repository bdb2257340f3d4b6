//! Circuit parameters, per-length densities and regime checks. Everything is SI.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Magnetic flux quantum h/2e (Wb).
pub const FLUX_QUANTUM: f64 = 2.067833848e-15;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054571817e-34;
/// Elementary charge (C).
pub const ELEMENTARY_CHARGE: f64 = 1.602176634e-19;

/// The c_J ratio above which the Josephson capacitance is no longer negligible.
pub const CJ_RATIO_WARN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveguideSpec {
    /// Cell length (m).
    pub d0: f64,
    /// Ground capacitance per cell (F).
    pub c_g: f64,
    /// Josephson capacitance per cell (F).
    pub c_j: f64,
    /// Bare Josephson inductance per cell (H).
    pub l0: f64,
    pub alpha0: f64,
    pub delta_alpha: f64,
    /// Modulation wavenumber (rad/m).
    pub kd: f64,
    /// Modulation phase velocity (m/s). The sign sets the drive direction.
    pub vd: f64,
    pub n_floquet: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedDensities {
    pub cg: f64,
    pub cj: f64,
    pub lj: f64,
    pub v0: f64,
    pub omega_d: f64,
    pub lambda_d: f64,
}

impl WaveguideSpec {
    /// Table 1 chain with the modulation depth δα/α₀ = 0.3 that reproduces the
    /// published spectra, at `vd = vd_over_v0 · v0`.
    pub fn table1(vd_over_v0: f64) -> Self {
        let mut spec = Self::table1_printed(vd_over_v0);
        spec.delta_alpha = 0.3 * spec.alpha0;
        spec
    }

    /// Table 1 exactly as printed (δα/α₀ = 0.15).
    pub fn table1_printed(vd_over_v0: f64) -> Self {
        let mut spec = WaveguideSpec {
            d0: 1e-6,
            c_g: 0.2e-15,
            c_j: 100e-15,
            l0: 0.2e-9,
            alpha0: 0.3,
            delta_alpha: 0.045,
            kd: 2.0 * PI * 0.25e4,
            vd: 0.0,
            n_floquet: 2,
        };
        spec.vd = vd_over_v0 * spec.v0();
        spec
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<()> {
        let positive = |field: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(field, format!("must be finite and > 0, got {v}")))
            }
        };
        positive("d0", self.d0)?;
        positive("c_g", self.c_g)?;
        positive("l0", self.l0)?;
        positive("kd", self.kd)?;
        if !(self.c_j.is_finite() && self.c_j >= 0.0) {
            return Err(invalid("c_j", format!("must be finite and >= 0, got {}", self.c_j)));
        }
        if !(self.alpha0 > 0.0 && self.alpha0 <= 1.0) {
            return Err(invalid("alpha0", format!("must lie in (0, 1], got {}", self.alpha0)));
        }
        if !(self.delta_alpha.is_finite() && self.delta_alpha.abs() < self.alpha0) {
            return Err(invalid(
                "delta_alpha",
                format!("|delta_alpha| must be below alpha0 = {}, got {}", self.alpha0, self.delta_alpha),
            ));
        }
        if !(self.vd.is_finite() && self.vd != 0.0) {
            return Err(invalid("vd", format!("must be finite and nonzero, got {}", self.vd)));
        }
        if self.n_floquet == 0 {
            return Err(invalid("n_floquet", "must be >= 1"));
        }
        Ok(())
    }

    /// Rejects drive speeds at or beyond the static wave speed, where quasi-energies turn complex.
    pub fn check_regime(&self) -> Result<()> {
        let v0 = self.v0();
        if self.vd.abs() >= v0 {
            return Err(Error::RegimeViolation(format!(
                "|vd| = {:.4e} m/s is not below v0 = {:.4e} m/s",
                self.vd.abs(),
                v0
            )));
        }
        Ok(())
    }

    pub fn densities(&self) -> DerivedDensities {
        let cg = self.c_g / self.d0;
        let lj = self.l0 / self.d0;
        DerivedDensities {
            cg,
            cj: self.c_j / self.d0,
            lj,
            v0: (self.alpha0 / (lj * cg)).sqrt(),
            omega_d: self.vd * self.kd,
            lambda_d: 2.0 * PI / self.kd,
        }
    }

    /// Wave speed of the static chain including the α₀ bias factor.
    pub fn v0(&self) -> f64 {
        self.densities().v0
    }

    /// 1/sqrt(l_J c_g), without the α₀ factor.
    pub fn v0_bare(&self) -> f64 {
        let d = self.densities();
        1.0 / (d.lj * d.cg).sqrt()
    }

    pub fn omega_d(&self) -> f64 {
        self.vd * self.kd
    }

    pub fn lambda_d(&self) -> f64 {
        2.0 * PI / self.kd
    }

    /// Number of Floquet harmonics, 2·n_floquet + 1.
    pub fn n_harmonics(&self) -> usize {
        2 * self.n_floquet + 1
    }

    /// Largest |k + n k_d| reached on the first Brillouin zone.
    pub fn k_max(&self) -> f64 {
        self.kd * (self.n_floquet as f64 + 0.5)
    }

    /// c_J d₀² k_max² / c_g. Values at or above [`CJ_RATIO_WARN`] mean c_J matters.
    pub fn cj_ratio(&self, k_max: f64) -> f64 {
        let d = self.densities();
        d.cj * self.d0 * self.d0 * k_max * k_max / d.cg
    }
}

/// Bias point of the SQUIDs: (α₀, δα) from mutual inductance `m`, DC current `i0` and AC amplitude `di`.
pub fn derive_alpha(m: f64, i0: f64, di: f64) -> Result<(f64, f64)> {
    let theta = PI * m * i0 / FLUX_QUANTUM;
    let alpha0 = theta.cos();
    if !(alpha0 > 0.0) {
        return Err(invalid(
            "i0",
            format!("pi*M*I0/Phi0 = {theta:.4} gives cos <= 0 (diverging Josephson inductance)"),
        ));
    }
    let delta_alpha = -theta.sin() * PI * m * di / FLUX_QUANTUM;
    Ok((alpha0, delta_alpha))
}

/// Transmon charge-coupling circuit, reduced to the two ratios that enter g₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmonCircuit {
    /// C_J^q / C_Σ.
    pub capacitance_ratio: f64,
    /// E_J^q / E_C.
    pub ej_over_ec: f64,
}

impl TransmonCircuit {
    pub fn validate(&self) -> Result<()> {
        if !(self.capacitance_ratio > 0.0 && self.capacitance_ratio <= 1.0) {
            return Err(invalid(
                "capacitance_ratio",
                format!("C_J^q/C_Sigma must lie in (0, 1], got {}", self.capacitance_ratio),
            ));
        }
        if !(self.ej_over_ec >= 20.0) {
            return Err(invalid("ej_over_ec", format!("transmon regime needs E_J/E_C >= 20, got {}", self.ej_over_ec)));
        }
        Ok(())
    }

    /// Coupling to a mode of frequency `omega` with total line capacitance `c_total`.
    pub fn g(&self, omega: f64, c_total: f64) -> f64 {
        let charge = ELEMENTARY_CHARGE * self.capacitance_ratio / HBAR;
        2f64.sqrt() * charge * (self.ej_over_ec / 4.0).powf(0.25) * (HBAR * omega / (2.0 * c_total)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Coupling {
    /// Mode-independent rate g₀ (rad/s).
    Direct(f64),
    /// g₀ from the transmon circuit evaluated at the qubit frequency.
    Circuit(TransmonCircuit),
    /// Per-mode g_lk from the transmon circuit evaluated at each mode frequency.
    CircuitPerMode(TransmonCircuit),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitSpec {
    pub omega_q: f64,
    pub x: f64,
    pub coupling: Coupling,
}

impl QubitSpec {
    pub fn new(omega_q: f64, x: f64, g0: f64) -> Self {
        QubitSpec { omega_q, x, coupling: Coupling::Direct(g0) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_q.is_finite() && self.omega_q > 0.0) {
            return Err(invalid("omega_q", format!("must be > 0, got {}", self.omega_q)));
        }
        if !self.x.is_finite() {
            return Err(invalid("x", "must be finite"));
        }
        match self.coupling {
            Coupling::Direct(g) if !(g.is_finite() && g >= 0.0) => Err(invalid("g0", format!("must be >= 0, got {g}"))),
            Coupling::Circuit(c) | Coupling::CircuitPerMode(c) => c.validate(),
            _ => Ok(()),
        }
    }

    /// Coupling to a mode of frequency `omega_mode` on a line of length `l`.
    pub fn g(&self, omega_mode: f64, dens: &DerivedDensities, l: f64) -> f64 {
        match self.coupling {
            Coupling::Direct(g) => g,
            Coupling::Circuit(c) => c.g(self.omega_q, l * dens.cg),
            Coupling::CircuitPerMode(c) => c.g(omega_mode, l * dens.cg),
        }
    }

    /// Mode-independent coupling g₀ on a line of length `l`.
    pub fn g0(&self, dens: &DerivedDensities, l: f64) -> f64 {
        self.g(self.omega_q, dens, l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn alpha_from_bias() {
        let theta = 0.3f64.acos();
        let m = 1e-12;
        let i0 = theta * FLUX_QUANTUM / (PI * m);
        // |δα/α₀| = 0.15 needs sin(θ)·πM dI/Φ₀ = 0.045
        let di = 0.045 / theta.sin() * FLUX_QUANTUM / (PI * m);
        let (a0, da) = derive_alpha(m, i0, di).unwrap();
        assert_relative_eq!(a0, 0.3, max_relative = 1e-12);
        assert_relative_eq!(da, -0.045, max_relative = 1e-12);

        assert_eq!(derive_alpha(m, 0.0, 5e-3).unwrap(), (1.0, -0.0));

        let i0 = (PI / 3.0) * FLUX_QUANTUM / (PI * m);
        let di = 0.1 * FLUX_QUANTUM / (PI * m);
        let (a0, da) = derive_alpha(m, i0, di).unwrap();
        assert_relative_eq!(a0, 0.5, max_relative = 1e-12);
        assert_relative_eq!(da, -0.0866025403784, max_relative = 1e-10);
    }

    #[test]
    fn alpha_rejects_diverging_inductance() {
        let m = 1e-12;
        let i0 = 0.6 * FLUX_QUANTUM / m;
        assert!(derive_alpha(m, i0, 0.0).is_err());
    }

    #[test]
    fn table1_densities() {
        let spec = WaveguideSpec::table1(0.05);
        let d = spec.densities();
        assert_relative_eq!(d.v0, (0.3f64 / (2e-4 * 2e-10)).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(d.v0, 2.7386e6, max_relative = 1e-4);
        assert_relative_eq!(d.lambda_d, 4e-4, max_relative = 1e-12);
        assert_relative_eq!(d.omega_d, 0.05 * d.v0 * spec.kd, max_relative = 1e-14);
        // 2.7e6 in the table rounds v0; with the exact v0 the drive sits at 342 MHz
        assert_relative_eq!(d.omega_d / (2.0 * PI), 342.3e6, max_relative = 1e-3);
        assert_relative_eq!(spec.v0_bare(), d.v0 / 0.3f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn unit_speed() {
        let spec = WaveguideSpec {
            d0: 1.0,
            c_g: 1.0,
            c_j: 0.0,
            l0: 1.0,
            alpha0: 1.0,
            delta_alpha: 0.0,
            kd: 1.0,
            vd: 0.1,
            n_floquet: 1,
        };
        assert_eq!(spec.v0(), 1.0);
    }

    #[test]
    fn cj_ratio_examples() {
        let spec = WaveguideSpec::table1(0.05);
        let r = spec.cj_ratio(1.5 * spec.kd);
        assert_relative_eq!(r, 500.0 * (1.5 * 0.25e-2 * 2.0 * PI).powi(2), max_relative = 1e-12);
        assert_relative_eq!(r, 0.2776, max_relative = 1e-3);
        let free = WaveguideSpec { c_j: 0.0, ..spec };
        assert_eq!(free.cj_ratio(spec.k_max()), 0.0);
    }

    #[test]
    fn spec_validation() {
        let spec = WaveguideSpec::table1(0.05);
        assert!(spec.validate().is_ok());
        assert!(spec.check_regime().is_ok());
        assert!(WaveguideSpec { delta_alpha: 0.3, ..spec }.validate().is_err());
        assert!(WaveguideSpec { c_g: 0.0, ..spec }.validate().is_err());
        assert!(WaveguideSpec { c_j: -1e-15, ..spec }.validate().is_err());
        assert!(WaveguideSpec { n_floquet: 0, ..spec }.validate().is_err());
        let fast = WaveguideSpec { vd: 1.2 * spec.v0(), ..spec };
        assert!(fast.validate().is_ok());
        assert!(matches!(fast.check_regime(), Err(Error::RegimeViolation(_))));
    }

    #[test]
    fn transmon_regime() {
        let c = TransmonCircuit { capacitance_ratio: 0.1, ej_over_ec: 10.0 };
        assert!(c.validate().is_err());
        let q = QubitSpec { omega_q: 1e10, x: 0.0, coupling: Coupling::Circuit(c) };
        assert!(q.validate().is_err());
    }

    proptest! {
        #[test]
        fn alpha_round_trip(mag in 0.05f64..1.5, neg in any::<bool>(), m in 1e-13f64..1e-11) {
            let theta = if neg { -mag } else { mag };
            let i0 = theta * FLUX_QUANTUM / (PI * m);
            let (a0, _) = derive_alpha(m, i0, 0.0).unwrap();
            let back = a0.acos();
            prop_assert!((back - mag).abs() <= 1e-12 * mag);
        }

        #[test]
        fn v0_monotone_in_alpha(a in 0.05f64..0.95, da in 0.001f64..0.05) {
            let s = WaveguideSpec { alpha0: a, delta_alpha: 0.0, ..WaveguideSpec::table1(0.05) };
            let t = WaveguideSpec { alpha0: a + da, ..s };
            prop_assert!(t.v0() > s.v0());
        }

        #[test]
        fn derived_finite_positive(
            d0 in 1e-7f64..1e-5, cg in 1e-17f64..1e-14, cj in 0.0f64..1e-13,
            l0 in 1e-11f64..1e-8, a0 in 0.01f64..1.0, frac in -0.99f64..0.99, vd in 1e3f64..1e6,
        ) {
            let spec = WaveguideSpec {
                d0, c_g: cg, c_j: cj, l0, alpha0: a0, delta_alpha: frac * a0,
                kd: 1.0e4, vd, n_floquet: 2,
            };
            prop_assert!(spec.validate().is_ok());
            let d = spec.densities();
            for v in [d.cg, d.lj, d.v0, d.omega_d, d.lambda_d] {
                prop_assert!(v.is_finite() && v > 0.0);
            }
            prop_assert!(d.cj.is_finite() && d.cj >= 0.0);
        }
    }
}
