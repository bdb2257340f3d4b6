//! Quantities written as "<number> <unit>", e.g. "3.02 GHz" or "0.2 fF".

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Deserializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    /// Cycles per second on input, stored as angular frequency (rad/s).
    Frequency,
    Length,
    Capacitance,
    Inductance,
    /// Cycles per metre ("1/m") or rad/m, stored in rad/m.
    Wavenumber,
    Velocity,
    Time,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Frequency => "frequency (Hz, kHz, MHz, GHz, rad/s)",
            Dimension::Length => "length (m, mm, um, nm, lambda_d)",
            Dimension::Capacitance => "capacitance (F, pF, fF, aF)",
            Dimension::Inductance => "inductance (H, nH, pH)",
            Dimension::Wavenumber => "wavenumber (1/m, rad/m)",
            Dimension::Velocity => "velocity (m/s, v0)",
            Dimension::Time => "time (s, ms, us, ns, ps)",
        };
        f.write_str(s)
    }
}

/// A number with its unit string, kept raw until the dimension and context are known.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: String,
}

impl<'de> Deserialize<'de> for Quantity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Quantity::parse(&s).map_err(serde::de::Error::custom)
    }
}

impl Quantity {
    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (num, unit) = s
            .split_once(char::is_whitespace)
            .ok_or_else(|| format!("\"{s}\" needs a unit, written as \"<number> <unit>\""))?;
        let value: f64 = num.parse().map_err(|_| format!("\"{num}\" in \"{s}\" is not a number"))?;
        if !value.is_finite() {
            return Err(format!("\"{s}\" is not finite"));
        }
        Ok(Quantity { value, unit: unit.trim().to_string() })
    }

    /// Converts to SI. `v0` and `lambda_d` supply the relative units when known.
    pub fn to_si(&self, dim: Dimension, ctx: &Context) -> Result<f64, String> {
        let scale = match (dim, self.unit.as_str()) {
            (Dimension::Frequency, "Hz") => 2.0 * PI,
            (Dimension::Frequency, "kHz") => 2.0 * PI * 1e3,
            (Dimension::Frequency, "MHz") => 2.0 * PI * 1e6,
            (Dimension::Frequency, "GHz") => 2.0 * PI * 1e9,
            (Dimension::Frequency, "rad/s") => 1.0,
            (Dimension::Length, "m") => 1.0,
            (Dimension::Length, "mm") => 1e-3,
            (Dimension::Length, "um" | "µm") => 1e-6,
            (Dimension::Length, "nm") => 1e-9,
            (Dimension::Length, "lambda_d") => ctx.lambda_d.ok_or("lambda_d is not defined here")?,
            (Dimension::Capacitance, "F") => 1.0,
            (Dimension::Capacitance, "pF") => 1e-12,
            (Dimension::Capacitance, "fF") => 1e-15,
            (Dimension::Capacitance, "aF") => 1e-18,
            (Dimension::Inductance, "H") => 1.0,
            (Dimension::Inductance, "nH") => 1e-9,
            (Dimension::Inductance, "pH") => 1e-12,
            (Dimension::Wavenumber, "1/m") => 2.0 * PI,
            (Dimension::Wavenumber, "rad/m") => 1.0,
            (Dimension::Velocity, "m/s") => 1.0,
            (Dimension::Velocity, "v0") => ctx.v0.ok_or("v0 is not defined here")?,
            (Dimension::Time, "s") => 1.0,
            (Dimension::Time, "ms") => 1e-3,
            (Dimension::Time, "us" | "µs") => 1e-6,
            (Dimension::Time, "ns") => 1e-9,
            (Dimension::Time, "ps") => 1e-12,
            _ => return Err(format!("unit \"{}\" is not a {dim}", self.unit)),
        };
        Ok(self.value * scale)
    }
}

/// Reference scales for relative units.
#[derive(Debug, Clone, Copy, Default)]
pub struct Context {
    pub v0: Option<f64>,
    pub lambda_d: Option<f64>,
}
