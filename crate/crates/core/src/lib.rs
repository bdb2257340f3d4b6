//! Floquet band structure, chiral emission and cascaded networks for a SQUID-metamaterial
//! waveguide whose inductance is modulated by a travelling wave.
//!
//! Everything is SI: frequencies are angular (rad/s), wavenumbers rad/m.

pub mod cascade;
pub mod dynamics;
pub mod error;
pub mod floquet;
pub mod lattice;
pub mod markov;
pub mod ode;
pub mod params;

pub use error::{Error, Result};
pub use params::{Coupling, DerivedDensities, QubitSpec, TransmonCircuit, WaveguideSpec};
