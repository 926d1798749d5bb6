//! Exact arithmetic for finite quotient fingerprints and profinite invariants
//! of finitely presented modules over Z, localizations of Z, imaginary
//! quadratic orders, and the Laurent polynomial ring Z[x, 1/x].

pub mod adic;
pub mod arith;
pub mod bs;
pub mod error;
pub mod fmod;
pub mod fq;
pub mod genus;
pub mod invariants;
pub mod matrix;
pub mod module;
pub mod quotients;
pub mod ring;

pub use error::{Error, Result};

/// Global resource knobs shared by the quotient engine and its callers.
#[derive(Clone, Debug)]
pub struct EngineConfig {
    /// Hard cap on the order of any single finite quotient handled exactly.
    pub ceiling: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { ceiling: 256 }
    }
}
