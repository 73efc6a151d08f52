//! Crate-wide error type.
//!
//! Precision failures (`PrecisionLoss`, `PrecisionExhausted`, `Truncation`,
//! `NotDivisible`) are kept distinct from domain errors so callers (and the
//! CLI exit-code mapping) can tell "the input is outside the contract" apart
//! from "the requested result has fewer correct digits than asked for".

use thiserror::Error;

/// Everything that can go wrong in this crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("element is not a unit (positive valuation)")]
    NonUnit,
    #[error("argument outside the convergence domain: {0}")]
    Domain(String),
    #[error("element has no exact representative in the base ring")]
    NotRational,
    #[error("precision loss: short {deficit} pi-adic digits of the required divisibility")]
    PrecisionLoss { deficit: i64 },
    #[error("declared precision exhausted (no correct digits remain)")]
    PrecisionExhausted,
    #[error("series truncation too short: need index {needed} but truncation is {have}")]
    Truncation { needed: usize, have: usize },
    #[error("exact division failed: {0} is not divisible as required")]
    NotDivisible(String),
    #[error("form is not primitive")]
    NotPrimitive,
    #[error("form is not positive definite")]
    NotDefinite,
    #[error("discriminant mismatch: {0} vs {1}")]
    DiscMismatch(i64, i64),
    #[error("enumeration bound exceeded: {0}")]
    BoundExceeded(String),
    #[error("prime {p} does not split in the field of discriminant {d}")]
    NotSplit { p: u64, d: i64 },
    #[error("prime {p} ramifies in the field of discriminant {d}")]
    Ramified { p: u64, d: i64 },
    #[error("conductor mismatch: {0}")]
    ConductorMismatch(String),
    #[error("extra units obstruct the fiber count (w_K > 2 at conductor 1)")]
    UnitObstruction,
    #[error("class is not an element of this group")]
    NotInGroup,
    #[error("character is not primitive for the stated modulus")]
    NotPrimitiveChar,
    #[error("critical character needs an even torsion exponent, got {0}")]
    OddExponent(u64),
    #[error("span is not stable under the operator (residual at q^{0})")]
    NotStable(usize),
    #[error("projector iteration did not stabilize within {0} steps")]
    NoConvergence(usize),
    #[error("weight {k} is not on branch {k0} mod {modulus}")]
    BranchMismatch { k: i64, k0: u64, modulus: u64 },
    #[error("incompatible contexts: {0}")]
    CtxMismatch(String),
    #[error("internal consistency check failed: {0}")]
    ConsistencyCheck(String),
    #[error("bad input: {0}")]
    BadInput(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that mean "not enough correct digits", as opposed to
    /// a domain/validation failure. The CLI maps these to exit code 2.
    pub fn is_precision(&self) -> bool {
        matches!(
            self,
            Error::PrecisionLoss { .. }
                | Error::PrecisionExhausted
                | Error::Truncation { .. }
                | Error::NotDivisible(_)
        )
    }
}
