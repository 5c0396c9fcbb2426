//! Error type shared by the whole crate.

use alloc::string::String;
use core::fmt;

/// Errors surfaced by the exact-arithmetic layers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Error {
    /// `p` is not an odd prime >= 5.
    InvalidPrime(u64),
    /// Requested inert extension with a `D` that is a square mod p.
    NotNonResidue(u64),
    /// Generic parameter validation failure.
    InvalidParams(String),
    /// A cyclotomic order exceeded the configured bound.
    ConductorOverflow(u64),
    /// A Kirillov omega-action needed a twist constant outside the range
    /// covered by the epsilon data.
    EpsilonOutOfRange { conductor: u32, max: u32 },
    /// The inducing character is fixed by the Galois conjugation.
    GaloisFixed,
    /// The inducing character is not trivial on F^*.
    NontrivialCentral,
    /// Character level incompatible with the requested conductor.
    LevelMismatch { expected: u32, got: u32 },
    /// A lemma hypothesis on conductors is violated.
    RangeViolation(String),
    /// The weighted average over the torus is zero; no eigenvector
    /// certificate can be issued.
    VanishingIntegral,
    /// Matrix decomposition asked of a singular matrix.
    SingularMatrix,
    /// Division by a value that is not invertible through conjugation.
    NotInvertible,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidPrime(p) => write!(f, "p = {p} is not an odd prime >= 5"),
            Error::NotNonResidue(d) => write!(f, "D = {d} is a quadratic residue, not usable for an inert extension"),
            Error::InvalidParams(msg) => write!(f, "invalid parameters: {msg}"),
            Error::ConductorOverflow(m) => write!(f, "cyclotomic order {m} exceeds the configured bound"),
            Error::EpsilonOutOfRange { conductor, max } => {
                write!(f, "epsilon data needed for a twist of conductor {conductor}, table covers <= {max}")
            }
            Error::GaloisFixed => write!(f, "theta is fixed by the Galois conjugation (not regular)"),
            Error::NontrivialCentral => write!(f, "theta is not trivial on F^*"),
            Error::LevelMismatch { expected, got } => {
                write!(f, "character level mismatch: expected {expected}, got {got}")
            }
            Error::RangeViolation(msg) => write!(f, "hypothesis violated: {msg}"),
            Error::VanishingIntegral => write!(f, "integral vanishes; no test-vector certificate"),
            Error::SingularMatrix => write!(f, "matrix is singular at working precision"),
            Error::NotInvertible => write!(f, "value is not invertible via conjugation"),
        }
    }
}

impl core::error::Error for Error {}

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
