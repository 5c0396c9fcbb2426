//! Exact arithmetic for local period integrals on GL(2) over Q_p.
//!
//! The crate computes, with no floating-point error anywhere on the exact
//! path:
//!
//! - residue-ring and quadratic-extension arithmetic over Q_p ([`padic`]),
//! - multiplicative/additive characters, conductors, Gauss sums and the
//!   stationary-phase constants attached to characters ([`chars`]),
//! - cyclotomic field values with decidable equality ([`cyclotomic`]),
//! - minimal supercuspidal representations through their epsilon data and
//!   Kirillov model ([`supercuspidal`]),
//! - ramified principal series through explicit Whittaker functions
//!   ([`principal_series`]),
//! - the local torus period integral I(Phi, Omega) as a finite weighted
//!   sum over torus cosets, together with vanishing sweeps, the epsilon
//!   dichotomy predicates, twisting reductions and a decay experiment
//!   ([`torus`]).
//!
//! Everything is `no_std + alloc`; the companion CLI crate adds IO, report
//! formats and a scenario runner.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod chars;
pub mod cyclotomic;
pub mod error;
pub mod padic;
pub mod principal_series;
pub mod supercuspidal;
pub mod torus;

pub use chars::{AddChar, AlphaConstant, MultChar, UnitGroup};
pub use cyclotomic::{Complex, CycValue, SqrtQValue};
pub use error::{Error, Result};
pub use padic::{ExtElem, ExtKind, LocalFieldParams};
pub use principal_series::PsDatum;
pub use supercuspidal::{KirillovVector, McEvaluator, ScDatum};
pub use torus::{IntegralReport, Rep, TestVectorSpec, TorusMeasure, Verdict};
