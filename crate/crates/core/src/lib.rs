//! Fejér-monotone iterations with certified iteration counts.
//!
//! Moduli of regularity and rate combinators produce explicit indices after
//! which an iteration is ε-close to its solution set (or has terminated),
//! and the audit suite checks those indices against instrumented runs on
//! problems whose solution sets are known in closed form.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod iterations;
pub mod moduli;
pub mod operators;
pub mod problems;
pub mod rates;
pub mod rounding;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{distance, geodesic_point, quadrilateral_defect, ClosedBall, Tolerance, Vector};
pub use moduli::{Modulus, ModulusContext};
pub use rates::{RateFn, RateOfDivergence, SeriesTransform, StepSequence};
