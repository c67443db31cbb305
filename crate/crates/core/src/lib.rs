//! Numerical laboratory for metric regularity, semiregularity and openness of
//! set-valued maps in finite dimensions, with an inexact Newton-type solver
//! for generalized equations f(x) + F(x) ∋ 0.

// `!(a < b)` is deliberate throughout: a NaN estimate must fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod acceptance;
pub mod certify;
pub mod corpus;
pub mod covering;
pub mod error;
pub mod expr;
pub mod linalg;
pub mod moduli;
pub mod newton;
pub mod polyhedron;
pub mod rng;
pub mod ser;
pub mod setmap;
pub mod space;

pub use error::{Error, Result};
pub use setmap::{MapSpec, Procedure, SetMap, ValueSet};
pub use space::{Ball, GraphPoint, Matrix, NormKind, Settings, Vector};
