//! Linear boundary-value problems for systems of ordinary differential equations
//! with general boundary operators, and their approximation by multipoint
//! problems.
//!
//! The boundary operator of a problem `L y = f`, `B y = q` on `[a, b]` is kept in
//! the form
//!
//! ```text
//! B y = sum_{l < n} alpha_l y^(l)(a) + \int_a^b dG(t) y^(n)(t)
//! ```
//!
//! where every entry of `G` is a normalized function of bounded variation
//! ([`nbv::NbvFunction`]). Replacing each entry by a step function turns `B` into
//! a multipoint operator; [`approx`] builds that sequence of problems and
//! measures how fast their solutions approach the original one.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod boundary;
pub mod bvpsolve;
mod error;
pub mod linalg;
pub mod nbv;
pub mod odecore;

pub use error::{Error, Result};
