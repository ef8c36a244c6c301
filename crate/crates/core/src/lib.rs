//! Numerics for blowup analysis of singular Liouville systems: radial
//! global solutions and their asymptotic data, critical hypersurfaces in
//! `ρ`-space, bubble comparison, and leading-order coefficient formulas on a
//! flat torus.
//!
//! The guide in `book/` walks through each module.

// `!(x > 0.0)` is the NaN-rejecting form used for input checks; index loops
// mirror the formulas; quadrature tables keep their published digits.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::excessive_precision
)]

pub mod algebra;
pub mod blowup;
pub mod energy;
pub mod error;
pub mod export;
pub mod green;
pub mod ode;
pub mod quadrature;
pub mod radial;
pub mod scaling;
pub mod shooting;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/radial.md")]
    mod radial {}
    #[doc = include_str!("../../../book/src/shooting.md")]
    mod shooting {}
    #[doc = include_str!("../../../book/src/surfaces.md")]
    mod surfaces {}
    #[doc = include_str!("../../../book/src/scaling.md")]
    mod scaling {}
    #[doc = include_str!("../../../book/src/green.md")]
    mod green {}
    #[doc = include_str!("../../../book/src/blowup.md")]
    mod blowup {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
