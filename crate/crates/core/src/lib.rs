//! Numerical laboratory for Finsler geodesic flows on surfaces: dual norms and
//! Legendre transforms, cotangent geodesic flow integration, dual lens maps of
//! simple discs, area-preserving bump perturbations, orbit closing by hybrid
//! surgery on lens maps and Poincaré maps, and contact-type checks for energy
//! levels in four-dimensional phase spaces.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closing;
pub mod contact;
pub mod error;
pub mod geometry;
pub mod lens;
pub mod perturb;
pub mod phase;

pub use error::{Error, Result};

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Mat2 = nalgebra::Matrix2<f64>;
