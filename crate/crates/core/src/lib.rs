//! Reconstruction of an initial wave displacement inside a bounded convex
//! domain from the Neumann trace of the free-space wave field on the domain
//! boundary.
//!
//! The crate is organised bottom-up: [`calculus`] and [`geometry`] supply
//! quadrature, special functions and domain queries; [`transforms`] holds
//! spherical means, Radon and Hilbert transforms; [`forward`] simulates
//! boundary data; [`inversion`] back-projects it and applies the iterative
//! correction; [`validation`] checks the underlying identities numerically.

// Negated comparisons reject NaN; Lanczos coefficients are quoted in full;
// coordinate loops index several fixed-size arrays at once.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::excessive_precision,
    clippy::needless_range_loop
)]

pub mod calculus;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod inversion;
pub mod transforms;
pub mod validation;
pub mod vector;

pub use error::{Error, Result};
pub use geometry::ConvexDomain;
pub use vector::Point;
