//! Dimension estimates for Julia sets of rational semigroups.
//!
//! The crate builds backward orbit trees of a generator system, turns them
//! into partition functions and pressure estimates, and solves for the zero
//! of the pressure (the Bowen root). Inducing support replaces a
//! non-hyperbolic two-generator polynomial system by an induced, infinitely
//! generated one and truncates it. Rendering produces point clouds and
//! escape rasters of the Julia set.

pub mod bowen;
pub mod error;
pub mod family;
pub mod inducing;
pub mod maps;
pub mod poly;
pub mod pressure;
pub mod render;
pub mod semigroup;
pub mod sphere;

pub use error::{Error, Result};
pub use maps::{MapExpr, RationalMap, RootOptions};
pub use poly::Polynomial;
pub use sphere::SpherePoint;
