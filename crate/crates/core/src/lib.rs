//! Numerical laboratory for partially hyperbolic skew products on the 4-torus
//! whose fibers carry the standard map and whose base is a hyperbolic toral
//! automorphism.
//!
//! Base coordinates are exact fixed-point fractions; fiber coordinates use
//! `f64` or double-double arithmetic through [`real::Real`].

pub mod bundle;
pub mod cones;
pub mod curves;
pub mod error;
pub mod mp;
pub mod par;
pub mod perturb;
pub mod real;
pub mod rng;
pub mod skew;
pub mod torus;

pub use error::LabError;
pub use mp::{Mp, MpWide};
pub use real::{Dd, Real};
pub use skew::{perturb, Direction, MapParams};
pub use torus::{BasePoint, FiberPoint, HyperbolicMatrix, SplitVector, TorusPoint};
