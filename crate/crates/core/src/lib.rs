//! Numerical verification of normal-variation bounds on smooth closed
//! implicit surfaces.
//!
//! The crate models a surface `S = F^-1(0)`, its unsigned distance function
//! `h`, the closest-point map, local feature size, offset surfaces
//! `S_w = h^-1(w)` and short geodesics on them. On top of that geometry the
//! [`verifier`] module checks, pair by pair, that unit normals at two surface
//! points `q, q'` with `|q - q'| <= eps * f(q)` differ by at most
//! `eps / (1 - eps)` and by at most `-ln(1 - eps)`, together with the
//! intermediate inequalities used to derive those bounds.

pub mod config;
pub mod error;
pub mod feature_size;
pub mod geodesic;
pub mod model;
pub mod projection;
pub mod report;
pub mod surface;
pub mod verifier;

pub use error::{Error, Result};
pub use model::{LfsMode, SurfaceModel};
pub use surface::{ImplicitSurface, Shape, SurfacePoint};

/// Three-vector used for both points and directions.
pub type Vec3 = nalgebra::Vector3<f64>;
/// Symmetric 3x3 matrices (Hessians, shape operators).
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Angle between two vectors in `[0, pi]`.
///
/// Uses `atan2(|a x b|, a . b)`, which stays accurate for nearly parallel
/// vectors where `acos` of the inner product loses half the digits.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

pub(crate) fn arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}
