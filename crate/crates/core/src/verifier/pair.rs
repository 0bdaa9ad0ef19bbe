use serde::{Deserialize, Serialize};

use super::bounds::{bound_ab, bound_log, bound_new, EPS_LIMIT};
use crate::error::{Error, Result};
use crate::model::SurfaceModel;
use crate::surface::SurfacePoint;
use crate::{angle_between, arr, Vec3};

/// Relative slack on the `eps <= 1/3` gate, absorbing the rounding of a
/// chord built to be exactly `f(q) / 3`.
const EPS_GATE_SLACK: f64 = 1e-12;

/// Verdicts for one pair of surface points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub q: [f64; 3],
    pub q_prime: [f64; 3],
    pub lfs_q: f64,
    pub lfs_q_prime: f64,
    /// `|q - q'|`.
    pub dist: f64,
    /// `dist / f(q)`; every verdict is taken at this value.
    pub eps_thm: f64,
    /// `dist / min(f(q), f(q'))`.
    pub eps_ab: f64,
    /// Angle between the inward normals, in `[0, pi]`.
    pub angle: f64,
    /// `eps_ab / (1 - 3 eps_ab)`; absent when `eps_ab >= 1/3`.
    pub bound_ab: Option<f64>,
    pub bound_new: f64,
    pub bound_log: f64,
    pub pass_new: bool,
    pub pass_log: bool,
    /// `bound_log - angle`.
    pub margin_log: f64,
}

impl PairRecord {
    pub fn passed(&self) -> bool {
        self.pass_new && self.pass_log
    }
}

/// Checks both normal-variation bounds for two points of the surface.
pub fn verify_pair(model: &SurfaceModel, q: &Vec3, q_prime: &Vec3) -> Result<PairRecord> {
    let a = model.surface_point(q)?;
    let b = model.surface_point(q_prime)?;
    record(model, &a, &b)
}

pub(crate) fn record(model: &SurfaceModel, a: &SurfacePoint, b: &SurfacePoint) -> Result<PairRecord> {
    let dist = (a.position - b.position).norm();
    let eps_thm = dist / a.lfs;
    if eps_thm > EPS_LIMIT * (1.0 + EPS_GATE_SLACK) {
        return Err(Error::RejectedPair { eps: eps_thm });
    }
    let eps = eps_thm.min(EPS_LIMIT);
    let eps_ab = dist / a.lfs.min(b.lfs);
    let angle = angle_between(&a.normal, &b.normal);
    let bn = bound_new(eps)?;
    let bl = bound_log(eps)?;
    let tol = model.angle_tol();
    Ok(PairRecord {
        q: arr(&a.position),
        q_prime: arr(&b.position),
        lfs_q: a.lfs,
        lfs_q_prime: b.lfs,
        dist,
        eps_thm,
        eps_ab,
        angle,
        bound_ab: bound_ab(eps_ab).ok(),
        bound_new: bn,
        bound_log: bl,
        pass_new: angle <= bn + tol,
        pass_log: angle <= bl + tol,
        margin_log: bl - angle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ImplicitSurface;

    fn sphere() -> SurfaceModel {
        SurfaceModel::analytic(ImplicitSurface::unit_sphere()).unwrap()
    }

    fn equator_pair(chord: f64) -> (Vec3, Vec3) {
        let half = (chord / 2.0).asin();
        (
            Vec3::new(half.cos(), -half.sin(), 0.0),
            Vec3::new(half.cos(), half.sin(), 0.0),
        )
    }

    #[test]
    fn sphere_at_the_limit() {
        let (q, qp) = equator_pair(1.0 / 3.0);
        let r = verify_pair(&sphere(), &q, &qp).unwrap();
        let expected = 2.0 * (1.0f64 / 6.0).asin();
        assert!((r.angle - expected).abs() < 1e-12);
        assert!((r.angle - 0.334897).abs() < 1e-6);
        assert!((r.bound_log - 0.405465).abs() < 1e-6);
        assert!((r.bound_new - 0.5).abs() < 1e-12);
        assert!(r.pass_new && r.pass_log);
    }

    #[test]
    fn identical_points() {
        let q = Vec3::new(0.0, 0.6, 0.8);
        let r = verify_pair(&sphere(), &q, &q).unwrap();
        assert_eq!((r.angle, r.eps_thm, r.bound_new, r.bound_log), (0.0, 0.0, 0.0, 0.0));
        assert!(r.passed());
    }

    #[test]
    fn hypothesis_gate() {
        let (q, qp) = equator_pair(0.5);
        assert!(matches!(
            verify_pair(&sphere(), &q, &qp),
            Err(Error::RejectedPair { .. })
        ));
    }

    #[test]
    fn off_surface_points_are_refused() {
        assert!(verify_pair(&sphere(), &Vec3::x(), &Vec3::new(0.9, 0.0, 0.0)).is_err());
    }

    #[test]
    fn symmetry() {
        let m = SurfaceModel::analytic(ImplicitSurface::torus(2.0, 1.0).unwrap()).unwrap();
        let q = Vec3::new(3.0, 0.0, 0.0);
        let th: f64 = 0.2;
        let qp = Vec3::new(2.0 + th.cos(), 0.0, th.sin());
        let r1 = verify_pair(&m, &q, &qp).unwrap();
        let r2 = verify_pair(&m, &qp, &q).unwrap();
        assert_eq!(r1.angle, r2.angle);
        assert_eq!(r1.eps_ab, r2.eps_ab);
        assert!(r1.eps_ab >= r1.eps_thm);
    }
}
