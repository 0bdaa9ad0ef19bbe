use crate::error::{Error, Result};
use crate::geodesic::make_patch;
use crate::model::SurfaceModel;
use crate::projection::project;
use crate::Vec3;

const REFINE_STEPS: usize = 8;

/// Steps `p' = p + dt * direction` for each `dt` and measures `|p - r| / dt`,
/// where `r` is the point of the level set `h = h(p)` closest to `p'`.
///
/// `r` is taken on the normal line through the foot of `p'` and then
/// corrected tangentially until the residual `p' - r` is normal to the level
/// set.
pub fn claim3_probe(model: &SurfaceModel, p: &Vec3, direction: &Vec3, deltas: &[f64]) -> Result<Vec<(f64, f64)>> {
    if deltas.is_empty() {
        return Ok(Vec::new());
    }
    let surface = model.surface();
    let patch = make_patch(model, p)?;
    if !patch.valid {
        return Err(Error::InvalidPatch {
            omega: patch.omega,
            lfs: patch.lfs_foot,
        });
    }
    let smallest = deltas.iter().cloned().fold(f64::INFINITY, f64::min);
    let floor = 1e3 * f64::EPSILON * surface.diagonal();
    if smallest < floor {
        return Err(Error::Precondition(format!(
            "step {smallest:e} is below the resolvable floor {floor:e}"
        )));
    }
    let norm = direction.norm();
    if norm == 0.0 {
        return Err(Error::Precondition("probe direction is zero".into()));
    }
    let dir = direction / norm;
    let stop = 1e-15 * surface.diagonal();

    deltas
        .iter()
        .map(|&dt| {
            let moved = p + dt * dir;
            let foot = project(surface, &moved)?.foot;
            let (mut r, mut foot) = patch.reproject(surface, &moved, &foot)?;
            for _ in 0..REFINE_STEPS {
                let n = surface.inward_normal(&foot)?;
                let gap = moved - r;
                let tangential = gap - n * n.dot(&gap);
                if tangential.norm() <= stop {
                    break;
                }
                (r, foot) = patch.reproject(surface, &(r + tangential), &foot)?;
            }
            Ok((dt, (p - r).norm() / dt))
        })
        .collect()
}

/// `scale * 2^-k` for `k` in `first..=last`.
pub fn halving_deltas(scale: f64, first: i32, last: i32) -> Vec<f64> {
    (first..=last).map(|k| scale * 2f64.powi(-k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ImplicitSurface;

    fn sphere() -> SurfaceModel {
        SurfaceModel::analytic(ImplicitSurface::unit_sphere()).unwrap()
    }

    #[test]
    fn tangential_on_offset_sphere() {
        let m = sphere();
        let p = Vec3::new(0.0, 0.0, 1.5);
        let deltas = halving_deltas(1.5, 4, 16);
        let ratios = claim3_probe(&m, &p, &Vec3::x(), &deltas).unwrap();
        for &(dt, ratio) in &ratios {
            // r is the radial projection of p' onto the sphere of radius 1.5.
            let expected = 3.0 * ((dt / 1.5).atan() / 2.0).sin() / dt;
            assert!((ratio - expected).abs() < 1e-9, "{dt}: {ratio} vs {expected}");
        }
        assert!(ratios.last().unwrap().1 <= 1.0 + 1e-6);
    }

    #[test]
    fn normal_direction_collapses() {
        let m = sphere();
        let p = Vec3::new(0.0, 0.0, 1.5);
        let ratios = claim3_probe(&m, &p, &-Vec3::z(), &[0.1, 0.01, 0.001]).unwrap();
        for (_, r) in ratios {
            assert!(r < 1e-9);
        }
    }

    #[test]
    fn empty_deltas() {
        let m = sphere();
        assert!(claim3_probe(&m, &Vec3::new(0.0, 0.0, 1.5), &Vec3::x(), &[]).unwrap().is_empty());
    }
}
