//! Offset patches `S_w = h^-1(w)` and short discrete geodesics on them.
//!
//! A geodesic is found by curve shortening: the chord is pushed onto the
//! level set, then interior vertices are repeatedly replaced by the
//! reprojected midpoint of their neighbours (over-relaxed Gauss-Seidel)
//! until nothing moves. The vertex count starts at 17 and doubles until the
//! polyline length settles; the reported length is the Richardson
//! extrapolation of the last two polylines, which removes the `O(h^2)`
//! chord deficit of an inscribed polygon.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::SurfaceModel;
use crate::projection::{offset_curvatures, project, project_from, Side};
use crate::surface::ImplicitSurface;
use crate::{angle_between, Vec3};

/// Longest admissible chord as a fraction of the feature size at the start foot.
pub const LOCALITY: f64 = 0.25;
const INITIAL_SEGMENTS: usize = 16;
const MAX_SEGMENTS: usize = 1024;
const LENGTH_REL_TOL: f64 = 1e-6;
const WALK_STEPS: usize = 128;

/// Tolerance on `|h(v) - w|` for points of an offset patch.
pub fn level_tol(surface: &ImplicitSurface) -> f64 {
    1e-8 * surface.diagonal()
}

/// Neighbourhood of `anchor` in the offset surface through it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetPatch {
    pub omega: f64,
    pub anchor: Vec3,
    pub anchor_foot: Vec3,
    pub side: Side,
    /// `f(anchor~)`.
    pub lfs_foot: f64,
    /// `omega < f(anchor~)`.
    pub valid: bool,
}

/// Patch of the level set of `h` through `p`.
pub fn make_patch(model: &SurfaceModel, p: &Vec3) -> Result<OffsetPatch> {
    let r = project(model.surface(), p)?;
    let lfs_foot = model.lfs(&r.foot)?;
    Ok(OffsetPatch {
        omega: r.distance,
        anchor: *p,
        anchor_foot: r.foot,
        side: r.side,
        lfs_foot,
        valid: r.distance < lfs_foot,
    })
}

impl OffsetPatch {
    fn require_valid(&self) -> Result<()> {
        if self.valid {
            Ok(())
        } else {
            Err(Error::InvalidPatch {
                omega: self.omega,
                lfs: self.lfs_foot,
            })
        }
    }

    /// Pushes `y` onto the level set along its normal line. Returns the new
    /// point and its foot.
    pub fn reproject(&self, surface: &ImplicitSurface, y: &Vec3, seed_foot: &Vec3) -> Result<(Vec3, Vec3)> {
        let r = project_from(surface, y, seed_foot)?;
        if self.side == Side::OnSurface {
            return Ok((r.foot, r.foot));
        }
        let n = surface.inward_normal(&r.foot)?;
        Ok((r.foot - self.side.sign() * self.omega * n, r.foot))
    }

    /// Foot of `x`, after checking that `x` lies on this level set.
    fn foot_on_level(&self, surface: &ImplicitSurface, x: &Vec3) -> Result<Vec3> {
        let r = project(surface, x)?;
        if (r.distance - self.omega).abs() > level_tol(surface) {
            return Err(Error::Precondition(format!(
                "{x:?} is at distance {} from the surface, not on the level set {}",
                r.distance, self.omega
            )));
        }
        Ok(r.foot)
    }

    /// Largest principal curvature magnitude of this level set at the point
    /// whose foot is `foot`.
    pub fn kappa_at(&self, surface: &ImplicitSurface, foot: &Vec3) -> Result<f64> {
        let (k1, k2) = offset_curvatures(surface, foot, self.side.sign() * self.omega)?;
        Ok(k1.abs().max(k2.abs()))
    }
}

/// Discrete geodesic on an offset patch.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPath {
    pub patch: OffsetPatch,
    pub vertices: Vec<Vec3>,
    /// Closest surface point of each vertex.
    pub feet: Vec<Vec3>,
    /// Extrapolated geodesic length.
    pub length: f64,
    /// Length of the final polyline itself.
    pub polyline_length: f64,
    pub kappa_max: f64,
    pub argmax_point: Vec3,
    pub r_m: f64,
}

impl GeodesicPath {
    pub fn start(&self) -> Vec3 {
        self.vertices[0]
    }

    pub fn end(&self) -> Vec3 {
        self.vertices[self.vertices.len() - 1]
    }

    pub fn chord(&self) -> f64 {
        (self.end() - self.start()).norm()
    }
}

fn polyline_length(v: &[Vec3]) -> f64 {
    v.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

fn relax(patch: &OffsetPatch, surface: &ImplicitSurface, v: &mut [Vec3], feet: &mut [Vec3]) -> Result<()> {
    let n = v.len() - 1;
    let omega_sor = 2.0 / (1.0 + (std::f64::consts::PI / n as f64).sin());
    let tol = 1e-10 * surface.diagonal();
    let max_sweeps = 100 * n + 1000;
    for _ in 0..max_sweeps {
        let mut moved: f64 = 0.0;
        for i in 1..n {
            let mid = 0.5 * (v[i - 1] + v[i + 1]);
            let y = v[i] + omega_sor * (mid - v[i]);
            let (p, f) = patch.reproject(surface, &y, &feet[i])?;
            moved = moved.max((p - v[i]).norm());
            v[i] = p;
            feet[i] = f;
        }
        if moved < tol {
            return Ok(());
        }
    }
    Err(Error::GeodesicConvergence(format!(
        "curve shortening with {n} segments did not settle"
    )))
}

fn refine(patch: &OffsetPatch, surface: &ImplicitSurface, v: &[Vec3], feet: &[Vec3]) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    let mut nv = Vec::with_capacity(2 * v.len() - 1);
    let mut nf = Vec::with_capacity(2 * v.len() - 1);
    for i in 0..v.len() - 1 {
        nv.push(v[i]);
        nf.push(feet[i]);
        let (p, f) = patch.reproject(surface, &(0.5 * (v[i] + v[i + 1])), &feet[i])?;
        nv.push(p);
        nf.push(f);
    }
    nv.push(v[v.len() - 1]);
    nf.push(feet[feet.len() - 1]);
    Ok((nv, nf))
}

/// Shortest path between two nearby points of an offset patch.
pub fn trace_geodesic(model: &SurfaceModel, patch: &OffsetPatch, start: &Vec3, end: &Vec3) -> Result<GeodesicPath> {
    patch.require_valid()?;
    let surface = model.surface();
    let start_foot = patch.foot_on_level(surface, start)?;
    let end_foot = patch.foot_on_level(surface, end)?;

    let chord = (end - start).norm();
    let lfs_start = model.lfs(&start_foot)?;
    if chord > LOCALITY * lfs_start {
        return Err(Error::Precondition(format!(
            "chord {chord} exceeds {LOCALITY} x feature size {lfs_start}"
        )));
    }
    if chord == 0.0 {
        let kappa = patch.kappa_at(surface, &start_foot)?;
        return Ok(GeodesicPath {
            patch: *patch,
            vertices: vec![*start],
            feet: vec![start_foot],
            length: 0.0,
            polyline_length: 0.0,
            kappa_max: kappa,
            argmax_point: *start,
            r_m: 1.0 / kappa,
        });
    }

    let mut v = Vec::with_capacity(INITIAL_SEGMENTS + 1);
    let mut feet = Vec::with_capacity(INITIAL_SEGMENTS + 1);
    for i in 0..=INITIAL_SEGMENTS {
        if i == 0 {
            v.push(*start);
            feet.push(start_foot);
        } else if i == INITIAL_SEGMENTS {
            v.push(*end);
            feet.push(end_foot);
        } else {
            let t = i as f64 / INITIAL_SEGMENTS as f64;
            let (p, f) = patch.reproject(surface, &(start + t * (end - start)), &start_foot)?;
            v.push(p);
            feet.push(f);
        }
    }
    relax(patch, surface, &mut v, &mut feet)?;
    let mut coarse = polyline_length(&v);

    let fine = loop {
        let (mut nv, mut nf) = refine(patch, surface, &v, &feet)?;
        relax(patch, surface, &mut nv, &mut nf)?;
        let l = polyline_length(&nv);
        v = nv;
        feet = nf;
        if (l - coarse).abs() < LENGTH_REL_TOL * l {
            break l;
        }
        if v.len() > MAX_SEGMENTS {
            return Err(Error::GeodesicConvergence(format!(
                "length still changing by {:e} at {} segments",
                (l - coarse).abs() / l,
                v.len() - 1
            )));
        }
        coarse = l;
    };
    let length = (4.0 * fine - coarse) / 3.0;

    let mut kappa_max = f64::NEG_INFINITY;
    let mut argmax = 0;
    for (i, f) in feet.iter().enumerate() {
        let k = patch.kappa_at(surface, f)?;
        if k > kappa_max {
            kappa_max = k;
            argmax = i;
        }
    }
    Ok(GeodesicPath {
        patch: *patch,
        argmax_point: v[argmax],
        vertices: v,
        feet,
        length: length.max(chord),
        polyline_length: fine,
        kappa_max,
        r_m: 1.0 / kappa_max,
    })
}

/// Walks `distance` along the patch from `start`, keeping the step
/// direction as straight as the surface allows (each step direction is the
/// previous one projected onto the new tangent plane).
pub fn straightest_walk(
    model: &SurfaceModel,
    patch: &OffsetPatch,
    start: &Vec3,
    direction: &Vec3,
    distance: f64,
) -> Result<Vec3> {
    patch.require_valid()?;
    let surface = model.surface();
    let mut foot = patch.foot_on_level(surface, start)?;
    let mut p = *start;
    let n = surface.inward_normal(&foot)?;
    let mut dir = direction - n * n.dot(direction);
    if dir.norm() == 0.0 {
        return Err(Error::Precondition("walk direction is normal to the patch".into()));
    }
    dir.normalize_mut();
    let h = distance / WALK_STEPS as f64;
    for _ in 0..WALK_STEPS {
        let (q, f) = patch.reproject(surface, &(p + h * dir), &foot)?;
        let n = surface.inward_normal(&f)?;
        let step = q - p;
        dir = (step - n * n.dot(&step)).normalize();
        p = q;
        foot = f;
    }
    Ok(p)
}

/// Geodesic-to-chord ratios for end points at walking distance `scales`
/// from `start` along `direction`.
pub fn prop1_ratio(
    model: &SurfaceModel,
    patch: &OffsetPatch,
    start: &Vec3,
    direction: &Vec3,
    scales: &[f64],
) -> Result<Vec<(f64, f64)>> {
    scales
        .iter()
        .map(|&delta| {
            let end = straightest_walk(model, patch, start, direction, delta)?;
            let path = trace_geodesic(model, patch, start, &end)?;
            Ok((delta, path.length / path.chord()))
        })
        .collect()
}

/// Normal angle between the path ends and its curvature bound
/// `kappa_max * length`.
pub fn prop2_check(surface: &ImplicitSurface, path: &GeodesicPath) -> Result<(f64, f64)> {
    if path.vertices.len() == 1 {
        return Ok((0.0, 0.0));
    }
    let n0 = surface.inward_normal(&path.feet[0])?;
    let n1 = surface.inward_normal(&path.feet[path.feet.len() - 1])?;
    Ok((angle_between(&n0, &n1), path.kappa_max * path.length))
}

/// CSV polyline with header `t,x,y,z,h,kappa`; `t` is cumulative arc length.
pub fn path_csv(surface: &ImplicitSurface, path: &GeodesicPath) -> Result<String> {
    let mut out = String::from("t,x,y,z,h,kappa\n");
    let mut t = 0.0;
    for (i, (v, f)) in path.vertices.iter().zip(&path.feet).enumerate() {
        if i > 0 {
            t += (v - path.vertices[i - 1]).norm();
        }
        let kappa = path.patch.kappa_at(surface, f)?;
        let _ = writeln!(out, "{t},{},{},{},{},{kappa}", v.x, v.y, v.z, (v - f).norm());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere() -> SurfaceModel {
        SurfaceModel::analytic(crate::ImplicitSurface::unit_sphere()).unwrap()
    }

    #[test]
    fn patches() {
        let m = sphere();
        let p = make_patch(&m, &Vec3::new(0.0, 0.0, 1.25)).unwrap();
        assert!((p.omega - 0.25).abs() < 1e-15 && p.valid);
        let p = make_patch(&m, &Vec3::new(0.0, 0.0, 0.05)).unwrap();
        assert!((p.omega - 0.95).abs() < 1e-15 && p.valid);
        assert!(matches!(
            make_patch(&m, &Vec3::zeros()),
            Err(Error::MedialAmbiguity { .. })
        ));
    }

    #[test]
    fn invalid_patch_is_rejected_downstream() {
        // Torus (1.5, 1): the inner equator foot has f = 0.5.
        let m = SurfaceModel::analytic(crate::ImplicitSurface::torus(1.5, 1.0).unwrap()).unwrap();
        let p = Vec3::new(1.2, 0.0, 0.0);
        let patch = make_patch(&m, &p).unwrap();
        assert!((patch.omega - 0.7).abs() < 1e-12);
        assert!(!patch.valid);
        assert!(matches!(
            trace_geodesic(&m, &patch, &p, &p),
            Err(Error::InvalidPatch { .. })
        ));
    }

    #[test]
    fn great_circle_arc() {
        let m = sphere();
        let half = 0.1f64.asin();
        let a = Vec3::new(half.cos(), -half.sin(), 0.0);
        let b = Vec3::new(half.cos(), half.sin(), 0.0);
        let patch = make_patch(&m, &a).unwrap();
        let path = trace_geodesic(&m, &patch, &a, &b).unwrap();
        assert!((path.length - 2.0 * half).abs() < 1e-10, "{}", path.length);
        assert!(path.length >= path.chord());
        assert!((path.kappa_max - 1.0).abs() < 1e-12);
        assert_eq!(path.r_m * path.kappa_max, 1.0);
        for v in &path.vertices {
            assert!((v.norm() - 1.0).abs() < level_tol(m.surface()));
            assert!(v.z.abs() < 1e-9);
        }
    }

    #[test]
    fn offset_sphere_arc() {
        let m = sphere();
        let half = 0.05f64.asin();
        let a = 1.5 * Vec3::new(half.cos(), 0.0, -half.sin());
        let b = 1.5 * Vec3::new(half.cos(), 0.0, half.sin());
        let patch = make_patch(&m, &a).unwrap();
        let path = trace_geodesic(&m, &patch, &a, &b).unwrap();
        assert!((path.length - 3.0 * half).abs() < 1e-10);
        assert!((path.length - 0.150063).abs() < 1e-6);
    }

    #[test]
    fn degenerate_path() {
        let m = sphere();
        let a = Vec3::new(0.0, 0.6, 0.8);
        let patch = make_patch(&m, &a).unwrap();
        let path = trace_geodesic(&m, &patch, &a, &a).unwrap();
        assert_eq!(path.length, 0.0);
        assert_eq!(path.vertices.len(), 1);
        assert_eq!(prop2_check(m.surface(), &path).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn locality_and_level_preconditions() {
        let m = sphere();
        let a = Vec3::x();
        let patch = make_patch(&m, &a).unwrap();
        let far = Vec3::new(0.0, 1.0, 0.0);
        assert!(matches!(
            trace_geodesic(&m, &patch, &a, &far),
            Err(Error::Precondition(_))
        ));
        let off = Vec3::new(0.99, 0.1, 0.0) * 1.1;
        assert!(matches!(
            trace_geodesic(&m, &patch, &a, &off),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn sphere_ratio_closed_form() {
        let m = sphere();
        let a = Vec3::z();
        let patch = make_patch(&m, &a).unwrap();
        let r = prop1_ratio(&m, &patch, &a, &Vec3::x(), &[0.2, 0.0125]).unwrap();
        let phi: f64 = 0.2;
        assert!((r[0].1 - phi / (2.0 * (phi / 2.0).sin())).abs() < 1e-8, "{r:?}");
        assert!((r[0].1 - 1.001668).abs() < 1e-5);
        assert!((r[1].1 - 1.0 - 6.5e-6).abs() < 1e-7);
    }

    #[test]
    fn torus_equator_turning() {
        let m = SurfaceModel::analytic(crate::ImplicitSurface::torus(2.0, 1.0).unwrap()).unwrap();
        let a = Vec3::new(3.0, 0.0, 0.0);
        let phi: f64 = 0.1 / 3.0;
        let b = Vec3::new(3.0 * phi.cos(), 3.0 * phi.sin(), 0.0);
        let patch = make_patch(&m, &a).unwrap();
        let path = trace_geodesic(&m, &patch, &a, &b).unwrap();
        assert!((path.length - 0.1).abs() < 1e-10);
        let (angle, bound) = prop2_check(m.surface(), &path).unwrap();
        assert!((angle - 0.1 / 3.0).abs() < 1e-10);
        assert!((bound - 0.1).abs() < 1e-10);
    }

    #[test]
    fn csv_export() {
        let m = sphere();
        let half = 0.05f64.asin();
        let a = Vec3::new(half.cos(), -half.sin(), 0.0);
        let b = Vec3::new(half.cos(), half.sin(), 0.0);
        let patch = make_patch(&m, &a).unwrap();
        let path = trace_geodesic(&m, &patch, &a, &b).unwrap();
        let csv = path_csv(m.surface(), &path).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x,y,z,h,kappa");
        assert_eq!(lines.len(), path.vertices.len() + 1);
    }
}
