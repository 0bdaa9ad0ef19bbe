//! Local feature size `f(x) = d(x, M)` where `M` is the medial axis.
//!
//! Spheres and tori have closed-form medial axes. Everything else goes
//! through a shrinking-ball point cloud approximating `M`; distances to a
//! subset of `M` can only overestimate `f`, so numeric values are scaled by
//! [`SAFETY_FACTOR`].

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::{project, Side};
use crate::surface::{ImplicitSurface, Shape};
use crate::Vec3;

pub const SAFETY_FACTOR: f64 = 0.97;
pub const MIN_MEDIAL_POINTS: usize = 100;
pub const MIN_CONTACTS: usize = 100;
/// Size of the surface sample the shrinking balls are tested against.
pub const DENSE_SAMPLE: usize = 10_000;
const MAX_SHRINK_STEPS: usize = 60;
const SHRINK_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MedialMethod {
    Analytic,
    ShrinkingBall,
}

/// A maximal empty ball touching the surface at `contact`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedialEstimate {
    pub contact: Vec3,
    pub center: Vec3,
    pub radius: f64,
    pub method: MedialMethod,
    pub side: Side,
}

/// Known medial axes.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticMedial {
    /// The center of a sphere.
    Point(Vec3),
    /// Core circle of radius `major` in the `z = 0` plane together with the `z` axis.
    CircleAndAxis { major: f64 },
}

impl AnalyticMedial {
    pub fn for_surface(surface: &ImplicitSurface) -> Result<Self> {
        match surface.shape() {
            Shape::Sphere { center, .. } => Ok(Self::Point(Vec3::from(*center))),
            Shape::Torus { major, .. } => Ok(Self::CircleAndAxis { major: *major }),
            _ => Err(Error::NoAnalyticFeatureSize(surface.to_string())),
        }
    }

    pub fn distance(&self, x: &Vec3) -> f64 {
        match self {
            Self::Point(c) => (x - c).norm(),
            Self::CircleAndAxis { major } => {
                let rho = x.x.hypot(x.y);
                (rho - major).hypot(x.z).min(rho)
            }
        }
    }
}

/// Shrinking-ball approximation of the medial axis.
#[derive(Debug, Clone, PartialEq)]
pub struct MedialCloud {
    pub estimates: Vec<MedialEstimate>,
}

impl MedialCloud {
    pub fn build(surface: &ImplicitSurface, n_contacts: usize, seed: u64) -> Result<Self> {
        let estimates = medial_sample(surface, n_contacts, seed)?;
        if estimates.len() < MIN_MEDIAL_POINTS {
            return Err(Error::InsufficientSampling {
                got: estimates.len(),
                need: MIN_MEDIAL_POINTS,
            });
        }
        Ok(Self { estimates })
    }

    /// Distance from `x` to the nearest ball center.
    pub fn distance(&self, x: &Vec3) -> f64 {
        self.estimates
            .iter()
            .map(|e| (e.center - x).norm_squared())
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }
}

/// Local feature size provider.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureSize {
    Analytic(AnalyticMedial),
    Numeric(MedialCloud),
}

impl FeatureSize {
    pub fn analytic(surface: &ImplicitSurface) -> Result<Self> {
        AnalyticMedial::for_surface(surface).map(Self::Analytic)
    }

    pub fn numeric(surface: &ImplicitSurface, n_contacts: usize, seed: u64) -> Result<Self> {
        MedialCloud::build(surface, n_contacts, seed).map(Self::Numeric)
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self, Self::Analytic(_))
    }

    /// `f(x)`; numeric values include the safety factor.
    pub fn lfs(&self, x: &Vec3) -> Result<f64> {
        Ok(match self {
            Self::Analytic(m) => m.distance(x),
            Self::Numeric(c) => SAFETY_FACTOR * self.checked(c)?.distance(x),
        })
    }

    /// `f(x)` without the numeric safety factor.
    pub fn raw_lfs(&self, x: &Vec3) -> Result<f64> {
        Ok(match self {
            Self::Analytic(m) => m.distance(x),
            Self::Numeric(c) => self.checked(c)?.distance(x),
        })
    }

    fn checked<'a>(&self, c: &'a MedialCloud) -> Result<&'a MedialCloud> {
        if c.estimates.len() < MIN_MEDIAL_POINTS {
            return Err(Error::InsufficientSampling {
                got: c.estimates.len(),
                need: MIN_MEDIAL_POINTS,
            });
        }
        Ok(c)
    }

    /// Excess of `|f(x) - f(y)|` over `|x - y|`, zero when the 1-Lipschitz
    /// inequality holds.
    pub fn lipschitz_residual(&self, x: &Vec3, y: &Vec3) -> Result<f64> {
        if x == y {
            return Ok(0.0);
        }
        let gap = (self.lfs(x)? - self.lfs(y)?).abs();
        Ok((gap - (x - y).norm()).max(0.0))
    }
}

/// Closest-point projections of uniformly drawn points of the (slightly
/// inflated) bounding box. Draws landing on the medial axis are skipped.
/// Deterministic for a given seed regardless of thread count.
pub fn surface_sample(surface: &ImplicitSurface, n: usize, seed: u64) -> Vec<Vec3> {
    let bb = surface.bounding_box().scaled(1.2);
    let (lo, hi) = (bb.lo(), bb.hi());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let batch = (n - out.len()) + (n - out.len()) / 8 + 16;
        let draws: Vec<Vec3> = (0..batch)
            .map(|_| {
                let t = Vec3::new(rng.random(), rng.random(), rng.random());
                lo + (hi - lo).component_mul(&t)
            })
            .collect();
        let feet: Vec<Option<Vec3>> = draws
            .par_iter()
            .map(|x| project(surface, x).ok().map(|r| r.foot))
            .collect();
        out.extend(feet.into_iter().flatten().take(n - out.len()));
    }
    out
}

/// Grows a ball tangent at `contact` on the side of `normal` until it is
/// empty with respect to `samples`. Returns `(center, radius)`, or `None`
/// when the ball escapes `bounds`.
pub fn shrinking_ball(
    surface: &ImplicitSurface,
    contact: &Vec3,
    normal: &Vec3,
    samples: &[Vec3],
) -> Option<(Vec3, f64)> {
    let diag = surface.diagonal();
    let exclude = (1e-9 * diag).powi(2);
    let mut radius = diag;
    let mut shrunk = false;
    for _ in 0..MAX_SHRINK_STEPS {
        let center = contact + radius * normal;
        let mut nearest = None;
        let mut best = f64::INFINITY;
        for q in samples {
            if (q - contact).norm_squared() <= exclude {
                continue;
            }
            let d = (q - center).norm_squared();
            if d < best {
                best = d;
                nearest = Some(q);
            }
        }
        let Some(q) = nearest else { break };
        if best.sqrt() >= radius * (1.0 - SHRINK_REL_TOL) {
            break;
        }
        let pq = q - contact;
        let along = normal.dot(&pq);
        if along <= 0.0 {
            break;
        }
        // Ball tangent at the contact passing through q.
        radius = pq.norm_squared() / (2.0 * along);
        shrunk = true;
    }
    let center = contact + radius * normal;
    (shrunk && surface.domain().contains(&center)).then_some((center, radius))
}

/// Inside and outside shrinking-ball medial estimates for `n_contacts`
/// random surface points, tested against a [`DENSE_SAMPLE`]-point surface
/// sample. Outside balls that escape the bounding box are dropped.
pub fn medial_sample(surface: &ImplicitSurface, n_contacts: usize, seed: u64) -> Result<Vec<MedialEstimate>> {
    if n_contacts < MIN_CONTACTS {
        return Err(Error::InsufficientSampling {
            got: n_contacts,
            need: MIN_CONTACTS,
        });
    }
    let dense = surface_sample(surface, DENSE_SAMPLE, seed);
    let contacts = surface_sample(surface, n_contacts, seed ^ 0x9e37_79b9_7f4a_7c15);
    let per_contact: Vec<Result<Vec<MedialEstimate>>> = contacts
        .par_iter()
        .map(|p| {
            let inward = surface.inward_normal(p)?;
            let mut out = Vec::with_capacity(2);
            for (side, n) in [(Side::Inside, inward), (Side::Outside, -inward)] {
                if let Some((center, radius)) = shrinking_ball(surface, p, &n, &dense) {
                    out.push(MedialEstimate {
                        contact: *p,
                        center,
                        radius,
                        method: MedialMethod::ShrinkingBall,
                        side,
                    });
                }
            }
            Ok(out)
        })
        .collect();
    let mut estimates = Vec::with_capacity(2 * n_contacts);
    for r in per_contact {
        estimates.extend(r?);
    }
    Ok(estimates)
}

/// CSV export with header `x,y,z,radius,side`.
pub fn medial_csv(estimates: &[MedialEstimate]) -> String {
    let mut out = String::from("x,y,z,radius,side\n");
    for e in estimates {
        let side = match e.side {
            Side::Inside => "inside",
            Side::Outside => "outside",
            Side::OnSurface => "on_surface",
        };
        let _ = writeln!(out, "{},{},{},{},{}", e.center.x, e.center.y, e.center.z, e.radius, side);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_values() {
        let s = ImplicitSurface::unit_sphere();
        let f = FeatureSize::analytic(&s).unwrap();
        assert_eq!(f.lfs(&Vec3::new(0.0, 0.6, 0.8)).unwrap(), 1.0);
        let t = ImplicitSurface::torus(2.0, 1.0).unwrap();
        let f = FeatureSize::analytic(&t).unwrap();
        assert_eq!(f.lfs(&Vec3::new(3.0, 0.0, 0.0)).unwrap(), 1.0);
        let t = ImplicitSurface::torus(1.5, 1.0).unwrap();
        let f = FeatureSize::analytic(&t).unwrap();
        assert_eq!(f.lfs(&Vec3::new(0.5, 0.0, 0.0)).unwrap(), 0.5);
    }

    #[test]
    fn analytic_unavailable_for_ellipsoid() {
        let e = ImplicitSurface::ellipsoid(2.0, 1.0, 0.5).unwrap();
        assert!(matches!(
            FeatureSize::analytic(&e),
            Err(Error::NoAnalyticFeatureSize(_))
        ));
    }

    #[test]
    fn lipschitz_identity_and_sphere() {
        let s = ImplicitSurface::unit_sphere();
        let f = FeatureSize::analytic(&s).unwrap();
        let x = Vec3::new(0.3, -0.2, 0.9);
        assert_eq!(f.lipschitz_residual(&x, &x).unwrap(), 0.0);
        assert_eq!(
            f.lipschitz_residual(&x, &Vec3::new(0.6, 0.4, 0.1)).unwrap(),
            0.0
        );
        let t = ImplicitSurface::torus(2.0, 1.0).unwrap();
        let f = FeatureSize::analytic(&t).unwrap();
        let r = f
            .lipschitz_residual(&Vec3::new(3.0, 0.0, 0.0), &Vec3::new(3.0, 0.0, 0.1))
            .unwrap();
        assert!(r <= 1e-9);
    }

    #[test]
    fn too_few_contacts() {
        let s = ImplicitSurface::unit_sphere();
        assert!(matches!(
            medial_sample(&s, 10, 42),
            Err(Error::InsufficientSampling { got: 10, .. })
        ));
    }

    #[test]
    fn sphere_inside_balls_hit_the_center() {
        let s = ImplicitSurface::unit_sphere();
        let est = medial_sample(&s, 100, 42).unwrap();
        let inside: Vec<_> = est.iter().filter(|e| e.side == Side::Inside).collect();
        assert_eq!(inside.len(), 100);
        // Every outside ball of a sphere escapes.
        assert_eq!(est.len(), 100);
        for e in inside {
            assert!(e.center.norm() < 1e-3);
            assert!((e.radius - 1.0).abs() < 1e-3);
            assert!(((e.center - e.contact).norm() - e.radius).abs() < 1e-7);
        }
    }

    #[test]
    fn shrinking_ball_is_empty() {
        let s = ImplicitSurface::unit_sphere();
        let dense = surface_sample(&s, 2000, 3);
        let fresh = surface_sample(&s, 2000, 4);
        let p = Vec3::new(0.0, 0.6, 0.8);
        let (c, r) = shrinking_ball(&s, &p, &s.inward_normal(&p).unwrap(), &dense).unwrap();
        for q in &fresh {
            assert!((q - c).norm() >= r * (1.0 - 1e-6));
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let est = [MedialEstimate {
            contact: Vec3::x(),
            center: Vec3::zeros(),
            radius: 1.0,
            method: MedialMethod::ShrinkingBall,
            side: Side::Inside,
        }];
        assert_eq!(medial_csv(&est), "x,y,z,radius,side\n0,0,0,1,inside\n");
    }
}
