//! Catalog of closed smooth implicit surfaces `S = F^-1(0)` and their
//! differential data.
//!
//! Orientation convention: `F < 0` inside, so the inward unit normal is
//! `-grad F / |grad F|` and principal curvatures are measured against it
//! (a sphere of radius `R` has curvatures `(1/R, 1/R)`).

use std::fmt;
use std::sync::OnceLock;

use nalgebra::{Matrix2, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{arr, Mat3, Vec3};

/// Gradient norms below this are treated as singular.
pub const MIN_GRADIENT_NORM: f64 = 1e-8;

/// Minimum gradient norm on the zero set required of a metaball blend.
pub const METABALL_MIN_GRADIENT: f64 = 1e-4;

const SEED_GRID: usize = 14;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self {
            min: arr(&min),
            max: arr(&max),
        }
    }

    pub fn lo(&self) -> Vec3 {
        Vec3::from(self.min)
    }

    pub fn hi(&self) -> Vec3 {
        Vec3::from(self.max)
    }

    pub fn center(&self) -> Vec3 {
        (self.lo() + self.hi()) * 0.5
    }

    pub fn diagonal(&self) -> f64 {
        (self.hi() - self.lo()).norm()
    }

    pub fn contains(&self, x: &Vec3) -> bool {
        (0..3).all(|i| x[i] >= self.min[i] && x[i] <= self.max[i])
    }

    /// Box with the same center and every half-extent multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Aabb {
        let c = self.center();
        let half = (self.hi() - self.lo()) * (0.5 * factor);
        Aabb::new(c - half, c + half)
    }
}

/// One blob of a metaball blend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metaball {
    pub center: [f64; 3],
    pub radius: f64,
    pub weight: f64,
}

/// Shape parameters of a catalog surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// `F = |x - c|^2 - R^2`.
    Sphere { center: [f64; 3], radius: f64 },
    /// `F = (sqrt(x^2 + y^2) - R)^2 + z^2 - r^2`, axis `z`, centered at the origin.
    Torus { major: f64, minor: f64 },
    /// `F = x^2/a^2 + y^2/b^2 + z^2/c^2 - 1`.
    Ellipsoid { a: f64, b: f64, c: f64 },
    /// `F = 1 - sum_i w_i exp(-k (|x - c_i|^2 / r_i^2 - 1))`.
    MetaballBlend { balls: Vec<Metaball>, blend: f64 },
}

impl Shape {
    pub fn kind(&self) -> &'static str {
        match self {
            Shape::Sphere { .. } => "sphere",
            Shape::Torus { .. } => "torus",
            Shape::Ellipsoid { .. } => "ellipsoid",
            Shape::MetaballBlend { .. } => "metaball_blend",
        }
    }
}

/// Value, gradient and Hessian of the defining field at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub value: f64,
    pub gradient: Vec3,
    pub hessian: Mat3,
}

/// A point of the surface with its inward normal and local feature size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub position: Vec3,
    pub normal: Vec3,
    pub lfs: f64,
}

/// A closed smooth surface given as the zero set of a catalog field.
///
/// Immutable after construction. A coarse cloud of surface points used to
/// seed closest-point searches is built lazily on first use.
#[derive(Debug, Clone)]
pub struct ImplicitSurface {
    shape: Shape,
    bbox: Aabb,
    seeds: OnceLock<Vec<Vec3>>,
}

impl PartialEq for ImplicitSurface {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape
    }
}

impl fmt::Display for ImplicitSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.shape {
            Shape::Sphere { center, radius } => {
                write!(f, "sphere(R={radius}, c={center:?})")
            }
            Shape::Torus { major, minor } => write!(f, "torus(R={major}, r={minor})"),
            Shape::Ellipsoid { a, b, c } => write!(f, "ellipsoid({a}, {b}, {c})"),
            Shape::MetaballBlend { balls, blend } => {
                write!(f, "metaball_blend({} balls, k={blend})", balls.len())
            }
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidSurface(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ImplicitSurface {
    pub fn sphere(center: Vec3, radius: f64) -> Result<Self> {
        positive("sphere radius", radius)?;
        if !center.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidSurface("sphere center must be finite".into()));
        }
        let r = Vec3::repeat(radius);
        Ok(Self::raw(
            Shape::Sphere {
                center: arr(&center),
                radius,
            },
            Aabb::new(center - r, center + r),
        ))
    }

    pub fn unit_sphere() -> Self {
        Self::sphere(Vec3::zeros(), 1.0).expect("unit sphere is valid")
    }

    pub fn torus(major: f64, minor: f64) -> Result<Self> {
        positive("torus major radius", major)?;
        positive("torus minor radius", minor)?;
        if minor >= major {
            return Err(Error::InvalidSurface(format!(
                "torus needs minor < major, got r={minor}, R={major}"
            )));
        }
        let e = Vec3::new(major + minor, major + minor, minor);
        Ok(Self::raw(Shape::Torus { major, minor }, Aabb::new(-e, e)))
    }

    /// Ellipsoid with semi-axes `a >= b >= c > 0` along `x, y, z`.
    pub fn ellipsoid(a: f64, b: f64, c: f64) -> Result<Self> {
        positive("ellipsoid semi-axis c", c)?;
        positive("ellipsoid semi-axis b", b)?;
        positive("ellipsoid semi-axis a", a)?;
        if !(a >= b && b >= c) {
            return Err(Error::InvalidSurface(format!(
                "ellipsoid semi-axes must satisfy a >= b >= c, got ({a}, {b}, {c})"
            )));
        }
        let e = Vec3::new(a, b, c);
        Ok(Self::raw(Shape::Ellipsoid { a, b, c }, Aabb::new(-e, e)))
    }

    /// Blend of Gaussian blobs. Construction fails unless the blobs overlap
    /// into one connected cluster, every center lies inside the surface and
    /// the gradient norm stays above [`METABALL_MIN_GRADIENT`] on a projected
    /// sample of the zero set.
    pub fn metaball_blend(balls: Vec<Metaball>, blend: f64) -> Result<Self> {
        positive("metaball blend exponent", blend)?;
        if balls.is_empty() {
            return Err(Error::InvalidSurface("metaball blend needs at least one ball".into()));
        }
        for (i, b) in balls.iter().enumerate() {
            positive(&format!("ball {i} radius"), b.radius)?;
            positive(&format!("ball {i} weight"), b.weight)?;
            if !b.center.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidSurface(format!("ball {i} center must be finite")));
            }
        }
        if !balls_connected(&balls) {
            return Err(Error::InvalidSurface(
                "metaball balls do not overlap into a single connected cluster".into(),
            ));
        }

        // Outside every inflated ball each term is below 1/n, so F > 0 there.
        let n = balls.len() as f64;
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for b in &balls {
            let inflate = b.radius * (1.0 + (n * b.weight).ln().max(0.0) / blend).sqrt();
            let c = Vec3::from(b.center);
            lo = lo.inf(&(c - Vec3::repeat(inflate)));
            hi = hi.sup(&(c + Vec3::repeat(inflate)));
        }
        let surface = Self::raw(Shape::MetaballBlend { balls, blend }, Aabb::new(lo, hi));

        if let Shape::MetaballBlend { balls, .. } = &surface.shape {
            for (i, b) in balls.iter().enumerate() {
                if surface.value(&Vec3::from(b.center)) >= 0.0 {
                    return Err(Error::InvalidSurface(format!(
                        "center of ball {i} is not inside the blended surface"
                    )));
                }
            }
        }
        let seeds = surface.seeds();
        if seeds.len() < 100 {
            return Err(Error::InvalidSurface(format!(
                "only {} seed points reached the zero set",
                seeds.len()
            )));
        }
        let min_grad = seeds
            .iter()
            .map(|p| surface.gradient(p).norm())
            .fold(f64::INFINITY, f64::min);
        if min_grad < METABALL_MIN_GRADIENT {
            return Err(Error::InvalidSurface(format!(
                "gradient norm {min_grad:e} on the zero set is below {METABALL_MIN_GRADIENT:e}"
            )));
        }
        Ok(surface)
    }

    /// Validated surface for a shape description.
    pub fn from_shape(shape: &Shape) -> Result<Self> {
        match shape {
            Shape::Sphere { center, radius } => Self::sphere(Vec3::from(*center), *radius),
            Shape::Torus { major, minor } => Self::torus(*major, *minor),
            Shape::Ellipsoid { a, b, c } => Self::ellipsoid(*a, *b, *c),
            Shape::MetaballBlend { balls, blend } => Self::metaball_blend(balls.clone(), *blend),
        }
    }

    fn raw(shape: Shape, bbox: Aabb) -> Self {
        Self {
            shape,
            bbox,
            seeds: OnceLock::new(),
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn kind(&self) -> &'static str {
        self.shape.kind()
    }

    pub fn bounding_box(&self) -> Aabb {
        self.bbox
    }

    pub fn diagonal(&self) -> f64 {
        self.bbox.diagonal()
    }

    /// Tolerance on the first-order distance `|F| / |grad F|` for a point to
    /// count as lying on the surface.
    pub fn on_surface_tol(&self) -> f64 {
        1e-10 * self.diagonal()
    }

    /// Box in which field evaluation is defined.
    pub fn domain(&self) -> Aabb {
        self.bbox.scaled(2.0)
    }

    fn check_domain(&self, x: &Vec3) -> Result<()> {
        if x.iter().all(|c| c.is_finite()) && self.domain().contains(x) {
            Ok(())
        } else {
            Err(Error::Domain {
                surface: self.to_string(),
                point: arr(x),
            })
        }
    }

    /// Value, gradient and Hessian of `F` at `x`.
    pub fn evaluate(&self, x: &Vec3) -> Result<FieldSample> {
        self.check_domain(x)?;
        match &self.shape {
            Shape::Sphere { center, radius } => {
                let d = x - Vec3::from(*center);
                Ok(FieldSample {
                    value: d.norm_squared() - radius * radius,
                    gradient: 2.0 * d,
                    hessian: Mat3::identity() * 2.0,
                })
            }
            Shape::Torus { major, minor } => {
                let rho = x.x.hypot(x.y);
                // sqrt(x^2 + y^2) is not differentiable on the symmetry axis.
                if rho <= 1e-12 * self.diagonal() {
                    return Err(Error::Domain {
                        surface: self.to_string(),
                        point: arr(x),
                    });
                }
                let s = rho - major;
                let (ux, uy) = (x.x / rho, x.y / rho);
                let value = s * s + x.z * x.z - minor * minor;
                let gradient = Vec3::new(2.0 * s * ux, 2.0 * s * uy, 2.0 * x.z);
                let q = 2.0 * s / rho;
                let hxx = 2.0 * ux * ux + q * uy * uy;
                let hyy = 2.0 * uy * uy + q * ux * ux;
                let hxy = 2.0 * ux * uy - q * ux * uy;
                let hessian = Mat3::new(hxx, hxy, 0.0, hxy, hyy, 0.0, 0.0, 0.0, 2.0);
                Ok(FieldSample {
                    value,
                    gradient,
                    hessian,
                })
            }
            Shape::Ellipsoid { a, b, c } => {
                let inv = Vec3::new(1.0 / (a * a), 1.0 / (b * b), 1.0 / (c * c));
                Ok(FieldSample {
                    value: x.component_mul(x).dot(&inv) - 1.0,
                    gradient: 2.0 * x.component_mul(&inv),
                    hessian: Mat3::from_diagonal(&(2.0 * inv)),
                })
            }
            Shape::MetaballBlend { balls, blend } => {
                let mut value = 1.0;
                let mut gradient = Vec3::zeros();
                let mut hessian = Mat3::zeros();
                for b in balls {
                    let d = x - Vec3::from(b.center);
                    let r2 = b.radius * b.radius;
                    let e = b.weight * (-blend * (d.norm_squared() / r2 - 1.0)).exp();
                    let s = 2.0 * blend / r2;
                    value -= e;
                    gradient += e * s * d;
                    hessian += e * s * Mat3::identity() - e * s * s * d * d.transpose();
                }
                Ok(FieldSample {
                    value,
                    gradient,
                    hessian,
                })
            }
        }
    }

    /// `F(x)` without derivatives; `NaN` outside the evaluation domain.
    pub fn value(&self, x: &Vec3) -> f64 {
        self.evaluate(x).map(|s| s.value).unwrap_or(f64::NAN)
    }

    fn gradient(&self, x: &Vec3) -> Vec3 {
        self.evaluate(x)
            .map(|s| s.gradient)
            .unwrap_or_else(|_| Vec3::repeat(f64::NAN))
    }

    /// First-order distance estimate `|F(x)| / |grad F(x)|`.
    pub fn algebraic_distance(&self, x: &Vec3) -> Result<f64> {
        let s = self.evaluate(x)?;
        Ok(s.value.abs() / s.gradient.norm())
    }

    /// Inward unit normal `-grad F / |grad F|` at a surface point.
    pub fn inward_normal(&self, p: &Vec3) -> Result<Vec3> {
        let s = self.evaluate(p)?;
        let g = s.gradient.norm();
        if g < MIN_GRADIENT_NORM {
            return Err(Error::DegenerateGradient {
                point: arr(p),
                norm: g,
            });
        }
        if s.value.abs() / g > self.on_surface_tol() {
            return Err(Error::Precondition(format!(
                "{p:?} is not on {self}: |F|/|grad F| = {:e}",
                s.value.abs() / g
            )));
        }
        Ok(-s.gradient / g)
    }

    /// Principal curvatures `(k1, k2)`, `k1 >= k2`, of the level set of `F`
    /// through `p`, measured against the inward normal.
    ///
    /// The shape operator is the tangential restriction of `hess F / |grad F|`.
    pub fn principal_curvatures(&self, p: &Vec3) -> Result<(f64, f64)> {
        let s = self.evaluate(p)?;
        let g = s.gradient.norm();
        if g < MIN_GRADIENT_NORM {
            return Err(Error::DegenerateGradient {
                point: arr(p),
                norm: g,
            });
        }
        let n = s.gradient / g;
        let (e1, e2) = tangent_basis(&n);
        let h = s.hessian / g;
        let m = Matrix2::new(
            e1.dot(&(h * e1)),
            e1.dot(&(h * e2)),
            e2.dot(&(h * e1)),
            e2.dot(&(h * e2)),
        );
        let eig = SymmetricEigen::new(m);
        let (a, b) = (eig.eigenvalues[0], eig.eigenvalues[1]);
        Ok((a.max(b), a.min(b)))
    }

    /// Largest principal curvature magnitude at `p`.
    pub fn kappa_max(&self, p: &Vec3) -> Result<f64> {
        let (k1, k2) = self.principal_curvatures(p)?;
        Ok(k1.abs().max(k2.abs()))
    }

    /// Newton walk along the gradient onto the zero set. The result lies on
    /// the surface but is not in general the closest point to `x`.
    pub fn gradient_walk(&self, x: &Vec3) -> Option<Vec3> {
        let max_step = 0.1 * self.diagonal();
        let tol = 1e-14 * self.diagonal();
        let mut y = *x;
        for _ in 0..60 {
            let s = self.evaluate(&y).ok()?;
            let g2 = s.gradient.norm_squared();
            if g2.sqrt() < MIN_GRADIENT_NORM {
                return None;
            }
            let mut step = s.gradient * (s.value / g2);
            let len = step.norm();
            if len > max_step {
                step *= max_step / len;
            }
            y -= step;
            if len <= tol {
                return Some(y);
            }
        }
        let s = self.evaluate(&y).ok()?;
        (s.value.abs() / s.gradient.norm() <= self.on_surface_tol()).then_some(y)
    }

    /// Coarse surface cloud: a grid over the bounding box walked onto the
    /// zero set. Used as starting points for closest-point searches.
    pub fn seeds(&self) -> &[Vec3] {
        self.seeds.get_or_init(|| {
            let bb = self.bbox.scaled(1.1);
            let (lo, hi) = (bb.lo(), bb.hi());
            let n = SEED_GRID;
            let mut out = Vec::with_capacity(n * n * n);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let t = Vec3::new(
                            (i as f64 + 0.5) / n as f64,
                            (j as f64 + 0.5) / n as f64,
                            (k as f64 + 0.5) / n as f64,
                        );
                        let x = lo + (hi - lo).component_mul(&t);
                        if let Some(y) = self.gradient_walk(&x) {
                            out.push(y);
                        }
                    }
                }
            }
            out
        })
    }
}

/// Orthonormal pair spanning the plane orthogonal to the unit vector `n`.
pub fn tangent_basis(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() < 0.6 {
        Vec3::x()
    } else if n.y.abs() < 0.6 {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let e1 = (helper - n * n.dot(&helper)).normalize();
    let e2 = n.cross(&e1);
    (e1, e2)
}

fn balls_connected(balls: &[Metaball]) -> bool {
    let n = balls.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] {
                let d = (Vec3::from(balls[i].center) - Vec3::from(balls[j].center)).norm();
                if d < balls[i].radius + balls[j].radius {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    seen.into_iter().all(|s| s)
}
