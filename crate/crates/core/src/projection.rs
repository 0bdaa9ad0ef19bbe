//! Unsigned distance `h(x) = d(x, S)`, the closest-point map `x -> x~` and
//! the extended normal `n_x = n_{x~}`.
//!
//! Closest points are found by damped Newton iteration on the Lagrange
//! conditions `y - x + lambda grad F(y) = 0`, `F(y) = 0`, started from the
//! gradient walk of `x` and from the nearest points of the surface's coarse
//! seed cloud. The nearest converged critical point wins; two well-separated
//! feet at (numerically) equal distance mean `x` sits on the medial axis.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SurfaceModel;
use crate::surface::{ImplicitSurface, MIN_GRADIENT_NORM};
use crate::{arr, Mat3, Vec3};

/// Number of seed-cloud starts per projection, in addition to the gradient walk.
pub const SEED_STARTS: usize = 8;
pub const MAX_ITERATIONS: usize = 100;

/// Which side of the surface a point lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Inside,
    Outside,
    OnSurface,
}

impl Side {
    /// Sign of the signed distance: `+1` outside, `-1` inside, `0` on the surface.
    pub fn sign(self) -> f64 {
        match self {
            Side::Inside => -1.0,
            Side::Outside => 1.0,
            Side::OnSurface => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionResult {
    /// Closest surface point `x~`.
    pub foot: Vec3,
    /// `h(x) = |x - x~|`.
    pub distance: f64,
    pub side: Side,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Newton residual target.
pub fn residual_target(surface: &ImplicitSurface) -> f64 {
    1e-12 * surface.diagonal()
}

/// Distance-gap and separation scale used for medial-axis detection.
pub fn ambiguity_tol(surface: &ImplicitSurface) -> f64 {
    1e-6 * surface.diagonal()
}

/// Finite-difference step for derivatives of `h`.
pub fn fd_step(surface: &ImplicitSurface) -> f64 {
    1e-6 * surface.diagonal()
}

#[derive(Debug, Clone, Copy)]
struct Attempt {
    foot: Vec3,
    residual: f64,
    iterations: usize,
    converged: bool,
}

fn lagrange_residual(surface: &ImplicitSurface, x: &Vec3, y: &Vec3, lambda: f64) -> Option<(f64, Vec3, f64, f64)> {
    let s = surface.evaluate(y).ok()?;
    let gn = s.gradient.norm();
    if gn < MIN_GRADIENT_NORM {
        return None;
    }
    let r1 = y - x + lambda * s.gradient;
    let r2 = s.value / gn;
    Some((r1.norm_squared() + r2 * r2, r1, s.value, gn))
}

fn newton(surface: &ImplicitSurface, x: &Vec3, start: &Vec3) -> Attempt {
    let target = residual_target(surface);
    let max_step = 0.25 * surface.diagonal();
    let mut y = *start;
    let mut lambda = f64::NAN;
    let mut best = Attempt {
        foot: y,
        residual: f64::INFINITY,
        iterations: 0,
        converged: false,
    };

    for it in 0..MAX_ITERATIONS {
        let Ok(s) = surface.evaluate(&y) else {
            return best;
        };
        let gn = s.gradient.norm();
        if gn < MIN_GRADIENT_NORM {
            return best;
        }
        if lambda.is_nan() {
            lambda = (x - y).dot(&s.gradient) / (gn * gn);
        }
        let r1 = y - x + lambda * s.gradient;
        let residual = r1.norm().max(s.value.abs() / gn);
        best = Attempt {
            foot: y,
            residual,
            iterations: it,
            converged: residual <= target,
        };
        if best.converged {
            return best;
        }

        let g = s.gradient;
        let mut jac = Matrix4::zeros();
        jac.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&(Mat3::identity() + lambda * s.hessian));
        jac.fixed_view_mut::<3, 1>(0, 3).copy_from(&g);
        jac.fixed_view_mut::<1, 3>(3, 0).copy_from(&g.transpose());
        let rhs = -Vector4::new(r1.x, r1.y, r1.z, s.value);
        let Some(delta) = jac.lu().solve(&rhs) else {
            return best;
        };
        let mut dy = Vec3::new(delta[0], delta[1], delta[2]);
        let mut dl = delta[3];
        let len = dy.norm();
        if !len.is_finite() {
            return best;
        }
        if len > max_step {
            dy *= max_step / len;
            dl *= max_step / len;
        }

        let merit = r1.norm_squared() + (s.value / gn).powi(2);
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-8 {
            let (yt, lt) = (y + alpha * dy, lambda + alpha * dl);
            if let Some((m, ..)) = lagrange_residual(surface, x, &yt, lt) {
                if m < (1.0 - 1e-4 * alpha) * merit {
                    y = yt;
                    lambda = lt;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            // Stalled at round-off level.
            best.converged = best.residual <= 1e3 * target;
            return best;
        }
    }
    if let Some((_, r1, value, gn)) = lagrange_residual(surface, x, &y, lambda) {
        let residual = r1.norm().max(value.abs() / gn);
        if residual < best.residual {
            best = Attempt {
                foot: y,
                residual,
                iterations: MAX_ITERATIONS,
                converged: residual <= target,
            };
        }
    }
    best
}

fn finish(surface: &ImplicitSurface, x: &Vec3, a: Attempt) -> Result<ProjectionResult> {
    let distance = (x - a.foot).norm();
    let side = if distance <= surface.on_surface_tol() {
        Side::OnSurface
    } else if surface.evaluate(x)?.value > 0.0 {
        Side::Outside
    } else {
        Side::Inside
    };
    Ok(ProjectionResult {
        foot: a.foot,
        distance,
        side,
        iterations: a.iterations,
        residual: a.residual,
        converged: a.converged,
    })
}

fn nearest_seeds(seeds: &[Vec3], x: &Vec3, k: usize) -> Vec<Vec3> {
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for (i, s) in seeds.iter().enumerate() {
        let d = (s - x).norm_squared();
        if best.len() < k || d < best[best.len() - 1].0 {
            let pos = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(pos, (d, i));
            best.truncate(k);
        }
    }
    best.into_iter().map(|(_, i)| seeds[i]).collect()
}

/// Global closest point of the surface to `x`.
pub fn project(surface: &ImplicitSurface, x: &Vec3) -> Result<ProjectionResult> {
    surface.evaluate(x)?;
    let mut starts = Vec::with_capacity(SEED_STARTS + 1);
    if let Some(y) = surface.gradient_walk(x) {
        starts.push(y);
    }
    starts.extend(nearest_seeds(surface.seeds(), x, SEED_STARTS));

    let attempts: Vec<Attempt> = starts.iter().map(|s| newton(surface, x, s)).collect();
    let converged: Vec<(f64, &Attempt)> = attempts
        .iter()
        .filter(|a| a.converged)
        .map(|a| ((x - a.foot).norm(), a))
        .collect();
    let Some(&(dmin, best)) = converged.iter().min_by(|a, b| a.0.total_cmp(&b.0)) else {
        let residual = attempts.iter().map(|a| a.residual).fold(f64::INFINITY, f64::min);
        return Err(Error::Convergence {
            point: arr(x),
            residual,
        });
    };

    let tol = ambiguity_tol(surface);
    for &(d, a) in &converged {
        let separation = (a.foot - best.foot).norm();
        if d - dmin <= tol && separation > 100.0 * tol {
            return Err(Error::MedialAmbiguity {
                point: arr(x),
                distance: dmin,
                separation,
            });
        }
    }
    finish(surface, x, *best)
}

/// Closest point found by a single Newton run from `seed`. Valid when `x` is
/// known to be close to a point whose foot is near `seed`, e.g. along a short
/// path away from the medial axis.
pub fn project_from(surface: &ImplicitSurface, x: &Vec3, seed: &Vec3) -> Result<ProjectionResult> {
    surface.evaluate(x)?;
    let a = newton(surface, x, seed);
    if !a.converged {
        return Err(Error::Convergence {
            point: arr(x),
            residual: a.residual,
        });
    }
    finish(surface, x, a)
}

/// `h(x)`.
pub fn distance(surface: &ImplicitSurface, x: &Vec3) -> Result<f64> {
    project(surface, x).map(|r| r.distance)
}

/// Inward normal of the surface at the closest point of `x`.
pub fn extended_normal(surface: &ImplicitSurface, x: &Vec3) -> Result<Vec3> {
    let r = project(surface, x)?;
    surface.inward_normal(&r.foot)
}

/// Point at distance `omega` from `foot` along the surface normal, on `side`.
pub fn offset_point(surface: &ImplicitSurface, foot: &Vec3, omega: f64, side: Side) -> Result<Vec3> {
    let n = surface.inward_normal(foot)?;
    Ok(foot - side.sign() * omega * n)
}

/// Principal curvatures of the level set of `h` through `x`, from the
/// curvatures `k_i` at the foot: `k_i / (1 + d k_i)` with `d` the signed
/// distance (positive outside).
pub fn level_set_curvatures(surface: &ImplicitSurface, x: &Vec3) -> Result<(f64, f64)> {
    let r = project(surface, x)?;
    offset_curvatures(surface, &r.foot, r.side.sign() * r.distance)
}

pub(crate) fn offset_curvatures(surface: &ImplicitSurface, foot: &Vec3, signed: f64) -> Result<(f64, f64)> {
    let (k1, k2) = surface.principal_curvatures(foot)?;
    Ok((k1 / (1.0 + signed * k1), k2 / (1.0 + signed * k2)))
}

/// Mismatch between the numerically differentiated unit gradient of `h` and
/// `(x - x~) / h(x)` at a point strictly between the surface and the medial
/// axis.
pub fn gradient_identity_residual(model: &SurfaceModel, x: &Vec3) -> Result<f64> {
    let surface = model.surface();
    let r = project(surface, x)?;
    let h = r.distance;
    let f = model.lfs(&r.foot)?;
    let step = fd_step(surface);
    if !(h > step && h + step < f) {
        return Err(Error::Precondition(format!(
            "gradient identity needs {step:e} < h < f - {step:e}, got h = {h}, f = {f}"
        )));
    }
    let mut grad = Vec3::zeros();
    for i in 0..3 {
        let mut e = Vec3::zeros();
        e[i] = step;
        let hp = project_from(surface, &(x + e), &r.foot)?.distance;
        let hm = project_from(surface, &(x - e), &r.foot)?.distance;
        grad[i] = (hp - hm) / (2.0 * step);
    }
    let exact = (x - r.foot) / h;
    Ok((grad.normalize() - exact).norm())
}
