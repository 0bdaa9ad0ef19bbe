use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::bounds::EPS_LIMIT;
use super::pair::{record, PairRecord};
use crate::error::{Error, Result};
use crate::model::SurfaceModel;
use crate::projection::project;
use crate::{angle_between, arr, Vec3};

/// Trace points with `h >= NEAR_MEDIAL_FRACTION * f(foot)` abort the trace.
pub const NEAR_MEDIAL_FRACTION: f64 = 0.9;
pub const MIN_STEPS: usize = 100;

/// One point `p(t) = q + t (q' - q) / |q' - q|` of the segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    /// Arc-length parameter in `[0, |q - q'|]`.
    pub t: f64,
    pub point: [f64; 3],
    pub foot: [f64; 3],
    /// `h(p(t))`.
    pub omega: f64,
    /// Angle between `n_q` and `n_{p(t)}`.
    pub theta: f64,
    /// Finite-difference `|theta'(t)|`.
    pub theta_rate: f64,
    pub f_foot: f64,
    /// `2 eps / (1 - 2 eps) * f(p~)`.
    pub omega_bound: f64,
    /// `1 / ((1 - eps t / |q - q'|) f(q))`.
    pub rate_bound: f64,
    pub omega_ok: bool,
    pub rate_ok: bool,
}

/// Angle profile along the segment `qq'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentTrace {
    pub pair: PairRecord,
    pub steps: usize,
    pub samples: Vec<TraceSample>,
    /// Trapezoidal integral of `|theta'|` over the segment.
    pub integrated_angle: f64,
    /// Largest jump of `theta` between consecutive samples.
    pub max_jump: f64,
}

impl SegmentTrace {
    /// `10 / steps^2 + 1e-7`.
    pub fn integration_tol(&self) -> f64 {
        10.0 / (self.steps as f64).powi(2) + 1e-7
    }

    pub fn integration_error(&self) -> f64 {
        (self.integrated_angle - self.pair.angle).abs()
    }

    pub fn integration_ok(&self) -> bool {
        self.integration_error() <= self.integration_tol()
    }

    pub fn continuity_ok(&self) -> bool {
        self.max_jump < 10.0 / self.steps as f64
    }

    pub fn omega_ok(&self) -> bool {
        self.samples.iter().all(|s| s.omega_ok)
    }

    pub fn rate_ok(&self) -> bool {
        self.samples.iter().all(|s| s.rate_ok)
    }

    pub fn all_ok(&self) -> bool {
        self.integration_ok() && self.continuity_ok() && self.omega_ok() && self.rate_ok()
    }

    /// CSV with one row per sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "t,x,y,z,foot_x,foot_y,foot_z,omega,theta,theta_rate,f_foot,omega_bound,rate_bound,omega_ok,rate_ok\n",
        );
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                s.t,
                s.point[0],
                s.point[1],
                s.point[2],
                s.foot[0],
                s.foot[1],
                s.foot[2],
                s.omega,
                s.theta,
                s.theta_rate,
                s.f_foot,
                s.omega_bound,
                s.rate_bound,
                s.omega_ok,
                s.rate_ok
            );
        }
        out
    }
}

/// Samples the normal angle along the straight segment from `q` to `q'`
/// and checks the distance bound on `h`, the pointwise rate bound on
/// `theta'` and that the integral of `|theta'|` reproduces the end angle.
pub fn integrate_theta(model: &SurfaceModel, q: &Vec3, q_prime: &Vec3, steps: usize) -> Result<SegmentTrace> {
    if steps < MIN_STEPS {
        return Err(Error::Precondition(format!("steps = {steps} < {MIN_STEPS}")));
    }
    let a = model.surface_point(q)?;
    let b = model.surface_point(q_prime)?;
    let pair = record(model, &a, &b)?;
    if pair.dist == 0.0 {
        return Ok(SegmentTrace {
            pair,
            steps,
            samples: Vec::new(),
            integrated_angle: 0.0,
            max_jump: 0.0,
        });
    }

    let surface = model.surface();
    let eps = pair.eps_thm.min(EPS_LIMIT);
    let d = pair.dist;
    let h = d / steps as f64;
    let omega_factor = 2.0 * eps / (1.0 - 2.0 * eps);
    let tol = model.angle_tol();

    let mut samples = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let t = i as f64 * h;
        let p = if i == steps {
            *q_prime
        } else {
            q + (q_prime - q) * (i as f64 / steps as f64)
        };
        let r = project(surface, &p)?;
        let f_foot = model.lfs(&r.foot)?;
        if r.distance >= NEAR_MEDIAL_FRACTION * f_foot {
            return Err(Error::NearMedial {
                point: arr(&p),
                omega: r.distance,
                lfs: f_foot,
            });
        }
        let n = surface.inward_normal(&r.foot)?;
        let omega_bound = omega_factor * f_foot;
        samples.push(TraceSample {
            t,
            point: arr(&p),
            foot: arr(&r.foot),
            omega: r.distance,
            theta: angle_between(&a.normal, &n),
            theta_rate: 0.0,
            f_foot,
            omega_bound,
            rate_bound: 1.0 / ((1.0 - eps * t / d) * a.lfs),
            omega_ok: r.distance <= omega_bound + tol,
            rate_ok: true,
        });
    }

    let theta: Vec<f64> = samples.iter().map(|s| s.theta).collect();
    let n = steps;
    let rate_slack = 1e2 / steps as f64;
    for i in 0..=n {
        let rate = if i == 0 {
            (-3.0 * theta[0] + 4.0 * theta[1] - theta[2]) / (2.0 * h)
        } else if i == n {
            (3.0 * theta[n] - 4.0 * theta[n - 1] + theta[n - 2]) / (2.0 * h)
        } else {
            (theta[i + 1] - theta[i - 1]) / (2.0 * h)
        };
        let s = &mut samples[i];
        s.theta_rate = rate.abs();
        s.rate_ok = s.theta_rate <= s.rate_bound + rate_slack;
    }

    let integrated_angle = h * (samples.iter().map(|s| s.theta_rate).sum::<f64>()
        - 0.5 * (samples[0].theta_rate + samples[n].theta_rate));
    let max_jump = theta.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    Ok(SegmentTrace {
        pair,
        steps,
        samples,
        integrated_angle,
        max_jump,
    })
}
