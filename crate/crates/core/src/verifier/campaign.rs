use std::f64::consts::{FRAC_PI_2, TAU};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::claim3::{claim3_probe, halving_deltas};
use super::pair::{record, PairRecord};
use super::trace::integrate_theta;
use crate::config::CampaignConfig;
use crate::error::{Error, Result};
use crate::model::SurfaceModel;
use crate::projection::{offset_point, project, Side};
use crate::report::CampaignReport;
use crate::surface::{tangent_basis, ImplicitSurface};
use crate::Vec3;

/// Environment variable capping the worker count; `0` or unset means one
/// worker per core.
pub const THREADS_ENV: &str = "LFSLAB_THREADS";

const BISECTION_STEPS: usize = 200;
/// Offset of the closeness probe, as a fraction of `f(q)`.
const PROBE_OFFSET: f64 = 0.25;
/// Probe steps run from `f(q) 2^-FIRST` down to `f(q) 2^-LAST`.
const PROBE_FIRST: i32 = 4;
const PROBE_LAST: i32 = 16;

/// Report plus the per-pair records behind it, in pair order.
#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    pub report: CampaignReport,
    pub records: Vec<PairRecord>,
}

enum Draw {
    Admitted {
        record: PairRecord,
        trace: Option<TraceVerdict>,
        probe: Option<f64>,
    },
    Rejected,
    Discarded,
}

enum TraceVerdict {
    Ran {
        omega_ok: bool,
        rate_ok: bool,
        integration_ok: bool,
        integration_error: f64,
    },
    NearMedial,
}

/// Worker count from the environment.
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| Error::config(THREADS_ENV, format!("`{v}` is not a non-negative integer"))),
        _ => Ok(0),
    }
}

/// Runs a campaign with the worker count taken from `LFSLAB_THREADS`.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignOutcome> {
    run_campaign_with_threads(config, threads_from_env()?)
}

/// Runs a campaign on `threads` workers (`0` = one per core). Pairs are
/// drawn from per-index random streams and merged in index order, so the
/// report does not depend on the worker count.
pub fn run_campaign_with_threads(config: &CampaignConfig, threads: usize) -> Result<CampaignOutcome> {
    config.validate()?;
    let start = Instant::now();
    let surface = config.build_surface()?;
    let model = SurfaceModel::new(surface, config.lfs_mode, config.medial_contacts, config.seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(THREADS_ENV, e.to_string()))?;
    let draws: Vec<Result<Draw>> = pool.install(|| {
        (0..config.n_pairs)
            .into_par_iter()
            .map(|i| draw_pair(&model, config, i))
            .collect()
    });

    let mut report = CampaignReport::empty(config);
    let mut records = Vec::with_capacity(config.n_pairs);
    let (mut omega_ok, mut rate_ok, mut integration_ok) = (0usize, 0usize, 0usize);
    let mut max_integration_error: Option<f64> = None;
    for draw in draws {
        report.counts.pairs += 1;
        match draw? {
            Draw::Rejected => report.counts.rejected += 1,
            Draw::Discarded => report.counts.medial_discarded += 1,
            Draw::Admitted { record, trace, probe } => {
                if record.passed() {
                    report.counts.passed += 1;
                } else {
                    report.counts.violated += 1;
                }
                report.violations_new += usize::from(!record.pass_new);
                report.violations_log += usize::from(!record.pass_log);
                if record.bound_log > 0.0 {
                    report.max_ratio_log = report.max_ratio_log.max(record.angle / record.bound_log);
                }
                report.max_eps = report.max_eps.max(record.eps_thm);
                report.margin_histogram.add(record.margin_log);
                match trace {
                    Some(TraceVerdict::Ran {
                        omega_ok: o,
                        rate_ok: r,
                        integration_ok: g,
                        integration_error,
                    }) => {
                        report.diagnostics.traces_run += 1;
                        omega_ok += usize::from(o);
                        rate_ok += usize::from(r);
                        integration_ok += usize::from(g);
                        max_integration_error =
                            Some(max_integration_error.map_or(integration_error, |m| m.max(integration_error)));
                    }
                    Some(TraceVerdict::NearMedial) => report.diagnostics.traces_discarded += 1,
                    None => {}
                }
                if let Some(ratio) = probe {
                    report.diagnostics.claim3_final_ratios.push(ratio);
                }
                records.push(record);
            }
        }
    }
    let runs = report.diagnostics.traces_run;
    if runs > 0 {
        let rate = |k: usize| Some(k as f64 / runs as f64);
        report.diagnostics.omega_pass_rate = rate(omega_ok);
        report.diagnostics.rate_pass_rate = rate(rate_ok);
        report.diagnostics.integration_pass_rate = rate(integration_ok);
        report.diagnostics.max_integration_error = max_integration_error;
    }
    debug_assert!(report.counts.reconciles());
    report.wall_time = Some(start.elapsed().as_secs_f64());
    Ok(CampaignOutcome { report, records })
}

fn draw_pair(model: &SurfaceModel, config: &CampaignConfig, index: usize) -> Result<Draw> {
    let surface = model.surface();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);

    let bbox = surface.bounding_box();
    let (lo, hi) = (bbox.lo(), bbox.hi());
    let x = Vec3::from_fn(|k, _| lo[k] + rng.random::<f64>() * (hi[k] - lo[k]));
    let phi = rng.random::<f64>() * TAU;
    let u = 1.0 - rng.random::<f64>();

    // Points this close to the medial axis have no reliable closest point.
    let q = match project(surface, &x) {
        Ok(r) => r.foot,
        Err(Error::MedialAmbiguity { .. } | Error::DegenerateGradient { .. } | Error::Domain { .. }) => {
            return Ok(Draw::Discarded)
        }
        Err(e) => return Err(e),
    };
    let a = model.surface_point(&q)?;
    let (e1, e2) = tangent_basis(&a.normal);
    let t = phi.cos() * e1 + phi.sin() * e2;
    let q_prime = chord_sphere_point(surface, &q, &a.normal, &t, u * config.eps_max * a.lfs)?;
    let b = model.surface_point(&q_prime)?;
    let record = match record(model, &a, &b) {
        Ok(r) => r,
        Err(Error::RejectedPair { .. }) => return Ok(Draw::Rejected),
        Err(e) => return Err(e),
    };

    let trace = if index < config.n_traces {
        Some(match integrate_theta(model, &q, &q_prime, config.steps) {
            Ok(tr) => TraceVerdict::Ran {
                omega_ok: tr.omega_ok(),
                rate_ok: tr.rate_ok(),
                integration_ok: tr.integration_ok() && tr.continuity_ok(),
                integration_error: tr.integration_error(),
            },
            Err(Error::NearMedial { .. }) => TraceVerdict::NearMedial,
            Err(e) => return Err(e),
        })
    } else {
        None
    };

    let probe = if index < config.claim3_probes {
        let p = offset_point(surface, &q, PROBE_OFFSET * a.lfs, Side::Inside)?;
        let deltas = halving_deltas(a.lfs, PROBE_FIRST, PROBE_LAST);
        claim3_probe(model, &p, &t, &deltas)?.last().map(|&(_, ratio)| ratio)
    } else {
        None
    };

    Ok(Draw::Admitted { record, trace, probe })
}

/// Point of the surface at distance `rho` from `q` in the half-plane spanned
/// by the tangent `t` and the inward normal `n_in`, found by bisection on
/// the angle from `-n_in` to `n_in`.
pub fn chord_sphere_point(surface: &ImplicitSurface, q: &Vec3, n_in: &Vec3, t: &Vec3, rho: f64) -> Result<Vec3> {
    if rho.is_nan() || rho <= 0.0 {
        return Err(Error::Precondition(format!("chord radius {rho} must be positive")));
    }
    let at = |s: f64| q + rho * (s.cos() * t + s.sin() * n_in);
    let (mut lo, mut hi) = (-FRAC_PI_2, FRAC_PI_2);
    let (f_lo, f_hi) = (surface.evaluate(&at(lo))?.value, surface.evaluate(&at(hi))?.value);
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(Error::Precondition(format!(
            "chord sphere of radius {rho} around {q:?} does not straddle the surface"
        )));
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if surface.evaluate(&at(mid))?.value > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lo_point = at(lo);
    let hi_point = at(hi);
    let (v_lo, v_hi) = (surface.value(&lo_point).abs(), surface.value(&hi_point).abs());
    Ok(if v_lo <= v_hi { lo_point } else { hi_point })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn sphere_config(n: usize) -> CampaignConfig {
        parse_config(&format!(
            "surface = sphere\neps_max = 1/3\nn_pairs = {n}\nseed = 42\nn_traces = 3\nsteps = 200\nclaim3_probes = 2\n"
        ))
        .unwrap()
    }

    #[test]
    fn sphere_hundred_pairs() {
        let out = run_campaign_with_threads(&sphere_config(100), 2).unwrap();
        let r = &out.report;
        assert_eq!((r.violations_new, r.violations_log), (0, 0));
        assert!(r.counts.reconciles());
        assert_eq!(r.counts.pairs, 100);
        assert_eq!(r.diagnostics.traces_run, 3);
        assert_eq!(r.diagnostics.omega_pass_rate, Some(1.0));
        assert_eq!(r.diagnostics.claim3_final_ratios.len(), 2);
        assert!(r.max_eps <= 1.0 / 3.0 * (1.0 + 1e-12));
        assert_eq!(out.records.len(), r.counts.passed + r.counts.violated);
    }

    #[test]
    fn worker_count_does_not_change_the_report() {
        let mut a = run_campaign_with_threads(&sphere_config(40), 1).unwrap().report;
        let mut b = run_campaign_with_threads(&sphere_config(40), 4).unwrap().report;
        a.wall_time = None;
        b.wall_time = None;
        assert_eq!(a, b);
    }

    #[test]
    fn chord_points_sit_on_the_sphere() {
        let s = ImplicitSurface::unit_sphere();
        let q = Vec3::new(0.0, 0.0, 1.0);
        let p = chord_sphere_point(&s, &q, &(-q), &Vec3::x(), 1.0 / 3.0).unwrap();
        assert!(((p - q).norm() - 1.0 / 3.0).abs() < 1e-14);
        assert!((p.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn invalid_configs() {
        let mut c = sphere_config(10);
        c.n_pairs = 0;
        assert!(matches!(run_campaign_with_threads(&c, 1), Err(Error::Config { .. })));
        let mut c = sphere_config(10);
        c.eps_max = 0.4;
        assert!(matches!(run_campaign_with_threads(&c, 1), Err(Error::Config { .. })));
    }
}
