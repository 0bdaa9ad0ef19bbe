//! Bound formulas and the checks built on them: single pairs, segment
//! integration of the normal angle, the offset-closeness probe and seeded
//! Monte-Carlo campaigns.

mod bounds;
mod campaign;
mod claim3;
mod pair;
mod trace;

pub use bounds::{bound_ab, bound_log, bound_new, EPS_LIMIT};
pub use campaign::{chord_sphere_point, run_campaign, run_campaign_with_threads, threads_from_env, CampaignOutcome, THREADS_ENV};
pub use claim3::{claim3_probe, halving_deltas};
pub use pair::{verify_pair, PairRecord};
pub use trace::{integrate_theta, SegmentTrace, TraceSample, NEAR_MEDIAL_FRACTION};
