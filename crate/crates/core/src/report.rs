//! Campaign report schema and its JSON, CSV and plot-data emitters.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::CampaignConfig;
use crate::error::{Error, Result};
use crate::model::LfsMode;
use crate::surface::Shape;
use crate::verifier::PairRecord;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const HISTOGRAM_BINS: usize = 50;
pub const HISTOGRAM_LO: f64 = 0.0;
pub const HISTOGRAM_HI: f64 = 0.5;

/// The configuration fields that determine a report's content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub surface: Shape,
    pub eps_max: f64,
    pub n_pairs: usize,
    pub n_traces: usize,
    pub steps: usize,
    pub seed: u64,
    pub lfs_mode: LfsMode,
    pub medial_contacts: usize,
    pub claim3_probes: usize,
}

impl From<&CampaignConfig> for ConfigEcho {
    fn from(c: &CampaignConfig) -> Self {
        Self {
            surface: c.surface.clone(),
            eps_max: c.eps_max,
            n_pairs: c.n_pairs,
            n_traces: c.n_traces,
            steps: c.steps,
            seed: c.seed,
            lfs_mode: c.lfs_mode,
            medial_contacts: c.medial_contacts,
            claim3_probes: c.claim3_probes,
        }
    }
}

/// `pairs = passed + violated + rejected + medial_discarded`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub pairs: usize,
    pub passed: usize,
    pub violated: usize,
    /// Pairs whose `eps_thm` exceeded 1/3.
    pub rejected: usize,
    /// Draws that landed too close to the medial axis to project reliably.
    pub medial_discarded: usize,
}

impl Counts {
    pub fn reconciles(&self) -> bool {
        self.passed + self.violated + self.rejected + self.medial_discarded == self.pairs
    }
}

/// Fixed-width histogram of `bound_log - angle`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub bins: Vec<usize>,
    pub underflow: usize,
    pub overflow: usize,
}

impl Default for Histogram {
    fn default() -> Self {
        Self {
            lo: HISTOGRAM_LO,
            hi: HISTOGRAM_HI,
            bins: vec![0; HISTOGRAM_BINS],
            underflow: 0,
            overflow: 0,
        }
    }
}

impl Histogram {
    pub fn add(&mut self, x: f64) {
        if x < self.lo {
            self.underflow += 1;
        } else if x >= self.hi {
            self.overflow += 1;
        } else {
            let n = self.bins.len();
            let i = ((x - self.lo) / (self.hi - self.lo) * n as f64) as usize;
            self.bins[i.min(n - 1)] += 1;
        }
    }

    pub fn total(&self) -> usize {
        self.bins.iter().sum::<usize>() + self.underflow + self.overflow
    }
}

/// Pass rates of the intermediate inequalities on the traced subsample.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub traces_run: usize,
    /// Traces aborted because a segment point came near the medial axis.
    pub traces_discarded: usize,
    pub omega_pass_rate: Option<f64>,
    pub rate_pass_rate: Option<f64>,
    pub integration_pass_rate: Option<f64>,
    pub max_integration_error: Option<f64>,
    /// Last ratio of each offset-closeness probe, in pair order.
    pub claim3_final_ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub tool_version: String,
    pub config: ConfigEcho,
    pub counts: Counts,
    pub violations_new: usize,
    pub violations_log: usize,
    /// Largest `angle / bound_log` over admitted pairs.
    pub max_ratio_log: f64,
    /// Largest `eps_thm` over admitted pairs.
    pub max_eps: f64,
    pub margin_histogram: Histogram,
    pub diagnostics: Diagnostics,
    /// Seconds; left out unless timing was requested, so that reports of
    /// identical runs are byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl CampaignReport {
    pub fn empty(config: &CampaignConfig) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            config: config.into(),
            counts: Counts::default(),
            violations_new: 0,
            violations_log: 0,
            max_ratio_log: 0.0,
            max_eps: 0.0,
            margin_histogram: Histogram::default(),
            diagnostics: Diagnostics::default(),
            wall_time: None,
        }
    }

    pub fn any_violation(&self) -> bool {
        self.violations_new > 0 || self.violations_log > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    CsvSummary,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "json" => Ok(Self::Json),
            "csv-summary" => Ok(Self::CsvSummary),
            other => Err(format!("expected `json` or `csv-summary`, got `{other}`")),
        }
    }
}

pub fn emit_report(report: &CampaignReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report).expect("report fields are serializable");
            out.push(b'\n');
            out
        }
        ReportFormat::CsvSummary => csv_summary(report).into_bytes(),
    }
}

pub fn parse_report(bytes: &[u8]) -> Result<CampaignReport> {
    serde_json::from_slice(bytes).map_err(|e| Error::Precondition(format!("malformed report: {e}")))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_summary(r: &CampaignReport) -> String {
    let c = &r.config;
    let d = &r.diagnostics;
    let header = "tool_version,surface,eps_max,n_pairs,seed,lfs_mode,pairs,passed,violated,rejected,medial_discarded,\
violations_new,violations_log,max_ratio_log,max_eps,traces_run,traces_discarded,omega_pass_rate,rate_pass_rate,\
integration_pass_rate,wall_time";
    let mode = match c.lfs_mode {
        LfsMode::Analytic => "analytic",
        LfsMode::Numeric => "numeric",
    };
    let row = [
        r.tool_version.clone(),
        c.surface.kind().to_string(),
        c.eps_max.to_string(),
        c.n_pairs.to_string(),
        c.seed.to_string(),
        mode.to_string(),
        r.counts.pairs.to_string(),
        r.counts.passed.to_string(),
        r.counts.violated.to_string(),
        r.counts.rejected.to_string(),
        r.counts.medial_discarded.to_string(),
        r.violations_new.to_string(),
        r.violations_log.to_string(),
        r.max_ratio_log.to_string(),
        r.max_eps.to_string(),
        d.traces_run.to_string(),
        d.traces_discarded.to_string(),
        opt(d.omega_pass_rate),
        opt(d.rate_pass_rate),
        opt(d.integration_pass_rate),
        opt(r.wall_time),
    ];
    format!("{header}\n{}\n", row.join(","))
}

/// `eps,angle,bound_log,bound_new` per admitted pair.
pub fn plot_data_csv(records: &[PairRecord]) -> String {
    let mut out = String::from("eps,angle,bound_log,bound_new\n");
    for r in records {
        let _ = writeln!(out, "{},{},{},{}", r.eps_thm, r.angle, r.bound_log, r.bound_new);
    }
    out
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(path, bytes).map_err(io)
}
