use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lfslab::config::{parse_surface, ConfigEntries, CATALOG};
use lfslab::feature_size::{medial_csv, medial_sample};
use lfslab::geodesic::{make_patch, path_csv, prop1_ratio, prop2_check, trace_geodesic};
use lfslab::projection::project;
use lfslab::report::{emit_report, plot_data_csv, write_output, ReportFormat};
use lfslab::verifier::{claim3_probe, halving_deltas, integrate_theta, run_campaign, verify_pair};
use lfslab::{Error, ImplicitSurface, LfsMode, SurfaceModel, Vec3};

/// Tolerance on the final offset-closeness ratio above 1.
const CLAIM3_TOL: f64 = 1e-3;
/// Slack on the curvature bound for the geodesic normal angle.
const PROP2_TOL: f64 = 1e-7;

#[derive(Parser)]
#[command(name = "lfslab", version, about = "Check normal-variation bounds on implicit surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List catalog surfaces and their parameters.
    Surfaces,
    /// Check the bounds for one pair of points.
    Verify {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[command(flatten)]
        pair: PairArgs,
    },
    /// Run a seeded Monte-Carlo campaign.
    Campaign(CampaignArgs),
    /// Sample the normal angle along a segment and write it as CSV.
    Trace {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Offset-surface probes.
    Probe {
        #[command(subcommand)]
        probe: Probe,
    },
    /// Sample the medial axis and write it as CSV.
    Medial {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[arg(long, default_value_t = lfslab::model::DEFAULT_CONTACTS)]
        contacts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Probe {
    /// Distance from a displaced point back to the level set, per step.
    Claim3 {
        #[command(flatten)]
        surface: SurfaceArgs,
        /// Point off the surface, strictly closer than its feature size.
        #[arg(long, value_parser = parse_point)]
        point: Vec3,
        #[arg(long, value_parser = parse_point)]
        direction: Vec3,
        /// Steps are `f * 2^-k` for `k` in `first..=last`.
        #[arg(long, default_value_t = 4)]
        first: i32,
        #[arg(long, default_value_t = 16)]
        last: i32,
    },
    /// Geodesic-to-chord ratios on the level set through a point.
    Prop1 {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[arg(long, value_parser = parse_point)]
        point: Vec3,
        #[arg(long, value_parser = parse_point)]
        direction: Vec3,
        #[arg(long, value_delimiter = ',', required = true)]
        scales: Vec<f64>,
    },
    /// Normal angle across a geodesic against its curvature bound.
    Prop2 {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[arg(long, value_parser = parse_point)]
        start: Vec3,
        #[arg(long, value_parser = parse_point)]
        end: Vec3,
        /// Also write the path polyline here.
        #[arg(long)]
        path_csv: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SurfaceArgs {
    /// Catalog surface name.
    #[arg(long)]
    surface: String,
    /// Surface parameter as `name=value`; repeatable.
    #[arg(long = "param", value_parser = parse_key_value)]
    params: Vec<(String, String)>,
    /// Feature size source; defaults to analytic where available.
    #[arg(long, value_enum)]
    lfs_mode: Option<ModeArg>,
    #[arg(long, default_value_t = lfslab::model::DEFAULT_CONTACTS)]
    medial_contacts: usize,
    /// Seed of the medial sampling in numeric mode.
    #[arg(long, default_value_t = 0)]
    medial_seed: u64,
}

#[derive(Args)]
struct PairArgs {
    #[arg(long, value_parser = parse_point)]
    q: Vec3,
    #[arg(long, value_parser = parse_point)]
    q_prime: Vec3,
    /// Project both points onto the surface first.
    #[arg(long)]
    snap: bool,
}

impl PairArgs {
    fn points(&self, model: &SurfaceModel) -> lfslab::Result<(Vec3, Vec3)> {
        if self.snap {
            let s = model.surface();
            Ok((project(s, &self.q)?.foot, project(s, &self.q_prime)?.foot))
        } else {
            Ok((self.q, self.q_prime))
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Analytic,
    Numeric,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    CsvSummary,
}

#[derive(Args)]
struct CampaignArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    surface: Option<String>,
    #[arg(long)]
    eps_max: Option<String>,
    #[arg(long)]
    n_pairs: Option<String>,
    #[arg(long)]
    n_traces: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    lfs_mode: Option<String>,
    #[arg(long)]
    medial_contacts: Option<String>,
    #[arg(long)]
    claim3_probes: Option<String>,
    /// Report destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any configuration entry as `key=value`; repeatable, applied last.
    #[arg(long = "set")]
    set: Vec<String>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Also write `eps,angle,bound_log,bound_new` per pair to this file.
    #[arg(long)]
    plot_data: Option<PathBuf>,
    /// Include the wall time in the report.
    #[arg(long)]
    timing: bool,
}

fn parse_point(s: &str) -> Result<Vec3, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, z] => Ok(Vec3::new(x, y, z)),
        _ => Err(format!("expected `x,y,z`, got `{s}`")),
    }
}

fn parse_key_value(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected `name=value`, got `{s}`"))
}

enum Outcome {
    Pass,
    Violation,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Violation) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> lfslab::Result<Outcome> {
    match command {
        Command::Surfaces => {
            for entry in &CATALOG {
                let lfs = if entry.analytic_lfs { "analytic" } else { "numeric" };
                println!("{} (feature size: {lfs})", entry.name);
                for (name, default, about) in entry.params {
                    println!("  {name:<6} default {default:<32} {about}");
                }
            }
            Ok(Outcome::Pass)
        }
        Command::Verify { surface, pair } => {
            let model = surface.model()?;
            let (q, q_prime) = pair.points(&model)?;
            let record = verify_pair(&model, &q, &q_prime)?;
            println!("{}", serde_json::to_string_pretty(&record).expect("record is serializable"));
            Ok(verdict(record.passed()))
        }
        Command::Campaign(args) => campaign(args),
        Command::Trace {
            surface,
            pair,
            steps,
            out,
        } => {
            let model = surface.model()?;
            let (q, q_prime) = pair.points(&model)?;
            let trace = integrate_theta(&model, &q, &q_prime, steps)?;
            emit(out.as_deref(), trace.to_csv().as_bytes())?;
            eprintln!(
                "angle {} integrated {} (error {:e}, tol {:e}); omega {} rate {} continuity {}",
                trace.pair.angle,
                trace.integrated_angle,
                trace.integration_error(),
                trace.integration_tol(),
                ok(trace.omega_ok()),
                ok(trace.rate_ok()),
                ok(trace.continuity_ok()),
            );
            Ok(verdict(trace.all_ok() && trace.pair.passed()))
        }
        Command::Probe { probe } => run_probe(probe),
        Command::Medial {
            surface,
            contacts,
            seed,
            out,
        } => {
            let s = surface.surface()?;
            let estimates = medial_sample(&s, contacts, seed)?;
            emit(out.as_deref(), medial_csv(&estimates).as_bytes())?;
            Ok(Outcome::Pass)
        }
    }
}

fn run_probe(probe: Probe) -> lfslab::Result<Outcome> {
    match probe {
        Probe::Claim3 {
            surface,
            point,
            direction,
            first,
            last,
        } => {
            let model = surface.model()?;
            let foot = project(model.surface(), &point)?.foot;
            let deltas = halving_deltas(model.lfs(&foot)?, first, last);
            let ratios = claim3_probe(&model, &point, &direction, &deltas)?;
            println!("dt,ratio");
            for (dt, r) in &ratios {
                println!("{dt},{r}");
            }
            Ok(verdict(ratios.last().is_none_or(|&(_, r)| r <= 1.0 + CLAIM3_TOL)))
        }
        Probe::Prop1 {
            surface,
            point,
            direction,
            scales,
        } => {
            let model = surface.model()?;
            let patch = make_patch(&model, &point)?;
            println!("delta,ratio");
            for (d, r) in prop1_ratio(&model, &patch, &point, &direction, &scales)? {
                println!("{d},{r}");
            }
            Ok(Outcome::Pass)
        }
        Probe::Prop2 {
            surface,
            start,
            end,
            path_csv: csv_out,
        } => {
            let model = surface.model()?;
            let patch = make_patch(&model, &start)?;
            let path = trace_geodesic(&model, &patch, &start, &end)?;
            let (angle, bound) = prop2_check(model.surface(), &path)?;
            println!("length,angle,bound");
            println!("{},{angle},{bound}", path.length);
            if let Some(p) = csv_out {
                write_output(&p, path_csv(model.surface(), &path)?.as_bytes())?;
            }
            Ok(verdict(angle <= bound + PROP2_TOL))
        }
    }
}

fn campaign(args: CampaignArgs) -> lfslab::Result<Outcome> {
    let mut entries = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            ConfigEntries::parse(&text)?
        }
        None => ConfigEntries::default(),
    };
    let flags = [
        ("surface", &args.surface),
        ("eps_max", &args.eps_max),
        ("n_pairs", &args.n_pairs),
        ("n_traces", &args.n_traces),
        ("steps", &args.steps),
        ("seed", &args.seed),
        ("lfs_mode", &args.lfs_mode),
        ("medial_contacts", &args.medial_contacts),
        ("claim3_probes", &args.claim3_probes),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            entries.set(key, v)?;
        }
    }
    if let Some(out) = &args.out {
        entries.set("out_path", &out.display().to_string())?;
    }
    for pair in &args.set {
        entries.set_pair(pair)?;
    }
    let config = entries.into_config()?;

    let mut outcome = run_campaign(&config)?;
    let report = &mut outcome.report;
    let wall = report.wall_time.unwrap_or_default();
    if !args.timing {
        report.wall_time = None;
    }
    let format = match args.format {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::CsvSummary => ReportFormat::CsvSummary,
    };
    emit(config.out_path.as_deref(), &emit_report(report, format))?;
    if let Some(path) = &args.plot_data {
        write_output(path, plot_data_csv(&outcome.records).as_bytes())?;
    }
    let c = &report.counts;
    eprintln!(
        "{} pairs: {} passed, {} violated, {} rejected, {} discarded; max angle/bound_log {:.6}; {wall:.2}s",
        c.pairs, c.passed, c.violated, c.rejected, c.medial_discarded, report.max_ratio_log
    );
    Ok(verdict(!report.any_violation()))
}

impl SurfaceArgs {
    fn surface(&self) -> lfslab::Result<ImplicitSurface> {
        ImplicitSurface::from_shape(&parse_surface(&self.surface, &self.params)?)
    }

    fn model(&self) -> lfslab::Result<SurfaceModel> {
        let surface = self.surface()?;
        match self.lfs_mode {
            None => SurfaceModel::preferred(surface, self.medial_seed),
            Some(ModeArg::Analytic) => SurfaceModel::new(surface, LfsMode::Analytic, 0, 0),
            Some(ModeArg::Numeric) => {
                SurfaceModel::new(surface, LfsMode::Numeric, self.medial_contacts, self.medial_seed)
            }
        }
    }
}

fn verdict(pass: bool) -> Outcome {
    if pass {
        Outcome::Pass
    } else {
        Outcome::Violation
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

/// Writes to `path`, or to stdout when absent.
fn emit(path: Option<&Path>, bytes: &[u8]) -> lfslab::Result<()> {
    match path {
        Some(p) => write_output(p, bytes),
        None => std::io::stdout().write_all(bytes).map_err(|e| Error::Io {
            path: "<stdout>".into(),
            message: e.to_string(),
        }),
    }
}
