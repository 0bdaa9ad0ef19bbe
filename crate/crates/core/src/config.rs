//! Flat `key = value` campaign configuration.
//!
//! ```text
//! # unit sphere, hypothesis limit
//! surface = sphere
//! surface.R = 1.0
//! eps_max = 1/3
//! n_pairs = 10000
//! seed = 42
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::model::{LfsMode, DEFAULT_CONTACTS};
use crate::surface::{ImplicitSurface, Metaball, Shape};
use crate::verifier::EPS_LIMIT;

pub const REQUIRED_KEYS: [&str; 4] = ["surface", "eps_max", "n_pairs", "seed"];
pub const MIN_TRACE_STEPS: usize = 100;
pub const DEFAULT_STEPS: usize = 1000;

const TOP_LEVEL_KEYS: [&str; 10] = [
    "surface",
    "eps_max",
    "n_pairs",
    "n_traces",
    "steps",
    "seed",
    "lfs_mode",
    "medial_contacts",
    "claim3_probes",
    "out_path",
];

/// A catalog surface and its parameters with defaults.
pub struct CatalogEntry {
    pub name: &'static str,
    pub params: &'static [(&'static str, &'static str, &'static str)],
    pub analytic_lfs: bool,
}

pub const CATALOG: [CatalogEntry; 4] = [
    CatalogEntry {
        name: "sphere",
        params: &[
            ("R", "1.0", "radius"),
            ("cx", "0.0", "center x"),
            ("cy", "0.0", "center y"),
            ("cz", "0.0", "center z"),
        ],
        analytic_lfs: true,
    },
    CatalogEntry {
        name: "torus",
        params: &[("R", "2.0", "major radius"), ("r", "1.0", "minor radius, r < R")],
        analytic_lfs: true,
    },
    CatalogEntry {
        name: "ellipsoid",
        params: &[
            ("a", "2.0", "x semi-axis"),
            ("b", "1.5", "y semi-axis"),
            ("c", "1.0", "z semi-axis, a >= b >= c"),
        ],
        analytic_lfs: false,
    },
    CatalogEntry {
        name: "metaball_blend",
        params: &[
            ("balls", "-0.7 0 0 0.8 1; 0.7 0 0 0.8 1", "`x y z radius weight` per ball, `;`-separated"),
            ("k", "2.0", "blend sharpness"),
        ],
        analytic_lfs: false,
    },
];

pub fn catalog_entry(name: &str) -> Option<&'static CatalogEntry> {
    CATALOG.iter().find(|e| e.name == name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub surface: Shape,
    pub eps_max: f64,
    pub n_pairs: usize,
    /// Leading pairs that also get a full segment trace.
    pub n_traces: usize,
    pub steps: usize,
    pub seed: u64,
    pub lfs_mode: LfsMode,
    /// Contact points for numeric feature size.
    pub medial_contacts: usize,
    /// Leading pairs that also get an offset-closeness probe.
    pub claim3_probes: usize,
    pub out_path: Option<PathBuf>,
}

impl CampaignConfig {
    /// Defaults for everything but the required keys.
    pub fn new(surface: Shape, eps_max: f64, n_pairs: usize, seed: u64) -> Self {
        Self {
            surface,
            eps_max,
            n_pairs,
            n_traces: 0,
            steps: DEFAULT_STEPS,
            seed,
            lfs_mode: LfsMode::Analytic,
            medial_contacts: DEFAULT_CONTACTS,
            claim3_probes: 0,
            out_path: None,
        }
    }

    pub fn build_surface(&self) -> Result<ImplicitSurface> {
        ImplicitSurface::from_shape(&self.surface).map_err(|e| Error::config("surface", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_max > 0.0 && self.eps_max <= EPS_LIMIT) {
            return Err(Error::config(
                "eps_max",
                format!("{} is outside (0, 1/3]; the bounds are only claimed up to 1/3", self.eps_max),
            ));
        }
        if self.n_pairs == 0 {
            return Err(Error::config("n_pairs", "must be at least 1"));
        }
        if self.n_traces > self.n_pairs {
            return Err(Error::config(
                "n_traces",
                format!("{} exceeds n_pairs = {}", self.n_traces, self.n_pairs),
            ));
        }
        if self.claim3_probes > self.n_pairs {
            return Err(Error::config(
                "claim3_probes",
                format!("{} exceeds n_pairs = {}", self.claim3_probes, self.n_pairs),
            ));
        }
        if self.n_traces > 0 && self.steps < MIN_TRACE_STEPS {
            return Err(Error::config(
                "steps",
                format!("{} < {MIN_TRACE_STEPS} while n_traces > 0", self.steps),
            ));
        }
        if self.lfs_mode == LfsMode::Numeric && self.medial_contacts < crate::feature_size::MIN_CONTACTS {
            return Err(Error::config(
                "medial_contacts",
                format!("{} < {}", self.medial_contacts, crate::feature_size::MIN_CONTACTS),
            ));
        }
        self.build_surface().map(|_| ())
    }

    /// Renders the configuration in the format `parse_config` reads.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let (name, params) = shape_params(&self.surface);
        let _ = writeln!(out, "surface = {name}");
        for (k, v) in params {
            let _ = writeln!(out, "surface.{k} = {v}");
        }
        let _ = writeln!(out, "eps_max = {}", self.eps_max);
        let _ = writeln!(out, "n_pairs = {}", self.n_pairs);
        let _ = writeln!(out, "n_traces = {}", self.n_traces);
        let _ = writeln!(out, "steps = {}", self.steps);
        let _ = writeln!(out, "seed = {}", self.seed);
        let mode = match self.lfs_mode {
            LfsMode::Analytic => "analytic",
            LfsMode::Numeric => "numeric",
        };
        let _ = writeln!(out, "lfs_mode = {mode}");
        let _ = writeln!(out, "medial_contacts = {}", self.medial_contacts);
        let _ = writeln!(out, "claim3_probes = {}", self.claim3_probes);
        if let Some(p) = &self.out_path {
            let _ = writeln!(out, "out_path = {}", p.display());
        }
        out
    }
}

fn shape_params(shape: &Shape) -> (&'static str, Vec<(&'static str, String)>) {
    match shape {
        Shape::Sphere { center, radius } => (
            "sphere",
            vec![
                ("R", radius.to_string()),
                ("cx", center[0].to_string()),
                ("cy", center[1].to_string()),
                ("cz", center[2].to_string()),
            ],
        ),
        Shape::Torus { major, minor } => ("torus", vec![("R", major.to_string()), ("r", minor.to_string())]),
        Shape::Ellipsoid { a, b, c } => (
            "ellipsoid",
            vec![("a", a.to_string()), ("b", b.to_string()), ("c", c.to_string())],
        ),
        Shape::MetaballBlend { balls, blend } => {
            let balls = balls
                .iter()
                .map(|m| {
                    format!(
                        "{} {} {} {} {}",
                        m.center[0], m.center[1], m.center[2], m.radius, m.weight
                    )
                })
                .collect::<Vec<_>>()
                .join("; ");
            ("metaball_blend", vec![("balls", balls), ("k", blend.to_string())])
        }
    }
}

/// Ordered `key = value` entries; later entries override earlier ones.
#[derive(Debug, Clone, Default)]
pub struct ConfigEntries {
    values: BTreeMap<String, String>,
}

impl ConfigEntries {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(
                    format!("line {}", i + 1),
                    format!("expected `key = value`, got `{line}`"),
                ));
            };
            entries.set(key.trim(), value.trim())?;
        }
        Ok(entries)
    }

    /// Sets one entry, rejecting unknown keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if key.is_empty() {
            return Err(Error::config("<empty>", "missing key before `=`"));
        }
        let known = TOP_LEVEL_KEYS.contains(&key) || key.strip_prefix("surface.").is_some_and(|p| !p.is_empty());
        if !known {
            return Err(Error::config(key, "unknown key"));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Parses `key=value` as given on a command line.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::config(pair, "expected `key=value`"))?;
        self.set(key.trim(), value.trim())
    }

    pub fn merge(&mut self, other: &ConfigEntries) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn into_config(self) -> Result<CampaignConfig> {
        let missing: Vec<&str> = REQUIRED_KEYS
            .iter()
            .copied()
            .filter(|k| self.get(k).is_none())
            .collect();
        if !missing.is_empty() {
            return Err(Error::config(missing.join(", "), "missing required key"));
        }
        let surface = self.surface()?;
        let mut config = CampaignConfig::new(
            surface,
            parse_real("eps_max", self.get("eps_max").unwrap_or_default())?,
            parse_count("n_pairs", self.get("n_pairs").unwrap_or_default())?,
            parse_seed(self.get("seed").unwrap_or_default())?,
        );
        if let Some(v) = self.get("n_traces") {
            config.n_traces = parse_count("n_traces", v)?;
        }
        if let Some(v) = self.get("steps") {
            config.steps = parse_count("steps", v)?;
        }
        if let Some(v) = self.get("lfs_mode") {
            config.lfs_mode = v.parse().map_err(|m: String| Error::config("lfs_mode", m))?;
        }
        if let Some(v) = self.get("medial_contacts") {
            config.medial_contacts = parse_count("medial_contacts", v)?;
        }
        if let Some(v) = self.get("claim3_probes") {
            config.claim3_probes = parse_count("claim3_probes", v)?;
        }
        if let Some(v) = self.get("out_path") {
            if v.is_empty() {
                return Err(Error::config("out_path", "empty path"));
            }
            config.out_path = Some(PathBuf::from(v));
        }
        config.validate()?;
        Ok(config)
    }

    fn surface(&self) -> Result<Shape> {
        let name = self.get("surface").unwrap_or_default();
        let entry = catalog_entry(name).ok_or_else(|| {
            let names: Vec<&str> = CATALOG.iter().map(|e| e.name).collect();
            Error::config("surface", format!("unknown surface `{name}`; expected one of {}", names.join(", ")))
        })?;
        for key in self.values.keys() {
            if let Some(param) = key.strip_prefix("surface.") {
                if !entry.params.iter().any(|(p, _, _)| *p == param) {
                    return Err(Error::config(key, format!("not a parameter of `{name}`")));
                }
            }
        }
        let param = |p: &str| -> &str {
            self.get(&format!("surface.{p}")).unwrap_or_else(|| {
                entry
                    .params
                    .iter()
                    .find(|(k, _, _)| *k == p)
                    .map(|(_, d, _)| *d)
                    .unwrap_or_default()
            })
        };
        let real = |p: &str| parse_real(&format!("surface.{p}"), param(p));
        Ok(match name {
            "sphere" => Shape::Sphere {
                center: [real("cx")?, real("cy")?, real("cz")?],
                radius: real("R")?,
            },
            "torus" => Shape::Torus {
                major: real("R")?,
                minor: real("r")?,
            },
            "ellipsoid" => Shape::Ellipsoid {
                a: real("a")?,
                b: real("b")?,
                c: real("c")?,
            },
            _ => Shape::MetaballBlend {
                balls: parse_balls(param("balls"))?,
                blend: real("k")?,
            },
        })
    }
}

/// Catalog shape from a surface name and `param = value` overrides.
pub fn parse_surface(name: &str, params: &[(String, String)]) -> Result<Shape> {
    let mut entries = ConfigEntries::default();
    entries.set("surface", name)?;
    for (k, v) in params {
        entries.set(&format!("surface.{k}"), v)?;
    }
    let shape = entries.surface()?;
    ImplicitSurface::from_shape(&shape).map_err(|e| Error::config("surface", e.to_string()))?;
    Ok(shape)
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<CampaignConfig> {
    ConfigEntries::parse(text)?.into_config()
}

/// Decimal or `a/b` fraction.
pub fn parse_real(key: &str, value: &str) -> Result<f64> {
    let bad = || Error::config(key, format!("`{value}` is not a number"));
    let x = match value.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|_| bad())?;
            let d: f64 = d.trim().parse().map_err(|_| bad())?;
            n / d
        }
        None => value.parse().map_err(|_| bad())?,
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::config(key, format!("`{value}` is not finite")))
    }
}

fn parse_count(key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("`{value}` is not a non-negative integer")))
}

fn parse_seed(value: &str) -> Result<u64> {
    value
        .parse()
        .map_err(|_| Error::config("seed", format!("`{value}` is not a 64-bit unsigned integer")))
}

fn parse_balls(value: &str) -> Result<Vec<Metaball>> {
    value
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|ball| {
            let nums: Vec<f64> = ball
                .split_whitespace()
                .map(|t| parse_real("surface.balls", t))
                .collect::<Result<_>>()?;
            match nums[..] {
                [x, y, z, radius, weight] => Ok(Metaball {
                    center: [x, y, z],
                    radius,
                    weight,
                }),
                _ => Err(Error::config(
                    "surface.balls",
                    format!("`{ball}` needs five numbers: x y z radius weight"),
                )),
            }
        })
        .collect()
}
