//! A surface paired with its local feature size provider.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_size::FeatureSize;
use crate::surface::{ImplicitSurface, SurfacePoint};
use crate::Vec3;

/// Medial contacts used for numeric feature size unless configured otherwise.
pub const DEFAULT_CONTACTS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LfsMode {
    Analytic,
    Numeric,
}

impl std::str::FromStr for LfsMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "analytic" => Ok(Self::Analytic),
            "numeric" => Ok(Self::Numeric),
            other => Err(format!("expected `analytic` or `numeric`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SurfaceModel {
    surface: ImplicitSurface,
    feature: FeatureSize,
}

impl SurfaceModel {
    pub fn new(surface: ImplicitSurface, mode: LfsMode, n_contacts: usize, seed: u64) -> Result<Self> {
        let feature = match mode {
            LfsMode::Analytic => FeatureSize::analytic(&surface)?,
            LfsMode::Numeric => FeatureSize::numeric(&surface, n_contacts, seed)?,
        };
        Ok(Self { surface, feature })
    }

    pub fn analytic(surface: ImplicitSurface) -> Result<Self> {
        Self::new(surface, LfsMode::Analytic, 0, 0)
    }

    /// Analytic where the medial axis is known, numeric otherwise.
    pub fn preferred(surface: ImplicitSurface, seed: u64) -> Result<Self> {
        match FeatureSize::analytic(&surface) {
            Ok(feature) => Ok(Self { surface, feature }),
            Err(Error::NoAnalyticFeatureSize(_)) => {
                Self::new(surface, LfsMode::Numeric, DEFAULT_CONTACTS, seed)
            }
            Err(e) => Err(e),
        }
    }

    pub fn surface(&self) -> &ImplicitSurface {
        &self.surface
    }

    pub fn feature(&self) -> &FeatureSize {
        &self.feature
    }

    pub fn mode(&self) -> LfsMode {
        if self.feature.is_analytic() {
            LfsMode::Analytic
        } else {
            LfsMode::Numeric
        }
    }

    pub fn lfs(&self, x: &Vec3) -> Result<f64> {
        self.feature.lfs(x)
    }

    /// Slack on angle comparisons: tight for exact feature size, looser for
    /// the sampled medial axis.
    pub fn angle_tol(&self) -> f64 {
        match self.mode() {
            LfsMode::Analytic => 1e-9,
            LfsMode::Numeric => 1e-6,
        }
    }

    /// Normal and feature size at a surface point. In numeric mode the
    /// feature size is additionally capped by the radius of curvature, which
    /// bounds the true value from above.
    pub fn surface_point(&self, p: &Vec3) -> Result<SurfacePoint> {
        let normal = self.surface.inward_normal(p)?;
        let mut lfs = self.lfs(p)?;
        if !self.feature.is_analytic() {
            let k = self.surface.kappa_max(p)?;
            if k > 0.0 {
                lfs = lfs.min(1.0 / k);
            }
        }
        Ok(SurfacePoint {
            position: *p,
            normal,
            lfs,
        })
    }
}
