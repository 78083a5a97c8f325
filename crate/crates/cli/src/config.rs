use std::fs;
use std::path::{Path, PathBuf};

use bhflow_core::surface::DEFAULT_RADIUS;
use bhflow_core::{
    AnticanonicalSection, ChartPoint, DelPezzo, IntegratorConfig, KstarMetric, SurfaceKind, SurfaceModel, Tolerances,
    C64,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricChoice {
    #[serde(rename = "fubini-study")]
    FubiniStudy,
    /// The inverse weight, whose curvature is `−F`.
    #[serde(rename = "inverted")]
    Inverted,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub chart: usize,
    pub z: [[f64; 2]; 2],
}

impl PointSpec {
    pub fn to_point(&self) -> ChartPoint {
        ChartPoint::new(
            self.chart,
            C64::new(self.z[0][0], self.z[0][1]),
            C64::new(self.z[1][0], self.z[1][1]),
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveSpec {
    pub seed: PointSpec,
    pub samples: usize,
}

impl Default for CurveSpec {
    fn default() -> Self {
        Self {
            seed: PointSpec {
                chart: 0,
                z: [[-1.0, 0.0], [0.0, 0.0]],
            },
            samples: 20,
        }
    }
}

fn default_metric() -> MetricChoice {
    MetricChoice::FubiniStudy
}
fn default_t() -> Vec<f64> {
    vec![0.05, 0.1]
}
fn default_t_grid() -> Vec<f64> {
    vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5]
}
fn default_t_sequence() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.025]
}
fn default_samples() -> usize {
    100
}
fn default_min_norm() -> f64 {
    0.05
}
fn default_radius() -> f64 {
    DEFAULT_RADIUS
}
fn default_grid() -> usize {
    16
}
fn default_quadrature() -> usize {
    8
}
fn default_point() -> PointSpec {
    PointSpec {
        chart: 0,
        z: [[0.3, 0.1], [-0.2, 0.4]],
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub surface: SurfaceKind,
    /// `[re, im]` per monomial: 10 for CP², 9 for CP¹×CP¹.
    pub coefficients: Vec<[f64; 2]>,
    #[serde(default = "default_metric")]
    pub metric: MetricChoice,
    /// Flow times for `verify`, `export` (first entry) and `curve` (first entry).
    #[serde(default = "default_t")]
    pub t: Vec<f64>,
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default = "default_t_sequence")]
    pub t_sequence: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Sample points with smaller `‖σ‖` are redrawn.
    #[serde(default = "default_min_norm")]
    pub min_section_norm: f64,
    #[serde(default = "default_radius")]
    pub chart_radius: f64,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub chart: usize,
    #[serde(default = "default_point")]
    pub point: PointSpec,
    #[serde(default)]
    pub curve: CurveSpec,
    #[serde(default = "default_quadrature")]
    pub quadrature_n: usize,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let expected = self.surface.section_dimension();
        if self.coefficients.len() != expected {
            return Err(CliError::Usage(format!(
                "field `coefficients` has {} entries, expected {expected} for {}",
                self.coefficients.len(),
                self.surface.name()
            )));
        }
        self.integrator
            .validate()
            .map_err(|e| CliError::Usage(format!("field `integrator`: {e}")))?;
        if !(self.chart_radius > 1.0) {
            return Err(CliError::Usage("field `chart_radius` must exceed 1".into()));
        }
        if self.chart >= self.surface.chart_count() {
            return Err(CliError::Usage(format!("field `chart`: no chart {} on {}", self.chart, self.surface.name())));
        }
        if self.point.chart >= self.surface.chart_count() {
            return Err(CliError::Usage("field `point.chart` out of range".into()));
        }
        let all_t = self.t.iter().chain(&self.t_grid).chain(&self.t_sequence);
        if all_t.clone().any(|t| !t.is_finite()) {
            return Err(CliError::Usage("flow times must be finite".into()));
        }
        Ok(())
    }

    pub fn surface(&self) -> Result<DelPezzo, CliError> {
        let coeffs = self.coefficients.iter().map(|c| C64::new(c[0], c[1])).collect();
        let section = AnticanonicalSection::new(self.surface, coeffs).map_err(|e| CliError::Usage(e.to_string()))?;
        let metric = match self.metric {
            MetricChoice::FubiniStudy => KstarMetric::fubini_study(self.surface),
            MetricChoice::Inverted => KstarMetric::inverted(self.surface),
        };
        let model = SurfaceModel::with_radius(self.surface, self.chart_radius);
        DelPezzo::new(model, section, metric).map_err(|e| CliError::Usage(e.to_string()))
    }
}
