//! Run configuration: strict JSON, unknown keys rejected.

use std::path::{Path, PathBuf};

use qci_core::asymptotics::{Family, HSweep};
use qci_core::models::{ModelSpec, QciModel};
use qci_core::spectral::{Region, SpectralWindow};
use serde::{Deserialize, Serialize};

use crate::RunError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub experiment: Experiment,
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// A named region or an explicit one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegionRef {
    Named(String),
    Custom(Region),
}

impl RegionRef {
    pub fn resolve(&self) -> Option<Region> {
        match self {
            RegionRef::Named(n) => Region::named(n),
            RegionRef::Custom(r) => Some(r.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LineSpec {
    pub axis: usize,
    pub from: f64,
    pub to: f64,
    pub count: usize,
    /// Value of the other coordinate.
    #[serde(default)]
    pub at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FoldSpec {
    pub axis: usize,
    /// `+1` or `-1`: which side of the caustic to sample.
    pub side: f64,
    pub widths: Vec<f64>,
    /// Defaults to the first caustic on `axis`.
    #[serde(default)]
    pub caustic: Option<f64>,
    /// Value of the other coordinate.
    #[serde(default)]
    pub at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "type",
    rename_all = "camelCase",
    rename_all_fields = "camelCase",
    deny_unknown_fields
)]
pub enum FbiSource {
    /// `e^{imx}/√(2π)` on the circle of length 2π with `h = 1/m`.
    PlaneWave { m_values: Vec<i64> },
    /// Radial factor of the state with `m = E₂/h` and `E₁` nearest 1,
    /// evenly extended to a circle of length 4.
    SorRadial { h_values: Vec<f64>, e2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GridSpec {
    pub n1: usize,
    pub n2: usize,
}

fn default_mu() -> f64 {
    1.0
}
fn default_xi_max() -> f64 {
    2.0
}
fn default_n_x() -> usize {
    64
}
fn default_n_xi() -> usize {
    161
}
fn default_tube() -> f64 {
    3.0
}
fn default_gap() -> f64 {
    0.5
}
fn default_target() -> f64 {
    1.0
}
fn default_oracle_grid() -> GridSpec {
    GridSpec { n1: 128, n2: 128 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    rename_all = "kebab-case",
    rename_all_fields = "camelCase",
    deny_unknown_fields
)]
pub enum Experiment {
    Spectrum {
        h: f64,
        #[serde(default)]
        window: Option<SpectralWindow>,
        /// Angular momenta (surfaces of revolution).
        #[serde(default)]
        m_range: Option<[i64; 2]>,
        /// Separation-constant range (Liouville).
        #[serde(default)]
        lambda_scan: Option<[f64; 2]>,
        #[serde(default)]
        grid_points: Option<usize>,
    },
    SupnormSweep {
        /// Defaults to `1/round(32·2^{k/2})`, `k = 0..=8`.
        #[serde(default)]
        h_values: Option<Vec<f64>>,
        #[serde(default)]
        window: Option<SpectralWindow>,
        regions: Vec<RegionRef>,
        #[serde(default)]
        family: Option<Family>,
        #[serde(default)]
        grid_points: Option<usize>,
    },
    Decay {
        h_values: Vec<f64>,
        #[serde(default)]
        window: Option<SpectralWindow>,
        epsilon: f64,
        region: RegionRef,
        /// Target `E₂`; selects `m = round(E₂/h)` on surfaces of revolution.
        #[serde(default)]
        e2: Option<f64>,
        #[serde(default = "default_target")]
        target_e1: f64,
    },
    Action {
        energy: [f64; 2],
        #[serde(default)]
        points: Vec<[f64; 2]>,
        #[serde(default)]
        line: Option<LineSpec>,
        #[serde(default)]
        fold: Option<FoldSpec>,
    },
    Classify {
        energies: Vec<[f64; 2]>,
    },
    Fbi {
        source: FbiSource,
        #[serde(default = "default_mu")]
        mu: f64,
        #[serde(default = "default_xi_max")]
        xi_max: f64,
        #[serde(default = "default_n_x")]
        n_x: usize,
        #[serde(default = "default_n_xi")]
        n_xi: usize,
        /// Cutoff radius as a fraction of the circumference.
        #[serde(default)]
        cutoff_fraction: Option<f64>,
        /// Tube radius in units of `√h`.
        #[serde(default = "default_tube")]
        tube_radius: f64,
        /// Off-shell region: at least this far from the shell.
        #[serde(default = "default_gap")]
        gap: f64,
    },
    OracleCompare {
        h: f64,
        #[serde(default)]
        window: Option<SpectralWindow>,
        #[serde(default = "default_oracle_grid")]
        grid: GridSpec,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Spectrum { .. } => "spectrum",
            Experiment::SupnormSweep { .. } => "supnorm-sweep",
            Experiment::Decay { .. } => "decay",
            Experiment::Action { .. } => "action",
            Experiment::Classify { .. } => "classify",
            Experiment::Fbi { .. } => "fbi",
            Experiment::OracleCompare { .. } => "oracle-compare",
        }
    }
}

fn config_error(path: &str, message: impl Into<String>) -> RunError {
    RunError::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_error(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(".", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn build_model(&self) -> Result<QciModel, RunError> {
        self.model.build().map_err(|e| config_error("model", e.to_string()))
    }

    /// Canonical JSON (sorted keys), the input to the config hash.
    pub fn canonical_json(&self) -> String {
        let v = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&v).expect("value serializes")
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let model = self.build_model()?;
        let window_ok = |w: &Option<SpectralWindow>| -> Result<(), RunError> {
            if let Some(w) = w {
                SpectralWindow::new(w.center, w.half_width)
                    .map_err(|e| config_error("experiment.window", e.to_string()))?;
            }
            Ok(())
        };
        let positive = |path: &str, h: f64| -> Result<(), RunError> {
            if h > 0.0 && h.is_finite() {
                Ok(())
            } else {
                Err(config_error(path, format!("must be positive, got {h}")))
            }
        };
        match &self.experiment {
            Experiment::Spectrum { h, window, .. } => {
                positive("experiment.h", *h)?;
                window_ok(window)?;
            }
            Experiment::SupnormSweep {
                h_values,
                window,
                regions,
                family,
                ..
            } => {
                window_ok(window)?;
                if let Some(hs) = h_values {
                    HSweep::new(hs.clone(), SpectralWindow::unit())
                        .map_err(|e| config_error("experiment.hValues", e.to_string()))?;
                }
                if regions.is_empty() {
                    return Err(config_error("experiment.regions", "at least one region is required"));
                }
                for (i, r) in regions.iter().enumerate() {
                    if r.resolve().is_none() {
                        return Err(config_error(
                            &format!("experiment.regions[{i}]"),
                            format!("unknown region {r:?}"),
                        ));
                    }
                }
                if family.as_ref().is_some_and(|f| f.m.is_some()) && !matches!(model, QciModel::Revolution(_)) {
                    return Err(config_error(
                        "experiment.family.m",
                        "angular momentum applies to surfaces of revolution",
                    ));
                }
            }
            Experiment::Decay {
                h_values,
                window,
                epsilon,
                region,
                e2,
                ..
            } => {
                window_ok(window)?;
                if h_values.is_empty() {
                    return Err(config_error("experiment.hValues", "at least one h is required"));
                }
                for (i, h) in h_values.iter().enumerate() {
                    positive(&format!("experiment.hValues[{i}]"), *h)?;
                }
                if !(*epsilon > 0.0 && *epsilon < 1.0) {
                    return Err(config_error(
                        "experiment.epsilon",
                        format!("must lie in (0, 1), got {epsilon}"),
                    ));
                }
                if region.resolve().is_none() {
                    return Err(config_error("experiment.region", format!("unknown region {region:?}")));
                }
                if matches!(model, QciModel::Revolution(_) | QciModel::Liouville(_)) && e2.is_none() {
                    return Err(config_error("experiment.e2", "this model needs a target E₂"));
                }
            }
            Experiment::Action { line, fold, .. } => {
                if let Some(l) = line {
                    if l.axis > 1 || l.count < 2 {
                        return Err(config_error(
                            "experiment.line",
                            "axis must be 0 or 1 and count at least 2",
                        ));
                    }
                }
                if let Some(f) = fold {
                    if f.axis > 1 || f.side.abs() != 1.0 || f.widths.is_empty() {
                        return Err(config_error(
                            "experiment.fold",
                            "axis 0 or 1, side ±1 and at least one width",
                        ));
                    }
                }
            }
            Experiment::Classify { energies } => {
                if energies.is_empty() {
                    return Err(config_error(
                        "experiment.energies",
                        "at least one energy pair is required",
                    ));
                }
            }
            Experiment::Fbi {
                source,
                mu,
                xi_max,
                n_x,
                n_xi,
                cutoff_fraction,
                gap,
                ..
            } => {
                positive("experiment.mu", *mu)?;
                positive("experiment.xiMax", *xi_max)?;
                if *n_x < 1 || *n_xi < 2 {
                    return Err(config_error("experiment.nXi", "need nX ≥ 1 and nXi ≥ 2"));
                }
                if let Some(c) = cutoff_fraction {
                    if !(*c > 0.0 && *c < 0.5) {
                        return Err(config_error("experiment.cutoffFraction", "must lie in (0, 0.5)"));
                    }
                }
                if *gap < qci_core::fbi::MIN_OFFSHELL_GAP {
                    return Err(config_error(
                        "experiment.gap",
                        format!("must be at least {}", qci_core::fbi::MIN_OFFSHELL_GAP),
                    ));
                }
                match source {
                    FbiSource::PlaneWave { m_values } => {
                        if m_values.is_empty() || m_values.iter().any(|&m| m < 1) {
                            return Err(config_error("experiment.source.mValues", "need positive frequencies"));
                        }
                    }
                    FbiSource::SorRadial { h_values, .. } => {
                        if !matches!(model, QciModel::Revolution(_)) {
                            return Err(config_error(
                                "experiment.source",
                                "sorRadial needs a surface of revolution",
                            ));
                        }
                        for (i, h) in h_values.iter().enumerate() {
                            positive(&format!("experiment.source.hValues[{i}]"), *h)?;
                        }
                    }
                }
            }
            Experiment::OracleCompare { h, window, grid } => {
                window_ok(window)?;
                if !matches!(model, QciModel::Revolution(_) | QciModel::Liouville(_)) {
                    return Err(config_error("model", "the oracle covers sor and liouville models"));
                }
                if !(*h >= qci_core::spectral::oracle::MIN_H) {
                    return Err(config_error(
                        "experiment.h",
                        format!("the oracle needs h ≥ 1/40, got {h}"),
                    ));
                }
                let cap = qci_core::spectral::oracle::MAX_AXIS_POINTS;
                if grid.n1 > cap || grid.n2 > cap {
                    return Err(config_error(
                        "experiment.grid",
                        format!("at most {cap} points per axis"),
                    ));
                }
            }
        }
        Ok(())
    }
}
