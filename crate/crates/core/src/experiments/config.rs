//! Experiment configuration: strict TOML with per-experiment defaults.
//!
//! Parsing fills every default into the returned value, so serializing it
//! back gives the complete echo written to the manifest, and parsing that echo
//! yields an equal config.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::dynamics::{PropagatorKind, ProtocolKind};
use crate::model::ModelParams;

pub const DEFAULT_PLATEAU: [f64; 2] = [0.75, 0.9];
pub const FIG4_LOG_DELTAS: [f64; 4] = [0.5, 0.7, 0.75, 0.8];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    DimerSweep,
    CatalogScaling,
    NucleationMap,
    IntegrationTime,
    Bipartite,
    MeanfieldScan,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::DimerSweep => "dimer_sweep",
            ExperimentKind::CatalogScaling => "catalog_scaling",
            ExperimentKind::NucleationMap => "nucleation_map",
            ExperimentKind::IntegrationTime => "integration_time",
            ExperimentKind::Bipartite => "bipartite",
            ExperimentKind::MeanfieldScan => "meanfield_scan",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Graph sources: a named graph (`dimer`, `star4`, `table1`, ...),
    /// `catalog:<L>`, or `file:<path>`.
    #[serde(default)]
    pub graphs: Vec<String>,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub meanfield: MeanFieldConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    /// `sweep-params` or `fig4-params`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_over_omega: Option<f64>,
    #[serde(default, rename = "J_over_g", skip_serializing_if = "Option::is_none")]
    pub j_over_g: Option<f64>,
    #[serde(default, rename = "J_over_omega", skip_serializing_if = "Option::is_none")]
    pub j_over_omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    /// Restrict to the unit-filling sector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector: Option<bool>,
}

/// Detuning grid in `log10(Δ/g)`: either an explicit list or a uniform range.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinds: Option<Vec<String>>,
    /// Ramp duration in units of `1/J`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp_time: Option<f64>,
    /// Measurement windows in units of `1/J`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub windows: Option<Vec<f64>>,
    /// Sample intervals per `1/J` of window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propagator: Option<String>,
    /// Largest ramp increment of Δ, in units of `g`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_ramp_increment: Option<f64>,
    /// `log10(Δ/g)` interval averaged for the plateau value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plateau: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanFieldConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<f64>>,
    /// Hopping values to scan; defaults to the model hopping.
    #[serde(default, rename = "J_over_g", skip_serializing_if = "Option::is_none")]
    pub j_over_g: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune_density: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Write one per-site time-series file per run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_series: Option<bool>,
}

fn invalid(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::ConfigInvalid(msg.into())
}

/// Parse, fill defaults, and validate. Relative `file:` graph sources are
/// resolved against the directory of `path`.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let mut config = parse_config_str(&text).map_err(|e| match e {
        ExperimentError::ConfigInvalid(m) => invalid(format!("{}: {m}", path.display())),
        other => other,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    for source in &mut config.graphs {
        if let Some(rel) = source.strip_prefix("file:") {
            let p = Path::new(rel);
            if p.is_relative() {
                let joined = base.join(p);
                let resolved = joined.canonicalize().unwrap_or(joined);
                *source = format!("file:{}", resolved.display());
            }
        }
    }
    Ok(config)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ExperimentError> {
    let raw: ExperimentConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
    raw.resolve()
}

impl ExperimentConfig {
    /// Minimal config for `kind` with every default filled.
    pub fn defaults(kind: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig {
            experiment: kind,
            output_dir: None,
            seed: None,
            graphs: Vec::new(),
            params: ParamsConfig::default(),
            grid: GridConfig::default(),
            protocol: ProtocolConfig::default(),
            meanfield: MeanFieldConfig::default(),
            output: OutputConfig::default(),
        }
        .resolve()
        .expect("defaults are valid")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Fill defaults and validate; idempotent.
    pub fn resolve(mut self) -> Result<ExperimentConfig, ExperimentError> {
        use ExperimentKind::*;
        let kind = self.experiment;
        if self.output_dir.is_none() {
            self.output_dir = Some(PathBuf::from("out").join(kind.name()));
        }
        if self.graphs.is_empty() && kind != MeanfieldScan {
            let defaults: &[&str] = match kind {
                DimerSweep => &["dimer"],
                CatalogScaling => &["catalog:4", "catalog:5"],
                NucleationMap => &["catalog:4"],
                IntegrationTime => &["dimer", "chain3"],
                Bipartite => &["table1"],
                MeanfieldScan => &[],
            };
            self.graphs = defaults.iter().map(|s| s.to_string()).collect();
        }

        let p = &mut self.params;
        let preset = p.preset.get_or_insert_with(|| "sweep-params".into()).clone();
        match preset.as_str() {
            "sweep-params" => {
                p.g_over_omega.get_or_insert(1e-2);
                if p.j_over_omega.is_none() {
                    p.j_over_g.get_or_insert(1e-2);
                }
            }
            "fig4-params" => {
                p.g_over_omega.get_or_insert(1e-2);
                if p.j_over_g.is_none() {
                    p.j_over_omega.get_or_insert(1e-3);
                }
            }
            other => return Err(invalid(format!("unknown params.preset `{other}`"))),
        }
        p.omega.get_or_insert(1.0);
        p.n_max.get_or_insert(5);
        p.sector.get_or_insert(true);
        if p.j_over_g.is_some() && p.j_over_omega.is_some() {
            return Err(invalid("set only one of params.J_over_g and params.J_over_omega"));
        }

        let g = &mut self.grid;
        if g.values.is_some() {
            if g.log_min.is_some() || g.log_max.is_some() || g.points.is_some() {
                return Err(invalid(
                    "grid.values excludes grid.log_min, grid.log_max and grid.points",
                ));
            }
        } else if kind == NucleationMap && g.log_min.is_none() && g.log_max.is_none() && g.points.is_none() {
            g.values = Some(FIG4_LOG_DELTAS.to_vec());
        } else {
            g.log_min.get_or_insert(-1.0);
            g.log_max.get_or_insert(1.0);
            g.points.get_or_insert(25);
        }

        let pr = &mut self.protocol;
        if pr.kinds.is_none() {
            let kinds: &[&str] = match kind {
                DimerSweep | CatalogScaling => &["quench", "adiabatic"],
                _ => &["quench"],
            };
            pr.kinds = Some(kinds.iter().map(|s| s.to_string()).collect());
        }
        pr.ramp_time.get_or_insert(20.0);
        if pr.windows.is_none() {
            pr.windows = Some(if kind == IntegrationTime {
                vec![1.0, 3.0, 4.0]
            } else {
                vec![1.0]
            });
        }
        pr.samples.get_or_insert(200);
        pr.tol.get_or_insert(1e-10);
        pr.propagator.get_or_insert_with(|| "krylov".into());
        pr.max_ramp_increment.get_or_insert(1.0 / 50.0);
        pr.plateau.get_or_insert(DEFAULT_PLATEAU);

        let mf = &mut self.meanfield;
        mf.k.get_or_insert_with(|| vec![1.0, 2.0, 3.0, 4.0]);
        mf.tune_density.get_or_insert(false);
        mf.damping.get_or_insert(0.5);
        mf.psi0.get_or_insert(0.1);
        mf.tol.get_or_insert(1e-8);
        mf.max_iter.get_or_insert(10_000);

        self.output
            .time_series
            .get_or_insert(matches!(kind, DimerSweep | IntegrationTime));

        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        let params = self.model_params();
        params.validate().map_err(|e| invalid(e.to_string()))?;
        if self.n_max() < 1 {
            return Err(invalid("params.n_max must be at least 1"));
        }
        let grid = self.log_deltas();
        if grid.is_empty() {
            return Err(invalid("detuning grid is empty"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("detuning grid must be strictly increasing"));
        }
        if grid.iter().any(|x| !x.is_finite()) {
            return Err(invalid("detuning grid must be finite"));
        }
        if let Some(points) = self.grid.points {
            if points < 2 {
                return Err(invalid("grid.points must be at least 2"));
            }
        }
        self.protocols()?;
        self.propagator()?;
        let pr = &self.protocol;
        if !(pr.ramp_time.unwrap() > 0.0) {
            return Err(invalid("protocol.ramp_time must be positive"));
        }
        let windows = pr.windows.as_ref().unwrap();
        if windows.is_empty() || windows.iter().any(|w| !(*w > 0.0)) {
            return Err(invalid("protocol.windows must be positive"));
        }
        if self.sample_count(windows[0]) < 8 {
            return Err(invalid("protocol.samples gives fewer than 8 samples per window"));
        }
        if !(pr.tol.unwrap() > 0.0) || !(pr.max_ramp_increment.unwrap() > 0.0) {
            return Err(invalid("protocol.tol and protocol.max_ramp_increment must be positive"));
        }
        let [lo, hi] = pr.plateau.unwrap();
        if !(hi >= lo) {
            return Err(invalid("protocol.plateau must be an interval [lo, hi]"));
        }
        let mf = &self.meanfield;
        if mf.k.as_ref().unwrap().iter().any(|k| !(*k >= 0.0)) {
            return Err(invalid("meanfield.k must be non-negative"));
        }
        let d = mf.damping.unwrap();
        if !(d > 0.0 && d <= 1.0) {
            return Err(invalid("meanfield.damping must lie in (0, 1]"));
        }
        if self.experiment != ExperimentKind::MeanfieldScan && self.graphs.is_empty() {
            return Err(invalid("no graphs selected"));
        }
        Ok(())
    }

    pub fn model_params(&self) -> ModelParams {
        let p = &self.params;
        let omega = p.omega.unwrap();
        let g = p.g_over_omega.unwrap() * omega;
        let hopping = match (p.j_over_g, p.j_over_omega) {
            (Some(r), _) => r * g,
            (None, Some(r)) => r * omega,
            (None, None) => unreachable!("resolved config has a hopping"),
        };
        ModelParams::new(omega, 0.0, g, hopping)
    }

    pub fn n_max(&self) -> usize {
        self.params.n_max.unwrap()
    }

    pub fn log_deltas(&self) -> Vec<f64> {
        let g = &self.grid;
        if let Some(v) = &g.values {
            return v.clone();
        }
        let (lo, hi, n) = (g.log_min.unwrap(), g.log_max.unwrap(), g.points.unwrap());
        if n < 2 {
            return vec![lo];
        }
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    pub fn protocols(&self) -> Result<Vec<ProtocolKind>, ExperimentError> {
        let kinds = self.protocol.kinds.as_ref().unwrap();
        if kinds.is_empty() {
            return Err(invalid("protocol.kinds is empty"));
        }
        kinds
            .iter()
            .map(|k| ProtocolKind::from_str(k).map_err(|e| invalid(format!("protocol.kinds: {e}"))))
            .collect()
    }

    pub fn propagator(&self) -> Result<PropagatorKind, ExperimentError> {
        PropagatorKind::from_str(self.protocol.propagator.as_ref().unwrap())
            .map_err(|e| invalid(format!("protocol.propagator: {e}")))
    }

    pub fn windows(&self) -> Vec<f64> {
        self.protocol.windows.clone().unwrap()
    }

    /// Sample intervals for a window of `window` (in `1/J`).
    pub fn sample_count(&self, window: f64) -> usize {
        (self.protocol.samples.unwrap() as f64 * window).round() as usize
    }

    pub fn plateau(&self) -> [f64; 2] {
        self.protocol.plateau.unwrap()
    }

    pub fn output_dir(&self) -> &Path {
        self.output_dir.as_deref().unwrap_or(Path::new("out"))
    }

    pub fn time_series(&self) -> bool {
        self.output.time_series.unwrap_or(false)
    }
}
