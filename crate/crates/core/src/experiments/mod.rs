//! Named, configured experiments: detuning sweeps, connectivity scaling,
//! nucleation maps, integration-time and bipartite studies, and mean-field
//! scans. Each run writes data files plus a `manifest.toml`.

mod config;
pub mod output;

pub use config::{
    parse_config, parse_config_str, ExperimentConfig, ExperimentKind, GridConfig, MeanFieldConfig, OutputConfig,
    ParamsConfig, ProtocolConfig, DEFAULT_PLATEAU, FIG4_LOG_DELTAS,
};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{run_protocol, ProtocolKind, RunOptions, Schedule};
use crate::graphs::{
    enumerate_connected_graphs, named_graph, parse_graph_file, partition_connectivity, table1_array, Graph, GraphError,
    Partition,
};
use crate::meanfield::{solve_selfconsistent, MeanFieldOptions};
use crate::model::ModelParams;
use crate::observables::{
    bipartite_fluctuation, correlation_matrix, order_parameter, pearson, per_site_variances, scaling_fit, spearman,
    CorrelationMatrix, CurvePoint, OrderParameterCurve, ScalingFit,
};
use output::{curve_tsv, delta_tag, num, time_series_tsv, window_tag, write_file};

/// Relative tolerance for treating values as tied in rank statistics.
pub const RANK_TIE_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("run failed for graph {graph} at delta/g = {delta_over_g}: {message}")]
    Run {
        graph: String,
        delta_over_g: f64,
        message: String,
    },
    #[error("mean-field solve failed at k = {k}, delta/g = {delta_over_g}: {message}")]
    MeanField { k: f64, delta_over_g: f64, message: String },
    #[error("analysis: {0}")]
    Analysis(String),
}

/// A simulation graph with its identifier and any named partitions.
#[derive(Debug, Clone)]
pub struct ResolvedGraph {
    pub id: String,
    pub graph: Arc<Graph>,
    pub partitions: Vec<Partition>,
}

/// Expand graph sources into concrete graphs, in source order.
pub fn resolve_graphs(sources: &[String]) -> Result<Vec<ResolvedGraph>, ExperimentError> {
    let mut out: Vec<ResolvedGraph> = Vec::new();
    for source in sources {
        if let Some(l) = source.strip_prefix("catalog:") {
            let sites: usize = l
                .parse()
                .map_err(|_| ExperimentError::ConfigInvalid(format!("bad catalog size in `{source}`")))?;
            for entry in enumerate_connected_graphs(sites)? {
                out.push(ResolvedGraph {
                    id: entry.id,
                    graph: Arc::new(entry.graph),
                    partitions: Vec::new(),
                });
            }
        } else if let Some(path) = source.strip_prefix("file:") {
            let path = Path::new(path);
            let text = std::fs::read_to_string(path).map_err(|e| output::io_error(path, e))?;
            let file = parse_graph_file(&text)?;
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "graph".into());
            out.push(ResolvedGraph {
                id,
                graph: Arc::new(file.graph),
                partitions: file.partitions,
            });
        } else if source == "table1" {
            let file = table1_array();
            out.push(ResolvedGraph {
                id: "table1".into(),
                graph: Arc::new(file.graph),
                partitions: file.partitions,
            });
        } else if let Some(graph) = named_graph(source) {
            out.push(ResolvedGraph {
                id: source.clone(),
                graph: Arc::new(graph),
                partitions: Vec::new(),
            });
        } else {
            return Err(ExperimentError::ConfigInvalid(format!(
                "unknown graph source `{source}`"
            )));
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    for g in &out {
        if !seen.insert(g.id.clone()) {
            return Err(ExperimentError::ConfigInvalid(format!(
                "graph `{}` selected twice",
                g.id
            )));
        }
    }
    Ok(out)
}

/// Derived quantities of one protocol run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub graph: usize,
    pub protocol: ProtocolKind,
    /// Measurement window in units of `1/J`.
    pub window: f64,
    pub log_delta: f64,
    pub order_parameter: f64,
    pub per_site: Vec<f64>,
    pub correlations: CorrelationMatrix,
    pub time_series: Option<String>,
    pub norm_drift: f64,
    pub n_drift: f64,
    pub var_n_max: f64,
    /// Energy drift over `|H|_inf`.
    pub energy_drift: f64,
    pub matvecs: usize,
}

/// Settings shared by every run of a sweep.
#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub params: ModelParams,
    pub run: RunOptions,
    /// Ramp duration in units of `1/J`.
    pub ramp_time: f64,
    /// Sample intervals per `1/J`.
    pub samples: usize,
    pub time_series: bool,
}

impl SweepSettings {
    pub fn from_config(config: &ExperimentConfig) -> Result<Self, ExperimentError> {
        Ok(SweepSettings {
            params: config.model_params(),
            run: RunOptions {
                n_max: config.n_max(),
                sector: config.params.sector.unwrap_or(true),
                sample_count: config.protocol.samples.unwrap_or(200),
                propagator: config.propagator()?,
                tol: config.protocol.tol.unwrap_or(1e-10),
                max_ramp_increment: config.protocol.max_ramp_increment.unwrap_or(1.0 / 50.0),
            },
            ramp_time: config.protocol.ramp_time.unwrap_or(20.0),
            samples: config.protocol.samples.unwrap_or(200),
            time_series: config.time_series(),
        })
    }
}

/// Execute one (graph, protocol, window, Δ) job.
pub fn run_job(
    graph_index: usize,
    graph: &ResolvedGraph,
    protocol: ProtocolKind,
    window: f64,
    log_delta: f64,
    settings: &SweepSettings,
) -> Result<RunRecord, ExperimentError> {
    let params = &settings.params;
    let delta_over_g = 10f64.powf(log_delta);
    let delta = delta_over_g * params.g;
    let unit = 1.0 / params.hopping;
    let schedule = match protocol {
        ProtocolKind::Quench => Schedule::quench(delta, window * unit),
        ProtocolKind::Adiabatic => Schedule::adiabatic(delta, settings.ramp_time * unit, window * unit),
    };
    let opts = RunOptions {
        sample_count: (settings.samples as f64 * window).round() as usize,
        ..settings.run
    };
    let fail = |message: String| ExperimentError::Run {
        graph: graph.id.clone(),
        delta_over_g,
        message,
    };
    let report = run_protocol(&graph.graph, params, &schedule, &opts).map_err(|e| fail(e.to_string()))?;
    let op = order_parameter(&report).map_err(|e| fail(e.to_string()))?;
    let per_site = per_site_variances(&report).map_err(|e| fail(e.to_string()))?;
    let correlations = correlation_matrix(&report).map_err(|e| fail(e.to_string()))?;
    Ok(RunRecord {
        graph: graph_index,
        protocol,
        window,
        log_delta,
        order_parameter: op,
        per_site,
        correlations,
        time_series: settings.time_series.then(|| time_series_tsv(&report.samples)),
        norm_drift: report.norm_drift,
        n_drift: report.n_drift,
        var_n_max: report.var_n_max,
        energy_drift: report.energy_drift / report.h_norm_inf.max(f64::MIN_POSITIVE),
        matvecs: report.krylov.matvecs,
    })
}

/// Run every combination in parallel; records come back in job order
/// (graph, protocol, window, Δ) regardless of scheduling.
pub fn run_sweep(
    graphs: &[ResolvedGraph],
    protocols: &[ProtocolKind],
    windows: &[f64],
    log_deltas: &[f64],
    settings: &SweepSettings,
) -> Result<Vec<RunRecord>, ExperimentError> {
    let mut jobs = Vec::new();
    for g in 0..graphs.len() {
        for &p in protocols {
            for &w in windows {
                for &l in log_deltas {
                    jobs.push((g, p, w, l));
                }
            }
        }
    }
    jobs.par_iter()
        .map(|&(g, p, w, l)| run_job(g, &graphs[g], p, w, l, settings))
        .collect()
}

/// One order-parameter curve with the context needed for scaling fits.
#[derive(Debug, Clone)]
pub struct SweepCurve {
    pub sites: usize,
    pub mean_connectivity: f64,
    pub window: f64,
    pub curve: OrderParameterCurve,
}

/// Group records into curves, one per (graph, protocol, window).
pub fn collect_curves(graphs: &[ResolvedGraph], records: &[RunRecord]) -> Vec<SweepCurve> {
    let mut grouped: BTreeMap<(usize, ProtocolKind, u64), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        grouped
            .entry((r.graph, r.protocol, r.window.to_bits()))
            .or_default()
            .push(r);
    }
    grouped
        .into_iter()
        .map(|((g, protocol, window), mut rs)| {
            rs.sort_by(|a, b| a.log_delta.total_cmp(&b.log_delta));
            let graph = &graphs[g];
            SweepCurve {
                sites: graph.graph.sites(),
                mean_connectivity: graph.graph.mean_connectivity(),
                window: f64::from_bits(window),
                curve: OrderParameterCurve {
                    graph_id: graph.id.clone(),
                    protocol,
                    points: rs
                        .iter()
                        .map(|r| CurvePoint {
                            delta_over_g: 10f64.powf(r.log_delta),
                            order_parameter: r.order_parameter,
                            per_site: r.per_site.clone(),
                        })
                        .collect(),
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPoint {
    pub graph_id: String,
    pub sites: usize,
    pub connectivity: f64,
    pub plateau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub protocol: ProtocolKind,
    pub points: Vec<ScalingPoint>,
    /// Fit over every point.
    pub fit: ScalingFit,
    /// Separate fits per node count with at least three graphs.
    pub per_size: Vec<(usize, ScalingFit)>,
    pub flag: Option<String>,
}

/// Plateau extraction and linear fit of plateau against mean connectivity.
pub fn fit_and_report_scaling(
    curves: &[SweepCurve],
    protocol: ProtocolKind,
    plateau: [f64; 2],
) -> Result<ScalingReport, ExperimentError> {
    let mut points = Vec::new();
    for c in curves.iter().filter(|c| c.curve.protocol == protocol) {
        let value = c.curve.plateau(plateau[0], plateau[1]).ok_or_else(|| {
            ExperimentError::Analysis(format!(
                "curve {} has no grid point in the plateau interval {plateau:?}",
                c.curve.graph_id
            ))
        })?;
        points.push(ScalingPoint {
            graph_id: c.curve.graph_id.clone(),
            sites: c.sites,
            connectivity: c.mean_connectivity,
            plateau: value,
        });
    }
    let xy = |pts: &[&ScalingPoint]| pts.iter().map(|p| (p.connectivity, p.plateau)).collect::<Vec<_>>();
    let all: Vec<&ScalingPoint> = points.iter().collect();
    let fit = scaling_fit(&xy(&all)).map_err(|e| ExperimentError::Analysis(format!("{protocol} scaling fit: {e}")))?;
    let mut sizes: Vec<usize> = points.iter().map(|p| p.sites).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut per_size = Vec::new();
    for l in sizes {
        let sub: Vec<&ScalingPoint> = points.iter().filter(|p| p.sites == l).collect();
        if sub.len() >= 3 {
            if let Ok(f) = scaling_fit(&xy(&sub)) {
                per_size.push((l, f));
            }
        }
    }
    let flag = (protocol == ProtocolKind::Adiabatic && fit.pearson_r < 0.9).then(|| "non-monotone".to_string());
    Ok(ScalingReport {
        protocol,
        points,
        fit,
        per_size,
        flag,
    })
}

pub fn scaling_tsv(report: &ScalingReport) -> String {
    let mut out = format!("# protocol={}\nconnectivity\tplateau\tgraph\n", report.protocol);
    for p in &report.points {
        let _ = writeln!(out, "{}\t{}\t{}", num(p.connectivity), num(p.plateau), p.graph_id);
    }
    let f = &report.fit;
    let _ = writeln!(
        out,
        "# fit all: slope={} intercept={} r={} n={}",
        num(f.slope),
        num(f.intercept),
        num(f.pearson_r),
        report.points.len()
    );
    for (l, f) in &report.per_size {
        let _ = writeln!(
            out,
            "# fit L={l}: slope={} intercept={} r={}",
            num(f.slope),
            num(f.intercept),
            num(f.pearson_r)
        );
    }
    if let Some(flag) = &report.flag {
        let _ = writeln!(out, "# flag: {flag}");
    }
    out
}

/// Time-averaged per-site variance of one graph at one detuning.
#[derive(Debug, Clone, PartialEq)]
pub struct NucleationMap {
    pub graph_id: String,
    pub protocol: ProtocolKind,
    pub log_delta: f64,
    pub connectivity: Vec<usize>,
    pub variances: Vec<f64>,
}

/// Spearman correlation of per-site variance with site connectivity, pooled
/// over the given maps.
pub fn pooled_site_spearman(maps: &[&NucleationMap]) -> Result<f64, ExperimentError> {
    let x: Vec<f64> = maps
        .iter()
        .flat_map(|m| m.connectivity.iter().map(|&k| k as f64))
        .collect();
    let y: Vec<f64> = maps.iter().flat_map(|m| m.variances.iter().copied()).collect();
    spearman(&x, &y, RANK_TIE_TOL).map_err(|e| ExperimentError::Analysis(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSeries {
    pub name: String,
    pub members: Vec<usize>,
    pub connectivity: Ratio<usize>,
    /// Bipartite fluctuation at each grid point.
    pub values: Vec<f64>,
    pub plateau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteStudy {
    pub graph_id: String,
    pub protocol: ProtocolKind,
    pub log_deltas: Vec<f64>,
    pub partitions: Vec<PartitionSeries>,
    /// Rank correlation of plateau fluctuation with partition connectivity.
    pub spearman: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldRow {
    pub k: f64,
    pub delta_over_g: f64,
    pub j_over_g: f64,
    pub psi: Complex64,
    pub energy: f64,
    pub sigma_plus: Complex64,
    pub converged: bool,
    pub mu: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Gates {
    pub max_norm_drift: f64,
    pub max_n_drift: f64,
    pub max_var_n: f64,
    pub max_energy_drift_over_norm: f64,
    pub passed: bool,
}

impl Gates {
    pub const LIMIT: f64 = 1e-8;

    fn from_records(records: &[RunRecord]) -> Gates {
        let max = |f: &dyn Fn(&RunRecord) -> f64| records.iter().map(f).fold(0.0, f64::max);
        let mut g = Gates {
            max_norm_drift: max(&|r| r.norm_drift),
            max_n_drift: max(&|r| r.n_drift),
            max_var_n: max(&|r| r.var_n_max),
            max_energy_drift_over_norm: max(&|r| r.energy_drift),
            passed: false,
        };
        g.passed = [
            g.max_norm_drift,
            g.max_n_drift,
            g.max_var_n,
            g.max_energy_drift_over_norm,
        ]
        .iter()
        .all(|&x| x < Self::LIMIT);
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub jch_core: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub versions: Versions,
    pub timing: Timing,
    pub gates: Gates,
    pub artifacts: Vec<String>,
    pub flags: Vec<String>,
    pub summary: BTreeMap<String, f64>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Manifest, ExperimentError> {
        let m: Manifest = toml::from_str(text).map_err(|e| ExperimentError::ConfigInvalid(e.to_string()))?;
        Ok(m)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub manifest: Manifest,
    pub artifacts: Vec<PathBuf>,
    pub curves: Vec<SweepCurve>,
    pub scaling: Vec<ScalingReport>,
    pub nucleation: Vec<NucleationMap>,
    pub bipartite: Vec<BipartiteStudy>,
    pub meanfield: Vec<MeanFieldRow>,
    pub records: Vec<RunRecord>,
}

struct Writer {
    dir: PathBuf,
    artifacts: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self, ExperimentError> {
        std::fs::create_dir_all(dir).map_err(|e| output::io_error(dir, e))?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), ExperimentError> {
        let path = self.dir.join(name);
        write_file(&path, contents)?;
        self.artifacts.push(path);
        Ok(())
    }
}

fn curve_name(c: &SweepCurve, multi_window: bool) -> String {
    if multi_window {
        format!(
            "{}_{}_{}_curve.tsv",
            c.curve.graph_id,
            c.curve.protocol,
            window_tag(c.window)
        )
    } else {
        format!("{}_{}_curve.tsv", c.curve.graph_id, c.curve.protocol)
    }
}

/// Execute the configured experiment and write its outputs to
/// `config.output_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    let config = config.clone().resolve()?;
    let started = Instant::now();
    let mut writer = Writer::new(config.output_dir())?;
    let mut result = ExperimentResult {
        manifest: Manifest {
            versions: Versions {
                jch_core: env!("CARGO_PKG_VERSION").to_string(),
            },
            timing: Timing {
                wall_seconds: 0.0,
                runs: 0,
            },
            gates: Gates {
                passed: true,
                ..Gates::default()
            },
            artifacts: Vec::new(),
            flags: Vec::new(),
            summary: BTreeMap::new(),
            config: config.clone(),
        },
        artifacts: Vec::new(),
        curves: Vec::new(),
        scaling: Vec::new(),
        nucleation: Vec::new(),
        bipartite: Vec::new(),
        meanfield: Vec::new(),
        records: Vec::new(),
    };

    if config.experiment == ExperimentKind::MeanfieldScan {
        run_meanfield_scan(&config, &mut writer, &mut result)?;
    } else {
        run_dynamics(&config, &mut writer, &mut result)?;
    }

    let manifest = &mut result.manifest;
    manifest.timing.wall_seconds = started.elapsed().as_secs_f64();
    manifest.timing.runs = result.records.len();
    manifest.artifacts = writer
        .artifacts
        .iter()
        .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .collect();
    let manifest_path = writer.dir.join("manifest.toml");
    let text = toml::to_string(&*manifest).map_err(|e| ExperimentError::Analysis(e.to_string()))?;
    write_file(&manifest_path, &text)?;
    result.artifacts = writer.artifacts;
    Ok(result)
}

fn run_dynamics(
    config: &ExperimentConfig,
    writer: &mut Writer,
    result: &mut ExperimentResult,
) -> Result<(), ExperimentError> {
    let graphs = resolve_graphs(&config.graphs)?;
    let protocols = config.protocols()?;
    let windows = config.windows();
    let log_deltas = config.log_deltas();
    let settings = SweepSettings::from_config(config)?;
    let records = run_sweep(&graphs, &protocols, &windows, &log_deltas, &settings)?;
    result.manifest.gates = Gates::from_records(&records);
    let multi_window = windows.len() > 1;

    if settings.time_series {
        for r in &records {
            let g = &graphs[r.graph];
            let mut name = format!("{}_{}_{}", g.id, r.protocol, delta_tag(r.log_delta));
            if multi_window {
                name.push('_');
                name.push_str(&window_tag(r.window));
            }
            name.push_str(".tsv");
            writer.write(&name, r.time_series.as_deref().unwrap_or_default())?;
        }
    }

    let curves = collect_curves(&graphs, &records);
    for c in &curves {
        writer.write(&curve_name(c, multi_window), &curve_tsv(&c.curve))?;
        let key = format!(
            "plateau.{}.{}.{}",
            c.curve.graph_id,
            c.curve.protocol,
            window_tag(c.window)
        );
        if let Some(p) = c.curve.plateau(config.plateau()[0], config.plateau()[1]) {
            result.manifest.summary.insert(key, p);
        }
    }
    let summary = &mut result.manifest.summary;

    match config.experiment {
        ExperimentKind::CatalogScaling => {
            for &p in &protocols {
                let report = fit_and_report_scaling(&curves, p, config.plateau())?;
                writer.write(&format!("scaling_{p}.tsv"), &scaling_tsv(&report))?;
                summary.insert(format!("scaling.{p}.slope"), report.fit.slope);
                summary.insert(format!("scaling.{p}.intercept"), report.fit.intercept);
                summary.insert(format!("scaling.{p}.r"), report.fit.pearson_r);
                for (l, f) in &report.per_size {
                    summary.insert(format!("scaling.{p}.L{l}.slope"), f.slope);
                    summary.insert(format!("scaling.{p}.L{l}.r"), f.pearson_r);
                }
                if let Some(flag) = &report.flag {
                    result.manifest.flags.push(format!("scaling.{p}: {flag}"));
                }
                result.scaling.push(report);
            }
        }
        ExperimentKind::NucleationMap => {
            for r in &records {
                let g = &graphs[r.graph];
                let map = NucleationMap {
                    graph_id: g.id.clone(),
                    protocol: r.protocol,
                    log_delta: r.log_delta,
                    connectivity: g.graph.connectivity(),
                    variances: r.per_site.clone(),
                };
                let mut text = format!(
                    "# graph={} protocol={} log_delta_over_g={}\nsite\tconnectivity\tvariance\n",
                    map.graph_id,
                    map.protocol,
                    num(map.log_delta)
                );
                for (i, (k, v)) in map.connectivity.iter().zip(&map.variances).enumerate() {
                    let _ = writeln!(text, "{i}\t{k}\t{}", num(*v));
                }
                writer.write(
                    &format!("{}_{}_{}_map.tsv", g.id, r.protocol, delta_tag(r.log_delta)),
                    &text,
                )?;
                result.nucleation.push(map);
            }
            for &p in &protocols {
                for &l in &log_deltas {
                    let maps: Vec<&NucleationMap> = result
                        .nucleation
                        .iter()
                        .filter(|m| m.protocol == p && m.log_delta == l)
                        .collect();
                    if let Ok(rho) = pooled_site_spearman(&maps) {
                        summary.insert(format!("spearman.{p}.{}", delta_tag(l)), rho);
                    }
                }
                let maps: Vec<&NucleationMap> = result.nucleation.iter().filter(|m| m.protocol == p).collect();
                if let Ok(rho) = pooled_site_spearman(&maps) {
                    summary.insert(format!("spearman.{p}.all"), rho);
                }
            }
        }
        ExperimentKind::IntegrationTime => {
            for g in &graphs {
                for &p in &protocols {
                    let set: Vec<&SweepCurve> = curves
                        .iter()
                        .filter(|c| c.curve.graph_id == g.id && c.curve.protocol == p)
                        .collect();
                    for a in 0..set.len() {
                        for b in a + 1..set.len() {
                            let r = pearson(&set[a].curve.values(), &set[b].curve.values())
                                .map_err(|e| ExperimentError::Analysis(e.to_string()))?;
                            summary.insert(
                                format!(
                                    "pearson.{}.{p}.{}_{}",
                                    g.id,
                                    window_tag(set[a].window),
                                    window_tag(set[b].window)
                                ),
                                r,
                            );
                        }
                    }
                }
            }
        }
        ExperimentKind::Bipartite => {
            for (gi, g) in graphs.iter().enumerate() {
                if g.partitions.is_empty() {
                    continue;
                }
                for &p in &protocols {
                    let study = bipartite_study(gi, g, p, &windows[0], &records, config.plateau())?;
                    let mut text = format!("# graph={} protocol={}\ndelta_over_g", g.id, p);
                    for s in &study.partitions {
                        let _ = write!(text, "\t{}", s.name);
                    }
                    text.push('\n');
                    for (k, l) in study.log_deltas.iter().enumerate() {
                        text.push_str(&num(10f64.powf(*l)));
                        for s in &study.partitions {
                            text.push('\t');
                            text.push_str(&num(s.values[k]));
                        }
                        text.push('\n');
                    }
                    writer.write(&format!("{}_{}_bipartite.tsv", g.id, p), &text)?;
                    let mut table = String::from("partition\tmembers\tconnectivity\tplateau\n");
                    for s in &study.partitions {
                        let members: Vec<String> = s.members.iter().map(|m| m.to_string()).collect();
                        let _ = writeln!(
                            table,
                            "{}\t{}\t{}\t{}",
                            s.name,
                            members.join(","),
                            s.connectivity,
                            num(s.plateau)
                        );
                    }
                    let _ = writeln!(table, "# spearman={}", num(study.spearman));
                    writer.write(&format!("{}_{}_partitions.tsv", g.id, p), &table)?;
                    summary.insert(format!("bipartite.{}.{p}.spearman", g.id), study.spearman);
                    result.bipartite.push(study);
                }
            }
        }
        ExperimentKind::DimerSweep => {
            for c in &curves {
                let id = format!("{}.{}", c.curve.graph_id, c.curve.protocol);
                summary.insert(format!("max_slope.{id}"), c.curve.max_abs_slope());
                summary.insert(format!("max_drop.{id}"), c.curve.max_drop());
            }
        }
        ExperimentKind::MeanfieldScan => unreachable!(),
    }

    result.curves = curves;
    result.records = records;
    Ok(())
}

fn bipartite_study(
    graph_index: usize,
    graph: &ResolvedGraph,
    protocol: ProtocolKind,
    window: &f64,
    records: &[RunRecord],
    plateau: [f64; 2],
) -> Result<BipartiteStudy, ExperimentError> {
    let mut rs: Vec<&RunRecord> = records
        .iter()
        .filter(|r| r.graph == graph_index && r.protocol == protocol && r.window == *window)
        .collect();
    rs.sort_by(|a, b| a.log_delta.total_cmp(&b.log_delta));
    let log_deltas: Vec<f64> = rs.iter().map(|r| r.log_delta).collect();
    let mut partitions = Vec::new();
    for p in &graph.partitions {
        let values = rs
            .iter()
            .map(|r| bipartite_fluctuation(&r.correlations, p))
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| ExperimentError::Analysis(e.to_string()))?;
        let inside: Vec<f64> = log_deltas
            .iter()
            .zip(&values)
            .filter(|(l, _)| **l >= plateau[0] - 1e-9 && **l <= plateau[1] + 1e-9)
            .map(|(_, v)| *v)
            .collect();
        if inside.is_empty() {
            return Err(ExperimentError::Analysis(
                "no grid point in the plateau interval".into(),
            ));
        }
        partitions.push(PartitionSeries {
            name: p.name.clone(),
            members: p.members().to_vec(),
            connectivity: partition_connectivity(&graph.graph, p)?,
            values,
            plateau: inside.iter().sum::<f64>() / inside.len() as f64,
        });
    }
    let x: Vec<f64> = partitions
        .iter()
        .map(|s| *s.connectivity.numer() as f64 / *s.connectivity.denom() as f64)
        .collect();
    let y: Vec<f64> = partitions.iter().map(|s| s.plateau).collect();
    let rho = spearman(&x, &y, RANK_TIE_TOL).map_err(|e| ExperimentError::Analysis(e.to_string()))?;
    Ok(BipartiteStudy {
        graph_id: graph.id.clone(),
        protocol,
        log_deltas,
        partitions,
        spearman: rho,
    })
}

/// Options for the mean-field solver taken from a resolved config.
pub fn meanfield_options(config: &ExperimentConfig) -> MeanFieldOptions {
    let mf = &config.meanfield;
    MeanFieldOptions {
        n_max: config.n_max(),
        tol: mf.tol.unwrap_or(1e-8),
        max_iter: mf.max_iter.unwrap_or(10_000),
        damping: mf.damping.unwrap_or(0.5),
        psi0: Complex64::new(mf.psi0.unwrap_or(0.1), 0.0),
        mu: 0.0,
        target_density: mf.tune_density.unwrap_or(false).then_some(1.0),
    }
}

/// Solve on the (J, k, Δ) grid; rows come back in that nesting order.
pub fn meanfield_scan(config: &ExperimentConfig) -> Result<Vec<MeanFieldRow>, ExperimentError> {
    let base = config.model_params();
    let opts = meanfield_options(config);
    let js = config
        .meanfield
        .j_over_g
        .clone()
        .unwrap_or_else(|| vec![base.hopping / base.g]);
    let ks = config.meanfield.k.clone().unwrap_or_default();
    let mut jobs = Vec::new();
    for &j in &js {
        for &k in &ks {
            for &l in &config.log_deltas() {
                jobs.push((j, k, 10f64.powf(l)));
            }
        }
    }
    jobs.par_iter()
        .map(|&(j, k, d)| {
            let params = ModelParams::new(base.omega, d * base.g, base.g, j * base.g);
            let sol = solve_selfconsistent(k, &params, &opts).map_err(|e| ExperimentError::MeanField {
                k,
                delta_over_g: d,
                message: e.to_string(),
            })?;
            Ok(MeanFieldRow {
                k,
                delta_over_g: d,
                j_over_g: j,
                psi: sol.psi,
                energy: sol.energy,
                sigma_plus: sol.sigma_plus,
                converged: sol.converged,
                mu: sol.mu,
            })
        })
        .collect()
}

fn run_meanfield_scan(
    config: &ExperimentConfig,
    writer: &mut Writer,
    result: &mut ExperimentResult,
) -> Result<(), ExperimentError> {
    let rows = meanfield_scan(config)?;
    let mut text = String::from("k\tdelta_over_g\tJ_over_g\tabs_psi\tenergy\tabs_sigma_plus\tconverged\n");
    for r in &rows {
        let _ = writeln!(
            text,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            num(r.k),
            num(r.delta_over_g),
            num(r.j_over_g),
            num(r.psi.norm()),
            num(r.energy),
            num(r.sigma_plus.norm()),
            r.converged as u8
        );
    }
    writer.write("meanfield_scan.tsv", &text)?;
    let summary = &mut result.manifest.summary;
    summary.insert("meanfield.points".into(), rows.len() as f64);
    summary.insert(
        "meanfield.superfluid_points".into(),
        rows.iter().filter(|r| r.psi.norm() > 0.0).count() as f64,
    );
    summary.insert(
        "meanfield.unconverged_points".into(),
        rows.iter().filter(|r| !r.converged).count() as f64,
    );
    if rows.iter().any(|r| !r.converged) {
        result
            .manifest
            .flags
            .push("meanfield: some points did not converge".into());
    }
    result.meanfield = rows;
    Ok(())
}
