use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use jch_core::dynamics::{run_protocol, PropagatorKind, RunOptions, Schedule, DENSE_MAX_DIM};
use jch_core::experiments::{parse_config, parse_config_str, resolve_graphs, run_experiment, ExperimentConfig};
use jch_core::graphs::{format_graph_file, GraphFile, NAMED_GRAPHS};
use jch_core::{enumerate_connected_graphs, Graph, ModelParams};

#[derive(Parser)]
#[command(
    name = "jch",
    version,
    about = "Quench and ramp dynamics of Jaynes-Cummings-Hubbard arrays"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect named graphs and the connected-graph catalogs.
    Graphs {
        #[command(subcommand)]
        action: GraphsAction,
    },
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Print the resolved config and exit.
        #[arg(long)]
        dry_run: bool,
    },
    /// Order parameter against detuning for both protocols.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Graph sources; defaults to the dimer.
        #[arg(long = "graph")]
        graphs: Vec<String>,
    },
    /// Plateau against mean connectivity over whole catalogs.
    Scale {
        #[command(flatten)]
        common: Common,
        /// Catalog sizes to include.
        #[arg(long = "sites", default_values_t = [4usize, 5])]
        sites: Vec<usize>,
        /// Limit to one protocol (`quench` or `adiabatic`).
        #[arg(long)]
        protocol: Option<String>,
    },
    /// Self-consistent mean-field scan over k, J and detuning.
    MfScan {
        #[command(flatten)]
        common: Common,
        /// Hold the density at one excitation per site by tuning mu.
        #[arg(long)]
        tune_density: bool,
        #[arg(long = "k")]
        k: Vec<f64>,
        #[arg(long = "j-over-g")]
        j_over_g: Vec<f64>,
    },
    /// Compare Krylov and dense propagation on small graphs.
    OracleCheck {
        #[arg(long = "graph", default_values_t = ["dimer".to_string(), "chain3".to_string(), "star4".to_string()])]
        graphs: Vec<String>,
        #[arg(long = "log-delta", default_values_t = [-1.0, 0.0, 1.0])]
        log_deltas: Vec<f64>,
    },
}

#[derive(Subcommand)]
enum GraphsAction {
    /// Named graphs, or the catalog on `--sites` nodes.
    List {
        #[arg(long)]
        sites: Option<usize>,
    },
    /// Print graphs in the graph-file format.
    Show { sources: Vec<String> },
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of grid points in log10(delta/g) over [-1, 1].
    #[arg(long)]
    points: Option<usize>,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Graphs { action } => {
            graphs(action)?;
            Ok(true)
        }
        Command::Run { config, dry_run } => {
            let config = parse_config(&config)?;
            if dry_run {
                print!("{}", config.clone().resolve()?.to_toml());
                return Ok(true);
            }
            execute(&config)
        }
        Command::Sweep { common, graphs } => {
            let mut config = base("dimer_sweep", &common)?;
            config.graphs = graphs;
            execute(&config)
        }
        Command::Scale {
            common,
            sites,
            protocol,
        } => {
            let mut config = base("catalog_scaling", &common)?;
            config.graphs = sites.iter().map(|l| format!("catalog:{l}")).collect();
            config.protocol.kinds = protocol.map(|p| vec![p]);
            execute(&config)
        }
        Command::MfScan {
            common,
            tune_density,
            k,
            j_over_g,
        } => {
            let mut config = base("meanfield_scan", &common)?;
            config.meanfield.tune_density = Some(tune_density);
            config.meanfield.k = (!k.is_empty()).then_some(k);
            config.meanfield.j_over_g = (!j_over_g.is_empty()).then_some(j_over_g);
            execute(&config)
        }
        Command::OracleCheck { graphs, log_deltas } => oracle_check(&graphs, &log_deltas),
    }
}

fn base(kind: &str, common: &Common) -> Result<ExperimentConfig> {
    let mut config = parse_config_str(&format!("experiment = \"{kind}\"\n"))?;
    config.output_dir = common.out.clone();
    config.grid.points = common.points;
    Ok(config)
}

fn execute(config: &ExperimentConfig) -> Result<bool> {
    let result = run_experiment(config)?;
    let m = &result.manifest;
    let dir = m
        .config
        .output_dir
        .as_deref()
        .unwrap_or_else(|| std::path::Path::new("."));
    println!(
        "{}: {} runs in {:.1} s, {} files in {}",
        m.config.experiment.name(),
        m.timing.runs,
        m.timing.wall_seconds,
        m.artifacts.len() + 1,
        dir.display()
    );
    for (key, value) in &m.summary {
        println!("  {key} = {value:.6}");
    }
    for flag in &m.flags {
        println!("  flag: {flag}");
    }
    let g = &m.gates;
    println!(
        "gates: norm {:.1e}, N {:.1e}, Var(N) {:.1e}, energy/|H| {:.1e}: {}",
        g.max_norm_drift,
        g.max_n_drift,
        g.max_var_n,
        g.max_energy_drift_over_norm,
        if g.passed { "pass" } else { "FAIL" }
    );
    Ok(g.passed)
}

fn describe(id: &str, graph: &Graph) -> String {
    let mut k = graph.connectivity();
    k.sort_unstable();
    let k: Vec<String> = k.iter().map(|x| x.to_string()).collect();
    format!(
        "{id}\t{}\t{}\t{}\t{:.4}",
        graph.sites(),
        graph.edge_count(),
        k.join("-"),
        graph.mean_connectivity()
    )
}

fn graphs(action: GraphsAction) -> Result<()> {
    match action {
        GraphsAction::List { sites } => {
            println!("id\tsites\tedges\tdegrees\tmean_k");
            match sites {
                Some(l) => {
                    for entry in enumerate_connected_graphs(l)? {
                        println!("{}", describe(&entry.id, &entry.graph));
                    }
                }
                None => {
                    for name in NAMED_GRAPHS {
                        let resolved = resolve_graphs(&[name.to_string()])?;
                        println!("{}", describe(name, &resolved[0].graph));
                    }
                }
            }
        }
        GraphsAction::Show { sources } => {
            if sources.is_empty() {
                bail!("name at least one graph source");
            }
            for g in resolve_graphs(&sources)? {
                println!("# {}", g.id);
                let file = GraphFile {
                    graph: (*g.graph).clone(),
                    partitions: g.partitions.clone(),
                };
                print!("{}", format_graph_file(&file));
            }
        }
    }
    Ok(())
}

fn oracle_check(sources: &[String], log_deltas: &[f64]) -> Result<bool> {
    let krylov = RunOptions {
        sample_count: 20,
        ..RunOptions::default()
    };
    let dense = RunOptions {
        propagator: PropagatorKind::Dense,
        ..krylov
    };
    let mut ok = true;
    println!("graph\tlog_delta\tprotocol\tdim\t1-overlap");
    for g in resolve_graphs(sources)? {
        for &l in log_deltas {
            let p = ModelParams::sweep_preset();
            let p = p.with_delta(10f64.powf(l) * p.g);
            let t = 1.0 / p.hopping;
            for schedule in [Schedule::quench(p.delta, t), Schedule::adiabatic(p.delta, 20.0 * t, t)] {
                let a = run_protocol(&g.graph, &p, &schedule, &krylov)
                    .with_context(|| format!("krylov run on {}", g.id))?;
                let dim = a.final_state.basis().dim();
                if dim > DENSE_MAX_DIM {
                    println!("{}\t{l}\t{}\t{dim}\tskipped", g.id, schedule.kind);
                    continue;
                }
                let b =
                    run_protocol(&g.graph, &p, &schedule, &dense).with_context(|| format!("dense run on {}", g.id))?;
                let miss = 1.0 - a.final_state.inner(&b.final_state).norm();
                ok &= miss <= 1e-8;
                println!("{}\t{l}\t{}\t{dim}\t{miss:.2e}", g.id, schedule.kind);
            }
        }
    }
    println!("oracle check: {}", if ok { "pass" } else { "FAIL" });
    Ok(ok)
}
