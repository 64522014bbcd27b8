//! Sudden-quench and linear-ramp protocols starting from the Mott state.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::{expm_apply, DenseEvolver, DynamicsError, KrylovOptions, KrylovStats};
use crate::graphs::Graph;
use crate::hilbert::{enumerate_basis, StateVector};
use crate::model::{assemble_jch, prepare_mott_state, ModelParams, SparseHamiltonian};
use crate::observables::{order_parameter, MomentTable, Sample};

/// Hard limit on norm and excitation-number drift.
pub const DRIFT_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProtocolKind {
    Quench,
    Adiabatic,
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtocolKind::Quench => "quench",
            ProtocolKind::Adiabatic => "adiabatic",
        })
    }
}

impl FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quench" => Ok(ProtocolKind::Quench),
            "adiabatic" => Ok(ProtocolKind::Adiabatic),
            other => Err(format!("unknown protocol `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub kind: ProtocolKind,
    pub delta_target: f64,
    /// Ramp duration; ignored for quenches.
    pub ramp_time: f64,
    /// Length `T` of the averaging window.
    pub measure_time: f64,
}

impl Schedule {
    pub fn quench(delta_target: f64, measure_time: f64) -> Self {
        Schedule {
            kind: ProtocolKind::Quench,
            delta_target,
            ramp_time: 0.0,
            measure_time,
        }
    }

    pub fn adiabatic(delta_target: f64, ramp_time: f64, measure_time: f64) -> Self {
        Schedule {
            kind: ProtocolKind::Adiabatic,
            delta_target,
            ramp_time,
            measure_time,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.measure_time > 0.0) || !self.measure_time.is_finite() {
            return Err(DynamicsError::InvalidSchedule("measure_time must be positive".into()));
        }
        if self.kind == ProtocolKind::Adiabatic && !(self.ramp_time > 0.0) {
            return Err(DynamicsError::InvalidSchedule("ramp_time must be positive".into()));
        }
        if !self.delta_target.is_finite() {
            return Err(DynamicsError::InvalidSchedule("delta_target must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagatorKind {
    Krylov,
    Dense,
}

impl FromStr for PropagatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "krylov" => Ok(PropagatorKind::Krylov),
            "dense" => Ok(PropagatorKind::Dense),
            other => Err(format!("unknown propagator `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub n_max: usize,
    /// Restrict to the `N = L` sector.
    pub sector: bool,
    /// Number of intervals in the window; `sample_count + 1` samples.
    pub sample_count: usize,
    pub propagator: PropagatorKind,
    /// Krylov 2-norm tolerance per propagation call.
    pub tol: f64,
    /// Largest detuning increment per ramp step, in units of `g`.
    pub max_ramp_increment: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            n_max: 5,
            sector: true,
            sample_count: 200,
            propagator: PropagatorKind::Krylov,
            tol: 1e-10,
            max_ramp_increment: 1.0 / 50.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PropagationReport {
    pub schedule: Schedule,
    pub final_state: StateVector,
    /// Samples over the window, times measured from the window start.
    pub samples: Vec<Sample>,
    pub window: f64,
    pub norm_drift: f64,
    pub n_drift: f64,
    /// Largest `Var(N)` seen.
    pub var_n_max: f64,
    /// Largest `|<H>(t) - <H>(0)|` inside the window.
    pub energy_drift: f64,
    pub h_norm_inf: f64,
    pub ramp_steps: usize,
    pub krylov: KrylovStats,
}

struct Tracker {
    n0: f64,
    norm_drift: f64,
    n_drift: f64,
    var_n_max: f64,
}

impl Tracker {
    fn observe(&mut self, s: &Sample) {
        self.norm_drift = self.norm_drift.max((1.0 - s.norm).abs());
        self.n_drift = self.n_drift.max((s.total_mean() - self.n0).abs());
        self.var_n_max = self.var_n_max.max(s.total_variance().abs());
    }
}

fn build(
    graph: &Arc<Graph>,
    params: &ModelParams,
    opts: &RunOptions,
) -> Result<(SparseHamiltonian, StateVector), DynamicsError> {
    let sites = graph.sites();
    let basis = Arc::new(enumerate_basis(sites, opts.n_max, opts.sector.then_some(sites))?);
    let h = assemble_jch(graph, &params.with_delta(0.0), &basis)?;
    let psi = prepare_mott_state(&basis)?;
    Ok((h, psi))
}

fn krylov_opts(opts: &RunOptions) -> KrylovOptions {
    KrylovOptions {
        tol: opts.tol,
        ..KrylovOptions::default()
    }
}

fn add_stats(acc: &mut KrylovStats, s: KrylovStats) {
    acc.steps += s.steps;
    acc.matvecs += s.matvecs;
    acc.error_estimate += s.error_estimate;
}

/// Evolve under fixed `h` over the window, sampling uniformly.
fn sample_window(
    h: &SparseHamiltonian,
    mut psi: StateVector,
    window: f64,
    opts: &RunOptions,
    table: &MomentTable,
    tracker: &mut Tracker,
    stats: &mut KrylovStats,
) -> Result<(StateVector, Vec<Sample>, f64), DynamicsError> {
    let count = opts.sample_count.max(1);
    let dt = window / count as f64;
    let mut samples = Vec::with_capacity(count + 1);
    let mut measure = |k: usize, psi: &StateVector, samples: &mut Vec<Sample>| {
        let s = table.measure(k as f64 * dt, psi.amplitudes(), h.energy(psi));
        tracker.observe(&s);
        samples.push(s);
    };
    match opts.propagator {
        PropagatorKind::Krylov => {
            let kopts = krylov_opts(opts);
            measure(0, &psi, &mut samples);
            for k in 1..=count {
                let (next, st) = expm_apply(h.matrix(), psi.amplitudes(), dt, &kopts)?;
                add_stats(stats, st);
                psi = StateVector::new(psi.basis().clone(), next)?;
                measure(k, &psi, &mut samples);
            }
        }
        PropagatorKind::Dense => {
            let dense = DenseEvolver::new(h)?;
            let coords = dense.project(psi.amplitudes());
            for k in 0..=count {
                let amps = dense.reconstruct(&coords, k as f64 * dt);
                psi = StateVector::new(psi.basis().clone(), amps)?;
                measure(k, &psi, &mut samples);
            }
        }
    }
    let e0 = samples[0].energy;
    let energy_drift = samples.iter().map(|s| (s.energy - e0).abs()).fold(0.0, f64::max);
    Ok((psi, samples, energy_drift))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    schedule: &Schedule,
    h: &SparseHamiltonian,
    psi: StateVector,
    opts: &RunOptions,
    table: &MomentTable,
    mut tracker: Tracker,
    ramp_steps: usize,
    mut stats: KrylovStats,
) -> Result<PropagationReport, DynamicsError> {
    let (final_state, samples, energy_drift) =
        sample_window(h, psi, schedule.measure_time, opts, table, &mut tracker, &mut stats)?;
    for (quantity, value) in [("norm", tracker.norm_drift), ("excitation number", tracker.n_drift)] {
        if value >= DRIFT_LIMIT {
            return Err(DynamicsError::InvariantViolated {
                quantity,
                value,
                limit: DRIFT_LIMIT,
            });
        }
    }
    Ok(PropagationReport {
        schedule: *schedule,
        final_state,
        samples,
        window: schedule.measure_time,
        norm_drift: tracker.norm_drift,
        n_drift: tracker.n_drift,
        var_n_max: tracker.var_n_max,
        energy_drift,
        h_norm_inf: h.norm_inf(),
        ramp_steps,
        krylov: stats,
    })
}

fn new_tracker(table: &MomentTable, psi: &StateVector) -> Tracker {
    let s0 = table.measure(0.0, psi.amplitudes(), 0.0);
    let mut t = Tracker {
        n0: s0.total_mean(),
        norm_drift: 0.0,
        n_drift: 0.0,
        var_n_max: 0.0,
    };
    t.observe(&s0);
    t
}

/// Prepare the Mott state at zero detuning, switch the detuning to
/// `schedule.delta_target` instantly, and sample over the window.
pub fn run_quench(
    graph: &Arc<Graph>,
    params: &ModelParams,
    schedule: &Schedule,
    opts: &RunOptions,
) -> Result<PropagationReport, DynamicsError> {
    schedule.validate()?;
    if schedule.kind != ProtocolKind::Quench {
        return Err(DynamicsError::InvalidSchedule(
            "run_quench needs a quench schedule".into(),
        ));
    }
    let (h0, psi) = build(graph, params, opts)?;
    let table = MomentTable::new(h0.basis());
    let tracker = new_tracker(&table, &psi);
    let h = h0.with_detuning(schedule.delta_target);
    finish(schedule, &h, psi, opts, &table, tracker, 0, KrylovStats::default())
}

/// Number of piecewise-constant ramp steps; zero for a zero target.
pub fn ramp_steps(delta_target: f64, g: f64, max_increment: f64) -> usize {
    (delta_target.abs() / (g * max_increment) - 1e-9).ceil().max(0.0) as usize
}

/// Prepare the Mott state at zero detuning, ramp the detuning linearly to
/// the target in piecewise-constant steps (each step uses the detuning at its
/// midpoint), then sample over the window at the target detuning.
pub fn run_adiabatic(
    graph: &Arc<Graph>,
    params: &ModelParams,
    schedule: &Schedule,
    opts: &RunOptions,
) -> Result<PropagationReport, DynamicsError> {
    schedule.validate()?;
    if schedule.kind != ProtocolKind::Adiabatic {
        return Err(DynamicsError::InvalidSchedule(
            "run_adiabatic needs an adiabatic schedule".into(),
        ));
    }
    let (h0, mut psi) = build(graph, params, opts)?;
    let table = MomentTable::new(h0.basis());
    let mut tracker = new_tracker(&table, &psi);
    let steps = ramp_steps(schedule.delta_target, params.g, opts.max_ramp_increment);
    let mut stats = KrylovStats::default();
    if steps > 0 {
        let dt = schedule.ramp_time / steps as f64;
        let kopts = krylov_opts(opts);
        for k in 0..steps {
            let delta = schedule.delta_target * (k as f64 + 0.5) / steps as f64;
            let hk = h0.with_detuning(delta);
            psi = match opts.propagator {
                PropagatorKind::Krylov => {
                    let (next, st) = expm_apply(hk.matrix(), psi.amplitudes(), dt, &kopts)?;
                    add_stats(&mut stats, st);
                    StateVector::new(psi.basis().clone(), next)?
                }
                PropagatorKind::Dense => DenseEvolver::new(&hk)?.evolve(&psi, dt),
            };
            tracker.observe(&table.measure(0.0, psi.amplitudes(), 0.0));
        }
    }
    let h = h0.with_detuning(schedule.delta_target);
    finish(schedule, &h, psi, opts, &table, tracker, steps, stats)
}

pub fn run_protocol(
    graph: &Arc<Graph>,
    params: &ModelParams,
    schedule: &Schedule,
    opts: &RunOptions,
) -> Result<PropagationReport, DynamicsError> {
    match schedule.kind {
        ProtocolKind::Quench => run_quench(graph, params, schedule, opts),
        ProtocolKind::Adiabatic => run_adiabatic(graph, params, schedule, opts),
    }
}

/// Order parameter at the given ramp time and at twice it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticityAudit {
    pub order_parameter: f64,
    pub doubled_ramp_order_parameter: f64,
    pub relative_change: f64,
    /// Set when doubling the ramp moves the order parameter by more than 1%.
    pub warning: bool,
}

pub fn adiabaticity_audit(
    graph: &Arc<Graph>,
    params: &ModelParams,
    schedule: &Schedule,
    opts: &RunOptions,
) -> Result<AdiabaticityAudit, DynamicsError> {
    let op = |s: &Schedule| -> Result<f64, DynamicsError> {
        let report = run_adiabatic(graph, params, s, opts)?;
        order_parameter(&report).map_err(|e| DynamicsError::InvalidSchedule(e.to_string()))
    };
    let base = op(schedule)?;
    let doubled = op(&Schedule {
        ramp_time: 2.0 * schedule.ramp_time,
        ..*schedule
    })?;
    let relative_change = (doubled - base).abs() / base.abs().max(f64::MIN_POSITIVE);
    Ok(AdiabaticityAudit {
        order_parameter: base,
        doubled_ramp_order_parameter: doubled,
        relative_change,
        warning: relative_change > 0.01,
    })
}

/// Trapezoidal estimate of `(1/T) * integral_0^T value dt` from uniformly
/// spaced samples covering `[0, window]`.
pub fn time_average(samples: &[(f64, f64)], window: f64) -> Result<f64, DynamicsError> {
    if samples.len() < 8 {
        return Err(DynamicsError::InsufficientSamples(samples.len()));
    }
    let n = samples.len() - 1;
    let dt = window / n as f64;
    for (k, &(t, _)) in samples.iter().enumerate() {
        if (t - k as f64 * dt).abs() > 1e-9 * window {
            return Err(DynamicsError::NonUniformSamples(format!(
                "sample {k} at t = {t}, expected {}",
                k as f64 * dt
            )));
        }
    }
    let interior: f64 = samples[1..n].iter().map(|s| s.1).sum();
    let integral = dt * (0.5 * (samples[0].1 + samples[n].1) + interior);
    Ok(integral / window)
}
