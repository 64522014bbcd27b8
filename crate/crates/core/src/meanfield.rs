//! Single-site mean-field theory with a connectivity-weighted hopping field.
//!
//! Decoupling `a†_i a_j ≈ ψ* a_j + a†_i ψ - |ψ|²` turns the lattice into
//! independent sites with
//! `H_MF = H_JC - μ n - J k (ψ a† + ψ* a)` and energy
//! `E(ψ) = e_0(H_MF(ψ)) + J k |ψ|²`, whose stationary points satisfy
//! `ψ = <a>`. The chemical potential defaults to zero; optionally it is tuned
//! so the ground state holds one excitation on average.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

use crate::model::ModelParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeanFieldError {
    #[error("self-consistency not reached after {iterations} iterations (last update {last_update:e})")]
    NotConverged { iterations: usize, last_update: f64 },
    #[error("order parameter vanishes; the atomic relation is undefined")]
    ZeroPsi,
    #[error("invalid mean-field options: {0}")]
    InvalidOptions(String),
    #[error("could not bracket a chemical potential giving density {0}")]
    DensityBracket(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldOptions {
    pub n_max: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Mixing weight of the new iterate.
    pub damping: f64,
    pub psi0: Complex64,
    /// Fixed chemical potential, used when `target_density` is `None`.
    pub mu: f64,
    /// Tune μ by bisection so that `<n> = target_density`.
    pub target_density: Option<f64>,
}

impl Default for MeanFieldOptions {
    fn default() -> Self {
        MeanFieldOptions {
            n_max: 5,
            tol: 1e-8,
            max_iter: 10_000,
            damping: 0.5,
            psi0: Complex64::new(0.1, 0.0),
            mu: 0.0,
            target_density: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldSolution {
    pub k: f64,
    pub params: ModelParams,
    pub mu: f64,
    pub psi: Complex64,
    /// `E(ψ)` of the reported phase.
    pub energy: f64,
    /// `E(0)`, the Mott branch.
    pub trivial_energy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub sigma_plus: Complex64,
    pub density: f64,
}

impl MeanFieldSolution {
    pub fn is_superfluid(&self) -> bool {
        self.psi != Complex64::new(0.0, 0.0)
    }

    pub fn require_converged(&self) -> Result<&Self, MeanFieldError> {
        if self.converged {
            Ok(self)
        } else {
            Err(MeanFieldError::NotConverged {
                iterations: self.iterations,
                last_update: f64::NAN,
            })
        }
    }
}

/// Local index of `|p, tls>`, matching the many-body basis order.
fn local_index(photons: usize, up: bool) -> usize {
    2 * photons + up as usize
}

/// Single-site mean-field Hamiltonian on the full `2(n_max + 1)` local space,
/// without the `J k |ψ|²` constant and with `μ = 0`.
pub fn mf_hamiltonian(psi: Complex64, k: f64, params: &ModelParams, n_max: usize) -> DMatrix<Complex64> {
    mf_hamiltonian_mu(psi, k, params, n_max, 0.0)
}

fn mf_hamiltonian_mu(psi: Complex64, k: f64, params: &ModelParams, n_max: usize, mu: f64) -> DMatrix<Complex64> {
    let dim = 2 * (n_max + 1);
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    let field = psi * (params.hopping * k);
    for p in 0..=n_max {
        for up in [false, true] {
            let i = local_index(p, up);
            let exc = p as f64 + up as u8 as f64;
            let e = params.omega * p as f64 + if up { params.omega + params.delta } else { 0.0 } - mu * exc;
            h[(i, i)] = Complex64::new(e, 0.0);
            if p < n_max {
                // -J k ψ a† |p> = -J k ψ sqrt(p+1) |p+1>
                let j = local_index(p + 1, up);
                let amp = ((p + 1) as f64).sqrt();
                h[(j, i)] -= field * amp;
                h[(i, j)] -= field.conj() * amp;
            }
        }
        if p >= 1 {
            // g s+ a |down, p> = g sqrt(p) |up, p-1>
            let from = local_index(p, false);
            let to = local_index(p - 1, true);
            let amp = Complex64::new(params.g * (p as f64).sqrt(), 0.0);
            h[(to, from)] += amp;
            h[(from, to)] += amp;
        }
    }
    h
}

struct GroundState {
    energy: f64,
    a: Complex64,
    sigma_minus: Complex64,
    density: f64,
}

fn ground_state(psi: Complex64, k: f64, params: &ModelParams, n_max: usize, mu: f64) -> GroundState {
    let h = mf_hamiltonian_mu(psi, k, params, n_max, mu);
    let eig = SymmetricEigen::new(h);
    let (lowest, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty spectrum");
    let v = eig.eigenvectors.column(lowest);
    let mut a = Complex64::new(0.0, 0.0);
    let mut sigma_minus = Complex64::new(0.0, 0.0);
    let mut density = 0.0;
    for p in 0..=n_max {
        for up in [false, true] {
            let i = local_index(p, up);
            density += v[i].norm_sqr() * (p as f64 + up as u8 as f64);
            if p >= 1 {
                // <v| a |v> picks v*(p-1) v(p) sqrt(p)
                a += v[local_index(p - 1, up)].conj() * v[i] * (p as f64).sqrt();
            }
            if up {
                sigma_minus += v[local_index(p, false)].conj() * v[i];
            }
        }
    }
    GroundState {
        energy: eig.eigenvalues[lowest] + params.hopping * k * psi.norm_sqr(),
        a,
        sigma_minus,
        density,
    }
}

fn validate(opts: &MeanFieldOptions, k: f64) -> Result<(), MeanFieldError> {
    let bad = |m: &str| Err(MeanFieldError::InvalidOptions(m.into()));
    if opts.n_max < 1 {
        return bad("n_max must be at least 1");
    }
    if !(opts.tol > 0.0) {
        return bad("tol must be positive");
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return bad("damping must lie in (0, 1]");
    }
    if !(k >= 0.0) {
        return bad("connectivity must be non-negative");
    }
    Ok(())
}

fn solve_at_mu(k: f64, params: &ModelParams, opts: &MeanFieldOptions, mu: f64) -> MeanFieldSolution {
    let mut psi = opts.psi0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        let gs = ground_state(psi, k, params, opts.n_max, mu);
        iterations += 1;
        // Residual of the undamped map; the reported ψ satisfies it directly.
        if (gs.a - psi).norm() < opts.tol {
            converged = true;
            break;
        }
        psi = psi * (1.0 - opts.damping) + gs.a * opts.damping;
    }
    let ordered = ground_state(psi, k, params, opts.n_max, mu);
    let trivial = ground_state(Complex64::new(0.0, 0.0), k, params, opts.n_max, mu);
    // Rounding alone can favour a vanishing iterate; demand a margin.
    let margin = 1e-14 * trivial.energy.abs().max(params.omega);
    let (psi, gs) = if ordered.energy < trivial.energy - margin {
        (psi, ordered)
    } else {
        (
            Complex64::new(0.0, 0.0),
            ground_state(Complex64::new(0.0, 0.0), k, params, opts.n_max, mu),
        )
    };
    MeanFieldSolution {
        k,
        params: params.clone(),
        mu,
        psi,
        energy: gs.energy,
        trivial_energy: trivial.energy,
        iterations,
        converged,
        sigma_plus: gs.sigma_minus.conj(),
        density: gs.density,
    }
}

/// Damped fixed-point iteration `ψ ← (1-η) ψ + η <a>` from `opts.psi0`, stopped
/// once `|<a> - ψ| < tol`, followed by an energy comparison with the `ψ = 0` branch. A run that
/// exhausts `max_iter` returns its last iterate with `converged = false`.
pub fn solve_selfconsistent(
    k: f64,
    params: &ModelParams,
    opts: &MeanFieldOptions,
) -> Result<MeanFieldSolution, MeanFieldError> {
    validate(opts, k)?;
    let Some(target) = opts.target_density else {
        return Ok(solve_at_mu(k, params, opts, opts.mu));
    };

    let density_tol = 1e-9;
    let at = |mu: f64| solve_at_mu(k, params, opts, mu);
    // Expand a bracket around the resonator frequency.
    let mut width = params.g.max(params.hopping * k).max(1e-6);
    let (mut lo, mut hi);
    loop {
        lo = params.omega + params.delta.min(0.0) - width;
        hi = params.omega + params.delta.max(0.0) + width;
        let dlo = at(lo).density;
        let dhi = at(hi).density;
        if dlo <= target && dhi >= target {
            break;
        }
        width *= 2.0;
        if width > 1e3 * params.omega {
            return Err(MeanFieldError::DensityBracket(target));
        }
    }
    let mut best = at(0.5 * (lo + hi));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        best = at(mid);
        if (best.density - target).abs() < density_tol || hi - lo < 1e-15 * params.omega {
            break;
        }
        if best.density < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

/// Smallest hopping `J` in `(0, j_max]` with a superfluid solution at
/// connectivity `k`, located by bisection to relative width `rel_tol`.
/// Returns `None` when `j_max` itself is still Mott.
pub fn critical_hopping(
    k: f64,
    params: &ModelParams,
    opts: &MeanFieldOptions,
    j_max: f64,
    rel_tol: f64,
) -> Result<Option<f64>, MeanFieldError> {
    let ordered = |j: f64| -> Result<bool, MeanFieldError> {
        Ok(solve_selfconsistent(k, &params.with_hopping(j), opts)?.is_superfluid())
    };
    if !ordered(j_max)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, j_max);
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if ordered(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Both sides of the atomic relation `<σ+> = g / (J k ψ)`, in magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaPlusDiagnostic {
    pub lhs: f64,
    pub rhs: f64,
}

pub fn sigma_plus_diagnostic(solution: &MeanFieldSolution) -> Result<SigmaPlusDiagnostic, MeanFieldError> {
    let jk = solution.params.hopping * solution.k;
    if solution.psi.norm() == 0.0 || jk == 0.0 {
        return Err(MeanFieldError::ZeroPsi);
    }
    Ok(SigmaPlusDiagnostic {
        lhs: solution.sigma_plus.norm(),
        rhs: solution.params.g / (jk * solution.psi.norm()),
    })
}

/// Ground-state expectation of the effective coupling
/// `g/2 - J k ψ* σ-` dressed by the hopping field.
pub fn effective_coupling(solution: &MeanFieldSolution) -> Complex64 {
    let sigma_minus = solution.sigma_plus.conj();
    Complex64::new(solution.params.g / 2.0, 0.0)
        - solution.psi.conj() * sigma_minus * (solution.params.hopping * solution.k)
}
