//! Jaynes-Cummings-Hubbard Hamiltonian on a graph, the single-site polariton
//! solution, and the unit-filling Mott initial state.
//!
//! Energies are in units of the resonator frequency. The detuning acts on the
//! two-level frequency, `omega_0 = omega + delta`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::graphs::Graph;
use crate::hilbert::{Basis, StateVector, Tls};
use crate::sparse::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("basis has {basis} sites but graph has {graph}")]
    DimensionMismatch { basis: usize, graph: usize },
    #[error("hopping into |0,+> requested: that state is unphysical")]
    UnphysicalTarget,
    #[error("Mott state needs the N = {sites} sector or an unrestricted basis, got N = {sector}")]
    SectorMismatch { sites: usize, sector: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub omega: f64,
    /// `omega_0 - omega`.
    pub delta: f64,
    pub g: f64,
    /// Photon hopping `J`.
    pub hopping: f64,
    /// Per-site chemical potential; `None` means zero everywhere.
    pub chemical_potential: Option<Vec<f64>>,
}

impl ModelParams {
    pub fn new(omega: f64, delta: f64, g: f64, hopping: f64) -> Self {
        ModelParams {
            omega,
            delta,
            g,
            hopping,
            chemical_potential: None,
        }
    }

    /// `g = 1e-2 omega`, `J = 1e-2 g`.
    pub fn sweep_preset() -> Self {
        Self::new(1.0, 0.0, 1e-2, 1e-4)
    }

    /// `g = 1e-2 omega`, `J = 1e-3 omega`.
    pub fn fig4_preset() -> Self {
        Self::new(1.0, 0.0, 1e-2, 1e-3)
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        ModelParams { delta, ..self.clone() }
    }

    pub fn with_hopping(&self, hopping: f64) -> Self {
        ModelParams {
            hopping,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidParams(m.to_string()));
        if !(self.omega > 0.0) {
            return bad("omega must be positive");
        }
        if !(self.g > 0.0) {
            return bad("g must be positive");
        }
        if !(self.hopping >= 0.0) {
            return bad("hopping must be non-negative");
        }
        if !self.delta.is_finite() {
            return bad("delta must be finite");
        }
        Ok(())
    }

    fn mu(&self, site: usize) -> f64 {
        self.chemical_potential.as_ref().map_or(0.0, |m| m[site])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

/// Eigenstate `|n,±> = gamma |down,n> + rho |up,n-1>` of one JC site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolaritonLevel {
    pub n: usize,
    pub branch: Branch,
    pub energy: f64,
    pub gamma: f64,
    pub rho: f64,
}

/// `chi(n) = sqrt(delta^2 / 4 + g^2 n)`.
pub fn chi(n: usize, params: &ModelParams) -> f64 {
    (params.delta * params.delta / 4.0 + params.g * params.g * n as f64).sqrt()
}

/// Mixing angle `theta_n = atan2(2 g sqrt(n), delta)`, in `(0, pi)` for n >= 1.
pub fn mixing_angle(n: usize, params: &ModelParams) -> f64 {
    (2.0 * params.g * (n as f64).sqrt()).atan2(params.delta)
}

/// `(gamma, rho)` for level `n`, including the `n = 0` identifications
/// `gamma_{0-} = 1`, `gamma_{0+} = rho_{0±} = 0`.
fn coefficients(n: usize, branch: Branch, params: &ModelParams) -> (f64, f64) {
    if n == 0 {
        return match branch {
            Branch::Minus => (1.0, 0.0),
            Branch::Plus => (0.0, 0.0),
        };
    }
    let half = mixing_angle(n, params) / 2.0;
    let (s, c) = half.sin_cos();
    match branch {
        Branch::Plus => (s, c),
        Branch::Minus => (c, -s),
    }
}

pub fn polariton_local_energy(n: usize, branch: Branch, params: &ModelParams) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let base = n as f64 * params.omega + params.delta / 2.0;
    match branch {
        Branch::Plus => base + chi(n, params),
        Branch::Minus => base - chi(n, params),
    }
}

/// Both polariton levels with `n` excitations, `(plus, minus)`.
///
/// # Panics
/// If `n == 0`.
pub fn jc_eigensystem(n: usize, params: &ModelParams) -> (PolaritonLevel, PolaritonLevel) {
    assert!(n >= 1, "polariton levels start at n = 1");
    let level = |branch| {
        let (gamma, rho) = coefficients(n, branch, params);
        PolaritonLevel {
            n,
            branch,
            energy: polariton_local_energy(n, branch, params),
            gamma,
            rho,
        }
    };
    (level(Branch::Plus), level(Branch::Minus))
}

/// Overlap `<n-1, target| a |n, source>`.
pub fn polariton_hopping_element(
    n: usize,
    source: Branch,
    target: Branch,
    params: &ModelParams,
) -> Result<f64, ModelError> {
    assert!(n >= 1, "hopping elements start at n = 1");
    if n == 1 && target == Branch::Plus {
        return Err(ModelError::UnphysicalTarget);
    }
    let (g_src, r_src) = coefficients(n, source, params);
    let (g_tgt, r_tgt) = coefficients(n - 1, target, params);
    let nf = n as f64;
    Ok(nf.sqrt() * g_src * g_tgt + (nf - 1.0).sqrt() * r_src * r_tgt)
}

/// Assembled Hamiltonian with the data needed to change the detuning cheaply.
#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    basis: Arc<Basis>,
    graph: Arc<Graph>,
    params: ModelParams,
    matrix: CsrMatrix,
    up_count: Vec<f64>,
}

impl SparseHamiltonian {
    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn graph(&self) -> &Arc<Graph> {
        &self.graph
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn norm_inf(&self) -> f64 {
        self.matrix.norm_inf()
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.matrix.apply(x)
    }

    pub fn energy(&self, state: &StateVector) -> f64 {
        self.matrix.expectation(state.amplitudes()).re
    }

    /// Same Hamiltonian at a different detuning. Only the two-level diagonal
    /// changes, so the result equals a fresh assembly.
    pub fn with_detuning(&self, delta: f64) -> SparseHamiltonian {
        let shift: Vec<f64> = self.up_count.iter().map(|u| u * (delta - self.params.delta)).collect();
        SparseHamiltonian {
            basis: Arc::clone(&self.basis),
            graph: Arc::clone(&self.graph),
            params: self.params.with_delta(delta),
            matrix: self.matrix.add_diagonal(&shift),
            up_count: self.up_count.clone(),
        }
    }
}

/// `H = sum_i [w a†a + (w + delta) s+s- + g (s+ a + s- a†) - mu_i n_i]
///      - J sum_{i<j} A_ij (a†_i a_j + a†_j a_i)` on `basis`.
///
/// Each coupling is generated once from one side and mirrored, so the stored
/// matrix is exactly symmetric.
pub fn assemble_jch(
    graph: &Arc<Graph>,
    params: &ModelParams,
    basis: &Arc<Basis>,
) -> Result<SparseHamiltonian, ModelError> {
    params.validate()?;
    let sites = graph.sites();
    if basis.sites() != sites {
        return Err(ModelError::DimensionMismatch {
            basis: basis.sites(),
            graph: sites,
        });
    }
    if let Some(mu) = &params.chemical_potential {
        if mu.len() != sites {
            return Err(ModelError::InvalidParams(format!(
                "chemical potential has {} entries for {sites} sites",
                mu.len()
            )));
        }
    }
    let edges = graph.edges();
    let n_max = basis.n_max() as u8;
    let omega0 = params.omega + params.delta;
    let mut triplets = Vec::new();
    let mut up_count = Vec::with_capacity(basis.dim());
    let mirror = |triplets: &mut Vec<(usize, usize, f64)>, a: usize, b: usize, v: f64| {
        triplets.push((a, b, v));
        triplets.push((b, a, v));
    };

    for idx in 0..basis.dim() {
        let state = basis.state(idx);
        let mut diag = 0.0;
        let mut ups = 0.0;
        for (i, s) in state.iter().enumerate() {
            let p = s.photons as f64;
            let up = (s.tls == Tls::Up) as u8 as f64;
            diag += params.omega * p + omega0 * up - params.mu(i) * (p + up);
            ups += up;
        }
        triplets.push((idx, idx, diag));
        up_count.push(ups);

        // s+ a |down, p> = sqrt(p) |up, p-1>
        for (i, s) in state.iter().enumerate() {
            if s.tls == Tls::Down && s.photons > 0 {
                let mut target = state.clone();
                target[i].photons -= 1;
                target[i].tls = Tls::Up;
                let t = basis.index_of(&target).expect("JC coupling conserves excitations");
                mirror(&mut triplets, t, idx, params.g * (s.photons as f64).sqrt());
            }
        }

        if params.hopping == 0.0 {
            continue;
        }
        // a†_i a_j for i < j; the a†_j a_i half is its mirror.
        for &(i, j) in &edges {
            let (pi, pj) = (state[i].photons, state[j].photons);
            if pj > 0 && pi < n_max {
                let mut target = state.clone();
                target[i].photons += 1;
                target[j].photons -= 1;
                let t = basis.index_of(&target).expect("hopping conserves excitations");
                let amp = -params.hopping * ((pj as f64) * (pi as f64 + 1.0)).sqrt();
                mirror(&mut triplets, t, idx, amp);
            }
        }
    }

    // Each diagonal entry was pushed once; mirrored pairs are off-diagonal.
    let matrix = CsrMatrix::from_triplets(basis.dim(), basis.dim(), triplets);
    Ok(SparseHamiltonian {
        basis: Arc::clone(basis),
        graph: Arc::clone(graph),
        params: params.clone(),
        matrix,
        up_count,
    })
}

/// Product of `|1,->` at zero detuning on every site,
/// `(|down,1> - |up,0>) / sqrt(2)` per site.
pub fn prepare_mott_state(basis: &Arc<Basis>) -> Result<StateVector, ModelError> {
    let sites = basis.sites();
    if let Some(n) = basis.sector() {
        if n != sites {
            return Err(ModelError::SectorMismatch { sites, sector: n });
        }
    }
    let amplitudes = (0..basis.dim())
        .map(|idx| {
            let mut amp = 1.0;
            for s in 0..sites {
                let local = basis.local(idx, s);
                amp *= match (local.photons, local.tls) {
                    (1, Tls::Down) => FRAC_1_SQRT_2,
                    (0, Tls::Up) => -FRAC_1_SQRT_2,
                    _ => 0.0,
                };
                if amp == 0.0 {
                    break;
                }
            }
            Complex64::new(amp, 0.0)
        })
        .collect();
    Ok(StateVector::new(Arc::clone(basis), amplitudes).expect("length matches basis"))
}
