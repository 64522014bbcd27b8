//! Reference implementations used as test oracles. They share no code with
//! the library beyond basis enumeration.
#![allow(dead_code)]

use std::collections::HashMap;

use jch_core::hilbert::{Basis, LocalState, Tls};
use jch_core::{Graph, ModelParams};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Hamiltonian built state by state from the second-quantized rules.
pub fn brute_hamiltonian(graph: &Graph, params: &ModelParams, basis: &Basis) -> DMatrix<f64> {
    let dim = basis.dim();
    let sites = basis.sites();
    let n_max = basis.n_max();
    let lookup: HashMap<Vec<(u8, bool)>, usize> = (0..dim).map(|i| (key(&basis.state(i)), i)).collect();
    let mu = |i: usize| params.chemical_potential.as_ref().map_or(0.0, |m| m[i]);
    let mut h = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let state = key(&basis.state(col));
        for (i, &(p, up)) in state.iter().enumerate() {
            let n = p as f64 + up as u8 as f64;
            h[(col, col)] += params.omega * p as f64 + if up { params.omega + params.delta } else { 0.0 };
            h[(col, col)] -= mu(i) * n;
            // sigma+ a: |p, down> -> sqrt(p) |p-1, up>, and its conjugate.
            if !up && p >= 1 {
                let mut next = state.clone();
                next[i] = (p - 1, true);
                if let Some(&row) = lookup.get(&next) {
                    h[(row, col)] += params.g * (p as f64).sqrt();
                }
            }
            if up && (p as usize) < n_max {
                let mut next = state.clone();
                next[i] = (p + 1, false);
                if let Some(&row) = lookup.get(&next) {
                    h[(row, col)] += params.g * ((p + 1) as f64).sqrt();
                }
            }
        }
        for i in 0..sites {
            for j in 0..sites {
                if i == j || !graph.is_adjacent(i, j) {
                    continue;
                }
                // -J a+_i a_j
                let (pi, ui) = state[i];
                let (pj, uj) = state[j];
                if pj == 0 || pi as usize >= n_max {
                    continue;
                }
                let mut next = state.clone();
                next[i] = (pi + 1, ui);
                next[j] = (pj - 1, uj);
                if let Some(&row) = lookup.get(&next) {
                    h[(row, col)] -= params.hopping * ((pi + 1) as f64 * pj as f64).sqrt();
                }
            }
        }
    }
    h
}

fn key(state: &[LocalState]) -> Vec<(u8, bool)> {
    state.iter().map(|s| (s.photons, s.tls == Tls::Up)).collect()
}

/// `exp(-i H t) v` by scaling and squaring of a Taylor series.
pub fn expm_taylor(h: &DMatrix<f64>, v: &[Complex64], t: f64) -> Vec<Complex64> {
    let dim = h.nrows();
    let shift = h.diagonal().mean();
    let a: DMatrix<Complex64> = DMatrix::from_fn(dim, dim, |r, col| {
        let x = h[(r, col)] - if r == col { shift } else { 0.0 };
        Complex64::new(0.0, -t) * x
    });
    let norm = (0..dim)
        .map(|col| (0..dim).map(|r| a[(r, col)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0;
    while norm / 2f64.powi(squarings) > 0.25 {
        squarings += 1;
    }
    let scaled = a / Complex64::new(2f64.powi(squarings), 0.0);
    let mut term = DMatrix::<Complex64>::identity(dim, dim);
    let mut sum = term.clone();
    for k in 1..=24 {
        term = &term * &scaled / c(k as f64);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    let phase = Complex64::from_polar(1.0, -shift * t);
    let x = nalgebra::DVector::from_column_slice(v);
    (sum * x).iter().map(|z| z * phase).collect()
}

pub fn random_state(dim: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|z| *z /= n);
    v
}

pub fn overlap(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>().norm()
}

/// Dense expectation `<v| op |v>` for a diagonal operator given per basis state.
pub fn diagonal_expectation(v: &[Complex64], values: impl Fn(usize) -> f64) -> f64 {
    v.iter().enumerate().map(|(i, z)| z.norm_sqr() * values(i)).sum()
}

/// Closed-form Jaynes-Cummings doublet for level `n >= 1` in the basis
/// `(|n, down>, |n-1, up>)`: returns `(E, (photon, atom))` for the upper and
/// lower eigenvector, with the photon component nonnegative.
pub fn jc_doublet(n: usize, p: &ModelParams) -> [(f64, (f64, f64)); 2] {
    let a = n as f64 * p.omega;
    let d = n as f64 * p.omega + p.delta;
    let b = p.g * (n as f64).sqrt();
    let mean = 0.5 * (a + d);
    let half = (0.25 * (d - a) * (d - a) + b * b).sqrt();
    let vec = |e: f64| {
        // (a - e) x + b y = 0
        let (x, y) = (b, e - a);
        let norm = (x * x + y * y).sqrt();
        (x / norm, y / norm)
    };
    [(mean + half, vec(mean + half)), (mean - half, vec(mean - half))]
}
