//! Many-body basis of `L` resonator sites, each a truncated Fock mode times a
//! two-level system.
//!
//! Local states are ordered by `(photons, tls)` with `Down < Up`, and basis
//! states are ordered lexicographically over sites with site 0 most
//! significant. Encoding each local state as `2 * photons + tls` turns that
//! order into plain integer order of the mixed-radix key, which is what
//! [`Basis::index_of`] binary-searches.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::sparse::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HilbertError {
    #[error("no basis states with {excitations} excitations on {sites} sites (n_max = {n_max})")]
    SectorEmpty {
        sites: usize,
        n_max: usize,
        excitations: usize,
    },
    #[error("site {site} out of range for {sites} sites")]
    SiteOutOfRange { site: usize, sites: usize },
    #[error("unsupported basis size: {0}")]
    InvalidSize(String),
    #[error("vector length {got} does not match basis dimension {dim}")]
    DimensionMismatch { got: usize, dim: usize },
    #[error("state dump line {line}: {message}")]
    Dump { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tls {
    Down = 0,
    Up = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocalState {
    pub photons: u8,
    pub tls: Tls,
}

impl LocalState {
    pub fn new(photons: u8, tls: Tls) -> Self {
        LocalState { photons, tls }
    }

    pub fn excitations(self) -> usize {
        self.photons as usize + self.tls as usize
    }

    fn code(self) -> u8 {
        2 * self.photons + self.tls as u8
    }

    fn from_code(code: u8) -> Self {
        LocalState {
            photons: code / 2,
            tls: if code % 2 == 1 { Tls::Up } else { Tls::Down },
        }
    }
}

/// Ordered many-body basis, optionally restricted to a fixed total
/// excitation number.
#[derive(Debug, Clone)]
pub struct Basis {
    sites: usize,
    n_max: usize,
    sector: Option<usize>,
    codes: Vec<u8>,
    keys: Vec<u64>,
}

/// Two bases built from the same `(sites, n_max, sector)` are identical,
/// since enumeration is deterministic.
impl PartialEq for Basis {
    fn eq(&self, other: &Self) -> bool {
        self.sites == other.sites && self.n_max == other.n_max && self.sector == other.sector
    }
}

pub fn enumerate_basis(sites: usize, n_max: usize, sector: Option<usize>) -> Result<Basis, HilbertError> {
    if sites == 0 || n_max == 0 {
        return Err(HilbertError::InvalidSize(format!(
            "need sites >= 1 and n_max >= 1, got sites = {sites}, n_max = {n_max}"
        )));
    }
    let radix = 2 * (n_max + 1);
    if n_max > 100 || (radix as f64).powi(sites as i32) >= 2f64.powi(63) {
        return Err(HilbertError::InvalidSize(format!(
            "{sites} sites with n_max = {n_max} overflow the state key"
        )));
    }
    let per_site_max = n_max + 1;
    if let Some(n) = sector {
        if n > sites * per_site_max {
            return Err(HilbertError::SectorEmpty {
                sites,
                n_max,
                excitations: n,
            });
        }
    }

    let mut codes = Vec::new();
    let mut keys = Vec::new();
    let mut current = vec![0u8; sites];
    fn fill(
        site: usize,
        used: usize,
        key: u64,
        current: &mut [u8],
        ctx: (usize, usize, Option<usize>),
        codes: &mut Vec<u8>,
        keys: &mut Vec<u64>,
    ) {
        let (sites, radix, sector) = ctx;
        if site == sites {
            if sector.is_none_or(|n| n == used) {
                codes.extend_from_slice(current);
                keys.push(key);
            }
            return;
        }
        let capacity_after = (sites - site - 1) * (radix / 2);
        for code in 0..radix as u8 {
            let exc = LocalState::from_code(code).excitations();
            if let Some(n) = sector {
                if used + exc > n || used + exc + capacity_after < n {
                    continue;
                }
            }
            current[site] = code;
            fill(
                site + 1,
                used + exc,
                key * radix as u64 + code as u64,
                current,
                ctx,
                codes,
                keys,
            );
        }
    }
    fill(0, 0, 0, &mut current, (sites, radix, sector), &mut codes, &mut keys);

    if keys.is_empty() {
        return Err(HilbertError::SectorEmpty {
            sites,
            n_max,
            excitations: sector.unwrap_or(0),
        });
    }
    Ok(Basis {
        sites,
        n_max,
        sector,
        codes,
        keys,
    })
}

impl Basis {
    pub fn dim(&self) -> usize {
        self.keys.len()
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn sector(&self) -> Option<usize> {
        self.sector
    }

    pub fn local(&self, index: usize, site: usize) -> LocalState {
        LocalState::from_code(self.codes[index * self.sites + site])
    }

    pub fn state(&self, index: usize) -> Vec<LocalState> {
        (0..self.sites).map(|s| self.local(index, s)).collect()
    }

    pub fn excitations(&self, index: usize) -> usize {
        (0..self.sites).map(|s| self.local(index, s).excitations()).sum()
    }

    fn key_of(&self, states: &[LocalState]) -> Option<u64> {
        if states.len() != self.sites || states.iter().any(|s| s.photons as usize > self.n_max) {
            return None;
        }
        let radix = 2 * (self.n_max as u64 + 1);
        Some(states.iter().fold(0, |k, s| k * radix + s.code() as u64))
    }

    pub fn index_of(&self, states: &[LocalState]) -> Option<usize> {
        let key = self.key_of(states)?;
        self.keys.binary_search(&key).ok()
    }

    fn check_site(&self, site: usize) -> Result<(), HilbertError> {
        if site >= self.sites {
            return Err(HilbertError::SiteOutOfRange {
                site,
                sites: self.sites,
            });
        }
        Ok(())
    }

    fn header(&self) -> String {
        let sector = self.sector.map_or("none".to_string(), |n| n.to_string());
        format!("dim={} L={} n_max={} N={}", self.dim(), self.sites, self.n_max, sector)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteOperatorKind {
    Annihilate,
    Create,
    SigmaMinus,
    SigmaPlus,
    PhotonNumber,
    TlsNumber,
    ExcitationNumber,
}

impl SiteOperatorKind {
    /// Image of a local state under the operator, if nonzero. Creation at
    /// the Fock cutoff vanishes (truncation).
    fn act(self, s: LocalState, n_max: usize) -> Option<(LocalState, f64)> {
        use SiteOperatorKind::*;
        let p = s.photons;
        match self {
            Annihilate if p > 0 => Some((LocalState::new(p - 1, s.tls), (p as f64).sqrt())),
            Create if (p as usize) < n_max => Some((LocalState::new(p + 1, s.tls), (p as f64 + 1.0).sqrt())),
            SigmaMinus if s.tls == Tls::Up => Some((LocalState::new(p, Tls::Down), 1.0)),
            SigmaPlus if s.tls == Tls::Down => Some((LocalState::new(p, Tls::Up), 1.0)),
            PhotonNumber if p > 0 => Some((s, p as f64)),
            TlsNumber if s.tls == Tls::Up => Some((s, 1.0)),
            ExcitationNumber if s.excitations() > 0 => Some((s, s.excitations() as f64)),
            _ => None,
        }
    }
}

/// Site operator on a basis. `dropped` counts nonzero matrix elements whose
/// image lies outside a sector-restricted basis and were discarded.
#[derive(Debug, Clone)]
pub struct SiteOperator {
    pub matrix: CsrMatrix,
    pub dropped: usize,
}

pub fn site_operator(basis: &Basis, site: usize, kind: SiteOperatorKind) -> Result<SiteOperator, HilbertError> {
    basis.check_site(site)?;
    let mut triplets = Vec::new();
    let mut dropped = 0;
    let mut scratch = vec![LocalState::new(0, Tls::Down); basis.sites];
    for col in 0..basis.dim() {
        for (s, slot) in scratch.iter_mut().enumerate() {
            *slot = basis.local(col, s);
        }
        let Some((image, amp)) = kind.act(scratch[site], basis.n_max) else {
            continue;
        };
        scratch[site] = image;
        match basis.index_of(&scratch) {
            Some(row) => triplets.push((row, col, amp)),
            None => dropped += 1,
        }
    }
    Ok(SiteOperator {
        matrix: CsrMatrix::from_triplets(basis.dim(), basis.dim(), triplets),
        dropped,
    })
}

/// Complex amplitudes over a shared basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    basis: Arc<Basis>,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(basis: Arc<Basis>, amplitudes: Vec<Complex64>) -> Result<Self, HilbertError> {
        if amplitudes.len() != basis.dim() {
            return Err(HilbertError::DimensionMismatch {
                got: amplitudes.len(),
                dim: basis.dim(),
            });
        }
        Ok(StateVector { basis, amplitudes })
    }

    pub fn basis_state(basis: Arc<Basis>, index: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); basis.dim()];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        StateVector { basis, amplitudes }
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        for a in &mut self.amplitudes {
            *a /= n;
        }
        self
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Text dump: a header line, then `index re im` for nonzero amplitudes.
    pub fn to_dump(&self) -> String {
        let mut out = self.basis.header();
        out.push('\n');
        for (i, a) in self.amplitudes.iter().enumerate() {
            if a.re != 0.0 || a.im != 0.0 {
                writeln!(out, "{i} {:e} {:e}", a.re, a.im).unwrap();
            }
        }
        out
    }

    /// Parse a dump, rebuilding the basis from its header.
    pub fn from_dump(text: &str) -> Result<Self, HilbertError> {
        let err = |line: usize, message: String| HilbertError::Dump { line, message };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty dump".into()))?;
        let mut fields = std::collections::HashMap::new();
        for token in header.split_whitespace() {
            let (k, v) = token
                .split_once('=')
                .ok_or_else(|| err(1, format!("bad header token `{token}`")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| err(1, format!("missing `{k}`")));
        let int =
            |k: &str| -> Result<usize, HilbertError> { get(k)?.parse().map_err(|e| err(1, format!("bad `{k}`: {e}"))) };
        let sector = match get("N")? {
            "none" => None,
            _ => Some(int("N")?),
        };
        let basis = Arc::new(enumerate_basis(int("L")?, int("n_max")?, sector)?);
        if basis.dim() != int("dim")? {
            return Err(err(
                1,
                format!("header dim disagrees with basis dimension {}", basis.dim()),
            ));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); basis.dim()];
        for (n, line) in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.is_empty() {
                continue;
            }
            if parts.len() != 3 {
                return Err(err(n + 1, "expected `index re im`".into()));
            }
            let index: usize = parts[0].parse().map_err(|e| err(n + 1, format!("{e}")))?;
            let re: f64 = parts[1].parse().map_err(|e| err(n + 1, format!("{e}")))?;
            let im: f64 = parts[2].parse().map_err(|e| err(n + 1, format!("{e}")))?;
            let slot = amplitudes
                .get_mut(index)
                .ok_or_else(|| err(n + 1, format!("index {index} out of range")))?;
            *slot = Complex64::new(re, im);
        }
        Ok(StateVector { basis, amplitudes })
    }
}
