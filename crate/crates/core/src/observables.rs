//! Number moments, order parameters, correlation matrices, and the
//! statistics used to compare curves against connectivity.
//!
//! Every number operator here is diagonal in the occupation basis, so a
//! sample reduces to probability-weighted sums over basis states.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::dynamics::{time_average, DynamicsError, PropagationReport, ProtocolKind};
use crate::graphs::Partition;
use crate::hilbert::{Basis, HilbertError, StateVector, Tls};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error("time average needs at least 8 samples, got {0}")]
    InsufficientSamples(usize),
    #[error(transparent)]
    Dynamics(DynamicsError),
    #[error("partition `{0}` is empty")]
    EmptyPartition(String),
    #[error("partition member {index} outside {sites} sites")]
    PartitionOutOfRange { index: usize, sites: usize },
    #[error("fit needs at least 3 points, got {0}")]
    InsufficientPoints(usize),
    #[error("degenerate input: all abscissae are equal")]
    DegenerateInput,
    #[error("x and y have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

impl From<DynamicsError> for ObservableError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::InsufficientSamples(n) => ObservableError::InsufficientSamples(n),
            other => ObservableError::Dynamics(other),
        }
    }
}

/// Per-state occupations, cached once per basis.
#[derive(Debug, Clone)]
pub struct MomentTable {
    sites: usize,
    photons: Vec<u8>,
    tls: Vec<u8>,
}

impl MomentTable {
    pub fn new(basis: &Basis) -> Self {
        let sites = basis.sites();
        let mut photons = Vec::with_capacity(basis.dim() * sites);
        let mut tls = Vec::with_capacity(basis.dim() * sites);
        for idx in 0..basis.dim() {
            for s in 0..sites {
                let local = basis.local(idx, s);
                photons.push(local.photons);
                tls.push((local.tls == Tls::Up) as u8);
            }
        }
        MomentTable { sites, photons, tls }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    /// Moments of `amplitudes` at `time`; `energy` is supplied by the caller.
    #[allow(clippy::needless_range_loop)]
    pub fn measure(&self, time: f64, amplitudes: &[Complex64], energy: f64) -> Sample {
        let l = self.sites;
        let mut s = Sample {
            time,
            mean: vec![0.0; l],
            second: vec![0.0; l],
            tls: vec![0.0; l],
            photons: vec![0.0; l],
            pair: vec![0.0; l * l],
            norm: 0.0,
            energy,
        };
        let mut n = vec![0.0; l];
        for (idx, amp) in amplitudes.iter().enumerate() {
            let p = amp.norm_sqr();
            if p == 0.0 {
                continue;
            }
            s.norm += p;
            let row = idx * l;
            for i in 0..l {
                let ph = self.photons[row + i] as f64;
                let up = self.tls[row + i] as f64;
                n[i] = ph + up;
                s.photons[i] += p * ph;
                s.tls[i] += p * up;
                s.mean[i] += p * n[i];
            }
            for i in 0..l {
                for j in 0..l {
                    s.pair[i * l + j] += p * n[i] * n[j];
                }
                s.second[i] += p * n[i] * n[i];
            }
        }
        s.norm = s.norm.sqrt();
        s
    }
}

/// Expectation values at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub time: f64,
    /// `<n_i>`.
    pub mean: Vec<f64>,
    /// `<n_i^2>`.
    pub second: Vec<f64>,
    /// `<s+_i s-_i>`.
    pub tls: Vec<f64>,
    /// `<a†_i a_i>`.
    pub photons: Vec<f64>,
    /// `<n_i n_j>`, row-major.
    pub pair: Vec<f64>,
    pub norm: f64,
    pub energy: f64,
}

impl Sample {
    pub fn sites(&self) -> usize {
        self.mean.len()
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.second[i] - self.mean[i] * self.mean[i]
    }

    pub fn total_site_variance(&self) -> f64 {
        (0..self.sites()).map(|i| self.variance(i)).sum()
    }

    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        self.pair[i * self.sites() + j] - self.mean[i] * self.mean[j]
    }

    pub fn total_mean(&self) -> f64 {
        self.mean.iter().sum()
    }

    /// `Var(N) = sum_ij C_ij`.
    pub fn total_variance(&self) -> f64 {
        let m = self.total_mean();
        self.pair.iter().sum::<f64>() - m * m
    }
}

/// `(<n_i>, <n_i^2>)`.
pub fn site_moments(state: &StateVector, site: usize) -> Result<(f64, f64), ObservableError> {
    let basis = state.basis();
    if site >= basis.sites() {
        return Err(HilbertError::SiteOutOfRange {
            site,
            sites: basis.sites(),
        }
        .into());
    }
    let mut mean = 0.0;
    let mut second = 0.0;
    for (idx, amp) in state.amplitudes().iter().enumerate() {
        let n = basis.local(idx, site).excitations() as f64;
        let p = amp.norm_sqr();
        mean += p * n;
        second += p * n * n;
    }
    Ok((mean, second))
}

fn average_of(report: &PropagationReport, f: impl Fn(&Sample) -> f64) -> Result<f64, ObservableError> {
    let series: Vec<(f64, f64)> = report.samples.iter().map(|s| (s.time, f(s))).collect();
    Ok(time_average(&series, report.window)?)
}

/// Time average of `sum_i (<n_i^2> - <n_i>^2)` over the measurement window.
pub fn order_parameter(report: &PropagationReport) -> Result<f64, ObservableError> {
    average_of(report, Sample::total_site_variance)
}

/// Time-averaged variance of each site.
pub fn per_site_variances(report: &PropagationReport) -> Result<Vec<f64>, ObservableError> {
    let sites = report.samples.first().map_or(0, Sample::sites);
    (0..sites).map(|i| average_of(report, |s| s.variance(i))).collect()
}

/// Time-averaged `C_ij = <n_i n_j> - <n_i><n_j>`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    sites: usize,
    values: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.sites + j]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.sites {
            for j in 0..self.sites {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

pub fn correlation_matrix(report: &PropagationReport) -> Result<CorrelationMatrix, ObservableError> {
    let sites = report.samples.first().map_or(0, Sample::sites);
    let mut values = vec![0.0; sites * sites];
    for i in 0..sites {
        for j in i..sites {
            let c = average_of(report, |s| s.covariance(i, j))?;
            values[i * sites + j] = c;
            values[j * sites + i] = c;
        }
    }
    Ok(CorrelationMatrix { sites, values })
}

/// `sum_{i,j in p} C_ij`, the number variance of the partition.
pub fn bipartite_fluctuation(c: &CorrelationMatrix, p: &Partition) -> Result<f64, ObservableError> {
    if p.is_empty() {
        return Err(ObservableError::EmptyPartition(p.name.clone()));
    }
    if let Some(&index) = p.members().iter().find(|&&m| m >= c.sites) {
        return Err(ObservableError::PartitionOutOfRange { index, sites: c.sites });
    }
    Ok(p.members()
        .iter()
        .flat_map(|&i| p.members().iter().map(move |&j| (i, j)))
        .map(|(i, j)| c.get(i, j))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub pearson_r: f64,
}

/// Least-squares line through `(x, y)` points and the Pearson coefficient.
pub fn scaling_fit(points: &[(f64, f64)]) -> Result<ScalingFit, ObservableError> {
    if points.len() < 3 {
        return Err(ObservableError::InsufficientPoints(points.len()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= f64::EPSILON * mx.abs().max(1.0) * n {
        return Err(ObservableError::DegenerateInput);
    }
    let slope = sxy / sxx;
    let pearson_r = if syy == 0.0 { 0.0 } else { sxy / (sxx * syy).sqrt() };
    Ok(ScalingFit {
        slope,
        intercept: my - slope * mx,
        pearson_r,
    })
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, ObservableError> {
    if x.len() != y.len() {
        return Err(ObservableError::LengthMismatch(x.len(), y.len()));
    }
    let points: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    Ok(scaling_fit(&points)?.pearson_r)
}

/// Average ranks (1-based); values within `rel_tol` of each other, relative
/// to the spread of the data, count as ties.
pub fn average_ranks(values: &[f64], rel_tol: f64) -> Vec<f64> {
    let spread = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = rel_tol * spread.max(f64::MIN_POSITIVE);
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] - values[order[end - 1]] <= tol {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64], tie_tol: f64) -> Result<f64, ObservableError> {
    if x.len() != y.len() {
        return Err(ObservableError::LengthMismatch(x.len(), y.len()));
    }
    pearson(&average_ranks(x, tie_tol), &average_ranks(y, tie_tol))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub delta_over_g: f64,
    pub order_parameter: f64,
    pub per_site: Vec<f64>,
}

/// Order parameter against detuning for one graph and protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderParameterCurve {
    pub graph_id: String,
    pub protocol: ProtocolKind,
    pub points: Vec<CurvePoint>,
}

impl OrderParameterCurve {
    pub fn log_deltas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delta_over_g.log10()).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.order_parameter).collect()
    }

    /// Mean order parameter over points with `log10(delta/g)` in `[lo, hi]`.
    pub fn plateau(&self, lo: f64, hi: f64) -> Option<f64> {
        let inside: Vec<f64> = self
            .points
            .iter()
            .filter(|p| {
                let x = p.delta_over_g.log10();
                x >= lo - 1e-9 && x <= hi + 1e-9
            })
            .map(|p| p.order_parameter)
            .collect();
        (!inside.is_empty()).then(|| inside.iter().sum::<f64>() / inside.len() as f64)
    }

    /// Largest `|dy / d log10(delta/g)|` between neighbouring grid points.
    pub fn max_abs_slope(&self) -> f64 {
        let x = self.log_deltas();
        let y = self.values();
        (1..x.len())
            .map(|k| ((y[k] - y[k - 1]) / (x[k] - x[k - 1])).abs())
            .fold(0.0, f64::max)
    }

    /// Largest drop below the running maximum; zero for a nondecreasing curve.
    pub fn max_drop(&self) -> f64 {
        let mut peak = f64::NEG_INFINITY;
        let mut worst = 0.0f64;
        for y in self.values() {
            peak = peak.max(y);
            worst = worst.max(peak - y);
        }
        worst
    }
}

impl fmt::Display for OrderParameterCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} ({} points)", self.graph_id, self.protocol, self.points.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{enumerate_basis, LocalState};
    use std::f64::consts::FRAC_1_SQRT_2;
    use std::sync::Arc;

    #[test]
    fn superposition_moments() {
        let b = Arc::new(enumerate_basis(1, 3, None).unwrap());
        let mut amps = vec![Complex64::new(0.0, 0.0); b.dim()];
        amps[b.index_of(&[LocalState::new(0, Tls::Down)]).unwrap()] = Complex64::new(FRAC_1_SQRT_2, 0.0);
        amps[b.index_of(&[LocalState::new(2, Tls::Down)]).unwrap()] = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let psi = StateVector::new(b.clone(), amps).unwrap();
        let (m, s) = site_moments(&psi, 0).unwrap();
        assert!((m - 1.0).abs() < 1e-15 && (s - 2.0).abs() < 1e-15);
        let sample = MomentTable::new(&b).measure(0.0, psi.amplitudes(), 0.0);
        assert!((sample.variance(0) - 1.0).abs() < 1e-15);
        assert!(matches!(site_moments(&psi, 1), Err(ObservableError::Hilbert(_))));
    }

    #[test]
    fn exact_line_fit() {
        let pts: Vec<(f64, f64)> = (0..5).map(|k| (k as f64, 2.0 * k as f64 + 1.0)).collect();
        let fit = scaling_fit(&pts).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!((fit.pearson_r - 1.0).abs() < 1e-12);
        assert_eq!(
            scaling_fit(&[(1.0, 0.0), (1.0, 2.0), (1.0, 3.0)]),
            Err(ObservableError::DegenerateInput)
        );
        assert_eq!(
            scaling_fit(&[(1.0, 0.0), (2.0, 2.0)]),
            Err(ObservableError::InsufficientPoints(2))
        );
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 2.0, 2.0], 1e-9), vec![4.0, 1.0, 2.5, 2.5]);
        let x = [1.5, 1.0, 1.0, 2.0 / 3.0, 1.0 / 3.0];
        let y = [0.66, 0.5150000000001, 0.515, 0.44, 0.28];
        assert!((spearman(&x, &y, 1e-9).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn curve_shape_helpers() {
        let curve = OrderParameterCurve {
            graph_id: "x".into(),
            protocol: ProtocolKind::Quench,
            points: [(0.1, 0.0), (1.0, 1.0), (10.0, 0.8)]
                .iter()
                .map(|&(d, y)| CurvePoint {
                    delta_over_g: d,
                    order_parameter: y,
                    per_site: vec![],
                })
                .collect(),
        };
        assert!((curve.max_abs_slope() - 1.0).abs() < 1e-12);
        assert!((curve.max_drop() - 0.2).abs() < 1e-12);
        assert_eq!(curve.plateau(0.5, 1.0), Some(0.8));
        assert_eq!(curve.plateau(2.0, 3.0), None);
    }
}
