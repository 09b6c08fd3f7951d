//! Eigenvalues, empirical spectral measures and the statistics computed from them.

use serde::{Deserialize, Serialize};

use crate::ensembles::{MatrixKind, SymmetricMatrixSample};
use crate::error::{param, Error, Result};
use crate::model::ModelParams;
use crate::rng::Seeds;

pub const MAX_MOMENT_ORDER: u32 = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSample {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub kind: MatrixKind,
    pub params: ModelParams,
    pub seeds: Seeds,
}

impl SpectralSample {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.eigenvalues.iter().sum::<f64>() / self.len() as f64
    }

    pub fn measure(&self) -> EmpiricalMeasure {
        EmpiricalMeasure { atoms: self.eigenvalues.clone() }
    }
}

/// Eigenvalues of a dense symmetric matrix given in full row-major storage, ascending.
pub fn symmetric_eigenvalues(order: usize, entries: &[f64]) -> Result<Vec<f64>> {
    if entries.len() != order * order {
        return Err(Error::Data(format!("expected {} entries, got {}", order * order, entries.len())));
    }
    if let Some(pos) = entries.iter().position(|x| !x.is_finite()) {
        return Err(Error::Data(format!("non-finite entry at ({}, {})", pos / order.max(1), pos % order.max(1))));
    }
    if order == 0 {
        return Ok(vec![]);
    }
    let a = faer::MatRef::from_row_major_slice(entries, order, order);
    let mut ev = a
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolver failed: {e:?}")))?;
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

pub fn eigenvalues(matrix: &SymmetricMatrixSample) -> Result<SpectralSample> {
    Ok(SpectralSample {
        eigenvalues: symmetric_eigenvalues(matrix.order, &matrix.entries)?,
        kind: matrix.kind,
        params: matrix.params.clone(),
        seeds: matrix.seeds,
    })
}

/// Equal-mass atoms, stored sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    pub atoms: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(mut atoms: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Data("empirical measure needs at least one atom".into()));
        }
        if atoms.iter().any(|x| !x.is_finite()) {
            return Err(Error::Data("non-finite atom".into()));
        }
        atoms.sort_by(f64::total_cmp);
        Ok(Self { atoms })
    }

    /// Pools several spectra into one measure.
    pub fn pooled(samples: &[SpectralSample]) -> Result<Self> {
        Self::new(samples.iter().flat_map(|s| s.eigenvalues.iter().copied()).collect())
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `F(x) = μ((−∞, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms.partition_point(|&a| a <= x) as f64 / self.len() as f64
    }

    pub fn survival(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    pub fn moment(&self, order: u32) -> f64 {
        self.atoms.iter().map(|x| x.powi(order as i32)).sum::<f64>() / self.len() as f64
    }

    /// Histogram with Freedman–Diaconis bins.
    pub fn histogram(&self) -> Histogram {
        let n = self.len() as f64;
        let q = |p: f64| self.atoms[((n - 1.0) * p).round() as usize];
        let (lo, hi) = (self.atoms[0], *self.atoms.last().unwrap());
        let width = 2.0 * (q(0.75) - q(0.25)) / n.cbrt();
        let bins = if width > 0.0 && hi > lo { ((hi - lo) / width).ceil().clamp(1.0, 10_000.0) as usize } else { 1 };
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let edges: Vec<f64> = (0..=bins).map(|b| lo + (hi - lo) * b as f64 / bins as f64).collect();
        self.histogram_with_edges(&edges).expect("edges are increasing")
    }

    /// Histogram on explicit increasing edges; atoms outside `[edges[0], edges[last]]` are not counted.
    pub fn histogram_with_edges(&self, edges: &[f64]) -> Result<Histogram> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return param("histogram edges must be strictly increasing with at least two entries");
        }
        let mut counts = vec![0usize; edges.len() - 1];
        let last = *edges.last().unwrap();
        for &x in &self.atoms {
            if x < edges[0] || x > last {
                continue;
            }
            let b = edges.partition_point(|&e| e <= x).saturating_sub(1).min(counts.len() - 1);
            counts[b] += 1;
        }
        Ok(Histogram { edges: edges.to_vec(), counts, total: self.len() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Number of atoms of the measure, including any outside the edges.
    pub total: usize,
}

impl Histogram {
    /// Bin masses (sum to 1 when every atom is inside the edges).
    pub fn masses(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.total as f64).collect()
    }

    pub fn densities(&self) -> Vec<f64> {
        self.masses().iter().zip(self.edges.windows(2)).map(|(m, w)| m / (w[1] - w[0])).collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// `sup_x [G(x) − F(x + ε)]` for step CDFs; the supremum sits at a jump of `G` or of `F(· + ε)`.
fn shifted_excess(g: &EmpiricalMeasure, f: &EmpiricalMeasure, eps: f64) -> f64 {
    let at = |x: f64| g.cdf(x) - f.cdf(x + eps);
    g.atoms.iter().map(|&x| at(x)).chain(f.atoms.iter().map(|&y| at(y - eps))).fold(0.0, f64::max)
}

/// Lévy distance `inf{ε > 0 : F(x−ε) − ε ≤ G(x) ≤ F(x+ε) + ε ∀x}`.
pub fn levy_distance(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> f64 {
    let h = |eps: f64| shifted_excess(nu, mu, eps).max(shifted_excess(mu, nu, eps));
    if h(0.0) <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if h(mid) <= mid {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1e-300) {
            break;
        }
    }
    hi
}

/// `sup_x |F(x) − G(x)|` over the merged support.
pub fn ks_distance(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> f64 {
    mu.atoms.iter().chain(&nu.atoms).map(|&x| (mu.cdf(x) - nu.cdf(x)).abs()).fold(0.0, f64::max)
}

/// `(1/n) Σ λ_i^order` for an even order in `2..=20`.
pub fn empirical_moment(sample: &SpectralSample, order: u32) -> Result<f64> {
    check_moment_order(order)?;
    if sample.is_empty() {
        return Err(Error::Data("empty spectrum".into()));
    }
    Ok(sample.eigenvalues.iter().map(|x| x.powi(order as i32)).sum::<f64>() / sample.len() as f64)
}

pub(crate) fn check_moment_order(order: u32) -> Result<()> {
    if order < 2 || order % 2 == 1 {
        return param(format!("moment order must be even and at least 2 (got {order})"));
    }
    if order > MAX_MOMENT_ORDER {
        return param(format!("moment order {order} exceeds the overflow guard {MAX_MOMENT_ORDER}"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalTable {
    pub x: Vec<f64>,
    pub survival: Vec<f64>,
    /// Number of pooled eigenvalues.
    pub pooled: usize,
}

/// Fraction of pooled eigenvalues strictly above each grid point.
pub fn survival_function(samples: &[SpectralSample], grid: &[f64]) -> Result<SurvivalTable> {
    let pooled = EmpiricalMeasure::pooled(samples)?;
    Ok(SurvivalTable {
        x: grid.to_vec(),
        survival: grid.iter().map(|&x| pooled.survival(x)).collect(),
        pooled: pooled.len(),
    })
}

/// `n` points spaced evenly in `log x` over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    pub points: usize,
}

/// Least-squares line through `(ln x, ln S(x))` for `x ≥ x_min`, `S(x) > 0`.
pub fn tail_fit(table: &SurvivalTable, x_min: f64) -> Result<TailFit> {
    let pts: Vec<(f64, f64)> = table
        .x
        .iter()
        .zip(&table.survival)
        .filter(|&(&x, &s)| x >= x_min && s > 0.0 && x > 0.0)
        .map(|(&x, &s)| (x.ln(), s.ln()))
        .collect();
    let n = pts.len();
    if n < 8 {
        return Err(Error::Data(format!("tail fit needs 8 grid points above {x_min} with S > 0, found {n}")));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Data("tail fit grid points are not distinct".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let s2 = rss / (nf - 2.0);
    Ok(TailFit {
        slope,
        intercept,
        slope_stderr: (s2 / sxx).sqrt(),
        intercept_stderr: (s2 * (1.0 / nf + mx * mx / sxx)).sqrt(),
        points: n,
    })
}
