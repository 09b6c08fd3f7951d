//! Random matrices along the reduction from the graph adjacency to the
//! geometry-free Gaussian model.
//!
//! All matrices are dense, real symmetric and stored as full `n × n` row-major
//! arrays. Off-diagonal entries are generated in row-major order over `i < j`
//! with exactly one draw per pair from the noise stream, so a sample is a pure
//! function of `(params, kind, seeds)`.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::model::{sample_raw_weights, scaling_constant, ModelParams, Torus, WeightVector};
use crate::rng::{stream, stream_rng, uniform, Seeds};

pub const DEFAULT_MAX_ORDER: usize = 4096;
const DUMP_MAGIC: &[u8; 8] = b"KBRGSYM1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixKind {
    /// `A_N`: Bernoulli adjacency with untruncated weights, scaled by `c_N^{-1/2}`.
    Adjacency,
    /// `A_{N,m}`: same, with hard-truncated weights.
    TruncatedAdjacency,
    /// `A_{N,m} − E[A_{N,m} | W]`.
    Centred,
    /// Entries `√(p(1−p)/c_N) G`.
    Gaussianized,
    /// Entries `√(r/c_N) G` with the uncapped `r = κ/‖i−j‖^α`.
    SimplifiedGaussian,
    /// `B_{N,m}`: entries `n^{-1/2} √κ G`, no geometry.
    GeometryFree,
    /// `P G P` with `P = diag(√W)`.
    DiagWignerDiag,
    /// Real symmetric Gaussian Wigner matrix, entry variance `1/n`.
    Wigner,
}

impl MatrixKind {
    pub const ALL: [MatrixKind; 8] = [
        MatrixKind::Adjacency,
        MatrixKind::TruncatedAdjacency,
        MatrixKind::Centred,
        MatrixKind::Gaussianized,
        MatrixKind::SimplifiedGaussian,
        MatrixKind::GeometryFree,
        MatrixKind::DiagWignerDiag,
        MatrixKind::Wigner,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MatrixKind::Adjacency => "adjacency",
            MatrixKind::TruncatedAdjacency => "truncated-adjacency",
            MatrixKind::Centred => "centred",
            MatrixKind::Gaussianized => "gaussianized",
            MatrixKind::SimplifiedGaussian => "simplified-gaussian",
            MatrixKind::GeometryFree => "geometry-free",
            MatrixKind::DiagWignerDiag => "diag-wigner-diag",
            MatrixKind::Wigner => "wigner",
        }
    }

    pub fn requires_truncation(self) -> bool {
        matches!(
            self,
            MatrixKind::TruncatedAdjacency | MatrixKind::Gaussianized | MatrixKind::SimplifiedGaussian
        )
    }

    /// Kinds whose spectrum is symmetric about zero in distribution.
    pub fn has_symmetric_spectrum(self) -> bool {
        !matches!(self, MatrixKind::Adjacency | MatrixKind::TruncatedAdjacency)
    }
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MatrixKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase().replace('_', "-");
        MatrixKind::ALL
            .into_iter()
            .find(|k| k.name() == t)
            .or(match t.as_str() {
                "truncated" => Some(MatrixKind::TruncatedAdjacency),
                "centered" => Some(MatrixKind::Centred),
                "simplified" => Some(MatrixKind::SimplifiedGaussian),
                "pgp" => Some(MatrixKind::DiagWignerDiag),
                _ => None,
            })
            .ok_or_else(|| Error::Param(format!("unknown matrix kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrixSample {
    pub order: usize,
    /// Full row-major storage.
    pub entries: Vec<f64>,
    pub kind: MatrixKind,
    pub params: ModelParams,
    pub seeds: Seeds,
    /// Normalizing constant used in place of `c_N` (1 for the Wigner-type kinds).
    pub scale: f64,
}

impl SymmetricMatrixSample {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.order + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.order..(i + 1) * self.order]
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.order;
        (0..n).all(|i| (i + 1..n).all(|j| self.get(i, j).to_bits() == self.get(j, i).to_bits()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum()
    }

    /// Binary dump: 8-byte magic, order as `u64`, then the upper triangle
    /// (diagonal included) row by row as little-endian `f64`.
    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&(self.order as u64).to_le_bytes())?;
        for i in 0..self.order {
            for j in i..self.order {
                w.write_all(&self.get(i, j).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn dump(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_binary(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

/// Reads a binary dump back as `(order, full row-major entries)`.
pub fn read_binary_dump(r: &mut impl Read) -> Result<(usize, Vec<f64>)> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[..8] != DUMP_MAGIC {
        return Err(Error::Data("not a matrix dump (bad magic)".into()));
    }
    let n = u64::from_le_bytes(header[8..].try_into().unwrap()) as usize;
    let mut entries = vec![0.0; n * n];
    let mut buf = [0u8; 8];
    for i in 0..n {
        for j in i..n {
            r.read_exact(&mut buf)?;
            let v = f64::from_le_bytes(buf);
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    Ok((n, entries))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleOptions {
    pub max_order: usize,
    /// Replace `c_N` by this value (debugging and negative controls only).
    pub scaling_override: Option<f64>,
    /// Multiply `c_N` by this factor (debugging and negative controls only).
    pub scaling_factor: f64,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self { max_order: DEFAULT_MAX_ORDER, scaling_override: None, scaling_factor: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub params: ModelParams,
    pub kind: MatrixKind,
    pub options: EnsembleOptions,
}

impl Ensemble {
    pub fn new(params: ModelParams, kind: MatrixKind) -> Self {
        Self { params, kind, options: EnsembleOptions::default() }
    }

    pub fn with_options(mut self, options: EnsembleOptions) -> Self {
        self.options = options;
        self
    }

    /// Sampling accepts any `alpha >= 0`; the dense-regime check belongs to the limit workflows.
    pub fn validate(&self) -> Result<()> {
        self.params.validate_model()?;
        if self.kind.requires_truncation() && !self.params.is_truncated() {
            return param(format!("{} needs a finite trunc_m", self.kind));
        }
        let order = self.params.order();
        if order > self.options.max_order {
            return Err(Error::Resource(format!(
                "matrix order {order} exceeds the cap {} (raise max_order to allow it)",
                self.options.max_order
            )));
        }
        if !(self.options.scaling_factor > 0.0) || self.options.scaling_override.is_some_and(|c| !(c > 0.0)) {
            return param("scaling override must be positive");
        }
        Ok(())
    }

    fn c_n(&self) -> f64 {
        self.options.scaling_override.unwrap_or_else(|| scaling_constant(&self.params)) * self.options.scaling_factor
    }

    /// Weights entering the entries: raw for `Adjacency`, otherwise cut at `trunc_m` when finite.
    pub fn weights(&self, seed: u64) -> Result<WeightVector> {
        let raw = sample_raw_weights(&self.params, seed)?;
        Ok(match self.kind {
            MatrixKind::Adjacency | MatrixKind::Wigner => raw,
            _ if self.params.is_truncated() => raw.truncate(self.params.trunc_m),
            _ => raw,
        })
    }

    pub fn sample(&self, seeds: Seeds) -> Result<SymmetricMatrixSample> {
        self.validate()?;
        let n = self.params.order();
        let mut entries = vec![0.0; n * n];
        let kernel = self.params.kernel();
        let weights = self.weights(seeds.weight)?;
        let w = &weights.values;
        let mut edge_rng = stream_rng(seeds.noise, stream::EDGES);
        let mut gauss_rng = stream_rng(seeds.noise, stream::GAUSS);
        let mut gauss = move || -> f64 { StandardNormal.sample(&mut gauss_rng) };

        let scale = match self.kind {
            MatrixKind::GeometryFree | MatrixKind::DiagWignerDiag | MatrixKind::Wigner => 1.0,
            _ => self.c_n(),
        };
        let inv_sqrt_c = 1.0 / scale.sqrt();
        let inv_sqrt_n = 1.0 / (n as f64).sqrt();
        let decay = DistanceDecay::new(&self.params);

        for i in 0..n {
            for j in i + 1..n {
                let v = match self.kind {
                    MatrixKind::Adjacency | MatrixKind::TruncatedAdjacency | MatrixKind::Centred => {
                        let p = (kernel.eval(w[i], w[j]) * decay.get(i, j)).min(1.0);
                        let a = if uniform(&mut edge_rng) < p { 1.0 } else { 0.0 };
                        if self.kind == MatrixKind::Centred {
                            (a - p) * inv_sqrt_c
                        } else {
                            a * inv_sqrt_c
                        }
                    }
                    MatrixKind::Gaussianized => {
                        let p = (kernel.eval(w[i], w[j]) * decay.get(i, j)).min(1.0);
                        (p * (1.0 - p)).sqrt() * inv_sqrt_c * gauss()
                    }
                    MatrixKind::SimplifiedGaussian => {
                        let r = kernel.eval(w[i], w[j]) * decay.get(i, j);
                        r.sqrt() * inv_sqrt_c * gauss()
                    }
                    MatrixKind::GeometryFree => kernel.eval(w[i], w[j]).sqrt() * inv_sqrt_n * gauss(),
                    MatrixKind::DiagWignerDiag => (w[i] * w[j]).sqrt() * inv_sqrt_n * gauss(),
                    MatrixKind::Wigner => inv_sqrt_n * gauss(),
                };
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Ok(SymmetricMatrixSample { order: n, entries, kind: self.kind, params: self.params.clone(), seeds, scale })
    }
}

/// `‖i−j‖^{−α}` looked up by torus offset.
struct DistanceDecay {
    torus: Torus,
    table: Vec<f64>,
}

impl DistanceDecay {
    fn new(params: &ModelParams) -> Self {
        let torus = Torus::new(params.n, params.d);
        let table = (0..torus.order())
            .map(|off| {
                let dist = torus.distance(0, off);
                if dist == 0 {
                    0.0
                } else {
                    (dist as f64).powf(-params.alpha)
                }
            })
            .collect();
        Self { torus, table }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        let n = self.torus.n;
        let off = if self.torus.d == 1 {
            (j + n - i) % n
        } else {
            let (ix, iy) = (i % n, i / n);
            let (jx, jy) = (j % n, j / n);
            (jx + n - ix) % n + n * ((jy + n - iy) % n)
        };
        self.table[off]
    }
}

pub fn sample_adjacency(params: &ModelParams, weight_seed: u64, edge_seed: u64) -> Result<SymmetricMatrixSample> {
    Ensemble::new(params.clone(), MatrixKind::Adjacency).sample(Seeds::new(weight_seed, edge_seed))
}

pub fn sample_truncated_adjacency(
    params: &ModelParams,
    weight_seed: u64,
    edge_seed: u64,
) -> Result<SymmetricMatrixSample> {
    Ensemble::new(params.clone(), MatrixKind::TruncatedAdjacency).sample(Seeds::new(weight_seed, edge_seed))
}

pub fn sample_centred(params: &ModelParams, weight_seed: u64, edge_seed: u64) -> Result<SymmetricMatrixSample> {
    Ensemble::new(params.clone(), MatrixKind::Centred).sample(Seeds::new(weight_seed, edge_seed))
}

pub fn sample_gaussianized(
    params: &ModelParams,
    weight_seed: u64,
    gauss_seed: u64,
    simplified: bool,
) -> Result<SymmetricMatrixSample> {
    let kind = if simplified { MatrixKind::SimplifiedGaussian } else { MatrixKind::Gaussianized };
    Ensemble::new(params.clone(), kind).sample(Seeds::new(weight_seed, gauss_seed))
}

pub fn sample_geometry_free(params: &ModelParams, weight_seed: u64, gauss_seed: u64) -> Result<SymmetricMatrixSample> {
    Ensemble::new(params.clone(), MatrixKind::GeometryFree).sample(Seeds::new(weight_seed, gauss_seed))
}

pub fn sample_diag_wigner_diag(params: &ModelParams, seeds: Seeds) -> Result<SymmetricMatrixSample> {
    Ensemble::new(params.clone(), MatrixKind::DiagWignerDiag).sample(seeds)
}

pub fn sample_wigner(params: &ModelParams, gauss_seed: u64) -> Result<SymmetricMatrixSample> {
    Ensemble::new(params.clone(), MatrixKind::Wigner).sample(Seeds::new(0, gauss_seed))
}
