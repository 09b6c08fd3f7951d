//! Model parameters, torus geometry, Pareto weights and kernels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::rng::{stream, stream_rng, uniform_open0};

/// Connection kernel family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    /// `(w ∨ v)(w ∧ v)^σ`
    Sigma,
    /// `1`
    Trivial,
    /// `w ∨ v`
    Strong,
    /// `w v`
    Product,
    /// `(w ∨ v)(w ∧ v)^σ_pa` with `σ_pa = α(τ−1)/d − 1`
    PrefAttach,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Sigma => "sigma",
            KernelKind::Trivial => "trivial",
            KernelKind::Strong => "strong",
            KernelKind::Product => "product",
            KernelKind::PrefAttach => "pref-attach",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sigma" => Ok(KernelKind::Sigma),
            "trivial" | "triv" => Ok(KernelKind::Trivial),
            "strong" => Ok(KernelKind::Strong),
            "product" | "prod" => Ok(KernelKind::Product),
            "pref-attach" | "prefattach" | "pa" => Ok(KernelKind::PrefAttach),
            other => param(format!("unknown kernel `{other}`")),
        }
    }
}

/// A kernel with its exponent resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: KernelKind,
    /// Exponent on the smaller weight. Only meaningful for `Sigma` and `PrefAttach`.
    pub exponent: f64,
}

impl Kernel {
    pub fn sigma(sigma: f64) -> Self {
        Self { kind: KernelKind::Sigma, exponent: sigma }
    }

    pub fn trivial() -> Self {
        Self { kind: KernelKind::Trivial, exponent: 0.0 }
    }

    pub fn from_params(params: &ModelParams) -> Self {
        let exponent = match params.kernel {
            KernelKind::Sigma => params.sigma,
            KernelKind::PrefAttach => pref_attach_exponent(params.alpha, params.tau, params.d),
            KernelKind::Product => 1.0,
            KernelKind::Strong | KernelKind::Trivial => 0.0,
        };
        Self { kind: params.kernel, exponent }
    }

    #[inline]
    pub fn eval(&self, w: f64, v: f64) -> f64 {
        let (lo, hi) = if w <= v { (w, v) } else { (v, w) };
        match self.kind {
            KernelKind::Trivial => 1.0,
            KernelKind::Strong => hi,
            KernelKind::Product => w * v,
            KernelKind::Sigma | KernelKind::PrefAttach => {
                // A zero weight (hard-truncated vertex) kills the kernel, also at σ = 0.
                if lo <= 0.0 {
                    0.0
                } else if self.exponent == 1.0 {
                    hi * lo
                } else {
                    hi * lo.powf(self.exponent)
                }
            }
        }
    }

    /// Exponent `p` such that `κ(x, y) ≤ (x y)^p` on `[1, ∞)²`.
    pub fn growth(&self) -> f64 {
        match self.kind {
            KernelKind::Trivial => 0.0,
            KernelKind::Strong | KernelKind::Product => 1.0,
            KernelKind::Sigma | KernelKind::PrefAttach => self.exponent.max(1.0),
        }
    }

    /// True when `κ(x, y) = x y` (so the moment formula factorizes by block sizes).
    pub fn is_product(&self) -> bool {
        match self.kind {
            KernelKind::Product => true,
            KernelKind::Sigma | KernelKind::PrefAttach => self.exponent == 1.0,
            _ => false,
        }
    }
}

pub fn pref_attach_exponent(alpha: f64, tau: f64, d: usize) -> f64 {
    alpha * (tau - 1.0) / d as f64 - 1.0
}

/// `kernel_value(kind, σ, w, v)`; `params` is consulted only for `PrefAttach`.
pub fn kernel_value(kind: KernelKind, sigma: f64, w: f64, v: f64, params: &ModelParams) -> f64 {
    let exponent = match kind {
        KernelKind::PrefAttach => pref_attach_exponent(params.alpha, params.tau, params.d),
        _ => sigma,
    };
    Kernel { kind, exponent }.eval(w, v)
}

mod trunc_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(m: &f64, s: S) -> Result<S::Ok, S::Error> {
        if m.is_finite() {
            Repr::Num(*m).serialize(s)
        } else {
            Repr::Text("inf".into()).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => super::parse_trunc(&t).map_err(serde::de::Error::custom),
        }
    }
}

pub fn parse_trunc(s: &str) -> Result<f64> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "none" => Ok(f64::INFINITY),
        t => t.parse::<f64>().map_err(|_| Error::Param(format!("bad trunc_m `{s}`"))),
    }
}

/// One ensemble instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Torus side length.
    pub n: usize,
    pub d: usize,
    pub alpha: f64,
    pub tau: f64,
    pub sigma: f64,
    /// Truncation threshold; `f64::INFINITY` means untruncated.
    #[serde(with = "trunc_serde")]
    pub trunc_m: f64,
    pub kernel: KernelKind,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            n: 500,
            d: 1,
            alpha: 0.5,
            tau: 4.0,
            sigma: 1.0,
            trunc_m: f64::INFINITY,
            kernel: KernelKind::Sigma,
        }
    }
}

impl ModelParams {
    /// Number of vertices `N^d`.
    pub fn order(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_truncated(&self) -> bool {
        self.trunc_m.is_finite()
    }

    pub fn kernel(&self) -> Kernel {
        Kernel::from_params(self)
    }

    /// Full check for the limit-theorem workflows: the model is well defined
    /// and in the dense regime `alpha < d`.
    pub fn validate(&self) -> Result<()> {
        self.validate_model()?;
        if self.alpha >= self.d as f64 {
            return param(format!(
                "alpha = {} must satisfy alpha < d = {} (dense regime)",
                self.alpha, self.d
            ));
        }
        Ok(())
    }

    /// Ranges under which the graph itself is well defined (any `alpha >= 0`).
    pub fn validate_model(&self) -> Result<()> {
        if self.n < 2 {
            return param(format!("n = {} must be at least 2", self.n));
        }
        if !(self.d == 1 || self.d == 2) {
            return param(format!("d = {} must be 1 or 2", self.d));
        }
        if !(self.alpha >= 0.0) {
            return param(format!("alpha = {} must be nonnegative", self.alpha));
        }
        if !(self.tau > 2.0) || !self.tau.is_finite() {
            return param(format!("tau = {} must satisfy tau > 2", self.tau));
        }
        if !(self.sigma > 0.0 && self.sigma < self.tau - 1.0) {
            return param(format!(
                "sigma = {} must lie in (0, tau - 1) = (0, {})",
                self.sigma,
                self.tau - 1.0
            ));
        }
        if !(self.trunc_m > 1.0) {
            return param(format!("trunc_m = {} must exceed 1", self.trunc_m));
        }
        Ok(())
    }

    /// Extra preconditions for the fixed point with untruncated weights.
    pub fn validate_untruncated_stieltjes(&self) -> Result<()> {
        if !(self.tau > 3.0) {
            return Err(Error::Domain(format!(
                "untruncated Stieltjes solver requires tau > 3 (got tau = {})",
                self.tau
            )));
        }
        if !(self.sigma < self.tau - 2.0) {
            return Err(Error::Domain(format!(
                "untruncated Stieltjes solver requires sigma < tau - 2 (got sigma = {}, tau - 2 = {})",
                self.sigma,
                self.tau - 2.0
            )));
        }
        Ok(())
    }
}

/// A vertex of the discrete torus `{1, …, N}^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TorusPoint {
    pub coords: Vec<usize>,
}

impl TorusPoint {
    pub fn new(coords: impl Into<Vec<usize>>) -> Self {
        Self { coords: coords.into() }
    }

    fn check(&self, n: usize) -> Result<()> {
        if let Some(c) = self.coords.iter().find(|&&c| c < 1 || c > n) {
            return param(format!("coordinate {c} outside [1, {n}]"));
        }
        Ok(())
    }
}

/// `‖i − j‖ = Σ_ℓ |i_ℓ − j_ℓ| ∧ (N − |i_ℓ − j_ℓ|)`.
pub fn torus_distance(i: &TorusPoint, j: &TorusPoint, n: usize) -> Result<usize> {
    if i.coords.len() != j.coords.len() {
        return param("points of different dimension");
    }
    i.check(n)?;
    j.check(n)?;
    Ok(i.coords
        .iter()
        .zip(&j.coords)
        .map(|(&a, &b)| {
            let diff = a.abs_diff(b);
            diff.min(n - diff)
        })
        .sum())
}

/// Index arithmetic on `V_N`, with vertices numbered row-major from 0.
#[derive(Debug, Clone, Copy)]
pub struct Torus {
    pub n: usize,
    pub d: usize,
}

impl Torus {
    pub fn new(n: usize, d: usize) -> Self {
        Self { n, d }
    }

    pub fn order(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn point(&self, idx: usize) -> TorusPoint {
        let mut rest = idx;
        let coords = (0..self.d)
            .map(|_| {
                let c = rest % self.n;
                rest /= self.n;
                c + 1
            })
            .collect::<Vec<_>>();
        TorusPoint { coords }
    }

    pub fn index(&self, p: &TorusPoint) -> Result<usize> {
        p.check(self.n)?;
        Ok(p.coords.iter().rev().fold(0, |acc, &c| acc * self.n + (c - 1)))
    }

    #[inline]
    fn axis(&self, a: usize, b: usize) -> usize {
        let diff = a.abs_diff(b);
        diff.min(self.n - diff)
    }

    /// Torus distance between two vertex indices.
    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> usize {
        match self.d {
            1 => self.axis(i, j),
            _ => {
                let (i0, i1) = (i % self.n, i / self.n);
                let (j0, j1) = (j % self.n, j / self.n);
                self.axis(i0, j0) + self.axis(i1, j1)
            }
        }
    }
}

/// `c_N = N^{-d} Σ_{i≠j} ‖i−j‖^{-α}`, summed exactly.
///
/// The torus is vertex-transitive, so the double sum is `N^d` copies of the
/// sum over offsets from one vertex.
pub fn scaling_constant(params: &ModelParams) -> f64 {
    let n = params.n;
    let axis: Vec<usize> = (0..n).map(|k| k.min(n - k)).collect();
    let term = |dist: usize| (dist as f64).powf(-params.alpha);
    match params.d {
        1 => axis[1..].iter().map(|&r| term(r)).sum(),
        _ => {
            let mut total = 0.0;
            for (a, &ra) in axis.iter().enumerate() {
                for (b, &rb) in axis.iter().enumerate() {
                    if a == 0 && b == 0 {
                        continue;
                    }
                    total += term(ra + rb);
                }
            }
            total
        }
    }
}

/// `p_ij = κ(W_i, W_j) ‖i−j‖^{-α} ∧ 1`.
pub fn connection_probability(
    i: &TorusPoint,
    j: &TorusPoint,
    weights: &WeightVector,
    params: &ModelParams,
) -> Result<f64> {
    let dist = torus_distance(i, j, params.n)?;
    if dist == 0 {
        return Err(Error::Domain("no self-loops: i = j".into()));
    }
    let torus = Torus::new(params.n, params.d);
    let (a, b) = (torus.index(i)?, torus.index(j)?);
    let (wa, wb) = (weights.get(a)?, weights.get(b)?);
    let kappa = params.kernel().eval(wa, wb);
    Ok((kappa / (dist as f64).powf(params.alpha)).min(1.0))
}

/// Sampled vertex weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub values: Vec<f64>,
    /// Hard-truncation threshold applied to `values`, if any.
    pub truncated_at: Option<f64>,
    pub seed: u64,
}

impl WeightVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn get(&self, idx: usize) -> Result<f64> {
        self.values
            .get(idx)
            .copied()
            .ok_or_else(|| Error::Param(format!("vertex {idx} has no weight")))
    }

    /// Hard truncation `W 1{W ≤ m}`.
    pub fn truncate(&self, m: f64) -> WeightVector {
        let values = self.values.iter().map(|&w| hard_truncate(w, m)).collect();
        WeightVector { values, truncated_at: Some(m), seed: self.seed }
    }
}

#[inline]
pub fn hard_truncate(w: f64, m: f64) -> f64 {
    if w <= m {
        w
    } else {
        0.0
    }
}

/// Inverse CDF of `P(W > t) = t^{-(τ−1)}`, `t ≥ 1`, at `u ∈ (0, 1]`.
#[inline]
pub fn pareto_quantile(u: f64, tau: f64) -> f64 {
    u.powf(-1.0 / (tau - 1.0))
}

/// Untruncated i.i.d. Pareto draws, one per vertex, in vertex order.
pub fn sample_raw_weights(params: &ModelParams, seed: u64) -> Result<WeightVector> {
    if !(params.tau > 1.0) {
        return param(format!("tau = {} must exceed 1", params.tau));
    }
    let mut rng = stream_rng(seed, stream::WEIGHTS);
    let values = (0..params.order())
        .map(|_| pareto_quantile(uniform_open0(&mut rng), params.tau))
        .collect();
    Ok(WeightVector { values, truncated_at: None, seed })
}

/// Pareto weights, hard-truncated at `trunc_m` when it is finite.
pub fn sample_weights(params: &ModelParams, seed: u64) -> Result<WeightVector> {
    let raw = sample_raw_weights(params, seed)?;
    Ok(if params.is_truncated() { raw.truncate(params.trunc_m) } else { raw })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p1(n: usize, alpha: f64) -> ModelParams {
        ModelParams { n, d: 1, alpha, ..Default::default() }
    }

    #[test]
    fn torus_distance_examples() {
        let d = |a: &[usize], b: &[usize], n| torus_distance(&TorusPoint::new(a), &TorusPoint::new(b), n);
        assert_eq!(d(&[1], &[9], 10).unwrap(), 2);
        assert_eq!(d(&[1, 1], &[4, 4], 5).unwrap(), 4);
        assert_eq!(d(&[3], &[3], 7).unwrap(), 0);
        assert!(matches!(d(&[0], &[3], 7), Err(Error::Param(_))));
        assert!(matches!(d(&[8], &[3], 7), Err(Error::Param(_))));
    }

    #[test]
    fn torus_index_roundtrip() {
        let t = Torus::new(5, 2);
        for idx in 0..25 {
            let p = t.point(idx);
            assert_eq!(t.index(&p).unwrap(), idx);
            for jdx in 0..25 {
                let q = t.point(jdx);
                assert_eq!(t.distance(idx, jdx), torus_distance(&p, &q, 5).unwrap());
            }
        }
    }

    #[test]
    fn pareto_quantile_examples() {
        assert_eq!(pareto_quantile(1.0, 3.0), 1.0);
        assert_relative_eq!(pareto_quantile(0.25, 3.0), 2.0, epsilon = 1e-15);
        assert_eq!(hard_truncate(3.0, 2.0), 0.0);
        assert_eq!(hard_truncate(1.5, 2.0), 1.5);
    }

    #[test]
    fn truncated_weights_are_zero_or_in_range() {
        let params = ModelParams { n: 400, trunc_m: 2.0, tau: 2.5, ..Default::default() };
        let w = sample_weights(&params, 3).unwrap();
        assert_eq!(w.truncated_at, Some(2.0));
        assert!(w.values.iter().all(|&x| x == 0.0 || (1.0..=2.0).contains(&x)));
        assert!(w.values.iter().any(|&x| x == 0.0));
        let raw = sample_raw_weights(&params, 3).unwrap();
        assert!(raw.values.iter().all(|&x| x >= 1.0));
        assert_eq!(raw.truncate(2.0), w);
    }

    #[test]
    fn kernel_examples() {
        let params = ModelParams::default();
        assert_eq!(kernel_value(KernelKind::Sigma, 1.0, 2.0, 3.0, &params), 6.0);
        assert_eq!(kernel_value(KernelKind::Sigma, 0.5, 4.0, 1.0, &params), 4.0);
        assert_eq!(kernel_value(KernelKind::Sigma, 0.5, 0.0, 7.0, &params), 0.0);
        assert_eq!(kernel_value(KernelKind::Sigma, 0.0, 2.0, 5.0, &params), 5.0);
        assert_eq!(kernel_value(KernelKind::Trivial, 0.3, 2.0, 5.0, &params), 1.0);
        assert_eq!(kernel_value(KernelKind::Strong, 0.3, 2.0, 5.0, &params), 5.0);
        assert_eq!(kernel_value(KernelKind::Product, 0.3, 2.0, 5.0, &params), 10.0);
        let pa = ModelParams { alpha: 0.5, tau: 3.0, d: 1, ..Default::default() };
        assert_eq!(pref_attach_exponent(pa.alpha, pa.tau, pa.d), 0.0);
        assert_eq!(kernel_value(KernelKind::PrefAttach, 9.9, 2.0, 5.0, &pa), 5.0);
    }

    #[test]
    fn connection_probability_examples() {
        let unit = |n| WeightVector { values: vec![1.0; n], truncated_at: None, seed: 0 };
        let triv = ModelParams { n: 10, kernel: KernelKind::Trivial, alpha: 0.7, ..Default::default() };
        let p = connection_probability(&TorusPoint::new([1]), &TorusPoint::new([2]), &unit(10), &triv);
        assert_eq!(p.unwrap(), 1.0);

        let prod = ModelParams { n: 10, alpha: 1.0, sigma: 1.0, ..Default::default() };
        let p = connection_probability(&TorusPoint::new([1]), &TorusPoint::new([5]), &unit(10), &prod).unwrap();
        assert_eq!(p, 0.25);

        let mut w = unit(10);
        w.values[0] = 10.0;
        w.values[2] = 10.0;
        let p = connection_probability(&TorusPoint::new([1]), &TorusPoint::new([3]), &w, &prod).unwrap();
        assert_eq!(p, 1.0);

        let same = connection_probability(&TorusPoint::new([4]), &TorusPoint::new([4]), &w, &prod);
        assert!(matches!(same, Err(Error::Domain(_))));
    }

    #[test]
    fn scaling_constant_examples() {
        assert_relative_eq!(scaling_constant(&p1(3, 0.5)), 2.0, epsilon = 1e-14);
        assert_relative_eq!(scaling_constant(&p1(4, 1.0)), 2.5, epsilon = 1e-14);
        assert_eq!(scaling_constant(&p1(17, 0.0)), 16.0);
        let p2 = ModelParams { n: 6, d: 2, alpha: 0.0, ..Default::default() };
        assert_eq!(scaling_constant(&p2), 35.0);
    }

    #[test]
    fn scaling_constant_matches_double_sum() {
        for &(n, d, alpha) in &[(7usize, 1usize, 0.3), (5, 2, 1.2), (6, 2, 0.5)] {
            let params = ModelParams { n, d, alpha, ..Default::default() };
            let t = Torus::new(n, d);
            let mut total = 0.0;
            for i in 0..t.order() {
                for j in 0..t.order() {
                    if i != j {
                        total += (t.distance(i, j) as f64).powf(-alpha);
                    }
                }
            }
            assert_relative_eq!(scaling_constant(&params), total / t.order() as f64, max_relative = 1e-13);
        }
    }

    #[test]
    fn scaling_constant_stabilizes() {
        // c_N / N^{d-α} approaches c_0 with shrinking increments.
        let ratio = |n: usize| scaling_constant(&p1(n, 0.5)) / (n as f64).powf(0.5);
        let r: Vec<f64> = [250, 1000, 4000, 16000].iter().map(|&n| ratio(n)).collect();
        let steps: Vec<f64> = r.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        assert!(steps[1] < steps[0] && steps[2] < steps[1], "{r:?}");
    }

    #[test]
    fn validation() {
        assert!(ModelParams::default().validate().is_ok());
        let bad = [
            ModelParams { alpha: 1.0, ..Default::default() },
            ModelParams { tau: 2.0, ..Default::default() },
            ModelParams { sigma: 3.0, ..Default::default() },
            ModelParams { sigma: 0.0, ..Default::default() },
            ModelParams { trunc_m: 1.0, ..Default::default() },
            ModelParams { d: 3, ..Default::default() },
            ModelParams { n: 1, ..Default::default() },
        ];
        for p in bad {
            assert!(matches!(p.validate(), Err(Error::Param(_))), "{p:?}");
        }
        let s = ModelParams { tau: 4.0, sigma: 2.0, ..Default::default() };
        assert!(matches!(s.validate_untruncated_stieltjes(), Err(Error::Domain(_))));
        let s = ModelParams { tau: 3.0, sigma: 0.5, ..Default::default() };
        assert!(matches!(s.validate_untruncated_stieltjes(), Err(Error::Domain(_))));
    }

    #[test]
    fn params_json_roundtrip_with_infinite_truncation() {
        let p = ModelParams::default();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"trunc_m\":\"inf\""));
        let back: ModelParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn pareto_ks_against_law() {
        for &tau in &[2.5, 3.0, 4.0] {
            let params = ModelParams { n: 1_000_000, tau, sigma: 0.5, ..Default::default() };
            let mut w = sample_raw_weights(&params, 11).unwrap().values;
            w.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = w.len() as f64;
            let ks = w
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let cdf = 1.0 - x.powf(-(tau - 1.0));
                    ((i + 1) as f64 / n - cdf).abs().max((cdf - i as f64 / n).abs())
                })
                .fold(0.0, f64::max);
            assert!(ks < 0.01, "tau = {tau}: KS = {ks}");
        }
    }

    proptest! {
        #[test]
        fn torus_distance_is_a_metric(n in 2usize..40, a in any::<[u32; 6]>()) {
            let t = Torus::new(n, 2);
            let ord = t.order();
            let (i, j, k) = (a[0] as usize % ord, a[1] as usize % ord, a[2] as usize % ord);
            prop_assert_eq!(t.distance(i, j), t.distance(j, i));
            prop_assert_eq!(t.distance(i, j) == 0, i == j);
            prop_assert!(t.distance(i, k) <= t.distance(i, j) + t.distance(j, k));
            prop_assert!(t.distance(i, j) <= 2 * (n / 2));
        }

        #[test]
        fn sigma_kernel_is_symmetric(s in 0.0f64..3.0, w in 0.0f64..50.0, v in 0.0f64..50.0) {
            let k = Kernel::sigma(s);
            prop_assert_eq!(k.eval(w, v), k.eval(v, w));
        }
    }
}
