//! Pair partitions, their walk trees, and the limiting even moments
//!
//! `M_{2k} = Σ_{π ∈ NC₂(2k)} E[ Π_{(u,v) ∈ E(T_π)} κ(W_u, W_v) ]`
//!
//! where `T_π` is the tree obtained by collapsing the closed walk
//! `1 → 2 → … → 2k → 1` onto the cycles of `γπ`, `γ = (1 2 … 2k)`, and the
//! tree vertices carry i.i.d. weights.
//!
//! Elements are 1-based in the public API (`1..=2k`).

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::fmt17;
use crate::law::{DiscreteLaw, KernelOperator, LawVariant, WeightLaw};
use crate::model::{Kernel, ModelParams};
use crate::rng::{stream, stream_rng};

pub use crate::law::truncated_pareto_moment;

pub const MAX_NC_ORDER: usize = 8;
pub const MAX_ALL_PAIRINGS_ORDER: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairPartition {
    pub k: usize,
    /// Pairs `(a, b)` with `a < b`, sorted by `a`.
    pub pairs: Vec<(usize, usize)>,
    pub crossing: bool,
}

impl PairPartition {
    pub fn new(pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut pairs: Vec<(usize, usize)> = pairs.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        pairs.sort_unstable();
        let k = pairs.len();
        if k == 0 {
            return param("a pair partition needs at least one pair");
        }
        let mut seen = vec![false; 2 * k + 1];
        for &(a, b) in &pairs {
            for e in [a, b] {
                if e == 0 || e > 2 * k || seen[e] {
                    return param(format!("pairs {pairs:?} do not partition 1..={}", 2 * k));
                }
                seen[e] = true;
            }
        }
        let crossing = is_crossing(&pairs);
        Ok(Self { k, pairs, crossing })
    }

    /// `π(e)`.
    pub fn partner(&self, e: usize) -> usize {
        for &(a, b) in &self.pairs {
            if a == e {
                return b;
            }
            if b == e {
                return a;
            }
        }
        panic!("{e} is not in 1..={}", 2 * self.k)
    }

    fn partner_table(&self) -> Vec<usize> {
        let mut p = vec![0; 2 * self.k + 1];
        for &(a, b) in &self.pairs {
            p[a] = b;
            p[b] = a;
        }
        p
    }
}

impl fmt::Display for PairPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (a, b) in &self.pairs {
            write!(f, "({a},{b})")?;
        }
        Ok(())
    }
}

fn is_crossing(pairs: &[(usize, usize)]) -> bool {
    pairs.iter().enumerate().any(|(i, &(a, b))| {
        pairs[i + 1..].iter().any(|&(c, d)| (a < c && c < b && b < d) || (c < a && a < d && d < b))
    })
}

/// Non-crossing pair partitions of `[2k]` in lexicographic order of the pair list.
pub fn enumerate_nc2(k: usize) -> Result<Vec<PairPartition>> {
    if k == 0 || k > MAX_NC_ORDER {
        return param(format!("enumeration needs 1 <= k <= {MAX_NC_ORDER} (got {k})"));
    }
    Ok(enumerate(k, true))
}

/// All pair partitions of `[2k]` in lexicographic order of the pair list.
pub fn enumerate_p2(k: usize) -> Result<Vec<PairPartition>> {
    if k == 0 || k > MAX_ALL_PAIRINGS_ORDER {
        return param(format!("enumeration needs 1 <= k <= {MAX_ALL_PAIRINGS_ORDER} (got {k})"));
    }
    Ok(enumerate(k, false))
}

fn enumerate(k: usize, non_crossing: bool) -> Vec<PairPartition> {
    fn rec(
        used: &mut Vec<bool>,
        pairs: &mut Vec<(usize, usize)>,
        non_crossing: bool,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        let Some(a) = (1..used.len()).find(|&e| !used[e]) else {
            out.push(pairs.clone());
            return;
        };
        used[a] = true;
        for b in a + 1..used.len() {
            if used[b] {
                continue;
            }
            if non_crossing {
                // Earlier pairs start before a; (c, d) crosses (a, b) iff a < d < b.
                if pairs.iter().any(|&(_, d)| a < d && d < b) {
                    continue;
                }
                // The free elements strictly inside (a, b) must pair among themselves.
                if (a + 1..b).filter(|&e| !used[e]).count() % 2 == 1 {
                    continue;
                }
            }
            used[b] = true;
            pairs.push((a, b));
            rec(used, pairs, non_crossing, out);
            pairs.pop();
            used[b] = false;
        }
        used[a] = false;
    }
    let mut out = Vec::new();
    rec(&mut vec![false; 2 * k + 1], &mut Vec::new(), non_crossing, &mut out);
    out.into_iter()
        .map(|pairs| {
            let crossing = is_crossing(&pairs);
            PairPartition { k, pairs, crossing }
        })
        .collect()
}

pub fn catalan(k: usize) -> u64 {
    (0..k).fold(1u64, |c, i| c * 2 * (2 * i as u64 + 1) / (i as u64 + 2))
}

/// Cycles of `γπ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GammaPiStructure {
    /// Blocks in order of their smallest element; each block sorted.
    pub blocks: Vec<Vec<usize>>,
    /// `block_of[e - 1]` is the block index of element `e`.
    pub block_of: Vec<usize>,
}

impl GammaPiStructure {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Block sizes `ℓ_i`.
    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }
}

/// Cycle decomposition of `γ ∘ π`: `e ↦ γ(π(e))`.
pub fn gamma_pi(pi: &PairPartition) -> GammaPiStructure {
    let n = 2 * pi.k;
    let partner = pi.partner_table();
    let step = |e: usize| partner[e] % n + 1;
    let mut block_of = vec![usize::MAX; n];
    let mut blocks = Vec::new();
    for start in 1..=n {
        if block_of[start - 1] != usize::MAX {
            continue;
        }
        let id = blocks.len();
        let mut block = Vec::new();
        let mut e = start;
        loop {
            block_of[e - 1] = id;
            block.push(e);
            e = step(e);
            if e == start {
                break;
            }
        }
        block.sort_unstable();
        blocks.push(block);
    }
    GammaPiStructure { blocks, block_of }
}

/// The closed walk `1 → 2 → … → 2k → 1` collapsed onto the blocks of `γπ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkTree {
    pub vertices: Vec<Vec<usize>>,
    /// Distinct undirected edges `(u, v)`, `u ≤ v`, in order of first traversal.
    pub edges: Vec<(usize, usize)>,
    pub root: usize,
    /// The `2k` directed steps `T(i) → T(i+1)`.
    pub walk: Vec<(usize, usize)>,
    /// False for the skeleton of a crossing partition.
    pub is_tree: bool,
}

impl WalkTree {
    /// Number of walk steps along each entry of `edges`.
    pub fn traversals(&self) -> Vec<usize> {
        self.edges
            .iter()
            .map(|&(u, v)| self.walk.iter().filter(|&&(a, b)| (a.min(b), a.max(b)) == (u, v)).count())
            .collect()
    }

    /// Children of every vertex when the tree hangs from the root.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let n = self.vertices.len();
        let mut children = vec![Vec::new(); n];
        let mut seen = vec![false; n];
        seen[self.root] = true;
        let mut queue = std::collections::VecDeque::from([self.root]);
        while let Some(v) = queue.pop_front() {
            for &(a, b) in &self.edges {
                let other = if a == v {
                    b
                } else if b == v {
                    a
                } else {
                    continue;
                };
                if !seen[other] {
                    seen[other] = true;
                    children[v].push(other);
                    queue.push_back(other);
                }
            }
        }
        children
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.vertices.len()];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }
}

pub fn walk_tree(pi: &PairPartition) -> WalkTree {
    let gp = gamma_pi(pi);
    let n = 2 * pi.k;
    let walk: Vec<(usize, usize)> = (0..n).map(|i| (gp.block_of[i], gp.block_of[(i + 1) % n])).collect();
    let mut edges = Vec::new();
    let mut set = BTreeSet::new();
    for &(a, b) in &walk {
        let e = (a.min(b), a.max(b));
        if set.insert(e) {
            edges.push(e);
        }
    }
    let v = gp.blocks.len();
    let no_loops = edges.iter().all(|&(a, b)| a != b);
    let mut tree = WalkTree { vertices: gp.blocks, edges, root: 0, walk, is_tree: false };
    let connected = tree.children().iter().map(Vec::len).sum::<usize>() + 1 == v;
    // A crossing π can still collapse to a tree on fewer than k + 1 vertices.
    tree.is_tree = no_loops && connected && tree.edges.len() + 1 == v && v == pi.k + 1;
    tree
}

/// One line of the partition dump: `k; (a,b)(c,d)...; blocks=...; tree-edges=...`.
pub fn partition_dump_line(pi: &PairPartition) -> String {
    let tree = walk_tree(pi);
    let mut s = format!("{}; {}; blocks=", pi.k, pi);
    for b in &tree.vertices {
        let inner: Vec<String> = b.iter().map(usize::to_string).collect();
        let _ = write!(s, "{{{}}}", inner.join(","));
    }
    s.push_str("; tree-edges=");
    let edges: Vec<String> = tree.edges.iter().map(|(a, b)| format!("{a}-{b}")).collect();
    s.push_str(&edges.join(","));
    s
}

/// Weight law and kernel entering the moment formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentModel {
    pub law: WeightLaw,
    pub kernel: Kernel,
}

impl MomentModel {
    pub fn new(law: WeightLaw, kernel: Kernel) -> Self {
        Self { law, kernel }
    }

    /// `κ_σ` with Pareto weights cut at `m` (untruncated when `m = ∞`).
    pub fn sigma(tau: f64, sigma: f64, m: f64, variant: LawVariant) -> Self {
        Self::new(WeightLaw::pareto(tau, m, variant), Kernel::sigma(sigma))
    }

    pub fn from_params(params: &ModelParams, variant: LawVariant) -> Self {
        Self::new(WeightLaw::pareto(params.tau, params.trunc_m, variant), params.kernel())
    }

    /// Degenerate law `W ≡ 1`: the moments are the Catalan numbers.
    pub fn unit(kernel: Kernel) -> Self {
        Self::new(WeightLaw::Unit, kernel)
    }

    /// `M_{2k}` must be finite: for the untruncated law `k (σ ∨ 1) < τ − 1`.
    pub fn check_order(&self, k: usize) -> Result<()> {
        self.law.validate()?;
        if let WeightLaw::Pareto { tau, variant: LawVariant::Untruncated, .. } = self.law {
            let p = self.kernel.growth();
            if !(k as f64 * p < tau - 1.0) {
                return Err(Error::Domain(format!(
                    "untruncated M_{} diverges: need k*(sigma v 1) < tau - 1, got {k}*{p} >= {}",
                    2 * k,
                    tau - 1.0
                )));
            }
        }
        Ok(())
    }

    /// `sup κ` over the support of the law, when bounded.
    pub fn kernel_sup(&self) -> Option<f64> {
        match self.law {
            WeightLaw::Unit => Some(self.kernel.eval(1.0, 1.0)),
            WeightLaw::Pareto { m, variant, .. } if variant != LawVariant::Untruncated => {
                Some(self.kernel.eval(m, m))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentMethod {
    ClosedFormSigma1,
    TreeQuadrature,
    MonteCarlo,
}

impl MomentMethod {
    pub fn name(self) -> &'static str {
        match self {
            MomentMethod::ClosedFormSigma1 => "closed-form-sigma1",
            MomentMethod::TreeQuadrature => "tree-quadrature",
            MomentMethod::MonteCarlo => "monte-carlo",
        }
    }
}

impl fmt::Display for MomentMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MomentMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "closed-form-sigma1" | "closed-form" | "sigma1" | "factorization" => Ok(MomentMethod::ClosedFormSigma1),
            "tree-quadrature" | "quadrature" | "tree" => Ok(MomentMethod::TreeQuadrature),
            "monte-carlo" | "mc" => Ok(MomentMethod::MonteCarlo),
            other => param(format!("unknown moment method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentOptions {
    /// Quadrature nodes per law (rounded up to whole panels).
    pub nodes: usize,
    pub mc_trials: usize,
    pub seed: u64,
}

impl Default for MomentOptions {
    fn default() -> Self {
        Self { nodes: 128, mc_trials: 100_000, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    /// Zero for deterministic methods.
    pub stderr: f64,
}

/// `M_{2k}` with default options.
pub fn limiting_moment(k: usize, model: &MomentModel, method: MomentMethod) -> Result<f64> {
    Ok(limiting_moment_with(k, model, method, &MomentOptions::default())?.value)
}

pub fn limiting_moment_with(
    k: usize,
    model: &MomentModel,
    method: MomentMethod,
    opts: &MomentOptions,
) -> Result<MomentEstimate> {
    model.check_order(k)?;
    let partitions = enumerate_nc2(k)?;
    match method {
        MomentMethod::ClosedFormSigma1 => {
            if !model.kernel.is_product() {
                return Err(Error::Domain(format!(
                    "block-size factorization needs the product kernel (sigma = 1), got {:?}",
                    model.kernel
                )));
            }
            let value = partitions
                .iter()
                .map(|pi| {
                    gamma_pi(pi).block_sizes().iter().map(|&l| model.law.moment(l as f64)).product::<f64>()
                })
                .sum();
            Ok(MomentEstimate { value, stderr: 0.0 })
        }
        MomentMethod::TreeQuadrature => {
            let q = TreeQuadrature::new(model, k, opts.nodes)?;
            let terms: Vec<f64> = partitions.par_iter().map(|pi| q.expectation(&walk_tree(pi))).collect();
            Ok(MomentEstimate { value: terms.iter().sum(), stderr: 0.0 })
        }
        MomentMethod::MonteCarlo => moment_oracle_monte_carlo(k, model, opts.mc_trials, opts.seed),
    }
}

/// Discretized law and kernel operator for tree expectations up to order `2k`.
#[derive(Debug, Clone)]
pub struct TreeQuadrature {
    pub law: DiscreteLaw,
    op: KernelOperator,
}

impl TreeQuadrature {
    pub fn new(model: &MomentModel, k: usize, nodes: usize) -> Result<Self> {
        model.check_order(k)?;
        let power = k as f64 * model.kernel.growth();
        let law = DiscreteLaw::for_power(model.law, power, nodes)?;
        let op = KernelOperator::on_nodes(&law, &model.kernel);
        Ok(Self { law, op })
    }

    /// `H_π` at the law nodes: the tree expectation conditioned on the root weight.
    pub fn h_values(&self, tree: &WalkTree) -> Vec<f64> {
        let children = tree.children();
        self.message(tree.root, &children)
    }

    fn message(&self, v: usize, children: &[Vec<usize>]) -> Vec<f64> {
        let mut g = vec![1.0; self.law.len()];
        for &c in &children[v] {
            let kc = self.op.apply(&self.message(c, children));
            g.iter_mut().zip(kc).for_each(|(a, b)| *a *= b);
        }
        g
    }

    pub fn expectation(&self, tree: &WalkTree) -> f64 {
        self.h_values(tree).iter().zip(&self.law.weights).map(|(h, w)| h * w).sum()
    }
}

/// Monte Carlo estimate of `M_{2k}`: each trial draws `k + 1` i.i.d. weights
/// and sums the edge products of every tree; reports the mean and its standard error.
pub fn moment_oracle_monte_carlo(
    k: usize,
    model: &MomentModel,
    trials: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    if trials < 10_000 {
        return param(format!("monte carlo needs at least 10^4 trials (got {trials})"));
    }
    model.check_order(k)?;
    let trees: Vec<WalkTree> = enumerate_nc2(k)?.iter().map(walk_tree).collect();
    let mut rng = stream_rng(seed, stream::MONTE_CARLO);
    let mut w = vec![0.0; k + 1];
    let (mut mean, mut m2) = (0.0, 0.0);
    for t in 0..trials {
        w.iter_mut().for_each(|x| *x = model.law.sample(&mut rng));
        let x: f64 = trees
            .iter()
            .map(|tr| tr.edges.iter().map(|&(a, b)| model.kernel.eval(w[a], w[b])).product::<f64>())
            .sum();
        let delta = x - mean;
        mean += delta / (t + 1) as f64;
        m2 += delta * (x - mean);
    }
    let var = m2 / (trials - 1) as f64;
    Ok(MomentEstimate { value: mean, stderr: (var / trials as f64).sqrt() })
}

/// `∫ x² μ(dx) = 2(τ−1)² / ((τ−2)(2τ−σ−3))` for `κ_σ` and untruncated Pareto weights.
pub fn second_moment_closed_form(tau: f64, sigma: f64) -> Result<f64> {
    if !(tau > 2.0) || !(sigma > 0.0 && sigma < tau - 1.0) {
        return param(format!("need tau > 2 and 0 < sigma < tau - 1 (got tau = {tau}, sigma = {sigma})"));
    }
    Ok(2.0 * (tau - 1.0).powi(2) / ((tau - 2.0) * (2.0 * tau - sigma - 3.0)))
}

/// Even moments `M_0 = 1, M_2, …, M_{2K}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSequence {
    pub model: MomentModel,
    pub method: MomentMethod,
    /// `values[j] = M_{2j}`.
    pub values: Vec<f64>,
    pub stderrs: Vec<f64>,
}

impl MomentSequence {
    pub fn compute(max_k: usize, model: &MomentModel, method: MomentMethod, opts: &MomentOptions) -> Result<Self> {
        let mut values = vec![1.0];
        let mut stderrs = vec![0.0];
        for k in 1..=max_k {
            let est = limiting_moment_with(k, model, method, opts)?;
            values.push(est.value);
            stderrs.push(est.stderr);
        }
        Ok(Self { model: *model, method, values, stderrs })
    }

    pub fn moment(&self, k: usize) -> Option<f64> {
        self.values.get(k).copied()
    }

    /// `M_{2k} ≤ (sup κ)^k C_k`, i.e. `(m^{1+σ})^k C_k` for `κ_σ` cut at `m`.
    pub fn check_catalan_bound(&self) -> Result<()> {
        let Some(sup) = self.model.kernel_sup() else {
            return Ok(());
        };
        for (k, &v) in self.values.iter().enumerate() {
            let bound = sup.powi(k as i32) * catalan(k) as f64;
            if v > bound * (1.0 + 1e-9) + 3.0 * self.stderrs[k] {
                return Err(Error::Validation(format!("M_{} = {v} exceeds the Catalan bound {bound}", 2 * k)));
            }
        }
        Ok(())
    }

    /// Rows `k,moment,method,stderr` (header included).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,moment,method,stderr\n");
        for (k, (v, e)) in self.values.iter().zip(&self.stderrs).enumerate().skip(1) {
            let _ = writeln!(s, "{k},{},{},{}", fmt17(*v), self.method, fmt17(*e));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pp(pairs: &[(usize, usize)]) -> PairPartition {
        PairPartition::new(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn catalan_counts() {
        let expected = [1u64, 1, 2, 5, 14, 42, 132, 429, 1430];
        for k in 1..=8 {
            assert_eq!(catalan(k), expected[k]);
            let nc = enumerate_nc2(k).unwrap();
            assert_eq!(nc.len() as u64, expected[k], "k = {k}");
            assert!(nc.iter().all(|p| !p.crossing));
            assert!(nc.windows(2).all(|w| w[0].pairs < w[1].pairs));
        }
        assert_eq!(enumerate_nc2(1).unwrap()[0].pairs, vec![(1, 2)]);
        assert!(enumerate_nc2(0).is_err());
        assert!(enumerate_nc2(9).is_err());
    }

    #[test]
    fn all_pairings_count_is_double_factorial() {
        for (k, n) in [(1, 1), (2, 3), (3, 15), (4, 105), (5, 945)] {
            let all = enumerate_p2(k).unwrap();
            assert_eq!(all.len(), n);
            assert_eq!(all.iter().filter(|p| !p.crossing).count() as u64, catalan(k));
        }
    }

    #[test]
    fn gamma_pi_examples() {
        let g = gamma_pi(&pp(&[(1, 2), (3, 4)]));
        assert_eq!(g.blocks, vec![vec![1, 3], vec![2], vec![4]]);
        let g = gamma_pi(&pp(&[(1, 4), (2, 3)]));
        assert_eq!(g.blocks, vec![vec![1], vec![2, 4], vec![3]]);
        // 1 → 3 → 4, 4 → 2 → 3, 3 → 1 → 2, 2 → 4 → 1: one cycle.
        let g = gamma_pi(&pp(&[(1, 3), (2, 4)]));
        assert_eq!(g.blocks, vec![vec![1, 2, 3, 4]]);
    }

    #[test]
    fn walk_tree_examples() {
        let t = walk_tree(&pp(&[(1, 2), (3, 4)]));
        assert!(t.is_tree);
        assert_eq!(t.root, 0);
        assert_eq!(t.vertices[0], vec![1, 3]);
        assert_eq!(t.edges, vec![(0, 1), (0, 2)]);

        let t = walk_tree(&pp(&[(1, 2)]));
        assert_eq!(t.vertices, vec![vec![1], vec![2]]);
        assert_eq!(t.edges, vec![(0, 1)]);

        let t = walk_tree(&pp(&[(1, 4), (2, 3)]));
        assert_eq!(t.vertices, vec![vec![1], vec![2, 4], vec![3]]);
        assert_eq!(t.edges, vec![(0, 1), (1, 2)]);

        let t = walk_tree(&pp(&[(1, 3), (2, 4)]));
        assert!(!t.is_tree);
    }

    #[test]
    fn dump_format() {
        assert_eq!(
            partition_dump_line(&pp(&[(1, 2), (3, 4)])),
            "2; (1,2)(3,4); blocks={1,3}{2}{4}; tree-edges=0-1,0-2"
        );
    }

    #[test]
    fn partition_validation() {
        assert!(PairPartition::new([(1, 2), (2, 3)]).is_err());
        assert!(PairPartition::new([(1, 5), (2, 3)]).is_err());
        assert!(PairPartition::new(Vec::<(usize, usize)>::new()).is_err());
        assert_eq!(pp(&[(4, 3), (2, 1)]).pairs, vec![(1, 2), (3, 4)]);
    }

    #[test]
    fn unit_law_gives_catalan() {
        let m = MomentModel::unit(Kernel::sigma(0.7));
        for k in 1..=5 {
            let v = limiting_moment(k, &m, MomentMethod::TreeQuadrature).unwrap();
            assert_eq!(v, catalan(k) as f64);
        }
        let mc = moment_oracle_monte_carlo(3, &m, 10_000, 1).unwrap();
        assert_eq!(mc.value, 5.0);
        assert_eq!(mc.stderr, 0.0);
    }

    #[test]
    fn second_moment_values() {
        assert_relative_eq!(second_moment_closed_form(4.0, 1.0).unwrap(), 2.25);
        assert_relative_eq!(second_moment_closed_form(3.0, 1.0).unwrap(), 4.0);
        assert!(second_moment_closed_form(3.0, 2.0).is_err());
        assert!(second_moment_closed_form(2.0, 0.5).is_err());
        let near = second_moment_closed_form(4.0, 3.0 - 1e-9).unwrap();
        assert_relative_eq!(near, 2.0 * 9.0 / (2.0 * 2.0), epsilon = 1e-6);
    }

    #[test]
    fn untruncated_m2_three_ways() {
        let m = MomentModel::sigma(4.0, 1.0, f64::INFINITY, LawVariant::Untruncated);
        let cf = limiting_moment(1, &m, MomentMethod::ClosedFormSigma1).unwrap();
        assert_relative_eq!(cf, 2.25, epsilon = 1e-14);
        let tq = limiting_moment(1, &m, MomentMethod::TreeQuadrature).unwrap();
        assert!((tq - 2.25).abs() < 1e-8, "{tq}");
        for s in [0.3, 0.8, 1.7, 2.5] {
            let m = MomentModel::sigma(4.0, s, f64::INFINITY, LawVariant::Untruncated);
            if m.check_order(1).is_err() {
                continue;
            }
            let tq = limiting_moment(1, &m, MomentMethod::TreeQuadrature).unwrap();
            let cf = second_moment_closed_form(4.0, s).unwrap();
            assert!((tq - cf).abs() < 1e-8 * cf, "sigma {s}: {tq} vs {cf}");
        }
    }

    #[test]
    fn divergent_untruncated_order_is_rejected() {
        let m = MomentModel::sigma(4.0, 1.0, f64::INFINITY, LawVariant::Untruncated);
        assert!(limiting_moment(2, &m, MomentMethod::TreeQuadrature).is_ok());
        match limiting_moment(3, &m, MomentMethod::TreeQuadrature) {
            Err(Error::Domain(msg)) => assert!(msg.contains("tau - 1")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn closed_form_requires_product_kernel() {
        let m = MomentModel::sigma(4.0, 0.5, 10.0, LawVariant::Hard);
        assert!(matches!(limiting_moment(1, &m, MomentMethod::ClosedFormSigma1), Err(Error::Domain(_))));
    }

    #[test]
    fn truncated_sigma1_quadrature_matches_factorization() {
        for variant in [LawVariant::Hard, LawVariant::Conditional] {
            let m = MomentModel::sigma(3.0, 1.0, 15.0, variant);
            for k in 1..=4 {
                let cf = limiting_moment(k, &m, MomentMethod::ClosedFormSigma1).unwrap();
                let tq = limiting_moment(k, &m, MomentMethod::TreeQuadrature).unwrap();
                assert!((tq - cf).abs() < 1e-9 * cf, "{variant:?} k={k}: {tq} vs {cf}");
            }
        }
    }

    #[test]
    fn h_function_factorizes_over_disjoint_intervals() {
        let m = MomentModel::sigma(4.0, 0.6, 12.0, LawVariant::Hard);
        let q = TreeQuadrature::new(&m, 3, 128).unwrap();
        let h1 = q.h_values(&walk_tree(&pp(&[(1, 2)])));
        let h2 = q.h_values(&walk_tree(&pp(&[(1, 4), (2, 3)])));
        let h12 = q.h_values(&walk_tree(&pp(&[(1, 2), (3, 6), (4, 5)])));
        for i in 0..h1.len() {
            assert!((h12[i] - h1[i] * h2[i]).abs() <= 1e-8 * h12[i].abs().max(1e-300));
        }
        // nesting: H_{(1,4)(2,3)}(x) = ∫ κ(x, y) H_{(1,2)}(y) μ(dy), with the inner
        // function in closed form and the outer integral on a fine split grid.
        let (tau, s, mm) = (4.0, 0.6, 12.0);
        let a = tau - 1.0;
        let pint = |p: f64, lo: f64, hi: f64| a * (hi.powf(p - a) - lo.powf(p - a)) / (p - a);
        let inner = |y: f64| y * pint(s, 1.0, y) + y.powf(s) * pint(1.0, y, mm);
        let (gx, gw) = crate::law::gauss_legendre(32);
        let outer = |x: f64| {
            let mut acc = 0.0;
            let cut = x.clamp(1.0, mm).ln();
            for (lo, hi) in [(0.0, cut), (cut, mm.ln())] {
                let pieces = 40;
                let h = (hi - lo) / pieces as f64;
                for p in 0..pieces {
                    for (t, w) in gx.iter().zip(&gw) {
                        let u = lo + h * (p as f64 + 0.5 + 0.5 * t);
                        let y = u.exp();
                        acc += 0.5 * h * w * a * (-a * u).exp() * m.kernel.eval(x, y) * inner(y);
                    }
                }
            }
            acc
        };
        let dl = &q.law;
        for (i, &x) in dl.nodes.iter().enumerate().step_by(17) {
            let direct = outer(x);
            assert!((h2[i] - direct).abs() < 1e-9 * direct.max(1e-12), "{} vs {direct}", h2[i]);
        }
    }

    #[test]
    fn monte_carlo_examples() {
        let m = MomentModel::sigma(4.0, 1.0, f64::INFINITY, LawVariant::Untruncated);
        let est = moment_oracle_monte_carlo(1, &m, 100_000, 11).unwrap();
        assert!((est.value - 2.25).abs() < 3.0 * est.stderr, "{est:?}");
        // k = 2, τ = 5: partitions (1,2)(3,4) and (1,4)(2,3) each have blocks {2,1,1}:
        // 2 · E[W²] · E[W]² = 2 · 2 · (4/3)² = 64/9.
        let m = MomentModel::sigma(5.0, 1.0, f64::INFINITY, LawVariant::Untruncated);
        let cf = limiting_moment(2, &m, MomentMethod::ClosedFormSigma1).unwrap();
        assert_relative_eq!(cf, 64.0 / 9.0, epsilon = 1e-12);
        let est = moment_oracle_monte_carlo(2, &m, 200_000, 12).unwrap();
        assert!((est.value - cf).abs() < 3.0 * est.stderr, "{est:?} vs {cf}");
        assert!(moment_oracle_monte_carlo(1, &m, 9_999, 0).is_err());
    }

    #[test]
    fn catalan_bound_holds_for_truncated_laws() {
        for (s, variant) in [(0.5, LawVariant::Hard), (1.0, LawVariant::Conditional), (1.8, LawVariant::Hard)] {
            let m = MomentModel::sigma(3.5, s, 8.0, variant);
            let seq = MomentSequence::compute(4, &m, MomentMethod::TreeQuadrature, &MomentOptions::default()).unwrap();
            seq.check_catalan_bound().unwrap();
        }
    }

    #[test]
    fn moment_csv_layout() {
        let m = MomentModel::unit(Kernel::trivial());
        let seq = MomentSequence::compute(2, &m, MomentMethod::TreeQuadrature, &MomentOptions::default()).unwrap();
        let csv = seq.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k,moment,method,stderr");
        assert!(lines[2].starts_with("2,2.0000000000000000e0,tree-quadrature,"));
    }

    fn arb_pairing(max_k: usize) -> impl Strategy<Value = PairPartition> {
        (1..=max_k).prop_flat_map(|k| {
            Just((1..=2 * k).collect::<Vec<_>>()).prop_shuffle().prop_map(move |perm| {
                PairPartition::new(perm.chunks(2).map(|c| (c[0], c[1]))).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn gamma_pi_counts_blocks(pi in arb_pairing(5)) {
            let g = gamma_pi(&pi);
            prop_assert!(g.len() <= pi.k + 1);
            prop_assert_eq!(g.len() == pi.k + 1, !pi.crossing);
            let mut all: Vec<usize> = g.blocks.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (1..=2 * pi.k).collect::<Vec<_>>());
            prop_assert!(g.blocks[0].contains(&1));
        }

        #[test]
        fn non_crossing_walk_is_a_tree_traversed_twice(pi in arb_pairing(6)) {
            let t = walk_tree(&pi);
            prop_assert_eq!(t.is_tree, !pi.crossing);
            if !pi.crossing {
                prop_assert_eq!(t.vertices.len(), pi.k + 1);
                prop_assert_eq!(t.edges.len(), pi.k);
                prop_assert!(t.traversals().iter().all(|&c| c == 2));
                // vertex degree equals block size
                let sizes: Vec<usize> = t.vertices.iter().map(Vec::len).collect();
                prop_assert_eq!(t.degrees(), sizes);
            }
        }
    }
}
