//! Fixed point `a(z, x) (z + ∫ a(z, y) κ(x, y) μ(dy)) = −1` and the Stieltjes
//! transform `S(z) = ∫ a(z, x) μ(dx)` of the limiting spectral measure.
//!
//! The iteration is `a ← (1−θ) a + θ T(a)` with `T(a)(x) = −1/(z + (K a)(x))`.
//! For `Im z > 0` and `Im a > 0` the denominator has imaginary part at least
//! `Im z`, so `T` maps the set `{Im a > 0, |a| ≤ 1/Im z}` into itself; both
//! bounds are re-checked after every step.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::law::{DiscreteLaw, KernelOperator, LawVariant, WeightLaw};
use crate::model::{Kernel, KernelKind, ModelParams};

pub const DEFAULT_GRID_SIZE: usize = 256;

/// Discretized weight law together with the kernel operator on its nodes.
#[derive(Debug, Clone)]
pub struct WeightGrid {
    pub law: DiscreteLaw,
    pub kernel: Kernel,
    op: KernelOperator,
}

impl WeightGrid {
    pub fn new(law: WeightLaw, kernel: Kernel, g: usize) -> Result<Self> {
        if let WeightLaw::Pareto { tau, variant: LawVariant::Untruncated, .. } = law {
            if matches!(kernel.kind, KernelKind::Sigma | KernelKind::PrefAttach) {
                let s = kernel.exponent;
                if !(tau > 3.0) {
                    return Err(Error::Domain(format!("untruncated fixed point requires tau > 3 (got {tau})")));
                }
                if !(s < tau - 2.0) {
                    return Err(Error::Domain(format!(
                        "untruncated fixed point requires sigma < tau - 2 (got sigma = {s}, tau - 2 = {})",
                        tau - 2.0
                    )));
                }
            }
        }
        let law = DiscreteLaw::for_power(law, kernel.growth(), g)?;
        let op = KernelOperator::on_nodes(&law, &kernel);
        Ok(Self { law, kernel, op })
    }

    /// Grid for the model's kernel; finite `trunc_m` uses `variant`, otherwise the untruncated law.
    pub fn from_params(params: &ModelParams, variant: LawVariant, g: usize) -> Result<Self> {
        params.validate()?;
        if !params.is_truncated() {
            params.validate_untruncated_stieltjes()?;
        }
        Self::new(WeightLaw::pareto(params.tau, params.trunc_m, variant), params.kernel(), g)
    }

    pub fn len(&self) -> usize {
        self.law.len()
    }

    pub fn is_empty(&self) -> bool {
        self.law.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.law.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.law.weights
    }

    /// Admissible `β` range `(2 ∨ (1+σ), τ−1)` when the contraction constants apply.
    pub fn beta_range(&self) -> Option<(f64, f64)> {
        let tau = self.law.law.tau()?;
        if !matches!(self.kernel.kind, KernelKind::Sigma | KernelKind::PrefAttach) {
            return None;
        }
        let lo = 2f64.max(1.0 + self.kernel.exponent);
        (lo < tau - 1.0).then_some((lo, tau - 1.0))
    }

    pub fn default_beta(&self) -> f64 {
        match self.beta_range() {
            Some((lo, hi)) => 0.5 * (lo + hi),
            None => 2f64.max(1.0 + self.kernel.exponent) + 0.5,
        }
    }

    /// `c̃ = (τ−1)(1/(β−2) + 1/(β−1−σ))`, or `‖K‖_∞` where those constants do not apply.
    pub fn contraction_constant(&self, beta: f64) -> f64 {
        match (self.beta_range(), self.law.law.tau()) {
            (Some((lo, hi)), Some(tau)) if beta > lo && beta < hi => {
                (tau - 1.0) * (1.0 / (beta - 2.0) + 1.0 / (beta - 1.0 - self.kernel.exponent))
            }
            _ => self.op.inf_norm(),
        }
    }

    /// Node weights of the `L¹(ν)` norm, `ν(dx) = x^{−β} dx`; atoms count with weight one.
    pub fn nu_weights(&self, beta: f64) -> Vec<f64> {
        let nc = self.law.continuous_len();
        (0..self.len())
            .map(|i| if i < nc { self.law.du_weights[i] * self.law.nodes[i].powf(1.0 - beta) } else { 1.0 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// `None` picks the midpoint of the admissible range.
    pub beta: Option<f64>,
    /// `None` uses `2√c̃`.
    pub eta_start: Option<f64>,
    /// Imaginary part used for density inversion.
    pub eta_target: f64,
    pub continuation: f64,
    pub damping: f64,
    /// Relative `L¹(ν)` change at which an iteration stops.
    pub tol: f64,
    /// Looser tolerance for the intermediate continuation stages.
    pub stage_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            beta: None,
            eta_start: None,
            eta_target: 1e-2,
            continuation: 0.7,
            damping: 0.5,
            tol: 1e-12,
            stage_tol: 1e-7,
            max_iter: 20_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, grid: &WeightGrid) -> Result<()> {
        if let (Some(b), Some((lo, hi))) = (self.beta, grid.beta_range()) {
            if !(b > lo && b < hi) {
                return param(format!("beta = {b} must lie in ({lo}, {hi})"));
            }
        }
        if !(self.tol > 0.0) || !(self.stage_tol > 0.0) {
            return param("tolerances must be positive");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return param(format!("damping = {} must lie in (0, 1]", self.damping));
        }
        if !(self.continuation > 0.0 && self.continuation < 1.0) {
            return param(format!("continuation factor = {} must lie in (0, 1)", self.continuation));
        }
        if !(self.eta_target > 0.0) || self.eta_start.is_some_and(|e| !(e > 0.0)) {
            return param("eta values must be positive");
        }
        if self.max_iter == 0 {
            return param("max_iter must be positive");
        }
        Ok(())
    }

    pub fn beta_for(&self, grid: &WeightGrid) -> f64 {
        self.beta.unwrap_or_else(|| grid.default_beta())
    }

    pub fn eta_start_for(&self, grid: &WeightGrid) -> f64 {
        self.eta_start.unwrap_or_else(|| 2.0 * grid.contraction_constant(self.beta_for(grid)).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StieltjesField {
    pub z: Complex64,
    pub values: Vec<Complex64>,
    /// Last relative `L¹(ν)` change.
    pub residual: f64,
    /// Iterations at the final `z` (continuation stages not included).
    pub iterations: usize,
    /// All iterations including continuation stages.
    pub total_iterations: usize,
    pub converged: bool,
    /// Smallest `Im a` seen over all iterates.
    pub min_im: f64,
    /// Largest `|a| Im z` seen over all iterates (at most 1).
    pub max_abs_eta: f64,
}

impl StieltjesField {
    /// `a ≡ −1/z`.
    pub fn initial(z: Complex64, len: usize) -> Self {
        let a = -1.0 / z;
        Self {
            z,
            values: vec![a; len],
            residual: f64::INFINITY,
            iterations: 0,
            total_iterations: 0,
            converged: false,
            min_im: a.im,
            max_abs_eta: a.norm() * z.im,
        }
    }

    pub fn constant(z: Complex64, a: Complex64, len: usize) -> Self {
        Self { values: vec![a; len], min_im: a.im, max_abs_eta: a.norm() * z.im, ..Self::initial(z, len) }
    }
}

fn nu_norm(v: impl Iterator<Item = f64>, nu: &[f64]) -> f64 {
    v.zip(nu).map(|(x, w)| x * w).sum()
}

/// One application of `T`: `a(x) ← −1/(z + ∫ a(y) κ(x, y) μ(dy))`.
pub fn apply_t(field: &StieltjesField, grid: &WeightGrid) -> Result<StieltjesField> {
    let z = field.z;
    if !(z.im > 0.0) {
        return param(format!("Im z = {} must be positive", z.im));
    }
    if field.values.len() != grid.len() {
        return Err(Error::Data(format!("field has {} values, grid has {}", field.values.len(), grid.len())));
    }
    let ka = grid.op.apply(&field.values);
    let mut values = Vec::with_capacity(ka.len());
    for v in ka {
        let d = z + v;
        if d.norm() < 1e-14 {
            return Err(Error::Numerical(format!("vanishing denominator {d} at z = {z}")));
        }
        values.push(-1.0 / d);
    }
    let mut out = StieltjesField { values, ..field.clone() };
    check_herglotz(&mut out)?;
    Ok(out)
}

fn check_herglotz(f: &mut StieltjesField) -> Result<()> {
    let eta = f.z.im;
    for a in &f.values {
        f.min_im = f.min_im.min(a.im);
        f.max_abs_eta = f.max_abs_eta.max(a.norm() * eta);
        if !(a.im > 0.0) || a.norm() > 1.0 / eta + 1e-12 {
            return Err(Error::Numerical(format!("Herglotz bound violated at z = {}: a = {a}", f.z)));
        }
    }
    Ok(())
}

/// Damped iteration at fixed `z` from the values in `field`.
fn iterate(field: StieltjesField, grid: &WeightGrid, cfg: &SolverConfig, nu: &[f64], tol: f64) -> Result<StieltjesField> {
    let mut f = field;
    let mut theta = cfg.damping;
    let mut prev = f64::INFINITY;
    f.iterations = 0;
    f.converged = false;
    for _ in 0..cfg.max_iter {
        let t = apply_t(&f, grid)?;
        let next: Vec<Complex64> = f.values.iter().zip(&t.values).map(|(a, b)| a * (1.0 - theta) + b * theta).collect();
        let change = nu_norm(next.iter().zip(&f.values).map(|(a, b)| (a - b).norm()), nu);
        let size = nu_norm(next.iter().map(|a| a.norm()), nu).max(f64::MIN_POSITIVE);
        let residual = change / size;
        f = StieltjesField { values: next, min_im: t.min_im, max_abs_eta: t.max_abs_eta, ..f };
        check_herglotz(&mut f)?;
        f.iterations += 1;
        f.total_iterations += 1;
        f.residual = residual;
        if residual < tol {
            f.converged = true;
            return Ok(f);
        }
        if residual > prev && theta > 0.25 {
            theta = 0.25f64.min(theta * 0.5);
        }
        prev = residual;
    }
    Err(Error::Convergence { iterations: f.iterations, residual: f.residual })
}

/// Solves at `z`, walking `Im z` down from `eta_start` by the continuation factor when `z` lies
/// below the contraction regime.
pub fn solve_fixed_point(z: Complex64, grid: &WeightGrid, cfg: &SolverConfig) -> Result<StieltjesField> {
    solve_from(z, None, grid, cfg)
}

/// Like [`solve_fixed_point`] but starting the final stage from `guess` (no continuation).
pub fn solve_fixed_point_from(
    z: Complex64,
    guess: &[Complex64],
    grid: &WeightGrid,
    cfg: &SolverConfig,
) -> Result<StieltjesField> {
    solve_from(z, Some(guess), grid, cfg)
}

fn solve_from(z: Complex64, guess: Option<&[Complex64]>, grid: &WeightGrid, cfg: &SolverConfig) -> Result<StieltjesField> {
    cfg.validate(grid)?;
    if !(z.im > 0.0) || !z.re.is_finite() {
        return param(format!("z = {z} must lie in the upper half-plane"));
    }
    let beta = cfg.beta_for(grid);
    let nu = grid.nu_weights(beta);
    if let Some(g) = guess {
        if g.len() != grid.len() {
            return Err(Error::Data("initial guess has the wrong length".into()));
        }
        let mut f = StieltjesField::initial(z, grid.len());
        f.values = g.to_vec();
        check_herglotz(&mut f)?;
        return iterate(f, grid, cfg, &nu, cfg.tol);
    }
    let eta_start = cfg.eta_start_for(grid);
    let mut etas = Vec::new();
    let mut e = eta_start;
    while e > z.im {
        etas.push(e);
        e *= cfg.continuation;
    }
    let mut field: Option<StieltjesField> = None;
    let mut total = 0;
    for &eta in &etas {
        let zs = Complex64::new(z.re, eta);
        let start = match field.take() {
            Some(prev) => StieltjesField { z: zs, ..prev },
            None => StieltjesField::initial(zs, grid.len()),
        };
        let f = iterate(start, grid, cfg, &nu, cfg.stage_tol)?;
        total = f.total_iterations;
        field = Some(f);
    }
    let start = match field {
        Some(prev) => StieltjesField { z, ..prev },
        None => StieltjesField::initial(z, grid.len()),
    };
    let mut f = iterate(start, grid, cfg, &nu, cfg.tol)?;
    f.total_iterations = f.total_iterations.max(total + f.iterations);
    Ok(f)
}

/// `S(z) = ∫ a(z, x) μ(dx)`.
pub fn stieltjes_transform(field: &StieltjesField, grid: &WeightGrid) -> Result<Complex64> {
    if !field.converged {
        return Err(Error::State("Stieltjes transform requested from an unconverged field".into()));
    }
    Ok(field.values.iter().zip(grid.weights()).map(|(a, w)| a * *w).sum())
}

/// `L¹(ν)` distance between two fields on the same grid.
pub fn field_distance(a: &StieltjesField, b: &StieltjesField, grid: &WeightGrid, beta: f64) -> f64 {
    nu_norm(a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm()), &grid.nu_weights(beta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub eta: f64,
    pub beta: f64,
    pub c_tilde: f64,
    /// Successive ratios of the undamped residual while it is above `floor`.
    pub residual_ratios: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Round-off floor of the residual.
    pub floor: f64,
    /// Ratios `‖T(a*+δ) − a*‖ / ‖δ‖` over consecutive steps with `δ` rescaled each time.
    pub renormalized_ratios: Vec<f64>,
}

impl ContractionReport {
    pub fn max_ratio(&self) -> f64 {
        self.residual_ratios.iter().chain(&self.renormalized_ratios).fold(0.0, |a, &b| a.max(b))
    }
}

/// Measures the contraction of `T` at `z = x + i·2√c̃` over `steps` consecutive iterations.
pub fn measure_contraction(x: f64, grid: &WeightGrid, beta: f64, steps: usize) -> Result<ContractionReport> {
    let c_tilde = grid.contraction_constant(beta);
    let eta = 2.0 * c_tilde.sqrt();
    let z = Complex64::new(x, eta);
    let nu = grid.nu_weights(beta);
    let norm = |v: &[Complex64]| nu_norm(v.iter().map(|a| a.norm()), &nu);
    let diff = |a: &[Complex64], b: &[Complex64]| nu_norm(a.iter().zip(b).map(|(x, y)| (x - y).norm()), &nu);

    // Raw residuals of the undamped iteration from the far admissible guess a ≡ i/η.
    let mut f = StieltjesField::constant(z, Complex64::new(0.0, 1.0 / eta), grid.len());
    let mut residuals = Vec::new();
    for _ in 0..=steps {
        let t = apply_t(&f, grid)?;
        residuals.push(diff(&t.values, &f.values));
        f = t;
    }
    let floor = 64.0 * f64::EPSILON * norm(&f.values);
    let residual_ratios = residuals.windows(2).take_while(|w| w[1] > floor).map(|w| w[1] / w[0]).collect();

    // Power iteration on the deviation from the fixed point.
    let cfg = SolverConfig { damping: 1.0, tol: 1e-15, ..SolverConfig::default() };
    let star = iterate(StieltjesField::initial(z, grid.len()), grid, &cfg, &nu, 1e-15)
        .or_else(|_| solve_fixed_point(z, grid, &cfg))?;
    let size = 1e-4 * norm(&star.values);
    let mut delta: Vec<Complex64> = grid.nodes().iter().map(|&x| Complex64::new(1.0, 1.0) / (1.0 + x)).collect();
    let mut renormalized_ratios = Vec::new();
    for _ in 0..steps {
        let s = size / norm(&delta);
        delta.iter_mut().for_each(|d| *d *= s);
        let mut pert = star.clone();
        for (a, d) in pert.values.iter_mut().zip(&delta) {
            *a += d;
        }
        let t = apply_t(&pert, grid)?;
        let next: Vec<Complex64> = t.values.iter().zip(&star.values).map(|(a, b)| a - b).collect();
        renormalized_ratios.push(norm(&next) / norm(&delta));
        delta = next;
    }
    Ok(ContractionReport { eta, beta, c_tilde, residual_ratios, residuals, floor, renormalized_ratios })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityPoint {
    pub x: f64,
    pub density: f64,
    pub eta: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// `f(x) = Im S(x + iη) / π` on `x_grid`, solved independently (and in parallel) per abscissa.
pub fn density_by_inversion(grid: &WeightGrid, cfg: &SolverConfig, x_grid: &[f64], eta: f64) -> Result<Vec<DensityPoint>> {
    if !(eta > 0.0) {
        return param(format!("eta = {eta} must be positive"));
    }
    let results: Vec<std::result::Result<DensityPoint, f64>> = x_grid
        .par_iter()
        .map(|&x| {
            let z = Complex64::new(x, eta);
            let f = solve_fixed_point(z, grid, cfg).map_err(|_| x)?;
            let s = stieltjes_transform(&f, grid).map_err(|_| x)?;
            Ok(DensityPoint {
                x,
                density: s.im / std::f64::consts::PI,
                eta,
                residual: f.residual,
                iterations: f.total_iterations,
            })
        })
        .collect();
    let failed: Vec<f64> = results.iter().filter_map(|r| r.as_ref().err().copied()).collect();
    if !failed.is_empty() {
        return Err(Error::PartialResult { failed });
    }
    Ok(results.into_iter().map(|r| r.unwrap()).collect())
}

/// Trapezoid rule `∫ x^p f(x) dx` over the density table.
pub fn density_moment(points: &[DensityPoint], p: i32) -> f64 {
    points
        .windows(2)
        .map(|w| 0.5 * (w[1].x - w[0].x) * (w[0].x.powi(p) * w[0].density + w[1].x.powi(p) * w[1].density))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nc_moments::{limiting_moment, MomentMethod, MomentModel};
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// `S_sc(z) = (−z + √(z²−4))/2` on the branch with positive imaginary part.
    fn semicircle(z: Complex64) -> Complex64 {
        let r = (z * z - 4.0).sqrt();
        let s = (-z + r) / 2.0;
        if s.im > 0.0 {
            s
        } else {
            (-z - r) / 2.0
        }
    }

    fn trivial_grid() -> WeightGrid {
        WeightGrid::new(WeightLaw::conditional(4.0, 20.0), Kernel::trivial(), 64).unwrap()
    }

    #[test]
    fn constant_field_maps_to_scalar_recursion() {
        let g = trivial_grid();
        let z = c(0.3, 1.2);
        let a = c(-0.1, 0.4);
        let t = apply_t(&StieltjesField::constant(z, a, g.len()), &g).unwrap();
        for v in &t.values {
            assert!((v - (-1.0 / (z + a))).norm() < 1e-13);
        }
    }

    #[test]
    fn semicircle_fixed_points() {
        let g = trivial_grid();
        let cfg = SolverConfig::default();
        let f = solve_fixed_point(c(0.0, 1.0), &g, &cfg).unwrap();
        let s = stieltjes_transform(&f, &g).unwrap();
        assert!((s - c(0.0, (5f64.sqrt() - 1.0) / 2.0)).norm() < 1e-10, "{s}");
        let f = solve_fixed_point(c(0.0, 2.5), &g, &cfg).unwrap();
        let s = stieltjes_transform(&f, &g).unwrap();
        assert!((s - semicircle(c(0.0, 2.5))).norm() < 1e-10);
        assert_relative_eq!(s.im, 0.350_781_059_358_212, epsilon = 1e-10);
        let f = solve_fixed_point(c(0.7, 0.05), &g, &cfg).unwrap();
        let s = stieltjes_transform(&f, &g).unwrap();
        assert!((s - semicircle(c(0.7, 0.05))).norm() < 1e-8, "{s}");
    }

    #[test]
    fn unit_law_matches_trivial_kernel() {
        let cfg = SolverConfig::default();
        for sigma in [0.3, 1.0, 2.0] {
            let g = WeightGrid::new(WeightLaw::Unit, Kernel::sigma(sigma), 1).unwrap();
            let f = solve_fixed_point(c(0.4, 0.3), &g, &cfg).unwrap();
            let s = stieltjes_transform(&f, &g).unwrap();
            assert!((s - semicircle(c(0.4, 0.3))).norm() < 1e-10);
        }
    }

    #[test]
    fn large_eta_expansion() {
        let g = WeightGrid::new(WeightLaw::conditional(4.0, 10.0), Kernel::sigma(0.5), 64).unwrap();
        let z = c(0.0, 400.0);
        let f = solve_fixed_point(z, &g, &SolverConfig::default()).unwrap();
        for a in &f.values {
            assert!((a - (-1.0 / z)).norm() < 200.0 / z.norm().powi(3));
        }
    }

    #[test]
    fn unconverged_field_is_rejected() {
        let g = trivial_grid();
        let f = StieltjesField::initial(c(0.0, 1.0), g.len());
        assert!(matches!(stieltjes_transform(&f, &g), Err(Error::State(_))));
    }

    #[test]
    fn refuses_untruncated_outside_theorem_range() {
        for (tau, s) in [(3.0, 0.5), (4.0, 2.0), (4.0, 2.5)] {
            let r = WeightGrid::new(WeightLaw::untruncated(tau), Kernel::sigma(s), 64);
            assert!(matches!(r, Err(Error::Domain(_))), "tau {tau} sigma {s}");
        }
        assert!(WeightGrid::new(WeightLaw::untruncated(4.0), Kernel::sigma(1.0), 64).is_ok());
    }

    #[test]
    fn transform_bounds_and_symmetry() {
        let g = WeightGrid::new(WeightLaw::conditional(4.0, 20.0), Kernel::sigma(1.0), 128).unwrap();
        let cfg = SolverConfig::default();
        for z in [c(0.5, 0.4), c(2.0, 1.0), c(-1.3, 0.2)] {
            let f = solve_fixed_point(z, &g, &cfg).unwrap();
            let s = stieltjes_transform(&f, &g).unwrap();
            assert!(s.im > 0.0 && s.norm() <= 1.0 / z.im);
            // −1/S is again a Herglotz function
            assert!((-1.0 / s).im > 0.0 && (1.0 / s).im < 0.0);
            assert!(f.min_im > 0.0 && f.max_abs_eta <= 1.0 + 1e-12);
            let fm = solve_fixed_point(c(-z.re, z.im), &g, &cfg).unwrap();
            let sm = stieltjes_transform(&fm, &g).unwrap();
            assert!((sm + s.conj()).norm() < 1e-10, "{z}: {s} vs {sm}");
        }
    }

    #[test]
    fn laurent_expansion_at_large_z() {
        let g = WeightGrid::new(WeightLaw::conditional(4.0, 20.0), Kernel::sigma(1.0), 256).unwrap();
        let z = c(0.0, 10.0);
        let f = solve_fixed_point(z, &g, &SolverConfig::default()).unwrap();
        let s = stieltjes_transform(&f, &g).unwrap();
        let model = MomentModel::sigma(4.0, 1.0, 20.0, LawVariant::Conditional);
        let mut laurent = -1.0 / z;
        for k in 1..=4 {
            laurent -= limiting_moment(k, &model, MomentMethod::ClosedFormSigma1).unwrap() / z.powi(2 * k as i32 + 1);
        }
        assert!((s - laurent).norm() < 1e-6, "{s} vs {laurent}");
    }

    #[test]
    fn distinct_initial_guesses_reach_the_same_field() {
        let g = WeightGrid::new(WeightLaw::hard(4.0, 15.0), Kernel::sigma(0.7), 128).unwrap();
        let cfg = SolverConfig::default();
        let beta = cfg.beta_for(&g);
        let z = c(0.2, 8.0);
        let a = solve_fixed_point(z, &g, &cfg).unwrap();
        let guess = vec![c(0.05, 0.1); g.len()];
        let b = solve_fixed_point_from(z, &guess, &g, &cfg).unwrap();
        let zero = StieltjesField::constant(z, c(0.0, 0.0), g.len());
        let size = field_distance(&a, &zero, &g, beta);
        assert!(field_distance(&a, &b, &g, beta) < 10.0 * cfg.tol * size);
    }

    #[test]
    fn contraction_at_twice_root_c_tilde() {
        let g = WeightGrid::new(WeightLaw::untruncated(4.0), Kernel::sigma(1.0), 256).unwrap();
        let beta = g.default_beta();
        assert_relative_eq!(beta, 2.5);
        assert_relative_eq!(g.contraction_constant(beta), 12.0);
        let r = measure_contraction(0.0, &g, beta, 20).unwrap();
        assert_eq!(r.renormalized_ratios.len(), 20);
        assert!(r.max_ratio() <= 0.5, "{r:?}");
        assert!(!r.residual_ratios.is_empty());
    }
}
