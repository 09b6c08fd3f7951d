//! Python bindings: model parameters, ensembles, spectra, limiting moments
//! and the Stieltjes solver.

use ::kbrg as core;
use core::ensembles::{Ensemble, MatrixKind};
use core::harness::{tail_analysis, RunConfig};
use core::nc_moments::{self, MomentMethod, MomentModel, MomentOptions};
use core::spectra::{self, EmpiricalMeasure, SpectralSample};
use core::stieltjes::{self, SolverConfig, WeightGrid};
use core::{LawVariant, WeightLaw};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: core::Error) -> PyErr {
    match e {
        core::Error::Param(_) | core::Error::Domain(_) | core::Error::Validation(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = core::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

#[pyclass(name = "ModelParams", from_py_object)]
#[derive(Clone)]
pub struct PyModelParams {
    inner: core::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (n=500, d=1, alpha=0.5, tau=4.0, sigma=1.0, trunc_m=f64::INFINITY, kernel="sigma"))]
    fn new(n: usize, d: usize, alpha: f64, tau: f64, sigma: f64, trunc_m: f64, kernel: &str) -> PyResult<Self> {
        let inner = core::ModelParams { n, d, alpha, tau, sigma, trunc_m, kernel: parse(kernel)? };
        inner.validate_model().map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }
    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }
    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }
    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau
    }
    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }
    #[getter]
    fn trunc_m(&self) -> f64 {
        self.inner.trunc_m
    }
    #[getter]
    fn kernel(&self) -> &'static str {
        self.inner.kernel.name()
    }

    /// Matrix order `N^d`.
    fn order(&self) -> usize {
        self.inner.order()
    }

    /// Normalizing constant `c_N`.
    fn scaling_constant(&self) -> f64 {
        core::scaling_constant(&self.inner)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ModelParams(n={}, d={}, alpha={}, tau={}, sigma={}, trunc_m={}, kernel='{}')",
            p.n,
            p.d,
            p.alpha,
            p.tau,
            p.sigma,
            p.trunc_m,
            p.kernel.name()
        )
    }
}

/// Symmetric matrix for one trial, as a flat row-major list, plus its order.
#[pyfunction]
#[pyo3(signature = (params, kind="adjacency", seed=0, trial=0))]
fn sample_matrix(params: &PyModelParams, kind: &str, seed: u64, trial: u64) -> PyResult<(usize, Vec<f64>)> {
    let m = Ensemble::new(params.inner, parse::<MatrixKind>(kind)?).sample(core::trial_seeds(seed, trial)).map_err(err)?;
    Ok((m.order, m.entries))
}

fn spectra_for(params: &PyModelParams, kind: &str, seed: u64, trials: usize) -> PyResult<Vec<SpectralSample>> {
    let cfg = RunConfig { params: params.inner, seed, trials, ..RunConfig::default() };
    core::harness::sample_spectra(&cfg, parse(kind)?).map_err(err)
}

/// Ascending eigenvalues of each trial, seeds split from `seed`.
#[pyfunction]
#[pyo3(signature = (params, kind="adjacency", seed=0, trials=1))]
fn sample_eigenvalues(params: &PyModelParams, kind: &str, seed: u64, trials: usize) -> PyResult<Vec<Vec<f64>>> {
    Ok(spectra_for(params, kind, seed, trials)?.into_iter().map(|s| s.eigenvalues).collect())
}

fn measure(v: Vec<f64>) -> PyResult<EmpiricalMeasure> {
    EmpiricalMeasure::new(v).map_err(err)
}

#[pyfunction]
fn levy_distance(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    Ok(spectra::levy_distance(&measure(a)?, &measure(b)?))
}

#[pyfunction]
fn ks_distance(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    Ok(spectra::ks_distance(&measure(a)?, &measure(b)?))
}

/// `(slope, intercept, slope_stderr, x_max, target_slope, target_intercept)` of the pooled tail.
#[pyfunction]
#[pyo3(signature = (params, kind="adjacency", seed=0, trials=10, x_min=1.5, quantile=0.999, points=30))]
fn tail_fit(
    params: &PyModelParams,
    kind: &str,
    seed: u64,
    trials: usize,
    x_min: f64,
    quantile: f64,
    points: usize,
) -> PyResult<(f64, f64, f64, f64, f64, f64)> {
    let samples = spectra_for(params, kind, seed, trials)?;
    let (_, r) = tail_analysis(&samples, &params.inner, x_min, quantile, points).map_err(err)?;
    Ok((r.fit.slope, r.fit.intercept, r.fit.slope_stderr, r.x_max, r.target_slope, r.target_intercept))
}

/// Non-crossing pair partitions of `{1..2k}` as lists of pairs.
#[pyfunction]
fn enumerate_nc2(k: usize) -> PyResult<Vec<Vec<(usize, usize)>>> {
    Ok(nc_moments::enumerate_nc2(k).map_err(err)?.into_iter().map(|p| p.pairs).collect())
}

#[pyfunction]
fn catalan(k: usize) -> u64 {
    nc_moments::catalan(k)
}

#[pyfunction]
fn second_moment_closed_form(tau: f64, sigma: f64) -> PyResult<f64> {
    nc_moments::second_moment_closed_form(tau, sigma).map_err(err)
}

fn law(tau: f64, m: f64, variant: &str) -> PyResult<WeightLaw> {
    if variant.eq_ignore_ascii_case("unit") {
        return Ok(WeightLaw::Unit);
    }
    Ok(WeightLaw::pareto(tau, m, parse::<LawVariant>(variant)?))
}

/// `(M_2k, stderr)` of the limiting measure for the `κ_σ` kernel.
#[pyfunction]
#[pyo3(signature = (k, tau, sigma, m=f64::INFINITY, variant="hard", method="tree-quadrature", seed=0))]
fn limiting_moment(k: usize, tau: f64, sigma: f64, m: f64, variant: &str, method: &str, seed: u64) -> PyResult<(f64, f64)> {
    let model = MomentModel::new(law(tau, m, variant)?, core::Kernel::sigma(sigma));
    let opts = MomentOptions { seed, ..MomentOptions::default() };
    let e = nc_moments::limiting_moment_with(k, &model, parse::<MomentMethod>(method)?, &opts).map_err(err)?;
    Ok((e.value, e.stderr))
}

fn grid(tau: f64, sigma: f64, m: f64, variant: &str, kernel: &str, g: usize) -> PyResult<WeightGrid> {
    let kernel = match parse::<core::KernelKind>(kernel)? {
        core::KernelKind::Trivial => core::Kernel::trivial(),
        _ => core::Kernel::sigma(sigma),
    };
    WeightGrid::new(law(tau, m, variant)?, kernel, g).map_err(err)
}

/// Limiting Stieltjes transform at `z` (upper half-plane).
#[pyfunction]
#[pyo3(signature = (z, tau, sigma, m=f64::INFINITY, variant="conditional", kernel="sigma", grid_size=256))]
fn stieltjes_transform(
    z: Complex64,
    tau: f64,
    sigma: f64,
    m: f64,
    variant: &str,
    kernel: &str,
    grid_size: usize,
) -> PyResult<Complex64> {
    let g = grid(tau, sigma, m, variant, kernel, grid_size)?;
    let f = stieltjes::solve_fixed_point(z, &g, &SolverConfig::default()).map_err(err)?;
    stieltjes::stieltjes_transform(&f, &g).map_err(err)
}

/// Density `Im S(x + iη)/π` on `xs`.
#[pyfunction]
#[pyo3(signature = (xs, tau, sigma, m=f64::INFINITY, variant="conditional", kernel="sigma", eta=0.01, grid_size=256))]
#[allow(clippy::too_many_arguments)]
fn density(
    xs: Vec<f64>,
    tau: f64,
    sigma: f64,
    m: f64,
    variant: &str,
    kernel: &str,
    eta: f64,
    grid_size: usize,
) -> PyResult<Vec<f64>> {
    let g = grid(tau, sigma, m, variant, kernel, grid_size)?;
    let cfg = SolverConfig { eta_target: eta, ..SolverConfig::default() };
    Ok(stieltjes::density_by_inversion(&g, &cfg, &xs, eta).map_err(err)?.into_iter().map(|p| p.density).collect())
}

#[pymodule]
fn kbrg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyModelParams>()?;
    m.add_function(wrap_pyfunction!(sample_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(sample_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(levy_distance, m)?)?;
    m.add_function(wrap_pyfunction!(ks_distance, m)?)?;
    m.add_function(wrap_pyfunction!(tail_fit, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_nc2, m)?)?;
    m.add_function(wrap_pyfunction!(catalan, m)?)?;
    m.add_function(wrap_pyfunction!(second_moment_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(limiting_moment, m)?)?;
    m.add_function(wrap_pyfunction!(stieltjes_transform, m)?)?;
    m.add_function(wrap_pyfunction!(density, m)?)?;
    Ok(())
}
