use kbrg::ensembles::{Ensemble, MatrixKind};
use kbrg::harness::{tail_analysis, RunConfig};
use kbrg::nc_moments::{enumerate_nc2, partition_dump_line};
use kbrg::spectra::{eigenvalues, log_grid, tail_fit, SurvivalTable};
use kbrg::stieltjes::{density_by_inversion, SolverConfig, WeightGrid};
use kbrg::*;
use proptest::prelude::*;

#[test]
fn partition_dump_matches_golden_file() {
    let golden = include_str!("golden/nc2_k1_to_3.txt");
    let lines: Vec<String> = (1..=3).flat_map(|k| enumerate_nc2(k).unwrap()).map(|p| partition_dump_line(&p)).collect();
    assert_eq!(lines, golden.lines().collect::<Vec<_>>());
}

#[test]
fn semicircle_density_at_origin() {
    let grid = WeightGrid::new(WeightLaw::hard(4.0, 10.0), Kernel::trivial(), 32).unwrap();
    let pts = density_by_inversion(&grid, &SolverConfig::default(), &[0.0, 1.0], 1e-3).unwrap();
    assert!((pts[0].density - std::f64::consts::FRAC_1_PI).abs() < 0.01, "{}", pts[0].density);
    let expect = (3f64).sqrt() / (2.0 * std::f64::consts::PI);
    assert!((pts[1].density - expect).abs() < 0.01);
}

#[test]
fn synthetic_power_law_slope_is_recovered() {
    let x = log_grid(1.5, 40.0, 25);
    let survival = x.iter().map(|t| 0.5 * 4.0 * t.powf(-4.0)).collect();
    let fit = tail_fit(&SurvivalTable { x, survival, pooled: 0 }, 1.5).unwrap();
    assert!((fit.slope + 4.0).abs() < 1e-10);
    assert!((fit.intercept - 2f64.ln()).abs() < 1e-10);
}

#[test]
fn tail_analysis_needs_spectrum_above_x_min() {
    let p = ModelParams { n: 50, sigma: 1.0, ..ModelParams::default() };
    let s = eigenvalues(&Ensemble::new(p, MatrixKind::Wigner).sample(trial_seeds(1, 0)).unwrap()).unwrap();
    assert!(tail_analysis(&[s], &p, 10.0, 0.999, 30).is_err());
}

#[test]
fn complete_graph_spectrum() {
    let p = ModelParams { n: 64, alpha: 0.0, kernel: KernelKind::Trivial, ..ModelParams::default() };
    let s = eigenvalues(&Ensemble::new(p, MatrixKind::Adjacency).sample(trial_seeds(0, 0)).unwrap()).unwrap();
    let top = 63f64.sqrt();
    assert!((s.eigenvalues[63] - top).abs() < 1e-10);
    assert!(s.eigenvalues[..63].iter().all(|l| (l + 1.0 / top).abs() < 1e-10));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn config_text_roundtrips(n in 2usize..5000, tau in 2.01f64..10.0, seed in any::<u64>(), trials in 1usize..50) {
        let mut cfg = RunConfig::default();
        cfg.params.n = n;
        cfg.params.tau = tau;
        cfg.seed = seed;
        cfg.trials = trials;
        prop_assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn adjacency_entries_are_zero_or_scaled_one(seed in any::<u64>(), alpha in 0.0f64..0.99) {
        let p = ModelParams { n: 40, alpha, tau: 3.0, sigma: 1.0, ..ModelParams::default() };
        let m = Ensemble::new(p, MatrixKind::Adjacency).sample(trial_seeds(seed, 0)).unwrap();
        let v = 1.0 / scaling_constant(&p).sqrt();
        prop_assert!(m.is_symmetric());
        prop_assert!(m.entries.iter().all(|&x| x == 0.0 || x == v));
        prop_assert!((0..40).all(|i| m.get(i, i) == 0.0));
    }
}
