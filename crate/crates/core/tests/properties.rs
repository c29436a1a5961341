use leaky_iv::baselines::{run_mh, BayesConfig, ChainSettings, GammaEncoding};
use leaky_iv::bounds::{
    ate_from_rho, bounds_from_geometry, leakage_geometry, leakage_norm, rho_from_ate, BoundsMethod, LatentParams, NormOrder,
};
use leaky_iv::covariance::{
    compute_kappas, compute_regression_vectors, sample_covariance, CovarianceBlocks, CovarianceOptions, Dataset,
};
use leaky_iv::inference::{bootstrap_bounds, exclusion_test, BootstrapMethod};
use leaky_iv::simulate::{draw_ground_truth, generate_dataset, SigmaZzKind, SimConfig};
use leaky_iv::TauSpec;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Random SPD matrix A·Aᵀ + εI of size (d+2).
fn spd(max_d: usize) -> impl Strategy<Value = CovarianceBlocks> {
    (1..=max_d).prop_flat_map(|d| {
        let k = d + 2;
        (prop::collection::vec(-2.0..2.0f64, k * k), 0.05..1.0f64).prop_map(move |(v, eps)| {
            let a = DMatrix::from_vec(k, k, v);
            CovarianceBlocks::from_matrix(&(&a * a.transpose() + DMatrix::identity(k, k) * eps)).unwrap()
        })
    })
}

fn norm_order() -> impl Strategy<Value = NormOrder> {
    prop_oneof![
        Just(NormOrder::Finite(1.0)),
        (1.01..6.0f64).prop_map(NormOrder::Finite),
        Just(NormOrder::Finite(2.0)),
        Just(NormOrder::Infinity),
    ]
}

fn sim_config() -> impl Strategy<Value = SimConfig> {
    (2usize..=8, any::<bool>(), -0.9..0.9f64, prop::sample::select(vec![0.5, 1.0, 2.0]), prop::sample::select(vec![0.5, 1.0, 2.0]), any::<u64>())
        .prop_map(|(d_z, toeplitz, rho, snr_x, snr_y, seed)| SimConfig {
            d_z,
            sigma_zz_kind: if toeplitz { SigmaZzKind::TOEPLITZ } else { SigmaZzKind::Diagonal },
            rho,
            snr_x,
            snr_y,
            seed,
            ..SimConfig::default()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn partition_round_trip(blocks in spd(6)) {
        let again = CovarianceBlocks::partition(&blocks.to_matrix()).unwrap();
        prop_assert_eq!(again, blocks);
    }

    #[test]
    fn conditional_moments_satisfy_cauchy_schwarz(blocks in spd(6)) {
        let k = compute_kappas(&blocks).unwrap();
        // Strictly PD input ⇒ strictly positive discriminant.
        prop_assert!(k.kappa_xx * k.kappa_yy - k.kappa_xy * k.kappa_xy > 0.0);
        prop_assert!(k.discriminant() > 0.0);
    }

    #[test]
    fn sample_covariance_ignores_row_order(
        d in 1usize..4, n in 8usize..40, seed in any::<u64>(), shift in 1usize..7
    ) {
        let (data, _) = generate_dataset(&SimConfig { d_z: d.max(2), gamma_sparsity: 0.0, seed, ..SimConfig::default() }, n).unwrap();
        let m = data.matrix();
        let rotated = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[((i + shift) % m.nrows(), j)]);
        let a = sample_covariance(&data, &CovarianceOptions::default()).unwrap().to_matrix();
        let b = sample_covariance(&Dataset::from_layout(rotated).unwrap(), &CovarianceOptions::default()).unwrap().to_matrix();
        prop_assert!((a - b).abs().max() < 1e-12);
    }

    #[test]
    fn confounding_map_is_decreasing_and_invertible(blocks in spd(5)) {
        let k = compute_kappas(&blocks).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..1000 {
            let rho = -0.999 + 1.998 * i as f64 / 999.0;
            let theta = ate_from_rho(rho, &k).unwrap();
            prop_assert!(theta < prev);
            prev = theta;
            prop_assert!((rho_from_ate(theta, &k).unwrap() - rho).abs() <= 1e-10);
        }
    }

    #[test]
    fn leakage_is_convex(blocks in spd(6), p in norm_order(), t1 in -10.0..10.0f64, t2 in -10.0..10.0f64, lam in 0.0..1.0f64) {
        let v = compute_regression_vectors(&blocks).unwrap();
        let lhs = leakage_norm(lam * t1 + (1.0 - lam) * t2, &v, p);
        let rhs = lam * leakage_norm(t1, &v, p) + (1.0 - lam) * leakage_norm(t2, &v, p);
        prop_assert!(lhs <= rhs + 1e-12 * rhs.max(1.0));
    }

    #[test]
    fn bounds_nest_in_the_budget(blocks in spd(5), p in norm_order(), a in 1.0..3.0f64, b in 0.0..2.0f64) {
        let g = leakage_geometry(&blocks, p).unwrap();
        let t1 = g.tau_check * a + 1e-3;
        let t2 = t1 + b;
        let small = bounds_from_geometry(g.clone(), t1, BoundsMethod::Auto).unwrap();
        let large = bounds_from_geometry(g.clone(), t2, BoundsMethod::Auto).unwrap();
        prop_assert!(large.theta_minus <= small.theta_minus + 1e-12 && small.theta_plus <= large.theta_plus + 1e-12);
        // Each bound is attained: its leakage equals the budget unless clipped.
        if !small.boundary_clipped {
            for theta in [small.theta_minus, small.theta_plus] {
                prop_assert!((g.leakage(theta) - t1).abs() <= 1e-6 * t1.max(1.0));
            }
        }
    }

    #[test]
    fn closed_form_matches_bisection(blocks in spd(10), extra in 0.01..5.0f64) {
        let g = leakage_geometry(&blocks, NormOrder::Finite(2.0)).unwrap();
        let tau = g.tau_check + extra;
        let a = bounds_from_geometry(g.clone(), tau, BoundsMethod::ClosedForm).unwrap();
        let b = bounds_from_geometry(g, tau, BoundsMethod::Bisection).unwrap();
        prop_assert!((a.theta_minus - b.theta_minus).abs() <= 1e-8 * a.theta_minus.abs().max(1.0));
        prop_assert!((a.theta_plus - b.theta_plus).abs() <= 1e-8 * a.theta_plus.abs().max(1.0));
    }

    #[test]
    fn latent_parameters_reproduce_blocks(blocks in spd(5), rho in -0.99..0.99f64) {
        let beta = compute_regression_vectors(&blocks).unwrap().beta;
        let full = blocks.to_matrix();
        let implied = LatentParams::from_rho(&blocks, rho).unwrap().implied_covariance(&blocks.sigma_zz, &beta);
        prop_assert!((implied - &full).abs().max() <= 1e-8 * full.abs().max());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn population_bounds_are_valid_and_sharp(cfg in sim_config(), frac in 0.0..0.95f64) {
        let truth = draw_ground_truth(&cfg).unwrap();
        let blocks = truth.blocks().unwrap();
        let p = NormOrder::Finite(2.0);
        let g = leakage_geometry(&blocks, p).unwrap();
        let valid = bounds_from_geometry(g.clone(), 1.1 * truth.tau_star_2, BoundsMethod::Auto).unwrap();
        prop_assert!(valid.contains(truth.theta_star), "[{}, {}]", valid.theta_minus, valid.theta_plus);
        // Budgets below the oracle leakage exclude θ*.
        if truth.tau_star_2 > truth.tau_check_2 * (1.0 + 1e-9) {
            let tau = truth.tau_check_2 + frac * (truth.tau_star_2 - truth.tau_check_2);
            let err = bounds_from_geometry(g, tau, BoundsMethod::Auto).unwrap();
            prop_assert!(!err.contains(truth.theta_star));
        }
        // The generator's ρ is the one that maps to θ*.
        let k = compute_kappas(&blocks).unwrap();
        prop_assert!((rho_from_ate(truth.theta_star, &k).unwrap() - cfg.rho).abs() <= 1e-8);
    }

    #[test]
    fn sparsity_is_exact(cfg in sim_config(), sparsity in 0.0..0.9f64) {
        let cfg = SimConfig { gamma_sparsity: sparsity, ..cfg };
        let truth = draw_ground_truth(&cfg).unwrap();
        let zeros = truth.gamma.iter().filter(|&&g| g == 0.0).count();
        prop_assert_eq!(zeros, (sparsity * cfg.d_z as f64).floor() as usize);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn inference_is_reproducible(seed in any::<u64>(), data_seed in 0u64..1000) {
        let (data, truth) = generate_dataset(&SimConfig { rho: 0.3, seed: data_seed, ..SimConfig::default() }, 300).unwrap();
        let a = exclusion_test(&data, 99, seed).unwrap();
        let b = exclusion_test(&data, 99, seed).unwrap();
        prop_assert_eq!(a.p_value.to_bits(), b.p_value.to_bits());
        prop_assert_eq!(a.psi_hat.to_bits(), b.psi_hat.to_bits());
        let spec = TauSpec::scalar(NormOrder::Finite(2.0), 1.5 * truth.tau_star_2);
        let x = bootstrap_bounds(&data, &spec, 199, 0.1, BootstrapMethod::Empirical, seed).unwrap();
        let y = bootstrap_bounds(&data, &spec, 199, 0.1, BootstrapMethod::Empirical, seed).unwrap();
        prop_assert_eq!(x.theta_minus.ci.map(f64::to_bits), y.theta_minus.ci.map(f64::to_bits));
        prop_assert_eq!(x.theta_plus.ci.map(f64::to_bits), y.theta_plus.ci.map(f64::to_bits));
        prop_assert_eq!(x.theta_minus.n_discarded, y.theta_minus.n_discarded);
    }

    #[test]
    fn chain_states_respect_encoded_constraints(seed in any::<u64>(), linear in any::<bool>()) {
        let (data, _) = generate_dataset(&SimConfig { d_z: 3, seed: seed % 100, ..SimConfig::default() }, 80).unwrap();
        let config = BayesConfig {
            tau: 2.0,
            encoding: if linear { GammaEncoding::LinearRadius } else { GammaEncoding::AsPrinted },
            chain: ChainSettings { n_iter: 400, burn_in: 100, adapt_iters: 200, thin: 1 },
            seed,
            ..BayesConfig::default()
        };
        let a = run_mh(&data, &config).unwrap();
        let b = run_mh(&data, &config).unwrap();
        prop_assert_eq!(&a.theta, &b.theta);
        for s in &a.states {
            prop_assert!(s.kappa() > 0.0 && s.kappa() < 1.0);
            prop_assert!(s.rho() > -1.0 && s.rho() < 1.0);
            prop_assert!(s.log_var_x.exp() > 0.0 && s.log_var_y.exp() > 0.0);
            prop_assert!(s.log_var_z.iter().all(|v| v.exp() > 0.0));
            prop_assert!(s.gamma(config.tau, config.encoding).norm() <= config.tau.max(config.tau.sqrt()) + 1e-12);
        }
    }
}
