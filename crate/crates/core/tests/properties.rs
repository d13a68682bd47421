use lul_core::bounds::{self, DiscreteDistribution};
use lul_core::engine::{self, OptimizerKind, RunConfig, RunMode, ServerOptSpec};
use lul_core::matrix::{self, SpectrumBounds, SymmetricMatrix};
use lul_core::verify::{self, InstanceShape};
use lul_core::{popfile, rng, world, WeightScheme};
use proptest::prelude::*;

fn instance(seed: u64, max_dim: usize) -> verify::Instance {
    let shape = InstanceShape { max_dim, max_clients: 5, max_k: 30, examples_per_client: None };
    let mut s = rng::seeded(seed);
    verify::random_instance(&shape, &mut s, seed).unwrap()
}

fn symmetric(dim: usize, raw: &[f64]) -> SymmetricMatrix {
    let lower: Vec<f64> = raw.iter().take(dim * (dim + 1) / 2).copied().collect();
    SymmetricMatrix::from_lower_triangle(dim, &lower).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eigh_reconstructs_and_is_orthonormal(dim in 1usize..9, raw in prop::collection::vec(-5.0f64..5.0, 45)) {
        let a = symmetric(dim, &raw);
        let e = a.eigh().unwrap();
        prop_assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let back = e.reconstruct();
        let diff = back.sub(&a).unwrap().as_matrix().frobenius_norm();
        prop_assert!(diff <= 1e-10 * (1.0 + a.as_matrix().frobenius_norm()));
        let v = &e.eigenvectors;
        let vtv = v.transpose().matmul(v).unwrap();
        let off = vtv.sub(&matrix::Matrix::identity(dim)).unwrap().frobenius_norm();
        prop_assert!(off <= 1e-12 * dim as f64);
    }

    #[test]
    fn eigenvalues_are_rotation_invariant(dim in 1usize..7, seed in any::<u64>(), raw in prop::collection::vec(-3.0f64..3.0, 28)) {
        let a = symmetric(dim, &raw);
        let r = matrix::random_orthonormal(dim, &mut rng::seeded(seed)).unwrap();
        let rotated = r.matmul(a.as_matrix()).unwrap().matmul(&r.transpose()).unwrap().symmetrize();
        let (x, y) = (a.eigh().unwrap().eigenvalues, rotated.eigh().unwrap().eigenvalues);
        for (p, q) in x.iter().zip(&y) {
            prop_assert!((p - q).abs() <= 1e-10 * (1.0 + p.abs()));
        }
    }

    #[test]
    fn random_spd_respects_bounds(dim in 2usize..12, mu in 0.1f64..5.0, width in 0.0f64..50.0, seed in any::<u64>()) {
        let b = SpectrumBounds::new(mu, mu + width, 1.0).unwrap();
        let a = matrix::random_spd_with_spectrum(dim, &b, seed).unwrap();
        let e = a.eigh().unwrap();
        prop_assert!(e.min() >= mu - 1e-9 && e.max() <= mu + width + 1e-9);
    }

    #[test]
    fn distortion_commutes_and_maps_eigenvalues(seed in any::<u64>()) {
        let inst = instance(seed, 8);
        for client in inst.pop.clients() {
            let q = world::distortion_matrix(client, inst.alpha, inst.gamma, &inst.theta).unwrap();
            prop_assert!(q.commutator_norm(client.a_matrix()).unwrap() <= 1e-10);
            let qe = q.eigh().unwrap();
            prop_assert!(qe.min() >= -1e-12 * qe.max().abs());
            let got = world::client_surrogate_hessian(client, inst.alpha, inst.gamma, &inst.theta).unwrap().eigh().unwrap().eigenvalues;
            let mut want: Vec<f64> = client.spectrum().iter().map(|&l| inst.theta.hessian_eigenvalue(l, inst.alpha, inst.gamma)).collect();
            want.sort_by(f64::total_cmp);
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g - w).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn small_gamma_recovers_weighted_average_hessian(seed in any::<u64>()) {
        let inst = instance(seed, 6);
        let mut limit = SymmetricMatrix::scaled_identity(inst.pop.dim(), 0.0);
        for (c, &p) in inst.pop.clients().iter().zip(inst.pop.weights()) {
            limit = limit.add(&c.a_matrix().scale(p)).unwrap();
        }
        let limit = limit.scale(inst.theta.weight());
        let gap = |g: f64| world::surrogate_hessian(&inst.pop, inst.alpha, g, &inst.theta).unwrap().sub(&limit).unwrap().as_matrix().frobenius_norm();
        let g0 = 0.1 / (inst.pop.max_eigenvalue() + inst.alpha) / inst.theta.size() as f64;
        let mut prev = gap(g0);
        for i in 1..8 {
            let next = gap(g0 / f64::from(1 << i));
            prop_assert!(next <= prev * 0.6 + 1e-12, "gap {} after {}", next, prev);
            prev = next;
        }
        prop_assert!(gap(0.0) <= 1e-12 * (1.0 + limit.as_matrix().frobenius_norm()));
    }

    #[test]
    fn exact_kappa_within_closed_form_bound(seed in any::<u64>(), k in 1u64..60, fed in any::<bool>(), u in 0.0f64..0.99) {
        let inst = instance(seed, 6);
        let ell = inst.pop.bounds().ell;
        let (theta, gamma) = if fed {
            (WeightScheme::first_k(k).unwrap(), u / (ell + inst.alpha))
        } else {
            (WeightScheme::k_only(k).unwrap(), u / (k as f64 * ell + inst.alpha))
        };
        let r = bounds::kappa_exact(&inst.pop, inst.alpha, gamma, &theta).unwrap();
        let bound = r.kappa_bound.unwrap();
        prop_assert!(r.kappa_exact <= bound * (1.0 + 1e-12) + 1e-9);
        let kappa0 = inst.pop.bounds().condition_number();
        prop_assert!(bound <= kappa0 * (1.0 + 1e-12));
        for client in inst.pop.clients() {
            let d = bounds::distortion_condition(client, inst.alpha, gamma, &theta).unwrap();
            prop_assert!(d <= kappa0 / bound * (1.0 + 1e-12) + 1e-9);
        }
    }

    #[test]
    fn fedavg_kappa_bound_decreases_in_k_and_gamma(ell in 1.0f64..100.0, alpha in 0.0f64..2.0, u in 0.01f64..0.9, k in 1u64..500) {
        let gamma = u / (ell + alpha);
        let base = bounds::kappa_bound_fedavg(1.0, ell, alpha, gamma, k).unwrap();
        prop_assert!(bounds::kappa_bound_fedavg(1.0, ell, alpha, gamma, k + 1).unwrap() <= base * (1.0 + 1e-12));
        prop_assert!(bounds::kappa_bound_fedavg(1.0, ell, alpha, gamma * 1.05, k).unwrap() <= base * (1.0 + 1e-12));
        prop_assert!(base >= 1.0 && base <= ell * (1.0 + 1e-12));
    }

    #[test]
    fn mad_bound_holds(raw in prop::collection::vec((-10.0f64..10.0, 0.01f64..1.0), 1..12)) {
        let total: f64 = raw.iter().map(|r| r.1).sum();
        let values = raw.iter().map(|r| r.0).collect();
        let probs = raw.iter().map(|r| r.1 / total).collect();
        let dist = DiscreteDistribution::new(values, probs).unwrap();
        prop_assert!(bounds::mad(&dist) <= bounds::mad_bound(&dist) + 1e-12);
    }

    #[test]
    fn mad_bound_is_attained_on_two_points(a in -10.0f64..10.0, gap in 0.1f64..10.0, p in 0.01f64..0.99) {
        let dist = DiscreteDistribution::new(vec![a, a + gap], vec![p, 1.0 - p]).unwrap();
        prop_assert!((bounds::mad(&dist) - bounds::mad_bound(&dist)).abs() <= 1e-12);
    }

    #[test]
    fn momentum_beats_plain(kappa in 1.0001f64..1e8) {
        let plain = bounds::rho_from_kappa(kappa, OptimizerKind::Plain).unwrap();
        let nest = bounds::rho_from_kappa(kappa, OptimizerKind::Nesterov).unwrap();
        let hb = bounds::rho_from_kappa(kappa, OptimizerKind::HeavyBall).unwrap();
        prop_assert!(hb < nest && nest < plain);
    }

    #[test]
    fn client_update_matches_surrogate_gradient(seed in any::<u64>()) {
        let inst = instance(seed, 10);
        let cfg = RunConfig::deterministic(&inst.pop, inst.alpha, inst.gamma, inst.theta.clone(), 1);
        let x = rng::standard_normal_vec(&mut rng::seeded(seed ^ 1), inst.pop.dim());
        let mut s = rng::seeded(0);
        for client in inst.pop.clients() {
            let got = engine::client_update(client, &x, &cfg, &mut s).unwrap();
            let want = world::client_surrogate_gradient(client, &x, inst.alpha, inst.gamma, &inst.theta).unwrap();
            prop_assert!(matrix::distance(&got, &want) <= 1e-10);
        }
    }

    #[test]
    fn maml_output_is_odd_scheme_update(seed in any::<u64>(), k in 1u64..20, proximal in any::<bool>(), u in 0.0f64..0.99) {
        let inst = instance(seed, 10);
        let alpha = if proximal { 0.5 } else { 0.0 };
        let gamma = u / (inst.pop.max_eigenvalue() + alpha);
        let client = &inst.pop.clients()[0];
        let x = rng::standard_normal_vec(&mut rng::seeded(seed ^ 2), inst.pop.dim());
        let got = engine::client_update_maml(client, &x, k, gamma, alpha).unwrap();
        let cfg = RunConfig::deterministic(&inst.pop, alpha, gamma, WeightScheme::maml(k).unwrap(), 1);
        let want = engine::client_update(client, &x, &cfg, &mut rng::seeded(0)).unwrap();
        prop_assert!(matrix::distance(&got, &want) <= 1e-10);
    }

    #[test]
    fn population_file_round_trip_is_exact(seed in any::<u64>()) {
        let inst = instance(seed, 6);
        let text = popfile::write_population(&inst.pop);
        let back = popfile::read_population(&text).unwrap();
        prop_assert_eq!(back.weights(), inst.pop.weights());
        for (a, b) in back.clients().iter().zip(inst.pop.clients()) {
            prop_assert_eq!(a.a_matrix(), b.a_matrix());
            prop_assert_eq!(a.center(), b.center());
        }
        prop_assert_eq!(popfile::write_population(&back), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn heavy_ball_without_momentum_is_plain(seed in any::<u64>(), u in 0.05f64..0.95) {
        let inst = instance(seed, 6);
        let (_, l_tilde) = bounds::surrogate_spectrum(&inst.pop, inst.alpha, inst.gamma, &inst.theta).unwrap();
        let step = 2.0 * u / l_tilde;
        let cfg = RunConfig::deterministic(&inst.pop, inst.alpha, inst.gamma, inst.theta.clone(), 25);
        let x0 = vec![1.0; inst.pop.dim()];
        let plain = engine::run(&inst.pop, &x0, &cfg, &ServerOptSpec::plain(step)).unwrap();
        let hb = ServerOptSpec { kind: OptimizerKind::HeavyBall, step, momentum: 0.0, auto_tune: false };
        let hb = engine::run(&inst.pop, &x0, &cfg, &hb).unwrap();
        prop_assert_eq!(plain.iterates, hb.iterates);
    }

    #[test]
    fn stochastic_runs_are_seed_deterministic(seed in any::<u64>()) {
        let shape = InstanceShape { max_dim: 4, max_clients: 6, max_k: 5, examples_per_client: Some(3) };
        let inst = verify::random_instance(&shape, &mut rng::seeded(seed), seed).unwrap();
        let mut cfg = RunConfig::deterministic(&inst.pop, inst.alpha, inst.gamma, inst.theta.clone(), 12);
        cfg.mode = RunMode::Stochastic;
        cfg.clients_per_round = inst.pop.len().div_ceil(2);
        cfg.batch_size = 2;
        cfg.seed = seed;
        let x0 = vec![0.5; inst.pop.dim()];
        let opt = ServerOptSpec::plain(0.1);
        let a = engine::run(&inst.pop, &x0, &cfg, &opt).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| engine::run(&inst.pop, &x0, &cfg, &opt)).unwrap();
        prop_assert_eq!(&a.iterates, &b.iterates);
        cfg.seed = seed.wrapping_add(1);
        let c = engine::run(&inst.pop, &x0, &cfg, &opt).unwrap();
        prop_assert_ne!(&a.iterates, &c.iterates);
    }
}
