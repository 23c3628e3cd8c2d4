//! Property tests for the invariants of the model, risk, solvers and support estimators.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use hwf_core::hwf::{init_spiked, run_single, sparsity_score, HwfConfig};
use hwf_core::model::{
    dist, generate_measurements, generate_signal, relative_error, MeasurementSet, SignalModel, SparseSignal,
};
use hwf_core::risk::{empirical_gradient, empirical_risk, population_gradient, population_hwf_step, GradientWorkspace};
use hwf_core::sparta::{hard_threshold, sparta_iterate, SpartaConfig};
use hwf_core::support::{recover_support_one_step, recover_support_topk_marginal};

const GAUSSIAN: SignalModel = SignalModel::Gaussian { normalize: true };

fn instance(model: SignalModel, n: usize, m: usize, k: usize, seed: u64) -> (SparseSignal, MeasurementSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = generate_signal(model, n, k, &mut rng).unwrap();
    let meas = generate_measurements(&s, m, &mut rng).unwrap();
    (s, meas)
}

fn gaussian_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn short_config(max_iters: usize) -> HwfConfig {
    HwfConfig {
        max_iters,
        restarts: 1,
        ..HwfConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dist_is_sign_symmetric(seed in any::<u64>(), n in 2usize..40, k in 1usize..5) {
        let k = k.min(n);
        let (s, _) = instance(GAUSSIAN, n, 1, k, seed);
        let x = gaussian_vec(n, seed ^ 1);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert_eq!(dist(&x, &s).unwrap(), dist(&neg, &s).unwrap());
    }

    #[test]
    fn normalized_signals_have_unit_norm(seed in any::<u64>(), n in 1usize..200, k in 1usize..20) {
        let k = k.min(n);
        let (s, _) = instance(GAUSSIAN, n, 1, k, seed);
        prop_assert!((s.norm() - 1.0).abs() <= 1e-12);
        prop_assert_eq!(s.k(), k);
    }

    #[test]
    fn fixed_max_is_the_maximum(seed in any::<u64>(), k in 2usize..30, t in 0.3f64..1.0) {
        let lo = 1.0 / (k as f64).sqrt();
        // Right at 1/sqrt(k) a Gaussian remainder can almost never stay below x_max.
        let x_max = lo + t * (0.95 - lo).max(0.0);
        let (s, _) = instance(SignalModel::FixedMax(x_max), 500, 1, k, seed);
        prop_assert!((s.x_max() - x_max).abs() <= 1e-12);
        prop_assert!((s.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences(seed in any::<u64>()) {
        let (_, meas) = instance(GAUSSIAN, 10, 20, 3, seed);
        let x = gaussian_vec(10, seed.wrapping_add(7));
        let mut ws = GradientWorkspace::new(&meas);
        let g = empirical_gradient(&x, &meas, &mut ws).unwrap().to_vec();
        let mut err = 0.0;
        let mut size = 0.0;
        for i in 0..10 {
            let h = 1e-6 * x[i].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (empirical_risk(&xp, &meas).unwrap() - empirical_risk(&xm, &meas).unwrap()) / (2.0 * h);
            err += (g[i] - fd) * (g[i] - fd);
            size += fd * fd;
        }
        prop_assert!((err / size).sqrt() <= 1e-5);
    }

    #[test]
    fn gradient_vanishes_at_the_signal(seed in any::<u64>(), n in 2usize..100, m in 1usize..1000, k in 1usize..8) {
        let k = k.min(n);
        let (s, meas) = instance(GAUSSIAN, n, m, k, seed);
        let mut ws = GradientWorkspace::new(&meas);
        let g = empirical_gradient(s.values(), &meas, &mut ws).unwrap();
        prop_assert!(g.iter().all(|v| v.abs() <= 1e-10));
    }

    #[test]
    fn population_step_never_shrinks_small_iterates(seed in any::<u64>(), scale in 1e-4f64..0.57) {
        let (signed, _) = instance(GAUSSIAN, 40, 1, 4, seed);
        let s = SparseSignal::new(signed.values().iter().map(|v| v.abs()).collect()).unwrap();
        // Non-negative x with ‖x‖² = scale² < 1/3.
        let raw: Vec<f64> = gaussian_vec(40, seed ^ 3).iter().map(|v| v.abs()).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let x: Vec<f64> = raw.iter().map(|v| v / norm * scale).collect();
        let next = population_hwf_step(&x, &s, 0.1).unwrap();
        prop_assert!(next.iter().zip(&x).all(|(a, b)| a >= b));
    }

    #[test]
    fn population_step_grows_support_faster(seed in any::<u64>(), c in 1e-6f64..0.09) {
        let (signed, _) = instance(GAUSSIAN, 40, 1, 4, seed);
        let s = SparseSignal::new(signed.values().iter().map(|v| v.abs()).collect()).unwrap();
        // Equal coordinates, so only the (xᵀx*) x*_i term tells them apart.
        let x = vec![c; 40];
        let next = population_hwf_step(&x, &s, 0.1).unwrap();
        let ratio: Vec<f64> = next.iter().map(|v| v / c).collect();
        let min_on = s.support().iter().map(|&i| ratio[i]).fold(f64::INFINITY, f64::min);
        let max_off = (0..40)
            .filter(|i| s.support().binary_search(i).is_err())
            .map(|i| ratio[i])
            .fold(0.0f64, f64::max);
        prop_assert!(min_on > max_off);
    }

    #[test]
    fn negating_the_signal_changes_nothing(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = generate_signal(GAUSSIAN, 30, 3, &mut rng).unwrap();
        let neg = s.negated();
        let pos_meas = generate_measurements(&s, 90, &mut ChaCha8Rng::seed_from_u64(seed ^ 9)).unwrap();
        let neg_meas = generate_measurements(&neg, 90, &mut ChaCha8Rng::seed_from_u64(seed ^ 9)).unwrap();
        prop_assert_eq!(pos_meas.y(), neg_meas.y());

        let cfg = short_config(200);
        let a = run_single(&pos_meas, &cfg, init_spiked(&pos_meas, cfg.alpha, 1).unwrap(), None).unwrap();
        let b = run_single(&neg_meas, &cfg, init_spiked(&neg_meas, cfg.alpha, 1).unwrap(), None).unwrap();
        prop_assert_eq!(&a.x_hat, &b.x_hat);
        prop_assert_eq!(relative_error(&a.x_hat, &s).unwrap(), relative_error(&b.x_hat, &neg).unwrap());

        prop_assert_eq!(
            recover_support_one_step(&pos_meas, 3, 0.1, 0.001).unwrap().indices,
            recover_support_one_step(&neg_meas, 3, 0.1, 0.001).unwrap().indices
        );
        prop_assert_eq!(
            recover_support_topk_marginal(&pos_meas, 3).unwrap().indices,
            recover_support_topk_marginal(&neg_meas, 3).unwrap().indices
        );
    }

    #[test]
    fn rescaling_observations_keeps_the_ranking(seed in any::<u64>(), c in 0.01f64..100.0, k in 1usize..10) {
        let (_, meas) = instance(GAUSSIAN, 60, 120, 4, seed);
        let scaled = meas.with_scaled_observations(c).unwrap();
        let spike = |m: &MeasurementSet| {
            let s = init_spiked(m, 0.001, 1).unwrap();
            s.u().iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0
        };
        prop_assert_eq!(spike(&meas), spike(&scaled));
        prop_assert_eq!(
            recover_support_topk_marginal(&meas, k).unwrap().indices,
            recover_support_topk_marginal(&scaled, k).unwrap().indices
        );
    }

    #[test]
    fn budget_caps_gradient_evaluations(seed in any::<u64>(), budget in 0usize..400) {
        let (_, meas) = instance(GAUSSIAN, 20, 80, 2, seed);
        // k = 2 signals often have a coordinate near 1, where eta = 0.1 is unstable.
        let cfg = HwfConfig { eta: 0.05, risk_stop: 1e-4, record_trace: true, ..short_config(400) };
        let init = || init_spiked(&meas, cfg.alpha, 1).unwrap();
        let full = run_single(&meas, &cfg, init(), None).unwrap();
        let trace = full.trace.unwrap();
        let first_hit = trace.iter().position(|p| p.risk <= cfg.risk_stop).unwrap_or(usize::MAX);
        let capped = run_single(&meas, &HwfConfig { max_iters: budget, ..cfg }, init(), None).unwrap();
        prop_assert_eq!(capped.total_iterations(), budget.min(first_hit));
    }

    #[test]
    fn sparsity_score_is_bounded_and_monotone(seed in any::<u64>(), n in 1usize..60, k1 in 0.01f64..0.5, k2 in 0.01f64..0.5) {
        let x = gaussian_vec(n, seed);
        let (lo, hi) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
        let a = sparsity_score(&x, lo).unwrap();
        let b = sparsity_score(&x, hi).unwrap();
        prop_assert!((1..=n).contains(&a) && (1..=n).contains(&b));
        prop_assert!(b <= a);
    }

    #[test]
    fn hard_threshold_keeps_k_entries_exactly(seed in any::<u64>(), n in 1usize..80, k in 0usize..80) {
        let x = gaussian_vec(n, seed);
        let h = hard_threshold(&x, k);
        prop_assert!(h.iter().filter(|v| **v != 0.0).count() <= k);
        prop_assert!(h.iter().zip(&x).all(|(a, b)| *a == 0.0 || a == b));
    }

    #[test]
    fn sparta_iterate_stays_k_sparse(seed in any::<u64>(), k in 1usize..6) {
        let (_, meas) = instance(GAUSSIAN, 50, 150, 3, seed);
        let x = hard_threshold(&gaussian_vec(50, seed ^ 5), k);
        let next = sparta_iterate(&x, &meas, &SpartaConfig::new(k)).unwrap();
        prop_assert!(next.iter().filter(|v| **v != 0.0).count() <= k);
    }
}

#[test]
fn averaged_gradient_approaches_population_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let s = generate_signal(GAUSSIAN, 20, 4, &mut rng).unwrap();
    let x = gaussian_vec(20, 12).iter().map(|v| 0.3 * v).collect::<Vec<_>>();
    let (batches, m) = (1000, 1000);
    let mut mean = vec![0.0; 20];
    for _ in 0..batches {
        let meas = generate_measurements(&s, m, &mut rng).unwrap();
        let mut ws = GradientWorkspace::new(&meas);
        let g = empirical_gradient(&x, &meas, &mut ws).unwrap();
        mean.iter_mut().zip(g).for_each(|(a, b)| *a += b / batches as f64);
    }
    let pop = population_gradient(&x, &s).unwrap();
    let err: f64 = mean.iter().zip(&pop).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let size: f64 = pop.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(err / size <= 0.05, "relative error {}", err / size);
}
