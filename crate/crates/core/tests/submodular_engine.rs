mod common;

use cardsvm::kernel::homogenize;
use cardsvm::submodular::{
    certify_h_submodular, certify_supermodular, f_value, h_value, lambda_value, lazy_greedy_max, simple_greedy_max,
    solve_beta_subproblem, SetFunctionContext, SAMPLED_TRIPLES,
};
use cardsvm::{Dataset, KernelSpec};
use common::{all_subsets, balanced_alpha, k_subsets, naive_kernel, random_dataset};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `F(S)` summed directly over all sample pairs.
fn naive_f(d: &Dataset, spec: &KernelSpec, alpha: &[f64], s: &[usize]) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let y = d.labels();
    let m = d.n_samples();
    (0..m)
        .flat_map(|i| (0..m).map(move |h| (i, h)))
        .map(|(i, h)| alpha[i] * alpha[h] * y[i] * y[h] * naive_kernel(spec, d.row(i), d.row(h), s))
        .sum()
}

fn polynomial_context(seed: u64, m: usize, n: usize) -> (Dataset, KernelSpec, SetFunctionContext) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = random_dataset(&mut rng, m, n);
    let spec = KernelSpec::polynomial(rng.random_range(0.1..1.0), rng.random_range(0.0..2.0), rng.random_range(1..=4)).unwrap();
    let alpha = balanced_alpha(&mut rng, d.labels());
    let ctx = SetFunctionContext::new(&d, spec, alpha).unwrap();
    (d, spec, ctx)
}

#[test]
fn f_matches_direct_summation() {
    for seed in 0..10u64 {
        let (d, spec, ctx) = polynomial_context(500 + seed, 8, 5);
        for s in all_subsets(5) {
            let (a, b) = (f_value(&ctx, &s).unwrap(), naive_f(&d, &spec, ctx.alpha(), &s));
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{s:?}: {a} vs {b}");
        }
        assert_eq!(lambda_value(&ctx).unwrap(), f_value(&ctx, &[0, 1, 2, 3, 4]).unwrap());
    }
}

#[test]
fn h_is_the_complement_identity() {
    for seed in 0..10u64 {
        let (_, _, ctx) = polynomial_context(510 + seed, 10, 6);
        let lambda = lambda_value(&ctx).unwrap();
        assert_eq!(h_value(&ctx, &[]).unwrap(), 0.0);
        assert!((h_value(&ctx, &[0, 1, 2, 3, 4, 5]).unwrap() - lambda).abs() <= 1e-12 * lambda.abs().max(1.0));
        for s in all_subsets(6) {
            let rest: Vec<usize> = (0..6).filter(|j| !s.contains(j)).collect();
            let f = f_value(&ctx, &s).unwrap();
            let via_h = lambda - h_value(&ctx, &rest).unwrap();
            assert!((f - via_h).abs() <= 1e-9 * f.abs().max(via_h.abs()).max(1.0));
            assert!(h_value(&ctx, &s).unwrap() >= -1e-9 * lambda.abs());
        }
    }
}

#[test]
fn sampled_certificates_beyond_the_exhaustive_limit() {
    let (_, _, ctx) = polynomial_context(520, 12, 16);
    let sup = certify_supermodular(&ctx, 1e-9).unwrap();
    assert!(sup.passed(), "{:?}", sup.worst);
    assert!(!sup.exhaustive);
    assert!(sup.triples_checked >= SAMPLED_TRIPLES);
    let sub = certify_h_submodular(&ctx, 1e-9).unwrap();
    assert!(sub.passed(), "{:?}", sub.worst);
}

#[test]
fn homogenized_f_agrees_on_shifted_subsets() {
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(530 + seed);
        let d = random_dataset(&mut rng, 8, 5);
        let spec = KernelSpec::polynomial(0.1, 1.0 + seed as f64, 2 + seed as u32 % 2).unwrap();
        let alpha = balanced_alpha(&mut rng, d.labels());
        let ctx = SetFunctionContext::new(&d, spec, alpha.clone()).unwrap();
        let (dh, sh) = homogenize(&d, &spec).unwrap();
        let hctx = SetFunctionContext::new(&dh, sh, alpha).unwrap();
        for s in all_subsets(5).into_iter().filter(|s| !s.is_empty()) {
            let shifted: Vec<usize> = std::iter::once(0).chain(s.iter().map(|j| j + 1)).collect();
            let (a, b) = (f_value(&ctx, &s).unwrap(), f_value(&hctx, &shifted).unwrap());
            assert!((a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0));
        }
    }
}

#[test]
fn greedy_bound_and_lazy_agreement() {
    let bound = 1.0 - (-1.0f64).exp();
    for seed in 0..20u64 {
        let n = 4 + seed as usize % 7;
        let (_, _, ctx) = polynomial_context(540 + seed, 9, n);
        for k in 0..=n {
            let simple = simple_greedy_max(&ctx, k).unwrap();
            let lazy = lazy_greedy_max(&ctx, k).unwrap();
            assert_eq!(simple.sorted_set(), lazy.sorted_set(), "seed {seed} k {k}");
            assert!(lazy.evaluations <= simple.evaluations);
            assert!(simple.trajectory.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0)));
            let best = k_subsets(n, k)
                .iter()
                .map(|s| h_value(&ctx, s).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(simple.value >= bound * best - 1e-9 * best.abs().max(1.0));
        }
        let full = lazy_greedy_max(&ctx, n).unwrap();
        let lambda = lambda_value(&ctx).unwrap();
        assert!((full.value - lambda).abs() <= 1e-9 * lambda.abs().max(1.0));
    }
}

#[test]
fn beta_subproblem_returns_the_complement_of_the_greedy_set() {
    for seed in 0..10u64 {
        let (_, _, ctx) = polynomial_context(560 + seed, 10, 7);
        let budget = 1 + seed as usize % 7;
        let mask = solve_beta_subproblem(&ctx, budget).unwrap();
        assert_eq!(mask.cardinality(), budget);
        let greedy = lazy_greedy_max(&ctx, 7 - budget).unwrap();
        let f = f_value(&ctx, &mask.selected()).unwrap();
        let via_h = lambda_value(&ctx).unwrap() - greedy.value;
        assert!((f - via_h).abs() <= 1e-9 * f.abs().max(1.0));
        assert!(mask.unselected().iter().all(|j| greedy.chosen.contains(j)));
    }
    let (_, _, ctx) = polynomial_context(570, 6, 4);
    assert_eq!(solve_beta_subproblem(&ctx, 4).unwrap().cardinality(), 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn f_is_nonnegative_for_both_kernels(seed in any::<u64>(), gaussian in any::<bool>(), bits in prop::collection::vec(prop::bool::ANY, 6)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_dataset(&mut rng, 8, 6);
        let spec = if gaussian {
            KernelSpec::gaussian(rng.random_range(0.1..2.0)).unwrap()
        } else {
            KernelSpec::polynomial(rng.random_range(0.1..1.0), rng.random_range(0.0..2.0), rng.random_range(1..=4)).unwrap()
        };
        let alpha: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..3.0)).collect();
        let norm2: f64 = alpha.iter().map(|a| a * a).sum();
        let ctx = SetFunctionContext::new(&d, spec, alpha).unwrap();
        let s: Vec<usize> = (0..6).filter(|&j| bits[j]).collect();
        prop_assert!(f_value(&ctx, &s).unwrap() >= -1e-9 * norm2);
    }

    #[test]
    fn polynomial_certificates_hold(seed in any::<u64>(), n in 2usize..8) {
        let (_, _, ctx) = polynomial_context(seed, 7, n);
        let sup = certify_supermodular(&ctx, 1e-9).unwrap();
        prop_assert!(sup.passed() && sup.exhaustive, "{:?}", sup.worst);
        let sub = certify_h_submodular(&ctx, 1e-9).unwrap();
        prop_assert!(sub.passed(), "{:?}", sub.worst);
    }
}
