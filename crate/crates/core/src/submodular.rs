//! Set functions of the beta-subproblem and their maximization.
//!
//! For a fixed dual vector `a` and a feature subset `S`,
//!
//! ```text
//! F(S) = sum_{i,h} a_i a_h y_i y_h k(x_i[S], x_h[S]),     F({}) = 0
//! ```
//!
//! is the quadratic part of the dual objective under mask `S`. With a
//! polynomial kernel `F` is monotone and supermodular, so
//!
//! ```text
//! H(S) = lambda - F([n] \ S),     lambda = F([n])
//! ```
//!
//! is monotone, nonnegative and submodular, and minimizing `F` over `|S| = B`
//! is the same as maximizing `H` over `|S| <= n - B` and taking the complement.
//! The greedy maximizers below work on `H`; the certifiers check the
//! curvature claims numerically on concrete instances.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{FeatureMask, KernelSpec};

/// `F` for one fixed dual vector. Only pairs of samples with nonzero `a_i a_h`
/// are stored; each unordered pair carries its symmetric multiplicity.
#[derive(Clone, Debug)]
pub struct SetFunctionContext {
    spec: KernelSpec,
    alpha: Vec<f64>,
    labels: Vec<f64>,
    n: usize,
    /// Feature-major copy of the data: `columns[j][i] = x_i[j]`.
    columns: Vec<Vec<f64>>,
    pair_i: Vec<usize>,
    pair_h: Vec<usize>,
    /// `a_ih` for `i == h`, `2 a_ih` for `i < h`.
    pair_weight: Vec<f64>,
}

/// Per-pair accumulated kernel sums (`sum_{j in S} x_ij x_hj` or the masked
/// squared distance) for one subset `S`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSums {
    sums: Vec<f64>,
    size: usize,
}

impl PairSums {
    pub fn subset_size(&self) -> usize {
        self.size
    }
}

impl SetFunctionContext {
    pub fn new(d: &Dataset, spec: KernelSpec, alpha: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if alpha.len() != d.n_samples() {
            return Err(Error::domain(format!(
                "alpha has {} entries, dataset has {} samples",
                alpha.len(),
                d.n_samples()
            )));
        }
        let n = d.n_features();
        let columns = (0..n).map(|j| d.column(j)).collect();
        let y = d.labels();
        let support: Vec<usize> = (0..alpha.len()).filter(|&i| alpha[i] != 0.0).collect();
        let (mut pair_i, mut pair_h, mut pair_weight) = (Vec::new(), Vec::new(), Vec::new());
        for (a, &i) in support.iter().enumerate() {
            for &h in &support[a..] {
                let w = alpha[i] * alpha[h] * y[i] * y[h];
                pair_i.push(i);
                pair_h.push(h);
                pair_weight.push(if i == h { w } else { 2.0 * w });
            }
        }
        Ok(SetFunctionContext {
            spec,
            labels: y.to_vec(),
            alpha,
            n,
            columns,
            pair_i,
            pair_h,
            pair_weight,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// `a_i a_h y_i y_h`.
    pub fn weight(&self, i: usize, h: usize) -> f64 {
        self.alpha[i] * self.alpha[h] * self.labels[i] * self.labels[h]
    }

    fn require_polynomial(&self, what: &str) -> Result<()> {
        if self.spec.is_polynomial() {
            Ok(())
        } else {
            Err(Error::domain(format!("{what} is defined for polynomial kernels only")))
        }
    }

    fn check_subset(&self, s: &[usize]) -> Result<()> {
        match s.iter().find(|&&j| j >= self.n) {
            Some(j) => Err(Error::domain(format!("feature {j} out of range for n={}", self.n))),
            None => Ok(()),
        }
    }

    #[inline]
    fn term(&self, j: usize, p: usize) -> f64 {
        let col = &self.columns[j];
        self.spec.term(col[self.pair_i[p]], col[self.pair_h[p]])
    }

    /// Sums for `S`, accumulated over ascending feature index.
    pub fn pair_sums(&self, s: &[usize]) -> PairSums {
        let mut sorted = s.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let sums = (0..self.pair_weight.len())
            .map(|p| sorted.iter().map(|&j| self.term(j, p)).sum())
            .collect();
        PairSums {
            sums,
            size: sorted.len(),
        }
    }

    pub fn mask_sums(&self, mask: &FeatureMask) -> PairSums {
        self.pair_sums(&mask.selected())
    }

    /// `F` of the subset the sums describe.
    pub fn value(&self, ps: &PairSums) -> f64 {
        if ps.size == 0 {
            return 0.0;
        }
        ps.sums
            .iter()
            .zip(&self.pair_weight)
            .map(|(&s, &w)| w * self.spec.finish_sum(s))
            .sum()
    }

    /// `F(S \ remove u add)` from the sums of `S`, assuming `remove` is in `S`
    /// and `add` is not.
    pub fn value_swapped(&self, ps: &PairSums, remove: &[usize], add: &[usize]) -> f64 {
        if ps.size + add.len() == remove.len() {
            return 0.0;
        }
        ps.sums
            .iter()
            .enumerate()
            .map(|(p, &s)| {
                let mut t = s;
                for &j in remove {
                    t -= self.term(j, p);
                }
                for &j in add {
                    t += self.term(j, p);
                }
                self.pair_weight[p] * self.spec.finish_sum(t)
            })
            .sum()
    }

    fn apply(&self, ps: &mut PairSums, remove: Option<usize>, add: Option<usize>) {
        for (p, s) in ps.sums.iter_mut().enumerate() {
            if let Some(j) = remove {
                *s -= self.term(j, p);
            }
            if let Some(j) = add {
                *s += self.term(j, p);
            }
        }
        ps.size = ps.size + add.is_some() as usize - remove.is_some() as usize;
    }
}

/// `F(S)`; zero for the empty set.
pub fn f_value(ctx: &SetFunctionContext, s: &[usize]) -> Result<f64> {
    ctx.check_subset(s)?;
    Ok(ctx.value(&ctx.pair_sums(s)))
}

/// `F(A u {e}) - F(A)`.
pub fn marginal_gain(ctx: &SetFunctionContext, a: &[usize], e: usize) -> Result<f64> {
    let mut with = a.to_vec();
    with.push(e);
    Ok(f_value(ctx, &with)? - f_value(ctx, a)?)
}

/// `lambda = F([n])`.
pub fn lambda_value(ctx: &SetFunctionContext) -> Result<f64> {
    ctx.require_polynomial("lambda")?;
    f_value(ctx, &(0..ctx.n).collect::<Vec<_>>())
}

fn complement(n: usize, s: &[usize]) -> Vec<usize> {
    let mut in_s = vec![false; n];
    for &j in s {
        in_s[j] = true;
    }
    (0..n).filter(|&j| !in_s[j]).collect()
}

/// `H(S) = lambda - F([n] \ S)`.
pub fn h_value(ctx: &SetFunctionContext, s: &[usize]) -> Result<f64> {
    ctx.require_polynomial("H")?;
    ctx.check_subset(s)?;
    Ok(lambda_value(ctx)? - f_value(ctx, &complement(ctx.n, s))?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GreedyResult {
    /// Chosen features in the order they were added.
    pub chosen: Vec<usize>,
    /// `H(chosen)`.
    pub value: f64,
    /// Number of marginal-gain evaluations.
    pub evaluations: usize,
    /// `H` after each addition.
    pub trajectory: Vec<f64>,
}

impl GreedyResult {
    pub fn sorted_set(&self) -> Vec<usize> {
        let mut s = self.chosen.clone();
        s.sort_unstable();
        s
    }
}

/// State of a greedy chain on `H`: the chosen set `S` is tracked through the
/// sums of its complement `R`, since `H(S + e) - H(S) = F(R) - F(R - e)`.
struct GreedyChain<'a> {
    ctx: &'a SetFunctionContext,
    lambda: f64,
    remaining: PairSums,
    f_remaining: f64,
    in_set: Vec<bool>,
    chosen: Vec<usize>,
    trajectory: Vec<f64>,
    evaluations: usize,
}

impl<'a> GreedyChain<'a> {
    fn new(ctx: &'a SetFunctionContext) -> Result<Self> {
        ctx.require_polynomial("greedy maximization of H")?;
        let all: Vec<usize> = (0..ctx.n).collect();
        let remaining = ctx.pair_sums(&all);
        let f_remaining = ctx.value(&remaining);
        Ok(GreedyChain {
            ctx,
            lambda: f_remaining,
            remaining,
            f_remaining,
            in_set: vec![false; ctx.n],
            chosen: Vec::new(),
            trajectory: Vec::new(),
            evaluations: 0,
        })
    }

    fn gain_of(&self, e: usize) -> f64 {
        self.f_remaining - self.ctx.value_swapped(&self.remaining, &[e], &[])
    }

    fn accept(&mut self, e: usize) {
        self.ctx.apply(&mut self.remaining, Some(e), None);
        self.f_remaining = self.ctx.value(&self.remaining);
        self.in_set[e] = true;
        self.chosen.push(e);
        self.trajectory.push(self.lambda - self.f_remaining);
    }

    fn finish(self) -> GreedyResult {
        GreedyResult {
            value: self.lambda - self.f_remaining,
            chosen: self.chosen,
            evaluations: self.evaluations,
            trajectory: self.trajectory,
        }
    }
}

fn check_k(ctx: &SetFunctionContext, k: usize) -> Result<()> {
    if k > ctx.n {
        return Err(Error::domain(format!("k = {k} exceeds n = {}", ctx.n)));
    }
    Ok(())
}

/// Plain greedy on `H` under `|S| <= k`: each round evaluates every remaining
/// feature and adds the largest gain, lowest index on ties.
pub fn simple_greedy_max(ctx: &SetFunctionContext, k: usize) -> Result<GreedyResult> {
    check_k(ctx, k)?;
    let mut chain = GreedyChain::new(ctx)?;
    for _ in 0..k {
        let candidates: Vec<usize> = (0..ctx.n).filter(|&e| !chain.in_set[e]).collect();
        let gains: Vec<f64> = candidates.par_iter().map(|&e| chain.gain_of(e)).collect();
        chain.evaluations += candidates.len();
        let mut best = 0;
        for t in 1..gains.len() {
            if gains[t] > gains[best] {
                best = t;
            }
        }
        chain.accept(candidates[best]);
    }
    Ok(chain.finish())
}

#[derive(Clone, Copy, Debug)]
pub struct LazyGain {
    pub feature: usize,
    pub cached_gain: f64,
    /// Size of the chosen set when `cached_gain` was computed.
    pub freshness: usize,
}

impl PartialEq for LazyGain {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for LazyGain {}

impl PartialOrd for LazyGain {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LazyGain {
    /// Larger gain first, then lower feature index.
    fn cmp(&self, other: &Self) -> Ordering {
        self.cached_gain
            .total_cmp(&other.cached_gain)
            .then_with(|| other.feature.cmp(&self.feature))
    }
}

/// Accelerated greedy on `H`. Cached gains are upper bounds on current gains
/// (diminishing returns), so a popped entry that is up to date beats every
/// stale entry below it and can be accepted without recomputing the rest.
pub fn lazy_greedy_max(ctx: &SetFunctionContext, k: usize) -> Result<GreedyResult> {
    check_k(ctx, k)?;
    let mut chain = GreedyChain::new(ctx)?;
    if k == 0 {
        return Ok(chain.finish());
    }
    let initial: Vec<f64> = (0..ctx.n).into_par_iter().map(|e| chain.gain_of(e)).collect();
    chain.evaluations += ctx.n;
    let mut heap: BinaryHeap<LazyGain> = initial
        .into_iter()
        .enumerate()
        .map(|(feature, cached_gain)| LazyGain {
            feature,
            cached_gain,
            freshness: 0,
        })
        .collect();
    while chain.chosen.len() < k {
        let top = heap.pop().expect("k <= n leaves candidates in the heap");
        let round = chain.chosen.len();
        if top.freshness == round {
            chain.accept(top.feature);
        } else {
            chain.evaluations += 1;
            heap.push(LazyGain {
                cached_gain: chain.gain_of(top.feature),
                freshness: round,
                ..top
            });
        }
    }
    Ok(chain.finish())
}

/// Approximate minimizer of `F` over `|S| = B`: lazy greedy on `H` with
/// `k = n - B`, complemented.
pub fn solve_beta_subproblem(ctx: &SetFunctionContext, budget: usize) -> Result<FeatureMask> {
    if budget > ctx.n {
        return Err(Error::domain(format!("B = {budget} exceeds n = {}", ctx.n)));
    }
    let greedy = lazy_greedy_max(ctx, ctx.n - budget)?;
    let mut bits = vec![true; ctx.n];
    for e in greedy.chosen {
        bits[e] = false;
    }
    Ok(FeatureMask::from_bits(bits))
}

/// Which curvature inequality a certifier checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Curvature {
    /// `Delta_e(A) <= Delta_e(B)` for `A` inside `B`.
    Supermodular,
    /// `Delta_e(A) >= Delta_e(B)` for `A` inside `B`.
    Submodular,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub e: usize,
    pub delta_a: f64,
    pub delta_b: f64,
    /// Amount by which the inequality fails beyond the tolerance.
    pub excess: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModularityReport {
    pub curvature: Curvature,
    pub curvature_holds: bool,
    /// `f(S) <= f(S + e) + tol` on every checked pair.
    pub monotone_holds: bool,
    /// `f(S) >= -tol` on every checked set.
    pub nonnegative_holds: bool,
    pub worst: Option<Violation>,
    /// Curvature violations found, capped at [`MAX_RECORDED_VIOLATIONS`].
    pub violations: Vec<Violation>,
    /// Triples on which the opposite inequality fails, same cap. Nonempty
    /// together with `violations` means `f` is neither sub- nor supermodular.
    pub opposite_violations: Vec<Violation>,
    pub worst_monotone_excess: f64,
    pub triples_checked: usize,
    pub exhaustive: bool,
}

impl ModularityReport {
    pub fn passed(&self) -> bool {
        self.curvature_holds && self.monotone_holds
    }

    pub fn find(&self, a: &[usize], b: &[usize], e: usize) -> Option<&Violation> {
        self.violations.iter().find(|v| v.a == a && v.b == b && v.e == e)
    }

    pub fn find_opposite(&self, a: &[usize], b: &[usize], e: usize) -> Option<&Violation> {
        self.opposite_violations
            .iter()
            .find(|v| v.a == a && v.b == b && v.e == e)
    }
}

pub const MAX_RECORDED_VIOLATIONS: usize = 1000;
/// Largest `n` certified exhaustively; larger instances are sampled.
pub const EXHAUSTIVE_LIMIT: usize = 12;
pub const SAMPLED_TRIPLES: usize = 200;

fn bits_to_vec(bits: u64) -> Vec<usize> {
    (0..64).filter(|&j| bits >> j & 1 == 1).collect()
}

fn scaled(tol: f64, values: &[f64]) -> f64 {
    tol * values.iter().fold(1.0f64, |m, v| m.max(v.abs()))
}

/// Walks `(A, B, e)` triples with `A` inside `B`, `e` outside `B`, exhaustively
/// for small `n` or by seeded sampling otherwise, and checks the curvature
/// inequality plus monotonicity and nonnegativity of `f`.
fn certify_with(
    n: usize,
    f: &(dyn Fn(u64) -> f64 + Sync),
    curvature: Curvature,
    tol: f64,
) -> ModularityReport {
    let mut report = ModularityReport {
        curvature,
        curvature_holds: true,
        monotone_holds: true,
        nonnegative_holds: true,
        worst: None,
        violations: Vec::new(),
        opposite_violations: Vec::new(),
        worst_monotone_excess: 0.0,
        triples_checked: 0,
        exhaustive: n <= EXHAUSTIVE_LIMIT,
    };
    let check = |report: &mut ModularityReport, fa: f64, fae: f64, fb: f64, fbe: f64, a: u64, b: u64, e: usize| {
        report.triples_checked += 1;
        let (da, db) = (fae - fa, fbe - fb);
        let slack = scaled(tol, &[fa, fae, fb, fbe]);
        let (excess, opposite) = match curvature {
            Curvature::Supermodular => (da - db - slack, db - da - slack),
            Curvature::Submodular => (db - da - slack, da - db - slack),
        };
        if opposite > 0.0 && report.opposite_violations.len() < MAX_RECORDED_VIOLATIONS {
            report.opposite_violations.push(Violation {
                a: bits_to_vec(a),
                b: bits_to_vec(b),
                e,
                delta_a: da,
                delta_b: db,
                excess: opposite,
            });
        }
        if excess > 0.0 {
            report.curvature_holds = false;
            let v = Violation {
                a: bits_to_vec(a),
                b: bits_to_vec(b),
                e,
                delta_a: da,
                delta_b: db,
                excess,
            };
            if report.worst.as_ref().is_none_or(|w| excess > w.excess) {
                report.worst = Some(v.clone());
            }
            if report.violations.len() < MAX_RECORDED_VIOLATIONS {
                report.violations.push(v);
            }
        }
    };
    let check_pair = |report: &mut ModularityReport, fs: f64, fse: f64| {
        let excess = fs - fse - scaled(tol, &[fs, fse]);
        if excess > 0.0 {
            report.monotone_holds = false;
            report.worst_monotone_excess = report.worst_monotone_excess.max(excess);
        }
        if fs < -scaled(tol, &[fs]) {
            report.nonnegative_holds = false;
        }
    };

    if report.exhaustive {
        let full = (1u64 << n) - 1;
        let values: Vec<f64> = (0..=full).into_par_iter().map(f).collect();
        for b in 0..=full {
            for e in (0..n).filter(|&e| b >> e & 1 == 0) {
                let be = b | 1 << e;
                check_pair(&mut report, values[b as usize], values[be as usize]);
                // every submask a of b, including the empty set
                let mut a = b;
                loop {
                    let ae = a | 1 << e;
                    check(
                        &mut report,
                        values[a as usize],
                        values[ae as usize],
                        values[b as usize],
                        values[be as usize],
                        a,
                        b,
                        e,
                    );
                    if a == 0 {
                        break;
                    }
                    a = (a - 1) & b;
                }
            }
        }
        if values[full as usize] < -scaled(tol, &[values[full as usize]]) {
            report.nonnegative_holds = false;
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0fc0_ffee);
        let mut drawn = 0;
        while drawn < SAMPLED_TRIPLES {
            let b: u64 = (0..n).filter(|_| rng.random_bool(0.5)).fold(0, |acc, j| acc | 1 << j);
            let outside: Vec<usize> = (0..n).filter(|&j| b >> j & 1 == 0).collect();
            if outside.is_empty() {
                continue;
            }
            let e = outside[rng.random_range(0..outside.len())];
            let a = bits_to_vec(b)
                .into_iter()
                .filter(|_| rng.random_bool(0.5))
                .fold(0u64, |acc, j| acc | 1 << j);
            let (fa, fae, fb, fbe) = (f(a), f(a | 1 << e), f(b), f(b | 1 << e));
            check_pair(&mut report, fa, fae);
            check_pair(&mut report, fb, fbe);
            check(&mut report, fa, fae, fb, fbe, a, b, e);
            drawn += 1;
        }
    }
    report
}

fn subset_value(ctx: &SetFunctionContext, bits: u64) -> f64 {
    ctx.value(&ctx.pair_sums(&bits_to_vec(bits)))
}

fn check_certifiable(ctx: &SetFunctionContext) -> Result<()> {
    if ctx.n > 63 {
        return Err(Error::domain("certification supports at most 63 features"));
    }
    Ok(())
}

/// Checks that `F` is supermodular and monotone nondecreasing.
pub fn certify_supermodular(ctx: &SetFunctionContext, tol: f64) -> Result<ModularityReport> {
    check_certifiable(ctx)?;
    Ok(certify_with(ctx.n, &|s| subset_value(ctx, s), Curvature::Supermodular, tol))
}

/// Checks that `F` is submodular (and reports monotonicity).
pub fn certify_submodular(ctx: &SetFunctionContext, tol: f64) -> Result<ModularityReport> {
    check_certifiable(ctx)?;
    Ok(certify_with(ctx.n, &|s| subset_value(ctx, s), Curvature::Submodular, tol))
}

/// Checks that `H` is submodular, monotone nondecreasing and nonnegative.
pub fn certify_h_submodular(ctx: &SetFunctionContext, tol: f64) -> Result<ModularityReport> {
    check_certifiable(ctx)?;
    let lambda = lambda_value(ctx)?;
    let full = if ctx.n == 64 { u64::MAX } else { (1u64 << ctx.n) - 1 };
    Ok(certify_with(
        ctx.n,
        &|s| lambda - subset_value(ctx, full & !s),
        Curvature::Submodular,
        tol,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn appendix() -> SetFunctionContext {
        let d = Dataset::from_rows(
            vec![vec![0.0, 1.0, -0.5], vec![-1.0, -1.0, -1.0], vec![0.0, -1.0, 0.0]],
            vec![-1.0, 1.0, 1.0],
        )
        .unwrap();
        SetFunctionContext::new(&d, KernelSpec::gaussian(1.0).unwrap(), vec![1.0, 0.5, 0.5]).unwrap()
    }

    fn poly_ctx() -> SetFunctionContext {
        let d = Dataset::from_rows(
            vec![
                vec![0.2, -1.0, 0.7, 1.1],
                vec![1.3, 0.4, -0.2, 0.0],
                vec![-0.6, 0.9, 0.5, -1.4],
                vec![0.8, -0.3, -1.2, 0.6],
            ],
            vec![1.0, -1.0, 1.0, -1.0],
        )
        .unwrap();
        SetFunctionContext::new(&d, KernelSpec::polynomial(1.0, 1.0, 3).unwrap(), vec![0.4, 0.9, 0.7, 0.2]).unwrap()
    }

    #[test]
    fn empty_set_is_zero() {
        assert_eq!(f_value(&appendix(), &[]).unwrap(), 0.0);
        assert_eq!(h_value(&poly_ctx(), &[]).unwrap(), 0.0);
    }

    #[test]
    fn appendix_values() {
        let ctx = appendix();
        for (s, want) in [(&[0][..], 0.3161), (&[1], 1.9634), (&[0, 1], 1.6589), (&[2], 0.1263), (&[0, 2], 0.5024)] {
            assert!((f_value(&ctx, s).unwrap() - want).abs() < 5e-4, "F({s:?})");
        }
    }

    #[test]
    fn gaussian_rejected_for_h() {
        let ctx = appendix();
        assert!(lambda_value(&ctx).is_err());
        assert!(h_value(&ctx, &[0]).is_err());
        assert!(lazy_greedy_max(&ctx, 1).is_err());
    }

    #[test]
    fn lambda_is_f_of_everything_and_h_of_everything() {
        let ctx = poly_ctx();
        let lambda = lambda_value(&ctx).unwrap();
        assert_eq!(lambda, f_value(&ctx, &[0, 1, 2, 3]).unwrap());
        assert_eq!(h_value(&ctx, &[0, 1, 2, 3]).unwrap(), lambda);
    }

    #[test]
    fn zero_columns_give_zero_lambda() {
        let d = Dataset::from_rows(vec![vec![0.0, 0.0], vec![0.0, 0.0]], vec![1.0, -1.0]).unwrap();
        let ctx = SetFunctionContext::new(&d, KernelSpec::polynomial(1.0, 0.0, 2).unwrap(), vec![0.3, 0.8]).unwrap();
        assert_eq!(lambda_value(&ctx).unwrap(), 0.0);
    }

    #[test]
    fn greedy_edge_cases() {
        let ctx = poly_ctx();
        let none = lazy_greedy_max(&ctx, 0).unwrap();
        assert!(none.chosen.is_empty());
        assert_eq!(none.value, 0.0);
        assert_eq!(none.evaluations, 0);
        let all = lazy_greedy_max(&ctx, 4).unwrap();
        assert_eq!(all.value, lambda_value(&ctx).unwrap());
        let one = simple_greedy_max(&ctx, 1).unwrap();
        let singles: Vec<f64> = (0..4).map(|j| h_value(&ctx, &[j]).unwrap()).collect();
        let best = (0..4).fold(0, |b, j| if singles[j] > singles[b] { j } else { b });
        assert_eq!(one.chosen, vec![best]);
        assert!(simple_greedy_max(&ctx, 5).is_err());
    }

    #[test]
    fn lazy_matches_simple() {
        let ctx = poly_ctx();
        for k in 0..=4 {
            let lazy = lazy_greedy_max(&ctx, k).unwrap();
            let simple = simple_greedy_max(&ctx, k).unwrap();
            assert_eq!(lazy.chosen, simple.chosen);
            assert!(lazy.evaluations <= simple.evaluations);
        }
    }

    #[test]
    fn beta_subproblem_complement_identity() {
        let ctx = poly_ctx();
        for b in 1..=4 {
            let mask = solve_beta_subproblem(&ctx, b).unwrap();
            assert_eq!(mask.cardinality(), b);
            let greedy = lazy_greedy_max(&ctx, 4 - b).unwrap();
            let f = f_value(&ctx, &mask.selected()).unwrap();
            let lambda = lambda_value(&ctx).unwrap();
            assert!((f - (lambda - greedy.value)).abs() <= 1e-9 * lambda.abs().max(1.0));
        }
        assert_eq!(solve_beta_subproblem(&ctx, 4).unwrap(), FeatureMask::full(4));
    }

    #[test]
    fn swapped_value_matches_fresh() {
        let ctx = poly_ctx();
        let ps = ctx.pair_sums(&[0, 2]);
        let swapped = ctx.value_swapped(&ps, &[2], &[3]);
        let fresh = f_value(&ctx, &[0, 3]).unwrap();
        assert!((swapped - fresh).abs() < 1e-12 * fresh.abs().max(1.0));
        assert_eq!(ctx.value_swapped(&ps, &[0, 2], &[]), 0.0);
    }

    #[test]
    fn polynomial_certificates_pass() {
        let ctx = poly_ctx();
        let sup = certify_supermodular(&ctx, 1e-9).unwrap();
        assert!(sup.passed(), "{:?}", sup.worst);
        assert!(sup.exhaustive);
        let h = certify_h_submodular(&ctx, 1e-9).unwrap();
        assert!(h.passed() && h.nonnegative_holds);
    }
}
