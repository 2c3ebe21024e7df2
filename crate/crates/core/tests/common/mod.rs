//! Independent oracles and instance generators shared by the integration tests.
#![allow(dead_code)]

use cardsvm::{Dataset, FeatureMask, KernelSpec, ProblemSpec};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Kernel on explicit subvectors, written out without the library's helpers.
pub fn naive_kernel(spec: &KernelSpec, x: &[f64], z: &[f64], selected: &[usize]) -> f64 {
    match *spec {
        KernelSpec::Polynomial { gamma, c, degree } => {
            let dot: f64 = selected.iter().map(|&j| x[j] * z[j]).sum();
            (gamma * dot + c).powi(degree as i32)
        }
        KernelSpec::Gaussian { gamma } => {
            let sq: f64 = selected.iter().map(|&j| (x[j] - z[j]).powi(2)).sum();
            (-gamma * sq).exp()
        }
    }
}

/// Dense `Q_ih = y_i y_h k(x_i[S], x_h[S])`.
pub fn naive_q(d: &Dataset, spec: &KernelSpec, selected: &[usize]) -> Vec<Vec<f64>> {
    let y = d.labels();
    (0..d.n_samples())
        .map(|i| {
            (0..d.n_samples())
                .map(|h| y[i] * y[h] * naive_kernel(spec, d.row(i), d.row(h), selected))
                .collect()
        })
        .collect()
}

pub fn dual_objective(q: &[Vec<f64>], a: &[f64]) -> f64 {
    let quad: f64 = (0..a.len())
        .map(|i| (0..a.len()).map(|h| a[i] * q[i][h] * a[h]).sum::<f64>())
        .sum();
    0.5 * quad - a.iter().sum::<f64>()
}

/// Euclidean projection onto `{0 <= a <= c, y'a = 0}`: the multiplier of the
/// equality constraint is found by bisection.
pub fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |mu: f64| -> Vec<f64> { v.iter().zip(y).map(|(&vi, &yi)| (vi - mu * yi).clamp(0.0, c)).collect() };
    let residual = |mu: f64| -> f64 { at(mu).iter().zip(y).map(|(a, yi)| a * yi).sum() };
    let span = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Certified bound on `f(a) - min f` over the feasible set: the linear
/// minimization over `{0 <= s <= c, y's = 0}` is solved through its
/// one-dimensional dual, whose maximum sits at a breakpoint `mu = g_i y_i`.
pub fn duality_gap(g: &[f64], a: &[f64], y: &[f64], c: f64) -> f64 {
    let dual = |mu: f64| -> f64 { g.iter().zip(y).map(|(gi, yi)| c * (gi - mu * yi).min(0.0)).sum() };
    let lp_min = g.iter().zip(y).map(|(gi, yi)| dual(gi * yi)).fold(f64::NEG_INFINITY, f64::max);
    let linear: f64 = g.iter().zip(a).map(|(gi, ai)| gi * ai).sum();
    linear - lp_min
}

/// Exact minimizer on the face where `a_i = 0` for `at_zero`, `a_i = c` for
/// `at_cap` and the rest is free, found from the equality-constrained KKT
/// system by pseudo-inverse. `None` if the point leaves the box.
fn solve_on_face(q: &[Vec<f64>], y: &[f64], c: f64, at_zero: &[bool], at_cap: &[bool]) -> Option<Vec<f64>> {
    let m = y.len();
    let free: Vec<usize> = (0..m).filter(|&i| !at_zero[i] && !at_cap[i]).collect();
    let k = free.len();
    let mut a: Vec<f64> = (0..m).map(|i| if at_cap[i] { c } else { 0.0 }).collect();
    if k == 0 {
        return Some(a);
    }
    let mut lhs = DMatrix::<f64>::zeros(k + 1, k + 1);
    let mut rhs = DVector::<f64>::zeros(k + 1);
    for (r, &i) in free.iter().enumerate() {
        for (s, &h) in free.iter().enumerate() {
            lhs[(r, s)] = q[i][h];
        }
        lhs[(r, k)] = y[i];
        lhs[(k, r)] = y[i];
        rhs[r] = 1.0 - (0..m).filter(|&h| at_cap[h]).map(|h| q[i][h] * c).sum::<f64>();
    }
    rhs[k] = -(0..m).filter(|&h| at_cap[h]).map(|h| y[h] * c).sum::<f64>();
    let sol = lhs.svd(true, true).solve(&rhs, 1e-12).ok()?;
    for (r, &i) in free.iter().enumerate() {
        if !(sol[r] >= -1e-12 && sol[r] <= c + 1e-12) {
            return None;
        }
        a[i] = sol[r].clamp(0.0, c);
    }
    Some(a)
}

/// Accelerated projected gradient with adaptive restart. Every few hundred
/// steps the face suggested by the iterate is solved exactly; the result is
/// returned once the duality gap certifies `1e-8` accuracy. Unrelated to
/// pair-wise working-set methods.
pub fn projected_gradient_dual(q: &[Vec<f64>], y: &[f64], c: f64) -> (Vec<f64>, f64) {
    let m = y.len();
    let lipschitz = q
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(1e-12f64, f64::max);
    let step = 1.0 / lipschitz;
    let grad = |a: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|i| (0..m).map(|h| q[i][h] * a[h]).sum::<f64>() - 1.0)
            .collect()
    };
    let certified = |a: &[f64]| duality_gap(&grad(a), a, y, c) <= 1e-8;
    let mut x = vec![0.0; m];
    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut fx = dual_objective(q, &x);
    for it in 0..200_000 {
        if it % 10 == 0 && certified(&x) {
            break;
        }
        if it % 200 == 199 {
            let edge = 1e-7 * c.max(1.0);
            let at_zero: Vec<bool> = x.iter().map(|&a| a <= edge).collect();
            let at_cap: Vec<bool> = x.iter().map(|&a| a >= c - edge).collect();
            if let Some(a) = solve_on_face(q, y, c, &at_zero, &at_cap).filter(|a| certified(a)) {
                x = a;
                break;
            }
        }
        let g = grad(&z);
        let trial: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - step * gi).collect();
        let next = project(&trial, y, c);
        let fnext = dual_objective(q, &next);
        let moved = next
            .iter()
            .zip(&x)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        if fnext > fx {
            t = 1.0;
            z = x.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = next
            .iter()
            .zip(&x)
            .map(|(n, o)| n + (t - 1.0) / t_next * (n - o))
            .collect();
        x = next;
        fx = fnext;
        t = t_next;
        if moved < 1e-14 {
            break;
        }
    }
    (x.clone(), dual_objective(q, &x))
}

/// Random data with both classes present.
pub fn random_dataset<R: Rng>(rng: &mut R, m: usize, n: usize) -> Dataset {
    assert!(m >= 2);
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.random_range(-1.5..1.5)).collect())
        .collect();
    let mut labels: Vec<f64> = (0..m).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    labels[0] = 1.0;
    labels[1] = -1.0;
    Dataset::from_rows(rows, labels).unwrap()
}

/// Dual vector in `[0, 1]^m` rescaled so that `y'a = 0`: the heavier class
/// is shrunk to match the lighter one.
pub fn balanced_alpha<R: Rng>(rng: &mut R, y: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = y.iter().map(|_| rng.random_range(0.05..1.0)).collect();
    let pos: f64 = a.iter().zip(y).filter(|(_, &yi)| yi > 0.0).map(|(ai, _)| ai).sum();
    let neg: f64 = a.iter().zip(y).filter(|(_, &yi)| yi < 0.0).map(|(ai, _)| ai).sum();
    let (shrink, factor) = if pos > neg { (1.0, neg / pos) } else { (-1.0, pos / neg) };
    for (ai, &yi) in a.iter_mut().zip(y) {
        if yi == shrink {
            *ai *= factor;
        }
    }
    a
}

/// All subsets of `0..n` as index lists, ordered by bitmask.
pub fn all_subsets(n: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .map(|bits| (0..n).filter(|&j| bits >> j & 1 == 1).collect())
        .collect()
}

/// Every `k`-subset of `0..n`.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    all_subsets(n).into_iter().filter(|s| s.len() == k).collect()
}

/// Brute-force optimum of the full problem, computed through the
/// projected-gradient dual oracle rather than the library solver.
pub fn enumerated_optimum(p: &ProblemSpec) -> (f64, FeatureMask) {
    let n = p.n_features();
    let mut best: Option<(f64, FeatureMask)> = None;
    for s in k_subsets(n, p.budget) {
        let q = naive_q(&p.dataset, &p.kernel, &s);
        let (_, obj) = projected_gradient_dual(&q, p.dataset.labels(), p.cost);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, FeatureMask::from_indices(n, &s).unwrap()));
        }
    }
    best.unwrap()
}

/// Small seeded MINLP instance with a polynomial kernel.
pub fn tiny_problem<R: Rng>(rng: &mut R, m: usize, n: usize, degree: u32) -> ProblemSpec {
    let d = random_dataset(rng, m, n);
    let spec = KernelSpec::polynomial(1.0, 1.0, degree).unwrap();
    ProblemSpec::new(d, spec, 10.0, (n / 2).max(1)).unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
