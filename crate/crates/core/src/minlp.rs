//! The mixed-integer problem over `(alpha, beta)` and the fix-`beta`,
//! solve-for-`alpha` primitive every search algorithm is built on.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{build_q, masked_with_indices, FeatureMask, KernelSpec};
use crate::svm::{solve_dual, DualSolution};

/// Largest number of masks [`brute_force_minlp`] will enumerate.
pub const BRUTE_FORCE_BUDGET: u64 = 1_000_000;

/// Default tolerance by which a new objective must beat the incumbent to count
/// as an improvement.
pub const IMPROVEMENT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-6,
            max_iter: 1_000_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub dataset: Dataset,
    pub kernel: KernelSpec,
    /// Box bound `C` on the dual variables.
    pub cost: f64,
    /// Number of features `B` to keep.
    pub budget: usize,
    pub solver: SolverSettings,
}

impl ProblemSpec {
    pub fn new(dataset: Dataset, kernel: KernelSpec, cost: f64, budget: usize) -> Result<Self> {
        kernel.validate()?;
        if !(cost > 0.0 && cost.is_finite()) {
            return Err(Error::domain(format!("C must be positive, got {cost}")));
        }
        let n = dataset.n_features();
        if budget < 1 || budget > n {
            return Err(Error::domain(format!("B must lie in 1..={n}, got {budget}")));
        }
        Ok(ProblemSpec {
            dataset,
            kernel,
            cost,
            budget,
            solver: SolverSettings::default(),
        })
    }

    pub fn with_solver(mut self, solver: SolverSettings) -> Self {
        self.solver = solver;
        self
    }

    pub fn n_features(&self) -> usize {
        self.dataset.n_features()
    }

    pub fn n_samples(&self) -> usize {
        self.dataset.n_samples()
    }

    /// Errors unless `mask` has `n` entries and exactly `B` ones.
    pub fn check_feasible(&self, mask: &FeatureMask) -> Result<()> {
        if mask.len() != self.n_features() {
            return Err(Error::domain(format!(
                "mask has {} entries, problem has {} features",
                mask.len(),
                self.n_features()
            )));
        }
        if mask.cardinality() != self.budget {
            return Err(Error::domain(format!(
                "mask selects {} features, B = {}",
                mask.cardinality(),
                self.budget
            )));
        }
        Ok(())
    }
}

/// Half of `n`, rounded down, but at least one.
pub fn half_features(n: usize) -> usize {
    (n / 2).max(1)
}

/// A solved `(alpha, beta)` pair. `ub` is the dual objective under `mask`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Incumbent {
    pub alpha: DualSolution,
    pub mask: FeatureMask,
    pub ub: f64,
}

impl Incumbent {
    /// Strictly better than `other` by more than `tol`.
    pub fn improves_on(&self, other: &Incumbent, tol: f64) -> bool {
        self.ub < other.ub - tol
    }
}

/// Orders incumbents by objective, ties by mask.
pub(crate) fn better(a: &Incumbent, b: &Incumbent) -> std::cmp::Ordering {
    a.ub.total_cmp(&b.ub).then_with(|| a.mask.cmp(&b.mask))
}

/// `1/2 a' Q(beta) a - 1' a` without building `Q`. `alpha` need not be feasible.
pub fn evaluate_f(p: &ProblemSpec, alpha: &[f64], mask: &FeatureMask) -> Result<f64> {
    let d = &p.dataset;
    if alpha.len() != d.n_samples() || mask.len() != d.n_features() {
        return Err(Error::domain(format!(
            "expected alpha of length {} and mask of length {}",
            d.n_samples(),
            d.n_features()
        )));
    }
    let selected = mask.selected();
    let y = d.labels();
    let support: Vec<usize> = (0..alpha.len()).filter(|&i| alpha[i] != 0.0).collect();
    let quad: f64 = support
        .par_iter()
        .map(|&i| {
            let xi = d.row(i);
            let wi = alpha[i] * y[i];
            support
                .iter()
                .map(|&h| wi * alpha[h] * y[h] * masked_with_indices(&p.kernel, &selected, xi, d.row(h)))
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(0.5 * quad - alpha.iter().sum::<f64>())
}

/// Solves the alpha-subproblem for any mask of the right length, without the
/// cardinality check (RFE walks through masks larger than `B`).
pub fn solve_with_mask(p: &ProblemSpec, mask: &FeatureMask) -> Result<Incumbent> {
    let q = build_q(&p.dataset, &p.kernel, mask)?;
    let alpha = solve_dual(&q, p.dataset.labels(), p.cost, p.solver.tol, p.solver.max_iter)?;
    Ok(Incumbent {
        ub: alpha.objective,
        alpha,
        mask: mask.clone(),
    })
}

/// Fixes `beta = mask` and solves the dual SVM on the selected features.
pub fn solve_for_mask(p: &ProblemSpec, mask: &FeatureMask) -> Result<Incumbent> {
    p.check_feasible(mask)?;
    solve_with_mask(p, mask)
}

/// Solves every mask in parallel, preserving input order.
pub(crate) fn solve_all(p: &ProblemSpec, masks: &[FeatureMask]) -> Result<Vec<Incumbent>> {
    masks.par_iter().map(|m| solve_with_mask(p, m)).collect()
}

/// Solved incumbents of one search run, keyed by mask. Solves are
/// deterministic, so a hit returns exactly what a fresh solve would.
#[derive(Debug, Default)]
pub(crate) struct SolveCache {
    solved: HashMap<FeatureMask, Incumbent>,
}

impl SolveCache {
    /// Like [`solve_all`], solving only masks not seen before.
    pub(crate) fn solve_all(&mut self, p: &ProblemSpec, masks: &[FeatureMask]) -> Result<Vec<Incumbent>> {
        let mut missing: Vec<FeatureMask> = masks.iter().filter(|m| !self.solved.contains_key(*m)).cloned().collect();
        missing.sort();
        missing.dedup();
        for inc in solve_all(p, &missing)? {
            self.solved.insert(inc.mask.clone(), inc);
        }
        Ok(masks.iter().map(|m| self.solved[m].clone()).collect())
    }

    pub(crate) fn solve(&mut self, p: &ProblemSpec, mask: &FeatureMask) -> Result<Incumbent> {
        Ok(self.solve_all(p, std::slice::from_ref(mask))?.remove(0))
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub(crate) fn combinations(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut current: Option<Vec<usize>> = (k <= n).then(|| (0..k).collect());
    std::iter::from_fn(move || {
        let out = current.clone()?;
        let next = {
            let c = current.as_mut().unwrap();
            match (0..k).rev().find(|&i| c[i] < n - k + i) {
                Some(i) => {
                    c[i] += 1;
                    for t in i + 1..k {
                        c[t] = c[t - 1] + 1;
                    }
                    true
                }
                None => false,
            }
        };
        if !next {
            current = None;
        }
        Some(out)
    })
}

/// Global optimum by enumerating every feasible mask. Ties go to the
/// lexicographically smallest mask.
pub fn brute_force_minlp(p: &ProblemSpec) -> Result<Incumbent> {
    brute_force_with_budget(p, BRUTE_FORCE_BUDGET)
}

pub fn brute_force_with_budget(p: &ProblemSpec, budget: u64) -> Result<Incumbent> {
    let n = p.n_features();
    let count = binomial(n, p.budget);
    if count > budget as u128 {
        return Err(Error::domain(format!(
            "enumerating C({n}, {}) = {count} masks exceeds the budget of {budget}",
            p.budget
        )));
    }
    const CHUNK: usize = 4096;
    let mut best: Option<Incumbent> = None;
    let mut masks = Vec::with_capacity(CHUNK);
    let flush = |masks: &mut Vec<FeatureMask>, best: &mut Option<Incumbent>| -> Result<()> {
        for inc in solve_all(p, masks)? {
            if best.as_ref().is_none_or(|b| better(&inc, b).is_lt()) {
                *best = Some(inc);
            }
        }
        masks.clear();
        Ok(())
    };
    for combo in combinations(n, p.budget) {
        masks.push(FeatureMask::from_indices(n, &combo)?);
        if masks.len() == CHUNK {
            flush(&mut masks, &mut best)?;
        }
    }
    flush(&mut masks, &mut best)?;
    best.ok_or_else(|| Error::domain("no feasible mask"))
}
