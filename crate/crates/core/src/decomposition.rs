//! Alternating `alpha`/`beta` decomposition for polynomial kernels, with a pool
//! of explored solutions and a tabu list, plus the naive alternation baseline.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::FeatureMask;
use crate::local_search::{LsConfig, SearchOutcome, SearchTrace, TabuList};
use crate::minlp::{better, solve_all, solve_for_mask, Incumbent, ProblemSpec};
use crate::submodular::{solve_beta_subproblem, SetFunctionContext};

/// Solved incumbents kept sorted by objective (ties by mask), without
/// duplicate masks. Inserting past capacity evicts the worst entry.
#[derive(Clone, Debug)]
pub struct SolutionPool {
    entries: Vec<Incumbent>,
    capacity: usize,
}

impl SolutionPool {
    pub fn new(capacity: usize) -> Self {
        SolutionPool {
            entries: Vec::new(),
            capacity,
        }
    }

    /// Returns `false` if the mask is already present or the entry would be
    /// evicted immediately.
    pub fn insert(&mut self, inc: Incumbent) -> bool {
        let fp = inc.mask.fingerprint();
        if self
            .entries
            .iter()
            .any(|e| e.mask.fingerprint() == fp && e.mask == inc.mask)
        {
            return false;
        }
        let at = self.entries.partition_point(|e| better(e, &inc).is_lt());
        if at >= self.capacity {
            return false;
        }
        self.entries.insert(at, inc);
        self.entries.truncate(self.capacity);
        true
    }

    pub fn pop_best(&mut self) -> Option<Incumbent> {
        (!self.entries.is_empty()).then(|| self.entries.remove(0))
    }

    pub fn entries(&self) -> &[Incumbent] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }
}

fn require_polynomial(p: &ProblemSpec) -> Result<()> {
    if p.kernel.is_polynomial() {
        Ok(())
    } else {
        Err(Error::domain(
            "decomposition requires a polynomial kernel; use ls_star for other kernels",
        ))
    }
}

fn context(p: &ProblemSpec, inc: &Incumbent) -> Result<SetFunctionContext> {
    SetFunctionContext::new(&p.dataset, p.kernel, inc.alpha.alpha.clone())
}

/// N1 descent on `F` at fixed alpha from `start`, at most `n` moves. Returns
/// the best `keep` masks seen, ordered by `F` then mask.
fn fixed_alpha_candidates(ctx: &SetFunctionContext, start: FeatureMask, keep: usize) -> Vec<FeatureMask> {
    let mut scores: HashMap<FeatureMask, f64> = HashMap::new();
    let mut current = start;
    let mut sums = ctx.mask_sums(&current);
    let mut value = ctx.value(&sums);
    scores.insert(current.clone(), value);
    for _ in 0..ctx.n_features() {
        let (on, off) = (current.selected(), current.unselected());
        let moves: Vec<(usize, usize)> = on.iter().flat_map(|&r| off.iter().map(move |&a| (r, a))).collect();
        let values: Vec<f64> = moves
            .par_iter()
            .map(|&(r, a)| ctx.value_swapped(&sums, &[r], &[a]))
            .collect();
        let mut best: Option<(f64, FeatureMask)> = None;
        for (&(r, a), &v) in moves.iter().zip(&values) {
            let m = current.swapped(&[r], &[a]);
            if best.as_ref().is_none_or(|(bv, bm)| v < *bv || (v == *bv && m < *bm)) {
                best = Some((v, m.clone()));
            }
            scores.entry(m).or_insert(v);
        }
        match best {
            Some((v, m)) if v < value => {
                current = m;
                sums = ctx.mask_sums(&current);
                value = v;
            }
            _ => break,
        }
    }
    let mut ranked: Vec<(f64, FeatureMask)> = scores.into_iter().map(|(m, v)| (v, m)).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    ranked.into_iter().take(keep).map(|(_, m)| m).collect()
}

/// Decomposition with multiple solutions per round. Each round fixes the
/// current alpha, builds a mask by lazy greedy, refines it by a fixed-alpha
/// swap descent, solves the duals of the best unvisited candidates and moves
/// to the best explored solution not yet used.
pub fn dec_sub_light(p: &ProblemSpec, start: &FeatureMask, cfg: &LsConfig) -> Result<SearchOutcome> {
    require_polynomial(p)?;
    cfg.validate()?;
    let mut tabu = TabuList::new();
    let mut current = solve_for_mask(p, start)?;
    tabu.insert(start);
    let mut best = current.clone();
    let mut explored = SolutionPool::new(10 * cfg.pool_size);
    let mut trace = SearchTrace {
        ub_history: vec![best.ub],
        solved: vec![start.clone()],
        ..SearchTrace::default()
    };
    let mut stall = 0;
    for _ in 0..cfg.max_rounds {
        trace.rounds += 1;
        let ctx = context(p, &current)?;
        let greedy = solve_beta_subproblem(&ctx, p.budget)?;
        let fresh: Vec<FeatureMask> = fixed_alpha_candidates(&ctx, greedy, cfg.pool_size)
            .into_iter()
            .filter(|m| !tabu.contains(m))
            .collect();
        let mut improved = false;
        for inc in solve_all(p, &fresh)? {
            tabu.insert(&inc.mask);
            trace.solved.push(inc.mask.clone());
            if inc.improves_on(&best, cfg.improvement_tol) {
                best = inc.clone();
                improved = true;
            }
            explored.insert(inc);
        }
        if improved {
            trace.ub_history.push(best.ub);
        }
        match explored.pop_best() {
            Some(next) => current = next,
            None => break,
        }
        if improved {
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.stall_window {
                break;
            }
        }
    }
    Ok(SearchOutcome { incumbent: best, trace })
}

/// Alternates an exact alpha solve with the greedy beta update until the mask
/// repeats or `max_rounds` is reached.
pub fn naive_alternation(p: &ProblemSpec, start: &FeatureMask, max_rounds: usize) -> Result<SearchOutcome> {
    require_polynomial(p)?;
    let mut current = solve_for_mask(p, start)?;
    let mut best = current.clone();
    let mut seen = TabuList::new();
    seen.insert(start);
    let mut trace = SearchTrace {
        ub_history: vec![best.ub],
        solved: vec![start.clone()],
        ..SearchTrace::default()
    };
    for _ in 0..max_rounds {
        trace.rounds += 1;
        let next = solve_beta_subproblem(&context(p, &current)?, p.budget)?;
        if !seen.insert(&next) {
            break;
        }
        current = solve_for_mask(p, &next)?;
        trace.solved.push(next);
        if better(&current, &best).is_lt() {
            best = current.clone();
            trace.ub_history.push(best.ub);
        }
    }
    Ok(SearchOutcome { incumbent: best, trace })
}
