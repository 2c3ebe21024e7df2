//! Recursive feature elimination driven by the dual objective.

use rayon::prelude::*;

use crate::error::Result;
use crate::kernel::FeatureMask;
use crate::minlp::{evaluate_f, solve_with_mask, Incumbent, ProblemSpec};

/// Starts from all features and removes one per step until `B` remain. Each
/// remaining feature is scored by the dual objective without it: at the
/// current alpha when `recompute_alpha` is false, by a fresh dual solve
/// otherwise. The lowest score goes, lowest index on ties; alpha is re-solved
/// after every removal.
pub fn rfe(p: &ProblemSpec, recompute_alpha: bool) -> Result<Incumbent> {
    let n = p.n_features();
    let mut current = solve_with_mask(p, &FeatureMask::full(n))?;
    while current.mask.cardinality() > p.budget {
        let on = current.mask.selected();
        let candidates: Vec<FeatureMask> = on.iter().map(|&j| current.mask.swapped(&[j], &[])).collect();
        let scored: Vec<(f64, Option<Incumbent>)> = candidates
            .par_iter()
            .map(|m| {
                if recompute_alpha {
                    solve_with_mask(p, m).map(|inc| (inc.ub, Some(inc)))
                } else {
                    evaluate_f(p, &current.alpha.alpha, m).map(|v| (v, None))
                }
            })
            .collect::<Result<_>>()?;
        let mut pick = 0;
        for t in 1..scored.len() {
            if scored[t].0 < scored[pick].0 {
                pick = t;
            }
        }
        let (_, solved) = scored.into_iter().nth(pick).expect("nonempty candidates");
        current = match solved {
            Some(inc) => inc,
            None => solve_with_mask(p, &candidates[pick])?,
        };
    }
    Ok(current)
}
