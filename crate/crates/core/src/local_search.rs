//! Swap-neighborhood local search over feature masks, with and without
//! sampled diversification moves and a tabu list.

use std::collections::{HashMap, HashSet};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::FeatureMask;
use crate::minlp::{better, Incumbent, ProblemSpec, SolveCache, IMPROVEMENT_TOL};

/// Masks already handled by a search. Lookup is by fingerprint with a full
/// comparison on collision.
#[derive(Clone, Debug, Default)]
pub struct TabuList {
    buckets: HashMap<u64, Vec<FeatureMask>>,
    len: usize,
}

impl TabuList {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `false` if the mask was already present.
    pub fn insert(&mut self, mask: &FeatureMask) -> bool {
        let bucket = self.buckets.entry(mask.fingerprint()).or_default();
        if bucket.contains(mask) {
            return false;
        }
        bucket.push(mask.clone());
        self.len += 1;
        true
    }

    pub fn contains(&self, mask: &FeatureMask) -> bool {
        self.buckets
            .get(&mask.fingerprint())
            .is_some_and(|b| b.contains(mask))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn masks(&self) -> impl Iterator<Item = &FeatureMask> {
        self.buckets.values().flatten()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LsConfig {
    /// Masks drawn from the N2 neighborhood per round.
    pub samples_per_round: usize,
    /// Masks solved per decomposition round.
    pub pool_size: usize,
    /// Consecutive rounds without improvement before stopping.
    pub stall_window: usize,
    /// Largest number of swap pairs in an N2 move; `None` means `B / 2`.
    pub p: Option<usize>,
    pub seed: u64,
    pub improvement_tol: f64,
    /// Hard cap on outer rounds.
    pub max_rounds: usize,
}

impl Default for LsConfig {
    fn default() -> Self {
        LsConfig {
            samples_per_round: 500,
            pool_size: 200,
            stall_window: 5,
            p: None,
            seed: 0,
            improvement_tol: IMPROVEMENT_TOL,
            max_rounds: 500,
        }
    }
}

impl LsConfig {
    pub fn ls_star_default(seed: u64) -> Self {
        LsConfig {
            seed,
            ..Self::default()
        }
    }

    pub fn dec_sub_default(seed: u64) -> Self {
        LsConfig {
            seed,
            stall_window: 10,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("samples_per_round", self.samples_per_round),
            ("pool_size", self.pool_size),
            ("stall_window", self.stall_window),
            ("max_rounds", self.max_rounds),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        if self.p.is_some_and(|p| p < 2) {
            return Err(Error::config("p", "must be at least 2"));
        }
        if !(self.improvement_tol >= 0.0 && self.improvement_tol.is_finite()) {
            return Err(Error::config("improvement_tol", "must be finite and nonnegative"));
        }
        Ok(())
    }

    /// Flip budget for a mask with `budget` ones out of `n`. Below 2 the N2
    /// neighborhood is empty.
    pub fn effective_p(&self, n: usize, budget: usize) -> usize {
        self.p
            .unwrap_or((budget / 2).max(2))
            .min(budget)
            .min(n - budget)
    }
}

/// What a search did besides returning its incumbent.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SearchTrace {
    /// Best objective after the start and after every change of incumbent.
    pub ub_history: Vec<f64>,
    /// Masks whose full N1 neighborhood was evaluated, in order.
    pub swept: Vec<FeatureMask>,
    /// Masks whose dual was evaluated, in order (the start first). Repeats
    /// within a run are answered from a cache.
    pub solved: Vec<FeatureMask>,
    pub rounds: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub incumbent: Incumbent,
    pub trace: SearchTrace,
}

/// Uniform random feasible mask for a run seed.
pub fn initial_mask(n: usize, budget: usize, seed: u64) -> Result<FeatureMask> {
    FeatureMask::random(n, budget, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// All masks one swap away, ordered by removed index then added index.
pub fn n1_neighbors(mask: &FeatureMask) -> Vec<FeatureMask> {
    let (on, off) = (mask.selected(), mask.unselected());
    on.iter()
        .flat_map(|&r| off.iter().map(move |&a| mask.swapped(&[r], &[a])))
        .collect()
}

fn best_of(incs: Vec<Incumbent>) -> Option<Incumbent> {
    incs.into_iter().min_by(better)
}

/// Steepest descent over N1 starting from a solved incumbent.
fn descend(
    p: &ProblemSpec,
    start: Incumbent,
    mut tabu: Option<&mut TabuList>,
    tol: f64,
    trace: &mut SearchTrace,
    cache: &mut SolveCache,
) -> Result<Incumbent> {
    let mut current = start;
    loop {
        if let Some(t) = tabu.as_deref_mut() {
            if !t.insert(&current.mask) {
                break;
            }
        }
        trace.swept.push(current.mask.clone());
        let neighbors: Vec<FeatureMask> = n1_neighbors(&current.mask)
            .into_iter()
            .filter(|m| !tabu.as_deref().is_some_and(|t| t.contains(m)))
            .collect();
        if neighbors.is_empty() {
            break;
        }
        trace.solved.extend(neighbors.iter().cloned());
        let best = best_of(cache.solve_all(p, &neighbors)?).expect("nonempty neighborhood");
        if !best.improves_on(&current, tol) {
            break;
        }
        current = best;
        trace.ub_history.push(current.ub);
    }
    Ok(current)
}

/// Plain local search: move to the best N1 neighbor while it improves.
/// Neighbors already in `tabu` are skipped and swept masks are recorded.
pub fn ls(p: &ProblemSpec, start: &FeatureMask, tabu: Option<&mut TabuList>) -> Result<SearchOutcome> {
    let mut cache = SolveCache::default();
    let first = cache.solve(p, start)?;
    let mut trace = SearchTrace {
        ub_history: vec![first.ub],
        solved: vec![start.clone()],
        ..SearchTrace::default()
    };
    let incumbent = descend(p, first, tabu, IMPROVEMENT_TOL, &mut trace, &mut cache)?;
    trace.rounds = trace.swept.len();
    Ok(SearchOutcome { incumbent, trace })
}

/// Draws `samples_per_round` masks that swap between 2 and `p` pairs, dropping
/// repeats. Empty when the effective `p` is below 2.
pub fn sample_n2<R: Rng + ?Sized>(mask: &FeatureMask, cfg: &LsConfig, rng: &mut R) -> Vec<FeatureMask> {
    let p = cfg.effective_p(mask.len(), mask.cardinality());
    if p < 2 {
        return Vec::new();
    }
    let (on, off) = (mask.selected(), mask.unselected());
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for _ in 0..cfg.samples_per_round {
        let t = rng.random_range(2..=p);
        let drop: Vec<usize> = sample(rng, on.len(), t).into_iter().map(|i| on[i]).collect();
        let add: Vec<usize> = sample(rng, off.len(), t).into_iter().map(|i| off[i]).collect();
        let m = mask.swapped(&drop, &add);
        if seen.insert(m.clone()) {
            out.push(m);
        }
    }
    out
}

/// Local search with diversification: after each descent, sample N2 around
/// the local optimum and move to the best unvisited sample even if it is worse.
/// Stops after `stall_window` rounds without a new best.
pub fn ls_star(p: &ProblemSpec, start: &FeatureMask, cfg: &LsConfig) -> Result<SearchOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut tabu = TabuList::new();
    let mut cache = SolveCache::default();
    let mut current = cache.solve(p, start)?;
    let mut best = current.clone();
    let mut trace = SearchTrace {
        ub_history: vec![best.ub],
        solved: vec![start.clone()],
        ..SearchTrace::default()
    };
    let mut scratch = SearchTrace::default();
    let mut stall = 0;
    for _ in 0..cfg.max_rounds {
        trace.rounds += 1;
        let local = descend(p, current, Some(&mut tabu), cfg.improvement_tol, &mut scratch, &mut cache)?;
        trace.swept.append(&mut scratch.swept);
        trace.solved.append(&mut scratch.solved);
        let mut improved = false;
        if local.improves_on(&best, cfg.improvement_tol) {
            best = local.clone();
            improved = true;
        }
        let candidates: Vec<FeatureMask> = sample_n2(&local.mask, cfg, &mut rng)
            .into_iter()
            .filter(|m| !tabu.contains(m))
            .collect();
        if candidates.is_empty() {
            if improved {
                trace.ub_history.push(best.ub);
            }
            break;
        }
        trace.solved.extend(candidates.iter().cloned());
        let sampled = best_of(cache.solve_all(p, &candidates)?).expect("nonempty sample");
        if sampled.improves_on(&best, cfg.improvement_tol) {
            best = sampled.clone();
            improved = true;
        }
        current = sampled;
        if improved {
            trace.ub_history.push(best.ub);
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
