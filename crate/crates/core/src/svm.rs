//! Dual C-SVM solver (the alpha-subproblem) and the resulting classifier.
//!
//! Solves
//!
//! ```text
//! min  1/2 a' Q a - 1' a    s.t.  y' a = 0,  0 <= a_i <= C
//! ```
//!
//! by sequential minimal optimization with maximal-violating-pair working set
//! selection. Let `G = Q a - 1` and
//!
//! ```text
//! I_up  = { t : a_t < C, y_t = +1 } u { t : a_t > 0, y_t = -1 }
//! I_low = { t : a_t < C, y_t = -1 } u { t : a_t > 0, y_t = +1 }
//! ```
//!
//! Each iteration picks `i = argmax_{I_up} -y_t G_t`, `j = argmin_{I_low} -y_t G_t`
//! (lowest index on ties) and minimizes exactly along the feasible direction of
//! the pair. The iteration stops once the gap between the two extremes, the
//! maximal KKT violation, drops to `tol`.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{masked_with_indices, FeatureMask, KernelSpec, QMatrix};

/// Curvature floor for pairs whose 2x2 subproblem is not strictly convex.
const TAU: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    /// `1/2 a' Q a - 1' a`, recomputed from `Q` after the last iteration.
    pub objective: f64,
    /// Maximal KKT violation at the returned point.
    pub kkt_violation: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn check_inputs(q: &QMatrix, labels: &[f64], cost: f64) -> Result<()> {
    if labels.len() != q.size() {
        return Err(Error::domain(format!(
            "Q is {0}x{0} but there are {1} labels",
            q.size(),
            labels.len()
        )));
    }
    if !(cost >= 0.0 && cost.is_finite()) {
        return Err(Error::domain(format!("C must be finite and nonnegative, got {cost}")));
    }
    if q.entries().iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("Q contains non-finite entries"));
    }
    Ok(())
}

#[inline]
fn in_up(a: f64, y: f64, cost: f64) -> bool {
    if y > 0.0 {
        a < cost
    } else {
        a > 0.0
    }
}

#[inline]
fn in_low(a: f64, y: f64, cost: f64) -> bool {
    if y > 0.0 {
        a > 0.0
    } else {
        a < cost
    }
}

/// Maximal violating pair and the violation `max_up - min_low`.
fn select_pair(alpha: &[f64], grad: &[f64], y: &[f64], cost: f64) -> Option<(usize, usize, f64)> {
    let mut up = (f64::NEG_INFINITY, usize::MAX);
    let mut low = (f64::INFINITY, usize::MAX);
    for t in 0..alpha.len() {
        let v = -y[t] * grad[t];
        if in_up(alpha[t], y[t], cost) && v > up.0 {
            up = (v, t);
        }
        if in_low(alpha[t], y[t], cost) && v < low.0 {
            low = (v, t);
        }
    }
    (up.1 != usize::MAX && low.1 != usize::MAX).then_some((up.1, low.1, up.0 - low.0))
}

/// Membership of each variable in the up and low index sets, refreshed only
/// for the two variables an update touches.
struct Status {
    up: Vec<bool>,
    low: Vec<bool>,
}

impl Status {
    fn new(alpha: &[f64], y: &[f64], cost: f64) -> Self {
        Status {
            up: alpha.iter().zip(y).map(|(&a, &yt)| in_up(a, yt, cost)).collect(),
            low: alpha.iter().zip(y).map(|(&a, &yt)| in_low(a, yt, cost)).collect(),
        }
    }

    fn refresh(&mut self, t: usize, a: f64, y: f64, cost: f64) {
        self.up[t] = in_up(a, y, cost);
        self.low[t] = in_low(a, y, cost);
    }
}

/// Largest `-y_t G_t` over the up set with its index, smallest over the low set.
#[derive(Clone, Copy)]
struct Extremes {
    g_up: f64,
    i: usize,
    g_low: f64,
}

impl Extremes {
    const EMPTY: Extremes = Extremes {
        g_up: f64::NEG_INFINITY,
        i: usize::MAX,
        g_low: f64::INFINITY,
    };

    #[inline]
    fn visit(&mut self, t: usize, v: f64, up: bool, low: bool) {
        if up && v > self.g_up {
            self.g_up = v;
            self.i = t;
        }
        if low && v < self.g_low {
            self.g_low = v;
        }
    }

    fn scan(grad: &[f64], y: &[f64], status: &Status) -> Self {
        let mut ext = Self::EMPTY;
        for (t, ((&g, &yt), (&u, &l))) in grad.iter().zip(y).zip(status.up.iter().zip(&status.low)).enumerate() {
            ext.visit(t, -yt * g, u, l);
        }
        ext
    }

    fn is_empty(&self) -> bool {
        self.i == usize::MAX || self.g_low == f64::INFINITY
    }
}

/// Low-set partner of the maximal violator `i` giving the largest
/// second-order decrease of the objective.
fn partner(q: &QMatrix, diag: &[f64], status: &Status, grad: &[f64], y: &[f64], ext: &Extremes) -> usize {
    let i = ext.i;
    let (yi, qii) = (y[i], diag[i]);
    let mut best = (f64::INFINITY, i);
    for (t, ((((&g, &yt), &l), &qtt), &qit)) in grad
        .iter()
        .zip(y)
        .zip(&status.low)
        .zip(diag)
        .zip(q.row(i))
        .enumerate()
    {
        let b = ext.g_up + yt * g;
        if l && b > 0.0 {
            let a = (qii + qtt - 2.0 * yi * yt * qit).max(TAU);
            let decrease = -(b * b) / a;
            if decrease < best.0 {
                best = (decrease, t);
            }
        }
    }
    best.1
}

fn objective_of(q: &QMatrix, alpha: &[f64]) -> f64 {
    0.5 * q.quad_form(alpha) - alpha.iter().sum::<f64>()
}

fn gradient_of(q: &QMatrix, alpha: &[f64]) -> Vec<f64> {
    (0..q.size())
        .map(|i| {
            q.row(i)
                .iter()
                .zip(alpha)
                .filter(|(_, a)| **a != 0.0)
                .map(|(qv, a)| qv * a)
                .sum::<f64>()
                - 1.0
        })
        .collect()
}

/// Solves the dual SVM for a fixed `Q`. Hitting `max_iter` is not an error:
/// the last iterate is returned with `converged = false`.
pub fn solve_dual(q: &QMatrix, labels: &[f64], cost: f64, tol: f64, max_iter: usize) -> Result<DualSolution> {
    smo(q, labels, cost, tol, max_iter, |_| {})
}

/// Like [`solve_dual`], also returning the dual objective after every step
/// as tracked incrementally by the solver.
pub fn solve_dual_traced(
    q: &QMatrix,
    labels: &[f64],
    cost: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(DualSolution, Vec<f64>)> {
    let mut trace = Vec::new();
    let sol = smo(q, labels, cost, tol, max_iter, |obj| trace.push(obj))?;
    Ok((sol, trace))
}

fn smo<F: FnMut(f64)>(
    q: &QMatrix,
    labels: &[f64],
    cost: f64,
    tol: f64,
    max_iter: usize,
    mut observe: F,
) -> Result<DualSolution> {
    check_inputs(q, labels, cost)?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    let m = q.size();
    let y = labels;
    let mut alpha = vec![0.0; m];
    if cost == 0.0 {
        return Ok(DualSolution {
            alpha,
            bias: 0.0,
            objective: 0.0,
            kkt_violation: 0.0,
            iterations: 0,
            converged: true,
        });
    }

    let mut grad = vec![-1.0; m];
    let diag: Vec<f64> = (0..m).map(|t| q.get(t, t)).collect();
    let mut status = Status::new(&alpha, y, cost);
    let mut iterations = 0;
    let mut converged = false;
    let mut last_obj = 0.0f64;

    let mut ext = Extremes::scan(&grad, y, &status);
    loop {
        if ext.is_empty() || ext.g_up - ext.g_low <= tol {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;
        let i = ext.i;
        let j = partner(q, &diag, &status, &grad, y, &ext);

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (qii, qjj, qij) = (diag[i], diag[j], q.get(i, j));
        let (mut ai, mut aj) = (old_i, old_j);
        if y[i] != y[j] {
            let quad = (qii + qjj + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > cost {
                    ai = cost;
                    aj = cost - diff;
                }
            } else if aj > cost {
                aj = cost;
                ai = cost + diff;
            }
        } else {
            let quad = (qii + qjj - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > cost {
                if ai > cost {
                    ai = cost;
                    aj = sum - cost;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > cost {
                if aj > cost {
                    aj = cost;
                    ai = sum - cost;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai.clamp(0.0, cost);
        alpha[j] = aj.clamp(0.0, cost);
        status.refresh(i, alpha[i], y[i], cost);
        status.refresh(j, alpha[j], y[j], cost);

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);

        let change = grad[i] * di + grad[j] * dj + 0.5 * (qii * di * di + qjj * dj * dj) + qij * di * dj;
        debug_assert!(
            change <= 1e-9 * (1.0 + last_obj.abs()),
            "SMO objective increased by {change} from {last_obj}"
        );
        last_obj += change;
        observe(last_obj);

        // gradient update fused with the next scan
        ext = Extremes::EMPTY;
        let rows = q.row(i).iter().zip(q.row(j));
        let flags = y.iter().zip(status.up.iter().zip(&status.low));
        for (t, ((g, (&qi, &qj)), (&yt, (&u, &l)))) in grad.iter_mut().zip(rows).zip(flags).enumerate() {
            *g += qi * di + qj * dj;
            ext.visit(t, -yt * *g, u, l);
        }
    }

    // the incrementally updated gradient drifts; report values recomputed from Q
    let grad = gradient_of(q, &alpha);
    let kkt_violation = select_pair(&alpha, &grad, y, cost).map_or(0.0, |(_, _, v)| v.max(0.0));
    let bias = bias_from_gradient(&alpha, &grad, y, cost);
    Ok(DualSolution {
        objective: objective_of(q, &alpha),
        alpha,
        bias,
        kkt_violation,
        iterations,
        converged,
    })
}

fn bias_from_gradient(alpha: &[f64], grad: &[f64], y: &[f64], cost: f64) -> f64 {
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    // feasible interval for rho = -b, as in LIBSVM
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= cost;
        let at_lower = alpha[t] <= 0.0;
        if at_upper && at_lower {
            continue;
        }
        if at_upper {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_sum += yg;
            free_count += 1;
        }
    }
    let rho = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        match (ub.is_finite(), lb.is_finite()) {
            (true, true) => 0.5 * (ub + lb),
            (true, false) => ub,
            (false, true) => lb,
            (false, false) => 0.0,
        }
    };
    -rho
}

/// Offset `b` of the decision function. Averages `y_i - sum_h a_h y_h k(x_h, x_i)`
/// over free support vectors; without any, takes the midpoint of the interval
/// of offsets compatible with the KKT conditions.
pub fn compute_bias(sol: &DualSolution, q: &QMatrix, labels: &[f64], cost: f64) -> Result<f64> {
    check_inputs(q, labels, cost)?;
    let grad = gradient_of(q, &sol.alpha);
    Ok(bias_from_gradient(&sol.alpha, &grad, labels, cost))
}

/// Checks the KKT conditions of a solution against its own bias `b`:
/// with `G = Q a - 1`, every `i` must satisfy `G_i + y_i b >= -eps` when
/// `a_i = 0`, `<= eps` when `a_i = C`, and `|G_i + y_i b| <= eps` otherwise,
/// where `eps = tol * (1 + |G_i|)`. Returns the index and size of the worst
/// violation on failure.
pub fn kkt_certificate(
    q: &QMatrix,
    labels: &[f64],
    cost: f64,
    sol: &DualSolution,
    tol: f64,
) -> std::result::Result<(), (usize, f64)> {
    let grad = gradient_of(q, &sol.alpha);
    let mut worst: Option<(usize, f64)> = None;
    for (i, (&a, &g)) in sol.alpha.iter().zip(&grad).enumerate() {
        let r = g + labels[i] * sol.bias;
        let excess = if a <= 0.0 {
            -r
        } else if a >= cost {
            r
        } else {
            r.abs()
        };
        let excess = excess - tol * (1.0 + g.abs());
        if excess > 0.0 && worst.is_none_or(|(_, w)| excess > w) {
            worst = Some((i, excess));
        }
    }
    worst.map_or(Ok(()), Err)
}

/// Trained classifier restricted to its support vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// `(training index, a_i y_i)` for every retained support vector.
    pub support_alphas: Vec<(usize, f64)>,
    pub bias: f64,
    pub mask: FeatureMask,
    pub spec: KernelSpec,
    /// Feature rows of the support vectors, aligned with `support_alphas`.
    pub training_refs: Vec<Vec<f64>>,
}

impl SvmModel {
    /// Keeps samples with `a_i > 1e-8 C`.
    pub fn from_solution(
        d: &Dataset,
        spec: KernelSpec,
        mask: FeatureMask,
        sol: &DualSolution,
        cost: f64,
    ) -> Result<Self> {
        if sol.alpha.len() != d.n_samples() || mask.len() != d.n_features() {
            return Err(Error::domain("solution, mask and dataset dimensions disagree"));
        }
        let threshold = 1e-8 * cost;
        let support: Vec<usize> = (0..d.n_samples()).filter(|&i| sol.alpha[i] > threshold).collect();
        Ok(SvmModel {
            support_alphas: support.iter().map(|&i| (i, sol.alpha[i] * d.labels()[i])).collect(),
            bias: sol.bias,
            training_refs: support.iter().map(|&i| d.row(i).to_vec()).collect(),
            mask,
            spec,
        })
    }

    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.mask.len() {
            return Err(Error::domain(format!(
                "model expects {} features, got {}",
                self.mask.len(),
                x.len()
            )));
        }
        let sel = self.mask.selected();
        Ok(self
            .support_alphas
            .iter()
            .zip(&self.training_refs)
            .map(|(&(_, coef), sv)| coef * masked_with_indices(&self.spec, &sel, sv, x))
            .sum::<f64>()
            + self.bias)
    }
}

/// Sign of the decision function, with `sign(0) = +1`.
pub fn predict(model: &SvmModel, x: &[f64]) -> Result<f64> {
    Ok(if model.decision_value(x)? >= 0.0 { 1.0 } else { -1.0 })
}

/// Fraction of correctly classified rows.
pub fn accuracy(model: &SvmModel, d: &Dataset) -> Result<f64> {
    let mut correct = 0usize;
    for (x, &y) in d.rows().zip(d.labels()) {
        if predict(model, x)? == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / d.n_samples() as f64)
}
