//! Weighted logistic log-likelihood, Newton-Raphson MLE, and BIC scoring.
//!
//! All evaluation runs over a [`ProfileTable`] rather than raw rows: with
//! binary covariates the number of distinct (pattern, outcome) profiles is
//! tiny compared to the report count, so every likelihood, gradient, and
//! Hessian sum has one term per profile, weighted by its multiplicity.

use nalgebra::{DMatrix, DVector};

use crate::dataset::ProfileTable;
use crate::model::ModelVector;

/// Compensated (Kahan) accumulator. Likelihood identities downstream are
/// checked to 1e-10 absolute on thousand-row datasets, which plain f64
/// summation does not reliably deliver.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.c += (self.sum - t) + value;
        } else {
            self.c += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// ln(1 + e^eta), stable across the whole real line.
#[inline]
fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Intercept plus one coefficient per drug column of the (restricted)
/// matrix; entries off the model's support are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    pub beta0: f64,
    pub beta: Vec<f64>,
}

impl CoefficientVector {
    /// Expands per-included-drug values (ascending model order) to full width.
    pub fn from_compact(gamma: &ModelVector, beta0: f64, active: &[f64]) -> Self {
        assert_eq!(active.len(), gamma.count_ones(), "active length != |gamma|");
        let mut beta = vec![0.0; gamma.len()];
        for (value, j) in active.iter().zip(gamma.iter_ones()) {
            beta[j] = *value;
        }
        CoefficientVector { beta0, beta }
    }

    /// The support-ordered nonzero block; panics if any off-support entry is
    /// nonzero, since such a vector is not a member of the model's space.
    pub fn compact(&self, gamma: &ModelVector) -> Vec<f64> {
        assert_eq!(self.beta.len(), gamma.len(), "width mismatch");
        for (j, &b) in self.beta.iter().enumerate() {
            assert!(
                gamma.get(j) || b == 0.0,
                "coefficient {b} at excluded position {j}"
            );
        }
        gamma.iter_ones().map(|j| self.beta[j]).collect()
    }
}

/// Result of one MLE fit. `beta` is compact: one entry per included drug, in
/// ascending column order of the model.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta0: f64,
    pub beta: Vec<f64>,
    pub loglik: f64,
    pub bic: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn coefficient_vector(&self, gamma: &ModelVector) -> CoefficientVector {
        CoefficientVector::from_compact(gamma, self.beta0, &self.beta)
    }
}

/// Model degrees of freedom: intercept plus one per included drug.
pub fn nu(gamma: &ModelVector) -> usize {
    1 + gamma.count_ones()
}

/// BIC score: loglik minus (nu/2) ln n.
pub fn bic(loglik: f64, nu: usize, n: u64) -> f64 {
    assert!(nu >= 1, "degrees of freedom must be at least 1");
    assert!(n >= 1, "BIC undefined for an empty dataset");
    loglik - nu as f64 / 2.0 * (n as f64).ln()
}

/// Weighted log-likelihood over the profile table:
/// sum_i w_i (y_i eta_i - ln(1 + e^{eta_i})), eta_i = beta0 + sum_t beta_t x_it.
///
/// `beta` is compact (length = table's drug count). Profiles are summed in
/// table order with compensation, so the value is reproducible bit for bit
/// and matches the uncompressed row-by-row sum to tight tolerance.
pub fn loglik_weighted(pt: &ProfileTable, beta0: f64, beta: &[f64]) -> f64 {
    assert_eq!(
        beta.len(),
        pt.k(),
        "coefficient block has {} entries for a {}-drug table",
        beta.len(),
        pt.k()
    );
    let mut acc = Kahan::default();
    for i in 0..pt.m() {
        let mut eta = beta0;
        for (t, b) in beta.iter().enumerate() {
            if pt.x_bit(i, t) == 1 {
                eta += b;
            }
        }
        let term = pt.outcomes()[i] as f64 * eta - softplus(eta);
        acc.add(pt.weights()[i] as f64 * term);
    }
    acc.value()
}

/// Convenience wrapper evaluating a full-width coefficient vector against
/// its model.
pub fn loglik_weighted_full(
    pt: &ProfileTable,
    gamma: &ModelVector,
    coef: &CoefficientVector,
) -> f64 {
    loglik_weighted(pt, coef.beta0, &coef.compact(gamma))
}

/// Tuning knobs for the Newton solver. Defaults: gradient max-norm 1e-8,
/// 50 iterations, coefficient cap 30 (quasi-separation guard), 20 step
/// halvings, improvement floor 1e-12.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub coef_cap: f64,
    pub max_halvings: usize,
    pub ll_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            grad_tol: 1e-8,
            max_iter: 50,
            coef_cap: 30.0,
            max_halvings: 20,
            ll_tol: 1e-12,
        }
    }
}

/// Gradient of the weighted log-likelihood at (beta0, beta), intercept
/// first. Exposed for the finite-difference checks in tests.
pub fn gradient(pt: &ProfileTable, beta0: f64, beta: &[f64]) -> Vec<f64> {
    assert_eq!(beta.len(), pt.k());
    let dim = pt.k() + 1;
    let mut gs = vec![Kahan::default(); dim];
    let mut active: Vec<usize> = Vec::with_capacity(pt.k());
    for i in 0..pt.m() {
        active.clear();
        let mut eta = beta0;
        for (t, b) in beta.iter().enumerate() {
            if pt.x_bit(i, t) == 1 {
                eta += b;
                active.push(t + 1);
            }
        }
        let r = pt.weights()[i] as f64 * (pt.outcomes()[i] as f64 - sigmoid(eta));
        gs[0].add(r);
        for &a in &active {
            gs[a].add(r);
        }
    }
    gs.into_iter().map(|k| k.value()).collect()
}

/// Fits the MLE by Newton-Raphson starting from zero.
///
/// Each step solves the exact Newton system (negative Hessian, Cholesky;
/// Levenberg-damped on singularity) and then halves the step until the
/// log-likelihood does not decrease, so iterates ascend monotonically.
/// The fit converges when the gradient max-norm drops below `grad_tol`.
/// Iteration also ends unconverged at `max_iter`, after three consecutive
/// steps improving by at most `ll_tol` (a plateau whose gradient will not
/// come down), or when a coefficient magnitude passes `coef_cap`. The cap
/// marks quasi-separation; such fits are scored BIC -inf, the same sentinel
/// models outside the search space get.
pub fn fit_mle_with(pt: &ProfileTable, opts: &FitOptions) -> FitResult {
    assert!(pt.n() >= 1, "empty dataset");
    let k = pt.k();
    let dim = k + 1;

    let mut theta = vec![0.0; dim];
    let mut ll = loglik_weighted(pt, theta[0], &theta[1..]);
    let mut iterations = 0;
    let mut converged = false;
    let mut diverged = false;
    let mut stalls = 0;
    let mut last_gmax = f64::INFINITY;
    let mut last_improvement = f64::INFINITY;

    let mut active: Vec<usize> = Vec::with_capacity(k);
    loop {
        let g = gradient(pt, theta[0], &theta[1..]);
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax <= opts.grad_tol {
            converged = true;
            break;
        }
        // Stagnation means BOTH observable signals went flat: the measured
        // likelihood gain fell below the floor and the gradient stopped
        // shrinking. Near the optimum the gain saturates at roundoff while
        // the gradient still collapses quadratically, which must not count.
        if last_improvement <= opts.ll_tol && gmax > 0.5 * last_gmax {
            stalls += 1;
        } else {
            stalls = 0;
        }
        if iterations >= opts.max_iter || stalls >= 3 {
            break;
        }
        iterations += 1;
        last_gmax = gmax;

        // Negative Hessian: A[a][b] = sum_i w_i mu_i (1-mu_i) z_ia z_ib with
        // z the 0/1 design row (intercept prepended), so only index pairs
        // inside each profile's active set contribute.
        let mut a_mat = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..pt.m() {
            active.clear();
            active.push(0);
            let mut eta = theta[0];
            for t in 0..k {
                if pt.x_bit(i, t) == 1 {
                    eta += theta[t + 1];
                    active.push(t + 1);
                }
            }
            let mu = sigmoid(eta);
            let c = pt.weights()[i] as f64 * mu * (1.0 - mu);
            for (ai, &ra) in active.iter().enumerate() {
                for &rb in &active[ai..] {
                    a_mat[(ra, rb)] += c;
                }
            }
        }
        for a in 0..dim {
            for b in 0..a {
                a_mat[(a, b)] = a_mat[(b, a)];
            }
        }

        let g_vec = DVector::from_column_slice(&g);
        let mut delta = None;
        let mut lambda = 0.0;
        loop {
            let damped = if lambda == 0.0 {
                a_mat.clone()
            } else {
                let mut d = a_mat.clone();
                for a in 0..dim {
                    d[(a, a)] += lambda;
                }
                d
            };
            if let Some(chol) = damped.cholesky() {
                delta = Some(chol.solve(&g_vec));
                break;
            }
            lambda = if lambda == 0.0 { 1e-6 } else { lambda * 2.0 };
            if lambda > 1e2 {
                break;
            }
        }
        let Some(delta) = delta else {
            break; // Hessian unusable even with damping.
        };

        // Newton ascent with step halving. True improvements shrink below
        // one ulp of the log-likelihood long before the gradient reaches
        // tolerance, so a full step whose measured value ties or dips
        // within evaluation roundoff must still be taken; only decreases
        // beyond that noise band trigger a halving.
        let slack = 8.0 * f64::EPSILON * (1.0 + ll.abs());
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let cand: Vec<f64> = theta
                .iter()
                .zip(delta.iter())
                .map(|(t, d)| t + step * d)
                .collect();
            let cand_ll = loglik_weighted(pt, cand[0], &cand[1..]);
            if cand_ll.is_finite() && cand_ll >= ll - slack {
                accepted = Some((cand, cand_ll));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, cand_ll)) = accepted else {
            break; // No ascent direction left at any step length.
        };
        debug_assert!(
            cand_ll >= ll - slack,
            "Newton step decreased the log-likelihood beyond roundoff"
        );

        let improvement = cand_ll - ll;
        theta = cand;
        ll = cand_ll;

        if theta.iter().any(|t| t.abs() > opts.coef_cap) {
            diverged = true;
            break;
        }
        last_improvement = improvement;
    }

    let converged = converged && !diverged;
    let bic_value = if converged {
        bic(ll, 1 + k, pt.n())
    } else {
        f64::NEG_INFINITY
    };
    FitResult {
        beta0: theta[0],
        beta: theta[1..].to_vec(),
        loglik: ll,
        bic: bic_value,
        converged,
        iterations,
    }
}

/// [`fit_mle_with`] under default options.
pub fn fit_mle(pt: &ProfileTable) -> FitResult {
    fit_mle_with(pt, &FitOptions::default())
}

/// Drug indices (positions in the model's column space) whose fitted
/// coefficient is strictly positive, sorted by descending coefficient;
/// ties fall back to ascending index. These are the detected signals.
///
/// Panics on an unconverged fit: its coefficients are not estimates.
pub fn signal_coefficients(fit: &FitResult, gamma: &ModelVector) -> Vec<(usize, f64)> {
    assert!(fit.converged, "signal extraction requires a converged fit");
    assert_eq!(fit.beta.len(), gamma.count_ones(), "fit/model mismatch");
    let mut out: Vec<(usize, f64)> = gamma
        .iter_ones()
        .zip(fit.beta.iter().copied())
        .filter(|&(_, b)| b > 0.0)
        .collect();
    out.sort_by(|l, r| r.1.partial_cmp(&l.1).unwrap().then(l.0.cmp(&r.0)));
    out
}
