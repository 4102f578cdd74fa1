//! Executable forms of the maximal and pointwise ergodic theorems for
//! transfer operators, their corollaries and supporting lemmas.
//!
//! Each `check_*` function evaluates both sides of an inequality or limit
//! statement on a finite kernel and returns a [`CheckReport`]. μ-a.e.
//! statements are evaluated on `supp mu` only.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kernel::TransitionKernel;
use crate::measure::{invariance_violation, is_ergodic, require_stationary, support};
use crate::operator::{act, apply_l, duality_gap, positive_integral, positive_part};
use crate::scalar::Scalar;
use crate::space::{integrate, Measure, Observable};

/// Default truncation of `sup_{n >= 1}`.
pub const DEFAULT_N_MAX: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// passes iff `lhs >= rhs - slack`
    AtLeast,
    /// passes iff `lhs <= rhs + slack`
    AtMost,
}

/// Outcome of one check, with both sides and the slack used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub relation: Relation,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<Vec<Vec<usize>>>,
    pub iterations_used: u64,
}

impl CheckReport {
    pub fn new(name: &str, relation: Relation, lhs: f64, rhs: f64, slack: f64) -> Self {
        let passed = match relation {
            Relation::AtLeast => lhs >= rhs - slack,
            Relation::AtMost => lhs <= rhs + slack,
        };
        CheckReport {
            name: name.to_string(),
            passed,
            relation,
            lhs,
            rhs,
            slack,
            witnesses: None,
            iterations_used: 0,
        }
    }

    pub fn with_witnesses(mut self, w: Vec<Vec<usize>>) -> Self {
        self.witnesses = Some(w);
        self
    }

    pub fn with_iterations(mut self, n: u64) -> Self {
        self.iterations_used = n;
        self
    }

    /// Signed distance to the pass/fail boundary; negative means failed.
    pub fn margin(&self) -> f64 {
        match self.relation {
            Relation::AtLeast => self.lhs - (self.rhs - self.slack),
            Relation::AtMost => (self.rhs + self.slack) - self.lhs,
        }
    }
}

fn n_max_positive(n_max: usize) -> Result<()> {
    if n_max == 0 {
        Err(Error::InvalidArgument("n_max must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Calls `visit(k, S_k)` for the partial sums `S_k = Σ_{j<k} L^j phi`,
/// `k = 1..=n_max`.
fn for_each_partial_sum<T: Scalar>(
    p: &TransitionKernel<T>,
    phi: &Observable<T>,
    n_max: usize,
    mut visit: impl FnMut(usize, &[T]),
) -> Result<()> {
    check_dim(p.size(), phi.len())?;
    n_max_positive(n_max)?;
    let mut term = phi.values().to_vec();
    let mut sum = term.clone();
    visit(1, &sum);
    for k in 2..=n_max {
        term = act(p, &term);
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += *t;
        }
        visit(k, &sum);
    }
    Ok(())
}

/// `phi_n = max_{1<=k<=n} S_k` componentwise.
pub fn maximal_function<T: Scalar>(
    p: &TransitionKernel<T>,
    phi: &Observable<T>,
    n_max: usize,
) -> Result<Observable<T>> {
    let mut best = vec![T::neg_infinity(); phi.len()];
    for_each_partial_sum(p, phi, n_max, |_, s| {
        for (b, v) in best.iter_mut().zip(s) {
            *b = b.max(*v);
        }
    })?;
    Ok(Observable::from_raw(best))
}

/// `E(phi) = { i : phi_{n_max}(i) > 0 }`
pub fn maximal_set<T: Scalar>(p: &TransitionKernel<T>, phi: &Observable<T>, n_max: usize) -> Result<Vec<usize>> {
    Ok(maximal_function(p, phi, n_max)?.positive_set())
}

/// `∫_{E(phi)} phi dmu >= 0` for stationary `mu`.
pub fn check_maximal_inequality<T: Scalar>(
    p: &TransitionKernel<T>,
    mu: &Measure<T>,
    phi: &Observable<T>,
    n_max: usize,
    tol: T,
) -> Result<CheckReport> {
    require_stationary(p, mu, tol)?;
    let e = maximal_set(p, phi, n_max)?;
    let lhs = integrate(&phi.restrict(&e), mu)?;
    Ok(CheckReport::new("maximal", Relation::AtLeast, lhs.as_f64(), 0.0, tol.as_f64())
        .with_witnesses(vec![e])
        .with_iterations(n_max as u64))
}

/// `(C_alpha, B_beta)` from the running extremes of `S_n / n`, `n <= n_max`.
pub fn sublevel_sets<T: Scalar>(
    p: &TransitionKernel<T>,
    phi: &Observable<T>,
    n_max: usize,
    alpha: T,
    beta: T,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let k = phi.len();
    let mut sup = vec![T::neg_infinity(); k];
    let mut inf = vec![T::infinity(); k];
    for_each_partial_sum(p, phi, n_max, |n, s| {
        let n = T::from_usize(n).unwrap();
        for i in 0..k {
            let avg = s[i] / n;
            sup[i] = sup[i].max(avg);
            inf[i] = inf[i].min(avg);
        }
    })?;
    let c = (0..k).filter(|&i| sup[i] > alpha).collect();
    let b = (0..k).filter(|&i| inf[i] < beta).collect();
    Ok((c, b))
}

fn require_invariant<T: Scalar>(p: &TransitionKernel<T>, mu: &Measure<T>, set: &[usize], tol: T) -> Result<()> {
    let v = invariance_violation(p, mu, set)?;
    if v <= tol {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "set {set:?} is not mu-a.e. invariant (violation {:e})",
            v.as_f64()
        )))
    }
}

fn require_subset_ae<T: Scalar>(mu: &Measure<T>, set: &[usize], within: &[usize], label: &str) -> Result<()> {
    let mut mask = vec![false; mu.len()];
    for &i in within {
        mask[i] = true;
    }
    match set.iter().find(|&&i| mu[i] > T::zero() && !mask[i]) {
        Some(i) => Err(Error::Precondition(format!("A is not contained in {label}: state {i}"))),
        None => Ok(()),
    }
}

fn validate_set(k: usize, set: &[usize]) -> Result<()> {
    match set.iter().find(|&&i| i >= k) {
        Some(&i) => Err(Error::InvalidArgument(format!("state {i} out of range for K = {k}"))),
        None => Ok(()),
    }
}

/// `∫_A phi dmu >= alpha mu(A)` for invariant `A ⊂ C_alpha`.
pub fn check_corollary_c<T: Scalar>(
    p: &TransitionKernel<T>,
    mu: &Measure<T>,
    phi: &Observable<T>,
    alpha: T,
    set: &[usize],
    n_max: usize,
    tol: T,
) -> Result<CheckReport> {
    validate_set(p.size(), set)?;
    require_stationary(p, mu, tol)?;
    require_invariant(p, mu, set, tol)?;
    let (c, _) = sublevel_sets(p, phi, n_max, alpha, T::zero())?;
    require_subset_ae(mu, set, &c, "C_alpha")?;
    let lhs = integrate(&phi.restrict(set), mu)?;
    let rhs = alpha * mu.mass_of(set);
    Ok(CheckReport::new("corollary_c", Relation::AtLeast, lhs.as_f64(), rhs.as_f64(), tol.as_f64())
        .with_witnesses(vec![set.to_vec()])
        .with_iterations(n_max as u64))
}

/// `∫_A phi dmu <= beta mu(A)` for invariant `A ⊂ B_beta`.
pub fn check_corollary_b<T: Scalar>(
    p: &TransitionKernel<T>,
    mu: &Measure<T>,
    phi: &Observable<T>,
    beta: T,
    set: &[usize],
    n_max: usize,
    tol: T,
) -> Result<CheckReport> {
    validate_set(p.size(), set)?;
    require_stationary(p, mu, tol)?;
    require_invariant(p, mu, set, tol)?;
    let (_, b) = sublevel_sets(p, phi, n_max, T::zero(), beta)?;
    require_subset_ae(mu, set, &b, "B_beta")?;
    let lhs = integrate(&phi.restrict(set), mu)?;
    let rhs = beta * mu.mass_of(set);
    Ok(CheckReport::new("corollary_b", Relation::AtMost, lhs.as_f64(), rhs.as_f64(), tol.as_f64())
        .with_witnesses(vec![set.to_vec()])
        .with_iterations(n_max as u64))
}

/// Both corollaries for one set `A`, which must lie in `C_alpha ∩ B_beta`.
#[allow(clippy::too_many_arguments)]
pub fn check_corollary_inequalities<T: Scalar>(
    p: &TransitionKernel<T>,
    mu: &Measure<T>,
    phi: &Observable<T>,
    alpha: T,
    beta: T,
    set: &[usize],
    n_max: usize,
    tol: T,
) -> Result<(CheckReport, CheckReport)> {
    Ok((
        check_corollary_c(p, mu, phi, alpha, set, n_max, tol)?,
        check_corollary_b(p, mu, phi, beta, set, n_max, tol)?,
    ))
}

/// `A_n = (1/n) Σ_{j<n} L^j phi`, by direct iteration.
pub fn birkhoff_average<T: Scalar>(p: &TransitionKernel<T>, phi: &Observable<T>, n: usize) -> Result<Observable<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("averaging length must be at least 1".into()));
    }
    let mut last = Vec::new();
    for_each_partial_sum(p, phi, n, |k, s| {
        if k == n {
            last = s.to_vec();
        }
    })?;
    let n = T::from_usize(n).unwrap();
    Ok(Observable::from_raw(last.into_iter().map(|s| s / n).collect()))
}

fn sup_on<T: Scalar>(a: &[T], b: &[T], states: &[usize]) -> T {
    states.iter().map(|&i| (a[i] - b[i]).abs()).fold(T::zero(), T::max)
}

/// Result of the dyadic Cesàro scheme.
struct Dyadic<T> {
    average: Vec<T>,
    previous: Vec<T>,
    n: u64,
}

/// Runs `A_{2n} = (A_n + L^n A_n) / 2` with `L^{2n} = (L^n)^2` until
/// `‖A_{2n} - A_n‖∞` on `states` is at most `tol`, or `2n > n_cap`.
fn dyadic_limit<T: Scalar>(
    p: &TransitionKernel<T>,
    phi: &Observable<T>,
    states: &[usize],
    tol: T,
    n_cap: u64,
) -> Result<Dyadic<T>> {
    check_dim(p.size(), phi.len())?;
    let half = T::lit(0.5);
    let mut n = 1u64;
    let mut avg = phi.values().to_vec();
    let mut step = p.clone();
    let mut residual = T::infinity();
    while n.checked_mul(2).is_some_and(|m| m <= n_cap) {
        let shifted = act(&step, &avg);
        let next: Vec<T> = avg.iter().zip(&shifted).map(|(a, s)| (*a + *s) * half).collect();
        residual = sup_on(&next, &avg, states);
        n *= 2;
        if residual <= tol {
            return Ok(Dyadic { average: next, previous: avg, n });
        }
        avg = next;
        if n.checked_mul(2).is_some_and(|m| m <= n_cap) {
            step = step.compose(&step)?;
        }
    }
    Err(Error::Convergence { residual: residual.as_f64(), iterations: n })
}

/// Birkhoff limit `phi~` at the first dyadic `n` with `‖A_{2n} - A_n‖∞ <= tol`
/// on `supp mu`; `A_{2n}` is returned.
///
/// The report checks `L`-invariance of the limit on `supp mu` with slack
/// `10 tol`.
pub fn birkhoff_limit<T: Scalar>(
    p: &TransitionKernel<T>,
    phi: &Observable<T>,
    mu: &Measure<T>,
    tol: T,
    n_cap: u64,
) -> Result<(Observable<T>, CheckReport)> {
    require_stationary(p, mu, tol)?;
    let supp = support(mu, T::zero());
    let limit = dyadic_limit(p, phi, &supp, tol, n_cap)?;
    let image = act(p, &limit.average);
    let defect = sup_on(&image, &limit.average, &supp);
    let slack = T::lit(10.0) * tol;
    let report = CheckReport::new("birkhoff", Relation::AtMost, defect.as_f64(), 0.0, slack.as_f64())
        .with_iterations(limit.n);
    Ok((Observable::from_raw(limit.average), report))
}

/// Limit of Birkhoff averages equals `∫ phi dmu` on `supp mu` for ergodic `mu`.
pub fn check_ergodic_limit<T: Scalar>(
    p: &TransitionKernel<T>,
    phi: &Observable<T>,
    mu: &Measure<T>,
    tol: T,
    n_cap: u64,
) -> Result<CheckReport> {
    if !is_ergodic(p, mu, tol)? {
        return Err(Error::Precondition("mu is not ergodic".into()));
    }
    let (limit, report) = birkhoff_limit(p, phi, mu, tol, n_cap)?;
    let value = integrate(phi, mu)?;
    let supp = support(mu, T::zero());
    let dev = supp.iter().map(|&i| (limit[i] - value).abs()).fold(T::zero(), T::max);
    Ok(CheckReport::new("ergodic_limit", Relation::AtMost, dev.as_f64(), 0.0, tol.as_f64())
        .with_witnesses(vec![supp])
        .with_iterations(report.iterations_used))
}

/// Limit of `(1/n) Σ L^{jp} phi` for `mu` fixed by `(L*)^p`; equals
/// `∫ phi dmu` when `mu` is ergodic for `(L*)^p`.
///
/// With `p = 1` and ergodic `mu` this is exactly [`check_ergodic_limit`].
pub fn check_periodic_pointwise<T: Scalar>(
    p: &TransitionKernel<T>,
    period: u64,
    phi: &Observable<T>,
    mu: &Measure<T>,
    tol: T,
    n_cap: u64,
) -> Result<CheckReport> {
    let q = p.power(period)?;
    require_stationary(&q, mu, tol)?;
    let ergodic = is_ergodic(&q, mu, tol)?;
    if period == 1 && ergodic {
        return check_ergodic_limit(p, phi, mu, tol, n_cap);
    }
    let (limit, report) = birkhoff_limit(&q, phi, mu, tol, n_cap)?;
    let supp = support(mu, T::zero());
    if ergodic {
        let value = integrate(phi, mu)?;
        let dev = supp.iter().map(|&i| (limit[i] - value).abs()).fold(T::zero(), T::max);
        Ok(CheckReport::new("periodic", Relation::AtMost, dev.as_f64(), 0.0, tol.as_f64())
            .with_witnesses(vec![supp])
            .with_iterations(report.iterations_used))
    } else {
        Ok(CheckReport { name: "periodic".into(), ..report })
    }
}

/// `L(χ_A phi) = χ_A L phi` on `supp mu` for invariant `A`.
pub fn check_localization<T: Scalar>(
    p: &TransitionKernel<T>,
    mu: &Measure<T>,
    set: &[usize],
    phi: &Observable<T>,
    tol: T,
) -> Result<CheckReport> {
    validate_set(p.size(), set)?;
    check_dim(p.size(), phi.len())?;
    require_invariant(p, mu, set, tol)?;
    let left = act(p, phi.restrict(set).values());
    let right = apply_l(p, phi)?.restrict(set);
    let supp = support(mu, T::zero());
    let dev = sup_on(&left, right.values(), &supp);
    Ok(CheckReport::new("localization", Relation::AtMost, dev.as_f64(), 0.0, tol.as_f64())
        .with_witnesses(vec![set.to_vec()]))
}

/// Level sets `{phi >= alpha}`, `{phi > alpha}`, `{phi < alpha}` of an
/// invariant observable are μ-a.e. invariant.
pub fn check_levelset_invariance<T: Scalar>(
    p: &TransitionKernel<T>,
    mu: &Measure<T>,
    phi: &Observable<T>,
    alpha: T,
    tol: T,
) -> Result<CheckReport> {
    require_stationary(p, mu, tol)?;
    let image = apply_l(p, phi)?;
    let supp = support(mu, T::zero());
    let defect = sup_on(image.values(), phi.values(), &supp);
    if defect > tol {
        return Err(Error::Precondition(format!(
            "phi is not L-invariant on supp mu (defect {:e})",
            defect.as_f64()
        )));
    }
    let pick = |f: &dyn Fn(T) -> bool| -> Vec<usize> {
        (0..phi.len()).filter(|&i| f(phi[i])).collect()
    };
    let sets = vec![pick(&|v| v >= alpha), pick(&|v| v > alpha), pick(&|v| v < alpha)];
    let mut worst = T::zero();
    for s in &sets {
        worst = worst.max(invariance_violation(p, mu, s)?);
    }
    Ok(CheckReport::new("levelsets", Relation::AtMost, worst.as_f64(), 0.0, tol.as_f64())
        .with_witnesses(sets))
}

/// The set where dyadic Cesàro averages still straddle `(beta, alpha)` is
/// empty once they settle to within `(alpha - beta) / 4`.
pub fn check_nonconvergence_set_empty<T: Scalar>(
    p: &TransitionKernel<T>,
    phi: &Observable<T>,
    alpha: T,
    beta: T,
    n_cap: u64,
) -> Result<CheckReport> {
    if !(alpha > beta) {
        return Err(Error::InvalidArgument("alpha must exceed beta".into()));
    }
    let all: Vec<usize> = (0..p.size()).collect();
    let tol = (alpha - beta) * T::lit(0.25);
    let limit = dyadic_limit(p, phi, &all, tol, n_cap)?;
    let straddling: Vec<usize> = all
        .into_iter()
        .filter(|&i| {
            let hi = limit.average[i].max(limit.previous[i]);
            let lo = limit.average[i].min(limit.previous[i]);
            hi > alpha && lo < beta
        })
        .collect();
    let count = straddling.len() as f64;
    Ok(CheckReport::new("nonconvergence_empty", Relation::AtMost, count, 0.0, 0.0)
        .with_witnesses(vec![straddling])
        .with_iterations(limit.n))
}

/// `∫ phi d(L* mu) = ∫ L phi dmu`
pub fn check_duality<T: Scalar>(
    p: &TransitionKernel<T>,
    phi: &Observable<T>,
    mu: &Measure<T>,
    tol: T,
) -> Result<CheckReport> {
    let gap = duality_gap(p, phi, mu)?;
    Ok(CheckReport::new("duality", Relation::AtMost, gap.as_f64(), 0.0, tol.as_f64()))
}

/// `L(phi⁺) >= (L phi)⁺` componentwise; `lhs` is the smallest
/// componentwise difference.
pub fn check_lemma1<T: Scalar>(p: &TransitionKernel<T>, phi: &Observable<T>, tol: T) -> Result<CheckReport> {
    let left = apply_l(p, &positive_part(phi))?;
    let right = positive_part(&apply_l(p, phi)?);
    let worst = left
        .values()
        .iter()
        .zip(right.values())
        .map(|(a, b)| *a - *b)
        .fold(T::infinity(), T::min);
    Ok(CheckReport::new("lemma1", Relation::AtLeast, worst.as_f64(), 0.0, tol.as_f64()))
}

/// `∫_{phi>0} phi dmu >= ∫_{L phi>0} L phi dmu` for stationary `mu`.
pub fn check_lemma2<T: Scalar>(
    p: &TransitionKernel<T>,
    mu: &Measure<T>,
    phi: &Observable<T>,
    tol: T,
) -> Result<CheckReport> {
    require_stationary(p, mu, tol)?;
    let lhs = positive_integral(phi, mu)?;
    let rhs = positive_integral(&apply_l(p, phi)?, mu)?;
    Ok(CheckReport::new("lemma2", Relation::AtLeast, lhs.as_f64(), rhs.as_f64(), tol.as_f64()))
}
