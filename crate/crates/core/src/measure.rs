//! Stationary and periodic measures, μ-a.e. invariant sets, ergodicity and
//! ergodic decomposition on a finite state space.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::kernel::TransitionKernel;
use crate::operator::{push, stationarity_residual};
use crate::scalar::Scalar;
use crate::space::Measure;

/// `{ i : mu_i > threshold }`
pub fn support<T: Scalar>(mu: &Measure<T>, threshold: T) -> Vec<usize> {
    mu.weights()
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Fails with [`Error::NotStationary`] unless `‖L* mu - mu‖₁ <= tol`.
pub fn require_stationary<T: Scalar>(p: &TransitionKernel<T>, mu: &Measure<T>, tol: T) -> Result<()> {
    let residual = stationarity_residual(p, mu)?;
    if residual <= tol {
        Ok(())
    } else {
        Err(Error::NotStationary { residual: residual.as_f64(), tol: tol.as_f64() })
    }
}

/// Strongly connected components of the digraph `i -> j iff P_ij > threshold`
/// restricted to the vertices flagged in `active`. Iterative Tarjan.
fn strongly_connected<T: Scalar>(
    p: &TransitionKernel<T>,
    active: &[bool],
    threshold: T,
) -> Vec<Vec<usize>> {
    let k = p.size();
    let mut index = vec![usize::MAX; k];
    let mut low = vec![0usize; k];
    let mut on_stack = vec![false; k];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut next = 0;
    let succ = |v: usize| {
        p.row_entries(v)
            .filter(move |(j, w)| *w > threshold && active[*j])
            .map(|(j, _)| j)
    };

    for root in 0..k {
        if !active[root] || index[root] != usize::MAX {
            continue;
        }
        // (vertex, position in its successor list)
        let mut frames: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&(v, pos)) = frames.last() {
            if let Some(w) = succ(v).nth(pos) {
                frames.last_mut().unwrap().1 += 1;
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    frames.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                frames.pop();
                if let Some(&(parent, _)) = frames.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    components.push(comp);
                }
            }
        }
    }
    components
}

fn closed_within<T: Scalar>(p: &TransitionKernel<T>, active: &[bool], threshold: T) -> Vec<Vec<usize>> {
    let comps = strongly_connected(p, active, threshold);
    let mut owner = vec![usize::MAX; p.size()];
    for (c, comp) in comps.iter().enumerate() {
        for &v in comp {
            owner[v] = c;
        }
    }
    let mut closed: Vec<Vec<usize>> = comps
        .iter()
        .enumerate()
        .filter(|(c, comp)| {
            comp.iter().all(|&v| {
                p.row_entries(v)
                    .filter(|(j, w)| *w > threshold && active[*j])
                    .all(|(j, _)| owner[j] == *c)
            })
        })
        .map(|(_, comp)| comp.clone())
        .collect();
    closed.sort_by_key(|c| c[0]);
    closed
}

/// Closed communicating classes of `i -> j iff P_ij > edge_threshold`,
/// sorted by smallest member.
pub fn closed_classes<T: Scalar>(p: &TransitionKernel<T>, edge_threshold: T) -> Vec<Vec<usize>> {
    closed_within(p, &vec![true; p.size()], edge_threshold)
}

/// Period of an irreducible class: gcd of `level(u) + 1 - level(v)` over the
/// class edges, with BFS levels from the smallest member.
pub fn class_period<T: Scalar>(p: &TransitionKernel<T>, class: &[usize], edge_threshold: T) -> usize {
    let mut member = vec![false; p.size()];
    for &v in class {
        member[v] = true;
    }
    let mut level = vec![usize::MAX; p.size()];
    let mut queue = std::collections::VecDeque::from([class[0]]);
    level[class[0]] = 0;
    let mut g = 0usize;
    while let Some(u) = queue.pop_front() {
        for (v, w) in p.row_entries(u) {
            if !(w > edge_threshold && member[v]) {
                continue;
            }
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                g = gcd(g, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    g.max(1)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// One ergodic stationary measure per closed class.
pub fn stationary_measures<T: Scalar>(
    p: &TransitionKernel<T>,
    tol: T,
    max_iter: u64,
) -> Result<Vec<Measure<T>>> {
    stationary_measures_with_threshold(p, tol, max_iter, T::zero())
}

/// As [`stationary_measures`], with a configurable edge threshold for the
/// class structure.
///
/// Each class is solved by Cesàro averaging of `xQ, ..., xQ^d` over
/// one period `d` of the class, restarted from the average until
/// `‖aQ - a‖₁ <= tol`.
pub fn stationary_measures_with_threshold<T: Scalar>(
    p: &TransitionKernel<T>,
    tol: T,
    max_iter: u64,
    edge_threshold: T,
) -> Result<Vec<Measure<T>>> {
    if !(tol > T::zero()) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let classes = closed_classes(p, edge_threshold);
    classes
        .par_iter()
        .map(|class| {
            let d = class_period(p, class, edge_threshold);
            let q = p.restrict(class);
            let local = cesaro_fixed_point(&q, d, tol, max_iter)?;
            let mut weights = vec![T::zero(); p.size()];
            for (&state, w) in class.iter().zip(local) {
                weights[state] = w;
            }
            let mu = Measure::from_raw(weights);
            let residual = stationarity_residual(p, &mu)?;
            if residual > tol {
                return Err(Error::Convergence { residual: residual.as_f64(), iterations: max_iter });
            }
            Ok(mu)
        })
        .collect()
}

fn cesaro_fixed_point<T: Scalar>(
    q: &TransitionKernel<T>,
    period: usize,
    tol: T,
    max_iter: u64,
) -> Result<Vec<T>> {
    let n = q.size();
    let mut x = vec![T::one() / T::from_usize(n).unwrap(); n];
    let mut used = 0u64;
    let mut residual = T::infinity();
    while used < max_iter {
        let mut sum = vec![T::zero(); n];
        let mut y = x.clone();
        for _ in 0..period {
            y = push(q, &y);
            for (s, v) in sum.iter_mut().zip(&y) {
                *s += *v;
            }
        }
        used += period as u64;
        let total: T = sum.iter().copied().sum();
        let a: Vec<T> = sum.iter().map(|s| *s / total).collect();
        let image = push(q, &a);
        used += 1;
        residual = image.iter().zip(&a).map(|(u, v)| (*u - *v).abs()).sum();
        if residual <= tol {
            return Ok(a);
        }
        x = a;
    }
    Err(Error::Convergence { residual: residual.as_f64(), iterations: used })
}

/// Minimal μ-a.e. invariant sets of a stationary measure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InvariantSetReport {
    /// Closed classes of `P` restricted to `supp mu`, sorted by smallest member.
    pub generators: Vec<Vec<usize>>,
    /// Number of invariant sets modulo μ-null sets, `2^generators`
    /// (saturating).
    pub lattice_size: u128,
}

/// Largest violation over `supp mu` of the invariance criterion
/// `P(i, A) = 1` for `i ∈ A`, `P(i, A) = 0` for `i ∉ A`.
pub fn invariance_violation<T: Scalar>(p: &TransitionKernel<T>, mu: &Measure<T>, set: &[usize]) -> Result<T> {
    check_dim(p.size(), mu.len())?;
    let mut mask = vec![false; p.size()];
    for &i in set {
        mask[i] = true;
    }
    let mut worst = T::zero();
    for i in support(mu, T::zero()) {
        let mass = p.mass_into(i, &mask);
        let v = if mask[i] { T::one() - mass } else { mass };
        worst = worst.max(v);
    }
    Ok(worst)
}

/// Whether `set` is μ-a.e. `L`-invariant within `tol`.
pub fn is_invariant_set<T: Scalar>(p: &TransitionKernel<T>, mu: &Measure<T>, set: &[usize], tol: T) -> Result<bool> {
    Ok(invariance_violation(p, mu, set)? <= tol)
}

pub fn invariant_sets<T: Scalar>(p: &TransitionKernel<T>, mu: &Measure<T>, tol: T) -> Result<InvariantSetReport> {
    require_stationary(p, mu, tol)?;
    let supp = support(mu, T::zero());
    let mut active = vec![false; p.size()];
    for &i in &supp {
        active[i] = true;
    }
    let generators = closed_within(p, &active, T::zero());
    let covered: usize = generators.iter().map(Vec::len).sum();
    if covered != supp.len() {
        let mut inside = vec![false; p.size()];
        for g in &generators {
            for &i in g {
                inside[i] = true;
            }
        }
        let transient: Vec<usize> = supp.into_iter().filter(|&i| !inside[i]).collect();
        return Err(Error::Precondition(format!(
            "support of mu contains transient states {transient:?}"
        )));
    }
    let lattice_size = 1u128.checked_shl(generators.len() as u32).unwrap_or(u128::MAX);
    Ok(InvariantSetReport { generators, lattice_size })
}

pub fn is_ergodic<T: Scalar>(p: &TransitionKernel<T>, mu: &Measure<T>, tol: T) -> Result<bool> {
    Ok(invariant_sets(p, mu, tol)?.generators.len() == 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicComponent<T> {
    pub weight: T,
    pub measure: Measure<T>,
}

/// `mu = Σ weight_k measure_k` with ergodic `measure_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicDecomposition<T> {
    pub components: Vec<ErgodicComponent<T>>,
}

impl<T: Scalar> ErgodicDecomposition<T> {
    pub fn reconstruct(&self) -> Vec<T> {
        let k = self.components.first().map_or(0, |c| c.measure.len());
        let mut out = vec![T::zero(); k];
        for c in &self.components {
            for (o, w) in out.iter_mut().zip(c.measure.weights()) {
                *o += c.weight * *w;
            }
        }
        out
    }
}

/// Conditions `mu` on each generator of its invariant-set lattice.
pub fn ergodic_decomposition<T: Scalar>(
    p: &TransitionKernel<T>,
    mu: &Measure<T>,
    tol: T,
) -> Result<ErgodicDecomposition<T>> {
    let report = invariant_sets(p, mu, tol)?;
    let components = report
        .generators
        .iter()
        .map(|g| {
            let weight = mu.mass_of(g);
            let mut weights = vec![T::zero(); mu.len()];
            for &i in g {
                weights[i] = mu[i] / weight;
            }
            ErgodicComponent { weight, measure: Measure::from_raw(weights) }
        })
        .collect();
    Ok(ErgodicDecomposition { components })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicMeasure<T> {
    pub measure: Measure<T>,
    pub minimal_period: u64,
}

/// Ergodic fixed points of `(L*)^p`, each with its minimal period: the
/// smallest divisor `d` of `p` with `‖(L*)^d ν - ν‖₁ <= tol`.
pub fn periodic_measures<T: Scalar>(
    p: &TransitionKernel<T>,
    period: u64,
    tol: T,
    max_iter: u64,
) -> Result<Vec<PeriodicMeasure<T>>> {
    if period == 0 {
        return Err(Error::InvalidArgument("period must be at least 1".into()));
    }
    let q = p.power(period)?;
    let fixed = stationary_measures(&q, tol, max_iter)?;
    Ok(fixed
        .into_iter()
        .map(|nu| {
            let minimal_period = minimal_period(p, &nu, period, tol);
            PeriodicMeasure { measure: nu, minimal_period }
        })
        .collect())
}

fn minimal_period<T: Scalar>(p: &TransitionKernel<T>, nu: &Measure<T>, period: u64, tol: T) -> u64 {
    let mut image = nu.weights().to_vec();
    let mut steps = 0u64;
    for d in (1..=period).filter(|d| period % d == 0) {
        while steps < d {
            image = push(p, &image);
            steps += 1;
        }
        let dist: T = image.iter().zip(nu.weights()).map(|(a, b)| (*a - *b).abs()).sum();
        if dist <= tol {
            return d;
        }
    }
    period
}
