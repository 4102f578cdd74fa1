//! Discrete state space: partitions of `[0, 1]`, observables and probability
//! measures on their cells.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

/// Compact 1-D domain, normalized to `[0, 1]`. The circle is `R/Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    UnitInterval,
    Circle,
}

impl DomainKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainKind::UnitInterval => "unit_interval",
            DomainKind::Circle => "circle",
        }
    }
}

impl std::str::FromStr for DomainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit_interval" | "interval" => Ok(DomainKind::UnitInterval),
            "circle" => Ok(DomainKind::Circle),
            other => Err(Error::InvalidArgument(format!("unknown domain kind `{other}`"))),
        }
    }
}

/// Finite cell decomposition of the domain.
///
/// Cell `i` is `[boundaries[i], boundaries[i + 1])`; on the circle the last
/// boundary is identified with the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition<T> {
    domain: DomainKind,
    boundaries: Vec<T>,
    uniform: bool,
}

impl<T: Scalar> Partition<T> {
    /// `cells` equal-width cells.
    pub fn uniform(domain: DomainKind, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidArgument("partition needs at least one cell".into()));
        }
        let k = T::from_usize(cells).unwrap();
        let mut boundaries: Vec<T> = (0..=cells)
            .map(|i| T::from_usize(i).unwrap() / k)
            .collect();
        boundaries[cells] = T::one();
        Ok(Partition { domain, boundaries, uniform: true })
    }

    /// Partition from explicit boundaries `0 = b_0 < b_1 < ... < b_K = 1`.
    pub fn from_boundaries(domain: DomainKind, boundaries: Vec<T>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::InvalidArgument("partition needs at least two boundaries".into()));
        }
        if boundaries[0] != T::zero() || *boundaries.last().unwrap() != T::one() {
            return Err(Error::InvalidArgument("partition boundaries must span [0, 1]".into()));
        }
        if boundaries.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidArgument("partition boundaries must be finite".into()));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "partition boundaries must be strictly increasing".into(),
            ));
        }
        let cells = boundaries.len() - 1;
        let uniform = match Partition::<T>::uniform(domain, cells) {
            Ok(u) => u.boundaries == boundaries,
            Err(_) => false,
        };
        Ok(Partition { domain, boundaries, uniform })
    }

    pub fn domain(&self) -> DomainKind {
        self.domain
    }

    pub fn cell_count(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn boundaries(&self) -> &[T] {
        &self.boundaries
    }

    /// `(left, right)` endpoints of cell `i`.
    pub fn cell(&self, i: usize) -> (T, T) {
        (self.boundaries[i], self.boundaries[i + 1])
    }

    pub fn width(&self, i: usize) -> T {
        self.boundaries[i + 1] - self.boundaries[i]
    }

    /// Index of the cell containing `x`, with `x` clamped into `[0, 1]`.
    /// The right endpoint 1 belongs to the last cell.
    pub fn locate(&self, x: T) -> usize {
        let k = self.cell_count();
        if !(x > T::zero()) {
            return 0;
        }
        if x >= T::one() {
            return k - 1;
        }
        if self.uniform {
            let guess = (x * T::from_usize(k).unwrap()).floor().to_usize().unwrap_or(0).min(k - 1);
            // the float guess can be off by one next to a boundary
            if x < self.boundaries[guess] {
                return guess - 1;
            }
            if x >= self.boundaries[guess + 1] {
                return (guess + 1).min(k - 1);
            }
            return guess;
        }
        self.boundaries.partition_point(|b| *b <= x).saturating_sub(1).min(k - 1)
    }

    /// `samples` equally spaced points inside cell `i` (midpoint rule nodes).
    pub fn sample_points(&self, i: usize, samples: usize) -> impl Iterator<Item = T> + '_ {
        let (a, _) = self.cell(i);
        let w = self.width(i);
        let q = T::from_usize(samples).unwrap();
        (0..samples).map(move |s| a + w * (T::from_usize(s).unwrap() + T::lit(0.5)) / q)
    }
}

/// Uniform partition constructor.
pub fn make_uniform_partition<T: Scalar>(domain: DomainKind, cells: usize) -> Result<Partition<T>> {
    Partition::uniform(domain, cells)
}

/// Piecewise-constant function on the cells of a partition.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Observable<T> {
    values: Vec<T>,
}

impl<T: Scalar> Observable<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidObservable("empty observable".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidObservable(format!("non-finite value at cell {i}")));
        }
        Ok(Observable { values })
    }

    pub(crate) fn from_raw(values: Vec<T>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Observable { values }
    }

    pub fn constant(len: usize, c: T) -> Self {
        Observable { values: vec![c; len] }
    }

    /// Characteristic function of `set`.
    pub fn indicator(len: usize, set: &[usize]) -> Self {
        let mut values = vec![T::zero(); len];
        for &i in set {
            values[i] = T::one();
        }
        Observable { values }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    /// `a * self + b * other`
    pub fn combine(&self, a: T, other: &Self, b: T) -> Result<Self> {
        check_dim(self.len(), other.len())?;
        Ok(Observable::from_raw(
            self.values.iter().zip(&other.values).map(|(&x, &y)| a * x + b * y).collect(),
        ))
    }

    /// Pointwise product with the indicator of `set`.
    pub fn restrict(&self, set: &[usize]) -> Self {
        let mut values = vec![T::zero(); self.len()];
        for &i in set {
            values[i] = self.values[i];
        }
        Observable { values }
    }

    /// Indices where the stored value is strictly positive.
    pub fn positive_set(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > T::zero())
            .map(|(i, _)| i)
            .collect()
    }
}

impl<T> std::ops::Index<usize> for Observable<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.values[i]
    }
}

/// Probability vector over the cells of a partition.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Measure<T> {
    weights: Vec<T>,
}

impl<T: Scalar> Measure<T> {
    /// Validates nonnegativity and unit mass. Sums within
    /// [`Scalar::mass_tolerance`] of 1 are renormalized.
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("empty measure".into()));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < T::zero()) {
            return Err(Error::InvalidMeasure(format!(
                "weight at cell {i} is negative or non-finite"
            )));
        }
        let weights = normalize(weights).map_err(|sum| {
            Error::InvalidMeasure(format!("weights sum to {sum}, not 1"))
        })?;
        Ok(Measure { weights })
    }

    pub(crate) fn from_raw(weights: Vec<T>) -> Self {
        Measure { weights }
    }

    pub fn point_mass(len: usize, i: usize) -> Self {
        let mut weights = vec![T::zero(); len];
        weights[i] = T::one();
        Measure { weights }
    }

    pub fn uniform(len: usize) -> Self {
        let w = T::one() / T::from_usize(len).unwrap();
        Measure { weights: vec![w; len] }
    }

    /// Uniform measure on `set`.
    pub fn uniform_on(len: usize, set: &[usize]) -> Self {
        let mut weights = vec![T::zero(); len];
        let w = T::one() / T::from_usize(set.len()).unwrap();
        for &i in set {
            weights[i] = w;
        }
        Measure { weights }
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<T> {
        self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `mu(set)`
    pub fn mass_of(&self, set: &[usize]) -> T {
        set.iter().map(|&i| self.weights[i]).sum()
    }

    /// L1 distance.
    pub fn l1_distance(&self, other: &Self) -> Result<T> {
        check_dim(self.len(), other.len())?;
        Ok(self.weights.iter().zip(&other.weights).map(|(&a, &b)| (a - b).abs()).sum())
    }
}

impl<T> std::ops::Index<usize> for Measure<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.weights[i]
    }
}

/// Renormalizes a nonnegative vector whose sum is near 1. Vectors already
/// within rounding of unit mass are returned untouched, so the operation is
/// idempotent. Returns the offending sum if it is too far away.
pub(crate) fn normalize<T: Scalar>(mut v: Vec<T>) -> std::result::Result<Vec<T>, T> {
    let sum = crate::scalar::compensated_sum(v.iter().copied());
    if (sum - T::one()).abs() > T::mass_tolerance() {
        return Err(sum);
    }
    let floor = T::lit(4.0) * T::epsilon() * T::from_usize(v.len().max(1)).unwrap();
    if (sum - T::one()).abs() > floor {
        for x in &mut v {
            *x /= sum;
        }
    }
    Ok(v)
}

/// Cell averages of `f` at `samples_per_cell` equally spaced midpoints.
pub fn discretize_observable<T, F>(
    f: F,
    partition: &Partition<T>,
    samples_per_cell: usize,
) -> Result<Observable<T>>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    if samples_per_cell == 0 {
        return Err(Error::InvalidArgument("samples_per_cell must be positive".into()));
    }
    let q = T::from_usize(samples_per_cell).unwrap();
    let mut values = Vec::with_capacity(partition.cell_count());
    for i in 0..partition.cell_count() {
        let mut acc = T::zero();
        for x in partition.sample_points(i, samples_per_cell) {
            let y = f(x);
            if !y.is_finite() {
                return Err(Error::InvalidObservable(format!(
                    "function is not finite at x = {x}"
                )));
            }
            acc += y;
        }
        values.push(acc / q);
    }
    Ok(Observable::from_raw(values))
}

/// `∫ phi dmu = Σ_i phi_i mu_i`
pub fn integrate<T: Scalar>(phi: &Observable<T>, mu: &Measure<T>) -> Result<T> {
    check_dim(phi.len(), mu.len())?;
    Ok(dot(phi.values(), mu.weights()))
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}
