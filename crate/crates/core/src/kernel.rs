//! Finite transition kernels: validated ingestion, Ulam discretization of
//! noisy maps, and kernel powers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;
use crate::space::{normalize, Partition};

/// Deterministic part of a noisy system, in the normalized coordinate `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseMap {
    /// `x -> x + angle (mod 1)`
    Rotation { angle: f64 },
    /// `x -> 2x (mod 1)`
    Doubling,
    /// `x -> r x (1 - x)`
    Logistic { r: f64 },
    /// Continuous piecewise-affine lift starting at `intercept`, with
    /// `slopes[k]` on the `k`-th piece between consecutive interior
    /// `breakpoints`.
    PiecewiseLinear {
        breakpoints: Vec<f64>,
        slopes: Vec<f64>,
        #[serde(default)]
        intercept: f64,
    },
}

impl BaseMap {
    fn validate(&self) -> Result<()> {
        match self {
            BaseMap::Rotation { angle } => {
                if !(0.0..1.0).contains(angle) {
                    return Err(Error::InvalidArgument(format!(
                        "rotation angle {angle} outside [0, 1)"
                    )));
                }
            }
            BaseMap::Doubling => {}
            BaseMap::Logistic { r } => {
                if !(0.0..=4.0).contains(r) {
                    return Err(Error::InvalidArgument(format!(
                        "logistic parameter {r} outside [0, 4]"
                    )));
                }
            }
            BaseMap::PiecewiseLinear { breakpoints, slopes, intercept } => {
                if slopes.len() != breakpoints.len() + 1 {
                    return Err(Error::InvalidArgument(format!(
                        "piecewise_linear needs {} slopes for {} breakpoints, got {}",
                        breakpoints.len() + 1,
                        breakpoints.len(),
                        slopes.len()
                    )));
                }
                let mut prev = 0.0;
                for &b in breakpoints {
                    if !(b > prev && b < 1.0) {
                        return Err(Error::InvalidArgument(
                            "piecewise_linear breakpoints must be strictly increasing inside (0, 1)"
                                .into(),
                        ));
                    }
                    prev = b;
                }
                if !intercept.is_finite() || slopes.iter().any(|s| !s.is_finite()) {
                    return Err(Error::InvalidArgument(
                        "piecewise_linear parameters must be finite".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Image of `x`. Rotation and doubling are reduced mod 1; the piecewise
    /// lift is returned unreduced.
    pub fn eval<T: Scalar>(&self, x: T) -> T {
        match self {
            BaseMap::Rotation { angle } => frac(x + T::lit(*angle)),
            BaseMap::Doubling => frac(x + x),
            BaseMap::Logistic { r } => T::lit(*r) * x * (T::one() - x),
            BaseMap::PiecewiseLinear { breakpoints, slopes, intercept } => {
                let mut y = T::lit(*intercept);
                let mut left = T::zero();
                for (k, &s) in slopes.iter().enumerate() {
                    let right = breakpoints.get(k).map_or(T::one(), |&b| T::lit(b));
                    if x < right || k == slopes.len() - 1 {
                        return y + T::lit(s) * (x - left);
                    }
                    y += T::lit(s) * (right - left);
                    left = right;
                }
                y
            }
        }
    }

    /// Closed hull of the image of `[0, 1]`, when it is cheap to know.
    fn range(&self) -> (f64, f64) {
        match self {
            BaseMap::Rotation { .. } | BaseMap::Doubling => (0.0, 1.0),
            BaseMap::Logistic { r } => (0.0, r / 4.0),
            BaseMap::PiecewiseLinear { breakpoints, .. } => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                let knots = std::iter::once(0.0).chain(breakpoints.iter().copied()).chain([1.0]);
                for x in knots {
                    let y = self.eval(x);
                    lo = lo.min(y);
                    hi = hi.max(y);
                }
                (lo, hi)
            }
        }
    }
}

fn frac<T: Scalar>(x: T) -> T {
    let f = x - x.floor();
    if f >= T::one() {
        T::zero()
    } else {
        f
    }
}

/// Noise law added to the image of the base map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Noise {
    Uniform { half_width: f64 },
    WrappedGaussian { sigma: f64 },
    None,
}

/// Gaussian noise is truncated at this many standard deviations.
pub const GAUSSIAN_TRUNCATION: f64 = 6.0;

impl Noise {
    fn validate(&self) -> Result<()> {
        match self {
            Noise::Uniform { half_width } => {
                if *half_width == 0.0 {
                    return Err(Error::InvalidArgument(
                        "uniform noise with zero half-width; use noise = none".into(),
                    ));
                }
                if !(*half_width > 0.0 && half_width.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "uniform half-width {half_width} must be positive"
                    )));
                }
            }
            Noise::WrappedGaussian { sigma } => {
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidArgument(format!("sigma {sigma} must be positive")));
                }
            }
            Noise::None => {}
        }
        Ok(())
    }

    /// Half-width of the support of the noise law.
    fn reach(&self) -> f64 {
        match self {
            Noise::Uniform { half_width } => *half_width,
            Noise::WrappedGaussian { sigma } => GAUSSIAN_TRUNCATION * sigma,
            Noise::None => 0.0,
        }
    }

    /// CDF of the centred noise at `t`.
    fn cdf<T: Scalar>(&self, t: T) -> T {
        match self {
            Noise::Uniform { half_width } => {
                let d = T::lit(*half_width);
                ((t + d) / (d + d)).max(T::zero()).min(T::one())
            }
            Noise::WrappedGaussian { sigma } => {
                let z = t.as_f64() / sigma;
                if z <= -GAUSSIAN_TRUNCATION {
                    return T::zero();
                }
                if z >= GAUSSIAN_TRUNCATION {
                    return T::one();
                }
                let phi = |u: f64| 0.5 * (1.0 + libm::erf(u / std::f64::consts::SQRT_2));
                let lo = phi(-GAUSSIAN_TRUNCATION);
                let hi = phi(GAUSSIAN_TRUNCATION);
                T::lit((phi(z) - lo) / (hi - lo))
            }
            Noise::None => {
                if t >= T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

/// How mass leaving `[0, 1]` is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Identify 0 and 1 (circle).
    Wrap,
    /// Overflow mass lands on the boundary cells.
    Clamp,
}

/// Base map plus noise law, the generator of `P(x, .)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoisySystem {
    pub map: BaseMap,
    pub noise: Noise,
    pub boundary: Boundary,
}

impl NoisySystem {
    pub fn new(map: BaseMap, noise: Noise, boundary: Boundary) -> Result<Self> {
        let s = NoisySystem { map, noise, boundary };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.map.validate()?;
        self.noise.validate()?;
        if self.noise == Noise::None && self.boundary == Boundary::Clamp {
            let (lo, hi) = self.map.range();
            if lo < 0.0 || hi > 1.0 {
                return Err(Error::InvalidArgument(
                    "noise = none with clamp boundary needs a map with range inside [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Row-stochastic `K x K` matrix in compressed sparse row form.
///
/// Only strictly positive entries are stored; columns within a row are
/// sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel<T> {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
    partition: Option<Partition<T>>,
}

impl<T: Scalar> TransitionKernel<T> {
    /// Validated kernel from a dense square matrix.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::InvalidKernel("empty matrix".into()));
        }
        let sparse = rows
            .iter()
            .map(|row| {
                check_dim(k, row.len())?;
                Ok(row.iter().copied().enumerate().collect())
            })
            .collect::<Result<Vec<Vec<(usize, T)>>>>()?;
        Self::from_sparse_rows(k, sparse)
    }

    /// Validated kernel from `(column, probability)` lists, one per row.
    pub fn from_sparse_rows(k: usize, rows: Vec<Vec<(usize, T)>>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidKernel("empty matrix".into()));
        }
        check_dim(k, rows.len())?;
        let mut row_ptr = Vec::with_capacity(k + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            let mut entries = Vec::with_capacity(row.len());
            let mut last = None;
            for (j, p) in row {
                if j >= k {
                    return Err(Error::InvalidKernel(format!(
                        "row {i}: column {j} out of range for K = {k}"
                    )));
                }
                if last == Some(j) {
                    return Err(Error::InvalidKernel(format!("row {i}: duplicate column {j}")));
                }
                last = Some(j);
                if !p.is_finite() || p < T::zero() {
                    return Err(Error::InvalidKernel(format!(
                        "row {i}, column {j}: entry {p} is negative or non-finite"
                    )));
                }
                if p > T::zero() {
                    entries.push((j, p));
                }
            }
            let probs = normalize(entries.iter().map(|e| e.1).collect()).map_err(|sum| {
                Error::InvalidKernel(format!("row {i} sums to {sum}, not 1"))
            })?;
            for ((j, _), p) in entries.into_iter().zip(probs) {
                cols.push(j);
                vals.push(p);
            }
            row_ptr.push(cols.len());
        }
        Ok(TransitionKernel { row_ptr, cols, vals, partition: None })
    }

    /// Rows already known to be stochastic, sorted and strictly positive.
    pub(crate) fn from_csr_unchecked(row_ptr: Vec<usize>, cols: Vec<usize>, vals: Vec<T>) -> Self {
        TransitionKernel { row_ptr, cols, vals, partition: None }
    }

    pub fn identity(k: usize) -> Self {
        TransitionKernel {
            row_ptr: (0..=k).collect(),
            cols: (0..k).collect(),
            vals: vec![T::one(); k],
            partition: None,
        }
    }

    /// Attach the partition the kernel was discretized on.
    pub fn with_partition(mut self, partition: Partition<T>) -> Result<Self> {
        check_dim(self.size(), partition.cell_count())?;
        self.partition = Some(partition);
        Ok(self)
    }

    pub fn partition(&self) -> Option<&Partition<T>> {
        self.partition.as_ref()
    }

    /// Number of states `K`.
    pub fn size(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column indices and probabilities of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let (c, v) = self.row(i);
        c.iter().copied().zip(v.iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (c, v) = self.row(i);
        match c.binary_search(&j) {
            Ok(pos) => v[pos],
            Err(_) => T::zero(),
        }
    }

    /// `P(i, set)` for a set given as a membership mask.
    pub fn mass_into(&self, i: usize, mask: &[bool]) -> T {
        self.row_entries(i).filter(|(j, _)| mask[*j]).map(|(_, p)| p).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let k = self.size();
        (0..k)
            .map(|i| {
                let mut row = vec![T::zero(); k];
                for (j, p) in self.row_entries(i) {
                    row[j] = p;
                }
                row
            })
            .collect()
    }

    /// `max_i |Σ_j P_ij - 1|`
    pub fn max_row_sum_deviation(&self) -> T {
        (0..self.size())
            .map(|i| (self.row(i).1.iter().copied().sum::<T>() - T::one()).abs())
            .fold(T::zero(), T::max)
    }

    pub fn column_sums(&self) -> Vec<T> {
        let mut sums = vec![T::zero(); self.size()];
        for (j, p) in self.cols.iter().zip(&self.vals) {
            sums[*j] += *p;
        }
        sums
    }

    /// Matrix product `self * other`. Rows are renormalized so that
    /// rounding drift does not compound under repeated squaring.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        check_dim(self.size(), other.size())?;
        let k = self.size();
        let rows: Vec<Vec<(usize, T)>> = (0..k)
            .into_par_iter()
            .map_init(
                || (vec![T::zero(); k], vec![false; k], Vec::new()),
                |(acc, seen, touched), i| {
                    touched.clear();
                    for (m, p) in self.row_entries(i) {
                        for (j, q) in other.row_entries(m) {
                            if !seen[j] {
                                seen[j] = true;
                                touched.push(j);
                            }
                            acc[j] += p * q;
                        }
                    }
                    touched.sort_unstable();
                    let mut row: Vec<(usize, T)> = touched
                        .iter()
                        .filter_map(|&j| {
                            let v = acc[j];
                            acc[j] = T::zero();
                            seen[j] = false;
                            (v > T::zero()).then_some((j, v))
                        })
                        .collect();
                    renormalize(&mut row);
                    row
                },
            )
            .collect();
        Ok(Self::assemble(rows))
    }

    fn assemble(rows: Vec<Vec<(usize, T)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (j, p) in row {
                cols.push(j);
                vals.push(p);
            }
            row_ptr.push(cols.len());
        }
        Self::from_csr_unchecked(row_ptr, cols, vals)
    }

    /// Kernel of `L^p` by binary exponentiation. `p = 1` returns an exact copy.
    pub fn power(&self, p: u64) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidArgument("kernel power must be at least 1".into()));
        }
        let mut result: Option<Self> = None;
        let mut base = self.clone();
        let mut e = p;
        loop {
            if e & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => r.compose(&base)?,
                });
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            base = base.compose(&base)?;
        }
        let mut out = result.expect("p >= 1");
        out.partition = self.partition.clone();
        Ok(out)
    }

    /// Sub-kernel on `states` (sorted), re-indexed `0..states.len()`.
    /// Mass leaving `states` is dropped and rows are rescaled.
    pub(crate) fn restrict(&self, states: &[usize]) -> Self {
        let mut index = vec![usize::MAX; self.size()];
        for (new, &old) in states.iter().enumerate() {
            index[old] = new;
        }
        let rows = states
            .iter()
            .map(|&i| {
                let inside: Vec<(usize, T)> = self
                    .row_entries(i)
                    .filter(|(j, _)| index[*j] != usize::MAX)
                    .map(|(j, p)| (index[j], p))
                    .collect();
                let total: T = inside.iter().map(|e| e.1).sum();
                if total == T::one() || total == T::zero() {
                    inside
                } else {
                    inside.into_iter().map(|(j, p)| (j, p / total)).collect()
                }
            })
            .collect();
        Self::assemble(rows)
    }
}

/// Rescales a row to unit mass.
fn renormalize<T: Scalar>(row: &mut [(usize, T)]) {
    let sum = crate::scalar::compensated_sum(row.iter().map(|e| e.1));
    if sum > T::zero() && sum != T::one() {
        for e in row.iter_mut() {
            e.1 /= sum;
        }
    }
}

/// Kernel of `L^p`.
pub fn kernel_power<T: Scalar>(p: &TransitionKernel<T>, exponent: u64) -> Result<TransitionKernel<T>> {
    p.power(exponent)
}

/// Validated ingestion of a dense matrix.
pub fn kernel_from_rows<T: Scalar>(rows: &[Vec<T>]) -> Result<TransitionKernel<T>> {
    TransitionKernel::from_rows(rows)
}

/// Default number of quadrature nodes per cell.
pub const DEFAULT_QUADRATURE_POINTS: usize = 16;

/// Ulam matrix of `system` on `partition`.
///
/// Entry `(i, j)` is the midpoint-rule average over `quadrature_points`
/// nodes `x` in cell `i` of the noise mass that cell `j` receives around
/// the image of `x`.
pub fn ulam_discretize<T: Scalar>(
    system: &NoisySystem,
    partition: &Partition<T>,
    quadrature_points: usize,
) -> Result<TransitionKernel<T>> {
    system.validate()?;
    if quadrature_points == 0 {
        return Err(Error::InvalidArgument("quadrature_points must be positive".into()));
    }
    let k = partition.cell_count();
    let q = T::from_usize(quadrature_points).unwrap();
    let rows: Vec<Vec<(usize, T)>> = (0..k)
        .into_par_iter()
        .map_init(
            || vec![T::zero(); k],
            |acc, i| {
                for x in partition.sample_points(i, quadrature_points) {
                    let y = system.map.eval(x);
                    deposit(system, partition, y, acc);
                }
                let mut row = Vec::new();
                for (j, slot) in acc.iter_mut().enumerate() {
                    if *slot > T::zero() {
                        row.push((j, *slot / q));
                    }
                    *slot = T::zero();
                }
                row
            },
        )
        .collect();
    TransitionKernel::from_sparse_rows(k, rows)?.with_partition(partition.clone())
}

/// Adds the cell masses of `P(x, .)` for a point with image `y` into `acc`.
fn deposit<T: Scalar>(system: &NoisySystem, partition: &Partition<T>, y: T, acc: &mut [T]) {
    let k = partition.cell_count();
    let noise = &system.noise;
    if *noise == Noise::None {
        let y = match system.boundary {
            Boundary::Wrap => frac(y),
            Boundary::Clamp => y.max(T::zero()).min(T::one()),
        };
        acc[partition.locate(y)] += T::one();
        return;
    }
    let reach = T::lit(noise.reach());
    let (lo, hi) = (y - reach, y + reach);
    match system.boundary {
        Boundary::Wrap => {
            let first = lo.floor().to_i64().unwrap();
            let last = hi.floor().to_i64().unwrap();
            for shift in first..=last {
                let s = T::from_i64(shift).unwrap();
                let a = (lo - s).max(T::zero());
                let b = (hi - s).min(T::one());
                if a >= b {
                    continue;
                }
                for j in partition.locate(a)..=partition.locate(b) {
                    let (ca, cb) = partition.cell(j);
                    let m = noise.cdf(cb + s - y) - noise.cdf(ca + s - y);
                    if m > T::zero() {
                        acc[j] += m;
                    }
                }
            }
        }
        Boundary::Clamp => {
            let first = partition.locate(lo);
            let last = partition.locate(hi);
            for j in first..=last {
                let (ca, cb) = partition.cell(j);
                let upper = if j == k - 1 { T::one() } else { noise.cdf(cb - y) };
                let lower = if j == 0 { T::zero() } else { noise.cdf(ca - y) };
                let m = upper - lower;
                if m > T::zero() {
                    acc[j] += m;
                }
            }
        }
    }
}
