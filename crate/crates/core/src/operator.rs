//! The transfer operator `L` on observables and its dual `L*` on measures.

use num_complex::Complex;

use crate::error::{check_dim, Result};
use crate::kernel::TransitionKernel;
use crate::scalar::Scalar;
use crate::space::{dot, integrate, Measure, Observable};

/// `(L phi)_i = Σ_j P_ij phi_j`
pub fn apply_l<T: Scalar>(p: &TransitionKernel<T>, phi: &Observable<T>) -> Result<Observable<T>> {
    check_dim(p.size(), phi.len())?;
    Ok(Observable::from_raw(act(p, phi.values())))
}

/// `(L* mu)_j = Σ_i mu_i P_ij`
pub fn apply_l_star<T: Scalar>(p: &TransitionKernel<T>, mu: &Measure<T>) -> Result<Measure<T>> {
    check_dim(p.size(), mu.len())?;
    Ok(Measure::from_raw(push(p, mu.weights())))
}

/// `L` acting on a complex observable, real and imaginary parts separately.
pub fn apply_l_complex<T: Scalar>(
    p: &TransitionKernel<T>,
    phi: &[Complex<T>],
) -> Result<Vec<Complex<T>>> {
    check_dim(p.size(), phi.len())?;
    let re: Vec<T> = phi.iter().map(|z| z.re).collect();
    let im: Vec<T> = phi.iter().map(|z| z.im).collect();
    Ok(act(p, &re).into_iter().zip(act(p, &im)).map(|(a, b)| Complex::new(a, b)).collect())
}

pub(crate) fn act<T: Scalar>(p: &TransitionKernel<T>, v: &[T]) -> Vec<T> {
    (0..p.size())
        .map(|i| {
            let (cols, vals) = p.row(i);
            let mut acc = T::zero();
            for (&j, &w) in cols.iter().zip(vals) {
                acc += w * v[j];
            }
            acc
        })
        .collect()
}

pub(crate) fn push<T: Scalar>(p: &TransitionKernel<T>, w: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); p.size()];
    for (i, &wi) in w.iter().enumerate() {
        if wi == T::zero() {
            continue;
        }
        for (j, pij) in p.row_entries(i) {
            out[j] += wi * pij;
        }
    }
    out
}

/// `|∫ phi d(L* mu) - ∫ L phi dmu|`
pub fn duality_gap<T: Scalar>(
    p: &TransitionKernel<T>,
    phi: &Observable<T>,
    mu: &Measure<T>,
) -> Result<T> {
    let left = integrate(phi, &apply_l_star(p, mu)?)?;
    let right = integrate(&apply_l(p, phi)?, mu)?;
    Ok((left - right).abs())
}

/// `‖L* mu - mu‖₁`
pub fn stationarity_residual<T: Scalar>(p: &TransitionKernel<T>, mu: &Measure<T>) -> Result<T> {
    let image = apply_l_star(p, mu)?;
    image.l1_distance(mu)
}

pub fn positive_part<T: Scalar>(phi: &Observable<T>) -> Observable<T> {
    Observable::from_raw(phi.values().iter().map(|&v| v.max(T::zero())).collect())
}

pub fn negative_part<T: Scalar>(phi: &Observable<T>) -> Observable<T> {
    Observable::from_raw(phi.values().iter().map(|&v| -(v.min(T::zero()))).collect())
}

/// `∫_{phi > 0} phi dmu`
pub fn positive_integral<T: Scalar>(phi: &Observable<T>, mu: &Measure<T>) -> Result<T> {
    check_dim(phi.len(), mu.len())?;
    Ok(dot(positive_part(phi).values(), mu.weights()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::kernel_from_rows;

    fn swap() -> TransitionKernel<f64> {
        kernel_from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn l_examples() {
        let p = kernel_from_rows(&[vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
        let ones = apply_l(&p, &Observable::constant(2, 1.0)).unwrap();
        assert!(ones.values().iter().all(|v: &f64| (v - 1.0).abs() < 1e-15));
        let phi = Observable::new(vec![1.0, -2.0]).unwrap();
        assert_eq!(apply_l(&swap(), &phi).unwrap().values(), &[-2.0, 1.0]);
        assert!(apply_l(&swap(), &Observable::constant(3, 1.0)).is_err());
    }

    #[test]
    fn l_star_examples() {
        let id = TransitionKernel::<f64>::identity(3);
        let mu = Measure::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(apply_l_star(&id, &mu).unwrap(), mu);
        let delta = Measure::point_mass(2, 0);
        assert_eq!(apply_l_star(&swap(), &delta).unwrap().weights(), &[0.0, 1.0]);
        assert!(apply_l_star(&swap(), &mu).is_err());
    }

    #[test]
    fn duality_examples() {
        let p = kernel_from_rows(&[vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
        let mu = Measure::new(vec![0.9, 0.1]).unwrap();
        assert!(duality_gap(&p, &Observable::constant(2, 3.5), &mu).unwrap() < 1e-15);
        let id = TransitionKernel::identity(2);
        let phi = Observable::new(vec![0.123, -4.5]).unwrap();
        assert_eq!(duality_gap(&id, &phi, &mu).unwrap(), 0.0);
    }

    #[test]
    fn parts() {
        let phi = Observable::new(vec![1.0, -2.0]).unwrap();
        assert_eq!(positive_part(&phi).values(), &[1.0, 0.0]);
        assert_eq!(negative_part(&phi).values(), &[0.0, 2.0]);
        let pos = Observable::new(vec![0.0, 3.0]).unwrap();
        assert_eq!(positive_part(&pos), pos);
        assert_eq!(negative_part(&pos).values(), &[0.0, 0.0]);
    }

    #[test]
    fn complex_action_is_componentwise() {
        let p = kernel_from_rows(&[vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap();
        let z = vec![Complex::new(1.0, 2.0), Complex::new(-1.0, 0.5)];
        let out = apply_l_complex(&p, &z).unwrap();
        assert_eq!(out[0], Complex::new(0.0, 1.25));
        assert_eq!(out[1], Complex::new(-1.0, 0.5));
    }
}
