//! Dense univariate polynomials over a generic scalar.
//!
//! The same type carries exact rational arithmetic (chain polynomials,
//! symbols of operator words) and floating point evaluation.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{FromPrimitive, Num, Zero};

/// Scalars a [`Poly`] can be built over.
pub trait Scalar: Clone + Num + Neg<Output = Self> + fmt::Debug {}
impl<T: Clone + Num + Neg<Output = T> + fmt::Debug> Scalar for T {}

/// Polynomial with coefficients in ascending powers; trailing zeros are trimmed.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Poly<T> {
    coeffs: Vec<T>,
}

impl<T: Scalar> Poly<T> {
    pub fn new(mut coeffs: Vec<T>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: T) -> Self {
        Poly::new(vec![c])
    }

    /// The monomial `c * u^k`.
    pub fn monomial(c: T, k: usize) -> Self {
        let mut coeffs = vec![T::zero(); k + 1];
        coeffs[k] = c;
        Poly::new(coeffs)
    }

    /// The identity polynomial `u`.
    pub fn x() -> Self {
        Poly::monomial(T::one(), 1)
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Coefficient of `u^k` (zero past the degree).
    pub fn coeff(&self, k: usize) -> T {
        self.coeffs.get(k).cloned().unwrap_or_else(T::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Lowest power with a nonzero coefficient, `None` for the zero polynomial.
    pub fn valuation(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    pub fn eval(&self, u: &T) -> T {
        self.coeffs
            .iter()
            .rev()
            .fold(T::zero(), |acc, c| acc * u.clone() + c.clone())
    }

    /// Evaluate at a point of a (possibly different) ring the coefficients embed into.
    pub fn eval_with<U, F>(&self, u: U, embed: F) -> U
    where
        U: Clone + Num,
        F: Fn(&T) -> U,
    {
        self.coeffs
            .iter()
            .rev()
            .fold(U::zero(), |acc, c| acc * u.clone() + embed(c))
    }

    pub fn scale(&self, c: &T) -> Self {
        Poly::new(self.coeffs.iter().map(|a| a.clone() * c.clone()).collect())
    }

    pub fn map<U: Scalar, F: Fn(&T) -> U>(&self, f: F) -> Poly<U> {
        Poly::new(self.coeffs.iter().map(f).collect())
    }

    pub fn derivative(&self) -> Self
    where
        T: FromPrimitive,
    {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c.clone() * T::from_usize(k).expect("index fits scalar"))
                .collect(),
        )
    }

    /// Antiderivative with zero constant term.
    pub fn antiderivative(&self) -> Self
    where
        T: FromPrimitive,
    {
        let mut out = Vec::with_capacity(self.coeffs.len() + 1);
        out.push(T::zero());
        for (k, c) in self.coeffs.iter().enumerate() {
            out.push(c.clone() / T::from_usize(k + 1).expect("index fits scalar"));
        }
        Poly::new(out)
    }

    /// Multiply by `u^k`.
    pub fn shift_up(&self, k: usize) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let mut out = vec![T::zero(); k];
        out.extend(self.coeffs.iter().cloned());
        Poly::new(out)
    }

    /// Divide by `u^k`; the caller guarantees valuation `>= k`.
    pub fn shift_down(&self, k: usize) -> Self {
        debug_assert!(self.valuation().is_none_or(|v| v >= k));
        Poly::new(self.coeffs.iter().skip(k).cloned().collect())
    }

    pub fn pow(&self, k: usize) -> Self {
        (0..k).fold(Poly::constant(T::one()), |acc, _| &acc * self)
    }

    /// Substitute `u -> c * u`.
    pub fn rescale_arg(&self, c: &T) -> Self {
        let mut factor = T::one();
        let mut out = Vec::with_capacity(self.coeffs.len());
        for a in &self.coeffs {
            out.push(a.clone() * factor.clone());
            factor = factor * c.clone();
        }
        Poly::new(out)
    }
}

impl<T: Scalar> Add for &Poly<T> {
    type Output = Poly<T>;
    fn add(self, rhs: &Poly<T>) -> Poly<T> {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl<T: Scalar> Sub for &Poly<T> {
    type Output = Poly<T>;
    fn sub(self, rhs: &Poly<T>) -> Poly<T> {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl<T: Scalar> Mul for &Poly<T> {
    type Output = Poly<T>;
    fn mul(self, rhs: &Poly<T>) -> Poly<T> {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![T::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        Poly::new(out)
    }
}

impl<T: Scalar> Neg for &Poly<T> {
    type Output = Poly<T>;
    fn neg(self) -> Poly<T> {
        Poly::new(self.coeffs.iter().map(|c| -c.clone()).collect())
    }
}

impl<T: Scalar> Zero for Poly<T> {
    fn zero() -> Self {
        Poly::zero()
    }
    fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }
}

impl<T: Scalar> Add for Poly<T> {
    type Output = Poly<T>;
    fn add(self, rhs: Poly<T>) -> Poly<T> {
        &self + &rhs
    }
}

impl<T: Scalar + fmt::Display> fmt::Display for Poly<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, "({c})*u")?,
                _ => write!(f, "({c})*u^{k}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn degree_and_valuation() {
        let p = Poly::new(vec![0.0, 0.0, 3.0, 1.0, 0.0]);
        assert_eq!(p.degree(), Some(3));
        assert_eq!(p.valuation(), Some(2));
        assert_eq!(Poly::<f64>::zero().degree(), None);
    }

    #[test]
    fn calculus_is_exact_over_rationals() {
        let p = Poly::new(vec![q(1, 1), q(-2, 3), q(5, 7)]);
        assert_eq!(p.antiderivative().derivative(), p);
        assert_eq!(p.antiderivative().coeff(3), q(5, 21));
    }

    #[test]
    fn product_and_evaluation_agree() {
        let a = Poly::new(vec![1.0, -2.0, 0.5]);
        let b = Poly::new(vec![0.0, 3.0]);
        let ab = &a * &b;
        for u in [-1.3f64, 0.0, 0.4, 2.0] {
            assert!((ab.eval(&u) - a.eval(&u) * b.eval(&u)).abs() < 1e-12);
        }
        assert_eq!(b.pow(3).coeffs(), &[0.0, 0.0, 0.0, 27.0]);
    }
}
