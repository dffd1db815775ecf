//! The unitary `U: L²[0,1] -> H²`, Szegő kernels, the backward shift and the
//! composition operator `C_β`, `β(z) = 1/(2-z)`.
//!
//! `U x^s = (1/(s+1)) k_w` with `w = conj(s)/(conj(s)+1)`, and under `U`
//! the generators become `Ĥ = 1 - S*`, `V̂ = (1 - S*) C_β*`, `M̂_x = S* C_β*`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::forms::ClosedForm;
use crate::operators::{Basis, OperatorMatrix};
use crate::quad::QuadratureGrid;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Truncated Taylor coefficients `c_0 .. c_{N-1}` of an element of H².
#[derive(Clone, Debug, PartialEq)]
pub struct HardyVector {
    coeffs: Vec<Complex64>,
}

impl HardyVector {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(LabError::InvalidArgument("Hardy vector has non-finite coefficients".into()));
        }
        Ok(HardyVector { coeffs })
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `Σ a_k conj(b_k)` over the common length.
    pub fn inner(&self, other: &HardyVector) -> Complex64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b.conj()).sum()
    }

    /// Truncated series at `z`.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, c| acc * z + c)
    }

    pub fn scale(&self, c: Complex64) -> HardyVector {
        HardyVector { coeffs: self.coeffs.iter().map(|v| v * c).collect() }
    }

    pub fn sub(&self, other: &HardyVector) -> HardyVector {
        let n = self.len().max(other.len());
        let get = |v: &[Complex64], k: usize| v.get(k).copied().unwrap_or(ZERO);
        HardyVector { coeffs: (0..n).map(|k| get(&self.coeffs, k) - get(&other.coeffs, k)).collect() }
    }

    pub fn truncate(&self, n: usize) -> HardyVector {
        HardyVector { coeffs: self.coeffs.iter().take(n).copied().collect() }
    }

    /// Backward shift `S*`: drop `c_0`. The result is one shorter.
    pub fn backward_shift(&self) -> HardyVector {
        HardyVector { coeffs: self.coeffs.iter().skip(1).copied().collect() }
    }

    /// `(1 - S*) v`, one shorter than `v`.
    pub fn one_minus_backward_shift(&self) -> HardyVector {
        HardyVector { coeffs: self.coeffs.windows(2).map(|w| w[0] - w[1]).collect() }
    }
}

/// Point of the open unit disk.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SzegoParam {
    w: Complex64,
}

impl SzegoParam {
    pub fn new(w: Complex64) -> Result<Self> {
        if !(w.norm() < 1.0) {
            return Err(LabError::InvalidArgument(format!("Szegő parameter needs |w| < 1, got {w}")));
        }
        Ok(SzegoParam { w })
    }

    pub fn w(&self) -> Complex64 {
        self.w
    }
}

/// `k_w(z) = 1/(1 - conj(w) z)`: coefficients `conj(w)^k`, `k < N`.
pub fn szego_vector(w: SzegoParam, n: usize) -> Result<HardyVector> {
    if n == 0 {
        return Err(LabError::InvalidArgument("need at least one coefficient".into()));
    }
    let r = w.w.conj();
    let mut acc = Complex64::new(1.0, 0.0);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(acc);
        acc *= r;
    }
    HardyVector::new(out)
}

/// `U x^s = (1/(s+1)) k_w`, `w = conj(s)/(conj(s)+1)`.
pub fn u_monomial(s: Complex64, n: usize) -> Result<HardyVector> {
    if s.re <= -0.5 {
        return Err(LabError::NotInL2(format!("x^{s} is not in L2 (needs Re s > -1/2)")));
    }
    let w = SzegoParam::new(s.conj() / (s.conj() + 1.0))?;
    Ok(szego_vector(w, n)?.scale((s + 1.0).inv()))
}

/// `(Uf)(z) = 1/(1-z) ∫_0^1 f(x) x^{z/(1-z)} dx` by graded quadrature.
pub fn u_integral(form: &ClosedForm, z: Complex64) -> Result<Complex64> {
    form.validate()?;
    if !(z.norm() < 1.0) {
        return Err(LabError::InvalidArgument(format!("U is evaluated inside the unit disk, got {z}")));
    }
    let e = z / (1.0 - z);
    // exponent of the integrand at 0
    let at_zero = match form.singular_point() {
        Some(0.0) => form.singular_exponent().unwrap_or(0.0),
        _ => 0.0,
    } + e.re;
    if at_zero <= -1.0 {
        return Err(LabError::NotIntegrable(format!(
            "f(x) x^(z/(1-z)) behaves like x^{at_zero:.4} at 0"
        )));
    }
    let layers = ((16.0 / ((at_zero + 1.0) * std::f64::consts::LOG10_2)).ceil() as usize).clamp(48, 1000);
    let mut anchors = form.breakpoints();
    anchors.push(0.0);
    if let Some(p) = form.singular_point() {
        anchors.push(p);
    }
    let grid = QuadratureGrid::graded(&anchors, layers, 16)?;
    let integral = grid.integrate(|p| {
        if p.x <= 0.0 {
            return ZERO;
        }
        form.value_at(p) * (e * p.x.ln()).exp()
    });
    Ok(integral / (1.0 - z))
}

/// Matrix of `C_β` on Taylor coefficients: column `n` holds `β^n`,
/// entry `(k, n) = 2^{-n-k} C(n+k-1, k)` for `n >= 1`.
///
/// Built by the ratio `entry(k,n) = entry(k-1,n) (n+k-1)/(2k)` in floating
/// point; every entry is at most 1/2 and no intermediate overflows.
pub fn composition_matrix(n: usize) -> Result<OperatorMatrix> {
    if n == 0 {
        return Err(LabError::InvalidArgument("composition matrix needs N >= 1".into()));
    }
    let mut m = DMatrix::from_element(n, n, ZERO);
    m[(0, 0)] = Complex64::new(1.0, 0.0);
    for col in 1..n {
        let mut v = 0.5f64.powi(col as i32);
        m[(0, col)] = Complex64::new(v, 0.0);
        for k in 1..n {
            v *= (col + k - 1) as f64 / (2.0 * k as f64);
            m[(k, col)] = Complex64::new(v, 0.0);
        }
    }
    OperatorMatrix::new(m, Basis::Hardy)
}

/// Identities transported by `U`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HatIdentity {
    /// `Ĥ = 1 - S*`
    HHat,
    /// `V̂ = (1 - S*) C_β*`
    VHat,
    /// `M̂_x = S* C_β*`
    MxHat,
    /// `U I = I U`
    Identity,
}

/// `max_{j <= d} ‖(U op - op^ U) x^j‖` over the first `N` coefficients.
pub fn hat_identity_residual(which: HatIdentity, n: usize, d: usize) -> Result<f64> {
    if n < 2 || d >= n {
        return Err(LabError::InvalidArgument("need N >= 2 and d < N".into()));
    }
    // one extra coefficient feeds the shift
    let len = n + 1;
    let adj = match which {
        HatIdentity::VHat | HatIdentity::MxHat => Some(composition_matrix(len)?.into_entries().adjoint()),
        _ => None,
    };
    let apply_adj = |v: &HardyVector| -> HardyVector {
        let a = adj.as_ref().expect("adjoint built for this identity");
        let x = nalgebra::DVector::from_column_slice(v.coeffs());
        HardyVector { coeffs: (a * x).iter().copied().collect() }
    };
    let mut worst = 0.0f64;
    for j in 0..=d {
        let jf = j as f64;
        let c = |s: f64| Complex64::new(s, 0.0);
        let ux = u_monomial(c(jf), len)?;
        let (lhs, rhs) = match which {
            HatIdentity::HHat => (ux.scale(c(1.0 / (jf + 1.0))), ux.one_minus_backward_shift()),
            HatIdentity::VHat => (
                u_monomial(c(jf + 1.0), len)?.scale(c(1.0 / (jf + 1.0))),
                apply_adj(&ux).one_minus_backward_shift(),
            ),
            HatIdentity::MxHat => (u_monomial(c(jf + 1.0), len)?, apply_adj(&ux).backward_shift()),
            HatIdentity::Identity => (ux.clone(), ux),
        };
        let r = lhs.truncate(n).sub(&rhs.truncate(n)).norm();
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Gram matrix `⟨U x^a, U x^b⟩`, `a, b <= max_degree`, from `N` coefficients.
pub fn monomial_gram(max_degree: usize, n: usize) -> Result<DMatrix<Complex64>> {
    let vs: Vec<HardyVector> = (0..=max_degree)
        .map(|a| u_monomial(Complex64::new(a as f64, 0.0), n))
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(max_degree + 1, max_degree + 1, |a, b| vs[a].inner(&vs[b])))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn szego_coefficients() {
        let v = szego_vector(SzegoParam::new(c(0.0, 0.0)).unwrap(), 3).unwrap();
        assert_eq!(v.coeffs(), &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let v = szego_vector(SzegoParam::new(c(0.5, 0.0)).unwrap(), 3).unwrap();
        assert_eq!(v.coeffs(), &[c(1.0, 0.0), c(0.5, 0.0), c(0.25, 0.0)]);
        assert!(SzegoParam::new(c(1.0, 0.0)).is_err());
    }

    #[test]
    fn szego_reproducing_inner_product() {
        let (w, v) = (c(0.3, 0.0), c(0.5, 0.0));
        let kw = szego_vector(SzegoParam::new(w).unwrap(), 200).unwrap();
        let kv = szego_vector(SzegoParam::new(v).unwrap(), 200).unwrap();
        // ⟨k_w, k_v⟩ = Σ (conj(w) v)^k
        let oracle = (1.0 - v * w.conj()).inv();
        assert!((kw.inner(&kv) - oracle).norm() < 1e-10);
    }

    #[test]
    fn monomial_images() {
        let u0 = u_monomial(c(0.0, 0.0), 4).unwrap();
        assert_eq!(u0.coeffs(), &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let u1 = u_monomial(c(1.0, 0.0), 3).unwrap();
        assert_eq!(u1.coeffs(), &[c(0.5, 0.0), c(0.25, 0.0), c(0.125, 0.0)]);
        assert!(matches!(u_monomial(c(-0.5, 0.0), 3), Err(LabError::NotInL2(_))));
    }

    #[test]
    fn unitarity_on_monomials() {
        let g = monomial_gram(8, 400).unwrap();
        for a in 0..=8 {
            for b in 0..=8 {
                assert!((g[(a, b)] - c(1.0 / (a + b + 1) as f64, 0.0)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn u_integral_routes_agree() {
        let one = ClosedForm::Monomial { s: c(0.0, 0.0) };
        assert!((u_integral(&one, c(0.3, -0.2)).unwrap() - c(1.0, 0.0)).norm() < 1e-12);
        let x = ClosedForm::Monomial { s: c(1.0, 0.0) };
        assert!((u_integral(&x, c(0.0, 0.0)).unwrap() - c(0.5, 0.0)).norm() < 1e-14);
        let v = u_integral(&x, c(0.5, 0.0)).unwrap();
        assert!((v - c(2.0 / 3.0, 0.0)).norm() < 1e-12);
        let series = u_monomial(c(1.0, 0.0), 200).unwrap().eval(c(0.5, 0.0));
        assert!((v - series).norm() < 1e-10);
    }

    #[test]
    fn u_integral_near_the_integrability_edge() {
        // x^s x^{z/(1-z)} with s = -0.4, z = -0.9 behaves like x^{-0.874}
        let (s, z) = (c(-0.4, 0.0), c(-0.9, 0.0));
        let v = u_integral(&ClosedForm::Monomial { s }, z).unwrap();
        let oracle = (s + 1.0 - z * s).inv();
        assert!((v - oracle).norm() < 1e-9 * oracle.norm(), "{v} vs {oracle}");
        assert!(u_integral(&ClosedForm::Monomial { s }, c(1.0, 0.0)).is_err());
    }

    #[test]
    fn composition_matrix_entries() {
        let m = composition_matrix(6).unwrap();
        let e = m.entries();
        assert_eq!(e[(0, 0)], c(1.0, 0.0));
        assert!((1..6).all(|k| e[(k, 0)] == c(0.0, 0.0)));
        assert_eq!(e[(0, 1)], c(0.5, 0.0));
        assert_eq!(e[(1, 1)], c(0.25, 0.0));
        // β^2 = 1/4 + z/4 + 3 z^2/16 + ...
        assert_eq!(e[(2, 2)], c(3.0 / 16.0, 0.0));
        assert!(composition_matrix(500).unwrap().entries().iter().all(|z| z.re.is_finite()));
    }

    #[test]
    fn hat_identities() {
        assert!(hat_identity_residual(HatIdentity::HHat, 400, 8).unwrap() < 1e-8);
        assert!(hat_identity_residual(HatIdentity::VHat, 400, 8).unwrap() < 1e-6);
        assert!(hat_identity_residual(HatIdentity::MxHat, 400, 8).unwrap() < 1e-6);
        assert_eq!(hat_identity_residual(HatIdentity::Identity, 400, 8).unwrap(), 0.0);
    }

    #[test]
    fn backward_shift_eigen_relation() {
        let alpha = c(0.5, 0.3);
        let k = szego_vector(SzegoParam::new(-alpha.conj()).unwrap(), 50).unwrap();
        let lhs = k.one_minus_backward_shift();
        let rhs = k.scale(1.0 + alpha).truncate(49);
        assert!(lhs.sub(&rhs).norm() < 1e-15);
    }
}
