//! Eigenfunctions of `Z = H - M_x`, generalized eigenvector chains and the
//! derivative functional.
//!
//! The point spectrum of `Z` is the open disk `D(1,1)` together with the
//! stick `(-1, 0]`. Eigenfunctions are normalized with constant 1.

use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{LabError, Result};
use crate::forms::ClosedForm;
use crate::operators::{apply_form, apply_grid, OperatorId};
use crate::poly::Poly;
use crate::quad::{inner_product, GridFunction, GridHandle, Pt, QuadratureGrid};

/// Relative residual accepted for analytic eigenfunctions.
pub const ANALYTIC_TOL: f64 = 1e-8;
/// Relative residual accepted for forms with algebraic endpoint singularities.
pub const SINGULAR_TOL: f64 = 1e-6;
/// Relative residual accepted for chain links.
pub const CHAIN_TOL: f64 = 1e-7;

const GAUSS_ORDER: usize = 16;

/// `p_n(u)` with `u = 1/x`, exact coefficients, plus a float copy for evaluation.
#[derive(Clone, Debug)]
pub struct ChainPolynomial {
    order: usize,
    poly: Poly<BigRational>,
    approx: Vec<f64>,
}

impl PartialEq for ChainPolynomial {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order && self.poly == other.poly
    }
}

impl ChainPolynomial {
    pub fn new(order: usize, poly: Poly<BigRational>) -> Self {
        let approx = poly.coeffs().iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect();
        ChainPolynomial { order, poly, approx }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn poly(&self) -> &Poly<BigRational> {
        &self.poly
    }

    pub fn degree(&self) -> Option<usize> {
        self.poly.degree()
    }

    pub fn valuation(&self) -> Option<usize> {
        self.poly.valuation()
    }

    /// Nonzero `(power, coefficient)` pairs.
    pub fn terms(&self) -> Vec<(usize, BigRational)> {
        self.poly
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| (k, c.clone()))
            .collect()
    }

    /// `p(u) e^{-u}`, term by term in log space so large `u` does not overflow.
    pub fn eval_times_exp(&self, u: f64) -> f64 {
        let lu = u.ln();
        self.approx
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(k, c)| c * (k as f64 * lu - u).exp())
            .sum()
    }
}

/// Where a point sits relative to the point spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectralClass {
    Bulb,
    Stick,
    Zero,
    None,
}

impl SpectralClass {
    pub fn name(self) -> &'static str {
        match self {
            SpectralClass::Bulb => "bulb",
            SpectralClass::Stick => "stick",
            SpectralClass::Zero => "zero",
            SpectralClass::None => "none",
        }
    }
}

pub fn classify_point(lambda: Complex64) -> SpectralClass {
    if lambda == Complex64::new(0.0, 0.0) {
        SpectralClass::Zero
    } else if (lambda - 1.0).norm() < 1.0 {
        SpectralClass::Bulb
    } else if lambda.im == 0.0 && lambda.re > -1.0 && lambda.re < 0.0 {
        SpectralClass::Stick
    } else {
        SpectralClass::None
    }
}

/// Eigenfunction of `Z` at `λ`.
pub fn eigenfunction(lambda: Complex64) -> Result<ClosedForm> {
    match classify_point(lambda) {
        SpectralClass::Bulb => Ok(ClosedForm::power_eigen(lambda)),
        SpectralClass::Zero => Ok(ClosedForm::ZeroEigen),
        SpectralClass::Stick => Ok(ClosedForm::PowerEigen { lambda, support_start: -lambda.re }),
        SpectralClass::None => Err(LabError::NotAnEigenvalue(format!(
            "{lambda} is outside D(1,1) ∪ (-1,0]"
        ))),
    }
}

/// Outcome of an eigenfunction residual check.
#[derive(Clone, Debug)]
pub struct EigenCheck {
    pub class: SpectralClass,
    pub form: ClosedForm,
    pub residual: f64,
    pub tolerance: f64,
    pub nodes: usize,
    pub layers: usize,
    pub anchor: f64,
}

impl EigenCheck {
    pub fn passed(&self) -> bool {
        self.residual < self.tolerance
    }
}

/// `‖(Z-λ) f‖ / ‖f‖` on a grid graded toward the form's singular point.
/// `layers` overrides the automatic choice.
pub fn eigen_residual(lambda: Complex64, layers: Option<usize>) -> Result<EigenCheck> {
    eigen_residual_with(lambda, layers, GAUSS_ORDER)
}

/// [`eigen_residual`] with an explicit Gauss order per panel.
pub fn eigen_residual_with(lambda: Complex64, layers: Option<usize>, order: usize) -> Result<EigenCheck> {
    if order < 2 {
        return Err(LabError::InvalidArgument("Gauss order must be >= 2".into()));
    }
    let form = eigenfunction(lambda)?;
    let anchor = form.singular_point().unwrap_or(0.0);
    let layers = layers.unwrap_or_else(|| form.recommended_layers());
    let grid: GridHandle = Arc::new(QuadratureGrid::graded(&[anchor], layers, order)?);
    let f = crate::forms::evaluate(&form, &grid)?;
    let r = apply_form(OperatorId::ZShift(lambda), &form, &grid)?;
    let class = classify_point(lambda);
    let tolerance = if class == SpectralClass::Bulb { ANALYTIC_TOL } else { SINGULAR_TOL };
    Ok(EigenCheck {
        class,
        residual: r.l2_norm() / f.l2_norm(),
        tolerance,
        nodes: grid.len(),
        layers,
        anchor,
        form,
    })
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Exact chain at `λ = 0`: `p_0 = u^2`, `q_n = ∫ p_n(u)/u du` (zero
/// constant), `p_{n+1} = u^2 (q_n - q_n')`.
pub fn chain_zero(m: usize) -> Vec<ChainPolynomial> {
    let mut out = Vec::with_capacity(m + 1);
    let mut p = Poly::monomial(BigRational::one(), 2);
    for n in 0..=m {
        out.push(ChainPolynomial::new(n, p.clone()));
        let qn = p.shift_down(1).antiderivative();
        p = (&qn - &qn.derivative()).shift_up(2);
    }
    out
}

/// `‖Z f_{n+1} - f_n‖ / ‖f_n‖` for `n < m` on the exact chain at zero,
/// `f_n = p_n(1/x) e^{-1/x}`.
pub fn chain_zero_residuals(m: usize) -> Result<Vec<f64>> {
    let chain = chain_zero(m);
    let grid: GridHandle = Arc::new(QuadratureGrid::graded(&[0.0], 48, GAUSS_ORDER)?);
    (0..m)
        .map(|n| {
            let f = ClosedForm::ExpChain { poly: chain[n].clone() };
            let next = ClosedForm::ExpChain { poly: chain[n + 1].clone() };
            let zf = apply_form(OperatorId::Z, &next, &grid)?;
            let fv = crate::forms::evaluate(&f, &grid)?;
            Ok(zf.sub(&fv)?.l2_norm() / fv.l2_norm())
        })
        .collect()
}

/// Largest `λ`-magnitude admitted for a chain of order `m`: `2/(2m+1)`.
pub fn order_threshold(m: usize) -> f64 {
    2.0 / (2.0 * m as f64 + 1.0)
}

/// Closed-form order-1 generalized eigenvector at `λ = -s`.
pub fn chain_stick_order1(s: f64) -> Result<ClosedForm> {
    if !(s > 0.0 && s < 1.0) {
        return Err(LabError::InvalidArgument(format!("s = {s} must lie in (0,1)")));
    }
    if s >= 2.0 / 3.0 {
        return Err(LabError::NotInL2(format!(
            "order-1 vector at λ = -{s} is not square integrable (needs s < 2/3)"
        )));
    }
    Ok(ClosedForm::Order1Stick { s })
}

/// `G(1)`: the closed-form order-1 vector is `f_1 + G(1) f_0`, with `f_1`
/// the chain member built with zero integration constant.
pub fn order1_offset(s: f64) -> f64 {
    (1.0 - s).ln() / (s * s) + 1.0 / (s * (1.0 - s))
}

/// Numeric chain `f_0 .. f_m` on the stick.
#[derive(Clone, Debug)]
pub struct ChainFamily {
    pub lambda: f64,
    pub grid: GridHandle,
    pub members: Vec<GridFunction>,
    /// `u_n = f_n x (x-s) / Φ`, the smooth part of each member.
    pub reduced: Vec<Vec<f64>>,
    /// `‖(Z-λ) f_{n+1} - f_n‖ / ‖f_n‖` for each link.
    pub link_residuals: Vec<f64>,
    /// `‖(Z-λ) f_0‖ / ‖f_0‖`.
    pub eigen_residual: f64,
}

impl ChainFamily {
    pub fn s(&self) -> f64 {
        -self.lambda
    }

    pub fn order(&self) -> usize {
        self.members.len() - 1
    }
}

fn check_admissible(lambda: f64, m: usize) -> Result<()> {
    if !(lambda > -1.0 && lambda < 0.0) {
        return Err(LabError::InvalidArgument(format!("λ = {lambda} must lie in (-1,0)")));
    }
    let t = order_threshold(m);
    if lambda <= -t {
        return Err(LabError::NotInL2(format!(
            "order {m} chain at λ = {lambda} leaves L2; needs λ > -2/(2m+1) = {:.6}",
            -t
        )));
    }
    Ok(())
}

/// Layers for a grid graded at `s` that resolves `f_m`, capped so the
/// integrand `u_m (x-s)^{-2}` (growing like `(x-s)^{-m-2}`) stays finite.
fn chain_layers(s: f64, m: usize) -> usize {
    let a = 1.0 / s - 1.0 - m as f64;
    let need = (18.0 / ((2.0 * a + 1.0) * std::f64::consts::LOG10_2)).ceil();
    let cap = 900 / (m + 2);
    (need as usize).clamp(48, cap.max(48))
}

/// Generalized eigenvectors at `λ ∈ (-2/(2m+1), 0)` with all integration
/// constants zero:
/// `f_{n+1} = Φ/(x(x-s)) ∫_x^1 Φ^{-1}(t) (t-s)^{-1} f_n(t) dt - f_n/(x-s)`,
/// `Φ = ((x-s)/x)^{1/s}`.
pub fn chain_numeric(lambda: f64, m: usize) -> Result<ChainFamily> {
    if m < 1 {
        return Err(LabError::InvalidArgument("chain order must be >= 1".into()));
    }
    check_admissible(lambda, m)?;
    let s = -lambda;
    let grid = Arc::new(QuadratureGrid::graded(&[s], chain_layers(s, m), GAUSS_ORDER)?);
    build_chain(s, m, grid)
}

/// The same construction without the L² gate: members past the threshold
/// are pointwise defined but not square integrable. Used for the pointwise
/// growth bounds, which hold for every `λ ∈ (-1, 0)`.
pub fn chain_pointwise(lambda: f64, m: usize) -> Result<ChainFamily> {
    if !(lambda > -1.0 && lambda < 0.0) {
        return Err(LabError::InvalidArgument(format!("λ = {lambda} must lie in (-1,0)")));
    }
    let s = -lambda;
    let grid = Arc::new(QuadratureGrid::graded(&[s], 160, GAUSS_ORDER)?);
    build_chain(s, m, grid)
}

fn build_chain(s: f64, m: usize, grid: GridHandle) -> Result<ChainFamily> {
    let pts: Vec<Pt> = grid.points().to_vec();
    let right = |p: &Pt| p.minus(s) > 0.0;
    // u_0 = 1, u_{n+1}(x) = ∫_x^1 u_n / (t (t-s)^2) dt - u_n(x) / (x-s)
    let mut reduced: Vec<Vec<f64>> = vec![pts.iter().map(|p| if right(p) { 1.0 } else { 0.0 }).collect()];
    for n in 0..m {
        let un = &reduced[n];
        let integrand: Vec<Complex64> = pts
            .iter()
            .zip(un)
            .map(|(p, u)| {
                if right(p) {
                    let d = p.minus(s);
                    Complex64::new(u / (p.x * d * d), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        let tail = grid.cumulative_right(&integrand);
        let next = pts
            .iter()
            .zip(un)
            .zip(&tail)
            .map(|((p, u), t)| if right(p) { t.re - u / p.minus(s) } else { 0.0 })
            .collect();
        reduced.push(next);
    }
    let members: Vec<GridFunction> = reduced
        .iter()
        .map(|u| {
            let vals = pts
                .iter()
                .zip(u)
                .map(|(p, u)| {
                    let d = p.minus(s);
                    if d <= 0.0 || *u == 0.0 {
                        return Complex64::new(0.0, 0.0);
                    }
                    let (ld, lx) = (d.ln(), p.x.ln());
                    let mag = ((ld - lx) / s - lx - ld + u.abs().ln()).exp();
                    Complex64::new(mag.copysign(*u), 0.0)
                })
                .collect();
            GridFunction::new(grid.clone(), vals)
        })
        .collect::<Result<_>>()?;
    let lam = Complex64::new(-s, 0.0);
    let f0 = &members[0];
    let eigen_residual = apply_grid(OperatorId::ZShift(lam), f0).l2_norm() / f0.l2_norm();
    let link_residuals = members
        .windows(2)
        .map(|w| {
            let r = apply_grid(OperatorId::ZShift(lam), &w[1]).sub(&w[0])?;
            Ok(r.l2_norm() / w[0].l2_norm())
        })
        .collect::<Result<_>>()?;
    Ok(ChainFamily { lambda: -s, grid, members, reduced, link_residuals, eigen_residual })
}

/// One row of the growth-bound table.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthRow {
    pub n: usize,
    pub measured: f64,
    pub bound: f64,
}

impl GrowthRow {
    pub fn dominated(&self) -> bool {
        self.measured <= self.bound * (1.0 + 1e-9)
    }
}

/// Measured `M_n = sup |f_n(x)| (x-s)^{n+1-1/s}` against the recursion
/// `M_{n+1} <= M_n (1 + M_0/(n+1))`, `M_0 = s^{-1-1/s}`.
pub fn growth_bound_check(family: &ChainFamily) -> Vec<GrowthRow> {
    let s = family.s();
    let m0 = s.powf(-1.0 - 1.0 / s);
    let grid = &family.grid;
    let pts = grid.points();
    let mut bound = m0;
    family
        .reduced
        .iter()
        .enumerate()
        .map(|(n, u)| {
            // |f_n| (x-s)^{n+1-1/s} = x^{-1/s-1} |u_n| (x-s)^n; the panels
            // touching s are narrower than the interpolant can resolve there
            let measured = pts
                .iter()
                .zip(u)
                .enumerate()
                .filter(|(i, (p, _))| p.minus(s) > 0.0 && !grid.panels()[grid.panel_of(*i)].touches_anchor)
                .map(|(_, pu)| pu)
                .map(|(p, u)| (-(1.0 / s + 1.0) * p.x.ln() + u.abs().ln() + n as f64 * p.minus(s).ln()).exp())
                .fold(0.0, f64::max);
            let row = GrowthRow { n, measured, bound };
            bound *= 1.0 + m0 / (n as f64 + 1.0);
            row
        })
        .collect()
}

/// L² distance between `f_{λ1,n}` and `f_{λ2,n}` on a grid graded at both
/// support points.
pub fn chain_continuity_probe(lambda1: f64, lambda2: f64, n: usize) -> Result<f64> {
    let m = n.max(1);
    check_admissible(lambda1, m)?;
    check_admissible(lambda2, m)?;
    if (lambda1 - lambda2).abs() > 0.05 {
        return Err(LabError::InvalidArgument("continuity probe needs |λ1 - λ2| <= 0.05".into()));
    }
    let (s1, s2) = (-lambda1, -lambda2);
    let layers = chain_layers(s1, m).max(chain_layers(s2, m));
    let grid: GridHandle = Arc::new(QuadratureGrid::graded(&[s1, s2], layers, GAUSS_ORDER)?);
    let a = build_chain(s1, m, grid.clone())?;
    if lambda1 == lambda2 {
        return Ok(0.0);
    }
    let b = build_chain(s2, m, grid)?;
    Ok(a.members[n].sub(&b.members[n])?.l2_norm())
}

/// Evidence for `⟨p(Z) f_{λ,1}, g¹⟩ = p'(λ)`.
#[derive(Clone, Debug)]
pub struct DerivativeReport {
    pub value: Complex64,
    pub expected: Complex64,
    pub gram_condition: f64,
}

/// Build `g¹ ∈ span{f_0, f_1}` with `⟨f_0, g¹⟩ = 1`, `⟨f_1, g¹⟩ = 0`, apply
/// `p(Z)` to `f_1` on the grid by Horner's rule, and pair.
pub fn derivative_functional(lambda: f64, poly: &[Complex64]) -> Result<DerivativeReport> {
    check_admissible(lambda, 1)?;
    let fam = chain_numeric(lambda, 1)?;
    let (f0, f1) = (&fam.members[0], &fam.members[1]);
    let g00 = inner_product(f0, f0)?;
    let g01 = inner_product(f0, f1)?;
    let g10 = inner_product(f1, f0)?;
    let g11 = inner_product(f1, f1)?;
    let cond = gram_condition(g00.re, g01, g11.re);
    if !(cond <= 1e12) {
        return Err(LabError::DegenerateChain(format!("Gram condition {cond:.3e} exceeds 1e12")));
    }
    // unknowns a' = conj(a), b' = conj(b) with g = a f_0 + b f_1:
    // a' g00 + b' g01 = 1, a' g10 + b' g11 = 0
    let det = g00 * g11 - g01 * g10;
    let a = (g11 / det).conj();
    let b = (-g10 / det).conj();
    let g = f0.scale(a).axpy(b, f1)?;
    let mut acc = f1.scale(Complex64::new(0.0, 0.0));
    for c in poly.iter().rev() {
        acc = apply_grid(OperatorId::Z, &acc).axpy(*c, f1)?;
    }
    let value = inner_product(&acc, &g)?;
    let expected = poly
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| c * k as f64 * lambda.powi(k as i32 - 1))
        .sum();
    Ok(DerivativeReport { value, expected, gram_condition: cond })
}

fn gram_condition(g00: f64, g01: Complex64, g11: f64) -> f64 {
    // eigenvalues of the Hermitian 2x2 Gram matrix
    let tr = g00 + g11;
    let disc = ((g00 - g11).powi(2) + 4.0 * g01.norm_sqr()).sqrt();
    let (hi, lo) = (0.5 * (tr + disc), 0.5 * (tr - disc));
    if lo <= 0.0 { f64::INFINITY } else { hi / lo }
}

/// Verdict on eigenvectors of `Z*`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjointVerdict {
    pub only_trivial: bool,
    /// `|G(1)/c|` for the general solution `G` of `G = -x(x+λ) G'`.
    pub g_at_one: f64,
}

/// Every solution `G = c x^{-1/λ} (x+λ)^{1/λ}` (or `c e^{1/x}` at 0) is
/// nonzero at 1, so the boundary condition `G(1) = 0` forces `c = 0`.
pub fn adjoint_candidate(lambda: Complex64) -> AdjointVerdict {
    let g_at_one = if lambda == Complex64::new(0.0, 0.0) {
        1f64.exp()
    } else {
        let base = 1.0 + lambda;
        if base.norm() == 0.0 {
            f64::INFINITY
        } else {
            (lambda.inv() * base.ln()).exp().norm()
        }
    };
    AdjointVerdict { only_trivial: g_at_one != 0.0, g_at_one }
}

/// `p_1` written out: `u^4/2 - u^3`.
pub fn p1_reference() -> Poly<BigRational> {
    Poly::new(vec![q(0, 1), q(0, 1), q(0, 1), q(-1, 1), q(1, 2)])
}
