//! The operators `H`, `V`, `M_x`, `Z = H - M_x`, their adjoints, and their
//! compressions to polynomials of degree `< N`.
//!
//! Compressions are assembled exactly: the actions
//! `H x^n = x^n/(n+1)`, `V x^n = x^{n+1}/(n+1)`, `M_x x^n = x^{n+1}` are
//! carried out in rational arithmetic and projected onto shifted Legendre
//! polynomials with the exact moments
//! `∫_0^1 x^a P_j(2x-1) dx = (a!)^2 / ((a-j)! (a+j+1)!)`.
//! Past `N = 40` the orthonormal matrices come from their closed-form
//! recurrences instead.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{LabError, Result};
use crate::forms::ClosedForm;
use crate::linalg::{singular_values, CMatrix, DenseMatrix};
use crate::quad::{GridFunction, GridHandle, Pt};

/// Largest compression size assembled through the monomial basis.
pub const MONOMIAL_CAP: usize = 40;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OperatorId {
    H,
    V,
    Mx,
    /// `H - M_x`
    Z,
    Hstar,
    Vstar,
    Identity,
    /// `Z - λ`
    ZShift(Complex64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    /// `1, x, x^2, ...`; overflow past degree `N-1` is dropped.
    Monomial,
    /// `q_k(x) = sqrt(2k+1) P_k(2x-1)`; orthogonal compression.
    LegendreOrthonormal,
    /// Taylor coefficients `z^k` of the Hardy space.
    Hardy,
}

/// Dense square compression of an operator in a declared basis.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    entries: CMatrix,
    basis: Basis,
}

impl OperatorMatrix {
    pub fn new(entries: CMatrix, basis: Basis) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(LabError::InvalidArgument("operator matrix must be square".into()));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LabError::InvalidArgument("operator matrix has non-finite entries".into()));
        }
        Ok(OperatorMatrix { entries, basis })
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }
}

/// Operand of [`apply`].
#[derive(Clone, Copy, Debug)]
pub enum Operand<'a> {
    Grid(&'a GridFunction),
    /// A closed form together with the grid to sample the result on.
    Form(&'a ClosedForm, &'a GridHandle),
}

pub fn apply(op: OperatorId, f: Operand<'_>) -> Result<GridFunction> {
    match f {
        Operand::Grid(g) => Ok(apply_grid(op, g)),
        Operand::Form(form, grid) => apply_form(op, form, grid),
    }
}

/// Apply to sampled values. Inner integrals integrate the panelwise
/// interpolating polynomial exactly.
pub fn apply_grid(op: OperatorId, f: &GridFunction) -> GridFunction {
    let grid = f.grid();
    let v = f.values();
    let xs: Vec<f64> = grid.nodes();
    let out: Vec<Complex64> = match op {
        OperatorId::Identity => v.to_vec(),
        OperatorId::Mx => v.iter().zip(&xs).map(|(f, x)| f * *x).collect(),
        OperatorId::V => grid.cumulative_left(v),
        OperatorId::H => grid.cumulative_left(v).iter().zip(&xs).map(|(f, x)| f / *x).collect(),
        OperatorId::Vstar => grid.cumulative_right(v),
        OperatorId::Hstar => {
            let g: Vec<Complex64> = v.iter().zip(&xs).map(|(f, x)| f / *x).collect();
            grid.cumulative_right(&g)
        }
        OperatorId::Z | OperatorId::ZShift(_) => {
            let lam = shift_of(op);
            grid.cumulative_left(v)
                .iter()
                .zip(v)
                .zip(&xs)
                .map(|((c, f), x)| c / *x - f * *x - f * lam)
                .collect()
        }
    };
    GridFunction::new_unchecked(grid.clone(), out)
}

fn shift_of(op: OperatorId) -> Complex64 {
    match op {
        OperatorId::ZShift(l) => l,
        _ => ZERO,
    }
}

/// `∫_0^{x_i} g` for every node, using the exact integrand on sub-panels.
pub fn left_integrals<G: Fn(Pt) -> Complex64>(grid: &GridHandle, g: G) -> Vec<Complex64> {
    let q = grid.panel_order();
    let mut out = vec![ZERO; grid.len()];
    let mut carry = ZERO;
    for (k, panel) in grid.panels().iter().enumerate() {
        for i in panel.start..panel.start + q {
            let part: Complex64 = grid.partial_rule(i).into_iter().map(|(p, wt)| g(p) * wt).sum();
            out[i] = carry + part;
        }
        carry += panel_integral(grid, k, &g);
    }
    out
}

fn panel_integral<G: Fn(Pt) -> Complex64>(grid: &GridHandle, k: usize, g: &G) -> Complex64 {
    let panel = &grid.panels()[k];
    if panel.touches_anchor {
        grid.panel_rule(k).into_iter().map(|(p, wt)| g(p) * wt).sum()
    } else {
        let (pts, w) = (grid.points(), grid.weights());
        (panel.start..panel.start + grid.panel_order()).map(|i| g(pts[i]) * w[i]).sum()
    }
}

/// `∫_{x_i}^1 g` for every node.
pub fn right_integrals<G: Fn(Pt) -> Complex64>(grid: &GridHandle, g: G) -> Vec<Complex64> {
    let q = grid.panel_order();
    let mut out = vec![ZERO; grid.len()];
    let mut carry = ZERO;
    for (k, panel) in grid.panels().iter().enumerate().rev() {
        for i in panel.start..panel.start + q {
            let part: Complex64 = grid.partial_rule_right(i).into_iter().map(|(p, wt)| g(p) * wt).sum();
            out[i] = carry + part;
        }
        carry += panel_integral(grid, k, &g);
    }
    out
}

/// Apply to a closed form by nested quadrature on `grid`: each inner
/// integral re-evaluates the form on sub-panels, so accuracy depends only on
/// the grid being graded toward the form's singular point.
pub fn apply_form(op: OperatorId, form: &ClosedForm, grid: &GridHandle) -> Result<GridFunction> {
    form.validate()?;
    let f = |p: Pt| form.value_at(p);
    let pts = grid.points();
    let out: Vec<Complex64> = match op {
        OperatorId::Identity => pts.iter().map(|p| f(*p)).collect(),
        OperatorId::Mx => pts.iter().map(|p| f(*p) * p.x).collect(),
        OperatorId::V => left_integrals(grid, f),
        OperatorId::H => left_integrals(grid, f).iter().zip(pts).map(|(c, p)| c / p.x).collect(),
        OperatorId::Vstar => right_integrals(grid, f),
        OperatorId::Hstar => right_integrals(grid, |p| f(p) / p.x),
        OperatorId::Z | OperatorId::ZShift(_) => {
            let lam = shift_of(op);
            left_integrals(grid, f)
                .iter()
                .zip(pts)
                .map(|(c, p)| {
                    let v = f(*p);
                    c / p.x - v * p.x - v * lam
                })
                .collect()
        }
    };
    GridFunction::new(grid.clone(), out)
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn binomial(n: usize, k: usize) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// Degree-raising generator whose action on monomials is a single term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Generator {
    H,
    V,
    Mx,
}

impl Generator {
    /// `x^n -> c x^m`
    fn act(self, n: usize) -> (BigRational, usize) {
        match self {
            Generator::H => (rat(1, n as i64 + 1), n),
            Generator::V => (rat(1, n as i64 + 1), n + 1),
            Generator::Mx => (BigRational::one(), n + 1),
        }
    }
}

/// Exact monomial-basis matrix of a generator; overflow dropped.
fn monomial_generator(g: Generator, n: usize) -> DenseMatrix<BigRational> {
    let mut m = DenseMatrix::zeros(n, n);
    for k in 0..n {
        let (c, p) = g.act(k);
        if p < n {
            m.set(p, k, c);
        }
    }
    m
}

/// Hilbert matrix `⟨x^n, x^m⟩ = 1/(n+m+1)`.
fn hilbert(n: usize) -> DenseMatrix<BigRational> {
    DenseMatrix::from_fn(n, n, |i, j| rat(1, (i + j + 1) as i64))
}

/// Exact monomial-basis matrix. Adjoints are the orthogonal compressions
/// `G^{-1} B` with `B_kn = ⟨T* x^n, x^k⟩` and Hilbert Gram matrix `G`.
pub fn assemble_monomial_exact(op: OperatorId, n: usize) -> Result<DenseMatrix<BigRational>> {
    check_size(n)?;
    if n > MONOMIAL_CAP {
        return Err(LabError::ConditioningCap { cap: MONOMIAL_CAP, got: n });
    }
    Ok(match op {
        OperatorId::H => monomial_generator(Generator::H, n),
        OperatorId::V => monomial_generator(Generator::V, n),
        OperatorId::Mx => monomial_generator(Generator::Mx, n),
        OperatorId::Z => &monomial_generator(Generator::H, n) - &monomial_generator(Generator::Mx, n),
        OperatorId::Identity => DenseMatrix::identity(n),
        OperatorId::Hstar => {
            // B_kn = ⟨x^n, H x^k⟩ = G_kn / (k+1)
            let b = DenseMatrix::from_fn(n, n, |k, j| rat(1, ((k + j + 1) * (k + 1)) as i64));
            hilbert(n).solve(&b)?
        }
        OperatorId::Vstar => {
            // B_kn = ⟨x^n, V x^k⟩ = 1 / ((k+1)(n+k+2))
            let b = DenseMatrix::from_fn(n, n, |k, j| rat(1, ((k + 1) * (k + j + 2)) as i64));
            hilbert(n).solve(&b)?
        }
        OperatorId::ZShift(_) => {
            return Err(LabError::InvalidArgument("shifted operators have no exact rational matrix".into()))
        }
    })
}

/// Rational part `R` of the orthonormal Legendre compression of a generator:
/// the entry is `sqrt((2j+1)(2k+1)) R_jk`.
fn legendre_rational(g: Generator, n: usize) -> DenseMatrix<BigRational> {
    // shifted Legendre P_k(2x-1) = Σ_i (-1)^{k+i} C(k,i) C(k+i,i) x^i
    let coeffs: Vec<Vec<BigInt>> = (0..n)
        .map(|k| {
            (0..=k)
                .map(|i| {
                    let c = binomial(k, i) * binomial(k + i, i);
                    if (k + i) % 2 == 0 { c } else { -c }
                })
                .collect()
        })
        .collect();
    let fact: Vec<BigInt> = (0..=2 * n + 2).map(factorial).collect();
    let moment = |a: usize, j: usize| -> BigRational {
        if a < j {
            BigRational::zero()
        } else {
            BigRational::new(&fact[a] * &fact[a], &fact[a - j] * &fact[a + j + 1])
        }
    };
    DenseMatrix::from_fn(n, n, |j, k| {
        let mut acc = BigRational::zero();
        for (i, c) in coeffs[k].iter().enumerate() {
            let (a, p) = g.act(i);
            let m = moment(p, j);
            if !m.is_zero() {
                acc += BigRational::from_integer(c.clone()) * a * m;
            }
        }
        acc
    })
}

fn legendre_exact_generator(g: Generator, n: usize) -> DMatrix<f64> {
    let r = legendre_rational(g, n);
    DMatrix::from_fn(n, n, |j, k| {
        let s = (((2 * j + 1) * (2 * k + 1)) as f64).sqrt();
        s * r.get(j, k).to_f64().unwrap_or(f64::NAN)
    })
}

/// Orthonormal Legendre compressions from their closed forms.
fn legendre_formula_generator(g: Generator, n: usize) -> DMatrix<f64> {
    let sq = |v: usize| (v as f64).sqrt();
    let mut m = DMatrix::zeros(n, n);
    match g {
        Generator::H => {
            for k in 0..n {
                m[(k, k)] = 1.0 / (k as f64 + 1.0);
                for j in 0..k {
                    let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
                    m[(j, k)] = sign * sq((2 * j + 1) * (2 * k + 1)) / (k as f64 * (k as f64 + 1.0));
                }
            }
        }
        Generator::V => {
            m[(0, 0)] = 0.5;
            for k in 0..n {
                if k + 1 < n {
                    m[(k + 1, k)] = 1.0 / (2.0 * sq((2 * k + 1) * (2 * k + 3)));
                }
                if k >= 1 {
                    m[(k - 1, k)] = -1.0 / (2.0 * sq((2 * k - 1) * (2 * k + 1)));
                }
            }
        }
        Generator::Mx => {
            for k in 0..n {
                m[(k, k)] = 0.5;
                if k + 1 < n {
                    let j = (k + 1) as f64;
                    let b = j / (2.0 * (4.0 * j * j - 1.0).sqrt());
                    m[(k + 1, k)] = b;
                    m[(k, k + 1)] = b;
                }
            }
        }
    }
    m
}

/// Which route builds orthonormal Legendre compressions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LegendreRoute {
    ExactRational,
    Recurrence,
}

/// Orthonormal Legendre compression by an explicit route.
pub fn assemble_legendre(op: OperatorId, n: usize, route: LegendreRoute) -> Result<CMatrix> {
    check_size(n)?;
    if route == LegendreRoute::ExactRational && n > MONOMIAL_CAP {
        return Err(LabError::ConditioningCap { cap: MONOMIAL_CAP, got: n });
    }
    let gen = |g| match route {
        LegendreRoute::ExactRational => legendre_exact_generator(g, n),
        LegendreRoute::Recurrence => legendre_formula_generator(g, n),
    };
    let real = match op {
        OperatorId::H => gen(Generator::H),
        OperatorId::V => gen(Generator::V),
        OperatorId::Mx => gen(Generator::Mx),
        OperatorId::Hstar => gen(Generator::H).transpose(),
        OperatorId::Vstar => gen(Generator::V).transpose(),
        OperatorId::Identity => DMatrix::identity(n, n),
        OperatorId::Z | OperatorId::ZShift(_) => gen(Generator::H) - gen(Generator::Mx),
    };
    let mut m = real.map(|v| Complex64::new(v, 0.0));
    if let OperatorId::ZShift(l) = op {
        for i in 0..n {
            m[(i, i)] -= l;
        }
    }
    Ok(m)
}

fn check_size(n: usize) -> Result<()> {
    if n == 0 {
        return Err(LabError::InvalidArgument("compression size must be >= 1".into()));
    }
    Ok(())
}

/// Compression `P_N op P_N` in the named basis.
///
/// Monomial matrices are exact (converted to floating point at the end) and
/// capped at `N = 40`. Legendre matrices use the exact rational route up to
/// the cap and the recurrences beyond it.
pub fn assemble(op: OperatorId, basis: Basis, n: usize) -> Result<OperatorMatrix> {
    check_size(n)?;
    let entries = match basis {
        Basis::Monomial => {
            let (base, shift) = match op {
                OperatorId::ZShift(l) => (OperatorId::Z, l),
                other => (other, ZERO),
            };
            let exact = assemble_monomial_exact(base, n)?;
            let mut m = DMatrix::from_fn(n, n, |i, j| {
                Complex64::new(exact.get(i, j).to_f64().unwrap_or(f64::NAN), 0.0)
            });
            for i in 0..n {
                m[(i, i)] -= shift;
            }
            m
        }
        Basis::Hardy => {
            return Err(LabError::InvalidArgument(
                "Hardy-space matrices come from the hardy module".into(),
            ))
        }
        Basis::LegendreOrthonormal => {
            let route = if n <= MONOMIAL_CAP { LegendreRoute::ExactRational } else { LegendreRoute::Recurrence };
            assemble_legendre(op, n, route)?
        }
    };
    OperatorMatrix::new(entries, basis)
}

/// Exact Legendre compression of a product of generators
/// `P_N T_1 T_2 ... T_k P_N`: each factor raises degree by at most one, so
/// the product is formed at size `N + k` and truncated.
pub fn compress_product(ops: &[OperatorId], n: usize) -> Result<CMatrix> {
    check_size(n)?;
    if ops.iter().any(|o| matches!(o, OperatorId::Hstar | OperatorId::Vstar)) {
        return Err(LabError::InvalidArgument("adjoints do not preserve polynomials".into()));
    }
    let big = n + ops.len();
    let mut acc = CMatrix::identity(big, big);
    for op in ops {
        let m = assemble(*op, Basis::LegendreOrthonormal, big)?.into_entries();
        acc *= m;
    }
    Ok(acc.view((0, 0), (n, n)).into_owned())
}

/// Relations between the generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommutatorPair {
    /// `V M_x - M_x V = -V^2`
    VMxVsV2,
    /// `H M_x - M_x H = -H V`
    HMxVsHV,
    /// `H - H = 0`
    SelfDifference,
}

/// Largest singular value of (left side - right side) in the exact monomial
/// basis, on polynomials of degree `< N - 2` so no truncation enters.
pub fn commutator_residual(pair: CommutatorPair, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(LabError::InvalidArgument("commutator check needs N >= 2".into()));
    }
    let m = |op| assemble_monomial_exact(op, n);
    let (lhs, rhs) = match pair {
        CommutatorPair::VMxVsV2 => {
            let (v, x) = (m(OperatorId::V)?, m(OperatorId::Mx)?);
            (&(&v * &x) - &(&x * &v), (&v * &v).scale(&rat(-1, 1)))
        }
        CommutatorPair::HMxVsHV => {
            let (h, x, v) = (m(OperatorId::H)?, m(OperatorId::Mx)?, m(OperatorId::V)?);
            (&(&h * &x) - &(&x * &h), (&h * &v).scale(&rat(-1, 1)))
        }
        CommutatorPair::SelfDifference => (m(OperatorId::H)?, m(OperatorId::H)?),
    };
    let diff = &lhs - &rhs;
    let cols = n - 2;
    if cols == 0 {
        return Ok(0.0);
    }
    let block = DMatrix::from_fn(n, cols, |i, j| Complex64::new(diff.get(i, j).to_f64().unwrap_or(f64::NAN), 0.0));
    Ok(singular_values(&block).first().copied().unwrap_or(0.0))
}

/// Singular values of the orthonormal Legendre compression, descending.
pub fn singular_value_decay(op: OperatorId, n: usize) -> Result<Vec<f64>> {
    if n < 4 {
        return Err(LabError::InvalidArgument("singular value decay needs N >= 4".into()));
    }
    Ok(singular_values(assemble(op, Basis::LegendreOrthonormal, n)?.entries()))
}

/// `q_0(x) .. q_{n-1}(x)` for the orthonormal shifted Legendre basis.
pub fn legendre_orthonormal_values(n: usize, x: f64) -> Vec<f64> {
    let t = 2.0 * x - 1.0;
    let mut p = Vec::with_capacity(n);
    for k in 0..n {
        let v = match k {
            0 => 1.0,
            1 => t,
            _ => {
                let kf = k as f64;
                ((2.0 * kf - 1.0) * t * p[k - 1] - (kf - 1.0) * p[k - 2]) / kf
            }
        };
        p.push(v);
    }
    p.iter().enumerate().map(|(k, v)| v * ((2 * k + 1) as f64).sqrt()).collect()
}

/// Sample `Σ c_k q_k` on a grid.
pub fn legendre_series(grid: &GridHandle, coeffs: &[Complex64]) -> GridFunction {
    GridFunction::from_fn(grid.clone(), |p| {
        legendre_orthonormal_values(coeffs.len(), p.x)
            .iter()
            .zip(coeffs)
            .map(|(q, c)| c * *q)
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{inner_product, make_grid, GridScheme};
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn monomial_hardy_is_diagonal() {
        let h = assemble(OperatorId::H, Basis::Monomial, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 / (i as f64 + 1.0) } else { 0.0 };
                assert_eq!(h.entries()[(i, j)], c(expect, 0.0));
            }
        }
    }

    #[test]
    fn monomial_multiplication_drops_overflow() {
        let m = assemble(OperatorId::Mx, Basis::Monomial, 3).unwrap();
        let e = m.entries();
        assert_eq!(e[(1, 0)], c(1.0, 0.0));
        assert_eq!(e[(2, 1)], c(1.0, 0.0));
        assert_eq!(e.column(2).iter().filter(|z| z.norm() > 0.0).count(), 0);
    }

    #[test]
    fn monomial_cap_is_enforced() {
        assert!(matches!(
            assemble(OperatorId::H, Basis::Monomial, 41),
            Err(LabError::ConditioningCap { cap: 40, got: 41 })
        ));
        assert!(assemble(OperatorId::H, Basis::LegendreOrthonormal, 80).is_ok());
    }

    #[test]
    fn exact_and_recurrence_routes_agree() {
        for op in [OperatorId::H, OperatorId::V, OperatorId::Mx, OperatorId::Z, OperatorId::Vstar] {
            let a = assemble_legendre(op, 40, LegendreRoute::ExactRational).unwrap();
            let b = assemble_legendre(op, 40, LegendreRoute::Recurrence).unwrap();
            assert!((a - b).norm() < 1e-12, "{op:?}");
        }
    }

    #[test]
    fn z_compression_at_size_two() {
        // Gram-Schmidt on {1, x}: q_0 = 1, q_1 = sqrt(3)(2x-1)
        let z = assemble(OperatorId::Z, Basis::LegendreOrthonormal, 2).unwrap();
        let e = z.entries();
        let s3 = 3f64.sqrt();
        assert_relative_eq!(e[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(e[(0, 1)].re, -2.0 / s3, epsilon = 1e-15);
        assert_relative_eq!(e[(1, 0)].re, -1.0 / (2.0 * s3), epsilon = 1e-15);
        assert_relative_eq!(e[(1, 1)].re, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn hardy_compression_matches_quadrature() {
        let n = 6;
        let grid = make_grid(16, GridScheme::GaussLegendre).unwrap();
        let h = assemble(OperatorId::H, Basis::LegendreOrthonormal, n).unwrap();
        for k in 0..n {
            let mut e = vec![c(0.0, 0.0); n];
            e[k] = c(1.0, 0.0);
            let hk = apply_grid(OperatorId::H, &legendre_series(&grid, &e));
            for j in 0..n {
                let mut ej = vec![c(0.0, 0.0); n];
                ej[j] = c(1.0, 0.0);
                let ip = inner_product(&hk, &legendre_series(&grid, &ej)).unwrap();
                assert!((ip - h.entries()[(j, k)]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn hardy_of_constant_is_constant() {
        let grid = make_grid(8, GridScheme::GaussLegendre).unwrap();
        let one = GridFunction::from_fn(grid.clone(), |_| c(1.0, 0.0));
        let h1 = apply_grid(OperatorId::H, &one);
        assert!(h1.values().iter().all(|v| (v - c(1.0, 0.0)).norm() < 1e-14));
        let v1 = apply_grid(OperatorId::V, &one);
        for (v, x) in v1.values().iter().zip(grid.nodes()) {
            assert!((v - c(x, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn monomials_are_hardy_eigenvectors() {
        for s in [c(0.5, 0.0), c(-0.25, 0.0), c(1.0, 2.0)] {
            let form = ClosedForm::Monomial { s };
            let grid = form.default_grid(16).unwrap();
            let hf = apply_form(OperatorId::H, &form, &grid).unwrap();
            for (v, p) in hf.values().iter().zip(grid.points()) {
                let f = form.value_at(*p);
                assert!((v - f / (s + 1.0)).norm() <= 1e-12 * f.norm().max(1.0), "s={s}");
            }
        }
    }

    #[test]
    fn z_fixes_the_first_bulb_eigenfunction() {
        let form = ClosedForm::power_eigen(c(1.0, 0.0));
        let grid = form.default_grid(16).unwrap();
        let zf = apply_form(OperatorId::Z, &form, &grid).unwrap();
        for (v, p) in zf.values().iter().zip(grid.points()) {
            let oracle = 1.0 / ((1.0 + p.x) * (1.0 + p.x));
            assert!((v.re - oracle).abs() < 1e-13 && v.im.abs() < 1e-15);
        }
    }

    #[test]
    fn hstar_on_zero_eigenfunction_matches_direct_integral() {
        let form = ClosedForm::ZeroEigen;
        let grid = form.default_grid(16).unwrap();
        let g = apply_form(OperatorId::Hstar, &form, &grid).unwrap();
        // oracle: ∫_x^1 t^{-3} e^{-1/t} dt = [(1 + u) e^{-u}]_{u=1}^{1/x}
        for (v, p) in g.values().iter().zip(grid.points()) {
            let u = 1.0 / p.x;
            let oracle = (1.0 + u) * (-u).exp() - 2.0 * (-1.0f64).exp();
            let oracle = -oracle;
            assert!((v.re - oracle).abs() < 1e-8, "x={} {} {}", p.x, v.re, oracle);
        }
    }

    #[test]
    fn commutation_relations_hold_exactly() {
        assert!(commutator_residual(CommutatorPair::VMxVsV2, 8).unwrap() <= 1e-12);
        assert!(commutator_residual(CommutatorPair::HMxVsHV, 8).unwrap() <= 1e-12);
        assert_eq!(commutator_residual(CommutatorPair::SelfDifference, 8).unwrap(), 0.0);
    }

    #[test]
    fn volterra_singular_values() {
        let sv = singular_value_decay(OperatorId::V, 64).unwrap();
        assert!(sv.windows(2).all(|w| w[1] < w[0]));
        assert!(sv[0] > 0.6 && sv[0] < 0.7);
        // exact σ_1 of V is 2/π; the compression is within rounding of it
        assert!((sv[0] - 2.0 / std::f64::consts::PI).abs() < 1e-10);
        // Σσ² of the sections climbs toward ‖V‖²_HS = 1/2 with an O(1/N) gap
        let hs = |n| singular_value_decay(OperatorId::V, n).unwrap().iter().map(|s| s * s).sum::<f64>();
        let (h32, h64) = (hs(32), hs(64));
        assert!(h32 < h64 && h64 < 0.5, "{h32} {h64}");
        assert!((0.5 - h64) < 0.6 * (0.5 - h32), "{h32} {h64}");
        let id = singular_value_decay(OperatorId::Identity, 8).unwrap();
        assert!(id.iter().all(|s| (s - 1.0).abs() < 1e-15));
    }

    #[test]
    fn product_compression_matches_volterra() {
        // M_x H = V as operators, so their exact compressions coincide
        let a = compress_product(&[OperatorId::Mx, OperatorId::H], 12).unwrap();
        let b = assemble(OperatorId::V, Basis::LegendreOrthonormal, 12).unwrap();
        assert!((a - b.entries()).norm() < 1e-13);
    }

    #[test]
    fn monomial_adjoint_is_the_gram_compression() {
        // H* 1 = -ln x is not a polynomial; H* x = 1 - x is.
        let hs = assemble_monomial_exact(OperatorId::Hstar, 4).unwrap();
        assert_eq!(*hs.get(0, 1), rat(1, 1));
        assert_eq!(*hs.get(1, 1), rat(-1, 1));
        assert_eq!(*hs.get(2, 1), rat(0, 1));
    }
}
