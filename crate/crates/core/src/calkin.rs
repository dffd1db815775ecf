//! Symbols modulo compacts: operator words in `Mx`, `H`, `V`, their lollipop
//! symbols, the representatives `γ(f) = f_-(-M_x) + f_+(H) - f(0)`, essential
//! spectra, winding-number indices and the witness sequences behind them.
//!
//! Symbols act on the lollipop `Λ = [-1,0] ∪ D̄(1,1)`. The essential spectrum
//! is `f_-([-1,0]) ∪ f_+(∂D(1,1))`; some statements of it write `g([0,1])`,
//! but the stick is `[-1,0]` and that is what is sampled here.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, Pow, ToPrimitive, Zero};

use crate::error::{LabError, Result};
use crate::forms::ClosedForm;
use crate::linalg::{singular_values, CMatrix};
use crate::operators::{apply, assemble, compress_product, Basis, Operand, OperatorId};
use crate::poly::Poly;
use crate::quad::{inner_product, GridFunction};
use crate::RealPoly;

/// Exact complex rational.
pub type CRat = Complex<BigRational>;
/// Symbol component with exact complex rational coefficients.
pub type SymbolPoly = Poly<CRat>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn crat(re: i64) -> CRat {
    Complex::new(BigRational::from_integer(re.into()), BigRational::zero())
}

pub fn crat_to_c64(c: &CRat) -> Complex64 {
    Complex64::new(c.re.to_f64().unwrap_or(f64::NAN), c.im.to_f64().unwrap_or(f64::NAN))
}

/// `[-1,0] ∪ D̄(1,1)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Lollipop;

impl Lollipop {
    pub fn contains(&self, z: Complex64) -> bool {
        (z.im == 0.0 && (-1.0..=0.0).contains(&z.re)) || (z - 1.0).norm() <= 1.0
    }

    pub fn in_bulb_interior(&self, z: Complex64) -> bool {
        (z - 1.0).norm() < 1.0
    }

    /// Euclidean distance to the set (zero inside).
    pub fn distance(&self, z: Complex64) -> f64 {
        let bulb = ((z - 1.0).norm() - 1.0).max(0.0);
        let t = z.re.clamp(-1.0, 0.0);
        let stick = (z - Complex64::new(t, 0.0)).norm();
        bulb.min(stick)
    }

    /// Distance to the boundary: the stick and the circle `|z-1| = 1`.
    pub fn boundary_distance(&self, z: Complex64) -> f64 {
        let circle = ((z - 1.0).norm() - 1.0).abs();
        let t = z.re.clamp(-1.0, 0.0);
        let stick = (z - Complex64::new(t, 0.0)).norm();
        circle.min(stick)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    Mx,
    H,
    V,
}

impl Letter {
    pub fn op(self) -> OperatorId {
        match self {
            Letter::Mx => OperatorId::Mx,
            Letter::H => OperatorId::H,
            Letter::V => OperatorId::V,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Letter::Mx => "Mx",
            Letter::H => "H",
            Letter::V => "V",
        }
    }
}

/// Noncommutative polynomial in `Mx`, `H`, `V`; the empty letter sequence is
/// the identity. Like terms are merged and zero terms dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorWord {
    terms: BTreeMap<Vec<Letter>, CRat>,
}

impl OperatorWord {
    pub fn zero() -> Self {
        OperatorWord { terms: BTreeMap::new() }
    }

    pub fn scalar(c: CRat) -> Self {
        Self::from_terms(vec![(c, Vec::new())])
    }

    pub fn letter(l: Letter) -> Self {
        Self::from_terms(vec![(crat(1), vec![l])])
    }

    pub fn from_terms(terms: Vec<(CRat, Vec<Letter>)>) -> Self {
        let mut w = OperatorWord::zero();
        for (c, letters) in terms {
            w.add_term(letters, c);
        }
        w
    }

    fn add_term(&mut self, letters: Vec<Letter>, c: CRat) {
        let entry = self.terms.entry(letters.clone()).or_insert_with(CRat::zero);
        *entry = entry.clone() + c;
        if entry.is_zero() {
            self.terms.remove(&letters);
        }
    }

    /// Terms ordered by length, then letters.
    pub fn terms(&self) -> Vec<(CRat, Vec<Letter>)> {
        let mut out: Vec<_> = self.terms.iter().map(|(l, c)| (c.clone(), l.clone())).collect();
        out.sort_by(|a, b| a.1.len().cmp(&b.1.len()).then(a.1.cmp(&b.1)));
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &OperatorWord) -> OperatorWord {
        let mut w = self.clone();
        for (l, c) in &other.terms {
            w.add_term(l.clone(), c.clone());
        }
        w
    }

    pub fn scale(&self, c: &CRat) -> OperatorWord {
        let mut w = OperatorWord::zero();
        for (l, v) in &self.terms {
            w.add_term(l.clone(), v.clone() * c.clone());
        }
        w
    }

    pub fn mul(&self, other: &OperatorWord) -> OperatorWord {
        let mut w = OperatorWord::zero();
        for (la, ca) in &self.terms {
            for (lb, cb) in &other.terms {
                let mut letters = la.clone();
                letters.extend(lb.iter().copied());
                w.add_term(letters, ca.clone() * cb.clone());
            }
        }
        w
    }

    pub fn pow(&self, k: u32) -> OperatorWord {
        (0..k).fold(OperatorWord::scalar(crat(1)), |acc, _| acc.mul(self))
    }

    /// Longest letter sequence.
    pub fn length(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    /// Orthonormal Legendre compression `P_N w P_N`, each monomial compressed
    /// exactly.
    pub fn compress(&self, n: usize) -> Result<CMatrix> {
        self.compress_in(Basis::LegendreOrthonormal, n)
    }

    /// Compression in `basis`: every letter raises degree by at most one, so
    /// each monomial is multiplied out at size `N + length` and truncated.
    /// The monomial basis is subject to its size cap at that working size.
    pub fn compress_in(&self, basis: Basis, n: usize) -> Result<CMatrix> {
        if n == 0 {
            return Err(LabError::InvalidArgument("compression size must be >= 1".into()));
        }
        let mut acc = CMatrix::zeros(n, n);
        for (letters, c) in &self.terms {
            let ops: Vec<OperatorId> = letters.iter().map(|l| l.op()).collect();
            let m = match basis {
                _ if ops.is_empty() => CMatrix::identity(n, n),
                Basis::LegendreOrthonormal => compress_product(&ops, n)?,
                Basis::Monomial => {
                    let big = n + ops.len();
                    let mut prod = CMatrix::identity(big, big);
                    for op in &ops {
                        prod *= assemble(*op, Basis::Monomial, big)?.entries();
                    }
                    prod.view((0, 0), (n, n)).into_owned()
                }
                Basis::Hardy => {
                    return Err(LabError::InvalidArgument("words are compressed on L2[0,1], not H2".into()))
                }
            };
            acc += m * crat_to_c64(c);
        }
        Ok(acc)
    }
}

impl std::fmt::Display for OperatorWord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms()
            .into_iter()
            .map(|(c, l)| {
                let body = if l.is_empty() {
                    "I".to_string()
                } else {
                    l.iter().map(|x| x.name()).collect::<Vec<_>>().join("*")
                };
                format!("({} + {}i)*{}", c.re, c.im, body)
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err<T>(&self, pos: usize, msg: impl Into<String>) -> Result<T> {
        Err(LabError::Parse { pos, msg: msg.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<OperatorWord> {
        let mut negate = false;
        match self.peek() {
            Some(b'-') => {
                negate = true;
                self.pos += 1;
            }
            Some(b'+') => self.pos += 1,
            _ => {}
        }
        let first = self.term()?;
        let mut acc = if negate { first.scale(&crat(-1)) } else { first };
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let t = self.term()?;
            acc = if op == b'+' { acc.add(&t) } else { acc.add(&t.scale(&crat(-1))) };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<OperatorWord> {
        let mut acc = self.factor()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            acc = acc.mul(&self.factor()?);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<OperatorWord> {
        let start = match self.peek() {
            None => return self.err(self.src.len(), "expected a factor, found end of input"),
            Some(_) => self.pos,
        };
        let c = self.src[start];
        if c == b'(' {
            self.pos += 1;
            let inner = self.expr()?;
            if self.peek() != Some(b')') {
                return self.err(self.pos, "expected ')'");
            }
            self.pos += 1;
            return Ok(inner);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.scalar();
        }
        if c == b'i' {
            self.pos += 1;
            return Ok(OperatorWord::scalar(Complex::new(BigRational::zero(), BigRational::one())));
        }
        if c.is_ascii_alphabetic() {
            let mut end = start;
            while end < self.src.len() && self.src[end].is_ascii_alphanumeric() {
                end += 1;
            }
            let name = std::str::from_utf8(&self.src[start..end]).unwrap_or("");
            let base = match name {
                "Mx" => OperatorWord::letter(Letter::Mx),
                "H" => OperatorWord::letter(Letter::H),
                "V" => OperatorWord::letter(Letter::V),
                "I" => OperatorWord::scalar(crat(1)),
                _ => return self.err(start, format!("unknown letter '{name}' (expected Mx, H, V or I)")),
            };
            self.pos = end;
            if self.peek() == Some(b'^') {
                self.pos += 1;
                self.skip_ws();
                let s = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if s == self.pos {
                    return self.err(s, "expected a non-negative integer exponent");
                }
                let k: u32 = std::str::from_utf8(&self.src[s..self.pos])
                    .ok()
                    .and_then(|t| t.parse().ok())
                    .filter(|k| *k <= 64)
                    .map_or_else(|| self.err(s, "exponent too large (max 64)"), Ok)?;
                return Ok(base.pow(k));
            }
            return Ok(base);
        }
        self.err(start, format!("unexpected character '{}'", c as char))
    }

    /// Decimal literal, optionally followed by `i`.
    fn scalar(&mut self) -> Result<OperatorWord> {
        let start = self.pos;
        let mut digits = String::new();
        let mut frac = 0u32;
        let mut seen_dot = false;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c.is_ascii_digit() {
                digits.push(c as char);
                if seen_dot {
                    frac += 1;
                }
            } else if c == b'.' && !seen_dot {
                seen_dot = true;
            } else {
                break;
            }
            self.pos += 1;
        }
        if digits.is_empty() {
            return self.err(start, "malformed number");
        }
        let mantissa: BigInt = digits.parse().map_err(|_| LabError::Parse { pos: start, msg: "malformed number".into() })?;
        let value = BigRational::new(mantissa, Pow::pow(BigInt::from(10), frac));
        if self.pos < self.src.len() && self.src[self.pos] == b'i' {
            self.pos += 1;
            return Ok(OperatorWord::scalar(Complex::new(BigRational::zero(), value)));
        }
        Ok(OperatorWord::scalar(Complex::new(value, BigRational::zero())))
    }
}

/// Parse `expr := term (('+'|'-') term)*`, `term := factor ('*' factor)*`,
/// `factor := scalar | letter | letter '^' int | '(' expr ')'`.
///
/// Letters are `Mx`, `H`, `V`, `I`; scalars are decimals, optionally followed
/// by `i`, so `(1+1i)` is a complex scalar. A leading sign is accepted.
/// Whitespace is ignored.
pub fn parse_word(text: &str) -> Result<OperatorWord> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let w = p.expr()?;
    if let Some(c) = p.peek() {
        return p.err(p.pos, format!("unexpected '{}'", c as char));
    }
    Ok(w)
}

/// `(f_-, f_+)` on the stick `[-1,0]` and the closed bulb `D̄(1,1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolPair {
    f_minus: SymbolPoly,
    f_plus: SymbolPoly,
}

/// Gluing tolerance `|f_-(0) - f_+(0)|`.
pub const GLUING_TOL: f64 = 1e-12;

impl SymbolPair {
    pub fn new(f_minus: SymbolPoly, f_plus: SymbolPoly) -> Result<Self> {
        let d = crat_to_c64(&(f_minus.coeff(0) - f_plus.coeff(0)));
        if !(d.norm() <= GLUING_TOL) {
            return Err(LabError::GluingViolation);
        }
        Ok(SymbolPair { f_minus, f_plus })
    }

    /// From integer coefficient lists.
    pub fn from_ints(f_minus: &[i64], f_plus: &[i64]) -> Result<Self> {
        let p = |c: &[i64]| Poly::new(c.iter().map(|v| crat(*v)).collect());
        Self::new(p(f_minus), p(f_plus))
    }

    /// `(t, z)`, the symbol of `Z = H - M_x`.
    pub fn identity() -> Self {
        SymbolPair { f_minus: Poly::x(), f_plus: Poly::x() }
    }

    pub fn constant(c: CRat) -> Self {
        SymbolPair { f_minus: Poly::constant(c.clone()), f_plus: Poly::constant(c) }
    }

    pub fn f_minus(&self) -> &SymbolPoly {
        &self.f_minus
    }

    pub fn f_plus(&self) -> &SymbolPoly {
        &self.f_plus
    }

    /// `f(0)`.
    pub fn at_zero(&self) -> CRat {
        self.f_minus.coeff(0)
    }

    pub fn eval_minus(&self, t: f64) -> Complex64 {
        self.f_minus.eval_with(Complex64::new(t, 0.0), crat_to_c64)
    }

    pub fn eval_plus(&self, z: Complex64) -> Complex64 {
        self.f_plus.eval_with(z, crat_to_c64)
    }

    pub fn mul(&self, other: &SymbolPair) -> SymbolPair {
        SymbolPair { f_minus: &self.f_minus * &other.f_minus, f_plus: &self.f_plus * &other.f_plus }
    }

    pub fn add(&self, other: &SymbolPair) -> SymbolPair {
        SymbolPair { f_minus: &self.f_minus + &other.f_minus, f_plus: &self.f_plus + &other.f_plus }
    }

    pub fn is_zero(&self) -> bool {
        self.f_minus.is_zero() && self.f_plus.is_zero()
    }

    pub fn degree(&self) -> usize {
        self.f_minus.degree().unwrap_or(0).max(self.f_plus.degree().unwrap_or(0))
    }
}

/// Symbol of a word: `V -> 0`, any monomial with both `Mx` and `H` -> 0,
/// `Mx^k -> (-t)^k` on the stick, `H^k -> z^k` on the bulb, scalars to both.
pub fn symbol_of(word: &OperatorWord) -> SymbolPair {
    let mut fm = Poly::zero();
    let mut fp = Poly::zero();
    for (c, letters) in word.terms() {
        if letters.contains(&Letter::V) {
            continue;
        }
        let has_x = letters.contains(&Letter::Mx);
        let has_h = letters.contains(&Letter::H);
        let k = letters.len();
        match (has_x, has_h) {
            (true, true) => {}
            (true, false) => {
                let sign = if k % 2 == 0 { crat(1) } else { crat(-1) };
                fm = &fm + &Poly::monomial(c * sign, k);
            }
            (false, true) => fp = &fp + &Poly::monomial(c, k),
            (false, false) => {
                fm = &fm + &Poly::constant(c.clone());
                fp = &fp + &Poly::constant(c);
            }
        }
    }
    SymbolPair { f_minus: fm, f_plus: fp }
}

/// Matrix polynomial `Σ c_k A^k`.
fn matrix_poly(p: &SymbolPoly, a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let mut acc = CMatrix::zeros(n, n);
    let mut power = CMatrix::identity(n, n);
    for c in p.coeffs() {
        acc += &power * crat_to_c64(c);
        power = &power * a;
    }
    acc
}

/// `γ(f)` at the working size `big`, before truncation.
fn gamma_at(f: &SymbolPair, big: usize) -> Result<CMatrix> {
    let mx = assemble(OperatorId::Mx, Basis::LegendreOrthonormal, big)?.into_entries();
    let h = assemble(OperatorId::H, Basis::LegendreOrthonormal, big)?.into_entries();
    let minus_mx = -mx;
    let mut g = matrix_poly(&f.f_minus, &minus_mx) + matrix_poly(&f.f_plus, &h);
    let c0 = crat_to_c64(&f.at_zero());
    for i in 0..big {
        g[(i, i)] -= c0;
    }
    Ok(g)
}

/// Orthonormal Legendre compression of `f_-(-M_x) + f_+(H) - f(0)`.
///
/// Powers are formed at size `N + deg f` and truncated, so each power is the
/// exact compression of the operator power.
pub fn gamma_build(f: &SymbolPair, n: usize) -> Result<CMatrix> {
    SymbolPair::new(f.f_minus.clone(), f.f_plus.clone())?;
    if n == 0 {
        return Err(LabError::InvalidArgument("compression size must be >= 1".into()));
    }
    let big = n + f.degree();
    Ok(gamma_at(f, big)?.view((0, 0), (n, n)).into_owned())
}

/// Singular values at three sizes, with `σ_{N/4}` (counting from `σ_1`, the
/// largest) as the compactness proxy.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayReport {
    pub sizes: Vec<usize>,
    pub singular_values: Vec<Vec<f64>>,
    pub sigma_quarter: Vec<f64>,
}

/// Required drop of `σ_{N/4}` per doubling of `N`.
pub const DECAY_FACTOR: f64 = 2.0;

impl DecayReport {
    fn from_matrices(sizes: &[usize], mats: Vec<CMatrix>) -> Self {
        let svs: Vec<Vec<f64>> = mats.iter().map(singular_values).collect();
        let sigma_quarter = sizes.iter().zip(&svs).map(|(n, s)| s[(n / 4).max(1) - 1]).collect();
        DecayReport { sizes: sizes.to_vec(), singular_values: svs, sigma_quarter }
    }

    /// `σ_{N/4}(N) / σ_{N/4}(2N)` for consecutive sizes.
    pub fn ratios(&self) -> Vec<f64> {
        self.sigma_quarter.windows(2).map(|w| w[0] / w[1]).collect()
    }

    /// Proxy for compactness: every ratio at least [`DECAY_FACTOR`].
    /// This is not a proof of compactness.
    pub fn halves_per_doubling(&self) -> bool {
        self.ratios().iter().all(|r| *r >= DECAY_FACTOR)
    }

    pub fn max_singular_value(&self) -> f64 {
        self.singular_values.iter().filter_map(|s| s.first().copied()).fold(0.0, f64::max)
    }
}

/// Sizes used for decay proxies.
pub const DECAY_SIZES: [usize; 3] = [16, 32, 64];

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.is_empty() || sizes.iter().any(|n| *n < 4) {
        return Err(LabError::InvalidArgument("decay sizes must be >= 4".into()));
    }
    Ok(())
}

/// `P_N (γ(f)γ(g) - γ(fg)) P_N` at each size. The product of the operators is
/// compressed exactly by building both factors at `N + deg f + deg g`.
pub fn product_defect(f: &SymbolPair, g: &SymbolPair, sizes: &[usize]) -> Result<DecayReport> {
    check_sizes(sizes)?;
    SymbolPair::new(f.f_minus.clone(), f.f_plus.clone())?;
    SymbolPair::new(g.f_minus.clone(), g.f_plus.clone())?;
    let fg = f.mul(g);
    let mats = sizes
        .iter()
        .map(|&n| {
            let big = n + f.degree() + g.degree();
            let prod = gamma_at(f, big)? * gamma_at(g, big)?;
            let d = prod.view((0, 0), (n, n)).into_owned() - gamma_build(&fg, n)?;
            Ok(d)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecayReport::from_matrices(sizes, mats))
}

/// `f(-M_x)g(H) - g(0)f(-M_x) - f(0)g(H) + f(0)g(0)` for polynomials `f`, `g`
/// of one variable, compressed exactly; compact since `[M_x][H] = 0`.
pub fn split_product_defect(f: &SymbolPoly, g: &SymbolPoly, sizes: &[usize]) -> Result<DecayReport> {
    check_sizes(sizes)?;
    let (f0, g0) = (crat_to_c64(&f.coeff(0)), crat_to_c64(&g.coeff(0)));
    let mats = sizes
        .iter()
        .map(|&n| {
            let big = n + f.degree().unwrap_or(0) + g.degree().unwrap_or(0);
            let mx = assemble(OperatorId::Mx, Basis::LegendreOrthonormal, big)?.into_entries();
            let h = assemble(OperatorId::H, Basis::LegendreOrthonormal, big)?.into_entries();
            let fx = matrix_poly(f, &(-mx));
            let gh = matrix_poly(g, &h);
            let mut d = &fx * &gh - &fx * g0 - &gh * f0;
            for i in 0..big {
                d[(i, i)] += f0 * g0;
            }
            Ok(d.view((0, 0), (n, n)).into_owned())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecayReport::from_matrices(sizes, mats))
}

/// `P_N (w - γ(θ(w))) P_N` at each size.
pub fn word_defect(word: &OperatorWord, sizes: &[usize]) -> Result<DecayReport> {
    check_sizes(sizes)?;
    let sym = symbol_of(word);
    let mats = sizes
        .iter()
        .map(|&n| Ok(word.compress(n)? - gamma_build(&sym, n)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(DecayReport::from_matrices(sizes, mats))
}

/// `n` samples of `f_-` on `[-1,0]` followed by `n` samples of `f_+` on the
/// circle `|z-1| = 1`.
pub fn essential_spectrum(f: &SymbolPair, n: usize) -> Result<Vec<Complex64>> {
    if n < 16 {
        return Err(LabError::InvalidArgument("essential spectrum needs at least 16 samples".into()));
    }
    let mut out = Vec::with_capacity(2 * n);
    out.extend((0..n).map(|k| f.eval_minus(-1.0 + k as f64 / (n - 1) as f64)));
    out.extend((0..n).map(|k| f.eval_plus(circle_point(k, n))));
    Ok(out)
}

fn circle_point(k: usize, n: usize) -> Complex64 {
    Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)
}

/// Distance below which `λ` counts as essentially spectral.
pub const ESSENTIAL_TOL: f64 = 1e-6;
const MAX_WINDING_SAMPLES: usize = 1 << 22;
/// Largest allowed argument step between consecutive curve samples.
pub const MAX_ARG_STEP: f64 = PI / 2.0;

/// Winding number of `θ -> f_+(1 + e^{iθ}) - λ`, starting from `samples`
/// points and doubling until every step turns by less than [`MAX_ARG_STEP`].
/// Returns the winding number and the sample count used.
pub fn winding_number(f: &SymbolPair, lambda: Complex64, samples: usize) -> Result<(i64, usize)> {
    let mut n = samples.max(8);
    loop {
        let vals: Vec<Complex64> = (0..n).map(|k| f.eval_plus(circle_point(k, n)) - lambda).collect();
        let near = vals.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
        if near < ESSENTIAL_TOL {
            return Err(LabError::IndexUndefined(format!("{lambda}")));
        }
        let mut total = 0.0;
        let mut worst = 0.0f64;
        for k in 0..n {
            let step = (vals[(k + 1) % n] / vals[k]).arg();
            worst = worst.max(step.abs());
            total += step;
        }
        if worst < MAX_ARG_STEP {
            return Ok(((total / (2.0 * PI)).round() as i64, n));
        }
        if n >= MAX_WINDING_SAMPLES {
            return Err(LabError::IndexUndefined(format!("{lambda} (curve too close to resolve)")));
        }
        n *= 2;
    }
}

/// Fredholm index of `γ(f) - λ`: the winding number of the bulb boundary
/// curve about `λ`. The stick is traversed back and forth and contributes
/// nothing, but `λ` on its image is essentially spectral.
pub fn fredholm_index(f: &SymbolPair, lambda: Complex64) -> Result<i64> {
    let samples = 256;
    let stick = (0..=4 * samples).map(|k| f.eval_minus(-1.0 + k as f64 / (4 * samples) as f64));
    if stick.map(|v| (v - lambda).norm()).fold(f64::INFINITY, f64::min) < ESSENTIAL_TOL {
        return Err(LabError::IndexUndefined(format!("{lambda}")));
    }
    winding_number(f, lambda, samples).map(|(w, _)| w)
}

/// One row of the spike table.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikeRow {
    pub n: u32,
    /// `⟨g χ_n, χ_n⟩` by quadrature.
    pub inner: f64,
    /// `g(s)`.
    pub limit: f64,
    pub error: f64,
    /// `‖H χ_n‖` in closed form.
    pub h_norm: f64,
    /// `‖H χ_n‖` by quadrature.
    pub h_norm_quadrature: f64,
}

/// One row of the Υ table.
#[derive(Clone, Debug, PartialEq)]
pub struct UpsilonRow {
    pub alpha: Complex64,
    /// `⟨x^ρ Υ_α, Υ_α⟩` by quadrature.
    pub inner: f64,
    /// `(1-|α|²)/(|1+α|²ρ + 1 - |α|²)`.
    pub formula: f64,
    /// Limit as `α -> τ` (zero for `ρ > 0`, one for `ρ = 0`).
    pub limit: f64,
    /// `‖HΥ_α - (1+α)Υ_α‖`.
    pub eigen_residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum WitnessKind {
    /// `χ_n` concentrated at `s`, paired with the multiplier `g`.
    Spike { s: f64, g: RealPoly },
    /// `Υ_{rτ}` along the radius toward `τ`, paired with `x^ρ`.
    Upsilon { tau: Complex64, rho: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum WitnessTable {
    Spike(Vec<SpikeRow>),
    Upsilon(Vec<UpsilonRow>),
}

/// `‖H χ_n‖²` for `χ_n = sqrt(n/2) 1_{[s-h, s+h]}`, `h = 1/n`.
pub fn spike_h_norm(s: f64, n: u32) -> f64 {
    let h = 1.0 / n as f64;
    let (a, b) = (s - h, s + h);
    let c2 = n as f64 / 2.0;
    let inside = (b - a) - 2.0 * a * (b / a).ln() + a * a * (1.0 / a - 1.0 / b);
    let outside = 4.0 * h * h * (1.0 / b - 1.0);
    (c2 * (inside + outside)).sqrt()
}

/// `⟨x^ρ Υ_α, Υ_α⟩ = (1-|α|²)/(|1+α|²ρ + 1 - |α|²)`.
pub fn upsilon_formula(rho: f64, alpha: Complex64) -> f64 {
    let a2 = alpha.norm_sqr();
    (1.0 - a2) / ((1.0 + alpha).norm_sqr() * rho + 1.0 - a2)
}

const WITNESS_ORDER: usize = 16;

fn spike_row(s: f64, g: &RealPoly, n: u32) -> Result<SpikeRow> {
    let h = 1.0 / n as f64;
    if n == 0 || h >= s.min(1.0 - s) {
        return Err(LabError::InvalidArgument(format!("spike needs 1/n < min(s, 1-s), got s = {s}, n = {n}")));
    }
    let form = ClosedForm::Spike { s, n };
    let grid = form.default_grid(WITNESS_ORDER)?;
    let chi = GridFunction::from_fn(grid.clone(), |p| form.value_at(p));
    let gchi = chi.mul_fn(|p| Complex64::new(g.eval(&p.x), 0.0));
    let inner = inner_product(&gchi, &chi)?.re;
    let limit = g.eval(&s);
    let hchi = apply(OperatorId::H, Operand::Form(&form, &grid))?;
    Ok(SpikeRow {
        n,
        inner,
        limit,
        error: (inner - limit).abs(),
        h_norm: spike_h_norm(s, n),
        h_norm_quadrature: hchi.l2_norm(),
    })
}

fn upsilon_row(alpha: Complex64, rho: f64) -> Result<UpsilonRow> {
    let form = ClosedForm::Upsilon { alpha };
    form.validate()?;
    let grid = form.default_grid(WITNESS_ORDER)?;
    let ups = GridFunction::from_fn(grid.clone(), |p| form.value_at(p));
    let weighted = ups.mul_fn(|p| if p.x > 0.0 { Complex64::new(p.x.powf(rho), 0.0) } else { ZERO });
    let inner = inner_product(&weighted, &ups)?.re;
    let hu = apply(OperatorId::H, Operand::Form(&form, &grid))?;
    let eigen_residual = hu.axpy(-(1.0 + alpha), &ups)?.l2_norm();
    Ok(UpsilonRow {
        alpha,
        inner,
        formula: upsilon_formula(rho, alpha),
        limit: if rho > 0.0 { 0.0 } else { 1.0 },
        eigen_residual,
    })
}

/// Witness tables.
///
/// Spike: `schedule` lists `n`; needs `1/n < min(s, 1-s)`.
/// Upsilon: `schedule` lists radii `r ∈ [0,1)` with `α = rτ`; needs `|τ| = 1`,
/// `τ ≠ -1` and `ρ >= 0`.
pub fn witness_limits(kind: &WitnessKind, schedule: &[f64]) -> Result<WitnessTable> {
    match kind {
        WitnessKind::Spike { s, g } => {
            if !(*s > 0.0 && *s < 1.0) {
                return Err(LabError::InvalidArgument(format!("spike centre must lie in (0,1), got {s}")));
            }
            let rows = schedule
                .iter()
                .map(|&n| {
                    if !(n >= 1.0 && n.fract() == 0.0 && n <= u32::MAX as f64) {
                        return Err(LabError::InvalidArgument(format!("spike index must be a positive integer, got {n}")));
                    }
                    spike_row(*s, g, n as u32)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(WitnessTable::Spike(rows))
        }
        WitnessKind::Upsilon { tau, rho } => {
            if (tau.norm() - 1.0).abs() > 1e-12 {
                return Err(LabError::InvalidArgument(format!("τ must lie on the unit circle, got {tau}")));
            }
            if (tau + 1.0).norm() < 1e-12 {
                return Err(LabError::InvalidArgument("τ = -1 is excluded".into()));
            }
            if !(*rho >= 0.0 && rho.is_finite()) {
                return Err(LabError::InvalidArgument(format!("ρ must be >= 0, got {rho}")));
            }
            let rows = schedule
                .iter()
                .map(|&r| {
                    if !(0.0..1.0).contains(&r) {
                        return Err(LabError::InvalidArgument(format!("radius must lie in [0,1), got {r}")));
                    }
                    upsilon_row(tau * r, *rho)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(WitnessTable::Upsilon(rows))
        }
    }
}

/// Least-squares slope of `log err` against `log n`, negated.
pub fn decay_exponent(ns: &[f64], errs: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = ns.iter().zip(errs).map(|(n, e)| (n.ln(), e.ln())).collect();
    let m = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / m, pts.iter().map(|p| p.1).sum::<f64>() / m);
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    -num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn q(n: i64, d: i64) -> CRat {
        Complex::new(BigRational::new(n.into(), d.into()), BigRational::zero())
    }

    #[test]
    fn lollipop_membership() {
        let l = Lollipop;
        assert!(l.contains(c(-0.5, 0.0)));
        assert!(l.contains(c(-1.0, 0.0)));
        assert!(l.contains(c(1.0, 1.0)));
        assert!(!l.contains(c(-0.5, 0.01)));
        assert!(!l.contains(c(2.5, 0.0)));
        assert!((l.distance(c(3.0, 0.0)) - 1.0).abs() < 1e-15);
        assert!((l.distance(c(-0.5, 0.3)) - 0.3).abs() < 1e-15);
        assert_eq!(l.distance(c(1.0, 0.2)), 0.0);
        assert!((l.boundary_distance(c(1.0, 0.0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn parse_examples() {
        let w = parse_word("H - Mx").unwrap();
        assert_eq!(w.terms(), vec![(q(-1, 1), vec![Letter::Mx]), (q(1, 1), vec![Letter::H])]);
        assert_eq!(parse_word("H*Mx").unwrap().terms(), vec![(q(1, 1), vec![Letter::H, Letter::Mx])]);
        let w = parse_word("2*H^2 - (1+1i)*V").unwrap();
        let t = w.terms();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0], (Complex::new(-BigRational::one(), -BigRational::one()), vec![Letter::V]));
        assert_eq!(t[1], (q(2, 1), vec![Letter::H, Letter::H]));
        assert_eq!(parse_word(" 0.25 * I ").unwrap().terms(), vec![(q(1, 4), vec![])]);
    }

    #[test]
    fn parse_errors_carry_positions() {
        assert!(matches!(parse_word("H -"), Err(LabError::Parse { pos: 3, .. })));
        assert!(matches!(parse_word("H + Q"), Err(LabError::Parse { pos: 4, .. })));
        assert!(matches!(parse_word("(H"), Err(LabError::Parse { pos: 2, .. })));
        assert!(matches!(parse_word("H^"), Err(LabError::Parse { pos: 2, .. })));
        assert!(matches!(parse_word("H H"), Err(LabError::Parse { pos: 2, .. })));
    }

    #[test]
    fn symbols_of_basic_words() {
        assert_eq!(symbol_of(&parse_word("H - Mx").unwrap()), SymbolPair::identity());
        assert!(symbol_of(&parse_word("H*Mx").unwrap()).is_zero());
        assert!(symbol_of(&parse_word("V").unwrap()).is_zero());
        assert_eq!(symbol_of(&parse_word("I").unwrap()), SymbolPair::constant(q(1, 1)));
        let s = symbol_of(&parse_word("Mx^3 + 2").unwrap());
        assert_eq!(s.f_minus(), &Poly::new(vec![q(2, 1), q(0, 1), q(0, 1), q(-1, 1)]));
        assert_eq!(s.f_plus(), &Poly::constant(q(2, 1)));
    }

    #[test]
    fn symbol_is_multiplicative_on_short_words() {
        let letters = [Letter::Mx, Letter::H];
        let mut words = vec![vec![]];
        for len in 1..=3 {
            let mut next = Vec::new();
            for w in words.iter().filter(|w: &&Vec<Letter>| w.len() == len - 1) {
                for l in letters {
                    let mut v = w.clone();
                    v.push(l);
                    next.push(v);
                }
            }
            words.extend(next);
        }
        for a in &words {
            for b in &words {
                let wa = OperatorWord::from_terms(vec![(q(1, 1), a.clone())]);
                let wb = OperatorWord::from_terms(vec![(q(1, 1), b.clone())]);
                assert_eq!(symbol_of(&wa.mul(&wb)), symbol_of(&wa).mul(&symbol_of(&wb)), "{a:?} {b:?}");
            }
        }
    }

    #[test]
    fn gluing_is_enforced() {
        assert!(matches!(SymbolPair::from_ints(&[1], &[2]), Err(LabError::GluingViolation)));
        assert!(SymbolPair::from_ints(&[3, 1], &[3, 0, 1]).is_ok());
    }

    #[test]
    fn gamma_of_identity_and_constants() {
        let z = gamma_build(&SymbolPair::identity(), 12).unwrap();
        let want = compress_product(&[OperatorId::Z], 12).unwrap();
        assert!(max_abs(&(z - want)) < 1e-14);
        let one = gamma_build(&SymbolPair::constant(q(1, 1)), 9).unwrap();
        assert!(max_abs(&(one - CMatrix::identity(9, 9))) < 1e-15);
    }

    #[test]
    fn gamma_agrees_with_pure_words() {
        let w = parse_word("H^2 + Mx^2").unwrap();
        let d = word_defect(&w, &DECAY_SIZES).unwrap();
        assert!(d.max_singular_value() < 1e-12);
    }

    #[test]
    fn mixed_word_defect_is_compact_like() {
        let w = parse_word("H*Mx + H^2").unwrap();
        let d = word_defect(&w, &DECAY_SIZES).unwrap();
        assert!(d.sigma_quarter.windows(2).all(|p| p[1] < p[0]), "{:?}", d.sigma_quarter);
    }

    #[test]
    fn trivial_product_defects_vanish() {
        let one = SymbolPair::constant(q(1, 1));
        let d = product_defect(&one, &one, &DECAY_SIZES).unwrap();
        assert!(d.max_singular_value() < 1e-12);
        let d = product_defect(&SymbolPair::identity(), &SymbolPair::constant(q(3, 2)), &DECAY_SIZES).unwrap();
        assert!(d.max_singular_value() < 1e-12);
    }

    #[test]
    fn essential_spectrum_of_simple_symbols() {
        let pts = essential_spectrum(&SymbolPair::identity(), 32).unwrap();
        assert!(pts.iter().all(|z| Lollipop.boundary_distance(*z) < 1e-14));
        let pts = essential_spectrum(&SymbolPair::constant(q(5, 1)), 16).unwrap();
        assert!(pts.iter().all(|z| (z - 5.0).norm() == 0.0));
        let sq = SymbolPair::from_ints(&[0, 0, 1], &[0, 0, 1]).unwrap();
        let pts = essential_spectrum(&sq, 64).unwrap();
        for (k, z) in pts[..64].iter().enumerate() {
            let t = -1.0 + k as f64 / 63.0;
            assert!((z - t * t).norm() < 1e-15);
        }
        for (k, z) in pts[64..].iter().enumerate() {
            let w = circle_point(k, 64);
            assert!((z - w * w).norm() < 1e-14);
        }
        assert!(essential_spectrum(&sq, 8).is_err());
    }

    #[test]
    fn index_examples() {
        let id = SymbolPair::identity();
        assert_eq!(fredholm_index(&id, c(1.0, 0.0)).unwrap(), 1);
        assert_eq!(fredholm_index(&id, c(3.0, 0.0)).unwrap(), 0);
        assert_eq!(fredholm_index(&id, c(-2.0, 0.5)).unwrap(), 0);
        let sq = SymbolPair::from_ints(&[1], &[1, -2, 1]).unwrap();
        assert_eq!(fredholm_index(&sq, c(0.0, 0.0)).unwrap(), 2);
        assert!(matches!(fredholm_index(&id, c(-0.5, 0.0)), Err(LabError::IndexUndefined(_))));
        assert!(matches!(fredholm_index(&id, c(2.0, 0.0)), Err(LabError::IndexUndefined(_))));
    }

    #[test]
    fn winding_is_stable_under_refinement() {
        let id = SymbolPair::identity();
        for lam in [c(1.0, 0.0), c(3.0, 0.0), c(1.5, 0.5), c(0.02, 0.0)] {
            let (w, used) = winding_number(&id, lam, 64).unwrap();
            let (w2, _) = winding_number(&id, lam, 2 * used).unwrap();
            assert_eq!(w, w2);
        }
    }

    #[test]
    fn spike_matches_exact_piecewise_integral() {
        let g = RealPoly::new(vec![0.0, 0.0, 1.0]);
        let kind = WitnessKind::Spike { s: 0.3, g };
        let WitnessTable::Spike(rows) = witness_limits(&kind, &[8.0, 16.0, 32.0, 64.0]).unwrap() else {
            panic!()
        };
        for r in &rows {
            let h = 1.0 / r.n as f64;
            assert!((r.inner - (0.09 + h * h / 3.0)).abs() < 1e-14, "{r:?}");
            assert!((r.h_norm - r.h_norm_quadrature).abs() < 1e-10, "{r:?}");
        }
        assert!(rows.windows(2).all(|w| w[1].h_norm < w[0].h_norm));
        assert!(witness_limits(&WitnessKind::Spike { s: 0.1, g: RealPoly::x() }, &[8.0]).is_err());
    }

    #[test]
    fn upsilon_claim_value() {
        assert!((upsilon_formula(1.0, c(0.9, 0.0)) - 0.05).abs() < 1e-15);
        let kind = WitnessKind::Upsilon { tau: c(1.0, 0.0), rho: 1.0 };
        let WitnessTable::Upsilon(rows) = witness_limits(&kind, &[0.0, 0.5, 0.9]).unwrap() else { panic!() };
        for r in &rows {
            assert!((r.inner - r.formula).abs() < 1e-10, "{r:?}");
            assert!(r.eigen_residual < 1e-8, "{r:?}");
        }
        let bad = WitnessKind::Upsilon { tau: c(-1.0, 0.0), rho: 1.0 };
        assert!(witness_limits(&bad, &[0.5]).is_err());
    }
}
