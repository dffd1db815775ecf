//! Compact operators in AlgLat(V): rank-one pieces that factor through `V`,
//! triangularity of kernels, and the dyadic finite-rank approximation.
//!
//! Kernels follow the operator convention `Tf(x) = ∫_0^1 k(x,s) f(s) ds`;
//! triangular means `k(x,s) = 0` for `s > x`. Sampled kernels live on the
//! uniform midpoint grid `x_i = (i + 1/2)/N`, row index `x`, column index
//! `s`, and an `N x N` sample `K` acts as the matrix `K/N` on cell averages
//! scaled to unit cells, so operator norms are `σ_max(K)/N`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::forms::ClosedForm;
use crate::linalg::op_norm;
use crate::operators::legendre_orthonormal_values;
use crate::quad::{GridFunction, Pt, QuadratureGrid};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Kernel on `[0,1]²`, either a function or an `N x N` midpoint sample.
#[derive(Clone)]
pub enum KernelFunction {
    Callable(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
    Sampled(DMatrix<f64>),
}

impl std::fmt::Debug for KernelFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelFunction::Callable(_) => write!(f, "Callable(..)"),
            KernelFunction::Sampled(m) => write!(f, "Sampled({}x{})", m.nrows(), m.ncols()),
        }
    }
}

impl KernelFunction {
    pub fn callable<F: Fn(f64, f64) -> f64 + Send + Sync + 'static>(k: F) -> Self {
        KernelFunction::Callable(Arc::new(k))
    }

    pub fn sampled(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(LabError::InvalidArgument(format!(
                "kernel sample must be square and nonempty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(LabError::InvalidArgument("kernel sample has non-finite entries".into()));
        }
        Ok(KernelFunction::Sampled(m))
    }

    /// Volterra kernel `1_{s<x}`; on the diagonal cell the sample is the
    /// cell average 1/2.
    pub fn volterra(n: usize) -> Result<Self> {
        Self::sampled(DMatrix::from_fn(n, n, |i, j| match j.cmp(&i) {
            std::cmp::Ordering::Less => 1.0,
            std::cmp::Ordering::Equal => 0.5,
            std::cmp::Ordering::Greater => 0.0,
        }))
    }

    /// Midpoint samples of a callable kernel; a sampled kernel must already
    /// have side `n`.
    pub fn sample(&self, n: usize) -> Result<KernelFunction> {
        match self {
            KernelFunction::Callable(k) => {
                let x = |i: usize| (i as f64 + 0.5) / n as f64;
                Self::sampled(DMatrix::from_fn(n, n, |i, j| k(x(i), x(j))))
            }
            KernelFunction::Sampled(m) if m.nrows() == n => Ok(self.clone()),
            KernelFunction::Sampled(m) => Err(LabError::InvalidArgument(format!(
                "kernel is sampled at N = {}, not {n}",
                m.nrows()
            ))),
        }
    }

    pub fn samples(&self) -> Result<&DMatrix<f64>> {
        match self {
            KernelFunction::Sampled(m) => Ok(m),
            KernelFunction::Callable(_) => {
                Err(LabError::InvalidArgument("operation needs a sampled kernel".into()))
            }
        }
    }

    pub fn side(&self) -> Option<usize> {
        match self {
            KernelFunction::Sampled(m) => Some(m.nrows()),
            KernelFunction::Callable(_) => None,
        }
    }

    /// Grid Frobenius norm `(Σ k² / N²)^{1/2}`, the Hilbert-Schmidt proxy.
    pub fn frobenius(&self) -> Result<f64> {
        let m = self.samples()?;
        Ok(m.norm() / m.nrows() as f64)
    }

    /// Operator norm of the sampled operator.
    pub fn op_norm(&self) -> Result<f64> {
        let m = self.samples()?;
        Ok(block_norm(m, 0..m.nrows(), 0..m.ncols()))
    }
}

fn block_norm(m: &DMatrix<f64>, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> f64 {
    let n = m.nrows() as f64;
    if rows.is_empty() || cols.is_empty() {
        return 0.0;
    }
    // complex SVD: the real path mishandles rank-deficient blocks
    let b = m.view((rows.start, cols.start), (rows.len(), cols.len())).map(|v| Complex64::new(v, 0.0));
    op_norm(&b) / n
}

/// Parse `N` rows of `N` comma separated reals; row index is `x`, column
/// index is `s`, both ascending. Errors report the 1-based line.
pub fn parse_kernel_csv(text: &str) -> Result<KernelFunction> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| LabError::Parse { pos: line_no + 1, msg: format!("bad number: {e}") })?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(LabError::Parse {
                    pos: line_no + 1,
                    msg: format!("expected {} values, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows[0].len() != n {
        return Err(LabError::Parse { pos: n, msg: format!("kernel must be square, got {n} rows") });
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(LabError::Parse { pos: 0, msg: "non-finite entry".into() });
    }
    KernelFunction::sampled(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Inverse of [`parse_kernel_csv`].
pub fn kernel_to_csv(kernel: &KernelFunction) -> Result<String> {
    let m = kernel.samples()?;
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// True iff every sample with `s > x` (column past row) has modulus `<= tol`.
pub fn is_triangular(kernel: &KernelFunction, tol: f64) -> Result<bool> {
    let m = kernel.samples()?;
    Ok((0..m.nrows()).all(|i| (i + 1..m.ncols()).all(|j| m[(i, j)].abs() <= tol)))
}

fn check_power_of_two(n: usize, what: &str) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(LabError::InvalidArgument(format!("{what} must be a power of two, got {n}")));
    }
    Ok(())
}

/// `max_j ‖P_{I_j} K P_{I_j}‖` over `n` equal intervals.
pub fn block_diagonal_norm(kernel: &KernelFunction, n: usize) -> Result<f64> {
    check_power_of_two(n, "block count")?;
    let m = kernel.samples()?;
    let side = m.nrows();
    if side % n != 0 {
        return Err(LabError::InvalidArgument(format!("kernel side {side} is not a multiple of {n}")));
    }
    let b = side / n;
    let norms: Vec<f64> = (0..n).into_par_iter().map(|j| block_norm(m, j * b..(j + 1) * b, j * b..(j + 1) * b)).collect();
    Ok(norms.into_iter().fold(0.0, f64::max))
}

/// Rank-one piece `φ ⊗ ψ`, kernel `φ(x) conj(ψ(s))`, with `φ` on cells
/// `[t,1]` and `ψ` on cells `[0,t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RankOnePiece {
    pub level: usize,
    pub split: f64,
    pub phi: Vec<Complex64>,
    pub psi: Vec<Complex64>,
}

/// Finite-rank output of [`dyadic_approximation`].
#[derive(Clone, Debug)]
pub struct DyadicApproximation {
    pub side: usize,
    pub levels: usize,
    pub pieces: Vec<RankOnePiece>,
    /// Bound after each level: block-diagonal norm plus truncation tails so far.
    pub level_bounds: Vec<f64>,
    /// Block-diagonal norm `max_j ‖P_j K P_j‖` after each level.
    pub diagonal_norms: Vec<f64>,
    /// Sum of the dropped SVD tails (in operator norm).
    pub truncation: f64,
}

impl DyadicApproximation {
    pub fn rank(&self) -> usize {
        self.pieces.len()
    }

    pub fn bound(&self) -> f64 {
        self.level_bounds.last().copied().unwrap_or(0.0)
    }

    /// Kernel samples of the collected finite-rank operator.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        let n = self.side;
        let mut m = DMatrix::from_element(n, n, ZERO);
        for p in &self.pieces {
            for i in 0..n {
                if p.phi[i] == ZERO {
                    continue;
                }
                for j in 0..n {
                    m[(i, j)] += p.phi[i] * p.psi[j].conj();
                }
            }
        }
        m
    }

    /// `‖K - approximation‖` on the sample grid.
    pub fn measured_error(&self, kernel: &KernelFunction) -> Result<f64> {
        let k = kernel.samples()?.map(|v| Complex64::new(v, 0.0));
        Ok(op_norm(&(k - self.matrix())) / self.side as f64)
    }
}

/// Default total budget for SVD truncation.
pub const DYADIC_EPS: f64 = 1e-9;

fn split_block(m: &DMatrix<f64>, a: usize, b: usize, level: usize, eps: f64) -> (Vec<RankOnePiece>, f64) {
    let n = m.nrows();
    let mid = (a + b) / 2;
    // rows x in [mid, b), columns s in [a, mid)
    let (rows, cols) = (b - mid, mid - a);
    if (0..rows).all(|i| (0..cols).all(|j| m[(mid + i, a + j)] == 0.0)) {
        return (Vec::new(), 0.0);
    }
    // nalgebra's SVD with vectors is unreliable on rank-deficient blocks
    let block = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(mid + i, a + j)]);
    let svd = block.thin_svd().expect("SVD of a finite block");
    let (u, v, s) = (svd.U(), svd.V(), svd.S());
    let sigma: Vec<f64> = (0..rows.min(cols)).map(|k| s[k]).collect();
    let budget = eps / 2f64.powi(level as i32 + 2);
    // faer returns singular values in descending order
    let rank = sigma.iter().position(|sv| sv / n as f64 <= budget).unwrap_or(sigma.len());
    let tail = sigma.get(rank).map_or(0.0, |sv| sv / n as f64);
    let pieces = (0..rank)
        .map(|k| {
            let mut phi = vec![ZERO; n];
            let mut psi = vec![ZERO; n];
            for i in 0..rows {
                phi[mid + i] = Complex64::new(sigma[k] * u[(i, k)], 0.0);
            }
            for j in 0..cols {
                psi[a + j] = Complex64::new(v[(j, k)], 0.0);
            }
            RankOnePiece { level, split: mid as f64 / n as f64, phi, psi }
        })
        .collect();
    (pieces, tail)
}

/// Peel the lower off-diagonal blocks `P_{[mid,b]} K P_{[a,mid]}` of every
/// dyadic interval for `levels` levels, each compressed by truncated SVD so
/// that the dropped tail at level `ℓ` is at most `eps / 2^{ℓ+2}`.
///
/// What remains is block diagonal over `2^levels` intervals, so
/// `‖K - approximation‖ <= max_j ‖P_j K P_j‖ + Σ tails`, the reported bound.
pub fn dyadic_approximation(kernel: &KernelFunction, levels: usize, eps: f64) -> Result<DyadicApproximation> {
    if levels == 0 {
        return Err(LabError::InvalidArgument("need at least one level".into()));
    }
    let m = kernel.samples()?;
    let side = m.nrows();
    if side % (1 << levels) != 0 {
        return Err(LabError::InvalidArgument(format!(
            "kernel side {side} is not a multiple of 2^{levels}"
        )));
    }
    if !is_triangular(kernel, 0.0)? {
        return Err(LabError::NotInAlgLat);
    }
    let mut pieces = Vec::new();
    let mut level_bounds = Vec::with_capacity(levels);
    let mut diagonal_norms = Vec::with_capacity(levels);
    let mut truncation = 0.0;
    for level in 1..=levels {
        let count = 1usize << (level - 1);
        let width = side / count;
        let results: Vec<(Vec<RankOnePiece>, f64)> = (0..count)
            .into_par_iter()
            .map(|j| split_block(m, j * width, (j + 1) * width, level, eps))
            .collect();
        // the peeled blocks at one level are disjoint, so their tails combine
        // as a block-diagonal operator: the largest one counts
        let level_tail = results.iter().map(|r| r.1).fold(0.0, f64::max);
        truncation += level_tail;
        for (p, _) in results {
            pieces.extend(p);
        }
        let diag = block_diagonal_norm(kernel, 1 << level)?;
        diagonal_norms.push(diag);
        level_bounds.push(diag + truncation);
    }
    Ok(DyadicApproximation { side, levels, pieces, level_bounds, diagonal_norms, truncation })
}

/// One factor of a rank-one pair.
#[derive(Clone, Debug)]
pub enum Factor {
    Form(ClosedForm),
    /// Piecewise constant on `len` equal cells.
    Cells(Vec<Complex64>),
    /// Values on a grid; both factors must then share the grid.
    Grid(GridFunction),
}

impl Factor {
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Factor::Form(f) => f.breakpoints(),
            Factor::Cells(c) => (1..c.len()).map(|k| k as f64 / c.len() as f64).collect(),
            Factor::Grid(_) => Vec::new(),
        }
    }

    fn value(&self, p: Pt, i: usize) -> Complex64 {
        match self {
            Factor::Form(f) => f.value_at(p),
            Factor::Cells(c) => {
                let k = ((p.x * c.len() as f64).floor() as usize).min(c.len() - 1);
                c[k]
            }
            Factor::Grid(g) => g.values()[i],
        }
    }
}

/// `φ ⊗ ψ` with `φ` vanishing on `[0,t]` and `ψ` on `[t,1]`.
#[derive(Clone, Debug)]
pub struct RankOnePair {
    pub phi: Factor,
    pub psi: Factor,
    pub split: f64,
}

impl From<&RankOnePiece> for RankOnePair {
    fn from(p: &RankOnePiece) -> Self {
        RankOnePair { phi: Factor::Cells(p.phi.clone()), psi: Factor::Cells(p.psi.clone()), split: p.split }
    }
}

const SUPPORT_TOL: f64 = 1e-14;

/// `max_{j,k} |⟨(φ⊗ψ - M_φ V M_ψ*) q_k, q_j⟩|`-type comparison: operator norm
/// of the difference of the two constructions compressed to the first `N`
/// orthonormal Legendre polynomials.
pub fn rank_one_defect(pair: &RankOnePair, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(LabError::InvalidArgument("compression size must be >= 1".into()));
    }
    let t = pair.split;
    if !(t > 0.0 && t < 1.0) {
        return Err(LabError::InvalidArgument(format!("split point must lie in (0,1), got {t}")));
    }
    let grid = match (&pair.phi, &pair.psi) {
        (Factor::Grid(a), Factor::Grid(b)) => {
            if !a.same_grid(b) {
                return Err(LabError::GridMismatch);
            }
            a.grid().clone()
        }
        (Factor::Grid(_), _) | (_, Factor::Grid(_)) => return Err(LabError::GridMismatch),
        _ => {
            let mut breaks = vec![0.0, t, 1.0];
            breaks.extend(pair.phi.breakpoints());
            breaks.extend(pair.psi.breakpoints());
            for k in 1..8 {
                breaks.push(k as f64 / 8.0);
            }
            breaks.retain(|b| (0.0..=1.0).contains(b));
            breaks.sort_by(f64::total_cmp);
            breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
            Arc::new(QuadratureGrid::composite(&breaks, (n + 8).max(16))?)
        }
    };
    let pts = grid.points();
    let w = grid.weights();
    let phi: Vec<Complex64> = pts.iter().enumerate().map(|(i, p)| pair.phi.value(*p, i)).collect();
    let psi: Vec<Complex64> = pts.iter().enumerate().map(|(i, p)| pair.psi.value(*p, i)).collect();
    let scale = phi.iter().chain(&psi).map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
    for (i, p) in pts.iter().enumerate() {
        if p.x < t && phi[i].norm() > SUPPORT_TOL * scale {
            return Err(LabError::InvalidSupports(format!("φ is nonzero at x = {} < t = {t}", p.x)));
        }
        if p.x > t && psi[i].norm() > SUPPORT_TOL * scale {
            return Err(LabError::InvalidSupports(format!("ψ is nonzero at x = {} > t = {t}", p.x)));
        }
    }
    let q: Vec<Vec<f64>> = pts.iter().map(|p| legendre_orthonormal_values(n, p.x)).collect();
    // rank one: ⟨q_k, ψ⟩ ⟨φ, q_j⟩
    let a: Vec<Complex64> = (0..n).map(|k| (0..pts.len()).map(|i| psi[i].conj() * q[i][k] * w[i]).sum()).collect();
    let b: Vec<Complex64> = (0..n).map(|j| (0..pts.len()).map(|i| phi[i] * q[i][j] * w[i]).sum()).collect();
    let mut diff = DMatrix::from_element(n, n, ZERO);
    for k in 0..n {
        let integrand: Vec<Complex64> = (0..pts.len()).map(|i| psi[i].conj() * q[i][k]).collect();
        let cum = grid.cumulative_left(&integrand);
        for j in 0..n {
            let composed: Complex64 = (0..pts.len()).map(|i| phi[i] * q[i][j] * cum[i] * w[i]).sum();
            diff[(j, k)] = b[j] * a[k] - composed;
        }
    }
    Ok(op_norm(&diff))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_and_errors() {
        let v = KernelFunction::volterra(4).unwrap();
        let text = kernel_to_csv(&v).unwrap();
        let back = parse_kernel_csv(&text).unwrap();
        assert_eq!(back.samples().unwrap(), v.samples().unwrap());
        assert!(matches!(parse_kernel_csv("1,2\n3"), Err(LabError::Parse { pos: 2, .. })));
        assert!(matches!(parse_kernel_csv("1,x\n3,4"), Err(LabError::Parse { pos: 1, .. })));
        assert!(matches!(parse_kernel_csv("1,2,3\n4,5,6"), Err(LabError::Parse { .. })));
    }

    #[test]
    fn triangularity_examples() {
        assert!(is_triangular(&KernelFunction::volterra(16).unwrap(), 0.0).unwrap());
        let ones = KernelFunction::callable(|_, _| 1.0).sample(16).unwrap();
        assert!(!is_triangular(&ones, 1e-12).unwrap());
        let ramp = KernelFunction::callable(|x, s| (x - s).max(0.0)).sample(16).unwrap();
        assert!(is_triangular(&ramp, 0.0).unwrap());
        assert!(is_triangular(&KernelFunction::callable(|_, _| 1.0), 0.0).is_err());
    }

    #[test]
    fn volterra_block_norms_halve() {
        let v = KernelFunction::volterra(256).unwrap();
        let full = block_diagonal_norm(&v, 1).unwrap();
        assert!((full - 2.0 / std::f64::consts::PI).abs() < 1e-4, "{full}");
        let mut prev = full;
        for n in [2, 4, 8] {
            let b = block_diagonal_norm(&v, n).unwrap();
            assert!((b / prev - 0.5).abs() < 0.5 * 0.05, "{n}: {b} vs {prev}");
            prev = b;
        }
        assert!(block_diagonal_norm(&v, 3).is_err());
    }

    #[test]
    fn dyadic_bounds_dominate_and_decrease() {
        let v = KernelFunction::volterra(256).unwrap();
        let mut prev = f64::INFINITY;
        for levels in 1..=4 {
            let d = dyadic_approximation(&v, levels, DYADIC_EPS).unwrap();
            assert!(d.bound() < prev);
            prev = d.bound();
            assert!(d.measured_error(&v).unwrap() <= d.bound() + 1e-6);
            // every off-diagonal block of the Volterra kernel is all ones
            assert_eq!(d.rank(), (1 << levels) - 1);
        }
        let zero = KernelFunction::sampled(DMatrix::zeros(16, 16)).unwrap();
        let d = dyadic_approximation(&zero, 2, DYADIC_EPS).unwrap();
        assert_eq!((d.rank(), d.bound()), (0, 0.0));
        let ones = KernelFunction::callable(|_, _| 1.0).sample(16).unwrap();
        assert!(matches!(dyadic_approximation(&ones, 2, DYADIC_EPS), Err(LabError::NotInAlgLat)));
        assert!(dyadic_approximation(&v, 9, DYADIC_EPS).is_err());
    }

    #[test]
    fn indicator_pair_factors_through_v() {
        let pair = RankOnePair {
            phi: Factor::Form(ClosedForm::Indicator { a: 0.5, b: 1.0 }),
            psi: Factor::Form(ClosedForm::Indicator { a: 0.0, b: 0.5 }),
            split: 0.5,
        };
        assert!(rank_one_defect(&pair, 12).unwrap() <= 1e-8);
        let bad = RankOnePair { split: 0.25, ..pair };
        assert!(matches!(rank_one_defect(&bad, 12), Err(LabError::InvalidSupports(_))));
    }

    #[test]
    fn dyadic_pieces_factor_through_v() {
        let k = KernelFunction::callable(|x, s| if s < x { (x - s).powi(2) + x * s } else { 0.0 }).sample(64).unwrap();
        let d = dyadic_approximation(&k, 2, DYADIC_EPS).unwrap();
        assert!(d.rank() > 0);
        for p in &d.pieces {
            assert!(rank_one_defect(&RankOnePair::from(p), 8).unwrap() <= 1e-8);
        }
    }
}
