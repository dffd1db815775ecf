//! Pseudospectra and finite sections.
//!
//! `Z` is not normal, and its finite sections say little about its spectrum:
//! in the monomial basis `P_N Z P_N` is lower bidiagonal with eigenvalues
//! exactly `1, 1/2, ..., 1/N`, nowhere near filling the lollipop. The
//! smallest singular value of `A_N - λ` over a grid of `λ` is what is scanned
//! instead.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::calkin::{Lollipop, OperatorWord};
use crate::error::{LabError, Result};
use crate::linalg::{eigenvalues, sigma_min, CMatrix};
use crate::operators::Basis;

/// Rectangular grid of spectral parameters, row-major: the imaginary index
/// is the outer loop, the real index the inner one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanGrid {
    pub re: (f64, f64),
    pub im: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

impl Default for ScanGrid {
    fn default() -> Self {
        ScanGrid { re: (-1.5, 2.5), im: (-1.5, 1.5), nx: 121, ny: 91 }
    }
}

/// Default compression size for scans.
pub const DEFAULT_SCAN_N: usize = 64;

impl ScanGrid {
    pub fn new(re: (f64, f64), im: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        let g = ScanGrid { re, im, nx, ny };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(LabError::InvalidArgument(format!(
                "scan grid needs nx, ny >= 2, got {} x {}",
                self.nx, self.ny
            )));
        }
        let finite = [self.re.0, self.re.1, self.im.0, self.im.1].iter().all(|v| v.is_finite());
        if !finite || self.re.0 >= self.re.1 || self.im.0 >= self.im.1 {
            return Err(LabError::InvalidArgument("scan ranges must be finite and increasing".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, idx: usize) -> Complex64 {
        let (i, j) = (idx % self.nx, idx / self.nx);
        let re = self.re.0 + (self.re.1 - self.re.0) * i as f64 / (self.nx - 1) as f64;
        let im = self.im.0 + (self.im.1 - self.im.0) * j as f64 / (self.ny - 1) as f64;
        Complex64::new(re, im)
    }

    pub fn points(&self) -> Vec<Complex64> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanResult {
    pub grid: ScanGrid,
    pub n: usize,
    pub basis: Basis,
    /// `σ_min(A_N - λ)` in grid order.
    pub sigma_min: Vec<f64>,
}

impl ScanResult {
    pub fn rows(&self) -> impl Iterator<Item = (Complex64, f64)> + '_ {
        self.sigma_min.iter().enumerate().map(|(k, s)| (self.grid.point(k), *s))
    }
}

/// `σ_min(A - λ)`.
pub fn sigma_min_shifted(a: &CMatrix, lambda: Complex64) -> f64 {
    let mut m = a.clone();
    for i in 0..m.nrows() {
        m[(i, i)] -= lambda;
    }
    sigma_min(&m)
}

/// `σ_min(A_N - λ)` over the grid, `A_N` the orthonormal Legendre
/// compression of `word`. Points are processed in parallel; the output keeps
/// grid order.
pub fn pseudospectrum(word: &OperatorWord, grid: &ScanGrid, n: usize) -> Result<ScanResult> {
    grid.validate()?;
    let a = word.compress(n)?;
    let sigma_min = (0..grid.len()).into_par_iter().map(|k| sigma_min_shifted(&a, grid.point(k))).collect();
    Ok(ScanResult { grid: *grid, n, basis: Basis::LegendreOrthonormal, sigma_min })
}

/// Eigenvalues of the compression, sorted by descending real part.
pub fn truncation_eigenvalues(word: &OperatorWord, basis: Basis, n: usize) -> Result<Vec<Complex64>> {
    Ok(eigenvalues(&word.compress_in(basis, n)?))
}

/// Distance bands `[0,0.05)`, `[0.05,0.2)`, `[0.2,0.5)`, `[0.5,∞)`.
pub const BAND_EDGES: [f64; 5] = [0.0, 0.05, 0.2, 0.5, f64::INFINITY];

#[derive(Clone, Debug, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub median: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceProfile {
    /// `(λ, dist(λ, Λ), σ_min)` in grid order.
    pub points: Vec<(Complex64, f64, f64)>,
    pub bands: Vec<Band>,
}

impl DistanceProfile {
    /// Band medians strictly increase (every band must be populated).
    pub fn strictly_increasing(&self) -> bool {
        let meds: Option<Vec<f64>> = self.bands.iter().map(|b| b.median).collect();
        meds.is_some_and(|m| m.windows(2).all(|w| w[0] < w[1]))
    }
}

pub fn band_of(distance: f64) -> usize {
    BAND_EDGES.windows(2).position(|w| distance >= w[0] && distance < w[1]).unwrap_or(BAND_EDGES.len() - 2)
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Pair each scanned point with its distance to the lollipop and summarise
/// `σ_min` by median within distance bands.
pub fn lollipop_distance_profile(result: &ScanResult) -> DistanceProfile {
    let points: Vec<(Complex64, f64, f64)> = result.rows().map(|(z, s)| (z, Lollipop.distance(z), s)).collect();
    let mut buckets = vec![Vec::new(); BAND_EDGES.len() - 1];
    for (_, d, s) in &points {
        buckets[band_of(*d)].push(*s);
    }
    let bands = buckets
        .iter_mut()
        .enumerate()
        .map(|(k, b)| Band { lo: BAND_EDGES[k], hi: BAND_EDGES[k + 1], count: b.len(), median: median(b) })
        .collect();
    DistanceProfile { points, bands }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calkin::parse_word;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn grid_layout() {
        let g = ScanGrid::default();
        assert_eq!(g.len(), 121 * 91);
        assert_eq!(g.point(0), c(-1.5, -1.5));
        assert_eq!(g.point(120), c(2.5, -1.5));
        assert_eq!(g.point(121), c(-1.5, -1.5 + 3.0 / 90.0));
        assert!(ScanGrid::new((0.0, 1.0), (0.0, 1.0), 1, 5).is_err());
        assert!(ScanGrid::new((1.0, 0.0), (0.0, 1.0), 3, 5).is_err());
    }

    #[test]
    fn monomial_sections_of_h_and_z_are_triangular() {
        for w in ["H", "H - Mx"] {
            let ev = truncation_eigenvalues(&parse_word(w).unwrap(), Basis::Monomial, 5).unwrap();
            for (k, z) in ev.iter().enumerate() {
                assert!((z - 1.0 / (k as f64 + 1.0)).norm() < 1e-14, "{w}: {ev:?}");
            }
        }
    }

    #[test]
    fn two_by_two_legendre_section() {
        let a = parse_word("H - Mx").unwrap().compress(2).unwrap();
        let ev = truncation_eigenvalues(&parse_word("H - Mx").unwrap(), Basis::LegendreOrthonormal, 2).unwrap();
        let (tr, det) = (a.trace(), a.determinant());
        for z in &ev {
            assert!((z * z - tr * z + det).norm() < 1e-14);
        }
        assert!((ev[0] + ev[1] - tr).norm() < 1e-14);
        assert!((ev[0].re - 0.8791528696058959).abs() < 1e-12 && ev[0].im.abs() < 1e-12);
        assert!((ev[1].re + 0.3791528696058959).abs() < 1e-12 && ev[1].im.abs() < 1e-12);
    }

    #[test]
    fn band_assignment() {
        assert_eq!(band_of(0.0), 0);
        assert_eq!(band_of(0.05), 1);
        assert_eq!(band_of(0.3), 2);
        assert_eq!(band_of(2.0), 3);
    }

    #[test]
    fn small_scan_is_conjugation_symmetric() {
        let g = ScanGrid::new((-1.0, 2.0), (-1.0, 1.0), 7, 5).unwrap();
        let r = pseudospectrum(&parse_word("H - Mx").unwrap(), &g, 16).unwrap();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let a = r.sigma_min[j * g.nx + i];
                let b = r.sigma_min[(g.ny - 1 - j) * g.nx + i];
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
