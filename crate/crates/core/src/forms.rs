//! Closed-form members of L²[0,1] used as eigenfunctions, witnesses and
//! test vectors.

use num_complex::Complex64;

use crate::eigen::ChainPolynomial;
use crate::error::{LabError, Result};
use crate::quad::{GridFunction, GridHandle, Pt, QuadratureGrid};
use std::sync::Arc;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Tagged closed-form function on [0,1].
///
/// Complex powers use the principal logarithm. On the bulb `x > 0` and
/// `Re(x + λ) > 0`, so the branch is unambiguous; stick forms are real.
#[derive(Clone, Debug, PartialEq)]
pub enum ClosedForm {
    /// `x^{1/λ-1} (x+λ)^{-1-1/λ}` on `[support_start, 1]`.
    PowerEigen { lambda: Complex64, support_start: f64 },
    /// `x^{-2} e^{-1/x}`.
    ZeroEigen,
    /// `p(1/x) e^{-1/x}`.
    ExpChain { poly: ChainPolynomial },
    /// Closed-form order-1 generalized eigenvector at `λ = -s`, supported on `[s, 1]`.
    Order1Stick { s: f64 },
    /// `x^s`.
    Monomial { s: Complex64 },
    /// `sqrt(n/2)` on `|x - s| <= 1/n`.
    Spike { s: f64, n: u32 },
    /// Pull-back of the normalized Szegő kernel at `-conj(α)`.
    Upsilon { alpha: Complex64 },
    /// Indicator of `[a, b]`.
    Indicator { a: f64, b: f64 },
}

impl ClosedForm {
    pub fn power_eigen(lambda: Complex64) -> Self {
        ClosedForm::PowerEigen { lambda, support_start: 0.0 }
    }

    /// Check that the parameters define a function (L² membership is
    /// reported separately by [`ClosedForm::in_l2`]).
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LabError::InvalidForm(m));
        match self {
            ClosedForm::PowerEigen { lambda, support_start } => {
                if !lambda.re.is_finite() || !lambda.im.is_finite() {
                    return bad("non-finite eigenvalue".into());
                }
                if !(0.0..1.0).contains(support_start) {
                    return bad(format!("support start {support_start} outside [0,1)"));
                }
                if *support_start > 0.0 {
                    if lambda.im != 0.0 || lambda.re != -support_start {
                        return bad(format!(
                            "truncated power eigenfunction needs λ = -{support_start}, got {lambda}"
                        ));
                    }
                } else if lambda.re <= 0.0 {
                    return bad(format!("power eigenfunction on [0,1] needs Re λ > 0, got {lambda}"));
                }
                Ok(())
            }
            ClosedForm::ZeroEigen | ClosedForm::ExpChain { .. } => Ok(()),
            ClosedForm::Order1Stick { s } => {
                if !(*s > 0.0 && *s < 1.0) {
                    return bad(format!("stick parameter s = {s} outside (0,1)"));
                }
                Ok(())
            }
            ClosedForm::Monomial { s } => {
                if s.re <= -0.5 {
                    return bad(format!("x^{s} is not in L2"));
                }
                Ok(())
            }
            ClosedForm::Spike { s, n } => {
                let h = 1.0 / *n as f64;
                if *n == 0 || !(h < s.min(1.0 - s)) {
                    return bad(format!("spike needs 1/n < min(s, 1-s); s = {s}, n = {n}"));
                }
                Ok(())
            }
            ClosedForm::Upsilon { alpha } => {
                if alpha.norm() >= 1.0 {
                    return bad(format!("Upsilon needs |α| < 1, got {alpha}"));
                }
                Ok(())
            }
            ClosedForm::Indicator { a, b } => {
                if !(0.0 <= *a && a < b && *b <= 1.0) {
                    return bad(format!("indicator needs 0 <= a < b <= 1, got [{a}, {b}]"));
                }
                Ok(())
            }
        }
    }

    /// Point where the function is singular or starts its support, if any.
    pub fn singular_point(&self) -> Option<f64> {
        match self {
            ClosedForm::PowerEigen { support_start, .. } => Some(*support_start),
            ClosedForm::Order1Stick { s } => Some(*s),
            ClosedForm::ZeroEigen
            | ClosedForm::ExpChain { .. }
            | ClosedForm::Monomial { .. }
            | ClosedForm::Upsilon { .. } => Some(0.0),
            ClosedForm::Spike { .. } | ClosedForm::Indicator { .. } => None,
        }
    }

    /// Real part of the exponent `a` with `|f(x)| ~ dist^a` at the singular
    /// point; `None` when the function is bounded there by a smooth factor.
    pub fn singular_exponent(&self) -> Option<f64> {
        match self {
            ClosedForm::PowerEigen { lambda, support_start } => {
                if *support_start > 0.0 {
                    Some(1.0 / support_start - 1.0)
                } else {
                    Some((lambda.inv() - 1.0).re)
                }
            }
            ClosedForm::Order1Stick { s } => Some(1.0 / s - 2.0),
            ClosedForm::Monomial { s } => Some(s.re),
            ClosedForm::Upsilon { alpha } => Some(-(alpha / (1.0 + alpha)).re),
            _ => None,
        }
    }

    /// Whether the parameters give an element of L²[0,1].
    pub fn in_l2(&self) -> bool {
        self.validate().is_ok() && self.singular_exponent().is_none_or(|a| a > -0.5)
    }

    /// Geometric layers needed so that the mass left inside the innermost
    /// panel is negligible (`dist^{2a+1} <= 1e-18`).
    pub fn recommended_layers(&self) -> usize {
        match self.singular_exponent() {
            Some(a) if a > -0.5 => {
                let need = (18.0 / ((2.0 * a + 1.0) * std::f64::consts::LOG10_2)).ceil();
                (need as usize).clamp(48, 1000)
            }
            Some(_) => 1000,
            None => 48,
        }
    }

    /// Value at a point; `Pt` carries the exact offset used for `x - s`.
    pub fn value_at(&self, p: Pt) -> Complex64 {
        let x = p.x;
        match self {
            ClosedForm::PowerEigen { lambda, support_start } => {
                if *support_start > 0.0 {
                    let s = *support_start;
                    let d = p.minus(s);
                    if d <= 0.0 {
                        return ZERO;
                    }
                    // x^{-1/s-1} (x-s)^{1/s-1}
                    let v = ((1.0 / s - 1.0) * d.ln() - (1.0 / s + 1.0) * x.ln()).exp();
                    Complex64::new(v, 0.0)
                } else {
                    if x <= 0.0 {
                        return ZERO;
                    }
                    let inv = lambda.inv();
                    let lx = Complex64::new(x.ln(), 0.0);
                    let lxl = (Complex64::new(x, 0.0) + lambda).ln();
                    ((inv - 1.0) * lx - (inv + 1.0) * lxl).exp()
                }
            }
            ClosedForm::ZeroEigen => {
                if x <= 0.0 {
                    return ZERO;
                }
                Complex64::new((-1.0 / x - 2.0 * x.ln()).exp(), 0.0)
            }
            ClosedForm::ExpChain { poly } => {
                if x <= 0.0 {
                    return ZERO;
                }
                Complex64::new(poly.eval_times_exp(1.0 / x), 0.0)
            }
            ClosedForm::Order1Stick { s } => {
                let s = *s;
                let d = p.minus(s);
                if d <= 0.0 {
                    return ZERO;
                }
                let (ld, lx) = (d.ln(), x.ln());
                // Φ = ((x-s)/x)^{1/s}
                let log_phi = (ld - lx) / s;
                let t1 = (log_phi - lx - ld).exp() * (ld - lx) / (s * s);
                let t2 = (log_phi - lx - 2.0 * ld).exp() * (1.0 - s) / s;
                Complex64::new(t1 + t2, 0.0)
            }
            ClosedForm::Monomial { s } => {
                if x <= 0.0 {
                    return ZERO;
                }
                (s * x.ln()).exp()
            }
            ClosedForm::Spike { s, n } => {
                let h = 1.0 / *n as f64;
                if p.minus(*s).abs() <= h {
                    Complex64::new((*n as f64 / 2.0).sqrt(), 0.0)
                } else {
                    ZERO
                }
            }
            ClosedForm::Upsilon { alpha } => {
                if x <= 0.0 {
                    return ZERO;
                }
                let c = (1.0 - alpha.norm_sqr()).sqrt() / (1.0 + alpha);
                let e = -(alpha / (1.0 + alpha));
                c * (e * x.ln()).exp()
            }
            ClosedForm::Indicator { a, b } => {
                if x >= *a && x <= *b {
                    Complex64::new(1.0, 0.0)
                } else {
                    ZERO
                }
            }
        }
    }

    /// Jump discontinuities inside (0,1).
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            ClosedForm::Spike { s, n } => {
                let h = 1.0 / *n as f64;
                vec![s - h, s + h]
            }
            ClosedForm::Indicator { a, b } => [*a, *b].into_iter().filter(|t| *t > 0.0 && *t < 1.0).collect(),
            _ => Vec::new(),
        }
    }

    /// Default grid for this form: graded toward its singular point, with
    /// panel edges on its jumps so step functions integrate exactly.
    pub fn default_grid(&self, order: usize) -> Result<GridHandle> {
        let mut anchors = self.breakpoints();
        anchors.push(self.singular_point().unwrap_or(0.0));
        let layers = if self.breakpoints().is_empty() { self.recommended_layers() } else { 1 };
        Ok(Arc::new(QuadratureGrid::graded(&anchors, layers, order)?))
    }
}

/// Sample a closed form at the nodes of a grid.
pub fn evaluate(form: &ClosedForm, grid: &GridHandle) -> Result<GridFunction> {
    form.validate()?;
    let f = GridFunction::from_fn(grid.clone(), |p| form.value_at(p));
    if !f.is_finite() {
        return Err(LabError::InvalidForm(format!("{form:?} produced non-finite samples")));
    }
    Ok(f)
}

/// Verdict on a norm trajectory under refinement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trend {
    Converged,
    Diverging,
    Undecided,
}

/// Relative change below which successive norms count as settled.
pub const CAUCHY_TOL: f64 = 1e-8;
/// Growth over the last three refinements that signals blow-up.
pub const DIVERGENCE_FACTOR: f64 = 1.5;

/// L² norms under graded grids with an increasing number of geometric
/// layers toward the form's singular point. Gauss order 16 per panel.
pub fn norm_trajectory(form: &ClosedForm, layers: &[usize]) -> Result<Vec<(usize, f64)>> {
    form.validate()?;
    if layers.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::InvalidArgument("refinement levels must increase".into()));
    }
    let anchor = form.singular_point().unwrap_or(0.0);
    layers
        .iter()
        .map(|&l| {
            let grid = QuadratureGrid::graded(&[anchor], l.max(1), 16)?;
            let n2 = grid.integrate_real(|p| form.value_at(p).norm_sqr());
            Ok((l, n2.sqrt()))
        })
        .collect()
}

/// Classify a trajectory: divergence when norms grew by at least 1.5 over
/// the last three refinements (or overflowed), convergence when the last two
/// agree to 1e-8.
pub fn classify_trajectory(traj: &[(usize, f64)]) -> Trend {
    let n = traj.len();
    if traj.last().is_some_and(|t| !t.1.is_finite()) {
        return Trend::Diverging;
    }
    if n >= 4 {
        let (last, back) = (traj[n - 1].1, traj[n - 4].1);
        if last >= DIVERGENCE_FACTOR * back && traj[n - 4..].windows(2).all(|w| w[1].1 > w[0].1) {
            return Trend::Diverging;
        }
    }
    if n >= 2 {
        let (a, b) = (traj[n - 2].1, traj[n - 1].1);
        if (a - b).abs() <= CAUCHY_TOL * b.abs() {
            return Trend::Converged;
        }
    }
    Trend::Undecided
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{inner_product, make_grid, GridScheme};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn bulb_eigenfunction_at_one_half() {
        let f = ClosedForm::power_eigen(c(1.0, 0.0));
        let v = f.value_at(Pt::plain(0.5));
        // oracle: direct pow evaluation of x^0 (x+1)^{-2}
        let oracle = 0.5f64.powf(0.0) * 1.5f64.powf(-2.0);
        assert!((v.re - oracle).abs() < 1e-15 && v.im == 0.0);
        assert!((v.re - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn zero_eigen_at_one() {
        let v = ClosedForm::ZeroEigen.value_at(Pt::plain(1.0));
        assert!((v.re - (-1.0f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn upsilon_at_zero_alpha_is_one() {
        let f = ClosedForm::Upsilon { alpha: c(0.0, 0.0) };
        for x in [1e-9, 0.3, 1.0] {
            assert!((f.value_at(Pt::plain(x)) - c(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn stick_form_vanishes_left_of_support() {
        let f = ClosedForm::PowerEigen { lambda: c(-0.25, 0.0), support_start: 0.25 };
        assert_eq!(f.value_at(Pt::plain(0.2)), ZERO);
        let v = f.value_at(Pt::plain(0.5)).re;
        let oracle = 0.5f64.powf(1.0 / -0.25 - 1.0) * (0.5f64 - 0.25).powf(-1.0 - 1.0 / -0.25);
        assert!((v - oracle).abs() < 1e-12 * oracle);
    }

    #[test]
    fn complex_power_uses_principal_branch() {
        let lam = c(1.0, 0.5);
        let f = ClosedForm::power_eigen(lam);
        let x = 0.3;
        let inv = lam.inv();
        let oracle = Complex64::new(x, 0.0).powc(inv - 1.0) * (Complex64::new(x, 0.0) + lam).powc(-1.0 - inv);
        assert!((f.value_at(Pt::plain(x)) - oracle).norm() < 1e-14);
    }

    #[test]
    fn parameter_constraints_are_enforced() {
        let bad = [
            ClosedForm::PowerEigen { lambda: c(-0.3, 0.0), support_start: 0.25 },
            ClosedForm::Spike { s: 0.3, n: 3 },
            ClosedForm::Upsilon { alpha: c(1.0, 0.0) },
            ClosedForm::Monomial { s: c(-0.5, 0.0) },
            ClosedForm::Indicator { a: 0.5, b: 0.5 },
            ClosedForm::Order1Stick { s: 1.2 },
        ];
        for f in bad {
            assert!(matches!(f.validate(), Err(LabError::InvalidForm(_))), "{f:?}");
        }
        let g = make_grid(4, GridScheme::GaussLegendre).unwrap();
        assert!(evaluate(&ClosedForm::Spike { s: 0.5, n: 1 }, &g).is_err());
    }

    #[test]
    fn l2_membership_follows_the_exponent_test() {
        assert!(ClosedForm::power_eigen(c(1.9, 0.0)).in_l2());
        assert!(!ClosedForm::power_eigen(c(2.5, 0.0)).in_l2());
        assert!(ClosedForm::Order1Stick { s: 0.6 }.in_l2());
        assert!(!ClosedForm::Order1Stick { s: 0.7 }.in_l2());
    }

    #[test]
    fn spike_has_unit_norm_on_a_resolving_grid() {
        let (s, n) = (0.3, 16u32);
        let h = 1.0 / n as f64;
        let grid = Arc::new(QuadratureGrid::composite(&[0.0, s - h, s + h, 1.0], 4).unwrap());
        let f = evaluate(&ClosedForm::Spike { s, n }, &grid).unwrap();
        assert!((f.l2_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn upsilon_is_a_unit_vector() {
        for alpha in [c(0.0, 0.0), c(0.3, 0.0), c(0.6, 0.0), c(0.0, 0.5), c(-0.5, 0.4), c(0.9, 0.0)] {
            let form = ClosedForm::Upsilon { alpha };
            let grid = form.default_grid(16).unwrap();
            let f = evaluate(&form, &grid).unwrap();
            let tol = if alpha.norm() > 0.85 { 2e-10 } else { 1e-10 };
            assert!((f.l2_norm() - 1.0).abs() < tol, "α={alpha}: {}", f.l2_norm());
        }
    }

    #[test]
    fn upsilon_moment_formula() {
        // ⟨x^ρ Υ_α, Υ_α⟩ = (1-|α|²)/(|1+α|² ρ + 1 - |α|²)
        let alpha = c(0.3, 0.0);
        let form = ClosedForm::Upsilon { alpha };
        let grid = form.default_grid(16).unwrap();
        let f = evaluate(&form, &grid).unwrap();
        let xf = f.mul_fn(|p| c(p.x, 0.0));
        let ip = inner_product(&xf, &f).unwrap();
        let a2 = alpha.norm_sqr();
        let expect = (1.0 - a2) / ((1.0 + alpha).norm_sqr() + 1.0 - a2);
        assert!((ip.re - expect).abs() < 1e-10 && ip.im.abs() < 1e-12);
    }

    #[test]
    fn zero_eigen_norm_trajectory_converges() {
        // oracle: u = 1/x turns ∫ x^{-4} e^{-2/x} dx into ∫_1^∞ u² e^{-2u} du = 5 e^{-2} / 4
        let traj = norm_trajectory(&ClosedForm::ZeroEigen, &[20, 30, 40, 50]).unwrap();
        assert_eq!(classify_trajectory(&traj), Trend::Converged);
        let exact = (5.0 * (-2.0f64).exp() / 4.0).sqrt();
        assert!((traj.last().unwrap().1 - exact).abs() < 1e-12);
    }

    #[test]
    fn stick_order_one_trajectory_converges_below_two_thirds() {
        let traj = norm_trajectory(&ClosedForm::Order1Stick { s: 0.5 }, &[40, 80, 120, 160]).unwrap();
        assert_eq!(classify_trajectory(&traj), Trend::Converged);
    }

    #[test]
    fn stick_order_one_trajectory_diverges_past_two_thirds() {
        let traj = norm_trajectory(&ClosedForm::Order1Stick { s: 0.7 }, &[40, 80, 120, 160, 200]).unwrap();
        assert_eq!(classify_trajectory(&traj), Trend::Diverging);
    }

    #[test]
    fn bulb_trajectories_separate_inside_and_outside() {
        let levels: Vec<usize> = (1..=8).map(|k| 100 * k).collect();
        let inside = norm_trajectory(&ClosedForm::power_eigen(c(1.9, 0.0)), &levels).unwrap();
        assert_eq!(classify_trajectory(&inside), Trend::Converged);
        let outside = norm_trajectory(&ClosedForm::power_eigen(c(2.5, 0.0)), &levels).unwrap();
        assert_eq!(classify_trajectory(&outside), Trend::Diverging);
        assert!(outside.windows(2).all(|w| w[1].1 > w[0].1));
    }
}
