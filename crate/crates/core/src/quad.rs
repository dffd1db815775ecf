//! Quadrature grids on [0,1] and sampled functions living on them.
//!
//! Grids are composite Gauss-Legendre rules. Graded grids refine
//! geometrically (ratio 1/2) toward one or more anchor points so that
//! algebraic endpoint singularities are integrated to near machine
//! precision. Every node remembers its signed offset from the nearest
//! anchor, which keeps `x - s` exact even when `s + offset` rounds to `s`.

use std::sync::Arc;

use num_complex::Complex64;
use num_traits::{Float, FromPrimitive};

use crate::error::{LabError, Result};

/// Halvings used for partial integrals inside panels that touch an anchor.
const SUB_LAYERS: usize = 60;

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Clone, Debug)]
pub struct GaussRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

/// Gauss-Legendre rule of `n` points by Newton iteration on `P_n`.
pub fn gauss_legendre<T: Float + FromPrimitive>(n: usize) -> GaussRule<T> {
    let c = |v: f64| T::from_f64(v).expect("float conversion");
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut t = c((std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos());
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, t);
            dp = d;
            let dt = p / d;
            t = t - dt;
            if dt.abs() <= T::epsilon() * c(4.0) {
                let (_, d) = legendre_with_derivative(n, t);
                dp = d;
                break;
            }
        }
        let w = c(2.0) / ((T::one() - t * t) * dp * dp);
        // descending Newton roots; store ascending
        nodes[n - 1 - i] = t;
        nodes[i] = -t;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    GaussRule { nodes, weights }
}

/// `(P_n(t), P_n'(t))` by the three-term recurrence.
fn legendre_with_derivative<T: Float + FromPrimitive>(n: usize, t: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = t;
    if n == 0 {
        return (T::one(), T::zero());
    }
    for k in 2..=n {
        let kf = T::from_usize(k).unwrap();
        let p2 = ((kf + kf - T::one()) * t * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = T::from_usize(n).unwrap();
    let d = nf * (t * p1 - p0) / (t * t - T::one());
    (p1, d)
}

/// Legendre values `P_0..P_{n}` at `t`.
fn legendre_values(n: usize, t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n >= 1 {
        out.push(t);
    }
    for k in 2..=n {
        let kf = k as f64;
        let v = ((2.0 * kf - 1.0) * t * out[k - 1] - (kf - 1.0) * out[k - 2]) / kf;
        out.push(v);
    }
    out
}

/// Spectral integration matrix: `S[i][j] = ∫_{-1}^{t_i} ℓ_j(t) dt` for the
/// Lagrange basis `ℓ_j` on the rule's nodes.
fn spectral_integration(rule: &GaussRule<f64>) -> Vec<f64> {
    let q = rule.nodes.len();
    // ℓ_j = Σ_n a[n][j] P_n with a[n][j] = w_j P_n(t_j) (2n+1)/2
    let pv: Vec<Vec<f64>> = rule.nodes.iter().map(|&t| legendre_values(q, t)).collect();
    let mut s = vec![0.0; q * q];
    for i in 0..q {
        let ti = rule.nodes[i];
        let pi = &pv[i];
        // ∫_{-1}^{t} P_n
        let integ: Vec<f64> = (0..q)
            .map(|n| {
                if n == 0 {
                    ti + 1.0
                } else {
                    (pi[n + 1] - pi[n - 1]) / (2.0 * n as f64 + 1.0)
                }
            })
            .collect();
        for j in 0..q {
            let mut acc = 0.0;
            for (n, ig) in integ.iter().enumerate() {
                acc += rule.weights[j] * pv[j][n] * (2.0 * n as f64 + 1.0) / 2.0 * ig;
            }
            s[i * q + j] = acc;
        }
    }
    s
}

/// Grid construction recipe.
#[derive(Clone, Debug, PartialEq)]
pub enum GridScheme {
    /// One Gauss-Legendre panel on [0,1] with `order` nodes.
    GaussLegendre,
    /// Geometric refinement toward `endpoint` with `layers` halvings on each
    /// side; `order` is the Gauss order per panel.
    CompositeGraded { endpoint: f64, layers: usize },
}

/// A point together with its offset from an anchor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pt {
    pub x: f64,
    pub anchor: f64,
    pub off: f64,
}

impl Pt {
    pub fn plain(x: f64) -> Self {
        Pt { x, anchor: 0.0, off: x }
    }

    /// `x - s`, exact when `s` is this point's anchor.
    pub fn minus(&self, s: f64) -> f64 {
        if self.anchor == s {
            self.off
        } else {
            self.x - s
        }
    }
}

/// One Gauss panel `[a, b]`, stored as offsets from its anchor.
#[derive(Clone, Debug)]
pub struct Panel {
    pub anchor: f64,
    pub a_off: f64,
    pub b_off: f64,
    pub start: usize,
    /// Panel touches its anchor on a graded grid; partial integrals inside
    /// it are graded again toward the anchor.
    pub touches_anchor: bool,
}

impl Panel {
    pub fn a(&self) -> f64 {
        self.anchor + self.a_off
    }
    pub fn b(&self) -> f64 {
        self.anchor + self.b_off
    }
    fn point(&self, off: f64) -> Pt {
        Pt { x: self.anchor + off, anchor: self.anchor, off }
    }
}

/// Composite Gauss-Legendre grid on [0,1].
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    scheme: GridScheme,
    order: usize,
    rule: GaussRule<f64>,
    cumul: Vec<f64>,
    panels: Vec<Panel>,
    points: Vec<Pt>,
    weights: Vec<f64>,
}

/// Shared handle to a grid; grid functions compare handles by pointer.
pub type GridHandle = Arc<QuadratureGrid>;

/// Build a grid from a scheme.
///
/// For `GaussLegendre`, `order` is the node count. For `CompositeGraded`,
/// `order` is the Gauss order of each panel.
pub fn make_grid(order: usize, scheme: GridScheme) -> Result<GridHandle> {
    if order < 2 {
        return Err(LabError::InvalidArgument(format!("grid order must be >= 2, got {order}")));
    }
    match scheme {
        GridScheme::GaussLegendre => Ok(Arc::new(QuadratureGrid::build(
            scheme,
            order,
            vec![(0.0, 0.0, 1.0)],
            false,
        ))),
        GridScheme::CompositeGraded { endpoint, layers } => {
            if !(0.0..=1.0).contains(&endpoint) {
                return Err(LabError::InvalidArgument(format!(
                    "graded endpoint must lie in [0,1], got {endpoint}"
                )));
            }
            if layers == 0 {
                return Err(LabError::InvalidArgument("graded grid needs at least one layer".into()));
            }
            QuadratureGrid::graded(&[endpoint], layers, order).map(|g| {
                let mut g = g;
                g.scheme = scheme;
                Arc::new(g)
            })
        }
    }
}

impl QuadratureGrid {
    fn build(scheme: GridScheme, order: usize, panel_offsets: Vec<(f64, f64, f64)>, graded: bool) -> Self {
        let rule = gauss_legendre::<f64>(order);
        let cumul = spectral_integration(&rule);
        let mut panels = Vec::with_capacity(panel_offsets.len());
        let mut points = Vec::with_capacity(panel_offsets.len() * order);
        let mut weights = Vec::with_capacity(panel_offsets.len() * order);
        for (anchor, a_off, b_off) in panel_offsets {
            let touches_anchor = graded && (a_off == 0.0 || b_off == 0.0);
            let panel = Panel { anchor, a_off, b_off, start: points.len(), touches_anchor };
            let half = 0.5 * (b_off - a_off);
            for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                let off = a_off + half * (1.0 + t);
                points.push(panel.point(off));
                weights.push(half * w);
            }
            panels.push(panel);
        }
        QuadratureGrid { scheme, order, rule, cumul, panels, points, weights }
    }

    /// Grid refined geometrically toward every anchor in `anchors`, with
    /// `layers` halvings on each side of each anchor and `order` Gauss points
    /// per panel.
    pub fn graded(anchors: &[f64], layers: usize, order: usize) -> Result<Self> {
        if order < 1 {
            return Err(LabError::InvalidArgument("panel order must be >= 1".into()));
        }
        let mut anchors: Vec<f64> = anchors.to_vec();
        if anchors.iter().any(|a| !(0.0..=1.0).contains(a) || !a.is_finite()) {
            return Err(LabError::InvalidArgument("anchors must lie in [0,1]".into()));
        }
        anchors.sort_by(f64::total_cmp);
        anchors.dedup();
        let mut breaks = vec![0.0];
        breaks.extend(anchors.iter().copied().filter(|&a| a > 0.0 && a < 1.0));
        breaks.push(1.0);
        let is_anchor = |p: f64| anchors.contains(&p);
        let mut panels = Vec::new();
        for win in breaks.windows(2) {
            let (p, r) = (win[0], win[1]);
            match (is_anchor(p), is_anchor(r)) {
                (true, true) => {
                    let mid = 0.5 * (p + r);
                    push_right_of(&mut panels, p, mid - p, layers);
                    push_left_of(&mut panels, r, r - mid, layers);
                }
                (true, false) => push_right_of(&mut panels, p, r - p, layers),
                (false, true) => push_left_of(&mut panels, r, r - p, layers),
                (false, false) => panels.push((p, 0.0, r - p)),
            }
        }
        let scheme = GridScheme::CompositeGraded {
            endpoint: anchors.first().copied().unwrap_or(0.0),
            layers,
        };
        Ok(Self::build(scheme, order, panels, true))
    }

    /// Uniform Gauss panels between consecutive breakpoints; each panel is
    /// anchored at its left end.
    pub fn composite(breaks: &[f64], order: usize) -> Result<Self> {
        if order < 1 || breaks.len() < 2 {
            return Err(LabError::InvalidArgument("composite grid needs order >= 1 and two breakpoints".into()));
        }
        if breaks[0] != 0.0 || *breaks.last().unwrap() != 1.0 || breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LabError::InvalidArgument("breakpoints must increase from 0 to 1".into()));
        }
        let panels = breaks.windows(2).map(|w| (w[0], 0.0, w[1] - w[0])).collect();
        Ok(Self::build(GridScheme::GaussLegendre, order, panels, false))
    }

    /// `panels` equal panels of `order` points; `order = 1` is the midpoint rule.
    pub fn uniform(panels: usize, order: usize) -> Result<Self> {
        let breaks: Vec<f64> = (0..=panels).map(|k| k as f64 / panels as f64).collect();
        Self::composite(&breaks, order)
    }

    pub fn scheme(&self) -> &GridScheme {
        &self.scheme
    }

    /// Gauss order per panel.
    pub fn panel_order(&self) -> usize {
        self.order
    }

    /// Node count.
    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn panels(&self) -> &[Panel] {
        &self.panels
    }

    pub fn points(&self) -> &[Pt] {
        &self.points
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rule(&self) -> &GaussRule<f64> {
        &self.rule
    }

    /// Index of the panel holding node `i`.
    pub fn panel_of(&self, i: usize) -> usize {
        i / self.order
    }

    pub fn integrate<F: Fn(Pt) -> Complex64>(&self, f: F) -> Complex64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| f(*p) * *w)
            .sum()
    }

    pub fn integrate_real<F: Fn(Pt) -> f64>(&self, f: F) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| f(*p) * *w).sum()
    }

    /// Quadrature for the sub-interval from the start of node `i`'s panel
    /// up to node `i`.
    pub fn partial_rule(&self, i: usize) -> Vec<(Pt, f64)> {
        let panel = &self.panels[self.panel_of(i)];
        self.sub_rule(panel, panel.a_off, self.points[i].off)
    }

    /// Quadrature for the sub-interval from node `i` to the end of its panel.
    pub fn partial_rule_right(&self, i: usize) -> Vec<(Pt, f64)> {
        let panel = &self.panels[self.panel_of(i)];
        self.sub_rule(panel, self.points[i].off, panel.b_off)
    }

    /// Quadrature over a whole panel, graded again when it touches an anchor.
    pub fn panel_rule(&self, k: usize) -> Vec<(Pt, f64)> {
        let panel = &self.panels[k];
        self.sub_rule(panel, panel.a_off, panel.b_off)
    }

    fn sub_rule(&self, panel: &Panel, lo: f64, hi: f64) -> Vec<(Pt, f64)> {
        let mut out = Vec::new();
        let mut push = |lo: f64, hi: f64| {
            let half = 0.5 * (hi - lo);
            for (t, w) in self.rule.nodes.iter().zip(&self.rule.weights) {
                out.push((panel.point(lo + half * (1.0 + t)), half * w));
            }
        };
        if panel.touches_anchor && (lo == 0.0 || hi == 0.0) {
            // geometric halvings toward the anchor end
            let (far, sign) = if lo == 0.0 { (hi, 1.0) } else { (lo, -1.0) };
            let width = far.abs();
            let mut edges: Vec<f64> = (0..=SUB_LAYERS).map(|k| sign * width * 0.5f64.powi(k as i32)).collect();
            edges.push(0.0);
            for w in edges.windows(2) {
                let (a, b) = if w[0] < w[1] { (w[0], w[1]) } else { (w[1], w[0]) };
                push(a, b);
            }
        } else {
            push(lo, hi);
        }
        out
    }

    /// `∫_0^{x_i}` of the piecewise interpolant of `values`.
    pub fn cumulative_left(&self, values: &[Complex64]) -> Vec<Complex64> {
        let q = self.order;
        let mut out = vec![Complex64::new(0.0, 0.0); values.len()];
        let mut carry = Complex64::new(0.0, 0.0);
        for panel in &self.panels {
            let half = 0.5 * (panel.b_off - panel.a_off);
            let v = &values[panel.start..panel.start + q];
            for i in 0..q {
                let row = &self.cumul[i * q..(i + 1) * q];
                let s: Complex64 = row.iter().zip(v).map(|(c, f)| f * *c).sum();
                out[panel.start + i] = carry + s * half;
            }
            let total: Complex64 = v.iter().zip(&self.rule.weights).map(|(f, w)| f * *w).sum();
            carry += total * half;
        }
        out
    }

    /// `∫_{x_i}^1` of the piecewise interpolant of `values`.
    pub fn cumulative_right(&self, values: &[Complex64]) -> Vec<Complex64> {
        let q = self.order;
        let mut out = vec![Complex64::new(0.0, 0.0); values.len()];
        let mut carry = Complex64::new(0.0, 0.0);
        for panel in self.panels.iter().rev() {
            let half = 0.5 * (panel.b_off - panel.a_off);
            let v = &values[panel.start..panel.start + q];
            for i in 0..q {
                let row = &self.cumul[i * q..(i + 1) * q];
                let s: Complex64 = row
                    .iter()
                    .zip(v)
                    .zip(&self.rule.weights)
                    .map(|((c, f), w)| f * (*w - *c))
                    .sum();
                out[panel.start + i] = carry + s * half;
            }
            let total: Complex64 = v.iter().zip(&self.rule.weights).map(|(f, w)| f * *w).sum();
            carry += total * half;
        }
        out
    }
}

fn push_right_of(panels: &mut Vec<(f64, f64, f64)>, anchor: f64, width: f64, layers: usize) {
    let mut edges: Vec<f64> = (0..=layers).map(|k| width * 0.5f64.powi(k as i32)).collect();
    edges.push(0.0);
    edges.reverse();
    for w in edges.windows(2) {
        panels.push((anchor, w[0], w[1]));
    }
}

fn push_left_of(panels: &mut Vec<(f64, f64, f64)>, anchor: f64, width: f64, layers: usize) {
    let mut edges: Vec<f64> = (0..=layers).map(|k| -width * 0.5f64.powi(k as i32)).collect();
    edges.push(0.0);
    for w in edges.windows(2) {
        panels.push((anchor, w[0], w[1]));
    }
}

/// Complex samples of an L² function at the nodes of a grid.
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: GridHandle,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: GridHandle, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::InvalidArgument(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(LabError::InvalidArgument("grid function has non-finite values".into()));
        }
        Ok(GridFunction { grid, values })
    }

    pub(crate) fn new_unchecked(grid: GridHandle, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        GridFunction { grid, values }
    }

    pub fn from_fn<F: Fn(Pt) -> Complex64>(grid: GridHandle, f: F) -> Self {
        let values = grid.points().iter().map(|p| f(*p)).collect();
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &GridHandle {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid)
    }

    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.weights())
            .map(|(v, w)| v.norm_sqr() * w)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&self, c: Complex64) -> GridFunction {
        self.map(|v| v * c)
    }

    pub fn map<F: Fn(Complex64) -> Complex64>(&self, f: F) -> GridFunction {
        GridFunction::new_unchecked(self.grid.clone(), self.values.iter().map(|v| f(*v)).collect())
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: Complex64, other: &GridFunction) -> Result<GridFunction> {
        if !self.same_grid(other) {
            return Err(LabError::GridMismatch);
        }
        Ok(GridFunction::new_unchecked(
            self.grid.clone(),
            self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect(),
        ))
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.axpy(Complex64::new(-1.0, 0.0), other)
    }

    /// Pointwise product with a function of the node.
    pub fn mul_fn<F: Fn(Pt) -> Complex64>(&self, f: F) -> GridFunction {
        GridFunction::new_unchecked(
            self.grid.clone(),
            self.values.iter().zip(self.grid.points()).map(|(v, p)| v * f(*p)).collect(),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// `Σ w_i f(x_i) conj(g(x_i))`.
pub fn inner_product(f: &GridFunction, g: &GridFunction) -> Result<Complex64> {
    if !f.same_grid(g) {
        return Err(LabError::GridMismatch);
    }
    Ok(f.values
        .iter()
        .zip(&g.values)
        .zip(f.grid.weights())
        .map(|((a, b), w)| a * b.conj() * *w)
        .sum())
}
