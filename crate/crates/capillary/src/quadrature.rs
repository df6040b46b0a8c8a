//! Deterministic tensor Gauss-Legendre quadrature on patches, integral
//! evaluation in the space-form metric, and Richardson convergence-order
//! estimation.
//!
//! `rule_order` is the polynomial exactness degree of the 1-D rule; each
//! refinement level doubles the panel count per axis. Sums use pairwise
//! summation in a fixed node order, so results are bit-identical across runs
//! and thread counts.

use crate::geometry::{boundary_frame_at, shape_at, BoundaryFrame, GeometryError, ParametricPatch, ShapeSample};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum QuadratureError {
    #[error("rule order {0} outside supported range 4..=64")]
    BadOrder(usize),
    #[error("geometry evaluation failed: {0}")]
    Geometry(#[from] GeometryError),
    #[error("non-finite integrand at interior node (t, p) = ({0}, {1})")]
    NonFinite(f64, f64),
}

/// One interior quadrature node with its cached shape sample.
pub struct InteriorNode {
    pub t: f64,
    pub p: f64,
    /// Gauss weight times `sqrt(det g)`.
    pub weight: f64,
    pub sample: ShapeSample,
}

/// One boundary quadrature node with its cached frame.
pub struct BoundaryNode {
    pub p: f64,
    /// Gauss weight times the gbar length element of the boundary circle.
    pub weight: f64,
    pub edge: usize,
    pub frame: BoundaryFrame,
}

pub struct QuadratureGrid {
    pub interior: Vec<InteriorNode>,
    pub boundary: Vec<BoundaryNode>,
    pub rule_order: usize,
    pub level: usize,
}

/// Nodes and weights of the p-point Gauss-Legendre rule on [-1, 1], computed
/// by Newton iteration on the Legendre polynomial.
pub fn gauss_legendre(points: usize) -> (Vec<f64>, Vec<f64>) {
    let n = points;
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and P_n' by recurrence.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        xs[i] = -x;
        xs[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

/// Composite rule: `panels` copies of the base rule on `[a, b]`.
fn composite(points: usize, panels: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (xs, ws) = gauss_legendre(points);
    let mut out = Vec::with_capacity(points * panels);
    let dx = (b - a) / panels as f64;
    for panel in 0..panels {
        let lo = a + panel as f64 * dx;
        for (x, w) in xs.iter().zip(&ws) {
            out.push((lo + dx * 0.5 * (x + 1.0), w * dx * 0.5));
        }
    }
    out
}

/// Build interior and boundary nodes on the patch.
pub fn build_grid(
    patch: &ParametricPatch,
    rule_order: usize,
    level: usize,
) -> Result<QuadratureGrid, QuadratureError> {
    if !(4..=64).contains(&rule_order) {
        return Err(QuadratureError::BadOrder(rule_order));
    }
    let points = (rule_order + 2) / 2; // exactness 2*points - 1 >= rule_order
    let panels = 1usize << level;
    let (t0, t1) = patch.t_range;
    let two_pi = 2.0 * std::f64::consts::PI;

    let t_nodes = composite(points, panels, t0, t1);
    let p_nodes = composite(points, panels, 0.0, two_pi);

    let mut interior = Vec::with_capacity(t_nodes.len() * p_nodes.len());
    for &(t, wt) in &t_nodes {
        for &(p, wp) in &p_nodes {
            let sample = shape_at(patch, t, p)?;
            interior.push(InteriorNode {
                t,
                p,
                weight: wt * wp * sample.area_density,
                sample,
            });
        }
    }

    let mut boundary = Vec::new();
    for (ei, _) in patch.edges.iter().enumerate() {
        for &(p, wp) in &p_nodes {
            let frame = boundary_frame_at(patch, ei, p)?;
            let len = frame.sample.g[(1, 1)].sqrt();
            boundary.push(BoundaryNode {
                p,
                weight: wp * len,
                edge: ei,
                frame,
            });
        }
    }

    Ok(QuadratureGrid {
        interior,
        boundary,
        rule_order,
        level,
    })
}

/// Pairwise summation in the given (fixed) order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Integral of a pointwise function over the interior, `dA` in gbar.
pub fn integrate_interior(
    grid: &QuadratureGrid,
    mut f: impl FnMut(&InteriorNode) -> f64,
) -> Result<f64, QuadratureError> {
    let terms: Vec<f64> = grid
        .interior
        .iter()
        .map(|node| f(node) * node.weight)
        .collect();
    if let Some(bad) = terms.iter().position(|v| !v.is_finite()) {
        let node = &grid.interior[bad];
        return Err(QuadratureError::NonFinite(node.t, node.p));
    }
    Ok(pairwise_sum(&terms))
}

/// Integral of a pointwise function over the boundary, `ds` in gbar.
pub fn integrate_boundary(
    grid: &QuadratureGrid,
    mut f: impl FnMut(&BoundaryNode) -> f64,
) -> Result<f64, QuadratureError> {
    let terms: Vec<f64> = grid
        .boundary
        .iter()
        .map(|node| f(node) * node.weight)
        .collect();
    if let Some(bad) = terms.iter().position(|v| !v.is_finite()) {
        let node = &grid.boundary[bad];
        return Err(QuadratureError::NonFinite(f64::NAN, node.p));
    }
    Ok(pairwise_sum(&terms))
}

/// Richardson estimate of the convergence order from per-level values.
/// With a known true value, fits the error-slope directly; otherwise uses
/// successive differences. Returns `+inf` when the errors vanish.
pub fn convergence_order(values: &[f64], true_value: Option<f64>) -> Option<f64> {
    if values.len() < 3 {
        return None;
    }
    let scale = values
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    let errors: Vec<f64> = match true_value {
        Some(t) => values.iter().map(|v| (v - t).abs()).collect(),
        None => values.windows(2).map(|w| (w[1] - w[0]).abs()).collect(),
    };
    if errors.iter().all(|e| *e < 1e-14 * scale) {
        return Some(f64::INFINITY);
    }
    let mut orders = Vec::new();
    for w in errors.windows(2) {
        if w[0] > 1e-15 * scale && w[1] > 1e-16 * scale {
            orders.push((w[0] / w[1]).log2());
        } else if w[0] > 1e-15 * scale {
            return Some(f64::INFINITY);
        }
    }
    if orders.is_empty() {
        Some(f64::INFINITY)
    } else {
        Some(orders[orders.len() - 1])
    }
}
