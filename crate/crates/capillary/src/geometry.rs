//! Pointwise extrinsic geometry of an immersed surface patch (n = 2) in a
//! space-form ball: fundamental forms, curvatures, Newton tensors, and the
//! boundary frame (nu, mu, Nbar, nubar) with contact angle.
//!
//! Everything here is evaluated from analytic chart derivatives plus the
//! closed-form Christoffel symbols of the conformal ambient metric; there is
//! no mesh-based differentiation in this module.

use crate::spaceform::{SpaceForm, SpaceFormError};
use nalgebra::{DVector, Matrix2};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum GeometryError {
    #[error("degenerate induced metric at (t, p) = ({0}, {1})")]
    DegenerateMetric(f64, f64),
    #[error("boundary node off the ball boundary: {0}")]
    OffBoundary(#[from] SpaceFormError),
    #[error("patch has no boundary edge {0}")]
    NoSuchEdge(usize),
}

/// Analytic chart of a surface of revolution-type patch over a rectangle
/// `[t0, t1] x [0, 2pi)` (the azimuthal coordinate `p` is periodic).
pub trait Chart: Sync + Send {
    fn eval(&self, t: f64, p: f64) -> DVector<f64>;
    /// First partials `(x_t, x_p)`.
    fn d1(&self, t: f64, p: f64) -> (DVector<f64>, DVector<f64>);
    /// Second partials `(x_tt, x_tp, x_pp)`.
    fn d2(&self, t: f64, p: f64) -> (DVector<f64>, DVector<f64>, DVector<f64>);
}

/// A boundary circle of the patch at `t = t_value`; `outward` is the sign of
/// the `t`-direction that leaves the patch.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryEdge {
    pub t_value: f64,
    pub outward: f64,
}

/// An immersed surface-with-boundary in the ball, given by an analytic chart.
pub struct ParametricPatch {
    pub sf: SpaceForm,
    pub chart: Box<dyn Chart>,
    pub t_range: (f64, f64),
    /// Boundary circles on the ball boundary (empty for closed surfaces).
    pub edges: Vec<BoundaryEdge>,
    /// Whether the surface sits outside the ball (exterior problem).
    pub exterior: bool,
    /// Claimed constant mean curvature, if any.
    pub cmc: Option<f64>,
    /// Claimed constant contact angle, if any.
    pub contact_angle: Option<f64>,
    /// Sign applied to the cross-product normal so that claimed-CMC patches
    /// report `H >= 0`.
    pub orientation: f64,
    pub name: String,
}

/// Pointwise curvature data of the immersion at one parameter point.
#[derive(Clone, Debug)]
pub struct ShapeSample {
    pub position: DVector<f64>,
    pub x_t: DVector<f64>,
    pub x_p: DVector<f64>,
    /// gbar-unit normal (Cartesian components).
    pub nu: DVector<f64>,
    /// Induced metric in the (t, p) frame.
    pub g: Matrix2<f64>,
    /// Second fundamental form `h(X, Y) = gbar(nabla_X nu, Y)` in (t, p).
    pub h: Matrix2<f64>,
    /// Shape operator `g^{-1} h`.
    pub shape: Matrix2<f64>,
    pub mean_curvature: f64,
    pub h_norm_sq: f64,
    pub principal: [f64; 2],
    /// Elementary symmetric functions: `sigma[0] = H`, `sigma[1] = kappa1 kappa2`.
    pub sigma: [f64; 2],
    /// `sqrt(det g)` area density in (t, p).
    pub area_density: f64,
}

impl ShapeSample {
    /// `h(v, w)` for tangent vectors given in (t, p) components.
    pub fn second_form(&self, v: &[f64; 2], w: &[f64; 2]) -> f64 {
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                s += self.h[(i, j)] * v[i] * w[j];
            }
        }
        s
    }

    pub fn metric(&self, v: &[f64; 2], w: &[f64; 2]) -> f64 {
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                s += self.g[(i, j)] * v[i] * w[j];
            }
        }
        s
    }
}

/// The four unit normals along a boundary node and the contact angle.
#[derive(Clone, Debug)]
pub struct BoundaryFrame {
    pub position: DVector<f64>,
    pub sample: ShapeSample,
    pub nu: DVector<f64>,
    /// Outward conormal of the patch.
    pub mu: DVector<f64>,
    /// Outward normal of the container boundary (negated for exterior problems).
    pub nbar: DVector<f64>,
    /// Normal of the boundary curve inside the ball boundary.
    pub nubar: DVector<f64>,
    pub theta: f64,
    /// Reconstruction residual of mu = sin(theta) Nbar + cos(theta) nubar and
    /// nu = -cos(theta) Nbar + sin(theta) nubar.
    pub frame_residual: f64,
    /// `h(mu, mu)` of the patch at the node.
    pub h_mu_mu: f64,
    /// Unit tangent of the boundary curve (p-direction) in (t, p) components.
    pub tangent_tp: [f64; 2],
    /// mu in (t, p) components.
    pub mu_tp: [f64; 2],
}

fn cross3(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_row_slice(&[
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])
}

/// Evaluate all curvature data at a parameter point.
pub fn shape_at(patch: &ParametricPatch, t: f64, p: f64) -> Result<ShapeSample, GeometryError> {
    let sf = &patch.sf;
    let x = patch.chart.eval(t, p);
    let (xt, xp) = patch.chart.d1(t, p);
    let (xtt, xtp, xpp) = patch.chart.d2(t, p);

    let g = Matrix2::new(
        sf.metric_dot(&x, &xt, &xt),
        sf.metric_dot(&x, &xt, &xp),
        sf.metric_dot(&x, &xp, &xt),
        sf.metric_dot(&x, &xp, &xp),
    );
    let det = g.determinant();
    if !(det > 0.0) || g.norm() / det.sqrt().max(1e-300) > 1e12 {
        return Err(GeometryError::DegenerateMetric(t, p));
    }

    // gbar-unit normal: Euclidean cross product direction scaled by e^{-u}.
    let mut nu = cross3(&xt, &xp);
    nu /= nu.norm();
    nu /= sf.conf(&x);
    nu *= patch.orientation;

    // h(X, Y) = gbar(nabla_X nu, Y) = -gbar(nu, nabla_X Y) for tangential X, Y.
    let cov = |ta: &DVector<f64>, tb: &DVector<f64>, dd: &DVector<f64>| {
        dd + sf.christoffel_apply(&x, ta, tb)
    };
    let h = Matrix2::new(
        -sf.metric_dot(&x, &nu, &cov(&xt, &xt, &xtt)),
        -sf.metric_dot(&x, &nu, &cov(&xt, &xp, &xtp)),
        -sf.metric_dot(&x, &nu, &cov(&xp, &xt, &xtp)),
        -sf.metric_dot(&x, &nu, &cov(&xp, &xp, &xpp)),
    );
    let ginv = g.try_inverse().ok_or(GeometryError::DegenerateMetric(t, p))?;
    let shape = ginv * h;
    let mean = shape.trace();
    let sigma2 = shape.determinant();
    let h_norm_sq = mean * mean - 2.0 * sigma2;
    let disc = (mean * mean - 4.0 * sigma2).max(0.0).sqrt();
    let principal = [(mean - disc) / 2.0, (mean + disc) / 2.0];

    Ok(ShapeSample {
        position: x,
        x_t: xt,
        x_p: xp,
        nu,
        g,
        h,
        shape,
        mean_curvature: mean,
        h_norm_sq,
        principal,
        sigma: [mean, sigma2],
        area_density: det.sqrt(),
    })
}

/// Evaluate the boundary frame at azimuth `p` on the given boundary edge.
pub fn boundary_frame_at(
    patch: &ParametricPatch,
    edge_index: usize,
    p: f64,
) -> Result<BoundaryFrame, GeometryError> {
    let edge = *patch
        .edges
        .get(edge_index)
        .ok_or(GeometryError::NoSuchEdge(edge_index))?;
    let sf = &patch.sf;
    let sample = shape_at(patch, edge.t_value, p)?;
    let x = sample.position.clone();

    let dev = (x.norm() - sf.r_model).abs();
    if dev > 1e-9 * sf.r_model.max(1.0) {
        return Err(GeometryError::OffBoundary(SpaceFormError::NotOnBoundary(dev)));
    }
    // Snap onto the sphere for the ball-normal computation only.
    let xb = &x * (sf.r_model / x.norm());
    let mut nbar = sf.ball_normal(&xb)?;
    if patch.exterior {
        nbar = -nbar;
    }

    // Outward conormal: the t-direction component orthogonal to the boundary
    // tangent, signed by the edge orientation.
    let g = &sample.g;
    // mu ~ edge.outward * (x_t - (g_tp / g_pp) x_p), normalized in gbar.
    let corr = g[(0, 1)] / g[(1, 1)];
    let mu_tp_raw = [edge.outward, -edge.outward * corr];
    let mu_dir = &sample.x_t * mu_tp_raw[0] + &sample.x_p * mu_tp_raw[1];
    let mu_len = sf.metric_norm(&x, &mu_dir);
    let mu = mu_dir / mu_len;
    let mu_tp = [mu_tp_raw[0] / mu_len, mu_tp_raw[1] / mu_len];

    let nu = sample.nu.clone();
    let cos_t = -sf.metric_dot(&x, &nu, &nbar);
    let sin_t = sf.metric_dot(&x, &mu, &nbar);
    let theta = sin_t.atan2(cos_t);

    // nubar spans the same 2-plane: rotate (mu, nu) by theta.
    let nubar = &mu * theta.cos() + &nu * theta.sin();
    let rec_mu = &nbar * theta.sin() + &nubar * theta.cos();
    let rec_nu = &nbar * (-theta.cos()) + &nubar * theta.sin();
    let frame_residual =
        sf.metric_norm(&x, &(&mu - rec_mu)) + sf.metric_norm(&x, &(&nu - rec_nu));

    let h_mu_mu = sample.second_form(&mu_tp, &mu_tp);
    let tangent_len = g[(1, 1)].sqrt();
    let tangent_tp = [0.0, 1.0 / tangent_len];

    Ok(BoundaryFrame {
        position: x,
        nu,
        mu,
        nbar,
        nubar,
        theta,
        frame_residual,
        h_mu_mu,
        tangent_tp,
        mu_tp,
        sample,
    })
}

/// Lowered Newton tensor `T_{k-1}` for n = 2: `T_0 = g`, `T_1 = sigma_1 g - h`.
pub fn newton_tensor(sample: &ShapeSample, k: usize) -> Result<Matrix2<f64>, GeometryError> {
    match k {
        1 => Ok(sample.g),
        2 => Ok(sample.g * sample.sigma[0] - sample.h),
        _ => Err(GeometryError::NoSuchEdge(k)), // k out of range for n = 2
    }
}

/// Max over boundary nodes of `|h(e, mu)|` with `e` the boundary tangent —
/// Prop 2.1-type principal-direction check for constant-angle patches.
pub fn principal_direction_residual(patch: &ParametricPatch, nodes_per_edge: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for (ei, _) in patch.edges.iter().enumerate() {
        for i in 0..nodes_per_edge {
            let p = 2.0 * std::f64::consts::PI * (i as f64 + 0.31) / nodes_per_edge as f64;
            if let Ok(frame) = boundary_frame_at(patch, ei, p) {
                let v = frame.sample.second_form(&frame.tangent_tp, &frame.mu_tp);
                worst = worst.max(v.abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaceform::Curvature;
    use crate::surfaces::{make_surface, Family, SurfaceSpec};
    use approx::assert_relative_eq;

    #[test]
    fn flat_disk_is_totally_geodesic() {
        let spec = SurfaceSpec::new(Family::GeodesicDisk, Curvature::Flat, 1.0);
        let patch = make_surface(&spec).unwrap();
        let s = shape_at(&patch, 0.4, 1.1).unwrap();
        assert!(s.h.norm() < 1e-12);
        assert!(s.mean_curvature.abs() < 1e-12);
        let f = boundary_frame_at(&patch, 0, 0.3).unwrap();
        assert_relative_eq!(f.theta, std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn euclidean_sphere_curvatures() {
        let mut spec = SurfaceSpec::new(Family::ClosedSphere, Curvature::Flat, 1.0);
        spec.cap_radius = 0.5;
        spec.center_offset = 0.2;
        let patch = make_surface(&spec).unwrap();
        let s = shape_at(&patch, 1.0, 0.5).unwrap();
        assert_relative_eq!(s.mean_curvature, 4.0, epsilon = 1e-10);
        // The discriminant sqrt halves the attainable precision at umbilics.
        assert_relative_eq!(s.principal[0], 2.0, epsilon = 1e-7);
        assert_relative_eq!(s.principal[1], 2.0, epsilon = 1e-7);
        // Umbilic: n|h|^2 - H^2 = 0.
        assert!((2.0 * s.h_norm_sq - s.mean_curvature.powi(2)).abs() < 1e-9);
    }

    #[test]
    fn cap_contact_angles_match_construction() {
        for curv in [Curvature::Flat, Curvature::Hyperbolic, Curvature::Spherical] {
            for theta in [
                std::f64::consts::FRAC_PI_4,
                std::f64::consts::FRAC_PI_2,
                2.3561944901923448,
            ] {
                let mut spec = SurfaceSpec::new(Family::SphericalCap, curv, 1.0);
                spec.contact_angle = theta;
                spec.cap_radius = if curv == Curvature::Flat { 0.8 } else { 0.25 };
                let patch = make_surface(&spec).unwrap();
                for p in [0.0, 1.0, 4.0] {
                    let f = boundary_frame_at(&patch, 0, p).unwrap();
                    assert_relative_eq!(f.theta, theta, epsilon = 1e-9);
                    assert!(f.frame_residual < 1e-9);
                }
                let s = shape_at(&patch, 0.3 * patch.t_range.1, 0.2).unwrap();
                assert!(s.mean_curvature >= 0.0);
                assert_relative_eq!(s.mean_curvature, patch.cmc.unwrap(), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn exterior_cap_frames() {
        for curv in [Curvature::Flat, Curvature::Hyperbolic, Curvature::Spherical] {
            let mut spec = SurfaceSpec::new(Family::ExteriorCap, curv, 1.0);
            spec.contact_angle = 1.1;
            spec.cap_radius = if curv == Curvature::Flat { 0.5 } else { 0.2 };
            let patch = make_surface(&spec).unwrap();
            let f = boundary_frame_at(&patch, 0, 2.0).unwrap();
            assert_relative_eq!(f.theta, 1.1, epsilon = 1e-9);
            assert!(f.frame_residual < 1e-9);
        }
    }

    #[test]
    fn weingarten_consistency_by_fd() {
        // FD of nu along t matches the shape-operator action.
        let mut spec = SurfaceSpec::new(Family::SphericalCap, Curvature::Hyperbolic, 1.0);
        spec.contact_angle = 1.0;
        spec.cap_radius = 0.25;
        let patch = make_surface(&spec).unwrap();
        let (t, p) = (0.4 * patch.t_range.1, 0.7);
        let h = 1e-5;
        let sp = shape_at(&patch, t + h, p).unwrap();
        let sm = shape_at(&patch, t - h, p).unwrap();
        let s0 = shape_at(&patch, t, p).unwrap();
        let dnu_flat = (&sp.nu - &sm.nu) / (2.0 * h);
        let dnu = dnu_flat
            + patch
                .sf
                .christoffel_apply(&s0.position, &s0.x_t, &s0.nu);
        // nabla_{x_t} nu should equal S(x_t) = shape[(0,0)] x_t + shape[(1,0)] x_p.
        let expect = &s0.x_t * s0.shape[(0, 0)] + &s0.x_p * s0.shape[(1, 0)];
        assert!((dnu - expect).norm() < 1e-6);
    }

    #[test]
    fn newton_tensor_traces() {
        let mut spec = SurfaceSpec::new(Family::SphericalCap, Curvature::Flat, 1.0);
        spec.contact_angle = 1.2;
        spec.cap_radius = 0.7;
        let patch = make_surface(&spec).unwrap();
        let s = shape_at(&patch, 0.5 * patch.t_range.1, 0.1).unwrap();
        let ginv = s.g.try_inverse().unwrap();
        for k in [1usize, 2] {
            let t = newton_tensor(&s, k).unwrap();
            // tr(T_{k-1} S) = k sigma_k and tr T_{k-1} = (n - k + 1) sigma_{k-1}.
            let tr_th = (ginv * t * ginv * s.h).trace();
            assert_relative_eq!(tr_th, k as f64 * s.sigma[k - 1], epsilon = 1e-10);
            let tr_t = (ginv * t).trace();
            let sig_prev = if k == 1 { 1.0 } else { s.sigma[0] };
            assert_relative_eq!(tr_t, (3 - k) as f64 * sig_prev, epsilon = 1e-10);
        }
        assert!(newton_tensor(&s, 3).is_err());
    }

    #[test]
    fn mu_is_principal_on_constant_angle_caps() {
        for curv in [Curvature::Flat, Curvature::Hyperbolic] {
            let mut spec = SurfaceSpec::new(Family::SphericalCap, curv, 1.0);
            spec.contact_angle = std::f64::consts::FRAC_PI_3;
            spec.cap_radius = if curv == Curvature::Flat { 0.8 } else { 0.25 };
            let patch = make_surface(&spec).unwrap();
            assert!(principal_direction_residual(&patch, 16) < 1e-9);
        }
    }

    #[test]
    fn umbilic_sigma_matches_binomials() {
        // sigma_k of an umbilic Euclidean sphere of radius rho is C(n,k) rho^{-k}.
        let mut spec = SurfaceSpec::new(Family::ClosedSphere, Curvature::Flat, 1.0);
        spec.cap_radius = 0.4;
        spec.center_offset = 0.1;
        let patch = make_surface(&spec).unwrap();
        let s = shape_at(&patch, 2.0, 3.0).unwrap();
        assert_relative_eq!(s.sigma[0], 2.0 / 0.4, epsilon = 1e-9);
        assert_relative_eq!(s.sigma[1], 1.0 / 0.16, epsilon = 1e-9);
    }
}
