//! Numerical certification of the pointwise and integral identities:
//! Minkowski formulas (capillary, exterior, closed, higher-order), balance
//! identities, Laplacian identities, Robin boundary identities, the test
//! function phi_a, the auxiliary function Phi, and the boundary-umbilicity
//! identity of the ball.
//!
//! Conventions (all curvatures in one code path):
//! * `s_K = 1 / sinh R / sin R` is the gbar-length of the position field on
//!   the ball boundary;
//! * `c_K = 1 / coth R / cot R` is the umbilic curvature of the ball
//!   boundary (both negated on the container side for exterior problems);
//! * the Jacobi potential is `|h|^2 + n K` and the Robin coefficient is
//!   `q = c_K / sin(theta) + cot(theta) h(mu, mu)`.

use crate::geometry::{shape_at, GeometryError, ParametricPatch, ShapeSample};
use crate::quadrature::{
    build_grid, convergence_order, integrate_boundary, integrate_interior, QuadratureError,
};
use crate::spaceform::{Curvature, PotentialKind, SpaceForm};
use nalgebra::{DVector, Matrix2, Vector2};
use thiserror::Error;

pub const REL_FLOOR: f64 = 1e-14;

#[derive(Error, Debug)]
pub enum IdentityError {
    #[error("quadrature: {0}")]
    Quadrature(#[from] QuadratureError),
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("identity {0} requires a CMC patch")]
    CmcRequired(String),
    #[error("identity {0} does not apply to this patch: {1}")]
    VariantMismatch(String, String),
    #[error("V_a vanishes at a boundary sample (|V_a| = {0:.3e})")]
    VaNearZero(f64),
}

/// Per-quadrature-level outcome of an integral identity.
#[derive(Clone, Debug, serde::Serialize)]
pub struct LevelResult {
    pub level: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_residual: f64,
    pub rel_residual: f64,
}

impl LevelResult {
    /// `scale` is the natural size of the integrands (e.g. the integral of
    /// their absolute values); it keeps the relative residual meaningful
    /// when both sides vanish by symmetry.
    fn with_scale(level: usize, lhs: f64, rhs: f64, scale: f64) -> Self {
        let abs = (lhs - rhs).abs();
        LevelResult {
            level,
            lhs,
            rhs,
            abs_residual: abs,
            rel_residual: abs / lhs.abs().max(rhs.abs()).max(scale).max(REL_FLOOR),
        }
    }
}

/// Result of one identity check (integral or sup-norm).
#[derive(Clone, Debug, serde::Serialize)]
pub struct IdentityReport {
    pub id: String,
    pub family: String,
    pub curvature: f64,
    pub theta: Option<f64>,
    pub direction: Vec<f64>,
    pub levels: Vec<LevelResult>,
    /// Richardson order estimate (integral identities with >= 3 levels).
    pub order: Option<f64>,
    pub tol: f64,
    pub pass: bool,
}

impl IdentityReport {
    fn from_levels(
        id: &str,
        patch: &ParametricPatch,
        a: Option<&DVector<f64>>,
        levels: Vec<LevelResult>,
        tol: f64,
    ) -> Self {
        let last = levels.last().map(|l| l.rel_residual).unwrap_or(f64::NAN);
        let values: Vec<f64> = levels.iter().map(|l| l.abs_residual).collect();
        let order = convergence_order(&values, Some(0.0));
        IdentityReport {
            id: id.to_string(),
            family: patch.name.clone(),
            curvature: patch.sf.k(),
            theta: patch.contact_angle,
            direction: a.map(|v| v.iter().copied().collect()).unwrap_or_default(),
            levels,
            order,
            tol,
            pass: last <= tol,
        }
    }

    fn sup_norm(
        id: &str,
        patch: &ParametricPatch,
        a: Option<&DVector<f64>>,
        residual: f64,
        tol: f64,
    ) -> Self {
        IdentityReport {
            id: id.to_string(),
            family: patch.name.clone(),
            curvature: patch.sf.k(),
            theta: patch.contact_angle,
            direction: a.map(|v| v.iter().copied().collect()).unwrap_or_default(),
            levels: vec![LevelResult {
                level: 0,
                lhs: residual,
                rhs: 0.0,
                abs_residual: residual,
                rel_residual: residual,
            }],
            order: None,
            tol,
            pass: residual <= tol,
        }
    }

    pub fn last_residual(&self) -> f64 {
        self.levels.last().map(|l| l.rel_residual).unwrap_or(f64::NAN)
    }
}

// ---------------------------------------------------------------------------
// Space-form constants and shared scalars
// ---------------------------------------------------------------------------

/// gbar-length of the position field on the ball boundary: 1 / sinh R / sin R.
pub fn boundary_position_norm(sf: &SpaceForm) -> f64 {
    match sf.curv {
        Curvature::Flat => 1.0,
        Curvature::Hyperbolic => sf.radius.sinh(),
        Curvature::Spherical => sf.radius.sin(),
    }
}

/// Umbilic curvature of the ball boundary: 1 / coth R / cot R.
pub fn boundary_umbilic_curvature(sf: &SpaceForm) -> f64 {
    match sf.curv {
        Curvature::Flat => 1.0,
        Curvature::Hyperbolic => 1.0 / sf.radius.tanh(),
        Curvature::Spherical => 1.0 / sf.radius.tan(),
    }
}

/// +1 for interior patches, -1 for exterior (flips the boundary-coupled terms).
fn side_sign(patch: &ParametricPatch) -> f64 {
    if patch.exterior {
        -1.0
    } else {
        1.0
    }
}

/// Robin coefficient `q = side * c_K / sin(theta) + cot(theta) h(mu, mu)`.
pub fn robin_coefficient(patch: &ParametricPatch, theta: f64, h_mu_mu: f64) -> f64 {
    side_sign(patch) * boundary_umbilic_curvature(&patch.sf) / theta.sin()
        + theta.cos() / theta.sin() * h_mu_mu
}

/// Capillary Minkowski weight: `V_a + side * s_K cos(theta) gbar(Y_a, nu)`
/// (reduces to `<x + cos(theta) nu, a>` for K = 0, interior).
fn capillary_weight(patch: &ParametricPatch, s: &ShapeSample, a: &DVector<f64>, theta: f64) -> f64 {
    let sf = &patch.sf;
    let x = &s.position;
    sf.va(x, a)
        + side_sign(patch)
            * boundary_position_norm(sf)
            * theta.cos()
            * sf.metric_dot(x, &sf.ya(x, a), &s.nu)
}

/// Test function `phi_a = n * capillary_weight - H gbar(X_a, nu)` (CMC).
pub fn phi_a_at(patch: &ParametricPatch, s: &ShapeSample, a: &DVector<f64>, h_cmc: f64) -> f64 {
    let theta = patch.contact_angle.unwrap_or(std::f64::consts::FRAC_PI_2);
    let sf = &patch.sf;
    let n = sf.n as f64;
    n * capillary_weight(patch, s, a, theta)
        - h_cmc * sf.metric_dot(&s.position, &sf.xa(&s.position, a), &s.nu)
}

/// Radial potential with `grad = x` (in gbar) vanishing on the ball boundary:
/// `(|x|^2 - 1)/2` for K = 0, `-K (V_0 - V_0(R))` otherwise.
pub fn radial_potential(sf: &SpaceForm, x: &DVector<f64>) -> f64 {
    match sf.curv {
        Curvature::Flat => (x.norm_squared() - 1.0) / 2.0,
        Curvature::Hyperbolic => sf.v0(x) - sf.radius.cosh(),
        Curvature::Spherical => -(sf.v0(x) - sf.radius.cos()),
    }
}

/// Auxiliary function `Phi = radial_potential * H - n (gbar(x, nu) + side cos(theta) s_K)`.
pub fn aux_phi_at(patch: &ParametricPatch, s: &ShapeSample, h_cmc: f64) -> f64 {
    let sf = &patch.sf;
    let theta = patch.contact_angle.unwrap_or(std::f64::consts::FRAC_PI_2);
    let n = sf.n as f64;
    radial_potential(sf, &s.position) * h_cmc
        - n * (sf.metric_dot(&s.position, &s.position, &s.nu)
            + side_sign(patch) * theta.cos() * boundary_position_norm(sf))
}

fn require_cmc(patch: &ParametricPatch, id: &str) -> Result<f64, IdentityError> {
    patch.cmc.ok_or_else(|| IdentityError::CmcRequired(id.to_string()))
}

fn require_theta(patch: &ParametricPatch, id: &str) -> Result<f64, IdentityError> {
    patch
        .contact_angle
        .ok_or_else(|| IdentityError::VariantMismatch(id.to_string(), "no contact angle".into()))
}

// ---------------------------------------------------------------------------
// Integral identities
// ---------------------------------------------------------------------------

/// Minkowski formula; the variant (capillary per K, exterior, closed) is
/// inferred from the patch. LHS: `int n * weight dA`; RHS: `int H gbar(X_a, nu) dA`.
pub fn minkowski_residual(
    patch: &ParametricPatch,
    a: &DVector<f64>,
    rule_order: usize,
    levels: &[usize],
    tol: f64,
) -> Result<IdentityReport, IdentityError> {
    let closed = patch.edges.is_empty();
    let id = match (closed, patch.exterior, patch.sf.curv) {
        (true, _, _) => "minkowski/closed",
        (false, true, _) => "minkowski/exterior",
        (false, false, Curvature::Flat) => "minkowski/euclidean_capillary",
        (false, false, Curvature::Hyperbolic) => "minkowski/hyperbolic_capillary",
        (false, false, Curvature::Spherical) => "minkowski/spherical_capillary",
    };
    let theta = if closed {
        0.0
    } else {
        require_theta(patch, id)?
    };
    let sf = &patch.sf;
    let n = sf.n as f64;
    let mut rows = Vec::new();
    for &level in levels {
        let grid = build_grid(patch, rule_order, level)?;
        let lhs = integrate_interior(&grid, |node| {
            let s = &node.sample;
            if closed {
                n * sf.va(&s.position, a)
            } else {
                n * capillary_weight(patch, s, a, theta)
            }
        })?;
        let rhs = integrate_interior(&grid, |node| {
            let s = &node.sample;
            s.mean_curvature * sf.metric_dot(&s.position, &sf.xa(&s.position, a), &s.nu)
        })?;
        let scale = integrate_interior(&grid, |node| {
            let s = &node.sample;
            let flux =
                s.mean_curvature * sf.metric_dot(&s.position, &sf.xa(&s.position, a), &s.nu);
            let weight = if closed {
                n * sf.va(&s.position, a)
            } else {
                n * capillary_weight(patch, s, a, theta)
            };
            flux.abs().max(weight.abs())
        })?;
        rows.push(LevelResult::with_scale(level, lhs, rhs, scale));
    }
    Ok(IdentityReport::from_levels(id, patch, Some(a), rows, tol))
}

/// Higher-order Minkowski formula (free boundary):
/// `int V_a sigma_{k-1} dA = k/(n+1-k) int sigma_k gbar(X_a, nu) dA`.
pub fn minkowski_higher(
    patch: &ParametricPatch,
    a: &DVector<f64>,
    k: usize,
    rule_order: usize,
    levels: &[usize],
    tol: f64,
) -> Result<IdentityReport, IdentityError> {
    let id = format!("minkowski_higher/k{k}");
    let theta = require_theta(patch, &id)?;
    if (theta - std::f64::consts::FRAC_PI_2).abs() > 1e-9 {
        return Err(IdentityError::VariantMismatch(
            id,
            "requires orthogonal contact (theta = pi/2)".into(),
        ));
    }
    let sf = &patch.sf;
    let n = sf.n as f64;
    if k == 0 || k > sf.n {
        return Err(IdentityError::VariantMismatch(id, format!("k = {k} out of 1..=n")));
    }
    let mut rows = Vec::new();
    for &level in levels {
        let grid = build_grid(patch, rule_order, level)?;
        let lhs = integrate_interior(&grid, |node| {
            let s = &node.sample;
            let sigma_prev = if k == 1 { 1.0 } else { s.sigma[k - 2] };
            sf.va(&s.position, a) * sigma_prev
        })?;
        let factor = k as f64 / (n + 1.0 - k as f64);
        let rhs = integrate_interior(&grid, |node| {
            let s = &node.sample;
            factor * s.sigma[k - 1] * sf.metric_dot(&s.position, &sf.xa(&s.position, a), &s.nu)
        })?;
        let scale = integrate_interior(&grid, |node| {
            let s = &node.sample;
            let sigma_prev = if k == 1 { 1.0 } else { s.sigma[k - 2] };
            let flux = factor
                * s.sigma[k - 1]
                * sf.metric_dot(&s.position, &sf.xa(&s.position, a), &s.nu);
            (sf.va(&s.position, a) * sigma_prev).abs().max(flux.abs())
        })?;
        rows.push(LevelResult::with_scale(level, lhs, rhs, scale));
    }
    Ok(IdentityReport::from_levels(&id, patch, Some(a), rows, tol))
}

/// Balance identity: `n int gbar(Y_a, nu) dA = r_model oint gbar(nubar, a) ds`
/// (reduces to Eq. (AS1) for K = 0).
pub fn balance_residual(
    patch: &ParametricPatch,
    a: &DVector<f64>,
    rule_order: usize,
    levels: &[usize],
    tol: f64,
) -> Result<IdentityReport, IdentityError> {
    let id = "balance";
    if patch.edges.is_empty() {
        return Err(IdentityError::VariantMismatch(id.into(), "closed patch".into()));
    }
    let sf = &patch.sf;
    let n = sf.n as f64;
    let mut rows = Vec::new();
    for &level in levels {
        let grid = build_grid(patch, rule_order, level)?;
        let lhs = integrate_interior(&grid, |node| {
            let s = &node.sample;
            n * sf.metric_dot(&s.position, &sf.ya(&s.position, a), &s.nu)
        })?;
        // The boundary flux flips sign with the container normal on exterior
        // patches (the frame's nbar is negated there).
        let side = side_sign(patch);
        let rhs = integrate_boundary(&grid, |node| {
            let f = &node.frame;
            side * sf.r_model * sf.metric_dot(&f.position, &f.nubar, a)
        })?;
        let scale = integrate_boundary(&grid, |node| {
            let f = &node.frame;
            (sf.r_model * sf.metric_dot(&f.position, &f.nubar, a)).abs()
        })?;
        rows.push(LevelResult::with_scale(level, lhs, rhs, scale));
    }
    Ok(IdentityReport::from_levels(id, patch, Some(a), rows, tol))
}

/// `phi_a` at a node plus the companion mean-zero check `int phi_a dA`.
pub fn phi_test_function(
    patch: &ParametricPatch,
    a: &DVector<f64>,
    rule_order: usize,
    level: usize,
    tol: f64,
) -> Result<(f64, IdentityReport), IdentityError> {
    let h = require_cmc(patch, "phi_a")?;
    let grid = build_grid(patch, rule_order, level)?;
    let integral = integrate_interior(&grid, |node| phi_a_at(patch, &node.sample, a, h))?;
    let scale = integrate_interior(&grid, |node| phi_a_at(patch, &node.sample, a, h).abs())?;
    let rel = integral.abs() / scale.max(REL_FLOOR);
    let mut report = IdentityReport::sup_norm("phi_a_mean_zero", patch, Some(a), rel, tol);
    report.levels[0].lhs = integral;
    let (t0, t1) = patch.t_range;
    let sample = shape_at(patch, t0 + 0.5 * (t1 - t0), 0.0)?;
    Ok((phi_a_at(patch, &sample, a, h), report))
}

// ---------------------------------------------------------------------------
// Surface Laplacian via parameter-space finite differences
// ---------------------------------------------------------------------------

/// First and second parameter derivatives of a pointwise scalar by 4th-order
/// central stencils (charts extend analytically past the boundary).
struct ScalarJet {
    f: f64,
    ft: f64,
    fp: f64,
    ftt: f64,
    ftp: f64,
    fpp: f64,
}

fn scalar_jet(
    patch: &ParametricPatch,
    t: f64,
    p: f64,
    f: &dyn Fn(&ShapeSample) -> f64,
) -> Result<ScalarJet, GeometryError> {
    // Relative to the spans but capped: wide parameter ranges (Delaunay
    // pieces) would otherwise push the truncation error above the roundoff
    // floor of the central stencils.
    let ht = (2e-3 * (patch.t_range.1 - patch.t_range.0).abs()).clamp(1e-3, 2e-2);
    let hp = 4e-3;
    let ev = |dt: f64, dp: f64| -> Result<f64, GeometryError> {
        Ok(f(&shape_at(patch, t + dt, p + dp)?))
    };
    let f00 = ev(0.0, 0.0)?;
    let ft1 = ev(ht, 0.0)?;
    let ft2 = ev(2.0 * ht, 0.0)?;
    let ftm1 = ev(-ht, 0.0)?;
    let ftm2 = ev(-2.0 * ht, 0.0)?;
    let fp1 = ev(0.0, hp)?;
    let fp2 = ev(0.0, 2.0 * hp)?;
    let fpm1 = ev(0.0, -hp)?;
    let fpm2 = ev(0.0, -2.0 * hp)?;
    let ft = (-ft2 + 8.0 * ft1 - 8.0 * ftm1 + ftm2) / (12.0 * ht);
    let fp = (-fp2 + 8.0 * fp1 - 8.0 * fpm1 + fpm2) / (12.0 * hp);
    let ftt = (-ft2 + 16.0 * ft1 - 30.0 * f00 + 16.0 * ftm1 - ftm2) / (12.0 * ht * ht);
    let fpp = (-fp2 + 16.0 * fp1 - 30.0 * f00 + 16.0 * fpm1 - fpm2) / (12.0 * hp * hp);
    // 4th-order mixed derivative: tensor product of the first-derivative stencil.
    let coeff = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
    let mut ftp = 0.0;
    for &(i, ci) in &coeff {
        for &(j, cj) in &coeff {
            ftp += ci * cj * ev(i * ht, j * hp)?;
        }
    }
    ftp /= 144.0 * ht * hp;
    Ok(ScalarJet { f: f00, ft, fp, ftt, ftp, fpp })
}

/// Analytic metric derivatives and intrinsic Christoffel symbols at (t, p).
fn intrinsic_christoffel(
    patch: &ParametricPatch,
    t: f64,
    p: f64,
) -> Result<(Matrix2<f64>, [Matrix2<f64>; 2]), GeometryError> {
    let sf = &patch.sf;
    let x = patch.chart.eval(t, p);
    let (xt, xp) = patch.chart.d1(t, p);
    let (xtt, xtp, xpp) = patch.chart.d2(t, p);
    let e2u = sf.conf(&x).powi(2);
    let du = sf.grad_u(&x);
    let d: [&DVector<f64>; 2] = [&xt, &xp];
    let dd = [[&xtt, &xtp], [&xtp, &xpp]];
    let g = Matrix2::from_fn(|i, j| e2u * d[i].dot(d[j]));
    // dg[gamma][(alpha, beta)] = d_gamma g_{alpha beta}.
    let mut dg = [Matrix2::zeros(), Matrix2::zeros()];
    for gamma in 0..2 {
        for alpha in 0..2 {
            for beta in 0..2 {
                let conf_term = 2.0 * du.dot(d[gamma]) * e2u * d[alpha].dot(d[beta]);
                let geo_term = e2u * (dd[alpha][gamma].dot(d[beta]) + d[alpha].dot(dd[beta][gamma]));
                dg[gamma][(alpha, beta)] = conf_term + geo_term;
            }
        }
    }
    let ginv = g
        .try_inverse()
        .ok_or(GeometryError::DegenerateMetric(t, p))?;
    // christ[gamma][(alpha, beta)] = Gamma^gamma_{alpha beta}.
    let mut christ = [Matrix2::zeros(), Matrix2::zeros()];
    for gamma in 0..2 {
        for alpha in 0..2 {
            for beta in 0..2 {
                let mut v = 0.0;
                for delta in 0..2 {
                    v += 0.5
                        * ginv[(gamma, delta)]
                        * (dg[alpha][(delta, beta)] + dg[beta][(delta, alpha)]
                            - dg[delta][(alpha, beta)]);
                }
                christ[gamma][(alpha, beta)] = v;
            }
        }
    }
    Ok((ginv, christ))
}

/// Laplace-Beltrami of a pointwise scalar at (t, p), plus its tangential
/// gradient in (t, p) components (index-raised).
pub fn surface_laplacian(
    patch: &ParametricPatch,
    t: f64,
    p: f64,
    f: &dyn Fn(&ShapeSample) -> f64,
) -> Result<(f64, Vector2<f64>), IdentityError> {
    let jet = scalar_jet(patch, t, p, f)?;
    let (ginv, christ) = intrinsic_christoffel(patch, t, p)?;
    let d1 = Vector2::new(jet.ft, jet.fp);
    let d2 = Matrix2::new(jet.ftt, jet.ftp, jet.ftp, jet.fpp);
    let mut lap = 0.0;
    for alpha in 0..2 {
        for beta in 0..2 {
            let mut corr = 0.0;
            for gamma in 0..2 {
                corr += christ[gamma][(alpha, beta)] * d1[gamma];
            }
            lap += ginv[(alpha, beta)] * (d2[(alpha, beta)] - corr);
        }
    }
    let grad = ginv * d1;
    let _ = jet.f;
    Ok((lap, grad))
}

/// Interior check nodes for sup-norm identities: a grid keeping a margin from
/// the parameter-domain edges (away from the polar coordinate degeneracy).
fn check_nodes(patch: &ParametricPatch) -> Vec<(f64, f64)> {
    let (t0, t1) = patch.t_range;
    let mut nodes = Vec::new();
    for i in 0..10 {
        let t = t0 + (t1 - t0) * (0.12 + 0.81 * i as f64 / 9.0);
        for j in 0..12 {
            let p = 2.0 * std::f64::consts::PI * (j as f64 + 0.23) / 12.0;
            nodes.push((t, p));
        }
    }
    nodes
}

/// The named Laplacian identities. The `-h` variants are the unified
/// space-form forms (they reduce to the Euclidean ones at K = 0).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LaplacianWhich {
    /// K=0: Delta <x,a> = -H <nu,a>.
    EqX,
    /// K=0: Delta |x|^2/2 = n - H <x,nu>.
    EqX2,
    /// K=0: Delta <nu,a> = <grad H, a> - |h|^2 <nu,a>.
    EqNu,
    /// K=0: Delta <x,nu> = <x, grad H> + H - |h|^2 <x,nu>.
    EqXnu,
    /// K=0: Delta <X_a,nu> = <X_a, grad H> + H <x,a> - |h|^2 <X_a,nu> - n <nu,a>.
    EqXnuField,
    /// Delta V_0 = -K (n V_0 - H gbar(x,nu)).
    EqX0H,
    /// Delta V_a = -n K V_a - H dV_a[nu].
    EqXH,
    /// Delta gbar(x,nu) = gbar(x, grad H) + H V_0 - |h|^2 gbar(x,nu).
    EqXnuH,
    /// Delta gbar(X_a,nu) = gbar(X_a, grad H) + H V_a - (|h|^2 + nK) gbar(X_a,nu) - n dV_a[nu].
    EqXnuFieldH,
    /// Delta gbar(Y_a,nu) = gbar(Y_a, grad H) - (|h|^2 + nK) gbar(Y_a,nu).
    EqYnuH,
    /// CMC: Delta phi_a + (|h|^2 + nK) phi_a = (n|h|^2 - H^2) V_a.
    EqPhi,
    /// CMC: Delta Phi = (n|h|^2 - H^2) gbar(x,nu).
    StabEq4,
}

impl LaplacianWhich {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "eq-x" => Self::EqX,
            "eq-x2" => Self::EqX2,
            "eq-nu" => Self::EqNu,
            "eq-xnu" => Self::EqXnu,
            "eq-Xnu" => Self::EqXnuField,
            "eq-x0-h" => Self::EqX0H,
            "eq-x-h" => Self::EqXH,
            "eq-xnu-h" => Self::EqXnuH,
            "eq-Xnu-h" => Self::EqXnuFieldH,
            "eq-Ynu-h" => Self::EqYnuH,
            "eq-phi" | "eq-phi-h" => Self::EqPhi,
            "stab-eq4" => Self::StabEq4,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::EqX => "eq-x",
            Self::EqX2 => "eq-x2",
            Self::EqNu => "eq-nu",
            Self::EqXnu => "eq-xnu",
            Self::EqXnuField => "eq-Xnu",
            Self::EqX0H => "eq-x0-h",
            Self::EqXH => "eq-x-h",
            Self::EqXnuH => "eq-xnu-h",
            Self::EqXnuFieldH => "eq-Xnu-h",
            Self::EqYnuH => "eq-Ynu-h",
            Self::EqPhi => "eq-phi",
            Self::StabEq4 => "stab-eq4",
        }
    }

    fn needs_cmc(&self) -> bool {
        matches!(self, Self::EqPhi | Self::StabEq4)
    }

    fn flat_only(&self) -> bool {
        matches!(
            self,
            Self::EqX | Self::EqX2 | Self::EqNu | Self::EqXnu | Self::EqXnuField
        )
    }
}

/// Sup-norm over interior check nodes of LHS - RHS for the named identity.
pub fn laplacian_identity_residual(
    patch: &ParametricPatch,
    a: &DVector<f64>,
    which: LaplacianWhich,
    tol: f64,
) -> Result<IdentityReport, IdentityError> {
    let sf = patch.sf.clone();
    let id = format!("laplacian/{}", which.name());
    if which.flat_only() && sf.curv != Curvature::Flat {
        return Err(IdentityError::VariantMismatch(id, "Euclidean-only form".into()));
    }
    let h_cmc = if which.needs_cmc() {
        Some(require_cmc(patch, &id)?)
    } else {
        None
    };
    let n = sf.n as f64;
    let k = sf.k();
    let a = a.clone();

    // The scalar whose Laplacian is taken.
    let scalar: Box<dyn Fn(&ShapeSample) -> f64> = match which {
        LaplacianWhich::EqX | LaplacianWhich::EqXH => {
            let (sf, a) = (sf.clone(), a.clone());
            Box::new(move |s| sf.va(&s.position, &a))
        }
        LaplacianWhich::EqX2 => Box::new(move |s| s.position.norm_squared() / 2.0),
        LaplacianWhich::EqNu => {
            let a = a.clone();
            Box::new(move |s| s.nu.dot(&a))
        }
        LaplacianWhich::EqXnu | LaplacianWhich::EqXnuH => {
            let sf = sf.clone();
            Box::new(move |s| sf.metric_dot(&s.position, &s.position, &s.nu))
        }
        LaplacianWhich::EqXnuField | LaplacianWhich::EqXnuFieldH => {
            let (sf, a) = (sf.clone(), a.clone());
            Box::new(move |s| sf.metric_dot(&s.position, &sf.xa(&s.position, &a), &s.nu))
        }
        LaplacianWhich::EqX0H => {
            let sf = sf.clone();
            Box::new(move |s| sf.v0(&s.position))
        }
        LaplacianWhich::EqYnuH => {
            let (sf, a) = (sf.clone(), a.clone());
            Box::new(move |s| sf.metric_dot(&s.position, &sf.ya(&s.position, &a), &s.nu))
        }
        LaplacianWhich::EqPhi => {
            let h = h_cmc.unwrap();
            let (a, patch_side, theta) = (
                a.clone(),
                side_sign(patch),
                require_theta(patch, &id).unwrap_or(std::f64::consts::FRAC_PI_2),
            );
            let sf = sf.clone();
            Box::new(move |s| {
                let x = &s.position;
                let weight = sf.va(x, &a)
                    + patch_side
                        * boundary_position_norm(&sf)
                        * theta.cos()
                        * sf.metric_dot(x, &sf.ya(x, &a), &s.nu);
                n * weight - h * sf.metric_dot(x, &sf.xa(x, &a), &s.nu)
            })
        }
        LaplacianWhich::StabEq4 => {
            let h = h_cmc.unwrap();
            let (patch_side, theta) = (
                side_sign(patch),
                require_theta(patch, &id).unwrap_or(std::f64::consts::FRAC_PI_2),
            );
            let sf = sf.clone();
            Box::new(move |s| {
                radial_potential(&sf, &s.position) * h
                    - n * (sf.metric_dot(&s.position, &s.position, &s.nu)
                        + patch_side * theta.cos() * boundary_position_norm(&sf))
            })
        }
    };

    let mean_curv = |s: &ShapeSample| s.mean_curvature;
    let mut worst: f64 = 0.0;
    for (t, p) in check_nodes(patch) {
        let s = shape_at(patch, t, p)?;
        let (lap, _) = surface_laplacian(patch, t, p, scalar.as_ref())?;
        // Tangential gradient of H paired with an ambient vector field;
        // exactly zero on declared-CMC patches (differentiating the sampled H
        // there would only amplify its evaluation noise).
        let grad_h_pair = |w: &DVector<f64>| -> Result<f64, IdentityError> {
            if patch.cmc.is_some() {
                return Ok(0.0);
            }
            let (_, grad_tp) = surface_laplacian(patch, t, p, &mean_curv)?;
            let grad_amb = &s.x_t * grad_tp[0] + &s.x_p * grad_tp[1];
            Ok(sf.metric_dot(&s.position, &grad_amb, w))
        };
        let x = &s.position;
        let rhs = match which {
            LaplacianWhich::EqX => -s.mean_curvature * s.nu.dot(&a),
            LaplacianWhich::EqX2 => n - s.mean_curvature * x.dot(&s.nu),
            LaplacianWhich::EqNu => grad_h_pair(&a)? - s.h_norm_sq * s.nu.dot(&a),
            LaplacianWhich::EqXnu => {
                grad_h_pair(x)? + s.mean_curvature - s.h_norm_sq * x.dot(&s.nu)
            }
            LaplacianWhich::EqXnuField => {
                let xa = sf.xa(x, &a);
                grad_h_pair(&xa)? + s.mean_curvature * x.dot(&a)
                    - s.h_norm_sq * xa.dot(&s.nu)
                    - n * s.nu.dot(&a)
            }
            LaplacianWhich::EqX0H => {
                -k * (n * sf.v0(x) - s.mean_curvature * sf.metric_dot(x, x, &s.nu))
            }
            LaplacianWhich::EqXH => {
                let dva_nu = sf
                    .potential_gradient(PotentialKind::Va(&a), x)
                    .dot(&s.nu);
                -n * k * sf.va(x, &a) - s.mean_curvature * dva_nu
            }
            LaplacianWhich::EqXnuH => {
                grad_h_pair(x)? + s.mean_curvature * sf.v0(x)
                    - s.h_norm_sq * sf.metric_dot(x, x, &s.nu)
            }
            LaplacianWhich::EqXnuFieldH => {
                let xa = sf.xa(x, &a);
                let dva_nu = sf
                    .potential_gradient(PotentialKind::Va(&a), x)
                    .dot(&s.nu);
                grad_h_pair(&xa)? + s.mean_curvature * sf.va(x, &a)
                    - (s.h_norm_sq + n * k) * sf.metric_dot(x, &xa, &s.nu)
                    - n * dva_nu
            }
            LaplacianWhich::EqYnuH => {
                let ya = sf.ya(x, &a);
                grad_h_pair(&ya)? - (s.h_norm_sq + n * k) * sf.metric_dot(x, &ya, &s.nu)
            }
            LaplacianWhich::EqPhi => {
                (n * s.h_norm_sq - s.mean_curvature.powi(2)) * sf.va(x, &a)
                    - (s.h_norm_sq + n * k) * scalar(&s)
            }
            LaplacianWhich::StabEq4 => {
                (n * s.h_norm_sq - s.mean_curvature.powi(2)) * sf.metric_dot(x, x, &s.nu)
            }
        };
        worst = worst.max((lap - rhs).abs());
    }
    Ok(IdentityReport::sup_norm(&id, patch, Some(&a), worst, tol))
}

// ---------------------------------------------------------------------------
// Boundary (Robin) identities
// ---------------------------------------------------------------------------

/// Max over boundary nodes of `|nabla_mu s - q s|` for both paper scalars
/// (the capillary weight and `gbar(X_a, nu)`), using central FD along the
/// boundary-transversal coordinate (charts extend analytically).
pub fn robin_residual(
    patch: &ParametricPatch,
    a: &DVector<f64>,
    nodes_per_edge: usize,
    tol: f64,
) -> Result<IdentityReport, IdentityError> {
    let id = match (patch.exterior, patch.sf.curv) {
        (true, _) => "robin/exterior",
        (false, Curvature::Flat) => "robin/euclidean",
        (false, Curvature::Hyperbolic) => "robin/hyperbolic",
        (false, Curvature::Spherical) => "robin/spherical",
    };
    let theta = require_theta(patch, id)?;
    let sf = &patch.sf;
    let scalars: [Box<dyn Fn(&ShapeSample) -> f64>; 2] = [
        {
            let (a, theta) = (a.clone(), theta);
            let patch_side = side_sign(patch);
            let sf = sf.clone();
            Box::new(move |s: &ShapeSample| {
                sf.va(&s.position, &a)
                    + patch_side
                        * boundary_position_norm(&sf)
                        * theta.cos()
                        * sf.metric_dot(&s.position, &sf.ya(&s.position, &a), &s.nu)
            })
        },
        {
            let a = a.clone();
            let sf = sf.clone();
            Box::new(move |s: &ShapeSample| {
                sf.metric_dot(&s.position, &sf.xa(&s.position, &a), &s.nu)
            })
        },
    ];
    let ht = 1e-3 * (patch.t_range.1 - patch.t_range.0).abs().max(0.5);
    let mut worst: f64 = 0.0;
    for (ei, edge) in patch.edges.iter().enumerate() {
        for i in 0..nodes_per_edge {
            let p = 2.0 * std::f64::consts::PI * (i as f64 + 0.17) / nodes_per_edge as f64;
            let frame = crate::geometry::boundary_frame_at(patch, ei, p)?;
            let q = robin_coefficient(patch, frame.theta, frame.h_mu_mu);
            for scalar in &scalars {
                // d/dt by 4th-order central FD, then convert to the mu direction.
                let ev = |dt: f64| -> Result<f64, IdentityError> {
                    Ok(scalar(&shape_at(patch, edge.t_value + dt, p)?))
                };
                let dt = (-ev(2.0 * ht)? + 8.0 * ev(ht)? - 8.0 * ev(-ht)? + ev(-2.0 * ht)?)
                    / (12.0 * ht);
                let dp_needed = frame.mu_tp[1];
                let dp = if dp_needed.abs() > 0.0 {
                    let hp = 1e-3 * 2.0 * std::f64::consts::PI;
                    let evp = |dpp: f64| -> Result<f64, IdentityError> {
                        Ok(scalar(&shape_at(patch, edge.t_value, p + dpp)?))
                    };
                    (-evp(2.0 * hp)? + 8.0 * evp(hp)? - 8.0 * evp(-hp)? + evp(-2.0 * hp)?)
                        / (12.0 * hp)
                } else {
                    0.0
                };
                let dmu = frame.mu_tp[0] * dt + frame.mu_tp[1] * dp;
                let sval = scalar(&frame.sample);
                worst = worst.max((dmu - q * sval).abs());
            }
        }
    }
    Ok(IdentityReport::sup_norm(id, patch, Some(a), worst, tol))
}

/// Auxiliary function Phi: boundary vanishing and Delta Phi identity.
/// Returns (boundary sup |Phi|, interior sup-norm report for stab-eq4).
pub fn aux_phi_residual(
    patch: &ParametricPatch,
    tol_boundary: f64,
    tol_interior: f64,
) -> Result<(IdentityReport, IdentityReport), IdentityError> {
    let h = require_cmc(patch, "aux_phi")?;
    let mut worst: f64 = 0.0;
    for (ei, _) in patch.edges.iter().enumerate() {
        for i in 0..24 {
            let p = 2.0 * std::f64::consts::PI * (i as f64 + 0.4) / 24.0;
            let frame = crate::geometry::boundary_frame_at(patch, ei, p)?;
            worst = worst.max(aux_phi_at(patch, &frame.sample, h).abs());
        }
    }
    let boundary = IdentityReport::sup_norm("aux_phi/boundary_vanishing", patch, None, worst, tol_boundary);
    let zero = DVector::zeros(patch.sf.ambient_dim());
    let interior =
        laplacian_identity_residual(patch, &zero, LaplacianWhich::StabEq4, tol_interior)?;
    Ok((boundary, interior))
}

/// Boundary umbilicity identity on the ball boundary itself:
/// `h^{dB} = ((V_a)_{Nbar} / V_a) g^{dB}` with ratio `c_K`.
pub fn boundary_umbilic_residual(
    sf: &SpaceForm,
    a: &DVector<f64>,
    samples: usize,
    tol: f64,
) -> Result<IdentityReport, IdentityError> {
    use crate::geometry::BoundaryEdge;
    use crate::surfaces::PI;
    // The ball boundary as a closed sphere chart centered at the origin.
    struct SphereChart {
        r: f64,
    }
    impl crate::geometry::Chart for SphereChart {
        fn eval(&self, t: f64, p: f64) -> DVector<f64> {
            DVector::from_row_slice(&[
                self.r * t.sin() * p.cos(),
                self.r * t.sin() * p.sin(),
                self.r * t.cos(),
            ])
        }
        fn d1(&self, t: f64, p: f64) -> (DVector<f64>, DVector<f64>) {
            (
                DVector::from_row_slice(&[
                    self.r * t.cos() * p.cos(),
                    self.r * t.cos() * p.sin(),
                    -self.r * t.sin(),
                ]),
                DVector::from_row_slice(&[
                    -self.r * t.sin() * p.sin(),
                    self.r * t.sin() * p.cos(),
                    0.0,
                ]),
            )
        }
        fn d2(&self, t: f64, p: f64) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
            let om = self.eval(t, p);
            let tp = DVector::from_row_slice(&[
                -self.r * t.cos() * p.sin(),
                self.r * t.cos() * p.cos(),
                0.0,
            ]);
            let mut pp = -om.clone();
            pp[2] = 0.0;
            (-om, tp, pp)
        }
    }
    let ball = ParametricPatch {
        sf: sf.clone(),
        chart: Box::new(SphereChart { r: sf.r_model }),
        t_range: (0.0, PI),
        edges: vec![BoundaryEdge { t_value: PI, outward: 1.0 }],
        exterior: false,
        cmc: None,
        contact_angle: None,
        orientation: 1.0,
        name: "ball_boundary".into(),
    };
    let mut worst: f64 = 0.0;
    let mut used = 0usize;
    let mut i = 0usize;
    while used < samples && i < samples * 20 {
        i += 1;
        // Low-discrepancy sweep of the sphere.
        let t = PI * (0.08 + 0.84 * ((i as f64 * 0.6180339887498949) % 1.0));
        let p = 2.0 * PI * ((i as f64 * 0.7548776662466927) % 1.0);
        let s = shape_at(&ball, t, p)?;
        let x = &s.position;
        let va = sf.va(x, a);
        if va.abs() <= 1e-8 {
            continue;
        }
        used += 1;
        // Orient h with the outward normal.
        let sign = sf.metric_dot(x, &s.nu, x).signum();
        let nbar_cart = x / (x.norm() * sf.conf(x));
        let dva_nbar = sf
            .potential_gradient(PotentialKind::Va(a), x)
            .dot(&nbar_cart);
        let ratio = dva_nbar / va;
        let resid = (s.h * sign - s.g * ratio).norm() / s.g.norm();
        worst = worst.max(resid);
    }
    if used == 0 {
        return Err(IdentityError::VaNearZero(0.0));
    }
    Ok(IdentityReport {
        id: "boundary_umbilic".into(),
        family: "ball_boundary".into(),
        curvature: sf.k(),
        theta: None,
        direction: a.iter().copied().collect(),
        levels: vec![LevelResult {
            level: 0,
            lhs: worst,
            rhs: 0.0,
            abs_residual: worst,
            rel_residual: worst,
        }],
        order: None,
        tol,
        pass: worst <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surfaces::{make_surface, Family, SurfaceSpec, PI};
    use approx::assert_relative_eq;

    fn dv(s: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(s)
    }

    fn cap(curv: Curvature, theta: f64) -> crate::geometry::ParametricPatch {
        let mut spec = SurfaceSpec::new(Family::SphericalCap, curv, 1.0);
        spec.contact_angle = theta;
        spec.cap_radius = if curv == Curvature::Flat { 0.8 } else { 0.3 };
        make_surface(&spec).unwrap()
    }

    #[test]
    fn minkowski_all_spaceforms_and_angles() {
        let a = dv(&[0.3, -0.2, 0.9]);
        for curv in [Curvature::Flat, Curvature::Hyperbolic, Curvature::Spherical] {
            for theta in [PI / 4.0, PI / 2.0, 3.0 * PI / 4.0] {
                let patch = cap(curv, theta);
                let rep = minkowski_residual(&patch, &a, 8, &[0, 1, 2], 1e-6).unwrap();
                assert!(rep.pass, "{:?} theta={theta}: {:?}", curv, rep.levels);
                assert!(rep.order.unwrap() >= 4.0 || rep.last_residual() < 1e-10);
            }
        }
    }

    #[test]
    fn minkowski_exterior_and_closed() {
        let a = dv(&[0.1, 0.2, 1.0]);
        for curv in [Curvature::Flat, Curvature::Hyperbolic, Curvature::Spherical] {
            let mut spec = SurfaceSpec::new(Family::ExteriorCap, curv, 1.0);
            spec.contact_angle = PI / 3.0;
            spec.cap_radius = if curv == Curvature::Flat { 0.5 } else { 0.15 };
            let patch = make_surface(&spec).unwrap();
            let rep = minkowski_residual(&patch, &a, 8, &[0, 1, 2], 1e-6).unwrap();
            assert!(rep.pass, "exterior {:?}: {:?}", curv, rep.levels);

            let mut spec = SurfaceSpec::new(Family::ClosedSphere, curv, 1.0);
            spec.cap_radius = if curv == Curvature::Flat { 0.4 } else { 0.2 };
            spec.center_offset = 0.1;
            let patch = make_surface(&spec).unwrap();
            let rep = minkowski_residual(&patch, &a, 8, &[0, 1, 2], 1e-6).unwrap();
            assert!(rep.pass, "closed {:?}: {:?}", curv, rep.levels);
        }
    }

    #[test]
    fn minkowski_trivial_on_flat_disk() {
        let patch = make_surface(&SurfaceSpec::new(Family::GeodesicDisk, Curvature::Flat, 1.0)).unwrap();
        // In-plane direction: the RHS vanishes identically (H = 0) and the
        // LHS vanishes by symmetry once the azimuthal rule resolves cos(p).
        let rep = minkowski_residual(&patch, &dv(&[1.0, 0.0, 0.0]), 8, &[0, 1, 2], 1e-6).unwrap();
        for l in &rep.levels {
            assert!(l.rhs.abs() < 1e-12);
        }
        assert!(rep.levels.last().unwrap().lhs.abs() < 1e-9);
    }

    #[test]
    fn higher_order_minkowski() {
        let a = dv(&[0.3, -0.1, 0.7]);
        for curv in [Curvature::Flat, Curvature::Hyperbolic, Curvature::Spherical] {
            let patch = cap(curv, PI / 2.0);
            for k in [1usize, 2] {
                let rep = minkowski_higher(&patch, &a, k, 8, &[0, 1, 2], 1e-6).unwrap();
                assert!(rep.pass, "{:?} k={k}: {:?}", curv, rep.levels);
            }
            // k = 1 coincides with the capillary formula up to the factor n.
            let rep1 = minkowski_higher(&patch, &a, 1, 8, &[2], 1e-6).unwrap();
            let rep_m = minkowski_residual(&patch, &a, 8, &[2], 1e-6).unwrap();
            assert_relative_eq!(
                2.0 * rep1.levels[0].lhs,
                rep_m.levels[0].lhs,
                epsilon = 1e-12
            );
        }
        // Non-orthogonal angle is rejected.
        let patch = cap(Curvature::Flat, PI / 3.0);
        assert!(minkowski_higher(&patch, &a, 2, 8, &[1], 1e-6).is_err());
    }

    #[test]
    fn balance_identity_all_spaceforms() {
        let a = dv(&[0.4, 0.1, -0.8]);
        for curv in [Curvature::Flat, Curvature::Hyperbolic, Curvature::Spherical] {
            for theta in [PI / 3.0, PI / 2.0] {
                let patch = cap(curv, theta);
                let rep = balance_residual(&patch, &a, 8, &[0, 1, 2], 1e-7).unwrap();
                assert!(rep.pass, "{:?} theta={theta}: {:?}", curv, rep.levels);
            }
        }
        // Exterior cap.
        let mut spec = SurfaceSpec::new(Family::ExteriorCap, Curvature::Hyperbolic, 1.0);
        spec.contact_angle = 1.2;
        spec.cap_radius = 0.15;
        let patch = make_surface(&spec).unwrap();
        let rep = balance_residual(&patch, &a, 8, &[0, 1, 2], 1e-7).unwrap();
        assert!(rep.pass, "exterior balance: {:?}", rep.levels);
        // Flat disk, a = e3 (normal): n * area = oint <nubar, a>.
        let patch = make_surface(&SurfaceSpec::new(Family::GeodesicDisk, Curvature::Flat, 1.0)).unwrap();
        let rep = balance_residual(&patch, &dv(&[0.0, 0.0, 1.0]), 8, &[1], 1e-9).unwrap();
        assert!(rep.pass);
        assert_relative_eq!(rep.levels[0].lhs, 2.0 * PI, epsilon = 1e-9);
    }

    #[test]
    fn laplacian_identities_on_cmc_caps() {
        let a = dv(&[0.25, -0.45, 0.8]);
        for curv in [Curvature::Flat, Curvature::Hyperbolic, Curvature::Spherical] {
            let patch = cap(curv, PI / 3.0);
            let mut whichs = vec![
                LaplacianWhich::EqX0H,
                LaplacianWhich::EqXH,
                LaplacianWhich::EqXnuH,
                LaplacianWhich::EqXnuFieldH,
                LaplacianWhich::EqYnuH,
                LaplacianWhich::EqPhi,
                LaplacianWhich::StabEq4,
            ];
            if curv == Curvature::Flat {
                whichs.extend([
                    LaplacianWhich::EqX,
                    LaplacianWhich::EqX2,
                    LaplacianWhich::EqNu,
                    LaplacianWhich::EqXnu,
                    LaplacianWhich::EqXnuField,
                ]);
            }
            for which in whichs {
                let rep = laplacian_identity_residual(&patch, &a, which, 1e-6).unwrap();
                assert!(
                    rep.pass,
                    "{:?} {:?}: residual {}",
                    curv,
                    which,
                    rep.last_residual()
                );
            }
        }
    }

    #[test]
    fn laplacian_identities_on_non_umbilic_and_non_cmc() {
        let a = dv(&[0.3, 0.2, 0.85]);
        // Unduloid: CMC but non-umbilic (the phi identity has a nonzero RHS).
        let mut spec = SurfaceSpec::new(Family::UnduloidPiece, Curvature::Flat, 1.0);
        spec.h_target = 3.0;
        let undu = make_surface(&spec).unwrap();
        for which in [
            LaplacianWhich::EqX,
            LaplacianWhich::EqXnu,
            LaplacianWhich::EqXnuField,
            LaplacianWhich::EqPhi,
            LaplacianWhich::StabEq4,
        ] {
            // The unduloid chart interpolates an ODE table, which caps the
            // attainable FD accuracy slightly below the analytic charts'.
            let rep = laplacian_identity_residual(&undu, &a, which, 2e-5).unwrap();
            assert!(rep.pass, "unduloid {:?}: {}", which, rep.last_residual());
        }
        // Perturbed cap: non-CMC, exercises the grad-H terms.
        let mut spec = SurfaceSpec::new(Family::PerturbedCap, Curvature::Flat, 1.0);
        spec.contact_angle = 1.1;
        spec.cap_radius = 0.7;
        spec.amplitude = 0.05;
        let pert = make_surface(&spec).unwrap();
        for which in [
            LaplacianWhich::EqX,
            LaplacianWhich::EqX2,
            LaplacianWhich::EqNu,
            LaplacianWhich::EqXnu,
            LaplacianWhich::EqXnuField,
        ] {
            let rep = laplacian_identity_residual(&pert, &a, which, 5e-6).unwrap();
            assert!(rep.pass, "perturbed {:?}: {}", which, rep.last_residual());
        }
        // CMC-only identities refuse non-CMC patches.
        assert!(matches!(
            laplacian_identity_residual(&pert, &a, LaplacianWhich::EqPhi, 1e-6),
            Err(IdentityError::CmcRequired(_))
        ));
    }

    #[test]
    fn robin_identities() {
        let a = dv(&[0.2, -0.4, 0.8]);
        for curv in [Curvature::Flat, Curvature::Hyperbolic, Curvature::Spherical] {
            let patch = cap(curv, PI / 3.0);
            let rep = robin_residual(&patch, &a, 12, 1e-7).unwrap();
            assert!(rep.pass, "{:?}: {}", curv, rep.last_residual());
            // Exterior.
            let mut spec = SurfaceSpec::new(Family::ExteriorCap, curv, 1.0);
            spec.contact_angle = 2.0 * PI / 5.0;
            spec.cap_radius = if curv == Curvature::Flat { 0.5 } else { 0.15 };
            let patch = make_surface(&spec).unwrap();
            let rep = robin_residual(&patch, &a, 12, 1e-7).unwrap();
            assert!(rep.pass, "exterior {:?}: {}", curv, rep.last_residual());
        }
    }

    #[test]
    fn robin_coefficient_special_values() {
        // K = 0, theta = pi/2: q = 1 exactly.
        let patch = cap(Curvature::Flat, PI / 2.0);
        let f = crate::geometry::boundary_frame_at(&patch, 0, 0.0).unwrap();
        assert_relative_eq!(robin_coefficient(&patch, PI / 2.0, f.h_mu_mu), 1.0, epsilon = 1e-14);
        // K = -1, theta = pi/2: q = coth R.
        let patch = cap(Curvature::Hyperbolic, PI / 2.0);
        let f = crate::geometry::boundary_frame_at(&patch, 0, 0.0).unwrap();
        assert_relative_eq!(
            robin_coefficient(&patch, PI / 2.0, f.h_mu_mu),
            1.0 / 1.0f64.tanh(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn phi_a_mean_zero_and_linearity() {
        for curv in [Curvature::Flat, Curvature::Hyperbolic, Curvature::Spherical] {
            let patch = cap(curv, PI / 4.0);
            let a = dv(&[0.5, 0.3, -0.9]);
            let (_, rep) = phi_test_function(&patch, &a, 8, 2, 1e-8).unwrap();
            assert!(rep.pass, "{:?}: {}", curv, rep.last_residual());
        }
        // a = 0 gives phi identically zero.
        let patch = cap(Curvature::Flat, PI / 4.0);
        let (v, _) = phi_test_function(&patch, &dv(&[0.0, 0.0, 0.0]), 8, 1, 1e-8).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn aux_phi_residuals() {
        for curv in [Curvature::Flat, Curvature::Hyperbolic, Curvature::Spherical] {
            let patch = cap(curv, PI / 3.0);
            let (boundary, interior) = aux_phi_residual(&patch, 1e-9, 1e-6).unwrap();
            assert!(boundary.pass, "{:?} boundary: {}", curv, boundary.last_residual());
            assert!(interior.pass, "{:?} interior: {}", curv, interior.last_residual());
        }
        // Flat disk through origin at theta = pi/2: Phi vanishes pointwise.
        let patch = make_surface(&SurfaceSpec::new(Family::GeodesicDisk, Curvature::Flat, 1.0)).unwrap();
        let s = shape_at(&patch, 0.4, 1.0).unwrap();
        assert!(aux_phi_at(&patch, &s, 0.0).abs() < 1e-14);
        // Exterior cap: Phi still vanishes on the boundary.
        let mut spec = SurfaceSpec::new(Family::ExteriorCap, Curvature::Hyperbolic, 1.0);
        spec.contact_angle = 1.0;
        spec.cap_radius = 0.15;
        let patch = make_surface(&spec).unwrap();
        let (boundary, _) = aux_phi_residual(&patch, 1e-9, 1e-5).unwrap();
        assert!(boundary.pass, "exterior Phi boundary: {}", boundary.last_residual());
    }

    #[test]
    fn boundary_umbilicity() {
        let a = dv(&[0.3, 0.3, 0.9]);
        for (curv, ratio) in [
            (Curvature::Flat, 1.0),
            (Curvature::Hyperbolic, 1.0 / 1.0f64.tanh()),
            (Curvature::Spherical, 1.0 / (PI / 3.0).tan()),
        ] {
            let radius = if curv == Curvature::Spherical { PI / 3.0 } else { 1.0 };
            let sf = SpaceForm::new(curv, radius, 2).unwrap();
            let rep = boundary_umbilic_residual(&sf, &a, 100, 1e-10).unwrap();
            assert!(rep.pass, "{:?}: {}", curv, rep.last_residual());
            assert_relative_eq!(boundary_umbilic_curvature(&sf), ratio, epsilon = 1e-14);
        }
    }

    #[test]
    fn linearity_in_direction() {
        let patch = cap(Curvature::Hyperbolic, PI / 3.0);
        let a1 = dv(&[0.5, 0.0, 0.3]);
        let a2 = dv(&[-0.2, 0.4, 0.1]);
        let sum = &a1 + &a2;
        let r1 = minkowski_residual(&patch, &a1, 8, &[2], 1e-6).unwrap();
        let r2 = minkowski_residual(&patch, &a2, 8, &[2], 1e-6).unwrap();
        let rs = minkowski_residual(&patch, &sum, 8, &[2], 1e-6).unwrap();
        assert!(
            rs.levels[0].abs_residual
                <= r1.levels[0].abs_residual + r2.levels[0].abs_residual + 1e-12
        );
        assert_relative_eq!(
            rs.levels[0].lhs,
            r1.levels[0].lhs + r2.levels[0].lhs,
            epsilon = 1e-12
        );
    }
}
