//! Heintze-Karcher-Ros machinery: the weighted volume `int_Omega V_a`,
//! computed both through the divergence identity and by direct solid
//! quadrature, the HKR inequality check with its hypothesis gate, the
//! Alexandrov consistency chain, and the radial solutions of
//! `Delta f + K (n+1) f = 1` with the model distance formulas.

use crate::geometry::ParametricPatch;
use crate::quadrature::{build_grid, gauss_legendre, integrate_interior};
use crate::spaceform::{Curvature, SpaceForm};
use crate::stability::StabilityError;
use nalgebra::DVector;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum HkrError {
    #[error("quadrature: {0}")]
    Quadrature(#[from] crate::quadrature::QuadratureError),
    #[error("geometry: {0}")]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error("{0}")]
    Stability(#[from] StabilityError),
    #[error("patch is not an origin-axis sphere cap: {0}")]
    NotACap(String),
    #[error("operation requires a CMC patch")]
    CmcRequired,
}

/// Weighted enclosed volume `int_Omega V_a dOmega` via the divergence
/// identity `div X_a = (n+1) V_a` (the flux of `X_a` through the wetted part
/// of the ball boundary vanishes; `nu` is outward for `H >= 0` caps).
pub fn volume_potential_integral(
    patch: &ParametricPatch,
    a: &DVector<f64>,
    rule_order: usize,
    level: usize,
) -> Result<f64, HkrError> {
    let sf = &patch.sf;
    let grid = build_grid(patch, rule_order, level)?;
    let flux = integrate_interior(&grid, |node| {
        let s = &node.sample;
        sf.metric_dot(&s.position, &sf.xa(&s.position, a), &s.nu)
    })?;
    Ok(flux / (sf.ambient_dim() as f64))
}

/// Euclidean center height `d` and radius `rho` of the sphere carrying an
/// axisymmetric cap patch, recovered from three chart samples.
pub fn cap_parameters(patch: &ParametricPatch) -> Result<(f64, f64), HkrError> {
    let (t0, t1) = patch.t_range;
    let probe = |f: f64| patch.chart.eval(t0 + f * (t1 - t0), 0.0);
    let (x1, x2, x3) = (probe(0.1), probe(0.5), probe(0.9));
    let dz = x1[2] - x2[2];
    if dz.abs() < 1e-12 {
        return Err(HkrError::NotACap("degenerate axis samples".into()));
    }
    let d = (x1.norm_squared() - x2.norm_squared()) / (2.0 * dz);
    let rho2 = x1.norm_squared() - 2.0 * x1[2] * d + d * d;
    if rho2 <= 0.0 {
        return Err(HkrError::NotACap("negative squared radius".into()));
    }
    let rho = rho2.sqrt();
    let check = (x3.norm_squared() - 2.0 * x3[2] * d + d * d).sqrt();
    if (check - rho).abs() > 1e-9 * rho.max(1.0) {
        return Err(HkrError::NotACap(format!(
            "samples deviate from a sphere by {:.3e}",
            (check - rho).abs()
        )));
    }
    Ok((d, rho))
}

/// Direct solid quadrature of `int_Omega V_a dOmega` for an interior cap and
/// the axis direction `a = e3`: the lens `Omega = B cap {inside cap sphere}`
/// in cylindrical model coordinates, `dOmega = e^{3u} dx^3`.
pub fn volume_direct_oracle(
    patch: &ParametricPatch,
    rule_order: usize,
    level: usize,
) -> Result<f64, HkrError> {
    if patch.exterior {
        return Err(HkrError::NotACap("exterior patch".into()));
    }
    let sf = &patch.sf;
    let (d, rho) = cap_parameters(patch)?;
    let rm = sf.r_model;
    let z_lo = d - rho;
    // Height of the contact circle: lens profile switches from the cap
    // sphere to the ball there.
    let z_mid = (rm * rm - rho * rho + d * d) / (2.0 * d);
    let points = (rule_order + 2) / 2;
    let (xs, ws) = gauss_legendre(points);
    let panels = 2usize << level;
    let mut sum = 0.0;
    let mut sub = |za: f64, zb: f64, bound: &dyn Fn(f64) -> f64| {
        for pz in 0..panels {
            let (a0, b0) = (
                za + (zb - za) * pz as f64 / panels as f64,
                za + (zb - za) * (pz + 1) as f64 / panels as f64,
            );
            for (xi, wi) in xs.iter().zip(&ws) {
                let z = 0.5 * (a0 + b0) + 0.5 * (b0 - a0) * xi;
                let wz = wi * 0.5 * (b0 - a0);
                let r_max = bound(z);
                for pr in 0..panels {
                    let (c0, c1) = (
                        r_max * pr as f64 / panels as f64,
                        r_max * (pr + 1) as f64 / panels as f64,
                    );
                    for (xj, wj) in xs.iter().zip(&ws) {
                        let r = 0.5 * (c0 + c1) + 0.5 * (c1 - c0) * xj;
                        let wr = wj * 0.5 * (c1 - c0);
                        let x = DVector::from_row_slice(&[r, 0.0, z]);
                        let e = sf.conf(&x);
                        sum += wz * wr * 2.0 * std::f64::consts::PI * r * e.powi(4) * z;
                    }
                }
            }
        }
    };
    sub(z_lo, z_mid, &|z: f64| {
        (rho * rho - (z - d) * (z - d)).max(0.0).sqrt()
    });
    sub(z_mid, rm, &|z: f64| (rm * rm - z * z).max(0.0).sqrt());
    Ok(sum)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HkrVerdict {
    Equality,
    StrictInequality,
    Violation,
    Refused,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct HkrReport {
    pub family: String,
    pub curvature: f64,
    /// `int_Sigma V_a / H dA` (pointwise mean curvature).
    pub lhs: f64,
    /// `((n+1)/n) int_Omega V_a dOmega` (divergence route).
    pub rhs: f64,
    pub margin: f64,
    pub rel_margin: f64,
    pub min_mean_curvature: f64,
    pub min_potential: f64,
    pub verdict: HkrVerdict,
    pub refusal: Option<String>,
    pub tol: f64,
}

/// Heintze-Karcher-Ros check: `int V_a/H dA >= ((n+1)/n) int_Omega V_a`.
/// Refuses (without computing a verdict on the inequality) when the
/// hypotheses `H > 0` pointwise or `V_a >= 0` on the surface fail.
pub fn hkr_check(
    patch: &ParametricPatch,
    a: &DVector<f64>,
    rule_order: usize,
    level: usize,
    tol: f64,
) -> Result<HkrReport, HkrError> {
    let sf = &patch.sf;
    let n = sf.n as f64;
    let grid = build_grid(patch, rule_order, level)?;
    let mut min_h = f64::INFINITY;
    let mut min_va = f64::INFINITY;
    for node in &grid.interior {
        min_h = min_h.min(node.sample.mean_curvature);
        min_va = min_va.min(sf.va(&node.sample.position, a));
    }
    let mut report = HkrReport {
        family: patch.name.clone(),
        curvature: sf.k(),
        lhs: f64::NAN,
        rhs: f64::NAN,
        margin: f64::NAN,
        rel_margin: f64::NAN,
        min_mean_curvature: min_h,
        min_potential: min_va,
        verdict: HkrVerdict::Refused,
        refusal: None,
        tol,
    };
    if !(min_h > 0.0) {
        report.refusal = Some(format!(
            "mean curvature is not strictly positive (min H = {min_h:.3e})"
        ));
        return Ok(report);
    }
    if min_va < -1e-10 {
        report.refusal = Some(format!(
            "potential V_a is negative on the surface (min V_a = {min_va:.3e})"
        ));
        return Ok(report);
    }
    let lhs = integrate_interior(&grid, |node| {
        let s = &node.sample;
        sf.va(&s.position, a) / s.mean_curvature
    })?;
    let rhs = (n + 1.0) / n * volume_potential_integral(patch, a, rule_order, level)?;
    let margin = lhs - rhs;
    let rel = margin / lhs.abs().max(rhs.abs()).max(1e-14);
    report.lhs = lhs;
    report.rhs = rhs;
    report.margin = margin;
    report.rel_margin = rel;
    report.verdict = if rel.abs() <= tol {
        HkrVerdict::Equality
    } else if rel > 0.0 {
        HkrVerdict::StrictInequality
    } else {
        HkrVerdict::Violation
    };
    Ok(report)
}

/// Alexandrov chain on a CMC patch: returns
/// `((n+1) int_Omega V_a, (n/H) int_Sigma V_a)`, which coincide exactly for
/// free-boundary CMC surfaces. For `H = 0` the chain degenerates to the
/// Minkowski balance, so both Minkowski sides are returned instead.
pub fn alexandrov_consistency(
    patch: &ParametricPatch,
    a: &DVector<f64>,
    rule_order: usize,
    level: usize,
) -> Result<(f64, f64), HkrError> {
    let sf = &patch.sf;
    let n = sf.n as f64;
    let h = patch.cmc.ok_or(HkrError::CmcRequired)?;
    let grid = build_grid(patch, rule_order, level)?;
    if h == 0.0 {
        let lhs = integrate_interior(&grid, |node| n * sf.va(&node.sample.position, a))?;
        let rhs = integrate_interior(&grid, |node| {
            let s = &node.sample;
            s.mean_curvature * sf.metric_dot(&s.position, &sf.xa(&s.position, a), &s.nu)
        })?;
        return Ok((lhs, rhs));
    }
    let lhs = (n + 1.0) * volume_potential_integral(patch, a, rule_order, level)?;
    let rhs = n / h * integrate_interior(&grid, |node| sf.va(&node.sample.position, a))?;
    Ok((lhs, rhs))
}

// ---------------------------------------------------------------------------
// Radial solutions and model distance formulas
// ---------------------------------------------------------------------------

/// Geodesic distance between interior model points.
pub fn geodesic_distance(curv: Curvature, x: &DVector<f64>, p: &DVector<f64>) -> f64 {
    match curv {
        Curvature::Flat => (x - p).norm(),
        Curvature::Hyperbolic => {
            let num = 2.0 * (x - p).norm_squared();
            let den = (1.0 - x.norm_squared()) * (1.0 - p.norm_squared());
            (1.0 + num / den).acosh()
        }
        Curvature::Spherical => {
            let num = (1.0 - x.norm_squared()) * (1.0 - p.norm_squared()) + 4.0 * x.dot(p);
            let den = (1.0 + x.norm_squared()) * (1.0 + p.norm_squared());
            (num / den).clamp(-1.0, 1.0).acos()
        }
    }
}

/// Radial solution `f(d)` of `Delta f + K (n+1) f = 1` in the ambient space
/// form of dimension `n + 1`, with `(f, f', f'')`.
pub fn radial_solution(curv: Curvature, dim: usize, d: f64) -> (f64, f64, f64) {
    let m = dim as f64;
    match curv {
        Curvature::Flat => (d * d / (2.0 * m), d / m, 1.0 / m),
        Curvature::Hyperbolic => (d.cosh() - 1.0 / m, d.sinh(), d.cosh()),
        Curvature::Spherical => (d.cos() + 1.0 / m, -d.sin(), -d.cos()),
    }
}

/// Residual of the radial equation `f'' + (m-1) c(d) f' + K m f - 1` using
/// the closed-form radial Laplacian, at distances realized by the model
/// distance formulas between random interior points.
pub fn radial_solution_residual(sf: &SpaceForm, samples: usize, seed: u64) -> f64 {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let m = sf.ambient_dim() as f64;
    let k = sf.k();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let x = crate::spaceform::sample_interior_point(sf, &mut rng);
        let p = crate::spaceform::sample_interior_point(sf, &mut rng);
        let d = geodesic_distance(sf.curv, &x, &p);
        if d < 1e-3 {
            continue;
        }
        let (f, df, d2f) = radial_solution(sf.curv, sf.ambient_dim(), d);
        let cot = match sf.curv {
            Curvature::Flat => 1.0 / d,
            Curvature::Hyperbolic => 1.0 / d.tanh(),
            Curvature::Spherical => 1.0 / d.tan(),
        };
        let resid = d2f + (m - 1.0) * cot * df + k * m * f - 1.0;
        worst = worst.max(resid.abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surfaces::{make_surface, Family, SurfaceSpec, PI};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;

    fn axis() -> DVector<f64> {
        DVector::from_row_slice(&[0.0, 0.0, 1.0])
    }

    fn cap(curv: Curvature, theta: f64, rho: f64) -> ParametricPatch {
        let mut spec = SurfaceSpec::new(Family::SphericalCap, curv, 1.0);
        spec.contact_angle = theta;
        spec.cap_radius = rho;
        make_surface(&spec).unwrap()
    }

    #[test]
    fn volume_routes_agree() {
        for (curv, rho) in [
            (Curvature::Flat, 1.0),
            (Curvature::Flat, 0.6),
            (Curvature::Hyperbolic, 0.3),
            (Curvature::Spherical, 0.3),
        ] {
            let patch = cap(curv, PI / 2.0, rho);
            let div = volume_potential_integral(&patch, &axis(), 8, 2).unwrap();
            let direct = volume_direct_oracle(&patch, 12, 3).unwrap();
            assert_relative_eq!(div, direct, max_relative = 1e-5);
        }
        // Non-orthogonal angle too.
        let patch = cap(Curvature::Flat, PI / 3.0, 0.8);
        let div = volume_potential_integral(&patch, &axis(), 8, 2).unwrap();
        let direct = volume_direct_oracle(&patch, 12, 3).unwrap();
        assert_relative_eq!(div, direct, max_relative = 1e-5);
    }

    #[test]
    fn flat_orthogonal_cap_volume_closed_form() {
        // rho = 1 free-boundary cap: the lens is the unit ball above
        // z = sqrt(2) - 1 cut by the cap sphere; check against the exact
        // divergence value instead of re-deriving: int <X_a, nu> over the cap.
        let patch = cap(Curvature::Flat, PI / 2.0, 1.0);
        let div = volume_potential_integral(&patch, &axis(), 8, 3).unwrap();
        // Exact lens-weighted volume for rho = 1, d = sqrt(2):
        // int_Omega z dV evaluated in closed form.
        let d: f64 = 2.0f64.sqrt();
        let z_mid = (1.0 - 1.0 + d * d) / (2.0 * d); // = d/2
        let z_lo = d - 1.0;
        // int z * pi * r_max(z)^2 dz piecewise.
        let seg1 = |z: f64| {
            // bound rho^2 - (z-d)^2 = 1 - (z-d)^2, antiderivative of z(1-(z-d)^2)
            let u = z - d;
            PI * (0.5 * z * z - (0.25 * u * u * u * u + d * u * u * u / 3.0))
        };
        let seg2 = |z: f64| PI * (0.5 * z * z - 0.25 * z * z * z * z);
        let exact = (seg1(z_mid) - seg1(z_lo)) + (seg2(1.0) - seg2(z_mid));
        assert_relative_eq!(div, exact, max_relative = 1e-9);
    }

    #[test]
    fn hkr_equality_on_orthogonal_caps() {
        for (curv, rho) in [
            (Curvature::Flat, 1.0),
            (Curvature::Hyperbolic, 0.3),
            (Curvature::Spherical, 0.3),
        ] {
            let patch = cap(curv, PI / 2.0, rho);
            let rep = hkr_check(&patch, &axis(), 8, 2, 1e-6).unwrap();
            assert_eq!(rep.verdict, HkrVerdict::Equality, "{:?}: {:?}", curv, rep);
        }
    }

    #[test]
    fn hkr_strict_on_non_orthogonal_and_perturbed() {
        let tol = 1e-6;
        let patch = cap(Curvature::Flat, PI / 3.0, 0.8);
        let rep = hkr_check(&patch, &axis(), 8, 2, tol).unwrap();
        assert_eq!(rep.verdict, HkrVerdict::StrictInequality);
        assert!(rep.rel_margin > 10.0 * tol, "margin {}", rep.rel_margin);

        let mut spec = SurfaceSpec::new(Family::PerturbedCap, Curvature::Flat, 1.0);
        spec.cap_radius = 1.0;
        spec.amplitude = 0.02;
        let patch = make_surface(&spec).unwrap();
        let rep = hkr_check(&patch, &axis(), 8, 2, tol).unwrap();
        assert!(rep.min_mean_curvature > 0.0);
        assert_eq!(rep.verdict, HkrVerdict::StrictInequality);
        assert!(rep.rel_margin > 10.0 * tol, "margin {}", rep.rel_margin);
    }

    #[test]
    fn hkr_refusal_paths() {
        // Catenoid: H = 0 pointwise.
        let patch = make_surface(&SurfaceSpec::new(Family::CatenoidPiece, Curvature::Flat, 1.0)).unwrap();
        let rep = hkr_check(&patch, &axis(), 8, 1, 1e-6).unwrap();
        assert_eq!(rep.verdict, HkrVerdict::Refused);
        assert!(rep.refusal.as_deref().unwrap().contains("mean curvature"));
        // Unduloid: H > 0 but V_a changes sign along the axis.
        let mut spec = SurfaceSpec::new(Family::UnduloidPiece, Curvature::Flat, 1.0);
        spec.h_target = 3.0;
        let patch = make_surface(&spec).unwrap();
        let rep = hkr_check(&patch, &axis(), 8, 1, 1e-6).unwrap();
        assert_eq!(rep.verdict, HkrVerdict::Refused);
        assert!(rep.refusal.as_deref().unwrap().contains("V_a"));
    }

    #[test]
    fn hkr_margin_invariances() {
        let patch = cap(Curvature::Hyperbolic, PI / 3.0, 0.25);
        // Rotating a about the symmetry axis leaves every report field fixed.
        let a1 = DVector::from_row_slice(&[0.05, 0.0, 1.0]);
        let ang = 1.1f64;
        let a2 = DVector::from_row_slice(&[0.05 * ang.cos(), 0.05 * ang.sin(), 1.0]);
        let r1 = hkr_check(&patch, &a1, 8, 2, 1e-6).unwrap();
        let r2 = hkr_check(&patch, &a2, 8, 2, 1e-6).unwrap();
        assert_relative_eq!(r1.margin, r2.margin, epsilon = 1e-10);
        // Scaling a scales both sides linearly.
        let r4 = hkr_check(&patch, &(&a1 * 2.0), 8, 2, 1e-6).unwrap();
        assert_relative_eq!(r4.lhs, 2.0 * r1.lhs, epsilon = 1e-10);
        assert_relative_eq!(r4.rhs, 2.0 * r1.rhs, epsilon = 1e-10);
    }

    #[test]
    fn alexandrov_chain_matches_hkr_on_cmc_caps() {
        let patch = cap(Curvature::Spherical, PI / 2.0, 0.3);
        let (lhs, rhs) = alexandrov_consistency(&patch, &axis(), 8, 2).unwrap();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-8);
        // H = 0 branch returns the two Minkowski sides.
        let cat = make_surface(&SurfaceSpec::new(Family::CatenoidPiece, Curvature::Flat, 1.0)).unwrap();
        let (lhs, rhs) = alexandrov_consistency(&cat, &axis(), 8, 2).unwrap();
        assert!(rhs.abs() < 1e-10); // H = 0 kills the flux side
        assert_relative_eq!(lhs, 0.0, epsilon = 1e-8); // Minkowski forces the other
    }

    #[test]
    fn radial_solutions_satisfy_the_equation() {
        for curv in [Curvature::Flat, Curvature::Hyperbolic, Curvature::Spherical] {
            let sf = SpaceForm::new(curv, 1.0, 2).unwrap();
            let worst = radial_solution_residual(&sf, 500, 42);
            assert!(worst < 1e-9, "{:?}: {worst}", curv);
        }
    }

    #[test]
    fn distance_formulas_match_fd_conformal_laplacian() {
        // Independent oracle: the ambient Laplacian of f(d_p(x)) computed by
        // Cartesian finite differences of the conformal expression
        // e^{-2u} (Delta_flat F + (m-2) <grad u, grad F>).
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for curv in [Curvature::Flat, Curvature::Hyperbolic, Curvature::Spherical] {
            let sf = SpaceForm::new(curv, 1.0, 2).unwrap();
            let m = sf.ambient_dim();
            let k = sf.k();
            for _ in 0..25 {
                let x = crate::spaceform::sample_interior_point(&sf, &mut rng);
                let p = crate::spaceform::sample_interior_point(&sf, &mut rng);
                if geodesic_distance(curv, &x, &p) < 0.3 {
                    continue;
                }
                let f_at = |y: &DVector<f64>| {
                    radial_solution(curv, m, geodesic_distance(curv, y, &p)).0
                };
                let h = 1e-4;
                let mut lap_flat = 0.0;
                let mut grad_f = DVector::zeros(m);
                let f0 = f_at(&x);
                for j in 0..m {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[j] += h;
                    xm[j] -= h;
                    let (fp, fm) = (f_at(&xp), f_at(&xm));
                    lap_flat += (fp - 2.0 * f0 + fm) / (h * h);
                    grad_f[j] = (fp - fm) / (2.0 * h);
                }
                let e = sf.conf(&x);
                let lap_bar =
                    (lap_flat + (m as f64 - 2.0) * sf.grad_u(&x).dot(&grad_f)) / (e * e);
                let resid = lap_bar + k * m as f64 * f0 - 1.0;
                assert!(resid.abs() < 1e-5, "{:?}: {resid}", curv);
            }
        }
    }

    #[test]
    fn distance_formula_spot_checks() {
        // Hyperbolic distance from origin: d = 2 atanh(|x|).
        let x = DVector::from_row_slice(&[0.3, 0.0, 0.0]);
        let o = DVector::zeros(3);
        assert_relative_eq!(
            geodesic_distance(Curvature::Hyperbolic, &x, &o),
            2.0 * 0.3f64.atanh(),
            epsilon = 1e-12
        );
        // Spherical distance from origin: d = 2 atan(|x|).
        assert_relative_eq!(
            geodesic_distance(Curvature::Spherical, &x, &o),
            2.0 * 0.3f64.atan(),
            epsilon = 1e-12
        );
        // Symmetry and identity.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let sf = SpaceForm::new(Curvature::Hyperbolic, 1.0, 2).unwrap();
        for _ in 0..10 {
            let a = crate::spaceform::sample_interior_point(&sf, &mut rng);
            let b = crate::spaceform::sample_interior_point(&sf, &mut rng);
            assert_relative_eq!(
                geodesic_distance(Curvature::Hyperbolic, &a, &b),
                geodesic_distance(Curvature::Hyperbolic, &b, &a),
                epsilon = 1e-12
            );
            assert!(geodesic_distance(Curvature::Spherical, &a, &a) < 1e-7);
        }
        let _ = rng.gen_range(0..2);
    }

    #[test]
    fn cap_parameters_recover_the_construction() {
        let patch = cap(Curvature::Flat, PI / 3.0, 0.8);
        let (d, rho) = cap_parameters(&patch).unwrap();
        assert_relative_eq!(rho, 0.8, epsilon = 1e-10);
        let expect_d = (1.0 + 0.64 + 2.0 * 0.8 * (PI / 3.0).cos()).sqrt();
        assert_relative_eq!(d, expect_d, epsilon = 1e-10);
        // Unduloids are not spheres.
        let mut spec = SurfaceSpec::new(Family::UnduloidPiece, Curvature::Flat, 1.0);
        spec.h_target = 3.0;
        let undu = make_surface(&spec).unwrap();
        assert!(cap_parameters(&undu).is_err());
    }
}
