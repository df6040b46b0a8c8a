//! Factories for the analytic test families: geodesic disks, spherical caps
//! (interior and exterior), closed spheres, perturbed caps, and Delaunay
//! pieces (unduloid, catenoid) meeting the unit sphere orthogonally.

use crate::geometry::{shape_at, BoundaryEdge, Chart, ParametricPatch};
use crate::spaceform::{Curvature, SpaceForm, SpaceFormError};
use nalgebra::DVector;
use thiserror::Error;

pub const PI: f64 = std::f64::consts::PI;

#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    GeodesicDisk,
    SphericalCap,
    ExteriorCap,
    UnduloidPiece,
    CatenoidPiece,
    PerturbedCap,
    ClosedSphere,
}

#[derive(Error, Debug)]
pub enum SurfaceError {
    #[error("space form: {0}")]
    SpaceForm(#[from] SpaceFormError),
    #[error("infeasible geometry: {0}")]
    Infeasible(String),
    #[error("profile trimming failed: {0}")]
    Trimming(String),
    #[error("family {0:?} requires the Euclidean ball")]
    EuclideanOnly(Family),
}

/// Declarative description of a test surface; expressible in the CLI config.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct SurfaceSpec {
    pub family: Family,
    pub curv: Curvature,
    pub ball_radius: f64,
    /// Contact angle for cap families (radians).
    pub contact_angle: f64,
    /// Euclidean model radius of the cap sphere (cap / closed-sphere families).
    pub cap_radius: f64,
    /// Center offset along the axis for closed spheres.
    pub center_offset: f64,
    /// Target mean curvature for unduloid pieces (0 selects the catenoid).
    pub h_target: f64,
    /// Normalized neck radius in (0, 1); used as branch guess for unduloids.
    pub neck_param: f64,
    /// Normal-graph amplitude for perturbed caps.
    pub amplitude: f64,
    pub name: String,
}

impl SurfaceSpec {
    pub fn new(family: Family, curv: Curvature, ball_radius: f64) -> Self {
        SurfaceSpec {
            family,
            curv,
            ball_radius,
            contact_angle: PI / 2.0,
            cap_radius: 0.5,
            center_offset: 0.0,
            h_target: 2.5,
            neck_param: 0.3,
            amplitude: 0.05,
            name: String::new(),
        }
    }

    fn label(&self) -> String {
        if !self.name.is_empty() {
            return self.name.clone();
        }
        format!("{:?}(K={})", self.family, self.curv.k())
    }
}

// ---------------------------------------------------------------------------
// Charts
// ---------------------------------------------------------------------------

/// Sphere centered at `(0, 0, d)` of Euclidean radius `rho`; `pole = -1`
/// starts the colatitude at the pole nearest the origin.
struct CapChart {
    rho: f64,
    d: f64,
    pole: f64,
}

impl CapChart {
    fn omega(&self, t: f64, p: f64) -> DVector<f64> {
        DVector::from_row_slice(&[t.sin() * p.cos(), t.sin() * p.sin(), self.pole * t.cos()])
    }
    fn omega_t(&self, t: f64, p: f64) -> DVector<f64> {
        DVector::from_row_slice(&[t.cos() * p.cos(), t.cos() * p.sin(), -self.pole * t.sin()])
    }
    fn omega_p(&self, t: f64, p: f64) -> DVector<f64> {
        DVector::from_row_slice(&[-t.sin() * p.sin(), t.sin() * p.cos(), 0.0])
    }
    fn omega_tp(&self, t: f64, p: f64) -> DVector<f64> {
        DVector::from_row_slice(&[-t.cos() * p.sin(), t.cos() * p.cos(), 0.0])
    }
}

impl Chart for CapChart {
    fn eval(&self, t: f64, p: f64) -> DVector<f64> {
        let mut x = self.omega(t, p) * self.rho;
        x[2] += self.d;
        x
    }
    fn d1(&self, t: f64, p: f64) -> (DVector<f64>, DVector<f64>) {
        (self.omega_t(t, p) * self.rho, self.omega_p(t, p) * self.rho)
    }
    fn d2(&self, t: f64, p: f64) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        // omega_tt = -omega; omega_pp = -omega with the axis component zeroed.
        let tt = self.omega(t, p) * (-self.rho);
        let tp = self.omega_tp(t, p) * self.rho;
        let mut pp = self.omega(t, p) * (-self.rho);
        pp[2] = 0.0;
        (tt, tp, pp)
    }
}

/// Flat disk through the origin with normal e3: x = (t cos p, t sin p, 0).
struct DiskChart;

impl Chart for DiskChart {
    fn eval(&self, t: f64, p: f64) -> DVector<f64> {
        DVector::from_row_slice(&[t * p.cos(), t * p.sin(), 0.0])
    }
    fn d1(&self, t: f64, p: f64) -> (DVector<f64>, DVector<f64>) {
        (
            DVector::from_row_slice(&[p.cos(), p.sin(), 0.0]),
            DVector::from_row_slice(&[-t * p.sin(), t * p.cos(), 0.0]),
        )
    }
    fn d2(&self, t: f64, p: f64) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        (
            DVector::zeros(3),
            DVector::from_row_slice(&[-p.sin(), p.cos(), 0.0]),
            DVector::from_row_slice(&[-t * p.cos(), -t * p.sin(), 0.0]),
        )
    }
}

/// Radial graph over a cap sphere: x = c + (rho + A b(t)) omega(t, p) with
/// b = sin^2(pi t / t_max); b and b' vanish at both ends, so the boundary
/// circle and contact angle of the base cap are preserved.
struct PerturbedCapChart {
    base: CapChart,
    amplitude: f64,
    t_max: f64,
}

impl PerturbedCapChart {
    fn radial(&self, t: f64) -> (f64, f64, f64) {
        let w = PI / self.t_max;
        let b = (w * t).sin().powi(2);
        let db = w * (2.0 * w * t).sin();
        let d2b = 2.0 * w * w * (2.0 * w * t).cos();
        (
            self.base.rho + self.amplitude * b,
            self.amplitude * db,
            self.amplitude * d2b,
        )
    }
}

impl Chart for PerturbedCapChart {
    fn eval(&self, t: f64, p: f64) -> DVector<f64> {
        let (r, _, _) = self.radial(t);
        let mut x = self.base.omega(t, p) * r;
        x[2] += self.base.d;
        x
    }
    fn d1(&self, t: f64, p: f64) -> (DVector<f64>, DVector<f64>) {
        let (r, dr, _) = self.radial(t);
        (
            self.base.omega(t, p) * dr + self.base.omega_t(t, p) * r,
            self.base.omega_p(t, p) * r,
        )
    }
    fn d2(&self, t: f64, p: f64) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let (r, dr, d2r) = self.radial(t);
        let om = self.base.omega(t, p);
        let om_t = self.base.omega_t(t, p);
        let tt = &om * (d2r - r) + om_t * (2.0 * dr);
        let tp = self.base.omega_tp(t, p) * r + self.base.omega_p(t, p) * dr;
        let mut pp = &om * (-r);
        pp[2] = 0.0;
        (tt, tp, pp)
    }
}

// ---------------------------------------------------------------------------
// Axisymmetric CMC profiles (Delaunay pieces)
// ---------------------------------------------------------------------------

/// Profile curve `s -> (r(s), z(s))` of a surface of revolution, with two
/// derivatives. The parameter is symmetric about `s = 0`.
pub trait Profile: Sync + Send {
    /// Returns `(r, z, r', z', r'', z'')` at `s`.
    fn eval(&self, s: f64) -> [f64; 6];
    /// Half-length of the trimmed parameter interval.
    fn s_star(&self) -> f64;
    /// Mean curvature of the revolved, rescaled surface.
    fn mean_curvature(&self) -> f64;
}

struct RevolutionChart<P: Profile + ?Sized> {
    profile: Box<P>,
}

impl<P: Profile + ?Sized> Chart for RevolutionChart<P> {
    fn eval(&self, t: f64, p: f64) -> DVector<f64> {
        let [r, z, ..] = self.profile.eval(t);
        DVector::from_row_slice(&[r * p.cos(), r * p.sin(), z])
    }
    fn d1(&self, t: f64, p: f64) -> (DVector<f64>, DVector<f64>) {
        let [r, _, dr, dz, _, _] = self.profile.eval(t);
        (
            DVector::from_row_slice(&[dr * p.cos(), dr * p.sin(), dz]),
            DVector::from_row_slice(&[-r * p.sin(), r * p.cos(), 0.0]),
        )
    }
    fn d2(&self, t: f64, p: f64) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let [r, _, dr, _, d2r, d2z] = self.profile.eval(t);
        (
            DVector::from_row_slice(&[d2r * p.cos(), d2r * p.sin(), d2z]),
            DVector::from_row_slice(&[-dr * p.sin(), dr * p.cos(), 0.0]),
            DVector::from_row_slice(&[-r * p.cos(), -r * p.sin(), 0.0]),
        )
    }
}

/// Trimmed and rescaled unduloid piece, symmetric about a bulge, stored as a
/// dense fixed-step RK4 table with quintic Hermite evaluation.
pub struct CmcProfile {
    /// States `(r, z, psi)` at `s = i * step` (unscaled arclength, H = 1).
    table: Vec<[f64; 3]>,
    step: f64,
    /// Rescale factor applied to positions (1 / distance of the trim point).
    scale: f64,
    s_star: f64,
    h_out: f64,
    /// Normalized neck radius of the underlying unduloid.
    pub neck_radius: f64,
}

fn unduloid_rhs(st: [f64; 3]) -> [f64; 3] {
    let [r, _, psi] = st;
    [psi.cos(), psi.sin(), 1.0 - psi.sin() / r]
}

fn rk4_step(st: [f64; 3], h: f64) -> [f64; 3] {
    let add = |a: [f64; 3], b: [f64; 3], c: f64| [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2]];
    let k1 = unduloid_rhs(st);
    let k2 = unduloid_rhs(add(st, k1, h / 2.0));
    let k3 = unduloid_rhs(add(st, k2, h / 2.0));
    let k4 = unduloid_rhs(add(st, k3, h));
    [
        st[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        st[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        st[2] + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    ]
}

impl CmcProfile {
    /// Integrate an H = 1 unduloid from its bulge (`r = 2 - tau`) and trim at
    /// the first point where the revolved surface meets the sphere through
    /// the trim point orthogonally (position parallel to the profile tangent).
    fn build(tau: f64, span: f64) -> Result<CmcProfile, SurfaceError> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(SurfaceError::Infeasible(format!(
                "normalized neck radius {tau} outside (0, 1)"
            )));
        }
        let step = 1e-3;
        let mut table = vec![[2.0 - tau, 0.0, PI / 2.0]];
        let f_of = |st: [f64; 3]| st[0] * st[2].sin() - st[1] * st[2].cos();
        let mut root_interval: Option<usize> = None;
        let max_steps = (span / step).ceil() as usize;
        for i in 0..max_steps {
            let st = rk4_step(table[i], step);
            table.push(st);
            if root_interval.is_none() && f_of(table[i]) > 0.0 && f_of(st) <= 0.0 {
                root_interval = Some(i);
            }
            if let Some(j) = root_interval {
                if i > j + 300 {
                    break;
                }
            }
        }
        let j = root_interval.ok_or_else(|| {
            SurfaceError::Trimming(format!("no orthogonal trim point within span {span}"))
        })?;
        // Bisection on the Hermite-interpolated F(s) = r z' - z r'.
        let partial = CmcProfile {
            table,
            step,
            scale: 1.0,
            s_star: 0.0,
            h_out: 1.0,
            neck_radius: tau,
        };
        let f_interp = |s: f64| {
            let [r, z, dr, dz, _, _] = partial.eval_unscaled(s);
            r * dz - z * dr
        };
        let (mut lo, mut hi) = (j as f64 * step, (j + 1) as f64 * step);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if f_interp(lo) * f_interp(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        let s_star = 0.5 * (lo + hi);
        let [r, z, ..] = partial.eval_unscaled(s_star);
        let dist = (r * r + z * z).sqrt();
        Ok(CmcProfile {
            scale: 1.0 / dist,
            s_star,
            h_out: dist,
            ..partial
        })
    }

    /// Solve for the normalized neck radius whose trimmed piece has the given
    /// mean curvature after rescaling into the unit ball.
    pub fn with_mean_curvature(
        h_target: f64,
        neck_guess: f64,
        span: f64,
    ) -> Result<CmcProfile, SurfaceError> {
        let h_of = |tau: f64| CmcProfile::build(tau, span).map(|p| p.h_out);
        let (mut lo, mut hi) = (0.02, 0.78);
        let (flo, fhi) = (h_of(lo)? - h_target, h_of(hi)? - h_target);
        if flo * fhi > 0.0 {
            return Err(SurfaceError::Infeasible(format!(
                "mean curvature {h_target} not attainable by bulge-symmetric \
                 orthogonal unduloid pieces (range approx [{:.3}, {:.3}])",
                flo + h_target,
                fhi + h_target
            )));
        }
        // Seed the bracket with the caller's guess when it is on the right side.
        if let Ok(fg) = h_of(neck_guess.clamp(lo, hi)).map(|h| h - h_target) {
            let g = neck_guess.clamp(lo, hi);
            if fg * flo > 0.0 {
                lo = g;
            } else {
                hi = g;
            }
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let fm = h_of(mid)? - h_target;
            if fm * (h_of(lo)? - h_target) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-12 {
                break;
            }
        }
        CmcProfile::build(0.5 * (lo + hi), span)
    }

    /// Quintic Hermite evaluation of the unscaled H = 1 profile at `s >= 0`,
    /// derivatives taken from the ODE at the table nodes.
    fn eval_unscaled(&self, s: f64) -> [f64; 6] {
        let i = ((s / self.step).floor() as usize).min(self.table.len() - 2);
        let s0 = i as f64 * self.step;
        let x = (s - s0) / self.step;
        let node = |j: usize| {
            let st = self.table[j];
            let [dr, dz, dpsi] = unduloid_rhs(st);
            // r'' = -sin(psi) psi', z'' = cos(psi) psi'.
            (
                [st[0], dr, -st[2].sin() * dpsi],
                [st[1], dz, st[2].cos() * dpsi],
            )
        };
        let (ra, za) = node(i);
        let (rb, zb) = node(i + 1);
        let h = self.step;
        let hermite = |a: [f64; 3], b: [f64; 3]| {
            // Quintic Hermite on [0,1] with scaled derivatives.
            let (f0, f1, f2) = (a[0], a[1] * h, a[2] * h * h);
            let (g0, g1, g2) = (b[0], b[1] * h, b[2] * h * h);
            let c0 = f0;
            let c1 = f1;
            let c2 = f2 / 2.0;
            let c3 = -10.0 * f0 - 6.0 * f1 - 1.5 * f2 + 10.0 * g0 - 4.0 * g1 + 0.5 * g2;
            let c4 = 15.0 * f0 + 8.0 * f1 + 1.5 * f2 - 15.0 * g0 + 7.0 * g1 - g2;
            let c5 = -6.0 * f0 - 3.0 * f1 - 0.5 * f2 + 6.0 * g0 - 3.0 * g1 + 0.5 * g2;
            let v = c0 + x * (c1 + x * (c2 + x * (c3 + x * (c4 + x * c5))));
            let d = c1 + x * (2.0 * c2 + x * (3.0 * c3 + x * (4.0 * c4 + x * 5.0 * c5)));
            let d2 = 2.0 * c2 + x * (6.0 * c3 + x * (12.0 * c4 + x * 20.0 * c5));
            (v, d / h, d2 / (h * h))
        };
        let (r, dr, d2r) = hermite(ra, rb);
        let (z, dz, d2z) = hermite(za, zb);
        [r, z, dr, dz, d2r, d2z]
    }
}

impl Profile for CmcProfile {
    fn eval(&self, s: f64) -> [f64; 6] {
        let k = self.scale;
        if s >= 0.0 {
            let [r, z, dr, dz, d2r, d2z] = self.eval_unscaled(s);
            [k * r, k * z, k * dr, k * dz, k * d2r, k * d2z]
        } else {
            let [r, z, dr, dz, d2r, d2z] = self.eval_unscaled(-s);
            [k * r, -k * z, -k * dr, k * dz, k * d2r, -k * d2z]
        }
    }
    fn s_star(&self) -> f64 {
        self.s_star
    }
    fn mean_curvature(&self) -> f64 {
        self.h_out
    }
}

/// Critical catenoid piece: `r = a cosh(z/a)` trimmed at `coth(z/a) = z/a`
/// and rescaled into the unit ball. Mean curvature is exactly zero.
pub struct CatenoidProfile {
    a: f64,
    z_star: f64,
    scale: f64,
}

impl CatenoidProfile {
    pub fn new(neck_radius: f64) -> Result<CatenoidProfile, SurfaceError> {
        if !(neck_radius > 0.0) {
            return Err(SurfaceError::Infeasible(
                "catenoid neck radius must be positive".into(),
            ));
        }
        // Root of coth(zeta) = zeta.
        let (mut lo, mut hi) = (1.0f64, 1.5f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if (1.0 / mid.tanh() - mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let zeta = 0.5 * (lo + hi);
        let a = neck_radius;
        let z_star = a * zeta;
        let r_star = a * zeta.cosh();
        let scale = 1.0 / (r_star * r_star + z_star * z_star).sqrt();
        Ok(CatenoidProfile { a, z_star, scale })
    }
}

impl Profile for CatenoidProfile {
    fn eval(&self, s: f64) -> [f64; 6] {
        let (k, a) = (self.scale, self.a);
        [
            k * a * (s / a).cosh(),
            k * s,
            k * (s / a).sinh(),
            k,
            k / a * (s / a).cosh(),
            0.0,
        ]
    }
    fn s_star(&self) -> f64 {
        self.z_star
    }
    fn mean_curvature(&self) -> f64 {
        0.0
    }
}

/// Axisymmetric CMC profile solver (spec entry point): `h_target = 0` returns
/// the critical catenoid, otherwise a bulge-symmetric unduloid piece whose
/// rescaled mean curvature equals `h_target`. `neck_param` selects the branch
/// guess (normalized against the cylinder radius `1/h_target`).
pub fn solve_cmc_profile(
    h_target: f64,
    neck_param: f64,
    arc_length_span: f64,
) -> Result<Box<dyn Profile>, SurfaceError> {
    if h_target < 0.0 {
        return Err(SurfaceError::Infeasible("H_target must be >= 0".into()));
    }
    if h_target == 0.0 {
        return Ok(Box::new(CatenoidProfile::new(neck_param.max(1e-3))?));
    }
    let guess = (neck_param * h_target).clamp(0.02, 0.78);
    Ok(Box::new(CmcProfile::with_mean_curvature(
        h_target,
        guess,
        arc_length_span,
    )?))
}

// ---------------------------------------------------------------------------
// Factory
// ---------------------------------------------------------------------------

fn orient_for_nonnegative_h(patch: &mut ParametricPatch) -> Result<(), SurfaceError> {
    let (t0, t1) = patch.t_range;
    let t = t0 + 0.5 * (t1 - t0);
    let s = shape_at(patch, t, 0.37)
        .map_err(|e| SurfaceError::Infeasible(format!("degenerate sample: {e}")))?;
    if s.mean_curvature < 0.0 {
        patch.orientation = -patch.orientation;
    }
    Ok(())
}

fn check_side(patch: &ParametricPatch) -> Result<(), SurfaceError> {
    let (t0, t1) = patch.t_range;
    for i in 0..16 {
        let t = t0 + (t1 - t0) * (i as f64 + 0.5) / 16.0;
        let x = patch.chart.eval(t, 0.0);
        let r = x.norm();
        let rm = patch.sf.r_model;
        if patch.exterior && r < rm - 1e-9 {
            return Err(SurfaceError::Infeasible(
                "exterior surface dips inside the ball".into(),
            ));
        }
        if !patch.exterior && r > rm + 1e-9 {
            return Err(SurfaceError::Infeasible(
                "interior surface leaves the ball".into(),
            ));
        }
        if patch.sf.curv == Curvature::Hyperbolic && r >= 1.0 - 1e-9 {
            return Err(SurfaceError::Infeasible(
                "surface leaves the Poincare model domain".into(),
            ));
        }
    }
    Ok(())
}

/// Umbilic principal curvature of the Euclidean sphere `|x - c| = rho`
/// (center on the axis at height `d`) in the space-form metric, with respect
/// to the outward-from-center normal.
pub fn umbilic_curvature(curv: Curvature, rho: f64, d: f64) -> f64 {
    match curv {
        Curvature::Flat => 1.0 / rho,
        Curvature::Hyperbolic => (1.0 - d * d + rho * rho) / (2.0 * rho),
        Curvature::Spherical => (1.0 + d * d - rho * rho) / (2.0 * rho),
    }
}

pub fn make_surface(spec: &SurfaceSpec) -> Result<ParametricPatch, SurfaceError> {
    let sf = SpaceForm::new(spec.curv, spec.ball_radius, 2)?;
    let rm = sf.r_model;
    let label = spec.label();
    let patch = match spec.family {
        Family::GeodesicDisk => ParametricPatch {
            sf,
            chart: Box::new(DiskChart),
            t_range: (0.0, rm),
            edges: vec![BoundaryEdge { t_value: rm, outward: 1.0 }],
            exterior: false,
            cmc: Some(0.0),
            contact_angle: Some(PI / 2.0),
            orientation: 1.0,
            name: label,
        },
        Family::SphericalCap | Family::ExteriorCap | Family::PerturbedCap => {
            let theta = spec.contact_angle;
            if !(theta > 0.0 && theta < PI) {
                return Err(SurfaceError::Infeasible(format!(
                    "contact angle {theta} outside (0, pi)"
                )));
            }
            let rho = spec.cap_radius;
            if !(rho > 0.0) {
                return Err(SurfaceError::Infeasible("cap radius must be positive".into()));
            }
            let exterior = spec.family == Family::ExteriorCap;
            let (d, t_max, pole) = if exterior {
                let d = (rm * rm + rho * rho - 2.0 * rm * rho * theta.cos()).sqrt();
                (d, ((rm * theta.cos() - rho) / d).acos(), 1.0)
            } else {
                let d = (rm * rm + rho * rho + 2.0 * rm * rho * theta.cos()).sqrt();
                (d, ((rho + rm * theta.cos()) / d).acos(), -1.0)
            };
            let base = CapChart { rho, d, pole };
            let (chart, cmc): (Box<dyn Chart>, Option<f64>) =
                if spec.family == Family::PerturbedCap {
                    (
                        Box::new(PerturbedCapChart {
                            base,
                            amplitude: spec.amplitude,
                            t_max,
                        }),
                        if spec.amplitude == 0.0 {
                            Some(2.0 * umbilic_curvature(spec.curv, rho, d).abs())
                        } else {
                            None
                        },
                    )
                } else {
                    (
                        Box::new(base),
                        Some(2.0 * umbilic_curvature(spec.curv, rho, d).abs()),
                    )
                };
            let mut patch = ParametricPatch {
                sf,
                chart,
                t_range: (0.0, t_max),
                edges: vec![BoundaryEdge { t_value: t_max, outward: 1.0 }],
                exterior,
                cmc,
                contact_angle: Some(theta),
                orientation: 1.0,
                name: label,
            };
            check_side(&patch)?;
            // Fix the normal so the (claimed or underlying) CMC is >= 0; for a
            // perturbed cap use the base cap's orientation.
            let claimed = patch.cmc;
            if patch.cmc.is_none() {
                patch.cmc = Some(0.0); // force orientation pass below
            }
            orient_for_nonnegative_h(&mut patch)?;
            patch.cmc = claimed;
            patch
        }
        Family::ClosedSphere => {
            let rho = spec.cap_radius;
            let d = spec.center_offset;
            if spec.curv == Curvature::Hyperbolic && d.abs() + rho >= 1.0 {
                return Err(SurfaceError::Infeasible(
                    "closed sphere leaves the Poincare model domain".into(),
                ));
            }
            let mut patch = ParametricPatch {
                sf,
                chart: Box::new(CapChart { rho, d, pole: -1.0 }),
                t_range: (0.0, PI),
                edges: vec![],
                exterior: false,
                cmc: Some(2.0 * umbilic_curvature(spec.curv, rho, d).abs()),
                contact_angle: None,
                orientation: 1.0,
                name: label,
            };
            orient_for_nonnegative_h(&mut patch)?;
            patch
        }
        Family::UnduloidPiece | Family::CatenoidPiece => {
            if spec.curv != Curvature::Flat {
                return Err(SurfaceError::EuclideanOnly(spec.family));
            }
            let h_target = if spec.family == Family::CatenoidPiece {
                0.0
            } else {
                spec.h_target
            };
            let profile = solve_cmc_profile(h_target, spec.neck_param, 25.0)?;
            let s_star = profile.s_star();
            let cmc = profile.mean_curvature();
            let mut patch = ParametricPatch {
                sf,
                chart: Box::new(RevolutionChart { profile }),
                t_range: (-s_star, s_star),
                edges: vec![
                    BoundaryEdge { t_value: -s_star, outward: -1.0 },
                    BoundaryEdge { t_value: s_star, outward: 1.0 },
                ],
                exterior: false,
                cmc: Some(cmc),
                contact_angle: Some(PI / 2.0),
                orientation: 1.0,
                name: label,
            };
            if spec.family == Family::UnduloidPiece {
                orient_for_nonnegative_h(&mut patch)?;
            }
            patch
        }
    };
    Ok(patch)
}
