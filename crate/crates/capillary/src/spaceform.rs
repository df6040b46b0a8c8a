//! Ambient geometry of the three space-form ball models.
//!
//! All three space forms are realized on subsets of R^{n+1} with the
//! conformal metric `gbar = e^{2u} delta`:
//!
//! * `K = 0`: `u = 0`, the unit ball itself (`r_model = 1`).
//! * `K = -1`: Poincare ball, `e^{2u} = 4/(1-|x|^2)^2`, a geodesic ball of
//!   radius `R` is the Euclidean ball of radius `r_model = tanh(R/2)`.
//! * `K = +1`: stereographic model, `e^{2u} = 4/(1+|x|^2)^2`, the geodesic
//!   ball of radius `R < pi` is the Euclidean ball of radius `r_model = tan(R/2)`.
//!
//! The module provides the potentials `V_0`, `V_a`, the conformal Killing
//! field `X_a`, the Killing field `Y_a`, and closed-form covariant
//! derivatives of all of them. Finite differences appear only in tests.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize, serde::Deserialize)]
pub enum Curvature {
    #[serde(rename = "hyperbolic")]
    Hyperbolic,
    #[serde(rename = "flat")]
    Flat,
    #[serde(rename = "spherical")]
    Spherical,
}

impl Curvature {
    pub fn k(self) -> f64 {
        match self {
            Curvature::Hyperbolic => -1.0,
            Curvature::Flat => 0.0,
            Curvature::Spherical => 1.0,
        }
    }

    pub fn from_k(k: i64) -> Option<Self> {
        match k {
            -1 => Some(Curvature::Hyperbolic),
            0 => Some(Curvature::Flat),
            1 => Some(Curvature::Spherical),
            _ => None,
        }
    }
}

#[derive(Error, Debug)]
pub enum SpaceFormError {
    #[error("ball radius {0} outside admissible range for this curvature")]
    BadRadius(f64),
    #[error("hypersurface dimension must be >= 2, got {0}")]
    BadDimension(usize),
    #[error("point outside model domain")]
    OutsideDomain,
    #[error("point not on the ball boundary (||x| - r_model| = {0:.3e})")]
    NotOnBoundary(f64),
}

/// One of the three constant-curvature ambient spaces, together with the
/// ball radius and the hypersurface dimension `n` (ambient dimension `n+1`).
#[derive(Clone, Debug)]
pub struct SpaceForm {
    pub curv: Curvature,
    /// Geodesic ball radius (fixed to 1 for `K = 0`).
    pub radius: f64,
    /// Hypersurface dimension.
    pub n: usize,
    /// Euclidean radius of the ball in the conformal model.
    pub r_model: f64,
}

impl SpaceForm {
    pub fn new(curv: Curvature, radius: f64, n: usize) -> Result<Self, SpaceFormError> {
        if n < 2 {
            return Err(SpaceFormError::BadDimension(n));
        }
        let r_model = match curv {
            Curvature::Flat => 1.0,
            Curvature::Hyperbolic => {
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(SpaceFormError::BadRadius(radius));
                }
                (radius / 2.0).tanh()
            }
            Curvature::Spherical => {
                if !(radius > 0.0 && radius < std::f64::consts::PI) {
                    return Err(SpaceFormError::BadRadius(radius));
                }
                (radius / 2.0).tan()
            }
        };
        let radius = if curv == Curvature::Flat { 1.0 } else { radius };
        Ok(SpaceForm { curv, radius, n, r_model })
    }

    pub fn euclidean(n: usize) -> Self {
        SpaceForm::new(Curvature::Flat, 1.0, n).expect("n >= 2")
    }

    pub fn k(&self) -> f64 {
        self.curv.k()
    }

    /// Ambient dimension `n + 1`.
    pub fn ambient_dim(&self) -> usize {
        self.n + 1
    }

    pub fn admissible(&self, x: &DVector<f64>) -> bool {
        match self.curv {
            Curvature::Hyperbolic => x.norm_squared() < 1.0,
            _ => true,
        }
    }

    /// Conformal factor `e^u` at `x`.
    pub fn conf(&self, x: &DVector<f64>) -> f64 {
        match self.curv {
            Curvature::Flat => 1.0,
            _ => 2.0 / (1.0 + self.k() * x.norm_squared()),
        }
    }

    /// Euclidean gradient of `u`: `grad u = -K e^u x`.
    pub fn grad_u(&self, x: &DVector<f64>) -> DVector<f64> {
        x * (-self.k() * self.conf(x))
    }

    /// Space-form inner product `gbar(v, w) = e^{2u} <v, w>` at `x`.
    pub fn metric_dot(&self, x: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let e = self.conf(x);
        e * e * v.dot(w)
    }

    pub fn metric_norm(&self, x: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.metric_dot(x, v, v).sqrt()
    }

    /// Potential `V_0`, i.e. 1 / cosh(r) / cos(r).
    pub fn v0(&self, x: &DVector<f64>) -> f64 {
        match self.curv {
            Curvature::Flat => 1.0,
            _ => self.conf(x) * (1.0 - self.k() * x.norm_squared()) / 2.0,
        }
    }

    /// Potential `V_a = e^u <x, a>` (`<x, a>` for `K = 0`).
    pub fn va(&self, x: &DVector<f64>, a: &DVector<f64>) -> f64 {
        self.conf(x) * x.dot(a)
    }

    /// Scale factor in the definition of `X_a`: 1, 2/(1 - r_model^2), 2/(1 + r_model^2).
    fn xa_scale(&self) -> f64 {
        match self.curv {
            Curvature::Flat => 1.0,
            _ => 2.0 / (1.0 + self.k() * self.r_model * self.r_model),
        }
    }

    /// Conformal Killing field `X_a = c [ <x,a> x - (|x|^2 + r_model^2)/2 a ]`.
    pub fn xa(&self, x: &DVector<f64>, a: &DVector<f64>) -> DVector<f64> {
        let c = self.xa_scale();
        let rm2 = self.r_model * self.r_model;
        x * (c * x.dot(a)) - a * (c * (x.norm_squared() + rm2) / 2.0)
    }

    /// Killing field `Y_a` (`K = -1`: `(|x|^2+1)/2 a - <x,a> x`;
    /// `K = +1`: `(1-|x|^2)/2 a + <x,a> x`; `K = 0`: the constant field `a`).
    pub fn ya(&self, x: &DVector<f64>, a: &DVector<f64>) -> DVector<f64> {
        match self.curv {
            Curvature::Flat => a.clone(),
            Curvature::Hyperbolic => a * ((x.norm_squared() + 1.0) / 2.0) - x * x.dot(a),
            Curvature::Spherical => a * ((1.0 - x.norm_squared()) / 2.0) + x * x.dot(a),
        }
    }

    /// Christoffel correction of the conformal metric applied to two vectors:
    /// `Gamma(z, w)^k = z^k (w . du) + w^k (z . du) - du^k (z . w)`.
    pub fn christoffel_apply(
        &self,
        x: &DVector<f64>,
        z: &DVector<f64>,
        w: &DVector<f64>,
    ) -> DVector<f64> {
        let du = self.grad_u(x);
        z * w.dot(&du) + w * z.dot(&du) - du * z.dot(w)
    }

    /// Euclidean Jacobian of `X_a` applied to `z`.
    fn xa_jac(&self, x: &DVector<f64>, a: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let c = self.xa_scale();
        (x * z.dot(a) + z * x.dot(a) - a * x.dot(z)) * c
    }

    /// Euclidean Jacobian of `Y_a` applied to `z`.
    fn ya_jac(&self, x: &DVector<f64>, a: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        match self.curv {
            Curvature::Flat => DVector::zeros(x.len()),
            Curvature::Hyperbolic => a * x.dot(z) - x * z.dot(a) - z * x.dot(a),
            Curvature::Spherical => -a * x.dot(z) + x * z.dot(a) + z * x.dot(a),
        }
    }

    /// Covariant derivative (in `gbar`) of the named vector field along `z`.
    pub fn covariant_field_derivative(
        &self,
        kind: FieldKind<'_>,
        x: &DVector<f64>,
        z: &DVector<f64>,
    ) -> DVector<f64> {
        let (value, flat) = match kind {
            FieldKind::Xa(a) => (self.xa(x, a), self.xa_jac(x, a, z)),
            FieldKind::Ya(a) => (self.ya(x, a), self.ya_jac(x, a, z)),
            FieldKind::Constant(a) => (a.clone(), DVector::zeros(x.len())),
            FieldKind::ConformalConstant(a) => {
                // e^{-u} a with e^{-u} = (1 + K|x|^2)/2; d(e^{-u}) = K x.
                let inv = (1.0 + self.k() * x.norm_squared()) / 2.0;
                (a * inv, a * (self.k() * x.dot(z)))
            }
        };
        flat + self.christoffel_apply(x, z, &value)
    }

    /// Euclidean gradient of the named potential.
    pub fn potential_gradient(&self, kind: PotentialKind<'_>, x: &DVector<f64>) -> DVector<f64> {
        let e = self.conf(x);
        let k = self.k();
        match kind {
            PotentialKind::V0 => x * (-k * e * (self.v0(x) + 1.0)),
            PotentialKind::Va(a) => {
                if self.curv == Curvature::Flat {
                    a.clone()
                } else {
                    a * e - x * (k * e * e * x.dot(a))
                }
            }
        }
    }

    /// Derivative of the named potential along `z` (scalars have no
    /// Christoffel correction).
    pub fn potential_derivative(
        &self,
        kind: PotentialKind<'_>,
        x: &DVector<f64>,
        z: &DVector<f64>,
    ) -> f64 {
        self.potential_gradient(kind, x).dot(z)
    }

    /// Euclidean second-partial matrix of the named potential.
    fn potential_flat_hessian(&self, kind: PotentialKind<'_>, x: &DVector<f64>) -> DMatrix<f64> {
        let m = x.len();
        let k = self.k();
        let e = self.conf(x);
        match kind {
            PotentialKind::V0 => {
                if self.curv == Curvature::Flat {
                    return DMatrix::zeros(m, m);
                }
                let w = -k * e * (self.v0(x) + 1.0);
                let mut h = DMatrix::identity(m, m) * w;
                h += x * x.transpose() * (2.0 * e * e * (self.v0(x) + 1.0));
                h
            }
            PotentialKind::Va(a) => {
                if self.curv == Curvature::Flat {
                    return DMatrix::zeros(m, m);
                }
                let xa = x.dot(a);
                // d_j d_i Va = -K e^{2u} x_j a_i
                //   - K [ -2K e^{3u} x_j <x,a> x_i + e^{2u} (a_j x_i + <x,a> delta_ij) ]
                let e2 = e * e;
                let e3 = e2 * e;
                let mut h = a * x.transpose() * (-k * e2);
                h += x * x.transpose() * (2.0 * k * k * e3 * xa);
                h += x * a.transpose() * (-k * e2);
                h += DMatrix::identity(m, m) * (-k * e2 * xa);
                h
            }
        }
    }

    /// Ambient Hessian `nabla^2 V (z, w)` of the named potential in `gbar`.
    pub fn potential_hessian(
        &self,
        kind: PotentialKind<'_>,
        x: &DVector<f64>,
        z: &DVector<f64>,
        w: &DVector<f64>,
    ) -> f64 {
        let flat = (self.potential_flat_hessian(kind, x) * w).dot(z);
        let grad = self.potential_gradient(kind, x);
        flat - grad.dot(&self.christoffel_apply(x, z, w))
    }

    /// Outward unit normal of the geodesic sphere `|x| = r_model` in `gbar`.
    pub fn ball_normal(&self, x: &DVector<f64>) -> Result<DVector<f64>, SpaceFormError> {
        let dev = (x.norm() - self.r_model).abs();
        if dev > 1e-12 * self.r_model.max(1.0) {
            return Err(SpaceFormError::NotOnBoundary(dev));
        }
        Ok(x / (x.norm() * self.conf(x)))
    }

    /// Maximum residuals of the defining field/potential identities over
    /// random admissible points: closed forms only, no finite differences.
    pub fn check_field_identities(
        &self,
        a: &DVector<f64>,
        sample_count: usize,
        seed: u64,
    ) -> FieldIdentityReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = self.ambient_dim();
        let mut rep = FieldIdentityReport::default();
        for _ in 0..sample_count.max(1) {
            let x = sample_interior_point(self, &mut rng);
            let e = self.conf(&x);
            // gbar-orthonormal coordinate frame E_i = e^{-u} e_i.
            for i in 0..m {
                let mut ei = DVector::zeros(m);
                ei[i] = 1.0 / e;
                let cx_i = self.covariant_field_derivative(FieldKind::Xa(a), &x, &ei);
                let cy_i = self.covariant_field_derivative(FieldKind::Ya(a), &x, &ei);
                for j in i..m {
                    let mut ej = DVector::zeros(m);
                    ej[j] = 1.0 / e;
                    let cx_j = self.covariant_field_derivative(FieldKind::Xa(a), &x, &ej);
                    let cy_j = self.covariant_field_derivative(FieldKind::Ya(a), &x, &ej);
                    let sym_x = 0.5
                        * (self.metric_dot(&x, &cx_i, &ej) + self.metric_dot(&x, &cx_j, &ei));
                    let want = if i == j { self.va(&x, a) } else { 0.0 };
                    rep.conformal_killing_xa = rep.conformal_killing_xa.max((sym_x - want).abs());
                    let sym_y = 0.5
                        * (self.metric_dot(&x, &cy_i, &ej) + self.metric_dot(&x, &cy_j, &ei));
                    rep.killing_ya = rep.killing_ya.max(sym_y.abs());
                    for (kind, slot) in [
                        (PotentialKind::V0, 0usize),
                        (PotentialKind::Va(a), 1usize),
                    ] {
                        let hess = self.potential_hessian(kind, &x, &ei, &ej);
                        let v = match kind {
                            PotentialKind::V0 => self.v0(&x),
                            PotentialKind::Va(_) => self.va(&x, a),
                        };
                        let gij = if i == j { 1.0 } else { 0.0 };
                        let r = (hess + self.k() * v * gij).abs();
                        if slot == 0 {
                            rep.hessian_v0 = rep.hessian_v0.max(r);
                        } else {
                            rep.hessian_va = rep.hessian_va.max(r);
                        }
                    }
                }
            }
            // X_a is tangent to the ball boundary.
            let xb = &x * (self.r_model / x.norm());
            let nb = self.ball_normal(&xb).expect("on boundary by construction");
            let tang = self.metric_dot(&xb, &self.xa(&xb, a), &nb).abs();
            rep.xa_boundary_tangency = rep.xa_boundary_tangency.max(tang);
        }
        rep
    }
}

/// Vector fields with closed-form covariant derivatives.
#[derive(Clone, Copy)]
pub enum FieldKind<'a> {
    Xa(&'a DVector<f64>),
    Ya(&'a DVector<f64>),
    Constant(&'a DVector<f64>),
    /// The field `e^{-u} a` used in the balance identity.
    ConformalConstant(&'a DVector<f64>),
}

#[derive(Clone, Copy)]
pub enum PotentialKind<'a> {
    V0,
    Va(&'a DVector<f64>),
}

/// Max residuals from `check_field_identities`.
#[derive(Clone, Debug, Default, serde::Serialize)]
pub struct FieldIdentityReport {
    pub conformal_killing_xa: f64,
    pub killing_ya: f64,
    pub hessian_v0: f64,
    pub hessian_va: f64,
    pub xa_boundary_tangency: f64,
}

impl FieldIdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.conformal_killing_xa
            .max(self.killing_ya)
            .max(self.hessian_v0)
            .max(self.hessian_va)
            .max(self.xa_boundary_tangency)
    }
}

/// Uniform random point with `|x| <= 0.9 r_model` (bounded away from the
/// model-domain edge so conformal quantities stay well conditioned).
pub fn sample_interior_point(sf: &SpaceForm, rng: &mut impl Rng) -> DVector<f64> {
    let m = sf.ambient_dim();
    loop {
        let x = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
        if x.norm() <= 1.0 && x.norm() > 1e-3 {
            return x * (0.9 * sf.r_model);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dv(s: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(s)
    }

    fn spaceforms() -> Vec<SpaceForm> {
        vec![
            SpaceForm::euclidean(2),
            SpaceForm::new(Curvature::Hyperbolic, 1.0, 2).unwrap(),
            SpaceForm::new(Curvature::Spherical, 1.0, 2).unwrap(),
        ]
    }

    #[test]
    fn r_model_round_trip() {
        let h = SpaceForm::new(Curvature::Hyperbolic, 1.3, 2).unwrap();
        let xb = dv(&[h.r_model, 0.0, 0.0]);
        assert_relative_eq!(h.v0(&xb), 1.3f64.cosh(), epsilon = 1e-12);
        let s = SpaceForm::new(Curvature::Spherical, 0.8, 2).unwrap();
        let xb = dv(&[0.0, s.r_model, 0.0]);
        assert_relative_eq!(s.v0(&xb), 0.8f64.cos(), epsilon = 1e-12);
    }

    #[test]
    fn potential_values() {
        let h = SpaceForm::new(Curvature::Hyperbolic, 1.0, 2).unwrap();
        // V_a = 2<x,a>/(1-|x|^2) at x = 0.5 e1 is 4/3.
        assert_relative_eq!(
            h.va(&dv(&[0.5, 0.0, 0.0]), &dv(&[1.0, 0.0, 0.0])),
            4.0 / 3.0,
            epsilon = 1e-14
        );
        assert_eq!(h.va(&dv(&[0.0, 0.0, 0.0]), &dv(&[0.3, 0.7, 0.1])), 0.0);
        let e = SpaceForm::euclidean(2);
        assert_relative_eq!(
            e.va(&dv(&[0.3, 0.0, 0.0]), &dv(&[1.0, 0.0, 0.0])),
            0.3,
            epsilon = 1e-15
        );
    }

    #[test]
    fn field_values_at_special_points() {
        let e = SpaceForm::euclidean(2);
        let a = dv(&[1.0, 0.0, 0.0]);
        let x0 = dv(&[0.0, 0.0, 0.0]);
        assert_eq!(e.xa(&x0, &a), dv(&[-0.5, 0.0, 0.0]));
        // |x| = 1, x = a: X_a vanishes.
        assert!(e.xa(&a.clone(), &a).norm() < 1e-15);
        let h = SpaceForm::new(Curvature::Hyperbolic, 1.0, 2).unwrap();
        assert_eq!(h.ya(&x0, &a), dv(&[0.5, 0.0, 0.0]));
    }

    /// Finite-difference oracle for covariant derivatives of vector fields.
    fn fd_covariant(
        sf: &SpaceForm,
        f: &dyn Fn(&DVector<f64>) -> DVector<f64>,
        x: &DVector<f64>,
        z: &DVector<f64>,
    ) -> DVector<f64> {
        let hstep = 1e-5;
        let mut jac_z = DVector::zeros(x.len());
        for j in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += hstep;
            xm[j] -= hstep;
            jac_z += (f(&xp) - f(&xm)) * (z[j] / (2.0 * hstep));
        }
        jac_z + sf.christoffel_apply(x, z, &f(x))
    }

    #[test]
    fn closed_form_derivatives_match_fd_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for sf in spaceforms() {
            for _ in 0..40 {
                let x = sample_interior_point(&sf, &mut rng);
                let a = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
                let z = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
                for kind in [FieldKind::Xa(&a), FieldKind::Ya(&a), FieldKind::ConformalConstant(&a)] {
                    let closed = sf.covariant_field_derivative(kind, &x, &z);
                    let sfr = &sf;
                    let f: Box<dyn Fn(&DVector<f64>) -> DVector<f64> + '_> = match kind {
                        FieldKind::Xa(a) => Box::new(move |y: &DVector<f64>| sfr.xa(y, a)),
                        FieldKind::Ya(a) => Box::new(move |y: &DVector<f64>| sfr.ya(y, a)),
                        FieldKind::ConformalConstant(a) => Box::new(move |y: &DVector<f64>| {
                            a * ((1.0 + sfr.k() * y.norm_squared()) / 2.0)
                        }),
                        FieldKind::Constant(_) => unreachable!(),
                    };
                    let oracle = fd_covariant(&sf, f.as_ref(), &x, &z);
                    assert!(
                        (closed - oracle).norm() < 1e-8,
                        "covariant derivative mismatch for K={}",
                        sf.k()
                    );
                }
                // Potential gradients against FD.
                for kind in [PotentialKind::V0, PotentialKind::Va(&a)] {
                    let g = sf.potential_gradient(kind, &x);
                    for j in 0..3 {
                        let mut xp = x.clone();
                        let mut xm = x.clone();
                        xp[j] += 1e-5;
                        xm[j] -= 1e-5;
                        let (vp, vm) = match kind {
                            PotentialKind::V0 => (sf.v0(&xp), sf.v0(&xm)),
                            PotentialKind::Va(a) => (sf.va(&xp, a), sf.va(&xm, a)),
                        };
                        assert!((g[j] - (vp - vm) / 2e-5).abs() < 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn defining_identities_hold() {
        for sf in spaceforms() {
            let a = dv(&[0.4, -0.8, 0.45]);
            let rep = sf.check_field_identities(&a, 200, 11);
            assert!(rep.max_residual() < 1e-11, "K={}: {:?}", sf.k(), rep);
        }
    }

    #[test]
    fn v0_derivative_is_radial_field_pairing() {
        // K = -1: derivative of V_0 along tangential Z equals gbar(x, Z)
        // in the paper's normalization (grad V_0 = x in the hyperbolic model
        // after raising indices), i.e. dV_0[Z] = gbar(x, Z).
        let sf = SpaceForm::new(Curvature::Hyperbolic, 1.0, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x = sample_interior_point(&sf, &mut rng);
            let z = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            let lhs = sf.potential_derivative(PotentialKind::V0, &x, &z);
            assert_relative_eq!(lhs, sf.metric_dot(&x, &x, &z), epsilon = 1e-10);
        }
    }

    #[test]
    fn ball_normal_is_unit_and_rejects_interior_points() {
        for sf in spaceforms() {
            let xb = dv(&[0.0, 0.0, sf.r_model]);
            let nb = sf.ball_normal(&xb).unwrap();
            assert_relative_eq!(sf.metric_dot(&xb, &nb, &nb), 1.0, epsilon = 1e-12);
            assert!(sf.ball_normal(&dv(&[0.0, 0.0, 0.5 * sf.r_model])).is_err());
        }
        let h = SpaceForm::new(Curvature::Hyperbolic, 1.0, 2).unwrap();
        // Cartesian magnitude of the gbar-unit normal is e^{-u} = (1 - r_model^2)/2.
        let xb = dv(&[h.r_model, 0.0, 0.0]);
        let nb = h.ball_normal(&xb).unwrap();
        assert_relative_eq!(nb[0], (1.0 - h.r_model * h.r_model) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn constructor_rejects_bad_parameters() {
        assert!(SpaceForm::new(Curvature::Hyperbolic, -1.0, 2).is_err());
        assert!(SpaceForm::new(Curvature::Spherical, 3.5, 2).is_err());
        assert!(SpaceForm::new(Curvature::Flat, 1.0, 1).is_err());
    }
}
