//! Constrained stability spectra of the Jacobi operator (n = 2):
//! P1 finite elements on disk-type or periodic band meshes, the quadratic
//! form `Q(phi) = int |grad phi|^2 - (|h|^2 + nK) phi^2 dA - oint q phi^2 ds`,
//! and its smallest eigenvalues on the volume-preserving subspace
//! `{ int phi dA = 0 }`.

use crate::geometry::{shape_at, GeometryError, ParametricPatch};
use crate::identities::{phi_a_at, robin_coefficient, IdentityError};
use crate::quadrature::{build_grid, integrate_interior, QuadratureError};
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use thiserror::Error;

const MAX_DOF: usize = 5000;

#[derive(Error, Debug)]
pub enum StabilityError {
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("quadrature: {0}")]
    Quadrature(#[from] QuadratureError),
    #[error("identity: {0}")]
    Identity(#[from] IdentityError),
    #[error("patch topology unsupported by the mesher: {0}")]
    Unsupported(String),
    #[error("degenerate element {0} (area {1:.3e})")]
    DegenerateElement(usize, f64),
    #[error("mesh has {0} dof, exceeding the cap of {MAX_DOF}")]
    TooManyDof(usize),
    #[error("mass matrix is not positive definite")]
    IndefiniteMass,
    #[error("mean vector vanishes; the constraint is empty")]
    ZeroMean,
}

enum MeshKind {
    /// Polar web over the unit disk, mapped by `t = t_max * r`.
    Disk { t_max: f64 },
    /// Structured periodic band directly in (t, p).
    Band,
}

/// P1 mesh in chart-plane coordinates, with the (t, p) map attached.
pub struct Mesh {
    kind: MeshKind,
    /// Plane coordinates used for the P1 geometry.
    pub coords: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Boundary segments `(v0, v1, patch edge index)`.
    pub boundary: Vec<(usize, usize, usize)>,
    pub level: usize,
}

impl Mesh {
    /// Map plane coordinates to chart parameters (t, p).
    pub fn to_tp(&self, c: [f64; 2]) -> [f64; 2] {
        match self.kind {
            MeshKind::Disk { t_max } => {
                let r = (c[0] * c[0] + c[1] * c[1]).sqrt();
                [t_max * r, c[1].atan2(c[0])]
            }
            MeshKind::Band => c,
        }
    }

    /// Jacobian of the plane -> (t, p) map at plane coordinates `c`.
    fn map_jacobian(&self, c: [f64; 2]) -> Matrix2<f64> {
        match self.kind {
            MeshKind::Disk { t_max } => {
                let r2 = c[0] * c[0] + c[1] * c[1];
                let r = r2.sqrt();
                Matrix2::new(
                    t_max * c[0] / r,
                    t_max * c[1] / r,
                    -c[1] / r2,
                    c[0] / r2,
                )
            }
            MeshKind::Band => Matrix2::identity(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.coords.len()
    }
}

/// Build the P1 mesh for the patch: a polar web for disk-type patches (one
/// boundary circle, parameter pole at t = 0) or a periodic band (two
/// boundary circles). Ring/row count is `2 * 2^level`.
pub fn build_mesh(patch: &ParametricPatch, level: usize) -> Result<Mesh, StabilityError> {
    let m = 2usize << level;
    let two_pi = 2.0 * std::f64::consts::PI;
    match patch.edges.len() {
        1 => {
            if patch.t_range.0.abs() > 1e-12 {
                return Err(StabilityError::Unsupported(
                    "disk-type mesh requires the parameter pole at t = 0".into(),
                ));
            }
            let t_max = patch.t_range.1;
            // Center vertex plus rings j = 1..m with 6j vertices each.
            let mut coords = vec![[0.0, 0.0]];
            let mut ring_start = vec![0usize; m + 1];
            for j in 1..=m {
                ring_start[j] = coords.len();
                let n_j = 6 * j;
                let r = j as f64 / m as f64;
                for k in 0..n_j {
                    let p = two_pi * k as f64 / n_j as f64;
                    coords.push([r * p.cos(), r * p.sin()]);
                }
            }
            if coords.len() > MAX_DOF {
                return Err(StabilityError::TooManyDof(coords.len()));
            }
            let mut triangles = Vec::new();
            // Innermost fan.
            for k in 0..6 {
                triangles.push([0, ring_start[1] + k, ring_start[1] + (k + 1) % 6]);
            }
            // Annuli: merge the two rings by angle.
            for j in 2..=m {
                let (ni, no) = (6 * (j - 1), 6 * j);
                let inner = |k: usize| ring_start[j - 1] + k % ni;
                let outer = |k: usize| ring_start[j] + k % no;
                let ang_i = |k: usize| two_pi * k as f64 / ni as f64;
                let ang_o = |k: usize| two_pi * k as f64 / no as f64;
                let (mut i, mut o) = (0usize, 0usize);
                while i < ni || o < no {
                    let advance_inner = if i >= ni {
                        false
                    } else if o >= no {
                        true
                    } else {
                        ang_i(i + 1) <= ang_o(o + 1)
                    };
                    if advance_inner {
                        triangles.push([inner(i), outer(o), inner(i + 1)]);
                        i += 1;
                    } else {
                        triangles.push([inner(i), outer(o), outer(o + 1)]);
                        o += 1;
                    }
                }
            }
            let mut boundary = Vec::new();
            let no = 6 * m;
            for k in 0..no {
                boundary.push((ring_start[m] + k, ring_start[m] + (k + 1) % no, 0));
            }
            Ok(Mesh {
                kind: MeshKind::Disk { t_max },
                coords,
                triangles,
                boundary,
                level,
            })
        }
        2 => {
            let (t0, t1) = patch.t_range;
            let (rows, cols) = (m, 3 * m);
            let mut coords = Vec::with_capacity((rows + 1) * cols);
            for i in 0..=rows {
                let t = t0 + (t1 - t0) * i as f64 / rows as f64;
                for j in 0..cols {
                    coords.push([t, two_pi * j as f64 / cols as f64]);
                }
            }
            if coords.len() > MAX_DOF {
                return Err(StabilityError::TooManyDof(coords.len()));
            }
            let vid = |i: usize, j: usize| i * cols + j % cols;
            let mut triangles = Vec::new();
            let mut wrap = vec![0.0; coords.len()];
            // The periodic seam is handled by assembling in local coordinates;
            // mark the wrap offset for the seam column.
            let _ = &mut wrap;
            for i in 0..rows {
                for j in 0..cols {
                    triangles.push([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)]);
                    triangles.push([vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)]);
                }
            }
            let mut boundary = Vec::new();
            for j in 0..cols {
                boundary.push((vid(0, j), vid(0, j + 1), 0));
                boundary.push((vid(rows, j), vid(rows, j + 1), 1));
            }
            Ok(Mesh {
                kind: MeshKind::Band,
                coords,
                triangles,
                boundary,
                level,
            })
        }
        n => Err(StabilityError::Unsupported(format!(
            "patch with {n} boundary circles"
        ))),
    }
}

/// Assembled bilinear forms of the Jacobi problem on one mesh.
pub struct DiscreteForms {
    pub stiffness: DMatrix<f64>,
    /// Mass-weighted Jacobi potential `|h|^2 + nK`.
    pub potential: DMatrix<f64>,
    /// Robin boundary form with coefficient `q`.
    pub robin: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    /// `int phi_i dA` (volume constraint functional).
    pub mean: DVector<f64>,
    pub area: f64,
    pub dof: usize,
}

impl DiscreteForms {
    /// `Q = stiffness - potential - robin`.
    pub fn jacobi_matrix(&self) -> DMatrix<f64> {
        &self.stiffness - &self.potential - &self.robin
    }
}

/// Plane coordinates of a triangle vertex, unwrapping the periodic seam of
/// band meshes so each element is geometrically contiguous.
fn local_coords(mesh: &Mesh, tri: &[usize; 3]) -> [[f64; 2]; 3] {
    let mut c = [mesh.coords[tri[0]], mesh.coords[tri[1]], mesh.coords[tri[2]]];
    if let MeshKind::Band = mesh.kind {
        let two_pi = 2.0 * std::f64::consts::PI;
        let p0 = c[0][1];
        for v in c.iter_mut().skip(1) {
            if v[1] - p0 > std::f64::consts::PI {
                v[1] -= two_pi;
            } else if p0 - v[1] > std::f64::consts::PI {
                v[1] += two_pi;
            }
        }
    }
    c
}

/// Assemble all forms at the given mesh level.
pub fn assemble_forms(patch: &ParametricPatch, level: usize) -> Result<DiscreteForms, StabilityError> {
    let mesh = build_mesh(patch, level)?;
    let n = mesh.vertex_count();
    let sf = &patch.sf;
    let nk = sf.n as f64 * sf.k();
    let mut stiffness = DMatrix::zeros(n, n);
    let mut potential = DMatrix::zeros(n, n);
    let mut robin = DMatrix::zeros(n, n);
    let mut mass = DMatrix::zeros(n, n);
    let mut mean = DVector::zeros(n);
    let mut area = 0.0;

    for (ei, tri) in mesh.triangles.iter().enumerate() {
        let c = local_coords(&mesh, tri);
        let d1 = [c[1][0] - c[0][0], c[1][1] - c[0][1]];
        let d2 = [c[2][0] - c[0][0], c[2][1] - c[0][1]];
        let det = d1[0] * d2[1] - d1[1] * d2[0];
        let plane_area = det.abs() / 2.0;
        if !(plane_area > 1e-14) {
            return Err(StabilityError::DegenerateElement(ei, plane_area));
        }
        // Constant P1 gradients in plane coordinates.
        let inv = 1.0 / det;
        let grads = [
            Vector2::new((d1[1] - d2[1]) * inv, (d2[0] - d1[0]) * inv),
            Vector2::new(d2[1] * inv, -d2[0] * inv),
            Vector2::new(-d1[1] * inv, d1[0] * inv),
        ];
        // Edge-midpoint rule: exact for quadratics on affine metric data.
        let midpoints = [
            ([0.5, 0.5, 0.0], mid(c[0], c[1])),
            ([0.0, 0.5, 0.5], mid(c[1], c[2])),
            ([0.5, 0.0, 0.5], mid(c[2], c[0])),
        ];
        for (bary, q) in midpoints {
            let tp = mesh.to_tp(q);
            let s = shape_at(patch, tp[0], tp[1])?;
            let jac = mesh.map_jacobian(q);
            // Pulled-back metric in plane coordinates.
            let g_plane = jac.transpose() * s.g * jac;
            let det_g = g_plane.determinant();
            if !(det_g > 0.0) {
                return Err(StabilityError::DegenerateElement(ei, det_g));
            }
            let ginv = g_plane
                .try_inverse()
                .ok_or(StabilityError::DegenerateElement(ei, det_g))?;
            let w = plane_area / 3.0 * det_g.sqrt();
            let pot = s.h_norm_sq + nk;
            area += w;
            for a in 0..3 {
                mean[tri[a]] += w * bary[a];
                for b in 0..3 {
                    stiffness[(tri[a], tri[b])] += w * (grads[a].transpose() * ginv * grads[b])[0];
                    let mab = w * bary[a] * bary[b];
                    mass[(tri[a], tri[b])] += mab;
                    potential[(tri[a], tri[b])] += pot * mab;
                }
            }
        }
    }

    // Robin boundary form: 2-point Gauss per segment along the chord.
    let gauss = [0.5 - 0.5 / 3.0f64.sqrt(), 0.5 + 0.5 / 3.0f64.sqrt()];
    for &(v0, v1, edge) in &mesh.boundary {
        let c = local_coords(&mesh, &[v0, v1, v0]);
        let (c0, c1) = (c[0], c[1]);
        for s_loc in gauss {
            let q_pt = [
                c0[0] + (c1[0] - c0[0]) * s_loc,
                c0[1] + (c1[1] - c0[1]) * s_loc,
            ];
            let tp = mesh.to_tp(q_pt);
            let sample = shape_at(patch, tp[0], tp[1])?;
            // Chord tangent pushed to (t, p), measured in the induced metric.
            let jac = mesh.map_jacobian(q_pt);
            let tangent = jac * Vector2::new(c1[0] - c0[0], c1[1] - c0[1]);
            let len = (tangent.transpose() * sample.g * tangent)[0].sqrt();
            let frame = crate::geometry::boundary_frame_at(patch, edge, tp[1])?;
            let q_coef = robin_coefficient(patch, frame.theta, frame.h_mu_mu);
            let w = 0.5 * len;
            let hats = [1.0 - s_loc, s_loc];
            for (a, va) in [v0, v1].into_iter().enumerate() {
                for (b, vb) in [v0, v1].into_iter().enumerate() {
                    robin[(va, vb)] += w * q_coef * hats[a] * hats[b];
                }
            }
        }
    }

    Ok(DiscreteForms {
        stiffness,
        potential,
        robin,
        mass,
        mean,
        area,
        dof: n,
    })
}

fn mid(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]
}

/// Smallest `count` eigenvalues of `q u = lambda m u` restricted to the
/// hyperplane `mean^T u = 0`, via a Householder basis of the constraint.
pub fn constrained_eigenvalues(
    q: &DMatrix<f64>,
    m: &DMatrix<f64>,
    mean: &DVector<f64>,
    count: usize,
) -> Result<Vec<f64>, StabilityError> {
    let n = mean.len();
    let norm = mean.norm();
    if !(norm > 0.0) {
        return Err(StabilityError::ZeroMean);
    }
    // Householder reflector sending mean/|mean| to e_0; columns 1..n of H
    // form an orthonormal basis of the constraint hyperplane.
    let mut v = mean / norm;
    v[0] += v[0].signum() * 1.0;
    let beta = 2.0 / v.norm_squared();
    let reflect = |a: &DMatrix<f64>| -> DMatrix<f64> {
        // H A H with H = I - beta v v^T.
        let av = a * &v;
        let va = v.transpose() * a;
        let vav = (v.transpose() * &av)[0];
        let mut out = a.clone();
        out -= &av * v.transpose() * beta;
        out -= &v * va * beta;
        out += &v * v.transpose() * (beta * beta * vav);
        out
    };
    let qp = reflect(q).view((1, 1), (n - 1, n - 1)).into_owned();
    let mp = reflect(m).view((1, 1), (n - 1, n - 1)).into_owned();
    // Symmetrize against assembly roundoff.
    let qp = (&qp + qp.transpose()) * 0.5;
    let mp = (&mp + mp.transpose()) * 0.5;
    let chol = mp.cholesky().ok_or(StabilityError::IndefiniteMass)?;
    let l = chol.l();
    let x = l
        .clone()
        .solve_lower_triangular(&qp)
        .ok_or(StabilityError::IndefiniteMass)?;
    let c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or(StabilityError::IndefiniteMass)?;
    let c = (&c + c.transpose()) * 0.5;
    let mut eig: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eig.truncate(count.max(1));
    Ok(eig)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct SpectrumReport {
    pub family: String,
    pub curvature: f64,
    pub theta: Option<f64>,
    /// `(mesh level, dof, lambda_1)` per level.
    pub levels: Vec<(usize, usize, f64)>,
    pub verdict: Verdict,
    pub tol: f64,
}

/// Classify the patch by the sign of the constrained first eigenvalue across
/// the given mesh levels; disagreements land on `Marginal`.
pub fn classify(
    patch: &ParametricPatch,
    levels: &[usize],
    tol: f64,
) -> Result<SpectrumReport, StabilityError> {
    let mut rows = Vec::new();
    for &level in levels {
        let forms = assemble_forms(patch, level)?;
        let q = forms.jacobi_matrix();
        let lam = constrained_eigenvalues(&q, &forms.mass, &forms.mean, 1)?[0];
        rows.push((level, forms.dof, lam));
    }
    let verdict = if rows.iter().all(|r| r.2 >= -tol) {
        Verdict::Stable
    } else if rows.iter().all(|r| r.2 < -tol) {
        Verdict::Unstable
    } else {
        Verdict::Marginal
    };
    Ok(SpectrumReport {
        family: patch.name.clone(),
        curvature: patch.sf.k(),
        theta: patch.contact_angle,
        levels: rows,
        verdict,
        tol,
    })
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct PairingReport {
    /// `Q(phi_a)` evaluated through the assembled forms.
    pub quadratic_form: f64,
    /// `-int phi_a V_a (n|h|^2 - H^2) dA` by high-order quadrature.
    pub pairing_integral: f64,
    pub rel_gap: f64,
}

/// Cross-check of the second-variation pairing: on a CMC patch the Jacobi
/// identity gives `Q(phi_a) = -int phi_a V_a (n|h|^2 - H^2) dA`.
pub fn stability_pairing(
    patch: &ParametricPatch,
    a: &DVector<f64>,
    level: usize,
) -> Result<PairingReport, StabilityError> {
    let h_cmc = patch
        .cmc
        .ok_or_else(|| IdentityError::CmcRequired("stability_pairing".into()))?;
    let mesh = build_mesh(patch, level)?;
    let forms = assemble_forms(patch, level)?;
    let sf = &patch.sf;
    let n = sf.n as f64;
    // Nodal interpolation of phi_a (nudge the polar vertex off the
    // coordinate singularity).
    let mut vals = DVector::zeros(mesh.vertex_count());
    for (i, &c) in mesh.coords.iter().enumerate() {
        let tp = mesh.to_tp(c);
        let t = match mesh.kind {
            MeshKind::Disk { t_max } => tp[0].max(1e-5 * t_max),
            MeshKind::Band => tp[0],
        };
        let s = shape_at(patch, t, tp[1])?;
        vals[i] = phi_a_at(patch, &s, a, h_cmc);
    }
    let q = forms.jacobi_matrix();
    let quad = (vals.transpose() * q * &vals)[0];
    let grid = build_grid(patch, 8, 2)?;
    let rhs = -integrate_interior(&grid, |node| {
        let s = &node.sample;
        phi_a_at(patch, s, a, h_cmc)
            * sf.va(&s.position, a)
            * (n * s.h_norm_sq - s.mean_curvature.powi(2))
    })?;
    let scale = quad.abs().max(rhs.abs()).max(1e-14);
    Ok(PairingReport {
        quadratic_form: quad,
        pairing_integral: rhs,
        rel_gap: (quad - rhs).abs() / scale,
    })
}
