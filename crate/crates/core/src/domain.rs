//! Riemannian polytope-type domains `{u_1 <= 0} ∩ ... ∩ {u_k <= 0}` and the
//! pointwise hypothesis checks of the rigidity theorem.

use nalgebra::{DMatrix, DVector};

use crate::dsl::{Expression, Params};
use crate::error::{Error, Result};
use crate::jet::Jet2;
use crate::linalg::{self, complement_basis, min_sym_eigenvalue};
use crate::riemann::{self, Christoffel, MetricField, MetricJet};

/// Gradients below this Euclidean norm fail the regular-value check.
pub const REGULAR_VALUE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct PolytopeDomain {
    n: usize,
    faces: Vec<Expression>,
    metric: MetricField,
    params: Params,
    seed: Vec<f64>,
    /// Absolute tolerance on `|u_i|` for membership in the active set.
    pub tau_act: f64,
}

/// Metric data at one point, shared by every face evaluated there.
#[derive(Debug, Clone)]
pub struct PointFrame {
    pub x: Vec<f64>,
    pub metric: MetricJet,
    pub gamma: Christoffel,
}

impl PointFrame {
    pub fn euclidean(x: &[f64]) -> Self {
        let metric = MetricJet::euclidean(x.len());
        let gamma = riemann::christoffel(&metric);
        Self {
            x: x.to_vec(),
            metric,
            gamma,
        }
    }
}

/// First and second order data of one defining function at a point.
#[derive(Debug, Clone)]
pub struct FaceData {
    pub index: usize,
    pub value: f64,
    /// Covector `du`.
    pub du: DVector<f64>,
    /// Coordinate Hessian.
    pub hess: DMatrix<f64>,
    /// `∇u = g^{-1} du`.
    pub grad: DVector<f64>,
    /// `|∇u|_g`.
    pub norm_g: f64,
    /// `|∇u|_{g0}`.
    pub norm_e: f64,
    /// `ν_i`, unit in `g`.
    pub nu: DVector<f64>,
    /// `N_i`, unit in `g0`.
    pub n_e: DVector<f64>,
    /// Covariant Hessian `∇²u`.
    pub cov_hess: DMatrix<f64>,
    /// `Δ_g u`.
    pub laplacian: f64,
    /// Covector `d|∇u|_g`.
    pub d_norm_g: DVector<f64>,
    /// Covector `d|∇u|_{g0}`.
    pub d_norm_e: DVector<f64>,
    /// Jacobian of `N_i = du/|du|` as a map `R^n -> R^n`.
    pub dn_e: DMatrix<f64>,
}

impl FaceData {
    pub fn new(index: usize, jet: &Jet2, frame: &PointFrame) -> Result<Self> {
        let n = jet.dim();
        let mj = &frame.metric;
        let du = jet.gradient();
        let hess = jet.hessian();
        let norm_e = linalg::enorm(&du);
        if !(norm_e > 0.0) || !norm_e.is_finite() {
            return Err(Error::VanishingGradient {
                face: index,
                norm: norm_e,
            });
        }
        let grad = mj.sharp(&du);
        let norm_g = mj.conorm(&du);
        let nu = &grad / norm_g;
        let n_e = &du / norm_e;
        let cov_hess = riemann::hessian_g(jet, &frame.gamma);
        let laplacian = if mj.flat {
            cov_hess.trace()
        } else {
            mj.ginv.component_mul(&cov_hess).sum()
        };
        // ∂_k |∇u|² = 2 (∂²u g^{-1} du)_k + du·(∂_k g^{-1}) du
        let hg = &hess * &grad;
        let mut d_norm_g = DVector::zeros(n);
        for k in 0..n {
            let mut v = 2.0 * hg[k];
            if !mj.flat {
                v += (du.transpose() * mj.dginv(k) * &du)[(0, 0)];
            }
            d_norm_g[k] = v / (2.0 * norm_g);
        }
        let d_norm_e = &hess * &n_e;
        let proj = DMatrix::identity(n, n) - &n_e * n_e.transpose();
        let dn_e = proj * &hess / norm_e;
        Ok(Self {
            index,
            value: jet.val(),
            du,
            hess,
            grad,
            norm_g,
            norm_e,
            nu,
            n_e,
            cov_hess,
            laplacian,
            d_norm_g,
            d_norm_e,
            dn_e,
        })
    }

    /// Mean curvature of the level set through the point, w.r.t. `ν_i`:
    /// `(Δu − ∇²u(ν,ν)) / |∇u|`.
    pub fn level_set_mean_curvature(&self) -> f64 {
        let hnn = (self.nu.transpose() * &self.cov_hess * &self.nu)[(0, 0)];
        (self.laplacian - hnn) / self.norm_g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    Interior,
    Regular,
    Singular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryClassification {
    pub x: Vec<f64>,
    pub active: Vec<usize>,
    pub kind: PointKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    /// `H_g² g >= H_0² g0` on the tangent space.
    AtLeast,
    /// `H_g² g <= H_0² g0` on the tangent space.
    AtMost,
}

impl PolytopeDomain {
    pub fn new(
        faces: Vec<Expression>,
        metric: MetricField,
        params: Params,
        seed: Vec<f64>,
    ) -> Result<Self> {
        let n = metric.dim();
        if faces.is_empty() {
            return Err(Error::Invalid("a domain needs at least one defining function".into()));
        }
        if seed.len() != n || faces.iter().any(|f| f.dim() != n) {
            return Err(Error::Invalid(format!("dimension mismatch (n = {n})")));
        }
        let d = Self {
            n,
            faces,
            metric,
            params,
            seed,
            tau_act: 1e-9,
        };
        for (i, v) in d.values(&d.seed)?.into_iter().enumerate() {
            if !(v < 0.0) {
                return Err(Error::Invalid(format!(
                    "seed point is not interior: u_{} = {v}",
                    i + 1
                )));
            }
        }
        Ok(d)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn faces(&self) -> &[Expression] {
        &self.faces
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn seed(&self) -> &[f64] {
        &self.seed
    }

    /// Same faces and seed, different metric.
    pub fn with_metric(&self, metric: MetricField) -> Self {
        Self {
            metric,
            ..self.clone()
        }
    }

    pub fn values(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.faces
            .iter()
            .map(|f| f.eval(x, &self.params).map_err(Error::from))
            .collect()
    }

    pub fn frame(&self, x: &[f64]) -> Result<PointFrame> {
        let metric = riemann::metric_jet(&self.metric, x, &self.params)?;
        let gamma = riemann::christoffel(&metric);
        Ok(PointFrame {
            x: x.to_vec(),
            metric,
            gamma,
        })
    }

    pub fn face_data(&self, frame: &PointFrame, i: usize) -> Result<FaceData> {
        let jet = self.faces[i].eval_jet2(&frame.x, &self.params)?;
        FaceData::new(i, &jet, frame)
    }

    pub fn classify(&self, x: &[f64]) -> Result<BoundaryClassification> {
        let values = self.values(x)?;
        let active: Vec<usize> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() <= self.tau_act)
            .map(|(i, _)| i)
            .collect();
        let kind = match active.len() {
            0 => PointKind::Interior,
            1 => PointKind::Regular,
            _ => PointKind::Singular,
        };
        Ok(BoundaryClassification {
            x: x.to_vec(),
            active,
            kind,
        })
    }

    /// `(N_i, ν_i)`: unit normals of face `i` in `g0` and `g`.
    pub fn face_normals(&self, x: &[f64], i: usize) -> Result<(DVector<f64>, DVector<f64>)> {
        let frame = self.frame(x)?;
        let f = self.face_data(&frame, i)?;
        Ok((f.n_e, f.nu))
    }

    /// `|∇^{g0} u_i|` at `x`; the regular-value condition asks for at least
    /// [`REGULAR_VALUE_FLOOR`].
    pub fn regular_value_margin(&self, x: &[f64], i: usize) -> Result<f64> {
        let jet = self.faces[i].eval_jet2(x, &self.params)?;
        Ok(linalg::enorm(&jet.gradient()))
    }

    /// `g(ν_i, ν_j) − g0(N_i, N_j)` at a point where both faces are active.
    pub fn check_matching_angle(&self, x: &[f64], i: usize, j: usize) -> Result<f64> {
        let c = self.classify(x)?;
        if i == j || !c.active.contains(&i) || !c.active.contains(&j) {
            return Err(Error::Invalid(format!(
                "point is not singular for faces ({}, {})",
                i + 1,
                j + 1
            )));
        }
        let frame = self.frame(x)?;
        let fi = self.face_data(&frame, i)?;
        let fj = self.face_data(&frame, j)?;
        Ok(frame.metric.inner(&fi.nu, &fj.nu) - linalg::dot(&fi.n_e, &fj.n_e))
    }

    /// Mean curvature `H_g` of face `i` at `x` w.r.t. the outward normal.
    pub fn boundary_mean_curvature(&self, x: &[f64], i: usize) -> Result<f64> {
        let frame = self.frame(x)?;
        Ok(self.face_data(&frame, i)?.level_set_mean_curvature())
    }

    /// Same formula with `g = g0`.
    pub fn euclidean_mean_curvature(&self, x: &[f64], i: usize) -> Result<f64> {
        let frame = PointFrame::euclidean(x);
        Ok(self.face_data(&frame, i)?.level_set_mean_curvature())
    }

    /// Minimum eigenvalue of `H_g² g − H_0² g0` (or its negative for
    /// [`Comparison::AtMost`]) restricted to `ker du_i`, in a `g0`-orthonormal
    /// basis of the kernel.
    pub fn check_mc_metric_comparison(&self, x: &[f64], i: usize, dir: Comparison) -> Result<f64> {
        let frame = self.frame(x)?;
        let f = self.face_data(&frame, i)?;
        let h_g = f.level_set_mean_curvature();
        let h_0 = self.euclidean_mean_curvature(x, i)?;
        let basis = complement_basis(&f.du, linalg::dot);
        let m = basis.len();
        let sign = match dir {
            Comparison::AtLeast => 1.0,
            Comparison::AtMost => -1.0,
        };
        let q = DMatrix::from_fn(m, m, |a, b| {
            let ge = frame.metric.inner(&basis[a], &basis[b]);
            let e0 = linalg::dot(&basis[a], &basis[b]);
            sign * (h_g * h_g * ge - h_0 * h_0 * e0)
        });
        Ok(min_sym_eigenvalue(&q))
    }

    /// `H_g(x) − ‖dN_i(x)‖_tr` on the face's own tangent space.
    pub fn check_lemma_comparison(&self, x: &[f64], i: usize) -> Result<f64> {
        let frame = self.frame(x)?;
        let f = self.face_data(&frame, i)?;
        let tr = crate::surface::single_face_dn_trace_norm(&frame, &f);
        Ok(f.level_set_mean_curvature() - tr)
    }

    /// Boundary point of `Ω` on the ray `x0 + tω`, with the face hit first.
    pub fn boundary_along(&self, omega: &[f64], t_max: f64) -> Result<(Vec<f64>, usize, f64)> {
        let mut best: Option<(f64, usize)> = None;
        for (i, face) in self.faces.iter().enumerate() {
            let f = |t: f64| -> Result<(f64, f64)> {
                let x = self.ray_point(omega, t);
                let d = face.eval_dir(&x, omega, &self.params)?;
                Ok((d.value, d.deriv))
            };
            let limit = best.map_or(t_max, |b| b.0);
            match crate::surface::first_crossing(f, 0.0, limit) {
                Ok(t) => {
                    if best.is_none_or(|b| t < b.0) {
                        best = Some((t, i));
                    }
                }
                Err(Error::NoCrossing { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        let (t, i) = best.ok_or(Error::NoCrossing { t_max })?;
        Ok((self.ray_point(omega, t), i, t))
    }

    pub fn ray_point(&self, omega: &[f64], t: f64) -> Vec<f64> {
        self.seed.iter().zip(omega).map(|(s, w)| s + t * w).collect()
    }

    /// Newton projection onto `{u_i = u_j = 0}` (minimum-norm steps).
    pub fn project_to_edge(&self, start: &[f64], i: usize, j: usize) -> Result<Vec<f64>> {
        let mut x = DVector::from_column_slice(start);
        for _ in 0..60 {
            let ji = self.faces[i].eval_jet2(x.as_slice(), &self.params)?;
            let jj = self.faces[j].eval_jet2(x.as_slice(), &self.params)?;
            let r = DVector::from_vec(vec![ji.val(), jj.val()]);
            if r.amax() < 1e-15 {
                return Ok(x.as_slice().to_vec());
            }
            let jac = DMatrix::from_rows(&[ji.gradient().transpose(), jj.gradient().transpose()]);
            let jjt = &jac * jac.transpose();
            let step = jjt
                .lu()
                .solve(&r)
                .ok_or_else(|| Error::Degenerate("faces meet tangentially".into()))?;
            x -= jac.transpose() * step;
        }
        let v = self.values(x.as_slice())?;
        if v[i].abs().max(v[j].abs()) < 1e-12 {
            Ok(x.as_slice().to_vec())
        } else {
            Err(Error::Degenerate("edge projection did not converge".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn exprs(n: usize, texts: &[&str]) -> Vec<Expression> {
        texts.iter().map(|t| Expression::parse(t, n).unwrap()).collect()
    }

    fn cube(metric: MetricField) -> PolytopeDomain {
        PolytopeDomain::new(
            exprs(3, &["x1 - 1", "-x1 - 1", "x2 - 1", "-x2 - 1", "x3 - 1", "-x3 - 1"]),
            metric,
            Params::new(),
            vec![0.0; 3],
        )
        .unwrap()
    }

    fn ball(metric: MetricField) -> PolytopeDomain {
        PolytopeDomain::new(
            exprs(3, &["x1^2 + x2^2 + x3^2 - 1"]),
            metric,
            Params::new(),
            vec![0.0; 3],
        )
        .unwrap()
    }

    fn scaled(c2: &str) -> MetricField {
        let e = |t: &str| Expression::parse(t, 3).unwrap();
        MetricField::from_upper(
            3,
            vec![vec![e(c2), e("0"), e("0")], vec![e(c2), e("0")], vec![e(c2)]],
        )
        .unwrap()
    }

    #[test]
    fn rejects_exterior_seed() {
        let r = PolytopeDomain::new(
            exprs(2, &["x1 - 1"]),
            MetricField::euclidean(2),
            Params::new(),
            vec![2.0, 0.0],
        );
        assert!(r.is_err());
    }

    #[test]
    fn normals_of_plane_and_sphere() {
        let d = PolytopeDomain::new(
            exprs(3, &["x1"]),
            MetricField::euclidean(3),
            Params::new(),
            vec![-1.0, 0.0, 0.0],
        )
        .unwrap();
        let (n, nu) = d.face_normals(&[0.0, 0.3, 0.2], 0).unwrap();
        assert_eq!(n.as_slice(), &[1.0, 0.0, 0.0]);
        assert_eq!(nu.as_slice(), &[1.0, 0.0, 0.0]);

        let b = ball(MetricField::euclidean(3));
        let x = [0.6, 0.0, 0.8];
        let (n, nu) = b.face_normals(&x, 0).unwrap();
        for k in 0..3 {
            assert!((n[k] - x[k]).abs() < 1e-15);
            assert!((nu[k] - x[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn conformal_normal_scaling() {
        let f = Expression::parse("0.3*x1 - 0.2*x2*x3", 3).unwrap();
        let g = MetricField::conformal(&f).unwrap();
        let b = ball(g);
        let x = [0.48, 0.6, 0.64];
        let fx = f.eval(&x, &Params::new()).unwrap();
        let (n, nu) = b.face_normals(&x, 0).unwrap();
        for k in 0..3 {
            assert!((nu[k] - (-fx).exp() * n[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn classification_and_matching_angle() {
        let d = cube(MetricField::euclidean(3));
        let c = d.classify(&[1.0, 1.0, 0.2]).unwrap();
        assert_eq!(c.active, vec![0, 2]);
        assert_eq!(c.kind, PointKind::Singular);
        assert_eq!(d.check_matching_angle(&[1.0, 1.0, 0.2], 0, 2).unwrap(), 0.0);
        assert!(d.check_matching_angle(&[1.0, 0.5, 0.2], 0, 2).is_err());
        assert_eq!(d.classify(&[1.0, 0.5, 0.2]).unwrap().kind, PointKind::Regular);
        assert_eq!(d.classify(&[0.0, 0.5, 0.2]).unwrap().kind, PointKind::Interior);

        let diag = {
            let e = |t: &str| Expression::parse(t, 3).unwrap();
            MetricField::from_upper(
                3,
                vec![vec![e("4"), e("0"), e("0")], vec![e("1"), e("0")], vec![e("1")]],
            )
            .unwrap()
        };
        let d = cube(diag);
        assert!(d.check_matching_angle(&[1.0, 1.0, -0.4], 0, 2).unwrap().abs() < 1e-15);

        let f = Expression::parse("0.2*(x1^2 + x2^2 + x3^2)", 3).unwrap();
        let d = cube(MetricField::conformal(&f).unwrap());
        for x in [[1.0, 1.0, 0.3], [-1.0, 0.1, 1.0]] {
            let c = d.classify(&x).unwrap();
            let dev = d.check_matching_angle(&x, c.active[0], c.active[1]).unwrap();
            assert!(dev.abs() < 1e-14);
        }
    }

    #[test]
    fn sphere_and_plane_mean_curvature() {
        let b = ball(MetricField::euclidean(3));
        for x in [[1.0, 0.0, 0.0], [0.0, 0.6, -0.8]] {
            assert!((b.boundary_mean_curvature(&x, 0).unwrap() - 2.0).abs() < 1e-14);
        }
        let d = cube(MetricField::from_upper(3, {
            let e = |t: &str| Expression::parse(t, 3).unwrap();
            vec![vec![e("2"), e("0"), e("0")], vec![e("3"), e("0")], vec![e("0.5")]]
        }).unwrap());
        assert_eq!(d.boundary_mean_curvature(&[1.0, 0.2, 0.3], 0).unwrap(), 0.0);
    }

    #[test]
    fn ellipsoid_mean_curvature_matches_closed_form() {
        // x²/a² + y²/b² + z²/c² = 1, mean curvature (sum of principal
        // curvatures) = |x|²-weighted closed form with h = 1/sqrt(Σ x_i²/a_i⁴):
        // H = h³ (x²(b²+c²)/a⁴... ) written in the symmetric form below.
        let (a, b, c) = (1.5f64, 1.0f64, 0.7f64);
        let d = PolytopeDomain::new(
            exprs(3, &["x1^2/2.25 + x2^2 + x3^2/0.49 - 1"]),
            MetricField::euclidean(3),
            Params::new(),
            vec![0.0; 3],
        )
        .unwrap();
        for (th, ph) in [(0.3f64, 1.1f64), (1.2, -2.0), (2.5, 0.4)] {
            let x = [a * th.sin() * ph.cos(), b * th.sin() * ph.sin(), c * th.cos()];
            let p = x[0] * x[0] / a.powi(4) + x[1] * x[1] / b.powi(4) + x[2] * x[2] / c.powi(4);
            let num = x[0] * x[0] * (b * b + c * c) / a.powi(4) / (b * b * c * c)
                + x[1] * x[1] * (a * a + c * c) / b.powi(4) / (a * a * c * c)
                + x[2] * x[2] * (a * a + b * b) / c.powi(4) / (a * a * b * b);
            let oracle = num / p.powf(1.5);
            let h = d.boundary_mean_curvature(&x, 0).unwrap();
            assert!(((h - oracle) / oracle).abs() < 1e-8, "{h} vs {oracle}");
        }
    }

    #[test]
    fn comparison_for_scaled_metrics() {
        let b = ball(MetricField::euclidean(3));
        let x = [0.0, 0.6, 0.8];
        assert_eq!(b.check_mc_metric_comparison(&x, 0, Comparison::AtLeast).unwrap(), 0.0);
        assert!(b.check_lemma_comparison(&x, 0).unwrap().abs() < 1e-14);

        // g = c² g0 with c = 0.5
        let b = ball(scaled("0.25"));
        let q = b.check_mc_metric_comparison(&x, 0, Comparison::AtLeast).unwrap();
        assert!(q.abs() < 1e-12);
        // both sides scale by 1/c when the domain is measured in g
        assert!((b.boundary_mean_curvature(&x, 0).unwrap() - 4.0).abs() < 1e-12);
        let slack = b.check_lemma_comparison(&x, 0).unwrap();
        assert!(slack.abs() < 1e-12);
    }

    #[test]
    fn boundary_along_rays() {
        let d = cube(MetricField::euclidean(3));
        let (x, i, t) = d.boundary_along(&[1.0, 0.0, 0.0], 10.0).unwrap();
        assert_eq!(i, 0);
        assert!((t - 1.0).abs() < 1e-14);
        assert!((x[0] - 1.0).abs() < 1e-14);
        let s = 1.0 / 3f64.sqrt();
        let (x, _, _) = d.boundary_along(&[s, -s * 0.5, s * 0.2], 10.0).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn edge_projection() {
        let b = PolytopeDomain::new(
            exprs(3, &["x1^2 + x2^2 + x3^2 - 1", "x3 - 0.5"]),
            MetricField::euclidean(3),
            Params::new(),
            vec![0.0; 3],
        )
        .unwrap();
        let x = b.project_to_edge(&[0.7, 0.2, 0.55], 0, 1).unwrap();
        let v = b.values(&x).unwrap();
        assert!(v[0].abs() < 1e-14 && v[1].abs() < 1e-14);
    }
}
