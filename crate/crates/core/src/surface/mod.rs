//! The smoothed boundary `Σ_λ = {Σ_i e^{λ u_i} = 1}` and the quantities
//! evaluated on it.

pub mod directions;
pub mod region;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{FaceData, PointFrame, PolytopeDomain};
use crate::error::{Error, Result};
use crate::jet::Jet2;
use crate::linalg::{self, complement_basis, trace_norm};
use crate::riemann;

pub use region::{RegionKind, RegionTag};

/// Which gradient norm weights the faces inside the `N` map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalWeights {
    /// `|∇u_i|_g`, as in the defining formulas.
    #[default]
    Metric,
    /// `|∇u_i|_{g0}`; sensitivity switch.
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceOptions {
    pub weights: NormalWeights,
    /// Ray length cap.
    pub t_max: f64,
    /// Required `|F_λ − 1|` at emitted points.
    pub residual_tol: f64,
    /// Smallest admissible normal-sum norm.
    pub normal_floor: f64,
}

impl Default for SurfaceOptions {
    fn default() -> Self {
        Self {
            weights: NormalWeights::Metric,
            t_max: 100.0,
            residual_tol: 1e-12,
            normal_floor: 1e-12,
        }
    }
}

/// First root in `(t0, t_max]` of a function that is negative at `t0`.
///
/// `f` returns value and derivative. Brackets by doubling steps, then runs a
/// Newton iteration safeguarded by bisection.
pub fn first_crossing<F>(f: F, t0: f64, t_max: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<(f64, f64)>,
{
    let (v0, _) = f(t0)?;
    if v0 >= 0.0 {
        return Err(Error::Degenerate(format!("ray starts outside (value {v0:e})")));
    }
    let span = t_max - t0;
    let mut lo = t0;
    let mut h = (span / 1024.0).min(1.0 / 64.0);
    let hi = loop {
        let t = (t0 + h).min(t_max);
        let (v, _) = f(t)?;
        if v >= 0.0 {
            break t;
        }
        if t >= t_max {
            return Err(Error::NoCrossing { t_max });
        }
        lo = t;
        h *= 2.0;
    };
    newton_in_bracket(&f, lo, hi)
}

fn newton_in_bracket<F>(f: &F, mut lo: f64, mut hi: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<(f64, f64)>,
{
    let mut t = 0.5 * (lo + hi);
    let mut best = (f64::INFINITY, t);
    let mut prev = f64::NAN;
    for _ in 0..200 {
        let (v, d) = f(t)?;
        if v.abs() < best.0 {
            best = (v.abs(), t);
        }
        if v == 0.0 {
            break;
        }
        if v < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - v / d;
        let next = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == t || next == prev || hi - lo <= 2.0 * f64::EPSILON * t.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        prev = t;
        t = next;
    }
    Ok(best.1)
}

/// `log Σ e^{λ v_i}` without overflow.
pub fn log_sum_exp(values: &[f64], lambda: f64) -> f64 {
    let m = values
        .iter()
        .map(|v| lambda * v)
        .fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|v| (lambda * v - m).exp()).sum::<f64>().ln()
}

/// Smallest `λ` with `Σ e^{λ u_i(x0)} <= 1` at the seed point.
pub fn lambda0(domain: &PolytopeDomain) -> Result<f64> {
    let u = domain.values(domain.seed())?;
    let k = u.len() as f64;
    if u.len() == 1 {
        return Ok(0.0);
    }
    let closest = u.iter().map(|v| -v).fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (0.0f64, k.ln() / closest);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if log_sum_exp(&u, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(hi)
}

/// Trace norm of `dN_i` on the face's own tangent space `ker du_i`, domain in
/// a `g`-orthonormal basis.
pub fn single_face_dn_trace_norm(frame: &PointFrame, f: &FaceData) -> f64 {
    let basis = complement_basis(&f.nu, |a, b| frame.metric.inner(a, b));
    trace_norm(&(&f.dn_e * columns(&basis, f.nu.len())))
}

fn columns(vs: &[DVector<f64>], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, vs.len(), |i, j| vs[j][i])
}

/// Everything evaluated at one point of `Σ_λ`.
#[derive(Debug, Clone)]
pub struct PointGeometry {
    pub x: Vec<f64>,
    pub frame: PointFrame,
    pub faces: Vec<FaceData>,
    /// `e^{λ u_i}`.
    pub exp_weights: Vec<f64>,
    /// `g`-unit normal.
    pub nu: DVector<f64>,
    /// The `N` map, unit in `g0`.
    pub n_map: DVector<f64>,
    /// Euclidean unit normal of `Σ_λ`.
    pub nu_e: DVector<f64>,
    /// `g`-orthonormal basis of `T_xΣ_λ`.
    pub tangent: Vec<DVector<f64>>,
    /// Euclidean orthonormal basis of `N^⊥`.
    pub codomain: Vec<DVector<f64>>,
    /// `dN` in the two bases above, rows indexed by the codomain basis.
    pub dn: DMatrix<f64>,
    pub tr_n: f64,
    /// Mean curvature from the weighted face expansion.
    pub h: f64,
    /// Mean curvature of the level set `{F_λ = 1}` computed directly.
    pub h_level: f64,
    pub v_terms: [f64; 5],
    pub v: f64,
    /// `|Σ e^{λu_i} du_i|_g`.
    pub c1: f64,
    /// `|Σ e^{λu_i} du_i|_{g0}`.
    pub c1_e: f64,
    /// `|Σ e^{λu_i} |∇u_i| N_i|_{g0}`.
    pub c2: f64,
}

/// One ray sample of `Σ_λ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceSample {
    pub x: Vec<f64>,
    pub lambda: f64,
    pub omega: Vec<f64>,
    pub t: f64,
    pub nu: Vec<f64>,
    pub n_map: Vec<f64>,
    pub h: f64,
    pub h_level: f64,
    pub tr_n: f64,
    pub v: f64,
    pub v_terms: [f64; 5],
    /// `g`-area quadrature weight.
    pub weight: f64,
    /// Three largest face values with indices, decreasing.
    pub top: Vec<(usize, f64)>,
    pub residual: f64,
    pub c1: f64,
    pub c1_e: f64,
    pub c2: f64,
}

impl SurfaceSample {
    /// `max{−V_λ, 0}`.
    pub fn neg_v(&self) -> f64 {
        (-self.v).max(0.0)
    }

    pub fn region(&self, r: f64) -> RegionTag {
        region::classify(&self.top, self.lambda, r)
    }
}

#[derive(Debug, Clone)]
pub struct SmoothedSurface<'a> {
    domain: &'a PolytopeDomain,
    lambda: f64,
    lambda0: f64,
    opts: SurfaceOptions,
}

impl<'a> SmoothedSurface<'a> {
    pub fn new(domain: &'a PolytopeDomain, lambda: f64, opts: SurfaceOptions) -> Result<Self> {
        let lambda0 = lambda0(domain)?;
        let u = domain.values(domain.seed())?;
        let l = log_sum_exp(&u, lambda);
        if !(lambda > 0.0) || !(l < 0.0) {
            return Err(Error::SeedOutside {
                lambda,
                value: l.exp(),
                lambda0,
            });
        }
        Ok(Self {
            domain,
            lambda,
            lambda0,
            opts,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn domain(&self) -> &PolytopeDomain {
        self.domain
    }

    pub fn options(&self) -> &SurfaceOptions {
        &self.opts
    }

    /// `log F_λ(x)`.
    pub fn log_f(&self, x: &[f64]) -> Result<f64> {
        Ok(log_sum_exp(&self.domain.values(x)?, self.lambda))
    }

    /// `|F_λ(x) − 1|`.
    pub fn residual(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_f(x)?.exp_m1().abs())
    }

    fn log_f_along(&self, x: &[f64], dir: &[f64]) -> Result<(f64, f64)> {
        let p = self.domain.params();
        let mut vals = Vec::with_capacity(self.domain.face_count());
        let mut ders = Vec::with_capacity(self.domain.face_count());
        for f in self.domain.faces() {
            let d = f.eval_dir(x, dir, p)?;
            vals.push(d.value);
            ders.push(d.deriv);
        }
        let l = log_sum_exp(&vals, self.lambda);
        let dl = vals
            .iter()
            .zip(&ders)
            .map(|(v, d)| (self.lambda * v - l).exp() * self.lambda * d)
            .sum();
        Ok((l, dl))
    }

    /// Point of `Σ_λ` on the ray `x0 + tω`.
    pub fn raycast(&self, omega: &[f64]) -> Result<(Vec<f64>, f64)> {
        let t = first_crossing(
            |t| self.log_f_along(&self.domain.ray_point(omega, t), omega),
            0.0,
            self.opts.t_max,
        )?;
        let x = self.domain.ray_point(omega, t);
        let res = self.residual(&x)?;
        if !(res < self.opts.residual_tol) {
            return Err(Error::Degenerate(format!(
                "raycast residual {res:e} exceeds {:e}",
                self.opts.residual_tol
            )));
        }
        Ok((x, t))
    }

    /// Move `x` along `dir` onto `Σ_λ` by Newton's method.
    pub fn project(&self, x: &[f64], dir: &[f64]) -> Result<Vec<f64>> {
        let mut s = 0.0;
        let at = |s: f64| -> Vec<f64> { x.iter().zip(dir).map(|(a, d)| a + s * d).collect() };
        for _ in 0..100 {
            let (l, dl) = self.log_f_along(&at(s), dir)?;
            let step = l / dl;
            s -= step;
            if step.abs() <= 1e-16 * (1.0 + s.abs()) || l == 0.0 {
                break;
            }
        }
        Ok(at(s))
    }

    fn face_weights<'f>(&self, f: &'f FaceData) -> (f64, &'f DVector<f64>) {
        match self.opts.weights {
            NormalWeights::Metric => (f.norm_g, &f.d_norm_g),
            NormalWeights::Euclidean => (f.norm_e, &f.d_norm_e),
        }
    }

    /// The `N` map alone.
    pub fn normal_map(&self, x: &[f64]) -> Result<DVector<f64>> {
        let frame = self.domain.frame(x)?;
        let n = x.len();
        let mut s = DVector::zeros(n);
        for i in 0..self.domain.face_count() {
            let f = self.domain.face_data(&frame, i)?;
            let w = (self.lambda * f.value).exp();
            let (a, _) = self.face_weights(&f);
            s += &f.n_e * (w * a);
        }
        let len = linalg::enorm(&s);
        Ok(s / len)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<PointGeometry> {
        let n = x.len();
        let lambda = self.lambda;
        let frame = self.domain.frame(x)?;
        let mj = &frame.metric;
        let inner_g = |a: &DVector<f64>, b: &DVector<f64>| mj.inner(a, b);
        let faces: Vec<FaceData> = (0..self.domain.face_count())
            .map(|i| self.domain.face_data(&frame, i))
            .collect::<Result<_>>()?;
        let w: Vec<f64> = faces.iter().map(|f| (lambda * f.value).exp()).collect();

        let mut s_nu = DVector::zeros(n);
        let mut s_n = DVector::zeros(n);
        let mut dsum = DVector::zeros(n);
        for (f, wi) in faces.iter().zip(&w) {
            let (a_n, _) = self.face_weights(f);
            s_nu += &f.nu * (wi * f.norm_g);
            s_n += &f.n_e * (wi * a_n);
            dsum += &f.du * *wi;
        }
        let d_g = mj.norm(&s_nu);
        let d_n = linalg::enorm(&s_n);
        if !(d_g >= self.opts.normal_floor) || !(d_n >= self.opts.normal_floor) {
            return Err(Error::Degenerate(format!(
                "normal sums vanish (|Σ|∇u|ν| = {d_g:e}, |Σ|∇u|N| = {d_n:e})"
            )));
        }
        let nu = &s_nu / d_g;
        let n_map = &s_n / d_n;
        let c1 = mj.conorm(&dsum);
        let c1_e = linalg::enorm(&dsum);
        let nu_e = &dsum / c1_e;

        let tangent = complement_basis(&nu, inner_g);
        let codomain = complement_basis(&n_map, linalg::dot);
        let e_mat = columns(&tangent, n);

        let (mut t1, mut t2, mut t3, mut t4, mut t5) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut dn_full = DMatrix::zeros(n, n - 1);
        for (f, wi) in faces.iter().zip(&w) {
            let (a_n, da_n) = self.face_weights(f);
            let a_g = f.norm_g;
            let pi_nu = &f.nu - &nu * mj.inner(&f.nu, &nu);
            let p_n = &f.n_e - &n_map * linalg::dot(&f.n_e, &n_map);
            let p = mj.norm(&pi_nu);
            let q = linalg::enorm(&p_n);
            let hnn = (nu.transpose() * &f.cov_hess * &nu)[(0, 0)];
            let dni = &f.dn_e * &e_mat;
            t1 += wi * a_g * a_g * p * p;
            t2 += wi * (f.laplacian - hnn);
            t3 += wi * a_n * a_g * p * q;
            t4 += wi * mj.conorm(da_n) * q;
            t5 += wi * a_n * trace_norm(&dni);

            let du_e = f.du.transpose() * &e_mat;
            let da_e = da_n.transpose() * &e_mat;
            dn_full += &f.n_e * ((du_e * (lambda * a_n) + da_e) * *wi);
            dn_full += dni * (wi * a_n);
        }
        let t1 = lambda * t1 / d_g;
        let t2 = t2 / d_g;
        let t3 = lambda * t3 / d_n;
        let t4 = t4 / d_n;
        let t5 = t5 / d_n;
        let v = ((t1 - t3) + t2) - t4 - t5;
        let h = t1 + t2;

        let dn = columns(&codomain, n).transpose() * dn_full / d_n;
        let tr_n = trace_norm(&dn);
        let h_level = self.level_set_mean_curvature(&frame, &faces, &w);

        Ok(PointGeometry {
            x: x.to_vec(),
            frame,
            faces,
            exp_weights: w,
            nu,
            n_map,
            nu_e,
            tangent,
            codomain,
            dn,
            tr_n,
            h,
            h_level,
            v_terms: [t1, t2, t3, t4, t5],
            v,
            c1,
            c1_e,
            c2: d_n,
        })
    }

    /// `(Δ_g F − ∇²F(ν,ν)) / |∇F|_g` for `F = Σ e^{λ u_i}`, with all
    /// derivatives divided by `λ`.
    fn level_set_mean_curvature(&self, frame: &PointFrame, faces: &[FaceData], w: &[f64]) -> f64 {
        let n = frame.x.len();
        let mj = &frame.metric;
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        for (f, wi) in faces.iter().zip(w) {
            grad += &f.du * *wi;
            hess += (&f.du * f.du.transpose() * self.lambda + &f.hess) * *wi;
        }
        let jet = Jet2::from_parts(0.0, grad.as_slice(), &hess);
        let cov = riemann::hessian_g(&jet, &frame.gamma);
        let len = mj.conorm(&grad);
        let nu = mj.sharp(&grad) / len;
        let lap = if mj.flat {
            cov.trace()
        } else {
            mj.ginv.component_mul(&cov).sum()
        };
        let hnn = (nu.transpose() * &cov * &nu)[(0, 0)];
        (lap - hnn) / len
    }

    /// Full sample on the ray in direction `omega`; `measure` is the sphere
    /// measure carried by one ray.
    pub fn sample(&self, omega: &[f64], measure: f64) -> Result<SurfaceSample> {
        let (x, t) = self.raycast(omega)?;
        let geom = self.evaluate(&x)?;
        let n = x.len();
        let om = DVector::from_column_slice(omega);
        let cos = linalg::dot(&om, &geom.nu_e);
        let ratio = if geom.frame.metric.flat {
            1.0
        } else {
            let b = columns(&complement_basis(&geom.nu_e, linalg::dot), n);
            (b.transpose() * &geom.frame.metric.g * &b).determinant().sqrt()
        };
        let weight = t.powi(n as i32 - 1) / cos * ratio * measure;
        let values: Vec<f64> = geom.faces.iter().map(|f| f.value).collect();
        Ok(SurfaceSample {
            residual: self.residual(&x)?,
            x,
            lambda: self.lambda,
            omega: omega.to_vec(),
            t,
            nu: geom.nu.as_slice().to_vec(),
            n_map: geom.n_map.as_slice().to_vec(),
            h: geom.h,
            h_level: geom.h_level,
            tr_n: geom.tr_n,
            v: geom.v,
            v_terms: geom.v_terms,
            weight,
            top: region::top_three(&values),
            c1: geom.c1,
            c1_e: geom.c1_e,
            c2: geom.c2,
        })
    }

    /// Samples along `count` low-discrepancy directions, in direction order.
    pub fn sample_rays(&self, count: usize) -> Result<Vec<SurfaceSample>> {
        let n = self.domain.dim();
        let measure = directions::sphere_measure(n) / count as f64;
        let dirs = directions::directions(n, count);
        let out: Vec<Result<SurfaceSample>> =
            dirs.par_iter().map(|w| self.sample(w, measure)).collect();
        out.into_iter().collect()
    }

    /// Default finite-difference step for [`Self::dn_matrix_fd`].
    pub fn fd_step(&self, geom: &PointGeometry) -> f64 {
        5e-3 / (self.lambda * geom.c1_e).max(1.0)
    }

    /// `dN` by central differences of the `N` map along curves in `Σ_λ`,
    /// Richardson-extrapolated; same bases as [`PointGeometry::dn`].
    pub fn dn_matrix_fd(&self, geom: &PointGeometry, h: f64) -> Result<DMatrix<f64>> {
        let n = geom.x.len();
        let mut out = DMatrix::zeros(n - 1, n - 1);
        let dir = geom.nu_e.as_slice();
        let central = |e: &DVector<f64>, s: f64| -> Result<DVector<f64>> {
            let plus: Vec<f64> = geom.x.iter().zip(e.iter()).map(|(a, b)| a + s * b).collect();
            let minus: Vec<f64> = geom.x.iter().zip(e.iter()).map(|(a, b)| a - s * b).collect();
            let np = self.normal_map(&self.project(&plus, dir)?)?;
            let nm = self.normal_map(&self.project(&minus, dir)?)?;
            Ok((np - nm) / (2.0 * s))
        };
        for (b, e) in geom.tangent.iter().enumerate() {
            let coarse = central(e, h)?;
            let fine = central(e, 0.5 * h)?;
            let d = (fine * 4.0 - coarse) / 3.0;
            for (a, f) in geom.codomain.iter().enumerate() {
                out[(a, b)] = linalg::dot(f, &d);
            }
        }
        Ok(out)
    }
}

/// Infima over samples of `|Σ e^{λu_i} du_i|_g` and `|Σ e^{λu_i} |∇u_i| N_i|_{g0}`.
pub fn c_constants(samples: &[SurfaceSample]) -> (f64, f64) {
    samples.iter().fold((f64::INFINITY, f64::INFINITY), |(a, b), s| {
        (a.min(s.c1), b.min(s.c2))
    })
}

/// Sample table as CSV; `region` is the stratum at radius `r`.
pub fn samples_csv(samples: &[SurfaceSample], r: f64) -> String {
    let n = samples.first().map_or(0, |s| s.x.len());
    let mut head: Vec<String> = Vec::new();
    for prefix in ["x", "nu", "N"] {
        for k in 1..=n {
            head.push(format!("{prefix}{k}"));
        }
    }
    head.extend(["H", "trN", "V", "w", "region"].map(String::from));
    let mut out = head.join(",");
    out.push('\n');
    for s in samples {
        let mut row: Vec<String> = Vec::new();
        for v in s.x.iter().chain(&s.nu).chain(&s.n_map) {
            row.push(format!("{v:e}"));
        }
        for v in [s.h, s.tr_n, s.v, s.weight] {
            row.push(format!("{v:e}"));
        }
        row.push(s.region(r).kind.name().to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
