//! Rotationally symmetric exteriors `g = φ(s)² ds² + s² dΩ²` on `R³ \ B_{s0}`.
//!
//! Centered coordinate spheres move by inverse mean curvature flow with
//! `s(t) = s0 e^{t/2}`, which makes the Hawking mass pipeline explicit.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::domain::PolytopeDomain;
use crate::dsl::{Expression, Func, Node, ParseOptions, Params};
use crate::error::{Error, Result};
use crate::riemann::{self, MetricField};

const SPHERE_RADIUS: &str = "sphere_radius";

/// Defaults for the `imcf` pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExteriorTolerances {
    /// Slack allowed in each inequality of the chain.
    pub inequality: f64,
    /// Negative scalar curvature tolerated by the `R_g >= 0` gate.
    pub curvature: f64,
    /// Decrease of `m_H` tolerated between consecutive grid radii.
    pub monotone: f64,
}

impl Default for ExteriorTolerances {
    fn default() -> Self {
        Self {
            inequality: 1e-10,
            curvature: 1e-8,
            monotone: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RotSymExterior {
    phi: Expression,
    params: Params,
    s0: f64,
    s_max: f64,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Golub–Welsch).
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DMatrix::<f64>::zeros(q, q);
    for k in 1..q {
        let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
        jac[(k, k - 1)] = b;
        jac[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..q)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

fn log_grid(a: f64, b: f64, count: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..count)
        .map(|k| {
            if k == 0 {
                a
            } else if k + 1 == count {
                b
            } else {
                (la + (lb - la) * k as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

impl RotSymExterior {
    /// `phi` is an expression in the single variable `s` (alias of `x1`).
    pub fn parse(phi: &str, s0: f64, s_max: Option<f64>, params: Params) -> Result<Self> {
        let opts = ParseOptions::new(1).with_alias("s", 0);
        let phi = Expression::parse_with(phi, &opts)?;
        Self::new(phi, s0, s_max, params)
    }

    pub fn new(phi: Expression, s0: f64, s_max: Option<f64>, params: Params) -> Result<Self> {
        if phi.dim() != 1 {
            return Err(Error::Invalid("warp function must depend on s only".into()));
        }
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(Error::Invalid(format!("boundary radius must be positive, got {s0}")));
        }
        let s_max = s_max.unwrap_or(1e4 * s0);
        if !(s_max > 4.0 * s0) {
            return Err(Error::Invalid(format!(
                "s_max = {s_max} must exceed 4 s0 = {}",
                4.0 * s0
            )));
        }
        let ext = Self {
            phi,
            params,
            s0,
            s_max,
        };
        for s in log_grid(s0, s_max, 2001) {
            let v = ext.phi(s)?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!("warp function is not positive at s = {s}: {v}")));
            }
        }
        Ok(ext)
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    pub fn phi(&self, s: f64) -> Result<f64> {
        Ok(self.phi.eval(&[s], &self.params)?)
    }

    /// `H_g = 2/(s φ(s))` of the coordinate sphere of radius `s`.
    pub fn sphere_mean_curvature(&self, s: f64) -> Result<f64> {
        Ok(2.0 / (s * self.phi(s)?))
    }

    pub fn imcf_radius(&self, t: f64) -> f64 {
        self.s0 * (0.5 * t).exp()
    }

    /// `s(t)` by classical RK4 on `ds/dt = 1/(H φ)`.
    pub fn imcf_radius_rk4(&self, t: f64, steps: usize) -> Result<f64> {
        let rhs = |s: f64| -> Result<f64> { Ok(1.0 / (self.sphere_mean_curvature(s)? * self.phi(s)?)) };
        let h = t / steps as f64;
        let mut s = self.s0;
        for _ in 0..steps {
            let k1 = rhs(s)?;
            let k2 = rhs(s + 0.5 * h * k1)?;
            let k3 = rhs(s + 0.5 * h * k2)?;
            let k4 = rhs(s + h * k3)?;
            s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        Ok(s)
    }

    /// `m_H = (s/2)(1 − φ^{−2})`.
    pub fn hawking_mass(&self, s: f64) -> Result<f64> {
        let p = self.phi(s)?;
        Ok(0.5 * s * (1.0 - 1.0 / (p * p)))
    }

    /// The metric in Cartesian coordinates:
    /// `g_ij = δ_ij + (φ(|x|)² − 1) x_i x_j / |x|²`.
    pub fn cartesian_metric(&self) -> Result<MetricField> {
        let r2 = (0..3)
            .map(|i| Node::pow(Node::Var(i), Node::Num(2.0)))
            .reduce(Node::add)
            .expect("three terms");
        let r = Node::call(Func::Sqrt, r2.clone());
        let phi_r = self.phi.root().substitute(0, &r);
        let k = Node::div(
            Node::sub(Node::pow(phi_r, Node::Num(2.0)), Node::Num(1.0)),
            r2,
        );
        let rows = (0..3)
            .map(|i| {
                (i..3)
                    .map(|j| {
                        let xx = Node::mul(Node::mul(k.clone(), Node::Var(i)), Node::Var(j));
                        let e = if i == j { Node::add(Node::Num(1.0), xx) } else { xx };
                        Expression::from_node(e, 3).map_err(Error::from)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        MetricField::from_upper(3, rows)
    }

    /// Coordinate sphere of radius `s` as a one-face domain in Cartesian form.
    pub fn sphere_domain(&self, s: f64, metric: &MetricField) -> Result<PolytopeDomain> {
        let r2 = (0..3)
            .map(|i| Node::pow(Node::Var(i), Node::Num(2.0)))
            .reduce(Node::add)
            .expect("three terms");
        let face = Node::sub(
            r2,
            Node::pow(Node::Param(SPHERE_RADIUS.into()), Node::Num(2.0)),
        );
        let mut params = self.params.clone();
        params.insert(SPHERE_RADIUS.into(), s);
        PolytopeDomain::new(
            vec![Expression::from_node(face, 3)?],
            metric.clone(),
            params,
            vec![0.0; 3],
        )
    }

    /// Level-set mean curvature of the coordinate sphere at `s·dir` computed
    /// from the Cartesian metric.
    pub fn level_set_mean_curvature(&self, s: f64, dir: &[f64], metric: &MetricField) -> Result<f64> {
        let d = self.sphere_domain(s, metric)?;
        let x: Vec<f64> = dir.iter().map(|c| c * s).collect();
        d.boundary_mean_curvature(&x, 0)
    }

    /// Area and `∫ H²` of the coordinate sphere of radius `s` by Gauss–Legendre
    /// in `cos θ` times the trapezoid rule in the azimuth, using `metric` for
    /// both the area element and `H`.
    pub fn sphere_integrals(&self, s: f64, metric: &MetricField, q: usize) -> Result<(f64, f64)> {
        let d = self.sphere_domain(s, metric)?;
        let (z, wz) = gauss_legendre(q);
        let naz = 2 * q;
        let dphi = 2.0 * PI / naz as f64;
        let mut area = Vec::with_capacity(q * naz);
        let mut h2 = Vec::with_capacity(q * naz);
        for (zk, wk) in z.iter().zip(&wz) {
            let st = (1.0 - zk * zk).sqrt();
            for j in 0..naz {
                let ph = (j as f64 + 0.5) * dphi;
                let x = [s * st * ph.cos(), s * st * ph.sin(), s * zk];
                let frame = d.frame(&x)?;
                let h = d.face_data(&frame, 0)?.level_set_mean_curvature();
                let e_th = DVector::from_vec(vec![s * zk * ph.cos(), s * zk * ph.sin(), -s * st]);
                let e_ph = DVector::from_vec(vec![-s * st * ph.sin(), s * st * ph.cos(), 0.0]);
                let gm = &frame.metric;
                let det = gm.inner(&e_th, &e_th) * gm.inner(&e_ph, &e_ph)
                    - gm.inner(&e_th, &e_ph).powi(2);
                // dθ = dz / sin θ
                let da = det.sqrt() / st * wk * dphi;
                area.push(da);
                h2.push(da * h * h);
            }
        }
        Ok((crate::linalg::pairwise_sum(&area), crate::linalg::pairwise_sum(&h2)))
    }

    /// `√(|Σ|/(16π)³)(16π − ∫H²)` from [`Self::sphere_integrals`].
    pub fn hawking_mass_quadrature(&self, s: f64, metric: &MetricField, q: usize) -> Result<f64> {
        let (area, h2) = self.sphere_integrals(s, metric, q)?;
        let sixteen_pi = 16.0 * PI;
        Ok((area / sixteen_pi.powi(3)).sqrt() * (sixteen_pi - h2))
    }

    /// Largest `|φ − 1|·s` over the last decade below `s_max` and over the
    /// decade before it; the gate passes when the tail does not grow.
    pub fn asymptotic_gate(&self) -> Result<AsymptoticGate> {
        let q = |a: f64, b: f64| -> Result<f64> {
            let mut worst: f64 = 0.0;
            for s in log_grid(a, b, 41) {
                worst = worst.max((self.phi(s)? - 1.0).abs() * s);
            }
            Ok(worst)
        };
        let last = q(self.s_max / 10.0, self.s_max)?;
        let previous = q(self.s_max / 100.0, self.s_max / 10.0)?;
        Ok(AsymptoticGate {
            last_decade: last,
            previous_decade: previous,
            passed: last <= 2.0 * previous + 1e-12,
        })
    }

    /// `lim (s/2)(1 − φ^{−2})` by Richardson extrapolation in `1/s` on
    /// `{s_max/4, s_max/2, s_max}`, with an error estimate.
    pub fn adm_mass(&self) -> Result<(f64, f64)> {
        let gate = self.asymptotic_gate()?;
        if !gate.passed {
            return Err(Error::Degenerate(format!(
                "warp function is not asymptotically flat: |phi - 1| s grows from {:e} to {:e} over the last decade",
                gate.previous_decade, gate.last_decade
            )));
        }
        let m1 = self.hawking_mass(self.s_max / 4.0)?;
        let m2 = self.hawking_mass(self.s_max / 2.0)?;
        let m3 = self.hawking_mass(self.s_max)?;
        let a1 = 2.0 * m2 - m1;
        let a2 = 2.0 * m3 - m2;
        let r = (4.0 * a2 - a1) / 3.0;
        Ok((r, (r - a2).abs()))
    }

    /// Flow rows for `t` evenly spaced in `[0, t_max]`.
    pub fn flow_trace(&self, t_max: f64, rows: usize) -> Result<FlowTrace> {
        let rows = rows.max(2);
        let area0 = 4.0 * PI * self.s0 * self.s0;
        let out = (0..rows)
            .map(|k| {
                let t = t_max * k as f64 / (rows - 1) as f64;
                let s = self.imcf_radius(t);
                Ok(FlowRow {
                    t,
                    s,
                    area: 4.0 * PI * s * s,
                    area_expected: area0 * t.exp(),
                    h: self.sphere_mean_curvature(s)?,
                    m_h: self.hawking_mass(s)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FlowTrace { rows: out })
    }

    /// Flow from `s0` up to `s_max`.
    pub fn default_flow_trace(&self, rows: usize) -> Result<FlowTrace> {
        self.flow_trace(2.0 * (self.s_max / self.s0).ln(), rows)
    }

    /// Scalar curvature of the Cartesian form at radii on a log grid along a
    /// few fixed directions; returns the smallest value.
    pub fn min_scalar_curvature(&self, metric: &MetricField, radii: usize) -> Result<f64> {
        let dirs = [
            [1.0, 0.0, 0.0],
            [0.0, 0.6, 0.8],
            [0.48, -0.6, 0.64],
            [-0.36, 0.48, -0.8],
        ];
        let mut worst = f64::INFINITY;
        for s in log_grid(self.s0, self.s_max, radii) {
            for d in &dirs {
                let x: Vec<f64> = d.iter().map(|c| c * s).collect();
                worst = worst.min(riemann::scalar_curvature(metric, &x, &self.params)?);
            }
        }
        Ok(worst)
    }

    /// The inequality chain at the boundary sphere, in order.
    pub fn inequality_chain(&self, tol: &ExteriorTolerances) -> Result<ExteriorReport> {
        let sixteen_pi = 16.0 * PI;
        let metric = self.cartesian_metric()?;
        let euclid = MetricField::euclidean(3);
        let s0 = self.s0;
        let h_g = self.sphere_mean_curvature(s0)?;
        let h_0 = 2.0 / s0;
        let (_, boundary_integral) = self.sphere_integrals(s0, &metric, 8)?;
        let (_, pivot) = self.sphere_integrals(s0, &euclid, 8)?;
        let r_min = self.min_scalar_curvature(&metric, 49)?;
        let r_ok = r_min >= -tol.curvature;

        let grid = log_grid(s0, self.s_max, 129);
        let masses = grid
            .iter()
            .map(|s| self.hawking_mass(*s))
            .collect::<Result<Vec<_>>>()?;
        let monotone_margin = masses
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        let m0 = masses[0];
        let adm = self.adm_mass();
        let gate = self.asymptotic_gate()?;

        let status = |ok: bool| if ok { CheckStatus::Pass } else { CheckStatus::Fail };
        let needs_r = |ok: bool| {
            if r_ok {
                status(ok)
            } else {
                CheckStatus::HypothesisViolated
            }
        };
        let mut checks = vec![
            CheckRow {
                name: "mean_curvature_positive".into(),
                status: status(h_g > 0.0),
                margin: h_g,
            },
            CheckRow {
                name: "boundary_comparison".into(),
                status: status(h_g <= h_0 + tol.inequality),
                margin: h_0 - h_g,
            },
            CheckRow {
                name: "boundary_willmore_bound".into(),
                status: status(boundary_integral <= sixteen_pi + tol.inequality),
                margin: sixteen_pi - boundary_integral,
            },
            CheckRow {
                name: "hawking_mass_monotone".into(),
                status: needs_r(monotone_margin >= -tol.monotone),
                margin: monotone_margin,
            },
        ];
        let (m_adm, m_adm_error) = match adm {
            Ok((m, e)) => {
                checks.push(CheckRow {
                    name: "hawking_mass_below_adm".into(),
                    status: needs_r(m0 <= m + e + tol.inequality),
                    margin: m - m0,
                });
                (Some(m), Some(e))
            }
            Err(_) => {
                checks.push(CheckRow {
                    name: "hawking_mass_below_adm".into(),
                    status: CheckStatus::HypothesisViolated,
                    margin: f64::NAN,
                });
                (None, None)
            }
        };
        let mut violated = Vec::new();
        if !r_ok {
            violated.push("scalar_curvature_nonnegative".to_string());
        }
        if !gate.passed {
            violated.push("asymptotically_flat".to_string());
        }
        Ok(ExteriorReport {
            s0,
            s_max: self.s_max,
            h_g,
            h_0,
            boundary_integral,
            pivot_integral: pivot,
            pivot_deviation: (pivot - sixteen_pi).abs(),
            min_scalar_curvature: r_min,
            hawking_mass_s0: m0,
            m_adm,
            m_adm_error,
            asymptotic_gate: gate,
            checks,
            violated_hypotheses: violated,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticGate {
    pub last_decade: f64,
    pub previous_decade: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowRow {
    pub t: f64,
    pub s: f64,
    pub area: f64,
    pub area_expected: f64,
    pub h: f64,
    pub m_h: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowTrace {
    pub rows: Vec<FlowRow>,
}

impl FlowTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,s,area,H,m_H\n");
        for r in &self.rows {
            out.push_str(&format!("{:e},{:e},{:e},{:e},{:e}\n", r.t, r.s, r.area, r.h, r.m_h));
        }
        out
    }

    /// Largest relative deviation of `|Σ_t|` from `|Σ_0| e^t`.
    pub fn area_growth_residual(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| ((r.area - r.area_expected) / r.area_expected).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The check relies on a hypothesis that the data violates.
    HypothesisViolated,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub status: CheckStatus,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExteriorReport {
    pub s0: f64,
    pub s_max: f64,
    pub h_g: f64,
    pub h_0: f64,
    pub boundary_integral: f64,
    pub pivot_integral: f64,
    pub pivot_deviation: f64,
    pub min_scalar_curvature: f64,
    pub hawking_mass_s0: f64,
    pub m_adm: Option<f64>,
    pub m_adm_error: Option<f64>,
    pub asymptotic_gate: AsymptoticGate,
    pub checks: Vec<CheckRow>,
    pub violated_hypotheses: Vec<String>,
}

impl ExteriorReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status == CheckStatus::Pass)
    }
}
