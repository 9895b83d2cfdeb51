//! Metric fields and the pointwise Riemannian toolbox.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::dsl::{Expression, Params};
use crate::error::{Error, Result};
use crate::jet::Jet2;
use crate::linalg;

/// A symmetric 2-tensor field given entrywise by expressions.
#[derive(Debug, Clone)]
pub struct MetricField {
    n: usize,
    /// Packed upper triangle, row major; empty for the Euclidean metric.
    entries: Vec<Expression>,
}

impl MetricField {
    pub fn euclidean(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    /// Build from the upper triangle, given row by row (`rows[i]` holds
    /// `g_ii, g_i(i+1), ..., g_in`).
    pub fn from_upper(n: usize, rows: Vec<Vec<Expression>>) -> Result<Self> {
        if rows.len() != n || rows.iter().enumerate().any(|(i, r)| r.len() != n - i) {
            return Err(Error::Invalid(format!(
                "metric needs {n} upper-triangular rows of lengths {n}..1"
            )));
        }
        if rows.iter().flatten().any(|e| e.dim() != n) {
            return Err(Error::Invalid("metric entry has the wrong dimension".into()));
        }
        Ok(Self {
            n,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    /// `g = exp(2 f) g0`.
    pub fn conformal(f: &Expression) -> Result<Self> {
        use crate::dsl::{Func, Node};
        let n = f.dim();
        let factor = Node::call(Func::Exp, Node::mul(Node::Num(2.0), f.root().clone()));
        let zero = Expression::from_node(Node::Num(0.0), n)?;
        let diag = Expression::from_node(factor, n)?;
        let rows = (0..n)
            .map(|i| {
                (i..n)
                    .map(|j| if i == j { diag.clone() } else { zero.clone() })
                    .collect()
            })
            .collect();
        Self::from_upper(n, rows)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_euclidean(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, i: usize, j: usize) -> Option<&Expression> {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let n = self.n;
        self.entries.get(i * n - i * (i + 1) / 2 + j)
    }

    pub fn parameters(&self) -> Vec<String> {
        let mut out = Vec::new();
        for e in &self.entries {
            e.root().params(&mut out);
        }
        out
    }

    /// Metric matrix only (no derivatives), SPD-checked.
    pub fn matrix_at(&self, x: &[f64], params: &Params) -> Result<DMatrix<f64>> {
        let n = self.n;
        if self.is_euclidean() {
            return Ok(DMatrix::identity(n, n));
        }
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.entry(i, j).expect("entry").eval(x, params)?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        check_spd(&g)?;
        Ok(g)
    }
}

/// Metric, inverse, and exact first and second partials at a point.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub g: DMatrix<f64>,
    pub ginv: DMatrix<f64>,
    /// `dg[k][(i, j)] = d_k g_ij`.
    pub dg: Vec<DMatrix<f64>>,
    /// `d2g[k * n + l][(i, j)] = d_k d_l g_ij`.
    pub d2g: Vec<DMatrix<f64>>,
    /// Set for the Euclidean metric; lets callers skip work.
    pub flat: bool,
}

impl MetricJet {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn euclidean(n: usize) -> Self {
        Self {
            g: DMatrix::identity(n, n),
            ginv: DMatrix::identity(n, n),
            dg: vec![DMatrix::zeros(n, n); n],
            d2g: vec![DMatrix::zeros(n, n); n * n],
            flat: true,
        }
    }

    pub fn d2(&self, k: usize, l: usize) -> &DMatrix<f64> {
        &self.d2g[k * self.dim() + l]
    }

    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        if self.flat {
            return linalg::dot(a, b);
        }
        (a.transpose() * &self.g * b)[(0, 0)]
    }

    /// Norm of a tangent vector.
    pub fn norm(&self, v: &DVector<f64>) -> f64 {
        self.inner(v, v).sqrt()
    }

    /// Norm of a covector (uses the inverse metric).
    pub fn conorm(&self, w: &DVector<f64>) -> f64 {
        if self.flat {
            return linalg::enorm(w);
        }
        (w.transpose() * &self.ginv * w)[(0, 0)].sqrt()
    }

    /// Raise an index: `g^{-1} w`.
    pub fn sharp(&self, w: &DVector<f64>) -> DVector<f64> {
        if self.flat {
            return w.clone();
        }
        &self.ginv * w
    }

    /// Lower an index: `g v`.
    pub fn flat_of(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.flat {
            return v.clone();
        }
        &self.g * v
    }

    /// `d_k g^{ij} = -g^{ia} d_k g_ab g^{bj}`.
    pub fn dginv(&self, k: usize) -> DMatrix<f64> {
        -(&self.ginv * &self.dg[k] * &self.ginv)
    }
}

fn check_spd(g: &DMatrix<f64>) -> Result<()> {
    let trace = g.trace();
    let min = SymmetricEigen::new(g.clone()).eigenvalues.min();
    if !(trace > 0.0) || !(min > 1e-10 * trace) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min,
            trace,
        });
    }
    Ok(())
}

pub fn metric_jet(field: &MetricField, x: &[f64], params: &Params) -> Result<MetricJet> {
    let n = field.dim();
    if x.len() != n {
        return Err(Error::Invalid(format!(
            "point has dimension {}, metric expects {n}",
            x.len()
        )));
    }
    if field.is_euclidean() {
        return Ok(MetricJet::euclidean(n));
    }
    let mut g = DMatrix::zeros(n, n);
    let mut dg = vec![DMatrix::zeros(n, n); n];
    let mut d2g = vec![DMatrix::zeros(n, n); n * n];
    for i in 0..n {
        for j in i..n {
            let jet: Jet2 = field.entry(i, j).expect("entry").eval_jet2(x, params)?;
            g[(i, j)] = jet.val();
            g[(j, i)] = jet.val();
            for k in 0..n {
                dg[k][(i, j)] = jet.grad()[k];
                dg[k][(j, i)] = jet.grad()[k];
                for l in 0..n {
                    let h = jet.hess(k, l);
                    d2g[k * n + l][(i, j)] = h;
                    d2g[k * n + l][(j, i)] = h;
                }
            }
        }
    }
    check_spd(&g)?;
    let ginv = g
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(Error::NotPositiveDefinite {
            min_eigenvalue: 0.0,
            trace: g.trace(),
        })?;
    Ok(MetricJet {
        g,
        ginv,
        dg,
        d2g,
        flat: false,
    })
}

/// Christoffel symbols of the second kind, `gamma[k][(i, j)] = Γ^k_ij`.
#[derive(Debug, Clone)]
pub struct Christoffel {
    pub gamma: Vec<DMatrix<f64>>,
}

impl Christoffel {
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.gamma[k][(i, j)]
    }
}

/// Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij).
pub fn christoffel(jet: &MetricJet) -> Christoffel {
    let n = jet.dim();
    if jet.flat {
        return Christoffel {
            gamma: vec![DMatrix::zeros(n, n); n],
        };
    }
    // first kind: lower[l][(i, j)] = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
    let mut lower = vec![DMatrix::zeros(n, n); n];
    for (l, low) in lower.iter_mut().enumerate() {
        for i in 0..n {
            for j in i..n {
                let v =
                    0.5 * (jet.dg[i][(j, l)] + jet.dg[j][(i, l)] - jet.dg[l][(i, j)]);
                low[(i, j)] = v;
                low[(j, i)] = v;
            }
        }
    }
    let mut gamma = vec![DMatrix::zeros(n, n); n];
    for (k, gk) in gamma.iter_mut().enumerate() {
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..n).map(|l| jet.ginv[(k, l)] * lower[l][(i, j)]).sum();
                gk[(i, j)] = v;
                gk[(j, i)] = v;
            }
        }
    }
    Christoffel { gamma }
}

/// `g^{-1} du`.
pub fn grad_g(u: &Jet2, jet: &MetricJet) -> DVector<f64> {
    jet.sharp(&u.gradient())
}

pub fn norm_g(v: &DVector<f64>, jet: &MetricJet) -> f64 {
    jet.norm(v)
}

/// Covariant Hessian `∂²u − Γ^k ∂_k u`.
pub fn hessian_g(u: &Jet2, gamma: &Christoffel) -> DMatrix<f64> {
    let mut h = u.hessian();
    for (k, gk) in gamma.gamma.iter().enumerate() {
        let dk = u.grad()[k];
        if dk != 0.0 {
            h -= gk * dk;
        }
    }
    h
}

/// `tr_g(∇²u)`.
pub fn laplacian_g(u: &Jet2, jet: &MetricJet, gamma: &Christoffel) -> f64 {
    let h = hessian_g(u, gamma);
    jet.ginv.component_mul(&h).sum()
}

/// `(1/√det g) ∂_i(√det g g^{ij} ∂_j u)`, computed without Christoffel symbols.
pub fn laplacian_divergence(u: &Jet2, jet: &MetricJet) -> f64 {
    let n = u.dim();
    let du = u.gradient();
    let mut out = jet.ginv.component_mul(&u.hessian()).sum();
    for i in 0..n {
        // ∂_i g^{ij} ∂_j u
        let dgi = jet.dginv(i);
        out += (0..n).map(|j| dgi[(i, j)] * du[j]).sum::<f64>();
        // ½ ∂_i log det g · g^{ij} ∂_j u
        let dlogdet = jet.ginv.component_mul(&jet.dg[i]).sum();
        out += 0.5 * dlogdet * (0..n).map(|j| jet.ginv[(i, j)] * du[j]).sum::<f64>();
    }
    out
}

/// Fully covariant Riemann tensor, flattened as `r[((i*n + j)*n + k)*n + l]`,
/// normalised so that the scalar curvature is `g^{ik} g^{jl} R_ijkl`.
pub fn riemann_tensor(jet: &MetricJet, gamma: &Christoffel) -> Vec<f64> {
    let n = jet.dim();
    let mut r = vec![0.0; n * n * n * n];
    if jet.flat {
        return r;
    }
    let d2 = |a: usize, b: usize, c: usize, d: usize| jet.d2(c, d)[(a, b)];
    // gl[m][(p, q)] lowered: g_mp Γ^p_... is evaluated inline
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let second = 0.5
                        * (d2(i, l, j, k) + d2(j, k, i, l) - d2(i, k, j, l) - d2(j, l, i, k));
                    let mut quad = 0.0;
                    for m in 0..n {
                        for p in 0..n {
                            quad += jet.g[(m, p)]
                                * (gamma.get(m, j, k) * gamma.get(p, i, l)
                                    - gamma.get(m, j, l) * gamma.get(p, i, k));
                        }
                    }
                    r[((i * n + j) * n + k) * n + l] = second + quad;
                }
            }
        }
    }
    r
}

pub fn scalar_curvature_from_jet(jet: &MetricJet) -> f64 {
    if jet.flat {
        return 0.0;
    }
    let n = jet.dim();
    let gamma = christoffel(jet);
    let r = riemann_tensor(jet, &gamma);
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    s += jet.ginv[(i, k)] * jet.ginv[(j, l)] * r[((i * n + j) * n + k) * n + l];
                }
            }
        }
    }
    s
}

pub fn scalar_curvature(field: &MetricField, x: &[f64], params: &Params) -> Result<f64> {
    Ok(scalar_curvature_from_jet(&metric_jet(field, x, params)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(n: usize, rows: &[&[&str]]) -> MetricField {
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|t| Expression::parse(t, n).unwrap()).collect())
            .collect();
        MetricField::from_upper(n, rows).unwrap()
    }

    #[test]
    fn euclidean_jet_is_trivial() {
        let j = metric_jet(&MetricField::euclidean(3), &[0.3, 1.0, -2.0], &Params::new()).unwrap();
        assert_eq!(j.g, DMatrix::identity(3, 3));
        assert!(j.dg.iter().all(|m| m.iter().all(|v| *v == 0.0)));
        assert!(christoffel(&j).gamma.iter().all(|m| m.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn conformal_exponential_christoffels() {
        let f = Expression::parse("x1", 2).unwrap();
        let g = MetricField::conformal(&f).unwrap();
        for x in [[0.0, 0.0], [0.4, -1.3], [-2.0, 5.0]] {
            let j = metric_jet(&g, &x, &Params::new()).unwrap();
            let c = christoffel(&j);
            assert!((c.get(0, 0, 0) - 1.0).abs() < 1e-12);
            assert!((c.get(0, 1, 1) + 1.0).abs() < 1e-12);
            assert!((c.get(1, 0, 1) - 1.0).abs() < 1e-12);
            assert!((c.get(1, 1, 0) - 1.0).abs() < 1e-12);
            assert!(c.get(1, 0, 0).abs() < 1e-12);
        }
        let j = metric_jet(&g, &[0.0, 0.0], &Params::new()).unwrap();
        assert_eq!(j.g, DMatrix::identity(2, 2));
        assert_eq!(j.dg[0], DMatrix::identity(2, 2) * 2.0);
    }

    #[test]
    fn rejects_indefinite_metric() {
        let g = field(2, &[&["1", "0"], &["x1"]]);
        assert!(matches!(
            metric_jet(&g, &[-1.0, 0.0], &Params::new()),
            Err(Error::NotPositiveDefinite { .. })
        ));
        assert!(metric_jet(&g, &[1.0, 0.0], &Params::new()).is_ok());
    }

    #[test]
    fn flat_operators_on_square_norm() {
        let u = Expression::parse("x1^2 + x2^2 + x3^2", 3).unwrap();
        let x = [0.5, -1.0, 2.0];
        let jet = MetricJet::euclidean(3);
        let uj = u.eval_jet2(&x, &Params::new()).unwrap();
        let gam = christoffel(&jet);
        assert_eq!(grad_g(&uj, &jet).as_slice(), &[1.0, -2.0, 4.0]);
        assert_eq!(hessian_g(&uj, &gam), DMatrix::identity(3, 3) * 2.0);
        assert_eq!(laplacian_g(&uj, &jet, &gam), 6.0);
    }

    #[test]
    fn constant_function_has_zero_derivatives() {
        let g = field(2, &[&["1 + x1^2", "0.1*x2"], &["2 + sin(x1)"]]);
        let jet = metric_jet(&g, &[0.3, 0.2], &Params::new()).unwrap();
        let u = Expression::parse("4.5", 2).unwrap().eval_jet2(&[0.3, 0.2], &Params::new()).unwrap();
        let gam = christoffel(&jet);
        assert_eq!(grad_g(&u, &jet).norm(), 0.0);
        assert_eq!(laplacian_g(&u, &jet, &gam), 0.0);
        assert_eq!(laplacian_divergence(&u, &jet), 0.0);
    }

    #[test]
    fn constant_scaling_is_flat() {
        let g = field(3, &[&["4", "0", "0"], &["4", "0"], &["4"]]);
        let r = scalar_curvature(&g, &[0.1, 0.2, 0.3], &Params::new()).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn stereographic_sphere_has_curvature_two() {
        let g = field(2, &[&["4/(1 + x1^2 + x2^2)^2", "0"], &["4/(1 + x1^2 + x2^2)^2"]]);
        for x in [[0.0, 0.0], [0.7, -0.2], [-1.5, 2.0]] {
            let r = scalar_curvature(&g, &x, &Params::new()).unwrap();
            assert!((r - 2.0).abs() < 1e-12, "{x:?}: {r}");
        }
    }

    #[test]
    fn conformal_scalar_curvature_closed_form() {
        // g = e^{2f} g0: R = e^{-2f}(-2(n-1)Δf - (n-2)(n-1)|∇f|²)
        let f = Expression::parse("0.2*(x1^2 + x2^2 + x3^2)", 3).unwrap();
        let g = MetricField::conformal(&f).unwrap();
        for x in [[0.1, 0.2, 0.3], [-1.0, 0.5, 0.0]] {
            let r = scalar_curvature(&g, &x, &Params::new()).unwrap();
            let r2: f64 = x.iter().map(|v| v * v).sum();
            let fv = 0.2 * r2;
            let want = (-2.0 * fv).exp() * (-4.0 * 1.2 - 2.0 * 0.16 * r2);
            assert!((r - want).abs() < 1e-12, "{r} vs {want}");
        }
    }
}
