use thiserror::Error;

use super::{BinOp, Expression, Func, Node, Params};
use crate::jet::{Dual1, Jet2, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in `{expr}`: {reason} (value {value})")]
    Domain {
        expr: String,
        reason: &'static str,
        value: f64,
    },
    #[error("unbound parameter `{0}`")]
    UnboundParameter(String),
    #[error("point has dimension {got}, expression expects {expected}")]
    Dimension { got: usize, expected: usize },
}

fn domain(node: &Node, reason: &'static str, value: f64) -> EvalError {
    EvalError::Domain {
        expr: node.to_string(),
        reason,
        value,
    }
}

fn integer_exponent(p: f64) -> Option<i32> {
    (p.fract() == 0.0 && p.abs() <= 1024.0).then_some(p as i32)
}

fn eval_node<T: Scalar>(node: &Node, vars: &[T], params: &Params) -> Result<T, EvalError> {
    let like = &vars[0];
    Ok(match node {
        Node::Num(v) => T::constant(*v, like),
        Node::Var(i) => vars[*i].clone(),
        Node::Param(name) => match params.get(name) {
            Some(v) => T::constant(*v, like),
            None => return Err(EvalError::UnboundParameter(name.clone())),
        },
        Node::Neg(a) => eval_node(a, vars, params)?.neg(),
        Node::Call(f, a) => {
            let x = eval_node(a, vars, params)?;
            let v = x.value();
            match f {
                Func::Exp => {
                    let e = v.exp();
                    x.chain(e, e, e)
                }
                Func::Log => {
                    if v <= 0.0 {
                        return Err(domain(node, "log of non-positive value", v));
                    }
                    x.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
                }
                Func::Sqrt => {
                    if v <= 0.0 {
                        return Err(domain(node, "sqrt of non-positive value", v));
                    }
                    let s = v.sqrt();
                    x.chain(s, 0.5 / s, -0.25 / (s * v))
                }
                Func::Sin => {
                    let (s, c) = v.sin_cos();
                    x.chain(s, c, -s)
                }
                Func::Cos => {
                    let (s, c) = v.sin_cos();
                    x.chain(c, -s, -c)
                }
            }
        }
        Node::Bin(op, a, b) => {
            let x = eval_node(a, vars, params)?;
            let y = eval_node(b, vars, params)?;
            match op {
                BinOp::Add => x.add(&y),
                BinOp::Sub => x.sub(&y),
                BinOp::Mul => x.mul(&y),
                BinOp::Div => {
                    let v = y.value();
                    if v == 0.0 {
                        return Err(domain(node, "division by zero", v));
                    }
                    x.mul(&y.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v)))
                }
                BinOp::Pow => pow(node, &x, &y)?,
            }
        }
    })
}

fn pow<T: Scalar>(node: &Node, base: &T, exp: &T) -> Result<T, EvalError> {
    let v = base.value();
    if exp.is_constant() {
        let p = exp.value();
        if let Some(k) = integer_exponent(p) {
            if k == 0 {
                return Ok(T::constant(1.0, base));
            }
            if v == 0.0 && k < 0 {
                return Err(domain(node, "negative power of zero", v));
            }
            let kf = k as f64;
            return Ok(base.chain(
                v.powi(k),
                kf * v.powi(k - 1),
                kf * (kf - 1.0) * v.powi(k - 2),
            ));
        }
        if v <= 0.0 {
            return Err(domain(node, "fractional power of non-positive value", v));
        }
        return Ok(base.chain(
            v.powf(p),
            p * v.powf(p - 1.0),
            p * (p - 1.0) * v.powf(p - 2.0),
        ));
    }
    if v <= 0.0 {
        return Err(domain(node, "variable power of non-positive value", v));
    }
    let l = base.chain(v.ln(), 1.0 / v, -1.0 / (v * v));
    let z = exp.mul(&l);
    let e = z.value().exp();
    Ok(z.chain(e, e, e))
}

impl Expression {
    fn check_dim(&self, got: usize) -> Result<(), EvalError> {
        if got != self.dim {
            return Err(EvalError::Dimension {
                got,
                expected: self.dim,
            });
        }
        Ok(())
    }

    /// Plain value at `x`.
    pub fn eval(&self, x: &[f64], params: &Params) -> Result<f64, EvalError> {
        self.check_dim(x.len())?;
        eval_node(&self.root, x, params)
    }

    /// Value and directional derivative along `dir` at `x`.
    pub fn eval_dir(&self, x: &[f64], dir: &[f64], params: &Params) -> Result<Dual1, EvalError> {
        self.check_dim(x.len())?;
        let vars: Vec<Dual1> = x.iter().zip(dir).map(|(v, d)| Dual1::new(*v, *d)).collect();
        eval_node(&self.root, &vars, params)
    }

    /// Exact value, gradient and Hessian at `x`.
    pub fn eval_jet2(&self, x: &[f64], params: &Params) -> Result<Jet2, EvalError> {
        self.check_dim(x.len())?;
        let n = x.len();
        let vars: Vec<Jet2> = (0..n).map(|i| Jet2::variable(n, i, x[i])).collect();
        eval_node(&self.root, &vars, params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_params() -> Params {
        Params::new()
    }

    #[test]
    fn polynomial_jet() {
        let e = Expression::parse("x1^2+x2^2", 2).unwrap();
        let j = e.eval_jet2(&[1.0, 2.0], &no_params()).unwrap();
        assert_eq!(j.val(), 5.0);
        assert_eq!(j.grad(), &[2.0, 4.0]);
        assert_eq!(j.hess(0, 0), 2.0);
        assert_eq!(j.hess(1, 1), 2.0);
        assert_eq!(j.hess(0, 1), 0.0);
    }

    #[test]
    fn exp_at_origin() {
        let e = Expression::parse("exp(x1)", 1).unwrap();
        let j = e.eval_jet2(&[0.0], &no_params()).unwrap();
        assert_eq!((j.val(), j.grad()[0], j.hess(0, 0)), (1.0, 1.0, 1.0));
    }

    #[test]
    fn parameters_bind_late() {
        let e = Expression::parse("m/x1", 1).unwrap();
        assert_eq!(
            e.eval(&[2.0], &no_params()),
            Err(EvalError::UnboundParameter("m".into()))
        );
        let mut p = Params::new();
        p.insert("m".into(), 3.0);
        assert_eq!(e.eval(&[2.0], &p).unwrap(), 1.5);
        p.insert("m".into(), 5.0);
        assert_eq!(e.eval(&[2.0], &p).unwrap(), 2.5);
    }

    #[test]
    fn domain_errors_name_subexpression() {
        let e = Expression::parse("1 + log(x1 - 1)", 1).unwrap();
        match e.eval_jet2(&[0.5], &no_params()) {
            Err(EvalError::Domain { expr, .. }) => assert_eq!(expr, "log(x1 - 1)"),
            other => panic!("unexpected {other:?}"),
        }
        let e = Expression::parse("x1/(x1 - x1)", 1).unwrap();
        assert!(matches!(e.eval(&[1.0], &no_params()), Err(EvalError::Domain { .. })));
        let e = Expression::parse("sqrt(x1)", 1).unwrap();
        assert!(matches!(e.eval(&[0.0], &no_params()), Err(EvalError::Domain { .. })));
    }

    #[test]
    fn powers() {
        let p = no_params();
        let e = Expression::parse("x1^-2", 1).unwrap();
        let j = e.eval_jet2(&[-2.0], &p).unwrap();
        assert_eq!(j.val(), 0.25);
        assert_eq!(j.grad()[0], 0.25); // -2 x^-3 at -2
        let e = Expression::parse("x1^0.5", 1).unwrap();
        let j = e.eval_jet2(&[4.0], &p).unwrap();
        assert!((j.grad()[0] - 0.25).abs() < 1e-15);
        assert!(e.eval(&[-1.0], &p).is_err());
        let e = Expression::parse("x1^x2", 2).unwrap();
        let j = e.eval_jet2(&[2.0, 3.0], &p).unwrap();
        assert!((j.val() - 8.0).abs() < 1e-12);
        assert!((j.grad()[0] - 12.0).abs() < 1e-12);
        assert!((j.grad()[1] - 8.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn directional_matches_gradient() {
        let e = Expression::parse("sin(x1*x2) + exp(x3)/x1", 3).unwrap();
        let x = [0.7, -1.2, 0.3];
        let d = [0.2, 0.5, -1.0];
        let j = e.eval_jet2(&x, &no_params()).unwrap();
        let dd = e.eval_dir(&x, &d, &no_params()).unwrap();
        let expect: f64 = j.grad().iter().zip(&d).map(|(g, v)| g * v).sum();
        assert!((dd.deriv - expect).abs() < 1e-14);
        assert_eq!(dd.value, j.val());
    }
}
