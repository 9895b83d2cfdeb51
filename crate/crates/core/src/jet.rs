//! Forward-mode dual numbers.
//!
//! [`Jet2`] carries value, gradient and Hessian of a scalar field through one
//! evaluation pass. [`Dual1`] is the cheap first-order variant used along rays.
//! Both implement [`Scalar`], the arithmetic interface the expression
//! evaluator is generic over.

use nalgebra::{DMatrix, DVector};

/// Arithmetic interface shared by `f64`, [`Dual1`] and [`Jet2`].
///
/// Unary functions are expressed through [`Scalar::chain`], which receives the
/// function value and its first two derivatives at the current value.
pub trait Scalar: Clone {
    fn constant(c: f64, like: &Self) -> Self;
    fn value(&self) -> f64;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Apply a scalar function `f` with `f(v) = f0`, `f'(v) = f1`, `f''(v) = f2`.
    fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self;
    /// True when every derivative component is zero.
    fn is_constant(&self) -> bool;
}

impl Scalar for f64 {
    fn constant(c: f64, _: &Self) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn chain(&self, f0: f64, _: f64, _: f64) -> Self {
        f0
    }
    fn is_constant(&self) -> bool {
        true
    }
}

/// Value and one directional derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual1 {
    pub value: f64,
    pub deriv: f64,
}

impl Dual1 {
    pub fn new(value: f64, deriv: f64) -> Self {
        Self { value, deriv }
    }
}

impl Scalar for Dual1 {
    fn constant(c: f64, _: &Self) -> Self {
        Self::new(c, 0.0)
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn add(&self, o: &Self) -> Self {
        Self::new(self.value + o.value, self.deriv + o.deriv)
    }
    fn sub(&self, o: &Self) -> Self {
        Self::new(self.value - o.value, self.deriv - o.deriv)
    }
    fn mul(&self, o: &Self) -> Self {
        Self::new(
            self.value * o.value,
            self.value * o.deriv + self.deriv * o.value,
        )
    }
    fn neg(&self) -> Self {
        Self::new(-self.value, -self.deriv)
    }
    fn chain(&self, f0: f64, f1: f64, _: f64) -> Self {
        Self::new(f0, f1 * self.deriv)
    }
    fn is_constant(&self) -> bool {
        self.deriv == 0.0
    }
}

/// Second-order jet of a scalar field at a point of `R^n`.
///
/// The Hessian is stored as its packed upper triangle, so symmetry holds by
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

#[inline]
fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

#[inline]
fn packed_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

impl Jet2 {
    pub fn constant_in(dim: usize, c: f64) -> Self {
        Self {
            value: c,
            grad: vec![0.0; dim],
            hess: vec![0.0; packed_len(dim)],
        }
    }

    /// The coordinate function `x_{index}` evaluated at `at`.
    pub fn variable(dim: usize, index: usize, at: f64) -> Self {
        let mut j = Self::constant_in(dim, at);
        j.grad[index] = 1.0;
        j
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn val(&self) -> f64 {
        self.value
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    pub fn gradient(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.grad)
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.hess[packed_index(self.dim(), i, j)]
    }

    pub fn hessian(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.hess(i, j))
    }

    /// Assemble a jet from its parts; only the upper triangle of `hessian` is read.
    pub fn from_parts(value: f64, gradient: &[f64], hessian: &DMatrix<f64>) -> Self {
        let n = gradient.len();
        let mut hess = vec![0.0; packed_len(n)];
        for i in 0..n {
            for j in i..n {
                hess[packed_index(n, i, j)] = hessian[(i, j)];
            }
        }
        Self {
            value,
            grad: gradient.to_vec(),
            hess,
        }
    }
}

impl Scalar for Jet2 {
    fn constant(c: f64, like: &Self) -> Self {
        Self::constant_in(like.dim(), c)
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn add(&self, o: &Self) -> Self {
        Self {
            value: self.value + o.value,
            grad: self.grad.iter().zip(&o.grad).map(|(a, b)| a + b).collect(),
            hess: self.hess.iter().zip(&o.hess).map(|(a, b)| a + b).collect(),
        }
    }
    fn sub(&self, o: &Self) -> Self {
        Self {
            value: self.value - o.value,
            grad: self.grad.iter().zip(&o.grad).map(|(a, b)| a - b).collect(),
            hess: self.hess.iter().zip(&o.hess).map(|(a, b)| a - b).collect(),
        }
    }
    fn mul(&self, o: &Self) -> Self {
        let n = self.dim();
        let (a, b) = (self.value, o.value);
        let grad = (0..n).map(|i| a * o.grad[i] + b * self.grad[i]).collect();
        let mut hess = vec![0.0; packed_len(n)];
        for i in 0..n {
            for j in i..n {
                let k = packed_index(n, i, j);
                hess[k] = a * o.hess[k]
                    + b * self.hess[k]
                    + self.grad[i] * o.grad[j]
                    + o.grad[i] * self.grad[j];
            }
        }
        Self {
            value: a * b,
            grad,
            hess,
        }
    }
    fn neg(&self) -> Self {
        Self {
            value: -self.value,
            grad: self.grad.iter().map(|g| -g).collect(),
            hess: self.hess.iter().map(|h| -h).collect(),
        }
    }
    fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let n = self.dim();
        let grad = self.grad.iter().map(|g| f1 * g).collect();
        let mut hess = vec![0.0; packed_len(n)];
        for i in 0..n {
            for j in i..n {
                let k = packed_index(n, i, j);
                hess[k] = f1 * self.hess[k] + f2 * self.grad[i] * self.grad[j];
            }
        }
        Self {
            value: f0,
            grad,
            hess,
        }
    }
    fn is_constant(&self) -> bool {
        self.grad.iter().all(|g| *g == 0.0) && self.hess.iter().all(|h| *h == 0.0)
    }
}
