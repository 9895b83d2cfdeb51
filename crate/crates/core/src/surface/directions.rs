//! Deterministic low-discrepancy direction sets on `S^{n-1}`.

use std::f64::consts::PI;

const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Surface measure of the unit sphere `S^{n-1} ⊂ R^n`.
pub fn sphere_measure(n: usize) -> f64 {
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => 2.0 * PI / (n as f64 - 2.0) * sphere_measure(n - 2),
    }
}

/// Radical inverse of `i` in `base`.
pub fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

/// `count` unit vectors in `R^n`: equally spaced angles for `n = 2`, the
/// Fibonacci lattice for `n = 3`, and normalized Box–Muller transformed Halton
/// points otherwise.
pub fn directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        2 => (0..count)
            .map(|k| {
                let th = 2.0 * PI * (k as f64 + 0.5) / count as f64;
                vec![th.cos(), th.sin()]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
                    let rho = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden * k as f64;
                    vec![rho * phi.cos(), rho * phi.sin(), z]
                })
                .collect()
        }
        _ => {
            assert!(n <= 2 * PRIMES.len(), "dimension {n} too large for the Halton table");
            (0..count)
                .map(|k| {
                    let idx = k as u64 + 1;
                    let mut v = Vec::with_capacity(n);
                    for pair in 0..n.div_ceil(2) {
                        let u1 = radical_inverse(idx, PRIMES[2 * pair]).max(f64::MIN_POSITIVE);
                        let u2 = radical_inverse(idx, PRIMES[2 * pair + 1]);
                        let rad = (-2.0 * u1.ln()).sqrt();
                        v.push(rad * (2.0 * PI * u2).cos());
                        if v.len() < n {
                            v.push(rad * (2.0 * PI * u2).sin());
                        }
                    }
                    let len = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                    v.iter().map(|c| c / len).collect()
                })
                .collect()
        }
    }
}
