//! Complex Clifford representations for odd `n` and the boundary operator χ.
//!
//! Hermitian products are conjugate-linear in the second slot:
//! `⟨u, v⟩ = Σ u_k conj(v_k)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::complement_basis;
use crate::surface::SurfaceSample;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const INPUT_TOL: f64 = 1e-10;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn pauli() -> [CMatrix; 3] {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    [
        CMatrix::from_row_slice(2, 2, &[z, one, one, z]),
        CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        CMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
    ]
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Spinor representation of `Cl(n, C)` for odd `n`, generated by
/// skew-Hermitian `Γ_a` with `Γ_aΓ_b + Γ_bΓ_a = −2δ_ab`.
#[derive(Debug, Clone)]
pub struct CliffordRep {
    n: usize,
    m: usize,
    gammas: Vec<CMatrix>,
}

/// Build the representation. `m = 2^{(n−1)/2}`.
pub fn build_rep(n: usize) -> Result<CliffordRep> {
    if n % 2 == 0 || !(3..=11).contains(&n) {
        return Err(Error::Invalid(format!(
            "Clifford representation needs odd 3 <= n <= 11, got {n}"
        )));
    }
    // Hermitian generators squaring to +1, grown two at a time
    let [s1, s2, s3] = pauli();
    let mut herm = vec![s1.clone(), s2.clone(), s3.clone()];
    while herm.len() < n {
        let m = herm[0].nrows();
        let id = CMatrix::identity(m, m);
        let mut next: Vec<CMatrix> = herm.iter().map(|g| g.kronecker(&s1)).collect();
        next.push(id.kronecker(&s2));
        next.push(id.kronecker(&s3));
        herm = next;
    }
    let gammas: Vec<CMatrix> = herm.into_iter().map(|g| g * c(0.0, 1.0)).collect();
    Ok(CliffordRep {
        n,
        m: gammas[0].nrows(),
        gammas,
    })
}

impl CliffordRep {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn gammas(&self) -> &[CMatrix] {
        &self.gammas
    }

    /// Clifford action of a vector given by its coordinates: `Σ v_a Γ_a`.
    pub fn action(&self, v: &[f64]) -> CMatrix {
        let mut out = CMatrix::zeros(self.m, self.m);
        for (g, &a) in self.gammas.iter().zip(v) {
            out += g * c(a, 0.0);
        }
        out
    }

    /// Largest entrywise residual of `Γ_aΓ_b + Γ_bΓ_a + 2δ_ab I` over all pairs.
    pub fn anticommutator_residual(&self) -> f64 {
        let id = CMatrix::identity(self.m, self.m);
        let mut worst: f64 = 0.0;
        for a in 0..self.n {
            for b in a..self.n {
                let mut r = &self.gammas[a] * &self.gammas[b] + &self.gammas[b] * &self.gammas[a];
                if a == b {
                    r += &id * c(2.0, 0.0);
                }
                worst = worst.max(max_abs(&r));
            }
        }
        worst
    }

    /// Largest entrywise residual of `Γ_a + Γ_a^†`.
    pub fn skew_hermitian_residual(&self) -> f64 {
        self.gammas
            .iter()
            .map(|g| max_abs(&(g + g.adjoint())))
            .fold(0.0, f64::max)
    }

    /// The volume element `Γ_1···Γ_n` as a scalar multiple of the identity,
    /// with the largest off-scalar residual.
    pub fn volume_element(&self) -> (Complex64, f64) {
        let mut p = CMatrix::identity(self.m, self.m);
        for g in &self.gammas {
            p = p * g;
        }
        let scalar = p[(0, 0)];
        let resid = max_abs(&(&p - CMatrix::identity(self.m, self.m) * scalar));
        (scalar, resid)
    }

    /// `ω_a` with entries `⟨Γ_a ŝ_α, ŝ_β⟩ = (Γ_a)_{βα}`.
    pub fn omega(&self) -> Vec<CMatrix> {
        self.gammas.iter().map(|g| g.transpose()).collect()
    }
}

/// The boundary operator on the fiber `⊕_m S`, stored as an `m² × m²` matrix.
/// Block `(α, β)` is `−(Σ_a N_a ω_a)_{αβ} · (ν·)`.
#[derive(Debug, Clone)]
pub struct ChiOperator {
    pub matrix: CMatrix,
    pub m: usize,
}

/// Assemble χ from `N` (Euclidean unit vector), a `g`-orthonormal frame whose
/// last vector is `ν`, and the metric matrix `g` at the point.
pub fn chi_at(
    rep: &CliffordRep,
    n_vec: &[f64],
    frame: &[DVector<f64>],
    g: &DMatrix<f64>,
) -> Result<ChiOperator> {
    let n = rep.n;
    if n_vec.len() != n || frame.len() != n || g.nrows() != n {
        return Err(Error::Invalid(format!("chi_at needs n = {n} inputs")));
    }
    let len = n_vec.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (len - 1.0).abs() > INPUT_TOL {
        return Err(Error::Invalid(format!("N is not a unit vector (|N| = {len})")));
    }
    for a in 0..n {
        for b in a..n {
            let gab = frame[a].dot(&(g * &frame[b]));
            let want = if a == b { 1.0 } else { 0.0 };
            if (gab - want).abs() > INPUT_TOL {
                return Err(Error::Invalid(format!(
                    "frame is not g-orthonormal: g(e_{}, e_{}) = {gab}",
                    a + 1,
                    b + 1
                )));
            }
        }
    }
    // coordinates of ν in the frame
    let nu = &frame[n - 1];
    let coords: Vec<f64> = frame.iter().map(|e| e.dot(&(g * nu))).collect();
    let nu_action = rep.action(&coords);
    let omega = rep.omega();
    let mut w = CMatrix::zeros(rep.m, rep.m);
    for (om, &na) in omega.iter().zip(n_vec) {
        w += om * c(na, 0.0);
    }
    Ok(ChiOperator {
        matrix: -w.kronecker(&nu_action),
        m: rep.m,
    })
}

/// Frame at a point: `g`-orthonormal complement of `ν` by Gram–Schmidt, then `ν`.
pub fn frame_for(nu: &DVector<f64>, g: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let inner = |a: &DVector<f64>, b: &DVector<f64>| a.dot(&(g * b));
    let mut frame = complement_basis(nu, inner);
    frame.push(nu / inner(nu, nu).sqrt());
    frame
}

impl ChiOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn square_residual(&self) -> f64 {
        let d = self.dim();
        max_abs(&(&self.matrix * &self.matrix - CMatrix::identity(d, d)))
    }

    pub fn hermitian_residual(&self) -> f64 {
        max_abs(&(&self.matrix - self.matrix.adjoint()))
    }

    pub fn unitary_residual(&self) -> f64 {
        let d = self.dim();
        max_abs(&(self.matrix.adjoint() * &self.matrix - CMatrix::identity(d, d)))
    }

    /// `dim ker(id + χ)` from the singular values of `id + χ`.
    pub fn minus_space_dim(&self, threshold: f64) -> usize {
        let d = self.dim();
        let sv = (CMatrix::identity(d, d) + &self.matrix).singular_values();
        d - sv.iter().filter(|s| **s > threshold).count()
    }

    /// Eigenvalues, sorted ascending (χ is Hermitian up to roundoff).
    pub fn spectrum(&self) -> Vec<f64> {
        let h = (&self.matrix + self.matrix.adjoint()) * c(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn apply(&self, s: &CVector) -> CVector {
        &self.matrix * s
    }
}

/// `Σ_α |s_α|²` computed as `s^† s`; the imaginary part is returned as a residual.
pub fn fiber_norm2(s: &[CVector]) -> (f64, f64) {
    let mut acc = c(0.0, 0.0);
    for v in s {
        acc += v.dotc(v);
    }
    (acc.re, acc.im.abs())
}

/// Pointwise boundary integrand `(H − ‖dN‖_tr) Σ_α |s_α|²`.
pub fn boundary_integrand(sample: &SurfaceSample, s: &[CVector]) -> f64 {
    (sample.h - sample.tr_n) * fiber_norm2(s).0
}

/// `−½ ∫ (H − ‖dN‖_tr) Σ_α |s_α|² da` for a spinor tuple given per sample.
pub fn boundary_term<F>(samples: &[SurfaceSample], s: F) -> f64
where
    F: Fn(&SurfaceSample) -> Vec<CVector>,
{
    let terms: Vec<f64> = samples
        .iter()
        .map(|p| p.weight * boundary_integrand(p, &s(p)))
        .collect();
    -0.5 * crate::linalg::pairwise_sum(&terms)
}

/// A constant tuple of `m` spinors of total norm one.
pub fn unit_tuple(m: usize) -> Vec<CVector> {
    let scale = 1.0 / (m as f64 * m as f64).sqrt();
    (0..m)
        .map(|_| CVector::from_element(m, c(scale, 0.0)))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualRow {
    pub n: usize,
    pub m: usize,
    pub pairs: usize,
    pub anticommutator: f64,
    pub skew_hermitian: f64,
    pub volume_modulus_deviation: f64,
    pub volume_scalar_residual: f64,
    pub omega_skew: f64,
    pub omega_sum: f64,
    pub chi_square: f64,
    pub chi_hermitian: f64,
    pub chi_unitary: f64,
    pub kernel_dim_min: usize,
    pub kernel_dim_max: usize,
    pub kernel_dim_expected: usize,
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let len = v.norm();
        if len > 0.1 && len <= 1.0 {
            return v / len;
        }
    }
}

/// Random SPD metric, a random `g`-unit `ν`, and the matching frame.
fn random_frame(rng: &mut ChaCha8Rng, n: usize) -> (DMatrix<f64>, Vec<DVector<f64>>) {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.5..0.5));
    let g = DMatrix::identity(n, n) + &a * a.transpose();
    let dir = random_unit(rng, n);
    let nu = &dir / dir.dot(&(&g * &dir)).sqrt();
    let frame = frame_for(&nu, &g);
    (g, frame)
}

/// Residual table for one odd dimension over `pairs` random `(N, frame)` inputs.
pub fn residual_row(n: usize, pairs: usize, seed: u64) -> Result<ResidualRow> {
    let rep = build_rep(n)?;
    let m = rep.m;
    let (vol, vol_resid) = rep.volume_element();
    let omega = rep.omega();
    let omega_skew = omega
        .iter()
        .map(|w| max_abs(&(w + w.adjoint())))
        .fold(0.0, f64::max);
    let mut sum = CMatrix::zeros(m, m);
    for w in &omega {
        sum += w * w.adjoint();
    }
    let omega_sum = max_abs(&(sum - CMatrix::identity(m, m) * c(n as f64, 0.0)));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut row = ResidualRow {
        n,
        m,
        pairs,
        anticommutator: rep.anticommutator_residual(),
        skew_hermitian: rep.skew_hermitian_residual(),
        volume_modulus_deviation: (vol.norm() - 1.0).abs(),
        volume_scalar_residual: vol_resid,
        omega_skew,
        omega_sum,
        chi_square: 0.0,
        chi_hermitian: 0.0,
        chi_unitary: 0.0,
        kernel_dim_min: usize::MAX,
        kernel_dim_max: 0,
        kernel_dim_expected: m * m / 2,
    };
    for _ in 0..pairs {
        let n_vec = random_unit(&mut rng, n);
        let (g, frame) = random_frame(&mut rng, n);
        let chi = chi_at(&rep, n_vec.as_slice(), &frame, &g)?;
        row.chi_square = row.chi_square.max(chi.square_residual());
        row.chi_hermitian = row.chi_hermitian.max(chi.hermitian_residual());
        row.chi_unitary = row.chi_unitary.max(chi.unitary_residual());
        let k = chi.minus_space_dim(1e-8);
        row.kernel_dim_min = row.kernel_dim_min.min(k);
        row.kernel_dim_max = row.kernel_dim_max.max(k);
    }
    Ok(row)
}

/// Residual rows for `n ∈ {3, 5, 7}`.
pub fn residual_table(pairs: usize, seed: u64) -> Result<Vec<ResidualRow>> {
    [3, 5, 7]
        .into_iter()
        .map(|n| residual_row(n, pairs, seed.wrapping_add(n as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_frame(n: usize) -> Vec<DVector<f64>> {
        (0..n).map(|a| DVector::from_fn(n, |i, _| if i == a { 1.0 } else { 0.0 })).collect()
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(build_rep(4).is_err());
        assert!(build_rep(1).is_err());
        assert!(build_rep(13).is_err());
    }

    #[test]
    fn n3_exact_relations() {
        let rep = build_rep(3).unwrap();
        assert_eq!(rep.m(), 2);
        assert!(rep.anticommutator_residual() < 1e-15);
        assert!(rep.skew_hermitian_residual() < 1e-15);
    }

    #[test]
    fn n5_all_pairs() {
        let rep = build_rep(5).unwrap();
        assert_eq!(rep.m(), 4);
        assert_eq!(rep.gammas().len(), 5);
        assert!(rep.anticommutator_residual() < 1e-15);
    }

    #[test]
    fn volume_element_is_unimodular_scalar() {
        for n in [3, 5, 7, 9] {
            let (s, resid) = build_rep(n).unwrap().volume_element();
            assert!(resid < 1e-14, "n = {n}");
            assert!((s.norm() - 1.0).abs() < 1e-14, "n = {n}: {s}");
        }
    }

    #[test]
    fn omega_3_is_diagonal_unimodular() {
        let om = build_rep(3).unwrap().omega();
        let w = &om[2];
        assert_eq!(w[(0, 1)].norm(), 0.0);
        assert_eq!(w[(1, 0)].norm(), 0.0);
        assert!((w[(0, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((w[(1, 1)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn omega_matches_hermitian_product() {
        let rep = build_rep(5).unwrap();
        let om = rep.omega();
        let m = rep.m();
        let basis = |k: usize| CVector::from_fn(m, |i, _| c(if i == k { 1.0 } else { 0.0 }, 0.0));
        for a in 0..5 {
            for al in 0..m {
                for be in 0..m {
                    // ⟨u, v⟩ = Σ u conj(v) = v.dotc(u)
                    let want = basis(be).dotc(&(&rep.gammas()[a] * basis(al)));
                    assert!((want - om[a][(al, be)]).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn flat_chi_squares_to_identity() {
        let rep = build_rep(3).unwrap();
        let g = DMatrix::identity(3, 3);
        let chi = chi_at(&rep, &[0.0, 0.0, 1.0], &flat_frame(3), &g).unwrap();
        assert!(chi.square_residual() < 1e-14);
        assert_eq!(chi.minus_space_dim(1e-8), 2);
    }

    #[test]
    fn rejects_non_unit_inputs() {
        let rep = build_rep(3).unwrap();
        let g = DMatrix::identity(3, 3);
        assert!(chi_at(&rep, &[0.0, 0.0, 1.1], &flat_frame(3), &g).is_err());
        let mut fr = flat_frame(3);
        fr[2] *= 2.0;
        assert!(chi_at(&rep, &[0.0, 0.0, 1.0], &fr, &g).is_err());
    }

    #[test]
    fn spectrum_is_balanced() {
        let rep = build_rep(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let n_vec = random_unit(&mut rng, 5);
            let (g, frame) = random_frame(&mut rng, 5);
            let chi = chi_at(&rep, n_vec.as_slice(), &frame, &g).unwrap();
            let ev = chi.spectrum();
            let half = ev.len() / 2;
            assert!(ev[..half].iter().all(|e| (e + 1.0).abs() < 1e-10));
            assert!(ev[half..].iter().all(|e| (e - 1.0).abs() < 1e-10));
        }
    }

    #[test]
    fn plane_rotation_conjugates_chi() {
        // U = cos(θ/2) + sin(θ/2) Γ_aΓ_b satisfies U Γ_a U^† = cos θ Γ_a + sin θ Γ_b
        let rep = build_rep(3).unwrap();
        let (a, b, th) = (0usize, 2usize, 0.7f64);
        let id = CMatrix::identity(2, 2);
        let u = &id * c((th / 2.0).cos(), 0.0)
            + &rep.gammas()[a] * &rep.gammas()[b] * c((th / 2.0).sin(), 0.0);
        let mut rot = DMatrix::<f64>::identity(3, 3);
        rot[(a, a)] = th.cos();
        rot[(b, a)] = th.sin();
        rot[(a, b)] = -th.sin();
        rot[(b, b)] = th.cos();
        let n0 = DVector::from_vec(vec![0.3, -0.5, 0.2]).normalize();
        let n1 = &rot * &n0;
        let g = DMatrix::identity(3, 3);
        let nu = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        let fr0 = frame_for(&nu, &g);
        let fr1: Vec<_> = fr0.iter().map(|e| &rot * e).collect();
        let chi0 = chi_at(&rep, n0.as_slice(), &fr0, &g).unwrap();
        let chi1 = chi_at(&rep, n1.as_slice(), &fr1, &g).unwrap();
        let v = u.conjugate().kronecker(&id);
        let conj = &v * &chi0.matrix * v.adjoint();
        assert!(max_abs(&(conj - &chi1.matrix)) < 1e-14);
        let (s0, s1) = (chi0.spectrum(), chi1.spectrum());
        for (x, y) in s0.iter().zip(&s1) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn fiber_norm_is_real() {
        let s = vec![
            CVector::from_vec(vec![c(0.3, -0.4), c(1.0, 2.0)]),
            CVector::from_vec(vec![c(0.0, 1.0), c(-0.5, 0.5)]),
        ];
        let (re, im) = fiber_norm2(&s);
        assert!((re - (0.25 + 5.0 + 1.0 + 0.5)).abs() < 1e-14);
        assert!(im < 1e-15);
        assert!((fiber_norm2(&unit_tuple(4)).0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn residual_table_small() {
        for row in residual_table(10, 1).unwrap() {
            assert!(row.anticommutator < 1e-12);
            assert!(row.chi_square < 1e-12, "{row:?}");
            assert!(row.chi_hermitian < 1e-12);
            assert_eq!(row.kernel_dim_min, row.kernel_dim_expected);
            assert_eq!(row.kernel_dim_max, row.kernel_dim_expected);
        }
    }
}
