//! Dense complex linear algebra shared by every other module.
//!
//! Rank decisions are always relative: a singular value counts when it
//! exceeds `rtol * sigma_max`. Hermitian inputs are symmetrized on entry.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Tolerance on hermitian structure, relative to `1 + ||M||_F`.
pub const HTOL: f64 = 1e-10;
/// Default relative rank threshold.
pub const DEFAULT_RTOL: f64 = 1e-9;

const EIG_EPS: f64 = 1e-15;
const MAX_SWEEPS: usize = 10_000;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn frob(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entrywise deviation from hermitian symmetry.
pub fn hermitian_violation(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..=i {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// A square matrix with exact hermitian structure.
#[derive(Debug, Clone, PartialEq)]
pub struct HermMatrix(CMatrix);

impl HermMatrix {
    /// Symmetrizes `(M + M*)/2`. Panics if `m` is not square.
    pub fn new(m: CMatrix) -> Self {
        assert!(m.is_square(), "hermitian matrix must be square");
        HermMatrix(symmetrize(&m))
    }

    /// Rejects inputs whose deviation from hermitian symmetry exceeds
    /// `HTOL * (1 + ||M||_F)`; otherwise symmetrizes.
    pub fn checked(m: CMatrix, context: &str) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "{context}: {}x{} matrix is not square",
                m.nrows(),
                m.ncols()
            )));
        }
        let violation = hermitian_violation(&m);
        if violation > HTOL * (1.0 + frob(&m)) {
            return Err(Error::HermitianViolation {
                context: context.to_string(),
                violation,
            });
        }
        Ok(HermMatrix::new(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }
}

/// Kronecker product; `kron(a, b)[(i*p + r, j*q + s)] = a[(i, j)] * b[(r, s)]`
/// for `b` of shape `p x q`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Eigendecomposition of a hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigen {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::INFINITY)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn vector(&self, i: usize) -> CVector {
        self.vectors.column(i).into_owned()
    }
}

pub fn hermitian_eig(h: &HermMatrix) -> Result<Eigen> {
    let n = h.dim();
    if n == 0 {
        return Ok(Eigen {
            values: vec![],
            vectors: CMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::try_new(h.matrix().clone(), EIG_EPS, MAX_SWEEPS)
        .ok_or(Error::ConvergenceFailure("hermitian eigensolver"))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(Eigen { values, vectors })
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues(h: &HermMatrix) -> Result<Vec<f64>> {
    if h.dim() == 0 {
        return Ok(vec![]);
    }
    let mut vals: Vec<f64> = h.matrix().symmetric_eigenvalues().iter().copied().collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::ConvergenceFailure("hermitian eigenvalues"));
    }
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.is_empty() {
        return vec![];
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Count of singular values above `rtol * sigma_max`.
pub fn numerical_rank(m: &CMatrix, rtol: f64) -> usize {
    rank_from_singular_values(&singular_values(m), rtol)
}

pub fn rank_from_singular_values(s: &[f64], rtol: f64) -> usize {
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 || !smax.is_finite() {
        return 0;
    }
    s.iter().filter(|&&x| x > rtol * smax).count()
}

/// Full SVD with a square right factor; `m` is zero-padded to at least as
/// many rows as columns so every right singular vector is available.
fn full_right_svd(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.ncols();
    let padded = if m.nrows() < n {
        let mut p = CMatrix::zeros(n, n);
        p.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = SVD::new(padded, false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    (svd.singular_values.iter().copied().collect(), vt)
}

/// Orthonormal basis (as columns) of `{v : ||Mv|| <= rtol * sigma_max * ||v||}`.
pub fn nullspace(m: &CMatrix, rtol: f64) -> CMatrix {
    let n = m.ncols();
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    let (s, vt) = full_right_svd(m);
    let smax = s.iter().copied().fold(0.0, f64::max);
    kernel_columns(&s, &vt, |x| smax == 0.0 || x <= rtol * smax)
}

/// Like [`nullspace`] with an absolute cut: singular values `<= atol` count
/// as zero. Used where the map's own norm says nothing about the scale of
/// the problem (a near-zero map is then entirely kernel).
pub fn nullspace_atol(m: &CMatrix, atol: f64) -> CMatrix {
    if m.ncols() == 0 {
        return CMatrix::zeros(0, 0);
    }
    let (s, vt) = full_right_svd(m);
    kernel_columns(&s, &vt, |x| x <= atol)
}

fn kernel_columns(s: &[f64], vt: &CMatrix, is_zero: impl Fn(f64) -> bool) -> CMatrix {
    let n = vt.ncols();
    let kernel: Vec<usize> = (0..n).filter(|&j| is_zero(s[j])).collect();
    let mut basis = CMatrix::zeros(n, kernel.len());
    for (col, &j) in kernel.iter().enumerate() {
        for i in 0..n {
            basis[(i, col)] = vt[(j, i)].conj();
        }
    }
    basis
}

/// Orthonormal basis of the column space, keeping directions whose singular
/// value exceeds `rtol * sigma_max`.
pub fn range_basis(m: &CMatrix, rtol: f64) -> CMatrix {
    if m.is_empty() {
        return CMatrix::zeros(m.nrows(), 0);
    }
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.expect("left singular vectors requested");
    let s = &svd.singular_values;
    let smax = s.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..s.len())
        .filter(|&j| smax > 0.0 && s[j] > rtol * smax)
        .collect();
    let mut basis = CMatrix::zeros(m.nrows(), keep.len());
    for (col, &j) in keep.iter().enumerate() {
        basis.set_column(col, &u.column(j));
    }
    basis
}

/// Unitary polar factor `U = S (S*S)^{-1/2}`.
pub fn polar_unitary(s: &CMatrix) -> Result<CMatrix> {
    if !s.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "polar factor of a {}x{} matrix",
            s.nrows(),
            s.ncols()
        )));
    }
    let n = s.nrows();
    let svd = SVD::new(s.clone(), true, true);
    let rank = rank_from_singular_values(
        &{
            let mut v: Vec<f64> = svd.singular_values.iter().copied().collect();
            v.sort_by(|a, b| b.total_cmp(a));
            v
        },
        DEFAULT_RTOL,
    );
    if rank < n {
        return Err(Error::SingularInput { rank, dim: n });
    }
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    Ok(u * vt)
}

pub fn unitarity_residual(u: &CMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    frob(&(u.adjoint() * u - CMatrix::identity(u.nrows(), u.ncols())))
}

/// Power `H^p` of a PSD hermitian matrix via its eigendecomposition.
/// Eigenvalues below `rtol * lambda_max` are treated as zero, which makes
/// negative powers pseudo-inverse powers.
pub fn psd_power(h: &HermMatrix, p: f64, rtol: f64) -> Result<CMatrix> {
    let eig = hermitian_eig(h)?;
    let lmax = eig.values.iter().copied().fold(0.0, f64::max);
    let n = h.dim();
    let mut d = CMatrix::zeros(n, n);
    for (i, &l) in eig.values.iter().enumerate() {
        if l > rtol * lmax && l > 0.0 {
            d[(i, i)] = c(l.powf(p), 0.0);
        }
    }
    Ok(&eig.vectors * d * eig.vectors.adjoint())
}

/// Inverse of a square matrix, refused when `sigma_min / sigma_max < rtol`.
/// On refusal returns the observed ratio.
pub fn guarded_inverse(m: &CMatrix, rtol: f64) -> std::result::Result<CMatrix, f64> {
    if !m.is_square() || m.is_empty() {
        return Err(0.0);
    }
    let s = singular_values(m);
    let smax = s[0];
    let smin = *s.last().unwrap();
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    if ratio.is_nan() || ratio < rtol {
        return Err(ratio);
    }
    m.clone().try_inverse().ok_or(ratio)
}

/// Block-diagonal sum of square or rectangular blocks.
pub fn block_diag(blocks: &[&CMatrix]) -> CMatrix {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let (mut r, mut c0) = (0, 0);
    for b in blocks {
        out.view_mut((r, c0), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c0 += b.ncols();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TupleKind {
    /// i.i.d. standard complex normal entries.
    Ginibre,
    /// Hermitian `(G + G*)/sqrt(2)` for a Ginibre `G`.
    Gue,
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

pub fn gue<R: Rng + ?Sized>(k: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(k, k, rng);
    let h = (&g + g.adjoint()).scale(std::f64::consts::FRAC_1_SQRT_2);
    // exact structure: mirror the upper triangle
    symmetrize(&h)
}

pub fn random_tuple<R: Rng + ?Sized>(
    g: usize,
    k: usize,
    kind: TupleKind,
    rng: &mut R,
) -> Vec<CMatrix> {
    (0..g)
        .map(|_| match kind {
            TupleKind::Ginibre => ginibre(k, k, rng),
            TupleKind::Gue => gue(k, rng),
        })
        .collect()
}

/// Haar-distributed unitary (polar factor of a Ginibre matrix).
pub fn random_unitary<R: Rng + ?Sized>(k: usize, rng: &mut R) -> CMatrix {
    loop {
        if let Ok(u) = polar_unitary(&ginibre(k, k, rng)) {
            return u;
        }
    }
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent child seed; used for per-trial and per-branch
/// streams so results do not depend on scheduling.
pub fn fork_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(rows: usize, cols: usize, v: &[f64]) -> CMatrix {
        CMatrix::from_row_iterator(rows, cols, v.iter().map(|&x| c(x, 0.0)))
    }

    #[test]
    fn kron_identity_and_scalar_factor() {
        let i6 = kron(&CMatrix::identity(2, 2), &CMatrix::identity(3, 3));
        assert_eq!(i6, CMatrix::identity(6, 6));
        let k = kron(&real(2, 2, &[0., 1., 1., 0.]), &real(1, 1, &[2.]));
        assert_eq!(k, real(2, 2, &[0., 2., 2., 0.]));
    }

    #[test]
    fn kron_index_convention() {
        let mut rng = rng_from_seed(3);
        let a = ginibre(2, 3, &mut rng);
        let b = ginibre(4, 2, &mut rng);
        let k = kron(&a, &b);
        for i in 0..2 {
            for j in 0..3 {
                for r in 0..4 {
                    for s in 0..2 {
                        assert_eq!(k[(i * 4 + r, j * 2 + s)], a[(i, j)] * b[(r, s)]);
                    }
                }
            }
        }
    }

    #[test]
    fn kron_mixed_product() {
        let mut rng = rng_from_seed(11);
        let (a, b, cc, d) = (
            ginibre(2, 2, &mut rng),
            ginibre(2, 2, &mut rng),
            ginibre(2, 2, &mut rng),
            ginibre(2, 2, &mut rng),
        );
        let lhs = kron(&a, &b) * kron(&cc, &d);
        let rhs = kron(&(&a * &cc), &(&b * &d));
        assert!(frob(&(lhs - rhs)) <= 1e-12);
    }

    #[test]
    fn eig_small_cases() {
        let e = hermitian_eig(&HermMatrix::new(real(2, 2, &[3., 0., 0., 1.]))).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14 && (e.values[1] - 3.0).abs() < 1e-14);
        let e = hermitian_eig(&HermMatrix::new(real(2, 2, &[0., 1., 1., 0.]))).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_gue_reconstruction() {
        let mut rng = rng_from_seed(5);
        let h = HermMatrix::new(gue(5, &mut rng));
        let e = hermitian_eig(&h).unwrap();
        let d = CMatrix::from_diagonal(&CVector::from_iterator(
            5,
            e.values.iter().map(|&l| c(l, 0.0)),
        ));
        let resid = frob(&(h.matrix() * &e.vectors - &e.vectors * d));
        assert!(resid <= 1e-10 * (1.0 + frob(h.matrix())));
        assert!(unitarity_residual(&e.vectors) <= 1e-10);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rank_cases() {
        assert_eq!(numerical_rank(&CMatrix::zeros(3, 4), DEFAULT_RTOL), 0);
        assert_eq!(numerical_rank(&CMatrix::identity(4, 4), DEFAULT_RTOL), 4);
        let mut rng = rng_from_seed(8);
        let u = ginibre(5, 1, &mut rng);
        let v = ginibre(5, 1, &mut rng);
        let uv = (&u / C64::from(u.norm())) * (&v / C64::from(v.norm())).adjoint();
        assert_eq!(numerical_rank(&uv, DEFAULT_RTOL), 1);
    }

    #[test]
    fn nullspace_cases() {
        assert_eq!(nullspace(&CMatrix::identity(3, 3), DEFAULT_RTOL).ncols(), 0);
        assert_eq!(nullspace(&CMatrix::zeros(2, 2), DEFAULT_RTOL).ncols(), 2);
        let n = nullspace(&real(2, 2, &[1., 0., 0., 0.]), DEFAULT_RTOL);
        assert_eq!(n.ncols(), 1);
        assert!(n[(0, 0)].norm() < 1e-14 && (n[(1, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn nullspace_of_wide_matrix_is_orthonormal() {
        let mut rng = rng_from_seed(21);
        let m = ginibre(2, 5, &mut rng);
        let n = nullspace(&m, DEFAULT_RTOL);
        assert_eq!(n.ncols(), 3);
        assert!(unitarity_residual_rect(&n) <= 1e-10);
        assert!(frob(&(&m * &n)) <= 1e-10);
    }

    fn unitarity_residual_rect(v: &CMatrix) -> f64 {
        frob(&(v.adjoint() * v - CMatrix::identity(v.ncols(), v.ncols())))
    }

    #[test]
    fn polar_cases() {
        let p = polar_unitary(&CMatrix::identity(2, 2)).unwrap();
        assert!(frob(&(p - CMatrix::identity(2, 2))) < 1e-14);
        let p = polar_unitary(&CMatrix::identity(3, 3).scale(2.0)).unwrap();
        assert!(frob(&(p - CMatrix::identity(3, 3))) < 1e-14);
        assert!(matches!(
            polar_unitary(&real(2, 2, &[1., 0., 0., 0.])),
            Err(Error::SingularInput { rank: 1, dim: 2 })
        ));
    }

    #[test]
    fn polar_factorization_oracle() {
        let mut rng = rng_from_seed(13);
        let s = ginibre(3, 3, &mut rng);
        let u = polar_unitary(&s).unwrap();
        assert!(unitarity_residual(&u) <= 1e-9);
        // P = U* S must be hermitian positive definite
        let p = u.adjoint() * &s;
        assert!(hermitian_violation(&p) <= 1e-9);
        let vals = hermitian_eigenvalues(&HermMatrix::new(p.clone())).unwrap();
        assert!(vals[0] > 0.0);
        assert!(frob(&(&u * p - s)) <= 1e-9);
    }

    #[test]
    fn random_tuples_are_deterministic_and_shaped() {
        let a = random_tuple(2, 3, TupleKind::Gue, &mut rng_from_seed(1));
        let b = random_tuple(2, 3, TupleKind::Gue, &mut rng_from_seed(1));
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert!(a.iter().all(|m| m.nrows() == 3 && m.ncols() == 3));
        assert!(a.iter().all(|m| hermitian_violation(m) <= 1e-14));
    }

    #[test]
    fn checked_hermitian_rejects_violation() {
        let m = real(2, 2, &[1., 2., 0., 1.]);
        assert!(matches!(
            HermMatrix::checked(m, "test"),
            Err(Error::HermitianViolation { .. })
        ));
    }

    #[test]
    fn fork_seed_streams_differ() {
        assert_ne!(fork_seed(7, 0), fork_seed(7, 1));
        assert_eq!(fork_seed(7, 3), fork_seed(7, 3));
    }
}
