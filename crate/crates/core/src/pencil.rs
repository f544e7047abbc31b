//! Monic linear pencils `L(X) = I - sum_i A_i (x) X_i` and their free
//! spectrahedra `D_L = { X : L(X) >= 0 }`.
//!
//! Sign convention is fixed to minus everywhere; a pencil written with plus
//! signs is represented by negating its coefficients. Vectors in
//! `C^delta (x) C^k` are grouped as `v = sum_a e_a (x) v_a`, so block `a` of
//! length `k` is `v_a`.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{
    c, frob, gue, hermitian_eig, hermitian_eigenvalues, kron, nullspace, singular_values,
    unitarity_residual, CMatrix, HermMatrix, C64,
};

/// A point of `S^g(k)`: `g` hermitian `k x k` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct HermTuple {
    k: usize,
    mats: Vec<CMatrix>,
}

type WireMatrix = Vec<Vec<[f64; 2]>>;

fn to_wire(m: &CMatrix) -> WireMatrix {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}

fn from_wire(w: &WireMatrix, n: usize, what: &str) -> Result<CMatrix> {
    if w.len() != n || w.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput(format!("{what} must be {n}x{n}")));
    }
    let m = CMatrix::from_fn(n, n, |i, j| c(w[i][j][0], w[i][j][1]));
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{what} has non-finite entries"
        )));
    }
    Ok(m)
}

#[derive(Debug, Serialize, Deserialize)]
struct TupleFile {
    g: usize,
    k: usize,
    matrices: Vec<WireMatrix>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PencilFile {
    #[serde(default)]
    label: String,
    g: usize,
    delta: usize,
    coeffs: Vec<WireMatrix>,
}

impl HermTuple {
    /// Symmetrizes every matrix. All matrices must be square of one size.
    pub fn new(mats: Vec<CMatrix>) -> Result<Self> {
        let k = mats
            .first()
            .map(|m| m.nrows())
            .ok_or_else(|| Error::InvalidInput("a tuple needs at least one matrix".into()))?;
        for (i, m) in mats.iter().enumerate() {
            if m.nrows() != k || m.ncols() != k {
                return Err(Error::DimensionMismatch(format!(
                    "matrix {} is {}x{}, expected {k}x{k}",
                    i + 1,
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(HermTuple {
            k,
            mats: mats
                .into_iter()
                .map(|m| HermMatrix::new(m).into_inner())
                .collect(),
        })
    }

    /// Like [`HermTuple::new`] but rejects matrices that are not hermitian
    /// within tolerance instead of symmetrizing them silently.
    pub fn checked(mats: Vec<CMatrix>, context: &str) -> Result<Self> {
        for (i, m) in mats.iter().enumerate() {
            HermMatrix::checked(m.clone(), &format!("{context}, matrix {}", i + 1))?;
        }
        HermTuple::new(mats)
    }

    pub fn zeros(g: usize, k: usize) -> Self {
        HermTuple {
            k,
            mats: vec![CMatrix::zeros(k, k); g],
        }
    }

    pub fn random_gue<R: Rng + ?Sized>(g: usize, k: usize, rng: &mut R) -> Self {
        HermTuple {
            k,
            mats: (0..g).map(|_| gue(k, rng)).collect(),
        }
    }

    pub fn g(&self) -> usize {
        self.mats.len()
    }

    pub fn level(&self) -> usize {
        self.k
    }

    pub fn mats(&self) -> &[CMatrix] {
        &self.mats
    }

    pub fn get(&self, i: usize) -> &CMatrix {
        &self.mats[i]
    }

    pub fn norm(&self) -> f64 {
        self.mats
            .iter()
            .map(|m| frob(m).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, t: f64) -> Self {
        HermTuple {
            k: self.k,
            mats: self.mats.iter().map(|m| m.scale(t)).collect(),
        }
    }

    pub fn direct_sum(&self, other: &HermTuple) -> Result<Self> {
        if self.g() != other.g() {
            return Err(Error::DimensionMismatch(format!(
                "direct sum of tuples with g = {} and g = {}",
                self.g(),
                other.g()
            )));
        }
        let mats = self
            .mats
            .iter()
            .zip(&other.mats)
            .map(|(a, b)| crate::numkernel::block_diag(&[a, b]))
            .collect();
        Ok(HermTuple {
            k: self.k + other.k,
            mats,
        })
    }

    /// `V* X_i V` for a `k x r` matrix `V`.
    pub fn compress(&self, v: &CMatrix) -> Result<Self> {
        if v.nrows() != self.k {
            return Err(Error::DimensionMismatch(format!(
                "compression by a {}x{} matrix at level {}",
                v.nrows(),
                v.ncols(),
                self.k
            )));
        }
        HermTuple::new(self.mats.iter().map(|m| v.adjoint() * m * v).collect())
    }

    pub fn distance(&self, other: &HermTuple) -> f64 {
        self.mats
            .iter()
            .zip(&other.mats)
            .map(|(a, b)| frob(&(a - b)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn to_json_string(&self) -> String {
        let file = TupleFile {
            g: self.g(),
            k: self.k,
            matrices: self.mats.iter().map(to_wire).collect(),
        };
        serde_json::to_string_pretty(&file).expect("tuple serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: TupleFile = serde_json::from_str(text)?;
        if file.matrices.len() != file.g || file.g == 0 {
            return Err(Error::InvalidInput(format!(
                "tuple declares g = {} but lists {} matrices",
                file.g,
                file.matrices.len()
            )));
        }
        let mats = file
            .matrices
            .iter()
            .enumerate()
            .map(|(i, w)| from_wire(w, file.k, &format!("tuple matrix {}", i + 1)))
            .collect::<Result<Vec<_>>>()?;
        HermTuple::checked(mats, "tuple file")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Interior,
    Boundary,
    Outside,
}

#[derive(Debug, Clone)]
pub struct Classification {
    pub verdict: Verdict,
    pub min_eigenvalue: f64,
    /// Orthonormal kernel of `L(X)` at the classification tolerance; present
    /// exactly for boundary points.
    pub kernel_basis: Option<CMatrix>,
    pub tol: f64,
}

/// The tolerance used by `classify` when none is given.
pub fn default_member_tol(x: &HermTuple) -> f64 {
    1e-8 * (1.0 + x.norm())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonicPencil {
    coeffs: HermTuple,
    pub label: String,
}

impl MonicPencil {
    pub fn new(coeffs: Vec<CMatrix>, label: impl Into<String>) -> Result<Self> {
        Self::from_tuple(HermTuple::new(coeffs)?, label)
    }

    pub fn from_tuple(coeffs: HermTuple, label: impl Into<String>) -> Result<Self> {
        if coeffs.level() == 0 {
            return Err(Error::InvalidInput("a pencil needs size delta >= 1".into()));
        }
        Ok(MonicPencil {
            coeffs,
            label: label.into(),
        })
    }

    /// Pencil with diagonal real coefficients: `diag[i]` lists the diagonal
    /// of `A_{i+1}`.
    pub fn diagonal(diag: &[Vec<f64>], label: impl Into<String>) -> Result<Self> {
        let mats = diag
            .iter()
            .map(|d| {
                CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    d.len(),
                    d.iter().map(|&x| c(x, 0.0)),
                ))
            })
            .collect();
        Self::new(mats, label)
    }

    pub fn delta(&self) -> usize {
        self.coeffs.level()
    }

    pub fn g(&self) -> usize {
        self.coeffs.g()
    }

    pub fn coeffs(&self) -> &HermTuple {
        &self.coeffs
    }

    fn check_g(&self, x_g: usize) -> Result<()> {
        if x_g != self.g() {
            return Err(Error::DimensionMismatch(format!(
                "pencil has g = {} but the point has g = {x_g}",
                self.g()
            )));
        }
        Ok(())
    }

    /// `sum_i A_i (x) B_i` for arbitrary square `B_i` of one size.
    pub fn linear_part(&self, b: &[CMatrix]) -> Result<CMatrix> {
        self.check_g(b.len())?;
        let k = b[0].nrows();
        let mut acc = CMatrix::zeros(self.delta() * k, self.delta() * k);
        for (a, x) in self.coeffs.mats().iter().zip(b) {
            if x.nrows() != k || x.ncols() != k {
                return Err(Error::DimensionMismatch(
                    "point matrices differ in size".into(),
                ));
            }
            acc += kron(a, x);
        }
        Ok(acc)
    }

    pub fn evaluate(&self, x: &HermTuple) -> Result<HermMatrix> {
        let lin = self.linear_part(x.mats())?;
        let n = lin.nrows();
        Ok(HermMatrix::new(CMatrix::identity(n, n) - lin))
    }

    pub fn min_eigenvalue(&self, x: &HermTuple) -> Result<f64> {
        Ok(hermitian_eigenvalues(&self.evaluate(x)?)?[0])
    }

    pub fn classify(&self, x: &HermTuple, tol: Option<f64>) -> Result<Classification> {
        let tol = tol.unwrap_or_else(|| default_member_tol(x));
        let eig = hermitian_eig(&self.evaluate(x)?)?;
        let min = eig.min();
        let verdict = if min > tol {
            Verdict::Interior
        } else if min < -tol {
            Verdict::Outside
        } else {
            Verdict::Boundary
        };
        let kernel_basis = (verdict == Verdict::Boundary).then(|| {
            let cols: Vec<usize> = (0..eig.values.len())
                .filter(|&i| eig.values[i].abs() <= tol)
                .collect();
            let mut basis = CMatrix::zeros(eig.vectors.nrows(), cols.len());
            for (dst, &src) in cols.iter().enumerate() {
                basis.set_column(dst, &eig.vectors.column(src));
            }
            basis
        });
        Ok(Classification {
            verdict,
            min_eigenvalue: min,
            kernel_basis,
            tol,
        })
    }

    /// Whether `L(X)` is numerically singular (`sigma_min <= tol * sigma_max`),
    /// regardless of definiteness, together with an orthonormal kernel basis.
    pub fn in_free_locus(&self, x: &HermTuple, tol: f64) -> Result<(bool, CMatrix)> {
        let lx = self.evaluate(x)?;
        let kernel = nullspace(lx.matrix(), tol);
        Ok((kernel.ncols() > 0, kernel))
    }

    pub fn direct_sum(&self, other: &MonicPencil) -> Result<MonicPencil> {
        MonicPencil::from_tuple(
            self.coeffs.direct_sum(&other.coeffs)?,
            format!("{} (+) {}", self.label, other.label),
        )
    }

    /// Pencil with coefficients `U* A_i U`.
    pub fn conjugate(&self, u: &CMatrix) -> Result<MonicPencil> {
        if u.nrows() != self.delta() || !u.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "conjugating a size {} pencil by a {}x{} matrix",
                self.delta(),
                u.nrows(),
                u.ncols()
            )));
        }
        let resid = unitarity_residual(u);
        if resid > 1e-9 {
            return Err(Error::NotUnitary(resid));
        }
        MonicPencil::from_tuple(self.coeffs.compress(u)?, self.label.clone())
    }

    /// `det L(X)` as the product of the eigenvalues of `L(X)`.
    pub fn det_level(&self, x: &HermTuple) -> Result<f64> {
        Ok(hermitian_eigenvalues(&self.evaluate(x)?)?.iter().product())
    }

    /// Roots of `t -> det L(tX)`: reciprocals of the nonzero eigenvalues of
    /// the hermitian matrix `sum_i A_i (x) X_i`, hence real.
    pub fn line_roots(&self, x: &HermTuple) -> Result<Vec<f64>> {
        let lin = HermMatrix::new(self.linear_part(x.mats())?);
        let mu = hermitian_eigenvalues(&lin)?;
        let scale = mu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return Err(Error::ZeroDirection);
        }
        let mut roots: Vec<f64> = mu
            .iter()
            .filter(|v| v.abs() > 1e-10 * scale)
            .map(|v| 1.0 / v)
            .collect();
        roots.sort_by(f64::total_cmp);
        Ok(roots)
    }

    /// Normalized residual of a line root: `sigma_min(L(t X)) / (1 + |t| ||sum A_i (x) X_i||_2)`.
    pub fn root_residual(&self, x: &HermTuple, t: f64) -> Result<f64> {
        let lin = self.linear_part(x.mats())?;
        let scale = singular_values(&lin).iter().fold(0.0f64, |m, v| m.max(*v));
        let at = self.evaluate(&x.scaled(t))?;
        let sv = singular_values(at.matrix());
        let smin = sv.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        Ok(smin / (1.0 + t.abs() * scale))
    }

    /// Largest `t` with `tX` in the spectrahedron: `1 / lambda_max(sum A_i (x) X_i)`,
    /// `None` when the ray never leaves.
    pub fn ray_exit(&self, x: &HermTuple) -> Result<Option<f64>> {
        let lin = HermMatrix::new(self.linear_part(x.mats())?);
        let mu = hermitian_eigenvalues(&lin)?;
        let top = *mu.last().unwrap();
        let scale = mu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok((top > 1e-12 * scale && top > 0.0).then(|| 1.0 / top))
    }

    pub fn to_json_string(&self) -> String {
        let file = PencilFile {
            label: self.label.clone(),
            g: self.g(),
            delta: self.delta(),
            coeffs: self.coeffs.mats().iter().map(to_wire).collect(),
        };
        serde_json::to_string_pretty(&file).expect("pencil serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: PencilFile = serde_json::from_str(text)?;
        if file.coeffs.len() != file.g || file.g == 0 {
            return Err(Error::InvalidInput(format!(
                "pencil declares g = {} but lists {} coefficients",
                file.g,
                file.coeffs.len()
            )));
        }
        let mats = file
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, w)| from_wire(w, file.delta, &format!("coefficient {}", i + 1)))
            .collect::<Result<Vec<_>>>()?;
        MonicPencil::from_tuple(HermTuple::checked(mats, "pencil file")?, file.label)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }
}

/// Whether `B` lies in the polar of `{A}`: `lambda_min(I - sum B_i (x) A_i) >= -tol`.
pub fn polar_member(b: &HermTuple, a: &HermTuple, tol: f64) -> Result<bool> {
    Ok(polar_min_eigenvalue(b, a)? >= -tol)
}

pub fn polar_min_eigenvalue(b: &HermTuple, a: &HermTuple) -> Result<f64> {
    if b.g() != a.g() {
        return Err(Error::DimensionMismatch(format!(
            "polar pairing of g = {} and g = {}",
            b.g(),
            a.g()
        )));
    }
    let n = b.level() * a.level();
    let mut m = CMatrix::identity(n, n);
    for (bi, ai) in b.mats().iter().zip(a.mats()) {
        m -= kron(bi, ai);
    }
    Ok(hermitian_eigenvalues(&HermMatrix::new(m))?[0])
}

/// Standard pencils used throughout tests, the self-test and the CLI.
pub mod fixtures {
    use super::*;

    /// `1 - x`: the half-line `x <= 1`.
    pub fn scalar() -> MonicPencil {
        MonicPencil::diagonal(&[vec![1.0]], "scalar").unwrap()
    }

    /// `diag(1 - x, 1 + x)`: the interval `[-1, 1]`.
    pub fn interval() -> MonicPencil {
        MonicPencil::diagonal(&[vec![1.0, -1.0]], "interval").unwrap()
    }

    /// `I - sigma_x x1 - sigma_z x2`: the free disc.
    pub fn pauli() -> MonicPencil {
        let one = c(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let sx = CMatrix::from_row_slice(2, 2, &[zero, one, one, zero]);
        let sz = CMatrix::from_row_slice(2, 2, &[one, zero, zero, -one]);
        MonicPencil::new(vec![sx, sz], "pauli").unwrap()
    }

    /// `diag(1 - x1, 1 + x1, 1 - x2, 1 + x2)`: the free square.
    pub fn cube() -> MonicPencil {
        MonicPencil::diagonal(
            &[vec![1.0, -1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, -1.0]],
            "cube",
        )
        .unwrap()
    }

    pub fn all() -> Vec<MonicPencil> {
        vec![
            scalar(),
            interval(),
            pauli(),
            cube(),
            crate::detdeg::counterexample_pencil(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::numkernel::{random_unitary, rng_from_seed};

    fn point(vals: &[f64]) -> HermTuple {
        HermTuple::new(
            vals.iter()
                .map(|&v| CMatrix::from_element(1, 1, c(v, 0.0)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn evaluate_at_zero_is_identity() {
        for l in all() {
            let lx = l.evaluate(&HermTuple::zeros(l.g(), 3)).unwrap();
            assert!(
                frob(&(lx.matrix() - CMatrix::identity(3 * l.delta(), 3 * l.delta()))) <= 1e-12
            );
        }
    }

    #[test]
    fn evaluate_scalar_pencil() {
        let v = scalar().evaluate(&point(&[0.5])).unwrap();
        assert_eq!(v.matrix()[(0, 0)], c(0.5, 0.0));
    }

    #[test]
    fn evaluate_interval_at_swap() {
        // oracle: explicit 4x4 matrix I - diag(1,-1) (x) sigma_x
        let sx = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
        let x = HermTuple::new(vec![sx]).unwrap();
        let v = interval().evaluate(&x).unwrap();
        let expected = CMatrix::from_row_slice(
            4,
            4,
            &[
                1., -1., 0., 0., -1., 1., 0., 0., 0., 0., 1., 1., 0., 0., 1., 1.,
            ]
            .map(|r| c(r, 0.)),
        );
        assert!(frob(&(v.matrix() - &expected)) < 1e-15);
        let eig = hermitian_eigenvalues(&v).unwrap();
        for (got, want) in eig.iter().zip([0.0, 0.0, 2.0, 2.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn classify_cases() {
        let l = interval();
        let z = l.classify(&HermTuple::zeros(1, 1), None).unwrap();
        assert_eq!(z.verdict, Verdict::Interior);
        assert!((z.min_eigenvalue - 1.0).abs() < 1e-15);

        let b = l.classify(&point(&[1.0]), None).unwrap();
        assert_eq!(b.verdict, Verdict::Boundary);
        let kb = b.kernel_basis.unwrap();
        assert_eq!(kb.ncols(), 1);
        assert!((kb[(0, 0)].norm() - 1.0).abs() < 1e-12);

        let o = l.classify(&point(&[2.0]), None).unwrap();
        assert_eq!(o.verdict, Verdict::Outside);
        assert!((o.min_eigenvalue + 1.0).abs() < 1e-12);
        assert!(o.kernel_basis.is_none());
    }

    #[test]
    fn free_locus_cases() {
        assert!(
            !interval()
                .in_free_locus(&HermTuple::zeros(1, 1), 1e-8)
                .unwrap()
                .0
        );
        assert!(interval().in_free_locus(&point(&[1.0]), 1e-8).unwrap().0);
        assert!(scalar().in_free_locus(&point(&[1.0]), 1e-8).unwrap().0);
        // outside points with a kernel are in the locus too
        assert!(interval().in_free_locus(&point(&[-1.0]), 1e-8).unwrap().0);
        let cube_pt = point(&[1.0, 3.0]);
        assert!(cube().in_free_locus(&cube_pt, 1e-8).unwrap().0);
        assert_eq!(
            cube().classify(&cube_pt, None).unwrap().verdict,
            Verdict::Outside
        );
    }

    #[test]
    fn direct_sum_construction_and_intersection() {
        let up = MonicPencil::diagonal(&[vec![1.0]], "up").unwrap();
        let down = MonicPencil::diagonal(&[vec![-1.0]], "down").unwrap();
        assert_eq!(up.direct_sum(&down).unwrap().coeffs(), interval().coeffs());

        let (a, b) = (pauli(), cube());
        let sum = a.direct_sum(&b).unwrap();
        let mut rng = rng_from_seed(17);
        for _ in 0..50 {
            let x = HermTuple::random_gue(2, 2, &mut rng).scaled(0.8);
            let outside =
                |p: &MonicPencil| p.classify(&x, None).unwrap().verdict == Verdict::Outside;
            assert_eq!(outside(&sum), outside(&a) || outside(&b));
        }
        assert!(a.direct_sum(&interval()).is_err());
    }

    #[test]
    fn conjugation_cases() {
        let l = interval();
        assert_eq!(
            l.conjugate(&CMatrix::identity(2, 2)).unwrap().coeffs(),
            l.coeffs()
        );
        let swap = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
        let swapped = l.conjugate(&swap).unwrap();
        assert_eq!(swapped.coeffs().get(0)[(0, 0)], c(-1.0, 0.0));
        assert!(matches!(
            l.conjugate(&CMatrix::identity(2, 2).scale(2.0)),
            Err(Error::NotUnitary(_))
        ));
    }

    #[test]
    fn conjugation_preserves_spectra() {
        let mut rng = rng_from_seed(23);
        let l = pauli();
        let u = random_unitary(2, &mut rng);
        let lu = l.conjugate(&u).unwrap();
        for _ in 0..20 {
            let x = HermTuple::random_gue(2, 3, &mut rng);
            let a = hermitian_eigenvalues(&l.evaluate(&x).unwrap()).unwrap();
            let b = hermitian_eigenvalues(&lu.evaluate(&x).unwrap()).unwrap();
            assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() <= 1e-9));
            // (U* (x) I) L(X) (U (x) I) = conjugated pencil at X
            let big = kron(&u, &CMatrix::identity(3, 3));
            let lhs = big.adjoint() * l.evaluate(&x).unwrap().matrix() * &big;
            assert!(frob(&(lhs - lu.evaluate(&x).unwrap().matrix())) <= 1e-10);
        }
    }

    #[test]
    fn det_level_cases() {
        let l = interval();
        assert_eq!(l.det_level(&HermTuple::zeros(1, 2)).unwrap(), 1.0);
        assert!((l.det_level(&point(&[2.0])).unwrap() + 3.0).abs() < 1e-12);
        let mut rng = rng_from_seed(29);
        for l in all() {
            for _ in 0..20 {
                let x = HermTuple::random_gue(l.g(), 1, &mut rng);
                let z = HermTuple::random_gue(l.g(), 2, &mut rng);
                let prod = l.det_level(&x).unwrap() * l.det_level(&z).unwrap();
                let joint = l.det_level(&x.direct_sum(&z).unwrap()).unwrap();
                assert!((joint - prod).abs() <= 1e-8 * (1.0 + prod.abs()));
            }
        }
    }

    #[test]
    fn line_root_cases() {
        assert_eq!(scalar().line_roots(&point(&[2.0])).unwrap(), vec![0.5]);
        let r = interval().line_roots(&point(&[1.0])).unwrap();
        assert!((r[0] + 1.0).abs() < 1e-15 && (r[1] - 1.0).abs() < 1e-15);
        assert!(matches!(
            interval().line_roots(&HermTuple::zeros(1, 2)),
            Err(Error::ZeroDirection)
        ));
    }

    #[test]
    fn line_roots_are_singular_points() {
        let mut rng = rng_from_seed(21);
        for l in all() {
            for _ in 0..20 {
                let x = HermTuple::random_gue(l.g(), 3, &mut rng);
                for t in l.line_roots(&x).unwrap() {
                    assert!(l.root_residual(&x, t).unwrap() <= 1e-6);
                }
                assert!(l.root_residual(&x, 0.0).unwrap() > 0.4);
            }
        }
    }

    #[test]
    fn polar_cases() {
        let zero = HermTuple::zeros(1, 1);
        let mut rng = rng_from_seed(31);
        let a = HermTuple::random_gue(1, 3, &mut rng);
        assert!(polar_member(&zero, &a, 1e-12).unwrap());
        assert!(polar_member(&point(&[1.0]), &point(&[1.0]), 1e-12).unwrap());
        assert!(!polar_member(&point(&[1.0]), &point(&[2.0]), 1e-12).unwrap());
    }

    #[test]
    fn polar_membership_is_symmetric() {
        let mut rng = rng_from_seed(37);
        for _ in 0..50 {
            let b = HermTuple::random_gue(2, 2, &mut rng).scaled(0.4);
            let a = HermTuple::random_gue(2, 3, &mut rng).scaled(0.4);
            let ab = polar_min_eigenvalue(&b, &a).unwrap();
            let ba = polar_min_eigenvalue(&a, &b).unwrap();
            assert!((ab - ba).abs() <= 1e-10);
        }
    }

    #[test]
    fn ray_exit_reaches_boundary_and_inner_points_are_interior() {
        let mut rng = rng_from_seed(41);
        for l in all() {
            let x = HermTuple::random_gue(l.g(), 2, &mut rng);
            let Some(t) = l.ray_exit(&x).unwrap() else {
                continue;
            };
            let edge = x.scaled(t);
            assert_eq!(l.classify(&edge, None).unwrap().verdict, Verdict::Boundary);
            for s in [0.1, 0.5, 0.9] {
                assert_eq!(
                    l.classify(&edge.scaled(s), None).unwrap().verdict,
                    Verdict::Interior
                );
            }
        }
    }

    #[test]
    fn pencil_file_round_trip_and_validation() {
        let l = pauli();
        let back = MonicPencil::from_json_str(&l.to_json_string()).unwrap();
        assert_eq!(back, l);
        let bad =
            r#"{"label": "bad", "g": 1, "delta": 2, "coeffs": [[[[0,0],[1,0]],[[0,0],[0,0]]]]}"#;
        assert!(matches!(
            MonicPencil::from_json_str(bad),
            Err(Error::HermitianViolation { .. })
        ));
        let ragged = r#"{"g": 1, "delta": 2, "coeffs": [[[[0,0]],[[0,0],[0,0]]]]}"#;
        assert!(matches!(
            MonicPencil::from_json_str(ragged),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn tuple_file_round_trip() {
        let mut rng = rng_from_seed(43);
        let x = HermTuple::random_gue(2, 3, &mut rng);
        assert_eq!(HermTuple::from_json_str(&x.to_json_string()).unwrap(), x);
    }
}
