//! Separation certificates, compressions to low rank, extreme-point tests
//! and Caratheodory reduction of matrix convex combinations.
//!
//! Vectors in `C^delta (x) C^k` are regrouped as `w = sum_a e_a (x) w_a`;
//! the columns `w_a` span the subspace a point is compressed to.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::numkernel::{
    c, fork_seed, frob, hermitian_eig, psd_power, range_basis, rng_from_seed, CMatrix, CVector,
    HermMatrix, C64,
};
use crate::par::{self, Exec};
use crate::pencil::{HermTuple, MonicPencil, Verdict};
use crate::structure::is_irreducible;

const RAY_CAP: f64 = 1e3;

/// Splits `w` of length `delta * k` into the `k x delta` matrix `[w_1 .. w_delta]`.
fn regroup(w: &CVector, delta: usize, k: usize) -> CMatrix {
    CMatrix::from_fn(k, delta, |r, a| w[a * k + r])
}

/// Random point of `D_L` at level `k`: a GUE direction scaled to the
/// boundary along its ray (capped when the ray never leaves) and then
/// shrunk by a uniform factor.
pub fn sample_inside<R: Rng + ?Sized>(l: &MonicPencil, k: usize, rng: &mut R) -> Result<HermTuple> {
    let x = HermTuple::random_gue(l.g(), k, rng);
    let t = l.ray_exit(&x)?.unwrap_or(RAY_CAP).min(RAY_CAP);
    Ok(x.scaled(t * rng.gen::<f64>()))
}

/// Random boundary point at level `k` along a GUE ray; rays that never
/// leave `D_L` are redrawn.
pub fn sample_boundary<R: Rng + ?Sized>(
    l: &MonicPencil,
    k: usize,
    rng: &mut R,
) -> Result<HermTuple> {
    for _ in 0..1000 {
        let x = HermTuple::random_gue(l.g(), k, rng);
        if let Some(t) = l.ray_exit(&x)? {
            return Ok(x.scaled(t));
        }
    }
    Err(Error::InvalidInput(
        "spectrahedron has no boundary along sampled rays".into(),
    ))
}

/// Random point outside `D_L`, beyond the boundary by a factor in `[1.1, 3)`.
pub fn sample_outside<R: Rng + ?Sized>(
    l: &MonicPencil,
    k: usize,
    rng: &mut R,
) -> Result<HermTuple> {
    let b = sample_boundary(l, k, rng)?;
    Ok(b.scaled(1.1 + 1.9 * rng.gen::<f64>()))
}

#[derive(Debug, Clone)]
pub struct SeparationCertificate {
    /// Pencil of size `Y.level()` that is PSD on `D_M` but not at `Y`.
    pub pencil: MonicPencil,
    /// Unit eigenvector of `M(Y)` for its least eigenvalue.
    pub witness: CVector,
    /// `lambda_min(M(Y))`.
    pub construction_value: f64,
    /// `lambda_min(L(Y))`.
    pub negativity: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SoundnessReport {
    pub samples: usize,
    pub level: usize,
    pub min_eigenvalue: f64,
}

impl SeparationCertificate {
    /// `lambda_min(L(X))` minimized over sampled points of `D_M` at the
    /// level of the separated point.
    pub fn soundness(
        &self,
        m: &MonicPencil,
        samples: usize,
        seed: u64,
        exec: Exec,
    ) -> Result<SoundnessReport> {
        let level = self.pencil.delta();
        let mins = par::map_range(exec, samples, |s| -> Result<f64> {
            let mut rng = rng_from_seed(fork_seed(seed, s as u64));
            let x = sample_inside(m, level, &mut rng)?;
            self.pencil.min_eigenvalue(&x)
        });
        let min_eigenvalue = mins
            .into_iter()
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        Ok(SoundnessReport {
            samples,
            level,
            min_eigenvalue,
        })
    }

    pub fn to_json_string(&self, soundness: Option<&SoundnessReport>) -> String {
        let pencil: serde_json::Value =
            serde_json::from_str(&self.pencil.to_json_string()).expect("pencil json is valid");
        let witness: Vec<[f64; 2]> = self.witness.iter().map(|z| [z.re, z.im]).collect();
        serde_json::to_string_pretty(&json!({
            "pencil": pencil,
            "witness": witness,
            "construction_value": self.construction_value,
            "negativity": self.negativity,
            "soundness": soundness,
        }))
        .expect("certificate serializes")
    }
}

/// Builds a pencil of size `Y.level()` separating `Y` from `D_M`.
///
/// With `u` the least eigenvector of `M(Y)`, `R = sum_g u_g u_g*` and
/// `~u_g = R^{+1/2} u_g`, the coefficients are
/// `C_j[a, b] = sum_{g, n} (M_j)[g, n] conj(~u_g[a]) ~u_n[b]`. Then
/// `w* L(X) w >= z* M(X) z` for `z_g = sum_a ~u_g[a] w_a`, so `L` is PSD on
/// `D_M`, while `w_a = R^{1/2} e_a` gives `lambda_min(L(Y)) <= lambda_min(M(Y))`.
pub fn separate(m: &MonicPencil, y: &HermTuple, tol: Option<f64>) -> Result<SeparationCertificate> {
    let cls = m.classify(y, tol)?;
    if cls.verdict != Verdict::Outside {
        return Err(Error::NotOutside(cls.min_eigenvalue));
    }
    let (mm, d) = (m.delta(), y.level());
    let eig = hermitian_eig(&m.evaluate(y)?)?;
    let u = eig.vector(0);
    let blocks: Vec<CVector> = (0..mm).map(|g| u.rows(g * d, d).into_owned()).collect();
    let mut r = CMatrix::zeros(d, d);
    for b in &blocks {
        r += b * b.adjoint();
    }
    let r_inv_half = psd_power(&HermMatrix::new(r), -0.5, 1e-12)?;
    let tilde: Vec<CVector> = blocks.iter().map(|b| &r_inv_half * b).collect();
    let coeffs = m
        .coeffs()
        .mats()
        .iter()
        .map(|mj| {
            CMatrix::from_fn(d, d, |a, b| {
                let mut acc = C64::new(0.0, 0.0);
                for g in 0..mm {
                    for n in 0..mm {
                        let e = mj[(g, n)];
                        if e != C64::new(0.0, 0.0) {
                            acc += e * tilde[g][a].conj() * tilde[n][b];
                        }
                    }
                }
                acc
            })
        })
        .collect();
    let pencil = MonicPencil::new(coeffs, format!("separator({})", m.label))?;
    let negativity = pencil.min_eigenvalue(y)?;
    Ok(SeparationCertificate {
        pencil,
        witness: u,
        construction_value: eig.min(),
        negativity,
    })
}

/// Result of compressing a point to the span of a regrouped vector.
#[derive(Debug, Clone)]
pub struct Compression {
    /// `k x r` isometry, `r <= delta`.
    pub isometry: CMatrix,
    /// `P* A_i P`.
    pub point: HermTuple,
    /// The regrouped vector `sum_a e_a (x) P* w_a`.
    pub witness: CVector,
    pub multiple_kernel_directions: bool,
}

impl Compression {
    pub fn rank(&self) -> usize {
        self.isometry.ncols()
    }
}

fn compress_along(l: &MonicPencil, a: &HermTuple, w: &CVector) -> Result<Compression> {
    let (d, k) = (l.delta(), a.level());
    let wm = regroup(w, d, k);
    let p = range_basis(&wm, 1e-12);
    let point = a.compress(&p)?;
    let r = p.ncols();
    let reduced = p.adjoint() * wm;
    let witness = CVector::from_fn(d * r, |i, _| reduced[(i % r, i / r)]);
    Ok(Compression {
        isometry: p,
        point,
        witness,
        multiple_kernel_directions: false,
    })
}

/// Compresses an outside point to rank `<= delta` while keeping it outside:
/// the least eigenvector `w` of `L(A)` satisfies
/// `w* L(A) w = w'* L(P* A P) w'` for `P` spanning the columns `w_a`.
pub fn compress_witness(l: &MonicPencil, a: &HermTuple, tol: Option<f64>) -> Result<Compression> {
    let cls = l.classify(a, tol)?;
    if cls.verdict != Verdict::Outside {
        return Err(Error::NotOutside(cls.min_eigenvalue));
    }
    let eig = hermitian_eig(&l.evaluate(a)?)?;
    compress_along(l, a, &eig.vector(0))
}

/// Compression of a boundary point to the span of the regrouped kernel
/// vector; the result stays on the boundary. When the kernel has more than
/// one direction the first is used and the result is flagged.
pub fn minimal_boundary_projection(
    l: &MonicPencil,
    a: &HermTuple,
    tol: Option<f64>,
) -> Result<Compression> {
    let cls = l.classify(a, tol)?;
    let kernel = match (cls.verdict, cls.kernel_basis) {
        (Verdict::Boundary, Some(k)) if k.ncols() > 0 => k,
        _ => return Err(Error::NotBoundary(cls.min_eigenvalue)),
    };
    let mut out = compress_along(l, a, &kernel.column(0).into_owned())?;
    out.multiple_kernel_directions = kernel.ncols() > 1;
    Ok(out)
}

fn boundary_kernel(l: &MonicPencil, a: &HermTuple) -> Result<CMatrix> {
    let cls = l.classify(a, None)?;
    match (cls.verdict, cls.kernel_basis) {
        (Verdict::Boundary, Some(k)) if k.ncols() > 0 => Ok(k),
        _ => Err(Error::NotBoundary(cls.min_eigenvalue)),
    }
}

/// Real basis of hermitian `k x k` matrices (`k^2` elements).
fn hermitian_basis(k: usize) -> Vec<CMatrix> {
    let mut out = vec![];
    for p in 0..k {
        for q in p..k {
            let mut e = CMatrix::zeros(k, k);
            if p == q {
                e[(p, p)] = c(1.0, 0.0);
                out.push(e);
            } else {
                e[(p, q)] = c(1.0, 0.0);
                e[(q, p)] = c(1.0, 0.0);
                out.push(e.clone());
                e[(p, q)] = c(0.0, 1.0);
                e[(q, p)] = c(0.0, -1.0);
                out.push(e);
            }
        }
    }
    out
}

/// Real kernel of a real matrix at relative tolerance `rtol`; columns are
/// an orthonormal basis.
fn real_nullspace(m: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let n = m.ncols();
    let padded = if m.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let s = &svd.singular_values;
    let smax = s.iter().copied().fold(0.0, f64::max);
    let idx: Vec<usize> = (0..n)
        .filter(|&j| smax == 0.0 || s[j] <= rtol * smax)
        .collect();
    DMatrix::from_fn(n, idx.len(), |i, col| vt[(idx[col], i)])
}

/// True iff no nonzero hermitian direction `H` satisfies
/// `(sum_i A_i (x) H_i) v = 0` for every kernel vector `v` of `L(A)`.
pub fn is_euclidean_extreme(l: &MonicPencil, a: &HermTuple) -> Result<bool> {
    let kernel = boundary_kernel(l, a)?;
    let k = a.level();
    let basis = hermitian_basis(k);
    let n = l.delta() * k;
    let rows = 2 * n * kernel.ncols();
    let mut sys = DMatrix::<f64>::zeros(rows, l.g() * basis.len());
    for (i, ai) in l.coeffs().mats().iter().enumerate() {
        for (bi, h) in basis.iter().enumerate() {
            let img = crate::numkernel::kron(ai, h) * &kernel;
            let col = i * basis.len() + bi;
            for (idx, z) in img.iter().enumerate() {
                sys[(2 * idx, col)] = z.re;
                sys[(2 * idx + 1, col)] = z.im;
            }
        }
    }
    Ok(real_nullspace(&sys, 1e-9).ncols() == 0)
}

#[derive(Debug, Clone)]
pub enum AbsoluteVerdict {
    AbsoluteExtreme,
    /// `[[A_i, t alpha_i], [t alpha_i*, beta_i]]` lies in `D_L`.
    Dilation {
        alpha: Vec<CVector>,
        beta: Vec<f64>,
        t: f64,
        dilated: HermTuple,
        min_eigenvalue: f64,
    },
    /// A nonzero `alpha` solves the range condition but no `t >= 1e-6`
    /// verified; inconclusive.
    BisectionFailure {
        alpha: Vec<CVector>,
    },
}

impl AbsoluteVerdict {
    pub fn is_absolute_extreme(&self) -> bool {
        matches!(self, AbsoluteVerdict::AbsoluteExtreme)
    }

    pub fn to_json_string(&self) -> String {
        let vecs = |a: &[CVector]| -> Vec<Vec<[f64; 2]>> {
            a.iter()
                .map(|v| v.iter().map(|z| [z.re, z.im]).collect())
                .collect()
        };
        let value = match self {
            AbsoluteVerdict::AbsoluteExtreme => json!({"verdict": "absolute_extreme"}),
            AbsoluteVerdict::Dilation {
                alpha,
                beta,
                t,
                min_eigenvalue,
                ..
            } => json!({
                "verdict": "dilation",
                "alpha": vecs(alpha),
                "beta": beta,
                "t": t,
                "min_eigenvalue": min_eigenvalue,
            }),
            AbsoluteVerdict::BisectionFailure { alpha } => {
                json!({"verdict": "bisection_failure", "alpha": vecs(alpha)})
            }
        };
        serde_json::to_string_pretty(&value).expect("verdict serializes")
    }
}

fn dilate(a: &HermTuple, alpha: &[CVector], t: f64) -> HermTuple {
    let k = a.level();
    let mats = a
        .mats()
        .iter()
        .zip(alpha)
        .map(|(x, al)| {
            let mut m = CMatrix::zeros(k + 1, k + 1);
            m.view_mut((0, 0), (k, k)).copy_from(x);
            for r in 0..k {
                m[(r, k)] = al[r] * t;
                m[(k, r)] = (al[r] * t).conj();
            }
            m
        })
        .collect();
    HermTuple::new(mats).expect("square blocks")
}

/// Searches for a nontrivial one-step dilation of a boundary point. The
/// off-diagonal column `alpha` must satisfy `v* (sum_i A_i (x) alpha_i) = 0`
/// for every kernel vector `v`; with `beta = 0` a small multiple then stays
/// in `D_L`, and the largest verified `t` in `(0, 1]` is found by bisection.
pub fn absolute_extreme_test(l: &MonicPencil, a: &HermTuple) -> Result<AbsoluteVerdict> {
    let kernel = boundary_kernel(l, a)?;
    let (d, k, g) = (l.delta(), a.level(), l.g());
    let mut sys = CMatrix::zeros(kernel.ncols() * d, g * k);
    for j in 0..kernel.ncols() {
        for cc in 0..d {
            for (i, ai) in l.coeffs().mats().iter().enumerate() {
                for r in 0..k {
                    let mut acc = C64::new(0.0, 0.0);
                    for aa in 0..d {
                        acc += kernel[(aa * k + r, j)].conj() * ai[(aa, cc)];
                    }
                    sys[(j * d + cc, i * k + r)] = acc;
                }
            }
        }
    }
    let sol = crate::numkernel::nullspace(&sys, 1e-9);
    if sol.ncols() == 0 {
        return Ok(AbsoluteVerdict::AbsoluteExtreme);
    }
    let col = sol.column(0);
    let alpha: Vec<CVector> = (0..g).map(|i| col.rows(i * k, k).into_owned()).collect();
    let feasible = |t: f64| -> Result<Option<f64>> {
        let dt = dilate(a, &alpha, t);
        let cls = l.classify(&dt, None)?;
        Ok((cls.verdict != Verdict::Outside).then_some(cls.min_eigenvalue))
    };
    let mut best = None;
    if let Some(m) = feasible(1.0)? {
        best = Some((1.0, m));
    } else {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            match feasible(mid)? {
                Some(m) => {
                    lo = mid;
                    best = Some((mid, m));
                }
                None => hi = mid,
            }
        }
    }
    match best {
        Some((t, min_eigenvalue)) if t >= 1e-6 => Ok(AbsoluteVerdict::Dilation {
            dilated: dilate(a, &alpha, t),
            alpha,
            beta: vec![0.0; g],
            t,
            min_eigenvalue,
        }),
        _ => Ok(AbsoluteVerdict::BisectionFailure { alpha }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Prefilter {
    FailsNecessary,
    PassesNecessary,
}

/// Necessary conditions for matrix extremality: irreducible, on the
/// boundary and euclidean extreme. Passing is not a certificate.
pub fn matrix_extreme_prefilter(l: &MonicPencil, a: &HermTuple) -> Result<Prefilter> {
    if !is_irreducible(a) || l.classify(a, None)?.verdict != Verdict::Boundary {
        return Ok(Prefilter::FailsNecessary);
    }
    Ok(if is_euclidean_extreme(l, a)? {
        Prefilter::PassesNecessary
    } else {
        Prefilter::FailsNecessary
    })
}

#[derive(Debug, Clone)]
pub struct CombinationTerm {
    pub c: HermTuple,
    /// `k_j x m`.
    pub v: CMatrix,
}

/// `sum_j V_j* C_j V_j` with `sum_j V_j* V_j = I_m`.
#[derive(Debug, Clone)]
pub struct MatrixCombination {
    pub m: usize,
    pub terms: Vec<CombinationTerm>,
    pub target: Option<HermTuple>,
}

impl MatrixCombination {
    pub fn value(&self) -> Result<HermTuple> {
        let g = self.terms.first().map(|t| t.c.g()).unwrap_or(0);
        let mut acc = vec![CMatrix::zeros(self.m, self.m); g];
        for t in &self.terms {
            for (i, ci) in t.c.mats().iter().enumerate() {
                acc[i] += t.v.adjoint() * ci * &t.v;
            }
        }
        HermTuple::new(acc)
    }

    pub fn identity_residual(&self) -> f64 {
        let mut s = CMatrix::identity(self.m, self.m) * c(-1.0, 0.0);
        for t in &self.terms {
            s += t.v.adjoint() * &t.v;
        }
        frob(&s)
    }

    pub fn target_residual(&self) -> Result<Option<f64>> {
        match &self.target {
            None => Ok(None),
            Some(t) => Ok(Some(self.value()?.distance(t))),
        }
    }

    /// Random valid combination of `n` terms at target level `m`; term
    /// levels are drawn from `1..=max_level`.
    pub fn random<R: Rng + ?Sized>(
        g: usize,
        m: usize,
        n: usize,
        max_level: usize,
        rng: &mut R,
    ) -> Self {
        let mut terms: Vec<CombinationTerm> = (0..n)
            .map(|_| {
                let k = rng.gen_range(1..=max_level);
                CombinationTerm {
                    c: HermTuple::random_gue(g, k, rng),
                    v: crate::numkernel::ginibre(k, m, rng),
                }
            })
            .collect();
        let mut s = CMatrix::zeros(m, m);
        for t in &terms {
            s += t.v.adjoint() * &t.v;
        }
        let fix = psd_power(&HermMatrix::new(s), -0.5, 1e-14).expect("gram matrix is hermitian");
        for t in &mut terms {
            t.v = &t.v * &fix;
        }
        let mut comb = MatrixCombination {
            m,
            terms,
            target: None,
        };
        comb.target = Some(comb.value().expect("terms share g"));
        comb
    }
}

fn realify_hermitian(h: &CMatrix, out: &mut Vec<f64>) {
    let k = h.nrows();
    for p in 0..k {
        out.push(h[(p, p)].re);
        for q in p + 1..k {
            out.push(h[(p, q)].re);
            out.push(h[(p, q)].im);
        }
    }
}

/// Bound on the number of terms the reduction stops at.
pub fn caratheodory_bound(m: usize) -> usize {
    4 * m * m + 1
}

/// Removes terms via real linear dependences among the points
/// `(V_j* C_j V_j, V_j* V_j)` until at most `4 m^2 + 1` remain. A
/// dependence `sum lambda_j P_j = 0` lets every weight shrink to
/// `1 - alpha lambda_j` with one reaching zero, leaving both sums intact.
/// Dependences are guaranteed while the term count exceeds the real
/// dimension `(g + 1) m^2`.
pub fn caratheodory_reduce(comb: &MatrixCombination) -> Result<MatrixCombination> {
    let bound = caratheodory_bound(comb.m);
    let mut terms: Vec<CombinationTerm> = comb
        .terms
        .iter()
        .filter(|t| frob(&t.v) > 0.0)
        .cloned()
        .collect();
    while terms.len() > bound {
        let n = terms.len();
        let cols: Vec<Vec<f64>> = terms
            .iter()
            .map(|t| {
                let mut v = vec![];
                for ci in t.c.mats() {
                    realify_hermitian(&(t.v.adjoint() * ci * &t.v), &mut v);
                }
                realify_hermitian(&(t.v.adjoint() * &t.v), &mut v);
                v
            })
            .collect();
        let sys = DMatrix::from_fn(cols[0].len(), n, |i, j| cols[j][i]);
        let null = real_nullspace(&sys, 1e-10);
        if null.ncols() == 0 {
            return Err(Error::DependenceSolveFailure(n));
        }
        let mut lambda: DVector<f64> = null.column(0).into_owned();
        if lambda.iter().all(|&x| x <= 0.0) {
            lambda = -lambda;
        }
        let (drop, alpha) = lambda
            .iter()
            .enumerate()
            .filter(|(_, &x)| x > 0.0)
            .map(|(j, &x)| (j, 1.0 / x))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or(Error::DependenceSolveFailure(n))?;
        for (j, t) in terms.iter_mut().enumerate() {
            let f = (1.0 - alpha * lambda[j]).max(0.0).sqrt();
            t.v = t.v.scale(f);
        }
        terms.remove(drop);
    }
    Ok(MatrixCombination {
        m: comb.m,
        terms,
        target: comb.target.clone(),
    })
}

/// Conjugates pencil and point jointly: coefficients by `U`, point by `V`.
pub fn conjugate_jointly(
    l: &MonicPencil,
    a: &HermTuple,
    u: &CMatrix,
    v: &CMatrix,
) -> Result<(MonicPencil, HermTuple)> {
    Ok((l.conjugate(u)?, a.compress(v)?))
}
