//! Coefficient algebra, commutant and the decomposition of a pencil into
//! irreducible classes with multiplicities.
//!
//! For a hermitian tuple the commutant is a C*-algebra, so a generic
//! hermitian element of it has eigenspaces that are joint reducing
//! subspaces. Splitting recursively until the commutant is trivial yields
//! the irreducible blocks; blocks are then grouped by unitary equivalence.

use std::cmp::Ordering;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{
    block_diag, c, fork_seed, frob, hermitian_eig, hermitian_eigenvalues, nullspace_atol,
    polar_unitary, rng_from_seed, CMatrix, HermMatrix, C64,
};
use crate::par::{self, Exec};
use crate::pencil::{HermTuple, MonicPencil, Verdict};

pub const COMMUTANT_RTOL: f64 = 1e-9;
pub const EQUIV_TOL: f64 = 1e-7;
pub const ZERO_BLOCK_TOL: f64 = 1e-10;
pub const DEFAULT_SEED: u64 = 0xF5EE;

const SPLIT_RESAMPLES: usize = 8;
const CLUSTER_GAP: f64 = 1e-3;
const OFF_BLOCK_TOL: f64 = 1e-8;

/// Orthonormal (Frobenius) basis of the unital algebra generated by a tuple.
#[derive(Debug, Clone)]
pub struct AlgebraBasis {
    pub basis: Vec<CMatrix>,
}

impl AlgebraBasis {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

fn inner(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Gram-Schmidt step (two passes); returns the normalized remainder when it
/// is not negligible relative to the candidate.
fn orthogonalize(basis: &[CMatrix], cand: &CMatrix, tol: f64) -> Option<CMatrix> {
    let norm0 = frob(cand);
    if norm0 == 0.0 {
        return None;
    }
    let mut r = cand.clone();
    for _ in 0..2 {
        for b in basis {
            let p = inner(b, &r);
            r -= b * p;
        }
    }
    let n = frob(&r);
    (n > tol * norm0.max(1.0)).then(|| r.unscale(n))
}

/// Span of all words in the coefficients, closed under left multiplication
/// by generators. Words are capped at length `2 delta^2`.
pub fn algebra_span(a: &HermTuple) -> AlgebraBasis {
    let d = a.level();
    let id = CMatrix::identity(d, d);
    let mut basis = vec![id.unscale((d as f64).sqrt())];
    let mut frontier = basis.clone();
    let mut length = 0;
    while !frontier.is_empty() && length < 2 * d * d && basis.len() < d * d {
        let mut next = vec![];
        for w in &frontier {
            for gen in a.mats() {
                if let Some(b) = orthogonalize(&basis, &(gen * w), 1e-9) {
                    basis.push(b.clone());
                    next.push(b);
                }
            }
        }
        frontier = next;
        length += 1;
    }
    AlgebraBasis { basis }
}

fn tuple_scale(a: &HermTuple) -> f64 {
    1.0 + a.norm()
}

/// Basis of `{S : S a_i = b_i S for all i}`.
fn intertwiners(a: &HermTuple, b: &HermTuple, rtol: f64) -> Vec<CMatrix> {
    let (p, q) = (b.level(), a.level());
    let g = a.g();
    let mut map = CMatrix::zeros(g * p * q, p * q);
    for col in 0..p * q {
        let (r, s) = (col / q, col % q);
        let mut e = CMatrix::zeros(p, q);
        e[(r, s)] = c(1.0, 0.0);
        for i in 0..g {
            let img = &e * a.get(i) - b.get(i) * &e;
            for (idx, z) in img.iter().enumerate() {
                map[(i * p * q + idx, col)] = *z;
            }
        }
    }
    let atol = rtol * (tuple_scale(a) + tuple_scale(b));
    let kernel = nullspace_atol(&map, atol);
    (0..kernel.ncols())
        .map(|j| CMatrix::from_fn(p, q, |r, s| kernel[(r * q + s, j)]))
        .collect()
}

/// Basis of `{S : S A_i = A_i S}`; always contains a multiple of `I`.
pub fn commutant(a: &HermTuple) -> Vec<CMatrix> {
    intertwiners(a, a, COMMUTANT_RTOL)
}

pub fn is_irreducible(a: &HermTuple) -> bool {
    a.level() == 1 || commutant(a).len() == 1
}

#[derive(Debug, Clone)]
pub enum Split {
    Irreducible,
    /// Isometries onto complementary joint reducing subspaces.
    Reducible {
        v1: CMatrix,
        v2: CMatrix,
    },
}

fn columns(m: &CMatrix, idx: &[usize]) -> CMatrix {
    let mut out = CMatrix::zeros(m.nrows(), idx.len());
    for (dst, &src) in idx.iter().enumerate() {
        out.set_column(dst, &m.column(src));
    }
    out
}

/// Splits the spectrum of a hermitian commutant element at its gaps; `None`
/// when it is numerically scalar.
fn split_by_spectrum(a: &HermTuple, h: CMatrix) -> Result<Option<(CMatrix, CMatrix)>> {
    let d = h.nrows();
    let trace = h.trace() / c(d as f64, 0.0);
    let centered = HermMatrix::new(h - CMatrix::identity(d, d) * trace);
    let eig = hermitian_eig(&centered)?;
    let scale = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale <= 1e-12 {
        return Ok(None);
    }
    let first_cut = (1..d).find(|&i| eig.values[i] - eig.values[i - 1] > CLUSTER_GAP * scale);
    let Some(cut) = first_cut else {
        return Ok(None);
    };
    let v1 = columns(&eig.vectors, &(0..cut).collect::<Vec<_>>());
    let v2 = columns(&eig.vectors, &(cut..d).collect::<Vec<_>>());
    let tol = OFF_BLOCK_TOL * tuple_scale(a);
    let off = a
        .mats()
        .iter()
        .map(|m| frob(&(v1.adjoint() * m * &v2)))
        .fold(0.0, f64::max);
    Ok((off <= tol).then_some((v1, v2)))
}

pub fn split_once<R: Rng + ?Sized>(a: &HermTuple, rng: &mut R) -> Result<Split> {
    if a.level() == 1 {
        return Ok(Split::Irreducible);
    }
    let basis = commutant(a);
    if basis.len() <= 1 {
        return Ok(Split::Irreducible);
    }
    let herm: Vec<CMatrix> = basis.iter().map(|b| (b + b.adjoint()).scale(0.5)).collect();
    let skew: Vec<CMatrix> = basis
        .iter()
        .map(|b| (b - b.adjoint()) * c(0.0, -0.5))
        .collect();
    for _ in 0..SPLIT_RESAMPLES {
        let mut h = CMatrix::zeros(a.level(), a.level());
        for (p, q) in herm.iter().zip(&skew) {
            let (x, y): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            h += p.scale(x) + q.scale(y);
        }
        if let Some((v1, v2)) = split_by_spectrum(a, h)? {
            return Ok(Split::Reducible { v1, v2 });
        }
    }
    for h in herm.into_iter().chain(skew) {
        if let Some((v1, v2)) = split_by_spectrum(a, h)? {
            return Ok(Split::Reducible { v1, v2 });
        }
    }
    Err(Error::SplitFailure(format!(
        "commutant has dimension {} but no hermitian element separates it",
        basis.len()
    )))
}

/// Unitary `U` with `U A_i U* = B_i`, if one exists. Irreducible pairs are
/// settled by a single intertwiner; general tuples are decomposed and
/// matched class by class.
pub fn unitary_equivalent(a: &HermTuple, b: &HermTuple) -> Result<Option<CMatrix>> {
    unitary_equivalent_with(a, b, DEFAULT_SEED, Exec::default())
}

pub fn unitary_equivalent_with(
    a: &HermTuple,
    b: &HermTuple,
    seed: u64,
    exec: Exec,
) -> Result<Option<CMatrix>> {
    if a.level() != b.level() || a.g() != b.g() {
        return Ok(None);
    }
    if is_irreducible(a) && is_irreducible(b) {
        return Ok(irreducible_match(a, b));
    }
    let ra = decompose_tuple(a, seed, exec)?;
    let rb = decompose_tuple(b, fork_seed(seed, 1), exec)?;
    if ra.zero_rank != rb.zero_rank || ra.classes.len() != rb.classes.len() {
        return Ok(None);
    }
    let d = a.level();
    let mut w = CMatrix::zeros(d, d);
    w.view_mut((0, 0), (ra.zero_rank, ra.zero_rank))
        .copy_from(&CMatrix::identity(ra.zero_rank, ra.zero_rank));
    let offsets = |r: &DecompositionReport| {
        let mut acc = r.zero_rank;
        r.classes
            .iter()
            .map(|cl| {
                let o = acc;
                acc += cl.multiplicity * cl.representative.level();
                o
            })
            .collect::<Vec<_>>()
    };
    let (oa, ob) = (offsets(&ra), offsets(&rb));
    let mut used = vec![false; rb.classes.len()];
    for (i, ca) in ra.classes.iter().enumerate() {
        let found = rb.classes.iter().enumerate().find_map(|(j, cb)| {
            if used[j] || cb.multiplicity != ca.multiplicity {
                return None;
            }
            irreducible_match(&ca.representative, &cb.representative).map(|u| (j, u))
        });
        let Some((j, u)) = found else { return Ok(None) };
        used[j] = true;
        let s = ca.representative.level();
        for copy in 0..ca.multiplicity {
            w.view_mut((ob[j] + copy * s, oa[i] + copy * s), (s, s))
                .copy_from(&u);
        }
    }
    let u = &rb.transform * w * ra.transform.adjoint();
    Ok((equivalence_residual(&u, a, b) <= EQUIV_TOL).then_some(u))
}

fn irreducible_match(a: &HermTuple, b: &HermTuple) -> Option<CMatrix> {
    if a.level() != b.level() || a.g() != b.g() {
        return None;
    }
    // cheap necessary condition before the linear solve
    for (x, y) in a.mats().iter().zip(b.mats()) {
        let ex = hermitian_eigenvalues(&HermMatrix::new(x.clone())).ok()?;
        let ey = hermitian_eigenvalues(&HermMatrix::new(y.clone())).ok()?;
        if ex
            .iter()
            .zip(&ey)
            .any(|(p, q)| (p - q).abs() > 1e-6 * tuple_scale(a))
        {
            return None;
        }
    }
    let s = intertwiners(a, b, COMMUTANT_RTOL).into_iter().next()?;
    let u = polar_unitary(&s).ok()?;
    (equivalence_residual(&u, a, b) <= EQUIV_TOL).then_some(u)
}

/// `max_i ||U A_i U* - B_i||_F`.
pub fn equivalence_residual(u: &CMatrix, a: &HermTuple, b: &HermTuple) -> f64 {
    a.mats()
        .iter()
        .zip(b.mats())
        .map(|(x, y)| frob(&(u * x * u.adjoint() - y)))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct ClassEntry {
    pub representative: HermTuple,
    pub multiplicity: usize,
}

/// `U* A_i U` is block diagonal: a zero block of size `zero_rank`, then
/// for each class its representative repeated `multiplicity` times.
#[derive(Debug, Clone)]
pub struct DecompositionReport {
    pub g: usize,
    pub classes: Vec<ClassEntry>,
    pub zero_rank: usize,
    pub transform: CMatrix,
    pub residual: f64,
}

impl DecompositionReport {
    pub fn normal_form(&self) -> HermTuple {
        let g = self.g;
        let zero = CMatrix::zeros(self.zero_rank, self.zero_rank);
        let mats = (0..g)
            .map(|i| {
                let mut blocks = vec![&zero];
                for cl in &self.classes {
                    for _ in 0..cl.multiplicity {
                        blocks.push(cl.representative.get(i));
                    }
                }
                block_diag(&blocks)
            })
            .collect();
        HermTuple::new(mats).expect("blocks are square")
    }

    pub fn minimal_size(&self) -> usize {
        self.classes.iter().map(|c| c.representative.level()).sum()
    }

    pub fn to_json_string(&self) -> String {
        let file = ReportFile {
            g: self.g,
            classes: self
                .classes
                .iter()
                .map(|c| ClassFile {
                    size: c.representative.level(),
                    multiplicity: c.multiplicity,
                    representative: wire(c.representative.mats()),
                })
                .collect(),
            zero_rank: self.zero_rank,
            transform: wire(std::slice::from_ref(&self.transform)).remove(0),
            residual: self.residual,
        };
        serde_json::to_string_pretty(&file).expect("report serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ReportFile = serde_json::from_str(text)?;
        let classes = file
            .classes
            .iter()
            .map(|c| {
                let mats = c
                    .representative
                    .iter()
                    .map(unwire)
                    .collect::<Result<Vec<_>>>()?;
                Ok(ClassEntry {
                    representative: HermTuple::checked(mats, "class representative")?,
                    multiplicity: c.multiplicity,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DecompositionReport {
            g: file.g,
            classes,
            zero_rank: file.zero_rank,
            transform: unwire(&file.transform)?,
            residual: file.residual,
        })
    }
}

type Wire = Vec<Vec<[f64; 2]>>;

fn wire(ms: &[CMatrix]) -> Vec<Wire> {
    ms.iter()
        .map(|m| {
            (0..m.nrows())
                .map(|i| {
                    (0..m.ncols())
                        .map(|j| [m[(i, j)].re, m[(i, j)].im])
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn unwire(w: &Wire) -> Result<CMatrix> {
    let n = w.len();
    if w.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput("matrix rows differ in length".into()));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| c(w[i][j][0], w[i][j][1])))
}

#[derive(Serialize, Deserialize)]
struct ClassFile {
    size: usize,
    multiplicity: usize,
    representative: Vec<Wire>,
}

#[derive(Serialize, Deserialize)]
struct ReportFile {
    g: usize,
    classes: Vec<ClassFile>,
    zero_rank: usize,
    transform: Wire,
    residual: f64,
}

enum Block {
    Zero(CMatrix),
    Irreducible(CMatrix),
}

/// Recursive splitting; returns isometries into the original space.
fn split_all(
    a: &HermTuple,
    v: CMatrix,
    zero_tol: f64,
    seed: u64,
    exec: Exec,
) -> Result<Vec<Block>> {
    let local = a.compress(&v)?;
    if local.mats().iter().all(|m| frob(m) <= zero_tol) {
        return Ok(vec![Block::Zero(v)]);
    }
    let mut rng = rng_from_seed(seed);
    match split_once(&local, &mut rng)? {
        Split::Irreducible => Ok(vec![Block::Irreducible(v)]),
        Split::Reducible { v1, v2 } => {
            let (w1, w2) = (&v * v1, &v * v2);
            let (left, right) = par::join(
                exec,
                || split_all(a, w1, zero_tol, fork_seed(seed, 1), exec),
                || split_all(a, w2, zero_tol, fork_seed(seed, 2), exec),
            );
            let mut out = left?;
            out.extend(right?);
            Ok(out)
        }
    }
}

fn spectral_key(t: &HermTuple) -> Vec<Vec<f64>> {
    t.mats()
        .iter()
        .map(|m| hermitian_eigenvalues(&HermMatrix::new(m.clone())).unwrap_or_default())
        .collect()
}

fn class_order(a: &HermTuple, b: &HermTuple) -> Ordering {
    a.level().cmp(&b.level()).then_with(|| {
        for (x, y) in spectral_key(a).iter().zip(&spectral_key(b)) {
            for (p, q) in x.iter().zip(y) {
                match p.total_cmp(q) {
                    Ordering::Equal => {}
                    o => return o,
                }
            }
        }
        Ordering::Equal
    })
}

pub fn decompose(l: &MonicPencil) -> Result<DecompositionReport> {
    decompose_tuple(l.coeffs(), DEFAULT_SEED, Exec::default())
}

pub fn decompose_with(l: &MonicPencil, seed: u64, exec: Exec) -> Result<DecompositionReport> {
    decompose_tuple(l.coeffs(), seed, exec)
}

pub fn decompose_tuple(a: &HermTuple, seed: u64, exec: Exec) -> Result<DecompositionReport> {
    let d = a.level();
    let zero_tol = ZERO_BLOCK_TOL * a.norm().max(1.0);
    let blocks = split_all(a, CMatrix::identity(d, d), zero_tol, seed, exec)?;

    let mut zero_cols: Vec<CMatrix> = vec![];
    // each class: representative plus the isometries of its copies, each
    // rotated so the compressed tuple equals the representative
    let mut classes: Vec<(HermTuple, Vec<CMatrix>)> = vec![];
    for block in blocks {
        match block {
            Block::Zero(v) => zero_cols.push(v),
            Block::Irreducible(v) => {
                let t = a.compress(&v)?;
                let hit = classes
                    .iter()
                    .enumerate()
                    .find_map(|(j, (rep, _))| irreducible_match(&t, rep).map(|u| (j, u)));
                match hit {
                    Some((j, u)) => classes[j].1.push(v * u.adjoint()),
                    None => classes.push((t, vec![v])),
                }
            }
        }
    }
    classes.sort_by(|x, y| class_order(&x.0, &y.0));

    let zero_rank: usize = zero_cols.iter().map(|v| v.ncols()).sum();
    let mut transform = CMatrix::zeros(d, d);
    let mut col = 0;
    for v in zero_cols
        .iter()
        .chain(classes.iter().flat_map(|(_, vs)| vs.iter()))
    {
        transform.view_mut((0, col), (d, v.ncols())).copy_from(v);
        col += v.ncols();
    }
    let mut report = DecompositionReport {
        g: a.g(),
        classes: classes
            .into_iter()
            .map(|(rep, vs)| ClassEntry {
                representative: rep,
                multiplicity: vs.len(),
            })
            .collect(),
        zero_rank,
        transform,
        residual: 0.0,
    };
    let nf = report.normal_form();
    report.residual = if report.classes.is_empty() {
        0.0
    } else {
        a.mats()
            .iter()
            .zip(nf.mats())
            .map(|(x, y)| frob(&(report.transform.adjoint() * x * &report.transform - y)))
            .fold(0.0, f64::max)
    };
    Ok(report)
}

/// One representative per class, zero blocks dropped; `None` when every
/// block is zero (the pencil is constant `I`).
pub fn minimal_pencil(l: &MonicPencil) -> Result<Option<MonicPencil>> {
    minimal_from_report(&decompose(l)?, &l.label)
}

pub fn minimal_from_report(r: &DecompositionReport, label: &str) -> Result<Option<MonicPencil>> {
    let Some(first) = r.classes.first() else {
        return Ok(None);
    };
    let mut t = first.representative.clone();
    for cl in &r.classes[1..] {
        t = t.direct_sum(&cl.representative)?;
    }
    Ok(Some(MonicPencil::from_tuple(
        t,
        format!("minimal({label})"),
    )?))
}

pub fn count_components(l: &MonicPencil) -> Result<usize> {
    Ok(decompose(l)?.classes.len())
}

/// Outcome of the non-certified redundancy search for one class.
#[derive(Debug, Clone, Serialize)]
pub struct PruneFlag {
    pub class: usize,
    /// Every sampled boundary point of the other classes' spectrahedron was
    /// strictly inside this class's spectrahedron.
    pub suspected_redundant: bool,
    pub samples: usize,
}

/// For each class, samples boundary points of the intersection of the other
/// classes at the class's own level and tests strict interiority. A hit on
/// every sample suggests the class does not cut the set; this is evidence,
/// not a containment proof.
pub fn prune_heuristic(
    r: &DecompositionReport,
    samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<PruneFlag>> {
    if r.classes.len() < 2 {
        return Ok(vec![]);
    }
    let mut flags = vec![];
    for (j, cl) in r.classes.iter().enumerate() {
        let own = MonicPencil::from_tuple(cl.representative.clone(), "class")?;
        let mut others: Option<HermTuple> = None;
        for (i, o) in r.classes.iter().enumerate() {
            if i != j {
                others = Some(match others {
                    None => o.representative.clone(),
                    Some(t) => t.direct_sum(&o.representative)?,
                });
            }
        }
        let rest = MonicPencil::from_tuple(others.expect("at least one other class"), "rest")?;
        let level = cl.representative.level();
        let g = own.g();
        let base = fork_seed(seed, j as u64);
        let hits = par::map_range(exec, samples, |s| -> Result<bool> {
            let mut rng = rng_from_seed(fork_seed(base, s as u64));
            let x = HermTuple::random_gue(g, level, &mut rng);
            match rest.ray_exit(&x)? {
                Some(t) => Ok(own.classify(&x.scaled(t), None)?.verdict == Verdict::Interior),
                None => Ok(own.ray_exit(&x)?.is_none()),
            }
        });
        let hits = hits.into_iter().collect::<Result<Vec<_>>>()?;
        flags.push(PruneFlag {
            class: j,
            suspected_redundant: hits.iter().all(|&h| h),
            samples,
        });
    }
    Ok(flags)
}

/// Random irreducible tuple of size `d`; for `g = 1` only `d = 1` exists.
pub fn random_irreducible<R: Rng + ?Sized>(g: usize, d: usize, rng: &mut R) -> HermTuple {
    assert!(
        g >= 2 || d == 1,
        "a single hermitian matrix is reducible beyond size 1"
    );
    loop {
        let t = HermTuple::random_gue(g, d, rng);
        if is_irreducible(&t) {
            return t;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::random_unitary;
    use crate::pencil::fixtures;

    fn single(m: CMatrix) -> HermTuple {
        HermTuple::new(vec![m]).unwrap()
    }

    fn diag(v: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            v.len(),
            v.iter().map(|&x| c(x, 0.0)),
        ))
    }

    fn scramble(blocks: &[&HermTuple], seed: u64) -> HermTuple {
        let mut t = blocks[0].clone();
        for b in &blocks[1..] {
            t = t.direct_sum(b).unwrap();
        }
        let u = random_unitary(t.level(), &mut rng_from_seed(seed));
        t.compress(&u).unwrap()
    }

    #[test]
    fn algebra_span_examples() {
        assert_eq!(algebra_span(&single(CMatrix::identity(2, 2))).dim(), 1);
        assert_eq!(algebra_span(fixtures::pauli().coeffs()).dim(), 4);
        assert_eq!(algebra_span(&single(diag(&[1.0, 2.0]))).dim(), 2);
        let b = algebra_span(fixtures::pauli().coeffs());
        for (i, x) in b.basis.iter().enumerate() {
            for (j, y) in b.basis.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((inner(x, y) - c(want, 0.0)).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn commutant_examples() {
        assert_eq!(commutant(fixtures::pauli().coeffs()).len(), 1);
        assert_eq!(commutant(&single(CMatrix::identity(2, 2))).len(), 4);
        assert_eq!(commutant(&single(diag(&[1.0, 2.0]))).len(), 2);
    }

    #[test]
    fn commutant_dimension_matches_brute_force() {
        // oracle: the 8 real unknowns of a 2x2 complex S, stacked real system
        let a = fixtures::pauli();
        let mut rows = vec![];
        for k in 0..8 {
            let mut s = CMatrix::zeros(2, 2);
            let z = if k % 2 == 0 { c(1.0, 0.0) } else { c(0.0, 1.0) };
            s[(k / 4, (k / 2) % 2)] = z;
            let mut col = vec![];
            for m in a.coeffs().mats() {
                let img = &s * m - m * &s;
                for v in img.iter() {
                    col.push(v.re);
                    col.push(v.im);
                }
            }
            rows.push(col);
        }
        let real = nalgebra::DMatrix::from_fn(rows[0].len(), 8, |i, j| rows[j][i]);
        let rank = real
            .svd(false, false)
            .singular_values
            .iter()
            .filter(|&&s| s > 1e-9)
            .count();
        assert_eq!(8 - rank, 2); // complex dimension 1
    }

    #[test]
    fn irreducibility_examples() {
        assert!(is_irreducible(fixtures::pauli().coeffs()));
        assert!(!is_irreducible(fixtures::interval().coeffs()));
        assert!(is_irreducible(&single(CMatrix::from_element(
            1,
            1,
            c(3.0, 0.0)
        ))));
        for l in fixtures::all() {
            assert_eq!(
                is_irreducible(l.coeffs()),
                algebra_span(l.coeffs()).dim() == l.delta() * l.delta(),
                "{}",
                l.label
            );
        }
    }

    #[test]
    fn split_examples() {
        let mut rng = rng_from_seed(5);
        assert!(matches!(
            split_once(fixtures::pauli().coeffs(), &mut rng).unwrap(),
            Split::Irreducible
        ));
        let Split::Reducible { v1, v2 } =
            split_once(fixtures::interval().coeffs(), &mut rng).unwrap()
        else {
            panic!("interval splits")
        };
        assert_eq!((v1.ncols(), v2.ncols()), (1, 1));
        assert!((v1[(0, 0)].norm() - 1.0).abs() < 1e-12 || (v1[(1, 0)].norm() - 1.0).abs() < 1e-12);

        let b = random_irreducible(2, 2, &mut rng);
        let bb = scramble(&[&b, &b], 9);
        let Split::Reducible { v1, v2 } = split_once(&bb, &mut rng).unwrap() else {
            panic!()
        };
        assert_eq!((v1.ncols(), v2.ncols()), (2, 2));
        for m in bb.mats() {
            assert!(frob(&(v1.adjoint() * m * &v2)) <= 1e-8);
        }
    }

    #[test]
    fn equivalence_examples() {
        let p = fixtures::pauli();
        let u = unitary_equivalent(p.coeffs(), p.coeffs()).unwrap().unwrap();
        assert!(equivalence_residual(&u, p.coeffs(), p.coeffs()) <= 1e-7);

        let swapped =
            HermTuple::new(vec![p.coeffs().get(1).clone(), p.coeffs().get(0).clone()]).unwrap();
        let u = unitary_equivalent(p.coeffs(), &swapped).unwrap().unwrap();
        assert!(equivalence_residual(&u, p.coeffs(), &swapped) <= 1e-7);
        let h = CMatrix::from_row_slice(
            2,
            2,
            &[1.0, 1.0, 1.0, -1.0].map(|x| c(x / 2f64.sqrt(), 0.0)),
        );
        assert!(equivalence_residual(&h, p.coeffs(), &swapped) <= 1e-12);

        // verdict decided by the brute-force intertwiner
        let flipped =
            HermTuple::new(vec![p.coeffs().get(0).clone(), -p.coeffs().get(1).clone()]).unwrap();
        let oracle = intertwiners(p.coeffs(), &flipped, 1e-9).len();
        assert_eq!(
            unitary_equivalent(p.coeffs(), &flipped).unwrap().is_some(),
            oracle > 0
        );

        assert!(unitary_equivalent(p.coeffs(), fixtures::cube().coeffs())
            .unwrap()
            .is_none());
    }

    #[test]
    fn decompose_examples() {
        let r = decompose(&fixtures::pauli()).unwrap();
        assert_eq!(
            (r.classes.len(), r.classes[0].multiplicity, r.zero_rank),
            (1, 1, 0)
        );

        let mut rng = rng_from_seed(11);
        let b = random_irreducible(2, 2, &mut rng);
        let cc = random_irreducible(2, 3, &mut rng);
        let l = MonicPencil::from_tuple(scramble(&[&b, &b, &cc], 12), "bbc").unwrap();
        let r = decompose(&l).unwrap();
        let shape: Vec<_> = r
            .classes
            .iter()
            .map(|c| (c.representative.level(), c.multiplicity))
            .collect();
        assert_eq!(shape, vec![(2, 2), (3, 1)]);
        assert_eq!(r.zero_rank, 0);
        assert!(r.residual <= 1e-7);
        assert!(unitary_equivalent(&r.classes[0].representative, &b)
            .unwrap()
            .is_some());
        assert!(unitary_equivalent(&r.classes[1].representative, &cc)
            .unwrap()
            .is_some());

        let z = decompose(&MonicPencil::new(vec![CMatrix::zeros(2, 2)], "zero").unwrap()).unwrap();
        assert_eq!((z.classes.len(), z.zero_rank), (0, 2));
    }

    #[test]
    fn report_invariants_hold() {
        let mut rng = rng_from_seed(13);
        let b = random_irreducible(3, 2, &mut rng);
        let z = HermTuple::zeros(3, 1);
        let t = scramble(&[&b, &z, &b], 14);
        let r = decompose_tuple(&t, 1, Exec::Sequential).unwrap();
        let total: usize = r
            .classes
            .iter()
            .map(|c| c.multiplicity * c.representative.level())
            .sum();
        assert_eq!(total + r.zero_rank, t.level());
        assert_eq!(r.zero_rank, 1);
        assert!(r.classes.iter().all(|c| is_irreducible(&c.representative)));
        let nf = r.normal_form();
        for (x, y) in t.mats().iter().zip(nf.mats()) {
            assert!(frob(&(&r.transform * y * r.transform.adjoint() - x)) <= 1e-7);
        }
    }

    #[test]
    fn report_json_round_trip() {
        let r = decompose(&fixtures::cube()).unwrap();
        let back = DecompositionReport::from_json_str(&r.to_json_string()).unwrap();
        assert_eq!(back.zero_rank, r.zero_rank);
        assert_eq!(back.classes.len(), r.classes.len());
        assert!(frob(&(back.transform - &r.transform)) == 0.0);
    }

    #[test]
    fn minimal_pencil_examples() {
        let p = fixtures::pauli();
        let m = minimal_pencil(&p).unwrap().unwrap();
        assert!(unitary_equivalent(m.coeffs(), p.coeffs())
            .unwrap()
            .is_some());

        let mut rng = rng_from_seed(15);
        let b = random_irreducible(2, 2, &mut rng);
        let cc = random_irreducible(2, 3, &mut rng);
        let l = MonicPencil::from_tuple(scramble(&[&b, &b, &cc], 16), "bbc").unwrap();
        let m = minimal_pencil(&l).unwrap().unwrap();
        assert_eq!(m.delta(), 5);
        let r = decompose(&m).unwrap();
        assert!(r.classes.iter().all(|c| c.multiplicity == 1) && r.zero_rank == 0);

        let rep = MonicPencil::diagonal(&[vec![1.0, 1.0, -2.0]], "aab").unwrap();
        let m = minimal_pencil(&rep).unwrap().unwrap();
        let mut d: Vec<f64> = (0..2).map(|i| m.coeffs().get(0)[(i, i)].re).collect();
        d.sort_by(f64::total_cmp);
        assert!((d[0] + 2.0).abs() < 1e-12 && (d[1] - 1.0).abs() < 1e-12);

        assert!(
            minimal_pencil(&MonicPencil::new(vec![CMatrix::zeros(3, 3)], "z").unwrap())
                .unwrap()
                .is_none()
        );
    }

    #[test]
    fn minimal_pencil_defines_same_spectrahedron() {
        let mut rng = rng_from_seed(17);
        for l in fixtures::all() {
            let m = minimal_pencil(&l).unwrap().unwrap();
            for _ in 0..200 {
                let x = HermTuple::random_gue(l.g(), 2, &mut rng).scaled(0.7);
                let a = l.min_eigenvalue(&x).unwrap();
                let b = m.min_eigenvalue(&x).unwrap();
                if a.abs() > 1e-6 {
                    assert_eq!(a > 0.0, b > 0.0, "{}", l.label);
                }
            }
        }
    }

    #[test]
    fn component_counts() {
        assert_eq!(count_components(&fixtures::pauli()).unwrap(), 1);
        assert_eq!(count_components(&fixtures::interval()).unwrap(), 2);
        let b = random_irreducible(2, 2, &mut rng_from_seed(19));
        let l = MonicPencil::from_tuple(scramble(&[&b, &b], 20), "bb").unwrap();
        assert_eq!(count_components(&l).unwrap(), 1);
    }

    #[test]
    fn scramble_round_trip_and_gleichstellensatz() {
        for trial in 0..10u64 {
            let mut rng = rng_from_seed(100 + trial);
            let g = 2 + (trial as usize % 2);
            let b1 = random_irreducible(g, 1 + (trial as usize % 3), &mut rng);
            let b2 = random_irreducible(g, 2, &mut rng);
            let x = scramble(&[&b1, &b2, &b1], 200 + trial);
            let y = scramble(&[&b2, &b1], 300 + trial);
            let mx = minimal_pencil(&MonicPencil::from_tuple(x, "x").unwrap())
                .unwrap()
                .unwrap();
            let my = minimal_pencil(&MonicPencil::from_tuple(y, "y").unwrap())
                .unwrap()
                .unwrap();
            let u = unitary_equivalent(mx.coeffs(), my.coeffs())
                .unwrap()
                .expect("same block data");
            assert!(equivalence_residual(&u, mx.coeffs(), my.coeffs()) <= 1e-7);
        }
    }

    #[test]
    fn sequential_and_parallel_decompositions_agree() {
        let mut rng = rng_from_seed(21);
        let b = random_irreducible(2, 2, &mut rng);
        let t = scramble(&[&b, &b, &b], 22);
        let s = decompose_tuple(&t, 3, Exec::Sequential).unwrap();
        let p = decompose_tuple(&t, 3, Exec::Parallel).unwrap();
        assert_eq!(s.transform, p.transform);
    }

    #[test]
    fn prune_flags_redundant_class() {
        // [-1/2, 1/2] inside [-1, 1]: the wide interval is redundant
        let l = MonicPencil::diagonal(&[vec![1.0, -1.0, 2.0, -2.0]], "nested").unwrap();
        let r = decompose(&l).unwrap();
        let flags = prune_heuristic(&r, 64, 1, Exec::default()).unwrap();
        let wide: Vec<_> = r
            .classes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.representative.get(0)[(0, 0)].re.abs() < 1.5)
            .map(|(i, _)| i)
            .collect();
        for f in &flags {
            assert_eq!(f.suspected_redundant, wide.contains(&f.class));
        }
    }
}
