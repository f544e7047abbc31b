//! Degrees of `k -> det L(X)` on `k x k` matrix tuples.
//!
//! The degree at level `k` is the maximal rank of the truly linear part
//! `sum_i A_i (x) B_i`, estimated by sampling. Independently, a symbolic
//! `Q A Q^T = W D W*` elimination of the linear part over rational
//! expressions predicts the rank at every level from which diagonal blocks
//! of `D` vanish there.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ncexpr::{
    is_zero_fn, random_common_domain_point, Evaluator, Expr, ExprMatrix, ExprRef,
    DEFAULT_DOMAIN_TRIALS, DEFAULT_ZERO_TOL, DEFAULT_ZERO_TRIALS,
};
use crate::numkernel::{
    block_diag, c, fork_seed, frob, hermitian_violation, random_tuple, rank_from_singular_values,
    rng_from_seed, singular_values, CMatrix, TupleKind, DEFAULT_RTOL,
};
use crate::par::{self, Exec};
use crate::pencil::{HermTuple, MonicPencil};

pub const DEFAULT_TRIALS: usize = 20;
pub const WDW_MAX_SIZE: usize = 32;
const GAP_RATIO: f64 = 1e3;
const GAP_RESAMPLES: usize = 4;
const RECONSTRUCTION_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    #[default]
    Generic,
    Hermitian,
}

/// `L = I - H` for the 7x7 tridiagonal `H` over `(a, x, y, z)` whose
/// determinant degree jumps from 6 at level 1 to 14 at level 2.
pub fn counterexample_pencil() -> MonicPencil {
    let mut mats = vec![CMatrix::zeros(7, 7); 4];
    mats[0][(0, 0)] = c(1.0, 0.0);
    mats[0][(6, 6)] = c(-1.0, 0.0);
    // off-diagonal pattern z, x, y, z, x, y along the first superdiagonal
    for (pos, var) in [3usize, 1, 2, 3, 1, 2].into_iter().enumerate() {
        mats[var][(pos, pos + 1)] = c(1.0, 0.0);
        mats[var][(pos + 1, pos)] = c(1.0, 0.0);
    }
    MonicPencil::new(mats, "counterexample").expect("fixed coefficients")
}

/// The truly linear part `sum_i A_i x_i` as an expression matrix.
pub fn linear_part_exprs(l: &MonicPencil) -> ExprMatrix {
    let m = ExprMatrix::linear_form(l.coeffs().mats()).expect("coefficients share a shape");
    if l.label == "counterexample" {
        m.with_names(["a", "x", "y", "z"].map(String::from).to_vec())
    } else {
        m
    }
}

fn sample_rank(l: &MonicPencil, k: usize, rtol: f64, sampling: Sampling, seed: u64) -> usize {
    let kind = match sampling {
        Sampling::Generic => TupleKind::Ginibre,
        Sampling::Hermitian => TupleKind::Gue,
    };
    let mut rng = rng_from_seed(seed);
    let mut rank = 0;
    for _ in 0..GAP_RESAMPLES {
        let b = random_tuple(l.g(), k, kind, &mut rng);
        let s = singular_values(&l.linear_part(&b).expect("level-k tuple"));
        rank = rank_from_singular_values(&s, rtol);
        let clean_cut = rank == 0 || rank == s.len() || s[rank - 1] >= GAP_RATIO * s[rank];
        if clean_cut {
            break;
        }
    }
    rank
}

/// Maximal numerical rank of `sum_i A_i (x) B_i` over `trials` random
/// tuples at level `k`. Trial `t` draws from its own forked stream, so the
/// result is nondecreasing in `trials` for a fixed seed.
pub fn degree_at_level(
    l: &MonicPencil,
    k: usize,
    trials: usize,
    rtol: f64,
    sampling: Sampling,
    seed: u64,
) -> usize {
    degree_at_level_with(l, k, trials, rtol, sampling, seed, Exec::default())
}

pub fn degree_at_level_with(
    l: &MonicPencil,
    k: usize,
    trials: usize,
    rtol: f64,
    sampling: Sampling,
    seed: u64,
    exec: Exec,
) -> usize {
    par::map_range(exec, trials.max(1), |t| {
        sample_rank(l, k.max(1), rtol, sampling, fork_seed(seed, t as u64))
    })
    .into_iter()
    .max()
    .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeTable {
    pub degs: BTreeMap<usize, usize>,
    pub slope: Option<usize>,
    pub threshold: Option<usize>,
    pub trials_used: usize,
    pub unstable: bool,
    pub sandwich_ok: bool,
}

impl DegreeTable {
    pub fn from_degrees(degs: BTreeMap<usize, usize>, trials_used: usize) -> Self {
        let kmax = degs.keys().copied().max().unwrap_or(0);
        let get = |k: usize| degs.get(&k).copied().unwrap_or(0);
        let slope = (kmax >= 2 && get(kmax) % kmax == 0)
            .then(|| get(kmax) / kmax)
            .filter(|&b| get(kmax - 1) == b * (kmax - 1));
        let threshold = slope.map(|b| {
            let mut n = kmax;
            while n > 1 && get(n - 1) == b * (n - 1) {
                n -= 1;
            }
            n
        });
        let d1 = get(1);
        let sandwich_ok = degs
            .iter()
            .all(|(&k, &d)| d1 * k <= d && slope.is_none_or(|b| d <= b * k));
        DegreeTable {
            unstable: slope.is_none(),
            degs,
            slope,
            threshold,
            trials_used,
            sandwich_ok,
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn text(&self) -> String {
        let degs: Vec<String> = self
            .degs
            .iter()
            .map(|(k, d)| format!("deg_{k}={d}"))
            .collect();
        let tail = match (self.slope, self.threshold) {
            (Some(b), Some(n)) => format!("b={b} N={n}"),
            _ => "slope unstable (b, N unset)".to_string(),
        };
        format!("{}\n{tail}", degs.join(" "))
    }
}

/// Degrees at levels `1..=kmax`, the eventual slope `b` and the threshold
/// `N` from which `deg_k = b k`. When the two top levels disagree on `b`
/// the table is returned flagged unstable.
pub fn eventual_slope(
    l: &MonicPencil,
    kmax: usize,
    trials: usize,
    sampling: Sampling,
    seed: u64,
) -> Result<DegreeTable> {
    eventual_slope_with(
        l,
        kmax,
        trials,
        DEFAULT_RTOL,
        sampling,
        seed,
        Exec::default(),
    )
}

pub fn eventual_slope_with(
    l: &MonicPencil,
    kmax: usize,
    trials: usize,
    rtol: f64,
    sampling: Sampling,
    seed: u64,
    exec: Exec,
) -> Result<DegreeTable> {
    if kmax < 2 {
        return Err(Error::InvalidInput(
            "the slope needs at least two levels".into(),
        ));
    }
    let degs = par::map_range(exec, kmax, |i| {
        let k = i + 1;
        (
            k,
            degree_at_level_with(
                l,
                k,
                trials,
                rtol,
                sampling,
                fork_seed(seed, k as u64),
                exec,
            ),
        )
    });
    Ok(DegreeTable::from_degrees(
        degs.into_iter().collect(),
        trials,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiplicativityReport {
    pub samples: usize,
    pub passed: usize,
    pub max_violation: f64,
}

impl MultiplicativityReport {
    pub fn all_pass(&self) -> bool {
        self.passed == self.samples
    }
}

/// Checks `det L(X (+) Z) = det L(X) det L(Z)` on random hermitian pairs,
/// with violation measured as `|lhs - rhs| / (1 + |rhs|)`.
pub fn verify_multiplicativity(
    l: &MonicPencil,
    k1: usize,
    k2: usize,
    samples: usize,
    tol: f64,
    seed: u64,
) -> Result<MultiplicativityReport> {
    let results = par::map_range(Exec::default(), samples, |s| -> Result<f64> {
        let mut rng = rng_from_seed(fork_seed(seed, s as u64));
        let x = HermTuple::random_gue(l.g(), k1, &mut rng);
        let z = HermTuple::random_gue(l.g(), k2, &mut rng);
        let prod = l.det_level(&x)? * l.det_level(&z)?;
        let joint = l.det_level(&x.direct_sum(&z)?)?;
        Ok((joint - prod).abs() / (1.0 + prod.abs()))
    });
    let violations = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(MultiplicativityReport {
        samples,
        passed: violations.iter().filter(|&&v| v <= tol).count(),
        max_violation: violations.iter().copied().fold(0.0, f64::max),
    })
}

/// Diagonal block of `D`.
#[derive(Debug, Clone, PartialEq)]
pub enum DBlock {
    Scalar1(ExprRef),
    /// `[[0, adj(p)], [p, 0]]`.
    Antidiag2(ExprRef),
}

impl DBlock {
    pub fn size(&self) -> usize {
        match self {
            DBlock::Scalar1(_) => 1,
            DBlock::Antidiag2(_) => 2,
        }
    }

    pub fn expr(&self) -> &ExprRef {
        match self {
            DBlock::Scalar1(e) | DBlock::Antidiag2(e) => e,
        }
    }

    fn eval_with(&self, ev: &mut Evaluator<'_>) -> Result<CMatrix> {
        let v = ev.eval(self.expr())?;
        Ok(match self {
            DBlock::Scalar1(_) => v,
            DBlock::Antidiag2(_) => {
                let k = v.nrows();
                let mut m = CMatrix::zeros(2 * k, 2 * k);
                m.view_mut((0, k), (k, k)).copy_from(&v.adjoint());
                m.view_mut((k, 0), (k, k)).copy_from(&v);
                m
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZeroFlag {
    Zero,
    Nonzero,
    /// No domain point could be sampled at this level.
    Undefined,
}

#[derive(Debug, Clone)]
pub struct WdwResult {
    /// Row `i` of `Q A Q^T` is row `perm[i]` of `A`.
    pub perm: Vec<usize>,
    pub w: ExprMatrix,
    pub d: Vec<DBlock>,
    pub levels: Vec<usize>,
    /// `zero_flags[b][l]`: block `b` at `levels[l]`.
    pub zero_flags: Vec<Vec<ZeroFlag>>,
    /// Largest relative reconstruction residual per probed level; `None`
    /// when no common domain point of `W` and `D` was found there.
    pub residuals: Vec<Option<f64>>,
    source: ExprMatrix,
    seed: u64,
}

struct Elimination<'a> {
    m: Vec<Vec<ExprRef>>,
    w: Vec<Vec<ExprRef>>,
    perm: Vec<usize>,
    blocks: Vec<DBlock>,
    g: usize,
    kmax: usize,
    rng: &'a mut rand_chacha::ChaCha8Rng,
}

impl Elimination<'_> {
    fn nonzero(&mut self, i: usize, j: usize) -> Result<bool> {
        let e = self.m[i][j].clone();
        if e.is_literal_zero() {
            return Ok(false);
        }
        Ok(!is_zero_fn(
            &e,
            self.g,
            self.kmax,
            DEFAULT_ZERO_TRIALS,
            DEFAULT_ZERO_TOL,
            self.rng,
        )?)
    }

    /// Swaps positions `i, j >= p` in the trailing matrix and the already
    /// computed rows of `W`.
    fn swap(&mut self, i: usize, j: usize, p: usize) {
        if i == j {
            return;
        }
        self.m.swap(i, j);
        for row in &mut self.m {
            row.swap(i, j);
        }
        for col in 0..p {
            let t = self.w[i][col].clone();
            self.w[i][col] = self.w[j][col].clone();
            self.w[j][col] = t;
        }
        self.perm.swap(i, j);
    }

    fn scalar_step(&mut self, p: usize) {
        let n = self.m.len();
        let a = self.m[p][p].clone();
        let ainv = Expr::inv(&a);
        for i in p + 1..n {
            let e = self.m[i][p].clone();
            if e.is_literal_zero() {
                continue;
            }
            let ea = Expr::mul(&e, &ainv);
            self.w[i][p] = ea.clone();
            for j in p + 1..n {
                let r = self.m[p][j].clone();
                if !r.is_literal_zero() {
                    self.m[i][j] = minus(&self.m[i][j], &Expr::mul(&ea, &r));
                }
            }
        }
        self.blocks.push(DBlock::Scalar1(a));
    }

    fn antidiag_step(&mut self, p: usize) {
        let n = self.m.len();
        let b = self.m[p + 1][p].clone();
        let binv = Expr::inv(&b);
        let bsinv = Expr::inv(&self.m[p][p + 1]);
        for i in p + 2..n {
            let (e, f) = (self.m[i][p].clone(), self.m[i][p + 1].clone());
            let fb = (!f.is_literal_zero()).then(|| Expr::mul(&f, &bsinv));
            let eb = (!e.is_literal_zero()).then(|| Expr::mul(&e, &binv));
            if let Some(x) = &fb {
                self.w[i][p] = x.clone();
            }
            if let Some(x) = &eb {
                self.w[i][p + 1] = x.clone();
            }
            for j in p + 2..n {
                let (es, fs) = (self.m[p][j].clone(), self.m[p + 1][j].clone());
                if let (Some(x), false) = (&fb, es.is_literal_zero()) {
                    self.m[i][j] = minus(&self.m[i][j], &Expr::mul(x, &es));
                }
                if let (Some(x), false) = (&eb, fs.is_literal_zero()) {
                    self.m[i][j] = minus(&self.m[i][j], &Expr::mul(x, &fs));
                }
            }
        }
        self.blocks.push(DBlock::Antidiag2(b));
    }
}

fn minus(a: &ExprRef, b: &ExprRef) -> ExprRef {
    if a.is_literal_zero() {
        Expr::neg(b)
    } else {
        Expr::sub(a, b)
    }
}

fn check_hermitian(m: &ExprMatrix, seed: u64) -> Result<()> {
    if m.is_structurally_hermitian() {
        return Ok(());
    }
    let mut rng = rng_from_seed(seed);
    let point =
        random_common_domain_point(m.entries(), m.g(), 2, true, DEFAULT_DOMAIN_TRIALS, &mut rng)?;
    let v = m.eval(&point)?;
    let violation = hermitian_violation(&v);
    if violation > 1e-8 * (1.0 + frob(&v)) {
        return Err(Error::HermitianViolation {
            context: "wdw input".into(),
            violation,
        });
    }
    Ok(())
}

/// Symmetric elimination `Q M Q^T = W D W*` of a hermitian expression
/// matrix. Pivots are tested for being the zero function at the largest
/// probe level; per-level zero flags for the `D` blocks are recorded after.
pub fn wdw(m: &ExprMatrix, probe_levels: &[usize], seed: u64) -> Result<WdwResult> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    if n > WDW_MAX_SIZE {
        return Err(Error::TooLarge(n, WDW_MAX_SIZE));
    }
    let mut levels: Vec<usize> = probe_levels.iter().copied().filter(|&k| k > 0).collect();
    levels.sort_unstable();
    levels.dedup();
    let kmax = *levels
        .last()
        .ok_or_else(|| Error::InvalidInput("no probe levels".into()))?;
    check_hermitian(m, fork_seed(seed, 0))?;

    let mut rng = rng_from_seed(fork_seed(seed, 1));
    let zero = Expr::real(0.0);
    let mut el = Elimination {
        m: (0..n)
            .map(|i| (0..n).map(|j| m.get(i, j).clone()).collect())
            .collect(),
        w: (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            Expr::real(1.0)
                        } else {
                            zero.clone()
                        }
                    })
                    .collect()
            })
            .collect(),
        perm: (0..n).collect(),
        blocks: vec![],
        g: m.g(),
        kmax,
        rng: &mut rng,
    };
    let mut p = 0;
    while p < n {
        if el.nonzero(p, p)? {
            el.scalar_step(p);
            p += 1;
            continue;
        }
        if p + 1 < n && el.nonzero(p + 1, p + 1)? {
            el.swap(p, p + 1, p);
            el.scalar_step(p);
            p += 1;
            continue;
        }
        let mut q = None;
        for i in p + 1..n {
            if el.nonzero(i, p)? {
                q = Some(i);
                break;
            }
        }
        match q {
            None => {
                el.blocks.push(DBlock::Scalar1(el.m[p][p].clone()));
                p += 1;
            }
            Some(q) if el.nonzero(q, q)? => {
                el.swap(p, q, p);
                el.scalar_step(p);
                p += 1;
            }
            Some(q) => {
                el.swap(p + 1, q, p);
                el.antidiag_step(p);
                p += 2;
            }
        }
    }
    let perm = el.perm.clone();
    let blocks = el.blocks;
    let w = ExprMatrix::new(m.g(), n, n, el.w.into_iter().flatten().collect())?
        .with_names(m.names().to_vec());

    let mut res = WdwResult {
        perm,
        w,
        d: blocks,
        levels: levels.clone(),
        zero_flags: vec![],
        residuals: vec![],
        source: m.clone(),
        seed,
    };
    let flags: Vec<Vec<ZeroFlag>> = levels
        .iter()
        .map(|&k| res.flags_at(k))
        .collect::<Result<_>>()?;
    res.zero_flags = (0..res.d.len())
        .map(|b| flags.iter().map(|f| f[b]).collect())
        .collect();
    res.residuals = levels
        .iter()
        .map(|&k| res.reconstruction_residual(k, RECONSTRUCTION_POINTS))
        .collect::<Result<_>>()?;
    Ok(res)
}

impl WdwResult {
    fn flags_at(&self, k: usize) -> Result<Vec<ZeroFlag>> {
        let mut rng = rng_from_seed(fork_seed(self.seed, 100 + k as u64));
        self.d
            .iter()
            .map(|blk| {
                let e = blk.expr();
                if e.is_literal_zero() {
                    return Ok(ZeroFlag::Zero);
                }
                match is_zero_fn(
                    e,
                    self.w.g(),
                    k,
                    DEFAULT_ZERO_TRIALS,
                    DEFAULT_ZERO_TOL,
                    &mut rng,
                ) {
                    Ok(true) => Ok(ZeroFlag::Zero),
                    Ok(false) => Ok(ZeroFlag::Nonzero),
                    Err(Error::EmptyDomainSuspected { .. }) => Ok(ZeroFlag::Undefined),
                    Err(e) => Err(e),
                }
            })
            .collect()
    }

    /// Zero flags of every block at level `k`, probing afresh when `k` was
    /// not among the recorded levels.
    pub fn zero_flags_at(&self, k: usize) -> Result<Vec<ZeroFlag>> {
        match self.levels.iter().position(|&l| l == k) {
            Some(idx) => Ok(self.zero_flags.iter().map(|f| f[idx]).collect()),
            None => self.flags_at(k),
        }
    }

    /// Max over sampled hermitian domain points of
    /// `||QMQ^T - WDW*|| / (||QMQ^T|| + ||W||^2 ||D||)`.
    pub fn reconstruction_residual(&self, k: usize, points: usize) -> Result<Option<f64>> {
        let mut exprs: Vec<ExprRef> = self.w.entries().to_vec();
        exprs.extend(self.d.iter().map(|b| b.expr().clone()));
        exprs.extend(self.source.entries().iter().cloned());
        let permuted = self.source.permuted(&self.perm);
        let mut rng = rng_from_seed(fork_seed(self.seed, 200 + k as u64));
        let mut worst: f64 = 0.0;
        for _ in 0..points {
            let point = match random_common_domain_point(
                &exprs,
                self.w.g(),
                k,
                true,
                DEFAULT_DOMAIN_TRIALS,
                &mut rng,
            ) {
                Ok(p) => p,
                Err(Error::EmptyDomainSuspected { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let mut ev = Evaluator::new(&point)?;
            let a = permuted.eval_with(&mut ev)?;
            let w = self.w.eval_with(&mut ev)?;
            let blocks = self
                .d
                .iter()
                .map(|b| b.eval_with(&mut ev))
                .collect::<Result<Vec<_>>>()?;
            let d = block_diag(&blocks.iter().collect::<Vec<_>>());
            let scale = frob(&a) + frob(&w).powi(2) * frob(&d);
            let r = frob(&(&a - &w * &d * w.adjoint()));
            worst = worst.max(if scale > 0.0 { r / scale } else { r });
        }
        Ok(Some(worst))
    }

    pub fn source(&self) -> &ExprMatrix {
        &self.source
    }

    /// Printable form: permutation, nonzero `W` entries and `D` blocks.
    pub fn text(&self) -> String {
        let strings = self.w.entry_strings();
        let printer = crate::ncexpr::Printer::with_names(self.w.names());
        let mut out = format!(
            "Q = {:?}\n",
            self.perm.iter().map(|i| i + 1).collect::<Vec<_>>()
        );
        for (i, row) in strings.iter().enumerate() {
            for (j, s) in row.iter().enumerate().take(i) {
                if s != "0" {
                    out.push_str(&format!("W[{},{}] = {s}\n", i + 1, j + 1));
                }
            }
        }
        for (b, blk) in self.d.iter().enumerate() {
            let body = printer.print(blk.expr());
            let shape = match blk {
                DBlock::Scalar1(_) => format!("d{} = {body}", b + 1),
                DBlock::Antidiag2(_) => format!("d{} = antidiag(p), p = {body}", b + 1),
            };
            let flags: Vec<String> = self
                .levels
                .iter()
                .zip(&self.zero_flags[b])
                .map(|(k, f)| format!("k={k}:{f:?}"))
                .collect();
            out.push_str(&format!("{shape}  [{}]\n", flags.join(" ")));
        }
        for (k, r) in self.levels.iter().zip(&self.residuals) {
            match r {
                Some(r) => out.push_str(&format!("reconstruction residual at k={k}: {r:.2e}\n")),
                None => out.push_str(&format!("reconstruction at k={k}: no domain point\n")),
            }
        }
        out
    }
}

/// Rank of `D` at level `k` counted from its nonzero blocks: `h k` with
/// `h = #nonzero 1x1 blocks + 2 #nonzero 2x2 blocks`.
pub fn wdw_rank_per_level(res: &WdwResult, k: usize) -> Result<usize> {
    let flags = res.zero_flags_at(k)?;
    let h: usize = res
        .d
        .iter()
        .zip(&flags)
        .filter(|(_, f)| **f == ZeroFlag::Nonzero)
        .map(|(b, _)| b.size())
        .sum();
    Ok(h * k)
}

/// Random hermitian point at level `k` in the common domain of `exprs`;
/// exposed for tests that compare expressions numerically.
pub fn hermitian_probe(exprs: &[ExprRef], g: usize, k: usize, seed: u64) -> Result<Vec<CMatrix>> {
    random_common_domain_point(
        exprs,
        g,
        k,
        true,
        DEFAULT_DOMAIN_TRIALS,
        &mut rng_from_seed(seed),
    )
}
