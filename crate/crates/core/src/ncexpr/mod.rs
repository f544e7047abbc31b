//! Noncommutative rational expressions.
//!
//! An [`Expr`] is an expression, not a rational function: `x1 + x2` and
//! `x2 + x1` are different trees. Nodes are reference counted so that
//! elimination steps can share subexpressions; evaluation memoizes on node
//! identity, so a DAG is evaluated once per node.
//!
//! Variables are hermitian: the adjoint of `xi` is `xi` itself. The same
//! tree evaluates at every level `k`.

mod matrix;
mod parser;
mod printer;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numkernel::{guarded_inverse, random_tuple, CMatrix, TupleKind, C64, DEFAULT_RTOL};

pub use matrix::ExprMatrix;
pub use parser::{parse, parse_with_vars, split_header};
pub use printer::Printer;

pub type ExprRef = Arc<Expr>;

/// Inverses are refused when `sigma_min / sigma_max` falls below this.
pub const INVERSE_RTOL: f64 = DEFAULT_RTOL;
pub const DEFAULT_DOMAIN_TRIALS: usize = 32;
pub const DEFAULT_ZERO_TRIALS: usize = 8;
pub const DEFAULT_ZERO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Scalar(C64),
    /// 1-based variable index.
    Var(usize),
    Neg(ExprRef),
    Add(ExprRef, ExprRef),
    Mul(ExprRef, ExprRef),
    Inv(ExprRef),
    Adjoint(ExprRef),
}

impl Expr {
    pub fn scalar(z: C64) -> ExprRef {
        Arc::new(Expr::Scalar(z))
    }

    pub fn real(x: f64) -> ExprRef {
        Expr::scalar(C64::new(x, 0.0))
    }

    pub fn var(i: usize) -> ExprRef {
        assert!(i >= 1, "variables are 1-based");
        Arc::new(Expr::Var(i))
    }

    pub fn neg(e: &ExprRef) -> ExprRef {
        Arc::new(Expr::Neg(e.clone()))
    }

    pub fn add(a: &ExprRef, b: &ExprRef) -> ExprRef {
        Arc::new(Expr::Add(a.clone(), b.clone()))
    }

    /// `a + (-b)`, printed as `a - b`.
    pub fn sub(a: &ExprRef, b: &ExprRef) -> ExprRef {
        Expr::add(a, &Expr::neg(b))
    }

    pub fn mul(a: &ExprRef, b: &ExprRef) -> ExprRef {
        Arc::new(Expr::Mul(a.clone(), b.clone()))
    }

    pub fn inv(e: &ExprRef) -> ExprRef {
        Arc::new(Expr::Inv(e.clone()))
    }

    pub fn adj(e: &ExprRef) -> ExprRef {
        Arc::new(Expr::Adjoint(e.clone()))
    }

    pub fn is_literal_zero(&self) -> bool {
        matches!(self, Expr::Scalar(z) if *z == C64::new(0.0, 0.0))
    }

    /// Largest variable index occurring, 0 for constants.
    pub fn max_var(&self) -> usize {
        let mut memo = HashMap::new();
        max_var_memo(self, &mut memo)
    }

    /// Number of distinct nodes (shared nodes counted once).
    pub fn dag_size(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        count_nodes(self, &mut seen);
        seen.len()
    }

    /// Pushes adjoints down to the leaves using hermitian variables,
    /// `adj(a*b) = adj(b)*adj(a)`, `adj(inv(a)) = inv(adj(a))` and conjugated
    /// scalars. Scalars in products are moved to the left.
    pub fn normalized(e: &ExprRef) -> ExprRef {
        normalize(e, false)
    }
}

fn max_var_memo(e: &Expr, memo: &mut HashMap<usize, usize>) -> usize {
    let key = e as *const Expr as usize;
    if let Some(&m) = memo.get(&key) {
        return m;
    }
    let m = match e {
        Expr::Scalar(_) => 0,
        Expr::Var(i) => *i,
        Expr::Neg(a) | Expr::Inv(a) | Expr::Adjoint(a) => max_var_memo(a, memo),
        Expr::Add(a, b) | Expr::Mul(a, b) => max_var_memo(a, memo).max(max_var_memo(b, memo)),
    };
    memo.insert(key, m);
    m
}

fn count_nodes(e: &Expr, seen: &mut std::collections::HashSet<usize>) {
    if !seen.insert(e as *const Expr as usize) {
        return;
    }
    match e {
        Expr::Scalar(_) | Expr::Var(_) => {}
        Expr::Neg(a) | Expr::Inv(a) | Expr::Adjoint(a) => count_nodes(a, seen),
        Expr::Add(a, b) | Expr::Mul(a, b) => {
            count_nodes(a, seen);
            count_nodes(b, seen);
        }
    }
}

fn normalize(e: &ExprRef, adjoint: bool) -> ExprRef {
    match e.as_ref() {
        Expr::Scalar(z) => Expr::scalar(if adjoint { z.conj() } else { *z }),
        Expr::Var(_) => e.clone(),
        Expr::Neg(a) => Expr::neg(&normalize(a, adjoint)),
        Expr::Add(a, b) => Expr::add(&normalize(a, adjoint), &normalize(b, adjoint)),
        Expr::Mul(a, b) => {
            let (l, r) = if adjoint {
                (normalize(b, true), normalize(a, true))
            } else {
                (normalize(a, false), normalize(b, false))
            };
            match (l.as_ref(), r.as_ref()) {
                (_, Expr::Scalar(_)) if !matches!(l.as_ref(), Expr::Scalar(_)) => Expr::mul(&r, &l),
                _ => Expr::mul(&l, &r),
            }
        }
        Expr::Inv(a) => Expr::inv(&normalize(a, adjoint)),
        Expr::Adjoint(a) => normalize(a, !adjoint),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&Printer::default().print(self))
    }
}

fn describe(e: &Expr) -> String {
    const MAX: usize = 160;
    let s = e.to_string();
    if s.len() > MAX {
        let cut = (0..=MAX)
            .rev()
            .find(|&i| s.is_char_boundary(i))
            .unwrap_or(0);
        format!("{}...", &s[..cut])
    } else {
        s
    }
}

/// Evaluates expressions at one fixed point, caching every node it visits.
/// Reusing one evaluator across the entries of a matrix evaluates shared
/// subexpressions once.
pub struct Evaluator<'a> {
    point: &'a [CMatrix],
    k: usize,
    memo: HashMap<usize, (ExprRef, CMatrix)>,
}

impl<'a> Evaluator<'a> {
    pub fn new(point: &'a [CMatrix]) -> Result<Self> {
        let k = point.first().map(|m| m.nrows()).unwrap_or(1);
        for (i, m) in point.iter().enumerate() {
            if m.nrows() != k || m.ncols() != k {
                return Err(Error::DimensionMismatch(format!(
                    "point matrix {} is {}x{}, expected {k}x{k}",
                    i + 1,
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(Evaluator {
            point,
            k,
            memo: HashMap::new(),
        })
    }

    pub fn level(&self) -> usize {
        self.k
    }

    pub fn eval(&mut self, e: &ExprRef) -> Result<CMatrix> {
        let key = Arc::as_ptr(e) as usize;
        if let Some((_, v)) = self.memo.get(&key) {
            return Ok(v.clone());
        }
        let k = self.k;
        let value = match e.as_ref() {
            Expr::Scalar(z) => CMatrix::identity(k, k) * *z,
            Expr::Var(i) => self.point.get(i - 1).cloned().ok_or_else(|| {
                Error::DimensionMismatch(format!(
                    "variable x{i} needs a point with at least {i} matrices, got {}",
                    self.point.len()
                ))
            })?,
            Expr::Neg(a) => -self.eval(a)?,
            Expr::Add(a, b) => self.eval(a)? + self.eval(b)?,
            Expr::Mul(a, b) => self.eval(a)? * self.eval(b)?,
            Expr::Adjoint(a) => self.eval(a)?.adjoint(),
            Expr::Inv(a) => {
                let m = self.eval(a)?;
                guarded_inverse(&m, INVERSE_RTOL).map_err(|condition| Error::Domain {
                    subexpression: describe(a),
                    condition,
                })?
            }
        };
        self.memo.insert(key, (e.clone(), value.clone()));
        Ok(value)
    }
}

/// Evaluates `e` at a tuple of equally sized square matrices.
pub fn eval(e: &ExprRef, point: &[CMatrix]) -> Result<CMatrix> {
    Evaluator::new(point)?.eval(e)
}

/// Draws random tuples (GUE if `hermitian`, else Ginibre) until every
/// expression in `exprs` evaluates.
pub fn random_common_domain_point<R: Rng + ?Sized>(
    exprs: &[ExprRef],
    g: usize,
    k: usize,
    hermitian: bool,
    max_trials: usize,
    rng: &mut R,
) -> Result<Vec<CMatrix>> {
    let kind = if hermitian {
        TupleKind::Gue
    } else {
        TupleKind::Ginibre
    };
    let g = g
        .max(exprs.iter().map(|e| e.max_var()).max().unwrap_or(0))
        .max(1);
    let mut last_failure = String::new();
    for _ in 0..max_trials.max(1) {
        let point = random_tuple(g, k, kind, rng);
        let mut ev = Evaluator::new(&point)?;
        let mut ok = true;
        for e in exprs {
            match ev.eval(e) {
                Ok(_) => {}
                Err(Error::Domain { subexpression, .. }) => {
                    last_failure = subexpression;
                    ok = false;
                    break;
                }
                Err(other) => return Err(other),
            }
        }
        if ok {
            return Ok(point);
        }
    }
    Err(Error::EmptyDomainSuspected {
        subexpression: last_failure,
        trials: max_trials.max(1),
    })
}

pub fn random_domain_point<R: Rng + ?Sized>(
    e: &ExprRef,
    g: usize,
    k: usize,
    hermitian: bool,
    max_trials: usize,
    rng: &mut R,
) -> Result<Vec<CMatrix>> {
    random_common_domain_point(std::slice::from_ref(e), g, k, hermitian, max_trials, rng)
}

/// Probabilistic zero test at level `k`: true iff `||e(p)||_F <= tol * k`
/// at every sampled hermitian domain point. A `false` answer is certain; a
/// `true` answer holds with high probability.
pub fn is_zero_fn<R: Rng + ?Sized>(
    e: &ExprRef,
    g: usize,
    k: usize,
    trials: usize,
    tol: f64,
    rng: &mut R,
) -> Result<bool> {
    for _ in 0..trials.max(1) {
        let point = random_domain_point(e, g, k, true, DEFAULT_DOMAIN_TRIALS, rng)?;
        let value = eval(e, &point)?;
        if crate::numkernel::frob(&value) > tol * k as f64 {
            return Ok(false);
        }
    }
    Ok(true)
}
