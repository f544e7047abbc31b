use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{parse, parse_with_vars, Evaluator, Expr, ExprRef, Printer};
use crate::error::{Error, Result};
use crate::numkernel::{CMatrix, C64};

/// A rectangular grid of expressions over `g` hermitian variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprMatrix {
    g: usize,
    rows: usize,
    cols: usize,
    entries: Vec<ExprRef>,
    names: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ExprMatrixFile {
    g: usize,
    rows: usize,
    cols: usize,
    entries: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    vars: Vec<String>,
}

impl ExprMatrix {
    /// `entries` in row-major order.
    pub fn new(g: usize, rows: usize, cols: usize, entries: Vec<ExprRef>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} expression matrix",
                entries.len()
            )));
        }
        if let Some(v) = entries.iter().map(|e| e.max_var()).max().filter(|&v| v > g) {
            return Err(Error::InvalidInput(format!(
                "entry uses x{v} but the matrix declares g = {g}"
            )));
        }
        Ok(ExprMatrix {
            g,
            rows,
            cols,
            entries,
            names: vec![],
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Self {
        self.names = names;
        self
    }

    /// The matrix `sum_l coeffs[l][i,j] * x_l`, written with the fewest
    /// nodes: zero coefficients are skipped and `+-1` multiply implicitly.
    pub fn linear_form(coeffs: &[CMatrix]) -> Result<Self> {
        let g = coeffs.len();
        let (rows, cols) = coeffs.first().map(|m| m.shape()).unwrap_or((0, 0));
        if coeffs.iter().any(|m| m.shape() != (rows, cols)) {
            return Err(Error::DimensionMismatch("coefficient shapes differ".into()));
        }
        let one = C64::new(1.0, 0.0);
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let mut acc: Option<ExprRef> = None;
                for (l, m) in coeffs.iter().enumerate() {
                    let a = m[(i, j)];
                    if a == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let x = Expr::var(l + 1);
                    let (term, negative) = if a == one {
                        (x, false)
                    } else if a == -one {
                        (x, true)
                    } else {
                        (Expr::mul(&Expr::scalar(a), &x), false)
                    };
                    acc = Some(match (acc, negative) {
                        (None, false) => term,
                        (None, true) => Expr::neg(&term),
                        (Some(s), false) => Expr::add(&s, &term),
                        (Some(s), true) => Expr::sub(&s, &term),
                    });
                }
                entries.push(acc.unwrap_or_else(|| Expr::real(0.0)));
            }
        }
        ExprMatrix::new(g, rows, cols, entries)
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &ExprRef {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, e: ExprRef) {
        self.entries[i * self.cols + j] = e;
    }

    pub fn entries(&self) -> &[ExprRef] {
        &self.entries
    }

    /// Simultaneous row and column permutation: entry `(i, j)` of the
    /// result is entry `(perm[i], perm[j])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert!(self.is_square() && perm.len() == self.rows);
        let n = self.rows;
        let entries = (0..n * n)
            .map(|idx| self.get(perm[idx / n], perm[idx % n]).clone())
            .collect();
        ExprMatrix {
            entries,
            ..self.clone()
        }
    }

    /// `entry[i,j]` equals `adj(entry[j,i])` after adjoint normalization.
    pub fn is_structurally_hermitian(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        (0..self.rows).all(|i| {
            (0..=i).all(|j| {
                Expr::normalized(self.get(i, j)) == Expr::normalized(&Expr::adj(self.get(j, i)))
            })
        })
    }

    /// Block matrix of size `rows*k x cols*k`.
    pub fn eval_with(&self, ev: &mut Evaluator<'_>) -> Result<CMatrix> {
        let k = ev.level();
        let mut out = CMatrix::zeros(self.rows * k, self.cols * k);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = ev.eval(self.get(i, j))?;
                out.view_mut((i * k, j * k), (k, k)).copy_from(&v);
            }
        }
        Ok(out)
    }

    pub fn eval(&self, point: &[CMatrix]) -> Result<CMatrix> {
        self.eval_with(&mut Evaluator::new(point)?)
    }

    pub fn entry_strings(&self) -> Vec<Vec<String>> {
        let printer = Printer::with_names(&self.names);
        (0..self.rows)
            .map(|i| {
                (0..self.cols)
                    .map(|j| printer.print(self.get(i, j)))
                    .collect()
            })
            .collect()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ExprMatrixFile = serde_json::from_str(text)?;
        if file.entries.len() != file.rows || file.entries.iter().any(|r| r.len() != file.cols) {
            return Err(Error::InvalidInput(format!(
                "entries grid does not match rows = {}, cols = {}",
                file.rows, file.cols
            )));
        }
        let mut entries = Vec::with_capacity(file.rows * file.cols);
        for row in &file.entries {
            for s in row {
                entries.push(if file.vars.is_empty() {
                    parse(s, file.g)?
                } else {
                    parse_with_vars(s, file.g, &file.vars)?
                });
            }
        }
        Ok(ExprMatrix::new(file.g, file.rows, file.cols, entries)?.with_names(file.vars))
    }

    pub fn to_json_string(&self) -> String {
        let file = ExprMatrixFile {
            g: self.g,
            rows: self.rows,
            cols: self.cols,
            entries: self.entry_strings(),
            vars: self.names.clone(),
        };
        serde_json::to_string_pretty(&file).expect("expression matrix serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }
}
