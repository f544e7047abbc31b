//! Reproducible self-test: ten numbered checks, each run from a forked
//! stream of one seed.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::detdeg::{
    counterexample_pencil, degree_at_level_with, eventual_slope_with, linear_part_exprs,
    verify_multiplicativity, wdw, wdw_rank_per_level, Sampling, ZeroFlag,
};
use crate::error::Result;
use crate::geometry::{
    absolute_extreme_test, caratheodory_bound, caratheodory_reduce, compress_witness,
    conjugate_jointly, minimal_boundary_projection, sample_boundary, sample_outside, separate,
    AbsoluteVerdict, MatrixCombination,
};
use crate::numkernel::{c, fork_seed, random_unitary, rng_from_seed, CMatrix, DEFAULT_RTOL};
use crate::par::{self, Exec};
use crate::pencil::{fixtures, HermTuple, MonicPencil, Verdict};
use crate::structure::{
    decompose_tuple, equivalence_residual, minimal_from_report, random_irreducible,
    unitary_equivalent_with, EQUIV_TOL,
};

pub const CRITERIA: usize = 10;
const GEGEN_BUDGET_SECS: f64 = 2.0;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!(
            "[{tag}] {:>2} {}: {} ({:.2} s)",
            self.id, self.name, self.detail, self.seconds
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub results: Vec<CriterionResult>,
}

impl SelftestReport {
    pub fn all_pass(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn text(&self) -> String {
        let mut out: Vec<String> = self.results.iter().map(CriterionResult::line).collect();
        let failed = self.results.iter().filter(|r| !r.passed).count();
        out.push(if failed == 0 {
            "ALL PASS".to_string()
        } else {
            format!("{failed} FAILED")
        });
        out.join("\n")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn name(id: usize) -> &'static str {
    match id {
        1 => "counterexample degrees",
        2 => "wdw cross-check",
        3 => "slope law",
        4 => "determinant multiplicativity",
        5 => "block recovery and equivalence",
        6 => "projection to rank delta",
        7 => "separation soundness",
        8 => "extreme-point bracket",
        9 => "caratheodory bound",
        10 => "real line roots",
        _ => "unknown",
    }
}

/// Runs check `id` (1 through 10). Numerical errors count as failures.
pub fn run_criterion(id: usize, seed: u64, exec: Exec) -> CriterionResult {
    let start = Instant::now();
    let s = fork_seed(seed, 1000 + id as u64);
    let outcome = match id {
        1 => counterexample_degrees(s, exec),
        2 => wdw_check(s),
        3 => slope_law(s, exec),
        4 => multiplicativity(s),
        5 => block_recovery(s, exec),
        6 => projection(s, exec),
        7 => soundness(s, exec),
        8 => extreme_bracket(s),
        9 => caratheodory(s, exec),
        10 => line_roots(s, exec),
        _ => Ok((false, format!("no criterion {id}"))),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    if id == 1 && seconds >= GEGEN_BUDGET_SECS {
        passed = false;
        detail.push_str(&format!("; over the {GEGEN_BUDGET_SECS} s budget"));
    }
    CriterionResult {
        id,
        name: name(id),
        passed,
        detail,
        seconds,
    }
}

pub fn run_all(seed: u64, exec: Exec) -> SelftestReport {
    SelftestReport {
        seed,
        results: (1..=CRITERIA)
            .map(|id| run_criterion(id, seed, exec))
            .collect(),
    }
}

type Outcome = Result<(bool, String)>;

fn counterexample_degrees(seed: u64, exec: Exec) -> Outcome {
    let l = counterexample_pencil();
    let mut ok = true;
    let mut parts = vec![];
    for (si, sampling) in [Sampling::Generic, Sampling::Hermitian]
        .into_iter()
        .enumerate()
    {
        let d1 = degree_at_level_with(
            &l,
            1,
            20,
            DEFAULT_RTOL,
            sampling,
            fork_seed(seed, 2 * si as u64),
            exec,
        );
        let d2 = degree_at_level_with(
            &l,
            2,
            20,
            DEFAULT_RTOL,
            sampling,
            fork_seed(seed, 2 * si as u64 + 1),
            exec,
        );
        ok &= d1 == 6 && d2 == 14;
        parts.push(format!("{sampling:?}: deg_1={d1} deg_2={d2}"));
    }
    Ok((ok, parts.join(", ")))
}

fn wdw_check(seed: u64) -> Outcome {
    let r = wdw(&linear_part_exprs(&counterexample_pencil()), &[1, 2], seed)?;
    let last = r.zero_flags.last().cloned().unwrap_or_default();
    let flags_ok = last == [ZeroFlag::Zero, ZeroFlag::Nonzero];
    let (r1, r2) = (wdw_rank_per_level(&r, 1)?, wdw_rank_per_level(&r, 2)?);
    let worst = r
        .residuals
        .iter()
        .map(|v| v.unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    let ok = flags_ok && r1 == 6 && r2 == 14 && worst <= 1e-8;
    Ok((
        ok,
        format!("d7 flags {last:?}, ranks {r1}/{r2}, residual {worst:.1e}"),
    ))
}

fn slope_law(seed: u64, exec: Exec) -> Outcome {
    let g = eventual_slope_with(
        &counterexample_pencil(),
        3,
        20,
        DEFAULT_RTOL,
        Sampling::Generic,
        seed,
        exec,
    )?;
    let i = eventual_slope_with(
        &fixtures::interval(),
        3,
        20,
        DEFAULT_RTOL,
        Sampling::Generic,
        seed,
        exec,
    )?;
    let ok = g.slope == Some(7)
        && g.threshold == Some(2)
        && i.slope == Some(2)
        && i.threshold == Some(1)
        && g.sandwich_ok
        && i.sandwich_ok;
    Ok((
        ok,
        format!(
            "counterexample b={:?} N={:?}, interval b={:?} N={:?}",
            g.slope, g.threshold, i.slope, i.threshold
        ),
    ))
}

fn multiplicativity(seed: u64) -> Outcome {
    let mut worst = 0.0f64;
    let mut failed = 0;
    for (fi, l) in fixtures::all().iter().enumerate() {
        for (pi, (k1, k2)) in [(1, 1), (1, 2), (2, 2)].into_iter().enumerate() {
            let r = verify_multiplicativity(
                l,
                k1,
                k2,
                50,
                1e-8,
                fork_seed(seed, (fi * 3 + pi) as u64),
            )?;
            worst = worst.max(r.max_violation);
            failed += r.samples - r.passed;
        }
    }
    Ok((
        failed == 0,
        format!("{failed} violations, worst {worst:.1e}"),
    ))
}

fn scrambled<R: Rng + ?Sized>(blocks: &[HermTuple], rng: &mut R) -> Result<HermTuple> {
    let mut order: Vec<&HermTuple> = blocks.iter().collect();
    order.shuffle(rng);
    let mut t = order[0].clone();
    for b in &order[1..] {
        t = t.direct_sum(b)?;
    }
    let u = random_unitary(t.level(), rng);
    t.compress(&u)
}

/// One random block-sum trial: `(passed, explanation on failure)`.
fn block_trial(seed: u64, exec: Exec) -> Result<(bool, String)> {
    let mut rng = rng_from_seed(seed);
    let g = rng.gen_range(1..=3);
    let nclasses = rng.gen_range(1..=3);
    let mut expected = vec![];
    let mut blocks = vec![];
    let mut total = 0;
    for _ in 0..nclasses {
        let size = if g == 1 { 1 } else { rng.gen_range(1..=3) };
        let mult = rng.gen_range(1..=3usize).min((12 - total) / size);
        if mult == 0 {
            break;
        }
        total += size * mult;
        let b = random_irreducible(g, size, &mut rng);
        blocks.extend(std::iter::repeat_n(b, mult));
        expected.push((size, mult));
    }
    expected.sort();
    let x = scrambled(&blocks, &mut rng)?;
    let y = scrambled(&blocks, &mut rng)?;
    let rx = decompose_tuple(&x, fork_seed(seed, 1), exec)?;
    let ry = decompose_tuple(&y, fork_seed(seed, 2), exec)?;
    let mut got: Vec<(usize, usize)> = rx
        .classes
        .iter()
        .map(|c| (c.representative.level(), c.multiplicity))
        .collect();
    got.sort();
    if got != expected || rx.zero_rank != 0 {
        return Ok((
            false,
            format!(
                "expected {expected:?}, got {got:?} zero_rank {}",
                rx.zero_rank
            ),
        ));
    }
    let (mx, my) = match (
        minimal_from_report(&rx, "x")?,
        minimal_from_report(&ry, "y")?,
    ) {
        (Some(a), Some(b)) => (a, b),
        _ => return Ok((false, "empty minimal pencil".into())),
    };
    match unitary_equivalent_with(mx.coeffs(), my.coeffs(), fork_seed(seed, 3), exec)? {
        Some(u) => {
            let res = equivalence_residual(&u, mx.coeffs(), my.coeffs());
            Ok((res <= EQUIV_TOL, format!("residual {res:.1e}")))
        }
        None => Ok((false, "minimal pencils not matched".into())),
    }
}

fn block_recovery(seed: u64, exec: Exec) -> Outcome {
    let trials = 50;
    let results = par::map_range(exec, trials, |t| {
        block_trial(fork_seed(seed, t as u64), Exec::Sequential)
    });
    let mut failures = vec![];
    for (t, r) in results.into_iter().enumerate() {
        let (ok, why) = r?;
        if !ok {
            failures.push(format!("trial {t}: {why}"));
        }
    }
    let detail = match failures.first() {
        None => format!("{trials} trials, 0 failures"),
        Some(f) => format!("{} failures, first {f}", failures.len()),
    };
    Ok((failures.is_empty(), detail))
}

fn projection(seed: u64, exec: Exec) -> Outcome {
    let fx = fixtures::all();
    let per = par::map_range(exec, fx.len(), |fi| -> Result<usize> {
        let l = &fx[fi];
        let mut rng = rng_from_seed(fork_seed(seed, fi as u64));
        let mut bad = 0;
        for _ in 0..100 {
            let a = sample_outside(l, l.delta() + 2, &mut rng)?;
            let comp = compress_witness(l, &a, None)?;
            if comp.rank() > l.delta() || l.classify(&comp.point, None)?.verdict != Verdict::Outside
            {
                bad += 1;
            }
            let b = sample_boundary(l, l.delta() + 2, &mut rng)?;
            let proj = minimal_boundary_projection(l, &b, None)?;
            if proj.rank() > l.delta()
                || l.classify(&proj.point, None)?.verdict != Verdict::Boundary
            {
                bad += 1;
            }
        }
        Ok(bad)
    });
    let bad: usize = per.into_iter().collect::<Result<Vec<_>>>()?.iter().sum();
    Ok((
        bad == 0,
        format!("{} fixtures x 200 points, {bad} failures", fx.len()),
    ))
}

fn soundness(seed: u64, exec: Exec) -> Outcome {
    let fx = fixtures::all();
    let mut worst_neg = f64::NEG_INFINITY;
    let mut worst_min = f64::INFINITY;
    for (fi, l) in fx.iter().enumerate() {
        let mut rng = rng_from_seed(fork_seed(seed, fi as u64));
        for s in 0..20 {
            let y = sample_outside(l, rng.gen_range(1..=3), &mut rng)?;
            let cert = separate(l, &y, None)?;
            worst_neg = worst_neg.max(cert.negativity);
            let rep = cert.soundness(l, 200, fork_seed(seed, (100 * fi + s) as u64), exec)?;
            worst_min = worst_min.min(rep.min_eigenvalue);
        }
    }
    Ok((
        worst_neg < -1e-6 && worst_min >= -1e-9,
        format!("max negativity {worst_neg:.3e}, min sampled eigenvalue {worst_min:.3e}"),
    ))
}

fn diag_point(v: &[f64]) -> HermTuple {
    let m = CMatrix::from_fn(v.len(), v.len(), |i, j| {
        c(if i == j { v[i] } else { 0.0 }, 0.0)
    });
    HermTuple::new(vec![m]).expect("square")
}

fn dilation_verified(l: &MonicPencil, v: &AbsoluteVerdict) -> Result<bool> {
    match v {
        AbsoluteVerdict::Dilation { dilated, .. } => {
            Ok(l.classify(dilated, None)?.verdict != Verdict::Outside)
        }
        _ => Ok(false),
    }
}

fn extreme_bracket(seed: u64) -> Outcome {
    let l = fixtures::interval();
    let extreme = diag_point(&[1.0]);
    let face = diag_point(&[1.0, 0.0]);
    let mut ok = absolute_extreme_test(&l, &extreme)?.is_absolute_extreme();
    let v = absolute_extreme_test(&l, &face)?;
    ok &= dilation_verified(&l, &v)?;
    let mut rng = rng_from_seed(seed);
    let mut stable = 0;
    for _ in 0..10 {
        let u = random_unitary(l.delta(), &mut rng);
        let (l1, a1) = conjugate_jointly(&l, &extreme, &u, &random_unitary(1, &mut rng))?;
        let (l2, a2) = conjugate_jointly(&l, &face, &u, &random_unitary(2, &mut rng))?;
        let e = absolute_extreme_test(&l1, &a1)?.is_absolute_extreme();
        let d = absolute_extreme_test(&l2, &a2)?;
        if e && dilation_verified(&l2, &d)? {
            stable += 1;
        }
    }
    ok &= stable == 10;
    Ok((
        ok,
        format!("(1) extreme, diag(1,0) dilates, {stable}/10 conjugations stable"),
    ))
}

fn caratheodory(seed: u64, exec: Exec) -> Outcome {
    let res = par::map_range(exec, 20, |i| -> Result<(bool, f64)> {
        let mut rng = rng_from_seed(fork_seed(seed, i as u64));
        let (m, g, n) = if i < 10 {
            (1, 1 + i % 3, 12)
        } else {
            (2, 2 + i % 2, 20)
        };
        let comb = MatrixCombination::random(g, m, n, 3, &mut rng);
        let red = caratheodory_reduce(&comb)?;
        let resid = red
            .identity_residual()
            .max(red.target_residual()?.unwrap_or(0.0));
        Ok((
            red.terms.len() <= caratheodory_bound(m) && red.terms.len() <= n,
            resid,
        ))
    });
    let mut worst = 0.0f64;
    let mut ok = true;
    for r in res {
        let (bound_ok, resid) = r?;
        worst = worst.max(resid);
        ok &= bound_ok;
    }
    Ok((
        ok && worst <= 1e-9,
        format!("20 inputs, worst residual {worst:.1e}"),
    ))
}

fn line_roots(seed: u64, exec: Exec) -> Outcome {
    let fx = fixtures::all();
    let per = par::map_range(exec, fx.len(), |fi| -> Result<f64> {
        let l = &fx[fi];
        let mut rng = rng_from_seed(fork_seed(seed, fi as u64));
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let x = HermTuple::random_gue(l.g(), rng.gen_range(1..=3), &mut rng);
            for t in l.line_roots(&x)? {
                worst = worst.max(l.root_residual(&x, t)?);
            }
        }
        Ok(worst)
    });
    let worst = per
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok((worst <= 1e-6, format!("worst root residual {worst:.1e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_text_marks_failures() {
        let mk = |id, passed| CriterionResult {
            id,
            name: name(id),
            passed,
            detail: String::new(),
            seconds: 0.0,
        };
        let good = SelftestReport {
            seed: 1,
            results: vec![mk(1, true), mk(2, true)],
        };
        assert!(good.text().ends_with("ALL PASS"));
        let bad = SelftestReport {
            seed: 1,
            results: vec![mk(1, true), mk(2, false)],
        };
        assert!(!bad.all_pass());
        assert!(bad.text().contains("[FAIL]  2 wdw cross-check"));
        assert!(bad.text().ends_with("1 FAILED"));
    }

    #[test]
    fn unknown_criterion_fails() {
        assert!(!run_criterion(11, 0, Exec::Sequential).passed);
    }

    #[test]
    fn block_trials_pass_sequentially() {
        for t in 0..5 {
            let (ok, why) = block_trial(fork_seed(5, t), Exec::Sequential).unwrap();
            assert!(ok, "{why}");
        }
    }
}
