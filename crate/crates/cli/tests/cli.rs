use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fps_core::detdeg::{counterexample_pencil, linear_part_exprs, DegreeTable};
use fps_core::ncexpr::ExprMatrix;
use fps_core::numkernel::{random_unitary, rng_from_seed};
use fps_core::pencil::{fixtures, HermTuple, MonicPencil};
use fps_core::structure::{random_irreducible, DecompositionReport};
use tempfile::TempDir;

fn fps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fps"))
        .args(args)
        .env_remove("FPS_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn save_pencil(dir: &TempDir, name: &str, l: &MonicPencil) -> PathBuf {
    let path = dir.path().join(name);
    l.save(&path).unwrap();
    path
}

fn save_point(dir: &TempDir, name: &str, vals: &[f64]) -> PathBuf {
    let path = dir.path().join(name);
    let mats = vals
        .iter()
        .map(|&v| fps_core::numkernel::CMatrix::from_element(1, 1, fps_core::numkernel::c(v, 0.0)))
        .collect();
    HermTuple::new(mats).unwrap().save(&path).unwrap();
    path
}

#[test]
fn member_of_zero_tuple() {
    let dir = TempDir::new().unwrap();
    let l = save_pencil(&dir, "interval.json", &fixtures::interval());
    let x = save_point(&dir, "zero.json", &[0.0]);
    let o = fps(&["member", p(&l), p(&x)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().next().unwrap(), "Interior min_eig=1.0");
}

#[test]
fn separation_certificate_round_trips() {
    let dir = TempDir::new().unwrap();
    let l = save_pencil(&dir, "interval.json", &fixtures::interval());
    let y = save_point(&dir, "two.json", &[2.0]);
    let cert = dir.path().join("cert.json");
    let o = fps(&["separate", p(&l), p(&y), "-o", p(&cert)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("negativity=-1.0"));
    let loaded = MonicPencil::load(&cert).unwrap();
    assert_eq!(loaded.delta(), 1);
    let o = fps(&["member", p(&cert), p(&y)]);
    assert!(stdout(&o).starts_with("Outside"));
}

#[test]
fn analyze_irreducible_and_scrambled() {
    let dir = TempDir::new().unwrap();
    let pauli = save_pencil(&dir, "pauli.json", &fixtures::pauli());
    let o = fps(&["analyze", p(&pauli)]);
    assert!(stdout(&o).contains("irreducible: yes; classes: 1; minimal size: 2; N=1"));

    let mut rng = rng_from_seed(4);
    let b = random_irreducible(2, 2, &mut rng);
    let cc = random_irreducible(2, 3, &mut rng);
    let t = b.direct_sum(&b).unwrap().direct_sum(&cc).unwrap();
    let t = t.compress(&random_unitary(7, &mut rng)).unwrap();
    let path = save_pencil(
        &dir,
        "scrambled.json",
        &MonicPencil::from_tuple(t, "bbc").unwrap(),
    );
    let report = dir.path().join("report.json");
    let o = fps(&["analyze", p(&path), "-o", p(&report)]);
    assert!(o.status.success());
    assert!(
        stdout(&o).contains("classes: 2 (h=2,1); minimal size: 5"),
        "{}",
        stdout(&o)
    );
    let r = DecompositionReport::from_json_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r.classes.len(), 2);

    let again = dir.path().join("again.json");
    fps(&["analyze", p(&path), "-o", p(&again)]);
    assert_eq!(
        std::fs::read(&report).unwrap(),
        std::fs::read(&again).unwrap()
    );
}

#[test]
fn analyze_zero_pencil_warns() {
    let dir = TempDir::new().unwrap();
    let l = MonicPencil::diagonal(&[vec![0.0, 0.0]], "zero").unwrap();
    let path = save_pencil(&dir, "zero.json", &l);
    let o = fps(&["analyze", p(&path)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("zero_rank=2; minimal size: 0 classes"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn degree_tables() {
    let dir = TempDir::new().unwrap();
    let counterexample = save_pencil(&dir, "counterexample.json", &counterexample_pencil());
    let o = fps(&["degree", p(&counterexample), "--levels", "2"]);
    assert!(stdout(&o).starts_with("deg_1=6 deg_2=14"));

    let table = dir.path().join("table.json");
    let o = fps(&[
        "degree",
        p(&counterexample),
        "--levels",
        "3",
        "-o",
        p(&table),
    ]);
    assert!(stdout(&o).contains("b=7 N=2"), "{}", stdout(&o));
    let t = DegreeTable::from_json_str(&std::fs::read_to_string(&table).unwrap()).unwrap();
    assert_eq!(t.degs[&3], 21);

    let interval = save_pencil(&dir, "interval.json", &fixtures::interval());
    let o = fps(&["degree", p(&interval), "--levels", "4"]);
    assert!(stdout(&o).contains("b=2 N=1"));
}

#[test]
fn degree_with_wdw_cross_check() {
    let dir = TempDir::new().unwrap();
    let counterexample = save_pencil(&dir, "counterexample.json", &counterexample_pencil());
    let h = dir.path().join("h.json");
    linear_part_exprs(&counterexample_pencil())
        .save(&h)
        .unwrap();
    let o = fps(&[
        "degree",
        p(&counterexample),
        "--levels",
        "2",
        "--wdw",
        p(&h),
    ]);
    let out = stdout(&o);
    assert!(out.contains("wdw rank k=1: 6 (agrees"));
    assert!(out.contains("wdw rank k=2: 14 (agrees"));
}

#[test]
fn wdw_prints_blocks_and_writes_w() {
    let dir = TempDir::new().unwrap();
    let h = dir.path().join("h.json");
    linear_part_exprs(&counterexample_pencil())
        .save(&h)
        .unwrap();
    let w = dir.path().join("w.json");
    let o = fps(&["wdw", p(&h), "--levels", "2", "-o", p(&w)]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("k=1:Zero k=2:Nonzero"), "{out}");
    assert!(out.contains("rank at k=2: 14"));
    assert_eq!(ExprMatrix::load(&w).unwrap().rows(), 7);
}

#[test]
fn minimal_and_extreme() {
    let dir = TempDir::new().unwrap();
    let l = fixtures::interval()
        .direct_sum(&fixtures::interval())
        .unwrap();
    let path = save_pencil(&dir, "double.json", &l);
    let out = dir.path().join("min.json");
    let o = fps(&["minimal", p(&path), "-o", p(&out)]);
    assert!(stdout(&o).contains("minimal size: 2"));
    assert_eq!(MonicPencil::load(&out).unwrap().delta(), 2);

    let interval = save_pencil(&dir, "interval.json", &fixtures::interval());
    let one = save_point(&dir, "one.json", &[1.0]);
    let o = fps(&["extreme", p(&interval), p(&one)]);
    let text = stdout(&o);
    assert!(text.contains("euclidean extreme: yes"));
    assert!(text.contains("absolute: AbsoluteExtreme"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(fps(&["no-such-command"]).status.code(), Some(1));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    assert_eq!(fps(&["analyze", p(&bad)]).status.code(), Some(2));
    let l = save_pencil(&dir, "interval.json", &fixtures::interval());
    let zero = save_point(&dir, "zero.json", &[0.0]);
    assert_eq!(fps(&["separate", p(&l), p(&zero)]).status.code(), Some(3));
    assert_eq!(fps(&["--seed", "zz", "selftest"]).status.code(), Some(1));
}

#[test]
fn selftest_passes() {
    let o = fps(&["selftest", "--seed", "42"]);
    let out = stdout(&o);
    assert!(o.status.success(), "{out}");
    assert!(out.trim_end().ends_with("ALL PASS"));
    assert!(out.contains("deg_1=6 deg_2=14"));
}
