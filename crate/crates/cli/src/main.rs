use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fps_core::detdeg::{
    degree_at_level_with, eventual_slope_with, wdw, wdw_rank_per_level, DegreeTable, Sampling,
    DEFAULT_TRIALS,
};
use fps_core::geometry::{
    absolute_extreme_test, is_euclidean_extreme, matrix_extreme_prefilter, separate,
    AbsoluteVerdict,
};
use fps_core::ncexpr::ExprMatrix;
use fps_core::numkernel::DEFAULT_RTOL;
use fps_core::par::Exec;
use fps_core::pencil::{HermTuple, MonicPencil};
use fps_core::selftest::run_all;
use fps_core::structure::{decompose_with, minimal_from_report, prune_heuristic, DEFAULT_SEED};
use fps_core::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_SELFTEST: u8 = 4;

#[derive(Parser)]
#[command(
    name = "fps",
    version,
    about = "Free spectrahedra: structure, degrees and geometry of monic linear pencils"
)]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// Seed for every randomized step (decimal or 0x-prefixed hex)
    #[arg(long, global = true, env = "FPS_SEED", value_parser = parse_seed, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Random samples per level or per certificate check
    #[arg(long, global = true, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    /// Highest level to probe
    #[arg(long, global = true, default_value_t = 3)]
    levels: usize,
    /// Membership tolerance; defaults to 1e-8 (1 + ||X||_F)
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Flag classes whose removal does not change sampled membership
    #[arg(long, global = true)]
    prune_heuristic: bool,
    /// Output file
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// Disable data-parallel evaluation
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplingArg {
    Generic,
    Hermitian,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decompose a pencil into irreducible classes
    Analyze { pencil: PathBuf },
    /// Degree of det L at each level and the eventual slope
    Degree {
        pencil: PathBuf,
        /// Expression matrix whose WDW rank is compared level by level
        #[arg(long)]
        wdw: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "generic")]
        sampling: SamplingArg,
    },
    /// Classify a tuple against the spectrahedron
    Member { pencil: PathBuf, tuple: PathBuf },
    /// Build a separating pencil for an outside tuple
    Separate { pencil: PathBuf, tuple: PathBuf },
    /// Write the minimal pencil defining the same spectrahedron
    Minimal { pencil: PathBuf },
    /// Euclidean and absolute extremality of a boundary tuple
    Extreme { pencil: PathBuf, tuple: PathBuf },
    /// Symbolic W D W* elimination of a hermitian expression matrix
    Wdw { matrix: PathBuf },
    /// Run the numbered acceptance checks
    Selftest,
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let s = s.trim();
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    }
    .map_err(|e| format!("invalid seed `{s}`: {e}"))
}

enum Failure {
    Core(Error),
    Selftest,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn write_output(run: &RunArgs, text: &str) -> Result<(), Error> {
    if let Some(path) = &run.output {
        std::fs::write(path, text)?;
    }
    Ok(())
}

fn exec(run: &RunArgs) -> Exec {
    if run.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    }
}

fn analyze(run: &RunArgs, path: &PathBuf) -> Result<(), Failure> {
    let l = MonicPencil::load(path)?;
    let r = decompose_with(&l, run.seed, exec(run))?;
    println!("delta={} g={}", l.delta(), l.g());
    if r.classes.is_empty() {
        eprintln!("warning: every coefficient vanishes; the spectrahedron is everything");
        println!("zero_rank={}; minimal size: 0 classes", r.zero_rank);
    } else {
        let irreducible =
            r.classes.len() == 1 && r.classes[0].multiplicity == 1 && r.zero_rank == 0;
        let mults: Vec<String> = r
            .classes
            .iter()
            .map(|c| c.multiplicity.to_string())
            .collect();
        let classes = if r.classes.len() == 1 {
            "1".to_string()
        } else {
            format!("{} (h={})", r.classes.len(), mults.join(","))
        };
        println!(
            "irreducible: {}; classes: {classes}; minimal size: {}; N={}",
            if irreducible { "yes" } else { "no" },
            r.minimal_size(),
            r.classes.len()
        );
        println!("zero_rank={}", r.zero_rank);
        for (i, c) in r.classes.iter().enumerate() {
            println!(
                "class {}: size {} multiplicity {}",
                i + 1,
                c.representative.level(),
                c.multiplicity
            );
        }
        println!("pz of the minimal pencil: {}", r.minimal_size());
        println!("decomposition residual: {:.2e}", r.residual);
    }
    if run.prune_heuristic {
        for f in prune_heuristic(&r, run.trials.max(1) * 8, run.seed, exec(run))? {
            if f.suspected_redundant {
                println!("class {}: suspected redundant (heuristic)", f.class + 1);
            }
        }
    }
    write_output(run, &r.to_json_string())?;
    Ok(())
}

fn degree(
    run: &RunArgs,
    path: &PathBuf,
    wdw_path: Option<&PathBuf>,
    sampling: SamplingArg,
) -> Result<(), Failure> {
    let l = MonicPencil::load(path)?;
    let sampling = match sampling {
        SamplingArg::Generic => Sampling::Generic,
        SamplingArg::Hermitian => Sampling::Hermitian,
    };
    let levels = run.levels.max(1);
    let table = if levels >= 2 {
        eventual_slope_with(
            &l,
            levels,
            run.trials,
            DEFAULT_RTOL,
            sampling,
            run.seed,
            exec(run),
        )?
    } else {
        let d = degree_at_level_with(
            &l,
            1,
            run.trials,
            DEFAULT_RTOL,
            sampling,
            run.seed,
            exec(run),
        );
        DegreeTable::from_degrees([(1, d)].into_iter().collect(), run.trials)
    };
    println!("{}", table.text());
    if !table.sandwich_ok {
        println!("warning: deg_1 k <= deg_k <= b k fails at some level");
    }
    if let Some(p) = wdw_path {
        let m = ExprMatrix::load(p)?;
        let probe: Vec<usize> = (1..=levels).collect();
        let r = wdw(&m, &probe, run.seed)?;
        for k in probe {
            let rank = wdw_rank_per_level(&r, k)?;
            let deg = table.degs.get(&k).copied().unwrap_or(0);
            let tag = if rank == deg { "agrees" } else { "DISAGREES" };
            println!("wdw rank k={k}: {rank} ({tag} with deg_{k}={deg})");
        }
    }
    write_output(run, &table.to_json_string())?;
    Ok(())
}

fn member(run: &RunArgs, pencil: &PathBuf, tuple: &PathBuf) -> Result<(), Failure> {
    let l = MonicPencil::load(pencil)?;
    let x = HermTuple::load(tuple)?;
    let cls = l.classify(&x, run.tol)?;
    println!("{:?} min_eig={:?}", cls.verdict, cls.min_eigenvalue);
    if let Some(k) = &cls.kernel_basis {
        println!("kernel dimension: {}", k.ncols());
    }
    Ok(())
}

fn separate_cmd(run: &RunArgs, pencil: &PathBuf, tuple: &PathBuf) -> Result<(), Failure> {
    let l = MonicPencil::load(pencil)?;
    let y = HermTuple::load(tuple)?;
    let cert = separate(&l, &y, run.tol)?;
    let samples = run.trials.max(1) * 10;
    let sound = cert.soundness(&l, samples, run.seed, exec(run))?;
    println!("negativity={:?}", cert.negativity);
    println!(
        "certificate size {}; min over {} sampled points: {:.3e}",
        cert.pencil.delta(),
        sound.samples,
        sound.min_eigenvalue
    );
    match &run.output {
        Some(p) => cert.pencil.save(p)?,
        None => println!("{}", cert.to_json_string(Some(&sound))),
    }
    Ok(())
}

fn minimal(run: &RunArgs, pencil: &PathBuf) -> Result<(), Failure> {
    let l = MonicPencil::load(pencil)?;
    let r = decompose_with(&l, run.seed, exec(run))?;
    match minimal_from_report(&r, &format!("minimal({})", l.label))? {
        None => {
            eprintln!("warning: every coefficient vanishes; no minimal pencil written");
            println!("minimal size: 0");
        }
        Some(m) => {
            println!("minimal size: {}", m.delta());
            match &run.output {
                Some(p) => m.save(p)?,
                None => println!("{}", m.to_json_string()),
            }
        }
    }
    Ok(())
}

fn extreme(run: &RunArgs, pencil: &PathBuf, tuple: &PathBuf) -> Result<(), Failure> {
    let l = MonicPencil::load(pencil)?;
    let a = HermTuple::load(tuple)?;
    let eu = is_euclidean_extreme(&l, &a)?;
    println!("euclidean extreme: {}", if eu { "yes" } else { "no" });
    let verdict = absolute_extreme_test(&l, &a)?;
    match &verdict {
        AbsoluteVerdict::AbsoluteExtreme => println!("absolute: AbsoluteExtreme"),
        AbsoluteVerdict::Dilation {
            t, min_eigenvalue, ..
        } => {
            println!("absolute: Dilation t={t:?} min_eig={min_eigenvalue:?}")
        }
        AbsoluteVerdict::BisectionFailure { .. } => {
            println!("absolute: inconclusive (no verified t >= 1e-6)")
        }
    }
    println!(
        "matrix-extreme prefilter: {:?}",
        matrix_extreme_prefilter(&l, &a)?
    );
    match &run.output {
        Some(_) => write_output(run, &verdict.to_json_string())?,
        None => {
            if matches!(verdict, AbsoluteVerdict::Dilation { .. }) {
                println!("{}", verdict.to_json_string());
            }
        }
    }
    Ok(())
}

fn wdw_cmd(run: &RunArgs, path: &PathBuf) -> Result<(), Failure> {
    let m = ExprMatrix::load(path)?;
    let levels: Vec<usize> = (1..=run.levels.max(1)).collect();
    let r = wdw(&m, &levels, run.seed)?;
    print!("{}", r.text());
    for &k in &levels {
        println!("rank at k={k}: {}", wdw_rank_per_level(&r, k)?);
    }
    if let Some(p) = &run.output {
        r.w.save(p)?;
    }
    Ok(())
}

fn selftest(run: &RunArgs) -> Result<(), Failure> {
    let report = run_all(run.seed, exec(run));
    println!("{}", report.text());
    write_output(run, &report.to_json_string())?;
    if report.all_pass() {
        Ok(())
    } else {
        Err(Failure::Selftest)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let run = &cli.run;
    let outcome = match &cli.cmd {
        Cmd::Analyze { pencil } => analyze(run, pencil),
        Cmd::Degree {
            pencil,
            wdw,
            sampling,
        } => degree(run, pencil, wdw.as_ref(), *sampling),
        Cmd::Member { pencil, tuple } => member(run, pencil, tuple),
        Cmd::Separate { pencil, tuple } => separate_cmd(run, pencil, tuple),
        Cmd::Minimal { pencil } => minimal(run, pencil),
        Cmd::Extreme { pencil, tuple } => extreme(run, pencil, tuple),
        Cmd::Wdw { matrix } => wdw_cmd(run, matrix),
        Cmd::Selftest => selftest(run),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Selftest) => ExitCode::from(EXIT_SELFTEST),
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_parse_error() {
                EXIT_PARSE
            } else {
                EXIT_NUMERIC
            })
        }
    }
}
