//! Command-line entry point: prove, emit, and check subcommands over the
//! goal-file pipeline.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use smtbridge::error::{Error, Result};
use smtbridge::goalfile::{parse_goal_file, GoalFile};
use smtbridge::oracle::Verdict;
use smtbridge::pipeline::{
    render_human, render_obligations, render_phase1, render_sexp, run_emit, run_prove,
    PipelineOptions,
};
use smtbridge::solver::{load_config, SolverConfig};

#[derive(Parser)]
#[command(
    name = "smtbridge",
    about = "Translate untyped goals to SMT-LIB queries, solve, and return soundness obligations"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Override the pinned solver command (stamps the custom-config
    /// trust tag). Whitespace-split; a {file} argument is replaced by
    /// the script path.
    #[arg(long, value_name = "CMD")]
    solver_cmd: Option<String>,

    /// Config file path (default: ./bridge.conf, then
    /// ~/.config/smtbridge/bridge.conf).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Solver timeout in seconds.
    #[arg(long, value_name = "SECS")]
    timeout: Option<u64>,

    /// Enable the RewriteExpt customization (custom-config trust tag).
    #[arg(long)]
    custom: bool,

    /// Saturation rounds for the expt rewriter.
    #[arg(long, value_name = "N", default_value_t = 3)]
    expt_rounds: u32,

    /// Literal multiplier cap for expt rule 4.
    #[arg(long, value_name = "C", default_value_t = 4)]
    expt_cbound: u32,

    /// Random samples per obligation clause.
    #[arg(long, value_name = "N", default_value_t = 1000)]
    check_obligations: usize,

    /// Seed for the obligation sampler.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Print the machine-readable s-expression report instead of the
    /// human one.
    #[arg(long)]
    sexp: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the full pipeline: translate, solve, check obligations.
    Prove {
        /// Goal file (omit when using --all).
        file: Option<PathBuf>,
        /// Prove every *.lisp goal file in a directory, concurrently.
        #[arg(long, value_name = "DIR")]
        all: Option<PathBuf>,
        /// Skip obligation checking after an unsat verdict.
        #[arg(long)]
        no_obligations: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Translate only; dump phase-1 state, the SMT script, and the
    /// obligations without solving.
    Emit {
        file: PathBuf,
        /// Write the SMT-LIB script here (bit-exact).
        #[arg(long, value_name = "PATH")]
        emit_smt: Option<PathBuf>,
        /// Write the phase-1 dump here.
        #[arg(long, value_name = "PATH")]
        emit_phase1: Option<PathBuf>,
        /// Write the obligation clauses here.
        #[arg(long, value_name = "PATH")]
        emit_obligations: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Check the Q1/Q2 obligations by falsification only (no solver run
    /// on the main query).
    Check {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn solver_config(common: &Common) -> Result<(SolverConfig, bool)> {
    let mut overridden = false;
    let mut cfg = if let Some(cmd) = &common.solver_cmd {
        overridden = true;
        SolverConfig {
            command: cmd.split_whitespace().map(|s| s.to_string()).collect(),
            ..SolverConfig::default()
        }
    } else if let Some(path) = &common.config {
        load_config(path)?
    } else if Path::new("bridge.conf").is_file() {
        load_config(Path::new("bridge.conf"))?
    } else if let Some(home) = std::env::var_os("HOME") {
        let user = Path::new(&home).join(".config/smtbridge/bridge.conf");
        if user.is_file() {
            load_config(&user)?
        } else {
            SolverConfig::default()
        }
    } else {
        SolverConfig::default()
    };
    if let Some(secs) = common.timeout {
        cfg.timeout = Duration::from_secs(secs);
    }
    cfg.validate()?;
    Ok((cfg, overridden))
}

fn pipeline_options(common: &Common) -> Result<PipelineOptions> {
    let (solver, solver_overridden) = solver_config(common)?;
    let mut opts = PipelineOptions {
        solver,
        custom: common.custom,
        solver_overridden,
        ..PipelineOptions::default()
    };
    opts.saturation.max_rounds = common.expt_rounds;
    opts.saturation.small_c_bound = common.expt_cbound;
    opts.sampler.samples = common.check_obligations;
    opts.sampler.seed = common.seed;
    Ok(opts)
}

fn load_goal(path: &Path) -> Result<GoalFile> {
    let text = std::fs::read_to_string(path)?;
    parse_goal_file(&text)
}

fn goal_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn cmd_prove_one(path: &Path, opts: &PipelineOptions, sexp: bool) -> Result<(String, i32)> {
    let gf = load_goal(path)?;
    let report = run_prove(&gf, &goal_id(path), opts)?;
    let text = if sexp {
        render_sexp(&report)
    } else {
        render_human(&report)
    };
    Ok((text, report.status.exit_code()))
}

fn cmd_prove_all(dir: &Path, opts: &PipelineOptions, sexp: bool) -> i32 {
    let mut files: Vec<PathBuf> = match std::fs::read_dir(dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "lisp"))
            .collect(),
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", dir.display());
            return 2;
        }
    };
    files.sort();
    if files.is_empty() {
        eprintln!("error: no .lisp goal files in {}", dir.display());
        return 2;
    }
    let results: Vec<(PathBuf, Result<(String, i32)>)> = std::thread::scope(|s| {
        let handles: Vec<_> = files
            .iter()
            .map(|f| {
                let opts = opts.clone();
                (f.clone(), s.spawn(move || cmd_prove_one(f, &opts, sexp)))
            })
            .collect();
        handles
            .into_iter()
            .map(|(f, h)| (f, h.join().expect("prove thread panicked")))
            .collect()
    });
    let mut worst = 0;
    for (file, res) in results {
        match res {
            Ok((text, code)) => {
                println!("=== {}", file.display());
                print!("{text}");
                worst = worst.max(code);
            }
            Err(e) => {
                eprintln!("=== {}\nerror: {e}", file.display());
                worst = worst.max(e.exit_code());
            }
        }
    }
    worst
}

fn write_or_print(path: &Option<PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(p) if p.as_os_str() != "-" => std::fs::write(p, content).map_err(Error::from),
        _ => {
            print!("{content}");
            Ok(())
        }
    }
}

fn run() -> Result<i32> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Prove {
            file,
            all,
            no_obligations,
            common,
        } => {
            let mut opts = pipeline_options(&common)?;
            opts.check_obligations = !no_obligations;
            match (file, all) {
                (Some(f), None) => {
                    let (text, code) = cmd_prove_one(&f, &opts, common.sexp)?;
                    print!("{text}");
                    Ok(code)
                }
                (None, Some(dir)) => Ok(cmd_prove_all(&dir, &opts, common.sexp)),
                _ => Err(Error::Config(
                    "prove takes either a goal file or --all <dir>".to_string(),
                )),
            }
        }
        Cmd::Emit {
            file,
            emit_smt,
            emit_phase1,
            emit_obligations,
            common,
        } => {
            let opts = pipeline_options(&common)?;
            let gf = load_goal(&file)?;
            let (p1, query, obs) = run_emit(&gf, &opts)?;
            for w in &query.warnings {
                eprintln!("warning: {w}");
            }
            if emit_smt.is_none() && emit_phase1.is_none() && emit_obligations.is_none() {
                print!("{}", query.script);
            }
            if emit_smt.is_some() {
                write_or_print(&emit_smt, &query.script)?;
            }
            if emit_phase1.is_some() {
                write_or_print(&emit_phase1, &render_phase1(&p1))?;
            }
            if emit_obligations.is_some() {
                write_or_print(&emit_obligations, &render_obligations(&obs))?;
            }
            Ok(0)
        }
        Cmd::Check { file, common } => {
            let opts = pipeline_options(&common)?;
            let gf = load_goal(&file)?;
            let (p1, _query, obs) = run_emit(&gf, &opts)?;
            let _ = p1;
            let reports =
                smtbridge::obligations::check_obligations(&obs, &opts.sampler, &gf.defs);
            let mut falsified = false;
            for r in &reports {
                let tag = r
                    .provenance
                    .map(|p| format!(" [{p}]"))
                    .unwrap_or_default();
                match &r.verdict {
                    Verdict::Pass => println!("{}{tag}: pass (not falsified)", r.label),
                    Verdict::Inconclusive => println!("{}{tag}: inconclusive", r.label),
                    Verdict::Falsified(v) => {
                        falsified = true;
                        println!("{}{tag}: FALSIFIED", r.label);
                        for (name, value) in v {
                            println!("  {name} = {}", value.to_goal_syntax());
                        }
                    }
                }
            }
            Ok(if falsified { 1 } else { 0 })
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
