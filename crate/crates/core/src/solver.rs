//! External SMT solver subprocess driver: runs the configured solver on
//! an emitted script and interprets its answer. The driver is
//! output-driven (solver exit codes are ignored) and never treats `sat`
//! as success.

use std::io::Read;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Executable plus arguments; a literal `{file}` argument is replaced
    /// by the script path, otherwise the path is appended.
    pub command: Vec<String>,
    pub timeout: Duration,
    pub working_dir: Option<PathBuf>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            command: vec!["z3".to_string(), "-smt2".to_string()],
            timeout: Duration::from_secs(30),
            working_dir: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.command.is_empty() || self.command[0].is_empty() {
            return Err(Error::Config("solver command is empty".to_string()));
        }
        if self.timeout.is_zero() {
            return Err(Error::Config("timeout must be positive".to_string()));
        }
        Ok(())
    }
}

/// Load a `key = value` config file. Recognized keys: `solver` (command
/// line, whitespace-split) and `timeout` (seconds). Blank lines and `#`
/// comments are ignored.
pub fn load_config(path: &Path) -> Result<SolverConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut cfg = SolverConfig::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "{}:{}: expected key = value",
                path.display(),
                lineno + 1
            ))
        })?;
        match key.trim() {
            "solver" => {
                cfg.command = value.split_whitespace().map(|s| s.to_string()).collect();
            }
            "timeout" => {
                let secs: u64 = value.trim().parse().map_err(|_| {
                    Error::Config(format!("invalid timeout value {}", value.trim()))
                })?;
                cfg.timeout = Duration::from_secs(secs);
            }
            other => {
                return Err(Error::Config(format!("unknown config key {other}")));
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelValue {
    /// Exact rational model value.
    Rational(BigRational),
    /// Anything else, kept verbatim (e.g. an algebraic-number
    /// descriptor such as a root-obj form).
    Algebraic(String),
}

impl std::fmt::Display for ModelValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelValue::Rational(r) => write!(f, "{r}"),
            ModelValue::Algebraic(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverVerdict {
    Unsat,
    Sat(Vec<(String, ModelValue)>),
    Unknown,
    SolverError(String),
}

// ---------------------------------------------------------------------------
// Tolerant s-expression reader for solver output (model syntax uses
// atoms our goal language rejects: `!`, `^`, decimals, ...).
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Out {
    Atom(String),
    Str(String),
    List(Vec<Out>),
}

impl std::fmt::Display for Out {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Out::Atom(a) => f.write_str(a),
            Out::Str(s) => write!(f, "{s:?}"),
            Out::List(items) => {
                f.write_str("(")?;
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{it}")?;
                }
                f.write_str(")")
            }
        }
    }
}

fn read_out(text: &str) -> std::result::Result<Vec<Out>, String> {
    let mut stack: Vec<Vec<Out>> = vec![Vec::new()];
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' => stack.push(Vec::new()),
            ')' => {
                let done = stack.pop().ok_or("unbalanced )")?;
                stack
                    .last_mut()
                    .ok_or("unbalanced )")?
                    .push(Out::List(done));
            }
            '"' => {
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('"') => break,
                        Some(c) => s.push(c),
                        None => return Err("unterminated string".to_string()),
                    }
                }
                stack.last_mut().unwrap().push(Out::Str(s));
            }
            ';' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            c if c.is_whitespace() => {}
            c => {
                let mut a = String::from(c);
                while let Some(&n) = chars.peek() {
                    if n.is_whitespace() || n == '(' || n == ')' || n == '"' || n == ';' {
                        break;
                    }
                    a.push(n);
                    chars.next();
                }
                stack.last_mut().unwrap().push(Out::Atom(a));
            }
        }
    }
    if stack.len() != 1 {
        return Err("unbalanced (".to_string());
    }
    Ok(stack.pop().unwrap())
}

fn numeral_of(atom: &str) -> Option<BigRational> {
    if let Ok(n) = atom.parse::<BigInt>() {
        return Some(BigRational::from_integer(n));
    }
    // decimal: digits '.' digits
    let (int_part, frac_part) = atom.split_once('.')?;
    if int_part.is_empty()
        || frac_part.is_empty()
        || !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
    let num = int_part.parse::<BigInt>().ok()? * &scale + frac_part.parse::<BigInt>().ok()?;
    Some(BigRational::new(num, scale))
}

fn rational_of(out: &Out) -> Option<BigRational> {
    match out {
        Out::Atom(a) => numeral_of(a),
        Out::List(items) => match items.as_slice() {
            [Out::Atom(op), x] if op == "-" => Some(-rational_of(x)?),
            [Out::Atom(op), x, y] if op == "/" => {
                let d = rational_of(y)?;
                if d.is_zero() {
                    None
                } else {
                    Some(rational_of(x)? / d)
                }
            }
            _ => None,
        },
        Out::Str(_) => None,
    }
}

fn collect_define_funs(out: &Out, assigns: &mut Vec<(String, ModelValue)>) {
    if let Out::List(items) = out {
        match items.as_slice() {
            // (define-fun name () Sort body)
            [Out::Atom(df), Out::Atom(name), Out::List(args), _sort, body]
                if df == "define-fun" && args.is_empty() =>
            {
                let value = match rational_of(body) {
                    Some(r) => ModelValue::Rational(r),
                    None => ModelValue::Algebraic(body.to_string()),
                };
                assigns.push((name.clone(), value));
            }
            _ => {
                for it in items {
                    collect_define_funs(it, assigns);
                }
            }
        }
    }
}

/// Parse `(get-model)` output: each zero-argument define-fun becomes an
/// assignment; rational bodies are evaluated exactly, everything else is
/// kept verbatim as an algebraic descriptor.
pub fn parse_model(text: &str) -> Result<Vec<(String, ModelValue)>> {
    let forms = read_out(text).map_err(|e| Error::Solver(format!("model parse: {e}")))?;
    let mut assigns = Vec::new();
    for f in &forms {
        collect_define_funs(f, &mut assigns);
    }
    Ok(assigns)
}

/// Run the solver on `script`. Classification is token-driven: any line
/// reading `unsat` wins (warnings are ignored), then `sat` (with the
/// model parsed from the remaining output), then `unknown`; anything
/// else is a solver error carrying the raw output.
pub fn run_solver(script: &str, cfg: &SolverConfig) -> SolverVerdict {
    match run_solver_inner(script, cfg) {
        Ok(v) => v,
        Err(e) => SolverVerdict::SolverError(e.to_string()),
    }
}

fn run_solver_inner(script: &str, cfg: &SolverConfig) -> Result<SolverVerdict> {
    cfg.validate()?;
    let mut file = tempfile::Builder::new()
        .prefix("query-")
        .suffix(".smt2")
        .tempfile()?;
    file.write_all(script.as_bytes())?;
    file.flush()?;
    let path = file.path().to_path_buf();

    let mut args: Vec<String> = cfg.command[1..].to_vec();
    let mut file_placed = false;
    for a in args.iter_mut() {
        if a == "{file}" {
            *a = path.display().to_string();
            file_placed = true;
        }
    }
    if !file_placed {
        args.push(path.display().to_string());
    }

    let mut command = Command::new(&cfg.command[0]);
    command
        .args(&args)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    if let Some(dir) = &cfg.working_dir {
        command.current_dir(dir);
    }
    let mut child = command
        .spawn()
        .map_err(|e| Error::Solver(format!("failed to spawn {}: {e}", cfg.command[0])))?;

    // Drain the pipes on threads so a chatty solver cannot deadlock.
    let mut stdout = child.stdout.take().expect("piped stdout");
    let mut stderr = child.stderr.take().expect("piped stderr");
    let out_thread = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let err_thread = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        s
    });

    let deadline = Instant::now() + cfg.timeout;
    loop {
        match child.try_wait()? {
            Some(_) => break,
            None => {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Ok(SolverVerdict::SolverError(format!(
                        "solver timed out after {:?} and was killed",
                        cfg.timeout
                    )));
                }
                std::thread::sleep(Duration::from_millis(5));
            }
        }
    }
    let out = out_thread.join().unwrap_or_default();
    let err = err_thread.join().unwrap_or_default();

    classify_output(&out, &err)
}

fn classify_output(out: &str, err: &str) -> Result<SolverVerdict> {
    let lines: Vec<&str> = out.lines().map(|l| l.trim()).collect();
    if lines.iter().any(|&l| l == "unsat") {
        return Ok(SolverVerdict::Unsat);
    }
    if let Some(pos) = lines.iter().position(|&l| l == "sat") {
        let rest = lines[pos + 1..].join("\n");
        let model = parse_model(&rest)?;
        return Ok(SolverVerdict::Sat(model));
    }
    if lines.iter().any(|&l| l == "unknown") {
        return Ok(SolverVerdict::Unknown);
    }
    Ok(SolverVerdict::SolverError(format!(
        "unrecognized solver output:\n{out}{err}"
    )))
}

/// Resolve the solver executable on PATH and return its SHA-256, for the
/// run report. Reporting only; never enforced.
pub fn solver_checksum(executable: &str) -> Option<String> {
    let path = if executable.contains('/') {
        PathBuf::from(executable)
    } else {
        std::env::var_os("PATH")?
            .to_str()?
            .split(':')
            .map(|d| Path::new(d).join(executable))
            .find(|p| p.is_file())?
    };
    let bytes = std::fs::read(path).ok()?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Some(format!("{:x}", hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn parses_rational_model() {
        let m = parse_model("(model (define-fun x () Real (/ 1 2)))").unwrap();
        assert_eq!(m, vec![("x".to_string(), ModelValue::Rational(rat(1, 2)))]);
    }

    #[test]
    fn parses_negative_decimal() {
        let m = parse_model("((define-fun x () Real (- 2.0)))").unwrap();
        assert_eq!(m, vec![("x".to_string(), ModelValue::Rational(rat(-2, 1)))]);
    }

    #[test]
    fn root_obj_kept_verbatim() {
        let m =
            parse_model("((define-fun x () Real (root-obj (+ (^ x 2) (- 2)) 1)))").unwrap();
        assert_eq!(
            m,
            vec![(
                "x".to_string(),
                ModelValue::Algebraic("(root-obj (+ (^ x 2) (- 2)) 1)".to_string())
            )]
        );
    }

    #[test]
    fn unsat_wins_over_trailing_noise() {
        let v = classify_output("unsat\n(error \"model is not available\")\n", "").unwrap();
        assert_eq!(v, SolverVerdict::Unsat);
    }

    #[test]
    fn unknown_detected() {
        let v = classify_output("unknown\n", "").unwrap();
        assert_eq!(v, SolverVerdict::Unknown);
    }

    #[test]
    fn banter_is_solver_error() {
        let v = classify_output("Welcome to FrobSolve 0.1!\n", "").unwrap();
        assert!(matches!(v, SolverVerdict::SolverError(msg) if msg.contains("FrobSolve")));
    }

    #[test]
    fn sat_with_model() {
        let v = classify_output("sat\n(model (define-fun y () Real 3.0))\n", "").unwrap();
        match v {
            SolverVerdict::Sat(m) => {
                assert_eq!(m, vec![("y".to_string(), ModelValue::Rational(rat(3, 1)))]);
            }
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn timeout_kills_subprocess() {
        let cfg = SolverConfig {
            command: vec![
                "sh".to_string(),
                "-c".to_string(),
                "sleep 30".to_string(),
                "{file}".to_string(),
            ],
            timeout: Duration::from_millis(100),
            working_dir: None,
        };
        let start = Instant::now();
        let v = run_solver("(check-sat)", &cfg);
        assert!(start.elapsed() < Duration::from_secs(5));
        assert!(matches!(v, SolverVerdict::SolverError(msg) if msg.contains("timed out")));
    }

    #[test]
    fn spawn_failure_reported() {
        let cfg = SolverConfig {
            command: vec!["definitely-not-a-solver-binary".to_string()],
            ..SolverConfig::default()
        };
        let v = run_solver("(check-sat)", &cfg);
        assert!(matches!(v, SolverVerdict::SolverError(msg) if msg.contains("spawn")));
    }

    #[test]
    fn echo_solver_end_to_end() {
        // A stand-in solver that ignores the script and answers unsat.
        let cfg = SolverConfig {
            command: vec![
                "sh".to_string(),
                "-c".to_string(),
                "echo unsat".to_string(),
                "{file}".to_string(),
            ],
            timeout: Duration::from_secs(5),
            working_dir: None,
        };
        assert_eq!(run_solver("(check-sat)", &cfg), SolverVerdict::Unsat);
    }

    #[test]
    fn config_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bridge.conf");
        std::fs::write(&path, "# local pin\nsolver = z3 -smt2\ntimeout = 60\n").unwrap();
        let cfg = load_config(&path).unwrap();
        assert_eq!(cfg.command, vec!["z3".to_string(), "-smt2".to_string()]);
        assert_eq!(cfg.timeout, Duration::from_secs(60));
        std::fs::write(&path, "solvr = z3\n").unwrap();
        assert!(load_config(&path).is_err());
    }
}
