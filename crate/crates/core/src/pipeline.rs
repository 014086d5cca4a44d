//! End-to-end orchestration: phase 1, optional expt saturation, phase 2
//! emission, solver run, obligation construction and checking, gathered
//! into a run report with a trust tag.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::emit::{emit_query, var_sorts_of, SmtQuery};
use crate::error::Result;
use crate::exptrw::{antecedent_chain, FiredRule, Rewriter, SaturationConfig};
use crate::goalfile::GoalFile;
use crate::obligations::{build_obligations, check_obligations, ClauseReport, ObligationSet};
use crate::oracle::{SamplerConfig, Verdict};
use crate::phase1::{add_hypotheses, run_phase1, Phase1Output};
use crate::solver::{run_solver, solver_checksum, SolverConfig, SolverVerdict};
use crate::term::print;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrustTag {
    Standard,
    CustomConfig,
}

impl TrustTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrustTag::Standard => "standard",
            TrustTag::CustomConfig => "custom-config",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Proved,
    Counterexample,
    Unknown,
    ObligationFalsified,
    SolverFailed,
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Proved => 0,
            Status::Counterexample | Status::Unknown | Status::ObligationFalsified => 1,
            Status::SolverFailed => 3,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Proved => "proved",
            Status::Counterexample => "counterexample",
            Status::Unknown => "unknown",
            Status::ObligationFalsified => "obligation-falsified",
            Status::SolverFailed => "solver-error",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub solver: SolverConfig,
    /// Enable the RewriteExpt customization; stamps the custom trust tag.
    pub custom: bool,
    /// CLI overrode the pinned solver command; stamps the custom tag.
    pub solver_overridden: bool,
    pub saturation: SaturationConfig,
    pub sampler: SamplerConfig,
    /// Check Q1/Q2 by falsification after an unsat verdict.
    pub check_obligations: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            solver: SolverConfig::default(),
            custom: false,
            solver_overridden: false,
            saturation: SaturationConfig::default(),
            sampler: SamplerConfig::default(),
            check_obligations: true,
        }
    }
}

#[derive(Debug)]
pub struct RunReport {
    pub goal_id: String,
    pub trust_tag: TrustTag,
    pub status: Status,
    pub solver_verdict: SolverVerdict,
    pub obligation_reports: Vec<ClauseReport>,
    pub fired_rules: Vec<FiredRule>,
    pub warnings: Vec<String>,
    pub timings: Vec<(&'static str, Duration)>,
    pub solver_checksum: Option<String>,
}

/// Phase 1 plus (under `--custom`) expt saturation; the derived facts
/// are appended to the added hypotheses and G′ is rebuilt.
pub fn prepare(gf: &GoalFile, opts: &PipelineOptions) -> Result<(Phase1Output, Vec<FiredRule>)> {
    let mut p1 = run_phase1(&gf.goal, &gf.hints, &gf.defs)?;
    let mut fired = Vec::new();
    if opts.custom && p1.uninterp.iter().any(|u| u.name == "expt") {
        let (var_sorts, _) = var_sorts_of(&p1)?;
        let rw = Rewriter {
            var_sorts: &var_sorts,
            uninterp: p1
                .uninterp
                .iter()
                .map(|u| (u.name.clone(), u.arg_types.len()))
                .collect(),
            solver: opts.solver.clone(),
            cfg: opts.saturation.clone(),
        };
        let sat = rw.derive_facts(&p1.g_prime, &antecedent_chain(&p1.g_prime))?;
        if !sat.facts.is_empty() {
            let mut hyps = p1.added_hyps.clone();
            hyps.extend(sat.facts.clone());
            let known = p1
                .g_f
                .free_vars()
                .into_iter()
                .chain(p1.type_hyps.iter().map(|h| h.var.clone()))
                .collect();
            p1.g_prime = add_hypotheses(&p1.g_f, &hyps, &known)?;
            p1.added_hyps = hyps;
        }
        fired = sat.fired;
    }
    Ok((p1, fired))
}

/// Run the full pipeline on a parsed goal file.
pub fn run_prove(gf: &GoalFile, goal_id: &str, opts: &PipelineOptions) -> Result<RunReport> {
    let mut timings = Vec::new();

    let t = Instant::now();
    let (p1, fired_rules) = prepare(gf, opts)?;
    timings.push(("phase1", t.elapsed()));

    let t = Instant::now();
    let query = emit_query(&p1)?;
    timings.push(("emit", t.elapsed()));

    let t = Instant::now();
    let solver_verdict = run_solver(&query.script, &opts.solver);
    timings.push(("solver", t.elapsed()));

    let t = Instant::now();
    let (status, obligation_reports) = match &solver_verdict {
        SolverVerdict::Unsat => {
            if opts.check_obligations {
                let obs = build_obligations(&p1);
                let reports = check_obligations(&obs, &opts.sampler, &gf.defs);
                let falsified = reports
                    .iter()
                    .any(|r| matches!(r.verdict, Verdict::Falsified(_)));
                let status = if falsified {
                    Status::ObligationFalsified
                } else {
                    Status::Proved
                };
                (status, reports)
            } else {
                (Status::Proved, Vec::new())
            }
        }
        SolverVerdict::Sat(_) => (Status::Counterexample, Vec::new()),
        SolverVerdict::Unknown => (Status::Unknown, Vec::new()),
        SolverVerdict::SolverError(_) => (Status::SolverFailed, Vec::new()),
    };
    timings.push(("obligations", t.elapsed()));

    let trust_tag = if opts.custom || opts.solver_overridden {
        TrustTag::CustomConfig
    } else {
        TrustTag::Standard
    };

    Ok(RunReport {
        goal_id: goal_id.to_string(),
        trust_tag,
        status,
        solver_verdict,
        obligation_reports,
        fired_rules,
        warnings: query.warnings.clone(),
        timings,
        solver_checksum: solver_checksum(&opts.solver.command[0]),
    })
}

/// Build (without solving or checking) everything `emit` needs to dump.
pub fn run_emit(
    gf: &GoalFile,
    opts: &PipelineOptions,
) -> Result<(Phase1Output, SmtQuery, ObligationSet)> {
    let (p1, _) = prepare(gf, opts)?;
    let query = emit_query(&p1)?;
    let obs = build_obligations(&p1);
    Ok((p1, query, obs))
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

pub fn render_human(r: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "goal:      {}", r.goal_id);
    let _ = writeln!(out, "trust:     {}", r.trust_tag.as_str());
    let _ = writeln!(out, "status:    {}", r.status.as_str());
    match &r.solver_verdict {
        SolverVerdict::Unsat => {
            let _ = writeln!(out, "solver:    unsat");
        }
        SolverVerdict::Sat(model) => {
            let _ = writeln!(out, "solver:    sat (counterexample)");
            for (name, value) in model {
                let _ = writeln!(out, "  {name} = {value}");
            }
        }
        SolverVerdict::Unknown => {
            let _ = writeln!(out, "solver:    unknown");
        }
        SolverVerdict::SolverError(msg) => {
            let _ = writeln!(out, "solver:    error: {msg}");
        }
    }
    for w in &r.warnings {
        let _ = writeln!(out, "warning:   {w}");
    }
    for f in &r.fired_rules {
        let _ = writeln!(
            out,
            "expt rule {} fired: {}  [guard: {}]",
            f.rule,
            print(&f.fact),
            f.guard
        );
    }
    for o in &r.obligation_reports {
        let tag = o
            .provenance
            .map(|p| format!(" [{p}]"))
            .unwrap_or_default();
        match &o.verdict {
            Verdict::Pass => {
                let _ = writeln!(out, "obligation {}{tag}: pass (not falsified)", o.label);
            }
            Verdict::Inconclusive => {
                let _ = writeln!(out, "obligation {}{tag}: inconclusive", o.label);
            }
            Verdict::Falsified(v) => {
                let _ = writeln!(out, "obligation {}{tag}: FALSIFIED", o.label);
                for (name, value) in v {
                    let _ = writeln!(out, "  {name} = {}", value.to_goal_syntax());
                }
            }
        }
    }
    if let Some(sum) = &r.solver_checksum {
        let _ = writeln!(out, "solver sha256: {sum}");
    }
    for (phase, d) in &r.timings {
        let _ = writeln!(out, "time {phase}: {:.3}s", d.as_secs_f64());
    }
    out
}

pub fn render_sexp(r: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(run-report");
    let _ = writeln!(out, "  (goal {})", r.goal_id);
    let _ = writeln!(out, "  (trust-tag {})", r.trust_tag.as_str());
    let _ = writeln!(out, "  (status {})", r.status.as_str());
    match &r.solver_verdict {
        SolverVerdict::Unsat => {
            let _ = writeln!(out, "  (solver unsat)");
        }
        SolverVerdict::Sat(model) => {
            let _ = write!(out, "  (solver sat (model");
            for (name, value) in model {
                let _ = write!(out, " ({name} {value})");
            }
            let _ = writeln!(out, "))");
        }
        SolverVerdict::Unknown => {
            let _ = writeln!(out, "  (solver unknown)");
        }
        SolverVerdict::SolverError(msg) => {
            let _ = writeln!(out, "  (solver (error {msg:?}))");
        }
    }
    for f in &r.fired_rules {
        let _ = writeln!(
            out,
            "  (expt-rule {} {} (guard {:?}))",
            f.rule,
            print(&f.fact),
            f.guard
        );
    }
    for o in &r.obligation_reports {
        let tag = o.provenance.map(|p| p.tag()).unwrap_or("q1");
        let verdict = match &o.verdict {
            Verdict::Pass => "pass".to_string(),
            Verdict::Inconclusive => "inconclusive".to_string(),
            Verdict::Falsified(v) => {
                let mut s = "(falsified".to_string();
                for (name, value) in v {
                    let _ = write!(s, " ({name} {})", value.to_goal_syntax());
                }
                s.push(')');
                s
            }
        };
        let _ = writeln!(out, "  (obligation {} {tag} {verdict})", o.label);
    }
    if let Some(sum) = &r.solver_checksum {
        let _ = writeln!(out, "  (solver-sha256 {sum})");
    }
    let _ = writeln!(out, ")");
    out
}

/// s-expression dump of a phase-1 result for `--emit-phase1`.
pub fn render_phase1(p1: &Phase1Output) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(phase1");
    let _ = writeln!(out, "  (goal {})", print(&p1.original.clause));
    let _ = writeln!(out, "  (g-t {})", print(&p1.g_t));
    let _ = writeln!(out, "  (g-f {})", print(&p1.g_f));
    let _ = writeln!(out, "  (g-prime {})", print(&p1.g_prime));
    let _ = write!(out, "  (type-hyps");
    for h in &p1.type_hyps {
        let origin = match h.origin {
            crate::phase1::Origin::Goal => "goal",
            crate::phase1::Origin::ExpansionCut => "expansion-cut",
            crate::phase1::Origin::LetBinding => "let-binding",
        };
        let _ = write!(out, " ({} {} {origin})", h.recognizer.name(), h.var);
    }
    let _ = writeln!(out, ")");
    let _ = write!(out, "  (fn-calls");
    for c in &p1.fn_calls {
        let fresh = c.fresh_var.as_deref().unwrap_or("nil");
        let _ = write!(
            out,
            " ({} {} {fresh})",
            print(&c.call),
            c.claimed_type.name()
        );
    }
    let _ = writeln!(out, ")");
    let _ = write!(out, "  (uninterpreted");
    for u in &p1.uninterp {
        let _ = write!(out, " ({}", u.name);
        for a in &u.arg_types {
            let _ = write!(out, " {}", a.name());
        }
        let _ = write!(out, " {})", u.return_type.name());
    }
    let _ = writeln!(out, ")");
    let _ = write!(out, "  (substitutions");
    for (src, v) in &p1.substitutions {
        let _ = write!(out, " ({v} {})", print(src));
    }
    let _ = writeln!(out, ")");
    let _ = write!(out, "  (added-hyps");
    for h in &p1.added_hyps {
        let _ = write!(out, " {}", print(h));
    }
    let _ = writeln!(out, "))");
    out
}

/// One s-expression per clause with its provenance, for
/// `--emit-obligations`.
pub fn render_obligations(obs: &ObligationSet) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(obligation q1 {})", print(&obs.q1));
    for (i, c) in obs.q2_conjuncts.iter().enumerate() {
        let _ = writeln!(
            out,
            "(obligation q2.{} {} {})",
            i + 1,
            c.provenance.tag(),
            print(&c.clause)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::goalfile::parse_goal_file;

    fn echo_opts(answer: &str) -> PipelineOptions {
        PipelineOptions {
            solver: SolverConfig {
                command: vec![
                    "sh".to_string(),
                    "-c".to_string(),
                    format!("echo {answer}"),
                    "{file}".to_string(),
                ],
                timeout: Duration::from_secs(5),
                working_dir: None,
            },
            ..PipelineOptions::default()
        }
    }

    #[test]
    fn proved_requires_unsat_and_obligations() {
        let gf = parse_goal_file(
            "(goal (implies (if (rationalp x) (rationalp y) nil)
                            (equal (equal x y) (equal (binary-+ x (unary-- y)) 0))))",
        )
        .unwrap();
        let r = run_prove(&gf, "g", &echo_opts("unsat")).unwrap();
        assert_eq!(r.status, Status::Proved);
        assert_eq!(r.status.exit_code(), 0);
        assert!(r.obligation_reports.len() >= 3);

        let r = run_prove(&gf, "g", &echo_opts("unknown")).unwrap();
        assert_eq!(r.status, Status::Unknown);
        assert_eq!(r.status.exit_code(), 1);
    }

    #[test]
    fn translation_error_propagates() {
        let gf = parse_goal_file("(goal (equal (mystery x) 0))").unwrap();
        let err = run_prove(&gf, "g", &echo_opts("unsat"));
        assert_eq!(err.unwrap_err().exit_code(), 2);
    }

    #[test]
    fn trust_tag_follows_flags() {
        let gf = parse_goal_file("(goal (implies (rationalp x) (equal x x)))").unwrap();
        let mut opts = echo_opts("unsat");
        let r = run_prove(&gf, "g", &opts).unwrap();
        assert_eq!(r.trust_tag, TrustTag::Standard);
        opts.custom = true;
        let r = run_prove(&gf, "g", &opts).unwrap();
        assert_eq!(r.trust_tag, TrustTag::CustomConfig);
        opts.custom = false;
        opts.solver_overridden = true;
        let r = run_prove(&gf, "g", &opts).unwrap();
        assert_eq!(r.trust_tag, TrustTag::CustomConfig);
    }

    #[test]
    fn custom_saturation_adds_facts_to_hypotheses() {
        // With an always-proving solver, rule 5 fires for the two
        // same-base instances and the fact lands in added_hyps.
        let gf = parse_goal_file(
            "(hints (:uninterpreted-functions ((expt rationalp integerp rationalp))))
             (goal (implies (if (rationalp z) (if (integerp m) (integerp n) nil) nil)
                            (< (expt z m) (expt z n))))",
        )
        .unwrap();
        let mut opts = echo_opts("unsat");
        opts.custom = true;
        let (p1, fired) = prepare(&gf, &opts).unwrap();
        assert!(!fired.is_empty());
        assert!(!p1.added_hyps.is_empty());
        assert!(crate::term::print(&p1.g_prime).contains("expt"));
    }

    #[test]
    fn renders_are_stable() {
        let gf = parse_goal_file(
            "(goal (implies (rationalp x) (equal (binary-+ x 0) x)))",
        )
        .unwrap();
        let r = run_prove(&gf, "stable", &echo_opts("unsat")).unwrap();
        let s = render_sexp(&r);
        assert!(s.contains("(status proved)"));
        assert!(s.contains("(trust-tag standard)"));
        let h = render_human(&r);
        assert!(h.contains("status:    proved"));

        let (p1, _, obs) = run_emit(&gf, &echo_opts("unsat")).unwrap();
        assert!(render_phase1(&p1).contains("(rationalp x goal)"));
        assert!(render_obligations(&obs).starts_with("(obligation q1 "));
    }
}
