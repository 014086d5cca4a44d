//! RewriteExpt customization: before solving, saturate the query with
//! guarded facts about the uninterpreted `expt`, each justified by a
//! solver-checked side condition. Enabled only under `--custom`; every
//! derived fact is appended to the added hypotheses, so it shows up in
//! the returned Q2 obligations like any user hypothesis.
//!
//! Rules (the hard-coded list):
//!   1. (expt x 0) = 1
//!   2. (expt 0 n) = 0                    if n > 0 provable
//!   3. (expt x (+ n1 n2)) = (expt x n1) * (expt x n2)
//!   4. (expt x (* c n)) = c-fold product of (expt x n)   (literal 1 ≤ c ≤ bound)
//!   5. (expt x m) < (expt x n)           if 1 < x and m < n provable
//!
//! Every instance must satisfy the guard: base nonzero or exponent
//! nonnegative. Rules 3 and 4 only introduce new instances that pass the
//! same guard.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::Duration;

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use crate::emit::{translate_with_uninterp, Sort};
use crate::error::{Error, Result};
use crate::solver::{run_solver, SolverConfig, SolverVerdict};
use crate::term::{Ident, Term};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExptInstance {
    pub base: Term,
    pub exponent: Term,
}

impl ExptInstance {
    pub fn as_term(&self) -> Term {
        Term::app("expt", vec![self.base.clone(), self.exponent.clone()])
    }
}

impl std::fmt::Display for ExptInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_term())
    }
}

#[derive(Debug, Clone)]
pub struct SaturationConfig {
    pub max_rounds: u32,
    pub small_c_bound: u32,
    pub guard_timeout: Duration,
}

impl Default for SaturationConfig {
    fn default() -> Self {
        SaturationConfig {
            max_rounds: 3,
            small_c_bound: 4,
            guard_timeout: Duration::from_secs(2),
        }
    }
}

/// All `(expt base exponent)` applications in a term, deduplicated,
/// in traversal order.
pub fn collect_instances(term: &Term) -> Vec<ExptInstance> {
    fn walk(term: &Term, out: &mut Vec<ExptInstance>) {
        match term {
            Term::App(h, args) => {
                if h == "expt" && args.len() == 2 {
                    let inst = ExptInstance {
                        base: args[0].clone(),
                        exponent: args[1].clone(),
                    };
                    if !out.contains(&inst) {
                        out.push(inst);
                    }
                }
                for a in args {
                    walk(a, out);
                }
            }
            Term::Lambda { body, actuals, .. } => {
                walk(body, out);
                for a in actuals {
                    walk(a, out);
                }
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    walk(term, &mut out);
    out
}

/// The conjuncts of the antecedent chain of `g_prime`: for each nested
/// `(implies H body)` the and-flattened conjuncts of H.
pub fn antecedent_chain(g_prime: &Term) -> Vec<Term> {
    fn flatten_and(term: &Term, out: &mut Vec<Term>) {
        if let Term::App(h, args) = term {
            if h == "if" && args.len() == 3 && args[2].is_nil() {
                flatten_and(&args[0], out);
                flatten_and(&args[1], out);
                return;
            }
        }
        if !term.is_t() {
            out.push(term.clone());
        }
    }
    let mut out = Vec::new();
    let mut cur = g_prime;
    while let Term::App(h, args) = cur {
        if h == "implies" && args.len() == 2 {
            flatten_and(&args[0], &mut out);
            cur = &args[1];
        } else {
            break;
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct FiredRule {
    pub rule: u8,
    pub fact: Term,
    /// The side condition that was solver-checked, as SMT text
    /// ("syntactic" when the rule needs none).
    pub guard: String,
}

#[derive(Debug, Clone, Default)]
pub struct SaturationResult {
    /// Derived facts, canonicalized (sorted by print form, deduplicated).
    pub facts: Vec<Term>,
    pub fired: Vec<FiredRule>,
}

pub struct Rewriter<'a> {
    pub var_sorts: &'a BTreeMap<Ident, Sort>,
    /// name -> arity of the declared uninterpreted functions (must
    /// contain `expt` for the rewriter to have anything to do).
    pub uninterp: BTreeMap<Ident, usize>,
    pub solver: SolverConfig,
    pub cfg: SaturationConfig,
}

impl<'a> Rewriter<'a> {
    fn guard_solver(&self) -> SolverConfig {
        SolverConfig {
            timeout: self.cfg.guard_timeout,
            ..self.solver.clone()
        }
    }

    /// Solver-prove `hyps ⇒ claim` by refuting the negation. Unknown and
    /// sat both count as "not proved"; solver errors propagate.
    fn prove(&self, hyps: &[Term], claim: &str) -> Result<bool> {
        let mut script = String::new();
        let _ = writeln!(script, "(set-logic QF_UFNRA)");
        for (v, sort) in self.var_sorts {
            let _ = writeln!(script, "(declare-const {v} {sort})");
        }
        for (name, arity) in &self.uninterp {
            let args = vec!["Real"; *arity].join(" ");
            let _ = writeln!(script, "(declare-fun {name} ({args}) Real)");
        }
        for h in hyps {
            let text = translate_with_uninterp(h, self.var_sorts, &self.uninterp)?;
            let _ = writeln!(script, "(assert {text})");
        }
        let _ = writeln!(script, "(assert (not {claim}))");
        let _ = writeln!(script, "(check-sat)");
        match run_solver(&script, &self.guard_solver()) {
            SolverVerdict::Unsat => Ok(true),
            SolverVerdict::Sat(_) | SolverVerdict::Unknown => Ok(false),
            SolverVerdict::SolverError(msg) => Err(Error::Solver(msg)),
        }
    }

    fn guard_claim(&self, inst: &ExptInstance) -> Result<String> {
        let b = translate_with_uninterp(&inst.base, self.var_sorts, &self.uninterp)?;
        let e = translate_with_uninterp(&inst.exponent, self.var_sorts, &self.uninterp)?;
        Ok(format!("(or (distinct {b} 0) (<= 0 {e}))"))
    }

    /// The paper's guard: the base must be nonzero or the exponent
    /// nonnegative, provable from the hypotheses.
    pub fn check_guard(&self, inst: &ExptInstance, hyps: &[Term]) -> Result<bool> {
        self.prove(hyps, &self.guard_claim(inst)?)
    }

    /// Saturate: derive guarded facts from the expt instances of
    /// `g_prime` under the hypothesis set (antecedent chain + previously
    /// added hypotheses). Errors if any instance fails its guard.
    pub fn derive_facts(&self, g_prime: &Term, base_hyps: &[Term]) -> Result<SaturationResult> {
        let mut instances = collect_instances(g_prime);
        if instances.is_empty() {
            return Ok(SaturationResult::default());
        }
        let mut hyps: Vec<Term> = base_hyps.to_vec();
        for inst in &instances {
            if !self.check_guard(inst, &hyps)? {
                return Err(Error::Guard(format!(
                    "cannot prove guard for {}: the base must be nonzero or \
                     the exponent nonnegative",
                    inst.as_term()
                )));
            }
        }

        let mut seen: BTreeSet<String> = BTreeSet::new();
        let mut result = SaturationResult::default();
        fn add_fact(
            rule: u8,
            fact: Term,
            guard: String,
            seen: &mut BTreeSet<String>,
            result: &mut SaturationResult,
            hyps: &mut Vec<Term>,
        ) -> bool {
            if seen.insert(fact.to_string()) {
                hyps.push(fact.clone());
                result.fired.push(FiredRule {
                    rule,
                    fact: fact.clone(),
                    guard,
                });
                result.facts.push(fact);
                true
            } else {
                false
            }
        }

        for _round in 0..self.cfg.max_rounds {
            let mut changed = false;
            let mut new_instances: Vec<ExptInstance> = Vec::new();

            for inst in &instances {
                let x = &inst.base;
                let e = &inst.exponent;

                // Rule 1: (expt x 0) = 1
                if matches!(e, Term::Int(n) if n == &BigInt::from(0)) {
                    let fact = Term::app(
                        "equal",
                        vec![inst.as_term(), Term::int(1)],
                    );
                    changed |= add_fact(1, fact, "syntactic".to_string(), &mut seen, &mut result, &mut hyps);
                }

                // Rule 2: (expt 0 n) = 0 if n > 0
                if matches!(x, Term::Int(n) if n == &BigInt::from(0)) {
                    let en = translate_with_uninterp(e, self.var_sorts, &self.uninterp)?;
                    let claim = format!("(< 0 {en})");
                    if self.prove(&hyps, &claim)? {
                        let fact = Term::app("equal", vec![inst.as_term(), Term::int(0)]);
                        changed |= add_fact(2, fact, claim, &mut seen, &mut result, &mut hyps);
                    }
                }

                // Rule 3: split a syntactically-sum exponent.
                if let Term::App(h, parts) = e {
                    if h == "binary-+" && parts.len() == 2 {
                        let left = ExptInstance {
                            base: x.clone(),
                            exponent: parts[0].clone(),
                        };
                        let right = ExptInstance {
                            base: x.clone(),
                            exponent: parts[1].clone(),
                        };
                        if self.check_guard(&left, &hyps)? && self.check_guard(&right, &hyps)? {
                            let fact = Term::app(
                                "equal",
                                vec![
                                    inst.as_term(),
                                    Term::app(
                                        "binary-*",
                                        vec![left.as_term(), right.as_term()],
                                    ),
                                ],
                            );
                            let guard = format!(
                                "(and {} {})",
                                self.guard_claim(&left)?,
                                self.guard_claim(&right)?
                            );
                            if add_fact(3, fact, guard, &mut seen, &mut result, &mut hyps) {
                                changed = true;
                                new_instances.push(left);
                                new_instances.push(right);
                            }
                        }
                    }
                }

                // Rule 4: literal small positive multiplier.
                if let Term::App(h, parts) = e {
                    if h == "binary-*" && parts.len() == 2 {
                        if let Term::Int(c) = &parts[0] {
                            if let Some(c) = c.to_u32().filter(|&c| {
                                c >= 1 && c <= self.cfg.small_c_bound
                            }) {
                                let unit = ExptInstance {
                                    base: x.clone(),
                                    exponent: parts[1].clone(),
                                };
                                if self.check_guard(&unit, &hyps)? {
                                    let mut prod = unit.as_term();
                                    for _ in 1..c {
                                        prod = Term::app(
                                            "binary-*",
                                            vec![unit.as_term(), prod],
                                        );
                                    }
                                    let fact =
                                        Term::app("equal", vec![inst.as_term(), prod]);
                                    let guard = self.guard_claim(&unit)?;
                                    if add_fact(4, fact, guard, &mut seen, &mut result, &mut hyps) {
                                        changed = true;
                                        new_instances.push(unit);
                                    }
                                }
                            }
                        }
                    }
                }
            }

            // Rule 5: pairwise monotonicity for same-base instances.
            for i in &instances {
                for j in &instances {
                    if i.base != j.base || i.exponent == j.exponent {
                        continue;
                    }
                    let xb = translate_with_uninterp(&i.base, self.var_sorts, &self.uninterp)?;
                    let m = translate_with_uninterp(&i.exponent, self.var_sorts, &self.uninterp)?;
                    let n = translate_with_uninterp(&j.exponent, self.var_sorts, &self.uninterp)?;
                    let claim = format!("(and (< 1 {xb}) (< {m} {n}))");
                    let fact = Term::app("<", vec![i.as_term(), j.as_term()]);
                    if seen.contains(&fact.to_string()) {
                        continue;
                    }
                    if self.prove(&hyps, &claim)? {
                        changed |= add_fact(5, fact, claim, &mut seen, &mut result, &mut hyps);
                    }
                }
            }

            for inst in new_instances {
                if !instances.contains(&inst) {
                    instances.push(inst);
                }
            }
            if !changed {
                break;
            }
        }

        result.facts.sort_by_key(|f| f.to_string());
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::parse_one;

    fn real_vars(names: &[&str]) -> BTreeMap<Ident, Sort> {
        names.iter().map(|n| (n.to_string(), Sort::Real)).collect()
    }

    fn echo_solver(answer: &str) -> SolverConfig {
        SolverConfig {
            command: vec![
                "sh".to_string(),
                "-c".to_string(),
                format!("echo {answer}"),
                "{file}".to_string(),
            ],
            timeout: Duration::from_secs(5),
            working_dir: None,
        }
    }

    fn rewriter<'a>(
        sorts: &'a BTreeMap<Ident, Sort>,
        solver: SolverConfig,
    ) -> Rewriter<'a> {
        Rewriter {
            var_sorts: sorts,
            uninterp: [("expt".to_string(), 2)].into_iter().collect(),
            solver,
            cfg: SaturationConfig::default(),
        }
    }

    #[test]
    fn collects_instances_dedup() {
        let t = parse_one("(< (binary-* (expt z n) (expt z n)) (expt z m))").unwrap();
        let insts = collect_instances(&t);
        assert_eq!(insts.len(), 2);
        assert_eq!(insts[0].exponent, Term::sym("n"));
        assert_eq!(insts[1].exponent, Term::sym("m"));
    }

    #[test]
    fn antecedent_chain_flattens() {
        let t = parse_one(
            "(implies (if (< 0 z) (if t (< z 1) nil) nil) (implies (< m n) (equal m m)))",
        )
        .unwrap();
        let h = antecedent_chain(&t);
        assert_eq!(
            h,
            vec![
                parse_one("(< 0 z)").unwrap(),
                parse_one("(< z 1)").unwrap(),
                parse_one("(< m n)").unwrap()
            ]
        );
    }

    #[test]
    fn rule1_is_syntactic() {
        let sorts = real_vars(&["x"]);
        // A proving solver is still needed for the instance guard.
        let rw = rewriter(&sorts, echo_solver("unsat"));
        let g = parse_one("(equal (expt x 0) 1)").unwrap();
        let res = rw.derive_facts(&g, &[]).unwrap();
        assert!(res
            .facts
            .contains(&parse_one("(equal (expt x 0) 1)").unwrap()));
        assert!(res.fired.iter().any(|f| f.rule == 1));
    }

    #[test]
    fn rule3_splits_sum_exponent() {
        let sorts = real_vars(&["x", "n1", "n2"]);
        let rw = rewriter(&sorts, echo_solver("unsat"));
        let g = parse_one("(equal (expt x (binary-+ n1 n2)) 1)").unwrap();
        let res = rw.derive_facts(&g, &[]).unwrap();
        assert!(res.facts.contains(
            &parse_one(
                "(equal (expt x (binary-+ n1 n2)) (binary-* (expt x n1) (expt x n2)))"
            )
            .unwrap()
        ));
    }

    #[test]
    fn rule4_small_literal_product() {
        let sorts = real_vars(&["x", "n"]);
        let rw = rewriter(&sorts, echo_solver("unsat"));
        let g = parse_one("(equal (expt x (binary-* 3 n)) 1)").unwrap();
        let res = rw.derive_facts(&g, &[]).unwrap();
        assert!(res.facts.contains(
            &parse_one(
                "(equal (expt x (binary-* 3 n)) \
                 (binary-* (expt x n) (binary-* (expt x n) (expt x n))))"
            )
            .unwrap()
        ));
    }

    #[test]
    fn rule4_respects_bound() {
        let sorts = real_vars(&["x", "n"]);
        let mut rw = rewriter(&sorts, echo_solver("unsat"));
        rw.cfg.small_c_bound = 2;
        let g = parse_one("(equal (expt x (binary-* 3 n)) 1)").unwrap();
        let res = rw.derive_facts(&g, &[]).unwrap();
        assert!(res.fired.iter().all(|f| f.rule != 4));
    }

    #[test]
    fn failed_guard_aborts() {
        let sorts = real_vars(&["x", "m"]);
        let rw = rewriter(&sorts, echo_solver("sat"));
        let g = parse_one("(equal (expt x m) 1)").unwrap();
        let err = rw.derive_facts(&g, &[]);
        assert!(matches!(err, Err(Error::Guard(msg)) if msg.contains("(expt x m)")));
    }

    #[test]
    fn no_instances_no_solver_contact() {
        let sorts = real_vars(&["x"]);
        // A broken solver proves derive_facts never ran it.
        let rw = rewriter(
            &sorts,
            SolverConfig {
                command: vec!["no-such-solver".to_string()],
                ..SolverConfig::default()
            },
        );
        let g = parse_one("(equal x x)").unwrap();
        let res = rw.derive_facts(&g, &[]).unwrap();
        assert!(res.facts.is_empty());
    }

    #[test]
    fn facts_are_canonically_ordered() {
        let sorts = real_vars(&["x", "n1", "n2"]);
        let rw = rewriter(&sorts, echo_solver("unsat"));
        let g = parse_one(
            "(equal (expt x (binary-+ n1 n2)) (expt x 0))",
        )
        .unwrap();
        let a = rw.derive_facts(&g, &[]).unwrap();
        let b = rw.derive_facts(&g, &[]).unwrap();
        assert_eq!(a.facts, b.facts);
        let mut sorted = a.facts.clone();
        sorted.sort_by_key(|f| f.to_string());
        assert_eq!(a.facts, sorted);
    }

    // Every fact schema, specialized over the grid with guards honored,
    // holds under the reference power function (criterion-style check
    // lives in the acceptance suite; this is the module-level version).
    #[test]
    fn facts_hold_under_reference_power() {
        use crate::oracle::{reference_expt, Value};
        use num_traits::Zero;
        let bases: Vec<Value> = vec![
            Value::int(-2),
            Value::int(-1),
            Value::rat(-1, 2),
            Value::rat(1, 2),
            Value::int(1),
            Value::int(2),
            Value::int(3),
        ];
        let exps: Vec<i64> = (-4..=4).collect();
        for b in &bases {
            for &e in &exps {
                let guard_ok = !b.as_rat().is_zero() || e >= 0;
                if !guard_ok {
                    continue;
                }
                let p = |k: i64| reference_expt(b, &Value::int(k)).unwrap().as_rat();
                // Rule 1
                assert_eq!(p(0), Value::int(1).as_rat());
                // Rule 3: e = e1 + e2 splits
                for &e1 in &exps {
                    let e2 = e - e1;
                    if (-4..=4).contains(&e2) {
                        assert_eq!(p(e), p(e1) * p(e2), "rule 3 at base {b:?}, {e1}+{e2}");
                    }
                }
                // Rule 4: c-fold product for c in 1..=4 when e = c*n
                for c in 1..=4i64 {
                    if e % c == 0 {
                        let n = e / c;
                        let mut prod = Value::int(1).as_rat();
                        for _ in 0..c {
                            prod *= p(n);
                        }
                        assert_eq!(p(e), prod, "rule 4 at base {b:?}, {c}*{n}");
                    }
                }
                // Rule 5: monotone in the exponent when base > 1
                if b.as_rat() > Value::int(1).as_rat() {
                    for &m in &exps {
                        if m < e {
                            assert!(p(m) < p(e), "rule 5 at base {b:?}, {m} < {e}");
                        }
                    }
                }
            }
        }
        // Rule 2: (expt 0 n) = 0 for n > 0
        for e in 1..=4 {
            assert_eq!(
                reference_expt(&Value::int(0), &Value::int(e)).unwrap().as_rat(),
                Value::int(0).as_rat()
            );
        }
    }
}
