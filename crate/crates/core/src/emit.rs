//! Phase 2: transliterate G′ plus the ledgers into an SMT-LIB v2 script
//! asserting the negation. This is the trusted core: only the nine
//! primitives, declared uninterpreted functions, declared variables, and
//! exact numeric constants may appear; anything else is an error.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::hints::Recognizer;
use crate::phase1::{NameGen, Phase1Output};
use crate::term::{Ident, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sort {
    Bool,
    Real,
}

impl std::fmt::Display for Sort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sort::Bool => "Bool",
            Sort::Real => "Real",
        })
    }
}

/// booleanp is strict; both numeric recognizers widen to Real (the SMT
/// sort's value set must be a superset of the recognizer's).
pub fn map_sort(rec: Recognizer) -> Sort {
    match rec {
        Recognizer::Booleanp => Sort::Bool,
        Recognizer::Integerp | Recognizer::Rationalp => Sort::Real,
    }
}

#[derive(Debug, Clone)]
pub struct SmtQuery {
    /// The full SMT-LIB v2 script, byte-deterministic.
    pub script: String,
    pub var_sorts: BTreeMap<Ident, Sort>,
    /// name -> (argument sorts, return sort)
    pub uninterp_decls: Vec<(Ident, Vec<Sort>, Sort)>,
    /// Reciprocal guards, in goal syntax.
    pub side_conditions: Vec<Term>,
    pub warnings: Vec<String>,
}

/// Reduce every (saturated) lambda application by substitution.
pub fn beta_reduce(term: &Term) -> Term {
    match term {
        Term::App(h, args) => {
            Term::App(h.clone(), args.iter().map(beta_reduce).collect())
        }
        Term::Lambda {
            formals,
            body,
            actuals,
        } => {
            let mapping: Vec<(Ident, Term)> = formals
                .iter()
                .cloned()
                .zip(actuals.iter().map(beta_reduce))
                .collect();
            beta_reduce(&body.subst_vars(&mapping))
        }
        _ => term.clone(),
    }
}

struct Emitter<'a> {
    var_sorts: &'a BTreeMap<Ident, Sort>,
    uninterp: BTreeMap<Ident, usize>, // name -> arity
    names: NameGen,
    /// (fresh symbol, translated argument text, argument term)
    recips: Vec<(Ident, String, Term)>,
}

fn numeral(n: &num_bigint::BigInt) -> String {
    use num_traits::Signed;
    if n.is_negative() {
        format!("(- {})", -n)
    } else {
        n.to_string()
    }
}

impl<'a> Emitter<'a> {
    fn translate(&mut self, term: &Term) -> Result<String> {
        match term {
            Term::Sym(s) if s == "t" => Ok("true".to_string()),
            Term::Sym(s) if s == "nil" => Ok("false".to_string()),
            Term::Sym(s) => {
                if self.var_sorts.contains_key(s) {
                    Ok(s.clone())
                } else {
                    Err(Error::Emit(format!(
                        "undeclared variable {s} (no type hypothesis found for it)"
                    )))
                }
            }
            Term::Int(n) => Ok(numeral(n)),
            Term::Rat(r) => {
                use num_traits::Signed;
                if r.is_negative() {
                    let p = -r;
                    Ok(format!("(- (/ {} {}))", p.numer(), p.denom()))
                } else {
                    Ok(format!("(/ {} {})", r.numer(), r.denom()))
                }
            }
            Term::Str(_) | Term::QuotedSym(_) | Term::QuotedList(_) => Err(Error::Emit(
                format!("quoted data {term} has no SMT counterpart"),
            )),
            Term::Lambda { .. } => {
                // beta_reduce runs first; anything left would be a bug
                Err(Error::Emit(format!("unreduced lambda {term}")))
            }
            Term::App(head, args) => self.translate_app(head, args),
        }
    }

    fn translate_app(&mut self, head: &str, args: &[Term]) -> Result<String> {
        let fixed: Option<(&str, usize)> = match head {
            "implies" => Some(("=>", 2)),
            "if" => Some(("ite", 3)),
            "not" => Some(("not", 1)),
            "equal" => Some(("=", 2)),
            "<" => Some(("<", 2)),
            "binary-+" => Some(("+", 2)),
            "binary-*" => Some(("*", 2)),
            "unary--" => Some(("-", 1)),
            _ => None,
        };
        if let Some((op, arity)) = fixed {
            if args.len() != arity {
                return Err(Error::Emit(format!(
                    "{head} takes {arity} arguments, got {}",
                    args.len()
                )));
            }
            let parts = args
                .iter()
                .map(|a| self.translate(a))
                .collect::<Result<Vec<_>>>()?;
            return Ok(format!("({op} {})", parts.join(" ")));
        }
        if head == "unary-/" {
            if args.len() != 1 {
                return Err(Error::Emit("unary-/ takes one argument".to_string()));
            }
            // Reciprocal: fresh symbol r_k, constrained to be the inverse
            // only when the argument is nonzero (goal semantics give 0
            // there; the SMT version is deliberately more general).
            let m = self.translate(&args[0])?;
            let r = self.names.counted("r");
            self.recips.push((r.clone(), m, args[0].clone()));
            return Ok(r);
        }
        if Recognizer::from_name(head).is_some() {
            return Err(Error::Emit(format!(
                "type recognizer ({head} ...) occurs inside the translated goal"
            )));
        }
        if head == "exists" || head == "forall" {
            return Err(Error::Emit(format!(
                "quantifier {head} cannot be translated"
            )));
        }
        match self.uninterp.get(head) {
            Some(&arity) => {
                if args.len() != arity {
                    return Err(Error::Emit(format!(
                        "{head} declared with {arity} arguments, got {}",
                        args.len()
                    )));
                }
                let parts = args
                    .iter()
                    .map(|a| self.translate(a))
                    .collect::<Result<Vec<_>>>()?;
                if parts.is_empty() {
                    Ok(head.to_string())
                } else {
                    Ok(format!("({head} {})", parts.join(" ")))
                }
            }
            None => Err(Error::Emit(format!(
                "unexpanded occurrence of user-defined function {head}"
            ))),
        }
    }
}

/// Translate one emit-ready term (no declarations, no reciprocal
/// bookkeeping escapes). Exposed for tests and diagnostics.
pub fn translate_term(term: &Term, var_sorts: &BTreeMap<Ident, Sort>) -> Result<String> {
    translate_with_uninterp(term, var_sorts, &BTreeMap::new())
}

/// Like [`translate_term`] but with uninterpreted function signatures in
/// scope (used for the rewriter's guard queries). Reciprocals are
/// rejected: guard queries stay in the side-condition-free fragment.
pub fn translate_with_uninterp(
    term: &Term,
    var_sorts: &BTreeMap<Ident, Sort>,
    uninterp: &BTreeMap<Ident, usize>,
) -> Result<String> {
    let mut em = Emitter {
        var_sorts,
        uninterp: uninterp.clone(),
        names: NameGen::new(var_sorts.keys().cloned()),
        recips: Vec::new(),
    };
    let text = em.translate(&beta_reduce(term))?;
    if !em.recips.is_empty() {
        return Err(Error::Emit(
            "reciprocal occurrences are not supported in this context".to_string(),
        ));
    }
    Ok(text)
}

/// Sort declarations induced by the type-hypothesis ledger: one sort per
/// variable, in first-mention order. Conflicting recognizers for the
/// same variable are an error.
pub fn var_sorts_of(p1: &Phase1Output) -> Result<(BTreeMap<Ident, Sort>, Vec<Ident>)> {
    let mut var_sorts: BTreeMap<Ident, Sort> = BTreeMap::new();
    let mut decl_order: Vec<Ident> = Vec::new();
    for h in &p1.type_hyps {
        let sort = map_sort(h.recognizer);
        match var_sorts.get(&h.var) {
            None => {
                var_sorts.insert(h.var.clone(), sort);
                decl_order.push(h.var.clone());
            }
            Some(&prev) if prev == sort => {}
            Some(&prev) => {
                return Err(Error::Emit(format!(
                    "conflicting sorts for {}: {prev} vs {sort}",
                    h.var
                )));
            }
        }
    }
    Ok((var_sorts, decl_order))
}

/// Build the SMT-LIB script for a phase-1 result: declarations, the
/// reciprocal side conditions, and the negated assertion of G′.
pub fn emit_query(p1: &Phase1Output) -> Result<SmtQuery> {
    let (var_sorts, decl_order) = var_sorts_of(p1)?;

    let uninterp_decls: Vec<(Ident, Vec<Sort>, Sort)> = p1
        .uninterp
        .iter()
        .map(|u| {
            (
                u.name.clone(),
                u.arg_types.iter().map(|&r| map_sort(r)).collect(),
                map_sort(u.return_type),
            )
        })
        .collect();

    let mut em = Emitter {
        var_sorts: &var_sorts,
        uninterp: p1
            .uninterp
            .iter()
            .map(|u| (u.name.clone(), u.arg_types.len()))
            .collect(),
        names: NameGen::new(var_sorts.keys().cloned()),
        recips: Vec::new(),
    };
    let body = em.translate(&beta_reduce(&p1.g_prime))?;

    let logic = if uninterp_decls.is_empty() {
        "QF_NRA"
    } else {
        "QF_UFNRA"
    };
    let mut script = String::new();
    let _ = writeln!(script, "(set-logic {logic})");
    for v in &decl_order {
        let _ = writeln!(script, "(declare-const {v} {})", var_sorts[v]);
    }
    for (name, args, ret) in &uninterp_decls {
        let arg_list = args
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(script, "(declare-fun {name} ({arg_list}) {ret})");
    }
    let mut side_conditions = Vec::new();
    for (r, m_text, m_term) in &em.recips {
        let _ = writeln!(script, "(declare-const {r} Real)");
        let _ = writeln!(
            script,
            "(assert (=> (distinct {m_text} 0) (= (* {r} {m_text}) 1)))"
        );
        side_conditions.push(Term::implies(
            Term::app("not", vec![Term::app("equal", vec![m_term.clone(), Term::int(0)])]),
            Term::app(
                "equal",
                vec![
                    Term::app("binary-*", vec![Term::sym(r), m_term.clone()]),
                    Term::int(1),
                ],
            ),
        ));
    }
    let _ = writeln!(script, "(assert (not {body}))");
    let _ = writeln!(script, "(check-sat)");
    let _ = writeln!(script, "(get-model)");

    let mut warnings = Vec::new();
    if !uninterp_decls.is_empty() {
        warnings.push(
            "uninterpreted functions combined with nonlinear arithmetic: \
             some solvers silently weaken nonlinear reasoning in this logic"
                .to_string(),
        );
    }

    Ok(SmtQuery {
        script,
        var_sorts,
        uninterp_decls,
        side_conditions,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::goalfile::parse_goal_file;
    use crate::phase1::run_phase1;
    use crate::term::parse_one;

    fn query(src: &str) -> Result<SmtQuery> {
        let gf = parse_goal_file(src).unwrap();
        let p1 = run_phase1(&gf.goal, &gf.hints, &gf.defs).unwrap();
        emit_query(&p1)
    }

    #[test]
    fn sort_mapping() {
        assert_eq!(map_sort(Recognizer::Booleanp), Sort::Bool);
        assert_eq!(map_sort(Recognizer::Integerp), Sort::Real);
        assert_eq!(map_sort(Recognizer::Rationalp), Sort::Real);
    }

    #[test]
    fn program4_style_script() {
        let q = query(
            "(goal (implies (if (rationalp x) (rationalp y) nil)
                            (equal (equal x y) (equal (binary-+ x (unary-- y)) 0))))",
        )
        .unwrap();
        assert!(q.script.starts_with("(set-logic QF_NRA)\n"));
        assert!(q.script.contains("(declare-const x Real)"));
        assert!(q.script.contains("(declare-const y Real)"));
        assert!(q.script.contains(
            "(assert (not (=> (ite true true false) (= (= x y) (= (+ x (- y)) 0)))))"
        ));
        assert!(q.script.ends_with("(check-sat)\n(get-model)\n"));
        assert!(q.warnings.is_empty());
    }

    #[test]
    fn emission_is_deterministic() {
        let src = "(hints (:uninterpreted-functions ((expt rationalp integerp rationalp))))
                   (goal (implies (if (rationalp z) (integerp m) nil)
                                  (< (binary-* (expt z m) (unary-/ z)) (binary-+ 1/2 (unary-- 3)))))";
        let a = query(src).unwrap();
        let b = query(src).unwrap();
        assert_eq!(a.script, b.script);
    }

    #[test]
    fn uninterpreted_function_declared_and_logic_switches() {
        let q = query(
            "(hints (:uninterpreted-functions ((expt rationalp integerp rationalp))))
             (goal (implies (if (rationalp z) (integerp m) nil) (equal (expt z m) (expt z m))))",
        )
        .unwrap();
        assert!(q.script.starts_with("(set-logic QF_UFNRA)\n"));
        assert!(q.script.contains("(declare-fun expt (Real Real) Real)"));
        assert_eq!(q.warnings.len(), 1);
    }

    #[test]
    fn reciprocal_gets_fresh_symbol_and_guard() {
        let q = query(
            "(goal (implies (rationalp x) (equal (binary-* x (unary-/ 0)) 0)))",
        )
        .unwrap();
        assert!(q.script.contains("(declare-const r_1 Real)"));
        assert!(q.script.contains("(assert (=> (distinct 0 0) (= (* r_1 0) 1)))"));
        assert!(q.script.contains("(* x r_1)"));
        assert_eq!(q.side_conditions.len(), 1);
    }

    #[test]
    fn reciprocal_of_variable_guard() {
        let q = query("(goal (implies (rationalp x) (equal (binary-* x (unary-/ x)) 1)))")
            .unwrap();
        assert!(q.script.contains("(assert (=> (distinct x 0) (= (* r_1 x) 1)))"));
    }

    #[test]
    fn exact_numerals() {
        let q = query("(goal (implies (rationalp x) (< x (binary-+ 1/2 (unary-- 5)))))").unwrap();
        assert!(q.script.contains("(< x (+ (/ 1 2) (- 5)))"));
        let q = query("(goal (implies (rationalp x) (< -5/2 x)))").unwrap();
        assert!(q.script.contains("(< (- (/ 5 2)) x)"));
    }

    #[test]
    fn lambdas_beta_reduced() {
        let q = query(
            "(defun double (a) (binary-+ a a))
             (hints (:expand (:functions ((double rationalp)))))
             (goal (implies (rationalp x) (equal (double x) (binary-* 2 x))))",
        )
        .unwrap();
        assert!(q.script.contains("(= (+ x x) (* 2 x))"));
        assert!(!q.script.contains("lambda"));
    }

    #[test]
    fn unexpanded_function_is_an_error() {
        let err = query("(goal (implies (rationalp x) (equal (mystery x) x)))");
        match err {
            Err(Error::Emit(msg)) => assert!(msg.contains("mystery")),
            other => panic!("expected emit error, got {other:?}"),
        }
    }

    #[test]
    fn recognizer_in_goal_body_is_an_error() {
        let err = query("(goal (implies (rationalp x) (rationalp (binary-+ x 1))))");
        match err {
            Err(Error::Emit(msg)) => assert!(msg.contains("recognizer")),
            other => panic!("expected emit error, got {other:?}"),
        }
    }

    #[test]
    fn quantifier_is_an_error() {
        let err = query("(goal (implies (rationalp x) (exists (y) (equal x y))))");
        assert!(matches!(err, Err(Error::Emit(msg)) if msg.contains("quantifier")));
    }

    #[test]
    fn undeclared_variable_is_an_error() {
        let err = query("(goal (equal x 0))");
        assert!(matches!(err, Err(Error::Emit(msg)) if msg.contains("undeclared")));
    }

    #[test]
    fn quoted_data_is_an_error() {
        let err = query("(goal (implies (rationalp x) (equal x 'dog)))");
        assert!(matches!(err, Err(Error::Emit(_))));
    }

    #[test]
    fn conflicting_sorts_rejected() {
        let err = query(
            "(goal (implies (if (rationalp x) (booleanp x) nil) (equal x x)))",
        );
        assert!(matches!(err, Err(Error::Emit(msg)) if msg.contains("conflicting")));
    }

    #[test]
    fn boolean_variable_declared_bool() {
        let q = query("(goal (implies (booleanp b) (if b t (not b))))").unwrap();
        assert!(q.script.contains("(declare-const b Bool)"));
    }

    #[test]
    fn beta_reduce_nested() {
        let t = parse_one("((lambda (a) (binary-+ a ((lambda (b) (binary-* b b)) a))) x)")
            .unwrap();
        assert_eq!(
            beta_reduce(&t),
            parse_one("(binary-+ x (binary-* x x))").unwrap()
        );
    }

    // Strengthening check: over rational-grid valuations of the declared
    // variables, the emitted assertion body (an SMT expression) evaluates
    // exactly like the oracle's view of G′.
    mod strengthening {
        use super::*;
        use crate::oracle::{eval_term, Valuation, Value};
        use num_bigint::BigInt;
        use num_rational::BigRational;

        // Minimal evaluator for the emitted SMT text (no reciprocals, no
        // uninterpreted functions in these instances).
        #[derive(Debug, Clone, PartialEq)]
        enum Sv {
            B(bool),
            R(BigRational),
        }

        fn parse(text: &str) -> SExpr {
            let mut toks = Vec::new();
            let mut cur = String::new();
            for c in text.chars() {
                match c {
                    '(' | ')' => {
                        if !cur.is_empty() {
                            toks.push(cur.clone());
                            cur.clear();
                        }
                        toks.push(c.to_string());
                    }
                    c if c.is_whitespace() => {
                        if !cur.is_empty() {
                            toks.push(cur.clone());
                            cur.clear();
                        }
                    }
                    c => cur.push(c),
                }
            }
            if !cur.is_empty() {
                toks.push(cur);
            }
            let mut pos = 0;
            let e = parse_at(&toks, &mut pos);
            assert_eq!(pos, toks.len());
            e
        }

        #[derive(Debug)]
        enum SExpr {
            A(String),
            L(Vec<SExpr>),
        }

        fn parse_at(toks: &[String], pos: &mut usize) -> SExpr {
            if toks[*pos] == "(" {
                *pos += 1;
                let mut items = Vec::new();
                while toks[*pos] != ")" {
                    items.push(parse_at(toks, pos));
                }
                *pos += 1;
                SExpr::L(items)
            } else {
                let a = SExpr::A(toks[*pos].clone());
                *pos += 1;
                a
            }
        }

        fn ev(e: &SExpr, env: &std::collections::BTreeMap<String, Sv>) -> Sv {
            match e {
                SExpr::A(a) => match a.as_str() {
                    "true" => Sv::B(true),
                    "false" => Sv::B(false),
                    v => {
                        if let Ok(n) = v.parse::<i64>() {
                            Sv::R(BigRational::from_integer(BigInt::from(n)))
                        } else {
                            env.get(v).cloned().expect("declared variable")
                        }
                    }
                },
                SExpr::L(items) => {
                    let op = match &items[0] {
                        SExpr::A(a) => a.as_str(),
                        _ => panic!("operator"),
                    };
                    let rat = |e: &SExpr| match ev(e, env) {
                        Sv::R(r) => r,
                        v => panic!("expected Real, got {v:?}"),
                    };
                    let boo = |e: &SExpr| match ev(e, env) {
                        Sv::B(b) => b,
                        v => panic!("expected Bool, got {v:?}"),
                    };
                    match op {
                        "=>" => Sv::B(!boo(&items[1]) || boo(&items[2])),
                        "not" => Sv::B(!boo(&items[1])),
                        "ite" => {
                            if boo(&items[1]) {
                                ev(&items[2], env)
                            } else {
                                ev(&items[3], env)
                            }
                        }
                        "=" => Sv::B(ev(&items[1], env) == ev(&items[2], env)),
                        "<" => Sv::B(rat(&items[1]) < rat(&items[2])),
                        "+" => Sv::R(rat(&items[1]) + rat(&items[2])),
                        "*" => Sv::R(rat(&items[1]) * rat(&items[2])),
                        "-" => Sv::R(-rat(&items[1])),
                        "/" => Sv::R(rat(&items[1]) / rat(&items[2])),
                        other => panic!("unknown operator {other}"),
                    }
                }
            }
        }

        #[test]
        fn emitted_body_agrees_with_oracle_on_rational_grid() {
            let cases = [
                "(goal (implies (if (rationalp x) (rationalp y) nil)
                                (equal (equal x y) (equal (binary-+ x (unary-- y)) 0))))",
                "(goal (implies (if (rationalp x) (integerp y) nil)
                                (< (binary-* x x) (binary-+ (binary-* x x) (binary-+ y 5)))))",
            ];
            let grid: Vec<BigRational> = [(-2, 1), (-1, 1), (0, 1), (1, 2), (1, 1), (2, 1)]
                .iter()
                .map(|&(n, d)| BigRational::new(BigInt::from(n), BigInt::from(d)))
                .collect();
            for src in cases {
                let gf = parse_goal_file(src).unwrap();
                let p1 = run_phase1(&gf.goal, &gf.hints, &gf.defs).unwrap();
                let q = emit_query(&p1).unwrap();
                let body_line = q
                    .script
                    .lines()
                    .find(|l| l.starts_with("(assert (not "))
                    .unwrap();
                let body = &body_line["(assert (not ".len()..body_line.len() - 2];
                let sexpr = parse(body);
                let vars: Vec<&String> = q.var_sorts.keys().collect();
                assert_eq!(vars.len(), 2);
                for a in &grid {
                    for b in &grid {
                        let env: std::collections::BTreeMap<String, Sv> = vec![
                            (vars[0].clone(), Sv::R(a.clone())),
                            (vars[1].clone(), Sv::R(b.clone())),
                        ]
                        .into_iter()
                        .collect();
                        let smt = match ev(&sexpr, &env) {
                            Sv::B(v) => v,
                            _ => panic!("body not boolean"),
                        };
                        let val: Valuation = vec![
                            (vars[0].clone(), Value::Rat(a.clone())),
                            (vars[1].clone(), Value::Rat(b.clone())),
                        ]
                        .into_iter()
                        .collect();
                        let goal_side = eval_term(&p1.g_prime, &val, &gf.defs)
                            .unwrap()
                            .truthy();
                        assert_eq!(smt, goal_side, "{src} at x={a}, y={b}");
                    }
                }
            }
        }
    }
}
