//! Phase 1: transform the goal G into the expanded goal G′, recording the
//! ledgers T (type hypotheses), F (function call instances), U
//! (uninterpreted declarations), H (added hypotheses), and S
//! (substitutions).
//!
//! Order of operations: harvest type hypotheses, apply `:let`
//! substitutions, expand function calls, re-apply the substitutions to
//! catch copies introduced by expansion, then wrap with `:hypothesize`
//! hypotheses.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::goalfile::Definitions;
use crate::hints::{Hints, Recognizer, UninterpSpec};
use crate::term::{Goal, Ident, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Goal,
    ExpansionCut,
    LetBinding,
}

/// A `(typep var)` hypothesis: falsity of the recognizer at `var`
/// makes the clause vacuously true.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeHyp {
    pub recognizer: Recognizer,
    pub var: Ident,
    pub origin: Origin,
}

impl TypeHyp {
    pub fn as_term(&self) -> Term {
        Term::app(self.recognizer.name(), vec![Term::Sym(self.var.clone())])
    }
}

/// A recorded function call instance: either cut to a fresh variable
/// (expansion limit) or left as an uninterpreted application.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FnCallRecord {
    pub call: Term,
    pub claimed_type: Recognizer,
    /// The variable that replaced the call; `None` for uninterpreted
    /// calls, which stay in place.
    pub fresh_var: Option<Ident>,
}

#[derive(Debug, Clone)]
pub struct Phase1Output {
    pub original: Goal,
    /// G with harvested type hypotheses replaced by `t`.
    pub g_t: Term,
    /// G_T after substitution and function expansion (substitutions
    /// re-applied to catch copies from expanded bodies).
    pub g_f: Term,
    /// `(implies Ĥ G_F)`; equal to G_F when no hypotheses were added.
    pub g_prime: Term,
    pub type_hyps: Vec<TypeHyp>,
    pub fn_calls: Vec<FnCallRecord>,
    pub uninterp: Vec<UninterpSpec>,
    pub added_hyps: Vec<Term>,
    pub substitutions: Vec<(Term, Ident)>,
}

// ---------------------------------------------------------------------------
// Type hypothesis extraction
// ---------------------------------------------------------------------------

/// How a subterm's value propagates to the whole clause.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Vac {
    /// Subterm false ⇒ clause true. Recognizers here are type hypotheses.
    IfFalse,
    /// Subterm true ⇒ clause true.
    IfTrue,
    None,
}

impl Vac {
    fn flip(self) -> Vac {
        match self {
            Vac::IfFalse => Vac::IfTrue,
            Vac::IfTrue => Vac::IfFalse,
            Vac::None => Vac::None,
        }
    }
}

fn harvest(term: &Term, ctx: Vac, hyps: &mut Vec<TypeHyp>) -> Term {
    if let Term::App(head, args) = term {
        if ctx == Vac::IfFalse && args.len() == 1 {
            if let (Some(rec), Term::Sym(var)) = (Recognizer::from_name(head), &args[0]) {
                if var != "t" && var != "nil" {
                    let h = TypeHyp {
                        recognizer: rec,
                        var: var.clone(),
                        origin: Origin::Goal,
                    };
                    if !hyps.contains(&h) {
                        hyps.push(h);
                    }
                    return Term::t();
                }
            }
        }
        match (head.as_str(), args.len()) {
            ("implies", 2) => {
                let actx = if ctx == Vac::IfTrue { Vac::IfFalse } else { Vac::None };
                let cctx = if ctx == Vac::IfTrue { Vac::IfTrue } else { Vac::None };
                return Term::app(
                    "implies",
                    vec![harvest(&args[0], actx, hyps), harvest(&args[1], cctx, hyps)],
                );
            }
            ("not", 1) => {
                return Term::app("not", vec![harvest(&args[0], ctx.flip(), hyps)]);
            }
            ("if", 3) => {
                let (c, th, el) = (&args[0], &args[1], &args[2]);
                // Branch contexts follow the constant arms: an and-shape
                // (else = nil) propagates falsity, an implies/or-shape
                // (then or else = t) propagates truth.
                let cctx = match ctx {
                    Vac::IfFalse if el.is_nil() => Vac::IfFalse,
                    Vac::IfFalse if th.is_nil() => Vac::IfTrue,
                    Vac::IfTrue if el.is_t() => Vac::IfFalse,
                    Vac::IfTrue if th.is_t() => Vac::IfTrue,
                    _ => Vac::None,
                };
                let thctx = match ctx {
                    Vac::IfFalse if el.is_nil() => Vac::IfFalse,
                    Vac::IfTrue if el.is_t() => Vac::IfTrue,
                    _ => Vac::None,
                };
                let elctx = match ctx {
                    Vac::IfFalse if th.is_nil() => Vac::IfFalse,
                    Vac::IfTrue if th.is_t() => Vac::IfTrue,
                    _ => Vac::None,
                };
                return Term::app(
                    "if",
                    vec![
                        harvest(c, cctx, hyps),
                        harvest(th, thctx, hyps),
                        harvest(el, elctx, hyps),
                    ],
                );
            }
            _ => {}
        }
    }
    term.clone()
}

/// Walk the goal clause and harvest type hypotheses: `(typep var)` terms
/// whose falsity makes the clause vacuously true. Returns the list T and
/// G_T (the goal with each occurrence replaced by `t`).
pub fn extract_type_hyps(goal: &Goal) -> (Vec<TypeHyp>, Term) {
    let mut hyps = Vec::new();
    let g_t = harvest(&goal.clause, Vac::IfTrue, &mut hyps);
    (hyps, g_t)
}

// ---------------------------------------------------------------------------
// Function expansion
// ---------------------------------------------------------------------------

/// Fresh-name source. Issued names never collide with each other or with
/// the names the generator was seeded with.
#[derive(Debug, Clone)]
pub struct NameGen {
    used: BTreeSet<Ident>,
    counters: BTreeMap<String, u32>,
}

impl NameGen {
    pub fn new(used: impl IntoIterator<Item = Ident>) -> NameGen {
        NameGen {
            used: used.into_iter().collect(),
            counters: BTreeMap::new(),
        }
    }

    /// `base` itself if unused, otherwise `base_k`.
    pub fn fresh(&mut self, base: &str) -> Ident {
        if self.used.insert(base.to_string()) {
            return base.to_string();
        }
        self.counted(base)
    }

    /// Always numbered: `base_1`, `base_2`, ...
    pub fn counted(&mut self, base: &str) -> Ident {
        loop {
            let k = self.counters.entry(base.to_string()).or_insert(0);
            *k += 1;
            let name = format!("{base}_{k}");
            if self.used.insert(name.clone()) {
                return name;
            }
        }
    }
}

struct Expander<'a> {
    defs: &'a Definitions,
    hints: &'a Hints,
    names: &'a mut NameGen,
    fn_calls: Vec<FnCallRecord>,
    type_hyps: Vec<TypeHyp>,
}

impl<'a> Expander<'a> {
    fn expand(&mut self, term: &Term, budgets: &BTreeMap<Ident, u32>) -> Result<Term> {
        match term {
            Term::Sym(_)
            | Term::Int(_)
            | Term::Rat(_)
            | Term::Str(_)
            | Term::QuotedSym(_)
            | Term::QuotedList(_) => Ok(term.clone()),
            Term::Lambda {
                formals,
                body,
                actuals,
            } => Ok(Term::Lambda {
                formals: formals.clone(),
                body: Box::new(self.expand(body, budgets)?),
                actuals: actuals
                    .iter()
                    .map(|a| self.expand(a, budgets))
                    .collect::<Result<_>>()?,
            }),
            Term::App(head, args) => {
                let args: Vec<Term> = args
                    .iter()
                    .map(|a| self.expand(a, budgets))
                    .collect::<Result<_>>()?;
                if let Some(u) = self.hints.uninterp_spec(head) {
                    if args.len() != u.arg_types.len() {
                        return Err(Error::Expansion(format!(
                            "{head} declared with {} arguments but called with {}",
                            u.arg_types.len(),
                            args.len()
                        )));
                    }
                    let call = Term::App(head.clone(), args);
                    self.fn_calls.push(FnCallRecord {
                        call: call.clone(),
                        claimed_type: u.return_type,
                        fresh_var: None,
                    });
                    return Ok(call);
                }
                let spec = match self.hints.expand_spec(head) {
                    None => return Ok(Term::App(head.clone(), args)),
                    Some(s) => s.clone(),
                };
                let def = self.defs.get(head).ok_or_else(|| {
                    Error::Expansion(format!("no definition for function {head}"))
                })?;
                if def.formals.len() != args.len() {
                    return Err(Error::Expansion(format!(
                        "{head} takes {} arguments but was called with {}",
                        def.formals.len(),
                        args.len()
                    )));
                }
                let budget = budgets
                    .get(head)
                    .copied()
                    .unwrap_or(self.hints.expansion_level);
                if budget == 0 {
                    // Beyond the expansion limit: generalize the call to an
                    // unconstrained fresh variable of the claimed type.
                    let fresh = self.names.counted(&format!("var_{head}"));
                    let call = Term::App(head.clone(), args);
                    self.fn_calls.push(FnCallRecord {
                        call,
                        claimed_type: spec.return_type,
                        fresh_var: Some(fresh.clone()),
                    });
                    self.type_hyps.push(TypeHyp {
                        recognizer: spec.return_type,
                        var: fresh.clone(),
                        origin: Origin::ExpansionCut,
                    });
                    return Ok(Term::Sym(fresh));
                }
                // (fun actuals) => ((lambda (fresh-formals) body) actuals)
                let def = def.clone();
                let fresh_formals: Vec<Ident> =
                    def.formals.iter().map(|f| self.names.fresh(f)).collect();
                let renaming: Vec<(Ident, Term)> = def
                    .formals
                    .iter()
                    .cloned()
                    .zip(fresh_formals.iter().map(|f| Term::Sym(f.clone())))
                    .collect();
                let body = def.body.subst_vars(&renaming);
                let mut inner = budgets.clone();
                inner.insert(head.clone(), budget - 1);
                let body = self.expand(&body, &inner)?;
                Ok(Term::Lambda {
                    formals: fresh_formals,
                    body: Box::new(body),
                    actuals: args,
                })
            }
        }
    }
}

/// Expand user-function calls per the `:expand` hints (cutting calls
/// beyond the depth limit to fresh variables) and record uninterpreted
/// calls. Unknown functions are left in place for phase 2 to reject.
pub fn expand_functions(
    term: &Term,
    defs: &Definitions,
    hints: &Hints,
    names: &mut NameGen,
) -> Result<(Term, Vec<FnCallRecord>, Vec<TypeHyp>)> {
    let mut ex = Expander {
        defs,
        hints,
        names,
        fn_calls: Vec::new(),
        type_hyps: Vec::new(),
    };
    let out = ex.expand(term, &BTreeMap::new())?;
    Ok((out, ex.fn_calls, ex.type_hyps))
}

// ---------------------------------------------------------------------------
// Hypotheses and assembly
// ---------------------------------------------------------------------------

/// Wrap `term` as `(implies (and hyps...) term)`; empty list is identity.
/// Every hypothesis must only mention variables present after expansion
/// and substitution (`known_vars`).
pub fn add_hypotheses(term: &Term, hyps: &[Term], known_vars: &BTreeSet<Ident>) -> Result<Term> {
    for h in hyps {
        for v in h.free_vars() {
            if !known_vars.contains(&v) {
                return Err(Error::Hint(format!(
                    ":hypothesize term {h} references unknown variable {v}"
                )));
            }
        }
    }
    if hyps.is_empty() {
        return Ok(term.clone());
    }
    Ok(Term::implies(Term::and(hyps.to_vec()), term.clone()))
}

/// Run the whole first phase.
pub fn run_phase1(goal: &Goal, hints: &Hints, defs: &Definitions) -> Result<Phase1Output> {
    let (mut type_hyps, g_t) = extract_type_hyps(goal);

    // :let substitutions, applied before expansion so users can name
    // subterms of unexpanded calls.
    let substitutions: Vec<(Term, Ident)> = hints
        .lets
        .iter()
        .map(|l| (l.source.clone(), l.fresh_var.clone()))
        .collect();
    for l in &hints.lets {
        type_hyps.push(TypeHyp {
            recognizer: l.ty,
            var: l.fresh_var.clone(),
            origin: Origin::LetBinding,
        });
    }
    let g_sub = g_t.substitute(&substitutions)?;

    let mut names = NameGen::new(
        goal.free_vars
            .iter()
            .cloned()
            .chain(hints.lets.iter().map(|l| l.fresh_var.clone())),
    );
    let (g_exp, fn_calls, cut_hyps) = expand_functions(&g_sub, defs, hints, &mut names)?;
    type_hyps.extend(cut_hyps);

    // Re-apply the substitutions: expansion may have introduced copies of
    // the source expressions from function bodies.
    let g_f = g_exp.substitute_unchecked(&substitutions);

    let known: BTreeSet<Ident> = g_f
        .free_vars()
        .into_iter()
        .chain(type_hyps.iter().map(|h| h.var.clone()))
        .collect();
    let g_prime = add_hypotheses(&g_f, &hints.hypothesize, &known)?;

    Ok(Phase1Output {
        original: goal.clone(),
        g_t,
        g_f,
        g_prime,
        type_hyps,
        fn_calls,
        uninterp: hints.uninterpreted.clone(),
        added_hyps: hints.hypothesize.clone(),
        substitutions,
    })
}
