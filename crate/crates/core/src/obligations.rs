//! Construction of the clauses Q1 and Q2 that justify the phase-1
//! translation, and their falsification check.
//!
//! Q1 = (G′ ∧ A) ⇒ G and Q2 = A ∨ G, where A conjoins every type
//! hypothesis, every added hypothesis, and a return-type claim for each
//! recorded function call. Q2 is split into one clause per conjunct of A.
//! Variables introduced by `:let` substitutions or expansion cuts are
//! bound back to their source expressions with lambda applications;
//! variables from enclosing expansion contexts stay free, which makes the
//! checked clause more general than strictly necessary.

use crate::goalfile::Definitions;
use crate::hints::Recognizer;
use crate::oracle::{falsify, SamplerConfig, Verdict};
use crate::phase1::{Origin, Phase1Output};
use crate::term::{Ident, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    TypeHyp,
    ReturnType,
    AddedHyp,
    LetType,
}

impl Provenance {
    pub fn tag(&self) -> &'static str {
        match self {
            Provenance::TypeHyp => "type-hyp",
            Provenance::ReturnType => "return-type",
            Provenance::AddedHyp => "added-hyp",
            Provenance::LetType => "let-type",
        }
    }
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Q2Clause {
    pub clause: Term,
    pub provenance: Provenance,
}

#[derive(Debug, Clone)]
pub struct ObligationSet {
    pub q1: Term,
    pub q2_conjuncts: Vec<Q2Clause>,
}

fn recognizer_app(rec: Recognizer, arg: Term) -> Term {
    Term::app(rec.name(), vec![arg])
}

/// `((lambda (vs...) body) sources...)` for the subset of `bindings`
/// whose variable occurs free in `body`; `body` unchanged when none do.
fn bind_sources(body: Term, bindings: &[(Ident, Term)]) -> Term {
    let free = body.free_vars();
    let used: Vec<&(Ident, Term)> = bindings.iter().filter(|(v, _)| free.contains(v)).collect();
    if used.is_empty() {
        return body;
    }
    Term::Lambda {
        formals: used.iter().map(|(v, _)| v.clone()).collect(),
        body: Box::new(body),
        actuals: used.iter().map(|(_, e)| e.clone()).collect(),
    }
}

/// Build Q1 and the Q2 conjuncts from a phase-1 run. Construction is
/// total and deterministic: assumptions appear in ledger order.
pub fn build_obligations(p1: &Phase1Output) -> ObligationSet {
    let g = p1.original.clause.clone();

    // Variables that stand for expressions: :let fresh vars and
    // expansion-cut fresh vars, with their sources.
    let mut bindings: Vec<(Ident, Term)> = p1
        .substitutions
        .iter()
        .map(|(src, v)| (v.clone(), src.clone()))
        .collect();
    for rec in &p1.fn_calls {
        if let Some(v) = &rec.fresh_var {
            bindings.push((v.clone(), rec.call.clone()));
        }
    }

    // A's conjuncts, phrased over the bound variables (for Q1, the whole
    // clause is wrapped in one binding lambda).
    let mut assumptions: Vec<Term> = Vec::new();
    for h in &p1.type_hyps {
        assumptions.push(h.as_term());
    }
    // Uninterpreted calls have no fresh variable; their return-type claim
    // is stated on the call itself (Eq. 3 shape).
    for rec in &p1.fn_calls {
        if rec.fresh_var.is_none() {
            assumptions.push(recognizer_app(rec.claimed_type, rec.call.clone()));
        }
    }
    assumptions.extend(p1.added_hyps.iter().cloned());

    let q1_body = if assumptions.is_empty() {
        Term::implies(p1.g_prime.clone(), g.clone())
    } else {
        let mut conj = vec![p1.g_prime.clone()];
        conj.extend(assumptions.clone());
        Term::implies(Term::and(conj), g.clone())
    };
    let q1 = bind_sources(q1_body, &bindings);

    let mut q2_conjuncts = Vec::new();
    for h in &p1.type_hyps {
        match h.origin {
            Origin::Goal => q2_conjuncts.push(Q2Clause {
                clause: Term::or(vec![h.as_term(), g.clone()]),
                provenance: Provenance::TypeHyp,
            }),
            Origin::LetBinding => {
                let bound = bind_sources(h.as_term(), &bindings);
                q2_conjuncts.push(Q2Clause {
                    clause: Term::or(vec![bound, g.clone()]),
                    provenance: Provenance::LetType,
                });
            }
            // Cut variables are covered by the Eq. 3 clause on the call
            // itself, emitted from fn_calls below.
            Origin::ExpansionCut => {}
        }
    }
    for rec in &p1.fn_calls {
        q2_conjuncts.push(Q2Clause {
            clause: Term::or(vec![
                recognizer_app(rec.claimed_type, rec.call.clone()),
                g.clone(),
            ]),
            provenance: Provenance::ReturnType,
        });
    }
    for h in &p1.added_hyps {
        q2_conjuncts.push(Q2Clause {
            clause: Term::or(vec![bind_sources(h.clone(), &bindings), g.clone()]),
            provenance: Provenance::AddedHyp,
        });
    }

    ObligationSet { q1, q2_conjuncts }
}

/// One checked clause: Q1 is labeled `q1`, the Q2 conjuncts `q2.<k>`.
#[derive(Debug, Clone)]
pub struct ClauseReport {
    pub label: String,
    pub provenance: Option<Provenance>,
    pub clause: Term,
    pub verdict: Verdict,
}

/// Check every obligation clause by falsification search. "Pass" means
/// not falsified by the exhaustive tiny-domain pass plus N samples, not
/// proved.
pub fn check_obligations(
    obs: &ObligationSet,
    cfg: &SamplerConfig,
    defs: &Definitions,
) -> Vec<ClauseReport> {
    let mut out = Vec::with_capacity(1 + obs.q2_conjuncts.len());
    out.push(ClauseReport {
        label: "q1".to_string(),
        provenance: None,
        clause: obs.q1.clone(),
        verdict: falsify(&obs.q1, cfg, defs),
    });
    for (i, c) in obs.q2_conjuncts.iter().enumerate() {
        out.push(ClauseReport {
            label: format!("q2.{}", i + 1),
            provenance: Some(c.provenance),
            clause: c.clause.clone(),
            verdict: falsify(&c.clause, cfg, defs),
        });
    }
    out
}
