//! Parsing and validation of the clause-processor hint list.
//!
//! Surface grammar (one flat keyword list, documented in `docs/hints.md`):
//!
//! ```text
//! (hints
//!   (:expand (:functions ((fact rationalp) ...)) (:expansion-level 2))
//!   (:uninterpreted-functions ((expt rationalp integerp rationalp)))
//!   (:let ((expt_z_m (expt z m) rationalp) ...))
//!   (:hypothesize ((< expt_z_m 1) ...)))
//! ```

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::term::{sexp_to_term, Ident, Sexp, Term};

/// The three supported type recognizers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Recognizer {
    Booleanp,
    Integerp,
    Rationalp,
}

impl Recognizer {
    pub fn from_name(name: &str) -> Option<Recognizer> {
        match name {
            "booleanp" => Some(Recognizer::Booleanp),
            "integerp" => Some(Recognizer::Integerp),
            "rationalp" => Some(Recognizer::Rationalp),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Recognizer::Booleanp => "booleanp",
            Recognizer::Integerp => "integerp",
            Recognizer::Rationalp => "rationalp",
        }
    }
}

impl std::fmt::Display for Recognizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A function to expand, with the user-claimed return type for calls
/// cut beyond the expansion limit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpandSpec {
    pub name: Ident,
    pub return_type: Recognizer,
}

/// An uninterpreted function signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UninterpSpec {
    pub name: Ident,
    pub arg_types: Vec<Recognizer>,
    pub return_type: Recognizer,
}

/// A `:let` substitution: replace `source` everywhere by `fresh_var`,
/// claiming `ty` for the value of `source`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LetSpec {
    pub source: Term,
    pub fresh_var: Ident,
    pub ty: Recognizer,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Hints {
    pub expand: Vec<ExpandSpec>,
    pub expansion_level: u32,
    pub uninterpreted: Vec<UninterpSpec>,
    pub lets: Vec<LetSpec>,
    pub hypothesize: Vec<Term>,
    pub subgoal_note: Option<String>,
}

impl Hints {
    /// Empty hint set; expansion level defaults to 1.
    pub fn empty() -> Hints {
        Hints {
            expansion_level: 1,
            ..Hints::default()
        }
    }

    pub fn expand_spec(&self, name: &str) -> Option<&ExpandSpec> {
        self.expand.iter().find(|e| e.name == name)
    }

    pub fn uninterp_spec(&self, name: &str) -> Option<&UninterpSpec> {
        self.uninterpreted.iter().find(|u| u.name == name)
    }
}

fn hint_err(msg: impl Into<String>) -> Error {
    Error::Hint(msg.into())
}

fn as_list(sx: &Sexp, what: &str) -> Result<Vec<Sexp>> {
    match sx {
        Sexp::List(items) => Ok(items.clone()),
        _ => Err(hint_err(format!("{what} must be a list"))),
    }
}

fn as_symbol(sx: &Sexp, what: &str) -> Result<Ident> {
    match sx {
        Sexp::Atom(s, _, _) => Ok(s.clone()),
        _ => Err(hint_err(format!("{what} must be a symbol"))),
    }
}

fn as_recognizer(sx: &Sexp, what: &str) -> Result<Recognizer> {
    let name = as_symbol(sx, what)?;
    Recognizer::from_name(&name).ok_or_else(|| {
        hint_err(format!(
            "{what}: {name} is not a supported recognizer (booleanp, integerp, rationalp)"
        ))
    })
}

fn keyword_of(items: &[Sexp]) -> Result<(String, &[Sexp])> {
    match items.first() {
        Some(Sexp::Atom(s, _, _)) if s.starts_with(':') => Ok((s.clone(), &items[1..])),
        _ => Err(hint_err("each hint entry must start with a keyword")),
    }
}

fn parse_expand(body: &[Sexp], hints: &mut Hints) -> Result<()> {
    for entry in body {
        let items = as_list(entry, ":expand entry")?;
        let (kw, rest) = keyword_of(&items)?;
        match kw.as_str() {
            ":functions" => {
                let specs = rest
                    .first()
                    .ok_or_else(|| hint_err(":functions needs a list"))?;
                for spec in as_list(specs, ":functions body")? {
                    let pair = as_list(&spec, ":functions entry")?;
                    if pair.len() != 2 {
                        return Err(hint_err(
                            ":functions entries are (name return-recognizer) pairs",
                        ));
                    }
                    hints.expand.push(ExpandSpec {
                        name: as_symbol(&pair[0], "function name")?,
                        return_type: as_recognizer(&pair[1], "return type")?,
                    });
                }
            }
            ":expansion-level" => {
                let lvl = rest
                    .first()
                    .ok_or_else(|| hint_err(":expansion-level needs a value"))?;
                let n = as_symbol(lvl, ":expansion-level")?;
                hints.expansion_level = n
                    .parse()
                    .map_err(|_| hint_err(format!(":expansion-level: bad level {n}")))?;
            }
            other => return Err(hint_err(format!("unknown :expand keyword {other}"))),
        }
    }
    Ok(())
}

/// Parse and validate a `(hints ...)` form. `goal_free` is used for the
/// fresh-variable disjointness check on `:let` bindings; an absent form
/// yields empty hints.
pub(crate) fn parse_hints(form: Option<&Sexp>, goal_free: &BTreeSet<Ident>) -> Result<Hints> {
    let mut hints = Hints::empty();
    let form = match form {
        None => return Ok(hints),
        Some(f) => f,
    };
    let items = as_list(form, "hints form")?;
    match items.first() {
        Some(Sexp::Atom(s, _, _)) if s == "hints" => {}
        _ => return Err(hint_err("hints form must start with the symbol hints")),
    }
    for entry in &items[1..] {
        let entry_items = as_list(entry, "hint entry")?;
        let (kw, rest) = keyword_of(&entry_items)?;
        match kw.as_str() {
            ":expand" => parse_expand(rest, &mut hints)?,
            ":uninterpreted-functions" => {
                let specs = rest
                    .first()
                    .ok_or_else(|| hint_err(":uninterpreted-functions needs a list"))?;
                for spec in as_list(specs, ":uninterpreted-functions body")? {
                    let sig = as_list(&spec, "uninterpreted signature")?;
                    if sig.len() < 2 {
                        return Err(hint_err(
                            "uninterpreted signature needs a name and a return type",
                        ));
                    }
                    let name = as_symbol(&sig[0], "function name")?;
                    let mut types = sig[1..]
                        .iter()
                        .map(|s| as_recognizer(s, "signature type"))
                        .collect::<Result<Vec<_>>>()?;
                    let return_type = types.pop().unwrap();
                    hints.uninterpreted.push(UninterpSpec {
                        name,
                        arg_types: types,
                        return_type,
                    });
                }
            }
            ":let" => {
                let specs = rest.first().ok_or_else(|| hint_err(":let needs a list"))?;
                for spec in as_list(specs, ":let body")? {
                    let triple = as_list(&spec, ":let binding")?;
                    if triple.len() != 3 {
                        return Err(hint_err(
                            ":let bindings are (var (expr) recognizer) triples",
                        ));
                    }
                    hints.lets.push(LetSpec {
                        fresh_var: as_symbol(&triple[0], ":let variable")?,
                        source: sexp_to_term(&triple[1])?,
                        ty: as_recognizer(&triple[2], ":let type")?,
                    });
                }
            }
            ":hypothesize" => {
                let specs = rest
                    .first()
                    .ok_or_else(|| hint_err(":hypothesize needs a list"))?;
                for spec in as_list(specs, ":hypothesize body")? {
                    hints.hypothesize.push(sexp_to_term(&spec)?);
                }
            }
            ":subgoal-note" => {
                if let Some(Sexp::Str(s)) = rest.first() {
                    hints.subgoal_note = Some(s.clone());
                }
            }
            other => return Err(hint_err(format!("unknown hint keyword {other}"))),
        }
    }
    validate(&hints, goal_free)?;
    Ok(hints)
}

fn validate(hints: &Hints, goal_free: &BTreeSet<Ident>) -> Result<()> {
    let mut fresh = BTreeSet::new();
    for l in &hints.lets {
        if !fresh.insert(l.fresh_var.clone()) {
            return Err(hint_err(format!(
                "duplicate :let fresh variable {}",
                l.fresh_var
            )));
        }
        if goal_free.contains(&l.fresh_var) {
            return Err(hint_err(format!(
                ":let variable {} is already free in the goal",
                l.fresh_var
            )));
        }
    }
    let expand_names: BTreeSet<_> = hints.expand.iter().map(|e| e.name.clone()).collect();
    if expand_names.len() != hints.expand.len() {
        return Err(hint_err("duplicate function in :expand"));
    }
    for u in &hints.uninterpreted {
        if expand_names.contains(&u.name) {
            return Err(hint_err(format!(
                "{} appears in both :expand and :uninterpreted-functions",
                u.name
            )));
        }
    }
    Ok(())
}
