//! Goal file format: zero or more `(defun name (formals) body)` forms,
//! an optional `(hints ...)` form, and exactly one `(goal <term>)` form.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::hints::{parse_hints, Hints};
use crate::term::{sexp_to_term, Goal, Ident, Sexp, Term};

/// A user function definition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Definition {
    pub name: Ident,
    pub formals: Vec<Ident>,
    pub body: Term,
}

pub type Definitions = BTreeMap<Ident, Definition>;

#[derive(Debug, Clone)]
pub struct GoalFile {
    pub defs: Definitions,
    pub hints: Hints,
    pub goal: Goal,
}

fn form_err(msg: impl Into<String>) -> Error {
    Error::Parse {
        line: 0,
        col: 0,
        msg: msg.into(),
    }
}

fn head_symbol(sx: &Sexp) -> Option<(&str, &[Sexp])> {
    match sx {
        Sexp::List(items) => match items.first() {
            Some(Sexp::Atom(s, _, _)) => Some((s.as_str(), &items[1..])),
            _ => None,
        },
        _ => None,
    }
}

fn parse_defun(rest: &[Sexp]) -> Result<Definition> {
    if rest.len() != 3 {
        return Err(form_err("defun takes a name, a formal list, and a body"));
    }
    let name = match &rest[0] {
        Sexp::Atom(s, _, _) => s.clone(),
        _ => return Err(form_err("defun name must be a symbol")),
    };
    let formals = match &rest[1] {
        Sexp::List(fs) => fs
            .iter()
            .map(|f| match f {
                Sexp::Atom(s, _, _) => Ok(s.clone()),
                _ => Err(form_err("defun formals must be symbols")),
            })
            .collect::<Result<Vec<_>>>()?,
        _ => return Err(form_err("defun formals must be a list")),
    };
    let body = sexp_to_term(&rest[2])?;
    Ok(Definition {
        name,
        formals,
        body,
    })
}

/// Parse a goal file from source text.
pub fn parse_goal_file(source: &str) -> Result<GoalFile> {
    let forms = crate::term::parse_sexps(source)?;
    let mut defs = Definitions::new();
    let mut hints_form: Option<Sexp> = None;
    let mut goal: Option<Goal> = None;

    for form in &forms {
        match head_symbol(form) {
            Some(("defun", rest)) => {
                let d = parse_defun(rest)?;
                if defs.insert(d.name.clone(), d.clone()).is_some() {
                    return Err(form_err(format!("duplicate definition of {}", d.name)));
                }
            }
            Some(("hints", _)) => {
                if hints_form.replace(form.clone()).is_some() {
                    return Err(form_err("more than one hints form"));
                }
            }
            Some(("goal", rest)) => {
                if rest.len() != 1 {
                    return Err(form_err("goal takes exactly one term"));
                }
                if goal.replace(Goal::new(sexp_to_term(&rest[0])?)).is_some() {
                    return Err(form_err("more than one goal form"));
                }
            }
            _ => return Err(form_err("top-level forms must be defun, hints, or goal")),
        }
    }

    let goal = goal.ok_or_else(|| form_err("goal file has no (goal ...) form"))?;
    let hints = parse_hints(hints_form.as_ref(), &goal.free_vars)?;
    Ok(GoalFile { defs, hints, goal })
}
