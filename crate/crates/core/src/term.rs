//! The untyped Lisp-like goal language: terms, parsing, printing,
//! free variables, and expression-to-variable substitution.
//!
//! Terms are immutable trees. `and` and `or` are surface macros that the
//! parser expands into `if` forms; `implies` is kept as an application.
//! Quoted data (`'dog`, `'(...)`) exists only for the untyped evaluation
//! oracle and is rejected by the SMT emitter.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};

pub type Ident = String;

/// Binder keywords that may never appear as an application head.
pub const RESERVED: &[&str] = &["lambda", "quote"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    /// A variable reference, or the constants `t` / `nil`.
    Sym(Ident),
    Int(BigInt),
    /// Always in lowest terms, positive denominator, never integral
    /// (integral values normalize to `Int`).
    Rat(BigRational),
    Str(String),
    /// `'dog` — a symbol as datum, only meaningful to the oracle.
    QuotedSym(Ident),
    /// `'(...)` — a list as datum, only meaningful to the oracle.
    QuotedList(Vec<Term>),
    App(Ident, Vec<Term>),
    /// A saturated lambda application `((lambda (formals) body) actuals)`.
    Lambda {
        formals: Vec<Ident>,
        body: Box<Term>,
        actuals: Vec<Term>,
    },
}

impl Term {
    pub fn sym(name: &str) -> Term {
        Term::Sym(name.to_string())
    }

    pub fn int(v: i64) -> Term {
        Term::Int(BigInt::from(v))
    }

    /// Reduced rational; collapses to `Int` when integral.
    pub fn rat(num: BigInt, den: BigInt) -> Term {
        let r = BigRational::new(num, den);
        if r.is_integer() {
            Term::Int(r.to_integer())
        } else {
            Term::Rat(r)
        }
    }

    pub fn app(head: &str, args: Vec<Term>) -> Term {
        Term::App(head.to_string(), args)
    }

    pub fn t() -> Term {
        Term::sym("t")
    }

    pub fn nil() -> Term {
        Term::sym("nil")
    }

    pub fn is_t(&self) -> bool {
        matches!(self, Term::Sym(s) if s == "t")
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, Term::Sym(s) if s == "nil")
    }

    /// `(implies a b)`.
    pub fn implies(a: Term, b: Term) -> Term {
        Term::app("implies", vec![a, b])
    }

    /// `and` as its if-expansion: `(if a rest nil)`; empty conjunction is `t`.
    pub fn and(conjuncts: Vec<Term>) -> Term {
        let mut it = conjuncts.into_iter().rev();
        match it.next() {
            None => Term::t(),
            Some(last) => it.fold(last, |acc, c| Term::app("if", vec![c, acc, Term::nil()])),
        }
    }

    /// `or` as its if-expansion: `(if a t rest)`; empty disjunction is `nil`.
    pub fn or(disjuncts: Vec<Term>) -> Term {
        let mut it = disjuncts.into_iter().rev();
        match it.next() {
            None => Term::nil(),
            Some(last) => it.fold(last, |acc, d| Term::app("if", vec![d, Term::t(), acc])),
        }
    }

    /// Free variables (symbols minus `t`/`nil` and lambda-bound names).
    pub fn free_vars(&self) -> BTreeSet<Ident> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Ident>, out: &mut BTreeSet<Ident>) {
        match self {
            Term::Sym(s) => {
                if s != "t" && s != "nil" && !bound.iter().any(|b| b == s) {
                    out.insert(s.clone());
                }
            }
            Term::Int(_) | Term::Rat(_) | Term::Str(_) => {}
            Term::QuotedSym(_) | Term::QuotedList(_) => {}
            Term::App(_, args) => {
                for a in args {
                    a.collect_free(bound, out);
                }
            }
            Term::Lambda {
                formals,
                body,
                actuals,
            } => {
                for a in actuals {
                    a.collect_free(bound, out);
                }
                let n = bound.len();
                bound.extend(formals.iter().cloned());
                body.collect_free(bound, out);
                bound.truncate(n);
            }
        }
    }

    /// Simultaneous replacement of each source expression (by structural
    /// equality) with a fresh variable. Every fresh name must be absent
    /// from the free variables of `self`.
    pub fn substitute(&self, mapping: &[(Term, Ident)]) -> Result<Term> {
        let free = self.free_vars();
        for (_, fresh) in mapping {
            if free.contains(fresh) {
                return Err(Error::Substitution(format!(
                    "replacement variable {fresh} collides with an existing free variable"
                )));
            }
        }
        Ok(self.substitute_unchecked(mapping))
    }

    pub(crate) fn substitute_unchecked(&self, mapping: &[(Term, Ident)]) -> Term {
        for (src, fresh) in mapping {
            if self == src {
                return Term::Sym(fresh.clone());
            }
        }
        match self {
            Term::Sym(_)
            | Term::Int(_)
            | Term::Rat(_)
            | Term::Str(_)
            | Term::QuotedSym(_)
            | Term::QuotedList(_) => self.clone(),
            Term::App(h, args) => Term::App(
                h.clone(),
                args.iter().map(|a| a.substitute_unchecked(mapping)).collect(),
            ),
            Term::Lambda {
                formals,
                body,
                actuals,
            } => Term::Lambda {
                formals: formals.clone(),
                body: Box::new(body.substitute_unchecked(mapping)),
                actuals: actuals
                    .iter()
                    .map(|a| a.substitute_unchecked(mapping))
                    .collect(),
            },
        }
    }

    /// Replace free occurrences of variables by terms (used for beta
    /// reduction and definition expansion; capture is avoided by the
    /// fresh-formal discipline of the expander).
    pub(crate) fn subst_vars(&self, mapping: &[(Ident, Term)]) -> Term {
        match self {
            Term::Sym(s) => {
                for (v, t) in mapping {
                    if v == s {
                        return t.clone();
                    }
                }
                self.clone()
            }
            Term::Int(_)
            | Term::Rat(_)
            | Term::Str(_)
            | Term::QuotedSym(_)
            | Term::QuotedList(_) => self.clone(),
            Term::App(h, args) => Term::App(
                h.clone(),
                args.iter().map(|a| a.subst_vars(mapping)).collect(),
            ),
            Term::Lambda {
                formals,
                body,
                actuals,
            } => {
                let inner: Vec<(Ident, Term)> = mapping
                    .iter()
                    .filter(|(v, _)| !formals.contains(v))
                    .cloned()
                    .collect();
                Term::Lambda {
                    formals: formals.clone(),
                    body: Box::new(body.subst_vars(&inner)),
                    actuals: actuals.iter().map(|a| a.subst_vars(mapping)).collect(),
                }
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Sym(s) => write!(f, "{s}"),
            Term::Int(i) => write!(f, "{i}"),
            Term::Rat(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Term::Str(s) => write!(f, "\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"")),
            Term::QuotedSym(s) => write!(f, "'{s}"),
            Term::QuotedList(items) => {
                write!(f, "'(")?;
                for (i, t) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write_datum(f, t)?;
                }
                write!(f, ")")
            }
            Term::App(h, args) => {
                write!(f, "({h}")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                write!(f, ")")
            }
            Term::Lambda {
                formals,
                body,
                actuals,
            } => {
                write!(f, "((lambda (")?;
                for (i, v) in formals.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ") {body})")?;
                for a in actuals {
                    write!(f, " {a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

// Inside a quoted list, symbols print without the leading quote.
fn write_datum(f: &mut fmt::Formatter<'_>, t: &Term) -> fmt::Result {
    match t {
        Term::QuotedSym(s) => write!(f, "{s}"),
        Term::QuotedList(items) => {
            write!(f, "(")?;
            for (i, t) in items.iter().enumerate() {
                if i > 0 {
                    write!(f, " ")?;
                }
                write_datum(f, t)?;
            }
            write!(f, ")")
        }
        other => write!(f, "{other}"),
    }
}

/// Canonical text form of a term.
pub fn print(term: &Term) -> String {
    term.to_string()
}

/// A boolean-valued clause together with its free variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Goal {
    pub clause: Term,
    pub free_vars: BTreeSet<Ident>,
}

impl Goal {
    pub fn new(clause: Term) -> Goal {
        let free_vars = clause.free_vars();
        Goal { clause, free_vars }
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

// Identifier charset plus ':' for hint keywords.
const ATOM_EXTRA: &str = "-_/<>=+*:";

fn is_atom_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || ATOM_EXTRA.contains(c)
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    Quote,
    Str(String),
    Atom(String),
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        }
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek_char()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        loop {
            match self.peek_char() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some(';') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
    }

    /// Next token with its start position, or None at end of input.
    fn next_tok(&mut self) -> Result<Option<(Tok, usize, usize)>> {
        self.skip_ws();
        let (line, col) = (self.line, self.col);
        let c = match self.peek_char() {
            None => return Ok(None),
            Some(c) => c,
        };
        let tok = match c {
            '(' => {
                self.bump();
                Tok::LParen
            }
            ')' => {
                self.bump();
                Tok::RParen
            }
            '\'' => {
                self.bump();
                Tok::Quote
            }
            '"' => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => return Err(self.err("unterminated string literal")),
                        Some('"') => break,
                        Some('\\') => match self.bump() {
                            Some('"') => s.push('"'),
                            Some('\\') => s.push('\\'),
                            Some(c) => return Err(self.err(format!("bad escape \\{c}"))),
                            None => return Err(self.err("unterminated string literal")),
                        },
                        Some(c) => s.push(c),
                    }
                }
                Tok::Str(s)
            }
            c if is_atom_char(c) => {
                let mut s = String::new();
                while let Some(c) = self.peek_char() {
                    if is_atom_char(c) {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                // ACL2 symbols are case-insensitive; normalize to lower case.
                Tok::Atom(s.to_ascii_lowercase())
            }
            c => return Err(self.err(format!("unexpected character {c:?}"))),
        };
        Ok(Some((tok, line, col)))
    }
}

/// Raw s-expressions, the parser's intermediate form. Hint and goal-file
/// syntax is not term syntax, so those modules parse at this level.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Sexp {
    Atom(String, usize, usize),
    Str(String),
    List(Vec<Sexp>),
    Quoted(Box<Sexp>),
}

fn parse_sexp(lx: &mut Lexer) -> Result<Option<Sexp>> {
    let tok = match lx.next_tok()? {
        None => return Ok(None),
        Some(t) => t,
    };
    parse_sexp_tok(lx, tok).map(Some)
}

fn parse_sexp_tok(lx: &mut Lexer, (tok, line, col): (Tok, usize, usize)) -> Result<Sexp> {
    match tok {
        Tok::Atom(s) => Ok(Sexp::Atom(s, line, col)),
        Tok::Str(s) => Ok(Sexp::Str(s)),
        Tok::Quote => {
            let inner = match lx.next_tok()? {
                None => {
                    return Err(Error::Parse {
                        line,
                        col,
                        msg: "quote at end of input".into(),
                    })
                }
                Some(t) => parse_sexp_tok(lx, t)?,
            };
            Ok(Sexp::Quoted(Box::new(inner)))
        }
        Tok::LParen => {
            let mut items = Vec::new();
            loop {
                match lx.next_tok()? {
                    None => {
                        return Err(Error::Parse {
                            line,
                            col,
                            msg: "unbalanced parentheses: missing )".into(),
                        })
                    }
                    Some((Tok::RParen, _, _)) => break,
                    Some(t) => items.push(parse_sexp_tok(lx, t)?),
                }
            }
            Ok(Sexp::List(items))
        }
        Tok::RParen => Err(Error::Parse {
            line,
            col,
            msg: "unbalanced parentheses: unexpected )".into(),
        }),
    }
}

fn classify_atom(s: &str, line: usize, col: usize) -> Result<Term> {
    let starts_numeric = {
        let body = s.strip_prefix('-').unwrap_or(s);
        body.chars().next().is_some_and(|c| c.is_ascii_digit())
    };
    if !starts_numeric {
        return Ok(Term::Sym(s.to_string()));
    }
    let err = |msg: String| Error::Parse { line, col, msg };
    if let Some((n, d)) = s.split_once('/') {
        let num: BigInt = n
            .parse()
            .map_err(|_| err(format!("bad numeral {s}")))?;
        let den: BigInt = d
            .parse()
            .map_err(|_| err(format!("bad numeral {s}")))?;
        if den.is_zero() {
            return Err(err(format!("bad numeral {s}: zero denominator")));
        }
        Ok(Term::rat(num, den))
    } else {
        let v: BigInt = s
            .parse()
            .map_err(|_| err(format!("bad numeral {s}")))?;
        Ok(Term::Int(v))
    }
}

fn sexp_to_datum(sx: &Sexp) -> Result<Term> {
    match sx {
        Sexp::Atom(s, line, col) => match classify_atom(s, *line, *col)? {
            Term::Sym(name) => Ok(Term::QuotedSym(name)),
            num => Ok(num),
        },
        Sexp::Str(s) => Ok(Term::Str(s.clone())),
        Sexp::List(items) => Ok(Term::QuotedList(
            items.iter().map(sexp_to_datum).collect::<Result<_>>()?,
        )),
        Sexp::Quoted(inner) => sexp_to_datum(inner),
    }
}

pub(crate) fn sexp_to_term(sx: &Sexp) -> Result<Term> {
    match sx {
        Sexp::Atom(s, line, col) => classify_atom(s, *line, *col),
        Sexp::Str(s) => Ok(Term::Str(s.clone())),
        Sexp::Quoted(inner) => sexp_to_datum(inner),
        Sexp::List(items) => {
            if items.is_empty() {
                return Ok(Term::nil());
            }
            match &items[0] {
                // ((lambda (formals) body) actuals...)
                Sexp::List(head) => {
                    let is_lambda = matches!(&head.first(), Some(Sexp::Atom(s, _, _)) if s == "lambda");
                    if !is_lambda {
                        return Err(Error::Parse {
                            line: 0,
                            col: 0,
                            msg: "list in operator position is not a lambda".into(),
                        });
                    }
                    if head.len() != 3 {
                        return Err(Error::Parse {
                            line: 0,
                            col: 0,
                            msg: "lambda takes a formal list and a body".into(),
                        });
                    }
                    let formals = match &head[1] {
                        Sexp::List(fs) => fs
                            .iter()
                            .map(|f| match f {
                                Sexp::Atom(s, _, _) => Ok(s.clone()),
                                _ => Err(Error::Parse {
                                    line: 0,
                                    col: 0,
                                    msg: "lambda formals must be symbols".into(),
                                }),
                            })
                            .collect::<Result<Vec<_>>>()?,
                        _ => {
                            return Err(Error::Parse {
                                line: 0,
                                col: 0,
                                msg: "lambda formals must be a list".into(),
                            })
                        }
                    };
                    let mut seen = BTreeSet::new();
                    for f in &formals {
                        if !seen.insert(f.clone()) {
                            return Err(Error::Parse {
                                line: 0,
                                col: 0,
                                msg: format!("duplicate lambda formal {f}"),
                            });
                        }
                    }
                    let body = sexp_to_term(&head[2])?;
                    let actuals = items[1..]
                        .iter()
                        .map(sexp_to_term)
                        .collect::<Result<Vec<_>>>()?;
                    if actuals.len() != formals.len() {
                        return Err(Error::Parse {
                            line: 0,
                            col: 0,
                            msg: format!(
                                "lambda arity mismatch: {} formals, {} actuals",
                                formals.len(),
                                actuals.len()
                            ),
                        });
                    }
                    Ok(Term::Lambda {
                        formals,
                        body: Box::new(body),
                        actuals,
                    })
                }
                Sexp::Atom(head, line, col) => {
                    let args = || -> Result<Vec<Term>> {
                        items[1..].iter().map(sexp_to_term).collect()
                    };
                    match head.as_str() {
                        "quote" => {
                            if items.len() != 2 {
                                return Err(Error::Parse {
                                    line: *line,
                                    col: *col,
                                    msg: "quote takes one argument".into(),
                                });
                            }
                            sexp_to_datum(&items[1])
                        }
                        "lambda" => Err(Error::Parse {
                            line: *line,
                            col: *col,
                            msg: "bare lambda is not a term; write ((lambda (..) body) args)"
                                .into(),
                        }),
                        // Surface macros expand to if forms.
                        "and" => Ok(Term::and(args()?)),
                        "or" => Ok(Term::or(args()?)),
                        _ => Ok(Term::App(head.clone(), args()?)),
                    }
                }
                Sexp::Str(_) | Sexp::Quoted(_) => Err(Error::Parse {
                    line: 0,
                    col: 0,
                    msg: "bad operator position".into(),
                }),
            }
        }
    }
}

/// Parse a source into raw s-expressions.
pub(crate) fn parse_sexps(source: &str) -> Result<Vec<Sexp>> {
    let mut lx = Lexer::new(source);
    let mut out = Vec::new();
    while let Some(sx) = parse_sexp(&mut lx)? {
        out.push(sx);
    }
    Ok(out)
}

/// Parse a sequence of top-level s-expressions into terms.
pub fn parse(source: &str) -> Result<Vec<Term>> {
    let mut lx = Lexer::new(source);
    let mut out = Vec::new();
    while let Some(sx) = parse_sexp(&mut lx)? {
        out.push(sexp_to_term(&sx)?);
    }
    Ok(out)
}

/// Parse exactly one term.
pub fn parse_one(source: &str) -> Result<Term> {
    let mut terms = parse(source)?;
    match terms.len() {
        1 => Ok(terms.pop().unwrap()),
        n => Err(Error::Parse {
            line: 1,
            col: 1,
            msg: format!("expected one form, found {n}"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_application() {
        let t = parse_one("(binary-+ x 3)").unwrap();
        assert_eq!(
            t,
            Term::app("binary-+", vec![Term::sym("x"), Term::int(3)])
        );
    }

    #[test]
    fn reduces_rationals() {
        assert_eq!(parse_one("3/6").unwrap(), Term::rat(1.into(), 2.into()));
        assert_eq!(print(&Term::rat(1.into(), 2.into())), "1/2");
        // integral rationals collapse
        assert_eq!(parse_one("4/2").unwrap(), Term::int(2));
    }

    #[test]
    fn nested_app_free_vars() {
        let t =
            parse_one("(equal (equal x y) (equal (binary-+ x (unary-- y)) 0))").unwrap();
        let fv = t.free_vars();
        assert_eq!(fv.len(), 2);
        assert!(fv.contains("x") && fv.contains("y"));
    }

    #[test]
    fn prints_unary_minus() {
        assert_eq!(
            print(&Term::app("unary--", vec![Term::sym("y")])),
            "(unary-- y)"
        );
    }

    #[test]
    fn prints_lambda() {
        let t = Term::Lambda {
            formals: vec!["a".into()],
            body: Box::new(Term::app(
                "binary-+",
                vec![Term::sym("a"), Term::sym("a")],
            )),
            actuals: vec![Term::sym("x")],
        };
        assert_eq!(print(&t), "((lambda (a) (binary-+ a a)) x)");
        assert_eq!(parse_one(&print(&t)).unwrap(), t);
    }

    #[test]
    fn lambda_binds() {
        let t = parse_one("((lambda (a) a) x)").unwrap();
        let fv = t.free_vars();
        assert_eq!(fv.into_iter().collect::<Vec<_>>(), vec!["x".to_string()]);
    }

    #[test]
    fn macro_expansion() {
        assert_eq!(
            parse_one("(and a b)").unwrap(),
            parse_one("(if a b nil)").unwrap()
        );
        assert_eq!(
            parse_one("(or a b)").unwrap(),
            parse_one("(if a t b)").unwrap()
        );
        assert_eq!(parse_one("(and)").unwrap(), Term::t());
        assert_eq!(parse_one("(or)").unwrap(), Term::nil());
        assert_eq!(parse_one("(and a)").unwrap(), Term::sym("a"));
    }

    #[test]
    fn quoted_data() {
        assert_eq!(parse_one("'dog").unwrap(), Term::QuotedSym("dog".into()));
        let t = parse_one("'(\"hello\" 2 world)").unwrap();
        assert_eq!(
            t,
            Term::QuotedList(vec![
                Term::Str("hello".into()),
                Term::int(2),
                Term::QuotedSym("world".into()),
            ])
        );
        assert_eq!(print(&t), "'(\"hello\" 2 world)");
        assert_eq!(parse_one(&print(&t)).unwrap(), t);
        assert!(t.free_vars().is_empty());
    }

    #[test]
    fn case_normalization() {
        assert_eq!(parse_one("FOO").unwrap(), Term::sym("foo"));
    }

    #[test]
    fn parse_errors_locate() {
        match parse("(foo") {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("unbalanced")),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(parse("3x").is_err());
        assert!(parse("1/0").is_err());
    }

    #[test]
    fn substitute_cuts_expression() {
        let t = parse_one("(< (expt z m) 1)").unwrap();
        let src = parse_one("(expt z m)").unwrap();
        let out = t.substitute(&[(src, "expt_z_m".into())]).unwrap();
        assert_eq!(out, parse_one("(< expt_z_m 1)").unwrap());
    }

    #[test]
    fn substitute_empty_is_identity() {
        let t = parse_one("(< x y)").unwrap();
        assert_eq!(t.substitute(&[]).unwrap(), t);
    }

    #[test]
    fn substitute_rejects_collision() {
        let t = parse_one("(< x y)").unwrap();
        let src = parse_one("(binary-+ x 1)").unwrap();
        assert!(t.substitute(&[(src, "y".into())]).is_err());
    }
}
