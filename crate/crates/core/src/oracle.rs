//! Untyped evaluator and falsification oracle for the goal language.
//!
//! Evaluation is total over the completion semantics: arithmetic and `<`
//! treat non-numeric values as 0, `(unary-/ 0)` is 0, `equal` is
//! structural, and `if` treats `nil` as false and everything else as
//! true. No floating point anywhere; all numbers are exact rationals.
//!
//! "Pass" from [`falsify`] means "not falsified by exhaustive tiny-domain
//! search plus N random samples" — evidence, not proof.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::goalfile::Definitions;
use crate::term::{Ident, Term};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Value {
    Rat(BigRational),
    Bool(bool),
    Sym(String),
    Str(String),
    List(Vec<Value>),
}

impl Value {
    pub fn int(v: i64) -> Value {
        Value::Rat(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn rat(num: i64, den: i64) -> Value {
        Value::Rat(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn truthy(&self) -> bool {
        !matches!(self, Value::Bool(false))
    }

    /// Arithmetic coercion: non-rationals behave as 0.
    pub fn as_rat(&self) -> BigRational {
        match self {
            Value::Rat(r) => r.clone(),
            _ => BigRational::zero(),
        }
    }

    /// Value printed in goal syntax (for counterexample reports).
    pub fn to_goal_syntax(&self) -> String {
        match self {
            Value::Rat(r) => {
                if r.is_integer() {
                    r.to_integer().to_string()
                } else {
                    format!("{}/{}", r.numer(), r.denom())
                }
            }
            Value::Bool(true) => "t".into(),
            Value::Bool(false) => "nil".into(),
            Value::Sym(s) => format!("'{s}"),
            Value::Str(s) => format!("\"{s}\""),
            Value::List(items) => {
                let body: Vec<String> = items
                    .iter()
                    .map(|v| match v {
                        Value::Sym(s) => s.clone(),
                        other => other.to_goal_syntax(),
                    })
                    .collect();
                format!("'({})", body.join(" "))
            }
        }
    }
}

pub type Valuation = BTreeMap<Ident, Value>;

/// Evaluation can fail (term outside oracle semantics) or run out of
/// fuel; the latter is reported as inconclusive, never as a wrong value.
#[derive(Debug)]
pub enum EvalError {
    FuelExhausted,
    Oracle(Error),
}

impl EvalError {
    fn unknown(op: &str) -> EvalError {
        EvalError::Oracle(Error::Oracle(format!(
            "operator {op} is outside oracle semantics"
        )))
    }
}

pub type EvalResult = std::result::Result<Value, EvalError>;

pub const DEFAULT_FUEL: u64 = 10_000;

struct Evaluator<'a> {
    defs: &'a Definitions,
    fuel: u64,
    depth: u32,
}

// Native-stack guard; hitting it is inconclusive, like running out of fuel.
const MAX_DEPTH: u32 = 200;

/// Evaluate a closed-under-`v` term with the default fuel.
pub fn eval_term(term: &Term, v: &Valuation, defs: &Definitions) -> EvalResult {
    eval_term_fuel(term, v, defs, DEFAULT_FUEL)
}

pub fn eval_term_fuel(term: &Term, v: &Valuation, defs: &Definitions, fuel: u64) -> EvalResult {
    let mut ev = Evaluator { defs, fuel, depth: 0 };
    ev.eval(term, v)
}

fn datum_value(t: &Term) -> Value {
    match t {
        Term::Int(i) => Value::Rat(BigRational::from_integer(i.clone())),
        Term::Rat(r) => Value::Rat(r.clone()),
        Term::Str(s) => Value::Str(s.clone()),
        Term::QuotedSym(s) | Term::Sym(s) => match s.as_str() {
            "t" => Value::Bool(true),
            "nil" => Value::Bool(false),
            _ => Value::Sym(s.clone()),
        },
        Term::QuotedList(items) => Value::List(items.iter().map(datum_value).collect()),
        // Applications cannot occur inside quoted data.
        _ => Value::Bool(false),
    }
}

impl<'a> Evaluator<'a> {
    fn eval(&mut self, term: &Term, v: &Valuation) -> EvalResult {
        if self.fuel == 0 || self.depth >= MAX_DEPTH {
            return Err(EvalError::FuelExhausted);
        }
        self.fuel -= 1;
        self.depth += 1;
        let out = self.eval_inner(term, v);
        self.depth -= 1;
        out
    }

    fn eval_inner(&mut self, term: &Term, v: &Valuation) -> EvalResult {
        match term {
            Term::Sym(s) => match s.as_str() {
                "t" => Ok(Value::Bool(true)),
                "nil" => Ok(Value::Bool(false)),
                _ => v.get(s).cloned().ok_or_else(|| {
                    EvalError::Oracle(Error::Oracle(format!("unbound variable {s}")))
                }),
            },
            Term::Int(i) => Ok(Value::Rat(BigRational::from_integer(i.clone()))),
            Term::Rat(r) => Ok(Value::Rat(r.clone())),
            Term::Str(s) => Ok(Value::Str(s.clone())),
            Term::QuotedSym(_) | Term::QuotedList(_) => Ok(datum_value(term)),
            Term::Lambda {
                formals,
                body,
                actuals,
            } => {
                let mut inner = v.clone();
                for (f, a) in formals.iter().zip(actuals) {
                    let av = self.eval(a, v)?;
                    inner.insert(f.clone(), av);
                }
                self.eval(body, &inner)
            }
            Term::App(head, args) => self.apply(head, args, v),
        }
    }

    fn apply(&mut self, head: &str, args: &[Term], v: &Valuation) -> EvalResult {
        // if / implies need lazy evaluation.
        match head {
            "if" => {
                if args.len() != 3 {
                    return Err(EvalError::unknown("if (wrong arity)"));
                }
                let c = self.eval(&args[0], v)?;
                return if c.truthy() {
                    self.eval(&args[1], v)
                } else {
                    self.eval(&args[2], v)
                };
            }
            "implies" => {
                if args.len() != 2 {
                    return Err(EvalError::unknown("implies (wrong arity)"));
                }
                let a = self.eval(&args[0], v)?;
                return if !a.truthy() {
                    Ok(Value::Bool(true))
                } else {
                    Ok(Value::Bool(self.eval(&args[1], v)?.truthy()))
                };
            }
            _ => {}
        }

        let mut vals = Vec::with_capacity(args.len());
        for a in args {
            vals.push(self.eval(a, v)?);
        }
        let arity = |n: usize| -> std::result::Result<(), EvalError> {
            if vals.len() == n {
                Ok(())
            } else {
                Err(EvalError::unknown(&format!("{head} (wrong arity)")))
            }
        };

        match head {
            "binary-+" => {
                arity(2)?;
                Ok(Value::Rat(vals[0].as_rat() + vals[1].as_rat()))
            }
            "binary-*" => {
                arity(2)?;
                Ok(Value::Rat(vals[0].as_rat() * vals[1].as_rat()))
            }
            "unary--" => {
                arity(1)?;
                Ok(Value::Rat(-vals[0].as_rat()))
            }
            "unary-/" => {
                arity(1)?;
                let r = vals[0].as_rat();
                if r.is_zero() {
                    Ok(Value::Rat(BigRational::zero()))
                } else {
                    Ok(Value::Rat(r.recip()))
                }
            }
            "<" => {
                arity(2)?;
                Ok(Value::Bool(vals[0].as_rat() < vals[1].as_rat()))
            }
            "equal" => {
                arity(2)?;
                Ok(Value::Bool(vals[0] == vals[1]))
            }
            "not" => {
                arity(1)?;
                Ok(Value::Bool(!vals[0].truthy()))
            }
            "rationalp" => {
                arity(1)?;
                Ok(Value::Bool(matches!(vals[0], Value::Rat(_))))
            }
            "integerp" => {
                arity(1)?;
                Ok(Value::Bool(
                    matches!(&vals[0], Value::Rat(r) if r.is_integer()),
                ))
            }
            "booleanp" => {
                arity(1)?;
                Ok(Value::Bool(matches!(vals[0], Value::Bool(_))))
            }
            "list" => Ok(Value::List(vals)),
            "expt" => {
                arity(2)?;
                reference_expt(&vals[0], &vals[1])
            }
            _ => self.apply_def(head, vals),
        }
    }

    fn apply_def(&mut self, head: &str, vals: Vec<Value>) -> EvalResult {
        let def = match self.defs.get(head) {
            Some(d) => d.clone(),
            None => return Err(EvalError::unknown(head)),
        };
        if def.formals.len() != vals.len() {
            return Err(EvalError::unknown(&format!("{head} (wrong arity)")));
        }
        let env: Valuation = def.formals.iter().cloned().zip(vals).collect();
        self.eval(&def.body, &env)
    }
}

/// ACL2's expt on completed values: non-integer exponents count as 0
/// (so the result is 1), a zero base with a nonzero exponent gives 0.
pub fn reference_expt(base: &Value, exp: &Value) -> EvalResult {
    let b = base.as_rat();
    let e = match exp {
        Value::Rat(r) if r.is_integer() => r.to_integer(),
        _ => BigInt::zero(),
    };
    if e.is_zero() {
        return Ok(Value::Rat(BigRational::one()));
    }
    if b.is_zero() {
        return Ok(Value::Rat(BigRational::zero()));
    }
    let mag = e.abs();
    let Some(mag) = mag.to_u32() else {
        return Err(EvalError::FuelExhausted);
    };
    if mag > 4096 {
        return Err(EvalError::FuelExhausted);
    }
    let p = BigRational::new(
        b.numer().pow(mag),
        b.denom().pow(mag),
    );
    Ok(Value::Rat(if e.is_negative() { p.recip() } else { p }))
}

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub samples: usize,
    pub seed: u64,
    pub fuel: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            samples: 1000,
            seed: 0,
            fuel: DEFAULT_FUEL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Pass,
    Falsified(Valuation),
    Inconclusive,
}

/// The mixed domain used for exhaustive search: booleans, small
/// rationals, a symbol, a string, and a three-element list.
pub fn tiny_domain() -> Vec<Value> {
    vec![
        Value::Bool(true),
        Value::Bool(false),
        Value::int(-2),
        Value::int(-1),
        Value::int(0),
        Value::rat(1, 2),
        Value::int(1),
        Value::int(2),
        Value::Sym("dog".into()),
        Value::Str("hello".into()),
        Value::List(vec![
            Value::Str("hello".into()),
            Value::int(2),
            Value::Sym("world".into()),
        ]),
    ]
}

fn random_value(rng: &mut ChaCha8Rng, depth: u32) -> Value {
    match rng.gen_range(0..12u32) {
        0..=4 => {
            let num = rng.gen_range(-8i64..=8);
            let den = rng.gen_range(1i64..=4);
            Value::Rat(BigRational::new(BigInt::from(num), BigInt::from(den)))
        }
        5..=7 => Value::int(rng.gen_range(-16i64..=16)),
        8 => Value::Bool(rng.gen_bool(0.5)),
        9 => Value::Sym(["dog", "cat", "world"][rng.gen_range(0..3)].into()),
        10 => Value::Str(["hello", "bye"][rng.gen_range(0..2)].into()),
        _ => {
            if depth == 0 {
                Value::int(0)
            } else {
                let n = rng.gen_range(0..3);
                Value::List((0..n).map(|_| random_value(rng, depth - 1)).collect())
            }
        }
    }
}

/// Search for a valuation falsifying `clause`: exhaustive over the tiny
/// domain when the clause has at most 3 free variables, then `samples`
/// random valuations. Deterministic for a fixed seed.
pub fn falsify(clause: &Term, cfg: &SamplerConfig, defs: &Definitions) -> Verdict {
    let vars: Vec<Ident> = clause.free_vars().into_iter().collect();
    let mut inconclusive = false;

    let check = |v: &Valuation, inconclusive: &mut bool| -> Option<Valuation> {
        match eval_term_fuel(clause, v, defs, cfg.fuel) {
            Ok(val) if !val.truthy() => Some(v.clone()),
            Ok(_) => None,
            Err(EvalError::FuelExhausted) => {
                *inconclusive = true;
                None
            }
            Err(EvalError::Oracle(_)) => {
                *inconclusive = true;
                None
            }
        }
    };

    if vars.len() <= 3 {
        let domain = tiny_domain();
        let mut idx = vec![0usize; vars.len()];
        loop {
            let v: Valuation = vars
                .iter()
                .zip(&idx)
                .map(|(name, &i)| (name.clone(), domain[i].clone()))
                .collect();
            if let Some(w) = check(&v, &mut inconclusive) {
                return Verdict::Falsified(w);
            }
            // odometer
            let mut k = 0;
            loop {
                if k == idx.len() {
                    // done with exhaustive pass
                    idx.clear();
                    break;
                }
                idx[k] += 1;
                if idx[k] < domain.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if idx.is_empty() {
                break;
            }
            if vars.is_empty() {
                break;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.samples {
        let v: Valuation = vars
            .iter()
            .map(|name| (name.clone(), random_value(&mut rng, 2)))
            .collect();
        if let Some(w) = check(&v, &mut inconclusive) {
            return Verdict::Falsified(w);
        }
    }

    if inconclusive {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    }
}
