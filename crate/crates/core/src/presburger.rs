//! The existential, negation-free fragment of Presburger arithmetic that the
//! Parikh formula lives in: linear terms over naturals, `=` and `>` atoms,
//! conjunction, disjunction and existential blocks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::grammar::{Grammar, NtId, ParikhVector, RuleId, TermId};

/// A formula variable. The derived order is the canonical one: all rule
/// counts, then nonterminal indices, then letter counts, each by id.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    /// `x_p`: number of applications of rule `p`.
    RuleCount(RuleId),
    /// `y_X`: first-occurrence index of nonterminal `X`.
    NtIndex(NtId),
    /// `z_a`: number of occurrences of letter `a`.
    LetterCount(TermId),
}

/// `constant + Σ coefficient·var` with positive coefficients, sorted by var.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct LinearTerm {
    constant: u64,
    monomials: Vec<(u64, Var)>,
}

impl LinearTerm {
    pub fn constant(c: u64) -> Self {
        LinearTerm {
            constant: c,
            monomials: Vec::new(),
        }
    }

    pub fn var(v: Var) -> Self {
        LinearTerm {
            constant: 0,
            monomials: vec![(1, v)],
        }
    }

    /// Builds a normalized term: duplicate vars are merged, zero
    /// coefficients dropped.
    pub fn new(constant: u64, monomials: impl IntoIterator<Item = (u64, Var)>) -> Self {
        let mut merged: BTreeMap<Var, u64> = BTreeMap::new();
        for (c, v) in monomials {
            *merged.entry(v).or_insert(0) += c;
        }
        LinearTerm {
            constant,
            monomials: merged
                .into_iter()
                .filter(|&(_, c)| c > 0)
                .map(|(v, c)| (c, v))
                .collect(),
        }
    }

    pub fn plus_constant(mut self, c: u64) -> Self {
        self.constant += c;
        self
    }

    pub fn constant_part(&self) -> u64 {
        self.constant
    }

    pub fn monomials(&self) -> &[(u64, Var)] {
        &self.monomials
    }

    pub fn eval(&self, asg: &Assignment) -> Result<u128, EvalError> {
        self.monomials
            .iter()
            .try_fold(u128::from(self.constant), |acc, &(c, v)| {
                Ok(acc + u128::from(c) * u128::from(asg.require(v)?))
            })
    }

    fn vars_into(&self, out: &mut BTreeSet<Var>) {
        out.extend(self.monomials.iter().map(|&(_, v)| v));
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    Eq,
    Gt,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub left: LinearTerm,
    pub relation: Relation,
    pub right: LinearTerm,
}

impl Atom {
    pub fn eq(left: LinearTerm, right: LinearTerm) -> Self {
        Atom {
            left,
            relation: Relation::Eq,
            right,
        }
    }

    pub fn gt(left: LinearTerm, right: LinearTerm) -> Self {
        Atom {
            left,
            relation: Relation::Gt,
            right,
        }
    }

    pub fn eval(&self, asg: &Assignment) -> Result<bool, EvalError> {
        let (l, r) = (self.left.eval(asg)?, self.right.eval(asg)?);
        Ok(match self.relation {
            Relation::Eq => l == r,
            Relation::Gt => l > r,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    Atom(Atom),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Exists(Vec<Var>, Box<Formula>),
}

impl From<Atom> for Formula {
    fn from(a: Atom) -> Self {
        Formula::Atom(a)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("variable {0:?} is unassigned")]
    Unassigned(Var),
}

/// A valuation of formula variables over the naturals.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Assignment {
    values: BTreeMap<Var, u64>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assignment with `x_p := x[p]`, `y_X := y[X]`, `z_a := z[a]`.
    pub fn from_parts(x: &[u64], y: &[u64], z: &ParikhVector) -> Self {
        let mut asg = Assignment::new();
        for (i, &v) in x.iter().enumerate() {
            asg.set(Var::RuleCount(RuleId(i)), v);
        }
        for (i, &v) in y.iter().enumerate() {
            asg.set(Var::NtIndex(NtId(i)), v);
        }
        for (i, &v) in z.0.iter().enumerate() {
            asg.set(Var::LetterCount(TermId(i)), v);
        }
        asg
    }

    pub fn set(&mut self, var: Var, value: u64) -> &mut Self {
        self.values.insert(var, value);
        self
    }

    pub fn with(mut self, var: Var, value: u64) -> Self {
        self.set(var, value);
        self
    }

    pub fn get(&self, var: Var) -> Option<u64> {
        self.values.get(&var).copied()
    }

    fn require(&self, var: Var) -> Result<u64, EvalError> {
        self.get(var).ok_or(EvalError::Unassigned(var))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, u64)> + '_ {
        self.values.iter().map(|(&k, &v)| (k, v))
    }
}

impl Formula {
    /// Evaluates under `asg`. Existential binders are not searched: their
    /// variables must already be assigned, so this checks a candidate
    /// witness. Every subformula is evaluated, so a missing variable is
    /// reported even where a connective would short-circuit.
    pub fn evaluate(&self, asg: &Assignment) -> Result<bool, EvalError> {
        match self {
            Formula::Atom(a) => a.eval(asg),
            Formula::And(fs) => fs
                .iter()
                .try_fold(true, |acc, f| Ok(f.evaluate(asg)? && acc)),
            Formula::Or(fs) => fs
                .iter()
                .try_fold(false, |acc, f| Ok(f.evaluate(asg)? || acc)),
            Formula::Exists(_, body) => body.evaluate(asg),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_free(&BTreeSet::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &BTreeSet<Var>, out: &mut BTreeSet<Var>) {
        match self {
            Formula::Atom(a) => {
                let mut vs = BTreeSet::new();
                a.left.vars_into(&mut vs);
                a.right.vars_into(&mut vs);
                out.extend(vs.difference(bound));
            }
            Formula::And(fs) | Formula::Or(fs) => {
                for f in fs {
                    f.collect_free(bound, out);
                }
            }
            Formula::Exists(vs, body) => {
                let mut inner = bound.clone();
                inner.extend(vs.iter().copied());
                body.collect_free(&inner, out);
            }
        }
    }

    /// All variables, free or bound.
    pub fn all_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| match f {
            Formula::Atom(a) => {
                a.left.vars_into(&mut out);
                a.right.vars_into(&mut out);
            }
            Formula::Exists(vs, _) => out.extend(vs.iter().copied()),
            _ => {}
        });
        out
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Formula)) {
        f(self);
        match self {
            Formula::Atom(_) => {}
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|c| c.visit(f)),
            Formula::Exists(_, body) => body.visit(f),
        }
    }

    /// Formula with all existential blocks removed.
    pub fn matrix(&self) -> &Formula {
        match self {
            Formula::Exists(_, body) => body.matrix(),
            f => f,
        }
    }

    /// Node count: one per connective, binder, atom, term and monomial.
    pub fn size(&self) -> usize {
        match self {
            Formula::Atom(a) => 3 + a.left.monomials.len() + a.right.monomials.len(),
            Formula::And(fs) | Formula::Or(fs) => 1 + fs.iter().map(Formula::size).sum::<usize>(),
            Formula::Exists(vs, body) => 1 + vs.len() + body.size(),
        }
    }

    /// Human-readable rendering with grammar symbol names.
    pub fn display<'a>(&'a self, g: &'a Grammar) -> impl fmt::Display + 'a {
        Shown { f: self, g }
    }
}

/// SMT-LIB identifier of a variable: `x_p<i>`, `y_<N>`, `z_<a>`.
pub fn var_name(g: &Grammar, v: Var) -> String {
    let raw = match v {
        Var::RuleCount(r) => format!("x_p{}", r.0),
        Var::NtIndex(n) => format!("y_{}", g.nt_name(n)),
        Var::LetterCount(t) => format!("z_{}", g.term_name(t)),
    };
    smt_symbol(raw)
}

fn smt_symbol(raw: String) -> String {
    const EXTRA: &str = "~!@$%^&*_-+=<>.?/";
    if raw
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || EXTRA.contains(c))
    {
        raw
    } else {
        // Quoted symbols may not contain `|` (reserved in grammar names) or `\`.
        format!("|{}|", raw.replace('\\', "_5c_"))
    }
}

/// Emits a QF_LIA script for `f`. Bound variables become global constants,
/// which is sound for a single prenex existential block over free `z`s.
/// With `fixed`, every `z_a` is pinned to the given count.
pub fn to_smt2(g: &Grammar, f: &Formula, fixed: Option<&ParikhVector>) -> String {
    let mut vars = f.all_vars();
    if let Some(z) = fixed {
        vars.extend((0..z.len()).map(|i| Var::LetterCount(TermId(i))));
    }

    let mut out = String::from("(set-logic QF_LIA)\n");
    for &v in &vars {
        let _ = writeln!(out, "(declare-const {} Int)", var_name(g, v));
    }
    for &v in &vars {
        let _ = writeln!(out, "(assert (>= {} 0))", var_name(g, v));
    }
    let conjuncts: Vec<&Formula> = match f.matrix() {
        Formula::And(fs) => fs.iter().collect(),
        other => vec![other],
    };
    for c in conjuncts {
        let _ = writeln!(out, "(assert {})", smt_formula(g, c));
    }
    if let Some(z) = fixed {
        for (i, &count) in z.0.iter().enumerate() {
            let _ = writeln!(
                out,
                "(assert (= {} {}))",
                var_name(g, Var::LetterCount(TermId(i))),
                count
            );
        }
    }
    out.push_str("(check-sat)\n(get-model)\n");
    out
}

fn smt_formula(g: &Grammar, f: &Formula) -> String {
    match f {
        Formula::Atom(a) => {
            let op = match a.relation {
                Relation::Eq => "=",
                Relation::Gt => ">",
            };
            format!(
                "({} {} {})",
                op,
                smt_term(g, &a.left),
                smt_term(g, &a.right)
            )
        }
        Formula::And(fs) if fs.is_empty() => "true".into(),
        Formula::Or(fs) if fs.is_empty() => "false".into(),
        Formula::And(fs) | Formula::Or(fs) => {
            let op = if matches!(f, Formula::And(_)) {
                "and"
            } else {
                "or"
            };
            let parts: Vec<String> = fs.iter().map(|c| smt_formula(g, c)).collect();
            format!("({} {})", op, parts.join(" "))
        }
        Formula::Exists(_, body) => smt_formula(g, body),
    }
}

fn smt_term(g: &Grammar, t: &LinearTerm) -> String {
    let mut parts: Vec<String> = Vec::new();
    if t.constant > 0 || t.monomials.is_empty() {
        parts.push(t.constant.to_string());
    }
    for &(c, v) in &t.monomials {
        if c == 1 {
            parts.push(var_name(g, v));
        } else {
            parts.push(format!("(* {} {})", c, var_name(g, v)));
        }
    }
    if parts.len() == 1 {
        parts.pop().unwrap_or_default()
    } else {
        format!("(+ {})", parts.join(" "))
    }
}

struct Shown<'a> {
    f: &'a Formula,
    g: &'a Grammar,
}

impl fmt::Display for Shown<'_> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(self.g, self.f, out)
    }
}

fn write_term(g: &Grammar, t: &LinearTerm, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    let mut parts: Vec<String> = Vec::new();
    if t.constant > 0 || t.monomials.is_empty() {
        parts.push(t.constant.to_string());
    }
    for &(c, v) in &t.monomials {
        let name = var_name(g, v);
        parts.push(if c == 1 { name } else { format!("{c}*{name}") });
    }
    write!(out, "{}", parts.join(" + "))
}

fn write_formula(g: &Grammar, f: &Formula, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    match f {
        Formula::Atom(a) => {
            write_term(g, &a.left, out)?;
            write!(
                out,
                " {} ",
                if a.relation == Relation::Eq { "=" } else { ">" }
            )?;
            write_term(g, &a.right, out)
        }
        Formula::And(fs) | Formula::Or(fs) => {
            let sep = if matches!(f, Formula::And(_)) {
                " & "
            } else {
                " | "
            };
            if fs.is_empty() {
                return write!(out, "{}", if sep == " & " { "true" } else { "false" });
            }
            write!(out, "(")?;
            for (i, c) in fs.iter().enumerate() {
                if i > 0 {
                    write!(out, "{sep}")?;
                }
                write_formula(g, c, out)?;
            }
            write!(out, ")")
        }
        Formula::Exists(vs, body) => {
            let names: Vec<String> = vs.iter().map(|&v| var_name(g, v)).collect();
            write!(out, "exists {}. ", names.join(" "))?;
            write_formula(g, body, out)
        }
    }
}
