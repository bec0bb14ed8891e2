//! Builds the existential Presburger formula for the Parikh image of a
//! grammar.
//!
//! For every rule `p` there is a count variable `x_p`, for every nonterminal
//! `X` an index `y_X`, and for every letter `a` a free variable `z_a`:
//!
//! * `α_X` balances left and right occurrences of `X` (one extra on the left
//!   for the start symbol),
//! * `β_X` forces `y_X = 0` for unused `X` and otherwise ties `X` to a used
//!   rule `Y -> u` with `X ∈ u` and `y_X = y_Y + 1`,
//! * `γ_a` counts the `a`-leaves.
//!
//! Sums only range over rules with a nonzero coefficient, which keeps the
//! output linear in the grammar size.

use thiserror::Error;

use crate::grammar::{Grammar, NtId, Symbol, TermId};
use crate::presburger::{Atom, Formula, LinearTerm, Var};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConstructionError {
    #[error("nonterminal #{0} is not in the grammar")]
    UnknownNonterminal(usize),
    #[error("terminal #{0} is not in the grammar")]
    UnknownTerminal(usize),
}

/// Counts elementary construction steps (symbol and occurrence visits).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConstructionStats {
    pub steps: usize,
}

fn check_nt(g: &Grammar, x: NtId) -> Result<(), ConstructionError> {
    if g.contains_nonterminal(x) {
        Ok(())
    } else {
        Err(ConstructionError::UnknownNonterminal(x.0))
    }
}

/// `Σ_p |p|_sym · x_p` over the sparse occurrence list.
fn rhs_sum(g: &Grammar, sym: Symbol, stats: &mut ConstructionStats) -> LinearTerm {
    let occ = g.occurrences(sym);
    stats.steps += 1 + occ.len();
    LinearTerm::new(0, occ.iter().map(|&(p, c)| (c, Var::RuleCount(p))))
}

fn alpha(g: &Grammar, x: NtId, stats: &mut ConstructionStats) -> Formula {
    let lhs = g.rules_for(x);
    stats.steps += 1 + lhs.len();
    let left = LinearTerm::new(0, lhs.iter().map(|&p| (1, Var::RuleCount(p))));
    let mut right = rhs_sum(g, Symbol::Nonterminal(x), stats);
    if x == g.start() {
        right = right.plus_constant(1);
    }
    Atom::eq(left, right).into()
}

fn beta(g: &Grammar, x: NtId, stats: &mut ConstructionStats) -> Formula {
    let y = |n: NtId| LinearTerm::var(Var::NtIndex(n));
    stats.steps += 1;
    if x == g.start() {
        return Atom::eq(y(x), LinearTerm::constant(1)).into();
    }
    let unused = Formula::And(vec![
        Atom::eq(y(x), LinearTerm::constant(0)).into(),
        Atom::eq(
            rhs_sum(g, Symbol::Nonterminal(x), stats),
            LinearTerm::constant(0),
        )
        .into(),
    ]);
    let mut disjuncts = vec![unused];
    for &(p, _) in g.occurrences(Symbol::Nonterminal(x)) {
        stats.steps += 1;
        let parent = g.rule(p).lhs;
        disjuncts.push(Formula::And(vec![
            Atom::gt(LinearTerm::var(Var::RuleCount(p)), LinearTerm::constant(0)).into(),
            Atom::gt(y(parent), LinearTerm::constant(0)).into(),
            Atom::eq(y(x), y(parent).plus_constant(1)).into(),
        ]));
    }
    Formula::Or(disjuncts)
}

fn gamma(g: &Grammar, a: TermId, stats: &mut ConstructionStats) -> Formula {
    let sum = rhs_sum(g, Symbol::Terminal(a), stats);
    Atom::eq(LinearTerm::var(Var::LetterCount(a)), sum).into()
}

pub fn build_alpha(g: &Grammar, x: NtId) -> Result<Formula, ConstructionError> {
    check_nt(g, x)?;
    Ok(alpha(g, x, &mut ConstructionStats::default()))
}

pub fn build_beta(g: &Grammar, x: NtId) -> Result<Formula, ConstructionError> {
    check_nt(g, x)?;
    Ok(beta(g, x, &mut ConstructionStats::default()))
}

pub fn build_gamma(g: &Grammar, a: TermId) -> Result<Formula, ConstructionError> {
    if !g.contains_terminal(a) {
        return Err(ConstructionError::UnknownTerminal(a.0));
    }
    Ok(gamma(g, a, &mut ConstructionStats::default()))
}

/// `∃x̄ ∃ȳ: ⋀_X (α_X ∧ β_X) ∧ ⋀_a γ_a`.
pub fn build_formula(g: &Grammar) -> Formula {
    build_formula_with_stats(g).0
}

pub fn build_formula_with_stats(g: &Grammar) -> (Formula, ConstructionStats) {
    let mut stats = ConstructionStats::default();
    let mut binders: Vec<Var> = Vec::with_capacity(g.rules().len() + g.nonterminals().len());
    binders.extend(g.rules().iter().map(|r| Var::RuleCount(r.id)));
    binders.extend(g.nonterminal_ids().map(Var::NtIndex));
    stats.steps += binders.len();

    let mut conjuncts = Vec::with_capacity(2 * g.nonterminals().len() + g.terminals().len());
    for x in g.nonterminal_ids() {
        conjuncts.push(alpha(g, x, &mut stats));
        conjuncts.push(beta(g, x, &mut stats));
    }
    for a in g.terminal_ids() {
        conjuncts.push(gamma(g, a, &mut stats));
    }
    (
        Formula::Exists(binders, Box::new(Formula::And(conjuncts))),
        stats,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{parse_grammar, GrammarBuilder, RuleId};
    use std::collections::BTreeSet;

    fn x(i: usize) -> Var {
        Var::RuleCount(RuleId(i))
    }

    fn y(i: usize) -> Var {
        Var::NtIndex(NtId(i))
    }

    fn sum(vars: &[Var]) -> LinearTerm {
        LinearTerm::new(0, vars.iter().map(|&v| (1, v)))
    }

    fn g1() -> Grammar {
        parse_grammar("S -> a S b | ").unwrap()
    }

    fn g2() -> Grammar {
        parse_grammar("S -> A b\nA -> c A d | e").unwrap()
    }

    #[test]
    fn alpha_of_start() {
        let expect: Formula = Atom::eq(sum(&[x(0), x(1)]), sum(&[x(0)]).plus_constant(1)).into();
        assert_eq!(build_alpha(&g1(), NtId(0)).unwrap(), expect);
    }

    #[test]
    fn alpha_of_inner_nonterminal() {
        let g = g2();
        let a = g.nonterminal("A").unwrap();
        let expect: Formula = Atom::eq(sum(&[x(1), x(2)]), sum(&[x(0), x(1)])).into();
        assert_eq!(build_alpha(&g, a).unwrap(), expect);
    }

    #[test]
    fn alpha_of_isolated_nonterminal() {
        let g = GrammarBuilder::new()
            .nonterminal("B")
            .rule("S", &["a"])
            .build()
            .unwrap();
        let expect: Formula = Atom::eq(LinearTerm::constant(0), LinearTerm::constant(0)).into();
        assert_eq!(build_alpha(&g, NtId(1)).unwrap(), expect);
        let beta_b = build_beta(&g, NtId(1)).unwrap();
        assert_eq!(
            beta_b,
            Formula::Or(vec![Formula::And(vec![
                Atom::eq(LinearTerm::var(y(1)), LinearTerm::constant(0)).into(),
                Atom::eq(LinearTerm::constant(0), LinearTerm::constant(0)).into(),
            ])])
        );
    }

    #[test]
    fn beta_of_g2() {
        let g = g2();
        let (s, a) = (0, 1);
        let gt0 =
            |v: Var| -> Formula { Atom::gt(LinearTerm::var(v), LinearTerm::constant(0)).into() };
        let succ = |child: usize, parent: usize| -> Formula {
            Atom::eq(
                LinearTerm::var(y(child)),
                LinearTerm::var(y(parent)).plus_constant(1),
            )
            .into()
        };
        let expect = Formula::Or(vec![
            Formula::And(vec![
                Atom::eq(LinearTerm::var(y(a)), LinearTerm::constant(0)).into(),
                Atom::eq(sum(&[x(0), x(1)]), LinearTerm::constant(0)).into(),
            ]),
            Formula::And(vec![gt0(x(0)), gt0(y(s)), succ(a, s)]),
            Formula::And(vec![gt0(x(1)), gt0(y(a)), succ(a, a)]),
        ]);
        assert_eq!(build_beta(&g, NtId(a)).unwrap(), expect);
    }

    #[test]
    fn beta_of_start_is_pinned_to_one() {
        for g in [g1(), g2()] {
            let expect: Formula =
                Atom::eq(LinearTerm::var(y(g.start().0)), LinearTerm::constant(1)).into();
            assert_eq!(build_beta(&g, g.start()).unwrap(), expect);
        }
    }

    #[test]
    fn gamma_terms() {
        let g = g1();
        for a in 0..2 {
            let expect: Formula =
                Atom::eq(LinearTerm::var(Var::LetterCount(TermId(a))), sum(&[x(0)])).into();
            assert_eq!(build_gamma(&g, TermId(a)).unwrap(), expect);
        }
        let g = GrammarBuilder::new()
            .terminal("q")
            .rule("S", &[])
            .build()
            .unwrap();
        let expect: Formula = Atom::eq(
            LinearTerm::var(Var::LetterCount(TermId(0))),
            LinearTerm::constant(0),
        )
        .into();
        assert_eq!(build_gamma(&g, TermId(0)).unwrap(), expect);
    }

    #[test]
    fn out_of_range_ids() {
        assert_eq!(
            build_alpha(&g1(), NtId(3)),
            Err(ConstructionError::UnknownNonterminal(3))
        );
        assert_eq!(
            build_beta(&g1(), NtId(1)),
            Err(ConstructionError::UnknownNonterminal(1))
        );
        assert_eq!(
            build_gamma(&g1(), TermId(2)),
            Err(ConstructionError::UnknownTerminal(2))
        );
    }

    #[test]
    fn assembled_formula_of_g1() {
        let g = g1();
        let phi = build_formula(&g);
        let expect = Formula::Exists(
            vec![x(0), x(1), y(0)],
            Box::new(Formula::And(vec![
                build_alpha(&g, NtId(0)).unwrap(),
                build_beta(&g, NtId(0)).unwrap(),
                build_gamma(&g, TermId(0)).unwrap(),
                build_gamma(&g, TermId(1)).unwrap(),
            ])),
        );
        assert_eq!(phi, expect);
        let z: BTreeSet<Var> = [0, 1].map(|i| Var::LetterCount(TermId(i))).into();
        assert_eq!(phi.free_vars(), z);
    }

    #[test]
    fn epsilon_grammar_forces_single_application() {
        let g = parse_grammar("S -> ").unwrap();
        let phi = build_formula(&g);
        assert!(phi.free_vars().is_empty());
        let body = phi.matrix();
        for xv in 0..4 {
            for yv in 0..3 {
                let asg = crate::presburger::Assignment::new()
                    .with(x(0), xv)
                    .with(y(0), yv);
                assert_eq!(body.evaluate(&asg).unwrap(), xv == 1 && yv == 1);
            }
        }
    }

    #[test]
    fn smt_export_of_g1() {
        use crate::presburger::to_smt2;
        let g = g1();
        let phi = build_formula(&g);
        let script = to_smt2(&g, &phi, None);
        let count = |prefix: &str| script.lines().filter(|l| l.starts_with(prefix)).count();
        assert_eq!(count("(declare-const x_"), 2);
        assert_eq!(count("(declare-const y_"), 1);
        assert_eq!(count("(declare-const z_"), 2);
        assert_eq!(count("(assert (>= "), 5);

        let pinned = to_smt2(&g, &phi, Some(&g.parse_vector("a=2,b=2").unwrap()));
        assert!(pinned.contains("(assert (= z_a 2))"));
        assert!(pinned.contains("(assert (= z_b 2))"));
        assert_eq!(
            pinned,
            to_smt2(&g, &phi, Some(&g.parse_vector("a=2,b=2").unwrap()))
        );
    }
}
