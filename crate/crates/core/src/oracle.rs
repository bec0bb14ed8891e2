//! Exhaustive enumeration of small derivation trees, used as ground truth.
//!
//! The budget counts rule applications rather than word length, so grammars
//! with epsilon and unit rules still give a finite enumeration. Trees are
//! produced by leftmost expansion, so each tree appears exactly once.

use std::collections::{BTreeSet, VecDeque};

use crate::grammar::{Grammar, NtId, ParikhVector, RuleId, Symbol, Word};
use crate::presburger::Assignment;
use crate::reconstruct::{letter_totals, Node, TreeFragment};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Derivation {
    pub tree: TreeFragment,
    pub word: Word,
    pub rule_counts: Vec<u64>,
}

/// Fewest applications needed to derive a terminal word from each
/// nonterminal; `None` if it derives none.
fn min_applications(g: &Grammar) -> Vec<Option<u64>> {
    let mut best: Vec<Option<u64>> = vec![None; g.nonterminals().len()];
    loop {
        let mut changed = false;
        for rule in g.rules() {
            let cost = rule.rhs.iter().try_fold(1u64, |acc, &s| match s {
                Symbol::Terminal(_) => Some(acc),
                Symbol::Nonterminal(n) => best[n.0].map(|c| acc + c),
            });
            if let Some(c) = cost {
                if best[rule.lhs.0].is_none_or(|b| c < b) {
                    best[rule.lhs.0] = Some(c);
                    changed = true;
                }
            }
        }
        if !changed {
            return best;
        }
    }
}

/// Calls `visit` with the preorder rule sequence of every derivation tree
/// using at most `max_rule_apps` applications. Depth-first, so memory stays
/// proportional to the budget.
pub fn for_each_tree(g: &Grammar, max_rule_apps: u64, mut visit: impl FnMut(&[RuleId])) {
    let min_apps = min_applications(g);
    let Some(start_cost) = min_apps[g.start().0] else {
        return;
    };
    if start_cost > max_rule_apps {
        return;
    }
    let mut rules = Vec::new();
    let mut pending = vec![g.start()];
    expand(
        g,
        &min_apps,
        max_rule_apps,
        start_cost,
        &mut rules,
        &mut pending,
        &mut visit,
    );
}

/// `owed`: applications still needed at least to finish `pending`, whose top
/// is the leftmost unexpanded nonterminal.
fn expand(
    g: &Grammar,
    min_apps: &[Option<u64>],
    max: u64,
    owed: u64,
    rules: &mut Vec<RuleId>,
    pending: &mut Vec<NtId>,
    visit: &mut impl FnMut(&[RuleId]),
) {
    let Some(x) = pending.pop() else {
        visit(rules);
        return;
    };
    let owed_rest = owed - min_apps[x.0].unwrap_or(0);
    for &rid in g.rules_for(x) {
        let rule = g.rule(rid);
        let cost = rule.rhs.iter().try_fold(owed_rest, |acc, &s| match s {
            Symbol::Terminal(_) => Some(acc),
            Symbol::Nonterminal(n) => min_apps[n.0].map(|c| acc + c),
        });
        let Some(owed_next) = cost else { continue };
        if rules.len() as u64 + 1 + owed_next > max {
            continue;
        }
        let depth = pending.len();
        pending.extend(rule.rhs.iter().rev().filter_map(|&s| match s {
            Symbol::Nonterminal(n) => Some(n),
            Symbol::Terminal(_) => None,
        }));
        rules.push(rid);
        expand(g, min_apps, max, owed_next, rules, pending, visit);
        rules.pop();
        pending.truncate(depth);
    }
    pending.push(x);
}

/// [`for_each_tree`] with each tree materialized.
pub fn for_each_derivation(g: &Grammar, max_rule_apps: u64, mut visit: impl FnMut(Derivation)) {
    for_each_tree(g, max_rule_apps, |rules| visit(finish(g, rules)));
}

/// All derivation trees with at most `max_rule_apps` applications, ordered by
/// application count and then by leftmost-expansion order.
pub fn enumerate_trees(g: &Grammar, max_rule_apps: u64) -> Vec<Derivation> {
    let mut out = Vec::new();
    for_each_tree(g, max_rule_apps, |rules| out.push(finish(g, rules)));
    // Stable: ties keep depth-first order.
    out.sort_by_key(|d| d.rule_counts.iter().sum::<u64>());
    out
}

fn finish(g: &Grammar, preorder: &[RuleId]) -> Derivation {
    let mut rest = preorder.iter().copied();
    let mut word = Vec::new();
    let root = build_node(g, &mut rest, &mut word);
    let mut rule_counts = vec![0; g.rules().len()];
    for r in preorder {
        rule_counts[r.0] += 1;
    }
    Derivation {
        tree: TreeFragment::new(root),
        word,
        rule_counts,
    }
}

fn build_node(g: &Grammar, preorder: &mut impl Iterator<Item = RuleId>, word: &mut Word) -> Node {
    let rid = preorder
        .next()
        .expect("preorder sequence matches the grammar");
    let rule = g.rule(rid);
    let children = if rule.rhs.is_empty() {
        vec![Node::Epsilon]
    } else {
        rule.rhs
            .iter()
            .map(|&s| match s {
                Symbol::Terminal(t) => {
                    word.push(t);
                    Node::Terminal(t)
                }
                Symbol::Nonterminal(_) => build_node(g, preorder, word),
            })
            .collect()
    };
    Node::Rule {
        lhs: rule.lhs,
        rule: rid,
        children,
    }
}

/// Parikh images of all trees within the budget: a subset of `Ψ(L(G))`.
pub fn image_up_to(g: &Grammar, max_rule_apps: u64) -> BTreeSet<ParikhVector> {
    let mut image = BTreeSet::new();
    let mut counts = vec![0u64; g.rules().len()];
    for_each_tree(g, max_rule_apps, |rules| {
        counts.iter_mut().for_each(|c| *c = 0);
        for r in rules {
            counts[r.0] += 1;
        }
        image.insert(letter_totals(g, &counts));
    });
    image
}

/// `x̄` from rule occurrences, `ȳ` by first occurrence from the root
/// (`y_S = 1`, a nonterminal first reached below `Y` gets `y_Y + 1`), `z̄ =
/// Ψ(yield)`. The numbering is the breadth-first level in the graph of
/// parent/child labels that occur in the tree, so it does not depend on which
/// of several equally deep parents is taken.
pub fn soundness_assignment(g: &Grammar, t: &TreeFragment) -> Assignment {
    let n = g.nonterminals().len();
    let mut x = vec![0u64; g.rules().len()];
    let mut z = vec![0u64; g.terminals().len()];
    let mut edge = vec![false; n * n];
    walk(t.root(), &mut x, &mut z, &mut edge, n);

    let mut y = vec![0u64; n];
    if let Some(root) = t.root_label() {
        y[root.0] = 1;
        let mut queue = VecDeque::from([root]);
        while let Some(p) = queue.pop_front() {
            for c in 0..n {
                if edge[p.0 * n + c] && y[c] == 0 {
                    y[c] = y[p.0] + 1;
                    queue.push_back(NtId(c));
                }
            }
        }
    }
    Assignment::from_parts(&x, &y, &ParikhVector(z))
}

fn walk(node: &Node, x: &mut [u64], z: &mut [u64], edge: &mut [bool], n: usize) {
    match node {
        Node::Rule {
            lhs,
            rule,
            children,
        } => {
            x[rule.0] += 1;
            for c in children {
                if let Some(l) = c.label() {
                    edge[lhs.0 * n + l.0] = true;
                }
                walk(c, x, z, edge, n);
            }
        }
        Node::Terminal(a) => z[a.0] += 1,
        Node::Epsilon | Node::Open(_) => {}
    }
}
