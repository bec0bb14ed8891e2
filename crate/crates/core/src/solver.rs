//! Bounded decision of `z ⊨ φ`.
//!
//! The search looks for rule counts `x̄` with every `x_p ≤ bound` that
//! satisfy all α and γ equalities, synthesizes `ȳ` from the support of `x̄`
//! by breadth-first search, and confirms every hit by reconstructing a
//! derivation tree. A `Sat` answer therefore always carries a checked
//! witness; `UnsatUpTo(b)` only rules out solutions below the bound.

use std::collections::{BTreeSet, VecDeque};

use rayon::prelude::*;
use thiserror::Error;

use crate::grammar::{Grammar, GrammarError, NtId, ParikhVector, Symbol, Word};
use crate::reconstruct::{reconstruct, validate_tree, yield_word, ReconstructError, TreeFragment};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MembershipResult {
    Sat {
        x: Vec<u64>,
        y: Vec<u64>,
        word: Word,
        tree: TreeFragment,
    },
    /// No solution with every `x_p` at most the bound.
    UnsatUpTo(u64),
}

impl MembershipResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, MembershipResult::Sat { .. })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolverError {
    #[error(transparent)]
    Domain(#[from] GrammarError),
    #[error("bound must be at least 1")]
    ZeroBound,
    #[error("witness reconstruction failed: {0}")]
    Reconstruct(#[from] ReconstructError),
    #[error("reconstructed witness does not have the requested letter counts")]
    WitnessMismatch,
}

/// `(‖z‖₁ + 1) · (|N| + 1)`.
pub fn default_bound(g: &Grammar, z: &ParikhVector) -> u64 {
    (z.sum_norm() + 1) * (g.nonterminals().len() as u64 + 1)
}

/// Indices `ȳ` satisfying every β given `x̄`, if any exist.
///
/// Edges `Y -> X` come from rules `Y -> u` with `x > 0` and `X ∈ u`. All
/// used nonterminals must be reachable from the start symbol; `y` is then the
/// breadth-first level plus one, and 0 for unused nonterminals.
pub fn synthesize_y(g: &Grammar, x: &[u64]) -> Option<Vec<u64>> {
    let n = g.nonterminals().len();
    let mut used = vec![false; n];
    let mut edges: Vec<Vec<NtId>> = vec![Vec::new(); n];
    for rule in g.rules() {
        if x[rule.id.0] == 0 {
            continue;
        }
        for &s in &rule.rhs {
            if let Symbol::Nonterminal(child) = s {
                used[child.0] = true;
                edges[rule.lhs.0].push(child);
            }
        }
    }

    let start = g.start();
    let mut y = vec![0u64; n];
    y[start.0] = 1;
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &w in &edges[v.0] {
            if y[w.0] == 0 && w != start {
                y[w.0] = y[v.0] + 1;
                queue.push_back(w);
            }
        }
    }
    g.nonterminal_ids()
        .all(|v| v == start || !used[v.0] || y[v.0] > 0)
        .then_some(y)
}

/// Linear rows `Σ_p c_p · x_p = target`: one α row per nonterminal, one γ
/// row per letter.
struct Search<'a> {
    g: &'a Grammar,
    bound: i64,
    targets: Vec<i64>,
    /// Nonzero `(row, coefficient)` pairs per rule.
    columns: Vec<Vec<(usize, i64)>>,
    /// Per position `i`, the least/greatest total rules `i..` can still add
    /// to every row.
    suffix_min: Vec<Vec<i64>>,
    suffix_max: Vec<Vec<i64>>,
    partial: Vec<i64>,
    x: Vec<u64>,
}

impl<'a> Search<'a> {
    fn new(g: &'a Grammar, z: &ParikhVector, bound: u64) -> Self {
        let nts = g.nonterminals().len();
        let rows = nts + g.terminals().len();
        let bound = bound as i64;
        let mut targets = vec![0i64; rows];
        targets[g.start().0] = 1;
        for (i, &c) in z.0.iter().enumerate() {
            targets[nts + i] = c as i64;
        }

        let columns: Vec<Vec<(usize, i64)>> = g
            .rules()
            .iter()
            .map(|r| {
                let mut col = vec![0i64; rows];
                col[r.lhs.0] += 1;
                for &s in &r.rhs {
                    match s {
                        Symbol::Nonterminal(n) => col[n.0] -= 1,
                        Symbol::Terminal(t) => col[nts + t.0] += 1,
                    }
                }
                col.into_iter()
                    .enumerate()
                    .filter(|&(_, c)| c != 0)
                    .collect()
            })
            .collect();

        let p = columns.len();
        let mut suffix_min = vec![vec![0i64; rows]; p + 1];
        let mut suffix_max = vec![vec![0i64; rows]; p + 1];
        for i in (0..p).rev() {
            suffix_min[i] = suffix_min[i + 1].clone();
            suffix_max[i] = suffix_max[i + 1].clone();
            for &(row, c) in &columns[i] {
                suffix_min[i][row] += (c * bound).min(0);
                suffix_max[i][row] += (c * bound).max(0);
            }
        }

        Search {
            g,
            bound,
            targets,
            columns,
            suffix_min,
            suffix_max,
            partial: vec![0; rows],
            x: vec![0; p],
        }
    }

    fn feasible_at_root(&self) -> bool {
        (0..self.targets.len()).all(|row| {
            let t = self.targets[row];
            self.suffix_min[0][row] <= t && t <= self.suffix_max[0][row]
        })
    }

    /// Values of `x_i` that keep every touched row reachable.
    fn range(&self, i: usize) -> Option<(i64, i64)> {
        let (mut lo, mut hi) = (0i64, self.bound);
        let col = &self.columns[i];
        if col.is_empty() {
            // Only `X -> X` has an all-zero column. It adds a self-loop to the
            // β graph and nothing else, so 0 is as good as any value.
            hi = 0;
        }
        for &(row, c) in col {
            let rest = self.targets[row] - self.partial[row];
            let (l, u) = (
                rest - self.suffix_max[i + 1][row],
                rest - self.suffix_min[i + 1][row],
            );
            let (vlo, vhi) = if c > 0 {
                (
                    l.div_euclid(c) + i64::from(l.rem_euclid(c) != 0),
                    u.div_euclid(c),
                )
            } else {
                let c = -c;
                (
                    (-u).div_euclid(c) + i64::from((-u).rem_euclid(c) != 0),
                    (-l).div_euclid(c),
                )
            };
            lo = lo.max(vlo);
            hi = hi.min(vhi);
        }
        (lo <= hi).then_some((lo, hi))
    }

    fn run(&mut self, i: usize) -> Option<Vec<u64>> {
        if i == self.columns.len() {
            debug_assert_eq!(self.partial, self.targets);
            return synthesize_y(self.g, &self.x);
        }
        let (lo, hi) = self.range(i)?;
        for v in lo..=hi {
            self.x[i] = v as u64;
            for &(row, c) in &self.columns[i] {
                self.partial[row] += c * v;
            }
            let found = self.run(i + 1);
            for &(row, c) in &self.columns[i] {
                self.partial[row] -= c * v;
            }
            if found.is_some() {
                return found;
            }
        }
        self.x[i] = 0;
        None
    }
}

/// Searches `x̄ ∈ {0..bound}^P` in rule order for a solution of `φ` with the
/// given letter counts.
pub fn solve_membership(
    g: &Grammar,
    z: &ParikhVector,
    bound: u64,
) -> Result<MembershipResult, SolverError> {
    g.check_vector(z)?;
    if bound == 0 {
        return Err(SolverError::ZeroBound);
    }
    let mut search = Search::new(g, z, bound);
    if !search.feasible_at_root() {
        return Ok(MembershipResult::UnsatUpTo(bound));
    }
    let Some(y) = search.run(0) else {
        return Ok(MembershipResult::UnsatUpTo(bound));
    };
    let x = search.x;
    let tree = reconstruct(g, &x, &y)?;
    let word = yield_word(&tree)?;
    if !validate_tree(g, &tree) || &g.parikh_of_word(&word)? != z {
        return Err(SolverError::WitnessMismatch);
    }
    Ok(MembershipResult::Sat { x, y, word, tree })
}

/// Every `z` with `‖z‖∞ ≤ max_norm` that the solver confirms, in
/// lexicographic order. `bound = None` uses [`default_bound`] per vector.
pub fn enumerate_image(
    g: &Grammar,
    max_norm: u64,
    bound: Option<u64>,
) -> Result<BTreeSet<ParikhVector>, SolverError> {
    let candidates = vectors_up_to(g.terminals().len(), max_norm);
    let results: Vec<Option<ParikhVector>> = candidates
        .into_par_iter()
        .map(|z| {
            let b = bound.unwrap_or_else(|| default_bound(g, &z));
            Ok(solve_membership(g, &z, b)?.is_sat().then_some(z))
        })
        .collect::<Result<_, SolverError>>()?;
    Ok(results.into_iter().flatten().collect())
}

/// All vectors of the given dimension with entries in `0..=max_norm`, in
/// lexicographic order.
pub fn vectors_up_to(dim: usize, max_norm: u64) -> Vec<ParikhVector> {
    let mut out = vec![ParikhVector(Vec::new())];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..=max_norm).map(move |c| {
                    let mut w = v.0.clone();
                    w.push(c);
                    ParikhVector(w)
                })
            })
            .collect();
    }
    out
}
