//! Turns rule counts `x̄` and indices `ȳ` satisfying `⋀(α_X ∧ β_X)` into an
//! actual derivation tree.
//!
//! The forest starts as `x_p` one-level trees per rule `p`. Trees are merged
//! by grafting a tree rooted `X` onto an open `X`-leaf of another tree until
//! no merge applies. What remains is one complete tree rooted at the start
//! symbol plus *cycle fragments*: trees rooted `X` whose only open leaf is
//! labeled `X`. A cycle fragment is either spliced into another tree that
//! has an `X`-node, or rotated/rerouted so that its root becomes a
//! nonterminal `Y` with `y_Y = y_X - 1`. Each step lowers the forest size or
//! that root index, so the loop ends with a single tree.
//!
//! Throughout, `r_X = s_X` for `X ≠ S` and `r_S = s_S + 1`, where `r_X`
//! counts fragments rooted `X` and `s_X` counts open `X`-leaves.

use std::fmt::Write as _;

use thiserror::Error;

use crate::construction::build_formula;
use crate::grammar::{Grammar, NtId, ParikhVector, RuleId, Symbol, TermId, Word};
use crate::presburger::Assignment;

/// A tree node. Rule nodes carry their left-hand side so fragment roots can
/// be read off without the grammar.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Rule {
        lhs: NtId,
        rule: RuleId,
        children: Vec<Node>,
    },
    Terminal(TermId),
    /// The single child of an epsilon rule.
    Epsilon,
    /// A nonterminal leaf that has not been expanded yet.
    Open(NtId),
}

impl Node {
    /// Nonterminal label of a rule node or open leaf.
    pub fn label(&self) -> Option<NtId> {
        match self {
            Node::Rule { lhs, .. } => Some(*lhs),
            Node::Open(x) => Some(*x),
            _ => None,
        }
    }

    pub fn children(&self) -> &[Node] {
        match self {
            Node::Rule { children, .. } => children,
            _ => &[],
        }
    }

    fn visit<'a>(&'a self, path: &mut Vec<usize>, f: &mut impl FnMut(&[usize], &'a Node)) {
        f(path, self);
        for (i, c) in self.children().iter().enumerate() {
            path.push(i);
            c.visit(path, f);
            path.pop();
        }
    }
}

/// Child indices from the root.
pub type NodePath = Vec<usize>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TreeFragment {
    root: Node,
}

impl TreeFragment {
    pub fn new(root: Node) -> Self {
        TreeFragment { root }
    }

    /// The one-level tree of a rule; an epsilon rule gets an explicit
    /// epsilon leaf.
    pub fn one_level(g: &Grammar, rule: RuleId) -> Self {
        let r = g.rule(rule);
        let children = if r.rhs.is_empty() {
            vec![Node::Epsilon]
        } else {
            r.rhs
                .iter()
                .map(|&s| match s {
                    Symbol::Nonterminal(n) => Node::Open(n),
                    Symbol::Terminal(t) => Node::Terminal(t),
                })
                .collect()
        };
        TreeFragment::new(Node::Rule {
            lhs: r.lhs,
            rule,
            children,
        })
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn into_root(self) -> Node {
        self.root
    }

    pub fn root_label(&self) -> Option<NtId> {
        self.root.label()
    }

    pub fn node(&self, path: &[usize]) -> Option<&Node> {
        path.iter()
            .try_fold(&self.root, |n, &i| n.children().get(i))
    }

    fn node_mut(&mut self, path: &[usize]) -> Option<&mut Node> {
        let mut n = &mut self.root;
        for &i in path {
            n = match n {
                Node::Rule { children, .. } => children.get_mut(i)?,
                _ => return None,
            };
        }
        Some(n)
    }

    /// Visits every node in preorder with its path.
    pub fn for_each_node(&self, mut f: impl FnMut(&[usize], &Node)) {
        self.root.visit(&mut Vec::new(), &mut f);
    }

    /// Open leaves left to right.
    pub fn open_leaves(&self) -> Vec<(NodePath, NtId)> {
        let mut out = Vec::new();
        self.for_each_node(|p, n| {
            if let Node::Open(x) = n {
                out.push((p.to_vec(), *x));
            }
        });
        out
    }

    pub fn is_complete(&self) -> bool {
        self.open_leaves().is_empty()
    }

    /// If this is a cycle fragment (rooted `X` with exactly one open leaf,
    /// labeled `X`), returns `X` and the path to that leaf.
    pub fn cycle(&self) -> Option<(NtId, NodePath)> {
        let Node::Rule { lhs, .. } = self.root else {
            return None;
        };
        let mut open = self.open_leaves();
        match open.len() {
            1 if open[0].1 == lhs => open.pop().map(|(p, _)| (lhs, p)),
            _ => None,
        }
    }

    /// Preorder-first (leftmost-outermost) node labeled `x`.
    pub fn find_label(&self, x: NtId) -> Option<NodePath> {
        let mut found = None;
        self.for_each_node(|p, n| {
            if found.is_none() && n.label() == Some(x) {
                found = Some(p.to_vec());
            }
        });
        found
    }

    pub fn rule_counts(&self, rules: usize) -> Vec<u64> {
        let mut out = vec![0; rules];
        self.add_rule_counts(&mut out);
        out
    }

    fn add_rule_counts(&self, out: &mut [u64]) {
        self.for_each_node(|_, n| {
            if let Node::Rule { rule, .. } = n {
                out[rule.0] += 1;
            }
        });
    }

    pub fn terminal_counts(&self, terminals: usize) -> ParikhVector {
        let mut out = vec![0; terminals];
        self.add_terminal_counts(&mut out);
        ParikhVector(out)
    }

    fn add_terminal_counts(&self, out: &mut [u64]) {
        self.for_each_node(|_, n| {
            if let Node::Terminal(t) = n {
                out[t.0] += 1;
            }
        });
    }

    /// Bracketed form `X[id](child ...)`: terminals bare, epsilon as `()`,
    /// open leaves as `?X`.
    pub fn to_bracketed(&self, g: &Grammar) -> String {
        let mut out = String::new();
        write_bracketed(g, &self.root, &mut out);
        out
    }
}

fn write_bracketed(g: &Grammar, n: &Node, out: &mut String) {
    match n {
        Node::Rule {
            lhs,
            rule,
            children,
        } => {
            let _ = write!(out, "{}[{}](", g.nt_name(*lhs), rule.0);
            for (i, c) in children.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                write_bracketed(g, c, out);
            }
            out.push(')');
        }
        Node::Terminal(t) => out.push_str(g.term_name(*t)),
        Node::Epsilon => out.push_str("()"),
        Node::Open(x) => {
            out.push('?');
            out.push_str(g.nt_name(*x));
        }
    }
}

/// A tree with one distinguished open leaf, the hole.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Context {
    tree: TreeFragment,
    hole: NodePath,
    label: NtId,
}

impl Context {
    pub fn hole(&self) -> &[usize] {
        &self.hole
    }

    pub fn hole_label(&self) -> NtId {
        self.label
    }

    /// The context as a fragment, with the hole as an ordinary open leaf.
    pub fn tree(&self) -> &TreeFragment {
        &self.tree
    }

    /// Fills the hole with `fragment`, whose root must carry the hole label.
    pub fn plug(mut self, fragment: TreeFragment) -> Result<TreeFragment, ReconstructError> {
        let found = fragment.root_label();
        if found != Some(self.label) {
            return Err(ReconstructError::LabelMismatch {
                expected: self.label,
                found,
            });
        }
        let slot = self
            .tree
            .node_mut(&self.hole)
            .ok_or(ReconstructError::NoSuchNode)?;
        *slot = fragment.root;
        Ok(self.tree)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReconstructError {
    #[error("rule counts and indices do not satisfy the alpha/beta constraints")]
    Precondition,
    #[error("reconstruction invariant violated: {0}")]
    Invariant(String),
    #[error("no node at the given path")]
    NoSuchNode,
    #[error("node is not labeled by a nonterminal")]
    NotNonterminal,
    #[error("fragment is not a cycle fragment")]
    NotACycle,
    #[error("node is not on the root-to-open-leaf path")]
    NotOnPath,
    #[error("node lies on the root-to-open-leaf path")]
    OnPath,
    #[error("fragment has no node labeled {0:?}")]
    NoSpliceSite(NtId),
    #[error("node has no child labeled {0:?}")]
    NoMatchingChild(NtId),
    #[error("expected a fragment rooted {expected:?}, found {found:?}")]
    LabelMismatch { expected: NtId, found: Option<NtId> },
    #[error("tree still has open leaves")]
    OpenLeaf,
}

/// Splits `t` at `path` into the surrounding context and the subtree there.
/// Plugging the subtree back yields `t`.
pub fn factorize_at(
    t: &TreeFragment,
    path: &[usize],
) -> Result<(Context, TreeFragment), ReconstructError> {
    let mut tree = t.clone();
    let slot = tree.node_mut(path).ok_or(ReconstructError::NoSuchNode)?;
    let label = slot.label().ok_or(ReconstructError::NotNonterminal)?;
    let sub = std::mem::replace(slot, Node::Open(label));
    Ok((
        Context {
            tree,
            hole: path.to_vec(),
            label,
        },
        TreeFragment::new(sub),
    ))
}

fn replace_at(
    mut t: TreeFragment,
    path: &[usize],
    with: TreeFragment,
) -> Result<TreeFragment, ReconstructError> {
    *t.node_mut(path).ok_or(ReconstructError::NoSuchNode)? = with.root;
    Ok(t)
}

/// `p · t · q`: cuts `s` at its leftmost-outermost `X`-node (`X` the root of
/// the cycle fragment `t`) and inserts `t` in between.
pub fn splice(s: &TreeFragment, t: &TreeFragment) -> Result<TreeFragment, ReconstructError> {
    let (x, open) = t.cycle().ok_or(ReconstructError::NotACycle)?;
    let site = s.find_label(x).ok_or(ReconstructError::NoSpliceSite(x))?;
    let (p, q) = factorize_at(s, &site)?;
    let middle = replace_at(t.clone(), &open, q)?;
    p.plug(middle)
}

/// `q · p` for `t = p · q` cut at a node on the root-to-open-leaf path.
pub fn rotate(t: &TreeFragment, path: &[usize]) -> Result<TreeFragment, ReconstructError> {
    let (_, open) = t.cycle().ok_or(ReconstructError::NotACycle)?;
    if !open.starts_with(path) {
        return Err(ReconstructError::NotOnPath);
    }
    let (p, q) = factorize_at(t, path)?;
    let q_open = &open[path.len()..];
    replace_at(q, q_open, p.tree)
}

/// `r · p · r'` for `t = p · q` cut at an off-path node `Y`, where `q = r · r'`
/// is cut at the leftmost `X`-child of `q`'s root.
pub fn reroute(t: &TreeFragment, path: &[usize]) -> Result<TreeFragment, ReconstructError> {
    let (x, open) = t.cycle().ok_or(ReconstructError::NotACycle)?;
    if open.starts_with(path) {
        return Err(ReconstructError::OnPath);
    }
    let node = t.node(path).ok_or(ReconstructError::NoSuchNode)?;
    if !matches!(node, Node::Rule { .. }) {
        return Err(ReconstructError::NotNonterminal);
    }
    let child = node
        .children()
        .iter()
        .position(|c| c.label() == Some(x))
        .ok_or(ReconstructError::NoMatchingChild(x))?;
    let (p, q) = factorize_at(t, path)?;
    let (r, r_tail) = factorize_at(&q, &[child])?;
    let middle = replace_at(p.tree, &open, r_tail)?;
    r.plug(middle)
}

/// Left-to-right terminal leaves.
pub fn yield_word(t: &TreeFragment) -> Result<Word, ReconstructError> {
    let mut word = Vec::new();
    let mut open = false;
    t.for_each_node(|_, n| match n {
        Node::Terminal(a) => word.push(*a),
        Node::Open(_) => open = true,
        _ => {}
    });
    if open {
        Err(ReconstructError::OpenLeaf)
    } else {
        Ok(word)
    }
}

/// True iff `t` is a complete derivation tree of `g` rooted at the start
/// symbol.
pub fn validate_tree(g: &Grammar, t: &TreeFragment) -> bool {
    matches!(t.root, Node::Rule { lhs, .. } if lhs == g.start()) && valid_node(g, &t.root)
}

fn valid_node(g: &Grammar, n: &Node) -> bool {
    let Node::Rule {
        lhs,
        rule,
        children,
    } = n
    else {
        return false;
    };
    let Some(r) = g.rules().get(rule.0) else {
        return false;
    };
    if r.lhs != *lhs {
        return false;
    }
    if r.rhs.is_empty() {
        return children.as_slice() == [Node::Epsilon];
    }
    children.len() == r.rhs.len()
        && r.rhs.iter().zip(children).all(|(&s, c)| match (s, c) {
            (Symbol::Terminal(a), Node::Terminal(b)) => a == *b,
            (Symbol::Nonterminal(x), c @ Node::Rule { lhs, .. }) => x == *lhs && valid_node(g, c),
            _ => false,
        })
}

/// A multiset of fragments.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Forest {
    fragments: Vec<TreeFragment>,
}

impl Forest {
    pub fn new(fragments: Vec<TreeFragment>) -> Self {
        Forest { fragments }
    }

    pub fn fragments(&self) -> &[TreeFragment] {
        &self.fragments
    }

    pub fn into_fragments(self) -> Vec<TreeFragment> {
        self.fragments
    }

    pub fn len(&self) -> usize {
        self.fragments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fragments.is_empty()
    }

    /// `r_X`.
    pub fn roots_count(&self, x: NtId) -> u64 {
        self.fragments
            .iter()
            .filter(|t| t.root_label() == Some(x))
            .count() as u64
    }

    /// `s_X`.
    pub fn open_leaves_count(&self, x: NtId) -> u64 {
        self.fragments
            .iter()
            .flat_map(|t| t.open_leaves())
            .filter(|&(_, l)| l == x)
            .count() as u64
    }

    pub fn rule_counts(&self, rules: usize) -> Vec<u64> {
        let mut out = vec![0; rules];
        for t in &self.fragments {
            t.add_rule_counts(&mut out);
        }
        out
    }

    pub fn terminal_counts(&self, terminals: usize) -> ParikhVector {
        let mut out = vec![0; terminals];
        for t in &self.fragments {
            t.add_terminal_counts(&mut out);
        }
        ParikhVector(out)
    }

    /// Checks `r_S = s_S + 1` and `r_X = s_X` for every other nonterminal.
    pub fn balanced(&self, g: &Grammar) -> bool {
        let n = g.nonterminals().len();
        let (mut roots, mut open) = (vec![0u64; n], vec![0u64; n]);
        for t in &self.fragments {
            if let Some(x) = t.root_label() {
                roots[x.0] += 1;
            }
            for (_, x) in t.open_leaves() {
                open[x.0] += 1;
            }
        }
        g.nonterminal_ids()
            .all(|x| roots[x.0] == open[x.0] + u64::from(x == g.start()))
    }
}

/// `x_p` one-level trees for every rule `p`, in rule order.
pub fn seed_forest(g: &Grammar, x: &[u64]) -> Forest {
    let mut fragments = Vec::new();
    for (i, &count) in x.iter().enumerate() {
        for _ in 0..count {
            fragments.push(TreeFragment::one_level(g, RuleId(i)));
        }
    }
    Forest::new(fragments)
}

/// Which fragment to graft when several roots match an open leaf.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MergePolicy {
    #[default]
    SmallestIndex,
    LargestIndex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    /// A fragment rooted at `label` was grafted onto an open leaf.
    Merge {
        label: NtId,
    },
    /// A cycle fragment rooted at `label` was spliced into another fragment.
    Splice {
        label: NtId,
    },
    Rotate {
        from: NtId,
        to: NtId,
    },
    Reroute {
        from: NtId,
        to: NtId,
    },
}

fn merge_once(forest: &mut Forest, policy: MergePolicy) -> Option<NtId> {
    let frags = &forest.fragments;
    let mut target = None;
    'outer: for (i, t1) in frags.iter().enumerate() {
        for (path, x) in t1.open_leaves() {
            let mut donors = frags
                .iter()
                .enumerate()
                .filter(|&(j, t2)| j != i && t2.root_label() == Some(x))
                .map(|(j, _)| j);
            let donor = match policy {
                MergePolicy::SmallestIndex => donors.next(),
                MergePolicy::LargestIndex => donors.next_back(),
            };
            if let Some(j) = donor {
                target = Some((i, path, j, x));
                break 'outer;
            }
        }
    }
    let (i, path, j, x) = target?;
    let donor = forest.fragments.remove(j);
    let i = if j < i { i - 1 } else { i };
    let t1 = std::mem::replace(&mut forest.fragments[i], TreeFragment::new(Node::Epsilon));
    forest.fragments[i] = replace_at(t1, &path, donor).ok()?;
    Some(x)
}

/// Grafts fragments onto open leaves until no merge applies.
pub fn merge_all(g: &Grammar, forest: Forest) -> Result<Forest, ReconstructError> {
    let mut forest = forest;
    merge_all_observed(g, &mut forest, MergePolicy::default(), &mut |_, _| {})?;
    Ok(forest)
}

/// [`merge_all`] with a donor policy and a callback after every graft.
pub fn merge_all_observed(
    g: &Grammar,
    forest: &mut Forest,
    policy: MergePolicy,
    observer: &mut dyn FnMut(&Step, &Forest),
) -> Result<(), ReconstructError> {
    if forest.is_empty() {
        return Ok(());
    }
    if !forest.balanced(g) {
        return Err(ReconstructError::Invariant(
            "root/open-leaf counts are unbalanced".into(),
        ));
    }
    while let Some(label) = merge_once(forest, policy) {
        observer(&Step::Merge { label }, forest);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ReconstructOptions {
    pub merge_policy: MergePolicy,
}

/// Builds a derivation tree whose rule multiset is exactly `x`.
pub fn reconstruct(g: &Grammar, x: &[u64], y: &[u64]) -> Result<TreeFragment, ReconstructError> {
    reconstruct_observed(g, x, y, ReconstructOptions::default(), &mut |_, _| {})
}

/// [`reconstruct`] reporting every surgery step and the forest after it.
pub fn reconstruct_observed(
    g: &Grammar,
    x: &[u64],
    y: &[u64],
    options: ReconstructOptions,
    observer: &mut dyn FnMut(&Step, &Forest),
) -> Result<TreeFragment, ReconstructError> {
    if x.len() != g.rules().len() || y.len() != g.nonterminals().len() {
        return Err(ReconstructError::Precondition);
    }
    let expected_letters = letter_totals(g, x);
    let asg = Assignment::from_parts(x, y, &expected_letters);
    if !build_formula(g).matrix().evaluate(&asg).unwrap_or(false) {
        return Err(ReconstructError::Precondition);
    }

    let mut forest = seed_forest(g, x);
    let check = |f: &Forest| -> Result<(), ReconstructError> {
        if !f.balanced(g) {
            return Err(ReconstructError::Invariant(
                "root/open-leaf counts are unbalanced".into(),
            ));
        }
        if f.rule_counts(g.rules().len()) != x {
            return Err(ReconstructError::Invariant("rule counts changed".into()));
        }
        if f.terminal_counts(g.terminals().len()) != expected_letters {
            return Err(ReconstructError::Invariant(
                "terminal counts changed".into(),
            ));
        }
        Ok(())
    };
    check(&forest)?;
    merge_all_observed(g, &mut forest, options.merge_policy, observer)?;
    check(&forest)?;

    loop {
        if forest.len() == 1 && forest.fragments[0].is_complete() {
            break;
        }
        let (ci, root) = pick_cycle(&forest, y).ok_or_else(|| {
            ReconstructError::Invariant("no cycle fragment left to process".into())
        })?;

        let site =
            (0..forest.len()).find(|&j| j != ci && forest.fragments[j].find_label(root).is_some());
        let step = if let Some(sj) = site {
            let merged = splice(&forest.fragments[sj], &forest.fragments[ci])?;
            forest.fragments[sj] = merged;
            forest.fragments.remove(ci);
            Step::Splice { label: root }
        } else {
            let t = &forest.fragments[ci];
            let (path, on_path) = beta_witness(t, root, y).ok_or_else(|| {
                ReconstructError::Invariant("no node realizes the index of the cycle root".into())
            })?;
            let next = if on_path {
                rotate(t, &path)?
            } else {
                reroute(t, &path)?
            };
            let to = next.cycle().map(|(l, _)| l).ok_or_else(|| {
                ReconstructError::Invariant("surgery did not produce a cycle fragment".into())
            })?;
            if y[to.0] >= y[root.0] {
                return Err(ReconstructError::Invariant(
                    "root index did not decrease".into(),
                ));
            }
            forest.fragments[ci] = next;
            if on_path {
                Step::Rotate { from: root, to }
            } else {
                Step::Reroute { from: root, to }
            }
        };
        observer(&step, &forest);
        check(&forest)?;
        merge_all_observed(g, &mut forest, options.merge_policy, observer)?;
        check(&forest)?;
    }

    let tree = forest.fragments.pop().ok_or(ReconstructError::OpenLeaf)?;
    if !validate_tree(g, &tree) {
        return Err(ReconstructError::Invariant(
            "result is not a derivation tree".into(),
        ));
    }
    Ok(tree)
}

/// `Σ_p |p|_a · x_p` for every letter `a`.
pub fn letter_totals(g: &Grammar, x: &[u64]) -> ParikhVector {
    ParikhVector(
        g.terminal_ids()
            .map(|a| {
                g.occurrences(Symbol::Terminal(a))
                    .iter()
                    .map(|&(p, c)| c * x[p.0])
                    .sum()
            })
            .collect(),
    )
}

/// Cycle fragment with the smallest root index, ties by root symbol.
fn pick_cycle(forest: &Forest, y: &[u64]) -> Option<(usize, NtId)> {
    forest
        .fragments
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.cycle().map(|(x, _)| (i, x)))
        .min_by_key(|&(_, x)| (y[x.0], x))
}

/// A node applying some `Y -> u` with `X ∈ u` and `y_X = y_Y + 1`,
/// preferring the root-to-open-leaf path. Returns the path and whether it is
/// on that path.
fn beta_witness(t: &TreeFragment, x: NtId, y: &[u64]) -> Option<(NodePath, bool)> {
    let (_, open) = t.cycle()?;
    let fits = |n: &Node| match n {
        Node::Rule { lhs, children, .. } => {
            y[x.0] == y[lhs.0] + 1 && children.iter().any(|c| c.label() == Some(x))
        }
        _ => false,
    };
    for depth in 0..open.len() {
        let path = &open[..depth];
        if t.node(path).is_some_and(fits) {
            return Some((path.to_vec(), true));
        }
    }
    let mut found = None;
    t.for_each_node(|p, n| {
        if found.is_none() && !open.starts_with(p) && fits(n) {
            found = Some(p.to_vec());
        }
    });
    found.map(|p| (p, false))
}
