//! Seeded random grammars for property tests and benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grammar::{Grammar, GrammarBuilder};

/// Shape limits for [`random_grammar`].
#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub max_nonterminals: usize,
    pub max_terminals: usize,
    pub max_rules: usize,
    pub max_rhs: usize,
    /// Probability that a right-hand-side symbol is a nonterminal.
    pub nonterminal_weight: f64,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            max_nonterminals: 4,
            max_terminals: 3,
            max_rules: 8,
            max_rhs: 3,
            nonterminal_weight: 0.4,
        }
    }
}

const NONTERMINALS: [&str; 8] = ["S", "A", "B", "C", "D", "E", "F", "G"];
const TERMINALS: [&str; 8] = ["a", "b", "c", "d", "e", "f", "g", "h"];

fn random_rhs<'a, R: Rng>(
    rng: &mut R,
    shape: &Shape,
    nts: &[&'a str],
    ts: &[&'a str],
) -> Vec<&'a str> {
    let len = rng.gen_range(0..=shape.max_rhs);
    (0..len)
        .map(|_| {
            if rng.gen_bool(shape.nonterminal_weight) {
                *nts.choose(rng).unwrap_or(&"S")
            } else {
                *ts.choose(rng).unwrap_or(&"a")
            }
        })
        .collect()
}

/// A grammar within `shape`. Every nonterminal gets at least one rule, so
/// the nonterminal count is exact; terminals that end up unused drop out.
pub fn random_grammar<R: Rng>(rng: &mut R, shape: &Shape) -> Grammar {
    let n_nt = rng.gen_range(1..=shape.max_nonterminals.min(NONTERMINALS.len()));
    let n_t = rng.gen_range(1..=shape.max_terminals.min(TERMINALS.len()));
    let n_rules = rng.gen_range(n_nt..=shape.max_rules.max(n_nt));
    let nts = &NONTERMINALS[..n_nt];
    let ts = &TERMINALS[..n_t];

    // Rules form a set; a repeated draw is discarded.
    let mut rules: Vec<(&str, Vec<&str>)> = Vec::with_capacity(n_rules);
    for i in 0..n_rules {
        let lhs = if i < n_nt {
            nts[i]
        } else {
            *nts.choose(rng).unwrap_or(&"S")
        };
        let rhs = random_rhs(rng, shape, nts, ts);
        if !rules.iter().any(|(l, r)| *l == lhs && *r == rhs) {
            rules.push((lhs, rhs));
        }
    }
    rules
        .iter()
        .fold(GrammarBuilder::new(), |b, (lhs, rhs)| b.rule(lhs, rhs))
        .build()
        .expect("generated names are valid")
}

/// `count` grammars from a fixed seed.
pub fn corpus(seed: u64, count: usize) -> Vec<Grammar> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = Shape::default();
    (0..count)
        .map(|_| random_grammar(&mut rng, &shape))
        .collect()
}

/// A grammar whose [`Grammar::size`] is at least `target` and close to it.
///
/// Symbol counts grow in proportion to the target and right-hand-side slots
/// alternate between nonterminals and terminals, so grammars of different
/// sizes share one composition; only the identities of symbols are random.
pub fn sized_grammar<R: Rng>(rng: &mut R, target: usize) -> Grammar {
    let n_nt = (target / 10).max(2);
    let n_t = (target / 24).max(1);
    let nts: Vec<String> = (0..n_nt)
        .map(|i| if i == 0 { "S".into() } else { format!("N{i}") })
        .collect();
    let ts: Vec<String> = (0..n_t).map(|i| format!("t{i}")).collect();

    let mut b = ts.iter().fold(GrammarBuilder::new(), |b, t| b.terminal(t));
    let mut size = n_nt + n_t;
    let mut slot = 0usize;
    let mut i = 0;
    while i < n_nt || size < target {
        let lhs = if i < n_nt {
            &nts[i]
        } else {
            &nts[rng.gen_range(0..n_nt)]
        };
        let len = rng.gen_range(0..=3);
        let rhs: Vec<&str> = (0..len)
            .map(|_| {
                slot += 1;
                if slot.is_multiple_of(2) {
                    nts[rng.gen_range(0..n_nt)].as_str()
                } else {
                    ts[rng.gen_range(0..n_t)].as_str()
                }
            })
            .collect();
        size += 1 + rhs.len();
        b = b.rule(lhs, &rhs);
        i += 1;
    }
    b.build().expect("generated names are valid")
}
