//! Parikh images of context-free grammars as existential Presburger
//! formulas.
//!
//! [`construction::build_formula`] produces, in linear time, a formula whose
//! models are exactly the letter-count vectors of the words a grammar
//! generates. [`solver::solve_membership`] decides membership of a vector up
//! to a bound on rule counts and backs every positive answer with a
//! derivation tree built by [`reconstruct::reconstruct`]. [`oracle`] offers
//! brute-force enumeration to check all of this against.
//!
//! ```
//! use parikh::grammar::{parse_grammar, ParikhVector};
//! use parikh::solver::{solve_membership, MembershipResult};
//!
//! let g = parse_grammar("S -> a S b | ").unwrap();
//! let z = ParikhVector(vec![2, 2]);
//! match solve_membership(&g, &z, 8).unwrap() {
//!     MembershipResult::Sat { word, .. } => assert_eq!(g.spell(&word), "aabb"),
//!     MembershipResult::UnsatUpTo(_) => unreachable!(),
//! }
//! ```

pub mod cli;
pub mod construction;
pub mod corpus;
pub mod grammar;
pub mod oracle;
pub mod presburger;
pub mod reconstruct;
pub mod solver;

pub use construction::build_formula;
pub use grammar::{parse_grammar, Grammar, NtId, ParikhVector, RuleId, Symbol, TermId};
pub use presburger::{Assignment, Formula, Var};
pub use solver::{solve_membership, MembershipResult};
