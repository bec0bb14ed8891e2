use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use parikh::construction::build_formula;
use parikh::corpus::{random_grammar, Shape};
use parikh::grammar::{parse_grammar, Grammar, TermId};
use parikh::oracle::{enumerate_trees, image_up_to, soundness_assignment};
use parikh::presburger::{to_smt2, Assignment, Var};
use parikh::reconstruct::{factorize_at, NodePath};
use parikh::solver::{solve_membership, vectors_up_to, MembershipResult};

fn grammar() -> impl Strategy<Value = Grammar> {
    any::<u64>()
        .prop_map(|seed| random_grammar(&mut ChaCha8Rng::seed_from_u64(seed), &Shape::default()))
}

fn grammar_and_word() -> impl Strategy<Value = (Grammar, Vec<usize>, Vec<usize>)> {
    grammar().prop_flat_map(|g| {
        let n = g.terminals().len().max(1);
        let word = prop::collection::vec(0..n, 0..6);
        (Just(g), word.clone(), word)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn display_round_trips(g in grammar()) {
        prop_assert_eq!(parse_grammar(&g.to_string()).unwrap(), g);
    }

    #[test]
    fn parikh_map_is_additive((g, u, v) in grammar_and_word()) {
        prop_assume!(!g.terminals().is_empty());
        let u: Vec<TermId> = u.into_iter().map(TermId).collect();
        let v: Vec<TermId> = v.into_iter().map(TermId).collect();
        let uv: Vec<TermId> = u.iter().chain(&v).copied().collect();
        let sum = &g.parikh_of_word(&u).unwrap() + &g.parikh_of_word(&v).unwrap();
        prop_assert_eq!(g.parikh_of_word(&uv).unwrap(), sum);
    }

    #[test]
    fn construction_is_deterministic(g in grammar()) {
        let (a, b) = (build_formula(&g), build_formula(&g));
        prop_assert_eq!(to_smt2(&g, &a, None), to_smt2(&g, &b, None));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn free_variables_are_the_letters(g in grammar()) {
        let expect: std::collections::BTreeSet<Var> = g.terminal_ids().map(Var::LetterCount).collect();
        prop_assert_eq!(build_formula(&g).free_vars(), expect);
    }

    #[test]
    fn oracle_trees_satisfy_the_formula(g in grammar()) {
        let body = build_formula(&g).matrix().clone();
        for d in enumerate_trees(&g, 6) {
            let asg = soundness_assignment(&g, &d.tree);
            prop_assert!(body.evaluate(&asg).unwrap(), "{}", d.tree.to_bracketed(&g));
        }
    }

    #[test]
    fn factorize_then_plug_is_identity(g in grammar()) {
        for d in enumerate_trees(&g, 5) {
            let mut paths: Vec<NodePath> = Vec::new();
            d.tree.for_each_node(|p, n| if n.label().is_some() { paths.push(p.to_vec()) });
            for p in paths {
                let (ctx, sub) = factorize_at(&d.tree, &p).unwrap();
                prop_assert_eq!(&ctx.plug(sub).unwrap(), &d.tree);
            }
        }
    }

    #[test]
    fn oracle_images_grow_with_budget(g in grammar(), k in 0u64..6) {
        prop_assert!(image_up_to(&g, k).is_subset(&image_up_to(&g, k + 1)));
    }

    #[test]
    fn solver_answers_are_monotone_and_satisfy_the_formula(g in grammar(), bound in 1u64..6) {
        let body = build_formula(&g).matrix().clone();
        for z in vectors_up_to(g.terminals().len(), 2) {
            let small = solve_membership(&g, &z, bound).unwrap();
            let large = solve_membership(&g, &z, bound + 1).unwrap();
            if let MembershipResult::Sat { x, y, .. } = &small {
                prop_assert!(x.iter().all(|&c| c <= bound));
                prop_assert!(body.evaluate(&Assignment::from_parts(x, y, &z)).unwrap());
                prop_assert!(large.is_sat());
            }
        }
    }
}
