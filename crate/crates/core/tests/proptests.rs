//! Property-based invariants over the term layer and phase 1.

use proptest::prelude::*;

use smtbridge::phase1::{extract_type_hyps, NameGen};
use smtbridge::term::{parse_one, print, Goal, Term};

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_-]{0,6}".prop_filter("reserved", |s| {
        !matches!(s.as_str(), "t" | "nil" | "lambda" | "quote" | "and" | "or")
    })
}

fn arb_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        ident().prop_map(Term::Sym),
        (-100i64..100).prop_map(Term::int),
        (1i64..40, 2i64..40).prop_map(|(n, d)| Term::rat(n.into(), d.into())),
        Just(Term::t()),
        Just(Term::nil()),
        "[a-z]{1,5}".prop_map(|s| Term::QuotedSym(s)),
        "[a-z ]{0,8}".prop_map(Term::Str),
    ];
    leaf.prop_recursive(4, 32, 3, |inner| {
        prop_oneof![
            (ident(), prop::collection::vec(inner.clone(), 0..3))
                .prop_map(|(h, args)| Term::App(h, args)),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Term::implies(a, b)),
            (inner.clone(), inner.clone(), inner)
                .prop_map(|(a, b, c)| Term::app("if", vec![a, b, c])),
        ]
    })
}

proptest! {
    /// print ∘ parse is the identity on printable terms.
    #[test]
    fn parse_print_round_trip(t in arb_term()) {
        let text = print(&t);
        let back = parse_one(&text).unwrap();
        prop_assert_eq!(back, t);
    }

    /// Simultaneous substitution of disjoint expressions agrees with
    /// applying the two single substitutions in either order.
    #[test]
    fn disjoint_substitutions_commute(t0 in arb_term()) {
        // Wrap so the term always has at least two free variables.
        let t = Term::app("wrap", vec![Term::sym("wa"), Term::sym("wb"), t0]);
        let a = Term::sym("wa");
        let b = Term::sym("wb");
        // Longer than ident() can generate, so no accidental collision.
        let subs = vec![
            (a.clone(), "fresh_variable_a".to_string()),
            (b.clone(), "fresh_variable_b".to_string()),
        ];
        let both = t.substitute(&subs).unwrap();
        let ab = t
            .substitute(&subs[..1])
            .unwrap()
            .substitute(&subs[1..])
            .unwrap();
        let ba = t
            .substitute(&subs[1..])
            .unwrap()
            .substitute(&subs[..1])
            .unwrap();
        prop_assert_eq!(&both, &ab);
        prop_assert_eq!(&both, &ba);
    }

    /// Harvesting never invents variables: every harvested type
    /// hypothesis names a free variable of the goal, and G_T prints and
    /// re-parses.
    #[test]
    fn harvest_stays_within_goal(t in arb_term()) {
        let goal = Goal::new(t);
        let (hyps, g_t) = extract_type_hyps(&goal);
        for h in &hyps {
            prop_assert!(goal.free_vars.contains(&h.var));
        }
        prop_assert_eq!(parse_one(&print(&g_t)).unwrap(), g_t);
    }

    /// Fresh names from a generator never collide with the seed set or
    /// each other.
    #[test]
    fn namegen_fresh(seed in prop::collection::btree_set(ident(), 0..5),
                     bases in prop::collection::vec(ident(), 1..6)) {
        let mut names = NameGen::new(seed.iter().cloned());
        let mut issued = std::collections::BTreeSet::new();
        for b in &bases {
            let n = names.fresh(b);
            prop_assert!(!seed.contains(&n), "collision with seed: {}", n);
            prop_assert!(issued.insert(n), "duplicate issue");
        }
    }
}
