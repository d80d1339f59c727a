//! Property tests over random terms and clusters.

use std::collections::BTreeMap;

use proptest::prelude::*;

use clatter_core::geometry::{
    internal_positions, is_cluster, GeometricCluster, Position, PositionSet,
};
use clatter_core::inductive::{coarsening_le, witness_check, Witness};
use clatter_core::terms::{
    is_standard, match_pattern, standardize, unify, Substitution, Term, Variable,
};

fn arb_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        Just(Term::constant("e")),
        Just(Term::constant("0")),
        (1u64..4).prop_map(Term::xvar),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|t| Term::app("a", vec![t])),
            inner.clone().prop_map(|t| Term::app("c", vec![t])),
            (inner.clone(), inner).prop_map(|(s, t)| Term::app("b", vec![s, t])),
        ]
    })
}

// Renames every variable occurrence apart, making the term linear and
// standard (a pattern whenever it is not a variable).
fn linearized(t: &Term) -> Term {
    fn go(t: &Term, next: &mut u64) -> Term {
        match t {
            Term::Var(_) => {
                let v = Term::xvar(*next);
                *next += 1;
                v
            }
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| go(a, next)).collect()),
        }
    }
    go(t, &mut 1)
}

// Closes an arbitrary selection of internal positions under endpoints.
fn cluster_from_seed(t: &Term, seed: u64) -> PositionSet {
    let internal: Vec<Position> = internal_positions(t).into_iter().collect();
    let mut chosen: PositionSet = internal
        .iter()
        .enumerate()
        .filter(|(i, _)| seed & (1 << (i % 63)) != 0)
        .map(|(_, p)| p.clone())
        .collect();
    let edges: Vec<Position> = chosen.edges().cloned().collect();
    for edge in edges {
        let mut parent = edge.path.clone();
        parent.pop();
        chosen.insert(Position::vertex(parent));
        chosen.insert(Position::vertex(edge.path.clone()));
    }
    chosen
}

// A deterministic substitution over the given variables, shaped by the seed.
fn substitution_from_seed(vars: &[Variable], seed: u64) -> Substitution {
    let menu = [
        Term::constant("e"),
        Term::constant("0"),
        Term::app("a", vec![Term::constant("0")]),
        Term::app("b", vec![Term::constant("e"), Term::xvar(9)]),
        Term::xvar(7),
        Term::app("c", vec![Term::app("a", vec![Term::xvar(8)])]),
    ];
    Substitution::from_pairs(vars.iter().enumerate().map(|(i, v)| {
        let pick = ((seed >> (i % 60)) as usize + i) % menu.len();
        (v.clone(), menu[pick].clone())
    }))
}

// Terms equal up to a bijective variable renaming.
fn alpha_equal(s: &Term, t: &Term) -> bool {
    fn go(
        s: &Term,
        t: &Term,
        fwd: &mut BTreeMap<Variable, Variable>,
        bwd: &mut BTreeMap<Variable, Variable>,
    ) -> bool {
        match (s, t) {
            (Term::Var(v), Term::Var(w)) => {
                let f = fwd.entry(v.clone()).or_insert_with(|| w.clone());
                let b = bwd.entry(w.clone()).or_insert_with(|| v.clone());
                f == w && b == v
            }
            (Term::App(f, fargs), Term::App(g, gargs)) => {
                f == g && fargs.iter().zip(gargs).all(|(a, b)| go(a, b, fwd, bwd))
            }
            _ => false,
        }
    }
    go(s, t, &mut BTreeMap::new(), &mut BTreeMap::new())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn match_recovers_substitution(t in arb_term(), seed in any::<u64>()) {
        let pattern = linearized(&t);
        if matches!(pattern, Term::Var(_)) {
            let sigma = Substitution::singleton(Variable::standard(1), t);
            let instance = sigma.apply(&pattern);
            prop_assert_eq!(match_pattern(&pattern, &instance).unwrap(), Some(sigma));
            return Ok(());
        }
        let vars: Vec<Variable> = pattern.variables().into_iter().collect();
        let sigma = substitution_from_seed(&vars, seed);
        let instance = sigma.apply(&pattern);
        let recovered = match_pattern(&pattern, &instance).unwrap().unwrap();
        for v in &vars {
            prop_assert_eq!(recovered.get(v), sigma.get(v));
        }
    }

    #[test]
    fn unify_is_symmetric_up_to_renaming(s in arb_term(), t in arb_term()) {
        let st = unify(&s, &t);
        let ts = unify(&t, &s);
        prop_assert_eq!(st.is_some(), ts.is_some());
        if let (Some(a), Some(b)) = (st, ts) {
            prop_assert_eq!(a.apply(&s), a.apply(&t));
            prop_assert_eq!(b.apply(&s), b.apply(&t));
            prop_assert!(alpha_equal(&a.apply(&s), &b.apply(&s)));
        }
    }

    #[test]
    fn unify_is_idempotent(s in arb_term(), t in arb_term()) {
        if let Some(sigma) = unify(&s, &t) {
            let applied = sigma.apply(&s);
            prop_assert_eq!(sigma.apply(&applied), applied);
        }
    }

    #[test]
    fn standardize_round_trip(t in arb_term()) {
        let linear = linearized(&t);
        let (std_term, renaming) = standardize(&linear).unwrap();
        prop_assert!(is_standard(&std_term));
        prop_assert_eq!(
            clatter_core::terms::rename_variables(&linear, &renaming),
            std_term.clone()
        );
        // Idempotence on standard terms.
        let (again, _) = standardize(&std_term).unwrap();
        prop_assert_eq!(again, std_term);
    }

    #[test]
    fn replace_subterm_identity(t in arb_term()) {
        for path in t.node_paths() {
            let sub = t.subterm_at(&path).unwrap().clone();
            prop_assert_eq!(t.replace_at(&path, sub).unwrap(), t.clone());
        }
    }

    #[test]
    fn join_meet_preserve_edge_closure(t in arb_term(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let a = cluster_from_seed(&t, s1);
        let b = cluster_from_seed(&t, s2);
        prop_assert!(is_cluster(&t, &a));
        prop_assert!(is_cluster(&t, &b));
        prop_assert!(is_cluster(&t, &a.union(&b)));
        prop_assert!(is_cluster(&t, &a.intersection(&b)));
    }

    #[test]
    fn components_are_clusters_and_reconstruct(t in arb_term(), seed in any::<u64>()) {
        let positions = cluster_from_seed(&t, seed);
        let cluster = GeometricCluster::new(t.clone(), positions.clone()).unwrap();
        let components = cluster.components();
        let mut rebuilt = PositionSet::new();
        for component in &components {
            prop_assert!(is_cluster(&t, component));
            prop_assert!(rebuilt.is_disjoint(component));
            rebuilt = rebuilt.union(component);
        }
        prop_assert_eq!(rebuilt, positions);
    }

    #[test]
    fn flatten_ignores_gap_names(t in arb_term(), seed in any::<u64>()) {
        let linear = linearized(&t);
        let positions = cluster_from_seed(&linear, seed);
        let cluster = GeometricCluster::new(linear.clone(), positions).unwrap();
        let inductive = cluster.to_inductive();
        prop_assert_eq!(inductive.canonicalize().flatten(), inductive.flatten());
        prop_assert_eq!(inductive.flatten(), linear);
    }

    #[test]
    fn coarsening_chain_composes(t in arb_term(), s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
        // x ⊑ x∪y ⊑ x∪y∪z: compose the two witnesses and re-verify.
        let linear = linearized(&t);
        let x = cluster_from_seed(&linear, s1);
        let xy = x.union(&cluster_from_seed(&linear, s2));
        let xyz = xy.union(&cluster_from_seed(&linear, s3));
        let fine = GeometricCluster::new(linear.clone(), x).unwrap().to_inductive();
        let mid = GeometricCluster::new(linear.clone(), xy).unwrap().to_inductive();
        let coarse = GeometricCluster::new(linear.clone(), xyz).unwrap().to_inductive();
        let w1 = coarsening_le(&fine, &mid).unwrap().expect("x ⊑ x∪y");
        let w2 = coarsening_le(&mid, &coarse).unwrap().expect("x∪y ⊑ x∪y∪z");
        let composed = Witness::new(
            coarse
                .assignment()
                .keys()
                .map(|g| {
                    let through_mid = w2.get(g).expect("w2 covers coarse gaps");
                    (g.clone(), w1.apply(through_mid).expect("w1 covers mid gaps"))
                })
                .collect(),
        );
        prop_assert!(witness_check(&fine, &coarse, &composed));
    }
}
