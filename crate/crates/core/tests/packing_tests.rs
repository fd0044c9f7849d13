//! Tree-packing construction: the copy-union path primitives, lifting,
//! the full recursion, and the independent verifier.

use genconn::families::{self, FamilyInstance};
use genconn::graph::VertexSet;
use genconn::menger::validate_family;
use genconn::oracle;
use genconn::packing::{
    self, build_tree_packing, connect_in_copy_union, lift_trees, paths_two_copies, verify_packing,
    CopyUnion, TreePacking, TreeProvenance,
};
use proptest::prelude::*;

fn union_of<'a>(inst: &'a FamilyInstance, coords: &[usize]) -> CopyUnion<'a> {
    let region: Vec<usize> = inst.graph.vertices().collect();
    CopyUnion::new(inst, inst.top_level(), &region, coords)
}

#[test]
fn connect_same_copy() {
    let inst = families::gen_kary_ncube(3, 3).unwrap();
    let h = union_of(&inst, &[0, 1]);
    // both endpoints in copy 0 (last digit 0)
    let (v1, v2) = (0, 9);
    assert_eq!(inst.copy_of(v1), inst.copy_of(v2));
    let fam = connect_in_copy_union(&h, v1, v2).unwrap();
    assert_eq!(fam.paths.len(), 4);
    validate_family(&inst.graph, &fam).unwrap();
}

#[test]
fn connect_across_copies() {
    let inst = families::gen_kary_ncube(3, 3).unwrap();
    let h = union_of(&inst, &[0, 1]);
    let (v1, v2) = (0, 13);
    assert_ne!(inst.copy_of(v1), inst.copy_of(v2));
    let fam = connect_in_copy_union(&h, v1, v2).unwrap();
    assert_eq!(fam.paths.len(), 4);
    validate_family(&inst.graph, &fam).unwrap();
    // every path stays inside the union
    let mask = h.mask();
    for p in &fam.paths {
        for &v in p.vertices() {
            assert!(mask[v]);
        }
    }
}

#[test]
fn connect_rejects_degenerate_unions() {
    let inst = families::gen_kary_ncube(3, 3).unwrap();
    let h = union_of(&inst, &[0]);
    assert!(connect_in_copy_union(&h, 0, 9).is_err());
    let h = union_of(&inst, &[0, 1]);
    assert!(connect_in_copy_union(&h, 0, 0).is_err());
}

#[test]
fn two_copy_paths_counts() {
    // across two copies of a two-level torus, r+2n-3 = 3 paths
    let inst = families::gen_kary_ncube(2, 3).unwrap();
    let h = union_of(&inst, &[0, 1]);
    // x in copy 0, its outside neighbour x+... in copy 1: labels 00 and 01
    let x = inst.parse_label("00").unwrap();
    let y = inst.parse_label("01").unwrap();
    let fam = paths_two_copies(&h, x, y).unwrap();
    assert_eq!(fam.paths.len(), 3);
    validate_family(&inst.graph, &fam).unwrap();
    assert!(fam.paths.iter().any(|p| p.vertices() == [x, y]));

    // non-adjacent endpoints
    let y2 = inst.parse_label("21").unwrap();
    if !inst.graph.has_edge(x, y2) {
        let fam = paths_two_copies(&h, x, y2).unwrap();
        assert_eq!(fam.paths.len(), 3);
        validate_family(&inst.graph, &fam).unwrap();
    }
}

#[test]
fn two_copy_paths_rejects_wrong_union() {
    let inst = families::gen_kary_ncube(2, 3).unwrap();
    let h = union_of(&inst, &[0, 1, 2]);
    assert!(paths_two_copies(&h, 0, 4).is_err());
}

#[test]
fn lift_adds_two_trees() {
    // terminals inside one copy: build the inner packing on the child
    // member, then lift into the parent
    let inst = families::gen_kary_ncube(2, 3).unwrap();
    // copy 0 holds vertices with last digit 0: labels 00, 10, 20
    let s: Vec<usize> = ["00", "10", "20"]
        .iter()
        .map(|l| inst.parse_label(l).unwrap())
        .collect();
    let inner = build_inner_packing(&inst, [s[0], s[1], s[2]]);
    let lifted = lift_trees(&inst, &inner).unwrap();
    assert_eq!(lifted.trees.len(), inner.trees.len() + 2);
    verify_packing(&inst.graph, &lifted).unwrap();
}

/// A level-1 packing for terminals sharing the top copy, found by the
/// oracle restricted to that copy.
fn build_inner_packing(inst: &FamilyInstance, s: [usize; 3]) -> TreePacking {
    let copy = inst.copy_of(s[0]);
    let verts: VertexSet = inst
        .graph
        .vertices()
        .filter(|&v| inst.copy_of(v) == copy)
        .collect();
    let (sub, map) = inst.graph.induced_subgraph(&verts).unwrap();
    let back: std::collections::BTreeMap<usize, usize> =
        map.iter().map(|(&old, &new)| (new, old)).collect();
    let sp = oracle::kappa3_set_packing(
        &sub,
        &VertexSet::new(s.iter().map(|&v| map[&v]).collect()),
    )
    .unwrap();
    TreePacking {
        s,
        trees: sp
            .trees
            .iter()
            .map(|t| t.iter().map(|&(u, v)| (back[&u], back[&v])).collect())
            .collect(),
        trace: vec![
            TreeProvenance {
                rule: "base".into(),
                depth: 0,
            };
            sp.trees.len()
        ],
    }
}

#[test]
fn build_packing_small_families_exhaustive() {
    // (instance, expected tree count) for every triple
    let cases = vec![
        (families::gen_alternating_group_graph(4).unwrap(), 3),
        (families::gen_kary_ncube(2, 3).unwrap(), 3),
        (families::gen_split_star(3).unwrap(), 2),
        (families::gen_bubble_sort_star(3).unwrap(), 2),
    ];
    for (inst, expect) in cases {
        let n = inst.graph.vertex_count();
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    let s = VertexSet::new(vec![a, b, c]);
                    let p = build_tree_packing(&inst, &s).unwrap();
                    assert_eq!(p.trees.len(), expect, "{} S={a},{b},{c}", inst.spec_string());
                    verify_packing(&inst.graph, &p).unwrap();
                }
            }
        }
    }
}

#[test]
fn construction_matches_oracle_on_alternating_group_graph() {
    let inst = families::gen_alternating_group_graph(4).unwrap();
    let n = inst.graph.vertex_count();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let s = VertexSet::new(vec![a, b, c]);
                let built = build_tree_packing(&inst, &s).unwrap().trees.len();
                let exact = oracle::kappa3_of_set(&inst.graph, &s).unwrap();
                assert_eq!(built, exact, "S={a},{b},{c}");
            }
        }
    }
}

#[test]
fn trace_names_a_rule_for_every_tree() {
    let inst = families::gen_kary_ncube(3, 3).unwrap();
    let p = build_tree_packing(&inst, &VertexSet::new(vec![1, 11, 22])).unwrap();
    assert_eq!(p.trace.len(), p.trees.len());
    for t in &p.trace {
        assert!(!t.rule.is_empty());
        assert!(
            t.rule.contains("thm1") || t.rule.contains("lemma") || t.rule.contains("base")
                || t.rule.contains("fallback"),
            "unexpected rule {:?}",
            t.rule
        );
    }
}

#[test]
fn count_never_exceeds_degree_bound() {
    // kappa3 <= delta - 1 on these regular graphs
    for inst in [
        families::gen_kary_ncube(2, 4).unwrap(),
        families::gen_bubble_sort_star(4).unwrap(),
    ] {
        let delta = inst.graph.degree_stats().min;
        let p = build_tree_packing(&inst, &VertexSet::new(vec![0, 1, 2])).unwrap();
        assert!(p.trees.len() <= delta - 1);
        assert_eq!(p.trees.len(), inst.target_trees());
    }
}

#[test]
fn build_rejects_bad_terminals() {
    let inst = families::gen_kary_ncube(2, 3).unwrap();
    assert!(build_tree_packing(&inst, &VertexSet::new(vec![0, 1])).is_err());
    assert!(build_tree_packing(&inst, &VertexSet::new(vec![0, 1, 99])).is_err());
}

#[test]
fn verify_packing_negative_cases() {
    let inst = families::gen_kary_ncube(2, 3).unwrap();
    let g = &inst.graph;
    let good = build_tree_packing(&inst, &VertexSet::new(vec![0, 4, 8])).unwrap();
    verify_packing(g, &good).unwrap();

    // two trees sharing a non-terminal vertex
    let mut shared_vertex = good.clone();
    if let Some(&(u, v)) = shared_vertex.trees[0]
        .iter()
        .find(|&&(u, v)| ![0, 4, 8].contains(&u) || ![0, 4, 8].contains(&v))
    {
        let w = if ![0, 4, 8].contains(&u) { u } else { v };
        // graft an edge at w onto another tree
        let x = *g.adj(w).first().unwrap();
        shared_vertex.trees[1].push((w, x));
        assert!(verify_packing(g, &shared_vertex).is_err());
    }

    // duplicated edge across trees
    let mut shared_edge = good.clone();
    let e = shared_edge.trees[0][0];
    shared_edge.trees[1].push(e);
    assert!(verify_packing(g, &shared_edge).is_err());

    // a tree missing a terminal
    let mut missing = good.clone();
    missing.trees[0] = vec![(0, *g.adj(0).first().unwrap())];
    assert!(verify_packing(g, &missing).is_err());

    // a cyclic "tree"
    let mut cyclic = good.clone();
    cyclic.trees[0] = vec![(0, 1), (1, 2), (0, 2)];
    assert!(verify_packing(g, &cyclic).is_err());
}

#[test]
fn certificate_reflects_packing() {
    let inst = families::gen_bubble_sort_star(4).unwrap();
    let p = build_tree_packing(&inst, &VertexSet::new(vec![2, 9, 17])).unwrap();
    let cert = packing::certificate(&inst, &p);
    assert!(cert.verified);
    assert_eq!(cert.family, "bs");
    assert_eq!(cert.params["n"], 4);
    assert_eq!(cert.s.ids, vec![2, 9, 17]);
    assert_eq!(cert.s.labels.len(), 3);
    assert_eq!(cert.trees.len(), p.trees.len());
    // serialized form round-trips
    let text = serde_json::to_string(&cert).unwrap();
    let back: packing::Certificate = serde_json::from_str(&text).unwrap();
    assert_eq!(back.trees, cert.trees);
    assert_eq!(back.verified, cert.verified);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // soundness on sampled triples of mid-size members: the construction
    // returns exactly the target count and passes independent verification
    #[test]
    fn sound_on_sampled_triples(seed in 0u64..10_000) {
        use rand::SeedableRng;
        let inst = families::gen_kary_ncube(2, 4).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let s = oracle::sample_triple(&mut rng, inst.graph.vertex_count());
        let p = build_tree_packing(&inst, &s).unwrap();
        prop_assert_eq!(p.trees.len(), inst.target_trees());
        prop_assert!(verify_packing(&inst.graph, &p).is_ok());
    }

    #[test]
    fn sound_on_sampled_triples_bubble_sort_star(seed in 0u64..10_000) {
        use rand::SeedableRng;
        let inst = families::gen_bubble_sort_star(4).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let s = oracle::sample_triple(&mut rng, inst.graph.vertex_count());
        let p = build_tree_packing(&inst, &s).unwrap();
        prop_assert_eq!(p.trees.len(), inst.target_trees());
        prop_assert!(verify_packing(&inst.graph, &p).is_ok());
    }
}
