//! Flow-based path primitives: internally disjoint paths, vertex
//! connectivity, disjoint (X,Y)-paths, and fans.

use genconn::families;
use genconn::graph::{Graph, VertexSet};
use genconn::menger::{
    self, disjoint_xy_paths, fan, internally_disjoint_paths, validate_family, vertex_connectivity,
};
use proptest::prelude::*;

fn k4() -> Graph {
    Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap()
}

fn c5() -> Graph {
    Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)]).unwrap()
}

#[test]
fn idp_complete_graph() {
    let g = k4();
    let out = internally_disjoint_paths(&g, 0, 1, 3).unwrap();
    assert_eq!(out.family.paths.len(), 3);
    assert!(out.cut.is_none());
    validate_family(&g, &out.family).unwrap();
    // one of the paths is the direct edge
    assert!(out.family.paths.iter().any(|p| p.vertices() == [0, 1]));
}

#[test]
fn idp_cycle_yields_both_arcs() {
    let g = c5();
    let out = internally_disjoint_paths(&g, 0, 2, 2).unwrap();
    assert_eq!(out.family.paths.len(), 2);
    validate_family(&g, &out.family).unwrap();
    // asking for more returns the max plus a separating set of that size
    let out = internally_disjoint_paths(&g, 0, 2, 3).unwrap();
    assert_eq!(out.family.paths.len(), 2);
    assert_eq!(out.cut.unwrap().len(), 2);
}

#[test]
fn idp_rejects_equal_endpoints() {
    assert!(internally_disjoint_paths(&k4(), 1, 1, 1).is_err());
}

#[test]
fn idp_meets_connectivity_in_families() {
    let inst = families::gen_alternating_group_graph(4).unwrap();
    let g = &inst.graph;
    for u in g.vertices() {
        for v in u + 1..g.vertex_count() {
            let out = internally_disjoint_paths(g, u, v, 4).unwrap();
            assert_eq!(out.family.paths.len(), 4, "pair ({u},{v})");
            validate_family(g, &out.family).unwrap();
        }
    }
}

#[test]
fn vertex_connectivity_known_values() {
    assert_eq!(vertex_connectivity(&k4()), 3);
    assert_eq!(vertex_connectivity(&c5()), 2);
    let disconnected = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
    assert_eq!(vertex_connectivity(&disconnected), 0);

    let cases: Vec<(&str, usize)> = vec![
        ("ag4", 4),
        ("qk23", 4),
        ("qk33", 6),
        ("ss4", 5),
        ("bs4", 5),
    ];
    for (name, expect) in cases {
        let g = match name {
            "ag4" => families::gen_alternating_group_graph(4).unwrap().graph,
            "qk23" => families::gen_kary_ncube(2, 3).unwrap().graph,
            "qk33" => families::gen_kary_ncube(3, 3).unwrap().graph,
            "ss4" => families::gen_split_star(4).unwrap().graph,
            _ => families::gen_bubble_sort_star(4).unwrap().graph,
        };
        assert_eq!(vertex_connectivity(&g), expect, "{name}");
    }
}

#[test]
fn xy_paths_basic() {
    let g = k4();
    let out = disjoint_xy_paths(
        &g,
        &VertexSet::new(vec![0, 1]),
        &VertexSet::new(vec![2, 3]),
        2,
    )
    .unwrap();
    assert_eq!(out.family.paths.len(), 2);
    validate_family(&g, &out.family).unwrap();
}

#[test]
fn xy_paths_shared_vertex_is_zero_length() {
    let g = k4();
    let out = disjoint_xy_paths(
        &g,
        &VertexSet::new(vec![0, 1]),
        &VertexSet::new(vec![1, 2]),
        2,
    )
    .unwrap();
    assert!(out.family.paths.iter().any(|p| p.vertices() == [1]));
    validate_family(&g, &out.family).unwrap();
}

#[test]
fn xy_paths_across_torus_copies() {
    // the 3 crossing edges between two copies carry a flow of exactly 3
    let inst = families::gen_kary_ncube(2, 3).unwrap();
    let dec = families::decompose(&inst);
    let out = disjoint_xy_paths(&inst.graph, &dec.copies[0], &dec.copies[1], 3).unwrap();
    assert_eq!(out.family.paths.len(), 3);
    validate_family(&inst.graph, &out.family).unwrap();
}

#[test]
fn xy_paths_rejects_oversized_request() {
    assert!(disjoint_xy_paths(&k4(), &VertexSet::new(vec![0]), &VertexSet::new(vec![1]), 2).is_err());
}

#[test]
fn fan_examples() {
    let star = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
    let out = fan(&star, 0, &VertexSet::new(vec![1, 2, 3]), 3).unwrap();
    assert_eq!(out.family.paths.len(), 3);
    validate_family(&star, &out.family).unwrap();

    let inst = families::gen_kary_ncube(2, 3).unwrap();
    let x = 0;
    let ys: VertexSet = inst.graph.adj(x).iter().copied().collect();
    let out = fan(&inst.graph, x, &ys, 4).unwrap();
    assert_eq!(out.family.paths.len(), 4);
    for p in &out.family.paths {
        assert_eq!(p.vertices().len(), 2);
    }

    let ag4 = families::gen_alternating_group_graph(4).unwrap();
    let ys = VertexSet::new(vec![3, 5, 8, 11]);
    let out = fan(&ag4.graph, 0, &ys, 4).unwrap();
    assert_eq!(out.family.paths.len(), 4);
    validate_family(&ag4.graph, &out.family).unwrap();
}

#[test]
fn fan_rejects_root_in_targets() {
    assert!(fan(&k4(), 0, &VertexSet::new(vec![0, 1]), 2).is_err());
}

#[test]
fn determinism() {
    let g = families::gen_bubble_sort_star(4).unwrap().graph;
    let a = internally_disjoint_paths(&g, 0, 17, 5).unwrap();
    let b = internally_disjoint_paths(&g, 0, 17, 5).unwrap();
    let va: Vec<&[usize]> = a.family.paths.iter().map(|p| p.vertices()).collect();
    let vb: Vec<&[usize]> = b.family.paths.iter().map(|p| p.vertices()).collect();
    assert_eq!(va, vb);
}

fn random_graph(n: usize, picks: &[(usize, usize)]) -> Graph {
    let mut edges: Vec<(usize, usize)> = picks
        .iter()
        .filter(|&&(u, v)| u < n && v < n && u != v)
        .map(|&(u, v)| (u.min(v), u.max(v)))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    Graph::from_edges(n, &edges).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Menger duality on random graphs: the achieved path count always has a
    // matching vertex cut certificate, and removing the cut separates u, v.
    #[test]
    fn idp_cut_certificate_is_exact(n in 3usize..10, picks in prop::collection::vec((0usize..10, 0usize..10), 4..28)) {
        let g = random_graph(n, &picks);
        let (u, v) = (0, n - 1);
        if g.has_edge(u, v) {
            return Ok(());
        }
        let out = internally_disjoint_paths(&g, u, v, n).unwrap();
        validate_family(&g, &out.family).map_err(|e| TestCaseError::fail(e))?;
        let cut = out.cut.expect("asking for n paths always leaves a cut");
        prop_assert_eq!(cut.len(), out.family.paths.len());
        let mut allowed = vec![true; n];
        for w in cut.iter() {
            prop_assert!(w != u && w != v);
            allowed[w] = false;
        }
        // u must not reach v once the cut is removed
        let mut seen = vec![false; n];
        seen[u] = true;
        let mut queue = vec![u];
        while let Some(x) = queue.pop() {
            for &w in g.adj(x) {
                if allowed[w] && !seen[w] {
                    seen[w] = true;
                    queue.push(w);
                }
            }
        }
        prop_assert!(!seen[v]);
    }

    // Whitney consistency: kappa(g) internally disjoint paths exist between
    // every vertex pair of a connected graph.
    #[test]
    fn whitney_consistency(n in 3usize..9, picks in prop::collection::vec((0usize..9, 0usize..9), 6..24)) {
        let g = random_graph(n, &picks);
        if !g.is_connected() {
            return Ok(());
        }
        let kappa = vertex_connectivity(&g);
        for u in 0..n {
            for v in u + 1..n {
                let out = internally_disjoint_paths(&g, u, v, kappa).unwrap();
                prop_assert!(out.family.paths.len() >= kappa);
            }
        }
    }
}

#[test]
fn validate_family_catches_violations() {
    let g = k4();
    // two "internally disjoint" paths sharing an interior vertex
    let bad = menger::PathFamily {
        paths: vec![
            menger::Path(vec![0, 2, 1]),
            menger::Path(vec![0, 2, 3, 1]),
        ],
        regime: menger::Regime::InternallyDisjoint { u: 0, v: 1 },
    };
    assert!(validate_family(&g, &bad).is_err());
    // a non-edge step
    let bad = menger::PathFamily {
        paths: vec![menger::Path(vec![0, 1])],
        regime: menger::Regime::InternallyDisjoint { u: 0, v: 1 },
    };
    let sparse = Graph::from_edges(2, &[]).unwrap();
    assert!(validate_family(&sparse, &bad).is_err());
}
