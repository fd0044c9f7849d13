//! Graph representation: construction, elementary queries, edge-list
//! round-trips, and induced subgraphs.

use genconn::families;
use genconn::graph::{Graph, VertexSet};
use proptest::prelude::*;

fn c3() -> Graph {
    Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap()
}

fn k4() -> Graph {
    Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap()
}

#[test]
fn neighbors_basic() {
    let g = c3();
    assert_eq!(g.neighbors(0).unwrap(), &[1, 2]);
    let cycle = families::gen_kary_ncube(1, 3).unwrap();
    assert_eq!(cycle.graph.neighbors(1).unwrap(), &[0, 2]);
    let isolated = Graph::empty(1);
    assert!(isolated.neighbors(0).unwrap().is_empty());
    assert!(g.neighbors(5).is_err());
}

#[test]
fn rejects_loops_and_duplicates() {
    assert!(Graph::from_edges(3, &[(0, 0)]).is_err());
    assert!(Graph::from_edges(3, &[(0, 1), (1, 0)]).is_err());
    assert!(Graph::from_edges(2, &[(0, 2)]).is_err());
}

#[test]
fn induced_subgraph_examples() {
    let c4 = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
    let (sub, map) = c4.induced_subgraph(&VertexSet::new(vec![0, 1])).unwrap();
    assert_eq!(sub.edge_count(), 1);
    assert_eq!(map.len(), 2);

    let (tri, _) = k4().induced_subgraph(&VertexSet::new(vec![0, 2, 3])).unwrap();
    assert_eq!(tri.vertex_count(), 3);
    assert_eq!(tri.edge_count(), 3);

    // one copy of the two-level torus restricts to a 3-cycle
    let inst = families::gen_kary_ncube(2, 3).unwrap();
    let dec = families::decompose(&inst);
    let (copy, _) = inst.graph.induced_subgraph(&dec.copies[0]).unwrap();
    assert_eq!(copy.vertex_count(), 3);
    assert_eq!(copy.edge_count(), 3);
}

#[test]
fn induced_subgraph_full_is_identity() {
    let g = k4();
    let all: VertexSet = g.vertices().collect();
    let (sub, map) = g.induced_subgraph(&all).unwrap();
    assert_eq!(sub.edges(), g.edges());
    for v in g.vertices() {
        assert_eq!(map[&v], v);
    }
}

#[test]
fn degree_stats_examples() {
    let ag4 = families::gen_alternating_group_graph(4).unwrap();
    let s = ag4.graph.degree_stats();
    assert_eq!((s.min, s.max, s.regular), (4, 4, true));

    let bs4 = families::gen_bubble_sort_star(4).unwrap();
    let s = bs4.graph.degree_stats();
    assert_eq!((s.min, s.max, s.regular), (5, 5, true));

    let path = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    let s = path.degree_stats();
    assert_eq!((s.min, s.max, s.regular), (1, 2, false));
}

#[test]
fn connectivity_basic() {
    assert!(c3().is_connected());
    let two_edges = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
    assert!(!two_edges.is_connected());
    assert!(Graph::empty(0).is_connected());

    // kappa(AG_4) = 4, so removing any 3 vertices leaves it connected
    let ag4 = families::gen_alternating_group_graph(4).unwrap();
    let n = ag4.graph.vertex_count();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let mut allowed = vec![true; n];
                allowed[a] = false;
                allowed[b] = false;
                allowed[c] = false;
                assert!(ag4.graph.is_connected_within(&allowed));
            }
        }
    }
}

#[test]
fn edge_list_text_round_trip() {
    let g = k4();
    let text = g.to_edge_list_text();
    let back = Graph::from_edge_list_text(&text).unwrap();
    assert_eq!(back.edges(), g.edges());
    assert_eq!(back.to_edge_list_text(), text);
}

#[test]
fn edge_list_text_rejects_garbage() {
    assert!(Graph::from_edge_list_text("").is_err());
    assert!(Graph::from_edge_list_text("2 1\n0 5\n").is_err());
    assert!(Graph::from_edge_list_text("3 2\n0 1\n").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_graph_round_trips(n in 1usize..12, picks in prop::collection::vec((0usize..12, 0usize..12), 0..30)) {
        let mut edges: Vec<(usize, usize)> = picks
            .into_iter()
            .filter(|&(u, v)| u < n && v < n && u != v)
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        let g = Graph::from_edges(n, &edges).unwrap();
        prop_assert_eq!(g.edges(), edges.clone());
        let back = Graph::from_edge_list_text(&g.to_edge_list_text()).unwrap();
        prop_assert_eq!(back.edges(), edges);
        // adjacency is symmetric and loop-free
        for v in g.vertices() {
            for &w in g.adj(v) {
                prop_assert!(w != v);
                prop_assert!(g.adj(w).contains(&v));
            }
        }
    }

    #[test]
    fn induced_subgraph_keeps_exactly_inner_edges(n in 2usize..10, picks in prop::collection::vec((0usize..10, 0usize..10), 0..25), keep in prop::collection::vec(any::<bool>(), 10)) {
        let mut edges: Vec<(usize, usize)> = picks
            .into_iter()
            .filter(|&(u, v)| u < n && v < n && u != v)
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        let g = Graph::from_edges(n, &edges).unwrap();
        let vs: VertexSet = (0..n).filter(|&v| keep[v]).collect();
        let (sub, map) = g.induced_subgraph(&vs).unwrap();
        let mut expect: Vec<(usize, usize)> = edges
            .iter()
            .filter(|&&(u, v)| vs.contains(u) && vs.contains(v))
            .map(|&(u, v)| {
                let (a, b) = (map[&u], map[&v]);
                (a.min(b), a.max(b))
            })
            .collect();
        expect.sort_unstable();
        prop_assert_eq!(sub.edges(), expect);
    }
}
