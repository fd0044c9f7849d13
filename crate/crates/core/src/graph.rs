//! Simple undirected graphs over dense integer vertex ids.
//!
//! Adjacency lists are kept sorted so that every iteration order in the
//! crate is deterministic. Graphs are immutable once built.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::Error;

/// Sorted, duplicate-free list of vertex ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexSet(Vec<usize>);

impl VertexSet {
    pub fn new(mut ids: Vec<usize>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        VertexSet(ids)
    }

    pub fn from_sorted(ids: Vec<usize>) -> Self {
        debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
        VertexSet(ids)
    }

    pub fn contains(&self, v: usize) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl FromIterator<usize> for VertexSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        VertexSet::new(iter.into_iter().collect())
    }
}

/// Minimum degree, maximum degree and regularity flag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DegreeStats {
    pub min: usize,
    pub max: usize,
    pub regular: bool,
}

/// Simple undirected graph with vertices `0..vertex_count`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
    edge_count: usize,
}

impl Graph {
    /// Graph on `n` vertices with no edges.
    pub fn empty(n: usize) -> Self {
        Graph {
            adj: vec![Vec::new(); n],
            edge_count: 0,
        }
    }

    /// Build from an edge list; rejects self-loops, duplicates and
    /// out-of-range endpoints.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, Error> {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::input(format!(
                    "edge ({u},{v}) out of range for {n} vertices"
                )));
            }
            if u == v {
                return Err(Error::input(format!("self-loop at vertex {u}")));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        for (v, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::input(format!("duplicate edge at vertex {v}")));
            }
        }
        Ok(Graph {
            adj,
            edge_count: edges.len(),
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn vertices(&self) -> std::ops::Range<usize> {
        0..self.adj.len()
    }

    fn check_vertex(&self, v: usize) -> Result<(), Error> {
        if v < self.adj.len() {
            Ok(())
        } else {
            Err(Error::input(format!(
                "vertex {v} out of range for {} vertices",
                self.adj.len()
            )))
        }
    }

    /// Sorted open neighbourhood of `v`.
    pub fn neighbors(&self, v: usize) -> Result<&[usize], Error> {
        self.check_vertex(v)?;
        Ok(&self.adj[v])
    }

    /// Like `neighbors` but panics on bad ids; for internal hot paths.
    pub fn adj(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.adj.len() && self.adj[u].binary_search(&v).is_ok()
    }

    /// All edges as (min, max) pairs in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for u in self.vertices() {
            for &v in &self.adj[u] {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn degree_stats(&self) -> DegreeStats {
        if self.adj.is_empty() {
            return DegreeStats {
                min: 0,
                max: 0,
                regular: true,
            };
        }
        let min = self.adj.iter().map(Vec::len).min().unwrap();
        let max = self.adj.iter().map(Vec::len).max().unwrap();
        DegreeStats {
            min,
            max,
            regular: min == max,
        }
    }

    /// True iff the graph has at most one connected component.
    pub fn is_connected(&self) -> bool {
        let n = self.adj.len();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }

    /// Connectivity of the subgraph induced by the `allowed` mask.
    pub fn is_connected_within(&self, allowed: &[bool]) -> bool {
        let start = match (0..self.adj.len()).find(|&v| allowed[v]) {
            Some(v) => v,
            None => return true,
        };
        let total = allowed.iter().filter(|&&a| a).count();
        let mut seen = vec![false; self.adj.len()];
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &self.adj[u] {
                if allowed[v] && !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == total
    }

    /// Shortest path from `from` to any vertex satisfying `goal`, moving only
    /// through vertices allowed by the mask (the start is exempt from the
    /// mask check, goal vertices must be allowed). Returns the full vertex
    /// sequence. Deterministic: BFS scanning sorted adjacency.
    pub fn bfs_path_to(
        &self,
        from: usize,
        allowed: &[bool],
        goal: impl Fn(usize) -> bool,
    ) -> Option<Vec<usize>> {
        let n = self.adj.len();
        let mut prev = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::new();
        seen[from] = true;
        if goal(from) {
            return Some(vec![from]);
        }
        queue.push_back(from);
        while let Some(u) = queue.pop_front() {
            for &v in &self.adj[u] {
                if seen[v] || !allowed[v] {
                    continue;
                }
                seen[v] = true;
                prev[v] = u;
                if goal(v) {
                    let mut path = vec![v];
                    let mut cur = v;
                    while prev[cur] != usize::MAX {
                        cur = prev[cur];
                        path.push(cur);
                    }
                    path.reverse();
                    return Some(path);
                }
                queue.push_back(v);
            }
        }
        None
    }

    /// Subgraph induced by `vs`, with vertices renumbered to `0..|vs|`.
    /// The map sends old ids to new ids.
    pub fn induced_subgraph(&self, vs: &VertexSet) -> Result<(Graph, BTreeMap<usize, usize>), Error> {
        for v in vs.iter() {
            self.check_vertex(v)?;
        }
        let map: BTreeMap<usize, usize> = vs.iter().enumerate().map(|(i, v)| (v, i)).collect();
        let mut edges = Vec::new();
        for (v, &nv) in &map {
            for &w in &self.adj[*v] {
                if w > *v {
                    if let Some(&nw) = map.get(&w) {
                        edges.push((nv, nw));
                    }
                }
            }
        }
        let g = Graph::from_edges(vs.len(), &edges)?;
        Ok((g, map))
    }

    /// Canonical edge-list text: `<vertex_count> <edge_count>` then one
    /// `u v` line per edge (u < v), lexicographically sorted, LF endings.
    pub fn to_edge_list_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.vertex_count(), self.edge_count());
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn from_edge_list_text(text: &str) -> Result<Graph, Error> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::input("empty edge-list input"))?;
        let mut parts = header.split_whitespace();
        let n: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::input("bad vertex count in header"))?;
        let m: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::input("bad edge count in header"))?;
        let mut edges = Vec::with_capacity(m);
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let u: usize = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::input(format!("bad edge line: {line:?}")))?;
            let v: usize = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::input(format!("bad edge line: {line:?}")))?;
            edges.push((u, v));
        }
        if edges.len() != m {
            return Err(Error::input(format!(
                "header claims {m} edges, found {}",
                edges.len()
            )));
        }
        Graph::from_edges(n, &edges)
    }
}
