//! Exact ground truth on small graphs: maximum internally disjoint tree
//! packings for a 3-set, the graph invariant derived from them, and the
//! closed-form degree/connectivity bounds.
//!
//! The per-set search enumerates candidate trees in spider form (three
//! paths from one junction). Any tree connecting three terminals contains
//! such a spider on a subset of its vertices and edges, and replacing a
//! tree by a contained spider keeps a packing valid while only enlarging
//! the residual graph, so the restriction does not change the maximum.
//! The test suite cross-checks this against an unrestricted search on
//! tiny graphs.

use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::graph::{Graph, VertexSet};
use crate::menger;

/// Maximum packing for one terminal set, with witnessing trees.
#[derive(Clone, Debug)]
pub struct SetPacking {
    pub count: usize,
    pub trees: Vec<Vec<(usize, usize)>>,
}

fn norm(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

struct Search<'a> {
    g: &'a Graph,
    t: [usize; 3],
    is_term: Vec<bool>,
    avail: Vec<bool>,
    used: HashSet<(usize, usize)>,
    best: usize,
    best_trees: Vec<Vec<(usize, usize)>>,
    done: Vec<Vec<(usize, usize)>>,
    tree: Vec<(usize, usize)>,
    /// stop as soon as this many trees are found (usize::MAX = exact search)
    target: usize,
    stop: bool,
}

enum After {
    /// Grow the second leg from (junction, target) once the first arrives.
    SecondLeg(usize, usize),
    /// The tree is complete once this leg arrives.
    Complete,
}

impl<'a> Search<'a> {
    fn new(g: &'a Graph, t: [usize; 3]) -> Self {
        let n = g.vertex_count();
        let mut is_term = vec![false; n];
        let mut avail = vec![true; n];
        for &v in &t {
            is_term[v] = true;
            avail[v] = false;
        }
        Search {
            g,
            t,
            is_term,
            avail,
            used: HashSet::new(),
            best: 0,
            best_trees: Vec::new(),
            done: Vec::new(),
            tree: Vec::new(),
            target: usize::MAX,
            stop: false,
        }
    }

    /// Is the edge from the growth frontier at `a` to `b` usable? The
    /// near endpoint is part of the tree being built (or a terminal), so
    /// only the far endpoint's availability matters.
    fn edge_usable(&self, a: usize, b: usize) -> bool {
        if self.used.contains(&norm(a, b)) {
            return false;
        }
        self.is_term[b] || self.avail[b]
    }

    /// Remaining usable edges at terminal index i.
    fn rem_deg(&self, i: usize) -> usize {
        let t = self.t[i];
        self.g
            .adj(t)
            .iter()
            .filter(|&&w| self.edge_usable(t, w))
            .count()
    }

    /// Can all three terminals still reach each other through usable
    /// vertices and edges?
    fn s_connected(&self) -> bool {
        let n = self.g.vertex_count();
        let mut seen = vec![false; n];
        let mut stack = vec![self.t[0]];
        seen[self.t[0]] = true;
        while let Some(u) = stack.pop() {
            for &v in self.g.adj(u) {
                if !seen[v] && self.edge_usable(u, v) {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen[self.t[1]] && seen[self.t[2]]
    }

    /// Prune test for the tree under construction: after committing it,
    /// enough terminal capacity must remain to beat the incumbent.
    fn viable(&self) -> bool {
        let found = self.done.len();
        if self.best <= found {
            return true;
        }
        let need = self.best - found;
        (0..3).all(|i| self.rem_deg(i) >= need)
    }

    /// Mark an edge used (only terminal-incident edges need marking; the
    /// rest are covered by vertex consumption). Returns true if inserted.
    fn take_edge(&mut self, a: usize, b: usize) -> bool {
        self.tree.push(norm(a, b));
        if self.is_term[a] || self.is_term[b] {
            self.used.insert(norm(a, b))
        } else {
            false
        }
    }

    fn untake_edge(&mut self, a: usize, b: usize, inserted: bool) {
        self.tree.pop();
        if inserted {
            self.used.remove(&norm(a, b));
        }
    }

    fn finish_tree(&mut self) {
        let finished = std::mem::take(&mut self.tree);
        self.done.push(finished);
        self.dfs();
        self.tree = self.done.pop().unwrap();
    }

    /// Grow a leg from `cur` to terminal `target`, then continue per
    /// `after`. `cur` is already consumed (or is a terminal junction).
    fn grow_leg(&mut self, cur: usize, target: usize, after: &After) {
        if self.stop {
            return;
        }
        let nbrs: Vec<usize> = self.g.adj(cur).to_vec();
        for x in nbrs {
            if x == target {
                if !self.edge_usable(cur, x) {
                    continue;
                }
                let ins = self.take_edge(cur, x);
                if self.viable() {
                    match *after {
                        After::SecondLeg(j, t2) => self.grow_leg(j, t2, &After::Complete),
                        After::Complete => self.finish_tree(),
                    }
                }
                self.untake_edge(cur, x, ins);
            } else if !self.is_term[x] && self.avail[x] && self.edge_usable(cur, x) {
                let ins = self.take_edge(cur, x);
                self.avail[x] = false;
                if self.viable() {
                    self.grow_leg(x, target, after);
                }
                self.avail[x] = true;
                self.untake_edge(cur, x, ins);
            }
        }
    }

    /// Extend the stem of a spider whose stem currently ends at the
    /// non-terminal `cur`; `tb`, `tc` are the two remaining terminals.
    fn grow_stem(&mut self, cur: usize, tb: usize, tc: usize) {
        if self.stop {
            return;
        }
        // close the stem here: cur is the junction
        self.grow_leg(cur, tb, &After::SecondLeg(cur, tc));
        let nbrs: Vec<usize> = self.g.adj(cur).to_vec();
        for x in nbrs {
            if x == tb || x == tc {
                // stem runs into a terminal, which becomes the junction
                if !self.edge_usable(cur, x) {
                    continue;
                }
                let other = if x == tb { tc } else { tb };
                let ins = self.take_edge(cur, x);
                if self.viable() {
                    self.grow_leg(x, other, &After::Complete);
                }
                self.untake_edge(cur, x, ins);
            } else if !self.is_term[x] && self.avail[x] && self.edge_usable(cur, x) {
                let ins = self.take_edge(cur, x);
                self.avail[x] = false;
                if self.viable() {
                    self.grow_stem(x, tb, tc);
                }
                self.avail[x] = true;
                self.untake_edge(cur, x, ins);
            }
        }
    }

    /// Enumerate every spider using the anchor edge (ta, w).
    fn start_spider(&mut self, ai: usize, w: usize) {
        if self.stop {
            return;
        }
        let ta = self.t[ai];
        let tb = self.t[(ai + 1) % 3];
        let tc = self.t[(ai + 2) % 3];
        let ins = self.take_edge(ta, w);
        if w == tb || w == tc {
            let other = if w == tb { tc } else { tb };
            if self.viable() {
                // junction at w: remaining leg w -> other
                self.grow_leg(w, other, &After::Complete);
                // junction at ta: remaining leg ta -> other
                self.grow_leg(ta, other, &After::Complete);
            }
        } else {
            self.avail[w] = false;
            if self.viable() {
                // junction at ta, anchor edge starts the leg toward tb
                self.grow_leg(w, tb, &After::SecondLeg(ta, tc));
                // junction at ta, anchor edge starts the leg toward tc
                self.grow_leg(w, tc, &After::SecondLeg(ta, tb));
                // junction further out along the stem
                self.grow_stem(w, tb, tc);
            }
            self.avail[w] = true;
        }
        self.untake_edge(ta, w, ins);
    }

    fn dfs(&mut self) {
        if self.stop {
            return;
        }
        let found = self.done.len();
        if found > self.best {
            self.best = found;
            self.best_trees = self.done.clone();
            if self.best >= self.target {
                self.stop = true;
                return;
            }
        }
        // upper bound: every further tree consumes an edge at each terminal
        let (ai, rem_min) = (0..3)
            .map(|i| (i, self.rem_deg(i)))
            .min_by_key(|&(i, d)| (d, i))
            .unwrap();
        if found + rem_min <= self.best {
            return;
        }
        if !self.s_connected() {
            return;
        }
        let ta = self.t[ai];
        let w = match self
            .g
            .adj(ta)
            .iter()
            .copied()
            .find(|&w| self.edge_usable(ta, w))
        {
            Some(w) => w,
            None => return,
        };
        // branch 1: some tree uses the anchor edge, and by spider reduction
        // one tree is a spider containing it
        self.start_spider(ai, w);
        // branch 2: no tree uses the anchor edge
        self.used.insert(norm(ta, w));
        self.dfs();
        self.used.remove(&norm(ta, w));
    }
}

fn check_set(g: &Graph, s: &VertexSet) -> Result<[usize; 3], Error> {
    if s.len() != 3 {
        return Err(Error::input(format!("need 3 distinct vertices, got {}", s.len())));
    }
    let v: Vec<usize> = s.iter().collect();
    for &x in &v {
        if x >= g.vertex_count() {
            return Err(Error::input(format!("vertex {x} out of range")));
        }
    }
    Ok([v[0], v[1], v[2]])
}

/// Maximum number of internally disjoint trees connecting S, with the
/// witnessing trees of one optimal packing.
pub fn kappa3_set_packing(g: &Graph, s: &VertexSet) -> Result<SetPacking, Error> {
    set_packing_search(g, s, usize::MAX)
}

/// Like `kappa3_set_packing`, but stops as soon as `target` trees are
/// found; the reported count is then a lower bound witness, not a maximum.
pub fn set_packing_with_target(
    g: &Graph,
    s: &VertexSet,
    target: usize,
) -> Result<SetPacking, Error> {
    set_packing_search(g, s, target)
}

fn set_packing_search(g: &Graph, s: &VertexSet, target: usize) -> Result<SetPacking, Error> {
    let t = check_set(g, s)?;
    let mut search = Search::new(g, t);
    search.target = target;
    if !search.s_connected() {
        return Ok(SetPacking {
            count: 0,
            trees: Vec::new(),
        });
    }
    search.dfs();
    Ok(SetPacking {
        count: search.best,
        trees: search.best_trees,
    })
}

pub fn kappa3_of_set(g: &Graph, s: &VertexSet) -> Result<usize, Error> {
    Ok(kappa3_set_packing(g, s)?.count)
}

#[derive(Clone, Copy, Debug)]
pub enum Kappa3Mode {
    Exhaustive,
    /// Seeded random triples; the result is an upper bound estimate.
    Sampled { count: usize, seed: u64 },
}

/// The graph invariant: minimum of `kappa3_of_set` over 3-sets, either
/// exhaustively or over a seeded sample.
pub fn kappa3(g: &Graph, mode: Kappa3Mode) -> Result<usize, Error> {
    let n = g.vertex_count();
    if n < 3 {
        return Err(Error::input("kappa3 needs at least 3 vertices"));
    }
    if !g.is_connected() {
        return Err(Error::input("kappa3 requires a connected graph"));
    }
    // Running-minimum pruning: a set only matters if its value is below the
    // best seen so far, so cap each search at `best`. Reaching the cap
    // proves the set cannot lower the minimum; stopping short is only
    // possible after an exhausted (hence exact) search.
    let mut best = usize::MAX;
    let probe = |s: &VertexSet, best: usize| -> Result<usize, Error> {
        let cap = s.iter().map(|v| g.degree(v)).min().unwrap();
        Ok(set_packing_search(g, s, best.min(cap))?.count)
    };
    match mode {
        Kappa3Mode::Exhaustive => {
            for a in 0..n {
                for b in a + 1..n {
                    for c in b + 1..n {
                        let s = VertexSet::from_sorted(vec![a, b, c]);
                        best = best.min(probe(&s, best)?);
                    }
                }
            }
        }
        Kappa3Mode::Sampled { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..count {
                let s = sample_triple(&mut rng, n);
                best = best.min(probe(&s, best)?);
            }
        }
    }
    Ok(best)
}

/// Draw a uniform 3-subset of 0..n.
pub fn sample_triple(rng: &mut ChaCha8Rng, n: usize) -> VertexSet {
    loop {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let c = rng.gen_range(0..n);
        if a != b && a != c && b != c {
            return VertexSet::new(vec![a, b, c]);
        }
    }
}

/// Closed-form bracket from the degree and connectivity bounds.
#[derive(Clone, Copy, Debug)]
pub struct BoundsReport {
    pub lower: usize,
    pub upper: usize,
    pub kappa: usize,
    pub delta: usize,
    pub adjacent_min_degree: bool,
}

pub fn bounds(g: &Graph) -> Result<BoundsReport, Error> {
    if !g.is_connected() {
        return Err(Error::input("bounds require a connected graph"));
    }
    let kappa = menger::vertex_connectivity(g);
    let stats = g.degree_stats();
    let delta = stats.min;
    let adjacent_min_degree = g.edges().iter().any(|&(u, v)| {
        g.degree(u) == delta && g.degree(v) == delta
    });
    // kappa = 4k + r with r in 0..4; lower bound 3k + ceil(r/2)
    let k = kappa / 4;
    let r = kappa % 4;
    let lower = 3 * k + r.div_ceil(2);
    let upper = if adjacent_min_degree { delta - 1 } else { delta };
    Ok(BoundsReport {
        lower,
        upper,
        kappa,
        delta,
        adjacent_min_degree,
    })
}
