//! Flow-based connectivity primitives: internally disjoint paths, vertex
//! connectivity, pairwise disjoint (X,Y)-paths and fans.
//!
//! All operations reduce to unit-capacity max-flow on a vertex-split
//! network (each vertex becomes an in/out arc of capacity one) solved with
//! Dinic's algorithm. Arc insertion order and path decomposition are fully
//! deterministic: adjacency is scanned sorted and junctions are resolved
//! smallest-successor-first.

use crate::error::Error;
use crate::graph::{Graph, VertexSet};

const INF: i64 = 1 << 40;

/// A walk without repeated vertices; consecutive entries are adjacent in
/// the host graph. A single vertex is a legal (zero-length) path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Path(pub Vec<usize>);

impl Path {
    pub fn first(&self) -> usize {
        *self.0.first().expect("empty path")
    }
    pub fn last(&self) -> usize {
        *self.0.last().expect("empty path")
    }
    pub fn vertices(&self) -> &[usize] {
        &self.0
    }
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.windows(2).map(|w| (w[0].min(w[1]), w[0].max(w[1])))
    }
    pub fn reversed(&self) -> Path {
        let mut v = self.0.clone();
        v.reverse();
        Path(v)
    }
}

/// Which disjointness contract a family of paths claims to satisfy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Regime {
    /// All paths run u -> v and pairwise share exactly {u, v}.
    InternallyDisjoint { u: usize, v: usize },
    /// Paths share no vertex at all; each starts in X, ends in Y, interior
    /// avoids X union Y.
    PairwiseDisjoint { x: VertexSet, y: VertexSet },
    /// All paths start at x, pairwise share only x, end at distinct
    /// vertices of Y with interiors outside Y.
    Fan { x: usize, y: VertexSet },
}

#[derive(Clone, Debug)]
pub struct PathFamily {
    pub paths: Vec<Path>,
    pub regime: Regime,
}

/// Result of a Menger-type query: the paths actually achieved, and a
/// separating vertex set when the requested count was not reached.
#[derive(Clone, Debug)]
pub struct MengerOutcome {
    pub family: PathFamily,
    pub cut: Option<VertexSet>,
}

/// Re-validates a path family against its declared regime by direct
/// inspection, independent of the flow machinery.
pub fn validate_family(g: &Graph, fam: &PathFamily) -> Result<(), String> {
    for (i, p) in fam.paths.iter().enumerate() {
        if p.0.is_empty() {
            return Err(format!("path {i} is empty"));
        }
        let mut seen = std::collections::HashSet::new();
        for &v in &p.0 {
            if v >= g.vertex_count() {
                return Err(format!("path {i} has invalid vertex {v}"));
            }
            if !seen.insert(v) {
                return Err(format!("path {i} repeats vertex {v}"));
            }
        }
        for w in p.0.windows(2) {
            if !g.has_edge(w[0], w[1]) {
                return Err(format!("path {i} uses non-edge ({},{})", w[0], w[1]));
            }
        }
    }
    match &fam.regime {
        Regime::InternallyDisjoint { u, v } => {
            for (i, p) in fam.paths.iter().enumerate() {
                if p.first() != *u || p.last() != *v {
                    return Err(format!("path {i} does not run {u} -> {v}"));
                }
            }
            for i in 0..fam.paths.len() {
                for j in i + 1..fam.paths.len() {
                    for &w in &fam.paths[i].0 {
                        if w != *u && w != *v && fam.paths[j].0.contains(&w) {
                            return Err(format!("paths {i},{j} share interior vertex {w}"));
                        }
                    }
                }
            }
        }
        Regime::PairwiseDisjoint { x, y } => {
            for (i, p) in fam.paths.iter().enumerate() {
                if !x.contains(p.first()) {
                    return Err(format!("path {i} does not start in X"));
                }
                if !y.contains(p.last()) {
                    return Err(format!("path {i} does not end in Y"));
                }
                for &w in &p.0[..p.0.len() - 1] {
                    if w != p.first() && (x.contains(w) || y.contains(w)) {
                        return Err(format!("path {i} passes through X/Y vertex {w}"));
                    }
                }
                if p.0.len() > 1 && y.contains(p.first()) && !x.contains(p.first()) {
                    return Err(format!("path {i} starts in Y only"));
                }
            }
            for i in 0..fam.paths.len() {
                for j in i + 1..fam.paths.len() {
                    for &w in &fam.paths[i].0 {
                        if fam.paths[j].0.contains(&w) {
                            return Err(format!("paths {i},{j} share vertex {w}"));
                        }
                    }
                }
            }
        }
        Regime::Fan { x, y } => {
            let mut terminals = std::collections::HashSet::new();
            for (i, p) in fam.paths.iter().enumerate() {
                if p.first() != *x {
                    return Err(format!("fan path {i} does not start at {x}"));
                }
                if !y.contains(p.last()) {
                    return Err(format!("fan path {i} does not end in Y"));
                }
                if !terminals.insert(p.last()) {
                    return Err(format!("fan terminal {} repeated", p.last()));
                }
                for &w in &p.0[1..p.0.len() - 1] {
                    if y.contains(w) {
                        return Err(format!("fan path {i} passes through Y vertex {w}"));
                    }
                }
            }
            for i in 0..fam.paths.len() {
                for j in i + 1..fam.paths.len() {
                    for &w in &fam.paths[i].0 {
                        if w != *x && fam.paths[j].0.contains(&w) {
                            return Err(format!("fan paths {i},{j} share vertex {w}"));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Dinic max-flow on an explicit arc list.

pub(crate) struct FlowNet {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<i64>,
    orig: Vec<i64>,
}

impl FlowNet {
    pub fn new(nodes: usize) -> Self {
        FlowNet {
            adj: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
            orig: Vec::new(),
        }
    }

    pub fn add(&mut self, u: usize, v: usize, c: i64) {
        let e = self.to.len();
        self.to.push(v);
        self.cap.push(c);
        self.orig.push(c);
        self.adj[u].push(e);
        self.to.push(u);
        self.cap.push(0);
        self.orig.push(0);
        self.adj[v].push(e + 1);
    }

    fn bfs_levels(&self, s: usize, t: usize) -> Option<Vec<u32>> {
        let mut level = vec![u32::MAX; self.adj.len()];
        let mut queue = std::collections::VecDeque::new();
        level[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if self.cap[e] > 0 && level[v] == u32::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        if level[t] == u32::MAX {
            None
        } else {
            Some(level)
        }
    }

    fn dfs_push(
        &mut self,
        u: usize,
        t: usize,
        pushed: i64,
        level: &[u32],
        it: &mut [usize],
    ) -> i64 {
        if u == t {
            return pushed;
        }
        while it[u] < self.adj[u].len() {
            let e = self.adj[u][it[u]];
            let v = self.to[e];
            if self.cap[e] > 0 && level[v] == level[u] + 1 {
                let d = self.dfs_push(v, t, pushed.min(self.cap[e]), level, it);
                if d > 0 {
                    self.cap[e] -= d;
                    self.cap[e ^ 1] += d;
                    return d;
                }
            }
            it[u] += 1;
        }
        0
    }

    /// Max flow from s to t, stopping once `limit` is reached.
    pub fn max_flow(&mut self, s: usize, t: usize, limit: i64) -> i64 {
        let mut total = 0i64;
        while total < limit {
            let level = match self.bfs_levels(s, t) {
                Some(l) => l,
                None => break,
            };
            let mut it = vec![0usize; self.adj.len()];
            loop {
                let pushed = self.dfs_push(s, t, limit - total, &level, &mut it);
                if pushed == 0 {
                    break;
                }
                total += pushed;
                if total >= limit {
                    break;
                }
            }
        }
        total
    }

    /// Nodes reachable from s in the residual network.
    pub fn residual_reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(u) = stack.pop() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if self.cap[e] > 0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }

    /// Decompose the current flow into node paths from s to t, removing
    /// flow cycles as encountered. Junctions resolve to the arc with the
    /// smallest head node id. Consumes the flow.
    pub fn decompose(&mut self, s: usize, t: usize) -> Vec<Vec<usize>> {
        let flow_of = |net: &FlowNet, e: usize| net.orig[e] - net.cap[e];
        let mut paths = Vec::new();
        loop {
            // pick the outgoing arc of s with positive flow and smallest head
            let start = self.adj[s]
                .iter()
                .copied()
                .filter(|&e| e % 2 == 0 && flow_of(self, e) > 0)
                .min_by_key(|&e| self.to[e]);
            let start = match start {
                Some(e) => e,
                None => break,
            };
            let mut node_path = vec![s];
            let mut arc_path = vec![start];
            let mut on_path = vec![usize::MAX; self.adj.len()];
            on_path[s] = 0;
            let mut cur = self.to[start];
            while cur != t {
                if on_path[cur] != usize::MAX {
                    // flow cycle: cancel the loop portion and resume at cur
                    let k = on_path[cur];
                    for &e in &arc_path[k..] {
                        self.cap[e] += 1;
                        self.cap[e ^ 1] -= 1;
                    }
                    for &v in &node_path[k + 1..] {
                        on_path[v] = usize::MAX;
                    }
                    node_path.truncate(k + 1);
                    arc_path.truncate(k);
                } else {
                    on_path[cur] = node_path.len();
                    node_path.push(cur);
                }
                let next = self.adj[cur]
                    .iter()
                    .copied()
                    .filter(|&e| e % 2 == 0 && flow_of(self, e) > 0)
                    .min_by_key(|&e| self.to[e])
                    .expect("flow conservation violated during decomposition");
                arc_path.push(next);
                cur = self.to[next];
            }
            node_path.push(t);
            for &e in &arc_path {
                // consume one unit
                self.cap[e] += 1;
                self.cap[e ^ 1] -= 1;
            }
            paths.push(node_path);
        }
        paths
    }
}

// ---------------------------------------------------------------------------
// Vertex-split network construction.

fn node_in(v: usize) -> usize {
    2 * v
}
fn node_out(v: usize) -> usize {
    2 * v + 1
}

/// How a vertex participates in a split network.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Excluded,
    /// unit vertex capacity, arcs in and out
    Interior,
    /// infinite capacity endpoint (terminal of internally disjoint paths)
    Endpoint,
    /// unit capacity, graph arcs out only (path start)
    SourceOnly,
    /// unit capacity, graph arcs in only (path end)
    SinkOnly,
}

struct SplitNet {
    net: FlowNet,
    source: usize,
    sink: usize,
}

fn build_split(g: &Graph, roles: &[Role]) -> SplitNet {
    let n = g.vertex_count();
    let source = 2 * n;
    let sink = 2 * n + 1;
    let mut net = FlowNet::new(2 * n + 2);
    for v in 0..n {
        match roles[v] {
            Role::Excluded => {}
            Role::Endpoint => net.add(node_in(v), node_out(v), INF),
            _ => net.add(node_in(v), node_out(v), 1),
        }
    }
    for (u, v) in g.edges() {
        let (ru, rv) = (roles[u], roles[v]);
        if ru == Role::Excluded || rv == Role::Excluded {
            continue;
        }
        // Graph arcs are uncapacitated: the unit vertex caps already force
        // disjointness, and keeping edges slack pins min cuts onto vertex
        // arcs so cut_vertices reads them off exactly. The one exception is
        // an edge between two infinite-capacity endpoints, which must count
        // as a single path.
        let cap = if ru == Role::Endpoint && rv == Role::Endpoint {
            1
        } else {
            INF
        };
        // arc u -> v allowed unless u is sink-only or v is source-only
        if ru != Role::SinkOnly && rv != Role::SourceOnly {
            net.add(node_out(u), node_in(v), cap);
        }
        if rv != Role::SinkOnly && ru != Role::SourceOnly {
            net.add(node_out(v), node_in(u), cap);
        }
    }
    SplitNet { net, source, sink }
}

/// Translate a decomposed node path (source, in/out pairs, sink) back to a
/// vertex sequence.
fn nodes_to_vertices(nodes: &[usize], n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for &nd in nodes {
        if nd >= 2 * n {
            continue;
        }
        let v = nd / 2;
        if out.last() != Some(&v) {
            out.push(v);
        }
    }
    out
}

fn cut_vertices(net: &FlowNet, n: usize) -> Vec<usize> {
    let reach = net.residual_reachable(2 * n);
    let mut cut = Vec::new();
    for v in 0..n {
        if reach[node_in(v)] && !reach[node_out(v)] {
            cut.push(v);
        }
    }
    cut
}

// ---------------------------------------------------------------------------
// Masked low-level operations (used heavily by the packing module).

/// Up to k internally disjoint u-v paths inside the allowed mask.
/// Returns the paths found and, when fewer than k, a separating set.
pub fn idp_masked(
    g: &Graph,
    allowed: &[bool],
    u: usize,
    v: usize,
    k: usize,
) -> (Vec<Path>, Option<Vec<usize>>) {
    let n = g.vertex_count();
    let mut roles = vec![Role::Excluded; n];
    for w in 0..n {
        if allowed[w] {
            roles[w] = Role::Interior;
        }
    }
    roles[u] = Role::Endpoint;
    roles[v] = Role::Endpoint;
    let mut sn = build_split(g, &roles);
    sn.net.add(sn.source, node_in(u), INF);
    sn.net.add(node_out(v), sn.sink, INF);
    let flow = sn.net.max_flow(sn.source, sn.sink, k as i64);
    let cut = if (flow as usize) < k {
        Some(cut_vertices(&sn.net, n))
    } else {
        None
    };
    let paths = sn
        .net
        .decompose(sn.source, sn.sink)
        .iter()
        .map(|p| Path(nodes_to_vertices(p, n)))
        .collect();
    (paths, cut)
}

/// Pairwise disjoint (X,Y)-paths inside the mask; X and Y must be disjoint
/// here (callers handle the zero-length convention).
pub fn xy_masked(
    g: &Graph,
    allowed: &[bool],
    xs: &[usize],
    ys: &[usize],
    k: usize,
) -> (Vec<Path>, Option<Vec<usize>>) {
    let n = g.vertex_count();
    let mut roles = vec![Role::Excluded; n];
    for w in 0..n {
        if allowed[w] {
            roles[w] = Role::Interior;
        }
    }
    for &x in xs {
        roles[x] = Role::SourceOnly;
    }
    for &y in ys {
        roles[y] = Role::SinkOnly;
    }
    let mut sn = build_split(g, &roles);
    for &x in xs {
        sn.net.add(sn.source, node_in(x), 1);
    }
    for &y in ys {
        sn.net.add(node_out(y), sn.sink, 1);
    }
    let flow = sn.net.max_flow(sn.source, sn.sink, k as i64);
    let cut = if (flow as usize) < k {
        Some(cut_vertices(&sn.net, n))
    } else {
        None
    };
    let paths = sn
        .net
        .decompose(sn.source, sn.sink)
        .iter()
        .map(|p| Path(nodes_to_vertices(p, n)))
        .collect();
    (paths, cut)
}

/// A fan from x to targets inside the mask: paths pairwise sharing only x,
/// distinct terminals in ys, interiors outside ys.
pub fn fan_masked(
    g: &Graph,
    allowed: &[bool],
    x: usize,
    ys: &[usize],
    k: usize,
) -> (Vec<Path>, Option<Vec<usize>>) {
    let n = g.vertex_count();
    let mut roles = vec![Role::Excluded; n];
    for w in 0..n {
        if allowed[w] {
            roles[w] = Role::Interior;
        }
    }
    roles[x] = Role::Endpoint;
    for &y in ys {
        roles[y] = Role::SinkOnly;
    }
    let mut sn = build_split(g, &roles);
    sn.net.add(sn.source, node_in(x), INF);
    for &y in ys {
        sn.net.add(node_out(y), sn.sink, 1);
    }
    let flow = sn.net.max_flow(sn.source, sn.sink, k as i64);
    let cut = if (flow as usize) < k {
        Some(cut_vertices(&sn.net, n))
    } else {
        None
    };
    let paths = sn
        .net
        .decompose(sn.source, sn.sink)
        .iter()
        .map(|p| Path(nodes_to_vertices(p, n)))
        .collect();
    (paths, cut)
}

/// One group of exits in a `grouped_paths` query: from the candidate
/// vertices, exactly `count` must be consumed as path endpoints.
pub struct ExitGroup {
    pub candidates: Vec<usize>,
    pub count: usize,
}

/// Disjoint paths from the (distinct) source vertices such that every
/// target is hit exactly once and each exit group consumes exactly its
/// count of endpoints; unchosen exit candidates stay usable as interiors.
/// Returns (paths ending at targets, per-group exit paths) or None if the
/// demand is infeasible.
pub fn grouped_paths(
    g: &Graph,
    allowed: &[bool],
    sources: &[usize],
    targets: &[usize],
    groups: &[ExitGroup],
) -> Option<(Vec<Path>, Vec<Vec<Path>>)> {
    let n = g.vertex_count();
    let demand = targets.len() + groups.iter().map(|gr| gr.count).sum::<usize>();
    if sources.len() != demand {
        return None;
    }
    let mut roles = vec![Role::Excluded; n];
    for w in 0..n {
        if allowed[w] {
            roles[w] = Role::Interior;
        }
    }
    for &s in sources {
        roles[s] = Role::SourceOnly;
    }
    for &t in targets {
        roles[t] = Role::SinkOnly;
    }
    // zero-length paths: a source that is itself a target
    let mut zero = Vec::new();
    let mut live_sources = Vec::new();
    for &s in sources {
        if targets.contains(&s) {
            zero.push(s);
        } else {
            live_sources.push(s);
        }
    }
    let live_targets: Vec<usize> = targets.iter().copied().filter(|t| !zero.contains(t)).collect();

    // extra nodes: one per group, after source/sink
    let base = 2 * n + 2;
    let sn = build_split(g, &roles);
    let (source, sink) = (sn.source, sn.sink);
    let mut net = sn.net;
    for _ in groups {
        net.adj.push(Vec::new());
    }
    for &s in &live_sources {
        net.add(source, node_in(s), 1);
    }
    for &t in &live_targets {
        net.add(node_out(t), sink, 1);
    }
    for (gi, gr) in groups.iter().enumerate() {
        for &c in &gr.candidates {
            // a source candidate has no incoming arcs, so this only lets
            // the unit entering there leave the copy at its entry vertex
            if matches!(roles[c], Role::Interior | Role::SourceOnly) {
                net.add(node_out(c), base + gi, 1);
            }
        }
        net.add(base + gi, sink, gr.count as i64);
    }
    let need = live_targets.len() + groups.iter().map(|gr| gr.count).sum::<usize>();
    let flow = net.max_flow(source, sink, need as i64);
    if (flow as usize) < need {
        return None;
    }
    let mut target_paths: Vec<Path> = zero.iter().map(|&v| Path(vec![v])).collect();
    let mut group_paths: Vec<Vec<Path>> = groups.iter().map(|_| Vec::new()).collect();
    for nodes in net.decompose(source, sink) {
        // second-to-last node tells us where the path ended
        let tail = nodes[nodes.len() - 2];
        if tail >= base {
            let gi = tail - base;
            group_paths[gi].push(Path(nodes_to_vertices(&nodes, n)));
        } else {
            target_paths.push(Path(nodes_to_vertices(&nodes, n)));
        }
    }
    Some((target_paths, group_paths))
}

// ---------------------------------------------------------------------------
// Public spec-level operations.

fn full_mask(g: &Graph) -> Vec<bool> {
    vec![true; g.vertex_count()]
}

/// k internally disjoint u-v paths, or the achievable maximum with a
/// separating vertex set.
pub fn internally_disjoint_paths(
    g: &Graph,
    u: usize,
    v: usize,
    k: usize,
) -> Result<MengerOutcome, Error> {
    if u == v {
        return Err(Error::input("endpoints must differ"));
    }
    if u >= g.vertex_count() || v >= g.vertex_count() {
        return Err(Error::input("vertex id out of range"));
    }
    let (paths, cut) = idp_masked(g, &full_mask(g), u, v, k);
    Ok(MengerOutcome {
        family: PathFamily {
            paths,
            regime: Regime::InternallyDisjoint { u, v },
        },
        cut: cut.map(VertexSet::new),
    })
}

/// Exact vertex connectivity. Disconnected graphs return 0; the complete
/// graph K_t returns t-1 by convention.
pub fn vertex_connectivity(g: &Graph) -> usize {
    let n = g.vertex_count();
    if n <= 1 {
        return 0;
    }
    if !g.is_connected() {
        return 0;
    }
    if g.edge_count() == n * (n - 1) / 2 {
        return n - 1;
    }
    // pair coverage: a minimum-degree vertex v0 against all non-neighbours,
    // plus all non-adjacent pairs inside N(v0). Any minimum vertex cut C
    // either misses v0 (then v0 and some vertex outside C ∪ N(v0) are
    // separated, covered by the first family) or contains v0 (then N(v0)
    // meets both sides, covered by the second).
    let v0 = (0..n).min_by_key(|&v| (g.degree(v), v)).unwrap();
    let mask = full_mask(g);
    let mut best = n - 1;
    for u in 0..n {
        if u == v0 || g.has_edge(v0, u) {
            continue;
        }
        let (paths, _) = idp_masked(g, &mask, v0, u, best);
        best = best.min(paths.len());
    }
    let nbrs: Vec<usize> = g.adj(v0).to_vec();
    for i in 0..nbrs.len() {
        for j in i + 1..nbrs.len() {
            let (a, b) = (nbrs[i], nbrs[j]);
            if g.has_edge(a, b) {
                continue;
            }
            let (paths, _) = idp_masked(g, &mask, a, b, best);
            best = best.min(paths.len());
        }
    }
    best
}

/// k fully disjoint (X,Y)-paths; a vertex in both X and Y contributes a
/// zero-length path.
pub fn disjoint_xy_paths(
    g: &Graph,
    xs: &VertexSet,
    ys: &VertexSet,
    k: usize,
) -> Result<MengerOutcome, Error> {
    if k > xs.len().min(ys.len()) {
        return Err(Error::input(format!(
            "requested {k} paths but |X|={} |Y|={}",
            xs.len(),
            ys.len()
        )));
    }
    for v in xs.iter().chain(ys.iter()) {
        if v >= g.vertex_count() {
            return Err(Error::input(format!("vertex {v} out of range")));
        }
    }
    let shared: Vec<usize> = xs.iter().filter(|&v| ys.contains(v)).collect();
    let live_x: Vec<usize> = xs.iter().filter(|v| !shared.contains(v)).collect();
    let live_y: Vec<usize> = ys.iter().filter(|v| !shared.contains(v)).collect();
    let mut allowed = full_mask(g);
    for &v in &shared {
        allowed[v] = false;
    }
    let remaining = k.saturating_sub(shared.len());
    let (mut paths, cut) = xy_masked(g, &allowed, &live_x, &live_y, remaining);
    let mut all: Vec<Path> = shared.iter().map(|&v| Path(vec![v])).collect();
    all.append(&mut paths);
    let cut = if all.len() < k {
        Some(VertexSet::new(
            cut.unwrap_or_default()
                .into_iter()
                .chain(shared.iter().copied())
                .collect(),
        ))
    } else {
        None
    };
    Ok(MengerOutcome {
        family: PathFamily {
            paths: all,
            regime: Regime::PairwiseDisjoint {
                x: xs.clone(),
                y: ys.clone(),
            },
        },
        cut,
    })
}

/// A k-fan from x to Y.
pub fn fan(g: &Graph, x: usize, ys: &VertexSet, k: usize) -> Result<MengerOutcome, Error> {
    if ys.contains(x) {
        return Err(Error::input("fan root must not lie in Y"));
    }
    if k > ys.len() {
        return Err(Error::input(format!(
            "requested {k}-fan but |Y|={}",
            ys.len()
        )));
    }
    let targets: Vec<usize> = ys.iter().collect();
    let (paths, cut) = fan_masked(g, &full_mask(g), x, &targets, k);
    let cut = if paths.len() < k {
        Some(VertexSet::new(cut.unwrap_or_default()))
    } else {
        None
    };
    Ok(MengerOutcome {
        family: PathFamily {
            paths,
            regime: Regime::Fan { x, y: ys.clone() },
        },
        cut,
    })
}
