//! Constructing the full complement of internally disjoint trees for any
//! three vertices of a recursive family instance.
//!
//! The recursion follows the copy structure: if all three terminals share
//! a copy, pack inside it and lift two extra trees through the outside
//! neighbours; if they split two/one or one/one/one, connect them with
//! disjoint path systems inside the involved copies and a fan from the
//! third vertex routed through the remaining copies. Every path-system
//! step is realized by unit-capacity flow inside the relevant copy; the
//! cross-copy routing (which copy serves which fan target, which vertices
//! proxy for the crossing edges) is planned combinatorially.
//!
//! Steps whose feasibility relies on crossing-edge abundance can fail on
//! the smallest members; those fall back to direct flow on the copy union
//! or, last, to the exact oracle, and the per-tree trace records it.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::families::{FamilyInstance, FamilyKind};
use crate::graph::{Graph, VertexSet};
use crate::menger::{self, ExitGroup, Path, PathFamily, Regime};
use crate::oracle;

/// Largest region the oracle fallback will attempt.
const FALLBACK_ORACLE_CAP: usize = 40;

// ---------------------------------------------------------------------------
// Packing, trace, verification.

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TreeProvenance {
    pub rule: String,
    pub depth: usize,
}

#[derive(Clone, Debug)]
pub struct TreePacking {
    pub s: [usize; 3],
    pub trees: Vec<Vec<(usize, usize)>>,
    pub trace: Vec<TreeProvenance>,
}

impl TreePacking {
    pub fn fallback_count(&self) -> usize {
        self.trace
            .iter()
            .filter(|t| t.rule.contains("fallback"))
            .count()
    }
}

/// Independent check: every edge set is a tree containing S, trees meet
/// pairwise exactly in S, and no edge is shared.
pub fn verify_packing(g: &Graph, p: &TreePacking) -> Result<(), String> {
    let s: BTreeSet<usize> = p.s.iter().copied().collect();
    if s.len() != 3 {
        return Err("terminal set is not three distinct vertices".into());
    }
    let mut vertex_sets: Vec<BTreeSet<usize>> = Vec::new();
    let mut seen_edges: HashSet<(usize, usize)> = HashSet::new();
    for (i, tree) in p.trees.iter().enumerate() {
        if tree.is_empty() {
            return Err(format!("tree {i} is empty"));
        }
        let mut verts: BTreeSet<usize> = BTreeSet::new();
        for &(u, v) in tree {
            if !g.has_edge(u, v) {
                return Err(format!("tree {i} uses non-edge ({u},{v})"));
            }
            if !seen_edges.insert((u.min(v), u.max(v))) {
                return Err(format!("edge ({u},{v}) used by two trees"));
            }
            verts.insert(u);
            verts.insert(v);
        }
        if tree.len() + 1 != verts.len() {
            return Err(format!("tree {i} has a cycle or is disconnected"));
        }
        // connectivity over the tree edges
        let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
        for &(u, v) in tree {
            adj.entry(u).or_default().push(v);
            adj.entry(v).or_default().push(u);
        }
        let start = *verts.iter().next().unwrap();
        let mut reach = BTreeSet::new();
        let mut stack = vec![start];
        reach.insert(start);
        while let Some(u) = stack.pop() {
            for &v in adj.get(&u).into_iter().flatten() {
                if reach.insert(v) {
                    stack.push(v);
                }
            }
        }
        if reach.len() != verts.len() {
            return Err(format!("tree {i} is disconnected"));
        }
        for &t in &s {
            if !verts.contains(&t) {
                return Err(format!("tree {i} misses terminal {t}"));
            }
        }
        vertex_sets.push(verts);
    }
    for i in 0..vertex_sets.len() {
        for j in i + 1..vertex_sets.len() {
            let inter: BTreeSet<usize> = vertex_sets[i]
                .intersection(&vertex_sets[j])
                .copied()
                .collect();
            if inter != s {
                return Err(format!(
                    "trees {i},{j} intersect in {inter:?}, expected the terminal set"
                ));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Copy unions.

/// A union of sibling copies inside one region of the recursion. `level`
/// is the level of the member the copies belong to, so the copies
/// themselves are level-(level-1) members.
#[derive(Clone)]
pub struct CopyUnion<'a> {
    pub inst: &'a FamilyInstance,
    pub level: usize,
    /// coordinate -> vertices, for the copies in this union
    pub copies: BTreeMap<usize, Vec<usize>>,
}

impl<'a> CopyUnion<'a> {
    pub fn new(
        inst: &'a FamilyInstance,
        level: usize,
        region: &[usize],
        coords: &[usize],
    ) -> Self {
        let want: BTreeSet<usize> = coords.iter().copied().collect();
        let mut copies: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &v in region {
            let c = inst.copy_coord_at(v, level);
            if want.contains(&c) {
                copies.entry(c).or_default().push(v);
            }
        }
        CopyUnion {
            inst,
            level,
            copies,
        }
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.inst.graph.vertex_count()];
        for verts in self.copies.values() {
            for &v in verts {
                m[v] = true;
            }
        }
        m
    }

    pub fn vertices(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.copies.values().flatten().copied().collect();
        out.sort_unstable();
        out
    }

    fn copy_mask(&self, coord: usize) -> Vec<bool> {
        let mut m = vec![false; self.inst.graph.vertex_count()];
        for &v in &self.copies[&coord] {
            m[v] = true;
        }
        m
    }

    fn coord_of(&self, v: usize) -> usize {
        self.inst.copy_coord_at(v, self.level)
    }

    /// Connectivity the recursion guarantees inside one copy.
    fn copy_kappa(&self) -> usize {
        self.inst.level_degree(self.level - 1)
    }
}

fn mask_of(n: usize, verts: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &v in verts {
        m[v] = true;
    }
    m
}

// ---------------------------------------------------------------------------
// Steiner connector: a small tree linking three vertices inside a mask.

fn bfs_dists(g: &Graph, mask: &[bool], from: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.vertex_count()];
    let mut queue = std::collections::VecDeque::new();
    dist[from] = 0;
    queue.push_back(from);
    while let Some(u) = queue.pop_front() {
        for &v in g.adj(u) {
            if mask[v] && dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

fn bfs_shortest_path(g: &Graph, mask: &[bool], from: usize, to: usize) -> Option<Vec<usize>> {
    g.bfs_path_to(from, mask, |v| v == to)
}

/// Tree connecting the three terminals inside the mask: best junction by
/// BFS distance sums, three shortest paths, pruned to a tree.
fn steiner_tree(g: &Graph, mask: &[bool], terms: [usize; 3]) -> Option<Vec<(usize, usize)>> {
    for &t in &terms {
        if !mask[t] {
            return None;
        }
    }
    let d: Vec<Vec<usize>> = terms.iter().map(|&t| bfs_dists(g, mask, t)).collect();
    let junction = (0..g.vertex_count())
        .filter(|&v| mask[v] && d.iter().all(|dd| dd[v] != usize::MAX))
        .min_by_key(|&v| (d.iter().map(|dd| dd[v]).sum::<usize>(), v))?;
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut verts: BTreeSet<usize> = BTreeSet::new();
    for &t in &terms {
        let path = bfs_shortest_path(g, mask, junction, t)?;
        for w in path.windows(2) {
            edges.insert((w[0].min(w[1]), w[0].max(w[1])));
        }
        for &v in &path {
            verts.insert(v);
        }
    }
    // spanning tree of the union, then prune non-terminal leaves
    let vlist: Vec<usize> = verts.iter().copied().collect();
    let vset: HashSet<usize> = verts.iter().copied().collect();
    let mut tree_edges: Vec<(usize, usize)> = Vec::new();
    let mut seen: HashSet<usize> = HashSet::new();
    let start = vlist[0];
    seen.insert(start);
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &v in g.adj(u) {
            if vset.contains(&v)
                && edges.contains(&(u.min(v), u.max(v)))
                && !seen.contains(&v)
            {
                seen.insert(v);
                tree_edges.push((u.min(v), u.max(v)));
                queue.push_back(v);
            }
        }
    }
    if seen.len() != vlist.len() {
        return None;
    }
    loop {
        let mut degree: HashMap<usize, usize> = HashMap::new();
        for &(u, v) in &tree_edges {
            *degree.entry(u).or_default() += 1;
            *degree.entry(v).or_default() += 1;
        }
        let before = tree_edges.len();
        tree_edges.retain(|&(u, v)| {
            let leaf_u = degree[&u] == 1 && !terms.contains(&u);
            let leaf_v = degree[&v] == 1 && !terms.contains(&v);
            !(leaf_u || leaf_v)
        });
        if tree_edges.len() == before {
            break;
        }
    }
    Some(tree_edges)
}

// ---------------------------------------------------------------------------
// Lemma-style path systems on copy unions.

type Plan<T> = Result<T, String>;

/// r+2(n-2) internally disjoint v1-v2 paths inside the union.
fn connect_impl(h: &CopyUnion, v1: usize, v2: usize) -> Plan<(Vec<Path>, String)> {
    let g = &h.inst.graph;
    let q = h.copy_kappa();
    let (c1, c2) = (h.coord_of(v1), h.coord_of(v2));
    if c1 == c2 {
        let (paths, _) = menger::idp_masked(g, &h.copy_mask(c1), v1, v2, q);
        if paths.len() == q {
            return Ok((paths, "lemma13:case1".into()));
        }
        return Err(format!("in-copy paths short: {} < {q}", paths.len()));
    }
    if h.inst.copies_adjacent(c1, c2) {
        if let Some(paths) = cross_pair_paths(h, v1, v2, q, false) {
            return Ok((paths, "lemma13:case2".into()));
        }
    }
    // direct flow on the whole union
    let (paths, _) = menger::idp_masked(g, &h.mask(), v1, v2, q);
    if paths.len() == q {
        return Ok((paths, "fallback:lemma13".into()));
    }
    Err(format!("union paths short: {} < {q}", paths.len()))
}

/// `count` internally disjoint v1-v2 paths, each inside copy(v1), one
/// crossing edge, then copy(v2): fan to crossing vertices on both sides.
fn cross_pair_paths(
    h: &CopyUnion,
    v1: usize,
    v2: usize,
    count: usize,
    exclude_direct: bool,
) -> Option<Vec<Path>> {
    let g = &h.inst.graph;
    let (c1, c2) = (h.coord_of(v1), h.coord_of(v2));
    let mut us = Vec::new();
    let mut images = Vec::new();
    for &u in &h.copies[&c1] {
        if u == v1 {
            continue;
        }
        let (p, q2) = h.inst.outside_pair_at(u, h.level);
        for cand in [p, q2] {
            if h.coord_of(cand) == c2 && cand != v2 {
                if exclude_direct && g.has_edge(cand, v2) {
                    continue;
                }
                us.push(u);
                images.push(cand);
                break;
            }
        }
        if us.len() == count {
            break;
        }
    }
    if us.len() < count {
        return None;
    }
    let (fan1, _) = menger::fan_masked(g, &h.copy_mask(c1), v1, &us, count);
    if fan1.len() < count {
        return None;
    }
    let (fan2, _) = menger::fan_masked(g, &h.copy_mask(c2), v2, &images, count);
    if fan2.len() < count {
        return None;
    }
    let by_end1: HashMap<usize, &Path> = fan1.iter().map(|p| (p.last(), p)).collect();
    let by_end2: HashMap<usize, &Path> = fan2.iter().map(|p| (p.last(), p)).collect();
    let mut out = Vec::new();
    for (u, img) in us.iter().zip(images.iter()) {
        let mut verts = by_end1[u].0.clone();
        let mut back = by_end2[img].0.clone();
        back.reverse();
        verts.extend(back);
        out.push(Path(verts));
    }
    Some(out)
}

// ---------------------------------------------------------------------------
// The fan planner (the k-fan in a union of copies, routed copy by copy).

pub struct FanPlan {
    /// target -> full path from the root to that target
    pub paths: BTreeMap<usize, Vec<usize>>,
    pub label: String,
}

#[derive(Clone)]
struct Token {
    route: Vec<usize>,
    path: Vec<usize>,
    done: bool,
}

fn fan_impl(h: &CopyUnion, x: usize, targets: &[usize]) -> Plan<FanPlan> {
    let inst = h.inst;
    let g = &inst.graph;
    let q = h.copy_kappa();
    let k = targets.len();
    let cx = h.coord_of(x);
    if !h.copies.contains_key(&cx) {
        return Err("fan root outside the union".into());
    }
    {
        let tset: BTreeSet<usize> = targets.iter().copied().collect();
        if tset.len() != k || tset.contains(&x) {
            return Err("fan targets must be distinct and avoid the root".into());
        }
        for &t in targets {
            if !h.copies.contains_key(&h.coord_of(t)) {
                return Err("fan target outside the union".into());
            }
        }
    }

    if k <= q {
        let (paths, _) = menger::fan_masked(g, &h.mask(), x, targets, k);
        if paths.len() == k {
            let map = paths.into_iter().map(|p| (p.last(), p.0)).collect();
            return Ok(FanPlan {
                paths: map,
                label: "lemma14:case1".into(),
            });
        }
        return Err("direct fan short".into());
    }
    let s = k - q;
    if s > 2 {
        return Err(format!("fan size {k} exceeds q+2 = {}", q + 2));
    }

    // per-copy demand
    let mut need: BTreeMap<usize, usize> = h.copies.keys().map(|&c| (c, 0)).collect();
    for &t in targets {
        *need.get_mut(&h.coord_of(t)).unwrap() += 1;
    }
    let a_home = need[&cx];
    if a_home > q {
        return Err(format!("targets in the root copy exceed the cap {q}"));
    }
    for (&c, &n) in &need {
        if c != cx && n > q + s {
            return Err(format!("targets in copy {c} exceed the cap {}", q + s));
        }
    }
    let mut residual = need.clone();
    residual.remove(&cx);

    // outside neighbours of the root available inside the union
    let pair = inst.outside_pair_at(x, h.level);
    let outs: Vec<usize> = [pair.0, pair.1]
        .into_iter()
        .filter(|&o| h.copies.contains_key(&h.coord_of(o)))
        .collect();
    if outs.len() < s {
        return Err("not enough root outside neighbours inside the union".into());
    }
    let used_outs = &outs[..s];

    let complete = inst.copy_graph_complete();
    let mut tokens: Vec<Token> = Vec::new();
    let mut relay_count = 0usize;

    // arm decomposition for path-shaped copy graphs
    let arms: Option<Vec<Vec<usize>>> = if complete {
        None
    } else {
        Some(path_arms(inst, &h.copies, cx)?)
    };

    if complete {
        for &o in used_outs {
            let co = h.coord_of(o);
            if residual.get(&co).copied().unwrap_or(0) > 0 {
                *residual.get_mut(&co).unwrap() -= 1;
                tokens.push(Token {
                    route: vec![co],
                    path: vec![x, o],
                    done: false,
                });
            } else {
                let dest = residual
                    .iter()
                    .find(|&(&c, &n)| n > 0 && c != co)
                    .map(|(&c, _)| c)
                    .ok_or("outside neighbour has no destination to serve")?;
                *residual.get_mut(&dest).unwrap() -= 1;
                relay_count += 1;
                tokens.push(Token {
                    route: vec![co, dest],
                    path: vec![x, o],
                    done: false,
                });
            }
        }
        // proxies serve the remaining demand directly
        for (&c, &n) in residual.iter() {
            for _ in 0..n {
                tokens.push(Token {
                    route: vec![c],
                    path: Vec::new(),
                    done: false,
                });
            }
        }
    } else {
        let arms = arms.as_ref().unwrap();
        for arm in arms {
            let arm_need: usize = arm.iter().map(|c| residual[c]).sum();
            let o_here: Vec<usize> = used_outs
                .iter()
                .copied()
                .filter(|&o| h.coord_of(o) == arm[0])
                .collect();
            if o_here.len() > arm_need {
                return Err("root outside neighbour points into a satisfied arm".into());
            }
            // routes: serve copies outward; outside tokens first
            let mut dests = Vec::new();
            for &c in arm {
                for _ in 0..residual[&c] {
                    dests.push(c);
                }
            }
            let mut di = 0;
            for &o in &o_here {
                let dest = dests[di];
                di += 1;
                let pos = arm.iter().position(|&c| c == dest).unwrap();
                if pos > 0 {
                    relay_count += 1;
                }
                tokens.push(Token {
                    route: arm[..=pos].to_vec(),
                    path: vec![x, o],
                    done: false,
                });
            }
            while di < dests.len() {
                let dest = dests[di];
                di += 1;
                let pos = arm.iter().position(|&c| c == dest).unwrap();
                tokens.push(Token {
                    route: arm[..=pos].to_vec(),
                    path: Vec::new(),
                    done: false,
                });
            }
        }
    }

    // proxy candidates in the root copy: vertices whose outside neighbour
    // lies inside the union
    let target_set: HashSet<usize> = targets.iter().copied().collect();
    let mut candidates: Vec<(usize, Vec<usize>)> = Vec::new(); // (vertex, reachable first-hop coords)
    for &v in &h.copies[&cx] {
        if v == x || target_set.contains(&v) {
            continue;
        }
        let (p1, p2) = inst.outside_pair_at(v, h.level);
        let mut coords = Vec::new();
        for cand in [p1, p2] {
            let cc = inst.copy_coord_at(cand, h.level);
            if h.copies.contains_key(&cc) {
                coords.push(cc);
            }
        }
        if !coords.is_empty() {
            candidates.push((v, coords));
        }
    }

    // a greedy proxy choice can box in a later routing step, so retry with
    // rotated candidate preference before giving up
    let mut last_err = String::from("no proxy candidates in the root copy");
    for shift in 0..candidates.len().max(1) {
        let mut cands = candidates.clone();
        cands.rotate_left(shift);
        match fan_route(
            h,
            x,
            targets,
            q,
            s,
            cx,
            complete,
            arms.as_ref(),
            tokens.clone(),
            &cands,
            relay_count,
        ) {
            Ok(plan) => return Ok(plan),
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

/// One routing attempt for a planned fan, with a fixed proxy preference
/// order.
#[allow(clippy::too_many_arguments)]
fn fan_route(
    h: &CopyUnion,
    x: usize,
    targets: &[usize],
    q: usize,
    s: usize,
    cx: usize,
    complete: bool,
    arms: Option<&Vec<Vec<usize>>>,
    mut tokens: Vec<Token>,
    candidates: &[(usize, Vec<usize>)],
    relay_count: usize,
) -> Plan<FanPlan> {
    let inst = h.inst;
    let g = &inst.graph;
    let k = targets.len();
    let proxy_slots: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.path.is_empty())
        .map(|(i, _)| i)
        .collect();
    // augmenting-path bipartite matching: slot -> candidate index
    let mut slot_of_cand: Vec<Option<usize>> = vec![None; candidates.len()];
    let mut cand_of_slot: Vec<Option<usize>> = vec![None; proxy_slots.len()];
    for (si, &ti) in proxy_slots.iter().enumerate() {
        let want = tokens[ti].route[0];
        let mut visited = vec![false; candidates.len()];
        if !match_slot(
            si,
            want,
            &candidates,
            &tokens,
            &proxy_slots,
            &mut slot_of_cand,
            &mut cand_of_slot,
            &mut visited,
        ) {
            return Err("proxy selection infeasible in the root copy".into());
        }
    }
    for (si, &ti) in proxy_slots.iter().enumerate() {
        let ci = cand_of_slot[si].unwrap();
        let v = candidates[ci].0;
        tokens[ti].path = vec![x, v]; // placeholder; replaced by the fan path
    }

    // in-copy fan from x to home targets plus proxies
    let home_targets: Vec<usize> = targets
        .iter()
        .copied()
        .filter(|&t| h.coord_of(t) == cx)
        .collect();
    let mut fan_targets = home_targets.clone();
    let proxy_vertices: Vec<usize> = proxy_slots
        .iter()
        .map(|&ti| *tokens[ti].path.last().unwrap())
        .collect();
    fan_targets.extend(proxy_vertices.iter().copied());
    if fan_targets.len() != q {
        return Err(format!(
            "in-copy fan size {} differs from q = {q}",
            fan_targets.len()
        ));
    }
    let (home_fan, _) = menger::fan_masked(g, &h.copy_mask(cx), x, &fan_targets, q);
    if home_fan.len() < q {
        return Err("in-copy fan short".into());
    }
    let fan_by_end: HashMap<usize, Vec<usize>> =
        home_fan.iter().map(|p| (p.last(), p.0.clone())).collect();

    let mut result: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &t in &home_targets {
        result.insert(t, fan_by_end[&t].clone());
    }
    // replace proxy placeholders by the real fan paths, extend across
    let mut entry_by_copy: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (si, &ti) in proxy_slots.iter().enumerate() {
        let ci = cand_of_slot[si].unwrap();
        let v = candidates[ci].0;
        let (p1, p2) = inst.outside_pair_at(v, h.level);
        let want = tokens[ti].route[0];
        let img = if inst.copy_coord_at(p1, h.level) == want {
            p1
        } else {
            p2
        };
        let mut path = fan_by_end[&v].clone();
        path.push(img);
        tokens[ti].path = path;
        entry_by_copy.entry(want).or_default().push(img);
    }
    for tok in tokens.iter() {
        if tok.path.len() == 2 {
            // outside token: entry is the neighbour itself
            entry_by_copy
                .entry(tok.route[0])
                .or_default()
                .push(tok.path[1]);
        }
    }

    // process copies in dependency order
    let order: Vec<usize> = if complete {
        let mut relays: Vec<usize> = tokens
            .iter()
            .filter(|t| t.route.len() == 2)
            .map(|t| t.route[0])
            .collect();
        relays.sort_unstable();
        relays.dedup();
        let mut rest: Vec<usize> = h
            .copies
            .keys()
            .copied()
            .filter(|c| *c != cx && !relays.contains(c))
            .collect();
        rest.sort_unstable();
        relays.into_iter().chain(rest).collect()
    } else {
        arms.as_ref().unwrap().iter().flatten().copied().collect()
    };

    for &c in &order {
        // tokens currently standing at an entry of copy c
        let mut idxs: Vec<usize> = Vec::new();
        for (i, tok) in tokens.iter().enumerate() {
            if tok.done {
                continue;
            }
            let here = inst.copy_coord_at(*tok.path.last().unwrap(), h.level);
            if here == c {
                idxs.push(i);
            }
        }
        if idxs.is_empty() {
            continue;
        }
        let sources: Vec<usize> = idxs.iter().map(|&i| *tokens[i].path.last().unwrap()).collect();
        let serve_targets: Vec<usize> = targets
            .iter()
            .copied()
            .filter(|&t| h.coord_of(t) == c)
            .collect();
        // exit demand per next copy
        let mut exit_demand: BTreeMap<usize, usize> = BTreeMap::new();
        for &i in &idxs {
            let tok = &tokens[i];
            let pos = tok.route.iter().position(|&rc| rc == c).unwrap();
            if pos + 1 < tok.route.len() {
                *exit_demand.entry(tok.route[pos + 1]).or_default() += 1;
            }
        }
        let mut groups: Vec<ExitGroup> = Vec::new();
        let group_dests: Vec<usize> = exit_demand.keys().copied().collect();
        for (&d, &cnt) in &exit_demand {
            let reserved: HashSet<usize> = entry_by_copy
                .get(&d)
                .map(|v| v.iter().copied().collect())
                .unwrap_or_default();
            let mut cands = Vec::new();
            for &w in &h.copies[&c] {
                // an entry vertex may pass straight through and exit at
                // itself, so sources stay eligible
                if serve_targets.contains(&w) {
                    continue;
                }
                let (p1, p2) = inst.outside_pair_at(w, h.level);
                let img = if inst.copy_coord_at(p1, h.level) == d {
                    Some(p1)
                } else if inst.copy_coord_at(p2, h.level) == d {
                    Some(p2)
                } else {
                    None
                };
                if let Some(img) = img {
                    if !reserved.contains(&img) {
                        cands.push(w);
                    }
                }
            }
            groups.push(ExitGroup {
                candidates: cands,
                count: cnt,
            });
        }
        let (serve_paths, exit_paths) =
            menger::grouped_paths(g, &h.copy_mask(c), &sources, &serve_targets, &groups)
                .ok_or_else(|| format!("routing through copy {c} infeasible"))?;
        // map serve paths back to tokens by their entry vertex
        let mut by_start: HashMap<usize, usize> = sources
            .iter()
            .enumerate()
            .map(|(j, &v)| (v, idxs[j]))
            .collect();
        for p in &serve_paths {
            let ti = by_start
                .remove(&p.first())
                .ok_or("serve path with unknown entry")?;
            let tok = &mut tokens[ti];
            tok.path.extend(p.0[1..].iter().copied());
            tok.done = true;
            result.insert(p.last(), tok.path.clone());
        }
        for (gi, paths) in exit_paths.iter().enumerate() {
            let d = group_dests[gi];
            for p in paths {
                let ti = by_start
                    .remove(&p.first())
                    .ok_or("exit path with unknown entry")?;
                let w = p.last();
                let (p1, p2) = inst.outside_pair_at(w, h.level);
                let img = if inst.copy_coord_at(p1, h.level) == d {
                    p1
                } else {
                    p2
                };
                let tok = &mut tokens[ti];
                tok.path.extend(p.0[1..].iter().copied());
                tok.path.push(img);
                entry_by_copy.entry(d).or_default().push(img);
                // retarget the token's route so the next hop sees it
                let pos = tok.route.iter().position(|&rc| rc == c).unwrap();
                debug_assert!(pos + 1 < tok.route.len() && tok.route[pos + 1] == d);
            }
        }
        if !by_start.is_empty() {
            return Err(format!("unrouted entries remain in copy {c}"));
        }
    }

    if result.len() != k {
        return Err(format!("fan assembled {} of {k} paths", result.len()));
    }
    // validate independently
    let fam = PathFamily {
        paths: result.values().map(|p| Path(p.clone())).collect(),
        regime: Regime::Fan {
            x,
            y: VertexSet::new(targets.to_vec()),
        },
    };
    menger::validate_family(g, &fam).map_err(|e| format!("planned fan invalid: {e}"))?;

    let label = match (s, relay_count) {
        (1, 0) => "lemma14:case3".to_string(),
        (1, _) => "lemma14:case3-relay".to_string(),
        (_, 0) => "lemma14:case2.1".to_string(),
        (_, 1) => "lemma14:case2.2".to_string(),
        (_, _) => "lemma14:case2.2.3".to_string(),
    };
    Ok(FanPlan {
        paths: result,
        label,
    })
}

#[allow(clippy::too_many_arguments)]
fn match_slot(
    si: usize,
    want: usize,
    candidates: &[(usize, Vec<usize>)],
    tokens: &[Token],
    proxy_slots: &[usize],
    slot_of_cand: &mut Vec<Option<usize>>,
    cand_of_slot: &mut Vec<Option<usize>>,
    visited: &mut Vec<bool>,
) -> bool {
    for (ci, (_, coords)) in candidates.iter().enumerate() {
        if visited[ci] || !coords.contains(&want) {
            continue;
        }
        visited[ci] = true;
        let free = match slot_of_cand[ci] {
            None => true,
            Some(other) => {
                let other_want = tokens[proxy_slots[other]].route[0];
                match_slot(
                    other,
                    other_want,
                    candidates,
                    tokens,
                    proxy_slots,
                    slot_of_cand,
                    cand_of_slot,
                    visited,
                )
            }
        };
        if free {
            slot_of_cand[ci] = Some(si);
            cand_of_slot[si] = Some(ci);
            return true;
        }
    }
    false
}

/// The copies of a union whose copy graph is a path (k-ary cubes with the
/// root somewhere on it), decomposed into arms leading away from the root
/// copy, each ordered from the root outward.
fn path_arms(
    inst: &FamilyInstance,
    copies: &BTreeMap<usize, Vec<usize>>,
    cx: usize,
) -> Plan<Vec<Vec<usize>>> {
    let coords: Vec<usize> = copies.keys().copied().collect();
    let mut arms = Vec::new();
    for dir in [1usize, inst.k - 1] {
        let mut arm = Vec::new();
        let mut cur = (cx + dir) % inst.k;
        while coords.contains(&cur) && cur != cx {
            arm.push(cur);
            cur = (cur + dir) % inst.k;
        }
        if !arm.is_empty() {
            arms.push(arm);
        }
    }
    let covered: usize = arms.iter().map(Vec::len).sum();
    if covered + 1 < coords.len() {
        return Err("union copies do not form a path around the root".into());
    }
    // both directions may wrap onto the same copies when the union is the
    // whole cycle minus nothing; trim overlap
    if covered + 1 > coords.len() {
        // keep the first arm, shorten the second
        let seen: HashSet<usize> = arms[0].iter().copied().collect();
        let second = arms[1]
            .iter()
            .copied()
            .take_while(|c| !seen.contains(c))
            .collect::<Vec<_>>();
        arms[1] = second;
        arms.retain(|a| !a.is_empty());
    }
    Ok(arms)
}

// ---------------------------------------------------------------------------
// Public copy-union operations.

pub fn connect_in_copy_union(h: &CopyUnion, v1: usize, v2: usize) -> Result<PathFamily, Error> {
    if v1 == v2 {
        return Err(Error::input("endpoints must differ"));
    }
    if h.copies.len() < 2 {
        return Err(Error::input("union must contain at least two copies"));
    }
    let (paths, _label) = connect_impl(h, v1, v2).map_err(Error::structural)?;
    Ok(PathFamily {
        paths,
        regime: Regime::InternallyDisjoint { u: v1, v: v2 },
    })
}

pub fn fan_in_union(h: &CopyUnion, x: usize, ys: &VertexSet) -> Result<PathFamily, Error> {
    let targets: Vec<usize> = ys.iter().collect();
    let plan = fan_impl(h, x, &targets).map_err(|e| {
        if e.contains("cap") || e.contains("distinct") {
            Error::input(e)
        } else {
            Error::structural(e)
        }
    })?;
    Ok(PathFamily {
        paths: plan.paths.into_values().map(Path).collect(),
        regime: Regime::Fan { x, y: ys.clone() },
    })
}

pub fn paths_two_copies(h: &CopyUnion, x: usize, y: usize) -> Result<PathFamily, Error> {
    if h.copies.len() != 2 {
        return Err(Error::input("expected a union of exactly two copies"));
    }
    let (paths, _label) = two_copy_paths_impl(h, x, y).map_err(Error::structural)?;
    Ok(PathFamily {
        paths,
        regime: Regime::InternallyDisjoint { u: x, v: y },
    })
}

/// r+2n-3 internally disjoint x-y paths across a two-copy union where one
/// outside neighbour of each endpoint lies in the other copy.
fn two_copy_paths_impl(h: &CopyUnion, x: usize, y: usize) -> Plan<(Vec<Path>, String)> {
    let g = &h.inst.graph;
    let q = h.copy_kappa();
    let t = q + 1;
    let (cx, cy) = (h.coord_of(x), h.coord_of(y));
    if cx == cy {
        return Err("endpoints share a copy".into());
    }
    let dx = g.adj(x).iter().filter(|&&w| h.mask()[w]).count();
    let dy = g.adj(y).iter().filter(|&&w| h.mask()[w]).count();
    if dx != t || dy != t {
        return Err(format!("degree precondition fails: d(x)={dx} d(y)={dy}, need {t}"));
    }
    if g.has_edge(x, y) {
        // the direct edge plus q fully crossing paths avoiding it
        if let Some(mut paths) = cross_pair_paths(h, x, y, q, false) {
            paths.push(Path(vec![x, y]));
            let fam = PathFamily {
                paths: paths.clone(),
                regime: Regime::InternallyDisjoint { u: x, v: y },
            };
            if menger::validate_family(g, &fam).is_ok() {
                return Ok((paths, "lemma15:case2".into()));
            }
        }
    } else {
        let mask = h.mask();
        let nbrs: Vec<usize> = g
            .adj(y)
            .iter()
            .copied()
            .filter(|&w| mask[w])
            .collect();
        if let Ok(plan) = fan_impl(h, x, &nbrs) {
            let mut paths = Vec::new();
            let mut through_y: Option<Vec<usize>> = None;
            for (tgt, p) in plan.paths {
                if let Some(pos) = p.iter().position(|&v| v == y) {
                    if pos + 1 != p.len() {
                        // passes through y internally; keep the prefix
                        through_y = Some(p[..=pos].to_vec());
                        continue;
                    }
                }
                let mut full = p.clone();
                if tgt != y {
                    full.push(y);
                }
                paths.push(Path(full));
            }
            if let Some(pref) = through_y {
                paths.push(Path(pref));
            }
            let fam = PathFamily {
                paths: paths.clone(),
                regime: Regime::InternallyDisjoint { u: x, v: y },
            };
            if paths.len() == t && menger::validate_family(g, &fam).is_ok() {
                return Ok((paths, format!("lemma15:case1+{}", plan.label)));
            }
        }
    }
    let (paths, _) = menger::idp_masked(g, &h.mask(), x, y, t);
    if paths.len() == t {
        return Ok((paths, "fallback:lemma15".into()));
    }
    Err(format!("two-copy paths short: {}", paths.len()))
}

// ---------------------------------------------------------------------------
// The main recursion.

type Tree = (Vec<(usize, usize)>, TreeProvenance);

fn path_edges(p: &[usize]) -> Vec<(usize, usize)> {
    p.windows(2).map(|w| (w[0].min(w[1]), w[0].max(w[1]))).collect()
}

fn prov(rule: impl Into<String>, depth: usize) -> TreeProvenance {
    TreeProvenance {
        rule: rule.into(),
        depth,
    }
}

/// BFS from `from` through `interior` vertices until a neighbour satisfies
/// `hit`; returns the walk ending at that neighbour. `from` itself must not
/// satisfy `hit`.
fn first_hit(
    g: &Graph,
    interior: &[bool],
    hit: impl Fn(usize) -> bool,
    from: usize,
) -> Option<Vec<usize>> {
    let n = g.vertex_count();
    let mut prev = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    seen[from] = true;
    queue.push_back(from);
    while let Some(u) = queue.pop_front() {
        for &v in g.adj(u) {
            if hit(v) {
                let mut path = vec![v, u];
                let mut cur = u;
                while prev[cur] != usize::MAX {
                    cur = prev[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            if !seen[v] && interior[v] {
                seen[v] = true;
                prev[v] = u;
                queue.push_back(v);
            }
        }
    }
    None
}

/// Consume one of `paths` to build a tree reaching `f` through its
/// neighbour `o`: either `o` already lies on a path, or a detour from `o`
/// through untouched vertices reaches one. Returns (consumed index, tree).
fn consume_tree(
    g: &Graph,
    paths: &[Path],
    alive: &[bool],
    interior: &[bool],
    o: usize,
    f: usize,
) -> Option<(usize, Vec<(usize, usize)>)> {
    let on_alive = |v: usize| {
        paths
            .iter()
            .enumerate()
            .any(|(i, p)| alive[i] && p.0.contains(&v))
    };
    let find_idx = |v: usize| {
        paths
            .iter()
            .enumerate()
            .find(|(i, p)| alive[*i] && p.0.contains(&v))
            .map(|(i, _)| i)
    };
    if on_alive(o) {
        let j = find_idx(o)?;
        let mut edges = path_edges(&paths[j].0);
        edges.push((o.min(f), o.max(f)));
        return Some((j, edges));
    }
    if !interior[o] {
        return None;
    }
    let walk = first_hit(g, interior, on_alive, o)?;
    let w = *walk.last().unwrap();
    let j = find_idx(w)?;
    let mut edges = path_edges(&paths[j].0);
    edges.extend(path_edges(&walk));
    edges.push((o.min(f), o.max(f)));
    Some((j, edges))
}

/// Like `consume_tree`, but aimed at one specific path index.
fn consume_one(
    g: &Graph,
    paths: &[Path],
    interior: &[bool],
    o: usize,
    f: usize,
    j: usize,
) -> Option<Vec<(usize, usize)>> {
    if paths[j].0.contains(&o) {
        let mut edges = path_edges(&paths[j].0);
        edges.push((o.min(f), o.max(f)));
        return Some(edges);
    }
    if !interior[o] {
        return None;
    }
    let walk = first_hit(g, interior, |v| paths[j].0.contains(&v), o)?;
    let mut edges = path_edges(&paths[j].0);
    edges.extend(path_edges(&walk));
    edges.push((o.min(f), o.max(f)));
    Some(edges)
}

/// Consume one path per crossing neighbour in `os`, backtracking over the
/// choice of path so an earlier pick cannot strand a later neighbour.
fn consume_many(
    g: &Graph,
    paths: &[Path],
    alive: &[bool],
    interior: &[bool],
    os: &[usize],
    f: usize,
) -> Option<Vec<(usize, Vec<(usize, usize)>)>> {
    let Some((&o, rest)) = os.split_first() else {
        return Some(Vec::new());
    };
    for j in 0..paths.len() {
        if !alive[j] {
            continue;
        }
        let Some(tree) = consume_one(g, paths, interior, o, f, j) else {
            continue;
        };
        let mut alive2 = alive.to_vec();
        alive2[j] = false;
        let mut interior2 = interior.to_vec();
        for &(u, v) in &tree {
            interior2[u] = false;
            interior2[v] = false;
        }
        if let Some(mut tail) = consume_many(g, paths, &alive2, &interior2, rest, f) {
            tail.insert(0, (j, tree));
            return Some(tail);
        }
    }
    None
}

/// Greedy image choice for attach vertices: each item vertex offers its
/// outside neighbours (minus `avoid`), loads are capped at `cap` per copy.
struct ImagePicker<'a> {
    inst: &'a FamilyInstance,
    level: usize,
    cap: usize,
    load: BTreeMap<usize, usize>,
    taken: HashSet<usize>, // images already used (vertex granularity)
}

impl<'a> ImagePicker<'a> {
    fn new(inst: &'a FamilyInstance, level: usize, cap: usize) -> Self {
        ImagePicker {
            inst,
            level,
            cap,
            load: BTreeMap::new(),
            taken: HashSet::new(),
        }
    }

    /// Pick an image for `y` among its outside neighbours, skipping
    /// `avoid`, preferring lighter copies. Returns None when every option
    /// is at capacity or unavailable.
    fn pick(&mut self, y: usize, avoid: &[usize]) -> Option<usize> {
        let (p1, p2) = self.inst.outside_pair_at(y, self.level);
        let mut best: Option<(usize, usize)> = None; // (load, image)
        for cand in [p1, p2] {
            if avoid.contains(&cand) || self.taken.contains(&cand) {
                continue;
            }
            let c = self.inst.copy_coord_at(cand, self.level);
            let l = self.load.get(&c).copied().unwrap_or(0);
            if l >= self.cap {
                continue;
            }
            if best.map(|(bl, bi)| (l, cand) < (bl, bi)).unwrap_or(true) {
                best = Some((l, cand));
            }
        }
        let (_, img) = best?;
        let c = self.inst.copy_coord_at(img, self.level);
        *self.load.entry(c).or_default() += 1;
        self.taken.insert(img);
        Some(img)
    }
}

fn fan_with_fallback(
    h: &CopyUnion,
    x: usize,
    targets: &[usize],
) -> Plan<(BTreeMap<usize, Vec<usize>>, String)> {
    match fan_impl(h, x, targets) {
        Ok(plan) => Ok((plan.paths, plan.label)),
        Err(planner_err) => {
            if std::env::var_os("GENCONN_DEBUG_PACKING").is_some() {
                eprintln!("fan planner miss at level {} from {x} to {targets:?}: {planner_err}", h.level);
            }
            let g = &h.inst.graph;
            let (paths, _) = menger::fan_masked(g, &h.mask(), x, targets, targets.len());
            if paths.len() == targets.len() {
                let map = paths.into_iter().map(|p| (p.last(), p.0)).collect();
                Ok((map, "fallback:fan".into()))
            } else {
                Err(format!("fan infeasible ({planner_err}) and direct flow short"))
            }
        }
    }
}

fn pack_region(
    inst: &FamilyInstance,
    level: usize,
    region: &[usize],
    s: [usize; 3],
    depth: usize,
) -> Result<Vec<Tree>, Error> {
    let t_target = inst.target_trees_at(level);
    if level == 1 {
        return base_case(inst, region, s, t_target, depth);
    }
    let coords: Vec<usize> = s.iter().map(|&v| inst.copy_coord_at(v, level)).collect();
    let distinct: BTreeSet<usize> = coords.iter().copied().collect();
    let attempt = match distinct.len() {
        1 => case_same_copy(inst, level, region, s, depth),
        2 => case_two_copies(inst, level, region, s, depth),
        _ => case_three_copies(inst, level, region, s, depth),
    };
    let outcome = attempt.and_then(|trees| {
        // guard the recursion: a collision in any assembled stage must
        // trigger the fallback, not propagate upward
        let probe = TreePacking {
            s,
            trees: trees.iter().map(|(e, _)| e.clone()).collect(),
            trace: trees.iter().map(|(_, p)| p.clone()).collect(),
        };
        match verify_packing(&inst.graph, &probe) {
            Ok(()) => Ok(trees),
            Err(e) => Err(Error::structural(format!("assembled trees invalid: {e}"))),
        }
    });
    match outcome {
        Ok(trees) => Ok(trees),
        Err(reason) => {
            if std::env::var_os("GENCONN_DEBUG_PACKING").is_some() {
                eprintln!("construction fallback at level {level} for S={s:?}: {reason}");
            }
            fallback_region(inst, region, s, t_target, depth, &reason.to_string())
        }
    }
}

fn base_case(
    inst: &FamilyInstance,
    region: &[usize],
    s: [usize; 3],
    t_target: usize,
    depth: usize,
) -> Result<Vec<Tree>, Error> {
    let vs = VertexSet::new(region.to_vec());
    let (sub, map) = inst.graph.induced_subgraph(&vs)?;
    let back: Vec<usize> = {
        let mut b = vec![0; map.len()];
        for (&old, &new) in &map {
            b[new] = old;
        }
        b
    };
    let s_new = VertexSet::new(s.iter().map(|&v| map[&v]).collect());
    let packing = oracle::set_packing_with_target(&sub, &s_new, t_target)?;
    if packing.count < t_target {
        return Err(Error::structural(format!(
            "base member admits only {} trees, expected {t_target}",
            packing.count
        )));
    }
    Ok(packing
        .trees
        .into_iter()
        .take(t_target)
        .map(|edges| {
            let mapped: Vec<(usize, usize)> = edges
                .iter()
                .map(|&(u, v)| {
                    let (a, b) = (back[u], back[v]);
                    (a.min(b), a.max(b))
                })
                .collect();
            (mapped, prov("base", depth))
        })
        .collect())
}

fn fallback_region(
    inst: &FamilyInstance,
    region: &[usize],
    s: [usize; 3],
    t_target: usize,
    depth: usize,
    reason: &str,
) -> Result<Vec<Tree>, Error> {
    if region.len() > FALLBACK_ORACLE_CAP {
        return Err(Error::structural(format!(
            "construction failed ({reason}) and region of {} vertices exceeds the oracle fallback cap",
            region.len()
        )));
    }
    let trees = base_case(inst, region, s, t_target, depth)?;
    Ok(trees
        .into_iter()
        .map(|(e, _)| (e, prov("fallback:oracle", depth)))
        .collect())
}

fn copies_of_region(
    inst: &FamilyInstance,
    level: usize,
    region: &[usize],
) -> BTreeMap<usize, Vec<usize>> {
    let mut m: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &v in region {
        m.entry(inst.copy_coord_at(v, level)).or_default().push(v);
    }
    m
}

// --- all three terminals in one copy -------------------------------------

fn case_same_copy(
    inst: &FamilyInstance,
    level: usize,
    region: &[usize],
    s: [usize; 3],
    depth: usize,
) -> Result<Vec<Tree>, Error> {
    let ch = inst.copy_coord_at(s[0], level);
    let copies = copies_of_region(inst, level, region);
    let home = copies[&ch].clone();
    let mut trees = pack_region(inst, level - 1, &home, s, depth + 1)?;
    let lifted = lift_impl(inst, level, region, s, depth).map_err(Error::structural)?;
    trees.extend(lifted);
    Ok(trees)
}

/// The two extra trees through the outside neighbours of the terminals:
/// split the six outside neighbours into two groups, connect each group by
/// a small tree in a connected union of non-home copies, and attach the
/// terminals by their crossing edges.
fn lift_impl(
    inst: &FamilyInstance,
    level: usize,
    region: &[usize],
    s: [usize; 3],
    depth: usize,
) -> Plan<Vec<Tree>> {
    let g = &inst.graph;
    let ch = inst.copy_coord_at(s[0], level);
    let copies = copies_of_region(inst, level, region);
    let pairs: Vec<(usize, usize)> = s
        .iter()
        .map(|&v| inst.outside_pair_at(v, level))
        .collect();
    {
        let mut all: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        all.sort_unstable();
        all.dedup();
        if all.len() != 6 {
            return Err("outside neighbours of the terminals are not distinct".into());
        }
    }
    let coord_of = |v: usize| inst.copy_coord_at(v, level);
    let others: Vec<usize> = copies.keys().copied().filter(|&c| c != ch).collect();
    let complete = inst.copy_graph_complete();
    // distribution label
    let label = {
        let mut cnt: BTreeMap<usize, usize> = BTreeMap::new();
        for &(a, b) in &pairs {
            *cnt.entry(coord_of(a)).or_default() += 1;
            *cnt.entry(coord_of(b)).or_default() += 1;
        }
        match cnt.values().max().copied().unwrap_or(0) {
            0..=1 => "lemma16:case3",
            2 => "lemma16:case2",
            _ => "lemma16:case1",
        }
    };

    let try_assignment = |ga: &[usize], gb: &[usize], aside: [usize; 3], bside: [usize; 3]| -> Option<(Vec<(usize, usize)>, Vec<(usize, usize)>)> {
        let ua = CopyUnion::new(inst, level, region, ga);
        let ub = CopyUnion::new(inst, level, region, gb);
        let ta = steiner_tree(g, &ua.mask(), aside)?;
        let tb = steiner_tree(g, &ub.mask(), bside)?;
        // the two trees must not collide
        let va: HashSet<usize> = ta.iter().flat_map(|&(u, v)| [u, v]).collect();
        if tb.iter().any(|&(u, v)| va.contains(&u) || va.contains(&v)) {
            return None;
        }
        Some((ta, tb))
    };

    for mask in 0u8..8 {
        let mut aside = [0usize; 3];
        let mut bside = [0usize; 3];
        for i in 0..3 {
            let (p, q) = pairs[i];
            if mask & (1 << i) == 0 {
                aside[i] = p;
                bside[i] = q;
            } else {
                aside[i] = q;
                bside[i] = p;
            }
        }
        let ca: BTreeSet<usize> = aside.iter().map(|&v| coord_of(v)).collect();
        let cb: BTreeSet<usize> = bside.iter().map(|&v| coord_of(v)).collect();
        if ca.intersection(&cb).next().is_some() {
            continue;
        }
        let (ga, gb): (Vec<usize>, Vec<usize>) = if complete {
            let ga: Vec<usize> = ca.iter().copied().collect();
            let gb: Vec<usize> = others.iter().copied().filter(|c| !ca.contains(c)).collect();
            (ga, gb)
        } else {
            // path-shaped copy graph: the copies other than home form a
            // path; both groups must occupy disjoint sub-paths
            let path = match path_copies_order(inst, &others, ch) {
                Some(p) => p,
                None => continue,
            };
            let pos = |c: usize| path.iter().position(|&d| d == c);
            let pa: Vec<usize> = match ca.iter().map(|&c| pos(c)).collect::<Option<Vec<_>>>() {
                Some(v) => v,
                None => continue,
            };
            let pb: Vec<usize> = match cb.iter().map(|&c| pos(c)).collect::<Option<Vec<_>>>() {
                Some(v) => v,
                None => continue,
            };
            let (amax, bmin) = (*pa.iter().max().unwrap(), *pb.iter().min().unwrap());
            let (bmax, amin) = (*pb.iter().max().unwrap(), *pa.iter().min().unwrap());
            if amax < bmin {
                (path[..=amax].to_vec(), path[amax + 1..].to_vec())
            } else if bmax < amin {
                (path[bmax + 1..].to_vec(), path[..=bmax].to_vec())
            } else {
                continue;
            }
        };
        if ga.is_empty() || gb.is_empty() {
            continue;
        }
        if let Some((ta, tb)) = try_assignment(&ga, &gb, aside, bside) {
            let mut ea = ta;
            let mut eb = tb;
            for i in 0..3 {
                ea.push((s[i].min(aside[i]), s[i].max(aside[i])));
                eb.push((s[i].min(bside[i]), s[i].max(bside[i])));
            }
            return Ok(vec![
                (ea, prov(label, depth)),
                (eb, prov(label, depth)),
            ]);
        }
    }

    // relay strategy: one conflicting copy, reroute one terminal's branch
    // through a second crossing edge out of the conflict copy
    if complete {
        if let Some(trees) = lift_relay(inst, level, region, s, &pairs, ch, depth) {
            return Ok(trees);
        }
    }

    // last resort: greedy sequential trees over all non-home copies
    for mask in 0u8..8 {
        let mut aside = [0usize; 3];
        let mut bside = [0usize; 3];
        for i in 0..3 {
            let (p, q) = pairs[i];
            if mask & (1 << i) == 0 {
                aside[i] = p;
                bside[i] = q;
            } else {
                aside[i] = q;
                bside[i] = p;
            }
        }
        let all_union = CopyUnion::new(inst, level, region, &others);
        let ta = match steiner_tree(g, &all_union.mask(), aside) {
            Some(t) => t,
            None => continue,
        };
        let va: HashSet<usize> = ta.iter().flat_map(|&(u, v)| [u, v]).collect();
        let mut mask_b = all_union.mask();
        for &v in &va {
            mask_b[v] = false;
        }
        let tb = match steiner_tree(g, &mask_b, bside) {
            Some(t) => t,
            None => continue,
        };
        let mut ea = ta;
        let mut eb = tb;
        for i in 0..3 {
            ea.push((s[i].min(aside[i]), s[i].max(aside[i])));
            eb.push((s[i].min(bside[i]), s[i].max(bside[i])));
        }
        return Ok(vec![
            (ea, prov("fallback:lift", depth)),
            (eb, prov("fallback:lift", depth)),
        ]);
    }
    Err("no workable split of the outside neighbours".into())
}

/// Order the non-home copies of a path-shaped copy graph along the path.
fn path_copies_order(inst: &FamilyInstance, others: &[usize], ch: usize) -> Option<Vec<usize>> {
    let k = inst.k;
    let mut out = Vec::new();
    let mut cur = (ch + 1) % k;
    while cur != ch {
        if others.contains(&cur) {
            out.push(cur);
        }
        cur = (cur + 1) % k;
    }
    if out.len() == others.len() {
        Some(out)
    } else {
        None
    }
}

fn lift_relay(
    inst: &FamilyInstance,
    level: usize,
    region: &[usize],
    s: [usize; 3],
    pairs: &[(usize, usize)],
    ch: usize,
    depth: usize,
) -> Option<Vec<Tree>> {
    let g = &inst.graph;
    let coord_of = |v: usize| inst.copy_coord_at(v, level);
    let copies = copies_of_region(inst, level, region);
    let others: Vec<usize> = copies.keys().copied().filter(|&c| c != ch).collect();
    let six: HashSet<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    for mask in 0u8..8 {
        let mut aside = [0usize; 3];
        let mut bside = [0usize; 3];
        for i in 0..3 {
            let (p, q) = pairs[i];
            if mask & (1 << i) == 0 {
                aside[i] = p;
                bside[i] = q;
            } else {
                aside[i] = q;
                bside[i] = p;
            }
        }
        let ca: BTreeSet<usize> = aside.iter().map(|&v| coord_of(v)).collect();
        let cb: BTreeSet<usize> = bside.iter().map(|&v| coord_of(v)).collect();
        let conflicts: Vec<usize> = ca.intersection(&cb).copied().collect();
        if conflicts.len() != 1 {
            continue;
        }
        let z = conflicts[0];
        for ti in 0..3 {
            let tau = aside[ti];
            if coord_of(tau) != z {
                continue;
            }
            // relay candidates: tau itself via its in-copy neighbours
            let mut options: Vec<(Vec<usize> /*prefix from s_i*/, usize /*new A vertex*/, Vec<usize> /*blocked in B*/)> = Vec::new();
            for &x in g.adj(tau) {
                if coord_of(x) != z || six.contains(&x) || s.contains(&x) {
                    continue;
                }
                let (zp, zq) = inst.outside_pair_at(x, level);
                for zz in [zp, zq] {
                    let cz = coord_of(zz);
                    if cz == ch || cz == z || cb.contains(&cz) || six.contains(&zz) {
                        continue;
                    }
                    options.push((vec![s[ti], tau, x, zz], zz, vec![tau, x]));
                }
            }
            for (prefix, nz, blocked) in options {
                let mut ga: BTreeSet<usize> = ca.iter().copied().filter(|&c| c != z).collect();
                ga.insert(coord_of(nz));
                let gb: Vec<usize> = others
                    .iter()
                    .copied()
                    .filter(|c| !ga.contains(c))
                    .collect();
                if gb.is_empty() {
                    continue;
                }
                let ga: Vec<usize> = ga.into_iter().collect();
                let ua = CopyUnion::new(inst, level, region, &ga);
                let mut a_terms = [0usize; 3];
                for j in 0..3 {
                    a_terms[j] = if j == ti { nz } else { aside[j] };
                }
                let ta = match steiner_tree(g, &ua.mask(), a_terms) {
                    Some(t) => t,
                    None => continue,
                };
                let ub = CopyUnion::new(inst, level, region, &gb);
                let mut mb = ub.mask();
                for &v in &blocked {
                    mb[v] = false;
                }
                let tb = match steiner_tree(g, &mb, bside) {
                    Some(t) => t,
                    None => continue,
                };
                let va: HashSet<usize> = ta
                    .iter()
                    .flat_map(|&(u, v)| [u, v])
                    .chain(prefix.iter().copied())
                    .collect();
                if tb.iter().any(|&(u, v)| (va.contains(&u) && !s.contains(&u)) || (va.contains(&v) && !s.contains(&v))) {
                    continue;
                }
                let mut ea = ta;
                ea.extend(path_edges(&prefix));
                for j in 0..3 {
                    if j != ti {
                        ea.push((s[j].min(aside[j]), s[j].max(aside[j])));
                    }
                }
                let mut eb = tb;
                for j in 0..3 {
                    eb.push((s[j].min(bside[j]), s[j].max(bside[j])));
                }
                return Some(vec![
                    (ea, prov("lemma16:case2.2.2", depth)),
                    (eb, prov("lemma16:case2.2.2", depth)),
                ]);
            }
        }
    }
    None
}

// --- two terminals in one copy, the third elsewhere ----------------------

fn case_two_copies(
    inst: &FamilyInstance,
    level: usize,
    region: &[usize],
    s: [usize; 3],
    depth: usize,
) -> Result<Vec<Tree>, Error> {
    let g = &inst.graph;
    let q = inst.level_degree(level - 1);
    let t = q + 1;
    // identify the shared pair and the loner
    let coords: Vec<usize> = s.iter().map(|&v| inst.copy_coord_at(v, level)).collect();
    let (pair_idx, lone_idx): ((usize, usize), usize) = if coords[0] == coords[1] {
        ((0, 1), 2)
    } else if coords[0] == coords[2] {
        ((0, 2), 1)
    } else {
        ((1, 2), 0)
    };
    let (v1, v2, v3) = (s[pair_idx.0], s[pair_idx.1], s[lone_idx]);
    let c1 = inst.copy_coord_at(v1, level);
    let copies = copies_of_region(inst, level, region);
    let c1_mask = mask_of(g.vertex_count(), &copies[&c1]);
    let (paths, _) = menger::idp_masked(g, &c1_mask, v1, v2, q);
    if paths.len() < q {
        return Err(Error::structural(format!(
            "in-copy path system short: {} < {q}",
            paths.len()
        )));
    }
    let other_coords: Vec<usize> = copies.keys().copied().filter(|&c| c != c1).collect();
    let h = CopyUnion::new(inst, level, region, &other_coords);

    // where do the loner's outside neighbours sit?
    let (o1, o2) = inst.outside_pair_at(v3, level);
    let o_in_c1: Vec<usize> = [o1, o2]
        .into_iter()
        .filter(|&o| inst.copy_coord_at(o, level) == c1)
        .collect();

    let mut alive = vec![true; paths.len()];
    let mut consumed: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
    let subcase = if o_in_c1.is_empty() { "thm1:case2.1" } else { "thm1:case2.2" };
    if let Some(&o) = o_in_c1.first() {
        let mut interior = c1_mask.clone();
        for p in &paths {
            for &v in &p.0 {
                interior[v] = false;
            }
        }
        let (j, tree) = consume_tree(g, &paths, &alive, &interior, o, v3)
            .ok_or_else(|| Error::structural("no connection from the crossing neighbour to the path system"))?;
        alive[j] = false;
        consumed.push((j, tree));
    }

    // attach vertices on the surviving paths, plus the terminal pair
    let mut picker = ImagePicker::new(inst, level, q);
    let avoid = [v3];
    let img_v1 = picker
        .pick(v1, &avoid)
        .ok_or_else(|| Error::structural("no crossing image available for the first terminal"))?;
    let img_v2 = picker
        .pick(v2, &avoid)
        .ok_or_else(|| Error::structural("no crossing image available for the second terminal"))?;
    let mut attach: Vec<(usize /*path idx*/, usize /*vertex*/, usize /*image*/)> = Vec::new();
    for (i, p) in paths.iter().enumerate() {
        if !alive[i] {
            continue;
        }
        // a direct-edge path attaches at either terminal, whichever still
        // has a free crossing image
        let (x, img) = if p.0.len() > 2 {
            let x = p.0[1];
            (x, picker.pick(x, &avoid))
        } else {
            match picker.pick(v1, &avoid) {
                Some(img) => (v1, Some(img)),
                None => (v2, picker.pick(v2, &avoid)),
            }
        };
        let img = img.ok_or_else(|| Error::structural("no crossing image available for a path"))?;
        attach.push((i, x, img));
    }

    let mut targets: Vec<usize> = attach.iter().map(|&(_, _, img)| img).collect();
    targets.push(img_v1);
    targets.push(img_v2);
    let (fan, fan_label) =
        fan_with_fallback(&h, v3, &targets).map_err(Error::structural)?;

    let rule = |extra: &str| {
        if extra.contains("fallback") {
            format!("{subcase}+{extra}")
        } else {
            format!("{subcase}+{extra}")
        }
    };
    let mut trees: Vec<Tree> = Vec::new();
    for &(i, x, img) in &attach {
        let mut e = path_edges(&paths[i].0);
        e.push((x.min(img), x.max(img)));
        e.extend(path_edges(&fan[&img]));
        trees.push((e, prov(rule(&fan_label), depth)));
    }
    // the combined tree through both terminals' own crossing edges
    let mut e = vec![(v1.min(img_v1), v1.max(img_v1)), (v2.min(img_v2), v2.max(img_v2))];
    e.extend(path_edges(&fan[&img_v1]));
    e.extend(path_edges(&fan[&img_v2]));
    trees.push((e, prov(rule(&fan_label), depth)));
    for (_, tree) in consumed {
        trees.push((tree, prov(subcase, depth)));
    }
    debug_assert_eq!(trees.len(), t);
    Ok(trees)
}

// --- all three terminals in different copies -----------------------------

fn case_three_copies(
    inst: &FamilyInstance,
    level: usize,
    region: &[usize],
    s: [usize; 3],
    depth: usize,
) -> Result<Vec<Tree>, Error> {
    let coords: Vec<usize> = s.iter().map(|&v| inst.copy_coord_at(v, level)).collect();
    let coord_set: BTreeSet<usize> = coords.iter().copied().collect();
    let localized = s.iter().all(|&v| {
        let (p, q) = inst.outside_pair_at(v, level);
        coord_set.contains(&inst.copy_coord_at(p, level))
            && coord_set.contains(&inst.copy_coord_at(q, level))
    });
    if localized {
        match subcase_three_local(inst, level, region, s, depth) {
            Ok(trees) => return Ok(trees),
            Err(_) => {} // fall through to the crossing-pair construction
        }
    }
    subcase_three_spread(inst, level, region, s, depth)
}

/// All six outside neighbours stay within the three involved copies: join
/// two terminals across their two copies, hang the third off each path.
fn subcase_three_local(
    inst: &FamilyInstance,
    level: usize,
    region: &[usize],
    s: [usize; 3],
    depth: usize,
) -> Result<Vec<Tree>, Error> {
    let g = &inst.graph;
    let q = inst.level_degree(level - 1);
    let t = q + 1;
    let (w1, w2, w3) = (s[0], s[1], s[2]);
    let d1 = inst.copy_coord_at(w1, level);
    let d2 = inst.copy_coord_at(w2, level);
    let h12 = CopyUnion::new(inst, level, region, &[d1, d2]);
    let (paths, _label) = two_copy_paths_impl(&h12, w1, w2).map_err(Error::structural)?;

    // reach the third terminal through one consumed path
    let (o1, o2) = inst.outside_pair_at(w3, level);
    let o = o1.min(o2);
    let mut interior = h12.mask();
    for p in &paths {
        for &v in &p.0 {
            interior[v] = false;
        }
    }
    let alive = vec![true; paths.len()];
    let (j, t_last) = consume_tree(g, &paths, &alive, &interior, o, w3)
        .ok_or_else(|| Error::structural("no connection from the third terminal into the path system"))?;
    let consumed_edges: HashSet<(usize, usize)> =
        t_last.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();

    // attach the surviving paths to the third terminal through the copies
    // outside the pair
    let copies = copies_of_region(inst, level, region);
    let hp_coords: Vec<usize> = copies
        .keys()
        .copied()
        .filter(|&c| c != d1 && c != d2)
        .collect();
    let hp = CopyUnion::new(inst, level, region, &hp_coords);
    let mut picker = ImagePicker::new(inst, level, q);
    let mut attach: Vec<(usize, usize, Option<usize>)> = Vec::new(); // (path, vertex, image or direct)
    for (i, p) in paths.iter().enumerate() {
        if i == j {
            continue;
        }
        // candidate attach vertices in the first copy along the path
        let mut chosen = None;
        for &x in p.0.iter() {
            if inst.copy_coord_at(x, level) != d1 || x == w1 {
                continue;
            }
            let (a, b) = inst.outside_pair_at(x, level);
            if (a == w3 || b == w3) && !consumed_edges.contains(&(x.min(w3), x.max(w3))) {
                chosen = Some((x, None));
                break;
            }
            let viable = [a, b]
                .into_iter()
                .filter(|&img| inst.copy_coord_at(img, level) != d2)
                .collect::<Vec<_>>();
            if viable.is_empty() {
                continue;
            }
            if let Some(img) = picker.pick(x, &[w3, viable_other(a, b, &viable)]) {
                chosen = Some((x, Some(img)));
                break;
            }
        }
        let (x, img) = match chosen {
            Some(c) => c,
            None => {
                // the path may leave the first copy immediately; use the
                // first terminal itself through its third-copy neighbour
                let (a, b) = inst.outside_pair_at(w1, level);
                let cand = if inst.copy_coord_at(a, level) == d2 { b } else { a };
                if cand == w3 {
                    if consumed_edges.contains(&(w1.min(w3), w1.max(w3))) {
                        return Err(Error::structural(
                            "direct crossing edge to the third terminal already consumed",
                        ));
                    }
                    (w1, None)
                } else if picker.taken.contains(&cand) {
                    return Err(Error::structural("attach vertex exhausted on the first copy"));
                } else {
                    picker.taken.insert(cand);
                    (w1, Some(cand))
                }
            }
        };
        attach.push((i, x, img));
    }
    let targets: Vec<usize> = attach.iter().filter_map(|&(_, _, img)| img).collect();
    let (fan, fan_label) = if targets.is_empty() {
        (BTreeMap::new(), "none".to_string())
    } else {
        fan_with_fallback(&hp, w3, &targets).map_err(Error::structural)?
    };
    let mut trees: Vec<Tree> = Vec::new();
    for &(i, x, img) in &attach {
        let mut e = path_edges(&paths[i].0);
        match img {
            None => e.push((x.min(w3), x.max(w3))),
            Some(img) => {
                e.push((x.min(img), x.max(img)));
                e.extend(path_edges(&fan[&img]));
            }
        }
        trees.push((e, prov(format!("thm1:case3.1+{fan_label}"), depth)));
    }
    trees.push((t_last, prov("thm1:case3.1", depth)));
    if trees.len() != t {
        return Err(Error::structural(format!(
            "three-copy local construction yields {} trees, expected {t}",
            trees.len()
        )));
    }
    Ok(trees)
}

fn viable_other(a: usize, b: usize, viable: &[usize]) -> usize {
    // the pair member that must be avoided because it is not viable
    if viable.contains(&a) && !viable.contains(&b) {
        b
    } else if viable.contains(&b) && !viable.contains(&a) {
        a
    } else {
        usize::MAX
    }
}

/// General spread: route crossing paths between two adjacent copies and
/// fan from the third terminal through everything else.
fn subcase_three_spread(
    inst: &FamilyInstance,
    level: usize,
    region: &[usize],
    s: [usize; 3],
    depth: usize,
) -> Result<Vec<Tree>, Error> {
    let g = &inst.graph;
    let q = inst.level_degree(level - 1);
    let t = q + 1;
    let coords: Vec<usize> = s.iter().map(|&v| inst.copy_coord_at(v, level)).collect();
    let mut role: Option<(usize, usize, usize)> = None;
    for (i, j) in [(0usize, 1usize), (0, 2), (1, 2)] {
        if inst.copies_adjacent(coords[i], coords[j]) {
            let k = 3 - i - j;
            role = Some((i, j, k));
            break;
        }
    }
    let (ia, ib, iff) = role.ok_or_else(|| {
        Error::structural("no two of the three copies are adjacent in the copy graph")
    })?;
    let (a, b, f) = (s[ia], s[ib], s[iff]);
    let (ca, cb) = (coords[ia], coords[ib]);
    let copies = copies_of_region(inst, level, region);
    let ca_mask = mask_of(g.vertex_count(), &copies[&ca]);
    let cb_mask = mask_of(g.vertex_count(), &copies[&cb]);
    let hp_coords: Vec<usize> = copies
        .keys()
        .copied()
        .filter(|&c| c != ca && c != cb)
        .collect();
    let hp = CopyUnion::new(inst, level, region, &hp_coords);
    let in_hp = |v: usize| hp_coords.contains(&inst.copy_coord_at(v, level));

    // the combined tree's two crossing edges
    let pick_outside = |v: usize, avoid_coord: usize| -> Option<usize> {
        let (p1, p2) = inst.outside_pair_at(v, level);
        let mut best = None;
        for cand in [p1, p2] {
            if inst.copy_coord_at(cand, level) != avoid_coord && in_hp(cand) {
                if best.is_none() || cand == f {
                    best = Some(cand);
                }
            }
        }
        best
    };
    let a2 = pick_outside(a, cb)
        .ok_or_else(|| Error::structural("first terminal has no crossing edge outside the pair of copies"))?;
    let b2 = pick_outside(b, ca)
        .ok_or_else(|| Error::structural("second terminal has no crossing edge outside the pair of copies"))?;

    // attach vertices in the first copy
    let mut picker = ImagePicker::new(inst, level, q);
    if a2 != f {
        picker.taken.insert(a2);
        *picker
            .load
            .entry(inst.copy_coord_at(a2, level))
            .or_default() += 1;
    }
    if b2 != f && b2 != a2 {
        picker.taken.insert(b2);
        *picker
            .load
            .entry(inst.copy_coord_at(b2, level))
            .or_default() += 1;
    }
    // the third terminal's crossing edges into the pair copies are used by
    // consuming whole paths later; keep their endpoints off the attach
    // edges so both stay reachable
    let (fo1, fo2) = inst.outside_pair_at(f, level);
    let f_pair_side: Vec<usize> = [fo1, fo2]
        .into_iter()
        .filter(|&o| {
            let c = inst.copy_coord_at(o, level);
            // a crossing edge that lands on a terminal is already served by
            // the combined tree, so it is not consumed
            (c == ca || c == cb) && o != a && o != b
        })
        .collect();
    let mut xs: Vec<usize> = Vec::new();
    let mut xps: Vec<usize> = Vec::new();
    let mut ximgs: Vec<Option<usize>> = Vec::new(); // None = direct edge to f
    // first pass avoids the consumption endpoints, the second allows them
    // when the copy has no slack
    for allow_fp in [false, true] {
        for &x in &copies[&ca] {
            if xs.len() == t - 1 {
                break;
            }
            if x == a || xs.contains(&x) {
                continue;
            }
            let (p1, p2) = inst.outside_pair_at(x, level);
            let (xp, ximg) = if inst.copy_coord_at(p1, level) == cb {
                (p1, p2)
            } else if inst.copy_coord_at(p2, level) == cb {
                (p2, p1)
            } else {
                continue;
            };
            if xp == b {
                continue;
            }
            if !allow_fp && (f_pair_side.contains(&x) || f_pair_side.contains(&xp)) {
                continue;
            }
            if ximg == f {
                xs.push(x);
                xps.push(xp);
                ximgs.push(None);
                continue;
            }
            if ximg == b2 || ximg == a2 || !in_hp(ximg) {
                continue;
            }
            if picker.taken.contains(&ximg) {
                continue;
            }
            let c = inst.copy_coord_at(ximg, level);
            if picker.load.get(&c).copied().unwrap_or(0) >= t {
                continue;
            }
            picker.taken.insert(ximg);
            *picker.load.entry(c).or_default() += 1;
            xs.push(x);
            xps.push(xp);
            ximgs.push(Some(ximg));
        }
    }
    if xs.len() < t - 1 {
        return Err(Error::structural(format!(
            "only {} of {} crossing attach vertices available",
            xs.len(),
            t - 1
        )));
    }

    // route the in-copy fans around the third terminal's crossing
    // neighbours when possible, so consumption can still reach them
    let mut ca_narrow = ca_mask.clone();
    let mut cb_narrow = cb_mask.clone();
    for &o in &f_pair_side {
        ca_narrow[o] = false;
        cb_narrow[o] = false;
    }
    let mut fan_a = menger::fan_masked(g, &ca_narrow, a, &xs, t - 1).0;
    if fan_a.len() < t - 1 {
        fan_a = menger::fan_masked(g, &ca_mask, a, &xs, t - 1).0;
    }
    if fan_a.len() < t - 1 {
        return Err(Error::structural("fan in the first copy is short"));
    }
    let mut fan_b = menger::fan_masked(g, &cb_narrow, b, &xps, t - 1).0;
    if fan_b.len() < t - 1 {
        fan_b = menger::fan_masked(g, &cb_mask, b, &xps, t - 1).0;
    }
    if fan_b.len() < t - 1 {
        return Err(Error::structural("fan in the second copy is short"));
    }
    let end_a: HashMap<usize, Vec<usize>> = fan_a.iter().map(|p| (p.last(), p.0.clone())).collect();
    let end_b: HashMap<usize, Vec<usize>> = fan_b.iter().map(|p| (p.last(), p.0.clone())).collect();
    let mut cross_paths: Vec<Path> = Vec::new();
    for (x, xp) in xs.iter().zip(xps.iter()) {
        let mut verts = end_a[x].clone();
        let mut back = end_b[xp].clone();
        back.reverse();
        verts.extend(back);
        cross_paths.push(Path(verts));
    }

    let subcase = if f_pair_side.is_empty() { "thm1:case3.2.1" } else { "thm1:case3.2.2" };
    let mut alive = vec![true; cross_paths.len()];
    let interior: Vec<bool> = {
        let mut m = vec![false; g.vertex_count()];
        for &v in copies[&ca].iter().chain(copies[&cb].iter()) {
            m[v] = true;
        }
        for p in &cross_paths {
            for &v in &p.0 {
                m[v] = false;
            }
        }
        m
    };
    let mut picked = consume_many(g, &cross_paths, &alive, &interior, &f_pair_side, f);
    let mut unserved = 0usize;
    if picked.is_none() && f_pair_side.len() > 1 {
        // both crossing neighbours may be stuck on the same path; consume
        // through one of them and leave the other crossing edge unused
        for &o in &f_pair_side {
            picked = consume_many(g, &cross_paths, &alive, &interior, &[o], f);
            if picked.is_some() {
                unserved = f_pair_side.len() - 1;
                break;
            }
        }
    }
    let picked = picked.ok_or_else(|| {
        if std::env::var_os("GENCONN_DEBUG_PACKING").is_some() {
            eprintln!(
                "consume miss at level {level}: f={f} os={f_pair_side:?} a={a} b={b} paths={:?}",
                cross_paths.iter().map(|p| p.0.clone()).collect::<Vec<_>>()
            );
        }
        Error::structural("no route from the third terminal into the crossing paths")
    })?;
    let mut consumed: Vec<Vec<(usize, usize)>> = Vec::new();
    for (j, tree) in picked {
        alive[j] = false;
        consumed.push(tree);
    }

    // fan from the third terminal to the surviving attach images
    let mut base: Vec<usize> = Vec::new();
    for (i, img) in ximgs.iter().enumerate() {
        if alive[i] {
            if let Some(img) = img {
                base.push(*img);
            }
        }
    }
    let mut terminal_imgs: Vec<usize> = Vec::new();
    if b2 != f {
        terminal_imgs.push(b2);
    }
    if a2 != f && a2 != b2 {
        terminal_imgs.push(a2);
    }
    // an unused crossing edge of f leaves the fan one slot short; then one
    // terminal image joins the combined tree over a spare path instead of
    // its own fan path
    let splice_options: Vec<Option<usize>> =
        if unserved > 0 && base.len() + terminal_imgs.len() > q {
            terminal_imgs.iter().map(|&v| Some(v)).collect()
        } else {
            vec![None]
        };
    let mut planned = None;
    let mut splice_err = String::from("no terminal image to splice");
    for &spl in &splice_options {
        let mut targets = base.clone();
        for &ti in &terminal_imgs {
            if Some(ti) != spl {
                targets.push(ti);
            }
        }
        targets.sort_unstable();
        targets.dedup();
        // keep the splice vertex out of the fan's region entirely
        let hp_used = if let Some(sv) = spl {
            let mut copies = hp.copies.clone();
            if let Some(list) = copies.get_mut(&inst.copy_coord_at(sv, level)) {
                list.retain(|&v| v != sv);
            }
            CopyUnion { inst, level, copies }
        } else {
            hp.clone()
        };
        let (fan, fan_label) = match fan_with_fallback(&hp_used, f, &targets) {
            Ok(v) => v,
            Err(e) => {
                splice_err = e;
                continue;
            }
        };
        let splice_walk = if let Some(sv) = spl {
            let mut interior_hp = hp.mask();
            for p in fan.values() {
                for &v in p {
                    interior_hp[v] = false;
                }
            }
            interior_hp[sv] = false;
            let mut combo: HashSet<usize> = HashSet::new();
            combo.insert(f);
            for &ti in &terminal_imgs {
                if Some(ti) != spl {
                    combo.extend(fan[&ti].iter().copied());
                }
            }
            match first_hit(g, &interior_hp, |v| combo.contains(&v), sv) {
                Some(w) => Some(w),
                None => {
                    splice_err = "no splice route to the combined tree".into();
                    continue;
                }
            }
        } else {
            None
        };
        planned = Some((fan, fan_label, spl, splice_walk));
        break;
    }
    let (fan, fan_label, spl, splice_walk) =
        planned.ok_or_else(|| Error::structural(splice_err))?;

    let mut trees: Vec<Tree> = Vec::new();
    for i in 0..cross_paths.len() {
        if !alive[i] {
            continue;
        }
        let mut e = path_edges(&cross_paths[i].0);
        match ximgs[i] {
            None => e.push((xs[i].min(f), xs[i].max(f))),
            Some(img) => {
                e.push((xs[i].min(img), xs[i].max(img)));
                e.extend(path_edges(&fan[&img]));
            }
        }
        trees.push((e, prov(format!("{subcase}+{fan_label}"), depth)));
    }
    // combined tree through a and b's own crossing edges
    let mut e: Vec<(usize, usize)> = Vec::new();
    e.push((a.min(a2), a.max(a2)));
    e.push((b.min(b2), b.max(b2)));
    for &ti in &terminal_imgs {
        if Some(ti) == spl {
            e.extend(path_edges(splice_walk.as_ref().unwrap()));
        } else {
            e.extend(path_edges(&fan[&ti]));
        }
    }
    e.sort_unstable();
    e.dedup();
    trees.push((e, prov(format!("{subcase}+{fan_label}"), depth)));
    for tree in consumed {
        trees.push((tree, prov(subcase, depth)));
    }
    if trees.len() != t {
        return Err(Error::structural(format!(
            "three-copy spread construction yields {} trees, expected {t}",
            trees.len()
        )));
    }
    Ok(trees)
}

// ---------------------------------------------------------------------------
// Entry points.

/// Attach two extra trees to a packing whose trees all live inside the
/// terminals' shared top-level copy.
pub fn lift_trees(inst: &FamilyInstance, inner: &TreePacking) -> Result<TreePacking, Error> {
    let level = inst.top_level();
    if level < 2 {
        return Err(Error::input("lifting needs at least two levels"));
    }
    let s = inner.s;
    let ch = inst.copy_coord_at(s[0], level);
    for &v in &s {
        if inst.copy_coord_at(v, level) != ch {
            return Err(Error::input("terminals must share a top-level copy"));
        }
    }
    let region: Vec<usize> = (0..inst.graph.vertex_count()).collect();
    let lifted = lift_impl(inst, level, &region, s, 0).map_err(Error::structural)?;
    let mut trees = inner.trees.clone();
    let mut trace = inner.trace.clone();
    for (e, p) in lifted {
        trees.push(e);
        trace.push(p);
    }
    let out = TreePacking { s, trees, trace };
    verify_packing(&inst.graph, &out).map_err(Error::structural)?;
    Ok(out)
}

/// Construct r+2l-3 internally disjoint trees for the terminal set.
pub fn build_tree_packing(inst: &FamilyInstance, s: &VertexSet) -> Result<TreePacking, Error> {
    if s.len() != 3 {
        return Err(Error::input("need exactly three distinct terminals"));
    }
    let n = inst.graph.vertex_count();
    for v in s.iter() {
        if v >= n {
            return Err(Error::input(format!("terminal {v} out of range")));
        }
    }
    if !inst.common_outside_ok() {
        return Err(Error::structural(
            "common outside neighbour hypothesis fails for this member",
        ));
    }
    let sv: Vec<usize> = s.iter().collect();
    let region: Vec<usize> = (0..n).collect();
    let trees = pack_region(
        inst,
        inst.top_level(),
        &region,
        [sv[0], sv[1], sv[2]],
        0,
    )?;
    let (edges, trace): (Vec<_>, Vec<_>) = trees.into_iter().unzip();
    let packing = TreePacking {
        s: [sv[0], sv[1], sv[2]],
        trees: edges,
        trace,
    };
    verify_packing(&inst.graph, &packing).map_err(|e| {
        if std::env::var_os("GENCONN_DEBUG_PACKING").is_some() {
            eprintln!("failed packing for S={:?}:", packing.s);
            for (t, tr) in packing.trees.iter().zip(packing.trace.iter()) {
                eprintln!("  [{}] {:?}", tr.rule, t);
            }
        }
        Error::structural(format!("constructed packing failed verification: {e}"))
    })?;
    Ok(packing)
}

// ---------------------------------------------------------------------------
// Certificates.

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertTerminals {
    pub ids: Vec<usize>,
    pub labels: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Certificate {
    pub family: String,
    pub params: BTreeMap<String, usize>,
    #[serde(rename = "S")]
    pub s: CertTerminals,
    pub trees: Vec<Vec<(usize, usize)>>,
    pub trace: Vec<TreeProvenance>,
    pub verified: bool,
}

pub fn certificate(inst: &FamilyInstance, p: &TreePacking) -> Certificate {
    let mut params = BTreeMap::new();
    params.insert("n".to_string(), inst.n);
    if matches!(inst.kind, FamilyKind::Qk) {
        params.insert("k".to_string(), inst.k);
    }
    let ids: Vec<usize> = p.s.to_vec();
    let labels = ids.iter().map(|&v| inst.label_string(v)).collect();
    let mut trees: Vec<Vec<(usize, usize)>> = p
        .trees
        .iter()
        .map(|t| {
            let mut t: Vec<(usize, usize)> = t.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
            t.sort_unstable();
            t.dedup();
            t
        })
        .collect();
    let _ = &mut trees;
    let verified = verify_packing(&inst.graph, p).is_ok();
    Certificate {
        family: inst.kind.code().to_string(),
        params,
        s: CertTerminals { ids, labels },
        trees,
        trace: p.trace.clone(),
        verified,
    }
}
