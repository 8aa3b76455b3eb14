//! Directed graphs, reduced groupoid words, refinements, nested free
//! generating sets, periodic lattice systems and loop bases.
//!
//! Generating sets are tracked together with an expression of every edge
//! of the current graph as a word in the generators; refinement levels of
//! individual generators are recorded so that level-dependent weights can
//! be applied downstream.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub id: String,
    pub src: String,
    pub dst: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    pub vertices: Vec<String>,
    pub edges: Vec<Edge>,
    vidx: HashMap<String, usize>,
    eidx: HashMap<String, usize>,
}

impl DirectedGraph {
    pub fn new(vertices: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        let mut vidx = HashMap::new();
        for (i, v) in vertices.iter().enumerate() {
            if v.contains(char::is_whitespace) || v.is_empty() {
                return Err(Error::Rejected(format!("bad vertex id {v:?}")));
            }
            if vidx.insert(v.clone(), i).is_some() {
                return Err(Error::Rejected(format!("duplicate vertex id {v}")));
            }
        }
        let mut eidx = HashMap::new();
        for (i, e) in edges.iter().enumerate() {
            if e.id.contains(char::is_whitespace) || e.id.is_empty() || e.id.starts_with('~') {
                return Err(Error::Rejected(format!("bad edge id {:?}", e.id)));
            }
            if eidx.insert(e.id.clone(), i).is_some() {
                return Err(Error::Rejected(format!("duplicate edge id {}", e.id)));
            }
            if !vidx.contains_key(&e.src) || !vidx.contains_key(&e.dst) {
                return Err(Error::Rejected(format!("edge {} has unknown endpoint", e.id)));
            }
        }
        Ok(DirectedGraph { vertices, edges, vidx, eidx })
    }

    pub fn edge(&self, id: &str) -> Option<&Edge> {
        self.eidx.get(id).map(|&i| &self.edges[i])
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vidx.get(id).copied()
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.eidx.get(id).copied()
    }

    /// Weak connectivity.
    pub fn is_connected(&self) -> bool {
        if self.vertices.is_empty() {
            return true;
        }
        let mut uf = UnionFind::new(self.vertices.len());
        for e in &self.edges {
            uf.union(self.vidx[&e.src], self.vidx[&e.dst]);
        }
        let root = uf.find(0);
        (1..self.vertices.len()).all(|i| uf.find(i) == root)
    }
}

/// One step of a groupoid word: an edge id and whether it is traversed
/// against its orientation.
pub type Letter = (String, bool);

/// A reduced composable word in the free groupoid of a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupoidWord {
    pub letters: Vec<Letter>,
    pub src: String,
    pub dst: String,
}

impl GroupoidWord {
    pub fn empty(base: &str) -> Self {
        GroupoidWord { letters: vec![], src: base.into(), dst: base.into() }
    }

    pub fn new(g: &DirectedGraph, letters: Vec<Letter>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::Rejected(
                "empty word needs a base vertex; use GroupoidWord::empty".into(),
            ));
        }
        let mut at: Option<String> = None;
        let src = {
            let (id, inv) = &letters[0];
            let e = g
                .edge(id)
                .ok_or_else(|| Error::Rejected(format!("unknown edge {id}")))?;
            if *inv { e.dst.clone() } else { e.src.clone() }
        };
        for (id, inv) in &letters {
            let e = g
                .edge(id)
                .ok_or_else(|| Error::Rejected(format!("unknown edge {id}")))?;
            let (s, r) = if *inv { (&e.dst, &e.src) } else { (&e.src, &e.dst) };
            if let Some(prev) = &at {
                if prev != s {
                    return Err(Error::Rejected(format!(
                        "word not composable at edge {id}: {prev} != {s}"
                    )));
                }
            }
            at = Some(r.clone());
        }
        let dst = at.unwrap();
        let letters = reduce_letters(letters);
        Ok(GroupoidWord { letters, src, dst })
    }

    pub fn single(g: &DirectedGraph, id: &str) -> Result<Self> {
        GroupoidWord::new(g, vec![(id.to_string(), false)])
    }

    pub fn inverse(&self) -> Self {
        let letters = self
            .letters
            .iter()
            .rev()
            .map(|(id, inv)| (id.clone(), !inv))
            .collect();
        GroupoidWord { letters, src: self.dst.clone(), dst: self.src.clone() }
    }

    pub fn compose(&self, next: &GroupoidWord) -> Result<Self> {
        if self.dst != next.src {
            return Err(Error::Rejected(format!(
                "words not composable: {} != {}",
                self.dst, next.src
            )));
        }
        let mut letters = self.letters.clone();
        letters.extend(next.letters.iter().cloned());
        Ok(GroupoidWord {
            letters: reduce_letters(letters),
            src: self.src.clone(),
            dst: next.dst.clone(),
        })
    }

    pub fn is_positive(&self) -> bool {
        !self.letters.is_empty() && self.letters.iter().all(|(_, inv)| !inv)
    }

    pub fn is_loop(&self) -> bool {
        self.src == self.dst
    }
}

fn reduce_letters(letters: Vec<Letter>) -> Vec<Letter> {
    let mut out: Vec<Letter> = Vec::with_capacity(letters.len());
    for l in letters {
        match out.last() {
            Some(last) if last.0 == l.0 && last.1 != l.1 => {
                out.pop();
            }
            _ => out.push(l),
        }
    }
    out
}

/// A refinement: the parent graph mapped into the groupoid of the child,
/// each parent edge going to a positive word of child edges.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub parent: DirectedGraph,
    pub child: DirectedGraph,
    pub edge_map: BTreeMap<String, GroupoidWord>,
    pub vertex_map: BTreeMap<String, String>,
}

impl Refinement {
    pub fn validate(&self) -> Result<()> {
        for v in &self.parent.vertices {
            let img = self
                .vertex_map
                .get(v)
                .ok_or_else(|| Error::Rejected(format!("vertex {v} unmapped")))?;
            if self.child.vertex_index(img).is_none() {
                return Err(Error::Rejected(format!("vertex image {img} not in child")));
            }
        }
        for e in &self.parent.edges {
            let w = self
                .edge_map
                .get(&e.id)
                .ok_or_else(|| Error::Rejected(format!("edge {} unmapped", e.id)))?;
            if !w.is_positive() {
                return Err(Error::Rejected(format!(
                    "image of edge {} is not a nonempty positive word",
                    e.id
                )));
            }
            if w.src != self.vertex_map[&e.src] || w.dst != self.vertex_map[&e.dst] {
                return Err(Error::Rejected(format!(
                    "image of edge {} does not intertwine source/range",
                    e.id
                )));
            }
        }
        Ok(())
    }

    /// Pushes a word over parent edges to a word over child edges.
    pub fn map_word(&self, w: &GroupoidWord) -> Result<GroupoidWord> {
        let mut acc = GroupoidWord::empty(&self.vertex_map[&w.src]);
        for (id, inv) in &w.letters {
            let img = &self.edge_map[id];
            let img = if *inv { img.inverse() } else { img.clone() };
            acc = acc.compose(&img)?;
        }
        Ok(acc)
    }
}

/// (generator_count, loop_rank) of a connected graph.
pub fn free_rank(g: &DirectedGraph) -> Result<(usize, usize)> {
    if !g.is_connected() {
        return Err(Error::Rejected("graph is not connected".into()));
    }
    let rank = g.edges.len() + 1 - g.vertices.len();
    Ok((g.edges.len(), rank))
}

fn part_suffix(parts: usize, j: usize) -> String {
    if parts == 2 {
        if j == 0 { "⁻".into() } else { "⁺".into() }
    } else {
        format!("·{}", j + 1)
    }
}

/// Subdivides every edge into a directed path of `parts` fresh edges.
pub fn subdivide_edges(g: &DirectedGraph, parts: usize) -> Result<Refinement> {
    if parts < 2 {
        return Err(Error::Rejected("subdivision needs parts >= 2".into()));
    }
    let mut vertices = g.vertices.clone();
    let mut edges = Vec::new();
    let mut edge_paths: Vec<(String, Vec<String>)> = Vec::new();
    for e in &g.edges {
        let mut path_ids = Vec::with_capacity(parts);
        let mut prev = e.src.clone();
        for j in 0..parts {
            let id = format!("{}{}", e.id, part_suffix(parts, j));
            let next = if j + 1 == parts {
                e.dst.clone()
            } else {
                let v = format!("{}:{}", e.id, j + 1);
                vertices.push(v.clone());
                v
            };
            edges.push(Edge { id: id.clone(), src: prev.clone(), dst: next.clone() });
            path_ids.push(id);
            prev = next;
        }
        edge_paths.push((e.id.clone(), path_ids));
    }
    let child = DirectedGraph::new(vertices, edges)?;
    let mut edge_map = BTreeMap::new();
    for (eid, path) in edge_paths {
        let letters = path.into_iter().map(|id| (id, false)).collect();
        edge_map.insert(eid, GroupoidWord::new(&child, letters)?);
    }
    let vertex_map = g.vertices.iter().map(|v| (v.clone(), v.clone())).collect();
    let r = Refinement { parent: g.clone(), child, edge_map, vertex_map };
    r.validate()?;
    Ok(r)
}

/// New generating set for the child groupoid: images of `f_old` first, in
/// order, then for each subdivided parent edge the proper suffix paths of
/// its subdivision word (shortest last), then any child edges not covered
/// by the edge map as their own generators.
pub fn choose_generators(r: &Refinement, f_old: &[GroupoidWord]) -> Result<Vec<GroupoidWord>> {
    if !verify_free_generating(&r.parent, f_old)? {
        return Err(Error::Rejected(
            "old generating set is not free of full rank".into(),
        ));
    }
    let mut f_new: Vec<GroupoidWord> = Vec::new();
    for w in f_old {
        f_new.push(r.map_word(w)?);
    }
    let mut covered: BTreeSet<String> = BTreeSet::new();
    for e in &r.parent.edges {
        let path = &r.edge_map[&e.id];
        for (id, _) in &path.letters {
            covered.insert(id.clone());
        }
        for start in 1..path.letters.len() {
            let letters = path.letters[start..].to_vec();
            f_new.push(GroupoidWord::new(&r.child, letters)?);
        }
    }
    for e in &r.child.edges {
        if !covered.contains(&e.id) {
            f_new.push(GroupoidWord::single(&r.child, &e.id)?);
        }
    }
    Ok(f_new)
}

/// Stallings-folding check that `f` freely generates the full groupoid.
pub fn verify_free_generating(g: &DirectedGraph, f: &[GroupoidWord]) -> Result<bool> {
    if f.len() != g.edges.len() {
        return Ok(false);
    }
    // States: graph vertices first, then fresh states for word interiors.
    let mut n_states = g.vertices.len();
    // Transitions (state, edge index, state), always in edge orientation.
    let mut trans: Vec<(usize, usize, usize)> = Vec::new();
    for w in f {
        if w.letters.is_empty() {
            return Ok(false);
        }
        let s = g
            .vertex_index(&w.src)
            .ok_or_else(|| Error::Rejected(format!("unknown vertex {}", w.src)))?;
        let r = g.vertex_index(&w.dst).unwrap();
        let mut at = s;
        for (pos, (id, inv)) in w.letters.iter().enumerate() {
            let ei = g
                .edge_index(id)
                .ok_or_else(|| Error::Rejected(format!("unknown edge {id}")))?;
            let next = if pos + 1 == w.letters.len() {
                r
            } else {
                n_states += 1;
                n_states - 1
            };
            if *inv {
                trans.push((next, ei, at));
            } else {
                trans.push((at, ei, next));
            }
            at = next;
        }
    }
    let mut uf = UnionFind::new(n_states);
    // Fold to a fixpoint: two transitions sharing a label and an endpoint
    // on the same side force the opposite endpoints together.
    loop {
        let mut merged = false;
        let mut by_src: HashMap<(usize, usize), usize> = HashMap::new();
        let mut by_dst: HashMap<(usize, usize), usize> = HashMap::new();
        for &(a, e, b) in &trans {
            let (a, b) = (uf.find(a), uf.find(b));
            if let Some(&b2) = by_src.get(&(a, e)) {
                if uf.find(b2) != b {
                    uf.union(b, b2);
                    merged = true;
                }
            } else {
                by_src.insert((a, e), b);
            }
            if let Some(&a2) = by_dst.get(&(b, e)) {
                if uf.find(a2) != a {
                    uf.union(a, a2);
                    merged = true;
                }
            } else {
                by_dst.insert((b, e), a);
            }
        }
        if !merged {
            break;
        }
    }
    // The folded automaton must be the graph itself: original vertices in
    // distinct classes, every state in one of those classes, and each edge
    // label realized exactly once, between the right classes.
    let vclasses: Vec<usize> = (0..g.vertices.len()).map(|i| uf.find(i)).collect();
    let distinct: BTreeSet<usize> = vclasses.iter().copied().collect();
    if distinct.len() != g.vertices.len() {
        return Ok(false);
    }
    for s in 0..n_states {
        if !distinct.contains(&uf.find(s)) {
            return Ok(false);
        }
    }
    let mut seen: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for &(a, e, b) in &trans {
        let key = (uf.find(a), uf.find(b));
        if let Some(&prev) = seen.get(&e) {
            if prev != key {
                return Ok(false);
            }
        } else {
            seen.insert(e, key);
        }
    }
    for (ei, e) in g.edges.iter().enumerate() {
        let want = (vclasses[g.vertex_index(&e.src).unwrap()], vclasses[g.vertex_index(&e.dst).unwrap()]);
        if seen.get(&ei) != Some(&want) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A word in generator indices of a generating set, with formal inverses.
pub type FWord = Vec<(usize, bool)>;

pub fn reduce_fword(w: FWord) -> FWord {
    let mut out: FWord = Vec::with_capacity(w.len());
    for l in w {
        match out.last() {
            Some(last) if last.0 == l.0 && last.1 != l.1 => {
                out.pop();
            }
            _ => out.push(l),
        }
    }
    out
}

fn invert_fword(w: &FWord) -> FWord {
    w.iter().rev().map(|&(i, inv)| (i, !inv)).collect()
}

/// A tower of graphs with refinements, nested generating sets, the level
/// at which each generator first appeared, and an expression of every
/// current edge as a word in the current generators.
#[derive(Debug, Clone)]
pub struct RefinementSystem {
    pub graphs: Vec<DirectedGraph>,
    pub refinements: Vec<Refinement>,
    pub generating_sets: Vec<Vec<GroupoidWord>>,
    /// gen_levels[k][i] = 1-based level at which generator i of F_{k+1}
    /// first appeared.
    pub gen_levels: Vec<Vec<usize>>,
    /// edge_exprs[k][edge id] = that edge of graph k as a word in F_{k+1}.
    pub edge_exprs: Vec<BTreeMap<String, FWord>>,
}

impl RefinementSystem {
    /// A one-level system with F_1 = E.
    pub fn new(base: DirectedGraph) -> Result<Self> {
        if !base.is_connected() {
            return Err(Error::Rejected("graph is not connected".into()));
        }
        let f1: Vec<GroupoidWord> = base
            .edges
            .iter()
            .map(|e| GroupoidWord::single(&base, &e.id))
            .collect::<Result<_>>()?;
        let exprs = base
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.clone(), vec![(i, false)]))
            .collect();
        let levels = vec![1; f1.len()];
        Ok(RefinementSystem {
            graphs: vec![base],
            refinements: vec![],
            generating_sets: vec![f1],
            gen_levels: vec![levels],
            edge_exprs: vec![exprs],
        })
    }

    pub fn top_level(&self) -> usize {
        self.graphs.len()
    }

    /// Appends one refinement whose parent is the current top graph, with
    /// the generating set from `choose_generators` and updated levels and
    /// edge expressions.
    pub fn extend(&mut self, r: Refinement) -> Result<()> {
        r.validate()?;
        let top = self.graphs.last().unwrap();
        if r.parent != *top {
            return Err(Error::Rejected("refinement parent is not the top graph".into()));
        }
        let f_old = self.generating_sets.last().unwrap().clone();
        let f_new = choose_generators(&r, &f_old)?;
        let old_exprs = self.edge_exprs.last().unwrap().clone();
        let old_levels = self.gen_levels.last().unwrap().clone();
        let new_level = self.graphs.len() + 1;
        let mut levels = old_levels;
        levels.resize(f_new.len(), new_level);

        // Suffix generators occupy positions |F_old|, |F_old|+1, ... in
        // the same order choose_generators emitted them.
        let mut exprs: BTreeMap<String, FWord> = BTreeMap::new();
        let mut pos = f_old.len();
        let mut covered: BTreeSet<String> = BTreeSet::new();
        for e in &r.parent.edges {
            let path = &r.edge_map[&e.id];
            let p = path.letters.len();
            for (id, _) in &path.letters {
                covered.insert(id.clone());
            }
            let w_e = old_exprs[&e.id].clone();
            if p == 1 {
                exprs.insert(path.letters[0].0.clone(), w_e);
                continue;
            }
            // Generators s_j = (x_j .. x_p) at positions pos .. pos+p-2
            // for j = 2..=p; then x_p = s_p, x_j = s_j s_{j+1}^{-1} for
            // 1 < j < p, and x_1 = w_e s_2^{-1}.
            let s_idx = |j: usize| pos + (j - 2);
            exprs.insert(path.letters[p - 1].0.clone(), vec![(s_idx(p), false)]);
            for j in 2..p {
                exprs.insert(
                    path.letters[j - 1].0.clone(),
                    vec![(s_idx(j), false), (s_idx(j + 1), true)],
                );
            }
            let mut first = w_e;
            first.push((s_idx(2), true));
            exprs.insert(path.letters[0].0.clone(), reduce_fword(first));
            pos += p - 1;
        }
        for e in &r.child.edges {
            if !covered.contains(&e.id) {
                exprs.insert(e.id.clone(), vec![(pos, false)]);
                pos += 1;
            }
        }
        debug_assert_eq!(pos, f_new.len());

        self.graphs.push(r.child.clone());
        self.refinements.push(r);
        self.generating_sets.push(f_new);
        self.gen_levels.push(levels);
        self.edge_exprs.push(exprs);
        Ok(())
    }

    /// Subdivides every edge of the top graph into `parts` pieces.
    pub fn subdivide(&mut self, parts: usize) -> Result<()> {
        let r = subdivide_edges(self.graphs.last().unwrap(), parts)?;
        self.extend(r)
    }

    /// Expands a generator-index word at set `k` (0-based) back into a
    /// groupoid word over the edges of graph k.
    pub fn expand_fword(&self, k: usize, w: &FWord) -> Result<GroupoidWord> {
        let f = &self.generating_sets[k];
        let mut letters: Vec<Letter> = Vec::new();
        for &(i, inv) in w {
            let gw = if inv { f[i].inverse() } else { f[i].clone() };
            letters.extend(gw.letters);
        }
        if letters.is_empty() {
            return Err(Error::Rejected("cannot expand an empty word without a base".into()));
        }
        GroupoidWord::new(&self.graphs[k], letters)
    }

    /// Rewrites an arbitrary groupoid word of graph k as a word in F_{k+1}.
    pub fn rewrite_in_generators(&self, k: usize, w: &GroupoidWord) -> Result<FWord> {
        let exprs = &self.edge_exprs[k];
        let mut out: FWord = Vec::new();
        for (id, inv) in &w.letters {
            let e = exprs
                .get(id)
                .ok_or_else(|| Error::Rejected(format!("edge {id} has no expression")))?;
            let e = if *inv { invert_fword(e) } else { e.clone() };
            out.extend(e);
        }
        Ok(reduce_fword(out))
    }
}

fn lattice_coords(m: i64, d: usize) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        let mut next = Vec::with_capacity(out.len() * m as usize);
        for c in &out {
            for x in 0..m {
                let mut c2 = c.clone();
                c2.push(x);
                next.push(c2);
            }
        }
        out = next;
    }
    out
}

fn coord_id(c: &[i64]) -> String {
    c.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn lattice_graph(d: usize, m: i64) -> Result<DirectedGraph> {
    let coords = lattice_coords(m, d);
    let vertices: Vec<String> = coords.iter().map(|c| format!("v{}", coord_id(c))).collect();
    let mut edges = Vec::new();
    for c in &coords {
        for a in 0..d {
            let mut c2 = c.clone();
            c2[a] = (c2[a] + 1).rem_euclid(m);
            edges.push(Edge {
                id: format!("a{}:{}", a, coord_id(c)),
                src: format!("v{}", coord_id(c)),
                dst: format!("v{}", coord_id(&c2)),
            });
        }
    }
    DirectedGraph::new(vertices, edges)
}

/// Periodic d-dimensional lattice tower: level k+1 doubles the number of
/// cells per side, refining each edge into two and adding the transverse
/// edges as their own generators.
pub fn lattice_system(d: usize, n0: i64, levels: usize) -> Result<RefinementSystem> {
    if d < 1 || n0 < 1 {
        return Err(Error::Rejected("lattice needs d >= 1 and n0 >= 1".into()));
    }
    let mut sys = RefinementSystem::new(lattice_graph(d, n0)?)?;
    let mut m = n0;
    for _ in 0..levels {
        let parent = sys.graphs.last().unwrap().clone();
        let child = lattice_graph(d, 2 * m)?;
        let mut vertex_map = BTreeMap::new();
        let mut edge_map = BTreeMap::new();
        for c in lattice_coords(m, d) {
            let c2: Vec<i64> = c.iter().map(|x| 2 * x).collect();
            vertex_map.insert(format!("v{}", coord_id(&c)), format!("v{}", coord_id(&c2)));
            for a in 0..d {
                let mut mid = c2.clone();
                mid[a] = (mid[a] + 1).rem_euclid(2 * m);
                let w = GroupoidWord::new(
                    &child,
                    vec![
                        (format!("a{}:{}", a, coord_id(&c2)), false),
                        (format!("a{}:{}", a, coord_id(&mid)), false),
                    ],
                )?;
                edge_map.insert(format!("a{}:{}", a, coord_id(&c)), w);
            }
        }
        sys.extend(Refinement { parent, child, edge_map, vertex_map })?;
        m *= 2;
    }
    Ok(sys)
}

/// Spanning-tree loop basis of the isotropy group at `base`.
pub fn loop_basis(g: &DirectedGraph, base: &str) -> Result<Vec<GroupoidWord>> {
    if !g.is_connected() {
        return Err(Error::Rejected("graph is not connected".into()));
    }
    let b = g
        .vertex_index(base)
        .ok_or_else(|| Error::Rejected(format!("unknown vertex {base}")))?;
    // BFS tree; tree_path[v] = word base -> v.
    let mut tree_path: Vec<Option<GroupoidWord>> = vec![None; g.vertices.len()];
    tree_path[b] = Some(GroupoidWord::empty(base));
    let mut queue = std::collections::VecDeque::from([b]);
    let mut in_tree: BTreeSet<String> = BTreeSet::new();
    while let Some(v) = queue.pop_front() {
        for e in &g.edges {
            let (s, r) = (g.vertex_index(&e.src).unwrap(), g.vertex_index(&e.dst).unwrap());
            let (from, to, inv) = if s == v {
                (s, r, false)
            } else if r == v {
                (r, s, true)
            } else {
                continue;
            };
            if tree_path[to].is_none() {
                let step = GroupoidWord::new(g, vec![(e.id.clone(), inv)])?;
                tree_path[to] = Some(tree_path[from].as_ref().unwrap().compose(&step)?);
                in_tree.insert(e.id.clone());
                queue.push_back(to);
            }
        }
    }
    let mut loops = Vec::new();
    for e in &g.edges {
        if in_tree.contains(&e.id) {
            continue;
        }
        let to_src = tree_path[g.vertex_index(&e.src).unwrap()].as_ref().unwrap();
        let from_dst = tree_path[g.vertex_index(&e.dst).unwrap()].as_ref().unwrap().inverse();
        let step = GroupoidWord::single(g, &e.id)?;
        loops.push(to_src.compose(&step)?.compose(&from_dst)?);
    }
    Ok(loops)
}

/// Serializes a graph and a leveled generating set to the text format:
/// `vertex <id>`, `edge <id> <src> <dst>`, `gen <level> <letters...>`
/// with `~` marking a formally inverted edge.
pub fn serialize_graph(g: &DirectedGraph, gens: &[(usize, GroupoidWord)]) -> String {
    let mut out = String::new();
    for v in &g.vertices {
        out.push_str(&format!("vertex {v}\n"));
    }
    for e in &g.edges {
        out.push_str(&format!("edge {} {} {}\n", e.id, e.src, e.dst));
    }
    for (level, w) in gens {
        out.push_str(&format!("gen {level}"));
        for (id, inv) in &w.letters {
            out.push_str(if *inv { " ~" } else { " " });
            out.push_str(id);
        }
        out.push('\n');
    }
    out
}

pub fn parse_graph(text: &str) -> Result<(DirectedGraph, Vec<(usize, GroupoidWord)>)> {
    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    let mut gen_lines: Vec<(usize, Vec<Letter>)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: &str| Error::Config(format!("line {}: {msg}", lineno + 1));
        match toks[0] {
            "vertex" if toks.len() == 2 => vertices.push(toks[1].to_string()),
            "edge" if toks.len() == 4 => edges.push(Edge {
                id: toks[1].to_string(),
                src: toks[2].to_string(),
                dst: toks[3].to_string(),
            }),
            "gen" if toks.len() >= 3 => {
                let level: usize = toks[1]
                    .parse()
                    .map_err(|_| bad("bad generator level"))?;
                let letters = toks[2..]
                    .iter()
                    .map(|t| match t.strip_prefix('~') {
                        Some(id) => (id.to_string(), true),
                        None => (t.to_string(), false),
                    })
                    .collect();
                gen_lines.push((level, letters));
            }
            _ => return Err(bad("unrecognized line")),
        }
    }
    let g = DirectedGraph::new(vertices, edges)?;
    let gens = gen_lines
        .into_iter()
        .map(|(level, letters)| Ok((level, GroupoidWord::new(&g, letters)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok((g, gens))
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.parent[a] = b;
        }
    }
}
