//! Small simple graphs, ordered graphs and the family `S(F)` of ordered
//! subgraph classes organised as the tree `T(F)`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("edge ({0},{1}) has an endpoint outside 0..{2}")]
    EndpointOutOfRange(usize, usize, usize),
    #[error("loop at vertex {0}")]
    Loop(usize),
    #[error("duplicate edge ({0},{1})")]
    DuplicateEdge(usize, usize),
    #[error("graph has no edges")]
    NoEdges,
    #[error("graph too large for this operation ({0} vertices, limit {1})")]
    TooLarge(usize, usize),
    #[error("edge list line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Simple undirected graph on vertices `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Graph, GraphError> {
        let mut seen = BTreeSet::new();
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(GraphError::EndpointOutOfRange(a, b, n));
            }
            if a == b {
                return Err(GraphError::Loop(a));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(GraphError::DuplicateEdge(a, b));
            }
        }
        Ok(Graph { n, edges: seen.into_iter().collect() })
    }

    pub fn empty(n: usize) -> Graph {
        Graph { n, edges: Vec::new() }
    }

    pub fn complete(n: usize) -> Graph {
        let edges: Vec<_> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        Graph { n, edges }
    }

    pub fn path(n: usize) -> Graph {
        Graph { n, edges: (1..n).map(|i| (i - 1, i)).collect() }
    }

    pub fn cycle(n: usize) -> Graph {
        let mut g = Graph::path(n);
        g.edges.push((0, n - 1));
        g.edges.sort();
        g
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Row bitmasks; only for graphs with at most 32 vertices.
    pub fn adjacency_masks(&self) -> Vec<u32> {
        assert!(self.n <= 32, "adjacency masks need n <= 32");
        let mut m = vec![0u32; self.n];
        for &(a, b) in &self.edges {
            m[a] |= 1 << b;
            m[b] |= 1 << a;
        }
        m
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }

    /// Subgraph induced by `verts`, relabelled `0..verts.len()` in the given order.
    pub fn induced(&self, verts: &[usize]) -> Graph {
        let pos: HashMap<usize, usize> = verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| match (pos.get(&a), pos.get(&b)) {
                (Some(&x), Some(&y)) => Some((x.min(y), x.max(y))),
                _ => None,
            })
            .collect();
        edges.sort();
        Graph { n: verts.len(), edges }
    }

    pub fn is_forest(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut x = x;
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra == rb {
                return false;
            }
            parent[ra] = rb;
        }
        true
    }

    /// Parse the edge-list format: first non-comment line `n m`, then `m`
    /// lines `u v` with `u < v`; lines starting with `#` are ignored.
    pub fn parse_edge_list(text: &str) -> Result<Graph, GraphError> {
        let mut lines =
            text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let perr = |line: usize, msg: &str| GraphError::Parse { line, msg: msg.to_string() };
        let (hl, header) = lines.next().ok_or_else(|| perr(0, "missing header `n m`"))?;
        let nums: Vec<&str> = header.split_whitespace().collect();
        if nums.len() != 2 {
            return Err(perr(hl, "header must be `n m`"));
        }
        let n: usize = nums[0].parse().map_err(|_| perr(hl, "bad vertex count"))?;
        let m: usize = nums[1].parse().map_err(|_| perr(hl, "bad edge count"))?;
        let mut edges = Vec::with_capacity(m);
        for (ln, l) in lines {
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 2 {
                return Err(perr(ln, "edge line must be `u v`"));
            }
            let u: usize = t[0].parse().map_err(|_| perr(ln, "bad endpoint"))?;
            let v: usize = t[1].parse().map_err(|_| perr(ln, "bad endpoint"))?;
            if u >= v {
                return Err(perr(ln, "edges must satisfy u < v"));
            }
            edges.push((u, v));
        }
        if edges.len() != m {
            return Err(perr(hl, &format!("header announces {m} edges, found {}", edges.len())));
        }
        Graph::new(n, &edges)
    }

    pub fn to_edge_list(&self) -> String {
        let mut s = format!("{} {}\n", self.n, self.edges.len());
        for (a, b) in &self.edges {
            s.push_str(&format!("{a} {b}\n"));
        }
        s
    }
}

/// A graph together with an arrival ordering, youngest vertex first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderedGraph {
    pub graph: Graph,
    pub ordering: Vec<usize>,
}

impl OrderedGraph {
    pub fn new(graph: Graph, ordering: Vec<usize>) -> OrderedGraph {
        let mut seen = vec![false; graph.vertex_count()];
        assert_eq!(ordering.len(), graph.vertex_count(), "ordering must cover all vertices");
        for &v in &ordering {
            assert!(v < seen.len() && !seen[v], "ordering is not a permutation");
            seen[v] = true;
        }
        OrderedGraph { graph, ordering }
    }

    /// The ordering `0, 1, ..., n-1` (vertex 0 youngest).
    pub fn positional(graph: Graph) -> OrderedGraph {
        let ordering = (0..graph.vertex_count()).collect();
        OrderedGraph { graph, ordering }
    }

    /// Relabel so that vertex `i` is the vertex at position `i`.
    pub fn to_positional(&self) -> Graph {
        let mut pos = vec![0; self.ordering.len()];
        for (i, &v) in self.ordering.iter().enumerate() {
            pos[v] = i;
        }
        let mut edges: Vec<(usize, usize)> =
            self.graph.edges().iter().map(|&(a, b)| (pos[a].min(pos[b]), pos[a].max(pos[b]))).collect();
        edges.sort();
        Graph { n: self.graph.n, edges }
    }

    /// Remove the youngest vertex.
    pub fn parent(&self) -> Option<OrderedGraph> {
        if self.ordering.len() <= 1 {
            return None;
        }
        let g = self.to_positional();
        Some(OrderedGraph::positional(remove_youngest(&g)))
    }
}

/// Positional graph without its position-0 vertex (positions shift down).
pub(crate) fn remove_youngest(g: &Graph) -> Graph {
    let edges = g.edges.iter().filter(|&&(a, _)| a != 0).map(|&(a, b)| (a - 1, b - 1)).collect();
    Graph { n: g.n - 1, edges }
}

/// Byte string identifying an ordered-isomorphism class.
///
/// An order-preserving bijection between totally ordered vertex sets is
/// unique, so relabelling by position is already canonical.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalKey(pub Vec<u8>);

pub fn canonical_key(g: &OrderedGraph) -> CanonicalKey {
    positional_key(&g.to_positional())
}

pub(crate) fn positional_key(p: &Graph) -> CanonicalKey {
    let n = p.n;
    assert!(n < 256, "canonical keys support fewer than 256 vertices");
    let mut bytes = vec![n as u8];
    let mut acc = 0u8;
    let mut nbits = 0;
    for a in 0..n {
        for b in a + 1..n {
            if p.has_edge(a, b) {
                acc |= 1 << nbits;
            }
            nbits += 1;
            if nbits == 8 {
                bytes.push(acc);
                acc = 0;
                nbits = 0;
            }
        }
    }
    if nbits > 0 {
        bytes.push(acc);
    }
    CanonicalKey(bytes)
}

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// One ordered class of `S(F)`, stored positionally (vertex 0 youngest).
#[derive(Clone, Debug)]
pub struct ClassInfo {
    pub key: CanonicalKey,
    pub graph: Graph,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// `ancestors[i]` is the class after deleting the `i` youngest vertices.
    pub ancestors: Vec<usize>,
}

impl ClassInfo {
    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }
}

/// The family `S(F)` with its tree structure.
#[derive(Clone, Debug)]
pub struct SubgraphFamily {
    pub f: Graph,
    pub induced: bool,
    pub classes: Vec<ClassInfo>,
    index: HashMap<CanonicalKey, usize>,
}

impl SubgraphFamily {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn lookup(&self, key: &CanonicalKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn lookup_graph(&self, positional: &Graph) -> Option<usize> {
        self.lookup(&positional_key(positional))
    }

    /// Classes isomorphic to `F` itself, i.e. `(F, π)` for some ordering.
    pub fn is_full(&self, c: usize) -> bool {
        let g = &self.classes[c].graph;
        g.vertex_count() == self.f.vertex_count() && g.edge_count() == self.f.edge_count()
    }

    pub fn full_classes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&c| self.is_full(c)).collect()
    }
}

/// Enumerate `S(F)`: all ordered classes of subgraphs (or, with `induced`,
/// induced subgraphs) of `F` with at least one vertex.
pub fn enumerate_ordered_subgraphs(f: &Graph, induced: bool) -> Result<SubgraphFamily, GraphError> {
    if f.edge_count() == 0 {
        return Err(GraphError::NoEdges);
    }
    if f.vertex_count() > 10 {
        return Err(GraphError::TooLarge(f.vertex_count(), 10));
    }
    let fmask = f.adjacency_masks();
    let k1 = Graph::empty(1);
    let mut classes =
        vec![ClassInfo { key: positional_key(&k1), graph: k1, parent: None, children: Vec::new(), ancestors: vec![0] }];
    let mut index = HashMap::new();
    index.insert(classes[0].key.clone(), 0);
    let mut level = vec![0usize];
    while !level.is_empty() {
        let mut next: Vec<(CanonicalKey, Graph, usize)> = Vec::new();
        let mut seen = HashMap::new();
        for &c in &level {
            let g = &classes[c].graph;
            let n = g.vertex_count();
            if n == f.vertex_count() {
                continue;
            }
            for nb in 0u32..(1u32 << n) {
                let mut edges: Vec<(usize, usize)> = g.edges().iter().map(|&(a, b)| (a + 1, b + 1)).collect();
                for u in 0..n {
                    if nb >> u & 1 == 1 {
                        edges.push((0, u + 1));
                    }
                }
                edges.sort();
                let cand = Graph { n: n + 1, edges };
                let key = positional_key(&cand);
                if seen.contains_key(&key) || !embeds(&cand, &fmask, f.vertex_count(), induced) {
                    continue;
                }
                seen.insert(key.clone(), ());
                next.push((key, cand, c));
            }
        }
        next.sort_by(|a, b| a.0.cmp(&b.0));
        level.clear();
        for (key, graph, parent) in next {
            let id = classes.len();
            let mut ancestors = vec![id];
            ancestors.extend(classes[parent].ancestors.iter().copied());
            classes[parent].children.push(id);
            index.insert(key.clone(), id);
            classes.push(ClassInfo { key, graph, parent: Some(parent), children: Vec::new(), ancestors });
            level.push(id);
        }
    }
    Ok(SubgraphFamily { f: f.clone(), induced, classes, index })
}

/// Does `h` embed into the graph with adjacency masks `fmask` (as a
/// subgraph, or as an induced subgraph)?
fn embeds(h: &Graph, fmask: &[u32], fn_: usize, induced: bool) -> bool {
    let hm = h.adjacency_masks();
    let n = h.vertex_count();
    let mut map = vec![usize::MAX; n];
    #[allow(clippy::too_many_arguments)]
    fn rec(i: usize, n: usize, hm: &[u32], fmask: &[u32], fn_: usize, induced: bool, map: &mut Vec<usize>, used: u32) -> bool {
        if i == n {
            return true;
        }
        for x in 0..fn_ {
            if used >> x & 1 == 1 {
                continue;
            }
            let ok = (0..i).all(|j| {
                let he = hm[i] >> j & 1 == 1;
                let fe = fmask[x] >> map[j] & 1 == 1;
                if induced {
                    he == fe
                } else {
                    !he || fe
                }
            });
            if ok {
                map[i] = x;
                if rec(i + 1, n, hm, fmask, fn_, induced, map, used | 1 << x) {
                    return true;
                }
            }
        }
        false
    }
    rec(0, n, &hm, fmask, fn_, induced, &mut map, 0)
}

/// `C(H, F)`: members of `S(F)` outside `members` whose parent is inside;
/// `{K₁}` when `members` is empty. `members` is indexed by class id.
pub fn children(members: &[bool], family: &SubgraphFamily) -> Vec<usize> {
    debug_assert_eq!(members.len(), family.len());
    if !members.iter().any(|&m| m) {
        return vec![family.root()];
    }
    (0..family.len()).filter(|&c| !members[c] && family.classes[c].parent.is_some_and(|p| members[p])).collect()
}

/// Number of automorphisms, by brute force over all permutations.
pub fn automorphism_count(g: &Graph) -> usize {
    let n = g.vertex_count();
    let adj = g.adjacency_masks();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut count = 0;
    fn rec(i: usize, perm: &mut Vec<usize>, adj: &[u32], count: &mut usize) {
        let n = perm.len();
        if i == n {
            *count += 1;
            return;
        }
        for k in i..n {
            perm.swap(i, k);
            let ok = (0..i).all(|j| (adj[i] >> j & 1) == (adj[perm[i]] >> perm[j] & 1));
            if ok {
                rec(i + 1, perm, adj, count);
            }
            perm.swap(i, k);
        }
    }
    rec(0, &mut perm, &adj, &mut count);
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_roundtrip() {
        let g = Graph::parse_edge_list("# triangle\n3 3\n0 1\n0 2\n# c\n1 2\n").unwrap();
        assert_eq!(g, Graph::complete(3));
        assert_eq!(Graph::parse_edge_list(&g.to_edge_list()).unwrap(), g);
        assert!(Graph::parse_edge_list("3 1\n1 0\n").is_err());
        assert!(Graph::parse_edge_list("3 2\n0 1\n").is_err());
        assert!(Graph::parse_edge_list("2 1\n0 5\n").is_err());
        assert!(Graph::parse_edge_list("3 2\n0 1\n0 1\n").is_err());
    }

    #[test]
    fn family_sizes() {
        assert_eq!(enumerate_ordered_subgraphs(&Graph::complete(2), false).unwrap().len(), 3);
        assert_eq!(enumerate_ordered_subgraphs(&Graph::complete(3), false).unwrap().len(), 11);
        assert_eq!(enumerate_ordered_subgraphs(&Graph::path(4), false).unwrap().len(), 44);
        assert_eq!(enumerate_ordered_subgraphs(&Graph::path(4), true).unwrap().len(), 21);
        assert_eq!(enumerate_ordered_subgraphs(&Graph::empty(3), false).unwrap_err(), GraphError::NoEdges);
    }

    #[test]
    fn children_basics() {
        let fam = enumerate_ordered_subgraphs(&Graph::complete(3), false).unwrap();
        let none = vec![false; fam.len()];
        assert_eq!(children(&none, &fam), vec![0]);
        let mut k1 = none.clone();
        k1[0] = true;
        let ch = children(&k1, &fam);
        assert_eq!(ch.len(), 2);
        assert!(ch.iter().all(|&c| fam.classes[c].vertex_count() == 2));
        assert!(children(&vec![true; fam.len()], &fam).is_empty());
    }

    #[test]
    fn p3_orderings_distinct() {
        let p3 = Graph::path(3);
        let mid_young = OrderedGraph::new(p3.clone(), vec![1, 0, 2]);
        let end_young = OrderedGraph::new(p3.clone(), vec![0, 1, 2]);
        let end_young2 = OrderedGraph::new(p3, vec![2, 1, 0]);
        assert_ne!(canonical_key(&mid_young), canonical_key(&end_young));
        assert_eq!(canonical_key(&end_young), canonical_key(&end_young2));
    }
}
