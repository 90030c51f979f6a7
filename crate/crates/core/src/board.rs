//! Colored boards that grow one vertex at a time, and ordered-copy search.
//!
//! Vertices are numbered by arrival (0 is the oldest), so "younger" means
//! "larger index". Pattern graphs are positional: pattern vertex 0 is the
//! youngest.

use crate::graph::Graph;

/// An evolving vertex-colored graph. Only the newest vertex may be pending
/// (uncolored).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Board {
    colors_n: usize,
    adj: Vec<Vec<usize>>,
    colors: Vec<Option<usize>>,
    by_color: Vec<Vec<usize>>,
    edge_count: usize,
}

impl Board {
    pub fn new(r: usize) -> Board {
        Board { colors_n: r, adj: Vec::new(), colors: Vec::new(), by_color: vec![Vec::new(); r], edge_count: 0 }
    }

    pub fn colors(&self) -> usize {
        self.colors_n
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn color(&self, v: usize) -> Option<usize> {
        self.colors[v]
    }

    /// Vertices of color `c`, ascending.
    pub fn color_class(&self, c: usize) -> &[usize] {
        &self.by_color[c]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&b).is_ok()
    }

    pub fn pending(&self) -> Option<usize> {
        match self.colors.last() {
            Some(None) => Some(self.colors.len() - 1),
            _ => None,
        }
    }

    /// Add a new (pending) vertex joined to `neighbors`; returns its index.
    pub fn add_vertex(&mut self, neighbors: &[usize]) -> usize {
        assert!(self.pending().is_none(), "previous vertex still uncolored");
        let v = self.adj.len();
        let mut nb = neighbors.to_vec();
        nb.sort_unstable();
        nb.dedup();
        for &u in &nb {
            assert!(u < v, "neighbor {u} does not exist");
            self.adj[u].push(v);
        }
        self.edge_count += nb.len();
        self.adj.push(nb);
        self.colors.push(None);
        v
    }

    pub fn set_color(&mut self, v: usize, c: usize) {
        assert!(c < self.colors_n, "color {c} out of range");
        assert!(self.colors[v].is_none(), "vertex {v} already colored");
        self.colors[v] = Some(c);
        let class = &mut self.by_color[c];
        let at = class.partition_point(|&x| x < v);
        class.insert(at, v);
    }

    /// Remove the newest vertex (used by search code to undo a move).
    pub fn pop_vertex(&mut self) {
        let v = self.adj.len() - 1;
        if let Some(c) = self.colors[v] {
            let class = &mut self.by_color[c];
            let at = class.iter().position(|&x| x == v).expect("color class out of sync");
            class.remove(at);
        }
        let nb = self.adj.pop().unwrap();
        for &u in &nb {
            let last = self.adj[u].pop();
            debug_assert_eq!(last, Some(v));
        }
        self.edge_count -= nb.len();
        self.colors.pop();
    }

    /// Board built from a graph with explicit colors; vertex order = arrival.
    pub fn from_graph(g: &Graph, colors: &[usize], r: usize) -> Board {
        let mut b = Board::new(r);
        let n = g.vertex_count();
        let mut back = vec![Vec::new(); n];
        for &(a, c) in g.edges() {
            back[c.max(a)].push(c.min(a));
        }
        for v in 0..n {
            b.add_vertex(&back[v]);
            b.set_color(v, colors[v]);
        }
        b
    }

    /// Underlying uncolored graph.
    pub fn graph(&self) -> Graph {
        let mut edges = Vec::with_capacity(self.edge_count);
        for (v, nb) in self.adj.iter().enumerate() {
            for &u in nb {
                if u < v {
                    edges.push((u, v));
                }
            }
        }
        Graph::new(self.adj.len(), &edges).expect("board graph is simple")
    }

    /// Subboard induced by the ascending vertex list `verts` (keeps colors).
    pub fn induced(&self, verts: &[usize]) -> Board {
        let mut b = Board::new(self.colors_n);
        let pos: std::collections::HashMap<usize, usize> = verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        for &v in verts {
            let nb: Vec<usize> = self.adj[v].iter().filter(|&&u| u < v).filter_map(|u| pos.get(u).copied()).collect();
            let x = b.add_vertex(&nb);
            if let Some(c) = self.colors[v] {
                b.set_color(x, c);
            }
        }
        b
    }

    fn matches(&self, u: usize, color: usize, pinned: usize) -> bool {
        u == pinned || self.colors[u] == Some(color)
    }
}

/// Static search order: start at `start`, then greedily the vertex with most
/// already-placed neighbours.
fn search_order(adj: &[u32], start: usize) -> Vec<usize> {
    let n = adj.len();
    let mut order = vec![start];
    let mut placed = 1u32 << start;
    while order.len() < n {
        let next = (0..n)
            .filter(|&x| placed >> x & 1 == 0)
            .max_by_key(|&x| ((adj[x] & placed).count_ones(), std::cmp::Reverse(x)))
            .unwrap();
        placed |= 1 << next;
        order.push(next);
    }
    order
}

/// Core embedding search. Pattern vertex `anchor` is mapped to `pinned`.
/// With `ordered`, pattern vertex `i` is the `i`-th youngest image.
/// `visit` returns `true` to stop; the function returns whether it stopped.
pub(crate) fn search(
    board: &Board,
    pattern: &Graph,
    color: usize,
    pinned: usize,
    anchor: usize,
    ordered: bool,
    visit: &mut dyn FnMut(&[usize]) -> bool,
) -> bool {
    let n = pattern.vertex_count();
    if n == 0 || n > board.vertex_count() || board.colors[pinned].is_some_and(|c| c != color) {
        return false;
    }
    let adj = pattern.adjacency_masks();
    let order = search_order(&adj, anchor);
    let mut map = vec![usize::MAX; n];
    map[anchor] = pinned;
    rec(board, &adj, color, pinned, ordered, &order, 1, &mut map, visit)
}

#[allow(clippy::too_many_arguments)]
fn rec(
    board: &Board,
    adj: &[u32],
    color: usize,
    pinned: usize,
    ordered: bool,
    order: &[usize],
    depth: usize,
    map: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]) -> bool,
) -> bool {
    if depth == order.len() {
        return visit(map);
    }
    let p = order[depth];
    // admissible index window (lo, hi), both exclusive
    let (mut lo, mut hi) = (None::<usize>, board.vertex_count());
    if ordered {
        for (q, &img) in map.iter().enumerate() {
            if img == usize::MAX {
                continue;
            }
            if q > p {
                lo = Some(lo.map_or(img, |l: usize| l.max(img)));
            } else {
                hi = hi.min(img);
            }
        }
    }
    let placed_nbrs: Vec<usize> = order[..depth].iter().copied().filter(|&q| adj[p] >> q & 1 == 1).collect();
    let start = lo.map_or(0, |l| l + 1);
    let ok = |u: usize, map: &[usize]| -> bool {
        u >= start
            && u < hi
            && board.matches(u, color, pinned)
            && !map.contains(&u)
            && placed_nbrs.iter().all(|&q| board.has_edge(u, map[q]))
    };
    if let Some(&q0) = placed_nbrs.first() {
        let nb = board.neighbors(map[q0]);
        let from = nb.partition_point(|&x| x < start);
        for &u in &nb[from..] {
            if u >= hi {
                break;
            }
            if ok(u, map) {
                map[p] = u;
                if rec(board, adj, color, pinned, ordered, order, depth + 1, map, visit) {
                    return true;
                }
                map[p] = usize::MAX;
            }
        }
    } else {
        let class = board.color_class(color);
        let from = class.partition_point(|&x| x < start);
        let extra = (pinned >= start && pinned < hi && board.colors[pinned].is_none()).then_some(pinned);
        for u in class[from..].iter().copied().take_while(|&u| u < hi).chain(extra) {
            if ok(u, map) {
                map[p] = u;
                if rec(board, adj, color, pinned, ordered, order, depth + 1, map, visit) {
                    return true;
                }
                map[p] = usize::MAX;
            }
        }
    }
    false
}

/// All embeddings of the positional ordered pattern whose youngest vertex is
/// `youngest`, with all images in `color` (an uncolored `youngest` counts as
/// `color`) and arrival order matching the pattern order.
pub fn copies_with_youngest(board: &Board, pattern: &Graph, color: usize, youngest: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    search(board, pattern, color, youngest, 0, true, &mut |m| {
        out.push(m.to_vec());
        false
    });
    out
}

/// All embeddings of an ordered pattern anchored at the newest board vertex.
pub fn find_ordered_copies(board: &Board, pattern: &Graph, color: usize, pinned: usize) -> Vec<Vec<usize>> {
    assert_eq!(pinned + 1, board.vertex_count(), "pinned vertex must be the newest");
    copies_with_youngest(board, pattern, color, pinned)
}

/// Whether some ordered copy with youngest vertex `pinned` exists.
pub fn has_ordered_copy(board: &Board, pattern: &Graph, color: usize, pinned: usize) -> bool {
    search(board, pattern, color, pinned, 0, true, &mut |_| true)
}

/// A copy of `f` in `color` that uses `pinned` (any position), if one exists.
pub fn find_copy_through(board: &Board, f: &Graph, color: usize, pinned: usize) -> Option<Vec<usize>> {
    let mut found = None;
    for anchor in 0..f.vertex_count() {
        let stop = search(board, f, color, pinned, anchor, false, &mut |m| {
            found = Some(m.to_vec());
            true
        });
        if stop {
            break;
        }
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mono_triangle() -> Board {
        let mut b = Board::new(2);
        b.add_vertex(&[]);
        b.set_color(0, 0);
        b.add_vertex(&[0]);
        b.set_color(1, 0);
        b.add_vertex(&[0, 1]);
        b
    }

    #[test]
    fn k1_single_embedding() {
        let b = mono_triangle();
        assert_eq!(find_ordered_copies(&b, &Graph::empty(1), 1, 2), vec![vec![2]]);
    }

    #[test]
    fn triangle_found() {
        let b = mono_triangle();
        assert_eq!(find_ordered_copies(&b, &Graph::complete(3), 0, 2), vec![vec![2, 1, 0]]);
        assert!(find_ordered_copies(&b, &Graph::complete(3), 1, 2).is_empty());
        assert!(find_copy_through(&b, &Graph::complete(3), 0, 2).is_some());
    }

    #[test]
    fn too_few_vertices() {
        let mut b = Board::new(2);
        b.add_vertex(&[]);
        assert!(find_ordered_copies(&b, &Graph::empty(2), 0, 0).is_empty());
    }

    #[test]
    fn order_constraint_respected() {
        // path 0-1-2 where 2 is the newest; ordered P3 with the middle youngest
        // must not be found at pinned 2 (2 is an endpoint)
        let mut b = Board::new(1);
        b.add_vertex(&[]);
        b.set_color(0, 0);
        b.add_vertex(&[0]);
        b.set_color(1, 0);
        b.add_vertex(&[1]);
        let mid_young = Graph::new(3, &[(0, 1), (0, 2)]).unwrap();
        let end_young = Graph::new(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(find_ordered_copies(&b, &mid_young, 0, 2).is_empty());
        assert_eq!(find_ordered_copies(&b, &end_young, 0, 2), vec![vec![2, 1, 0]]);
        // isolated youngest + older edge
        let iso_young = Graph::new(3, &[(1, 2)]).unwrap();
        assert_eq!(find_ordered_copies(&b, &iso_young, 0, 2), vec![vec![2, 1, 0]]);
    }

    #[test]
    fn pop_restores() {
        let mut b = mono_triangle();
        let before = b.clone();
        b.set_color(2, 1);
        b.add_vertex(&[0, 2]);
        b.pop_vertex();
        b.pop_vertex();
        b.add_vertex(&[0, 1]);
        assert_eq!(b, before);
    }
}
