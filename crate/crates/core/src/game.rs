//! The deterministic avoidance game: legality under a density or generalized
//! restriction, monochromatic-copy detection, and a bounded minimax oracle.

use std::collections::HashMap;

use crate::board::{find_copy_through, Board};
use crate::flow::{min_mu_containing, min_mu_nonempty};
use crate::graph::Graph;
use crate::rational::Rational;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Restriction {
    /// Every subgraph satisfies `e(H)/v(H) ≤ d`.
    Density(Rational),
    /// Every subgraph satisfies `v(H) - e(H)·θ ≥ β`.
    Generalized { theta: Rational, beta: Rational },
}

impl Restriction {
    /// The equivalent `(θ, β)`: density `d` is `(1/d, 0)`.
    pub fn theta_beta(&self) -> (Rational, Rational) {
        match self {
            Restriction::Density(d) => (d.recip(), Rational::zero()),
            Restriction::Generalized { theta, beta } => (theta.clone(), beta.clone()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GameConfig {
    pub f: Graph,
    pub r: usize,
    pub restriction: Restriction,
}

impl GameConfig {
    pub fn new(f: Graph, r: usize, restriction: Restriction) -> Result<GameConfig> {
        if r == 0 {
            return Err(Error::Invalid("need at least one color".into()));
        }
        let ok = match &restriction {
            Restriction::Density(d) => d.is_positive(),
            Restriction::Generalized { theta, .. } => theta.is_positive(),
        };
        if !ok {
            return Err(Error::Invalid("density and theta must be positive".into()));
        }
        if f.edge_count() == 0 {
            return Err(Error::Invalid("F needs at least one edge".into()));
        }
        Ok(GameConfig { f, r, restriction })
    }
}

fn board_edges(board: &Board) -> Vec<(usize, usize)> {
    board.graph().edges().to_vec()
}

/// Would presenting a vertex adjacent to `neighbors` keep the board legal?
///
/// Assumes the current board is legal, so only vertex sets containing the new
/// vertex need checking; one min cut with that vertex forced settles it.
pub fn legal(board: &Board, neighbors: &[usize], cfg: &GameConfig) -> bool {
    let n = board.vertex_count();
    assert!(neighbors.iter().all(|&u| u < n), "neighbor out of range");
    let (theta, beta) = cfg.restriction.theta_beta();
    let mut edges = board_edges(board);
    let mut nb = neighbors.to_vec();
    nb.sort_unstable();
    nb.dedup();
    edges.extend(nb.iter().map(|&u| (u, n)));
    let (mu, _) = min_mu_containing(n + 1, &edges, &theta, &[n]);
    mu >= beta
}

/// Does every nonempty vertex set of the board satisfy the restriction?
pub fn legal_from_scratch(board: &Board, cfg: &GameConfig) -> bool {
    let (theta, beta) = cfg.restriction.theta_beta();
    match min_mu_nonempty(board.vertex_count(), &board_edges(board), &theta) {
        None => true,
        Some((mu, _)) => mu >= beta,
    }
}

/// A monochromatic copy of `F` through vertex `v` (in `v`'s color).
pub fn detect_mono_at(board: &Board, f: &Graph, v: usize) -> Option<Vec<usize>> {
    let c = board.color(v)?;
    find_copy_through(board, f, c, v)
}

/// Any monochromatic copy of `F` on the board.
pub fn detect_mono(board: &Board, f: &Graph) -> Option<Vec<usize>> {
    (0..board.vertex_count()).find_map(|v| detect_mono_at(board, f, v))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Winner {
    Builder,
    Painter,
}

#[derive(Clone, Debug)]
pub struct OracleOptions {
    pub node_budget: u64,
    /// Isomorphism pruning of positions and Builder moves.
    pub prune: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { node_budget: 50_000_000, prune: true }
    }
}

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub winner: Winner,
    /// Steps Builder needs against best defence (when Builder wins).
    pub steps: Option<usize>,
    /// Principal variation: Builder's neighbor set and Painter's reply.
    pub pv: Vec<(Vec<usize>, usize)>,
    pub nodes: u64,
}

/// A small colored board as adjacency bitmasks (at most 16 vertices).
#[derive(Clone, Debug)]
struct Small {
    adj: Vec<u16>,
    col: Vec<u8>,
}

impl Small {
    fn push(&self, nb: u16, c: u8) -> Small {
        let v = self.adj.len();
        let mut adj = self.adj.clone();
        for (u, a) in adj.iter_mut().enumerate() {
            if nb >> u & 1 == 1 {
                *a |= 1 << v;
            }
        }
        adj.push(nb);
        let mut col = self.col.clone();
        col.push(c);
        Small { adj, col }
    }

    fn raw_key(&self) -> Vec<u8> {
        let mut k = vec![self.adj.len() as u8];
        k.extend(&self.col);
        for a in &self.adj {
            k.extend(a.to_le_bytes());
        }
        k
    }
}

/// Equitable refinement of an ordered partition.
fn refine(adj: &[u16], mut cells: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    loop {
        let masks: Vec<u16> = cells.iter().map(|c| c.iter().fold(0u16, |m, &v| m | 1 << v)).collect();
        let mut next = Vec::with_capacity(cells.len());
        for cell in &cells {
            if cell.len() == 1 {
                next.push(cell.clone());
                continue;
            }
            let mut sig: Vec<(Vec<u32>, usize)> =
                cell.iter().map(|&v| (masks.iter().map(|m| (adj[v] & m).count_ones()).collect(), v)).collect();
            sig.sort();
            let mut start = 0;
            for i in 1..=sig.len() {
                if i == sig.len() || sig[i].0 != sig[start].0 {
                    next.push(sig[start..i].iter().map(|s| s.1).collect());
                    start = i;
                }
            }
        }
        if next.len() == cells.len() {
            return next;
        }
        cells = next;
    }
}

fn leaf_key(adj: &[u16], col: &[u8], order: &[usize]) -> Vec<u8> {
    let n = order.len();
    let mut k = Vec::with_capacity(1 + n + n * n / 8 + 1);
    k.push(n as u8);
    k.extend(order.iter().map(|&v| col[v]));
    let (mut acc, mut bits) = (0u8, 0);
    for i in 0..n {
        for j in i + 1..n {
            if adj[order[i]] >> order[j] & 1 == 1 {
                acc |= 1 << bits;
            }
            bits += 1;
            if bits == 8 {
                k.push(acc);
                acc = 0;
                bits = 0;
            }
        }
    }
    if bits > 0 {
        k.push(acc);
    }
    k
}

fn canon_rec(adj: &[u16], col: &[u8], cells: Vec<Vec<usize>>, best: &mut Option<Vec<u8>>) {
    let cells = refine(adj, cells);
    let Some(ci) = cells.iter().position(|c| c.len() > 1) else {
        let order: Vec<usize> = cells.iter().map(|c| c[0]).collect();
        let key = leaf_key(adj, col, &order);
        if best.as_ref().is_none_or(|b| key < *b) {
            *best = Some(key);
        }
        return;
    };
    let mut tried: Vec<usize> = Vec::new();
    for &u in &cells[ci] {
        // swapping twins is an automorphism fixing everything individualised so far
        let twin = tried.iter().any(|&x| adj[u] & !(1 << x) == adj[x] & !(1 << u));
        if twin {
            continue;
        }
        tried.push(u);
        let mut next = cells.clone();
        let rest: Vec<usize> = cells[ci].iter().copied().filter(|&x| x != u).collect();
        next.splice(ci..=ci, [vec![u], rest]);
        canon_rec(adj, col, next, best);
    }
}

/// Canonical key of a vertex-colored graph, up to isomorphism and (when
/// `perm_colors`) permutation of the first `r` colors.
fn canonical(b: &Small, r: usize, perm_colors: bool) -> Vec<u8> {
    let n = b.adj.len();
    let mut perms: Vec<Vec<u8>> = vec![(0..=r as u8).collect()];
    if perm_colors {
        perms = permutations(r)
            .into_iter()
            .map(|mut p| {
                p.push(r as u8);
                p
            })
            .collect();
    }
    let mut best: Option<Vec<u8>> = None;
    for p in perms {
        let col: Vec<u8> = b.col.iter().map(|&c| p[c as usize]).collect();
        let mut cells: Vec<Vec<usize>> = Vec::new();
        for c in 0..=r as u8 {
            let cell: Vec<usize> = (0..n).filter(|&v| col[v] == c).collect();
            if !cell.is_empty() {
                cells.push(cell);
            }
        }
        if n == 0 {
            return vec![0];
        }
        canon_rec(&b.adj, &col, cells, &mut best);
    }
    best.unwrap()
}

fn permutations(r: usize) -> Vec<Vec<u8>> {
    if r == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(r - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, (r - 1) as u8);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// Backtracking: does a copy of `f` (adjacency masks `fm`) lie inside the
/// vertex set `class` and use vertex `v`?
fn copy_through(adj: &[u16], class: u16, v: usize, fm: &[u32]) -> bool {
    let k = fm.len();
    for anchor in 0..k {
        let mut map = vec![usize::MAX; k];
        map[anchor] = v;
        if extend(adj, class, fm, &mut map, 1 << v) {
            return true;
        }
    }
    false
}

fn extend(adj: &[u16], class: u16, fm: &[u32], map: &mut Vec<usize>, used: u16) -> bool {
    let Some(p) = map.iter().position(|&x| x == usize::MAX) else { return true };
    for u in 0..adj.len() {
        if class >> u & 1 == 0 || used >> u & 1 == 1 {
            continue;
        }
        let ok = (0..fm.len()).all(|q| map[q] == usize::MAX || fm[p] >> q & 1 == 0 || adj[u] >> map[q] & 1 == 1);
        if ok {
            map[p] = u;
            if extend(adj, class, fm, map, used | 1 << u) {
                return true;
            }
            map[p] = usize::MAX;
        }
    }
    false
}

struct Oracle<'a> {
    cfg: &'a GameConfig,
    opts: &'a OracleOptions,
    fm: Vec<u32>,
    /// `(q, p)` of `θ = p/q` and `(bn, bd)` of `β`.
    theta: (i128, i128),
    beta: (i128, i128),
    /// key -> (largest k known lost, smallest k known won)
    memo: HashMap<Vec<u8>, (u8, u8)>,
    nodes: u64,
}

impl Oracle<'_> {
    fn key(&self, b: &Small) -> Vec<u8> {
        if self.opts.prune {
            canonical(b, self.cfg.r, true)
        } else {
            b.raw_key()
        }
    }

    /// Every vertex set containing the newest vertex satisfies the restriction.
    fn legal_new(&self, adj: &[u16]) -> bool {
        let n = adj.len();
        let v = n - 1;
        let (q, p) = self.theta;
        let (bn, bd) = self.beta;
        for m in 0u32..1 << v {
            let s = m as u16 | 1 << v;
            let e: u32 = (0..n).filter(|&x| s >> x & 1 == 1).map(|x| (adj[x] & s).count_ones()).sum::<u32>() / 2;
            // |S| - e·p/q >= bn/bd
            if (s.count_ones() as i128 * q - e as i128 * p) * bd < bn * q {
                return false;
            }
        }
        true
    }

    /// Builder moves from `b`: neighbor masks, legal and (when pruning)
    /// pairwise non-isomorphic.
    fn moves(&self, b: &Small) -> Vec<u16> {
        let n = b.adj.len();
        let mut out = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for nb in 0u16..1 << n {
            let nb2 = b.push(nb, self.cfg.r as u8);
            if !self.legal_new(&nb2.adj) {
                continue;
            }
            if self.opts.prune && !seen.insert(canonical(&nb2, self.cfg.r, true)) {
                continue;
            }
            out.push(nb);
        }
        out
    }

    fn mono(&self, b: &Small) -> bool {
        let v = b.adj.len() - 1;
        let c = b.col[v];
        let class = (0..b.adj.len()).filter(|&u| b.col[u] == c).fold(0u16, |m, u| m | 1 << u);
        copy_through(&b.adj, class, v, &self.fm)
    }

    fn wins(&mut self, b: &Small, k: usize) -> Result<bool> {
        if k == 0 {
            return Ok(false);
        }
        let key = self.key(b);
        if let Some(&(lost, won)) = self.memo.get(&key) {
            if k as u8 <= lost {
                return Ok(false);
            }
            if k as u8 >= won {
                return Ok(true);
            }
        }
        self.nodes += 1;
        if self.nodes > self.opts.node_budget {
            return Err(Error::Resource(format!("oracle node budget {} exhausted", self.opts.node_budget)));
        }
        let mut result = false;
        'moves: for nb in self.moves(b) {
            for c in 0..self.cfg.r as u8 {
                let child = b.push(nb, c);
                if self.mono(&child) {
                    continue;
                }
                if !self.wins(&child, k - 1)? {
                    continue 'moves;
                }
            }
            result = true;
            break;
        }
        let e = self.memo.entry(key).or_insert((0, u8::MAX));
        if result {
            e.1 = e.1.min(k as u8);
        } else {
            e.0 = e.0.max(k as u8);
        }
        Ok(result)
    }

    /// Principal variation of a won position in exactly `k` steps: Builder's
    /// first winning move, Painter's longest-resisting reply.
    fn pv(&mut self, b: &Small, k: usize, out: &mut Vec<(Vec<usize>, usize)>) -> Result<()> {
        if k == 0 {
            return Ok(());
        }
        'moves: for nb in self.moves(b) {
            let mut worst: Option<(usize, u8)> = None;
            for c in 0..self.cfg.r as u8 {
                let child = b.push(nb, c);
                let need = if self.mono(&child) {
                    0
                } else {
                    match (1..k).find(|&t| self.wins(&child, t).unwrap_or(false)) {
                        Some(t) => t,
                        None => continue 'moves,
                    }
                };
                if worst.is_none_or(|w| need > w.0) {
                    worst = Some((need, c));
                }
            }
            let (need, c) = worst.expect("at least one color");
            let nbs = (0..b.adj.len()).filter(|&u| nb >> u & 1 == 1).collect();
            out.push((nbs, c as usize));
            let child = b.push(nb, c);
            return self.pv(&child, need, out);
        }
        Ok(())
    }
}

fn small_fraction(x: &Rational) -> Result<(i128, i128)> {
    let (p, q) = x.to_i64_pair().ok_or_else(|| Error::Invalid(format!("{x} is too large for the oracle")))?;
    Ok((p as i128, q as i128))
}

/// Minimax with iterative deepening: can Builder force a monochromatic `F`
/// within `max_steps` vertices?
pub fn solve_game_exhaustive(cfg: &GameConfig, max_steps: usize, opts: &OracleOptions) -> Result<OracleResult> {
    if max_steps > 12 {
        return Err(Error::Invalid(format!("max steps {max_steps} exceeds the oracle limit of 12")));
    }
    let (theta, beta) = cfg.restriction.theta_beta();
    let (tp, tq) = small_fraction(&theta)?;
    let beta = small_fraction(&beta)?;
    let mut o = Oracle { cfg, opts, fm: cfg.f.adjacency_masks(), theta: (tq, tp), beta, memo: HashMap::new(), nodes: 0 };
    let empty = Small { adj: vec![], col: vec![] };
    for k in 1..=max_steps {
        if o.wins(&empty, k)? {
            let mut pv = Vec::new();
            o.pv(&empty, k, &mut pv)?;
            return Ok(OracleResult { winner: Winner::Builder, steps: Some(k), pv, nodes: o.nodes });
        }
    }
    Ok(OracleResult { winner: Winner::Painter, steps: None, pv: Vec::new(), nodes: o.nodes })
}

/// The smallest density `e/v` (`v ≤ max_steps`, `1 ≤ e ≤ C(v,2)`) at which
/// Builder wins within `max_steps`; `None` if Builder never wins.
pub fn min_winning_density(f: &Graph, r: usize, max_steps: usize, opts: &OracleOptions) -> Result<Option<Rational>> {
    let mut cands: Vec<Rational> =
        (1..=max_steps as i64).flat_map(|v| (1..=v * (v - 1) / 2).map(move |e| Rational::new(e, v))).collect();
    cands.sort();
    cands.dedup();
    let wins = |d: &Rational| -> Result<bool> {
        let cfg = GameConfig::new(f.clone(), r, Restriction::Density(d.clone()))?;
        Ok(solve_game_exhaustive(&cfg, max_steps, opts)?.winner == Winner::Builder)
    };
    // Builder's options only grow with d, so the win set is an upper segment.
    let (mut lo, mut hi) = (0usize, cands.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        if wins(&cands[mid])? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(cands.get(lo).cloned())
}
