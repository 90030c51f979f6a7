//! Builder's side: the abstract game driven by per-color lookaheads of the
//! weight computation, the dominating-color search, and the pigeonhole
//! translation of small abstract strategy trees into concrete plans.

use std::collections::HashMap;

use crate::board::Board;
use crate::flow::min_mu_containing;
use crate::game::detect_mono;
use crate::graph::Graph;
use crate::painter::ColoringStrategy;
use crate::rational::Rational;
use crate::weights::{partner_position, Engine, RoundTrace, Variant, WeightState};
use crate::{Error, Result};

/// A fully colored graph whose vertices are numbered in arrival order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColoredGraph {
    pub graph: Graph,
    pub colors: Vec<usize>,
    /// Construction step at which each vertex was created.
    pub stamps: Vec<usize>,
}

impl ColoredGraph {
    pub fn board(&self, r: usize) -> Board {
        Board::from_graph(&self.graph, &self.colors, r)
    }
}

/// Index set of reused list entries plus the attachment of the new vertex
/// (vertices of the disjoint union, numbered as in the resulting graph).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AbstractMove {
    pub uses: Vec<usize>,
    pub attach: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct ListEntry {
    pub graph: ColoredGraph,
    /// Ordered class of the central copy and its color.
    pub class: usize,
    pub color: usize,
    /// Vertex at each position of the central copy (position 0 youngest).
    pub central: Vec<usize>,
    pub made_by: AbstractMove,
    pub round: usize,
}

#[derive(Clone, Debug, Default)]
pub struct AbstractList {
    pub entries: Vec<ListEntry>,
}

/// A listed graph together with the positions of a central copy inside it;
/// the copy may have been built in a different order than its class.
type Handle = (usize, Vec<usize>);

#[derive(Clone, Debug)]
pub struct SessionOutcome {
    pub list: AbstractList,
    /// Colors appended round by round.
    pub alpha: Vec<usize>,
    pub steps: usize,
    pub rounds: usize,
    /// Entry holding the monochromatic `F`.
    pub winning_entry: usize,
    pub step_bound: u128,
    /// Largest product `|C_1^{i,j_1}| ⋯ |C_r^{i,j_r}|` seen.
    pub max_product: usize,
    /// Smallest `μ_θ` over vertex sets containing a newly added vertex.
    pub min_mu: Rational,
    /// Steps where `μ_θ` fell below `1 + Σ_s d_s^i` or below zero.
    pub legality_violations: Vec<String>,
}

/// `r² · |S(F)|^{r+2}`.
pub fn step_bound(engine: &Engine) -> u128 {
    let r = engine.colors() as u128;
    let s = engine.family().len() as u128;
    r.saturating_mul(r).saturating_mul(s.saturating_pow(engine.colors() as u32 + 2))
}

/// Lowest color `σ` such that every `x ∈ X_σ` has companions with
/// `f(x_1, …, x_r) = σ`. `f` is indexed by tuples of positions.
pub fn find_dominating_color(dims: &[usize], f: &dyn Fn(&[usize]) -> usize) -> usize {
    let r = dims.len();
    assert!(r >= 1 && dims.iter().all(|&d| d > 0), "all sets must be nonempty");
    let mut covered: Vec<Vec<bool>> = dims.iter().map(|&d| vec![false; d]).collect();
    for_each_tuple(dims, &mut |t| {
        let c = f(t);
        assert!(c < r, "coloring out of range");
        covered[c][t[c]] = true;
    });
    let sigma = (0..r).find(|&s| covered[s].iter().all(|&b| b)).expect("a dominating color always exists");
    debug_assert!(is_dominating(dims, f, sigma));
    sigma
}

/// Direct check of the defining property, one `x_σ` at a time.
pub fn is_dominating(dims: &[usize], f: &dyn Fn(&[usize]) -> usize, sigma: usize) -> bool {
    (0..dims[sigma]).all(|x| {
        let mut found = false;
        let mut sub = dims.to_vec();
        sub[sigma] = 1;
        for_each_tuple(&sub, &mut |t| {
            if !found {
                let mut t = t.to_vec();
                t[sigma] = x;
                found = f(&t) == sigma;
            }
        });
        found
    })
}

fn for_each_tuple(dims: &[usize], f: &mut dyn FnMut(&[usize])) {
    if dims.contains(&0) {
        return;
    }
    let mut t = vec![0; dims.len()];
    loop {
        f(&t);
        let mut i = dims.len();
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            t[i] += 1;
            if t[i] < dims[i] {
                break;
            }
            t[i] = 0;
        }
    }
}

/// Disjoint union of the given entries, vertices merged by creation step.
/// Returns the union and, per part, the map old vertex → new vertex.
fn disjoint_union(list: &AbstractList, parts: &[usize]) -> (ColoredGraph, Vec<Vec<usize>>) {
    let mut all: Vec<(usize, usize, usize)> = Vec::new();
    for (k, &e) in parts.iter().enumerate() {
        let g = &list.entries[e].graph;
        all.extend((0..g.colors.len()).map(|x| (g.stamps[x], k, x)));
    }
    all.sort_unstable();
    let mut maps: Vec<Vec<usize>> = parts.iter().map(|&e| vec![0; list.entries[e].graph.colors.len()]).collect();
    let mut colors = Vec::with_capacity(all.len());
    let mut stamps = Vec::with_capacity(all.len());
    for (new, &(st, k, x)) in all.iter().enumerate() {
        maps[k][x] = new;
        colors.push(list.entries[parts[k]].graph.colors[x]);
        stamps.push(st);
    }
    let mut edges = Vec::new();
    for (k, &e) in parts.iter().enumerate() {
        for &(a, b) in list.entries[e].graph.graph.edges() {
            let (x, y) = (maps[k][a], maps[k][b]);
            edges.push((x.min(y), x.max(y)));
        }
    }
    let graph = Graph::new(all.len(), &edges).expect("disjoint union is simple");
    (ColoredGraph { graph, colors, stamps }, maps)
}

struct Session<'a> {
    engine: &'a Engine,
    list: AbstractList,
    gmap: Vec<HashMap<usize, Handle>>,
    steps: usize,
    bound: u128,
    max_product: usize,
    min_mu: Option<Rational>,
    violations: Vec<String>,
}

impl Session<'_> {
    /// One construction step for the tuple `hs` (a class per color).
    fn construct(
        &mut self,
        hs: &[usize],
        round: usize,
        mu_floor: &Rational,
        painter: &mut dyn ColoringStrategy,
    ) -> Result<usize> {
        let fam = self.engine.family();
        let r = self.engine.colors();
        let mut parts = Vec::new();
        let mut part_of = vec![None; r];
        for (s, &h) in hs.iter().enumerate() {
            if let Some(p) = fam.classes[h].parent {
                let Some((e, _)) = self.gmap[s].get(&p) else {
                    return Err(Error::Invariant(format!(
                        "round {round}: no listed graph for the parent of class {h} in color {}",
                        s + 1
                    )));
                };
                part_of[s] = Some(parts.len());
                parts.push(*e);
            }
        }
        let (mut g, maps) = disjoint_union(&self.list, &parts);
        let v = g.colors.len();
        // per color, the central copy of H_s minus its youngest vertex, renumbered
        let mut centrals: Vec<Vec<usize>> = vec![Vec::new(); r];
        let mut attach = Vec::new();
        for s in 0..r {
            let Some(k) = part_of[s] else { continue };
            let p = fam.classes[hs[s]].parent.expect("part only for non-roots");
            let central: Vec<usize> = self.gmap[s][&p].1.iter().map(|&x| maps[k][x]).collect();
            if central.iter().any(|&x| g.colors[x] != s) {
                return Err(Error::Invariant(format!("central copy in color {} is not monochromatic", s + 1)));
            }
            for &(a, b) in fam.classes[hs[s]].graph.edges() {
                if a == 0 {
                    attach.push(central[b - 1]);
                }
            }
            centrals[s] = central;
        }
        attach.sort_unstable();
        attach.dedup();
        let mut board = g.board(r);
        board.add_vertex(&attach);
        painter.observe_move(&parts);
        let color = painter.choose(&board)?;
        if color >= r {
            return Err(Error::Invalid(format!("painter chose color {}", color + 1)));
        }
        self.steps += 1;
        if self.steps as u128 > self.bound {
            return Err(Error::Invariant(format!("step bound {} exceeded", self.bound)));
        }
        let mut edges = g.graph.edges().to_vec();
        edges.extend(attach.iter().map(|&u| (u, v)));
        g.graph = Graph::new(v + 1, &edges).expect("new vertex adds simple edges");
        g.colors.push(color);
        g.stamps.push(self.steps);
        let (mu, _) = min_mu_containing(v + 1, &edges, self.engine.theta(), &[v]);
        if mu < *mu_floor || mu.is_negative() {
            self.violations.push(format!("step {}: mu = {mu} below {mu_floor}", self.steps));
        }
        if self.min_mu.as_ref().is_none_or(|m| mu < *m) {
            self.min_mu = Some(mu);
        }
        let mut central = vec![v];
        central.extend(centrals[color].iter().copied());
        let uses = parts.clone();
        self.list.entries.push(ListEntry {
            graph: g,
            class: hs[color],
            color,
            central,
            made_by: AbstractMove { uses, attach },
            round,
        });
        Ok(self.list.entries.len() - 1)
    }
}

/// Play the abstract game at `engine`'s `θ` against `painter` until a
/// monochromatic `F` is on the list.
pub fn abuild_session(engine: &Engine, painter: &mut dyn ColoringStrategy) -> Result<SessionOutcome> {
    let fam = engine.family();
    let r = engine.colors();
    let mut sess = Session {
        engine,
        list: AbstractList::default(),
        gmap: vec![HashMap::new(); r],
        steps: 0,
        bound: step_bound(engine),
        max_product: 0,
        min_mu: None,
        violations: Vec::new(),
    };
    let product_cap = fam.len().saturating_pow(r as u32);
    let mut st = engine.initial_state();
    let mut alpha = Vec::new();
    loop {
        if st.round >= engine.max_rounds() {
            return Err(Error::Invariant(format!("no monochromatic F after {} rounds", st.round)));
        }
        let round = st.round + 1;
        let ds = engine.round_values(&mut st)?;
        let floor = ds.iter().fold(Rational::one(), |a, d| a + d);
        let mut looks: Vec<(WeightState, RoundTrace)> = Vec::with_capacity(r);
        for s in 0..r {
            let mut next = st.clone();
            let mut t = RoundTrace::default();
            engine.play_round(&mut next, s, &ds, Variant::Full, Some(&mut t))?;
            looks.push((next, t));
        }
        let jmax: Vec<usize> = looks.iter().map(|l| l.1.primary.len()).collect();
        let mut j = vec![0usize; r];
        let sigma = loop {
            let sets: Vec<&Vec<usize>> = (0..r).map(|s| &looks[s].1.primary[j[s]]).collect();
            let dims: Vec<usize> = sets.iter().map(|x| x.len()).collect();
            let size: usize = dims.iter().product();
            if size > product_cap {
                return Err(Error::Invariant(format!("product of size {size} exceeds |S(F)|^r = {product_cap}")));
            }
            sess.max_product = sess.max_product.max(size);
            let mut made: HashMap<Vec<usize>, (usize, usize)> = HashMap::new();
            let mut tuples = Vec::new();
            for_each_tuple(&dims, &mut |t| tuples.push(t.to_vec()));
            for t in tuples {
                let hs: Vec<usize> = (0..r).map(|s| sets[s][t[s]]).collect();
                let e = sess.construct(&hs, round, &floor, painter)?;
                let entry = &sess.list.entries[e];
                if fam.is_full(entry.class) {
                    alpha.push(entry.color);
                    return finish(sess, alpha, round, e);
                }
                made.insert(t, (entry.color, e));
            }
            let sh = find_dominating_color(&dims, &|t| made[t].0);
            if !is_dominating(&dims, &|t| made[t].0, sh) {
                return Err(Error::Invariant(format!("color {} fails the dominating check", sh + 1)));
            }
            // earliest step that built each class of C_σ̂^{i,j} in color σ̂
            let mut first: HashMap<usize, usize> = HashMap::new();
            let mut ordered: Vec<(&Vec<usize>, &(usize, usize))> = made.iter().collect();
            ordered.sort_by_key(|(_, &(_, e))| e);
            for (t, &(c, e)) in ordered {
                if c == sh {
                    first.entry(sets[sh][t[sh]]).or_insert(e);
                }
            }
            for &h in sets[sh] {
                let e = first[&h];
                let central = sess.list.entries[e].central.clone();
                sess.gmap[sh].insert(h, (e, central));
            }
            for (k0, level) in looks[sh].1.secondary[j[sh]].iter().enumerate() {
                let k = k0 + 1;
                for &c in level {
                    let p = engine
                        .partner(c, k)
                        .filter(|p| sets[sh].contains(p))
                        .ok_or_else(|| Error::Invariant(format!("round {round}: class {c} has no partner")))?;
                    let (e, pc) = sess.gmap[sh][&p].clone();
                    let n = fam.classes[c].vertex_count();
                    let central = (0..n).map(|q| pc[partner_position(q, k)]).collect();
                    sess.gmap[sh].insert(c, (e, central));
                }
            }
            j[sh] += 1;
            if j[sh] >= jmax[sh] {
                break sh;
            }
        };
        alpha.push(sigma);
        st = looks.swap_remove(sigma).0;
        for (s, cs) in st.colors.iter().enumerate() {
            if let Some(c) = (0..fam.len()).find(|&c| cs.members[c] && !sess.gmap[s].contains_key(&c)) {
                return Err(Error::Invariant(format!("round {round}: class {c} of color {} has no listed graph", s + 1)));
            }
        }
    }
}

fn finish(sess: Session<'_>, alpha: Vec<usize>, rounds: usize, winning_entry: usize) -> Result<SessionOutcome> {
    let entry = &sess.list.entries[winning_entry];
    let f = &sess.engine.family().classes[entry.class].graph;
    let ok = entry.central.iter().all(|&x| entry.graph.colors[x] == entry.color)
        && f.edges().iter().all(|&(a, b)| entry.graph.graph.has_edge(entry.central[a], entry.central[b]));
    if !ok {
        return Err(Error::Invariant("winning entry has no monochromatic central copy".into()));
    }
    Ok(SessionOutcome {
        steps: sess.steps,
        rounds,
        winning_entry,
        step_bound: sess.bound,
        max_product: sess.max_product,
        min_mu: sess.min_mu.expect("at least one step"),
        legality_violations: sess.violations,
        list: sess.list,
        alpha,
    })
}

/// One step of an abstract strategy: which earlier list graphs (0-based
/// indices into `G^1, …, G^t`) to join and where the new vertex attaches,
/// as `(list index, vertex)` pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TreeStep {
    pub uses: Vec<usize>,
    pub attach: Vec<(usize, usize)>,
}

/// Node of an abstract strategy tree; leaves have no step.
#[derive(Clone, Debug)]
pub struct StrategyNode {
    pub step: Option<TreeStep>,
    pub children: Vec<StrategyNode>,
}

impl StrategyNode {
    pub fn depth(&self) -> usize {
        self.children.iter().map(|c| c.depth() + 1).max().unwrap_or(0)
    }
}

/// `G^{t+1}` colored `s`: the graphs of `uses` concatenated, then `v`.
fn extend(list: &[ColoredGraph], step: &TreeStep, s: usize) -> ColoredGraph {
    let mut offset = HashMap::new();
    let mut edges = Vec::new();
    let mut colors = Vec::new();
    for &i in &step.uses {
        offset.insert(i, colors.len());
        let o = colors.len();
        edges.extend(list[i].graph.edges().iter().map(|&(a, b)| (a + o, b + o)));
        colors.extend(list[i].colors.iter().copied());
    }
    let v = colors.len();
    edges.extend(step.attach.iter().map(|&(i, x)| (offset[&i] + x, v)));
    colors.push(s);
    let graph = Graph::new(v + 1, &edges).expect("attachments are simple");
    let stamps = (0..=v).collect();
    ColoredGraph { graph, colors, stamps }
}

/// Expand an abstract strategy into its full tree of Painter responses. The
/// strategy returns `None` to stop; a branch also stops as soon as its
/// newest graph holds a monochromatic `F`.
pub fn explore_tree(
    f: &Graph,
    r: usize,
    t_max: usize,
    strategy: &dyn Fn(&[ColoredGraph]) -> Option<TreeStep>,
) -> Result<StrategyNode> {
    fn rec(
        f: &Graph,
        r: usize,
        left: usize,
        list: &mut Vec<ColoredGraph>,
        strategy: &dyn Fn(&[ColoredGraph]) -> Option<TreeStep>,
    ) -> Result<StrategyNode> {
        let won = list.last().is_some_and(|g| detect_mono(&g.board(r), f).is_some());
        let step = if won { None } else { strategy(list) };
        let Some(step) = step else { return Ok(StrategyNode { step: None, children: Vec::new() }) };
        if left == 0 {
            return Err(Error::Resource("strategy tree deeper than allowed".into()));
        }
        if step.uses.iter().any(|&i| i >= list.len())
            || step.attach.iter().any(|&(i, x)| !step.uses.contains(&i) || x >= list[i].colors.len())
        {
            return Err(Error::Invalid("step refers to unknown list graphs".into()));
        }
        let mut children = Vec::with_capacity(r);
        for s in 0..r {
            list.push(extend(list, &step, s));
            children.push(rec(f, r, left - 1, list, strategy)?);
            list.pop();
        }
        Ok(StrategyNode { step: Some(step), children })
    }
    rec(f, r, t_max, &mut Vec::new(), strategy)
}

/// Multiplicities `f_b` at one node (indexed by list position) and the
/// repetition count of its step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiplicitySchedule {
    pub f: Vec<u64>,
    pub repeats: u64,
    pub children: Vec<MultiplicitySchedule>,
}

impl MultiplicitySchedule {
    /// Longest concrete play (sum of repetitions along a branch).
    pub fn plan_length(&self) -> u64 {
        self.repeats + self.children.iter().map(MultiplicitySchedule::plan_length).max().unwrap_or(0)
    }
}

/// Deepest tree `translate_strategy` accepts.
pub const MAX_TRANSLATION_DEPTH: usize = 6;

/// Bottom-up multiplicities: a leaf needs one copy of its newest graph; an
/// internal node needs, per graph, the most any child needs plus, when the
/// graph is used by the step, one copy per repetition.
pub fn translate_strategy(tree: &StrategyNode) -> Result<MultiplicitySchedule> {
    if tree.depth() > MAX_TRANSLATION_DEPTH {
        return Err(Error::Invalid(format!("tree depth {} exceeds {MAX_TRANSLATION_DEPTH}", tree.depth())));
    }
    fn rec(node: &StrategyNode, t: usize) -> MultiplicitySchedule {
        let Some(step) = &node.step else {
            let mut f = vec![0; t];
            if t > 0 {
                f[t - 1] = 1;
            }
            return MultiplicitySchedule { f, repeats: 0, children: Vec::new() };
        };
        let children: Vec<MultiplicitySchedule> = node.children.iter().map(|c| rec(c, t + 1)).collect();
        let repeats: u64 = children.iter().map(|c| c.f[t]).sum();
        let f = (0..t)
            .map(|i| {
                let m = children.iter().map(|c| c.f[i]).max().unwrap_or(0);
                if step.uses.contains(&i) {
                    m + repeats
                } else {
                    m
                }
            })
            .collect();
        MultiplicitySchedule { f, repeats, children }
    }
    Ok(rec(tree, 0))
}

/// Result of executing a translated plan in the concrete game.
#[derive(Clone, Debug)]
pub struct ConcreteRun {
    pub board: Board,
    /// Neighbors of each presented vertex.
    pub moves: Vec<Vec<usize>>,
    pub mono: Option<Vec<usize>>,
}

/// Play the plan against a concrete Painter, repeating each abstract step
/// on fresh isolated copies and following the pigeonholed color.
pub fn execute_plan(
    tree: &StrategyNode,
    sched: &MultiplicitySchedule,
    f: &Graph,
    r: usize,
    painter: &mut dyn ColoringStrategy,
) -> Result<ConcreteRun> {
    let mut board = Board::new(r);
    let mut moves = Vec::new();
    // pools[i]: unused isolated copies of G^{i+1}, each as vertex maps
    let mut pools: Vec<Vec<Vec<usize>>> = Vec::new();
    let (mut node, mut sc) = (tree, sched);
    while let Some(step) = &node.step {
        let t = pools.len();
        let mut fresh: Vec<Vec<Vec<usize>>> = vec![Vec::new(); r];
        for _ in 0..sc.repeats {
            let mut map = Vec::new();
            let mut at = HashMap::new();
            for &i in &step.uses {
                let copy = pools[i].pop().ok_or_else(|| Error::Invariant(format!("ran out of copies of G^{}", i + 1)))?;
                at.insert(i, map.len());
                map.extend(copy);
            }
            let nb: Vec<usize> = step.attach.iter().map(|&(i, x)| map[at[&i] + x]).collect();
            let v = board.add_vertex(&nb);
            let c = painter.choose(&board)?;
            board.set_color(v, c);
            moves.push(nb);
            map.push(v);
            fresh[c].push(map);
        }
        let sigma = (0..r)
            .find(|&s| fresh[s].len() as u64 >= sc.children[s].f[t])
            .ok_or_else(|| Error::Invariant("pigeonhole failed".into()))?;
        pools.push(std::mem::take(&mut fresh[sigma]));
        node = &node.children[sigma];
        sc = &sc.children[sigma];
    }
    let mono = detect_mono(&board, f);
    Ok(ConcreteRun { board, moves, mono })
}

/// Two-color strategy for a single edge: a vertex, then a vertex joined to
/// it, then (if the edge is bicolored) a vertex joined to both ends.
pub fn k2_strategy(list: &[ColoredGraph]) -> Option<TreeStep> {
    match list.len() {
        0 => Some(TreeStep::default()),
        1 => Some(TreeStep { uses: vec![0], attach: vec![(0, 0)] }),
        2 => Some(TreeStep { uses: vec![1], attach: vec![(1, 0), (1, 1)] }),
        _ => None,
    }
}
