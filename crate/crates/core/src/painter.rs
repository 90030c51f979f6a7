//! Painter's side: the priority list derived from a weight computation, the
//! online decision rule with its tie-breaking, the greedy baseline and the
//! witness-graph checker.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::board::{copies_with_youngest, find_copy_through, has_ordered_copy, Board};
use crate::flow::{min_mu_containing, min_mu_nonempty};
use crate::graph::{CanonicalKey, Graph, OrderedGraph};
use crate::rational::{ExtRational, Rational};
use crate::weights::{big_lambda, cw_full, CwRun, Engine, LambdaEval, LambdaOptions, Variant};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PriorityEntry {
    pub key: CanonicalKey,
    /// Positional graph (vertex 0 youngest).
    pub graph: Graph,
    pub color: usize,
    pub lambda: ExtRational,
    /// Membership in the tie-breaking family of `color`.
    pub flag: bool,
}

/// Entries in danger order: `-inf` first, then ascending `λ`; at equal `λ`
/// flagged entries first, then by color and key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PriorityList {
    pub colors: usize,
    pub entries: Vec<PriorityEntry>,
}

/// Per color, the first-batch classes of rounds that start a run of that
/// color.
#[derive(Clone, Debug, Default)]
pub struct TieBreakFamilies {
    pub families: Vec<BTreeSet<usize>>,
}

#[derive(Clone, Debug)]
pub struct Strategy {
    pub list: PriorityList,
    pub tie: TieBreakFamilies,
    pub run: CwRun,
}

impl PriorityList {
    pub fn new(colors: usize, mut entries: Vec<PriorityEntry>) -> PriorityList {
        entries.sort_by(|a, b| {
            a.lambda.cmp(&b.lambda).then(b.flag.cmp(&a.flag)).then(a.color.cmp(&b.color)).then(a.key.cmp(&b.key))
        });
        PriorityList { colors, entries }
    }

    /// `rank  color  lambda=p/q  flag={0,1}  graph=<n;edges>`, colors 1-based.
    pub fn export(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# colors {}", self.colors);
        for (rank, e) in self.entries.iter().enumerate() {
            let edges: Vec<String> = e.graph.edges().iter().map(|(a, b)| format!("{a}-{b}")).collect();
            let _ = writeln!(
                out,
                "{}  {}  lambda={}  flag={}  graph={};{}",
                rank + 1,
                e.color + 1,
                e.lambda,
                u8::from(e.flag),
                e.graph.vertex_count(),
                edges.join(",")
            );
        }
        out
    }

    pub fn import(text: &str) -> Result<PriorityList> {
        let bad = |line: usize, msg: &str| Error::Invalid(format!("priority list line {line}: {msg}"));
        let mut colors = None;
        let mut entries = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let ln = ln + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(c) = rest.trim().strip_prefix("colors") {
                    colors = Some(c.trim().parse::<usize>().map_err(|_| bad(ln, "bad color count"))?);
                }
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 5 {
                return Err(bad(ln, "expected 5 fields"));
            }
            let color: usize = parts[1].parse().map_err(|_| bad(ln, "bad color"))?;
            if color == 0 {
                return Err(bad(ln, "colors are numbered from 1"));
            }
            let lam = parts[2].strip_prefix("lambda=").ok_or_else(|| bad(ln, "missing lambda="))?;
            let lambda = if lam == "-inf" { ExtRational::NegInf } else { ExtRational::Finite(lam.parse()?) };
            let flag = match parts[3] {
                "flag=0" => false,
                "flag=1" => true,
                _ => return Err(bad(ln, "flag must be 0 or 1")),
            };
            let g = parts[4].strip_prefix("graph=").ok_or_else(|| bad(ln, "missing graph="))?;
            let (n, es) = g.split_once(';').ok_or_else(|| bad(ln, "graph needs n;edges"))?;
            let n: usize = n.parse().map_err(|_| bad(ln, "bad vertex count"))?;
            let mut edges = Vec::new();
            for e in es.split(',').filter(|s| !s.is_empty()) {
                let (a, b) = e.split_once('-').ok_or_else(|| bad(ln, "edge must be a-b"))?;
                edges.push((a.parse().map_err(|_| bad(ln, "bad edge"))?, b.parse().map_err(|_| bad(ln, "bad edge"))?));
            }
            let graph = Graph::new(n, &edges)?;
            let key = crate::graph::canonical_key(&OrderedGraph::positional(graph.clone()));
            entries.push(PriorityEntry {
                key,
                graph: OrderedGraph::positional(graph).to_positional(),
                color: color - 1,
                lambda,
                flag,
            });
        }
        let colors = colors.or_else(|| entries.iter().map(|e| e.color + 1).max()).ok_or_else(|| bad(0, "empty list"))?;
        if entries.iter().any(|e| e.color >= colors) {
            return Err(bad(0, "color exceeds the declared count"));
        }
        Ok(PriorityList::new(colors, entries))
    }

    fn by_color(&self) -> Vec<Vec<&PriorityEntry>> {
        let mut out = vec![Vec::new(); self.colors];
        for e in &self.entries {
            out[e.color].push(e);
        }
        out
    }

    /// `λ` of `(class, color)`, if listed.
    pub fn lambda_of(&self, key: &CanonicalKey, color: usize) -> Option<&ExtRational> {
        self.entries.iter().find(|e| e.color == color && &e.key == key).map(|e| &e.lambda)
    }
}

/// `H'_s`: union of `C^{i,1}` over rounds `i` with `α_i = s` that start a
/// run of `s`.
pub fn tie_break_families(run: &CwRun, r: usize) -> TieBreakFamilies {
    let mut families = vec![BTreeSet::new(); r];
    for (x, t) in run.traces.iter().enumerate() {
        if x == 0 || run.traces[x - 1].sigma != t.sigma {
            families[t.sigma].extend(t.primary[0].iter().copied());
        }
    }
    TieBreakFamilies { families }
}

/// Priority list from a full run of the weight computation on `alpha`.
pub fn derive_priority_list(engine: &Engine, alpha: &[usize]) -> Result<Strategy> {
    let run = cw_full(engine, alpha)?;
    let tie = tie_break_families(&run, engine.colors());
    let fam = engine.family();
    let mut entries = Vec::new();
    for (s, cs) in run.state.colors.iter().enumerate() {
        for (c, info) in fam.classes.iter().enumerate() {
            entries.push(PriorityEntry {
                key: info.key.clone(),
                graph: info.graph.clone(),
                color: s,
                lambda: engine.lambda_class(c, cs),
                flag: tie.families[s].contains(&c),
            });
        }
    }
    Ok(Strategy { list: PriorityList::new(engine.colors(), entries), tie, run })
}

/// Painter's witness sequence at `θ` (full semantics) and the derived list.
pub fn derive_strategy(engine: &Engine, jobs: usize) -> Result<Strategy> {
    let opts = LambdaOptions { variant: Variant::Full, jobs, ..LambdaOptions::default() };
    let LambdaEval::Exact(out) = big_lambda(engine, &opts)? else { unreachable!("no threshold set") };
    derive_priority_list(engine, &out.alpha)
}

/// Color for the pending vertex `v` (the newest board vertex). A tie not
/// settled by the tie-breaking families is an [`Error::Invariant`].
pub fn paint_decide(board: &Board, v: usize, list: &PriorityList) -> Result<usize> {
    match paint_choice(board, v, list)? {
        Choice::Clear(c) => Ok(c),
        Choice::Unresolved(_, msg) => Err(Error::Invariant(msg)),
    }
}

/// As [`paint_decide`], but an unsettled tie goes to the lowest tied color
/// whose minimisers avoid the tie-breaking family (else the lowest tied
/// color). Meant for boards that obey no density restriction.
pub fn paint_decide_lenient(board: &Board, v: usize, list: &PriorityList) -> Result<usize> {
    Ok(match paint_choice(board, v, list)? {
        Choice::Clear(c) | Choice::Unresolved(c, _) => c,
    })
}

enum Choice {
    Clear(usize),
    Unresolved(usize, String),
}

fn paint_choice(board: &Board, v: usize, list: &PriorityList) -> Result<Choice> {
    assert_eq!(v + 1, board.vertex_count(), "decisions are made for the newest vertex");
    let by_color = list.by_color();
    // d(s): the most dangerous listed class that coloring v with s creates
    let mut ds: Vec<(&ExtRational, usize)> = Vec::with_capacity(list.colors);
    for (s, entries) in by_color.iter().enumerate() {
        let hit = entries.iter().position(|e| has_ordered_copy(board, &e.graph, s, v));
        let Some(k) = hit else {
            return Err(Error::Invariant(format!("color {}: no listed class matches the new vertex", s + 1)));
        };
        ds.push((&entries[k].lambda, k));
    }
    let best = ds.iter().map(|d| d.0).max().expect("at least one color");
    let tied: Vec<usize> = (0..list.colors).filter(|&s| ds[s].0 == best).collect();
    if tied.len() == 1 {
        return Ok(Choice::Clear(tied[0]));
    }
    // does J_s (all minimisers in D_s) meet the tie-breaking family?
    let meets: Vec<bool> = tied
        .iter()
        .map(|&s| {
            by_color[s][ds[s].1..]
                .iter()
                .take_while(|e| e.lambda == *best)
                .any(|e| e.flag && has_ordered_copy(board, &e.graph, s, v))
        })
        .collect();
    if tied.len() == 2 && meets[0] != meets[1] {
        return Ok(Choice::Clear(if meets[0] { tied[1] } else { tied[0] }));
    }
    let fallback = tied.iter().zip(&meets).find(|(_, &m)| !m).map_or(tied[0], |(&s, _)| s);
    let names: Vec<String> = tied.iter().map(|s| (s + 1).to_string()).collect();
    Ok(Choice::Unresolved(
        fallback,
        format!("tie at lambda = {best} between colors {} with tie-family hits {meets:?}", names.join(", ")),
    ))
}

/// Highest-numbered color `i` in which `v` completes no copy of `hs[i]`,
/// else color 0.
pub fn greedy_decide(board: &Board, v: usize, hs: &[Graph]) -> usize {
    (0..hs.len()).rev().find(|&i| find_copy_through(board, &hs[i], i, v).is_none()).unwrap_or(0)
}

/// Anything that colors the pending (newest) vertex of a board.
pub trait ColoringStrategy {
    fn choose(&mut self, board: &Board) -> Result<usize>;

    /// In the abstract game, called before [`ColoringStrategy::choose`]
    /// with the list entries (0-based) joined by the construction step.
    fn observe_move(&mut self, _uses: &[usize]) {}
}

/// The priority-list strategy.
#[derive(Clone, Debug)]
pub struct PaintPainter {
    pub list: PriorityList,
    /// Unsettled ties are errors (otherwise resolved by fallback).
    pub strict: bool,
}

impl PaintPainter {
    pub fn new(list: PriorityList) -> PaintPainter {
        PaintPainter { list, strict: true }
    }

    pub fn lenient(list: PriorityList) -> PaintPainter {
        PaintPainter { list, strict: false }
    }
}

impl ColoringStrategy for PaintPainter {
    fn choose(&mut self, board: &Board) -> Result<usize> {
        let v = board.vertex_count() - 1;
        if self.strict {
            paint_decide(board, v, &self.list)
        } else {
            paint_decide_lenient(board, v, &self.list)
        }
    }
}

/// Greedy with `H_i = F` for every color.
#[derive(Clone, Debug)]
pub struct GreedyPainter {
    hs: Vec<Graph>,
}

impl GreedyPainter {
    pub fn new(f: &Graph, r: usize) -> GreedyPainter {
        GreedyPainter { hs: vec![f.clone(); r] }
    }
}

impl ColoringStrategy for GreedyPainter {
    fn choose(&mut self, board: &Board) -> Result<usize> {
        Ok(greedy_decide(board, board.vertex_count() - 1, &self.hs))
    }
}

/// Uniformly random colors from a seeded generator.
#[derive(Clone, Debug)]
pub struct RandomPainter {
    rng: ChaCha8Rng,
}

impl RandomPainter {
    pub fn new(seed: u64) -> RandomPainter {
        RandomPainter { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl ColoringStrategy for RandomPainter {
    fn choose(&mut self, board: &Board) -> Result<usize> {
        Ok(self.rng.random_range(0..board.colors()))
    }
}

/// Replays a fixed color sequence, cycling when exhausted.
#[derive(Clone, Debug)]
pub struct ScriptedPainter {
    script: Vec<usize>,
    next: usize,
}

impl ScriptedPainter {
    pub fn new(script: Vec<usize>) -> ScriptedPainter {
        assert!(!script.is_empty(), "empty script");
        ScriptedPainter { script, next: 0 }
    }
}

impl ColoringStrategy for ScriptedPainter {
    fn choose(&mut self, board: &Board) -> Result<usize> {
        let c = self.script[self.next % self.script.len()];
        self.next += 1;
        if c >= board.colors() {
            return Err(Error::Invalid(format!("scripted color {} out of range", c + 1)));
        }
        Ok(c)
    }
}

#[derive(Clone, Debug)]
pub struct WitnessConstants {
    pub epsilon: Rational,
    pub v_max: BigUint,
}

/// `ε` (smallest positive gap between `d_θ` values of members and children,
/// per color; 1 if there is none) and the size bound derived from it.
pub fn compute_witness_constants(engine: &Engine, run: &CwRun) -> WitnessConstants {
    let fam = engine.family();
    let mut eps: Option<Rational> = None;
    for cs in &run.state.colors {
        let mut ds: Vec<Rational> = (0..fam.len())
            .filter(|&c| cs.members[c] || fam.classes[c].parent.is_some_and(|p| cs.members[p]) || (cs.is_empty() && c == 0))
            .map(|c| engine.d_of(cs, c))
            .collect();
        ds.sort();
        ds.dedup();
        for w in ds.windows(2) {
            let gap = &w[1] - &w[0];
            if eps.as_ref().is_none_or(|e| gap < *e) {
                eps = Some(gap);
            }
        }
    }
    let epsilon = eps.unwrap_or_else(Rational::one);
    let v = fam.f.vertex_count() as u64;
    let ratio = (Rational::from_int(v as i64) / &epsilon).ceil();
    let ratio = u64::try_from(ratio).expect("v(F)/eps fits in u64");
    let rounds = (engine.colors() * fam.len()) as u64;
    let exponent = ratio + (ratio + 1) * (rounds + 1) * (v + 1) + 2;
    let exponent = u32::try_from(exponent).expect("exponent fits in u32");
    let v_max = BigUint::from(engine.colors()).pow(exponent) * v + 1u32;
    WitnessConstants { epsilon, v_max }
}

#[derive(Clone, Debug, Default)]
pub struct WitnessReport {
    pub copies_checked: usize,
    /// A vertex set with `μ_θ < 0`, when the board has one.
    pub k_prime: Option<Vec<usize>>,
    pub violations: Vec<String>,
}

impl WitnessReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check the witness invariant on a fully colored board: either some
/// `K'` with `μ_θ(K') < 0` and at most `v_max` vertices exists, or every
/// monochromatic ordered copy of a listed class lies in a vertex set `H'`
/// with `v(H') ≤ v_max` and `μ_θ(H') ≤ λ`. Each candidate `H'` is found
/// exactly by a min cut with the copy forced.
pub fn check_witness_invariant(board: &Board, list: &PriorityList, theta: &Rational, v_max: &BigUint) -> WitnessReport {
    let edges = board.graph().edges().to_vec();
    let n = board.vertex_count();
    let mut report = WitnessReport::default();
    if let Some((mu, set)) = min_mu_nonempty(n, &edges, theta) {
        if mu.is_negative() && BigUint::from(set.len()) <= *v_max {
            report.k_prime = Some(set);
            return report;
        }
    }
    // most demanding λ per vertex set
    let mut need: HashMap<Vec<usize>, (ExtRational, String)> = HashMap::new();
    for e in &list.entries {
        for v in board.color_class(e.color).to_vec() {
            for copy in copies_with_youngest(board, &e.graph, e.color, v) {
                report.copies_checked += 1;
                let mut set = copy.clone();
                set.sort_unstable();
                let slot = need.entry(set).or_insert_with(|| (e.lambda.clone(), String::new()));
                if e.lambda <= slot.0 {
                    *slot = (e.lambda.clone(), format!("class {} in color {} at {copy:?}", e.key, e.color + 1));
                }
            }
        }
    }
    let mut sets: Vec<_> = need.into_iter().collect();
    sets.sort_by(|a, b| a.0.cmp(&b.0));
    for (set, (lambda, what)) in sets {
        let (mu, h) = min_mu_containing(n, &edges, theta, &set);
        let ok = ExtRational::Finite(mu.clone()) <= lambda && BigUint::from(h.len()) <= *v_max;
        if !ok {
            report.violations.push(format!("{what}: best mu = {mu} > lambda = {lambda}"));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k3_strategy() -> (Engine, Strategy) {
        let e = Engine::for_graph(&Graph::complete(3), 2, "3/4".parse().unwrap(), false).unwrap();
        let s = derive_strategy(&e, 1).unwrap();
        (e, s)
    }

    #[test]
    fn list_round_trip() {
        let (_, s) = k3_strategy();
        let text = s.list.export();
        assert_eq!(PriorityList::import(&text).unwrap(), s.list);
    }

    #[test]
    fn most_dangerous_full_entry_is_zero() {
        let (e, s) = k3_strategy();
        let fam = e.family();
        let full = &fam.classes[fam.full_classes()[0]].key;
        let best = s.list.entries.iter().filter(|x| &x.key == full && x.lambda.is_finite()).map(|x| &x.lambda).max();
        assert_eq!(best, Some(&ExtRational::Finite(Rational::zero())));
    }

    #[test]
    fn closing_a_red_triangle_goes_blue() {
        let (_, s) = k3_strategy();
        // red triangle on 0,1,2 minus one edge, blue edge 3-4; new vertex 5
        // joins 0 and 1 (red) and 3 (blue)
        let g = Graph::new(5, &[(0, 1), (3, 4)]).unwrap();
        let mut b = Board::from_graph(&g, &[0, 0, 0, 1, 1], 2);
        let v = b.add_vertex(&[0, 1, 3]);
        assert_eq!(paint_decide(&b, v, &s.list).unwrap(), 1);
    }

    #[test]
    fn greedy_rules() {
        let k3 = Graph::complete(3);
        let mut b = Board::new(2);
        let v = b.add_vertex(&[]);
        assert_eq!(greedy_decide(&b, v, &[k3.clone(), k3.clone()]), 1);
        let g = Graph::new(4, &[(0, 1), (2, 3)]).unwrap();
        let mut b = Board::from_graph(&g, &[0, 0, 1, 1], 2);
        let v = b.add_vertex(&[0, 1, 2, 3]);
        assert_eq!(greedy_decide(&b, v, &[k3.clone(), k3.clone()]), 0);
        let g = Graph::new(3, &[(0, 1)]).unwrap();
        let mut b = Board::from_graph(&g, &[0, 0, 1], 2);
        let v = b.add_vertex(&[0, 1]);
        assert_eq!(greedy_decide(&b, v, &[k3.clone(), k3]), 1);
    }

    #[test]
    fn witness_constants_bound() {
        let (e, s) = k3_strategy();
        let w = compute_witness_constants(&e, &s.run);
        assert!(w.epsilon.is_positive());
        assert!(w.v_max >= BigUint::from(3u32));
    }
}
