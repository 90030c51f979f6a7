//! The weight computation: per-round threat values, primary and secondary
//! weights, forward sets, and the branching evaluation of `Λ_θ(F, r)`.
//!
//! Classes of `S(F)` are referred to by their index in the [`SubgraphFamily`];
//! colors are `0..r`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::OnceLock;

use crate::graph::{enumerate_ordered_subgraphs, Graph, SubgraphFamily};
use crate::rational::{lambda_theta, ExtRational, Rational, WeightVector};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Every loop, forward set and secondary weight.
    Full,
    /// No forward sets, no secondary loop; children whose value exceeds the
    /// current round value are dropped together with their subtree, and the
    /// run stops once a full copy of `F` is reached.
    Simplified,
}

/// Precomputed tables for one `(F, r, θ)`.
pub struct Engine {
    family: SubgraphFamily,
    r: usize,
    theta: Rational,
    /// `sub_edges[c][mask]`: edges of class `c` spanned by position 0 and the
    /// positions `k + 1` for the bits `k` of `mask`.
    sub_edges: Vec<Vec<u8>>,
    /// `k·θ` for `k = 0..=e(F)`.
    e_theta: Vec<Rational>,
    embed0: OnceLock<Vec<Vec<bool>>>,
}

/// One color's part of the state.
#[derive(Clone, Debug)]
pub struct ColorState {
    pub members: Vec<bool>,
    pub weights: Vec<Option<Rational>>,
    pub dead: Vec<bool>,
    /// Forward sets, keyed by the round value at which they were recorded.
    pub forward: BTreeMap<Rational, Vec<usize>>,
    /// `(round, d, w)` for every round in which this color was chosen.
    pub history: Vec<(usize, Rational, Rational)>,
    size: usize,
    dvals: Vec<Option<Rational>>,
}

impl ColorState {
    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Completion {
    pub round: usize,
    pub color: usize,
    pub class: usize,
    /// `1 + Σ_s d_s` of the completion round.
    pub value: Rational,
}

#[derive(Clone, Debug)]
pub struct WeightState {
    pub colors: Vec<ColorState>,
    pub round: usize,
    pub completion: Option<Completion>,
}

/// A class placed by the secondary loop.
#[derive(Clone, Debug)]
pub struct Placement {
    pub class: usize,
    pub j: usize,
    pub k: usize,
    pub d: Rational,
    /// Round whose primary weight was copied.
    pub ihat: usize,
    /// Whether the strict (`d < d_σ^î`) rule chose `î`.
    pub strict: bool,
}

#[derive(Clone, Debug, Default)]
pub struct RoundTrace {
    pub round: usize,
    pub sigma: usize,
    pub ds: Vec<Rational>,
    pub w: Rational,
    /// `C^{i,j}` for `j = 1, 2, ...`.
    pub primary: Vec<Vec<usize>>,
    /// `T^{i,j,k}`, indexed `[j-1][k-1]`.
    pub potential: Vec<Vec<Vec<usize>>>,
    /// `C^{i,j,k}`, indexed `[j-1][k-1]` (the final empty set included).
    pub secondary: Vec<Vec<Vec<usize>>>,
    pub placements: Vec<Placement>,
}

impl RoundTrace {
    pub fn primary_count(&self) -> usize {
        self.primary.iter().map(Vec::len).sum()
    }

    pub fn secondary_count(&self) -> usize {
        self.secondary.iter().flatten().map(Vec::len).sum()
    }
}

/// A finished run on a fixed color sequence.
#[derive(Clone, Debug)]
pub struct CwRun {
    pub state: WeightState,
    pub traces: Vec<RoundTrace>,
    /// The color sequence actually consumed (padded with color 0).
    pub alpha: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct DecisionOutcome {
    pub value: Rational,
    /// Lexicographically smallest minimising color sequence, up to the
    /// completion round. Empty when no witness was requested.
    pub alpha: Vec<usize>,
    pub states_explored: usize,
}

#[derive(Clone, Debug)]
pub enum LambdaEval {
    Exact(DecisionOutcome),
    /// Some branch fell below the requested threshold.
    Below,
}

#[derive(Clone, Debug)]
pub struct LambdaOptions {
    pub variant: Variant,
    pub jobs: usize,
    pub stop_below: Option<Rational>,
    pub witness: bool,
    pub max_states: usize,
    /// Rough cap on memo memory, in bytes.
    pub max_memo_bytes: usize,
}

impl Default for LambdaOptions {
    fn default() -> Self {
        LambdaOptions {
            variant: Variant::Simplified,
            jobs: 1,
            stop_below: None,
            witness: true,
            max_states: 50_000_000,
            max_memo_bytes: 1536 << 20,
        }
    }
}

impl Engine {
    pub fn new(family: SubgraphFamily, r: usize, theta: Rational) -> Result<Engine> {
        if r < 2 {
            return Err(Error::Invalid(format!("need at least 2 colors, got {r}")));
        }
        if !theta.is_positive() {
            return Err(Error::Invalid(format!("theta must be positive, got {theta}")));
        }
        let sub_edges = family
            .classes
            .iter()
            .map(|c| {
                let adj = c.graph.adjacency_masks();
                let m = c.vertex_count() - 1;
                (0..1usize << m)
                    .map(|mask| {
                        let verts = (mask as u32) << 1 | 1;
                        let twice: u32 = (0..=m).filter(|&x| verts >> x & 1 == 1).map(|x| (adj[x] & verts).count_ones()).sum();
                        (twice / 2) as u8
                    })
                    .collect()
            })
            .collect();
        let e_theta = (0..=family.f.edge_count()).map(|k| Rational::from_int(k as i64) * &theta).collect();
        Ok(Engine { family, r, theta, sub_edges, e_theta, embed0: OnceLock::new() })
    }

    pub fn for_graph(f: &Graph, r: usize, theta: Rational, induced: bool) -> Result<Engine> {
        Engine::new(enumerate_ordered_subgraphs(f, induced)?, r, theta)
    }

    pub fn family(&self) -> &SubgraphFamily {
        &self.family
    }

    pub fn colors(&self) -> usize {
        self.r
    }

    pub fn theta(&self) -> &Rational {
        &self.theta
    }

    pub fn max_rounds(&self) -> usize {
        self.r * self.family.len()
    }

    pub fn initial_state(&self) -> WeightState {
        let n = self.family.len();
        let color = ColorState {
            members: vec![false; n],
            weights: vec![None; n],
            dead: vec![false; n],
            forward: BTreeMap::new(),
            history: Vec::new(),
            size: 0,
            dvals: vec![None; n],
        };
        WeightState { colors: vec![color; self.r], round: 0, completion: None }
    }

    /// `C(H_s, F)` minus dropped classes, ascending.
    pub fn children(&self, cs: &ColorState) -> Vec<usize> {
        if cs.size == 0 {
            return if cs.dead[0] { vec![] } else { vec![self.family.root()] };
        }
        (0..self.family.len())
            .filter(|&c| !cs.members[c] && !cs.dead[c] && self.family.classes[c].parent.is_some_and(|p| cs.members[p]))
            .collect()
    }

    /// `d_θ(H, v₁, w_{(H,π,s)})` for a class whose parent is a member.
    pub fn d_of(&self, cs: &ColorState, c: usize) -> Rational {
        let info = &self.family.classes[c];
        let m = info.vertex_count() - 1;
        let vals: Vec<Rational> = (1..=m)
            .map(|k| Rational::one() + cs.weights[info.ancestors[k]].as_ref().expect("ancestor of a child must be weighted"))
            .collect();
        let se = &self.sub_edges[c];
        let mut sums = vec![Rational::zero(); 1 << m];
        let mut best = Rational::zero();
        for mask in 1usize..1 << m {
            let low = mask.trailing_zeros() as usize;
            sums[mask] = &sums[mask & (mask - 1)] + &vals[low];
            let v = &sums[mask] - &self.e_theta[se[mask] as usize];
            if v < best {
                best = v;
            }
        }
        best
    }

    fn d_value(&self, cs: &mut ColorState, c: usize) -> Rational {
        if let Some(d) = &cs.dvals[c] {
            return d.clone();
        }
        let d = self.d_of(cs, c);
        cs.dvals[c] = Some(d.clone());
        d
    }

    /// `d_θ` of a child class in color `s` (computed once, then cached).
    pub fn child_value(&self, st: &mut WeightState, s: usize, c: usize) -> Rational {
        self.d_value(&mut st.colors[s], c)
    }

    /// `d_s^i` for every color at the start of a round.
    pub fn round_values(&self, st: &mut WeightState) -> Result<Vec<Rational>> {
        (0..self.r)
            .map(|s| {
                let cs = &mut st.colors[s];
                let ch = self.children(cs);
                ch.into_iter()
                    .map(|c| self.d_value(cs, c))
                    .max()
                    .ok_or_else(|| Error::Invariant(format!("color {} has no remaining children", s + 1)))
            })
            .collect()
    }

    fn add_member(&self, cs: &mut ColorState, c: usize, w: Rational) {
        debug_assert!(!cs.members[c]);
        cs.members[c] = true;
        cs.weights[c] = Some(w);
        cs.size += 1;
    }

    /// Play round `st.round + 1` with color `sigma`. `ds` must come from
    /// [`Engine::round_values`] on the same state. Returns whether a full
    /// copy of `F` entered a primary set in this round.
    pub fn play_round(
        &self,
        st: &mut WeightState,
        sigma: usize,
        ds: &[Rational],
        variant: Variant,
        mut trace: Option<&mut RoundTrace>,
    ) -> Result<bool> {
        assert!(sigma < self.r, "color out of range");
        st.round += 1;
        let i = st.round;
        let dsig = ds[sigma].clone();
        let w: Rational = ds.iter().enumerate().filter(|&(s, _)| s != sigma).fold(Rational::zero(), |a, (_, d)| a + d);
        let beta = ds.iter().fold(Rational::one(), |a, d| a + d);
        if let Some(t) = trace.as_deref_mut() {
            *t = RoundTrace { round: i, sigma, ds: ds.to_vec(), w: w.clone(), ..RoundTrace::default() };
        }
        let cs = &mut st.colors[sigma];
        cs.history.push((i, dsig.clone(), w.clone()));
        let mut completed = false;
        let mut j = 0;
        loop {
            j += 1;
            let ch = self.children(cs);
            let mut cij = Vec::new();
            let mut above = Vec::new();
            for c in ch {
                match self.d_value(cs, c).cmp(&dsig) {
                    Ordering::Equal => cij.push(c),
                    Ordering::Greater => above.push(c),
                    Ordering::Less => {}
                }
            }
            if cij.is_empty() {
                if j == 1 {
                    return Err(Error::Invariant(format!("round {i}: no child attains d = {dsig}")));
                }
                if variant == Variant::Simplified {
                    for c in above {
                        cs.dead[c] = true;
                    }
                    break;
                }
                return Err(Error::Invariant(format!("round {i}: (**) iteration {j} started with an empty primary set")));
            }
            if variant == Variant::Simplified {
                for &c in &above {
                    cs.dead[c] = true;
                }
            }
            if j == 1 && variant == Variant::Full {
                if cs.forward.contains_key(&dsig) {
                    return Err(Error::Invariant(format!("round {i}: forward set for d = {dsig} written twice")));
                }
                cs.forward.insert(dsig.clone(), cij.clone());
            }
            for &c in &cij {
                self.add_member(cs, c, w.clone());
            }
            if let Some(&c) = cij.iter().find(|&&c| self.family.is_full(c)) {
                completed = true;
                if st.completion.is_none() {
                    st.completion = Some(Completion { round: i, color: sigma, class: c, value: beta.clone() });
                }
            }
            if let Some(t) = trace.as_deref_mut() {
                t.primary.push(cij.clone());
                t.potential.push(Vec::new());
                t.secondary.push(Vec::new());
            }
            if variant == Variant::Simplified {
                if completed {
                    break;
                }
                continue;
            }
            // secondary loop
            let mut k = 0;
            loop {
                k += 1;
                let ch = self.children(cs);
                let mut tijk = Vec::new();
                for c in ch {
                    let d = self.d_value(cs, c);
                    if d >= dsig {
                        tijk.push((c, d));
                    }
                }
                let mut cijk = Vec::new();
                for (c, d) in &tijk {
                    if *d > dsig || !self.has_sub_in(cs.forward.get(&dsig), *c) {
                        let strict = !self.has_sub_in(cs.forward.get(d), *c);
                        let pick = cs.history.iter().rev().find(|(_, dh, _)| if strict { d < dh } else { d <= dh });
                        let Some((ihat, _, wh)) = pick.cloned() else {
                            return Err(Error::Invariant(format!("round {i}: no weight index for class {c} at d = {d}")));
                        };
                        cijk.push((*c, wh));
                        if let Some(t) = trace.as_deref_mut() {
                            t.placements.push(Placement { class: *c, j, k, d: d.clone(), ihat, strict });
                        }
                    }
                }
                if let Some(t) = trace.as_deref_mut() {
                    t.potential[j - 1].push(tijk.iter().map(|p| p.0).collect());
                    t.secondary[j - 1].push(cijk.iter().map(|p| p.0).collect());
                }
                if cijk.is_empty() {
                    break;
                }
                for (c, wh) in cijk {
                    self.add_member(cs, c, wh);
                }
            }
            let mut done = true;
            for c in self.children(cs) {
                let d = self.d_value(cs, c);
                match d.cmp(&dsig) {
                    Ordering::Less => {}
                    Ordering::Equal => {
                        done = false;
                        if trace.is_some() && !self.has_sub_in(cs.forward.get(&dsig), c) {
                            return Err(Error::Invariant(format!(
                                "round {i}: end of (**) iteration {j}: class {c} ties d = {dsig} without a forward subgraph"
                            )));
                        }
                    }
                    Ordering::Greater => {
                        return Err(Error::Invariant(format!(
                            "round {i}: end of (**) iteration {j}: class {c} has d = {d} above {dsig}"
                        )));
                    }
                }
            }
            if trace.is_some() {
                self.check_partners(cs, i, j, trace.as_deref().unwrap())?;
            }
            if done {
                break;
            }
        }
        Ok(completed)
    }

    /// Is some class of `list` an order-preserving subgraph of class `c`
    /// through its youngest vertex?
    fn has_sub_in(&self, list: Option<&Vec<usize>>, c: usize) -> bool {
        let Some(list) = list else { return false };
        let table = self.embed0.get_or_init(|| self.embedding_table());
        list.iter().any(|&a| table[a][c])
    }

    fn embedding_table(&self) -> Vec<Vec<bool>> {
        let cls = &self.family.classes;
        let masks: Vec<Vec<u32>> = cls.iter().map(|c| c.graph.adjacency_masks()).collect();
        (0..cls.len())
            .map(|a| (0..cls.len()).map(|b| embeds_at_youngest(&masks[a], &masks[b], self.family.induced)).collect())
            .collect()
    }

    fn check_partners(&self, cs: &ColorState, i: usize, j: usize, t: &RoundTrace) -> Result<()> {
        for (k0, set) in t.secondary[j - 1].iter().enumerate() {
            let k = k0 + 1;
            for &c in set {
                let n = self.family.classes[c].vertex_count();
                if k >= n {
                    return Err(Error::Invariant(format!("round {i}: partner of class {c} needs position {k}")));
                }
                let newpos = |q: usize| partner_position(q, k);
                let partner = self.partner(c, k);
                let Some(p) = partner.filter(|p| t.primary[j - 1].contains(p)) else {
                    return Err(Error::Invariant(format!("round {i}: class {c} (k = {k}) has no partner in C^{{i,{j}}}")));
                };
                let wc = self.weight_vector(c, cs);
                let wp = self.weight_vector(p, cs);
                if (0..n).any(|q| wc[q] > wp[newpos(q)]) {
                    return Err(Error::Invariant(format!("round {i}: class {c} outweighs its partner {p}")));
                }
            }
        }
        Ok(())
    }

    /// Class of `c` with its position-`k` vertex moved to the youngest
    /// position (the others keep their relative order).
    pub fn partner(&self, c: usize, k: usize) -> Option<usize> {
        let g = &self.family.classes[c].graph;
        let n = g.vertex_count();
        if k >= n {
            return None;
        }
        let mut edges: Vec<(usize, usize)> = g
            .edges()
            .iter()
            .map(|&(a, b)| {
                let (x, y) = (partner_position(a, k), partner_position(b, k));
                (x.min(y), x.max(y))
            })
            .collect();
        edges.sort();
        let pg = Graph::new(n, &edges).expect("relabelled class is a graph");
        self.family.lookup_graph(&pg)
    }

    /// `w_{(H,π,s)}` by position, `-inf` where the ancestor is missing.
    pub fn weight_vector(&self, c: usize, cs: &ColorState) -> WeightVector {
        self.family.classes[c]
            .ancestors
            .iter()
            .map(|&a| match (&cs.weights[a], cs.members[a]) {
                (Some(w), true) => ExtRational::Finite(w.clone()),
                _ => ExtRational::NegInf,
            })
            .collect()
    }

    /// `λ_θ(H, w_{(H,π,s)})` for the class itself.
    pub fn lambda_class(&self, c: usize, cs: &ColorState) -> ExtRational {
        lambda_theta(&self.family.classes[c].graph, &self.weight_vector(c, cs), &self.theta)
    }

    /// `min_{J ⊆ H} λ_θ(J, w_{(J,π|_J,s)})` over subgraphs with at least one
    /// vertex (induced subgraphs only when the family is induced).
    pub fn lambda_from_state(&self, c: usize, cs: &ColorState) -> ExtRational {
        let mut best: Option<ExtRational> = None;
        for_each_subgraph(&self.family.classes[c].graph, self.family.induced, &mut |_, sub| {
            let id = self.family.lookup_graph(sub).expect("subgraph of a member of S(F) is in S(F)");
            let l = self.lambda_class(id, cs);
            if best.as_ref().is_none_or(|b| l < *b) {
                best = Some(l);
            }
        });
        best.expect("nonempty graph has a subgraph")
    }

    /// `max_{s, π} min_{H ⊆ F} λ_θ(H, w_{(H,π|_H,s)})` on a finished state.
    pub fn triple_value(&self, st: &WeightState) -> ExtRational {
        let full = self.family.full_classes();
        st.colors
            .iter()
            .flat_map(|cs| full.iter().map(move |&c| self.lambda_from_state(c, cs)))
            .max()
            .expect("F has at least one ordering")
    }

    /// Exact byte encoding of everything the rest of the run depends on.
    /// With `symmetric` the colors are sorted, identifying states that differ
    /// by a color permutation.
    fn state_key(&self, st: &WeightState, variant: Variant, symmetric: bool) -> StateKey {
        let mut colors: Vec<Vec<u8>> = st
            .colors
            .iter()
            .map(|cs| {
                let mut out = Vec::with_capacity(64);
                for flags in [&cs.members, &cs.dead] {
                    for chunk in flags.chunks(8) {
                        out.push(chunk.iter().enumerate().fold(0u8, |m, (i, &b)| m | u8::from(b) << i));
                    }
                }
                for w in cs.weights.iter().zip(&cs.members).filter(|(_, &m)| m).map(|(w, _)| w) {
                    put_rational(&mut out, w.as_ref().expect("members carry weights"));
                }
                if variant == Variant::Full {
                    put_uint(&mut out, cs.forward.len() as u64);
                    for (d, l) in &cs.forward {
                        put_rational(&mut out, d);
                        put_uint(&mut out, l.len() as u64);
                        for &c in l {
                            put_uint(&mut out, c as u64);
                        }
                    }
                    put_uint(&mut out, cs.history.len() as u64);
                    for (_, d, w) in &cs.history {
                        put_rational(&mut out, d);
                        put_rational(&mut out, w);
                    }
                }
                out
            })
            .collect();
        if symmetric {
            colors.sort();
        }
        let mut key = Vec::with_capacity(colors.iter().map(|c| c.len() + 3).sum());
        for c in &colors {
            put_uint(&mut key, c.len() as u64);
            key.extend_from_slice(c);
        }
        StateKey(key.into_boxed_slice())
    }
}

fn put_uint(out: &mut Vec<u8>, mut x: u64) {
    while x >= 0x80 {
        out.push(x as u8 | 0x80);
        x >>= 7;
    }
    out.push(x as u8);
}

fn put_rational(out: &mut Vec<u8>, q: &Rational) {
    match q.to_i64_pair() {
        Some((n, d)) => {
            out.push(0);
            put_uint(out, ((n << 1) ^ (n >> 63)) as u64);
            put_uint(out, d as u64);
        }
        None => {
            out.push(1);
            for part in [q.numer().to_signed_bytes_le(), q.denom().to_signed_bytes_le()] {
                put_uint(out, part.len() as u64);
                out.extend_from_slice(&part);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct StateKey(Box<[u8]>);

impl StateKey {
    /// Key plus table-entry overhead (value, hash slot, allocator slack).
    fn approx_bytes(&self) -> usize {
        self.0.len().next_multiple_of(16) + 192
    }
}

/// Where position `q` goes when position `k` becomes the youngest.
pub fn partner_position(q: usize, k: usize) -> usize {
    match q.cmp(&k) {
        Ordering::Equal => 0,
        Ordering::Less => q + 1,
        Ordering::Greater => q,
    }
}

/// Order-preserving embedding of `a` into `b` (both positional) that maps
/// position 0 to position 0.
fn embeds_at_youngest(a: &[u32], b: &[u32], induced: bool) -> bool {
    let (na, nb) = (a.len(), b.len());
    if na > nb {
        return false;
    }
    fn rec(i: usize, from: usize, a: &[u32], b: &[u32], induced: bool, map: &mut Vec<usize>) -> bool {
        if i == a.len() {
            return true;
        }
        let left = a.len() - i;
        for x in from..=b.len() - left {
            let ok = (0..i).all(|q| {
                let ea = a[i] >> q & 1 == 1;
                let eb = b[x] >> map[q] & 1 == 1;
                if induced {
                    ea == eb
                } else {
                    !ea || eb
                }
            });
            if ok {
                map[i] = x;
                if rec(i + 1, x + 1, a, b, induced, map) {
                    return true;
                }
            }
        }
        false
    }
    let mut map = vec![0; na];
    rec(1, 1, a, b, induced, &mut map)
}

/// Calls `f(positions, subgraph)` for every subgraph of the positional graph
/// `g` with at least one vertex; the subgraph is positional in the inherited
/// order. With `induced`, only induced subgraphs.
pub fn for_each_subgraph(g: &Graph, induced: bool, f: &mut dyn FnMut(&[usize], &Graph)) {
    let n = g.vertex_count();
    for vmask in 1u32..1 << n {
        let verts: Vec<usize> = (0..n).filter(|&x| vmask >> x & 1 == 1).collect();
        let sub = g.induced(&verts);
        let es = sub.edges().to_vec();
        if induced {
            f(&verts, &sub);
            continue;
        }
        for emask in 0u64..1 << es.len() {
            let chosen: Vec<(usize, usize)> =
                es.iter().enumerate().filter(|&(k, _)| emask >> k & 1 == 1).map(|(_, &e)| e).collect();
            let h = Graph::new(verts.len(), &chosen).expect("subset of edges");
            f(&verts, &h);
        }
    }
}

/// Run the full algorithm on `alpha` (padded with color 0) until some color
/// holds all of `S(F)`, checking every internal invariant on the way.
pub fn cw_full(engine: &Engine, alpha: &[usize]) -> Result<CwRun> {
    run(engine, alpha, Variant::Full)
}

/// Run the simplified variant on `alpha` until the first full copy of `F`.
pub fn cw_simplified(engine: &Engine, alpha: &[usize]) -> Result<CwRun> {
    run(engine, alpha, Variant::Simplified)
}

fn run(engine: &Engine, alpha: &[usize], variant: Variant) -> Result<CwRun> {
    let mut st = engine.initial_state();
    let mut traces = Vec::new();
    let mut used = Vec::new();
    let total = engine.family.len();
    loop {
        if st.round >= engine.max_rounds() {
            return Err(Error::Invariant(format!("no termination within {} rounds", engine.max_rounds())));
        }
        let ds = engine.round_values(&mut st)?;
        let sigma = alpha.get(st.round).copied().unwrap_or(0);
        if sigma >= engine.r {
            return Err(Error::Invalid(format!("color {} out of range", sigma + 1)));
        }
        used.push(sigma);
        let mut t = RoundTrace::default();
        let done = engine.play_round(&mut st, sigma, &ds, variant, Some(&mut t))?;
        traces.push(t);
        check_closure(engine, &st)?;
        let stop = match variant {
            Variant::Simplified => done,
            Variant::Full => st.colors.iter().any(|cs| cs.size == total),
        };
        if stop {
            break;
        }
    }
    let out = CwRun { state: st, traces, alpha: used };
    if variant == Variant::Full {
        verify_run(engine, &out).map_err(|e| Error::Invariant(format!("{e}\n{}", trace_dump(&out.traces))))?;
    }
    Ok(out)
}

fn check_closure(engine: &Engine, st: &WeightState) -> Result<()> {
    for (s, cs) in st.colors.iter().enumerate() {
        for c in 0..engine.family.len() {
            if cs.members[c] {
                if engine.family.classes[c].parent.is_some_and(|p| !cs.members[p]) {
                    return Err(Error::Invariant(format!("color {}: family not closed at class {c}", s + 1)));
                }
                if cs.weights[c].as_ref().is_none_or(|w| w.is_positive()) {
                    return Err(Error::Invariant(format!("color {}: class {c} has a positive or missing weight", s + 1)));
                }
            }
        }
    }
    Ok(())
}

/// Post-hoc checks on a full run: round monotonicity, primary-weight
/// monotonicity, the sandwich bounds of secondary placements, the round
/// bound and subgraph weight monotonicity.
pub fn verify_run(engine: &Engine, run: &CwRun) -> std::result::Result<(), String> {
    let t = &run.traces;
    if t.len() > engine.max_rounds() {
        return Err(format!("{} rounds exceed r·|S(F)| = {}", t.len(), engine.max_rounds()));
    }
    for w in t.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        for s in 0..engine.r {
            let ok = if s == a.sigma { b.ds[s] < a.ds[s] } else { b.ds[s] == a.ds[s] };
            if !ok {
                return Err(format!("round {}: d_{} moved from {} to {}", a.round, s + 1, a.ds[s], b.ds[s]));
            }
        }
    }
    for (x, a) in t.iter().enumerate() {
        for b in &t[x + 1..] {
            if a.sigma != b.sigma {
                continue;
            }
            let run_same = t[x..b.round].iter().all(|u| u.sigma == a.sigma);
            let ok = if run_same { b.w == a.w } else { b.w < a.w };
            if !ok {
                return Err(format!("rounds {} and {}: primary weights {} then {}", a.round, b.round, a.w, b.w));
            }
        }
    }
    for a in t {
        for p in &a.placements {
            let hi = &t[p.ihat - 1].ds[a.sigma];
            let Some(next) = t.get(p.ihat).map(|u| &u.ds[a.sigma]) else {
                return Err(format!("round {}: placement index {} is not earlier", a.round, p.ihat));
            };
            let ok = if p.strict { next <= &p.d && &p.d < hi } else { next < &p.d && &p.d <= hi };
            if !ok {
                return Err(format!(
                    "round {}: class {} with d = {} outside ({next}, {hi}) [strict = {}]",
                    a.round, p.class, p.d, p.strict
                ));
            }
        }
    }
    check_subgraph_monotonicity(engine, &run.state)
}

fn check_subgraph_monotonicity(engine: &Engine, st: &WeightState) -> std::result::Result<(), String> {
    let fam = &engine.family;
    for (s, cs) in st.colors.iter().enumerate() {
        for c in (0..fam.len()).filter(|&c| cs.members[c]) {
            let wh = engine.weight_vector(c, cs);
            let mut err = None;
            for_each_subgraph(&fam.classes[c].graph, fam.induced, &mut |verts, sub| {
                if err.is_some() {
                    return;
                }
                let id = fam.lookup_graph(sub).expect("subgraph class");
                if !cs.members[id] {
                    err = Some(format!("color {}: class {c} is a member but its subgraph {id} is not", s + 1));
                    return;
                }
                let wj = engine.weight_vector(id, cs);
                if verts.iter().enumerate().any(|(q, &p)| wh[p] > wj[q]) {
                    err = Some(format!("color {}: class {c} has a weight above subgraph {id}", s + 1));
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
        }
    }
    Ok(())
}

/// One line per round: `i sigma d_1 … d_r w |C^{i,*}| |C^{i,*,*}|`.
pub fn trace_dump(traces: &[RoundTrace]) -> String {
    let mut out = String::new();
    for t in traces {
        let _ = write!(out, "{} {}", t.round, t.sigma + 1);
        for d in &t.ds {
            let _ = write!(out, " {d}");
        }
        let _ = writeln!(out, " {} {} {}", t.w, t.primary_count(), t.secondary_count());
    }
    out
}

struct Search<'a> {
    engine: &'a Engine,
    variant: Variant,
    symmetric: bool,
    stop_below: Option<Rational>,
    max_states: usize,
    max_bytes: usize,
    bytes: usize,
    memo: HashMap<StateKey, (Rational, u8)>,
}

enum Abort {
    Below,
    Err(Error),
}

impl From<Error> for Abort {
    fn from(e: Error) -> Abort {
        Abort::Err(e)
    }
}

impl Search<'_> {
    fn solve(&mut self, st: &mut WeightState) -> std::result::Result<Rational, Abort> {
        let ds = self.engine.round_values(st)?;
        let sum = ds.iter().fold(Rational::one(), |a, d| a + d);
        if self.stop_below.as_ref().is_some_and(|t| sum < *t) {
            return Err(Abort::Below);
        }
        if st.round >= self.engine.max_rounds() {
            return Err(Error::Invariant("branch exceeded r·|S(F)| rounds".into()).into());
        }
        let key = self.engine.state_key(st, self.variant, self.symmetric);
        if let Some((v, _)) = self.memo.get(&key) {
            return Ok(v.clone());
        }
        let mut best: Option<(Rational, u8)> = None;
        for sigma in 0..self.engine.r {
            let mut child = st.clone();
            let done = self.engine.play_round(&mut child, sigma, &ds, self.variant, None)?;
            let v = if done { sum.clone() } else { self.solve(&mut child)? };
            if best.as_ref().is_none_or(|b| v < b.0) {
                best = Some((v, sigma as u8));
            }
        }
        if self.memo.len() >= self.max_states {
            return Err(Error::Resource(format!("more than {} states in the decision tree", self.max_states)).into());
        }
        self.bytes += key.approx_bytes();
        if self.bytes > self.max_bytes {
            return Err(Error::Resource(format!("decision-tree memo exceeds {} MiB", self.max_bytes >> 20)).into());
        }
        let best = best.expect("at least two colors");
        self.memo.insert(key, best.clone());
        Ok(best.0)
    }

    /// Follow the memoised choices from `st` to the completion round.
    fn replay(&self, mut st: WeightState, alpha: &mut Vec<usize>) -> Result<()> {
        loop {
            let ds = self.engine.round_values(&mut st)?;
            let key = self.engine.state_key(&st, self.variant, self.symmetric);
            let sigma = self.memo.get(&key).expect("visited state").1 as usize;
            alpha.push(sigma);
            if self.engine.play_round(&mut st, sigma, &ds, self.variant, None)? {
                return Ok(());
            }
        }
    }
}

fn with_big_stack<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    std::thread::scope(|s| {
        std::thread::Builder::new().stack_size(256 << 20).spawn_scoped(s, f).expect("spawn").join().expect("worker panicked")
    })
}

/// `Λ_θ(F, r)`: minimum over Painter's color sequences of the completion
/// value, with the lexicographically smallest minimiser as witness.
pub fn big_lambda(engine: &Engine, opts: &LambdaOptions) -> Result<LambdaEval> {
    let symmetric = !opts.witness;
    let new_search = || Search {
        engine,
        variant: opts.variant,
        symmetric,
        stop_below: opts.stop_below.clone(),
        max_states: opts.max_states,
        max_bytes: opts.max_memo_bytes / engine.r,
        bytes: 0,
        memo: HashMap::new(),
    };
    let finish = |r: std::result::Result<Rational, Abort>| -> Result<Option<Rational>> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(Abort::Below) => Ok(None),
            Err(Abort::Err(e)) => Err(e),
        }
    };
    let mut root = engine.initial_state();
    let ds = engine.round_values(&mut root)?;
    let sum = ds.iter().fold(Rational::one(), |a, d| a + d);
    if opts.stop_below.as_ref().is_some_and(|t| sum < *t) {
        return Ok(LambdaEval::Below);
    }
    // The root branches are solved independently (in parallel when asked);
    // the reduction below is order-independent.
    let mut branches = Vec::new();
    for sigma in 0..engine.r {
        let mut child = root.clone();
        let done = engine.play_round(&mut child, sigma, &ds, opts.variant, None)?;
        branches.push((sigma, child, done));
    }
    let solve_branch = |(_, child, done): &(usize, WeightState, bool)| -> (Result<Option<Rational>>, Search) {
        let mut s = new_search();
        if *done {
            return (Ok(Some(sum.clone())), s);
        }
        let mut c = child.clone();
        let r = with_big_stack(|| s.solve(&mut c));
        (finish(r), s)
    };
    let results: Vec<(Result<Option<Rational>>, Search)> = if opts.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.jobs).build().map_err(|e| Error::Resource(e.to_string()))?;
        pool.install(|| {
            use rayon::prelude::*;
            branches.par_iter().map(solve_branch).collect()
        })
    } else {
        branches.iter().map(solve_branch).collect()
    };
    let mut best: Option<(Rational, usize)> = None;
    let mut below = false;
    let mut explored = 0;
    let mut searches = Vec::new();
    for (k, (r, s)) in results.into_iter().enumerate() {
        explored += s.memo.len();
        searches.push(s);
        match r? {
            None => below = true,
            Some(v) => {
                if best.as_ref().is_none_or(|b| v < b.0) {
                    best = Some((v, k));
                }
            }
        }
    }
    if below {
        return Ok(LambdaEval::Below);
    }
    let (value, k) = best.expect("at least two colors");
    let mut alpha = Vec::new();
    if opts.witness {
        alpha.push(k);
        if !branches[k].2 {
            searches[k].replay(branches[k].1.clone(), &mut alpha)?;
        }
    }
    Ok(LambdaEval::Exact(DecisionOutcome { value, alpha, states_explored: explored }))
}

/// Exact `Λ_θ(F, r)` with witness.
pub fn lambda_value(engine: &Engine, variant: Variant, jobs: usize) -> Result<DecisionOutcome> {
    let opts = LambdaOptions { variant, jobs, ..LambdaOptions::default() };
    match big_lambda(engine, &opts)? {
        LambdaEval::Exact(o) => Ok(o),
        LambdaEval::Below => unreachable!("no threshold was set"),
    }
}

/// Sign of `Λ_θ(F, r)`, stopping at the first negative branch.
pub fn lambda_sign(engine: &Engine, jobs: usize) -> Result<Ordering> {
    let opts = LambdaOptions { jobs, stop_below: Some(Rational::zero()), witness: false, ..LambdaOptions::default() };
    Ok(match big_lambda(engine, &opts)? {
        LambdaEval::Below => Ordering::Less,
        LambdaEval::Exact(o) => o.value.cmp(&Rational::zero()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn engine(f: &Graph, theta: &str) -> Engine {
        Engine::for_graph(f, 2, q(theta), false).unwrap()
    }

    #[test]
    fn first_round_k2() {
        let e = engine(&Graph::complete(2), "1");
        let run = cw_full(&e, &[0; 6]).unwrap();
        let t = &run.traces[0];
        assert_eq!(t.ds, vec![q("0"), q("0")]);
        assert_eq!(t.w, q("0"));
        assert_eq!(t.primary[0], vec![0]);
        assert_eq!(run.state.colors[0].weights[0], Some(q("0")));
    }

    #[test]
    fn k3_lambda_signs() {
        let k3 = Graph::complete(3);
        assert_eq!(lambda_value(&engine(&k3, "3/4"), Variant::Simplified, 1).unwrap().value, q("0"));
        assert!(lambda_value(&engine(&k3, "1/2"), Variant::Simplified, 1).unwrap().value.is_positive());
        assert!(lambda_value(&engine(&k3, "1"), Variant::Simplified, 1).unwrap().value.is_negative());
        assert_eq!(lambda_sign(&engine(&k3, "1"), 1).unwrap(), Ordering::Less);
        assert_eq!(lambda_sign(&engine(&k3, "3/4"), 1).unwrap(), Ordering::Equal);
    }

    #[test]
    fn full_and_simplified_agree_on_k3() {
        let e = engine(&Graph::complete(3), "3/4");
        let a = lambda_value(&e, Variant::Simplified, 1).unwrap();
        let b = lambda_value(&e, Variant::Full, 1).unwrap();
        assert_eq!(a.value, b.value);
        let run = cw_full(&e, &b.alpha).unwrap();
        assert_eq!(run.state.completion.as_ref().unwrap().value, b.value);
        assert_eq!(e.triple_value(&run.state), ExtRational::Finite(b.value));
    }

    #[test]
    fn parallel_root_split_is_deterministic() {
        let e = engine(&Graph::path(3), "9/8");
        let a = lambda_value(&e, Variant::Simplified, 1).unwrap();
        let b = lambda_value(&e, Variant::Simplified, 4).unwrap();
        assert_eq!((a.value, a.alpha), (b.value, b.alpha));
    }
}
