use proptest::prelude::*;

use online_ramsey::builder::{find_dominating_color, is_dominating};
use online_ramsey::game::{
    detect_mono, detect_mono_at, legal, legal_from_scratch, solve_game_exhaustive, GameConfig, OracleOptions, Restriction, Winner,
};
use online_ramsey::graph::{canonical_key, enumerate_ordered_subgraphs};
use online_ramsey::painter::{PriorityEntry, PriorityList};
use online_ramsey::process::{sweep, PainterSpec, SweepPoint};
use online_ramsey::rational::mu_theta;
use online_ramsey::weights::{cw_full, Engine};
use online_ramsey::{Board, ExtRational, Graph, OrderedGraph, Rational};

fn small_rational() -> impl Strategy<Value = Rational> {
    (-50i64..50, 1i64..30).prop_map(|(n, d)| Rational::new(n, d))
}

/// Rationals near the i64 boundary, to exercise promotion.
fn wide_rational() -> impl Strategy<Value = Rational> {
    (any::<i64>(), 1i64..=i64::MAX).prop_map(|(n, d)| Rational::new(n, d))
}

fn graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (1..=max_n).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        let m = pairs.len();
        proptest::collection::vec(any::<bool>(), m).prop_map(move |keep| {
            let edges: Vec<(usize, usize)> = pairs.iter().zip(&keep).filter(|(_, &k)| k).map(|(&e, _)| e).collect();
            Graph::new(n, &edges).unwrap()
        })
    })
}

/// A colored board grown vertex by vertex with random back-edges.
fn board(max_n: usize) -> impl Strategy<Value = Board> {
    proptest::collection::vec((proptest::collection::vec(any::<bool>(), max_n), 0usize..2), 1..=max_n).prop_map(|spec| {
        let mut b = Board::new(2);
        for (v, (mask, c)) in spec.iter().enumerate() {
            let nb: Vec<usize> = (0..v).filter(|&u| mask[u]).collect();
            b.add_vertex(&nb);
            b.set_color(v, *c);
        }
        b
    })
}

fn to_q(x: &Rational) -> (i128, i128) {
    let (n, d) = x.to_i64_pair().unwrap();
    (n as i128, d as i128)
}

proptest! {
    #[test]
    fn rational_field_laws(a in small_rational(), b in small_rational(), c in small_rational()) {
        prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert_eq!(&(&a - &b) + &b, a.clone());
        if !b.is_zero() {
            prop_assert_eq!(&(&a / &b) * &b, a.clone());
        }
    }

    #[test]
    fn rational_order_matches_cross_multiplication(a in small_rational(), b in small_rational()) {
        let ((an, ad), (bn, bd)) = (to_q(&a), to_q(&b));
        prop_assert_eq!(a.cmp(&b), (an * bd).cmp(&(bn * ad)));
    }

    #[test]
    fn rational_promotion_is_exact(a in wide_rational(), b in wide_rational()) {
        let sum = &a + &b;
        prop_assert_eq!(sum.to_big(), a.to_big() + b.to_big());
        let prod = &a * &b;
        prop_assert_eq!(prod.to_big(), a.to_big() * b.to_big());
        prop_assert_eq!(&(&sum - &b), &a);
    }

    #[test]
    fn rational_text_round_trip(a in wide_rational()) {
        let back: Rational = a.to_string().parse().unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn edge_list_round_trip(g in graph(7)) {
        let text = g.to_edge_list();
        prop_assert_eq!(Graph::parse_edge_list(&text).unwrap(), g);
    }

    #[test]
    fn canonical_key_ignores_labels(g in graph(6), seed in any::<u64>()) {
        let n = g.vertex_count();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        // relabel v -> perm[v]; the youngest-first ordering follows the labels
        let edges: Vec<(usize, usize)> = g.edges().iter().map(|&(a, b)| (perm[a].min(perm[b]), perm[a].max(perm[b]))).collect();
        let h = Graph::new(n, &edges).unwrap();
        let ordering: Vec<usize> = (0..n).map(|i| perm[i]).collect();
        prop_assert_eq!(canonical_key(&OrderedGraph::positional(g)), canonical_key(&OrderedGraph::new(h, ordering)));
    }

    #[test]
    fn dominating_color_is_dominating(d1 in 1usize..4, d2 in 1usize..4, d3 in 1usize..3, table in proptest::collection::vec(0usize..3, 36)) {
        let dims = [d1, d2, d3];
        let f = |t: &[usize]| table[(t[0] * 4 + t[1]) * 3 + t[2]];
        let sigma = find_dominating_color(&dims, &f);
        prop_assert!(is_dominating(&dims, &f, sigma));
        for s in 0..sigma {
            prop_assert!(!is_dominating(&dims, &f, s));
        }
    }

    #[test]
    fn incremental_mono_detection_agrees(b in board(9), which in 0usize..3) {
        let f = [Graph::complete(3), Graph::path(3), Graph::cycle(4)][which].clone();
        // the first vertex completing a copy, found incrementally
        let mut partial = Board::new(2);
        let mut first = None;
        for v in 0..b.vertex_count() {
            let nb: Vec<usize> = b.neighbors(v).iter().copied().filter(|&u| u < v).collect();
            partial.add_vertex(&nb);
            partial.set_color(v, b.color(v).unwrap());
            if first.is_none() && detect_mono_at(&partial, &f, v).is_some() {
                first = Some(v);
            }
        }
        prop_assert_eq!(first.is_some(), detect_mono(&b, &f).is_some());
    }

    #[test]
    fn incremental_legality_agrees(b in board(8), nb_mask in proptest::collection::vec(any::<bool>(), 8), d in (2i64..12, 2i64..8)) {
        let cfg = GameConfig::new(Graph::complete(3), 2, Restriction::Density(Rational::new(d.0, d.1))).unwrap();
        prop_assume!(legal_from_scratch(&b, &cfg));
        let nb: Vec<usize> = (0..b.vertex_count()).filter(|&u| nb_mask[u]).collect();
        let fast = legal(&b, &nb, &cfg);
        let mut next = b.clone();
        let v = next.add_vertex(&nb);
        next.set_color(v, 0);
        prop_assert_eq!(fast, legal_from_scratch(&next, &cfg));
    }

    #[test]
    fn priority_list_round_trip(specs in proptest::collection::vec((graph(4), 0usize..3, proptest::option::of(small_rational()), any::<bool>()), 1..12)) {
        let entries = specs
            .into_iter()
            .map(|(g, color, lam, flag)| {
                let og = OrderedGraph::positional(g);
                PriorityEntry {
                    key: canonical_key(&og),
                    graph: og.to_positional(),
                    color,
                    lambda: lam.map_or(ExtRational::NegInf, ExtRational::Finite),
                    flag,
                }
            })
            .collect();
        let list = PriorityList::new(3, entries);
        prop_assert_eq!(PriorityList::import(&list.export()).unwrap(), list);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weight_runs_keep_invariants(which in 0usize..4, alpha in proptest::collection::vec(0usize..2, 40), th in (1i64..7, 2i64..6)) {
        let f = [Graph::complete(2), Graph::complete(3), Graph::path(3), Graph::path(4)][which].clone();
        let theta = Rational::new(th.0, th.1);
        let e = Engine::for_graph(&f, 2, theta, false).unwrap();
        let run = cw_full(&e, &alpha).unwrap();
        prop_assert!(run.traces.len() <= e.max_rounds());
        // round values fall only in the chosen color
        for w in run.traces.windows(2) {
            for s in 0..2 {
                if s == w[0].sigma {
                    prop_assert!(w[1].ds[s] < w[0].ds[s]);
                } else {
                    prop_assert_eq!(&w[1].ds[s], &w[0].ds[s]);
                }
            }
        }
    }

    #[test]
    fn family_is_closed_under_parents(g in graph(5)) {
        prop_assume!(g.edge_count() > 0);
        let fam = enumerate_ordered_subgraphs(&g, false).unwrap();
        for info in &fam.classes {
            if let Some(p) = info.parent {
                prop_assert_eq!(fam.classes[p].vertex_count() + 1, info.vertex_count());
            }
            prop_assert!(mu_theta(&info.graph, &Rational::zero()).is_positive());
        }
    }

    #[test]
    fn builder_wins_survive_looser_restrictions(a in (1i64..6, 1i64..6), b in (1i64..6, 1i64..6)) {
        let (x, y) = (Rational::new(a.0, a.1), Rational::new(b.0, b.1));
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        let solve = |d: Rational| {
            let cfg = GameConfig::new(Graph::complete(2), 2, Restriction::Density(d)).unwrap();
            solve_game_exhaustive(&cfg, 4, &OracleOptions::default()).unwrap().winner
        };
        if solve(lo) == Winner::Builder {
            prop_assert_eq!(solve(hi), Winner::Builder);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn sweeps_are_reproducible(seed in any::<u64>(), jobs in 2usize..5) {
        let pts = [SweepPoint::Exponent(0.75), SweepPoint::Probability(0.05)];
        let k3 = Graph::complete(3);
        let a = sweep(&k3, 2, 120, &pts, 12, seed, &PainterSpec::Greedy, 1).unwrap();
        let b = sweep(&k3, 2, 120, &pts, 12, seed, &PainterSpec::Greedy, jobs).unwrap();
        prop_assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn survival_is_monotone_per_trial(seed in any::<u64>()) {
        // coupled trials: a graph at lower p is a subgraph of the one at
        // higher p, but the painter's choices differ, so only the extreme
        // regimes are forced
        let k3 = Graph::complete(3);
        let pts = [SweepPoint::Probability(0.0), SweepPoint::Probability(1.0)];
        let r = sweep(&k3, 2, 6, &pts, 5, seed, &PainterSpec::Greedy, 1).unwrap();
        prop_assert_eq!(r.rows[0].survivals, 5);
        prop_assert_eq!(r.rows[1].survivals, 0);
    }
}
