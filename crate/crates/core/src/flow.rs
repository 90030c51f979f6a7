//! Exact minimisation of `μ_θ` over vertex sets via a max-closure min cut.
//!
//! `μ_θ(S) = |S| - e(S)·θ` is submodular in `S`, and minimising
//! `q|S| - p·e(S)` (for `θ = p/q`) over supersets of a forced set is the
//! classic selection problem: edge items earn `p`, vertex items cost `q`.

use crate::rational::Rational;

struct Dinic {
    head: Vec<usize>,
    to: Vec<usize>,
    cap: Vec<i64>,
    next: Vec<usize>,
    level: Vec<i32>,
    it: Vec<usize>,
}

const NIL: usize = usize::MAX;

impl Dinic {
    fn new(n: usize) -> Dinic {
        Dinic { head: vec![NIL; n], to: vec![], cap: vec![], next: vec![], level: vec![0; n], it: vec![0; n] }
    }

    fn add(&mut self, a: usize, b: usize, c: i64) {
        for (x, y, cc) in [(a, b, c), (b, a, 0)] {
            self.to.push(y);
            self.cap.push(cc);
            self.next.push(self.head[x]);
            self.head[x] = self.to.len() - 1;
        }
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        let mut q = std::collections::VecDeque::from([s]);
        self.level[s] = 0;
        while let Some(x) = q.pop_front() {
            let mut e = self.head[x];
            while e != NIL {
                if self.cap[e] > 0 && self.level[self.to[e]] < 0 {
                    self.level[self.to[e]] = self.level[x] + 1;
                    q.push_back(self.to[e]);
                }
                e = self.next[e];
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, x: usize, t: usize, f: i64) -> i64 {
        if x == t {
            return f;
        }
        while self.it[x] != NIL {
            let e = self.it[x];
            let y = self.to[e];
            if self.cap[e] > 0 && self.level[y] == self.level[x] + 1 {
                let d = self.dfs(y, t, f.min(self.cap[e]));
                if d > 0 {
                    self.cap[e] -= d;
                    self.cap[e ^ 1] += d;
                    return d;
                }
            }
            self.it[x] = self.next[e];
        }
        0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let mut flow = 0;
        while self.bfs(s, t) {
            self.it.clone_from(&self.head);
            loop {
                let f = self.dfs(s, t, i64::MAX);
                if f == 0 {
                    break;
                }
                flow += f;
            }
        }
        flow
    }

    fn source_side(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.head.len()];
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(x) = stack.pop() {
            let mut e = self.head[x];
            while e != NIL {
                if self.cap[e] > 0 && !seen[self.to[e]] {
                    seen[self.to[e]] = true;
                    stack.push(self.to[e]);
                }
                e = self.next[e];
            }
        }
        seen
    }
}

/// Minimise `a·|S| - b·e(S)` over `S ⊇ forced` (`a, b ≥ 0`). Returns the
/// optimum and the smallest optimal set (ascending).
pub fn min_closure(n: usize, edges: &[(usize, usize)], a: i64, b: i64, forced: &[usize]) -> (i128, Vec<usize>) {
    assert!(a >= 0 && b >= 0);
    let m = edges.len();
    let (s, t) = (n + m, n + m + 1);
    let mut g = Dinic::new(n + m + 2);
    let total_b = b.checked_mul(m as i64).expect("capacity overflow");
    let inf = total_b.checked_add(a.checked_mul(n as i64 + 1).expect("capacity overflow")).expect("capacity overflow") + 1;
    for (k, &(x, y)) in edges.iter().enumerate() {
        g.add(s, n + k, b);
        g.add(n + k, x, inf);
        g.add(n + k, y, inf);
    }
    for v in 0..n {
        g.add(v, t, a);
    }
    for &v in forced {
        g.add(s, v, inf);
    }
    let cut = g.max_flow(s, t);
    let side = g.source_side(s);
    let set: Vec<usize> = (0..n).filter(|&v| side[v]).collect();
    (cut as i128 - total_b as i128, set)
}

/// `min μ_θ(S)` over `S ⊇ forced` for the graph `(n, edges)`; with empty
/// `forced` the empty set (value 0) is allowed.
pub fn min_mu_containing(n: usize, edges: &[(usize, usize)], theta: &Rational, forced: &[usize]) -> (Rational, Vec<usize>) {
    let (p, q) = theta.to_i64_pair().expect("theta numerator/denominator exceed i64");
    assert!(p > 0, "theta must be positive");
    let (val, set) = min_closure(n, edges, q, p, forced);
    let v = i64::try_from(val).expect("mu value exceeds i64");
    (Rational::new(v, q), set)
}

/// `min μ_θ(S)` over nonempty `S`, with a minimiser.
pub fn min_mu_nonempty(n: usize, edges: &[(usize, usize)], theta: &Rational) -> Option<(Rational, Vec<usize>)> {
    (0..n).map(|v| min_mu_containing(n, edges, theta, &[v])).min_by(|a, b| a.0.cmp(&b.0).then(a.1.len().cmp(&b.1.len())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(n: usize, edges: &[(usize, usize)], theta: &Rational, forced: &[usize]) -> Rational {
        let mut best: Option<Rational> = None;
        for mask in 0u32..(1 << n) {
            if forced.iter().any(|&f| mask >> f & 1 == 0) {
                continue;
            }
            let e = edges.iter().filter(|&&(a, b)| mask >> a & 1 == 1 && mask >> b & 1 == 1).count();
            let v = Rational::from_int(mask.count_ones() as i64) - Rational::from_int(e as i64) * theta;
            if best.as_ref().is_none_or(|b| v < *b) {
                best = Some(v);
            }
        }
        best.unwrap()
    }

    #[test]
    fn matches_brute_force_on_k4_plus_pendant() {
        let edges = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3), (3, 4)];
        for (p, q) in [(1, 2), (2, 3), (3, 4), (1, 1), (3, 2), (2, 1)] {
            let th = Rational::new(p, q);
            for forced in [vec![], vec![4], vec![0, 4]] {
                let (v, set) = min_mu_containing(5, &edges, &th, &forced);
                assert_eq!(v, brute(5, &edges, &th, &forced), "theta {th} forced {forced:?}");
                let e = edges.iter().filter(|(a, b)| set.contains(a) && set.contains(b)).count();
                assert_eq!(v, Rational::from_int(set.len() as i64) - Rational::from_int(e as i64) * &th);
            }
        }
    }
}
