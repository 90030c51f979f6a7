//! Root search for `θ*` and the closed-form reference densities.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::graph::{enumerate_ordered_subgraphs, Graph};
use crate::rational::Rational;
use crate::weights::{lambda_sign, lambda_value, Engine, Variant};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct DensityOptions {
    pub max_den: u64,
    pub induced: bool,
    pub jobs: usize,
}

impl Default for DensityOptions {
    fn default() -> Self {
        DensityOptions { max_den: 64, induced: false, jobs: 1 }
    }
}

#[derive(Clone, Debug)]
pub struct DensityResult {
    pub theta_star: Rational,
    pub m1_star: Rational,
    pub alpha_star: Vec<usize>,
    /// Every `θ` evaluated, in evaluation order, with the sign of `Λ_θ`.
    pub log: Vec<(Rational, Ordering)>,
}

/// All reduced fractions in the open interval `(lo, hi)` with denominator at
/// most `max_den`, ascending (in-order Stern–Brocot walk).
pub fn rationals_in_interval(lo: &Rational, hi: &Rational, max_den: u64) -> Vec<Rational> {
    let mut out = Vec::new();
    if lo >= hi || max_den == 0 {
        return out;
    }
    let max_den = max_den as i64;
    // (a/b, c/d) bounds of a subtree; c/d = 1/0 is +inf.
    enum Item {
        Visit(i64, i64, i64, i64),
        Emit(Rational),
    }
    let mut stack = vec![Item::Visit(0, 1, 1, 0)];
    while let Some(item) = stack.pop() {
        match item {
            Item::Emit(x) => out.push(x),
            Item::Visit(a, b, c, d) => {
                let (p, q) = (a + c, b + d);
                if q > max_den {
                    continue;
                }
                let m = Rational::new(p, q);
                // push in reverse in-order: right subtree, node, left subtree
                if m < *hi {
                    stack.push(Item::Visit(p, q, c, d));
                }
                if m > *lo && m < *hi {
                    stack.push(Item::Emit(m.clone()));
                }
                if m > *lo {
                    stack.push(Item::Visit(a, b, p, q));
                }
            }
        }
    }
    out
}

/// `m₁*(F, r) = 1/θ*` where `θ*` is the root of `Λ_θ(F, r)`.
///
/// Alternates one bisection step with scanning every fraction of bounded
/// denominator in the current bracket; the bound doubles up to `max_den`.
pub fn online_vertex_ramsey_density(f: &Graph, r: usize, opts: &DensityOptions) -> Result<DensityResult> {
    if r < 2 {
        return Err(Error::Invalid(format!("need at least 2 colors, got {r}")));
    }
    let family = enumerate_ordered_subgraphs(f, opts.induced)?;
    let sign = |theta: &Rational| -> Result<Ordering> {
        let e = Engine::new(family.clone(), r, theta.clone())?;
        lambda_sign(&e, 1)
    };
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(opts.jobs.max(1)).build().map_err(|e| Error::Resource(e.to_string()))?;
    let (mut lo, mut hi) = (Rational::zero(), Rational::from_int(2));
    let mut log = Vec::new();
    let mut bound = 1u64;
    loop {
        let cands = rationals_in_interval(&lo, &hi, bound);
        let signs: Vec<Result<Ordering>> = pool.install(|| cands.par_iter().map(sign).collect());
        for (theta, s) in cands.into_iter().zip(signs) {
            let s = s?;
            log.push((theta.clone(), s));
            match s {
                Ordering::Equal => {
                    let e = Engine::new(family.clone(), r, theta.clone())?;
                    let out = lambda_value(&e, Variant::Simplified, opts.jobs)?;
                    return Ok(DensityResult { m1_star: theta.recip(), theta_star: theta, alpha_star: out.alpha, log });
                }
                Ordering::Greater => lo = Rational::max(lo, theta),
                Ordering::Less => hi = Rational::min(hi, theta),
            }
        }
        let mid = Rational::midpoint(&lo, &hi);
        let s = sign(&mid)?;
        log.push((mid.clone(), s));
        match s {
            Ordering::Equal => {
                let e = Engine::new(family.clone(), r, mid.clone())?;
                let out = lambda_value(&e, Variant::Simplified, opts.jobs)?;
                return Ok(DensityResult { m1_star: mid.recip(), theta_star: mid, alpha_star: out.alpha, log });
            }
            Ordering::Greater => lo = mid,
            Ordering::Less => hi = mid,
        }
        if bound >= opts.max_den {
            return Err(Error::Resource(format!("no root with denominator <= {}; theta* lies in ({lo}, {hi})", opts.max_den)));
        }
        bound = (bound * 2).min(opts.max_den);
    }
}

fn induced_counts(f: &Graph) -> Vec<(usize, usize)> {
    let n = f.vertex_count();
    let adj = f.adjacency_masks();
    (1u32..1 << n)
        .map(|m| {
            let e: u32 = (0..n).filter(|&x| m >> x & 1 == 1).map(|x| (adj[x] & m).count_ones()).sum();
            (m.count_ones() as usize, e as usize / 2)
        })
        .collect()
}

/// `m₁(F) = max_{H ⊆ F, v(H) ≥ 2} e(H)/(v(H) - 1)`.
pub fn m1(f: &Graph) -> Rational {
    induced_counts(f)
        .into_iter()
        .filter(|&(v, _)| v >= 2)
        .map(|(v, e)| Rational::new(e as i64, v as i64 - 1))
        .max()
        .expect("at least two vertices")
}

/// The greedy density `m̄₁(F, r)`.
pub fn m1_bar(f: &Graph, r: usize) -> Rational {
    assert!(r >= 1);
    let counts = induced_counts(f);
    let mut prev = Rational::zero();
    for _ in 0..r {
        prev = counts
            .iter()
            .map(|&(v, e)| (Rational::from_int(e as i64) + &prev) / Rational::from_int(v as i64))
            .max()
            .expect("nonempty graph");
    }
    prev
}

/// For a forest, `k` with `m₁* = (k - 1)/k`.
pub fn k_star_from_density(f: &Graph, m1_star: &Rational) -> Result<u64> {
    if !f.is_forest() {
        return Err(Error::Invalid("tree-size conversion needs a forest".into()));
    }
    let gap = Rational::one() - m1_star;
    if !gap.is_positive() {
        return Err(Error::Invalid(format!("{m1_star} is not of the form (k-1)/k")));
    }
    let k = gap.recip();
    if !k.is_integer() {
        return Err(Error::Invalid(format!("{m1_star} is not of the form (k-1)/k")));
    }
    u64::try_from(k.numer()).map_err(|_| Error::Invalid(format!("k = {k} is too large")))
}
