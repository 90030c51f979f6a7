//! Online coloring of `G(n, p)` revealed by vertex exposure, and survival
//! sweeps across `p`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::board::Board;
use crate::game::detect_mono_at;
use crate::graph::Graph;
use crate::painter::{ColoringStrategy, GreedyPainter, PaintPainter, PriorityList};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct ProcessConfig {
    pub n: usize,
    pub p: f64,
    pub f: Graph,
    pub r: usize,
    pub seed: u64,
    pub trials: usize,
}

impl ProcessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.trials == 0 {
            return Err(Error::Invalid("need n >= 1 and trials >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Invalid(format!("p = {} is not a probability", self.p)));
        }
        if self.r == 0 {
            return Err(Error::Invalid("need at least one color".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub survived: bool,
    /// Vertex whose coloring completed the first monochromatic `F`.
    pub failed_at: Option<usize>,
    pub board: Board,
}

/// Generator for the back-edges of `vertex` in `trial`; keyed only by the
/// triple, so trials and vertices need no shared state.
fn vertex_rng(seed: u64, trial: u64, vertex: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    key[16..24].copy_from_slice(&vertex.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// One exposure run. Every pair gets its own uniform, so runs with the same
/// `(seed, trial)` at different `p` see nested graphs.
pub fn run_trial(cfg: &ProcessConfig, trial: u64, painter: &mut dyn ColoringStrategy) -> Result<TrialOutcome> {
    let mut board = Board::new(cfg.r);
    let mut nb = Vec::new();
    for v in 0..cfg.n {
        let mut rng = vertex_rng(cfg.seed, trial, v as u64);
        nb.clear();
        for u in 0..v {
            let x: f64 = rng.random();
            if x < cfg.p {
                nb.push(u);
            }
        }
        board.add_vertex(&nb);
        let c = painter.choose(&board)?;
        board.set_color(v, c);
        if detect_mono_at(&board, &cfg.f, v).is_some() {
            return Ok(TrialOutcome { survived: false, failed_at: Some(v), board });
        }
    }
    Ok(TrialOutcome { survived: true, failed_at: None, board })
}

/// Which painter a sweep uses; each trial gets a fresh instance.
#[derive(Clone, Debug)]
pub enum PainterSpec {
    /// Priority-list strategy, with unsettled ties resolved by fallback.
    Paint(PriorityList),
    Greedy,
}

impl PainterSpec {
    fn make(&self, f: &Graph, r: usize) -> Box<dyn ColoringStrategy> {
        match self {
            PainterSpec::Paint(list) => Box::new(PaintPainter::lenient(list.clone())),
            PainterSpec::Greedy => Box::new(GreedyPainter::new(f, r)),
        }
    }
}

/// A sweep point: `p = n^{-γ}` or a direct probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SweepPoint {
    Exponent(f64),
    Probability(f64),
}

impl SweepPoint {
    pub fn probability(&self, n: usize) -> f64 {
        match *self {
            SweepPoint::Exponent(g) => (n as f64).powf(-g),
            SweepPoint::Probability(p) => p,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub p_exponent: Option<f64>,
    pub p: f64,
    pub trials: usize,
    pub survivals: usize,
}

impl SweepRow {
    pub fn rate(&self) -> f64 {
        self.survivals as f64 / self.trials as f64
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepResult {
    /// Ascending in `p`.
    pub rows: Vec<SweepRow>,
}

/// Survival counts per point. Trial `k` uses the same sub-seed at every
/// point, and the totals do not depend on `jobs`.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    f: &Graph,
    r: usize,
    n: usize,
    points: &[SweepPoint],
    trials: usize,
    seed: u64,
    painter: &PainterSpec,
    jobs: usize,
) -> Result<SweepResult> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().map_err(|e| Error::Resource(e.to_string()))?;
    let mut rows = Vec::with_capacity(points.len());
    for pt in points {
        let cfg = ProcessConfig { n, p: pt.probability(n), f: f.clone(), r, seed, trials };
        cfg.validate()?;
        let outcomes: Vec<Result<bool>> = pool.install(|| {
            (0..trials as u64)
                .into_par_iter()
                .map(|t| run_trial(&cfg, t, painter.make(f, r).as_mut()).map(|o| o.survived))
                .collect()
        });
        let mut survivals = 0;
        for o in outcomes {
            survivals += usize::from(o?);
        }
        let p_exponent = match pt {
            SweepPoint::Exponent(g) => Some(*g),
            SweepPoint::Probability(_) => None,
        };
        rows.push(SweepRow { n, p_exponent, p: cfg.p, trials, survivals });
    }
    rows.sort_by(|a, b| a.p.total_cmp(&b.p));
    Ok(SweepResult { rows })
}

impl SweepResult {
    /// `n,p_exponent,p,trials,survivals,rate`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,p_exponent,p,trials,survivals,rate\n");
        for row in &self.rows {
            let g = row.p_exponent.map(|g| g.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{g},{:.6e},{},{},{:.4}", row.n, row.p, row.trials, row.survivals, row.rate());
        }
        out
    }

    /// Two columns, `log10(p)` and the survival rate.
    pub fn to_points(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let _ = writeln!(out, "{:.6} {:.4}", row.p.log10(), row.rate());
        }
        out
    }

    /// Adjacent rows whose survival rate rises with `p` by more than
    /// two-proportion noise at the given `z`.
    pub fn monotonicity_violations(&self, z: f64) -> Vec<(usize, usize)> {
        let mut bad = Vec::new();
        for (i, w) in self.rows.windows(2).enumerate() {
            let (a, b) = (&w[0], &w[1]);
            let pooled = (a.survivals + b.survivals) as f64 / (a.trials + b.trials) as f64;
            let se = (pooled * (1.0 - pooled) * (1.0 / a.trials as f64 + 1.0 / b.trials as f64)).sqrt();
            if b.rate() - a.rate() > z * se + 1e-12 {
                bad.push((i, i + 1));
            }
        }
        bad
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    let (k, n) = (k as f64, n as f64);
    let ph = k / n;
    let denom = 1.0 + z * z / n;
    let centre = (ph + z * z / (2.0 * n)) / denom;
    let half = z * (ph * (1.0 - ph) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Exponent `γ` at which survival crosses 1/2: pool adjacent violators to
/// make the rates monotone, then interpolate linearly in `log p`.
pub fn estimate_crossover(result: &SweepResult) -> Result<f64> {
    let rows = &result.rows;
    if rows.len() < 2 {
        return Err(Error::Invalid("not bracketed: need at least two points".into()));
    }
    let n = rows[0].n as f64;
    // survival should fall with p: isotonic (non-increasing) fit
    let mut blocks: Vec<(f64, f64, usize)> = Vec::new(); // (sum, weight, count)
    for row in rows {
        blocks.push((row.rate() * row.trials as f64, row.trials as f64, 1));
        while blocks.len() >= 2 {
            let (b, a) = (blocks[blocks.len() - 1], blocks[blocks.len() - 2]);
            if b.0 / b.1 > a.0 / a.1 {
                blocks.pop();
                let last = blocks.last_mut().expect("two blocks");
                *last = (a.0 + b.0, a.1 + b.1, a.2 + b.2);
            } else {
                break;
            }
        }
    }
    let fitted: Vec<f64> = blocks.iter().flat_map(|&(s, w, c)| std::iter::repeat_n(s / w, c)).collect();
    for i in 0..rows.len() - 1 {
        let (ya, yb) = (fitted[i], fitted[i + 1]);
        if ya >= 0.5 && yb < 0.5 {
            let (xa, xb) = (rows[i].p.ln(), rows[i + 1].p.ln());
            let t = (ya - 0.5) / (ya - yb);
            let x = xa + t * (xb - xa);
            return Ok(-x / n.ln());
        }
    }
    Err(Error::Invalid("not bracketed: survival never crosses 1/2".into()))
}
