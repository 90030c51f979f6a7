use std::cmp::Ordering;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use online_ramsey::board::Board;
use online_ramsey::builder::abuild_session;
use online_ramsey::density::{k_star_from_density, online_vertex_ramsey_density, DensityOptions};
use online_ramsey::game::{
    detect_mono_at, legal, min_winning_density, solve_game_exhaustive, GameConfig, OracleOptions, Restriction, Winner,
};
use online_ramsey::painter::{compute_witness_constants, derive_strategy, paint_decide, ColoringStrategy, PriorityList};
use online_ramsey::process::{estimate_crossover, sweep, wilson_interval, PainterSpec, SweepPoint};
use online_ramsey::weights::{big_lambda, Engine, LambdaEval, LambdaOptions, Variant};
use online_ramsey::{Error, Graph, Rational};

#[derive(Parser)]
#[command(name = "online-ramsey", version, about = "Online vertex-Ramsey densities, strategies and simulations")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct Target {
    /// Edge-list file: header `n m`, then `m` lines `u v` (0-based, u < v)
    #[arg(long)]
    graph: PathBuf,
    /// Number of colors
    #[arg(long)]
    colors: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exact m1*(F, r) by root search on Lambda
    Density {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value_t = 64)]
        max_den: u64,
        /// Work with induced subgraphs only
        #[arg(long)]
        induced_opt: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Evaluate Lambda_theta(F, r) and Painter's best color sequence
    Lambda {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        theta: String,
        #[arg(long, value_enum, default_value_t = VariantArg::Simplified)]
        variant: VariantArg,
        #[arg(long)]
        induced_opt: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Export Painter's priority list (at theta*, unless --theta is given)
    Strategy {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        theta: Option<String>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Play one side of the game over stdin/stdout
    Play {
        #[arg(long, value_enum)]
        mode: Side,
        #[command(flatten)]
        target: Target,
        #[arg(long, conflicts_with_all = ["theta", "beta"])]
        density: Option<String>,
        #[arg(long, requires = "beta")]
        theta: Option<String>,
        #[arg(long, requires = "theta")]
        beta: Option<String>,
        /// Priority list for painter mode (derived at theta* otherwise)
        #[arg(long)]
        strategy: Option<PathBuf>,
        /// Prompt a human instead of the line protocol
        #[arg(long)]
        interactive: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Exhaustive minimax over games of bounded length
    Oracle {
        #[command(flatten)]
        target: Target,
        #[arg(long, required_unless_present = "min_density")]
        density: Option<String>,
        #[arg(long)]
        max_steps: usize,
        /// Search for the smallest winning density instead
        #[arg(long)]
        min_density: bool,
        /// Disable isomorphism pruning
        #[arg(long)]
        no_prune: bool,
    },
    /// Online coloring of G(n, p) by vertex exposure
    Simulate {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        n: usize,
        /// Exponents g with p = n^-g, comma separated
        #[arg(long, value_delimiter = ',', conflicts_with = "p")]
        p_exp: Vec<f64>,
        /// Probabilities, comma separated
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = PainterArg::Paint)]
        painter: PainterArg,
        /// Priority list for the paint painter (derived at theta* otherwise)
        #[arg(long)]
        strategy: Option<PathBuf>,
        /// Also write `log10(p) rate` pairs to this file
        #[arg(long)]
        emit_points: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Simplified,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    Builder,
    Painter,
}

#[derive(Clone, Copy, ValueEnum)]
enum PainterArg {
    Paint,
    Greedy,
}

enum CliError {
    Core(Error),
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Usage(format!("i/o error: {e}"))
    }
}

type Out<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Density { target, max_den, induced_opt, jobs } => cmd_density(&target, max_den, induced_opt, jobs),
        Cmd::Lambda { target, theta, variant, induced_opt, jobs } => cmd_lambda(&target, &theta, variant, induced_opt, jobs),
        Cmd::Strategy { target, out, theta, jobs } => cmd_strategy(&target, &out, theta.as_deref(), jobs),
        Cmd::Play { mode, target, density, theta, beta, strategy, interactive, jobs } => cmd_play(
            mode,
            &target,
            density.as_deref(),
            theta.as_deref().zip(beta.as_deref()),
            strategy.as_deref(),
            interactive,
            jobs,
        ),
        Cmd::Oracle { target, density, max_steps, min_density, no_prune } => {
            cmd_oracle(&target, density.as_deref(), max_steps, min_density, no_prune)
        }
        Cmd::Simulate { target, n, p_exp, p, trials, seed, painter, strategy, emit_points, jobs } => {
            cmd_simulate(&target, n, &p_exp, &p, trials, seed, painter, strategy.as_deref(), emit_points.as_deref(), jobs)
        }
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (msg, code) = match e {
                CliError::Usage(m) => (m, 2),
                CliError::Core(e) => {
                    let code = match e {
                        Error::Resource(_) => 3,
                        Error::Invariant(_) => 1,
                        _ => 2,
                    };
                    (e.to_string(), code)
                }
            };
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn load(target: &Target) -> Out<Graph> {
    let text = fs::read_to_string(&target.graph)
        .map_err(|e| CliError::Usage(format!("cannot read graph file {}: {e}", target.graph.display())))?;
    let g = Graph::parse_edge_list(&text).map_err(|e| CliError::Usage(format!("{}: {e}", target.graph.display())))?;
    if g.edge_count() == 0 {
        return Err(CliError::Usage("F needs at least one edge".into()));
    }
    if target.colors < 2 {
        return Err(CliError::Usage(format!("--colors must be at least 2, got {}", target.colors)));
    }
    Ok(g)
}

fn rational(flag: &str, s: &str) -> Out<Rational> {
    s.parse().map_err(|_| CliError::Usage(format!("--{flag}: expected p/q or an integer, got `{s}`")))
}

fn positive(flag: &str, s: &str) -> Out<Rational> {
    let x = rational(flag, s)?;
    if !x.is_positive() {
        return Err(CliError::Usage(format!("--{flag} must be positive, got {x}")));
    }
    Ok(x)
}

fn cmd_density(target: &Target, max_den: u64, induced: bool, jobs: usize) -> Out<()> {
    let f = load(target)?;
    let res = online_vertex_ramsey_density(&f, target.colors, &DensityOptions { max_den, induced, jobs })?;
    println!("m1_star = {}  (theta_star = {})", res.m1_star, res.theta_star);
    if f.is_forest() {
        if let Ok(k) = k_star_from_density(&f, &res.m1_star) {
            println!("k_star = {k}");
        }
    }
    println!("alpha_star = {}", colors_1based(&res.alpha_star));
    Ok(())
}

fn colors_1based(a: &[usize]) -> String {
    a.iter().map(|c| (c + 1).to_string()).collect::<Vec<_>>().join(",")
}

fn cmd_lambda(target: &Target, theta: &str, variant: VariantArg, induced: bool, jobs: usize) -> Out<()> {
    let f = load(target)?;
    let theta = positive("theta", theta)?;
    let engine = Engine::for_graph(&f, target.colors, theta, induced)?;
    let variant = match variant {
        VariantArg::Simplified => Variant::Simplified,
        VariantArg::Full => Variant::Full,
    };
    let opts = LambdaOptions { variant, jobs, ..LambdaOptions::default() };
    let LambdaEval::Exact(out) = big_lambda(&engine, &opts)? else { unreachable!("no threshold set") };
    let sign = match out.value.cmp(&Rational::zero()) {
        Ordering::Greater => "positive",
        Ordering::Equal => "zero",
        Ordering::Less => "negative",
    };
    println!("lambda = {}", out.value);
    println!("sign = {sign}");
    println!("alpha = {}", colors_1based(&out.alpha));
    Ok(())
}

fn theta_star(f: &Graph, r: usize, jobs: usize) -> Out<Rational> {
    Ok(online_vertex_ramsey_density(f, r, &DensityOptions { jobs, ..DensityOptions::default() })?.theta_star)
}

fn cmd_strategy(target: &Target, out: &Path, theta: Option<&str>, jobs: usize) -> Out<()> {
    let f = load(target)?;
    let theta = match theta {
        Some(t) => positive("theta", t)?,
        None => theta_star(&f, target.colors, jobs)?,
    };
    let engine = Engine::for_graph(&f, target.colors, theta.clone(), false)?;
    let strat = derive_strategy(&engine, jobs)?;
    fs::write(out, strat.list.export()).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", out.display())))?;
    let wc = compute_witness_constants(&engine, &strat.run);
    println!("wrote {} entries to {} (theta = {theta})", strat.list.entries.len(), out.display());
    println!("alpha = {}", colors_1based(&strat.run.alpha));
    println!("epsilon = {}  v_max has {} digits", wc.epsilon, wc.v_max.to_string().len());
    Ok(())
}

fn load_list(path: &Path, r: usize) -> Out<PriorityList> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let list = PriorityList::import(&text)?;
    if list.colors != r {
        return Err(CliError::Usage(format!("{} is for {} colors, not {r}", path.display(), list.colors)));
    }
    Ok(list)
}

fn cmd_play(
    side: Side,
    target: &Target,
    density: Option<&str>,
    theta_beta: Option<(&str, &str)>,
    strategy: Option<&Path>,
    interactive: bool,
    jobs: usize,
) -> Out<()> {
    let f = load(target)?;
    let r = target.colors;
    let restriction = match (density, theta_beta) {
        (Some(d), None) => Restriction::Density(positive("density", d)?),
        (None, Some((t, b))) => Restriction::Generalized { theta: positive("theta", t)?, beta: rational("beta", b)? },
        _ => return Err(CliError::Usage("give either --density or both --theta and --beta".into())),
    };
    let cfg = GameConfig::new(f.clone(), r, restriction)?;
    match side {
        Side::Painter => play_painter(&cfg, strategy, interactive, jobs),
        Side::Builder => play_builder(&cfg, interactive, jobs),
    }
}

fn parse_move(line: &str, n: usize) -> Out<Vec<usize>> {
    let mut nb = Vec::new();
    for tok in line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
        let u: usize = tok.parse().map_err(|_| CliError::Usage(format!("bad vertex index `{tok}`")))?;
        if u >= n {
            return Err(CliError::Usage(format!("vertex {u} does not exist yet (board has {n})")));
        }
        nb.push(u);
    }
    Ok(nb)
}

/// Reads Builder's moves (neighbor indices of each new vertex, one line per
/// vertex) and answers `color <c>`.
fn play_painter(cfg: &GameConfig, strategy: Option<&Path>, interactive: bool, jobs: usize) -> Out<()> {
    let list = match strategy {
        Some(p) => load_list(p, cfg.r)?,
        None => {
            let theta = theta_star(&cfg.f, cfg.r, jobs)?;
            derive_strategy(&Engine::for_graph(&cfg.f, cfg.r, theta, false)?, jobs)?.list
        }
    };
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    let mut board = Board::new(cfg.r);
    let mut lines = stdin.lock().lines();
    loop {
        if interactive {
            eprint!("vertex {}: neighbors (blank for none, q to stop)> ", board.vertex_count());
        }
        let Some(line) = lines.next() else { break };
        let line = line?;
        let line = line.trim();
        if line == "q" || line.starts_with('#') {
            if line == "q" {
                break;
            }
            continue;
        }
        let nb = parse_move(line, board.vertex_count())?;
        if !legal(&board, &nb, cfg) {
            return Err(CliError::Usage(format!("move {} breaks the restriction", board.vertex_count() + 1)));
        }
        let v = board.add_vertex(&nb);
        let c = paint_decide(&board, v, &list)?;
        board.set_color(v, c);
        writeln!(out, "color {}", c + 1)?;
        if let Some(copy) = detect_mono_at(&board, &cfg.f, v) {
            writeln!(out, "monochromatic F on vertices {copy:?}")?;
            return Ok(());
        }
    }
    writeln!(out, "painter survived {} vertices", board.vertex_count())?;
    Ok(())
}

/// Painter on the other end of the line protocol.
struct RemotePainter<R: BufRead, W: Write> {
    input: R,
    output: W,
    interactive: bool,
    step: usize,
    uses: Vec<usize>,
}

impl<R: BufRead, W: Write> ColoringStrategy for RemotePainter<R, W> {
    fn observe_move(&mut self, uses: &[usize]) {
        self.uses = uses.to_vec();
    }

    fn choose(&mut self, board: &Board) -> online_ramsey::Result<usize> {
        self.step += 1;
        let v = board.vertex_count() - 1;
        let idx: Vec<String> = self.uses.iter().map(|i| (i + 1).to_string()).collect();
        let edges: Vec<String> = board.neighbors(v).iter().map(|u| format!("{u}-{v}")).collect();
        let io_err = |e: io::Error| Error::Invalid(format!("i/o error: {e}"));
        writeln!(self.output, "step {} attach {} edges {}", self.step, idx.join(","), edges.join(",")).map_err(io_err)?;
        if self.interactive {
            write!(self.output, "color for vertex {v} [1-{}]> ", board.colors()).map_err(io_err)?;
        }
        self.output.flush().map_err(io_err)?;
        let mut line = String::new();
        if self.input.read_line(&mut line).map_err(io_err)? == 0 {
            return Err(Error::Invalid("painter input ended before the game".into()));
        }
        let c: usize = line.trim().parse().map_err(|_| Error::Invalid(format!("bad color `{}`", line.trim())))?;
        if c == 0 || c > board.colors() {
            return Err(Error::Invalid(format!("color {c} outside 1..{}", board.colors())));
        }
        Ok(c - 1)
    }
}

fn play_builder(cfg: &GameConfig, interactive: bool, jobs: usize) -> Out<()> {
    let (theta, beta) = cfg.restriction.theta_beta();
    let engine = Engine::for_graph(&cfg.f, cfg.r, theta.clone(), false)?;
    let opts = LambdaOptions { jobs, witness: false, ..LambdaOptions::default() };
    let LambdaEval::Exact(lam) = big_lambda(&engine, &opts)? else { unreachable!("no threshold set") };
    if lam.value < beta || lam.value.is_negative() {
        return Err(CliError::Usage(format!(
            "Builder has no strategy here: Lambda at theta = {theta} is {} (needs >= max(beta, 0) = {beta})",
            lam.value
        )));
    }
    let stdin = io::stdin();
    let mut painter = RemotePainter { input: stdin.lock(), output: io::stdout().lock(), interactive, step: 0, uses: Vec::new() };
    let out = abuild_session(&engine, &mut painter)?;
    let entry = &out.list.entries[out.winning_entry];
    let mut stdout = io::stdout().lock();
    writeln!(
        stdout,
        "builder wins: monochromatic F in color {} on entry {} after {} steps",
        entry.color + 1,
        out.winning_entry + 1,
        out.steps
    )?;
    Ok(())
}

fn cmd_oracle(target: &Target, density: Option<&str>, max_steps: usize, min_density: bool, no_prune: bool) -> Out<()> {
    let f = load(target)?;
    let opts = OracleOptions { prune: !no_prune, ..OracleOptions::default() };
    if min_density {
        match min_winning_density(&f, target.colors, max_steps, &opts)? {
            Some(d) => println!("min_winning_density = {d}"),
            None => println!("min_winning_density = none within {max_steps} steps"),
        }
        return Ok(());
    }
    let d = positive("density", density.expect("clap requires --density"))?;
    let cfg = GameConfig::new(f, target.colors, Restriction::Density(d))?;
    let res = solve_game_exhaustive(&cfg, max_steps, &opts)?;
    match res.winner {
        Winner::Builder => {
            println!("winner: builder");
            println!("steps: {}", res.steps.expect("builder wins in some number of steps"));
        }
        Winner::Painter => println!("winner: painter"),
    }
    println!("nodes: {}", res.nodes);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    target: &Target,
    n: usize,
    p_exp: &[f64],
    p: &[f64],
    trials: usize,
    seed: u64,
    painter: PainterArg,
    strategy: Option<&Path>,
    emit_points: Option<&Path>,
    jobs: usize,
) -> Out<()> {
    let f = load(target)?;
    let r = target.colors;
    let mut points: Vec<SweepPoint> = p_exp.iter().map(|&g| SweepPoint::Exponent(g)).collect();
    points.extend(p.iter().map(|&x| SweepPoint::Probability(x)));
    if points.is_empty() {
        return Err(CliError::Usage("give --p-exp or --p".into()));
    }
    if p_exp.iter().any(|g| !g.is_finite() || *g < 0.0) {
        return Err(CliError::Usage("--p-exp values must be non-negative".into()));
    }
    let spec = match painter {
        PainterArg::Greedy => PainterSpec::Greedy,
        PainterArg::Paint => PainterSpec::Paint(match strategy {
            Some(path) => load_list(path, r)?,
            None => {
                let theta = theta_star(&f, r, jobs)?;
                derive_strategy(&Engine::for_graph(&f, r, theta, false)?, jobs)?.list
            }
        }),
    };
    let res = sweep(&f, r, n, &points, trials, seed, &spec, jobs)?;
    print!("{}", res.to_csv());
    for row in &res.rows {
        let (lo, hi) = wilson_interval(row.survivals, row.trials, 2.5758);
        eprintln!("# p = {:.6e}: survival {:.4}, 99% Wilson interval [{lo:.4}, {hi:.4}]", row.p, row.rate());
    }
    match estimate_crossover(&res) {
        Ok(g) => eprintln!("# crossover exponent ~ {g:.4}"),
        Err(e) => eprintln!("# crossover: {e}"),
    }
    if let Some(path) = emit_points {
        fs::write(path, res.to_points()).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}
