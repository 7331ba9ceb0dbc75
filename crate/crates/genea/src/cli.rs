//! Argument grammar and dispatch for the `genea` binary.
//!
//! Exit status: 0 on success with every verdict passing, 1 when a
//! verification verdict fails, 2 on usage, parameter or input errors (with a
//! one-line diagnostic on stderr).

use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use genea_core::contour::{self, Conditioning, DEFAULT_MAX_ATTEMPTS};
use genea_core::laws::{self, ContinuousLaw, DiscreteLaw};
use genea_core::{continuum, genealogy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::verify::{self, Theorem5Params, Theorem9Params, VerifyOutcome};
use crate::{io, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "genea", version, about = "Genealogies of critical branching trees: sampling, extraction and verification")]
pub struct Cli {
    /// Worker threads for replicate fan-out (default: all cores).
    #[arg(long, global = true, env = "GENEA_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a tree with exactly n individuals alive at level t (tree JSON).
    SimTree(SimTreeArgs),
    /// Genealogical point-process of a tree (CSV rows index,depth).
    Genealogy(GenealogyArgs),
    /// Mark extinct individuals and extract the historical point-process (JSON).
    Historical(HistoricalArgs),
    /// Continuum samplers.
    #[command(subcommand)]
    Continuum(ContinuumCommand),
    /// Tabulate a law or intensity (CSV).
    Law(LawArgs),
    /// Run a Monte Carlo verification and report its verdict (JSON or CSV).
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Concat,
    Rejection,
}

impl From<Method> for Conditioning {
    fn from(m: Method) -> Self {
        match m {
            Method::Concat => Conditioning::ExcursionConcat,
            Method::Rejection => Conditioning::Rejection,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output file (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimTreeArgs {
    /// Observation level.
    #[arg(long)]
    pub t: f64,
    /// Number of individuals alive at t.
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "concat")]
    pub method: Method,
    /// Attempt cap for rejection loops.
    #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
    pub max_attempts: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct GenealogyArgs {
    /// Tree JSON with a horizon.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct HistoricalArgs {
    /// Tree JSON with a horizon.
    #[arg(long)]
    pub input: PathBuf,
    /// Marking probability of extinct individuals.
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub seed: u64,
    /// Keep subtrees without marks.
    #[arg(long)]
    pub keep_unmarked: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Subcommand)]
pub enum ContinuumCommand {
    /// Continuum genealogy above depth delta.
    Pi {
        #[arg(long)]
        t: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[command(flatten)]
        output: Output,
    },
    /// Continuum historical process (JSON).
    Xi {
        #[arg(long)]
        t: f64,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        kappa_min: f64,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Marked tree of height h (tree JSON).
    Lambda {
        #[arg(long)]
        h: f64,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        kappa_min: f64,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LawName {
    /// Branch depths below t: pdf and cdf.
    BranchDepth,
    /// Inverse-square depths on [delta, t]: pdf and cdf.
    InverseSquare,
    /// Population at t: pmf and cdf.
    Population,
    /// Population at t given survival: pmf and cdf.
    ExtantCount,
    /// Probability of reaching height tau.
    HeightSurvival,
    /// Generating function of the total progeny.
    ProgenyPgf,
    /// Probability of at least one mark.
    MarkProb,
    /// Rescaled discrete genealogy intensity against its limit.
    DiscreteRescaled,
}

#[derive(Debug, Args)]
pub struct LawArgs {
    #[arg(value_enum)]
    pub name: LawName,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Population size for discrete-rescaled.
    #[arg(long, default_value_t = 100)]
    pub n: u64,
    /// Upper end of the grid for height-survival.
    #[arg(long, default_value_t = 10.0)]
    pub max: f64,
    /// Grid size.
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Lemma1,
    Eq5,
    Eq6,
    Lemma3,
    Lemma4,
    #[value(name = "lemma6-count")]
    Lemma6Count,
    Markprob,
    Theorem5,
    Theorem9,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub target: Target,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub kappa_min: Option<f64>,
    /// Replicates (trees, draws or samples, depending on the target).
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Population sizes for the convergence targets, e.g. 25,100,400.
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    /// Bootstrap resamples for distance standard errors.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// Reference draws (theorem9).
    #[arg(long)]
    pub reference: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[command(flatten)]
    pub output: Output,
}

fn emit(output: &Output, text: &str) -> Result<()> {
    match &output.out {
        Some(path) => io::write_file(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| Error::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

fn grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::param("points", "needs at least 2 grid points"));
    }
    Ok((0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect())
}

fn tabulate(args: &LawArgs) -> Result<String> {
    let mut out = String::new();
    let continuous = |law: &dyn ContinuousLaw, out: &mut String| -> Result<()> {
        out.push_str("x,pdf,cdf\n");
        let (lo, hi) = law.support();
        for x in grid(lo, hi, args.points)? {
            out.push_str(&format!("{x:.16e},{:.16e},{:.16e}\n", law.pdf(x)?, law.cdf(x)?));
        }
        Ok(())
    };
    let discrete = |law: &dyn DiscreteLaw, out: &mut String| -> Result<()> {
        out.push_str("k,pmf,cdf\n");
        let lo = law.min_value();
        for k in lo..lo + args.points as i64 {
            out.push_str(&format!("{k},{:.16e},{:.16e}\n", law.pmf(k)?, law.cdf(k)?));
        }
        Ok(())
    };
    let scalar = |xs: Vec<f64>, f: &dyn Fn(f64) -> genea_core::Result<f64>, out: &mut String| -> Result<()> {
        out.push_str("x,value\n");
        for x in xs {
            out.push_str(&format!("{x:.16e},{:.16e}\n", f(x)?));
        }
        Ok(())
    };
    match args.name {
        LawName::BranchDepth => continuous(&laws::branch_depth_law(args.t)?, &mut out)?,
        LawName::InverseSquare => continuous(&laws::inverse_square_law(args.delta, args.t)?, &mut out)?,
        LawName::Population => discrete(&laws::population_law(args.t)?, &mut out)?,
        LawName::ExtantCount => discrete(&laws::extant_count_law(args.t)?, &mut out)?,
        LawName::HeightSurvival => {
            if !(args.max > 0.0) {
                return Err(Error::param("max", "must be positive"));
            }
            scalar(grid(0.0, args.max, args.points)?, &laws::height_survival, &mut out)?
        }
        LawName::ProgenyPgf => scalar(grid(0.0, 1.0, args.points)?, &laws::progeny_pgf, &mut out)?,
        LawName::MarkProb => scalar(grid(0.0, 1.0, args.points)?, &laws::mark_prob, &mut out)?,
        LawName::DiscreteRescaled => {
            if args.points < 1 {
                return Err(Error::param("points", "needs at least 1 grid point"));
            }
            let t_n = args.n as f64 * args.t;
            out.push_str("tau,discrete,continuum\n");
            for k in 0..args.points {
                let tau = args.t * (k as f64 + 0.5) / args.points as f64;
                out.push_str(&format!(
                    "{tau:.16e},{:.16e},{:.16e}\n",
                    laws::intensity::discrete_rescaled(tau, args.n, t_n)?,
                    laws::intensity::pi_intensity(0.5, tau, args.t)?
                ));
            }
        }
    }
    Ok(out)
}

fn run_verify(args: &VerifyArgs) -> Result<VerifyOutcome> {
    let seed = args.seed;
    let t = args.t.unwrap_or(1.0);
    let reps = |default: usize| args.replicates.unwrap_or(default);
    match args.target {
        Target::Lemma1 => verify::lemma1(reps(100_000), seed),
        Target::Eq5 => verify::eq5(t, reps(100_000), seed),
        Target::Eq6 => verify::eq6(&[0.5, 1.0, 2.0], reps(100_000), seed),
        Target::Lemma3 => verify::lemma3(t, args.n.unwrap_or(10), reps(10_000), 5, 2000, seed),
        Target::Lemma4 => verify::lemma4(t, args.delta.unwrap_or(0.1), reps(10_000), seed),
        Target::Lemma6Count => verify::lemma6_count(t, args.n.unwrap_or(5), reps(10_000), 10, seed),
        Target::Markprob => verify::markprob(args.p.unwrap_or(0.04), reps(100_000), seed),
        Target::Theorem5 => {
            let d = Theorem5Params::default();
            verify::theorem5(&Theorem5Params {
                t,
                delta: args.delta.unwrap_or(d.delta),
                n_grid: args.n_grid.clone().unwrap_or(d.n_grid),
                replicates: reps(d.replicates),
                bootstrap: args.bootstrap.unwrap_or(d.bootstrap),
                seed,
                ..d
            })
        }
        Target::Theorem9 => {
            let d = Theorem9Params::default();
            verify::theorem9(&Theorem9Params {
                t,
                p: args.p.unwrap_or(d.p),
                kappa_min: args.kappa_min.unwrap_or(d.kappa_min),
                n_grid: args.n_grid.clone().unwrap_or(d.n_grid),
                replicates: reps(d.replicates),
                reference: args.reference.unwrap_or(d.reference),
                bootstrap: args.bootstrap.unwrap_or(d.bootstrap),
                seed,
            })
        }
    }
}

/// Runs one parsed command; `Ok(false)` means a verdict failed.
pub fn dispatch(command: &Command) -> Result<bool> {
    match command {
        Command::SimTree(a) => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let path = contour::conditioned_contour(a.t, a.n, a.method.into(), a.max_attempts, &mut rng)?;
            let tree = contour::tree_from_contour(&path, Some(a.t))?;
            emit(&a.output, &io::tree_to_json(&tree))?;
        }
        Command::Genealogy(a) => {
            let tree = io::tree_from_json(&io::read_file(&a.input)?)?;
            emit(&a.output, &io::genealogy_to_csv(&genealogy::genealogy_pp(&tree)?))?;
        }
        Command::Historical(a) => {
            let tree = io::tree_from_json(&io::read_file(&a.input)?)?;
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let marked = tree.mark_extinct(a.p, &mut rng)?;
            let pp = genealogy::historical_pp(&marked, a.keep_unmarked)?;
            emit(&a.output, &io::historical_to_json(&pp))?;
        }
        Command::Continuum(c) => match c {
            ContinuumCommand::Pi {
                t,
                delta,
                seed,
                format,
                output,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let pp = continuum::sample_pi(*t, *delta, &mut rng)?;
                let text = match format {
                    Format::Csv => io::continuum_to_csv(&pp),
                    Format::Json => {
                        let points: Vec<[f64; 2]> = pp.points.iter().map(|p| [p.ell, p.depth]).collect();
                        serde_json::json!({"t": pp.t, "delta": pp.delta, "points": points}).to_string()
                    }
                };
                emit(output, &text)?;
            }
            ContinuumCommand::Xi {
                t,
                p,
                delta,
                kappa_min,
                seed,
                output,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let xi = continuum::sample_xi(*t, *p, *delta, *kappa_min, &mut rng)?;
                emit(output, &io::continuum_historical_to_json(&xi))?;
            }
            ContinuumCommand::Lambda {
                h,
                p,
                kappa_min,
                seed,
                output,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let tree = continuum::sample_lambda_tree(*h, *p, *kappa_min, &mut rng)?;
                emit(output, &io::tree_to_json(&tree))?;
            }
        },
        Command::Law(a) => emit(&a.output, &tabulate(a)?)?,
        Command::Verify(a) => {
            let outcome = run_verify(a)?;
            let text = match a.format {
                Format::Json => serde_json::to_string_pretty(&outcome)? + "\n",
                Format::Csv => outcome.to_csv(),
            };
            emit(&a.output, &text)?;
            return Ok(outcome.passed);
        }
    }
    Ok(true)
}

fn one_line(text: &str) -> String {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("error")
        .to_string()
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            eprintln!("genea: {}", one_line(&e.to_string()).trim_start_matches("error: "));
            return 2;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new().stack_size(64 << 20);
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("genea: invalid parameter `threads`: must be at least 1");
            return 2;
        }
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("genea: {}", one_line(&e.to_string()));
            return 2;
        }
    };
    match pool.install(|| dispatch(&cli.command)) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("genea: {}", one_line(&e.to_string()));
            2
        }
    }
}
