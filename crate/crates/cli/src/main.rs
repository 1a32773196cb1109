use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use regulus::formats::{
    generate, parse_assignment, parse_dimacs, parse_instance, serialize_assignment, serialize_instance, Family,
    GeneratorSpec, WeightMode,
};
use regulus::pipeline::{
    pipeline_max, pipeline_min, verify, BruteForceSolver, GreedySolver, Mode, ModeKind, PipelineError, RandomSolver,
    ReductionMap, RegularSolver,
};
use regulus::regularity::{
    pullback_deterministic, pullback_randomized, regularize_deterministic, regularize_randomized, DeterministicCertificate,
    Profile, ReductionCertificate, RegularityError,
};
use regulus::solvers::{brute_force_opt, greedy_baseline, random_baseline, BruteForceOracle, SolveError};
use regulus::weights::{min_preprocess_scale, replicate_to_unweighted, MinScaleOutcome, WeightError};
use regulus::{evaluate, Goal, Instance};

const EXIT_FAILURE: u8 = 1;
const EXIT_REDUCTION_FAILURE: u8 = 2;
const EXIT_ORACLE_INCONCLUSIVE: u8 = 3;

#[derive(Parser)]
#[command(name = "regulus", version, about = "Reductions to regular unweighted CSP instances")]
struct Cli {
    /// Read input instances as DIMACS CNF / WCNF.
    #[arg(long, global = true)]
    from_dimacs: bool,

    /// Constant profile for the randomized reduction.
    #[arg(long, global = true, env = "REGULUS_PROFILE", default_value = "paper")]
    profile: Profile,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded random instance.
    Generate(GenerateArgs),
    /// Replace a weighted instance by an unweighted one.
    ReduceWeights {
        #[arg(long)]
        epsilon: f64,
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Write the replication plan as JSON.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Min-CSP weight preprocessing.
    MinScale {
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Turn an unweighted instance into a regular one.
    Regularize {
        #[arg(long)]
        mode: ModeKind,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        cert: Option<PathBuf>,
    },
    /// Map an assignment of a reduced instance back to the original.
    Pullback {
        #[arg(long)]
        original: PathBuf,
        #[arg(long)]
        reduced: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        assignment: PathBuf,
        #[arg(long, default_value = "max")]
        goal: Goal,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Solve an instance with a built-in method.
    Solve {
        #[arg(long, value_enum, default_value_t = SolverKind::Brute)]
        method: SolverKind,
        #[arg(long, default_value = "max")]
        goal: Goal,
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Value of an assignment.
    Evaluate { input: PathBuf, assignment: PathBuf },
    /// End-to-end approximation pipelines.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
    /// Check a reduction output against its map and certificate.
    Verify {
        #[arg(long)]
        original: PathBuf,
        #[arg(long)]
        reduced: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        cert: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    family: FamilyKind,
    /// Clause width for `ksat`.
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = WeightKind::Uniform)]
    weights: WeightKind,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum PipelineCommand {
    Max {
        #[arg(long)]
        delta: f64,
        #[arg(long, value_enum, default_value_t = SolverKind::Brute)]
        solver: SolverKind,
        #[arg(long, default_value = "det")]
        mode: ModeKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        input: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    Min {
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = SolverKind::Brute)]
        solver: SolverKind,
        input: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyKind {
    Ksat,
    Maxcut,
    Mixed,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightKind {
    Uniform,
    Dirichlet,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverKind {
    Brute,
    Random,
    Greedy,
}

impl SolverKind {
    fn solver(self) -> Box<dyn RegularSolver> {
        match self {
            SolverKind::Brute => Box::new(BruteForceSolver::default()),
            SolverKind::Random => Box::new(RandomSolver),
            SolverKind::Greedy => Box::new(GreedySolver),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_or_print(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, contents).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

/// Instance given on the command line, honouring `--from-dimacs`.
fn load_input(path: &Path, dimacs: bool) -> Result<Instance> {
    let text = read(path)?;
    let instance = if dimacs { parse_dimacs(&text) } else { parse_instance(&text) };
    instance.with_context(|| format!("parsing {}", path.display()))
}

fn load_instance(path: &Path) -> Result<Instance> {
    parse_instance(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn run(cli: Cli) -> Result<u8> {
    let dimacs = cli.from_dimacs;
    match cli.command {
        Command::Generate(args) => {
            let family = match args.family {
                FamilyKind::Ksat => Family::RandomKsat { k: args.k },
                FamilyKind::Maxcut => Family::RandomMaxcut,
                FamilyKind::Mixed => Family::RandomMixed,
            };
            let weights = match args.weights {
                WeightKind::Uniform => WeightMode::Uniform,
                WeightKind::Dirichlet => WeightMode::Dirichlet,
            };
            let spec = GeneratorSpec { family, n: args.n, m: args.m, seed: args.seed, weights };
            write_or_print(args.output.as_deref(), &serialize_instance(&generate(&spec)?))?;
        }
        Command::ReduceWeights { epsilon, input, output, plan } => {
            let f = load_input(&input, dimacs)?;
            let (g, p) = replicate_to_unweighted(&f.to_weighted(), epsilon)?;
            if let Some(path) = plan {
                write_json(&path, &p)?;
            }
            write_or_print(output.as_deref(), &serialize_instance(&g))?;
        }
        Command::MinScale { delta, alpha, input, output, plan } => {
            let f = load_input(&input, dimacs)?;
            match min_preprocess_scale(&f, delta, alpha, &BruteForceOracle::default())? {
                MinScaleOutcome::Zero(cert) => {
                    eprintln!("optimum is 0");
                    if let Some(path) = plan {
                        write_json(&path, &cert)?;
                    }
                    write_or_print(output.as_deref(), &serialize_assignment(&cert.assignment))?;
                }
                MinScaleOutcome::Scaled { instance, plan: p } => {
                    if let Some(path) = plan {
                        write_json(&path, &p)?;
                    }
                    write_or_print(output.as_deref(), &serialize_instance(&instance))?;
                }
            }
        }
        Command::Regularize { mode, epsilon, seed, input, output, map, cert } => {
            let f = load_input(&input, dimacs)?;
            let (g, m, c) = match mode {
                ModeKind::Det => {
                    let (g, m) = regularize_deterministic(&f, epsilon)?;
                    let c = ReductionCertificate::Deterministic(DeterministicCertificate::new(&m));
                    (g, ReductionMap::Block(m), c)
                }
                ModeKind::Rand => {
                    let (g, m, c) = regularize_randomized(&f, epsilon, seed, cli.profile)?;
                    if let Some(caveat) = &c.caveat {
                        eprintln!("warning: {caveat}");
                    }
                    (g, ReductionMap::Copy(m), ReductionCertificate::Randomized(c))
                }
            };
            if let Some(path) = map {
                write_json(&path, &m)?;
            }
            if let Some(path) = cert {
                write_json(&path, &c)?;
            }
            write_or_print(output.as_deref(), &serialize_instance(&g))?;
        }
        Command::Pullback { original, reduced, map, assignment, goal, output } => {
            let f = load_input(&original, dimacs)?;
            let g = load_instance(&reduced)?;
            let zeta = parse_assignment(&read(&assignment)?)?;
            let chi = match read_json::<ReductionMap>(&map)? {
                ReductionMap::Block(m) => pullback_deterministic(&g, &m, &zeta.0, goal)?,
                ReductionMap::Copy(m) => {
                    if goal == Goal::Min {
                        bail!("the randomized pull-back is defined for Max only");
                    }
                    pullback_randomized(&f, &m, &zeta.0)?
                }
            };
            write_or_print(output.as_deref(), &serialize_assignment(&chi.0))?;
        }
        Command::Solve { method, goal, input, output } => {
            let f = load_input(&input, dimacs)?;
            let result = match method {
                SolverKind::Brute => brute_force_opt(&f, goal)?,
                SolverKind::Random => random_baseline(&f, goal)?,
                SolverKind::Greedy => greedy_baseline(&f, goal)?,
            };
            eprintln!("value {}", result.value);
            write_or_print(output.as_deref(), &serialize_assignment(&result.assignment.0))?;
        }
        Command::Evaluate { input, assignment } => {
            let f = load_input(&input, dimacs)?;
            let chi = parse_assignment(&read(&assignment)?)?;
            println!("{}", evaluate(&f, &chi.0)?);
        }
        Command::Pipeline(PipelineCommand::Max { delta, solver, mode, seed, input, report, output }) => {
            let f = load_input(&input, dimacs)?;
            let mode = match mode {
                ModeKind::Det => Mode::Det,
                ModeKind::Rand => Mode::Rand { seed, profile: cli.profile },
            };
            let (chi, rep) = pipeline_max(&f, delta, solver.solver().as_ref(), mode)?;
            finish_pipeline(&rep.to_json(), report.as_deref(), output.as_deref(), &chi.0)?;
        }
        Command::Pipeline(PipelineCommand::Min { delta, alpha, solver, input, report, output }) => {
            let f = load_input(&input, dimacs)?;
            let (chi, rep) = pipeline_min(&f, delta, alpha, solver.solver().as_ref(), &BruteForceOracle::default())?;
            finish_pipeline(&rep.to_json(), report.as_deref(), output.as_deref(), &chi.0)?;
        }
        Command::Verify { original, reduced, map, cert, samples, seed } => {
            let f = load_input(&original, dimacs)?;
            let g = load_instance(&reduced)?;
            let map: ReductionMap = read_json(&map)?;
            let cert: Option<ReductionCertificate> = cert.as_deref().map(read_json).transpose()?;
            let report = verify(&f, &g, &map, cert.as_ref(), samples, seed);
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.passed() {
                return Ok(EXIT_FAILURE);
            }
        }
    }
    Ok(0)
}

fn finish_pipeline(json: &str, report: Option<&Path>, output: Option<&Path>, chi: &[regulus::Value]) -> Result<()> {
    match (report, output) {
        (Some(r), o) => {
            fs::write(r, json).with_context(|| format!("writing {}", r.display()))?;
            write_or_print(o, &serialize_assignment(chi))
        }
        (None, Some(o)) => {
            print!("{json}");
            fs::write(o, serialize_assignment(chi)).with_context(|| format!("writing {}", o.display()))
        }
        (None, None) => {
            print!("{json}");
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let inconclusive = |e: &SolveError| matches!(e, SolveError::OracleInconclusive(_));
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<PipelineError>() {
            if e.is_reduction_failure() {
                return EXIT_REDUCTION_FAILURE;
            }
            if e.is_oracle_inconclusive() {
                return EXIT_ORACLE_INCONCLUSIVE;
            }
        }
        if let Some(RegularityError::Failure { .. }) = cause.downcast_ref::<RegularityError>() {
            return EXIT_REDUCTION_FAILURE;
        }
        if let Some(WeightError::Solve(e)) = cause.downcast_ref::<WeightError>() {
            if inconclusive(e) {
                return EXIT_ORACLE_INCONCLUSIVE;
            }
        }
        if cause.downcast_ref::<SolveError>().is_some_and(inconclusive) {
            return EXIT_ORACLE_INCONCLUSIVE;
        }
    }
    EXIT_FAILURE
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
