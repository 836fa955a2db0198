use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use splitfem::harness::{
    cross_section, ensure_writable_dir, parse_config, parse_h, parse_h_list, read_field_csv, ConfigFile, Line,
    MeshFamily, StudyPlan,
};
use splitfem::hessian::HessianConfig;
use splitfem::problems::{lookup, ProblemParams, PROBLEM_NAMES};
use splitfem::Error;

#[derive(Parser)]
#[command(name = "splitfem", version, about = "Operator-splitting FEM solvers for semilinear, Monge-Ampère and Pucci equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem on one mesh.
    Solve(RunArgs),
    /// Run a mesh-refinement study and report convergence rates.
    Study(RunArgs),
    /// Sample a saved field along a line.
    Section(SectionArgs),
    /// Print the registered problem names.
    ListProblems,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    problem: Option<String>,
    /// regular, disk, eye or file:PATH
    #[arg(long)]
    mesh: Option<String>,
    /// Mesh size(s): 1/N or decimals, comma-separated for studies.
    #[arg(long)]
    h: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    /// Stopping tolerance on the L² increment.
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// Lipschitz constant of the semilinear source.
    #[arg(long = "L")]
    lipschitz: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    /// Hessian smoothing parameter (overrides the mesh default).
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long = "max-iter")]
    max_iter: Option<String>,
    /// Output directory for the report, histories and fields.
    #[arg(long)]
    out: Option<PathBuf>,
    /// File of `key = value` lines; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SectionArgs {
    /// Field CSV written by `solve` or `study`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    mesh: String,
    #[arg(long)]
    h: Option<String>,
    /// x1=C, x2=C or x1=x2
    #[arg(long)]
    line: String,
    #[arg(long, default_value_t = 101)]
    samples: usize,
    /// Write the samples here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => run(args, false),
        Command::Study(args) => run(args, true),
        Command::Section(args) => section(args),
        Command::ListProblems => {
            PROBLEM_NAMES.iter().for_each(|n| println!("{n}"));
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

const CONFIG_KEYS: [&str; 13] = [
    "problem", "mesh", "h", "tau", "gamma", "tol", "alpha", "beta", "L", "delta", "epsilon", "max-iter", "out",
];

/// Flag value if given, else the config-file value.
fn setting(flag: &Option<String>, file: &ConfigFile, key: &str) -> Option<String> {
    flag.clone().or_else(|| file.get(key).cloned())
}

fn number<T: std::str::FromStr>(v: Option<String>, key: &str) -> Result<Option<T>, Failure> {
    v.map(|s| s.parse().map_err(|_| usage(format!("invalid value `{s}` for --{key}"))))
        .transpose()
}

fn build_plan(args: &RunArgs, study: bool) -> Result<StudyPlan, Failure> {
    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| usage(Error::io(path, e)))?;
            let cfg = parse_config(&text, path).map_err(usage)?;
            if let Some(k) = cfg.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
                return Err(usage(format!("unknown config key `{k}` in {}", path.display())));
            }
            cfg
        }
        None => ConfigFile::new(),
    };
    let get = |flag: &Option<String>, key: &str| setting(flag, &file, key);

    let problem = get(&args.problem, "problem").ok_or_else(|| usage("--problem is required"))?;
    let mesh: MeshFamily = get(&args.mesh, "mesh")
        .ok_or_else(|| usage("--mesh is required"))?
        .parse()
        .map_err(usage)?;
    let h_values = match (get(&args.h, "h"), &mesh) {
        (Some(h), _) if study => parse_h_list(&h).map_err(usage)?,
        (Some(h), _) => vec![parse_h(&h).map_err(usage)?],
        (None, MeshFamily::File(_)) => vec![1.0],
        (None, _) => return Err(usage("--h is required")),
    };

    let mut params = ProblemParams::default();
    if let Some(v) = number(get(&args.alpha, "alpha"), "alpha")? {
        params.alpha = v;
    }
    if let Some(v) = number(get(&args.beta, "beta"), "beta")? {
        params.beta = v;
    }
    if let Some(v) = number(get(&args.lipschitz, "L"), "L")? {
        params.lipschitz = v;
    }
    if let Some(v) = number(get(&args.delta, "delta"), "delta")? {
        params.delta = v;
    }
    lookup(&problem, &params).map_err(usage)?;

    let mut plan = StudyPlan::new(problem, mesh, h_values);
    plan.params = params;
    if let Some(v) = number(get(&args.tau, "tau"), "tau")? {
        plan.config.tau = v;
    }
    plan.config.gamma = number(get(&args.gamma, "gamma"), "gamma")?;
    if let Some(v) = number(get(&args.tol, "tol"), "tol")? {
        plan.config.stop_tol = v;
    }
    if let Some(v) = number(get(&args.max_iter, "max-iter"), "max-iter")? {
        plan.config.max_iterations = v;
    }
    if let Some(eps) = number::<f64>(get(&args.epsilon, "epsilon"), "epsilon")? {
        plan.hessian = Some(HessianConfig {
            epsilon: eps,
            boundary_repair: plan.mesh != MeshFamily::Regular,
        });
    }
    plan.out_dir = args.out.clone().or_else(|| file.get("out").map(PathBuf::from));
    plan.validate().map_err(usage)?;
    Ok(plan)
}

fn run(args: RunArgs, study: bool) -> Result<(), Failure> {
    let plan = build_plan(&args, study)?;
    if let Some(dir) = &plan.out_dir {
        ensure_writable_dir(dir)?;
    }
    let report = splitfem::harness::run_study(&plan)?;
    let stdout = io::stdout();
    report.write_csv(stdout.lock())?;
    let failed: Vec<String> = report
        .levels
        .iter()
        .filter_map(|l| l.failure.as_ref().map(|f| format!("h = {}: {f}", l.h)))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(failed.join("\n")))
    }
}

fn section(args: SectionArgs) -> Result<(), Failure> {
    let family: MeshFamily = args.mesh.parse().map_err(usage)?;
    let h = match (&args.h, &family) {
        (Some(h), _) => parse_h(h).map_err(usage)?,
        (None, MeshFamily::File(_)) => 1.0,
        (None, _) => return Err(usage("--h is required")),
    };
    let line: Line = args.line.parse().map_err(usage)?;
    if args.samples == 0 {
        return Err(usage("--samples must be positive"));
    }
    let mesh = family.build(h)?;
    let input = fs::File::open(&args.input).map_err(|e| Error::io(&args.input, e))?;
    let (u, _) = read_field_csv(io::BufReader::new(input), &mesh)?;
    let samples = cross_section(&u, &mesh, &line, args.samples)?;
    if samples.is_empty() {
        eprintln!("warning: line `{}` does not meet the mesh", args.line);
    }
    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(&mut out);
    w.write_record(["s", "x", "y", "u"]).map_err(Error::from)?;
    for q in samples {
        w.write_record([q.s, q.point[0], q.point[1], q.value].map(|v| v.to_string()))
            .map_err(Error::from)?;
    }
    w.flush().map_err(|e| Error::io(args.out.as_deref().unwrap_or(Path::new("<stdout>")), e))?;
    Ok(())
}

fn create(path: &Path) -> Result<io::BufWriter<fs::File>, Error> {
    fs::File::create(path).map(io::BufWriter::new).map_err(|e| Error::io(path, e))
}
