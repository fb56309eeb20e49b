use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use nnmip::benchgen::{
    gen_relu_surrogate, gen_smooth_surrogate, gen_tree_planting, gen_water_potability, TreeParams,
    WaterParams,
};
use nnmip::dd::write_trace;
use nnmip::harness::{
    experiment_e1, experiment_e2, experiment_e3, experiment_e5, run_method, write_csv, E1Config,
    E2Config, E3Config, E5Config, Method, ReportRow, RunConfig, DEFAULT_SEEDS,
};
use nnmip::subsolver::SubsolverKind;
use nnmip::{load_instance, save_instance, Error, ProblemInstance};

#[derive(Parser)]
#[command(name = "nnmip", version, about = "Mixed-integer programs with embedded ReLU networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark instance.
    Gen {
        #[command(subcommand)]
        family: Family,
    },
    /// Solve an instance file.
    Solve(SolveArgs),
    /// Run an experiment sweep and write its CSV.
    Experiment(ExperimentArgs),
    /// Parse and validate an instance file.
    Validate { path: PathBuf },
}

#[derive(Subcommand)]
enum Family {
    Water {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 9)]
        feature_dim: usize,
        /// Per-feature budget, both directions.
        #[arg(long, default_value_t = 2.0)]
        budget: f64,
        #[arg(long, value_delimiter = ',', default_value = "8,8")]
        arch: Vec<usize>,
        #[arg(long, default_value_t = 0.25)]
        delta: f64,
        #[arg(long, default_value_t = 8)]
        levels: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    Tree {
        #[arg(long, default_value_t = 2)]
        grid: usize,
        #[arg(long, default_value_t = 4)]
        species: usize,
        #[arg(long)]
        cost_budget: Option<f64>,
        #[arg(long, default_value_t = 1)]
        sterilize_budget: usize,
        /// Survival target per species; omitted means all zero.
        #[arg(long, value_delimiter = ',')]
        targets: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "4")]
        arch: Vec<usize>,
        /// Also emit the budget rows as `A_NN` rows on `u`.
        #[arg(long)]
        mirror_budget_rows: bool,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    Smooth {
        #[arg(long, default_value_t = 3)]
        p: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    Relu {
        #[arg(long, default_value_t = 3)]
        p: usize,
        #[arg(long, value_delimiter = ',', default_value = "4,8")]
        hidden: Vec<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Dd,
    Bigm,
    Ssg,
}

#[derive(Clone, Copy, ValueEnum)]
enum SubsolverArg {
    Pgd,
    Barrier,
    Auto,
}

#[derive(Args)]
struct SolveArgs {
    path: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "auto")]
    subsolver: SubsolverArg,
    /// Outer iterations for dd, steps for ssg.
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    rho0: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    time_budget: Option<f64>,
    #[arg(long)]
    node_limit: Option<usize>,
    /// Seed for the ssg start point.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report CSV; defaults to `<instance>.report.csv`.
    #[arg(long)]
    report: Option<PathBuf>,
    /// DD trace CSV; defaults to `<instance>.trace.csv`.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentName {
    E1,
    E2,
    E3,
    E4,
    E5,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    name: ExperimentName,
    #[arg(long, value_delimiter = ',', num_args = 0.., default_values_t = DEFAULT_SEEDS)]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// e1: sample counts.
    #[arg(long, value_delimiter = ',', default_value = "2,4")]
    ns: Vec<usize>,
    /// e1: architectures such as `4x4`.
    #[arg(long, value_delimiter = ',', default_value = "4x4")]
    archs: Vec<String>,
    /// e2: target parameter counts.
    #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000")]
    sizes: Vec<usize>,
    /// e3 / e5: number of instances.
    #[arg(long)]
    instances: Option<usize>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn emit(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    }
}

fn read_instance(path: &Path) -> Result<ProblemInstance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(load_instance(&text)?)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("instance");
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn cmd_gen(family: Family) -> Result<()> {
    let (inst, output) = match family {
        Family::Water {
            n,
            feature_dim,
            budget,
            arch,
            delta,
            levels,
            seed,
            output,
        } => {
            let params = WaterParams {
                n,
                feature_dim,
                budgets_up: vec![budget; feature_dim],
                budgets_down: vec![budget; feature_dim],
                arch,
                delta,
                levels,
                seed,
                ..Default::default()
            };
            (gen_water_potability(&params)?, output)
        }
        Family::Tree {
            grid,
            species,
            cost_budget,
            sterilize_budget,
            targets,
            arch,
            mirror_budget_rows,
            seed,
            output,
        } => {
            let targets = if targets.is_empty() { vec![0.0; species] } else { targets };
            let params = TreeParams {
                grid_n: grid,
                species,
                cost_budget,
                sterilize_budget,
                targets,
                arch,
                seed,
                mirror_budget_rows,
                ..Default::default()
            };
            (gen_tree_planting(&params)?, output)
        }
        Family::Smooth { p, seed, output } => (gen_smooth_surrogate(p, seed)?, output),
        Family::Relu { p, hidden, seed, output } => (gen_relu_surrogate(p, &hidden, seed)?, output),
    };
    emit(&save_instance(&inst)?, output.as_deref())
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let inst = read_instance(&args.path)?;
    let method = match args.method {
        MethodArg::Dd => Method::Dd,
        MethodArg::Bigm => Method::Bigm,
        MethodArg::Ssg => Method::Ssg,
    };
    let mut cfg = RunConfig::new(method);
    cfg.subsolver = match args.subsolver {
        SubsolverArg::Pgd => SubsolverKind::Pgd,
        SubsolverArg::Barrier => SubsolverKind::Barrier,
        SubsolverArg::Auto => SubsolverKind::Auto,
    };
    if let Some(k) = args.max_iters {
        cfg.dd.max_outer = k;
        cfg.ssg.t_max = k;
    }
    if let Some(r) = args.rho0 {
        cfg.dd.rho0 = r;
    }
    if let Some(e) = args.epsilon {
        cfg.dd.epsilon = e;
    }
    if let Some(t) = args.time_budget {
        cfg.dd.time_budget_s = t;
    }
    if let Some(n) = args.node_limit {
        cfg.bnb.node_limit = n;
        cfg.dd.bnb.node_limit = n;
    }
    cfg.ssg.seed = args.seed;

    let run = run_method(&inst, &cfg)?;
    let row = ReportRow::new(&inst, args.seed, &run.subsolver, &run.report);
    let report_path = args.report.unwrap_or_else(|| sibling(&args.path, "report.csv"));
    let mut buf = Vec::new();
    write_csv(&[row.clone()], &mut buf)?;
    fs::write(&report_path, buf).with_context(|| format!("writing {}", report_path.display()))?;
    if let Some(trace) = &run.trace {
        let trace_path = args.trace.unwrap_or_else(|| sibling(&args.path, "trace.csv"));
        let file = fs::File::create(&trace_path).with_context(|| format!("writing {}", trace_path.display()))?;
        write_trace(trace, file)?;
        info!("trace written to {}", trace_path.display());
    }
    println!(
        "{} {}: objective {} converged {} iterations {} (report {})",
        row.instance,
        row.method,
        row.objective,
        row.converged,
        row.iterations,
        report_path.display()
    );
    for note in &run.report.notes {
        info!("note: {note}");
    }
    Ok(())
}

fn parse_arch(s: &str) -> Result<Vec<usize>> {
    s.split('x')
        .map(|w| w.trim().parse::<usize>().with_context(|| format!("bad architecture `{s}`")))
        .collect()
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    let mut buf = Vec::new();
    match args.name {
        ExperimentName::E1 => {
            let cfg = E1Config {
                archs: args.archs.iter().map(|a| parse_arch(a)).collect::<Result<_>>()?,
                ns: args.ns,
                seeds: args.seeds,
                jobs: args.jobs,
                ..Default::default()
            };
            write_csv(&experiment_e1(&cfg)?, &mut buf)?;
        }
        ExperimentName::E2 => {
            let cfg = E2Config {
                sizes: args.sizes,
                seeds: args.seeds,
                ..Default::default()
            };
            let (rows, summary) = experiment_e2(&cfg)?;
            write_csv(&rows, &mut buf)?;
            eprintln!(
                "e2: log-log slope {:.3}, mip time variation {:.1}%",
                summary.slope,
                100.0 * summary.mip_variation
            );
        }
        ExperimentName::E3 => {
            let mut cfg = E3Config {
                seeds: args.seeds,
                jobs: args.jobs,
                ..Default::default()
            };
            if let Some(n) = args.instances {
                cfg.instances = n;
            }
            write_csv(&experiment_e3(&cfg)?, &mut buf)?;
        }
        ExperimentName::E4 => {
            eprintln!("e4 (architecture swap) is not implemented: only feedforward ReLU networks are supported");
            return Ok(());
        }
        ExperimentName::E5 => {
            let mut cfg = E5Config {
                seeds: args.seeds,
                jobs: args.jobs,
                ..Default::default()
            };
            if let Some(n) = args.instances {
                cfg.instances = n;
            }
            write_csv(&experiment_e5(&cfg)?, &mut buf)?;
        }
    }
    emit(&String::from_utf8(buf)?, args.output.as_deref())
}

fn cmd_validate(path: &Path) -> Result<()> {
    let inst = read_instance(path)?;
    println!(
        "{}: valid (p = {}, q = {}, {} MIP rows, {} NN rows, {} network parameters)",
        path.display(),
        inst.p(),
        inst.q(),
        inst.a_mip.len(),
        inst.a_nn.len(),
        inst.network.param_count()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen { family } => cmd_gen(family),
        Command::Solve(args) => cmd_solve(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Validate { path } => cmd_validate(&path),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(Error::Config(msg)) = e.downcast_ref::<Error>() {
                eprintln!("usage error: {msg}");
                return ExitCode::from(2);
            }
            if let Some(Error::Invalid(vs)) = e.downcast_ref::<Error>() {
                eprintln!("error: invalid instance");
                for v in vs {
                    eprintln!("  {v}");
                }
                return ExitCode::FAILURE;
            }
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
