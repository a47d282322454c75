//! Command-line front end: build, solve and certify lifted-policy models,
//! and run the inventory benchmark.

mod config;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use config::{ConfigError, LoadedConfig, Problem, OUT_DIR_ENV};
use drmic_core::ambiguity::{estimate_radius, parse_points};
use drmic_core::inventory_bench::{
    closed_loop_summary, open_loop_summary, run_closed_loop, run_open_loop, write_closed_loop_csv, write_open_loop_csv,
    write_text, InventorySpec,
};
use drmic_core::oracle::{check_mixed_moment, check_robust_feasibility, event_wise_worst_case, worst_case_expectation, PiecewiseFunction};
use drmic_core::reformulation::Reformulation;
use drmic_milp::{read_mps, solve_lp, solve_milp_by_blocks, ExternalSolver, LpStatus, MilpOptions, SolveResult, SolveStatus, VarKind};

/// Largest acceptable gap between the reformulation and the oracle.
const CERTIFY_TOL: f64 = 1e-6;
/// Feasibility tolerance of the robust constraint check.
const ROBUST_TOL: f64 = 1e-7;

#[derive(Parser)]
#[command(name = "drmic", version, about = "Distributionally robust mixed-integer control with piecewise-lifted policies")]
struct Cli {
    /// Seed for sampling and random checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for closed-loop simulations.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the reformulated MILP to an MPS (or LP) file.
    Build {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write CPLEX LP format instead of MPS.
        #[arg(long)]
        lp: bool,
    },
    /// Solve the reformulation and write the policy.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Policy file; defaults to `output.policy` inside the output directory.
        #[arg(long)]
        policy_out: Option<PathBuf>,
    },
    /// Evaluate a policy with the reformulation and the independent oracle.
    Certify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        /// Random draws of the robust constraint check.
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
    },
    /// Inventory benchmark: open-loop table and optional closed-loop simulation.
    Bench {
        /// Optional config with `preset = "inventory"` overrides.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        horizon: Option<usize>,
        /// Segments per dimension, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        segments: Vec<usize>,
        /// Number of empirical samples.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        closed_loop: bool,
        /// Closed-loop simulations per segment count.
        #[arg(long, default_value_t = 100)]
        sims: usize,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Relative MILP gap.
        #[arg(long)]
        gap: Option<f64>,
    },
    /// Wasserstein distance between two sample files.
    Radius { samples: PathBuf, reference: PathBuf },
    /// Solve an MPS file with the built-in solver and write `name value` lines.
    #[command(hide = true)]
    SolveMps { model: PathBuf, solution: PathBuf },
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Limit(String),
    #[error("{0}")]
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Infeasible(_) => 3,
            Failure::Limit(_) => 4,
            Failure::Other(_) => 1,
        }
    }
}

fn other(e: impl std::fmt::Display) -> Failure {
    Failure::Other(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Build { config, out, lp } => build(&config, &out, lp, cli.seed),
        Command::Solve { config, policy_out } => solve(&config, policy_out, cli.seed),
        Command::Certify { config, policy, draws } => certify(&config, &policy, draws, cli.seed),
        Command::Bench {
            config,
            horizon,
            segments,
            samples,
            closed_loop,
            sims,
            out_dir,
            gap,
        } => {
            let args = BenchArgs {
                horizon,
                segments,
                samples,
                closed_loop,
                sims,
                out_dir,
                gap,
            };
            bench(config.as_deref(), &args, cli.seed, cli.threads)
        }
        Command::Radius { samples, reference } => radius(&samples, &reference),
        Command::SolveMps { model, solution } => solve_mps(&model, &solution),
    }
}

fn reformulate(loaded: &LoadedConfig, seed: Option<u64>) -> Result<(Problem, Reformulation), Failure> {
    let problem = loaded.problem(seed)?;
    let reform = problem.reformulate(&loaded.reform_options()).map_err(other)?;
    Ok((problem, reform))
}

fn build(path: &Path, out: &Path, lp: bool, seed: Option<u64>) -> Result<(), Failure> {
    let loaded = config::load(path)?;
    let (_, reform) = reformulate(&loaded, seed)?;
    let written = if lp {
        drmic_milp::write_lp(&reform.model, out)
    } else {
        drmic_milp::write_mps(&reform.model, out)
    };
    written.map_err(|e| other(format!("cannot write {}: {e}", out.display())))?;
    println!(
        "wrote {} ({} variables, {} integer, {} rows)",
        out.display(),
        reform.model.num_vars(),
        reform.model.num_integer(),
        reform.model.num_rows()
    );
    Ok(())
}

fn status_failure(status: SolveStatus, has_solution: bool) -> Option<Failure> {
    match status {
        SolveStatus::Optimal | SolveStatus::GapLimit => None,
        SolveStatus::Infeasible => Some(Failure::Infeasible("the reformulation is infeasible".into())),
        SolveStatus::Unbounded => Some(Failure::Other("the reformulation is unbounded".into())),
        SolveStatus::NodeLimit | SolveStatus::TimeLimit => Some(Failure::Limit(format!(
            "stopped at {status:?} {}",
            if has_solution { "with an incumbent" } else { "without a solution" }
        ))),
    }
}

fn print_result(r: &SolveResult) {
    println!("status      {:?}", r.status);
    match r.objective {
        Some(v) => println!("objective   {v}"),
        None => println!("objective   -"),
    }
    println!("bound       {}", r.bound);
    println!("gap         {:.3e}", r.gap);
    println!("nodes       {}", r.nodes);
    println!("lp iters    {}", r.lp_iterations);
    println!("time (s)    {:.3}", r.wall_time.as_secs_f64());
}

fn solve(path: &Path, policy_out: Option<PathBuf>, seed: Option<u64>) -> Result<(), Failure> {
    let loaded = config::load(path)?;
    let (problem, reform) = reformulate(&loaded, seed)?;
    if let Problem::Wasserstein(_, set) = &problem {
        println!("theta       {}", set.theta);
    }
    let x = match &loaded.config.solver.external {
        Some(cmd) => {
            let start = Instant::now();
            let x = ExternalSolver::new(cmd.clone()).solve(&reform.model).map_err(other)?;
            println!("solver      external");
            println!("objective   {}", reform.model.objective_value(&x));
            println!("violation   {:.3e}", reform.model.max_violation(&x));
            println!("time (s)    {:.3}", start.elapsed().as_secs_f64());
            Some(x)
        }
        None => {
            let result = solve_milp_by_blocks(&reform.model, &loaded.config.solver.milp_options()).map_err(other)?;
            print_result(&result);
            if result.status == SolveStatus::Unbounded && matches!(problem, Problem::MixedMoment(..)) {
                return Err(other("the reformulation is unbounded: no distribution in the ball meets the moment bounds"));
            }
            if let Some(f) = status_failure(result.status, result.x.is_some()) {
                if let Some(x) = &result.x {
                    write_policy(&loaded, &reform, x, policy_out.as_deref())?;
                }
                return Err(f);
            }
            result.x
        }
    };
    if let Some(x) = x {
        write_policy(&loaded, &reform, &x, policy_out.as_deref())?;
    }
    Ok(())
}

fn policy_entries(reform: &Reformulation, x: &[f64]) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for (&off, &len) in reform.policy_offsets.iter().zip(&reform.policy_lens) {
        for j in off..off + len {
            let var = reform.model.var(j);
            let v = if var.kind == VarKind::Integer { x[j].round() } else { x[j] };
            out.push((var.name.clone(), v));
        }
    }
    out
}

fn write_policy(loaded: &LoadedConfig, reform: &Reformulation, x: &[f64], path: Option<&Path>) -> Result<(), Failure> {
    let path = match path {
        Some(p) => p.to_path_buf(),
        None => {
            let out = &loaded.config.output;
            let dir = out.resolved_dir(&loaded.base);
            std::fs::create_dir_all(&dir).map_err(|e| other(format!("cannot create {}: {e}", dir.display())))?;
            dir.join(&out.policy)
        }
    };
    let mut text = String::new();
    for (name, v) in policy_entries(reform, x) {
        let _ = writeln!(text, "{name} {v}");
    }
    std::fs::write(&path, text).map_err(|e| other(format!("cannot write {}: {e}", path.display())))?;
    println!("policy      {}", path.display());
    Ok(())
}

fn read_policy(path: &Path, reform: &Reformulation) -> Result<Vec<Vec<f64>>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| other(format!("cannot read {}: {e}", path.display())))?;
    let mut values = HashMap::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed = line
            .split_once(char::is_whitespace)
            .and_then(|(n, v)| v.trim().parse::<f64>().ok().map(|v| (n.to_string(), v)));
        let Some((name, v)) = parsed else {
            return Err(ConfigError::Invalid(format!("{}:{}: expected `name value`", path.display(), ln + 1)).into());
        };
        values.insert(name, v);
    }
    let mut blocks = Vec::new();
    for (&off, &len) in reform.policy_offsets.iter().zip(&reform.policy_lens) {
        let mut block = Vec::with_capacity(len);
        for j in off..off + len {
            let var = reform.model.var(j);
            let v = values
                .get(&var.name)
                .ok_or_else(|| ConfigError::Invalid(format!("{}: no value for `{}`", path.display(), var.name)))?;
            block.push(if var.kind == VarKind::Integer { v.round() } else { *v });
        }
        blocks.push(block);
    }
    Ok(blocks)
}

fn certify(path: &Path, policy: &Path, draws: usize, seed: Option<u64>) -> Result<(), Failure> {
    let loaded = config::load(path)?;
    let (problem, mut reform) = reformulate(&loaded, seed)?;
    let blocks = read_policy(policy, &reform)?;
    for (b, values) in blocks.iter().enumerate() {
        reform.fix_policy(b, values).map_err(other)?;
    }
    let lp = solve_lp(&reform.model).map_err(other)?;

    let instances = problem.instances();
    let mut worst_residual = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut fs = Vec::new();
    for (inst, values) in instances.iter().zip(&blocks) {
        let numeric = inst.compiled.substitute(values);
        let robust = check_robust_feasibility(
            &numeric.e,
            &numeric.m,
            &inst.lifting,
            draws,
            seed.unwrap_or(1),
            ROBUST_TOL,
        )
        .map_err(other)?;
        worst_residual = worst_residual.max(robust.max_residual);
        violations += robust.sampled_violations;
        fs.push(PiecewiseFunction::from_problem(&numeric));
    }
    if !instances[0].compiled.rows.is_empty() {
        println!("robust residual   {worst_residual:.3e}");
        println!("sampled violations {violations} of {draws}");
    }
    let robust_ok = !(worst_residual > ROBUST_TOL) && violations == 0;

    let (oracle, upper_bound) = match &problem {
        Problem::Wasserstein(inst, set) => (worst_case_expectation(&fs[0], &inst.lifting, set).map_err(other)?.value, false),
        Problem::MixedMoment(inst, set) => {
            let r = check_mixed_moment(&fs[0], &inst.lifting, set).map_err(other)?;
            (r.value, r.is_upper_bound)
        }
        Problem::EventWise(_, set) => (event_wise_worst_case(&fs, set).map_err(other)?, false),
    };
    println!("oracle            {oracle}{}", if upper_bound { " (upper bound)" } else { "" });
    if lp.status != LpStatus::Optimal {
        return Err(Failure::Infeasible(format!("fixed-policy LP is {:?}; the policy violates a constraint", lp.status)));
    }
    let diff = lp.objective - oracle;
    println!("reformulation     {}", lp.objective);
    println!("difference        {diff:.3e}");
    let value_ok = if upper_bound { diff <= CERTIFY_TOL } else { diff.abs() <= CERTIFY_TOL };
    if !robust_ok {
        return Err(other("the policy violates a robust constraint"));
    }
    if !value_ok {
        return Err(other(format!("reformulation and oracle differ by {diff:.3e}")));
    }
    println!("certified");
    Ok(())
}

struct BenchArgs {
    horizon: Option<usize>,
    segments: Vec<usize>,
    samples: Option<usize>,
    closed_loop: bool,
    sims: usize,
    out_dir: Option<PathBuf>,
    gap: Option<f64>,
}

fn bench(config_path: Option<&Path>, args: &BenchArgs, seed: Option<u64>, threads: Option<usize>) -> Result<(), Failure> {
    let loaded = config_path.map(config::load).transpose()?;
    let mut spec = match &loaded {
        Some(l) if l.config.model.preset.is_none() => {
            return Err(ConfigError::Invalid("bench: the config must use preset = \"inventory\"".into()).into())
        }
        Some(l) => l.inventory_spec(seed)?,
        None => InventorySpec {
            seed: seed.unwrap_or(InventorySpec::default().seed),
            ..InventorySpec::default()
        },
    };
    if let Some(h) = args.horizon {
        spec.horizon = h;
    }
    if let Some(n) = args.samples {
        spec.samples = n;
    }
    let mut options = loaded.as_ref().map_or_else(MilpOptions::default, |l| l.config.solver.milp_options());
    if let Some(g) = args.gap {
        options.gap = g;
    }
    let out_dir = args.out_dir.clone().unwrap_or_else(|| match &loaded {
        Some(l) => l.config.output.resolved_dir(&l.base),
        None => std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from),
    });
    std::fs::create_dir_all(&out_dir).map_err(|e| other(format!("cannot create {}: {e}", out_dir.display())))?;

    let mut open = Vec::new();
    for &p in &args.segments {
        let s = InventorySpec { segments: p, ..spec.clone() };
        s.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let r = run_open_loop(&s, &options).map_err(other)?;
        eprintln!("open loop T={} p={p}: {:?} in {:.2}s", s.horizon, r.status, r.time_s);
        open.push(r);
    }
    write_open_loop_csv(out_dir.join("open_loop.csv"), &open).map_err(other)?;
    let mut summary = open_loop_summary(&open);

    if args.closed_loop {
        let sim_seed = spec.seed;
        let mut closed = Vec::new();
        for &p in &args.segments {
            let s = InventorySpec { segments: p, ..spec.clone() };
            let r = run_closed_loop(&s, args.sims, sim_seed, &options, threads).map_err(other)?;
            eprintln!("closed loop T={} p={p}: mean {:.2}", s.horizon, r.mean);
            closed.push(r);
        }
        write_closed_loop_csv(out_dir.join("closed_loop.csv"), &closed).map_err(other)?;
        summary.push('\n');
        summary.push_str(&closed_loop_summary(&closed));
    }
    write_text(out_dir.join("summary.txt"), &summary).map_err(other)?;
    print!("{summary}");
    Ok(())
}

fn radius(samples: &Path, reference: &Path) -> Result<(), Failure> {
    let read = |p: &Path| -> Result<Vec<Vec<f64>>, Failure> {
        let text = std::fs::read_to_string(p).map_err(|e| other(format!("cannot read {}: {e}", p.display())))?;
        parse_points(&text).map_err(|e| ConfigError::Invalid(format!("{}: {e}", p.display())).into())
    };
    let theta = estimate_radius(&read(samples)?, &read(reference)?).map_err(other)?;
    println!("{theta}");
    Ok(())
}

fn solve_mps(model: &Path, solution: &Path) -> Result<(), Failure> {
    let m = read_mps(model).map_err(|e| ConfigError::Invalid(format!("{}: {e}", model.display())))?;
    let options = MilpOptions {
        gap: 0.0,
        ..MilpOptions::default()
    };
    let r = solve_milp_by_blocks(&m, &options).map_err(other)?;
    if let Some(f) = status_failure(r.status, r.x.is_some()) {
        return Err(f);
    }
    let x = r.x.ok_or_else(|| other("no solution"))?;
    let mut text = String::new();
    for (var, v) in m.vars().iter().zip(&x) {
        let _ = writeln!(text, "{} {v}", var.name);
    }
    std::fs::write(solution, text).map_err(|e| other(format!("cannot write {}: {e}", solution.display())))?;
    Ok(())
}
