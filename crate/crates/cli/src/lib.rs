//! Command-line front end: instance generation, single solves and
//! benchmark sweeps.

pub mod benchmark;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use interdict::masters::{MasterMode, SolverConfig};
use interdict::partition::RefinementMode;
use interdict::report::{Method, Report};
use interdict::{def_benchmark, instance::GridSpec, masters, oracle, NetworkInstance};

pub const EXIT_SOLVED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_TIME_LIMIT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "interdict", version, about = "Defender-attacker-operator interdiction solvers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a random grid instance.
    Generate {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long)]
        budget: u32,
        #[arg(long)]
        levels: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one instance and print the report as JSON.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Sra)]
        method: MethodArg,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Sweep grid settings and seeds; one CSV row per setting and method.
    Benchmark {
        /// Grid side lengths (rows = cols).
        #[arg(long, value_delimiter = ',', default_value = "3")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "2")]
        budgets: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_value = "2")]
        levels: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        #[arg(long, value_delimiter = ',', value_enum, default_value = "sra,def")]
        methods: Vec<MethodArg>,
        #[command(flatten)]
        solver: SolverArgs,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, clap::Args)]
pub struct SolverArgs {
    /// Cell-error threshold.
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    /// Relative gap at which the outer loop stops.
    #[arg(long, default_value_t = 1e-6)]
    pub eps_gap: f64,
    /// Seconds per solve.
    #[arg(long, default_value_t = 60.0)]
    pub time_limit: f64,
    #[arg(long, value_enum, default_value_t = RefinementArg::ExactArgmin)]
    pub refinement_mode: RefinementArg,
    #[arg(long, value_enum, default_value_t = MasterArg::BranchAndBound)]
    pub master_mode: MasterArg,
}

impl SolverArgs {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            epsilon_cell: self.eps,
            epsilon_gap: self.eps_gap,
            time_limit: Some(self.time_limit),
            refinement_mode: match self.refinement_mode {
                RefinementArg::ExactArgmin => RefinementMode::ExactArgmin,
                RefinementArg::FirstContested => RefinementMode::FirstContested,
            },
            master_mode: match self.master_mode {
                MasterArg::Enumerate => MasterMode::Enumerate,
                MasterArg::BranchAndBound => MasterMode::BranchAndBound,
            },
            refinements_per_iteration: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Sra,
    Def,
    Oracle,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Sra => Method::Sra,
            MethodArg::Def => Method::Def,
            MethodArg::Oracle => Method::Oracle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RefinementArg {
    ExactArgmin,
    FirstContested,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MasterArg {
    Enumerate,
    BranchAndBound,
}

/// Runs one solver on an instance.
pub fn solve(instance: &NetworkInstance, method: Method, config: &SolverConfig) -> interdict::Result<Report> {
    match method {
        Method::Sra => masters::solve_defender(instance, config),
        Method::Def => def_benchmark::def_solve(instance, config),
        Method::Oracle => oracle::solve_report(instance),
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_SOLVED };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn execute(command: Command) -> anyhow::Result<i32> {
    match command {
        Command::Generate {
            rows,
            cols,
            budget,
            levels,
            seed,
            out,
        } => {
            let inst = GridSpec::new(rows, cols, budget, levels, seed).generate()?;
            inst.save(&out).with_context(|| format!("writing {}", out.display()))?;
            Ok(EXIT_SOLVED)
        }
        Command::Solve {
            instance,
            method,
            solver,
        } => {
            let config = solver.config();
            config.validate()?;
            let inst = NetworkInstance::load(&instance).with_context(|| format!("loading {}", instance.display()))?;
            let report = solve(&inst, method.into(), &config)?;
            let mut stdout = std::io::stdout().lock();
            if let Err(e) = writeln!(stdout, "{}", report.to_json()) {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(e.into());
                }
            }
            Ok(if report.is_solved() { EXIT_SOLVED } else { EXIT_TIME_LIMIT })
        }
        Command::Benchmark {
            sizes,
            budgets,
            levels,
            seeds,
            methods,
            solver,
            out,
        } => {
            if seeds.is_empty() {
                bail!("the seed list is empty");
            }
            let config = solver.config();
            config.validate()?;
            let sweep = benchmark::Sweep {
                sizes,
                budgets,
                levels,
                seeds,
                methods: methods.into_iter().map(Method::from).collect(),
                config,
            };
            let rows = benchmark::summarize(&benchmark::run_sweep(&sweep)?);
            match out {
                Some(path) => {
                    let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    benchmark::write_csv(file, &rows)?;
                }
                None => benchmark::write_csv(std::io::stdout().lock(), &rows)?,
            }
            Ok(EXIT_SOLVED)
        }
    }
}
