//! Command implementations behind the `sgl` binary, and the JSON records they
//! emit. Schemas live in `crates/core/schema/`.

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{generate_synthetic, load_problem, write_problem, SyntheticConfig};
use crate::error::{Error, Result};
use crate::groups::GroupPartition;
use crate::penalty::PenaltyParams;
use crate::problem::Problem;
use crate::screening::lambda_max;
use crate::solver::{solve, solve_path, PathConfig, PathResult, Rule, SolveResult, SolverConfig};

/// Environment variable capping the number of rules `bench` runs at once.
pub const THREADS_ENV: &str = "SGL_THREADS";

#[derive(Debug, Parser)]
#[command(name = "sgl", version, about = "Sparse-Group Lasso with GAP safe screening")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic benchmark problem and write it to disk.
    GenData(GenDataArgs),
    /// Solve at a single regularization level.
    Solve(SolveArgs),
    /// Solve along a regularization path.
    Path(PathArgs),
    /// Time every screening rule along the same path.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct SyntheticArgs {
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub p: usize,
    #[arg(long = "group-size", default_value_t = 10)]
    pub group_size: usize,
    #[arg(long, default_value_t = 10)]
    pub gamma1: usize,
    #[arg(long, default_value_t = 4)]
    pub gamma2: usize,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long = "noise-scale", default_value_t = 0.01)]
    pub noise_scale: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

impl SyntheticArgs {
    pub fn config(&self) -> SyntheticConfig {
        SyntheticConfig {
            n: self.n,
            p: self.p,
            group_size: self.group_size,
            rho: self.rho,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            noise_scale: self.noise_scale,
            seed: self.seed,
        }
    }
}

impl Default for SyntheticArgs {
    fn default() -> Self {
        let c = SyntheticConfig::default();
        Self {
            n: c.n,
            p: c.p,
            group_size: c.group_size,
            gamma1: c.gamma1,
            gamma2: c.gamma2,
            rho: c.rho,
            noise_scale: c.noise_scale,
            seed: c.seed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the design matrix in the binary SGLB format.
    #[arg(long)]
    pub binary: bool,
}

/// Where the problem comes from: files or the synthetic generator.
#[derive(Debug, Clone, Args, Default)]
pub struct DataArgs {
    /// Generate the problem instead of reading files.
    #[arg(long)]
    pub synthetic: bool,
    #[arg(long, required_unless_present = "synthetic")]
    pub x: Option<PathBuf>,
    #[arg(long, required_unless_present = "synthetic")]
    pub y: Option<PathBuf>,
    #[arg(long, required_unless_present = "synthetic")]
    pub groups: Option<PathBuf>,
    #[command(flatten)]
    pub synth: SyntheticArgs,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataEcho {
    Files { x: PathBuf, y: PathBuf, groups: PathBuf },
    Synthetic(SyntheticConfig),
}

impl DataArgs {
    pub fn load(&self) -> Result<(Problem, GroupPartition, DataEcho)> {
        if self.synthetic {
            let cfg = self.synth.config();
            let (problem, partition, _) = generate_synthetic(&cfg)?;
            return Ok((problem, partition, DataEcho::Synthetic(cfg)));
        }
        let need = |p: &Option<PathBuf>, flag: &str| {
            p.clone()
                .ok_or_else(|| Error::invalid(format!("--{flag} is required without --synthetic")))
        };
        let (x, y, groups) = (need(&self.x, "x")?, need(&self.y, "y")?, need(&self.groups, "groups")?);
        let (problem, partition) = load_problem(&x, &y, &groups)?;
        Ok((problem, partition, DataEcho::Files { x, y, groups }))
    }
}

/// Solver flags shared by `solve`, `path` and `bench`.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// ℓ1 mixing weight τ in [0, 1].
    #[arg(long, default_value_t = 0.2)]
    pub tau: f64,
    /// Maximum passes over the active groups per λ.
    #[arg(long = "max-passes", default_value_t = 50_000)]
    pub max_passes: usize,
    /// Passes between duality-gap checks.
    #[arg(long, default_value_t = 10)]
    pub fce: usize,
    /// Exit with a nonzero status if any solve fails to converge.
    #[arg(long)]
    pub strict: bool,
    /// Write the JSON record here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Default for SolverArgs {
    fn default() -> Self {
        Self {
            tau: 0.2,
            max_passes: 50_000,
            fce: 10,
            strict: false,
            out: None,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Regularization level; defaults to `--lambda-ratio`·λ_max.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long = "lambda-ratio", default_value_t = 0.1)]
    pub lambda_ratio: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = Rule::Gap)]
    pub rule: Rule,
}

#[derive(Debug, Clone, Args)]
pub struct PathArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Number of grid points.
    #[arg(long = "T", default_value_t = 100)]
    pub num_points: usize,
    /// Decades spanned by the grid below λ_max.
    #[arg(long, default_value_t = 3.0)]
    pub delta: f64,
    /// Duality-gap tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = Rule::Gap)]
    pub rule: Rule,
    /// Include the coefficient vectors in the record.
    #[arg(long = "with-beta")]
    pub with_beta: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long = "T", default_value_t = 100)]
    pub num_points: usize,
    #[arg(long, default_value_t = 3.0)]
    pub delta: f64,
    /// Comma-separated duality-gap tolerances.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1e-4, 1e-6, 1e-8])]
    pub eps: Vec<f64>,
    /// Comma-separated rules to compare.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = Rule::ALL.to_vec())]
    pub rules: Vec<Rule>,
}

/// Effective configuration of a run, after defaults.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConfigEcho {
    pub data: DataEcho,
    pub tau: f64,
    pub num_points: usize,
    pub delta: f64,
    pub eps: Vec<f64>,
    pub max_passes: usize,
    pub fce: usize,
    pub rules: Vec<Rule>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda: Option<f64>,
}

/// One λ of a solve or path.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PointRecord {
    pub lambda: f64,
    pub passes: usize,
    pub final_gap: f64,
    pub converged: bool,
    pub nonzeros: usize,
    /// Active-feature fraction right after each gap check.
    pub active_feature_fraction: Vec<f64>,
    pub active_group_fraction: Vec<f64>,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub beta: Option<Vec<f64>>,
}

impl PointRecord {
    fn from_result(res: &SolveResult, p: usize, n_groups: usize, with_beta: bool) -> Self {
        Self {
            lambda: res.lambda,
            passes: res.passes_used,
            final_gap: res.final_gap.gap,
            converged: res.converged,
            nonzeros: res.beta.iter().filter(|&&b| b != 0.0).count(),
            active_feature_fraction: res
                .screening_trace
                .iter()
                .map(|s| s.active_features as f64 / p as f64)
                .collect(),
            active_group_fraction: res
                .screening_trace
                .iter()
                .map(|s| s.active_groups as f64 / n_groups as f64)
                .collect(),
            wall_time_s: res.wall_time.as_secs_f64(),
            beta: with_beta.then(|| res.beta.clone()),
        }
    }
}

/// Totals for one (rule, tolerance) run of a path.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RuleTotals {
    pub rule: Rule,
    pub eps: f64,
    pub wall_time_s: f64,
    pub passes: usize,
    pub all_converged: bool,
    /// Mean over every gap check of every λ.
    pub mean_active_feature_fraction: f64,
    pub mean_active_group_fraction: f64,
}

impl RuleTotals {
    pub fn from_points(rule: Rule, eps: f64, points: &[PointRecord]) -> Self {
        let mean = |f: fn(&PointRecord) -> &Vec<f64>| {
            let (sum, count) = points
                .iter()
                .flat_map(|pt| f(pt).iter())
                .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
            if count == 0 {
                0.0
            } else {
                sum / count as f64
            }
        };
        Self {
            rule,
            eps,
            wall_time_s: points.iter().map(|p| p.wall_time_s).sum(),
            passes: points.iter().map(|p| p.passes).sum(),
            all_converged: points.iter().all(|p| p.converged),
            mean_active_feature_fraction: mean(|p| &p.active_feature_fraction),
            mean_active_group_fraction: mean(|p| &p.active_group_fraction),
        }
    }
}

/// Output of `solve` and `path`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunRecord {
    pub command: String,
    pub config: ConfigEcho,
    pub lambda_max: f64,
    pub points: Vec<PointRecord>,
    pub totals: Vec<RuleTotals>,
}

impl RunRecord {
    pub fn all_converged(&self) -> bool {
        self.points.iter().all(|p| p.converged)
    }
}

/// Output of `bench`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BenchRecord {
    pub command: String,
    pub config: ConfigEcho,
    pub lambda_max: f64,
    pub rows: Vec<RuleTotals>,
}

impl BenchRecord {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.all_converged)
    }

    /// Aligned text table: one row per tolerance, one column per rule.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:>10}", "eps"));
        for r in &self.config.rules {
            out.push_str(&format!(" {:>18}", format!("{r} time(s)")));
        }
        for r in &self.config.rules {
            out.push_str(&format!(" {:>16}", format!("{r} active")));
        }
        out.push('\n');
        for &eps in &self.config.eps {
            out.push_str(&format!("{eps:>10.0e}"));
            let row = |rule: Rule| self.rows.iter().find(|t| t.rule == rule && t.eps == eps);
            for &r in &self.config.rules {
                match row(r) {
                    Some(t) => out.push_str(&format!(" {:>18.3}", t.wall_time_s)),
                    None => out.push_str(&format!(" {:>18}", "-")),
                }
            }
            for &r in &self.config.rules {
                match row(r) {
                    Some(t) => out.push_str(&format!(" {:>16.4}", t.mean_active_feature_fraction)),
                    None => out.push_str(&format!(" {:>16}", "-")),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn solver_config(args: &SolverArgs, eps: f64, rule: Rule) -> SolverConfig {
    SolverConfig {
        tolerance: eps,
        max_passes: args.max_passes,
        gap_check_every: args.fce,
        rule,
    }
}

pub fn cmd_gen_data(args: &GenDataArgs) -> Result<Vec<PathBuf>> {
    let (problem, partition, _) = generate_synthetic(&args.synthetic.config())?;
    let files = write_problem(&args.out, &problem, &partition, args.binary)?;
    let mut written = vec![files.x, files.y, files.groups];
    written.extend(files.x_binary);
    Ok(written)
}

pub fn cmd_solve(args: &SolveArgs) -> Result<RunRecord> {
    let (problem, partition, echo) = args.data.load()?;
    let penalty = PenaltyParams::for_partition(args.solver.tau, &partition)?;
    let lmax = lambda_max(&problem, &penalty, &partition);
    let lambda = args.lambda.unwrap_or(args.lambda_ratio * lmax);
    let config = solver_config(&args.solver, args.eps, args.rule);
    let zeros = vec![0.0; problem.n_features()];
    let res = solve(&problem, &penalty, &partition, lambda, &zeros, &config)?;
    let points = vec![PointRecord::from_result(
        &res,
        problem.n_features(),
        partition.n_groups(),
        true,
    )];
    Ok(RunRecord {
        command: "solve".into(),
        config: ConfigEcho {
            data: echo,
            tau: args.solver.tau,
            num_points: 1,
            delta: 0.0,
            eps: vec![args.eps],
            max_passes: args.solver.max_passes,
            fce: args.solver.fce,
            rules: vec![args.rule],
            lambda: Some(lambda),
        },
        lambda_max: lmax,
        totals: vec![RuleTotals::from_points(args.rule, args.eps, &points)],
        points,
    })
}

fn path_points(path: &PathResult, problem: &Problem, partition: &GroupPartition, with_beta: bool) -> Vec<PointRecord> {
    path.results
        .iter()
        .map(|r| PointRecord::from_result(r, problem.n_features(), partition.n_groups(), with_beta))
        .collect()
}

pub fn cmd_path(args: &PathArgs) -> Result<RunRecord> {
    let (problem, partition, echo) = args.data.load()?;
    let penalty = PenaltyParams::for_partition(args.solver.tau, &partition)?;
    let path_cfg = PathConfig {
        num_points: args.num_points,
        delta: args.delta,
        explicit_lambdas: None,
    };
    let config = solver_config(&args.solver, args.eps, args.rule);
    let path = solve_path(&problem, &penalty, &partition, &path_cfg, &config)?;
    let points = path_points(&path, &problem, &partition, args.with_beta);
    Ok(RunRecord {
        command: "path".into(),
        config: ConfigEcho {
            data: echo,
            tau: args.solver.tau,
            num_points: args.num_points,
            delta: args.delta,
            eps: vec![args.eps],
            max_passes: args.solver.max_passes,
            fce: args.solver.fce,
            rules: vec![args.rule],
            lambda: None,
        },
        lambda_max: path.lambda_max,
        totals: vec![RuleTotals::from_points(args.rule, args.eps, &points)],
        points,
    })
}

/// Number of concurrent path runs allowed by `SGL_THREADS` (default 1).
pub fn bench_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or(1)
}

pub fn cmd_bench(args: &BenchArgs) -> Result<BenchRecord> {
    if args.eps.is_empty() || args.rules.is_empty() {
        return Err(Error::invalid("bench needs at least one tolerance and one rule"));
    }
    let (problem, partition, echo) = args.data.load()?;
    let penalty = PenaltyParams::for_partition(args.solver.tau, &partition)?;
    let path_cfg = PathConfig {
        num_points: args.num_points,
        delta: args.delta,
        explicit_lambdas: None,
    };
    let jobs: Vec<(f64, Rule)> = args
        .eps
        .iter()
        .flat_map(|&e| args.rules.iter().map(move |&r| (e, r)))
        .collect();
    let threads = bench_threads().min(jobs.len());
    let results: Mutex<Vec<Option<Result<RuleTotals>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = Mutex::new(0usize);
    let run_job = |(eps, rule): (f64, Rule)| -> Result<RuleTotals> {
        let config = solver_config(&args.solver, eps, rule);
        let path = solve_path(&problem, &penalty, &partition, &path_cfg, &config)?;
        let points = path_points(&path, &problem, &partition, false);
        Ok(RuleTotals::from_points(rule, eps, &points))
    };
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let k = {
                    let mut guard = next.lock().unwrap();
                    let k = *guard;
                    *guard += 1;
                    k
                };
                if k >= jobs.len() {
                    break;
                }
                let out = run_job(jobs[k]);
                results.lock().unwrap()[k] = Some(out);
            });
        }
    });
    let rows = results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every bench job runs"))
        .collect::<Result<Vec<_>>>()?;
    let lmax = lambda_max(&problem, &penalty, &partition);
    Ok(BenchRecord {
        command: "bench".into(),
        config: ConfigEcho {
            data: echo,
            tau: args.solver.tau,
            num_points: args.num_points,
            delta: args.delta,
            eps: args.eps.clone(),
            max_passes: args.solver.max_passes,
            fce: args.solver.fce,
            rules: args.rules.clone(),
            lambda: None,
        },
        lambda_max: lmax,
        rows,
    })
}

/// Writes `json` to `out`, or stdout when `out` is `None`.
pub fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| Error::invalid(format!("cannot serialize record: {e}")))?;
    match out {
        Some(path) => std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}
