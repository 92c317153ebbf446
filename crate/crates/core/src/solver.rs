//! Block coordinate descent (ISTA-BC) with safe screening.
//!
//! Each block update is the exact minimizer of the quadratic majorization of
//! the least-squares term with Lipschitz constant `L_g = ‖X_g‖₂²`, which is a
//! soft-threshold followed by a group soft-threshold. Every
//! `gap_check_every` passes the residual is refreshed, a dual feasible point
//! and the duality gap are computed, and the active set is shrunk with the
//! sphere selected by [`Rule`].

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::GroupPartition;
use crate::linalg::{axpy, dot, DesignMatrix, POWER_ITER_MAX, POWER_ITER_TOL};
use crate::penalty::{group_soft_threshold_in_place, sgl_dual_norm_argmax, soft_threshold_in_place, PenaltyParams};
use crate::problem::Problem;
use crate::screening::{
    gap_from_residual, gap_radius, reference_center_correlations, screen_with_correlations, ActiveSet, Dst3Direction,
    GapReport,
};

/// Which safe region drives screening during a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Gap,
    Static,
    Dynamic,
    Dst3,
    None,
}

impl Rule {
    pub const ALL: [Rule; 5] = [Rule::None, Rule::Static, Rule::Dynamic, Rule::Dst3, Rule::Gap];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Gap => "gap",
            Rule::Static => "static",
            Rule::Dynamic => "dynamic",
            Rule::Dst3 => "dst3",
            Rule::None => "none",
        }
    }
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Rule::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown screening rule {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stop once the duality gap is at most this value.
    pub tolerance: f64,
    /// Maximum number of passes over the active groups.
    pub max_passes: usize,
    /// Passes between two duality-gap evaluations.
    pub gap_check_every: usize,
    pub rule: Rule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_passes: 50_000,
            gap_check_every: 10,
            rule: Rule::Gap,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_passes == 0 {
            return Err(Error::invalid("max_passes must be at least 1"));
        }
        if self.gap_check_every == 0 {
            return Err(Error::invalid("gap_check_every must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub num_points: usize,
    /// The grid spans `delta` decades below `λ_max`.
    pub delta: f64,
    pub explicit_lambdas: Option<Vec<f64>>,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            num_points: 100,
            delta: 3.0,
            explicit_lambdas: None,
        }
    }
}

impl PathConfig {
    pub fn lambdas(&self, lambda_max: f64) -> Result<Vec<f64>> {
        match &self.explicit_lambdas {
            Some(list) => {
                if list.is_empty() || list.iter().any(|l| !(*l > 0.0)) {
                    return Err(Error::invalid("explicit lambdas must be positive and non-empty"));
                }
                Ok(list.clone())
            }
            None => lambda_grid(lambda_max, self.num_points, self.delta),
        }
    }
}

/// `λ_t = λ_max · 10^(−δt/(T−1))` for `t = 0..T`.
pub fn lambda_grid(lambda_max: f64, num_points: usize, delta: f64) -> Result<Vec<f64>> {
    if num_points == 0 {
        return Err(Error::invalid("the path needs at least one point"));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    if num_points == 1 {
        return Ok(vec![lambda_max]);
    }
    let denom = (num_points - 1) as f64;
    Ok((0..num_points)
        .map(|t| lambda_max * 10f64.powf(-delta * t as f64 / denom))
        .collect())
}

/// Active-set sizes right after the screening step of one gap check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreeningSnapshot {
    pub pass: usize,
    pub active_groups: usize,
    pub active_features: usize,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub lambda: f64,
    pub beta: Vec<f64>,
    /// Dual feasible point of the last gap check.
    pub theta: Vec<f64>,
    pub final_gap: GapReport,
    /// `(pass, gap)` at every gap check.
    pub gap_trace: Vec<(usize, f64)>,
    pub screening_trace: Vec<ScreeningSnapshot>,
    pub active_set: ActiveSet,
    pub passes_used: usize,
    pub converged: bool,
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct PathResult {
    pub lambda_max: f64,
    pub results: Vec<SolveResult>,
}

impl PathResult {
    pub fn all_converged(&self) -> bool {
        self.results.iter().all(|r| r.converged)
    }

    pub fn total_time(&self) -> Duration {
        self.results.iter().map(|r| r.wall_time).sum()
    }
}

/// `‖X_g‖₂²` for the column block `cols`.
pub fn block_lipschitz(x: &DesignMatrix, cols: &[usize]) -> f64 {
    let s = crate::linalg::block_spectral_norm(x, cols, POWER_ITER_TOL, POWER_ITER_MAX);
    s * s
}

/// Exact minimizer of the majorized block problem:
/// `GST_{(1−τ)w_g λ/L_g}(ST_{τλ/L_g}(β_g − ∇_g f/L_g))`.
pub fn block_update(beta_g: &[f64], grad_g: &[f64], lipschitz: f64, lambda: f64, tau: f64, weight: f64) -> Vec<f64> {
    let mut z: Vec<f64> = beta_g.iter().zip(grad_g).map(|(b, g)| b - g / lipschitz).collect();
    prox_sgl_block(&mut z, lambda / lipschitz, tau, weight);
    z
}

#[inline]
/// [`gap_radius`] with the gap floored at the rounding level of its
/// evaluation. Near the optimum the computed gap can round to zero or below;
/// a zero radius would then screen equicorrelated variables that sit on their
/// threshold up to rounding.
fn screening_radius(report: &GapReport, n_terms: usize) -> f64 {
    let floor = (n_terms as f64).sqrt() * f64::EPSILON * (report.primal.abs() + report.dual.abs());
    let floored = GapReport {
        gap: report.gap.max(floor),
        ..*report
    };
    gap_radius(&floored)
}

fn prox_sgl_block(z: &mut [f64], step: f64, tau: f64, weight: f64) {
    soft_threshold_in_place(z, tau * step);
    group_soft_threshold_in_place(z, (1.0 - tau) * weight * step);
}

/// Per-problem data shared by every λ of a path.
struct Precomputed {
    lambda_max: f64,
    xty: Vec<f64>,
    dst3: Option<(Dst3Direction, Vec<f64>)>,
}

impl Precomputed {
    fn new(problem: &Problem, penalty: &PenaltyParams, partition: &GroupPartition, rule: Rule) -> Result<Self> {
        let xty = problem.x().tmatvec(problem.y());
        let lambda_max = sgl_dual_norm_argmax(&xty, penalty, partition).0;
        let dst3 = if rule == Rule::Dst3 && lambda_max > 0.0 {
            let dir = Dst3Direction::new(problem, penalty, partition)?;
            let xt_eta = problem.x().tmatvec(&dir.eta);
            Some((dir, xt_eta))
        } else {
            None
        };
        Ok(Self { lambda_max, xty, dst3 })
    }
}

fn check_inputs(
    problem: &Problem,
    penalty: &PenaltyParams,
    partition: &GroupPartition,
    config: &SolverConfig,
) -> Result<()> {
    config.validate()?;
    if partition.n_features() != problem.n_features() {
        return Err(Error::DimensionMismatch {
            what: "partition size",
            expected: problem.n_features(),
            got: partition.n_features(),
        });
    }
    if penalty.n_groups() != partition.n_groups() {
        return Err(Error::DimensionMismatch {
            what: "number of penalty weights",
            expected: partition.n_groups(),
            got: penalty.n_groups(),
        });
    }
    if !problem.matches(partition) {
        return Err(Error::InvalidPartition(
            "partition differs from the one the problem was built with".into(),
        ));
    }
    if problem.block_norms().len() != partition.n_groups() {
        return Err(Error::DimensionMismatch {
            what: "problem block count",
            expected: partition.n_groups(),
            got: problem.block_norms().len(),
        });
    }
    Ok(())
}

/// Solves the SGL problem at one `lambda`, starting from `init_beta`.
pub fn solve(
    problem: &Problem,
    penalty: &PenaltyParams,
    partition: &GroupPartition,
    lambda: f64,
    init_beta: &[f64],
    config: &SolverConfig,
) -> Result<SolveResult> {
    solve_observed(problem, penalty, partition, lambda, init_beta, config, |_, _| {})
}

/// Like [`solve`], calling `observer(β, ρ)` after every block update.
pub fn solve_observed<F>(
    problem: &Problem,
    penalty: &PenaltyParams,
    partition: &GroupPartition,
    lambda: f64,
    init_beta: &[f64],
    config: &SolverConfig,
    observer: F,
) -> Result<SolveResult>
where
    F: FnMut(&[f64], &[f64]),
{
    check_inputs(problem, penalty, partition, config)?;
    problem.check_beta(init_beta)?;
    let pre = Precomputed::new(problem, penalty, partition, config.rule)?;
    solve_inner(problem, penalty, partition, lambda, init_beta, config, &pre, observer)
}

#[allow(clippy::too_many_arguments)]
fn solve_inner<F>(
    problem: &Problem,
    penalty: &PenaltyParams,
    partition: &GroupPartition,
    lambda: f64,
    init_beta: &[f64],
    config: &SolverConfig,
    pre: &Precomputed,
    mut observer: F,
) -> Result<SolveResult>
where
    F: FnMut(&[f64], &[f64]),
{
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    let start = Instant::now();
    let x = problem.x();
    let n = problem.n_samples().max(1);
    let tau = penalty.tau();

    let mut beta = init_beta.to_vec();
    let mut active = ActiveSet::full(partition);
    let lipschitz: Vec<f64> = problem.block_norms().iter().map(|s| s * s).collect();
    for (g, &l) in lipschitz.iter().enumerate() {
        if l == 0.0 {
            // all-zero columns never enter the fit
            active.deactivate_group(g, partition);
            for &j in partition.group(g) {
                beta[j] = 0.0;
            }
        }
    }
    let mut rho = problem.residual(&beta);

    let use_dst3 = config.rule == Rule::Dst3 && lambda <= pre.lambda_max;
    let static_radius = (1.0 / pre.lambda_max - 1.0 / lambda).abs() * dot(problem.y(), problem.y()).sqrt();

    let mut gap_trace = Vec::new();
    let mut screening_trace = Vec::new();
    let mut passes = 0usize;
    let mut converged;
    let mut last_report;
    let mut last_theta;

    let mut z = Vec::new();

    loop {
        if passes.is_multiple_of(config.gap_check_every) || passes == config.max_passes {
            rho = problem.residual_packed(&beta);
            let xt_rho = problem.tmatvec_packed(&rho);
            let (point, report, xt_theta) =
                gap_from_residual(&beta, &rho, &xt_rho, problem, penalty, partition, lambda)?;
            gap_trace.push((passes, report.gap));
            converged = report.gap <= config.tolerance;

            let screen = |radius: f64, center_corr: &[f64], active: &mut ActiveSet| {
                screen_with_correlations(radius, center_corr, problem, penalty, partition, active)
            };
            let screened = match config.rule {
                Rule::None => 0,
                Rule::Gap => {
                    let radius = screening_radius(&report, problem.n_samples() + problem.n_features());
                    screen(radius, &xt_theta, &mut active)
                }
                Rule::Static => {
                    let c = reference_center_correlations(&pre.xty, None, lambda);
                    screen(static_radius, &c, &mut active)
                }
                Rule::Dynamic => {
                    let d2: f64 = point
                        .theta
                        .iter()
                        .zip(problem.y())
                        .map(|(t, y)| (t - y / lambda).powi(2))
                        .sum();
                    let c = reference_center_correlations(&pre.xty, None, lambda);
                    screen(d2.sqrt(), &c, &mut active)
                }
                Rule::Dst3 => match (&pre.dst3, use_dst3) {
                    (Some((dir, xt_eta)), true) => {
                        let coef = dir.projection_coefficient(problem.y(), lambda);
                        let mut d_theta = 0.0;
                        let mut d_center = 0.0;
                        for ((t, y), e) in point.theta.iter().zip(problem.y()).zip(&dir.eta) {
                            d_theta += (y / lambda - t).powi(2);
                            d_center += (coef * e).powi(2);
                        }
                        let radius = (d_theta - d_center).max(0.0).sqrt();
                        let c = reference_center_correlations(&pre.xty, Some((xt_eta, coef)), lambda);
                        screen(radius, &c, &mut active)
                    }
                    _ => 0,
                },
            };
            if screened > 0 {
                for (j, b) in beta.iter_mut().enumerate() {
                    if *b != 0.0 && !active.is_feature_active(j) {
                        axpy(*b, x.column(j), &mut rho);
                        *b = 0.0;
                    }
                }
            }
            screening_trace.push(ScreeningSnapshot {
                pass: passes,
                active_groups: active.n_active_groups(),
                active_features: active.n_active_features(),
            });
            last_report = report;
            last_theta = point.theta;
            if converged || passes == config.max_passes {
                break;
            }
        }

        for (g, &l) in lipschitz.iter().enumerate() {
            if !active.is_group_active(g) {
                continue;
            }
            let members = partition.group(g);
            let block = problem.block(g);
            let inv_l = 1.0 / l;
            z.clear();
            let mut any_nonzero = false;
            for (&j, col) in members.iter().zip(block.chunks_exact(n)) {
                let v = if active.is_feature_active(j) {
                    beta[j] + dot(col, &rho) * inv_l
                } else {
                    0.0
                };
                any_nonzero |= v != 0.0;
                z.push(v);
            }
            if any_nonzero {
                prox_sgl_block(&mut z, lambda * inv_l, tau, penalty.weight(g));
            }
            let mut changed = false;
            for ((&j, &new), col) in members.iter().zip(&z).zip(block.chunks_exact(n)) {
                let delta = new - beta[j];
                if delta != 0.0 {
                    axpy(-delta, col, &mut rho);
                    beta[j] = new;
                    changed = true;
                }
            }
            if changed {
                observer(&beta, &rho);
            }
        }
        passes += 1;
    }

    Ok(SolveResult {
        lambda,
        beta,
        theta: last_theta,
        final_gap: last_report,
        gap_trace,
        screening_trace,
        active_set: active,
        passes_used: passes,
        converged,
        wall_time: start.elapsed(),
    })
}

/// Solves along a decreasing λ grid, warm-starting each point from the
/// previous solution.
pub fn solve_path(
    problem: &Problem,
    penalty: &PenaltyParams,
    partition: &GroupPartition,
    path: &PathConfig,
    config: &SolverConfig,
) -> Result<PathResult> {
    solve_path_with(problem, penalty, partition, path, config, true)
}

/// [`solve_path`] with warm starts optionally disabled (every point starts
/// from zero).
pub fn solve_path_with(
    problem: &Problem,
    penalty: &PenaltyParams,
    partition: &GroupPartition,
    path: &PathConfig,
    config: &SolverConfig,
    warm_start: bool,
) -> Result<PathResult> {
    check_inputs(problem, penalty, partition, config)?;
    let pre = Precomputed::new(problem, penalty, partition, config.rule)?;
    if !(pre.lambda_max > 0.0) {
        return Err(Error::Domain("lambda_max is zero: Xᵀy vanishes".into()));
    }
    let lambdas = path.lambdas(pre.lambda_max)?;
    let zeros = vec![0.0; problem.n_features()];
    let mut results: Vec<SolveResult> = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        let init = match results.last() {
            Some(prev) if warm_start => prev.beta.as_slice(),
            _ => zeros.as_slice(),
        };
        let res = solve_inner(problem, penalty, partition, lambda, init, config, &pre, |_, _| {})?;
        results.push(res);
    }
    Ok(PathResult {
        lambda_max: pre.lambda_max,
        results,
    })
}
