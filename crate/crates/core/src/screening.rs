//! Dual points, duality gaps, safe spheres and the two-level screening tests.
//!
//! Any ball `B(θ_c, r)` known to contain the dual optimum `θ̂` yields two safe
//! tests:
//!
//! * group `g` is zero if `T_g < (1−τ)w_g`, where `T_g` upper-bounds
//!   `max_{θ ∈ B} ‖ST_τ(X_gᵀθ)‖`;
//! * feature `j` is zero if `|X_jᵀθ_c| + r‖X_j‖ < τ`.
//!
//! The GAP sphere is centred at the rescaled residual with radius
//! `sqrt(2·gap)/λ`; the static, dynamic and DST3 spheres are kept as reference
//! rules for comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::GroupPartition;
use crate::linalg::{dot, dot_accurate, norm2, norm_inf, two_sum};
use crate::penalty::{
    epsilon_norm_gradient, sgl_dual_norm_argmax, sgl_norm, sgl_norm_unchecked, soft_threshold_norm, PenaltyParams,
};
use crate::problem::Problem;

/// Feasibility slack allowed on `Ω^D(Xᵀθ) ≤ 1`.
pub const FEASIBILITY_SLACK: f64 = 1e-12;

/// Gaps below this fraction of the primal value are re-evaluated term by term.
const REFINE_BELOW: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SphereKind {
    Gap,
    Static,
    Dynamic,
    Dst3,
}

/// A ball `B(center, radius)` in the dual space.
#[derive(Debug, Clone, PartialEq)]
pub struct SafeSphere {
    pub center: Vec<f64>,
    pub radius: f64,
    pub kind: SphereKind,
}

impl SafeSphere {
    pub fn new(center: Vec<f64>, radius: f64, kind: SphereKind) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(Error::invalid(format!("sphere radius must be >= 0, got {radius}")));
        }
        Ok(Self { center, radius, kind })
    }

    pub fn contains(&self, theta: &[f64], slack: f64) -> bool {
        let d2: f64 = self.center.iter().zip(theta).map(|(a, b)| (a - b) * (a - b)).sum();
        d2.sqrt() <= self.radius + slack
    }
}

/// A dual feasible point together with `Ω^D(Xᵀθ)` at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    pub theta: Vec<f64>,
    pub dual_norm_value: f64,
}

/// Primal and dual objective values and their difference at one λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub lambda: f64,
}

impl GapReport {
    pub fn new(primal: f64, dual: f64, lambda: f64) -> Self {
        Self {
            primal,
            dual,
            gap: primal - dual,
            lambda,
        }
    }
}

/// Not-yet-screened groups and features.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    groups: Vec<bool>,
    features: Vec<bool>,
}

impl ActiveSet {
    /// Everything active.
    pub fn full(partition: &GroupPartition) -> Self {
        Self {
            groups: vec![true; partition.n_groups()],
            features: vec![true; partition.n_features()],
        }
    }

    /// Builds from explicit masks, clearing features of inactive groups.
    pub fn from_masks(groups: Vec<bool>, mut features: Vec<bool>, partition: &GroupPartition) -> Result<Self> {
        if groups.len() != partition.n_groups() || features.len() != partition.n_features() {
            return Err(Error::DimensionMismatch {
                what: "active-set mask",
                expected: partition.n_features(),
                got: features.len(),
            });
        }
        for (g, &active) in groups.iter().enumerate() {
            if !active {
                for &j in partition.group(g) {
                    features[j] = false;
                }
            }
        }
        Ok(Self { groups, features })
    }

    #[inline]
    pub fn is_group_active(&self, g: usize) -> bool {
        self.groups[g]
    }

    #[inline]
    pub fn is_feature_active(&self, j: usize) -> bool {
        self.features[j]
    }

    pub fn groups(&self) -> &[bool] {
        &self.groups
    }

    pub fn features(&self) -> &[bool] {
        &self.features
    }

    pub fn n_active_groups(&self) -> usize {
        self.groups.iter().filter(|&&a| a).count()
    }

    pub fn n_active_features(&self) -> usize {
        self.features.iter().filter(|&&a| a).count()
    }

    pub fn deactivate_group(&mut self, g: usize, partition: &GroupPartition) {
        self.groups[g] = false;
        for &j in partition.group(g) {
            self.features[j] = false;
        }
    }

    pub fn deactivate_feature(&mut self, j: usize) {
        self.features[j] = false;
    }

    /// True if every variable active in `self` is also active in `other`.
    pub fn is_subset_of(&self, other: &ActiveSet) -> bool {
        self.groups.iter().zip(&other.groups).all(|(a, b)| !a || *b)
            && self.features.iter().zip(&other.features).all(|(a, b)| !a || *b)
    }
}

/// `½‖y − Xβ‖² + λΩ(β)`
pub fn primal_value(
    beta: &[f64],
    problem: &Problem,
    penalty: &PenaltyParams,
    partition: &GroupPartition,
    lambda: f64,
) -> Result<f64> {
    problem.check_beta(beta)?;
    let omega = sgl_norm(beta, penalty, partition)?;
    let rho = problem.residual(beta);
    Ok(0.5 * dot(&rho, &rho) + lambda * omega)
}

/// `½‖y‖² − (λ²/2)‖θ − y/λ‖²`
pub fn dual_value(theta: &[f64], y: &[f64], lambda: f64) -> f64 {
    let dist2: f64 = theta
        .iter()
        .zip(y)
        .map(|(t, yi)| {
            let d = t - yi / lambda;
            d * d
        })
        .sum();
    0.5 * dot(y, y) - 0.5 * lambda * lambda * dist2
}

/// Rescales a residual into the dual feasible set:
/// `θ = ρ / max(λ, Ω^D(Xᵀρ))`, where `dual_norm` is `Ω^D(Xᵀρ)`.
pub fn dual_point_from_residual(rho: &[f64], lambda: f64, dual_norm: f64) -> Result<DualPoint> {
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    let s = lambda.max(dual_norm);
    Ok(DualPoint {
        theta: rho.iter().map(|r| r / s).collect(),
        dual_norm_value: dual_norm / s,
    })
}

/// `sqrt(2·max(gap, 0))/λ`
pub fn gap_radius(report: &GapReport) -> f64 {
    (2.0 * report.gap.max(0.0)).sqrt() / report.lambda
}

/// `λ_max = Ω^D(Xᵀy)`: the smallest λ for which β = 0 is optimal.
pub fn lambda_max(problem: &Problem, penalty: &PenaltyParams, partition: &GroupPartition) -> f64 {
    let xty = problem.x().tmatvec(problem.y());
    sgl_dual_norm_argmax(&xty, penalty, partition).0
}

/// Dual point, gap report and the correlations `Xᵀθ` for a primal iterate
/// with residual `rho = y − Xβ` and correlations `xt_rho = Xᵀρ`.
///
/// The gap is evaluated in the Fenchel–Young form
/// `½(1−c)²‖ρ‖² + λ(Ω(β) − βᵀXᵀθ)` with `c = λ/max(λ, Ω^D(Xᵀρ))`, which is
/// algebraically equal to `P(β) − D(θ)` but avoids the cancellation between
/// two values of size `½‖y‖²`.
pub fn gap_from_residual(
    beta: &[f64],
    rho: &[f64],
    xt_rho: &[f64],
    problem: &Problem,
    penalty: &PenaltyParams,
    partition: &GroupPartition,
    lambda: f64,
) -> Result<(DualPoint, GapReport, Vec<f64>)> {
    problem.check_beta(beta)?;
    let dual_norm = sgl_dual_norm_argmax(xt_rho, penalty, partition).0;
    let point = dual_point_from_residual(rho, lambda, dual_norm)?;
    let s = lambda.max(dual_norm);
    let xt_theta: Vec<f64> = xt_rho.iter().map(|v| v / s).collect();

    let omega = sgl_norm_unchecked(beta, penalty, partition);
    let rho2 = dot(rho, rho);
    let c = lambda / s;
    let coupling = dot(beta, &xt_theta);
    let mut gap = 0.5 * (1.0 - c) * (1.0 - c) * rho2 + lambda * (omega - coupling);
    let primal = 0.5 * rho2 + lambda * omega;
    if gap <= REFINE_BELOW * primal.abs() {
        gap = 0.5 * (1.0 - c) * (1.0 - c) * rho2 + lambda * group_slack(beta, rho, s, problem, penalty, partition);
    }

    let dual = dual_value(&point.theta, problem.y(), lambda);
    let report = GapReport {
        primal,
        dual,
        gap,
        lambda,
    };
    Ok((point, report, xt_theta))
}

/// `Ω(β) − βᵀXᵀρ/s` as a sum of per-group pieces
/// `τ‖β_g‖₁ + (1−τ)w_g‖β_g‖ − β_gᵀX_gᵀρ/s`, each nonnegative for a feasible
/// dual point, with `X_jᵀρ` accumulated in double-double for the nonzero
/// `β_j`. Near the optimum the plain difference of the two totals is
/// dominated by rounding in `Xᵀρ`.
fn group_slack(
    beta: &[f64],
    rho: &[f64],
    s: f64,
    problem: &Problem,
    penalty: &PenaltyParams,
    partition: &GroupPartition,
) -> f64 {
    let tau = penalty.tau();
    let (mut total, mut err) = (0.0, 0.0);
    for (g, members) in partition.groups().iter().enumerate() {
        let (mut l1, mut sq) = (0.0, 0.0);
        let (mut coupling, mut coupling_err) = (0.0, 0.0);
        for &j in members {
            let b = beta[j];
            if b == 0.0 {
                continue;
            }
            l1 += b.abs();
            sq += b * b;
            let (t, e) = two_sum(coupling, b * dot_accurate(problem.x().column(j), rho));
            coupling = t;
            coupling_err += e;
        }
        if sq == 0.0 {
            continue;
        }
        let piece = tau * l1 + (1.0 - tau) * penalty.weight(g) * sq.sqrt() - (coupling + coupling_err) / s;
        let (t, e) = two_sum(total, piece);
        total = t;
        err += e;
    }
    total + err
}

/// GAP safe sphere `B(θ, sqrt(2·gap)/λ)`.
pub fn gap_sphere(point: &DualPoint, report: &GapReport) -> SafeSphere {
    SafeSphere {
        center: point.theta.clone(),
        radius: gap_radius(report),
        kind: SphereKind::Gap,
    }
}

/// Upper bound `T_g` on `max_{θ ∈ B(θ_c, r)} ‖ST_τ(X_gᵀθ)‖`, given
/// `X_gᵀθ_c` and `‖X_g‖₂`. The group is screened iff `T_g < (1−τ)w_g`.
pub fn group_test(sphere: &SafeSphere, xg_theta_c: &[f64], tau: f64, spectral_norm_g: f64) -> f64 {
    group_bound(sphere.radius, xg_theta_c, tau, spectral_norm_g)
}

#[inline]
fn group_bound(radius: f64, xg_theta_c: &[f64], tau: f64, spectral_norm_g: f64) -> f64 {
    let top = norm_inf(xg_theta_c);
    let spread = radius * spectral_norm_g;
    if top > tau {
        soft_threshold_norm(xg_theta_c, tau) + spread
    } else {
        (top + spread - tau).max(0.0)
    }
}

/// True (screened) iff `|X_jᵀθ_c| + r‖X_j‖ < τ`.
#[inline]
pub fn feature_test(sphere: &SafeSphere, xj_theta_c: f64, tau: f64, col_norm_j: f64) -> bool {
    xj_theta_c.abs() + sphere.radius * col_norm_j < tau
}

/// Screens the currently active groups and features against `sphere`.
pub fn apply_screening(
    sphere: &SafeSphere,
    problem: &Problem,
    penalty: &PenaltyParams,
    partition: &GroupPartition,
    current: &ActiveSet,
) -> ActiveSet {
    let mut corr = vec![0.0; problem.n_features()];
    for g in (0..partition.n_groups()).filter(|&g| current.is_group_active(g)) {
        for &j in partition.group(g) {
            corr[j] = dot(problem.x().column(j), &sphere.center);
        }
    }
    let mut next = current.clone();
    screen_with_correlations(sphere.radius, &corr, problem, penalty, partition, &mut next);
    next
}

/// Same tests as [`apply_screening`], with `Xᵀθ_c` supplied by the caller
/// (only entries of active groups are read). Returns the number of newly
/// screened features.
pub fn screen_with_correlations(
    radius: f64,
    xt_center: &[f64],
    problem: &Problem,
    penalty: &PenaltyParams,
    partition: &GroupPartition,
    active: &mut ActiveSet,
) -> usize {
    let tau = penalty.tau();
    let before = active.n_active_features();
    let mut buf = Vec::new();
    for g in 0..partition.n_groups() {
        if !active.is_group_active(g) {
            continue;
        }
        let members = partition.group(g);
        buf.clear();
        buf.extend(members.iter().map(|&j| xt_center[j]));
        let t_g = group_bound(radius, &buf, tau, problem.block_norm(g));
        if t_g < penalty.group_threshold(g) {
            active.deactivate_group(g, partition);
            continue;
        }
        for (&j, &c) in members.iter().zip(&buf) {
            if active.is_feature_active(j) && c.abs() + radius * problem.col_norm(j) < tau {
                active.deactivate_feature(j);
            }
        }
    }
    before - active.n_active_features()
}

/// Equicorrelation sets at a (near-)optimal dual point: groups with
/// `‖ST_τ(X_gᵀθ)‖ ≥ (1−τ)w_g − tol` and, inside them, features with
/// `|X_jᵀθ| ≥ τ − tol`.
pub fn equicorrelation_sets(
    theta: &[f64],
    problem: &Problem,
    penalty: &PenaltyParams,
    partition: &GroupPartition,
    tol: f64,
) -> ActiveSet {
    let tau = penalty.tau();
    let corr = problem.x().tmatvec(theta);
    let mut groups = vec![false; partition.n_groups()];
    let mut features = vec![false; partition.n_features()];
    for (g, members) in partition.groups().iter().enumerate() {
        let xg: Vec<f64> = members.iter().map(|&j| corr[j]).collect();
        if soft_threshold_norm(&xg, tau) >= penalty.group_threshold(g) - tol {
            groups[g] = true;
            for &j in members {
                features[j] = corr[j].abs() >= tau - tol;
            }
        }
    }
    ActiveSet { groups, features }
}

/// Half-space normal used by the DST3 sphere: `η = X_{g*} ∇‖·‖_{ε_{g*}}(X_{g*}ᵀ y/λ_max)`,
/// where `g*` is the first group attaining `λ_max`. Every dual feasible `θ`
/// satisfies `ηᵀθ ≤ τ + (1−τ)w_{g*}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dst3Direction {
    pub eta: Vec<f64>,
    pub offset: f64,
    pub group: usize,
}

impl Dst3Direction {
    pub fn new(problem: &Problem, penalty: &PenaltyParams, partition: &GroupPartition) -> Result<Self> {
        let xty = problem.x().tmatvec(problem.y());
        let (lmax, g_star) = sgl_dual_norm_argmax(&xty, penalty, partition);
        if !(lmax > 0.0) {
            return Err(Error::Domain("DST3 needs y with lambda_max > 0".into()));
        }
        let v: Vec<f64> = partition.group(g_star).iter().map(|&j| xty[j] / lmax).collect();
        let grad = epsilon_norm_gradient(&v, penalty.eps(g_star))?;
        let mut eta = vec![0.0; problem.n_samples()];
        for (&j, &gj) in partition.group(g_star).iter().zip(&grad) {
            crate::linalg::axpy(gj, problem.x().column(j), &mut eta);
        }
        if norm2(&eta) == 0.0 {
            return Err(Error::Domain("DST3 normal vector is zero".into()));
        }
        Ok(Self {
            eta,
            offset: penalty.scale(g_star),
            group: g_star,
        })
    }

    /// Projection of `y/λ` onto `{θ : ηᵀθ = offset}`, as `y/λ − coef·η`.
    /// Returns `coef`.
    pub fn projection_coefficient(&self, y: &[f64], lambda: f64) -> f64 {
        (dot(&self.eta, y) / lambda - self.offset) / dot(&self.eta, &self.eta)
    }
}

/// Inputs for the reference (non-GAP) spheres.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceContext<'a> {
    pub y: &'a [f64],
    pub lambda: f64,
    pub lambda_max: f64,
    /// Current dual feasible point; required by dynamic and DST3.
    pub theta_k: Option<&'a [f64]>,
    /// Required by DST3.
    pub dst3: Option<&'a Dst3Direction>,
}

/// Static `B(y/λ, ‖y/λ_max − y/λ‖)`, dynamic `B(y/λ, ‖θ_k − y/λ‖)` or DST3
/// sphere.
pub fn reference_sphere(kind: SphereKind, ctx: &ReferenceContext<'_>) -> Result<SafeSphere> {
    if !(ctx.lambda > 0.0) {
        return Err(Error::invalid(format!("lambda must be positive, got {}", ctx.lambda)));
    }
    let y_over_lambda: Vec<f64> = ctx.y.iter().map(|v| v / ctx.lambda).collect();
    let dist_to = |other: &[f64]| -> f64 {
        y_over_lambda
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    };
    let need_theta = || {
        ctx.theta_k
            .ok_or_else(|| Error::invalid("this sphere needs the current dual point"))
    };
    match kind {
        SphereKind::Static => {
            let scale = 1.0 / ctx.lambda_max - 1.0 / ctx.lambda;
            let radius = scale.abs() * norm2(ctx.y);
            SafeSphere::new(y_over_lambda, radius, kind)
        }
        SphereKind::Dynamic => {
            let theta = need_theta()?;
            let radius = dist_to(theta).sqrt();
            SafeSphere::new(y_over_lambda, radius, kind)
        }
        SphereKind::Dst3 => {
            let theta = need_theta()?;
            let dir = ctx
                .dst3
                .ok_or_else(|| Error::invalid("DST3 sphere needs the half-space normal"))?;
            if ctx.lambda > ctx.lambda_max * (1.0 + 1e-12) {
                return Err(Error::Domain("DST3 sphere requires lambda <= lambda_max".into()));
            }
            let coef = dir.projection_coefficient(ctx.y, ctx.lambda);
            let center: Vec<f64> = y_over_lambda.iter().zip(&dir.eta).map(|(a, e)| a - coef * e).collect();
            let r2 = dist_to(theta) - dist_to(&center);
            SafeSphere::new(center, r2.max(0.0).sqrt(), kind)
        }
        SphereKind::Gap => Err(Error::invalid(
            "the GAP sphere is built from a duality gap, use gap_sphere",
        )),
    }
}

/// Correlations `Xᵀθ_c` for a reference sphere centre `y/λ − coef·η`, built
/// from precomputed `Xᵀy` and `Xᵀη`.
pub(crate) fn reference_center_correlations(xty: &[f64], xt_eta: Option<(&[f64], f64)>, lambda: f64) -> Vec<f64> {
    match xt_eta {
        None => xty.iter().map(|v| v / lambda).collect(),
        Some((xe, coef)) => xty.iter().zip(xe).map(|(a, e)| a / lambda - coef * e).collect(),
    }
}
