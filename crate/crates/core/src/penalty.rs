//! Sparse-Group Lasso norm, its dual norm and the ε-norm machinery behind it.
//!
//! The SGL norm `Ω(β) = τ‖β‖₁ + (1−τ) Σ_g w_g ‖β_g‖` decomposes group-wise into
//! scaled ε-dual-norms, so its dual norm is a max over groups of ε-norms. Every
//! ε-norm evaluation goes through [`lambda_solver`], which finds the unique
//! root `ν ≥ 0` of `Σ_i ST_{να}(x_i)² = (νR)²` by sorting and a closed-form
//! quadratic.

use crate::error::{Error, Result};
use crate::groups::GroupPartition;
use crate::linalg::{norm1, norm2, norm_inf};

/// Relative size under which a negative discriminant is treated as rounding.
const DISCRIMINANT_CLAMP: f64 = 1e-12;
/// Relative size under which `α² j₀ − R²` is treated as exactly zero.
const LINEAR_BRANCH_TOL: f64 = 1e-12;

/// `sign(x)·(|x| − τ)₊`
#[inline]
pub fn soft_threshold_scalar(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// Coordinate-wise soft-thresholding at level `tau ≥ 0`.
pub fn soft_threshold(x: &[f64], tau: f64) -> Vec<f64> {
    x.iter().map(|&v| soft_threshold_scalar(v, tau)).collect()
}

pub fn soft_threshold_in_place(x: &mut [f64], tau: f64) {
    for v in x.iter_mut() {
        *v = soft_threshold_scalar(*v, tau);
    }
}

/// `‖ST_τ(x)‖` without allocating.
pub fn soft_threshold_norm(x: &[f64], tau: f64) -> f64 {
    x.iter()
        .map(|&v| {
            let s = (v.abs() - tau).max(0.0);
            s * s
        })
        .sum::<f64>()
        .sqrt()
}

/// Group soft-thresholding `(1 − τ/‖x‖)₊ x`, with `x = 0` mapped to 0.
pub fn group_soft_threshold(x: &[f64], tau: f64) -> Vec<f64> {
    let mut out = x.to_vec();
    group_soft_threshold_in_place(&mut out, tau);
    out
}

pub fn group_soft_threshold_in_place(x: &mut [f64], tau: f64) {
    let nrm = norm2(x);
    let factor = if nrm > tau { 1.0 - tau / nrm } else { 0.0 };
    if factor == 1.0 {
        return;
    }
    for v in x.iter_mut() {
        *v *= factor;
    }
}

/// Unique `ν ≥ 0` with `Σ_i ST_{να}(x_i)² = (νR)²`.
///
/// Returns `+∞` when `α = R = 0`, and `0` when `x = 0` otherwise.
pub fn lambda_solver(x: &[f64], alpha: f64, r: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&alpha), "alpha = {alpha}");
    debug_assert!(r >= 0.0, "R = {r}");
    if alpha == 0.0 && r == 0.0 {
        return f64::INFINITY;
    }
    if alpha == 0.0 {
        return norm2(x) / r;
    }
    if r == 0.0 {
        return norm_inf(x) / alpha;
    }
    let x_max = norm_inf(x);
    if x_max == 0.0 {
        return 0.0;
    }

    // Only coordinates above α‖x‖∞/(α+R) can survive the threshold at the root.
    let cutoff = alpha * x_max / (alpha + r);
    let mut sorted: Vec<f64> = x.iter().map(|v| v.abs()).filter(|&a| a > cutoff).collect();
    // stable: equal magnitudes keep index order
    sorted.sort_by(|a, b| b.total_cmp(a));

    let (j0, s, s2) = locate_active_count(&sorted, alpha, r);
    solve_quadratic(j0, s, s2, alpha, r)
}

/// Walks the sorted magnitudes and returns `(j₀, S_{j₀}, S⁽²⁾_{j₀})`, where
/// `j₀` is the number of coordinates that remain nonzero after thresholding
/// at the root.
///
/// `a_k = Σ_{j<k} (x_(j)/x_(k) − 1)²` is the value of `Σ ST_α(x/ν)²` at
/// `ν = x_(k)/α`; it is nondecreasing in `k`, `a_1 = 0`, and the root satisfies
/// `R²/α² ∈ [a_{j₀}, a_{j₀+1})`.
fn locate_active_count(sorted: &[f64], alpha: f64, r: f64) -> (usize, f64, f64) {
    let target = (r / alpha) * (r / alpha);
    let n = sorted.len();
    let mut s = 0.0;
    let mut s2 = 0.0;
    for k in 1..=n {
        let xk = sorted[k - 1];
        s += xk;
        s2 += xk * xk;
        if k == n {
            return (k, s, s2);
        }
        let next = sorted[k];
        let a_next = s2 / (next * next) - 2.0 * s / next + k as f64;
        if target < a_next {
            return (k, s, s2);
        }
    }
    unreachable!("the largest coordinate always passes the pre-filter")
}

/// Smallest positive root of `(α²j₀ − R²)ν² − 2αS ν + S⁽²⁾ = 0`.
fn solve_quadratic(j0: usize, s: f64, s2: f64, alpha: f64, r: f64) -> f64 {
    let a2j = alpha * alpha * j0 as f64;
    let r2 = r * r;
    let lead = a2j - r2;
    if lead.abs() < LINEAR_BRANCH_TOL * a2j.max(r2) {
        return s2 / (2.0 * alpha * s);
    }
    let b = alpha * s;
    let mut disc = b * b - s2 * lead;
    if disc < 0.0 {
        debug_assert!(
            -disc <= DISCRIMINANT_CLAMP * b * b * 10.0,
            "negative discriminant {disc}"
        );
        disc = 0.0;
    }
    // (b − √disc)/lead, rationalized to avoid cancellation when lead is small
    s2 / (b + disc.sqrt())
}

/// ε-norm: unique `ν ≥ 0` with `Σ (|x_i| − (1−ε)ν)₊² = (εν)²`.
pub fn epsilon_norm(x: &[f64], eps: f64) -> f64 {
    lambda_solver(x, 1.0 - eps, eps)
}

/// Dual of the ε-norm, `ε‖x‖ + (1−ε)‖x‖₁`.
pub fn epsilon_dual_norm(x: &[f64], eps: f64) -> f64 {
    eps * norm2(x) + (1.0 - eps) * norm1(x)
}

/// Splits `ξ` into `ξ^ε = ST_{(1−ε)‖ξ‖_ε}(ξ)` and `ξ^{1−ε} = ξ − ξ^ε`.
///
/// `‖ξ^ε‖ = ε‖ξ‖_ε` and `‖ξ^{1−ε}‖_∞ = (1−ε)‖ξ‖_ε`.
pub fn epsilon_decomposition(xi: &[f64], eps: f64) -> (Vec<f64>, Vec<f64>) {
    let nu = epsilon_norm(xi, eps);
    let xi_eps = soft_threshold(xi, (1.0 - eps) * nu);
    let rest = xi.iter().zip(&xi_eps).map(|(a, b)| a - b).collect();
    (xi_eps, rest)
}

/// Gradient of the ε-norm at `ξ ≠ 0`, `ξ^ε / ‖ξ^ε‖_ε^D`.
///
/// At `ε = 0` the ε-norm is `‖·‖_∞`, `ξ^ε` vanishes and the norm is not
/// differentiable at ties; the subgradient `sign(ξ_i) e_i` at the first
/// maximal coordinate is returned instead.
pub fn epsilon_norm_gradient(xi: &[f64], eps: f64) -> Result<Vec<f64>> {
    if xi.iter().all(|&v| v == 0.0) {
        return Err(Error::Domain("the ε-norm gradient is undefined at the origin".into()));
    }
    let (xi_eps, _) = epsilon_decomposition(xi, eps);
    let d = epsilon_dual_norm(&xi_eps, eps);
    if d > 0.0 {
        return Ok(xi_eps.iter().map(|v| v / d).collect());
    }
    let top = norm_inf(xi);
    let i = xi.iter().position(|v| v.abs() == top).unwrap_or(0);
    let mut g = vec![0.0; xi.len()];
    g[i] = xi[i].signum();
    Ok(g)
}

/// ℓ1 mixing weight and per-group weights of the SGL norm, together with the
/// derived per-group `ε_g` and `τ + (1−τ)w_g`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyParams {
    tau: f64,
    weights: Vec<f64>,
    eps: Vec<f64>,
    scale: Vec<f64>,
}

impl PenaltyParams {
    pub fn new(tau: f64, weights: Vec<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::invalid(format!("tau must lie in [0, 1], got {tau}")));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::invalid(format!("group weights must be nonnegative, got {w}")));
        }
        if tau == 0.0 && weights.contains(&0.0) {
            return Err(Error::invalid(
                "tau = 0 with a zero group weight does not define a norm",
            ));
        }
        let scale: Vec<f64> = weights.iter().map(|w| tau + (1.0 - tau) * w).collect();
        let eps = weights
            .iter()
            .zip(&scale)
            .map(|(w, s)| ((1.0 - tau) * w / s).clamp(0.0, 1.0))
            .collect();
        Ok(Self {
            tau,
            weights,
            eps,
            scale,
        })
    }

    /// Uses the weights stored on `partition`.
    pub fn for_partition(tau: f64, partition: &GroupPartition) -> Result<Self> {
        Self::new(tau, partition.weights().to_vec())
    }

    #[inline]
    pub fn tau(&self) -> f64 {
        self.tau
    }

    #[inline]
    pub fn weight(&self, g: usize) -> f64 {
        self.weights[g]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_groups(&self) -> usize {
        self.weights.len()
    }

    /// `ε_g = (1−τ)w_g / (τ + (1−τ)w_g)`
    #[inline]
    pub fn eps(&self, g: usize) -> f64 {
        self.eps[g]
    }

    /// `τ + (1−τ)w_g`
    #[inline]
    pub fn scale(&self, g: usize) -> f64 {
        self.scale[g]
    }

    /// `(1−τ)w_g`, the group-level screening threshold.
    #[inline]
    pub fn group_threshold(&self, g: usize) -> f64 {
        (1.0 - self.tau) * self.weights[g]
    }

    pub fn epsilon_params(&self, g: usize) -> EpsilonParams {
        EpsilonParams {
            eps: self.eps[g],
            scale: self.scale[g],
        }
    }

    /// Contribution `Λ(ξ_g, 1−ε_g, ε_g)/(τ+(1−τ)w_g)` of one group to the
    /// dual norm.
    pub fn group_dual_norm(&self, g: usize, xi_g: &[f64]) -> f64 {
        if xi_g.is_empty() {
            return 0.0;
        }
        let eps = self.eps[g];
        lambda_solver(xi_g, 1.0 - eps, eps) / self.scale[g]
    }

    fn check(&self, partition: &GroupPartition, len: usize) -> Result<()> {
        if self.weights.len() != partition.n_groups() {
            return Err(Error::DimensionMismatch {
                what: "number of penalty weights",
                expected: partition.n_groups(),
                got: self.weights.len(),
            });
        }
        if len != partition.n_features() {
            return Err(Error::DimensionMismatch {
                what: "vector length",
                expected: partition.n_features(),
                got: len,
            });
        }
        Ok(())
    }
}

/// Per-group ε-norm parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonParams {
    pub eps: f64,
    pub scale: f64,
}

/// `τ‖β‖₁ + (1−τ) Σ_g w_g ‖β_g‖`
pub fn sgl_norm(beta: &[f64], penalty: &PenaltyParams, partition: &GroupPartition) -> Result<f64> {
    penalty.check(partition, beta.len())?;
    Ok(sgl_norm_unchecked(beta, penalty, partition))
}

pub(crate) fn sgl_norm_unchecked(beta: &[f64], penalty: &PenaltyParams, partition: &GroupPartition) -> f64 {
    let tau = penalty.tau();
    let mut l1 = 0.0;
    let mut group_sum = 0.0;
    for (g, members) in partition.groups().iter().enumerate() {
        let mut sq = 0.0;
        for &j in members {
            l1 += beta[j].abs();
            sq += beta[j] * beta[j];
        }
        if sq > 0.0 {
            group_sum += penalty.weight(g) * sq.sqrt();
        }
    }
    tau * l1 + (1.0 - tau) * group_sum
}

/// `Ω^D(ξ) = max_g Λ(ξ_g, 1−ε_g, ε_g)/(τ+(1−τ)w_g)`
pub fn sgl_dual_norm(xi: &[f64], penalty: &PenaltyParams, partition: &GroupPartition) -> Result<f64> {
    penalty.check(partition, xi.len())?;
    Ok(sgl_dual_norm_argmax(xi, penalty, partition).0)
}

/// Dual norm together with the first group attaining the maximum.
pub(crate) fn sgl_dual_norm_argmax(xi: &[f64], penalty: &PenaltyParams, partition: &GroupPartition) -> (f64, usize) {
    // ‖x‖∞ ≤ ‖x‖_ε ≤ min(‖x‖∞/(1−ε), ‖x‖/ε): groups whose upper bound falls
    // below the best lower bound cannot attain the max and skip the solver.
    let n_groups = partition.n_groups();
    let mut upper = Vec::with_capacity(n_groups);
    let mut floor = 0.0_f64;
    for g in 0..n_groups {
        let (mut linf, mut sq) = (0.0_f64, 0.0);
        for &j in partition.group(g) {
            linf = linf.max(xi[j].abs());
            sq += xi[j] * xi[j];
        }
        let eps = penalty.eps(g);
        let scale = penalty.scale(g);
        let by_inf = if eps < 1.0 { linf / (1.0 - eps) } else { f64::INFINITY };
        let by_two = if eps > 0.0 { sq.sqrt() / eps } else { f64::INFINITY };
        upper.push(by_inf.min(by_two) / scale);
        floor = floor.max(linf / scale);
    }
    let cutoff = floor * (1.0 - 1e-12);
    let mut buf = Vec::new();
    let mut best = (0.0, 0);
    for (g, &bound) in upper.iter().enumerate() {
        if bound < cutoff {
            continue;
        }
        buf.clear();
        buf.extend(partition.group(g).iter().map(|&j| xi[j]));
        let v = penalty.group_dual_norm(g, &buf);
        if v > best.0 {
            best = (v, g);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Bisection on `ν ↦ ‖ST_{να}(x)‖ − νR`, decreasing on `(0, ‖x‖/R]`.
    fn bisection_lambda(x: &[f64], alpha: f64, r: f64) -> f64 {
        let f = |nu: f64| soft_threshold_norm(x, nu * alpha) - nu * r;
        let (mut lo, mut hi) = (0.0, norm2(x) / r);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(&[1.0, -0.3, 2.0], 0.5), vec![0.5, 0.0, 1.5]);
        assert_eq!(soft_threshold(&[1.0, -0.3], 0.0), vec![1.0, -0.3]);
        assert_eq!(soft_threshold(&[0.2, -0.3], 0.3), vec![0.0, 0.0]);
    }

    #[test]
    fn group_soft_threshold_examples() {
        let v = group_soft_threshold(&[3.0, 4.0], 1.0);
        assert!((v[0] - 2.4).abs() < 1e-15 && (v[1] - 3.2).abs() < 1e-15);
        assert_eq!(group_soft_threshold(&[3.0, 4.0], 6.0), vec![0.0, 0.0]);
        assert_eq!(group_soft_threshold(&[3.0, 4.0], 0.0), vec![3.0, 4.0]);
        assert_eq!(group_soft_threshold(&[0.0, 0.0], 0.0), vec![0.0, 0.0]);
    }

    #[test]
    fn lambda_closed_form_branches() {
        assert_eq!(lambda_solver(&[3.0, 4.0], 0.0, 2.0), 2.5);
        assert_eq!(lambda_solver(&[3.0, 4.0], 0.5, 0.0), 8.0);
        assert!(lambda_solver(&[3.0, 4.0], 0.0, 0.0).is_infinite());
        assert!((lambda_solver(&[2.0], 0.6, 0.4) - 2.0).abs() < 1e-14);
        assert_eq!(lambda_solver(&[0.0, 0.0], 0.3, 0.7), 0.0);
        assert_eq!(lambda_solver(&[], 0.3, 0.7), 0.0);
    }

    #[test]
    fn lambda_linear_branch() {
        // α²j₀ = R² with j₀ = 4: four equal magnitudes all stay active
        let x = [1.0, -1.0, 1.0, 1.0];
        let nu = lambda_solver(&x, 0.5, 1.0);
        assert!(close(nu, bisection_lambda(&x, 0.5, 1.0), 1e-12), "{nu}");
    }

    #[test]
    fn epsilon_norm_limits() {
        assert!((epsilon_norm(&[3.0, 4.0], 1.0) - 5.0).abs() < 1e-14);
        assert!((epsilon_norm(&[3.0, 4.0], 0.0) - 4.0).abs() < 1e-14);
        assert_eq!(epsilon_dual_norm(&[3.0, 4.0], 0.5), 6.0);
        assert_eq!(epsilon_dual_norm(&[3.0, 4.0], 1.0), 5.0);
    }

    #[test]
    fn decomposition_extremes() {
        let xi = [1.0, -2.0, 0.5];
        let (a, b) = epsilon_decomposition(&xi, 1.0);
        assert_eq!(a, xi.to_vec());
        assert!(b.iter().all(|&v| v == 0.0));
        let (a, b) = epsilon_decomposition(&xi, 0.0);
        assert!(a.iter().all(|&v| v == 0.0));
        assert_eq!(b, xi.to_vec());
    }

    #[test]
    fn gradient_examples() {
        let g = epsilon_norm_gradient(&[3.0, 4.0], 1.0).unwrap();
        assert!((g[0] - 0.6).abs() < 1e-14 && (g[1] - 0.8).abs() < 1e-14);
        assert!(epsilon_norm_gradient(&[0.0, 0.0], 0.5).is_err());
        assert_eq!(epsilon_norm_gradient(&[1.0, -3.0], 0.0).unwrap(), vec![0.0, -1.0]);
    }

    #[test]
    fn penalty_validation() {
        assert!(PenaltyParams::new(1.5, vec![1.0]).is_err());
        assert!(PenaltyParams::new(0.5, vec![-1.0]).is_err());
        assert!(PenaltyParams::new(0.0, vec![1.0, 0.0]).is_err());
        let p = PenaltyParams::new(0.2, vec![0.0, 2.0]).unwrap();
        assert_eq!(p.eps(0), 0.0);
        assert!(p.scale(0) > 0.0);
        let p = PenaltyParams::new(0.0, vec![2.0]).unwrap();
        assert_eq!(p.eps(0), 1.0);
        let p = PenaltyParams::new(1.0, vec![2.0]).unwrap();
        assert_eq!(p.eps(0), 0.0);
    }

    #[test]
    fn sgl_norm_examples() {
        let part = GroupPartition::new(vec![vec![0, 1], vec![2]], vec![1.0, 1.0], 3).unwrap();
        let beta = [3.0, 4.0, 0.0];
        let pen = PenaltyParams::for_partition(0.5, &part).unwrap();
        assert!((sgl_norm(&beta, &pen, &part).unwrap() - 6.0).abs() < 1e-14);
        let lasso = PenaltyParams::for_partition(1.0, &part).unwrap();
        assert_eq!(sgl_norm(&[1.0, -2.0, 3.0], &lasso, &part).unwrap(), 6.0);
        let glasso = PenaltyParams::for_partition(0.0, &part).unwrap();
        assert_eq!(sgl_norm(&beta, &glasso, &part).unwrap(), 5.0);
        assert!(sgl_norm(&[1.0], &pen, &part).is_err());
    }

    #[test]
    fn dual_norm_special_cases() {
        let part = GroupPartition::new(vec![vec![0, 1], vec![2]], vec![1.0, 1.0], 3).unwrap();
        let xi = [3.0, -4.0, 4.5];
        let lasso = PenaltyParams::for_partition(1.0, &part).unwrap();
        assert!((sgl_dual_norm(&xi, &lasso, &part).unwrap() - 4.5).abs() < 1e-14);
        let glasso = PenaltyParams::for_partition(0.0, &part).unwrap();
        assert!((sgl_dual_norm(&xi, &glasso, &part).unwrap() - 5.0).abs() < 1e-14);
        assert_eq!(sgl_dual_norm(&[0.0; 3], &glasso, &part).unwrap(), 0.0);
    }

    fn vec_strategy(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 1..max_len)
    }

    proptest! {
        #[test]
        fn lambda_matches_bisection(x in vec_strategy(20), alpha in 0.01f64..1.0, r in 0.01f64..2.0) {
            prop_assume!(norm_inf(&x) > 1e-6);
            let nu = lambda_solver(&x, alpha, r);
            let oracle = bisection_lambda(&x, alpha, r);
            prop_assert!(close(nu, oracle, 1e-10), "{} vs {}", nu, oracle);
        }

        #[test]
        fn lambda_is_homogeneous(x in vec_strategy(15), alpha in 0.01f64..1.0, r in 0.01f64..2.0, c in 0.01f64..100.0) {
            prop_assume!(norm_inf(&x) > 1e-6);
            let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
            prop_assert!(close(lambda_solver(&scaled, alpha, r), c * lambda_solver(&x, alpha, r), 1e-12));
        }

        #[test]
        fn lambda_root_localization(x in vec_strategy(15), alpha in 0.05f64..1.0, r in 0.05f64..2.0) {
            prop_assume!(norm_inf(&x) > 1e-6);
            let nu = lambda_solver(&x, alpha, r);
            let mut sorted: Vec<f64> = x.iter().map(|v| v.abs()).collect();
            sorted.sort_by(|a, b| b.total_cmp(a));
            // j₀ = number of magnitudes strictly above να
            let j0 = sorted.iter().filter(|&&a| a > nu * alpha * (1.0 + 1e-12)).count();
            prop_assert!(j0 >= 1);
            let upper = sorted[j0 - 1] / alpha;
            let lower = sorted.get(j0).copied().unwrap_or(0.0) / alpha;
            prop_assert!(nu <= upper * (1.0 + 1e-12) && nu >= lower * (1.0 - 1e-12));
        }

        #[test]
        fn soft_threshold_is_nonexpansive(a in vec_strategy(10), shift in vec_strategy(10), tau in 0.0f64..5.0) {
            let n = a.len().min(shift.len());
            let b: Vec<f64> = a[..n].iter().zip(&shift[..n]).map(|(x, s)| x + s).collect();
            let d_in = norm2(&shift[..n]);
            let sa = soft_threshold(&a[..n], tau);
            let sb = soft_threshold(&b, tau);
            let d_out = sa.iter().zip(&sb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            prop_assert!(d_out <= d_in + 1e-12);
        }

        #[test]
        fn decomposition_identities(xi in vec_strategy(12), eps in 0.0f64..=1.0) {
            prop_assume!(norm_inf(&xi) > 1e-6);
            let nu = epsilon_norm(&xi, eps);
            let (a, b) = epsilon_decomposition(&xi, eps);
            for ((x, u), v) in xi.iter().zip(&a).zip(&b) {
                prop_assert!((u + v - x).abs() <= 4.0 * f64::EPSILON * x.abs());
            }
            prop_assert!((norm2(&a) - eps * nu).abs() <= 1e-10 * nu);
            prop_assert!((norm_inf(&b) - (1.0 - eps) * nu).abs() <= 1e-10 * nu);
        }
    }
}
