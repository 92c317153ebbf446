//! Independent reference computations shared by the integration tests. Only
//! plain slices and textbook formulas here; nothing calls into the solver's
//! internals.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sgl_core::{
    generate_synthetic, solve, DesignMatrix, GroupPartition, PenaltyParams, Problem, Rule, SolveResult, SolverConfig,
    SyntheticConfig,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn st(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Bisection for the root of `ν ↦ Σ ST_{να}(x_i)² − (νR)²`, which is
/// decreasing in ν. Assumes `R > 0`.
pub fn bisect_lambda(x: &[f64], alpha: f64, r: f64) -> f64 {
    let f = |nu: f64| x.iter().map(|&v| st(v, nu * alpha).powi(2)).sum::<f64>() - (nu * r).powi(2);
    let (mut lo, mut hi) = (0.0, norm(x) / r);
    if hi == 0.0 {
        return 0.0;
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest `s` with `‖ST_{τs}(ξ_g)‖ ≤ (1−τ) w_g s` for every group, found
/// by bisection on that membership predicate.
pub fn dual_norm_bisect(xi: &[f64], tau: f64, weights: &[f64], groups: &[Vec<usize>]) -> f64 {
    let mut best = 0.0_f64;
    for (g, members) in groups.iter().enumerate() {
        let v: Vec<f64> = members.iter().map(|&j| xi[j]).collect();
        let inside = |s: f64| {
            let nrm = v.iter().map(|&a| st(a, tau * s).powi(2)).sum::<f64>().sqrt();
            nrm <= (1.0 - tau) * weights[g] * s
        };
        let linf = v.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
        let mut hi = if tau > 0.0 { linf / tau } else { norm(&v) / weights[g] };
        if (1.0 - tau) * weights[g] > 0.0 {
            hi = hi.min(norm(&v) / ((1.0 - tau) * weights[g]));
        }
        let mut lo = 0.0;
        if hi == 0.0 {
            continue;
        }
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if inside(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        best = best.max(hi);
    }
    best
}

pub fn sgl_norm_direct(beta: &[f64], tau: f64, weights: &[f64], groups: &[Vec<usize>]) -> f64 {
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let grp: f64 = groups
        .iter()
        .zip(weights)
        .map(|(m, w)| w * m.iter().map(|&j| beta[j] * beta[j]).sum::<f64>().sqrt())
        .sum();
    tau * l1 + (1.0 - tau) * grp
}

/// Dense column-major helper independent of `DesignMatrix`.
pub struct Dense {
    pub n: usize,
    pub p: usize,
    pub cols: Vec<Vec<f64>>,
}

impl Dense {
    pub fn from_problem(problem: &Problem) -> Self {
        let x = problem.x();
        Self {
            n: x.nrows(),
            p: x.ncols(),
            cols: (0..x.ncols()).map(|j| x.column(j).to_vec()).collect(),
        }
    }

    pub fn mul(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (c, &b) in self.cols.iter().zip(beta) {
            for (o, v) in out.iter_mut().zip(c) {
                *o += b * v;
            }
        }
        out
    }

    pub fn tmul(&self, v: &[f64]) -> Vec<f64> {
        self.cols.iter().map(|c| dot(c, v)).collect()
    }

    /// Largest eigenvalue of `XᵀX` by plain power iteration.
    pub fn lipschitz(&self) -> f64 {
        let mut v = vec![1.0; self.p];
        let mut lam = 0.0;
        for _ in 0..5000 {
            let w = self.tmul(&self.mul(&v));
            let nw = norm(&w);
            if nw == 0.0 {
                return 0.0;
            }
            v = w.iter().map(|a| a / nw).collect();
            if (nw - lam).abs() <= 1e-13 * nw {
                return nw;
            }
            lam = nw;
        }
        lam
    }
}

pub fn primal_direct(
    x: &Dense,
    y: &[f64],
    beta: &[f64],
    lambda: f64,
    tau: f64,
    weights: &[f64],
    groups: &[Vec<usize>],
) -> f64 {
    let xb = x.mul(beta);
    let r2: f64 = y.iter().zip(&xb).map(|(a, b)| (a - b).powi(2)).sum();
    0.5 * r2 + lambda * sgl_norm_direct(beta, tau, weights, groups)
}

pub fn dual_direct(theta: &[f64], y: &[f64], lambda: f64) -> f64 {
    let y2 = dot(y, y);
    let d2: f64 = theta.iter().zip(y).map(|(t, v)| (t - v / lambda).powi(2)).sum();
    0.5 * y2 - 0.5 * lambda * lambda * d2
}

/// Prox of `s·(τ‖·‖₁ + (1−τ)Σ w_g‖·_g‖)`.
pub fn prox_sgl(z: &[f64], s: f64, tau: f64, weights: &[f64], groups: &[Vec<usize>]) -> Vec<f64> {
    let mut out = vec![0.0; z.len()];
    for (g, members) in groups.iter().enumerate() {
        let u: Vec<f64> = members.iter().map(|&j| st(z[j], s * tau)).collect();
        let nu = norm(&u);
        let t = s * (1.0 - tau) * weights[g];
        if nu > t {
            for (&j, v) in members.iter().zip(&u) {
                out[j] = v * (1.0 - t / nu);
            }
        }
    }
    out
}

/// Accelerated proximal gradient for
/// `½‖y − Xβ‖² + (ridge/2)‖β‖² + λ Ω(β)`, with restarts, run until the
/// fixed-point residual stalls.
#[allow(clippy::too_many_arguments)]
pub fn fista(
    x: &Dense,
    y: &[f64],
    lambda: f64,
    ridge: f64,
    tau: f64,
    weights: &[f64],
    groups: &[Vec<usize>],
    iters: usize,
) -> Vec<f64> {
    let step = 1.0 / (x.lipschitz() + ridge);
    let p = x.p;
    let mut beta = vec![0.0; p];
    let mut z = beta.clone();
    let mut t = 1.0_f64;
    let obj = |b: &[f64]| primal_direct(x, y, b, lambda, tau, weights, groups) + 0.5 * ridge * dot(b, b);
    let mut last = obj(&beta);
    for _ in 0..iters {
        let r: Vec<f64> = y.iter().zip(x.mul(&z)).map(|(a, b)| a - b).collect();
        let grad: Vec<f64> = x.tmul(&r).iter().zip(&z).map(|(g, zi)| -g + ridge * zi).collect();
        let fwd: Vec<f64> = z.iter().zip(&grad).map(|(zi, g)| zi - step * g).collect();
        let next = prox_sgl(&fwd, step * lambda, tau, weights, groups);
        let cur = obj(&next);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if cur > last {
            // objective went up: restart momentum
            t = 1.0;
            z = beta.clone();
            continue;
        }
        let mom = (t - 1.0) / t_next;
        z = next.iter().zip(&beta).map(|(n, b)| n + mom * (n - b)).collect();
        let moved: f64 = next.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        beta = next;
        last = cur;
        t = t_next;
        if moved == 0.0 {
            break;
        }
    }
    beta
}

/// Worst violation of `Xᵀ(y − Xβ)/λ ∈ ∂Ω(β)`, group by group.
pub fn kkt_residual(
    x: &Dense,
    y: &[f64],
    beta: &[f64],
    lambda: f64,
    tau: f64,
    weights: &[f64],
    groups: &[Vec<usize>],
) -> f64 {
    let r: Vec<f64> = y.iter().zip(x.mul(beta)).map(|(a, b)| a - b).collect();
    let c: Vec<f64> = x.tmul(&r).iter().map(|v| v / lambda).collect();
    let mut worst = 0.0_f64;
    for (g, members) in groups.iter().enumerate() {
        let bg: Vec<f64> = members.iter().map(|&j| beta[j]).collect();
        let nb = norm(&bg);
        let gw = (1.0 - tau) * weights[g];
        if nb == 0.0 {
            let s = members.iter().map(|&j| st(c[j], tau).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(s - gw);
        } else {
            for (&j, &b) in members.iter().zip(&bg) {
                let v = if b != 0.0 {
                    (c[j] - tau * b.signum() - gw * b / nb).abs()
                } else {
                    // |c_j| ≤ τ must hold for the zero coordinates of an active group
                    (c[j].abs() - tau).max(0.0)
                };
                worst = worst.max(v);
            }
        }
    }
    worst
}

/// Uniform sample in the ball `B(center, radius)`.
pub fn sample_in_ball<R: Rng>(rng: &mut R, center: &[f64], radius: f64) -> Vec<f64> {
    let d = center.len();
    let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let nd = norm(&dir);
    let u: f64 = rng.random::<f64>().powf(1.0 / d as f64);
    center.iter().zip(&dir).map(|(c, v)| c + radius * u * v / nd).collect()
}

/// The 50×200, 40-group instance family used by the safety checks.
pub fn small_config(seed: u64) -> SyntheticConfig {
    SyntheticConfig {
        n: 50,
        p: 200,
        group_size: 5,
        rho: 0.5,
        gamma1: 4,
        gamma2: 3,
        noise_scale: 0.01,
        seed,
    }
}

/// A `small_config` draw at the generator's own scale.
pub fn raw_instance(seed: u64) -> (Problem, GroupPartition) {
    let (problem, partition, _) = generate_synthetic(&small_config(seed)).unwrap();
    (problem, partition)
}

/// A `small_config` draw with `y` rescaled to unit norm, so that a gap of
/// 1e-12 is well above the rounding level of the objective.
pub fn small_instance(seed: u64) -> (Problem, GroupPartition) {
    let (problem, partition) = raw_instance(seed);
    let scale = norm(problem.y());
    let y = problem.y().iter().map(|v| v / scale).collect();
    (Problem::new(problem.x().clone(), y, &partition).unwrap(), partition)
}

/// Unscreened solve to a gap of 1e-12.
pub fn reference_solve(
    problem: &Problem,
    penalty: &PenaltyParams,
    partition: &GroupPartition,
    lambda: f64,
) -> SolveResult {
    let config = SolverConfig {
        tolerance: 1e-12,
        max_passes: 2_000_000,
        gap_check_every: 10,
        rule: Rule::None,
    };
    let zeros = vec![0.0; problem.n_features()];
    let res = solve(problem, penalty, partition, lambda, &zeros, &config).unwrap();
    assert!(
        res.converged,
        "reference solve at λ = {lambda} stopped at gap {:e}",
        res.final_gap.gap
    );
    res
}

pub fn groups_of(partition: &GroupPartition) -> Vec<Vec<usize>> {
    partition.groups().to_vec()
}

pub fn random_vec<R: Rng>(rng: &mut R, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// `n × p` matrix with orthonormal columns, by Gram–Schmidt on Gaussian draws.
pub fn orthonormal_columns(n: usize, p: usize, seed: u64) -> DesignMatrix {
    let mut r = rng(seed);
    let mut cols: Vec<Vec<f64>> = Vec::new();
    while cols.len() < p {
        let mut v = random_vec(&mut r, n, 1.0);
        for c in &cols {
            let d = dot(c, &v);
            for (a, b) in v.iter_mut().zip(c) {
                *a -= d * b;
            }
        }
        let nv = norm(&v);
        cols.push(v.iter().map(|a| a / nv).collect());
    }
    DesignMatrix::from_col_major(n, p, cols.concat()).unwrap()
}
