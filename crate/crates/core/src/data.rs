//! Synthetic benchmark data, problem files and the Elastic-Net reduction.
//!
//! File formats:
//!
//! * design matrix: headerless CSV, one row per sample, or the binary
//!   `SGLB` format (magic `SGLB`, `n` and `p` as little-endian `u64`, then
//!   `n·p` little-endian `f64` in row-major order);
//! * response: one value per line;
//! * groups: one group per line, space-separated 0-based feature indices,
//!   optionally followed by `|` and the group weight (default `sqrt(n_g)`).

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::GroupPartition;
use crate::linalg::DesignMatrix;
use crate::problem::Problem;

pub const BINARY_MAGIC: &[u8; 4] = b"SGLB";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n: usize,
    pub p: usize,
    pub group_size: usize,
    /// Correlation decay: `corr(X_i, X_j) = rho^|i−j|`.
    pub rho: f64,
    /// Number of active groups.
    pub gamma1: usize,
    /// Number of nonzero coordinates in each active group.
    pub gamma2: usize,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n: 100,
            p: 10_000,
            group_size: 10,
            rho: 0.5,
            gamma1: 10,
            gamma2: 4,
            noise_scale: 0.01,
            seed: 42,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::invalid("n and p must be positive"));
        }
        if self.group_size == 0 || !self.p.is_multiple_of(self.group_size) {
            return Err(Error::invalid(format!(
                "p = {} is not divisible by group size {}",
                self.p, self.group_size
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::invalid(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if self.gamma1 > self.p / self.group_size {
            return Err(Error::invalid(format!(
                "gamma1 = {} exceeds the number of groups {}",
                self.gamma1,
                self.p / self.group_size
            )));
        }
        if self.gamma2 > self.group_size {
            return Err(Error::invalid(format!(
                "gamma2 = {} exceeds the group size {}",
                self.gamma2, self.group_size
            )));
        }
        if !(self.noise_scale >= 0.0) {
            return Err(Error::invalid("noise scale must be nonnegative"));
        }
        Ok(())
    }
}

/// Draws `(X, y, β)` with AR(1)-correlated Gaussian rows, random groups and a
/// sparse `β`, deterministically from `config.seed`.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<(Problem, GroupPartition, Vec<f64>)> {
    config.validate()?;
    let SyntheticConfig { n, p, .. } = *config;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // z_1 = g_1, z_j = ρ z_{j−1} + sqrt(1−ρ²) g_j
    let innovation = (1.0 - config.rho * config.rho).sqrt();
    let mut x = DesignMatrix::zeros(n, p);
    for i in 0..n {
        let mut prev: f64 = rng.sample(StandardNormal);
        x.set(i, 0, prev);
        for j in 1..p {
            let g: f64 = rng.sample(StandardNormal);
            prev = config.rho * prev + innovation * g;
            x.set(i, j, prev);
        }
    }

    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(&mut rng);
    let groups: Vec<Vec<usize>> = order.chunks(config.group_size).map(<[usize]>::to_vec).collect();
    let partition = GroupPartition::with_sqrt_weights(groups, p)?;

    let mut beta = vec![0.0; p];
    let n_groups = partition.n_groups();
    for g in index::sample(&mut rng, n_groups, config.gamma1) {
        let members = partition.group(g);
        for pos in index::sample(&mut rng, members.len(), config.gamma2) {
            let xi: f64 = rng.random_range(-1.0..=1.0);
            let u: f64 = rng.random_range(0.5..=10.0);
            beta[members[pos]] = if xi >= 0.0 { u } else { -u };
        }
    }

    let mut y = x.matvec(&beta);
    for yi in y.iter_mut() {
        let e: f64 = rng.sample(StandardNormal);
        *yi += config.noise_scale * e;
    }
    let problem = Problem::new(x, y, &partition)?;
    Ok((problem, partition, beta))
}

/// Paths written by [`write_problem`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemFiles {
    pub x: PathBuf,
    pub y: PathBuf,
    pub groups: PathBuf,
    pub x_binary: Option<PathBuf>,
}

/// Writes `X.csv`, `y.csv` and `groups.txt` (and `X.sglb` when `binary`) into
/// `dir`, creating it if needed.
pub fn write_problem(dir: &Path, problem: &Problem, partition: &GroupPartition, binary: bool) -> Result<ProblemFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = ProblemFiles {
        x: dir.join("X.csv"),
        y: dir.join("y.csv"),
        groups: dir.join("groups.txt"),
        x_binary: binary.then(|| dir.join("X.sglb")),
    };
    write_matrix_csv(&files.x, problem.x())?;
    write_vector_csv(&files.y, problem.y())?;
    write_groups(&files.groups, partition)?;
    if let Some(path) = &files.x_binary {
        write_matrix_binary(path, problem.x())?;
    }
    Ok(files)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn write_matrix_csv(path: &Path, x: &DesignMatrix) -> Result<()> {
    let mut out = create(path)?;
    let mut line = String::new();
    for i in 0..x.nrows() {
        line.clear();
        for j in 0..x.ncols() {
            if j > 0 {
                line.push(',');
            }
            // `{}` prints the shortest representation that round-trips
            let _ = write!(line, "{}", x.get(i, j));
        }
        line.push('\n');
        out.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_vector_csv(path: &Path, v: &[f64]) -> Result<()> {
    let mut out = create(path)?;
    for value in v {
        writeln!(out, "{value}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_groups(path: &Path, partition: &GroupPartition) -> Result<()> {
    let mut out = create(path)?;
    for (members, w) in partition.groups().iter().zip(partition.weights()) {
        let idx: Vec<String> = members.iter().map(usize::to_string).collect();
        writeln!(out, "{}|{}", idx.join(" "), w).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_matrix_binary(path: &Path, x: &DesignMatrix) -> Result<()> {
    let mut out = create(path)?;
    let mut buf = Vec::with_capacity(20 + 8 * x.nrows() * x.ncols());
    buf.extend_from_slice(BINARY_MAGIC);
    buf.extend_from_slice(&(x.nrows() as u64).to_le_bytes());
    buf.extend_from_slice(&(x.ncols() as u64).to_le_bytes());
    for v in x.to_row_major() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_matrix_binary(path: &Path) -> Result<DesignMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message,
    };
    if bytes.len() < 20 || &bytes[..4] != BINARY_MAGIC {
        return Err(parse_err("missing SGLB header".into()));
    }
    let n = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
    let p = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let expected = n
        .checked_mul(p)
        .and_then(|np| np.checked_mul(8))
        .and_then(|b| b.checked_add(20))
        .ok_or_else(|| parse_err(format!("dimensions {n}x{p} overflow")))?;
    if bytes.len() != expected {
        return Err(parse_err(format!(
            "expected {expected} bytes for a {n}x{p} matrix, found {}",
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes[20..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DesignMatrix::from_row_major(n, p, &values)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_f64(path: &Path, line: usize, token: &str) -> Result<f64> {
    token.trim().parse::<f64>().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("cannot parse {:?} as a number", token.trim()),
    })
}

pub fn read_matrix_csv(path: &Path) -> Result<DesignMatrix> {
    let text = read_text(path)?;
    let mut rows: Vec<f64> = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = k + 1;
        let start = rows.len();
        for token in line.split(',') {
            rows.push(parse_f64(path, lineno, token)?);
        }
        let width = rows.len() - start;
        match ncols {
            None => ncols = Some(width),
            Some(c) if c != width => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    message: format!("ragged row: {width} values, expected {c}"),
                })
            }
            _ => {}
        }
        nrows += 1;
    }
    DesignMatrix::from_row_major(nrows, ncols.unwrap_or(0), &rows)
}

pub fn read_vector_csv(path: &Path) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| parse_f64(path, k + 1, l))
        .collect()
}

/// Reads a groups file for `n_features` features.
pub fn read_groups(path: &Path, n_features: usize) -> Result<GroupPartition> {
    let text = read_text(path)?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut groups = Vec::new();
    let mut weights = Vec::new();
    let mut seen_at = vec![0usize; n_features];
    let mut last_line = 0;
    for (k, line) in text.lines().enumerate() {
        let lineno = k + 1;
        last_line = lineno;
        if line.trim().is_empty() {
            continue;
        }
        let (idx_part, weight_part) = match line.split_once('|') {
            Some((a, b)) => (a, Some(b)),
            None => (line, None),
        };
        let mut members = Vec::new();
        for token in idx_part.split_whitespace() {
            let j: usize = token
                .parse()
                .map_err(|_| parse_err(lineno, format!("cannot parse {token:?} as a feature index")))?;
            if j >= n_features {
                return Err(parse_err(
                    lineno,
                    format!("feature index {j} out of range (p = {n_features})"),
                ));
            }
            if seen_at[j] != 0 {
                return Err(parse_err(
                    lineno,
                    format!("feature {j} already assigned to the group on line {}", seen_at[j]),
                ));
            }
            seen_at[j] = lineno;
            members.push(j);
        }
        if members.is_empty() {
            return Err(parse_err(lineno, "group without features".into()));
        }
        let weight = match weight_part {
            Some(w) => parse_f64(path, lineno, w)?,
            None => (members.len() as f64).sqrt(),
        };
        groups.push(members);
        weights.push(weight);
    }
    if let Some(j) = seen_at.iter().position(|&l| l == 0) {
        return Err(parse_err(last_line, format!("feature {j} is not covered by any group")));
    }
    GroupPartition::new(groups, weights, n_features)
}

/// Reads the design matrix (CSV or `SGLB`, detected from the magic bytes),
/// response and groups.
pub fn load_problem(x_path: &Path, y_path: &Path, groups_path: &Path) -> Result<(Problem, GroupPartition)> {
    let is_binary = fs::read(x_path)
        .map(|b| b.starts_with(BINARY_MAGIC))
        .map_err(|e| Error::io(x_path, e))?;
    let x = if is_binary {
        read_matrix_binary(x_path)?
    } else {
        read_matrix_csv(x_path)?
    };
    let y = read_vector_csv(y_path)?;
    if y.len() != x.nrows() {
        return Err(Error::Parse {
            path: y_path.to_path_buf(),
            line: y.len(),
            message: format!("{} responses for {} rows of X", y.len(), x.nrows()),
        });
    }
    let partition = read_groups(groups_path, x.ncols())?;
    let problem = Problem::new(x, y, &partition)?;
    Ok((problem, partition))
}

/// Appends `sqrt(λ₂)·I_p` below `X` and `p` zeros below `y`, so that the SGL
/// objective on the result equals the Elastic-Net-SGL objective
/// `½‖y − Xβ‖² + λΩ(β) + (λ₂/2)‖β‖²` on the original data.
pub fn elastic_net_augment(problem: &Problem, partition: &GroupPartition, lambda2: f64) -> Result<Problem> {
    if !(lambda2 >= 0.0) {
        return Err(Error::invalid(format!("lambda2 must be nonnegative, got {lambda2}")));
    }
    let p = problem.n_features();
    let mut ridge = DesignMatrix::zeros(p, p);
    let s = lambda2.sqrt();
    for j in 0..p {
        ridge.set(j, j, s);
    }
    let x = problem.x().vstack(&ridge)?;
    let mut y = problem.y().to_vec();
    y.resize(problem.n_samples() + p, 0.0);
    Problem::new(x, y, partition)
}
