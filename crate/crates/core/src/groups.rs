use crate::error::{Error, Result};

/// Disjoint groups covering the feature indices `0..p`, with one nonnegative
/// weight per group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPartition {
    groups: Vec<Vec<usize>>,
    weights: Vec<f64>,
    group_of: Vec<usize>,
}

impl GroupPartition {
    /// Builds a partition and checks that every index in `0..n_features`
    /// appears exactly once.
    pub fn new(groups: Vec<Vec<usize>>, weights: Vec<f64>, n_features: usize) -> Result<Self> {
        if weights.len() != groups.len() {
            return Err(Error::DimensionMismatch {
                what: "number of group weights",
                expected: groups.len(),
                got: weights.len(),
            });
        }
        if let Some((g, w)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidPartition(format!("group {g} has invalid weight {w}")));
        }
        let mut group_of = vec![usize::MAX; n_features];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::InvalidPartition(format!("group {g} is empty")));
            }
            for &j in members {
                if j >= n_features {
                    return Err(Error::InvalidPartition(format!(
                        "group {g} references feature {j} but there are only {n_features} features"
                    )));
                }
                if group_of[j] != usize::MAX {
                    return Err(Error::InvalidPartition(format!(
                        "feature {j} appears in groups {} and {g}",
                        group_of[j]
                    )));
                }
                group_of[j] = g;
            }
        }
        if let Some(j) = group_of.iter().position(|&g| g == usize::MAX) {
            return Err(Error::InvalidPartition(format!(
                "feature {j} is not covered by any group"
            )));
        }
        Ok(Self {
            groups,
            weights,
            group_of,
        })
    }

    /// Groups with the default weights `w_g = sqrt(n_g)`.
    pub fn with_sqrt_weights(groups: Vec<Vec<usize>>, n_features: usize) -> Result<Self> {
        let weights = groups.iter().map(|g| (g.len() as f64).sqrt()).collect();
        Self::new(groups, weights, n_features)
    }

    /// Contiguous groups of equal size `group_size` over `0..n_features`.
    pub fn contiguous(n_features: usize, group_size: usize) -> Result<Self> {
        if group_size == 0 || !n_features.is_multiple_of(group_size) {
            return Err(Error::InvalidPartition(format!(
                "{n_features} features cannot be cut into groups of {group_size}"
            )));
        }
        let groups = (0..n_features / group_size)
            .map(|g| (g * group_size..(g + 1) * group_size).collect())
            .collect();
        Self::with_sqrt_weights(groups, n_features)
    }

    #[inline]
    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    #[inline]
    pub fn n_features(&self) -> usize {
        self.group_of.len()
    }

    #[inline]
    pub fn group(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    #[inline]
    pub fn weight(&self, g: usize) -> f64 {
        self.weights[g]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn group_of(&self, feature: usize) -> usize {
        self.group_of[feature]
    }

    /// Copies the coordinates of group `g` out of a length-p vector.
    pub fn gather(&self, g: usize, v: &[f64]) -> Vec<f64> {
        self.groups[g].iter().map(|&j| v[j]).collect()
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.groups.clone(), weights, self.n_features())
    }
}
