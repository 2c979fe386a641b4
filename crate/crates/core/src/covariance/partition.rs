use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Partition of `L` levels into `G` contiguous groups.
///
/// Group `g` (0-based) holds levels `offset(g) .. offset(g) + size(g)`, so the first group
/// is `{0, .., n_1 - 1}`, the second starts at `n_1`, and so on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct GroupPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    level_count: usize,
}

impl GroupPartition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return domain("a partition needs at least one group");
        }
        if let Some(g) = sizes.iter().position(|&n| n == 0) {
            return domain(format!("group {} is empty", g + 1));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &n in &sizes {
            offsets.push(acc);
            acc += n;
        }
        Ok(Self { sizes, offsets, level_count: acc })
    }

    /// One group holding all `level_count` levels.
    pub fn single(level_count: usize) -> Result<Self> {
        Self::new(vec![level_count])
    }

    /// Every level in its own group.
    pub fn singletons(level_count: usize) -> Result<Self> {
        Self::new(vec![1; level_count])
    }

    pub fn level_count(&self) -> usize {
        self.level_count
    }

    pub fn group_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, g: usize) -> usize {
        self.sizes[g]
    }

    pub fn offset(&self, g: usize) -> usize {
        self.offsets[g]
    }

    pub fn range(&self, g: usize) -> Range<usize> {
        self.offsets[g]..self.offsets[g] + self.sizes[g]
    }

    /// Group index of a 0-based level.
    pub fn group_of(&self, level: usize) -> usize {
        debug_assert!(level < self.level_count);
        match self.offsets.binary_search(&level) {
            Ok(g) => g,
            Err(g) => g - 1,
        }
    }

    /// The `L×G` membership matrix `X` with `X[l, g] = 1` iff level `l` is in group `g`.
    pub fn membership(&self) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(self.level_count, self.group_count());
        for g in 0..self.group_count() {
            for l in self.range(g) {
                x[(l, g)] = 1.0;
            }
        }
        x
    }
}

impl TryFrom<Vec<usize>> for GroupPartition {
    type Error = crate::Error;

    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        Self::new(sizes)
    }
}

impl From<GroupPartition> for Vec<usize> {
    fn from(p: GroupPartition) -> Self {
        p.sizes
    }
}

/// Maps an arbitrary level→group assignment onto the contiguous canonical order used by
/// [`GroupPartition`], and back.
///
/// Levels are stably sorted by group id, so within a group the original order is kept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelRelabeling {
    /// `to_canonical[original_level] = canonical_level` (both 0-based).
    to_canonical: Vec<usize>,
    /// `to_original[canonical_level] = original_level`.
    to_original: Vec<usize>,
}

impl LevelRelabeling {
    /// Builds the relabeling from `group_of_level[l]` (0-based group ids). Group ids must
    /// cover `0..G` without gaps.
    pub fn from_assignment(group_of_level: &[usize]) -> Result<(GroupPartition, Self)> {
        if group_of_level.is_empty() {
            return domain("empty level assignment");
        }
        let group_count = group_of_level.iter().max().copied().unwrap_or(0) + 1;
        let mut sizes = vec![0usize; group_count];
        for &g in group_of_level {
            sizes[g] += 1;
        }
        if let Some(g) = sizes.iter().position(|&n| n == 0) {
            return domain(format!("group id {g} has no levels"));
        }
        let mut to_original: Vec<usize> = (0..group_of_level.len()).collect();
        to_original.sort_by_key(|&l| group_of_level[l]);
        let mut to_canonical = vec![0; group_of_level.len()];
        for (canon, &orig) in to_original.iter().enumerate() {
            to_canonical[orig] = canon;
        }
        Ok((GroupPartition::new(sizes)?, Self { to_canonical, to_original }))
    }

    pub fn identity(level_count: usize) -> Self {
        let ids: Vec<usize> = (0..level_count).collect();
        Self { to_canonical: ids.clone(), to_original: ids }
    }

    pub fn level_count(&self) -> usize {
        self.to_canonical.len()
    }

    pub fn canonical_level(&self, original: usize) -> usize {
        self.to_canonical[original]
    }

    pub fn original_level(&self, canonical: usize) -> usize {
        self.to_original[canonical]
    }

    /// Reorders a matrix indexed by original levels into canonical order.
    pub fn to_canonical_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.level_count();
        DMatrix::from_fn(n, n, |i, j| m[(self.to_original[i], self.to_original[j])])
    }

    /// Reorders a matrix indexed by canonical levels back into original order.
    pub fn to_original_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.level_count();
        DMatrix::from_fn(n, n, |i, j| m[(self.to_canonical[i], self.to_canonical[j])])
    }
}
