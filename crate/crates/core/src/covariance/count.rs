//! Parameter counts of group covariance settings.

use serde::{Deserialize, Serialize};

use super::partition::GroupPartition;

/// Shape imposed on a generator matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockForm {
    /// Compound symmetry (a scaled identity for the reduced within-group generator).
    Cs,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountScheme {
    pub within: BlockForm,
    pub between: BlockForm,
}

/// Number of parameters of the categorical kernel for the four reference settings:
///
/// | within | between | count |
/// |--------|---------|-------|
/// | CS | CS | `2G + 1` |
/// | CS | general | `G(G+3)/2` |
/// | general | CS | `2 + Σ n_g(n_g+1)/2` |
/// | general | general | `G(G+1)/2 + Σ n_g(n_g+1)/2` |
///
/// These are the nominal counts of the resulting block form. The dimension actually
/// searched by the optimizer is given by [`generator_dimension`].
pub fn parameter_count(scheme: CountScheme, partition: &GroupPartition) -> usize {
    let g = partition.group_count();
    let within_general: usize = partition.sizes().iter().map(|n| n * (n + 1) / 2).sum();
    match (scheme.within, scheme.between) {
        (BlockForm::Cs, BlockForm::Cs) => 2 * g + 1,
        (BlockForm::Cs, BlockForm::General) => g * (g + 3) / 2,
        (BlockForm::General, BlockForm::Cs) => 2 + within_general,
        (BlockForm::General, BlockForm::General) => g * (g + 1) / 2 + within_general,
    }
}

/// Number of free generator values: `B★` (2 for CS, 1 when `G = 1`; `G(G+1)/2` general)
/// plus, per group of size ≥ 2, one value for a CS within form or `n_g(n_g-1)/2` for a
/// general one.
pub fn generator_dimension(
    between: BlockForm,
    within: &[BlockForm],
    partition: &GroupPartition,
) -> usize {
    let g = partition.group_count();
    let b = match between {
        BlockForm::Cs if g == 1 => 1,
        BlockForm::Cs => 2,
        BlockForm::General => g * (g + 1) / 2,
    };
    let w: usize = partition
        .sizes()
        .iter()
        .zip(within)
        .map(|(&n, form)| match (n, form) {
            (1, _) => 0,
            (_, BlockForm::Cs) => 1,
            (n, BlockForm::General) => n * (n - 1) / 2,
        })
        .sum();
    b + w
}
