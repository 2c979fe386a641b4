//! The model variants compared on the two test functions.

use super::config::{
    BenchmarkConfig, CategoricalFormSpec, CategoricalSpec, ContinuousSpec, DesignKind, DesignSpec,
    FamilySpec, KernelSpec, VariantSpec, WithinForms,
};
use super::functions::TestFunction;
use crate::covariance::BlockForm;
use crate::design::Placement;
use crate::kernels::CombineOp;

fn range(a: usize, b: usize) -> Vec<usize> {
    (a..=b).collect()
}

fn variant(name: &str, form: CategoricalFormSpec) -> VariantSpec {
    VariantSpec {
        name: name.into(),
        kernel: KernelSpec {
            continuous: vec![ContinuousSpec { input: "x".into(), kernel: FamilySpec::default() }],
            categorical: vec![CategoricalSpec { input: "u".into(), form, carries_variance: true }],
            combination: Some(CombineOp::Product),
        },
    }
}

fn gcs(groups: Vec<Vec<usize>>, between: BlockForm, within: WithinForms) -> CategoricalFormSpec {
    CategoricalFormSpec::Gcs { groups, between, within }
}

pub const EXAMPLE1_CS: &str = "1 group (CS)";
pub const EXAMPLE1_TWO: &str = "2 groups";
pub const EXAMPLE1_FIVE_A: &str = "5 groups (a)";
pub const EXAMPLE1_FIVE_B: &str = "5 groups (b)";
pub const EXAMPLE1_SPHERICAL: &str = "13 groups";
pub const EXAMPLE1_ORDINAL: &str = "ordinal";
pub const EXAMPLE2_TWO: &str = "2 groups";
pub const EXAMPLE2_THREE: &str = "3 groups";

/// Matérn 5/2 on `x` times, in order: CS; groups {1..9},{10..13}; five groups with a CS
/// or general between-group covariance; heteroscedastic spherical; piecewise-linear
/// warping into a cosine kernel with `α = π`.
pub fn example1_variants() -> Vec<VariantSpec> {
    let five = || {
        let mut g = vec![range(1, 9)];
        g.extend((10..=13).map(|l| vec![l]));
        g
    };
    vec![
        variant(EXAMPLE1_CS, CategoricalFormSpec::Cs),
        variant(
            EXAMPLE1_TWO,
            gcs(vec![range(1, 9), range(10, 13)], BlockForm::General, WithinForms::All(BlockForm::Cs)),
        ),
        variant(EXAMPLE1_FIVE_A, gcs(five(), BlockForm::Cs, WithinForms::All(BlockForm::Cs))),
        variant(EXAMPLE1_FIVE_B, gcs(five(), BlockForm::General, WithinForms::All(BlockForm::Cs))),
        variant(EXAMPLE1_SPHERICAL, CategoricalFormSpec::Spherical { heteroscedastic: true }),
        variant(
            EXAMPLE1_ORDINAL,
            CategoricalFormSpec::Ordinal {
                warping: Default::default(),
                base: FamilySpec { family: super::config::Family::Cosine, lengthscale: None, alpha: None },
            },
        ),
    ]
}

/// Groups {1..4},{5..10} with CS and general within forms, and groups
/// {1..4},{5..7},{8..10} with CS within forms; both with a general between covariance.
pub fn example2_variants() -> Vec<VariantSpec> {
    vec![
        variant(
            EXAMPLE2_TWO,
            gcs(
                vec![range(1, 4), range(5, 10)],
                BlockForm::General,
                WithinForms::PerGroup(vec![BlockForm::Cs, BlockForm::General]),
            ),
        ),
        variant(
            EXAMPLE2_THREE,
            gcs(vec![range(1, 4), range(5, 7), range(8, 10)], BlockForm::General, WithinForms::All(BlockForm::Cs)),
        ),
    ]
}

/// SLHD with 3 points per level (39 points), test grid of 1000 x-values.
pub fn example1_config(repetitions: usize, seed: u64) -> BenchmarkConfig {
    BenchmarkConfig {
        function: TestFunction::Example1,
        design: DesignSpec { kind: DesignKind::Slhd, points_per_level: 3, placement: Placement::Center },
        test_grid: 1000,
        repetitions,
        seed,
        variants: example1_variants(),
        parallel: true,
        output_dir: None,
    }
}

/// Stratified regular design with 3 points per level (30 points).
pub fn example2_config(repetitions: usize, seed: u64) -> BenchmarkConfig {
    BenchmarkConfig {
        function: TestFunction::Example2,
        design: DesignSpec { kind: DesignKind::Stratified, points_per_level: 3, placement: Placement::Center },
        test_grid: 1000,
        repetitions,
        seed,
        variants: example2_variants(),
        parallel: true,
        output_dir: None,
    }
}
