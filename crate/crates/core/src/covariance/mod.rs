//! Compound-symmetry and generalized compound-symmetry (GCS) block covariance matrices:
//! construction, validation, decomposition and parameterization.

pub mod contrast;
pub mod count;
pub mod cs;
pub mod gcs;
pub mod io;
pub mod partition;
pub mod spherical;

pub use contrast::{
    centered_from_reduced, helmert_basis, reduced_from_centered, CenteredCovariance, ContrastBasis,
};
pub use count::{generator_dimension, parameter_count, BlockForm, CountScheme};
pub use cs::{cs_from_hierarchical, cs_is_positive_definite, cs_matrix, hierarchical_from_cs, CsSpec};
pub use gcs::{
    block_average, block_average_matrix, gcs_assemble, gcs_decompose, gcs_identity_check,
    gcs_identity_residual, gcs_is_invertible, gcs_validate, BlockCovariance, Diagnostic, GcsParams,
    ValidationReport,
};
pub use io::{read_matrix_csv, write_matrix_csv, MatrixDocument};
pub use partition::{GroupPartition, LevelRelabeling};
pub use spherical::{angle_count, spherical_covariance, spherical_to_cholesky};
