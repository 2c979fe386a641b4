//! GP regression: `y = μ + Z(w) + ε` with a constant trend `μ`.

pub mod dataset;
pub mod fit;
pub mod likelihood;
pub mod optim;

pub use dataset::{read_points_csv, write_points_csv, Dataset, RESPONSE_COLUMN};
pub use fit::{fit, fit_param_specs, q2, FitConfig, GpModel, ModelDocument, NamedMatrix, RestartRecord, StartRanges, MODEL_FORMAT};
pub use likelihood::{factorize, neg_log_likelihood, nll_from_gram, nll_with_trend, Factorization, Objective, DEFAULT_NUGGET, MAX_NUGGET, NOISE_FLOOR};
pub use optim::{bfgs_fd, central_gradient, nelder_mead, OptimResult, Optimizer, Tolerances};
