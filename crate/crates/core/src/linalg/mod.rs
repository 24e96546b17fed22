//! Dense matrix primitives shared by every other module.

mod kernel;
mod matrix;
pub mod rng;
mod standardize;

pub use kernel::{blocked_correlation, correlation_row_max, matmul, rowwise_max};
pub use matrix::{DenseMatrix, TileConfig};
pub use rng::seeded_permutation;
pub use standardize::{standardize_columns, ColumnStats, DEFAULT_SIGMA_TOL};
