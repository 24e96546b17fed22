//! TopK sparse autoencoders and cross-model concept similarity.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`sae`] trains a TopK SAE on the activations of one encoder layer.
//! 2. [`features`] records the pre-TopK latents of every data sample, together
//!    with each feature's cumulative activation `S_i`.
//! 3. [`similarity`] matches each source feature to its most correlated
//!    target feature (MPPC, wMPPC) with a tiled correlation kernel from
//!    [`linalg`].
//! 4. [`sharedness`] ranks features by how much better they are matched in
//!    one group of models than in another, and [`stats`] says how surprising
//!    a correlation is under the null.
//!
//! ```
//! use concept_bridge::features::{FeatureMatrix, SMode};
//! use concept_bridge::linalg::{DenseMatrix, TileConfig};
//! use concept_bridge::similarity::mppc_pair;
//!
//! let data = DenseMatrix::from_rows(&[[1.0f32, 0.0], [2.0, 1.0], [4.0, 0.5]])?;
//! let fm = FeatureMatrix::from_matrix(data, "toy", 0, SMode::Relu)?;
//! let r = mppc_pair(&fm, &fm, &TileConfig::default())?;
//! assert!((r.wmppc - 1.0).abs() < 1e-6);
//! # Ok::<(), concept_bridge::Error>(())
//! ```

mod envelope;
pub mod error;
pub mod features;
pub mod linalg;
pub mod sae;
pub mod sharedness;
pub mod similarity;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
