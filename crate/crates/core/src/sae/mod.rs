//! TopK sparse autoencoders: definition, forward and backward passes, Adam
//! training and checkpoints.
//!
//! The encoder has no bias and no ReLU: `f = (x − b_dec) · w_enc`, and TopK
//! keeps the `k` largest latents by value (negative latents survive when
//! fewer than `k` are positive). The pre-TopK latents `f` are what the
//! similarity analytics consume.

mod adam;
mod backward;
mod checkpoint;
mod forward;
mod params;
mod train;

pub use adam::{adam_step, AdamState};
pub use backward::{sae_backward, Gradients};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader, CHECKPOINT_MAGIC};
pub use forward::{dead_latent_count, mse_loss, sae_encode, sae_forward, topk_select, ForwardPass};
pub use params::{sae_init, SaeParams, TrainConfig};
pub use train::{train_on_matrix, train_sae, TrainReport};

pub(crate) use forward::topk_indices;
