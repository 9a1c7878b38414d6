//! Convolutional embedding network with hand-written backward passes.
//!
//! Each block is a valid-padding convolution (`side - k + 1`), bias, ReLU and
//! a non-overlapping max-pool that rounds down (`side / p`). The final
//! feature map is flattened channel-major into a fully-connected layer,
//! optionally followed by L2 normalization.

mod arch;
mod embed;
mod io;
mod network;
mod optim;
mod tensor;

pub use arch::{ArchConfig, BlockGeometry, ConvBlock, ModelTag};
pub use embed::{batch_from_images, embed, embed_batch, image_to_input, Embedding};
pub use io::{load_network, read_network, save_network, write_network};
pub use network::{init_network, ForwardCache, Gradients, Network, Param};
pub use optim::{sgd_step, SgdState};
pub use tensor::{Scalar, Tensor};
