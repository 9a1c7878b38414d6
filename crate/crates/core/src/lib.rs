//! One-shot face verification for pre/post-operation photo pairs, with
//! JPEG error level analysis as a forgery gate.
//!
//! The crate is organised bottom-up:
//!
//! * [`imaging`]: the 8-bit [`Image`](imaging::Image) type, an in-repo
//!   baseline JPEG codec, a PNM debug raster, grayscale and resizing.
//! * [`preprocess`]: Canny edges, dilation, border flood-fill background
//!   removal and affine/elastic augmentation.
//! * [`neuralnet`]: the convolutional embedding network with hand-written
//!   backward passes and a momentum SGD optimizer.
//! * [`losses`]: contrastive and triplet losses plus triplet sampling.
//! * [`trainer`]: dataset views, the training loop, FA/FR/accuracy metrics
//!   and the threshold sweep.
//! * [`forensics`]: error level analysis and the forged/genuine rule.
//! * [`pipeline`]: pair verification, duplicate lookup and the OCDB
//!   embedding database.
//! * [`synth`]: procedural occluded-face identities and splice fixtures.
//! * [`config`] and [`cli`]: the `ocuverify` command line front end.

pub mod cli;
pub mod config;
pub mod error;
pub mod forensics;
pub mod imaging;
pub mod losses;
pub mod neuralnet;
pub mod pipeline;
pub mod preprocess;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use imaging::{Image, JpegQuality};
pub use neuralnet::{ArchConfig, Embedding, ModelTag, Network, Tensor};
