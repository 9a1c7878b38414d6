//! Background removal (Canny edges, dilation, border flood fill) and the
//! randomized affine/elastic augmentation used to grow one-pair-per-identity data.

mod augment;
mod canny;
mod mask;

pub use augment::{augment, augment_stream, AugmentConfig};
pub use canny::{canny_edges, sobel_magnitude, CannyParams};
pub use mask::{background_mask, dilate, remove_background, BinaryMap};

/// Half-width of the square dilation kernel applied to Canny edges.
pub const DEFAULT_DILATE_K: usize = 2;
