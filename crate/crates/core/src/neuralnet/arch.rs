use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// One convolution stage: `kernel_size` square valid convolution with
/// `out_channels` filters, bias, ReLU, then non-overlapping `pool_size` max-pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvBlock {
    pub out_channels: usize,
    pub kernel_size: usize,
    pub pool_size: usize,
}

impl ConvBlock {
    pub const fn new(out_channels: usize, kernel_size: usize, pool_size: usize) -> Self {
        Self { out_channels, kernel_size, pool_size }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchConfig {
    pub input_side: usize,
    pub input_channels: usize,
    pub conv_blocks: Vec<ConvBlock>,
    pub embedding_dim: usize,
    pub normalize_embeddings: bool,
}

impl Default for ArchConfig {
    /// 96x96 grayscale, four 3x3 blocks of 16/32/64/128 filters with 2x2
    /// pooling, unit-norm 64-d embeddings.
    fn default() -> Self {
        Self {
            input_side: 96,
            input_channels: 1,
            conv_blocks: vec![
                ConvBlock::new(16, 3, 2),
                ConvBlock::new(32, 3, 2),
                ConvBlock::new(64, 3, 2),
                ConvBlock::new(128, 3, 2),
            ],
            embedding_dim: 64,
            normalize_embeddings: true,
        }
    }
}

/// Spatial bookkeeping for one block, all square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockGeometry {
    pub in_channels: usize,
    pub in_side: usize,
    /// `in_side - kernel + 1` (valid padding).
    pub conv_side: usize,
    /// `conv_side / pool` rounded down; trailing rows/columns are dropped.
    pub pool_side: usize,
}

impl ArchConfig {
    /// Per-block geometry, or a configuration error if any stage collapses
    /// below 1x1.
    pub fn geometry(&self) -> Result<Vec<BlockGeometry>> {
        if self.input_side == 0 || self.input_channels == 0 {
            return Err(Error::Config("input side and channels must be positive".into()));
        }
        if self.embedding_dim < 2 {
            return Err(Error::Config(format!("embedding_dim must be >= 2, got {}", self.embedding_dim)));
        }
        let mut side = self.input_side;
        let mut channels = self.input_channels;
        let mut out = Vec::with_capacity(self.conv_blocks.len());
        for (i, b) in self.conv_blocks.iter().enumerate() {
            if b.out_channels == 0 || b.kernel_size == 0 || b.pool_size == 0 {
                return Err(Error::Config(format!("block {i}: channels, kernel and pool must be positive")));
            }
            if b.kernel_size > side {
                return Err(Error::Config(format!(
                    "block {i}: kernel {} exceeds the {side}x{side} input",
                    b.kernel_size
                )));
            }
            let conv_side = side - b.kernel_size + 1;
            let pool_side = conv_side / b.pool_size;
            if pool_side == 0 {
                return Err(Error::Config(format!(
                    "block {i}: pooling {conv_side}x{conv_side} by {} leaves nothing",
                    b.pool_size
                )));
            }
            out.push(BlockGeometry { in_channels: channels, in_side: side, conv_side, pool_side });
            side = pool_side;
            channels = b.out_channels;
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry().map(|_| ())
    }

    /// Length of the flattened feature vector entering the fully-connected layer.
    pub fn flat_features(&self) -> Result<usize> {
        let g = self.geometry()?;
        Ok(match (g.last(), self.conv_blocks.last()) {
            (Some(last), Some(b)) => b.out_channels * last.pool_side * last.pool_side,
            _ => self.input_channels * self.input_side * self.input_side,
        })
    }
}

/// Which phase pairing a model was trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelTag {
    PrePre,
    PostPost,
    PrePost,
}

impl ModelTag {
    pub const ALL: [ModelTag; 3] = [ModelTag::PrePre, ModelTag::PostPost, ModelTag::PrePost];

    pub fn code(self) -> u8 {
        match self {
            ModelTag::PrePre => 0,
            ModelTag::PostPost => 1,
            ModelTag::PrePost => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.code() == code)
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelTag::PrePre => "PRE-PRE",
            ModelTag::PostPost => "POST-POST",
            ModelTag::PrePost => "PRE-POST",
        })
    }
}

impl FromStr for ModelTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('_', "-").as_str() {
            "PRE-PRE" => Ok(ModelTag::PrePre),
            "POST-POST" => Ok(ModelTag::PostPost),
            "PRE-POST" => Ok(ModelTag::PrePost),
            _ => Err(Error::Config(format!("unknown model tag `{s}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry() {
        let g = ArchConfig::default().geometry().unwrap();
        let sides: Vec<_> = g.iter().map(|b| (b.conv_side, b.pool_side)).collect();
        assert_eq!(sides, vec![(94, 47), (45, 22), (20, 10), (8, 4)]);
        assert_eq!(ArchConfig::default().flat_features().unwrap(), 128 * 16);
    }

    #[test]
    fn collapsing_arch_is_rejected() {
        let arch = ArchConfig { input_side: 8, ..ArchConfig::default() };
        assert!(matches!(arch.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn tags_round_trip() {
        for t in ModelTag::ALL {
            assert_eq!(t.to_string().parse::<ModelTag>().unwrap(), t);
            assert_eq!(ModelTag::from_code(t.code()), Some(t));
        }
    }
}
