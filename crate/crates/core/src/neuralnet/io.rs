use std::io::{Read, Write};

use super::arch::{ArchConfig, ConvBlock, ModelTag};
use super::network::{Network, Param};
use super::tensor::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"OCV1";

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::ModelFormat(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

/// Serializes as: `OCV1`, tag byte, input side, input channels, block count,
/// `(out, kernel, pool)` per block, embedding dim (all u32 LE), normalize
/// byte, parameter count, then per parameter its name length, name bytes,
/// rank, extents and LE f32 values.
pub fn save_network(net: &Network<f32>) -> Result<Vec<u8>> {
    let a = net.arch();
    let mut out = Vec::with_capacity(64 + 4 * net.param_count());
    out.extend_from_slice(MAGIC);
    out.push(net.tag().code());
    put_u32(&mut out, a.input_side)?;
    put_u32(&mut out, a.input_channels)?;
    put_u32(&mut out, a.conv_blocks.len())?;
    for b in &a.conv_blocks {
        put_u32(&mut out, b.out_channels)?;
        put_u32(&mut out, b.kernel_size)?;
        put_u32(&mut out, b.pool_size)?;
    }
    put_u32(&mut out, a.embedding_dim)?;
    out.push(a.normalize_embeddings as u8);
    put_u32(&mut out, net.params().len())?;
    for p in net.params() {
        put_u32(&mut out, p.name.len())?;
        out.extend_from_slice(p.name.as_bytes());
        put_u32(&mut out, p.value.shape().len())?;
        for &e in p.value.shape() {
            put_u32(&mut out, e)?;
        }
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::ModelFormat(format!("truncated at byte {} (wanted {n} more)", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }
}

pub fn load_network(bytes: &[u8]) -> Result<Network<f32>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::ModelFormat("missing OCV1 magic".into()));
    }
    let code = r.u8()?;
    let tag = ModelTag::from_code(code).ok_or_else(|| Error::ModelFormat(format!("unknown model tag {code}")))?;
    let input_side = r.u32()?;
    let input_channels = r.u32()?;
    let nblocks = r.u32()?;
    if nblocks > 64 {
        return Err(Error::ModelFormat(format!("implausible block count {nblocks}")));
    }
    let mut conv_blocks = Vec::with_capacity(nblocks);
    for _ in 0..nblocks {
        conv_blocks.push(ConvBlock::new(r.u32()?, r.u32()?, r.u32()?));
    }
    let embedding_dim = r.u32()?;
    let normalize_embeddings = match r.u8()? {
        0 => false,
        1 => true,
        v => return Err(Error::ModelFormat(format!("bad normalize flag {v}"))),
    };
    let arch = ArchConfig { input_side, input_channels, conv_blocks, embedding_dim, normalize_embeddings };
    arch.validate().map_err(|e| Error::ModelFormat(format!("bad architecture: {e}")))?;

    let count = r.u32()?;
    let mut params = Vec::with_capacity(count.min(256));
    for _ in 0..count {
        let len = r.u32()?;
        let name = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| Error::ModelFormat("parameter name is not UTF-8".into()))?;
        let rank = r.u32()?;
        if rank > 8 {
            return Err(Error::ModelFormat(format!("parameter `{name}` has rank {rank}")));
        }
        let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let n = shape.iter().try_fold(1usize, |acc, &e| acc.checked_mul(e));
        let n = n.ok_or_else(|| Error::ModelFormat(format!("parameter `{name}` is too large")))?;
        let raw = r.take(n.checked_mul(4).ok_or_else(|| Error::ModelFormat("size overflow".into()))?)?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        params.push(Param { name, value: Tensor::new(shape, data)? });
    }
    if r.pos != bytes.len() {
        return Err(Error::ModelFormat(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Network::from_parts(arch, tag, params)
}

pub fn write_network(net: &Network<f32>, mut w: impl Write) -> Result<()> {
    w.write_all(&save_network(net)?)?;
    Ok(())
}

pub fn read_network(mut r: impl Read) -> Result<Network<f32>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    load_network(&bytes)
}
