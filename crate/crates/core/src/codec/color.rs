//! Block transform coding of one attribute channel.
//!
//! Samples (already in scan order) are cut into 64-sample blocks laid out
//! row-major as 8x8, the last block padded by repeating its final sample.
//! Each block is transformed; AC coefficients are divided by the quantizer
//! step and rounded half away from zero, DC coefficients are rounded to
//! integers and coded as first differences along the block sequence.

use integer_encoding::VarInt;

use super::dct::{dct8x8, idct8x8, zigzag, Block};
use crate::error::{Error, Result};

pub const BLOCK_SAMPLES: usize = 64;

/// One coded block. `ac` holds zigzag-ordered quantized AC coefficients
/// with trailing zeros removed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CodedBlock {
    pub dc_residual: i64,
    pub ac: Vec<i32>,
}

pub(crate) fn round_half_away(v: f64) -> f64 {
    // f64::round already rounds half away from zero
    v.round()
}

/// First differences; the first value is kept as is.
pub fn dpcm_encode(values: &[i64]) -> Vec<i64> {
    let mut prev = 0;
    values
        .iter()
        .map(|&v| {
            let d = v - prev;
            prev = v;
            d
        })
        .collect()
}

pub fn dpcm_decode(residuals: &[i64]) -> Vec<i64> {
    let mut acc = 0;
    residuals
        .iter()
        .map(|&r| {
            acc += r;
            acc
        })
        .collect()
}

pub fn block_count(samples: usize) -> usize {
    samples.div_ceil(BLOCK_SAMPLES)
}

pub fn encode_channel(samples: &[u16], step: u16) -> Result<Vec<CodedBlock>> {
    if step == 0 {
        return Err(Error::InvalidArgument("quantizer step must be at least 1".into()));
    }
    let zz = zigzag();
    let mut dcs = Vec::with_capacity(block_count(samples.len()));
    let mut blocks = Vec::with_capacity(dcs.capacity());
    for chunk in samples.chunks(BLOCK_SAMPLES) {
        let pad = *chunk.last().expect("chunks are non-empty") as f64;
        let mut b: Block = [[pad; 8]; 8];
        for (i, &s) in chunk.iter().enumerate() {
            b[i / 8][i % 8] = s as f64;
        }
        let f = dct8x8(&b);
        dcs.push(round_half_away(f[0][0]) as i64);
        let mut ac: Vec<i32> = zz[1..]
            .iter()
            .map(|&(r, c)| round_half_away(f[r][c] / step as f64) as i32)
            .collect();
        while ac.last() == Some(&0) {
            ac.pop();
        }
        blocks.push(CodedBlock { dc_residual: 0, ac });
    }
    for (b, r) in blocks.iter_mut().zip(dpcm_encode(&dcs)) {
        b.dc_residual = r;
    }
    Ok(blocks)
}

/// Reconstructs `count` samples, rounded and clamped to `[0, max]`.
pub fn decode_channel(blocks: &[CodedBlock], count: usize, step: u16, max: u16) -> Result<Vec<u16>> {
    if blocks.len() != block_count(count) {
        return Err(Error::Bitstream(format!(
            "{} attribute blocks cannot carry {count} samples",
            blocks.len()
        )));
    }
    let zz = zigzag();
    let dcs = dpcm_decode(&blocks.iter().map(|b| b.dc_residual).collect::<Vec<_>>());
    let mut out = Vec::with_capacity(count);
    for (b, dc) in blocks.iter().zip(dcs) {
        if b.ac.len() > BLOCK_SAMPLES - 1 {
            return Err(Error::Bitstream("block carries more than 63 AC coefficients".into()));
        }
        let mut f: Block = [[0.0; 8]; 8];
        f[0][0] = dc as f64;
        for (&(r, c), &q) in zz[1..].iter().zip(&b.ac) {
            f[r][c] = q as f64 * step as f64;
        }
        let s = idct8x8(&f);
        for i in 0..BLOCK_SAMPLES {
            if out.len() == count {
                break;
            }
            out.push(round_half_away(s[i / 8][i % 8]).clamp(0.0, max as f64) as u16);
        }
    }
    Ok(out)
}

/// Per block: zigzag-varint DC residual, one byte AC count, then the AC
/// values as zigzag varints.
pub fn write_blocks(blocks: &[CodedBlock], out: &mut Vec<u8>) {
    let mut buf = [0u8; 10];
    for b in blocks {
        let n = b.dc_residual.encode_var(&mut buf);
        out.extend_from_slice(&buf[..n]);
        out.push(b.ac.len() as u8);
        for &a in &b.ac {
            let n = (a as i64).encode_var(&mut buf);
            out.extend_from_slice(&buf[..n]);
        }
    }
}

pub fn read_blocks(mut bytes: &[u8], count: usize) -> Result<Vec<CodedBlock>> {
    let next_var = |bytes: &mut &[u8]| -> Result<i64> {
        let (v, n) = i64::decode_var(bytes).ok_or_else(|| Error::Bitstream("truncated varint".into()))?;
        *bytes = &bytes[n..];
        Ok(v)
    };
    let mut blocks = Vec::with_capacity(count);
    for _ in 0..count {
        let dc_residual = next_var(&mut bytes)?;
        let (&n, rest) = bytes.split_first().ok_or_else(|| Error::Bitstream("truncated block".into()))?;
        bytes = rest;
        let ac = (0..n)
            .map(|_| next_var(&mut bytes).and_then(|v| i32::try_from(v).map_err(|_| Error::Bitstream("AC value overflow".into()))))
            .collect::<Result<Vec<_>>>()?;
        blocks.push(CodedBlock { dc_residual, ac });
    }
    if !bytes.is_empty() {
        return Err(Error::Bitstream("trailing bytes in attribute payload".into()));
    }
    Ok(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dpcm_first_difference() {
        assert_eq!(dpcm_encode(&[100, 102, 101]), vec![100, 2, -1]);
        assert_eq!(dpcm_decode(&[100, 2, -1]), vec![100, 102, 101]);
    }

    #[test]
    fn constant_channel_is_exact() {
        let samples = vec![77u16; 150];
        let blocks = encode_channel(&samples, 1).unwrap();
        assert_eq!(blocks.len(), 3);
        assert!(blocks.iter().all(|b| b.ac.is_empty()));
        assert_eq!(blocks[0].dc_residual, 77 * 8);
        assert_eq!(blocks[1].dc_residual, 0);
        assert_eq!(decode_channel(&blocks, 150, 1, 255).unwrap(), samples);
    }

    #[test]
    fn random_channel_error_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for len in [1usize, 63, 64, 65, 1000] {
            let samples: Vec<u16> = (0..len).map(|_| rng.gen_range(0..=255)).collect();
            let blocks = encode_channel(&samples, 1).unwrap();
            let mut bytes = Vec::new();
            write_blocks(&blocks, &mut bytes);
            let parsed = read_blocks(&bytes, blocks.len()).unwrap();
            assert_eq!(parsed, blocks);
            let back = decode_channel(&parsed, len, 1, 255).unwrap();
            let worst = samples.iter().zip(&back).map(|(&a, &b)| a.abs_diff(b)).max().unwrap();
            assert!(worst <= 4, "worst error {worst}");
        }
    }

    #[test]
    fn coarser_step_never_grows_payload() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let samples: Vec<u16> = (0..640).map(|_| rng.gen_range(0..=255)).collect();
        let mut last = usize::MAX;
        for step in [1u16, 2, 4, 8, 16, 32] {
            let mut bytes = Vec::new();
            write_blocks(&encode_channel(&samples, step).unwrap(), &mut bytes);
            assert!(bytes.len() <= last);
            last = bytes.len();
        }
    }

    #[test]
    fn errors() {
        assert!(encode_channel(&[1, 2], 0).is_err());
        let blocks = encode_channel(&[1, 2], 1).unwrap();
        assert!(decode_channel(&blocks, 65, 1, 255).is_err());
        assert!(read_blocks(&[0x02], 1).is_err());
    }
}
