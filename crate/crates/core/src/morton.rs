//! Morton (z-order) codes.
//!
//! Bits are interleaved as `... x1 y1 z1 x0 y0 z0`, so every three-bit group
//! is an octree child index `(x_bit << 2) | (y_bit << 1) | z_bit`. Sorting by
//! this code is the same as a depth-first octree walk that visits children
//! in ascending index.

use crate::types::QuantizedPoint;

#[inline]
fn spread(v: u32) -> u64 {
    let mut x = (v as u64) & 0x1f_ffff;
    x = (x | x << 32) & 0x1f_0000_0000_ffff;
    x = (x | x << 16) & 0x1f_0000_ff00_00ff;
    x = (x | x << 8) & 0x100f_00f0_0f00_f00f;
    x = (x | x << 4) & 0x10c3_0c30_c30c_30c3;
    x = (x | x << 2) & 0x1249_2492_4924_9249;
    x
}

#[inline]
fn compact(v: u64) -> u32 {
    let mut x = v & 0x1249_2492_4924_9249;
    x = (x | x >> 2) & 0x10c3_0c30_c30c_30c3;
    x = (x | x >> 4) & 0x100f_00f0_0f00_f00f;
    x = (x | x >> 8) & 0x1f_0000_ff00_00ff;
    x = (x | x >> 16) & 0x1f_0000_0000_ffff;
    x = (x | x >> 32) & 0x1f_ffff;
    x as u32
}

/// Interleaves the low 21 bits of each coordinate.
pub fn encode(p: QuantizedPoint) -> u64 {
    spread(p.x) << 2 | spread(p.y) << 1 | spread(p.z)
}

pub fn decode(code: u64) -> QuantizedPoint {
    QuantizedPoint::new(compact(code >> 2), compact(code >> 1), compact(code))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive(p: QuantizedPoint) -> u64 {
        let mut code = 0u64;
        for bit in (0..21).rev() {
            let c = ((p.x >> bit & 1) << 2 | (p.y >> bit & 1) << 1 | (p.z >> bit & 1)) as u64;
            code = code << 3 | c;
        }
        code
    }

    #[test]
    fn child_index_in_low_bits() {
        assert_eq!(encode(QuantizedPoint::new(1, 0, 0)), 0b100);
        assert_eq!(encode(QuantizedPoint::new(0, 1, 0)), 0b010);
        assert_eq!(encode(QuantizedPoint::new(0, 0, 1)), 0b001);
        assert_eq!(encode(QuantizedPoint::new(2, 0, 0)), 0b100_000);
    }

    proptest! {
        #[test]
        fn matches_bitwise_interleave(x in 0u32..1 << 21, y in 0u32..1 << 21, z in 0u32..1 << 21) {
            let p = QuantizedPoint::new(x, y, z);
            prop_assert_eq!(encode(p), naive(p));
            prop_assert_eq!(decode(encode(p)), p);
        }
    }
}
