//! Frame container layout. All integers little-endian.
//!
//! ```text
//! offset size field
//!      0    4 magic "CGA1"
//!      4    1 kind (0 = intra, 1 = inter)
//!      5    1 qp
//!      6    1 flags (bit 0: has color)
//!      7    1 octree depth
//!      8    4 total frame length in bytes, header included
//!     12    4 point count
//!     16   12 root box corner x, y, z (u32)
//!     28    6 quantizer step per channel r, g, b (u16)
//!     34    4 occupancy length N
//!     38    N occupancy bytes (breadth-first)
//! inter frames only:
//!           96 eight motion vectors, (i32 x, y, z) each
//! colored frames only, per channel r, g, b:
//!            4 channel payload length M
//!            M coded blocks
//! ```

use super::cluster::{MotionVectorSet, CLUSTERS};
use super::color::{block_count, read_blocks, write_blocks, CodedBlock};
use crate::error::{Error, Result};
use crate::types::QuantizedPoint;

pub const MAGIC: &[u8; 4] = b"CGA1";
pub const HEADER_LEN: usize = 38;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    Intra,
    Inter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHeader {
    pub kind: FrameKind,
    pub qp: u8,
    pub has_color: bool,
    pub depth: u8,
    pub point_count: u32,
    pub root_min: QuantizedPoint,
    pub step: [u16; 3],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameBitstream {
    pub header: FrameHeader,
    pub occupancy: Vec<u8>,
    pub motion: Option<MotionVectorSet>,
    /// Coded blocks for r, g, b when the frame carries color.
    pub attributes: Option<[Vec<CodedBlock>; 3]>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Bitstream(format!("truncated frame at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

impl FrameBitstream {
    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(HEADER_LEN + self.occupancy.len());
        out.extend_from_slice(MAGIC);
        out.push(match h.kind {
            FrameKind::Intra => 0,
            FrameKind::Inter => 1,
        });
        out.push(h.qp);
        out.push(h.has_color as u8);
        out.push(h.depth);
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&h.point_count.to_le_bytes());
        for c in h.root_min.to_array() {
            out.extend_from_slice(&c.to_le_bytes());
        }
        for s in h.step {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out.extend_from_slice(&(self.occupancy.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.occupancy);
        if let Some(mvs) = &self.motion {
            for mv in mvs.0 {
                for c in mv {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
        }
        if let Some(channels) = &self.attributes {
            let mut payload = Vec::new();
            for blocks in channels {
                payload.clear();
                write_blocks(blocks, &mut payload);
                out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
                out.extend_from_slice(&payload);
            }
        }
        let total = out.len() as u32;
        out[8..12].copy_from_slice(&total.to_le_bytes());
        out
    }

    /// Parses one frame from the front of `bytes`, returning it with the
    /// number of bytes consumed.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, usize)> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Bitstream("missing CGA1 magic".into()));
        }
        let kind = match r.u8()? {
            0 => FrameKind::Intra,
            1 => FrameKind::Inter,
            k => return Err(Error::Bitstream(format!("unknown frame kind {k}"))),
        };
        let qp = r.u8()?;
        let flags = r.u8()?;
        let depth = r.u8()?;
        let total = r.u32()? as usize;
        if total < HEADER_LEN || total > bytes.len() {
            return Err(Error::Bitstream(format!("frame length {total} does not fit the {} available bytes", bytes.len())));
        }
        let mut r = Reader { bytes: &bytes[..total], pos: r.pos };
        let point_count = r.u32()?;
        let root_min = QuantizedPoint::new(r.u32()?, r.u32()?, r.u32()?);
        let step = [r.u16()?, r.u16()?, r.u16()?];
        let occ_len = r.u32()? as usize;
        let occupancy = r.take(occ_len)?.to_vec();
        let header = FrameHeader {
            kind,
            qp,
            has_color: flags & 1 == 1,
            depth,
            point_count,
            root_min,
            step,
        };
        let motion = if kind == FrameKind::Inter {
            let mut mvs = [[0i32; 3]; CLUSTERS];
            for mv in mvs.iter_mut() {
                *mv = [r.i32()?, r.i32()?, r.i32()?];
            }
            Some(MotionVectorSet(mvs))
        } else {
            None
        };
        let attributes = if header.has_color {
            let blocks = block_count(point_count as usize);
            let mut channel = || -> Result<Vec<CodedBlock>> {
                let len = r.u32()? as usize;
                read_blocks(r.take(len)?, blocks)
            };
            Some([channel()?, channel()?, channel()?])
        } else {
            None
        };
        if r.pos != total {
            return Err(Error::Bitstream("frame length disagrees with its contents".into()));
        }
        Ok((
            FrameBitstream {
                header,
                occupancy,
                motion,
                attributes,
            },
            total,
        ))
    }
}

/// Splits a concatenation of frames.
pub fn split_frames(mut bytes: &[u8]) -> Result<Vec<FrameBitstream>> {
    let mut frames = Vec::new();
    while !bytes.is_empty() {
        let (f, used) = FrameBitstream::from_bytes(bytes)?;
        frames.push(f);
        bytes = &bytes[used..];
    }
    Ok(frames)
}
