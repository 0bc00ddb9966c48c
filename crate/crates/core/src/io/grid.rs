use std::path::Path;

use super::{read_bytes, write_bytes};
use crate::error::{Error, Result};
use crate::voxel::{SparseVoxelTensor, VoxelLabelGrid};

pub const VOXEL_MAGIC: &[u8; 8] = b"SSCVOXL1";
pub const SPARSE_MAGIC: &[u8; 8] = b"SSCSPRS1";

/// Cursor over a byte slice that reports the offset of the first short read.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        match self.pos.checked_add(n) {
            Some(end) if end <= self.bytes.len() => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            _ => Err(Error::format(
                self.pos as u64,
                format!("unexpected end of data reading {what}"),
            )),
        }
    }

    fn magic(&mut self, expected: &[u8; 8]) -> Result<()> {
        let m = self.take(8, "magic")?;
        if m != expected {
            return Err(Error::format(
                0,
                format!("bad magic {:?}", String::from_utf8_lossy(m)),
            ));
        }
        Ok(())
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn dims(&mut self) -> Result<[usize; 3]> {
        let at = self.pos as u64;
        let d = [self.u32("dims")?, self.u32("dims")?, self.u32("dims")?].map(|v| v as usize);
        if d.contains(&0) {
            return Err(Error::format(at, format!("zero dimension in {d:?}")));
        }
        Ok(d)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

fn checked_volume(dims: [usize; 3], elem: usize, at: u64) -> Result<usize> {
    dims.iter()
        .try_fold(elem, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::format(at, format!("dims {dims:?} overflow")))
}

pub fn encode_voxel_grid(grid: &VoxelLabelGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 2 * grid.len());
    out.extend_from_slice(VOXEL_MAGIC);
    for d in grid.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for l in grid.labels() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out
}

pub fn decode_voxel_grid(bytes: &[u8]) -> Result<VoxelLabelGrid> {
    let mut r = Reader::new(bytes);
    r.magic(VOXEL_MAGIC)?;
    let dims = r.dims()?;
    let payload = checked_volume(dims, 2, 8)?;
    if r.remaining() != payload {
        return Err(Error::format(
            r.pos as u64,
            format!(
                "payload is {} bytes, dims {dims:?} need {payload}",
                r.remaining()
            ),
        ));
    }
    let labels = r
        .take(payload, "labels")?
        .chunks_exact(2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .collect();
    VoxelLabelGrid::from_labels(dims, labels)
}

pub fn read_voxel_grid(path: impl AsRef<Path>) -> Result<VoxelLabelGrid> {
    decode_voxel_grid(&read_bytes(path.as_ref())?)
}

pub fn write_voxel_grid(grid: &VoxelLabelGrid, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_voxel_grid(grid))
}

/// Layout: magic, `u32` dims (L, W, H), `u32` row count N, `u32` channels C,
/// then N `u32` triples of voxel indices, then N·C `f32` features row-major.
pub fn encode_sparse_tensor(t: &SparseVoxelTensor<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(28 + t.len() * 12 + t.features().len() * 4);
    out.extend_from_slice(SPARSE_MAGIC);
    for d in t.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&(t.len() as u32).to_le_bytes());
    out.extend_from_slice(&(t.channels() as u32).to_le_bytes());
    for idx in t.indices() {
        for v in idx {
            out.extend_from_slice(&(*v as u32).to_le_bytes());
        }
    }
    for f in t.features() {
        out.extend_from_slice(&f.to_le_bytes());
    }
    out
}

pub fn decode_sparse_tensor(bytes: &[u8]) -> Result<SparseVoxelTensor<f32>> {
    let mut r = Reader::new(bytes);
    r.magic(SPARSE_MAGIC)?;
    let dims = r.dims()?;
    let n = r.u32("row count")? as usize;
    let channels = r.u32("channels")? as usize;
    let at = r.pos as u64;
    let idx_bytes = n
        .checked_mul(12)
        .ok_or_else(|| Error::format(at, "row count overflow"))?;
    let feat_bytes = n
        .checked_mul(channels)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::format(at, "feature size overflow"))?;
    if idx_bytes.checked_add(feat_bytes) != Some(r.remaining()) {
        return Err(Error::format(
            at,
            format!(
                "payload is {} bytes, header needs {}",
                r.remaining(),
                idx_bytes.saturating_add(feat_bytes)
            ),
        ));
    }
    let words = |b: &[u8]| -> Vec<u32> {
        b.chunks_exact(4)
            .map(|w| u32::from_le_bytes([w[0], w[1], w[2], w[3]]))
            .collect()
    };
    let raw_idx = words(r.take(idx_bytes, "indices")?);
    let indices = raw_idx
        .chunks_exact(3)
        .map(|c| [c[0] as usize, c[1] as usize, c[2] as usize])
        .collect();
    let features: Vec<f32> = words(r.take(feat_bytes, "features")?)
        .into_iter()
        .map(f32::from_bits)
        .collect();
    if let Some(i) = features.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data {
            index: i / channels.max(1),
            msg: "non-finite feature".into(),
        });
    }
    SparseVoxelTensor::new(dims, channels, indices, features)
}

pub fn read_sparse_tensor(path: impl AsRef<Path>) -> Result<SparseVoxelTensor<f32>> {
    decode_sparse_tensor(&read_bytes(path.as_ref())?)
}

pub fn write_sparse_tensor(t: &SparseVoxelTensor<f32>, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_sparse_tensor(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_grid_layout() {
        let g = VoxelLabelGrid::filled([2, 2, 2], 0);
        let bytes = encode_voxel_grid(&g);
        assert_eq!(bytes.len(), 8 + 12 + 16);
        assert_eq!(&bytes[..8], b"SSCVOXL1");
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert!(bytes[20..].iter().all(|&b| b == 0));
        assert_eq!(decode_voxel_grid(&bytes).unwrap(), g);
    }

    #[test]
    fn linear_order_is_x_major() {
        let mut g = VoxelLabelGrid::filled([2, 3, 4], 0);
        g.set([1, 2, 3], 7);
        g.set([0, 0, 1], 5);
        let bytes = encode_voxel_grid(&g);
        let label_at = |li: usize| u16::from_le_bytes([bytes[20 + 2 * li], bytes[21 + 2 * li]]);
        assert_eq!(label_at(12 + 2 * 4 + 3), 7);
        assert_eq!(label_at(1), 5);
    }

    #[test]
    fn malformed_grids() {
        let mut bytes = encode_voxel_grid(&VoxelLabelGrid::filled([2, 2, 2], 3));
        let good = bytes.clone();
        bytes[..8].copy_from_slice(b"XXXXXXXX");
        assert!(matches!(
            decode_voxel_grid(&bytes),
            Err(Error::Format { offset: 0, .. })
        ));
        assert!(decode_voxel_grid(&good[..good.len() - 1]).is_err());
        assert!(decode_voxel_grid(&good[..10]).is_err());
        let mut huge = good.clone();
        for i in 0..3 {
            huge[8 + 4 * i..12 + 4 * i].copy_from_slice(&u32::MAX.to_le_bytes());
        }
        assert!(decode_voxel_grid(&huge).is_err());
    }

    #[test]
    fn sparse_tensor_roundtrip_and_rejects_unsorted() {
        let t = SparseVoxelTensor::new(
            [4, 4, 4],
            2,
            vec![[0, 1, 2], [3, 0, 0]],
            vec![0.5, -1.0, 2.0, 0.25],
        )
        .unwrap();
        let bytes = encode_sparse_tensor(&t);
        assert_eq!(decode_sparse_tensor(&bytes).unwrap(), t);
        // swap the two index triples
        let mut bad = bytes.clone();
        let (a, b) = (28, 40);
        let first: Vec<u8> = bad[a..b].to_vec();
        let second: Vec<u8> = bad[b..b + 12].to_vec();
        bad[a..b].copy_from_slice(&second);
        bad[b..b + 12].copy_from_slice(&first);
        assert!(matches!(
            decode_sparse_tensor(&bad),
            Err(Error::Data { .. })
        ));
    }

    proptest! {
        #[test]
        fn decoders_are_total(bytes in proptest::collection::vec(any::<u8>(), 0..96), keep_magic in any::<bool>()) {
            let mut b = bytes.clone();
            if keep_magic && b.len() >= 8 {
                b[..8].copy_from_slice(VOXEL_MAGIC);
            }
            let _ = decode_voxel_grid(&b);
            if keep_magic && b.len() >= 8 {
                b[..8].copy_from_slice(SPARSE_MAGIC);
            }
            let _ = decode_sparse_tensor(&b);
        }
    }
}
