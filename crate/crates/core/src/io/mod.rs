//! Binary and text readers/writers.
//!
//! Point clouds and labels follow the SemanticKITTI layouts (`float32 x4`
//! per point, `u32` label words split 16/16). Poses use the KITTI odometry
//! 12-number line format. Voxel grids and sparse tensors use small
//! container formats with an 8-byte magic. Every multi-byte value is
//! little-endian, and every decoder is total: malformed bytes produce an
//! [`Error`](crate::Error), never a panic.

mod cloud;
mod grid;
mod pose;

pub use cloud::{
    decode_labels, decode_point_cloud, encode_labels, encode_point_cloud, read_labels,
    read_point_cloud, write_labels, write_point_cloud, FrameLabels, PointCloud,
};
pub use grid::{
    decode_sparse_tensor, decode_voxel_grid, encode_sparse_tensor, encode_voxel_grid,
    read_sparse_tensor, read_voxel_grid, write_sparse_tensor, write_voxel_grid, SPARSE_MAGIC,
    VOXEL_MAGIC,
};
pub use pose::{decode_poses, encode_poses, read_poses, write_poses, PoseSE3};

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
