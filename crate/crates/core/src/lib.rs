//! Core algorithms for LiDAR semantic scene completion.
//!
//! * [`labels`]: multi-frame completion-label aggregation and removal of
//!   moving-object traces using per-instance bounding cubes.
//! * [`net`]: bias-free, normalization-free dense 3D convolutions, multi-path
//!   blocks and the three-branch completion network. Empty input stays empty
//!   outside the receptive field.
//! * [`distill`]: dense-to-sparse distillation between index-aligned sparse
//!   teacher and student features via pairwise cosine similarity.
//! * [`losses`]: cross-entropy, Lovász-softmax and the weighted total.
//! * [`metrics`]: confusion matrix, per-class IoU, mIoU, completion IoU.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); `*F32` and
//! `*F64` aliases below name the concrete instantiations.

pub mod distill;
pub mod error;
pub mod io;
pub mod labels;
pub mod losses;
pub mod metrics;
pub mod net;
pub mod scalar;
pub mod synthgen;
pub mod voxel;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type PointCloudF32 = io::PointCloud<f32>;
pub type PointCloudF64 = io::PointCloud<f64>;
pub type PoseF32 = io::PoseSE3<f32>;
pub type PoseF64 = io::PoseSE3<f64>;
pub type GridSpecF32 = voxel::GridSpec<f32>;
pub type GridSpecF64 = voxel::GridSpec<f64>;
pub type VolumeF32 = voxel::Volume<f32>;
pub type VolumeF64 = voxel::Volume<f64>;
pub type SparseTensorF32 = voxel::SparseVoxelTensor<f32>;
pub type SparseTensorF64 = voxel::SparseVoxelTensor<f64>;
pub type CompletionParamsF32 = net::CompletionParams<f32>;
pub type CompletionParamsF64 = net::CompletionParams<f64>;
pub type ProbVolumeF32 = losses::ProbVolume<f32>;
pub type ProbVolumeF64 = losses::ProbVolume<f64>;
