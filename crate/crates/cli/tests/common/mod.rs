#![allow(dead_code)]

use std::path::Path;

use ssc_core::io::{self, FrameLabels, PointCloud, PoseSE3};
use ssc_core::voxel::SparseVoxelTensor;

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn ssc(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("ssc").chain(args.iter().copied());
    let code = ssc_cli::run_with(argv, None, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Value of `key=value` in command output.
pub fn value(stdout: &str, key: &str) -> String {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {stdout}"))
        .to_string()
}

pub const SMALL_GRID: &str =
    "grid.origin=0,-6.4,-1.6\ngrid.extent=12.8,12.8,3.2\ngrid.dims=64,64,16\n";

pub fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.cfg");
    std::fs::write(&path, body).unwrap();
    p(&path).to_string()
}

/// Writes one frame of a sequence directory by hand.
pub fn write_frame(
    seq: &Path,
    k: usize,
    points: Vec<[f32; 3]>,
    semantic: Vec<u16>,
    instance: Vec<u16>,
) {
    std::fs::create_dir_all(seq.join("velodyne")).unwrap();
    std::fs::create_dir_all(seq.join("labels")).unwrap();
    let pc = PointCloud::new(points, None).unwrap();
    io::write_point_cloud(&pc, seq.join(format!("velodyne/{k:06}.bin"))).unwrap();
    io::write_labels(
        &FrameLabels::new(semantic, instance).unwrap(),
        seq.join(format!("labels/{k:06}.label")),
    )
    .unwrap();
}

pub fn write_poses(seq: &Path, poses: &[PoseSE3<f64>]) {
    io::write_poses(poses, seq.join("poses.txt")).unwrap();
}

pub fn write_tensor(path: &Path, idx: &[[usize; 3]], feats: &[f32], c: usize) {
    let t = SparseVoxelTensor::new([8, 8, 8], c, idx.to_vec(), feats.to_vec()).unwrap();
    io::write_sparse_tensor(&t, path).unwrap();
}
