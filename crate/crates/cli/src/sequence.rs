//! SemanticKITTI-style sequence directories:
//! `velodyne/NNNNNN.bin`, `labels/NNNNNN.label` and `poses.txt`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ssc_core::io::{self, FrameLabels, PointCloud, PoseSE3};

use crate::config::{semantic_kitti_train_id, Remap};

pub struct Sequence {
    root: PathBuf,
}

impl Sequence {
    pub fn open(root: &Path) -> Result<Self> {
        if !root.is_dir() {
            bail!("sequence directory {} does not exist", root.display());
        }
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn create(root: &Path) -> Result<Self> {
        for sub in ["velodyne", "labels"] {
            let d = root.join(sub);
            std::fs::create_dir_all(&d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn points_path(&self, frame: usize) -> PathBuf {
        self.root.join("velodyne").join(format!("{frame:06}.bin"))
    }

    pub fn labels_path(&self, frame: usize) -> PathBuf {
        self.root.join("labels").join(format!("{frame:06}.label"))
    }

    pub fn poses_path(&self) -> PathBuf {
        self.root.join("poses.txt")
    }

    pub fn poses(&self) -> Result<Vec<PoseSE3<f64>>> {
        Ok(io::read_poses(self.poses_path())?)
    }

    /// Points and labels of one frame, with the semantic ids optionally
    /// mapped to training ids (unmapped ids become `ignore`).
    pub fn frame(
        &self,
        frame: usize,
        remap: Remap,
        ignore: u16,
    ) -> Result<(PointCloud<f64>, FrameLabels)> {
        let pc = io::read_point_cloud(self.points_path(frame))?;
        let mut labels = io::read_labels(self.labels_path(frame))?;
        if labels.len() != pc.len() {
            bail!(
                "frame {frame}: {} labels for {} points ({})",
                labels.len(),
                pc.len(),
                self.labels_path(frame).display()
            );
        }
        if remap == Remap::SemanticKitti {
            labels.remap(|raw| semantic_kitti_train_id(raw).unwrap_or(ignore));
        }
        Ok((pc.cast(), labels))
    }

    pub fn write_frame(
        &self,
        frame: usize,
        pc: &PointCloud<f32>,
        labels: &FrameLabels,
    ) -> Result<()> {
        io::write_point_cloud(pc, self.points_path(frame))?;
        io::write_labels(labels, self.labels_path(frame))?;
        Ok(())
    }
}
