//! Completion labels: multi-frame concatenation and trace rectification.
//!
//! Concatenating the semantic labels of consecutive frames (after moving
//! every frame into the reference frame) produces a dense label volume, but
//! moving objects smear into long traces. [`rectify`] removes, for each
//! moving class, every voxel that lies outside the union of the per-instance
//! bounding cubes observed in the reference frame's panoptic labels.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{FrameLabels, PointCloud, PoseSE3};
use crate::scalar::Scalar;
use crate::voxel::{
    collect_votes, majority_grid, voxelize_point, GridSpec, VoxelIndex, VoxelLabelGrid,
};

/// Inclusive axis-aligned voxel bounds of one instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceCube {
    pub instance: u16,
    pub min: VoxelIndex,
    pub max: VoxelIndex,
}

impl InstanceCube {
    pub fn contains(&self, idx: VoxelIndex) -> bool {
        (0..3).all(|a| self.min[a] <= idx[a] && idx[a] <= self.max[a])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RectifyConfig {
    pub moving_classes: BTreeSet<u16>,
    pub unlabeled_class: u16,
}

impl RectifyConfig {
    pub fn new(moving_classes: impl IntoIterator<Item = u16>, unlabeled_class: u16) -> Self {
        Self {
            moving_classes: moving_classes.into_iter().collect(),
            unlabeled_class,
        }
    }

    /// car, bicycle, motorcycle, truck, other-vehicle, person, bicyclist, motorcyclist.
    pub fn semantic_kitti() -> Self {
        Self::new(1..=8, crate::voxel::DEFAULT_IGNORE_LABEL)
    }

    /// person, rider, car.
    pub fn semantic_poss() -> Self {
        Self::new([1, 2, 3], crate::voxel::DEFAULT_IGNORE_LABEL)
    }

    pub fn validate<T: Scalar>(&self, spec: &GridSpec<T>) -> Result<()> {
        if let Some(c) = self
            .moving_classes
            .iter()
            .find(|&&c| c == 0 || c >= spec.num_classes() || c == spec.empty_label())
        {
            return Err(Error::arg(format!(
                "moving class {c} must be a non-empty class id"
            )));
        }
        if self.unlabeled_class != spec.ignore_label() {
            return Err(Error::arg(format!(
                "unlabeled class {} must equal the ignore sentinel {}",
                self.unlabeled_class,
                spec.ignore_label()
            )));
        }
        Ok(())
    }
}

/// Moves every frame into the reference frame with `transforms[k]` and
/// majority-votes the concatenated labeled points.
///
/// `transforms[0]` is expected to be the identity.
pub fn aggregate_completion_labels<T: Scalar>(
    frames: &[(PointCloud<T>, Vec<u16>)],
    transforms: &[PoseSE3<T>],
    spec: &GridSpec<T>,
) -> Result<VoxelLabelGrid> {
    if frames.len() != transforms.len() {
        return Err(Error::arg(format!(
            "{} frames but {} transforms",
            frames.len(),
            transforms.len()
        )));
    }
    let per_frame: Vec<Vec<(usize, u16)>> = frames
        .par_iter()
        .zip(transforms.par_iter())
        .map(|((pc, sem), tf)| {
            let moved: Vec<[T; 3]> = pc.points().iter().map(|p| tf.apply(*p)).collect();
            collect_votes(&moved, sem, spec)
        })
        .collect::<Result<_>>()?;
    let votes = per_frame.into_iter().flatten().collect();
    Ok(majority_grid(votes, spec))
}

/// Per-instance voxel bounds of the points labeled `class_id`, ordered by
/// instance id. Instances without in-range points are omitted.
pub fn instance_cubes<T: Scalar>(
    pc: &PointCloud<T>,
    labels: &FrameLabels,
    class_id: u16,
    spec: &GridSpec<T>,
) -> Vec<InstanceCube> {
    let mut bounds: BTreeMap<u16, (VoxelIndex, VoxelIndex)> = BTreeMap::new();
    for ((p, &sem), &inst) in pc
        .points()
        .iter()
        .zip(&labels.semantic)
        .zip(&labels.instance)
    {
        if sem != class_id {
            continue;
        }
        let Some(v) = voxelize_point(*p, spec) else {
            continue;
        };
        let e = bounds.entry(inst).or_insert((v, v));
        for (a, &va) in v.iter().enumerate() {
            e.0[a] = e.0[a].min(va);
            e.1[a] = e.1[a].max(va);
        }
    }
    bounds
        .into_iter()
        .map(|(instance, (min, max))| InstanceCube { instance, min, max })
        .collect()
}

/// Number of voxels relabeled to the unlabeled class, per moving class.
pub type RemovalCounts = BTreeMap<u16, usize>;

/// Removes moving-class voxels outside the reference frame's instance cubes.
pub fn rectify<T: Scalar>(
    grid: &VoxelLabelGrid,
    pc: &PointCloud<T>,
    labels: &FrameLabels,
    cfg: &RectifyConfig,
    spec: &GridSpec<T>,
) -> Result<VoxelLabelGrid> {
    rectify_counted(grid, pc, labels, cfg, spec).map(|(g, _)| g)
}

/// [`rectify`] that also reports removals per moving class.
pub fn rectify_counted<T: Scalar>(
    grid: &VoxelLabelGrid,
    pc: &PointCloud<T>,
    labels: &FrameLabels,
    cfg: &RectifyConfig,
    spec: &GridSpec<T>,
) -> Result<(VoxelLabelGrid, RemovalCounts)> {
    if grid.dims() != spec.dims() {
        return Err(Error::arg(format!(
            "grid dims {:?} do not match spec dims {:?}",
            grid.dims(),
            spec.dims()
        )));
    }
    if labels.len() != pc.len() {
        return Err(Error::arg(format!(
            "{} labels for {} points",
            labels.len(),
            pc.len()
        )));
    }
    // None: the frame has no points of this class, so every voxel of it goes.
    let cubes: BTreeMap<u16, Option<Vec<InstanceCube>>> = cfg
        .moving_classes
        .par_iter()
        .map(|&c| {
            let present = labels.semantic.contains(&c);
            (c, present.then(|| instance_cubes(pc, labels, c, spec)))
        })
        .collect();

    let dims = grid.dims();
    let mut out = grid.clone();
    let mut removed: RemovalCounts = cfg.moving_classes.iter().map(|&c| (c, 0)).collect();
    for li in 0..grid.len() {
        let label = grid.labels()[li];
        let Some(class_cubes) = cubes.get(&label) else {
            continue;
        };
        let idx = crate::voxel::voxel_index(dims, li);
        let keep = class_cubes
            .as_ref()
            .is_some_and(|cs| cs.iter().any(|c| c.contains(idx)));
        if !keep {
            out.set(idx, cfg.unlabeled_class);
            *removed.get_mut(&label).expect("moving class") += 1;
        }
    }
    Ok((out, removed))
}
