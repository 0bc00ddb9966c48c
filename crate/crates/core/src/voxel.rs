//! Voxel-space geometry, point quantization, label voting and sparse
//! feature tensors.
//!
//! All grids use x-major linear order: `x * (W * H) + y * H + z`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::PointCloud;
use crate::scalar::Scalar;

/// Integer voxel coordinate `(x, y, z)`. Ordering is lexicographic.
pub type VoxelIndex = [usize; 3];

pub const DEFAULT_EMPTY_LABEL: u16 = 0;
pub const DEFAULT_IGNORE_LABEL: u16 = 255;

/// Geometry of the voxel space plus the label conventions used on it.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<T> {
    origin: [T; 3],
    extent: [T; 3],
    dims: [usize; 3],
    num_classes: u16,
    empty_label: u16,
    ignore_label: u16,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(origin: [T; 3], extent: [T; 3], dims: [usize; 3], num_classes: u16) -> Result<Self> {
        Self::with_labels(
            origin,
            extent,
            dims,
            num_classes,
            DEFAULT_EMPTY_LABEL,
            DEFAULT_IGNORE_LABEL,
        )
    }

    pub fn with_labels(
        origin: [T; 3],
        extent: [T; 3],
        dims: [usize; 3],
        num_classes: u16,
        empty_label: u16,
        ignore_label: u16,
    ) -> Result<Self> {
        if origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("grid origin must be finite"));
        }
        if extent.iter().any(|v| !v.is_finite() || *v <= T::zero()) {
            return Err(Error::arg("grid extent must be finite and positive"));
        }
        if dims.contains(&0) {
            return Err(Error::arg("grid dims must be at least 1"));
        }
        if dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .is_none()
        {
            return Err(Error::arg("grid dims overflow"));
        }
        if empty_label >= num_classes {
            return Err(Error::arg(format!(
                "empty label {empty_label} must be < num_classes {num_classes}"
            )));
        }
        if ignore_label < num_classes {
            return Err(Error::arg(format!(
                "ignore label {ignore_label} must be >= num_classes {num_classes}"
            )));
        }
        Ok(Self {
            origin,
            extent,
            dims,
            num_classes,
            empty_label,
            ignore_label,
        })
    }

    pub fn origin(&self) -> [T; 3] {
        self.origin
    }

    pub fn extent(&self) -> [T; 3] {
        self.extent
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn num_classes(&self) -> u16 {
        self.num_classes
    }

    pub fn empty_label(&self) -> u16 {
        self.empty_label
    }

    pub fn ignore_label(&self) -> u16 {
        self.ignore_label
    }

    pub fn voxel_size(&self) -> [T; 3] {
        [0, 1, 2].map(|a| self.extent[a] / T::lit(self.dims[a] as f64))
    }

    pub fn num_voxels(&self) -> usize {
        self.dims.iter().product()
    }

    /// Lower corner of a voxel in meters.
    pub fn voxel_lower(&self, idx: VoxelIndex) -> [T; 3] {
        let vs = self.voxel_size();
        [0, 1, 2].map(|a| self.origin[a] + T::lit(idx[a] as f64) * vs[a])
    }

    /// A label is admissible on this grid when it is a class id or the ignore sentinel.
    pub fn is_valid_label(&self, label: u16) -> bool {
        label < self.num_classes || label == self.ignore_label
    }

    pub fn cast<U: Scalar>(&self) -> GridSpec<U> {
        GridSpec {
            origin: self.origin.map(|v| U::lit(v.to_f64_lossy())),
            extent: self.extent.map(|v| U::lit(v.to_f64_lossy())),
            dims: self.dims,
            num_classes: self.num_classes,
            empty_label: self.empty_label,
            ignore_label: self.ignore_label,
        }
    }
}

/// SemanticKITTI completion volume: `[0, 51.2] x [-25.6, 25.6] x [-2, 4.4]` m
/// at 256 x 256 x 32, 20 classes (19 semantic + empty).
pub fn default_grid_spec<T: Scalar>() -> GridSpec<T> {
    GridSpec::new(
        [T::lit(0.0), T::lit(-25.6), T::lit(-2.0)],
        [T::lit(51.2), T::lit(51.2), T::lit(6.4)],
        [256, 256, 32],
        20,
    )
    .expect("default grid spec is valid")
}

/// Quantizes a point with half-open voxel intervals. Points outside the grid
/// (or non-finite ones) are filtered and yield `None`.
pub fn voxelize_point<T: Scalar>(p: [T; 3], spec: &GridSpec<T>) -> Option<VoxelIndex> {
    let vs = spec.voxel_size();
    let mut out = [0usize; 3];
    for a in 0..3 {
        let q = ((p[a] - spec.origin[a]) / vs[a]).floor();
        if q.is_nan() || q < T::zero() || q >= T::lit(spec.dims[a] as f64) {
            return None;
        }
        out[a] = q.to_usize()?;
        if out[a] >= spec.dims[a] {
            return None;
        }
    }
    Some(out)
}

#[inline]
pub fn linear_index(dims: [usize; 3], idx: VoxelIndex) -> usize {
    idx[0] * (dims[1] * dims[2]) + idx[1] * dims[2] + idx[2]
}

#[inline]
pub fn voxel_index(dims: [usize; 3], linear: usize) -> VoxelIndex {
    let plane = dims[1] * dims[2];
    [linear / plane, (linear % plane) / dims[2], linear % dims[2]]
}

/// Dense `L x W x H` grid of class labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoxelLabelGrid {
    dims: [usize; 3],
    labels: Vec<u16>,
}

impl VoxelLabelGrid {
    pub fn filled(dims: [usize; 3], label: u16) -> Self {
        Self {
            dims,
            labels: vec![label; dims.iter().product()],
        }
    }

    pub fn empty_for<T: Scalar>(spec: &GridSpec<T>) -> Self {
        Self::filled(spec.dims(), spec.empty_label())
    }

    pub fn from_labels(dims: [usize; 3], labels: Vec<u16>) -> Result<Self> {
        let expected = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::arg("grid dims overflow"))?;
        if labels.len() != expected {
            return Err(Error::arg(format!(
                "label count {} does not match dims {:?} ({expected} voxels)",
                labels.len(),
                dims
            )));
        }
        Ok(Self { dims, labels })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, idx: VoxelIndex) -> u16 {
        self.labels[linear_index(self.dims, idx)]
    }

    pub fn set(&mut self, idx: VoxelIndex, label: u16) {
        let li = linear_index(self.dims, idx);
        self.labels[li] = label;
    }

    pub fn count(&self, label: u16) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Indices of voxels carrying `label`, in linear (lexicographic) order.
    pub fn indices_of(&self, label: u16) -> Vec<VoxelIndex> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| voxel_index(self.dims, i))
            .collect()
    }

    /// Checks dims and label range against a grid spec.
    pub fn validate<T: Scalar>(&self, spec: &GridSpec<T>) -> Result<()> {
        if self.dims != spec.dims() {
            return Err(Error::arg(format!(
                "grid dims {:?} do not match spec dims {:?}",
                self.dims,
                spec.dims()
            )));
        }
        if let Some((i, &l)) = self
            .labels
            .iter()
            .enumerate()
            .find(|(_, &l)| !spec.is_valid_label(l))
        {
            return Err(Error::Data {
                index: i,
                msg: format!("label {l} is neither a class id nor the ignore sentinel"),
            });
        }
        Ok(())
    }
}

/// Collects `(linear voxel, class)` votes for every in-range, non-ignored point.
pub(crate) fn collect_votes<T: Scalar>(
    points: &[[T; 3]],
    semantic: &[u16],
    spec: &GridSpec<T>,
) -> Result<Vec<(usize, u16)>> {
    if points.len() != semantic.len() {
        return Err(Error::arg(format!(
            "{} points but {} semantic labels",
            points.len(),
            semantic.len()
        )));
    }
    if let Some((i, &l)) = semantic
        .iter()
        .enumerate()
        .find(|(_, &l)| !spec.is_valid_label(l))
    {
        return Err(Error::Data {
            index: i,
            msg: format!("semantic label {l} is out of range"),
        });
    }
    let ignore = spec.ignore_label();
    let dims = spec.dims();
    Ok(points
        .par_iter()
        .zip(semantic.par_iter())
        .filter(|(_, &l)| l != ignore)
        .filter_map(|(p, &l)| voxelize_point(*p, spec).map(|v| (linear_index(dims, v), l)))
        .collect())
}

/// Resolves votes by majority, ties to the lowest class id. Unvoted voxels
/// are `empty_label`.
pub(crate) fn majority_grid<T: Scalar>(
    mut votes: Vec<(usize, u16)>,
    spec: &GridSpec<T>,
) -> VoxelLabelGrid {
    votes.par_sort_unstable();
    let mut grid = VoxelLabelGrid::empty_for(spec);
    let mut i = 0;
    while i < votes.len() {
        let voxel = votes[i].0;
        let (mut best_class, mut best_count) = (votes[i].1, 0usize);
        while i < votes.len() && votes[i].0 == voxel {
            let class = votes[i].1;
            let mut count = 0;
            while i < votes.len() && votes[i] == (voxel, class) {
                count += 1;
                i += 1;
            }
            // Classes arrive ascending, so strict > keeps the lowest id on ties.
            if count > best_count {
                best_class = class;
                best_count = count;
            }
        }
        grid.labels[voxel] = best_class;
    }
    grid
}

/// Majority-vote voxelization of a labeled point cloud.
pub fn voxelize_labels<T: Scalar>(
    pc: &PointCloud<T>,
    semantic: &[u16],
    spec: &GridSpec<T>,
) -> Result<VoxelLabelGrid> {
    let votes = collect_votes(pc.points(), semantic, spec)?;
    Ok(majority_grid(votes, spec))
}

/// Dense `L x W x H x C` feature volume, channels contiguous per voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume<T> {
    dims: [usize; 3],
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> Volume<T> {
    pub fn zeros(dims: [usize; 3], channels: usize) -> Self {
        Self {
            dims,
            channels,
            data: vec![T::zero(); dims.iter().product::<usize>() * channels],
        }
    }

    pub fn from_data(dims: [usize; 3], channels: usize, data: Vec<T>) -> Result<Self> {
        let n = dims.iter().product::<usize>() * channels;
        if data.len() != n {
            return Err(Error::arg(format!(
                "volume data has {} values, expected {n}",
                data.len()
            )));
        }
        Ok(Self {
            dims,
            channels,
            data,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn num_voxels(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn voxel(&self, idx: VoxelIndex) -> &[T] {
        let o = linear_index(self.dims, idx) * self.channels;
        &self.data[o..o + self.channels]
    }

    pub fn voxel_mut(&mut self, idx: VoxelIndex) -> &mut [T] {
        let o = linear_index(self.dims, idx) * self.channels;
        &mut self.data[o..o + self.channels]
    }

    /// Max-norm of one voxel's feature vector.
    pub fn voxel_max_abs(&self, linear: usize) -> T {
        self.data[linear * self.channels..(linear + 1) * self.channels]
            .iter()
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Number of voxels with any nonzero channel.
    pub fn occupied_count(&self) -> usize {
        (0..self.num_voxels())
            .filter(|&i| self.voxel_max_abs(i) > T::zero())
            .count()
    }
}

/// Sorted voxel indices with one feature row each.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVoxelTensor<T> {
    dims: [usize; 3],
    channels: usize,
    indices: Vec<VoxelIndex>,
    features: Vec<T>,
}

impl<T: Scalar> SparseVoxelTensor<T> {
    /// Validates strict lexicographic order, bounds and row width.
    pub fn new(
        dims: [usize; 3],
        channels: usize,
        indices: Vec<VoxelIndex>,
        features: Vec<T>,
    ) -> Result<Self> {
        if features.len() != indices.len() * channels {
            return Err(Error::arg(format!(
                "{} feature values for {} rows of width {channels}",
                features.len(),
                indices.len()
            )));
        }
        for (i, idx) in indices.iter().enumerate() {
            if (0..3).any(|a| idx[a] >= dims[a]) {
                return Err(Error::Data {
                    index: i,
                    msg: format!("voxel index {idx:?} outside dims {dims:?}"),
                });
            }
            if i > 0 && indices[i - 1] >= *idx {
                return Err(Error::Data {
                    index: i,
                    msg: "voxel indices must be strictly increasing".into(),
                });
            }
        }
        Ok(Self {
            dims,
            channels,
            indices,
            features,
        })
    }

    pub fn empty(dims: [usize; 3], channels: usize) -> Self {
        Self {
            dims,
            channels,
            indices: Vec::new(),
            features: Vec::new(),
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn indices(&self) -> &[VoxelIndex] {
        &self.indices
    }

    pub fn features(&self) -> &[T] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.features[i * self.channels..(i + 1) * self.channels]
    }

    /// Linear scan of the sorted-index invariant.
    pub fn is_sorted_strict(&self) -> bool {
        self.indices.windows(2).all(|w| w[0] < w[1])
    }

    /// Keeps the rows at `rows` (ascending positions), preserving order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut indices = Vec::with_capacity(rows.len());
        let mut features = Vec::with_capacity(rows.len() * self.channels);
        for &r in rows {
            indices.push(self.indices[r]);
            features.extend_from_slice(self.row(r));
        }
        Self {
            dims: self.dims,
            channels: self.channels,
            indices,
            features,
        }
    }

    pub fn densify(&self) -> Volume<T> {
        let mut vol = Volume::zeros(self.dims, self.channels);
        for (i, idx) in self.indices.iter().enumerate() {
            vol.voxel_mut(*idx).copy_from_slice(self.row(i));
        }
        vol
    }
}

/// Extracts voxels whose feature max-norm exceeds `epsilon`, in lexicographic order.
///
/// Panics if `epsilon` is negative or NaN.
pub fn sparsify<T: Scalar>(volume: &Volume<T>, epsilon: T) -> SparseVoxelTensor<T> {
    assert!(epsilon >= T::zero(), "sparsify epsilon must be >= 0");
    let dims = volume.dims();
    let c = volume.channels();
    let mut indices = Vec::new();
    let mut features = Vec::new();
    for li in 0..volume.num_voxels() {
        if volume.voxel_max_abs(li) > epsilon {
            indices.push(voxel_index(dims, li));
            features.extend_from_slice(&volume.data()[li * c..(li + 1) * c]);
        }
    }
    SparseVoxelTensor {
        dims,
        channels: c,
        indices,
        features,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_spec() -> GridSpec<f64> {
        GridSpec::new([0.0, 0.0, 0.0], [0.8, 0.8, 0.8], [4, 4, 4], 4).unwrap()
    }

    #[test]
    fn default_spec_geometry() {
        let spec = default_grid_spec::<f64>();
        let vs = spec.voxel_size();
        for v in vs {
            assert!((v - 0.2).abs() < 1e-12);
        }
        assert_eq!(spec.num_voxels(), 2_097_152);
        assert_eq!(spec.num_classes(), 20);
        assert_eq!(spec.ignore_label(), 255);
        assert_eq!(spec.origin(), [0.0, -25.6, -2.0]);
        assert!(voxelize_point([0.0, 0.0, 0.0], &spec).is_some());
    }

    #[test]
    fn voxelize_point_examples() {
        let spec = default_grid_spec::<f64>();
        assert_eq!(voxelize_point([0.0, 0.0, 0.0], &spec), Some([0, 128, 10]));
        assert_eq!(voxelize_point(spec.origin(), &spec), Some([0, 0, 0]));
        assert_eq!(voxelize_point([60.0, 0.0, 0.0], &spec), None);
        assert_eq!(voxelize_point([51.2, 0.0, 0.0], &spec), None);
        assert_eq!(voxelize_point([-0.01, 0.0, 0.0], &spec), None);
        assert_eq!(voxelize_point([f64::NAN, 0.0, 0.0], &spec), None);
        let spec32 = default_grid_spec::<f32>();
        assert_eq!(
            voxelize_point([0.0f32, 0.0, 0.0], &spec32),
            Some([0, 128, 10])
        );
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(GridSpec::new([0.0; 3], [0.0, 1.0, 1.0], [1, 1, 1], 2).is_err());
        assert!(GridSpec::new([0.0; 3], [1.0; 3], [0, 1, 1], 2).is_err());
        assert!(GridSpec::with_labels([0.0; 3], [1.0; 3], [1, 1, 1], 2, 2, 255).is_err());
        assert!(GridSpec::with_labels([0.0; 3], [1.0; 3], [1, 1, 1], 2, 0, 1).is_err());
    }

    #[test]
    fn voxelize_labels_examples() {
        let spec = small_spec();
        let empty = PointCloud::<f64>::new(vec![], None).unwrap();
        let g = voxelize_labels(&empty, &[], &spec).unwrap();
        assert_eq!(g.count(0), 64);

        let pts = vec![[0.05, 0.05, 0.05], [0.1, 0.1, 0.1], [0.15, 0.05, 0.1]];
        let pc = PointCloud::new(pts.clone(), None).unwrap();
        let g = voxelize_labels(&pc, &[1, 1, 2], &spec).unwrap();
        assert_eq!(g.get([0, 0, 0]), 1);

        let pc2 = PointCloud::new(pts[..2].to_vec(), None).unwrap();
        let g = voxelize_labels(&pc2, &[2, 1], &spec).unwrap();
        assert_eq!(g.get([0, 0, 0]), 1, "tie goes to the lower class id");

        let g = voxelize_labels(&pc2, &[255, 3], &spec).unwrap();
        assert_eq!(g.get([0, 0, 0]), 3, "ignored points cast no vote");

        assert!(matches!(
            voxelize_labels(&pc, &[1, 1], &spec),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            voxelize_labels(&pc, &[1, 1, 9], &spec),
            Err(Error::Data { index: 2, .. })
        ));
    }

    #[test]
    fn sparsify_examples() {
        let vol = Volume::<f64>::zeros([4, 4, 4], 2);
        assert!(sparsify(&vol, 0.0).is_empty());

        let mut vol = Volume::<f64>::zeros([4, 4, 4], 2);
        vol.voxel_mut([3, 2, 1]).copy_from_slice(&[0.5, -0.2]);
        let s = sparsify(&vol, 0.0);
        assert_eq!(s.indices(), &[[3, 2, 1]]);
        assert_eq!(s.row(0), &[0.5, -0.2]);

        let mut vol = Volume::<f64>::zeros([4, 4, 4], 1);
        vol.voxel_mut([1, 0, 0])[0] = 1.0;
        vol.voxel_mut([0, 1, 0])[0] = 2.0;
        let s = sparsify(&vol, 0.0);
        assert_eq!(s.indices(), &[[0, 1, 0], [1, 0, 0]]);

        let mut vol = Volume::<f64>::zeros([2, 2, 2], 1);
        vol.voxel_mut([1, 1, 1])[0] = 1e-20;
        assert!(sparsify(&vol, 1e-12).is_empty());
        assert_eq!(sparsify(&vol, 0.0).len(), 1);
    }

    #[test]
    fn sparse_tensor_rejects_unsorted_and_out_of_bounds() {
        let dims = [2, 2, 2];
        assert!(
            SparseVoxelTensor::new(dims, 1, vec![[1, 0, 0], [0, 1, 0]], vec![1.0, 1.0]).is_err()
        );
        assert!(
            SparseVoxelTensor::new(dims, 1, vec![[0, 1, 0], [0, 1, 0]], vec![1.0, 1.0]).is_err()
        );
        assert!(SparseVoxelTensor::new(dims, 1, vec![[0, 2, 0]], vec![1.0]).is_err());
        assert!(SparseVoxelTensor::new(dims, 2, vec![[0, 1, 0]], vec![1.0]).is_err());
        let ok =
            SparseVoxelTensor::new(dims, 1, vec![[0, 1, 0], [1, 0, 0]], vec![1.0, 2.0]).unwrap();
        assert!(ok.is_sorted_strict());
    }

    #[test]
    fn grid_validate() {
        let spec = small_spec();
        let mut g = VoxelLabelGrid::empty_for(&spec);
        assert!(g.validate(&spec).is_ok());
        g.set([1, 1, 1], 255);
        assert!(g.validate(&spec).is_ok());
        g.set([1, 1, 2], 7);
        assert!(g.validate(&spec).is_err());
        let other = VoxelLabelGrid::filled([4, 4, 3], 0);
        assert!(other.validate(&spec).is_err());
    }

    proptest! {
        #[test]
        fn quantization_brackets_point(x in -1.0f64..60.0, y in -30.0f64..30.0, z in -3.0f64..5.0) {
            let spec = default_grid_spec::<f64>();
            let vs = spec.voxel_size();
            if let Some(idx) = voxelize_point([x, y, z], &spec) {
                let lo = spec.voxel_lower(idx);
                let p = [x, y, z];
                for a in 0..3 {
                    let slack = 1e-9 * (1.0 + p[a].abs());
                    prop_assert!(lo[a] <= p[a] + slack);
                    prop_assert!(p[a] < lo[a] + vs[a] + slack);
                }
            } else {
                let o = spec.origin();
                let e = spec.extent();
                let p = [x, y, z];
                prop_assert!((0..3).any(|a| p[a] < o[a] + 1e-9 || p[a] >= o[a] + e[a] - 1e-9));
            }
        }

        #[test]
        fn voxelize_labels_permutation_invariant(
            pts in proptest::collection::vec(((0usize..4, 0usize..4, 0usize..4), 0u16..4), 0..40),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let spec = small_spec();
            let points: Vec<[f64; 3]> = pts
                .iter()
                .map(|((x, y, z), _)| [*x as f64 * 0.2 + 0.1, *y as f64 * 0.2 + 0.1, *z as f64 * 0.2 + 0.1])
                .collect();
            let sem: Vec<u16> = pts.iter().map(|(_, c)| *c).collect();
            let pc = PointCloud::new(points.clone(), None).unwrap();
            let g1 = voxelize_labels(&pc, &sem, &spec).unwrap();
            let mut order: Vec<usize> = (0..points.len()).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let pc2 = PointCloud::new(order.iter().map(|&i| points[i]).collect(), None).unwrap();
            let sem2: Vec<u16> = order.iter().map(|&i| sem[i]).collect();
            let g2 = voxelize_labels(&pc2, &sem2, &spec).unwrap();
            prop_assert_eq!(g1, g2);
        }

        #[test]
        fn sparsify_densify_identity(
            entries in proptest::collection::btree_map((0usize..3, 0usize..4, 0usize..2), (-5.0f64..5.0, -5.0f64..5.0), 0..12)
        ) {
            let dims = [3, 4, 2];
            let mut indices = Vec::new();
            let mut feats = Vec::new();
            for ((x, y, z), (a, b)) in &entries {
                if *a == 0.0 && *b == 0.0 { continue; }
                indices.push([*x, *y, *z]);
                feats.extend_from_slice(&[*a, *b]);
            }
            let t = SparseVoxelTensor::new(dims, 2, indices, feats).unwrap();
            let back = sparsify(&t.densify(), 0.0);
            prop_assert!(back.is_sorted_strict());
            prop_assert_eq!(back, t);
        }
    }
}
