//! Slow, obviously-correct reference implementations and random instance
//! generators shared by the test suites.
//!
//! Nothing here reuses the optimized code paths of `ssc-core`: convolutions
//! visit every output and every tap, rectification materializes one dense
//! mask per class, alignment goes through a map, and gradients are checked
//! against central differences.

#![allow(clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use ssc_core::io::{FrameLabels, PointCloud};
use ssc_core::net::{CompletionParams, ConvKernel, MPBParams};
use ssc_core::synthgen::SyntheticScene;
use ssc_core::voxel::{GridSpec, Volume, VoxelIndex, VoxelLabelGrid};
use ssc_core::Scalar;

/// Step used by every finite-difference check.
pub const FD_STEP: f64 = 1e-5;

// ---------------------------------------------------------------- voxels

/// Voxel of a point by direct comparison against every cell boundary.
pub fn voxelize_scan(p: [f64; 3], spec: &GridSpec<f64>) -> Option<VoxelIndex> {
    let vs = spec.voxel_size();
    let o = spec.origin();
    let dims = spec.dims();
    let mut idx = [0usize; 3];
    for a in 0..3 {
        let hit = (0..dims[a]).find(|&i| {
            let lo = o[a] + i as f64 * vs[a];
            lo <= p[a] && p[a] < lo + vs[a]
        })?;
        idx[a] = hit;
    }
    Some(idx)
}

/// Majority vote by explicit per-voxel histograms; ties go to the lowest id.
pub fn vote_grid(points: &[[f64; 3]], labels: &[u16], spec: &GridSpec<f64>) -> VoxelLabelGrid {
    let mut hist: HashMap<VoxelIndex, BTreeMap<u16, usize>> = HashMap::new();
    for (p, &l) in points.iter().zip(labels) {
        if l == spec.ignore_label() {
            continue;
        }
        if let Some(v) = ssc_core::voxel::voxelize_point(*p, spec) {
            *hist.entry(v).or_default().entry(l).or_insert(0) += 1;
        }
    }
    let mut grid = VoxelLabelGrid::empty_for(spec);
    for (v, h) in hist {
        let best = h.values().copied().max().unwrap_or(0);
        let label = h.iter().find(|(_, &n)| n == best).map(|(&l, _)| l).unwrap();
        grid.set(v, label);
    }
    grid
}

// ---------------------------------------------------------- rectification

/// Trace removal with one dense inclusive-box mask per moving class.
pub fn rectify_dense(
    grid: &VoxelLabelGrid,
    pc: &PointCloud<f64>,
    labels: &FrameLabels,
    moving: &BTreeSet<u16>,
    unlabeled: u16,
    spec: &GridSpec<f64>,
) -> VoxelLabelGrid {
    let dims = spec.dims();
    let mut out = grid.clone();
    for &c in moving {
        let mut boxes: BTreeMap<u16, ([usize; 3], [usize; 3])> = BTreeMap::new();
        for (k, p) in pc.points().iter().enumerate() {
            if labels.semantic[k] != c {
                continue;
            }
            let Some(v) = voxelize_scan(*p, spec) else {
                continue;
            };
            let b = boxes.entry(labels.instance[k]).or_insert((v, v));
            for a in 0..3 {
                b.0[a] = b.0[a].min(v[a]);
                b.1[a] = b.1[a].max(v[a]);
            }
        }
        let mut mask = vec![vec![vec![false; dims[2]]; dims[1]]; dims[0]];
        for (lo, hi) in boxes.values() {
            for x in lo[0]..=hi[0] {
                for y in lo[1]..=hi[1] {
                    for z in lo[2]..=hi[2] {
                        mask[x][y][z] = true;
                    }
                }
            }
        }
        for x in 0..dims[0] {
            for y in 0..dims[1] {
                for z in 0..dims[2] {
                    if grid.get([x, y, z]) == c && !mask[x][y][z] {
                        out.set([x, y, z], unlabeled);
                    }
                }
            }
        }
    }
    out
}

/// Voxels that the analytic scene model says rectification must clear: for
/// each moving class, every voxel any object of that class visits in any
/// frame, minus the inclusive bounding boxes of the frame-0 footprints.
///
/// Only valid when objects never share voxels, which holds for
/// `SceneScript::random_traffic`.
pub fn analytic_trace_minus_cube(
    scene: &SyntheticScene,
    moving: &BTreeSet<u16>,
) -> BTreeSet<VoxelIndex> {
    let mut removed = BTreeSet::new();
    for &c in moving {
        let objs: Vec<_> = scene.footprints.iter().filter(|f| f.class == c).collect();
        let cubes: Vec<(VoxelIndex, VoxelIndex)> =
            objs.iter().filter_map(|f| bbox(&f.per_frame[0])).collect();
        for f in &objs {
            for v in f.per_frame.iter().flatten() {
                let inside = cubes
                    .iter()
                    .any(|(lo, hi)| (0..3).all(|a| lo[a] <= v[a] && v[a] <= hi[a]));
                if !inside {
                    removed.insert(*v);
                }
            }
        }
    }
    removed
}

/// Union of all footprints of the given class across every frame.
pub fn footprint_union(scene: &SyntheticScene, class: u16) -> BTreeSet<VoxelIndex> {
    scene
        .footprints
        .iter()
        .filter(|f| f.class == class)
        .flat_map(|f| f.per_frame.iter().flatten().copied())
        .collect()
}

fn bbox(set: &BTreeSet<VoxelIndex>) -> Option<(VoxelIndex, VoxelIndex)> {
    let first = *set.iter().next()?;
    Some(set.iter().fold((first, first), |(mut lo, mut hi), v| {
        for a in 0..3 {
            lo[a] = lo[a].min(v[a]);
            hi[a] = hi[a].max(v[a]);
        }
        (lo, hi)
    }))
}

/// Indices whose labels differ between two grids of equal dims.
pub fn changed_voxels(before: &VoxelLabelGrid, after: &VoxelLabelGrid) -> BTreeSet<VoxelIndex> {
    let dims = before.dims();
    let mut out = BTreeSet::new();
    for x in 0..dims[0] {
        for y in 0..dims[1] {
            for z in 0..dims[2] {
                if before.get([x, y, z]) != after.get([x, y, z]) {
                    out.insert([x, y, z]);
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------- network

/// Zero-padded cross-correlation that visits every output and every tap.
pub fn conv3d_dense(input: &Volume<f64>, kernel: &ConvKernel<f64>) -> Volume<f64> {
    let dims = input.dims();
    let (k, r) = (kernel.k(), kernel.radius() as i64);
    let mut out = Volume::zeros(dims, kernel.c_out());
    for x in 0..dims[0] {
        for y in 0..dims[1] {
            for z in 0..dims[2] {
                let mut acc = vec![0.0; kernel.c_out()];
                for kx in 0..k {
                    for ky in 0..k {
                        for kz in 0..k {
                            let src = [
                                x as i64 + kx as i64 - r,
                                y as i64 + ky as i64 - r,
                                z as i64 + kz as i64 - r,
                            ];
                            if (0..3).any(|a| src[a] < 0 || src[a] >= dims[a] as i64) {
                                continue;
                            }
                            let f = input.voxel(src.map(|v| v as usize));
                            for (co, a) in acc.iter_mut().enumerate() {
                                for (ci, &fv) in f.iter().enumerate() {
                                    *a += fv * kernel.weight([kx, ky, kz], ci, co);
                                }
                            }
                        }
                    }
                }
                out.voxel_mut([x, y, z]).copy_from_slice(&acc);
            }
        }
    }
    out
}

fn add(a: &Volume<f64>, b: &Volume<f64>) -> Volume<f64> {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Volume::from_data(a.dims(), a.channels(), data).unwrap()
}

pub fn mpb_dense(input: &Volume<f64>, p: &MPBParams<f64>) -> Volume<f64> {
    let s = add(
        &add(&conv3d_dense(input, &p.k3), &conv3d_dense(input, &p.k5)),
        &conv3d_dense(input, &p.k7),
    );
    let data = s.data().iter().map(|v| v.max(0.0)).collect();
    Volume::from_data(s.dims(), s.channels(), data).unwrap()
}

pub fn completion_dense(input: &Volume<f64>, p: &CompletionParams<f64>) -> Volume<f64> {
    let upper = mpb_dense(input, &p.upper_mpb);
    let mid = conv3d_dense(input, &p.mid_in);
    let mid = mpb_dense(&mid, &p.mid_mpb1);
    let mid = mpb_dense(&mid, &p.mid_mpb2);
    let mid = conv3d_dense(&mid, &p.mid_out);
    add(&add(&upper, &mid), input)
}

/// Voxels within Chebyshev distance `r` of any listed voxel, by exhaustive scan.
pub fn chebyshev_neighborhood(
    dims: [usize; 3],
    seeds: &[VoxelIndex],
    r: usize,
) -> BTreeSet<VoxelIndex> {
    let mut out = BTreeSet::new();
    for x in 0..dims[0] {
        for y in 0..dims[1] {
            for z in 0..dims[2] {
                let v = [x, y, z];
                if seeds
                    .iter()
                    .any(|s| (0..3).all(|a| s[a].abs_diff(v[a]) <= r))
                {
                    out.insert(v);
                }
            }
        }
    }
    out
}

/// Indices of voxels with at least one nonzero channel.
pub fn support<T: Scalar>(v: &Volume<T>) -> BTreeSet<VoxelIndex> {
    (0..v.num_voxels())
        .filter(|&li| v.voxel_max_abs(li) != T::zero())
        .map(|li| ssc_core::voxel::voxel_index(v.dims(), li))
        .collect()
}

// --------------------------------------------------------------- numerics

/// Gradients whose largest entry is below this are compared absolutely.
/// Without it an exactly-zero gradient (one row, or one channel) would be
/// judged on pure round-off.
pub const GRAD_SCALE_FLOOR: f64 = 1e-10;

/// `max |a − b| / max(max |a|, max |b|, tiny)`.
pub fn rel_err_inf(a: &[f64], b: &[f64]) -> f64 {
    rel_err_floor(a, b, 1e-300)
}

/// [`rel_err_inf`] with the denominator clamped to [`GRAD_SCALE_FLOOR`].
pub fn grad_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    rel_err_floor(analytic, numeric, GRAD_SCALE_FLOOR)
}

fn rel_err_floor(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = a.iter().chain(b).fold(0.0f64, |m, x| m.max(x.abs()));
    diff / scale.max(floor)
}

/// Central-difference gradient of `f` at `x`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central difference of `f` along direction `d`.
pub fn fd_directional(f: impl Fn(&[f64]) -> f64, x: &[f64], d: &[f64], h: f64) -> f64 {
    let shifted = |s: f64| -> Vec<f64> { x.iter().zip(d).map(|(a, b)| a + s * b).collect() };
    (f(&shifted(h)) - f(&shifted(-h))) / (2.0 * h)
}

/// Entrywise mean of squared differences between two cosine-similarity
/// matrices, computed straight from the definition.
pub fn dskd_loss_naive(student: &[f64], teacher: &[f64], c: usize) -> f64 {
    let cos = |f: &[f64], i: usize, j: usize| {
        let (a, b) = (&f[i * c..(i + 1) * c], &f[j * c..(j + 1) * c]);
        let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if na <= 1e-12 || nb <= 1e-12 {
            0.0
        } else {
            a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
        }
    };
    let n = student.len() / c;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = cos(student, i, j) - cos(teacher, i, j);
            s += d * d;
        }
    }
    s / (n * n) as f64
}

/// Row-wise softmax of `logits` (`m x c`).
pub fn softmax_rows(logits: &[f64], c: usize) -> Vec<f64> {
    logits
        .chunks_exact(c)
        .flat_map(|row| {
            let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = row.iter().map(|v| (v - mx).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(move |v| v / s)
        })
        .collect()
}

// ------------------------------------------------------------- generators

/// Volume whose voxels are nonzero with probability `density`.
pub fn random_volume(
    rng: &mut impl Rng,
    dims: [usize; 3],
    channels: usize,
    density: f64,
) -> Volume<f64> {
    let mut v = Volume::zeros(dims, channels);
    for chunk in v.data_mut().chunks_exact_mut(channels) {
        if rng.gen_bool(density) {
            chunk.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        }
    }
    v
}

/// Grid with labels uniform over `0..num_classes`, plus `ignore` with
/// probability `p_ignore`.
pub fn random_grid(
    rng: &mut impl Rng,
    dims: [usize; 3],
    num_classes: u16,
    ignore: u16,
    p_ignore: f64,
) -> VoxelLabelGrid {
    let n = dims.iter().product();
    let labels = (0..n)
        .map(|_| {
            if rng.gen_bool(p_ignore) {
                ignore
            } else {
                rng.gen_range(0..num_classes)
            }
        })
        .collect();
    VoxelLabelGrid::from_labels(dims, labels).unwrap()
}

pub fn random_features(rng: &mut impl Rng, n: usize, c: usize) -> Vec<f64> {
    (0..n * c).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Sorted strictly increasing random voxel indices within `dims`.
pub fn random_indices(rng: &mut impl Rng, dims: [usize; 3], n: usize) -> Vec<VoxelIndex> {
    let mut set = BTreeSet::new();
    let total: usize = dims.iter().product();
    while set.len() < n.min(total) {
        set.insert([0, 1, 2].map(|a| rng.gen_range(0..dims[a])));
    }
    set.into_iter().collect()
}

/// Reference alignment: look up every student index in a map of the teacher.
pub fn align_by_map(s_idx: &[VoxelIndex], t_idx: &[VoxelIndex]) -> Vec<(usize, usize)> {
    let lookup: HashMap<VoxelIndex, usize> =
        t_idx.iter().enumerate().map(|(j, v)| (*v, j)).collect();
    s_idx
        .iter()
        .enumerate()
        .filter_map(|(i, v)| lookup.get(v).map(|&j| (i, j)))
        .collect()
}
