//! Deterministic synthetic scenes: axis-aligned boxes (moving objects,
//! walls, ground slabs) sampled on their surface voxels.
//!
//! Geometry is defined in the reference frame (frame 0). Every sampled point
//! stays at least `min(0.05 m, voxel / 4)` away from its voxel's faces, so
//! the voxels it falls into are known exactly and are emitted alongside the
//! points as per-object, per-frame footprints.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{FrameLabels, PointCloud, PoseSE3};
use crate::voxel::{GridSpec, VoxelIndex};

const MAX_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub class: u16,
    pub instance: u16,
    /// Box size in meters.
    pub extent: [f64; 3],
    /// Box center in reference-frame meters, one per frame.
    pub centers: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneScript {
    pub objects: Vec<SceneObject>,
    pub frame_count: usize,
    /// Points sampled inside each surface voxel of each box.
    pub points_per_voxel: usize,
    pub seed: u64,
    /// Sensor pose of each frame in reference-frame coordinates; empty means
    /// a static sensor. When present, `ego[0]` must be the identity.
    pub ego: Vec<PoseSE3<f64>>,
}

impl SceneScript {
    pub fn validate(&self) -> Result<()> {
        if self.frame_count == 0 {
            return Err(Error::arg("scene needs at least one frame"));
        }
        if self.points_per_voxel == 0 {
            return Err(Error::arg("points_per_voxel must be at least 1"));
        }
        for (k, o) in self.objects.iter().enumerate() {
            if o.extent.iter().any(|e| !e.is_finite() || *e <= 0.0) {
                return Err(Error::arg(format!(
                    "object {k} has a degenerate box {:?}",
                    o.extent
                )));
            }
            if o.centers.len() != self.frame_count {
                return Err(Error::arg(format!(
                    "object {k} has {} centers for {} frames",
                    o.centers.len(),
                    self.frame_count
                )));
            }
            if o.centers.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::arg(format!("object {k} has a non-finite center")));
            }
        }
        if !self.ego.is_empty() {
            if self.ego.len() != self.frame_count {
                return Err(Error::arg("ego pose count differs from frame_count"));
            }
            if self.ego[0] != PoseSE3::identity() {
                return Err(Error::arg("ego pose of frame 0 must be the identity"));
            }
        }
        Ok(())
    }

    fn ego_pose(&self, frame: usize) -> PoseSE3<f64> {
        self.ego
            .get(frame)
            .copied()
            .unwrap_or_else(PoseSE3::identity)
    }

    /// Parses the `key=value` scene format:
    ///
    /// ```text
    /// frames=3
    /// points_per_voxel=2
    /// seed=7
    /// # class instance extent center [velocity-per-frame]
    /// object=1 1 1.0,0.6,0.6 10.1,0.1,1.0 1.0,0,0
    /// # optional sensor translation per frame
    /// ego_step=0.5,0,0
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut frames = None;
        let mut ppv = 1;
        let mut seed = 42;
        let mut ego_step: Option<[f64; 3]> = None;
        let mut raw_objects = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::FormatLine { line: line_no, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {line:?}")))?;
            let value = value.trim();
            match key.trim() {
                "frames" => {
                    frames = Some(
                        value
                            .parse()
                            .map_err(|_| bad(format!("bad frames {value:?}")))?,
                    )
                }
                "points_per_voxel" => {
                    ppv = value
                        .parse()
                        .map_err(|_| bad(format!("bad points_per_voxel {value:?}")))?
                }
                "seed" => {
                    seed = value
                        .parse()
                        .map_err(|_| bad(format!("bad seed {value:?}")))?
                }
                "ego_step" => {
                    ego_step = Some(
                        parse_vec3(value).ok_or_else(|| bad(format!("bad vector {value:?}")))?,
                    )
                }
                "object" => {
                    let f: Vec<&str> = value.split_whitespace().collect();
                    if f.len() != 4 && f.len() != 5 {
                        return Err(bad(
                            "object needs: class instance extent center [velocity]".into()
                        ));
                    }
                    let class = f[0]
                        .parse()
                        .map_err(|_| bad(format!("bad class {:?}", f[0])))?;
                    let instance = f[1]
                        .parse()
                        .map_err(|_| bad(format!("bad instance {:?}", f[1])))?;
                    let extent =
                        parse_vec3(f[2]).ok_or_else(|| bad(format!("bad extent {:?}", f[2])))?;
                    let center =
                        parse_vec3(f[3]).ok_or_else(|| bad(format!("bad center {:?}", f[3])))?;
                    let vel = match f.get(4) {
                        Some(v) => {
                            parse_vec3(v).ok_or_else(|| bad(format!("bad velocity {v:?}")))?
                        }
                        None => [0.0; 3],
                    };
                    raw_objects.push((class, instance, extent, center, vel));
                }
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        let frame_count: usize = frames.unwrap_or(1);
        let objects = raw_objects
            .into_iter()
            .map(|(class, instance, extent, c, v)| SceneObject {
                class,
                instance,
                extent,
                centers: (0..frame_count)
                    .map(|k| [0, 1, 2].map(|a| c[a] + v[a] * k as f64))
                    .collect(),
            })
            .collect();
        let ego = ego_step
            .map(|s| {
                (0..frame_count)
                    .map(|k| PoseSE3::from_translation(s.map(|v| v * k as f64)))
                    .collect()
            })
            .unwrap_or_default();
        let script = Self {
            objects,
            frame_count,
            points_per_voxel: ppv,
            seed,
            ego,
        };
        script.validate()?;
        Ok(script)
    }

    /// Random traffic scene: `moving` boxes in separate lanes along y, each
    /// translating along x, plus a static wall lane and a ground slab at the
    /// bottom voxel layer. Lanes never share voxels.
    pub fn random_traffic(
        seed: u64,
        spec: &GridSpec<f64>,
        moving: usize,
        frame_count: usize,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5ce0);
        let vs = spec.voxel_size();
        let dims = spec.dims();
        let origin = spec.origin();
        let moving_classes = [1u16, 4, 6, 7];
        let lanes = moving + 1;
        let lane_w = dims[1] / lanes;
        let mut objects = Vec::new();
        for lane in 0..lanes {
            // Box spans voxel rows [y0, y0 + wy) inside the lane with one row gap.
            let wy = rng.gen_range(1..=(lane_w.saturating_sub(2)).clamp(1, 4));
            let y0 = lane * lane_w + 1;
            let wx = rng.gen_range(1..=4usize.min(dims[0] / 4).max(1));
            let wz = rng.gen_range(1..=3usize.min(dims[2].saturating_sub(1)).max(1));
            let extent = [
                wx as f64 * vs[0] * 0.9,
                wy as f64 * vs[1] * 0.9,
                wz as f64 * vs[2] * 0.9,
            ];
            let x0 = rng.gen_range(0..dims[0].saturating_sub(wx).max(1));
            let center0 = [
                origin[0] + (x0 as f64 + wx as f64 / 2.0) * vs[0],
                origin[1] + (y0 as f64 + wy as f64 / 2.0) * vs[1],
                origin[2] + (1.0 + wz as f64 / 2.0) * vs[2],
            ];
            let (class, instance, step) = if lane < moving {
                let step_voxels =
                    rng.gen_range(1..=6) as f64 * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                (
                    moving_classes[lane % moving_classes.len()],
                    lane as u16 + 1,
                    step_voxels * vs[0],
                )
            } else {
                (13, 0, 0.0)
            };
            objects.push(SceneObject {
                class,
                instance,
                extent,
                centers: (0..frame_count)
                    .map(|k| [center0[0] + step * k as f64, center0[1], center0[2]])
                    .collect(),
            });
        }
        objects.push(SceneObject {
            class: 9,
            instance: 0,
            extent: [dims[0] as f64 * vs[0], dims[1] as f64 * vs[1], 0.5 * vs[2]],
            centers: vec![
                [
                    origin[0] + dims[0] as f64 * vs[0] / 2.0,
                    origin[1] + dims[1] as f64 * vs[1] / 2.0,
                    origin[2] + 0.5 * vs[2],
                ];
                frame_count
            ],
        });
        Self {
            objects,
            frame_count,
            points_per_voxel: 1 + (seed % 3) as usize,
            seed,
            ego: Vec::new(),
        }
    }
}

fn parse_vec3(s: &str) -> Option<[f64; 3]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse().ok())
        .collect::<Option<_>>()?;
    let arr: [f64; 3] = v.try_into().ok()?;
    arr.iter().all(|x| x.is_finite()).then_some(arr)
}

/// Voxels one object occupies in each frame, in reference-frame indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectFootprint {
    pub class: u16,
    pub instance: u16,
    pub per_frame: Vec<BTreeSet<VoxelIndex>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    /// Points in each frame's own sensor coordinates.
    pub frames: Vec<(PointCloud<f32>, FrameLabels)>,
    /// Sensor pose of each frame relative to frame 0 (KITTI pose-file semantics).
    pub poses: Vec<PoseSE3<f64>>,
    pub footprints: Vec<ObjectFootprint>,
}

impl SyntheticScene {
    /// `T_{k→0}` for every frame.
    pub fn transforms_to_reference(&self) -> Vec<PoseSE3<f64>> {
        self.poses
            .iter()
            .map(|p| PoseSE3::relative(&self.poses[0], p))
            .collect()
    }
}

/// Shell voxels of the box `[lo, hi]` (inclusive per axis), clipped to the grid.
fn shell_voxels(lo: [i64; 3], hi: [i64; 3], dims: [usize; 3]) -> Vec<VoxelIndex> {
    let mut out = Vec::new();
    let clip = |a: usize| (lo[a].max(0), hi[a].min(dims[a] as i64 - 1));
    let (x0, x1) = clip(0);
    let (y0, y1) = clip(1);
    let (z0, z1) = clip(2);
    for x in x0..=x1 {
        for y in y0..=y1 {
            for z in z0..=z1 {
                let v = [x, y, z];
                if (0..3).any(|a| v[a] == lo[a] || v[a] == hi[a]) {
                    out.push([x as usize, y as usize, z as usize]);
                }
            }
        }
    }
    out
}

/// Samples every frame of `script` on the voxel grid `spec`.
pub fn generate(script: &SceneScript, spec: &GridSpec<f64>) -> Result<SyntheticScene> {
    script.validate()?;
    let vs = spec.voxel_size();
    let origin = spec.origin();
    let dims = spec.dims();
    let margin = [0, 1, 2].map(|a| MAX_MARGIN.min(vs[a] / 4.0));
    let frames_n = script.frame_count;

    // (object, frame) -> (footprint, reference-frame points)
    let samples: Vec<(BTreeSet<VoxelIndex>, Vec<[f64; 3]>)> = (0..script.objects.len() * frames_n)
        .into_par_iter()
        .map(|job| {
            let (oi, frame) = (job / frames_n, job % frames_n);
            let obj = &script.objects[oi];
            let c = obj.centers[frame];
            let q = |a: usize, v: f64, nudge: f64| ((v - origin[a]) / vs[a] + nudge).floor() as i64;
            let lo = [0, 1, 2].map(|a| q(a, c[a] - obj.extent[a] / 2.0, 1e-9));
            let hi = [0, 1, 2].map(|a| q(a, c[a] + obj.extent[a] / 2.0, -1e-9).max(lo[a]));
            let voxels = shell_voxels(lo, hi, dims);
            let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
            rng.set_stream(job as u64);
            let mut pts = Vec::with_capacity(voxels.len() * script.points_per_voxel);
            for v in &voxels {
                for _ in 0..script.points_per_voxel {
                    pts.push([0, 1, 2].map(|a| {
                        let low = origin[a] + v[a] as f64 * vs[a];
                        low + margin[a] + rng.gen::<f64>() * (vs[a] - 2.0 * margin[a])
                    }));
                }
            }
            (voxels.into_iter().collect(), pts)
        })
        .collect();

    let mut frames = Vec::with_capacity(frames_n);
    for frame in 0..frames_n {
        let to_sensor = script.ego_pose(frame).inverse();
        let mut points = Vec::new();
        let mut semantic = Vec::new();
        let mut instance = Vec::new();
        for (oi, obj) in script.objects.iter().enumerate() {
            let (_, pts) = &samples[oi * frames_n + frame];
            for p in pts {
                let s = to_sensor.apply(*p);
                points.push(s.map(|v| v as f32));
            }
            semantic.extend(std::iter::repeat_n(obj.class, pts.len()));
            instance.extend(std::iter::repeat_n(obj.instance, pts.len()));
        }
        frames.push((
            PointCloud::new(points, None)?,
            FrameLabels::new(semantic, instance)?,
        ));
    }
    let footprints = script
        .objects
        .iter()
        .enumerate()
        .map(|(oi, obj)| ObjectFootprint {
            class: obj.class,
            instance: obj.instance,
            per_frame: (0..frames_n)
                .map(|f| samples[oi * frames_n + f].0.clone())
                .collect(),
        })
        .collect();
    let poses = (0..frames_n).map(|k| script.ego_pose(k)).collect();
    Ok(SyntheticScene {
        frames,
        poses,
        footprints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel::{default_grid_spec, voxelize_point};

    fn moving_box(frames: usize, seed: u64) -> SceneScript {
        SceneScript {
            objects: vec![SceneObject {
                class: 1,
                instance: 1,
                extent: [0.5, 0.5, 0.5],
                centers: (0..frames).map(|k| [10.3 + k as f64, 0.3, 0.3]).collect(),
            }],
            frame_count: frames,
            points_per_voxel: 2,
            seed,
            ego: Vec::new(),
        }
    }

    #[test]
    fn moving_box_footprints_shift_by_five_voxels() {
        let spec = default_grid_spec::<f64>();
        let scene = generate(&moving_box(3, 1), &spec).unwrap();
        let fp = &scene.footprints[0].per_frame;
        assert_eq!(fp.len(), 3);
        for k in 1..3 {
            let shifted: BTreeSet<VoxelIndex> =
                fp[0].iter().map(|v| [v[0] + 5 * k, v[1], v[2]]).collect();
            assert_eq!(fp[k], shifted);
            assert!(fp[k].is_disjoint(&fp[k - 1]));
        }
    }

    #[test]
    fn points_land_in_footprint() {
        let spec = default_grid_spec::<f64>();
        let mut script = moving_box(3, 4);
        script.ego = (0..3)
            .map(|k| {
                PoseSE3::from_yaw_translation(0.1 * k as f64, [0.7 * k as f64, 0.2 * k as f64, 0.0])
            })
            .collect();
        let scene = generate(&script, &spec).unwrap();
        let tfs = scene.transforms_to_reference();
        for (k, (pc, labels)) in scene.frames.iter().enumerate() {
            assert_eq!(labels.len(), pc.len());
            for p in pc.points() {
                let r = tfs[k].apply(p.map(f64::from));
                let v = voxelize_point(r, &spec).unwrap();
                assert!(scene.footprints[0].per_frame[k].contains(&v));
            }
        }
    }

    #[test]
    fn seed_changes_jitter_not_footprint() {
        let spec = default_grid_spec::<f64>();
        let a = generate(&moving_box(2, 1), &spec).unwrap();
        let b = generate(&moving_box(2, 2), &spec).unwrap();
        assert_eq!(a.footprints, b.footprints);
        assert_ne!(a.frames, b.frames);
        assert_eq!(a, generate(&moving_box(2, 1), &spec).unwrap());
    }

    #[test]
    fn degenerate_box_rejected() {
        let spec = default_grid_spec::<f64>();
        let mut s = moving_box(1, 0);
        s.objects[0].extent[1] = 0.0;
        assert!(matches!(generate(&s, &spec), Err(Error::Argument(_))));
        let mut s = moving_box(2, 0);
        s.objects[0].centers.pop();
        assert!(generate(&s, &spec).is_err());
    }

    #[test]
    fn parse_script() {
        let text = "frames=3\npoints_per_voxel=2\nseed=7\n# car\nobject=1 1 0.5,0.5,0.5 10.3,0.3,0.3 1,0,0\nobject=13 0 1,1,1 20,5,1\n";
        let s = SceneScript::parse(text).unwrap();
        assert_eq!(s.frame_count, 3);
        assert_eq!(s.seed, 7);
        assert_eq!(s.objects[0].centers[2], [12.3, 0.3, 0.3]);
        assert_eq!(s.objects[1].centers, vec![[20.0, 5.0, 1.0]; 3]);
        assert_eq!(s.points_per_voxel, 2);
        assert!(s.ego.is_empty());
        assert!(matches!(
            SceneScript::parse("frames=x"),
            Err(Error::FormatLine { line: 1, .. })
        ));
        assert!(SceneScript::parse("object=1 1 0,1,1 0,0,0").is_err());
        assert!(SceneScript::parse("bogus=1").is_err());
    }

    #[test]
    fn random_traffic_lanes_disjoint() {
        let spec = GridSpec::new([0.0, 0.0, 0.0], [12.8, 12.8, 3.2], [64, 64, 16], 20).unwrap();
        for seed in 0..20 {
            let script = SceneScript::random_traffic(seed, &spec, 1 + (seed % 4) as usize, 3);
            let scene = generate(&script, &spec).unwrap();
            let all: Vec<BTreeSet<VoxelIndex>> = scene
                .footprints
                .iter()
                .map(|f| f.per_frame.iter().flatten().copied().collect())
                .collect();
            for i in 0..all.len() {
                for j in i + 1..all.len() {
                    assert!(
                        all[i].is_disjoint(&all[j]),
                        "seed {seed}: objects {i} and {j} overlap"
                    );
                }
            }
        }
    }
}
