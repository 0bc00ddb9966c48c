use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use ssc_core::distill::{align, dskd_loss_aligned};
use ssc_core::io::{self, PoseSE3};
use ssc_core::labels::{aggregate_completion_labels, rectify_counted};
use ssc_core::metrics::{CompletionCounts, ConfusionMatrix, EvalReport};
use ssc_core::net::{completion_forward, dilate, read_params, CompletionParams};
use ssc_core::synthgen::{generate, SceneScript};
use ssc_core::voxel::{voxelize_labels, SparseVoxelTensor, Volume, VoxelLabelGrid};

use crate::config::{Remap, RunConfig};
use crate::gradcheck;
use crate::sequence::Sequence;

/// Successful run, or a verification failure (exit 1). Input and usage
/// problems are returned as errors (exit 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    VerificationFailed,
}

pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub out: &'a mut dyn Write,
}

fn remap_or(cfg: &RunConfig, flag: Option<Remap>) -> Remap {
    flag.unwrap_or(cfg.remap)
}

pub fn aggregate(
    ctx: Ctx,
    seq_dir: &Path,
    start: usize,
    frames: usize,
    out: &Path,
    remap: Option<Remap>,
) -> Result<Outcome> {
    if frames == 0 {
        bail!("--frames must be at least 1");
    }
    let seq = Sequence::open(seq_dir)?;
    let poses = seq.poses()?;
    let end = start + frames;
    if poses.len() < end {
        bail!(
            "{} holds {} poses but frames {start}..{end} were requested",
            seq.poses_path().display(),
            poses.len()
        );
    }
    let remap = remap_or(ctx.cfg, remap);
    let ignore = ctx.cfg.grid.ignore_label();
    let loaded = (start..end)
        .into_par_iter()
        .map(|k| seq.frame(k, remap, ignore).map(|(pc, l)| (pc, l.semantic)))
        .collect::<Result<Vec<_>>>()?;
    let transforms: Vec<PoseSE3<f64>> = (start..end)
        .map(|k| PoseSE3::relative(&poses[start], &poses[k]))
        .collect();
    let grid = aggregate_completion_labels(&loaded, &transforms, &ctx.cfg.grid)?;
    io::write_voxel_grid(&grid, out)?;
    let occupied = grid.len() - grid.count(ctx.cfg.grid.empty_label());
    writeln!(ctx.out, "frames={frames}")?;
    writeln!(ctx.out, "occupied_voxels={occupied}")?;
    Ok(Outcome::Ok)
}

pub fn rectify(
    ctx: Ctx,
    grid_path: &Path,
    seq_dir: &Path,
    frame: usize,
    out: &Path,
    remap: Option<Remap>,
) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let grid = io::read_voxel_grid(grid_path)?;
    if grid.dims() != cfg.grid.dims() {
        bail!(
            "{} has dims {:?} but the configured grid is {:?}",
            grid_path.display(),
            grid.dims(),
            cfg.grid.dims()
        );
    }
    grid.validate(&cfg.grid)
        .with_context(|| format!("in {}", grid_path.display()))?;
    let seq = Sequence::open(seq_dir)?;
    let (pc, labels) = seq.frame(frame, remap_or(cfg, remap), cfg.grid.ignore_label())?;
    let (rectified, counts) = rectify_counted(&grid, &pc, &labels, &cfg.rectify, &cfg.grid)?;
    io::write_voxel_grid(&rectified, out)?;
    for (class, n) in &counts {
        writeln!(ctx.out, "removed.{}={n}", class_name(cfg, *class))?;
    }
    writeln!(ctx.out, "removed_total={}", counts.values().sum::<usize>())?;
    Ok(Outcome::Ok)
}

fn class_name(cfg: &RunConfig, class: u16) -> String {
    let ids = cfg.eval_classes();
    ids.iter()
        .position(|&c| c == class as usize)
        .map_or_else(|| format!("class{class}"), |k| cfg.class_names[k].clone())
}

fn grid_files(dir: &Path) -> Result<BTreeSet<String>> {
    let entries =
        std::fs::read_dir(dir).with_context(|| format!("reading directory {}", dir.display()))?;
    let mut names = BTreeSet::new();
    for e in entries {
        let e = e.with_context(|| format!("reading directory {}", dir.display()))?;
        if e.file_type()?.is_file() {
            names.insert(e.file_name().to_string_lossy().into_owned());
        }
    }
    Ok(names)
}

pub fn eval(ctx: Ctx, pred_dir: &Path, gt_dir: &Path) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let gt_names = grid_files(gt_dir)?;
    let pred_names = grid_files(pred_dir)?;
    let pairs: Vec<&String> = gt_names.intersection(&pred_names).collect();
    if pairs.is_empty() {
        bail!(
            "no file names in common between {} and {}",
            pred_dir.display(),
            gt_dir.display()
        );
    }
    let (c, empty, ignore) = (
        cfg.grid.num_classes() as usize,
        cfg.grid.empty_label(),
        cfg.grid.ignore_label(),
    );
    let per_pair = pairs
        .par_iter()
        .map(
            |name| -> Result<(ConfusionMatrix, CompletionCounts, [usize; 3])> {
                let read = |dir: &Path| -> Result<VoxelLabelGrid> {
                    let p: PathBuf = dir.join(name.as_str());
                    let g = io::read_voxel_grid(&p)?;
                    Ok(g)
                };
                let (pred, gt) = (read(pred_dir)?, read(gt_dir)?);
                if pred.dims() != gt.dims() {
                    bail!(
                        "{name}: prediction dims {:?} differ from ground truth {:?}",
                        pred.dims(),
                        gt.dims()
                    );
                }
                let mut cm = ConfusionMatrix::new(c);
                cm.accumulate(&pred, &gt, ignore)
                    .with_context(|| format!("in {name}"))?;
                let mut cc = CompletionCounts::default();
                cc.accumulate(&pred, &gt, empty, ignore)?;
                Ok((cm, cc, gt.dims()))
            },
        )
        .collect::<Result<Vec<_>>>()?;

    let first_dims = per_pair[0].2;
    if let Some((k, _)) = per_pair.iter().enumerate().find(|(_, p)| p.2 != first_dims) {
        bail!(
            "{} has dims {:?} but {} has {:?}",
            pairs[k],
            per_pair[k].2,
            pairs[0],
            first_dims
        );
    }
    let mut cm = ConfusionMatrix::new(c);
    let mut cc = CompletionCounts::default();
    for (m, counts, _) in &per_pair {
        cm.merge(m)?;
        cc.tp += counts.tp;
        cc.fp += counts.fp;
        cc.fn_ += counts.fn_;
    }
    let report = EvalReport::new(&cm, &cc, &cfg.eval_classes(), &cfg.class_names, cfg.absent)?;
    writeln!(ctx.out, "pairs={}", pairs.len())?;
    write!(ctx.out, "{}", report.to_table())?;
    write!(ctx.out, "{}", report.to_key_values())?;
    Ok(Outcome::Ok)
}

fn widen(t: &SparseVoxelTensor<f32>) -> Result<SparseVoxelTensor<f64>> {
    let feats = t.features().iter().map(|&v| v as f64).collect();
    Ok(SparseVoxelTensor::new(
        t.dims(),
        t.channels(),
        t.indices().to_vec(),
        feats,
    )?)
}

pub fn dskd(ctx: Ctx, student: &Path, teacher: &Path, max_rows: Option<usize>) -> Result<Outcome> {
    let s = widen(&io::read_sparse_tensor(student)?)?;
    let t = widen(&io::read_sparse_tensor(teacher)?)?;
    if s.dims() != t.dims() {
        bail!(
            "student grid {:?} differs from teacher grid {:?}",
            s.dims(),
            t.dims()
        );
    }
    let mut pair = align(&s, &t)?;
    let matched = pair.student.len();
    if let Some(cap) = max_rows {
        pair = pair.subsample(cap, ctx.cfg.seed);
    }
    let loss = dskd_loss_aligned(&pair)?;
    writeln!(ctx.out, "loss={loss}")?;
    writeln!(ctx.out, "weighted_loss={}", ctx.cfg.weights.beta * loss)?;
    writeln!(ctx.out, "n_s={}", s.len())?;
    writeln!(ctx.out, "matched={matched}")?;
    writeln!(ctx.out, "rows_used={}", pair.student.len())?;
    writeln!(ctx.out, "matched_fraction={}", pair.matched_fraction)?;
    Ok(Outcome::Ok)
}

pub fn gradcheck(ctx: Ctx, cases: usize, inject_fault: bool) -> Result<Outcome> {
    if cases == 0 {
        bail!("--cases must be at least 1");
    }
    let results = gradcheck::run_all(ctx.cfg.seed, cases, inject_fault);
    let mut worst = 0.0f64;
    for r in &results {
        let verdict = if r.passed() { "ok" } else { "FAIL" };
        writeln!(
            ctx.out,
            "{}: cases={} worst_rel_err={:e} {verdict}",
            r.name, r.cases, r.worst
        )?;
        worst = worst.max(r.worst);
    }
    if results.iter().all(gradcheck::SuiteResult::passed) {
        writeln!(
            ctx.out,
            "gradcheck passed (tolerance {:e})",
            gradcheck::TOLERANCE
        )?;
        Ok(Outcome::Ok)
    } else {
        writeln!(
            ctx.out,
            "gradcheck failed: worst relative error {worst:e} exceeds {:e}",
            gradcheck::TOLERANCE
        )?;
        Ok(Outcome::VerificationFailed)
    }
}

pub struct DemoArgs<'p> {
    pub script: Option<&'p Path>,
    pub empty: bool,
    pub channels: usize,
    pub weights: Option<&'p Path>,
    pub out: Option<&'p Path>,
}

fn load_script(path: &Path) -> Result<SceneScript> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading scene script {}", path.display()))?;
    SceneScript::parse(&text).with_context(|| format!("in scene script {}", path.display()))
}

pub fn demo(ctx: Ctx, a: DemoArgs) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let spec = &cfg.grid;
    let params: CompletionParams<f64> = match a.weights {
        Some(p) => read_params::<f32>(p)?.cast(),
        None => CompletionParams::random(a.channels, cfg.seed)?,
    };
    let channels = params.channels();
    if a.weights.is_some() && channels != a.channels {
        writeln!(
            ctx.out,
            "note: using {channels} channels from the weights file"
        )?;
    }

    let grid = if a.empty {
        VoxelLabelGrid::empty_for(spec)
    } else {
        let script = match a.script {
            Some(p) => load_script(p)?,
            None => SceneScript::random_traffic(cfg.seed, spec, 3, 1),
        };
        let scene = generate(&script, spec)?;
        let (pc, labels) = &scene.frames[0];
        voxelize_labels(&pc.cast::<f64>(), &labels.semantic, spec)?
    };

    let mut input = Volume::zeros(spec.dims(), channels);
    for (li, &label) in grid.labels().iter().enumerate() {
        if label != spec.empty_label() && label != spec.ignore_label() {
            input.data_mut()[li * channels + label as usize % channels] = 1.0;
        }
    }
    let output = completion_forward(&input, &params)?;

    let eps = cfg.epsilon;
    let occupied = |v: &Volume<f64>| -> Vec<bool> {
        (0..v.num_voxels())
            .map(|li| v.voxel_max_abs(li) > eps)
            .collect()
    };
    let before = occupied(&input);
    let after = occupied(&output);
    let bound = dilate(&before, spec.dims(), params.receptive_radius());
    let escaped = after
        .iter()
        .zip(&bound)
        .filter(|(a, b)| **a && !**b)
        .count();
    let outside_max = (0..output.num_voxels())
        .filter(|&li| !bound[li])
        .map(|li| output.voxel_max_abs(li))
        .fold(0.0f64, f64::max);

    let mut summary = String::new();
    use std::fmt::Write as _;
    let _ = writeln!(
        summary,
        "grid={}x{}x{}",
        spec.dims()[0],
        spec.dims()[1],
        spec.dims()[2]
    );
    let _ = writeln!(summary, "channels={channels}");
    let _ = writeln!(summary, "receptive_radius={}", params.receptive_radius());
    let _ = writeln!(
        summary,
        "occupied_before={}",
        before.iter().filter(|b| **b).count()
    );
    let _ = writeln!(
        summary,
        "occupied_after={}",
        after.iter().filter(|b| **b).count()
    );
    let _ = writeln!(
        summary,
        "bound_voxels={}",
        bound.iter().filter(|b| **b).count()
    );
    let _ = writeln!(summary, "outside_bound_max_abs={outside_max:e}");
    write!(ctx.out, "{summary}")?;
    if let Some(p) = a.out {
        std::fs::write(p, &summary).with_context(|| format!("writing {}", p.display()))?;
    }
    if escaped > 0 {
        writeln!(
            ctx.out,
            "occupancy escaped the receptive-field bound at {escaped} voxels"
        )?;
        return Ok(Outcome::VerificationFailed);
    }
    Ok(Outcome::Ok)
}

pub fn synth(
    ctx: Ctx,
    out: &Path,
    script: Option<&Path>,
    frames: usize,
    moving: usize,
) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let script = match script {
        Some(p) => load_script(p)?,
        None => {
            if frames == 0 {
                bail!("--frames must be at least 1");
            }
            SceneScript::random_traffic(cfg.seed, &cfg.grid, moving, frames)
        }
    };
    let scene = generate(&script, &cfg.grid)?;
    let seq = Sequence::create(out)?;
    for (k, (pc, labels)) in scene.frames.iter().enumerate() {
        seq.write_frame(k, pc, labels)?;
    }
    io::write_poses(&scene.poses, seq.poses_path())?;
    let points: usize = scene.frames.iter().map(|(pc, _)| pc.len()).sum();
    writeln!(ctx.out, "frames={}", scene.frames.len())?;
    writeln!(ctx.out, "objects={}", scene.footprints.len())?;
    writeln!(ctx.out, "points={points}")?;
    Ok(Outcome::Ok)
}
