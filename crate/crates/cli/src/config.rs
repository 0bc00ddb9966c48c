//! Run configuration: dataset presets, a flat `key=value` file, then flags.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ssc_core::labels::RectifyConfig;
use ssc_core::losses::LossWeights;
use ssc_core::metrics::AbsentClasses;
use ssc_core::voxel::{default_grid_spec, GridSpec};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Dataset {
    #[value(name = "semantickitti")]
    SemanticKitti,
    #[value(name = "semanticposs")]
    SemanticPoss,
    Custom,
}

impl Dataset {
    fn parse(s: &str) -> Result<Self> {
        <Self as clap::ValueEnum>::from_str(s, true).map_err(|e| anyhow::anyhow!("dataset: {e}"))
    }
}

const KITTI_NAMES: [&str; 19] = [
    "car",
    "bicycle",
    "motorcycle",
    "truck",
    "other-vehicle",
    "person",
    "bicyclist",
    "motorcyclist",
    "road",
    "parking",
    "sidewalk",
    "other-ground",
    "building",
    "fence",
    "vegetation",
    "trunk",
    "terrain",
    "pole",
    "traffic-sign",
];

const POSS_NAMES: [&str; 11] = [
    "person",
    "rider",
    "car",
    "trunk",
    "plants",
    "traffic-sign",
    "pole",
    "building",
    "fence",
    "bike",
    "ground",
];

/// Maps raw SemanticKITTI label ids to the 20 training ids. Unknown ids and
/// the unlabeled/outlier ids map to `None` (the point casts no vote).
pub fn semantic_kitti_train_id(raw: u16) -> Option<u16> {
    Some(match raw {
        10 | 252 => 1,
        11 => 2,
        15 => 3,
        18 | 258 => 4,
        13 | 16 | 20 | 256 | 257 | 259 => 5,
        30 | 254 => 6,
        31 | 253 => 7,
        32 | 255 => 8,
        40 | 60 => 9,
        44 => 10,
        48 => 11,
        49 => 12,
        50 => 13,
        51 => 14,
        70 => 15,
        71 => 16,
        72 => 17,
        80 => 18,
        81 => 19,
        52 | 99 => 0,
        _ => return None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Remap {
    None,
    SemanticKitti,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset: Dataset,
    pub grid: GridSpec<f64>,
    pub rectify: RectifyConfig,
    pub weights: LossWeights,
    pub seed: u64,
    pub threads: usize,
    pub epsilon: f64,
    /// Names of the semantic classes `1..num_classes`, in report order.
    pub class_names: Vec<String>,
    pub absent: AbsentClasses,
    pub remap: Remap,
}

/// Flag values that override the file; `None` means "not given".
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub dataset: Option<Dataset>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub epsilon: Option<f64>,
}

impl RunConfig {
    pub fn preset(dataset: Dataset) -> Self {
        let base = default_grid_spec::<f64>();
        let (classes, rectify, names): (u16, _, Vec<String>) = match dataset {
            Dataset::SemanticKitti => (
                20,
                RectifyConfig::semantic_kitti(),
                to_strings(&KITTI_NAMES),
            ),
            Dataset::SemanticPoss => (12, RectifyConfig::semantic_poss(), to_strings(&POSS_NAMES)),
            Dataset::Custom => (
                20,
                RectifyConfig::new([], 255),
                (1..20).map(|c| format!("class{c}")).collect(),
            ),
        };
        let grid = GridSpec::new(base.origin(), base.extent(), base.dims(), classes)
            .expect("preset grid is valid");
        Self {
            dataset,
            grid,
            rectify,
            weights: LossWeights::default(),
            seed: DEFAULT_SEED,
            threads: 1,
            epsilon: 0.0,
            class_names: names,
            absent: AbsentClasses::Exclude,
            remap: Remap::None,
        }
    }

    /// Preset, then config file keys, then flags. Threads fall back to
    /// `SSC_THREADS`, then to the machine's parallelism.
    pub fn resolve(
        file: Option<&Path>,
        flags: &Overrides,
        env_threads: Option<&str>,
    ) -> Result<Self> {
        let entries = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                parse_key_values(&text).with_context(|| format!("in config {}", p.display()))?
            }
            None => BTreeMap::new(),
        };
        let dataset = match (flags.dataset, entries.get("dataset")) {
            (Some(d), _) => d,
            (None, Some(s)) => Dataset::parse(s)?,
            (None, None) => Dataset::SemanticKitti,
        };
        let mut cfg = Self::preset(dataset);
        cfg.apply(&entries)?;

        if let Some(s) = flags.seed {
            cfg.seed = s;
        }
        if let Some(e) = flags.epsilon {
            cfg.epsilon = e;
        }
        cfg.threads = match (flags.threads, entries.get("threads"), env_threads) {
            (Some(t), _, _) => t,
            (None, Some(t), _) => t.parse().context("threads")?,
            (None, None, Some(t)) => t.trim().parse().context("SSC_THREADS")?,
            (None, None, None) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, entries: &BTreeMap<String, String>) -> Result<()> {
        let g = &self.grid;
        let (mut origin, mut extent, mut dims) = (g.origin(), g.extent(), g.dims());
        let (mut classes, mut empty, mut ignore) =
            (g.num_classes(), g.empty_label(), g.ignore_label());
        let mut moving: Option<Vec<u16>> = None;
        let mut unlabeled: Option<u16> = None;
        let (mut alpha, mut beta) = (self.weights.alpha, self.weights.beta);

        for (key, value) in entries {
            let ctx = || format!("config key {key}");
            match key.as_str() {
                "dataset" | "threads" => {}
                "seed" => self.seed = value.parse().with_context(ctx)?,
                "epsilon" => self.epsilon = value.parse().with_context(ctx)?,
                "grid.origin" => origin = triple(value).with_context(ctx)?,
                "grid.extent" => extent = triple(value).with_context(ctx)?,
                "grid.dims" => dims = triple(value).with_context(ctx)?,
                "grid.num_classes" => classes = value.parse().with_context(ctx)?,
                "grid.empty_label" => empty = value.parse().with_context(ctx)?,
                "grid.ignore_label" => ignore = value.parse().with_context(ctx)?,
                "rectify.moving_classes" => moving = Some(list(value).with_context(ctx)?),
                "rectify.unlabeled" => unlabeled = Some(value.parse().with_context(ctx)?),
                "loss.alpha" => alpha = value.parse().with_context(ctx)?,
                "loss.beta" => beta = value.parse().with_context(ctx)?,
                "eval.absent" => {
                    self.absent = match value.as_str() {
                        "exclude" => AbsentClasses::Exclude,
                        "zero" => AbsentClasses::Zero,
                        other => bail!("eval.absent must be exclude or zero, got {other:?}"),
                    }
                }
                "labels.remap" => {
                    self.remap = match value.as_str() {
                        "none" => Remap::None,
                        "semantickitti" => Remap::SemanticKitti,
                        other => bail!("labels.remap must be none or semantickitti, got {other:?}"),
                    }
                }
                "class_names" => {
                    self.class_names = value.split(',').map(|s| s.trim().to_string()).collect()
                }
                other => bail!("unknown config key {other:?}"),
            }
        }
        self.grid = GridSpec::with_labels(origin, extent, dims, classes, empty, ignore)?;
        let unlabeled = unlabeled.unwrap_or(ignore);
        match moving {
            Some(m) => self.rectify = RectifyConfig::new(m, unlabeled),
            None => self.rectify.unlabeled_class = unlabeled,
        }
        self.weights = LossWeights::new(alpha, beta)?;
        if entries.contains_key("grid.num_classes")
            && !entries.contains_key("class_names")
            && self.dataset != Dataset::Custom
        {
            self.class_names = (1..classes).map(|c| format!("class{c}")).collect();
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if self.threads == 0 {
            bail!("threads must be at least 1");
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            bail!("epsilon must be non-negative, got {}", self.epsilon);
        }
        if self.class_names.len() + 1 != self.grid.num_classes() as usize {
            bail!(
                "{} class names for {} classes (names cover ids 1..{})",
                self.class_names.len(),
                self.grid.num_classes(),
                self.grid.num_classes()
            );
        }
        self.rectify.validate(&self.grid)?;
        Ok(())
    }

    /// Semantic class ids in report order, paired with their names.
    pub fn eval_classes(&self) -> Vec<usize> {
        (0..self.grid.num_classes() as usize)
            .filter(|&c| c != self.grid.empty_label() as usize)
            .take(self.class_names.len())
            .collect()
    }
}

fn to_strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("line {}: expected key=value, got {line:?}", n + 1);
        };
        if out
            .insert(k.trim().to_string(), v.trim().to_string())
            .is_some()
        {
            bail!("line {}: duplicate key {:?}", n + 1, k.trim());
        }
    }
    Ok(out)
}

fn list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<T>()
                .with_context(|| format!("bad list item {t:?}"))
        })
        .collect()
}

fn triple<T: std::str::FromStr + Copy>(s: &str) -> Result<[T; 3]>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    let v: Vec<T> = list(s)?;
    v.as_slice()
        .try_into()
        .map_err(|_| anyhow::anyhow!("expected three comma-separated values, got {s:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_have_matching_names() {
        for d in [
            Dataset::SemanticKitti,
            Dataset::SemanticPoss,
            Dataset::Custom,
        ] {
            RunConfig::preset(d).validate().unwrap();
        }
        assert_eq!(
            RunConfig::preset(Dataset::SemanticPoss).class_names[0],
            "person"
        );
    }

    #[test]
    fn file_then_flags() {
        let dir = std::env::temp_dir().join(format!("ssc-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("run.cfg");
        std::fs::write(
            &p,
            "seed=7\ngrid.dims=32,32,8\nthreads=3\n# comment\nepsilon=0.5\n",
        )
        .unwrap();
        let cfg = RunConfig::resolve(Some(&p), &Overrides::default(), Some("9")).unwrap();
        assert_eq!(
            (cfg.seed, cfg.threads, cfg.grid.dims()),
            (7, 3, [32, 32, 8])
        );
        let flags = Overrides {
            seed: Some(1),
            threads: Some(2),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(Some(&p), &flags, None).unwrap();
        assert_eq!((cfg.seed, cfg.threads, cfg.epsilon), (1, 2, 0.5));
        std::fs::write(&p, "bogus=1\n").unwrap();
        assert!(RunConfig::resolve(Some(&p), &Overrides::default(), None).is_err());
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn env_threads_is_the_fallback() {
        let cfg = RunConfig::resolve(None, &Overrides::default(), Some("5")).unwrap();
        assert_eq!(cfg.threads, 5);
        assert_eq!(cfg.seed, DEFAULT_SEED);
    }

    #[test]
    fn kitti_remap_examples() {
        assert_eq!(semantic_kitti_train_id(10), Some(1));
        assert_eq!(semantic_kitti_train_id(252), Some(1));
        assert_eq!(semantic_kitti_train_id(81), Some(19));
        assert_eq!(semantic_kitti_train_id(0), None);
        assert_eq!(semantic_kitti_train_id(1), None);
    }
}
