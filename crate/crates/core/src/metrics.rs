//! Semantic scene completion metrics.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::voxel::VoxelLabelGrid;

/// Rows are ground truth, columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self {
            num_classes,
            counts: vec![0; num_classes * num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.num_classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds every voxel whose ground truth is not `ignore`.
    pub fn accumulate(
        &mut self,
        pred: &VoxelLabelGrid,
        gt: &VoxelLabelGrid,
        ignore: u16,
    ) -> Result<()> {
        if pred.dims() != gt.dims() {
            return Err(Error::arg(format!(
                "prediction dims {:?} differ from ground truth {:?}",
                pred.dims(),
                gt.dims()
            )));
        }
        let c = self.num_classes;
        let mut local = vec![0u64; c * c];
        for (i, (&p, &g)) in pred.labels().iter().zip(gt.labels()).enumerate() {
            if g == ignore {
                continue;
            }
            if g as usize >= c || p as usize >= c {
                return Err(Error::Data {
                    index: i,
                    msg: format!("label pair (gt {g}, pred {p}) outside {c} classes"),
                });
            }
            local[g as usize * c + p as usize] += 1;
        }
        for (a, b) in self.counts.iter_mut().zip(local) {
            *a += b;
        }
        Ok(())
    }

    /// Elementwise sum; both matrices must have the same class count.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.num_classes != self.num_classes {
            return Err(Error::arg(
                "cannot merge confusion matrices of different size",
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn true_positives(&self, i: usize) -> u64 {
        self.get(i, i)
    }

    pub fn false_positives(&self, i: usize) -> u64 {
        (0..self.num_classes).map(|g| self.get(g, i)).sum::<u64>() - self.get(i, i)
    }

    pub fn false_negatives(&self, i: usize) -> u64 {
        (0..self.num_classes).map(|p| self.get(i, p)).sum::<u64>() - self.get(i, i)
    }

    /// `TP / (TP + FP + FN)`, or `None` when the class never occurs.
    pub fn class_iou(&self, i: usize) -> Option<f64> {
        let tp = self.true_positives(i);
        let denom = tp + self.false_positives(i) + self.false_negatives(i);
        (denom > 0).then(|| tp as f64 / denom as f64)
    }

    /// Mean IoU over `classes`. Absent classes are skipped or scored 0 per `policy`.
    pub fn miou(&self, classes: &[usize], policy: AbsentClasses) -> Result<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for &c in classes {
            if c >= self.num_classes {
                return Err(Error::arg(format!("class {c} out of range")));
            }
            match (self.class_iou(c), policy) {
                (Some(v), _) => {
                    sum += v;
                    n += 1;
                }
                (None, AbsentClasses::Zero) => n += 1,
                (None, AbsentClasses::Exclude) => {}
            }
        }
        if n == 0 || classes.iter().all(|&c| self.class_iou(c).is_none()) {
            return Err(Error::Undefined(
                "every class in the mIoU set is empty".into(),
            ));
        }
        Ok(sum / n as f64)
    }

    /// Every class id except `empty`.
    pub fn semantic_classes(&self, empty: u16) -> Vec<usize> {
        (0..self.num_classes)
            .filter(|&c| c != empty as usize)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AbsentClasses {
    #[default]
    Exclude,
    Zero,
}

/// Occupied-vs-empty counts for the class-agnostic completion IoU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CompletionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl CompletionCounts {
    pub fn accumulate(
        &mut self,
        pred: &VoxelLabelGrid,
        gt: &VoxelLabelGrid,
        empty: u16,
        ignore: u16,
    ) -> Result<()> {
        if pred.dims() != gt.dims() {
            return Err(Error::arg(format!(
                "prediction dims {:?} differ from ground truth {:?}",
                pred.dims(),
                gt.dims()
            )));
        }
        for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
            if g == ignore {
                continue;
            }
            let (po, go) = (p != empty && p != ignore, g != empty);
            match (po, go) {
                (true, true) => self.tp += 1,
                (true, false) => self.fp += 1,
                (false, true) => self.fn_ += 1,
                (false, false) => {}
            }
        }
        Ok(())
    }

    /// 1.0 when neither side has an occupied evaluated voxel.
    pub fn iou(&self) -> f64 {
        let denom = self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            self.tp as f64 / denom as f64
        }
    }
}

pub fn completion_iou(
    pred: &VoxelLabelGrid,
    gt: &VoxelLabelGrid,
    empty: u16,
    ignore: u16,
) -> Result<f64> {
    let mut c = CompletionCounts::default();
    c.accumulate(pred, gt, empty, ignore)?;
    Ok(c.iou())
}

/// Per-class IoU, mIoU and completion IoU for one evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub class_names: Vec<String>,
    /// Indexed like `class_names`; `None` for absent classes.
    pub class_iou: Vec<Option<f64>>,
    pub miou: f64,
    pub completion: f64,
}

impl EvalReport {
    /// `class_names[k]` names class id `classes[k]`.
    pub fn new(
        cm: &ConfusionMatrix,
        completion: &CompletionCounts,
        classes: &[usize],
        class_names: &[String],
        policy: AbsentClasses,
    ) -> Result<Self> {
        if classes.len() != class_names.len() {
            return Err(Error::arg("class ids and class names differ in length"));
        }
        Ok(Self {
            class_names: class_names.to_vec(),
            class_iou: classes.iter().map(|&c| cm.class_iou(c)).collect(),
            miou: cm.miou(classes, policy)?,
            completion: completion.iou(),
        })
    }

    /// One header row and one value row, percentages with one decimal.
    pub fn to_table(&self) -> String {
        let mut header = vec!["mIoU".to_string(), "completion".to_string()];
        header.extend(self.class_names.iter().cloned());
        let mut row = vec![pct(Some(self.miou)), pct(Some(self.completion))];
        row.extend(self.class_iou.iter().map(|v| pct(*v)));
        let widths: Vec<usize> = header
            .iter()
            .zip(&row)
            .map(|(h, r)| h.len().max(r.len()))
            .collect();
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join(" | ")
        };
        format!("{}\n{}\n", line(&header), line(&row))
    }

    /// `key=value` lines with full-precision ratios; absent classes print `nan`.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "miou={}", self.miou);
        let _ = writeln!(out, "completion={}", self.completion);
        for (name, v) in self.class_names.iter().zip(&self.class_iou) {
            let _ = writeln!(
                out,
                "iou.{name}={}",
                v.map_or("nan".to_string(), |x| x.to_string())
            );
        }
        out
    }
}

fn pct(v: Option<f64>) -> String {
    v.map_or("-".to_string(), |x| format!("{:.1}", 100.0 * x))
}
