//! Training objective: cross-entropy, Lovász-softmax and the weighted total.
//!
//! Losses take per-voxel class probabilities (softmax is applied upstream)
//! and return the value together with its gradient with respect to those
//! probabilities. Voxels labeled with the ignore sentinel contribute nothing.

use crate::error::{Error, Result};
use crate::scalar::{pairwise_sum, Scalar};
use crate::voxel::DEFAULT_IGNORE_LABEL;

/// Added inside the log of the cross-entropy.
pub const LOG_EPS: f64 = 1e-12;

const ROW_SUM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl LossWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::arg(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(Self { alpha, beta })
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 3000.0,
        }
    }
}

/// `M x C` row-stochastic probabilities with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVolume<T> {
    probs: Vec<T>,
    num_classes: usize,
    labels: Vec<u16>,
    ignore_label: u16,
}

impl<T: Scalar> ProbVolume<T> {
    pub fn new(probs: Vec<T>, num_classes: usize, labels: Vec<u16>) -> Result<Self> {
        Self::with_ignore(probs, num_classes, labels, DEFAULT_IGNORE_LABEL)
    }

    pub fn with_ignore(
        probs: Vec<T>,
        num_classes: usize,
        labels: Vec<u16>,
        ignore_label: u16,
    ) -> Result<Self> {
        if num_classes == 0 || probs.len() != labels.len() * num_classes {
            return Err(Error::arg(format!(
                "{} probabilities for {} voxels x {num_classes} classes",
                probs.len(),
                labels.len()
            )));
        }
        if (ignore_label as usize) < num_classes {
            return Err(Error::arg("ignore label collides with a class id"));
        }
        for (i, row) in probs.chunks_exact(num_classes).enumerate() {
            if row.iter().any(|&p| !(p >= T::zero() && p <= T::one())) {
                return Err(Error::Data {
                    index: i,
                    msg: "probability outside [0, 1]".into(),
                });
            }
            let s = row.iter().fold(0.0, |a, p| a + p.to_f64_lossy());
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Data {
                    index: i,
                    msg: format!("row sums to {s}"),
                });
            }
        }
        if let Some(i) = labels
            .iter()
            .position(|&l| l as usize >= num_classes && l != ignore_label)
        {
            return Err(Error::Data {
                index: i,
                msg: format!("label {} out of range", labels[i]),
            });
        }
        Ok(Self {
            probs,
            num_classes,
            labels,
            ignore_label,
        })
    }

    /// One-hot probabilities of a hard prediction.
    pub fn one_hot(pred: &[u16], num_classes: usize, labels: Vec<u16>) -> Result<Self> {
        let mut probs = vec![T::zero(); pred.len() * num_classes];
        for (i, &p) in pred.iter().enumerate() {
            if p as usize >= num_classes {
                return Err(Error::Data {
                    index: i,
                    msg: format!("prediction {p} out of range"),
                });
            }
            probs[i * num_classes + p as usize] = T::one();
        }
        Self::new(probs, num_classes, labels)
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_voxels(&self) -> usize {
        self.labels.len()
    }

    pub fn prob(&self, voxel: usize, class: usize) -> T {
        self.probs[voxel * self.num_classes + class]
    }

    fn evaluated(&self) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] != self.ignore_label)
            .collect()
    }
}

/// Loss value with its gradient (same layout as the probabilities).
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad<T> {
    pub value: T,
    pub grad: Vec<T>,
}

/// Mean of `−log(p[label] + ε)` over non-ignored voxels.
pub fn cross_entropy<T: Scalar>(pv: &ProbVolume<T>) -> Result<LossGrad<T>> {
    let rows = pv.evaluated();
    if rows.is_empty() {
        return Err(Error::Undefined(
            "cross-entropy over zero non-ignored voxels".into(),
        ));
    }
    let m = T::lit(rows.len() as f64);
    let eps = T::lit(LOG_EPS);
    let c = pv.num_classes;
    let mut grad = vec![T::zero(); pv.probs.len()];
    let terms: Vec<T> = rows
        .iter()
        .map(|&i| {
            let k = i * c + pv.labels[i] as usize;
            let p = pv.probs[k] + eps;
            grad[k] = -T::one() / (m * p);
            -p.ln()
        })
        .collect();
    Ok(LossGrad {
        value: pairwise_sum(&terms) / m,
        grad,
    })
}

/// Lovász extension weights for foreground indicators already in sorted order.
fn lovasz_weights(fg_sorted: &[bool]) -> Vec<f64> {
    let gts = fg_sorted.iter().filter(|&&f| f).count() as f64;
    let mut weights = Vec::with_capacity(fg_sorted.len());
    let (mut cum_fg, mut cum_bg) = (0.0, 0.0);
    let mut prev = 0.0;
    for &f in fg_sorted {
        if f {
            cum_fg += 1.0;
        } else {
            cum_bg += 1.0;
        }
        let intersection = gts - cum_fg;
        let union = gts + cum_bg;
        let jaccard = 1.0 - intersection / union;
        weights.push(jaccard - prev);
        prev = jaccard;
    }
    weights
}

/// Mean over classes present in the non-ignored labels of the Lovász
/// extension of the Jaccard loss on `|fg − p_c|`.
///
/// Errors are sorted descending with ties broken by voxel index.
pub fn lovasz_softmax<T: Scalar>(pv: &ProbVolume<T>) -> Result<LossGrad<T>> {
    let rows = pv.evaluated();
    if rows.is_empty() {
        return Err(Error::Undefined(
            "Lovász-softmax over zero non-ignored voxels".into(),
        ));
    }
    let c = pv.num_classes;
    let mut present = vec![false; c];
    for &i in &rows {
        present[pv.labels[i] as usize] = true;
    }
    let classes: Vec<usize> = (0..c).filter(|&k| present[k]).collect();
    let inv_classes = T::lit(1.0 / classes.len() as f64);
    let mut grad = vec![T::zero(); pv.probs.len()];
    let mut per_class = Vec::with_capacity(classes.len());

    for &class in &classes {
        let mut items: Vec<(T, usize, bool)> = rows
            .iter()
            .map(|&i| {
                let fg = pv.labels[i] as usize == class;
                let p = pv.probs[i * c + class];
                let err = if fg { T::one() - p } else { p };
                (err, i, fg)
            })
            .collect();
        items.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .expect("finite errors")
                .then(a.1.cmp(&b.1))
        });
        let fg: Vec<bool> = items.iter().map(|t| t.2).collect();
        let weights = lovasz_weights(&fg);
        let terms: Vec<T> = items
            .iter()
            .zip(&weights)
            .map(|(&(err, i, is_fg), &w)| {
                let w = T::lit(w);
                let sign = if is_fg { -T::one() } else { T::one() };
                grad[i * c + class] = sign * w * inv_classes;
                err * w
            })
            .collect();
        per_class.push(pairwise_sum(&terms));
    }
    Ok(LossGrad {
        value: pairwise_sum(&per_class) * inv_classes,
        grad,
    })
}

/// `ce + α · lovasz + β · dskd`.
pub fn total_loss(ce: f64, lovasz: f64, dskd: f64, w: &LossWeights) -> f64 {
    ce + w.alpha * lovasz + w.beta * dskd
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ce_examples() {
        let pv = ProbVolume::<f64>::one_hot(&[0, 2, 1], 3, vec![0, 2, 1]).unwrap();
        assert!(cross_entropy(&pv).unwrap().value <= 1e-11);

        let uniform = ProbVolume::new(vec![0.25f64; 8], 4, vec![0, 3]).unwrap();
        let ce = cross_entropy(&uniform).unwrap();
        assert!((ce.value - 4f64.ln()).abs() < 1e-9);

        let masked = ProbVolume::new(vec![0.9, 0.1, 0.5, 0.5], 2, vec![0, 255]).unwrap();
        let single = ProbVolume::new(vec![0.9, 0.1], 2, vec![0]).unwrap();
        assert_eq!(
            cross_entropy(&masked).unwrap().value,
            cross_entropy(&single).unwrap().value
        );
        assert_eq!(cross_entropy(&masked).unwrap().grad[2..], [0.0, 0.0]);

        let all_ignored = ProbVolume::new(vec![0.5f64, 0.5], 2, vec![255]).unwrap();
        assert!(matches!(
            cross_entropy(&all_ignored),
            Err(Error::Undefined(_))
        ));
        assert!(matches!(
            lovasz_softmax(&all_ignored),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn lovasz_hand_trace() {
        // gt class 1 = {v0, v1}; hard prediction class 1 = {v0}
        let pv = ProbVolume::<f64>::one_hot(&[1, 0, 0], 2, vec![1, 1, 0]).unwrap();
        let l = lovasz_softmax(&pv).unwrap();
        assert!((l.value - 0.5).abs() < 1e-15);
        let exact = ProbVolume::<f64>::one_hot(&[1, 1, 0], 2, vec![1, 1, 0]).unwrap();
        assert_eq!(lovasz_softmax(&exact).unwrap().value, 0.0);
    }

    #[test]
    fn lovasz_weights_sum_to_final_jaccard() {
        let fg = [true, false, true, true, false];
        let w = lovasz_weights(&fg);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(w.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn prob_volume_validation() {
        assert!(ProbVolume::new(vec![0.5f64, 0.6], 2, vec![0]).is_err());
        assert!(ProbVolume::new(vec![1.5f64, -0.5], 2, vec![0]).is_err());
        assert!(ProbVolume::new(vec![0.5f64, 0.5], 2, vec![2]).is_err());
        assert!(ProbVolume::new(vec![0.5f64, 0.5], 2, vec![0, 1]).is_err());
    }

    #[test]
    fn weights_and_total() {
        let w = LossWeights::default();
        assert_eq!((w.alpha, w.beta), (1.0, 3000.0));
        assert!((total_loss(1.0, 0.5, 0.001, &w) - 4.5).abs() < 1e-12);
        let off = LossWeights::new(0.0, 0.0).unwrap();
        assert_eq!(total_loss(1.25, 0.5, 7.0, &off), 1.25);
        assert!(LossWeights::new(-1.0, 0.0).is_err());
        assert!(LossWeights::new(1.0, f64::NAN).is_err());
    }
}
