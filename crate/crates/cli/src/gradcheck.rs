//! Finite-difference verification of the distillation and segmentation
//! loss gradients on seeded random instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssc_core::distill::{dskd_grad, dskd_loss, pairwise_similarity};
use ssc_core::losses::{cross_entropy, lovasz_softmax, LossGrad, ProbVolume};

pub const TOLERANCE: f64 = 1e-4;
const STEP: f64 = 1e-5;
const SCALE_FLOOR: f64 = 1e-10;
/// Lovász is piecewise linear; instances whose sorted errors come closer
/// than this could cross a kink within one step and are redrawn.
const MIN_ERROR_GAP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub worst: f64,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.worst <= TOLERANCE
    }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = a.iter().chain(b).fold(0.0f64, |m, x| m.max(x.abs()));
    diff / scale.max(SCALE_FLOOR)
}

fn sign(flip: bool) -> f64 {
    if flip {
        -1.0
    } else {
        1.0
    }
}

pub fn dskd_suite(seed: u64, cases: usize, flip: bool) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let n = rng.gen_range(2..=16);
        let c = rng.gen_range(2..=8);
        let s: Vec<f64> = (0..n * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t: Vec<f64> = (0..n * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pt = pairwise_similarity(&t, c);
        let loss = |x: &[f64]| dskd_loss(&pairwise_similarity(x, c), &pt).expect("same size");
        let analytic: Vec<f64> = dskd_grad(&s, &t, c)
            .expect("well-formed")
            .into_iter()
            .map(|g| g * sign(flip))
            .collect();
        let mut probe = s.clone();
        let numeric: Vec<f64> = (0..s.len())
            .map(|i| {
                probe[i] = s[i] + STEP;
                let up = loss(&probe);
                probe[i] = s[i] - STEP;
                let down = loss(&probe);
                probe[i] = s[i];
                (up - down) / (2.0 * STEP)
            })
            .collect();
        worst = worst.max(rel_err(&analytic, &numeric));
    }
    SuiteResult {
        name: "dskd",
        cases,
        worst,
    }
}

type Loss = fn(&ProbVolume<f64>) -> ssc_core::Result<LossGrad<f64>>;

struct Instance {
    probs: Vec<f64>,
    labels: Vec<u16>,
    classes: usize,
}

fn draw(rng: &mut ChaCha8Rng) -> Instance {
    let m = rng.gen_range(1..=32);
    let c = rng.gen_range(2..=6);
    let mut probs = Vec::with_capacity(m * c);
    for _ in 0..m {
        let e: Vec<f64> = (0..c).map(|_| rng.gen_range(-2.0f64..2.0).exp()).collect();
        let s: f64 = e.iter().sum();
        probs.extend(e.iter().map(|v| v / s));
    }
    let labels = (0..m)
        .map(|i| {
            if i > 0 && rng.gen_bool(0.1) {
                255
            } else {
                rng.gen_range(0..c as u16)
            }
        })
        .collect();
    Instance {
        probs,
        labels,
        classes: c,
    }
}

fn min_error_gap(inst: &Instance) -> f64 {
    let c = inst.classes;
    let mut gap = f64::INFINITY;
    for class in 0..c {
        let mut e: Vec<f64> = inst
            .labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l != 255)
            .map(|(i, &l)| {
                let p = inst.probs[i * c + class];
                if l as usize == class {
                    1.0 - p
                } else {
                    p
                }
            })
            .collect();
        e.sort_by(f64::total_cmp);
        gap = e.windows(2).fold(gap, |g, w| g.min(w[1] - w[0]));
    }
    gap
}

/// Directional derivatives along zero-sum row perturbations, which keep
/// every row on the probability simplex.
fn directional_error(loss: Loss, inst: &Instance, rng: &mut ChaCha8Rng, flip: bool) -> f64 {
    let c = inst.classes;
    let eval = |p: &[f64]| {
        let pv = ProbVolume::new(p.to_vec(), c, inst.labels.clone()).expect("stays on simplex");
        loss(&pv).expect("has evaluated voxels")
    };
    let grad = eval(&inst.probs).grad;
    let (mut analytic, mut numeric) = (Vec::new(), Vec::new());
    for _ in 0..6 {
        let mut d = Vec::with_capacity(inst.probs.len());
        for _ in 0..inst.labels.len() {
            let raw: Vec<f64> = (0..c).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mean = raw.iter().sum::<f64>() / c as f64;
            d.extend(raw.iter().map(|v| (v - mean) / 2.0));
        }
        let shifted =
            |h: f64| -> Vec<f64> { inst.probs.iter().zip(&d).map(|(p, v)| p + h * v).collect() };
        numeric.push((eval(&shifted(STEP)).value - eval(&shifted(-STEP)).value) / (2.0 * STEP));
        analytic.push(sign(flip) * grad.iter().zip(&d).map(|(g, v)| g * v).sum::<f64>());
    }
    rel_err(&analytic, &numeric)
}

pub fn cross_entropy_suite(seed: u64, cases: usize, flip: bool) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xce);
    let worst = (0..cases)
        .map(|_| {
            let inst = draw(&mut rng);
            directional_error(cross_entropy, &inst, &mut rng, flip)
        })
        .fold(0.0, f64::max);
    SuiteResult {
        name: "cross_entropy",
        cases,
        worst,
    }
}

pub fn lovasz_suite(seed: u64, cases: usize, flip: bool) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x10fa);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < cases {
        let inst = draw(&mut rng);
        if min_error_gap(&inst) < MIN_ERROR_GAP {
            continue;
        }
        worst = worst.max(directional_error(lovasz_softmax, &inst, &mut rng, flip));
        done += 1;
    }
    SuiteResult {
        name: "lovasz_softmax",
        cases,
        worst,
    }
}

pub fn run_all(seed: u64, cases: usize, flip: bool) -> Vec<SuiteResult> {
    vec![
        dskd_suite(seed, cases, flip),
        cross_entropy_suite(seed, cases, flip),
        lovasz_suite(seed, cases, flip),
    ]
}
