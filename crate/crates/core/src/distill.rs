//! Dense-to-sparse distillation.
//!
//! The multi-frame teacher and the single-frame student both produce sparse
//! voxel features with sorted indices. After restricting the teacher to the
//! student's voxels, each side is summarized by the cosine-similarity matrix
//! of its feature rows and the student is penalized by the mean squared
//! difference of the two matrices.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{pairwise_sum, Scalar};
use crate::voxel::SparseVoxelTensor;

/// Rows with an L2 norm at or below this are treated as zero vectors.
pub const NORM_EPS: f64 = 1e-12;

/// Student rows paired with the teacher rows at the same voxel indices.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair<T> {
    pub student: SparseVoxelTensor<T>,
    pub teacher: SparseVoxelTensor<T>,
    /// Matched student rows over all student rows.
    pub matched_fraction: f64,
}

/// Sorted-merge intersection of the two index lists.
///
/// Student voxels missing from the teacher are dropped and reflected in
/// `matched_fraction`. An empty student aligns trivially with fraction 1.
pub fn align<T: Scalar>(
    student: &SparseVoxelTensor<T>,
    teacher: &SparseVoxelTensor<T>,
) -> Result<AlignedPair<T>> {
    if student.channels() != teacher.channels() {
        return Err(Error::arg(format!(
            "student has {} channels, teacher {}",
            student.channels(),
            teacher.channels()
        )));
    }
    let (s_idx, t_idx) = (student.indices(), teacher.indices());
    let (mut i, mut j) = (0, 0);
    let mut s_rows = Vec::new();
    let mut t_rows = Vec::new();
    while i < s_idx.len() && j < t_idx.len() {
        match s_idx[i].cmp(&t_idx[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                s_rows.push(i);
                t_rows.push(j);
                i += 1;
                j += 1;
            }
        }
    }
    if student.is_empty() {
        return Ok(AlignedPair {
            student: student.clone(),
            teacher: teacher.select_rows(&[]),
            matched_fraction: 1.0,
        });
    }
    if s_rows.is_empty() {
        return Err(Error::Alignment(format!(
            "none of the {} student voxels exist in the teacher",
            student.len()
        )));
    }
    Ok(AlignedPair {
        matched_fraction: s_rows.len() as f64 / student.len() as f64,
        student: student.select_rows(&s_rows),
        teacher: teacher.select_rows(&t_rows),
    })
}

impl<T: Scalar> AlignedPair<T> {
    /// Keeps a seeded uniform subset of at most `max_rows` aligned rows,
    /// preserving index order. Returns `self` unchanged when already small enough.
    pub fn subsample(self, max_rows: usize, seed: u64) -> Self {
        let n = self.student.len();
        if n <= max_rows {
            return self;
        }
        let mut rows = sample(&mut ChaCha8Rng::seed_from_u64(seed), n, max_rows).into_vec();
        rows.sort_unstable();
        Self {
            student: self.student.select_rows(&rows),
            teacher: self.teacher.select_rows(&rows),
            matched_fraction: self.matched_fraction,
        }
    }
}

/// Dense symmetric `N x N` matrix of cosine similarities.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<T> {
    n: usize,
    values: Vec<T>,
}

impl<T: Scalar> SimilarityMatrix<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

fn row_norms<T: Scalar>(features: &[T], channels: usize) -> Vec<T> {
    features
        .chunks_exact(channels.max(1))
        .map(|r| r.iter().fold(T::zero(), |a, &v| a + v * v).sqrt())
        .collect()
}

/// Cosine similarity of every pair of rows; pairs involving a row with norm
/// at most [`NORM_EPS`] are 0.
pub fn pairwise_similarity<T: Scalar>(features: &[T], channels: usize) -> SimilarityMatrix<T> {
    let n = features.len().checked_div(channels).unwrap_or(0);
    let norms = row_norms(features, channels);
    let eps = T::lit(NORM_EPS);
    let row = |i: usize| &features[i * channels..(i + 1) * channels];
    let norms = &norms;
    let values: Vec<T> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let ri = row(i);
            let ni = norms[i];
            (0..n).map(move |j| {
                let nj = norms[j];
                if ni <= eps || nj <= eps {
                    return T::zero();
                }
                let dot = ri
                    .iter()
                    .zip(row(j))
                    .fold(T::zero(), |a, (&x, &y)| a + x * y);
                dot / (ni * nj)
            })
        })
        .collect();
    SimilarityMatrix { n, values }
}

/// Mean over all `N²` entries of the squared similarity difference.
pub fn dskd_loss<T: Scalar>(
    student: &SimilarityMatrix<T>,
    teacher: &SimilarityMatrix<T>,
) -> Result<T> {
    if student.n != teacher.n {
        return Err(Error::arg(format!(
            "similarity matrices are {0}x{0} and {1}x{1}",
            student.n, teacher.n
        )));
    }
    if student.n == 0 {
        return Ok(T::zero());
    }
    let sq: Vec<T> = student
        .values
        .iter()
        .zip(&teacher.values)
        .map(|(&a, &b)| (a - b) * (a - b))
        .collect();
    Ok(pairwise_sum(&sq) / T::lit((student.n * student.n) as f64))
}

/// Loss of an aligned pair, computed from its two feature sets.
pub fn dskd_loss_aligned<T: Scalar>(pair: &AlignedPair<T>) -> Result<T> {
    let c = pair.student.channels();
    dskd_loss(
        &pairwise_similarity(pair.student.features(), c),
        &pairwise_similarity(pair.teacher.features(), c),
    )
}

/// Analytic gradient of the loss with respect to the student features
/// (teacher held constant), same row-major shape as `student`.
///
/// With `u_i = f_i / |f_i|`, `dL/du_i = 4/N² Σ_j (P_ij − Q_ij) u_j` and the
/// chain rule through the normalization projects out the radial part:
/// `g_i = (I − u_i u_iᵀ) dL/du_i / |f_i|`. Rows with norm at most
/// [`NORM_EPS`] get a zero gradient.
pub fn dskd_grad<T: Scalar>(student: &[T], teacher: &[T], channels: usize) -> Result<Vec<T>> {
    if student.len() != teacher.len() {
        return Err(Error::arg(
            "student and teacher feature arrays differ in size",
        ));
    }
    if channels == 0 || !student.len().is_multiple_of(channels) {
        return Err(Error::arg("feature array is not a whole number of rows"));
    }
    let n = student.len() / channels;
    if n == 0 {
        return Ok(Vec::new());
    }
    let ps = pairwise_similarity(student, channels);
    let pt = pairwise_similarity(teacher, channels);
    let norms = row_norms(student, channels);
    let eps = T::lit(NORM_EPS);
    let unit: Vec<T> = student
        .chunks_exact(channels)
        .zip(&norms)
        .flat_map(|(r, &nr)| {
            r.iter()
                .map(move |&v| if nr <= eps { T::zero() } else { v / nr })
        })
        .collect();
    let scale = T::lit(4.0 / (n * n) as f64);

    let grad: Vec<T> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut du = vec![T::zero(); channels];
            if norms[i] > eps {
                for j in 0..n {
                    let r = ps.get(i, j) - pt.get(i, j);
                    for (d, &u) in du.iter_mut().zip(&unit[j * channels..(j + 1) * channels]) {
                        *d = *d + r * u;
                    }
                }
                let ui = &unit[i * channels..(i + 1) * channels];
                let radial = du.iter().zip(ui).fold(T::zero(), |a, (&d, &u)| a + d * u);
                for (d, &u) in du.iter_mut().zip(ui) {
                    *d = scale * (*d - radial * u) / norms[i];
                }
            }
            du.into_iter()
        })
        .collect();
    Ok(grad)
}
