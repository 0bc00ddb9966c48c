//! Forward pass of the sparsity-preserving completion network.
//!
//! Every convolution is stride 1 with symmetric zero padding, has no bias and
//! is followed by no normalization, so an exactly-zero region of the input
//! stays exactly zero beyond the receptive field. The network is
//!
//! ```text
//! out = MPB(x) + Conv3(MPB(MPB(Conv3(x)))) + x
//! MPB(x) = max(Conv3(x) + Conv5(x) + Conv7(x), 0)
//! ```

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{read_bytes, write_bytes};
use crate::scalar::Scalar;
use crate::voxel::{linear_index, Volume};

/// Weight-file magic.
pub const WEIGHT_MAGIC: &[u8; 7] = b"SSCWGT1";

/// `k x k x k x C_in x C_out` cross-correlation weights; no bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel<T> {
    k: usize,
    c_in: usize,
    c_out: usize,
    weights: Vec<T>,
}

impl<T: Scalar> ConvKernel<T> {
    pub fn new(k: usize, c_in: usize, c_out: usize, weights: Vec<T>) -> Result<Self> {
        if ![3, 5, 7].contains(&k) {
            return Err(Error::arg(format!("kernel size {k} must be 3, 5 or 7")));
        }
        if c_in == 0 || c_out == 0 {
            return Err(Error::arg("kernel channels must be positive"));
        }
        if weights.len() != k * k * k * c_in * c_out {
            return Err(Error::arg(format!(
                "{} weights for a {k}^3 x {c_in} x {c_out} kernel",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::arg("kernel weights must be finite"));
        }
        Ok(Self {
            k,
            c_in,
            c_out,
            weights,
        })
    }

    pub fn zeros(k: usize, c_in: usize, c_out: usize) -> Result<Self> {
        Self::new(k, c_in, c_out, vec![T::zero(); k * k * k * c_in * c_out])
    }

    /// Center tap is the identity matrix, all other taps zero.
    pub fn identity(k: usize, channels: usize) -> Result<Self> {
        let mut kern = Self::zeros(k, channels, channels)?;
        let r = k / 2;
        for c in 0..channels {
            *kern.weight_mut([r, r, r], c, c) = T::one();
        }
        Ok(kern)
    }

    /// Uniform in `[-s, s]` with `s = 1 / sqrt(k³ · C_in)`.
    pub fn random(k: usize, c_in: usize, c_out: usize, rng: &mut impl Rng) -> Result<Self> {
        let s = 1.0 / ((k * k * k * c_in) as f64).sqrt();
        let weights = (0..k * k * k * c_in * c_out)
            .map(|_| T::lit(rng.gen_range(-s..=s)))
            .collect();
        Self::new(k, c_in, c_out, weights)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn radius(&self) -> usize {
        (self.k - 1) / 2
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    #[inline]
    fn offset(&self, tap: [usize; 3], ci: usize, co: usize) -> usize {
        ((((tap[0] * self.k + tap[1]) * self.k + tap[2]) * self.c_in + ci) * self.c_out) + co
    }

    pub fn weight(&self, tap: [usize; 3], ci: usize, co: usize) -> T {
        self.weights[self.offset(tap, ci, co)]
    }

    pub fn weight_mut(&mut self, tap: [usize; 3], ci: usize, co: usize) -> &mut T {
        let o = self.offset(tap, ci, co);
        &mut self.weights[o]
    }

    /// `C_in x C_out` block of one tap.
    fn tap_block(&self, tap: [usize; 3]) -> &[T] {
        let o = self.offset(tap, 0, 0);
        &self.weights[o..o + self.c_in * self.c_out]
    }

    pub fn cast<U: Scalar>(&self) -> ConvKernel<U> {
        ConvKernel {
            k: self.k,
            c_in: self.c_in,
            c_out: self.c_out,
            weights: self
                .weights
                .iter()
                .map(|w| U::lit(w.to_f64_lossy()))
                .collect(),
        }
    }
}

/// Occupancy of each voxel (any nonzero channel).
fn occupancy<T: Scalar>(input: &Volume<T>) -> Vec<bool> {
    (0..input.num_voxels())
        .map(|li| input.voxel_max_abs(li) != T::zero())
        .collect()
}

/// Chebyshev dilation of a boolean mask by `r`, one axis at a time.
pub fn dilate(mask: &[bool], dims: [usize; 3], r: usize) -> Vec<bool> {
    let mut cur = mask.to_vec();
    for axis in 0..3 {
        let mut next = vec![false; cur.len()];
        for (li, &set) in cur.iter().enumerate() {
            if !set {
                continue;
            }
            let idx = crate::voxel::voxel_index(dims, li);
            let lo = idx[axis].saturating_sub(r);
            let hi = (idx[axis] + r).min(dims[axis] - 1);
            for v in lo..=hi {
                let mut j = idx;
                j[axis] = v;
                next[linear_index(dims, j)] = true;
            }
        }
        cur = next;
    }
    cur
}

/// Stride-1, zero-padded, bias-free 3D cross-correlation.
///
/// Only outputs within the kernel radius of a nonempty input voxel are
/// computed and only nonempty input voxels are read; every other output is
/// exactly zero. Each output sums its taps in a fixed `(kx, ky, kz, c_in)`
/// order, so results do not depend on the thread count.
pub fn conv3d<T: Scalar>(input: &Volume<T>, kernel: &ConvKernel<T>) -> Result<Volume<T>> {
    if input.channels() != kernel.c_in {
        return Err(Error::arg(format!(
            "input has {} channels, kernel expects {}",
            input.channels(),
            kernel.c_in
        )));
    }
    let dims = input.dims();
    let (k, r, c_in, c_out) = (kernel.k, kernel.radius(), kernel.c_in, kernel.c_out);
    let occupied = occupancy(input);
    let active = dilate(&occupied, dims, r);
    let mut out = Volume::zeros(dims, c_out);
    let slab = dims[1] * dims[2] * c_out;
    let data = input.data();

    out.data_mut()
        .par_chunks_mut(slab)
        .enumerate()
        .for_each(|(x, slab_out)| {
            let mut acc = vec![T::zero(); c_out];
            for y in 0..dims[1] {
                for z in 0..dims[2] {
                    if !active[linear_index(dims, [x, y, z])] {
                        continue;
                    }
                    acc.iter_mut().for_each(|a| *a = T::zero());
                    for kx in 0..k {
                        let Some(ix) = (x + kx).checked_sub(r).filter(|&v| v < dims[0]) else {
                            continue;
                        };
                        for ky in 0..k {
                            let Some(iy) = (y + ky).checked_sub(r).filter(|&v| v < dims[1]) else {
                                continue;
                            };
                            for kz in 0..k {
                                let Some(iz) = (z + kz).checked_sub(r).filter(|&v| v < dims[2])
                                else {
                                    continue;
                                };
                                let li = linear_index(dims, [ix, iy, iz]);
                                if !occupied[li] {
                                    continue;
                                }
                                let feat = &data[li * c_in..(li + 1) * c_in];
                                let block = kernel.tap_block([kx, ky, kz]);
                                for (ci, &f) in feat.iter().enumerate() {
                                    let row = &block[ci * c_out..(ci + 1) * c_out];
                                    for (a, &w) in acc.iter_mut().zip(row) {
                                        *a = *a + f * w;
                                    }
                                }
                            }
                        }
                    }
                    let o = (y * dims[2] + z) * c_out;
                    slab_out[o..o + c_out].copy_from_slice(&acc);
                }
            }
        });
    Ok(out)
}

/// Parallel 3/5/7 convolutions with equal channel widths.
#[derive(Debug, Clone, PartialEq)]
pub struct MPBParams<T> {
    pub k3: ConvKernel<T>,
    pub k5: ConvKernel<T>,
    pub k7: ConvKernel<T>,
}

impl<T: Scalar> MPBParams<T> {
    pub fn new(k3: ConvKernel<T>, k5: ConvKernel<T>, k7: ConvKernel<T>) -> Result<Self> {
        if (k3.k, k5.k, k7.k) != (3, 5, 7) {
            return Err(Error::arg(
                "multi-path block needs 3, 5 and 7 kernels in that order",
            ));
        }
        let ch = (k3.c_in, k3.c_out);
        if (k5.c_in, k5.c_out) != ch || (k7.c_in, k7.c_out) != ch {
            return Err(Error::arg("multi-path block kernels disagree on channels"));
        }
        Ok(Self { k3, k5, k7 })
    }

    pub fn zeros(c_in: usize, c_out: usize) -> Result<Self> {
        Self::new(
            ConvKernel::zeros(3, c_in, c_out)?,
            ConvKernel::zeros(5, c_in, c_out)?,
            ConvKernel::zeros(7, c_in, c_out)?,
        )
    }

    pub fn random(c_in: usize, c_out: usize, rng: &mut impl Rng) -> Result<Self> {
        Self::new(
            ConvKernel::random(3, c_in, c_out, rng)?,
            ConvKernel::random(5, c_in, c_out, rng)?,
            ConvKernel::random(7, c_in, c_out, rng)?,
        )
    }

    pub fn radius(&self) -> usize {
        self.k3.radius().max(self.k5.radius()).max(self.k7.radius())
    }

    fn kernels(&self) -> [&ConvKernel<T>; 3] {
        [&self.k3, &self.k5, &self.k7]
    }
}

fn add_assign<T: Scalar>(acc: &mut Volume<T>, other: &Volume<T>) {
    for (a, &b) in acc.data_mut().iter_mut().zip(other.data()) {
        *a = *a + b;
    }
}

/// `max(conv3(x) + conv5(x) + conv7(x), 0)`.
pub fn mpb_forward<T: Scalar>(input: &Volume<T>, params: &MPBParams<T>) -> Result<Volume<T>> {
    let [k3, k5, k7] = params.kernels();
    let mut out = conv3d(input, k3)?;
    add_assign(&mut out, &conv3d(input, k5)?);
    add_assign(&mut out, &conv3d(input, k7)?);
    for v in out.data_mut() {
        *v = v.max(T::zero());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionParams<T> {
    pub upper_mpb: MPBParams<T>,
    pub mid_in: ConvKernel<T>,
    pub mid_mpb1: MPBParams<T>,
    pub mid_mpb2: MPBParams<T>,
    pub mid_out: ConvKernel<T>,
}

impl<T: Scalar> CompletionParams<T> {
    pub fn new(
        upper_mpb: MPBParams<T>,
        mid_in: ConvKernel<T>,
        mid_mpb1: MPBParams<T>,
        mid_mpb2: MPBParams<T>,
        mid_out: ConvKernel<T>,
    ) -> Result<Self> {
        let p = Self {
            upper_mpb,
            mid_in,
            mid_mpb1,
            mid_mpb2,
            mid_out,
        };
        if p.mid_in.k != 3 || p.mid_out.k != 3 {
            return Err(Error::arg("middle branch end convolutions must be 3x3x3"));
        }
        let c = p.channels();
        if p.kernels().iter().any(|k| k.c_in != c || k.c_out != c) {
            return Err(Error::arg(
                "completion network needs C_in = C_out everywhere",
            ));
        }
        Ok(p)
    }

    pub fn zeros(channels: usize) -> Result<Self> {
        Self::new(
            MPBParams::zeros(channels, channels)?,
            ConvKernel::zeros(3, channels, channels)?,
            MPBParams::zeros(channels, channels)?,
            MPBParams::zeros(channels, channels)?,
            ConvKernel::zeros(3, channels, channels)?,
        )
    }

    /// Seeded uniform initialization; draw order follows [`Self::kernels`].
    pub fn random(channels: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let upper_mpb = MPBParams::random(channels, channels, &mut rng)?;
        let mid_in = ConvKernel::random(3, channels, channels, &mut rng)?;
        let mid_mpb1 = MPBParams::random(channels, channels, &mut rng)?;
        let mid_mpb2 = MPBParams::random(channels, channels, &mut rng)?;
        let mid_out = ConvKernel::random(3, channels, channels, &mut rng)?;
        Self::new(upper_mpb, mid_in, mid_mpb1, mid_mpb2, mid_out)
    }

    pub fn channels(&self) -> usize {
        self.mid_in.c_in
    }

    /// All eleven kernels in serialization order.
    pub fn kernels(&self) -> [&ConvKernel<T>; 11] {
        let [u3, u5, u7] = self.upper_mpb.kernels();
        let [a3, a5, a7] = self.mid_mpb1.kernels();
        let [b3, b5, b7] = self.mid_mpb2.kernels();
        [
            u3,
            u5,
            u7,
            &self.mid_in,
            a3,
            a5,
            a7,
            b3,
            b5,
            b7,
            &self.mid_out,
        ]
    }

    /// Largest Chebyshev distance an input voxel can influence.
    pub fn receptive_radius(&self) -> usize {
        let upper = self.upper_mpb.radius();
        let middle = self.mid_in.radius()
            + self.mid_mpb1.radius()
            + self.mid_mpb2.radius()
            + self.mid_out.radius();
        upper.max(middle)
    }

    pub fn cast<U: Scalar>(&self) -> CompletionParams<U> {
        let mpb = |m: &MPBParams<T>| MPBParams {
            k3: m.k3.cast(),
            k5: m.k5.cast(),
            k7: m.k7.cast(),
        };
        CompletionParams {
            upper_mpb: mpb(&self.upper_mpb),
            mid_in: self.mid_in.cast(),
            mid_mpb1: mpb(&self.mid_mpb1),
            mid_mpb2: mpb(&self.mid_mpb2),
            mid_out: self.mid_out.cast(),
        }
    }
}

/// Upper branch + middle branch + residual.
pub fn completion_forward<T: Scalar>(
    input: &Volume<T>,
    params: &CompletionParams<T>,
) -> Result<Volume<T>> {
    if input.channels() != params.channels() {
        return Err(Error::arg(format!(
            "input has {} channels, network expects {}",
            input.channels(),
            params.channels()
        )));
    }
    let mut out = mpb_forward(input, &params.upper_mpb)?;
    let mid = conv3d(input, &params.mid_in)?;
    let mid = mpb_forward(&mid, &params.mid_mpb1)?;
    let mid = mpb_forward(&mid, &params.mid_mpb2)?;
    let mid = conv3d(&mid, &params.mid_out)?;
    add_assign(&mut out, &mid);
    add_assign(&mut out, input);
    Ok(out)
}

/// `SSCWGT1`, then per kernel `u32 k, C_in, C_out` and `f32` weights in
/// `(kx, ky, kz, c_in, c_out)` order, for the eleven kernels of
/// [`CompletionParams::kernels`].
pub fn encode_params<T: Scalar>(params: &CompletionParams<T>) -> Vec<u8> {
    let mut out = WEIGHT_MAGIC.to_vec();
    for kern in params.kernels() {
        for v in [kern.k, kern.c_in, kern.c_out] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for w in &kern.weights {
            out.extend_from_slice(&(w.to_f64_lossy() as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_params<T: Scalar>(bytes: &[u8]) -> Result<CompletionParams<T>> {
    if bytes.len() < WEIGHT_MAGIC.len() || &bytes[..WEIGHT_MAGIC.len()] != WEIGHT_MAGIC {
        return Err(Error::format(0, "bad weight-file magic"));
    }
    let mut pos = WEIGHT_MAGIC.len();
    let word = |pos: &mut usize| -> Result<u32> {
        let b = bytes
            .get(*pos..*pos + 4)
            .ok_or_else(|| Error::format(*pos as u64, "unexpected end of weight file"))?;
        *pos += 4;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    };
    let mut kernels = Vec::with_capacity(11);
    for _ in 0..11 {
        let at = pos as u64;
        let (k, c_in, c_out) = (
            word(&mut pos)? as usize,
            word(&mut pos)? as usize,
            word(&mut pos)? as usize,
        );
        if ![3, 5, 7].contains(&k) || c_in == 0 || c_out == 0 || c_in > 4096 || c_out > 4096 {
            return Err(Error::format(
                at,
                format!("bad kernel header k={k} c_in={c_in} c_out={c_out}"),
            ));
        }
        let n = k * k * k * c_in * c_out;
        let mut weights = Vec::with_capacity(n);
        for _ in 0..n {
            weights.push(T::lit(f32::from_bits(word(&mut pos)?) as f64));
        }
        kernels.push(
            ConvKernel::new(k, c_in, c_out, weights)
                .map_err(|e| Error::format(at, e.to_string()))?,
        );
    }
    if pos != bytes.len() {
        return Err(Error::format(
            pos as u64,
            "trailing bytes after eleven kernels",
        ));
    }
    let mut it = kernels.into_iter();
    let mut next = || it.next().expect("eleven kernels");
    let upper = MPBParams::new(next(), next(), next());
    let mid_in = next();
    let m1 = MPBParams::new(next(), next(), next());
    let m2 = MPBParams::new(next(), next(), next());
    let mid_out = next();
    CompletionParams::new(upper?, mid_in, m1?, m2?, mid_out)
        .map_err(|e| Error::format(0, e.to_string()))
}

pub fn read_params<T: Scalar>(path: impl AsRef<Path>) -> Result<CompletionParams<T>> {
    decode_params(&read_bytes(path.as_ref())?)
}

pub fn write_params<T: Scalar>(params: &CompletionParams<T>, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_params(params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_volume(dims: [usize; 3], c: usize, seed: u64, density: f64) -> Volume<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = Volume::zeros(dims, c);
        for li in 0..v.num_voxels() {
            if rng.gen_bool(density) {
                for ch in 0..c {
                    v.data_mut()[li * c + ch] = rng.gen_range(-1.0..1.0);
                }
            }
        }
        v
    }

    #[test]
    fn identity_kernel_is_identity() {
        let v = random_volume([5, 4, 3], 2, 1, 0.5);
        for k in [3, 5, 7] {
            assert_eq!(conv3d(&v, &ConvKernel::identity(k, 2).unwrap()).unwrap(), v);
        }
    }

    #[test]
    fn single_voxel_response() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let kern = ConvKernel::<f64>::random(3, 2, 3, &mut rng).unwrap();
        let mut v = Volume::zeros([6, 6, 6], 2);
        v.voxel_mut([2, 3, 4]).copy_from_slice(&[0.7, -1.3]);
        let out = conv3d(&v, &kern).unwrap();
        for x in 0..6 {
            for y in 0..6 {
                for z in 0..6 {
                    let d = [x as isize - 2, y as isize - 3, z as isize - 4];
                    let got = out.voxel([x, y, z]);
                    if d.iter().any(|v| v.abs() > 1) {
                        assert!(got.iter().all(|&g| g == 0.0));
                        continue;
                    }
                    // out[p] = sum_tap in[p + tap - r] w[tap]  =>  tap = r - d
                    let tap = d.map(|v| (1 - v) as usize);
                    for (co, &g) in got.iter().enumerate() {
                        let expect = 0.7 * kern.weight(tap, 0, co) - 1.3 * kern.weight(tap, 1, co);
                        assert!((g - expect).abs() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_input_zero_output() {
        let p = CompletionParams::<f64>::random(4, 9).unwrap();
        let v = Volume::zeros([6, 6, 4], 4);
        let out = completion_forward(&v, &p).unwrap();
        assert_eq!(out.max_abs(), 0.0);
        assert_eq!(conv3d(&v, &p.mid_in).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn channel_mismatch() {
        let v = Volume::<f64>::zeros([3, 3, 3], 2);
        let k = ConvKernel::zeros(3, 3, 3).unwrap();
        assert!(matches!(conv3d(&v, &k), Err(Error::Argument(_))));
        assert!(ConvKernel::<f64>::zeros(4, 1, 1).is_err());
        assert!(MPBParams::new(
            ConvKernel::<f64>::zeros(3, 1, 1).unwrap(),
            ConvKernel::zeros(5, 1, 2).unwrap(),
            ConvKernel::zeros(7, 1, 1).unwrap()
        )
        .is_err());
    }

    #[test]
    fn mpb_examples() {
        let mut v = random_volume([4, 4, 4], 2, 5, 0.6);
        assert_eq!(
            mpb_forward(&v, &MPBParams::zeros(2, 2).unwrap())
                .unwrap()
                .max_abs(),
            0.0
        );

        for x in v.data_mut() {
            *x = x.abs();
        }
        let ident = MPBParams::new(
            ConvKernel::identity(3, 2).unwrap(),
            ConvKernel::identity(5, 2).unwrap(),
            ConvKernel::identity(7, 2).unwrap(),
        )
        .unwrap();
        let out = mpb_forward(&v, &ident).unwrap();
        for (o, i) in out.data().iter().zip(v.data()) {
            assert!((o - 3.0 * i).abs() < 1e-15);
        }

        let neg = MPBParams::new(
            ConvKernel::identity(3, 2).unwrap(),
            ConvKernel::zeros(5, 2, 2).unwrap(),
            ConvKernel::zeros(7, 2, 2).unwrap(),
        )
        .unwrap();
        let negative =
            Volume::from_data([4, 4, 4], 2, v.data().iter().map(|x| -x - 0.1).collect()).unwrap();
        assert_eq!(mpb_forward(&negative, &neg).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn zero_weights_leave_residual() {
        let v = random_volume([5, 5, 5], 3, 11, 0.3);
        let out = completion_forward(&v, &CompletionParams::zeros(3).unwrap()).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn receptive_radius_composition() {
        let p = CompletionParams::<f64>::zeros(2).unwrap();
        assert_eq!(p.upper_mpb.radius(), 3);
        assert_eq!(p.receptive_radius(), 8);
    }

    #[test]
    fn dilate_matches_chebyshev_ball() {
        let dims = [7, 6, 5];
        let mut m = vec![false; 7 * 6 * 5];
        m[linear_index(dims, [3, 2, 2])] = true;
        let d = dilate(&m, dims, 2);
        for (li, &hit) in d.iter().enumerate() {
            let idx = crate::voxel::voxel_index(dims, li);
            let cheb = (0..3)
                .map(|a| (idx[a] as isize - [3, 2, 2][a] as isize).unsigned_abs())
                .max()
                .unwrap();
            assert_eq!(hit, cheb <= 2);
        }
    }

    #[test]
    fn weight_file_roundtrip_and_errors() {
        let p = CompletionParams::<f32>::random(2, 4).unwrap();
        let bytes = encode_params(&p);
        assert_eq!(&bytes[..7], b"SSCWGT1");
        assert_eq!(decode_params::<f32>(&bytes).unwrap(), p);
        assert!(decode_params::<f32>(&bytes[..bytes.len() - 2]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_params::<f32>(&bad).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_params::<f32>(&extra).is_err());
    }

    #[test]
    fn random_init_bounds() {
        let p = CompletionParams::<f64>::random(3, 42).unwrap();
        for k in p.kernels() {
            let s = 1.0 / ((k.k().pow(3) * k.c_in()) as f64).sqrt();
            assert!(k.weights().iter().all(|w| w.abs() <= s));
        }
        assert_eq!(p, CompletionParams::random(3, 42).unwrap());
    }

    #[test]
    fn f32_and_f64_agree() {
        let v = random_volume([5, 5, 4], 2, 21, 0.3);
        let p = CompletionParams::<f64>::random(2, 8).unwrap();
        let a = completion_forward(&v, &p).unwrap();
        let v32 =
            Volume::from_data(v.dims(), 2, v.data().iter().map(|&x| x as f32).collect()).unwrap();
        let b = completion_forward(&v32, &p.cast::<f32>()).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - *y as f64).abs() < 1e-4);
        }
    }
}
