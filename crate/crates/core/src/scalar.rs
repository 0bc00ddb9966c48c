use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast};

/// Real scalar used by every numeric kernel in the crate: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumCast + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal or computed constant.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        <f64 as NumCast>::from(self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Sums a slice by recursive halving so the result depends only on the
/// slice contents and length, never on the caller's chunking.
pub fn pairwise_sum<T: Scalar>(values: &[T]) -> T {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        let mut acc = T::zero();
        for &v in values {
            acc = acc + v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (1..=1000u32).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
        assert_eq!(pairwise_sum::<f32>(&[]), 0.0);
    }

    #[test]
    fn lit_roundtrips() {
        assert_eq!(f32::lit(0.5), 0.5f32);
        assert_eq!(f64::lit(3000.0).to_f64_lossy(), 3000.0);
    }
}
