use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ssc_core::distill::{align, dskd_loss_aligned};
use ssc_core::voxel::SparseVoxelTensor;
use ssc_core::Error;
use ssc_testkit as tk;

fn tensor(rng: &mut ChaCha8Rng, n: usize, c: usize) -> SparseVoxelTensor<f64> {
    let dims = [6, 6, 4];
    let idx = tk::random_indices(rng, dims, n);
    let feats = tk::random_features(rng, idx.len(), c);
    SparseVoxelTensor::new(dims, c, idx, feats).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn align_matches_map_lookup(seed in any::<u64>(), ns in 0usize..40, nt in 0usize..80, c in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = tensor(&mut rng, ns, c);
        let t = tensor(&mut rng, nt, c);
        let pairs = tk::align_by_map(s.indices(), t.indices());
        match align(&s, &t) {
            Ok(a) => {
                prop_assert_eq!(a.student.len(), pairs.len());
                for (k, &(i, j)) in pairs.iter().enumerate() {
                    prop_assert_eq!(a.student.indices()[k], s.indices()[i]);
                    prop_assert_eq!(a.teacher.indices()[k], t.indices()[j]);
                    prop_assert_eq!(a.student.row(k), s.row(i));
                    prop_assert_eq!(a.teacher.row(k), t.row(j));
                }
                let expected = if s.is_empty() { 1.0 } else { pairs.len() as f64 / s.len() as f64 };
                prop_assert_eq!(a.matched_fraction, expected);
            }
            Err(Error::Alignment(_)) => prop_assert!(pairs.is_empty() && !s.is_empty()),
            Err(e) => prop_assert!(false, "unexpected {e:?}"),
        }
    }

    #[test]
    fn self_alignment_is_lossless(seed in any::<u64>(), n in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = tensor(&mut rng, n, 3);
        let a = align(&s, &s).unwrap();
        prop_assert_eq!(a.matched_fraction, 1.0);
        prop_assert_eq!(dskd_loss_aligned(&a).unwrap(), 0.0);
    }
}
