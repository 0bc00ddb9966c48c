use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssc_core::net::{
    completion_forward, conv3d, dilate, mpb_forward, CompletionParams, ConvKernel, MPBParams,
};
use ssc_core::voxel::{linear_index, Volume};
use ssc_testkit as tk;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn conv3d_matches_dense_oracle() {
    let mut r = rng(1);
    for case in 0..24 {
        let dims = [r.gen_range(1..=8), r.gen_range(1..=8), r.gen_range(1..=8)];
        let k = [3, 5, 7][case % 3];
        let (ci, co) = (r.gen_range(1..=3), r.gen_range(1..=3));
        let kernel = ConvKernel::random(k, ci, co, &mut r).unwrap();
        let density = r.gen_range(0.05..0.6);
        let input = tk::random_volume(&mut r, dims, ci, density);
        let fast = conv3d(&input, &kernel).unwrap();
        let slow = tk::conv3d_dense(&input, &kernel);
        let err = tk::rel_err_inf(fast.data(), slow.data());
        assert!(
            err <= 1e-9,
            "case {case}: k={k} dims={dims:?} rel err {err:e}"
        );
    }
}

#[test]
fn mpb_and_network_match_dense_oracle() {
    let mut r = rng(2);
    for case in 0..4 {
        let c = 1 + case % 2;
        let dims = [8, 8 - case, 6];
        let input = tk::random_volume(&mut r, dims, c, 0.15);
        let mpb = MPBParams::random(c, c, &mut r).unwrap();
        let err = tk::rel_err_inf(
            mpb_forward(&input, &mpb).unwrap().data(),
            tk::mpb_dense(&input, &mpb).data(),
        );
        assert!(err <= 1e-9, "mpb case {case}: {err:e}");

        let params = CompletionParams::<f64>::random(c, 100 + case as u64).unwrap();
        let fast = completion_forward(&input, &params).unwrap();
        let slow = tk::completion_dense(&input, &params);
        let err = tk::rel_err_inf(fast.data(), slow.data());
        assert!(err <= 1e-9, "network case {case}: {err:e}");
    }
}

#[test]
fn zero_input_stays_zero() {
    for seed in 0..3 {
        let params = CompletionParams::<f64>::random(2, seed).unwrap();
        let out = completion_forward(&Volume::zeros([10, 9, 8], 2), &params).unwrap();
        assert_eq!(out.max_abs(), 0.0);
    }
}

#[test]
fn single_voxel_support_within_receptive_field() {
    let dims = [16, 16, 8];
    let params = CompletionParams::<f64>::random(2, 9).unwrap();
    assert_eq!(params.receptive_radius(), 8);
    let mut r = rng(3);
    for _ in 0..3 {
        let seed_voxel = [r.gen_range(0..16), r.gen_range(0..16), r.gen_range(0..8)];
        let mut input = Volume::zeros(dims, 2);
        input.voxel_mut(seed_voxel).copy_from_slice(&[0.7, -1.3]);
        let out = completion_forward(&input, &params).unwrap();
        let allowed = tk::chebyshev_neighborhood(dims, &[seed_voxel], 8);
        assert!(tk::support(&out).is_subset(&allowed));
        assert!(tk::support(&out).contains(&seed_voxel));
    }
}

#[test]
fn dilation_matches_exhaustive_neighborhood() {
    let mut r = rng(4);
    for _ in 0..20 {
        let dims = [r.gen_range(1..10), r.gen_range(1..10), r.gen_range(1..6)];
        let radius = r.gen_range(0..4);
        let count = r.gen_range(0..4);
        let seeds = tk::random_indices(&mut r, dims, count);
        let mut mask = vec![false; dims.iter().product()];
        for s in &seeds {
            mask[linear_index(dims, *s)] = true;
        }
        let fast = dilate(&mask, dims, radius);
        let slow = tk::chebyshev_neighborhood(dims, &seeds, radius);
        for (li, &m) in fast.iter().enumerate() {
            assert_eq!(m, slow.contains(&ssc_core::voxel::voxel_index(dims, li)));
        }
    }
}

#[test]
fn f32_and_f64_agree() {
    let mut r = rng(5);
    let input = tk::random_volume(&mut r, [6, 6, 4], 2, 0.3);
    let params = CompletionParams::<f64>::random(2, 17).unwrap();
    let hi = completion_forward(&input, &params).unwrap();
    let lo = completion_forward(&cast_volume(&input), &params.cast::<f32>()).unwrap();
    let lo: Vec<f64> = lo.data().iter().map(|&v| v as f64).collect();
    assert!(tk::rel_err_inf(&lo, hi.data()) < 1e-4);
}

fn cast_volume(v: &Volume<f64>) -> Volume<f32> {
    Volume::from_data(
        v.dims(),
        v.channels(),
        v.data().iter().map(|&x| x as f32).collect(),
    )
    .unwrap()
}

#[test]
fn identical_results_across_thread_counts() {
    let mut r = rng(6);
    let input = tk::random_volume(&mut r, [8, 8, 8], 2, 0.2);
    let params = CompletionParams::<f64>::random(2, 21).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| completion_forward(&input, &params).unwrap())
    };
    assert_eq!(run(1), run(4));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conv_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut r = rng(seed);
        let dims = [5, 4, 3];
        let kernel = ConvKernel::random(3, 2, 2, &mut r).unwrap();
        let x = tk::random_volume(&mut r, dims, 2, 0.4);
        let y = tk::random_volume(&mut r, dims, 2, 0.4);
        let mix: Vec<f64> = x.data().iter().zip(y.data()).map(|(p, q)| a * p + b * q).collect();
        let lhs = conv3d(&Volume::from_data(dims, 2, mix).unwrap(), &kernel).unwrap();
        let cx = conv3d(&x, &kernel).unwrap();
        let cy = conv3d(&y, &kernel).unwrap();
        let rhs: Vec<f64> = cx.data().iter().zip(cy.data()).map(|(p, q)| a * p + b * q).collect();
        prop_assert!(tk::rel_err_inf(lhs.data(), &rhs) < 1e-12);
    }

    #[test]
    fn conv_output_support_inside_dilation(seed in any::<u64>(), k in prop::sample::select(vec![3usize, 5, 7])) {
        let mut r = rng(seed);
        let dims = [7, 6, 5];
        let kernel = ConvKernel::random(k, 1, 1, &mut r).unwrap();
        let x = tk::random_volume(&mut r, dims, 1, 0.05);
        let seeds: Vec<_> = tk::support(&x).into_iter().collect();
        let allowed = tk::chebyshev_neighborhood(dims, &seeds, kernel.radius());
        prop_assert!(tk::support(&conv3d(&x, &kernel).unwrap()).is_subset(&allowed));
    }
}
