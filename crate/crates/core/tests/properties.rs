use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

use spe_core::encoding::bspline_basis;
use spe_core::geometry::{chamfer, chamfer_bruteforce};
use spe_core::io::{decode_ppm, encode_ppm};
use spe_core::{Image, SplineConfig, SplineEncoding};

fn encoding(seed: u64, dim: usize, k: usize, degree: usize) -> SplineEncoding {
    let mut cfg = SplineConfig::new(dim, k, 4, 3);
    cfg.degree = degree;
    SplineEncoding::new(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn point3() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-1.0f64..1.0)
}

proptest! {
    #[test]
    fn shifted_bases_sum_to_one(t in -20.0f64..20.0, degree in 1usize..=2) {
        let s: f64 = (-25..=25).map(|i| bspline_basis(t - i as f64, degree).unwrap().0).sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn basis_is_nonnegative_and_compact(t in -3.0f64..3.0, degree in 0usize..=2) {
        let (v, _) = bspline_basis(t, degree).unwrap();
        prop_assert!(v >= 0.0);
        if t.abs() > (degree as f64 + 1.0) / 2.0 {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn degree_one_refine_keeps_encoding(seed in any::<u64>(), x in point3()) {
        let enc = encoding(seed, 3, 4, 1);
        let fine = enc.refine();
        prop_assert_eq!(fine.segments(), 8);
        let a = enc.encode(&x).unwrap();
        let b = fine.encode(&x).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert_relative_eq!(u, v, epsilon = 1e-12);
        }
    }

    #[test]
    fn params_round_trip(seed in any::<u64>(), degree in 0usize..=2) {
        let enc = encoding(seed, 2, 6, degree);
        let mut other = encoding(seed.wrapping_add(1), 2, 6, degree);
        other.set_params(&enc.params()).unwrap();
        prop_assert_eq!(other.params(), enc.params());
        let x = [0.3, -0.7];
        prop_assert_eq!(other.encode(&x).unwrap(), enc.encode(&x).unwrap());
    }

    #[test]
    fn kdtree_chamfer_matches_bruteforce(
        a in prop::collection::vec(point3(), 1..60),
        b in prop::collection::vec(point3(), 1..60),
    ) {
        let fast = chamfer(&a, &b).unwrap();
        assert_relative_eq!(fast, chamfer_bruteforce(&a, &b).unwrap(), max_relative = 1e-12);
        assert_relative_eq!(fast, chamfer(&b, &a).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn ppm_round_trips_quantized_images(
        w in 1usize..9,
        h in 1usize..9,
        rgb in any::<bool>(),
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let c = if rgb { 3 } else { 1 };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..w * h * c).map(|_| rng.random_range(0..=255u8) as f64 / 255.0).collect();
        let img = Image::new(w, h, c, data).unwrap();
        let bytes = encode_ppm(&img);
        let back = decode_ppm(&bytes, Path::new("mem")).unwrap();
        prop_assert_eq!(&back, &img);
        prop_assert_eq!(encode_ppm(&back), bytes);
    }
}
