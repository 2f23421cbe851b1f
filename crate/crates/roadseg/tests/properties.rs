//! Property tests over randomized inputs.

use proptest::prelude::*;

use roadseg::eval::{confusion, rates};
use roadseg::netpbm::{load_mask_pgm, load_ppm, save_mask_pgm, save_ppm};
use roadseg::raster::{box_mean, rgb_to_hsv, BinaryMask, GrayRaster, RgbRaster};
use roadseg::shadow::compute_ndi;

fn rgb_raster() -> impl Strategy<Value = RgbRaster> {
    (1usize..12, 1usize..12)
        .prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<[u8; 3]>(), w * h)
                .prop_map(move |pixels| RgbRaster::new(w, h, pixels))
        })
}

fn mask_pair() -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
    (1usize..10, 1usize..10).prop_flat_map(|(w, h)| {
        let bits = || proptest::collection::vec(any::<bool>(), w * h);
        (bits(), bits()).prop_map(move |(a, b)| {
            (BinaryMask::new(w, h, a), BinaryMask::new(w, h, b))
        })
    })
}

proptest! {
    #[test]
    fn codec_round_trip_is_identity(img in rgb_raster()) {
        let bytes = save_ppm(&img);
        let back = load_ppm(&bytes).unwrap();
        prop_assert_eq!(&back, &img);
        prop_assert_eq!(save_ppm(&back), bytes);
    }

    #[test]
    fn mask_codec_round_trip(pair in mask_pair()) {
        let (mask, _) = pair;
        prop_assert_eq!(load_mask_pgm(&save_mask_pgm(&mask)).unwrap(), mask);
    }

    #[test]
    fn hsv_ranges_and_achromatic_rule(img in rgb_raster()) {
        let hsv = rgb_to_hsv(&img);
        for (p, rgb) in hsv.pixels().iter().zip(img.pixels()) {
            prop_assert!((0.0..=1.0).contains(&p.saturation));
            prop_assert!((0.0..=1.0).contains(&p.value));
            let achromatic = rgb[0] == rgb[1] && rgb[1] == rgb[2];
            prop_assert_eq!(p.saturation == 0.0, achromatic);
            prop_assert_eq!(p.hue.is_none(), achromatic);
            if let Some(h) = p.hue {
                prop_assert!((0.0..360.0).contains(&h));
            }
        }
    }

    #[test]
    fn ndi_stays_in_band(img in rgb_raster()) {
        for &v in compute_ndi(&rgb_to_hsv(&img)).values() {
            prop_assert!((-1.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn box_mean_is_bounded(values in proptest::collection::vec(0.0f64..1.0, 36), radius in 0usize..4) {
        let src = GrayRaster::new(6, 6, values);
        let lo = src.values().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = src.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let out = box_mean(&src, radius);
        for &v in out.values() {
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn confusion_partitions_and_swaps(pair in mask_pair()) {
        let (a, b) = pair;
        let ab = confusion(&a, &b).unwrap();
        let ba = confusion(&b, &a).unwrap();
        prop_assert_eq!(ab.total(), a.width() * a.height());
        prop_assert_eq!(ab.true_pos, ba.true_pos);
        prop_assert_eq!(ab.true_neg, ba.true_neg);
        prop_assert_eq!(ab.false_pos, ba.false_neg);
        prop_assert_eq!(ab.false_neg, ba.false_pos);
        let r = rates(&ab);
        for v in [r.fnr, r.fpr].into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
