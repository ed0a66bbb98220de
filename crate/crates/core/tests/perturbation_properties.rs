use proptest::prelude::*;
use vcal_core::image::{BinaryMask, ImageTensor};
use vcal_core::mask::{synth_mask, MaskShape};
use vcal_core::oracles::{diffusion_moments, gaussian_standard_errors, sample_moments};
use vcal_core::perturb::{confidence_to_steps, perturb, ConfidenceLabel, PerturbationConfig};

fn image(h: usize, w: usize, c: usize, salt: usize) -> ImageTensor {
    let bytes: Vec<u8> = (0..h * w * c)
        .map(|i| ((i * 37 + salt * 11) % 256) as u8)
        .collect();
    ImageTensor::from_bytes(h, w, c, &bytes).unwrap()
}

#[test]
fn constant_region_statistics_follow_closed_form() {
    let (h, w) = (120, 120);
    let a = 0.4;
    let v0 = ImageTensor::filled(h, w, 1, a).unwrap();
    let mask = BinaryMask::full(h, w);
    for (c, gamma) in [(0i64, 0.02), (50, 0.02), (80, 0.01), (95, 0.1)] {
        let cfg = PerturbationConfig {
            t_max: 300,
            gamma,
            seed: c as u64,
            ..Default::default()
        };
        let label = ConfidenceLabel::new(c).unwrap();
        let out = perturb(&v0, &mask, label, &cfg).unwrap();
        let steps = confidence_to_steps(label, cfg.t_max);
        let (want_mean, want_var) = diffusion_moments(a, gamma, steps);
        let (mean, var) = sample_moments(out.data());
        let (se_mean, se_var) = gaussian_standard_errors(want_var, out.data().len());
        assert!(
            (mean - want_mean).abs() < 4.0 * se_mean,
            "c={c}: mean {mean} vs {want_mean}"
        );
        assert!(
            (var - want_var).abs() < 4.0 * se_var,
            "c={c}: var {var} vs {want_var}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn unmasked_pixels_are_untouched(
        c in 0i64..=100, seed in any::<u64>(),
        top in 0usize..20, left in 0usize..20, mh in 1usize..12, mw in 1usize..12,
        channels in prop_oneof![Just(1usize), Just(3usize)],
    ) {
        let v0 = image(32, 32, channels, seed as usize % 97);
        let mask = synth_mask((32, 32), MaskShape::Rect { top, left, height: mh, width: mw }).unwrap();
        let cfg = PerturbationConfig { t_max: 60, seed, ..Default::default() };
        let out = perturb(&v0, &mask, ConfidenceLabel::new(c).unwrap(), &cfg).unwrap();
        for r in 0..32 {
            for col in 0..32 {
                if !mask.get(r, col) {
                    let same = out.pixel(r, col).iter().zip(v0.pixel(r, col))
                        .all(|(a, b)| a.to_bits() == b.to_bits());
                    prop_assert!(same);
                }
            }
        }
    }

    #[test]
    fn full_confidence_is_exact_identity(seed in any::<u64>(), t_max in 1u32..2000) {
        let v0 = image(16, 12, 3, 3);
        let cfg = PerturbationConfig { t_max, seed, ..Default::default() };
        let out = perturb(&v0, &BinaryMask::full(16, 12), ConfidenceLabel::MAX, &cfg).unwrap();
        prop_assert_eq!(out, v0);
    }

    #[test]
    fn seed_fixes_output(seed in any::<u64>(), c in 0i64..100) {
        let v0 = image(10, 10, 1, 1);
        let mask = BinaryMask::full(10, 10);
        let cfg = PerturbationConfig { t_max: 40, seed, ..Default::default() };
        let label = ConfidenceLabel::new(c).unwrap();
        let a = perturb(&v0, &mask, label, &cfg).unwrap();
        let b = perturb(&v0, &mask, label, &cfg).unwrap();
        prop_assert_eq!(a.to_bytes(), b.to_bytes());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn steps_monotone_in_confidence(c1 in 0i64..=100, c2 in 0i64..=100, t_max in 1u32..5000) {
        let (lo, hi) = (c1.min(c2), c1.max(c2));
        let t_lo = confidence_to_steps(ConfidenceLabel::new(lo).unwrap(), t_max);
        let t_hi = confidence_to_steps(ConfidenceLabel::new(hi).unwrap(), t_max);
        prop_assert!(t_lo >= t_hi);
    }
}
