//! Cross-module properties.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{energy_decay_curve, eyring_rt60, sabine_rt60};
use crate::dataset::{room_seed, sample_scene, SamplingOptions, Split};
use crate::directivity::eval_analytic;
use crate::geometry::enumerate_image_sources;
use crate::materials::{band_weights, cumulative_damping, N_BANDS};
use crate::{synthesize_rir, AirAbsorption, DatasetId, MaxOrder, Pose, Room, SurfaceProfile, SynthesisConfig, Transducer};

fn flat_room(dims: [f64; 3], alphas: [f64; 6]) -> Room {
    Room::new(dims, alphas.map(|a| SurfaceProfile::flat(a).unwrap())).unwrap()
}

fn inside(dims: [f64; 3], unit: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|a| 0.3 + unit[a] * (dims[a] - 0.6))
}

proptest! {
    #[test]
    fn band_weights_partition_unity(f in 0.0f64..24_000.0) {
        let nu = band_weights(f);
        prop_assert!(nu.iter().all(|v| *v >= 0.0));
        prop_assert!((nu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn image_count_matches_lattice_ball(
        order in 0u32..7,
        dims in prop::array::uniform3(2.0f64..9.0),
        unit in prop::array::uniform3(0.0f64..1.0),
    ) {
        let room = Room::uniform(dims, 0.2).unwrap();
        let images = enumerate_image_sources(&room, &Pose::at(inside(dims, unit)), order).unwrap();
        let n = order as usize;
        prop_assert_eq!(images.len(), (2 * n + 1) * (2 * n * n + 2 * n + 3) / 3);
        for img in &images {
            prop_assert_eq!(img.surface_sequence.len() as u32, img.order);
            let d = cumulative_damping(img, &room.surfaces);
            let rho = 0.8f64.sqrt().powi(img.order as i32);
            prop_assert!(d.iter().all(|v| (v - rho).abs() < 1e-12));
        }
    }

    #[test]
    fn analytic_gain_is_bounded(beta in 0.0f64..=1.0, theta in 0.0f64..std::f64::consts::PI) {
        let g = eval_analytic(beta, theta).unwrap();
        prop_assert!(g <= 1.0 + 1e-15);
        prop_assert!(g >= 2.0 * beta - 1.0 - 1e-15);
        prop_assert_eq!(eval_analytic(beta, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn eyring_never_exceeds_sabine(
        dims in prop::array::uniform3(2.0f64..10.0),
        alphas in prop::array::uniform6(0.01f64..0.99),
    ) {
        let room = flat_room(dims, alphas);
        let e = eyring_rt60(&room, &room.surfaces).unwrap();
        let s = sabine_rt60(&room, &room.surfaces).unwrap();
        for b in 0..N_BANDS {
            prop_assert!(e[b] > 0.0 && e[b] <= s[b] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn decay_curve_is_monotone(x in prop::collection::vec(-1.0f64..1.0, 1..400)) {
        prop_assume!(x.iter().any(|v| *v != 0.0));
        let edc = energy_decay_curve(&x, 16_000.0).unwrap();
        prop_assert_eq!(edc.values[0], 0.0);
        prop_assert!(edc.values.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn room_seeds_are_order_independent(root in any::<u64>(), index in 0usize..10_000) {
        let a = room_seed(root, Split::Train, index);
        prop_assert_eq!(a, room_seed(root, Split::Train, index));
        prop_assert_ne!(a, room_seed(root, Split::Train, index + 1));
        prop_assert_ne!(a, room_seed(root, Split::Validation, index));
    }

    #[test]
    fn sampled_scenes_validate(seed in any::<u64>(), id in 0usize..7) {
        let opts = SamplingOptions::default();
        let scene = sample_scene(DatasetId::ALL[id], &mut ChaCha8Rng::seed_from_u64(seed), &opts).unwrap();
        prop_assert!(scene.validate().is_ok());
        prop_assert_eq!(scene.receivers.len(), opts.receiver_pairs);
        let src = scene.source.pose.pos();
        for p in scene.mic_placements() {
            prop_assert!((p.pose.pos() - src).norm() >= opts.min_distance);
            prop_assert!(scene.room.contains(&p.pose.pos(), opts.wall_margin - 1e-9));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn omni_flat_scenes_are_reciprocal(
        dims in prop::array::uniform3(2.5f64..8.0),
        alphas in prop::array::uniform6(0.02f64..0.9),
        a in prop::array::uniform3(0.0f64..1.0),
        b in prop::array::uniform3(0.0f64..1.0),
    ) {
        let room = flat_room(dims, alphas);
        let (pa, pb) = (inside(dims, a), inside(dims, b));
        prop_assume!((0..3).map(|i| (pa[i] - pb[i]).powi(2)).sum::<f64>() > 0.01);
        let cfg = SynthesisConfig {
            max_order: MaxOrder::Fixed(4),
            duration: Some(0.15),
            ..SynthesisConfig::default()
        };
        let air = AirAbsorption::none();
        let ab = synthesize_rir(&room, &Transducer::omni(pa), &[Transducer::omni(pb)], &cfg, &air).unwrap();
        let ba = synthesize_rir(&room, &Transducer::omni(pb), &[Transducer::omni(pa)], &cfg, &air).unwrap();
        let num: f64 = ab.channels[0].iter().zip(&ba.channels[0]).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = ab.channels[0].iter().map(|x| x * x).sum();
        prop_assert!((num / den).sqrt() < 1e-6);
    }

    #[test]
    fn unit_beta_source_equals_omni(
        dims in prop::array::uniform3(3.0f64..8.0),
        a in prop::array::uniform3(0.0f64..1.0),
        b in prop::array::uniform3(0.0f64..1.0),
        yaw in 0.0f64..std::f64::consts::TAU,
        pitch in -1.5f64..1.5,
    ) {
        let room = Room::uniform(dims, 0.3).unwrap();
        let (pa, pb) = (inside(dims, a), inside(dims, b));
        prop_assume!((0..3).map(|i| (pa[i] - pb[i]).powi(2)).sum::<f64>() > 0.01);
        let cfg = SynthesisConfig {
            max_order: MaxOrder::Fixed(3),
            duration: Some(0.1),
            ..SynthesisConfig::default()
        };
        let air = AirAbsorption::default();
        let mic = [Transducer::omni(pb)];
        let pose = Pose::new(pa, crate::Orientation::new(yaw, pitch, 0.0));
        let omni = synthesize_rir(&room, &Transducer::new(pose, crate::DirectivityPattern::omni()), &mic, &cfg, &air).unwrap();
        let unit = synthesize_rir(
            &room,
            &Transducer::new(pose, crate::DirectivityPattern::analytic(1.0).unwrap()),
            &mic,
            &cfg,
            &air,
        )
        .unwrap();
        prop_assert_eq!(unit.channels, omni.channels);
    }
}
