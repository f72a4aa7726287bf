mod common;

use evsteer_core::eval::{eva, make_split, rmse};
use evsteer_core::events::{read_events, write_events, Format, Window};
use evsteer_core::frames::accumulate_events;
use evsteer_core::labels::{keep_quota, prepare_train, PipelineConfig, Sample};
use evsteer_core::nn::{init_model, load_model, save_model, ModelConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evt1_and_csv_round_trip(seed in any::<u64>()) {
        let s = common::random_stream(seed, 200);
        for fmt in [Format::Binary, Format::Csv] {
            let bytes = write_events(&s, fmt);
            let back = read_events(bytes.as_slice(), fmt).unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(write_events(&back, fmt), bytes);
        }
    }

    #[test]
    fn windows_partition_the_stream(seed in any::<u64>(), dur in 1u64..300) {
        let s = common::random_stream(seed, 150);
        let total: usize = s.windows(dur, dur).map(|(_, evs)| evs.len()).sum();
        prop_assert_eq!(total, s.len());
        for (w, evs) in s.windows(dur, dur) {
            let frame = accumulate_events(evs, w, s.width() as usize, s.height() as usize).unwrap();
            prop_assert_eq!(frame.total(), evs.len() as u64);
        }
    }

    #[test]
    fn model_file_round_trips(seed in any::<u64>(), stem in 1usize..5, blocks in 1usize..4, hidden in 1usize..9) {
        let cfg = ModelConfig { input_channels: 1 + (seed % 2) as usize, stem_channels: stem, num_residual_blocks: blocks, head_hidden: hidden, seed };
        let m = init_model::<f32>(&cfg).unwrap();
        let bytes = save_model(&m);
        let back = load_model::<f32>(&bytes).unwrap();
        prop_assert_eq!(save_model(&back), bytes);
        prop_assert_eq!(back, m);
    }

    #[test]
    fn eva_ignores_constant_offsets(obs in prop::collection::vec(-90.0f64..90.0, 2..40), noise in prop::collection::vec(-5.0f64..5.0, 40), c in -50.0f64..50.0) {
        prop_assume!(obs.iter().any(|&o| (o - obs[0]).abs() > 1e-3));
        let pred: Vec<f64> = obs.iter().zip(&noise).map(|(o, n)| o + n).collect();
        let shifted: Vec<f64> = pred.iter().map(|p| p + c).collect();
        prop_assert!((eva(&pred, &obs).unwrap() - eva(&shifted, &obs).unwrap()).abs() < 1e-9);
        prop_assert!(eva(&vec![c; obs.len()], &obs).unwrap().abs() < 1e-12);
        prop_assert!(eva(&pred, &obs).unwrap() <= 1.0);
    }

    #[test]
    fn rmse_is_a_symmetric_permutation_invariant(pairs in prop::collection::vec((-90.0f64..90.0, -90.0f64..90.0), 1..40), rot in 0usize..40) {
        let (p, o): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        let r = rmse(&p, &o).unwrap();
        prop_assert!(r >= 0.0);
        prop_assert!((r - rmse(&o, &p).unwrap()).abs() < 1e-12);
        let k = rot % pairs.len();
        let (mut p2, mut o2) = (p.clone(), o.clone());
        p2.rotate_left(k);
        o2.rotate_left(k);
        prop_assert!((r - rmse(&p2, &o2).unwrap()).abs() < 1e-9);
        prop_assert_eq!(rmse(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn split_tiles_the_span(span in 1u64..10_000, train in 1u64..500, test in 1u64..500) {
        let plan = make_split(span, train, test);
        let mut segs: Vec<(u64, u64, bool)> = plan.train.iter().map(|&(a, b)| (a, b, true)).chain(plan.test.iter().map(|&(a, b)| (a, b, false))).collect();
        segs.sort();
        prop_assert_eq!(segs[0].0, 0);
        prop_assert!(segs[0].2);
        prop_assert_eq!(segs.last().unwrap().1, span);
        for w in segs.windows(2) {
            prop_assert_eq!(w[0].1, w[1].0);
            prop_assert_ne!(w[0].2, w[1].2);
        }
        prop_assert!(segs.iter().all(|&(a, b, _)| a < b));
    }

    #[test]
    fn prepared_training_set_honours_the_contract(seed in any::<u64>(), n in 20usize..200) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<Sample> = (0..n)
            .map(|i| Sample {
                t_us: i as u64 * 1000,
                window_index: i,
                angle_deg: if rng.random::<f64>() < 0.5 { rng.random_range(-4.9..4.9) } else { rng.random_range(-120.0..120.0) },
                speed_kmh: rng.random_range(0.0..60.0),
            })
            .collect();
        let cfg = PipelineConfig { seed, ..PipelineConfig::default() };
        let fast: Vec<&Sample> = samples.iter().filter(|s| s.speed_kmh >= 20.0).collect();
        let straight_in = fast.iter().filter(|s| s.angle_deg.abs() < 5.0).count();
        prop_assume!(fast.len() - straight_in + keep_quota(straight_in, 0.3) >= 2);
        let p = prepare_train(&samples, &cfg).unwrap();
        prop_assert!(p.samples.iter().all(|s| s.speed_kmh >= 20.0));
        let straight_out = p.samples.iter().filter(|s| s.angle_deg.abs() < 5.0).count();
        prop_assert_eq!(straight_out, keep_quota(straight_in, 0.3));
        prop_assert_eq!(straight_out, (0.3 * straight_in as f64 - 1e-9).ceil() as usize);
        prop_assert!(p.targets.iter().all(|t| (-1.0..=1.0).contains(t)));
    }
}

#[test]
fn empty_window_gives_empty_frame() {
    let frame = accumulate_events(&[], Window::new(0, 10), 3, 2).unwrap();
    assert_eq!(frame.total(), 0);
}
