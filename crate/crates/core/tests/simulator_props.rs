use evface::geometry::{sample_trajectory, BorderMode, Intrinsics, MotionConfig};
use evface::raster::GrayFrame;
use evface::simulator::{
    simulate_events, simulate_motion, simulate_sequence, stream_frames, FrameStream, PixelState, Polarity, SimConfig,
    StreamFrame,
};
use evface::Homography;
use proptest::prelude::*;

fn pixel(v: f64) -> GrayFrame<f64> {
    GrayFrame::filled(1, 1, v).unwrap()
}

/// Frames at 0, 1000, 2000, ... us built from per-pixel intensity sequences.
fn frame_stream(w: u32, h: u32, seq: &[Vec<f64>]) -> FrameStream<f64> {
    let frames = (0..seq[0].len())
        .map(|i| StreamFrame {
            image: GrayFrame::from_vec(w, h, seq.iter().map(|px| px[i]).collect()).unwrap(),
            t_us: i as u64 * 1000,
            homography: Homography::identity(),
        })
        .collect();
    FrameStream::new(frames).unwrap()
}

/// Per-pixel intensity sequences, each monotone in one direction.
fn monotone_pixels(n_px: usize, n_frames: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(
        (any::<bool>(), 0.01f64..1.0, prop::collection::vec(0.0f64..0.3, n_frames - 1)),
        n_px,
    )
    .prop_map(|pixels| {
        pixels
            .into_iter()
            .map(|(up, start, steps)| {
                let mut v = vec![start];
                for s in steps {
                    let last = *v.last().unwrap();
                    v.push(if up { (last + s).min(1.0) } else { (last - s).max(0.0) });
                }
                v
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn count_matches_floor_of_k(k in 0.0f64..8.0, c in 0.05f64..0.5, start in 0.05f64..0.9, down in any::<bool>()) {
        let cfg = SimConfig { contrast_threshold_pos: c, contrast_threshold_neg: c, ..SimConfig::default() };
        let l0 = start.ln();
        let l1 = if down { l0 - k * c } else { l0 + k * c };
        let (a, b) = (pixel(start), pixel(l1.exp()));
        let mut state = PixelState::new(&a, &cfg);
        let events = simulate_events(&a, &b, 0, 33_333, &cfg, &mut state).unwrap();
        prop_assert_eq!(events.len(), (k + 1e-9).floor() as usize);
        let want = if down { Polarity::Off } else { Polarity::On };
        prop_assert!(events.iter().all(|e| e.p == want));
        for (i, e) in events.iter().enumerate() {
            let closed = (i + 1) as f64 / k * 33_333.0;
            prop_assert!((e.t as f64 - closed).abs() <= 1.0, "event {i} at {} vs {closed}", e.t);
        }
    }

    #[test]
    fn monotone_pixels_keep_their_polarity(seq in monotone_pixels(12, 6)) {
        let fs = frame_stream(4, 3, &seq);
        let es = simulate_sequence(&fs, &SimConfig::default()).unwrap();
        for e in es.events() {
            let px = &seq[e.y as usize * 4 + e.x as usize];
            let up = px.last().unwrap() > &px[0];
            prop_assert_eq!(e.p, if up { Polarity::On } else { Polarity::Off });
        }
    }

    #[test]
    fn stream_is_sorted_and_per_pixel_nondecreasing(seed in any::<u64>(), refractory in 0u64..20_000) {
        let img = GrayFrame::from_vec(16, 12, (0..192).map(|i| ((i * 37 % 101) as f64) / 100.0).collect()).unwrap();
        let motion = MotionConfig { seed, max_frames: 12, pause_probability: 0.2, ..MotionConfig::default() };
        let poses = sample_trajectory(&motion).unwrap();
        let cfg = SimConfig { refractory_us: refractory, ..SimConfig::default() };
        let run = simulate_motion(&img, &poses, &Intrinsics::centered(16, 12).unwrap(), 1.0, BorderMode::Mirrored, &cfg).unwrap();
        let ev = run.events.events();
        prop_assert!(ev.windows(2).all(|w| w[0].sort_key() <= w[1].sort_key()));
        let mut last = vec![None::<u64>; 192];
        for e in ev {
            let slot = &mut last[e.y as usize * 16 + e.x as usize];
            if let Some(prev) = *slot {
                prop_assert!(e.t >= prev + refractory);
            }
            *slot = Some(e.t);
        }
    }

    /// Holds for stimuli that are monotone per pixel; see the test below for
    /// why it cannot hold for arbitrary ones.
    #[test]
    fn higher_threshold_never_adds_events_on_monotone_stimuli(seq in monotone_pixels(9, 5), c in 0.05f64..0.4, bump in 0.0f64..0.3) {
        let fs = frame_stream(3, 3, &seq);
        let at = |c: f64| {
            let cfg = SimConfig { contrast_threshold_pos: c, contrast_threshold_neg: c, ..SimConfig::default() };
            simulate_sequence(&fs, &cfg).unwrap().len()
        };
        prop_assert!(at(c + bump) <= at(c));
    }

    #[test]
    fn streamed_motion_equals_stored_frames(seed in any::<u64>()) {
        let img = GrayFrame::from_vec(20, 14, (0..280).map(|i| (((i * 53) % 97) as f64) / 96.0).collect()).unwrap();
        let k = Intrinsics::centered(20, 14).unwrap();
        let poses = sample_trajectory(&MotionConfig { seed, max_frames: 10, ..MotionConfig::default() }).unwrap();
        let cfg = SimConfig::default();
        let fs = stream_frames(&img, &poses, &k, 1.0, BorderMode::Mirrored, cfg.fps).unwrap();
        let stored = simulate_sequence(&fs, &cfg).unwrap();
        let streamed = simulate_motion(&img, &poses, &k, 1.0, BorderMode::Mirrored, &cfg).unwrap();
        prop_assert_eq!(&streamed.events, &stored);
        let hs: Vec<(u64, Homography<f64>)> = fs.frames().iter().map(|f| (f.t_us, f.homography)).collect();
        prop_assert_eq!(streamed.frames, hs);
    }
}

#[test]
fn threshold_monotonicity_fails_for_oscillating_stimuli() {
    // Log path 0 -> 0.9 -> 0.45 -> 0.9.
    // C = 0.40: rise crosses 0.4 and 0.8; the fall stops above 0.4 and the
    // second rise stays below 1.2, so 2 events.
    // C = 0.45: rise crosses 0.45 and 0.9, the fall reaches 0.45, the second
    // rise reaches 0.9 again, so 4 events.
    let seq = vec![[0.0, 0.9, 0.45, 0.9].map(f64::exp).to_vec()];
    let fs = frame_stream(1, 1, &seq);
    let count = |c: f64| {
        let cfg = SimConfig { contrast_threshold_pos: c, contrast_threshold_neg: c, log_eps: 1e-6, ..SimConfig::default() };
        simulate_sequence(&fs, &cfg).unwrap().len()
    };
    assert_eq!(count(0.40), 2);
    assert_eq!(count(0.45), 4);
}

#[test]
fn flat_image_emits_nothing() {
    let img = GrayFrame::filled(32, 24, 0.5).unwrap();
    let poses = sample_trajectory(&MotionConfig { max_frames: 30, ..MotionConfig::default() }).unwrap();
    let run = simulate_motion(&img, &poses, &Intrinsics::centered(32, 24).unwrap(), 1.0, BorderMode::Mirrored, &SimConfig::default()).unwrap();
    assert!(run.events.is_empty());
    assert_eq!(run.events.duration_us(), SimConfig::default().frame_timestamp(29) + 1);
}
