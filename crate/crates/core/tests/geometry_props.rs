mod common;

use common::{max_abs_diff, plane_homography_ref};
use evface::geometry::{
    pose_to_homography, relative_homography, sample_trajectory, warp_image, warp_points, BorderMode, CameraPose,
    Homography, Intrinsics, MotionConfig,
};
use evface::raster::GrayFrame;
use proptest::prelude::*;

fn pose_in_clamps() -> impl Strategy<Value = [f64; 6]> {
    let c = MotionConfig::default().amplitude_clamp;
    (-c[0]..c[0], -c[1]..c[1], -c[2]..c[2], -c[3]..c[3], -c[4]..c[4], -c[5]..c[5])
        .prop_map(|(a, b, c, d, e, f)| [a, b, c, d, e, f])
}

fn intrinsics() -> impl Strategy<Value = Intrinsics<f64>> {
    (16u32..400, 16u32..400, 0.5f64..2.0).prop_map(|(w, h, s)| {
        Intrinsics::new(w as f64 * s, w as f64 / 2.0, h as f64 / 2.0, w, h).unwrap()
    })
}

fn as_rows(h: &Homography<f64>) -> [[f64; 3]; 3] {
    *h.matrix()
}

proptest! {
    #[test]
    fn zero_pose_is_exact_identity(k in intrinsics(), d in 0.2f64..5.0) {
        let h = pose_to_homography(&CameraPose::identity(), &k, d).unwrap();
        prop_assert_eq!(h, Homography::identity());
    }

    #[test]
    fn matches_reference_formula(p in pose_in_clamps(), k in intrinsics(), d in 0.5f64..3.0) {
        let h = pose_to_homography(&CameraPose::from_components(p), &k, d).unwrap();
        let want = plane_homography_ref(p, k.focal, k.cx, k.cy, d);
        prop_assert!(max_abs_diff(&as_rows(&h), &want) < 1e-9);
    }

    #[test]
    fn relative_homographies_compose(a in pose_in_clamps(), b in pose_in_clamps(), k in intrinsics()) {
        let (a, b) = (CameraPose::from_components(a), CameraPose::from_components(b));
        let id = CameraPose::identity();
        let direct = relative_homography(&id, &b, &k, 1.0).unwrap();
        let chained = relative_homography(&a, &b, &k, 1.0).unwrap()
            .compose(&relative_homography(&id, &a, &k, 1.0).unwrap()).unwrap();
        prop_assert!(direct.max_abs_diff(&chained) < 1e-9);
    }

    #[test]
    fn inverse_undoes_homography(p in pose_in_clamps(), k in intrinsics()) {
        let h = pose_to_homography(&CameraPose::from_components(p), &k, 1.0).unwrap();
        let round = h.compose(&h.inverse().unwrap()).unwrap();
        prop_assert!(round.max_abs_diff(&Homography::identity()) < 1e-9);
        let round = h.inverse().unwrap().compose(&h).unwrap();
        prop_assert!(round.max_abs_diff(&Homography::identity()) < 1e-9);
    }

    #[test]
    fn relative_to_self_is_identity(p in pose_in_clamps(), k in intrinsics()) {
        let a = CameraPose::from_components(p);
        prop_assert_eq!(relative_homography(&a, &a, &k, 1.0).unwrap(), Homography::identity());
    }

    #[test]
    fn f32_tracks_f64(p in pose_in_clamps()) {
        let k64 = Intrinsics::<f64>::centered(128, 96).unwrap();
        let k32 = Intrinsics::<f32>::centered(128, 96).unwrap();
        let h64 = pose_to_homography(&CameraPose::from_components(p), &k64, 1.0).unwrap();
        let h32 = pose_to_homography(&CameraPose::from_components(p.map(|v| v as f32)), &k32, 1.0).unwrap();
        for (a, b) in h64.matrix().iter().flatten().zip(h32.matrix().iter().flatten()) {
            prop_assert!((a - *b as f64).abs() <= 1e-3 * a.abs().max(1.0));
        }
    }

    #[test]
    fn trajectory_is_reproducible_and_clamped(seed in any::<u64>(), pause in 0.0f64..=1.0) {
        let cfg = MotionConfig { seed, pause_probability: pause, max_frames: 60, ..MotionConfig::default() };
        let a = sample_trajectory::<f64>(&cfg).unwrap();
        let b = sample_trajectory::<f64>(&cfg).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.len(), 60);
        prop_assert_eq!(a[0], CameraPose::identity());
        for pose in &a {
            for (v, c) in pose.components().iter().zip(cfg.amplitude_clamp) {
                prop_assert!(v.abs() <= c);
            }
        }
    }

    #[test]
    fn impulse_lands_where_points_map(
        p in pose_in_clamps(),
        px in 20u32..108,
        py in 20u32..76,
    ) {
        let (w, h) = (128, 96);
        let k = Intrinsics::centered(w, h).unwrap();
        let hom = pose_to_homography(&CameraPose::from_components(p), &k, 1.0).unwrap();
        let mut src = GrayFrame::filled(w, h, 0.0).unwrap();
        src.set(px, py, 1.0);
        let out = warp_image(&src, &hom, BorderMode::Constant(0.0)).unwrap();
        let q = warp_points(&[[px as f64, py as f64]], &hom).unwrap()[0];

        let (mut mass, mut mx, mut my) = (0.0, 0.0, 0.0);
        for y in 0..h {
            for x in 0..w {
                let v = out.get(x, y);
                mass += v;
                mx += v * x as f64;
                my += v * y as f64;
            }
        }
        prop_assert!(mass > 0.0);
        let (cx, cy) = (mx / mass, my / mass);
        prop_assert!((cx - q[0]).hypot(cy - q[1]) < 1.0, "centroid ({cx}, {cy}) vs {q:?}");
        let (rx, ry) = (q[0].round() as u32, q[1].round() as u32);
        let near: f64 = (ry - 1..=ry + 1).flat_map(|y| (rx - 1..=rx + 1).map(move |x| (x, y))).map(|(x, y)| out.get(x, y)).sum();
        prop_assert!((near - mass).abs() < 1e-9, "mass outside the 1 px neighborhood");
    }
}

#[test]
fn pause_extremes() {
    let frozen = MotionConfig { pause_probability: 1.0, ..MotionConfig::default() };
    assert!(sample_trajectory::<f64>(&frozen).unwrap().iter().all(|p| *p == CameraPose::identity()));
    let moving = MotionConfig { pause_probability: 0.0, ..MotionConfig::default() };
    let poses = sample_trajectory::<f64>(&moving).unwrap();
    assert!(poses.windows(2).all(|w| w[0] != w[1]));
}
