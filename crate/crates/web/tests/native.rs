use servotrack::imaging::{ColorTolerance, HsvColor};
use servotrack_web::{law_field_rgba, MaskRequest, MaskView, Simulation};

#[test]
fn law_field_is_neutral_at_centre_and_saturated_at_corners() {
    let (w, h) = (64, 48);
    let img = law_field_rgba(w, h, 8.0);
    assert_eq!(img.len(), w * h * 4);
    let px = |x: usize, y: usize| &img[(y * w + x) * 4..(y * w + x) * 4 + 4];
    // pixel centres straddle the image centre, so yaw and throttle are small but not zero
    let c = px(w / 2, h / 2);
    assert!(
        (i32::from(c[0]) - 128).abs() <= 16 && (i32::from(c[1]) - 128).abs() <= 16,
        "{c:?}"
    );
    assert!(c[2] > 200);
    assert_eq!(px(0, 0)[..3], [1, 255, 0]);
    assert_eq!(px(w - 1, h - 1)[..2], [255, 1]);
}

#[test]
fn simulation_summarises_a_short_run() {
    let sim = Simulation::run("duration = 4\n", "camera.rate_hz = 10\n").unwrap();
    assert_eq!(sim.frames(), 40);
    assert_eq!(sim.quad_xy().len(), 80);
    assert!(sim.metrics_json().contains("detection_rate"));
    assert_eq!(sim.trace_csv().lines().count(), 41);
    let err = Simulation::run("pipeline = nope\n", "").err().unwrap();
    assert!(err.contains("pipeline"), "{err}");
}

fn request(filter_hue: f64) -> MaskRequest {
    MaskRequest {
        target_hue: 120.0,
        filter: HsvColor::new(filter_hue, 0.9, 0.9),
        tolerance: ColorTolerance::default(),
        lateral_m: 0.0,
        range_m: 3.0,
        pixel_noise: 0.0,
        seed: 1,
    }
}

#[test]
fn mask_view_finds_the_target_only_under_a_matching_filter() {
    let hit = MaskView::build(&request(120.0)).unwrap();
    assert!(hit.valid());
    assert!((hit.centroid_x() - 160.0).abs() <= 1.0 && (hit.centroid_y() - 120.0).abs() <= 1.0);
    assert!(!MaskView::build(&request(300.0)).unwrap().valid());
    let bad = MaskRequest {
        tolerance: ColorTolerance {
            hue_half_width: 0.0,
            ..ColorTolerance::default()
        },
        ..request(0.0)
    };
    assert!(MaskView::build(&bad).is_err());
}
