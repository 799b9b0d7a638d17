use nalgebra::Vector2;

use super::*;

#[test]
fn windows_follow_the_merge_rule() {
    assert_eq!(split_sequence(12, 5), vec![0..5, 5..12]);
    assert_eq!(split_sequence(5, 5), vec![0..5]);
    assert_eq!(split_sequence(3, 5), vec![0..3]);
    assert_eq!(split_sequence(13, 5), vec![0..5, 5..10, 10..13]);
    assert_eq!(split_sequence(12, 3), vec![0..3, 3..6, 6..9, 9..12]);
    assert_eq!(split_sequence(10, 9), vec![0..10]);
    assert_eq!(split_sequence(14, 9), vec![0..9, 9..14]);
    assert!(split_sequence(0, 5).is_empty());
}

#[test]
fn camera_from_keypoint_box() {
    let kps = vec![Vector2::new(100.0, 20.0), Vector2::new(124.0, 190.0), Vector2::new(112.0, 100.0)];
    let cam = init_camera(&kps).unwrap();
    assert!((cam.scale - 100.0).abs() < 1e-12);
    assert_eq!(cam.trans, Vector2::new(112.0, 105.0));

    let shifted: Vec<_> = kps.iter().map(|k| k + Vector2::new(-7.0, 3.5)).collect();
    let moved = init_camera(&shifted).unwrap();
    assert_eq!(moved.scale, cam.scale);
    assert_eq!(moved.trans, cam.trans + Vector2::new(-7.0, 3.5));

    let flat = vec![Vector2::new(0.0, 5.0), Vector2::new(50.0, 5.5)];
    assert!(matches!(init_camera(&flat), Err(Error::DegenerateBBox(_))));
}

#[test]
fn config_validation() {
    assert!(FitConfig::default().validate().is_ok());
    let bad = FitConfig {
        seq_len: 0,
        ..FitConfig::default()
    };
    assert!(bad.validate().is_err());
    let bad = FitConfig {
        max_iters: 0,
        ..FitConfig::default()
    };
    assert!(bad.validate().is_err());
    let bad = FitConfig {
        rel_tol: 0.0,
        ..FitConfig::default()
    };
    assert!(bad.validate().is_err());
}

#[test]
fn median_of_views() {
    let v = |yaw| ViewAngles {
        yaw,
        pitch: 0.0,
        roll: 0.0,
    };
    assert_eq!(median_view(&[v(0.3), v(-0.1), v(0.2)]).yaw, 0.2);
    assert_eq!(median_view(&[v(0.4), v(0.0)]).yaw, 0.2);
}
