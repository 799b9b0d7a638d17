use super::*;
use proptest::prelude::*;

fn unit(v: &[f64]) -> Vec<f64> {
    normalized(v.to_vec(), "test").unwrap()
}

fn view(yaw: f64) -> ViewAngles {
    ViewAngles {
        yaw,
        pitch: 0.0,
        roll: 0.0,
    }
}

fn set_with(occ: &[usize], dim: usize) -> FeatureSet {
    let bins = occ
        .iter()
        .enumerate()
        .map(|(i, &o)| FeatureBin {
            occupancy: o,
            feature: (o > 0).then(|| {
                let mut f = vec![0.0; dim];
                f[i % dim] = 1.0;
                f
            }),
        })
        .collect();
    FeatureSet::new(ViewBinConfig::new(occ.len()).unwrap(), bins).unwrap()
}

#[test]
fn yaw_bin_examples() {
    let c8 = ViewBinConfig::new(8).unwrap();
    assert_eq!(yaw_bin(0.0, &c8), 0);
    assert_eq!(yaw_bin(PI / 4.0, &c8), 1);
    assert_eq!(yaw_bin(-PI, &c8), 4);
    assert_eq!(yaw_bin(-PI / 8.0, &c8), 0);
    assert_eq!(yaw_bin(PI / 8.0, &c8), 1);
    assert_eq!(yaw_bin(-PI / 8.0 - 1e-12, &c8), 7);
    let c1 = ViewBinConfig::new(1).unwrap();
    assert_eq!(yaw_bin(2.5, &c1), 0);
    assert!(ViewBinConfig::new(0).is_err());
}

#[test]
fn angular_distance_examples() {
    assert_eq!(angular_distance(&[1.0, 0.0], &[1.0, 0.0]), 0.0);
    assert!((angular_distance(&[1.0, 0.0], &[0.0, 1.0]) - PI / 2.0).abs() < 1e-15);
    let b = [0.5, (0.75f64).sqrt()];
    assert!((angular_distance(&[1.0, 0.0], &b) - PI / 3.0).abs() < 1e-12);
}

#[test]
fn single_feature_is_kept_by_every_method() {
    let f = unit(&[0.2, -0.4, 0.9]);
    let cfg = ViewBinConfig::new(4).unwrap();
    for m in [Aggregation::Mean, Aggregation::Median, Aggregation::parse("best").unwrap()] {
        let s = aggregate(&[(f.clone(), view(PI / 2.0))], &m, &cfg).unwrap();
        assert_eq!(s.occupancies(), vec![0, 1, 0, 0]);
        let got = s.bins()[1].feature.as_ref().unwrap();
        for (a, b) in got.iter().zip(&f) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}

#[test]
fn best_drops_the_opposite_feature() {
    let f = unit(&[1.0, 2.0, -1.0]);
    let g: Vec<f64> = f.iter().map(|x| -x).collect();
    let feats: Vec<&[f64]> = vec![&f, &f, &g];
    assert_eq!(best_inliers(&feats, 0.9), vec![0, 1]);
    let list = vec![(f.clone(), view(0.0)), (f.clone(), view(0.0)), (g, view(0.0))];
    let s = aggregate(&list, &Aggregation::parse("best").unwrap(), &ViewBinConfig::default()).unwrap();
    for (a, b) in s.bins()[0].feature.as_ref().unwrap().iter().zip(&f) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn best_falls_back_to_mean_without_inliers() {
    let u = vec![1.0, 0.0];
    let v = vec![0.0, 1.0];
    let feats: Vec<&[f64]> = vec![&u, &v];
    assert!(best_inliers(&feats, 0.9).is_empty());
    let list = vec![(u, view(0.0)), (v, view(0.0))];
    let s = aggregate(&list, &Aggregation::parse("best").unwrap(), &ViewBinConfig::default()).unwrap();
    let h = 0.5f64.sqrt();
    let got = s.bins()[0].feature.as_ref().unwrap();
    assert!((got[0] - h).abs() < 1e-12 && (got[1] - h).abs() < 1e-12);
}

#[test]
fn one_bin_collects_everything() {
    let list: Vec<_> = (0..7).map(|i| (unit(&[1.0, i as f64]), view(i as f64 - 3.0))).collect();
    let s = aggregate(&list, &Aggregation::Median, &ViewBinConfig::default()).unwrap();
    assert_eq!(s.occupancies(), vec![7]);
}

#[test]
fn merge_examples() {
    let x = set_with(&[2, 0, 1], 3);
    assert_eq!(merge(std::slice::from_ref(&x)).unwrap(), x);

    let f = unit(&[0.3, 0.4]);
    let one = |o| FeatureSet::new(ViewBinConfig::default(), vec![FeatureBin { occupancy: o, feature: Some(f.clone()) }]).unwrap();
    let m = merge(&[one(3), one(5)]).unwrap();
    assert_eq!(m.occupancies(), vec![8]);
    for (a, b) in m.bins()[0].feature.as_ref().unwrap().iter().zip(&f) {
        assert!((a - b).abs() < 1e-15);
    }

    let u = FeatureSet::new(ViewBinConfig::default(), vec![FeatureBin { occupancy: 1, feature: Some(vec![1.0, 0.0]) }]).unwrap();
    let v = FeatureSet::new(ViewBinConfig::default(), vec![FeatureBin { occupancy: 3, feature: Some(vec![0.0, 1.0]) }]).unwrap();
    let m = merge(&[u, v]).unwrap();
    let expect = unit(&[1.0, 3.0]);
    for (a, b) in m.bins()[0].feature.as_ref().unwrap().iter().zip(&expect) {
        assert!((a - b).abs() < 1e-15);
    }

    assert!(matches!(merge(&[set_with(&[1], 2), set_with(&[1, 0], 2)]), Err(Error::MixedBins(1, 2))));
}

#[test]
fn matching_rule_examples() {
    let a = set_with(&[2, 0, 5, 1], 4);
    let b = set_with(&[1, 3, 4, 0], 4);
    assert_eq!(select_bin(&a, &b), Some(2));
    assert_eq!(match_distance(&a, &b).unwrap(), 0.0);
    assert_eq!(match_distance(&a, &a).unwrap(), 0.0);

    // tie between bins 0 and 2 (products 4 and 4) goes to bin 0
    let a = set_with(&[2, 0, 1, 0], 4);
    let b = set_with(&[2, 0, 4, 0], 4);
    assert_eq!(select_bin(&a, &b), Some(0));

    let a = set_with(&[1, 0], 2);
    let b = set_with(&[0, 2], 2);
    assert_eq!(select_bin(&a, &b), None);
    assert!((match_distance(&a, &b).unwrap() - PI / 2.0).abs() < 1e-15);

    let empty = FeatureSet::new(ViewBinConfig::new(2).unwrap(), vec![FeatureBin::default(); 2]).unwrap();
    assert!(matches!(match_distance(&a, &empty), Err(Error::Unoccupied)));
    assert!(matches!(match_distance(&a, &set_with(&[1], 2)), Err(Error::MixedBins(2, 1))));
}

#[test]
fn json_round_trip() {
    let s = set_with(&[0, 3, 0, 1, 0, 0, 2, 0], 3);
    let back = FeatureSet::from_json(&s.to_json().unwrap()).unwrap();
    assert_eq!(back, s);
    assert!(FeatureSet::from_json(r#"{"cfg":{"n_yaw":2},"bins":[{"idx":5,"occupancy":1,"feature":[1.0]}]}"#).is_err());
    assert!(FeatureSet::from_json(r#"{"cfg":{"n_yaw":1},"bins":[{"idx":0,"occupancy":0,"feature":[1.0]}]}"#).is_err());
    assert!(FeatureSet::from_json(r#"{"cfg":{"n_yaw":1},"bins":[{"idx":0,"occupancy":1,"feature":[2.0]}]}"#).is_err());
}

fn unit_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, dim)
        .prop_filter("non-zero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
        .prop_map(|v| unit(&v))
}

fn feature_set(n: usize) -> impl Strategy<Value = FeatureSet> {
    prop::collection::vec((0usize..4, unit_vec(3)), n).prop_filter_map("occupied", move |bins| {
        let bins: Vec<FeatureBin> = bins
            .into_iter()
            .map(|(o, f)| FeatureBin {
                occupancy: o,
                feature: (o > 0).then_some(f),
            })
            .collect();
        let s = FeatureSet::new(ViewBinConfig::new(n).unwrap(), bins).ok()?;
        (s.total_occupancy() > 0).then_some(s)
    })
}

proptest! {
    #[test]
    fn every_yaw_has_one_bin(yaw in -PI..PI, n in prop::sample::select(vec![1usize, 4, 8])) {
        let cfg = ViewBinConfig::new(n).unwrap();
        let b = yaw_bin(yaw, &cfg);
        prop_assert!(b < n);
        if n > 1 {
            let w = cfg.width();
            let centre = b as f64 * w;
            let off = (yaw - centre + PI).rem_euclid(2.0 * PI) - PI;
            prop_assert!(off >= -w / 2.0 - 1e-12 && off < w / 2.0 + 1e-12);
        }
    }

    #[test]
    fn angular_distance_is_a_metric(a in unit_vec(4), b in unit_vec(4), c in unit_vec(4)) {
        let ab = angular_distance(&a, &b);
        prop_assert_eq!(ab, angular_distance(&b, &a));
        prop_assert!(angular_distance(&a, &a) < 1e-7);
        prop_assert!(ab <= angular_distance(&a, &c) + angular_distance(&c, &b) + 1e-9);
    }

    #[test]
    fn matching_is_symmetric(a in feature_set(4), b in feature_set(4)) {
        let ab = match_distance(&a, &b);
        let ba = match_distance(&b, &a);
        match (ab, ba) {
            (Ok(x), Ok(y)) => prop_assert_eq!(x, y),
            (x, y) => prop_assert_eq!(x.is_err(), y.is_err()),
        }
    }

    #[test]
    fn merge_is_associative(a in feature_set(4), b in feature_set(4), c in feature_set(4)) {
        let left = merge(&[merge(&[a.clone(), b.clone()]).unwrap(), c.clone()]);
        let right = merge(&[a.clone(), merge(&[b.clone(), c.clone()]).unwrap()]);
        let (Ok(left), Ok(right)) = (left, right) else { return Ok(()); };
        prop_assert_eq!(left.occupancies(), right.occupancies());
        for (x, y) in left.bins().iter().zip(right.bins()) {
            if let (Some(p), Some(q)) = (&x.feature, &y.feature) {
                for (u, v) in p.iter().zip(q) {
                    prop_assert!((u - v).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn mean_of_duplicated_list_keeps_direction(feats in prop::collection::vec((unit_vec(3), -PI..PI), 1..6)) {
        let list: Vec<_> = feats.iter().map(|(f, y)| (f.clone(), view(*y))).collect();
        let doubled: Vec<_> = list.iter().chain(&list).cloned().collect();
        let cfg = ViewBinConfig::new(4).unwrap();
        let (Ok(a), Ok(b)) = (aggregate(&list, &Aggregation::Mean, &cfg), aggregate(&doubled, &Aggregation::Mean, &cfg)) else { return Ok(()); };
        for (x, y) in a.bins().iter().zip(b.bins()) {
            prop_assert_eq!(2 * x.occupancy, y.occupancy);
            if let (Some(p), Some(q)) = (&x.feature, &y.feature) {
                prop_assert!(angular_distance(p, q) < 1e-7);
            }
        }
    }
}
