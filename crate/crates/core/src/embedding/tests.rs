use super::*;
use proptest::prelude::*;
use rand::Rng;

fn toy_data(seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let centres = [
        [1.0, 0.5, 0.0, -0.3, 0.2, 0.0, 0.1, 0.0, -0.2, 0.4],
        [-0.6, 0.2, 0.8, 0.1, -0.5, 0.3, 0.0, 0.6, 0.2, -0.1],
    ];
    (0..20)
        .map(|i| Sample {
            input: centres[i % 2].iter().map(|c| c + noise.sample(&mut rng)).collect(),
            label: i % 2,
        })
        .collect()
}

#[test]
fn identity_padded_head_maps_basis_vector() {
    let w = DMatrix::from_fn(4, 3, |r, c| if r == c { 2.0 } else { 0.0 });
    let head = EmbeddingHead::new(w, vec![], TrainConfig::default()).unwrap();
    assert_eq!(head.embed(&[1.0, 0.0, 0.0]).unwrap().0, vec![1.0, 0.0, 0.0, 0.0]);
}

#[test]
fn zero_output_is_an_error() {
    let head = EmbeddingHead::new(DMatrix::zeros(4, 3), vec![], TrainConfig::default()).unwrap();
    assert!(matches!(head.embed(&[1.0, 2.0, 3.0]), Err(Error::ZeroNorm(_))));
    assert!(head.embed(&[1.0, 2.0]).is_err());
    assert!(head.embed(&[f64::NAN, 0.0, 0.0]).is_err());
}

#[test]
fn outputs_are_unit_for_many_inputs() {
    let head = EmbeddingHead::random(10, 3, TrainConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let x: Vec<f64> = (0..10).map(|_| rng.random_range(-3.0..3.0)).collect();
        let f = head.embed(&x).unwrap();
        let n = f.0.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-9);
    }
}

#[test]
fn separable_classes_reach_full_training_accuracy() {
    let data = toy_data(1);
    let (head, report) = train_head(&data, &TrainConfig::default()).unwrap();
    assert!(report.final_loss() < report.initial_loss());
    for s in &data {
        assert_eq!(head.classify(&s.input).unwrap(), s.label);
    }
}

#[test]
fn zero_learning_rate_leaves_head_unchanged() {
    let data = toy_data(2);
    let cfg = TrainConfig {
        lr: 0.0,
        epochs: 20,
        ..TrainConfig::default()
    };
    let (head, report) = train_head(&data, &cfg).unwrap();
    assert_eq!(head, EmbeddingHead::random(10, 2, cfg).unwrap());
    assert!(report.losses.iter().all(|&l| l == report.initial_loss()));
}

#[test]
fn training_is_deterministic_per_seed() {
    let data = toy_data(3);
    let cfg = TrainConfig {
        epochs: 30,
        ..TrainConfig::default()
    };
    let (a, _) = train_head(&data, &cfg).unwrap();
    let (b, _) = train_head(&data, &cfg).unwrap();
    assert_eq!(a, b);
    let (c, _) = train_head(&data, &TrainConfig { seed: 9, ..cfg }).unwrap();
    assert_ne!(a, c);
}

#[test]
fn training_preconditions() {
    let data = toy_data(4);
    assert!(train_head(&[], &TrainConfig::default()).is_err());
    let one_class: Vec<Sample> = data.iter().filter(|s| s.label == 0).cloned().collect();
    assert!(train_head(&one_class, &TrainConfig::default()).is_err());
    let mut lonely = data.clone();
    lonely.push(Sample {
        input: vec![0.0; 10],
        label: 2,
    });
    assert!(train_head(&lonely, &TrainConfig::default()).is_err());
    let bad = TrainConfig {
        embed_dim: 1,
        ..TrainConfig::default()
    };
    assert!(train_head(&data, &bad).is_err());
}

#[test]
fn json_round_trip_is_exact() {
    let (head, _) = train_head(
        &toy_data(5),
        &TrainConfig {
            epochs: 5,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let text = head.to_json().unwrap();
    let back = EmbeddingHead::from_json(&text).unwrap();
    assert_eq!(head, back);
    assert_eq!(text, back.to_json().unwrap());
    assert!(EmbeddingHead::from_json(&text.replace("\"version\": 1", "\"version\": 7")).is_err());
}

proptest! {
    #[test]
    fn direction_ignores_positive_input_scale(x in prop::collection::vec(-2.0f64..2.0, 10), k in 0.1f64..10.0) {
        let head = EmbeddingHead::random(10, 2, TrainConfig::default()).unwrap();
        prop_assume!(x.iter().map(|v| v * v).sum::<f64>() > 1e-3);
        let a = head.embed(&x).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| v * k).collect();
        let b = head.embed(&scaled).unwrap();
        for (u, v) in a.0.iter().zip(&b.0) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }
}
