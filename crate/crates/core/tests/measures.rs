use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simlearn::data::{default_data_dir, Dataset, Manifest, PairTriplet};
use simlearn::measures::{esnn_loss, one_hot, train_measure, Measure, MeasureConfig, MeasureTag};
use simlearn::nn::{init_network, Activation};
use simlearn::{Error, Matrix};

fn load(id: &str) -> Dataset {
    let dir = default_data_dir();
    Manifest::load(&dir).unwrap().entry(id).unwrap().load(&dir).unwrap()
}

fn quick(epochs: usize) -> MeasureConfig {
    MeasureConfig { epochs, ..Default::default() }
}

fn trained(tag: MeasureTag, ds: &Dataset, epochs: usize) -> Measure<f64> {
    let rows: Vec<usize> = (0..ds.len()).collect();
    train_measure(tag, &quick(epochs), ds, &rows, None, 3).unwrap().0
}

#[test]
fn symmetric_measures_are_bit_exact_on_random_pairs() {
    for id in ["iris", "bal"] {
        let ds = load(id);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for tag in [MeasureTag::Esnn, MeasureTag::Chopra, MeasureTag::T31, MeasureTag::T11, MeasureTag::T21] {
            let m = trained(tag, &ds, 20);
            for _ in 0..1000 {
                let (a, b) = (rng.random_range(0..ds.len()), rng.random_range(0..ds.len()));
                let xy = m.raw_similarity(ds.row(a), ds.row(b)).unwrap();
                let yx = m.raw_similarity(ds.row(b), ds.row(a)).unwrap();
                assert_eq!(xy.to_bits(), yx.to_bits(), "{id} {tag} ({a},{b})");
            }
        }
    }
}

#[test]
fn esnn_self_similarity_is_constant() {
    let ds = load("iris");
    let m = trained(MeasureTag::Esnn, &ds, 30);
    let first = m.raw_similarity(ds.row(0), ds.row(0)).unwrap();
    for i in 1..100 {
        assert_eq!(m.raw_similarity(ds.row(i), ds.row(i)).unwrap().to_bits(), first.to_bits());
    }
}

#[test]
fn chopra_and_t31_score_identical_inputs_as_one() {
    let ds = load("iris");
    for tag in [MeasureTag::Chopra, MeasureTag::T31, MeasureTag::T11] {
        let m = trained(tag, &ds, 10);
        for i in [0, 60, 120] {
            assert_eq!(m.similarity(ds.row(i), ds.row(i)).unwrap(), 1.0, "{tag}");
        }
    }
}

#[test]
fn gabel_depends_on_argument_order() {
    let ds = load("iris");
    let m = trained(MeasureTag::Gabel, &ds, 5);
    let found = (0..ds.len()).any(|i| {
        let j = (i * 7 + 3) % ds.len();
        m.raw_similarity(ds.row(i), ds.row(j)).unwrap() != m.raw_similarity(ds.row(j), ds.row(i)).unwrap()
    });
    assert!(found);
}

#[test]
fn gabel_with_zero_weights_scores_one_half() {
    let ds = load("iris");
    let mut doc = trained(MeasureTag::Gabel, &ds, 1).to_document();
    for p in &mut doc.networks.get_mut("pair").unwrap().parameters {
        *p = 0.0;
    }
    let m = Measure::<f64>::from_document(&doc).unwrap();
    assert_eq!(m.similarity(ds.row(0), ds.row(100)).unwrap(), 0.5);
}

#[test]
fn json_round_trip_is_bit_exact() {
    let ds = load("iris");
    for tag in MeasureTag::ALL {
        let m = trained(tag, &ds, 10);
        let json = m.to_json().unwrap();
        let back = Measure::<f64>::from_json(&json).unwrap();
        assert_eq!(back.to_json().unwrap(), json, "{tag}");
        let a = m.score_block(ds.features(), ds.features()).unwrap();
        let b = back.score_block(ds.features(), ds.features()).unwrap();
        assert!(a.as_slice().iter().zip(b.as_slice()).all(|(u, v)| u.to_bits() == v.to_bits()), "{tag}");
    }
}

#[test]
fn untrained_learned_measure_refuses_to_score() {
    let ds = load("iris");
    let m = Measure::<f64>::for_dataset(MeasureTag::Esnn, quick(1), &ds, 0).unwrap();
    assert!(matches!(m.similarity(ds.row(0), ds.row(1)), Err(Error::NotTrained(_))));
    let t11 = Measure::<f64>::for_dataset(MeasureTag::T11, quick(0), &ds, 0).unwrap();
    assert_eq!(t11.similarity(ds.row(4), ds.row(4)).unwrap(), 1.0);
}

#[test]
fn weighted_measures_ignore_epochs() {
    let ds = load("iris");
    let rows: Vec<usize> = (0..ds.len()).collect();
    let (_, history) = train_measure::<f64>(MeasureTag::T21, &quick(50), &ds, &rows, None, 0).unwrap();
    assert!(history.train_loss.is_empty());
}

#[test]
fn alpha_outside_unit_interval_is_rejected() {
    let ds = load("iris");
    for alpha in [-0.1, 1.5, f64::NAN] {
        let cfg = MeasureConfig { alpha, ..Default::default() };
        assert!(matches!(Measure::<f64>::for_dataset(MeasureTag::Esnn, cfg, &ds, 0), Err(Error::Config(_))));
    }
}

#[test]
fn zero_alpha_leaves_the_combiner_untouched() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = Matrix::from_vec(6, 3, (0..18).map(|_| rng.random::<f64>()).collect()).unwrap();
    let labels = [0, 1, 2, 0, 1, 2];
    let pairs: Vec<PairTriplet> = (0..6)
        .flat_map(|a| (a + 1..6).map(move |b| PairTriplet { x: a, y: b, same: labels[a] == labels[b] }))
        .collect();
    let g = init_network::<f64>(&[3, 5, 3], &[Activation::Relu, Activation::Softmax], 1).unwrap();
    let c = init_network::<f64>(&[3, 4, 1], &[Activation::Sigmoid, Activation::Sigmoid], 2).unwrap();
    let out = esnn_loss(&g, &c, 0.0, &x, &one_hot(&labels, 3), &pairs).unwrap();
    assert!(out.c.values.iter().all(|&v| v == 0.0));
    assert!(out.g.values.iter().any(|&v| v != 0.0));
}

#[test]
fn mnist_sized_network_trains_on_synthetic_digits() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let labels: Vec<usize> = (0..40).map(|i| i % 10).collect();
    let pixels: Vec<f64> = labels
        .iter()
        .flat_map(|&l| (0..784).map(move |p| (p % 10 == l) as u8 as f64))
        .map(|v| v * 0.8 + rng.random::<f64>() * 0.2)
        .collect();
    let x = Matrix::from_vec(40, 784, pixels).unwrap();
    let names = (0..10).map(|d| d.to_string()).collect();
    let ds = Dataset::from_matrix("digits", &x, labels, names).unwrap();
    let cfg = MeasureConfig { epochs: 3, hidden: vec![128, 128, 128], ..Default::default() };
    let rows: Vec<usize> = (0..40).collect();
    let (m, history) = train_measure::<f64>(MeasureTag::Esnn, &cfg, &ds, &rows, None, 1).unwrap();
    assert_eq!(m.embedding_network().unwrap().layout(), &[784, 128, 128, 128, 10]);
    assert_eq!(history.train_loss.len(), 3);
    assert!(history.train_loss.iter().all(|l| l.is_finite()));
    assert!(m.similarity(ds.row(0), ds.row(1)).unwrap().is_finite());
}

#[test]
fn ranking_keys_follow_scores() {
    let ds = load("iris");
    let x = ds.features();
    for tag in MeasureTag::ALL {
        let m = trained(tag, &ds, 60);
        let scores = m.score_block(x, x).unwrap();
        let keys = m.rank_block(x, x).unwrap();
        let (s, k) = (scores.as_slice(), keys.as_slice());
        if matches!(tag, MeasureTag::Esnn | MeasureTag::Gabel) {
            for (&s, &z) in s.iter().zip(k) {
                assert!((1.0 / (1.0 + (-z).exp()) - s).abs() < 1e-12, "{tag}");
            }
        } else {
            assert_eq!(s, k, "{tag}");
        }
        let row = &s[..ds.len()];
        let keys = &k[..ds.len()];
        for i in 0..row.len() {
            for j in 0..row.len() {
                if row[i] < row[j] {
                    assert!(keys[i] < keys[j], "{tag} ({i},{j})");
                }
            }
        }
    }
}
