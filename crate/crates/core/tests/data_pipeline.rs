use simlearn::data::{
    default_data_dir, pair_count, pairs_over, stratified_kfold, Dataset, FileStatus, Manifest,
    PairMode,
};

fn bundled() -> Vec<Dataset> {
    let dir = default_data_dir();
    let manifest = Manifest::load(&dir).unwrap();
    manifest
        .datasets
        .iter()
        .filter(|e| matches!(e.check(&dir), Ok(FileStatus::Verified)))
        .map(|e| e.load(&dir).unwrap())
        .collect()
}

#[test]
fn six_datasets_ship_with_the_repo() {
    let names: Vec<String> = bundled().iter().map(|d| d.name().to_owned()).collect();
    assert_eq!(names.len(), 6, "{names:?}");
}

#[test]
fn balance_scale_shape() {
    let dir = default_data_dir();
    let ds = Manifest::load(&dir).unwrap().entry("bal").unwrap().load(&dir).unwrap();
    assert_eq!(ds.len(), 625);
    assert_eq!(ds.attributes().len(), 4);
    assert_eq!(ds.n_classes(), 3);
}

#[test]
fn preprocessing_twice_equals_once() {
    for ds in bundled() {
        let again = Dataset::from_matrix(
            ds.name(),
            ds.features(),
            ds.labels().to_vec(),
            ds.class_names().to_vec(),
        )
        .unwrap();
        assert_eq!(again.features(), ds.features(), "{}", ds.name());
    }
}

#[test]
fn every_bundled_dataset_stratifies() {
    for ds in bundled() {
        let counts = ds.class_counts();
        let splits = stratified_kfold(ds.labels(), ds.class_names(), 5, 5, 7).unwrap();
        assert_eq!(splits.len(), 25);
        for s in &splits {
            let mut all: Vec<usize> = s.train.iter().chain(&s.validation).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..ds.len()).collect::<Vec<_>>(), "{}", ds.name());
            for (c, &n) in counts.iter().enumerate() {
                let got = s.validation.iter().filter(|&&i| ds.labels()[i] == c).count();
                assert!(got == n / 5 || got == n.div_ceil(5), "{} class {c}: {got} of {n}", ds.name());
            }
        }
    }
}

#[test]
fn exhaustive_pair_counts() {
    for n in 0..=100 {
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        for mode in [PairMode::OrderedFull, PairMode::UnorderedUnique] {
            let pairs = pairs_over(&labels, &mode).unwrap();
            let expected = match mode {
                PairMode::OrderedFull => n * n.saturating_sub(1),
                _ => n * n.saturating_sub(1) / 2,
            };
            assert_eq!(pairs.len(), expected, "n={n} {}", mode.name());
            assert_eq!(pair_count(n, &mode), expected);
            assert!(pairs.iter().all(|p| p.x != p.y && p.same == (labels[p.x] == labels[p.y])));
        }
    }
}
