use agop_ixg::tabular::{load_adult, preprocess_adult, ADULT_FEATURES, ADULT_ROWS};
use std::path::PathBuf;

fn adult_dir() -> Option<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/adult");
    if dir.join("adult.data").exists() && dir.join("adult.test").exists() {
        Some(dir)
    } else {
        eprintln!("skipping: no Adult files under {}", dir.display());
        None
    }
}

#[test]
fn real_adult_files_give_the_reference_shape() {
    let Some(dir) = adult_dir() else { return };
    let raw = load_adult(&dir).unwrap();
    assert_eq!(raw.len(), 48_842);
    assert_eq!(raw.clean_rows().count(), ADULT_ROWS);
    let (train, test, summary) = preprocess_adult(&raw, 0).unwrap();
    assert_eq!(summary.features, ADULT_FEATURES);
    assert!(summary.warning.is_none());
    assert_eq!((train.len(), test.len()), (36_177, 9_045));
    assert_eq!(train.num_features(), 104);
    let rate = |y: &[usize]| y.iter().filter(|&&v| v == 1).count() as f64 / y.len() as f64;
    assert!((rate(&train.y) - rate(&test.y)).abs() < 1e-3);
    assert!((rate(&train.y) - 0.2478).abs() < 1e-3);
    for j in 0..train.num_features() {
        let col = train.x.column(j);
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        if train.feature_names[j].contains('=') {
            assert!(col.iter().all(|&v| v == 0.0 || v == 1.0), "{}", train.feature_names[j]);
        } else {
            assert!(mean.abs() < 1e-9, "{} not centred", train.feature_names[j]);
        }
    }
}

#[test]
fn adult_split_depends_on_seed_only() {
    let Some(dir) = adult_dir() else { return };
    let raw = load_adult(&dir).unwrap();
    let (a, _, _) = preprocess_adult(&raw, 1).unwrap();
    let (b, _, _) = preprocess_adult(&raw, 1).unwrap();
    let (c, _, _) = preprocess_adult(&raw, 2).unwrap();
    assert_eq!(a.x, b.x);
    assert_ne!(a.x, c.x);
}
