use std::path::PathBuf;

use boltzmap::data::{
    binarize, load_dataset, load_idx, load_idx_labels, parse_idx_images, sha256_hex,
    DEFAULT_THRESHOLD,
};
use boltzmap::{Error, ErrorClass};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

#[test]
fn fixtures_have_mnist_geometry() {
    for (stem, count) in [("mnist-train-1k", 1000), ("mnist-test-500", 500)] {
        let images = load_idx(fixture(&format!("{stem}-images.idx3-ubyte"))).unwrap();
        let labels = load_idx_labels(fixture(&format!("{stem}-labels.idx1-ubyte"))).unwrap();
        assert_eq!((images.n_items, images.n_rows, images.n_cols), (count, 28, 28));
        assert_eq!(labels.len(), count);
        assert!(labels.iter().all(|&l| l < 10));
        assert!((0..10).all(|d| labels.contains(&d)));
    }
}

#[test]
fn binarized_fixture_activity_is_in_mnist_range() {
    let images = load_idx(fixture("mnist-train-1k-images.idx3-ubyte")).unwrap();
    let data = binarize(&images, DEFAULT_THRESHOLD);
    assert_eq!(data.n_features(), 784);
    let mean = data.mean_activity();
    assert!(mean > 0.10 && mean < 0.20, "mean activity {mean}");
    // Independent count of pixels at or above the threshold.
    let on = images.pixels.iter().filter(|&&p| p >= 128).count();
    assert!((mean - on as f64 / images.pixels.len() as f64).abs() < 1e-12);
}

#[test]
fn load_dataset_detects_idx_and_keeps_digest() {
    let path = fixture("mnist-test-500-images.idx3-ubyte");
    let data = load_dataset(&path, DEFAULT_THRESHOLD).unwrap();
    assert_eq!(data.n_items(), 500);
    assert_eq!(data.source_digest(), sha256_hex(&std::fs::read(&path).unwrap()));
    let err = load_dataset(fixture("mnist-test-500-labels.idx1-ubyte"), DEFAULT_THRESHOLD);
    assert!(err.is_err());
}

#[test]
fn truncated_fixture_reports_offset() {
    let bytes = std::fs::read(fixture("mnist-test-500-images.idx3-ubyte")).unwrap();
    let cut = &bytes[..bytes.len() - 7];
    match parse_idx_images(cut) {
        Err(e @ Error::Truncated { expected, actual, .. }) => {
            assert_eq!(expected - actual, 7);
            assert_eq!(e.class(), ErrorClass::Data);
        }
        other => panic!("expected truncation error, got {other:?}"),
    }
}

/// Checks the full training split when `BOLTZMAP_MNIST_DIR` points at the original files.
#[test]
fn canonical_train_split_when_available() {
    let Ok(dir) = std::env::var("BOLTZMAP_MNIST_DIR") else {
        return;
    };
    let images = load_idx(PathBuf::from(dir).join("train-images-idx3-ubyte")).unwrap();
    assert_eq!((images.n_items, images.n_rows, images.n_cols), (60000, 28, 28));
    let mean = binarize(&images, DEFAULT_THRESHOLD).mean_activity();
    assert!(mean > 0.10 && mean < 0.20, "mean activity {mean}");
}
