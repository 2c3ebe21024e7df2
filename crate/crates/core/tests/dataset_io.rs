use std::io::Write;
use std::path::PathBuf;

use cardsvm::dataset::{load_csv, load_sparse, standardize, subsample, train_test_split, Standardizer};
use cardsvm::{Dataset, Error};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cleveland_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/cleveland.csv")
}

fn tmp(contents: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f
}

#[test]
fn cleveland_shape_after_dropping_missing_rows() {
    let d = load_csv(cleveland_path(), "diagnosis", "1").unwrap();
    assert_eq!((d.n_samples(), d.n_features()), (297, 13));
    assert_eq!(d.feature_names()[0], "age");
    assert_eq!(d.source_id(), "cleveland");
    let pos = d.labels().iter().filter(|&&y| y > 0.0).count();
    assert!(pos > 0 && pos < 297);
}

#[test]
fn cleveland_subsample_to_200() {
    let d = load_csv(cleveland_path(), "diagnosis", "1").unwrap();
    let s = subsample(&d, 200, 7).unwrap();
    assert_eq!((s.n_samples(), s.n_features()), (200, 13));
    assert_eq!(s, subsample(&d, 200, 7).unwrap());
}

#[test]
fn csv_with_string_labels() {
    let f = tmp("x1,x2,cls\n1,2,a\n3,4,b\n5,6,a\n");
    let d = load_csv(f.path(), "cls", "a").unwrap();
    assert_eq!((d.n_samples(), d.n_features()), (3, 2));
    assert_eq!(d.labels(), [1.0, -1.0, 1.0]);
    assert_eq!(d.row(1), [3.0, 4.0]);
}

#[test]
fn csv_errors() {
    let f = tmp("x1,x2,cls\n1,2,a\n3,oops,b\n");
    match load_csv(f.path(), "cls", "a") {
        Err(Error::Format { line, message }) => {
            assert_eq!(line, 3);
            assert!(message.contains("oops"), "{message}");
        }
        other => panic!("expected a format error, got {other:?}"),
    }
    let f = tmp("x1,cls\n1,a\n2,b\n3,c\n");
    assert!(matches!(load_csv(f.path(), "cls", "a"), Err(Error::Domain(_))));
    let f = tmp("x1,cls\n1,a\n2,b\n");
    assert!(matches!(load_csv(f.path(), "label", "a"), Err(Error::Format { .. })));
    assert!(matches!(load_csv(f.path(), "cls", "z"), Err(Error::Domain(_))));
    assert!(load_csv("/nonexistent/file.csv", "cls", "a").is_err());
}

#[test]
fn sparse_lines() {
    let f = tmp("+1 1:0.5 3:2.0\n-1\n");
    let d = load_sparse(f.path(), Some(3)).unwrap();
    assert_eq!(d.row(0), [0.5, 0.0, 2.0]);
    assert_eq!(d.row(1), [0.0, 0.0, 0.0]);
    assert_eq!(d.labels(), [1.0, -1.0]);
}

#[test]
fn sparse_file_with_208_rows_and_60_indices() {
    let mut rng = ChaCha8Rng::seed_from_u64(208);
    let mut text = String::new();
    for i in 0..208 {
        text.push_str(if i % 2 == 0 { "1" } else { "-1" });
        for j in 1..=60 {
            if j == 60 || rng.random_bool(0.7) {
                text.push_str(&format!(" {j}:{:.4}", rng.random_range(0.0..1.0)));
            }
        }
        text.push('\n');
    }
    let d = load_sparse(tmp(&text).path(), None).unwrap();
    assert_eq!((d.n_samples(), d.n_features()), (208, 60));
    assert!(matches!(load_sparse(tmp(&text).path(), Some(59)), Err(Error::Format { line: 1, .. })));
}

#[test]
fn constant_column_becomes_zero() {
    let d = Dataset::from_rows(vec![vec![5.0, 1.0], vec![5.0, 2.0], vec![5.0, 3.0]], vec![1.0, -1.0, 1.0]).unwrap();
    let s = standardize(&d);
    assert_eq!(s.column(0), [0.0, 0.0, 0.0]);
    let c = s.column(1);
    assert!(c.iter().sum::<f64>().abs() < 1e-12);
}

#[test]
fn standardizer_applies_training_statistics() {
    let d = load_csv(cleveland_path(), "diagnosis", "1").unwrap();
    let (train, test) = train_test_split(&d, 0.25, 3).unwrap();
    assert_eq!(train.n_samples() + test.n_samples(), d.n_samples());
    let st = Standardizer::fit(&train);
    let t = st.transform(&test).unwrap();
    assert_eq!(t.n_samples(), test.n_samples());
    assert!(t.rows().flatten().all(|v| v.is_finite()));
}

fn arb_dataset() -> impl Strategy<Value = Dataset> {
    (2usize..12, 1usize..5).prop_flat_map(|(m, n)| {
        (
            prop::collection::vec(prop::collection::vec(-1e3f64..1e3, n), m),
            prop::collection::vec(prop::bool::ANY, m),
        )
            .prop_map(|(rows, flags)| {
                let mut labels: Vec<f64> = flags.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
                labels[0] = 1.0;
                labels[1] = -1.0;
                Dataset::from_rows(rows, labels).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn standardize_is_finite_and_idempotent(d in arb_dataset()) {
        let once = standardize(&d);
        let twice = standardize(&once);
        for (a, b) in once.rows().flatten().zip(twice.rows().flatten()) {
            prop_assert!(a.is_finite());
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn subsample_is_a_seeded_class_preserving_subset(d in arb_dataset(), k in 2usize..12, seed in any::<u64>()) {
        let k = k.min(d.n_samples());
        let s = subsample(&d, k, seed).unwrap();
        prop_assert_eq!(s.n_samples(), k);
        prop_assert!(s.labels().contains(&1.0) && s.labels().contains(&-1.0));
        for row in s.rows() {
            prop_assert!(d.rows().any(|r| r == row));
        }
        prop_assert_eq!(&s, &subsample(&d, k, seed).unwrap());
    }
}
