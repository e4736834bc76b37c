use std::io::Write;

use ndarray::Array2;
use proptest::prelude::*;
use sortad::data::{stratified_split, Dataset, RobustScaler};

fn labelled(n: usize, anomalies: &[bool]) -> Dataset {
    // Row i carries the value i, so rows can be traced through splits.
    let features = Array2::from_shape_fn((n, 2), |(i, j)| (i * 2 + j) as f64);
    let labels = anomalies.iter().map(|&a| u8::from(a)).collect();
    Dataset::new("p", features, Some(labels)).unwrap()
}

#[test]
fn thyroid_shaped_thirds() {
    let flags: Vec<bool> = (0..3772).map(|i| i % 40 == 7 && i < 40 * 93).collect();
    let ds = labelled(3772, &flags);
    assert_eq!(ds.num_anomalies(), 93);
    let parts = stratified_split(&ds, &[1.0 / 3.0; 3], 1235).unwrap();
    let counts: Vec<usize> = parts.iter().map(Dataset::num_anomalies).collect();
    assert_eq!(counts, vec![31, 31, 31]);
    assert_eq!(parts.iter().map(Dataset::len).sum::<usize>(), 3772);
}

#[test]
fn csv_ingestion_rejects_incomplete_rows() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "a,b,label\n1.0,2.0,0\n,3.0,0\nNaN,1.0,1\n4.5,-1,1\n7,x,0").unwrap();
    let (ds, report) = Dataset::from_csv(f.path(), Some("label")).unwrap();
    assert_eq!((report.accepted, report.rejected), (2, 3));
    assert_eq!(ds.feature_names, vec!["a", "b"]);
    assert_eq!(ds.labels, Some(vec![0, 1]));
    assert_eq!(ds.features.row(1).to_vec(), vec![4.5, -1.0]);

    let out = tempfile::NamedTempFile::new().unwrap();
    ds.to_csv(out.path()).unwrap();
    let (back, _) = Dataset::from_csv(out.path(), Some("label")).unwrap();
    assert_eq!(back.features, ds.features);
    assert_eq!(back.labels, ds.labels);
}

#[test]
fn csv_errors() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "a,b\n1,2").unwrap();
    assert!(Dataset::from_csv(f.path(), Some("label")).is_err());
    let mut g = tempfile::NamedTempFile::new().unwrap();
    writeln!(g, "a,label\n1,2").unwrap();
    assert!(Dataset::from_csv(g.path(), Some("label")).is_err());
}

proptest! {
    #[test]
    fn stratified_split_invariants(
        flags in proptest::collection::vec(proptest::bool::weighted(0.1), 30..300),
        seed in any::<u64>(),
        three in any::<bool>(),
    ) {
        let ds = labelled(flags.len(), &flags);
        let fractions: Vec<f64> = if three { vec![0.4, 0.3, 0.3] } else { vec![0.5, 0.5] };
        let parts = stratified_split(&ds, &fractions, seed).unwrap();
        let again = stratified_split(&ds, &fractions, seed).unwrap();
        prop_assert_eq!(&parts, &again);

        let mut seen: Vec<usize> = parts
            .iter()
            .flat_map(|p| p.features.column(0).iter().map(|v| (*v as usize) / 2).collect::<Vec<_>>())
            .collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..flags.len()).collect::<Vec<_>>());

        let rate = ds.num_anomalies() as f64 / ds.len() as f64;
        for p in &parts {
            let expected = rate * p.len() as f64;
            prop_assert!((p.num_anomalies() as f64 - expected).abs() <= 1.0 + 1e-9);
            let labels = p.labels.as_ref().unwrap();
            for (row, &l) in p.features.rows().into_iter().zip(labels) {
                prop_assert_eq!(l, u8::from(flags[(row[0] as usize) / 2]));
            }
        }
    }

    #[test]
    fn scaling_round_trip(rows in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 3), 4..50)) {
        let xs = Array2::from_shape_fn((rows.len(), 3), |(i, j)| rows[i][j]);
        let s = RobustScaler::fit(xs.view()).unwrap();
        let back = s.inverse_transform(s.transform(xs.view()).unwrap().view()).unwrap();
        for (a, b) in back.iter().zip(&xs) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        let scaled = s.transform(xs.view()).unwrap();
        let again = RobustScaler::fit(scaled.view()).unwrap();
        for m in again.medians {
            prop_assert!(m.abs() <= 1e-12);
        }
    }
}
