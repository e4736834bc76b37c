use sortad::data::sequential_split;
use sortad::model_file;
use sortad::pipeline::{self, SortadConfig};
use sortad::scoring::ScoringMethod;
use sortad::{synth, Error};

fn fitted() -> (pipeline::SortadModel, ndarray::Array2<f64>) {
    let ds = synth::gaussian_with_outliers(300, 5, 0.05, 3);
    let parts = sequential_split(&ds, &[0.5, 0.5]).unwrap();
    let cfg = SortadConfig {
        num_transformations: 4,
        num_temp_transformations: 4,
        epochs: 3,
        ..SortadConfig::default()
    };
    let (model, _) = pipeline::fit(parts[0].features.view(), &cfg).unwrap();
    (model, parts[1].features.clone())
}

#[test]
fn saved_model_scores_identically() {
    let (model, test) = fitted();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.sortad");
    model_file::save(&model, &path).unwrap();
    let loaded = model_file::load(&path).unwrap();
    assert_eq!(loaded, model);
    for method in ScoringMethod::ALL {
        let a = pipeline::score(&model, test.view(), method).unwrap();
        let b = pipeline::score(&loaded, test.view(), method).unwrap();
        for (x, y) in a.scores(method).iter().zip(b.scores(method)) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
    assert_eq!(model_file::to_string(&loaded), std::fs::read_to_string(&path).unwrap());
}

#[test]
fn truncated_and_foreign_files_are_rejected() {
    let (model, _) = fitted();
    let text = model_file::to_string(&model);
    let cut = &text[..text.len() / 2];
    assert!(matches!(model_file::from_str(cut), Err(Error::MalformedModel { .. })));
    let foreign = text.replacen(model_file::VERSION, "SORTADv9", 1);
    assert!(matches!(model_file::from_str(&foreign), Err(Error::VersionMismatch { .. })));
    let dir = tempfile::tempdir().unwrap();
    assert!(model_file::load(&dir.path().join("missing")).is_err());
}
