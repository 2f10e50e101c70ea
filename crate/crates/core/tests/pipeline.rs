mod common;

use std::fs;
use std::path::Path;

use layerfuse::eval::{builtin_methods, parse_row, run_cv, CvSettings, SffsSettings};
use layerfuse::reducers::RawPolicy;
use layerfuse::svm::SvmSettings;
use layerfuse::synthetic::{generate, write_dataset, SyntheticSpec};
use layerfuse::tensor_store::{stratified_folds, DatasetManifest};

fn synthetic_manifest() -> DatasetManifest {
    DatasetManifest::load(common::fixtures().join("synthetic/manifest.json")).unwrap()
}

fn settings() -> CvSettings {
    CvSettings {
        layers: vec![0, 1, 2],
        raw_policy: RawPolicy { threshold: 0, raw_tail: 0 },
        svm: SvmSettings::default(),
        sffs: SffsSettings::default(),
        keep_models: false,
    }
}

fn files_under(dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(files_under(&path).into_iter().map(|p| {
                format!("{}/{p}", path.file_name().unwrap().to_string_lossy())
            }));
        } else {
            out.push(path.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    out.sort();
    out
}

#[test]
fn committed_synthetic_fixture_regenerates_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&generate(&SyntheticSpec::default()).unwrap(), dir.path()).unwrap();
    let fixture = common::fixtures().join("synthetic");
    let generated = files_under(dir.path());
    assert_eq!(generated.len(), 181);
    for name in generated {
        let a = fs::read(dir.path().join(&name)).unwrap();
        let b = fs::read(fixture.join(&name)).unwrap_or_else(|_| panic!("fixture lacks {name}"));
        assert!(a == b, "{name} differs from the committed fixture");
    }
}

#[test]
fn permuting_the_manifest_keeps_accuracies() {
    let manifest = synthetic_manifest();
    let labels = manifest.labels();
    let folds = stratified_folds(&labels, 5, 3).unwrap();
    let known: Vec<String> = builtin_methods().into_iter().map(|p| p.name).collect();
    let rows: Vec<_> = ["DC", "PC+GMTP", "SFFS(3)"]
        .iter()
        .map(|r| parse_row(r, &known).unwrap())
        .collect();
    let base = run_cv(&manifest, &folds, &builtin_methods(), &rows, &settings()).unwrap();

    let mut rng = common::rng(11);
    let mut order: Vec<usize> = (0..manifest.samples.len()).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let mut permuted = manifest.clone();
    permuted.samples = order.iter().map(|&i| manifest.samples[i].clone()).collect();
    let permuted_folds = folds.permuted(&order);
    let other = run_cv(&permuted, &permuted_folds, &builtin_methods(), &rows, &settings()).unwrap();

    for (a, b) in base.results.iter().zip(&other.results) {
        assert_eq!(a.method, b.method);
        assert_eq!(a.mean_accuracy, b.mean_accuracy);
        assert_eq!(a.fold_accuracies, b.fold_accuracies);
        assert_eq!(a.fold_scores, b.fold_scores);
    }
}

#[test]
fn fold_order_does_not_change_the_mean() {
    let manifest = synthetic_manifest();
    let folds = stratified_folds(&manifest.labels(), 5, 0).unwrap();
    let mut relabeled = folds.clone();
    relabeled.assignment.iter_mut().for_each(|f| *f = 4 - *f);
    let known: Vec<String> = builtin_methods().into_iter().map(|p| p.name).collect();
    let rows = vec![parse_row("DC+GMTP", &known).unwrap()];
    let a = run_cv(&manifest, &folds, &builtin_methods(), &rows, &settings()).unwrap();
    let b = run_cv(&manifest, &relabeled, &builtin_methods(), &rows, &settings()).unwrap();
    assert!((a.results[0].mean_accuracy - b.results[0].mean_accuracy).abs() < 1e-12);
    let mut fa = a.results[0].fold_accuracies.clone();
    fa.reverse();
    assert_eq!(fa, b.results[0].fold_accuracies);
}

#[test]
fn single_classifier_row_matches_its_own_cv() {
    let manifest = synthetic_manifest();
    let folds = stratified_folds(&manifest.labels(), 5, 1).unwrap();
    let known: Vec<String> = builtin_methods().into_iter().map(|p| p.name).collect();
    let mut s = settings();
    s.layers = vec![2];
    let fused = vec![parse_row("(PC+PC)", &known).unwrap()];
    let single = vec![parse_row("PC", &known).unwrap()];
    let a = run_cv(&manifest, &folds, &builtin_methods(), &fused, &s).unwrap();
    let b = run_cv(&manifest, &folds, &builtin_methods(), &single, &s).unwrap();
    assert_eq!(a.results[0].fold_accuracies, b.results[0].fold_accuracies);
    assert_eq!(a.results[0].fold_scores, b.results[0].fold_scores);
}

#[test]
fn test_fold_labels_never_reach_the_fit() {
    // Flipping every test-fold label must leave the fused scores untouched.
    let manifest = synthetic_manifest();
    let folds = stratified_folds(&manifest.labels(), 5, 2).unwrap();
    let known: Vec<String> = builtin_methods().into_iter().map(|p| p.name).collect();
    let rows = vec![parse_row("CHI+GMTP", &known).unwrap()];
    let base = run_cv(&manifest, &folds, &builtin_methods(), &rows, &settings()).unwrap();
    for fold in 0..5 {
        let mut altered = manifest.clone();
        for i in folds.test_indices(fold) {
            altered.samples[i].label = (altered.samples[i].label + 1) % 3;
        }
        let out = run_cv(&altered, &folds, &builtin_methods(), &rows, &settings()).unwrap();
        assert_eq!(
            out.results[0].fold_scores[fold].scores,
            base.results[0].fold_scores[fold].scores
        );
    }
}
