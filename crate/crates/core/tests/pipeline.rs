use std::fs;
use std::path::Path;

use must_core::config::RunConfig;
use must_core::pipeline::{self, ModelMeta};
use must_core::Error;

fn config(dir: &Path, extra: &[(&str, &str)]) -> RunConfig {
    let mut overrides = vec![
        ("seed".to_string(), "2".to_string()),
        ("paths.data".to_string(), dir.join("data").display().to_string()),
        ("paths.model".to_string(), dir.join("m/model.bin").display().to_string()),
        ("paths.report".to_string(), dir.join("report").display().to_string()),
    ];
    overrides.extend(extra.iter().map(|(k, v)| (k.to_string(), v.to_string())));
    RunConfig::resolve(None, &overrides).unwrap()
}

#[test]
fn empty_manifest_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &[("synth.per_class", "0")]);
    pipeline::cmd_synth(&cfg).unwrap();
    assert!(pipeline::read_manifest(&cfg.paths.data).unwrap().is_empty());
    let err = pipeline::load_recordings(&cfg.paths.data).unwrap_err();
    assert!(matches!(err, Error::InvalidInput(_)), "{err:?}");
}

#[test]
fn manifest_paths_resolve_against_its_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &[("synth.per_class", "2")]);
    let manifest = pipeline::cmd_synth(&cfg).unwrap();
    let from_dir = pipeline::read_manifest(&cfg.paths.data).unwrap();
    let from_file = pipeline::read_manifest(&manifest).unwrap();
    assert_eq!(from_dir, from_file);
    assert_eq!(from_dir.len(), 6);
    assert!(from_dir.iter().all(|(p, _)| p.is_file()));
    let recs = pipeline::load_recordings(&manifest).unwrap();
    assert_eq!(pipeline::class_count(&recs), 3);
}

#[test]
fn bad_manifest_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("manifest.csv");
    fs::write(&path, "file,class\na.aer,0\n").unwrap();
    assert!(pipeline::read_manifest(&path).is_err());
}

#[test]
fn features_are_ordered_and_labelled() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &[("synth.per_class", "3")]);
    pipeline::cmd_synth(&cfg).unwrap();
    let recs = pipeline::load_recordings(&cfg.paths.data).unwrap();
    let feats = pipeline::extract_features(&cfg, &recs).unwrap();
    let segs = pipeline::segment_recordings(&cfg, &recs).unwrap();
    assert_eq!(feats.len(), segs.iter().map(Vec::len).sum::<usize>());
    for w in feats.windows(2) {
        assert!((w[0].recording, w[0].segment) < (w[1].recording, w[1].segment));
    }
    for f in &feats {
        assert_eq!(f.label, recs[f.recording].label);
        assert!(f.t_start_us <= f.t_end_us);
    }
}

#[test]
fn trained_model_round_trips_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &[("synth.per_class", "8")]);
    pipeline::cmd_synth(&cfg).unwrap();
    let model = pipeline::cmd_train(&cfg).unwrap();
    let bytes = fs::read(&cfg.paths.model).unwrap();
    assert_eq!(bytes, model.to_bytes());

    let (loaded, meta) = pipeline::load_model(&cfg, &cfg.paths.model).unwrap();
    assert_eq!(loaded.to_bytes(), bytes);
    assert_eq!(loaded.labels, model.labels);
    assert_eq!(meta.class_count, 3);
    assert_eq!(meta.fusion, cfg.fusion);
    let meta_text = fs::read_to_string(pipeline::meta_path(&cfg.paths.model)).unwrap();
    assert_eq!(ModelMeta::from_text(&meta_text).unwrap(), meta);

    let replay = fs::read_to_string(pipeline::config_path(&cfg.paths.model)).unwrap();
    assert_eq!(RunConfig::resolve(Some(&replay), &[]).unwrap().to_text(), cfg.to_text());

    for class in 0..3u32 {
        let n = model.labels.iter().zip(&model.silent).filter(|(l, s)| **l == class && !**s).count();
        assert!(n >= 1, "no neuron labelled {class}: {:?}", model.labels);
    }
}

#[test]
fn stratified_split_keeps_class_proportions() {
    let labels: Vec<u32> = (0..30).map(|i| i % 3).collect();
    let (train, test) = pipeline::stratified_split(&labels, 0.9, 7);
    assert_eq!(train.len() + test.len(), 30);
    for c in 0..3 {
        assert_eq!(train.iter().filter(|&&i| labels[i] == c).count(), 9);
        assert_eq!(test.iter().filter(|&&i| labels[i] == c).count(), 1);
    }
    assert_eq!(pipeline::stratified_split(&labels, 0.9, 7), (train.clone(), test.clone()));
    assert_ne!(pipeline::stratified_split(&labels, 0.9, 8).1, test);

    let (train, test) = pipeline::stratified_split(&[0, 0, 1, 1], 0.99, 1);
    assert_eq!((train.len(), test.len()), (2, 2));
}

#[test]
fn eval_and_analyze_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &[("synth.per_class", "6"), ("split.runs", "2")]);
    pipeline::cmd_synth(&cfg).unwrap();
    let summary = pipeline::cmd_eval(&cfg, None).unwrap();
    assert_eq!(summary.reports.len(), 2);
    let csv = fs::read_to_string(cfg.paths.report.join("summary.csv")).unwrap();
    assert_eq!(csv, summary.to_csv());
    assert!(summary.accuracies().iter().all(|a| (0.0..=1.0).contains(a)));

    let analysis = pipeline::cmd_analyze(&cfg).unwrap();
    assert_eq!(analysis.entropy.len(), 2);
    assert_eq!(analysis.fusion.len(), 4);
    let spikes: Vec<usize> = analysis.fusion.iter().map(|f| f.2).collect();
    assert!(spikes.windows(2).all(|w| w[0] == w[1]));

    let read = |names: &[&str]| -> Vec<Vec<u8>> {
        names.iter().map(|n| fs::read(cfg.paths.report.join(n)).unwrap()).collect()
    };
    let files = ["entropy.csv", "cc.csv", "histogram.csv", "fusion.csv", "config.txt"];
    let first = read(&files);
    pipeline::cmd_analyze(&cfg).unwrap();
    assert!(first == read(&files), "analyze re-run differs");
}

#[test]
fn single_run_reports_zero_std() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &[("synth.per_class", "4"), ("split.runs", "1")]);
    pipeline::cmd_synth(&cfg).unwrap();
    let summary = pipeline::cmd_eval(&cfg, None).unwrap();
    assert_eq!(summary.reports.len(), 1);
    assert_eq!(summary.std(), 0.0);
    let csv = fs::read_to_string(cfg.paths.report.join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
