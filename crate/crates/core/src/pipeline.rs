//! End-to-end commands: synthesize a dataset, segment, encode, train,
//! evaluate and analyze. Every command is a pure function of the resolved
//! configuration and its input files.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::{response_histogram, spike_entropy, CcSummary};
use crate::config::{RunConfig, SynthConfig};
use crate::error::{Error, Result};
use crate::event_io::{read_events, synthesize, write_events, EventStream, Format, SensorGeometry, Shape, SynthSpec};
use crate::features::{encode, extract_c1, fit_coding, C1Maps, CodingKind, CodingParams, Fusion, GaborBank};
use crate::recognition::{assign_labels, evaluate, train, Dataset, DatasetItem, EvalReport, Model, TrainConfig};
use crate::seed::derive_seed;
use crate::segmentation::{segment_stream, Segment};
use crate::snn::{Network, SnnParams};

pub const MANIFEST: &str = "manifest.csv";
pub const CLASS_NAMES: [&str; 3] = ["bar", "disc", "corner"];

/// Runs `f` on a pool of `workers` threads, or on the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Recording specs of the three-class synthetic set: a horizontal bar, a
/// disc and a downward-opening corner, each drifting down through the
/// field with jittered position and orientation.
pub fn synth_specs(cfg: &SynthConfig) -> Vec<(String, SynthSpec)> {
    let geometry = SensorGeometry::new(cfg.width, cfg.height);
    let mut out = Vec::with_capacity(3 * cfg.per_class);
    for class in 0..3 {
        for i in 0..cfg.per_class {
            let index = (class * cfg.per_class + i) as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, index));
            let mut jitter = |amp: f64| if amp > 0.0 { rng.gen_range(-amp..=amp) } else { 0.0 };
            let (jx, jy, ja) = (jitter(cfg.jitter_px), jitter(cfg.jitter_px), jitter(cfg.angle_jitter_deg));
            let (shape, size, y_offset) = match class {
                0 => (Shape::Bar { angle_deg: ja }, cfg.size, 0.0),
                1 => (Shape::Disc, cfg.size * cfg.disc_scale, 0.0),
                _ => (Shape::Corner { angle_deg: 45.0 + ja }, cfg.size, -cfg.size / 4.0),
            };
            let travel = cfg.speed * cfg.duration_ms;
            let start = (
                cfg.width as f64 / 2.0 + jx,
                cfg.height as f64 / 2.0 - travel / 2.0 + y_offset + jy,
            );
            let spec = SynthSpec {
                geometry,
                shape,
                size,
                start,
                motion: (0.0, cfg.speed),
                duration_ms: cfg.duration_ms,
                event_rate: cfg.event_rate,
                noise_rate: cfg.noise_rate,
                seed: rng.gen(),
            };
            out.push((format!("{}_{i:03}.aer", CLASS_NAMES[class]), spec));
        }
    }
    out
}

/// Writes the synthetic recordings and `manifest.csv` (`path,label`, paths
/// relative to the manifest) into `cfg.paths.data`.
pub fn cmd_synth(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = &cfg.paths.data;
    create_dir(dir)?;
    let specs = synth_specs(&cfg.synth);
    let streams: Vec<EventStream> = specs.par_iter().map(|(_, s)| synthesize(s)).collect::<Result<_>>()?;
    let mut manifest = String::from("path,label\n");
    for ((name, _), stream) in specs.iter().zip(&streams) {
        write_events(stream, dir.join(name), Format::Binary)?;
        manifest.push_str(&format!("{name},{}\n", stream.label.unwrap_or(0)));
    }
    let path = dir.join(MANIFEST);
    write_file(&path, manifest)?;
    write_file(&dir.join("config.txt"), cfg.to_text())?;
    Ok(path)
}

fn manifest_path(data: &Path) -> PathBuf {
    if data.is_dir() {
        data.join(MANIFEST)
    } else {
        data.to_path_buf()
    }
}

/// Reads `path,label` rows; relative paths resolve against the manifest's
/// directory.
pub fn read_manifest(data: &Path) -> Result<Vec<(PathBuf, u32)>> {
    let path = manifest_path(data);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if n == 0 {
            if line != "path,label" {
                return Err(Error::parse_line(1, "manifest header must be 'path,label'"));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let (p, l) = line
            .rsplit_once(',')
            .ok_or_else(|| Error::parse_line(n as u64 + 1, "expected path,label"))?;
        let label = l
            .trim()
            .parse()
            .map_err(|_| Error::parse_line(n as u64 + 1, format!("bad label {l:?}")))?;
        rows.push((base.join(p.trim()), label));
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct Recording {
    pub path: PathBuf,
    pub label: u32,
    pub stream: EventStream,
}

/// Loads every manifest entry. An empty manifest is an error.
pub fn load_recordings(data: &Path) -> Result<Vec<Recording>> {
    let rows = read_manifest(data)?;
    if rows.is_empty() {
        return Err(Error::InvalidInput(format!(
            "manifest {} lists no recordings",
            manifest_path(data).display()
        )));
    }
    rows.into_par_iter()
        .map(|(path, label)| {
            let stream = read_events(&path, Format::from_path(&path))?;
            Ok(Recording { path, label, stream })
        })
        .collect()
}

pub fn class_count(recordings: &[Recording]) -> usize {
    recordings.iter().map(|r| r.label as usize + 1).max().unwrap_or(0)
}

/// C1 maps of one segment.
#[derive(Debug, Clone)]
pub struct SegmentFeatures {
    pub recording: usize,
    pub segment: usize,
    pub label: u32,
    pub t_start_us: u32,
    pub t_end_us: u32,
    pub c1: C1Maps,
}

pub fn segment_recordings(cfg: &RunConfig, recordings: &[Recording]) -> Result<Vec<Vec<Segment>>> {
    recordings
        .par_iter()
        .map(|r| segment_stream(&r.stream, &cfg.msd))
        .collect()
}

/// Segments every recording and extracts C1 maps for each segment, in
/// recording then segment order.
pub fn extract_features(cfg: &RunConfig, recordings: &[Recording]) -> Result<Vec<SegmentFeatures>> {
    let bank = GaborBank::new(cfg.gabor.clone())?;
    let segments = segment_recordings(cfg, recordings)?;
    let jobs: Vec<(usize, usize, &Segment)> = segments
        .iter()
        .enumerate()
        .flat_map(|(r, segs)| segs.iter().enumerate().map(move |(k, s)| (r, k, s)))
        .collect();
    jobs.into_par_iter()
        .map(|(r, k, seg)| {
            Ok(SegmentFeatures {
                recording: r,
                segment: k,
                label: recordings[r].label,
                t_start_us: seg.t_start_us,
                t_end_us: seg.t_end_us,
                c1: extract_c1(&bank, recordings[r].stream.geometry, cfg.tau_leak_ms, seg)?,
            })
        })
        .collect()
}

/// Coding normalizers fitted on the given segments.
pub fn fit_features<'a>(
    cfg: &RunConfig,
    kind: CodingKind,
    features: impl IntoIterator<Item = &'a SegmentFeatures>,
) -> Result<CodingParams> {
    fit_coding(
        features.into_iter().flat_map(|f| f.c1.responses()),
        kind,
        cfg.r_min,
        cfg.t_w_ms,
    )
}

pub fn build_dataset<'a>(
    features: impl IntoIterator<Item = &'a SegmentFeatures>,
    coding: &CodingParams,
    fusion: Fusion,
    class_count: usize,
) -> Result<Dataset> {
    let items = features
        .into_iter()
        .map(|f| DatasetItem {
            pattern: encode(&f.c1, coding, fusion),
            label: f.label,
            recording: f.recording,
        })
        .collect();
    Dataset::new(items, class_count)
}

/// Coding, fusion and class count a model was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMeta {
    pub coding: CodingParams,
    pub fusion: Fusion,
    pub class_count: usize,
}

impl ModelMeta {
    pub fn to_text(&self) -> String {
        format!(
            "class_count={}\nfusion.mode={}\ncoding.kind={}\ncoding.r_min={}\ncoding.r_max={}\ncoding.t_w_ms={}\n",
            self.class_count, self.fusion, self.coding.kind, self.coding.r_min, self.coding.r_max, self.coding.t_w,
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let get = |key: &str| -> Result<String> {
            text.lines()
                .filter_map(|l| l.split_once('='))
                .find(|(k, _)| k.trim() == key)
                .map(|(_, v)| v.trim().to_string())
                .ok_or_else(|| Error::Config(format!("model metadata lacks {key}")))
        };
        let num = |v: String| -> Result<f64> { v.parse().map_err(|_| Error::Config(format!("bad number {v:?}"))) };
        let class_count = get("class_count")?
            .parse()
            .map_err(|_| Error::Config("bad class_count".into()))?;
        let fusion = get("fusion.mode")?.parse()?;
        let kind = get("coding.kind")?.parse()?;
        let coding = CodingParams::new(kind, num(get("coding.r_min")?)?, num(get("coding.r_max")?)?, num(get("coding.t_w_ms")?)?)?;
        Ok(Self {
            coding,
            fusion,
            class_count,
        })
    }
}

pub fn meta_path(model: &Path) -> PathBuf {
    model.with_extension("meta")
}

pub fn config_path(model: &Path) -> PathBuf {
    model.with_extension("config")
}

/// Fits coding on the training segments, trains a fresh network and
/// assigns labels.
pub fn fit_model(
    cfg: &RunConfig,
    snn: &SnnParams,
    train_cfg: &TrainConfig,
    features: &[&SegmentFeatures],
    class_count: usize,
) -> Result<(Model, ModelMeta)> {
    let coding = fit_features(cfg, cfg.coding_kind, features.iter().copied())?;
    let data = build_dataset(features.iter().copied(), &coding, cfg.fusion, class_count)?;
    let n_e = data.n_addresses().unwrap_or(0);
    let mut network = Network::new(n_e, snn.clone())?;
    train(&mut network, &data, train_cfg)?;
    let model = assign_labels(network, &data)?;
    Ok((
        model,
        ModelMeta {
            coding,
            fusion: cfg.fusion,
            class_count,
        },
    ))
}

/// Trains on every recording in `cfg.paths.data` and writes the model, its
/// metadata and the resolved configuration next to `cfg.paths.model`.
pub fn cmd_train(cfg: &RunConfig) -> Result<Model> {
    let recordings = load_recordings(&cfg.paths.data)?;
    let classes = class_count(&recordings);
    let features = extract_features(cfg, &recordings)?;
    let refs: Vec<&SegmentFeatures> = features.iter().collect();
    let (model, meta) = fit_model(cfg, &cfg.snn, &cfg.train, &refs, classes)?;
    let path = &cfg.paths.model;
    write_file(path, model.to_bytes())?;
    write_file(&meta_path(path), meta.to_text())?;
    write_file(&config_path(path), cfg.to_text())?;
    Ok(model)
}

pub fn load_model(cfg: &RunConfig, path: &Path) -> Result<(Model, ModelMeta)> {
    let meta_file = meta_path(path);
    let text = fs::read_to_string(&meta_file).map_err(|e| Error::io(&meta_file, e))?;
    let meta = ModelMeta::from_text(&text)?;
    let model = Model::load(path, cfg.snn.clone(), meta.class_count)?;
    Ok((model, meta))
}

/// Per-class shuffled split; each class keeps `round(fraction · n)` items
/// for training, at least one and at most `n − 1` when `n ≥ 2`.
pub fn stratified_split(labels: &[u32], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for c in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] as usize == c).collect();
        if idx.is_empty() {
            continue;
        }
        idx.shuffle(&mut rng);
        let n = idx.len();
        let k = if n < 2 { n } else { ((fraction * n as f64).round() as usize).clamp(1, n - 1) };
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub reports: Vec<EvalReport>,
}

impl RunSummary {
    pub fn accuracies(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.accuracy).collect()
    }

    pub fn mean(&self) -> f64 {
        let a = self.accuracies();
        a.iter().sum::<f64>() / a.len().max(1) as f64
    }

    /// Population standard deviation over runs; 0 for a single run.
    pub fn std(&self) -> f64 {
        let a = self.accuracies();
        let m = self.mean();
        (a.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / a.len().max(1) as f64).sqrt()
    }

    /// Confusion matrix summed over runs.
    pub fn confusion(&self) -> EvalReport {
        let classes = self.reports.first().map_or(0, |r| r.confusion.len());
        let mut pairs = Vec::new();
        for r in &self.reports {
            for (t, row) in r.confusion.iter().enumerate() {
                for (p, &n) in row.iter().enumerate() {
                    pairs.extend(std::iter::repeat((t as u32, p as u32)).take(n as usize));
                }
            }
        }
        let mut out = EvalReport::from_pairs(classes, pairs);
        out.no_response = self.reports.iter().map(|r| r.no_response).sum();
        out
    }

    /// `run,accuracy` rows followed by the `accuracy,<mean>,<std>` line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("run,accuracy\n");
        for (k, a) in self.accuracies().iter().enumerate() {
            out.push_str(&format!("{k},{a}\n"));
        }
        out.push_str(&format!("accuracy,{},{}\n", self.mean(), self.std()));
        out
    }
}

/// Repeated stratified train/test splits over recordings. Run `k` derives its
/// split, weight and shuffle seeds from the configured ones and `k`.
pub fn split_runs(cfg: &RunConfig, recordings: &[Recording], features: &[SegmentFeatures]) -> Result<RunSummary> {
    let labels: Vec<u32> = recordings.iter().map(|r| r.label).collect();
    let classes = class_count(recordings);
    let mut reports = Vec::with_capacity(cfg.split.runs);
    for run in 0..cfg.split.runs as u64 {
        let (train_idx, _) = stratified_split(&labels, cfg.split.fraction, derive_seed(cfg.split.seed, run));
        let mut in_train = vec![false; recordings.len()];
        for &i in &train_idx {
            in_train[i] = true;
        }
        let train_f: Vec<&SegmentFeatures> = features.iter().filter(|f| in_train[f.recording]).collect();
        let test_f = features.iter().filter(|f| !in_train[f.recording]);
        let snn = SnnParams {
            seed: derive_seed(cfg.snn.seed, run),
            ..cfg.snn.clone()
        };
        let train_cfg = TrainConfig {
            shuffle_seed: derive_seed(cfg.train.shuffle_seed, run),
            ..cfg.train.clone()
        };
        let (model, meta) = fit_model(cfg, &snn, &train_cfg, &train_f, classes)?;
        let test = build_dataset(test_f, &meta.coding, meta.fusion, classes)?;
        if test.is_empty() {
            return Err(Error::InvalidInput("split leaves the test set empty".into()));
        }
        reports.push(evaluate(&model, &test)?);
    }
    Ok(RunSummary { reports })
}

/// With a model: scores every recording in `cfg.paths.data`. Without: runs
/// the repeated-split harness. Writes `confusion.csv`, `summary.csv` and the
/// resolved configuration into `cfg.paths.report`.
pub fn cmd_eval(cfg: &RunConfig, model_path: Option<&Path>) -> Result<RunSummary> {
    let recordings = load_recordings(&cfg.paths.data)?;
    let features = extract_features(cfg, &recordings)?;
    let summary = match model_path {
        Some(path) => {
            let (model, meta) = load_model(cfg, path)?;
            let data_classes = class_count(&recordings);
            if data_classes > meta.class_count {
                return Err(Error::ClassMismatch {
                    model: meta.class_count,
                    data: data_classes,
                });
            }
            let data = build_dataset(&features, &meta.coding, meta.fusion, meta.class_count)?;
            RunSummary {
                reports: vec![evaluate(&model, &data)?],
            }
        }
        None => split_runs(cfg, &recordings, &features)?,
    };
    let dir = &cfg.paths.report;
    write_file(&dir.join("confusion.csv"), summary.confusion().confusion_csv())?;
    write_file(&dir.join("summary.csv"), summary.to_csv())?;
    write_file(&dir.join("config.txt"), cfg.to_text())?;
    Ok(summary)
}

/// Writes `segments.csv` with one row per MSD segment.
pub fn cmd_segment(cfg: &RunConfig) -> Result<usize> {
    let recordings = load_recordings(&cfg.paths.data)?;
    let segments = segment_recordings(cfg, &recordings)?;
    let mut out = String::from("recording,segment,t_start_us,t_end_us,events\n");
    let mut total = 0;
    for (r, segs) in recordings.iter().zip(&segments) {
        for (k, s) in segs.iter().enumerate() {
            out.push_str(&format!(
                "{},{k},{},{},{}\n",
                r.path.display(),
                s.t_start_us,
                s.t_end_us,
                s.events.len()
            ));
            total += 1;
        }
    }
    let dir = &cfg.paths.report;
    write_file(&dir.join("segments.csv"), out)?;
    write_file(&dir.join("config.txt"), cfg.to_text())?;
    Ok(total)
}

/// Fits the coding on every segment and writes `spikes.csv`
/// (`recording,segment,address,time_ms`) plus `coding.meta`.
pub fn cmd_encode(cfg: &RunConfig) -> Result<usize> {
    let recordings = load_recordings(&cfg.paths.data)?;
    let features = extract_features(cfg, &recordings)?;
    let coding = fit_features(cfg, cfg.coding_kind, &features)?;
    let mut out = String::from("recording,segment,address,time_ms\n");
    let mut total = 0;
    for f in &features {
        let pattern = encode(&f.c1, &coding, cfg.fusion);
        for s in &pattern.spikes {
            out.push_str(&format!("{},{},{},{}\n", f.recording, f.segment, s.address, s.time_ms));
        }
        total += pattern.len();
    }
    let meta = ModelMeta {
        coding,
        fusion: cfg.fusion,
        class_count: class_count(&recordings),
    };
    let dir = &cfg.paths.report;
    write_file(&dir.join("spikes.csv"), out)?;
    write_file(&dir.join("coding.meta"), meta.to_text())?;
    write_file(&dir.join("config.txt"), cfg.to_text())?;
    Ok(total)
}

/// Results of [`analyze`].
#[derive(Debug, Clone)]
pub struct Analysis {
    /// (kind, pooled entropy in bits, spike count) for log then linear.
    pub entropy: Vec<(CodingKind, f64, usize)>,
    pub cc: CcSummary,
    /// (mode, address count, spike count) in [`Fusion::ALL`] order.
    pub fusion: Vec<(Fusion, usize, usize)>,
    pub histogram_csv: String,
}

/// Pooled spike-timing entropy for both codings, per-sample scale and
/// orientation correlations, the response histogram and fusion accounting.
pub fn analyze(cfg: &RunConfig, features: &[SegmentFeatures]) -> Result<Analysis> {
    let mut entropy = Vec::new();
    for kind in [CodingKind::Log, CodingKind::Linear] {
        let coding = fit_features(cfg, kind, features)?;
        let times: Vec<f64> = features
            .iter()
            .flat_map(|f| encode(&f.c1, &coding, cfg.fusion).times().collect::<Vec<_>>())
            .collect();
        let n = times.len();
        entropy.push((kind, spike_entropy(times, cfg.analysis.entropy_bin_ms, cfg.t_w_ms)?, n));
    }
    let cc = CcSummary::from_samples(features.iter().map(|f| &f.c1))?;
    let hist = response_histogram(
        features.iter().flat_map(|f| f.c1.responses()),
        cfg.analysis.hist_bin,
        cfg.r_min,
    )?;
    let mut histogram_csv = hist.histogram.to_csv();
    histogram_csv.push_str(&format!("below_r_min,{}\n", hist.below_fraction()));
    let coding = fit_features(cfg, cfg.coding_kind, features)?;
    let cells = features.first().map_or(0, |f| f.c1.cells_per_map());
    let fusion = Fusion::ALL
        .iter()
        .map(|&mode| {
            let n_addr = mode.n_addresses(cfg.gabor.scales.len(), cfg.gabor.orientations_deg.len(), cells);
            let spikes = features.iter().map(|f| encode(&f.c1, &coding, mode).len()).sum();
            (mode, n_addr, spikes)
        })
        .collect();
    Ok(Analysis {
        entropy,
        cc,
        fusion,
        histogram_csv,
    })
}

/// Writes `entropy.csv`, `cc.csv`, `histogram.csv` and `fusion.csv`.
pub fn cmd_analyze(cfg: &RunConfig) -> Result<Analysis> {
    let recordings = load_recordings(&cfg.paths.data)?;
    let features = extract_features(cfg, &recordings)?;
    let a = analyze(cfg, &features)?;
    let dir = &cfg.paths.report;
    let mut entropy = String::from("coding,entropy_bits,spikes\n");
    for (kind, h, n) in &a.entropy {
        entropy.push_str(&format!("{kind},{h},{n}\n"));
    }
    let base = a.fusion.first().map_or(1, |f| f.1.max(1)) as f64;
    let mut fusion = String::from("mode,addresses,ratio,spikes\n");
    for (mode, n, s) in &a.fusion {
        fusion.push_str(&format!("{mode},{n},{},{s}\n", *n as f64 / base));
    }
    write_file(&dir.join("entropy.csv"), entropy)?;
    write_file(&dir.join("cc.csv"), a.cc.to_csv())?;
    write_file(&dir.join("histogram.csv"), &a.histogram_csv)?;
    write_file(&dir.join("fusion.csv"), fusion)?;
    write_file(&dir.join("config.txt"), cfg.to_text())?;
    Ok(a)
}
