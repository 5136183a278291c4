//! Unsupervised training, post-hoc label assignment and firing-rate
//! classification.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::SpikePattern;
use crate::seed::derive_seed;
use crate::snn::{Network, Plasticity, SnnParams};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetItem {
    pub pattern: SpikePattern,
    pub label: u32,
    /// Segments of one recording share this id.
    pub recording: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub items: Vec<DatasetItem>,
    pub class_count: usize,
}

impl Dataset {
    pub fn new(items: Vec<DatasetItem>, class_count: usize) -> Result<Self> {
        if let Some(item) = items.iter().find(|i| i.label as usize >= class_count) {
            return Err(Error::InvalidInput(format!(
                "label {} outside {class_count} classes",
                item.label
            )));
        }
        if let Some(first) = items.first() {
            let n = first.pattern.n_addresses;
            if items.iter().any(|i| i.pattern.n_addresses != n) {
                return Err(Error::InvalidInput("patterns disagree on address count".into()));
            }
        }
        Ok(Self { items, class_count })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn n_addresses(&self) -> Option<usize> {
        self.items.first().map(|i| i.pattern.n_addresses)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1,
            shuffle_seed: 0,
        }
    }
}

/// Presents every pattern with plasticity on, in a seeded shuffled order,
/// for `epochs` passes. Labels are never read.
pub fn train(network: &mut Network, data: &Dataset, config: &TrainConfig) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    if let Some(n) = data.n_addresses() {
        if n != network.n_encoding() {
            return Err(Error::InvalidInput(format!(
                "patterns have {n} addresses, network has {} encoding neurons",
                network.n_encoding()
            )));
        }
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.shuffle_seed, epoch as u64));
        order.shuffle(&mut rng);
        for &k in &order {
            let pattern = &data.items[k].pattern;
            network.present(pattern, pattern.t_w, Plasticity::On, false)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub network: Network,
    pub labels: Vec<u32>,
    /// Neurons that never fired during assignment (labelled class 0).
    pub silent: Vec<bool>,
    pub class_count: usize,
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax_lowest<T: PartialOrd + Copy>(values: &[T]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        match best {
            Some(b) if !(*v > values[b]) => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Per-neuron label from per-neuron, per-class spike counts.
pub fn labels_from_counts(counts: &[Vec<u64>]) -> (Vec<u32>, Vec<bool>) {
    counts
        .iter()
        .map(|c| {
            let silent = c.iter().all(|&x| x == 0);
            (argmax_lowest(c).unwrap_or(0) as u32, silent)
        })
        .unzip()
}

/// One frozen pass over the training set; each neuron takes the class it
/// fired for most.
pub fn assign_labels(network: Network, data: &Dataset) -> Result<Model> {
    let responses: Vec<Vec<u32>> = data
        .items
        .par_iter()
        .map(|item| network.respond(&item.pattern, item.pattern.t_w, false).map(|r| r.counts))
        .collect::<Result<_>>()?;
    let mut counts = vec![vec![0u64; data.class_count]; network.n_learning()];
    for (item, r) in data.items.iter().zip(&responses) {
        for (j, &c) in r.iter().enumerate() {
            counts[j][item.label as usize] += c as u64;
        }
    }
    let (labels, silent) = labels_from_counts(&counts);
    Ok(Model {
        network,
        labels,
        silent,
        class_count: data.class_count,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: u32,
    /// Mean spike count over each class's neurons; `None` when no neuron
    /// carries that label.
    pub rates: Vec<Option<f64>>,
    pub no_response: bool,
}

impl Model {
    /// Class decision from summed spike counts of every learning neuron.
    pub fn classify_counts(&self, counts: &[u64]) -> Prediction {
        let mut sums = vec![0.0; self.class_count];
        let mut members = vec![0usize; self.class_count];
        for (&label, &c) in self.labels.iter().zip(counts) {
            sums[label as usize] += c as f64;
            members[label as usize] += 1;
        }
        let rates: Vec<Option<f64>> = sums
            .iter()
            .zip(&members)
            .map(|(&s, &n)| (n > 0).then(|| s / n as f64))
            .collect();
        let scored: Vec<f64> = rates.iter().map(|r| r.unwrap_or(f64::NEG_INFINITY)).collect();
        let no_response = counts.iter().all(|&c| c == 0);
        let class = if no_response { 0 } else { argmax_lowest(&scored).unwrap_or(0) as u32 };
        Prediction {
            class,
            rates,
            no_response,
        }
    }

    pub fn predict(&self, pattern: &SpikePattern) -> Result<Prediction> {
        let r = self.network.respond(pattern, pattern.t_w, false)?;
        let counts: Vec<u64> = r.counts.iter().map(|&c| c as u64).collect();
        Ok(self.classify_counts(&counts))
    }

    /// Little-endian `u32 n_e, u32 n_l`, then the row-major f64 weights,
    /// the f64 thresholds and the u32 labels.
    pub fn to_bytes(&self) -> Vec<u8> {
        let net = &self.network;
        let mut out = Vec::with_capacity(8 + 8 * net.weights().len() + 12 * net.n_learning());
        out.extend_from_slice(&(net.n_encoding() as u32).to_le_bytes());
        out.extend_from_slice(&(net.n_learning() as u32).to_le_bytes());
        for w in net.weights() {
            out.extend_from_slice(&w.to_le_bytes());
        }
        for t in net.thresholds() {
            out.extend_from_slice(&t.to_le_bytes());
        }
        for l in &self.labels {
            out.extend_from_slice(&l.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], params: SnnParams, class_count: usize) -> Result<Self> {
        let word = |at: usize| -> Result<[u8; 4]> {
            bytes
                .get(at..at + 4)
                .map(|b| b.try_into().unwrap())
                .ok_or_else(|| Error::parse_byte(at as u64, "truncated model file"))
        };
        let n_e = u32::from_le_bytes(word(0)?) as usize;
        let n_l = u32::from_le_bytes(word(4)?) as usize;
        let expected = 8 + 8 * n_e * n_l + 8 * n_l + 4 * n_l;
        if bytes.len() != expected {
            return Err(Error::parse_byte(
                0,
                format!("model of {n_e}×{n_l} needs {expected} bytes, found {}", bytes.len()),
            ));
        }
        let f64_at = |at: usize| f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        let weights: Vec<f64> = (0..n_e * n_l).map(|k| f64_at(8 + 8 * k)).collect();
        let base = 8 + 8 * n_e * n_l;
        let thresholds: Vec<f64> = (0..n_l).map(|k| f64_at(base + 8 * k)).collect();
        let base = base + 8 * n_l;
        let labels: Vec<u32> = (0..n_l)
            .map(|k| u32::from_le_bytes(bytes[base + 4 * k..base + 4 * k + 4].try_into().unwrap()))
            .collect();
        if let Some(l) = labels.iter().find(|&&l| l as usize >= class_count) {
            return Err(Error::ClassMismatch {
                model: *l as usize + 1,
                data: class_count,
            });
        }
        let network = Network::from_parts(params, n_e, weights, thresholds)?;
        Ok(Self {
            network,
            silent: vec![false; labels.len()],
            labels,
            class_count,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>, params: SnnParams, class_count: usize) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, params, class_count)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub per_class_accuracy: Vec<Option<f64>>,
    pub no_response: usize,
}

impl EvalReport {
    pub fn from_pairs(class_count: usize, pairs: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut confusion = vec![vec![0u64; class_count]; class_count];
        for (truth, predicted) in pairs {
            confusion[truth as usize][predicted as usize] += 1;
        }
        let total: u64 = confusion.iter().flatten().sum();
        let correct: u64 = (0..class_count).map(|c| confusion[c][c]).sum();
        let per_class_accuracy = confusion
            .iter()
            .enumerate()
            .map(|(c, row)| {
                let n: u64 = row.iter().sum();
                (n > 0).then(|| row[c] as f64 / n as f64)
            })
            .collect();
        Self {
            accuracy: if total > 0 { correct as f64 / total as f64 } else { 0.0 },
            confusion,
            per_class_accuracy,
            no_response: 0,
        }
    }

    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }

    /// Confusion matrix as CSV: header `true\predicted,0,1,…`, one row per
    /// true class.
    pub fn confusion_csv(&self) -> String {
        let n = self.confusion.len();
        let mut out = String::from("true\\predicted");
        for c in 0..n {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
        for (c, row) in self.confusion.iter().enumerate() {
            out.push_str(&c.to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Scores every recording: spike counts are summed over a recording's
/// segments before the per-class averaging.
pub fn evaluate(model: &Model, data: &Dataset) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::InvalidInput("test set is empty".into()));
    }
    if data.class_count != model.class_count {
        return Err(Error::ClassMismatch {
            model: model.class_count,
            data: data.class_count,
        });
    }
    let responses: Vec<Vec<u32>> = data
        .items
        .par_iter()
        .map(|item| {
            model
                .network
                .respond(&item.pattern, item.pattern.t_w, false)
                .map(|r| r.counts)
        })
        .collect::<Result<_>>()?;

    let mut recordings: Vec<(usize, u32, Vec<u64>)> = Vec::new();
    for (item, counts) in data.items.iter().zip(&responses) {
        let slot = match recordings.iter().position(|r| r.0 == item.recording) {
            Some(p) => p,
            None => {
                recordings.push((item.recording, item.label, vec![0; counts.len()]));
                recordings.len() - 1
            }
        };
        for (sum, &c) in recordings[slot].2.iter_mut().zip(counts) {
            *sum += c as u64;
        }
    }
    let predictions: Vec<(u32, Prediction)> = recordings
        .iter()
        .map(|(_, label, counts)| (*label, model.classify_counts(counts)))
        .collect();
    let mut report = EvalReport::from_pairs(
        model.class_count,
        predictions.iter().map(|(t, p)| (*t, p.class)),
    );
    report.no_response = predictions.iter().filter(|(_, p)| p.no_response).count();
    Ok(report)
}
