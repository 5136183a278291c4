//! Run configuration: a flat `key=value` text format with `#` comments.
//! Values resolve as defaults, then a config file, then command-line
//! overrides; the last assignment of a key wins.
//!
//! Seeds that are not set explicitly (`snn.seed`, `train.shuffle_seed`,
//! `synth.seed`, `split.seed`) are derived from the global `seed` when the
//! configuration is finalized, so a serialized configuration always carries
//! every seed it used.

use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::{CodingKind, Fusion, GaborParams};
use crate::recognition::TrainConfig;
use crate::seed::{derive_seed, stage};
use crate::segmentation::MsdConfig;
use crate::snn::SnnParams;

/// Parameters of the synthetic three-class dataset (bar, disc, corner).
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub per_class: usize,
    pub width: u16,
    pub height: u16,
    pub duration_ms: f64,
    /// Contour size in pixels: bar length, corner arm span and disc
    /// diameter before `disc_scale`.
    pub size: f64,
    /// Disc diameter as a fraction of `size`.
    pub disc_scale: f64,
    /// Contour events per millisecond.
    pub event_rate: f64,
    pub noise_rate: f64,
    /// Downward drift, pixels per millisecond.
    pub speed: f64,
    /// Uniform start-position jitter, ± pixels.
    pub jitter_px: f64,
    /// Uniform orientation jitter, ± degrees.
    pub angle_jitter_deg: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            per_class: 40,
            width: 32,
            height: 32,
            duration_ms: 50.0,
            size: 16.0,
            disc_scale: 0.5,
            event_rate: 8.0,
            noise_rate: 0.0,
            speed: 0.08,
            jitter_px: 2.0,
            angle_jitter_deg: 10.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitConfig {
    /// Share of each class used for training.
    pub fraction: f64,
    pub runs: usize,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            fraction: 0.9,
            runs: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub entropy_bin_ms: f64,
    pub hist_bin: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            entropy_bin_ms: 20.0,
            hist_bin: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathConfig {
    pub data: PathBuf,
    pub model: PathBuf,
    pub report: PathBuf,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            data: PathBuf::from("data"),
            model: PathBuf::from("model.bin"),
            report: PathBuf::from("report"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub msd: MsdConfig,
    pub gabor: GaborParams,
    pub tau_leak_ms: f64,
    pub coding_kind: CodingKind,
    pub t_w_ms: f64,
    pub r_min: f64,
    pub fusion: Fusion,
    pub snn: SnnParams,
    pub train: TrainConfig,
    pub split: SplitConfig,
    pub synth: SynthConfig,
    pub analysis: AnalysisConfig,
    pub paths: PathConfig,
    explicit_seeds: [bool; 4],
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            msd: MsdConfig::default(),
            gabor: GaborParams::default(),
            tau_leak_ms: 50.0,
            coding_kind: CodingKind::Log,
            t_w_ms: 500.0,
            r_min: 0.2,
            fusion: Fusion::Multiscale,
            snn: SnnParams::default(),
            train: TrainConfig::default(),
            split: SplitConfig::default(),
            synth: SynthConfig::default(),
            analysis: AnalysisConfig::default(),
            paths: PathConfig::default(),
            explicit_seeds: [false; 4],
        }
    }
}

const SNN_SEED: usize = 0;
const SHUFFLE_SEED: usize = 1;
const SYNTH_SEED: usize = 2;
const SPLIT_SEED: usize = 3;

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| scalar(key, v)).collect()
}

fn join<T: Display>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Defaults, then `file` contents, then `overrides`, then seed
    /// derivation.
    pub fn resolve(file: Option<&str>, overrides: &[(String, String)]) -> Result<Self> {
        let mut config = Self::default();
        if let Some(text) = file {
            config.apply_text(text)?;
        }
        for (k, v) in overrides {
            config.set(k, v)?;
        }
        config.finalize()?;
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got {raw:?}", n + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Assigns one key. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = scalar(key, value)?,
            "msd.tau_ms" => self.msd.tau_ms = scalar(key, value)?,
            "msd.threshold" => self.msd.threshold = scalar(key, value)?,
            "msd.confirm_window" => self.msd.confirm_window = scalar(key, value)?,
            "msd.flush_tail" => self.msd.flush_tail = scalar(key, value)?,
            "msd.max_segment_ms" => self.msd.max_segment_ms = scalar(key, value)?,
            "msd.sample_ms" => self.msd.sample_ms = scalar(key, value)?,
            "msd.drop_ratio" => self.msd.drop_ratio = scalar(key, value)?,
            "gabor.scales" => self.gabor.scales = list(key, value)?,
            "gabor.sigmas" => self.gabor.sigmas = list(key, value)?,
            "gabor.lambdas" => self.gabor.lambdas = list(key, value)?,
            "gabor.orientations_deg" => self.gabor.orientations_deg = list(key, value)?,
            "gabor.gamma" => self.gabor.gamma = scalar(key, value)?,
            "feature.tau_leak_ms" => self.tau_leak_ms = scalar(key, value)?,
            "coding.kind" => self.coding_kind = scalar(key, value)?,
            "coding.t_w_ms" => self.t_w_ms = scalar(key, value)?,
            "coding.r_min" => self.r_min = scalar(key, value)?,
            "fusion.mode" => self.fusion = scalar(key, value)?,
            "snn.v_rest" => self.snn.v_rest = scalar(key, value)?,
            "snn.v_reset" => self.snn.v_reset = scalar(key, value)?,
            "snn.e_exc" => self.snn.e_exc = scalar(key, value)?,
            "snn.e_inh" => self.snn.e_inh = scalar(key, value)?,
            "snn.tau_m" => self.snn.tau_m = scalar(key, value)?,
            "snn.tau_ge" => self.snn.tau_ge = scalar(key, value)?,
            "snn.tau_gi" => self.snn.tau_gi = scalar(key, value)?,
            "snn.tau_thr" => self.snn.tau_thr = scalar(key, value)?,
            "snn.tau_apre" => self.snn.stdp.tau_apre = scalar(key, value)?,
            "snn.tau_apost" => self.snn.stdp.tau_apost = scalar(key, value)?,
            "snn.tau_apost2" => self.snn.stdp.tau_apost2 = scalar(key, value)?,
            "snn.v_t" => self.snn.v_t = scalar(key, value)?,
            "snn.v_plus" => self.snn.v_plus = scalar(key, value)?,
            "snn.a_plus" => self.snn.stdp.a_plus = scalar(key, value)?,
            "snn.a_minus" => self.snn.stdp.a_minus = scalar(key, value)?,
            "snn.w_inh" => self.snn.w_inh = scalar(key, value)?,
            "snn.t_d_ms" => self.snn.t_d_ms = scalar(key, value)?,
            "snn.n_learning" => self.snn.n_learning = scalar(key, value)?,
            "snn.norm_L" => self.snn.norm_l = scalar(key, value)?,
            "snn.dt_ms" => self.snn.dt_ms = scalar(key, value)?,
            "snn.seed" => {
                self.snn.seed = scalar(key, value)?;
                self.explicit_seeds[SNN_SEED] = true;
            }
            "train.epochs" => self.train.epochs = scalar(key, value)?,
            "train.shuffle_seed" => {
                self.train.shuffle_seed = scalar(key, value)?;
                self.explicit_seeds[SHUFFLE_SEED] = true;
            }
            "split.fraction" => self.split.fraction = scalar(key, value)?,
            "split.runs" => self.split.runs = scalar(key, value)?,
            "split.seed" => {
                self.split.seed = scalar(key, value)?;
                self.explicit_seeds[SPLIT_SEED] = true;
            }
            "synth.per_class" => self.synth.per_class = scalar(key, value)?,
            "synth.width" => self.synth.width = scalar(key, value)?,
            "synth.height" => self.synth.height = scalar(key, value)?,
            "synth.duration_ms" => self.synth.duration_ms = scalar(key, value)?,
            "synth.size" => self.synth.size = scalar(key, value)?,
            "synth.disc_scale" => self.synth.disc_scale = scalar(key, value)?,
            "synth.event_rate" => self.synth.event_rate = scalar(key, value)?,
            "synth.noise_rate" => self.synth.noise_rate = scalar(key, value)?,
            "synth.speed" => self.synth.speed = scalar(key, value)?,
            "synth.jitter_px" => self.synth.jitter_px = scalar(key, value)?,
            "synth.angle_jitter_deg" => self.synth.angle_jitter_deg = scalar(key, value)?,
            "synth.seed" => {
                self.synth.seed = scalar(key, value)?;
                self.explicit_seeds[SYNTH_SEED] = true;
            }
            "analysis.entropy_bin_ms" => self.analysis.entropy_bin_ms = scalar(key, value)?,
            "analysis.hist_bin" => self.analysis.hist_bin = scalar(key, value)?,
            "paths.data" => self.paths.data = PathBuf::from(value),
            "paths.model" => self.paths.model = PathBuf::from(value),
            "paths.report" => self.paths.report = PathBuf::from(value),
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Derives unset seeds from the global seed and validates every section.
    pub fn finalize(&mut self) -> Result<()> {
        let derived = [
            (SNN_SEED, stage::WEIGHTS),
            (SHUFFLE_SEED, stage::SHUFFLE),
            (SYNTH_SEED, stage::SYNTH),
            (SPLIT_SEED, stage::SPLIT),
        ];
        for (slot, st) in derived {
            if !self.explicit_seeds[slot] {
                let s = derive_seed(self.seed, st);
                match slot {
                    SNN_SEED => self.snn.seed = s,
                    SHUFFLE_SEED => self.train.shuffle_seed = s,
                    SYNTH_SEED => self.synth.seed = s,
                    _ => self.split.seed = s,
                }
            }
        }
        self.explicit_seeds = [true; 4];
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.msd.validate()?;
        self.gabor.validate()?;
        self.snn.validate()?;
        if !(self.tau_leak_ms > 0.0) {
            return Err(Error::Config("feature.tau_leak_ms must be > 0".into()));
        }
        if !(self.t_w_ms > 0.0) || !(self.r_min > 0.0) {
            return Err(Error::Config("coding.t_w_ms and coding.r_min must be > 0".into()));
        }
        if !(self.split.fraction > 0.0 && self.split.fraction < 1.0) || self.split.runs == 0 {
            return Err(Error::Config("split.fraction must lie in (0, 1) and split.runs ≥ 1".into()));
        }
        if self.train.epochs == 0 {
            return Err(Error::Config("train.epochs must be ≥ 1".into()));
        }
        if !(self.analysis.entropy_bin_ms > 0.0) || !(self.analysis.hist_bin > 0.0) {
            return Err(Error::Config("analysis bin widths must be > 0".into()));
        }
        Ok(())
    }

    /// Every key with its current value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let s = &self.snn;
        vec![
            ("seed", self.seed.to_string()),
            ("msd.tau_ms", self.msd.tau_ms.to_string()),
            ("msd.threshold", self.msd.threshold.to_string()),
            ("msd.confirm_window", self.msd.confirm_window.to_string()),
            ("msd.flush_tail", self.msd.flush_tail.to_string()),
            ("msd.max_segment_ms", self.msd.max_segment_ms.to_string()),
            ("msd.sample_ms", self.msd.sample_ms.to_string()),
            ("msd.drop_ratio", self.msd.drop_ratio.to_string()),
            ("gabor.scales", join(&self.gabor.scales)),
            ("gabor.sigmas", join(&self.gabor.sigmas)),
            ("gabor.lambdas", join(&self.gabor.lambdas)),
            ("gabor.orientations_deg", join(&self.gabor.orientations_deg)),
            ("gabor.gamma", self.gabor.gamma.to_string()),
            ("feature.tau_leak_ms", self.tau_leak_ms.to_string()),
            ("coding.kind", self.coding_kind.to_string()),
            ("coding.t_w_ms", self.t_w_ms.to_string()),
            ("coding.r_min", self.r_min.to_string()),
            ("fusion.mode", self.fusion.to_string()),
            ("snn.v_rest", s.v_rest.to_string()),
            ("snn.v_reset", s.v_reset.to_string()),
            ("snn.e_exc", s.e_exc.to_string()),
            ("snn.e_inh", s.e_inh.to_string()),
            ("snn.tau_m", s.tau_m.to_string()),
            ("snn.tau_ge", s.tau_ge.to_string()),
            ("snn.tau_gi", s.tau_gi.to_string()),
            ("snn.tau_thr", s.tau_thr.to_string()),
            ("snn.tau_apre", s.stdp.tau_apre.to_string()),
            ("snn.tau_apost", s.stdp.tau_apost.to_string()),
            ("snn.tau_apost2", s.stdp.tau_apost2.to_string()),
            ("snn.v_t", s.v_t.to_string()),
            ("snn.v_plus", s.v_plus.to_string()),
            ("snn.a_plus", s.stdp.a_plus.to_string()),
            ("snn.a_minus", s.stdp.a_minus.to_string()),
            ("snn.w_inh", s.w_inh.to_string()),
            ("snn.t_d_ms", s.t_d_ms.to_string()),
            ("snn.n_learning", s.n_learning.to_string()),
            ("snn.norm_L", s.norm_l.to_string()),
            ("snn.dt_ms", s.dt_ms.to_string()),
            ("snn.seed", s.seed.to_string()),
            ("train.epochs", self.train.epochs.to_string()),
            ("train.shuffle_seed", self.train.shuffle_seed.to_string()),
            ("split.fraction", self.split.fraction.to_string()),
            ("split.runs", self.split.runs.to_string()),
            ("split.seed", self.split.seed.to_string()),
            ("synth.per_class", self.synth.per_class.to_string()),
            ("synth.width", self.synth.width.to_string()),
            ("synth.height", self.synth.height.to_string()),
            ("synth.duration_ms", self.synth.duration_ms.to_string()),
            ("synth.size", self.synth.size.to_string()),
            ("synth.disc_scale", self.synth.disc_scale.to_string()),
            ("synth.event_rate", self.synth.event_rate.to_string()),
            ("synth.noise_rate", self.synth.noise_rate.to_string()),
            ("synth.speed", self.synth.speed.to_string()),
            ("synth.jitter_px", self.synth.jitter_px.to_string()),
            ("synth.angle_jitter_deg", self.synth.angle_jitter_deg.to_string()),
            ("synth.seed", self.synth.seed.to_string()),
            ("analysis.entropy_bin_ms", self.analysis.entropy_bin_ms.to_string()),
            ("analysis.hist_bin", self.analysis.hist_bin.to_string()),
            ("paths.data", self.paths.data.display().to_string()),
            ("paths.model", self.paths.model.display().to_string()),
            ("paths.report", self.paths.report.display().to_string()),
        ]
    }

    /// Serialized form; parsing it back with [`RunConfig::resolve`] gives an
    /// equal configuration.
    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(p: &[(&str, &str)]) -> Vec<(String, String)> {
        p.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_validate() {
        let c = RunConfig::resolve(None, &[]).unwrap();
        assert_eq!(c.snn.seed, derive_seed(0, stage::WEIGHTS));
        assert_eq!(c.gabor.scales, vec![3, 5, 7, 9]);
    }

    #[test]
    fn flags_override_file() {
        let file = "# comment\nseed = 5\nsnn.n_learning=10 # trailing\n\n";
        let c = RunConfig::resolve(Some(file), &pairs(&[("snn.n_learning", "12")])).unwrap();
        assert_eq!((c.seed, c.snn.n_learning), (5, 12));
        assert_eq!(c.train.shuffle_seed, derive_seed(5, stage::SHUFFLE));
    }

    #[test]
    fn explicit_seed_is_kept() {
        let c = RunConfig::resolve(Some("snn.seed=7\nseed=3"), &[]).unwrap();
        assert_eq!(c.snn.seed, 7);
        assert_eq!(c.synth.seed, derive_seed(3, stage::SYNTH));
    }

    #[test]
    fn text_round_trip() {
        let c = RunConfig::resolve(
            Some("seed=99\ncoding.kind=linear\nfusion.mode=full\ngabor.gamma=0.1\nfeature.tau_leak_ms=33.3"),
            &[],
        )
        .unwrap();
        let replay = RunConfig::resolve(Some(&c.to_text()), &[]).unwrap();
        assert_eq!(c, replay);
        assert_eq!(c.to_text(), replay.to_text());
    }

    #[test]
    fn every_entry_is_settable() {
        let c = RunConfig::default();
        let mut d = RunConfig::default();
        for (k, v) in c.entries() {
            d.set(k, &v).unwrap();
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::resolve(Some("nokey"), &[]).is_err());
        assert!(RunConfig::resolve(Some("snn.bogus=1"), &[]).is_err());
        assert!(RunConfig::resolve(Some("snn.tau_m=abc"), &[]).is_err());
        assert!(RunConfig::resolve(Some("gabor.sigmas=1,2"), &[]).is_err());
        let e = RunConfig::resolve(Some("split.fraction=1.5"), &[]).unwrap_err();
        assert_eq!(e.exit_code(), 1);
    }
}
