use std::fmt;
use std::str::FromStr;

use super::c1::C1Maps;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodingKind {
    /// `t = u − v·ln r`, spreading skewed responses evenly over the window.
    Log,
    /// `t = t_w − (t_w / r_max)·r`, the linear baseline.
    Linear,
}

impl fmt::Display for CodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodingKind::Log => "log",
            CodingKind::Linear => "linear",
        })
    }
}

impl FromStr for CodingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "log" => Ok(CodingKind::Log),
            "linear" => Ok(CodingKind::Linear),
            other => Err(Error::Config(format!("unknown coding kind '{other}'"))),
        }
    }
}

/// How feature spikes are grouped onto encoding-neuron addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fusion {
    /// One neuron per (orientation, x, y); carries every scale.
    Multiscale,
    /// One neuron per (scale, x, y); carries every orientation.
    MultiOrientation,
    /// One neuron per (scale, orientation, x, y).
    None,
    /// One neuron per (x, y).
    Full,
}

impl Fusion {
    pub const ALL: [Fusion; 4] = [
        Fusion::Multiscale,
        Fusion::MultiOrientation,
        Fusion::None,
        Fusion::Full,
    ];

    pub fn n_addresses(self, n_scales: usize, n_orientations: usize, cells: usize) -> usize {
        match self {
            Fusion::Multiscale => n_orientations * cells,
            Fusion::MultiOrientation => n_scales * cells,
            Fusion::None => n_scales * n_orientations * cells,
            Fusion::Full => cells,
        }
    }

    /// Address of the C1 cell `cell` (row-major index) in map (scale, orientation).
    #[inline]
    pub fn address(self, scale: usize, orientation: usize, n_orientations: usize, cell: usize, cells: usize) -> usize {
        match self {
            Fusion::Multiscale => orientation * cells + cell,
            Fusion::MultiOrientation => scale * cells + cell,
            Fusion::None => (scale * n_orientations + orientation) * cells + cell,
            Fusion::Full => cell,
        }
    }
}

impl fmt::Display for Fusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fusion::Multiscale => "multiscale",
            Fusion::MultiOrientation => "multi_orientation",
            Fusion::None => "none",
            Fusion::Full => "full",
        })
    }
}

impl FromStr for Fusion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "multiscale" => Ok(Fusion::Multiscale),
            "multi_orientation" => Ok(Fusion::MultiOrientation),
            "none" => Ok(Fusion::None),
            "full" => Ok(Fusion::Full),
            other => Err(Error::Config(format!("unknown fusion mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodingParams {
    pub kind: CodingKind,
    pub r_min: f64,
    pub r_max: f64,
    pub t_w: f64,
    pub u: f64,
    pub v: f64,
}

impl CodingParams {
    pub fn new(kind: CodingKind, r_min: f64, r_max: f64, t_w: f64) -> Result<Self> {
        if !(r_min > 0.0) || !(t_w > 0.0) || !r_max.is_finite() {
            return Err(Error::Config(format!(
                "coding needs r_min > 0 and t_w > 0 (got r_min = {r_min}, t_w = {t_w})"
            )));
        }
        if !(r_max > r_min) {
            return Err(Error::DegenerateCoding { r_min });
        }
        let span = r_max.ln() - r_min.ln();
        Ok(Self {
            kind,
            r_min,
            r_max,
            t_w,
            u: t_w * r_max.ln() / span,
            v: t_w / span,
        })
    }

    pub fn with_kind(self, kind: CodingKind) -> Self {
        Self { kind, ..self }
    }

    /// The raw coding function, without thresholding or clamping.
    pub fn latency(&self, r: f64) -> f64 {
        match self.kind {
            CodingKind::Log => self.u - self.v * r.ln(),
            CodingKind::Linear => self.t_w - self.t_w / self.r_max * r,
        }
    }

    /// Spike time for response `r`: nothing at or below `r_min`, time 0 at or
    /// above `r_max`, otherwise the coding function clamped to `[0, t_w]`.
    pub fn spike_time(&self, r: f64) -> Option<f64> {
        if !(r > self.r_min) {
            return None;
        }
        if r >= self.r_max {
            return Some(0.0);
        }
        Some(self.latency(r).clamp(0.0, self.t_w))
    }
}

/// Fits the coding normalizers to the largest training response.
pub fn fit_coding(
    responses: impl IntoIterator<Item = f64>,
    kind: CodingKind,
    r_min: f64,
    t_w: f64,
) -> Result<CodingParams> {
    let r_max = responses
        .into_iter()
        .filter(|r| r.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !(r_max > r_min) {
        return Err(Error::DegenerateCoding { r_min });
    }
    CodingParams::new(kind, r_min, r_max, t_w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spike {
    pub address: u32,
    pub time_ms: f64,
}

/// Latency-coded feature spikes of one segment, sorted by time then address.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikePattern {
    pub spikes: Vec<Spike>,
    pub n_addresses: usize,
    pub fusion: Fusion,
    pub t_w: f64,
}

impl SpikePattern {
    pub fn empty(n_addresses: usize, fusion: Fusion, t_w: f64) -> Self {
        Self {
            spikes: Vec::new(),
            n_addresses,
            fusion,
            t_w,
        }
    }

    pub fn len(&self) -> usize {
        self.spikes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spikes.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.spikes.iter().map(|s| s.time_ms)
    }

    /// Spikes per address.
    pub fn address_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_addresses];
        for s in &self.spikes {
            counts[s.address as usize] += 1;
        }
        counts
    }
}

pub fn encode(c1: &C1Maps, params: &CodingParams, fusion: Fusion) -> SpikePattern {
    let cells = c1.cells_per_map();
    let no = c1.n_orientations;
    let mut spikes = Vec::new();
    for s in 0..c1.n_scales {
        for o in 0..no {
            for (cell, &r) in c1.map(s, o).iter().enumerate() {
                if let Some(time_ms) = params.spike_time(r) {
                    let address = fusion.address(s, o, no, cell, cells) as u32;
                    spikes.push(Spike { address, time_ms });
                }
            }
        }
    }
    spikes.sort_by(|a, b| a.time_ms.total_cmp(&b.time_ms).then(a.address.cmp(&b.address)));
    SpikePattern {
        spikes,
        n_addresses: fusion.n_addresses(c1.n_scales, no, cells),
        fusion,
        t_w: params.t_w,
    }
}
