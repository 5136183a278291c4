//! Diagnostics: spike-timing entropy, response histograms and Pearson
//! correlations between C1 maps of different scales or orientations.

use crate::error::{Error, Result};
use crate::features::C1Maps;

/// Fixed-width histogram starting at `lower`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lower: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn empty(bin_width: f64) -> Self {
        Self {
            lower: 0.0,
            bin_width,
            counts: Vec::new(),
            total: 0,
        }
    }

    /// Proportion of the total in each bin.
    pub fn densities(&self) -> Vec<f64> {
        let total = self.total.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }

    pub fn bin_lower(&self, k: usize) -> f64 {
        self.lower + k as f64 * self.bin_width
    }

    /// `bin_lo,density` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,density\n");
        for (k, d) in self.densities().iter().enumerate() {
            out.push_str(&format!("{},{}\n", self.bin_lower(k), d));
        }
        out
    }
}

/// Bin index of `value` on a grid of `width` starting at 0. The small
/// epsilon keeps values that are exact multiples of `width` (such as 0.3 with
/// width 0.1) out of the bin below.
fn bin_of(value: f64, width: f64) -> i64 {
    (value / width + 1e-9).floor() as i64
}

/// Shannon entropy in bits of the spike-time distribution over bins of
/// `bin_ms` covering `[0, t_w]`. A spike at exactly `t_w` falls in the last
/// bin.
pub fn spike_entropy(times: impl IntoIterator<Item = f64>, bin_ms: f64, t_w: f64) -> Result<f64> {
    if !(bin_ms > 0.0) || !(t_w > 0.0) {
        return Err(Error::InvalidInput("entropy needs bin_ms > 0 and t_w > 0".into()));
    }
    let n_bins = (t_w / bin_ms - 1e-9).ceil().max(1.0) as usize;
    let mut counts = vec![0u64; n_bins];
    let mut total = 0u64;
    for t in times {
        if !(0.0..=t_w).contains(&t) {
            return Err(Error::InvalidInput(format!("spike time {t} outside [0, {t_w}]")));
        }
        let k = (bin_of(t, bin_ms).max(0) as usize).min(n_bins - 1);
        counts[k] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::InvalidInput("entropy of an empty spike list".into()));
    }
    Ok(entropy_bits(&counts))
}

pub fn entropy_bits(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseHistogram {
    /// Responses above `r_min`, binned on multiples of the bin width.
    pub histogram: Histogram,
    /// Responses at or below `r_min` (treated as noise, not binned).
    pub below_r_min: u64,
    pub total: u64,
}

impl ResponseHistogram {
    pub fn below_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.below_r_min as f64 / self.total as f64
        }
    }
}

pub fn response_histogram(
    responses: impl IntoIterator<Item = f64>,
    bin_width: f64,
    r_min: f64,
) -> Result<ResponseHistogram> {
    if !(bin_width > 0.0) {
        return Err(Error::InvalidInput("bin width must be > 0".into()));
    }
    let mut bins: Vec<i64> = Vec::new();
    let mut below = 0u64;
    let mut total = 0u64;
    for r in responses.into_iter().filter(|r| r.is_finite()) {
        total += 1;
        if r <= r_min {
            below += 1;
        } else {
            bins.push(bin_of(r, bin_width));
        }
    }
    let histogram = match (bins.iter().min(), bins.iter().max()) {
        (Some(&lo), Some(&hi)) => {
            let mut counts = vec![0u64; (hi - lo + 1) as usize];
            for b in &bins {
                counts[(b - lo) as usize] += 1;
            }
            Histogram {
                lower: lo as f64 * bin_width,
                bin_width,
                counts,
                total: bins.len() as u64,
            }
        }
        _ => Histogram::empty(bin_width),
    };
    Ok(ResponseHistogram {
        histogram,
        below_r_min: below,
        total,
    })
}

/// Pearson correlation; `None` when either vector has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "pearson needs equal-length vectors");
    let n = a.len() as f64;
    if a.is_empty() {
        return None;
    }
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Mean pairwise correlation of one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcEntry {
    pub mean: Option<f64>,
    pub pairs: usize,
    /// Pairs dropped for zero variance.
    pub skipped: usize,
}

fn mean_cc(pairs: impl Iterator<Item = (usize, usize)>, c1: &C1Maps, index: impl Fn(usize) -> (usize, usize)) -> CcEntry {
    let (mut sum, mut used, mut skipped) = (0.0, 0usize, 0usize);
    for (a, b) in pairs {
        let (sa, oa) = index(a);
        let (sb, ob) = index(b);
        match pearson(c1.map(sa, oa), c1.map(sb, ob)) {
            Some(cc) => {
                sum += cc;
                used += 1;
            }
            None => skipped += 1,
        }
    }
    CcEntry {
        mean: (used > 0).then(|| sum / used as f64),
        pairs: used + skipped,
        skipped,
    }
}

/// Mean correlation over the `n_θ · C(n_s, 2)` same-orientation,
/// different-scale pairs.
pub fn scale_cc(c1: &C1Maps) -> Result<CcEntry> {
    let (ns, no) = (c1.n_scales, c1.n_orientations);
    if ns < 2 || no < 1 {
        return Err(Error::InvalidInput("scale correlation needs ≥ 2 scales".into()));
    }
    let pairs = (0..no).flat_map(move |o| {
        (0..ns).flat_map(move |s| (s + 1..ns).map(move |t| (s * no + o, t * no + o)))
    });
    Ok(mean_cc(pairs, c1, |k| (k / no, k % no)))
}

/// Mean correlation over the `n_s · C(n_θ, 2)` same-scale,
/// different-orientation pairs.
pub fn orientation_cc(c1: &C1Maps) -> Result<CcEntry> {
    let (ns, no) = (c1.n_scales, c1.n_orientations);
    if no < 2 || ns < 1 {
        return Err(Error::InvalidInput("orientation correlation needs ≥ 2 orientations".into()));
    }
    let pairs = (0..ns).flat_map(move |s| {
        (0..no).flat_map(move |o| (o + 1..no).map(move |p| (s * no + o, s * no + p)))
    });
    Ok(mean_cc(pairs, c1, |k| (k / no, k % no)))
}

/// Per-sample correlations across a dataset.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CcSummary {
    pub scale: Vec<CcEntry>,
    pub orientation: Vec<CcEntry>,
}

impl CcSummary {
    pub fn from_samples<'a>(samples: impl IntoIterator<Item = &'a C1Maps>) -> Result<Self> {
        let mut out = Self::default();
        for c1 in samples {
            out.scale.push(scale_cc(c1)?);
            out.orientation.push(orientation_cc(c1)?);
        }
        Ok(out)
    }

    fn average(entries: &[CcEntry]) -> Option<f64> {
        let vals: Vec<f64> = entries.iter().filter_map(|e| e.mean).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn mean_scale(&self) -> Option<f64> {
        Self::average(&self.scale)
    }

    pub fn mean_orientation(&self) -> Option<f64> {
        Self::average(&self.orientation)
    }

    /// `sample,scale_cc,orientation_cc` rows; empty cells for skipped samples.
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from("sample,scale_cc,orientation_cc\n");
        for (k, (s, o)) in self.scale.iter().zip(&self.orientation).enumerate() {
            out.push_str(&format!("{k},{},{}\n", fmt(s.mean), fmt(o.mean)));
        }
        out
    }
}
