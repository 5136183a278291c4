//! Motion symbol detection: a leaky integrator driven by event arrivals and
//! a peak detector on its potential. Every confirmed peak flushes the queued
//! events up to the peak time as one [`Segment`].
//!
//! The potential is sampled at every event. While a peak candidate is
//! pending, silent gaps are additionally sampled every `sample_ms` so that a
//! burst followed by silence is confirmed as soon as the next event arrives.
//! A candidate is the largest sample ≥ `threshold` since the last flush; it
//! is confirmed once the last `confirm_window` samples decreased strictly and
//! the potential has fallen to `drop_ratio` × peak or below.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::event_io::{Event, EventStream};

#[derive(Debug, Clone, PartialEq)]
pub struct MsdConfig {
    pub tau_ms: f64,
    pub threshold: f64,
    pub confirm_window: usize,
    pub flush_tail: bool,
    pub max_segment_ms: f64,
    pub sample_ms: f64,
    pub drop_ratio: f64,
}

impl Default for MsdConfig {
    fn default() -> Self {
        Self {
            tau_ms: 20.0,
            threshold: 30.0,
            confirm_window: 3,
            flush_tail: true,
            max_segment_ms: 2000.0,
            sample_ms: 1.0,
            drop_ratio: 0.5,
        }
    }
}

impl MsdConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tau_ms > 0.0
            && self.threshold >= 0.0
            && self.confirm_window >= 1
            && self.max_segment_ms > 0.0
            && self.sample_ms > 0.0
            && self.drop_ratio > 0.0
            && self.drop_ratio <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid msd configuration {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub events: Vec<Event>,
    pub t_start_us: u32,
    pub t_end_us: u32,
}

impl Segment {
    fn from_events(events: Vec<Event>) -> Self {
        debug_assert!(!events.is_empty());
        Self {
            t_start_us: events[0].t_us,
            t_end_us: events[events.len() - 1].t_us,
            events,
        }
    }

    pub fn t_end_ms(&self) -> f64 {
        self.t_end_us as f64 / 1000.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Peak {
    t_us: u32,
    value: f64,
}

#[derive(Debug, Clone)]
pub struct MsdState {
    config: MsdConfig,
    potential: f64,
    /// Time (ms) at which `potential` was last evaluated.
    potential_ms: f64,
    last_event_ms: Option<f64>,
    recent: VecDeque<(f64, f64)>,
    queue: VecDeque<Event>,
    candidate: Option<Peak>,
    peaks_us: Vec<u32>,
}

impl MsdState {
    pub fn new(config: MsdConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            recent: VecDeque::with_capacity(config.confirm_window + 1),
            config,
            potential: 0.0,
            potential_ms: 0.0,
            last_event_ms: None,
            queue: VecDeque::new(),
            candidate: None,
            peaks_us: Vec::new(),
        })
    }

    pub fn potential(&self) -> f64 {
        self.potential
    }

    pub fn queued(&self) -> usize {
        self.queue.len()
    }

    /// Confirmed peak times so far, in microseconds.
    pub fn peaks_us(&self) -> &[u32] {
        &self.peaks_us
    }

    /// Recent `(time_ms, potential)` samples, oldest first.
    pub fn recent_samples(&self) -> impl Iterator<Item = &(f64, f64)> {
        self.recent.iter()
    }

    fn decayed(&self, t_ms: f64) -> f64 {
        self.potential * (-(t_ms - self.potential_ms) / self.config.tau_ms).exp()
    }

    fn reset_integrator(&mut self, t_ms: f64) {
        self.potential = 0.0;
        self.potential_ms = t_ms;
        self.candidate = None;
        self.recent.clear();
    }

    /// Records a sample and returns the confirmed peak, if any.
    fn sample(&mut self, t_ms: f64, value: f64, event_t_us: Option<u32>) -> Option<Peak> {
        if self.recent.len() == self.config.confirm_window + 1 {
            self.recent.pop_front();
        }
        self.recent.push_back((t_ms, value));

        match (self.candidate, event_t_us) {
            (None, Some(t_us)) if value >= self.config.threshold => {
                self.candidate = Some(Peak { t_us, value });
                return None;
            }
            (Some(peak), Some(t_us)) if value > peak.value => {
                self.candidate = Some(Peak { t_us, value });
                return None;
            }
            _ => {}
        }
        let peak = self.candidate?;
        let w = self.config.confirm_window;
        if self.recent.len() < w + 1 {
            return None;
        }
        let falling = self
            .recent
            .iter()
            .zip(self.recent.iter().skip(1))
            .all(|(a, b)| b.1 < a.1);
        if falling && value <= self.config.drop_ratio * peak.value {
            Some(peak)
        } else {
            None
        }
    }

    fn flush_through(&mut self, t_us: u32) -> Option<Segment> {
        let mut events = Vec::new();
        while let Some(e) = self.queue.front() {
            if e.t_us > t_us {
                break;
            }
            events.push(self.queue.pop_front().unwrap());
        }
        (!events.is_empty()).then(|| Segment::from_events(events))
    }

    fn flush_all(&mut self) -> Option<Segment> {
        let events: Vec<Event> = self.queue.drain(..).collect();
        (!events.is_empty()).then(|| Segment::from_events(events))
    }

    fn confirm(&mut self, peak: Peak, t_ms: f64, out: &mut Vec<Segment>) {
        self.peaks_us.push(peak.t_us);
        out.extend(self.flush_through(peak.t_us));
        self.reset_integrator(t_ms);
    }

    /// Integrates one event. Segments completed by this event (a confirmed
    /// peak or a forced flush) are appended to `out`.
    pub fn update(&mut self, event: Event, out: &mut Vec<Segment>) -> Result<()> {
        let t_ms = event.t_ms();
        if let Some(previous) = self.last_event_ms {
            if t_ms < previous {
                return Err(Error::TimeRegression { previous, t: t_ms });
            }
        }

        // Sample the silent gap while a peak is waiting for confirmation.
        if let Some(last) = self.last_event_ms {
            let mut tv = last + self.config.sample_ms;
            while self.candidate.is_some() && tv < t_ms {
                let value = self.decayed(tv);
                if let Some(peak) = self.sample(tv, value, None) {
                    self.confirm(peak, tv, out);
                    break;
                }
                tv += self.config.sample_ms;
            }
        }

        if let Some(front) = self.queue.front() {
            if t_ms - front.t_ms() > self.config.max_segment_ms {
                out.extend(self.flush_all());
                self.reset_integrator(t_ms);
            }
        }

        self.potential = self.decayed(t_ms) + 1.0;
        self.potential_ms = t_ms;
        self.last_event_ms = Some(t_ms);
        self.queue.push_back(event);
        if let Some(peak) = self.sample(t_ms, self.potential, Some(event.t_us)) {
            self.confirm(peak, t_ms, out);
        }
        Ok(())
    }

    /// Ends the stream: the remaining queue becomes a final segment when
    /// `flush_tail` is set and is dropped otherwise.
    pub fn finish(mut self) -> Option<Segment> {
        if self.config.flush_tail {
            self.flush_all()
        } else {
            None
        }
    }
}

pub fn segment_stream(stream: &EventStream, config: &MsdConfig) -> Result<Vec<Segment>> {
    let mut state = MsdState::new(config.clone())?;
    let mut out = Vec::new();
    for &event in &stream.events {
        state.update(event, &mut out)?;
    }
    out.extend(state.finish());
    Ok(out)
}

/// Debug partitioning into consecutive windows of `window_ms`.
pub fn slice_fixed_time(stream: &EventStream, window_ms: f64) -> Vec<Segment> {
    let window_us = (window_ms * 1000.0).max(1.0) as u64;
    let mut out: Vec<Segment> = Vec::new();
    let mut current: Vec<Event> = Vec::new();
    let mut bucket = None;
    for &e in &stream.events {
        let b = e.t_us as u64 / window_us;
        if bucket.is_some_and(|cur| cur != b) && !current.is_empty() {
            out.push(Segment::from_events(std::mem::take(&mut current)));
        }
        bucket = Some(b);
        current.push(e);
    }
    if !current.is_empty() {
        out.push(Segment::from_events(current));
    }
    out
}

/// Debug partitioning into runs of `count` events.
pub fn slice_fixed_count(stream: &EventStream, count: usize) -> Vec<Segment> {
    stream
        .events
        .chunks(count.max(1))
        .map(|c| Segment::from_events(c.to_vec()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_io::SensorGeometry;
    use proptest::prelude::*;

    fn ev(t_us: u32) -> Event {
        Event::new(t_us, 0, 0, 0)
    }

    fn stream(times: impl IntoIterator<Item = u32>) -> EventStream {
        EventStream::new(SensorGeometry::new(4, 4), times.into_iter().map(ev).collect())
    }

    fn burst(start_us: u32, n: u32, span_us: u32) -> impl Iterator<Item = u32> {
        (0..n).map(move |i| start_us + i * span_us / n)
    }

    #[test]
    fn first_event_sets_unit_potential() {
        let mut s = MsdState::new(MsdConfig::default()).unwrap();
        let mut out = Vec::new();
        s.update(ev(0), &mut out).unwrap();
        assert_eq!(s.potential(), 1.0);
    }

    #[test]
    fn one_time_constant_of_decay() {
        let mut s = MsdState::new(MsdConfig::default()).unwrap();
        let mut out = Vec::new();
        s.update(ev(0), &mut out).unwrap();
        s.update(ev(20_000), &mut out).unwrap();
        assert!((s.potential() - (1.0 + (-1.0f64).exp())).abs() < 1e-12);
        assert!((s.potential() - 1.3679).abs() < 1e-4);
    }

    #[test]
    fn fixed_rate_converges_to_geometric_limit() {
        let config = MsdConfig {
            threshold: f64::INFINITY,
            ..MsdConfig::default()
        };
        let mut s = MsdState::new(config).unwrap();
        let mut out = Vec::new();
        let dt_ms = 0.5;
        for i in 0..1000 {
            s.update(ev(i * 500), &mut out).unwrap();
        }
        let limit = 1.0 / (1.0 - (-dt_ms / 20.0f64).exp());
        // After 1000 events the residual is limit·r^1000 with r = e^-0.025.
        let expected = limit * (1.0 - (-dt_ms / 20.0f64).exp().powi(1000));
        assert!((s.potential() - expected).abs() < 1e-9 * limit);
        assert!((s.potential() - limit).abs() < 1e-9 * limit);
    }

    #[test]
    fn time_regression_is_error() {
        let mut s = MsdState::new(MsdConfig::default()).unwrap();
        let mut out = Vec::new();
        s.update(ev(10), &mut out).unwrap();
        assert!(matches!(s.update(ev(9), &mut out), Err(Error::TimeRegression { .. })));
    }

    #[test]
    fn empty_stream_no_segments() {
        assert!(segment_stream(&stream([]), &MsdConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn single_burst_one_segment() {
        let s = stream(burst(0, 500, 5_000));
        let segs = segment_stream(&s, &MsdConfig::default()).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].events.len(), 500);
    }

    #[test]
    fn two_bursts_split_at_gap() {
        // Gap of 100 ms = 5 τ.
        let times: Vec<u32> = burst(0, 500, 5_000).chain(burst(105_000, 500, 5_000)).collect();
        let s = stream(times);
        let segs = segment_stream(&s, &MsdConfig::default()).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].events.len(), 500);
        assert_eq!(segs[1].events.len(), 500);
        assert!(segs[0].t_end_us < 5_000 && segs[1].t_start_us >= 105_000);
    }

    #[test]
    fn tail_dropped_without_flush_tail() {
        let config = MsdConfig {
            flush_tail: false,
            ..MsdConfig::default()
        };
        let times: Vec<u32> = burst(0, 500, 5_000).chain(burst(105_000, 500, 5_000)).collect();
        let segs = segment_stream(&stream(times), &config).unwrap();
        assert_eq!(segs.len(), 1);
    }

    #[test]
    fn max_duration_forces_flush() {
        let config = MsdConfig {
            threshold: f64::INFINITY,
            max_segment_ms: 10.0,
            ..MsdConfig::default()
        };
        let segs = segment_stream(&stream((0..100).map(|i| i * 1_000)), &config).unwrap();
        assert!(segs.len() >= 9);
        for s in &segs {
            assert!(s.t_end_us - s.t_start_us <= 10_000);
        }
    }

    #[test]
    fn fixed_slices_partition() {
        let s = stream((0..100).map(|i| i * 1_000));
        let a = slice_fixed_time(&s, 10.0);
        assert_eq!(a.len(), 10);
        let b = slice_fixed_count(&s, 30);
        assert_eq!(b.iter().map(|x| x.events.len()).collect::<Vec<_>>(), vec![30, 30, 30, 10]);
    }

    fn bursty_times(gaps: &[(u32, u32)]) -> Vec<u32> {
        let mut t = 0u32;
        let mut out = Vec::new();
        for &(n, gap) in gaps {
            for _ in 0..n {
                t += 37;
                out.push(t);
            }
            t += gap;
        }
        out
    }

    proptest! {
        #[test]
        fn segments_partition_a_prefix(
            gaps in proptest::collection::vec((1u32..200, 0u32..150_000), 1..8),
            flush_tail in any::<bool>(),
        ) {
            let times = bursty_times(&gaps);
            let s = stream(times.clone());
            let config = MsdConfig { flush_tail, ..MsdConfig::default() };
            let segs = segment_stream(&s, &config).unwrap();
            let flat: Vec<Event> = segs.iter().flat_map(|g| g.events.iter().copied()).collect();
            prop_assert_eq!(&flat[..], &s.events[..flat.len()]);
            if flush_tail {
                prop_assert_eq!(flat.len(), s.events.len());
            }
            for g in &segs {
                prop_assert!(!g.events.is_empty());
                prop_assert!(g.events.iter().all(|e| e.t_us >= g.t_start_us && e.t_us <= g.t_end_us));
            }
        }

        #[test]
        fn peaks_strictly_increase(gaps in proptest::collection::vec((1u32..200, 0u32..150_000), 1..8)) {
            let s = stream(bursty_times(&gaps));
            let mut state = MsdState::new(MsdConfig::default()).unwrap();
            let mut out = Vec::new();
            for &e in &s.events {
                state.update(e, &mut out).unwrap();
            }
            prop_assert!(state.peaks_us().windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn pure_counter_first_segment_has_threshold_events(k in 1u32..60, n in 1u32..300) {
            let config = MsdConfig {
                tau_ms: f64::INFINITY,
                threshold: k as f64,
                flush_tail: false,
                ..MsdConfig::default()
            };
            let segs = segment_stream(&stream(bursty_times(&[(n, 0)])), &config).unwrap();
            if let Some(first) = segs.first() {
                prop_assert!(first.events.len() >= k as usize);
            }
        }
    }
}
