use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::SnnParams;
use super::stdp::{depress, potentiate, trace_value};
use crate::error::{Error, Result};
use crate::features::{Spike, SpikePattern};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plasticity {
    /// STDP, adaptive thresholds and end-of-presentation normalization.
    On,
    /// Weights and thresholds are read-only.
    Off,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PresentationResult {
    pub counts: Vec<u32>,
    /// `(neuron, time_ms)` in firing order, when requested.
    pub raster: Option<Vec<(usize, f64)>>,
}

/// Membrane, conductance and trace state of one presentation.
#[derive(Debug, Clone)]
pub struct Dynamics {
    pub v: Vec<f64>,
    pub g_e: Vec<f64>,
    pub g_i: Vec<f64>,
    pub clock_ms: f64,
    pub steps: u64,
    pre_last: Vec<f64>,
    post_last: Vec<f64>,
    pending_inhibition: VecDeque<(f64, usize)>,
    counts: Vec<u32>,
    raster: Option<Vec<(usize, f64)>>,
    scratch: Vec<f64>,
}

impl Dynamics {
    fn new(n_e: usize, n_l: usize, v_rest: f64, record: bool) -> Self {
        Self {
            v: vec![v_rest; n_l],
            g_e: vec![0.0; n_l],
            g_i: vec![0.0; n_l],
            clock_ms: 0.0,
            steps: 0,
            pre_last: vec![f64::NEG_INFINITY; n_e],
            post_last: vec![f64::NEG_INFINITY; n_l],
            pending_inhibition: VecDeque::new(),
            counts: vec![0; n_l],
            raster: record.then(Vec::new),
            scratch: vec![0.0; n_l],
        }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Presynaptic trace of encoding neuron `i` at `t`.
    pub fn a_pre(&self, i: usize, t: f64, params: &SnnParams) -> f64 {
        trace_value(self.pre_last[i], t, params.stdp.tau_apre)
    }

    pub fn a_post(&self, j: usize, t: f64, params: &SnnParams) -> f64 {
        trace_value(self.post_last[j], t, params.stdp.tau_apost)
    }

    pub fn a_post2(&self, j: usize, t: f64, params: &SnnParams) -> f64 {
        trace_value(self.post_last[j], t, params.stdp.tau_apost2)
    }

    fn into_result(self) -> PresentationResult {
        PresentationResult {
            counts: self.counts,
            raster: self.raster,
        }
    }
}

/// Read/write access to the learned state during a step.
trait Synapses {
    fn row(&self, i: usize) -> &[f64];
    /// Threshold of neuron `j`, `h` ms after the current time.
    fn threshold(&self, j: usize, h: f64, params: &SnnParams) -> f64;
    fn learning(&self) -> bool;
    fn depress_row(&mut self, i: usize, t: f64, dynamics: &Dynamics, params: &SnnParams);
    fn potentiate_column(&mut self, j: usize, t: f64, dynamics: &Dynamics, params: &SnnParams);
    fn on_fire(&mut self, j: usize, params: &SnnParams);
    fn decay_thresholds(&mut self, h: f64, params: &SnnParams);
}

struct Frozen<'a> {
    weights: &'a [f64],
    thresholds: &'a [f64],
    n_l: usize,
}

impl Synapses for Frozen<'_> {
    fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n_l..(i + 1) * self.n_l]
    }
    fn threshold(&self, j: usize, _: f64, _: &SnnParams) -> f64 {
        self.thresholds[j]
    }
    fn learning(&self) -> bool {
        false
    }
    fn depress_row(&mut self, _: usize, _: f64, _: &Dynamics, _: &SnnParams) {}
    fn potentiate_column(&mut self, _: usize, _: f64, _: &Dynamics, _: &SnnParams) {}
    fn on_fire(&mut self, _: usize, _: &SnnParams) {}
    fn decay_thresholds(&mut self, _: f64, _: &SnnParams) {}
}

struct Learning<'a> {
    weights: &'a mut [f64],
    thresholds: &'a mut [f64],
    n_e: usize,
    n_l: usize,
}

impl Synapses for Learning<'_> {
    fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n_l..(i + 1) * self.n_l]
    }
    fn threshold(&self, j: usize, h: f64, params: &SnnParams) -> f64 {
        params.v_t + (self.thresholds[j] - params.v_t) * (-h / params.tau_thr).exp()
    }
    fn learning(&self) -> bool {
        true
    }
    fn depress_row(&mut self, i: usize, t: f64, dynamics: &Dynamics, params: &SnnParams) {
        let row = &mut self.weights[i * self.n_l..(i + 1) * self.n_l];
        for (j, w) in row.iter_mut().enumerate() {
            if dynamics.post_last[j] != f64::NEG_INFINITY {
                *w = depress(*w, dynamics.a_post(j, t, params), params.stdp.a_minus);
            }
        }
    }
    fn potentiate_column(&mut self, j: usize, t: f64, dynamics: &Dynamics, params: &SnnParams) {
        let a_post2 = dynamics.a_post2(j, t, params);
        if a_post2 == 0.0 {
            return;
        }
        for i in 0..self.n_e {
            if dynamics.pre_last[i] != f64::NEG_INFINITY {
                let w = &mut self.weights[i * self.n_l + j];
                *w = potentiate(*w, dynamics.a_pre(i, t, params), a_post2, params.stdp.a_plus);
            }
        }
    }
    fn on_fire(&mut self, j: usize, params: &SnnParams) {
        self.thresholds[j] += params.v_plus;
    }
    fn decay_thresholds(&mut self, h: f64, params: &SnnParams) {
        let k = (-h / params.tau_thr).exp();
        for thr in self.thresholds.iter_mut() {
            *thr = params.v_t + (*thr - params.v_t) * k;
        }
    }
}

/// Conductance decay factors over `h` and `h / 2`.
#[derive(Clone, Copy)]
struct Decay {
    e_half: f64,
    e_full: f64,
    i_half: f64,
    i_full: f64,
}

impl Decay {
    fn new(h: f64, params: &SnnParams) -> Self {
        let e_half = (-0.5 * h / params.tau_ge).exp();
        let i_half = (-0.5 * h / params.tau_gi).exp();
        Self {
            e_half,
            e_full: e_half * e_half,
            i_half,
            i_full: i_half * i_half,
        }
    }
}

/// Membrane derivative for conductances `g_e`, `g_i`.
#[inline]
fn dv(v: f64, g_e: f64, g_i: f64, p: &SnnParams) -> f64 {
    ((p.v_rest - v) + g_e * (p.e_exc - v) + g_i * (p.e_inh - v)) / p.tau_m
}

/// One classical Runge–Kutta step of length `h`; the conductances decay
/// exactly as exponentials across the step.
#[inline]
fn rk4(v: f64, g_e: f64, g_i: f64, h: f64, k: Decay, p: &SnnParams) -> f64 {
    let (ge_m, gi_m) = (g_e * k.e_half, g_i * k.i_half);
    let k1 = dv(v, g_e, g_i, p);
    let k2 = dv(v + 0.5 * h * k1, ge_m, gi_m, p);
    let k3 = dv(v + 0.5 * h * k2, ge_m, gi_m, p);
    let k4 = dv(v + h * k3, g_e * k.e_full, g_i * k.i_full, p);
    v + h / 6.0 * (k1 + 2.0 * (k2 + k3) + k4)
}

/// Earliest time in `(0, h]` at which neuron `j` crosses its threshold,
/// located by bisection on the membrane trajectory.
fn crossing<S: Synapses>(syn: &S, d: &Dynamics, j: usize, h: f64, p: &SnnParams) -> f64 {
    let above = |s: f64| rk4(d.v[j], d.g_e[j], d.g_i[j], s, Decay::new(s, p), p) > syn.threshold(j, s, p);
    let (mut lo, mut hi) = (0.0, h);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if above(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Moves every neuron forward by `h` with no input.
fn advance<S: Synapses>(syn: &mut S, d: &mut Dynamics, h: f64, p: &SnnParams) {
    if h <= 0.0 {
        return;
    }
    let k = Decay::new(h, p);
    for j in 0..d.v.len() {
        d.v[j] = rk4(d.v[j], d.g_e[j], d.g_i[j], h, k, p);
        d.g_e[j] *= k.e_full;
        d.g_i[j] *= k.i_full;
    }
    syn.decay_thresholds(h, p);
}

/// Integrates from `t` towards `t_target`, stopping at the first threshold
/// crossing. Returns the time reached and whether a crossing stopped it.
fn integrate<S: Synapses>(syn: &mut S, d: &mut Dynamics, t: f64, t_target: f64, p: &SnnParams) -> (f64, bool) {
    let h = t_target - t;
    if h <= 0.0 {
        return (t, false);
    }
    let k = Decay::new(h, p);
    for j in 0..d.v.len() {
        d.scratch[j] = rk4(d.v[j], d.g_e[j], d.g_i[j], h, k, p);
    }
    let mut first: Option<f64> = None;
    for j in 0..d.v.len() {
        if d.scratch[j] > syn.threshold(j, h, p) {
            let s = crossing(syn, d, j, h, p);
            first = Some(first.map_or(s, |f| f.min(s)));
        }
    }
    match first {
        None => {
            std::mem::swap(&mut d.v, &mut d.scratch);
            d.g_e.iter_mut().for_each(|g| *g *= k.e_full);
            d.g_i.iter_mut().for_each(|g| *g *= k.i_full);
            syn.decay_thresholds(h, p);
            (t_target, false)
        }
        Some(s) => {
            advance(syn, d, s, p);
            (t + s, true)
        }
    }
}

fn fire<S: Synapses>(syn: &mut S, d: &mut Dynamics, j: usize, t: f64, p: &SnnParams) {
    d.v[j] = p.v_reset;
    syn.on_fire(j, p);
    if syn.learning() {
        syn.potentiate_column(j, t, d, p);
    }
    d.post_last[j] = t;
    d.counts[j] += 1;
    if let Some(r) = d.raster.as_mut() {
        r.push((j, t));
    }
    d.pending_inhibition.push_back((t + p.t_d_ms, j));
}

/// Advances the layer from `clock` to `clock + dt`.
///
/// Input spikes and inhibition deliveries are applied at their exact times
/// inside the step. Between them the membranes follow a Runge–Kutta
/// integration with exactly decaying conductances; a threshold crossing is
/// located by bisection and the spike takes that time.
fn step_impl<S: Synapses>(syn: &mut S, d: &mut Dynamics, p: &SnnParams, dt: f64, inputs: &[Spike]) {
    let t1 = d.clock_ms + dt;
    let mut t = d.clock_ms;
    let mut next = 0;
    loop {
        while let Some(&(due, src)) = d.pending_inhibition.front() {
            if due > t {
                break;
            }
            d.pending_inhibition.pop_front();
            for (j, g) in d.g_i.iter_mut().enumerate() {
                if j != src {
                    *g += p.w_inh;
                }
            }
        }
        while next < inputs.len() && (inputs[next].time_ms <= t || t >= t1) {
            let spike = inputs[next];
            let i = spike.address as usize;
            let when = spike.time_ms.min(t);
            for (g, &w) in d.g_e.iter_mut().zip(syn.row(i)) {
                *g += w;
            }
            if syn.learning() {
                syn.depress_row(i, when, d, p);
            }
            d.pre_last[i] = when;
            next += 1;
        }
        if t >= t1 {
            break;
        }
        let mut target = t1;
        if let Some(&(due, _)) = d.pending_inhibition.front() {
            target = target.min(due);
        }
        if let Some(s) = inputs.get(next) {
            target = target.min(s.time_ms);
        }
        let (reached, crossed) = integrate(syn, d, t, target, p);
        t = reached;
        if crossed {
            for j in 0..d.v.len() {
                if d.v[j] > syn.threshold(j, 0.0, p) {
                    fire(syn, d, j, t, p);
                }
            }
        }
    }
    d.steps += 1;
    d.clock_ms = d.steps as f64 * dt;
}

fn run<S: Synapses>(
    syn: &mut S,
    d: &mut Dynamics,
    params: &SnnParams,
    pattern: &SpikePattern,
    duration_ms: f64,
) {
    let dt = params.dt_ms;
    let n_steps = (duration_ms / dt - 1e-9).ceil().max(0.0) as u64;
    let mut cursor = 0;
    for k in 0..n_steps {
        let t1 = (k + 1) as f64 * dt;
        let start = cursor;
        while cursor < pattern.spikes.len() && pattern.spikes[cursor].time_ms <= t1 {
            cursor += 1;
        }
        step_impl(syn, d, params, dt, &pattern.spikes[start..cursor]);
    }
}

/// The learning layer: `n_e` encoding neurons fully connected to `n_l`
/// conductance LIF neurons with adaptive thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    params: SnnParams,
    n_e: usize,
    n_l: usize,
    /// `n_e × n_l`, row-major (`i * n_l + j`).
    weights: Vec<f64>,
    thresholds: Vec<f64>,
}

impl Network {
    /// Uniform random weights in [0, 1), normalized to column sum L.
    pub fn new(n_e: usize, params: SnnParams) -> Result<Self> {
        params.validate()?;
        if n_e == 0 {
            return Err(Error::InvalidInput("network needs ≥ 1 encoding neuron".into()));
        }
        let n_l = params.n_learning;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let weights = (0..n_e * n_l).map(|_| rng.gen::<f64>()).collect();
        let mut net = Self {
            thresholds: vec![params.v_t; n_l],
            params,
            n_e,
            n_l,
            weights,
        };
        net.normalize_weights()?;
        Ok(net)
    }

    pub fn from_parts(params: SnnParams, n_e: usize, weights: Vec<f64>, thresholds: Vec<f64>) -> Result<Self> {
        params.validate()?;
        let n_l = thresholds.len();
        if weights.len() != n_e * n_l || n_l == 0 {
            return Err(Error::InvalidInput(format!(
                "weight matrix of {} entries does not match {n_e}×{n_l}",
                weights.len()
            )));
        }
        Ok(Self {
            params: SnnParams {
                n_learning: n_l,
                ..params
            },
            n_e,
            n_l,
            weights,
            thresholds,
        })
    }

    pub fn params(&self) -> &SnnParams {
        &self.params
    }

    pub fn n_encoding(&self) -> usize {
        self.n_e
    }

    pub fn n_learning(&self) -> usize {
        self.n_l
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n_l + j]
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.weights.iter().skip(j).step_by(self.n_l).copied()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_l];
        for row in self.weights.chunks(self.n_l) {
            for (s, w) in sums.iter_mut().zip(row) {
                *s += w;
            }
        }
        sums
    }

    /// Rescales every neuron's incoming weights to sum to `norm_l`.
    pub fn normalize_weights(&mut self) -> Result<()> {
        let sums = self.column_sums();
        if let Some(neuron) = sums.iter().position(|s| !(*s > 0.0)) {
            return Err(Error::DeadNeuron { neuron });
        }
        let factors: Vec<f64> = sums.iter().map(|s| self.params.norm_l / s).collect();
        for row in self.weights.chunks_mut(self.n_l) {
            for (w, f) in row.iter_mut().zip(&factors) {
                *w *= f;
            }
        }
        Ok(())
    }

    /// Fresh presentation state: resting membranes, zero conductances and
    /// traces. Thresholds live in the network and persist.
    pub fn begin(&self, record_raster: bool) -> Dynamics {
        Dynamics::new(self.n_e, self.n_l, self.params.v_rest, record_raster)
    }

    /// One clock step. `inputs` are the encoding spikes due in this step.
    pub fn step(&mut self, dynamics: &mut Dynamics, inputs: &[Spike], plasticity: Plasticity) {
        let params = self.params.clone();
        match plasticity {
            Plasticity::On => {
                let mut syn = Learning {
                    weights: &mut self.weights,
                    thresholds: &mut self.thresholds,
                    n_e: self.n_e,
                    n_l: self.n_l,
                };
                step_impl(&mut syn, dynamics, &params, params.dt_ms, inputs);
            }
            Plasticity::Off => {
                let mut syn = self.frozen();
                step_impl(&mut syn, dynamics, &params, params.dt_ms, inputs);
            }
        }
    }

    fn frozen(&self) -> Frozen<'_> {
        Frozen {
            weights: &self.weights,
            thresholds: &self.thresholds,
            n_l: self.n_l,
        }
    }

    fn check_pattern(&self, pattern: &SpikePattern) -> Result<()> {
        if let Some(s) = pattern.spikes.iter().find(|s| s.address as usize >= self.n_e) {
            return Err(Error::AddressOutOfRange {
                address: s.address,
                n_addresses: self.n_e,
            });
        }
        Ok(())
    }

    /// Presents a pattern for `duration_ms` from a reset state. With
    /// plasticity on, weights are normalized once at the end.
    pub fn present(
        &mut self,
        pattern: &SpikePattern,
        duration_ms: f64,
        plasticity: Plasticity,
        record_raster: bool,
    ) -> Result<PresentationResult> {
        match plasticity {
            Plasticity::Off => self.respond(pattern, duration_ms, record_raster),
            Plasticity::On => {
                self.check_pattern(pattern)?;
                let mut d = self.begin(record_raster);
                let mut syn = Learning {
                    weights: &mut self.weights,
                    thresholds: &mut self.thresholds,
                    n_e: self.n_e,
                    n_l: self.n_l,
                };
                run(&mut syn, &mut d, &self.params, pattern, duration_ms);
                self.normalize_weights()?;
                Ok(d.into_result())
            }
        }
    }

    /// Plasticity-off presentation through shared access; safe to run
    /// concurrently on one network.
    pub fn respond(
        &self,
        pattern: &SpikePattern,
        duration_ms: f64,
        record_raster: bool,
    ) -> Result<PresentationResult> {
        self.check_pattern(pattern)?;
        let mut d = self.begin(record_raster);
        let mut syn = self.frozen();
        run(&mut syn, &mut d, &self.params, pattern, duration_ms);
        Ok(d.into_result())
    }

    /// Same network with a different integration step.
    pub fn with_dt(&self, dt_ms: f64) -> Self {
        let mut out = self.clone();
        out.params.dt_ms = dt_ms;
        out
    }
}
