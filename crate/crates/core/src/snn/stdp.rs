//! Nearest-spike triplet STDP.
//!
//! A trace is fully described by the time of its last spike: assignment to 1
//! at the spike and exponential decay afterwards, so it never exceeds 1.
//! Depression happens at presynaptic spikes (`Δw = −A⁻·a_post`), potentiation
//! at postsynaptic spikes (`Δw = A⁺·a_pre·a_post2`, with `a_post2` read
//! before it is reassigned).

use super::params::StdpParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trace {
    pub last_spike_ms: f64,
}

impl Default for Trace {
    fn default() -> Self {
        Self::silent()
    }
}

impl Trace {
    pub const fn silent() -> Self {
        Self {
            last_spike_ms: f64::NEG_INFINITY,
        }
    }

    #[inline]
    pub fn value(&self, t_ms: f64, tau: f64) -> f64 {
        trace_value(self.last_spike_ms, t_ms, tau)
    }

    #[inline]
    pub fn fire(&mut self, t_ms: f64) {
        self.last_spike_ms = t_ms;
    }
}

#[inline]
pub(crate) fn trace_value(last_spike_ms: f64, t_ms: f64, tau: f64) -> f64 {
    if last_spike_ms == f64::NEG_INFINITY {
        0.0
    } else {
        (-(t_ms - last_spike_ms) / tau).exp()
    }
}

#[inline]
pub fn depress(w: f64, a_post: f64, a_minus: f64) -> f64 {
    (w - a_minus * a_post).max(0.0)
}

#[inline]
pub fn potentiate(w: f64, a_pre: f64, a_post2: f64, a_plus: f64) -> f64 {
    w + a_plus * a_pre * a_post2
}

/// One excitatory synapse with its own traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynapseState {
    pub w: f64,
    pub pre: Trace,
    pub post: Trace,
    pub post2: Trace,
}

impl SynapseState {
    pub fn new(w: f64) -> Self {
        Self {
            w,
            pre: Trace::silent(),
            post: Trace::silent(),
            post2: Trace::silent(),
        }
    }

    pub fn a_pre(&self, t: f64, p: &StdpParams) -> f64 {
        self.pre.value(t, p.tau_apre)
    }

    pub fn a_post(&self, t: f64, p: &StdpParams) -> f64 {
        self.post.value(t, p.tau_apost)
    }

    pub fn a_post2(&self, t: f64, p: &StdpParams) -> f64 {
        self.post2.value(t, p.tau_apost2)
    }

    /// Presynaptic spike at `t`. Returns the weight change.
    pub fn on_pre_spike(&mut self, t: f64, p: &StdpParams) -> f64 {
        let before = self.w;
        self.w = depress(self.w, self.a_post(t, p), p.a_minus);
        self.pre.fire(t);
        self.w - before
    }

    /// Postsynaptic spike at `t`. Returns the weight change.
    pub fn on_post_spike(&mut self, t: f64, p: &StdpParams) -> f64 {
        let before = self.w;
        self.w = potentiate(self.w, self.a_pre(t, p), self.a_post2(t, p), p.a_plus);
        self.post.fire(t);
        self.post2.fire(t);
        self.w - before
    }
}
