use crate::error::{Error, Result};

/// Learning-layer hyperparameters. Voltages in mV, times in ms.
///
/// `tau_ge`, `tau_gi`, `v_reset`, `norm_l`, `n_learning` and `dt_ms` are
/// implementation defaults; the remaining values are the published
/// settings for 32×32 inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SnnParams {
    pub v_rest: f64,
    pub v_reset: f64,
    pub e_exc: f64,
    pub e_inh: f64,
    pub tau_m: f64,
    pub tau_ge: f64,
    pub tau_gi: f64,
    pub tau_thr: f64,
    pub v_t: f64,
    pub v_plus: f64,
    pub stdp: StdpParams,
    pub w_inh: f64,
    pub t_d_ms: f64,
    pub n_learning: usize,
    pub norm_l: f64,
    pub dt_ms: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StdpParams {
    pub tau_apre: f64,
    pub tau_apost: f64,
    pub tau_apost2: f64,
    pub a_plus: f64,
    pub a_minus: f64,
}

impl Default for StdpParams {
    fn default() -> Self {
        Self {
            tau_apre: 20.0,
            tau_apost: 30.0,
            tau_apost2: 40.0,
            a_plus: 0.1,
            a_minus: 0.001,
        }
    }
}

impl Default for SnnParams {
    fn default() -> Self {
        Self {
            v_rest: -65.0,
            v_reset: -65.0,
            e_exc: 0.0,
            e_inh: -100.0,
            tau_m: 100.0,
            tau_ge: 1.0,
            tau_gi: 2.0,
            tau_thr: 1e7,
            v_t: -63.5,
            v_plus: 0.07,
            stdp: StdpParams::default(),
            w_inh: 2.4,
            t_d_ms: 0.3,
            n_learning: 60,
            norm_l: 47.0,
            dt_ms: 0.5,
            seed: 0,
        }
    }
}

impl SnnParams {
    pub fn validate(&self) -> Result<()> {
        let taus = [
            self.tau_m,
            self.tau_ge,
            self.tau_gi,
            self.tau_thr,
            self.stdp.tau_apre,
            self.stdp.tau_apost,
            self.stdp.tau_apost2,
        ];
        if taus.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::Config("snn time constants must be > 0".into()));
        }
        if !(self.dt_ms > 0.0) || self.t_d_ms < 0.0 || self.w_inh < 0.0 {
            return Err(Error::Config("snn.dt_ms must be > 0, t_d and w_inh ≥ 0".into()));
        }
        if !(self.v_reset < self.v_t) {
            return Err(Error::Config("snn.v_reset must lie below snn.v_t".into()));
        }
        if self.n_learning == 0 || !(self.norm_l > 0.0) {
            return Err(Error::Config("snn.n_learning and snn.norm_L must be > 0".into()));
        }
        if self.stdp.a_plus < 0.0 || self.stdp.a_minus < 0.0 {
            return Err(Error::Config("STDP learning rates must be ≥ 0".into()));
        }
        Ok(())
    }
}
