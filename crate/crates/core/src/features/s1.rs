use rayon::prelude::*;

use super::gabor::{GaborBank, Kernel};
use crate::error::{Error, Result};
use crate::event_io::{Event, SensorGeometry};

/// One S1 feature map with per-cell lazy decay: each cell stores its
/// response as of `last_t`, and decay is applied only when the cell is
/// touched or refreshed.
#[derive(Debug, Clone, PartialEq)]
pub struct S1Map {
    values: Vec<f64>,
    last_t: Vec<f64>,
}

impl S1Map {
    fn new(cells: usize) -> Self {
        Self {
            values: vec![0.0; cells],
            last_t: vec![0.0; cells],
        }
    }

    fn deliver(&mut self, kernel: &Kernel, geometry: SensorGeometry, event: &Event, tau: f64) {
        let (w, h) = (geometry.width as i64, geometry.height as i64);
        let r = kernel.radius as i64;
        let (ex, ey) = (event.x as i64, event.y as i64);
        let t = event.t_ms();
        for y in (ey - r).max(0)..=(ey + r).min(h - 1) {
            let row = (y * w) as usize;
            for x in (ex - r).max(0)..=(ex + r).min(w - 1) {
                let i = row + x as usize;
                let decay = (-(t - self.last_t[i]) / tau).exp();
                self.values[i] = self.values[i] * decay + kernel.at(x - ex, y - ey);
                self.last_t[i] = t;
            }
        }
    }

    fn refresh(&mut self, t: f64, tau: f64) {
        for (v, last) in self.values.iter_mut().zip(self.last_t.iter_mut()) {
            if *last != t {
                *v *= (-(t - *last) / tau).exp();
                *last = t;
            }
        }
    }

    fn value_at(&self, i: usize, t: f64, tau: f64) -> f64 {
        self.values[i] * (-(t - self.last_t[i]) / tau).exp()
    }
}

/// S1 layer: one map per (scale, orientation), each the size of the sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct S1Maps {
    geometry: SensorGeometry,
    n_scales: usize,
    n_orientations: usize,
    tau_leak_ms: f64,
    /// Index `scale * n_orientations + orientation`.
    maps: Vec<S1Map>,
    clock_ms: f64,
    refreshed: bool,
}

impl S1Maps {
    pub fn new(bank: &GaborBank, geometry: SensorGeometry, tau_leak_ms: f64) -> Result<Self> {
        if !(tau_leak_ms > 0.0) {
            return Err(Error::Config(format!("feature.tau_leak_ms = {tau_leak_ms} must be > 0")));
        }
        let cells = geometry.width as usize * geometry.height as usize;
        let n = bank.n_scales() * bank.n_orientations();
        Ok(Self {
            geometry,
            n_scales: bank.n_scales(),
            n_orientations: bank.n_orientations(),
            tau_leak_ms,
            maps: (0..n).map(|_| S1Map::new(cells)).collect(),
            clock_ms: 0.0,
            refreshed: true,
        })
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    pub fn n_scales(&self) -> usize {
        self.n_scales
    }

    pub fn n_orientations(&self) -> usize {
        self.n_orientations
    }

    pub fn tau_leak_ms(&self) -> f64 {
        self.tau_leak_ms
    }

    /// Latest delivery or refresh time.
    pub fn clock_ms(&self) -> f64 {
        self.clock_ms
    }

    /// True when every cell has been decayed to [`Self::clock_ms`].
    pub fn is_refreshed(&self) -> bool {
        self.refreshed
    }

    fn check_event(&self, event: &Event) -> Result<()> {
        if !self.geometry.contains(event.x, event.y) {
            return Err(Error::OutOfBounds {
                index: 0,
                x: event.x,
                y: event.y,
                width: self.geometry.width,
                height: self.geometry.height,
            });
        }
        if event.t_ms() < self.clock_ms {
            return Err(Error::TimeRegression {
                previous: self.clock_ms,
                t: event.t_ms(),
            });
        }
        Ok(())
    }

    /// Adds the kernel of every map around the event address, decaying only
    /// the touched cells.
    pub fn deliver(&mut self, bank: &GaborBank, event: &Event) -> Result<()> {
        self.check_event(event)?;
        let no = self.n_orientations;
        for (k, map) in self.maps.iter_mut().enumerate() {
            map.deliver(bank.kernel(k / no, k % no), self.geometry, event, self.tau_leak_ms);
        }
        self.clock_ms = event.t_ms();
        self.refreshed = false;
        Ok(())
    }

    /// Delivers a time-ordered batch, processing the maps in parallel.
    pub fn deliver_all(&mut self, bank: &GaborBank, events: &[Event]) -> Result<()> {
        let mut clock = self.clock_ms;
        for (index, e) in events.iter().enumerate() {
            self.check_event(e).map_err(|err| match err {
                Error::OutOfBounds { x, y, width, height, .. } => Error::OutOfBounds {
                    index,
                    x,
                    y,
                    width,
                    height,
                },
                other => other,
            })?;
            if e.t_ms() < clock {
                return Err(Error::TimeRegression {
                    previous: clock,
                    t: e.t_ms(),
                });
            }
            clock = e.t_ms();
        }
        if events.is_empty() {
            return Ok(());
        }
        let (geometry, tau, no) = (self.geometry, self.tau_leak_ms, self.n_orientations);
        self.maps.par_iter_mut().enumerate().for_each(|(k, map)| {
            let kernel = bank.kernel(k / no, k % no);
            for e in events {
                map.deliver(kernel, geometry, e, tau);
            }
        });
        self.clock_ms = clock;
        self.refreshed = false;
        Ok(())
    }

    /// Decays every cell to `t_ms`.
    pub fn refresh(&mut self, t_ms: f64) -> Result<()> {
        if t_ms < self.clock_ms {
            return Err(Error::TimeRegression {
                previous: self.clock_ms,
                t: t_ms,
            });
        }
        let tau = self.tau_leak_ms;
        self.maps.par_iter_mut().for_each(|m| m.refresh(t_ms, tau));
        self.clock_ms = t_ms;
        self.refreshed = true;
        Ok(())
    }

    /// Response of one cell as seen at `t_ms`, without mutating state.
    pub fn value_at(&self, scale: usize, orientation: usize, x: usize, y: usize, t_ms: f64) -> f64 {
        let i = y * self.geometry.width as usize + x;
        self.maps[scale * self.n_orientations + orientation].value_at(i, t_ms, self.tau_leak_ms)
    }

    /// Stored values of one map (meaningful as responses only after a refresh).
    pub fn map_values(&self, scale: usize, orientation: usize) -> &[f64] {
        &self.maps[scale * self.n_orientations + orientation].values
    }
}
