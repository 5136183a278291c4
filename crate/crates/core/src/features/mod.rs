//! Multiscale spatio-temporal features: event-driven Gabor accumulation with
//! exponential leak (S1), 2×2 max pooling (C1), and latency coding of C1
//! responses into addressed spike trains.

mod c1;
mod coding;
mod gabor;
mod s1;

pub use c1::{pool_2x2, C1Maps};
pub use coding::{encode, fit_coding, CodingKind, CodingParams, Fusion, Spike, SpikePattern};
pub use gabor::{gabor, GaborBank, GaborParams, Kernel};
pub use s1::S1Maps;

use crate::error::Result;
use crate::event_io::SensorGeometry;
use crate::segmentation::Segment;

/// Runs a segment through S1 and C1, snapshotting at the segment's last
/// event time.
pub fn extract_c1(
    bank: &GaborBank,
    geometry: SensorGeometry,
    tau_leak_ms: f64,
    segment: &Segment,
) -> Result<C1Maps> {
    let mut s1 = S1Maps::new(bank, geometry, tau_leak_ms)?;
    s1.deliver_all(bank, &segment.events)?;
    s1.refresh(segment.t_end_ms())?;
    C1Maps::pool(&s1)
}
