//! Unsupervised object recognition on address-event (AER) sensor streams.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`event_io`] reads, writes and synthesizes event streams.
//! 2. [`segmentation`] cuts a stream into motion symbols with a leaky
//!    integrator and peak detector.
//! 3. [`features`] turns a segment into S1/C1 Gabor responses and
//!    latency-codes them into a [`features::SpikePattern`].
//! 4. [`snn`] simulates a layer of conductance LIF neurons that learn the
//!    patterns with nearest-spike triplet STDP and lateral inhibition.
//! 5. [`recognition`] assigns labels to the learned neurons and scores
//!    test recordings by per-class mean firing.
//!
//! [`analysis`] holds the diagnostic measurements (spike-time entropy,
//! response histograms, scale/orientation correlations) and [`pipeline`]
//! wires everything into the commands exposed by the `must` binary.

pub mod analysis;
pub mod config;
pub mod error;
pub mod event_io;
pub mod features;
pub mod pipeline;
pub mod recognition;
pub mod seed;
pub mod segmentation;
pub mod snn;

pub use error::{Error, Result};
