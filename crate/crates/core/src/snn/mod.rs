//! Learning layer: conductance-based LIF neurons with adaptive thresholds,
//! trained by nearest-spike triplet STDP under delayed lateral inhibition.

mod network;
mod params;
mod stdp;

pub use network::{Dynamics, Network, Plasticity, PresentationResult};
pub use params::{SnnParams, StdpParams};
pub use stdp::{depress, potentiate, SynapseState, Trace};
