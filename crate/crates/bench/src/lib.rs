//! Shared inputs for the kernel benchmarks.

use atomflux_core::scattering::FieldSetup;
use atomflux_core::tdse::{GridOptions, GridState};
use atomflux_core::{ReferenceScenario, SpectralPacket};

/// Reference packet (1024 nodes).
pub fn reference_packet() -> SpectralPacket {
    ReferenceScenario::default().packet().expect("reference scenario is valid")
}

pub fn reference_setup() -> FieldSetup {
    ReferenceScenario::default().setup().expect("reference scenario is valid")
}

/// Incident wavenumber of the reference packet centre, 1/m.
pub fn reference_k() -> f64 {
    let s = ReferenceScenario::default();
    s.mass * s.velocity / atomflux_core::HBAR
}

/// Reference packet on a 2^14-point grid covering the field.
pub fn reference_grid() -> GridState {
    let s = ReferenceScenario::default();
    let options = GridOptions::covering(s.x0 - 10.0 * s.sigma0, s.length + 50e-6, 20e-6, 2e-8);
    GridState::init(s.setup().unwrap(), s.spec().unwrap(), options).expect("grid fits the packet")
}
