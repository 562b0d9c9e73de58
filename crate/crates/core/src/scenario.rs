//! Reference scenario: cesium atoms crossing a 100 μm field at 1 cm/s.

use crate::error::Result;
use crate::scattering::FieldSetup;
use crate::wavepacket::{PacketSpec, SpectralPacket, DEFAULT_NODES, DEFAULT_SPAN};

/// Physical parameters of the reference configuration plus the numerical
/// settings used with it. Fields are public so one quantity can be varied
/// at a time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceScenario {
    /// kg
    pub mass: f64,
    /// Mean velocity, m/s.
    pub velocity: f64,
    /// Field length, m.
    pub length: f64,
    /// Pulse index `n` in `Ω = (n + 1/2)π v₀/l`.
    pub rabi_n: u32,
    /// Overrides the pulse formula when set, rad/s.
    pub rabi_override: Option<f64>,
    /// rad/s
    pub detuning: f64,
    /// rad
    pub phase: f64,
    /// m
    pub sigma0: f64,
    /// m
    pub x0: f64,
    pub n_nodes: usize,
    /// Grid half-width in spectral standard deviations `1/(2σ₀)`.
    pub span: f64,
    /// Duration of the presence-probability series, s.
    pub t_end: f64,
    pub n_steps: usize,
    /// Duration of trajectory runs, s.
    pub trajectory_t_end: f64,
    pub n_trajectories: usize,
    pub rk_tolerance: f64,
}

impl Default for ReferenceScenario {
    fn default() -> Self {
        ReferenceScenario {
            mass: 2.2e-25,
            velocity: 0.01,
            length: 1e-4,
            rabi_n: 650,
            rabi_override: None,
            detuning: 0.0,
            phase: 0.0,
            sigma0: 20e-6,
            x0: -120.4e-6,
            n_nodes: DEFAULT_NODES,
            span: DEFAULT_SPAN,
            t_end: 1.5,
            n_steps: 16384,
            trajectory_t_end: 0.12,
            n_trajectories: 200,
            rk_tolerance: 1e-7,
        }
    }
}

impl ReferenceScenario {
    pub fn rabi(&self) -> f64 {
        self.rabi_override.unwrap_or_else(|| FieldSetup::pulse_rabi(self.rabi_n, self.velocity, self.length))
    }

    pub fn setup(&self) -> Result<FieldSetup> {
        FieldSetup::new(self.mass, self.detuning, self.rabi(), self.phase, self.length)
    }

    pub fn spec(&self) -> Result<PacketSpec> {
        PacketSpec::from_velocity(self.mass, self.velocity, self.sigma0, self.x0)
    }

    pub fn packet(&self) -> Result<SpectralPacket> {
        SpectralPacket::build(self.setup()?, self.spec()?, self.n_nodes, self.span)
    }

    /// Same scenario with packet width `sigma0`. The start moves left to stay
    /// `6σ₀` clear of the field, and a narrower packet gets more nodes so the
    /// spacing in `k` (and with it the `2π/dk` repeat length of the
    /// quadrature in `x`) never shrinks.
    pub fn with_packet_width(&self, sigma0: f64) -> ReferenceScenario {
        let ratio = self.sigma0 / sigma0;
        let n_nodes = if ratio > 1.0 {
            ((self.n_nodes - 1) as f64 * ratio).ceil() as usize + 1
        } else {
            self.n_nodes
        };
        ReferenceScenario { sigma0, x0: self.x0.min(-6.0 * sigma0), n_nodes, ..*self }
    }

    /// Kinetic energy at the mean velocity, J.
    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.mass * self.velocity * self.velocity
    }

    /// `ħΩ / E_k`.
    pub fn coupling_ratio(&self) -> f64 {
        crate::HBAR * self.rabi() / self.kinetic_energy()
    }

    /// Classical transit time through the field, s.
    pub fn transit_time(&self) -> f64 {
        self.length / self.velocity
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interaction_to_kinetic_ratio() {
        let s = ReferenceScenario::default();
        assert!((s.coupling_ratio() - 1.96).abs() < 0.005, "{}", s.coupling_ratio());
        assert!((s.transit_time() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn override_wins() {
        let s = ReferenceScenario { rabi_override: Some(0.0), ..Default::default() };
        assert!(s.setup().unwrap().is_free());
    }
}
