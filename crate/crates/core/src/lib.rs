//! Quantum dynamics of a two-level atom crossing a localized classical field.
//!
//! The atom moves along a waveguide and meets a resonant (or detuned) field
//! occupying `0 <= x <= l`. Stationary two-channel scattering states are
//! solved exactly per wavenumber ([`scattering`]), superposed into a Gaussian
//! wave packet ([`wavepacket`]), and used to drive Bohmian trajectories
//! ([`bohmian`]) and the presence-probability functionals that give dwell,
//! transmission and reflection times plus arrival-time distributions
//! ([`times`]). An independent split-operator propagator ([`tdse`]) checks the
//! spectral construction.
//!
//! All quantities are SI.

// `!(a > b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bohmian;
pub mod error;
pub mod quadrature;
pub mod scattering;
pub mod scenario;
pub mod tdse;
pub mod times;
pub mod wavepacket;

pub use num_complex::Complex64;

pub use bohmian::{
    bifurcation_curve, bifurcation_point, bifurcation_start, integrate_ensemble,
    integrate_trajectory, sample_initial_positions, velocity, BifurcationCurve, Classification,
    Ensemble, RkOptions, SamplingScheme, Trajectory,
};
pub use error::{Error, Outcome, Result};
pub use scattering::{
    channel_wavenumbers, dressed_decomposition, solve_matching, ChannelWavenumbers, DressedData,
    FieldSetup, Region, ScatteringSolution, SpinorPoint,
};
pub use scenario::ReferenceScenario;
pub use tdse::{
    compare_with_spectral, oracle_check, GridOptions, GridState, OracleOptions, OracleReport,
    SpectralComparison,
};
pub use times::{
    arrival_distribution, boundary_series, characteristic_times, dwell_time, dwell_time_direct,
    peak_census, reflection_time, transmission_time, ArrivalDistribution, ArrivalForm,
    BoundarySeries, CharacteristicTimes, Edge, PeakSign,
};
pub use wavepacket::{PacketSpec, PresenceMethod, SpectralPacket, TimeSlice};

/// Reduced Planck constant (CODATA 2018), J s.
pub const HBAR: f64 = 1.054_571_817e-34;
