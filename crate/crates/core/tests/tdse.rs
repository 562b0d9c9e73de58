use atomflux_core::scattering::FieldSetup;
use atomflux_core::tdse::{compare_with_spectral, GridOptions, GridState};
use atomflux_core::wavepacket::{PacketSpec, SpectralPacket};

const MASS: f64 = 2.2e-25;
const V0: f64 = 0.01;
const L: f64 = 5e-6;
const SIGMA0: f64 = 2e-6;
const X0: f64 = -12e-6;

/// A short slab with the coupling at about 0.6 of the kinetic energy.
fn small(rabi: f64) -> (FieldSetup, PacketSpec, SpectralPacket) {
    let setup = FieldSetup::new(MASS, 0.0, rabi, 0.0, L).unwrap();
    let spec = PacketSpec::from_velocity(MASS, V0, SIGMA0, X0).unwrap();
    let packet = SpectralPacket::build(setup, spec, 1024, 6.0).unwrap();
    (setup, spec, packet)
}

fn grid(setup: FieldSetup, spec: PacketSpec, dx: f64) -> GridState {
    GridState::init(setup, spec, GridOptions::covering(-30e-6, 45e-6, 10e-6, dx)).unwrap()
}

#[test]
fn initial_grid_state_matches_the_packet() {
    let (setup, spec, packet) = small(6e4);
    let state = grid(setup, spec, 2e-8);
    let c = compare_with_spectral(&state, &packet);
    assert!(c.l2_relative < 1e-3, "L2 = {}", c.l2_relative);
    assert!((state.norm() - 1.0).abs() < 1e-9);
}

#[test]
fn free_propagation_agrees_with_the_spectral_sum() {
    let (setup, spec, packet) = small(0.0);
    let mut state = grid(setup, spec, 2e-8);
    let dt = state.default_dt();
    state.propagate_to(2e-3, dt).unwrap();
    let c = compare_with_spectral(&state, &packet);
    assert!(c.l2_relative < 1e-4, "L2 = {}", c.l2_relative);
    assert_eq!(state.excited_population(), 0.0);
}

#[test]
fn refining_the_grid_converges_on_the_spectral_transmission() {
    let (setup, spec, packet) = small(6e4);
    let t_end = 3.5e-3;
    let run = |dx: f64| {
        let mut state = grid(setup, spec, dx);
        let dt = state.default_dt();
        state.propagate_to(t_end, dt).unwrap();
        let total = state.norm() + state.absorbed[0] + state.absorbed[1];
        assert!((total - 1.0).abs() < 1e-8, "probability book-keeping off by {}", total - 1.0);
        (state.transmitted(), compare_with_spectral(&state, &packet))
    };
    let (coarse, _) = run(2e-8);
    let (fine, cmp) = run(1e-8);
    assert!((coarse - fine).abs() < 2e-3, "T at dx 2e-8: {coarse}, at 1e-8: {fine}");
    let t2 = packet.transmission_probability();
    assert!((fine - t2).abs() < 5e-3, "grid {fine} vs spectral {t2}");
    assert!(cmp.inside < 1e-3, "still inside: {}", cmp.inside);
}

#[test]
fn oversized_steps_are_refused() {
    let (setup, spec, _) = small(6e4);
    let mut state = grid(setup, spec, 2e-8);
    assert!(state.step(1.0).is_err());
}
