use atomflux_core::times::{arrival_distribution, peak_census, ArrivalForm, Edge, PeakSign};
use atomflux_core::{boundary_series, characteristic_times, dwell_time, dwell_time_direct, ReferenceScenario};

fn free() -> ReferenceScenario {
    ReferenceScenario { rabi_override: Some(0.0), ..ReferenceScenario::default() }
}

#[test]
fn free_flight_times_are_classical() {
    let s = free();
    let p = s.packet().unwrap();
    let series = boundary_series(&p, s.t_end, s.n_steps).unwrap();
    let c = characteristic_times(&series).unwrap();
    // Velocity spread is ~1e-3 of v0, so 1/v averages to 1/v0 at 1e-6.
    let classical = s.length / s.velocity;
    assert!((c.dwell - classical).abs() < 1e-3 * classical, "tau_D = {}", c.dwell);
    assert!((c.transmission_time - c.dwell).abs() < 1e-3 * c.dwell);
}

#[test]
fn free_arrival_is_a_single_classical_peak() {
    let s = free();
    let p = s.packet().unwrap();
    let series = boundary_series(&p, s.t_end, s.n_steps).unwrap();
    for (edge, x) in [(Edge::Entry, 0.0), (Edge::Exit, s.length)] {
        let dist = arrival_distribution(&series, edge).unwrap();
        assert_eq!(dist.form, ArrivalForm::Signed);
        let peaks = peak_census(&series, edge, 1e-3, PeakSign::Positive);
        assert_eq!(peaks.len(), 1, "{edge:?}: {peaks:?}");
        let expected = (x - s.x0) / s.velocity;
        assert!((peaks[0] - expected).abs() < 0.02 * expected, "{edge:?}: {} vs {expected}", peaks[0]);
        assert!(peak_census(&series, edge, 1e-3, PeakSign::Negative).is_empty());
    }
}

#[test]
fn current_route_matches_direct_double_integral() {
    let s = ReferenceScenario::default();
    let p = s.packet().unwrap();
    let series = boundary_series(&p, s.t_end, s.n_steps).unwrap();
    let from_current = dwell_time(&series);
    let direct = dwell_time_direct(&p, 0.0, s.length, s.t_end).unwrap();
    assert!((from_current - direct).abs() < 5e-3 * direct, "{from_current} vs {direct}");
}

#[test]
fn exit_current_never_reverses() {
    let s = ReferenceScenario::default();
    let p = s.packet().unwrap();
    let series = boundary_series(&p, s.t_end, s.n_steps).unwrap();
    let min = series.current_at(Edge::Exit).iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min >= -1e-9, "min J(l) = {min}");
    assert!(series.presence_at(Edge::Exit).windows(2).all(|w| w[1] >= w[0] - 1e-12));
}

#[test]
fn short_runs_are_rejected() {
    let s = ReferenceScenario::default();
    let p = s.packet().unwrap();
    assert!(boundary_series(&p, 0.02, 256).is_err());
}

#[test]
fn halving_the_time_step_leaves_the_times_alone() {
    let s = ReferenceScenario::default();
    let p = s.packet().unwrap();
    let times = |n| characteristic_times(&boundary_series(&p, s.t_end, n).unwrap()).unwrap();
    let (coarse, fine) = (times(s.n_steps), times(2 * s.n_steps));
    for (a, b) in [
        (coarse.dwell, fine.dwell),
        (coarse.transmission_time, fine.transmission_time),
        (coarse.reflection_time, fine.reflection_time),
    ] {
        assert!((a - b).abs() < 1e-3 * b, "{a} vs {b}");
    }
}
