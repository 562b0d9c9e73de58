//! One function per subcommand. Each writes its tables through [`Output`]
//! and leaves summary lines as notes.

use atomflux_core::bohmian::interpolate;
use atomflux_core::tdse::OracleOptions;
use atomflux_core::times::{ArrivalDistribution, Edge, PeakSign};
use atomflux_core::{
    arrival_distribution, bifurcation_curve, boundary_series, characteristic_times, integrate_ensemble, oracle_check,
    peak_census, sample_initial_positions, ReferenceScenario, RkOptions, SamplingScheme, SpectralPacket,
};

use crate::config::Scenario;
use crate::error::CliError;
use crate::output::{Column, Output};

/// Largest tolerated `|R + T - 1|` on the wavenumber grid.
pub const UNITARITY_TOLERANCE: f64 = 1e-10;
/// Weighting-identity residual relative to the dwell time.
pub const WEIGHTING_TOLERANCE: f64 = 1e-3;
pub const ORACLE_L2_TOLERANCE: f64 = 1e-2;
pub const ORACLE_TRANSMISSION_TOLERANCE: f64 = 0.01;
/// Minimum current peak height reported by the census, 1/s.
pub const PEAK_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Amplitudes,
    Snapshots,
    SweepSigma,
    SweepDelta,
    Trajectories,
    Boundaries,
    Times,
    OracleCheck,
}

pub fn run(command: Command, scenario: &Scenario, out: &mut Output) -> Result<(), CliError> {
    match command {
        Command::Amplitudes => amplitudes(scenario, out),
        Command::Snapshots => snapshots(scenario, out),
        Command::SweepSigma => sweep_sigma(scenario, out),
        Command::SweepDelta => sweep_delta(scenario, out),
        Command::Trajectories => trajectories(scenario, out),
        Command::Boundaries => boundaries(scenario, out),
        Command::Times => times(scenario, out),
        Command::OracleCheck => oracle(scenario, out),
    }
}

fn require(quantity: &str, value: f64, tolerance: f64) -> Result<(), CliError> {
    if value.abs() <= tolerance {
        Ok(())
    } else {
        Err(CliError::Invariant { quantity: quantity.to_string(), value, tolerance })
    }
}

fn amplitudes(s: &Scenario, out: &mut Output) -> Result<(), CliError> {
    let packet = s.physics.packet()?;
    let sols: Vec<_> = packet.nodes().iter().map(|n| &n.solution).collect();
    let col = |name: &str, unit: &str, f: &dyn Fn(&atomflux_core::ScatteringSolution) -> f64| {
        Column::new(name, unit, sols.iter().map(|s| f(s)).collect())
    };
    let columns = [
        col("k", "1/m", &|s| s.k),
        col("q_re", "1/m", &|s| s.q.re),
        col("q_im", "1/m", &|s| s.q.im),
        col("k_plus_re", "1/m", &|s| s.k_plus.re),
        col("k_plus_im", "1/m", &|s| s.k_plus.im),
        col("k_minus_re", "1/m", &|s| s.k_minus.re),
        col("k_minus_im", "1/m", &|s| s.k_minus.im),
        col("R1_sq", "1", &|s| s.r1.norm_sqr()),
        col("T1_sq", "1", &|s| s.t1.norm_sqr()),
        col("R2_sq", "1", &|s| s.r2.norm_sqr()),
        col("T2_sq", "1", &|s| s.t2.norm_sqr()),
        col("unitarity_residual", "1", &|s| s.unitarity_residual()),
    ];
    out.table("amplitudes", &columns, true)?;
    let worst = sols.iter().map(|s| s.unitarity_residual().abs()).fold(0.0, f64::max);
    out.note(format!("nodes {}", sols.len()));
    out.note(format!("max unitarity residual {worst:.3e}"));
    require("max unitarity residual", worst, UNITARITY_TOLERANCE)
}

fn snapshots(s: &Scenario, out: &mut Output) -> Result<(), CliError> {
    if s.snapshot_times.is_empty() || s.snapshot_points < 2 {
        return Err(CliError::Usage("snapshots need at least one time and two points".into()));
    }
    let packet = s.physics.packet()?;
    let (lo, hi) = s
        .snapshot_times
        .iter()
        .map(|&t| packet.support(t))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (l, h)| (a.min(l), b.max(h)));
    let n = s.snapshot_points;
    let h = (hi - lo) / (n - 1) as f64;
    let mut columns = vec![Column::new("x", "m", (0..n).map(|i| lo + i as f64 * h).collect())];
    for &t in &s.snapshot_times {
        let rho = packet.slice(t).sample_density(lo, h, n);
        columns.push(Column::new(&format!("rho_t={}ms", t * 1e3), "1/m", rho));
    }
    out.table("snapshots", &columns, true)?;
    out.note(format!("{} times on [{lo:.4e}, {hi:.4e}] m", s.snapshot_times.len()));
    Ok(())
}

fn sweep(out: &mut Output, stem: &str, name: &str, unit: &str, xs: &[f64], packets: Vec<SpectralPacket>) -> Result<(), CliError> {
    let t: Vec<f64> = packets.iter().map(SpectralPacket::transmission_probability).collect();
    let r: Vec<f64> = packets.iter().map(SpectralPacket::reflection_probability).collect();
    out.table(
        stem,
        &[Column::new(name, unit, xs.to_vec()), Column::new("T_sq", "1", t.clone()), Column::new("R_sq", "1", r)],
        true,
    )?;
    for (x, t) in xs.iter().zip(&t) {
        out.note(format!("{name} {x:.4e} {unit}: |T|^2 {t:.6}"));
    }
    Ok(())
}

fn sweep_sigma(s: &Scenario, out: &mut Output) -> Result<(), CliError> {
    let packets = s.sigma_sweep.iter().map(|&sigma| s.physics.with_packet_width(sigma).packet()).collect::<Result<_, _>>()?;
    sweep(out, "sweep_sigma", "sigma0", "m", &s.sigma_sweep, packets)
}

fn sweep_delta(s: &Scenario, out: &mut Output) -> Result<(), CliError> {
    let packets = s.detuning_sweep.iter().map(|&d| ReferenceScenario { detuning: d, ..s.physics }.packet()).collect::<Result<_, _>>()?;
    sweep(out, "sweep_delta", "detuning", "rad/s", &s.detuning_sweep, packets)
}

fn rk_options(s: &Scenario) -> RkOptions {
    RkOptions { rtol: s.physics.rk_tolerance, ..RkOptions::default() }
}

fn trajectories(s: &Scenario, out: &mut Output) -> Result<(), CliError> {
    let packet = s.physics.packet()?;
    let opts = rk_options(s);
    let t_end = s.physics.trajectory_t_end;
    let starts = sample_initial_positions(&packet, s.physics.n_trajectories, SamplingScheme::Quantile)?;
    let ensemble = integrate_ensemble(&packet, &starts, t_end, &opts);
    let n_out = (t_end / opts.output_dt).round() as usize;
    let grid: Vec<f64> = (0..=n_out).map(|i| t_end * i as f64 / n_out as f64).collect();
    let mut columns = vec![Column::new("t", "s", grid.clone())];
    for (i, traj) in ensemble.trajectories.iter().enumerate() {
        columns.push(Column::new(&format!("x_{i:03}"), "m", grid.iter().map(|&t| interpolate(traj, t)).collect()));
    }
    out.table("trajectories", &columns, false)?;
    let starts_col: Vec<f64> = ensemble.trajectories.iter().map(|t| t.initial).collect();
    let finals: Vec<f64> = ensemble.trajectories.iter().map(|t| t.final_position()).collect();
    let transmitted: Vec<f64> = ensemble
        .outcomes
        .iter()
        .map(|c| f64::from(u8::from(*c == atomflux_core::Classification::Transmitted)))
        .collect();
    out.table(
        "trajectory_outcomes",
        &[Column::new("x_start", "m", starts_col), Column::new("x_final", "m", finals), Column::new("transmitted", "1", transmitted)],
        false,
    )?;
    let curve = bifurcation_curve(&packet, &grid, &opts)?;
    out.table(
        "bifurcation",
        &[
            Column::new("t", "s", curve.times.clone()),
            Column::new("x_c", "m", curve.positions.clone()),
            Column::new("x_c_trajectory", "m", grid.iter().map(|&t| interpolate(&curve.trajectory, t)).collect()),
        ],
        true,
    )?;
    let t2 = packet.transmission_probability();
    let lines = [
        format!("trajectories {} (failed {})", ensemble.trajectories.len(), ensemble.failures.len()),
        format!("transmitted fraction {:.4} vs |T|^2 {t2:.4}", ensemble.transmitted_fraction()),
        format!("resolved by bifurcation curve {}", ensemble.resolved_by_curve),
        format!("x_c(0) - x0 = {:.4e} m", curve.start - packet.spec().x0),
        format!("curve vs trajectory max deviation {:.3e} m", curve.max_deviation),
    ];
    for line in lines {
        out.note(line);
    }
    for (x0, e) in &ensemble.failures {
        out.note(format!("failed start {x0:.6e} m: {e}"));
    }
    if !ensemble.failures.is_empty() {
        return Err(CliError::Invariant {
            quantity: "failed trajectories".into(),
            value: ensemble.failures.len() as f64,
            tolerance: 0.0,
        });
    }
    if !ensemble.preserves_order() {
        return Err(CliError::Invariant { quantity: "trajectory ordering violations".into(), value: 1.0, tolerance: 0.0 });
    }
    Ok(())
}

fn boundaries(s: &Scenario, out: &mut Output) -> Result<(), CliError> {
    let packet = s.physics.packet()?;
    let series = boundary_series(&packet, s.physics.t_end, s.physics.n_steps)?;
    let p0 = arrival_distribution(&series, Edge::Entry)?;
    let pl = arrival_distribution(&series, Edge::Exit)?;
    out.table(
        "boundaries",
        &[
            Column::new("t", "s", series.times.clone()),
            Column::new("J_0", "1/s", series.current_at(Edge::Entry).to_vec()),
            Column::new("J_l", "1/s", series.current_at(Edge::Exit).to_vec()),
            Column::new("Q_0", "1", series.presence_at(Edge::Entry).to_vec()),
            Column::new("Q_l", "1", series.presence_at(Edge::Exit).to_vec()),
            Column::new("P_0", "1/s", p0.density.clone()),
            Column::new("P_l", "1/s", pl.density.clone()),
        ],
        true,
    )?;
    let describe = |name: &str, p: &ArrivalDistribution| {
        format!("{name}: {:?} form, integral {:.6}", p.form, p.integral(series.dt))
    };
    let entry_back = peak_census(&series, Edge::Entry, PEAK_THRESHOLD, PeakSign::Negative);
    let exit_peaks = peak_census(&series, Edge::Exit, PEAK_THRESHOLD, PeakSign::Positive);
    out.note(describe("P_0", &p0));
    out.note(describe("P_l", &pl));
    out.note(format!("negative current peaks at x=0: {}", entry_back.len()));
    out.note(format!("positive current peaks at x=l: {}", exit_peaks.len()));
    Ok(())
}

fn times(s: &Scenario, out: &mut Output) -> Result<(), CliError> {
    let packet = s.physics.packet()?;
    let series = boundary_series(&packet, s.physics.t_end, s.physics.n_steps)?;
    let c = characteristic_times(&series)?;
    let rows = [
        ("transmission_probability", c.transmission, "1"),
        ("reflection_probability", c.reflection(), "1"),
        ("dwell_time", c.dwell, "s"),
        ("transmission_time", c.transmission_time, "s"),
        ("reflection_time", c.reflection_time, "s"),
        ("weighting_residual", c.weighting_residual, "s"),
    ];
    let mut text = String::from("quantity,value,unit\n");
    for (name, value, unit) in rows {
        text.push_str(&format!("{name},{},{unit}\n", crate::output::format_value(value)));
    }
    out.text("times.csv", &text)?;
    out.note(format!("|T|^2 = {:.4}", c.transmission));
    out.note(format!("tau_D = {:.3} ms", c.dwell * 1e3));
    out.note(format!("tau_T = {:.3} ms", c.transmission_time * 1e3));
    out.note(format!("tau_R = {:.3} ms", c.reflection_time * 1e3));
    require("weighting residual / dwell time", c.weighting_residual / c.dwell, WEIGHTING_TOLERANCE)
}

fn oracle(s: &Scenario, out: &mut Output) -> Result<(), CliError> {
    let packet = s.physics.packet()?;
    let r = oracle_check(&packet, &OracleOptions::default())?;
    let rows = [
        ("snapshot_time", r.snapshot.t, "s"),
        ("snapshot_l2_relative", r.snapshot.l2_relative, "1"),
        ("late_time", r.late.t, "s"),
        ("grid_transmission", r.late.grid_transmission, "1"),
        ("spectral_transmission", r.late.spectral_transmission, "1"),
        ("late_inside", r.late.inside, "1"),
        ("conservation_error", r.conservation_error, "1"),
        ("dt", r.dt, "s"),
    ];
    let mut text = String::from("quantity,value,unit\n");
    for (name, value, unit) in rows {
        text.push_str(&format!("{name},{},{unit}\n", crate::output::format_value(value)));
    }
    out.text("oracle.csv", &text)?;
    out.note(
        format!("snapshot L2 relative {:.3e} at {:.1} ms", r.snapshot.l2_relative, r.snapshot.t * 1e3),
    );
    out.note(
        format!("grid |T|^2 {:.4} vs spectral {:.4} at {:.2} s", r.late.grid_transmission, r.late.spectral_transmission, r.late.t),
    );
    require("snapshot L2 relative difference", r.snapshot.l2_relative, ORACLE_L2_TOLERANCE)?;
    require(
        "grid minus spectral |T|^2",
        r.late.grid_transmission - r.late.spectral_transmission,
        ORACLE_TRANSMISSION_TOLERANCE,
    )
}
