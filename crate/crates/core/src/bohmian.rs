//! Bohmian trajectories guided by the spectral packet.
//!
//! Positions follow `dx/dt = J/ρ`. The guidance equation is integrated with
//! the Dormand–Prince 5(4) pair; steps whose stages land on a near-node are
//! rejected and retried shorter. Trajectories that are still inside the field
//! at the end are assigned an outcome through the bifurcation curve, which
//! trajectories cannot cross.

use rand::{RngExt, SeedableRng};
use rayon::prelude::*;

use crate::error::{invalid, Error, Outcome, Result};
use crate::wavepacket::SpectralPacket;

/// Density below which the velocity field is treated as singular, 1/m.
pub const RHO_FLOOR: f64 = 1e-30;

/// Guidance velocity `J/ρ` at `(x, t)`.
pub fn velocity(packet: &SpectralPacket, x: f64, t: f64) -> Result<f64> {
    velocity_with_floor(packet, x, t, RHO_FLOOR)
}

pub fn velocity_with_floor(packet: &SpectralPacket, x: f64, t: f64, floor: f64) -> Result<f64> {
    let p = packet.psi(x, t);
    let density = p.density();
    if !(density > floor) {
        return Err(Error::NearNode { x, t, density });
    }
    Ok(crate::HBAR / packet.setup().mass * p.flux_kernel() / density)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RkOptions {
    /// Relative local error per step; the absolute scale is `rtol · l`.
    pub rtol: f64,
    /// Spacing of stored samples, s.
    pub output_dt: f64,
    pub rho_floor: f64,
    pub max_steps: usize,
}

impl Default for RkOptions {
    fn default() -> Self {
        RkOptions { rtol: 1e-7, output_dt: 1e-4, rho_floor: RHO_FLOOR, max_steps: 1_000_000 }
    }
}

/// Outcome read off a final position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Transmitted,
    Reflected,
    /// Still inside `[0, l]` at the end of the run.
    Undecided,
}

impl Classification {
    pub fn of(x: f64, length: f64) -> Classification {
        if x > length {
            Classification::Transmitted
        } else if x < 0.0 {
            Classification::Reflected
        } else {
            Classification::Undecided
        }
    }
}

/// One path sampled on a uniform output grid (plus the final time).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: f64,
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub classification: Classification,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn final_position(&self) -> f64 {
        *self.positions.last().unwrap_or(&self.initial)
    }
}

// Dormand–Prince tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Continuous-extension coefficients.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Integrates the guidance equation from `x0` at `t = 0` to `t_end`.
pub fn integrate_trajectory(packet: &SpectralPacket, x0: f64, t_end: f64, opts: &RkOptions) -> Result<Trajectory> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(invalid("t_end", "must be positive"));
    }
    if !(opts.rtol > 0.0 && opts.output_dt > 0.0) {
        return Err(invalid("rk options", "tolerance and output spacing must be positive"));
    }
    let floor = opts.rho_floor;
    let length = packet.length();
    let atol = opts.rtol * length;
    let f = |t: f64, x: f64| velocity_with_floor(packet, x, t, floor);

    let mut t = 0.0;
    let mut x = x0;
    let mut k1 = f(t, x)?;
    let mut times = vec![0.0];
    let mut positions = vec![x0];
    let mut next_out = opts.output_dt;
    // Initial step: move a fraction of the tolerance scale.
    let mut h = (0.01 * length / k1.abs().max(1e-12)).min(opts.output_dt).min(t_end);
    let h_min = 1e-14 * t_end.max(1.0);
    let (mut accepted, mut rejected) = (0usize, 0usize);
    let mut k = [0.0; 7];
    let mut err_old = 1e-4_f64;
    let mut last_rejected = false;

    while t < t_end {
        if accepted + rejected >= opts.max_steps {
            return Err(Error::StepUnderflow { x, t });
        }
        if h < h_min {
            return Err(Error::StepUnderflow { x, t });
        }
        let h_step = h.min(t_end - t);
        k[0] = k1;
        let mut failed = false;
        for s in 1..7 {
            let mut y = x;
            for (j, kj) in k.iter().enumerate().take(s) {
                y += h_step * A[s][j] * kj;
            }
            match f(t + C[s] * h_step, y) {
                Ok(v) => k[s] = v,
                Err(Error::NearNode { .. }) => {
                    failed = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if failed {
            rejected += 1;
            h = 0.25 * h_step;
            continue;
        }
        let x_new = x + h_step * (A[6][0] * k[0] + A[6][2] * k[2] + A[6][3] * k[3] + A[6][4] * k[4] + A[6][5] * k[5]);
        let err_est = h_step * E.iter().zip(&k).map(|(e, kk)| e * kk).sum::<f64>();
        let scale = atol + opts.rtol * x.abs().max(x_new.abs());
        let err = err_est.abs() / scale;
        if err <= 1.0 {
            let t_new = t + h_step;
            // Dense output for every sample time crossed by this step.
            let ydiff = x_new - x;
            let bspl = h_step * k[0] - ydiff;
            let r4 = ydiff - h_step * k[6] - bspl;
            let r5 = h_step * D.iter().zip(&k).map(|(d, kk)| d * kk).sum::<f64>();
            while next_out < t_new && next_out < t_end {
                let th = (next_out - t) / h_step;
                let th1 = 1.0 - th;
                times.push(next_out);
                positions.push(x + th * (ydiff + th1 * (bspl + th * (r4 + th1 * r5))));
                next_out = opts.output_dt * (times.len() as f64);
            }
            t = t_new;
            x = x_new;
            k1 = k[6];
            accepted += 1;
            // Proportional-integral control on the error history.
            let mut fac = (err.max(1e-10).powf(0.17) / err_old.powf(0.04) / 0.9).clamp(0.1, 5.0);
            if last_rejected {
                fac = fac.max(1.0);
            }
            err_old = err.max(1e-4);
            last_rejected = false;
            h = h_step / fac;
        } else {
            rejected += 1;
            last_rejected = true;
            h = h_step / (err.powf(0.17) / 0.9).min(5.0);
        }
    }
    if *times.last().unwrap() < t_end {
        times.push(t_end);
        positions.push(x);
    }
    Ok(Trajectory {
        initial: x0,
        times,
        positions,
        classification: Classification::of(x, length),
        accepted_steps: accepted,
        rejected_steps: rejected,
    })
}

/// How initial positions are drawn from `ρ(x, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingScheme {
    /// Deterministic quantiles `(i - 1/2)/n`.
    Quantile,
    /// Independent draws from a seeded generator.
    Random { seed: u64 },
}

/// Initial positions distributed as `ρ(x, 0)`, sorted ascending.
pub fn sample_initial_positions(packet: &SpectralPacket, n: usize, scheme: SamplingScheme) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("n", "need at least one position"));
    }
    let mut levels: Vec<f64> = match scheme {
        SamplingScheme::Quantile => (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect(),
        SamplingScheme::Random { seed } => {
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            (0..n).map(|_| rng.random::<f64>()).collect()
        }
    };
    levels.sort_by(f64::total_cmp);
    let cdf = InitialCdf::new(packet)?;
    Ok(levels.iter().map(|&u| cdf.invert(u)).collect())
}

/// Cumulative distribution of `ρ(x, 0)` tabulated on a fine grid.
struct InitialCdf {
    start: f64,
    h: f64,
    density: Vec<f64>,
    cumulative: Vec<f64>,
}

impl InitialCdf {
    fn new(packet: &SpectralPacket) -> Result<Self> {
        let spec = packet.spec();
        // The initial packet is a smooth envelope left of the field; whatever
        // lies beyond x = 0 is below the leakage bound and is dropped.
        let (lo, hi) = (spec.x0 - 10.0 * spec.sigma0, (spec.x0 + 10.0 * spec.sigma0).min(0.0));
        let n = 40_000;
        let h = (hi - lo) / n as f64;
        let density = packet.slice(0.0).sample_density(lo, h, n + 1);
        let mut cumulative = vec![0.0; n + 1];
        for i in 1..=n {
            cumulative[i] = cumulative[i - 1] + 0.5 * h * (density[i - 1] + density[i]);
        }
        let total = cumulative[n];
        if !(total > 0.0) {
            return Err(invalid("packet", "initial density vanishes"));
        }
        for c in &mut cumulative {
            *c /= total;
        }
        Ok(InitialCdf { start: lo, h, density: density.iter().map(|d| d / total).collect(), cumulative })
    }

    fn invert(&self, u: f64) -> f64 {
        let i = self.cumulative.partition_point(|&c| c < u).clamp(1, self.cumulative.len() - 1) - 1;
        // Quadratic segment: C(x_i + s) = C_i + ρ_i s + (ρ_{i+1} - ρ_i) s²/(2h).
        let (c0, r0, r1) = (self.cumulative[i], self.density[i], self.density[i + 1]);
        let a = 0.5 * (r1 - r0) / self.h;
        let rem = u - c0;
        let s = if a.abs() * self.h < 1e-12 * r0.max(1e-300) {
            rem / r0
        } else {
            (2.0 * rem) / (r0 + (r0 * r0 + 4.0 * a * rem).max(0.0).sqrt())
        };
        self.start + i as f64 * self.h + s.clamp(0.0, self.h)
    }
}

/// `x_c(0)`: the point with probability `T²` to its right at `t = 0`.
pub fn bifurcation_start(packet: &SpectralPacket) -> Result<f64> {
    bifurcation_point(packet, 0.0)
}

fn check_bifurcation(t2: f64) -> Result<()> {
    const MARGIN: f64 = 1e-6;
    if t2 >= 1.0 - MARGIN {
        return Err(Error::NoBifurcation { transmission: t2, outcome: Outcome::Transmission });
    }
    if t2 <= MARGIN {
        return Err(Error::NoBifurcation { transmission: t2, outcome: Outcome::Reflection });
    }
    Ok(())
}

/// `x_c(t)` with `∫_{x_c}^∞ ρ(x,t) dx = T²`.
pub fn bifurcation_point(packet: &SpectralPacket, t: f64) -> Result<f64> {
    let t2 = packet.transmission_probability();
    check_bifurcation(t2)?;
    packet.slice(t).locate_from_right(t2, 1e-9)
}

/// The separating curve sampled on a time grid, plus the guidance-integrated
/// trajectory from its starting point as a cross-check.
#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationCurve {
    pub start: f64,
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub trajectory: Trajectory,
    /// Largest `|x_c(t) - x_traj(t)|` over the grid, m.
    pub max_deviation: f64,
}

/// Evaluates `x_c(t)` at `times` (each must lie in `[0, t_end]` of the
/// accompanying trajectory, which is integrated to the last grid time).
pub fn bifurcation_curve(packet: &SpectralPacket, times: &[f64], opts: &RkOptions) -> Result<BifurcationCurve> {
    check_bifurcation(packet.transmission_probability())?;
    if times.is_empty() || times.iter().any(|&t| t < 0.0) {
        return Err(invalid("times", "need a non-empty list of non-negative times"));
    }
    let start = bifurcation_start(packet)?;
    let positions = times.par_iter().map(|&t| bifurcation_point(packet, t)).collect::<Result<Vec<_>>>()?;
    let t_last = times.iter().cloned().fold(0.0, f64::max);
    let trajectory = if t_last > 0.0 {
        integrate_trajectory(packet, start, t_last, opts)?
    } else {
        Trajectory {
            initial: start,
            times: vec![0.0],
            positions: vec![start],
            classification: Classification::of(start, packet.length()),
            accepted_steps: 0,
            rejected_steps: 0,
        }
    };
    let max_deviation = times
        .iter()
        .zip(&positions)
        .map(|(&t, &xc)| (interpolate(&trajectory, t) - xc).abs())
        .fold(0.0, f64::max);
    Ok(BifurcationCurve { start, times: times.to_vec(), positions, trajectory, max_deviation })
}

/// Linear interpolation of a trajectory's samples.
pub fn interpolate(traj: &Trajectory, t: f64) -> f64 {
    let i = traj.times.partition_point(|&s| s < t);
    if i == 0 {
        return traj.positions[0];
    }
    if i >= traj.times.len() {
        return traj.final_position();
    }
    let (t0, t1) = (traj.times[i - 1], traj.times[i]);
    let w = (t - t0) / (t1 - t0);
    traj.positions[i - 1] * (1.0 - w) + traj.positions[i] * w
}

/// A set of trajectories with their resolved outcomes.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub trajectories: Vec<Trajectory>,
    /// Starting positions whose integration failed, with the reason.
    pub failures: Vec<(f64, Error)>,
    /// Final outcome per trajectory: paths still inside the field are
    /// assigned by their side of the bifurcation curve.
    pub outcomes: Vec<Classification>,
    /// How many outcomes came from the curve rather than the final position.
    pub resolved_by_curve: usize,
    /// `x_c(t_end)`, when a bifurcation exists.
    pub curve_end: Option<f64>,
}

impl Ensemble {
    pub fn transmitted_fraction(&self) -> f64 {
        if self.outcomes.is_empty() {
            return 0.0;
        }
        let n = self.outcomes.iter().filter(|&&c| c == Classification::Transmitted).count();
        n as f64 / self.outcomes.len() as f64
    }

    pub fn undecided(&self) -> usize {
        self.outcomes.iter().filter(|&&c| c == Classification::Undecided).count()
    }

    /// Whether the stored order of positions is the same at every sample
    /// index shared by all trajectories.
    pub fn preserves_order(&self) -> bool {
        let len = self.trajectories.iter().map(|t| t.positions.len()).min().unwrap_or(0);
        (0..len).all(|i| self.trajectories.windows(2).all(|w| w[0].positions[i] < w[1].positions[i]))
    }
}

/// Integrates every start concurrently. `starts` should be sorted.
pub fn integrate_ensemble(packet: &SpectralPacket, starts: &[f64], t_end: f64, opts: &RkOptions) -> Ensemble {
    let results: Vec<(f64, Result<Trajectory>)> =
        starts.par_iter().map(|&x0| (x0, integrate_trajectory(packet, x0, t_end, opts))).collect();
    let mut trajectories = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (x0, r) in results {
        match r {
            Ok(t) => trajectories.push(t),
            Err(e) => failures.push((x0, e)),
        }
    }
    let undecided = trajectories.iter().any(|t| t.classification == Classification::Undecided);
    let curve_end = if undecided { bifurcation_point(packet, t_end).ok() } else { None };
    let mut resolved_by_curve = 0;
    let outcomes = trajectories
        .iter()
        .map(|t| match (t.classification, curve_end) {
            (Classification::Undecided, Some(xc)) => {
                resolved_by_curve += 1;
                if t.final_position() > xc {
                    Classification::Transmitted
                } else {
                    Classification::Reflected
                }
            }
            (c, _) => c,
        })
        .collect();
    Ensemble { trajectories, failures, outcomes, resolved_by_curve, curve_end }
}
