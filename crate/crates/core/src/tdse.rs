//! Split-operator propagation of the two coupled channels on a uniform grid.
//!
//! An independent check on the spectral construction. Each step applies half
//! a kinetic step in momentum space, the exact 2×2 exponential of the local
//! internal Hamiltonian, and another half kinetic step. Consecutive kinetic
//! halves are fused when several steps run back to back.
//!
//! Optional absorbing layers at both ends remove outgoing probability and
//! record how much left through each side, so long runs fit a compact grid.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};
use crate::scattering::{FieldSetup, Region};
use crate::wavepacket::{PacketSpec, SpectralPacket};
use crate::HBAR;

/// Largest allowed phase per step, `dt · max(E_k, ħΩ, ħ|Δ|)/ħ`.
pub const PHASE_LIMIT: f64 = 0.1;
/// Phase per step used when `dt` is chosen automatically.
pub const DEFAULT_PHASE: f64 = 0.05;

/// Exponential of `-i dt [[0, g], [g*, -Δ]]` with `g = w (Ω/2) e^{iφ}`,
/// where `w ∈ [0, 1]` is the fraction of the grid cell covered by the field.
pub fn coupling_propagator(setup: &FieldSetup, weight: f64, dt: f64) -> [[Complex64; 2]; 2] {
    let g = Complex64::from_polar(0.5 * weight * setup.rabi, setup.phase);
    let half_delta = 0.5 * setup.detuning;
    let half_gen = (half_delta * half_delta + g.norm_sqr()).sqrt();
    let global = Complex64::from_polar(1.0, half_delta * dt);
    let (s, c) = (half_gen * dt).sin_cos();
    // sin(Ω'dt/2)/(Ω'/2), finite as Ω' → 0.
    let sinc = if half_gen * dt < 1e-8 { dt } else { s / half_gen };
    let i = Complex64::new(0.0, 1.0);
    [
        [global * (c - i * sinc * half_delta), global * (-i * sinc * g)],
        [global * (-i * sinc * g.conj()), global * (c + i * sinc * half_delta)],
    ]
}

/// Grid geometry and step policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    /// Width of the absorbing layer inside each end, m (0 disables).
    pub absorber: f64,
    /// Phase per step when `dt` is chosen automatically (below [`PHASE_LIMIT`]).
    pub phase_per_step: f64,
}

impl GridOptions {
    /// Grid covering `[lo, hi]` plus absorbers with spacing exactly `dx`;
    /// the point count is rounded up to a product of powers of 2 and 3 and
    /// the extra room split between both ends.
    pub fn covering(lo: f64, hi: f64, absorber: f64, dx: f64) -> GridOptions {
        let needed = ((hi - lo + 2.0 * absorber) / dx).ceil().max(16.0) as usize;
        let n_points = smooth_size(needed);
        let pad = 0.5 * (n_points as f64 * dx - (hi - lo + 2.0 * absorber));
        let x_min = lo - absorber - pad;
        GridOptions { x_min, x_max: x_min + n_points as f64 * dx, n_points, absorber, phase_per_step: DEFAULT_PHASE }
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_points as f64
    }
}

/// Wavefunction samples of both channels at `x_j = x_min + j dx`.
#[derive(Clone)]
pub struct GridState {
    setup: FieldSetup,
    options: GridOptions,
    dx: f64,
    pub t: f64,
    pub psi: [Vec<Complex64>; 2],
    /// Probability removed by the left and right absorbers.
    pub absorbed: [f64; 2],
    /// Highest phase rate of the scenario, rad/s.
    rate: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    cache: Option<StepCache>,
}

impl std::fmt::Debug for GridState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridState")
            .field("options", &self.options)
            .field("t", &self.t)
            .field("absorbed", &self.absorbed)
            .finish()
    }
}

/// Per-`dt` propagator pieces.
#[derive(Clone)]
struct StepCache {
    dt: f64,
    /// Kinetic phase for a full step, FFT normalization folded in.
    full: Vec<Complex64>,
    half: Vec<Complex64>,
    /// 2×2 blocks for points touched by the field, by index.
    coupled: Vec<(usize, [[Complex64; 2]; 2])>,
    /// Channel-2 phase outside the field.
    detuned: Complex64,
    /// Absorber mask per index (1 outside the layers).
    mask: Vec<f64>,
}

impl GridState {
    /// Free Gaussian in channel 1, empty channel 2.
    pub fn init(setup: FieldSetup, spec: PacketSpec, options: GridOptions) -> Result<GridState> {
        setup.validate()?;
        spec.validate()?;
        if options.n_points < 16 || !(options.x_max > options.x_min) {
            return Err(invalid("grid", "need x_max > x_min and at least 16 points"));
        }
        if !(options.absorber >= 0.0 && 2.0 * options.absorber < options.x_max - options.x_min) {
            return Err(invalid("absorber", "layers must fit inside the domain"));
        }
        let (need_min, need_max) = (spec.x0 - 8.0 * spec.sigma0, setup.length);
        let (lo, hi) = (options.x_min + options.absorber, options.x_max - options.absorber);
        if lo > need_min || hi < need_max {
            return Err(Error::DomainTooSmall { x_min: lo, x_max: hi, need_min, need_max });
        }
        let n = options.n_points;
        let dx = options.dx();
        let norm = (2.0 * PI * spec.sigma0 * spec.sigma0).powf(-0.25);
        let channel1 = (0..n)
            .map(|j| {
                let d = options.x_min + j as f64 * dx - spec.x0;
                Complex64::from_polar(norm * (-d * d / (4.0 * spec.sigma0 * spec.sigma0)).exp(), spec.k0 * d)
            })
            .collect();
        let kinetic_rate = HBAR * spec.k0 * spec.k0 / (2.0 * setup.mass);
        let rate = kinetic_rate.max(setup.rabi).max(setup.detuning.abs());
        let mut planner = FftPlanner::new();
        Ok(GridState {
            setup,
            options,
            dx,
            t: 0.0,
            psi: [channel1, vec![Complex64::default(); n]],
            absorbed: [0.0; 2],
            rate,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            cache: None,
        })
    }

    /// Copies the state onto a new grid (same spacing), multiplying by a
    /// smooth taper near the new ends. Probability outside the new interior is
    /// booked as absorbed on its side.
    pub fn regrid(&self, options: GridOptions) -> Result<GridState> {
        let mut next = GridState::init_empty(self.setup, options, self.rate)?;
        if (next.dx - self.dx).abs() > 1e-9 * self.dx {
            return Err(invalid("grid", "regridding keeps the spacing"));
        }
        next.t = self.t;
        next.absorbed = self.absorbed;
        let (lo, hi) = (options.x_min + options.absorber, options.x_max - options.absorber);
        let taper = options.absorber.max(self.dx);
        for j in 0..self.len() {
            let x = self.x(j);
            let rho = self.density_at(j);
            let w = if x < lo {
                smooth_step((x - (lo - taper)) / taper)
            } else if x > hi {
                smooth_step(((hi + taper) - x) / taper)
            } else {
                1.0
            };
            let side = usize::from(x > 0.5 * (lo + hi));
            self.absorbed_into(&mut next, j, w, rho, side);
        }
        Ok(next)
    }

    /// Regrids onto `[-margin, l + margin]` plus absorbers of the given
    /// width, keeping the alignment of the current points. The result has
    /// spacing `coarsen · dx`.
    pub fn compact(&self, margin: f64, absorber: f64, coarsen: usize) -> Result<GridState> {
        if coarsen == 0 {
            return Err(invalid("coarsen", "factor must be at least 1"));
        }
        let l = self.setup.length;
        let dx = self.dx;
        let wide = coarsen as f64 * dx;
        let n = smooth_size(((l + 2.0 * margin + 2.0 * absorber) / wide).ceil() as usize) * coarsen;
        let width = n as f64 * dx;
        let target = 0.5 * l - 0.5 * width;
        let shift = ((target - self.options.x_min) / dx).round();
        let x_min = self.options.x_min + shift * dx;
        let options = GridOptions { x_min, x_max: x_min + width, n_points: n, absorber, ..self.options };
        let fine = self.regrid(options)?;
        if coarsen == 1 {
            Ok(fine)
        } else {
            fine.decimate(coarsen)
        }
    }

    /// Keeps every `factor`-th point. Exact for states band-limited below
    /// the coarse Nyquist wavenumber.
    pub fn decimate(&self, factor: usize) -> Result<GridState> {
        if factor == 0 || self.len() % factor != 0 {
            return Err(invalid("decimation", "factor must divide the point count"));
        }
        let options = GridOptions { n_points: self.len() / factor, ..self.options };
        let mut next = GridState::init_empty(self.setup, options, self.rate)?;
        next.t = self.t;
        next.absorbed = self.absorbed;
        for c in 0..2 {
            next.psi[c] = self.psi[c].iter().step_by(factor).copied().collect();
        }
        Ok(next)
    }

    fn absorbed_into(&self, next: &mut GridState, j: usize, w: f64, rho: f64, side: usize) {
        let x = self.x(j);
        let idx = ((x - next.options.x_min) / next.dx).round();
        let kept = if w > 0.0 && idx >= 0.0 && (idx as usize) < next.len() {
            let i = idx as usize;
            next.psi[0][i] = self.psi[0][j] * w;
            next.psi[1][i] = self.psi[1][j] * w;
            w * w
        } else {
            0.0
        };
        next.absorbed[side] += (1.0 - kept) * rho * self.dx;
    }

    fn init_empty(setup: FieldSetup, options: GridOptions, rate: f64) -> Result<GridState> {
        let n = options.n_points;
        if n < 16 || !(options.x_max > options.x_min) {
            return Err(invalid("grid", "need x_max > x_min and at least 16 points"));
        }
        let mut planner = FftPlanner::new();
        Ok(GridState {
            setup,
            options,
            dx: options.dx(),
            t: 0.0,
            psi: [vec![Complex64::default(); n], vec![Complex64::default(); n]],
            absorbed: [0.0; 2],
            rate,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            cache: None,
        })
    }

    pub fn options(&self) -> &GridOptions {
        &self.options
    }

    pub fn len(&self) -> usize {
        self.options.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.options.n_points == 0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self, j: usize) -> f64 {
        self.options.x_min + j as f64 * self.dx
    }

    pub fn density_at(&self, j: usize) -> f64 {
        self.psi[0][j].norm_sqr() + self.psi[1][j].norm_sqr()
    }

    pub fn density(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.density_at(j)).collect()
    }

    /// `Σ ρ_j dx` over the whole grid.
    pub fn norm(&self) -> f64 {
        self.density().iter().sum::<f64>() * self.dx
    }

    /// `Σ |ψ₂|² dx`.
    pub fn excited_population(&self) -> f64 {
        self.psi[1].iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dx
    }

    /// Probability on grid points with `x > a`.
    pub fn probability_right_of(&self, a: f64) -> f64 {
        (0..self.len()).filter(|&j| self.x(j) > a).map(|j| self.density_at(j)).sum::<f64>() * self.dx
    }

    /// Transmitted probability so far: absorbed on the right plus what lies beyond the field.
    pub fn transmitted(&self) -> f64 {
        self.absorbed[1] + self.probability_right_of(self.setup.length)
    }

    /// Probability within `cells` grid points of either end.
    pub fn edge_probability(&self, cells: usize) -> f64 {
        let n = self.len();
        let cells = cells.min(n / 2);
        (0..cells).chain(n - cells..n).map(|j| self.density_at(j)).sum::<f64>() * self.dx
    }

    /// `dt` giving the configured phase per step.
    pub fn default_dt(&self) -> f64 {
        self.options.phase_per_step / self.rate
    }

    pub fn check_dt(&self, dt: f64) -> Result<()> {
        let phase = dt * self.rate;
        if !(dt > 0.0) || phase >= PHASE_LIMIT {
            return Err(Error::TimeStepTooLarge { dt, phase, limit: PHASE_LIMIT });
        }
        Ok(())
    }

    fn prepare(&mut self, dt: f64) {
        if self.cache.as_ref().is_some_and(|c| c.dt == dt) {
            return;
        }
        let n = self.len();
        let dk = 2.0 * PI / (n as f64 * self.dx);
        let a = HBAR / (2.0 * self.setup.mass);
        let scale = 1.0 / n as f64;
        let mut full = Vec::with_capacity(n);
        let mut half = Vec::with_capacity(n);
        for j in 0..n {
            let m = if j < n.div_ceil(2) { j as f64 } else { j as f64 - n as f64 };
            let k = m * dk;
            let w = a * k * k;
            full.push(Complex64::from_polar(scale, -w * dt));
            half.push(Complex64::from_polar(scale, -0.5 * w * dt));
        }
        let l = self.setup.length;
        let coupled = (0..n)
            .filter_map(|j| {
                let x = self.x(j);
                let lo = (x - 0.5 * self.dx).max(0.0);
                let hi = (x + 0.5 * self.dx).min(l);
                let weight = ((hi - lo) / self.dx).clamp(0.0, 1.0);
                (weight > 0.0).then(|| (j, coupling_propagator(&self.setup, weight, dt)))
            })
            .collect();
        let (lo, hi) = (self.options.x_min + self.options.absorber, self.options.x_max - self.options.absorber);
        let width = self.options.absorber;
        // Quadratic ramp: integrated over a crossing at half the packet speed
        // the attenuation reaches e^{-20}.
        let speed = 0.5 * HBAR * (self.rate / a).sqrt() / self.setup.mass;
        let gamma = if width > 0.0 { 60.0 * speed / width } else { 0.0 };
        let mask = (0..n)
            .map(|j| {
                let x = self.x(j);
                let depth = if x < lo {
                    (lo - x) / width
                } else if x > hi {
                    (x - hi) / width
                } else {
                    0.0
                };
                (-gamma * dt * depth * depth).exp()
            })
            .collect();
        self.cache = Some(StepCache {
            dt,
            full,
            half,
            coupled,
            detuned: Complex64::from_polar(1.0, self.setup.detuning * dt),
            mask,
        });
    }

    /// One unitary step (non-unitary only through the absorbers).
    pub fn step(&mut self, dt: f64) -> Result<()> {
        self.advance(1, dt)
    }

    /// `n` steps with the kinetic half steps between them fused.
    pub fn advance(&mut self, n: usize, dt: f64) -> Result<()> {
        if n == 0 {
            return Ok(());
        }
        self.check_dt(dt)?;
        self.prepare(dt);
        let cache = self.cache.take().expect("prepared");
        let mut scratch = vec![Complex64::default(); self.forward.get_inplace_scratch_len()];
        let active = if self.setup.is_free() && self.setup.detuning == 0.0 && self.excited_population() == 0.0 {
            1
        } else {
            2
        };
        self.kinetic(&cache.half, active, &mut scratch);
        for i in 0..n {
            self.potential(&cache, active);
            let phases = if i + 1 == n { &cache.half } else { &cache.full };
            self.kinetic(phases, active, &mut scratch);
        }
        self.t += n as f64 * dt;
        self.cache = Some(cache);
        Ok(())
    }

    fn kinetic(&mut self, phases: &[Complex64], active: usize, scratch: &mut [Complex64]) {
        for channel in self.psi.iter_mut().take(active) {
            self.forward.process_with_scratch(channel, scratch);
            for (z, p) in channel.iter_mut().zip(phases) {
                *z *= p;
            }
            self.inverse.process_with_scratch(channel, scratch);
        }
    }

    fn potential(&mut self, cache: &StepCache, active: usize) {
        if active == 2 {
            // Outside the field only channel 2 picks up the detuning phase;
            // field points are overwritten below.
            if cache.detuned != Complex64::new(1.0, 0.0) {
                for z in self.psi[1].iter_mut() {
                    *z *= cache.detuned;
                }
            }
            for &(j, u) in &cache.coupled {
                let unphase = cache.detuned.conj();
                let (a, b) = (self.psi[0][j], self.psi[1][j] * unphase);
                self.psi[0][j] = u[0][0] * a + u[0][1] * b;
                self.psi[1][j] = u[1][0] * a + u[1][1] * b;
            }
        }
        if self.options.absorber > 0.0 {
            let mid = 0.5 * (self.options.x_min + self.options.x_max);
            for (j, &m) in cache.mask.iter().enumerate() {
                if m < 1.0 {
                    let before = self.density_at(j);
                    self.psi[0][j] *= m;
                    self.psi[1][j] *= m;
                    let side = usize::from(self.x(j) > mid);
                    self.absorbed[side] += before * (1.0 - m * m) * self.dx;
                }
            }
        }
    }

    /// Propagates to `t_target` with steps of at most `dt`.
    pub fn propagate_to(&mut self, t_target: f64, dt: f64) -> Result<()> {
        let remaining = t_target - self.t;
        if remaining <= 0.0 {
            return Ok(());
        }
        let n = (remaining / dt).ceil() as usize;
        self.advance(n, remaining / n as f64)
    }
}

/// Smallest `2^a 3^b >= n`, sizes the FFT handles efficiently.
pub fn smooth_size(n: usize) -> usize {
    let mut best = n.next_power_of_two();
    let mut three = 1;
    while three < best {
        let mut m = three;
        while m < n {
            m *= 2;
        }
        best = best.min(m);
        three *= 3;
    }
    best
}

fn smooth_step(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    (0.5 - 0.5 * (PI * s).cos()).sqrt()
}

/// Grid against spectral solution at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralComparison {
    pub t: f64,
    /// `‖ρ_grid - ρ_spectral‖₂ / ‖ρ_spectral‖₂` over the grid interior.
    pub l2_relative: f64,
    /// Grid transmitted probability (absorbed right plus beyond `l`).
    pub grid_transmission: f64,
    pub spectral_transmission: f64,
    /// Grid probability still in `[0, l]`.
    pub inside: f64,
}

/// Compares densities on the grid points between the absorbers.
pub fn compare_with_spectral(state: &GridState, packet: &SpectralPacket) -> SpectralComparison {
    let slice = packet.slice(state.t);
    let l = packet.length();
    let opts = state.options();
    let (lo, hi) = (opts.x_min + opts.absorber, opts.x_max - opts.absorber);
    let indices: Vec<usize> = (0..state.len()).filter(|&j| state.x(j) >= lo && state.x(j) <= hi).collect();
    // Spectral density in runs of consecutive points sharing a region.
    let mut spectral = Vec::with_capacity(indices.len());
    let mut start = 0;
    while start < indices.len() {
        let region = Region::of(state.x(indices[start]), l);
        let mut end = start + 1;
        while end < indices.len() && Region::of(state.x(indices[end]), l) == region {
            end += 1;
        }
        spectral.extend(slice.sample_density_in(region, state.x(indices[start]), state.dx(), end - start));
        start = end;
    }
    let (mut diff, mut reference) = (0.0, 0.0);
    for (&j, &s) in indices.iter().zip(&spectral) {
        let g = state.density_at(j);
        diff += (g - s) * (g - s);
        reference += s * s;
    }
    let inside = (0..state.len())
        .filter(|&j| (0.0..=l).contains(&state.x(j)))
        .map(|j| state.density_at(j))
        .sum::<f64>()
        * state.dx();
    SpectralComparison {
        t: state.t,
        l2_relative: (diff / reference).sqrt(),
        grid_transmission: state.transmitted(),
        spectral_transmission: packet.transmission_probability(),
        inside,
    }
}

/// Settings of the two-phase grid check against the spectral packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Grid spacing up to the snapshot, m.
    pub dx: f64,
    /// Spacing multiplier after the snapshot.
    pub coarsen: usize,
    /// Absorbing layer width, m.
    pub absorber: f64,
    /// Time of the density comparison, s.
    pub snapshot: f64,
    /// Time at which the transmitted probability is read, s.
    pub late: f64,
    /// Free space kept on each side of the field after the snapshot, m.
    pub margin: f64,
    pub phase_per_step: f64,
    /// Phase per step after the snapshot.
    pub late_phase_per_step: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            dx: 1e-8,
            coarsen: 2,
            absorber: 20e-6,
            snapshot: 0.0297,
            late: 0.5,
            margin: 10e-6,
            phase_per_step: DEFAULT_PHASE,
            late_phase_per_step: 0.09,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport {
    pub snapshot: SpectralComparison,
    pub late: SpectralComparison,
    pub wide_points: usize,
    pub compact_points: usize,
    pub dt: f64,
    pub late_dt: f64,
    /// Largest `|norm + absorbed - 1|` seen at the checkpoints.
    pub conservation_error: f64,
}

/// Propagates the packet's initial state on a grid wide enough to hold the
/// whole packet at the snapshot time, compares densities there, then moves to
/// a compact grid around the field and runs to the late time.
pub fn oracle_check(packet: &SpectralPacket, opts: &OracleOptions) -> Result<OracleReport> {
    if !(opts.late >= opts.snapshot && opts.snapshot > 0.0) {
        return Err(invalid("oracle times", "need 0 < snapshot <= late"));
    }
    let (lo, hi) = packet.support(opts.snapshot);
    let mut grid_opts = GridOptions::covering(lo, hi, opts.absorber, opts.dx);
    grid_opts.phase_per_step = opts.phase_per_step;
    let mut state = GridState::init(*packet.setup(), *packet.spec(), grid_opts)?;
    let dt = state.default_dt();
    let conservation = |s: &GridState| (s.norm() + s.absorbed[0] + s.absorbed[1] - 1.0).abs();
    state.propagate_to(opts.snapshot, dt)?;
    let snapshot = compare_with_spectral(&state, packet);
    let mut worst = conservation(&state);
    let wide_points = state.len();
    let mut compact = state.compact(opts.margin, opts.absorber, opts.coarsen)?;
    drop(state);
    worst = worst.max(conservation(&compact));
    compact.options.phase_per_step = opts.late_phase_per_step;
    let late_dt = compact.default_dt();
    compact.propagate_to(opts.late, late_dt)?;
    worst = worst.max(conservation(&compact));
    let late = compare_with_spectral(&compact, packet);
    Ok(OracleReport { snapshot, late, wide_points, compact_points: compact.len(), dt, late_dt, conservation_error: worst })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MASS: f64 = 2.2e-25;

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(16560), 17496);
        assert_eq!(smooth_size(4096), 4096);
        assert_eq!(smooth_size(4097), 4374);
        assert_eq!(smooth_size(17), 18);
    }

    #[test]
    fn rabi_populations() {
        let setup = FieldSetup::new(MASS, 3.0e4, 1.2e5, 0.7, 1e-4).unwrap();
        let dt = 2e-7;
        let u = coupling_propagator(&setup, 1.0, dt);
        let mut c = [Complex64::new(1.0, 0.0), Complex64::default()];
        let gen = setup.detuning.hypot(setup.rabi);
        for n in 1..=2000 {
            c = [u[0][0] * c[0] + u[0][1] * c[1], u[1][0] * c[0] + u[1][1] * c[1]];
            let t = n as f64 * dt;
            let expected = (setup.rabi / gen).powi(2) * (0.5 * gen * t).sin().powi(2);
            assert!((c[1].norm_sqr() - expected).abs() < 1e-10, "n={n}");
            assert!((c[0].norm_sqr() + c[1].norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn half_weight_is_half_coupling() {
        let setup = FieldSetup::new(MASS, 0.0, 2.0e5, 0.0, 1e-4).unwrap();
        let half = FieldSetup { rabi: 1.0e5, ..setup };
        let a = coupling_propagator(&setup, 0.5, 1e-6);
        let b = coupling_propagator(&half, 1.0, 1e-6);
        for r in 0..2 {
            for c in 0..2 {
                assert!((a[r][c] - b[r][c]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn coarse_steps_are_rejected() {
        let setup = FieldSetup::new(MASS, 0.0, 2.0e5, 0.0, 1e-4).unwrap();
        let spec = PacketSpec::from_velocity(MASS, 0.01, 20e-6, -120.4e-6).unwrap();
        let opts = GridOptions::covering(-300e-6, 150e-6, 0.0, 1e-7);
        let mut g = GridState::init(setup, spec, opts).unwrap();
        assert!(matches!(g.step(1e-6), Err(Error::TimeStepTooLarge { .. })));
        assert!(g.step(g.default_dt()).is_ok());
    }

    #[test]
    fn domain_must_hold_packet() {
        let setup = FieldSetup::new(MASS, 0.0, 2.0e5, 0.0, 1e-4).unwrap();
        let spec = PacketSpec::from_velocity(MASS, 0.01, 20e-6, -120.4e-6).unwrap();
        let opts = GridOptions::covering(-200e-6, 150e-6, 0.0, 1e-7);
        assert!(matches!(GridState::init(setup, spec, opts), Err(Error::DomainTooSmall { .. })));
    }

    fn free_gaussian(spec: &PacketSpec, x: f64, t: f64) -> Complex64 {
        let s2 = spec.sigma0 * spec.sigma0;
        let i = Complex64::new(0.0, 1.0);
        let spread = Complex64::new(1.0, HBAR * t / (2.0 * MASS * s2));
        let v = HBAR * spec.k0 / MASS;
        let d = x - spec.x0 - v * t;
        let phase = spec.k0 * (x - spec.x0) - 0.5 * HBAR * spec.k0 * spec.k0 * t / MASS;
        (2.0 * PI * s2).powf(-0.25) / spread.sqrt() * (-d * d / (4.0 * s2 * spread) + i * phase).exp()
    }

    #[test]
    fn free_spreading_matches_closed_form() {
        let setup = FieldSetup::new(MASS, 0.0, 0.0, 0.0, 1e-6).unwrap();
        let spec = PacketSpec::from_velocity(MASS, 0.01, 1e-6, -20e-6).unwrap();
        let mut g = GridState::init(setup, spec, GridOptions::covering(-40e-6, 30e-6, 0.0, 2e-8)).unwrap();
        let dt = g.default_dt();
        g.advance(1000, dt).unwrap();
        let peak = free_gaussian(&spec, spec.x0 + HBAR * spec.k0 * g.t / MASS, g.t).norm();
        let worst = (0..g.len()).map(|j| (g.psi[0][j] - free_gaussian(&spec, g.x(j), g.t)).norm()).fold(0.0, f64::max);
        assert!(worst / peak < 1e-6, "{worst:e}");
        assert!(g.psi[1].iter().all(|z| *z == Complex64::default()));
    }

    #[test]
    fn unitary_steps_keep_norm() {
        let setup = FieldSetup::new(MASS, 5.0e4, 2.0e5, 0.3, 5e-6).unwrap();
        let spec = PacketSpec::from_velocity(MASS, 0.01, 2e-6, -12e-6).unwrap();
        let mut g = GridState::init(setup, spec, GridOptions::covering(-30e-6, 25e-6, 0.0, 2e-8)).unwrap();
        // Recentre inside the field so the coupling acts from the first step.
        let shift = (14e-6 / g.dx()).round() as usize;
        g.psi[0].rotate_right(shift);
        let dt = g.default_dt();
        let mut last = g.norm();
        assert!((last - 1.0).abs() < 1e-10);
        for _ in 0..600 {
            g.step(dt).unwrap();
            let now = g.norm();
            assert!((now - last).abs() < 1e-10);
            last = now;
        }
        assert!(g.excited_population() > 1e-3);
    }

    #[test]
    fn detuning_alone_leaves_channel_two_empty() {
        let setup = FieldSetup::new(MASS, 8.0e4, 0.0, 0.0, 1e-6).unwrap();
        let spec = PacketSpec::from_velocity(MASS, 0.01, 1e-6, -20e-6).unwrap();
        let mut g = GridState::init(setup, spec, GridOptions::covering(-40e-6, 30e-6, 0.0, 5e-8)).unwrap();
        let dt = g.default_dt();
        g.advance(200, dt).unwrap();
        assert_eq!(g.excited_population(), 0.0);
    }

    #[test]
    fn decimating_a_smooth_state_keeps_its_norm() {
        let setup = FieldSetup::new(MASS, 0.0, 0.0, 0.0, 1e-6).unwrap();
        let spec = PacketSpec::from_velocity(MASS, 0.01, 2e-6, -20e-6).unwrap();
        let g = GridState::init(setup, spec, GridOptions::covering(-40e-6, 30e-6, 0.0, 1e-8)).unwrap();
        let c = g.decimate(2).unwrap();
        assert_eq!(c.len() * 2, g.len());
        assert!((c.dx() - 2.0 * g.dx()).abs() < 1e-20);
        assert!((c.norm() - 1.0).abs() < 1e-10);
        assert!(g.decimate(7).is_err());
    }
}
