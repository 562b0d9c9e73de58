//! Gaussian superposition of scattering states.
//!
//! `Ψ(x,t) = ∫dk ψ̃(k) Φ_k(x) e^{-iE_k t/ħ}` with
//! `ψ̃(k) = (2σ₀²/π)^{1/4} e^{-σ₀²(k-k₀)²} e^{-ikx₀}`, discretized by the
//! trapezoid rule on a uniform grid of positive wavenumbers. Each term is an
//! exact stationary solution, so the finite sum solves the time-dependent
//! equation exactly; only its initial condition is approximated.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate_adaptive, simpson};
use crate::scattering::{solve_matching, FieldSetup, ModeSet, Region, ScatteringSolution, SpinorPoint};
use crate::HBAR;

pub const DEFAULT_NODES: usize = 1024;
pub const DEFAULT_SPAN: f64 = 6.0;

/// Samples per shortest density oscillation for spatial Simpson sums.
const SAMPLES_PER_WAVE: f64 = 8.0;
/// Support window half-width in units of the instantaneous packet width.
const SUPPORT_WIDTHS: f64 = 8.0;
/// Sweeps re-seed their running exponentials this often.
const RESEED: usize = 32;

/// Initial Gaussian packet: mean wavenumber, spatial width, center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketSpec {
    pub k0: f64,
    pub sigma0: f64,
    pub x0: f64,
}

impl PacketSpec {
    pub fn new(k0: f64, sigma0: f64, x0: f64) -> Result<Self> {
        let spec = PacketSpec { k0, sigma0, x0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_velocity(mass: f64, v0: f64, sigma0: f64, x0: f64) -> Result<Self> {
        PacketSpec::new(mass * v0 / HBAR, sigma0, x0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(invalid("sigma0", "must be positive"));
        }
        if !(self.k0 > 0.0 && self.k0.is_finite()) {
            return Err(invalid("k0", "must be positive"));
        }
        if !(self.x0 < 0.0 && self.x0.is_finite()) {
            return Err(invalid("x0", "packet must start left of the field (x0 < 0)"));
        }
        let ratio = 2.0 * self.sigma0 * self.k0;
        if ratio <= 20.0 {
            return Err(invalid("sigma0", format!("k0 must exceed 20 spectral widths, got {ratio:.2}")));
        }
        let leak = self.initial_leakage_bound();
        if leak >= 1e-6 {
            return Err(invalid("x0", format!("initial probability right of the field is up to {leak:.2e}")));
        }
        Ok(())
    }

    /// Standard deviation of `|ψ̃(k)|²`.
    pub fn spectral_width(&self) -> f64 {
        0.5 / self.sigma0
    }

    /// Upper bound on `∫₀^∞ ρ(x,0) dx` from the Gaussian tail (Mills ratio).
    pub fn initial_leakage_bound(&self) -> f64 {
        let z = -self.x0 / self.sigma0;
        (-0.5 * z * z).exp() / (z * (2.0 * PI).sqrt())
    }

    /// `ψ̃(k)`.
    pub fn amplitude(&self, k: f64) -> Complex64 {
        let s2 = self.sigma0 * self.sigma0;
        let norm = (2.0 * s2 / PI).powf(0.25);
        let d = k - self.k0;
        Complex64::from_polar(norm * (-s2 * d * d).exp(), -k * self.x0)
    }

    /// `|ψ̃(k)|² = √(2σ₀²/π) e^{-2σ₀²(k-k₀)²}`.
    pub fn spectral_density(&self, k: f64) -> f64 {
        let s2 = self.sigma0 * self.sigma0;
        let d = k - self.k0;
        (2.0 * s2 / PI).sqrt() * (-2.0 * s2 * d * d).exp()
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    pub k: f64,
    /// `E_k / ħ`
    pub omega: f64,
    /// `ψ̃(k)` times the trapezoid weight.
    pub weight: Complex64,
    pub solution: ScatteringSolution,
    modes: [ModeSet; 3],
}

impl Node {
    pub(crate) fn modes(&self) -> &[ModeSet; 3] {
        &self.modes
    }
}

/// How `Q(x,t)` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresenceMethod {
    /// `∫_x^∞ ρ(x',t) dx'`
    Spatial,
    /// `∫_0^t J(x,t') dt'`
    Flux,
}

/// Discretized packet with cached scattering solutions. Immutable once built.
#[derive(Debug, Clone)]
pub struct SpectralPacket {
    setup: FieldSetup,
    spec: PacketSpec,
    nodes: Vec<Node>,
    dk: f64,
    span: f64,
    /// Largest density oscillation wavenumber per region.
    region_wavenumber: [f64; 3],
    fastest_velocity: f64,
}

impl SpectralPacket {
    /// Uniform grid over `k₀ ± span/(2σ₀)` with `n_nodes` nodes, scattering solved at each.
    pub fn build(setup: FieldSetup, spec: PacketSpec, n_nodes: usize, span: f64) -> Result<Self> {
        setup.validate()?;
        spec.validate()?;
        if n_nodes < 3 {
            return Err(invalid("n_nodes", "need at least three nodes"));
        }
        if !(span > 0.0 && span.is_finite()) {
            return Err(invalid("span", "must be positive"));
        }
        let half = span * spec.spectral_width();
        let k_min = spec.k0 - half;
        if k_min <= 0.0 {
            return Err(Error::NonPositiveGrid { k_min });
        }
        let dk = 2.0 * half / (n_nodes - 1) as f64;
        let nodes = (0..n_nodes)
            .into_par_iter()
            .map(|j| {
                let k = k_min + j as f64 * dk;
                let solution = solve_matching(&setup, k)?;
                let trap = if j == 0 || j + 1 == n_nodes { 0.5 } else { 1.0 };
                Ok(Node {
                    k,
                    omega: HBAR * k * k / (2.0 * setup.mass),
                    weight: spec.amplitude(k) * (trap * dk),
                    modes: solution.mode_sets(),
                    solution,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut region_wavenumber = [0.0_f64; 3];
        let (mut q_lo, mut q_hi) = (f64::INFINITY, 0.0_f64);
        for node in &nodes {
            let s = &node.solution;
            region_wavenumber[0] = region_wavenumber[0].max(2.0 * s.k.max(s.q.norm()));
            region_wavenumber[1] = region_wavenumber[1].max(2.0 * node.modes[1].max_wavenumber());
            q_lo = q_lo.min(s.q.re);
            q_hi = q_hi.max(s.q.re);
        }
        let k_max = nodes[n_nodes - 1].k;
        // Right of the field the channels do not interfere, so the density only
        // varies on the envelope scale set by the wavenumber spread.
        region_wavenumber[2] = (k_max - k_min).max(q_hi - q_lo) + 1.0 / spec.sigma0;
        let fastest_velocity = HBAR * k_max.max(q_hi) / setup.mass;
        Ok(SpectralPacket { setup, spec, nodes, dk, span, region_wavenumber, fastest_velocity })
    }

    pub fn with_defaults(setup: FieldSetup, spec: PacketSpec) -> Result<Self> {
        SpectralPacket::build(setup, spec, DEFAULT_NODES, DEFAULT_SPAN)
    }

    pub fn setup(&self) -> &FieldSetup {
        &self.setup
    }

    pub fn spec(&self) -> &PacketSpec {
        &self.spec
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn dk(&self) -> f64 {
        self.dk
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn length(&self) -> f64 {
        self.setup.length
    }

    pub fn group_velocity(&self) -> f64 {
        HBAR * self.spec.k0 / self.setup.mass
    }

    /// `Σ |ψ̃(k_j)|² Δk` with trapezoid weights.
    pub fn spectral_norm(&self) -> f64 {
        self.trapezoid_sum(|_| 1.0)
    }

    /// Gaussian-weighted stationary transmission `∫dk |ψ̃(k)|² [|T₁|² + (Re q/k)|T₂|²]`.
    pub fn transmission_probability(&self) -> f64 {
        self.trapezoid_sum(|s| s.transmission()).clamp(0.0, 1.0)
    }

    /// Gaussian-weighted stationary reflection, the complement of
    /// [`Self::transmission_probability`] up to grid truncation.
    pub fn reflection_probability(&self) -> f64 {
        self.trapezoid_sum(|s| s.reflection()).clamp(0.0, 1.0)
    }

    fn trapezoid_sum(&self, f: impl Fn(&ScatteringSolution) -> f64) -> f64 {
        let n = self.nodes.len();
        self.nodes
            .iter()
            .enumerate()
            .map(|(j, node)| {
                let trap = if j == 0 || j + 1 == n { 0.5 } else { 1.0 };
                trap * self.dk * self.spec.spectral_density(node.k) * f(&node.solution)
            })
            .sum()
    }

    /// Packet width at time `t` for free spreading.
    pub fn width_at(&self, t: f64) -> f64 {
        let s0 = self.spec.sigma0;
        let tau = HBAR * t / (2.0 * self.setup.mass * s0 * s0);
        s0 * (1.0 + tau * tau).sqrt()
    }

    /// Interval outside of which the density is below the 1e-8 tail budget.
    pub fn support(&self, t: f64) -> (f64, f64) {
        let pad = SUPPORT_WIDTHS * self.width_at(t);
        let travel = self.fastest_velocity * t;
        let x0 = self.spec.x0;
        let hi = (x0 + travel).max(0.0) + self.setup.length + pad;
        let lo = x0.min(-(x0 + travel)) - pad;
        (lo, hi)
    }

    pub fn slice(&self, t: f64) -> TimeSlice<'_> {
        let coeffs = self.nodes.iter().map(|n| n.weight * Complex64::from_polar(1.0, -n.omega * t)).collect();
        TimeSlice { packet: self, t, coeffs }
    }

    /// `Ψ(x,t)` and `∂ₓΨ(x,t)`.
    pub fn psi(&self, x: f64, t: f64) -> SpinorPoint {
        self.psi_in(Region::of(x, self.setup.length), x, t)
    }

    /// `Ψ(x,t)` from the closed form of `region`, also outside it: at the
    /// field edges this gives the one-sided limits.
    pub fn psi_in(&self, region: Region, x: f64, t: f64) -> SpinorPoint {
        let a = HBAR / (2.0 * self.setup.mass);
        let dk = self.dk;
        // Time phases e^{-iω_j t} with ω_j quadratic in j: second-order recurrence.
        let curvature = Complex64::from_polar(1.0, -2.0 * a * t * dk * dk);
        let mut phase = Complex64::default();
        let mut ratio = Complex64::default();
        self.accumulate(region, x, |j, node| {
            if j % RESEED == 0 {
                phase = Complex64::from_polar(1.0, -node.omega * t);
                ratio = Complex64::from_polar(1.0, -a * t * dk * (2.0 * node.k + dk));
            }
            let c = node.weight * phase;
            phase *= ratio;
            ratio *= curvature;
            c
        })
    }

    /// `Σ_j coeff(j) Φ_{k_j}(x)`. Where the region's first mode is the
    /// channel-1 wave `e^{ik_j(x-o)}`, it advances by recurrence over the
    /// uniform grid instead of a fresh exponential per node.
    fn accumulate(&self, region: Region, x: f64, mut coeff: impl FnMut(usize, &Node) -> Complex64) -> SpinorPoint {
        let l = self.setup.length;
        let ridx = region.index();
        let origin = if region == Region::Right { l } else { 0.0 };
        let uniform = region != Region::Inside || self.setup.is_free();
        let step = Complex64::from_polar(1.0, self.dk * (x - origin));
        let mut wave = Complex64::default();
        let mut acc = SpinorPoint::default();
        let mut e = [Complex64::default(); 4];
        for (j, node) in self.nodes.iter().enumerate() {
            let set = &node.modes[ridx];
            if uniform {
                if j % RESEED == 0 {
                    wave = Complex64::from_polar(1.0, node.k * (x - origin));
                }
                set.exponentials_from(x, wave, &mut e);
                wave *= step;
            } else {
                set.exponentials(x, &mut e);
            }
            set.combine(&e, coeff(j, node), &mut acc);
        }
        acc
    }

    pub fn density(&self, x: f64, t: f64) -> f64 {
        self.psi(x, t).density()
    }

    /// Probability current `(ħ/m) Im(Ψ†∂ₓΨ)`.
    pub fn current(&self, x: f64, t: f64) -> f64 {
        HBAR / self.setup.mass * self.psi(x, t).flux_kernel()
    }

    /// `J(x, i·dt)` for `i = 0..n`. Each node's spatial factor is fixed, so
    /// only the time phases advance, by recurrence between periodic reseeds.
    pub fn current_series(&self, x: f64, dt: f64, n: usize) -> Vec<f64> {
        let region = Region::of(x, self.setup.length).index();
        let states: Vec<SpinorPoint> = self
            .nodes
            .iter()
            .map(|node| {
                let set = &node.modes[region];
                let mut e = [Complex64::default(); 4];
                set.exponentials(x, &mut e);
                let mut p = SpinorPoint::default();
                set.combine(&e, node.weight, &mut p);
                p
            })
            .collect();
        let steps: Vec<Complex64> = self.nodes.iter().map(|n| Complex64::from_polar(1.0, -n.omega * dt)).collect();
        let scale = HBAR / self.setup.mass;
        let chunk = RESEED * 4;
        let mut out = vec![0.0; n];
        out.par_chunks_mut(chunk).enumerate().for_each(|(c, block)| {
            let mut phase = vec![Complex64::default(); states.len()];
            for (i, slot) in block.iter_mut().enumerate() {
                let step = c * chunk + i;
                let reseed = i % RESEED == 0;
                let t = step as f64 * dt;
                let mut acc = SpinorPoint::default();
                for (j, (state, node)) in states.iter().zip(&self.nodes).enumerate() {
                    if reseed {
                        phase[j] = Complex64::from_polar(1.0, -node.omega * t);
                    } else {
                        phase[j] *= steps[j];
                    }
                    let z = phase[j];
                    for ch in 0..2 {
                        acc.psi[ch] += z * state.psi[ch];
                        acc.dpsi[ch] += z * state.dpsi[ch];
                    }
                }
                *slot = scale * acc.flux_kernel();
            }
        });
        out
    }

    /// `∫_0^t J(x,t') dt'`.
    pub fn flux_through(&self, x: f64, t: f64, tol: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        let feature = self.spec.sigma0 / (4.0 * self.fastest_velocity);
        let panels = (t / feature).ceil().clamp(1.0, 1e6) as usize;
        integrate_adaptive(|s| self.current(x, s), 0.0, t, panels, tol)
    }

    /// Total probability right of `x` at time `t`.
    pub fn presence_probability(&self, x: f64, t: f64, method: PresenceMethod) -> Result<f64> {
        if t < 0.0 {
            return Err(invalid("t", "must be non-negative"));
        }
        match method {
            PresenceMethod::Spatial => {
                let slice = self.slice(t);
                let (lo, hi) = self.support(t);
                if x >= hi {
                    return Ok(0.0);
                }
                slice.integrate_density(x.max(lo), hi, 1e-9)
            }
            PresenceMethod::Flux => self.flux_through(x, t, 1e-8),
        }
    }

    /// `∫ρ(x,t) dx` over the support window.
    pub fn norm(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.support(t);
        self.slice(t).integrate_density(lo, hi, 1e-9)
    }
}

/// The packet's node coefficients frozen at one instant, for many spatial
/// evaluations.
#[derive(Debug, Clone)]
pub struct TimeSlice<'a> {
    packet: &'a SpectralPacket,
    t: f64,
    coeffs: Vec<Complex64>,
}

impl<'a> TimeSlice<'a> {
    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn psi(&self, x: f64) -> SpinorPoint {
        self.packet.accumulate(Region::of(x, self.packet.setup.length), x, |j, _| self.coeffs[j])
    }

    pub fn density(&self, x: f64) -> f64 {
        self.psi(x).density()
    }

    pub fn current(&self, x: f64) -> f64 {
        HBAR / self.packet.setup.mass * self.psi(x).flux_kernel()
    }

    /// Density at `a + i h` for `i = 0..n`, all points in one region (the
    /// region of the interval midpoint). Running exponentials replace most
    /// trigonometric calls.
    pub fn sample_density(&self, a: f64, h: f64, n: usize) -> Vec<f64> {
        let region = Region::of(a + 0.5 * h * (n.saturating_sub(1)) as f64, self.packet.setup.length);
        self.sample_density_in(region, a, h, n)
    }

    /// As [`TimeSlice::sample_density`] with the closed form chosen explicitly.
    pub fn sample_density_in(&self, region: Region, a: f64, h: f64, n: usize) -> Vec<f64> {
        let region = region.index();
        let nodes = &self.packet.nodes;
        let mut running: Vec<[Complex64; 4]> = vec![[Complex64::default(); 4]; nodes.len()];
        let steps: Vec<[Complex64; 4]> = nodes
            .iter()
            .map(|node| {
                let set = &node.modes[region];
                let mut s = [Complex64::default(); 4];
                for (m, mode) in set.modes[..set.len].iter().enumerate() {
                    s[m] = (Complex64::new(0.0, 1.0) * mode.kappa * h).exp();
                }
                s
            })
            .collect();
        let mut out = Vec::with_capacity(n);
        let mut e = [Complex64::default(); 4];
        for i in 0..n {
            let x = a + i as f64 * h;
            let reseed = i % RESEED == 0;
            let mut psi = [Complex64::default(); 2];
            for (j, node) in nodes.iter().enumerate() {
                let set = &node.modes[region];
                let run = &mut running[j];
                if reseed {
                    set.exponentials(x, run);
                } else {
                    for m in 0..set.len {
                        if let crate::scattering::Link::Own = set.modes[m].link {
                            run[m] *= steps[j][m];
                        }
                    }
                    for m in 0..set.len {
                        match set.modes[m].link {
                            crate::scattering::Link::Own => {}
                            crate::scattering::Link::Same(idx, f) => run[m] = run[idx] * f,
                            crate::scattering::Link::Conj(idx, f) => run[m] = run[idx].conj() * f,
                        }
                    }
                }
                e.copy_from_slice(run);
                let c = self.coeffs[j];
                for (mode, &em) in set.modes[..set.len].iter().zip(e.iter()) {
                    let w = c * em;
                    psi[0] += w * mode.amp[0];
                    psi[1] += w * mode.amp[1];
                }
            }
            out.push(psi[0].norm_sqr() + psi[1].norm_sqr());
        }
        out
    }

    /// Sub-intervals of `[a, b]` split at the field edges.
    fn pieces(&self, a: f64, b: f64) -> Vec<(f64, f64, usize)> {
        let l = self.packet.setup.length;
        let mut cuts = vec![a];
        for edge in [0.0, l] {
            if edge > a && edge < b {
                cuts.push(edge);
            }
        }
        cuts.push(b);
        cuts.windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| (w[0], w[1], Region::of(0.5 * (w[0] + w[1]), l).index()))
            .collect()
    }

    /// Simpson sum on one region piece with step halving until the Richardson
    /// estimate is below `tol`. Returns the samples, the step and the value.
    fn resolve_piece(&self, a: f64, b: f64, region: usize, tol: f64) -> Result<(Vec<f64>, f64, f64)> {
        let k = self.packet.region_wavenumber[region];
        let h0 = 2.0 * PI / (k * SAMPLES_PER_WAVE);
        let mut n = (((b - a) / h0).ceil() as usize).div_ceil(4).max(1) * 4;
        let mut last_err = f64::INFINITY;
        for _ in 0..4 {
            let h = (b - a) / n as f64;
            let samples = self.sample_density(a, h, n + 1);
            let fine = simpson(&samples, h);
            let coarse_samples: Vec<f64> = samples.iter().step_by(2).copied().collect();
            let coarse = simpson(&coarse_samples, 2.0 * h);
            let err = (fine - coarse).abs() / 15.0;
            if err <= tol {
                return Ok((samples, h, fine));
            }
            last_err = err;
            n *= 2;
        }
        Err(Error::QuadratureTolerance { tolerance: tol, achieved: last_err })
    }

    /// `∫_a^b ρ(x) dx`.
    pub fn integrate_density(&self, a: f64, b: f64, tol: f64) -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        let pieces = self.pieces(a, b);
        let share = tol / pieces.len() as f64;
        let mut total = 0.0;
        for (lo, hi, region) in pieces {
            total += self.resolve_piece(lo, hi, region, share)?.2;
        }
        Ok(total)
    }

    /// Finds `x` with `∫_x^∞ ρ = target`, to within `x_tol` metres.
    pub fn locate_from_right(&self, target: f64, x_tol: f64) -> Result<f64> {
        let (lo, hi) = self.packet.support(self.t);
        let l = self.packet.setup.length;
        let mut acc = 0.0;
        // Walk leftwards in chunks so the costly fringed region left of the
        // field is only sampled as far as needed.
        let mut right = hi;
        while right > lo {
            let region = Region::of(right - f64::EPSILON * right.abs().max(l), l);
            let floor = match region {
                Region::Right => l,
                Region::Inside => 0.0,
                Region::Left => lo,
            };
            let k = self.packet.region_wavenumber[region.index()];
            let chunk = 4096.0 * 2.0 * PI / (k * SAMPLES_PER_WAVE);
            let left = floor.max(right - chunk).max(lo);
            // Near the rounding floor of long Simpson sums; moves x by ~1e-10/ρ.
            let (samples, h, value) = self.resolve_piece(left, right, region.index(), 1e-10)?;
            if acc + value >= target {
                return self.refine_in_chunk(&samples, left, h, acc, target, x_tol);
            }
            acc += value;
            right = left;
        }
        Ok(lo)
    }

    fn refine_in_chunk(&self, samples: &[f64], a: f64, h: f64, acc: f64, target: f64, x_tol: f64) -> Result<f64> {
        // Cumulative Simpson from the right over sample pairs.
        let n = samples.len() - 1;
        let mut running = acc;
        let mut i = n;
        while i >= 2 {
            let pair = h / 3.0 * (samples[i - 2] + 4.0 * samples[i - 1] + samples[i]);
            if running + pair >= target {
                let (mut x_lo, mut x_hi) = (a + (i - 2) as f64 * h, a + i as f64 * h);
                let right_edge = x_hi;
                let mass_right = running;
                // Bisect with local Gauss-Kronrod integrals back to the pair edge.
                while x_hi - x_lo > x_tol {
                    let mid = 0.5 * (x_lo + x_hi);
                    let part = integrate_adaptive(|x| self.density(x), mid, right_edge, 1, 1e-14)?;
                    if mass_right + part >= target {
                        x_lo = mid;
                    } else {
                        x_hi = mid;
                    }
                }
                return Ok(0.5 * (x_lo + x_hi));
            }
            running += pair;
            i -= 2;
        }
        Ok(a)
    }
}
