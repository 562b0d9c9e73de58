//! Stationary two-channel scattering off a uniform field slab.
//!
//! Inside `0 <= x <= l` the internal Hamiltonian is diagonal in the dressed
//! basis `|1> + c±|2>` with eigenvalues `ħλ±`; each dressed component moves
//! freely with wavenumber `k±`. Outside, channel 1 has wavenumber `k` and
//! channel 2 has `q`, shifted by the detuning. Continuity of both spinor
//! components and their derivatives at the two edges gives eight linear
//! equations that are solved directly per `k`.

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::HBAR;

const I: Complex64 = Complex64::new(0.0, 1.0);
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Physical scenario: atom mass plus the field's detuning, Rabi frequency,
/// phase and length. Frequencies are angular (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSetup {
    pub mass: f64,
    pub detuning: f64,
    pub rabi: f64,
    pub phase: f64,
    pub length: f64,
}

impl FieldSetup {
    pub fn new(mass: f64, detuning: f64, rabi: f64, phase: f64, length: f64) -> Result<Self> {
        let setup = FieldSetup { mass, detuning, rabi, phase, length };
        setup.validate()?;
        Ok(setup)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(invalid("mass", format!("must be positive, got {}", self.mass)));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(invalid("length", format!("must be positive, got {}", self.length)));
        }
        if !(self.rabi >= 0.0 && self.rabi.is_finite()) {
            return Err(invalid("rabi", format!("must be non-negative, got {}", self.rabi)));
        }
        if !self.detuning.is_finite() {
            return Err(invalid("detuning", "must be finite"));
        }
        if !self.phase.is_finite() {
            return Err(invalid("phase", "must be finite"));
        }
        Ok(())
    }

    /// Rabi frequency of a pulse whose area over the classical transit time
    /// `l / v0` is `(n + 1/2)π`.
    pub fn pulse_rabi(n: u32, velocity: f64, length: f64) -> f64 {
        (n as f64 + 0.5) * std::f64::consts::PI * velocity / length
    }

    pub fn is_free(&self) -> bool {
        self.rabi == 0.0
    }

    /// `2m/ħ`, the factor converting an angular frequency into a squared wavenumber.
    fn freq_to_k2(&self) -> f64 {
        2.0 * self.mass / HBAR
    }
}

/// Dressed eigenvalues and the unnormalized dressed spinors `(1, c±)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressedData {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub generalized_rabi: f64,
    pub c_plus: Complex64,
    pub c_minus: Complex64,
}

pub fn dressed_decomposition(setup: &FieldSetup) -> Result<DressedData> {
    let (delta, rabi) = (setup.detuning, setup.rabi);
    if rabi == 0.0 {
        return Err(Error::DegenerateCoupling);
    }
    let generalized = delta.hypot(rabi);
    // Take the root without cancellation first, then use λ₊λ₋ = −Ω²/4.
    let (lambda_plus, lambda_minus) = if delta >= 0.0 {
        let minus = -0.5 * (delta + generalized);
        (-0.25 * rabi * rabi / minus, minus)
    } else {
        let plus = 0.5 * (generalized - delta);
        (plus, -0.25 * rabi * rabi / plus)
    };
    let rotation = Complex64::from_polar(1.0, -setup.phase);
    Ok(DressedData {
        lambda_plus,
        lambda_minus,
        generalized_rabi: generalized,
        c_plus: rotation * (2.0 * lambda_plus / rabi),
        c_minus: rotation * (2.0 * lambda_minus / rabi),
    })
}

/// Square root of a real radicand on the bounded branch: real and
/// non-negative, or purely imaginary with positive imaginary part.
pub fn branch_sqrt(radicand: f64) -> Complex64 {
    if radicand >= 0.0 {
        Complex64::new(radicand.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-radicand).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelWavenumbers {
    pub q: Complex64,
    pub k_plus: Complex64,
    pub k_minus: Complex64,
}

/// Exterior channel-2 wavenumber `q` and the dressed interior wavenumbers
/// `k±` at incident wavenumber `k`. Without coupling the dressed channels
/// coincide with the bare ones, so `k+ = k` and `k- = q`.
pub fn channel_wavenumbers(setup: &FieldSetup, k: f64) -> ChannelWavenumbers {
    let scale = setup.freq_to_k2();
    let q = branch_sqrt(k * k + scale * setup.detuning);
    match dressed_decomposition(setup) {
        Ok(d) => ChannelWavenumbers {
            q,
            k_plus: branch_sqrt(k * k - scale * d.lambda_plus),
            k_minus: branch_sqrt(k * k - scale * d.lambda_minus),
        },
        Err(_) => ChannelWavenumbers { q, k_plus: Complex64::new(k, 0.0), k_minus: q },
    }
}

/// Spinor value and x-derivative of a stationary state (or of a packet).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpinorPoint {
    pub psi: [Complex64; 2],
    pub dpsi: [Complex64; 2],
}

impl SpinorPoint {
    pub fn density(&self) -> f64 {
        self.psi[0].norm_sqr() + self.psi[1].norm_sqr()
    }

    /// `Im(ψ†∂ψ)`; multiply by `ħ/m` for the probability current.
    pub fn flux_kernel(&self) -> f64 {
        (self.psi[0].conj() * self.dpsi[0] + self.psi[1].conj() * self.dpsi[1]).im
    }
}

/// Interior representation of a scattering state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Interior {
    /// No coupling: channel 1 propagates freely, channel 2 is empty.
    Free,
    /// `ψ = Σ± (A± e^{ik±x} + B± e^{-ik±(x-l)}) (1, c±)`.
    Dressed {
        c_plus: Complex64,
        c_minus: Complex64,
        a_plus: Complex64,
        b_plus: Complex64,
        a_minus: Complex64,
        b_minus: Complex64,
    },
}

/// Amplitudes of the scattering state incident in channel 1 from the left.
///
/// Left of the field `ψ = (e^{ikx} + R₁e^{-ikx}, R₂e^{-iqx})/√(2π)`.
/// Transmitted amplitudes are stored referenced to the right edge,
/// `ψ = (t₁e^{ik(x-l)}, t₂e^{iq(x-l)})/√(2π)`, and the leftward interior
/// amplitudes `B±` likewise, so that every stored coefficient stays bounded
/// when a channel is evanescent. [`ScatteringSolution::transmission_amplitudes`]
/// and [`ScatteringSolution::interior_amplitudes`] convert to origin-referenced form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringSolution {
    pub k: f64,
    pub energy: f64,
    pub length: f64,
    pub q: Complex64,
    pub k_plus: Complex64,
    pub k_minus: Complex64,
    pub r1: Complex64,
    pub r2: Complex64,
    pub t1: Complex64,
    pub t2: Complex64,
    pub interior: Interior,
}

/// Solves the eight matching conditions at `x = 0` and `x = l` for incident
/// wavenumber `k > 0`.
pub fn solve_matching(setup: &FieldSetup, k: f64) -> Result<ScatteringSolution> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(invalid("k", format!("incident wavenumber must be positive, got {k}")));
    }
    let waves = channel_wavenumbers(setup, k);
    let l = setup.length;
    let energy = HBAR * HBAR * k * k / (2.0 * setup.mass);
    let dressed = match dressed_decomposition(setup) {
        Ok(d) => d,
        Err(_) => {
            return Ok(ScatteringSolution {
                k,
                energy,
                length: l,
                q: waves.q,
                k_plus: waves.k_plus,
                k_minus: waves.k_minus,
                r1: Complex64::new(0.0, 0.0),
                r2: Complex64::new(0.0, 0.0),
                t1: Complex64::from_polar(1.0, k * l),
                t2: Complex64::new(0.0, 0.0),
                interior: Interior::Free,
            })
        }
    };

    let (q, kp, km) = (waves.q, waves.k_plus, waves.k_minus);
    let (cp, cm) = (dressed.c_plus, dressed.c_minus);
    let ep = (I * kp * l).exp();
    let em = (I * km * l).exp();
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    // Derivative rows are divided by i·k so all entries are O(1).
    let (sp, sm, sq) = (kp / k, km / k, q / k);

    // Unknowns: R1, R2, A+, B+, A-, B-, t1, t2.
    #[rustfmt::skip]
    let matrix = SMatrix::<Complex64, 8, 8>::from_row_slice(&[
        // x = 0, channel 1 value
        -one, zero, one, ep, one, em, zero, zero,
        // x = 0, channel 2 value
        zero, -one, cp, cp * ep, cm, cm * em, zero, zero,
        // x = 0, channel 1 derivative
        one, zero, sp, -sp * ep, sm, -sm * em, zero, zero,
        // x = 0, channel 2 derivative
        zero, sq, cp * sp, -cp * sp * ep, cm * sm, -cm * sm * em, zero, zero,
        // x = l, channel 1 value
        zero, zero, ep, one, em, one, -one, zero,
        // x = l, channel 2 value
        zero, zero, cp * ep, cp, cm * em, cm, zero, -one,
        // x = l, channel 1 derivative
        zero, zero, sp * ep, -sp, sm * em, -sm, -one, zero,
        // x = l, channel 2 derivative
        zero, zero, cp * sp * ep, -cp * sp, cm * sm * em, -cm * sm, zero, -sq,
    ]);
    let rhs = SVector::<Complex64, 8>::from_column_slice(&[one, zero, one, zero, zero, zero, zero, zero]);

    let lu = matrix.lu();
    let diag = lu.u().diagonal();
    let (mut max_pivot, mut min_pivot) = (0.0_f64, f64::INFINITY);
    for p in diag.iter() {
        max_pivot = max_pivot.max(p.norm());
        min_pivot = min_pivot.min(p.norm());
    }
    let condition = max_pivot / min_pivot;
    let singular = Error::SingularMatching { k, condition };
    if !(condition.is_finite() && condition < 1e14) {
        return Err(singular);
    }
    let x = lu.solve(&rhs).ok_or(singular)?;

    Ok(ScatteringSolution {
        k,
        energy,
        length: l,
        q,
        k_plus: kp,
        k_minus: km,
        r1: x[0],
        r2: x[1],
        t1: x[6],
        t2: x[7],
        interior: Interior::Dressed {
            c_plus: cp,
            c_minus: cm,
            a_plus: x[2],
            b_plus: x[3],
            a_minus: x[4],
            b_minus: x[5],
        },
    })
}

/// `e^{ikx}` for complex `k`.
#[inline]
pub(crate) fn cexp_i(k: Complex64, x: f64) -> Complex64 {
    let (s, c) = (k.re * x).sin_cos();
    let mag = if k.im == 0.0 { 1.0 } else { (-k.im * x).exp() };
    Complex64::new(mag * c, mag * s)
}

/// Piece of the real line on which a stationary state has one closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Left,
    Inside,
    Right,
}

impl Region {
    pub fn of(x: f64, length: f64) -> Region {
        if x < 0.0 {
            Region::Left
        } else if x > length {
            Region::Right
        } else {
            Region::Inside
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            Region::Left => 0,
            Region::Inside => 1,
            Region::Right => 2,
        }
    }
}

/// How a mode's exponential is obtained from an earlier one in the same set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Link {
    Own,
    /// `E = E[idx] * factor`
    Same(usize, Complex64),
    /// `E = conj(E[idx]) * factor`
    Conj(usize, Complex64),
}

/// One exponential `amp * e^{iκ(x - origin)}` of a closed-form piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Mode {
    pub kappa: Complex64,
    pub origin: f64,
    /// Spinor amplitude, `1/√(2π)` included.
    pub amp: [Complex64; 2],
    /// `iκ * amp`
    pub damp: [Complex64; 2],
    pub link: Link,
}

/// Up to four modes describing the state on one region. Every exponential is
/// bounded by one inside its region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ModeSet {
    pub modes: [Mode; 4],
    pub len: usize,
}

impl ModeSet {
    fn new(raw: &[(Complex64, f64, [Complex64; 2])]) -> ModeSet {
        let blank = Mode {
            kappa: Complex64::default(),
            origin: 0.0,
            amp: [Complex64::default(); 2],
            damp: [Complex64::default(); 2],
            link: Link::Own,
        };
        let mut modes = [blank; 4];
        for (m, &(kappa, origin, amp)) in raw.iter().enumerate() {
            let amp = [amp[0] * INV_SQRT_2PI, amp[1] * INV_SQRT_2PI];
            let ik = I * kappa;
            let mut link = Link::Own;
            if kappa.im == 0.0 {
                for (idx, prev) in modes[..m].iter().enumerate() {
                    if prev.link != Link::Own || prev.kappa.im != 0.0 {
                        continue;
                    }
                    // e^{iκ(x-o)} = e^{iκ(x-o')} e^{iκ(o'-o)}
                    let shift = Complex64::from_polar(1.0, kappa.re * (prev.origin - origin));
                    if prev.kappa.re == kappa.re {
                        link = Link::Same(idx, shift);
                        break;
                    }
                    if prev.kappa.re == -kappa.re {
                        link = Link::Conj(idx, shift);
                        break;
                    }
                }
            }
            modes[m] = Mode { kappa, origin, amp, damp: [ik * amp[0], ik * amp[1]], link };
        }
        ModeSet { modes, len: raw.len() }
    }

    /// Fills `out[m]` with each mode's exponential at `x`.
    #[inline]
    pub fn exponentials(&self, x: f64, out: &mut [Complex64; 4]) {
        for m in 0..self.len {
            let mode = &self.modes[m];
            out[m] = match mode.link {
                Link::Own => cexp_i(mode.kappa, x - mode.origin),
                Link::Same(idx, f) => out[idx] * f,
                Link::Conj(idx, f) => out[idx].conj() * f,
            };
        }
    }

    /// As [`ModeSet::exponentials`] with the first mode's exponential supplied.
    #[inline]
    pub fn exponentials_from(&self, x: f64, first: Complex64, out: &mut [Complex64; 4]) {
        out[0] = first;
        for m in 1..self.len {
            let mode = &self.modes[m];
            out[m] = match mode.link {
                Link::Own => cexp_i(mode.kappa, x - mode.origin),
                Link::Same(idx, f) => out[idx] * f,
                Link::Conj(idx, f) => out[idx].conj() * f,
            };
        }
    }

    #[inline]
    pub fn combine(&self, e: &[Complex64; 4], scale: Complex64, acc: &mut SpinorPoint) {
        for (mode, &em) in self.modes[..self.len].iter().zip(e) {
            let w = scale * em;
            acc.psi[0] += w * mode.amp[0];
            acc.psi[1] += w * mode.amp[1];
            acc.dpsi[0] += w * mode.damp[0];
            acc.dpsi[1] += w * mode.damp[1];
        }
    }

    pub fn max_wavenumber(&self) -> f64 {
        self.modes[..self.len].iter().map(|m| m.kappa.norm()).fold(0.0, f64::max)
    }
}

impl ScatteringSolution {
    fn left_modes(&self) -> ModeSet {
        let k = Complex64::new(self.k, 0.0);
        let zero = Complex64::default();
        let one = Complex64::new(1.0, 0.0);
        ModeSet::new(&[(k, 0.0, [one, zero]), (-k, 0.0, [self.r1, zero]), (-self.q, 0.0, [zero, self.r2])])
    }

    fn right_modes(&self) -> ModeSet {
        let k = Complex64::new(self.k, 0.0);
        let zero = Complex64::default();
        let l = self.length;
        ModeSet::new(&[(k, l, [self.t1, zero]), (self.q, l, [zero, self.t2])])
    }

    fn inside_modes(&self) -> ModeSet {
        let zero = Complex64::default();
        let l = self.length;
        match self.interior {
            Interior::Free => ModeSet::new(&[(Complex64::new(self.k, 0.0), 0.0, [Complex64::new(1.0, 0.0), zero])]),
            Interior::Dressed { c_plus, c_minus, a_plus, b_plus, a_minus, b_minus } => ModeSet::new(&[
                (self.k_plus, 0.0, [a_plus, c_plus * a_plus]),
                (-self.k_plus, l, [b_plus, c_plus * b_plus]),
                (self.k_minus, 0.0, [a_minus, c_minus * a_minus]),
                (-self.k_minus, l, [b_minus, c_minus * b_minus]),
            ]),
        }
    }

    pub(crate) fn mode_sets(&self) -> [ModeSet; 3] {
        [self.left_modes(), self.inside_modes(), self.right_modes()]
    }

    /// Bare-basis spinor `Φ_k(x)` and its derivative, including the `1/√(2π)` prefactor.
    pub fn state_at(&self, x: f64) -> SpinorPoint {
        self.state_in(Region::of(x, self.length), x)
    }

    /// Evaluates the closed form belonging to `region` at `x`, which may lie
    /// outside that region (used to compare one-sided limits at the edges).
    pub fn state_in(&self, region: Region, x: f64) -> SpinorPoint {
        let set = match region {
            Region::Left => self.left_modes(),
            Region::Inside => self.inside_modes(),
            Region::Right => self.right_modes(),
        };
        let mut e = [Complex64::default(); 4];
        set.exponentials(x, &mut e);
        let mut out = SpinorPoint::default();
        set.combine(&e, Complex64::new(1.0, 0.0), &mut out);
        out
    }

    /// Flux-weighted transmission `|T₁|² + (Re q / k)|T₂|²`.
    pub fn transmission(&self) -> f64 {
        let open = self.q.re / self.k;
        let ch2 = if open == 0.0 { 0.0 } else { open * self.t2.norm_sqr() };
        self.t1.norm_sqr() + ch2
    }

    pub fn reflection(&self) -> f64 {
        let open = self.q.re / self.k;
        let ch2 = if open == 0.0 { 0.0 } else { open * self.r2.norm_sqr() };
        self.r1.norm_sqr() + ch2
    }

    /// `R + T - 1`; vanishes by current conservation.
    pub fn unitarity_residual(&self) -> f64 {
        self.reflection() + self.transmission() - 1.0
    }

    pub fn channel2_open(&self) -> bool {
        self.q.im == 0.0
    }

    /// Transmission amplitudes `(T₁, T₂)` multiplying `e^{ikx}` and `e^{iqx}`.
    /// `T₂` overflows when channel 2 is deeply evanescent.
    pub fn transmission_amplitudes(&self) -> (Complex64, Complex64) {
        let l = self.length;
        (self.t1 * cexp_i(Complex64::new(-self.k, 0.0), l), self.t2 * cexp_i(-self.q, l))
    }

    /// `(A₊, B₊, A₋, B₋)` with every exponential referenced to the origin.
    pub fn interior_amplitudes(&self) -> Option<[Complex64; 4]> {
        match self.interior {
            Interior::Free => None,
            Interior::Dressed { a_plus, b_plus, a_minus, b_minus, .. } => {
                let l = self.length;
                Some([a_plus, b_plus * cexp_i(self.k_plus, l), a_minus, b_minus * cexp_i(self.k_minus, l)])
            }
        }
    }

    /// Largest mismatch between one-sided limits of either component and its
    /// derivative (scaled by `1/k`) at `x = 0` and `x = l`, in units of the
    /// incident amplitude.
    pub fn matching_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (a, b, x) in [(Region::Left, Region::Inside, 0.0), (Region::Inside, Region::Right, self.length)] {
            let u = self.state_in(a, x);
            let v = self.state_in(b, x);
            for c in 0..2 {
                worst = worst.max((u.psi[c] - v.psi[c]).norm());
                worst = worst.max((u.dpsi[c] - v.dpsi[c]).norm() / self.k);
            }
        }
        worst / INV_SQRT_2PI
    }
}
