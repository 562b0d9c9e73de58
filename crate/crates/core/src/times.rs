//! Presence probabilities at two points and the time functionals built on them.
//!
//! With `Q(x,t)` the probability right of `x`, the dwell time in `[a,b]` is
//! `∫dt (Q(a,t) - Q(b,t))`. Transmission and reflection times split it with
//! the asymptotic transmission probability `T²`:
//!
//! ```text
//! τ_T = (1/T²) ∫dt [min(Q(a),T²) - min(Q(b),T²)]
//! τ_R = (1/R²) ∫dt [max(Q(a),T²) - max(Q(b),T²)]
//! ```
//!
//! For `b = l`, where `Q(l,t)` never exceeds `T²`, the `min` on the right
//! term is the identity. Keeping it makes every time additive over a split
//! of the interval.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{cumulative_trapezoid, trapezoid};
use crate::scattering::{cexp_i, Region};
use crate::wavepacket::SpectralPacket;

/// Negative excursions of the τ_T and τ_R integrands up to this size are
/// clipped. Flux-integrated `Q` misses whatever probability already sat
/// between the points at `t = 0` and carries the `O(dt²)` error of the
/// cumulative trapezoid, both far below this.
pub const CLIP_TOLERANCE: f64 = 1e-6;
/// Current below `-ARRIVAL_TOLERANCE` anywhere selects the `|J|` form.
pub const ARRIVAL_TOLERANCE: f64 = 1e-9;

/// Which of the two series points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    /// Left point `a` (the field entrance by default).
    Entry,
    /// Right point `b` (the field exit by default).
    Exit,
}

impl Edge {
    fn index(self) -> usize {
        match self {
            Edge::Entry => 0,
            Edge::Exit => 1,
        }
    }
}

/// `J` and `Q` at two points on a uniform time grid starting at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySeries {
    pub points: [f64; 2],
    pub dt: f64,
    pub times: Vec<f64>,
    /// 1/s
    pub current: [Vec<f64>; 2],
    pub presence: [Vec<f64>; 2],
    /// Stationary transmission probability of the packet.
    pub transmission: f64,
}

impl BoundarySeries {
    /// Samples the current at `a < b` on `n_steps` intervals of `[0, t_end]` and
    /// integrates it cumulatively. No convergence check.
    pub fn compute(packet: &SpectralPacket, a: f64, b: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !(a < b) {
            return Err(invalid("points", format!("need a < b, got {a} and {b}")));
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(invalid("t_end", "must be positive"));
        }
        if n_steps < 2 {
            return Err(invalid("n_steps", "need at least two steps"));
        }
        let dt = t_end / n_steps as f64;
        let n = n_steps + 1;
        let times = (0..n).map(|i| i as f64 * dt).collect();
        let (ja, jb) = rayon::join(|| packet.current_series(a, dt, n), || packet.current_series(b, dt, n));
        let qa = cumulative_trapezoid(&ja, dt);
        let qb = cumulative_trapezoid(&jb, dt);
        Ok(BoundarySeries {
            points: [a, b],
            dt,
            times,
            current: [ja, jb],
            presence: [qa, qb],
            transmission: packet.transmission_probability(),
        })
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn current_at(&self, edge: Edge) -> &[f64] {
        &self.current[edge.index()]
    }

    pub fn presence_at(&self, edge: Edge) -> &[f64] {
        &self.presence[edge.index()]
    }

    /// Both presence probabilities within `tol` of `T²` at the final time.
    pub fn check_converged(&self, tol: f64) -> Result<()> {
        let q0 = *self.presence[0].last().unwrap_or(&0.0);
        let ql = *self.presence[1].last().unwrap_or(&0.0);
        let t2 = self.transmission;
        if (q0 - t2).abs() < tol && (ql - t2).abs() < tol {
            Ok(())
        } else {
            Err(Error::NotConverged { t_end: self.t_end(), q0, ql, transmission: t2 })
        }
    }
}

/// Series at the field edges, rejected unless both `Q` have settled to `T²`
/// within 1e-3 by `t_end`.
pub fn boundary_series(packet: &SpectralPacket, t_end: f64, n_steps: usize) -> Result<BoundarySeries> {
    let series = BoundarySeries::compute(packet, 0.0, packet.length(), t_end, n_steps)?;
    series.check_converged(1e-3)?;
    Ok(series)
}

/// `∫dt (Q(a,t) - Q(b,t))`.
pub fn dwell_time(series: &BoundarySeries) -> f64 {
    let diff: Vec<f64> = series.presence[0].iter().zip(&series.presence[1]).map(|(a, b)| a - b).collect();
    trapezoid(&diff, series.dt).max(0.0)
}

fn check_split(t2: f64) -> Result<()> {
    if t2 > 0.0 && t2 < 1.0 {
        Ok(())
    } else {
        Err(invalid("transmission", format!("must lie strictly inside (0, 1), got {t2}")))
    }
}

fn clipped_integral(series: &BoundarySeries, clamp: impl Fn(f64) -> f64) -> Result<f64> {
    let mut values = Vec::with_capacity(series.times.len());
    for (i, (&qa, &qb)) in series.presence[0].iter().zip(&series.presence[1]).enumerate() {
        let v = clamp(qa) - clamp(qb);
        if v < -CLIP_TOLERANCE {
            return Err(Error::InconsistentPresence { t: series.times[i], value: v });
        }
        values.push(v.max(0.0));
    }
    Ok(trapezoid(&values, series.dt))
}

pub fn transmission_time(series: &BoundarySeries, t2: f64) -> Result<f64> {
    check_split(t2)?;
    Ok(clipped_integral(series, |q| q.min(t2))? / t2)
}

pub fn reflection_time(series: &BoundarySeries, t2: f64) -> Result<f64> {
    check_split(t2)?;
    Ok(clipped_integral(series, |q| q.max(t2))? / (1.0 - t2))
}

/// Transmission probability and the three characteristic times of one scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicTimes {
    pub transmission: f64,
    /// s
    pub dwell: f64,
    pub transmission_time: f64,
    pub reflection_time: f64,
    /// `|τ_D - (T²τ_T + R²τ_R)|`, s
    pub weighting_residual: f64,
}

impl CharacteristicTimes {
    pub fn reflection(&self) -> f64 {
        1.0 - self.transmission
    }
}

pub fn characteristic_times(series: &BoundarySeries) -> Result<CharacteristicTimes> {
    let t2 = series.transmission;
    let dwell = dwell_time(series);
    let tt = transmission_time(series, t2)?;
    let tr = reflection_time(series, t2)?;
    Ok(CharacteristicTimes {
        transmission: t2,
        dwell,
        transmission_time: tt,
        reflection_time: tr,
        weighting_residual: (dwell - (t2 * tt + (1.0 - t2) * tr)).abs(),
    })
}

/// Which normalization an arrival distribution uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalForm {
    /// `J / ∫J`, valid when the current never reverses.
    Signed,
    /// `|J| / ∫|J|`, counting every crossing.
    Absolute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalDistribution {
    pub form: ArrivalForm,
    /// 1/s, on the series time grid.
    pub density: Vec<f64>,
    /// The integral the current was divided by.
    pub normalization: f64,
}

impl ArrivalDistribution {
    pub fn integral(&self, dt: f64) -> f64 {
        trapezoid(&self.density, dt)
    }
}

pub fn arrival_distribution(series: &BoundarySeries, edge: Edge) -> Result<ArrivalDistribution> {
    let j = series.current_at(edge);
    let reverses = j.iter().any(|&v| v < -ARRIVAL_TOLERANCE);
    let (form, values): (_, Vec<f64>) = if reverses {
        (ArrivalForm::Absolute, j.iter().map(|v| v.abs()).collect())
    } else {
        (ArrivalForm::Signed, j.to_vec())
    };
    let normalization = trapezoid(&values, series.dt);
    if !(normalization > 0.0) {
        return Err(Error::NoArrivals);
    }
    Ok(ArrivalDistribution { form, density: values.iter().map(|v| v / normalization).collect(), normalization })
}

/// Which lobes of the current a census counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeakSign {
    Positive,
    Negative,
    Absolute,
}

/// Local maxima of the (three-point smoothed) current at `edge` whose height
/// exceeds `threshold · max|J|`. Returns the times of the peaks.
pub fn peak_census(series: &BoundarySeries, edge: Edge, threshold: f64, sign: PeakSign) -> Vec<f64> {
    let j = series.current_at(edge);
    let n = j.len();
    if n < 3 {
        return Vec::new();
    }
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
            j[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let scale = smooth.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let signal: Vec<f64> = smooth
        .iter()
        .map(|&v| match sign {
            PeakSign::Positive => v,
            PeakSign::Negative => -v,
            PeakSign::Absolute => v.abs(),
        })
        .collect();
    let floor = threshold * scale;
    (1..n - 1)
        .filter(|&i| signal[i] > floor && signal[i] > signal[i - 1] && signal[i] >= signal[i + 1])
        .map(|i| series.times[i])
        .collect()
}

/// Wavenumber, spinor amplitude and the exponential at the piece's start,
/// middle and end.
type ModeEnds = (Complex64, [Complex64; 2], [Complex64; 3]);

/// `∫_0^{t_end} dt ∫_a^b ρ(x,t) dx` evaluated in closed form for the discrete
/// packet: both integrals of every pair of exponentials are done analytically.
/// Independent of the current-based route and used to audit it.
pub fn dwell_time_direct(packet: &SpectralPacket, a: f64, b: f64, t_end: f64) -> Result<f64> {
    if !(a < b) || !(t_end > 0.0) {
        return Err(invalid("interval", "need a < b and t_end > 0"));
    }
    let l = packet.length();
    let mut cuts = vec![a];
    cuts.extend([0.0, l].into_iter().filter(|&e| e > a && e < b));
    cuts.push(b);
    let nodes = packet.nodes();
    let n = nodes.len();
    let weights: Vec<Complex64> = nodes.iter().map(|node| node.weight).collect();
    let omegas: Vec<f64> = nodes.iter().map(|node| node.omega).collect();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let region = Region::of(0.5 * (lo + hi), l).index();
        let len = hi - lo;
        let mid = 0.5 * (lo + hi);
        // Per node and mode: wavenumber, spinor amplitude, exponential at lo, mid, hi.
        let table: Vec<Vec<ModeEnds>> = nodes
            .iter()
            .map(|node| {
                let set = &node.modes()[region];
                set.modes[..set.len]
                    .iter()
                    .map(|m| {
                        let ends = [lo, mid, hi].map(|x| cexp_i(m.kappa, x - m.origin));
                        (m.kappa, m.amp, ends)
                    })
                    .collect()
            })
            .collect();
        use rayon::prelude::*;
        let partial: f64 = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut row = 0.0;
                for jp in j..n {
                    // Spatial overlap of node j with node j'.
                    let mut overlap = Complex64::default();
                    for &(kj, aj, ej) in &table[j] {
                        for &(kp, ap, ep) in &table[jp] {
                            let spin = aj[0].conj() * ap[0] + aj[1].conj() * ap[1];
                            if spin == Complex64::default() {
                                continue;
                            }
                            let beta = kp - kj.conj();
                            let half = 0.5 * beta * len;
                            let integral = if half.norm() < 1e-3 {
                                let h2 = half * half;
                                ej[1].conj() * ep[1] * len * (1.0 - h2 / 6.0 + h2 * h2 / 120.0)
                            } else {
                                (ej[2].conj() * ep[2] - ej[0].conj() * ep[0]) / (Complex64::new(0.0, 1.0) * beta)
                            };
                            overlap += spin * integral;
                        }
                    }
                    // Time integral of conj(c_j) c_j' over [0, t_end].
                    let dw = omegas[j] - omegas[jp];
                    let theta = dw * t_end;
                    let time = if theta.abs() < 1e-4 {
                        Complex64::new(t_end, 0.5 * theta * t_end)
                    } else {
                        (Complex64::from_polar(1.0, theta) - 1.0) / Complex64::new(0.0, dw)
                    };
                    let term = (weights[j].conj() * weights[jp] * overlap * time).re;
                    row += if jp == j { term } else { 2.0 * term };
                }
                row
            })
            .sum();
        total += partial;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scattering::FieldSetup;
    use crate::wavepacket::PacketSpec;

    fn series_from(qa: Vec<f64>, qb: Vec<f64>, t2: f64) -> BoundarySeries {
        let n = qa.len();
        BoundarySeries {
            points: [0.0, 1.0],
            dt: 1.0,
            times: (0..n).map(|i| i as f64).collect(),
            current: [vec![0.0; n], vec![0.0; n]],
            presence: [qa, qb],
            transmission: t2,
        }
    }

    #[test]
    fn weighting_identity_is_algebraic() {
        let qa = vec![0.0, 0.3, 0.8, 0.7, 0.6, 0.6];
        let qb = vec![0.0, 0.0, 0.1, 0.4, 0.55, 0.6];
        let s = series_from(qa, qb, 0.6);
        let c = characteristic_times(&s).unwrap();
        assert!(c.weighting_residual < 1e-14);
    }

    #[test]
    fn reversed_ordering_is_reported() {
        let s = series_from(vec![0.0, 0.1, 0.2], vec![0.0, 0.15, 0.2], 0.5);
        assert!(matches!(transmission_time(&s, 0.5), Err(Error::InconsistentPresence { .. })));
        assert!(transmission_time(&s, 1.0).is_err());
    }

    #[test]
    fn tiny_negative_integrand_is_clipped() {
        let s = series_from(vec![0.0, 0.2, 0.2], vec![0.0, 0.2 + 5e-10, 0.2], 0.5);
        assert!(transmission_time(&s, 0.5).unwrap() >= 0.0);
    }

    #[test]
    fn census_finds_separated_bumps() {
        let n = 2001;
        let t: Vec<f64> = (0..n).map(|i| i as f64 * 0.01).collect();
        let j: Vec<f64> = t
            .iter()
            .map(|&x| (-(x - 5.0f64).powi(2) * 4.0).exp() - 0.2 * (-(x - 10.0f64).powi(2) * 4.0).exp())
            .collect();
        let mut s = series_from(vec![0.0; n], vec![0.0; n], 0.5);
        s.dt = 0.01;
        s.times = t;
        s.current[0] = j;
        assert_eq!(peak_census(&s, Edge::Entry, 1e-3, PeakSign::Positive).len(), 1);
        assert_eq!(peak_census(&s, Edge::Entry, 1e-3, PeakSign::Negative).len(), 1);
        assert_eq!(peak_census(&s, Edge::Entry, 1e-3, PeakSign::Absolute).len(), 2);
        let d = arrival_distribution(&s, Edge::Entry).unwrap();
        assert_eq!(d.form, ArrivalForm::Absolute);
        assert!((d.integral(s.dt) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_current_means_no_arrivals() {
        let s = series_from(vec![0.0; 4], vec![0.0; 4], 0.5);
        assert_eq!(arrival_distribution(&s, Edge::Exit), Err(Error::NoArrivals));
    }

    #[test]
    fn free_dwell_is_transit_time() {
        // A narrow spectrum crosses 100 μm at 1 cm/s in about 10 ms.
        let setup = FieldSetup::new(2.2e-25, 0.0, 0.0, 0.0, 1e-4).unwrap();
        let spec = PacketSpec::from_velocity(2.2e-25, 0.01, 60e-6, -400e-6).unwrap();
        let p = SpectralPacket::build(setup, spec, 256, 6.0).unwrap();
        let s = BoundarySeries::compute(&p, 0.0, 1e-4, 0.12, 4096).unwrap();
        s.check_converged(1e-3).unwrap();
        let tau = dwell_time(&s);
        assert!((tau - 0.01).abs() < 5e-4, "{tau}");
        let direct = dwell_time_direct(&p, 0.0, 1e-4, 0.12).unwrap();
        assert!((tau - direct).abs() < 1e-4 * tau, "{tau} vs {direct}");
    }
}
