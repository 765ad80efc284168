//! Wave-packet propagation on a large truncated lattice, used as an
//! independent check of the stationary objects.
//!
//! `e^{−itH}` is applied by a Chebyshev expansion in `H/a` with Bessel
//! coefficients `J_k(a t)`; long times are split into steps so that the
//! expansion order stays moderate.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, CVec};
use crate::model::{lattice_window_kernel, Perturbation, Rigging, Window};

/// Largest `a·τ` handled in a single Chebyshev step.
const MAX_STEP_ARGUMENT: f64 = 40.0;
/// Bessel terms below this are dropped; their sum is the truncation bound.
const BESSEL_CUT: f64 = 1e-17;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavePacket {
    pub center: f64,
    /// Mean momentum `k₀`; the packet moves with velocity `−2 sin k₀`.
    pub momentum: f64,
    pub width: f64,
}

impl WavePacket {
    /// Packet at energy `λ = 2cos θ` moving right (`k₀ = −θ`) or left.
    pub fn at_energy(center: f64, lambda: f64, width: f64, rightward: bool) -> Result<Self> {
        if !(lambda.abs() < 2.0) {
            return Err(Error::EdgeOfSpectrum { lambda, margin: 0.0 });
        }
        let theta = (lambda / 2.0).acos();
        Ok(Self {
            center,
            momentum: if rightward { -theta } else { theta },
            width,
        })
    }

    pub fn energy(&self) -> f64 {
        2.0 * self.momentum.cos()
    }

    pub fn velocity(&self) -> f64 {
        -2.0 * self.momentum.sin()
    }

    fn amplitude(&self, n: f64) -> Complex64 {
        let d = n - self.center;
        Complex64::from_polar((-d * d / (4.0 * self.width * self.width)).exp(), self.momentum * n)
    }

    fn normalization(&self) -> f64 {
        // Σ_n exp(−(n−c)²/2σ²) by Poisson summation; exact to round-off for σ ≳ 1.
        let s = self.width;
        let base = (2.0 * PI).sqrt() * s;
        let alias: f64 = (1..4)
            .map(|p| 2.0 * (-2.0 * PI * PI * s * s * (p * p) as f64).exp() * (2.0 * PI * p as f64 * self.center).cos())
            .sum();
        (base * (1.0 + alias)).sqrt()
    }

    /// Unit-norm site values on `−radius..=radius`.
    pub fn sites(&self, radius: usize) -> CVec {
        let norm = self.normalization();
        CVec::from_iterator(
            2 * radius + 1,
            (0..=2 * radius).map(|i| self.amplitude(i as f64 - radius as f64) / norm),
        )
    }

    /// `f̂(k) = Σ_n f(n) e^{−ikn}` of the unit-norm packet, by Poisson
    /// summation of the continuous Gaussian transform.
    pub fn fourier(&self, k: f64) -> Complex64 {
        let s = self.width;
        let mut acc = Complex64::new(0.0, 0.0);
        for p in -2..=2 {
            let q = k - self.momentum + 2.0 * PI * p as f64;
            acc += Complex64::from_polar((4.0 * PI).sqrt() * s * (-s * s * q * q).exp(), -q * self.center);
        }
        acc / self.normalization()
    }

    /// Distance from the center beyond which the packet is negligible.
    pub fn support_radius(&self) -> f64 {
        10.0 * self.width
    }
}

/// `H₀ + F*JF` on sites `−radius..=radius` with Dirichlet ends.
#[derive(Debug, Clone)]
pub struct LatticeHamiltonian {
    pub radius: usize,
    /// `(row, column, value)` of the perturbation, in site indices.
    pub potential: Vec<(usize, usize, Complex64)>,
}

impl LatticeHamiltonian {
    pub fn free(radius: usize) -> Self {
        Self {
            radius,
            potential: Vec::new(),
        }
    }

    pub fn perturbed(radius: usize, rig: &Rigging, j: &Perturbation) -> Result<Self> {
        rig.model().lattice()?;
        if j.dim() != rig.m() {
            return Err(Error::DimensionMismatch {
                expected: rig.m(),
                got: j.dim(),
            });
        }
        let sites = rig.auxiliary_sites();
        let mut potential = Vec::new();
        for (a, &sa) in sites.iter().enumerate() {
            for (b, &sb) in sites.iter().enumerate() {
                let v = j.matrix()[(a, b)] * rig.site_weight(sa) * rig.site_weight(sb);
                if v != Complex64::new(0.0, 0.0) {
                    let (ia, ib) = (sa + radius as i64, sb + radius as i64);
                    if ia < 0 || ib < 0 || ia > 2 * radius as i64 || ib > 2 * radius as i64 {
                        return Err(Error::Invalid("perturbation outside the propagation lattice".into()));
                    }
                    potential.push((ia as usize, ib as usize, v));
                }
            }
        }
        Ok(Self { radius, potential })
    }

    pub fn dim(&self) -> usize {
        2 * self.radius + 1
    }

    /// Site range `[lo, hi]` touched by the perturbation, if any.
    pub fn support(&self) -> Option<(i64, i64)> {
        let r = self.radius as i64;
        let idx = self.potential.iter().flat_map(|&(a, b, _)| [a as i64 - r, b as i64 - r]);
        let lo = idx.clone().min()?;
        Some((lo, idx.max()?))
    }

    pub fn apply(&self, psi: &[Complex64], out: &mut [Complex64]) {
        let n = psi.len();
        for i in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            if i > 0 {
                acc += psi[i - 1];
            }
            if i + 1 < n {
                acc += psi[i + 1];
            }
            out[i] = acc;
        }
        for &(a, b, v) in &self.potential {
            out[a] += v * psi[b];
        }
    }

    /// Gershgorin bound on the spectrum.
    pub fn spectral_bound(&self) -> f64 {
        let mut rows = vec![2.0; self.dim()];
        for &(a, _, v) in &self.potential {
            rows[a] += v.norm();
        }
        rows.into_iter().fold(0.0, f64::max)
    }
}

/// `J_0(x) … J_n(x)` by Miller's backward recurrence, normalized with
/// `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_sequence(x: f64, n: usize) -> Vec<f64> {
    if x == 0.0 {
        let mut out = vec![0.0; n + 1];
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let start = (n.max(ax as usize) + 20 + (10.0 * ax.cbrt()) as usize + 10) & !1;
    let mut vals = vec![0.0; start + 2];
    vals[start + 1] = 0.0;
    vals[start] = 1e-300;
    for k in (1..=start).rev() {
        vals[k - 1] = (2.0 * k as f64 / ax) * vals[k] - vals[k + 1];
        if vals[k - 1].abs() > 1e250 {
            for v in vals[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let norm = vals[0] + 2.0 * vals.iter().skip(2).step_by(2).sum::<f64>();
    let mut out: Vec<f64> = vals[..=n].iter().map(|v| v / norm).collect();
    if x < 0.0 {
        for (k, v) in out.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

/// Result of one propagation.
#[derive(Debug, Clone)]
pub struct Propagated {
    pub state: CVec,
    /// Sum over steps of the dropped Bessel tail and accumulated round-off.
    pub error_bound: f64,
    pub norm_defect: f64,
}

/// `e^{−iτH}` for one Chebyshev step; returns the dropped-tail bound.
fn chebyshev_step(h: &LatticeHamiltonian, psi: &CVec, tau: f64, a: f64) -> (CVec, f64) {
    let x = a * tau;
    let guess = (x.abs() + 10.0 * x.abs().cbrt() + 30.0) as usize;
    let bessel = bessel_sequence(x, guess);
    let mut order = bessel.len() - 1;
    while order > 0 && bessel[order].abs() < BESSEL_CUT {
        order -= 1;
    }
    let tail: f64 = 2.0 * bessel[order + 1..].iter().map(|b| b.abs()).sum::<f64>();
    let n = psi.len();
    let scale = 1.0 / a;
    let mut t_prev: Vec<Complex64> = psi.iter().copied().collect();
    let mut t_cur = vec![Complex64::new(0.0, 0.0); n];
    h.apply(&t_prev, &mut t_cur);
    t_cur.iter_mut().for_each(|z| *z *= scale);
    let mut out: Vec<Complex64> = t_prev.iter().map(|&z| z * bessel[0]).collect();
    let mut phase = c(0.0, -1.0);
    for k in 1..=order {
        let coef = phase * (2.0 * bessel[k]);
        for (o, &t) in out.iter_mut().zip(&t_cur) {
            *o += coef * t;
        }
        if k == order {
            break;
        }
        let mut t_next = vec![Complex64::new(0.0, 0.0); n];
        h.apply(&t_cur, &mut t_next);
        for i in 0..n {
            t_next[i] = t_next[i] * (2.0 * scale) - t_prev[i];
        }
        t_prev = t_cur;
        t_cur = t_next;
        phase *= c(0.0, -1.0);
    }
    (CVec::from_vec(out), tail + order as f64 * f64::EPSILON)
}

/// `e^{−itH} ψ` for any real `t`.
pub fn evolve(psi: &CVec, h: &LatticeHamiltonian, t: f64, tol: f64) -> Result<Propagated> {
    if psi.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: psi.len(),
        });
    }
    if !t.is_finite() {
        return Err(Error::NonFinite("t"));
    }
    let a = h.spectral_bound();
    let steps = ((a * t.abs()) / MAX_STEP_ARGUMENT).ceil().max(1.0) as usize;
    let tau = t / steps as f64;
    let mut state = psi.clone();
    let mut bound = 0.0;
    if t != 0.0 {
        for _ in 0..steps {
            let (next, err) = chebyshev_step(h, &state, tau, a);
            state = next;
            bound += err;
        }
    }
    if bound > tol {
        return Err(Error::StepControl { bound });
    }
    let norm_defect = (state.norm() - psi.norm()).abs();
    Ok(Propagated {
        state,
        error_bound: bound,
        norm_defect,
    })
}

/// `e^{−itH} ψ` for `t ≥ 0`.
pub fn propagate(psi: &CVec, h: &LatticeHamiltonian, t: f64, tol: f64) -> Result<Propagated> {
    if t < 0.0 {
        return Err(Error::Invalid(format!("propagation time must be nonnegative, got {t}")));
    }
    evolve(psi, h, t, tol)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationConfig {
    pub radius: usize,
    pub t_max: f64,
    /// Refuse propagations whose certified error exceeds this.
    pub tol: f64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            radius: 2000,
            t_max: 400.0,
            tol: 1e-8,
        }
    }
}

impl PropagationConfig {
    /// The packet must stay `10σ` inside the lattice over two legs of
    /// length `t` at speed at most 2.
    pub fn check_packet(&self, packet: &WavePacket, legs: f64, t: f64) -> Result<()> {
        let reach = packet.center.abs() + packet.support_radius() + 2.0 * legs * t;
        if reach > self.radius as f64 {
            return Err(Error::Invalid(format!(
                "packet reaches site {reach:.0} beyond the lattice radius {}",
                self.radius
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TimeWaveResult {
    pub state: CVec,
    /// `‖ψ(t_max) − ψ(t_max/2)‖ / ‖f‖`.
    pub tail: f64,
    pub error_bound: f64,
}

/// Accepted Cauchy tail of the wave-operator limit.
pub const TAIL_TOL: f64 = 1e-2;

/// `e^{itH₁} e^{−itH₀} f` at `t = ±t_max` (sign of `plus`).
pub fn time_wave_operator(
    f: &CVec,
    h0: &LatticeHamiltonian,
    h1: &LatticeHamiltonian,
    t_max: f64,
    plus: bool,
    tol: f64,
) -> Result<TimeWaveResult> {
    let t = if plus { t_max } else { -t_max };
    let at = |t: f64| -> Result<(CVec, f64)> {
        let free = evolve(f, h0, t, tol)?;
        let back = evolve(&free.state, h1, -t, tol)?;
        Ok((back.state, free.error_bound + back.error_bound))
    };
    let (full, e1) = at(t)?;
    let (half, e2) = at(0.5 * t)?;
    let tail = (&full - &half).norm() / f.norm().max(f64::MIN_POSITIVE);
    if tail > TAIL_TOL {
        return Err(Error::NotConverged { tail });
    }
    Ok(TimeWaveResult {
        state: full,
        tail,
        error_bound: e1 + e2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightSample {
    pub t: f64,
    pub transmitted_mass: f64,
    pub reflected_mass: f64,
    pub norm_defect: f64,
}

#[derive(Debug, Clone)]
pub struct FlightResult {
    pub lambda: f64,
    /// `|τ(λ)|²` from the transmitted packet's transform at `k₀`.
    pub transmission: f64,
    /// `|ρ(λ)|²` from the reflected packet's transform at `−k₀`.
    pub reflection: f64,
    pub transmitted_mass: f64,
    pub reflected_mass: f64,
    pub mass_defect: f64,
    pub series: Vec<FlightSample>,
}

/// Mass accounting tolerance for the flight experiment.
pub const MASS_TOL: f64 = 1e-3;

/// Sends a right-moving packet centered at `center < 0` with energy `λ`
/// through the perturbation and splits the outcome into transmitted and
/// reflected parts.
pub fn transmission_by_flight(
    h1: &LatticeHamiltonian,
    lambda: f64,
    center: f64,
    width: f64,
    samples: usize,
    cfg: &PropagationConfig,
) -> Result<FlightResult> {
    let packet = WavePacket::at_energy(center, lambda, width, true)?;
    let (lo, hi) = h1.support().unwrap_or((0, 0));
    let v = packet.velocity();
    // Initial overlap with the scatterer: amplitude e^{-49/4} at 7σ.
    if !(v > 0.0) || center + 7.0 * width >= lo as f64 {
        return Err(Error::Invalid("packet must start left of the perturbation, moving right".into()));
    }
    // Time for the whole packet to clear the scatterer, plus dispersion slack.
    let t_final = (hi as f64 - center + 2.5 * packet.support_radius()) / v;
    cfg.check_packet(&packet, 1.0, t_final)?;
    let radius = cfg.radius as i64;
    let f = packet.sites(cfg.radius);
    let split = |psi: &CVec| -> (f64, f64) {
        let mut tr = 0.0;
        let mut re = 0.0;
        for (i, z) in psi.iter().enumerate() {
            let n = i as i64 - radius;
            if n > hi {
                tr += z.norm_sqr();
            } else if n < lo {
                re += z.norm_sqr();
            }
        }
        (tr, re)
    };
    let samples = samples.max(1);
    let dt = t_final / samples as f64;
    let mut series = Vec::with_capacity(samples + 1);
    let mut psi = f.clone();
    let (tr, re) = split(&psi);
    series.push(FlightSample {
        t: 0.0,
        transmitted_mass: tr,
        reflected_mass: re,
        norm_defect: 0.0,
    });
    let mut bound = 0.0;
    for s in 1..=samples {
        let p = evolve(&psi, h1, dt, cfg.tol)?;
        bound += p.error_bound;
        psi = p.state;
        let (tr, re) = split(&psi);
        series.push(FlightSample {
            t: s as f64 * dt,
            transmitted_mass: tr,
            reflected_mass: re,
            norm_defect: (psi.norm() - 1.0).abs(),
        });
    }
    if bound > cfg.tol {
        return Err(Error::StepControl { bound });
    }
    let last = *series.last().expect("at least one sample");
    let mass_defect = (last.transmitted_mass + last.reflected_mass - 1.0).abs();
    if mass_defect > MASS_TOL {
        return Err(Error::MassDefect { defect: mass_defect });
    }
    let k0 = packet.momentum;
    let transform = |side: i8, k: f64| -> Complex64 {
        psi.iter()
            .enumerate()
            .filter(|(i, _)| {
                let n = *i as i64 - radius;
                if side > 0 {
                    n > hi
                } else {
                    n < lo
                }
            })
            .map(|(i, z)| z * Complex64::from_polar(1.0, -k * (i as f64 - radius as f64)))
            .sum()
    };
    let incoming = packet.fourier(k0).norm_sqr();
    Ok(FlightResult {
        lambda,
        transmission: transform(1, k0).norm_sqr() / incoming,
        reflection: transform(-1, -k0).norm_sqr() / incoming,
        transmitted_mass: last.transmitted_mass,
        reflected_mass: last.reflected_mass,
        mass_defect,
        series,
    })
}

/// Mass of `e^{−itH₀} f` outside `[c − 10σ − 2t, c + 10σ + 2t]`.
pub fn light_cone_leak(packet: &WavePacket, t: f64, cfg: &PropagationConfig) -> Result<f64> {
    cfg.check_packet(packet, 1.0, t)?;
    let h0 = LatticeHamiltonian::free(cfg.radius);
    let psi = propagate(&packet.sites(cfg.radius), &h0, t, cfg.tol)?.state;
    let reach = packet.support_radius() + 2.0 * t;
    let radius = cfg.radius as f64;
    Ok(psi
        .iter()
        .enumerate()
        .filter(|(i, _)| ((*i as f64 - radius) - packet.center).abs() > reach)
        .map(|(_, z)| z.norm_sqr())
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyWindowCheck {
    /// `∫ ‖F e^{−itH₀} g‖² dt` over `[−t, t]`.
    pub integral: f64,
    /// `2π N² ‖F E_Δ‖²_HS`.
    pub bound: f64,
    /// `N = sup_λ ‖ℰ_λ g‖`.
    pub sup_evaluation: f64,
    /// Fraction of `‖g‖²` carried by momenta outside `Δ`.
    pub outside_mass: f64,
}

/// Numerical time integral of `‖F e^{−itH₀} g‖²` against its energy-window
/// bound, for a packet `g`.
pub fn energy_window_integral(
    rig: &Rigging,
    packet: &WavePacket,
    window: &Window,
    t_span: f64,
    dt: f64,
    cfg: &PropagationConfig,
) -> Result<EnergyWindowCheck> {
    rig.model().lattice()?;
    cfg.check_packet(packet, 1.0, t_span)?;
    let h0 = LatticeHamiltonian::free(cfg.radius);
    let sites = rig.auxiliary_sites();
    let radius = cfg.radius as i64;
    let observe = |psi: &CVec| -> f64 {
        sites
            .iter()
            .map(|&s| (psi[(s + radius) as usize] * rig.site_weight(s)).norm_sqr())
            .sum()
    };
    let steps = (t_span / dt).ceil().max(2.0) as usize;
    let steps = steps + steps % 2;
    let h = t_span / steps as f64;
    let g = packet.sites(cfg.radius);
    // Composite Simpson on [0, t] and [−t, 0].
    let mut integral = 0.0;
    for dir in [1.0, -1.0] {
        let mut psi = g.clone();
        let mut acc = observe(&psi);
        for s in 1..=steps {
            psi = evolve(&psi, &h0, dir * h, cfg.tol)?.state;
            let w = if s == steps {
                1.0
            } else if s % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * observe(&psi);
        }
        integral += acc * h / 3.0;
    }

    // N from the channel amplitudes, ‖ℰ_λ g‖² = (|ĝ(θ)|² + |ĝ(−θ)|²)/(4π sin θ).
    let (k1, k2) = match (window.lo.max(-2.0), window.hi.min(2.0)) {
        (lo, hi) if lo < hi => ((hi / 2.0).acos(), (lo / 2.0).acos()),
        _ => return Err(Error::Invalid("window misses the spectrum".into())),
    };
    let grid = 4000;
    let mut sup: f64 = 0.0;
    let mut inside = 0.0;
    let mut total = 0.0;
    for i in 0..grid {
        let theta = PI * (i as f64 + 0.5) / grid as f64;
        let a = packet.fourier(theta).norm_sqr() + packet.fourier(-theta).norm_sqr();
        total += a;
        if theta > k1 && theta < k2 {
            inside += a;
            sup = sup.max(a / (4.0 * PI * theta.sin()));
        }
    }
    let hs: f64 = sites
        .iter()
        .map(|&s| rig.site_weight(s).powi(2) * lattice_window_kernel(window, 0))
        .sum();
    Ok(EnergyWindowCheck {
        integral,
        bound: 2.0 * PI * sup * hs,
        sup_evaluation: sup.sqrt(),
        outside_mass: 1.0 - inside / total,
    })
}
