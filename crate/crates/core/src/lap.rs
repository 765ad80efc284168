//! Limiting absorption: boundary values of the sandwiched resolvent
//! `T(z) = F R_z(H) F*`, perturbed and windowed variants, and scans of the
//! regular set.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{c, condition_number, eigh, imaginary_part, max_abs, solve, CMat};
use crate::model::{free_green, Perturbation, Rigging, SpectralModel, Window};
use crate::quadrature::{cauchy_offaxis, graded_integral, principal_value};

/// Edge margin as a fraction of the spectral width.
pub const EDGE_MARGIN_FRACTION: f64 = 0.02;
/// Above this condition number `1 + T₀J` is treated as singular.
pub const RESONANCE_CONDITION: f64 = 1e10;
/// Tolerance on the extrapolation residual for membership in the regular set.
pub const REGULARITY_TOL: f64 = 1e-7;
/// Smallest eigenvalue of `Im T` tolerated before reporting a LAP violation.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMethod {
    /// Principal value plus `iπ` times the density (closed form on the lattice).
    Plemelj,
    /// Richardson extrapolation of `T(λ + i y_k)`, `y_k = 2^{-k} y₀`.
    Extrapolation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LapOptions {
    /// Edge margin as a fraction of the spectral width.
    pub edge_margin: f64,
    /// Number of extrapolation levels.
    pub levels: usize,
    pub tol: f64,
    /// Gauss nodes for the principal-value integral.
    pub pv_nodes: usize,
    /// Run the extrapolation alongside the Plemelj split and record the
    /// disagreement.
    pub cross_check: bool,
}

impl Default for LapOptions {
    fn default() -> Self {
        Self {
            edge_margin: EDGE_MARGIN_FRACTION,
            levels: 8,
            tol: REGULARITY_TOL,
            pv_nodes: 128,
            cross_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LapDiagnostics {
    pub method: BoundaryMethod,
    /// Distance between the two finest extrapolated values (0 when no
    /// extrapolation was run).
    pub residual: f64,
    pub converged: bool,
    /// Plemelj with cross-check: distance to the extrapolated value.
    pub disagreement: Option<f64>,
    /// Condition number of `1 + T₀J` for perturbed values.
    pub condition: Option<f64>,
}

/// `T_{λ+i0}(H)` with its imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryResolvent {
    pub lambda: f64,
    pub t: CMat,
    pub im_t: CMat,
    pub diagnostics: LapDiagnostics,
}

impl BoundaryResolvent {
    pub fn new(lambda: f64, t: CMat, diagnostics: LapDiagnostics) -> Result<Self> {
        let im_t = imaginary_part(&t);
        let min = eigh(&im_t).values.last().copied().unwrap_or(0.0);
        if min < -PSD_TOL * max_abs(&t).max(1.0) {
            return Err(Error::LapViolation { min_eigenvalue: min });
        }
        Ok(Self {
            lambda,
            t,
            im_t,
            diagnostics,
        })
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    /// `T(λ − i0) = T(λ + i0)*`.
    pub fn lower(&self) -> CMat {
        self.t.adjoint()
    }
}

fn density_outer(rig: &Rigging, x: f64) -> CMat {
    let d = rig.density_vector(x).expect("quadrature model");
    let m = d.len();
    CMat::from_fn(m, m, |i, j| c(d[i] * d[j], 0.0))
}

fn lattice_matrix(rig: &Rigging, z: Complex64, boundary: bool) -> Result<CMat> {
    let sites = rig.auxiliary_sites();
    let m = sites.len();
    let mut t = CMat::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let k = rig.site_weight(sites[i]) * rig.site_weight(sites[j]);
            t[(i, j)] = free_green(sites[i], sites[j], z, boundary)? * k;
        }
    }
    Ok(t)
}

/// `F R_z(H₀) F*` for `Im z > 0`.
pub fn sandwiched_resolvent(rig: &Rigging, z: Complex64) -> Result<CMat> {
    if !(z.im > 0.0) {
        return Err(Error::NonPositiveImaginary(z.im));
    }
    match rig.model() {
        SpectralModel::Quadrature(q) => Ok(cauchy_offaxis(|x| density_outer(rig, x), q.a, q.b, z.re, z.im)),
        SpectralModel::Lattice(_) => lattice_matrix(rig, z, false),
    }
}

/// Edge margin in absolute units for the model.
pub fn edge_margin(model: &SpectralModel, opts: &LapOptions) -> f64 {
    let (a, b) = model.spectrum();
    opts.edge_margin * (b - a)
}

fn check_interior(model: &SpectralModel, lambda: f64, opts: &LapOptions) -> Result<()> {
    let (a, b) = model.spectrum();
    let margin = edge_margin(model, opts);
    if !lambda.is_finite() {
        return Err(Error::NonFinite("lambda"));
    }
    if lambda - a < margin || b - lambda < margin {
        return Err(Error::EdgeOfSpectrum { lambda, margin });
    }
    Ok(())
}

/// Richardson extrapolation to `y = 0` of `T(λ + i y)` on `y_k = 2^{-k} y₀`.
///
/// Returns the extrapolated value and the distance between the two finest
/// diagonal entries of the tableau.
pub fn extrapolate<G>(eval: G, y0: f64, levels: usize) -> Result<(CMat, f64)>
where
    G: Fn(f64) -> Result<CMat>,
{
    let levels = levels.max(2);
    let mut prev: Vec<CMat> = Vec::new();
    let mut diag: Vec<CMat> = Vec::new();
    for k in 0..levels {
        let y = y0 * 0.5_f64.powi(k as i32);
        let mut row = vec![eval(y)?];
        for j in 1..=k {
            let f = 2.0_f64.powi(j as i32) - 1.0;
            let next = &row[j - 1] + (&row[j - 1] - &prev[j - 1]).scale(1.0 / f);
            row.push(next);
        }
        diag.push(row[k].clone());
        prev = row;
    }
    let n = diag.len();
    let residual = max_abs(&(&diag[n - 1] - &diag[n - 2]));
    Ok((diag.pop().unwrap(), residual))
}

/// Starting height for the extrapolation: well inside the disc of analyticity
/// around `λ` bounded by the spectrum edges.
fn initial_height(model: &SpectralModel, lambda: f64) -> f64 {
    let (a, b) = model.spectrum();
    let dist = (lambda - a).min(b - lambda);
    0.25 * dist.min(0.25 * (b - a))
}

fn plemelj(rig: &Rigging, lambda: f64, opts: &LapOptions) -> Result<CMat> {
    match rig.model() {
        SpectralModel::Quadrature(q) => {
            let re = principal_value(|x| density_outer(rig, x), q.a, q.b, lambda, opts.pv_nodes);
            let im = density_outer(rig, lambda).scale(PI);
            Ok(re + im * Complex64::i())
        }
        SpectralModel::Lattice(_) => lattice_matrix(rig, c(lambda, 0.0), true),
    }
}

fn extrapolated(rig: &Rigging, lambda: f64, opts: &LapOptions) -> Result<(CMat, f64)> {
    let y0 = initial_height(rig.model(), lambda);
    extrapolate(|y| sandwiched_resolvent(rig, c(lambda, y)), y0, opts.levels)
}

fn converged(residual: f64, t: &CMat, tol: f64) -> bool {
    residual < tol * max_abs(t).max(1.0)
}

/// `T_{λ+i0}(H₀)`.
pub fn boundary_value(
    rig: &Rigging,
    lambda: f64,
    method: BoundaryMethod,
    opts: &LapOptions,
) -> Result<BoundaryResolvent> {
    check_interior(rig.model(), lambda, opts)?;
    let (t, residual, ok, disagreement) = match method {
        BoundaryMethod::Plemelj => {
            let t = plemelj(rig, lambda, opts)?;
            if opts.cross_check {
                let (te, res) = extrapolated(rig, lambda, opts)?;
                let gap = max_abs(&(&t - &te));
                let ok = converged(res, &te, opts.tol);
                (t, res, ok, Some(gap))
            } else {
                (t, 0.0, true, None)
            }
        }
        BoundaryMethod::Extrapolation => {
            let (t, res) = extrapolated(rig, lambda, opts)?;
            let ok = converged(res, &t, opts.tol);
            (t, res, ok, None)
        }
    };
    BoundaryResolvent::new(
        lambda,
        t,
        LapDiagnostics {
            method,
            residual,
            converged: ok,
            condition: None,
            disagreement,
        },
    )
}

/// `(1 + T J)^{-1} T` together with the condition number of `1 + T J`.
pub fn perturb(t0: &CMat, j: &CMat) -> Result<(CMat, f64)> {
    if t0.shape() != j.shape() {
        return Err(Error::DimensionMismatch {
            expected: t0.nrows(),
            got: j.nrows(),
        });
    }
    let m = t0.nrows();
    let a = CMat::identity(m, m) + t0 * j;
    let cond = condition_number(&a);
    if !(cond <= RESONANCE_CONDITION) {
        return Err(Error::Resonance {
            lambda: f64::NAN,
            condition: cond,
        });
    }
    let t1 = solve(&a, t0).ok_or(Error::Resonance {
        lambda: f64::NAN,
        condition: cond,
    })?;
    Ok((t1, cond))
}

/// `T_{λ+i0}(H₀ + F*JF)` from the unperturbed boundary value.
pub fn perturbed_boundary_value(t0: &BoundaryResolvent, j: &Perturbation) -> Result<BoundaryResolvent> {
    let (t1, cond) = perturb(&t0.t, j.matrix()).map_err(|e| match e {
        Error::Resonance { condition, .. } => Error::Resonance {
            lambda: t0.lambda,
            condition,
        },
        other => other,
    })?;
    let mut diagnostics = t0.diagnostics.clone();
    diagnostics.condition = Some(cond);
    BoundaryResolvent::new(t0.lambda, t1, diagnostics)
}

fn window_on_model(model: &SpectralModel, window: &Window) -> Option<(f64, f64)> {
    let (a, b) = model.spectrum();
    let lo = window.lo.max(a);
    let hi = window.hi.min(b);
    (lo < hi).then_some((lo, hi))
}

fn check_in_window(model: &SpectralModel, window: &Window, lambda: f64, opts: &LapOptions) -> Result<()> {
    let margin = edge_margin(model, opts);
    if !(lambda - window.lo >= margin && window.hi - lambda >= margin) {
        return Err(Error::OutsideWindow {
            lambda,
            lo: window.lo,
            hi: window.hi,
            margin,
        });
    }
    check_interior(model, lambda, opts)
}

/// `(k - θ) / (2cos k - 2cos θ)`, smooth through `k = θ`.
fn lattice_pv_factor(k: f64, theta: f64) -> f64 {
    let h = 0.5 * (k - theta);
    let sinc = if h.abs() < 1e-8 { 1.0 - h * h / 6.0 } else { h.sin() / h };
    -1.0 / (2.0 * (0.5 * (k + theta)).sin() * sinc)
}

fn lattice_momentum_window(window: &Window) -> Option<(f64, f64)> {
    let lo = window.lo.max(-2.0);
    let hi = window.hi.min(2.0);
    (lo < hi).then(|| ((hi / 2.0).acos(), (lo / 2.0).acos()))
}

/// `F E_Δ R_{λ+i0}(H₀) E_Δ F*`.
pub fn windowed_boundary_value(
    rig: &Rigging,
    window: &Window,
    lambda: f64,
    opts: &LapOptions,
) -> Result<BoundaryResolvent> {
    let model = rig.model();
    check_in_window(model, window, lambda, opts)?;
    let t = match model {
        SpectralModel::Quadrature(_) => {
            let (lo, hi) = window_on_model(model, window).expect("λ lies in both");
            let re = principal_value(|x| density_outer(rig, x), lo, hi, lambda, opts.pv_nodes);
            re + density_outer(rig, lambda).scale(PI) * Complex64::i()
        }
        SpectralModel::Lattice(_) => {
            let (k1, k2) = lattice_momentum_window(window).expect("λ lies in both");
            let theta = (lambda / 2.0).acos();
            let sites = rig.auxiliary_sites();
            let m = sites.len();
            let mut t = CMat::zeros(m, m);
            for i in 0..m {
                for j in i..m {
                    let d = (sites[i] - sites[j]) as f64;
                    let re = principal_value(
                        |k| CMat::from_element(1, 1, c((k * d).cos() * lattice_pv_factor(k, theta), 0.0)),
                        k1,
                        k2,
                        theta,
                        opts.pv_nodes,
                    )[(0, 0)]
                        .re
                        / PI;
                    let im = (theta * d).cos() / (2.0 * theta.sin());
                    let w = rig.site_weight(sites[i]) * rig.site_weight(sites[j]);
                    t[(i, j)] = c(re, im) * w;
                    t[(j, i)] = t[(i, j)];
                }
            }
            t
        }
    };
    BoundaryResolvent::new(
        lambda,
        t,
        LapDiagnostics {
            method: BoundaryMethod::Plemelj,
            residual: 0.0,
            converged: true,
            condition: None,
            disagreement: None,
        },
    )
}

/// `F E_Δ R_z(H₀) E_Δ F*` for `Im z > 0`.
pub fn windowed_sandwiched_resolvent(rig: &Rigging, window: &Window, z: Complex64) -> Result<CMat> {
    if !(z.im > 0.0) {
        return Err(Error::NonPositiveImaginary(z.im));
    }
    let model = rig.model();
    let m = rig.m();
    if window_on_model(model, window).is_none() {
        return Ok(CMat::zeros(m, m));
    }
    match model {
        SpectralModel::Quadrature(_) => {
            let (lo, hi) = window_on_model(model, window).unwrap();
            Ok(cauchy_offaxis(|x| density_outer(rig, x), lo, hi, z.re, z.im))
        }
        SpectralModel::Lattice(_) => {
            let (k1, k2) = lattice_momentum_window(window).unwrap();
            let theta = (z.re / 2.0).clamp(-1.0, 1.0).acos();
            let scale = z.im / (2.0 * theta.sin()).max(z.im.sqrt());
            let sites = rig.auxiliary_sites();
            let weights: Vec<f64> = sites.iter().map(|&s| rig.site_weight(s)).collect();
            Ok(graded_integral(
                |k| {
                    let denom = c(2.0 * k.cos(), 0.0) - z;
                    CMat::from_fn(m, m, |i, j| {
                        let d = (sites[i] - sites[j]) as f64;
                        c((k * d).cos() * weights[i] * weights[j] / PI, 0.0) / denom
                    })
                },
                k1,
                k2,
                theta,
                scale,
            ))
        }
    }
}

/// Regularity verdict for one operator at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointVerdict {
    pub regular: bool,
    pub residual: f64,
    pub condition: Option<f64>,
    pub reason: Option<String>,
}

/// Approximation of `Λ(H₀, F) ∩ Λ(H₁, F) ∩ …` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularPointScan {
    pub grid: Vec<f64>,
    /// `verdicts[k][i]`: operator `k` (0 is `H₀`) at grid point `i`.
    pub verdicts: Vec<Vec<PointVerdict>>,
    /// Regular for every operator.
    pub regular: Vec<bool>,
}

impl RegularPointScan {
    pub fn excluded(&self) -> Vec<f64> {
        self.grid
            .iter()
            .zip(&self.regular)
            .filter(|(_, &r)| !r)
            .map(|(&x, _)| x)
            .collect()
    }

    pub fn regular_points(&self) -> Vec<f64> {
        self.grid
            .iter()
            .zip(&self.regular)
            .filter(|(_, &r)| r)
            .map(|(&x, _)| x)
            .collect()
    }

    pub fn excluded_fraction(&self) -> f64 {
        if self.grid.is_empty() {
            return 0.0;
        }
        self.excluded().len() as f64 / self.grid.len() as f64
    }
}

fn irregular(reason: String) -> PointVerdict {
    PointVerdict {
        regular: false,
        residual: f64::INFINITY,
        condition: None,
        reason: Some(reason),
    }
}

/// Certifies each grid point for `H₀` and for `H₀ + F*J_kF`, in parallel over
/// the grid.
pub fn scan_regular_points(
    rig: &Rigging,
    perturbations: &[Perturbation],
    grid: &[f64],
    opts: &LapOptions,
) -> RegularPointScan {
    let check = LapOptions {
        cross_check: true,
        ..*opts
    };
    let per_point: Vec<Vec<PointVerdict>> = grid
        .par_iter()
        .map(|&lambda| {
            let t0 = match boundary_value(rig, lambda, BoundaryMethod::Plemelj, &check) {
                Ok(t0) => t0,
                Err(e) => return vec![irregular(e.to_string()); perturbations.len() + 1],
            };
            let base_ok = t0.diagnostics.converged;
            let mut out = vec![PointVerdict {
                regular: base_ok,
                residual: t0.diagnostics.residual,
                condition: None,
                reason: (!base_ok).then(|| "extrapolation did not converge".to_string()),
            }];
            for j in perturbations {
                out.push(match perturbed_boundary_value(&t0, j) {
                    Ok(t1) => PointVerdict {
                        regular: base_ok,
                        residual: t0.diagnostics.residual,
                        condition: t1.diagnostics.condition,
                        reason: None,
                    },
                    Err(e) => irregular(e.to_string()),
                });
            }
            out
        })
        .collect();
    let n_ops = perturbations.len() + 1;
    let verdicts: Vec<Vec<PointVerdict>> = (0..n_ops)
        .map(|k| per_point.iter().map(|p| p[k].clone()).collect())
        .collect();
    let regular = per_point.iter().map(|p| p.iter().all(|v| v.regular)).collect();
    RegularPointScan {
        grid: grid.to_vec(),
        verdicts,
        regular,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, ModelConfig, Weight};

    fn friedrichs(m: usize) -> Rigging {
        let model = build_model(&ModelConfig::quadrature(0.0, 1.0, 64)).unwrap();
        Rigging::new(model, Weight::Constant(1.0), m).unwrap()
    }

    fn lattice(m: usize) -> Rigging {
        let model = build_model(&ModelConfig::lattice(50)).unwrap();
        Rigging::new(model, Weight::Constant(1.0), m).unwrap()
    }

    #[test]
    fn offaxis_matches_antiderivative() {
        let z = c(0.5, 0.5);
        let t = sandwiched_resolvent(&friedrichs(1), z).unwrap();
        let want = ((c(1.0, 0.0) - z) / (-z)).ln();
        assert!((t[(0, 0)] - want).norm() < 1e-12);
    }

    #[test]
    fn offaxis_rejects_real_axis() {
        assert_eq!(
            sandwiched_resolvent(&friedrichs(1), c(0.5, 0.0)),
            Err(Error::NonPositiveImaginary(0.0))
        );
    }

    #[test]
    fn offaxis_conjugate_symmetry() {
        let rig = friedrichs(3);
        let z = c(0.3, 0.2);
        let t = sandwiched_resolvent(&rig, z).unwrap();
        // T(z̄) = T(z)* and, for a real symmetric density, T(z)ᵀ = T(z).
        assert!(max_abs(&(&t - t.transpose())) < 1e-12);
        let lat = lattice(3);
        let t = sandwiched_resolvent(&lat, z).unwrap();
        assert!(max_abs(&(&t - t.transpose())) < 1e-12);
    }

    #[test]
    fn boundary_values_of_friedrichs() {
        let opts = LapOptions::default();
        let rig = friedrichs(1);
        let t = boundary_value(&rig, 0.5, BoundaryMethod::Plemelj, &opts).unwrap();
        assert!((t.t[(0, 0)] - c(0.0, PI)).norm() < 1e-12);
        let t = boundary_value(&rig, 0.25, BoundaryMethod::Plemelj, &opts).unwrap();
        assert!((t.t[(0, 0)] - c(3.0_f64.ln(), PI)).norm() < 1e-12);
        let e = boundary_value(&rig, 0.25, BoundaryMethod::Extrapolation, &opts).unwrap();
        assert!(e.diagnostics.converged);
        assert!((e.t[(0, 0)] - c(3.0_f64.ln(), PI)).norm() < 1e-8);
    }

    #[test]
    fn boundary_value_rejects_edges() {
        let opts = LapOptions::default();
        assert!(matches!(
            boundary_value(&friedrichs(1), 0.01, BoundaryMethod::Plemelj, &opts),
            Err(Error::EdgeOfSpectrum { .. })
        ));
        assert!(matches!(
            boundary_value(&lattice(1), 2.0, BoundaryMethod::Plemelj, &opts),
            Err(Error::EdgeOfSpectrum { .. })
        ));
    }

    #[test]
    fn lattice_band_center() {
        let t = boundary_value(&lattice(1), 0.0, BoundaryMethod::Plemelj, &LapOptions::default()).unwrap();
        assert!((t.t[(0, 0)] - c(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn perturbed_scalar_algebra() {
        let t0 = BoundaryResolvent::new(
            0.5,
            CMat::from_element(1, 1, c(0.0, 1.0)),
            LapDiagnostics {
                method: BoundaryMethod::Plemelj,
                residual: 0.0,
                converged: true,
                condition: None,
                disagreement: None,
            },
        )
        .unwrap();
        let t1 = perturbed_boundary_value(&t0, &Perturbation::scalar(1.0, 1)).unwrap();
        assert!((t1.t[(0, 0)] - c(0.5, 0.5)).norm() < 1e-15);
        let same = perturbed_boundary_value(&t0, &Perturbation::zero(1)).unwrap();
        assert_eq!(same.t, t0.t);
    }

    #[test]
    fn perturbed_imaginary_part_is_psd() {
        let rig = friedrichs(1);
        let opts = LapOptions::default();
        let j = Perturbation::scalar(0.7, 1);
        for k in 0..50 {
            let lam = 0.03 + 0.94 * k as f64 / 49.0;
            let t0 = boundary_value(&rig, lam, BoundaryMethod::Plemelj, &opts).unwrap();
            let t1 = perturbed_boundary_value(&t0, &j).unwrap();
            assert!(eigh(&t1.im_t).values[0] >= -1e-10);
        }
    }

    #[test]
    fn herglotz_off_axis() {
        for rig in [friedrichs(3), lattice(3)] {
            for &y in &[1.0, 0.1, 0.01] {
                let t = sandwiched_resolvent(&rig, c(0.4, y)).unwrap();
                let min = *eigh(&imaginary_part(&t)).values.last().unwrap();
                assert!(min >= -1e-12, "y={y}: {min}");
            }
        }
    }

    #[test]
    fn full_window_equals_boundary_value() {
        let opts = LapOptions::default();
        for rig in [friedrichs(3), lattice(3)] {
            let full = boundary_value(&rig, 0.5, BoundaryMethod::Plemelj, &opts).unwrap();
            let w = windowed_boundary_value(&rig, &Window::new(-3.0, 3.0).unwrap(), 0.5, &opts).unwrap();
            assert!(max_abs(&(&full.t - &w.t)) < 1e-8);
        }
    }

    #[test]
    fn windowed_imaginary_part_is_window_independent() {
        let opts = LapOptions::default();
        for rig in [friedrichs(3), lattice(3)] {
            let a = windowed_boundary_value(&rig, &Window::new(0.3, 0.7).unwrap(), 0.5, &opts).unwrap();
            let b = windowed_boundary_value(&rig, &Window::new(0.4, 0.6).unwrap(), 0.5, &opts).unwrap();
            assert!(max_abs(&(&a.im_t - &b.im_t)) < 1e-8);
            // The real parts differ by the principal-value tail over
            // (0.3, 0.4) ∪ (0.6, 0.7), which is regular there.
            let gap = max_abs(&(&a.t - &b.t));
            assert!(gap > 1e-3);
        }
    }

    #[test]
    fn quadrature_window_tail_is_a_regular_integral() {
        let opts = LapOptions::default();
        let rig = friedrichs(1);
        let a = windowed_boundary_value(&rig, &Window::new(0.3, 0.7).unwrap(), 0.5, &opts).unwrap();
        let b = windowed_boundary_value(&rig, &Window::new(0.4, 0.6).unwrap(), 0.5, &opts).unwrap();
        // Both windows are symmetric about λ, so both principal values vanish.
        assert!(a.t[(0, 0)].re.abs() < 1e-12 && b.t[(0, 0)].re.abs() < 1e-12);
        let c1 = windowed_boundary_value(&rig, &Window::new(0.3, 0.6).unwrap(), 0.5, &opts).unwrap();
        // ∫_{0.3}^{0.6} dμ/(μ - 0.5) = ln(0.1/0.2)
        assert!((c1.t[(0, 0)].re - 0.5_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn lattice_window_matches_offaxis_limit() {
        let rig = lattice(3);
        let w = Window::new(-0.5, 1.5).unwrap();
        let on = windowed_boundary_value(&rig, &w, 0.3, &LapOptions::default()).unwrap();
        let near = windowed_sandwiched_resolvent(&rig, &w, c(0.3, 1e-7)).unwrap();
        assert!(max_abs(&(&on.t - &near)) < 1e-5, "{}", max_abs(&(&on.t - &near)));
    }

    #[test]
    fn window_exhaustion_is_monotone() {
        let opts = LapOptions::default();
        for rig in [friedrichs(2), lattice(2)] {
            let (a, b) = rig.model().spectrum();
            let full = boundary_value(&rig, 0.5, BoundaryMethod::Plemelj, &opts).unwrap();
            let mut last = f64::INFINITY;
            for k in 1..6 {
                let s = k as f64 / 6.0;
                let w = Window::new(0.5 - s * (0.5 - a), 0.5 + s * (b - 0.5)).unwrap();
                let gap = max_abs(&(&windowed_boundary_value(&rig, &w, 0.5, &opts).unwrap().t - &full.t));
                assert!(gap < last);
                last = gap;
            }
        }
    }

    #[test]
    fn extrapolation_agrees_with_plemelj() {
        let opts = LapOptions {
            cross_check: true,
            ..LapOptions::default()
        };
        for rig in [friedrichs(4), lattice(3)] {
            let (a, b) = rig.model().spectrum();
            for k in 0..25 {
                let lam = a + (b - a) * (0.03 + 0.94 * k as f64 / 24.0);
                let t = boundary_value(&rig, lam, BoundaryMethod::Plemelj, &opts).unwrap();
                assert!(t.diagnostics.converged, "lam={lam}");
                let gap = t.diagnostics.disagreement.unwrap();
                assert!(gap < 1e-6, "lam={lam}: {gap}");
            }
        }
    }

    #[test]
    fn free_quadrature_scan_is_all_regular() {
        let rig = friedrichs(2);
        let grid: Vec<f64> = (0..101).map(|k| 0.03 + 0.94 * k as f64 / 100.0).collect();
        let scan = scan_regular_points(&rig, &[], &grid, &LapOptions::default());
        assert_eq!(scan.excluded(), Vec::<f64>::new());
    }

    #[test]
    fn lattice_edges_are_excluded() {
        let scan = scan_regular_points(&lattice(2), &[], &[-2.0, 0.0, 2.0], &LapOptions::default());
        assert_eq!(scan.excluded(), vec![-2.0, 2.0]);
    }
}
