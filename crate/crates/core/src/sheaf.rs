//! Windowed Schmidt data, windowed fibers, gluing unitaries and sections.
//!
//! For a window `Δ`, `F_Δ = F E_Δ = Σ_j κ_j^Δ ⟨φ_j^Δ, ·⟩ ψ_j^Δ`. A regular
//! vector `f = F* c` restricts to `E_Δ f = F_Δ* c`, whose window coordinates
//! are `β^Δ = Ψ_Δ* c` with `Ψ_Δ = [ψ_1^Δ … ψ_d^Δ]`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fiber::{evaluation_operator, EvaluationOperator, FiberData, RANK_TOL};
use crate::lap::{windowed_boundary_value, LapOptions};
use crate::linalg::{c, eigh, fix_phase, hermitian_part, max_abs, op_norm, pinv, polar_unitary, unitarity_defect, CMat, CVec};
use crate::model::{lattice_window_kernel, window_projection, Rigging, SpectralModel, Window};

/// Singular values below this fraction of `‖F‖` are dropped from `F_Δ`.
pub const WINDOW_RANK_TOL: f64 = 1e-12;

/// Schmidt representation of `F E_Δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowData {
    pub window: Window,
    /// `κ_j^Δ`, nonincreasing, positive.
    pub kappa: Vec<f64>,
    /// `ψ_j^Δ` as columns, m × d.
    pub left: CMat,
    /// `φ_j^Δ` as columns in model coordinates, dim × d.
    pub right: CMat,
}

impl WindowData {
    pub fn rank(&self) -> usize {
        self.kappa.len()
    }

    /// `Σ (κ_j^Δ)²`.
    pub fn hs_norm_sq(&self) -> f64 {
        self.kappa.iter().map(|k| k * k).sum()
    }
}

/// Gram matrix `F E_Δ F*` on the auxiliary space.
fn window_gram(rig: &Rigging, window: &Window) -> CMat {
    match rig.model() {
        SpectralModel::Quadrature(_) => {
            let fe = rig.f_matrix() * window_projection(rig.model(), window).matrix;
            &fe * fe.adjoint()
        }
        // Exact on the infinite lattice; truncation would cut the 1/d tails
        // of the kernel.
        SpectralModel::Lattice(_) => {
            let sites = rig.auxiliary_sites();
            let m = sites.len();
            CMat::from_fn(m, m, |i, j| {
                let k = rig.site_weight(sites[i]) * rig.site_weight(sites[j]);
                c(k * lattice_window_kernel(window, sites[i] - sites[j]), 0.0)
            })
        }
    }
}

pub fn schmidt_window(rig: &Rigging, window: &Window) -> WindowData {
    let gram = window_gram(rig, window);
    let e = eigh(&gram);
    let scale = rig.gram().trace().re.max(f64::MIN_POSITIVE);
    let d = e.values.iter().take_while(|&&v| v > WINDOW_RANK_TOL * WINDOW_RANK_TOL * scale).count();
    let kappa: Vec<f64> = e.values[..d].iter().map(|v| v.sqrt()).collect();
    let left = e.vectors.columns(0, d).into_owned();
    let fe = rig.f_matrix() * window_projection(rig.model(), window).matrix;
    let mut right = CMat::zeros(fe.ncols(), d);
    for j in 0..d {
        let mut col = fe.adjoint() * left.column(j) / c(kappa[j], 0.0);
        fix_phase(&mut col);
        right.set_column(j, &col);
    }
    WindowData {
        window: *window,
        kappa,
        left,
        right,
    }
}

/// `β^Δ(E_Δ F* c) = Ψ_Δ* c`.
pub fn beta_coordinates(coords: &CVec, wd: &WindowData) -> Result<CVec> {
    if coords.len() != wd.left.nrows() {
        return Err(Error::DimensionMismatch {
            expected: wd.left.nrows(),
            got: coords.len(),
        });
    }
    Ok(wd.left.adjoint() * coords)
}

/// `Ψ^{Δ₁,Δ₂}_{jk} = ⟨ψ_j^{Δ₁}, ψ_k^{Δ₂}⟩`.
pub fn psi_matrix(w1: &WindowData, w2: &WindowData) -> CMat {
    w1.left.adjoint() * &w2.left
}

/// Fiber of the windowed pair at `λ`, in window coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedFiber {
    pub window: Window,
    pub fiber: FiberData,
    /// r × d on `β^Δ`.
    pub ev: EvaluationOperator,
    /// `Ψ_Δ`, m × d.
    pub psi: CMat,
}

impl WindowedFiber {
    pub fn rank(&self) -> usize {
        self.fiber.rank
    }

    /// `ℰ^Δ_λ(E_Δ F* c)`.
    pub fn evaluate(&self, coords: &CVec) -> Result<CVec> {
        if coords.len() != self.psi.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.psi.nrows(),
                got: coords.len(),
            });
        }
        Ok(&self.ev.matrix * (self.psi.adjoint() * coords))
    }

    /// Matrix of `c ↦ ℰ^Δ_λ(E_Δ F* c)`, r × m.
    pub fn restricted_matrix(&self) -> CMat {
        &self.ev.matrix * self.psi.adjoint()
    }
}

pub fn windowed_fiber(rig: &Rigging, wd: &WindowData, lambda: f64, opts: &LapOptions) -> Result<WindowedFiber> {
    let t = windowed_boundary_value(rig, &wd.window, lambda, opts)?;
    let phi_k = hermitian_part(&t.im_t).scale(1.0 / PI);
    let phi = hermitian_part(&(wd.left.adjoint() * phi_k * &wd.left));
    let fiber = FiberData::from_phi(lambda, phi, RANK_TOL)?;
    let ev = evaluation_operator(&fiber, Some(wd.window));
    Ok(WindowedFiber {
        window: wd.window,
        fiber,
        ev,
        psi: wd.left.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GluingUnitary {
    pub lambda: f64,
    pub source: Window,
    pub target: Window,
    /// Least-squares solution of `U X₁ = X₂` over the probes.
    pub u: CMat,
    /// Nearest unitary to `u`.
    pub polar: CMat,
    pub unitarity_defect: f64,
    /// `‖U X₁ − X₂‖` entrywise.
    pub residual: f64,
}

/// `U_{Δ₂,Δ₁}(λ)` with `U ℰ^{Δ₁}(E_{Δ₁} f) = ℰ^{Δ₂}(E_{Δ₂} f)`.
pub fn gluing_unitary(lambda: f64, from: &WindowedFiber, to: &WindowedFiber) -> Result<GluingUnitary> {
    if from.rank() != to.rank() {
        return Err(Error::FiberRankMismatch {
            source_rank: from.rank(),
            target_rank: to.rank(),
        });
    }
    let r = from.rank();
    let d = from.psi.ncols();
    let probes = from.psi.columns(0, (2 * r + 4).min(d)).into_owned();
    let x1 = from.restricted_matrix() * &probes;
    let x2 = to.restricted_matrix() * &probes;
    let u = &x2 * pinv(&x1, RANK_TOL);
    let residual = max_abs(&(&u * &x1 - &x2));
    Ok(GluingUnitary {
        lambda,
        source: from.window,
        target: to.window,
        polar: polar_unitary(&u),
        unitarity_defect: unitarity_defect(&u),
        residual,
        u,
    })
}

/// A section sampled on a λ grid in the fibers of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct SheafSection {
    pub window: Window,
    pub grid: Vec<f64>,
    /// Quadrature weights of the grid.
    pub weights: Vec<f64>,
    /// `None` where the grid point lies outside the window (or too close to
    /// its edge).
    pub values: Vec<Option<CVec>>,
}

impl SheafSection {
    /// `Σ w_i ‖s(λ_i)‖²` over the points the window covers.
    pub fn norm_sq(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.values)
            .filter_map(|(w, v)| v.as_ref().map(|v| w * v.norm_squared()))
            .sum()
    }
}

/// `λ ↦ ℰ^Δ_λ(E_Δ F* c)` on a grid.
pub fn evaluate_section(
    rig: &Rigging,
    wd: &WindowData,
    coords: &CVec,
    grid: &[f64],
    weights: &[f64],
    opts: &LapOptions,
) -> Result<SheafSection> {
    if grid.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: weights.len(),
        });
    }
    use rayon::prelude::*;
    let values = grid
        .par_iter()
        .map(|&lambda| match windowed_fiber(rig, wd, lambda, opts) {
            Ok(wf) => wf.evaluate(coords).map(Some),
            Err(Error::OutsideWindow { .. } | Error::EdgeOfSpectrum { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SheafSection {
        window: wd.window,
        grid: grid.to_vec(),
        weights: weights.to_vec(),
        values,
    })
}

/// Sup of the per-window norms along a nested chain, with the per-window
/// norms.
pub fn section_norm(chain: &[SheafSection]) -> (f64, Vec<f64>) {
    let norms: Vec<f64> = chain.iter().map(|s| s.norm_sq().sqrt()).collect();
    (norms.iter().copied().fold(0.0, f64::max), norms)
}

/// Operator norm of `Ψ`; at most one.
pub fn psi_norm(w1: &WindowData, w2: &WindowData) -> f64 {
    op_norm(&psi_matrix(w1, w2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::identity;
    use crate::model::{build_model, ModelConfig, Weight};

    fn quad(m: usize) -> Rigging {
        let model = build_model(&ModelConfig::quadrature(0.0, 1.0, 64)).unwrap();
        Rigging::new(model, Weight::Constant(1.0), m).unwrap()
    }

    fn lattice(m: usize) -> Rigging {
        let model = build_model(&ModelConfig::lattice(60)).unwrap();
        Rigging::new(model, Weight::Decay(1.0), m).unwrap()
    }

    fn win(lo: f64, hi: f64) -> Window {
        Window::new(lo, hi).unwrap()
    }

    #[test]
    fn schmidt_data_is_orthonormal_and_sorted() {
        for rig in [quad(3), lattice(3)] {
            let wd = schmidt_window(&rig, &win(0.2, 0.8));
            assert_eq!(wd.rank(), 3);
            assert!(wd.kappa.windows(2).all(|k| k[0] >= k[1]) && wd.kappa.iter().all(|&k| k > 0.0));
            assert!(max_abs(&(wd.left.adjoint() * &wd.left - identity(3))) < 1e-10);
            let gram = wd.right.adjoint() * &wd.right;
            if matches!(rig.model(), SpectralModel::Quadrature(_)) {
                assert!(max_abs(&(gram - identity(3))) < 1e-10);
            }
        }
    }

    #[test]
    fn quadrature_hs_norm_matches_assembled() {
        let rig = quad(4);
        let w = win(0.1, 0.65);
        let wd = schmidt_window(&rig, &w);
        let fe = rig.f_matrix() * window_projection(rig.model(), &w).matrix;
        assert!((wd.hs_norm_sq() - fe.norm_squared()).abs() < 1e-10);
    }

    #[test]
    fn disjoint_window_is_empty() {
        assert_eq!(schmidt_window(&quad(2), &win(2.0, 3.0)).rank(), 0);
        assert_eq!(schmidt_window(&lattice(2), &win(2.5, 3.0)).rank(), 0);
    }

    #[test]
    fn beta_of_schmidt_vector_is_unit() {
        // f = κ_1 φ_1 = F_Δ* ψ_1, whose coordinates are c = ψ_1.
        let rig = quad(3);
        let wd = schmidt_window(&rig, &win(0.3, 0.9));
        let beta = beta_coordinates(&wd.left.column(0).into_owned(), &wd).unwrap();
        let mut e1 = CVec::zeros(3);
        e1[0] = c(1.0, 0.0);
        assert!((beta - e1).norm() < 1e-12);
    }

    #[test]
    fn psi_of_window_with_itself_is_identity() {
        let rig = lattice(4);
        let wd = schmidt_window(&rig, &win(-1.0, 0.5));
        assert!(max_abs(&(psi_matrix(&wd, &wd) - identity(4))) < 1e-12);
    }

    #[test]
    fn gluing_with_itself_is_identity() {
        let rig = quad(3);
        let wd = schmidt_window(&rig, &win(0.2, 0.7));
        let wf = windowed_fiber(&rig, &wd, 0.5, &LapOptions::default()).unwrap();
        let g = gluing_unitary(0.5, &wf, &wf).unwrap();
        assert!(max_abs(&(g.u - identity(wf.rank()))) < 1e-10);
    }

    #[test]
    fn rank_mismatch_is_reported() {
        let rig = lattice(3);
        let wd = schmidt_window(&rig, &win(-1.0, 1.0));
        let wf = windowed_fiber(&rig, &wd, 0.0, &LapOptions::default()).unwrap();
        let mut other = wf.clone();
        other.fiber.rank = 1;
        assert_eq!(
            gluing_unitary(0.0, &wf, &other),
            Err(Error::FiberRankMismatch {
                source_rank: 2,
                target_rank: 1
            })
        );
    }

    #[test]
    fn zero_section_has_zero_norm() {
        let rig = quad(2);
        let wd = schmidt_window(&rig, &win(0.1, 0.9));
        let s = evaluate_section(&rig, &wd, &CVec::zeros(2), &[0.3, 0.5], &[0.5, 0.5], &LapOptions::default()).unwrap();
        assert_eq!(section_norm(&[s]).0, 0.0);
    }
}
