//! Fiber spaces `h_λ = closure(ran η(λ))` and evaluation operators.
//!
//! With `φ = (1/π) Im T_{λ+i0}` and `η = √φ`, the fiber basis `B` (m × r)
//! spans the range of `η`, and the evaluation operator takes the
//! β-coordinates of `f = F* β` to `B* η β`. Its matrix `E` therefore
//! satisfies `E* E = φ`, which is the identity `ℰ^◊ ℰ = (1/π) Im R`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lap::{BoundaryResolvent, PSD_TOL};
use crate::linalg::{eigh, hermitian_part, max_abs, pinv, singular_values, CMat, CVec};
use crate::model::{ModelVector, Rigging, SpectralModel, Window};

/// Relative eigenvalue threshold separating the fiber from round-off.
pub const RANK_TOL: f64 = 1e-8;

/// `φ = (1/π) Im T`.
pub fn phi_matrix(t: &BoundaryResolvent) -> Result<CMat> {
    let phi = hermitian_part(&t.im_t).scale(1.0 / PI);
    let min = eigh(&phi).values.last().copied().unwrap_or(0.0);
    if min < -PSD_TOL * max_abs(&phi).max(1.0) {
        return Err(Error::LapViolation { min_eigenvalue: min });
    }
    Ok(phi)
}

/// Eigenvalues of `φ` below this fraction of the largest are round-off.
/// Without the cut, `√(ε·max)` lands right at the rank threshold of `η`.
pub const PHI_FLOOR: f64 = 1e-14;

pub fn eta_matrix(phi: &CMat) -> CMat {
    let e = eigh(phi);
    let top = e.values.first().copied().unwrap_or(0.0).max(0.0);
    let mut out = CMat::zeros(phi.nrows(), phi.ncols());
    for (k, &v) in e.values.iter().enumerate() {
        if v > PHI_FLOOR * top {
            let col = e.vectors.column(k);
            out += (col * col.adjoint()).scale(v.sqrt());
        }
    }
    hermitian_part(&out)
}

/// Orthonormal basis of the span of the eigenvectors of `η` with eigenvalue
/// above `rank_tol` times the largest one.
pub fn fiber_space(eta: &CMat, rank_tol: f64) -> (CMat, usize) {
    let e = eigh(eta);
    let top = e.values.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return (CMat::zeros(eta.nrows(), 0), 0);
    }
    let r = e.values.iter().take_while(|&&v| v > rank_tol * top).count();
    (e.vectors.columns(0, r).into_owned(), r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberData {
    pub lambda: f64,
    pub phi: CMat,
    pub eta: CMat,
    /// m × r, orthonormal columns.
    pub basis: CMat,
    pub rank: usize,
    pub rank_tol: f64,
}

impl FiberData {
    pub fn new(t: &BoundaryResolvent, rank_tol: f64) -> Result<Self> {
        Self::from_phi(t.lambda, phi_matrix(t)?, rank_tol)
    }

    pub fn from_phi(lambda: f64, phi: CMat, rank_tol: f64) -> Result<Self> {
        let min = eigh(&phi).values.last().copied().unwrap_or(0.0);
        if min < -PSD_TOL * max_abs(&phi).max(1.0) {
            return Err(Error::LapViolation { min_eigenvalue: min });
        }
        let eta = eta_matrix(&phi);
        let (basis, rank) = fiber_space(&eta, rank_tol);
        Ok(Self {
            lambda,
            phi,
            eta,
            basis,
            rank,
            rank_tol,
        })
    }

    pub fn m(&self) -> usize {
        self.phi.nrows()
    }
}

/// `ℰ_λ` as an r × m matrix acting on β-coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationOperator {
    pub lambda: f64,
    pub matrix: CMat,
    /// `None` for the full space, otherwise the window of `ℰ^Δ`.
    pub window: Option<Window>,
}

impl EvaluationOperator {
    pub fn rank(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn m(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn apply(&self, beta: &CVec) -> Result<CVec> {
        if beta.len() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                got: beta.len(),
            });
        }
        Ok(&self.matrix * beta)
    }

    pub fn hs_norm(&self) -> f64 {
        self.matrix.norm()
    }

    /// `ℰ_λ g` for a vector known through `γ = F (1/π) Im R_{λ+i0} g`.
    ///
    /// Determined by `⟨ℰ f, ℰ g⟩ = ⟨f, γ⟩_{1,-1}` for all regular `f`.
    pub fn apply_density(&self, gamma: &CVec) -> Result<CVec> {
        if gamma.len() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                got: gamma.len(),
            });
        }
        Ok(pinv(&self.matrix, RANK_TOL).adjoint() * gamma)
    }
}

pub fn evaluation_operator(fiber: &FiberData, window: Option<Window>) -> EvaluationOperator {
    EvaluationOperator {
        lambda: fiber.lambda,
        matrix: fiber.basis.adjoint() * &fiber.eta,
        window,
    }
}

/// `ℰ^◊`: fiber coordinates to `𝓗₋₁` coordinates (`F g`).
pub fn diamond(ev: &EvaluationOperator) -> CMat {
    ev.matrix.adjoint()
}

/// β-coordinates (columns, m × r) of vectors `b_j ∈ 𝓗₁` with
/// `ℰ_λ b_j` orthonormal.
pub fn fiber_basis_vectors(ev: &EvaluationOperator) -> Result<CMat> {
    let r = ev.rank();
    if r == 0 {
        return Err(Error::RankDeficient { lambda: ev.lambda });
    }
    let s = singular_values(&ev.matrix);
    if s.len() < r || s[r - 1] <= RANK_TOL * s[0] {
        return Err(Error::RankDeficient { lambda: ev.lambda });
    }
    Ok(pinv(&ev.matrix, RANK_TOL))
}

/// `γ = F (1/π) Im R_{λ+i0}(H₀) g` for a model vector `g`.
pub fn spectral_density_image(rig: &Rigging, lambda: f64, g: &ModelVector) -> Result<CVec> {
    match (rig.model(), g) {
        (SpectralModel::Quadrature(_), ModelVector::Function(f)) => {
            let d = rig.density_vector(lambda)?;
            let v = f(lambda);
            Ok(CVec::from_iterator(d.len(), d.iter().map(|&x| v * x)))
        }
        (SpectralModel::Lattice(l), ModelVector::Sites(v)) => {
            if v.len() != rig.model().dim() {
                return Err(Error::DimensionMismatch {
                    expected: rig.model().dim(),
                    got: v.len(),
                });
            }
            if !(lambda > -2.0 && lambda < 2.0) {
                return Err(Error::EdgeOfSpectrum { lambda, margin: 0.0 });
            }
            let theta = (lambda / 2.0).acos();
            let norm = 1.0 / (2.0 * PI * theta.sin());
            let sites = rig.auxiliary_sites();
            Ok(CVec::from_iterator(
                sites.len(),
                sites.iter().map(|&s| {
                    let acc: Complex64 = v
                        .iter()
                        .enumerate()
                        .map(|(i, &x)| x * (theta * (s - l.site(i)) as f64).cos())
                        .sum();
                    acc * norm * rig.site_weight(s)
                }),
            ))
        }
        _ => Err(Error::WrongModel("matching vector representation")),
    }
}

/// `ℰ_λ g` for a model vector.
pub fn evaluate_vector(rig: &Rigging, ev: &EvaluationOperator, g: &ModelVector) -> Result<CVec> {
    ev.apply_density(&spectral_density_image(rig, ev.lambda, g)?)
}

/// `‖ℰ_λ‖²_HS = tr φ`, returned as the residual of that identity.
pub fn hs_identity_residual(fiber: &FiberData, ev: &EvaluationOperator) -> f64 {
    (ev.hs_norm().powi(2) - fiber.phi.trace().re).abs()
}

/// `‖ℰ^◊ ℰ − φ‖` entrywise.
pub fn diamond_identity_residual(fiber: &FiberData, ev: &EvaluationOperator) -> f64 {
    max_abs(&(diamond(ev) * &ev.matrix - &fiber.phi))
}
