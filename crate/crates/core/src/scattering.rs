//! Forms `𝔞_±(λ)`, wave matrices `w_±(λ)`, scattering matrices and their
//! direct integrals.
//!
//! Everything is carried out on m × m auxiliary matrices: with `V = F*JF`,
//! `T₁ = (1 + T₀J)^{-1} T₀`, and for `f = F*a`, `g = F*b`
//!
//! ```text
//! ⟨f, 𝔞_± g⟩ = a* φ₁ (1 + J T₀^±) b = a* (1 − T₁^∓ J) φ₀ b,
//! ```
//!
//! where `T^+ = T_{λ+i0}` and `T^- = T_{λ−i0} = (T^+)*`.

use std::f64::consts::PI;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fiber::{evaluation_operator, EvaluationOperator, FiberData, RANK_TOL};
use crate::lap::{boundary_value, perturbed_boundary_value, BoundaryMethod, BoundaryResolvent, LapOptions, RESONANCE_CONDITION};
use crate::linalg::{
    c, condition_number, eigenvalues, hermitian_part, identity, max_abs, nuclear_norm, op_norm, pinv, polar_unitary, solve,
    unitarity_defect, CMat, CVec, I,
};
use crate::model::{free_green, Perturbation, Rigging};

/// Above this the wave-matrix system is declared inconsistent.
pub const WELL_DEFINEDNESS_TOL: f64 = 1e-6;

/// Singular values of `ℰ` below this fraction are treated as zero when
/// inverting on the fiber. The fiber rank cut is `RANK_TOL`, so every kept
/// direction survives.
const PINV_RTOL: f64 = 1e-3 * RANK_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// `T_{λ±i0}` from the upper boundary value.
fn t_sign(t: &BoundaryResolvent, sign: Sign) -> CMat {
    match sign {
        Sign::Plus => t.t.clone(),
        Sign::Minus => t.lower(),
    }
}

/// Boundary value, fiber and evaluation operator of one operator at `λ`.
#[derive(Debug, Clone)]
pub struct OperatorAtLambda {
    pub t: BoundaryResolvent,
    pub fiber: FiberData,
    pub ev: EvaluationOperator,
}

impl OperatorAtLambda {
    pub fn new(t: BoundaryResolvent) -> Result<Self> {
        if !t.diagnostics.converged {
            return Err(Error::Irregular { lambda: t.lambda });
        }
        let fiber = FiberData::new(&t, RANK_TOL)?;
        let ev = evaluation_operator(&fiber, None);
        Ok(Self { t, fiber, ev })
    }

    /// Boundary data of `H₀` from the model.
    pub fn unperturbed(rig: &Rigging, lambda: f64, opts: &LapOptions) -> Result<Self> {
        Self::new(boundary_value(rig, lambda, BoundaryMethod::Plemelj, opts)?)
    }

    /// Boundary data of `H + F*JF`. The density is taken as the congruence
    /// `φ₁ = A φ₀ A*`, `A = (1 + T₀J)^{-1}`, which equals `(1/π) Im T₁` but
    /// cannot raise the rank through round-off.
    pub fn perturbed(&self, j: &Perturbation) -> Result<Self> {
        let t = perturbed_boundary_value(&self.t, j)?;
        if !t.diagnostics.converged {
            return Err(Error::Irregular { lambda: t.lambda });
        }
        let m = self.m();
        let a = solve(&(identity(m) + &self.t.t * j.matrix()), &identity(m)).ok_or(Error::Resonance {
            lambda: t.lambda,
            condition: f64::INFINITY,
        })?;
        let phi = hermitian_part(&(&a * &self.fiber.phi * a.adjoint()));
        let fiber = FiberData::from_phi(t.lambda, phi, RANK_TOL)?;
        let ev = evaluation_operator(&fiber, None);
        Ok(Self { t, fiber, ev })
    }

    pub fn lambda(&self) -> f64 {
        self.t.lambda
    }

    pub fn rank(&self) -> usize {
        self.fiber.rank
    }

    pub fn m(&self) -> usize {
        self.t.dim()
    }

    fn e(&self) -> &CMat {
        &self.ev.matrix
    }
}

fn check_pair(h1: &OperatorAtLambda, h0: &OperatorAtLambda, j: &Perturbation) -> Result<()> {
    let m = h0.m();
    for got in [h1.m(), j.dim()] {
        if got != m {
            return Err(Error::DimensionMismatch { expected: m, got });
        }
    }
    if h1.lambda() != h0.lambda() {
        return Err(Error::Invalid(format!(
            "boundary data at different energies {} and {}",
            h1.lambda(),
            h0.lambda()
        )));
    }
    Ok(())
}

/// `𝔞_±(λ; H₁, H₀)` in β-coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct APlusMinus {
    pub lambda: f64,
    pub sign: Sign,
    /// `(1 − T₁^∓ J) φ₀`.
    pub matrix: CMat,
    /// `φ₁ (1 + J T₀^±)`.
    pub left: CMat,
    /// Relative gap between the two factorizations.
    pub residual: f64,
}

/// `𝔞_±(λ; H₁, H₀)` where `H₁ = H₀ + F*JF`.
pub fn a_form(sign: Sign, h1: &OperatorAtLambda, h0: &OperatorAtLambda, j: &Perturbation) -> Result<APlusMinus> {
    check_pair(h1, h0, j)?;
    let m = h0.m();
    let jm = j.matrix();
    let left = &h1.fiber.phi * (identity(m) + jm * t_sign(&h0.t, sign));
    let right = (identity(m) - t_sign(&h1.t, sign.flip()) * jm) * &h0.fiber.phi;
    let residual = max_abs(&(&left - &right)) / max_abs(&right).max(1.0);
    Ok(APlusMinus {
        lambda: h0.lambda(),
        sign,
        matrix: right,
        left,
        residual,
    })
}

/// `(y/π) F R_{λ∓iy}(H₁) R_{λ±iy}(H₀) F*` from sandwiched resolvents of
/// `H₀` at `λ ± iy`, using `R₁(w) = R₀(w) − R₀(w)F*J(1 + T₀(w)J)^{-1}F R₀(w)`
/// and `F R₀(w) R₀(z) F* = (T₀(w) − T₀(z)) / (w − z)`.
pub fn regularized_a_form(sign: Sign, t_upper: &CMat, y: f64, j: &Perturbation) -> Result<CMat> {
    let m = t_upper.nrows();
    let t_lower = t_upper.adjoint();
    let (tw, tz, wz) = match sign {
        // w = λ − iy, z = λ + iy
        Sign::Plus => (t_lower, t_upper.clone(), c(0.0, -2.0 * y)),
        Sign::Minus => (t_upper.clone(), t_lower, c(0.0, 2.0 * y)),
    };
    let jm = j.matrix();
    let a = identity(m) + &tw * jm;
    if condition_number(&a) > RESONANCE_CONDITION {
        return Err(Error::Resonance {
            lambda: f64::NAN,
            condition: condition_number(&a),
        });
    }
    let prod0 = (&tw - &tz) * (1.0 / wz);
    // F R₁(w) R₀(z) F* = [1 − T₀(w) J (1 + T₀(w) J)^{-1}] F R₀(w) R₀(z) F* = (1 + T₀(w)J)^{-1} (…)
    let prod1 = solve(&a, &prod0).ok_or(Error::Resonance {
        lambda: f64::NAN,
        condition: f64::INFINITY,
    })?;
    Ok(prod1.scale(y / PI))
}

/// `w_±(λ; H₁, H₀)`, an r₁ × r₀ matrix between fiber coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveMatrix {
    pub lambda: f64,
    pub sign: Sign,
    /// From `w ℰ₀ = ℰ₁ (1 + V R_{λ±i0}(H₀))`.
    pub w: CMat,
    /// Least-squares solution of `⟨ℰ₁ f, w ℰ₀ g⟩ = ⟨f, 𝔞_± g⟩`.
    pub from_form: CMat,
    /// `max |w − from_form|`.
    pub agreement: f64,
    /// Residual of the defining equations for `from_form`, relative to `‖𝔞‖`.
    pub form_residual: f64,
    /// How far `ℰ₁ (1 + J T₀^±)` is from vanishing on `ker ℰ₀`.
    pub kernel_residual: f64,
    pub unitarity_defect: f64,
    pub norm: f64,
    /// Polar factor of `w`, kept for diagnostics only.
    pub polar: CMat,
}

impl WaveMatrix {
    pub fn r0(&self) -> usize {
        self.w.ncols()
    }

    pub fn r1(&self) -> usize {
        self.w.nrows()
    }
}

/// Both constructions of `w_±(λ; H₁, H₀)`; errors when the defining
/// system is inconsistent.
pub fn wave_matrix(
    a: &APlusMinus,
    h1: &OperatorAtLambda,
    h0: &OperatorAtLambda,
    j: &Perturbation,
) -> Result<WaveMatrix> {
    check_pair(h1, h0, j)?;
    let m = h0.m();
    let (e0, e1) = (h0.e(), h1.e());
    let e0p = pinv(e0, PINV_RTOL);
    let lifted = e1 * (identity(m) + j.matrix() * t_sign(&h0.t, a.sign));
    let w = &lifted * &e0p;
    let kernel = &lifted * (identity(m) - &e0p * e0);
    let kernel_residual = op_norm(&kernel) / op_norm(&lifted).max(1.0);

    let e1p_adj = pinv(&e1.adjoint(), PINV_RTOL);
    let from_form = e1p_adj * &a.matrix * &e0p;
    let rebuilt = e1.adjoint() * &from_form * e0;
    let form_residual = max_abs(&(&rebuilt - &a.matrix)) / max_abs(&a.matrix).max(1.0);
    if form_residual > WELL_DEFINEDNESS_TOL || kernel_residual > WELL_DEFINEDNESS_TOL {
        return Err(Error::WellDefinedness {
            residual: form_residual.max(kernel_residual),
        });
    }
    let agreement = max_abs(&(&w - &from_form));
    Ok(WaveMatrix {
        lambda: a.lambda,
        sign: a.sign,
        unitarity_defect: unitarity_defect(&w),
        norm: op_norm(&w),
        polar: polar_unitary(&w),
        w,
        from_form,
        agreement,
        form_residual,
        kernel_residual,
    })
}

/// `a_form` followed by `wave_matrix`.
pub fn wave_matrix_for(
    sign: Sign,
    h1: &OperatorAtLambda,
    h0: &OperatorAtLambda,
    j: &Perturbation,
) -> Result<WaveMatrix> {
    let a = a_form(sign, h1, h0, j)?;
    wave_matrix(&a, h1, h0, j)
}

/// `‖w_±(H₂,H₀) − w_±(H₂,H₁) w_±(H₁,H₀)‖` with `H_k = H₀ + F*J_kF`.
pub fn multiplicativity_check(
    sign: Sign,
    h0: &OperatorAtLambda,
    h1: &OperatorAtLambda,
    h2: &OperatorAtLambda,
    j1: &Perturbation,
    j2: &Perturbation,
) -> Result<f64> {
    let w20 = wave_matrix_for(sign, h2, h0, j2)?;
    let w21 = wave_matrix_for(sign, h2, h1, &j2.minus(j1)?)?;
    let w10 = wave_matrix_for(sign, h1, h0, j1)?;
    if w21.r0() != w10.r1() {
        return Err(Error::FiberRankMismatch {
            source_rank: w10.r1(),
            target_rank: w21.r0(),
        });
    }
    Ok(op_norm(&(&w20.w - &w21.w * &w10.w)))
}

/// `S(λ)` on `h_λ(H₀)` with its spectral diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix {
    pub lambda: f64,
    pub s: CMat,
    /// Arguments of the eigenvalues, ascending in `(−π, π]`.
    pub eigenphases: Vec<f64>,
    /// `‖S − 1‖₁`.
    pub nuclear_defect: f64,
    pub unitarity_defect: f64,
}

impl ScatteringMatrix {
    pub fn new(lambda: f64, s: CMat) -> Self {
        let mut eigenphases: Vec<f64> = eigenvalues(&s).iter().map(|z| z.arg()).collect();
        eigenphases.sort_by(f64::total_cmp);
        let n = s.nrows();
        Self {
            lambda,
            eigenphases,
            nuclear_defect: nuclear_norm(&(&s - identity(n))),
            unitarity_defect: unitarity_defect(&s),
            s,
        }
    }

    pub fn rank(&self) -> usize {
        self.s.nrows()
    }

    /// `U S U*` for a change of fiber basis `U`.
    pub fn in_basis(&self, u: &CMat) -> CMat {
        u * &self.s * u.adjoint()
    }
}

/// `S = w₊* w₋`.
pub fn scattering_matrix(w_plus: &WaveMatrix, w_minus: &WaveMatrix) -> Result<ScatteringMatrix> {
    if w_plus.sign != Sign::Plus || w_minus.sign != Sign::Minus {
        return Err(Error::Invalid("expected (w₊, w₋)".into()));
    }
    if w_plus.w.shape() != w_minus.w.shape() {
        return Err(Error::DimensionMismatch {
            expected: w_plus.r0(),
            got: w_minus.r0(),
        });
    }
    Ok(ScatteringMatrix::new(w_plus.lambda, w_plus.w.adjoint() * &w_minus.w))
}

/// `S = 1 − 2πi ℰ J (1 + T₀J)^{-1} ℰ^◊` from the boundary data of `H₀`.
pub fn stationary_scattering_matrix(h0: &OperatorAtLambda, j: &Perturbation) -> Result<ScatteringMatrix> {
    let m = h0.m();
    if j.dim() != m {
        return Err(Error::DimensionMismatch { expected: m, got: j.dim() });
    }
    let a = identity(m) + &h0.t.t * j.matrix();
    let cond = condition_number(&a);
    let resonance = Error::Resonance {
        lambda: h0.lambda(),
        condition: cond,
    };
    if !(cond <= RESONANCE_CONDITION) {
        return Err(resonance);
    }
    let e = h0.e();
    let x = solve(&a, &e.adjoint()).ok_or(resonance)?;
    let r = h0.rank();
    let s = identity(r) - (e * j.matrix() * x) * (I * 2.0 * PI);
    Ok(ScatteringMatrix::new(h0.lambda(), s))
}

/// Everything the scattering pipeline produces at one regular energy.
#[derive(Debug, Clone)]
pub struct ScatteringData {
    pub lambda: f64,
    pub r0: usize,
    pub r1: usize,
    pub w_plus: WaveMatrix,
    pub w_minus: WaveMatrix,
    pub s: ScatteringMatrix,
    pub stationary: ScatteringMatrix,
    /// `max |S − S_stationary|`.
    pub stationary_gap: f64,
    /// Largest factorization gap of `𝔞_±`.
    pub form_residual: f64,
}

pub fn scattering_data(h0: &OperatorAtLambda, h1: &OperatorAtLambda, j: &Perturbation) -> Result<ScatteringData> {
    let ap = a_form(Sign::Plus, h1, h0, j)?;
    let am = a_form(Sign::Minus, h1, h0, j)?;
    let w_plus = wave_matrix(&ap, h1, h0, j)?;
    let w_minus = wave_matrix(&am, h1, h0, j)?;
    let s = scattering_matrix(&w_plus, &w_minus)?;
    let stationary = stationary_scattering_matrix(h0, j)?;
    Ok(ScatteringData {
        lambda: h0.lambda(),
        r0: h0.rank(),
        r1: h1.rank(),
        stationary_gap: max_abs(&(&s.s - &stationary.s)),
        form_residual: ap.residual.max(am.residual),
        w_plus,
        w_minus,
        s,
        stationary,
    })
}

/// Evaluation functionals of the two free lattice channels at `λ = 2cos θ`:
/// row 0 reads the right-moving amplitude `f̂(−θ)`, row 1 the left-moving
/// amplitude `f̂(θ)`, both divided by `√(4π sin θ)`, with
/// `f̂(k) = Σ_n f(n) e^{−ikn}`.
pub fn lattice_channels(rig: &Rigging, lambda: f64) -> Result<CMat> {
    rig.model().lattice()?;
    if !(lambda.abs() < 2.0) {
        return Err(Error::EdgeOfSpectrum { lambda, margin: 0.0 });
    }
    let theta = (lambda / 2.0).acos();
    let norm = (4.0 * PI * theta.sin()).sqrt();
    let sites = rig.auxiliary_sites();
    Ok(CMat::from_fn(2, sites.len(), |row, j| {
        let s = sites[j] as f64;
        let phase = if row == 0 { theta * s } else { -theta * s };
        Complex64::from_polar(rig.site_weight(sites[j]) / norm, phase)
    }))
}

/// The unitary `U` with `channels = U ℰ`; fails unless the channel
/// functionals span exactly the fiber.
pub fn channel_unitary(ev: &EvaluationOperator, channels: &CMat) -> Result<CMat> {
    if channels.ncols() != ev.m() {
        return Err(Error::DimensionMismatch {
            expected: ev.m(),
            got: channels.ncols(),
        });
    }
    let u = channels * pinv(&ev.matrix, PINV_RTOL);
    let defect = unitarity_defect(&u);
    let rebuilt = max_abs(&(&u * &ev.matrix - channels)) / max_abs(channels).max(1.0);
    if defect > WELL_DEFINEDNESS_TOL || rebuilt > WELL_DEFINEDNESS_TOL {
        return Err(Error::WellDefinedness {
            residual: defect.max(rebuilt),
        });
    }
    Ok(u)
}

/// Reorders a channel-basis S (rows and columns: right-moving, left-moving)
/// into lead form: columns are incoming from the left and right leads, rows
/// outgoing into the left and right leads, so the off-diagonal entries are
/// transmissions.
pub fn lead_basis(s_channels: &CMat) -> CMat {
    let mut out = s_channels.clone();
    out.swap_rows(0, 1);
    out
}

/// Which block family a direct integral holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    WavePlus,
    WaveMinus,
    Scattering,
    /// Products and adjoints of the above.
    Derived,
}

/// `∫^⊕ B(λ) dλ` on a quadrature grid; irregular points carry no weight
/// and no block.
#[derive(Debug, Clone)]
pub struct DirectIntegralOperator {
    pub kind: BlockKind,
    pub grid: Vec<f64>,
    pub weights: Vec<f64>,
    pub blocks: Vec<Option<CMat>>,
}

/// Discretized section: a fiber vector per grid point, `None` off `Λ`.
pub type Section = Vec<Option<CVec>>;

pub fn assemble_direct_integral(
    kind: BlockKind,
    grid: &[f64],
    weights: &[f64],
    blocks: Vec<Option<CMat>>,
    regular: &[bool],
) -> Result<DirectIntegralOperator> {
    let n = grid.len();
    for got in [weights.len(), blocks.len(), regular.len()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    let missing: Vec<f64> = (0..n)
        .filter(|&i| regular[i] && blocks[i].is_none())
        .map(|i| grid[i])
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingBlocks { lambdas: missing });
    }
    let blocks = blocks
        .into_iter()
        .zip(regular)
        .map(|(b, &ok)| if ok { b } else { None })
        .collect();
    let weights = weights.iter().zip(regular).map(|(&w, &ok)| if ok { w } else { 0.0 }).collect();
    Ok(DirectIntegralOperator {
        kind,
        grid: grid.to_vec(),
        weights,
        blocks,
    })
}

impl DirectIntegralOperator {
    pub fn identity(grid: &[f64], weights: &[f64], ranks: &[Option<usize>]) -> Self {
        Self {
            kind: BlockKind::Derived,
            grid: grid.to_vec(),
            weights: weights
                .iter()
                .zip(ranks)
                .map(|(&w, r)| if r.is_some() { w } else { 0.0 })
                .collect(),
            blocks: ranks.iter().map(|r| r.map(identity)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Block-wise action; points without a block map to `None`.
    pub fn apply(&self, section: &Section) -> Result<Section> {
        if section.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: section.len(),
            });
        }
        self.blocks
            .iter()
            .zip(section)
            .map(|(b, v)| match (b, v) {
                (Some(b), Some(v)) if b.ncols() == v.len() => Ok(Some(b * v)),
                (Some(b), Some(v)) => Err(Error::DimensionMismatch {
                    expected: b.ncols(),
                    got: v.len(),
                }),
                _ => Ok(None),
            })
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            kind: BlockKind::Derived,
            grid: self.grid.clone(),
            weights: self.weights.clone(),
            blocks: self.blocks.iter().map(|b| b.as_ref().map(|b| b.adjoint())).collect(),
        }
    }

    /// `self ∘ rhs`, defined where both have blocks.
    pub fn compose(&self, rhs: &Self) -> Result<Self> {
        if self.grid != rhs.grid {
            return Err(Error::Invalid("direct integrals on different grids".into()));
        }
        let blocks = self
            .blocks
            .iter()
            .zip(&rhs.blocks)
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) if a.ncols() == b.nrows() => Ok(Some(a * b)),
                (Some(a), Some(b)) => Err(Error::DimensionMismatch {
                    expected: a.ncols(),
                    got: b.nrows(),
                }),
                _ => Ok(None),
            })
            .collect::<Result<Vec<_>>>()?;
        let weights = self
            .weights
            .iter()
            .zip(&blocks)
            .map(|(&w, b)| if b.is_some() { w } else { 0.0 })
            .collect();
        Ok(Self {
            kind: BlockKind::Derived,
            grid: self.grid.clone(),
            weights,
            blocks,
        })
    }

    /// Largest block gap to `other`.
    pub fn max_block_gap(&self, other: &Self) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) if a.shape() == b.shape() => max_abs(&(a - b)),
                (None, None) => 0.0,
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }

    /// `Σ w_i ‖v_i‖²` over points that carry a block.
    pub fn norm_sq(&self, section: &Section) -> f64 {
        section
            .iter()
            .zip(&self.weights)
            .zip(&self.blocks)
            .filter(|(_, b)| b.is_some())
            .filter_map(|((v, &w), _)| v.as_ref().map(|v| w * v.norm_squared()))
            .sum()
    }

    /// `λ·v(λ)`: the action of `H` on sections.
    pub fn multiply_by_lambda(&self, section: &Section) -> Section {
        section
            .iter()
            .zip(&self.grid)
            .map(|(v, &l)| v.as_ref().map(|v| v.scale(l)))
            .collect()
    }

    /// `‖B λ v − λ B v‖` in the weighted section norm.
    pub fn intertwining_defect(&self, section: &Section) -> Result<f64> {
        let lhs = self.apply(&self.multiply_by_lambda(section))?;
        let rhs = self.multiply_by_lambda(&self.apply(section)?);
        let diff: Section = lhs
            .iter()
            .zip(&rhs)
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => Some(a - b),
                _ => None,
            })
            .collect();
        Ok(self.norm_sq(&diff).sqrt())
    }
}

/// Composite Gauss–Legendre nodes on `[−π, π]`.
fn momentum_rule(panels: usize) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(16).expect("order 16 is valid");
    let h = 2.0 * PI / panels as f64;
    let mut out = Vec::with_capacity(16 * panels);
    for p in 0..panels {
        let a = -PI + p as f64 * h;
        out.extend(gl.nodes().zip(gl.weights()).map(|(&x, &w)| (a + 0.5 * h * (x + 1.0), 0.5 * h * w)));
    }
    out
}

/// Stationary `W_± f` on lattice sites `−radius..=radius` for a vector given
/// by its site values and its transform `f̂(k) = Σ_n f(n) e^{−ikn}`:
///
/// ```text
/// W_± f = f − ∫ R_{λ∓i0}(H₁) V δ₀(λ) f dλ
///       = f − (1/2π) ∫ f̂(k) G₀(·, s; λ_k ∓ i0) κ (1 + J T₀^∓)^{-1} J κ e^{iks} dk,
/// ```
///
/// which is `∫ ℰ_λ(H₁)^◊ w_±(λ) ℰ_λ(H₀) f dλ` after `ℰ^◊ℰ = δ` and the
/// closed formula for `w_±`. Momenta where `|f̂|` is negligible are skipped.
pub fn lattice_wave_operator<G>(
    rig: &Rigging,
    j: &Perturbation,
    sign: Sign,
    f_hat: G,
    f_sites: &CVec,
    radius: usize,
    panels: usize,
    opts: &LapOptions,
) -> Result<CVec>
where
    G: Fn(f64) -> Complex64 + Sync,
{
    rig.model().lattice()?;
    let n_sites = 2 * radius + 1;
    if f_sites.len() != n_sites {
        return Err(Error::DimensionMismatch {
            expected: n_sites,
            got: f_sites.len(),
        });
    }
    let m = rig.m();
    if j.dim() != m {
        return Err(Error::DimensionMismatch { expected: m, got: j.dim() });
    }
    let sites = rig.auxiliary_sites();
    let kappa: Vec<f64> = sites.iter().map(|&s| rig.site_weight(s)).collect();
    let rule = momentum_rule(panels);
    let values: Vec<Complex64> = rule.iter().map(|&(k, _)| f_hat(k)).collect();
    let peak = values.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    let cutoff = 1e-15 * peak;

    // Per node: θ and the m coefficients multiplying κ_j G₀(n, s_j).
    let nodes: Vec<(f64, Vec<Complex64>)> = rule
        .par_iter()
        .zip(values.par_iter())
        .filter(|(_, v)| v.norm() > cutoff)
        .map(|(&(k, w), &fk)| -> Result<(f64, Vec<Complex64>)> {
            let lambda = 2.0 * k.cos();
            let t = boundary_value(rig, lambda, BoundaryMethod::Plemelj, opts)?.t;
            let t = match sign {
                Sign::Minus => t,
                Sign::Plus => t.adjoint(),
            };
            let a = identity(m) + j.matrix() * &t;
            let rhs = CVec::from_iterator(m, (0..m).map(|l| Complex64::from_polar(kappa[l], k * sites[l] as f64)));
            let x = solve(&a, &CMat::from_column_slice(m, 1, (j.matrix() * rhs).as_slice())).ok_or(
                Error::Resonance {
                    lambda,
                    condition: f64::INFINITY,
                },
            )?;
            let scale = fk * w / (2.0 * PI);
            Ok((k.abs(), (0..m).map(|l| x[(l, 0)] * kappa[l] * scale).collect()))
        })
        .collect::<Result<Vec<_>>>()?;

    let out: Vec<Complex64> = (0..n_sites)
        .into_par_iter()
        .map(|idx| {
            let n = idx as i64 - radius as i64;
            let mut acc = Complex64::new(0.0, 0.0);
            for (theta, coef) in &nodes {
                for (l, &s) in sites.iter().enumerate() {
                    let g = free_green(n, s, c(2.0 * theta.cos(), 0.0), true).expect("interior energy");
                    let g = match sign {
                        Sign::Minus => g,
                        Sign::Plus => g.conj(),
                    };
                    acc += g * coef[l];
                }
            }
            f_sites[idx] - acc
        })
        .collect();
    Ok(CVec::from_vec(out))
}

/// `H₀ + F*JF` applied to site values on `−radius..=radius` (zero outside).
pub fn lattice_apply_h1(rig: &Rigging, j: &Perturbation, psi: &CVec) -> Result<CVec> {
    rig.model().lattice()?;
    let n = psi.len();
    if n % 2 == 0 {
        return Err(Error::Invalid("site vector must have odd length".into()));
    }
    let radius = (n / 2) as i64;
    let mut out = CVec::zeros(n);
    for i in 0..n {
        if i > 0 {
            out[i] += psi[i - 1];
        }
        if i + 1 < n {
            out[i] += psi[i + 1];
        }
    }
    let sites = rig.auxiliary_sites();
    for (a, &sa) in sites.iter().enumerate() {
        for (b, &sb) in sites.iter().enumerate() {
            let (ia, ib) = ((sa + radius) as usize, (sb + radius) as usize);
            if ia >= n || ib >= n {
                return Err(Error::Invalid("auxiliary site outside the site range".into()));
            }
            out[ia] += j.matrix()[(a, b)] * rig.site_weight(sa) * rig.site_weight(sb) * psi[ib];
        }
    }
    Ok(out)
}
