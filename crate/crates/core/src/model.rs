//! Operator models, rigging, perturbations and the Hilbert scale.
//!
//! Two models with purely absolutely continuous spectrum are provided:
//!
//! * [`SpectralModel::Quadrature`]: multiplication by `λ` on `L²([a, b])`,
//!   discretized on Gauss–Legendre nodes. Model coordinates are the unitary
//!   coordinates `u_n = √q_n f(λ_n)`.
//! * [`SpectralModel::Lattice`]: the discrete Laplacian
//!   `(H₀ f)(n) = f(n+1) + f(n-1)` on `ℓ²(ℤ)`. Vectors live on sites
//!   `-L..=L`; the Green's function is the exact infinite-lattice one.
//!
//! The rigging `F: 𝓗 → 𝓚 = ℂ^m` is a positive weight followed by projection
//! onto `m` auxiliary vectors. All operator algebra downstream is carried out
//! in these `m` coordinates.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_part, max_abs, CMat, CVec, I};
use crate::quadrature::{gauss_legendre, legendre_orthonormal};

pub const MIN_NODES: usize = 8;
pub const MIN_RADIUS: usize = 8;

/// Bounded open interval of the real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::UnboundedWindow);
        }
        if lo >= hi {
            return Err(Error::EmptyInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn contains_window(&self, other: &Window) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn distance_to_boundary(&self, x: f64) -> f64 {
        (x - self.lo).min(self.hi - x)
    }

    pub fn intersect(&self, other: &Window) -> Option<Window> {
        Window::new(self.lo.max(other.lo), self.hi.min(other.hi)).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    QuadratureMultiplication,
    LatticeLaplacian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub interval: (f64, f64),
    pub nodes: usize,
    pub radius: usize,
}

impl ModelConfig {
    pub fn quadrature(a: f64, b: f64, nodes: usize) -> Self {
        Self {
            kind: ModelKind::QuadratureMultiplication,
            interval: (a, b),
            nodes,
            radius: 0,
        }
    }

    pub fn lattice(radius: usize) -> Self {
        Self {
            kind: ModelKind::LatticeLaplacian,
            interval: (-2.0, 2.0),
            nodes: 0,
            radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureModel {
    pub a: f64,
    pub b: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeModel {
    pub radius: usize,
}

impl LatticeModel {
    pub fn sites(&self) -> impl Iterator<Item = i64> {
        let r = self.radius as i64;
        -r..=r
    }

    pub fn index(&self, site: i64) -> Option<usize> {
        let r = self.radius as i64;
        (site.abs() <= r).then(|| (site + r) as usize)
    }

    pub fn site(&self, index: usize) -> i64 {
        index as i64 - self.radius as i64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpectralModel {
    Quadrature(QuadratureModel),
    Lattice(LatticeModel),
}

pub fn build_model(config: &ModelConfig) -> Result<SpectralModel> {
    match config.kind {
        ModelKind::QuadratureMultiplication => {
            let (a, b) = config.interval;
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::NonFinite("model.interval"));
            }
            if a >= b {
                return Err(Error::EmptyInterval { lo: a, hi: b });
            }
            if config.nodes < MIN_NODES {
                return Err(Error::BelowMinimum {
                    what: "model.N",
                    value: config.nodes,
                    min: MIN_NODES,
                });
            }
            let (nodes, weights) = gauss_legendre(config.nodes, a, b).into_iter().unzip();
            Ok(SpectralModel::Quadrature(QuadratureModel {
                a,
                b,
                nodes,
                weights,
            }))
        }
        ModelKind::LatticeLaplacian => {
            if config.radius < MIN_RADIUS {
                return Err(Error::BelowMinimum {
                    what: "model.L",
                    value: config.radius,
                    min: MIN_RADIUS,
                });
            }
            Ok(SpectralModel::Lattice(LatticeModel {
                radius: config.radius,
            }))
        }
    }
}

impl SpectralModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Quadrature(_) => ModelKind::QuadratureMultiplication,
            Self::Lattice(_) => ModelKind::LatticeLaplacian,
        }
    }

    pub fn spectrum(&self) -> (f64, f64) {
        match self {
            Self::Quadrature(q) => (q.a, q.b),
            Self::Lattice(_) => (-2.0, 2.0),
        }
    }

    /// Dimension of the model coordinate space.
    pub fn dim(&self) -> usize {
        match self {
            Self::Quadrature(q) => q.nodes.len(),
            Self::Lattice(l) => 2 * l.radius + 1,
        }
    }

    /// Matrix of `H₀` in model coordinates.
    pub fn h0_matrix(&self) -> CMat {
        match self {
            Self::Quadrature(q) => {
                CMat::from_diagonal(&CVec::from_iterator(q.nodes.len(), q.nodes.iter().map(|&x| c(x, 0.0))))
            }
            Self::Lattice(_) => {
                let n = self.dim();
                CMat::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { c(1.0, 0.0) } else { c(0.0, 0.0) })
            }
        }
    }

    pub fn quadrature(&self) -> Result<&QuadratureModel> {
        match self {
            Self::Quadrature(q) => Ok(q),
            _ => Err(Error::WrongModel("quadrature")),
        }
    }

    pub fn lattice(&self) -> Result<&LatticeModel> {
        match self {
            Self::Lattice(l) => Ok(l),
            _ => Err(Error::WrongModel("lattice")),
        }
    }
}

/// `ζ` with `ζ + 1/ζ = z` and `|ζ| < 1`, for `Im z > 0`.
fn lattice_zeta(z: Complex64) -> Complex64 {
    let root = (z * z - 4.0).sqrt();
    let a = 0.5 * (z - root);
    let b = 0.5 * (z + root);
    if a.norm() < b.norm() {
        a
    } else {
        b
    }
}

/// Free lattice Green's function `G₀(n, m; z) = ((H₀ - z)^{-1})_{nm}`.
///
/// With `boundary` set, `z` must be real in `(-2, 2)` and the limit from the
/// upper half plane is returned.
pub fn free_green(n: i64, m: i64, z: Complex64, boundary: bool) -> Result<Complex64> {
    let d = (n - m).unsigned_abs() as i32;
    if boundary {
        let lambda = z.re;
        if !(lambda > -2.0 && lambda < 2.0) {
            return Err(Error::EdgeOfSpectrum { lambda, margin: 0.0 });
        }
        let theta = (lambda / 2.0).acos();
        return Ok(I * Complex64::from_polar(1.0, -theta * d as f64) / (2.0 * theta.sin()));
    }
    if z.im <= 0.0 {
        return Err(Error::NonPositiveImaginary(z.im));
    }
    let zeta = lattice_zeta(z);
    Ok(zeta.powi(d) / (zeta - zeta.inv()))
}

/// `E_Δ(n, m)` of the lattice Laplacian, a function of `d = n - m` only.
pub fn lattice_window_kernel(window: &Window, d: i64) -> f64 {
    let lo = window.lo.max(-2.0);
    let hi = window.hi.min(2.0);
    if lo >= hi {
        return 0.0;
    }
    let k1 = (hi / 2.0).acos();
    let k2 = (lo / 2.0).acos();
    if d == 0 {
        (k2 - k1) / PI
    } else {
        let df = d as f64;
        ((k2 * df).sin() - (k1 * df).sin()) / (PI * df)
    }
}

/// Positive weight defining the rigging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    /// `κ ≡ value`.
    Constant(f64),
    /// Quadrature only: `κ(λ) = (4(λ-a)(b-λ)/(b-a)²)^power`.
    Bump(f64),
    /// Lattice only: `κ_n = (1 + |n|)^{-power}`.
    Decay(f64),
}

/// Lattice auxiliary sites in the order `0, 1, -1, 2, -2, …`.
pub fn auxiliary_site(j: usize) -> i64 {
    if j == 0 {
        0
    } else if j % 2 == 1 {
        j.div_ceil(2) as i64
    } else {
        -((j / 2) as i64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rigging {
    model: SpectralModel,
    weight: Weight,
    m: usize,
}

impl Rigging {
    pub fn new(model: SpectralModel, weight: Weight, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::BelowMinimum {
                what: "rigging.m",
                value: 0,
                min: 1,
            });
        }
        if m > model.dim() {
            return Err(Error::Invalid(format!(
                "rigging.m = {m} exceeds the model dimension {}",
                model.dim()
            )));
        }
        match (&model, weight) {
            (_, Weight::Constant(v)) if !(v.is_finite() && v > 0.0) => {
                return Err(Error::Invalid("constant weight must be positive".into()))
            }
            (SpectralModel::Lattice(_), Weight::Bump(_)) => {
                return Err(Error::Invalid("bump weight applies to the quadrature model".into()))
            }
            (SpectralModel::Quadrature(_), Weight::Decay(_)) => {
                return Err(Error::Invalid("decay weight applies to the lattice model".into()))
            }
            (_, Weight::Bump(p) | Weight::Decay(p)) if !(p.is_finite() && p >= 0.0) => {
                return Err(Error::NonFinite("rigging.weight"))
            }
            _ => {}
        }
        let rig = Self { model, weight, m };
        if let Some(bad) = rig.weights_on_index_set().iter().find(|&&w| !(w > 0.0)) {
            return Err(Error::Invalid(format!("weight must be strictly positive, found {bad}")));
        }
        Ok(rig)
    }

    pub fn model(&self) -> &SpectralModel {
        &self.model
    }

    pub fn weight(&self) -> Weight {
        self.weight
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `κ` at a point of the quadrature interval.
    pub fn weight_at(&self, x: f64) -> f64 {
        match (&self.model, self.weight) {
            (_, Weight::Constant(v)) => v,
            (SpectralModel::Quadrature(q), Weight::Bump(p)) => {
                let s = 4.0 * (x - q.a) * (q.b - x) / (q.b - q.a).powi(2);
                s.max(0.0).powf(p)
            }
            (_, Weight::Decay(p)) => (1.0 + x.abs()).powf(-p),
            (_, Weight::Bump(_)) => unreachable!("validated in Rigging::new"),
        }
    }

    pub fn site_weight(&self, n: i64) -> f64 {
        self.weight_at(n as f64)
    }

    fn weights_on_index_set(&self) -> Vec<f64> {
        match &self.model {
            SpectralModel::Quadrature(q) => q.nodes.iter().map(|&x| self.weight_at(x)).collect(),
            SpectralModel::Lattice(_) => (0..self.m).map(|j| self.site_weight(auxiliary_site(j))).collect(),
        }
    }

    /// `F δ_λ = κ(λ) (p_0(λ), …, p_{m-1}(λ))` for the quadrature model: the
    /// density whose outer product gives `(1/π) Im T(λ + i0)`.
    pub fn density_vector(&self, x: f64) -> Result<DVector<f64>> {
        let q = self.model.quadrature()?;
        let k = self.weight_at(x);
        Ok(DVector::from_iterator(
            self.m,
            legendre_orthonormal(self.m, x, q.a, q.b).into_iter().map(|p| k * p),
        ))
    }

    /// Lattice auxiliary sites `s_0, …, s_{m-1}`.
    pub fn auxiliary_sites(&self) -> Vec<i64> {
        (0..self.m).map(auxiliary_site).collect()
    }

    /// Matrix of `F` from model coordinates to `ℂ^m`.
    pub fn f_matrix(&self) -> CMat {
        match &self.model {
            SpectralModel::Quadrature(q) => {
                let mut f = CMat::zeros(self.m, q.nodes.len());
                for (n, (&x, &w)) in q.nodes.iter().zip(&q.weights).enumerate() {
                    let col = self.density_vector(x).expect("quadrature model");
                    for j in 0..self.m {
                        f[(j, n)] = c(col[j] * w.sqrt(), 0.0);
                    }
                }
                f
            }
            SpectralModel::Lattice(l) => {
                let mut f = CMat::zeros(self.m, self.model.dim());
                for (j, s) in self.auxiliary_sites().into_iter().enumerate() {
                    let idx = l.index(s).expect("auxiliary site inside truncation");
                    f[(j, idx)] = c(self.site_weight(s), 0.0);
                }
                f
            }
        }
    }

    /// `F f` for a vector in model coordinates.
    pub fn apply(&self, f: &CVec) -> Result<CVec> {
        check_len(f, self.model.dim())?;
        Ok(self.f_matrix() * f)
    }

    /// `F* c` in model coordinates.
    pub fn adjoint_apply(&self, coords: &CVec) -> Result<CVec> {
        check_len(coords, self.m)?;
        Ok(self.f_matrix().adjoint() * coords)
    }

    /// `F F*` on `𝓚`.
    pub fn gram(&self) -> CMat {
        let f = self.f_matrix();
        &f * f.adjoint()
    }

    /// `‖F‖²_HS`.
    pub fn hs_norm_sq(&self) -> f64 {
        self.gram().trace().re
    }

    /// Deviation of the auxiliary family's Gram matrix from the identity.
    pub fn auxiliary_gram_defect(&self) -> f64 {
        match &self.model {
            SpectralModel::Quadrature(q) => {
                let mut g = CMat::zeros(self.m, self.m);
                for (&x, &w) in q.nodes.iter().zip(&q.weights) {
                    let p = legendre_orthonormal(self.m, x, q.a, q.b);
                    for i in 0..self.m {
                        for j in 0..self.m {
                            g[(i, j)] += c(w * p[i] * p[j], 0.0);
                        }
                    }
                }
                max_abs(&(g - CMat::identity(self.m, self.m)))
            }
            // Canonical site vectors.
            SpectralModel::Lattice(_) => 0.0,
        }
    }

    /// `F* c` as a function on the quadrature interval.
    pub fn regular_function(&self, coords: &CVec) -> Result<ModelVector> {
        self.model.quadrature()?;
        check_len(coords, self.m)?;
        let rig = self.clone();
        let coords = coords.clone();
        Ok(ModelVector::Function(Arc::new(move |x| {
            let d = rig.density_vector(x).expect("quadrature model");
            d.iter().zip(coords.iter()).map(|(&a, &b)| b * a).sum()
        })))
    }
}

fn check_len(v: &CVec, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.len(),
        });
    }
    Ok(())
}

/// A vector of the model Hilbert space beyond the regular subspace.
#[derive(Clone)]
pub enum ModelVector {
    /// Lattice site values on `-L..=L`.
    Sites(CVec),
    /// A function on the quadrature interval (the continuum object).
    Function(Arc<dyn Fn(f64) -> Complex64 + Send + Sync>),
}

impl std::fmt::Debug for ModelVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Sites(v) => f.debug_tuple("Sites").field(&v.len()).finish(),
            Self::Function(_) => f.write_str("Function(..)"),
        }
    }
}

/// Finite-rank Hermitian perturbation `V = F* J F`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    j: CMat,
}

impl Perturbation {
    pub fn new(j: CMat) -> Result<Self> {
        if !j.is_square() {
            return Err(Error::DimensionMismatch {
                expected: j.nrows(),
                got: j.ncols(),
            });
        }
        if j.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("perturbation.J"));
        }
        let defect = max_abs(&(&j - j.adjoint()));
        if defect > 1e-12 * max_abs(&j).max(1.0) {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Self { j: hermitian_part(&j) })
    }

    pub fn zero(m: usize) -> Self {
        Self { j: CMat::zeros(m, m) }
    }

    /// `J = v e₁ e₁*` padded to dimension `m`.
    pub fn scalar(v: f64, m: usize) -> Self {
        let mut j = CMat::zeros(m, m);
        j[(0, 0)] = c(v, 0.0);
        Self { j }
    }

    pub fn matrix(&self) -> &CMat {
        &self.j
    }

    pub fn dim(&self) -> usize {
        self.j.nrows()
    }

    /// Embeds `J` in the top-left corner of an `m × m` zero matrix.
    pub fn padded(&self, m: usize) -> Result<Self> {
        if m < self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: m,
            });
        }
        let mut j = CMat::zeros(m, m);
        j.view_mut((0, 0), (self.dim(), self.dim())).copy_from(&self.j);
        Ok(Self { j })
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { j: self.j.scale(s) }
    }

    pub fn plus(&self, other: &Perturbation) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(Self { j: &self.j + &other.j })
    }

    pub fn minus(&self, other: &Perturbation) -> Result<Self> {
        self.plus(&other.scaled(-1.0))
    }

    /// `V = F* J F` in model coordinates.
    pub fn assemble(&self, rigging: &Rigging) -> Result<CMat> {
        if self.dim() != rigging.m() {
            return Err(Error::DimensionMismatch {
                expected: rigging.m(),
                got: self.dim(),
            });
        }
        let f = rigging.f_matrix();
        Ok(f.adjoint() * &self.j * f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HomeSpace {
    H1,
    H,
    Hminus1,
}

impl HomeSpace {
    fn name(self) -> &'static str {
        match self {
            Self::H1 => "H1",
            Self::H => "H",
            Self::Hminus1 => "H-1",
        }
    }
}

/// Element of the scale `𝓗₁ ⊂ 𝓗 ⊂ 𝓗₋₁`.
///
/// Coordinates depend on the home space: for `H1` they are `β` with
/// `f = F* β`; for `Hminus1` they are `F f ∈ 𝓚`; for `H` they are model
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleVector {
    pub coords: CVec,
    pub home: HomeSpace,
}

impl ScaleVector {
    pub fn regular(beta: CVec) -> Self {
        Self {
            coords: beta,
            home: HomeSpace::H1,
        }
    }

    pub fn plain(f: CVec) -> Self {
        Self {
            coords: f,
            home: HomeSpace::H,
        }
    }

    pub fn singular(f_image: CVec) -> Self {
        Self {
            coords: f_image,
            home: HomeSpace::Hminus1,
        }
    }

    /// The same vector regarded as an element of `𝓗₋₁`.
    pub fn to_minus1(&self, rigging: &Rigging) -> Result<ScaleVector> {
        let coords = match self.home {
            HomeSpace::H1 => {
                check_len(&self.coords, rigging.m())?;
                rigging.gram() * &self.coords
            }
            HomeSpace::H => rigging.apply(&self.coords)?,
            HomeSpace::Hminus1 => self.coords.clone(),
        };
        Ok(ScaleVector::singular(coords))
    }

    /// Model coordinates of an element of `𝓗₁` or `𝓗`.
    pub fn to_model(&self, rigging: &Rigging) -> Result<CVec> {
        match self.home {
            HomeSpace::H1 => rigging.adjoint_apply(&self.coords),
            HomeSpace::H => Ok(self.coords.clone()),
            HomeSpace::Hminus1 => Err(Error::HomeSpaceMismatch {
                expected: "H1 or H",
                got: "H-1",
            }),
        }
    }
}

pub fn h1_norm(f: &ScaleVector) -> Result<f64> {
    match f.home {
        HomeSpace::H1 => Ok(f.coords.norm()),
        other => Err(Error::HomeSpaceMismatch {
            expected: "H1",
            got: other.name(),
        }),
    }
}

pub fn h_minus1_norm(f: &ScaleVector, rigging: &Rigging) -> Result<f64> {
    Ok(f.to_minus1(rigging)?.coords.norm())
}

/// Duality pairing `⟨f, g⟩_{1,-1}`, antilinear in `f`.
pub fn pairing(f: &ScaleVector, g: &ScaleVector, rigging: &Rigging) -> Result<Complex64> {
    if f.home != HomeSpace::H1 {
        return Err(Error::HomeSpaceMismatch {
            expected: "H1",
            got: f.home.name(),
        });
    }
    if g.home == HomeSpace::H1 {
        return Err(Error::HomeSpaceMismatch {
            expected: "H or H-1",
            got: "H1",
        });
    }
    check_len(&f.coords, rigging.m())?;
    let gamma = g.to_minus1(rigging)?.coords;
    Ok(f.coords.dotc(&gamma))
}

/// Spectral projection of `H₀` onto a window.
#[derive(Debug, Clone)]
pub struct WindowProjection {
    pub window: Window,
    pub matrix: CMat,
    /// `max |(E² − E)_{nm}|` over the whole truncated range.
    pub idempotency_residual: f64,
    /// Same, restricted to sites `|n|, |m| ≤ CENTER_BLOCK` (lattice) or to all
    /// nodes (quadrature).
    pub center_residual: f64,
}

pub const CENTER_BLOCK: i64 = 10;

pub fn window_projection(model: &SpectralModel, window: &Window) -> WindowProjection {
    let matrix = match model {
        SpectralModel::Quadrature(q) => CMat::from_diagonal(&CVec::from_iterator(
            q.nodes.len(),
            q.nodes.iter().map(|&x| if window.contains(x) { c(1.0, 0.0) } else { c(0.0, 0.0) }),
        )),
        SpectralModel::Lattice(l) => {
            let n = model.dim();
            CMat::from_fn(n, n, |i, j| c(lattice_window_kernel(window, l.site(i) - l.site(j)), 0.0))
        }
    };
    let defect = &matrix * &matrix - &matrix;
    let idempotency_residual = max_abs(&defect);
    let center_residual = match model {
        SpectralModel::Quadrature(_) => idempotency_residual,
        SpectralModel::Lattice(l) => {
            let lo = l.index(-CENTER_BLOCK.min(l.radius as i64)).unwrap();
            let hi = l.index(CENTER_BLOCK.min(l.radius as i64)).unwrap();
            let size = hi - lo + 1;
            max_abs(&defect.view((lo, lo), (size, size)).into_owned())
        }
    };
    WindowProjection {
        window: *window,
        matrix,
        idempotency_residual,
        center_residual,
    }
}
