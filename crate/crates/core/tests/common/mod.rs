#![allow(dead_code)]

use rigscat::lap::{boundary_value, BoundaryMethod, LapOptions};
use rigscat::linalg::{c, CMat, CVec};
use rigscat::model::{Perturbation, Rigging};

/// Rank-one `J = v u uᵀ` with an embedded eigenvalue of `H₀ + F*JF` at `λ*`.
///
/// `u` is orthogonal to the density `F δ_{λ*}`, so `uᵀ T₀(λ*+i0) u` is real
/// and `v = −1 / uᵀT₀u` makes `1 + T₀J` singular there.
pub fn engineered_resonance(rig: &Rigging, star: f64) -> Perturbation {
    let d = rig.density_vector(star).unwrap();
    assert!(d.len() >= 2);
    let mut u = CVec::zeros(d.len());
    u[0] = c(d[1], 0.0);
    u[1] = c(-d[0], 0.0);
    u /= c(u.norm(), 0.0);
    let t0 = boundary_value(rig, star, BoundaryMethod::Plemelj, &LapOptions::default()).unwrap();
    let q = u.dotc(&(&t0.t * &u));
    assert!(q.im.abs() < 1e-12 && q.re.abs() > 1e-3);
    let v = -1.0 / q.re;
    Perturbation::new(&u * u.adjoint() * c(v, 0.0)).unwrap()
}

pub fn scalar_j(v: f64, m: usize) -> Perturbation {
    Perturbation::scalar(v, m)
}

pub fn diag_j(values: &[f64]) -> Perturbation {
    let m = values.len();
    Perturbation::new(CMat::from_fn(m, m, |i, j| if i == j { c(values[i], 0.0) } else { c(0.0, 0.0) })).unwrap()
}
