//! Quadrature rules and Cauchy-type integrals.

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;

use crate::linalg::{c, CMat};

/// Panel order of the composite rules.
pub const PANEL_ORDER: usize = 16;

/// `n`-point Gauss–Legendre rule mapped to `[a, b]`, nodes ascending.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(n.max(2)).expect("degree >= 2");
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let mut pairs: Vec<(f64, f64)> = rule
        .into_node_weight_pairs()
        .into_iter()
        .map(|(x, w)| (mid + half * x, half * w))
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    pairs
}

/// Values of the first `m` Legendre polynomials, orthonormal on `[a, b]`.
pub fn legendre_orthonormal(m: usize, x: f64, a: f64, b: f64) -> Vec<f64> {
    let t = (2.0 * x - a - b) / (b - a);
    let mut p = Vec::with_capacity(m);
    let (mut prev, mut cur) = (0.0_f64, 1.0_f64);
    for j in 0..m {
        if j > 0 {
            let jf = j as f64;
            let next = ((2.0 * jf - 1.0) * t * cur - (jf - 1.0) * prev) / jf;
            prev = cur;
            cur = next;
        }
        p.push(cur * ((2.0 * j as f64 + 1.0) / (b - a)).sqrt());
    }
    p
}

/// Composite Gauss rule on `[a, b]` whose panels shrink geometrically toward
/// `center` until they are no wider than `scale`.
pub fn graded_rule(a: f64, b: f64, center: f64, scale: f64) -> Vec<(f64, f64)> {
    let base = gauss_legendre(PANEL_ORDER, -1.0, 1.0);
    let mut out = Vec::new();
    let push_panel = |lo: f64, hi: f64, out: &mut Vec<(f64, f64)>| {
        if hi <= lo {
            return;
        }
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        out.extend(base.iter().map(|&(x, w)| (mid + half * x, half * w)));
    };
    let c0 = center.clamp(a, b);
    let floor = scale.max(1e-15 * (b - a));
    for (lo_end, hi_end, toward_left) in [(a, c0, false), (c0, b, true)] {
        let len = hi_end - lo_end;
        if len <= 0.0 {
            continue;
        }
        // Breakpoints measured from the graded end (c0).
        let mut offsets = vec![len];
        let mut h = len;
        let mut guard = 0;
        while h > floor && guard < 64 {
            h *= 0.5;
            offsets.push(h);
            guard += 1;
        }
        offsets.push(0.0);
        for w in offsets.windows(2) {
            let (far, near) = (w[0], w[1]);
            if toward_left {
                push_panel(c0 + near, c0 + far, &mut out);
            } else {
                push_panel(c0 - far, c0 - near, &mut out);
            }
        }
    }
    out
}

/// Principal value `PV ∫_a^b G(x) / (x - s) dx` for smooth matrix-valued `G`,
/// `a < s < b`, by singularity subtraction on an `n`-point Gauss rule.
pub fn principal_value<G>(g: G, a: f64, b: f64, s: f64, n: usize) -> CMat
where
    G: Fn(f64) -> CMat,
{
    let gs = g(s);
    let h = 1e-6 * (b - a);
    let mut acc = gs.scale(((b - s) / (s - a)).ln());
    for (x, w) in gauss_legendre(n, a, b) {
        let dx = x - s;
        let q = if dx.abs() < 1e-13 * (b - a) {
            (g(s + h) - g(s - h)).scale(0.5 / h)
        } else {
            (g(x) - &gs).scale(1.0 / dx)
        };
        acc += q.scale(w);
    }
    acc
}

/// Cauchy integral `∫_a^b G(μ) / (μ - z) dμ` for `z = λ + i y`, `y > 0`,
/// on a graded rule with the value at `λ` subtracted when `a < λ < b`.
pub fn cauchy_offaxis<G>(g: G, a: f64, b: f64, lambda: f64, y: f64) -> CMat
where
    G: Fn(f64) -> CMat,
{
    let z = c(lambda, y);
    let rule = graded_rule(a, b, lambda, y);
    if lambda > a && lambda < b {
        let gl = g(lambda);
        let log_term: Complex64 = (c(b, 0.0) - z).ln() - (c(a, 0.0) - z).ln();
        let mut acc = &gl * log_term;
        for (x, w) in rule {
            let q = (g(x) - &gl) * (c(w, 0.0) / (c(x, 0.0) - z));
            acc += q;
        }
        acc
    } else {
        let (n, m) = g(a).shape();
        let mut acc = CMat::zeros(n, m);
        for (x, w) in rule {
            acc += g(x) * (c(w, 0.0) / (c(x, 0.0) - z));
        }
        acc
    }
}

/// Plain graded integral `∫_a^b f(x) dx`, panels refined toward `center`.
pub fn graded_integral<G>(f: G, a: f64, b: f64, center: f64, scale: f64) -> CMat
where
    G: Fn(f64) -> CMat,
{
    let rule = graded_rule(a, b, center, scale);
    let (n, m) = f(0.5 * (a + b)).shape();
    let mut acc = CMat::zeros(n, m);
    for (x, w) in rule {
        acc += f(x).scale(w);
    }
    acc
}
