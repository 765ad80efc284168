//! Scenario pipeline: regular-point scan, fibers, gluing, scattering and the
//! optional chain and time-domain checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rigscat::fiber::diamond_identity_residual;
use rigscat::lap::{scan_regular_points, LapOptions};
use rigscat::linalg::{c, max_abs, CMat, CVec};
use rigscat::model::{build_model, Perturbation, Rigging, Window};
use rigscat::scattering::{
    channel_unitary, lattice_channels, lattice_wave_operator, lead_basis, multiplicativity_check,
    scattering_data, stationary_scattering_matrix, OperatorAtLambda, Sign,
};
use rigscat::sheaf::{gluing_unitary, schmidt_window, windowed_fiber};
use rigscat::timedomain::{
    time_wave_operator, transmission_by_flight, LatticeHamiltonian, PropagationConfig, WavePacket,
};
use serde::{Deserialize, Serialize};

use crate::config::{Config, ModelKind};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TolProfile {
    Default,
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub profile: TolProfile,
    pub identity: f64,
    pub unitarity: f64,
    pub wave_agreement: f64,
    pub stationary: f64,
    pub gluing_unitarity: f64,
    pub cocycle: f64,
    pub multiplicativity: f64,
    pub transmission: f64,
    pub overlap: f64,
    /// Largest tolerated fraction of grid points excluded as irregular.
    pub excluded_fraction: f64,
}

impl Tolerances {
    pub fn new(profile: TolProfile) -> Self {
        let base = Self {
            profile,
            identity: 1e-9,
            unitarity: 1e-8,
            wave_agreement: 1e-7,
            stationary: 1e-7,
            gluing_unitarity: 1e-8,
            cocycle: 1e-7,
            multiplicativity: 1e-6,
            transmission: 1e-3,
            overlap: 1e-3,
            excluded_fraction: 0.01,
        };
        match profile {
            TolProfile::Default => base,
            TolProfile::Strict => Self {
                identity: 1e-11,
                unitarity: 1e-10,
                wave_agreement: 1e-9,
                stationary: 1e-9,
                gluing_unitarity: 1e-10,
                cocycle: 1e-9,
                multiplicativity: 1e-8,
                transmission: 1e-4,
                overlap: 1e-4,
                ..base
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDiagnostics {
    pub lambda: f64,
    pub regular: bool,
    pub reason: Option<String>,
    /// Condition number of `1 + T₀J`.
    pub condition: Option<f64>,
    pub rank0: Option<usize>,
    pub rank1: Option<usize>,
    pub identity_residual: Option<f64>,
    pub unitarity: Option<f64>,
    pub wave_agreement: Option<f64>,
    pub stationary_gap: Option<f64>,
    pub nuclear_defect: Option<f64>,
    pub multiplicativity: Option<f64>,
}

/// One stage check: the worst value over the stage against its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub note: Option<String>,
}

impl Check {
    fn new(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value.is_finite() && value <= tolerance,
            note: None,
        }
    }

    fn failed(name: &str, tolerance: f64, note: String) -> Self {
        Self {
            name: name.into(),
            value: f64::INFINITY,
            tolerance,
            passed: false,
            note: Some(note),
        }
    }
}

/// Per-λ numeric output of a regular point.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub lambda: f64,
    pub t0: CMat,
    pub s: CMat,
    pub eigenphases: Vec<f64>,
    /// `(residual name, value)`
    pub residuals: Vec<(&'static str, f64)>,
    /// `|S₁₂|²` in the lead basis, lattice only.
    pub transmission: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightRow {
    pub lambda: f64,
    pub stationary: f64,
    pub flight: f64,
    pub overlap: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub diagnostics: Vec<PointDiagnostics>,
    pub points: Vec<PointResult>,
    pub flights: Vec<FlightRow>,
    pub checks: Vec<Check>,
}

fn worst(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0_f64, |a, b| if b.is_nan() { f64::NAN } else { a.max(b) })
}

struct Evaluated {
    diag: PointDiagnostics,
    point: Option<PointResult>,
    error: Option<String>,
}

fn evaluate_point(
    rig: &Rigging,
    j: &Perturbation,
    chain: Option<&Perturbation>,
    lambda: f64,
    lattice: bool,
    opts: &LapOptions,
) -> rigscat::Result<(PointDiagnostics, PointResult)> {
    let h0 = OperatorAtLambda::unperturbed(rig, lambda, opts)?;
    let h1 = h0.perturbed(j)?;
    let data = scattering_data(&h0, &h1, j)?;
    let identity = diamond_identity_residual(&h0.fiber, &h0.ev).max(diamond_identity_residual(&h1.fiber, &h1.ev));
    let unitarity = data
        .w_plus
        .unitarity_defect
        .max(data.w_minus.unitarity_defect)
        .max(data.s.unitarity_defect);
    let agreement = data.w_plus.agreement.max(data.w_minus.agreement);
    let multiplicativity = match chain {
        Some(j2) => {
            let h2 = h0.perturbed(j2)?;
            let p = multiplicativity_check(Sign::Plus, &h0, &h1, &h2, j, j2)?;
            let m = multiplicativity_check(Sign::Minus, &h0, &h1, &h2, j, j2)?;
            Some(p.max(m))
        }
        None => None,
    };
    let transmission = if lattice && data.r0 == 2 {
        let u = channel_unitary(&h0.ev, &lattice_channels(rig, lambda)?)?;
        Some(lead_basis(&data.stationary.in_basis(&u))[(0, 1)].norm_sqr())
    } else {
        None
    };
    let mut residuals = vec![
        ("identity", identity),
        ("unitarity", unitarity),
        ("wave_agreement", agreement),
        ("stationary_gap", data.stationary_gap),
        ("form_residual", data.form_residual),
        ("nuclear_defect", data.s.nuclear_defect),
    ];
    if let Some(m) = multiplicativity {
        residuals.push(("multiplicativity", m));
    }
    let diag = PointDiagnostics {
        lambda,
        regular: true,
        reason: None,
        condition: h1.t.diagnostics.condition,
        rank0: Some(data.r0),
        rank1: Some(data.r1),
        identity_residual: Some(identity),
        unitarity: Some(unitarity),
        wave_agreement: Some(agreement),
        stationary_gap: Some(data.stationary_gap),
        nuclear_defect: Some(data.s.nuclear_defect),
        multiplicativity,
    };
    let point = PointResult {
        lambda,
        t0: h0.t.t.clone(),
        s: data.s.s.clone(),
        eigenphases: data.s.eigenphases.clone(),
        residuals,
        transmission,
    };
    Ok((diag, point))
}

fn sheaf_checks(cfg: &Config, rig: &Rigging, tol: &Tolerances) -> Vec<Check> {
    let Some(sheaf) = &cfg.sheaf else {
        return Vec::new();
    };
    let opts = LapOptions::default();
    let fibers: Result<Vec<_>, rigscat::Error> = sheaf
        .windows
        .iter()
        .map(|&[lo, hi]| {
            let w = Window::new(lo, hi)?;
            windowed_fiber(rig, &schmidt_window(rig, &w), sheaf.lambda, &opts)
        })
        .collect();
    let fibers = match fibers {
        Ok(f) => f,
        Err(e) => return vec![Check::failed("gluing_unitarity", tol.gluing_unitarity, e.to_string())],
    };
    let mut unitarity = 0.0_f64;
    let mut product: Option<CMat> = None;
    for pair in fibers.windows(2) {
        match gluing_unitary(sheaf.lambda, &pair[0], &pair[1]) {
            Ok(g) => {
                unitarity = unitarity.max(g.unitarity_defect);
                product = Some(match product {
                    Some(p) => &g.u * p,
                    None => g.u,
                });
            }
            Err(e) => return vec![Check::failed("gluing_unitarity", tol.gluing_unitarity, e.to_string())],
        }
    }
    let mut checks = vec![Check::new("gluing_unitarity", unitarity, tol.gluing_unitarity)];
    if fibers.len() > 2 {
        // The composed chain must equal the direct gluing first → last.
        let direct = gluing_unitary(sheaf.lambda, &fibers[0], fibers.last().unwrap());
        checks.push(match (direct, product) {
            (Ok(d), Some(p)) => Check::new("cocycle", max_abs(&(&d.u - p)), tol.cocycle),
            (Err(e), _) => Check::failed("cocycle", tol.cocycle, e.to_string()),
            (_, None) => Check::failed("cocycle", tol.cocycle, "no gluing".into()),
        });
    }
    checks
}

/// Norm agreement of windowed evaluations on random coordinates, seeded.
fn window_norm_check(cfg: &Config, rig: &Rigging) -> Option<f64> {
    let sheaf = cfg.sheaf.as_ref()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let opts = LapOptions::default();
    let f: Vec<_> = sheaf
        .windows
        .iter()
        .map(|&[lo, hi]| {
            let w = Window::new(lo, hi).ok()?;
            windowed_fiber(rig, &schmidt_window(rig, &w), sheaf.lambda, &opts).ok()
        })
        .collect::<Option<_>>()?;
    let m = rig.m();
    let mut gap = 0.0_f64;
    for _ in 0..8 {
        let coords = CVec::from_fn(m, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let norms: Vec<f64> = f.iter().map(|w| w.evaluate(&coords).map(|v| v.norm())).collect::<Result<_, _>>().ok()?;
        for n in &norms[1..] {
            gap = gap.max((n - norms[0]).abs());
        }
    }
    Some(gap)
}

fn timecheck(cfg: &Config, rig: &Rigging, j: &Perturbation, tol: &Tolerances) -> (Vec<FlightRow>, Vec<Check>) {
    let Some(tc) = &cfg.timecheck else {
        return (Vec::new(), Vec::new());
    };
    let pc = PropagationConfig {
        radius: tc.radius,
        t_max: tc.t_max,
        ..Default::default()
    };
    let opts = LapOptions::default();
    let run = || -> rigscat::Result<Vec<FlightRow>> {
        let h0 = LatticeHamiltonian::free(pc.radius);
        let h1 = LatticeHamiltonian::perturbed(pc.radius, rig, j)?;
        tc.energies
            .iter()
            .map(|&lambda| {
                let flight = transmission_by_flight(&h1, lambda, tc.center, tc.width, tc.samples, &pc)?;
                let op = OperatorAtLambda::unperturbed(rig, lambda, &opts)?;
                let s = stationary_scattering_matrix(&op, j)?;
                let u = channel_unitary(&op.ev, &lattice_channels(rig, lambda)?)?;
                let stationary = lead_basis(&s.in_basis(&u))[(0, 1)].norm_sqr();
                let overlap = if tc.overlap {
                    // a packet leaving the scatterer, so W₋ sees one full pass
                    let packet = WavePacket::at_energy(tc.center, lambda, tc.width, false)?;
                    pc.check_packet(&packet, 2.0, pc.t_max)?;
                    let f = packet.sites(pc.radius);
                    let td = time_wave_operator(&f, &h0, &h1, pc.t_max, false, pc.tol)?;
                    let st = lattice_wave_operator(rig, j, Sign::Minus, |k| packet.fourier(k), &f, pc.radius, 512, &opts)?;
                    Some(td.state.dotc(&st).norm())
                } else {
                    None
                };
                Ok(FlightRow {
                    lambda,
                    stationary,
                    flight: flight.transmission,
                    overlap,
                })
            })
            .collect()
    };
    match run() {
        Ok(rows) => {
            let mut checks = vec![Check::new(
                "transmission",
                worst(rows.iter().map(|r| (r.flight - r.stationary).abs())),
                tol.transmission,
            )];
            if tc.overlap {
                checks.push(Check::new(
                    "wave_overlap",
                    worst(rows.iter().map(|r| 1.0 - r.overlap.unwrap_or(0.0))),
                    tol.overlap,
                ));
            }
            (rows, checks)
        }
        Err(e) => (Vec::new(), vec![Check::failed("transmission", tol.transmission, e.to_string())]),
    }
}

pub fn run(cfg: &Config, tol: &Tolerances) -> Result<RunOutput, CliError> {
    let model = build_model(&cfg.model_config())?;
    let rig = Rigging::new(model, cfg.weight(), cfg.rigging.rank)?;
    let j = cfg.coupling_matrix(cfg.perturbation.coupling)?;
    let chain = match &cfg.chain {
        Some(ch) => Some(cfg.coupling_matrix(cfg.perturbation.coupling + ch.step)?),
        None => None,
    };
    let grid = cfg.grid();
    let opts = LapOptions::default();
    let lattice = cfg.model.kind == ModelKind::Lattice;

    let mut operators = vec![j.clone()];
    operators.extend(chain.iter().cloned());
    let scan = scan_regular_points(&rig, &operators, &grid, &opts);

    let evaluated: Vec<Evaluated> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &lambda)| {
            if !scan.regular[i] {
                let reason = scan.verdicts.iter().find_map(|v| v[i].reason.clone());
                return Evaluated {
                    diag: PointDiagnostics {
                        lambda,
                        regular: false,
                        reason,
                        condition: scan.verdicts.get(1).and_then(|v| v[i].condition),
                        rank0: None,
                        rank1: None,
                        identity_residual: None,
                        unitarity: None,
                        wave_agreement: None,
                        stationary_gap: None,
                        nuclear_defect: None,
                        multiplicativity: None,
                    },
                    point: None,
                    error: None,
                };
            }
            match evaluate_point(&rig, &j, chain.as_ref(), lambda, lattice, &opts) {
                Ok((diag, point)) => Evaluated {
                    diag,
                    point: Some(point),
                    error: None,
                },
                Err(e) => Evaluated {
                    diag: PointDiagnostics {
                        lambda,
                        regular: true,
                        reason: Some(e.to_string()),
                        condition: None,
                        rank0: None,
                        rank1: None,
                        identity_residual: None,
                        unitarity: None,
                        wave_agreement: None,
                        stationary_gap: None,
                        nuclear_defect: None,
                        multiplicativity: None,
                    },
                    point: None,
                    error: Some(format!("λ={lambda}: {e}")),
                },
            }
        })
        .collect();

    let mut checks = vec![Check::new("excluded_fraction", scan.excluded_fraction(), tol.excluded_fraction)];
    let errors: Vec<String> = evaluated.iter().filter_map(|e| e.error.clone()).collect();
    if !errors.is_empty() {
        checks.push(Check::failed("scattering", 0.0, errors.join("; ")));
    }
    let diagnostics: Vec<PointDiagnostics> = evaluated.iter().map(|e| e.diag.clone()).collect();
    let points: Vec<PointResult> = evaluated.into_iter().filter_map(|e| e.point).collect();
    let stage = |f: fn(&PointDiagnostics) -> Option<f64>| worst(diagnostics.iter().filter_map(f));
    checks.push(Check::new("identity", stage(|d| d.identity_residual), tol.identity));
    checks.push(Check::new("unitarity", stage(|d| d.unitarity), tol.unitarity));
    checks.push(Check::new("wave_agreement", stage(|d| d.wave_agreement), tol.wave_agreement));
    checks.push(Check::new("stationary_gap", stage(|d| d.stationary_gap), tol.stationary));
    if chain.is_some() {
        checks.push(Check::new("multiplicativity", stage(|d| d.multiplicativity), tol.multiplicativity));
    }
    checks.extend(sheaf_checks(cfg, &rig, tol));
    if let Some(gap) = window_norm_check(cfg, &rig) {
        checks.push(Check::new("window_norms", gap, tol.gluing_unitarity));
    }
    let (flights, time_checks) = timecheck(cfg, &rig, &j, tol);
    checks.extend(time_checks);
    Ok(RunOutput {
        diagnostics,
        points,
        flights,
        checks,
    })
}
