mod common;

use std::f64::consts::PI;

use common::diag_j;
use num_complex::Complex64;
use proptest::prelude::*;
use rigscat::lap::LapOptions;
use rigscat::linalg::{c, eigh, CMat, CVec};
use rigscat::model::{build_model, ModelConfig, Perturbation, Rigging, Weight, Window};
use rigscat::scattering::{
    channel_unitary, lattice_channels, lattice_wave_operator, lead_basis, stationary_scattering_matrix,
    OperatorAtLambda, Sign,
};
use rigscat::timedomain::{
    bessel_sequence, energy_window_integral, evolve, light_cone_leak, propagate, time_wave_operator,
    transmission_by_flight, LatticeHamiltonian, PropagationConfig, WavePacket,
};
use rigscat::Error;

fn lattice(m: usize) -> Rigging {
    let model = build_model(&ModelConfig::lattice(80)).unwrap();
    Rigging::new(model, Weight::Decay(1.0), m).unwrap()
}

fn dense(h: &LatticeHamiltonian) -> CMat {
    let n = h.dim();
    let mut out = CMat::zeros(n, n);
    for i in 0..n {
        let mut e = vec![c(0.0, 0.0); n];
        e[i] = c(1.0, 0.0);
        let mut col = vec![c(0.0, 0.0); n];
        h.apply(&e, &mut col);
        for k in 0..n {
            out[(k, i)] = col[k];
        }
    }
    out
}

#[test]
fn bessel_values() {
    let j = bessel_sequence(1.0, 3);
    assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-15);
    assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-15);
    let j = bessel_sequence(10.0, 5);
    assert!((j[0] + 0.245_935_764_451_348_3).abs() < 1e-14);
    assert!((j[5] + 0.234_061_528_186_793_6).abs() < 1e-14);
    let j = bessel_sequence(-10.0, 5);
    assert!((j[5] - 0.234_061_528_186_793_6).abs() < 1e-14);
}

#[test]
fn propagation_matches_dense_exponential() {
    let rig = lattice(2);
    let h = LatticeHamiltonian::perturbed(30, &rig, &diag_j(&[0.7, 0.0])).unwrap();
    let eig = eigh(&dense(&h));
    let psi = WavePacket {
        center: -5.0,
        momentum: -1.1,
        width: 3.0,
    }
    .sites(30);
    for t in [0.3, 7.0, -12.5] {
        let phases = CMat::from_diagonal(&CVec::from_iterator(
            eig.values.len(),
            eig.values.iter().map(|&e| Complex64::from_polar(1.0, -t * e)),
        ));
        let exact = &eig.vectors * phases * eig.vectors.adjoint() * &psi;
        let got = evolve(&psi, &h, t, 1e-8).unwrap();
        assert!((got.state - exact).norm() < 1e-11);
        assert!(got.error_bound < 1e-12);
    }
}

#[test]
fn zero_time_is_identity_and_norm_is_conserved() {
    let h = LatticeHamiltonian::free(500);
    let psi = WavePacket {
        center: 0.0,
        momentum: 0.7,
        width: 10.0,
    }
    .sites(500);
    let p = propagate(&psi, &h, 0.0, 1e-8).unwrap();
    assert_eq!(p.state, psi);
    let p = propagate(&psi, &h, 100.0, 1e-8).unwrap();
    assert!(p.norm_defect < 1e-9 * 100.0);
    assert!(propagate(&psi, &h, -1.0, 1e-8).is_err());
    assert!(matches!(evolve(&psi, &h, 100.0, 1e-40), Err(Error::StepControl { .. })));
}

#[test]
fn free_packet_moves_with_group_velocity() {
    let cfg = PropagationConfig::default();
    let h = LatticeHamiltonian::free(cfg.radius);
    for theta in [PI / 3.0, PI / 2.0, 2.0 * PI / 3.0] {
        let packet = WavePacket::at_energy(-200.0, 2.0 * theta.cos(), 10.0, true).unwrap();
        let psi = propagate(&packet.sites(cfg.radius), &h, 200.0, cfg.tol).unwrap().state;
        let mean: f64 = psi
            .iter()
            .enumerate()
            .map(|(i, z)| (i as f64 - cfg.radius as f64) * z.norm_sqr())
            .sum();
        let drift = (mean + 200.0) / 200.0;
        let expected = 2.0 * theta.sin();
        assert!(((drift - expected) / expected).abs() < 1e-2, "θ={theta}: {drift}");
    }
}

#[test]
fn packet_transform_matches_direct_sum() {
    let packet = WavePacket {
        center: -37.3,
        momentum: 1.2,
        width: 6.0,
    };
    let f = packet.sites(300);
    assert!((f.norm() - 1.0).abs() < 1e-13);
    for k in [-2.0, 0.4, 1.2, 1.5, 3.0] {
        let direct: Complex64 = f
            .iter()
            .enumerate()
            .map(|(i, z)| z * Complex64::from_polar(1.0, -k * (i as f64 - 300.0)))
            .sum();
        assert!((direct - packet.fourier(k)).norm() < 1e-12);
    }
}

#[test]
fn wave_operator_of_zero_perturbation_is_identity() {
    let h = LatticeHamiltonian::free(600);
    let f = WavePacket {
        center: -80.0,
        momentum: 1.0,
        width: 10.0,
    }
    .sites(600);
    let r = time_wave_operator(&f, &h, &h, 100.0, false, 1e-8).unwrap();
    assert!((r.state - &f).norm() < 1e-10);
    assert!(r.tail < 1e-10);
}

#[test]
fn time_and_stationary_wave_operators_agree() {
    let rig = lattice(2);
    let j = diag_j(&[0.5, 0.0]);
    let cfg = PropagationConfig::default();
    let h0 = LatticeHamiltonian::free(cfg.radius);
    let h1 = LatticeHamiltonian::perturbed(cfg.radius, &rig, &j).unwrap();
    for theta in [PI / 2.0, PI / 3.0, 2.0 * PI / 3.0] {
        // moving left, away from the scatterer: W₋ sees it after a full pass
        let packet = WavePacket::at_energy(-80.0, 2.0 * theta.cos(), 10.0, false).unwrap();
        cfg.check_packet(&packet, 2.0, cfg.t_max).unwrap();
        let f = packet.sites(cfg.radius);
        let td = time_wave_operator(&f, &h0, &h1, cfg.t_max, false, cfg.tol).unwrap();
        assert!(td.tail < 1e-3, "{}", td.tail);
        let st = lattice_wave_operator(
            &rig,
            &j,
            Sign::Minus,
            |k| packet.fourier(k),
            &f,
            cfg.radius,
            512,
            &LapOptions::default(),
        )
        .unwrap();
        let overlap = td.state.dotc(&st).norm();
        assert!(overlap > 1.0 - 1e-3, "θ={theta}: {overlap}");
        // W₊ for the same packet is a different state
        let plus = time_wave_operator(&f, &h0, &h1, cfg.t_max, true, cfg.tol).unwrap();
        assert!(plus.state.dotc(&st).norm() < 0.99);
    }
}

#[test]
fn flight_without_perturbation_transmits_everything() {
    let rig = lattice(2);
    let cfg = PropagationConfig {
        radius: 800,
        ..Default::default()
    };
    let h = LatticeHamiltonian::perturbed(cfg.radius, &rig, &Perturbation::zero(2)).unwrap();
    let r = transmission_by_flight(&h, 0.3, -80.0, 10.0, 8, &cfg).unwrap();
    assert!((r.transmission - 1.0).abs() < 1e-8);
    assert!(r.reflection < 1e-8);
}

#[test]
fn flight_matches_stationary_transmission() {
    let rig = lattice(2);
    let v = 0.5;
    let j = diag_j(&[v, 0.0]);
    let cfg = PropagationConfig::default();
    let h1 = LatticeHamiltonian::perturbed(cfg.radius, &rig, &j).unwrap();
    for lam in [-1.0, 0.0, 1.0] {
        let r = transmission_by_flight(&h1, lam, -80.0, 10.0, 20, &cfg).unwrap();
        assert!((r.transmission + r.reflection - 1.0).abs() < 1e-3);
        assert!((r.transmitted_mass + r.reflected_mass - 1.0).abs() < 1e-3);
        assert!(r.series.iter().all(|s| s.norm_defect < 1e-9));
        let h0 = OperatorAtLambda::unperturbed(&rig, lam, &LapOptions::default()).unwrap();
        let s = stationary_scattering_matrix(&h0, &j).unwrap();
        let u = channel_unitary(&h0.ev, &lattice_channels(&rig, lam).unwrap()).unwrap();
        let t2 = lead_basis(&s.in_basis(&u))[(0, 1)].norm_sqr();
        assert!((r.transmission - t2).abs() < 1e-3, "λ={lam}: {} vs {t2}", r.transmission);
    }
}

#[test]
fn propagation_respects_the_light_cone() {
    let cfg = PropagationConfig::default();
    for theta in [0.4, PI / 2.0, 2.6] {
        let packet = WavePacket {
            center: -100.0,
            momentum: theta,
            width: 10.0,
        };
        let leak = light_cone_leak(&packet, 300.0, &cfg).unwrap();
        assert!(leak < 1e-6, "{leak}");
    }
}

#[test]
fn energy_window_bound_holds() {
    let rig = lattice(3);
    let cfg = PropagationConfig {
        radius: 1200,
        ..Default::default()
    };
    for (lam, window) in [(0.0, Window::new(-1.2, 1.2).unwrap()), (1.0, Window::new(0.2, 1.8).unwrap())] {
        let packet = WavePacket::at_energy(-60.0, lam, 10.0, true).unwrap();
        let check = energy_window_integral(&rig, &packet, &window, 200.0, 0.25, &cfg).unwrap();
        assert!(check.outside_mass < 1e-10);
        assert!(check.integral > 0.0);
        assert!(check.integral <= check.bound * 1.05, "{check:?}");
    }
}

#[test]
fn packets_near_the_boundary_are_refused() {
    let cfg = PropagationConfig {
        radius: 300,
        ..Default::default()
    };
    let packet = WavePacket {
        center: -80.0,
        momentum: 1.0,
        width: 10.0,
    };
    assert!(cfg.check_packet(&packet, 1.0, 200.0).is_err());
    assert!(light_cone_leak(&packet, 200.0, &cfg).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn evolution_is_a_group(t1 in -30.0..30.0f64, t2 in -30.0..30.0f64, k in -3.0..3.0f64) {
        let rig = lattice(2);
        let h = LatticeHamiltonian::perturbed(200, &rig, &diag_j(&[0.4, -0.2])).unwrap();
        let psi = WavePacket { center: 0.0, momentum: k, width: 5.0 }.sites(200);
        let a = evolve(&evolve(&psi, &h, t1, 1e-8).unwrap().state, &h, t2, 1e-8).unwrap().state;
        let b = evolve(&psi, &h, t1 + t2, 1e-8).unwrap().state;
        prop_assert!((a - b).norm() < 1e-10);
    }
}
