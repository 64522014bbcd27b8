mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use common::{brute_hamiltonian, expm_taylor, overlap, random_state};
use jch_core::dynamics::{
    evolve, evolve_dense, run_adiabatic, run_quench, DenseEvolver, PropagatorKind, RunOptions, Schedule,
};
use jch_core::graphs::{named_graph, table1_array};
use jch_core::hilbert::{site_operator, LocalState, SiteOperatorKind, Tls};
use jch_core::observables::{order_parameter, site_moments};
use jch_core::{assemble_jch, build_graph, enumerate_basis, ModelParams, StateVector};

fn paper(delta_over_g: f64) -> ModelParams {
    let p = ModelParams::sweep_preset();
    p.with_delta(delta_over_g * p.g)
}

#[test]
fn sparse_assembly_matches_brute_force() {
    let cases = [
        ("dimer", 3, Some(2)),
        ("chain3", 3, Some(3)),
        ("star4", 2, Some(4)),
        ("cycle4", 2, None),
        ("table1", 2, Some(5)),
    ];
    for (name, n_max, sector) in cases {
        let graph = Arc::new(if name == "table1" {
            table1_array().graph
        } else {
            named_graph(name).unwrap()
        });
        let basis = Arc::new(enumerate_basis(graph.sites(), n_max, sector).unwrap());
        let mut params = paper(3.7).with_hopping(2.3e-3);
        params.chemical_potential = Some((0..graph.sites()).map(|i| 0.01 * i as f64).collect());
        let h = assemble_jch(&graph, &params, &basis).unwrap();
        let reference = brute_hamiltonian(&graph, &params, &basis);
        let diff = (h.matrix().to_dense() - reference).abs().max();
        assert!(diff < 1e-14, "{name}: max deviation {diff}");
    }
}

#[test]
fn krylov_matches_taylor_oracle_on_random_dimer_state() {
    let graph = Arc::new(named_graph("dimer").unwrap());
    let basis = Arc::new(enumerate_basis(2, 3, Some(2)).unwrap());
    let params = paper(2.0);
    let h = assemble_jch(&graph, &params, &basis).unwrap();
    let v = StateVector::new(basis.clone(), random_state(basis.dim(), 7)).unwrap();
    let t = 1.0 / params.hopping;
    let krylov = evolve(&v, &h, t, 1e-10).unwrap();
    let reference = expm_taylor(&brute_hamiltonian(&graph, &params, &basis), v.amplitudes(), t);
    assert!(overlap(krylov.amplitudes(), &reference) >= 1.0 - 1e-8);
    let dense = evolve_dense(&v, &h, t).unwrap();
    assert!(overlap(dense.amplitudes(), &reference) >= 1.0 - 1e-8);
    // Componentwise, including the global phase.
    let err: f64 = krylov
        .amplitudes()
        .iter()
        .zip(&reference)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    assert!(err < 1e-8, "2-norm error {err}");
}

#[test]
fn krylov_matches_taylor_oracle_on_larger_graphs() {
    for (name, n_max) in [("star4", 3), ("complete4", 2), ("table1", 2)] {
        let graph = Arc::new(if name == "table1" {
            table1_array().graph
        } else {
            named_graph(name).unwrap()
        });
        let sites = graph.sites();
        let basis = Arc::new(enumerate_basis(sites, n_max, Some(sites)).unwrap());
        let params = paper(5.0);
        let h = assemble_jch(&graph, &params, &basis).unwrap();
        let v = StateVector::new(basis.clone(), random_state(basis.dim(), 11)).unwrap();
        let t = 0.37 / params.hopping;
        let got = evolve(&v, &h, t, 1e-10).unwrap();
        let reference = expm_taylor(&brute_hamiltonian(&graph, &params, &basis), v.amplitudes(), t);
        let o = overlap(got.amplitudes(), &reference);
        assert!(o >= 1.0 - 1e-8, "{name}: overlap {o}");
    }
}

#[test]
fn evolution_preserves_inner_products() {
    let graph = Arc::new(named_graph("path4").unwrap());
    let basis = Arc::new(enumerate_basis(4, 3, Some(4)).unwrap());
    let h = assemble_jch(&graph, &paper(4.0), &basis).unwrap();
    let t = 1e4;
    for seed in 0..3 {
        let phi = StateVector::new(basis.clone(), random_state(basis.dim(), 100 + seed)).unwrap();
        let psi = StateVector::new(basis.clone(), random_state(basis.dim(), 200 + seed)).unwrap();
        let before = phi.inner(&psi);
        let after = evolve(&phi, &h, t, 1e-10)
            .unwrap()
            .inner(&evolve(&psi, &h, t, 1e-10).unwrap());
        assert!((before - after).norm() < 1e-8);
    }
}

#[test]
fn zero_time_is_identity() {
    let graph = Arc::new(named_graph("dimer").unwrap());
    let basis = Arc::new(enumerate_basis(2, 5, Some(2)).unwrap());
    let h = assemble_jch(&graph, &paper(1.0), &basis).unwrap();
    let v = StateVector::new(basis.clone(), random_state(basis.dim(), 3)).unwrap();
    assert_eq!(evolve(&v, &h, 0.0, 1e-10).unwrap(), v);
}

#[test]
fn single_site_rabi_oscillation() {
    let graph = Arc::new(build_graph(&[], 1).unwrap());
    let basis = Arc::new(enumerate_basis(1, 5, Some(1)).unwrap());
    let params = paper(0.0);
    let h = assemble_jch(&graph, &params, &basis).unwrap();
    let start = basis.index_of(&[LocalState::new(1, Tls::Down)]).unwrap();
    let psi0 = StateVector::basis_state(basis.clone(), start);
    let excited = site_operator(&basis, 0, SiteOperatorKind::TlsNumber).unwrap().matrix;
    let t = PI / (4.0 * params.g);
    let psi = evolve(&psi0, &h, t, 1e-12).unwrap();
    assert!((excited.expectation(psi.amplitudes()) - 0.5).norm() < 1e-8);
    for k in 1..=10 {
        let t = k as f64 * 37.0;
        let psi = evolve(&psi0, &h, t, 1e-12).unwrap();
        let expected = (params.g * t).sin().powi(2);
        assert!((excited.expectation(psi.amplitudes()) - expected).norm() < 1e-8);
    }
}

#[test]
fn dense_evolver_agrees_with_taylor_oracle() {
    let graph = Arc::new(named_graph("triangle").unwrap());
    let basis = Arc::new(enumerate_basis(3, 3, Some(3)).unwrap());
    let params = paper(6.0);
    let h = assemble_jch(&graph, &params, &basis).unwrap();
    let dense = DenseEvolver::new(&h).unwrap();
    let v = StateVector::new(basis.clone(), random_state(basis.dim(), 5)).unwrap();
    let t = 2.0 / params.hopping;
    let reference = expm_taylor(&brute_hamiltonian(&graph, &params, &basis), v.amplitudes(), t);
    assert!(overlap(dense.evolve(&v, t).amplitudes(), &reference) >= 1.0 - 1e-10);
}

#[test]
fn post_quench_dimer_moments_match_oracle() {
    let graph = Arc::new(named_graph("dimer").unwrap());
    let params = paper(10f64.powf(0.5));
    let opts = RunOptions::default();
    let t = 1.0 / params.hopping;
    let report = run_quench(&graph, &params, &Schedule::quench(params.delta, t), &opts).unwrap();
    let basis = report.final_state.basis().clone();
    let psi0 = jch_core::prepare_mott_state(&basis).unwrap();
    let reference = expm_taylor(&brute_hamiltonian(&graph, &params, &basis), psi0.amplitudes(), t);
    for site in 0..2 {
        let (mean, second) = site_moments(&report.final_state, site).unwrap();
        let n = |i: usize| basis.local(i, site).excitations() as f64;
        let ref_mean = common::diagonal_expectation(&reference, n);
        let ref_second = common::diagonal_expectation(&reference, |i| n(i) * n(i));
        assert!((mean - ref_mean).abs() < 1e-8);
        assert!((second - ref_second).abs() < 1e-8);
    }
}

#[test]
fn dense_and_krylov_protocols_agree() {
    let graph = Arc::new(named_graph("chain3").unwrap());
    let params = paper(2.5);
    let krylov = RunOptions::default();
    let dense = RunOptions {
        propagator: PropagatorKind::Dense,
        ..krylov
    };
    let t = 1.0 / params.hopping;
    let quench = Schedule::quench(params.delta, t);
    let a = run_quench(&graph, &params, &quench, &krylov).unwrap();
    let b = run_quench(&graph, &params, &quench, &dense).unwrap();
    assert!(overlap(a.final_state.amplitudes(), b.final_state.amplitudes()) >= 1.0 - 1e-8);
    assert!((order_parameter(&a).unwrap() - order_parameter(&b).unwrap()).abs() < 1e-8);
    let ramp = Schedule::adiabatic(params.delta, 20.0 * t, t);
    let a = run_adiabatic(&graph, &params, &ramp, &krylov).unwrap();
    let b = run_adiabatic(&graph, &params, &ramp, &dense).unwrap();
    assert!(overlap(a.final_state.amplitudes(), b.final_state.amplitudes()) >= 1.0 - 1e-8);
}

#[test]
fn zero_amplitude_ramp_coincides_with_quench() {
    let graph = Arc::new(named_graph("dimer").unwrap());
    let params = paper(0.0);
    let t = 1.0 / params.hopping;
    let opts = RunOptions::default();
    let q = run_quench(&graph, &params, &Schedule::quench(0.0, t), &opts).unwrap();
    let a = run_adiabatic(&graph, &params, &Schedule::adiabatic(0.0, 20.0 * t, t), &opts).unwrap();
    assert_eq!(a.ramp_steps, 0);
    assert!((order_parameter(&q).unwrap() - order_parameter(&a).unwrap()).abs() < 1e-10);
}

#[test]
fn quench_order_parameter_grows_with_detuning() {
    let graph = Arc::new(named_graph("dimer").unwrap());
    let opts = RunOptions::default();
    let t = 1.0 / ModelParams::sweep_preset().hopping;
    let op = |d: f64| {
        let p = paper(d);
        order_parameter(&run_quench(&graph, &p, &Schedule::quench(p.delta, t), &opts).unwrap()).unwrap()
    };
    let at_zero = op(0.0);
    assert!(at_zero < 0.05, "{at_zero}");
    assert!(op(10f64.powf(0.8)) > at_zero);
}

#[test]
fn quadrature_self_convergence() {
    let graph = Arc::new(named_graph("dimer").unwrap());
    let p = paper(10f64.powf(0.5));
    let t = 1.0 / p.hopping;
    let run = |samples: usize| {
        let opts = RunOptions {
            sample_count: samples,
            ..RunOptions::default()
        };
        order_parameter(&run_quench(&graph, &p, &Schedule::quench(p.delta, t), &opts).unwrap()).unwrap()
    };
    let (a, b) = (run(200), run(400));
    assert!((a - b).abs() / b.abs() < 1e-3, "{a} vs {b}");
}

#[test]
fn uncoupled_mott_state_is_stationary() {
    let graph = Arc::new(named_graph("star4").unwrap());
    let opts = RunOptions {
        n_max: 3,
        ..RunOptions::default()
    };
    for d in [0.0, 1.0, 7.0] {
        let p = paper(d).with_hopping(0.0);
        let report = run_quench(&graph, &p, &Schedule::quench(p.delta, 1e4), &opts).unwrap();
        assert!(order_parameter(&report).unwrap().abs() < 1e-10);
    }
}
