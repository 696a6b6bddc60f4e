use std::f64::consts::PI;

use htc_core::analysis::non_gaussianity;
use htc_core::dense::{DenseEngine, DenseOptions};
use htc_core::model::{sample_disorder, DisorderRealization, HtcParams, InitialStateSpec};
use htc_core::mps::{
    load_checkpoint, save_checkpoint, AlarmPolicy, EhrenfestEngine, EvolutionConfig, MpsEngine, MpsError,
    SiteKind, TrotterOrder,
};
use htc_core::ReducedVibrationalState;
use ndarray::Array2;
use num_complex::Complex64 as C64;

fn fourth_order(p: &HtcParams, chi: usize) -> EvolutionConfig {
    let mut c = EvolutionConfig::for_params(p);
    c.order = TrotterOrder::Fourth;
    c.chi_max = chi;
    c
}

fn dense_states(
    p: &HtcParams,
    r: &DisorderRealization,
    spec: InitialStateSpec,
    t: f64,
) -> Vec<ReducedVibrationalState> {
    let e = DenseEngine::new(p, r, DenseOptions::default()).unwrap();
    let s = e.propagate(&e.initial_state(spec).unwrap(), t).unwrap();
    (0..p.n_molecules).map(|i| e.reduced_vibrational_dm(&s, i).unwrap()).collect()
}

#[test]
fn rabi_limit_of_tavis_cummings() {
    let p = HtcParams::resonant(4).with_lambda(0.0).with_vib_cutoff(1);
    let mut m = MpsEngine::new(&p, &DisorderRealization::clean(4), InitialStateSpec::CavityExcited, fourth_order(&p, 16)).unwrap();
    let period = p.vibrational_period();
    let times: Vec<f64> = (0..=100).map(|k| period * k as f64 / 100.0).collect();
    for o in m.run(&times, false).unwrap() {
        assert!((o.photon_number - o.time.cos().powi(2)).abs() < 1e-6, "t={}", o.time);
        assert!(o.vibrational_states[2].trace_distance(&ReducedVibrationalState::vacuum(1)).unwrap() < 1e-12);
    }
}

#[test]
fn displaced_oscillator_half_period() {
    let mut p = HtcParams::resonant(1).with_vib_cutoff(12);
    p.g_collective = 0.0;
    let mut m = MpsEngine::new(&p, &DisorderRealization::clean(1), InitialStateSpec::MoleculeExcited(1), EvolutionConfig::for_params(&p)).unwrap();
    let o = m.run(&[PI / p.nu], false).unwrap().remove(0);
    let rho = &o.vibrational_states[0];
    assert!((rho.mean_x() - 2.0 * 2f64.sqrt() * 0.4).abs() < 1e-6, "{}", rho.mean_x());
    assert!(non_gaussianity(rho).unwrap() < 1e-6);
}

#[test]
fn matches_dense_oracle_for_two_molecules() {
    let p = HtcParams::resonant(2).with_disorder(0.5).with_vib_cutoff(5);
    let r = sample_disorder(&p, 3);
    let spec = InitialStateSpec::MoleculeExcited(1);
    let t = PI / p.nu;
    let exact = dense_states(&p, &r, spec, t);
    let mut m = MpsEngine::new(&p, &r, spec, fourth_order(&p, 64)).unwrap();
    m.advance_to(t).unwrap();
    for (i, rho) in exact.iter().enumerate() {
        let d = m.reduced_vibrational_dm(i).unwrap().trace_distance(rho).unwrap();
        assert!(d < 1e-6, "molecule {i}: {d:e}");
    }
}

#[test]
fn full_rank_agrees_with_dense_at_every_sample() {
    let p = HtcParams::resonant(3).with_disorder(0.5).with_vib_cutoff(3);
    let r = sample_disorder(&p, 11);
    let spec = InitialStateSpec::CavityExcited;
    let period = p.vibrational_period();
    let times: Vec<f64> = (1..=4).map(|k| period * k as f64 / 4.0).collect();
    let e = DenseEngine::new(&p, &r, DenseOptions::default()).unwrap();
    let dense = e.evolve(&e.initial_state(spec).unwrap(), &times).unwrap();
    let mut cfg = fourth_order(&p, 1024);
    cfg.svd_cutoff = 0.0;
    let mut m = MpsEngine::new(&p, &r, spec, cfg).unwrap();
    for (o, s) in m.run(&times, false).unwrap().iter().zip(&dense) {
        for i in 0..3 {
            let d = o.vibrational_states[i].trace_distance(&e.reduced_vibrational_dm(s, i).unwrap()).unwrap();
            assert!(d < 1e-8, "t={} molecule {i}: {d:e}", o.time);
        }
        assert!((o.photon_number - e.photon_number(s)).abs() < 1e-8);
    }
}

#[test]
fn conservation_laws() {
    let p = HtcParams::resonant(3).with_disorder(0.5).with_vib_cutoff(6);
    let r = sample_disorder(&p, 5);
    let period = p.vibrational_period();
    let times: Vec<f64> = (0..=8).map(|k| period * k as f64 / 8.0).collect();
    let max_drift = |steps: usize| {
        let cfg = EvolutionConfig::for_params(&p).with_steps_per_period(&p, steps);
        let mut m = MpsEngine::new(&p, &r, InitialStateSpec::MoleculeExcited(2), cfg).unwrap();
        let obs = m.run(&times, true).unwrap();
        let e0 = obs[0].energy.unwrap();
        for o in &obs {
            assert!((o.norm - 1.0).abs() < 1e-8);
            assert!((o.excitation_number() - 1.0).abs() < 1e-8);
            assert!(o.max_bond_dim <= 64);
            for rho in &o.vibrational_states {
                assert!(non_gaussianity(rho).unwrap() >= -1e-8);
            }
        }
        assert_eq!(m.state().kinds()[0], SiteKind::Cavity);
        obs.iter().map(|o| ((o.energy.unwrap() - e0) / e0).abs()).fold(0.0, f64::max)
    };
    let coarse = max_drift(400);
    let fine = max_drift(800);
    // the drift is Trotter error, so it falls as dt^2
    assert!((3.5..4.5).contains(&(coarse / fine)), "{coarse:e} {fine:e}");
    assert!(fine < 1e-4, "{fine:e}");
}

#[test]
fn halving_dt_quarters_the_trotter_error() {
    let p = HtcParams::resonant(2).with_disorder(0.5).with_vib_cutoff(4);
    let r = sample_disorder(&p, 9);
    let spec = InitialStateSpec::MoleculeExcited(1);
    let t = p.vibrational_period();
    let exact = dense_states(&p, &r, spec, t);
    let error = |steps: usize| {
        let cfg = EvolutionConfig::for_params(&p).with_steps_per_period(&p, steps);
        let mut m = MpsEngine::new(&p, &r, spec, cfg).unwrap();
        m.advance_to(t).unwrap();
        m.reduced_vibrational_dm(0).unwrap().trace_distance(&exact[0]).unwrap()
    };
    let ratio = error(100) / error(200);
    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn larger_bond_dimension_is_more_accurate() {
    let p = HtcParams::resonant(3).with_disorder(0.5).with_vib_cutoff(4);
    let r = sample_disorder(&p, 21);
    let spec = InitialStateSpec::MoleculeExcited(1);
    let t = p.vibrational_period();
    let exact = dense_states(&p, &r, spec, t);
    let distance = |chi: usize| {
        let mut m = MpsEngine::new(&p, &r, spec, fourth_order(&p, chi)).unwrap();
        m.advance_to(t).unwrap();
        assert!(m.state().max_bond_dim() <= chi);
        m.reduced_vibrational_dm(0).unwrap().trace_distance(&exact[0]).unwrap()
    };
    let coarse = distance(2);
    let fine = distance(64);
    assert!(coarse > fine && fine < 1e-6, "{coarse:e} vs {fine:e}");
}

#[test]
fn truncation_alarm_can_abort() {
    let p = HtcParams::resonant(3).with_disorder(0.5).with_vib_cutoff(4);
    let r = sample_disorder(&p, 2);
    let mut cfg = EvolutionConfig::for_params(&p);
    cfg.chi_max = 1;
    let mut warn = MpsEngine::new(&p, &r, InitialStateSpec::CavityExcited, cfg.clone()).unwrap();
    warn.advance_to(1.0).unwrap();
    assert!(warn.alarm_count() > 0);
    cfg.alarm_policy = AlarmPolicy::Abort;
    let mut abort = MpsEngine::new(&p, &r, InitialStateSpec::CavityExcited, cfg).unwrap();
    assert!(matches!(abort.advance_to(1.0), Err(MpsError::TruncationAlarm { .. })));
}

#[test]
fn local_expectations() {
    let p = HtcParams::resonant(3).with_vib_cutoff(2);
    let m = MpsEngine::new(&p, &DisorderRealization::clean(3), InitialStateSpec::CavityExcited, EvolutionConfig::for_params(&p)).unwrap();
    let ops = &m.terms().ops;
    let n = m.state().expectation(0, &ops.photon_number).unwrap();
    assert!((n - C64::new(1.0, 0.0)).norm() < 1e-12);
    let id = Array2::<C64>::eye(p.molecule_dim());
    assert!((m.state().expectation(2, &id).unwrap() - 1.0).norm() < 1e-12);
    assert!(m.state().expectation(2, &ops.adag).is_err());
}

#[test]
fn expectation_of_hermitian_operator_is_real() {
    let p = HtcParams::resonant(3).with_disorder(0.5).with_vib_cutoff(3);
    let mut m = MpsEngine::new(&p, &sample_disorder(&p, 4), InitialStateSpec::MoleculeExcited(1), EvolutionConfig::for_params(&p)).unwrap();
    m.advance_to(5.0).unwrap();
    let ops = &m.terms().ops;
    let x = ops.on_molecule_vibrational(&(&ops.vib.b + &ops.vib.bdag));
    for pos in 1..4 {
        assert!(m.state().expectation(pos, &x).unwrap().im.abs() < 1e-10);
    }
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let p = HtcParams::resonant(3).with_disorder(0.5).with_vib_cutoff(3);
    let r = sample_disorder(&p, 8);
    let cfg = EvolutionConfig::for_params(&p);
    let spec = InitialStateSpec::MoleculeExcited(1);
    let mut straight = MpsEngine::new(&p, &r, spec, cfg.clone()).unwrap();
    for _ in 0..40 {
        straight.step().unwrap();
    }
    let mut first = MpsEngine::new(&p, &r, spec, cfg.clone()).unwrap();
    for _ in 0..20 {
        first.step().unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let manifest = save_checkpoint(&first, &r, dir.path()).unwrap();
    assert_eq!(manifest.steps, 20);
    assert_eq!(manifest.params_digest, p.digest());
    let (_, mut resumed) = load_checkpoint(dir.path(), cfg.clone()).unwrap();
    for _ in 0..20 {
        resumed.step().unwrap();
    }
    assert_eq!(resumed.time(), straight.time());
    for pos in 0..4 {
        assert_eq!(resumed.state().tensor(pos), straight.state().tensor(pos));
    }

    let data = dir.path().join("tensors.bin");
    let mut bytes = std::fs::read(&data).unwrap();
    bytes[3] ^= 0x40;
    std::fs::write(&data, bytes).unwrap();
    assert!(matches!(load_checkpoint(dir.path(), cfg), Err(MpsError::Checkpoint(_))));
}

#[test]
fn ehrenfest_states_stay_gaussian_and_conserve_energy() {
    let p = HtcParams::resonant(4).with_disorder(0.5).with_vib_cutoff(8);
    let r = sample_disorder(&p, 6);
    let mut e = EhrenfestEngine::new(&p, &r, InitialStateSpec::MoleculeExcited(1), fourth_order(&p, 1)).unwrap();
    let period = p.vibrational_period();
    let times: Vec<f64> = (0..=16).map(|k| period * k as f64 / 16.0).collect();
    let obs = e.run(&times, true).unwrap();
    let e0 = obs[0].energy.unwrap();
    for o in &obs {
        for rho in &o.vibrational_states {
            assert!(non_gaussianity(rho).unwrap() < 1e-6);
            assert!((rho.purity() - 1.0).abs() < 1e-10);
        }
        assert!((o.excitation_number() - 1.0).abs() < 1e-10);
        assert!((o.energy.unwrap() - e0).abs() < 1e-6, "{} vs {e0}", o.energy.unwrap());
    }
}

/// Mean-field equations for coherent vibrations, integrated with RK4.
fn mean_field_ode(p: &HtcParams, eps: &[f64], t: f64, steps: usize) -> (Vec<C64>, Vec<C64>) {
    let n = p.n_molecules;
    let g = p.coupling_per_molecule();
    let (nu, lam) = (p.nu, p.huang_rhys_lambda);
    let i = C64::i();
    // y = [c_cav, c_1..c_N, β_1..β_N]
    let rhs = |y: &[C64]| -> Vec<C64> {
        let mut d = vec![C64::new(0.0, 0.0); 2 * n + 1];
        d[0] = -i * g * y[1..=n].iter().sum::<C64>();
        for k in 0..n {
            let c = y[1 + k];
            let b = y[1 + n + k];
            d[1 + k] = -i * (g * y[0] + (eps[k] + p.detuning - 2.0 * lam * nu * b.re) * c);
            d[1 + n + k] = -i * (nu * b - lam * nu * c.norm_sqr());
        }
        d
    };
    let mut y = vec![C64::new(0.0, 0.0); 2 * n + 1];
    y[1] = C64::new(1.0, 0.0);
    let h = t / steps as f64;
    let axpy = |y: &[C64], k: &[C64], s: f64| y.iter().zip(k).map(|(a, b)| a + b * s).collect::<Vec<_>>();
    for _ in 0..steps {
        let k1 = rhs(&y);
        let k2 = rhs(&axpy(&y, &k1, h / 2.0));
        let k3 = rhs(&axpy(&y, &k2, h / 2.0));
        let k4 = rhs(&axpy(&y, &k3, h));
        for j in 0..y.len() {
            y[j] += (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) * (h / 6.0);
        }
    }
    (y[..=n].to_vec(), y[n + 1..].to_vec())
}

#[test]
fn ehrenfest_matches_mean_field_ode() {
    let p = HtcParams::resonant(3).with_disorder(0.5).with_vib_cutoff(12);
    let r = sample_disorder(&p, 13);
    let t = p.vibrational_period();
    let (amps, betas) = mean_field_ode(&p, &r.epsilons, t, 20_000);
    let mut e = EhrenfestEngine::new(&p, &r, InitialStateSpec::MoleculeExcited(1), fourth_order(&p, 1)).unwrap();
    let o = e.run(&[t], false).unwrap().remove(0);
    assert!((o.photon_number - amps[0].norm_sqr()).abs() < 1e-6);
    for k in 0..3 {
        assert!((o.excited_populations[k] - amps[1 + k].norm_sqr()).abs() < 1e-6, "molecule {k}");
        let rho = &o.vibrational_states[k];
        assert!((rho.mean_b() - betas[k]).norm() < 1e-6, "molecule {k}: {} vs {}", rho.mean_b(), betas[k]);
    }
}

#[test]
fn ehrenfest_is_exact_without_vibronic_coupling() {
    let p = HtcParams::resonant(3).with_lambda(0.0).with_disorder(0.5).with_vib_cutoff(2);
    let r = sample_disorder(&p, 1);
    let spec = InitialStateSpec::MoleculeExcited(2);
    let times = [2.0, 7.5, p.vibrational_period()];
    let d = DenseEngine::new(&p, &r, DenseOptions::default()).unwrap();
    let exact = d.evolve(&d.initial_state(spec).unwrap(), &times).unwrap();
    let mut e = EhrenfestEngine::new(&p, &r, spec, fourth_order(&p, 1)).unwrap();
    for (o, s) in e.run(&times, false).unwrap().iter().zip(&exact) {
        assert!((o.photon_number - d.photon_number(s)).abs() < 1e-8, "{} vs {}", o.photon_number, d.photon_number(s));
        for k in 0..3 {
            assert!((o.excited_populations[k] - d.excited_population(s, k)).abs() < 1e-8);
            assert!(o.vibrational_states[k].trace_distance(&d.reduced_vibrational_dm(s, k).unwrap()).unwrap() < 1e-8);
        }
    }
}
