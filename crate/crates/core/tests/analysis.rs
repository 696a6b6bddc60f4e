mod common;

use common::{random_low_state, random_state};
use htc_core::analysis::*;
use htc_core::fockspace::{hermite_psi_all, ladder_matrices};
use htc_core::linalg::{dagger, evolution_operator};
use htc_core::ReducedVibrationalState;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use std::f64::consts::{LN_2, PI};

/// Direct quadrature of `(1/π)∫ψ_n(x−y)ψ_m(x+y)e^{2ipy}dy`.
fn wigner_by_quadrature(n: usize, m: usize, x: f64, p: f64) -> C64 {
    let npts = 4001;
    let (lo, hi) = (-12.0, 12.0);
    let h = (hi - lo) / (npts - 1) as f64;
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..npts {
        let y = lo + k as f64 * h;
        let a = hermite_psi_all(n, x - y).unwrap()[n];
        let b = hermite_psi_all(m, x + y).unwrap()[m];
        let w = if k == 0 || k == npts - 1 { 0.5 } else { 1.0 };
        acc += C64::from_polar(w * a * b, 2.0 * p * y);
    }
    acc * h / PI
}

fn displace(rho: &ReducedVibrationalState, alpha: C64) -> ReducedVibrationalState {
    let osc = ladder_matrices(rho.n_max()).unwrap();
    // D(α) = exp(αb† − α*b) = exp(−iH) with H = i(αb† − α*b)
    let gen = (&osc.bdag.mapv(|z| z * alpha) - &osc.b.mapv(|z| z * alpha.conj())).mapv(|z| z * C64::new(0.0, 1.0));
    let d = evolution_operator(&gen, 1.0).unwrap();
    let out = d.dot(rho.matrix()).dot(&dagger(&d));
    ReducedVibrationalState::project_physical(&out).unwrap()
}

#[test]
fn covariance_of_vacuum_and_first_fock_state() {
    let c0 = covariance(&ReducedVibrationalState::vacuum(8));
    assert_eq!((c0.mean_x, c0.mean_p), (0.0, 0.0));
    assert!((c0.v[0][0] - 0.5).abs() < 1e-15 && (c0.v[1][1] - 0.5).abs() < 1e-15 && c0.v[0][1] == 0.0);
    assert!((c0.symplectic - 0.5).abs() < 1e-15);
    let c1 = covariance(&ReducedVibrationalState::fock(1, 8));
    assert!((c1.v[0][0] - 1.5).abs() < 1e-14 && (c1.v[1][1] - 1.5).abs() < 1e-14);
    assert!((c1.symplectic - 1.5).abs() < 1e-14);
}

#[test]
fn covariance_uses_exact_commutator_at_cutoff() {
    // ⟨n_max|x²|n_max⟩ = n_max + 1/2 even though the truncated x̂² says n_max/2
    let c = covariance(&ReducedVibrationalState::fock(4, 4));
    assert!((c.v[0][0] - 4.5).abs() < 1e-14);
}

#[test]
fn covariance_of_coherent_state() {
    let alpha = C64::new(0.7, -0.4);
    let c = covariance(&ReducedVibrationalState::coherent(alpha, 40));
    assert!((c.mean_x - 2f64.sqrt() * 0.7).abs() < 1e-10);
    assert!((c.mean_p + 2f64.sqrt() * 0.4).abs() < 1e-10);
    assert!((c.v[0][0] - 0.5).abs() < 1e-10 && (c.v[1][1] - 0.5).abs() < 1e-10 && c.v[0][1].abs() < 1e-10);
}

#[test]
fn non_gaussianity_unit_values() {
    assert!(non_gaussianity(&ReducedVibrationalState::vacuum(8)).unwrap().abs() < 1e-12);
    let d1 = non_gaussianity(&ReducedVibrationalState::fock(1, 8)).unwrap();
    // independent: S(τ) at v = 3/2 is 2 ln 2 − 1·ln 1, S(|1⟩) = 0
    let s_tau = 2.0 * 2f64.ln() - 1.0 * 1f64.ln();
    assert!((d1 - s_tau).abs() < 1e-12);
    assert!((d1 - 2.0 * LN_2).abs() < 1e-6);
    for e0 in [0.01, 0.16, 1.0, 3.0] {
        let th = thermal_reference(e0, 1.0, 200).unwrap().state();
        assert!(non_gaussianity(&th).unwrap().abs() < 1e-8, "E0={e0}");
    }
}

#[test]
fn non_gaussianity_rejects_sub_vacuum_covariance() {
    // a non-physical matrix with ⟨b†b⟩ = 0 but ⟨b²⟩ ≠ 0
    let mut rho = Array2::zeros((3, 3));
    rho[(0, 0)] = C64::new(1.0, 0.0);
    rho[(2, 0)] = C64::new(0.3, 0.0);
    rho[(0, 2)] = C64::new(0.3, 0.0);
    let state = ReducedVibrationalState::from_matrix_unchecked(rho).unwrap();
    assert!(matches!(non_gaussianity(&state), Err(AnalysisError::NonPhysicalCovariance(_))));
}

#[test]
fn gaussian_state_reproduces_moments() {
    let cov = CovarianceSummary { mean_x: 0.4, mean_p: -0.3, v: [[0.9, 0.2], [0.2, 0.6]], symplectic: (0.9f64 * 0.6 - 0.04).sqrt() };
    let tau = gaussian_state(&cov, 30).unwrap();
    let back = covariance(&tau);
    assert!((back.mean_x - 0.4).abs() < 1e-8 && (back.mean_p + 0.3).abs() < 1e-8);
    for i in 0..2 {
        for j in 0..2 {
            assert!((back.v[i][j] - cov.v[i][j]).abs() < 1e-8);
        }
    }
    assert!(non_gaussianity(&tau).unwrap().abs() < 1e-8);
    let vac = gaussian_state(&covariance(&ReducedVibrationalState::vacuum(6)), 6).unwrap();
    assert!(vac.trace_distance(&ReducedVibrationalState::vacuum(6)).unwrap() < 1e-10);
}

#[test]
fn wigner_reference_points() {
    let grid = GridSpec::default();
    let w0 = wigner(&ReducedVibrationalState::vacuum(8), &grid).unwrap();
    let (peak, x, p) = w0.peak();
    assert!((peak - 1.0 / PI).abs() < 1e-12 && x.abs() < 1e-12 && p.abs() < 1e-12);
    let w1 = fock_kernel(1, 1, 0.0, 0.0);
    assert!((w1.re + 1.0 / PI).abs() < 1e-12 && w1.im == 0.0);
    assert!((wigner_by_quadrature(1, 1, 0.0, 0.0).re + 1.0 / PI).abs() < 1e-10);
}

#[test]
fn closed_form_kernels_match_quadrature_on_spot_checks() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(51);
    for _ in 0..51 {
        let n = rng.random_range(0..=8);
        let m = rng.random_range(0..=8);
        let x = rng.random_range(-4.0..4.0);
        let p = rng.random_range(-4.0..4.0);
        let a = fock_kernel(n, m, x, p);
        let b = wigner_by_quadrature(n, m, x, p);
        assert!((a - b).norm() < 1e-6, "n={n} m={m} x={x} p={p}: {a} vs {b}");
    }
}

#[test]
fn weyl_symbols_average_to_matrix_elements() {
    // 2π∬ W_ρ · Weyl(|m⟩⟨n|) = ρ_nm, checked by quadrature
    let rho = random_low_state(5, 4, 9);
    let grid = GridSpec { x_min: -7.0, x_max: 7.0, nx: 141, p_min: -7.0, p_max: 7.0, np: 141 };
    let w = wigner(&rho, &grid).unwrap();
    let xs = grid.xs();
    let ps = grid.ps();
    let mut est = Array2::<C64>::zeros((5, 5));
    let h = xs[1] - xs[0];
    for (i, &x) in xs.iter().enumerate() {
        for (j, &p) in ps.iter().enumerate() {
            est = est + weyl_symbols(x, p, 5).mapv(|z| z * w.values[(i, j)] * h * h);
        }
    }
    for (a, b) in est.iter().zip(rho.matrix().iter()) {
        assert!((a - b).norm() < 1e-8);
    }
}

#[test]
fn wigner_normalization_and_overlap_identity() {
    let grid = GridSpec::default();
    for seed in 0..4 {
        let r1 = random_state(9, 3, seed);
        let r2 = random_state(9, 9, 100 + seed);
        let w1 = wigner(&r1, &grid).unwrap();
        let w2 = wigner(&r2, &grid).unwrap();
        assert!((w1.normalization() - 1.0).abs() < 1e-3);
        let o = wigner_overlap(&w1, &w2).unwrap();
        let t = trace_overlap(&r1, &r2).unwrap();
        assert!((o - t).abs() < 1e-4, "seed {seed}: {o} vs {t}");
        let purity = wigner_overlap(&w1, &w1).unwrap();
        assert!((purity - r1.purity()).abs() < 1e-4);
    }
    let vac = wigner(&ReducedVibrationalState::vacuum(8), &grid).unwrap();
    let one = wigner(&ReducedVibrationalState::fock(1, 8), &grid).unwrap();
    assert!(wigner_overlap(&vac, &one).unwrap().abs() < 1e-10);
    assert!((wigner_overlap(&vac, &vac).unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn grid_checks() {
    let small = GridSpec { x_min: -1.0, x_max: 1.0, nx: 21, p_min: -1.0, p_max: 1.0, np: 21 };
    assert!(matches!(wigner(&ReducedVibrationalState::vacuum(4), &small), Err(AnalysisError::GridTooCoarse(_))));
    let a = wigner(&ReducedVibrationalState::vacuum(4), &GridSpec::default()).unwrap();
    let b = wigner(&ReducedVibrationalState::vacuum(4), &GridSpec { nx: 101, ..GridSpec::default() }).unwrap();
    assert!(matches!(wigner_overlap(&a, &b), Err(AnalysisError::GridMismatch)));
}

#[test]
fn thermal_reference_values() {
    let nu = 0.3;
    let e0 = 0.4f64.powi(2) * nu;
    let t = thermal_reference(e0, nu, 8).unwrap();
    assert!((t.beta * nu - 7.25f64.ln()).abs() < 1e-12);
    assert!((t.beta * nu - 1.9810).abs() < 1e-4);
    assert!((t.mean_occupation() - 0.16).abs() < 1e-10);
    // geometric-series mean computed term by term
    let q = (-t.beta * nu).exp();
    let direct: f64 = (0..2000).map(|n| n as f64 * q.powi(n) * (1.0 - q)).sum();
    assert!((direct - 0.16).abs() < 1e-10);
    assert!(t.tail < 1e-7);

    let room = thermal_reference_at_beta(4.0, 1.0, 50);
    let p1 = room.untruncated_population(1);
    assert!((p1 - (-4f64).exp() * (1.0 - (-4f64).exp())).abs() < 1e-15);
    assert!((p1 - 0.0180).abs() < 1e-4 && p1 < 0.02);

    let betas: Vec<f64> = [0.1, 1.0, 10.0, 100.0, 1e4].iter().map(|&e| thermal_reference(e, nu, 4).unwrap().beta).collect();
    assert!(betas.windows(2).all(|w| w[1] < w[0]) && betas[4] < 1e-3);
    assert!(matches!(thermal_reference(0.0, nu, 4), Err(AnalysisError::NonPositiveEnergy(_))));
}

#[test]
fn fidelity_values() {
    let vac = ReducedVibrationalState::vacuum(60);
    let one = ReducedVibrationalState::fock(1, 60);
    assert!((fidelity(&vac, &vac).unwrap() - 1.0).abs() < 1e-10);
    assert!(fidelity(&vac, &one).unwrap() < 1e-12);
    let th = thermal_reference_at_beta(LN_2, 1.0, 60).state();
    assert!((fidelity(&vac, &th).unwrap() - 0.5).abs() < 1e-10);
    let a = random_state(6, 3, 1);
    let b = random_state(6, 6, 2);
    let fab = fidelity(&a, &b).unwrap();
    assert!((fab - fidelity(&b, &a).unwrap()).abs() < 1e-8);
    assert!(fab > 0.0 && fab < 1.0);
    assert!((fidelity(&b, &b).unwrap() - 1.0).abs() < 1e-8);
}

#[test]
fn spectrum_of_thermal_and_pure_states() {
    let t = thermal_reference_at_beta(2.0, 1.0, 8);
    let s = spectrum_and_heatmap(&t.state()).unwrap();
    for (a, b) in s.eigenvalues.iter().zip(&t.populations) {
        assert!((a - b).abs() < 1e-12);
    }
    for w in s.eigenvalues.windows(2) {
        assert!(((w[1] / w[0]).ln() + 2.0).abs() < 1e-8);
    }
    assert_eq!(s.off_diagonal_mass(), 0.0);
    let pure = spectrum_and_heatmap(&ReducedVibrationalState::coherent(C64::new(0.5, 0.1), 10)).unwrap();
    assert!((pure.eigenvalues[0] - 1.0).abs() < 1e-12);
    assert!(pure.eigenvalues[1..].iter().all(|&l| l.abs() < 1e-12));
    assert!(pure.heatmap.iter().flatten().all(|&v| v >= 0.0));
    assert!(pure.off_diagonal_mass() > 0.0);
}

#[test]
fn trace_distance_and_state_validation() {
    let vac = ReducedVibrationalState::vacuum(3);
    let one = ReducedVibrationalState::fock(1, 3);
    assert!((vac.trace_distance(&one).unwrap() - 1.0).abs() < 1e-14);
    let mut bad = vac.matrix().clone();
    bad[(0, 0)] = C64::new(0.5, 0.0);
    assert!(ReducedVibrationalState::new(bad).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn delta_is_nonnegative(seed in 0u64..10_000, rank in 1usize..6) {
        let rho = random_low_state(12, 6, seed);
        let _ = rank;
        prop_assert!(non_gaussianity(&rho).unwrap() >= -1e-8);
    }

    #[test]
    fn delta_is_displacement_invariant(seed in 0u64..10_000, re in -0.8f64..0.8, im in -0.8f64..0.8) {
        let rho = random_low_state(41, 4, seed);
        let moved = displace(&rho, C64::new(re, im));
        let d0 = non_gaussianity(&rho).unwrap();
        let d1 = non_gaussianity(&moved).unwrap();
        prop_assert!((d0 - d1).abs() < 1e-6, "{} vs {}", d0, d1);
    }

    #[test]
    fn self_overlap_is_purity(seed in 0u64..10_000, rank in 1usize..5) {
        let rho = random_state(6, rank, seed);
        let p = trace_overlap(&rho, &rho).unwrap();
        prop_assert!(p > 0.0 && p <= 1.0 + 1e-12);
        prop_assert_eq!((p - 1.0).abs() < 1e-6, rank == 1);
    }

    #[test]
    fn normalized_overlap_is_one_only_for_equal_states(seed in 0u64..10_000, rank in 1usize..5) {
        let rho = random_state(6, rank, seed);
        let sigma = random_state(6, rank, seed + 1);
        prop_assert!((normalized_overlap(&rho, &rho).unwrap() - 1.0).abs() < 1e-12);
        let o = normalized_overlap(&rho, &sigma).unwrap();
        prop_assert!((0.0..1.0 - 1e-6).contains(&o));
        if rank == 1 {
            prop_assert!((o - trace_overlap(&rho, &sigma).unwrap()).abs() < 1e-12);
        }
    }
}
