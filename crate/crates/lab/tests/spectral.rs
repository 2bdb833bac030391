use mkdv_core::{BreatherParams, Order};
use mkdv_lab::functionals::quadratic_form;
use mkdv_lab::grid::{Fourier, SampledField, Window};
use mkdv_lab::identities::Sampling;
use mkdv_lab::perturb::{perturbation, Shape};
use mkdv_lab::spectral::*;
use nalgebra::DVector;
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn spectrum_has_one_negative_direction_and_a_two_dimensional_kernel() {
    for (a, b) in [(1.0, 1.0), (2.0, 1.0), (1.0, 2.0)] {
        let p = BreatherParams::new(Order::Five, a, b, 0.3, -0.2).unwrap();
        let opr = build_operator(&p, 0.1, spectral_window(&p, 0.1, 512).unwrap()).unwrap();
        assert!(opr.asymmetry < 1e-10);
        let s = spectrum(&opr).unwrap().summary;
        assert_eq!(s.negative_eigenvalues.len(), 1, "{s:?}");
        assert_eq!(s.kernel_dimension(), 2, "{s:?}");
        assert!(rel(s.continuum_edge_estimate, s.continuum_edge) < 0.02, "{s:?}");
        assert!(s.lowest[3] > s.continuum_edge * 0.98);
    }
}

#[test]
fn eigenvalues_converge_under_refinement() {
    let p = BreatherParams::centered(Order::Five, 1.0, 1.0).unwrap();
    let a = spectrum(&build_operator(&p, 0.0, spectral_window(&p, 0.0, 512).unwrap()).unwrap()).unwrap();
    let b = spectrum(&build_operator(&p, 0.0, spectral_window(&p, 0.0, 1024).unwrap()).unwrap()).unwrap();
    for i in 0..5 {
        assert!((a.values[i] - b.values[i]).abs() <= 1e-8 * (1.0 + b.values[i].abs()), "{i}");
    }
}

#[test]
fn free_operator_sits_above_the_edge() {
    for (a, b) in [(1.0, 2.0), (2.0, 1.0)] {
        let p = BreatherParams::centered(Order::Five, a, b).unwrap();
        let s = spectrum(&assemble(Linearized::free(&p, spectral_window(&p, 0.0, 256).unwrap()))).unwrap();
        assert!(s.values[0] >= continuum_edge(a, b) * (1.0 - 1e-12));
        assert!(s.summary.negative_eigenvalues.is_empty());
    }
}

#[test]
fn scaling_directions_have_opposite_signs() {
    for (a, b) in [(1.0, 1.0), (0.7, 1.3)] {
        let p = BreatherParams::centered(Order::Seven, a, b).unwrap();
        let w = Window::for_breather(&p, 0.2, 2048).unwrap();
        let op = Linearized::new(&p, 0.2, w).unwrap();
        let dirs = directions(&p, 0.2, w).unwrap();
        let f = scaling_forms(&op, &dirs);
        assert!(rel(f.alpha, f.expected) < 1e-5, "{f:?}");
        assert!(rel(f.beta, -f.expected) < 1e-5, "{f:?}");
        let l_b1 = op.apply(&dirs.b1);
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm(&l_b1) / norm(&dirs.b1) < 1e-6);
    }
}

#[test]
fn b0_relations_hold() {
    let p = BreatherParams::centered(Order::Five, 1.0, 1.0).unwrap();
    let w = Window::for_breather(&p, 0.0, 2048).unwrap();
    let op = Linearized::new(&p, 0.0, w).unwrap();
    let r = b0_relations(&op, &directions(&p, 0.0, w).unwrap());
    assert!((r.mass - 0.125).abs() < 1e-5);
    assert!((r.form + 0.0625).abs() < 1e-5);
    assert!(r.residual < 1e-5, "{r:?}");
    // L[B0] = -B closes the chain
    assert!((r.form + 0.5 * r.mass).abs() < 1e-8);
}

#[test]
fn wronskian_matches_closed_form() {
    let p = BreatherParams::centered(Order::Five, 1.0, 1.0).unwrap();
    assert_eq!(mkdv_core::wronskian(&p, 0.0, 0.0), 0.0);
    for (a, b, t) in [(1.0, 1.0, 0.0), (0.6, 1.7, 0.4), (2.0, 0.5, -1.0)] {
        let q = BreatherParams::new(Order::Nine, a, b, 0.2, 0.5).unwrap();
        let r = wronskian_check(&q, t, &Sampling::default().points(q.center(t), b));
        assert!(r.passes(1e-8), "{r:?}");
    }
    for x in [0.3, 1.1, 2.5] {
        let (u, v) = (mkdv_core::wronskian(&p, 0.0, x), mkdv_core::wronskian(&p, 0.0, -x));
        assert!((u + v).abs() < 1e-14 * u.abs());
    }
}

#[test]
fn coercivity_needs_every_constraint() {
    let p = BreatherParams::centered(Order::Five, 1.0, 1.0).unwrap();
    let w = spectral_window(&p, 0.0, 512).unwrap();
    let opr = build_operator(&p, 0.0, w).unwrap();
    let s = spectrum(&opr).unwrap();
    let neg = s.negative_eigenvector().unwrap();
    let dirs = directions(&p, 0.0, w).unwrap();
    let nu = coercivity(&opr, &dirs, &neg).unwrap();
    assert!(nu > 0.05, "{nu}");
    assert!(coercivity_with(&opr, &[&neg, &dirs.b2]).unwrap() < 1e-6);
    assert!(coercivity_with(&opr, &[&dirs.b1, &dirs.b2]).unwrap() < 0.0);
    let b1 = DVector::from_column_slice(&dirs.b1);
    let q = (b1.transpose() * &opr.matrix * &b1)[0];
    assert!(q.abs() <= 1e-6 * b1.norm_squared());
}

#[test]
fn matrix_form_matches_the_integrated_quadratic_form() {
    let p = BreatherParams::centered(Order::Five, 1.2, 0.9).unwrap();
    let w = spectral_window(&p, 0.0, 512).unwrap();
    let opr = build_operator(&p, 0.0, w).unwrap();
    let f = Fourier::new(w);
    for seed in 0..10 {
        let z: SampledField = perturbation(&f, Shape::Random, &p, 0.0, seed, 1.0, 2).unwrap();
        let v = DVector::from_column_slice(&z.values);
        let discrete = (v.transpose() * &opr.matrix * &v)[0] * w.dx();
        let integrated = quadratic_form(&p, 0.0, &z).unwrap();
        assert!(rel(discrete, integrated) < 1e-8, "{seed}: {discrete} {integrated}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn operator_is_self_adjoint(s1 in 0u64..1000, s2 in 0u64..1000) {
        let p = BreatherParams::centered(Order::Five, 1.0, 1.3).unwrap();
        let w = Window::for_breather(&p, 0.0, 512).unwrap();
        let op = Linearized::new(&p, 0.0, w).unwrap();
        let f = Fourier::new(w);
        let z = perturbation(&f, Shape::Random, &p, 0.0, s1, 1.0, 0).unwrap().values;
        let y = perturbation(&f, Shape::Random, &p, 0.0, s2, 1.0, 0).unwrap().values;
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let (lz, ly) = (op.apply(&z), op.apply(&y));
        let scale = norm(&z) * norm(&ly) + norm(&y) * norm(&lz);
        prop_assert!((dot(&z, &ly) - dot(&y, &lz)).abs() <= 1e-12 * scale);
    }
}
