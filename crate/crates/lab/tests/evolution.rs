use mkdv_core::{BreatherParams, Order, SolitonParams};
use mkdv_lab::evolution::*;
use mkdv_lab::functionals::Kind;
use mkdv_lab::grid::{Fourier, SampledField, Window};
use mkdv_lab::perturb::{perturbation, Shape};
use rustfft::num_complex::Complex64;

fn h2_error(a: &SampledField, b: &SampledField) -> f64 {
    let d: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
    Fourier::new(a.window).sobolev_sq(&d, 2).sqrt()
}

fn breather_error(p: &BreatherParams, n: usize, dt: f64, t_end: f64) -> (f64, Trajectory) {
    let cfg = EvolutionConfig::for_breather(p, n, dt, t_end).unwrap();
    let u0 = SampledField::breather(p, 0.0, cfg.window, 0).unwrap();
    let traj = evolve(&u0, cfg, &default_monitors(p.order)).unwrap();
    let exact = SampledField::breather(p, t_end, cfg.window, 0).unwrap();
    (h2_error(traj.last(), &exact), traj)
}

#[test]
fn exact_breathers_propagate() {
    for (order, n, dt) in [(Order::Five, 2048, 1e-3), (Order::Seven, 2048, 2.5e-4), (Order::Nine, 2048, 2.5e-3)] {
        let p = BreatherParams::new(order, 1.0, 1.0, 0.3, -0.2).unwrap();
        let t_end = 0.2 / p.c0();
        let (err, traj) = breather_error(&p, n, dt, t_end);
        assert!(err <= 1e-5, "{order:?} {err:e}");
        assert!(traj.warnings.is_empty(), "{:?}", traj.warnings);
        assert!(traj.drift(Kind::M).unwrap() <= 1e-8, "{order:?} {:?}", traj.drifts);
        for (k, d) in &traj.drifts {
            assert!(*d <= 1e-7, "{order:?} {k:?} {d:e}");
        }
    }
}

#[test]
fn lab_and_envelope_frames_agree() {
    let p = BreatherParams::new(Order::Five, 1.0, 0.8, 0.1, 0.4).unwrap();
    let t_end = 0.05;
    let cfg = EvolutionConfig::for_breather(&p, 1024, 1e-3, t_end).unwrap();
    let lab = EvolutionConfig { frame_speed: 0.0, ..cfg };
    let u0 = SampledField::breather(&p, 0.0, cfg.window, 0).unwrap();
    let a = evolve(&u0, cfg, &[]).unwrap();
    let b = evolve(&u0, lab, &[]).unwrap();
    let exact = SampledField::breather(&p, t_end, cfg.window, 0).unwrap();
    assert!(h2_error(a.last(), b.last()) <= 1e-5);
    assert!(h2_error(b.last(), &exact) <= 1e-5);
}

#[test]
fn halving_the_step_gains_a_factor_eight() {
    let p = BreatherParams::new(Order::Five, 1.0, 0.8, 0.1, 0.4).unwrap();
    let t_end = 0.2 / p.c0();
    let errs: Vec<f64> = [2e-3, 1e-3].iter().map(|&dt| breather_error(&p, 1024, dt, t_end).0).collect();
    assert!(errs[0] / errs[1] >= 8.0, "{errs:?}");
}

#[test]
fn reversing_time_returns_to_the_start() {
    let p = BreatherParams::new(Order::Seven, 1.0, 1.0, 0.0, 0.0).unwrap();
    let t = 0.02;
    let (one_way, fwd) = breather_error(&p, 1024, 1e-3, t);
    let back = EvolutionConfig { window: fwd.last().window, ..EvolutionConfig::for_breather(&p, 1024, 1e-3, -t).unwrap() };
    let back = evolve(fwd.last(), back, &[]).unwrap();
    assert!(h2_error(back.last(), &fwd.snapshots[0].field) <= 10.0 * one_way.max(1e-12));
}

#[test]
fn solitons_move_at_the_power_law_speed() {
    let w = Window::new(0.0, 32.0, 1024).unwrap();
    let f = Fourier::new(w);
    let t = 0.5;
    for order in [Order::Five, Order::Seven, Order::Nine] {
        let c = 1.2;
        let p = SolitonParams::new(order, c).unwrap();
        let u0 = SampledField::soliton(&p, 0.0, w, 0).unwrap();
        let out = evolve(&u0, EvolutionConfig::new(order, w, 5e-3, t), &default_monitors(order)).unwrap();
        // circular cross-correlation through the spectrum
        let (a, b) = (f.forward(&u0.values), f.forward(&out.last().values));
        let prod: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x.conj() * y).collect();
        let corr = f.inverse_real(&prod);
        let peak = (0..w.n).max_by(|&i, &j| corr[i].total_cmp(&corr[j])).unwrap();
        let shift = if peak > w.n / 2 { peak as f64 - w.n as f64 } else { peak as f64 } * w.dx();
        let v = c.powi(order.half() as i32);
        assert!((shift - v * t).abs() <= w.dx(), "{order:?} {shift} {}", v * t);
        for (k, d) in &out.drifts {
            assert!(*d <= 1e-7, "{order:?} {k:?} {d:e}");
        }
    }
}

#[test]
fn aliasing_shows_without_padding() {
    // a coarse grid: on a resolved one the aliased modes of an analytic profile are negligible
    let p = BreatherParams::new(Order::Nine, 1.0, 1.0, 0.0, 0.0).unwrap();
    let cfg = EvolutionConfig::for_breather(&p, 512, 1e-3, 0.02).unwrap();
    let u0 = SampledField::breather(&p, 0.0, cfg.window, 0).unwrap();
    let padded = evolve(&u0, cfg, &[Kind::M]).unwrap().drift(Kind::M).unwrap();
    assert!(padded <= 1e-7, "{padded:e}");
    let aliased = evolve(&u0, EvolutionConfig { dealias_pad: 1, ..cfg }, &[Kind::M]);
    match aliased {
        Ok(tr) => {
            assert!(tr.warnings.iter().any(|w| w.contains("aliased")));
            assert!(tr.drift(Kind::M).unwrap() >= 100.0 * padded, "{:?} {padded:e}", tr.drifts);
        }
        Err(e) => assert!(matches!(e, mkdv_lab::LabError::Convergence { .. } | mkdv_lab::LabError::NonFinite(_)), "{e}"),
    }
}

#[test]
fn fit_recovers_exact_phases() {
    let p = BreatherParams::new(Order::Five, 1.0, 1.0, 0.3, -0.2).unwrap();
    let w = Window::for_breather(&p, 0.4, 1024).unwrap();
    let u = SampledField::breather(&p, 0.4, w, 0).unwrap();
    let fit = fit_modulation(&u, &p.with_phases(0.0, 0.0), 0.4, (0.0, 0.0)).unwrap();
    assert!((fit.x1 - 0.3).abs() <= 1e-8 && (fit.x2 + 0.2).abs() <= 1e-8, "{fit:?}");
    assert!(fit.distance <= 1e-8);
    assert!(fit.gradient <= FIT_GRADIENT_TOL);
}

#[test]
fn fit_distance_tracks_a_small_bump() {
    let p = BreatherParams::centered(Order::Five, 1.0, 1.0).unwrap();
    let w = Window::for_breather(&p, 0.0, 1024).unwrap();
    let f = Fourier::new(w);
    let u = SampledField::breather(&p, 0.0, w, 0).unwrap().axpy(1.0, &perturbation(&f, Shape::Gaussian, &p, 0.0, 0, 1e-3, 0).unwrap());
    let fit = fit_modulation(&u, &p, 0.0, (0.0, 0.0)).unwrap();
    assert!(fit.distance <= 2e-3, "{fit:?}");
}

#[test]
fn far_seed_is_never_silently_wrong() {
    let p = BreatherParams::centered(Order::Five, 1.0, 1.0).unwrap();
    let w = Window::for_breather(&p, 0.0, 1024).unwrap();
    let u = SampledField::breather(&p, 0.0, w, 0).unwrap();
    match fit_modulation(&u, &p, 0.0, (5.0, 5.0)) {
        Ok(fit) => {
            // a translate of the same profile
            let q = p.with_phases(fit.x1, fit.x2);
            assert!(h2_error(&SampledField::breather(&q, 0.0, w, 0).unwrap(), &u) <= 1e-8, "{fit:?}");
        }
        Err(e) => assert!(matches!(e, mkdv_lab::LabError::Convergence { .. }), "{e}"),
    }
}

#[test]
fn frozen_template_phases_move_with_the_velocities() {
    let p = BreatherParams::new(Order::Seven, 1.0, 1.0, 0.0, 0.0).unwrap();
    let w = Window::for_breather(&p, 0.05, 1024).unwrap();
    let f = Fourier::new(w);
    let (t0, t1) = (0.04, 0.06);
    let fit = |t: f64, seed| {
        let u = SampledField::breather(&p, t, w, 0).unwrap();
        fit_modulation_with(&f, &u, &p, t, seed, Template::Frozen).unwrap()
    };
    let a = fit(t0, (p.vel.delta * t0, p.vel.gamma * t0));
    let b = fit(t1, (a.x1, a.x2));
    let rate = ((b.x1 - a.x1) / (t1 - t0), (b.x2 - a.x2) / (t1 - t0));
    assert!((rate.0 - p.vel.delta).abs() <= 1e-3 && (rate.1 - p.vel.gamma).abs() <= 1e-3, "{rate:?} {:?}", p.vel);
}

#[test]
fn unperturbed_breather_stays_on_its_orbit() {
    let p = BreatherParams::centered(Order::Five, 1.0, 1.0).unwrap();
    let cfg = StabilityConfig { t_end: 0.5, ..StabilityConfig::default() };
    let r = stability_experiment(&p, 0.0, Shape::Gaussian, &cfg).unwrap();
    assert!(r.sup_distance <= 1e-5, "{:?}", r.distances);
    assert!(r.max_phase_rate <= 1e-3, "{}", r.max_phase_rate);
    assert!(r.warnings.is_empty(), "{:?}", r.warnings);
    assert!(stability_experiment(&p, 0.2, Shape::Gaussian, &cfg).is_err());
}

#[test]
fn linear_mode_follows_the_dispersion_relation() {
    let w = Window::new(0.0, std::f64::consts::PI * 4.0, 64).unwrap();
    let k = 1.5;
    let amp = 1e-8;
    let t = 0.3;
    for order in [Order::Five, Order::Seven, Order::Nine] {
        let u0 = SampledField::values_only(w, w.points().iter().map(|x| amp * (k * x).cos()).collect());
        let mut cfg = EvolutionConfig::new(order, w, 1e-2, t);
        cfg.integrator = Integrator::Etdrk4;
        let out = evolve(&u0, cfg, &[]).unwrap();
        // u_t = -d^n u: cos(k x) -> cos(k x - (-1)^((n-1)/2) k^n t)
        let omega = if order.half() % 2 == 0 { 1.0 } else { -1.0 } * k.powi(order.n() as i32);
        let exact: Vec<f64> = w.points().iter().map(|x| amp * (k * x - omega * t).cos()).collect();
        let err = out.last().values.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err / amp <= 1e-10, "{order:?} {:e}", err / amp);
    }
}
