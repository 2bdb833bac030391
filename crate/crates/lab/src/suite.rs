//! Check suites behind the command-line front end. Each suite maps a config to a report and
//! a set of named output files; nothing here touches the filesystem.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use mkdv_core::{BreatherParams, IdentityId, Order, SolitonParams};
use serde_json::{json, Value};

use crate::config::{Command, RunConfig};
use crate::evolution::{default_monitors, evolve, stability_experiment, EvolutionConfig, StabilityConfig, StabilityReport};
use crate::functionals::*;
use crate::grid::{Fourier, SampledField, Window};
use crate::identities::*;
use crate::perturb::{perturbation, Shape};
use crate::report::{csv_err, fmt_f64, write_json, Record, SuiteReport};
use crate::spectral::*;
use crate::LabError;

/// Worker count from `MKDV_WORKERS`, else the available parallelism.
pub fn workers() -> usize {
    std::env::var("MKDV_WORKERS")
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// `f` over `items` on up to `workers` threads; results keep the order of `items`.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("slot lock").expect("every item mapped")).collect()
}

/// A file the caller writes next to `report.json`.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

pub struct SuiteOutput {
    pub report: SuiteReport,
    pub artifacts: Vec<Artifact>,
}

#[derive(Default)]
struct Part {
    records: Vec<Record>,
    details: Vec<Value>,
    artifacts: Vec<Artifact>,
}

impl Part {
    fn push(&mut self, id: String, params: &Value, measured: f64, budget: f64) {
        self.records.push(Record::new(id, params.clone(), measured, budget));
    }
}

fn assemble(command: Command, cfg: &RunConfig, parts: Vec<Result<Part, LabError>>) -> Result<SuiteOutput, LabError> {
    let mut all = Part::default();
    for p in parts {
        let p = p?;
        all.records.extend(p.records);
        all.details.extend(p.details);
        all.artifacts.extend(p.artifacts);
    }
    Ok(SuiteOutput { report: SuiteReport::new(command, cfg.clone(), all.records, all.details), artifacts: all.artifacts })
}

pub fn run(command: Command, cfg: &RunConfig, workers: usize) -> Result<SuiteOutput, LabError> {
    cfg.validate()?;
    match command {
        Command::Verify => verify(cfg, workers),
        Command::Spectrum => spectrum_suite(cfg, workers),
        Command::Evolve => evolve_suite(cfg, workers),
        Command::Stability => stability_suite(cfg, workers),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn count_mismatch(have: usize, want: usize) -> f64 {
    (have as f64 - want as f64).abs()
}

// ---------------------------------------------------------------------------------------------
// verify

const EXPANSION_SHAPES: [Shape; 3] = [Shape::Gaussian, Shape::ScalingBeta, Shape::Packet];

pub fn verify(cfg: &RunConfig, workers: usize) -> Result<SuiteOutput, LabError> {
    let pairs = cfg.pairs();
    let mut parts = parallel_map(&pairs, workers, |&(a, b)| verify_pair(cfg, a, b));
    parts.push(verify_solitons(cfg));
    assemble(Command::Verify, cfg, parts)
}

fn verify_solitons(cfg: &RunConfig) -> Result<Part, LabError> {
    let mut part = Part::default();
    for order in cfg.orders() {
        for &c in &cfg.speeds {
            let r = soliton_ode_residual(&SolitonParams::new(order, c)?, OdeLevel::High);
            let params = json!({ "order": order.n(), "c": c });
            part.push(format!("soliton_ode/n{}/c{c}", order.n()), &params, r.normalized(), cfg.soliton_tol);
        }
    }
    Ok(part)
}

fn quadrature_field(p: &BreatherParams, t: f64) -> Result<SampledField, LabError> {
    let w = Window::with_spacing(p.center(t), 40.0 / p.beta, 0.04 / p.alpha.max(p.beta).max(1.0))?;
    SampledField::breather(p, t, w, 4)
}

fn passing_variants(reports: &[ResidualReport], tol: f64) -> Vec<String> {
    reports.iter().filter(|r| r.passes(tol)).map(|r| r.variant.clone()).collect()
}

fn verify_pair(cfg: &RunConfig, a: f64, b: f64) -> Result<Part, LabError> {
    let mut part = Part::default();
    let orders = cfg.orders();
    let tag = format!("a{a}/b{b}");
    let itol = cfg.identity_tol;

    for &t in &cfg.times {
        for &order in &orders {
            let p = BreatherParams::centered(order, a, b)?;
            let params = json!({ "order": order.n(), "alpha": a, "beta": b, "t": t });
            let n = order.n();
            let r = breather_ode_residual(&p, t)?;
            part.push(format!("stationary/n{n}/{tag}/t{t}"), &params, r.normalized(), cfg.ode_tol);
            if n >= 5 {
                let r = evolution_identity_residual(&p, t)?;
                part.push(format!("evolution/n{n}/{tag}/t{t}"), &params, r.normalized(), itol);
            }
            match n {
                5 => {
                    let r = first_integral_residual(&p, t)?;
                    part.push(format!("first_integral/n5/{tag}/t{t}"), &params, r.normalized(), itol);
                    let r = tilde_t_residual(&p, t)?;
                    part.push(format!("tilde_t/n5/{tag}/t{t}"), &params, r.normalized(), itol);
                }
                7 => {
                    let reports =
                        run_variants(IdentityId::FirstIntegral(Order::Seven), &p, t, &first_integral_7_variants())?;
                    let passing = passing_variants(&reports, itol);
                    let vparams = json!({ "order": 7, "alpha": a, "beta": b, "t": t, "passing": passing });
                    part.push(format!("first_integral_readings/n7/{tag}/t{t}"), &vparams, count_mismatch(passing.len(), 1), 0.0);
                    let r = tilde_t_polynomial_residual(&p, t)?;
                    part.push(format!("tilde_t/n7/{tag}/t{t}"), &params, r.normalized(), itol);
                }
                9 => {
                    let r = first_integral_residual(&p, t)?;
                    part.push(format!("first_integral/n9/{tag}/t{t}"), &params, r.normalized(), itol);
                    let r = tilde_t_polynomial_residual(&p, t)?;
                    part.push(format!("tilde_t/n9/{tag}/t{t}"), &params, r.normalized(), itol);
                    let (printed, variants) = delta9_question(a, b)?;
                    let mut deltas: Vec<f64> = variants
                        .iter()
                        .flat_map(|v| &v.substitutions)
                        .filter_map(|s| match s {
                            mkdv_core::Substitution::Velocities(v) => Some(v.delta),
                            _ => None,
                        })
                        .collect();
                    deltas.push(printed.vel.delta);
                    let distinct = (0..deltas.len())
                        .all(|i| (i + 1..deltas.len()).all(|j| (deltas[i] - deltas[j]).abs() > 1e-9 * deltas[i].abs().max(1.0)));
                    // where two readings coincide the question cannot be told apart
                    if distinct {
                        let reports = run_variants(IdentityId::Evolution(Order::Nine), &printed, t, &variants)?;
                        let passing = passing_variants(&reports, itol);
                        let params = json!({ "order": 9, "alpha": a, "beta": b, "t": t, "passing": passing });
                        part.push(format!("delta9_readings/{tag}/t{t}"), &params, count_mismatch(passing.len(), 1), 0.0);
                    }
                }
                _ => {}
            }
        }
    }

    let params = json!({ "alpha": a, "beta": b, "t": 0.1 });
    let p5 = BreatherParams::centered(Order::Five, a, b)?;
    let f = quadrature_field(&p5, 0.1)?;
    part.push(format!("mass/{tag}"), &params, rel(mass(&f).value, breather_mass(b)), cfg.energy_tol);
    part.push(format!("energy/{tag}"), &params, rel(energy(&f)?.value, breather_energy(a, b)), cfg.energy_tol);
    for (order, kind) in [(Order::Five, Kind::E5), (Order::Seven, Kind::E7), (Order::Nine, Kind::E9)] {
        if !orders.contains(&order) {
            continue;
        }
        let n = order.n();
        let p = BreatherParams::centered(order, a, b)?;
        let params = json!({ "order": n, "alpha": a, "beta": b, "t": 0.1 });
        let exact = breather_higher_energy(order, a, b);
        let q = higher_energy(&quadrature_field(&p, 0.1)?, kind)?.value;
        part.push(format!("higher_energy/n{n}/{tag}"), &params, rel(q, exact), cfg.energy_tol);
        let w = Window::with_spacing(p.center(0.2), 40.0 / b, 0.02)?;
        let reduced = reduction_coefficient(order).expect("orders 5, 7, 9 reduce") * mass_flux_integral(&p, 0.2, w);
        let params = json!({ "order": n, "alpha": a, "beta": b, "t": 0.2 });
        part.push(format!("reduction/n{n}/{tag}"), &params, rel(reduced, exact), cfg.reduction_tol);
    }

    let p = BreatherParams::new(Order::Five, a, b, 0.2, 0.1)?;
    let w = Window::new(p.center(0.0), 40.0 / b, 4096)?;
    let fourier = Fourier::new(w);
    for shape in EXPANSION_SHAPES {
        let z = perturbation(&fourier, shape, &p, 0.0, cfg.seed, 1.0, 2)?;
        let r = |eps: f64| -> Result<f64, LabError> { Ok(expansion_remainder(&p, &z.scaled(eps), 0.0)?.remainder) };
        let eps = cfg.expansion_eps;
        let ratio = r(eps)? / r(0.5 * eps)?;
        let params = json!({ "alpha": a, "beta": b, "shape": shape.label(), "ratio": ratio });
        part.push(format!("expansion/{}/{tag}", shape.label()), &params, (ratio - 8.0).abs(), cfg.ratio_tol);
    }
    Ok(part)
}

// ---------------------------------------------------------------------------------------------
// spectrum

pub fn spectrum_suite(cfg: &RunConfig, workers: usize) -> Result<SuiteOutput, LabError> {
    let parts = parallel_map(&cfg.pairs(), workers, |&(a, b)| spectrum_pair(cfg, a, b));
    assemble(Command::Spectrum, cfg, parts)
}

fn spectrum_pair(cfg: &RunConfig, a: f64, b: f64) -> Result<Part, LabError> {
    let mut part = Part::default();
    let tag = format!("a{a}/b{b}");
    let params = json!({ "alpha": a, "beta": b, "n": cfg.spectral_n });
    let p = BreatherParams::centered(Order::Five, a, b)?;

    let coarse = spectral_window(&p, 0.0, cfg.spectral_n)?;
    let opr = build_operator(&p, 0.0, coarse)?;
    let s = spectrum(&opr)?;
    let sum = &s.summary;
    part.push(format!("negative_count/{tag}"), &params, count_mismatch(sum.negative_eigenvalues.len(), 1), 0.0);
    part.push(format!("kernel_dimension/{tag}"), &params, count_mismatch(sum.kernel_dimension(), 2), 0.0);
    part.push(format!("continuum_edge/{tag}"), &params, rel(sum.continuum_edge_estimate, sum.continuum_edge), cfg.edge_tol);

    let nu = |opr: &DiscreteOperator, s: &Spectrum| -> Result<f64, LabError> {
        let neg = s.negative_eigenvector().ok_or(LabError::Convergence {
            what: "negative eigenvector",
            iterations: 0,
            residual: s.values[0],
        })?;
        coercivity(opr, &directions(&p, 0.0, opr.op.window())?, &neg)
    };
    let nu0 = nu(&opr, &s)?;
    let fine = spectral_window(&p, 0.0, 2 * cfg.spectral_n)?;
    let opr_fine = build_operator(&p, 0.0, fine)?;
    let nu1 = nu(&opr_fine, &spectrum(&opr_fine)?)?;
    let nparams = json!({ "alpha": a, "beta": b, "n": cfg.spectral_n, "nu0": nu0, "nu0_refined": nu1 });
    part.push(format!("coercive/{tag}"), &nparams, -nu0, 0.0);
    part.push(format!("coercivity_spread/{tag}"), &nparams, (nu0 - nu1).abs(), cfg.coercivity_spread_tol);

    let w = Window::for_breather(&p, 0.0, 2048)?;
    let op = Linearized::new(&p, 0.0, w)?;
    let dirs = directions(&p, 0.0, w)?;
    let forms = scaling_forms(&op, &dirs);
    let fparams = json!({ "alpha": a, "beta": b, "n": 2048, "alpha_form": forms.alpha, "beta_form": forms.beta });
    part.push(format!("alpha_form/{tag}"), &fparams, rel(forms.alpha, forms.expected), cfg.form_tol);
    part.push(format!("beta_form/{tag}"), &fparams, rel(forms.beta, -forms.expected), cfg.form_tol);
    let r = b0_relations(&op, &dirs);
    let bparams = json!({ "alpha": a, "beta": b, "n": 2048, "mass": r.mass, "form": r.form });
    part.push(format!("b0_mass/{tag}"), &bparams, rel(r.mass, r.expected_mass), cfg.b0_tol);
    part.push(format!("b0_form/{tag}"), &bparams, rel(r.form, r.expected_form), cfg.b0_tol);
    part.push(format!("b0_residual/{tag}"), &bparams, r.residual, cfg.b0_tol);

    for &t in &cfg.times {
        let q = BreatherParams::new(Order::Five, a, b, 0.2, 0.5)?;
        let r = wronskian_check(&q, t, &Sampling::default().points(q.center(t), b));
        let params = json!({ "alpha": a, "beta": b, "t": t });
        part.push(format!("wronskian/{tag}/t{t}"), &params, r.normalized(), cfg.wronskian_tol);
    }

    part.details.push(serde_json::to_value(sum).expect("summary serializes"));
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(["index", "eigenvalue"]).map_err(csv_err)?;
    for (i, v) in s.values.iter().enumerate().take(16) {
        w.write_record([i.to_string(), fmt_f64(*v)]).map_err(csv_err)?;
    }
    part.artifacts.push(Artifact { name: format!("spectrum_a{a}_b{b}.csv"), contents: csv_string(w)? });
    Ok(part)
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String, LabError> {
    let bytes = w.into_inner().map_err(|e| LabError::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

// ---------------------------------------------------------------------------------------------
// evolve

#[derive(Clone, Copy, Debug)]
enum EvolveJob {
    Breather(Order),
    Soliton(Order),
}

const EVOLVED: [Order; 3] = [Order::Five, Order::Seven, Order::Nine];

fn h2_distance(a: &SampledField, b: &SampledField) -> f64 {
    let d: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
    Fourier::new(a.window).sobolev_sq(&d, 2).sqrt()
}

fn field_dump(name: String, snapshots: &[(f64, &SampledField)]) -> Result<Artifact, LabError> {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(["t", "x", "u"]).map_err(csv_err)?;
    for (t, f) in snapshots {
        for (x, u) in f.window.points().iter().zip(&f.values) {
            w.write_record([fmt_f64(*t), fmt_f64(*x), fmt_f64(*u)]).map_err(csv_err)?;
        }
    }
    Ok(Artifact { name, contents: csv_string(w)? })
}

fn window_json(w: Window) -> Value {
    json!({ "center": w.center, "half_width": w.half_width, "n": w.n })
}

pub fn evolve_suite(cfg: &RunConfig, workers: usize) -> Result<SuiteOutput, LabError> {
    let orders = cfg.orders();
    let jobs: Vec<EvolveJob> = EVOLVED
        .iter()
        .filter(|o| orders.contains(o))
        .flat_map(|&o| [EvolveJob::Breather(o), EvolveJob::Soliton(o)])
        .collect();
    let parts = parallel_map(&jobs, workers, |&job| match job {
        EvolveJob::Breather(o) => evolve_breather(cfg, o),
        EvolveJob::Soliton(o) => evolve_soliton(cfg, o),
    });
    assemble(Command::Evolve, cfg, parts)
}

fn drift_records(part: &mut Part, cfg: &RunConfig, prefix: &str, params: &Value, drifts: &[(Kind, f64)]) {
    for (k, d) in drifts {
        part.push(format!("{prefix}/drift_{k:?}"), params, *d, cfg.drift_tol);
    }
}

fn evolve_breather(cfg: &RunConfig, order: Order) -> Result<Part, LabError> {
    let mut part = Part::default();
    let n = order.n();
    let p = BreatherParams::new(order, cfg.evolve_alpha, cfg.evolve_beta, 0.3, -0.2)?;
    let t_end = 0.2 / p.c0();
    let ecfg = EvolutionConfig::for_breather(&p, cfg.evolve_n, cfg.evolve_dt(order), t_end)?;
    let u0 = SampledField::breather(&p, 0.0, ecfg.window, 0)?;
    let traj = evolve(&u0, ecfg, &default_monitors(order))?;
    let exact = SampledField::breather(&p, t_end, ecfg.window, 0)?;
    let params = json!({
        "order": n, "alpha": p.alpha, "beta": p.beta, "x1": p.x1, "x2": p.x2,
        "t_end": t_end, "dt": ecfg.h(), "window": window_json(ecfg.window), "warnings": traj.warnings,
    });
    let prefix = format!("breather/n{n}");
    part.push(format!("{prefix}/h2_error"), &params, h2_distance(traj.last(), &exact), cfg.fidelity_tol);
    part.push(format!("{prefix}/mass_drift"), &params, traj.drift(Kind::M).unwrap_or(f64::NAN), cfg.mass_drift_tol);
    drift_records(&mut part, cfg, &prefix, &params, &traj.drifts);
    let snaps: Vec<(f64, &SampledField)> = traj.snapshots.iter().map(|s| (s.t, &s.field)).collect();
    part.artifacts.push(field_dump(format!("breather_n{n}.csv"), &snaps)?);
    Ok(part)
}

fn evolve_soliton(cfg: &RunConfig, order: Order) -> Result<Part, LabError> {
    let mut part = Part::default();
    let n = order.n();
    let c = cfg.soliton_c;
    let p = SolitonParams::new(order, c)?;
    let t = cfg.soliton_t;
    let v = p.speed();
    let w = Window::new(0.0, cfg.soliton_half_width, cfg.soliton_n)?;
    let f = Fourier::new(w);
    let u0 = SampledField::soliton(&p, 0.0, w, 0)?;
    let traj = evolve(&u0, EvolutionConfig::new(order, w, cfg.soliton_dt, t), &default_monitors(order))?;
    // circular cross-correlation through the spectrum
    let (a, b) = (f.forward(&u0.values), f.forward(&traj.last().values));
    let prod: Vec<_> = a.iter().zip(&b).map(|(x, y)| x.conj() * y).collect();
    let corr = f.inverse_real(&prod);
    let peak = (0..w.n).max_by(|&i, &j| corr[i].total_cmp(&corr[j])).expect("non-empty grid");
    let shift = if peak > w.n / 2 { peak as f64 - w.n as f64 } else { peak as f64 } * w.dx();
    let params = json!({
        "order": n, "c": c, "t": t, "speed": v, "shift": shift, "window": window_json(w), "warnings": traj.warnings,
    });
    let prefix = format!("soliton/n{n}");
    part.push(format!("{prefix}/shift_cells"), &params, (shift - v * t).abs() / w.dx(), cfg.cell_tol);
    drift_records(&mut part, cfg, &prefix, &params, &traj.drifts);
    let snaps: Vec<(f64, &SampledField)> = traj.snapshots.iter().map(|s| (s.t, &s.field)).collect();
    part.artifacts.push(field_dump(format!("soliton_n{n}.csv"), &snaps)?);
    Ok(part)
}

// ---------------------------------------------------------------------------------------------
// stability

pub fn stability_config(cfg: &RunConfig) -> StabilityConfig {
    StabilityConfig {
        n: cfg.stability_n,
        dt: cfg.stability_dt,
        t_end: cfg.t_end,
        snapshot_dt: cfg.snapshot_dt,
        seed: cfg.seed,
        dealias_pad: None,
    }
}

pub fn stability_suite(cfg: &RunConfig, workers: usize) -> Result<SuiteOutput, LabError> {
    // the unperturbed control first, then one run per shape
    let mut jobs = vec![(Shape::Gaussian, 0.0)];
    if cfg.eta > 0.0 {
        jobs.extend(cfg.shapes.iter().map(|&s| (s, cfg.eta)));
    }
    let parts = parallel_map(&jobs, workers, |&(shape, eta)| stability_run(cfg, shape, eta));
    assemble(Command::Stability, cfg, parts)
}

fn stability_run(cfg: &RunConfig, shape: Shape, eta: f64) -> Result<Part, LabError> {
    let mut part = Part::default();
    let order = Order::new(cfg.stability_order)?;
    let p = BreatherParams::centered(order, cfg.stability_alpha, cfg.stability_beta)?;
    let r = stability_experiment(&p, eta, shape, &stability_config(cfg))?;
    let label = if eta == 0.0 { "control".to_string() } else { shape.label().to_string() };
    let params = json!({
        "order": order.n(), "alpha": p.alpha, "beta": p.beta, "shape": shape.label(), "eta": eta,
        "t_end": cfg.t_end, "warnings": r.warnings,
    });
    let prefix = format!("stability/{label}");
    if eta == 0.0 {
        part.push(format!("{prefix}/sup_distance"), &params, r.sup_distance, cfg.control_tol);
    } else {
        let budget = cfg.stability_factor * eta;
        part.push(format!("{prefix}/sup_distance"), &params, r.sup_distance, budget);
        part.push(format!("{prefix}/max_phase_rate"), &params, r.max_phase_rate, budget);
    }
    drift_records(&mut part, cfg, &prefix, &params, &r.drifts);
    part.artifacts.push(stability_json(&label, &r));
    part.artifacts.push(stability_csv(&label, &r)?);
    Ok(part)
}

fn stability_json(label: &str, r: &StabilityReport) -> Artifact {
    let mut s = String::new();
    write_json(&serde_json::to_value(r).expect("report serializes"), 0, &mut s);
    s.push('\n');
    Artifact { name: format!("stability_{label}.json"), contents: s }
}

fn stability_csv(label: &str, r: &StabilityReport) -> Result<Artifact, LabError> {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(["t", "distance", "x1", "x2"]).map_err(csv_err)?;
    for k in 0..r.times.len() {
        w.write_record([fmt_f64(r.times[k]), fmt_f64(r.distances[k]), fmt_f64(r.x1[k]), fmt_f64(r.x2[k])])
            .map_err(csv_err)?;
    }
    Ok(Artifact { name: format!("stability_{label}.csv"), contents: csv_string(w)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_keeps_order() {
        let items: Vec<u64> = (0..50).collect();
        for w in [1, 3, 8] {
            let out = parallel_map(&items, w, |&x| x * x);
            assert_eq!(out, items.iter().map(|x| x * x).collect::<Vec<_>>());
        }
        assert!(parallel_map(&[] as &[u8], 4, |&x| x).is_empty());
    }
}
