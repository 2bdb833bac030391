//! Flat run configuration. Every key has a default; a config file only names what it changes.

use mkdv_core::Order;
use serde::{Deserialize, Serialize};

use crate::perturb::Shape;
use crate::LabError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Verify,
    Spectrum,
    Evolve,
    Stability,
}

impl Command {
    pub fn label(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Spectrum => "spectrum",
            Command::Evolve => "evolve",
            Command::Stability => "stability",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // sweep
    pub orders: Vec<u32>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub times: Vec<f64>,
    pub speeds: Vec<f64>,
    pub seed: u64,

    // verify budgets
    pub ode_tol: f64,
    pub soliton_tol: f64,
    pub energy_tol: f64,
    pub reduction_tol: f64,
    pub identity_tol: f64,
    /// Allowed distance of the expansion's Richardson ratio from 8.
    pub ratio_tol: f64,
    /// `H^2` size of the larger perturbation in the expansion check; the smaller is half.
    pub expansion_eps: f64,

    // spectrum
    pub spectral_n: usize,
    pub edge_tol: f64,
    pub form_tol: f64,
    pub b0_tol: f64,
    pub wronskian_tol: f64,
    pub coercivity_spread_tol: f64,

    // evolve
    pub evolve_n: usize,
    pub evolve_dt_5: f64,
    pub evolve_dt_7: f64,
    pub evolve_dt_9: f64,
    pub evolve_alpha: f64,
    pub evolve_beta: f64,
    pub soliton_c: f64,
    pub soliton_t: f64,
    pub soliton_n: usize,
    pub soliton_half_width: f64,
    pub soliton_dt: f64,
    pub fidelity_tol: f64,
    pub mass_drift_tol: f64,
    pub drift_tol: f64,
    /// Soliton displacement error in grid cells.
    pub cell_tol: f64,

    // stability
    pub stability_order: u32,
    pub stability_alpha: f64,
    pub stability_beta: f64,
    pub eta: f64,
    pub shapes: Vec<Shape>,
    pub stability_n: usize,
    pub stability_dt: f64,
    pub t_end: f64,
    pub snapshot_dt: f64,
    /// Budget for distance and phase rate is `stability_factor * eta`.
    pub stability_factor: f64,
    pub control_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            orders: vec![3, 5, 7, 9, 11],
            alphas: vec![0.5, 1.0, 2.0],
            betas: vec![0.5, 1.0, 2.0],
            times: vec![0.0, 0.37, 1.1],
            speeds: vec![0.25, 1.0, 4.0],
            seed: 0,
            ode_tol: 1e-8,
            soliton_tol: 1e-9,
            energy_tol: 1e-8,
            reduction_tol: 1e-7,
            identity_tol: 1e-7,
            ratio_tol: 0.4,
            expansion_eps: 0.01,
            spectral_n: 512,
            edge_tol: 0.02,
            form_tol: 1e-4,
            b0_tol: 1e-4,
            wronskian_tol: 1e-8,
            coercivity_spread_tol: 1e-5,
            evolve_n: 2048,
            evolve_dt_5: 1e-3,
            evolve_dt_7: 2.5e-4,
            evolve_dt_9: 2.5e-3,
            evolve_alpha: 1.0,
            evolve_beta: 1.0,
            soliton_c: 1.2,
            soliton_t: 0.5,
            soliton_n: 1024,
            soliton_half_width: 32.0,
            soliton_dt: 5e-3,
            fidelity_tol: 1e-5,
            mass_drift_tol: 1e-8,
            drift_tol: 1e-7,
            cell_tol: 1.0,
            stability_order: 5,
            stability_alpha: 1.0,
            stability_beta: 1.0,
            eta: 1e-2,
            shapes: vec![Shape::Gaussian, Shape::Kernel, Shape::ScalingBeta],
            stability_n: 2048,
            stability_dt: 2e-3,
            t_end: 5.0,
            snapshot_dt: 0.05,
            stability_factor: 10.0,
            control_tol: 1e-5,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, LabError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    pub fn orders(&self) -> Vec<Order> {
        self.orders.iter().map(|&n| Order::new(n).expect("validated")).collect()
    }

    /// `(alpha, beta)` pairs in sweep order.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.alphas.iter().flat_map(|&a| self.betas.iter().map(move |&b| (a, b))).collect()
    }

    pub fn evolve_dt(&self, order: Order) -> f64 {
        match order.n() {
            5 => self.evolve_dt_5,
            7 => self.evolve_dt_7,
            _ => self.evolve_dt_9,
        }
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |m: String| Err(LabError::Config(m));
        for (name, empty) in [
            ("orders", self.orders.is_empty()),
            ("alphas", self.alphas.is_empty()),
            ("betas", self.betas.is_empty()),
            ("times", self.times.is_empty()),
            ("speeds", self.speeds.is_empty()),
            ("shapes", self.shapes.is_empty()),
        ] {
            if empty {
                return bad(format!("{name} must not be empty"));
            }
        }
        for &n in self.orders.iter().chain([&self.stability_order]) {
            Order::new(n).map_err(|e| LabError::Config(e.to_string()))?;
        }
        if !matches!(self.stability_order, 5 | 7 | 9) {
            return bad(format!("stability_order {} is not evolved", self.stability_order));
        }
        let scalars = [
            self.evolve_alpha,
            self.evolve_beta,
            self.soliton_c,
            self.stability_alpha,
            self.stability_beta,
            self.evolve_dt_5,
            self.evolve_dt_7,
            self.evolve_dt_9,
            self.stability_dt,
            self.snapshot_dt,
            self.soliton_dt,
            self.soliton_half_width,
            self.expansion_eps,
        ];
        let positive = self.alphas.iter().chain(&self.betas).chain(&self.speeds).chain(&scalars);
        for &v in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{v} must be positive and finite"));
            }
        }
        if self.times.iter().chain(&[self.soliton_t, self.t_end]).any(|t| !t.is_finite()) {
            return bad("times must be finite".into());
        }
        // zero is allowed: an impossible budget that every check fails
        for (name, v) in self.budgets() {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be finite and non-negative"));
            }
        }
        if !(0.0..=0.1).contains(&self.eta) {
            return bad(format!("eta = {} outside [0, 0.1]", self.eta));
        }
        for (name, n) in [("spectral_n", self.spectral_n), ("evolve_n", self.evolve_n), ("soliton_n", self.soliton_n), ("stability_n", self.stability_n)] {
            if n < 16 || !n.is_power_of_two() {
                return bad(format!("{name} = {n} must be a power of two, at least 16"));
            }
        }
        Ok(())
    }

    fn budgets(&self) -> [(&'static str, f64); 17] {
        [
            ("ode_tol", self.ode_tol),
            ("soliton_tol", self.soliton_tol),
            ("energy_tol", self.energy_tol),
            ("reduction_tol", self.reduction_tol),
            ("identity_tol", self.identity_tol),
            ("ratio_tol", self.ratio_tol),
            ("edge_tol", self.edge_tol),
            ("form_tol", self.form_tol),
            ("b0_tol", self.b0_tol),
            ("wronskian_tol", self.wronskian_tol),
            ("coercivity_spread_tol", self.coercivity_spread_tol),
            ("fidelity_tol", self.fidelity_tol),
            ("mass_drift_tol", self.mass_drift_tol),
            ("drift_tol", self.drift_tol),
            ("cell_tol", self.cell_tol),
            ("stability_factor", self.stability_factor),
            ("control_tol", self.control_tol),
        ]
    }

    /// Every budget set to zero.
    pub fn impossible(mut self) -> Self {
        self.ode_tol = 0.0;
        self.soliton_tol = 0.0;
        self.energy_tol = 0.0;
        self.reduction_tol = 0.0;
        self.identity_tol = 0.0;
        self.ratio_tol = 0.0;
        self.edge_tol = 0.0;
        self.form_tol = 0.0;
        self.b0_tol = 0.0;
        self.wronskian_tol = 0.0;
        self.coercivity_spread_tol = 0.0;
        self.fidelity_tol = 0.0;
        self.mass_drift_tol = 0.0;
        self.drift_tol = 0.0;
        self.cell_tol = 0.0;
        self.stability_factor = 0.0;
        self.control_tol = 0.0;
        self
    }
}
