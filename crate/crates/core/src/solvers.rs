//! Proximal gradient, FISTA (Nesterov and Chambolle–Dossal momentum) and
//! V-FISTA, with the ε-solution stopping rule.

use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::avd::AvdConfig;
use crate::diagnostics::gradient_mapping;
use crate::error::{Error, Result};
use crate::problems::CompositeProblem;
use crate::vecgeo::Vector;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Algorithm {
    Pgm,
    FistaNesterov,
    /// `αₙ = n/(n+α)`
    FistaCd {
        alpha: f64,
    },
    /// Constant momentum.
    VFista {
        momentum: f64,
    },
}

impl Algorithm {
    pub fn label(&self) -> String {
        match self {
            Algorithm::Pgm => "pgm".into(),
            Algorithm::FistaNesterov => "fista_nesterov".into(),
            Algorithm::FistaCd { alpha } => format!("fista_cd(alpha={alpha})"),
            Algorithm::VFista { momentum } => format!("v_fista(momentum={momentum})"),
        }
    }

    pub fn cd_alpha(&self) -> Option<f64> {
        match self {
            Algorithm::FistaCd { alpha } => Some(*alpha),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub step: f64,
    pub max_iter: usize,
    /// `0` disables ε-stopping.
    pub epsilon: f64,
    pub record_stride: usize,
    /// Keep every iterate `x₀ … x_N` in the trace.
    pub store_iterates: bool,
}

impl SolverConfig {
    /// `s = 1/L`, no ε-stopping, every iterate recorded.
    pub fn new(algorithm: Algorithm, p: &CompositeProblem, max_iter: usize) -> Self {
        SolverConfig {
            algorithm,
            step: 1.0 / p.lipschitz(),
            max_iter,
            epsilon: 0.0,
            record_stride: 1,
            store_iterates: false,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn storing_iterates(mut self) -> Self {
        self.store_iterates = true;
        self
    }

    pub fn validate(&self, p: &CompositeProblem) -> Result<()> {
        let l = p.lipschitz();
        if !(self.step > 0.0) {
            return Err(Error::param("step", "must be positive"));
        }
        if l > 0.0 && self.step > (1.0 / l) * (1.0 + 1e-12) {
            return Err(Error::param(
                "step",
                format!("s = {} exceeds 1/L = {}", self.step, 1.0 / l),
            ));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be positive"));
        }
        if self.record_stride == 0 {
            return Err(Error::param("record_stride", "must be positive"));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::param("epsilon", "must be nonnegative"));
        }
        match self.algorithm {
            Algorithm::FistaCd { alpha } => {
                if !(alpha > 0.0) {
                    return Err(Error::param("alpha", "must be positive"));
                }
                if alpha < 3.0 {
                    warn!("alpha = {alpha} < 3: the convex-case guarantees do not apply");
                }
            }
            Algorithm::VFista { momentum } if !(momentum > 0.0 && momentum < 1.0) => {
                return Err(Error::param("momentum", "must lie in (0, 1)"));
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub n: usize,
    pub gap: Option<f64>,
    pub gmap_norm: f64,
    pub step_norm: f64,
    pub dist_star: Option<f64>,
    pub extras: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Budget,
    EpsilonSolution,
    RegionViolation,
    BlowUp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunConfig {
    Solver(SolverConfig),
    Avd(AvdConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub problem: String,
    pub config: RunConfig,
    pub records: Vec<IterateRecord>,
    pub final_x: Vector,
    pub terminated_by: Termination,
    /// `x₀ … x_N` when requested.
    pub iterates: Option<Vec<Vector>>,
}

impl Trace {
    pub fn series(&self, f: impl Fn(&IterateRecord) -> Option<f64>) -> Vec<(f64, f64)> {
        self.records
            .iter()
            .filter_map(|r| f(r).map(|v| (r.n as f64, v)))
            .collect()
    }

    pub fn gap_series(&self) -> Vec<(f64, f64)> {
        self.series(|r| r.gap)
    }

    pub fn step_series(&self) -> Vec<(f64, f64)> {
        self.series(|r| Some(r.step_norm))
    }

    pub fn extra_series(&self, key: &str) -> Vec<(f64, f64)> {
        self.series(|r| r.extras.get(key).copied())
    }

    pub fn last(&self) -> Option<&IterateRecord> {
        self.records.last()
    }

    /// Momentum schedule and step of the run, if it was a solver run.
    pub fn solver_config(&self) -> Option<&SolverConfig> {
        match &self.config {
            RunConfig::Solver(c) => Some(c),
            RunConfig::Avd(_) => None,
        }
    }
}

/// `αₙ` of the Nesterov rule: `t₀ = 1`, `α₀ = 0`, `α_{n+1} = (tₙ − 1)/t_{n+1}`.
pub fn nesterov_momentum(n: usize) -> f64 {
    let mut t = 1.0_f64;
    let mut a = 0.0;
    for _ in 0..n {
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        a = (t - 1.0) / t_next;
        t = t_next;
    }
    a
}

/// `n/(n+α)`
pub fn cd_momentum(n: usize, alpha: f64) -> f64 {
    n as f64 / (n as f64 + alpha)
}

/// `‖g(x)‖ <= ε`
pub fn epsilon_stop(p: &CompositeProblem, x: &Vector, epsilon: f64) -> bool {
    gradient_mapping(p, x).norm() <= epsilon
}

struct Momentum {
    algorithm: Algorithm,
    t: f64,
}

impl Momentum {
    fn new(algorithm: Algorithm) -> Self {
        Momentum { algorithm, t: 1.0 }
    }

    /// `αₙ`, called with n = 0, 1, 2, … in order.
    fn next(&mut self, n: usize) -> f64 {
        match self.algorithm {
            Algorithm::Pgm => 0.0,
            Algorithm::FistaCd { alpha } => cd_momentum(n, alpha),
            Algorithm::VFista { momentum } => {
                if n == 0 {
                    0.0
                } else {
                    momentum
                }
            }
            Algorithm::FistaNesterov => {
                if n == 0 {
                    return 0.0;
                }
                let t_next = (1.0 + (1.0 + 4.0 * self.t * self.t).sqrt()) / 2.0;
                let a = (self.t - 1.0) / t_next;
                self.t = t_next;
                a
            }
        }
    }
}

pub(crate) fn make_record(p: &CompositeProblem, n: usize, x: &Vector, step_norm: f64, length: f64) -> IterateRecord {
    let objective = p.objective(x);
    let mut extras = BTreeMap::new();
    extras.insert("objective".to_string(), objective);
    extras.insert("length".to_string(), length);
    IterateRecord {
        n,
        gap: p.f_star.map(|fs| objective - fs),
        gmap_norm: gradient_mapping(p, x).norm(),
        step_norm,
        dist_star: p.dist_star(x),
        extras,
    }
}

/// Forward–backward iterations `x_{n+1} = prox_{sh}(xₙ − s∇f(xₙ))`.
pub fn pgm_run(p: &CompositeProblem, cfg: &SolverConfig, x0: &Vector) -> Result<Trace> {
    if cfg.algorithm != Algorithm::Pgm {
        return Err(Error::param("algorithm", "pgm_run needs the PGM algorithm"));
    }
    run(p, cfg, x0)
}

/// `yₙ = xₙ + αₙ(xₙ − xₙ₋₁)`, `x_{n+1} = prox_{sh}(yₙ − s∇f(yₙ))` with `x₋₁ = x₀`.
pub fn fista_run(p: &CompositeProblem, cfg: &SolverConfig, x0: &Vector) -> Result<Trace> {
    run(p, cfg, x0)
}

/// Any of the supported schemes; PGM is the zero-momentum case.
pub fn run(p: &CompositeProblem, cfg: &SolverConfig, x0: &Vector) -> Result<Trace> {
    x0.check_dim(p.dim())?;
    cfg.validate(p)?;
    let s = cfg.step;
    let mut momentum = Momentum::new(cfg.algorithm);
    let mut iterates = cfg.store_iterates.then(|| vec![x0.clone()]);
    let mut x_prev = x0.clone();
    let mut x = x0.clone();
    let mut length = 0.0;
    let mut records = vec![make_record(p, 0, &x, 0.0, 0.0)];
    let mut terminated_by = Termination::Budget;

    if !p.in_certified_region(&x) {
        terminated_by = Termination::RegionViolation;
    } else if cfg.epsilon > 0.0 && records[0].gmap_norm <= cfg.epsilon {
        terminated_by = Termination::EpsilonSolution;
    }

    if terminated_by == Termination::Budget {
        for n in 0..cfg.max_iter {
            let a = momentum.next(n);
            let y = if a == 0.0 {
                x.clone()
            } else {
                x.axpy(a, &(&x - &x_prev))
            };
            if !p.in_certified_region(&y) {
                terminated_by = Termination::RegionViolation;
                break;
            }
            let x_new = p.forward_backward(s, &y);
            if !x_new.is_finite() {
                terminated_by = Termination::BlowUp;
                break;
            }
            if !p.in_certified_region(&x_new) {
                terminated_by = Termination::RegionViolation;
                break;
            }
            x_prev = std::mem::replace(&mut x, x_new);
            let step = x.dist(&x_prev);
            length += step;
            if let Some(it) = iterates.as_mut() {
                it.push(x.clone());
            }
            let k = n + 1;
            if k % cfg.record_stride == 0 || k == cfg.max_iter {
                let rec = make_record(p, k, &x, step, length);
                let done = cfg.epsilon > 0.0 && rec.gmap_norm <= cfg.epsilon;
                records.push(rec);
                if done {
                    terminated_by = Termination::EpsilonSolution;
                    break;
                }
            }
        }
    }

    Ok(Trace {
        problem: p.name.clone(),
        config: RunConfig::Solver(cfg.clone()),
        records,
        final_x: x,
        terminated_by,
        iterates,
    })
}
