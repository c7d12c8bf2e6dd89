//! Fixed-step RK4 integration of `ẍ + (α/t)ẋ + ∇F(x) = 0`, its Lyapunov
//! energy with the moving projection `x*(t)`, and trajectory length.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::CompositeProblem;
use crate::solvers::{IterateRecord, RunConfig, Termination, Trace};
use crate::vecgeo::{ConvexSet, Vector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvdState {
    pub t: f64,
    pub x: Vector,
    pub v: Vector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvdConfig {
    pub alpha: f64,
    pub t0: f64,
    pub dt: f64,
    pub t_end: f64,
    /// In integration steps.
    pub record_stride: usize,
}

impl AvdConfig {
    /// `t₀ = 1` and `dt = 10⁻³·min(1, 1/√L)`.
    pub fn new(alpha: f64, t_end: f64, p: &CompositeProblem) -> Self {
        let l = p.lipschitz();
        let scale = if l > 1.0 { 1.0 / l.sqrt() } else { 1.0 };
        AvdConfig {
            alpha,
            t0: 1.0,
            dt: 1e-3 * scale,
            t_end,
            record_stride: 1,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    /// Number of steps; `dt` is adjusted so the last one lands on `t_end`.
    pub fn steps(&self) -> usize {
        (((self.t_end - self.t0) / self.dt).round() as usize).max(1)
    }

    pub fn effective_dt(&self) -> f64 {
        (self.t_end - self.t0) / self.steps() as f64
    }

    pub fn validate(&self, p: &CompositeProblem) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::param("alpha", "must be positive"));
        }
        if !(self.t0 > 0.0) {
            return Err(Error::param("t0", "must be positive"));
        }
        if !(self.t_end > self.t0) {
            return Err(Error::param("t_end", "must exceed t0"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::param("dt", "must be positive"));
        }
        let l = p.lipschitz();
        if l > 0.0 && self.dt > 0.1 / l.sqrt() {
            return Err(Error::param(
                "dt",
                format!(
                    "dt = {} exceeds the stability limit 0.1/sqrt(L) = {}",
                    self.dt,
                    0.1 / l.sqrt()
                ),
            ));
        }
        if self.record_stride == 0 {
            return Err(Error::param("record_stride", "must be positive"));
        }
        Ok(())
    }
}

/// `t²(F(x) − F*) + ½‖λ(x − x*(t)) + t·v‖² + (ξ/2)‖x − x*(t)‖²`, `x*(t) = P_{X*}(x)`.
pub fn energy_continuous(p: &CompositeProblem, state: &AvdState, lambda: f64, xi: f64) -> Result<f64> {
    let set = p.solution_set.as_ref().ok_or(Error::MissingField("solution set"))?;
    let f_star = p.f_star.ok_or(Error::MissingField("F*"))?;
    state.x.check_dim(p.dim())?;
    state.v.check_dim(p.dim())?;
    let r = &state.x - &set.project_unchecked(&state.x);
    let t = state.t;
    let mix = r.scaled(lambda).axpy(t, &state.v);
    Ok(t * t * (p.objective(&state.x) - f_star) + 0.5 * mix.norm_sq() + 0.5 * xi * r.norm_sq())
}

fn accel(p: &CompositeProblem, alpha: f64, t: f64, x: &Vector, v: &Vector) -> Vector {
    p.grad_f(x).scaled(-1.0).axpy(-alpha / t, v)
}

fn rk4_step(p: &CompositeProblem, alpha: f64, s: &AvdState, dt: f64) -> AvdState {
    let (t, x, v) = (s.t, &s.x, &s.v);
    let h2 = 0.5 * dt;
    let k1x = v.clone();
    let k1v = accel(p, alpha, t, x, v);
    let x2 = x.axpy(h2, &k1x);
    let v2 = v.axpy(h2, &k1v);
    let k2v = accel(p, alpha, t + h2, &x2, &v2);
    let x3 = x.axpy(h2, &v2);
    let v3 = v.axpy(h2, &k2v);
    let k3v = accel(p, alpha, t + h2, &x3, &v3);
    let x4 = x.axpy(dt, &v3);
    let v4 = v.axpy(dt, &k3v);
    let k4v = accel(p, alpha, t + dt, &x4, &v4);
    let dx = k1x.axpy(2.0, &v2).axpy(2.0, &v3).axpy(1.0, &v4);
    let dv = k1v.axpy(2.0, &k2v).axpy(2.0, &k3v).axpy(1.0, &k4v);
    AvdState {
        t: t + dt,
        x: x.axpy(dt / 6.0, &dx),
        v: v.axpy(dt / 6.0, &dv),
    }
}

fn avd_record(p: &CompositeProblem, alpha: f64, n: usize, s: &AvdState, length: f64) -> IterateRecord {
    let objective = p.objective(&s.x);
    let mut extras = BTreeMap::new();
    extras.insert("t".to_string(), s.t);
    extras.insert("objective".to_string(), objective);
    extras.insert("length".to_string(), length);
    if let Ok(e) = energy_continuous(p, s, alpha - 1.0, 0.0) {
        extras.insert("energy".to_string(), e);
    }
    IterateRecord {
        n,
        gap: p.f_star.map(|fs| objective - fs),
        gmap_norm: p.grad_f(&s.x).norm(),
        step_norm: s.v.norm(),
        dist_star: p.dist_star(&s.x),
        extras,
    }
}

/// Integrate from `(t₀, x0, v0)` to `t_end`. Records carry `‖v‖` as the step
/// norm, `‖∇F‖` as the gradient-mapping norm, and `t`, `energy` (λ = α−1,
/// ξ = 0) and the trapezoidal length `∫‖v‖` as extras.
pub fn avd_integrate(p: &CompositeProblem, cfg: &AvdConfig, x0: &Vector, v0: &Vector) -> Result<Trace> {
    if !p.h.is_zero() {
        return Err(Error::Unsupported(
            "the AVD dynamic needs a differentiable objective (h = 0)".into(),
        ));
    }
    x0.check_dim(p.dim())?;
    v0.check_dim(p.dim())?;
    cfg.validate(p)?;
    let steps = cfg.steps();
    let dt = cfg.effective_dt();
    let limit = 1e6 * (1.0 + x0.norm());
    let mut state = AvdState {
        t: cfg.t0,
        x: x0.clone(),
        v: v0.clone(),
    };
    let mut length = 0.0;
    let mut records = vec![avd_record(p, cfg.alpha, 0, &state, 0.0)];
    let mut terminated_by = Termination::Budget;
    if !p.in_certified_region(&state.x) {
        terminated_by = Termination::RegionViolation;
    } else {
        for k in 1..=steps {
            let speed = state.v.norm();
            let mut next = rk4_step(p, cfg.alpha, &state, dt);
            next.t = if k == steps { cfg.t_end } else { cfg.t0 + k as f64 * dt };
            if !next.x.is_finite() || !next.v.is_finite() || next.x.norm() > limit {
                terminated_by = Termination::BlowUp;
                break;
            }
            if !p.in_certified_region(&next.x) {
                terminated_by = Termination::RegionViolation;
                break;
            }
            length += 0.5 * dt * (speed + next.v.norm());
            state = next;
            if k % cfg.record_stride == 0 || k == steps {
                records.push(avd_record(p, cfg.alpha, k, &state, length));
            }
        }
    }
    Ok(Trace {
        problem: p.name.clone(),
        config: RunConfig::Avd(cfg.clone()),
        records,
        final_x: state.x,
        terminated_by,
        iterates: None,
    })
}

/// Gap at `t_end` with `dt` and `dt/2`, and their absolute difference.
pub fn step_doubling(p: &CompositeProblem, cfg: &AvdConfig, x0: &Vector, v0: &Vector) -> Result<(Trace, Trace, f64)> {
    let coarse = avd_integrate(p, cfg, x0, v0)?;
    let mut fine_cfg = cfg.clone();
    fine_cfg.dt = cfg.effective_dt() / 2.0;
    fine_cfg.record_stride = cfg.record_stride * 2;
    let fine = avd_integrate(p, &fine_cfg, x0, v0)?;
    let last = |t: &Trace| t.last().and_then(|r| r.gap).ok_or(Error::MissingField("F*"));
    let diff = (last(&coarse)? - last(&fine)?).abs();
    Ok((coarse, fine, diff))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionalReport {
    pub h: Vec<f64>,
    /// `(P(x + h·d) − P(x))/h`
    pub quotients: Vec<Vector>,
    /// `⟨x − P(x), q_h⟩`
    pub orthogonality: Vec<f64>,
    /// `⟨d, q_h⟩`
    pub monotonicity: Vec<f64>,
    /// The two smallest-`h` quotients differ by more than 10% relative.
    pub nonsmooth: bool,
}

/// Finite-difference directional derivative of the projection onto `s` at `x` along `d`.
pub fn directional_projection_checks(
    s: &ConvexSet,
    x: &Vector,
    d: &Vector,
    h_list: &[f64],
) -> Result<DirectionalReport> {
    if h_list.len() < 2 {
        return Err(Error::param("h_list", "needs at least two step sizes"));
    }
    if h_list.iter().any(|h| !(*h > 0.0)) || h_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("h_list", "must be positive and strictly decreasing"));
    }
    d.check_dim(s.dim())?;
    let px = s.project(x)?;
    let r = x - &px;
    let quotients: Vec<Vector> = h_list
        .iter()
        .map(|&h| (&s.project_unchecked(&x.axpy(h, d)) - &px).scaled(1.0 / h))
        .collect();
    let k = quotients.len();
    let (a, b) = (&quotients[k - 2], &quotients[k - 1]);
    let nonsmooth = a.dist(b) > 0.1 * a.norm().max(b.norm()).max(1e-300);
    Ok(DirectionalReport {
        h: h_list.to_vec(),
        orthogonality: quotients.iter().map(|q| r.dot(q)).collect(),
        monotonicity: quotients.iter().map(|q| d.dot(q)).collect(),
        quotients,
        nonsmooth,
    })
}
