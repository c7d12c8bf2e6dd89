//! Sequence quantities along stored iterates, the discrete Lyapunov energies,
//! the composite gradient mapping, and numeric verifiers for the identities
//! and per-iteration inequalities of the FISTA analysis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{CompositeProblem, GrowthKind};
use crate::solvers::Trace;
use crate::vecgeo::{ConvexSet, Vector};

/// Relative tolerance for algebraic identities.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Relative tolerance for the descent lemma and its companion.
pub const DESCENT_TOL: f64 = 1e-9;
/// Relative tolerance for the assembled inequalities.
pub const INEQUALITY_TOL: f64 = 1e-8;

/// `L(x − prox_{h/L}(x − ∇f(x)/L))`
pub fn gradient_mapping(p: &CompositeProblem, x: &Vector) -> Vector {
    let l = p.lipschitz();
    if l <= 0.0 {
        return p.grad_f(x);
    }
    (x - &p.forward_backward(1.0 / l, x)).scaled(l)
}

/// `(F(x) − F*) − ‖g(x)‖²/(2L)`, nonnegative for a correct `L`.
pub fn control1_check(p: &CompositeProblem, x: &Vector) -> Result<f64> {
    let f_star = p.f_star.ok_or(Error::MissingField("F*"))?;
    x.check_dim(p.dim())?;
    let g = gradient_mapping(p, x);
    let l = p.lipschitz();
    let penalty = if l > 0.0 { g.norm_sq() / (2.0 * l) } else { 0.0 };
    Ok(p.objective(x) - f_star - penalty)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifierReport {
    pub name: String,
    /// Inclusive range of `n` that was checked.
    pub range: (usize, usize),
    pub checked: usize,
    /// Largest `(LHS − RHS)/(1 + max(|LHS|, |RHS|))`; for identities the absolute value.
    pub worst_violation: f64,
    pub worst_n: Option<usize>,
    pub tolerance: f64,
    pub pass: bool,
}

pub(crate) struct Checker {
    name: String,
    tolerance: f64,
    worst: f64,
    worst_n: Option<usize>,
    lo: usize,
    hi: usize,
    checked: usize,
}

impl Checker {
    pub(crate) fn new(name: impl Into<String>, tolerance: f64) -> Self {
        Checker {
            name: name.into(),
            tolerance,
            worst: f64::NEG_INFINITY,
            worst_n: None,
            lo: usize::MAX,
            hi: 0,
            checked: 0,
        }
    }

    fn push(&mut self, n: usize, violation: f64) {
        self.lo = self.lo.min(n);
        self.hi = self.hi.max(n);
        self.checked += 1;
        if violation > self.worst || violation.is_nan() {
            self.worst = if violation.is_nan() { f64::INFINITY } else { violation };
            self.worst_n = Some(n);
        }
    }

    /// `lhs <= rhs`
    pub(crate) fn le(&mut self, n: usize, lhs: f64, rhs: f64) {
        let scale = 1.0 + lhs.abs().max(rhs.abs());
        self.push(n, (lhs - rhs) / scale);
    }

    /// `lhs == rhs`
    pub(crate) fn eq(&mut self, n: usize, lhs: f64, rhs: f64) {
        let scale = 1.0 + lhs.abs().max(rhs.abs());
        self.push(n, (lhs - rhs).abs() / scale);
    }

    pub(crate) fn finish(self) -> VerifierReport {
        let worst = if self.checked == 0 { 0.0 } else { self.worst };
        VerifierReport {
            name: self.name,
            range: if self.checked == 0 { (0, 0) } else { (self.lo, self.hi) },
            checked: self.checked,
            worst_violation: worst,
            worst_n: self.worst_n,
            tolerance: self.tolerance,
            pass: worst <= self.tolerance,
        }
    }
}

/// Per-index quantities along `x₀ … x_N`. Index `n` of every array refers to
/// `xₙ`; entries that need `xₙ₋₁` are zero at `n = 0` (`x₋₁ = x₀`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeqQuantities {
    pub lipschitz: f64,
    pub iterates: Vec<Vector>,
    pub projections: Vec<Vector>,
    /// `(2/L)(F(xₙ) − F*)`
    pub w: Vec<f64>,
    /// `‖xₙ − xₙ*‖²`
    pub h: Vec<f64>,
    /// `‖xₙ − xₙ₋₁‖²`
    pub delta: Vec<f64>,
    /// `‖xₙ* − xₙ₋₁*‖²`
    pub gamma_star: Vec<f64>,
    /// `⟨xₙ − xₙ*, xₙ − xₙ₋₁⟩`
    pub cross_step: Vec<f64>,
    /// `⟨xₙ₋₁ − xₙ₋₁*, xₙ − xₙ₋₁⟩`
    pub cross_prev_step: Vec<f64>,
    /// `⟨xₙ − xₙ*, xₙ* − xₙ₋₁*⟩`, nonnegative
    pub proj_fwd: Vec<f64>,
    /// `⟨xₙ₋₁ − xₙ₋₁*, xₙ* − xₙ₋₁*⟩`, nonpositive
    pub proj_back: Vec<f64>,
    /// Step used by the run, when known.
    pub step: Option<f64>,
    /// `μ/L` under a global quadratic growth certificate.
    pub kappa: Option<f64>,
}

impl SeqQuantities {
    /// From raw iterates, the minimizer set and `F(xₙ) − F*`.
    pub fn from_parts(iterates: Vec<Vector>, set: &ConvexSet, gaps: &[f64], lipschitz: f64) -> Result<Self> {
        if iterates.is_empty() {
            return Err(Error::param("iterates", "need at least one iterate"));
        }
        if gaps.len() != iterates.len() {
            return Err(Error::DimensionMismatch {
                expected: iterates.len(),
                found: gaps.len(),
            });
        }
        if !(lipschitz > 0.0) {
            return Err(Error::param("L", "must be positive"));
        }
        for x in &iterates {
            x.check_dim(set.dim())?;
        }
        let projections: Vec<Vector> = iterates.iter().map(|x| set.project_unchecked(x)).collect();
        let n_total = iterates.len();
        let mut q = SeqQuantities {
            lipschitz,
            w: gaps.iter().map(|g| 2.0 * g / lipschitz).collect(),
            h: Vec::with_capacity(n_total),
            delta: Vec::with_capacity(n_total),
            gamma_star: Vec::with_capacity(n_total),
            cross_step: Vec::with_capacity(n_total),
            cross_prev_step: Vec::with_capacity(n_total),
            proj_fwd: Vec::with_capacity(n_total),
            proj_back: Vec::with_capacity(n_total),
            step: None,
            kappa: None,
            iterates: Vec::new(),
            projections: Vec::new(),
        };
        for n in 0..n_total {
            let x = &iterates[n];
            let xs = &projections[n];
            let r = x - xs;
            q.h.push(r.norm_sq());
            if n == 0 {
                q.delta.push(0.0);
                q.gamma_star.push(0.0);
                q.cross_step.push(0.0);
                q.cross_prev_step.push(0.0);
                q.proj_fwd.push(0.0);
                q.proj_back.push(0.0);
                continue;
            }
            let d = x - &iterates[n - 1];
            let ds = xs - &projections[n - 1];
            let r_prev = &iterates[n - 1] - &projections[n - 1];
            q.delta.push(d.norm_sq());
            q.gamma_star.push(ds.norm_sq());
            q.cross_step.push(r.dot(&d));
            q.cross_prev_step.push(r_prev.dot(&d));
            q.proj_fwd.push(r.dot(&ds));
            q.proj_back.push(r_prev.dot(&ds));
        }
        q.iterates = iterates;
        q.projections = projections;
        Ok(q)
    }

    /// Index of the last iterate.
    pub fn last(&self) -> usize {
        self.iterates.len() - 1
    }

    fn residual(&self, n: usize) -> Vector {
        &self.iterates[n] - &self.projections[n]
    }

    fn step_vec(&self, n: usize) -> Vector {
        if n == 0 {
            Vector::zeros(self.iterates[0].dim())
        } else {
            &self.iterates[n] - &self.iterates[n - 1]
        }
    }

    /// `‖λ(xₙ₋₁ − xₙ₋₁*) + n(xₙ − xₙ₋₁)‖²`, `n >= 1`.
    pub fn b_e(&self, n: usize, lambda: f64) -> f64 {
        self.residual(n - 1)
            .scaled(lambda)
            .axpy(n as f64, &self.step_vec(n))
            .norm_sq()
    }

    /// `‖λ(xₙ − xₙ*) + nαₙ(xₙ − xₙ₋₁)‖²`
    pub fn b_flat(&self, n: usize, alpha: f64, lambda: f64) -> f64 {
        let nf = n as f64;
        let an = nf / (nf + alpha);
        self.residual(n)
            .scaled(lambda)
            .axpy(nf * an, &self.step_vec(n))
            .norm_sq()
    }

    fn require_step(&self) -> Result<()> {
        if let Some(s) = self.step {
            if (s * self.lipschitz - 1.0).abs() > 1e-12 {
                return Err(Error::param(
                    "step",
                    format!("inequality lemmas need s = 1/L, got s·L = {}", s * self.lipschitz),
                ));
            }
        }
        Ok(())
    }
}

/// Quantities for a trace that stored its iterates.
pub fn compute_seq_quantities(trace: &Trace, p: &CompositeProblem) -> Result<SeqQuantities> {
    let set = p.solution_set.as_ref().ok_or(Error::MissingField("solution set"))?;
    let f_star = p.f_star.ok_or(Error::MissingField("F*"))?;
    let iterates = trace.iterates.clone().ok_or(Error::MissingField("stored iterates"))?;
    let gaps: Vec<f64> = iterates.iter().map(|x| p.objective(x) - f_star).collect();
    let mut q = SeqQuantities::from_parts(iterates, set, &gaps, p.lipschitz())?;
    q.step = trace.solver_config().map(|c| c.step);
    if let (GrowthKind::Quadratic { mu }, true) = (p.growth.kind, p.growth.is_global()) {
        q.kappa = Some(mu / p.lipschitz());
    }
    Ok(q)
}

fn alpha_n(n: usize, alpha: f64) -> f64 {
    n as f64 / (n as f64 + alpha)
}

/// Both equalities relating the cross terms to `h`, `δ` and `γ*`.
pub fn verify_lemma_tech1(q: &SeqQuantities) -> VerifierReport {
    let mut c = Checker::new("lemma_tech1", IDENTITY_TOL);
    for n in 1..=q.last() {
        let rhs1 = 0.5 * (q.h[n] - q.h[n - 1] + q.delta[n] - q.gamma_star[n]) + q.proj_back[n];
        c.eq(n, q.cross_step[n], rhs1);
        let rhs2 = 0.5 * (q.h[n] - q.h[n - 1] - q.delta[n] + q.gamma_star[n]) + q.proj_fwd[n];
        c.eq(n, q.cross_prev_step[n], rhs2);
    }
    c.finish()
}

/// `w_{n+1} − wₙ <= αₙ²δₙ − δ_{n+1}`
pub fn verify_descent_lemma(q: &SeqQuantities, alpha: f64) -> Result<VerifierReport> {
    q.require_step()?;
    let mut c = Checker::new("descent_lemma", DESCENT_TOL);
    for n in 1..q.last() {
        let an = alpha_n(n, alpha);
        c.le(n, q.w[n + 1] - q.w[n], an * an * q.delta[n] - q.delta[n + 1]);
    }
    Ok(c.finish())
}

/// Right-hand side of the second claim of the two-step FISTA lemma at `n`.
pub fn tech2_claim2_rhs(q: &SeqQuantities, n: usize, alpha: f64) -> f64 {
    let an = alpha_n(n, alpha);
    (1.0 + an) * q.h[n] + (an * an + an) * q.delta[n]
        - an * q.h[n - 1]
        - q.h[n + 1]
        - q.gamma_star[n + 1]
        - an * q.gamma_star[n]
        + 2.0 * an * q.proj_back[n]
        - 2.0 * q.proj_fwd[n + 1]
}

pub fn verify_lemma_tech2_claim2(q: &SeqQuantities, alpha: f64) -> Result<VerifierReport> {
    q.require_step()?;
    let mut c = Checker::new("lemma_tech2_claim2", DESCENT_TOL);
    for n in 1..q.last() {
        c.le(n, q.w[n + 1], tech2_claim2_rhs(q, n, alpha));
    }
    Ok(c.finish())
}

/// `Eₙ = n²wₙ + λ²hₙ₋₁ + n²δₙ + 2λn⟨xₙ₋₁ − xₙ₋₁*, xₙ − xₙ₋₁⟩` with `λ = 2α/3`, `n >= 1`.
pub fn energy_e(q: &SeqQuantities, n: usize, alpha: f64) -> f64 {
    energy_e_lambda(q, n, 2.0 * alpha / 3.0)
}

fn energy_e_lambda(q: &SeqQuantities, n: usize, lambda: f64) -> f64 {
    let nf = n as f64;
    nf * nf * q.w[n] + lambda * lambda * q.h[n - 1] + nf * nf * q.delta[n] + 2.0 * lambda * nf * q.cross_prev_step[n]
}

/// The three expressions of `Eₙ` agree: the squared-norm form, the expanded
/// form, and the rewrite through the second equality of the projection lemma.
pub fn verify_energy_forms(q: &SeqQuantities, alpha: f64) -> VerifierReport {
    let lambda = 2.0 * alpha / 3.0;
    let mut c = Checker::new("energy_forms", IDENTITY_TOL);
    for n in 1..=q.last() {
        let nf = n as f64;
        let expanded = energy_e_lambda(q, n, lambda);
        let norm_form = nf * nf * q.w[n] + q.b_e(n, lambda);
        let rewritten = nf * nf * q.w[n]
            + lambda * nf * q.h[n]
            + (lambda * lambda - lambda * nf) * q.h[n - 1]
            + (nf * nf - lambda * nf) * q.delta[n]
            + lambda * nf * q.gamma_star[n]
            + 2.0 * lambda * nf * q.proj_fwd[n];
        c.eq(n, norm_form, expanded);
        c.eq(n, norm_form, rewritten);
    }
    c.finish()
}

/// Expansion of `b_n` (the flat-case variant) in terms of `h`, `δ`, `γ*` and
/// the backward projection cross term.
pub fn verify_bn_expansion(q: &SeqQuantities, alpha: f64, lambda: f64) -> VerifierReport {
    let mut c = Checker::new("bn_expansion", IDENTITY_TOL);
    for n in 1..=q.last() {
        let nf = n as f64;
        let an = alpha_n(n, alpha);
        let m = lambda * nf * an;
        let rhs = lambda * lambda * q.h[n] + m * (q.h[n] - q.h[n - 1]) + nf * an * (nf * an + lambda) * q.delta[n]
            - m * q.gamma_star[n]
            + 2.0 * m * q.proj_back[n];
        c.eq(n, q.b_flat(n, alpha, lambda), rhs);
    }
    c.finish()
}

/// Sign facts from the variational inequality of the projection.
pub fn verify_sign_facts(q: &SeqQuantities) -> VerifierReport {
    let mut c = Checker::new("projection_signs", IDENTITY_TOL);
    for n in 1..=q.last() {
        c.le(n, -q.gamma_star[n], 0.0);
        c.le(n, -q.proj_fwd[n], 0.0);
        c.le(n, q.proj_back[n], 0.0);
    }
    c.finish()
}

/// `K(α) = 2α(α − 3)/9`
pub fn k_alpha(alpha: f64) -> f64 {
    2.0 * alpha * (alpha - 3.0) / 9.0
}

/// Explicit coefficients of the one-step inequality on `Eₙ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
    pub d5: f64,
}

impl CheckpointCoefficients {
    pub fn new(n: usize, a: f64) -> Self {
        let n = n as f64;
        let a2_ = a * a;
        let a3 = a2_ * a;
        let na = n + a;
        CheckpointCoefficients {
            a1: 17.0 * a2_ / 9.0 - 8.0 * a / 3.0 + 2.0
                - a * ((10.0 * a2_ - 18.0 * a + 9.0) * n + 7.0 * a3 - 12.0 * a2_ + 6.0 * a) / (3.0 * na * na),
            a2: 1.0 - 2.0 * a / 3.0,
            b1: -2.0 * a2_ / 9.0 + 4.0 * a / 3.0 - 1.0
                + (3.0 * a - 2.0 * a3) / (3.0 * na)
                + (8.0 * a3 - 24.0 * a2_) / (27.0 * n),
            b2: 2.0 * a2_ / 9.0 - 2.0 * a + 2.0 - (3.0 * a - 2.0 * a3) / (3.0 * na),
            b3: 2.0 * a / 3.0 - 1.0,
            d1: 2.0 * a / 3.0 - 1.0,
            d2: -4.0 * a / 3.0 * n - 1.0 - 4.0 * a / 3.0 + 10.0 * a2_ / 9.0 + (3.0 * a - 2.0 * a3) / (3.0 * na),
            d3: 4.0 * a / 3.0 - 2.0,
            d4: -4.0 * a / 3.0 * n - 8.0 * a / 3.0 + 8.0 * a2_ / 9.0,
            d5: 4.0 * a / 3.0 * n + 2.0 - 4.0 * a2_ / 3.0 + a * (4.0 * a2_ - 6.0) / (3.0 * na),
        }
    }
}

/// First index at which the one-step inequality on `Eₙ` is claimed: the
/// descent lemma is scaled by `n(n − λ + 2)`, which must be nonnegative.
pub fn checkpoint_start(alpha: f64) -> usize {
    let lambda = 2.0 * alpha / 3.0;
    ((lambda - 2.0).ceil().max(1.0)) as usize
}

/// `E_{n+1} − (1 − (λ−2)/n)Eₙ` against the explicit right-hand side.
pub fn verify_checkpoint_inequality(q: &SeqQuantities, alpha: f64) -> Result<VerifierReport> {
    q.require_step()?;
    let lambda = 2.0 * alpha / 3.0;
    let k = k_alpha(alpha);
    let mut c = Checker::new("checkpoint", INEQUALITY_TOL);
    for n in checkpoint_start(alpha)..q.last() {
        let nf = n as f64;
        let cf = CheckpointCoefficients::new(n, alpha);
        let lhs = energy_e_lambda(q, n + 1, lambda) - (1.0 - (lambda - 2.0) / nf) * energy_e_lambda(q, n, lambda);
        let rhs = 4.0 * alpha * k / (3.0 * nf) * q.h[n]
            + cf.a1 * q.delta[n]
            + cf.b1 * (q.h[n - 1] - q.h[n])
            + cf.b3 * (q.h[n + 1] - q.h[n] - q.delta[n + 1])
            + cf.b3 * q.gamma_star[n + 1]
            + cf.d2 * q.gamma_star[n]
            + 2.0 * cf.b3 * q.proj_fwd[n + 1]
            + cf.d4 * q.proj_fwd[n]
            + cf.d5 * q.proj_back[n];
        c.le(n, lhs, rhs);
    }
    Ok(c.finish())
}

/// `p`, `λ` and `ξ` of the flat-case energy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatParams {
    pub alpha: f64,
    pub gamma: f64,
    pub p: f64,
    pub lambda: f64,
    pub xi: f64,
}

impl FlatParams {
    /// `p = 1 + 4/(γ−2)`, `λ = α − 1 − p`, `ξ = λ(λ + 1 − α)`.
    pub fn new(alpha: f64, gamma: f64) -> Result<Self> {
        if !(gamma > 2.0) {
            return Err(Error::param("gamma", format!("must exceed 2, got {gamma}")));
        }
        let p = 1.0 + 4.0 / (gamma - 2.0);
        let lambda = alpha - 1.0 - p;
        if !(lambda > 0.0) {
            return Err(Error::param("alpha", format!("need alpha > 1 + p = {}", 1.0 + p)));
        }
        Ok(FlatParams {
            alpha,
            gamma,
            p,
            lambda,
            xi: lambda * (lambda + 1.0 - alpha),
        })
    }

    pub fn b1(&self, n: usize) -> f64 {
        let (l, a, m) = (self.lambda, self.alpha, n as f64 + 1.0);
        2.0 * (l + 1.0 - a) / m + a * (2.0 * l + 2.0 - a) / (m * m)
    }

    pub fn b2(&self, n: usize) -> f64 {
        let (l, a, m) = (self.lambda, self.alpha, n as f64 + 1.0);
        -2.0 * l * l * (l + 1.0 - a) / m + a * l * l * (a - 2.0 * l - 2.0) / (m * m)
    }

    pub fn b3(&self, n: usize) -> f64 {
        let (l, a, nf) = (self.lambda, self.alpha, n as f64);
        let den = nf + 1.0 + a;
        a * (l + 2.0) - (2.0 * l * l + 2.0 * l + 1.0) + a * a * (nf * (l - 2.0) + l - 2.0 - 2.0 * a) / (den * den)
    }

    pub fn b4(&self, n: usize) -> f64 {
        let (l, a, nf) = (self.lambda, self.alpha, n as f64);
        -2.0 * l * (l + 1.0 - a) - a * a * l / (nf + 1.0 + a)
    }

    pub fn r1(&self, n: usize) -> f64 {
        let (l, p, nf) = (self.lambda, self.p, n as f64);
        (l - 1.0 + p * (l - 2.0)) * nf.powf(p) + p * (l - 2.0) * nf.powf(p - 1.0)
    }

    pub fn r2(&self, n: usize) -> f64 {
        let (l, p, a, m) = (self.lambda, self.p, self.alpha, n as f64 + 1.0);
        ((4.0 * l + 6.0 + 2.0 * p - a) * a + 2.0 * l * p) * m.powf(p - 2.0)
            + a * a * (6.0 * l + 8.0 + p) * m.powf(p - 3.0)
            + 2.0 * a.powi(3) * (l + 2.0) * m.powf(p - 4.0)
    }

    pub fn r3(&self, n: usize) -> f64 {
        let (l, p, a, m) = (self.lambda, self.p, self.alpha, n as f64 + 1.0);
        (l * l * (a * a + 2.0 * a + 4.0 * l * p + p + 1.0) + l * (a - 1.0) * (p - 1.0)) * m.powf(p - 2.0)
            + l * l * a * (2.0 * p * l + 2.0 * p + 6.0 * l * a + 2.0 * a) * m.powf(p - 3.0)
            + 2.0 * a.powi(3) * l * l * (l + 2.0) * m.powf(p - 4.0)
    }
}

/// `𝓔ₙ = n²wₙ + bₙ + ξhₙ + λnαₙ²δₙ`
pub fn energy_flat(q: &SeqQuantities, n: usize, alpha: f64, gamma: f64) -> Result<f64> {
    let fp = FlatParams::new(alpha, gamma)?;
    Ok(energy_flat_with(q, n, &fp))
}

/// `𝓙ₙ = n^p 𝓔ₙ`
pub fn energy_flat_j(q: &SeqQuantities, n: usize, alpha: f64, gamma: f64) -> Result<f64> {
    let fp = FlatParams::new(alpha, gamma)?;
    Ok((n as f64).powf(fp.p) * energy_flat_with(q, n, &fp))
}

fn energy_flat_with(q: &SeqQuantities, n: usize, fp: &FlatParams) -> f64 {
    let nf = n as f64;
    let an = alpha_n(n, fp.alpha);
    nf * nf * q.w[n] + q.b_flat(n, fp.alpha, fp.lambda) + fp.xi * q.h[n] + fp.lambda * nf * an * an * q.delta[n]
}

/// One-step decrement bound on the flat-case energy.
pub fn verify_flat_decrement(q: &SeqQuantities, alpha: f64, gamma: f64) -> Result<VerifierReport> {
    q.require_step()?;
    let fp = FlatParams::new(alpha, gamma)?;
    let mut c = Checker::new("flat_decrement", INEQUALITY_TOL);
    for n in 1..q.last() {
        let nf = n as f64;
        let lhs = energy_flat_with(q, n + 1, &fp) - energy_flat_with(q, n, &fp);
        let rhs = ((2.0 - fp.lambda) * nf + 1.0) * q.w[n + 1]
            + fp.b1(n) * q.b_flat(n + 1, alpha, fp.lambda)
            + fp.b2(n) * q.h[n + 1]
            + fp.b3(n) * q.delta[n + 1]
            - fp.b4(n) * (q.gamma_star[n + 1] - 2.0 * q.proj_back[n + 1]);
        c.le(n, lhs, rhs);
    }
    Ok(c.finish())
}

/// One-step bound on `𝓙ₙ = n^p 𝓔ₙ` with the remainder polynomials `R₁ … R₃`.
pub fn verify_flat_j_decrement(q: &SeqQuantities, alpha: f64, gamma: f64) -> Result<VerifierReport> {
    q.require_step()?;
    let fp = FlatParams::new(alpha, gamma)?;
    let (p, l) = (fp.p, fp.lambda);
    let mut c = Checker::new("flat_j_decrement", INEQUALITY_TOL);
    for n in 1..q.last() {
        let nf = n as f64;
        let m = nf + 1.0;
        let lhs = m.powf(p) * energy_flat_with(q, n + 1, &fp) - nf.powf(p) * energy_flat_with(q, n, &fp);
        let rhs = ((2.0 - l + p) * m.powf(p + 1.0) + fp.r1(n)) * q.w[n + 1]
            + ((2.0 * (l + 1.0 - alpha) + p) * m.powf(p - 1.0) + fp.r2(n)) * q.b_flat(n + 1, alpha, l)
            + (l * (l + 1.0 - alpha) * (p - 2.0 * l) * m.powf(p - 1.0) + fp.r3(n)) * q.h[n + 1]
            - nf.powf(p) * fp.b4(n) * (q.gamma_star[n + 1] - 2.0 * q.proj_back[n + 1]);
        c.le(n, lhs, rhs);
    }
    Ok(c.finish())
}

/// Both claims bounding `δₙ` and `Aδₙ + B(hₙ₋₁ − hₙ)` by `Eₙ`, for `n > λ = 2α/3`.
pub fn verify_lemma_ab(q: &SeqQuantities, alpha: f64, a: f64, b: f64, kappa: f64) -> Result<VerifierReport> {
    if !(kappa > 0.0) {
        return Err(Error::MissingField("quadratic growth certificate"));
    }
    let lambda = 2.0 * alpha / 3.0;
    let mut c = Checker::new("lemma_ab", INEQUALITY_TOL);
    let start = lambda.floor() as usize + 1;
    for n in start.max(1)..=q.last() {
        let nf = n as f64;
        let den = (nf - lambda) * (nf - lambda);
        let rhs1 = 2.0 * q.b_e(n, lambda) / den + 8.0 * alpha * alpha * q.h[n] / (9.0 * den);
        c.le(n, q.delta[n], rhs1);
        let factor = (2.0 * (a + b).abs() + 2f64.sqrt() * b.abs() / kappa.sqrt())
            * (1.0 + 4.0 * alpha * alpha / (9.0 * kappa * nf * nf));
        let rhs2 = factor * energy_e_lambda(q, n, lambda) / den - b * q.gamma_star[n] + 2.0 * b * q.proj_back[n];
        c.le(n, a * q.delta[n] + b * (q.h[n - 1] - q.h[n]), rhs2);
    }
    Ok(c.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_lasso, make_rankdef_least_squares};
    use proptest::prelude::*;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec())
    }

    fn x_axis() -> ConvexSet {
        ConvexSet::affine(v(&[0.0, 0.0]), vec![v(&[1.0, 0.0])]).unwrap()
    }

    fn two_point() -> SeqQuantities {
        SeqQuantities::from_parts(vec![v(&[1.0, 2.0]), v(&[3.0, 1.0])], &x_axis(), &[0.0, 0.0], 1.0).unwrap()
    }

    #[test]
    fn gradient_mapping_examples() {
        let q = make_rankdef_least_squares(&[v(&[2.0, 0.0]), v(&[0.0, 1.0])], v(&[1.0, 1.0])).unwrap();
        let x = v(&[0.3, -0.7]);
        assert!(gradient_mapping(&q, &x).dist(&q.grad_f(&x)) < 1e-15);
        assert_eq!(gradient_mapping(&q, &v(&[0.5, 1.0])), v(&[0.0, 0.0]));
        let lasso = make_lasso(&[v(&[1.0])], v(&[3.0]), 1.0).unwrap();
        assert_eq!(gradient_mapping(&lasso, &v(&[0.0])), v(&[-2.0]));
    }

    #[test]
    fn control1_examples() {
        let p = make_rankdef_least_squares(&[v(&[1.0])], v(&[0.0])).unwrap();
        assert_eq!(control1_check(&p, &v(&[1.0])).unwrap(), 0.0);
        assert_eq!(control1_check(&p, &v(&[0.0])).unwrap(), 0.0);
        let lasso = make_lasso(&[v(&[1.0])], v(&[3.0]), 1.0).unwrap();
        assert!(matches!(
            control1_check(&lasso, &v(&[0.0])),
            Err(Error::MissingField(_))
        ));
        let lasso = lasso.with_f_star(2.5);
        for x in [-3.0, -0.5, 0.0, 1.0, 2.0, 4.0, 7.5] {
            assert!(control1_check(&lasso, &v(&[x])).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn two_point_quantities() {
        let q = two_point();
        assert_eq!(q.h, vec![4.0, 1.0]);
        assert_eq!(q.delta[1], 5.0);
        assert_eq!(q.gamma_star[1], 4.0);
        assert_eq!(q.cross_step[1], -1.0);
        assert_eq!(q.cross_prev_step[1], -2.0);
        assert_eq!(q.proj_back[1], 0.0);
        assert_eq!(q.proj_fwd[1], 0.0);
        let r = verify_lemma_tech1(&q);
        assert!(r.pass && r.worst_violation == 0.0, "{r:?}");
    }

    #[test]
    fn two_point_energy() {
        let mut q = two_point();
        q.w[1] = 0.75;
        // alpha = 3 gives lambda = 2
        assert_eq!(energy_e(&q, 1, 3.0), 0.75 + 13.0);
        assert!(verify_energy_forms(&q, 3.0).pass);
    }

    #[test]
    fn constant_trace_is_zero() {
        let xs = v(&[0.4, 0.0]);
        let q = SeqQuantities::from_parts(vec![xs.clone(); 6], &x_axis(), &[0.0; 6], 2.0).unwrap();
        for arr in [&q.w, &q.h, &q.delta, &q.gamma_star, &q.proj_fwd, &q.proj_back] {
            assert!(arr.iter().all(|v| *v == 0.0));
        }
        assert_eq!(energy_e(&q, 3, 6.0), 0.0);
        assert_eq!(energy_flat(&q, 3, 10.0, 4.0).unwrap(), 0.0);
        for r in [
            verify_descent_lemma(&q, 6.0).unwrap(),
            verify_lemma_tech2_claim2(&q, 6.0).unwrap(),
            verify_checkpoint_inequality(&q, 6.0).unwrap(),
            verify_flat_decrement(&q, 10.0, 4.0).unwrap(),
            verify_flat_j_decrement(&q, 10.0, 4.0).unwrap(),
            verify_lemma_ab(&q, 6.0, 1.0, -2.0, 0.1).unwrap(),
        ] {
            assert!(r.pass && r.worst_violation <= 0.0, "{r:?}");
        }
    }

    #[test]
    fn flat_parameters() {
        let fp = FlatParams::new(10.0, 4.0).unwrap();
        assert_eq!(fp.p, 3.0);
        assert_eq!(fp.lambda, 6.0);
        assert_eq!(fp.xi, -18.0);
        assert!(FlatParams::new(10.0, 2.0).is_err());
        assert!(FlatParams::new(3.0, 4.0).is_err());
        for (a, g) in [(10.0, 4.0), (12.0, 3.0), (7.0, 6.0)] {
            let fp = FlatParams::new(a, g).unwrap();
            assert!(fp.xi < 0.0);
        }
        // α > 5 + 8/(γ−2) makes B₄ positive for large n
        for (a, g) in [(9.5, 4.0), (13.5, 3.0), (7.5, 6.0)] {
            let fp = FlatParams::new(a, g).unwrap();
            assert!(fp.b4(1000) > 0.0);
        }
    }

    #[test]
    fn checkpoint_coefficient_relations() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        use rand::{Rng, SeedableRng};
        for _ in 0..100 {
            let a = rng.gen_range(3.0..20.0);
            let n = rng.gen_range(1..10_000);
            let c = CheckpointCoefficients::new(n, a);
            let target = 2.0 * a / 3.0 - 1.0;
            assert_eq!(c.b3, target);
            assert!((-c.a2 - target).abs() < 1e-14);
            assert_eq!(c.d1, target);
            assert!((c.d3 / 2.0 - target).abs() < 1e-14);
            let sum = c.b1 + c.b2 + c.b3;
            let expect = 4.0 * a * k_alpha(a) / (3.0 * n as f64);
            assert!((sum - expect).abs() < 1e-10 * (1.0 + expect.abs() + a.powi(3)));
        }
    }

    #[test]
    fn checkpoint_start_index() {
        assert_eq!(checkpoint_start(3.0 + 3.0 / 2f64.sqrt()), 2);
        assert_eq!(checkpoint_start(6.0), 2);
        assert_eq!(checkpoint_start(3.0), 1);
        assert_eq!(checkpoint_start(9.0), 4);
    }

    #[test]
    fn rejects_wrong_step() {
        let mut q = two_point();
        q.step = Some(0.5);
        assert!(verify_descent_lemma(&q, 3.0).is_err());
        assert!(verify_checkpoint_inequality(&q, 3.0).is_err());
    }

    #[test]
    fn lemma_ab_claim1_with_zero_step() {
        let xs = vec![v(&[1.0, 2.0]); 8];
        let q = SeqQuantities::from_parts(xs, &x_axis(), &[0.5; 8], 1.0).unwrap();
        let r = verify_lemma_ab(&q, 3.0, 0.0, 0.0, 1.0).unwrap();
        assert!(r.pass);
    }

    fn random_sequence(seed: u64, len: usize, dim: usize) -> SeqQuantities {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(0..dim);
        let raw: Vec<Vector> = (0..k).map(|_| Vector::random_normal(dim, &mut rng)).collect();
        let dirs = crate::vecgeo::orthonormalize(&raw, 1e-8);
        let set = if rng.gen_bool(0.5) {
            ConvexSet::affine(Vector::random_normal(dim, &mut rng), dirs).unwrap()
        } else {
            let lo = Vector::random_normal(dim, &mut rng);
            let hi = lo.map(|c| c + 1.0);
            ConvexSet::boxed(lo, hi).unwrap()
        };
        let xs: Vec<Vector> = (0..len)
            .map(|_| Vector::random_normal(dim, &mut rng).scaled(3.0))
            .collect();
        let gaps: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..2.0)).collect();
        SeqQuantities::from_parts(xs, &set, &gaps, rng.gen_range(0.1..10.0)).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn identities_hold_on_random_sequences(seed in any::<u64>(), alpha in 3.0f64..15.0, lambda in 0.1f64..10.0) {
            let q = random_sequence(seed, 12, 10);
            prop_assert!(verify_lemma_tech1(&q).pass);
            prop_assert!(verify_energy_forms(&q, alpha).pass);
            prop_assert!(verify_bn_expansion(&q, alpha, lambda).pass);
            prop_assert!(verify_sign_facts(&q).pass);
        }
    }

    #[test]
    fn recomputation_is_bitwise_identical() {
        let a = random_sequence(7, 30, 5);
        let b = random_sequence(7, 30, 5);
        assert_eq!(a, b);
    }
}
