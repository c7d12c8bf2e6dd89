//! Rate fits, trajectory length, tuning formulas, explicit bounds and the
//! scalar lemmas used by the convergence proofs.

use std::f64::consts::{E, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{Checker, SeqQuantities, VerifierReport, IDENTITY_TOL};
use crate::error::{Error, Result};
use crate::solvers::Trace;

pub const MIN_FIT_POINTS: usize = 10;

/// `value ≈ C·n^{−p̂}` fitted on a window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub exponent_hat: f64,
    pub log_intercept: f64,
    pub window: (f64, f64),
    pub rms_residual: f64,
    pub points: usize,
}

/// `log value ≈ c + slope·n`
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub rms_residual: f64,
    pub points: usize,
}

fn least_squares_line(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rms = (pts
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum::<f64>()
        / m)
        .sqrt();
    (slope, intercept, rms)
}

fn in_window(series: &[(f64, f64)], window: Option<(f64, f64)>) -> Vec<(f64, f64)> {
    series
        .iter()
        .copied()
        .filter(|(n, _)| window.is_none_or(|(lo, hi)| *n >= lo && *n <= hi))
        .collect()
}

/// Least-squares line through `(log n, log value)`; the exponent is minus the slope.
pub fn fit_rate(series: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<RateFit> {
    let pts = in_window(series, window);
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::param(
            "series",
            format!("need at least {MIN_FIT_POINTS} points in the window, got {}", pts.len()),
        ));
    }
    if let Some((n, v)) = pts.iter().find(|(n, v)| !(*v > 0.0) || !(*n > 0.0)) {
        return Err(Error::param(
            "series",
            format!("nonpositive entry ({n}, {v}) in the window"),
        ));
    }
    let logs: Vec<(f64, f64)> = pts.iter().map(|(n, v)| (n.ln(), v.ln())).collect();
    let (slope, intercept, rms) = least_squares_line(&logs);
    Ok(RateFit {
        exponent_hat: -slope,
        log_intercept: intercept,
        window: (pts[0].0, pts[pts.len() - 1].0),
        rms_residual: rms,
        points: pts.len(),
    })
}

/// Least-squares line through `(n, log value)`.
pub fn fit_linear_rate(series: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<LinearFit> {
    let pts = in_window(series, window);
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::param(
            "series",
            format!("need at least {MIN_FIT_POINTS} points in the window, got {}", pts.len()),
        ));
    }
    if let Some((n, v)) = pts.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::param(
            "series",
            format!("nonpositive entry ({n}, {v}) in the window"),
        ));
    }
    let logs: Vec<(f64, f64)> = pts.iter().map(|(n, v)| (*n, v.ln())).collect();
    let (slope, intercept, rms) = least_squares_line(&logs);
    Ok(LinearFit {
        slope,
        intercept,
        window: (pts[0].0, pts[pts.len() - 1].0),
        rms_residual: rms,
        points: pts.len(),
    })
}

/// `M(n) = max_{k >= n} value_k`. Bounds of the form `O(n^{−p})` are
/// statements about this envelope, which also removes oscillation dips.
pub fn tail_envelope(series: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = series.to_vec();
    let mut running = f64::NEG_INFINITY;
    for p in out.iter_mut().rev() {
        running = running.max(p.1);
        p.1 = running;
    }
    out
}

/// Smallest gap trusted in a fit: `100·ε_mach·(1 + |F*|)`.
pub fn gap_floor(f_star: f64) -> f64 {
    100.0 * f64::EPSILON * (1.0 + f_star.abs())
}

/// Last decade `[N'/10, N']` where `N'` is the last index whose envelope
/// value stays above `floor`. `None` if nothing clears the floor.
pub fn last_decade_window(series: &[(f64, f64)], floor: f64) -> Option<(f64, f64)> {
    let env = tail_envelope(series);
    let hi = env.iter().rev().find(|(n, v)| *v > floor && *n > 0.0)?.0;
    Some((hi / 10.0, hi))
}

/// Envelope fit over the last decade above the floor.
pub fn fit_tail(series: &[(f64, f64)], floor: f64) -> Result<RateFit> {
    let window = last_decade_window(series, floor).ok_or_else(|| Error::param("series", "no value above the floor"))?;
    fit_rate(&tail_envelope(series), Some(window))
}

/// Linear-rate fit over the records whose values are above the floor.
pub fn fit_linear_tail(series: &[(f64, f64)], floor: f64, skip_fraction: f64) -> Result<LinearFit> {
    let env = tail_envelope(series);
    let hi = env
        .iter()
        .rev()
        .find(|(_, v)| *v > floor)
        .map(|p| p.0)
        .ok_or_else(|| Error::param("series", "no value above the floor"))?;
    let lo = hi * skip_fraction;
    fit_linear_rate(&env, Some((lo, hi)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLength {
    /// `(n, S_n)`
    pub partial_sums: Vec<(f64, f64)>,
    pub total: f64,
    /// `S_N − S_{N/2}`
    pub cauchy_gap: f64,
}

/// `S_n = Σ_{k<=n} ‖x_k − x_{k−1}‖` from the step norms `steps[k−1] = ‖x_k − x_{k−1}‖`.
pub fn trajectory_length_from_steps(steps: &[f64]) -> TrajectoryLength {
    let mut sums = Vec::with_capacity(steps.len());
    let mut s = 0.0;
    for (k, st) in steps.iter().enumerate() {
        s += st;
        sums.push(((k + 1) as f64, s));
    }
    from_partial_sums(sums)
}

fn from_partial_sums(sums: Vec<(f64, f64)>) -> TrajectoryLength {
    let (n_last, total) = sums.last().copied().unwrap_or((0.0, 0.0));
    let half = n_last / 2.0;
    let at_half = sums.iter().rev().find(|(n, _)| *n <= half).map_or(0.0, |p| p.1);
    TrajectoryLength {
        partial_sums: sums,
        total,
        cauchy_gap: total - at_half,
    }
}

/// Partial sums from a trace: the running `length` extra when present,
/// otherwise the recorded step norms (exact only for stride 1).
pub fn trajectory_length(trace: &Trace) -> TrajectoryLength {
    let sums = trace.extra_series("length");
    if sums.len() == trace.records.len() && !sums.is_empty() {
        return from_partial_sums(sums.into_iter().filter(|(n, _)| *n > 0.0).collect());
    }
    let steps: Vec<f64> = trace.records.iter().filter(|r| r.n > 0).map(|r| r.step_norm).collect();
    trajectory_length_from_steps(&steps)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub epsilon: f64,
    pub lipschitz: f64,
    pub m0: f64,
    pub kappa: f64,
    /// `(3/(eε))·√(L·M₀/2)`
    pub log_argument: f64,
    pub alpha_eps: f64,
    pub n_eps: f64,
    pub n_eps_uniq: f64,
    /// The logarithm argument is at most 1, so `α_ε <= 0` and the recipe does not apply.
    pub flagged: bool,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {v}")))
    }
}

pub fn tuning_log_argument(epsilon: f64, l: f64, m0: f64) -> Result<f64> {
    positive("epsilon", epsilon)?;
    positive("L", l)?;
    positive("M0", m0)?;
    Ok(3.0 / (E * epsilon) * (l * m0 / 2.0).sqrt())
}

/// `3·log((3/(eε))√(LM₀/2))`
pub fn alpha_eps(epsilon: f64, l: f64, m0: f64) -> Result<f64> {
    Ok(3.0 * tuning_log_argument(epsilon, l, m0)?.ln())
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa <= 1.0 {
        Ok(())
    } else {
        Err(Error::param("kappa", format!("must lie in (0, 1], got {kappa}")))
    }
}

/// `(8e²/√κ)·log((3/(eε))√(LM₀/2))`
pub fn n_eps(kappa: f64, epsilon: f64, l: f64, m0: f64) -> Result<f64> {
    check_kappa(kappa)?;
    Ok(8.0 * E * E / kappa.sqrt() * tuning_log_argument(epsilon, l, m0)?.ln())
}

/// `(8e²/√κ)·log(5√(LM₀)/(e√2·ε))`, the count under a unique minimizer.
pub fn n_eps_uniq(kappa: f64, epsilon: f64, l: f64, m0: f64) -> Result<f64> {
    check_kappa(kappa)?;
    positive("epsilon", epsilon)?;
    positive("L", l)?;
    positive("M0", m0)?;
    Ok(8.0 * E * E / kappa.sqrt() * (5.0 * (l * m0).sqrt() / (E * SQRT_2 * epsilon)).ln())
}

pub fn tune(epsilon: f64, l: f64, m0: f64, kappa: f64) -> Result<TuningResult> {
    let arg = tuning_log_argument(epsilon, l, m0)?;
    Ok(TuningResult {
        epsilon,
        lipschitz: l,
        m0,
        kappa,
        log_argument: arg,
        alpha_eps: alpha_eps(epsilon, l, m0)?,
        n_eps: n_eps(kappa, epsilon, l, m0)?,
        n_eps_uniq: n_eps_uniq(kappa, epsilon, l, m0)?,
        flagged: arg <= 1.0,
    })
}

/// `(K₂^{1−δ} + K₁)^{1/(1−δ)}`: every `x >= 0` with `x^δ(x^{1−δ} − K₁) <= K₂` is below it.
pub fn control_v_bound(delta: f64, k1: f64, k2: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", "must lie in (0, 1)"));
    }
    if !(k1 >= 0.0) {
        return Err(Error::param("K1", "must be nonnegative"));
    }
    positive("K2", k2)?;
    Ok((k2.powf(1.0 - delta) + k1).powf(1.0 / (1.0 - delta)))
}

/// `K(δ−1)(δK)^{δ/(1−δ)}`, the minimum of `x − K·x^δ` on `x >= 0`.
pub fn min_g_bound(k: f64, delta: f64) -> Result<f64> {
    positive("K", k)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", "must lie in (0, 1)"));
    }
    Ok(k * (delta - 1.0) * (delta * k).powf(delta / (1.0 - delta)))
}

/// `n^{p−1}hₙ <= (L/2K)^{2/γ}(n^{p+1}wₙ)^{2/γ}` with `p = 1 + 4/(γ−2)`, from the
/// first index whose distance to `X*` is within `activation_radius` (all
/// indices when `None`, i.e. a global certificate).
pub fn lemma_geo_check(
    q: &SeqQuantities,
    gamma: f64,
    k: f64,
    activation_radius: Option<f64>,
) -> Result<VerifierReport> {
    if !(gamma > 2.0) {
        return Err(Error::param("gamma", format!("must exceed 2, got {gamma}")));
    }
    positive("K", k)?;
    let p = 1.0 + 4.0 / (gamma - 2.0);
    let l = q.lipschitz;
    let start = match activation_radius {
        None => 1,
        Some(eps) => match (1..=q.last()).find(|&n| q.h[n].sqrt() <= eps) {
            Some(n) => n,
            None => return Ok(Checker::new("lemma_geo", IDENTITY_TOL).finish()),
        },
    };
    let mut c = Checker::new("lemma_geo", IDENTITY_TOL);
    let coef = (l / (2.0 * k)).powf(2.0 / gamma);
    for n in start.max(1)..=q.last() {
        let nf = n as f64;
        let lhs = nf.powf(p - 1.0) * q.h[n];
        let rhs = coef * (nf.powf(p + 1.0) * q.w[n].max(0.0)).powf(2.0 / gamma);
        c.le(n, lhs, rhs);
    }
    Ok(c.finish())
}

/// `r³ − r² − 2(1+√2)r − 4`
pub fn r_star_polynomial(r: f64) -> f64 {
    r * r * r - r * r - 2.0 * (1.0 + SQRT_2) * r - 4.0
}

/// Positive root of [`r_star_polynomial`] by bisection on `[1, 10]`.
pub fn r_star() -> f64 {
    let (mut lo, mut hi) = (1.0_f64, 10.0_f64);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if r_star_polynomial(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `(C₁, C₂)` of the continuous-time explicit bound.
pub fn avd_constants() -> (f64, f64) {
    let r = r_star();
    let c1 = 1.0 + 2.0 / r + 4.0 / (r * r);
    let c2 = 1.0 / r + (1.0 + SQRT_2) / (r * r) + 4.0 / (3.0 * r * r * r);
    (c1, c2)
}

/// First time at which the continuous-time bound applies: `αr*/(3√μ)`.
pub fn avd_bound_start(alpha: f64, mu: f64) -> f64 {
    alpha * r_star() / (3.0 * mu.sqrt())
}

/// `C₁e^{(2/3)C₂(α−3)}M₀(αr*/(3t√μ))^{2α/3}`
pub fn avd_rate_bound(alpha: f64, mu: f64, m0: f64, t: f64) -> Result<f64> {
    if !(alpha > 3.0) {
        return Err(Error::param("alpha", "must exceed 3"));
    }
    positive("mu", mu)?;
    if !(m0 >= 0.0) {
        return Err(Error::param("M0", "must be nonnegative"));
    }
    let start = avd_bound_start(alpha, mu);
    if t < start {
        return Err(Error::param("t", format!("bound holds for t >= {start}, got {t}")));
    }
    let (c1, c2) = avd_constants();
    let r = r_star();
    Ok(c1 * (2.0 / 3.0 * c2 * (alpha - 3.0)).exp() * m0 * (alpha * r / (3.0 * t * mu.sqrt())).powf(2.0 * alpha / 3.0))
}

/// First index at which the discrete explicit bound applies: `3α/√κ`.
pub fn theorem2_start(alpha: f64, kappa: f64) -> f64 {
    3.0 * alpha / kappa.sqrt()
}

/// `(9/4)e⁻²M₀(8eα/(3√κ))^{2α/3}n^{−2α/3}`
pub fn theorem2_bound(alpha: f64, kappa: f64, m0: f64, n: f64) -> Result<f64> {
    check_kappa(kappa)?;
    if !(alpha > 3.0) {
        return Err(Error::param("alpha", "must exceed 3"));
    }
    let start = theorem2_start(alpha, kappa);
    if n < start {
        return Err(Error::param("n", format!("bound holds for n >= {start}, got {n}")));
    }
    let e = 2.0 * alpha / 3.0;
    Ok(2.25 * (-2.0f64).exp() * m0 * (8.0 * E * alpha / (3.0 * kappa.sqrt()) / n).powf(e))
}

/// `(α−1)²‖x₀ − x*‖²/(2s(n+α−2)²)`
pub fn convex_bound(alpha: f64, step: f64, dist0_sq: f64, n: f64) -> f64 {
    let d = n + alpha - 2.0;
    (alpha - 1.0) * (alpha - 1.0) * dist0_sq / (2.0 * step * d * d)
}
