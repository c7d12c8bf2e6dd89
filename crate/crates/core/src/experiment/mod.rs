//! Config-driven experiments: build a problem, run a sweep of solvers or AVD
//! integrations, evaluate the requested checks and write traces, plots and a
//! report.

mod builtin;
mod config;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    avd_bound_start, avd_rate_bound, convex_bound, fit_linear_tail, fit_tail, gap_floor, lemma_geo_check, r_star,
    r_star_polynomial, theorem2_bound, theorem2_start, trajectory_length, tune, RateFit, TuningResult,
};
use crate::avd::{avd_integrate, step_doubling, AvdConfig};
use crate::diagnostics::{
    compute_seq_quantities, verify_bn_expansion, verify_checkpoint_inequality, verify_descent_lemma,
    verify_energy_forms, verify_flat_decrement, verify_flat_j_decrement, verify_lemma_ab, verify_lemma_tech1,
    verify_lemma_tech2_claim2, verify_sign_facts, FlatParams, SeqQuantities, VerifierReport,
};
use crate::error::{Error, Result};
use crate::problems::{
    make_conditioned_least_squares, make_hoelder_distance, make_lasso, with_estimated_f_star, CompositeProblem,
    GrowthKind,
};
use crate::solvers::{self, Algorithm, SolverConfig, Termination, Trace};
use crate::vecgeo::{orthonormalize, ConvexSet, Vector};

pub use builtin::{builtin, builtin_names, BUILTINS};
pub use config::parse_flat;
pub use output::{
    emit_csv, emit_loglog_svg, parse_csv, read_csv, render_csv, render_loglog_svg, thin_log, CsvTable, PlotSeries,
};

/// Zoo instance to build.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    /// `L = 1`, `μ = kappa`, minimizers of dimension `dim − rank`.
    LeastSquares { dim: usize, rank: usize, kappa: f64 },
    /// `K·dist(x, C)^γ` with `C` a random affine subspace of dimension `set_dim`.
    HoelderDistance {
        dim: usize,
        set_dim: usize,
        gamma: f64,
        k: f64,
    },
    /// `F*` estimated by proximal gradient.
    Lasso {
        rows: usize,
        cols: usize,
        lambda: f64,
        f_star_iters: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSetup {
    pub spec: ProblemSpec,
    /// `d(x₀, X*)`; for LASSO, `‖x₀‖`.
    pub dist0: f64,
}

/// A built problem together with its start point.
#[derive(Clone, Debug)]
pub struct Instance {
    pub problem: CompositeProblem,
    pub x0: Vector,
    /// Minimizer used for distance bounds: the projection of `x₀` when `X*`
    /// is known, else the estimated minimizer.
    pub reference_minimizer: Vector,
}

impl ProblemSetup {
    pub fn build(&self, seed: u64) -> Result<Instance> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        if !(self.dist0 > 0.0 && self.dist0.is_finite()) {
            return Err(Error::config("problem.dist0", "must be positive"));
        }
        let problem = match &self.spec {
            ProblemSpec::LeastSquares { dim, rank, kappa } => make_conditioned_least_squares(*dim, *rank, *kappa, seed)
                .map_err(|e| Error::config("problem", e.to_string()))?,
            ProblemSpec::HoelderDistance { dim, set_dim, gamma, k } => {
                if set_dim >= dim {
                    return Err(Error::config("problem.set_dim", "must be smaller than problem.dim"));
                }
                let raw: Vec<Vector> = (0..*set_dim).map(|_| Vector::random_normal(*dim, &mut rng)).collect();
                let dirs = orthonormalize(&raw, 1e-8);
                let set = ConvexSet::affine(Vector::random_normal(*dim, &mut rng), dirs)?;
                // certified region reaches past the start with room for overshoot
                let radius = 2.0 * self.dist0 + 1.0;
                make_hoelder_distance(set, *gamma, *k, radius)
                    .map_err(|e| Error::config("problem", e.to_string()))?
                    .with_name(format!(
                        "hoelder_distance(d={dim},set_dim={set_dim},gamma={gamma},K={k})"
                    ))
            }
            ProblemSpec::Lasso {
                rows,
                cols,
                lambda,
                f_star_iters,
            } => {
                let a: Vec<Vector> = (0..*rows).map(|_| Vector::random_normal(*cols, &mut rng)).collect();
                let b = Vector::random_normal(*rows, &mut rng);
                let p = make_lasso(&a, b, *lambda).map_err(|e| Error::config("problem", e.to_string()))?;
                let (p, x_hat) = with_estimated_f_star(p, *f_star_iters);
                let x0 = Vector::random_unit(*cols, &mut rng).scaled(self.dist0);
                return Ok(Instance {
                    problem: p.with_name(format!("lasso(rows={rows},cols={cols},lambda={lambda})")),
                    x0,
                    reference_minimizer: x_hat,
                });
            }
        };
        let z = Vector::random_normal(problem.dim(), &mut rng).scaled(3.0);
        let pz = problem.project_star(&z).ok_or(Error::MissingField("solution set"))?;
        let dir = &z - &pz;
        if dir.norm() < 1e-12 {
            return Err(Error::config("problem", "random start landed on the solution set"));
        }
        let x0 = pz.axpy(self.dist0 / dir.norm(), &dir);
        Ok(Instance {
            problem,
            x0,
            reference_minimizer: pz,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FistaCd,
    FistaNesterov,
    Pgm,
    VFista,
    Avd,
}

impl Method {
    pub fn uses_alpha(self) -> bool {
        matches!(self, Method::FistaCd | Method::Avd)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub method: Method,
    /// One run per value; ignored by methods without `α`.
    pub alphas: Vec<f64>,
    /// Use `α_ε` from the tuning formula instead of `alphas`.
    pub tuned_alpha: bool,
    pub max_iter: usize,
    pub stride: usize,
    /// ε-solution stop; `0` disables it.
    pub epsilon: f64,
    pub momentum: Option<f64>,
    pub t_end: f64,
    pub dt: Option<f64>,
    /// Verifiers look at `x₀ … x_{verify_iters}`.
    pub verify_iters: usize,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            method: Method::FistaCd,
            alphas: vec![3.0],
            tuned_alpha: false,
            max_iter: 1000,
            stride: 1,
            epsilon: 0.0,
            momentum: None,
            t_end: 100.0,
            dt: None,
            verify_iters: 10_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Gap,
    Step,
}

/// Theoretical exponent of a rate claim.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentRule {
    Value(f64),
    /// `2α/3`
    TwoThirdsAlpha,
    /// `α/3`
    ThirdAlpha,
    /// `2γ/(γ−2)`
    HoelderGap,
    /// `γ/(γ−2)`
    HoelderStep,
}

impl ExponentRule {
    pub fn eval(&self, alpha: Option<f64>, gamma: Option<f64>) -> Option<f64> {
        match *self {
            ExponentRule::Value(v) => Some(v),
            ExponentRule::TwoThirdsAlpha => alpha.map(|a| 2.0 * a / 3.0),
            ExponentRule::ThirdAlpha => alpha.map(|a| a / 3.0),
            ExponentRule::HoelderGap => gamma.map(|g| 2.0 * g / (g - 2.0)),
            ExponentRule::HoelderStep => gamma.map(|g| g / (g - 2.0)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifierKind {
    Tech1,
    Descent,
    Tech2Claim2,
    EnergyForms,
    BnExpansion,
    SignFacts,
    Checkpoint,
    LemmaAb,
    FlatDecrement,
    FlatJDecrement,
    LemmaGeo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckKind {
    /// Envelope fit over the last decade above the floor.
    Rate {
        series: SeriesKind,
        exponent: ExponentRule,
        tolerance: f64,
    },
    /// Log-gap slope at most `−μ/(4L)·(1 − relax)`.
    LinearRate {
        relax: f64,
    },
    Verifier {
        verifier: VerifierKind,
        gamma: Option<f64>,
    },
    /// `‖g‖²/(2L) <= F − F*` at every record.
    Control1 {
        tolerance: f64,
    },
    /// `S_N − S_{N/2} < ratio·S_N`
    FiniteLength {
        ratio: f64,
    },
    ConvexBound {
        tolerance: f64,
    },
    /// Flagged rather than failed when violated.
    Theorem2Bound,
    /// The ε-solution is reached within `⌈n_ε⌉` iterations.
    Tuning,
    AvdBound,
    StepDoubling {
        tolerance: f64,
    },
}

impl CheckKind {
    pub fn tag(&self) -> &'static str {
        match self {
            CheckKind::Rate { .. } => "rate",
            CheckKind::LinearRate { .. } => "linear_rate",
            CheckKind::Verifier { .. } => "verifier",
            CheckKind::Control1 { .. } => "control1",
            CheckKind::FiniteLength { .. } => "finite_length",
            CheckKind::ConvexBound { .. } => "convex_bound",
            CheckKind::Theorem2Bound => "theorem2_bound",
            CheckKind::Tuning => "tuning",
            CheckKind::AvdBound => "avd_bound",
            CheckKind::StepDoubling { .. } => "step_doubling",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSpec {
    pub label: String,
    pub kind: CheckKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub description: String,
    pub seed: u64,
    pub problem: ProblemSetup,
    pub run: RunSpec,
    pub checks: Vec<CheckSpec>,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_flat(text: &str) -> Result<Self> {
        config::from_flat(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        config::from_json(text)
    }

    pub fn to_flat(&self) -> String {
        config::to_flat(self)
    }

    /// Flat format for `.cfg`/`.txt` and anything else, JSON for `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_flat(&text)
        }
    }

    fn wants_iterates(&self) -> bool {
        self.checks.iter().any(|c| matches!(c.kind, CheckKind::Verifier { .. }))
    }

    /// Cross-field checks that do not need the built problem.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::config("name", "must be a non-empty file name"));
        }
        let r = &self.run;
        if r.method.uses_alpha() && !r.tuned_alpha && r.alphas.is_empty() {
            return Err(Error::config("run.alpha", "needs at least one value"));
        }
        if let Some(a) = r.alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::config("run.alpha", format!("must be positive, got {a}")));
        }
        if r.tuned_alpha && r.method != Method::FistaCd {
            return Err(Error::config("run.alpha", "`tuned` needs run.method=fista_cd"));
        }
        if r.tuned_alpha && !(r.epsilon > 0.0) {
            return Err(Error::config("run.epsilon", "`tuned` alpha needs a positive epsilon"));
        }
        if r.stride == 0 {
            return Err(Error::config("run.stride", "must be positive"));
        }
        if r.method == Method::VFista && r.momentum.is_none() {
            return Err(Error::config("run.momentum", "v_fista needs a momentum"));
        }
        let solver = r.method != Method::Avd;
        for c in &self.checks {
            let field = format!("check.{}.kind", c.label);
            let bad = |why: &str| Err(Error::config(field.clone(), why.to_string()));
            match &c.kind {
                CheckKind::Rate {
                    exponent, tolerance, ..
                } => {
                    if let ExponentRule::Value(v) = exponent {
                        if !v.is_finite() {
                            return Err(Error::config(format!("check.{}.exponent", c.label), "must be finite"));
                        }
                    }
                    if !(tolerance.is_finite() && *tolerance >= 0.0) {
                        return Err(Error::config(
                            format!("check.{}.tolerance", c.label),
                            "must be nonnegative",
                        ));
                    }
                    if matches!(exponent, ExponentRule::TwoThirdsAlpha | ExponentRule::ThirdAlpha)
                        && !r.method.uses_alpha()
                    {
                        return bad("alpha-dependent exponent on a method without alpha");
                    }
                }
                CheckKind::Verifier { .. } | CheckKind::ConvexBound { .. } | CheckKind::Theorem2Bound => {
                    if r.method != Method::FistaCd {
                        return bad("needs run.method=fista_cd");
                    }
                    if r.stride != 1 && matches!(c.kind, CheckKind::Verifier { .. }) {
                        return bad("verifiers need run.stride=1");
                    }
                }
                CheckKind::Tuning => {
                    if !r.tuned_alpha {
                        return bad("needs run.alpha=tuned");
                    }
                }
                CheckKind::AvdBound | CheckKind::StepDoubling { .. } => {
                    if solver {
                        return bad("needs run.method=avd");
                    }
                }
                CheckKind::LinearRate { relax } => {
                    if !(*relax >= 0.0 && *relax < 1.0) {
                        return Err(Error::config(format!("check.{}.relax", c.label), "must lie in [0, 1)"));
                    }
                }
                CheckKind::Control1 { .. } | CheckKind::FiniteLength { .. } => {}
            }
        }
        let mut labels: Vec<&str> = self.checks.iter().map(|c| c.label.as_str()).collect();
        labels.sort_unstable();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::config(format!("check.{}", w[0]), "duplicate label"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The claim's hypotheses could not be confirmed; failure only under `--strict`.
    Flagged,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Flagged => "flagged",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub run: usize,
    pub alpha: Option<f64>,
    pub label: String,
    pub kind: String,
    pub verdict: Verdict,
    /// Measured quantity, e.g. the fitted exponent or the worst ratio.
    pub value: Option<f64>,
    /// What `value` is compared against.
    pub threshold: Option<f64>,
    pub detail: String,
    pub fit: Option<RateFit>,
    pub verifier: Option<VerifierReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub index: usize,
    pub method: Method,
    pub alpha: Option<f64>,
    pub last_n: usize,
    pub terminated_by: Termination,
    pub final_gap: Option<f64>,
    pub length_total: f64,
    pub length_cauchy_gap: f64,
    pub tuning: Option<TuningResult>,
    pub csv: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub seed: u64,
    pub problem: String,
    pub runs: Vec<RunSummary>,
    pub checks: Vec<CheckOutcome>,
    /// Not serialized, so the written report is reproducible.
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl ExperimentReport {
    pub fn failures(&self, strict: bool) -> Vec<&CheckOutcome> {
        self.checks
            .iter()
            .filter(|c| c.verdict == Verdict::Fail || (strict && c.verdict == Verdict::Flagged))
            .collect()
    }

    pub fn passed(&self, strict: bool) -> bool {
        self.failures(strict).is_empty()
    }

    pub fn by_label(&self, label: &str) -> Vec<&CheckOutcome> {
        self.checks.iter().filter(|c| c.label == label).collect()
    }
}

/// Everything a run produced, before anything is written.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub traces: Vec<Trace>,
    pub instance: Instance,
}

/// Sidecar written next to each trace CSV so `verify` can rebuild the problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub config: ExperimentConfig,
    pub run: usize,
    pub alpha: Option<f64>,
    pub step: Option<f64>,
}

struct PlannedRun {
    index: usize,
    alpha: Option<f64>,
    tuning: Option<TuningResult>,
}

fn kappa_of(p: &CompositeProblem) -> Option<f64> {
    match p.growth.kind {
        GrowthKind::Quadratic { mu } if p.growth.is_global() => Some(mu / p.lipschitz()),
        _ => None,
    }
}

fn gamma_of(p: &CompositeProblem) -> Option<(f64, f64)> {
    match p.growth.kind {
        GrowthKind::Hoelder { gamma, k } => Some((gamma, k)),
        _ => None,
    }
}

fn m0_of(p: &CompositeProblem, x0: &Vector) -> Result<f64> {
    let fs = p.f_star.ok_or(Error::MissingField("F*"))?;
    Ok(p.objective(x0) - fs)
}

fn plan(cfg: &ExperimentConfig, inst: &Instance) -> Result<Vec<PlannedRun>> {
    let r = &cfg.run;
    if r.tuned_alpha {
        let p = &inst.problem;
        let kappa = kappa_of(p)
            .ok_or_else(|| Error::config("run.alpha", "`tuned` needs a global quadratic growth certificate"))?;
        let t = tune(r.epsilon, p.lipschitz(), m0_of(p, &inst.x0)?, kappa)
            .map_err(|e| Error::config("run.epsilon", e.to_string()))?;
        return Ok(vec![PlannedRun {
            index: 0,
            alpha: Some(t.alpha_eps),
            tuning: Some(t),
        }]);
    }
    if !r.method.uses_alpha() {
        return Ok(vec![PlannedRun {
            index: 0,
            alpha: None,
            tuning: None,
        }]);
    }
    Ok(r.alphas
        .iter()
        .enumerate()
        .map(|(index, a)| PlannedRun {
            index,
            alpha: Some(*a),
            tuning: None,
        })
        .collect())
}

fn avd_config(cfg: &ExperimentConfig, p: &CompositeProblem, alpha: f64) -> AvdConfig {
    let mut c = AvdConfig::new(alpha, cfg.run.t_end, p).with_stride(cfg.run.stride);
    if let Some(dt) = cfg.run.dt {
        c = c.with_dt(dt);
    }
    c
}

fn execute(cfg: &ExperimentConfig, inst: &Instance, pr: &PlannedRun) -> Result<Trace> {
    let p = &inst.problem;
    let r = &cfg.run;
    if r.method == Method::Avd {
        let c = avd_config(cfg, p, pr.alpha.unwrap_or(3.0));
        return avd_integrate(p, &c, &inst.x0, &Vector::zeros(p.dim()));
    }
    let algorithm = match r.method {
        Method::FistaCd => Algorithm::FistaCd {
            alpha: pr.alpha.unwrap_or(3.0),
        },
        Method::FistaNesterov => Algorithm::FistaNesterov,
        Method::Pgm => Algorithm::Pgm,
        Method::VFista => Algorithm::VFista {
            momentum: r.momentum.unwrap_or(0.0),
        },
        Method::Avd => unreachable!(),
    };
    let mut sc = SolverConfig::new(algorithm, p, r.max_iter)
        .with_stride(r.stride)
        .with_epsilon(r.epsilon);
    sc.store_iterates = cfg.wants_iterates();
    let mut trace = solvers::run(p, &sc, &inst.x0)?;
    if let Some(it) = trace.iterates.as_mut() {
        it.truncate(r.verify_iters + 1);
    }
    Ok(trace)
}

/// Abscissa is `t` for AVD traces and `n` otherwise; `n = 0` is dropped.
fn series(trace: &Trace, kind: SeriesKind) -> Vec<(f64, f64)> {
    trace
        .records
        .iter()
        .filter(|r| r.n > 0)
        .filter_map(|r| {
            let x = r.extras.get("t").copied().unwrap_or(r.n as f64);
            let y = match kind {
                SeriesKind::Gap => r.gap?,
                SeriesKind::Step => r.step_norm,
            };
            Some((x, y))
        })
        .collect()
}

fn floor_for(kind: SeriesKind, p: &CompositeProblem, trace: &Trace) -> f64 {
    match kind {
        SeriesKind::Gap => gap_floor(p.f_star.unwrap_or(0.0)),
        // differences of iterates lose digits relative to the iterate itself
        SeriesKind::Step => 100.0 * f64::EPSILON * (1.0 + trace.final_x.norm()),
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    inst: &'a Instance,
    planned: &'a PlannedRun,
    trace: &'a Trace,
    seq: Option<SeqQuantities>,
}

fn outcome(ctx: &Ctx, spec: &CheckSpec, verdict: Verdict) -> CheckOutcome {
    CheckOutcome {
        run: ctx.planned.index,
        alpha: ctx.planned.alpha,
        label: spec.label.clone(),
        kind: spec.kind.tag().to_string(),
        verdict,
        value: None,
        threshold: None,
        detail: String::new(),
        fit: None,
        verifier: None,
    }
}

fn pass_if(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn evaluate(ctx: &mut Ctx, spec: &CheckSpec) -> Result<CheckOutcome> {
    let p = &ctx.inst.problem;
    let trace = ctx.trace;
    let alpha = ctx.planned.alpha;
    let mut out = outcome(ctx, spec, Verdict::Fail);
    match &spec.kind {
        CheckKind::Rate {
            series: kind,
            exponent,
            tolerance,
        } => {
            let theory = exponent.eval(alpha, gamma_of(p).map(|g| g.0)).ok_or_else(|| {
                Error::config(format!("check.{}.exponent", spec.label), "needs a Hoelder certificate")
            })?;
            out.threshold = Some(theory - tolerance);
            match fit_tail(&series(trace, *kind), floor_for(*kind, p, trace)) {
                Ok(fit) => {
                    out.value = Some(fit.exponent_hat);
                    out.verdict = pass_if(fit.exponent_hat >= theory - tolerance);
                    out.detail = format!(
                        "fitted {:.4} vs theory {theory:.4} on [{}, {}]",
                        fit.exponent_hat, fit.window.0, fit.window.1
                    );
                    out.fit = Some(fit);
                }
                Err(e) => out.detail = format!("no fit: {e}"),
            }
        }
        CheckKind::LinearRate { relax } => {
            let kappa = kappa_of(p).ok_or_else(|| {
                Error::config(
                    format!("check.{}", spec.label),
                    "needs a global quadratic growth certificate",
                )
            })?;
            let bound = -(kappa / 4.0) * (1.0 - relax);
            out.threshold = Some(bound);
            match fit_linear_tail(
                &series(trace, SeriesKind::Gap),
                floor_for(SeriesKind::Gap, p, trace),
                0.1,
            ) {
                Ok(fit) => {
                    out.value = Some(fit.slope);
                    out.verdict = pass_if(fit.slope <= bound);
                    out.detail = format!(
                        "slope {:.3e} vs {bound:.3e} on [{}, {}]",
                        fit.slope, fit.window.0, fit.window.1
                    );
                }
                Err(e) => out.detail = format!("no fit: {e}"),
            }
        }
        CheckKind::Verifier { verifier, gamma } => {
            let report = run_verifier(ctx, spec, *verifier, *gamma)?;
            out.value = Some(report.worst_violation);
            out.threshold = Some(report.tolerance);
            out.verdict = pass_if(report.pass);
            let at = report.worst_n.map(|n| format!(" at n = {n}")).unwrap_or_default();
            out.detail = format!(
                "{} indices in [{}, {}], worst {:.3e}{at}",
                report.checked, report.range.0, report.range.1, report.worst_violation
            );
            out.verifier = Some(report);
        }
        CheckKind::Control1 { tolerance } => {
            let l = p.lipschitz();
            let floor = gap_floor(p.f_star.unwrap_or(0.0));
            let mut worst = f64::NEG_INFINITY;
            let mut worst_n = 0;
            for r in &trace.records {
                let Some(gap) = r.gap else { continue };
                let pen = r.gmap_norm * r.gmap_norm / (2.0 * l);
                let v = (pen - gap) / gap.abs().max(pen).max(floor);
                if v > worst {
                    worst = v;
                    worst_n = r.n;
                }
            }
            out.value = Some(worst);
            out.threshold = Some(*tolerance);
            out.verdict = pass_if(worst <= *tolerance);
            out.detail = format!("worst relative excess {worst:.3e} at n = {worst_n}");
        }
        CheckKind::FiniteLength { ratio } => {
            let len = trajectory_length(trace);
            let rel = if len.total > 0.0 {
                len.cauchy_gap / len.total
            } else {
                0.0
            };
            out.value = Some(rel);
            out.threshold = Some(*ratio);
            out.verdict = pass_if(rel < *ratio);
            out.detail = format!("S_N = {:.6e}, S_N - S_(N/2) = {:.3e}", len.total, len.cauchy_gap);
        }
        CheckKind::ConvexBound { tolerance } => {
            let a = alpha.unwrap_or(3.0);
            if a < 3.0 {
                return Err(Error::config(format!("check.{}", spec.label), "needs alpha >= 3"));
            }
            let s = trace.solver_config().map(|c| c.step).unwrap_or(1.0 / p.lipschitz());
            let d0 = ctx.inst.x0.dist(&ctx.inst.reference_minimizer);
            let mut worst = f64::NEG_INFINITY;
            let mut worst_n = 0;
            for r in &trace.records {
                let Some(gap) = r.gap else { continue };
                let b = convex_bound(a, s, d0 * d0, r.n as f64);
                let v = (gap - b) / b;
                if v > worst {
                    worst = v;
                    worst_n = r.n;
                }
            }
            out.value = Some(worst);
            out.threshold = Some(*tolerance);
            out.verdict = pass_if(worst <= *tolerance);
            out.detail = format!("worst (gap - bound)/bound = {worst:.3e} at n = {worst_n}");
        }
        CheckKind::Theorem2Bound => {
            let a = alpha.unwrap_or(3.0);
            let kappa = kappa_of(p).ok_or_else(|| {
                Error::config(
                    format!("check.{}", spec.label),
                    "needs a global quadratic growth certificate",
                )
            })?;
            let m0 = m0_of(p, &ctx.inst.x0)?;
            let start = theorem2_start(a, kappa);
            let mut worst = f64::NEG_INFINITY;
            let mut checked = 0;
            for r in trace.records.iter().filter(|r| r.n as f64 >= start) {
                let Some(gap) = r.gap else { continue };
                let b = theorem2_bound(a, kappa, m0, r.n as f64)?;
                worst = worst.max(gap / b);
                checked += 1;
            }
            out.value = Some(worst);
            out.threshold = Some(1.0 + 1e-9);
            if checked == 0 {
                out.verdict = Verdict::Flagged;
                out.detail = format!("no record at n >= {start:.1}");
            } else if worst <= 1.0 + 1e-9 {
                out.verdict = Verdict::Pass;
                out.detail = format!("max gap/bound {worst:.3e} over {checked} records from n >= {start:.1}");
            } else {
                out.verdict = Verdict::Flagged;
                out.detail = format!("kappa exceeds kappa_0: max gap/bound {worst:.3e} from n >= {start:.1}");
            }
        }
        CheckKind::Tuning => {
            let t = ctx
                .planned
                .tuning
                .ok_or_else(|| Error::config("run.alpha", "tuning check needs a tuned run"))?;
            let limit = t.n_eps.ceil();
            let reached = trace.terminated_by == Termination::EpsilonSolution;
            let n = trace.last().map(|r| r.n).unwrap_or(0) as f64;
            out.value = Some(if reached { n } else { f64::INFINITY });
            out.threshold = Some(limit);
            out.verdict = if t.flagged {
                Verdict::Flagged
            } else {
                pass_if(reached && n <= limit)
            };
            out.detail = format!(
                "alpha_eps = {:.4}, n_eps = {:.1}, n_eps_uniq = {:.1}, stopped at n = {n} ({:?})",
                t.alpha_eps, t.n_eps, t.n_eps_uniq, trace.terminated_by
            );
        }
        CheckKind::AvdBound => {
            let a = alpha.unwrap_or(3.0);
            let mu = match p.growth.kind {
                GrowthKind::Quadratic { mu } if p.growth.is_global() => mu,
                _ => {
                    return Err(Error::config(
                        format!("check.{}", spec.label),
                        "needs a global quadratic growth certificate",
                    ))
                }
            };
            // v₀ = 0, so M₀ is the initial gap
            let m0 = m0_of(p, &ctx.inst.x0)?;
            let start = avd_bound_start(a, mu);
            let root_residual = r_star_polynomial(r_star()).abs();
            let mut worst = f64::NEG_INFINITY;
            let mut checked = 0;
            for r in &trace.records {
                let (Some(gap), Some(&t)) = (r.gap, r.extras.get("t")) else {
                    continue;
                };
                if t < start {
                    continue;
                }
                worst = worst.max(gap / avd_rate_bound(a, mu, m0, t)?);
                checked += 1;
            }
            out.value = Some(worst);
            out.threshold = Some(1.0 + 1e-9);
            out.verdict = if checked == 0 {
                Verdict::Flagged
            } else {
                pass_if(worst <= 1.0 + 1e-9 && root_residual < 1e-10)
            };
            out.detail = format!(
                "max gap/bound {worst:.3e} over {checked} records from t >= {start:.3}, |poly(r*)| = {root_residual:.1e}"
            );
        }
        CheckKind::StepDoubling { tolerance } => {
            let c = avd_config(ctx.cfg, p, alpha.unwrap_or(3.0));
            let (_, _, diff) = step_doubling(p, &c, &ctx.inst.x0, &Vector::zeros(p.dim()))?;
            out.value = Some(diff);
            out.threshold = Some(*tolerance);
            out.verdict = pass_if(diff <= *tolerance);
            out.detail = format!("|gap(dt) - gap(dt/2)| at t_end = {diff:.3e}");
        }
    }
    Ok(out)
}

/// `(A, B)` pairs on which the two-claim lemma is exercised.
pub const LEMMA_AB_PAIRS: [(f64, f64); 5] = [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, -1.0), (-2.0, 0.5)];

fn run_verifier(ctx: &mut Ctx, spec: &CheckSpec, kind: VerifierKind, gamma: Option<f64>) -> Result<VerifierReport> {
    let p = &ctx.inst.problem;
    if ctx.seq.is_none() {
        ctx.seq = Some(compute_seq_quantities(ctx.trace, p)?);
    }
    let q = ctx.seq.as_ref().expect("just computed");
    let alpha = ctx.planned.alpha.unwrap_or(3.0);
    verifier_report(q, p, kind, alpha, gamma).map_err(|e| match e {
        Error::InvalidParameter { name, reason } => Error::config(format!("check.{}.{name}", spec.label), reason),
        other => other,
    })
}

/// One verifier on precomputed quantities. `gamma` defaults to the Hölder
/// exponent of the problem.
pub fn verifier_report(
    q: &SeqQuantities,
    p: &CompositeProblem,
    kind: VerifierKind,
    alpha: f64,
    gamma: Option<f64>,
) -> Result<VerifierReport> {
    let hoelder = gamma_of(p);
    let gamma_or = || {
        gamma.or(hoelder.map(|g| g.0)).ok_or(Error::param(
            "gamma",
            "needs a Hoelder certificate or an explicit gamma",
        ))
    };
    Ok(match kind {
        VerifierKind::Tech1 => verify_lemma_tech1(q),
        VerifierKind::Descent => verify_descent_lemma(q, alpha)?,
        VerifierKind::Tech2Claim2 => verify_lemma_tech2_claim2(q, alpha)?,
        VerifierKind::EnergyForms => verify_energy_forms(q, alpha),
        VerifierKind::BnExpansion => {
            let lambda = gamma_or()
                .ok()
                .and_then(|g| FlatParams::new(alpha, g).ok())
                .map(|f| f.lambda)
                .unwrap_or(2.0 * alpha / 3.0);
            verify_bn_expansion(q, alpha, lambda)
        }
        VerifierKind::SignFacts => verify_sign_facts(q),
        VerifierKind::Checkpoint => verify_checkpoint_inequality(q, alpha)?,
        VerifierKind::LemmaAb => {
            let kappa = q.kappa.ok_or(Error::MissingField("quadratic growth certificate"))?;
            let mut worst: Option<VerifierReport> = None;
            for (a, b) in LEMMA_AB_PAIRS {
                let r = verify_lemma_ab(q, alpha, a, b, kappa)?;
                if worst.as_ref().is_none_or(|w| r.worst_violation > w.worst_violation) {
                    worst = Some(r);
                }
            }
            worst.expect("nonempty pair list")
        }
        VerifierKind::FlatDecrement => verify_flat_decrement(q, alpha, gamma_or()?)?,
        VerifierKind::FlatJDecrement => verify_flat_j_decrement(q, alpha, gamma_or()?)?,
        VerifierKind::LemmaGeo => {
            let (g, k) = hoelder.ok_or(Error::MissingField("Hoelder growth certificate"))?;
            lemma_geo_check(q, g, k, None)?
        }
    })
}

fn run_one(cfg: &ExperimentConfig, inst: &Instance, pr: &PlannedRun) -> Result<(Trace, RunSummary, Vec<CheckOutcome>)> {
    let trace = execute(cfg, inst, pr)?;
    let mut ctx = Ctx {
        cfg,
        inst,
        planned: pr,
        trace: &trace,
        seq: None,
    };
    let mut outcomes = Vec::with_capacity(cfg.checks.len());
    for c in &cfg.checks {
        outcomes.push(evaluate(&mut ctx, c)?);
    }
    let len = trajectory_length(&trace);
    let last = trace.last();
    let summary = RunSummary {
        index: pr.index,
        method: cfg.run.method,
        alpha: pr.alpha,
        last_n: last.map(|r| r.n).unwrap_or(0),
        terminated_by: trace.terminated_by,
        final_gap: last.and_then(|r| r.gap),
        length_total: len.total,
        length_cauchy_gap: len.cauchy_gap,
        tuning: pr.tuning,
        csv: format!("run_{}.csv", pr.index),
    };
    Ok((trace, summary, outcomes))
}

/// Build, run every sweep entry (in parallel) and evaluate all checks. Nothing is written.
pub fn execute_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let started = Instant::now();
    let inst = cfg.problem.build(cfg.seed)?;
    let planned = plan(cfg, &inst)?;
    info!("{}: {} run(s) on {}", cfg.name, planned.len(), inst.problem.name);
    let results: Vec<(Trace, RunSummary, Vec<CheckOutcome>)> = planned
        .par_iter()
        .map(|pr| run_one(cfg, &inst, pr))
        .collect::<Result<_>>()?;
    let mut traces = Vec::with_capacity(results.len());
    let mut runs = Vec::with_capacity(results.len());
    let mut checks = Vec::new();
    for (t, s, c) in results {
        traces.push(t);
        runs.push(s);
        checks.extend(c);
    }
    let report = ExperimentReport {
        name: cfg.name.clone(),
        seed: cfg.seed,
        problem: inst.problem.name.clone(),
        runs,
        checks,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok(ExperimentOutput {
        report,
        traces,
        instance: inst,
    })
}

/// `<out>/<name>`, honouring the config's own directory when `out` is `None`.
pub fn experiment_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    let base = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(default_out_dir);
    base.join(&cfg.name)
}

/// `$GROWTHFISTA_OUT`, else `./growthfista-out`.
pub fn default_out_dir() -> PathBuf {
    std::env::var_os("GROWTHFISTA_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("growthfista-out"))
}

/// Run and write `run_<i>.csv`, `run_<i>.meta.json`, `gap.svg`,
/// `summary.csv` and `report.json` under `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<ExperimentOutput> {
    let output = execute_experiment(cfg)?;
    write_outputs(cfg, &output, dir)?;
    Ok(output)
}

fn write_outputs(cfg: &ExperimentConfig, output: &ExperimentOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut plot = Vec::new();
    for (trace, summary) in output.traces.iter().zip(&output.report.runs) {
        emit_csv(trace, &dir.join(&summary.csv))?;
        let meta = RunMeta {
            config: cfg.clone(),
            run: summary.index,
            alpha: summary.alpha,
            step: trace.solver_config().map(|c| c.step),
        };
        fs::write(
            dir.join(format!("run_{}.meta.json", summary.index)),
            serde_json::to_string_pretty(&meta)? + "\n",
        )?;
        let pts: Vec<(f64, f64)> = series(trace, SeriesKind::Gap)
            .into_iter()
            .filter(|(_, v)| *v > 0.0)
            .collect();
        let label = match summary.alpha {
            Some(a) => format!("run {} (alpha = {a:.4})", summary.index),
            None => format!("run {}", summary.index),
        };
        if !pts.is_empty() {
            plot.push(PlotSeries {
                label,
                points: thin_log(&pts, 400),
            });
        }
    }
    if !plot.is_empty() {
        let mut guides: Vec<f64> = Vec::new();
        let gamma = gamma_of(&output.instance.problem).map(|g| g.0);
        for c in &cfg.checks {
            if let CheckKind::Rate {
                series: SeriesKind::Gap,
                exponent,
                ..
            } = c.kind
            {
                for s in &output.report.runs {
                    if let Some(e) = exponent.eval(s.alpha, gamma) {
                        if !guides.iter().any(|g| (g - e).abs() < 1e-9) {
                            guides.push(e);
                        }
                    }
                }
            }
        }
        emit_loglog_svg(&plot, &guides, &dir.join("gap.svg"))?;
    }
    fs::write(dir.join("summary.csv"), output::render_summary(&output.report))?;
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(&output.report)? + "\n",
    )?;
    Ok(())
}

/// Re-run the verifiers of the originating config on the iterates stored in
/// a trace CSV. Needs the `.meta.json` sidecar next to it.
pub fn verify_trace_csv(csv_path: &Path) -> Result<Vec<VerifierReport>> {
    let meta_path = csv_path.with_extension("meta.json");
    let meta: RunMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?)?;
    let table = read_csv(csv_path)?;
    let iterates = table.iterates();
    if iterates.is_empty() {
        return Err(Error::Csv(format!("{} has no iterate columns", csv_path.display())));
    }
    let inst = meta.config.problem.build(meta.config.seed)?;
    let p = &inst.problem;
    let set = p.solution_set.as_ref().ok_or(Error::MissingField("solution set"))?;
    let fs_ = p.f_star.ok_or(Error::MissingField("F*"))?;
    let gaps: Vec<f64> = iterates.iter().map(|x| p.objective(x) - fs_).collect();
    let mut q = SeqQuantities::from_parts(iterates, set, &gaps, p.lipschitz())?;
    q.step = meta.step;
    q.kappa = kappa_of(p);
    let alpha = meta.alpha.unwrap_or(3.0);
    let kinds: Vec<(VerifierKind, Option<f64>)> = meta
        .config
        .checks
        .iter()
        .filter_map(|c| match c.kind {
            CheckKind::Verifier { verifier, gamma } => Some((verifier, gamma)),
            _ => None,
        })
        .collect();
    kinds
        .into_iter()
        .map(|(k, g)| verifier_report(&q, p, k, alpha, g))
        .collect()
}
