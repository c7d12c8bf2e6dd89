//! Flat `key=value` configs with dotted sections, and a JSON front end that
//! flattens into the same keys.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde_json::Value;

use super::{
    CheckKind, CheckSpec, ExperimentConfig, ExponentRule, Method, ProblemSetup, ProblemSpec, RunSpec, SeriesKind,
    VerifierKind,
};
use crate::error::{Error, Result};

/// Ordered `(key, value)` pairs. Blank lines and lines starting with `#` are
/// skipped; duplicate keys are an error.
pub fn parse_flat(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}", i + 1), "expected key=value"))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::config(format!("line {}", i + 1), "empty key"));
        }
        if out.iter().any(|(e, _)| e == k) {
            return Err(Error::config(k, "given twice"));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

struct Fields {
    map: BTreeMap<String, String>,
    order: Vec<String>,
}

impl Fields {
    fn new(pairs: Vec<(String, String)>) -> Self {
        let order = pairs.iter().map(|(k, _)| k.clone()).collect();
        Fields {
            map: pairs.into_iter().collect(),
            order,
        }
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn require(&mut self, key: &str) -> Result<String> {
        self.take(key).ok_or_else(|| Error::config(key, "missing"))
    }

    fn get<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<T>()
                .map(Some)
                .map_err(|e| Error::config(key, format!("cannot parse `{s}`: {e}"))),
        }
    }

    fn req<T: FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| Error::config(key, "missing"))
    }

    /// Check labels in order of first appearance.
    fn check_labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = Vec::new();
        for k in &self.order {
            if let Some(rest) = k.strip_prefix("check.") {
                if let Some((label, _)) = rest.split_once('.') {
                    if !labels.iter().any(|l| l == label) {
                        labels.push(label.to_string());
                    }
                }
            }
        }
        labels
    }

    fn finish(self) -> Result<()> {
        match self.order.iter().find(|k| self.map.contains_key(*k)) {
            Some(k) => Err(Error::config(k.clone(), "unknown field")),
            None => Ok(()),
        }
    }
}

fn parse_method(s: &str) -> Result<Method> {
    Ok(match s {
        "fista_cd" => Method::FistaCd,
        "fista_nesterov" => Method::FistaNesterov,
        "pgm" => Method::Pgm,
        "v_fista" => Method::VFista,
        "avd" => Method::Avd,
        _ => return Err(Error::config("run.method", format!("unknown method `{s}`"))),
    })
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::FistaCd => "fista_cd",
        Method::FistaNesterov => "fista_nesterov",
        Method::Pgm => "pgm",
        Method::VFista => "v_fista",
        Method::Avd => "avd",
    }
}

fn parse_exponent(key: &str, s: &str) -> Result<ExponentRule> {
    Ok(match s.replace(' ', "").as_str() {
        "2a/3" => ExponentRule::TwoThirdsAlpha,
        "a/3" => ExponentRule::ThirdAlpha,
        "2g/(g-2)" => ExponentRule::HoelderGap,
        "g/(g-2)" => ExponentRule::HoelderStep,
        other => ExponentRule::Value(other.parse().map_err(|_| {
            Error::config(
                key,
                format!("expected a number or one of 2a/3, a/3, 2g/(g-2), g/(g-2); got `{s}`"),
            )
        })?),
    })
}

fn exponent_text(e: ExponentRule) -> String {
    match e {
        ExponentRule::TwoThirdsAlpha => "2a/3".into(),
        ExponentRule::ThirdAlpha => "a/3".into(),
        ExponentRule::HoelderGap => "2g/(g-2)".into(),
        ExponentRule::HoelderStep => "g/(g-2)".into(),
        ExponentRule::Value(v) => format!("{v}"),
    }
}

fn parse_verifier(key: &str, s: &str) -> Result<VerifierKind> {
    Ok(match s {
        "tech1" => VerifierKind::Tech1,
        "descent" => VerifierKind::Descent,
        "tech2_claim2" => VerifierKind::Tech2Claim2,
        "energy_forms" => VerifierKind::EnergyForms,
        "bn_expansion" => VerifierKind::BnExpansion,
        "sign_facts" => VerifierKind::SignFacts,
        "checkpoint" => VerifierKind::Checkpoint,
        "lemma_ab" => VerifierKind::LemmaAb,
        "flat_decrement" => VerifierKind::FlatDecrement,
        "flat_j_decrement" => VerifierKind::FlatJDecrement,
        "lemma_geo" => VerifierKind::LemmaGeo,
        _ => return Err(Error::config(key, format!("unknown verifier `{s}`"))),
    })
}

fn verifier_name(v: VerifierKind) -> &'static str {
    match v {
        VerifierKind::Tech1 => "tech1",
        VerifierKind::Descent => "descent",
        VerifierKind::Tech2Claim2 => "tech2_claim2",
        VerifierKind::EnergyForms => "energy_forms",
        VerifierKind::BnExpansion => "bn_expansion",
        VerifierKind::SignFacts => "sign_facts",
        VerifierKind::Checkpoint => "checkpoint",
        VerifierKind::LemmaAb => "lemma_ab",
        VerifierKind::FlatDecrement => "flat_decrement",
        VerifierKind::FlatJDecrement => "flat_j_decrement",
        VerifierKind::LemmaGeo => "lemma_geo",
    }
}

fn parse_problem(f: &mut Fields) -> Result<ProblemSetup> {
    let kind = f.require("problem.kind")?;
    let spec = match kind.as_str() {
        "least_squares" => ProblemSpec::LeastSquares {
            dim: f.req("problem.dim")?,
            rank: f.req("problem.rank")?,
            kappa: f.req("problem.kappa")?,
        },
        "hoelder_distance" => ProblemSpec::HoelderDistance {
            dim: f.req("problem.dim")?,
            set_dim: f.req("problem.set_dim")?,
            gamma: f.req("problem.gamma")?,
            k: f.get("problem.k")?.unwrap_or(1.0),
        },
        "lasso" => ProblemSpec::Lasso {
            rows: f.req("problem.rows")?,
            cols: f.req("problem.cols")?,
            lambda: f.req("problem.lambda")?,
            f_star_iters: f.get("problem.f_star_iters")?.unwrap_or(1_000_000),
        },
        other => return Err(Error::config("problem.kind", format!("unknown zoo problem `{other}`"))),
    };
    Ok(ProblemSetup {
        spec,
        dist0: f.get("problem.dist0")?.unwrap_or(1.0),
    })
}

fn parse_run(f: &mut Fields) -> Result<RunSpec> {
    let d = RunSpec::default();
    let method = parse_method(&f.require("run.method")?)?;
    let (alphas, tuned) = match f.take("run.alpha") {
        None => (if method.uses_alpha() { d.alphas } else { Vec::new() }, false),
        Some(s) if s.trim() == "tuned" => (Vec::new(), true),
        Some(s) => (
            s.split(',')
                .map(|a| {
                    a.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::config("run.alpha", format!("cannot parse `{}`", a.trim())))
                })
                .collect::<Result<Vec<f64>>>()?,
            false,
        ),
    };
    Ok(RunSpec {
        method,
        alphas,
        tuned_alpha: tuned,
        max_iter: f.get("run.max_iter")?.unwrap_or(d.max_iter),
        stride: f.get("run.stride")?.unwrap_or(d.stride),
        epsilon: f.get("run.epsilon")?.unwrap_or(d.epsilon),
        momentum: f.get("run.momentum")?,
        t_end: f.get("run.t_end")?.unwrap_or(d.t_end),
        dt: f.get("run.dt")?,
        verify_iters: f.get("run.verify_iters")?.unwrap_or(d.verify_iters),
    })
}

fn parse_check(f: &mut Fields, label: &str) -> Result<CheckSpec> {
    let key = |s: &str| format!("check.{label}.{s}");
    let kind_key = key("kind");
    let kind = f.require(&kind_key)?;
    let kind = match kind.as_str() {
        "rate" => {
            let series_key = key("series");
            let series = match f.take(&series_key).as_deref() {
                None | Some("gap") => SeriesKind::Gap,
                Some("step") => SeriesKind::Step,
                Some(other) => {
                    return Err(Error::config(
                        series_key,
                        format!("expected gap or step, got `{other}`"),
                    ))
                }
            };
            let exp_key = key("exponent");
            let exponent = parse_exponent(&exp_key, &f.require(&exp_key)?)?;
            CheckKind::Rate {
                series,
                exponent,
                tolerance: f.get(&key("tolerance"))?.unwrap_or(0.3),
            }
        }
        "linear_rate" => CheckKind::LinearRate {
            relax: f.get(&key("relax"))?.unwrap_or(0.2),
        },
        "verifier" => {
            let vkey = key("verifier");
            CheckKind::Verifier {
                verifier: parse_verifier(&vkey, &f.require(&vkey)?)?,
                gamma: f.get(&key("gamma"))?,
            }
        }
        "control1" => CheckKind::Control1 {
            tolerance: f.get(&key("tolerance"))?.unwrap_or(1e-9),
        },
        "finite_length" => CheckKind::FiniteLength {
            ratio: f.get(&key("ratio"))?.unwrap_or(1e-3),
        },
        "convex_bound" => CheckKind::ConvexBound {
            tolerance: f.get(&key("tolerance"))?.unwrap_or(1e-9),
        },
        "theorem2_bound" => CheckKind::Theorem2Bound,
        "tuning" => CheckKind::Tuning,
        "avd_bound" => CheckKind::AvdBound,
        "step_doubling" => CheckKind::StepDoubling {
            tolerance: f.get(&key("tolerance"))?.unwrap_or(1e-6),
        },
        other => return Err(Error::config(kind_key, format!("unknown check kind `{other}`"))),
    };
    Ok(CheckSpec {
        label: label.to_string(),
        kind,
    })
}

fn from_pairs(pairs: Vec<(String, String)>) -> Result<ExperimentConfig> {
    let mut f = Fields::new(pairs);
    let name = f.require("name")?;
    let description = f.take("description").unwrap_or_default();
    let seed = f.get("seed")?.unwrap_or(0);
    let out_dir = f.take("out").map(PathBuf::from);
    let problem = parse_problem(&mut f)?;
    let run = parse_run(&mut f)?;
    let mut checks = Vec::new();
    for label in f.check_labels() {
        checks.push(parse_check(&mut f, &label)?);
    }
    f.finish()?;
    let cfg = ExperimentConfig {
        name,
        description,
        seed,
        problem,
        run,
        checks,
        out_dir,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub(crate) fn from_flat(text: &str) -> Result<ExperimentConfig> {
    from_pairs(parse_flat(text)?)
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) -> Result<()> {
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out)?;
            }
        }
        Value::Array(items) => {
            let parts: Vec<String> = items
                .iter()
                .map(|i| match i {
                    Value::Number(n) => Ok(n.to_string()),
                    Value::String(s) => Ok(s.clone()),
                    _ => Err(Error::config(prefix, "arrays may only hold numbers or strings")),
                })
                .collect::<Result<_>>()?;
            out.push((prefix.to_string(), parts.join(",")));
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Number(n) => out.push((prefix.to_string(), n.to_string())),
        Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        Value::Null => {}
    }
    Ok(())
}

/// Same keys as the flat format, nested as objects; lists become arrays.
pub(crate) fn from_json(text: &str) -> Result<ExperimentConfig> {
    let v: Value = serde_json::from_str(text)?;
    if !v.is_object() {
        return Err(Error::config("<root>", "expected a JSON object"));
    }
    let mut pairs = Vec::new();
    flatten("", &v, &mut pairs)?;
    from_pairs(pairs)
}

pub(crate) fn to_flat(c: &ExperimentConfig) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k}={v}");
    };
    kv("name", c.name.clone());
    if !c.description.is_empty() {
        kv("description", c.description.clone());
    }
    kv("seed", c.seed.to_string());
    if let Some(o) = &c.out_dir {
        kv("out", o.display().to_string());
    }
    match &c.problem.spec {
        ProblemSpec::LeastSquares { dim, rank, kappa } => {
            kv("problem.kind", "least_squares".into());
            kv("problem.dim", dim.to_string());
            kv("problem.rank", rank.to_string());
            kv("problem.kappa", format!("{kappa:?}"));
        }
        ProblemSpec::HoelderDistance { dim, set_dim, gamma, k } => {
            kv("problem.kind", "hoelder_distance".into());
            kv("problem.dim", dim.to_string());
            kv("problem.set_dim", set_dim.to_string());
            kv("problem.gamma", format!("{gamma:?}"));
            kv("problem.k", format!("{k:?}"));
        }
        ProblemSpec::Lasso {
            rows,
            cols,
            lambda,
            f_star_iters,
        } => {
            kv("problem.kind", "lasso".into());
            kv("problem.rows", rows.to_string());
            kv("problem.cols", cols.to_string());
            kv("problem.lambda", format!("{lambda:?}"));
            kv("problem.f_star_iters", f_star_iters.to_string());
        }
    }
    kv("problem.dist0", format!("{:?}", c.problem.dist0));
    let r = &c.run;
    kv("run.method", method_name(r.method).into());
    if r.tuned_alpha {
        kv("run.alpha", "tuned".into());
    } else if !r.alphas.is_empty() {
        let a: Vec<String> = r.alphas.iter().map(|a| format!("{a:?}")).collect();
        kv("run.alpha", a.join(","));
    }
    kv("run.max_iter", r.max_iter.to_string());
    kv("run.stride", r.stride.to_string());
    kv("run.epsilon", format!("{:?}", r.epsilon));
    if let Some(m) = r.momentum {
        kv("run.momentum", format!("{m:?}"));
    }
    kv("run.t_end", format!("{:?}", r.t_end));
    if let Some(dt) = r.dt {
        kv("run.dt", format!("{dt:?}"));
    }
    kv("run.verify_iters", r.verify_iters.to_string());
    for ch in &c.checks {
        let p = format!("check.{}", ch.label);
        kv(&format!("{p}.kind"), ch.kind.tag().into());
        match &ch.kind {
            CheckKind::Rate {
                series,
                exponent,
                tolerance,
            } => {
                let s = match series {
                    SeriesKind::Gap => "gap",
                    SeriesKind::Step => "step",
                };
                kv(&format!("{p}.series"), s.into());
                kv(&format!("{p}.exponent"), exponent_text(*exponent));
                kv(&format!("{p}.tolerance"), format!("{tolerance:?}"));
            }
            CheckKind::LinearRate { relax } => kv(&format!("{p}.relax"), format!("{relax:?}")),
            CheckKind::Verifier { verifier, gamma } => {
                kv(&format!("{p}.verifier"), verifier_name(*verifier).into());
                if let Some(g) = gamma {
                    kv(&format!("{p}.gamma"), format!("{g:?}"));
                }
            }
            CheckKind::Control1 { tolerance }
            | CheckKind::ConvexBound { tolerance }
            | CheckKind::StepDoubling { tolerance } => kv(&format!("{p}.tolerance"), format!("{tolerance:?}")),
            CheckKind::FiniteLength { ratio } => kv(&format!("{p}.ratio"), format!("{ratio:?}")),
            CheckKind::Theorem2Bound | CheckKind::Tuning | CheckKind::AvdBound => {}
        }
    }
    s
}
