use std::collections::BTreeMap;
use std::fs;

use growthfista::analysis::{fit_rate, gap_floor};
use growthfista::experiment::{
    builtin, builtin_names, execute_experiment, parse_csv, parse_flat, render_csv, render_loglog_svg, run_experiment,
    verify_trace_csv, ExperimentConfig, Method, PlotSeries, ProblemSpec, Verdict,
};
use growthfista::solvers::{IterateRecord, RunConfig, Termination, Trace};
use growthfista::{Algorithm, Error, SolverConfig, Vector};

const SMALL: &str = "\
# a short run
name=small
description=short FISTA run on a quadratic
seed=11
problem.kind=least_squares
problem.dim=6
problem.rank=4
problem.kappa=0.1

run.method=fista_cd
run.alpha=4,6
run.max_iter=300
check.gap_rate.kind=rate
check.gap_rate.series=gap
check.gap_rate.exponent=2a/3
check.control1.kind=control1
check.tech1.kind=verifier
check.tech1.verifier=tech1
";

fn field_of(err: Error) -> String {
    match err {
        Error::Config { field, .. } => field,
        other => panic!("expected a config error, got {other}"),
    }
}

#[test]
fn flat_config_parses() {
    let cfg = ExperimentConfig::from_flat(SMALL).unwrap();
    assert_eq!(cfg.name, "small");
    assert_eq!(cfg.seed, 11);
    assert_eq!(
        cfg.problem.spec,
        ProblemSpec::LeastSquares {
            dim: 6,
            rank: 4,
            kappa: 0.1
        }
    );
    assert_eq!(cfg.problem.dist0, 1.0);
    assert_eq!(cfg.run.method, Method::FistaCd);
    assert_eq!(cfg.run.alphas, vec![4.0, 6.0]);
    assert_eq!(cfg.run.max_iter, 300);
    let labels: Vec<&str> = cfg.checks.iter().map(|c| c.label.as_str()).collect();
    assert_eq!(labels, ["gap_rate", "control1", "tech1"]);
}

#[test]
fn json_matches_flat() {
    let json = r#"{
        "name": "small", "description": "short FISTA run on a quadratic", "seed": 11,
        "problem": {"kind": "least_squares", "dim": 6, "rank": 4, "kappa": 0.1},
        "run": {"method": "fista_cd", "alpha": [4, 6], "max_iter": 300},
        "check": {
            "gap_rate": {"kind": "rate", "series": "gap", "exponent": "2a/3"},
            "control1": {"kind": "control1"},
            "tech1": {"kind": "verifier", "verifier": "tech1"}
        }
    }"#;
    assert_eq!(
        ExperimentConfig::from_json(json).unwrap(),
        ExperimentConfig::from_flat(SMALL).unwrap()
    );
}

#[test]
fn builtins_round_trip_through_flat() {
    for name in builtin_names() {
        let cfg = builtin(name).unwrap();
        let again = ExperimentConfig::from_flat(&cfg.to_flat()).unwrap();
        assert_eq!(cfg, again, "{name}");
    }
}

#[test]
fn load_picks_format_by_extension() {
    let dir = tempfile::tempdir().unwrap();
    let flat = dir.path().join("small.cfg");
    fs::write(&flat, SMALL).unwrap();
    let json = dir.path().join("small.json");
    fs::write(&json, r#"{"name": "j", "problem": {"kind": "least_squares"}}"#).unwrap();
    assert_eq!(ExperimentConfig::load(&flat).unwrap().name, "small");
    // the JSON one is incomplete, so the error names a JSON-derived key
    assert_eq!(field_of(ExperimentConfig::load(&json).unwrap_err()), "problem.dim");
}

#[test]
fn errors_name_the_field() {
    let missing = SMALL.replace("problem.rank=4\n", "");
    assert_eq!(
        field_of(ExperimentConfig::from_flat(&missing).unwrap_err()),
        "problem.rank"
    );

    let bad_number = SMALL.replace("problem.kappa=0.1", "problem.kappa=tiny");
    assert_eq!(
        field_of(ExperimentConfig::from_flat(&bad_number).unwrap_err()),
        "problem.kappa"
    );

    let unknown = format!("{SMALL}run.colour=blue\n");
    assert_eq!(
        field_of(ExperimentConfig::from_flat(&unknown).unwrap_err()),
        "run.colour"
    );

    let bad_kind = SMALL.replace("least_squares", "quartic");
    assert_eq!(
        field_of(ExperimentConfig::from_flat(&bad_kind).unwrap_err()),
        "problem.kind"
    );

    let bad_exponent = SMALL.replace("exponent=2a/3", "exponent=a^2");
    assert!(ExperimentConfig::from_flat(&bad_exponent).is_err());
}

#[test]
fn flat_parser_rejects_duplicates_and_bare_lines() {
    assert!(parse_flat("a=1\na=2\n").is_err());
    assert!(parse_flat("a=1\njust words\n").is_err());
    let pairs = parse_flat("# c\n\n b = 2 \na=x=y\n").unwrap();
    assert_eq!(pairs, vec![("b".into(), "2".into()), ("a".into(), "x=y".into())]);
}

fn record(n: usize, gap: f64, dist: Option<f64>) -> IterateRecord {
    IterateRecord {
        n,
        gap: Some(gap),
        gmap_norm: 0.5 * gap,
        step_norm: 0.25 * gap,
        dist_star: dist,
        extras: BTreeMap::new(),
    }
}

fn tiny_trace(records: Vec<IterateRecord>) -> Trace {
    let p = growthfista::problems::make_constant(2, 0.0);
    Trace {
        problem: "tiny".into(),
        config: RunConfig::Solver(SolverConfig::new(Algorithm::Pgm, &p, 3)),
        records,
        final_x: Vector::zeros(2),
        terminated_by: Termination::Budget,
        iterates: None,
    }
}

#[test]
fn csv_has_header_plus_one_line_per_record() {
    let t = tiny_trace(vec![
        record(0, 1.0, Some(2.0)),
        record(1, 0.5, None),
        record(2, 0.25, Some(1.0)),
    ]);
    let text = render_csv(&t);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "n,gap,gmap_norm,step_norm,dist_star");
    // missing distance is an empty trailing field
    assert!(lines[2].ends_with(','), "{}", lines[2]);
    assert_eq!(lines[2].split(',').count(), 5);
    let table = parse_csv(&text).unwrap();
    assert_eq!(table.column("dist_star").unwrap(), vec![Some(2.0), None, Some(1.0)]);
}

#[test]
fn csv_round_trip_preserves_fit() {
    let recs: Vec<IterateRecord> = (1..=2000)
        .map(|n| record(n, 3.0 * (n as f64).powf(-2.5), None))
        .collect();
    let t = tiny_trace(recs);
    let direct = fit_rate(&t.gap_series(), None).unwrap();
    let table = parse_csv(&render_csv(&t)).unwrap();
    let reread = fit_rate(&table.series("n", "gap").unwrap(), None).unwrap();
    assert_eq!(direct.exponent_hat, reread.exponent_hat);
    assert!((direct.exponent_hat - 2.5).abs() < 1e-12);
}

#[test]
fn svg_is_well_formed_and_ordered() {
    let line: Vec<(f64, f64)> = (0..50)
        .map(|i| 10f64.powf(i as f64 / 10.0))
        .map(|x| (x, 7.0 / (x * x)))
        .collect();
    let other: Vec<(f64, f64)> = line.iter().map(|(x, y)| (*x, y * 0.1)).collect();
    let series = vec![
        PlotSeries {
            label: "b <first>".into(),
            points: line,
        },
        PlotSeries {
            label: "a".into(),
            points: other,
        },
    ];
    let svg = render_loglog_svg(&series, &[2.0]).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let polylines: Vec<_> = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("series"))
        .collect();
    assert_eq!(polylines.len(), 2);
    let guide = doc
        .descendants()
        .find(|n| n.attribute("class") == Some("guide"))
        .unwrap();
    let legend: Vec<&str> = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("legend"))
        .filter_map(|n| n.text())
        .collect();
    assert_eq!(legend, ["b <first>", "a", "slope -2.000"]);

    // the first series has slope -2 in data space, so it is parallel to the guide in pixels
    let pts: Vec<(f64, f64)> = polylines[0]
        .attribute("points")
        .unwrap()
        .split(' ')
        .map(|p| {
            let (x, y) = p.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect();
    let (a, b) = (pts[0], pts[pts.len() - 1]);
    let num = |k: &str| guide.attribute(k).unwrap().parse::<f64>().unwrap();
    let slope_series = (b.1 - a.1) / (b.0 - a.0);
    let slope_guide = (num("y2") - num("y1")) / (num("x2") - num("x1"));
    assert!(
        (slope_series - slope_guide).abs() < 0.01 * slope_guide.abs(),
        "{slope_series} {slope_guide}"
    );
    // and it passes through the anchor
    let t = (a.0 - num("x1")) / (num("x2") - num("x1"));
    assert!((num("y1") + t * (num("y2") - num("y1")) - a.1).abs() < 0.05);
}

#[test]
fn svg_rejects_nonpositive_data() {
    let bad = vec![PlotSeries {
        label: "s".into(),
        points: vec![(1.0, 1.0), (2.0, 0.0)],
    }];
    assert!(render_loglog_svg(&bad, &[]).is_err());
    assert!(render_loglog_svg(&[], &[]).is_err());
}

#[test]
fn empty_check_list_writes_only_traces() {
    let mut cfg = ExperimentConfig::from_flat(SMALL).unwrap();
    cfg.checks.clear();
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&cfg, dir.path()).unwrap();
    assert!(out.report.checks.is_empty());
    assert!(out.report.passed(true));
    let mut names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "gap.svg",
            "report.json",
            "run_0.csv",
            "run_0.meta.json",
            "run_1.csv",
            "run_1.meta.json",
            "summary.csv"
        ]
    );
    assert_eq!(
        fs::read_to_string(dir.path().join("summary.csv"))
            .unwrap()
            .lines()
            .count(),
        1
    );
}

#[test]
fn runs_are_reproducible() {
    let cfg = ExperimentConfig::from_flat(SMALL).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&cfg, a.path()).unwrap();
    run_experiment(&cfg, b.path()).unwrap();
    for f in ["run_0.csv", "run_1.csv", "report.json", "summary.csv", "gap.svg"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let mut other = cfg.clone();
    other.seed = 12;
    let c = tempfile::tempdir().unwrap();
    run_experiment(&other, c.path()).unwrap();
    assert_ne!(
        fs::read(a.path().join("run_0.csv")).unwrap(),
        fs::read(c.path().join("run_0.csv")).unwrap()
    );
}

#[test]
fn small_run_reports_checks_per_alpha() {
    let cfg = ExperimentConfig::from_flat(SMALL).unwrap();
    let out = execute_experiment(&cfg).unwrap();
    assert_eq!(out.traces.len(), 2);
    assert_eq!(out.report.checks.len(), 6);
    for c in out
        .report
        .by_label("control1")
        .into_iter()
        .chain(out.report.by_label("tech1"))
    {
        assert_eq!(c.verdict, Verdict::Pass, "{}", c.detail);
    }
    let floor = gap_floor(out.instance.problem.f_star.unwrap());
    assert!(out.report.runs.iter().all(|r| r.final_gap.unwrap() > -floor));
}

#[test]
fn stored_traces_can_be_reverified() {
    let mut cfg = ExperimentConfig::from_flat(SMALL).unwrap();
    cfg.run.alphas = vec![5.0];
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&cfg, dir.path()).unwrap();
    let stored = out.report.by_label("tech1")[0].verifier.clone().unwrap();
    let again = verify_trace_csv(&dir.path().join("run_0.csv")).unwrap();
    assert_eq!(again.len(), 1);
    assert_eq!(again[0].name, stored.name);
    assert!(again[0].pass);
    assert_eq!(again[0].checked, stored.checked);
    assert!(again[0].worst_violation <= 1e-10);
}

#[test]
fn reverifying_needs_iterates() {
    let mut cfg = ExperimentConfig::from_flat(SMALL).unwrap();
    cfg.checks.retain(|c| c.label != "tech1");
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&cfg, dir.path()).unwrap();
    assert!(verify_trace_csv(&dir.path().join("run_0.csv")).is_err());
}
