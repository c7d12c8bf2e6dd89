//! Built-in experiment configs, stored in the flat format.

use super::ExperimentConfig;
use crate::error::{Error, Result};

const THEOREM1_HOELDER: &str = "\
name=theorem1_hoelder
description=FISTA alpha=10 on K*dist(x,C)^4 in R^10, C a 2-dim affine subspace: gap O(n^-4), steps O(n^-2)
seed=1
problem.kind=hoelder_distance
problem.dim=10
problem.set_dim=2
problem.gamma=4
problem.k=1
problem.dist0=1
run.method=fista_cd
run.alpha=10
run.max_iter=100000
check.gap_rate.kind=rate
check.gap_rate.series=gap
check.gap_rate.exponent=2g/(g-2)
check.gap_rate.tolerance=0.3
check.step_rate.kind=rate
check.step_rate.series=step
check.step_rate.exponent=g/(g-2)
check.step_rate.tolerance=0.3
check.control1.kind=control1
check.convex.kind=convex_bound
check.descent.kind=verifier
check.descent.verifier=descent
check.tech2_claim2.kind=verifier
check.tech2_claim2.verifier=tech2_claim2
check.checkpoint.kind=verifier
check.checkpoint.verifier=checkpoint
check.flat_decrement.kind=verifier
check.flat_decrement.verifier=flat_decrement
check.flat_j_decrement.kind=verifier
check.flat_j_decrement.verifier=flat_j_decrement
check.lemma_geo.kind=verifier
check.lemma_geo.verifier=lemma_geo
check.signs.kind=verifier
check.signs.verifier=sign_facts
";

const THEOREM2_BOUND: &str = "\
name=theorem2_bound
description=Explicit non-asymptotic bound on least squares with kappa=1e-2, alpha=3+3/sqrt(2), checked from n >= 3 alpha/sqrt(kappa)
seed=2
problem.kind=least_squares
problem.dim=10
problem.rank=6
problem.kappa=0.01
problem.dist0=1
run.method=fista_cd
run.alpha=5.121320343559643
run.max_iter=100000
check.bound.kind=theorem2_bound
check.gap_rate.kind=rate
check.gap_rate.series=gap
check.gap_rate.exponent=2a/3
check.gap_rate.tolerance=0.3
check.control1.kind=control1
";

const THEOREM3_QUADRATIC: &str = "\
name=theorem3_quadratic
description=Rank-deficient least squares with kappa=1e-2: gap O(n^-2a/3), steps O(n^-a/3), finite length
seed=2
problem.kind=least_squares
problem.dim=10
problem.rank=6
problem.kappa=0.01
problem.dist0=1
run.method=fista_cd
run.alpha=5.121320343559643,6,9
run.max_iter=100000
check.gap_rate.kind=rate
check.gap_rate.series=gap
check.gap_rate.exponent=2a/3
check.gap_rate.tolerance=0.3
check.step_rate.kind=rate
check.step_rate.series=step
check.step_rate.exponent=a/3
check.step_rate.tolerance=0.3
check.length.kind=finite_length
check.length.ratio=1e-3
check.control1.kind=control1
check.convex.kind=convex_bound
check.tech1.kind=verifier
check.tech1.verifier=tech1
check.descent.kind=verifier
check.descent.verifier=descent
check.tech2_claim2.kind=verifier
check.tech2_claim2.verifier=tech2_claim2
check.energy_forms.kind=verifier
check.energy_forms.verifier=energy_forms
check.bn_expansion.kind=verifier
check.bn_expansion.verifier=bn_expansion
check.checkpoint.kind=verifier
check.checkpoint.verifier=checkpoint
check.lemma_ab.kind=verifier
check.lemma_ab.verifier=lemma_ab
check.flat_decrement.kind=verifier
check.flat_decrement.verifier=flat_decrement
check.flat_decrement.gamma=4
check.signs.kind=verifier
check.signs.verifier=sign_facts
";

const COROLLARY_STRONG_CONVERGENCE: &str = "\
name=corollary_strong_convergence
description=Any alpha > 5 on a Hoelder-growth problem: the trajectory has finite length
seed=3
problem.kind=hoelder_distance
problem.dim=10
problem.set_dim=3
problem.gamma=4
problem.k=1
problem.dist0=1
run.method=fista_cd
run.alpha=5.5,7,10
run.max_iter=100000
check.length.kind=finite_length
check.length.ratio=1e-3
check.convex.kind=convex_bound
check.control1.kind=control1
";

const AVD_QUADRATIC: &str = "\
name=avd_quadratic
description=AVD on least squares in R^10 with kappa=0.1: gap O(t^-2a/3) and the explicit continuous-time bound
seed=4
problem.kind=least_squares
problem.dim=10
problem.rank=6
problem.kappa=0.1
problem.dist0=1
run.method=avd
run.alpha=4,6
run.t_end=1000
run.dt=0.01
run.stride=10
check.gap_rate.kind=rate
check.gap_rate.series=gap
check.gap_rate.exponent=2a/3
check.gap_rate.tolerance=0.3
check.bound.kind=avd_bound
check.doubling.kind=step_doubling
check.doubling.tolerance=1e-6
check.control1.kind=control1
";

const AVD_HOELDER: &str = "\
name=avd_hoelder
description=AVD alpha=10 on K*dist(x,C)^4 in R^10: gap O(t^-4)
seed=5
problem.kind=hoelder_distance
problem.dim=10
problem.set_dim=2
problem.gamma=4
problem.k=1
problem.dist0=1
run.method=avd
run.alpha=10
run.t_end=1000
run.dt=0.005
run.stride=20
check.gap_rate.kind=rate
check.gap_rate.series=gap
check.gap_rate.exponent=2g/(g-2)
check.gap_rate.tolerance=0.3
check.doubling.kind=step_doubling
check.doubling.tolerance=1e-6
check.control1.kind=control1
";

const PGM_QUADRATIC: &str = "\
name=pgm_quadratic
description=Proximal gradient under quadratic growth: linear rate at least exp(-mu n/(4L))
seed=6
problem.kind=least_squares
problem.dim=10
problem.rank=6
problem.kappa=0.01
problem.dist0=1
run.method=pgm
run.max_iter=20000
check.linear.kind=linear_rate
check.linear.relax=0.2
check.control1.kind=control1
";

const PGM_HOELDER: &str = "\
name=pgm_hoelder
description=Proximal gradient on K*dist(x,C)^4: gap O(n^-g/(g-2)) = O(n^-2)
seed=7
problem.kind=hoelder_distance
problem.dim=10
problem.set_dim=2
problem.gamma=4
problem.k=1
problem.dist0=1
run.method=pgm
run.max_iter=100000
check.gap_rate.kind=rate
check.gap_rate.series=gap
check.gap_rate.exponent=g/(g-2)
check.gap_rate.tolerance=0.3
check.control1.kind=control1
";

const TUNING_DEMO: &str = "\
name=tuning_demo
description=FISTA with alpha_eps reaches an eps-solution within n_eps iterations (kappa=1e-2, eps=1e-6)
seed=8
problem.kind=least_squares
problem.dim=10
problem.rank=6
problem.kappa=0.01
problem.dist0=1
run.method=fista_cd
run.alpha=tuned
run.epsilon=1e-6
run.max_iter=100000
check.tuning.kind=tuning
check.control1.kind=control1
";

/// `(name, flat config)`
pub const BUILTINS: [(&str, &str); 9] = [
    ("theorem1_hoelder", THEOREM1_HOELDER),
    ("theorem2_bound", THEOREM2_BOUND),
    ("theorem3_quadratic", THEOREM3_QUADRATIC),
    ("corollary_strong_convergence", COROLLARY_STRONG_CONVERGENCE),
    ("avd_quadratic", AVD_QUADRATIC),
    ("avd_hoelder", AVD_HOELDER),
    ("pgm_quadratic", PGM_QUADRATIC),
    ("pgm_hoelder", PGM_HOELDER),
    ("tuning_demo", TUNING_DEMO),
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTINS.iter().map(|(n, _)| *n).collect()
}

pub fn builtin(name: &str) -> Result<ExperimentConfig> {
    let (_, text) = BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::config("name", format!("no built-in config `{name}`")))?;
    ExperimentConfig::from_flat(text)
}
