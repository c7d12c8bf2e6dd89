//! Composite problems `F = f + h` and a small zoo with certified growth and
//! analytically known (generally non-unique) minimizer sets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{random_orthonormal_basis, symmetric_eigen, Matrix};
use crate::vecgeo::{ConvexSet, Vector, MEMBERSHIP_TOL};

/// Value returned for `h(x)` outside its domain. Large enough to dominate any
/// objective met in practice, small enough that sums stay finite.
pub const INFEASIBLE: f64 = 1e300;

/// Smooth part `f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Smooth {
    /// `½‖Ax − b‖²`
    LeastSquares {
        a: Matrix,
        b: Vector,
    },
    /// `K·dist(x, C)^γ`
    HoelderDistance {
        set: ConvexSet,
        gamma: f64,
        k: f64,
    },
    Constant {
        dim: usize,
        value: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothPart {
    pub kind: Smooth,
    pub lipschitz: f64,
    /// The gradient is certified `lipschitz`-Lipschitz on `{x : dist(x, X*) <= r}`.
    pub validity_radius: Option<f64>,
}

impl SmoothPart {
    pub fn value(&self, x: &Vector) -> f64 {
        match &self.kind {
            Smooth::LeastSquares { a, b } => 0.5 * (&a.matvec(x) - b).norm_sq(),
            Smooth::HoelderDistance { set, gamma, k } => {
                let d = x.dist(&set.project_unchecked(x));
                k * d.powf(*gamma)
            }
            Smooth::Constant { value, .. } => *value,
        }
    }

    pub fn grad(&self, x: &Vector) -> Vector {
        match &self.kind {
            Smooth::LeastSquares { a, b } => a.matvec_t(&(&a.matvec(x) - b)),
            Smooth::HoelderDistance { set, gamma, k } => {
                let r = x - &set.project_unchecked(x);
                let d = r.norm();
                if d == 0.0 {
                    Vector::zeros(x.dim())
                } else {
                    r.scaled(k * gamma * d.powf(gamma - 2.0))
                }
            }
            Smooth::Constant { dim, .. } => Vector::zeros(*dim),
        }
    }
}

/// Nonsmooth part `h` with its proximal map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProxPart {
    Zero,
    /// `λ‖x‖₁`
    L1 {
        lambda: f64,
    },
    /// Indicator of a convex set; its prox is the projection.
    Indicator {
        set: ConvexSet,
    },
}

impl ProxPart {
    pub fn value(&self, x: &Vector) -> f64 {
        match self {
            ProxPart::Zero => 0.0,
            ProxPart::L1 { lambda } => lambda * x.iter().map(|v| v.abs()).sum::<f64>(),
            ProxPart::Indicator { set } => {
                if x.dist(&set.project_unchecked(x)) <= MEMBERSHIP_TOL {
                    0.0
                } else {
                    INFEASIBLE
                }
            }
        }
    }

    /// `argmin_y s·h(y) + ½‖x − y‖²`
    pub fn prox(&self, step: f64, x: &Vector) -> Vector {
        match self {
            ProxPart::Zero => x.clone(),
            ProxPart::L1 { lambda } => {
                let t = step * lambda;
                x.map(|v| soft_threshold(v, t))
            }
            ProxPart::Indicator { set } => set.project_unchecked(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ProxPart::Zero)
    }
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrowthKind {
    /// `(μ/2)·d(x, X*)² <= F(x) − F*`
    Quadratic {
        mu: f64,
    },
    /// `K·d(x, X*)^γ <= F(x) − F*`, `γ > 2`
    Hoelder {
        gamma: f64,
        k: f64,
    },
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrowthScope {
    Local { radius: f64 },
    Global,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthCertificate {
    pub kind: GrowthKind,
    pub scope: GrowthScope,
}

impl GrowthCertificate {
    pub const NONE: GrowthCertificate = GrowthCertificate {
        kind: GrowthKind::None,
        scope: GrowthScope::Global,
    };

    /// Lower bound on `F(x) − F*` at distance `d` from `X*`.
    pub fn lower_bound(&self, d: f64) -> Option<f64> {
        match self.kind {
            GrowthKind::Quadratic { mu } => Some(0.5 * mu * d * d),
            GrowthKind::Hoelder { gamma, k } => Some(k * d.powf(gamma)),
            GrowthKind::None => None,
        }
    }

    pub fn mu(&self) -> Option<f64> {
        match self.kind {
            GrowthKind::Quadratic { mu } => Some(mu),
            _ => None,
        }
    }

    pub fn is_global(&self) -> bool {
        matches!(self.scope, GrowthScope::Global)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositeProblem {
    pub name: String,
    pub f: SmoothPart,
    pub h: ProxPart,
    pub solution_set: Option<ConvexSet>,
    pub f_star: Option<f64>,
    pub growth: GrowthCertificate,
    pub coercive: bool,
}

impl CompositeProblem {
    pub fn dim(&self) -> usize {
        match &self.f.kind {
            Smooth::LeastSquares { a, .. } => a.cols(),
            Smooth::HoelderDistance { set, .. } => set.dim(),
            Smooth::Constant { dim, .. } => *dim,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        self.f.lipschitz
    }

    pub fn eval_f(&self, x: &Vector) -> Result<f64> {
        x.check_dim(self.dim())?;
        Ok(self.objective(x))
    }

    /// `F(x)` without the dimension check.
    pub fn objective(&self, x: &Vector) -> f64 {
        let hv = self.h.value(x);
        if hv >= INFEASIBLE {
            INFEASIBLE
        } else {
            self.f.value(x) + hv
        }
    }

    pub fn grad_f(&self, x: &Vector) -> Vector {
        self.f.grad(x)
    }

    /// Forward–backward step `prox_{sh}(x − s∇f(x))`.
    pub fn forward_backward(&self, step: f64, x: &Vector) -> Vector {
        self.h.prox(step, &x.axpy(-step, &self.f.grad(x)))
    }

    /// `F(x) − F*` when `F*` is known.
    pub fn gap(&self, x: &Vector) -> Option<f64> {
        self.f_star.map(|fs| self.objective(x) - fs)
    }

    pub fn dist_star(&self, x: &Vector) -> Option<f64> {
        self.solution_set.as_ref().map(|s| x.dist(&s.project_unchecked(x)))
    }

    pub fn project_star(&self, x: &Vector) -> Option<Vector> {
        self.solution_set.as_ref().map(|s| s.project_unchecked(x))
    }

    /// Whether `x` lies where the Lipschitz constant is certified.
    pub fn in_certified_region(&self, x: &Vector) -> bool {
        match (self.f.validity_radius, self.dist_star(x)) {
            (Some(r), Some(d)) => d <= r,
            _ => true,
        }
    }

    pub fn with_f_star(mut self, f_star: f64) -> Self {
        self.f_star = Some(f_star);
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Lowest objective found by proximal gradient with `s = 1/L` from a few
    /// deterministic starts, and the point achieving it.
    pub fn estimate_optimum(&self, iters: usize) -> (f64, Vector) {
        let d = self.dim();
        let step = 1.0 / self.lipschitz();
        let mut starts = vec![Vector::zeros(d), Vector::new(vec![1.0; d])];
        if let Smooth::LeastSquares { a, b } = &self.f.kind {
            starts.push(a.matvec_t(b).scaled(step));
        } else {
            starts.push(Vector::new(vec![-1.0; d]));
        }
        let mut best = (f64::INFINITY, Vector::zeros(d));
        for x0 in starts {
            let mut x = x0;
            let mut fx = self.objective(&x);
            let mut local_best = (fx, x.clone());
            for _ in 0..iters {
                x = self.forward_backward(step, &x);
                fx = self.objective(&x);
                if fx < local_best.0 {
                    local_best = (fx, x.clone());
                }
            }
            if local_best.0 < best.0 {
                best = local_best;
            }
        }
        best
    }
}

/// `½‖Ax − b‖²` with `b` in the range of `A`; the minimizers form an affine subspace.
pub fn make_rankdef_least_squares(rows: &[Vector], b: Vector) -> Result<CompositeProblem> {
    let a = Matrix::from_rows(rows)?;
    b.check_dim(a.rows())?;
    let eig = symmetric_eigen(&a.gram())?;
    let lmax = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    if lmax <= 0.0 {
        return Err(Error::param("A", "matrix is zero"));
    }
    let cutoff = 1e-10 * lmax;
    let atb = a.matvec_t(&b);
    let mut particular = Vector::zeros(a.cols());
    let mut null_dirs = Vec::new();
    let mut mu = f64::INFINITY;
    for (lam, v) in eig.values.iter().zip(&eig.vectors) {
        if *lam > cutoff {
            particular = particular.axpy(v.dot(&atb) / lam, v);
            mu = mu.min(*lam);
        } else {
            null_dirs.push(v.clone());
        }
    }
    let residual = (&a.matvec(&particular) - &b).norm();
    if residual > 1e-9 * (1.0 + b.norm()) {
        return Err(Error::NotInRange { residual });
    }
    let solution_set = ConvexSet::affine(particular, null_dirs)?;
    Ok(CompositeProblem {
        name: "least_squares".into(),
        f: SmoothPart {
            kind: Smooth::LeastSquares { a, b },
            lipschitz: lmax,
            validity_radius: None,
        },
        h: ProxPart::Zero,
        solution_set: Some(solution_set),
        f_star: Some(0.0),
        growth: GrowthCertificate {
            kind: GrowthKind::Quadratic { mu },
            scope: GrowthScope::Global,
        },
        coercive: false,
    })
}

/// Least squares in `R^dim` with `L = 1`, `μ = kappa` and a solution set of
/// dimension `dim − rank`, randomly rotated.
pub fn make_conditioned_least_squares(dim: usize, rank: usize, kappa: f64, seed: u64) -> Result<CompositeProblem> {
    if rank == 0 || rank > dim {
        return Err(Error::param("rank", format!("need 1 <= rank <= dim, got {rank}")));
    }
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::param("kappa", "must lie in (0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = random_orthonormal_basis(dim, &mut rng);
    // singular values sqrt(eig), eigenvalues log-spaced between kappa and 1
    let rows: Vec<Vector> = (0..rank)
        .map(|i| {
            let t = if rank == 1 { 1.0 } else { i as f64 / (rank - 1) as f64 };
            let eig = kappa.powf(1.0 - t);
            basis[i].scaled(eig.sqrt())
        })
        .collect();
    let a = Matrix::from_rows(&rows)?;
    let x_true = Vector::random_normal(dim, &mut rng);
    let b = a.matvec(&x_true);
    Ok(make_rankdef_least_squares(&rows, b)?.with_name(format!("least_squares(d={dim},rank={rank},kappa={kappa})")))
}

/// `F(x) = K·dist(x, C)^γ`. The Lipschitz constant is certified on `{dist <= R}`.
pub fn make_hoelder_distance(set: ConvexSet, gamma: f64, k: f64, radius: f64) -> Result<CompositeProblem> {
    if !(gamma > 2.0) {
        return Err(Error::param("gamma", format!("must exceed 2, got {gamma}")));
    }
    if !(k > 0.0) {
        return Err(Error::param("K", "must be positive"));
    }
    if !(radius > 0.0) {
        return Err(Error::param("R", "must be positive"));
    }
    let lipschitz = k * gamma * (gamma - 1.0) * radius.powf(gamma - 2.0);
    Ok(CompositeProblem {
        name: format!("hoelder_distance(gamma={gamma},K={k})"),
        f: SmoothPart {
            kind: Smooth::HoelderDistance {
                set: set.clone(),
                gamma,
                k,
            },
            lipschitz,
            validity_radius: Some(radius),
        },
        h: ProxPart::Zero,
        solution_set: Some(set),
        f_star: Some(0.0),
        growth: GrowthCertificate {
            kind: GrowthKind::Hoelder { gamma, k },
            scope: GrowthScope::Global,
        },
        coercive: true,
    })
}

/// `½‖Ax − b‖² + λ‖x‖₁`. `F*` and `X*` are unknown until estimated.
pub fn make_lasso(rows: &[Vector], b: Vector, lambda: f64) -> Result<CompositeProblem> {
    if !(lambda > 0.0) {
        return Err(Error::param("lambda", "must be positive"));
    }
    let a = Matrix::from_rows(rows)?;
    b.check_dim(a.rows())?;
    let lmax = symmetric_eigen(&a.gram())?.values.last().copied().unwrap_or(0.0);
    if lmax <= 0.0 {
        return Err(Error::param("A", "matrix is zero"));
    }
    Ok(CompositeProblem {
        name: format!("lasso(lambda={lambda})"),
        f: SmoothPart {
            kind: Smooth::LeastSquares { a, b },
            lipschitz: lmax,
            validity_radius: None,
        },
        h: ProxPart::L1 { lambda },
        solution_set: None,
        f_star: None,
        growth: GrowthCertificate::NONE,
        coercive: true,
    })
}

/// LASSO with `F*` filled in from a long proximal-gradient run, less a small guard.
pub fn with_estimated_f_star(p: CompositeProblem, iters: usize) -> (CompositeProblem, Vector) {
    let (fs, x) = p.estimate_optimum(iters);
    let guarded = fs - 1e-13 * fs.abs();
    (p.with_f_star(guarded), x)
}

/// Constant objective; every point is a minimizer.
pub fn make_constant(dim: usize, value: f64) -> CompositeProblem {
    CompositeProblem {
        name: "constant".into(),
        f: SmoothPart {
            kind: Smooth::Constant { dim, value },
            lipschitz: 0.0,
            validity_radius: None,
        },
        h: ProxPart::Zero,
        solution_set: None,
        f_star: Some(value),
        growth: GrowthCertificate::NONE,
        coercive: false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    /// `min (F(x) − F*) / bound(d(x, X*))` over the samples.
    pub min_ratio: f64,
    pub samples: usize,
}

/// Sample the certificate's scope and report the worst ratio of the actual
/// gap to the certified lower bound.
pub fn check_growth(p: &CompositeProblem, samples: usize, rng_seed: u64) -> Result<GrowthReport> {
    use rand::Rng;
    let set = p.solution_set.as_ref().ok_or(Error::MissingField("solution set"))?;
    let f_star = p.f_star.ok_or(Error::MissingField("F*"))?;
    if matches!(p.growth.kind, GrowthKind::None) {
        return Err(Error::MissingField("growth certificate"));
    }
    let mut radius = match p.growth.scope {
        GrowthScope::Local { radius } => radius,
        GrowthScope::Global => 5.0,
    };
    if let Some(r) = p.f.validity_radius {
        radius = radius.min(r);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let d = p.dim();
    let mut min_ratio = f64::INFINITY;
    let mut used = 0;
    while used < samples {
        let anchor = set.sample_point(radius, &mut rng);
        let x = anchor.axpy(radius * rng.gen::<f64>(), &Vector::random_unit(d, &mut rng));
        let dist = set.dist(&x)?;
        let bound = p.growth.lower_bound(dist).unwrap_or(0.0);
        if bound <= 1e-300 || dist > radius {
            continue;
        }
        min_ratio = min_ratio.min((p.objective(&x) - f_star) / bound);
        used += 1;
    }
    Ok(GrowthReport {
        min_ratio,
        samples: used,
    })
}
