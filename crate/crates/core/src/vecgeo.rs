//! Dense vectors and exact Euclidean projections onto simple closed convex sets.
//!
//! Every set here has a closed-form projection, so distances, projected
//! iterates and the inner products built from them are exact up to rounding.

use std::ops::{Add, Index, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking set membership in preconditions.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Self {
        Vector(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    /// The `i`-th canonical basis vector of `R^dim`.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[i] = 1.0;
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, c: f64) -> Vector {
        Vector(self.0.iter().map(|a| c * a).collect())
    }

    /// `self + c * other`
    pub fn axpy(&self, c: f64, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + c * b).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Vector {
        Vector(self.0.iter().copied().map(f).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|a| a.is_finite())
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected,
                found: self.dim(),
            })
        }
    }

    /// Standard Gaussian coordinates.
    pub fn random_normal(dim: usize, rng: &mut impl Rng) -> Vector {
        Vector((0..dim).map(|_| standard_normal(rng)).collect())
    }

    /// Uniform on the unit sphere.
    pub fn random_unit(dim: usize, rng: &mut impl Rng) -> Vector {
        loop {
            let v = Self::random_normal(dim, rng);
            let n = v.norm();
            if n > 1e-12 {
                return v.scaled(1.0 / n);
            }
        }
    }
}

/// Box–Muller; keeps the crate off `rand_distr`.
pub(crate) fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl<const N: usize> From<[f64; N]> for Vector {
    fn from(v: [f64; N]) -> Self {
        Vector(v.to_vec())
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for &Vector {
    type Output = Vector;
    fn add(self, rhs: &Vector) -> Vector {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &Vector {
    type Output = Vector;
    fn sub(self, rhs: &Vector) -> Vector {
        self.axpy(-1.0, rhs)
    }
}

impl Mul<&Vector> for f64 {
    type Output = Vector;
    fn mul(self, rhs: &Vector) -> Vector {
        rhs.scaled(self)
    }
}

impl Neg for &Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        self.scaled(-1.0)
    }
}

/// A closed convex set with an exact projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexSet {
    Box {
        lower: Vector,
        upper: Vector,
    },
    Ball {
        center: Vector,
        radius: f64,
    },
    /// `offset + span(directions)`, directions orthonormal. No directions means a single point.
    AffineSubspace {
        offset: Vector,
        directions: Vec<Vector>,
    },
    /// `{ x : <normal, x> <= offset }` with a unit normal.
    Halfspace {
        normal: Vector,
        offset: f64,
    },
}

impl ConvexSet {
    pub fn boxed(lower: Vector, upper: Vector) -> Result<Self> {
        upper.check_dim(lower.dim())?;
        if lower.dim() == 0 {
            return Err(Error::InvalidSet("box of dimension 0".into()));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidSet("box requires lower <= upper".into()));
        }
        Ok(ConvexSet::Box { lower, upper })
    }

    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidSet(format!("ball radius {radius} must be positive")));
        }
        if center.dim() == 0 {
            return Err(Error::InvalidSet("ball of dimension 0".into()));
        }
        Ok(ConvexSet::Ball { center, radius })
    }

    pub fn affine(offset: Vector, directions: Vec<Vector>) -> Result<Self> {
        let d = offset.dim();
        if d == 0 {
            return Err(Error::InvalidSet("affine subspace of dimension 0".into()));
        }
        for (i, u) in directions.iter().enumerate() {
            u.check_dim(d)?;
            for (j, v) in directions.iter().enumerate().take(i + 1) {
                let target = if i == j { 1.0 } else { 0.0 };
                if (u.dot(v) - target).abs() > 1e-10 {
                    return Err(Error::InvalidSet(format!("directions {j} and {i} are not orthonormal")));
                }
            }
        }
        Ok(ConvexSet::AffineSubspace { offset, directions })
    }

    /// Singleton `{p}`.
    pub fn point(p: Vector) -> Result<Self> {
        Self::affine(p, Vec::new())
    }

    pub fn halfspace(normal: Vector, offset: f64) -> Result<Self> {
        if (normal.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidSet("halfspace normal must have unit norm".into()));
        }
        Ok(ConvexSet::Halfspace { normal, offset })
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Box { lower, .. } => lower.dim(),
            ConvexSet::Ball { center, .. } => center.dim(),
            ConvexSet::AffineSubspace { offset, .. } => offset.dim(),
            ConvexSet::Halfspace { normal, .. } => normal.dim(),
        }
    }

    pub fn project(&self, x: &Vector) -> Result<Vector> {
        x.check_dim(self.dim())?;
        Ok(self.project_unchecked(x))
    }

    pub(crate) fn project_unchecked(&self, x: &Vector) -> Vector {
        match self {
            ConvexSet::Box { lower, upper } => Vector::new(
                x.iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .map(|(&xi, (&l, &u))| xi.clamp(l, u))
                    .collect(),
            ),
            ConvexSet::Ball { center, radius } => {
                let r = x - center;
                let n = r.norm();
                if n <= *radius {
                    x.clone()
                } else {
                    center.axpy(radius / n, &r)
                }
            }
            ConvexSet::AffineSubspace { offset, directions } => {
                let r = x - offset;
                directions.iter().fold(offset.clone(), |acc, u| acc.axpy(u.dot(&r), u))
            }
            ConvexSet::Halfspace { normal, offset } => {
                let excess = normal.dot(x) - offset;
                if excess <= 0.0 {
                    x.clone()
                } else {
                    x.axpy(-excess, normal)
                }
            }
        }
    }

    pub fn dist(&self, x: &Vector) -> Result<f64> {
        Ok(x.dist(&self.project(x)?))
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> Result<bool> {
        Ok(self.dist(x)? <= tol)
    }

    /// `<x - P(x), u - P(x)>` for some `u` in the set; nonpositive for a correct projection.
    pub fn projection_variational_check(&self, x: &Vector, u: &Vector) -> Result<f64> {
        u.check_dim(self.dim())?;
        let du = self.dist(u)?;
        if du > MEMBERSHIP_TOL {
            return Err(Error::NotInSet { distance: du });
        }
        let p = self.project(x)?;
        Ok((x - &p).dot(&(u - &p)))
    }

    /// A random member of the set. Unbounded sets are sampled in a window of
    /// half-width `spread` around their reference point.
    pub fn sample_point(&self, spread: f64, rng: &mut impl Rng) -> Vector {
        match self {
            ConvexSet::Box { lower, upper } => Vector::new(
                lower
                    .iter()
                    .zip(upper.iter())
                    .map(|(&l, &u)| if u > l { rng.gen_range(l..=u) } else { l })
                    .collect(),
            ),
            ConvexSet::Ball { center, radius } => {
                let d = center.dim();
                let dir = Vector::random_unit(d, rng);
                let r = radius * rng.gen::<f64>().powf(1.0 / d as f64);
                center.axpy(r, &dir)
            }
            ConvexSet::AffineSubspace { offset, directions } => directions
                .iter()
                .fold(offset.clone(), |acc, u| acc.axpy(rng.gen_range(-spread..=spread), u)),
            ConvexSet::Halfspace { normal, offset } => {
                let anchor = normal.scaled(*offset);
                let x = anchor.axpy(spread, &Vector::random_normal(normal.dim(), rng));
                self.project_unchecked(&x)
            }
        }
    }

    /// Whether the set is a single point.
    pub fn is_singleton(&self) -> bool {
        match self {
            ConvexSet::AffineSubspace { directions, .. } => directions.is_empty(),
            ConvexSet::Box { lower, upper } => lower == upper,
            _ => false,
        }
    }
}

/// Orthonormalise `vectors` by modified Gram–Schmidt, dropping near-dependent ones.
pub fn orthonormalize(vectors: &[Vector], tol: f64) -> Vec<Vector> {
    let mut basis: Vec<Vector> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for u in &basis {
                w = w.axpy(-u.dot(&w), u);
            }
        }
        let n = w.norm();
        if n > tol {
            basis.push(w.scaled(1.0 / n));
        }
    }
    basis
}
