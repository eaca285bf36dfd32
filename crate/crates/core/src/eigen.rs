//! Dirichlet eigenpairs of `-Δ` on a rectangle.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DOMAIN_SLACK: f64 = 1e-12;

/// Axis-aligned rectangle `(x_lo, x_hi) × (y_lo, y_hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectDomain {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl RectDomain {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Result<Self> {
        let d = Self { x_lo, x_hi, y_lo, y_hi };
        d.validate()?;
        Ok(d)
    }

    /// `(0, π)²`, the square used in all the experiments.
    pub fn pi_square() -> Self {
        Self {
            x_lo: 0.0,
            x_hi: PI,
            y_lo: 0.0,
            y_hi: PI,
        }
    }

    /// The reference square `(-1, 1)²`.
    pub fn reference() -> Self {
        Self {
            x_lo: -1.0,
            x_hi: 1.0,
            y_lo: -1.0,
            y_hi: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_lo, self.x_hi, self.y_lo, self.y_hi]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_lo >= self.x_hi || self.y_lo >= self.y_hi {
            return Err(Error::DegenerateDomain {
                x_lo: self.x_lo,
                x_hi: self.x_hi,
                y_lo: self.y_lo,
                y_hi: self.y_hi,
            });
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    pub fn height(&self) -> f64 {
        self.y_hi - self.y_lo
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Maps a reference coordinate in [-1, 1] to x.
    pub fn map_x(&self, xi: f64) -> f64 {
        self.x_lo + 0.5 * (xi + 1.0) * self.width()
    }

    pub fn map_y(&self, eta: f64) -> f64 {
        self.y_lo + 0.5 * (eta + 1.0) * self.height()
    }

    /// Inverse of [`map_x`](Self::map_x).
    pub fn to_reference_x(&self, x: f64) -> f64 {
        2.0 * (x - self.x_lo) / self.width() - 1.0
    }

    pub fn to_reference_y(&self, y: f64) -> f64 {
        2.0 * (y - self.y_lo) / self.height() - 1.0
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let sx = DOMAIN_SLACK * self.width();
        let sy = DOMAIN_SLACK * self.height();
        x >= self.x_lo - sx && x <= self.x_hi + sx && y >= self.y_lo - sy && y <= self.y_hi + sy
    }

    pub(crate) fn check(&self, x: f64, y: f64) -> Result<()> {
        if self.contains(x, y) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                point: vec![x, y],
                lo: vec![self.x_lo, self.y_lo],
                hi: vec![self.x_hi, self.y_hi],
            })
        }
    }
}

/// Scaling convention of the eigenfunctions.
///
/// `Orthonormal` is `2/sqrt(|Ω|) sin sin` (`2/π` on `(0,π)²`), `UnitAmplitude` is
/// the bare product of sines with maximum 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    Orthonormal,
    UnitAmplitude,
}

impl Normalization {
    pub fn factor(&self, domain: &RectDomain) -> f64 {
        match self {
            Normalization::Orthonormal => 2.0 / domain.area().sqrt(),
            Normalization::UnitAmplitude => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub m: usize,
    pub n: usize,
    pub lambda: f64,
    pub normalization: Normalization,
}

impl EigenPair {
    pub fn new(domain: &RectDomain, m: usize, n: usize, normalization: Normalization) -> Self {
        Self {
            m,
            n,
            lambda: eigenvalue(domain, m, n),
            normalization,
        }
    }

    pub fn with_normalization(self, normalization: Normalization) -> Self {
        Self { normalization, ..self }
    }

    /// `φ(x, y)` without domain checks.
    pub fn value_unchecked(&self, domain: &RectDomain, x: f64, y: f64) -> f64 {
        let (kx, ky) = self.wavenumbers(domain);
        self.normalization.factor(domain) * (kx * (x - domain.x_lo)).sin() * (ky * (y - domain.y_lo)).sin()
    }

    /// `∇φ(x, y)` without domain checks.
    pub fn gradient_unchecked(&self, domain: &RectDomain, x: f64, y: f64) -> (f64, f64) {
        let (kx, ky) = self.wavenumbers(domain);
        let c = self.normalization.factor(domain);
        let (sx, cx) = (kx * (x - domain.x_lo)).sin_cos();
        let (sy, cy) = (ky * (y - domain.y_lo)).sin_cos();
        (c * kx * cx * sy, c * ky * sx * cy)
    }

    pub fn wavenumbers(&self, domain: &RectDomain) -> (f64, f64) {
        (
            self.m as f64 * PI / domain.width(),
            self.n as f64 * PI / domain.height(),
        )
    }

    /// `"mn"` for single-digit indices, `"m,n"` otherwise.
    pub fn tag(&self) -> String {
        if self.m < 10 && self.n < 10 {
            format!("{}{}", self.m, self.n)
        } else {
            format!("{},{}", self.m, self.n)
        }
    }
}

pub fn eigenvalue(domain: &RectDomain, m: usize, n: usize) -> f64 {
    let kx = m as f64 * PI / domain.width();
    let ky = n as f64 * PI / domain.height();
    kx * kx + ky * ky
}

fn same_eigenvalue(a: f64, b: f64) -> bool {
    if a.fract() == 0.0 && b.fract() == 0.0 {
        a == b
    } else {
        (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
    }
}

/// The first `count` eigenpairs, ascending in `λ`.
///
/// Within one eigenvalue the pairs are ordered by `n` ascending (so `(2,1)` comes
/// before `(1,2)`), the usual listing for `(0, π)²`.
pub fn laplace_eigenpairs(domain: &RectDomain, count: usize, normalization: Normalization) -> Result<Vec<EigenPair>> {
    domain.validate()?;
    if count == 0 {
        return Err(Error::InvalidArgument("eigenpair count must be >= 1".into()));
    }
    // Any (m, n) with m > count or n > count lies above λ(count, 1) or λ(1, count),
    // and `count` pairs already lie at or below each of those.
    let mut pairs: Vec<EigenPair> = (1..=count)
        .flat_map(|m| (1..=count).map(move |n| (m, n)))
        .map(|(m, n)| EigenPair::new(domain, m, n, normalization))
        .collect();
    pairs.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let mut ordered = Vec::with_capacity(pairs.len());
    for group in split_groups(&pairs) {
        let mut g = group.to_vec();
        g.sort_by_key(|p| (p.n, p.m));
        ordered.extend(g);
    }
    ordered.truncate(count);
    Ok(ordered)
}

fn split_groups(sorted: &[EigenPair]) -> Vec<&[EigenPair]> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=sorted.len() {
        if i == sorted.len() || !same_eigenvalue(sorted[start].lambda, sorted[i].lambda) {
            out.push(&sorted[start..i]);
            start = i;
        }
    }
    out
}

/// An eigenvalue together with all index pairs sharing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenGroup {
    pub lambda: f64,
    pub members: Vec<(usize, usize)>,
    pub multiplicity: usize,
    pub normalization: Normalization,
}

impl EigenGroup {
    pub fn pairs(&self) -> Vec<EigenPair> {
        self.members
            .iter()
            .map(|&(m, n)| EigenPair {
                m,
                n,
                lambda: self.lambda,
                normalization: self.normalization,
            })
            .collect()
    }
}

/// Partitions consecutive pairs with equal eigenvalue into groups.
pub fn group_by_multiplicity(pairs: &[EigenPair]) -> Vec<EigenGroup> {
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    split_groups(&sorted)
        .into_iter()
        .map(|g| {
            let mut members: Vec<(usize, usize)> = g.iter().map(|p| (p.m, p.n)).collect();
            members.sort_by_key(|&(m, n)| (n, m));
            EigenGroup {
                lambda: g[0].lambda,
                multiplicity: members.len(),
                members,
                normalization: g[0].normalization,
            }
        })
        .collect()
}

/// The complete multiplicity group of the eigenvalue `lambda`, or `None` if
/// `lambda` is not an eigenvalue of the domain.
pub fn eigen_group(domain: &RectDomain, lambda: f64, normalization: Normalization) -> Option<EigenGroup> {
    let (kx, ky) = (PI / domain.width(), PI / domain.height());
    let m_max = (lambda.max(0.0).sqrt() / kx).floor() as usize + 1;
    let n_max = (lambda.max(0.0).sqrt() / ky).floor() as usize + 1;
    let pairs: Vec<EigenPair> = (1..=m_max)
        .flat_map(|m| (1..=n_max).map(move |n| (m, n)))
        .map(|(m, n)| EigenPair::new(domain, m, n, normalization))
        .filter(|p| same_eigenvalue(p.lambda, lambda))
        .collect();
    if pairs.is_empty() {
        return None;
    }
    group_by_multiplicity(&pairs).into_iter().next()
}

/// Evaluates one eigenfunction at a list of points.
pub fn eigenfunction_values(pair: &EigenPair, domain: &RectDomain, points: &[(f64, f64)]) -> Result<Vec<f64>> {
    points
        .iter()
        .map(|&(x, y)| {
            domain.check(x, y)?;
            Ok(pair.value_unchecked(domain, x, y))
        })
        .collect()
}
