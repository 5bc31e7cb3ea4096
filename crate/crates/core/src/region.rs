//! Constrained regions described by deviation functions over a bounding box.

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsl::{ConstraintExpr, Expr, Relation};
use crate::error::{Error, Result};
use crate::normal::log_ndtr;
use crate::polygon::PolygonSet;

/// Default equality tolerance used when reporting manifold samples.
pub const DEFAULT_EQ_TOL: f64 = 0.01;

/// Axis-aligned box `[lower, upper]` containing the region.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidBoundingBox(
                "dimension must be at least 1".into(),
            ));
        }
        if lower.len() != upper.len() {
            return Err(Error::InvalidBoundingBox(format!(
                "lower has {} entries, upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        for (d, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidBoundingBox(format!(
                    "axis {}: need finite lower < upper, got [{lo}, {hi}]",
                    d + 1
                )));
            }
        }
        Ok(BoundingBox { lower, upper })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    pub fn widths(&self) -> Vec<f64> {
        (0..self.dim()).map(|d| self.width(d)).collect()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|d| self.width(d)).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for (d, o) in out.iter_mut().enumerate() {
            *o = rng.random_range(self.lower[d]..self.upper[d]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    /// Satisfied iff the deviation is `<= 0`.
    Inequality,
    /// Deviation is `|residual|`; satisfied iff it is 0.
    Equality,
}

type NativeFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// How a constraint computes its signed residual.
#[derive(Clone)]
pub enum ConstraintFn {
    Expr(Expr),
    /// Distance to a planar polygon set over the first two coordinates.
    Polygon(Arc<PolygonSet>),
    Native(Arc<NativeFn>),
}

impl fmt::Debug for ConstraintFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintFn::Expr(e) => write!(f, "Expr({e})"),
            ConstraintFn::Polygon(p) => write!(f, "Polygon({} rings)", p.rings().len()),
            ConstraintFn::Native(_) => write!(f, "Native(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub func: ConstraintFn,
    pub label: String,
}

impl Constraint {
    pub fn native<F>(kind: ConstraintKind, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Constraint {
            kind,
            func: ConstraintFn::Native(Arc::new(f)),
            label: label.into(),
        }
    }

    pub fn polygon(set: Arc<PolygonSet>) -> Self {
        Constraint {
            kind: ConstraintKind::Inequality,
            func: ConstraintFn::Polygon(set),
            label: "polygon distance".into(),
        }
    }

    pub fn residual(&self, x: &[f64]) -> Result<f64> {
        match &self.func {
            ConstraintFn::Expr(e) => {
                let v = e.eval(x)?;
                if !v.is_finite() {
                    return Err(Error::Domain {
                        expr: e.to_string(),
                        message: "non-finite value".into(),
                    });
                }
                Ok(v)
            }
            ConstraintFn::Polygon(p) => Ok(p.distance([x[0], x[1]])),
            ConstraintFn::Native(f) => Ok(f(x)),
        }
    }

    pub fn deviation(&self, x: &[f64]) -> Result<f64> {
        let r = self.residual(x)?;
        Ok(match self.kind {
            ConstraintKind::Inequality => r,
            ConstraintKind::Equality => r.abs(),
        })
    }
}

impl From<ConstraintExpr> for Constraint {
    fn from(c: ConstraintExpr) -> Self {
        let label = c.to_string();
        Constraint {
            kind: match c.relation {
                Relation::LessEq => ConstraintKind::Inequality,
                Relation::Equal => ConstraintKind::Equality,
            },
            func: ConstraintFn::Expr(c.expr),
            label,
        }
    }
}

/// Per-constraint deviations of one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Deviation(pub Vec<f64>);

impl Deviation {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// A bounding box intersected with a list of constraints.
#[derive(Debug, Clone)]
pub struct Region {
    bbox: BoundingBox,
    constraints: Vec<Constraint>,
}

impl Region {
    pub fn new(bbox: BoundingBox, constraints: Vec<Constraint>) -> Result<Self> {
        for c in &constraints {
            match &c.func {
                ConstraintFn::Polygon(_) if bbox.dim() != 2 => {
                    return Err(Error::InvalidParameter(format!(
                        "polygon constraints need a 2-D box, got {}-D",
                        bbox.dim()
                    )));
                }
                ConstraintFn::Expr(e) => {
                    if let Some(v) = e.max_var() {
                        if v >= bbox.dim() {
                            return Err(Error::DimensionMismatch {
                                expected: bbox.dim(),
                                got: v + 1,
                            });
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(Region { bbox, constraints })
    }

    pub fn from_exprs(bbox: BoundingBox, exprs: Vec<ConstraintExpr>) -> Result<Self> {
        for e in &exprs {
            if e.dim != bbox.dim() {
                return Err(Error::DimensionMismatch {
                    expected: bbox.dim(),
                    got: e.dim,
                });
            }
        }
        Self::new(bbox, exprs.into_iter().map(Constraint::from).collect())
    }

    pub fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn dim(&self) -> usize {
        self.bbox.dim()
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn has_equality(&self) -> bool {
        self.constraints
            .iter()
            .any(|c| c.kind == ConstraintKind::Equality)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn deviation(&self, x: &[f64]) -> Result<Deviation> {
        let mut out = vec![0.0; self.n_constraints()];
        self.deviation_into(x, &mut out)?;
        Ok(Deviation(out))
    }

    /// Writes the `K` deviations of `x` into `out`.
    pub fn deviation_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_dim(x)?;
        for (o, c) in out.iter_mut().zip(&self.constraints) {
            *o = c.deviation(x)?;
        }
        Ok(())
    }

    pub fn is_feasible(&self, x: &[f64], eq_tol: f64) -> Result<bool> {
        let dev = self.deviation(x)?;
        Ok(self.deviation_is_feasible(dev.values(), eq_tol))
    }

    pub fn deviation_is_feasible(&self, dev: &[f64], eq_tol: f64) -> bool {
        dev.iter()
            .zip(&self.constraints)
            .all(|(v, c)| match c.kind {
                ConstraintKind::Inequality => *v <= 0.0,
                ConstraintKind::Equality => *v <= eq_tol,
            })
    }

    /// Draws `n` box-uniform points and reports whether any is feasible.
    pub fn probe_nonempty(&self, n: usize, eq_tol: f64, seed: u64) -> Result<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = vec![0.0; self.dim()];
        for _ in 0..n {
            self.bbox.sample(&mut rng, &mut x);
            if self.is_feasible(&x, eq_tol)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// `Σ_k ln Φ(-τ·C_k)`: the log of the probit-relaxed constraint indicator.
pub fn soft_indicator_log(deviation: &[f64], tau: f64) -> f64 {
    debug_assert!(tau >= 0.0);
    deviation.iter().map(|&c| log_ndtr(-tau * c)).sum()
}

/// Named regions available without writing constraint text.
#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    /// `sqrt(33 x2² + 1) ≤ x1 ≤ sqrt(14 x2² + 2)` on `[-4, 4]²`.
    Crescent,
    /// `Σ x_d² ≤ r²`.
    Ball {
        radius: f64,
        dim: usize,
    },
    /// `inner ≤ |x| ≤ outer` in the plane.
    Annulus {
        inner: f64,
        outer: f64,
    },
    /// `(major - sqrt(x1² + x2²))² + x3² = minor²`.
    Torus {
        major: f64,
        minor: f64,
    },
    PolygonFile(PathBuf),
}

impl Builtin {
    pub fn torus() -> Self {
        Builtin::Torus {
            major: 2.0,
            minor: 1.0,
        }
    }

    pub fn unit_disk() -> Self {
        Builtin::Ball {
            radius: 1.0,
            dim: 2,
        }
    }
}

pub fn builtin_region(which: &Builtin) -> Result<Region> {
    match which {
        Builtin::Crescent => {
            let bbox = BoundingBox::cube(2, -4.0, 4.0)?;
            Region::new(
                bbox,
                vec![
                    Constraint::native(ConstraintKind::Inequality, "x1 - sqrt(14 x2^2 + 2)", |x| {
                        x[0] - (14.0 * x[1] * x[1] + 2.0).sqrt()
                    }),
                    Constraint::native(ConstraintKind::Inequality, "sqrt(33 x2^2 + 1) - x1", |x| {
                        (33.0 * x[1] * x[1] + 1.0).sqrt() - x[0]
                    }),
                ],
            )
        }
        &Builtin::Ball { radius, dim } => {
            if !(radius > 0.0 && radius.is_finite()) || dim == 0 {
                return Err(Error::InvalidParameter(format!(
                    "ball needs radius > 0 and dim >= 1, got radius {radius}, dim {dim}"
                )));
            }
            let r2 = radius * radius;
            let half = 1.1 * radius;
            Region::new(
                BoundingBox::cube(dim, -half, half)?,
                vec![Constraint::native(
                    ConstraintKind::Inequality,
                    "sum x_d^2 - r^2",
                    move |x| x.iter().map(|v| v * v).sum::<f64>() - r2,
                )],
            )
        }
        &Builtin::Annulus { inner, outer } => {
            if !(inner > 0.0 && outer > inner && outer.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "annulus needs 0 < inner < outer, got inner {inner}, outer {outer}"
                )));
            }
            let (i2, o2) = (inner * inner, outer * outer);
            let half = 1.1 * outer;
            Region::new(
                BoundingBox::cube(2, -half, half)?,
                vec![
                    Constraint::native(ConstraintKind::Inequality, "|x|^2 - outer^2", move |x| {
                        x[0] * x[0] + x[1] * x[1] - o2
                    }),
                    Constraint::native(ConstraintKind::Inequality, "inner^2 - |x|^2", move |x| {
                        i2 - (x[0] * x[0] + x[1] * x[1])
                    }),
                ],
            )
        }
        &Builtin::Torus { major, minor } => {
            if !(minor > 0.0 && major > minor && major.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "torus needs 0 < minor < major, got major {major}, minor {minor}"
                )));
            }
            let pad = 0.2 * minor;
            let xy = major + minor + pad;
            let z = minor + pad;
            let m2 = minor * minor;
            Region::new(
                BoundingBox::new(vec![-xy, -xy, -z], vec![xy, xy, z])?,
                vec![Constraint::native(
                    ConstraintKind::Equality,
                    "(R - sqrt(x1^2 + x2^2))^2 + x3^2 - r^2",
                    move |x| {
                        let ring = major - (x[0] * x[0] + x[1] * x[1]).sqrt();
                        ring * ring + x[2] * x[2] - m2
                    },
                )],
            )
        }
        Builtin::PolygonFile(path) => {
            let set = PolygonSet::from_geojson_path(path)?;
            polygon_region(Arc::new(set), None)
        }
    }
}

/// Region given by a polygon set; the box defaults to the polygons' extent.
pub fn polygon_region(set: Arc<PolygonSet>, bbox: Option<BoundingBox>) -> Result<Region> {
    let bbox = match bbox {
        Some(b) => b,
        None => {
            let (min, max) = set.extent();
            BoundingBox::new(min.to_vec(), max.to_vec())?
        }
    };
    Region::new(bbox, vec![Constraint::polygon(set)])
}
