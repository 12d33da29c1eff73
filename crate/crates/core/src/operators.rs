//! Closed-form operators on ℝⁿ: metric projections, proximal mappings,
//! reflected resolvents, compositions, relaxed convex combinations and
//! gradient steps, together with a sampling classifier that audits the
//! declared nonexpansivity class.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist_unchecked, ClosedBall, Vector, DEFAULT_ETA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorClass {
    FirmlyNonexpansive,
    Nonexpansive,
    QuasiNonexpansive,
    General,
}

impl OperatorClass {
    pub fn is_nonexpansive(self) -> bool {
        matches!(self, OperatorClass::FirmlyNonexpansive | OperatorClass::Nonexpansive)
    }

    pub fn is_quasi_nonexpansive(self) -> bool {
        self != OperatorClass::General
    }
}

/// A self-map of ℝⁿ with a declared regularity class.
pub trait Operator: Send + Sync {
    fn apply(&self, x: &Vector) -> Result<Vector>;
    fn class(&self) -> OperatorClass;
    fn dim(&self) -> usize;

    fn name(&self) -> String {
        "operator".into()
    }
}

pub type SharedOperator = Arc<dyn Operator>;

impl fmt::Debug for dyn Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{:?}, dim {}]", self.name(), self.class(), self.dim())
    }
}

fn check_dim(x: &Vector, dim: usize) -> Result<()> {
    if x.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: x.dim(),
        });
    }
    Ok(())
}

/// Closed convex sets with closed-form projections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexSet {
    /// `{x : ⟨normal, x⟩ ≤ offset}`
    Halfspace {
        normal: Vector,
        offset: f64,
    },
    /// `{x : ⟨normal, x⟩ = offset}`
    Hyperplane {
        normal: Vector,
        offset: f64,
    },
    Box {
        lower: Vector,
        upper: Vector,
    },
    Ball {
        center: Vector,
        radius: f64,
    },
    /// `point + span(directions)`
    Affine {
        point: Vector,
        directions: Vec<Vector>,
    },
}

impl ConvexSet {
    pub fn halfspace(normal: Vec<f64>, offset: f64) -> Result<Self> {
        let s = ConvexSet::Halfspace {
            normal: Vector::new(normal)?,
            offset,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn hyperplane(normal: Vec<f64>, offset: f64) -> Result<Self> {
        let s = ConvexSet::Hyperplane {
            normal: Vector::new(normal)?,
            offset,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn cube(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let s = ConvexSet::Box {
            lower: Vector::new(lower)?,
            upper: Vector::new(upper)?,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let s = ConvexSet::Ball {
            center: Vector::new(center)?,
            radius,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn affine(point: Vec<f64>, directions: Vec<Vec<f64>>) -> Result<Self> {
        let s = ConvexSet::Affine {
            point: Vector::new(point)?,
            directions: directions.into_iter().map(Vector::new).collect::<Result<_>>()?,
        };
        s.validate()?;
        Ok(s)
    }

    /// Parameter checks for sets read from configuration files.
    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexSet::Halfspace { normal, offset } | ConvexSet::Hyperplane { normal, offset } => {
                if !(normal.norm_sq() > 0.0) {
                    return Err(Error::param("normal", "must be nonzero"));
                }
                if !offset.is_finite() {
                    return Err(Error::param("offset", "must be finite"));
                }
            }
            ConvexSet::Box { lower, upper } => {
                lower.check_dim(upper)?;
                if lower.coords().iter().zip(upper.coords()).any(|(l, u)| l > u) {
                    return Err(Error::param("box", "lower bound exceeds upper bound"));
                }
            }
            ConvexSet::Ball { radius, .. } => {
                if !(*radius >= 0.0 && radius.is_finite()) {
                    return Err(Error::param("radius", format!("{radius} must be >= 0")));
                }
            }
            ConvexSet::Affine { point, directions } => {
                for d in directions {
                    point.check_dim(d)?;
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Halfspace { normal, .. } | ConvexSet::Hyperplane { normal, .. } => normal.dim(),
            ConvexSet::Box { lower, .. } => lower.dim(),
            ConvexSet::Ball { center, .. } => center.dim(),
            ConvexSet::Affine { point, .. } => point.dim(),
        }
    }

    pub fn project(&self, x: &Vector) -> Result<Vector> {
        check_dim(x, self.dim())?;
        Ok(match self {
            ConvexSet::Halfspace { normal, offset } => {
                let s = normal.dot(x) - offset;
                if s <= 0.0 {
                    x.clone()
                } else {
                    x.axpy(-s / normal.norm_sq(), normal)
                }
            }
            ConvexSet::Hyperplane { normal, offset } => {
                let s = normal.dot(x) - offset;
                x.axpy(-s / normal.norm_sq(), normal)
            }
            ConvexSet::Box { lower, upper } => Vector::from_raw(
                x.coords()
                    .iter()
                    .zip(lower.coords().iter().zip(upper.coords()))
                    .map(|(v, (l, u))| v.clamp(*l, *u))
                    .collect(),
            ),
            ConvexSet::Ball { center, radius } => {
                let d = dist_unchecked(x, center);
                if d <= *radius {
                    x.clone()
                } else {
                    Vector::from_raw(
                        x.coords()
                            .iter()
                            .zip(center.coords())
                            .map(|(v, c)| c + (v - c) * radius / d)
                            .collect(),
                    )
                }
            }
            ConvexSet::Affine { point, directions } => {
                let basis = orthonormal_basis(directions);
                let rel = x.sub(point);
                basis.iter().fold(point.clone(), |acc, e| acc.axpy(rel.dot(e), e))
            }
        })
    }

    pub fn distance(&self, x: &Vector) -> Result<f64> {
        check_dim(x, self.dim())?;
        Ok(match self {
            ConvexSet::Halfspace { normal, offset } => (normal.dot(x) - offset).max(0.0) / normal.norm(),
            ConvexSet::Hyperplane { normal, offset } => (normal.dot(x) - offset).abs() / normal.norm(),
            ConvexSet::Ball { center, radius } => (dist_unchecked(x, center) - radius).max(0.0),
            _ => dist_unchecked(x, &self.project(x)?),
        })
    }

    pub fn contains(&self, x: &Vector, eta: f64) -> Result<bool> {
        Ok(self.distance(x)? <= eta)
    }
}

fn orthonormal_basis(directions: &[Vector]) -> Vec<Vector> {
    let mut basis: Vec<Vector> = Vec::new();
    for d in directions {
        let mut v = d.clone();
        for e in &basis {
            v = v.axpy(-v.dot(e), e);
        }
        let n = v.norm();
        if n > 1e-12 * d.norm().max(1.0) {
            basis.push(v.scale(1.0 / n));
        }
    }
    basis
}

/// Convex functions whose proximal mapping has a closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProxFunction {
    /// x ↦ ‖x‖
    Norm,
    /// x ↦ ½‖x − center‖²
    ScaledQuadratic { center: Vector },
    /// Indicator function of a convex set: 0 on the set, +∞ outside.
    Indicator { set: ConvexSet },
}

impl ProxFunction {
    pub fn half_squared_norm(dim: usize) -> Self {
        ProxFunction::ScaledQuadratic {
            center: Vector::zeros(dim),
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        match self {
            ProxFunction::Norm => x.norm(),
            ProxFunction::ScaledQuadratic { center } => 0.5 * crate::geometry::dist_sq(x, center),
            ProxFunction::Indicator { set } => match set.contains(x, DEFAULT_ETA) {
                Ok(true) => 0.0,
                _ => f64::INFINITY,
            },
        }
    }

    /// `Prox_{γf}(x) = argmin_y f(y) + ‖x − y‖²/(2γ)`, i.e. the resolvent
    /// `J_{γ∂f}`.
    pub fn prox(&self, gamma: f64, x: &Vector) -> Result<Vector> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::param("gamma", format!("{gamma} must be > 0")));
        }
        match self {
            ProxFunction::Norm => {
                let n = x.norm();
                if n <= gamma {
                    Ok(Vector::zeros(x.dim()))
                } else {
                    Ok(x.map(|c| c - gamma * (c / n)))
                }
            }
            ProxFunction::ScaledQuadratic { center } => {
                check_dim(x, center.dim())?;
                Ok(x.axpy(gamma, center).scale(1.0 / (1.0 + gamma)))
            }
            ProxFunction::Indicator { set } => set.project(x),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Identity {
    pub dim: usize,
}

impl Operator for Identity {
    fn apply(&self, x: &Vector) -> Result<Vector> {
        check_dim(x, self.dim)?;
        Ok(x.clone())
    }
    fn class(&self) -> OperatorClass {
        OperatorClass::FirmlyNonexpansive
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn name(&self) -> String {
        "identity".into()
    }
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub set: ConvexSet,
}

impl Operator for Projection {
    fn apply(&self, x: &Vector) -> Result<Vector> {
        self.set.project(x)
    }
    fn class(&self) -> OperatorClass {
        OperatorClass::FirmlyNonexpansive
    }
    fn dim(&self) -> usize {
        self.set.dim()
    }
    fn name(&self) -> String {
        "projection".into()
    }
}

/// The resolvent `J_{γ∂f} = Prox_{γf}`.
#[derive(Debug, Clone)]
pub struct Resolvent {
    pub f: ProxFunction,
    pub gamma: f64,
    pub dim: usize,
}

impl Resolvent {
    pub fn new(f: ProxFunction, gamma: f64, dim: usize) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::param("gamma", format!("{gamma} must be > 0")));
        }
        Ok(Resolvent { f, gamma, dim })
    }
}

impl Operator for Resolvent {
    fn apply(&self, x: &Vector) -> Result<Vector> {
        check_dim(x, self.dim)?;
        self.f.prox(self.gamma, x)
    }
    fn class(&self) -> OperatorClass {
        OperatorClass::FirmlyNonexpansive
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn name(&self) -> String {
        format!("resolvent(gamma={})", self.gamma)
    }
}

/// `R = 2J − Id`.
pub struct Reflected {
    inner: SharedOperator,
}

impl Operator for Reflected {
    fn apply(&self, x: &Vector) -> Result<Vector> {
        let j = self.inner.apply(x)?;
        Ok(j.scale(2.0).sub(x))
    }
    fn class(&self) -> OperatorClass {
        OperatorClass::Nonexpansive
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn name(&self) -> String {
        format!("reflect({})", self.inner.name())
    }
}

pub fn reflected_resolvent(j: SharedOperator) -> Result<SharedOperator> {
    if j.class() != OperatorClass::FirmlyNonexpansive {
        return Err(Error::param(
            "J",
            format!("{} is declared {:?}, not firmly nonexpansive", j.name(), j.class()),
        ));
    }
    Ok(Arc::new(Reflected { inner: j }))
}

/// `T₁ ∘ T₂ ∘ … ∘ Tₘ`, applied right to left.
pub struct Composition {
    ops: Vec<SharedOperator>,
}

impl Operator for Composition {
    fn apply(&self, x: &Vector) -> Result<Vector> {
        let mut y = x.clone();
        for op in self.ops.iter().rev() {
            y = op.apply(&y)?;
        }
        Ok(y)
    }
    fn class(&self) -> OperatorClass {
        if self.ops.len() == 1 {
            self.ops[0].class()
        } else if self.ops.iter().all(|o| o.class().is_nonexpansive()) {
            OperatorClass::Nonexpansive
        } else {
            OperatorClass::General
        }
    }
    fn dim(&self) -> usize {
        self.ops[0].dim()
    }
    fn name(&self) -> String {
        let names: Vec<String> = self.ops.iter().map(|o| o.name()).collect();
        names.join(" o ")
    }
}

pub fn compose(ops: Vec<SharedOperator>) -> Result<SharedOperator> {
    let first = ops
        .first()
        .ok_or_else(|| Error::param("ops", "composition of an empty list"))?;
    if let Some(bad) = ops.iter().find(|o| o.dim() != first.dim()) {
        return Err(Error::DimensionMismatch {
            expected: first.dim(),
            found: bad.dim(),
        });
    }
    Ok(Arc::new(Composition { ops }))
}

/// `x ↦ Σ aᵢ (x + λᵢ(Tᵢx − x))`.
pub struct ConvexCombination {
    ops: Vec<SharedOperator>,
    weights: Vec<f64>,
    relaxations: Vec<f64>,
}

impl ConvexCombination {
    pub fn operators(&self) -> &[SharedOperator] {
        &self.ops
    }
}

impl Operator for ConvexCombination {
    fn apply(&self, x: &Vector) -> Result<Vector> {
        let mut acc = Vector::zeros(x.dim());
        for ((op, a), l) in self.ops.iter().zip(&self.weights).zip(&self.relaxations) {
            let t = op.apply(x)?;
            let relaxed = x.axpy(*l, &t.sub(x));
            acc = acc.axpy(*a, &relaxed);
        }
        Ok(acc)
    }
    fn class(&self) -> OperatorClass {
        let firm = self.ops.iter().all(|o| o.class() == OperatorClass::FirmlyNonexpansive);
        let unrelaxed = self.relaxations.iter().all(|l| *l <= 1.0);
        let nonexp = self.ops.iter().all(|o| o.class().is_nonexpansive());
        if firm && unrelaxed {
            OperatorClass::FirmlyNonexpansive
        } else if firm || (nonexp && unrelaxed) {
            OperatorClass::Nonexpansive
        } else {
            OperatorClass::General
        }
    }
    fn dim(&self) -> usize {
        self.ops[0].dim()
    }
    fn name(&self) -> String {
        "convex_combination".into()
    }
}

pub fn convex_combination(
    ops: Vec<SharedOperator>,
    weights: Vec<f64>,
    relaxations: Vec<f64>,
) -> Result<ConvexCombination> {
    if ops.is_empty() {
        return Err(Error::param("ops", "empty list"));
    }
    if weights.len() != ops.len() || relaxations.len() != ops.len() {
        return Err(Error::param("weights", "one weight and one relaxation per operator"));
    }
    if weights.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::param("weights", "weights must be positive"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > DEFAULT_ETA {
        return Err(Error::param("weights", format!("sum to {total}, not 1")));
    }
    if relaxations.iter().any(|l| !(*l > 0.0 && *l <= 2.0)) {
        return Err(Error::param("relaxations", "each must lie in (0, 2]"));
    }
    if relaxations[0] >= 2.0 {
        return Err(Error::param("relaxations", "the first relaxation must be < 2"));
    }
    let dim = ops[0].dim();
    if let Some(bad) = ops.iter().find(|o| o.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.dim(),
        });
    }
    Ok(ConvexCombination {
        ops,
        weights,
        relaxations,
    })
}

pub type VectorField = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

/// `x ↦ x − ∇f(x)/L` for an L-smooth convex f.
pub struct GradientStep {
    gradient: VectorField,
    lipschitz: f64,
    dim: usize,
}

impl Operator for GradientStep {
    fn apply(&self, x: &Vector) -> Result<Vector> {
        check_dim(x, self.dim)?;
        let g = (self.gradient)(x);
        check_dim(&g, self.dim)?;
        Ok(x.axpy(-1.0 / self.lipschitz, &g))
    }
    fn class(&self) -> OperatorClass {
        OperatorClass::FirmlyNonexpansive
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn name(&self) -> String {
        format!("gradient_step(L={})", self.lipschitz)
    }
}

pub fn gradient_step(gradient: VectorField, lipschitz: f64, dim: usize) -> Result<GradientStep> {
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(Error::param("L", format!("{lipschitz} must be > 0")));
    }
    Ok(GradientStep {
        gradient,
        lipschitz,
        dim,
    })
}

/// An operator given by a closure and a declared class.
pub struct FnOperator {
    f: VectorField,
    class: OperatorClass,
    dim: usize,
    name: String,
}

impl FnOperator {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        class: OperatorClass,
        f: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        FnOperator {
            f: Arc::new(f),
            class,
            dim,
            name: name.into(),
        }
    }
}

impl Operator for FnOperator {
    fn apply(&self, x: &Vector) -> Result<Vector> {
        check_dim(x, self.dim)?;
        Ok((self.f)(x))
    }
    fn class(&self) -> OperatorClass {
        self.class
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn name(&self) -> String {
        self.name.clone()
    }
}

/// Largest violation found for one inequality, with the sample pair that
/// produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub worst: f64,
    pub witness: Option<(Vector, Vector)>,
}

impl Violation {
    fn none() -> Self {
        Violation {
            worst: f64::NEG_INFINITY,
            witness: None,
        }
    }

    fn record(&mut self, v: f64, x: &Vector, y: &Vector) {
        if v > self.worst {
            self.worst = v;
            self.witness = Some((x.clone(), y.clone()));
        }
    }

    pub fn passes(&self, eta: f64) -> bool {
        self.worst <= eta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub nonexpansive: Violation,
    pub firmly_nonexpansive: Violation,
    /// Present when fixed points were supplied.
    pub quasi_nonexpansive: Option<Violation>,
    pub eta: f64,
}

impl ClassReport {
    /// Whether the sampled evidence supports a declared class.
    pub fn supports(&self, class: OperatorClass) -> bool {
        match class {
            OperatorClass::FirmlyNonexpansive => self.firmly_nonexpansive.passes(self.eta),
            OperatorClass::Nonexpansive => self.nonexpansive.passes(self.eta),
            OperatorClass::QuasiNonexpansive => self.quasi_nonexpansive.as_ref().is_none_or(|v| v.passes(self.eta)),
            OperatorClass::General => true,
        }
    }
}

/// Interpolation parameters for the firm nonexpansivity test.
pub const LAMBDA_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Samples pairs in `ball` and reports the worst violation of
/// `‖Tx − Ty‖ ≤ ‖x − y‖`, of
/// `‖Tx − Ty‖ ≤ ‖(1−λ)x + λTx − (1−λ)y − λTy‖` over [`LAMBDA_GRID`], and
/// of `‖Tx − p‖ ≤ ‖x − p‖` against the supplied fixed points.
pub fn classify_by_sampling(
    op: &dyn Operator,
    ball: &ClosedBall,
    samples: usize,
    seed: u64,
    fixed_points: &[Vector],
    eta: f64,
) -> Result<ClassReport> {
    let points = ball.samples(2 * samples, seed);
    let images: Vec<Vector> = points.iter().map(|x| op.apply(x)).collect::<Result<_>>()?;
    let mut nonexp = Violation::none();
    let mut firm = Violation::none();
    let mut quasi = (!fixed_points.is_empty()).then(Violation::none);
    for i in 0..samples {
        let (x, y) = (&points[2 * i], &points[2 * i + 1]);
        let (tx, ty) = (&images[2 * i], &images[2 * i + 1]);
        let dt = dist_unchecked(tx, ty);
        nonexp.record(dt - dist_unchecked(x, y), x, y);
        for &l in &LAMBDA_GRID {
            let a = x.scale(1.0 - l).axpy(l, tx);
            let b = y.scale(1.0 - l).axpy(l, ty);
            firm.record(dt - dist_unchecked(&a, &b), x, y);
        }
        if let Some(q) = quasi.as_mut() {
            for p in fixed_points {
                q.record(dist_unchecked(tx, p) - dist_unchecked(x, p), x, p);
                q.record(dist_unchecked(ty, p) - dist_unchecked(y, p), y, p);
            }
        }
    }
    Ok(ClassReport {
        nonexpansive: nonexp,
        firmly_nonexpansive: firm,
        quasi_nonexpansive: quasi,
        eta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn projection_examples() {
        let h = ConvexSet::halfspace(vec![1.0, 0.0], 0.0).unwrap();
        assert_eq!(h.project(&v(&[2.0, 3.0])).unwrap(), v(&[0.0, 3.0]));
        let b = ConvexSet::cube(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(b.project(&v(&[-1.0, 0.5])).unwrap(), v(&[0.0, 0.5]));
        let ball = ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(ball.project(&v(&[3.0, 4.0])).unwrap(), v(&[0.6, 0.8]));
        assert!(h.project(&v(&[1.0])).is_err());
    }

    #[test]
    fn affine_and_hyperplane_projection() {
        let line = ConvexSet::affine(vec![0.0, 1.0, 0.0], vec![vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]]).unwrap();
        assert_eq!(line.project(&v(&[3.0, 5.0, -2.0])).unwrap(), v(&[3.0, 1.0, 0.0]));
        let plane = ConvexSet::hyperplane(vec![0.0, 2.0], 2.0).unwrap();
        assert_eq!(plane.project(&v(&[4.0, -3.0])).unwrap(), v(&[4.0, 1.0]));
        assert_eq!(plane.distance(&v(&[4.0, -3.0])).unwrap(), 4.0);
    }

    #[test]
    fn set_validation() {
        assert!(ConvexSet::halfspace(vec![0.0, 0.0], 1.0).is_err());
        assert!(ConvexSet::cube(vec![1.0], vec![0.0]).is_err());
        assert!(ConvexSet::ball(vec![0.0], -1.0).is_err());
    }

    /// Grid minimisation of f(y) + (x − y)²/(2γ) on a fine 1-D grid.
    fn prox_grid(f: impl Fn(f64) -> f64, gamma: f64, x: f64) -> f64 {
        let n = 400_000;
        (0..=n)
            .map(|i| -5.0 + 10.0 * i as f64 / n as f64)
            .min_by(|a, b| {
                let fa = f(*a) + (x - a).powi(2) / (2.0 * gamma);
                let fb = f(*b) + (x - b).powi(2) / (2.0 * gamma);
                fa.total_cmp(&fb)
            })
            .unwrap()
    }

    #[test]
    fn prox_examples_against_grid_oracle() {
        let p = ProxFunction::Norm.prox(1.0, &v(&[2.3])).unwrap();
        assert_abs_diff_eq!(p[0], prox_grid(f64::abs, 1.0, 2.3), epsilon = 1e-4);
        assert_abs_diff_eq!(p[0], 1.3, epsilon = 1e-12);
        let q = ProxFunction::half_squared_norm(2).prox(1.0, &v(&[2.0, 0.0])).unwrap();
        assert_eq!(q, v(&[1.0, 0.0]));
        assert_abs_diff_eq!(prox_grid(|y| 0.5 * y * y, 1.0, 2.0), 1.0, epsilon = 1e-4);
        for x in [-3.0, -0.4, 0.0, 0.9, 4.2] {
            for g in [0.5, 1.0, 2.0] {
                let p = ProxFunction::Norm.prox(g, &v(&[x])).unwrap()[0];
                assert_abs_diff_eq!(p, prox_grid(f64::abs, g, x), epsilon = 1e-4);
            }
        }
        let set = ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let ind = ProxFunction::Indicator { set: set.clone() };
        let x = v(&[3.0, 4.0]);
        assert_eq!(ind.prox(0.7, &x).unwrap(), set.project(&x).unwrap());
        assert!(ProxFunction::Norm.prox(0.0, &x).is_err());
    }

    fn arc<T: Operator + 'static>(t: T) -> SharedOperator {
        Arc::new(t)
    }

    #[test]
    fn reflected_resolvent_examples() {
        let id = reflected_resolvent(arc(Identity { dim: 2 })).unwrap();
        assert_eq!(id.apply(&v(&[1.0, 2.0])).unwrap(), v(&[1.0, 2.0]));
        let line = ConvexSet::hyperplane(vec![0.0, 1.0], 0.0).unwrap();
        let r = reflected_resolvent(arc(Projection { set: line })).unwrap();
        assert_eq!(r.apply(&v(&[1.0, 2.0])).unwrap(), v(&[1.0, -2.0]));
        let j = Resolvent::new(ProxFunction::Norm, 1.0, 1).unwrap();
        let r = reflected_resolvent(arc(j)).unwrap();
        // 2·sign(x)·max(|x| − 1, 0) − x
        let oracle = |x: f64| 2.0 * x.signum() * (x.abs() - 1.0).max(0.0) - x;
        assert_eq!(r.apply(&v(&[0.5])).unwrap()[0], oracle(0.5));
        assert_eq!(r.apply(&v(&[0.5])).unwrap()[0], -0.5);
        let general = FnOperator::new("double", 1, OperatorClass::General, |x| x.scale(2.0));
        assert!(reflected_resolvent(arc(general)).is_err());
    }

    #[test]
    fn compose_examples() {
        let u = arc(Projection {
            set: ConvexSet::halfspace(vec![1.0, 0.0], 0.0).unwrap(),
        });
        let w = arc(Projection {
            set: ConvexSet::halfspace(vec![-1.0, 0.0], -1.0).unwrap(),
        });
        let t = compose(vec![u, w.clone()]).unwrap();
        assert_eq!(w.apply(&v(&[-2.0, 5.0])).unwrap(), v(&[1.0, 5.0]));
        assert_eq!(t.apply(&v(&[-2.0, 5.0])).unwrap(), v(&[0.0, 5.0]));
        assert_eq!(t.class(), OperatorClass::Nonexpansive);
        let single = compose(vec![arc(Identity { dim: 2 })]).unwrap();
        assert_eq!(single.apply(&v(&[3.0, 1.0])).unwrap(), v(&[3.0, 1.0]));
        assert!(compose(vec![]).is_err());
        assert!(compose(vec![arc(Identity { dim: 2 }), arc(Identity { dim: 3 })]).is_err());
    }

    #[test]
    fn composed_reflections_rotate_with_single_fixed_point() {
        let r1 = reflected_resolvent(arc(Projection {
            set: ConvexSet::hyperplane(vec![0.0, 1.0], 0.0).unwrap(),
        }))
        .unwrap();
        let r2 = reflected_resolvent(arc(Projection {
            set: ConvexSet::hyperplane(vec![1.0, -1.0], 0.0).unwrap(),
        }))
        .unwrap();
        let rot = compose(vec![r1, r2]).unwrap();
        let ball = ClosedBall::new(Vector::zeros(2), 3.0).unwrap();
        for x in ball.samples(500, 1) {
            let y = rot.apply(&x).unwrap();
            assert_abs_diff_eq!(y.norm(), x.norm(), epsilon = 1e-12);
            if x.norm() > 1e-6 {
                assert!(dist_unchecked(&x, &y) > 1e-7);
            }
        }
        assert_eq!(rot.apply(&Vector::zeros(2)).unwrap(), Vector::zeros(2));
    }

    #[test]
    fn convex_combination_examples() {
        let p1 = arc(Projection {
            set: ConvexSet::halfspace(vec![1.0, 0.0], 0.0).unwrap(),
        });
        let p2 = arc(Projection {
            set: ConvexSet::halfspace(vec![0.0, 1.0], 0.0).unwrap(),
        });
        let single = convex_combination(vec![p1.clone()], vec![1.0], vec![1.0]).unwrap();
        let x = v(&[2.0, -3.0]);
        assert_eq!(single.apply(&x).unwrap(), p1.apply(&x).unwrap());
        let avg = convex_combination(vec![p1.clone(), p2.clone()], vec![0.5, 0.5], vec![1.0, 1.0]).unwrap();
        assert_eq!(avg.apply(&v(&[2.0, 2.0])).unwrap(), v(&[1.0, 1.0]));
        assert_eq!(avg.class(), OperatorClass::FirmlyNonexpansive);
        assert!(convex_combination(vec![p1.clone(), p2.clone()], vec![0.3, 0.7], vec![2.0, 2.0]).is_err());
        assert!(convex_combination(vec![p1.clone(), p2.clone()], vec![0.3, 0.6], vec![1.0, 1.0]).is_err());
        assert!(convex_combination(vec![p1, p2], vec![0.5, 0.5], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn gradient_step_examples() {
        let t = gradient_step(Arc::new(|x: &Vector| x.clone()), 1.0, 2).unwrap();
        assert_eq!(t.apply(&v(&[3.0, 0.0])).unwrap(), v(&[0.0, 0.0]));
        let quarter = gradient_step(Arc::new(|x: &Vector| x.scale(0.5)), 1.0, 1).unwrap();
        assert_eq!(quarter.apply(&v(&[2.0])).unwrap(), v(&[1.0]));
        assert!(gradient_step(Arc::new(|x: &Vector| x.clone()), 0.0, 1).is_err());
        let grad = |x: &Vector| Vector::new(vec![x[0], 4.0 * x[1]]).unwrap();
        let t = gradient_step(Arc::new(grad), 4.0, 2).unwrap();
        for x in ClosedBall::new(Vector::zeros(2), 2.0).unwrap().samples(200, 3) {
            let fixed = t.apply(&x).unwrap() == x;
            assert_eq!(fixed, grad(&x).norm() == 0.0);
        }
    }

    #[test]
    fn classification_examples() {
        let ball = ClosedBall::new(Vector::zeros(2), 3.0).unwrap();
        let proj = Projection {
            set: ConvexSet::halfspace(vec![1.0, 1.0], 0.5).unwrap(),
        };
        let rep = classify_by_sampling(&proj, &ball, 500, 0, &[v(&[0.0, 0.0])], DEFAULT_ETA).unwrap();
        assert!(rep.supports(OperatorClass::FirmlyNonexpansive));
        assert!(rep.supports(OperatorClass::QuasiNonexpansive));

        let double = FnOperator::new("double", 2, OperatorClass::General, |x| x.scale(2.0));
        let rep = classify_by_sampling(&double, &ball, 100, 0, &[], DEFAULT_ETA).unwrap();
        assert!(!rep.supports(OperatorClass::Nonexpansive));
        let (x, y) = rep.nonexpansive.witness.clone().unwrap();
        assert_abs_diff_eq!(rep.nonexpansive.worst, dist_unchecked(&x, &y), epsilon = 1e-12);

        let reflect = reflected_resolvent(Arc::new(Projection {
            set: ConvexSet::hyperplane(vec![0.0, 1.0], 0.0).unwrap(),
        }))
        .unwrap();
        let rep = classify_by_sampling(reflect.as_ref(), &ball, 300, 0, &[], DEFAULT_ETA).unwrap();
        assert!(rep.supports(OperatorClass::Nonexpansive));
        assert!(!rep.supports(OperatorClass::FirmlyNonexpansive));
    }

    #[test]
    fn reflected_fixed_points_match_resolvent() {
        let set = ConvexSet::cube(vec![-1.0, -1.0], vec![1.0, 0.5]).unwrap();
        let j: SharedOperator = Arc::new(Projection { set });
        let r = reflected_resolvent(j.clone()).unwrap();
        let ball = ClosedBall::new(Vector::zeros(2), 2.0).unwrap();
        for x in ball.samples(1000, 9) {
            let jx = j.apply(&x).unwrap();
            let rx = r.apply(&x).unwrap();
            assert_eq!(jx == x, rx == x);
        }
    }
}
