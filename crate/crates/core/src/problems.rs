//! Problem instances: a residual F, an independent oracle for
//! dist(x, zer F), a reference zero z with radius bound b, an iteration
//! recipe, and the certified modulus and rate where one is known.
//!
//! Instances are built from a [`ProblemConfig`], the serialisable
//! description also used for the JSON problem files.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{dist_unchecked, ClosedBall, Vector, DEFAULT_ETA};
use crate::iterations::{Driver, ProxFamily, Recipe, Trace};
use crate::moduli::{
    calibrate_semialgebraic_c, compose_with_metric_regularity, estimate_modulus_from_oracles,
    modulus_bounded_regularity_pair, modulus_contraction, modulus_holder, modulus_metric_regularity_semialgebraic,
    modulus_orbital_contraction, modulus_ppa_weak_sharp, modulus_retraction, modulus_strongly_accretive,
    modulus_weak_sharp, Modulus, ModulusContext,
};
use crate::operators::{
    compose, convex_combination, gradient_step, ConvexSet, FnOperator, OperatorClass, Projection, ProxFunction,
    SharedOperator, VectorField,
};
use crate::rates::{
    cauchy_modulus, dist_rate, finite_termination_index, rate_alternating_projections, rate_gradient_descent,
    rate_mann_cat0, rate_ppa, theta_for_mann, theta_from_sequence, RateFn, StepSequence,
};
use crate::rounding::{add_up, mul_up};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_STEPS: usize = 200;
/// Truncation of the Specker-style series; the neglected tail is below 2⁻⁴⁰.
pub const DEFAULT_SPECKER_TRUNCATION: usize = 40;

/// Samples and seed used to calibrate the semi-algebraic regularity constant.
pub const CALIBRATION_SAMPLES: usize = 20_000;
pub const CALIBRATION_SEED: u64 = 0x00ca_11b8;
/// Safety factor applied to the sampled regularity constant.
pub const CALIBRATION_MARGIN: f64 = 1.25;

pub type ScalarField = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualKind {
    /// d(x, Tx)
    FixedPoint,
    /// f(x) − m
    Minimization,
    /// dist(0, A(x))
    Operator,
    /// min{0, inf_y G(x, y)}
    Equilibrium,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpeckerSequence {
    Constant {
        value: f64,
    },
    /// Explicit terms; the last one repeats.
    List {
        values: Vec<f64>,
    },
    /// aₙ = 1 − 2^(−⌊n/block⌋)
    SlowDyadic {
        block: u32,
    },
}

impl SpeckerSequence {
    pub fn term(&self, n: usize) -> f64 {
        match self {
            SpeckerSequence::Constant { value } => *value,
            SpeckerSequence::List { values } => values[n.min(values.len() - 1)],
            SpeckerSequence::SlowDyadic { block } => 1.0 - 0.5f64.powi((n / *block as usize) as i32),
        }
    }

    fn validate(&self, truncation: usize) -> Result<()> {
        match self {
            SpeckerSequence::List { values } if values.is_empty() => {
                return Err(Error::param("sequence", "empty list"))
            }
            SpeckerSequence::SlowDyadic { block: 0 } => return Err(Error::param("block", "must be >= 1")),
            _ => {}
        }
        let terms: Vec<f64> = (0..=truncation).map(|n| self.term(n)).collect();
        if terms.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::param("sequence", "terms must lie in [0, 1]"));
        }
        if terms.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::param("sequence", "terms must be nondecreasing"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderConstants {
    pub mu: f64,
    pub gamma: f64,
}

/// The problem family and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemKind {
    /// Common point of finitely many polyhedral sets by cyclic projections.
    CfpHalfspaces {
        sets: Vec<ConvexSet>,
        /// Regularity constant c; calibrated by sampling when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        calibration: Option<f64>,
    },
    /// Best approximation pair of two parallel halfspaces by alternating
    /// projections.
    BestApproxPair { u: ConvexSet, v: ConvexSet },
    /// Minimise ‖x‖ by the proximal point algorithm.
    MinNorm {},
    /// Minimise `weight·g` by the proximal point algorithm.
    Minimization {
        objective: ProxFunction,
        #[serde(default = "one")]
        weight: f64,
    },
    /// Variational inequality for A(x) = Mx + q on a box.
    ViBox {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
        lower: Vector,
        upper: Vector,
    },
    /// Gradient descent on ½xᵀQx with diagonal Q.
    GradQuadratic {
        diag: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz: Option<f64>,
    },
    /// T(x) = (x + f(x))/2 with f(x) = Σ 2^(−n−1) max{x, aₙ}, truncated.
    SpeckerDemo {
        sequence: SpeckerSequence,
        #[serde(default = "default_truncation")]
        truncation: usize,
    },
    /// T(x) = center + k(x − center).
    Contraction { k: f64, center: Vector },
    /// T(x, y) = (x, (y + 1 − x)/2) on the triangle x, y ≥ 0, x + y ≤ 1.
    OrbitalTriangle {},
    /// Douglas–Rachford for two lines through the origin meeting at `angle`.
    DouglasRachfordLines {
        angle: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        holder: Option<HolderConstants>,
    },
    /// Averaged relaxed projections onto polyhedral sets.
    Crombez {
        sets: Vec<ConvexSet>,
        weights: Vec<f64>,
        relaxations: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

fn default_truncation() -> usize {
    DEFAULT_SPECKER_TRUNCATION
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn default_steps() -> usize {
    DEFAULT_STEPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub driver: Option<Driver>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// λₙ for Mann-type drivers, γₙ for the proximal point algorithm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<StepSequence>,
}

impl Default for RecipeConfig {
    fn default() -> Self {
        RecipeConfig {
            driver: None,
            steps: DEFAULT_STEPS,
            schedule: None,
        }
    }
}

/// Serialisable description of a problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub name: String,
    #[serde(flatten)]
    pub problem: ProblemKind,
    pub x0: Vector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// User-supplied modulus; replaces the bundled one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus: Option<Modulus>,
    /// User-supplied rate; replaces the bundled one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateFn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_star: Option<f64>,
    #[serde(default)]
    pub recipe: RecipeConfig,
}

impl ProblemConfig {
    pub fn new(name: impl Into<String>, problem: ProblemKind, x0: Vector) -> Self {
        ProblemConfig {
            schema_version: SCHEMA_VERSION,
            name: name.into(),
            problem,
            x0,
            z: None,
            b: None,
            modulus: None,
            rate: None,
            eps_star: None,
            recipe: RecipeConfig::default(),
        }
    }

    pub fn with_b(mut self, b: f64) -> Self {
        self.b = Some(b);
        self
    }

    pub fn with_schedule(mut self, schedule: StepSequence) -> Self {
        self.recipe.schedule = Some(schedule);
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.recipe.steps = steps;
        self
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ProblemConfig = serde_json::from_str(s)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// First 16 hex digits of the SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(serde_json::to_vec(self).expect("config serialises"));
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn build(&self) -> Result<ProblemInstance> {
        ProblemInstance::from_config(self.clone())
    }
}

/// An objective with known minimum value m, for the growth audit and the
/// finite-difference gradient audit.
#[derive(Clone)]
pub struct Objective {
    pub value: ScalarField,
    pub gradient: Option<VectorField>,
    pub minimum: f64,
}

/// Certified data attached to an instance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Certificate {
    pub modulus: Option<Modulus>,
    pub context: Option<ModulusContext>,
    pub rate: Option<RateFn>,
    pub eps_star: Option<f64>,
    /// Finite termination at α(min{ε*, φ(ε*)}) rather than α(ε*).
    pub termination_uses_modulus: bool,
    /// Modulus of metric regularity of the constraint sets, if any.
    pub regularity: Option<Modulus>,
    /// The modulus or rate was supplied by the user rather than derived.
    pub user_supplied: bool,
}

/// Indices certified at one accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertifiedIndices {
    /// α(ε): some n ≤ α(ε) has |F(xₙ)| < ε.
    pub alpha: u64,
    /// α(φ(ε)): dist(xₙ, zer F) < ε for all n beyond.
    pub dist: u64,
    /// α(φ(ε/2)): d(xₙ, x_m) < ε for all n, m beyond.
    pub cauchy: u64,
}

#[derive(Clone)]
pub struct ProblemInstance {
    pub name: String,
    pub config: Option<ProblemConfig>,
    pub residual_kind: ResidualKind,
    pub dimension: usize,
    residual: ScalarField,
    zero_distance: ScalarField,
    pub reference_zero: Vector,
    pub bound: f64,
    pub start: Vector,
    pub recipe: Option<Recipe>,
    pub steps: usize,
    pub certificate: Certificate,
    pub objective: Option<Objective>,
    /// Constraint sets of a feasibility problem.
    pub sets: Vec<ConvexSet>,
    /// Proximal family driven by the PPA recipe.
    pub prox: Option<ProxFamily>,
    /// Best approximation pair data: (U, V, dist(U, V)).
    pub pair: Option<(ConvexSet, ConvexSet, f64)>,
    pub notes: Vec<String>,
}

impl std::fmt::Debug for ProblemInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemInstance")
            .field("name", &self.name)
            .field("residual_kind", &self.residual_kind)
            .field("dimension", &self.dimension)
            .field("reference_zero", &self.reference_zero)
            .field("bound", &self.bound)
            .field("start", &self.start)
            .field("certificate", &self.certificate)
            .finish_non_exhaustive()
    }
}

impl ProblemInstance {
    /// A bare instance from oracles, without recipe or certificate.
    pub fn from_oracles(
        name: impl Into<String>,
        residual: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        zero_distance: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        z: Vector,
        b: f64,
    ) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::param("b", format!("{b} must be > 0")));
        }
        Ok(ProblemInstance {
            name: name.into(),
            config: None,
            residual_kind: ResidualKind::FixedPoint,
            dimension: z.dim(),
            residual: Arc::new(residual),
            zero_distance: Arc::new(zero_distance),
            start: z.clone(),
            reference_zero: z,
            bound: b,
            recipe: None,
            steps: DEFAULT_STEPS,
            certificate: Certificate::default(),
            objective: None,
            sets: Vec::new(),
            prox: None,
            pair: None,
            notes: Vec::new(),
        })
    }

    pub fn from_config(cfg: ProblemConfig) -> Result<Self> {
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {}",
                cfg.schema_version
            )));
        }
        if !cfg.x0.is_finite() {
            return Err(Error::param("x0", "non-finite start point"));
        }
        let mut inst = match &cfg.problem {
            ProblemKind::CfpHalfspaces { sets, calibration } => build_cfp(&cfg, sets, *calibration)?,
            ProblemKind::BestApproxPair { u, v } => build_best_approx(&cfg, u, v)?,
            ProblemKind::MinNorm {} => build_min_norm(&cfg)?,
            ProblemKind::Minimization { objective, weight } => build_minimization(&cfg, objective, *weight)?,
            ProblemKind::ViBox {
                matrix,
                offset,
                lower,
                upper,
            } => build_vi_box(&cfg, matrix, offset, lower, upper)?,
            ProblemKind::GradQuadratic { diag, lipschitz } => build_grad_quadratic(&cfg, diag, *lipschitz)?,
            ProblemKind::SpeckerDemo { sequence, truncation } => build_specker(&cfg, sequence, *truncation)?,
            ProblemKind::Contraction { k, center } => build_contraction(&cfg, *k, center)?,
            ProblemKind::OrbitalTriangle {} => build_orbital_triangle(&cfg)?,
            ProblemKind::DouglasRachfordLines { angle, holder } => build_dr_lines(&cfg, *angle, *holder)?,
            ProblemKind::Crombez {
                sets,
                weights,
                relaxations,
            } => build_crombez(&cfg, sets, weights, relaxations)?,
        };
        if let Some(d) = cfg.recipe.driver {
            if inst.recipe.as_ref().map(Recipe::driver) != Some(d) {
                return Err(Error::Config(format!(
                    "driver {d:?} does not match the {} recipe",
                    inst.name
                )));
            }
        }
        if let Some(phi) = &cfg.modulus {
            phi.check(DEFAULT_ETA)?;
            inst.certificate.modulus = Some(phi.clone());
            inst.certificate.user_supplied = true;
        }
        if let Some(rate) = &cfg.rate {
            rate.check()?;
            inst.certificate.rate = Some(rate.clone());
            inst.certificate.user_supplied = true;
        }
        if let Some(e) = cfg.eps_star {
            if !(e > 0.0) {
                return Err(Error::param("eps_star", format!("{e} must be > 0")));
            }
            inst.certificate.eps_star = Some(e);
            inst.certificate.termination_uses_modulus = inst.certificate.modulus.is_some();
        }
        if inst.certificate.modulus.is_some() && inst.certificate.context.is_none() {
            inst.certificate.context = Some(ModulusContext::new(inst.reference_zero.clone(), inst.bound, None)?);
        }
        inst.steps = cfg.recipe.steps;
        inst.validate()?;
        inst.config = Some(cfg);
        Ok(inst)
    }

    fn validate(&self) -> Result<()> {
        self.reference_zero.check_dim(&self.start)?;
        let fz = self.residual(&self.reference_zero);
        if !(fz <= DEFAULT_ETA) {
            return Err(Error::Config(format!("{}: |F(z)| = {fz} is not zero", self.name)));
        }
        let dz = self.zero_distance(&self.reference_zero);
        if !(dz <= DEFAULT_ETA) {
            return Err(Error::Config(format!(
                "{}: z lies {dz} away from the zero set",
                self.name
            )));
        }
        let d0 = dist_unchecked(&self.start, &self.reference_zero);
        if !(d0 <= self.bound + DEFAULT_ETA) {
            return Err(Error::Config(format!(
                "{}: d(x0, z) = {d0} exceeds b = {}",
                self.name, self.bound
            )));
        }
        Ok(())
    }

    /// |F(x)|, with +∞ outside the domain.
    pub fn residual(&self, x: &Vector) -> f64 {
        (self.residual)(x).abs()
    }

    pub fn zero_distance(&self, x: &Vector) -> f64 {
        (self.zero_distance)(x)
    }

    pub fn residual_fn(&self) -> ScalarField {
        self.residual.clone()
    }

    pub fn zero_distance_fn(&self) -> ScalarField {
        self.zero_distance.clone()
    }

    /// B̄(z, b), the ball the certificate refers to.
    pub fn ball(&self) -> ClosedBall {
        ClosedBall {
            center: self.reference_zero.clone(),
            radius: self.bound,
        }
    }

    pub fn hash(&self) -> Option<String> {
        self.config.as_ref().map(ProblemConfig::hash)
    }

    pub fn recipe(&self) -> Result<&Recipe> {
        self.recipe
            .as_ref()
            .ok_or_else(|| Error::NotApplicable(format!("{} has no iteration recipe", self.name)))
    }

    /// Runs the recipe from x₀ and fills every trace column.
    pub fn run(&self, steps: usize) -> Result<Trace> {
        let mut trace = self.recipe()?.run(&self.start, steps)?;
        trace.instrument(&*self.residual, &*self.zero_distance, Some(&self.reference_zero));
        trace.meta.instance = Some(self.name.clone());
        trace.meta.instance_hash = self.hash();
        Ok(trace)
    }

    pub fn modulus(&self) -> Result<&Modulus> {
        self.certificate
            .modulus
            .as_ref()
            .ok_or(Error::MissingCertificate("no modulus bundled"))
    }

    pub fn rate(&self) -> Result<&RateFn> {
        self.certificate
            .rate
            .as_ref()
            .ok_or(Error::MissingCertificate("no rate bundled"))
    }

    pub fn certified_indices(&self, eps: f64) -> Result<CertifiedIndices> {
        let alpha = self.rate()?;
        let phi = self.modulus()?;
        Ok(CertifiedIndices {
            alpha: alpha.eval(eps),
            dist: dist_rate(alpha, phi).eval(eps),
            cauchy: cauchy_modulus(alpha, phi).eval(eps),
        })
    }

    pub fn termination_index(&self) -> Result<u64> {
        let eps_star = self
            .certificate
            .eps_star
            .ok_or_else(|| Error::NotApplicable(format!("{} declares no eps_star", self.name)))?;
        let phi = if self.certificate.termination_uses_modulus {
            Some(self.modulus()?)
        } else {
            None
        };
        finite_termination_index(self.rate()?, phi, eps_star)
    }

    /// `d(Tx, P_V x)² − (ρ² + d(u, x)² − d(u, Tx)²)` for a best
    /// approximation pair; nonpositive whenever u ∈ Fix T.
    pub fn pair_defect(&self, x: &Vector, u: &Vector) -> Result<f64> {
        let (uset, vset, rho) = self
            .pair
            .as_ref()
            .ok_or_else(|| Error::NotApplicable(format!("{} is not a best approximation pair", self.name)))?;
        let pv = vset.project(x)?;
        let tx = uset.project(&pv)?;
        let lhs = dist_unchecked(&tx, &pv).powi(2);
        let rhs = rho * rho + dist_unchecked(u, x).powi(2) - dist_unchecked(u, &tx).powi(2);
        Ok(lhs - rhs)
    }
}

fn base(
    cfg: &ProblemConfig,
    kind: ResidualKind,
    residual: ScalarField,
    zero_distance: ScalarField,
    z: Vector,
) -> Result<ProblemInstance> {
    let z = cfg.z.clone().unwrap_or(z);
    z.check_dim(&cfg.x0)?;
    let b = match cfg.b {
        Some(b) => b,
        None => {
            let d = dist_unchecked(&cfg.x0, &z);
            if d > 0.0 {
                add_up(d, d * 1e-12)
            } else {
                1.0
            }
        }
    };
    let mut inst =
        ProblemInstance::from_oracles(cfg.name.clone(), move |x| residual(x), move |x| zero_distance(x), z, b)?;
    inst.residual_kind = kind;
    inst.dimension = cfg.x0.dim();
    inst.start = cfg.x0.clone();
    Ok(inst)
}

fn shared(f: impl Fn(&Vector) -> f64 + Send + Sync + 'static) -> ScalarField {
    Arc::new(f)
}

fn projections(sets: &[ConvexSet]) -> Vec<SharedOperator> {
    sets.iter()
        .map(|s| Arc::new(Projection { set: s.clone() }) as SharedOperator)
        .collect()
}

fn max_set_distance(sets: &[ConvexSet], x: &Vector) -> f64 {
    sets.iter()
        .map(|s| s.distance(x).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max)
}

fn check_sets(sets: &[ConvexSet], dim: usize) -> Result<()> {
    if sets.is_empty() {
        return Err(Error::param("sets", "empty list"));
    }
    for s in sets {
        s.validate()?;
        if s.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.dim(),
            });
        }
    }
    Ok(())
}

fn build_cfp(cfg: &ProblemConfig, sets: &[ConvexSet], calibration: Option<f64>) -> Result<ProblemInstance> {
    let dim = cfg.x0.dim();
    check_sets(sets, dim)?;
    let poly = Arc::new(Polyhedron::from_sets(sets)?);
    let z = poly.project(&cfg.x0)?;
    let owned = sets.to_vec();
    let residual = shared(move |x| max_set_distance(&owned, x));
    let p = poly.clone();
    let oracle = shared(move |x| p.distance(x).unwrap_or(f64::INFINITY));
    let mut inst = base(cfg, ResidualKind::FixedPoint, residual.clone(), oracle.clone(), z)?;
    let m = sets.len() as u32;
    let c = match calibration {
        Some(c) => c,
        None => {
            let ball = inst.ball();
            let grid = log_grid(inst.bound * 1e-3, 2.0 * inst.bound, 24);
            let table = estimate_modulus_from_oracles(
                &*residual,
                &*oracle,
                &ball,
                &grid,
                CALIBRATION_SAMPLES,
                CALIBRATION_SEED,
            )?;
            mul_up(calibrate_semialgebraic_c(&table, dim as u32, 1, m)?, CALIBRATION_MARGIN)
        }
    };
    let rho = modulus_metric_regularity_semialgebraic(dim as u32, 1, m, c)?;
    inst.certificate.modulus = Some(compose_with_metric_regularity(&modulus_retraction(), &rho));
    inst.certificate.regularity = Some(rho);
    if m <= 2 {
        inst.certificate.rate = Some(rate_alternating_projections(0.0, inst.bound)?);
    } else {
        inst.notes
            .push("no closed-form rate for more than two sets; supply one in `rate`".into());
    }
    inst.recipe = Some(Recipe::Cyclic(projections(sets)));
    inst.sets = sets.to_vec();
    Ok(inst)
}

/// Unit normal and offset of a halfspace.
fn unit_halfspace(set: &ConvexSet) -> Result<(Vector, f64)> {
    match set {
        ConvexSet::Halfspace { normal, offset } => {
            let n = normal.norm();
            Ok((normal.scale(1.0 / n), offset / n))
        }
        _ => Err(Error::NotApplicable(
            "best approximation pairs need two halfspaces".into(),
        )),
    }
}

fn build_best_approx(cfg: &ProblemConfig, u: &ConvexSet, v: &ConvexSet) -> Result<ProblemInstance> {
    u.validate()?;
    v.validate()?;
    let (a, beta) = unit_halfspace(u)?;
    let (av, beta_v) = unit_halfspace(v)?;
    a.check_dim(&cfg.x0)?;
    a.check_dim(&av)?;
    if a.dot(&av) > -1.0 + 1e-12 {
        return Err(Error::NotApplicable(
            "the halfspaces must have opposite normals so that dist(U, V) has a closed form".into(),
        ));
    }
    // V = {⟨a, x⟩ ≥ lo}
    let lo = -beta_v;
    let gap = lo - beta;
    let ops = projections(&[u.clone(), v.clone()]);
    let t = compose(ops)?;
    let t_res = t.clone();
    let residual = shared(move |x| t_res.apply(x).map_or(f64::INFINITY, |y| dist_unchecked(x, &y)));
    let (a_o, z);
    let oracle = if gap > 0.0 {
        a_o = a.clone();
        z = cfg.x0.axpy(beta - a.dot(&cfg.x0), &a);
        shared(move |x| (a_o.dot(x) - beta).abs())
    } else {
        a_o = a.clone();
        let s = a.dot(&cfg.x0);
        let target = s.clamp(lo, beta);
        z = cfg.x0.axpy(target - s, &a);
        shared(move |x| {
            let s = a_o.dot(x);
            (lo - s).max(s - beta).max(0.0)
        })
    };
    let mut inst = base(cfg, ResidualKind::FixedPoint, residual, oracle, z)?;
    let rho = gap.max(0.0);
    inst.certificate.rate = Some(rate_alternating_projections(rho, inst.bound)?);
    if gap > 0.0 {
        // For parallel halfspaces the bounded-regularity threshold is δ(ε) = ε.
        inst.certificate.modulus = Some(modulus_bounded_regularity_pair(rho, Modulus::linear(1.0), inst.bound)?);
    } else {
        inst.notes
            .push("the sets intersect: Fix T = U ∩ V and no modulus is bundled".into());
    }
    inst.recipe = Some(Recipe::Picard(t));
    inst.pair = Some((u.clone(), v.clone(), rho));
    inst.sets = vec![u.clone(), v.clone()];
    Ok(inst)
}

fn ppa_schedule(cfg: &ProblemConfig) -> Result<StepSequence> {
    let s = cfg.recipe.schedule.clone().unwrap_or(StepSequence::constant(1.0));
    match &s {
        StepSequence::Constant { value } if !(*value > 0.0) => Err(Error::param("gamma", "PPA steps must be positive")),
        StepSequence::List { values } if values.iter().any(|g| !(*g > 0.0)) => {
            Err(Error::param("gamma", "PPA steps must be positive"))
        }
        StepSequence::Harmonic { scale, .. } if !(*scale > 0.0) => {
            Err(Error::param("gamma", "PPA steps must be positive"))
        }
        _ => Ok(s),
    }
}

fn build_min_norm(cfg: &ProblemConfig) -> Result<ProblemInstance> {
    let dim = cfg.x0.dim();
    // dist(0, ∂‖·‖(x)) is 0 at the origin and 1 elsewhere.
    let residual = shared(|x| if x.norm() == 0.0 { 0.0 } else { 1.0 });
    let oracle = shared(|x| x.norm());
    let mut inst = base(cfg, ResidualKind::Operator, residual, oracle, Vector::zeros(dim))?;
    let schedule = ppa_schedule(cfg)?;
    let theta = theta_from_sequence(schedule.clone(), true)?;
    inst.certificate.modulus = Some(modulus_ppa_weak_sharp(
        &Modulus::linear(1.0),
        &Modulus::linear(1.0),
        inst.bound,
    )?);
    inst.certificate.rate = Some(rate_ppa(&theta, inst.bound)?);
    inst.certificate.eps_star = Some(1.0);
    let family = ProxFamily {
        f: ProxFunction::Norm,
        weight: 1.0,
        dim,
    };
    inst.recipe = Some(Recipe::Ppa {
        family: family.clone(),
        schedule,
    });
    inst.prox = Some(family);
    inst.objective = Some(Objective {
        value: shared(|x| x.norm()),
        gradient: None,
        minimum: 0.0,
    });
    Ok(inst)
}

fn build_minimization(cfg: &ProblemConfig, objective: &ProxFunction, weight: f64) -> Result<ProblemInstance> {
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(Error::param("weight", format!("{weight} must be > 0")));
    }
    let dim = cfg.x0.dim();
    let (z, phi) = match objective {
        ProxFunction::Norm => (Vector::zeros(dim), modulus_weak_sharp(Modulus::linear(weight))?),
        ProxFunction::ScaledQuadratic { center } => {
            center.check_dim(&cfg.x0)?;
            (
                center.clone(),
                modulus_weak_sharp(Modulus::power(weight / 2.0, 1.0, 2.0))?,
            )
        }
        ProxFunction::Indicator { .. } => {
            return Err(Error::NotApplicable(
                "indicator objectives have no finite growth modulus".into(),
            ))
        }
    };
    let f = objective.clone();
    let value = shared(move |x| weight * f.value(x));
    let zc = z.clone();
    let oracle = shared(move |x| dist_unchecked(x, &zc));
    let mut inst = base(cfg, ResidualKind::Minimization, value.clone(), oracle, z)?;
    inst.certificate.modulus = Some(phi);
    let family = ProxFamily {
        f: objective.clone(),
        weight,
        dim,
    };
    inst.recipe = Some(Recipe::Ppa {
        family: family.clone(),
        schedule: ppa_schedule(cfg)?,
    });
    inst.prox = Some(family);
    let gradient: Option<VectorField> = match objective {
        ProxFunction::ScaledQuadratic { center } => {
            let c = center.clone();
            Some(Arc::new(move |x: &Vector| x.sub(&c).scale(weight)))
        }
        _ => None,
    };
    inst.objective = Some(Objective {
        value,
        gradient,
        minimum: 0.0,
    });
    Ok(inst)
}

fn build_vi_box(
    cfg: &ProblemConfig,
    matrix: &[Vec<f64>],
    offset: &[f64],
    lower: &Vector,
    upper: &Vector,
) -> Result<ProblemInstance> {
    let n = cfg.x0.dim();
    lower.check_dim(&cfg.x0)?;
    upper.check_dim(&cfg.x0)?;
    if matrix.len() != n || matrix.iter().any(|r| r.len() != n) || offset.len() != n {
        return Err(Error::param(
            "matrix",
            format!("A must be {n}x{n} with an offset of length {n}"),
        ));
    }
    if (0..n).any(|i| !(lower[i].is_finite() && upper[i].is_finite() && lower[i] <= upper[i])) {
        return Err(Error::param("box", "bounds must be finite with lower <= upper"));
    }
    let m = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
    let q = DVector::from_column_slice(offset);
    let sym = (&m + m.transpose()) * 0.5;
    let mu = sym.symmetric_eigenvalues().min();
    if !(mu > 0.0) {
        return Err(Error::NotApplicable(
            "the solution oracle needs a strongly monotone A (symmetric part positive definite)".into(),
        ));
    }
    let norm = m.clone().svd(false, false).singular_values.max();
    let (lo, hi) = (lower.clone(), upper.clone());
    let a_of = {
        let (m, q) = (m.clone(), q.clone());
        move |x: &Vector| -> Vec<f64> {
            let v = &m * DVector::from_column_slice(x.coords()) + &q;
            v.iter().copied().collect()
        }
    };
    let inside = {
        let (lo, hi) = (lo.clone(), hi.clone());
        move |x: &Vector| (0..x.dim()).all(|i| lo[i] <= x[i] && x[i] <= hi[i])
    };
    let residual = {
        let (lo, hi, a_of, inside) = (lo.clone(), hi.clone(), a_of.clone(), inside.clone());
        shared(move |x| {
            if !inside(x) {
                return f64::NEG_INFINITY;
            }
            let a = a_of(x);
            let total: f64 = (0..x.dim())
                .map(|i| (a[i] * (lo[i] - x[i])).min(a[i] * (hi[i] - x[i])))
                .sum();
            total.min(0.0)
        })
    };
    let step = mu / (norm * norm);
    let box_set = ConvexSet::Box { lower: lo, upper: hi };
    let t: SharedOperator = {
        let (a_of, bs) = (a_of.clone(), box_set.clone());
        Arc::new(FnOperator::new(
            "projected_step",
            n,
            OperatorClass::Nonexpansive,
            move |x| {
                let a = Vector::new(a_of(x)).expect("finite");
                bs.project(&x.axpy(-step, &a)).expect("dimension checked")
            },
        ))
    };
    let solution = fixed_point_by_contraction(t.as_ref(), &box_set.project(&cfg.x0)?)?;
    if let Some(z) = &cfg.z {
        if dist_unchecked(z, &solution) > 1e-9 {
            return Err(Error::Config(format!(
                "z = {:?} is not the VI solution {:?}",
                z.coords(),
                solution.coords()
            )));
        }
    }
    let zc = solution.clone();
    let oracle = shared(move |x| dist_unchecked(x, &zc));
    let mut inst = base(cfg, ResidualKind::Equilibrium, residual, oracle, solution)?;
    // −F(x) ≥ ⟨A(x), x − z⟩ ≥ μ‖x − z‖²
    inst.certificate.modulus = Some(Modulus::power(mu, 1.0, 2.0));
    inst.recipe = Some(Recipe::Picard(t));
    inst.sets = vec![box_set];
    Ok(inst)
}

fn fixed_point_by_contraction(t: &dyn crate::operators::Operator, start: &Vector) -> Result<Vector> {
    let mut x = start.clone();
    for _ in 0..1_000_000 {
        let next = t.apply(&x)?;
        let moved = dist_unchecked(&next, &x);
        x = next;
        if moved <= 1e-16 * (1.0 + x.norm()) {
            return Ok(x);
        }
    }
    Err(Error::Config("VI solution did not settle".into()))
}

fn build_grad_quadratic(cfg: &ProblemConfig, diag: &[f64], lipschitz: Option<f64>) -> Result<ProblemInstance> {
    let dim = cfg.x0.dim();
    if diag.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: diag.len(),
        });
    }
    if diag.iter().any(|q| !(*q >= 0.0 && q.is_finite())) {
        return Err(Error::param("diag", "Q must be positive semidefinite"));
    }
    let qmax = diag.iter().copied().fold(0.0, f64::max);
    let qmin = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let l = lipschitz.unwrap_or(qmax);
    if !(l > 0.0 && l >= qmax) {
        return Err(Error::param(
            "lipschitz",
            format!("L = {l} must be positive and >= max q = {qmax}"),
        ));
    }
    let q = Vector::new(diag.to_vec())?;
    let grad: VectorField = {
        let q = q.clone();
        Arc::new(move |x: &Vector| {
            Vector::new(x.coords().iter().zip(q.coords()).map(|(x, q)| x * q).collect()).expect("finite")
        })
    };
    let g = grad.clone();
    let residual = shared(move |x| g(x).norm() / l);
    let qo = q.clone();
    let oracle = shared(move |x| {
        x.coords()
            .iter()
            .zip(qo.coords())
            .filter(|(_, q)| **q > 0.0)
            .map(|(x, _)| x * x)
            .sum::<f64>()
            .sqrt()
    });
    let z = Vector::new(
        cfg.x0
            .coords()
            .iter()
            .zip(diag)
            .map(|(x, q)| if *q > 0.0 { 0.0 } else { *x })
            .collect(),
    )?;
    let mut inst = base(cfg, ResidualKind::FixedPoint, residual, oracle, z)?;
    inst.certificate.rate = Some(rate_gradient_descent(inst.bound)?);
    if qmin > 0.0 {
        inst.certificate.modulus = Some(modulus_strongly_accretive(Modulus::linear(qmin), Some(1.0 / l))?);
    } else {
        inst.notes
            .push("Q is singular: no modulus is bundled, only the rate".into());
    }
    inst.recipe = Some(Recipe::GradientDescent(Arc::new(gradient_step(grad.clone(), l, dim)?)));
    let qv = q.clone();
    inst.objective = Some(Objective {
        value: shared(move |x| 0.5 * x.coords().iter().zip(qv.coords()).map(|(x, q)| q * x * x).sum::<f64>()),
        gradient: Some(grad),
        minimum: 0.0,
    });
    Ok(inst)
}

fn build_specker(cfg: &ProblemConfig, sequence: &SpeckerSequence, truncation: usize) -> Result<ProblemInstance> {
    if cfg.x0.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: cfg.x0.dim(),
        });
    }
    if truncation == 0 || truncation > 1000 {
        return Err(Error::param("truncation", "must lie in 1..=1000"));
    }
    sequence.validate(truncation)?;
    let a: Vec<f64> = (0..=truncation).map(|n| sequence.term(n)).collect();
    let limit = a[truncation];
    let terms = a.clone();
    let f = move |x: f64| -> f64 {
        let n = terms.len() - 1;
        let head: f64 = (0..n).map(|k| 0.5f64.powi(k as i32 + 1) * x.max(terms[k])).sum();
        head + 0.5f64.powi(n as i32) * x.max(terms[n])
    };
    let t: SharedOperator = Arc::new(FnOperator::new(
        "specker_average",
        1,
        OperatorClass::FirmlyNonexpansive,
        move |x| Vector::scalar(0.5 * (x[0] + f(x[0]))),
    ));
    let tr = t.clone();
    let residual = shared(move |x| tr.apply(x).map_or(f64::INFINITY, |y| dist_unchecked(x, &y)));
    let oracle = shared(move |x| (limit - x[0]).max(0.0));
    let z = Vector::scalar(limit.max(cfg.x0[0]));
    let mut inst = base(cfg, ResidualKind::FixedPoint, residual, oracle, z)?;
    // T is firmly nonexpansive, so Picard is the λ = 1/2 Mann iteration of 2T − Id.
    inst.certificate.rate = Some(rate_firmly_nonexpansive_picard(inst.bound)?);
    inst.notes.push(format!(
        "demo: no certified modulus exists in general; series truncated after {truncation} terms (tail < 2^-{truncation})"
    ));
    inst.recipe = Some(Recipe::Picard(t));
    Ok(inst)
}

/// Rate of asymptotic regularity for the Picard iteration of a firmly
/// nonexpansive T: d(x, Tx) = d(x, Rx)/2 for R = 2T − Id, and Picard on T is
/// the λₙ ≡ 1/2 Mann iteration of R.
pub fn rate_firmly_nonexpansive_picard(b: f64) -> Result<RateFn> {
    let theta = theta_for_mann(StepSequence::constant(0.5))?;
    Ok(RateFn::compose_mod(rate_mann_cat0(&theta, b)?, Modulus::linear(2.0)))
}

fn build_contraction(cfg: &ProblemConfig, k: f64, center: &Vector) -> Result<ProblemInstance> {
    center.check_dim(&cfg.x0)?;
    let phi = modulus_contraction(k)?;
    let c = center.clone();
    let t: SharedOperator = Arc::new(FnOperator::new(
        "contraction",
        center.dim(),
        OperatorClass::FirmlyNonexpansive,
        move |x| c.axpy(k, &x.sub(&c)),
    ));
    let tr = t.clone();
    let residual = shared(move |x| tr.apply(x).map_or(f64::INFINITY, |y| dist_unchecked(x, &y)));
    let c = center.clone();
    let oracle = shared(move |x| dist_unchecked(x, &c));
    let mut inst = base(cfg, ResidualKind::FixedPoint, residual, oracle, center.clone())?;
    // d(xₙ, Txₙ) = kⁿ d(x₀, Tx₀) ≤ kⁿ (1 − k) b
    let r0 = mul_up(add_up(1.0, -k), inst.bound);
    inst.certificate.rate = Some(RateFn::geometric(k, add_up(r0, r0 * 1e-12))?);
    inst.certificate.modulus = Some(phi);
    inst.recipe = Some(Recipe::Picard(t));
    Ok(inst)
}

fn in_triangle(x: &Vector) -> bool {
    x[0] >= 0.0 && x[1] >= 0.0 && x[0] + x[1] <= 1.0
}

/// Distance from p to the segment {(t, 1 − t) : t ∈ [0, 1]}.
fn distance_to_hypotenuse(p: &Vector) -> f64 {
    let t = ((p[0] - p[1] + 1.0) / 2.0).clamp(0.0, 1.0);
    ((p[0] - t).powi(2) + (p[1] - 1.0 + t).powi(2)).sqrt()
}

fn build_orbital_triangle(cfg: &ProblemConfig) -> Result<ProblemInstance> {
    if cfg.x0.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: cfg.x0.dim(),
        });
    }
    if !in_triangle(&cfg.x0) {
        return Err(Error::param("x0", "start point must lie in the triangle"));
    }
    let t: SharedOperator = Arc::new(FnOperator::new("orbital_triangle", 2, OperatorClass::General, |p| {
        Vector::new(vec![p[0], (p[1] + 1.0 - p[0]) / 2.0]).expect("finite")
    }));
    let residual = shared(|p| {
        if in_triangle(p) {
            (1.0 - p[0] - p[1]).abs() / 2.0
        } else {
            f64::INFINITY
        }
    });
    let oracle = shared(distance_to_hypotenuse);
    let z = Vector::new(vec![cfg.x0[0], 1.0 - cfg.x0[0]])?;
    let mut inst = base(cfg, ResidualKind::FixedPoint, residual, oracle, z)?;
    inst.certificate.modulus = Some(modulus_orbital_contraction(0.5)?);
    // d(p, Tp) = dist(p, Fix T)/√2 ≤ b/√2, halved at every step.
    inst.certificate.rate = Some(RateFn::geometric(0.5, mul_up(inst.bound, FRAC_1_SQRT_2.next_up()))?);
    inst.recipe = Some(Recipe::Picard(t));
    Ok(inst)
}

fn build_dr_lines(cfg: &ProblemConfig, angle: f64, holder: Option<HolderConstants>) -> Result<ProblemInstance> {
    if cfg.x0.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: cfg.x0.dim(),
        });
    }
    if !(angle > 0.0 && angle < std::f64::consts::PI) {
        return Err(Error::param("angle", "must lie in (0, π)"));
    }
    let c1 = ConvexSet::hyperplane(vec![0.0, 1.0], 0.0)?;
    let c2 = ConvexSet::hyperplane(vec![-angle.sin(), angle.cos()], 0.0)?;
    let schedule = cfg.recipe.schedule.clone().unwrap_or(StepSequence::constant(0.5));
    let ja: SharedOperator = Arc::new(Projection { set: c2.clone() });
    let jb: SharedOperator = Arc::new(Projection { set: c1.clone() });
    let recipe = Recipe::douglas_rachford(ja, jb, schedule.clone())?;
    let t = recipe.operator().expect("Douglas–Rachford has an operator");
    let residual = shared(move |x| t.apply(x).map_or(f64::INFINITY, |y| dist_unchecked(x, &y)));
    let oracle = shared(|x| x.norm());
    let mut inst = base(cfg, ResidualKind::FixedPoint, residual, oracle, Vector::zeros(2))?;
    inst.certificate.rate = Some(rate_mann_cat0(&theta_for_mann(schedule)?, inst.bound)?);
    match holder {
        Some(h) => {
            inst.certificate.modulus = Some(modulus_holder(h.mu, h.gamma)?);
            inst.certificate.user_supplied = true;
        }
        None => inst
            .notes
            .push("no Hölder constants supplied: only the rate is bundled".into()),
    }
    inst.recipe = Some(recipe);
    inst.sets = vec![c1, c2];
    Ok(inst)
}

fn build_crombez(
    cfg: &ProblemConfig,
    sets: &[ConvexSet],
    weights: &[f64],
    relaxations: &[f64],
) -> Result<ProblemInstance> {
    check_sets(sets, cfg.x0.dim())?;
    let poly = Arc::new(Polyhedron::from_sets(sets)?);
    let z = poly.project(&cfg.x0)?;
    let op = Arc::new(convex_combination(
        projections(sets),
        weights.to_vec(),
        relaxations.to_vec(),
    )?);
    let t = op.clone();
    let residual = shared(move |x| {
        use crate::operators::Operator;
        t.apply(x).map_or(f64::INFINITY, |y| dist_unchecked(x, &y))
    });
    let oracle = shared(move |x| poly.distance(x).unwrap_or(f64::INFINITY));
    let mut inst = base(cfg, ResidualKind::FixedPoint, residual, oracle, z)?;
    inst.notes
        .push("no derived certificate; a user-supplied rate is audited for dominance only".into());
    inst.recipe = Some(Recipe::Crombez(op));
    inst.sets = sets.to_vec();
    Ok(inst)
}

/// `count` log-spaced points from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1).max(1) as f64).exp())
        .collect()
}

/// `{x : ⟨aᵢ, x⟩ ≤ βᵢ}` with an exact projection by enumeration of active
/// constraint sets (KKT conditions checked per candidate).
#[derive(Debug, Clone)]
pub struct Polyhedron {
    normals: Vec<Vector>,
    offsets: Vec<f64>,
    dim: usize,
}

/// Number of constraints up to which subsets are enumerated.
const MAX_CONSTRAINTS: usize = 16;

impl Polyhedron {
    pub fn new(constraints: Vec<(Vector, f64)>) -> Result<Self> {
        let dim = constraints
            .first()
            .map(|c| c.0.dim())
            .ok_or_else(|| Error::param("constraints", "empty list"))?;
        if constraints.len() > MAX_CONSTRAINTS {
            return Err(Error::NotApplicable(format!(
                "exact projection supports at most {MAX_CONSTRAINTS} constraints"
            )));
        }
        let mut normals = Vec::new();
        let mut offsets = Vec::new();
        for (a, b) in constraints {
            if a.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: a.dim(),
                });
            }
            let n = a.norm();
            if !(n > 0.0) {
                return Err(Error::param("constraints", "zero normal"));
            }
            normals.push(a.scale(1.0 / n));
            offsets.push(b / n);
        }
        Ok(Polyhedron { normals, offsets, dim })
    }

    /// Intersection of halfspaces, hyperplanes and boxes.
    pub fn from_sets(sets: &[ConvexSet]) -> Result<Self> {
        let mut cons = Vec::new();
        for s in sets {
            match s {
                ConvexSet::Halfspace { normal, offset } => cons.push((normal.clone(), *offset)),
                ConvexSet::Hyperplane { normal, offset } => {
                    cons.push((normal.clone(), *offset));
                    cons.push((normal.scale(-1.0), -offset));
                }
                ConvexSet::Box { lower, upper } => {
                    for i in 0..lower.dim() {
                        let mut e = vec![0.0; lower.dim()];
                        e[i] = 1.0;
                        cons.push((Vector::new(e.clone())?, upper[i]));
                        e[i] = -1.0;
                        cons.push((Vector::new(e)?, -lower[i]));
                    }
                }
                _ => {
                    return Err(Error::NotApplicable(
                        "exact intersection distance needs halfspaces, hyperplanes or boxes".into(),
                    ))
                }
            }
        }
        Polyhedron::new(cons)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn contains(&self, x: &Vector, eta: f64) -> bool {
        self.normals.iter().zip(&self.offsets).all(|(a, b)| a.dot(x) <= b + eta)
    }

    pub fn project(&self, x: &Vector) -> Result<Vector> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.dim(),
            });
        }
        if self.contains(x, 0.0) {
            return Ok(x.clone());
        }
        let m = self.normals.len();
        let tol = 1e-10 * (1.0 + x.norm() + self.offsets.iter().fold(0.0f64, |a, b| a.max(b.abs())));
        let mut best: Option<(f64, Vector)> = None;
        for mask in 1u32..(1u32 << m) {
            if mask.count_ones() as usize > self.dim {
                continue;
            }
            let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
            let Some((y, lambda)) = self.solve_active(x, &active) else {
                continue;
            };
            if lambda.iter().any(|l| *l < -tol) || !self.contains(&y, tol) {
                continue;
            }
            let d = dist_unchecked(x, &y);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, y));
            }
        }
        best.map(|(_, y)| y)
            .ok_or_else(|| Error::Infeasible("the constraint sets have empty intersection".into()))
    }

    /// Projection onto the affine set where `active` constraints hold with
    /// equality, with its multipliers.
    fn solve_active(&self, x: &Vector, active: &[usize]) -> Option<(Vector, Vec<f64>)> {
        let k = active.len();
        let gram = DMatrix::from_fn(k, k, |i, j| self.normals[active[i]].dot(&self.normals[active[j]]));
        let rhs = DVector::from_fn(k, |i, _| self.normals[active[i]].dot(x) - self.offsets[active[i]]);
        let chol = gram.cholesky()?;
        let lambda = chol.solve(&rhs);
        if lambda.iter().any(|l| !l.is_finite()) {
            return None;
        }
        let mut y = x.clone();
        for (i, &c) in active.iter().enumerate() {
            y = y.axpy(-lambda[i], &self.normals[c]);
        }
        Some((y, lambda.iter().copied().collect()))
    }

    pub fn distance(&self, x: &Vector) -> Result<f64> {
        Ok(dist_unchecked(x, &self.project(x)?))
    }
}

fn v(c: &[f64]) -> Vector {
    Vector::new(c.to_vec()).expect("finite literal")
}

pub fn instance_cfp_halfspaces(sets: Vec<ConvexSet>, x0: Vector) -> Result<ProblemInstance> {
    ProblemConfig::new(
        "cfp_halfspaces",
        ProblemKind::CfpHalfspaces {
            sets,
            calibration: None,
        },
        x0,
    )
    .build()
}

pub fn instance_best_approx_pair(u: ConvexSet, v: ConvexSet, x0: Vector) -> Result<ProblemInstance> {
    ProblemConfig::new("best_approx_pair", ProblemKind::BestApproxPair { u, v }, x0).build()
}

pub fn instance_min_norm(x0: Vector, gamma: StepSequence, b: f64) -> Result<ProblemInstance> {
    ProblemConfig::new("min_norm", ProblemKind::MinNorm {}, x0)
        .with_b(b)
        .with_schedule(gamma)
        .build()
}

pub fn instance_vi_box(
    matrix: Vec<Vec<f64>>,
    offset: Vec<f64>,
    lower: Vector,
    upper: Vector,
    x0: Vector,
) -> Result<ProblemInstance> {
    ProblemConfig::new(
        "vi_box",
        ProblemKind::ViBox {
            matrix,
            offset,
            lower,
            upper,
        },
        x0,
    )
    .build()
}

pub fn instance_grad_quadratic(diag: Vec<f64>, lipschitz: Option<f64>, x0: Vector) -> Result<ProblemInstance> {
    ProblemConfig::new("grad_quadratic", ProblemKind::GradQuadratic { diag, lipschitz }, x0).build()
}

pub fn instance_specker_demo(sequence: SpeckerSequence, truncation: usize, x0: f64) -> Result<ProblemInstance> {
    ProblemConfig::new(
        "specker_demo",
        ProblemKind::SpeckerDemo { sequence, truncation },
        Vector::new(vec![x0])?,
    )
    .build()
}

/// The catalog of shipped instances, one per problem file.
pub fn catalog() -> Vec<ProblemConfig> {
    let h = |n: &[f64], o: f64| ConvexSet::halfspace(n.to_vec(), o).expect("valid halfspace");
    let mut min_norm = ProblemConfig::new("min_norm", ProblemKind::MinNorm {}, v(&[2.3]))
        .with_b(3.0)
        .with_schedule(StepSequence::constant(1.0))
        .with_steps(30);
    min_norm.recipe.driver = Some(Driver::Ppa);
    let min_norm_2d = ProblemConfig {
        name: "min_norm_2d".into(),
        x0: v(&[1.5, -1.8]),
        ..min_norm.clone()
    };
    let mut dr = ProblemConfig::new(
        "douglas_rachford_lines",
        ProblemKind::DouglasRachfordLines {
            angle: std::f64::consts::FRAC_PI_3,
            holder: Some(HolderConstants { mu: 1.2, gamma: 1.0 }),
        },
        v(&[1.0, 0.5]),
    )
    .with_schedule(StepSequence::constant(0.5));
    dr.recipe.steps = 100;
    let mut crombez = ProblemConfig::new(
        "crombez_quadrant",
        ProblemKind::Crombez {
            sets: vec![h(&[1.0, 0.0], 0.0), h(&[0.0, 1.0], 0.0)],
            weights: vec![0.5, 0.5],
            relaxations: vec![1.0, 1.0],
        },
        v(&[2.0, 2.0]),
    );
    crombez.rate = Some(RateFn::table(vec![(1e-6, 30), (1e-3, 20), (0.5, 3), (1.0, 2), (2.0, 1)]).expect("antitone"));
    vec![
        ProblemConfig::new(
            "cfp_halfspaces",
            ProblemKind::CfpHalfspaces {
                sets: vec![h(&[0.0, 1.0], 0.0), h(&[1.0, -1.0], 0.0)],
                calibration: None,
            },
            v(&[2.0, 1.0]),
        )
        .with_b(2.25),
        ProblemConfig::new(
            "best_approx_pair",
            ProblemKind::BestApproxPair {
                u: h(&[1.0, 0.0], 0.0),
                v: h(&[-1.0, 0.0], -1.0),
            },
            v(&[-2.0, 5.0]),
        )
        .with_b(2.0),
        min_norm,
        min_norm_2d,
        ProblemConfig::new(
            "minimization_quadratic",
            ProblemKind::Minimization {
                objective: ProxFunction::ScaledQuadratic {
                    center: v(&[1.0, -1.0]),
                },
                weight: 2.0,
            },
            v(&[2.5, 0.5]),
        )
        .with_schedule(StepSequence::constant(0.5)),
        ProblemConfig::new(
            "abs_1d",
            ProblemKind::Minimization {
                objective: ProxFunction::Norm,
                weight: 1.0,
            },
            v(&[1.5]),
        )
        .with_schedule(StepSequence::constant(1.0)),
        ProblemConfig::new(
            "square_1d",
            ProblemKind::Minimization {
                objective: ProxFunction::ScaledQuadratic { center: v(&[0.0]) },
                weight: 2.0,
            },
            v(&[1.5]),
        )
        .with_schedule(StepSequence::constant(0.5)),
        ProblemConfig::new(
            "vi_box",
            ProblemKind::ViBox {
                matrix: vec![vec![2.0, 0.0], vec![0.0, 1.0]],
                offset: vec![-1.0, 3.0],
                lower: v(&[-1.0, -1.0]),
                upper: v(&[1.0, 1.0]),
            },
            v(&[-0.8, 0.9]),
        ),
        ProblemConfig::new(
            "grad_quadratic",
            ProblemKind::GradQuadratic {
                diag: vec![1.0, 1.0],
                lipschitz: None,
            },
            v(&[0.6, -0.8]),
        )
        .with_b(1.0),
        ProblemConfig::new(
            "grad_quadratic_diag",
            ProblemKind::GradQuadratic {
                diag: vec![1.0, 4.0],
                lipschitz: None,
            },
            v(&[1.0, 1.0]),
        ),
        ProblemConfig::new(
            "specker_demo",
            ProblemKind::SpeckerDemo {
                sequence: SpeckerSequence::SlowDyadic { block: 5 },
                truncation: DEFAULT_SPECKER_TRUNCATION,
            },
            v(&[0.0]),
        ),
        ProblemConfig::new(
            "contraction",
            ProblemKind::Contraction {
                k: 0.5,
                center: v(&[1.0, -2.0]),
            },
            v(&[3.0, 0.0]),
        ),
        ProblemConfig::new("orbital_triangle", ProblemKind::OrbitalTriangle {}, v(&[0.2, 0.1])),
        dr,
        crombez,
    ]
}

/// Builds every catalog instance.
pub fn catalog_instances() -> Result<Vec<ProblemInstance>> {
    catalog().into_iter().map(ProblemInstance::from_config).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn catalog_builds_and_round_trips() {
        for cfg in catalog() {
            let inst = cfg.build().unwrap_or_else(|e| panic!("{}: {e}", cfg.name));
            assert_eq!(inst.name, cfg.name);
            let back = ProblemConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.hash(), cfg.hash());
        }
    }

    #[test]
    fn polyhedron_projection_matches_closed_forms() {
        let quadrant = Polyhedron::from_sets(&[
            ConvexSet::halfspace(vec![1.0, 0.0], 0.0).unwrap(),
            ConvexSet::halfspace(vec![0.0, 1.0], 0.0).unwrap(),
        ])
        .unwrap();
        assert_eq!(quadrant.project(&v(&[2.0, 3.0])).unwrap(), v(&[0.0, 0.0]));
        assert_eq!(quadrant.project(&v(&[2.0, -3.0])).unwrap(), v(&[0.0, -3.0]));
        assert_eq!(quadrant.project(&v(&[-1.0, -1.0])).unwrap(), v(&[-1.0, -1.0]));
        let clamp = |x: f64, y: f64| (x.max(0.0).powi(2) + y.max(0.0).powi(2)).sqrt();
        for &(x, y) in &[(1.5, -0.2), (0.3, 0.4), (-2.0, 7.0)] {
            assert_abs_diff_eq!(quadrant.distance(&v(&[x, y])).unwrap(), clamp(x, y), epsilon = 1e-15);
        }
        let empty = Polyhedron::from_sets(&[
            ConvexSet::halfspace(vec![1.0], 0.0).unwrap(),
            ConvexSet::halfspace(vec![-1.0], -1.0).unwrap(),
        ])
        .unwrap();
        assert!(matches!(empty.project(&v(&[3.0])), Err(Error::Infeasible(_))));
    }

    #[test]
    fn polyhedron_projection_is_optimal_on_samples() {
        // Compare against a brute-force minimum over a fine grid of feasible
        // points of a wedge.
        let wedge = Polyhedron::from_sets(&[
            ConvexSet::halfspace(vec![0.0, 1.0], 0.0).unwrap(),
            ConvexSet::halfspace(vec![1.0, -1.0], 0.0).unwrap(),
        ])
        .unwrap();
        let grid: Vec<Vector> = (0..=400)
            .flat_map(|i| (0..=400).map(move |j| v(&[-4.0 + 0.02 * i as f64, -4.0 + 0.02 * j as f64])))
            .filter(|p| wedge.contains(p, 0.0))
            .collect();
        for x in ClosedBall::new(Vector::zeros(2), 3.0).unwrap().samples(40, 3) {
            let brute = grid.iter().map(|g| dist_unchecked(&x, g)).fold(f64::INFINITY, f64::min);
            let exact = wedge.distance(&x).unwrap();
            assert!(exact <= brute + 1e-12);
            assert!(brute - exact <= 0.02);
        }
    }

    #[test]
    fn cfp_quadrant_example() {
        let inst = instance_cfp_halfspaces(
            vec![
                ConvexSet::halfspace(vec![1.0, 0.0], 0.0).unwrap(),
                ConvexSet::halfspace(vec![0.0, 1.0], 0.0).unwrap(),
            ],
            v(&[2.0, 2.0]),
        )
        .unwrap();
        assert_eq!(inst.reference_zero, v(&[0.0, 0.0]));
        assert_eq!(inst.residual(&v(&[2.0, 1.0])), 2.0);
        assert_abs_diff_eq!(inst.zero_distance(&v(&[2.0, 1.0])), 5f64.sqrt(), epsilon = 1e-15);
        assert_eq!(inst.zero_distance(&v(&[-1.0, -1.0])), 0.0);
        let one =
            instance_cfp_halfspaces(vec![ConvexSet::halfspace(vec![1.0, 0.0], 0.0).unwrap()], v(&[2.0, 2.0])).unwrap();
        assert_eq!(one.residual(&v(&[3.0, 1.0])), 3.0);
        assert_eq!(one.zero_distance(&v(&[3.0, 1.0])), 3.0);
    }

    #[test]
    fn best_approx_pair_example() {
        let inst = instance_best_approx_pair(
            ConvexSet::halfspace(vec![1.0, 0.0], 0.0).unwrap(),
            ConvexSet::halfspace(vec![-1.0, 0.0], -1.0).unwrap(),
            v(&[-2.0, 5.0]),
        )
        .unwrap();
        assert_eq!(inst.pair.as_ref().unwrap().2, 1.0);
        let t = inst.recipe().unwrap().operator().unwrap();
        assert_eq!(t.apply(&v(&[-2.0, 5.0])).unwrap(), v(&[0.0, 5.0]));
        assert_eq!(inst.reference_zero, v(&[0.0, 5.0]));
        assert_eq!(inst.zero_distance(&v(&[-2.0, 5.0])), 2.0);
        for x in inst.ball().samples(500, 1) {
            let defect = inst.pair_defect(&x, &v(&[0.0, x[1] + 0.3])).unwrap();
            assert!(defect <= 1e-9, "{defect}");
        }
        let overlapping = instance_best_approx_pair(
            ConvexSet::halfspace(vec![1.0, 0.0], 1.0).unwrap(),
            ConvexSet::halfspace(vec![-1.0, 0.0], 0.0).unwrap(),
            v(&[3.0, 0.0]),
        )
        .unwrap();
        assert!(overlapping.certificate.modulus.is_none());
        assert_eq!(overlapping.zero_distance(&v(&[0.5, 2.0])), 0.0);
        assert!(instance_best_approx_pair(
            ConvexSet::halfspace(vec![1.0, 0.0], 0.0).unwrap(),
            ConvexSet::halfspace(vec![0.0, 1.0], 0.0).unwrap(),
            v(&[1.0, 1.0])
        )
        .is_err());
    }

    #[test]
    fn min_norm_examples() {
        let inst = instance_min_norm(v(&[2.3]), StepSequence::constant(1.0), 3.0).unwrap();
        assert_eq!(inst.termination_index().unwrap(), 18);
        let trace = inst.run(20).unwrap();
        let xs: Vec<f64> = trace.points().map(|x| x[0]).collect();
        assert_abs_diff_eq!(xs[1], 1.3, epsilon = 1e-12);
        assert!(xs[3..].iter().all(|x| *x == 0.0));
        assert_eq!(inst.zero_distance(&v(&[0.0])), 0.0);
        assert_eq!(inst.residual(&v(&[0.1])), 1.0);
        assert_eq!(inst.residual(&v(&[0.0])), 0.0);
    }

    #[test]
    fn vi_box_examples() {
        let inst = instance_vi_box(vec![vec![1.0]], vec![0.0], v(&[-1.0]), v(&[1.0]), v(&[0.5])).unwrap();
        assert_eq!((inst.residual)(&v(&[1.0])), -2.0);
        assert_eq!(inst.residual(&v(&[0.0])), 0.0);
        assert_eq!(inst.reference_zero, v(&[0.0]));
        assert_eq!(inst.residual(&v(&[1.5])), f64::INFINITY);
        for x in ClosedBall::new(Vector::zeros(1), 1.0).unwrap().samples(200, 4) {
            assert!((inst.residual)(&x) <= 0.0);
        }
        let cat = catalog()
            .into_iter()
            .find(|c| c.name == "vi_box")
            .unwrap()
            .build()
            .unwrap();
        assert_abs_diff_eq!(cat.reference_zero[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(cat.reference_zero[1], -1.0, epsilon = 1e-12);
        assert!(instance_vi_box(vec![vec![0.0]], vec![0.0], v(&[-1.0]), v(&[1.0]), v(&[0.5])).is_err());
    }

    #[test]
    fn grad_quadratic_examples() {
        let inst = instance_grad_quadratic(vec![1.0, 1.0], None, v(&[0.6, -0.8])).unwrap();
        assert_eq!(inst.modulus().unwrap().eval(0.3), 0.3);
        let degenerate = instance_grad_quadratic(vec![1.0, 0.0], None, v(&[1.0, 2.0])).unwrap();
        assert!(degenerate.certificate.modulus.is_none());
        assert!(degenerate.certificate.rate.is_some());
        assert_eq!(degenerate.reference_zero, v(&[0.0, 2.0]));
        assert_eq!(degenerate.zero_distance(&v(&[-3.0, 7.0])), 3.0);
        let scaled = instance_grad_quadratic(vec![2.0, 2.0], Some(2.0), v(&[1.0, 0.0])).unwrap();
        assert_eq!(scaled.modulus().unwrap().eval(0.7), 0.7);
        assert!(instance_grad_quadratic(vec![-1.0, 1.0], None, v(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn specker_examples() {
        let constant = instance_specker_demo(SpeckerSequence::Constant { value: 0.3 }, 40, 0.0).unwrap();
        let t = constant.recipe().unwrap().operator().unwrap();
        // f(x) = max{x, a} so T(x) = (x + max{x, a})/2
        for x in [-1.0, 0.0, 0.2, 0.3, 0.9] {
            let expected = 0.5 * (x + f64::max(x, 0.3));
            assert_abs_diff_eq!(t.apply(&v(&[x])).unwrap()[0], expected, epsilon = 1e-15);
        }
        let slow = instance_specker_demo(SpeckerSequence::SlowDyadic { block: 5 }, 40, 0.0).unwrap();
        let trace = slow.run(200).unwrap();
        let xs: Vec<f64> = trace.points().map(|x| x[0]).collect();
        assert!(xs.windows(2).all(|w| w[0] <= w[1]));
        assert!(xs.iter().all(|x| *x <= 1.0));
        assert!(instance_specker_demo(SpeckerSequence::List { values: vec![0.5, 0.2] }, 10, 0.0).is_err());
    }

    #[test]
    fn orbital_triangle_example() {
        let cfg = catalog().into_iter().find(|c| c.name == "orbital_triangle").unwrap();
        let inst = cfg.build().unwrap();
        assert_eq!(inst.reference_zero, v(&[0.2, 0.8]));
        assert_eq!(inst.residual(&v(&[2.0, 2.0])), f64::INFINITY);
        let p = v(&[0.1, 0.3]);
        assert_abs_diff_eq!(inst.zero_distance(&p), 0.6 / 2f64.sqrt(), epsilon = 1e-15);
        let trace = inst.run(30).unwrap();
        for w in trace.records.windows(2) {
            assert!(w[1].fix_residual.unwrap() <= 0.5 * w[0].fix_residual.unwrap() + 1e-15);
        }
    }

    #[test]
    fn douglas_rachford_lines_converges_to_origin() {
        let cfg = catalog()
            .into_iter()
            .find(|c| c.name == "douglas_rachford_lines")
            .unwrap();
        let inst = cfg.build().unwrap();
        let trace = inst.run(60).unwrap();
        let last = trace.last().unwrap();
        assert!(last.shadow.as_ref().unwrap().norm() < 1e-10);
        assert!(last.dist.unwrap() < 1e-10);
        // d(x, Tx) = 2 sin(θ)‖x‖ for the rotation R_A R_B by 2θ.
        let x = v(&[0.3, -0.4]);
        assert_abs_diff_eq!(
            inst.residual(&x),
            2.0 * std::f64::consts::FRAC_PI_3.sin() * 0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(ProblemConfig::from_json("{\"name\": \"x\"}").is_err());
        let mut cfg = catalog().remove(0);
        cfg.schema_version = 99;
        assert!(ProblemConfig::from_json(&cfg.to_json()).is_err());
        let mut cfg = catalog().remove(0);
        cfg.b = Some(0.1);
        assert!(cfg.build().is_err());
        let mut cfg = catalog().remove(0);
        cfg.recipe.driver = Some(Driver::Ppa);
        assert!(cfg.build().is_err());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(0.01, 1.0, 3);
        assert_abs_diff_eq!(g[0], 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(g[1], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(g[2], 1.0, epsilon = 1e-15);
    }
}
