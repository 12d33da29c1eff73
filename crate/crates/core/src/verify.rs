//! Audits: each inequality and certificate becomes a predicate checked on
//! traces, operators, moduli and sampled points. A report passes iff its
//! worst violation is at most eta.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist_unchecked, ClosedBall, Vector, DEFAULT_ETA};
use crate::iterations::{Trace, MAX_STEPS};
use crate::moduli::Modulus;
use crate::operators::{classify_by_sampling, ConvexSet, Operator, OperatorClass, ProxFunction, Resolvent};
use crate::problems::{Polyhedron, ProblemInstance, ResidualKind};
use crate::rates::{cauchy_modulus, dist_rate, finite_termination_index, RateFn};

pub const DEFAULT_EPS_GRID: [f64; 6] = [2.0, 1.0, 0.5, 0.2, 0.1, 0.05];
pub const DEFAULT_SAMPLES: usize = 2000;
/// Extra iterations audited past the largest certified index.
pub const DOMINANCE_WINDOW: usize = 256;
/// Largest relative error accepted between analytic and finite-difference
/// gradients.
pub const GRADIENT_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditParams {
    pub eps_grid: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub eta: f64,
}

impl Default for AuditParams {
    fn default() -> Self {
        AuditParams {
            eps_grid: DEFAULT_EPS_GRID.to_vec(),
            samples: DEFAULT_SAMPLES,
            seed: 0,
            eta: DEFAULT_ETA,
        }
    }
}

impl AuditParams {
    fn with_eta(&self, eta: f64) -> Self {
        AuditParams { eta, ..self.clone() }
    }
}

/// Inputs that produced the worst violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Iteration or sample index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<Vector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub check: String,
    pub instance: Option<String>,
    pub passed: bool,
    /// None when no case met the premise of the audited implication.
    pub worst_violation: Option<f64>,
    pub witness: Option<Witness>,
    pub params: AuditParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let inst = self.instance.as_deref().unwrap_or("-");
        match self.worst_violation {
            Some(v) => write!(f, "{status} {} [{inst}] worst={v:e}", self.check)?,
            None => write!(f, "{status} {} [{inst}] vacuous", self.check)?,
        }
        if let Some(w) = &self.witness {
            if let Some(e) = w.eps {
                write!(f, " eps={e}")?;
            }
            if let Some(i) = w.index {
                write!(f, " n={i}")?;
            }
        }
        Ok(())
    }
}

/// Running maximum of a violation with the first witness attaining it.
struct Worst {
    value: Option<f64>,
    witness: Option<Witness>,
}

impl Worst {
    fn new() -> Self {
        Worst {
            value: None,
            witness: None,
        }
    }

    fn record(&mut self, v: f64, witness: impl FnOnce() -> Witness) {
        let better = match self.value {
            None => true,
            Some(w) => v > w || (v.is_nan() && !w.is_nan()),
        };
        if better {
            self.value = Some(v);
            self.witness = Some(witness());
        }
    }

    fn report(self, check: &str, instance: Option<&str>, params: &AuditParams, note: Option<String>) -> AuditReport {
        let passed = self.value.is_none_or(|v| v <= params.eta);
        AuditReport {
            check: check.into(),
            instance: instance.map(str::to_owned),
            passed,
            worst_violation: self.value,
            witness: self.witness,
            params: params.clone(),
            note,
        }
    }
}

fn at_index(n: usize, x: &Vector) -> Witness {
    Witness {
        eps: None,
        index: Some(n as u64),
        points: vec![x.clone()],
    }
}

/// `d(x_{n+1}, z) − d(xₙ, z) ≤ eta` along a trace.
pub fn check_fejer(trace: &Trace, z: &Vector, params: &AuditParams) -> Result<AuditReport> {
    if trace.is_empty() {
        return Err(Error::param("trace", "empty trace"));
    }
    let mut worst = Worst::new();
    for (i, w) in trace.records.windows(2).enumerate() {
        let v = dist_unchecked(&w[1].x, z) - dist_unchecked(&w[0].x, z);
        worst.record(v, || at_index(i + 1, &w[1].x));
    }
    Ok(worst.report("fejer", trace.meta.instance.as_deref(), params, None))
}

/// `d(x_{n+1}, Tx_{n+1}) − d(xₙ, Txₙ) ≤ eta` for a nonexpansive Picard trace.
pub fn check_residual_monotone(trace: &Trace, params: &AuditParams) -> Result<AuditReport> {
    let res: Vec<f64> = trace
        .records
        .iter()
        .map(|r| {
            r.fix_residual
                .ok_or_else(|| Error::NotApplicable("trace has no fixed-point residual".into()))
        })
        .collect::<Result<_>>()?;
    let mut worst = Worst::new();
    for (i, w) in res.windows(2).enumerate() {
        worst.record(w[1] - w[0], || at_index(i + 1, &trace.records[i + 1].x));
    }
    Ok(worst.report("residual_monotone", trace.meta.instance.as_deref(), params, None))
}

/// `|F(x)| < φ(ε) ⇒ dist(x, zer F) < ε + eta` on samples of `ball`.
pub fn check_modulus_soundness(
    problem: &ProblemInstance,
    phi: &Modulus,
    ball: &ClosedBall,
    params: &AuditParams,
) -> Result<AuditReport> {
    let points = ball.samples(params.samples, params.seed);
    let evaluated: Vec<(f64, f64)> = points
        .iter()
        .map(|x| (problem.residual(x), problem.zero_distance(x)))
        .collect();
    let mut worst = Worst::new();
    for &eps in &params.eps_grid {
        let threshold = phi.eval(eps);
        for (i, (f, d)) in evaluated.iter().enumerate() {
            if *f < threshold {
                worst.record(d - eps, || Witness {
                    eps: Some(eps),
                    index: Some(i as u64),
                    points: vec![points[i].clone()],
                });
            }
        }
    }
    Ok(worst.report("modulus_soundness", Some(&problem.name), params, None))
}

/// `f(x) ≥ m` on samples and `f(z) = m` for instances with an objective;
/// with a bundled modulus on a minimization residual also the growth
/// bound `f(x) ≥ m + φ(dist(x, S))`.
pub fn check_growth(problem: &ProblemInstance, params: &AuditParams) -> Result<AuditReport> {
    let obj = problem
        .objective
        .as_ref()
        .ok_or_else(|| Error::NotApplicable(format!("{} has no objective", problem.name)))?;
    let growth = match problem.residual_kind {
        ResidualKind::Minimization => problem.certificate.modulus.as_ref(),
        _ => None,
    };
    let mut worst = Worst::new();
    let z = &problem.reference_zero;
    worst.record(((obj.value)(z) - obj.minimum).abs(), || at_index(0, z));
    for (i, x) in problem.ball().samples(params.samples, params.seed).iter().enumerate() {
        let floor = match growth {
            Some(phi) => {
                let d = problem.zero_distance(x);
                if d > 0.0 {
                    obj.minimum + phi.eval(d)
                } else {
                    obj.minimum
                }
            }
            None => obj.minimum,
        };
        worst.record(floor - (obj.value)(x), || Witness {
            eps: None,
            index: Some(i as u64),
            points: vec![x.clone()],
        });
    }
    let check = if growth.is_some() { "growth" } else { "minimum_attained" };
    Ok(worst.report(check, Some(&problem.name), params, None))
}

fn certified(rate: &RateFn, eps: f64) -> Result<usize> {
    let n = rate.eval(eps);
    if n > MAX_STEPS as u64 {
        return Err(Error::HorizonExceeded {
            required: n,
            cap: MAX_STEPS as u64,
        });
    }
    Ok(n as usize)
}

/// `∃ n ≤ α(ε): |F(xₙ)| < ε + eta`, the hypothesis form of a rate.
pub fn check_rate_hypothesis(problem: &ProblemInstance, alpha: &RateFn, params: &AuditParams) -> Result<AuditReport> {
    let recipe = problem.recipe()?;
    let bounds: Vec<usize> = params
        .eps_grid
        .iter()
        .map(|e| certified(alpha, *e))
        .collect::<Result<_>>()?;
    let horizon = bounds.iter().copied().max().unwrap_or(0);
    let mut best = vec![(f64::INFINITY, 0usize); bounds.len()];
    for (n, x) in recipe.iterates(&problem.start).take(horizon + 1).enumerate() {
        let r = problem.residual(&x?);
        for (k, &a) in bounds.iter().enumerate() {
            if n <= a && r < best[k].0 {
                best[k] = (r, n);
            }
        }
    }
    let mut worst = Worst::new();
    let mut hits = Vec::new();
    for (k, &eps) in params.eps_grid.iter().enumerate() {
        worst.record(best[k].0 - eps, || Witness {
            eps: Some(eps),
            index: Some(bounds[k] as u64),
            points: Vec::new(),
        });
        hits.push(format!(
            "eps={eps}: min residual {:e} at n={} <= alpha={}",
            best[k].0, best[k].1, bounds[k]
        ));
    }
    Ok(worst.report("rate_hypothesis", Some(&problem.name), params, Some(hits.join("; "))))
}

/// Runs the recipe past the certified indices and checks, for each ε:
/// some n ≤ α(ε) has |F(xₙ)| < ε; dist(xₙ, zer F) < ε for all n ≥ α(φ(ε));
/// d(xₙ, x_m) < ε for n, m in a window from α(φ(ε/2)) and against the last
/// iterate.
pub fn check_certificate_dominance(
    problem: &ProblemInstance,
    alpha: &RateFn,
    phi: &Modulus,
    params: &AuditParams,
) -> Result<AuditReport> {
    let recipe = problem.recipe()?;
    let drate = dist_rate(alpha, phi);
    let crate_ = cauchy_modulus(alpha, phi);
    struct State {
        eps: f64,
        alpha: usize,
        dist: usize,
        cauchy: usize,
        min_residual: f64,
        first_hit: Option<usize>,
        window: Vec<(usize, Vector)>,
    }
    let mut states: Vec<State> = params
        .eps_grid
        .iter()
        .map(|&eps| {
            Ok(State {
                eps,
                alpha: certified(alpha, eps)?,
                dist: certified(&drate, eps)?,
                cauchy: certified(&crate_, eps)?,
                min_residual: f64::INFINITY,
                first_hit: None,
                window: Vec::new(),
            })
        })
        .collect::<Result<_>>()?;
    let horizon = states
        .iter()
        .map(|s| s.alpha.max(s.dist).max(s.cauchy))
        .max()
        .unwrap_or(0)
        + DOMINANCE_WINDOW;
    let mut worst = Worst::new();
    let mut last = problem.start.clone();
    for (n, x) in recipe.iterates(&problem.start).take(horizon + 1).enumerate() {
        let x = x?;
        let r = problem.residual(&x);
        let d = problem.zero_distance(&x);
        for s in &mut states {
            if n <= s.alpha {
                s.min_residual = s.min_residual.min(r);
            }
            if s.first_hit.is_none() && d < s.eps {
                s.first_hit = Some(n);
            }
            if n >= s.dist {
                worst.record(d - s.eps, || Witness {
                    eps: Some(s.eps),
                    index: Some(n as u64),
                    points: vec![x.clone()],
                });
            }
            if n >= s.cauchy && n <= s.cauchy + DOMINANCE_WINDOW {
                s.window.push((n, x.clone()));
            }
        }
        last = x;
    }
    let mut notes = Vec::new();
    for s in &states {
        worst.record(s.min_residual - s.eps, || Witness {
            eps: Some(s.eps),
            index: Some(s.alpha as u64),
            points: Vec::new(),
        });
        for (i, (n, x)) in s.window.iter().enumerate() {
            worst.record(dist_unchecked(x, &last) - s.eps, || Witness {
                eps: Some(s.eps),
                index: Some(*n as u64),
                points: vec![x.clone(), last.clone()],
            });
            for (m, y) in &s.window[i + 1..] {
                worst.record(dist_unchecked(x, y) - s.eps, || Witness {
                    eps: Some(s.eps),
                    index: Some(*m as u64),
                    points: vec![x.clone(), y.clone()],
                });
            }
        }
        let hit = s.first_hit.map_or("none".to_string(), |h| h.to_string());
        notes.push(format!("eps={}: first hit n={hit}, certified n={}", s.eps, s.dist));
    }
    Ok(worst.report(
        "certificate_dominance",
        Some(&problem.name),
        params,
        Some(notes.join("; ")),
    ))
}

/// The trace is exactly constant from the certified termination index on
/// and that point is a zero. Audited with eta = 0.
pub fn check_finite_termination(
    problem: &ProblemInstance,
    alpha: &RateFn,
    phi: Option<&Modulus>,
    eps_star: Option<f64>,
    params: &AuditParams,
) -> Result<AuditReport> {
    let eps_star = eps_star.ok_or_else(|| Error::NotApplicable(format!("{} declares no eps_star", problem.name)))?;
    let index = finite_termination_index(alpha, phi, eps_star)?;
    if index > MAX_STEPS as u64 {
        return Err(Error::HorizonExceeded {
            required: index,
            cap: MAX_STEPS as u64,
        });
    }
    let index = index as usize;
    let horizon = index + DOMINANCE_WINDOW;
    let recipe = problem.recipe()?;
    let mut worst = Worst::new();
    let mut anchor: Option<Vector> = None;
    let mut prev: Option<Vector> = None;
    let mut settled_at = 0;
    for (n, x) in recipe.iterates(&problem.start).take(horizon + 1).enumerate() {
        let x = x?;
        if prev.as_ref() != Some(&x) {
            settled_at = n;
        }
        if n == index {
            worst.record(problem.zero_distance(&x), || at_index(n, &x));
            anchor = Some(x.clone());
        } else if let Some(a) = &anchor {
            let v = if x == *a {
                0.0
            } else {
                dist_unchecked(&x, a).max(f64::MIN_POSITIVE)
            };
            worst.record(v, || at_index(n, &x));
        }
        prev = Some(x);
    }
    let note = format!("certified termination index {index}; empirically constant from n={settled_at}");
    Ok(worst.report(
        "finite_termination",
        Some(&problem.name),
        &params.with_eta(0.0),
        Some(note),
    ))
}

/// `f(J(x)) − f(y) ≤ (‖y − x‖² − ‖J(x) − x‖² − ‖J(x) − y‖²)/(2γ)` for
/// sampled pairs, where J should be the resolvent of γ∂f.
pub fn check_resolvent_inequality(
    f: &dyn Fn(&Vector) -> f64,
    gamma: f64,
    resolvent: &dyn Operator,
    ball: &ClosedBall,
    params: &AuditParams,
) -> Result<AuditReport> {
    if !(gamma > 0.0) {
        return Err(Error::param("gamma", format!("{gamma} must be > 0")));
    }
    let points = ball.samples(2 * params.samples, params.seed);
    let mut worst = Worst::new();
    for (i, pair) in points.chunks(2).enumerate() {
        let (x, y) = (&pair[0], &pair[1]);
        let j = resolvent.apply(x)?;
        let rhs = (dist_unchecked(y, x).powi(2) - dist_unchecked(&j, x).powi(2) - dist_unchecked(&j, y).powi(2))
            / (2.0 * gamma);
        worst.record(f(&j) - f(y) - rhs, || Witness {
            eps: None,
            index: Some(i as u64),
            points: vec![x.clone(), y.clone()],
        });
    }
    Ok(worst.report("resolvent_inequality", None, params, Some(format!("gamma={gamma}"))))
}

/// `d(x, P_C x)² + d(P_C x, y)² ≤ d(x, y)²` for x sampled in the ball and
/// y = P_C(sample) ∈ C.
pub fn check_projection_inequality(set: &ConvexSet, ball: &ClosedBall, params: &AuditParams) -> Result<AuditReport> {
    check_projection_map(&|x| set.project(x), ball, params)
}

/// The projection inequality for an arbitrary candidate projection map.
pub fn check_projection_map(
    project: &dyn Fn(&Vector) -> Result<Vector>,
    ball: &ClosedBall,
    params: &AuditParams,
) -> Result<AuditReport> {
    let points = ball.samples(2 * params.samples, params.seed);
    let mut worst = Worst::new();
    for (i, pair) in points.chunks(2).enumerate() {
        let x = &pair[0];
        let y = project(&pair[1])?;
        let p = project(x)?;
        let v = dist_unchecked(x, &p).powi(2) + dist_unchecked(&p, &y).powi(2) - dist_unchecked(x, &y).powi(2);
        worst.record(v, || Witness {
            eps: None,
            index: Some(i as u64),
            points: vec![x.clone(), y.clone()],
        });
    }
    Ok(worst.report("projection_inequality", None, params, None))
}

/// The CAT(0) quadrilateral inequality on sampled quadruples; the violation
/// is the negated defect.
pub fn check_quadrilateral_inequality(ball: &ClosedBall, params: &AuditParams) -> Result<AuditReport> {
    check_quadrilateral_with(&|a, b| dist_unchecked(a, b), ball, params)
}

/// The quadrilateral inequality under an arbitrary metric on ℝⁿ.
pub fn check_quadrilateral_with(
    metric: &dyn Fn(&Vector, &Vector) -> f64,
    ball: &ClosedBall,
    params: &AuditParams,
) -> Result<AuditReport> {
    let points = ball.samples(4 * params.samples, params.seed);
    let sq = |a: &Vector, b: &Vector| metric(a, b).powi(2);
    let mut worst = Worst::new();
    for (i, q) in points.chunks(4).enumerate() {
        let (x, y, u, v) = (&q[0], &q[1], &q[2], &q[3]);
        let defect = sq(x, v) + sq(y, u) + sq(x, u) + sq(y, v) - sq(x, y) - sq(u, v);
        worst.record(-defect, || Witness {
            eps: None,
            index: Some(i as u64),
            points: q.to_vec(),
        });
    }
    Ok(worst.report("quadrilateral_inequality", None, params, None))
}

/// `d(Tx, P_V x)² ≤ ρ² + d(u, x)² − d(u, Tx)²` for sampled x and u = T(sample)
/// ∈ Fix T on a best approximation pair.
pub fn check_pair_inequality(problem: &ProblemInstance, params: &AuditParams) -> Result<AuditReport> {
    let t = problem
        .recipe()?
        .operator()
        .ok_or_else(|| Error::NotApplicable(format!("{} has no single operator", problem.name)))?;
    let mut worst = Worst::new();
    let points = problem.ball().samples(2 * params.samples, params.seed);
    for (i, p) in points.chunks(2).enumerate() {
        let u = t.apply(&p[1])?;
        let v = problem.pair_defect(&p[0], &u)?;
        worst.record(v, || Witness {
            eps: None,
            index: Some(i as u64),
            points: vec![p[0].clone(), u.clone()],
        });
    }
    Ok(worst.report("pair_inequality", Some(&problem.name), params, None))
}

type DistanceOracle = Box<dyn Fn(&Vector) -> Result<f64>>;

/// `maxᵢ dist(x, Cᵢ) < ρ(ε) ⇒ dist(x, ⋂ Cᵢ) < ε + eta` on samples.
pub fn check_metric_regularity(
    sets: &[ConvexSet],
    rho: &Modulus,
    ball: &ClosedBall,
    params: &AuditParams,
) -> Result<AuditReport> {
    let intersection_distance: DistanceOracle = if sets.len() == 1 {
        let s = sets[0].clone();
        Box::new(move |x| s.distance(x))
    } else {
        let poly = Polyhedron::from_sets(sets)?;
        Box::new(move |x| poly.distance(x))
    };
    let points = ball.samples(params.samples, params.seed);
    let mut evaluated = Vec::with_capacity(points.len());
    for x in &points {
        let mut worst_set: f64 = 0.0;
        for s in sets {
            worst_set = worst_set.max(s.distance(x)?);
        }
        evaluated.push((worst_set, intersection_distance(x)?));
    }
    let mut worst = Worst::new();
    for &eps in &params.eps_grid {
        let delta = rho.eval(eps);
        for (i, (m, d)) in evaluated.iter().enumerate() {
            if *m < delta {
                worst.record(d - eps, || Witness {
                    eps: Some(eps),
                    index: Some(i as u64),
                    points: vec![points[i].clone()],
                });
            }
        }
    }
    Ok(worst.report("metric_regularity", None, params, None))
}

/// Central differences against an analytic gradient: the violation is
/// `‖g_fd − g‖/max(‖g‖, 1) − 1e−5`.
pub fn check_gradient_finite_difference(
    f: &dyn Fn(&Vector) -> f64,
    gradient: &dyn Fn(&Vector) -> Vector,
    ball: &ClosedBall,
    params: &AuditParams,
) -> Result<AuditReport> {
    let mut worst = Worst::new();
    for (i, x) in ball.samples(params.samples, params.seed).iter().enumerate() {
        let g = gradient(x);
        x.check_dim(&g)?;
        let mut coords = x.coords().to_vec();
        let mut err_sq = 0.0;
        for k in 0..coords.len() {
            let h = 1e-6 * coords[k].abs().max(1.0);
            let orig = coords[k];
            coords[k] = orig + h;
            let up = f(&Vector::new(coords.clone())?);
            coords[k] = orig - h;
            let down = f(&Vector::new(coords.clone())?);
            coords[k] = orig;
            let fd = (up - down) / (2.0 * h);
            err_sq += (fd - g[k]).powi(2);
        }
        let rel = err_sq.sqrt() / g.norm().max(1.0);
        worst.record(rel - GRADIENT_TOLERANCE, || Witness {
            eps: None,
            index: Some(i as u64),
            points: vec![x.clone()],
        });
    }
    Ok(worst.report("gradient_finite_difference", None, params, None))
}

/// Sampling evidence for the class an operator declares.
pub fn check_operator_class(
    op: &dyn Operator,
    ball: &ClosedBall,
    fixed_points: &[Vector],
    params: &AuditParams,
) -> Result<AuditReport> {
    let class = op.class();
    let report = classify_by_sampling(op, ball, params.samples, params.seed, fixed_points, params.eta)?;
    let violation = match class {
        OperatorClass::FirmlyNonexpansive => Some(&report.firmly_nonexpansive),
        OperatorClass::Nonexpansive => Some(&report.nonexpansive),
        OperatorClass::QuasiNonexpansive => report.quasi_nonexpansive.as_ref(),
        OperatorClass::General => None,
    };
    let mut worst = Worst::new();
    if let Some(v) = violation {
        worst.record(v.worst, || Witness {
            eps: None,
            index: None,
            points: v
                .witness
                .as_ref()
                .map(|(x, y)| vec![x.clone(), y.clone()])
                .unwrap_or_default(),
        });
    }
    Ok(worst.report(
        "operator_class",
        None,
        params,
        Some(format!("{} declared {class:?}", op.name())),
    ))
}

/// Deliberate corruptions used to show that the audits can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Soft-threshold prox with threshold γ + 1 in the resolvent audit of
    /// the first norm instance.
    SoftThresholdOffByOne,
    /// Modulus ×10 in the soundness audit of the first gradient-descent
    /// instance.
    InflatedModulus,
    /// Negated gradient in the finite-difference audit of the first
    /// instance with a gradient.
    CorruptedGradient,
}

impl Fault {
    pub const ALL: [Fault; 3] = [
        Fault::SoftThresholdOffByOne,
        Fault::InflatedModulus,
        Fault::CorruptedGradient,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Fault::SoftThresholdOffByOne => "soft_threshold_off_by_one",
            Fault::InflatedModulus => "inflated_modulus",
            Fault::CorruptedGradient => "corrupted_gradient",
        }
    }
}

impl FromStr for Fault {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Fault::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Fault::ALL.iter().map(|f| f.name()).collect();
            Error::Config(format!("unknown fault `{s}`; expected one of {}", names.join(", ")))
        })
    }
}

fn failed(check: &str, instance: &str, params: &AuditParams, err: Error) -> AuditReport {
    AuditReport {
        check: check.into(),
        instance: Some(instance.into()),
        passed: false,
        worst_violation: None,
        witness: None,
        params: params.clone(),
        note: Some(err.to_string()),
    }
}

fn tagged(mut r: AuditReport, instance: &str) -> AuditReport {
    r.instance = Some(instance.into());
    r
}

/// Every applicable audit on every instance, in a fixed order. Errors in a
/// check (for instance an exceeded horizon) become failing reports.
pub fn run_full_audit(instances: &[ProblemInstance], params: &AuditParams, fault: Option<Fault>) -> Vec<AuditReport> {
    let mut reports = Vec::new();
    let mut fault = fault;
    for inst in instances {
        audit_instance(inst, params, &mut fault, &mut reports);
    }
    reports
}

fn audit_instance(inst: &ProblemInstance, params: &AuditParams, fault: &mut Option<Fault>, out: &mut Vec<AuditReport>) {
    let name = inst.name.as_str();
    let mut push = |check: &str, r: Result<AuditReport>| {
        out.push(match r {
            Ok(r) => tagged(r, name),
            Err(e) => failed(check, name, params, e),
        });
    };
    let mut take = |f: Fault| {
        if *fault == Some(f) {
            *fault = None;
            true
        } else {
            false
        }
    };
    let ball = inst.ball();

    if let Some(recipe) = &inst.recipe {
        match inst.run(inst.steps) {
            Ok(trace) => {
                push("fejer", check_fejer(&trace, &inst.reference_zero, params));
                if recipe.has_monotone_residual() {
                    push("residual_monotone", check_residual_monotone(&trace, params));
                }
            }
            Err(e) => push("fejer", Err(e)),
        }
        if let Some(op) = recipe.operator() {
            if op.class() != OperatorClass::General {
                push(
                    "operator_class",
                    check_operator_class(op.as_ref(), &ball, std::slice::from_ref(&inst.reference_zero), params),
                );
            }
        }
    }

    if let Some(phi) = &inst.certificate.modulus {
        let phi = if inst.name.starts_with("grad_quadratic") && take(Fault::InflatedModulus) {
            phi.inflated(10.0)
        } else {
            phi.clone()
        };
        push("modulus_soundness", check_modulus_soundness(inst, &phi, &ball, params));
    }

    if let Some(obj) = &inst.objective {
        push("growth", check_growth(inst, params));
        if let Some(g) = &obj.gradient {
            let corrupt = take(Fault::CorruptedGradient);
            let grad = |x: &Vector| if corrupt { g(x).scale(-1.0) } else { g(x) };
            push(
                "gradient_finite_difference",
                check_gradient_finite_difference(&*obj.value, &grad, &ball, params),
            );
        }
    }

    match (&inst.certificate.rate, &inst.certificate.modulus, &inst.recipe) {
        (Some(alpha), Some(phi), Some(_)) => push(
            "certificate_dominance",
            check_certificate_dominance(inst, alpha, phi, params),
        ),
        (Some(alpha), None, Some(_)) => push("rate_hypothesis", check_rate_hypothesis(inst, alpha, params)),
        _ => {}
    }

    if let (Some(eps_star), Some(alpha)) = (inst.certificate.eps_star, &inst.certificate.rate) {
        let phi = if inst.certificate.termination_uses_modulus {
            inst.certificate.modulus.as_ref()
        } else {
            None
        };
        push(
            "finite_termination",
            check_finite_termination(inst, alpha, phi, Some(eps_star), params),
        );
    }

    if let (Some(family), Some(recipe)) = (&inst.prox, &inst.recipe) {
        if let Some(gamma) = recipe.schedule().and_then(|s| s.term(0)) {
            let wrong = family.f == ProxFunction::Norm && take(Fault::SoftThresholdOffByOne);
            let order = if wrong { gamma + 1.0 } else { gamma };
            let r = Resolvent::new(family.f.clone(), order * family.weight, family.dim).and_then(|j| {
                let f = |x: &Vector| family.weight * family.f.value(x);
                check_resolvent_inequality(&f, gamma, &j, &ball, params)
            });
            push("resolvent_inequality", r);
        }
    }

    if let Some(rho) = &inst.certificate.regularity {
        push(
            "metric_regularity",
            check_metric_regularity(&inst.sets, rho, &ball, params),
        );
    }

    if inst.pair.is_some() {
        push("pair_inequality", check_pair_inequality(inst, params));
    }
}
