//! Instrumented iteration drivers: Picard, Mann, cyclic projections, the
//! proximal point algorithm, Douglas–Rachford, gradient descent and the
//! Crombez averaged-projection method.
//!
//! Every driver produces a finite [`Trace`]; requests beyond [`MAX_STEPS`]
//! are refused with [`Error::HorizonExceeded`] instead of being truncated.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist_unchecked, Vector};
use crate::operators::{
    convex_combination, gradient_step, reflected_resolvent, ConvexCombination, ConvexSet, Operator, Projection,
    ProxFunction, Resolvent, SharedOperator, VectorField,
};
use crate::rates::StepSequence;

/// Hard cap on the number of steps of any trace or streamed run.
pub const MAX_STEPS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Driver {
    Picard,
    Mann,
    Cyclic,
    Ppa,
    DouglasRachford,
    GradientDescent,
    Crombez,
}

/// `γ ↦ J_{γ·w·∂g}` for a closed-form function g scaled by w.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxFamily {
    pub f: ProxFunction,
    pub weight: f64,
    pub dim: usize,
}

impl ProxFamily {
    pub fn resolvent(&self, gamma: f64) -> Result<Resolvent> {
        Resolvent::new(self.f.clone(), gamma * self.weight, self.dim)
    }
}

/// An iteration scheme: how x_{n+1} is produced from (n, xₙ).
#[derive(Clone)]
pub enum Recipe {
    Picard(SharedOperator),
    Mann {
        op: SharedOperator,
        schedule: StepSequence,
    },
    Cyclic(Vec<SharedOperator>),
    Ppa {
        family: ProxFamily,
        schedule: StepSequence,
    },
    DouglasRachford {
        ja: SharedOperator,
        jb: SharedOperator,
        t: SharedOperator,
        schedule: StepSequence,
    },
    GradientDescent(SharedOperator),
    Crombez(Arc<ConvexCombination>),
}

/// One step of a recipe.
#[derive(Debug, Clone)]
pub struct Step {
    pub next: Vector,
    /// PPA only: ‖xₙ − x_{n+1}‖/γₙ.
    pub u_norm: Option<f64>,
}

impl Recipe {
    pub fn douglas_rachford(ja: SharedOperator, jb: SharedOperator, schedule: StepSequence) -> Result<Self> {
        let ra = reflected_resolvent(ja.clone())?;
        let rb = reflected_resolvent(jb.clone())?;
        let t = crate::operators::compose(vec![ra, rb])?;
        Ok(Recipe::DouglasRachford { ja, jb, t, schedule })
    }

    pub fn driver(&self) -> Driver {
        match self {
            Recipe::Picard(_) => Driver::Picard,
            Recipe::Mann { .. } => Driver::Mann,
            Recipe::Cyclic(_) => Driver::Cyclic,
            Recipe::Ppa { .. } => Driver::Ppa,
            Recipe::DouglasRachford { .. } => Driver::DouglasRachford,
            Recipe::GradientDescent(_) => Driver::GradientDescent,
            Recipe::Crombez(_) => Driver::Crombez,
        }
    }

    /// The single mapping T whose fixed points the recipe seeks, when there
    /// is one.
    pub fn operator(&self) -> Option<SharedOperator> {
        match self {
            Recipe::Picard(op) | Recipe::Mann { op, .. } | Recipe::GradientDescent(op) => Some(op.clone()),
            Recipe::DouglasRachford { t, .. } => Some(t.clone()),
            Recipe::Crombez(c) => Some(c.clone()),
            Recipe::Cyclic(ops) if ops.len() == 1 => Some(ops[0].clone()),
            _ => None,
        }
    }

    pub fn schedule(&self) -> Option<&StepSequence> {
        match self {
            Recipe::Mann { schedule, .. } | Recipe::Ppa { schedule, .. } | Recipe::DouglasRachford { schedule, .. } => {
                Some(schedule)
            }
            _ => None,
        }
    }

    /// Whether d(xₙ, Txₙ) is guaranteed nonincreasing along the trace
    /// (Picard-type iteration of a nonexpansive map).
    pub fn has_monotone_residual(&self) -> bool {
        match self {
            Recipe::Picard(op) | Recipe::GradientDescent(op) => op.class().is_nonexpansive(),
            Recipe::Crombez(c) => c.class().is_nonexpansive(),
            Recipe::Mann { op, .. } => op.class().is_nonexpansive(),
            Recipe::DouglasRachford { .. } => true,
            _ => false,
        }
    }

    pub fn step(&self, n: usize, x: &Vector) -> Result<Step> {
        let plain = |next| Step { next, u_norm: None };
        match self {
            Recipe::Picard(op) | Recipe::GradientDescent(op) => Ok(plain(op.apply(x)?)),
            Recipe::Crombez(c) => Ok(plain(c.apply(x)?)),
            Recipe::Mann { op, schedule } => {
                let l = mann_coefficient(schedule, n)?;
                Ok(plain(mann_step(op.as_ref(), l, x)?))
            }
            Recipe::DouglasRachford { t, schedule, .. } => {
                let l = mann_coefficient(schedule, n)?;
                Ok(plain(mann_step(t.as_ref(), l, x)?))
            }
            Recipe::Cyclic(ops) => Ok(plain(ops[n % ops.len()].apply(x)?)),
            Recipe::Ppa { family, schedule } => {
                let g = schedule.step(n)?;
                if !(g > 0.0) {
                    return Err(Error::param("gamma", format!("step {n} has gamma {g} <= 0")));
                }
                let next = family.resolvent(g)?.apply(x)?;
                let u = dist_unchecked(x, &next) / g;
                Ok(Step { next, u_norm: Some(u) })
            }
        }
    }

    fn fix_residual(&self, x: &Vector) -> Result<Option<f64>> {
        match self.operator() {
            Some(op) => Ok(Some(dist_unchecked(x, &op.apply(x)?))),
            None => match self {
                Recipe::Cyclic(ops) => {
                    let mut worst: f64 = 0.0;
                    for op in ops {
                        worst = worst.max(dist_unchecked(x, &op.apply(x)?));
                    }
                    Ok(Some(worst))
                }
                _ => Ok(None),
            },
        }
    }

    fn set_residuals(&self, x: &Vector) -> Result<Vec<f64>> {
        let ops: &[SharedOperator] = match self {
            Recipe::Cyclic(ops) if ops.len() > 1 => ops,
            Recipe::Crombez(c) => c.operators(),
            _ => return Ok(Vec::new()),
        };
        ops.iter().map(|op| Ok(dist_unchecked(x, &op.apply(x)?))).collect()
    }

    fn shadow(&self, x: &Vector) -> Result<Option<Vector>> {
        match self {
            Recipe::DouglasRachford { jb, .. } => Ok(Some(jb.apply(x)?)),
            _ => Ok(None),
        }
    }

    /// Streams x₀, x₁, … without recording anything else.
    pub fn iterates(&self, x0: &Vector) -> Iterates<'_> {
        Iterates {
            recipe: self,
            next: Some(x0.clone()),
            n: 0,
        }
    }

    /// Runs `steps` steps and records the recipe's own columns; residual,
    /// distance and Fejér columns are filled by [`Trace::instrument`].
    pub fn run(&self, x0: &Vector, steps: usize) -> Result<Trace> {
        if steps > MAX_STEPS {
            return Err(Error::HorizonExceeded {
                required: steps as u64,
                cap: MAX_STEPS as u64,
            });
        }
        let mut records = Vec::with_capacity(steps + 1);
        let mut x = x0.clone();
        for n in 0..=steps {
            let mut rec = TraceRecord::new(n, x.clone());
            rec.fix_residual = self.fix_residual(&x)?;
            rec.set_residuals = self.set_residuals(&x)?;
            rec.shadow = self.shadow(&x)?;
            if n < steps {
                let step = self.step(n, &x)?;
                rec.u_norm = step.u_norm;
                x = step.next;
            }
            records.push(rec);
        }
        Ok(Trace {
            records,
            meta: TraceMeta {
                driver: self.driver(),
                instance: None,
                instance_hash: None,
                schedule: self.schedule().cloned(),
                steps,
                seed: None,
            },
        })
    }
}

fn mann_coefficient(schedule: &StepSequence, n: usize) -> Result<f64> {
    let l = schedule.step(n)?;
    if !(0.0..=1.0).contains(&l) {
        return Err(Error::param(
            "lambda",
            format!("step {n} has lambda {l} outside [0, 1]"),
        ));
    }
    Ok(l)
}

fn mann_step(op: &dyn Operator, lambda: f64, x: &Vector) -> Result<Vector> {
    if lambda == 0.0 {
        return Ok(x.clone());
    }
    let t = op.apply(x)?;
    if lambda == 1.0 {
        return Ok(t);
    }
    Ok(x.scale(1.0 - lambda).axpy(lambda, &t))
}

pub struct Iterates<'a> {
    recipe: &'a Recipe,
    next: Option<Vector>,
    n: usize,
}

impl Iterator for Iterates<'_> {
    type Item = Result<Vector>;

    fn next(&mut self) -> Option<Self::Item> {
        let x = self.next.take()?;
        match self.recipe.step(self.n, &x) {
            Ok(step) => {
                self.next = Some(step.next);
                self.n += 1;
                Some(Ok(x))
            }
            Err(e) => Some(Err(e)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub n: usize,
    pub x: Vector,
    /// |F(xₙ)| for the instance residual.
    pub residual: Option<f64>,
    /// d(xₙ, Txₙ), or maxᵢ d(xₙ, Tᵢxₙ) for cyclic projections.
    pub fix_residual: Option<f64>,
    /// dist(xₙ, zer F) from the instance oracle.
    pub dist: Option<f64>,
    /// d(xₙ, z) − d(x_{n+1}, z) for the reference zero z.
    pub fejer_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shadow: Option<Vector>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub set_residuals: Vec<f64>,
}

impl TraceRecord {
    fn new(n: usize, x: Vector) -> Self {
        TraceRecord {
            n,
            x,
            residual: None,
            fix_residual: None,
            dist: None,
            fejer_gap: None,
            u_norm: None,
            shadow: None,
            set_residuals: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub driver: Driver,
    pub instance: Option<String>,
    pub instance_hash: Option<String>,
    pub schedule: Option<StepSequence>,
    pub steps: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub meta: TraceMeta,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn points(&self) -> impl Iterator<Item = &Vector> {
        self.records.iter().map(|r| &r.x)
    }

    /// Fills the residual and distance columns from oracles and, given a
    /// reference zero, the Fejér gaps.
    pub fn instrument(
        &mut self,
        residual: &dyn Fn(&Vector) -> f64,
        zero_distance: &dyn Fn(&Vector) -> f64,
        z: Option<&Vector>,
    ) {
        for r in &mut self.records {
            r.residual = Some(residual(&r.x).abs());
            r.dist = Some(zero_distance(&r.x));
        }
        if let Some(z) = z {
            let d: Vec<f64> = self.records.iter().map(|r| dist_unchecked(&r.x, z)).collect();
            for (i, r) in self.records.iter_mut().enumerate() {
                r.fejer_gap = d.get(i + 1).map(|next| d[i] - next);
            }
        }
    }

    /// CSV with header `n,residual,fix_residual,dist,fejer_gap,x0,x1,…`;
    /// absent values are empty fields.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let dim = self.records.first().map_or(0, |r| r.x.dim());
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = ["n", "residual", "fix_residual", "dist", "fejer_gap"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend((0..dim).map(|i| format!("x{i}")));
        w.write_record(&header).map_err(csv_error)?;
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.records {
            let mut row = vec![
                r.n.to_string(),
                opt(r.residual),
                opt(r.fix_residual),
                opt(r.dist),
                opt(r.fejer_gap),
            ];
            row.extend(r.x.coords().iter().map(|c| c.to_string()));
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialises")
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Config(e.to_string())
}

/// x_{n+1} := T xₙ
pub fn run_picard(op: SharedOperator, x0: &Vector, steps: usize) -> Result<Trace> {
    Recipe::Picard(op).run(x0, steps)
}

/// x_{n+1} := (1 − λₙ)xₙ + λₙ T xₙ
pub fn run_mann(op: SharedOperator, schedule: StepSequence, x0: &Vector, steps: usize) -> Result<Trace> {
    Recipe::Mann { op, schedule }.run(x0, steps)
}

/// x_{n+1} := T_{n mod m} xₙ
pub fn run_cyclic(ops: Vec<SharedOperator>, x0: &Vector, steps: usize) -> Result<Trace> {
    if ops.is_empty() {
        return Err(Error::param("ops", "cyclic iteration needs at least one operator"));
    }
    Recipe::Cyclic(ops).run(x0, steps)
}

/// x_{n+1} := J_{γₙA} xₙ, recording uₙ = (xₙ − x_{n+1})/γₙ.
pub fn run_ppa(family: ProxFamily, schedule: StepSequence, x0: &Vector, steps: usize) -> Result<Trace> {
    Recipe::Ppa { family, schedule }.run(x0, steps)
}

/// Mann iteration of T = R_A R_B with shadow J_B(xₙ).
pub fn run_douglas_rachford(
    ja: SharedOperator,
    jb: SharedOperator,
    schedule: StepSequence,
    x0: &Vector,
    steps: usize,
) -> Result<Trace> {
    Recipe::douglas_rachford(ja, jb, schedule)?.run(x0, steps)
}

/// Picard iteration of x ↦ x − ∇f(x)/L.
pub fn run_gradient_descent(gradient: VectorField, lipschitz: f64, x0: &Vector, steps: usize) -> Result<Trace> {
    let op = gradient_step(gradient, lipschitz, x0.dim())?;
    Recipe::GradientDescent(Arc::new(op)).run(x0, steps)
}

/// Picard iteration of `Σ aᵢ(Id + λᵢ(P_{Cᵢ} − Id))`.
pub fn run_crombez(
    sets: Vec<ConvexSet>,
    weights: Vec<f64>,
    relaxations: Vec<f64>,
    x0: &Vector,
    steps: usize,
) -> Result<Trace> {
    let ops: Vec<SharedOperator> = sets
        .into_iter()
        .map(|set| Arc::new(Projection { set }) as SharedOperator)
        .collect();
    let c = convex_combination(ops, weights, relaxations)?;
    Recipe::Crombez(Arc::new(c)).run(x0, steps)
}
