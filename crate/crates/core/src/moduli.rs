//! Moduli of regularity as printable, serialisable expression trees.
//!
//! A modulus φ maps (0, ∞) → (0, ∞) and certifies the implication
//! `|F(x)| < φ(ε) ⇒ dist(x, zer F) < ε` on a reference ball. Every
//! constructor below produces one of the closed-form moduli used by the
//! rate combinators, and the `convert_*` functions implement the three
//! transfers between a convex function, its resolvent and its
//! subdifferential.
//!
//! Evaluation is conservative: every arithmetic node rounds toward zero, so
//! a certified index computed from a modulus is never optimistic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ClosedBall, Vector};
use crate::rates::RateFn;
use crate::rounding::{add_down, add_up, div_down, mul_down, pow_down};

/// Returned by the empirical estimator when no sampled point refutes any
/// threshold.
pub const ESTIMATE_TOP: f64 = 1e3;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Modulus {
    /// ε ↦ c·ε
    Linear {
        c: f64,
    },
    /// ε ↦ coef·(ε/scale)^exponent
    Power {
        #[serde(default = "one")]
        coef: f64,
        #[serde(default = "one")]
        scale: f64,
        exponent: f64,
    },
    /// ε ↦ mul·inner(ε)/div
    Scaled {
        #[serde(default = "one")]
        mul: f64,
        #[serde(default = "one")]
        div: f64,
        inner: Box<Modulus>,
    },
    /// ε ↦ inner(ε)^exponent
    PowerOf {
        exponent: f64,
        inner: Box<Modulus>,
    },
    Min {
        terms: Vec<Modulus>,
    },
    /// ε ↦ outer(inner(ε))
    Compose {
        outer: Box<Modulus>,
        inner: Box<Modulus>,
    },
    /// ε ↦ min{inner(ε), cap}
    ClampTop {
        cap: f64,
        inner: Box<Modulus>,
    },
    /// Monotone samples `(ε, value)` with linear interpolation, proportional
    /// extrapolation below the first point and a flat tail above the last.
    Table {
        points: Vec<(f64, f64)>,
    },
    /// ε ↦ inner(ε/2)
    HalfArg {
        inner: Box<Modulus>,
    },
    /// ε ↦ ε / (2·ψ(ε/2)) for a convergence rate ψ.
    FromRate {
        rate: RateFn,
    },
}

impl Modulus {
    pub fn linear(c: f64) -> Self {
        Modulus::Linear { c }
    }

    pub fn power(coef: f64, scale: f64, exponent: f64) -> Self {
        Modulus::Power { coef, scale, exponent }
    }

    pub fn scaled(mul: f64, div: f64, inner: Modulus) -> Self {
        Modulus::Scaled {
            mul,
            div,
            inner: Box::new(inner),
        }
    }

    pub fn min(terms: Vec<Modulus>) -> Self {
        Modulus::Min { terms }
    }

    pub fn compose(outer: Modulus, inner: Modulus) -> Self {
        Modulus::Compose {
            outer: Box::new(outer),
            inner: Box::new(inner),
        }
    }

    pub fn clamp_top(cap: f64, inner: Modulus) -> Self {
        Modulus::ClampTop {
            cap,
            inner: Box::new(inner),
        }
    }

    pub fn half_arg(inner: Modulus) -> Self {
        Modulus::HalfArg { inner: Box::new(inner) }
    }

    pub fn table(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::param("points", "table needs at least one point"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in points.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::param("points", format!("duplicate abscissa {}", w[0].0)));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::param("points", "table values must be nondecreasing"));
            }
        }
        if points
            .iter()
            .any(|&(e, v)| !(e > 0.0 && v > 0.0 && e.is_finite() && v.is_finite()))
        {
            return Err(Error::param(
                "points",
                "abscissae and values must be positive and finite",
            ));
        }
        Ok(Modulus::Table { points })
    }

    /// Evaluates the modulus at ε, rounding every node toward zero.
    pub fn eval(&self, eps: f64) -> f64 {
        match self {
            Modulus::Linear { c } => mul_down(*c, eps),
            Modulus::Power { coef, scale, exponent } => {
                let base = div_down(eps, *scale);
                mul_down(*coef, pow_down(base.max(0.0), *exponent))
            }
            Modulus::Scaled { mul, div, inner } => {
                let v = inner.eval(eps);
                if *mul == 1.0 {
                    div_down(v, *div)
                } else {
                    div_down(mul_down(*mul, v), *div)
                }
            }
            Modulus::PowerOf { exponent, inner } => pow_down(inner.eval(eps).max(0.0), *exponent),
            Modulus::Min { terms } => terms.iter().map(|t| t.eval(eps)).fold(f64::INFINITY, f64::min),
            Modulus::Compose { outer, inner } => outer.eval(inner.eval(eps)),
            Modulus::ClampTop { cap, inner } => inner.eval(eps).min(*cap),
            Modulus::Table { points } => table_eval(points, eps),
            Modulus::HalfArg { inner } => inner.eval(eps * 0.5),
            Modulus::FromRate { rate } => {
                let n = rate.eval(eps * 0.5).max(1);
                div_down(eps, 2.0 * n as f64)
            }
        }
    }

    /// Positivity and monotonicity on the logarithmic probe grid
    /// ε ∈ [1e−6, 1e3]; ties within `eta` are accepted.
    pub fn check(&self, eta: f64) -> Result<()> {
        let grid = probe_grid();
        let mut prev: Option<(f64, f64)> = None;
        for &eps in &grid {
            let v = self.eval(eps);
            if !(v > 0.0) || v.is_nan() {
                return Err(Error::InvalidModulus {
                    eps,
                    reason: format!("value {v} is not strictly positive"),
                });
            }
            if let Some((pe, pv)) = prev {
                if v < pv - eta {
                    return Err(Error::InvalidModulus {
                        eps,
                        reason: format!("decreases from {pv} at {pe} to {v}"),
                    });
                }
            }
            prev = Some((eps, v));
        }
        Ok(())
    }

    /// A modulus with the same tree and every leaf scaled by `factor`; used by
    /// fault fixtures to inflate a certified modulus.
    pub fn inflated(&self, factor: f64) -> Modulus {
        Modulus::scaled(factor, 1.0, self.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("modulus serialises")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn table_eval(points: &[(f64, f64)], eps: f64) -> f64 {
    let (e0, v0) = points[0];
    if eps <= e0 {
        if eps == e0 {
            return v0;
        }
        return mul_down(v0, div_down(eps, e0));
    }
    let (el, vl) = points[points.len() - 1];
    if eps >= el {
        return vl;
    }
    let i = points.partition_point(|p| p.0 <= eps);
    let (a, va) = points[i - 1];
    let (b, vb) = points[i];
    if eps == a {
        return va;
    }
    let t = (eps - a) / (b - a);
    let v = va + t * (vb - va);
    v.next_down().max(va)
}

/// Logarithmic probe grid with ten points per decade on [1e−6, 1e3].
pub fn probe_grid() -> Vec<f64> {
    (-60..=30).map(|k| 10f64.powf(k as f64 / 10.0)).collect()
}

/// Reference data of a modulus of regularity: anchor zero, ball radius and,
/// for resolvent-based moduli, the resolvent order γ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusContext {
    pub anchor: Vector,
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl ModulusContext {
    pub fn new(anchor: Vector, radius: f64, gamma: Option<f64>) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::param("radius", format!("{radius} must be > 0")));
        }
        if let Some(g) = gamma {
            if !(g > 0.0) {
                return Err(Error::param("gamma", format!("{g} must be > 0")));
            }
        }
        Ok(ModulusContext { anchor, radius, gamma })
    }

    pub fn ball(&self) -> ClosedBall {
        ClosedBall {
            center: self.anchor.clone(),
            radius: self.radius,
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("{v} must be positive and finite")))
    }
}

/// (1 − k)ε for a contraction with constant k.
pub fn modulus_contraction(k: f64) -> Result<Modulus> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::param("k", format!("{k} is outside [0, 1)")));
    }
    Ok(Modulus::linear(add_down(1.0, -k)))
}

/// (1 − k)ε for a continuous orbital contraction, `d(Tx, T²x) ≤ k·d(x, Tx)`.
pub fn modulus_orbital_contraction(k: f64) -> Result<Modulus> {
    modulus_contraction(k)
}

/// ε for a retraction onto its fixed-point set (e.g. a metric projection).
pub fn modulus_retraction() -> Modulus {
    Modulus::linear(1.0)
}

/// 2(ε/μ)^γ, the Hölder-type modulus of a reflected-resolvent composition
/// for semi-algebraic sets.
pub fn modulus_holder(mu: f64, gamma: f64) -> Result<Modulus> {
    positive("mu", mu)?;
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return Err(Error::param("gamma", format!("{gamma} must be >= 1")));
    }
    Ok(Modulus::power(2.0, mu, gamma))
}

/// Lifts a weak-sharp-minima growth function ψ to a modulus for `f − m`.
pub fn modulus_weak_sharp(psi: Modulus) -> Result<Modulus> {
    psi.check(crate::geometry::DEFAULT_ETA)?;
    Ok(psi)
}

/// ε/k for an operator metrically subregular with constant k.
pub fn modulus_subregularity(k: f64) -> Result<Modulus> {
    positive("k", k)?;
    Ok(Modulus::scaled(1.0, k, Modulus::linear(1.0)))
}

/// ψ for a ψ-strongly accretive operator A; γψ for the fixed-point form
/// `Id − γA` when γ is given.
pub fn modulus_strongly_accretive(psi: Modulus, gamma: Option<f64>) -> Result<Modulus> {
    psi.check(crate::geometry::DEFAULT_ETA)?;
    match gamma {
        None => Ok(psi),
        Some(g) => {
            positive("gamma", g)?;
            Ok(Modulus::scaled(g, 1.0, psi))
        }
    }
}

/// From a modulus φ for f and a modulus of uniform continuity ρ for f on
/// B̄(z, r+1) to a modulus for the resolvent J_{γ∂f}:
/// `min{ρ(φ(ε)/2), γφ(ε)/(2r), 1}`.
pub fn convert_f_to_resolvent(phi: &Modulus, rho: &Modulus, ctx: &ModulusContext) -> Result<Modulus> {
    let gamma = ctx
        .gamma
        .ok_or_else(|| Error::param("gamma", "resolvent order missing from context"))?;
    positive("r", ctx.radius)?;
    Ok(Modulus::clamp_top(
        1.0,
        Modulus::min(vec![
            Modulus::compose(rho.clone(), Modulus::scaled(1.0, 2.0, phi.clone())),
            Modulus::scaled(gamma, 2.0 * ctx.radius, phi.clone()),
        ]),
    ))
}

/// From a resolvent modulus to a modulus for f: `φ(ε)²/(2γ)`.
pub fn convert_resolvent_to_f(phi: &Modulus, gamma: f64) -> Result<Modulus> {
    positive("gamma", gamma)?;
    Ok(Modulus::scaled(
        1.0,
        2.0 * gamma,
        Modulus::PowerOf {
            exponent: 2.0,
            inner: Box::new(phi.clone()),
        },
    ))
}

/// From a resolvent modulus on B̄(z, r) to a subdifferential modulus on
/// B̄(z, r′): `(1/γ)·min{φ(ε/2), ε/2, r − r′}`.
pub fn convert_resolvent_to_subdiff(phi: &Modulus, gamma: f64, r: f64, r_prime: f64) -> Result<Modulus> {
    positive("gamma", gamma)?;
    positive("r", r)?;
    positive("r_prime", r_prime)?;
    if r_prime >= r {
        return Err(Error::param("r_prime", format!("{r_prime} must be < r = {r}")));
    }
    Ok(Modulus::scaled(
        1.0,
        gamma,
        Modulus::clamp_top(
            add_down(r, -r_prime),
            Modulus::min(vec![
                Modulus::half_arg(phi.clone()),
                Modulus::scaled(1.0, 2.0, Modulus::linear(1.0)),
            ]),
        ),
    ))
}

/// From a subdifferential modulus and a modulus of uniform continuity ρ for
/// `Id + γ∂f` to a resolvent modulus: `min{ρ(γφ(ε)), 1}`.
pub fn convert_subdiff_to_resolvent(phi: &Modulus, rho: &Modulus, gamma: f64) -> Result<Modulus> {
    positive("gamma", gamma)?;
    Ok(Modulus::clamp_top(
        1.0,
        Modulus::compose(rho.clone(), Modulus::scaled(gamma, 1.0, phi.clone())),
    ))
}

/// `ε/(2ψ(ε/2))` from a common convergence rate ψ of the Picard iterates of
/// a nonexpansive map.
pub fn modulus_from_convergence_rate(psi: RateFn) -> Result<Modulus> {
    for eps in probe_grid() {
        if psi.eval(eps) == 0 {
            return Err(Error::InvalidModulus {
                eps,
                reason: "rate evaluates to 0".into(),
            });
        }
    }
    Ok(Modulus::FromRate { rate: psi })
}

/// `C(n, ⌊n/2⌋)` with overflow detection.
pub fn central_binomial(n: u32) -> Result<u128> {
    let k = n / 2;
    let mut acc: u128 = 1;
    for i in 0..k as u128 {
        acc = acc
            .checked_mul(n as u128 - i)
            .ok_or_else(|| Error::param("n", "binomial overflow"))?
            / (i + 1);
    }
    Ok(acc)
}

/// Exponent `min{((2d−1)ⁿ+1)/2, B(n−1)·dⁿ}` of the metric-regularity modulus
/// for basic convex semi-algebraic sets of degree ≤ d in ℝⁿ.
pub fn semialgebraic_exponent(n: u32, d: u32) -> Result<u128> {
    if n == 0 || d == 0 {
        return Err(Error::param("n, d", "must be >= 1"));
    }
    let overflow = || Error::param("n, d", "exponent overflows; use smaller n or d");
    let odd = (2 * d as u128 - 1).checked_pow(n).ok_or_else(overflow)?;
    let first = odd.div_ceil(2);
    let second = central_binomial(n - 1)?
        .checked_mul((d as u128).checked_pow(n).ok_or_else(overflow)?)
        .ok_or_else(overflow)?;
    Ok(first.min(second))
}

/// `(ε/c)^γ / m`, a modulus of metric regularity for m basic convex
/// semi-algebraic sets of degree ≤ d in ℝⁿ.
pub fn modulus_metric_regularity_semialgebraic(n: u32, d: u32, m: u32, c: f64) -> Result<Modulus> {
    if m == 0 {
        return Err(Error::param("m", "must be >= 1"));
    }
    positive("c", c)?;
    let gamma = semialgebraic_exponent(n, d)?;
    Ok(Modulus::scaled(1.0, m as f64, Modulus::power(1.0, c, gamma as f64)))
}

/// Smallest c such that `(ε/c)^γ/m ≤ δ̂(ε)` on every point of an empirical
/// table. The result is empirical, not certified.
pub fn calibrate_semialgebraic_c(table: &[(f64, f64)], n: u32, d: u32, m: u32) -> Result<f64> {
    if table.is_empty() {
        return Err(Error::param("table", "empty"));
    }
    let gamma = semialgebraic_exponent(n, d)? as f64;
    let mut c: f64 = 0.0;
    for &(eps, delta) in table {
        if !(delta > 0.0) {
            return Err(Error::Estimation {
                eps,
                reason: "nonpositive threshold".into(),
            });
        }
        // (ε/c)^γ ≤ mδ ⇔ c ≥ ε·(mδ)^(−1/γ)
        let need = eps / (m as f64 * delta).powf(1.0 / gamma);
        c = c.max(need);
    }
    Ok(add_up(c, c * 1e-12))
}

/// φ∘ρ: composes a modulus φ for each mapping with a modulus of metric
/// regularity ρ of their fixed-point sets.
pub fn compose_with_metric_regularity(phi: &Modulus, rho: &Modulus) -> Modulus {
    Modulus::compose(phi.clone(), rho.clone())
}

/// `ρ·δ(ε)/(b + ρ)` for alternating projections between boundedly regular
/// sets at distance ρ, where δ is a bounded-regularity witness.
pub fn modulus_bounded_regularity_pair(rho_dist: f64, delta: Modulus, b: f64) -> Result<Modulus> {
    positive("rho_dist", rho_dist)?;
    positive("b", b)?;
    Ok(Modulus::scaled(rho_dist, add_up(b, rho_dist), delta))
}

/// `min{ρ(ψ_C(ε/2)/2), ψ_C(ε/2)/(2(b+1)), ε/2, 1}`, a modulus for ∂f from
/// bounded weak sharp minima ψ_C and a modulus of uniform continuity ρ.
pub fn modulus_ppa_weak_sharp(psi_c: &Modulus, rho: &Modulus, b: f64) -> Result<Modulus> {
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::param("b", format!("{b} must be >= 0")));
    }
    let psi_half = Modulus::half_arg(psi_c.clone());
    Ok(Modulus::clamp_top(
        1.0,
        Modulus::min(vec![
            Modulus::compose(rho.clone(), Modulus::scaled(1.0, 2.0, psi_half.clone())),
            Modulus::scaled(1.0, 2.0 * add_up(b, 1.0), psi_half),
            Modulus::scaled(1.0, 2.0, Modulus::linear(1.0)),
        ]),
    ))
}

/// Empirical threshold table: for each ε, the largest δ̂ such that no sample
/// with `|F(x)| < δ̂` lies at distance ≥ ε from the zero set.
///
/// δ̂(ε) is the minimum of `|F|` over the refuting samples, capped at
/// [`ESTIMATE_TOP`]; refuting sets shrink as ε grows, so the table is
/// nondecreasing by construction.
pub fn estimate_modulus_from_oracles(
    residual: &dyn Fn(&Vector) -> f64,
    zero_distance: &dyn Fn(&Vector) -> f64,
    ball: &ClosedBall,
    eps_grid: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if samples == 0 {
        return Err(Error::param("samples", "must be > 0"));
    }
    if eps_grid.is_empty() {
        return Err(Error::param("eps_grid", "empty"));
    }
    if let Some(e) = eps_grid.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::param("eps_grid", format!("{e} is not a positive epsilon")));
    }
    let mut grid = eps_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let evaluated: Vec<(f64, f64)> = ball
        .samples(samples, seed)
        .iter()
        .map(|x| (residual(x).abs(), zero_distance(x)))
        .collect();
    grid.into_iter()
        .map(|eps| {
            let delta = evaluated
                .iter()
                .filter(|(_, d)| *d >= eps)
                .map(|(f, _)| *f)
                .filter(|f| !f.is_nan())
                .fold(ESTIMATE_TOP, f64::min);
            if delta > 0.0 {
                Ok((eps, delta))
            } else {
                Err(Error::Estimation {
                    eps,
                    reason: "a sample with zero residual lies away from the zero set".into(),
                })
            }
        })
        .collect()
}
