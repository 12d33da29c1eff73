//! Rate functions ε ↦ ℕ, rates of divergence for step series, and the rate
//! combinators that turn an approximate-zero bound α and a modulus φ into
//! convergence, Cauchy and finite-termination indices.
//!
//! Evaluation rounds toward larger indices. `u64::MAX` stands for an
//! unbounded index (for instance a table queried below its smallest ε).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moduli::{probe_grid, Modulus};
use crate::rounding::{add_up, div_up, mul_up, pow_down, pow_up};

/// Largest number of series terms scanned when θ has no closed form.
pub const THETA_SCAN_CAP: u64 = 50_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateFn {
    Constant {
        value: u64,
    },
    /// ε ↦ ⌈a/εᵖ⌉
    CeilInv {
        a: f64,
        p: f64,
    },
    /// ε ↦ ⌊a/εᵖ⌋
    FloorInv {
        a: f64,
        p: f64,
    },
    /// ε ↦ inner(ε) + k
    PlusConst {
        k: u64,
        inner: Box<RateFn>,
    },
    /// ε ↦ θ(inner(ε))
    ComposeDiv {
        theta: RateOfDivergence,
        inner: Box<RateFn>,
    },
    /// ε ↦ α(φ(ε))
    ComposeMod {
        alpha: Box<RateFn>,
        phi: Box<Modulus>,
    },
    /// Step function through `(ε, n)` points: the value at the largest
    /// tabulated ε not exceeding the argument, unbounded below the table.
    Table {
        points: Vec<(f64, u64)>,
    },
    /// Smallest n with `initial·ratioⁿ < ε`, for residuals that contract
    /// geometrically along the orbit.
    Geometric {
        ratio: f64,
        initial: f64,
    },
}

fn index_ceil(x: f64) -> u64 {
    if x.is_nan() || x >= u64::MAX as f64 {
        u64::MAX
    } else if x <= 0.0 {
        0
    } else {
        x.ceil() as u64
    }
}

fn index_floor(x: f64) -> u64 {
    if x.is_nan() || x >= u64::MAX as f64 {
        u64::MAX
    } else if x <= 0.0 {
        0
    } else {
        x.floor() as u64
    }
}

fn geometric_index(ratio: f64, initial: f64, eps: f64) -> u64 {
    if initial < eps {
        return 0;
    }
    if ratio == 0.0 {
        return 1;
    }
    if !(eps > 0.0) {
        return u64::MAX;
    }
    let bound = |n: u64| mul_up(initial, pow_up(ratio, n as f64));
    let guess = ((initial / eps).ln() / (1.0 / ratio).ln()).floor();
    if !(guess < 1e15) {
        return u64::MAX;
    }
    let mut n = guess.max(0.0) as u64;
    while bound(n) >= eps {
        n += 1;
    }
    while n > 0 && bound(n - 1) < eps {
        n -= 1;
    }
    n
}

impl RateFn {
    pub fn constant(value: u64) -> Self {
        RateFn::Constant { value }
    }

    pub fn ceil_inv(a: f64, p: f64) -> Self {
        RateFn::CeilInv { a, p }
    }

    pub fn floor_inv(a: f64, p: f64) -> Self {
        RateFn::FloorInv { a, p }
    }

    pub fn plus(self, k: u64) -> Self {
        RateFn::PlusConst {
            k,
            inner: Box::new(self),
        }
    }

    pub fn compose_mod(alpha: RateFn, phi: Modulus) -> Self {
        RateFn::ComposeMod {
            alpha: Box::new(alpha),
            phi: Box::new(phi),
        }
    }

    pub fn compose_div(theta: RateOfDivergence, inner: RateFn) -> Self {
        RateFn::ComposeDiv {
            theta,
            inner: Box::new(inner),
        }
    }

    pub fn geometric(ratio: f64, initial: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&ratio) {
            return Err(Error::param("ratio", format!("{ratio} is outside [0, 1)")));
        }
        if !(initial >= 0.0 && initial.is_finite()) {
            return Err(Error::param("initial", format!("{initial} must be >= 0")));
        }
        Ok(RateFn::Geometric { ratio, initial })
    }

    pub fn table(mut points: Vec<(f64, u64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::param("points", "table needs at least one point"));
        }
        if points.iter().any(|p| !(p.0 > 0.0 && p.0.is_finite())) {
            return Err(Error::param("points", "abscissae must be positive and finite"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0 || w[1].1 > w[0].1) {
            return Err(Error::param("points", "table must be strictly ordered and antitone"));
        }
        Ok(RateFn::Table { points })
    }

    /// Index certified for accuracy ε, rounded toward larger values.
    pub fn eval(&self, eps: f64) -> u64 {
        match self {
            RateFn::Constant { value } => *value,
            RateFn::CeilInv { a, p } => index_ceil(div_up(*a, pow_down(eps, *p))),
            RateFn::FloorInv { a, p } => index_floor(div_up(*a, pow_down(eps, *p))),
            RateFn::PlusConst { k, inner } => inner.eval(eps).saturating_add(*k),
            RateFn::ComposeDiv { theta, inner } => match inner.eval(eps) {
                u64::MAX => u64::MAX,
                n => theta.theta(n).unwrap_or(u64::MAX),
            },
            RateFn::ComposeMod { alpha, phi } => alpha.eval(phi.eval(eps)),
            RateFn::Geometric { ratio, initial } => geometric_index(*ratio, *initial, eps),
            RateFn::Table { points } => {
                let i = points.partition_point(|p| p.0 <= eps);
                if i == 0 {
                    u64::MAX
                } else {
                    points[i - 1].1
                }
            }
        }
    }

    /// Antitonicity on the logarithmic probe grid.
    pub fn check(&self) -> Result<()> {
        let mut prev: Option<(f64, u64)> = None;
        for eps in probe_grid() {
            let n = self.eval(eps);
            if let Some((pe, pn)) = prev {
                if n > pn {
                    return Err(Error::param(
                        "rate",
                        format!("increases from {pn} at eps={pe} to {n} at eps={eps}"),
                    ));
                }
            }
            prev = Some((eps, n));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("rate serialises")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Nonnegative step sequence (λₙ for Mann, γₙ for the proximal point
/// algorithm, or the terms of a divergent series).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSequence {
    Constant {
        value: f64,
    },
    /// Finite explicit list; terms past the end are absent.
    List {
        values: Vec<f64>,
    },
    /// k ↦ scale/(k+1)^power
    Harmonic {
        scale: f64,
        power: f64,
    },
}

impl StepSequence {
    pub fn constant(value: f64) -> Self {
        StepSequence::Constant { value }
    }

    pub fn term(&self, k: u64) -> Option<f64> {
        match self {
            StepSequence::Constant { value } => Some(*value),
            StepSequence::List { values } => values.get(k as usize).copied(),
            StepSequence::Harmonic { scale, power } => Some(scale / ((k + 1) as f64).powf(*power)),
        }
    }

    /// Term k for an iteration driver; a finite list that runs out is an error.
    pub fn step(&self, k: usize) -> Result<f64> {
        self.term(k as u64).ok_or(Error::ScheduleExhausted { step: k })
    }

    fn validate(&self) -> Result<()> {
        let bad = |v: f64| !(v >= 0.0 && v.is_finite());
        match self {
            StepSequence::Constant { value } if bad(*value) => {
                Err(Error::param("steps", format!("{value} is not a nonnegative step")))
            }
            StepSequence::List { values } if values.iter().any(|v| bad(*v)) => {
                Err(Error::param("steps", "list contains a negative or non-finite step"))
            }
            StepSequence::Harmonic { scale, power } if bad(*scale) || bad(*power) => {
                Err(Error::param("steps", "harmonic scale and power must be nonnegative"))
            }
            _ => Ok(()),
        }
    }
}

/// Which series the divergence rate is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SeriesTransform {
    /// Σ γₖ
    #[default]
    Plain,
    /// Σ γₖ²
    Squared,
    /// Σ λₖ(1 − λₖ)
    MannProduct,
}

impl SeriesTransform {
    fn apply(self, v: f64) -> f64 {
        match self {
            SeriesTransform::Plain => v,
            SeriesTransform::Squared => v * v,
            SeriesTransform::MannProduct => v * (1.0 - v),
        }
    }
}

/// θ with `Σ_{k=0}^{θ(n)} tₖ ≥ n`, where tₖ is the transformed step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateOfDivergence {
    pub steps: StepSequence,
    #[serde(default)]
    pub transform: SeriesTransform,
}

impl RateOfDivergence {
    pub fn new(steps: StepSequence, transform: SeriesTransform) -> Result<Self> {
        steps.validate()?;
        Ok(RateOfDivergence { steps, transform })
    }

    pub fn term(&self, k: u64) -> Option<f64> {
        self.steps.term(k).map(|v| self.transform.apply(v))
    }

    /// Smallest N with `Σ_{k=0}^{N} tₖ ≥ n`; θ(0) = 0.
    pub fn theta(&self, n: u64) -> Result<u64> {
        if n == 0 {
            return Ok(0);
        }
        let target = n as f64;
        match &self.steps {
            StepSequence::Constant { value } => {
                let c = self.transform.apply(*value);
                if !(c > 0.0) {
                    return Err(Error::NotDivergent { target: n });
                }
                // (N+1)·c ≥ n with N+1 rounded up: never smaller than exact.
                let terms = index_ceil(div_up(target, c));
                Ok(terms.max(1) - 1)
            }
            StepSequence::Harmonic { scale, power } => {
                let (s, p) = match self.transform {
                    SeriesTransform::Squared => (scale * scale, 2.0 * power),
                    _ => (*scale, *power),
                };
                if p > 1.0 && harmonic_sum_bound(s, p) < target {
                    return Err(Error::NotDivergent { target: n });
                }
                self.scan(n, THETA_SCAN_CAP)
            }
            StepSequence::List { .. } => self.scan(n, THETA_SCAN_CAP),
        }
    }

    fn scan(&self, n: u64, cap: u64) -> Result<u64> {
        let target = n as f64;
        let mut sum = 0.0;
        for k in 0..cap {
            match self.term(k) {
                Some(t) => {
                    sum += t;
                    if sum >= target {
                        return Ok(k);
                    }
                }
                None => break,
            }
        }
        Err(Error::NotDivergent { target: n })
    }

    /// Checks `Σ_{k=0}^{θ(n)} tₖ ≥ n` by direct summation for n ≤ horizon.
    pub fn validate_up_to(&self, horizon: u64) -> Result<()> {
        for n in 1..=horizon {
            let t = self.theta(n)?;
            let sum: f64 = (0..=t).filter_map(|k| self.term(k)).sum();
            if sum < n as f64 {
                return Err(Error::param(
                    "theta",
                    format!("partial sum {sum} up to {t} is below {n}"),
                ));
            }
        }
        Ok(())
    }
}

/// Upper bound on `Σ_{k≥1} s·k^{−p}` for p > 1 (explicit head plus an
/// integral tail bound).
fn harmonic_sum_bound(s: f64, p: f64) -> f64 {
    const HEAD: u64 = 1000;
    let head: f64 = (1..=HEAD).map(|k| (k as f64).powf(-p)).sum();
    let tail = (HEAD as f64).powf(1.0 - p) / (p - 1.0);
    s * (head + tail) * (1.0 + 1e-12)
}

/// θ for Σγₖ or, with `squared`, Σγₖ².
pub fn theta_from_sequence(steps: StepSequence, squared: bool) -> Result<RateOfDivergence> {
    let transform = if squared {
        SeriesTransform::Squared
    } else {
        SeriesTransform::Plain
    };
    RateOfDivergence::new(steps, transform)
}

/// θ for Σλₖ(1 − λₖ), the divergence condition of the Mann iteration.
pub fn theta_for_mann(lambdas: StepSequence) -> Result<RateOfDivergence> {
    RateOfDivergence::new(lambdas, SeriesTransform::MannProduct)
}

/// ε ↦ α(φ(ε/2)): rate of convergence of a Fejér monotone sequence.
pub fn rate_of_convergence(alpha: &RateFn, phi: &Modulus) -> RateFn {
    RateFn::compose_mod(alpha.clone(), Modulus::half_arg(phi.clone()))
}

/// ε ↦ α(φ(ε)): from this index on, dist(xₙ, zer F) < ε.
pub fn dist_rate(alpha: &RateFn, phi: &Modulus) -> RateFn {
    RateFn::compose_mod(alpha.clone(), phi.clone())
}

/// ε ↦ α(φ(ε/2)): from this index on, d(xₙ, x_m) < ε.
pub fn cauchy_modulus(alpha: &RateFn, phi: &Modulus) -> RateFn {
    rate_of_convergence(alpha, phi)
}

/// `α(min{ε*, φ(ε*)})`, or `α(ε*)` when no modulus is supplied.
pub fn finite_termination_index(alpha: &RateFn, phi: Option<&Modulus>, eps_star: f64) -> Result<u64> {
    if !(eps_star > 0.0) {
        return Err(Error::param("eps_star", format!("{eps_star} must be > 0")));
    }
    let at = match phi {
        Some(phi) => eps_star.min(phi.eval(eps_star)),
        None => eps_star,
    };
    Ok(alpha.eval(at))
}

fn require_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("{v} must be positive and finite")))
    }
}

/// ε ↦ ⌊(ρ² + b²)/ε²⌋ + 1 for alternating projections between sets at
/// distance ρ.
pub fn rate_alternating_projections(rho_dist: f64, b: f64) -> Result<RateFn> {
    require_positive("b", b)?;
    if !(rho_dist >= 0.0 && rho_dist.is_finite()) {
        return Err(Error::param("rho_dist", format!("{rho_dist} must be >= 0")));
    }
    let s = add_up(mul_up(rho_dist, rho_dist), mul_up(b, b));
    Ok(RateFn::floor_inv(s, 2.0).plus(1))
}

/// ε ↦ ⌊32(b + 1)²/ε²⌋ for gradient descent with step 1/L.
pub fn rate_gradient_descent(b: f64) -> Result<RateFn> {
    require_positive("b", b)?;
    Ok(RateFn::floor_inv(mul_up(32.0, pow_up(add_up(b, 1.0), 2.0)), 2.0))
}

/// ε ↦ θ(⌈4(b + 1)²/ε²⌉) for the Mann iteration.
pub fn rate_mann_cat0(theta: &RateOfDivergence, b: f64) -> Result<RateFn> {
    require_positive("b", b)?;
    let a = mul_up(4.0, pow_up(add_up(b, 1.0), 2.0));
    Ok(RateFn::compose_div(theta.clone(), RateFn::ceil_inv(a, 2.0)))
}

/// ε ↦ θ(⌈2b²/ε²⌉) + 1 for the proximal point algorithm, θ a rate of
/// divergence for Σγₙ².
pub fn rate_ppa(theta: &RateOfDivergence, b: f64) -> Result<RateFn> {
    require_positive("b", b)?;
    let a = mul_up(2.0, pow_up(b, 2.0));
    Ok(RateFn::compose_div(theta.clone(), RateFn::ceil_inv(a, 2.0)).plus(1))
}

/// ε ↦ α(φ(ρ(ε/2))) for common fixed points of finitely many mappings whose
/// fixed-point sets are metrically regular with modulus ρ.
pub fn composed_rate_common_fixed(alpha: &RateFn, phi: &Modulus, rho: &Modulus) -> RateFn {
    RateFn::compose_mod(
        alpha.clone(),
        Modulus::compose(phi.clone(), Modulus::half_arg(rho.clone())),
    )
}

/// The certified index at ε, or a horizon error when it exceeds `cap`.
pub fn index_within(rate: &RateFn, eps: f64, cap: u64) -> Result<u64> {
    let n = rate.eval(eps);
    if n > cap {
        Err(Error::HorizonExceeded { required: n, cap })
    } else {
        Ok(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent θ oracle: partial sums with exact rational arithmetic for
    /// steps of the form 1/q.
    fn theta_brute(term: impl Fn(u64) -> f64, n: u64) -> u64 {
        let mut sum = 0.0;
        let mut k = 0;
        loop {
            sum += term(k);
            if sum >= n as f64 {
                return k;
            }
            k += 1;
        }
    }

    #[test]
    fn theta_examples() {
        let ones = theta_from_sequence(StepSequence::constant(1.0), false).unwrap();
        assert_eq!(ones.theta(5).unwrap(), 4);
        let halves_sq = theta_from_sequence(StepSequence::constant(0.5), true).unwrap();
        assert_eq!(halves_sq.theta(1).unwrap(), 3);
        let harmonic_sq = theta_from_sequence(StepSequence::Harmonic { scale: 1.0, power: 1.0 }, true).unwrap();
        assert!(matches!(harmonic_sq.theta(2), Err(Error::NotDivergent { target: 2 })));
        assert_eq!(harmonic_sq.theta(1).unwrap(), 0);
        let zeros = theta_from_sequence(StepSequence::constant(0.0), false).unwrap();
        assert_eq!(zeros.theta(0).unwrap(), 0);
        assert!(zeros.theta(1).is_err());
        assert!(theta_from_sequence(StepSequence::constant(-1.0), false).is_err());
    }

    #[test]
    fn theta_matches_brute_scan() {
        let mann = theta_for_mann(StepSequence::constant(0.5)).unwrap();
        for n in 1..200 {
            assert_eq!(mann.theta(n).unwrap(), theta_brute(|_| 0.25, n));
            assert_eq!(mann.theta(n).unwrap(), 4 * n - 1);
        }
        let harmonic = theta_from_sequence(StepSequence::Harmonic { scale: 1.0, power: 1.0 }, false).unwrap();
        for n in 1..8 {
            assert_eq!(harmonic.theta(n).unwrap(), theta_brute(|k| 1.0 / (k + 1) as f64, n));
        }
        let list = theta_from_sequence(
            StepSequence::List {
                values: vec![0.5, 1.0, 2.0, 0.0, 3.0],
            },
            false,
        )
        .unwrap();
        assert_eq!(list.theta(1).unwrap(), 1);
        assert_eq!(list.theta(3).unwrap(), 2);
        assert_eq!(list.theta(4).unwrap(), 4);
        assert_eq!(list.theta(6).unwrap(), 4);
        assert!(list.theta(7).is_err());
        mann.validate_up_to(500).unwrap();
        harmonic.validate_up_to(6).unwrap();
    }

    #[test]
    fn convergence_and_cauchy_examples() {
        let inv = RateFn::ceil_inv(1.0, 1.0);
        assert_eq!(rate_of_convergence(&inv, &Modulus::linear(0.5)).eval(0.1), 40);
        assert_eq!(
            rate_of_convergence(&RateFn::constant(0), &Modulus::linear(3.0)).eval(0.1),
            0
        );
        let inv2 = RateFn::ceil_inv(1.0, 2.0);
        assert_eq!(rate_of_convergence(&inv2, &Modulus::linear(1.0)).eval(1.0), 4);
        assert_eq!(cauchy_modulus(&inv, &Modulus::linear(0.5)).eval(0.1), 40);
        assert_eq!(cauchy_modulus(&inv2, &Modulus::linear(1.0)).eval(1.0), 4);
        assert_eq!(cauchy_modulus(&inv, &Modulus::linear(1.0)).eval(2.0), 1);
    }

    #[test]
    fn dist_rate_examples() {
        let inv = RateFn::ceil_inv(1.0, 1.0);
        assert_eq!(dist_rate(&inv, &Modulus::linear(0.5)).eval(0.5), 4);
        for eps in [0.01, 0.3, 1.0, 7.0] {
            assert_eq!(dist_rate(&inv, &Modulus::linear(1.0)).eval(eps), inv.eval(eps));
        }
    }

    #[test]
    fn finite_termination_examples() {
        let inv = RateFn::ceil_inv(1.0, 1.0);
        assert_eq!(
            finite_termination_index(&inv, Some(&Modulus::linear(0.5)), 1.0).unwrap(),
            2
        );
        assert_eq!(
            finite_termination_index(&inv, Some(&Modulus::linear(3.0)), 0.5).unwrap(),
            2
        );
        assert_eq!(finite_termination_index(&inv, None, 0.25).unwrap(), 4);
        assert!(finite_termination_index(&inv, None, 0.0).is_err());
    }

    #[test]
    fn alternating_projection_examples() {
        assert_eq!(rate_alternating_projections(1.0, 2.0).unwrap().eval(0.5), 21);
        assert_eq!(rate_alternating_projections(0.0, 1.0).unwrap().eval(1.0), 2);
        // ⌊(9 + 16)/0.01⌋ + 1 by integer arithmetic: 25·100 + 1.
        assert_eq!(rate_alternating_projections(3.0, 4.0).unwrap().eval(0.1), 2501);
        assert!(rate_alternating_projections(1.0, 0.0).is_err());
    }

    #[test]
    fn gradient_descent_examples() {
        let r = rate_gradient_descent(1.0).unwrap();
        assert_eq!(r.eval(1.0), 128);
        assert_eq!(r.eval(4.0), 8);
        assert_eq!(r.eval(0.5), 512);
        assert!(rate_gradient_descent(-1.0).is_err());
    }

    #[test]
    fn mann_examples() {
        let theta = theta_for_mann(StepSequence::constant(0.5)).unwrap();
        assert_eq!(rate_mann_cat0(&theta, 1.0).unwrap().eval(2.0), 15);
        assert_eq!(rate_mann_cat0(&theta, 0.5).unwrap().eval(1.0), 35);
        // ⌈16/0.25⌉ = 64, θ(64) = 255.
        assert_eq!(rate_mann_cat0(&theta, 1.0).unwrap().eval(0.5), 255);
        assert!(rate_mann_cat0(&theta, 0.0).is_err());
    }

    #[test]
    fn ppa_examples() {
        let theta = theta_from_sequence(StepSequence::constant(1.0), true).unwrap();
        assert_eq!(rate_ppa(&theta, 3.0).unwrap().eval(1.0), 18);
        assert_eq!(rate_ppa(&theta, 1.0).unwrap().eval(1.0), 2);
        // ⌈2·4/0.25⌉ = 32, θ(32) + 1 = 32.
        assert_eq!(rate_ppa(&theta, 2.0).unwrap().eval(0.5), 32);
        let halves = theta_from_sequence(StepSequence::constant(0.5), true).unwrap();
        // ⌈18⌉ = 18 terms of 1/4 need θ = 71.
        assert_eq!(rate_ppa(&halves, 3.0).unwrap().eval(1.0), 72);
    }

    #[test]
    fn composed_common_fixed_examples() {
        let inv = RateFn::ceil_inv(1.0, 1.0);
        let r = composed_rate_common_fixed(&inv, &Modulus::linear(1.0), &Modulus::linear(0.1));
        assert_eq!(r.eval(0.2), 100);
        let rho = Modulus::power(1.0, 1.0, 2.0);
        let a = composed_rate_common_fixed(&inv, &Modulus::linear(1.0), &rho);
        for eps in [0.1, 0.5, 1.0] {
            assert_eq!(a.eval(eps), inv.eval(rho.eval(eps / 2.0)));
        }
    }

    #[test]
    fn table_rate() {
        let t = RateFn::table(vec![(0.1, 50), (1.0, 5), (0.5, 10)]).unwrap();
        assert_eq!(t.eval(0.05), u64::MAX);
        assert_eq!(t.eval(0.1), 50);
        assert_eq!(t.eval(0.7), 10);
        assert_eq!(t.eval(3.0), 5);
        assert!(RateFn::table(vec![(0.1, 5), (1.0, 50)]).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let theta = theta_from_sequence(StepSequence::constant(1.0), true).unwrap();
        let r = RateFn::compose_mod(rate_ppa(&theta, 3.0).unwrap(), Modulus::linear(0.5));
        let back = RateFn::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn constructed_rates_are_antitone() {
        let theta = theta_from_sequence(StepSequence::constant(1.0), true).unwrap();
        let mann = theta_for_mann(StepSequence::constant(0.5)).unwrap();
        let all = [
            rate_alternating_projections(1.0, 3.0).unwrap(),
            rate_gradient_descent(2.0).unwrap(),
            rate_ppa(&theta, 3.0).unwrap(),
            rate_mann_cat0(&mann, 1.0).unwrap(),
            dist_rate(&RateFn::ceil_inv(1.0, 1.0), &Modulus::power(2.0, 1.0, 2.0)),
        ];
        for r in &all {
            r.check().unwrap();
        }
    }

    #[test]
    fn geometric_rate_is_first_index_below_eps() {
        let brute = |k: f64, r0: f64, eps: f64| (0..10_000u64).find(|n| r0 * k.powi(*n as i32) < eps).unwrap();
        for &(k, r0) in &[(0.5, 1.0), (0.9, 3.0), (0.1, 0.25)] {
            let rate = RateFn::geometric(k, r0).unwrap();
            for eps in [2.0, 1.0, 0.3, 0.05, 1e-6] {
                let (n, b) = (rate.eval(eps), brute(k, r0, eps));
                assert!(n >= b && n <= b + 1, "k={k} r0={r0} eps={eps}: {n} vs {b}");
            }
        }
        assert_eq!(RateFn::geometric(0.5, 1.0).unwrap().eval(0.25), 3);
        assert_eq!(RateFn::geometric(0.0, 1.0).unwrap().eval(0.5), 1);
        assert!(RateFn::geometric(1.0, 1.0).is_err());
        RateFn::geometric(0.7, 2.0).unwrap().check().unwrap();
    }

    proptest! {
        #[test]
        fn floor_and_ceil_bracket_the_quotient(a in 0.01f64..1e4, eps in 0.01f64..10.0) {
            let f = RateFn::floor_inv(a, 2.0).eval(eps);
            let c = RateFn::ceil_inv(a, 2.0).eval(eps);
            let q = a / (eps * eps);
            prop_assert!(c >= f);
            prop_assert!(c - f <= 1);
            prop_assert!((c as f64) >= q * (1.0 - 1e-12));
            prop_assert!((f as f64) <= q * (1.0 + 1e-12) + 1.0);
        }

        #[test]
        fn constant_theta_reaches_target(c in 0.01f64..3.0, n in 1u64..2000) {
            let theta = theta_from_sequence(StepSequence::constant(c), false).unwrap();
            let t = theta.theta(n).unwrap();
            prop_assert!((t + 1) as f64 * c >= n as f64);
            prop_assert!(t == 0 || (t as f64 - 1.0) * c < n as f64);
        }
    }
}
