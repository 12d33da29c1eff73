//! Directed rounding for single floating-point operations.
//!
//! Each helper returns the round-to-nearest result when it is exact and
//! otherwise steps one ulp in the requested direction. Exactness is detected
//! with error-free transformations (`mul_add` residuals, TwoSum), so a value
//! such as `1.0 / 0.25` stays `4.0` instead of being nudged past an integer.

pub fn mul_down(a: f64, b: f64) -> f64 {
    let p = a * b;
    if !p.is_finite() {
        return p;
    }
    let err = a.mul_add(b, -p);
    if err < 0.0 {
        p.next_down()
    } else {
        p
    }
}

pub fn mul_up(a: f64, b: f64) -> f64 {
    let p = a * b;
    if !p.is_finite() {
        return p;
    }
    let err = a.mul_add(b, -p);
    if err > 0.0 {
        p.next_up()
    } else {
        p
    }
}

/// Sign of the exact remainder `a - q*b`, scaled by the sign of `b`:
/// positive means the true quotient lies above `q`.
fn div_residual_sign(a: f64, b: f64, q: f64) -> f64 {
    let r = (-q).mul_add(b, a);
    if b < 0.0 {
        -r
    } else {
        r
    }
}

pub fn div_down(a: f64, b: f64) -> f64 {
    let q = a / b;
    if !q.is_finite() || q == 0.0 && a == 0.0 {
        return q;
    }
    if div_residual_sign(a, b, q) < 0.0 {
        q.next_down()
    } else {
        q
    }
}

pub fn div_up(a: f64, b: f64) -> f64 {
    let q = a / b;
    if !q.is_finite() || q == 0.0 && a == 0.0 {
        return q;
    }
    if div_residual_sign(a, b, q) > 0.0 {
        q.next_up()
    } else {
        q
    }
}

fn two_sum_err(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

pub fn add_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return s;
    }
    if two_sum_err(a, b, s) < 0.0 {
        s.next_down()
    } else {
        s
    }
}

pub fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return s;
    }
    if two_sum_err(a, b, s) > 0.0 {
        s.next_up()
    } else {
        s
    }
}

fn integral_exponent(p: f64) -> Option<u32> {
    if p.fract() == 0.0 && (0.0..=64.0).contains(&p) {
        Some(p as u32)
    } else {
        None
    }
}

/// Lower bound on `x^p` for `x >= 0`.
pub fn pow_down(x: f64, p: f64) -> f64 {
    debug_assert!(x >= 0.0);
    match integral_exponent(p) {
        Some(0) => 1.0,
        Some(n) => (1..n).fold(x, |acc, _| mul_down(acc, x)),
        None => {
            let r = x.powf(p);
            if r > 0.0 && r.is_finite() {
                r.next_down()
            } else {
                r
            }
        }
    }
}

/// Upper bound on `x^p` for `x >= 0`.
pub fn pow_up(x: f64, p: f64) -> f64 {
    debug_assert!(x >= 0.0);
    match integral_exponent(p) {
        Some(0) => 1.0,
        Some(n) => (1..n).fold(x, |acc, _| mul_up(acc, x)),
        None => {
            let r = x.powf(p);
            if r.is_finite() {
                r.next_up()
            } else {
                r
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_operations_are_untouched() {
        assert_eq!(div_up(1.0, 0.25), 4.0);
        assert_eq!(div_down(1.0, 0.25), 4.0);
        assert_eq!(mul_down(0.5, 0.5), 0.25);
        assert_eq!(add_up(1.0, 2.0), 3.0);
        assert_eq!(pow_down(0.5, 2.0), 0.25);
        assert_eq!(pow_up(0.5, 2.0), 0.25);
    }

    #[test]
    fn inexact_operations_bracket_the_quotient() {
        let lo = div_down(1.0, 3.0);
        let hi = div_up(1.0, 3.0);
        assert!(lo < hi);
        assert_eq!(lo.next_up(), hi);
        // 3 * lo < 1 < 3 * hi in exact arithmetic.
        assert!(3.0f64.mul_add(lo, -1.0) < 0.0);
        assert!(3.0f64.mul_add(hi, -1.0) > 0.0);
    }

    #[test]
    fn inexact_sum_brackets() {
        let lo = add_down(0.1, 0.2);
        let hi = add_up(0.1, 0.2);
        assert_eq!(lo.next_up(), hi);
    }

    #[test]
    fn negative_divisor() {
        let q = div_down(1.0, -3.0);
        assert!(q <= -1.0 / 3.0);
        assert!(div_up(1.0, -3.0) >= -1.0 / 3.0);
    }
}
