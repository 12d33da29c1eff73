//! Acceptance criteria 1 to 8. Runs without the libtest harness so that each
//! criterion prints exactly one PASS or FAIL line.

use std::process::ExitCode;
use std::time::Instant;

use fejer_core::geometry::quadrilateral_defect;
use fejer_core::moduli::{
    convert_f_to_resolvent, convert_resolvent_to_f, convert_resolvent_to_subdiff, convert_subdiff_to_resolvent,
    modulus_from_convergence_rate, modulus_metric_regularity_semialgebraic, semialgebraic_exponent,
};
use fejer_core::operators::{ConvexSet, ProxFunction, Resolvent};
use fejer_core::problems::{catalog, catalog_instances, ProblemInstance};
use fejer_core::rates::{
    dist_rate, rate_alternating_projections, rate_gradient_descent, rate_mann_cat0, rate_ppa, theta_for_mann,
    theta_from_sequence,
};
use fejer_core::verify::{
    check_certificate_dominance, check_fejer, check_finite_termination, check_modulus_soundness,
    check_projection_inequality, check_residual_monotone, check_resolvent_inequality, AuditParams,
};
use fejer_core::{ClosedBall, Modulus, ModulusContext, RateFn, StepSequence, Vector};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const EPS_GRID: [f64; 6] = [2.0, 1.0, 0.5, 0.2, 0.1, 0.05];
/// One ulp per directed-rounding step; the longest chain, (ε/c)⁴/m, has five.
const MAX_ULPS: u64 = 5;

fn v(c: &[f64]) -> Vector {
    Vector::new(c.to_vec()).unwrap()
}

fn ulps(a: f64, b: f64) -> u64 {
    if a == b {
        return 0;
    }
    (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
}

fn instance(name: &str) -> ProblemInstance {
    catalog()
        .into_iter()
        .find(|c| c.name == name)
        .unwrap_or_else(|| panic!("{name} missing from catalog"))
        .build()
        .unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn modulus_matches(
    label: &str,
    m: &Modulus,
    oracle: impl Fn(f64) -> f64,
    points: &[f64],
    worst: &mut u64,
) -> Result<(), String> {
    for &e in points {
        let (got, want) = (m.eval(e), oracle(e));
        let d = ulps(got, want);
        *worst = (*worst).max(d);
        let conservative = got <= want || d <= 1;
        ensure(d <= MAX_ULPS && conservative, || {
            format!("{label} at {e}: {got} vs {want}")
        })?;
    }
    Ok(())
}

fn rate_matches(label: &str, r: &RateFn, oracle: impl Fn(f64) -> u64, points: &[f64]) -> Result<(), String> {
    for &e in points {
        let (got, want) = (r.eval(e), oracle(e));
        ensure(got == want, || format!("{label} at {e}: {got} vs {want}"))?;
    }
    Ok(())
}

fn formula_fidelity() -> Outcome {
    let mut worst = 0;
    let pts = [0.3, 1.7, 5.0];

    let ctx = ModulusContext::new(v(&[0.0]), 2.0, Some(1.0)).unwrap();
    let m = convert_f_to_resolvent(&Modulus::power(1.0, 1.0, 2.0), &Modulus::linear(1.0 / 6.0), &ctx).unwrap();
    modulus_matches(
        "f->resolvent",
        &m,
        |e| (e * e / 12.0).min(e * e / 4.0).min(1.0),
        &pts,
        &mut worst,
    )?;

    let phi = Modulus::linear(2.0 / 3.0);
    let m = convert_resolvent_to_f(&phi, 1.5).unwrap();
    modulus_matches("resolvent->f", &m, |e| (2.0 * e / 3.0).powi(2) / 3.0, &pts, &mut worst)?;
    let m = convert_resolvent_to_subdiff(&phi, 0.5, 2.0, 1.0).unwrap();
    modulus_matches(
        "resolvent->subdiff",
        &m,
        |e| (e / 3.0).min(e / 2.0).min(1.0) * 2.0,
        &pts,
        &mut worst,
    )?;

    let m = convert_subdiff_to_resolvent(&Modulus::linear(2.0), &Modulus::power(1.0, 1.0, 0.5), 0.5).unwrap();
    modulus_matches(
        "subdiff->resolvent",
        &m,
        |e| e.sqrt().min(1.0),
        &[0.04, 0.5, 3.0],
        &mut worst,
    )?;

    let m = modulus_from_convergence_rate(RateFn::ceil_inv(1.0, 1.0)).unwrap();
    modulus_matches(
        "from rate",
        &m,
        |e| e / (2.0 * (2.0 / e).ceil()),
        &[0.07, 0.3, 1.5],
        &mut worst,
    )?;

    let binom = |n: u64, k: u64| (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1));
    for (n, d) in [(1u32, 1u32), (2, 2), (3, 2), (2, 3), (4, 1)] {
        let first = (2 * d as u64 - 1).pow(n).div_ceil(2);
        let second = binom(n as u64 - 1, (n as u64 - 1) / 2) * (d as u64).pow(n);
        let got = semialgebraic_exponent(n, d).unwrap();
        ensure(got == first.min(second) as u128, || {
            format!("exponent({n},{d}) = {got}")
        })?;
    }
    let m = modulus_metric_regularity_semialgebraic(2, 2, 3, 1.5).unwrap();
    modulus_matches(
        "semialgebraic rho",
        &m,
        |e| (e / 1.5).powi(4) / 3.0,
        &[0.2, 1.0, 2.5],
        &mut worst,
    )?;

    let r = rate_alternating_projections(1.0, 2.0).unwrap();
    rate_matches(
        "alternating projections",
        &r,
        |e| (5.0 / (e * e)).floor() as u64 + 1,
        &[0.3, 0.7, 3.0],
    )?;
    let r = rate_gradient_descent(1.0).unwrap();
    rate_matches(
        "gradient descent",
        &r,
        |e| (128.0 / (e * e)).floor() as u64,
        &[0.3, 1.3, 5.0],
    )?;
    // λ ≡ 1/2: Σ_{k≤N} 1/4 ≥ n iff N ≥ 4n − 1.
    let theta = theta_for_mann(StepSequence::constant(0.5)).unwrap();
    let r = rate_mann_cat0(&theta, 1.0).unwrap();
    rate_matches("mann", &r, |e| 4 * (16.0 / (e * e)).ceil() as u64 - 1, &[0.3, 1.3, 5.0])?;
    // γ ≡ 1: θ(n) = n − 1.
    let theta = theta_from_sequence(StepSequence::constant(1.0), true).unwrap();
    let r = rate_ppa(&theta, 3.0).unwrap();
    rate_matches("ppa", &r, |e| (18.0 / (e * e)).ceil() as u64, &[0.13, 0.7, 1.0, 2.5])?;

    Ok(format!("all closed forms match, worst deviation {worst} ulp"))
}

fn certificate_dominance() -> Outcome {
    let start = Instant::now();
    let params = AuditParams::default();
    let mut details = Vec::new();
    for name in [
        "grad_quadratic",
        "best_approx_pair",
        "cfp_halfspaces",
        "min_norm",
        "min_norm_2d",
    ] {
        let inst = instance(name);
        let (alpha, phi) = (inst.rate().unwrap(), inst.modulus().unwrap());
        let report = check_certificate_dominance(&inst, alpha, phi, &params).map_err(|e| format!("{name}: {e}"))?;
        ensure(report.passed, || format!("{name}: {report}"))?;
        let certified = dist_rate(alpha, phi);
        let recipe = inst.recipe().unwrap();
        for eps in EPS_GRID {
            let bound = certified.eval(eps);
            let hit = recipe
                .iterates(&inst.start)
                .take(bound as usize + 1)
                .position(|x| inst.zero_distance(&x.unwrap()) < eps);
            ensure(hit.is_some(), || format!("{name}: no hit for eps={eps} by n={bound}"))?;
        }
        details.push(format!("{name} ok"));
    }
    Ok(format!(
        "{} in {:.2}s",
        details.join(", "),
        start.elapsed().as_secs_f64()
    ))
}

fn finite_termination() -> Outcome {
    let start = Instant::now();
    let params = AuditParams::default();
    for name in ["min_norm", "min_norm_2d"] {
        let inst = instance(name);
        let index = inst.termination_index().map_err(|e| e.to_string())?;
        ensure(index == 18, || format!("{name}: certified index {index}, expected 18"))?;
        let report = check_finite_termination(&inst, inst.rate().unwrap(), None, inst.certificate.eps_star, &params)
            .map_err(|e| e.to_string())?;
        ensure(report.passed, || format!("{name}: {report}"))?;
        let trace = inst.run(40).unwrap();
        let anchor = trace.records[3]
            .x
            .coords()
            .iter()
            .map(|c| c.to_bits())
            .collect::<Vec<_>>();
        for r in &trace.records[3..] {
            let bits: Vec<u64> = r.x.coords().iter().map(|c| c.to_bits()).collect();
            ensure(bits == anchor, || format!("{name}: x_{} differs from x_3", r.n))?;
        }
        ensure(trace.records[2].x != trace.records[3].x, || {
            format!("{name}: constant before n=3")
        })?;
    }
    Ok(format!(
        "index 18 in R^1 and R^2, bit-constant from n=3, {:.3}s",
        start.elapsed().as_secs_f64()
    ))
}

fn modulus_soundness() -> Outcome {
    let params = AuditParams::default();
    let mut count = 0;
    for inst in catalog_instances().map_err(|e| e.to_string())? {
        if let Some(phi) = &inst.certificate.modulus {
            let report = check_modulus_soundness(&inst, phi, &inst.ball(), &params).map_err(|e| e.to_string())?;
            ensure(report.passed, || format!("{}: {report}", inst.name))?;
            count += 1;
        }
    }
    let quad = instance("grad_quadratic");
    let inflated = quad.modulus().unwrap().inflated(10.0);
    let report = check_modulus_soundness(&quad, &inflated, &quad.ball(), &params).map_err(|e| e.to_string())?;
    ensure(!report.passed, || "inflated modulus was not refuted".into())?;
    let w = report.witness.ok_or("fault report has no witness")?;
    let (eps, x) = (w.eps.ok_or("witness without eps")?, &w.points[0]);
    ensure(
        quad.residual(x) < inflated.eval(eps) && quad.zero_distance(x) >= eps,
        || format!("witness {x:?} at eps={eps} does not refute"),
    )?;
    Ok(format!("{count} bundled moduli sound; x10 fault refuted at eps={eps}"))
}

fn structural_inequalities() -> Outcome {
    let params = AuditParams {
        samples: 10_000,
        ..AuditParams::default()
    };
    for dim in [2, 3] {
        let ball = ClosedBall::new(Vector::zeros(dim), 5.0).unwrap();
        let pts = ball.samples(40_000, dim as u64);
        for q in pts.chunks(4) {
            let d = quadrilateral_defect(&q[0], &q[1], &q[2], &q[3]).unwrap();
            ensure(d >= -1e-9, || format!("quadrilateral defect {d} in R^{dim}"))?;
        }
    }
    let ball = ClosedBall::new(Vector::zeros(3), 4.0).unwrap();
    let sets = [
        ConvexSet::halfspace(vec![1.0, -2.0, 0.5], 0.7).unwrap(),
        ConvexSet::hyperplane(vec![0.0, 1.0, 1.0], -0.3).unwrap(),
        ConvexSet::cube(vec![-1.0, 0.0, -2.0], vec![1.0, 0.5, 2.0]).unwrap(),
        ConvexSet::ball(vec![0.5, 0.5, 0.0], 1.5).unwrap(),
        ConvexSet::affine(vec![1.0, 0.0, 0.0], vec![vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap(),
    ];
    for set in &sets {
        let r = check_projection_inequality(set, &ball, &params).map_err(|e| e.to_string())?;
        ensure(r.passed, || format!("{set:?}: {r}"))?;
    }
    for f in [ProxFunction::Norm, ProxFunction::half_squared_norm(3)] {
        for gamma in [0.5, 1.0, 2.0] {
            let j = Resolvent::new(f.clone(), gamma, 3).unwrap();
            let value = |x: &Vector| f.value(x);
            let r = check_resolvent_inequality(&value, gamma, &j, &ball, &params).map_err(|e| e.to_string())?;
            ensure(r.passed, || format!("{f:?} gamma={gamma}: {r}"))?;
        }
    }
    Ok("quadrilateral, projection (5 set kinds) and resolvent (2 f x 3 gamma) inequalities hold".into())
}

fn resolvent_round_trip() -> Outcome {
    let params = AuditParams::default();
    let gamma = 1.0;
    let (r, r_prime) = (2.0, 1.0);
    let zero = v(&[0.0]);
    let dist = |x: &Vector| x[0].abs();
    let resolvent = ProblemInstance::from_oracles("resolvent", |x| (2.0 / 3.0 * x[0]).abs(), dist, zero.clone(), r)
        .map_err(|e| e.to_string())?;
    let f = ProblemInstance::from_oracles("f", |x| x[0] * x[0], dist, zero.clone(), r).unwrap();
    let subdiff =
        ProblemInstance::from_oracles("subdiff", |x| (2.0 * x[0]).abs(), dist, zero.clone(), r_prime).unwrap();

    let phi_j = Modulus::linear(2.0 * gamma / (1.0 + 2.0 * gamma));
    let sound = |inst: &ProblemInstance, m: &Modulus| -> Result<(), String> {
        let report = check_modulus_soundness(inst, m, &inst.ball(), &params).map_err(|e| e.to_string())?;
        ensure(report.passed, || format!("{}: {report}", inst.name))
    };
    sound(&resolvent, &phi_j)?;
    sound(&f, &convert_resolvent_to_f(&phi_j, gamma).unwrap())?;
    sound(
        &subdiff,
        &convert_resolvent_to_subdiff(&phi_j, gamma, r, r_prime).unwrap(),
    )?;

    // x² is 2(r + 1)-Lipschitz on [−(r+1), r+1].
    let rho = Modulus::linear(1.0 / (2.0 * (r + 1.0)));
    let ctx = ModulusContext::new(zero, r, Some(gamma)).unwrap();
    let back = convert_f_to_resolvent(&Modulus::power(1.0, 1.0, 2.0), &rho, &ctx).unwrap();
    sound(&resolvent, &back)?;
    Ok("resolvent->f, resolvent->subdiff and f->resolvent outputs are sound for x^2, J(x)=x/3".into())
}

fn fejer_monotonicity() -> Outcome {
    let params = AuditParams::default();
    let (mut traces, mut monotone) = (0, 0);
    for inst in catalog_instances().map_err(|e| e.to_string())? {
        let Ok(recipe) = inst.recipe() else { continue };
        let trace = inst.run(inst.steps).map_err(|e| e.to_string())?;
        let r = check_fejer(&trace, &inst.reference_zero, &params).map_err(|e| e.to_string())?;
        ensure(r.passed, || format!("{}: {r}", inst.name))?;
        traces += 1;
        if recipe.has_monotone_residual() {
            let r = check_residual_monotone(&trace, &params).map_err(|e| e.to_string())?;
            ensure(r.passed, || format!("{}: {r}", inst.name))?;
            monotone += 1;
        }
    }
    Ok(format!(
        "{traces} catalog traces Fejer monotone, {monotone} with monotone residual"
    ))
}

fn specker_demo() -> Outcome {
    let inst = instance("specker_demo");
    let trace = inst.run(200).map_err(|e| e.to_string())?;
    let xs: Vec<f64> = trace.records.iter().map(|r| r.x[0]).collect();
    ensure(xs.windows(2).all(|w| w[1] >= w[0]), || "trace decreases".into())?;
    ensure(xs.iter().all(|&x| x <= 1.0), || "trace exceeds lim a_n = 1".into())?;
    let mut slowest: f64 = f64::INFINITY;
    for k in 1..=12 {
        let n = 5 * k;
        let d = inst.zero_distance(&trace.records[n].x);
        ensure(d > 0.5f64.powi(k as i32), || {
            format!("dist(x_{n}, Fix T) = {d} <= 2^-{k}")
        })?;
        slowest = slowest.min(d * 2f64.powi(k as i32));
    }
    Ok(format!(
        "nondecreasing, bounded by 1, dist(x_5K, Fix T) > 2^-K for K=1..12 (min ratio {slowest:.1})"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("formula fidelity", formula_fidelity),
        ("certificate dominance", certificate_dominance),
        ("finite termination", finite_termination),
        ("modulus soundness", modulus_soundness),
        ("structural inequalities", structural_inequalities),
        ("resolvent modulus round trip", resolvent_round_trip),
        ("fejer monotonicity", fejer_monotonicity),
        ("slow convergence demo", specker_demo),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
