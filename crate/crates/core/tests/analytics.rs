use proptest::prelude::*;
use regime_dividends::analytics::{
    apriori_bounds, characteristic_roots, resolvent_density, single_regime_barrier,
    single_regime_value, ScaleFunction, SingleRegimeSolution,
};
use regime_dividends::model::{reference_model, RegimeModel};

/// Classical RK4 for ½σ²u″ + μu′ − qu = −g(x) as a first-order system.
fn rk4_linear(mu: f64, sigma: f64, q: f64, g: impl Fn(f64) -> f64, u0: [f64; 2], x_end: f64, n: usize) -> Vec<[f64; 2]> {
    let s2 = 0.5 * sigma * sigma;
    let rhs = |x: f64, u: [f64; 2]| [u[1], (q * u[0] - mu * u[1] - g(x)) / s2];
    let h = x_end / n as f64;
    let mut out = vec![u0];
    let mut u = u0;
    for k in 0..n {
        let x = k as f64 * h;
        let k1 = rhs(x, u);
        let k2 = rhs(x + h / 2.0, [u[0] + h / 2.0 * k1[0], u[1] + h / 2.0 * k1[1]]);
        let k3 = rhs(x + h / 2.0, [u[0] + h / 2.0 * k2[0], u[1] + h / 2.0 * k2[1]]);
        let k4 = rhs(x + h, [u[0] + h * k3[0], u[1] + h * k3[1]]);
        for j in 0..2 {
            u[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        out.push(u);
    }
    out
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn roots_satisfy_vieta() {
    let (mu, sigma, q) = (0.06, 0.24, 2.04);
    let r = characteristic_roots(mu, sigma, q).unwrap();
    let s2 = sigma * sigma;
    assert!((r.lambda_plus * r.lambda_minus + 2.0 * q / s2).abs() < 1e-12);
    assert!((r.lambda_plus + r.lambda_minus + 2.0 * mu / s2).abs() < 1e-12);
    assert!(r.lambda_minus < 0.0 && r.lambda_plus > 0.0);
}

#[test]
fn scale_function_matches_ode_integration() {
    let (mu, sigma, q) = (0.06, 0.24, 2.04);
    let path = rk4_linear(mu, sigma, q, |_| 0.0, [0.0, 2.0 / (sigma * sigma)], 0.5, 20_000);
    let oracle = path.last().unwrap()[0];
    let w = ScaleFunction::new(mu, sigma, q).unwrap();
    assert!(((w.value(0.5) - oracle) / oracle).abs() < 1e-8, "{} vs {oracle}", w.value(0.5));
    // Frozen from the oracle above.
    assert!((w.value(0.5) - 84.407_959_94).abs() < 1e-7, "{}", w.value(0.5));
    let [v, d1, d2] = regime_dividends::analytics::scale_function(mu, sigma, q, 0.5).unwrap();
    assert!((0.5 * sigma * sigma * d2 + mu * d1 - q * v).abs() < 1e-9 * v);
}

#[test]
fn barrier_value_identities() {
    let a = single_regime_barrier(0.06, 0.24, 0.04).unwrap();
    assert_eq!(single_regime_value(0.06, 0.24, 0.04, 0.0).unwrap(), 0.0);
    assert!((single_regime_value(0.06, 0.24, 0.04, a).unwrap() - 1.5).abs() < 1e-12);
    let sol = SingleRegimeSolution::new(0.06, 0.24, 0.04).unwrap();
    assert!((sol.derivative(a) - 1.0).abs() < 1e-12);
    assert!(sol.second_derivative(a * 0.999) < 0.0);
    // Linear beyond the barrier.
    assert!((sol.value(a + 0.7) - 1.5 - 0.7).abs() < 1e-12);
}

#[test]
fn resolvent_matches_boundary_value_problem() {
    // u(x) = ∫ h(x, y) g(y) dy solves ½σ²u″ + μu′ − qu = −g, u(0) = 0, u′(b) = 0.
    let (mu, sigma, q, b) = (0.06, 0.24, 2.04, 1.0);
    let g = |y: f64| 1.0 + y;
    let n = 20_000;
    let base = rk4_linear(mu, sigma, q, g, [0.0, 0.0], b, n);
    let hom = rk4_linear(mu, sigma, q, |_| 0.0, [0.0, 1.0], b, n);
    let s = -base[n][1] / hom[n][1];
    for x in [0.25, 0.5, 0.9] {
        let k = (x / b * n as f64).round() as usize;
        let oracle = base[k][0] + s * hom[k][0];
        // The density has a kink at y = x, so integrate the two pieces apart.
        let dens = |y: f64| resolvent_density(mu, sigma, q, b, x, y).unwrap() * g(y);
        let u = simpson(dens, 0.0, x, 4000) + simpson(dens, x, b, 4000);
        assert!((u - oracle).abs() < 1e-8 * oracle.abs().max(1.0), "x={x}: {u} vs {oracle}");
    }
}

#[test]
fn resolvent_mass_bounded_and_vanishes_at_origin() {
    let (mu, sigma, q, b) = (0.06, 0.24, 2.04, 1.0);
    for k in 0..=20 {
        let x = k as f64 / 20.0 * b;
        let mass = simpson(|y| resolvent_density(mu, sigma, q, b, x, y).unwrap(), 0.0, b, 2000);
        assert!(q * mass <= 1.0 + 1e-9, "x={x}: q·mass = {}", q * mass);
        assert!(mass >= -1e-12);
    }
    for y in [0.0, 0.3, 1.0] {
        assert_eq!(resolvent_density(mu, sigma, q, b, 0.0, y).unwrap(), 0.0);
    }
}

#[test]
fn apriori_bounds_of_single_regime_coincide() {
    let m = RegimeModel::single(0.06, 0.24, 0.04).unwrap();
    let b = apriori_bounds(&m).unwrap();
    assert_eq!(b.lower, b.upper);
}

#[test]
fn apriori_bounds_of_reference_model_are_ordered() {
    let m = reference_model();
    let b = apriori_bounds(&m).unwrap();
    let upper = SingleRegimeSolution::new(0.06 / 0.0576, 1.0, 0.05 / 0.09).unwrap();
    let lower = SingleRegimeSolution::new(0.08 / 0.09, 1.0, 0.04 / 0.0576).unwrap();
    assert_eq!(b.upper, upper);
    assert_eq!(b.lower, lower);
    for k in 0..1000 {
        let x = k as f64 * 3e-3;
        assert!(b.lower.value(x) <= b.upper.value(x) + 1e-12, "x={x}");
    }
}

proptest! {
    #[test]
    fn barrier_invariant_under_volatility_scaling(
        mu in 0.01f64..1.0,
        sigma in 0.05f64..1.0,
        r in 0.005f64..0.2,
        c in 0.1f64..10.0,
    ) {
        let a = single_regime_barrier(mu, sigma, r).unwrap();
        let b = single_regime_barrier(c * mu, c.sqrt() * sigma, c * r).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{a} vs {b}");
    }

    #[test]
    fn scale_function_solves_its_ode(
        mu in -1.0f64..1.0,
        sigma in 0.05f64..1.0,
        q in 0.01f64..5.0,
        x in 0.0f64..3.0,
    ) {
        let w = ScaleFunction::new(mu, sigma, q).unwrap();
        // Beyond this e^{λ₊x} is not representable.
        prop_assume!(w.roots.lambda_plus * x < 600.0);
        let (v, d1, d2) = (w.value(x), w.derivative(x), w.second_derivative(x));
        let scale = v.abs().max(d1.abs()).max(d2.abs() * sigma * sigma).max(1.0);
        prop_assert!((0.5 * sigma * sigma * d2 + mu * d1 - q * v).abs() <= 1e-9 * scale);
        prop_assert!(d1 > 0.0);
    }
}
