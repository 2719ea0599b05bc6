//! Acceptance criteria, one PASS/FAIL line each. Criteria listed in
//! `KNOWN_FAILURES` are reported as FAIL without failing the run; any other
//! FAIL, or a known failure that starts passing, exits non-zero.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use regime_dividends::analytics::{characteristic_roots, single_regime_barrier, single_regime_value};
use regime_dividends::fixedpoint::{
    self, hjb_residual, FixedPointSolution, Grid, GridFunction, Operator, SandwichIteration,
};
use regime_dividends::model::{reference_model, RegimeModel, RegimeParams};
use regime_dividends::montecarlo::{dominance_probe, simulate_policy, SimConfig, PROBE_DELTAS};
use regime_dividends::two_regime::{
    quartic_roots, solve_barrier_pair, solve_negative, solve_positive, PositiveCaseSolution,
};
use regime_dividends::{BarrierPolicy, ValueFunction};
use regime_dividends_cli::tables::{compare_with_reference, compute_tables};

const KNOWN_FAILURES: [u32; 3] = [2, 3, 6];
const H: f64 = 1e-3;
const HJB_TOL: f64 = 5e-3;

type Criterion = (u32, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, summary: impl Into<String>) -> Self {
        Self {
            pass,
            summary: summary.into(),
            details: Vec::new(),
        }
    }

    fn detail(&mut self, ok: bool, text: impl Into<String>) {
        self.details
            .push(format!("[{}] {}", if ok { "ok" } else { "fail" }, text.into()));
        self.pass &= ok;
    }
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "fail"
    }
}

fn two_state(a: (f64, f64, f64), b: (f64, f64, f64), q00: f64, q11: f64) -> RegimeModel {
    RegimeModel::two_state(
        RegimeParams::new(a.0, a.1, a.2),
        RegimeParams::new(b.0, b.1, b.2),
        -q00,
        -q11,
    )
    .unwrap()
}

fn mixed_model() -> RegimeModel {
    two_state((-0.2, 0.4, 0.06), (0.14, 0.5, 0.08), -1.0, -0.001)
}

fn worked_example() -> RegimeModel {
    two_state((-0.08, 0.4, 0.06), (0.14, 0.5, 0.08), -10.0, -0.001)
}

/// Criterion 4's sampling box, from a fixed seed.
fn random_positive_models(n: usize) -> Vec<RegimeModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    (0..n)
        .map(|_| {
            let mut state = || {
                (
                    rng.random_range(0.02..0.5),
                    rng.random_range(0.1..0.6),
                    rng.random_range(0.01..0.1),
                )
            };
            let (a, b) = (state(), state());
            let q0 = rng.random_range(0.1..5.0);
            let q1 = rng.random_range(0.1..5.0);
            two_state(a, b, -q0, -q1)
        })
        .collect()
}

/// Second-order central differences misstate the generator by about
/// h²(σ²V⁗/24 + μV‴/6); that much is allowed on top of the fixed bound.
fn truncation_allowance(m: &RegimeModel, closed: &PositiveCaseSolution, h: f64) -> f64 {
    let top = closed.barriers[0].max(closed.barriers[1]);
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        let (s, v) = (m.state(i), &closed.value[i]);
        for k in 0..=2000 {
            let x = 1.2 * top * k as f64 / 2000.0;
            let (d3, d4) = (v.derivative(x, 3), v.derivative(x, 4));
            let gen = (s.sigma * s.sigma * d4 / 24.0 + s.mu * d3 / 6.0).abs();
            worst = worst.max(gen.max(d3.abs() / 6.0));
        }
    }
    1.5 * worst * h * h
}

fn criterion_1() -> Outcome {
    let m = reference_model();
    let target = [1.050, 1.070];
    let t = Instant::now();
    let fp = fixedpoint::solve(&m, 1e-7);
    let t_fp = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let cf = solve_positive(&m, 1e-12);
    let t_cf = t.elapsed().as_secs_f64();
    let mut out = Outcome::new(true, "");
    let close = |b: &[f64]| (0..2).all(|i| (b[i] - target[i]).abs() <= 2e-3);
    match (&fp, &cf) {
        (Ok(fp), Ok(cf)) => {
            let (bf, bc) = (&fp.barriers.barriers, cf.barriers);
            out.detail(close(bf), format!("fixed point ({:.5}, {:.5})", bf[0], bf[1]));
            out.detail(close(&bc), format!("closed form ({:.5}, {:.5})", bc[0], bc[1]));
            out.summary = format!("b* = ({:.4}, {:.4}) / ({:.4}, {:.4})", bf[0], bf[1], bc[0], bc[1]);
        }
        _ => {
            out.detail(false, format!("solver error: {:?} / {:?}", fp.err(), cf.err()));
        }
    }
    let a: Vec<f64> = (0..2)
        .map(|i| {
            let s = m.state(i);
            single_regime_barrier(s.mu, s.sigma, s.discount).unwrap()
        })
        .collect();
    let a_ok = (a[0] - 1.013).abs() <= 1e-3 && (a[1] - 1.111).abs() <= 1e-3;
    out.detail(a_ok, format!("a* = ({:.4}, {:.4})", a[0], a[1]));
    out.detail(
        t_fp <= 60.0 && t_cf <= 60.0,
        format!("runtime {t_fp:.2} s fixed point, {t_cf:.3} s closed form"),
    );
    out
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let rows = compute_tables(1e-10);
    let cells = compare_with_reference(&rows);
    let secs = t.elapsed().as_secs_f64();
    let good = cells.iter().filter(|c| c.within_tolerance()).count();
    let mut out = Outcome::new(
        good == cells.len(),
        format!("{good} of {} cells within ±0.005", cells.len()),
    );
    for c in cells.iter().filter(|c| !c.within_tolerance()) {
        out.details.push(format!(
            "[fail] {} = {} {}: computed {}, reference {}",
            c.varied,
            c.value,
            c.column,
            c.computed.map_or("none".into(), |v| format!("{v:.4}")),
            c.reference
        ));
    }
    out.detail(secs <= 900.0, format!("runtime {secs:.2} s"));
    out
}

fn criterion_3() -> Outcome {
    let m = worked_example();
    let mut out = Outcome::new(true, "");
    let roots = quartic_roots(&m).unwrap().lambda;
    let shown = [-10.725, -1.536, 0.417];
    let exps_ok = shown
        .iter()
        .all(|e| roots.iter().any(|r| (r - e).abs() <= 5e-3));
    out.detail(
        exps_ok,
        format!("exponents {:.4}, {:.4}, {:.4}, {:.4}", roots[0], roots[1], roots[2], roots[3]),
    );
    match solve_negative(&m, 1e-12) {
        Ok(sol) => {
            let (d0, b) = (sol.liquidation, sol.barriers);
            let ok = (d0 - 0.086).abs() <= 2e-3
                && (b[0] - 1.418).abs() <= 2e-3
                && (b[1] - 1.415).abs() <= 2e-3;
            out.detail(ok, format!("(d0, b0, b1) = ({d0:.4}, {:.4}, {:.4})", b[0], b[1]));
            let shown = [0.266, -1.252, 1.039];
            let coef_ok = (0..3).all(|j| (sol.b[j] * (roots[j] * d0).exp() - shown[j]).abs() <= 1e-2);
            out.detail(coef_ok, format!("coefficients {:?}", sol.b));
            out.summary = format!("(d0, b0, b1) = ({d0:.4}, {:.4}, {:.4})", b[0], b[1]);
        }
        Err(e) => {
            out.detail(false, format!("solve_negative: {e}"));
            out.summary = "no admissible (d0, b0, b1)".into();
            if let Ok(pair) = solve_barrier_pair(&m, 1e-12) {
                out.details.push(format!(
                    "[info] barrier pair without liquidation: ({:.4}, {:.4})",
                    pair.barriers[0], pair.barriers[1]
                ));
            }
        }
    }
    out
}

fn criterion_4() -> Outcome {
    let models = random_positive_models(20);
    let mut out = Outcome::new(true, "");
    let (mut worst_v, mut worst_b): (f64, f64) = (0.0, 0.0);
    let mut failed = 0;
    for (n, m) in models.iter().enumerate() {
        let (closed, fp) = match (solve_positive(m, 1e-12), fixedpoint::solve(m, 1e-7)) {
            (Ok(c), Ok(f)) => (c, f),
            (c, f) => {
                out.detail(false, format!("model {n}: {:?} / {:?}", c.err(), f.err()));
                failed += 1;
                continue;
            }
        };
        let top = closed.barriers[0].max(closed.barriers[1]);
        let grid = fp.value.grid();
        let mut sup: f64 = 0.0;
        for k in (0..grid.len).take_while(|&k| grid.x(k) <= top) {
            for i in 0..2 {
                sup = sup.max((fp.value.eval(grid.x(k), i) - closed.evaluate(grid.x(k), i)).abs());
            }
        }
        let db = (0..2)
            .map(|i| (fp.barriers.barrier(i) - closed.barriers[i]).abs())
            .fold(0.0, f64::max);
        let ok = sup <= 1e-3 && db <= (2.0 * H).max(2e-3);
        if !ok {
            failed += 1;
            out.detail(false, format!("model {n}: value gap {sup:.2e}, barrier gap {db:.2e}"));
        }
        worst_v = worst_v.max(sup);
        worst_b = worst_b.max(db);
    }
    out.pass &= failed == 0;
    out.summary = format!(
        "{} of 20 models agree; worst value gap {worst_v:.2e}, worst barrier gap {worst_b:.2e}",
        20 - failed
    );
    out
}

/// Five probe points spread over [0, max b], alternating regimes.
fn probes(policy: &BarrierPolicy) -> Vec<(f64, usize)> {
    let top = policy.barriers.iter().copied().fold(0.5, f64::max);
    let n = policy.barriers.len();
    [0.1, 0.3, 0.5, 0.75, 1.0]
        .iter()
        .enumerate()
        .map(|(k, f)| (f * top, k % n))
        .collect()
}

fn mc_subject(
    out: &mut Outcome,
    label: &str,
    m: &RegimeModel,
    policy: &BarrierPolicy,
    v: &dyn ValueFunction,
    seed: u64,
) -> (f64, f64) {
    let (mut worst_z, mut worst_se): (f64, f64) = (0.0, 0.0);
    for (k, (x0, i)) in probes(policy).into_iter().enumerate() {
        let cfg = SimConfig::with_paths(1_000_000, seed + k as u64);
        let e = simulate_policy(m, policy, x0, i, &cfg).unwrap();
        let z = (e.mean - v.value(x0, i)) / e.stderr;
        let ok = z.abs() <= 3.0 && e.stderr <= 2e-3;
        out.detail(
            ok,
            format!(
                "{label} x={x0:.4} regime {i}: {:.5} ± {:.1e} vs {:.5} (z = {z:+.2})",
                e.mean,
                e.stderr,
                v.value(x0, i)
            ),
        );
        worst_z = worst_z.max(z.abs());
        worst_se = worst_se.max(e.stderr);
    }
    (worst_z, worst_se)
}

struct Classical;

impl ValueFunction for Classical {
    fn value(&self, x: f64, _: usize) -> f64 {
        single_regime_value(0.06, 0.24, 0.04, x).unwrap()
    }
}

fn criterion_5() -> Outcome {
    let mut out = Outcome::new(true, "");
    let mut worst = (0.0f64, 0.0f64);
    let mut track = |w: (f64, f64)| {
        worst = (worst.0.max(w.0), worst.1.max(w.1));
    };
    let single = RegimeModel::single(0.06, 0.24, 0.04).unwrap();
    let a = single_regime_barrier(0.06, 0.24, 0.04).unwrap();
    track(mc_subject(&mut out, "single", &single, &BarrierPolicy::new(vec![a]), &Classical, 100));

    let m = reference_model();
    let fp = fixedpoint::solve(&m, 1e-7).unwrap();
    track(mc_subject(&mut out, "fixed point", &m, &fp.barriers, &fp.value, 200));
    let cf = solve_positive(&m, 1e-12).unwrap();
    let policy = BarrierPolicy::new(cf.barriers.to_vec());
    track(mc_subject(&mut out, "closed positive", &m, &policy, &cf, 300));

    let mixed = mixed_model();
    let neg = solve_negative(&mixed, 1e-12).unwrap();
    track(mc_subject(&mut out, "closed mixed", &mixed, &neg.policy(), &neg, 400));
    out.summary = format!("20 probes at 1e6 paths; max |z| = {:.2}, max stderr = {:.1e}", worst.0, worst.1);
    out
}

fn contraction_check(out: &mut Outcome, models: &[RegimeModel]) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = Grid::covering(H, 2.0).unwrap();
    let (mut worst_raw, mut ok): (f64, bool) = (0.0, true);
    for m in models {
        let op = Operator::new(m, grid).unwrap();
        let c = m.contraction_factor();
        let lam = (0..2)
            .map(|i| {
                let s = m.state(i);
                let r = characteristic_roots(s.mu, s.sigma, m.theta(i)).unwrap();
                r.lambda_minus.abs().max(r.lambda_plus)
            })
            .fold(0.0, f64::max);
        for _ in 0..5 {
            let (a, w, bar) = (rng.random_range(0.0..1.0), rng.random_range(0.5..8.0), rng.random_range(0.1..2.0));
            let f = GridFunction::from_fn(grid, &[bar; 2], |x, i| x + a * (w * x + i as f64).sin()).unwrap();
            let g = GridFunction::from_fn(grid, &[bar; 2], |x, i| 0.5 * x * x + i as f64 * x).unwrap();
            let b = BarrierPolicy::new(vec![rng.random_range(0.2..1.8), rng.random_range(0.2..1.8)]);
            let ratio = op.apply(&f, &b).unwrap().sup_distance(&op.apply(&g, &b).unwrap()) / f.sup_distance(&g);
            worst_raw = worst_raw.max(ratio / c);
            ok &= ratio <= c * (1.0 + 0.2 * (lam * H).powi(2)) + 1e-12;
        }
    }
    out.detail(
        ok,
        format!("contraction: worst ratio/C = {worst_raw:.6} (quadrature slack 0.2(λh)²)"),
    );
}

/// Largest |v(x+h) − 2v(x) + v(x−h)| / 8: how far the linear interpolant of a
/// concave iterate can sit below it, which bounds the discrete monotonicity defect.
fn interpolation_slack(v: &GridFunction) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..v.regimes() {
        for w in v.samples(i).windows(3) {
            worst = worst.max((w[2] - 2.0 * w[1] + w[0]).abs());
        }
    }
    worst / 8.0 + 1e-12
}

fn sandwich_check(out: &mut Outcome, models: &[RegimeModel]) {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for m in models {
        // Same cap doubling as the solver.
        let mut cap = fixedpoint::initial_cap(m).unwrap();
        let mut it = loop {
            let grid = Grid::covering(2e-3, cap).unwrap();
            let mut probe = SandwichIteration::new(m, grid).unwrap();
            match probe.step() {
                Err(regime_dividends::Error::MaximumAtCap { .. }) if cap < 64.0 => cap *= 2.0,
                _ => break SandwichIteration::new(m, grid).unwrap(),
            }
        };
        for _ in 0..40 {
            let (lo, hi) = (it.lower().clone(), it.upper().clone());
            if it.step().is_err() {
                ok = false;
                break;
            }
            let (sl, su) = (interpolation_slack(&lo), interpolation_slack(&hi));
            for i in 0..2 {
                for ((l0, l1), (u0, u1)) in lo
                    .samples(i)
                    .iter()
                    .zip(it.lower().samples(i))
                    .zip(hi.samples(i).iter().zip(it.upper().samples(i)))
                {
                    ok &= l0 <= &(l1 + sl) && l1 <= &(u1 + 1e-9) && u1 <= &(u0 + su);
                    worst = worst.max((l0 - l1) / sl).max((u1 - u0) / su);
                }
            }
        }
    }
    out.detail(
        ok,
        format!(
            "monotone sandwich over 40 steps on {} models; worst step defect {worst:.3} of the h²|V''|/8 interpolation bound",
            models.len()
        ),
    );
}

fn shape_check(out: &mut Outcome, closed: &[(RegimeModel, PositiveCaseSolution)], fps: &[FixedPointSolution]) {
    let mut ok = true;
    for (_, sol) in closed {
        let top = sol.barriers[0].max(sol.barriers[1]);
        for v in &sol.value {
            for k in 0..=1000 {
                let x = 1.2 * top * k as f64 / 1000.0;
                ok &= v.derivative(x, 1) >= 1.0 - 1e-9 && v.derivative(x, 2) <= 1e-9;
            }
        }
    }
    for fp in fps {
        let v = &fp.value;
        for i in 0..v.regimes() {
            ok &= v.max_second_difference(i).0 <= 1e-8;
            ok &= (0..v.grid().len).all(|k| v.node_derivative(i, k) >= 1.0 - 1e-6);
        }
    }
    out.detail(
        ok,
        format!(
            "concavity and V' >= 1 on {} closed-form and {} fixed-point solutions",
            closed.len(),
            fps.len()
        ),
    );
}

fn worked_example_check(out: &mut Outcome) {
    let m = worked_example();
    match solve_negative(&m, 1e-12) {
        Ok(sol) => {
            let grid = Grid::covering(H, sol.barriers[0].max(sol.barriers[1]) + 0.2).unwrap();
            let v = GridFunction::from_fn(grid, &sol.barriers, |x, i| sol.evaluate(x, i)).unwrap();
            let (d2, x) = v.max_second_difference(0);
            out.detail(d2 / (H * H) > 1e-4, format!("worked example V0'' = {:.3e} at x = {x:.3}", d2 / (H * H)));
            out.detail(sol.liquidation > 0.0, "worked example unit slope on [0, d0] and [b0, inf)");
        }
        Err(e) => {
            let pair = solve_barrier_pair(&m, 1e-12).unwrap();
            let v0 = &pair.value[0];
            let curv = (1..1000)
                .map(|k| v0.derivative(pair.barriers[0] * k as f64 / 1000.0, 2))
                .fold(f64::NEG_INFINITY, f64::max);
            out.details.push(format!(
                "[{}] worked example V0'' reaches {curv:.3e} (barrier-pair fallback)",
                mark(curv > 1e-4)
            ));
            out.detail(false, format!("worked example has no liquidation band: {e}"));
        }
    }
}

fn hjb_check(
    out: &mut Outcome,
    closed: &[(RegimeModel, PositiveCaseSolution)],
    fps: &[FixedPointSolution],
) {
    let mut ok = true;
    let mut worst_raw: f64 = 0.0;
    for ((m, cf), fp) in closed.iter().zip(fps) {
        let r = hjb_residual(&fp.value, m).sup_norm();
        worst_raw = worst_raw.max(r);
        ok &= r <= HJB_TOL + truncation_allowance(m, cf, H);
        let top = cf.barriers[0].max(cf.barriers[1]);
        let grid = Grid::covering(H, top + 0.2).unwrap();
        let g = GridFunction::from_fn(grid, &cf.barriers, |x, i| cf.evaluate(x, i)).unwrap();
        let r = hjb_residual(&g, m).sup_norm();
        worst_raw = worst_raw.max(r);
        ok &= r <= HJB_TOL + truncation_allowance(m, cf, H);
    }
    let mixed = mixed_model();
    let neg = solve_negative(&mixed, 1e-12).unwrap();
    let grid = Grid::covering(H, neg.barriers[0].max(neg.barriers[1]) + 0.2).unwrap();
    let v = GridFunction::from_fn(grid, &neg.barriers, |x, i| neg.evaluate(x, i)).unwrap();
    let r = hjb_residual(&v, &mixed).sup_norm();
    worst_raw = worst_raw.max(r);
    ok &= r <= HJB_TOL;
    out.detail(
        ok,
        format!(
            "HJB residual on {} solutions: worst raw {worst_raw:.2e} (bound 5e-3 + h² truncation)",
            2 * fps.len() + 1
        ),
    );
}

fn interlacing_check(out: &mut Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut good = 0;
    for _ in 0..1000 {
        let mut state = || {
            (
                rng.random_range(-1.0..1.0),
                rng.random_range(0.05..1.0),
                rng.random_range(0.005..0.2),
            )
        };
        let (a, b) = (state(), state());
        let m = two_state(a, b, -rng.random_range(0.001..20.0), -rng.random_range(0.001..20.0));
        if quartic_roots(&m).map(|r| r.interlacing_holds()).unwrap_or(false) {
            good += 1;
        }
    }
    out.detail(good == 1000, format!("quartic roots interlace on {good} of 1000 models"));
}

fn dominance_check(out: &mut Outcome, fp: &FixedPointSolution) {
    let m = reference_model();
    let probes = [(0.3, 0), (0.8, 1), (1.2, 0)];
    let report = dominance_probe(
        &m,
        &fp.value,
        &fp.barriers,
        &PROBE_DELTAS,
        &probes,
        &SimConfig::with_paths(200_000, 31),
    )
    .unwrap();
    let bad = report.entries.iter().filter(|e| !e.dominated).count();
    out.detail(
        bad == 0,
        format!("dominance probes: {bad} of {} exceed V by more than 3 stderr", report.entries.len()),
    );
}

fn criterion_6() -> Outcome {
    let mut out = Outcome::new(true, "");
    let mut models = vec![reference_model()];
    models.extend(random_positive_models(20));
    let closed: Vec<(RegimeModel, PositiveCaseSolution)> = models
        .iter()
        .filter_map(|m| solve_positive(m, 1e-12).ok().map(|s| (m.clone(), s)))
        .collect();
    let fps: Vec<FixedPointSolution> = closed
        .iter()
        .filter_map(|(m, _)| fixedpoint::solve(m, 1e-7).ok())
        .collect();
    out.detail(
        closed.len() == models.len() && fps.len() == models.len(),
        format!("{} closed-form and {} fixed-point solutions of {} models", closed.len(), fps.len(), models.len()),
    );
    contraction_check(&mut out, &models);
    sandwich_check(&mut out, &models[..5]);
    shape_check(&mut out, &closed, &fps);
    worked_example_check(&mut out);
    hjb_check(&mut out, &closed, &fps);
    interlacing_check(&mut out);
    dominance_check(&mut out, &fps[0]);
    let failed = out.details.iter().filter(|d| d.starts_with("[fail]")).count();
    out.summary = format!("{} of {} property checks hold", out.details.len() - failed, out.details.len());
    out
}

fn main() -> ExitCode {
    let criteria: [Criterion; 6] = [
        (1, "base case reproduction", criterion_1),
        (2, "sensitivity tables", criterion_2),
        (3, "mixed-sign worked example", criterion_3),
        (4, "cross-solver oracle", criterion_4),
        (5, "Monte Carlo oracle", criterion_5),
        (6, "property suites", criterion_6),
    ];
    let mut unexpected = Vec::new();
    for (n, name, run) in criteria {
        let t = Instant::now();
        let out = run();
        let known = KNOWN_FAILURES.contains(&n);
        let tag = match (out.pass, known) {
            (true, false) | (false, false) => "",
            (false, true) => " (known failure)",
            (true, true) => " (known failure now passes)",
        };
        println!(
            "{} criterion {n} {name}: {}{tag} [{:.1} s]",
            if out.pass { "PASS" } else { "FAIL" },
            out.summary,
            t.elapsed().as_secs_f64()
        );
        for d in &out.details {
            println!("    {d}");
        }
        if out.pass == known {
            unexpected.push(n);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcome for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
