use regime_dividends::analytics::{single_regime_barrier, single_regime_value, SingleRegimeSolution};
use regime_dividends::model::{reference_model, RegimeModel, RegimeParams};
use regime_dividends::montecarlo::{
    dominance_probe, dump_paths, simulate_barrier, simulate_liquidation_dividend, simulate_policy,
    Scheme, SimConfig, PROBE_DELTAS,
};
use regime_dividends::two_regime::solve_negative;
use regime_dividends::{BarrierPolicy, ValueFunction};

fn single() -> RegimeModel {
    RegimeModel::single(0.06, 0.24, 0.04).unwrap()
}

fn mixed() -> RegimeModel {
    RegimeModel::two_state(
        RegimeParams::new(-0.2, 0.4, 0.06),
        RegimeParams::new(0.14, 0.5, 0.08),
        1.0,
        0.001,
    )
    .unwrap()
}

struct Classical(SingleRegimeSolution);

impl ValueFunction for Classical {
    fn value(&self, x: f64, _: usize) -> f64 {
        self.0.value(x)
    }
}

#[test]
fn estimates_are_reproducible_across_thread_counts() {
    let m = reference_model();
    let b = BarrierPolicy::new(vec![1.05, 1.07]);
    let cfg = SimConfig::with_paths(6000, 42);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_barrier(&m, &b, 0.5, 1, &cfg).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(1));
    let other = simulate_barrier(&m, &b, 0.5, 1, &SimConfig::with_paths(6000, 43)).unwrap();
    assert_ne!(one.mean, other.mean);
}

#[test]
fn boundary_starts_are_exact() {
    let m = reference_model();
    let cfg = SimConfig::with_paths(200, 3);
    let b = BarrierPolicy::new(vec![1.05, 1.07]);
    for i in 0..2 {
        assert_eq!(simulate_barrier(&m, &b, 0.0, i, &cfg).unwrap().mean, 0.0);
        let zero = BarrierPolicy::new(vec![0.0, 0.0]);
        assert_eq!(simulate_barrier(&m, &zero, 0.8, i, &cfg).unwrap().mean, 0.8);
    }
}

#[test]
fn zero_liquidation_level_is_the_barrier_strategy() {
    let m = reference_model();
    let cfg = SimConfig::with_paths(4000, 11);
    let a = simulate_barrier(&m, &BarrierPolicy::new(vec![1.0, 1.1]), 0.6, 0, &cfg).unwrap();
    let b = simulate_liquidation_dividend(&m, &[0.0, 0.0], &[1.0, 1.1], 0.6, 0, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn value_increases_with_initial_reserve() {
    let m = reference_model();
    let b = BarrierPolicy::new(vec![1.05, 1.07]);
    let cfg = SimConfig::with_paths(20_000, 5);
    let mut last = 0.0;
    for x0 in [0.2, 0.5, 0.8, 1.2] {
        let e = simulate_barrier(&m, &b, x0, 0, &cfg).unwrap();
        assert!(e.mean > last, "x0={x0}: {} after {last}", e.mean);
        last = e.mean;
    }
}

#[test]
fn single_regime_matches_classical_value() {
    let m = single();
    let a = single_regime_barrier(0.06, 0.24, 0.04).unwrap();
    let cfg = SimConfig::with_paths(100_000, 9);
    for x0 in [0.3, 1.0, a + 0.5] {
        let e = simulate_barrier(&m, &BarrierPolicy::new(vec![a]), x0, 0, &cfg).unwrap();
        let exact = single_regime_value(0.06, 0.24, 0.04, x0).unwrap();
        assert!(e.covers(exact, 4.0), "x0={x0}: {} ± {} vs {exact}", e.mean, e.stderr);
        assert!(e.horizon_mass < 1e-6, "{}", e.horizon_mass);
    }
}

#[test]
fn euler_bias_shrinks_with_the_step() {
    let m = single();
    let a = single_regime_barrier(0.06, 0.24, 0.04).unwrap();
    let exact = single_regime_value(0.06, 0.24, 0.04, 0.5).unwrap();
    let bias = |dt: f64| {
        let cfg = SimConfig {
            dt,
            scheme: Scheme::Euler,
            ..SimConfig::with_paths(20_000, 17)
        };
        let e = simulate_barrier(&m, &BarrierPolicy::new(vec![a]), 0.5, 0, &cfg).unwrap();
        (e.mean - exact, e.stderr)
    };
    let (coarse, s1) = bias(0.04);
    let (fine, s2) = bias(0.0025);
    assert!(coarse.abs() > fine.abs() + 2.0 * (s1 * s1 + s2 * s2).sqrt(), "{coarse} vs {fine}");
    // Grid-time boundary checks leave an O(√dt) residual bias.
    assert!(fine.abs() < 3.0 * s2 + 0.6 * 0.24 * 0.0025f64.sqrt(), "{fine} ± {s2}");
}

#[test]
fn start_below_liquidation_level_pays_out_at_once() {
    let m = mixed();
    let sol = solve_negative(&m, 1e-10).unwrap();
    let policy = sol.policy();
    let d0 = policy.liquidation_level(0);
    assert!(d0 > 0.05);
    let e = simulate_policy(&m, &policy, 0.05, 0, &SimConfig::with_paths(500, 1)).unwrap();
    assert_eq!(e.mean, 0.05);
    assert_eq!(e.stderr, 0.0);
}

#[test]
fn mixed_case_value_is_reproduced() {
    let m = mixed();
    let sol = solve_negative(&m, 1e-10).unwrap();
    let policy = sol.policy();
    let cfg = SimConfig::with_paths(100_000, 21);
    for (x0, i) in [(0.5, 0), (1.0, 1)] {
        let e = simulate_policy(&m, &policy, x0, i, &cfg).unwrap();
        let v = sol.evaluate(x0, i);
        assert!(e.covers(v, 4.0), "({x0}, {i}): {} ± {} vs {v}", e.mean, e.stderr);
    }
}

#[test]
fn perturbed_barriers_do_not_beat_the_optimum() {
    let m = single();
    let sol = SingleRegimeSolution::new(0.06, 0.24, 0.04).unwrap();
    let optimal = BarrierPolicy::new(vec![sol.barrier]);
    let probes = [(0.4, 0), (1.2, 0)];
    let report = dominance_probe(
        &m,
        &Classical(sol),
        &optimal,
        &PROBE_DELTAS,
        &probes,
        &SimConfig::with_paths(20_000, 8),
    )
    .unwrap();
    assert_eq!(report.entries.len(), (1 + 2 * PROBE_DELTAS.len()) * probes.len());
    assert!(report.all_dominated(), "{:?}", report.entries.iter().filter(|e| !e.dominated).collect::<Vec<_>>());
}

#[test]
fn path_dump_is_consistent() {
    let m = reference_model();
    let b = BarrierPolicy::new(vec![1.05, 1.07]);
    let pts = dump_paths(&m, &b, 0.5, 0, &SimConfig::with_paths(10, 2), 3).unwrap();
    assert!(pts.iter().any(|p| p.path == 2));
    for w in pts.windows(2).filter(|w| w[0].path == w[1].path) {
        assert!(w[1].t >= w[0].t);
        assert!(w[1].cum_dividend >= w[0].cum_dividend);
        assert!(w[1].discount <= w[0].discount + 1e-15);
    }
    for p in &pts {
        assert!(p.reserve >= 0.0 && p.reserve <= 1.07 + 1e-12);
    }
    let mut csv = Vec::new();
    regime_dividends::montecarlo::write_paths_csv(&pts, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("path,t,regime,reserve,cum_dividend,discount\n"));
    assert_eq!(text.lines().count(), pts.len() + 1);
}
