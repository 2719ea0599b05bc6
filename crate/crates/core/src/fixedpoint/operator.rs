use rayon::prelude::*;

use super::grid::{Grid, GridFunction};
use crate::analytics::ScaleFunction;
use crate::error::{Error, Result};
use crate::model::RegimeModel;
use crate::policy::BarrierPolicy;

/// Slack on second differences when testing a payoff for concavity.
pub const CONCAVITY_SLACK: f64 = 1e-8;

/// W^(θ_i) of one regime, written as κ(e^{px} − e^{mx}).
#[derive(Debug, Clone, Copy)]
struct Kernel {
    w: ScaleFunction,
    p: f64,
    m: f64,
    kappa: f64,
    w0_slope: f64,
    theta: f64,
}

impl Kernel {
    fn new(mu: f64, sigma: f64, theta: f64) -> Result<Self> {
        let w = ScaleFunction::new(mu, sigma, theta)?;
        let (m, p) = (w.roots.lambda_minus, w.roots.lambda_plus);
        let w0_slope = 2.0 / (sigma * sigma);
        Ok(Self {
            w,
            p,
            m,
            kappa: w0_slope / (p - m),
            w0_slope,
            theta,
        })
    }
}

/// Weights (w_a, w_b) with ∫_0^δ e^{λ(δ−t)} g(t) dt = δ(w_a g(0) + w_b g(δ))
/// for linear g.
pub(crate) fn exp_weights(lam: f64, delta: f64) -> (f64, f64) {
    let z = lam * delta;
    if z.abs() < 1e-3 {
        let wa = 0.5 + z / 3.0 + z * z / 8.0 + z.powi(3) / 30.0 + z.powi(4) / 144.0;
        let wb = 0.5 + z / 6.0 + z * z / 24.0 + z.powi(3) / 120.0 + z.powi(4) / 720.0;
        (wa, wb)
    } else {
        let em1 = z.exp_m1();
        ((z * em1 - em1 + z) / (z * z), (em1 - z) / (z * z))
    }
}

/// ∫_start^x e^{λ(x−s)} g(s) ds for g linear between grid nodes, integrated
/// exactly cell by cell and accumulated recursively in O(n).
#[derive(Debug, Clone)]
pub(crate) struct ExpIntegral {
    lam: f64,
    start: f64,
    g_start: f64,
    first: usize,
    nodes: Vec<f64>,
}

impl ExpIntegral {
    pub(crate) fn new(lam: f64, grid: Grid, g: &[f64], start: f64, g_start: f64) -> Self {
        let h = grid.step;
        let n = grid.len;
        let mut first = (start / h).ceil() as usize;
        if first < n && grid.x(first) < start {
            first += 1;
        }
        let mut nodes = vec![0.0; n];
        if first < n {
            let delta = grid.x(first) - start;
            let (wa, wb) = exp_weights(lam, delta);
            nodes[first] = delta * (wa * g_start + wb * g[first]);
            let e = (lam * h).exp();
            let (wa, wb) = exp_weights(lam, h);
            for k in first + 1..n {
                nodes[k] = e * nodes[k - 1] + h * (wa * g[k - 1] + wb * g[k]);
            }
        }
        Self {
            lam,
            start,
            g_start,
            first,
            nodes,
        }
    }

    pub(crate) fn node(&self, k: usize) -> f64 {
        self.nodes[k]
    }

    /// Value at an arbitrary x, given g(x) and the node samples of g.
    pub(crate) fn at(&self, x: f64, g_x: f64, grid: Grid, g: &[f64]) -> f64 {
        if x <= self.start {
            return 0.0;
        }
        if self.first >= grid.len || x < grid.x(self.first) {
            let delta = x - self.start;
            let (wa, wb) = exp_weights(self.lam, delta);
            return delta * (wa * self.g_start + wb * g_x);
        }
        let k = ((x / grid.step).floor() as usize).clamp(self.first, grid.len - 1);
        let delta = x - grid.x(k);
        let (wa, wb) = exp_weights(self.lam, delta);
        (self.lam * delta).exp() * self.nodes[k] + delta * (wa * g[k] + wb * g_x)
    }
}

/// The convolutions of one regime's coupling source with W, W′ and W″.
struct Convolution<'a> {
    kernel: &'a Kernel,
    grid: Grid,
    g: &'a [f64],
    plus: ExpIntegral,
    minus: ExpIntegral,
}

impl<'a> Convolution<'a> {
    fn new(kernel: &'a Kernel, grid: Grid, g: &'a [f64], start: f64, g_start: f64) -> Self {
        Self {
            kernel,
            grid,
            g,
            plus: ExpIntegral::new(kernel.p, grid, g, start, g_start),
            minus: ExpIntegral::new(kernel.m, grid, g, start, g_start),
        }
    }

    fn parts(&self, x: f64, g_x: f64) -> (f64, f64) {
        (
            self.plus.at(x, g_x, self.grid, self.g),
            self.minus.at(x, g_x, self.grid, self.g),
        )
    }

    /// (∫W(x−s)g, ∫W′(x−s)g, d²/dx² ∫W(x−s)g).
    fn derivatives(&self, pp: f64, mm: f64, g_x: f64) -> [f64; 3] {
        let k = self.kernel;
        [
            k.kappa * (pp - mm),
            k.kappa * (k.p * pp - k.m * mm),
            k.w0_slope * g_x + k.kappa * (k.p * k.p * pp - k.m * k.m * mm),
        ]
    }

    fn at_node(&self, k: usize) -> [f64; 3] {
        self.derivatives(self.plus.node(k), self.minus.node(k), self.g[k])
    }

    /// (A(b), T″_b(b)) for barrier b with the source started at 0. The
    /// leading e^{pb} terms of A·W″ and ∫W″g cancel analytically, so T″ is
    /// formed from O(1) quantities only.
    fn barrier_terms(&self, b: f64, g_b: f64, pp: f64, mm: f64) -> (f64, f64) {
        let k = self.kernel;
        let (p, m, w0) = (k.p, k.m, k.w0_slope);
        let r = ((m - p) * b).exp();
        let d = p - m * r;
        let a = (1.0 + k.kappa * (p * pp - m * mm)) * (-p * b).exp() / (k.kappa * d);
        let t2 = (p * p - m * m * r - w0 * d * g_b + w0 * p * m * (r * pp - mm)) / d;
        (a, t2)
    }

    fn barrier_at(&self, b: f64, g_b: f64) -> (f64, f64) {
        let (pp, mm) = self.parts(b, g_b);
        self.barrier_terms(b, g_b, pp, mm)
    }

    fn barrier_at_node(&self, k: usize) -> (f64, f64) {
        self.barrier_terms(self.grid.x(k), self.g[k], self.plus.node(k), self.minus.node(k))
    }
}

/// T_b and the barrier functional A_i^v for a fixed model and grid.
pub struct Operator<'m> {
    model: &'m RegimeModel,
    grid: Grid,
    kernels: Vec<Kernel>,
}

impl<'m> Operator<'m> {
    pub fn new(model: &'m RegimeModel, grid: Grid) -> Result<Self> {
        let kernels = model
            .states()
            .iter()
            .enumerate()
            .map(|(i, s)| Kernel::new(s.mu, s.sigma, model.theta(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model,
            grid,
            kernels,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn model(&self) -> &RegimeModel {
        self.model
    }

    fn check_input(&self, f: &GridFunction) -> Result<()> {
        if f.grid() != self.grid || f.regimes() != self.model.len() {
            return Err(Error::DimensionMismatch {
                what: "grid function",
                expected: self.grid.len,
                found: f.grid().len,
            });
        }
        Ok(())
    }

    /// Σ_{j≠i} q_ij f_j at grid nodes.
    fn source_nodes(&self, f: &GridFunction, i: usize) -> Vec<f64> {
        let mut g = vec![0.0; self.grid.len];
        for j in (0..self.model.len()).filter(|&j| j != i) {
            let q = self.model.rate(i, j);
            if q == 0.0 {
                continue;
            }
            for (gk, fk) in g.iter_mut().zip(f.samples(j)) {
                *gk += q * fk;
            }
        }
        g
    }

    fn source_at(&self, f: &GridFunction, i: usize, x: f64) -> f64 {
        (0..self.model.len())
            .filter(|&j| j != i)
            .map(|j| self.model.rate(i, j) * f.eval(x, j))
            .sum()
    }

    /// Applies T_{d,b}: value of following (d, b) until the first regime
    /// switch and collecting f afterwards. With d ≡ 0 this is T_b.
    pub fn apply(&self, f: &GridFunction, policy: &BarrierPolicy) -> Result<GridFunction> {
        self.check_input(f)?;
        policy.check_for(self.model.len())?;
        let cap = self.grid.cap();
        for (i, &b) in policy.barriers.iter().enumerate() {
            if !(b > 0.0) || b > cap + 1e-12 {
                return Err(Error::BarrierOutOfRange {
                    regime: i,
                    barrier: b,
                    cap,
                });
            }
        }
        let regimes: Vec<(Vec<f64>, f64)> = (0..self.model.len())
            .into_par_iter()
            .map(|i| self.apply_regime(f, i, policy.barrier(i), policy.liquidation_level(i)))
            .collect();
        let (samples, values): (Vec<_>, Vec<_>) = regimes.into_iter().unzip();
        GridFunction::from_parts(self.grid, samples, policy.barriers.clone(), values)
    }

    // On [d, b] the value is d·Z(y) + a·W(y) − ∫W(y−s)g, y = x − d. The
    // e^{py} parts of the three terms cancel to leading order, so they are
    // combined analytically and the remainder uses the backward integral
    // ∫_x^b e^{−p(s−x)}g, which stays O(1).
    fn apply_regime(&self, f: &GridFunction, i: usize, b: f64, d: f64) -> (Vec<f64>, f64) {
        let k = &self.kernels[i];
        let (p, m, kappa, theta) = (k.p, k.m, k.kappa, k.theta);
        let grid = self.grid;
        let g = self.source_nodes(f, i);
        let conv = Convolution::new(k, grid, &g, d, self.source_at(f, i, d));
        let gb = self.source_at(f, i, b);
        let (pb, mb) = conv.parts(b, gb);
        let yb = b - d;
        let r = ((m - p) * yb).exp();
        let dd = p - m * r;
        let lead = (1.0 + kappa * m * (r * pb - mb) + d * theta * k.w0_slope * (m * yb).exp() / p) / dd;
        let a = ((-p * yb).exp() * (1.0 + kappa * (p * pb - m * mb)) - d * theta * kappa * (1.0 - r))
            / (kappa * dd);
        let tail = |y: f64, q: f64, mm: f64| -> f64 {
            let em = (m * y).exp();
            (-p * (yb - y)).exp() * lead + kappa * q - d * theta * kappa * em / m - a * kappa * em
                + kappa * mm
        };
        let vb = tail(yb, 0.0, mb);
        // Backward integral at nodes in [d, b], same interpolant as forward.
        let mut q = vec![0.0; grid.len];
        let first = (0..grid.len).find(|&n| grid.x(n) >= d).unwrap_or(grid.len);
        let kb = ((b / grid.step).floor() as usize).min(grid.len - 1);
        if first <= kb && grid.x(kb) <= b {
            let delta = b - grid.x(kb);
            let (wa, wb) = exp_weights(-p, delta);
            q[kb] = delta * (wa * gb + wb * g[kb]);
            let e = (-p * grid.step).exp();
            let (wa, wb) = exp_weights(-p, grid.step);
            for n in (first..kb).rev() {
                q[n] = e * q[n + 1] + grid.step * (wa * g[n + 1] + wb * g[n]);
            }
        }
        let samples = (0..grid.len)
            .map(|n| {
                let x = grid.x(n);
                if x < d {
                    x
                } else if x == d {
                    d
                } else if x <= b {
                    tail(x - d, q[n], conv.minus.node(n))
                } else {
                    vb + x - b
                }
            })
            .collect();
        (samples, vb)
    }

    /// A_i^v(x) at every grid node.
    pub fn payoff_functional(&self, v: &GridFunction, i: usize) -> Result<Vec<f64>> {
        self.check_input(v)?;
        let k = &self.kernels[i];
        let g = self.source_nodes(v, i);
        let conv = Convolution::new(k, self.grid, &g, 0.0, 0.0);
        Ok((0..self.grid.len)
            .map(|n| (1.0 + conv.at_node(n)[1]) / k.w.derivative(self.grid.x(n)))
            .collect())
    }

    /// b^v: maximiser of A_i^v per regime (smallest on ties).
    pub fn best_barrier(&self, v: &GridFunction) -> Result<BarrierPolicy> {
        self.check_input(v)?;
        for i in 0..v.regimes() {
            let (d2, x) = v.max_second_difference(i);
            if d2 > CONCAVITY_SLACK {
                return Err(Error::NotConcavePayoff {
                    regime: i,
                    x,
                    second_difference: d2,
                });
            }
        }
        let barriers = (0..self.model.len())
            .into_par_iter()
            .map(|i| self.best_barrier_regime(v, i))
            .collect::<Result<Vec<f64>>>()?;
        Ok(BarrierPolicy::new(barriers))
    }

    fn best_barrier_regime(&self, v: &GridFunction, i: usize) -> Result<f64> {
        let k = &self.kernels[i];
        let g = self.source_nodes(v, i);
        let conv = Convolution::new(k, self.grid, &g, 0.0, 0.0);
        let n = self.grid.len;
        let functional = |b: f64| conv.barrier_at(b, self.source_at(v, i, b));
        // A′ = −T″/W′, so local maxima of A sit where T″ turns from − to +.
        let nodes: Vec<(f64, f64)> = (0..n).map(|idx| conv.barrier_at_node(idx)).collect();
        let mut best: Option<(f64, f64)> = None;
        let mut consider = |b: f64, a: f64| {
            // A is very flat when W′ is steep; keep the smallest on near-ties.
            if best.is_none_or(|(_, ab)| a > ab + 1e-12 * ab.abs()) {
                best = Some((b, a));
            }
        };
        if nodes[0].1 >= 0.0 || nodes[1].1 >= 0.0 {
            let hi = self.grid.x(1);
            let b = golden_max(|b| functional(b).0, 0.0, hi, self.grid.step / 100.0).max(hi / 100.0);
            consider(b, functional(b).0);
        }
        for idx in 2..n {
            if nodes[idx - 1].1 < 0.0 && nodes[idx].1 >= 0.0 {
                let (lo, hi) = (self.grid.x(idx - 1), self.grid.x(idx));
                let b = crate::numeric::bisect(|b| functional(b).1, lo, hi, 1e-14 * hi.max(1.0))?;
                consider(b, functional(b).0);
            }
        }
        match best {
            Some((b, _)) if nodes[n - 1].1 >= 0.0 => Ok(b),
            _ => Err(Error::MaximumAtCap {
                regime: i,
                cap: self.grid.cap(),
            }),
        }
    }

    /// T″_{b}(v)(b_i) for the given barriers: the smooth-fit defect.
    pub fn smooth_fit_defect(&self, v: &GridFunction, policy: &BarrierPolicy) -> Result<Vec<f64>> {
        self.check_input(v)?;
        Ok((0..self.model.len())
            .map(|i| {
                let k = &self.kernels[i];
                let g = self.source_nodes(v, i);
                let conv = Convolution::new(k, self.grid, &g, 0.0, 0.0);
                let b = policy.barrier(i);
                conv.barrier_at(b, self.source_at(v, i, b)).1
            })
            .collect())
    }
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Direct O(n²) evaluation of ∫₀^{x_k} W(x_k − s) ĝ(s) ds at every node,
/// with ĝ the piecewise-linear interpolant of g and 5-point Gauss-Legendre
/// on each cell; slow reference for the recursive scheme.
pub fn direct_convolution(w: &ScaleFunction, grid: Grid, g: &[f64]) -> Vec<f64> {
    const NODES: [(f64, f64); 5] = [
        (0.0, 0.568_888_888_888_888_9),
        (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (0.906_179_845_938_664, 0.236_926_885_056_189_1),
        (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    ];
    let h = grid.step;
    (0..grid.len)
        .map(|k| {
            let xk = grid.x(k);
            let mut s = 0.0;
            for j in 0..k {
                for (t, wt) in NODES {
                    let u = 0.5 * (t + 1.0);
                    let gs = (1.0 - u) * g[j] + u * g[j + 1];
                    s += 0.5 * wt * w.value(xk - grid.x(j) - u * h) * gs;
                }
            }
            s * h
        })
        .collect()
}

/// The recursive counterpart of [`direct_convolution`].
pub fn recursive_convolution(w: &ScaleFunction, grid: Grid, g: &[f64]) -> Vec<f64> {
    let (m, p) = (w.roots.lambda_minus, w.roots.lambda_plus);
    let kappa = 2.0 / (w.sigma * w.sigma) / (p - m);
    let plus = ExpIntegral::new(p, grid, g, 0.0, g[0]);
    let minus = ExpIntegral::new(m, grid, g, 0.0, g[0]);
    (0..grid.len)
        .map(|k| kappa * (plus.node(k) - minus.node(k)))
        .collect()
}
