//! Small dense solvers shared by the closed-form machinery.

use crate::error::{Error, Result};

/// Relative pivot threshold below which a system is declared singular.
pub const PIVOT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy)]
pub struct LinearSolution<const N: usize> {
    pub x: [f64; N],
    /// ‖A‖∞ / min |pivot|, a cheap conditioning indicator.
    pub condition_estimate: f64,
}

/// Gaussian elimination with partial pivoting.
pub fn solve_linear<const N: usize>(
    mut a: [[f64; N]; N],
    mut b: [f64; N],
) -> Result<LinearSolution<N>> {
    let norm = a
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if !norm.is_finite() || norm == 0.0 {
        return Err(Error::SingularLinearSystem { pivot: 0.0 });
    }
    let mut min_pivot = f64::INFINITY;
    for k in 0..N {
        let p = (k..N)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        let pivot = a[p][k];
        if pivot.abs() < PIVOT_TOL * norm {
            return Err(Error::SingularLinearSystem { pivot });
        }
        min_pivot = min_pivot.min(pivot.abs());
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..N {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for j in k..N {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = [0.0; N];
    for k in (0..N).rev() {
        let s: f64 = (k + 1..N).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Ok(LinearSolution {
        x,
        condition_estimate: norm / min_pivot,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-10,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOutcome<const N: usize> {
    pub x: [f64; N],
    pub residual: [f64; N],
    pub iterations: usize,
}

fn inf_norm<const N: usize>(v: &[f64; N]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn two_norm<const N: usize>(v: &[f64; N]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Newton iteration with a forward-difference Jacobian and
/// backtracking by halving on the residual 2-norm. `f` may return an error
/// for iterates outside its domain; such trial points are treated as
/// infinitely bad during the line search.
pub fn damped_newton<const N: usize, F>(
    f: F,
    x0: [f64; N],
    opts: &NewtonOptions,
) -> Result<NewtonOutcome<N>>
where
    F: Fn(&[f64; N]) -> Result<[f64; N]>,
{
    let mut x = x0;
    let mut fx = f(&x)?;
    for it in 0..opts.max_iter {
        if inf_norm(&fx) <= opts.tol {
            return Ok(NewtonOutcome {
                x,
                residual: fx,
                iterations: it,
            });
        }
        let mut jac = [[0.0; N]; N];
        for k in 0..N {
            let h = opts.fd_step * x[k].abs().max(1.0);
            let mut xh = x;
            xh[k] += h;
            let fh = f(&xh)?;
            for i in 0..N {
                jac[i][k] = (fh[i] - fx[i]) / h;
            }
        }
        let mut rhs = fx;
        rhs.iter_mut().for_each(|v| *v = -*v);
        let step = solve_linear(jac, rhs)?.x;

        let base = two_norm(&fx);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial = x;
            for k in 0..N {
                trial[k] += t * step[k];
            }
            if let Ok(ft) = f(&trial) {
                if ft.iter().all(|v| v.is_finite()) && two_norm(&ft) < base {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((xn, fxn)) => {
                x = xn;
                fx = fxn;
            }
            None => {
                return Err(Error::NoConvergence {
                    what: "damped Newton line search",
                    iterations: it,
                    residual: inf_norm(&fx),
                })
            }
        }
    }
    if inf_norm(&fx) <= opts.tol {
        return Ok(NewtonOutcome {
            x,
            residual: fx,
            iterations: opts.max_iter,
        });
    }
    Err(Error::NoConvergence {
        what: "damped Newton",
        iterations: opts.max_iter,
        residual: inf_norm(&fx),
    })
}

/// Bisection for a sign change of `f` on [lo, hi].
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return Err(Error::RootIsolationFailure(format!(
            "no sign change on [{lo}, {hi}]"
        )));
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol || mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_permuted_system() {
        let a = [[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]];
        let sol = solve_linear(a, [5.0, 3.0, 6.0]).unwrap();
        let x = sol.x;
        for (row, rhs) in a.iter().zip([5.0, 3.0, 6.0]) {
            let lhs: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_is_rejected() {
        let a = [[1.0, 2.0], [2.0, 4.0]];
        assert!(matches!(
            solve_linear(a, [1.0, 2.0]),
            Err(Error::SingularLinearSystem { .. })
        ));
    }

    #[test]
    fn newton_finds_circle_line_intersection() {
        let f = |x: &[f64; 2]| Ok([x[0] * x[0] + x[1] * x[1] - 4.0, x[0] - x[1]]);
        let out = damped_newton(f, [3.0, 0.5], &NewtonOptions::default()).unwrap();
        assert!((out.x[0] - 2f64.sqrt()).abs() < 1e-9);
        assert!((out.x[1] - 2f64.sqrt()).abs() < 1e-9);
    }
}
