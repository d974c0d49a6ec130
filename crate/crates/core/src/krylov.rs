//! MINRES and restarted GMRES in a caller-supplied inner product.

use crate::error::{Error, Result};

/// Iteration cap shared by both solvers.
pub const MAX_ITERATIONS: usize = 500;

/// Convergence record of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Relative residual estimate after each iteration.
    pub history: Vec<f64>,
}

impl SolveStats {
    pub fn residual(&self) -> f64 {
        self.history.last().copied().unwrap_or(0.0)
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// MINRES for `A x = b` with `A` self-adjoint in `inner`. Stops when the
/// residual estimate falls below `tol · ‖b‖`.
pub fn minres<A, I>(mut apply: A, inner: I, b: &[f64], tol: f64) -> Result<(Vec<f64>, SolveStats)>
where
    A: FnMut(&[f64]) -> Result<Vec<f64>>,
    I: Fn(&[f64], &[f64]) -> f64,
{
    let len = b.len();
    let mut x = vec![0.0; len];
    let beta1 = inner(b, b).sqrt();
    let mut stats = SolveStats {
        iterations: 0,
        history: Vec::new(),
    };
    if beta1 == 0.0 {
        return Ok((x, stats));
    }
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = b.to_vec();
    let mut w = vec![0.0; len];
    let mut w1 = vec![0.0; len];
    let mut w2 = vec![0.0; len];
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln) = (0.0, 0.0);
    let mut phibar = beta1;
    let (mut cs, mut sn) = (-1.0, 0.0);
    for itn in 1..=MAX_ITERATIONS {
        let v: Vec<f64> = y.iter().map(|t| t / beta).collect();
        y = apply(&v)?;
        if itn >= 2 {
            axpy(&mut y, -beta / oldb, &r1);
        }
        let alfa = inner(&v, &y);
        axpy(&mut y, -alfa / beta, &r2);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        oldb = beta;
        beta = inner(&r2, &r2).max(0.0).sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::MIN_POSITIVE);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for k in 0..len {
            w[k] = (v[k] - oldeps * w1[k] - delta * w2[k]) / gamma;
        }
        axpy(&mut x, phi, &w);
        let rel = phibar / beta1;
        stats.iterations = itn;
        stats.history.push(rel);
        // An exhausted Krylov space (beta = 0) means the solution is exact.
        if rel <= tol || beta == 0.0 {
            return Ok((x, stats));
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        history: stats.history,
    })
}

/// Right-preconditioned restarted GMRES for `A x = b`; `precond` applies an
/// approximate inverse of `A`. The residual is measured in `inner`.
pub fn gmres<A, P, I>(mut apply: A, mut precond: P, inner: I, b: &[f64], tol: f64, restart: usize) -> Result<(Vec<f64>, SolveStats)>
where
    A: FnMut(&[f64]) -> Result<Vec<f64>>,
    P: FnMut(&[f64]) -> Result<Vec<f64>>,
    I: Fn(&[f64], &[f64]) -> f64,
{
    let len = b.len();
    let restart = restart.max(1);
    let mut x = vec![0.0; len];
    let bnorm = inner(b, b).sqrt();
    let mut stats = SolveStats {
        iterations: 0,
        history: Vec::new(),
    };
    if bnorm == 0.0 {
        return Ok((x, stats));
    }
    let mut r = b.to_vec();
    loop {
        let beta = inner(&r, &r).sqrt();
        if beta / bnorm <= tol {
            return Ok((x, stats));
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|t| t / beta).collect()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(restart);
        let mut used = 0;
        for j in 0..restart {
            let z = precond(&basis[j])?;
            let mut w = apply(&z)?;
            zs.push(z);
            for _ in 0..2 {
                for (i, q) in basis.iter().enumerate() {
                    let p = inner(&w, q);
                    h[i][j] += p;
                    axpy(&mut w, -p, q);
                }
            }
            let hn = inner(&w, &w).sqrt();
            h[j + 1][j] = hn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let d = h[j][j].hypot(h[j + 1][j]);
            cs[j] = h[j][j] / d;
            sn[j] = h[j + 1][j] / d;
            h[j][j] = d;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            stats.iterations += 1;
            let rel = g[j + 1].abs() / bnorm;
            stats.history.push(rel);
            if rel <= tol || hn == 0.0 || stats.iterations >= MAX_ITERATIONS {
                break;
            }
            basis.push(w.iter().map(|t| t / hn).collect());
        }
        let mut yk = vec![0.0; used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for k in i + 1..used {
                s -= h[i][k] * yk[k];
            }
            yk[i] = s / h[i][i];
        }
        for (c, z) in yk.iter().zip(&zs) {
            axpy(&mut x, *c, z);
        }
        let ax = apply(&x)?;
        r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let true_rel = inner(&r, &r).sqrt() / bnorm;
        if true_rel <= tol {
            if let Some(last) = stats.history.last_mut() {
                *last = true_rel;
            }
            return Ok((x, stats));
        }
        if stats.iterations >= MAX_ITERATIONS {
            stats.history.push(true_rel);
            return Err(Error::NoConvergence {
                iterations: stats.iterations,
                history: stats.history,
            });
        }
    }
}
