//! Weighted norms `‖·‖_{2,ϑ}`, `‖·‖_{σ,ϑ}`, `‖·‖_{∞,m}` and the energy functional.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::grid::{norm_sq, VelocityGrid};
use crate::kernel::KernelTables;

/// `(1+|v|)^θ` at every node.
pub fn velocity_weight(grid: &VelocityGrid, theta: f64) -> Vec<f64> {
    grid.nodes().map(|v| (1.0 + norm_sq(v).sqrt()).powf(theta)).collect()
}

/// Sum in a fixed order with Neumaier compensation.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Squared `‖f‖_{2,θ}` on one velocity grid.
pub fn weighted_l2_sq(grid: &VelocityGrid, f: &[f64], theta: f64) -> Result<f64> {
    check_len(grid.len(), f.len())?;
    Ok(compensated_sum(
        grid.nodes()
            .zip(f)
            .zip(grid.weights())
            .map(|((v, x), w)| w * (1.0 + norm_sq(v).sqrt()).powf(2.0 * theta) * x * x),
    ))
}

/// `‖f‖_{2,θ} = (∫ (1+|v|)^{2θ} f² dv)^{1/2}`.
pub fn weighted_l2(grid: &VelocityGrid, f: &[f64], theta: f64) -> Result<f64> {
    Ok(weighted_l2_sq(grid, f, theta)?.sqrt())
}

/// Fourth-order centered difference weights at offsets 1 and 2.
const D4: [f64; 2] = [8.0 / 12.0, -1.0 / 12.0];

/// Gradient of `f` through the product rule `∂f = √μ ∂(f/√μ) - (v/2) f`, with
/// the fourth-order centered difference applied to `f/√μ` (zero outside the
/// cube). For `f = p√μ` with `p` a polynomial of degree ≤ 4 this is exact;
/// differencing `f` itself underestimates `∂√μ` by several percent at the
/// spacings used in practice (`h ≈ 1`).
pub fn gradient4(grid: &VelocityGrid, f: &[f64]) -> [Vec<f64>; 3] {
    let n = grid.n_per_axis() as i64;
    let h = grid.spacing();
    let mut out = [vec![0.0; grid.len()], vec![0.0; grid.len()], vec![0.0; grid.len()]];
    for idx in 0..grid.len() {
        let mi = grid.multi_index(idx);
        let v = grid.node(idx);
        for a in 0..3 {
            let st = grid.stride(a) as i64;
            let i = mi[a] as i64;
            // f(v + k h e_a) √μ(v)/√μ(v + k h e_a) = √μ(v) q(v + k h e_a).
            let at = |k: i64| {
                if (0..n).contains(&(i + k)) {
                    let kh = k as f64 * h;
                    f[(idx as i64 + k * st) as usize] * ((2.0 * kh * v[a] + kh * kh) / 4.0).exp()
                } else {
                    0.0
                }
            };
            out[a][idx] = (D4[0] * (at(1) - at(-1)) + D4[1] * (at(2) - at(-2))) / h - 0.5 * v[a] * f[idx];
        }
    }
    out
}

/// Squared `‖f‖_{σ,θ}`: quadrature of `(1+|v|)^{2θ}[σ^{ij}∂_if∂_jf + σ^{ij}v_iv_jf²]`
/// with [`gradient4`] derivatives.
pub fn sigma_norm_sq(tables: &KernelTables, f: &[f64], theta: f64) -> Result<f64> {
    let grid = tables.grid();
    check_len(grid.len(), f.len())?;
    let grad = gradient4(grid, f);
    let terms = (0..grid.len()).map(|idx| {
        let v = grid.node(idx);
        let s = &tables.sigma[idx];
        let mut quad = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                quad += s[i][j] * grad[i][idx] * grad[j][idx];
            }
        }
        quad += tables.sigma_vv(idx) * f[idx] * f[idx];
        grid.weight(idx) * (1.0 + norm_sq(v).sqrt()).powf(2.0 * theta) * quad
    });
    Ok(compensated_sum(terms))
}

pub fn sigma_norm(tables: &KernelTables, f: &[f64], theta: f64) -> Result<f64> {
    Ok(sigma_norm_sq(tables, f, theta)?.sqrt())
}

/// Second route to `‖f‖²_{σ,θ}`: the bilinear form `(∇ᵀ(W σ∇f), f) + (W σvv f, f)`
/// with the divergence adjoint to [`gradient4`]. Differs from [`sigma_norm_sq`]
/// only through the halved trapezoid weights on the cube faces.
pub fn sigma_norm_sq_bilinear(tables: &KernelTables, f: &[f64], theta: f64) -> Result<f64> {
    let grid = tables.grid();
    check_len(grid.len(), f.len())?;
    let n = grid.n_per_axis();
    let h = grid.spacing();
    let weight = velocity_weight(grid, 2.0 * theta);
    let grad = gradient4(grid, f);
    let flux: Vec<[f64; 3]> = (0..grid.len())
        .map(|idx| {
            let s = &tables.sigma[idx];
            let mut out = [0.0; 3];
            for i in 0..3 {
                for j in 0..3 {
                    out[i] += weight[idx] * s[i][j] * grad[j][idx];
                }
            }
            out
        })
        .collect();
    let n = n as i64;
    let coeff = |k: i64| match k {
        1 => D4[0],
        -1 => -D4[0],
        2 => D4[1],
        _ => -D4[1],
    };
    let terms = (0..grid.len()).map(|idx| {
        let mi = grid.multi_index(idx);
        let v = grid.node(idx);
        let mut div = 0.0;
        for a in 0..3 {
            let st = grid.stride(a) as i64;
            let i = mi[a] as i64;
            // Transpose of the product-rule gradient: row `idx - k e_a` holds
            // the factor exp((2kh v_a + k²h²)/4) evaluated at that row.
            for k in [-2i64, -1, 1, 2] {
                if !(0..n).contains(&(i - k)) {
                    continue;
                }
                let kh = k as f64 * h;
                let va = v[a] - kh;
                let row = (idx as i64 - k * st) as usize;
                div += coeff(k) * ((2.0 * kh * va + kh * kh) / 4.0).exp() * flux[row][a] / h;
            }
            div -= 0.5 * v[a] * flux[idx][a];
        }
        grid.weight(idx) * (div * f[idx] + weight[idx] * tables.sigma_vv(idx) * f[idx] * f[idx])
    });
    Ok(compensated_sum(terms))
}

/// `‖g‖_{∞,m} = max (1+|v|)^m |g|`.
pub fn weighted_sup(grid: &VelocityGrid, g: &[f64], m: f64) -> Result<f64> {
    check_len(grid.len(), g.len())?;
    Ok(grid
        .nodes()
        .zip(g)
        .map(|(v, x)| (1.0 + norm_sq(v).sqrt()).powf(m) * x.abs())
        .fold(0.0, f64::max))
}

/// Norms of one velocity field at a fixed weight exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormReport {
    pub theta: f64,
    pub l2_weighted: f64,
    pub sigma_weighted: f64,
    pub sup_weighted: Option<f64>,
}

pub fn norm_report(tables: &KernelTables, f: &[f64], theta: f64, sup_exponent: Option<f64>) -> Result<NormReport> {
    let grid = tables.grid();
    Ok(NormReport {
        theta,
        l2_weighted: weighted_l2(grid, f, theta)?,
        sigma_weighted: sigma_norm(tables, f, theta)?,
        sup_weighted: match sup_exponent {
            Some(m) => Some(weighted_sup(grid, f, m)?),
            None => None,
        },
    })
}

/// `E_θ(t) = ‖f(t)‖²_{2,θ} + ∫₀ᵗ ‖f(s)‖²_{σ,θ} ds` from sampled series, trapezoid in time.
///
/// `l2_sq` and `sigma_sq` are the squared norms at the times in `times`.
pub fn energy_from_series(times: &[f64], l2_sq: &[f64], sigma_sq: &[f64], t: f64) -> Result<f64> {
    check_len(times.len(), l2_sq.len())?;
    check_len(times.len(), sigma_sq.len())?;
    let (Some(&start), Some(&end)) = (times.first(), times.last()) else {
        return Err(Error::OutOfRange { t, start: f64::NAN, end: f64::NAN });
    };
    let slack = 1e-12 * end.abs().max(1.0);
    if t < start - slack || t > end + slack {
        return Err(Error::OutOfRange { t, start, end });
    }
    let mut integral = 0.0;
    for k in 1..times.len() {
        let (t0, t1) = (times[k - 1], times[k]);
        if t0 >= t {
            break;
        }
        if t1 <= t + slack {
            integral += 0.5 * (t1 - t0) * (sigma_sq[k - 1] + sigma_sq[k]);
            if (t1 - t).abs() <= slack {
                return Ok(l2_sq[k] + integral);
            }
        } else {
            // Partial interval: linear interpolation of both series.
            let s = (t - t0) / (t1 - t0);
            let sig_t = sigma_sq[k - 1] + s * (sigma_sq[k] - sigma_sq[k - 1]);
            integral += 0.5 * (t - t0) * (sigma_sq[k - 1] + sig_t);
            let l2_t = l2_sq[k - 1] + s * (l2_sq[k] - l2_sq[k - 1]);
            return Ok(l2_t + integral);
        }
    }
    Ok(l2_sq[0] + integral)
}
