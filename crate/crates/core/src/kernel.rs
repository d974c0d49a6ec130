//! Coulomb Landau kernel and the diffusion-matrix tables σ = φ ∗ μ.
//!
//! The tables are computed by integrating in spherical coordinates centred at
//! the evaluation node: the `r²` Jacobian cancels the `|z|⁻¹` singularity, the
//! angular integral about the axis `v̂` is done in closed form, and the
//! remaining radial integral is smooth and handled by composite Gauss–Legendre.
//! This gives the exact eigen-structure `σ(v) = λ₁ v̂v̂ᵀ + λ₂ (I - v̂v̂ᵀ)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::convolution::KernelTransforms;
use crate::error::{Error, Result};
use crate::grid::{dot, norm_sq, VelocityGrid, MAXWELL_NORM};
use crate::quadrature::{gauss_legendre, integrate};

pub type Mat3 = [[f64; 3]; 3];

/// Upper-triangle component order used for packed symmetric storage.
pub const SYM_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// φ^{ij}(z) = |z|⁻¹ (δ_{ij} - z_i z_j / |z|²).
pub fn landau_kernel(z: [f64; 3]) -> Result<Mat3> {
    let r2 = norm_sq(z);
    if r2 == 0.0 {
        return Err(Error::SingularPoint);
    }
    let r = r2.sqrt();
    let inv = 1.0 / r;
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            out[i][j] = inv * (delta - z[i] * z[j] / r2);
        }
    }
    Ok(out)
}

/// ∫_{[-1/2,1/2]³} |u|⁻¹ du.
///
/// Integrating the radial coordinate out analytically leaves a smooth face
/// integral: `(3/4) ∫∫_{[-1,1]²} (1 + s² + t²)^{-1/2} ds dt`.
pub fn unit_cube_inverse_distance() -> f64 {
    let rule = gauss_legendre(24);
    let inner = |s: f64| integrate(|t| (1.0 + s * s + t * t).powf(-0.5), -1.0, 1.0, 4, &rule);
    0.75 * integrate(inner, -1.0, 1.0, 4, &rule)
}

/// Average of φ over the cube of side `h` centred at the origin; isotropic by
/// cubic symmetry, `(2/3) κ / h · I` with `κ` from [`unit_cube_inverse_distance`].
pub fn cell_average_kernel(h: f64) -> Mat3 {
    isotropic(2.0 / 3.0 * unit_cube_inverse_distance() / h)
}

/// Minus the analytically continued lattice sum `Σ_{k≠0} |k|⁻¹` over `ℤ³`.
pub const LATTICE_ZETA: f64 = 2.837_297_479_480_619;

/// Value assigned to φ at the origin in lattice convolutions, `(2/3) Z / h · I`
/// with `Z =` [`LATTICE_ZETA`].
///
/// With this weight the punctured lattice sum of `|z|⁻¹ u(z)` matches the
/// integral up to `O(h⁴)` for smooth `u`; the plain cell average leaves an
/// `O(h²)` error with a large constant.
pub fn origin_kernel(h: f64) -> Mat3 {
    isotropic(2.0 / 3.0 * LATTICE_ZETA / h)
}

fn isotropic(c: f64) -> Mat3 {
    [[c, 0.0, 0.0], [0.0, c, 0.0], [0.0, 0.0, c]]
}

/// (cosh a - sinh a / a) / a², with its series near zero.
fn c_ratio_scaled(a: f64, s: f64, r: f64) -> f64 {
    // Returns e^{-(s²+r²)/2} · (cosh a − sinh a / a) / a² for a = r s.
    if a < 0.5 {
        let e = (-0.5 * (s * s + r * r)).exp();
        let a2 = a * a;
        let mut term = 1.0 / 3.0;
        let mut sum = term;
        let mut k = 1.0;
        loop {
            // ratio between successive terms 2k a^{2k-2}/(2k+1)!
            let next = term * a2 * (k + 1.0) / (k * (2.0 * k + 2.0) * (2.0 * k + 3.0));
            sum += next;
            term = next;
            k += 1.0;
            if next.abs() < 1e-18 * sum || k > 30.0 {
                break;
            }
        }
        e * sum
    } else {
        let em = (-0.5 * (s - r) * (s - r)).exp();
        let ep = (-0.5 * (s + r) * (s + r)).exp();
        let cosh = 0.5 * (em + ep);
        let sinh = 0.5 * (em - ep);
        (cosh - sinh / a) / (a * a)
    }
}

/// e^{-(s²+r²)/2} · sinh(a)/a for a = r s.
fn s_ratio_scaled(a: f64, s: f64, r: f64) -> f64 {
    if a < 0.5 {
        let e = (-0.5 * (s * s + r * r)).exp();
        let a2 = a * a;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            let next = term * a2 / ((2.0 * k) * (2.0 * k + 1.0));
            sum += next;
            term = next;
            k += 1.0;
            if next < 1e-18 * sum || k > 30.0 {
                break;
            }
        }
        e * sum
    } else {
        let em = (-0.5 * (s - r) * (s - r)).exp();
        let ep = (-0.5 * (s + r) * (s + r)).exp();
        0.5 * (em - ep) / a
    }
}

/// Eigenvalues `(λ₁, λ₂)` of σ at speed `s = |v|`: along `v̂` and transverse to it.
pub fn sigma_eigenvalues(speed: f64) -> (f64, f64) {
    thread_local! {
        static RULE: (Vec<f64>, Vec<f64>) = gauss_legendre(12);
    }
    let s = speed.abs();
    let upper = s + 14.0;
    let panels = (upper / 0.5).ceil() as usize;
    RULE.with(|rule| {
        let par = integrate(|r| r * c_ratio_scaled(r * s, s, r), 0.0, upper, panels, rule);
        let perp = integrate(
            |r| r * (s_ratio_scaled(r * s, s, r) - c_ratio_scaled(r * s, s, r)),
            0.0,
            upper,
            panels,
            rule,
        );
        (MAXWELL_NORM * 8.0 * PI * par, MAXWELL_NORM * 4.0 * PI * perp)
    })
}

/// σ(v) assembled from its eigen-decomposition.
pub fn sigma_matrix(v: [f64; 3]) -> Mat3 {
    let s2 = norm_sq(v);
    let (l1, l2) = sigma_eigenvalues(s2.sqrt());
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            let proj = if s2 > 0.0 { v[i] * v[j] / s2 } else { delta / 3.0 };
            out[i][j] = if s2 > 0.0 {
                l1 * proj + l2 * (delta - proj)
            } else {
                l1 * delta
            };
        }
    }
    out
}

/// Precomputed σ-related quantities on a velocity grid.
#[derive(Debug, Clone)]
pub struct KernelTables {
    pub sigma: Vec<Mat3>,
    pub sigma_i: Vec<[f64; 3]>,
    pub div_sigma_i: Vec<f64>,
    pub lambda_parallel: Vec<f64>,
    pub lambda_perp: Vec<f64>,
    pub kernel_transforms: KernelTransforms,
    /// Set when the spacing exceeds 1, too coarse to resolve the kernel scale.
    pub coarse_warning: bool,
    grid: VelocityGrid,
}

/// Fitted constants of the spectral envelope `c₁(1+|v|)⁻³ ≤ λ₁`, `λ₂ ≤ c₂(1+|v|)⁻¹`.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct SpectralBounds {
    pub c1: f64,
    pub c2: f64,
    /// Largest value of λ₁ (1+|v|)³; bounds λ₁ from above on the same set.
    pub c1_upper: f64,
    /// Smallest value of λ₂ (1+|v|); bounds λ₂ from below on the same set.
    pub c2_lower: f64,
    pub nodes_used: usize,
}

impl KernelTables {
    pub fn build(grid: &VelocityGrid) -> Self {
        let len = grid.len();
        let mut sigma = Vec::with_capacity(len);
        let mut sigma_i = Vec::with_capacity(len);
        let mut lambda_parallel = Vec::with_capacity(len);
        let mut lambda_perp = Vec::with_capacity(len);
        // σ depends on |v| only; cache by exact speed.
        let mut cache: std::collections::HashMap<u64, (f64, f64)> = Default::default();
        for v in grid.nodes() {
            let s = norm_sq(v).sqrt();
            let (l1, l2) = *cache.entry(s.to_bits()).or_insert_with(|| sigma_eigenvalues(s));
            let s2 = s * s;
            let mut m = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    m[i][j] = if s2 > 0.0 {
                        let proj = v[i] * v[j] / s2;
                        l1 * proj + l2 * (delta - proj)
                    } else {
                        l1 * delta
                    };
                }
            }
            sigma_i.push([l1 * v[0], l1 * v[1], l1 * v[2]]);
            sigma.push(m);
            lambda_parallel.push(l1);
            lambda_perp.push(l2);
        }
        let div_sigma_i = divergence(grid, &sigma_i);
        Self {
            sigma,
            sigma_i,
            div_sigma_i,
            lambda_parallel,
            lambda_perp,
            kernel_transforms: KernelTransforms::new(grid),
            coarse_warning: grid.spacing() > 1.0,
            grid: grid.clone(),
        }
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    /// σ^{ij} v_i v_j at node `idx`.
    pub fn sigma_vv(&self, idx: usize) -> f64 {
        let v = self.grid.node(idx);
        dot(v, self.sigma_i[idx])
    }

    /// Fits the spectral envelope over nodes with `|v| ≤ radius`.
    pub fn spectral_bounds(&self, radius: f64) -> SpectralBounds {
        let mut c1 = f64::INFINITY;
        let mut c1_upper: f64 = 0.0;
        let mut c2: f64 = 0.0;
        let mut c2_lower = f64::INFINITY;
        let mut used = 0;
        for (idx, v) in self.grid.nodes().enumerate() {
            let s = norm_sq(v).sqrt();
            if s > radius {
                continue;
            }
            used += 1;
            let a = self.lambda_parallel[idx] * (1.0 + s).powi(3);
            let b = self.lambda_perp[idx] * (1.0 + s);
            c1 = c1.min(a);
            c1_upper = c1_upper.max(a);
            c2 = c2.max(b);
            c2_lower = c2_lower.min(b);
        }
        SpectralBounds {
            c1,
            c2,
            c1_upper,
            c2_lower,
            nodes_used: used,
        }
    }
}

/// Centered differences of a vector field's divergence; one-sided at cube faces.
pub fn divergence(grid: &VelocityGrid, field: &[[f64; 3]]) -> Vec<f64> {
    let n = grid.n_per_axis();
    let h = grid.spacing();
    let mut out = vec![0.0; grid.len()];
    for (idx, slot) in out.iter_mut().enumerate() {
        let mi = grid.multi_index(idx);
        let mut acc = 0.0;
        for axis in 0..3 {
            let st = grid.stride(axis);
            let i = mi[axis];
            acc += if i == 0 {
                (field[idx + st][axis] - field[idx][axis]) / h
            } else if i + 1 == n {
                (field[idx][axis] - field[idx - st][axis]) / h
            } else {
                (field[idx + st][axis] - field[idx - st][axis]) / (2.0 * h)
            };
        }
        *slot = acc;
    }
    out
}

/// Smallest eigenvalue of a symmetric 3×3 matrix (closed-form trigonometric solution).
pub fn min_eigenvalue_sym3(m: &Mat3) -> f64 {
    symmetric_eigenvalues3(m)[0]
}

/// Eigenvalues of a symmetric 3×3 matrix in ascending order.
pub fn symmetric_eigenvalues3(m: &Mat3) -> [f64; 3] {
    let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    if p1 == 0.0 {
        let mut d = [m[0][0], m[1][1], m[2][2]];
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        return d;
    }
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { q } else { 0.0 };
            b[i][j] = (m[i][j] - delta) / p;
        }
    }
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let r = (det / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e_max = q + 2.0 * p * phi.cos();
    let e_min = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    let e_mid = 3.0 * q - e_max - e_min;
    [e_min, e_mid, e_max]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, scale: f64) -> [f64; 3] {
        [
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
        ]
    }

    #[test]
    fn kernel_examples() {
        let k = landau_kernel([1.0, 0.0, 0.0]).unwrap();
        assert_eq!(k, [[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let k = landau_kernel([0.0, 2.0, 0.0]).unwrap();
        assert_eq!(k, [[0.5, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.5]]);
        assert!(matches!(landau_kernel([0.0; 3]), Err(Error::SingularPoint)));
    }

    #[test]
    fn kernel_annihilates_argument_and_is_homogeneous() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let z = random_vec(&mut rng, 5.0);
            let k = landau_kernel(z).unwrap();
            let scale = norm_sq(z).sqrt();
            for row in &k {
                assert!(dot(*row, z).abs() <= 1e-14 * scale.max(1.0));
            }
            let s = rng.gen_range(0.1..10.0);
            let ks = landau_kernel([s * z[0], s * z[1], s * z[2]]).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    assert!((ks[i][j] - k[i][j] / s).abs() <= 1e-13 * k[i][j].abs().max(1.0 / scale));
                    assert_eq!(k[i][j], k[j][i]);
                }
            }
            let ev = symmetric_eigenvalues3(&k);
            assert!(ev[0].abs() < 1e-12 / scale.min(1.0));
            assert!(ev[1] > 0.0);
        }
    }

    #[test]
    fn unit_cube_constant() {
        // Known value of the mean inverse distance to the centre of a unit cube.
        let k = unit_cube_inverse_distance();
        assert!((k - 2.380_077_363_5).abs() < 1e-8, "{k}");
    }

    #[test]
    fn cell_average_matches_brute_force_midpoint() {
        // Independent oracle: fine midpoint sum over the cube; an even
        // subdivision keeps the origin on a cell corner, off the samples.
        let m = 200;
        let mut acc = 0.0;
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    let u = [
                        (a as f64 + 0.5) / m as f64 - 0.5,
                        (b as f64 + 0.5) / m as f64 - 0.5,
                        (c as f64 + 0.5) / m as f64 - 0.5,
                    ];
                    acc += 1.0 / norm_sq(u).sqrt();
                }
            }
        }
        acc /= (m * m * m) as f64;
        assert!((acc - unit_cube_inverse_distance()).abs() < 2e-3);
    }

    #[test]
    fn trace_at_origin_matches_radial_closed_form() {
        let closed = 8.0 * PI * MAXWELL_NORM;
        let (l1, l2) = sigma_eigenvalues(0.0);
        assert!((l1 + 2.0 * l2 - closed).abs() < 1e-12);
        assert!((closed - 1.595_769_12).abs() < 1e-8);
    }

    /// Independent oracle: direct 3-D integration in spherical coordinates
    /// about the evaluation point with numerical angular quadrature.
    fn sigma_by_spherical_quadrature(v: [f64; 3]) -> Mat3 {
        let rule_r = gauss_legendre(16);
        let rule_t = gauss_legendre(40);
        let n_phi = 64;
        let mut out = [[0.0; 3]; 3];
        let r_max = norm_sq(v).sqrt() + 12.0;
        let panels = 40;
        let width = r_max / panels as f64;
        for p in 0..panels {
            for (xr, wr) in rule_r.0.iter().zip(&rule_r.1) {
                let r = p as f64 * width + 0.5 * width * (1.0 + xr);
                let wr = wr * 0.5 * width;
                for (ct, wt) in rule_t.0.iter().zip(&rule_t.1) {
                    let st = (1.0 - ct * ct).sqrt();
                    for q in 0..n_phi {
                        let ph = 2.0 * PI * (q as f64 + 0.5) / n_phi as f64;
                        let w = [st * ph.cos(), st * ph.sin(), *ct];
                        let m = crate::grid::maxwellian([v[0] - r * w[0], v[1] - r * w[1], v[2] - r * w[2]]);
                        let weight = wr * wt * (2.0 * PI / n_phi as f64) * r * m;
                        for i in 0..3 {
                            for j in 0..3 {
                                let delta = if i == j { 1.0 } else { 0.0 };
                                out[i][j] += weight * (delta - w[i] * w[j]);
                            }
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn semi_analytic_sigma_matches_spherical_quadrature() {
        for v in [[0.0, 0.0, 0.0], [3.0, 0.0, 0.0], [1.0, -2.0, 0.5], [0.0, 4.5, 4.5]] {
            let a = sigma_matrix(v);
            let b = sigma_by_spherical_quadrature(v);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((a[i][j] - b[i][j]).abs() < 1e-9, "{v:?} {i}{j}: {} vs {}", a[i][j], b[i][j]);
                }
            }
        }
    }

    #[test]
    fn axial_symmetry_off_diagonals_vanish() {
        let s = sigma_matrix([3.0, 0.0, 0.0]);
        assert!(s[0][1].abs() < 1e-15 && s[0][2].abs() < 1e-15 && s[1][2].abs() < 1e-15);
    }

    #[test]
    fn rotation_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let v = random_vec(&mut rng, 4.0);
            // random rotation from a normalized quaternion
            let q: [f64; 4] = [rng.gen(), rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5];
            let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
            let [w, x, y, z] = q.map(|c| c / n);
            let r = [
                [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
                [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
                [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
            ];
            let rv = [dot(r[0], v), dot(r[1], v), dot(r[2], v)];
            let s = sigma_matrix(v);
            let srv = sigma_matrix(rv);
            for i in 0..3 {
                for j in 0..3 {
                    let mut conj = 0.0;
                    for a in 0..3 {
                        for b in 0..3 {
                            conj += r[i][a] * s[a][b] * r[j][b];
                        }
                    }
                    assert!((conj - srv[i][j]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn tables_invariants() {
        let grid = VelocityGrid::new(12, 8.0).unwrap();
        let t = KernelTables::build(&grid);
        assert!(t.coarse_warning);
        for idx in 0..grid.len() {
            let v = grid.node(idx);
            let s = norm_sq(v).sqrt();
            let ev = symmetric_eigenvalues3(&t.sigma[idx]);
            assert!(ev[0] > 0.0);
            assert!(t.lambda_parallel[idx] > 0.0 && t.lambda_perp[idx] > 0.0);
            if s > grid.spacing() {
                for i in 0..3 {
                    let sv = dot(t.sigma[idx][i], v);
                    assert!((sv - t.lambda_parallel[idx] * v[i]).abs() <= 1e-8 * t.lambda_parallel[idx] * s);
                }
            }
            if s >= 1.0 {
                assert!(t.lambda_parallel[idx] <= t.lambda_perp[idx]);
            }
        }
    }

    #[test]
    fn spectral_envelope_constants_are_bounded() {
        let grid = VelocityGrid::new(16, 8.0).unwrap();
        let t = KernelTables::build(&grid);
        let mut a = vec![];
        let mut b = vec![];
        for s in [2.0, 4.0, 6.0] {
            let (l1, l2) = sigma_eigenvalues(s);
            a.push(l1 * (1.0 + s).powi(3));
            b.push(l2 * (1.0 + s));
        }
        // both scaled eigenvalues stay within a fixed positive band
        let (amin, amax) = (a.iter().cloned().fold(f64::MAX, f64::min), a.iter().cloned().fold(0.0, f64::max));
        let (bmin, bmax) = (b.iter().cloned().fold(f64::MAX, f64::min), b.iter().cloned().fold(0.0, f64::max));
        assert!(amin > 0.0 && amax / amin < 5.0);
        assert!(bmin > 0.0 && bmax / bmin < 5.0);
        let fit = t.spectral_bounds(6.0);
        assert!(fit.c1 > 0.0 && fit.c2.is_finite());
    }

    #[test]
    fn divergence_of_linear_field_is_exact() {
        let grid = VelocityGrid::new(6, 3.0).unwrap();
        let field: Vec<[f64; 3]> = grid.nodes().map(|v| [2.0 * v[0], -v[1], 0.5 * v[2]]).collect();
        for d in divergence(&grid, &field) {
            assert!((d - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenvalues3_match_known() {
        let m = [[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 5.0]];
        let e = symmetric_eigenvalues3(&m);
        assert!((e[0] - 1.0).abs() < 1e-12 && (e[1] - 3.0).abs() < 1e-12 && (e[2] - 5.0).abs() < 1e-12);
    }
}
