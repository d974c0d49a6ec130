//! Matrix-free linearized Landau operators on a velocity grid.
//!
//! The discretization is written in weak form. With `q = f/√μ`, the twisted
//! difference `D_a f = √μ · (one-sided difference of q along a)` is a
//! second-order approximation of `∂_a f + (v_a/2) f`, and
//!
//! `L f = ½ Σ_s D^{s*} [σ^s D^s f - √μ φ ∗ (√μ D^s f)]`
//!
//! sums over forward (`s = +`) and backward (`s = -`) differences, with
//! `D*` the adjoint in the quadrature inner product and
//! `σ^s = φ ∗ (1_s μ)` the lattice diffusion matrix restricted to nodes where
//! the difference exists. This is the discrete Landau form: `L` is symmetric
//! and positive semi-definite, and `√μ, v√μ, |v|²√μ` lie in its kernel, all to
//! rounding error. Averaging the two one-sided versions cancels their
//! first-order errors.

use faer::Mat;

use rayon::prelude::*;

use crate::convolution::{sym_index, KernelTransforms, LatticeKernel};
use crate::error::{check_len, Error, Result};
use crate::grid::VelocityGrid;
use crate::kernel::{symmetric_eigenvalues3, KernelTables, Mat3, SYM_PAIRS};

/// Largest `n_per_axis` accepted by [`assemble_l`].
pub const ASSEMBLY_LIMIT: usize = 20;

/// Largest `n_per_axis` for which dense column generation is allowed at all
/// (a 24³ grid needs a 1.5 GB matrix).
pub const DENSE_LIMIT: usize = 24;

type Vec3 = [Vec<f64>; 3];
type Sym6 = [Vec<f64>; 6];

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Diff {
    /// `√μ` times the difference of `f/√μ`.
    Twisted,
    /// `1/√μ` times the difference of `f√μ`.
    Hat,
    Plain,
}

/// One-sided difference direction.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Side {
    Forward,
    Backward,
}

const SIDES: [Side; 2] = [Side::Forward, Side::Backward];

impl Side {
    fn slot(self) -> usize {
        match self {
            Side::Forward => 0,
            Side::Backward => 1,
        }
    }
}

/// Precomputed data for applying `A`, `K`, `L`, `Γ`, `Ā_g` and `K̄_g`.
#[derive(Debug, Clone)]
pub struct CollisionOperator {
    grid: VelocityGrid,
    tables: KernelTables,
    sqrt_mu: Vec<f64>,
    mask: [Vec<bool>; 2],
    /// `√μ(v)/√μ(v ± h e_a)` for the forward/backward neighbour.
    ratio: [Vec3; 2],
    sigma_lattice: [Sym6; 2],
}

/// Coefficients of `Γ(g, ·)` for a fixed velocity profile `g`; `Γ` is linear
/// in `g`, so a spatially modulated `s(x) g(v)` reuses them with a scale.
#[derive(Debug, Clone)]
pub struct GammaCoefficients {
    c: [Sym6; 2],
    q: [Vec3; 2],
    drift: Vec3,
    sup_weight: f64,
}

fn zeros3(len: usize) -> Vec3 {
    [vec![0.0; len], vec![0.0; len], vec![0.0; len]]
}

impl CollisionOperator {
    pub fn new(tables: KernelTables) -> Self {
        let grid = tables.grid().clone();
        let n = grid.n_per_axis();
        let h = grid.spacing();
        let len = grid.len();
        let sqrt_mu = grid.sqrt_maxwellian_values();
        let mut mask = [vec![false; len], vec![false; len]];
        let mut ratio = [zeros3(len), zeros3(len)];
        for idx in 0..len {
            let mi = grid.multi_index(idx);
            mask[0][idx] = mi.iter().all(|&i| i + 1 < n);
            mask[1][idx] = mi.iter().all(|&i| i >= 1);
            let v = grid.node(idx);
            for a in 0..3 {
                ratio[0][a][idx] = ((2.0 * h * v[a] + h * h) / 4.0).exp();
                ratio[1][a][idx] = ((-2.0 * h * v[a] + h * h) / 4.0).exp();
            }
        }
        let mu = grid.maxwellian_values();
        let kt = &tables.kernel_transforms;
        let sigma_lattice = [0, 1].map(|s| {
            let masked: Vec<f64> = mu.iter().zip(&mask[s]).map(|(m, &k)| if k { *m } else { 0.0 }).collect();
            kt.convolve_all(&masked).expect("grid-sized field")
        });
        Self {
            grid,
            tables,
            sqrt_mu,
            mask,
            ratio,
            sigma_lattice,
        }
    }

    pub fn from_grid(grid: &VelocityGrid) -> Self {
        Self::new(KernelTables::build(grid))
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn tables(&self) -> &KernelTables {
        &self.tables
    }

    pub fn transforms(&self) -> &KernelTransforms {
        &self.tables.kernel_transforms
    }

    pub fn sqrt_mu(&self) -> &[f64] {
        &self.sqrt_mu
    }

    /// Lattice diffusion matrix `φ ∗ (1_s μ)` at node `idx`.
    pub fn sigma_lattice(&self, side: Side, idx: usize) -> Mat3 {
        let s = &self.sigma_lattice[side.slot()];
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = s[sym_index(i, j)][idx];
            }
        }
        m
    }

    fn diff(&self, side: Side, kind: Diff, f: &[f64]) -> Vec3 {
        let len = self.grid.len();
        let h = self.grid.spacing();
        let s = side.slot();
        let mut out = zeros3(len);
        for a in 0..3 {
            let st = self.grid.stride(a);
            let r = &self.ratio[s][a];
            let da = &mut out[a];
            for idx in 0..len {
                if !self.mask[s][idx] {
                    continue;
                }
                let rho = match kind {
                    Diff::Twisted => r[idx],
                    Diff::Hat => 1.0 / r[idx],
                    Diff::Plain => 1.0,
                };
                da[idx] = match side {
                    Side::Forward => (rho * f[idx + st] - f[idx]) / h,
                    Side::Backward => (f[idx] - rho * f[idx - st]) / h,
                };
            }
        }
        out
    }

    /// Adjoint of [`Self::diff`] in the quadrature inner product.
    fn diff_adjoint(&self, side: Side, kind: Diff, x: &Vec3) -> Vec<f64> {
        let len = self.grid.len();
        let h = self.grid.spacing();
        let s = side.slot();
        let w = self.grid.weights();
        let mut out = vec![0.0; len];
        for a in 0..3 {
            let st = self.grid.stride(a);
            let r = &self.ratio[s][a];
            let xa = &x[a];
            for idx in 0..len {
                if !self.mask[s][idx] {
                    continue;
                }
                let rho = match kind {
                    Diff::Twisted => r[idx],
                    Diff::Hat => 1.0 / r[idx],
                    Diff::Plain => 1.0,
                };
                let c = w[idx] * xa[idx] / h;
                match side {
                    Side::Forward => {
                        out[idx + st] += rho * c;
                        out[idx] -= c;
                    }
                    Side::Backward => {
                        out[idx] += c;
                        out[idx - st] -= rho * c;
                    }
                }
            }
        }
        for (o, wi) in out.iter_mut().zip(w) {
            *o /= wi;
        }
        out
    }

    fn sym_times(&self, m: &Sym6, scale: f64, d: &Vec3, mask: &[bool]) -> Vec3 {
        let len = self.grid.len();
        let mut out = zeros3(len);
        for idx in 0..len {
            if !mask[idx] {
                continue;
            }
            for i in 0..3 {
                let mut acc = 0.0;
                for j in 0..3 {
                    acc += m[sym_index(i, j)][idx] * d[j][idx];
                }
                out[i][idx] = scale * acc;
            }
        }
        out
    }

    /// Returns `(A f, K f)`; they share the twisted differences.
    pub fn apply_a_and_k(&self, f: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len(self.grid.len(), f.len())?;
        let len = self.grid.len();
        let d = SIDES.map(|side| self.diff(side, Diff::Twisted, f));
        let u = self.k_potentials(&d)?;
        let mut a_out = vec![0.0; len];
        let mut k_out = vec![0.0; len];
        for side in SIDES {
            let s = side.slot();
            let flux = self.sym_times(&self.sigma_lattice[s], 1.0, &d[s], &self.mask[s]);
            let a = self.diff_adjoint(side, Diff::Twisted, &flux);
            let mut ku = zeros3(len);
            for i in 0..3 {
                for idx in 0..len {
                    ku[i][idx] = self.sqrt_mu[idx] * u[s][i][idx];
                }
            }
            let k = self.diff_adjoint(side, Diff::Twisted, &ku);
            for idx in 0..len {
                a_out[idx] -= 0.5 * a[idx];
                k_out[idx] += 0.5 * k[idx];
            }
        }
        Ok((a_out, k_out))
    }

    /// `u^s_i = Σ_j φ^{ij} ∗ (√μ D^s_j f)` for both sides in one packed pass.
    fn k_potentials(&self, d: &[Vec3; 2]) -> Result<[Vec3; 2]> {
        let len = self.grid.len();
        let weighted = [0, 1].map(|s| {
            let mut w = zeros3(len);
            for j in 0..3 {
                for idx in 0..len {
                    w[j][idx] = self.sqrt_mu[idx] * d[s][j][idx];
                }
            }
            w
        });
        let (up, um) = self.transforms().convolve_vector_pair(
            [&weighted[0][0], &weighted[0][1], &weighted[0][2]],
            [&weighted[1][0], &weighted[1][1], &weighted[1][2]],
        )?;
        Ok([up, um])
    }

    pub fn apply_a(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len(self.grid.len(), f.len())?;
        let len = self.grid.len();
        let mut out = vec![0.0; len];
        for side in SIDES {
            let s = side.slot();
            let d = self.diff(side, Diff::Twisted, f);
            let flux = self.sym_times(&self.sigma_lattice[s], 1.0, &d, &self.mask[s]);
            let a = self.diff_adjoint(side, Diff::Twisted, &flux);
            for idx in 0..len {
                out[idx] -= 0.5 * a[idx];
            }
        }
        Ok(out)
    }

    pub fn apply_k(&self, f: &[f64]) -> Result<Vec<f64>> {
        Ok(self.apply_a_and_k(f)?.1)
    }

    /// `L f = -A f - K f`.
    pub fn apply_l(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len(self.grid.len(), f.len())?;
        let len = self.grid.len();
        let d = SIDES.map(|side| self.diff(side, Diff::Twisted, f));
        let u = self.k_potentials(&d)?;
        let mut out = vec![0.0; len];
        for side in SIDES {
            let s = side.slot();
            let mut x = self.sym_times(&self.sigma_lattice[s], 1.0, &d[s], &self.mask[s]);
            for i in 0..3 {
                for idx in 0..len {
                    x[i][idx] -= self.sqrt_mu[idx] * u[s][i][idx];
                }
            }
            let part = self.diff_adjoint(side, Diff::Twisted, &x);
            for idx in 0..len {
                out[idx] += 0.5 * part[idx];
            }
        }
        Ok(out)
    }

    /// `w ⊙ L e_k` for the unit nodal field `e_k`, with the convolution summed
    /// directly over the few nodes where `D e_k` is nonzero.
    pub fn weighted_l_column(&self, k: usize, kernel: &LatticeKernel) -> Vec<f64> {
        let len = self.grid.len();
        let h = self.grid.spacing();
        let n = self.grid.n_per_axis();
        let w = self.grid.weights();
        let mk = self.grid.multi_index(k);
        let mut out = vec![0.0; len];
        for side in SIDES {
            let s = side.slot();
            // Nonzero entries of D^s e_k as (node, 3-vector).
            let mut sparse: Vec<(usize, [f64; 3])> = Vec::with_capacity(4);
            if self.mask[s][k] {
                let c = match side {
                    Side::Forward => -1.0 / h,
                    Side::Backward => 1.0 / h,
                };
                sparse.push((k, [c; 3]));
            }
            for a in 0..3 {
                let st = self.grid.stride(a);
                let m = match side {
                    Side::Forward if mk[a] >= 1 => k - st,
                    Side::Backward if mk[a] + 1 < n => k + st,
                    _ => continue,
                };
                if !self.mask[s][m] {
                    continue;
                }
                let mut d = [0.0; 3];
                d[a] = match side {
                    Side::Forward => self.ratio[s][a][m] / h,
                    Side::Backward => -self.ratio[s][a][m] / h,
                };
                sparse.push((m, d));
            }
            let sources: Vec<([usize; 3], [f64; 3], [f64; 3])> = sparse
                .iter()
                .map(|&(m, d)| {
                    let c = w[m] * self.sqrt_mu[m];
                    (self.grid.multi_index(m), d, [c * d[0], c * d[1], c * d[2]])
                })
                .collect();
            let sig = &self.sigma_lattice[s];
            let mut x = zeros3(len);
            for idx in 0..len {
                if !self.mask[s][idx] {
                    continue;
                }
                let p = self.grid.multi_index(idx);
                let mut u = [0.0; 3];
                for (q, _, g) in &sources {
                    let kv = kernel.between(p, *q);
                    for i in 0..3 {
                        for j in 0..3 {
                            u[i] += kv[sym_index(i, j)] * g[j];
                        }
                    }
                }
                let mut local = [0.0; 3];
                for &(m, d) in &sparse {
                    if m == idx {
                        for i in 0..3 {
                            for j in 0..3 {
                                local[i] += sig[sym_index(i, j)][idx] * d[j];
                            }
                        }
                    }
                }
                for i in 0..3 {
                    x[i][idx] = local[i] - self.sqrt_mu[idx] * u[i];
                }
            }
            let part = self.diff_adjoint(side, Diff::Twisted, &x);
            for idx in 0..len {
                out[idx] += 0.5 * w[idx] * part[idx];
            }
        }
        out
    }

    /// Dissipation `(L f, f)` computed from the symmetric form, without `L f`.
    pub fn dissipation(&self, f: &[f64]) -> Result<f64> {
        check_len(self.grid.len(), f.len())?;
        let len = self.grid.len();
        let w = self.grid.weights();
        let d = SIDES.map(|side| self.diff(side, Diff::Twisted, f));
        let u = self.k_potentials(&d)?;
        let mut total = 0.0;
        for side in SIDES {
            let s = side.slot();
            let x = self.sym_times(&self.sigma_lattice[s], 1.0, &d[s], &self.mask[s]);
            for i in 0..3 {
                for idx in 0..len {
                    if self.mask[s][idx] {
                        total += 0.5 * w[idx] * d[s][i][idx] * (x[i][idx] - self.sqrt_mu[idx] * u[s][i][idx]);
                    }
                }
            }
        }
        Ok(total)
    }

    pub fn gamma_coefficients(&self, g: &[f64]) -> Result<GammaCoefficients> {
        check_len(self.grid.len(), g.len())?;
        let len = self.grid.len();
        let kt = self.transforms();
        let c = [0, 1].map(|s| {
            let masked: Vec<f64> = (0..len)
                .map(|idx| if self.mask[s][idx] { self.sqrt_mu[idx] * g[idx] } else { 0.0 })
                .collect();
            kt.convolve_all(&masked).expect("grid-sized field")
        });
        let dh = SIDES.map(|side| self.diff(side, Diff::Hat, g));
        let q = self.k_potentials(&dh)?;
        // Drift a_g^i = -½ Σ_j φ^{ij} ∗ (v_j √μ g) - Σ_j φ^{ij} ∗ (√μ ∂_j g).
        let sg: Vec<f64> = (0..len).map(|idx| self.sqrt_mu[idx] * g[idx]).collect();
        let c_full = kt.convolve_all(&sg)?;
        let grad = centered_gradient(&self.grid, g);
        let mut sgrad = zeros3(len);
        for j in 0..3 {
            for idx in 0..len {
                sgrad[j][idx] = self.sqrt_mu[idx] * grad[j][idx];
            }
        }
        let zero = vec![0.0; len];
        let (conv_grad, _) = kt.convolve_vector_pair([&sgrad[0], &sgrad[1], &sgrad[2]], [&zero, &zero, &zero])?;
        let mut drift = zeros3(len);
        for idx in 0..len {
            let v = self.grid.node(idx);
            for i in 0..3 {
                let mut acc = 0.0;
                for j in 0..3 {
                    acc += c_full[sym_index(i, j)][idx] * v[j];
                }
                drift[i][idx] = -0.5 * acc - conv_grad[i][idx];
            }
        }
        Ok(GammaCoefficients {
            c,
            q,
            drift,
            sup_weight: 1.0,
        })
    }

    /// `Γ(g, f)` for the profile behind `coef`, scaled by `scale`.
    pub fn apply_gamma_with(&self, coef: &GammaCoefficients, scale: f64, f: &[f64]) -> Result<Vec<f64>> {
        check_len(self.grid.len(), f.len())?;
        let len = self.grid.len();
        let mut out = vec![0.0; len];
        if scale == 0.0 {
            return Ok(out);
        }
        for side in SIDES {
            let s = side.slot();
            let dh = self.diff(side, Diff::Hat, f);
            let mut y = self.sym_times(&coef.c[s], scale, &dh, &self.mask[s]);
            for i in 0..3 {
                for idx in 0..len {
                    if self.mask[s][idx] {
                        y[i][idx] -= scale * f[idx] * coef.q[s][i][idx];
                    }
                }
            }
            let part = self.diff_adjoint(side, Diff::Twisted, &y);
            for idx in 0..len {
                out[idx] -= 0.5 * part[idx];
            }
        }
        Ok(out)
    }

    pub fn apply_gamma(&self, g: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        let coef = self.gamma_coefficients(g)?;
        self.apply_gamma_with(&coef, 1.0, f)
    }

    /// Nodes where `σ^s + scale·c^s` fails to be positive semi-definite.
    pub fn check_sigma_g(&self, coef: &GammaCoefficients, scale: f64) -> Result<()> {
        let mut bad = Vec::new();
        let mut worst = f64::INFINITY;
        for side in SIDES {
            let s = side.slot();
            for idx in 0..self.grid.len() {
                if !self.mask[s][idx] {
                    continue;
                }
                let mut m = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        let k = sym_index(i, j);
                        m[i][j] = self.sigma_lattice[s][k][idx] + scale * coef.c[s][k][idx];
                    }
                }
                let ev = symmetric_eigenvalues3(&m)[0];
                // Tolerance relative to the local scale of σ.
                let tol = -1e-12 * (m[0][0] + m[1][1] + m[2][2]).abs();
                if ev < tol {
                    worst = worst.min(ev);
                    if !bad.contains(&idx) {
                        bad.push(idx);
                    }
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::NotPositiveSemidefinite {
                nodes: bad,
                min_eigenvalue: worst,
            })
        }
    }

    /// `Ā_g f = ∇·(σ_G ∇f) + a_g·∇f` with `σ_G = σ + φ ∗ (√μ g)`.
    pub fn apply_abar_with(&self, coef: Option<&GammaCoefficients>, scale: f64, f: &[f64]) -> Result<Vec<f64>> {
        check_len(self.grid.len(), f.len())?;
        let len = self.grid.len();
        if let Some(c) = coef {
            self.check_sigma_g(c, scale)?;
        }
        let mut out = vec![0.0; len];
        for side in SIDES {
            let s = side.slot();
            let d = self.diff(side, Diff::Plain, f);
            let mut flux = self.sym_times(&self.sigma_lattice[s], 1.0, &d, &self.mask[s]);
            if let Some(c) = coef {
                let extra = self.sym_times(&c.c[s], scale, &d, &self.mask[s]);
                for i in 0..3 {
                    for idx in 0..len {
                        flux[i][idx] += extra[i][idx];
                    }
                }
            }
            let part = self.diff_adjoint(side, Diff::Plain, &flux);
            for idx in 0..len {
                out[idx] -= 0.5 * part[idx];
            }
        }
        if let Some(c) = coef {
            let grad = centered_gradient(&self.grid, f);
            for idx in 0..len {
                for i in 0..3 {
                    out[idx] += scale * c.drift[i][idx] * grad[i][idx];
                }
            }
        }
        Ok(out)
    }

    /// `K̄_g f`, defined so that `Ā_g + K̄_g = -L + Γ(g, ·)` holds exactly.
    pub fn apply_kbar_with(&self, coef: Option<&GammaCoefficients>, scale: f64, f: &[f64]) -> Result<Vec<f64>> {
        let abar = self.apply_abar_with(coef, scale, f)?;
        let l = self.apply_l(f)?;
        let gamma = match coef {
            Some(c) => self.apply_gamma_with(c, scale, f)?,
            None => vec![0.0; f.len()],
        };
        Ok(l.iter()
            .zip(&gamma)
            .zip(&abar)
            .map(|((l, g), a)| -l + g - a)
            .collect())
    }

    pub fn apply_abar(&self, g: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        let coef = self.gamma_coefficients(g)?;
        self.apply_abar_with(Some(&coef), 1.0, f)
    }

    pub fn apply_kbar(&self, g: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        let coef = self.gamma_coefficients(g)?;
        self.apply_kbar_with(Some(&coef), 1.0, f)
    }
}

impl GammaCoefficients {
    /// `‖g‖_{∞,m}` of the profile, when recorded by the caller.
    pub fn sup_weight(&self) -> f64 {
        self.sup_weight
    }

    pub fn with_sup_weight(mut self, value: f64) -> Self {
        self.sup_weight = value;
        self
    }
}

/// Centered differences with zero extension outside the cube.
pub fn centered_gradient(grid: &VelocityGrid, f: &[f64]) -> Vec3 {
    let n = grid.n_per_axis();
    let h = grid.spacing();
    let len = grid.len();
    let mut out = zeros3(len);
    for idx in 0..len {
        let mi = grid.multi_index(idx);
        for a in 0..3 {
            let st = grid.stride(a);
            let up = if mi[a] + 1 < n { f[idx + st] } else { 0.0 };
            let down = if mi[a] > 0 { f[idx - st] } else { 0.0 };
            out[a][idx] = (up - down) / (2.0 * h);
        }
    }
    out
}

/// Dense matrix of the bilinear form `(L e_k, e_i)` on unit nodal fields.
#[derive(Debug, Clone)]
pub struct AssembledOperator {
    pub matrix: Mat<f64>,
    pub symmetry_defect: f64,
    n: usize,
    weights: Vec<f64>,
}

pub fn assemble_l(op: &CollisionOperator) -> Result<AssembledOperator> {
    let grid = op.grid();
    let n = grid.n_per_axis();
    if n > ASSEMBLY_LIMIT {
        return Err(Error::MemoryGuard { n, limit: ASSEMBLY_LIMIT });
    }
    let len = grid.len();
    let w = grid.weights();
    let mut matrix = Mat::<f64>::zeros(len, len);
    fill_weighted_l(op, &mut matrix, 0.0, 1.0);
    let mut defect: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..len {
        for k in 0..i {
            defect = defect.max((matrix.read(i, k) - matrix.read(k, i)).abs());
        }
        scale = scale.max(matrix.read(i, i).abs());
    }
    Ok(AssembledOperator {
        matrix,
        symmetry_defect: if scale > 0.0 { defect / scale } else { 0.0 },
        n,
        weights: w.to_vec(),
    })
}

/// Overwrites `matrix` with `shift · W + scale · W L`, where `W` is the diagonal
/// of grid weights. Columns are generated in parallel batches.
pub fn fill_weighted_l(op: &CollisionOperator, matrix: &mut Mat<f64>, shift: f64, scale: f64) {
    let len = op.grid().len();
    let w = op.grid().weights();
    let kernel = LatticeKernel::new(op.grid());
    const BATCH: usize = 64;
    for start in (0..len).step_by(BATCH) {
        let end = (start + BATCH).min(len);
        let cols: Vec<Vec<f64>> = (start..end).into_par_iter().map(|k| op.weighted_l_column(k, &kernel)).collect();
        for (k, col) in (start..end).zip(cols) {
            for (i, value) in col.into_iter().enumerate() {
                matrix.write(i, k, scale * value);
            }
            matrix.write(k, k, matrix.read(k, k) + shift * w[k]);
        }
    }
}

impl AssembledOperator {
    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len(self.weights.len(), f.len())?;
        let len = f.len();
        let mut out = vec![0.0; len];
        for k in 0..len {
            if f[k] == 0.0 {
                continue;
            }
            let col = self.matrix.col(k);
            for i in 0..len {
                out[i] += col.read(i) * f[k];
            }
        }
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o /= w;
        }
        Ok(out)
    }

    /// Eigenvalues of `L` as an operator on the weighted space, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let len = self.weights.len();
        let inv_sqrt: Vec<f64> = self.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
        let sym = Mat::<f64>::from_fn(len, len, |i, k| {
            0.5 * (self.matrix.read(i, k) + self.matrix.read(k, i)) * inv_sqrt[i] * inv_sqrt[k]
        });
        let mut ev = sym.selfadjoint_eigenvalues(faer::Side::Lower);
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }
}

/// Components of a packed symmetric field as a full matrix at one node.
pub fn unpack_sym(m: &Sym6, idx: usize) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (k, &(i, j)) in SYM_PAIRS.iter().enumerate() {
        out[i][j] = m[k][idx];
        out[j][i] = m[k][idx];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::norm_sq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_smooth(grid: &VelocityGrid, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let c: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        grid.nodes()
            .map(|v| {
                let p = c[0] + c[1] * v[0] + c[2] * v[1] + c[3] * v[2] + c[4] * v[0] * v[1]
                    + c[5] * v[1] * v[2] + c[6] * v[0] * v[0] + c[7] * v[2] * v[2] * v[0]
                    + c[8] * v[1] * v[1] * v[1] + c[9] * norm_sq(v);
                p * crate::grid::sqrt_maxwellian(v)
            })
            .collect()
    }

    fn random_rough(grid: &VelocityGrid, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn collision_invariants(grid: &VelocityGrid) -> Vec<Vec<f64>> {
        let sm = grid.sqrt_maxwellian_values();
        let mut out = vec![sm.clone()];
        for a in 0..3 {
            out.push(grid.nodes().zip(&sm).map(|(v, s)| v[a] * s).collect());
        }
        out.push(grid.nodes().zip(&sm).map(|(v, s)| norm_sq(v) * s).collect());
        out
    }

    fn l2(grid: &VelocityGrid, f: &[f64]) -> f64 {
        grid.inner(f, f).sqrt()
    }

    #[test]
    fn l_is_symmetric_and_nonnegative() {
        let grid = VelocityGrid::new(8, 8.0).unwrap();
        let op = CollisionOperator::from_grid(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let f = random_rough(&grid, &mut rng);
            let h = random_rough(&grid, &mut rng);
            let lf = op.apply_l(&f).unwrap();
            let lh = op.apply_l(&h).unwrap();
            let a = grid.inner(&lf, &h);
            let b = grid.inner(&f, &lh);
            assert!((a - b).abs() <= 1e-10 * l2(&grid, &f) * l2(&grid, &h), "{a} {b}");
            let q = grid.inner(&lf, &f);
            assert!(q >= -1e-12 * grid.inner(&f, &f));
            let diss = op.dissipation(&f).unwrap();
            assert!((diss - q).abs() <= 1e-10 * q.abs().max(1e-12));
        }
    }

    #[test]
    fn collision_invariants_are_annihilated() {
        let grid = VelocityGrid::new(10, 8.0).unwrap();
        let op = CollisionOperator::from_grid(&grid);
        for e in collision_invariants(&grid) {
            let le = op.apply_l(&e).unwrap();
            assert!(l2(&grid, &le) <= 1e-12 * l2(&grid, &e));
        }
    }

    #[test]
    fn l_output_is_orthogonal_to_invariants() {
        let grid = VelocityGrid::new(9, 8.0).unwrap();
        let op = CollisionOperator::from_grid(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_rough(&grid, &mut rng);
        let lf = op.apply_l(&f).unwrap();
        for e in collision_invariants(&grid) {
            assert!(grid.inner(&lf, &e).abs() <= 1e-12 * l2(&grid, &lf) * l2(&grid, &e));
        }
    }

    #[test]
    fn a_bilinear_form_matches_direct_sum() {
        let grid = VelocityGrid::new(8, 8.0).unwrap();
        let op = CollisionOperator::from_grid(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = grid.n_per_axis();
        let h = grid.spacing();
        for _ in 0..50 {
            let f = random_rough(&grid, &mut rng);
            let af = op.apply_a(&f).unwrap();
            let lhs = grid.inner(&af, &f);
            // Oracle: -½ Σ_s Σ_v w σ^s (D^s f)·(D^s f) with D written out by hand.
            let q: Vec<f64> = f.iter().zip(op.sqrt_mu()).map(|(a, b)| a / b).collect();
            let mut rhs = 0.0;
            for (s, side) in SIDES.iter().enumerate() {
                for idx in 0..grid.len() {
                    let mi = grid.multi_index(idx);
                    let ok = match side {
                        Side::Forward => mi.iter().all(|&i| i + 1 < n),
                        Side::Backward => mi.iter().all(|&i| i >= 1),
                    };
                    if !ok {
                        continue;
                    }
                    let mut d = [0.0; 3];
                    for a in 0..3 {
                        let st = grid.stride(a);
                        d[a] = op.sqrt_mu()[idx]
                            * match side {
                                Side::Forward => (q[idx + st] - q[idx]) / h,
                                Side::Backward => (q[idx] - q[idx - st]) / h,
                            };
                    }
                    let m = op.sigma_lattice(*side, idx);
                    let _ = s;
                    for i in 0..3 {
                        for j in 0..3 {
                            rhs -= 0.5 * grid.weight(idx) * m[i][j] * d[i] * d[j];
                        }
                    }
                }
            }
            assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs(), "{lhs} {rhs}");
        }
    }

    #[test]
    fn k_vanishes_on_sqrt_mu_and_matches_moved_derivative_oracle() {
        // K(v₁√μ) = -√μ (∂_i σ^{i1} - v_i σ^{i1}) with σ from the semi-analytic tables.
        let mut errors = vec![];
        for n in [12, 24] {
            let grid = VelocityGrid::new(n, 8.0).unwrap();
            let op = CollisionOperator::from_grid(&grid);
            let k0 = op.apply_k(op.sqrt_mu()).unwrap();
            assert!(k0.iter().all(|x| x.abs() < 1e-14));
            let e1: Vec<f64> = grid.nodes().zip(op.sqrt_mu()).map(|(v, s)| v[0] * s).collect();
            let k = op.apply_k(&e1).unwrap();
            let t = op.tables();
            let col: Vec<[f64; 3]> = (0..grid.len()).map(|idx| [t.sigma[idx][0][0], t.sigma[idx][1][0], t.sigma[idx][2][0]]).collect();
            let div = crate::kernel::divergence(&grid, &col);
            let oracle: Vec<f64> = (0..grid.len())
                .map(|idx| -op.sqrt_mu()[idx] * (div[idx] - t.sigma_i[idx][0]))
                .collect();
            let diff: Vec<f64> = k.iter().zip(&oracle).map(|(a, b)| a - b).collect();
            errors.push(l2(&grid, &diff) / l2(&grid, &oracle));
        }
        // Second-order consistency; the constant is large because μ varies by
        // a factor e^{h|v|} between neighbouring nodes.
        assert!(errors[1] < 0.3, "{errors:?}");
        assert!(errors[1] < errors[0] / 3.0, "{errors:?}");
    }

    #[test]
    fn gamma_conserves_mass_and_pair_conserves_momentum_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut sym_err = vec![];
        for n in [12, 20] {
            let grid = VelocityGrid::new(n, 8.0).unwrap();
            let op = CollisionOperator::from_grid(&grid);
            let mut rng_local = rng.clone();
            let g = random_smooth(&grid, &mut rng_local);
            let f = random_smooth(&grid, &mut rng_local);
            let gf = op.apply_gamma(&g, &f).unwrap();
            let fg = op.apply_gamma(&f, &g).unwrap();
            let inv = collision_invariants(&grid);
            let scale = l2(&grid, &g) * l2(&grid, &f);
            assert!(grid.inner(&gf, &inv[0]).abs() <= 1e-13 * scale);
            let mut worst: f64 = 0.0;
            for e in &inv[1..] {
                let s: Vec<f64> = gf.iter().zip(&fg).map(|(a, b)| a + b).collect();
                worst = worst.max(grid.inner(&s, e).abs() / scale);
            }
            sym_err.push(worst);
        }
        rng.gen::<u8>();
        assert!(sym_err[1] < 1e-2, "{sym_err:?}");
    }

    #[test]
    fn abar_plus_kbar_reproduces_rearranged_operator() {
        let grid = VelocityGrid::new(8, 8.0).unwrap();
        let op = CollisionOperator::from_grid(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g: Vec<f64> = grid.nodes().map(|v| 0.01 * (1.0 + norm_sq(v).sqrt()).powi(-3)).collect();
        let f = random_smooth(&grid, &mut rng);
        let a = op.apply_abar(&g, &f).unwrap();
        let k = op.apply_kbar(&g, &f).unwrap();
        let l = op.apply_l(&f).unwrap();
        let gm = op.apply_gamma(&g, &f).unwrap();
        let scale = l2(&grid, &l);
        for idx in 0..grid.len() {
            assert!((a[idx] + k[idx] + l[idx] - gm[idx]).abs() <= 1e-8 * scale);
        }
        let a0 = op.apply_abar_with(None, 0.0, &f).unwrap();
        let k0 = op.apply_kbar_with(None, 0.0, &f).unwrap();
        for idx in 0..grid.len() {
            assert!((a0[idx] + k0[idx] + l[idx]).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn abar_at_zero_g_approximates_divergence_form() {
        // f = (1 + v₁) e^{-|v|²/4}: ∇·(σ∇f) compared with a centered-difference oracle built
        // from the semi-analytic σ.
        let mut errors = vec![];
        for n in [12, 24] {
            let grid = VelocityGrid::new(n, 8.0).unwrap();
            let op = CollisionOperator::from_grid(&grid);
            let f: Vec<f64> = grid.nodes().map(|v| (1.0 + v[0]) * (-0.25 * norm_sq(v)).exp()).collect();
            let a = op.apply_abar_with(None, 0.0, &f).unwrap();
            let grad = centered_gradient(&grid, &f);
            let t = op.tables();
            let flux: Vec<[f64; 3]> = (0..grid.len())
                .map(|idx| {
                    let mut out = [0.0; 3];
                    for i in 0..3 {
                        for j in 0..3 {
                            out[i] += t.sigma[idx][i][j] * grad[j][idx];
                        }
                    }
                    out
                })
                .collect();
            let oracle = crate::kernel::divergence(&grid, &flux);
            let diff: Vec<f64> = a.iter().zip(&oracle).map(|(x, y)| x - y).collect();
            errors.push(l2(&grid, &diff) / l2(&grid, &oracle));
        }
        assert!(errors[1] < errors[0] / 3.0, "{errors:?}");
        assert!(errors[1] < 0.3, "{errors:?}");
    }

    #[test]
    fn large_g_breaks_positivity() {
        let grid = VelocityGrid::new(8, 8.0).unwrap();
        let op = CollisionOperator::from_grid(&grid);
        let g: Vec<f64> = grid.nodes().map(|v| -100.0 * crate::grid::sqrt_maxwellian(v)).collect();
        let f = vec![0.0; grid.len()];
        match op.apply_abar(&g, &f) {
            Err(Error::NotPositiveSemidefinite { nodes, .. }) => assert!(!nodes.is_empty()),
            other => panic!("expected positivity failure, got {other:?}"),
        }
    }

    #[test]
    fn assembled_matrix_matches_apply_and_has_five_dimensional_kernel() {
        let grid = VelocityGrid::new(6, 6.0).unwrap();
        let op = CollisionOperator::from_grid(&grid);
        let asm = assemble_l(&op).unwrap();
        assert!(asm.symmetry_defect < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_rough(&grid, &mut rng);
        let a = asm.apply(&f).unwrap();
        let b = op.apply_l(&f).unwrap();
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        assert!(l2(&grid, &diff) <= 1e-10 * l2(&grid, &b));
        let ev = asm.eigenvalues();
        let top = ev[ev.len() - 1];
        assert!(ev[..5].iter().all(|e| e.abs() < 1e-12 * top), "{:?}", &ev[..7]);
        assert!(ev[5] > 1e6 * ev[..5].iter().fold(0.0f64, |m, e| m.max(e.abs())), "{:?}", &ev[..7]);
    }

    #[test]
    fn sparse_columns_match_matrix_free_application() {
        let grid = VelocityGrid::new(7, 6.0).unwrap();
        let op = CollisionOperator::from_grid(&grid);
        let kernel = LatticeKernel::new(&grid);
        let w = grid.weights();
        for k in [0, 3, 57, 171, 200, grid.len() - 1] {
            let mut unit = vec![0.0; grid.len()];
            unit[k] = 1.0;
            let reference = op.apply_l(&unit).unwrap();
            let col = op.weighted_l_column(k, &kernel);
            let scale = reference.iter().map(|x| x.abs()).fold(0.0, f64::max);
            for i in 0..grid.len() {
                assert!((col[i] / w[i] - reference[i]).abs() <= 1e-11 * scale, "column {k} row {i}");
            }
        }
    }

    #[test]
    fn assembly_memory_guard() {
        let grid = VelocityGrid::new(21, 8.0).unwrap();
        let op = CollisionOperator::from_grid(&grid);
        assert!(matches!(assemble_l(&op), Err(Error::MemoryGuard { n: 21, .. })));
    }
}
