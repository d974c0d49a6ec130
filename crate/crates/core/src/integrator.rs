//! Strang splitting of `∂_t f + v·∇_x f = Ā_g f + K̄_g f`: half transport, a
//! backward-Euler collision step in every cell, half transport.

use faer::dyn_stack::{GlobalPodBuffer, PodStack};
use faer::{Conj, Mat, Parallelism};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{GKind, InitialKind, RunConfig, SnapshotPolicy};
use crate::error::{Error, Result};
use crate::geometry::{DistributionField, Domain, SpatialMesh};
use crate::grid::{norm_sq, sqrt_maxwellian, VelocityGrid};
use crate::krylov::{gmres, minres, SolveStats};
use crate::norms::{compensated_sum, sigma_norm_sq, velocity_weight, weighted_sup};
use crate::operators::{fill_weighted_l, CollisionOperator, GammaCoefficients};
use crate::projection::{build_macro_basis, conserved_modes, project_p, remove_conserved, ConservedModes, MacroBasis};
use crate::transport::transport_step;

/// GMRES restart length for the `g ≠ 0` collision solve.
const RESTART: usize = 40;

/// Largest `n_per_axis` that gets a dense Cholesky factor. Beyond it the
/// factorization (`n⁹/3` flops) outweighs the few MINRES iterations the
/// well-conditioned implicit system needs.
pub const FACTOR_LIMIT: usize = 16;

/// Fixed spatial profile `s(x)` of `g`, with `|s| ≤ 1`.
pub fn spatial_profile(domain: &Domain, x: [f64; 2]) -> f64 {
    match *domain {
        Domain::Slab { length, .. } => (2.0 * std::f64::consts::PI * x[0] / length).cos(),
        Domain::Disk { radius, .. } => (std::f64::consts::PI * (x[0] * x[0] + x[1] * x[1]) / (radius * radius)).cos(),
    }
}

/// Velocity profile `(1+|v|)^{-m-1}` of `g`.
pub fn g_velocity_profile(grid: &VelocityGrid, m: f64) -> Vec<f64> {
    velocity_weight(grid, -m - 1.0)
}

/// Backward-Euler solver for `(I + dt L - dt Γ(s G, ·)) f_next = f` in one cell.
///
/// For `g = 0` the weighted system `(W + dt W L)` is symmetric positive
/// definite; when the grid is small enough it is assembled and factored once
/// (Cholesky), otherwise MINRES is used matrix-free. With `g ≠ 0` the system is
/// solved by GMRES, preconditioned with that factor when it exists.
pub struct CollisionStepper {
    op: CollisionOperator,
    dt: f64,
    tol: f64,
    factor: Option<Mat<f64>>,
    gamma: Option<GammaCoefficients>,
}

impl CollisionStepper {
    pub fn new(op: CollisionOperator, dt: f64, tol: f64, gamma: Option<GammaCoefficients>, dense: bool) -> Result<Self> {
        let factor = if dense && op.grid().n_per_axis() <= FACTOR_LIMIT {
            let len = op.grid().len();
            let mut m = Mat::<f64>::zeros(len, len);
            fill_weighted_l(&op, &mut m, 1.0, dt);
            let req = faer::linalg::cholesky::llt::compute::cholesky_in_place_req::<f64>(len, Parallelism::None, Default::default())
                .expect("stack size");
            let mut mem = GlobalPodBuffer::new(req);
            faer::linalg::cholesky::llt::compute::cholesky_in_place(
                m.as_mut(),
                Default::default(),
                Parallelism::None,
                PodStack::new(&mut mem),
                Default::default(),
            )
            .map_err(|_| Error::NotPositiveSemidefinite {
                nodes: Vec::new(),
                min_eigenvalue: f64::NAN,
            })?;
            Some(m)
        } else {
            None
        };
        Ok(Self {
            op,
            dt,
            tol,
            factor,
            gamma,
        })
    }

    pub fn operator(&self) -> &CollisionOperator {
        &self.op
    }

    pub fn gamma(&self) -> Option<&GammaCoefficients> {
        self.gamma.as_ref()
    }

    pub fn is_dense(&self) -> bool {
        self.factor.is_some()
    }

    fn inner(&self) -> impl Fn(&[f64], &[f64]) -> f64 + '_ {
        |a, b| self.op.grid().inner(a, b)
    }

    /// Solves `(W + dt W L) X = W B` for several columns with the factor.
    fn dense_solve(&self, factor: &Mat<f64>, columns: &[&[f64]]) -> Vec<Vec<f64>> {
        let len = self.op.grid().len();
        let w = self.op.grid().weights();
        let mut rhs = Mat::<f64>::from_fn(len, columns.len(), |i, c| w[i] * columns[c][i]);
        let mut mem = GlobalPodBuffer::new(
            faer::linalg::cholesky::llt::solve::solve_in_place_req::<f64>(len, columns.len(), Parallelism::None).expect("stack size"),
        );
        faer::linalg::cholesky::llt::solve::solve_in_place_with_conj(
            factor.as_ref(),
            Conj::No,
            rhs.as_mut(),
            Parallelism::None,
            PodStack::new(&mut mem),
        );
        (0..columns.len()).map(|c| (0..len).map(|i| rhs.read(i, c)).collect()).collect()
    }

    /// One cell; `scale` multiplies the `g` profile.
    pub fn solve_cell(&self, f: &[f64], scale: f64) -> Result<(Vec<f64>, SolveStats)> {
        let dt = self.dt;
        let op = &self.op;
        match (&self.gamma, scale != 0.0) {
            (Some(coef), true) => {
                // I - dt(Ā_g + K̄_g) = I + dt L - dt Γ(g, ·) by construction of K̄_g.
                let apply = |x: &[f64]| -> Result<Vec<f64>> {
                    let l = op.apply_l(x)?;
                    let g = op.apply_gamma_with(coef, scale, x)?;
                    Ok((0..x.len()).map(|i| x[i] + dt * (l[i] - g[i])).collect())
                };
                let precond = |x: &[f64]| -> Result<Vec<f64>> {
                    Ok(match &self.factor {
                        Some(m) => self.dense_solve(m, &[x]).pop().expect("one column"),
                        None => x.to_vec(),
                    })
                };
                gmres(apply, precond, self.inner(), f, self.tol, RESTART)
            }
            _ => match &self.factor {
                Some(m) => Ok((
                    self.dense_solve(m, &[f]).pop().expect("one column"),
                    SolveStats {
                        iterations: 1,
                        history: Vec::new(),
                    },
                )),
                None => {
                    let apply = |x: &[f64]| -> Result<Vec<f64>> {
                        let l = op.apply_l(x)?;
                        Ok((0..x.len()).map(|i| x[i] + dt * l[i]).collect())
                    };
                    minres(apply, self.inner(), f, self.tol)
                }
            },
        }
    }

    /// Collision step in every cell; returns the largest iteration count.
    pub fn step(&self, f: &DistributionField, scales: &[f64]) -> Result<(DistributionField, usize)> {
        let mut out = f.clone();
        let cells = f.cells();
        let plain: Vec<usize> = (0..cells).filter(|&c| self.gamma.is_none() || scales[c] == 0.0).collect();
        let mut iterations = 0;
        if let (Some(m), false) = (&self.factor, plain.is_empty()) {
            let cols: Vec<&[f64]> = plain.iter().map(|&c| f.cell(c)).collect();
            for (c, x) in plain.iter().zip(self.dense_solve(m, &cols)) {
                out.cell_mut(*c).copy_from_slice(&x);
            }
            iterations = 1;
        }
        let rest: Vec<usize> = (0..cells)
            .filter(|c| self.factor.is_none() || !plain.contains(c))
            .collect();
        let solved: Vec<Result<(Vec<f64>, SolveStats)>> =
            rest.par_iter().map(|&c| self.solve_cell(f.cell(c), scales[c])).collect();
        for (&c, r) in rest.iter().zip(solved) {
            let (x, stats) = r?;
            iterations = iterations.max(stats.iterations);
            out.cell_mut(c).copy_from_slice(&x);
        }
        Ok((out, iterations))
    }
}

/// One recorded time of the energy ledger.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerRow {
    pub step: usize,
    pub t: f64,
    /// `‖f‖_{2,θ}` per tracked weight.
    pub l2: Vec<f64>,
    /// `‖f‖_{σ,θ}` per tracked weight.
    pub sigma: Vec<f64>,
    /// `E_θ(t) = ‖f(t)‖²_{2,θ} + ∫₀ᵗ ‖f‖²_{σ,θ}`, trapezoid in time.
    pub energy: Vec<f64>,
    /// Conserved-mode coefficients `(f, m_k)` divided by `‖f(0)‖₂`.
    pub moments: Vec<f64>,
    /// `Σ_x (L f, f)`.
    pub dissipation: f64,
    pub p_sigma_sq: f64,
    pub q_sigma_sq: f64,
    /// `Σ_x (Γ(g, f), f)`.
    pub gamma_work: f64,
    /// Largest moment change of a transport half step since the previous row,
    /// before any correction, relative to `‖f(0)‖₂`.
    pub transport_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyLedger {
    pub theta: Vec<f64>,
    pub moment_names: Vec<String>,
    pub rows: Vec<LedgerRow>,
}

impl EnergyLedger {
    pub fn theta_index(&self, theta: f64) -> Option<usize> {
        self.theta.iter().position(|&t| (t - theta).abs() < 1e-12)
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    /// Largest `|moment|` over rows, per conserved mode.
    pub fn max_moment_drift(&self) -> Vec<f64> {
        (0..self.moment_names.len())
            .map(|k| {
                let m0 = self.rows.first().map(|r| r.moments[k]).unwrap_or(0.0);
                self.rows.iter().map(|r| (r.moments[k] - m0).abs()).fold(0.0, f64::max)
            })
            .collect()
    }
}

/// Deterministic facts about a finished run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub steps: usize,
    pub cells: usize,
    pub velocity_nodes: usize,
    pub dense_collision_solve: bool,
    pub max_solver_iterations: usize,
    pub initial_l2: f64,
    pub final_l2: f64,
    /// `‖f₀‖_{∞,θ+m}` for `θ = initial.scale_theta`.
    pub initial_sup: f64,
    /// `‖g‖_{∞,m}`.
    pub g_sup: f64,
    pub max_moment_drift: Vec<(String, f64)>,
    pub max_transport_defect: f64,
    pub dt_warning: Option<String>,
}

pub struct RunOutput {
    pub ledger: EnergyLedger,
    pub snapshots: Vec<(usize, f64, DistributionField)>,
    pub summary: RunSummary,
}

/// Everything fixed for the duration of a run.
pub struct Simulation {
    pub config: RunConfig,
    pub mesh: SpatialMesh,
    pub grid: VelocityGrid,
    pub stepper: CollisionStepper,
    pub basis: MacroBasis,
    pub modes: ConservedModes,
    /// `ε s(x)` per cell (zero when `g = 0`).
    pub g_scales: Vec<f64>,
}

impl Simulation {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let mesh = SpatialMesh::new(config.domain())?;
        let grid = config.velocity_grid()?;
        let op = CollisionOperator::from_grid(&grid);
        let (gamma, g_scales) = match config.g.kind {
            GKind::Zero => (None, vec![0.0; mesh.len()]),
            GKind::Profile => {
                let coef = op.gamma_coefficients(&g_velocity_profile(&grid, config.g.m))?;
                let eps = config.g.epsilon;
                op.check_sigma_g(&coef, eps)?;
                op.check_sigma_g(&coef, -eps)?;
                let scales = mesh.centers.iter().map(|&x| eps * spatial_profile(&mesh.domain, x)).collect();
                (Some(coef), scales)
            }
        };
        let stepper = CollisionStepper::new(op, config.time.dt, config.time.solver_tol, gamma, config.time.collisions)?;
        let basis = build_macro_basis(&grid)?;
        let template = DistributionField::zeros(mesh.clone(), grid.clone());
        let modes = conserved_modes(&template)?;
        Ok(Self {
            config,
            mesh,
            grid,
            stepper,
            basis,
            modes,
            g_scales,
        })
    }

    /// `g(x, v)` on the phase-space grid.
    pub fn g_field(&self) -> DistributionField {
        let profile = g_velocity_profile(&self.grid, self.config.g.m);
        let mut out = DistributionField::zeros(self.mesh.clone(), self.grid.clone());
        if self.config.g.kind == GKind::Profile {
            for c in 0..self.mesh.len() {
                for (o, p) in out.cell_mut(c).iter_mut().zip(&profile) {
                    *o = self.g_scales[c] * p;
                }
            }
        }
        out
    }

    pub fn initial_data(&self) -> Result<DistributionField> {
        initial_data(&self.config, &self.mesh, &self.grid, &self.basis, &self.modes)
    }

    fn transport_half(&self, f: &DistributionField, dt: f64, defect: &mut f64, scale: f64) -> Result<DistributionField> {
        let before = self.modes.moments(f)?;
        let mut out = transport_step(f, dt)?;
        let after = self.modes.moments(&out)?;
        let change: Vec<f64> = before.iter().zip(&after).map(|(b, a)| b - a).collect();
        *defect = change.iter().map(|c| c.abs() / scale).fold(*defect, f64::max);
        if self.config.time.moment_fix {
            self.modes.add_combination(&mut out, &change);
        }
        Ok(out)
    }

    /// Transport `dt/2`, collide `dt`, transport `dt/2`.
    pub fn strang_step(&self, f: &DistributionField, defect: &mut f64, scale: f64) -> Result<(DistributionField, usize)> {
        let dt = self.config.time.dt;
        let half = self.transport_half(f, 0.5 * dt, defect, scale)?;
        let (collided, iterations) = if self.config.time.collisions {
            self.stepper.step(&half, &self.g_scales)?
        } else {
            (half, 0)
        };
        Ok((self.transport_half(&collided, 0.5 * dt, defect, scale)?, iterations))
    }

    /// Ledger quantities of one field except the running energy.
    pub fn measure(&self, f: &DistributionField, norm0: f64) -> Result<LedgerRow> {
        let theta = &self.config.checks.theta;
        let tables = self.stepper.operator().tables();
        let op = self.stepper.operator();
        let weights: Vec<Vec<f64>> = theta.iter().map(|&t| velocity_weight(&self.grid, 2.0 * t)).collect();
        let w = self.grid.weights();
        let per_cell: Vec<Result<Vec<f64>>> = (0..f.cells())
            .into_par_iter()
            .map(|c| {
                let x = f.cell(c);
                let mut vals = Vec::with_capacity(2 * theta.len() + 4);
                for wt in &weights {
                    vals.push(compensated_sum((0..x.len()).map(|i| w[i] * wt[i] * x[i] * x[i])));
                }
                for &t in theta {
                    vals.push(sigma_norm_sq(tables, x, t)?);
                }
                vals.push(op.dissipation(x)?);
                let (pf, _) = project_p(x, &self.basis)?;
                let qf: Vec<f64> = x.iter().zip(&pf).map(|(a, b)| a - b).collect();
                vals.push(sigma_norm_sq(tables, &pf, 0.0)?);
                vals.push(sigma_norm_sq(tables, &qf, 0.0)?);
                let gw = match self.stepper.gamma() {
                    Some(coef) if self.g_scales[c] != 0.0 => {
                        let gx = op.apply_gamma_with(coef, self.g_scales[c], x)?;
                        self.grid.inner(&gx, x)
                    }
                    _ => 0.0,
                };
                vals.push(gw);
                Ok(vals)
            })
            .collect();
        let per_cell: Vec<Vec<f64>> = per_cell.into_iter().collect::<Result<_>>()?;
        let vol = &self.mesh.volumes;
        let total = |k: usize| compensated_sum(per_cell.iter().zip(vol).map(|(v, dv)| dv * v[k]));
        let nt = theta.len();
        let moments = self.modes.moments(f)?.into_iter().map(|m| m / norm0).collect();
        Ok(LedgerRow {
            step: 0,
            t: 0.0,
            l2: (0..nt).map(|k| total(k).max(0.0).sqrt()).collect(),
            sigma: (0..nt).map(|k| total(nt + k).max(0.0).sqrt()).collect(),
            energy: vec![0.0; nt],
            moments,
            dissipation: total(2 * nt),
            p_sigma_sq: total(2 * nt + 1),
            q_sigma_sq: total(2 * nt + 2),
            gamma_work: total(2 * nt + 3),
            transport_defect: 0.0,
        })
    }

    /// Runs from `f0`, calling `observer` after each recorded row (with the
    /// field when a snapshot is due). Errors abort the run; rows already
    /// passed to the observer remain valid.
    pub fn run_from<O>(&self, f0: DistributionField, mut observer: O) -> Result<RunOutput>
    where
        O: FnMut(&LedgerRow, Option<&DistributionField>) -> Result<()>,
    {
        let steps = self.config.steps();
        let stride = self.config.output.snapshot_stride;
        let norm0 = f0.norm();
        let scale = if norm0 > 0.0 { norm0 } else { 1.0 };
        let policy = self.config.output.snapshots;
        let mut ledger = EnergyLedger {
            theta: self.config.checks.theta.clone(),
            moment_names: self.modes.names.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        };
        let mut snapshots = Vec::new();
        let mut integral = vec![0.0; ledger.theta.len()];
        let mut record = |ledger: &mut EnergyLedger, f: &DistributionField, step: usize, defect: f64| -> Result<()> {
            let mut row = self.measure(f, scale)?;
            row.step = step;
            row.t = step as f64 * self.config.time.dt;
            row.transport_defect = defect;
            if let Some(prev) = ledger.rows.last() {
                for k in 0..integral.len() {
                    integral[k] += 0.5 * (row.t - prev.t) * (row.sigma[k].powi(2) + prev.sigma[k].powi(2));
                }
            }
            for k in 0..integral.len() {
                row.energy[k] = row.l2[k].powi(2) + integral[k];
            }
            let snap = match policy {
                SnapshotPolicy::None => false,
                SnapshotPolicy::Ends => step == 0 || step == steps,
                SnapshotPolicy::All => true,
            };
            observer(&row, snap.then_some(f))?;
            if snap {
                snapshots.push((step, row.t, f.clone()));
            }
            ledger.rows.push(row);
            Ok(())
        };
        record(&mut ledger, &f0, 0, 0.0)?;
        let mut f = f0;
        let mut defect = 0.0;
        let mut max_iterations = 0;
        for step in 1..=steps {
            let (next, iterations) = self
                .strang_step(&f, &mut defect, scale)
                .map_err(|e| Error::Step {
                    step,
                    source: Box::new(e),
                })?;
            f = next;
            max_iterations = max_iterations.max(iterations);
            if step % stride == 0 || step == steps {
                record(&mut ledger, &f, step, defect)?;
                defect = 0.0;
            }
        }
        let theta0 = self.config.initial.scale_theta;
        let m = self.config.g.m;
        let first = &snapshots.first().map(|s: &(usize, f64, DistributionField)| s.2.clone());
        let initial_sup = match first {
            Some(f0) => sup_norm(f0, theta0 + m)?,
            None => f64::NAN,
        };
        let summary = RunSummary {
            steps,
            cells: self.mesh.len(),
            velocity_nodes: self.grid.len(),
            dense_collision_solve: self.stepper.is_dense(),
            max_solver_iterations: max_iterations,
            initial_l2: norm0,
            final_l2: f.norm(),
            initial_sup,
            g_sup: sup_norm(&self.g_field(), m)?,
            max_moment_drift: ledger.moment_names.iter().cloned().zip(ledger.max_moment_drift()).collect(),
            max_transport_defect: ledger.rows.iter().map(|r| r.transport_defect).fold(0.0, f64::max),
            dt_warning: crate::transport::dt_warning(&self.mesh.domain, &self.grid, self.config.time.dt),
        };
        Ok(RunOutput {
            ledger,
            snapshots,
            summary,
        })
    }
}

/// `max over cells of ‖f(x, ·)‖_{∞,m}`.
pub fn sup_norm(f: &DistributionField, m: f64) -> Result<f64> {
    (0..f.cells()).try_fold(0.0, |acc: f64, c| Ok(acc.max(weighted_sup(&f.grid, f.cell(c), m)?)))
}

/// Velocity monomial exponents of total degree ≤ 3.
fn monomials() -> Vec<[i32; 3]> {
    let mut out = Vec::new();
    for deg in 0..=3 {
        for a in (0..=deg).rev() {
            for b in (0..=deg - a).rev() {
                out.push([a, b, deg - a - b]);
            }
        }
    }
    out
}

fn monomial(v: [f64; 3], e: [i32; 3]) -> f64 {
    v[0].powi(e[0]) * v[1].powi(e[1]) * v[2].powi(e[2])
}

/// Smooth random perturbation compatible with the specular condition.
///
/// Slab: `Σ_k cos(kπx/L) p_k(v)` with `p_k` even in `v₁` plus
/// `Σ_k sin(kπx/L) q_k(v)` with `q_k` odd in `v₁`, `k < 4`, so the reflected
/// extension is smooth. Disk: spatial polynomials of degree ≤ 2 times
/// polynomials in the reflection invariants `|v|², v₃, (e₃×x)·v, (x·v)²`,
/// plus `(x·v)(R² - |x|²)` terms that vanish on the wall.
fn random_field(mesh: &SpatialMesh, grid: &VelocityGrid, rng: &mut ChaCha8Rng, x_independent: bool) -> DistributionField {
    let mons = monomials();
    match mesh.domain {
        Domain::Slab { length, .. } => {
            let harmonics = if x_independent { 1 } else { 4 };
            let mut terms: Vec<(bool, usize, [i32; 3], f64)> = Vec::new();
            for k in 0..harmonics {
                for &e in &mons {
                    let even = e[0] % 2 == 0;
                    if x_independent && !even {
                        continue;
                    }
                    if !even && k == 0 {
                        continue;
                    }
                    let c = rng.gen_range(-1.0..1.0) / (1.0 + k as f64) / (1.0 + (e[0] + e[1] + e[2]) as f64);
                    terms.push((even, k, e, c));
                }
            }
            DistributionField::from_fn(mesh.clone(), grid.clone(), |x, v| {
                let s = std::f64::consts::PI * x[0] / length;
                let mut p = 0.0;
                for &(even, k, e, c) in &terms {
                    let xs = if even { (k as f64 * s).cos() } else { (k as f64 * s).sin() };
                    p += c * xs * monomial(v, e);
                }
                p * sqrt_maxwellian(v)
            })
        }
        Domain::Disk { radius, .. } => {
            let spatial = if x_independent { 1 } else { 6 };
            let velocity = 10;
            let c: Vec<f64> = (0..spatial * velocity).map(|_| rng.gen_range(-1.0..1.0)).collect();
            DistributionField::from_fn(mesh.clone(), grid.clone(), |x, v| {
                let (x1, x2) = (x[0] / radius, x[1] / radius);
                let xs = [1.0, x1, x2, x1 * x1, x1 * x2, x2 * x2];
                let rot = x1 * v[1] - x2 * v[0];
                let xv = x1 * v[0] + x2 * v[1];
                let wall = 1.0 - x1 * x1 - x2 * x2;
                let vs = [
                    1.0,
                    v[2],
                    norm_sq(v) / 3.0,
                    v[2] * v[2],
                    rot,
                    rot * v[2],
                    xv * xv,
                    xv * wall,
                    xv * wall * v[2],
                    v[2] * v[2] * v[2] / 3.0,
                ];
                let mut p = 0.0;
                for (i, a) in xs.iter().take(spatial).enumerate() {
                    for (j, b) in vs.iter().enumerate() {
                        p += c[i * velocity + j] * a * b;
                    }
                }
                p * sqrt_maxwellian(v)
            })
        }
    }
}

/// Initial data per `[initial]`, seeded by `config.seed`.
pub fn initial_data(
    config: &RunConfig,
    mesh: &SpatialMesh,
    grid: &VelocityGrid,
    basis: &MacroBasis,
    modes: &ConservedModes,
) -> Result<DistributionField> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = &config.initial;
    let mut f = match init.kind {
        InitialKind::Zero => DistributionField::zeros(mesh.clone(), grid.clone()),
        InitialKind::Random => random_field(mesh, grid, &mut rng, false),
        InitialKind::XIndependent => random_field(mesh, grid, &mut rng, true),
        InitialKind::Microscopic | InitialKind::Macroscopic => {
            let mut f = random_field(mesh, grid, &mut rng, false);
            for c in 0..f.cells() {
                let (pf, _) = project_p(f.cell(c), basis)?;
                let cell = f.cell_mut(c);
                if init.kind == InitialKind::Macroscopic {
                    cell.copy_from_slice(&pf);
                } else {
                    for (x, p) in cell.iter_mut().zip(&pf) {
                        *x -= p;
                    }
                }
            }
            f
        }
        InitialKind::Rotation => {
            let rotation = modes
                .names
                .iter()
                .position(|&n| n == "angular")
                .map(|k| modes.modes[k].clone())
                .ok_or_else(|| Error::config("initial.kind", None, "the rotation mode exists only in the disk"))?;
            let noise = random_field(mesh, grid, &mut rng, false);
            let scale = init.noise * rotation.norm() / noise.norm().max(f64::MIN_POSITIVE);
            let mut f = rotation;
            for (x, y) in f.values.iter_mut().zip(&noise.values) {
                *x += scale * y;
            }
            f
        }
    };
    if init.remove_conserved {
        f = remove_conserved(&f, modes)?;
    }
    let weight = velocity_weight(grid, 2.0 * init.scale_theta);
    let w = grid.weights();
    let current = compensated_sum((0..f.cells()).map(|c| {
        let x = f.cell(c);
        mesh.volumes[c] * compensated_sum((0..x.len()).map(|i| w[i] * weight[i] * x[i] * x[i]))
    }));
    if current > 0.0 {
        let s = (init.energy / current).sqrt();
        for x in f.values.iter_mut() {
            *x *= s;
        }
    }
    Ok(f)
}

/// Builds the simulation, draws the initial data and runs it.
pub fn run_simulation(config: &RunConfig) -> Result<RunOutput> {
    let sim = Simulation::new(config.clone())?;
    let f0 = sim.initial_data()?;
    sim.run_from(f0, |_, _| Ok(()))
}
