//! Semi-Lagrangian free streaming with specular walls.
//!
//! Slab: a specular slab of width `L` is the even part of a periodic domain of
//! width `2L` under `(x₁, v₁) ↦ (2L - x₁, -v₁)`. Each pair `(v, Rv)` is
//! unfolded into one periodic line of `2N` cells and shifted with linear
//! interpolation, which conserves the discrete mass, energy and tangential
//! momenta exactly and never needs velocity interpolation.
//!
//! Disk: backward characteristics are traced exactly through reflections.
//! The foot value is interpolated bilinearly in `x` when the four surrounding
//! cells lie entirely inside the disk, and otherwise by a least-squares plane
//! through the active centres of the surrounding 4×4 block, clamped to the
//! range of those samples. The clamp makes the step nonlinear and costs exact
//! reproduction of linear data where the plane extrapolates past the range,
//! but keeps a discrete maximum principle; without it the wall extrapolation
//! grows the solution over many steps. After a reflection the foot velocity
//! is off the grid; `f/√μ` is interpolated bilinearly in `(v₁, v₂)` and
//! multiplied back by `√μ`.

use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::{trace_characteristic, DistributionField, Domain, SpatialMesh};
use crate::grid::{sqrt_maxwellian, VelocityGrid};

/// Returns a warning when `dt · v_max` exceeds the domain diameter.
pub fn dt_warning(domain: &Domain, grid: &VelocityGrid, dt: f64) -> Option<String> {
    let reach = dt * grid.v_max() * 3f64.sqrt();
    (reach > domain.diameter()).then(|| {
        format!(
            "dt * |v|max = {reach:.3} exceeds the domain diameter {:.3}; characteristics wrap several times per step",
            domain.diameter()
        )
    })
}

/// One transport step of length `dt`.
pub fn transport_step(f: &DistributionField, dt: f64) -> Result<DistributionField> {
    match f.mesh.domain {
        Domain::Slab { .. } => Ok(slab_step(f, dt)),
        Domain::Disk { .. } => disk_step(f, dt),
    }
}

fn slab_step(f: &DistributionField, dt: f64) -> DistributionField {
    let grid = &f.grid;
    let nv = grid.len();
    let cells = f.mesh.len();
    let dx = f.mesh.domain.cell_size();
    let period = 2 * cells;
    // Per velocity node, the new values at every cell.
    let columns: Vec<Vec<f64>> = (0..nv)
        .into_par_iter()
        .map(|idx| {
            let v1 = grid.node(idx)[0];
            if v1 == 0.0 {
                return (0..cells).map(|c| f.values[c * nv + idx]).collect();
            }
            let partner = grid.reflect_first_index(idx);
            let line: Vec<f64> = (0..period)
                .map(|y| {
                    if y < cells {
                        f.values[y * nv + idx]
                    } else {
                        f.values[(period - 1 - y) * nv + partner]
                    }
                })
                .collect();
            let shift = v1 * dt / dx;
            let whole = shift.floor();
            let frac = shift - whole;
            let whole = (whole as i64).rem_euclid(period as i64) as usize;
            (0..cells)
                .map(|y| {
                    // Foot at y - shift lies between cells y - whole - 1 and y - whole.
                    let hi = (y + period - whole) % period;
                    let lo = (hi + period - 1) % period;
                    line[hi] + frac * (line[lo] - line[hi])
                })
                .collect()
        })
        .collect();
    let mut out = DistributionField::zeros(f.mesh.clone(), grid.clone());
    for (idx, col) in columns.iter().enumerate() {
        for (c, value) in col.iter().enumerate() {
            out.values[c * nv + idx] = *value;
        }
    }
    out
}

/// How the foot value is formed from the cells around it.
enum Stencil {
    /// Convex weights: bilinear, or the nearest centre.
    Direct(Vec<(usize, f64)>),
    /// Least-squares plane evaluated at the foot, limited to the sample range.
    Plane(Vec<(usize, f64)>),
}

impl Stencil {
    fn sample(&self, values: &[f64], nv: usize, node: usize) -> f64 {
        match self {
            Stencil::Direct(w) => w.iter().map(|&(cell, w)| w * values[cell * nv + node]).sum(),
            Stencil::Plane(w) => {
                // The plane extrapolates toward the wall. Any widening of the
                // sample range, even one that keeps linear data exact, lets a
                // wall layer grow through the reflected characteristics.
                let (mut value, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
                for &(cell, weight) in w {
                    let x = values[cell * nv + node];
                    value += weight * x;
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
                value.clamp(lo, hi)
            }
        }
    }
}

/// Interpolation stencil over active cells for a point of the disk.
fn disk_stencil(mesh: &SpatialMesh, p: [f64; 2]) -> Stencil {
    let Domain::Disk { radius, cells } = mesh.domain else {
        unreachable!("disk mesh")
    };
    let d = 2.0 * radius / cells as f64;
    let gx = (p[0] + radius) / d - 0.5;
    let gy = (p[1] + radius) / d - 0.5;
    let i0 = gx.floor() as i64;
    let j0 = gy.floor() as i64;
    let active = |i: i64, j: i64| -> Option<usize> {
        if i < 0 || j < 0 || i >= cells as i64 || j >= cells as i64 {
            None
        } else {
            mesh.active_of[i as usize * cells + j as usize]
        }
    };
    let corners = [(i0, j0), (i0 + 1, j0), (i0, j0 + 1), (i0 + 1, j0 + 1)];
    let found: Vec<Option<usize>> = corners.iter().map(|&(i, j)| active(i, j)).collect();
    if found.iter().all(|c| c.is_some_and(|c| mesh.full[c])) {
        let fx = gx - i0 as f64;
        let fy = gy - j0 as f64;
        let w = [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy];
        return Stencil::Direct(found.into_iter().zip(w).map(|(c, w)| (c.unwrap(), w)).collect());
    }
    // Least-squares plane a + b dx + c dy through the active centres of the
    // surrounding 4×4 block.
    let mut pts = Vec::new();
    for i in i0 - 1..=i0 + 2 {
        for j in j0 - 1..=j0 + 2 {
            if let Some(c) = active(i, j) {
                let cx = mesh.centers[c];
                pts.push((c, (cx[0] - p[0]) / d, (cx[1] - p[1]) / d));
            }
        }
    }
    let mut m = [[0.0; 3]; 3];
    for &(_, x, y) in &pts {
        let row = [1.0, x, y];
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] += row[a] * row[b];
            }
        }
    }
    match first_row_of_inverse(&m) {
        Some(r) if pts.len() >= 3 => Stencil::Plane(pts.iter().map(|&(c, x, y)| (c, r[0] + r[1] * x + r[2] * y)).collect()),
        _ => {
            // Degenerate neighbourhood: nearest active centre.
            let nearest = (0..mesh.len())
                .min_by(|&a, &b| {
                    let da = (mesh.centers[a][0] - p[0]).hypot(mesh.centers[a][1] - p[1]);
                    let db = (mesh.centers[b][0] - p[0]).hypot(mesh.centers[b][1] - p[1]);
                    da.total_cmp(&db)
                })
                .expect("nonempty mesh");
            Stencil::Direct(vec![(nearest, 1.0)])
        }
    }
}

fn first_row_of_inverse(m: &[[f64; 3]; 3]) -> Option<[f64; 3]> {
    let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
    let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
    let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
    let scale = m[0][0] * m[1][1] * m[2][2];
    if det.abs() <= 1e-10 * scale.abs().max(1e-300) {
        return None;
    }
    // Symmetric matrix: first row of the inverse equals the first column.
    Some([c00 / det, c01 / det, c02 / det])
}

fn disk_step(f: &DistributionField, dt: f64) -> Result<DistributionField> {
    let grid = &f.grid;
    let mesh = &f.mesh;
    let nv = grid.len();
    let n = grid.n_per_axis();
    let h = grid.spacing();
    let vmax = grid.v_max();
    let sqrt_mu = grid.sqrt_maxwellian_values();
    let rows: Vec<Result<Vec<f64>>> = (0..mesh.len())
        .into_par_iter()
        .map(|c| {
            let x = mesh.centers[c];
            let mut row = vec![0.0; nv];
            for (idx, slot) in row.iter_mut().enumerate() {
                let v = grid.node(idx);
                if v[0] == 0.0 && v[1] == 0.0 {
                    *slot = f.values[c * nv + idx];
                    continue;
                }
                let tr = trace_characteristic(&mesh.domain, x, [-v[0], -v[1], -v[2]], dt)?;
                let stencil = disk_stencil(mesh, tr.x);
                let sample = |node: usize| stencil.sample(&f.values, nv, node);
                if tr.reflections == 0 {
                    *slot = sample(idx);
                    continue;
                }
                let u = [-tr.v[0], -tr.v[1]];
                let k = grid.multi_index(idx)[2];
                let gx = (u[0] + vmax) / h;
                let gy = (u[1] + vmax) / h;
                let i0 = gx.floor();
                let j0 = gy.floor();
                let (fx, fy) = (gx - i0, gy - j0);
                // Rotated velocities can leave the cube; corners outside it
                // are dropped and the rest renormalized, so data constant in
                // (v₁, v₂) stays exact.
                let (mut q, mut total) = (0.0, 0.0);
                for (di, wx) in [(0i64, 1.0 - fx), (1, fx)] {
                    for (dj, wy) in [(0i64, 1.0 - fy), (1, fy)] {
                        let i = i0 as i64 + di;
                        let j = j0 as i64 + dj;
                        if wx * wy == 0.0 || i < 0 || j < 0 || i >= n as i64 || j >= n as i64 {
                            continue;
                        }
                        let node = grid.index(i as usize, j as usize, k);
                        q += wx * wy * sample(node) / sqrt_mu[node];
                        total += wx * wy;
                    }
                }
                if total > 0.0 {
                    q /= total;
                } else {
                    let nearest = |g: f64| (g.round().max(0.0) as usize).min(n - 1);
                    let node = grid.index(nearest(gx), nearest(gy), k);
                    q = sample(node) / sqrt_mu[node];
                }
                *slot = q * sqrt_maxwellian([u[0], u[1], v[2]]);
            }
            Ok(row)
        })
        .collect();
    let mut out = DistributionField::zeros(mesh.clone(), grid.clone());
    for (c, row) in rows.into_iter().enumerate() {
        out.cell_mut(c).copy_from_slice(&row?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{norm_sq, sqrt_maxwellian};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn slab(cells: usize, n: usize) -> (SpatialMesh, VelocityGrid) {
        (
            SpatialMesh::new(Domain::Slab { length: 1.0, cells }).unwrap(),
            VelocityGrid::new(n, 8.0).unwrap(),
        )
    }

    fn mass(f: &DistributionField) -> f64 {
        let sm: Vec<f64> = (0..f.values.len()).map(|k| sqrt_maxwellian(f.grid.node(k % f.grid.len()))).collect();
        f.inner(&sm).unwrap()
    }

    #[test]
    fn x_independent_even_data_is_unchanged_in_slab() {
        let (mesh, grid) = slab(8, 8);
        let f = DistributionField::from_fn(mesh, grid, |_, v| (1.0 + v[0] * v[0] + v[1]) * sqrt_maxwellian(v));
        let g = transport_step(&f, 0.037).unwrap();
        for (a, b) in f.values.iter().zip(&g.values) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }
    }

    #[test]
    fn tangential_mode_is_exactly_steady() {
        let (mesh, grid) = slab(8, 8);
        let f = DistributionField::from_fn(mesh, grid, |_, v| v[1] * sqrt_maxwellian(v));
        let g = transport_step(&f, 0.01).unwrap();
        assert_eq!(f.values, g.values);
    }

    #[test]
    fn slab_transport_conserves_mass_and_is_contractive() {
        let (mesh, grid) = slab(12, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f64> = (0..mesh.len() * grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = DistributionField::with_values(mesh, grid, values).unwrap();
        let g = transport_step(&f, 0.013).unwrap();
        assert!((mass(&f) - mass(&g)).abs() <= 1e-12 * f.norm());
        assert!(g.norm() <= f.norm() * (1.0 + 1e-14));
    }

    #[test]
    fn slab_shift_by_whole_cells_is_exact_translation() {
        let (mesh, grid) = slab(10, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let values: Vec<f64> = (0..mesh.len() * grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = DistributionField::with_values(mesh, grid.clone(), values).unwrap();
        // Full period: every characteristic returns to its start after time 2L/|v₁|,
        // so check one velocity with v₁ = h and dt = 2L/h.
        let nv = grid.len();
        let idx = grid.index(3, 1, 2);
        let v1 = grid.node(idx)[0];
        let g = transport_step(&f, 2.0 / v1).unwrap();
        for c in 0..f.cells() {
            assert!((g.values[c * nv + idx] - f.values[c * nv + idx]).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_mode_is_nearly_steady_in_disk() {
        let mut changes = vec![];
        for cells in [8, 16, 32] {
            let mesh = SpatialMesh::new(Domain::Disk { radius: 1.0, cells }).unwrap();
            let grid = VelocityGrid::new(8, 8.0).unwrap();
            let f = DistributionField::from_fn(mesh, grid, |x, v| (-x[1] * v[0] + x[0] * v[1]) * sqrt_maxwellian(v));
            let g = transport_step(&f, 0.01).unwrap();
            let diff: Vec<f64> = f.values.iter().zip(&g.values).map(|(a, b)| a - b).collect();
            let d = DistributionField::with_values(f.mesh.clone(), f.grid.clone(), diff).unwrap();
            changes.push(d.norm() / f.norm());
        }
        eprintln!("rotation one-step change {changes:?}");
        assert!(changes.iter().all(|&c| c <= 1e-3), "{changes:?}");
    }

    #[test]
    fn velocity_independent_profiles_are_exactly_steady_in_disk() {
        let mesh = SpatialMesh::new(Domain::Disk { radius: 1.0, cells: 12 }).unwrap();
        let grid = VelocityGrid::new(12, 8.0).unwrap();
        for mode in [|_: [f64; 3]| 1.0, |v: [f64; 3]| v[2]] {
            let f = DistributionField::from_fn(mesh.clone(), grid.clone(), |_, v| mode(v) * sqrt_maxwellian(v));
            let g = transport_step(&f, 0.025).unwrap();
            for (a, b) in f.values.iter().zip(&g.values) {
                assert!((a - b).abs() <= 1e-15, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn disk_transport_obeys_maximum_principle() {
        let mesh = SpatialMesh::new(Domain::Disk { radius: 1.0, cells: 10 }).unwrap();
        let grid = VelocityGrid::new(6, 6.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let values: Vec<f64> = (0..mesh.len() * grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sqrt_mu = grid.sqrt_maxwellian_values();
        let nv = grid.len();
        let sup = |f: &DistributionField| {
            f.values.iter().enumerate().map(|(i, x)| (x / sqrt_mu[i % nv]).abs()).fold(0.0, f64::max)
        };
        let mut f = DistributionField::with_values(mesh, grid.clone(), values).unwrap();
        for (i, x) in f.values.iter_mut().enumerate() {
            *x *= sqrt_mu[i % nv];
        }
        let start = sup(&f);
        for _ in 0..40 {
            let g = transport_step(&f, 0.07).unwrap();
            assert!(sup(&g) <= sup(&f) * (1.0 + 1e-12));
            f = g;
        }
        assert!(sup(&f) <= start);
    }

    #[test]
    fn disk_transport_mass_drift_shrinks_under_refinement() {
        let mut drifts = vec![];
        for cells in [12, 24] {
            let mesh = SpatialMesh::new(Domain::Disk { radius: 1.0, cells }).unwrap();
            let grid = VelocityGrid::new(8, 8.0).unwrap();
            let f = DistributionField::from_fn(mesh, grid, |x, v| {
                (0.3 * x[0] - 0.2 * x[1] * x[1] + 0.1 * v[0] + 0.05 * norm_sq(v) * x[0] * x[1]) * sqrt_maxwellian(v)
            });
            let g = transport_step(&f, 0.01).unwrap();
            drifts.push((mass(&f) - mass(&g)).abs() / f.norm());
        }
        eprintln!("disk mass drift per step {drifts:?}");
        assert!(drifts[1] < drifts[0], "{drifts:?}");
    }

    #[test]
    fn dt_guard() {
        let grid = VelocityGrid::new(8, 8.0).unwrap();
        let d = Domain::Slab { length: 1.0, cells: 8 };
        assert!(dt_warning(&d, &grid, 0.01).is_none());
        assert!(dt_warning(&d, &grid, 1.0).is_some());
    }
}
