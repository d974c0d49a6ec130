//! Spatial domains with specular walls and phase-space fields on them.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::VelocityGrid;

/// Characteristics reflecting more often than this in one step are rejected.
pub const MAX_REFLECTIONS: usize = 1_000_000;

/// Bounded spatial domain `Ω = {ζ < 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    /// `0 < x₁ < length`, uniform in `x₂, x₃`; `cells` cells along `x₁`.
    Slab { length: f64, cells: usize },
    /// `|x| < radius` in the plane, uniform in `x₃`; `cells × cells` Cartesian
    /// cells on `[-radius, radius]²`, those with centers inside the disk active.
    Disk { radius: f64, cells: usize },
}

impl Domain {
    pub fn validate(&self) -> Result<()> {
        let (size, cells) = match *self {
            Domain::Slab { length, cells } => (length, cells),
            Domain::Disk { radius, cells } => (radius, cells),
        };
        if !(size.is_finite() && size > 0.0) {
            return Err(Error::InvalidGrid(format!("domain size must be positive, got {size}")));
        }
        if cells < 2 {
            return Err(Error::InvalidGrid(format!("domain needs at least 2 cells, got {cells}")));
        }
        Ok(())
    }

    /// `ζ(x)`: negative inside, zero on the wall.
    pub fn zeta(&self, x: [f64; 2]) -> f64 {
        match *self {
            Domain::Slab { length, .. } => x[0] * (x[0] - length),
            Domain::Disk { radius, .. } => x[0] * x[0] + x[1] * x[1] - radius * radius,
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            Domain::Slab { length, .. } => length,
            Domain::Disk { radius, .. } => 2.0 * radius,
        }
    }

    /// Spatial dimension of the mesh (1 or 2).
    pub fn dimension(&self) -> usize {
        match self {
            Domain::Slab { .. } => 1,
            Domain::Disk { .. } => 2,
        }
    }

    /// Cell size of the mesh.
    pub fn cell_size(&self) -> f64 {
        match *self {
            Domain::Slab { length, cells } => length / cells as f64,
            Domain::Disk { radius, cells } => 2.0 * radius / cells as f64,
        }
    }

    /// Whether the domain admits a rigid rotation about the `x₃` axis.
    pub fn rotationally_symmetric(&self) -> bool {
        matches!(self, Domain::Disk { .. })
    }
}

/// `∇ζ/|∇ζ|` at a boundary point, embedded in 3-space.
pub fn outward_normal(domain: &Domain, x: [f64; 2]) -> Result<[f64; 3]> {
    let tol = 0.5 * domain.cell_size();
    match *domain {
        Domain::Slab { length, .. } => {
            if x[0].abs() <= tol {
                Ok([-1.0, 0.0, 0.0])
            } else if (x[0] - length).abs() <= tol {
                Ok([1.0, 0.0, 0.0])
            } else {
                Err(Error::NotOnBoundary(x))
            }
        }
        Domain::Disk { radius, .. } => {
            let r = x[0].hypot(x[1]);
            if (r - radius).abs() > tol || r == 0.0 {
                return Err(Error::NotOnBoundary(x));
            }
            Ok([x[0] / r, x[1] / r, 0.0])
        }
    }
}

/// `v - 2 (v·n) n`.
pub fn specular_reflect(n: [f64; 3], v: [f64; 3]) -> [f64; 3] {
    let vn = n[0] * v[0] + n[1] * v[1] + n[2] * v[2];
    [v[0] - 2.0 * vn * n[0], v[1] - 2.0 * vn * n[1], v[2] - 2.0 * vn * n[2]]
}

/// End point of a characteristic after time `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trace {
    pub x: [f64; 2],
    pub v: [f64; 3],
    pub reflections: usize,
}

/// Straight-line motion for time `dt` with specular reflection at the wall.
pub fn trace_characteristic(domain: &Domain, x: [f64; 2], v: [f64; 3], dt: f64) -> Result<Trace> {
    match *domain {
        Domain::Slab { length, .. } => {
            let y = x[0] + v[0] * dt;
            let k = (y / length).floor();
            let count = k.abs();
            if count > MAX_REFLECTIONS as f64 {
                return Err(Error::TooManyReflections {
                    limit: MAX_REFLECTIONS,
                    x,
                    v,
                });
            }
            let odd = (k as i64).rem_euclid(2) == 1;
            let x1 = if odd { (k + 1.0) * length - y } else { y - k * length };
            let v1 = if odd { -v[0] } else { v[0] };
            Ok(Trace {
                x: [x1.clamp(0.0, length), x[1] + v[1] * dt],
                v: [v1, v[1], v[2]],
                reflections: count as usize,
            })
        }
        Domain::Disk { radius, .. } => {
            let mut p = x;
            let mut w = v;
            let mut remaining = dt;
            let mut reflections = 0;
            let a = w[0] * w[0] + w[1] * w[1];
            if a == 0.0 {
                return Ok(Trace { x, v, reflections: 0 });
            }
            let r2 = radius * radius;
            loop {
                let b = 2.0 * (p[0] * w[0] + p[1] * w[1]);
                let c = (p[0] * p[0] + p[1] * p[1] - r2).min(0.0);
                let disc = (b * b - 4.0 * a * c).max(0.0);
                // Positive root of a t² + b t + c, written to avoid cancellation.
                let t_hit = if b <= 0.0 {
                    (-b + disc.sqrt()) / (2.0 * a)
                } else {
                    let denom = -b - disc.sqrt();
                    if denom == 0.0 {
                        0.0
                    } else {
                        2.0 * c / denom
                    }
                };
                if t_hit >= remaining {
                    p = [p[0] + remaining * w[0], p[1] + remaining * w[1]];
                    break;
                }
                p = [p[0] + t_hit * w[0], p[1] + t_hit * w[1]];
                let r = p[0].hypot(p[1]);
                p = [p[0] * radius / r, p[1] * radius / r];
                let n = [p[0] / radius, p[1] / radius, 0.0];
                w = specular_reflect(n, w);
                remaining -= t_hit;
                reflections += 1;
                if reflections > MAX_REFLECTIONS {
                    return Err(Error::TooManyReflections {
                        limit: MAX_REFLECTIONS,
                        x,
                        v,
                    });
                }
            }
            Ok(Trace { x: p, v: w, reflections })
        }
    }
}

/// Sample points and quadrature volumes of the spatial mesh.
///
/// Slab cells are uniform. Disk cells are the squares of a Cartesian grid on
/// `[-R, R]²` that meet the disk; each carries the area of its intersection
/// with the disk and is sampled at the centroid of that intersection, so the
/// cell quadrature integrates linear functions over the true disk exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMesh {
    pub domain: Domain,
    pub centers: Vec<[f64; 2]>,
    pub volumes: Vec<f64>,
    /// Disk only: whether the square lies entirely inside the disk.
    pub full: Vec<bool>,
    /// Disk only: active-cell number for each square (`i * cells + j`), if any.
    pub active_of: Vec<Option<usize>>,
}

/// Squares whose intersection with the disk is smaller than this fraction of
/// a full cell are dropped.
const SLIVER_FRACTION: f64 = 1e-6;

impl SpatialMesh {
    pub fn new(domain: Domain) -> Result<Self> {
        domain.validate()?;
        match domain {
            Domain::Slab { length, cells } => {
                let dx = length / cells as f64;
                Ok(Self {
                    domain,
                    centers: (0..cells).map(|c| [(c as f64 + 0.5) * dx, 0.0]).collect(),
                    volumes: vec![dx; cells],
                    full: vec![true; cells],
                    active_of: Vec::new(),
                })
            }
            Domain::Disk { radius, cells } => {
                let d = 2.0 * radius / cells as f64;
                let mut centers = Vec::new();
                let mut volumes = Vec::new();
                let mut full = Vec::new();
                let mut active_of = vec![None; cells * cells];
                for i in 0..cells {
                    for j in 0..cells {
                        let x0 = i as f64 * d - radius;
                        let y0 = j as f64 * d - radius;
                        let corners_inside = [(x0, y0), (x0 + d, y0), (x0, y0 + d), (x0 + d, y0 + d)]
                            .iter()
                            .all(|&(x, y)| x * x + y * y <= radius * radius);
                        let (area, centroid) = if corners_inside {
                            (d * d, [x0 + 0.5 * d, y0 + 0.5 * d])
                        } else {
                            square_disk_intersection(radius, [x0, x0 + d], [y0, y0 + d])
                        };
                        if area <= SLIVER_FRACTION * d * d {
                            continue;
                        }
                        active_of[i * cells + j] = Some(centers.len());
                        centers.push(centroid);
                        volumes.push(area);
                        full.push(corners_inside);
                    }
                }
                Ok(Self {
                    domain,
                    centers,
                    volumes,
                    full,
                    active_of,
                })
            }
        }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }
}

/// Area and centroid of `[x0, x1] × [y0, y1] ∩ {|x| < R}`.
fn square_disk_intersection(radius: f64, xs: [f64; 2], ys: [f64; 2]) -> (f64, [f64; 2]) {
    let r2 = radius * radius;
    let lo = xs[0].max(-radius);
    let hi = xs[1].min(radius);
    if hi <= lo {
        return (0.0, [0.5 * (xs[0] + xs[1]), 0.5 * (ys[0] + ys[1])]);
    }
    // Breakpoints where the chord crosses the square's horizontal edges.
    let mut cuts = vec![lo, hi];
    for y in ys {
        if y.abs() < radius {
            let x = (r2 - y * y).sqrt();
            for c in [-x, x] {
                if c > lo && c < hi {
                    cuts.push(c);
                }
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rule = crate::quadrature::gauss_legendre(16);
    let (mut area, mut mx, mut my) = (0.0, 0.0, 0.0);
    for seg in cuts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if b <= a {
            continue;
        }
        // Substitution x = a + (b - a) s² clusters nodes where the chord has a
        // square-root endpoint; applied at both ends by splitting in half.
        let mid = 0.5 * (a + b);
        for (p, q, flip) in [(a, mid, false), (b, mid, true)] {
            let span = (q - p).abs();
            for (t, w) in rule.0.iter().zip(&rule.1) {
                let s = 0.5 * (t + 1.0);
                let x = if flip { p - span * s * s } else { p + span * s * s };
                let jac = 0.5 * w * 2.0 * span * s;
                let half = (r2 - x * x).max(0.0).sqrt();
                let top = ys[1].min(half);
                let bottom = ys[0].max(-half);
                if top <= bottom {
                    continue;
                }
                let len = top - bottom;
                area += jac * len;
                mx += jac * len * x;
                my += jac * 0.5 * (top * top - bottom * bottom);
            }
        }
    }
    if area <= 0.0 {
        return (0.0, [0.5 * (xs[0] + xs[1]), 0.5 * (ys[0] + ys[1])]);
    }
    (area, [mx / area, my / area])
}

/// Perturbation `f(x, v)` stored cell-major: `values[cell * n³ + node]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionField {
    pub mesh: SpatialMesh,
    pub grid: VelocityGrid,
    pub values: Vec<f64>,
}

impl DistributionField {
    pub fn zeros(mesh: SpatialMesh, grid: VelocityGrid) -> Self {
        let len = mesh.len() * grid.len();
        Self {
            mesh,
            grid,
            values: vec![0.0; len],
        }
    }

    pub fn from_fn<F: Fn([f64; 2], [f64; 3]) -> f64>(mesh: SpatialMesh, grid: VelocityGrid, f: F) -> Self {
        let mut out = Self::zeros(mesh, grid);
        let nv = out.grid.len();
        for c in 0..out.mesh.len() {
            let x = out.mesh.centers[c];
            for idx in 0..nv {
                out.values[c * nv + idx] = f(x, out.grid.node(idx));
            }
        }
        out
    }

    pub fn with_values(mesh: SpatialMesh, grid: VelocityGrid, values: Vec<f64>) -> Result<Self> {
        check_len(mesh.len() * grid.len(), values.len())?;
        Ok(Self { mesh, grid, values })
    }

    pub fn cells(&self) -> usize {
        self.mesh.len()
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        let nv = self.grid.len();
        &self.values[c * nv..(c + 1) * nv]
    }

    pub fn cell_mut(&mut self, c: usize) -> &mut [f64] {
        let nv = self.grid.len();
        &mut self.values[c * nv..(c + 1) * nv]
    }

    /// Phase-space inner product `Σ_x vol Σ_v w f g`.
    pub fn inner(&self, other: &[f64]) -> Result<f64> {
        check_len(self.values.len(), other.len())?;
        let nv = self.grid.len();
        let w = self.grid.weights();
        let vol = &self.mesh.volumes;
        Ok(crate::norms::compensated_sum(
            (0..self.values.len()).map(|k| vol[k / nv] * w[k % nv] * self.values[k] * other[k]),
        ))
    }

    pub fn norm(&self) -> f64 {
        self.inner(&self.values).expect("same field").sqrt()
    }

    pub fn same_shape(&self, other: &DistributionField) -> bool {
        self.mesh == other.mesh && self.grid.same_as(&other.grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normals() {
        let slab = Domain::Slab { length: 1.0, cells: 8 };
        assert_eq!(outward_normal(&slab, [1.0, 0.0]).unwrap(), [1.0, 0.0, 0.0]);
        assert_eq!(outward_normal(&slab, [0.0, 0.0]).unwrap(), [-1.0, 0.0, 0.0]);
        assert!(outward_normal(&slab, [0.5, 0.0]).is_err());
        let disk = Domain::Disk { radius: 1.0, cells: 8 };
        assert_eq!(outward_normal(&disk, [0.0, 1.0]).unwrap(), [0.0, 1.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let n = outward_normal(&disk, [th.cos(), th.sin()]).unwrap();
            assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-12);
            assert!((n[0] * -th.sin() + n[1] * th.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn reflection_is_isometric_involution() {
        assert_eq!(specular_reflect([1.0, 0.0, 0.0], [-1.0, 2.0, 3.0]), [1.0, 2.0, 3.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let n = [th.cos(), th.sin(), 0.0];
            let v = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let r = specular_reflect(n, v);
            let rr = specular_reflect(n, r);
            let nv: f64 = v.iter().map(|x| x * x).sum();
            let nr: f64 = r.iter().map(|x| x * x).sum();
            assert!((nv - nr).abs() <= 1e-14 * nv.max(1.0));
            for k in 0..3 {
                assert!((rr[k] - v[k]).abs() <= 1e-14 * nv.sqrt().max(1.0));
            }
        }
    }

    #[test]
    fn slab_trace_examples() {
        let slab = Domain::Slab { length: 1.0, cells: 8 };
        let t = trace_characteristic(&slab, [0.5, 0.0], [1.0, 0.0, 0.0], 1.0).unwrap();
        assert!((t.x[0] - 0.5).abs() < 1e-15);
        assert_eq!(t.v, [-1.0, 0.0, 0.0]);
        assert_eq!(t.reflections, 1);
        let t = trace_characteristic(&slab, [0.3, 0.0], [0.0, 2.0, 1.0], 1.0).unwrap();
        assert_eq!(t.x[0], 0.3);
        assert_eq!(t.reflections, 0);
    }

    #[test]
    fn slab_trace_is_reversible() {
        let slab = Domain::Slab { length: 1.0, cells: 8 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x = [rng.gen_range(0.0..1.0), 0.0];
            let v = [rng.gen_range(-8.0..8.0), 0.0, 0.0];
            let dt = rng.gen_range(0.0..2.0);
            let t = trace_characteristic(&slab, x, v, dt).unwrap();
            let back = trace_characteristic(&slab, t.x, [-t.v[0], 0.0, 0.0], dt).unwrap();
            assert!((back.x[0] - x[0]).abs() < 1e-13, "{x:?} {v:?} {dt}");
            assert_eq!(back.v[0], -v[0]);
        }
    }

    #[test]
    fn disk_trace_preserves_speed_and_angular_momentum() {
        let disk = Domain::Disk { radius: 1.0, cells: 8 };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let r: f64 = rng.gen_range(0.0..0.99);
            let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let x = [r * th.cos(), r * th.sin()];
            let v = [rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0)];
            let t = trace_characteristic(&disk, x, v, rng.gen_range(0.0..3.0)).unwrap();
            let e0 = v[0] * v[0] + v[1] * v[1];
            let e1 = t.v[0] * t.v[0] + t.v[1] * t.v[1];
            assert!((e0 - e1).abs() <= 1e-12 * e0);
            let l0 = x[0] * v[1] - x[1] * v[0];
            let l1 = t.x[0] * t.v[1] - t.x[1] * t.v[0];
            assert!((l0 - l1).abs() <= 1e-11 * e0.sqrt(), "{l0} {l1}");
            assert!(t.x[0].hypot(t.x[1]) <= 1.0 + 1e-12);
            assert_eq!(t.v[2], v[2]);
        }
    }

    #[test]
    fn disk_mesh_samples_are_inside_and_areas_add_up() {
        for cells in [7, 16, 33] {
            let mesh = SpatialMesh::new(Domain::Disk { radius: 1.3, cells }).unwrap();
            assert!(mesh.centers.iter().all(|&c| mesh.domain.zeta(c) < 0.0));
            let area = mesh.total_volume();
            assert!((area - std::f64::consts::PI * 1.69).abs() < 1e-9, "{area}");
            // First moments vanish by symmetry; second moment matches π R⁴/4.
            let mx: f64 = mesh.centers.iter().zip(&mesh.volumes).map(|(c, v)| c[0] * v).sum();
            assert!(mx.abs() < 1e-9);
        }
    }

    #[test]
    fn quarter_square_intersection() {
        // Unit disk cut by [0, 1]²: area π/4, centroid 4/(3π) on each axis.
        let (a, c) = square_disk_intersection(1.0, [0.0, 1.0], [0.0, 1.0]);
        assert!((a - std::f64::consts::FRAC_PI_4).abs() < 1e-10, "{a}");
        let expect = 4.0 / (3.0 * std::f64::consts::PI);
        assert!((c[0] - expect).abs() < 1e-9 && (c[1] - expect).abs() < 1e-9);
    }
}
