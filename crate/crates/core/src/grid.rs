//! Truncated, origin-symmetric velocity lattice and the global Maxwellian.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Normalization constant (2π)^{-3/2} of the unit-mass, unit-temperature Maxwellian.
pub const MAXWELL_NORM: f64 = 0.063_493_635_934_240_97;

/// μ(v) = (2π)^{-3/2} exp(-|v|²/2).
pub fn maxwellian(v: [f64; 3]) -> f64 {
    MAXWELL_NORM * (-0.5 * norm_sq(v)).exp()
}

/// √μ(v), evaluated directly so that large |v| does not underflow through μ.
pub fn sqrt_maxwellian(v: [f64; 3]) -> f64 {
    MAXWELL_NORM.sqrt() * (-0.25 * norm_sq(v)).exp()
}

#[inline]
pub fn norm_sq(v: [f64; 3]) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

#[inline]
pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Uniform cube [-v_max, v_max]³ sampled with `n_per_axis` points per axis.
///
/// Node `(i, j, k)` sits at `(-v_max + i h, -v_max + j h, -v_max + k h)` and is
/// stored at flat index `(i n + j) n + k`. Weights are the tensor trapezoid
/// weights, `h³` in the interior and halved once per face the node lies on.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    n: usize,
    v_max: f64,
    spacing: f64,
    axis: Vec<f64>,
    weights: Vec<f64>,
}

impl VelocityGrid {
    pub fn new(n_per_axis: usize, v_max: f64) -> Result<Self> {
        if n_per_axis < 2 {
            return Err(Error::InvalidGrid(format!(
                "n_per_axis must be at least 2, got {n_per_axis}"
            )));
        }
        if !(v_max.is_finite() && v_max > 0.0) {
            return Err(Error::InvalidGrid(format!("v_max must be positive, got {v_max}")));
        }
        let spacing = 2.0 * v_max / (n_per_axis - 1) as f64;
        // Mirror-symmetric construction keeps -v exactly representable for every node.
        let axis = (0..n_per_axis)
            .map(|i| {
                let j = n_per_axis - 1 - i;
                0.5 * (i as f64 - j as f64) * spacing
            })
            .collect();
        let mut grid = Self {
            n: n_per_axis,
            v_max,
            spacing,
            axis,
            weights: Vec::new(),
        };
        grid.weights = (0..grid.len()).map(|idx| grid.trapezoid_weight(idx)).collect();
        Ok(grid)
    }

    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Total number of nodes, `n³`.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinates along one axis.
    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    #[inline]
    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.n;
        let j = (idx / self.n) % self.n;
        let i = idx / (self.n * self.n);
        [i, j, k]
    }

    #[inline]
    pub fn node(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.multi_index(idx);
        [self.axis[i], self.axis[j], self.axis[k]]
    }

    pub fn nodes(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        (0..self.len()).map(move |idx| self.node(idx))
    }

    /// Index of the node `-v`.
    #[inline]
    pub fn mirror_index(&self, idx: usize) -> usize {
        let [i, j, k] = self.multi_index(idx);
        let m = self.n - 1;
        self.index(m - i, m - j, m - k)
    }

    /// Index of the node with the first velocity component negated.
    #[inline]
    pub fn reflect_first_index(&self, idx: usize) -> usize {
        let [i, j, k] = self.multi_index(idx);
        self.index(self.n - 1 - i, j, k)
    }

    /// Stride of the flat index along `axis`.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => self.n * self.n,
            1 => self.n,
            _ => 1,
        }
    }

    #[inline]
    pub fn weight(&self, idx: usize) -> f64 {
        self.weights[idx]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn trapezoid_weight(&self, idx: usize) -> f64 {
        let h3 = self.spacing.powi(3);
        let faces = self
            .multi_index(idx)
            .iter()
            .filter(|&&i| i == 0 || i + 1 == self.n)
            .count();
        h3 * 0.5f64.powi(faces as i32)
    }

    pub fn maxwellian_values(&self) -> Vec<f64> {
        self.nodes().map(maxwellian).collect()
    }

    pub fn sqrt_maxwellian_values(&self) -> Vec<f64> {
        self.nodes().map(sqrt_maxwellian).collect()
    }

    /// Weighted inner product Σ w f g.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(f.iter().zip(g))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    pub fn same_as(&self, other: &VelocityGrid) -> bool {
        self.n == other.n && self.v_max == other.v_max
    }
}

/// (2π)^{-3/2}; kept as a function for tests that check the constant.
pub fn maxwell_norm() -> f64 {
    (2.0 * PI).powf(-1.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_constant() {
        assert!((MAXWELL_NORM - maxwell_norm()).abs() < 1e-17);
        assert!((maxwellian([0.0; 3]) - 0.063_493_6).abs() < 1e-7);
    }

    #[test]
    fn maxwellian_radial() {
        assert_eq!(maxwellian([1.0, 0.0, 0.0]), maxwellian([-1.0, 0.0, 0.0]));
        assert_eq!(maxwellian([0.0, 2.0, 0.0]), maxwellian([0.0, 0.0, -2.0]));
        let v = [0.3, -1.2, 2.5];
        assert!((sqrt_maxwellian(v).powi(2) - maxwellian(v)).abs() < 1e-18);
    }

    #[test]
    fn grid_is_origin_symmetric() {
        for n in [7, 8, 12, 13] {
            let g = VelocityGrid::new(n, 8.0).unwrap();
            for idx in 0..g.len() {
                let v = g.node(idx);
                let w = g.node(g.mirror_index(idx));
                assert_eq!([-v[0], -v[1], -v[2]], w);
                assert!(v.iter().all(|c| c.abs() <= 8.0));
            }
        }
    }

    #[test]
    fn weights_sum_to_cube_volume() {
        for n in [5, 8, 24] {
            let g = VelocityGrid::new(n, 8.0).unwrap();
            let total: f64 = g.weights().iter().sum();
            assert!((total / 4096.0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(VelocityGrid::new(1, 8.0).is_err());
        assert!(VelocityGrid::new(8, 0.0).is_err());
        assert!(VelocityGrid::new(8, f64::NAN).is_err());
    }

    /// Probabilists' Gauss–Hermite nodes (n = 10): ∫ e^{-x²/2} p(x) dx / √(2π).
    fn gauss_hermite_mass() -> f64 {
        // Golub–Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
        let n = 10;
        let mut jac = faer::Mat::<f64>::zeros(n, n);
        for i in 1..n {
            let b = (i as f64).sqrt();
            jac.write(i, i - 1, b);
            jac.write(i - 1, i, b);
        }
        let evd = jac.selfadjoint_eigendecomposition(faer::Side::Lower);
        let mut one_d = 0.0;
        for i in 0..n {
            let w = evd.u().read(0, i).powi(2);
            one_d += w;
        }
        one_d.powi(3)
    }

    #[test]
    fn quadrature_mass_matches_gauss_hermite() {
        let g = VelocityGrid::new(32, 8.0).unwrap();
        let mass: f64 = g
            .maxwellian_values()
            .iter()
            .zip(g.weights())
            .map(|(m, w)| m * w)
            .sum();
        let oracle = gauss_hermite_mass();
        assert!((oracle - 1.0).abs() < 1e-12);
        assert!((mass - oracle).abs() < 1e-10, "mass = {mass}");
    }
}
