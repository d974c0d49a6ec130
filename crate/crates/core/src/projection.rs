//! Macroscopic projection `P` onto `span{√μ, v√μ, |v|²√μ}` and the globally
//! conserved phase-space modes of each geometry.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::geometry::{DistributionField, Domain};
use crate::grid::{norm_sq, VelocityGrid};

/// Generators in orthonormalization order.
pub const GENERATOR_NAMES: [&str; 5] = ["1", "v1", "v2", "v3", "|v|^2"];

/// Relative norm below which a Gram–Schmidt step counts as a breakdown.
const GRAM_TOLERANCE: f64 = 1e-8;

/// Orthonormal basis of the macroscopic subspace under grid quadrature.
#[derive(Debug, Clone)]
pub struct MacroBasis {
    pub e: [Vec<f64>; 5],
    /// Largest `|(e_j, e_k) - δ_jk|`.
    pub gram_defect: f64,
    /// `e_j = Σ_k t[j][k] g_k` with `g_k` the generators times `√μ`.
    transform: [[f64; 5]; 5],
    grid: VelocityGrid,
}

fn generator(grid: &VelocityGrid, k: usize) -> Vec<f64> {
    grid.nodes()
        .map(|v| {
            let p = match k {
                0 => 1.0,
                1..=3 => v[k - 1],
                _ => norm_sq(v),
            };
            p * crate::grid::sqrt_maxwellian(v)
        })
        .collect()
}

/// Gram–Schmidt (applied twice per vector) on `√μ, v₁√μ, v₂√μ, v₃√μ, |v|²√μ`.
pub fn build_macro_basis(grid: &VelocityGrid) -> Result<MacroBasis> {
    let gens: Vec<Vec<f64>> = (0..5).map(|k| generator(grid, k)).collect();
    let mut e: Vec<Vec<f64>> = Vec::with_capacity(5);
    let mut transform = [[0.0; 5]; 5];
    for k in 0..5 {
        let mut u = gens[k].clone();
        let mut coef = [0.0; 5];
        coef[k] = 1.0;
        let start = grid.inner(&u, &u).sqrt();
        for _ in 0..2 {
            for j in 0..e.len() {
                let p = grid.inner(&u, &e[j]);
                for (x, y) in u.iter_mut().zip(&e[j]) {
                    *x -= p * y;
                }
                for m in 0..5 {
                    coef[m] -= p * transform[j][m];
                }
            }
        }
        let norm = grid.inner(&u, &u).sqrt();
        if !(norm > GRAM_TOLERANCE * start) {
            return Err(Error::SingularGram {
                index: k,
                ratio: norm / start,
            });
        }
        for x in u.iter_mut() {
            *x /= norm;
        }
        for c in coef.iter_mut() {
            *c /= norm;
        }
        transform[k] = coef;
        e.push(u);
    }
    let mut gram_defect: f64 = 0.0;
    for j in 0..5 {
        for k in 0..5 {
            let target = if j == k { 1.0 } else { 0.0 };
            gram_defect = gram_defect.max((grid.inner(&e[j], &e[k]) - target).abs());
        }
    }
    let e: [Vec<f64>; 5] = e.try_into().expect("five vectors");
    Ok(MacroBasis {
        e,
        gram_defect,
        transform,
        grid: grid.clone(),
    })
}

impl MacroBasis {
    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    /// `(f, e_j)` for each basis vector.
    pub fn coefficients(&self, f: &[f64]) -> Result<[f64; 5]> {
        check_len(self.grid.len(), f.len())?;
        Ok(std::array::from_fn(|j| self.grid.inner(f, &self.e[j])))
    }

    /// `(a, b₁, b₂, b₃, c)` with `Pf = (a + b·v + c|v|²)√μ`.
    pub fn abc(&self, coeffs: &[f64; 5]) -> [f64; 5] {
        std::array::from_fn(|k| (0..5).map(|j| coeffs[j] * self.transform[j][k]).sum())
    }

    /// Field `(a + b·v + c|v|²)√μ`.
    pub fn reconstruct(&self, abc: &[f64; 5]) -> Vec<f64> {
        self.grid
            .nodes()
            .map(|v| (abc[0] + abc[1] * v[0] + abc[2] * v[1] + abc[3] * v[2] + abc[4] * norm_sq(v)) * crate::grid::sqrt_maxwellian(v))
            .collect()
    }
}

/// `Pf = Σ_j (f, e_j) e_j` and the coefficients `(f, e_j)`.
pub fn project_p(f: &[f64], basis: &MacroBasis) -> Result<(Vec<f64>, [f64; 5])> {
    let coeffs = basis.coefficients(f)?;
    let mut pf = vec![0.0; f.len()];
    for (c, e) in coeffs.iter().zip(&basis.e) {
        for (p, x) in pf.iter_mut().zip(e) {
            *p += c * x;
        }
    }
    Ok((pf, coeffs))
}

/// `(I - P) f`.
pub fn project_micro(f: &[f64], basis: &MacroBasis) -> Result<Vec<f64>> {
    let (pf, _) = project_p(f, basis)?;
    Ok(f.iter().zip(&pf).map(|(a, b)| a - b).collect())
}

/// Per-cell coefficients of `Pf = (a + b·v + c|v|²)√μ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroFields {
    pub centers: Vec<[f64; 2]>,
    pub a: Vec<f64>,
    pub b: Vec<[f64; 3]>,
    pub c: Vec<f64>,
}

pub fn macro_fields(f: &DistributionField, basis: &MacroBasis) -> Result<MacroFields> {
    if !f.grid.same_as(basis.grid()) {
        return Err(Error::Shape {
            expected: basis.grid().len(),
            actual: f.grid.len(),
        });
    }
    let mut out = MacroFields {
        centers: f.mesh.centers.clone(),
        a: Vec::with_capacity(f.cells()),
        b: Vec::with_capacity(f.cells()),
        c: Vec::with_capacity(f.cells()),
    };
    for cell in 0..f.cells() {
        let abc = basis.abc(&basis.coefficients(f.cell(cell))?);
        out.a.push(abc[0]);
        out.b.push([abc[1], abc[2], abc[3]]);
        out.c.push(abc[4]);
    }
    Ok(out)
}

/// Steady, globally conserved phase-space modes of a geometry, orthonormal in
/// the phase-space inner product.
#[derive(Debug, Clone)]
pub struct ConservedModes {
    pub names: Vec<&'static str>,
    pub modes: Vec<DistributionField>,
}

/// Mass and energy always; tangential momenta `v₂, v₃` in the slab; the
/// axial momentum `v₃` and the rigid rotation `(e₃ × x)·v` in the disk.
pub fn conserved_modes(template: &DistributionField) -> Result<ConservedModes> {
    let mesh = template.mesh.clone();
    let grid = template.grid.clone();
    let sm = crate::grid::sqrt_maxwellian;
    let mut names: Vec<&'static str> = vec!["mass", "energy"];
    let mut raw = vec![
        DistributionField::from_fn(mesh.clone(), grid.clone(), |_, v| sm(v)),
        DistributionField::from_fn(mesh.clone(), grid.clone(), |_, v| norm_sq(v) * sm(v)),
    ];
    match mesh.domain {
        Domain::Slab { .. } => {
            names.extend(["momentum2", "momentum3"]);
            raw.push(DistributionField::from_fn(mesh.clone(), grid.clone(), |_, v| v[1] * sm(v)));
            raw.push(DistributionField::from_fn(mesh.clone(), grid.clone(), |_, v| v[2] * sm(v)));
        }
        Domain::Disk { .. } => {
            names.extend(["momentum3", "angular"]);
            raw.push(DistributionField::from_fn(mesh.clone(), grid.clone(), |_, v| v[2] * sm(v)));
            raw.push(DistributionField::from_fn(mesh.clone(), grid.clone(), |x, v| {
                (x[0] * v[1] - x[1] * v[0]) * sm(v)
            }));
        }
    }
    let mut modes: Vec<DistributionField> = Vec::with_capacity(raw.len());
    for (k, mut u) in raw.into_iter().enumerate() {
        let start = u.norm();
        for _ in 0..2 {
            for m in &modes {
                let p = u.inner(&m.values)?;
                for (x, y) in u.values.iter_mut().zip(&m.values) {
                    *x -= p * y;
                }
            }
        }
        let norm = u.norm();
        if !(norm > GRAM_TOLERANCE * start) {
            return Err(Error::SingularGram {
                index: k,
                ratio: norm / start,
            });
        }
        for x in u.values.iter_mut() {
            *x /= norm;
        }
        modes.push(u);
    }
    Ok(ConservedModes { names, modes })
}

impl ConservedModes {
    /// `(f, m_k)` for each orthonormal mode.
    pub fn moments(&self, f: &DistributionField) -> Result<Vec<f64>> {
        self.modes.iter().map(|m| f.inner(&m.values)).collect()
    }

    /// Adds `Σ_k c_k m_k` to `f`.
    pub fn add_combination(&self, f: &mut DistributionField, coeffs: &[f64]) {
        for (m, c) in self.modes.iter().zip(coeffs) {
            for (x, y) in f.values.iter_mut().zip(&m.values) {
                *x += c * y;
            }
        }
    }
}

/// `f` minus its orthogonal projection onto the conserved modes.
pub fn remove_conserved(f: &DistributionField, modes: &ConservedModes) -> Result<DistributionField> {
    let mut out = f.clone();
    // Two passes bring the remaining moments down to rounding level.
    for _ in 0..2 {
        let m = modes.moments(&out)?;
        let neg: Vec<f64> = m.iter().map(|x| -x).collect();
        modes.add_combination(&mut out, &neg);
    }
    Ok(out)
}
