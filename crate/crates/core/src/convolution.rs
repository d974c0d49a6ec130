//! Zero-padded FFT convolution of velocity fields with the Landau kernel.
//!
//! Every product `φ^{ij} ∗ u` on the lattice is the discrete sum
//! `Σ_{v'} φ^{ij}(v - v') w(v') u(v')` with `w` the grid weights and `φ(0)`
//! replaced by [`origin_kernel`]. Fields live on an `n³` lattice and are
//! embedded in a `(2n)³` periodic box so that circular convolution equals the
//! linear one on the original nodes. The kernel is real and even, so its
//! transform is real; two real fields are transformed at once as the real and
//! imaginary parts of a single complex field.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Result};
use crate::grid::VelocityGrid;
use crate::kernel::{origin_kernel, landau_kernel, SYM_PAIRS};

/// Packed index of the symmetric component `(i, j)` in `[11, 12, 13, 22, 23, 33]` order.
#[inline]
pub fn sym_index(i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    match (a, b) {
        (0, 0) => 0,
        (0, 1) => 1,
        (0, 2) => 2,
        (1, 1) => 3,
        (1, 2) => 4,
        _ => 5,
    }
}

/// 3-D FFT on the padded `(2n)³` box that skips lines known to be zero on
/// input (forward) or never read on output (inverse).
#[derive(Clone)]
struct PaddedFft {
    n: usize,
    p: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

impl PaddedFft {
    fn new(n: usize) -> Self {
        let p = 2 * n;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(p);
        let inverse = planner.plan_fft_inverse(p);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n,
            p,
            forward,
            inverse,
            scratch_len,
        }
    }

    fn volume(&self) -> usize {
        self.p * self.p * self.p
    }

    /// Gather the lines along axis 1 of plane `a`, transform, scatter back.
    fn plane_axis1(&self, buf: &mut [Complex64], a: usize, fft: &dyn Fft<f64>, tmp: &mut [Complex64], scratch: &mut [Complex64]) {
        let p = self.p;
        let base = a * p * p;
        for b in 0..p {
            for c in 0..p {
                tmp[c * p + b] = buf[base + b * p + c];
            }
        }
        fft.process_with_scratch(&mut tmp[..p * p], scratch);
        for b in 0..p {
            for c in 0..p {
                buf[base + b * p + c] = tmp[c * p + b];
            }
        }
    }

    /// Transform along axis 0 for every (b, c).
    fn all_axis0(&self, buf: &mut [Complex64], fft: &dyn Fft<f64>, tmp: &mut [Complex64], scratch: &mut [Complex64]) {
        let p = self.p;
        for b in 0..p {
            for a in 0..p {
                let src = (a * p + b) * p;
                for c in 0..p {
                    tmp[c * p + a] = buf[src + c];
                }
            }
            fft.process_with_scratch(&mut tmp[..p * p], scratch);
            for a in 0..p {
                let dst = (a * p + b) * p;
                for c in 0..p {
                    buf[dst + c] = tmp[c * p + a];
                }
            }
        }
    }

    /// Forward transform of a field supported on `[0, n)³`.
    fn forward_pruned(&self, buf: &mut [Complex64], tmp: &mut [Complex64], scratch: &mut [Complex64]) {
        let (n, p) = (self.n, self.p);
        for a in 0..n {
            let start = a * p * p;
            self.forward
                .process_with_scratch(&mut buf[start..start + n * p], scratch);
        }
        for a in 0..n {
            self.plane_axis1(buf, a, self.forward.as_ref(), tmp, scratch);
        }
        self.all_axis0(buf, self.forward.as_ref(), tmp, scratch);
    }

    /// Unnormalized inverse transform; only `[0, n)³` of the result is valid.
    fn inverse_pruned(&self, buf: &mut [Complex64], tmp: &mut [Complex64], scratch: &mut [Complex64]) {
        let (n, p) = (self.n, self.p);
        self.all_axis0(buf, self.inverse.as_ref(), tmp, scratch);
        for a in 0..n {
            self.plane_axis1(buf, a, self.inverse.as_ref(), tmp, scratch);
        }
        for a in 0..n {
            let start = a * p * p;
            self.inverse
                .process_with_scratch(&mut buf[start..start + n * p], scratch);
        }
    }
}

/// Real transforms of the six independent kernel components on the padded box.
#[derive(Clone)]
pub struct KernelTransforms {
    n: usize,
    fft: PaddedFft,
    weights: Vec<f64>,
    spectra: [Vec<f64>; 6],
}

impl std::fmt::Debug for KernelTransforms {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelTransforms").field("n", &self.n).finish()
    }
}

/// Reusable buffers for one convolution call.
struct Workspace {
    bufs: Vec<Vec<Complex64>>,
    tmp: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl KernelTransforms {
    pub fn new(grid: &VelocityGrid) -> Self {
        let n = grid.n_per_axis();
        let fft = PaddedFft::new(n);
        let p = fft.p;
        let h = grid.spacing();
        let center = origin_kernel(h);
        let offset = |q: usize| -> Option<f64> {
            if q < n {
                Some(q as f64)
            } else if q > n {
                Some(q as f64 - p as f64)
            } else {
                None
            }
        };
        let mut spectra: [Vec<f64>; 6] = Default::default();
        let mut tmp = vec![Complex64::default(); p * p];
        let mut scratch = vec![Complex64::default(); fft.scratch_len];
        for (comp, &(i, j)) in SYM_PAIRS.iter().enumerate() {
            let mut buf = vec![Complex64::default(); fft.volume()];
            for a in 0..p {
                for b in 0..p {
                    for c in 0..p {
                        let (Some(x), Some(y), Some(z)) = (offset(a), offset(b), offset(c)) else {
                            continue;
                        };
                        let value = if a == 0 && b == 0 && c == 0 {
                            center[i][j]
                        } else {
                            landau_kernel([x * h, y * h, z * h]).expect("nonzero offset")[i][j]
                        };
                        buf[(a * p + b) * p + c] = Complex64::new(value, 0.0);
                    }
                }
            }
            // Full (unpruned) transform: the kernel fills the whole box.
            for line in buf.chunks_mut(p) {
                fft.forward.process_with_scratch(line, &mut scratch);
            }
            for a in 0..p {
                fft.plane_axis1(&mut buf, a, fft.forward.as_ref(), &mut tmp, &mut scratch);
            }
            fft.all_axis0(&mut buf, fft.forward.as_ref(), &mut tmp, &mut scratch);
            let scale = 1.0 / fft.volume() as f64;
            spectra[comp] = buf.iter().map(|z| z.re * scale).collect();
        }
        Self {
            n,
            fft,
            weights: grid.weights().to_vec(),
            spectra,
        }
    }

    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    /// Real spectrum of component `(i, j)`, normalized by the box volume.
    pub fn spectrum(&self, i: usize, j: usize) -> &[f64] {
        &self.spectra[sym_index(i, j)]
    }

    fn workspace(&self, buffers: usize) -> Workspace {
        let p = self.fft.p;
        Workspace {
            bufs: vec![vec![Complex64::default(); self.fft.volume()]; buffers],
            tmp: vec![Complex64::default(); p * p],
            scratch: vec![Complex64::default(); self.fft.scratch_len],
        }
    }

    fn load(&self, buf: &mut [Complex64], re: &[f64], im: Option<&[f64]>) {
        let (n, p) = (self.n, self.fft.p);
        buf.fill(Complex64::default());
        for a in 0..n {
            for b in 0..n {
                let src = (a * n + b) * n;
                let dst = (a * p + b) * p;
                for c in 0..n {
                    let w = self.weights[src + c];
                    let imv = im.map_or(0.0, |f| f[src + c]);
                    buf[dst + c] = Complex64::new(w * re[src + c], w * imv);
                }
            }
        }
    }

    fn store(&self, buf: &[Complex64], re: &mut [f64], im: Option<&mut [f64]>) {
        let (n, p) = (self.n, self.fft.p);
        let mut im = im;
        for a in 0..n {
            for b in 0..n {
                let src = (a * p + b) * p;
                let dst = (a * n + b) * n;
                for c in 0..n {
                    re[dst + c] = buf[src + c].re;
                    if let Some(out) = im.as_deref_mut() {
                        out[dst + c] = buf[src + c].im;
                    }
                }
            }
        }
    }

    /// `Σ_{v'} φ^{ij}(v - v') w(v') field(v')` for one component.
    pub fn convolve(&self, i: usize, j: usize, field: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n.pow(3), field.len())?;
        let mut ws = self.workspace(1);
        let Workspace { bufs, tmp, scratch } = &mut ws;
        let buf = &mut bufs[0];
        self.load(buf, field, None);
        self.fft.forward_pruned(buf, tmp, scratch);
        let spec = self.spectrum(i, j);
        for (z, s) in buf.iter_mut().zip(spec) {
            *z *= *s;
        }
        self.fft.inverse_pruned(buf, tmp, scratch);
        let mut out = vec![0.0; field.len()];
        self.store(buf, &mut out, None);
        Ok(out)
    }

    /// All six components `φ^{ij} ∗ field`, in [`SYM_PAIRS`] order.
    pub fn convolve_all(&self, field: &[f64]) -> Result<[Vec<f64>; 6]> {
        check_len(self.n.pow(3), field.len())?;
        let len = field.len();
        let mut ws = self.workspace(2);
        let Workspace { bufs, tmp, scratch } = &mut ws;
        let (first, rest) = bufs.split_at_mut(1);
        let (src, out_buf) = (&mut first[0], &mut rest[0]);
        self.load(src, field, None);
        self.fft.forward_pruned(src, tmp, scratch);
        let mut out: [Vec<f64>; 6] = Default::default();
        for pair in 0..3 {
            let (a, b) = (2 * pair, 2 * pair + 1);
            let (sa, sb) = (&self.spectra[a], &self.spectra[b]);
            for q in 0..src.len() {
                let z = src[q];
                // (Φa + iΦb) ẑ with real Φ: inverse gives ua + i ub.
                out_buf[q] = z * sa[q] + Complex64::new(-z.im, z.re) * sb[q];
            }
            self.fft.inverse_pruned(out_buf, tmp, scratch);
            let mut ua = vec![0.0; len];
            let mut ub = vec![0.0; len];
            self.store(out_buf, &mut ua, Some(&mut ub));
            out[a] = ua;
            out[b] = ub;
        }
        Ok(out)
    }

    /// Matrix–vector convolutions for two vector fields at once:
    /// `ua_i = Σ_j φ^{ij} ∗ a_j` and `ub_i = Σ_j φ^{ij} ∗ b_j`.
    pub fn convolve_vector_pair(&self, a: [&[f64]; 3], b: [&[f64]; 3]) -> Result<([Vec<f64>; 3], [Vec<f64>; 3])> {
        let len = self.n.pow(3);
        for f in a.iter().chain(b.iter()) {
            check_len(len, f.len())?;
        }
        let mut ws = self.workspace(4);
        let Workspace { bufs, tmp, scratch } = &mut ws;
        let (inputs, out_buf) = bufs.split_at_mut(3);
        let out_buf = &mut out_buf[0];
        for j in 0..3 {
            self.load(&mut inputs[j], a[j], Some(b[j]));
            self.fft.forward_pruned(&mut inputs[j], tmp, scratch);
        }
        let mut ua: [Vec<f64>; 3] = Default::default();
        let mut ub: [Vec<f64>; 3] = Default::default();
        for i in 0..3 {
            let s0 = self.spectrum(i, 0);
            let s1 = self.spectrum(i, 1);
            let s2 = self.spectrum(i, 2);
            for q in 0..out_buf.len() {
                out_buf[q] = inputs[0][q] * s0[q] + inputs[1][q] * s1[q] + inputs[2][q] * s2[q];
            }
            self.fft.inverse_pruned(out_buf, tmp, scratch);
            ua[i] = vec![0.0; len];
            ub[i] = vec![0.0; len];
            self.store(out_buf, &mut ua[i], Some(&mut ub[i]));
        }
        Ok((ua, ub))
    }
}

/// Kernel values `φ(Δ h)` on all lattice offsets `Δ ∈ (-n, n)³`, with the
/// origin replaced as in the transforms. Used for sums against sparse fields.
#[derive(Debug, Clone)]
pub struct LatticeKernel {
    n: usize,
    values: Vec<[f64; 6]>,
}

impl LatticeKernel {
    pub fn new(grid: &VelocityGrid) -> Self {
        let n = grid.n_per_axis();
        let h = grid.spacing();
        let m = 2 * n - 1;
        let center = origin_kernel(h);
        let mut values = vec![[0.0; 6]; m * m * m];
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    let d = [a as f64 - (n - 1) as f64, b as f64 - (n - 1) as f64, c as f64 - (n - 1) as f64];
                    let k = if d == [0.0; 3] {
                        center
                    } else {
                        landau_kernel([d[0] * h, d[1] * h, d[2] * h]).expect("nonzero offset")
                    };
                    values[(a * m + b) * m + c] = SYM_PAIRS.map(|(i, j)| k[i][j]);
                }
            }
        }
        Self { n, values }
    }

    /// Packed kernel at the offset between multi-indices `p` and `q`.
    #[inline]
    pub fn between(&self, p: [usize; 3], q: [usize; 3]) -> &[f64; 6] {
        let m = 2 * self.n - 1;
        let o = self.n - 1;
        let a = p[0] + o - q[0];
        let b = p[1] + o - q[1];
        let c = p[2] + o - q[2];
        &self.values[(a * m + b) * m + c]
    }
}

/// Direct `O(N⁶)` evaluation of `Σ_{v'} φ^{ij}(v - v') w(v') field(v')`.
pub fn convolve_direct(grid: &VelocityGrid, i: usize, j: usize, field: &[f64]) -> Result<Vec<f64>> {
    check_len(grid.len(), field.len())?;
    let center = origin_kernel(grid.spacing());
    let mut out = vec![0.0; grid.len()];
    for (a, slot) in out.iter_mut().enumerate() {
        let va = grid.node(a);
        let mut acc = 0.0;
        for b in 0..grid.len() {
            let k = if a == b {
                center[i][j]
            } else {
                let vb = grid.node(b);
                landau_kernel([va[0] - vb[0], va[1] - vb[1], va[2] - vb[2]])?[i][j]
            };
            acc += k * grid.weight(b) * field[b];
        }
        *slot = acc;
    }
    Ok(out)
}
