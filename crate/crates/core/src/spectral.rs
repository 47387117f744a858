//! Periodic spectral infrastructure on the square torus `[0, L)^2`.
//!
//! Real-space fields are stored row-major: the value at grid point
//! `(ix, iy)` sits at `iy * n + ix`, with `x = ix * h` running along axis 1
//! and `y = iy * h` along axis 2. Spectral coefficients share the layout,
//! indexed by mode instead of point.
//!
//! Normalization: the forward transform divides by `n^2`, so the `(0, 0)`
//! coefficient is the spatial mean and `integral(f g) = L^2 * sum(conj(f_k) g_k)`.
//!
//! Nyquist convention: odd-order operators (first derivatives, the Leray
//! projector, divergence, curl) use a zero wavenumber at index `n/2`, which
//! keeps real fields real. Even-order operators (Laplacian, semigroups) use
//! the full `|k|^2`. The two conventions agree on every dealiased field.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type Grid = Arc<SpectralGrid>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// Axis 1 (`x`).
    X,
    /// Axis 2 (`y`).
    Y,
}

impl Axis {
    pub fn from_index(axis: usize) -> Option<Axis> {
        match axis {
            1 => Some(Axis::X),
            2 => Some(Axis::Y),
            _ => None,
        }
    }
}

pub struct SpectralGrid {
    n: usize,
    length: f64,
    modes: Vec<i64>,
    /// Full |k|^2 per spectral index.
    k_sq: Vec<f64>,
    /// Odd-operator wavenumbers per spectral index (Nyquist zeroed).
    kx_odd: Vec<f64>,
    ky_odd: Vec<f64>,
    mask: Vec<bool>,
    forward_plan: Arc<dyn Fft<f64>>,
    inverse_plan: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("n", &self.n)
            .field("length", &self.length)
            .field("max_resolved_mode", &self.max_resolved_mode())
            .finish()
    }
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.length == other.length
    }
}

/// Builds an `n x n` periodic grid of side `length`.
pub fn make_grid(n: usize, length: f64) -> Result<Grid> {
    SpectralGrid::new(n, length)
}

impl SpectralGrid {
    pub fn new(n: usize, length: f64) -> Result<Grid> {
        if n < 8 {
            return Err(Error::InvalidGrid(format!("n = {n} is below the minimum of 8")));
        }
        if n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("n = {n} is odd")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("length = {length} must be positive")));
        }

        let half = (n / 2) as i64;
        let modes: Vec<i64> = (0..n as i64)
            .map(|i| if i < half { i } else { i - n as i64 })
            .collect();
        let scale = 2.0 * std::f64::consts::PI / length;
        let kmax = ((n - 2) / 3) as i64;

        let mut k_sq = vec![0.0; n * n];
        let mut kx_odd = vec![0.0; n * n];
        let mut ky_odd = vec![0.0; n * n];
        let mut mask = vec![false; n * n];
        for iy in 0..n {
            for ix in 0..n {
                let idx = iy * n + ix;
                let (mx, my) = (modes[ix], modes[iy]);
                let (kx, ky) = (scale * mx as f64, scale * my as f64);
                k_sq[idx] = kx * kx + ky * ky;
                kx_odd[idx] = if mx == -half { 0.0 } else { kx };
                ky_odd[idx] = if my == -half { 0.0 } else { ky };
                mask[idx] = mx.abs() <= kmax && my.abs() <= kmax;
            }
        }

        let mut planner = FftPlanner::new();
        let forward_plan = planner.plan_fft_forward(n);
        let inverse_plan = planner.plan_fft_inverse(n);

        Ok(Arc::new(SpectralGrid {
            n,
            length,
            modes,
            k_sq,
            kx_odd,
            ky_odd,
            mask,
            forward_plan,
            inverse_plan,
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Grid spacing `h = L / n`.
    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn area(&self) -> f64 {
        self.length * self.length
    }

    /// Wavenumber scale `2 pi / L`.
    pub fn wavenumber_scale(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.length
    }

    /// Largest integer mode kept by the 2/3 rule.
    pub fn max_resolved_mode(&self) -> i64 {
        ((self.n - 2) / 3) as i64
    }

    /// Signed integer mode for a per-axis index.
    pub fn mode(&self, index: usize) -> i64 {
        self.modes[index]
    }

    /// Spectral index of integer mode `(mx, my)`.
    pub fn index_of_mode(&self, mx: i64, my: i64) -> usize {
        let n = self.n as i64;
        let ix = mx.rem_euclid(n) as usize;
        let iy = my.rem_euclid(n) as usize;
        iy * self.n + ix
    }

    pub fn is_resolved(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn k_sq(&self, idx: usize) -> f64 {
        self.k_sq[idx]
    }

    pub(crate) fn k_sq_table(&self) -> &[f64] {
        &self.k_sq
    }

    /// Wavenumber used by first-derivative operators along `axis`.
    pub fn k_odd(&self, idx: usize, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.kx_odd[idx],
            Axis::Y => self.ky_odd[idx],
        }
    }

    /// Coordinates `(x, y)` of grid point `idx`.
    pub fn point(&self, idx: usize) -> (f64, f64) {
        let h = self.spacing();
        ((idx % self.n) as f64 * h, (idx / self.n) as f64 * h)
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let plan = if inverse {
            &self.inverse_plan
        } else {
            &self.forward_plan
        };
        let n = self.n;
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        let mut tmp = vec![Complex64::new(0.0, 0.0); buf.len()];
        plan.process_with_scratch(buf, &mut scratch);
        transpose(buf, &mut tmp, n);
        plan.process_with_scratch(&mut tmp, &mut scratch);
        transpose(&tmp, buf, n);
    }

    /// Visits every spectral index together with the index of its
    /// conjugate mode `-m`.
    fn for_each_conjugate_pair(&self, mut f: impl FnMut(usize, usize)) {
        let n = self.n;
        for iy in 0..n {
            let jy = (n - iy) % n;
            f(iy * n, jy * n);
            for ix in 1..n {
                f(iy * n + ix, jy * n + n - ix);
            }
        }
    }

    /// Forward transform; the result is divided by `n^2`.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        assert_eq!(values.len(), self.len(), "field length does not match grid");
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, false);
        let norm = 1.0 / self.len() as f64;
        buf.iter_mut().for_each(|c| *c *= norm);
        buf
    }

    /// Forward transforms of two real fields with one complex transform.
    pub fn forward_pair(&self, f: &[f64], g: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        assert_eq!(f.len(), self.len(), "field length does not match grid");
        assert_eq!(g.len(), self.len(), "field length does not match grid");
        let mut z: Vec<Complex64> = f.iter().zip(g).map(|(&a, &b)| Complex64::new(a, b)).collect();
        self.transform(&mut z, false);
        let half = 0.5 / self.len() as f64;
        let zero = Complex64::new(0.0, 0.0);
        let mut fs = vec![zero; z.len()];
        let mut gs = vec![zero; z.len()];
        self.for_each_conjugate_pair(|idx, j| {
            let (zk, zc) = (z[idx], z[j].conj());
            fs[idx] = (zk + zc) * half;
            let d = (zk - zc) * half;
            gs[idx] = Complex64::new(d.im, -d.re);
        });
        (fs, gs)
    }

    /// Inverse transform, keeping the real part.
    pub fn backward(&self, coeffs: &[Complex64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.len(), "spectrum length does not match grid");
        let mut buf = coeffs.to_vec();
        self.transform(&mut buf, true);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Real parts of two inverse transforms with one complex transform.
    pub fn backward_pair(&self, f: &[Complex64], g: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(f.len(), self.len(), "spectrum length does not match grid");
        assert_eq!(g.len(), self.len(), "spectrum length does not match grid");
        let mut z = vec![Complex64::new(0.0, 0.0); f.len()];
        self.for_each_conjugate_pair(|idx, j| {
            let hf = (f[idx] + f[j].conj()) * 0.5;
            let hg = (g[idx] + g[j].conj()) * 0.5;
            z[idx] = Complex64::new(hf.re - hg.im, hf.im + hg.re);
        });
        self.transform(&mut z, true);
        z.into_iter().map(|c| (c.re, c.im)).unzip()
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const B: usize = 8;
    assert!(src.len() == n * n && dst.len() == n * n);
    for i0 in (0..n).step_by(B) {
        for j0 in (0..n).step_by(B) {
            for i in i0..(i0 + B).min(n) {
                for j in j0..(j0 + B).min(n) {
                    dst[j * n + i] = src[i * n + j];
                }
            }
        }
    }
}

fn ensure_same(a: &Grid, b: &Grid) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// A real scalar field sampled on the grid points.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let (x, y) = grid.point(idx);
                f(x, y)
            })
            .collect();
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &ScalarField) -> Result<()> {
        ensure_same(&self.grid, &other.grid)
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum {
            coeffs: self.grid.forward(&self.values),
            grid: self.grid.clone(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination; panics if the grids differ.
    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        assert!(self.same_grid(other).is_ok(), "grid mismatch in zip_map");
        ScalarField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        self.map(|v| s * v)
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Integral over the torus (rectangle rule, spectrally exact for
    /// resolved trigonometric polynomials).
    pub fn integral(&self) -> f64 {
        self.mean() * self.grid.area()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() / self.values.len() as f64
            * self.grid.area()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64
            * self.grid.area())
        .sqrt()
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        (self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() / self.values.len() as f64
            * self.grid.area())
        .powf(1.0 / p)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ddx(&self, axis: Axis) -> ScalarField {
        self.spectrum().ddx(axis).to_field()
    }

    pub fn laplacian(&self) -> ScalarField {
        self.spectrum().laplacian().to_field()
    }

    pub fn heat_semigroup(&self, diffusivity: f64, damping: f64, t: f64) -> Result<ScalarField> {
        Ok(self
            .spectrum()
            .heat_semigroup(diffusivity, damping, t)?
            .to_field())
    }

    pub fn invert_laplacian(&self) -> Result<ScalarField> {
        Ok(self.spectrum().invert_laplacian()?.to_field())
    }
}

/// Spectral coefficients of a real field.
#[derive(Clone, Debug)]
pub struct Spectrum {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(Spectrum { grid, coeffs })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Spectrum {
            grid: grid.clone(),
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn to_field(&self) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.grid.backward(&self.coeffs),
        }
    }

    /// Spatial mean (the `(0, 0)` coefficient).
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn map_modes(&self, f: impl Fn(usize, Complex64) -> Complex64) -> Spectrum {
        Spectrum {
            grid: self.grid.clone(),
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(idx, &c)| f(idx, c))
                .collect(),
        }
    }

    pub fn zip_modes(
        &self,
        other: &Spectrum,
        f: impl Fn(usize, Complex64, Complex64) -> Complex64,
    ) -> Spectrum {
        assert!(
            ensure_same(&self.grid, &other.grid).is_ok(),
            "grid mismatch in zip_modes"
        );
        Spectrum {
            grid: self.grid.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .enumerate()
                .map(|(idx, (&a, &b))| f(idx, a, b))
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Spectrum {
        self.map_modes(|_, c| c * s)
    }

    pub fn add(&self, other: &Spectrum) -> Spectrum {
        self.zip_modes(other, |_, a, b| a + b)
    }

    pub fn sub(&self, other: &Spectrum) -> Spectrum {
        self.zip_modes(other, |_, a, b| a - b)
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &Spectrum) -> Spectrum {
        self.zip_modes(other, |_, a, b| a + b * s)
    }

    pub fn ddx(&self, axis: Axis) -> Spectrum {
        let grid = &self.grid;
        self.map_modes(|idx, c| c * Complex64::new(0.0, grid.k_odd(idx, axis)))
    }

    pub fn laplacian(&self) -> Spectrum {
        let grid = &self.grid;
        self.map_modes(|idx, c| c * (-grid.k_sq(idx)))
    }

    /// Zeroes every mode outside the 2/3-rule mask.
    pub fn dealias(&self) -> Spectrum {
        let grid = &self.grid;
        self.map_modes(|idx, c| {
            if grid.is_resolved(idx) {
                c
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// Multiplies mode `k` by `exp(-(diffusivity |k|^2 + damping) t)`.
    pub fn heat_semigroup(&self, diffusivity: f64, damping: f64, t: f64) -> Result<Spectrum> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::NegativeTime(t));
        }
        if diffusivity < 0.0 {
            return Err(Error::NegativeCoefficient(format!("diffusivity = {diffusivity}")));
        }
        if damping < 0.0 {
            return Err(Error::NegativeCoefficient(format!("damping = {damping}")));
        }
        Ok(self.decay_unchecked(diffusivity, damping, t))
    }

    /// Same multiplier as [`Spectrum::heat_semigroup`] without argument
    /// checks; negative `t` is allowed (integrating-factor back-transport).
    pub(crate) fn decay_unchecked(&self, diffusivity: f64, damping: f64, t: f64) -> Spectrum {
        let grid = &self.grid;
        self.map_modes(|idx, c| c * (-(diffusivity * grid.k_sq(idx) + damping) * t).exp())
    }

    /// Solves `lap g = f` in the zero-mean gauge.
    pub fn invert_laplacian(&self) -> Result<Spectrum> {
        let mean = self.mean();
        let norm = self.rms();
        if mean.abs() > 1e-10 * norm {
            return Err(Error::NonZeroMean { mean, norm });
        }
        Ok(self.invert_laplacian_unchecked())
    }

    pub(crate) fn invert_laplacian_unchecked(&self) -> Spectrum {
        let grid = &self.grid;
        self.map_modes(|idx, c| {
            let ksq = grid.k_sq(idx);
            if ksq == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                c / (-ksq)
            }
        })
    }

    /// Root-mean-square of the represented field (Parseval).
    pub fn rms(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `integral |f|^2` over the torus.
    pub fn l2_norm_sq(&self) -> f64 {
        self.weighted_norm_sq(|_| 1.0)
    }

    /// `L^2 * sum_k w(k) |f_k|^2`.
    pub fn weighted_norm_sq(&self, weight: impl Fn(usize) -> f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(idx, c)| weight(idx) * c.norm_sqr())
            .sum::<f64>()
            * self.grid.area()
    }

    /// `integral |grad f|^2`.
    pub fn grad_norm_sq(&self) -> f64 {
        let g = &self.grid;
        self.weighted_norm_sq(|idx| {
            let (kx, ky) = (g.k_odd(idx, Axis::X), g.k_odd(idx, Axis::Y));
            kx * kx + ky * ky
        })
    }

    /// `integral |lap f|^2`.
    pub fn lap_norm_sq(&self) -> f64 {
        let g = &self.grid;
        self.weighted_norm_sq(|idx| g.k_sq(idx).powi(2))
    }

    /// Bessel-potential `W^{m,2}` norm squared, weight `(1 + |k|^2)^m`.
    pub fn sobolev_norm_sq(&self, m: i32) -> f64 {
        let g = &self.grid;
        self.weighted_norm_sq(|idx| (1.0 + g.k_sq(idx)).powi(m))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }
}

/// A velocity-like field `(v1, v2)`.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub x: ScalarField,
    pub y: ScalarField,
}

impl VectorField {
    pub fn new(x: ScalarField, y: ScalarField) -> Result<Self> {
        x.same_grid(&y)?;
        Ok(VectorField { x, y })
    }

    pub fn zeros(grid: &Grid) -> Self {
        VectorField {
            x: ScalarField::zeros(grid),
            y: ScalarField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.x.grid()
    }

    pub fn spectrum(&self) -> VectorSpectrum {
        let (x, y) = self.x.grid.forward_pair(&self.x.values, &self.y.values);
        VectorSpectrum {
            x: Spectrum { grid: self.x.grid.clone(), coeffs: x },
            y: Spectrum { grid: self.y.grid.clone(), coeffs: y },
        }
    }

    /// `integral |v|^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        let n = self.x.values.len() as f64;
        self.x
            .values
            .iter()
            .zip(&self.y.values)
            .map(|(a, b)| a * a + b * b)
            .sum::<f64>()
            / n
            * self.grid().area()
    }

    /// Pointwise maximum of `|v|`.
    pub fn max_magnitude(&self) -> f64 {
        self.x
            .values
            .iter()
            .zip(&self.y.values)
            .fold(0.0, |m, (a, b)| m.max((a * a + b * b).sqrt()))
    }

    pub fn divergence(&self) -> ScalarField {
        self.spectrum().divergence().to_field()
    }

    pub fn curl(&self) -> ScalarField {
        self.spectrum().curl().to_field()
    }
}

#[derive(Clone, Debug)]
pub struct VectorSpectrum {
    pub x: Spectrum,
    pub y: Spectrum,
}

impl VectorSpectrum {
    pub fn zeros(grid: &Grid) -> Self {
        VectorSpectrum {
            x: Spectrum::zeros(grid),
            y: Spectrum::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.x.grid()
    }

    pub fn to_field(&self) -> VectorField {
        let (x, y) = self.x.grid.backward_pair(&self.x.coeffs, &self.y.coeffs);
        VectorField {
            x: ScalarField { grid: self.x.grid.clone(), values: x },
            y: ScalarField { grid: self.y.grid.clone(), values: y },
        }
    }

    pub fn scale(&self, s: f64) -> VectorSpectrum {
        VectorSpectrum {
            x: self.x.scale(s),
            y: self.y.scale(s),
        }
    }

    pub fn add(&self, other: &VectorSpectrum) -> VectorSpectrum {
        VectorSpectrum {
            x: self.x.add(&other.x),
            y: self.y.add(&other.y),
        }
    }

    pub fn sub(&self, other: &VectorSpectrum) -> VectorSpectrum {
        VectorSpectrum {
            x: self.x.sub(&other.x),
            y: self.y.sub(&other.y),
        }
    }

    pub fn axpy(&self, s: f64, other: &VectorSpectrum) -> VectorSpectrum {
        VectorSpectrum {
            x: self.x.axpy(s, &other.x),
            y: self.y.axpy(s, &other.y),
        }
    }

    pub fn dealias(&self) -> VectorSpectrum {
        VectorSpectrum {
            x: self.x.dealias(),
            y: self.y.dealias(),
        }
    }

    pub fn laplacian(&self) -> VectorSpectrum {
        VectorSpectrum {
            x: self.x.laplacian(),
            y: self.y.laplacian(),
        }
    }

    pub(crate) fn decay_unchecked(&self, diffusivity: f64, damping: f64, t: f64) -> VectorSpectrum {
        VectorSpectrum {
            x: self.x.decay_unchecked(diffusivity, damping, t),
            y: self.y.decay_unchecked(diffusivity, damping, t),
        }
    }

    pub fn heat_semigroup(&self, diffusivity: f64, damping: f64, t: f64) -> Result<VectorSpectrum> {
        Ok(VectorSpectrum {
            x: self.x.heat_semigroup(diffusivity, damping, t)?,
            y: self.y.heat_semigroup(diffusivity, damping, t)?,
        })
    }

    /// Per-mode `v - k (k . v) / |k|^2`; modes with vanishing odd
    /// wavenumber (including `(0, 0)`) are left unchanged.
    pub fn leray_project(&self) -> VectorSpectrum {
        let g = self.grid().clone();
        let mut x = self.x.clone();
        let mut y = self.y.clone();
        for idx in 0..g.len() {
            let kx = g.k_odd(idx, Axis::X);
            let ky = g.k_odd(idx, Axis::Y);
            let kk = kx * kx + ky * ky;
            if kk == 0.0 {
                continue;
            }
            let vx = self.x.coeffs[idx];
            let vy = self.y.coeffs[idx];
            let dot = vx * kx + vy * ky;
            x.coeffs[idx] = vx - dot * (kx / kk);
            y.coeffs[idx] = vy - dot * (ky / kk);
        }
        VectorSpectrum { x, y }
    }

    pub fn divergence(&self) -> Spectrum {
        self.x.ddx(Axis::X).add(&self.y.ddx(Axis::Y))
    }

    /// `d1 v2 - d2 v1`
    pub fn curl(&self) -> Spectrum {
        self.y.ddx(Axis::X).sub(&self.x.ddx(Axis::Y))
    }

    /// `integral |v|^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.x.l2_norm_sq() + self.y.l2_norm_sq()
    }

    /// `integral |grad v|^2` (all four components).
    pub fn grad_norm_sq(&self) -> f64 {
        self.x.grad_norm_sq() + self.y.grad_norm_sq()
    }

    pub fn sobolev_norm_sq(&self, m: i32) -> f64 {
        self.x.sobolev_norm_sq(m) + self.y.sobolev_norm_sq(m)
    }
}

fn backward_chunk(pair: &[Spectrum]) -> Vec<ScalarField> {
    match pair {
        [f, g] => {
            let (a, b) = f.grid.backward_pair(&f.coeffs, &g.coeffs);
            vec![
                ScalarField { grid: f.grid.clone(), values: a },
                ScalarField { grid: g.grid.clone(), values: b },
            ]
        }
        _ => pair.iter().map(Spectrum::to_field).collect(),
    }
}

fn forward_chunk(pair: &[ScalarField]) -> Vec<Spectrum> {
    match pair {
        [f, g] => {
            let (a, b) = f.grid.forward_pair(&f.values, &g.values);
            vec![
                Spectrum { grid: f.grid.clone(), coeffs: a },
                Spectrum { grid: g.grid.clone(), coeffs: b },
            ]
        }
        _ => pair.iter().map(ScalarField::spectrum).collect(),
    }
}

/// Handing work to the pool costs a thread wake-up; small batches and
/// single-threaded pools stay on the calling thread.
fn worth_parallel(batch: usize, grid: &SpectralGrid) -> bool {
    rayon::current_num_threads() > 1 && batch >= 4 && grid.len() >= 64 * 64
}

/// Inverse transforms of a batch of spectra, two per complex transform.
pub fn backward_all(spectra: &[Spectrum]) -> Vec<ScalarField> {
    match spectra.first() {
        Some(s) if worth_parallel(spectra.len(), &s.grid) => {
            spectra.par_chunks(2).flat_map_iter(backward_chunk).collect()
        }
        _ => spectra.chunks(2).flat_map(backward_chunk).collect(),
    }
}

/// Forward transforms of a batch of fields, two per complex transform.
pub fn forward_all(fields: &[ScalarField]) -> Vec<Spectrum> {
    match fields.first() {
        Some(f) if worth_parallel(fields.len(), &f.grid) => {
            fields.par_chunks(2).flat_map_iter(forward_chunk).collect()
        }
        _ => fields.chunks(2).flat_map(forward_chunk).collect(),
    }
}

/// Leray-Hodge projection of a real-space vector field.
pub fn leray_project(v: &VectorField) -> VectorField {
    v.spectrum().leray_project().to_field()
}

/// Perpendicular gradient `u = (-d2 psi, d1 psi)` of the streamfunction
/// solving `lap psi = omega`.
pub fn velocity_from_vorticity(omega: &ScalarField) -> Result<VectorField> {
    Ok(velocity_from_vorticity_spectrum(&omega.spectrum())?.to_field())
}

pub fn velocity_from_vorticity_spectrum(omega: &Spectrum) -> Result<VectorSpectrum> {
    let psi = omega.invert_laplacian()?;
    Ok(perp_grad(&psi))
}

/// `(-d2 psi, d1 psi)`
pub fn perp_grad(psi: &Spectrum) -> VectorSpectrum {
    VectorSpectrum {
        x: psi.ddx(Axis::Y).scale(-1.0),
        y: psi.ddx(Axis::X),
    }
}
