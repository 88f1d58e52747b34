//! Periodic fields on a square torus and the Fourier-space operators acting on them.
//!
//! Layout: every field is an `n x n` array stored row-major with the row index
//! running along `y` and the column index along `x`, so sample `(i, j)` sits
//! at `values[j * n + i]` and represents the point `(i * dx, j * dx)`.
//!
//! Transform convention: [`Spectral::forward`] divides by `n^2`, so a
//! coefficient is the amplitude of its mode (a constant field `c` maps to
//! `c` in mode `(0, 0)`) and [`Spectral::inverse`] is a plain sum.
//!
//! Every reduction in this module (sums, norms, inner products) runs
//! sequentially in index order, so results do not depend on the size of the
//! rayon pool used by the row transforms.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Square periodic grid `[0, L)^2` with `n` points per side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    n: usize,
    length: f64,
}

impl Grid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "n must be even and at least 8, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "side length must be positive and finite, got {length}"
            )));
        }
        Ok(Self { n, length })
    }

    /// Grid on the `2 pi` torus.
    pub fn periodic(n: usize) -> Result<Self> {
        Self::new(n, 2.0 * PI)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Number of samples, `n^2`.
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Physical coordinate of sample index `i` along either axis.
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    /// Signed integer mode for storage index `i`; the Nyquist index maps to `-n/2`.
    pub fn mode(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.n / 2
    }

    /// Wavenumber `2 pi m / L` for storage index `i`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        2.0 * PI / self.length * self.mode(i) as f64
    }

    /// Largest retained mode index under the two-thirds rule.
    pub fn dealias_cutoff(&self) -> usize {
        self.n / 3
    }

    /// Whether storage index `i` survives the two-thirds rule.
    pub fn is_resolved(&self, i: usize) -> bool {
        3 * self.mode(i).unsigned_abs() as usize <= self.n
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected_n: self.n,
                expected_len: self.length,
                n: other.n,
                len: other.length,
            })
        }
    }
}

/// Real samples of a scalar field. Public constructors reject NaN and infinities.
#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    grid: Grid,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        let field = Self { grid, values };
        field.check_finite("field")?;
        Ok(field)
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f(x, y)` at the grid points. Non-finite samples are rejected.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..n {
            let y = grid.coord(j);
            for i in 0..n {
                values.push(f(grid.coord(i), y));
            }
        }
        Self::new(grid, values)
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

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.n + i]
    }

    /// Returns an error locating the first NaN/infinite sample, if any.
    pub fn check_finite(&self, name: &str) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(idx) => Err(Error::NonFinite {
                field: name.to_string(),
                i: idx % self.grid.n,
                j: idx / self.grid.n,
                value: self.values[idx],
            }),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RealField {
        RealField::from_vec_unchecked(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &RealField, f: impl Fn(f64, f64) -> f64) -> Result<RealField> {
        self.grid.ensure_same(&other.grid)?;
        Ok(RealField::from_vec_unchecked(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn add(&self, other: &RealField) -> Result<RealField> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &RealField) -> Result<RealField> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> RealField {
        self.map(|v| v * s)
    }

    /// Grid maximum of `|f|`.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Quadrature `dx^2 sum f`.
    pub fn integral(&self) -> f64 {
        let dx = self.grid.dx();
        dx * dx * self.values.iter().sum::<f64>()
    }

    /// Quadrature `dx^2 sum f g`.
    pub fn inner(&self, other: &RealField) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        let dx = self.grid.dx();
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        Ok(dx * dx * s)
    }

    /// `||f||_2^2 = dx^2 sum f^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        let dx = self.grid.dx();
        dx * dx * self.values.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }
}

/// Fourier coefficients of a real field, `coeffs[iy * n + ix]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub(crate) fn from_coeffs(grid: Grid, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), grid.len());
        Self { grid, coeffs }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient of storage mode `(ix, iy)`.
    pub fn get(&self, ix: usize, iy: usize) -> Complex64 {
        self.coeffs[iy * self.grid.n + ix]
    }

    /// Coefficient of signed mode `(mx, my)`.
    pub fn mode(&self, mx: i64, my: i64) -> Complex64 {
        let n = self.grid.n as i64;
        self.get(mx.rem_euclid(n) as usize, my.rem_euclid(n) as usize)
    }

    pub fn scale(&self, s: f64) -> SpectralField {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    pub fn add_assign(&mut self, other: &SpectralField) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
    }

    pub fn add_scaled(&mut self, s: f64, other: &SpectralField) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * s;
        }
    }

    /// Coefficient-space form of `||f||_2^2`; equals the physical quadrature (Parseval).
    pub fn l2_norm_sq(&self) -> f64 {
        let l = self.grid.length;
        l * l * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.norm()))
    }
}

const PAR_ROWS: usize = 8;

/// Planned transforms for one grid plus the spatial operators built on them.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Wavenumbers per storage index.
    k: Vec<f64>,
    /// Same with the Nyquist entry zeroed; used by odd-order operators.
    k_odd: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.n());
        let inv = planner.plan_fft_inverse(grid.n());
        let k: Vec<f64> = (0..grid.n()).map(|i| grid.wavenumber(i)).collect();
        let k_odd = (0..grid.n())
            .map(|i| if grid.is_nyquist(i) { 0.0 } else { k[i] })
            .collect();
        Self {
            grid,
            fwd,
            inv,
            k,
            k_odd,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n();
        let scratch_len = plan.get_inplace_scratch_len();
        let rows = |buf: &mut [Complex64]| {
            if n >= 64 {
                buf.par_chunks_mut(n * PAR_ROWS).for_each_init(
                    || vec![Complex64::new(0.0, 0.0); scratch_len],
                    |scratch, c| plan.process_with_scratch(c, scratch),
                );
            } else {
                let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
                plan.process_with_scratch(buf, &mut scratch);
            }
        };
        let mut tmp = vec![Complex64::new(0.0, 0.0); data.len()];
        rows(data);
        transpose(data, &mut tmp, n);
        rows(&mut tmp);
        transpose(&tmp, data, n);
    }

    /// Forward transform; non-finite input is rejected with its location.
    pub fn forward(&self, f: &RealField) -> Result<SpectralField> {
        self.grid.ensure_same(f.grid())?;
        f.check_finite("forward input")?;
        Ok(self.forward_unchecked(f))
    }

    pub(crate) fn forward_unchecked(&self, f: &RealField) -> SpectralField {
        let norm = 1.0 / self.grid.len() as f64;
        let mut data: Vec<Complex64> = f
            .values()
            .iter()
            .map(|&v| Complex64::new(v * norm, 0.0))
            .collect();
        self.transform(&mut data, &self.fwd);
        SpectralField::from_coeffs(self.grid, data)
    }

    /// Two forward transforms for the price of one, by packing `f + i g`.
    pub(crate) fn forward_pair_unchecked(
        &self,
        f: &RealField,
        g: &RealField,
    ) -> (SpectralField, SpectralField) {
        let n = self.grid.n();
        let norm = 1.0 / self.grid.len() as f64;
        let mut data: Vec<Complex64> = f
            .values()
            .iter()
            .zip(g.values())
            .map(|(&a, &b)| Complex64::new(a * norm, b * norm))
            .collect();
        self.transform(&mut data, &self.fwd);
        let mut fa = Vec::with_capacity(data.len());
        let mut fb = Vec::with_capacity(data.len());
        for iy in 0..n {
            let my = (n - iy) % n;
            for ix in 0..n {
                let mx = (n - ix) % n;
                let z = data[iy * n + ix];
                let w = data[my * n + mx].conj();
                let d = z - w;
                fa.push((z + w) * 0.5);
                fb.push(Complex64::new(0.5 * d.im, -0.5 * d.re));
            }
        }
        (
            SpectralField::from_coeffs(self.grid, fa),
            SpectralField::from_coeffs(self.grid, fb),
        )
    }

    /// Forward transforms of several fields, paired up internally.
    pub(crate) fn forward_many_unchecked(&self, fields: &[&RealField]) -> Vec<SpectralField> {
        let mut out = Vec::with_capacity(fields.len());
        for pair in fields.chunks(2) {
            match pair {
                [a, b] => {
                    let (x, y) = self.forward_pair_unchecked(a, b);
                    out.push(x);
                    out.push(y);
                }
                [a] => out.push(self.forward_unchecked(a)),
                _ => unreachable!(),
            }
        }
        out
    }

    /// Inverse transform, keeping the real part.
    pub fn inverse(&self, f: &SpectralField) -> RealField {
        let mut data = f.coeffs().to_vec();
        self.transform(&mut data, &self.inv);
        RealField::from_vec_unchecked(self.grid, data.into_iter().map(|c| c.re).collect())
    }

    /// Inverse transforms of two spectra of real fields, packed as `a + i b`.
    pub fn inverse_pair(&self, a: &SpectralField, b: &SpectralField) -> (RealField, RealField) {
        let mut data: Vec<Complex64> = a
            .coeffs()
            .iter()
            .zip(b.coeffs())
            .map(|(&x, &y)| x + Complex64::new(-y.im, y.re))
            .collect();
        self.transform(&mut data, &self.inv);
        let re = data.iter().map(|c| c.re).collect();
        let im = data.iter().map(|c| c.im).collect();
        (
            RealField::from_vec_unchecked(self.grid, re),
            RealField::from_vec_unchecked(self.grid, im),
        )
    }

    /// Inverse transforms of several spectra, paired up internally.
    pub fn inverse_many(&self, fields: &[&SpectralField]) -> Vec<RealField> {
        let mut out = Vec::with_capacity(fields.len());
        for pair in fields.chunks(2) {
            match pair {
                [a, b] => {
                    let (x, y) = self.inverse_pair(a, b);
                    out.push(x);
                    out.push(y);
                }
                [a] => out.push(self.inverse(a)),
                _ => unreachable!(),
            }
        }
        out
    }

    fn map_modes(
        &self,
        f: &SpectralField,
        op: impl Fn(usize, usize, Complex64) -> Complex64,
    ) -> SpectralField {
        let n = self.grid.n();
        let mut coeffs = Vec::with_capacity(f.coeffs().len());
        for (iy, row) in f.coeffs().chunks_exact(n).enumerate() {
            coeffs.extend(row.iter().enumerate().map(|(ix, &c)| op(ix, iy, c)));
        }
        SpectralField::from_coeffs(self.grid, coeffs)
    }

    pub fn k_squared(&self, ix: usize, iy: usize) -> f64 {
        self.k[ix] * self.k[ix] + self.k[iy] * self.k[iy]
    }

    pub fn dx_hat(&self, f: &SpectralField) -> SpectralField {
        self.map_modes(f, |ix, _, c| {
            let k = self.k_odd[ix];
            Complex64::new(-k * c.im, k * c.re)
        })
    }

    pub fn dy_hat(&self, f: &SpectralField) -> SpectralField {
        self.map_modes(f, |_, iy, c| {
            let k = self.k_odd[iy];
            Complex64::new(-k * c.im, k * c.re)
        })
    }

    pub fn div_hat(&self, a: &SpectralField, b: &SpectralField) -> SpectralField {
        let mut out = self.dx_hat(a);
        out.add_assign(&self.dy_hat(b));
        out
    }

    pub fn laplacian_hat(&self, f: &SpectralField) -> SpectralField {
        self.map_modes(f, |ix, iy, c| c * -self.k_squared(ix, iy))
    }

    /// Multiplies every mode by `exp(-nu |k|^2 tau)`.
    pub fn heat_factor_hat(&self, f: &SpectralField, nu: f64, tau: f64) -> SpectralField {
        if nu == 0.0 || tau == 0.0 {
            return f.clone();
        }
        let decay: Vec<f64> = self.k.iter().map(|k| (-nu * k * k * tau).exp()).collect();
        self.map_modes(f, |ix, iy, c| c * (decay[ix] * decay[iy]))
    }

    /// Removes the gradient part of `(a, b)`; the mean mode is untouched.
    pub fn leray_hat(
        &self,
        a: &SpectralField,
        b: &SpectralField,
    ) -> (SpectralField, SpectralField) {
        let n = self.grid.n();
        let mut pa = a.clone();
        let mut pb = b.clone();
        for iy in 0..n {
            for ix in 0..n {
                let (kx, ky) = (self.k_odd[ix], self.k_odd[iy]);
                let k2 = kx * kx + ky * ky;
                if k2 == 0.0 {
                    continue;
                }
                let idx = iy * n + ix;
                let dot = (a.coeffs[idx] * kx + b.coeffs[idx] * ky) / k2;
                pa.coeffs[idx] -= dot * kx;
                pb.coeffs[idx] -= dot * ky;
            }
        }
        (pa, pb)
    }

    /// Zeroes every mode outside the two-thirds band.
    pub fn dealias(&self, f: &SpectralField) -> SpectralField {
        let mut out = f.clone();
        self.dealias_in_place(&mut out);
        out
    }

    pub fn dealias_in_place(&self, f: &mut SpectralField) {
        let n = self.grid.n();
        let keep: Vec<bool> = (0..n).map(|i| self.grid.is_resolved(i)).collect();
        for (iy, row) in f.coeffs_mut().chunks_exact_mut(n).enumerate() {
            for (ix, c) in row.iter_mut().enumerate() {
                if !(keep[ix] && keep[iy]) {
                    *c = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    pub fn gradient(&self, f: &RealField) -> Result<(RealField, RealField)> {
        let fh = self.forward(f)?;
        Ok((
            self.inverse(&self.dx_hat(&fh)),
            self.inverse(&self.dy_hat(&fh)),
        ))
    }

    pub fn divergence(&self, f1: &RealField, f2: &RealField) -> Result<RealField> {
        let a = self.forward(f1)?;
        let b = self.forward(f2)?;
        Ok(self.inverse(&self.div_hat(&a, &b)))
    }

    pub fn laplacian(&self, f: &RealField) -> Result<RealField> {
        let fh = self.forward(f)?;
        Ok(self.inverse(&self.laplacian_hat(&fh)))
    }

    pub fn leray_project(&self, f1: &RealField, f2: &RealField) -> Result<(RealField, RealField)> {
        let a = self.forward(f1)?;
        let b = self.forward(f2)?;
        let (pa, pb) = self.leray_hat(&a, &b);
        Ok((self.inverse(&pa), self.inverse(&pb)))
    }

    /// Physical-space round trip through [`Spectral::dealias`].
    pub fn dealias_field(&self, f: &RealField) -> Result<RealField> {
        let fh = self.forward(f)?;
        Ok(self.inverse(&self.dealias(&fh)))
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const B: usize = 16;
    for jb in (0..n).step_by(B) {
        for ib in (0..n).step_by(B) {
            for j in jb..(jb + B).min(n) {
                for i in ib..(ib + B).min(n) {
                    dst[i * n + j] = src[j * n + i];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid {
        Grid::periodic(n).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(6, 1.0).is_err());
        assert!(Grid::new(9, 1.0).is_err());
        assert!(Grid::new(16, 0.0).is_err());
        assert!(Grid::new(16, f64::NAN).is_err());
        assert!(Grid::new(10, 1.0).is_ok());
    }

    #[test]
    fn wavenumbers_are_antisymmetric_except_nyquist() {
        let g = Grid::new(16, 3.0).unwrap();
        for i in 1..16 {
            let neg = (16 - i) % 16;
            if g.is_nyquist(i) {
                assert_eq!(g.mode(i), -8);
                continue;
            }
            assert_eq!(g.wavenumber(i), -g.wavenumber(neg));
        }
        assert_eq!(g.wavenumber(0), 0.0);
    }

    #[test]
    fn constant_field_has_only_mean_mode() {
        let g = grid(16);
        let sp = Spectral::new(g);
        let fh = sp.forward(&RealField::constant(g, 2.5)).unwrap();
        assert!((fh.get(0, 0).re - 2.5).abs() < 1e-15);
        for (idx, c) in fh.coeffs().iter().enumerate().skip(1) {
            assert!(c.norm() < 1e-15, "mode {idx} = {c}");
        }
    }

    #[test]
    fn single_harmonic_has_two_modes() {
        let g = Grid::new(32, 5.0).unwrap();
        let sp = Spectral::new(g);
        let f = RealField::from_fn(g, |x, _| (2.0 * PI * x / 5.0).sin()).unwrap();
        let fh = sp.forward(&f).unwrap();
        let nonzero: Vec<(i64, i64)> = (0..g.len())
            .filter(|&idx| fh.coeffs()[idx].norm() > 1e-12)
            .map(|idx| (g.mode(idx % 32), g.mode(idx / 32)))
            .collect();
        assert_eq!(nonzero, vec![(1, 0), (-1, 0)]);
        assert!((fh.mode(1, 0) - Complex64::new(0.0, -0.5)).norm() < 1e-14);
    }

    #[test]
    fn forward_rejects_nan_with_location() {
        let g = grid(8);
        let sp = Spectral::new(g);
        let mut v = vec![0.0; 64];
        v[3 * 8 + 5] = f64::NAN;
        let f = RealField::from_vec_unchecked(g, v);
        match sp.forward(&f) {
            Err(Error::NonFinite { i, j, .. }) => assert_eq!((i, j), (5, 3)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(RealField::new(g, vec![f64::INFINITY; 64]).is_err());
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let sp = Spectral::new(grid(8));
        let f = RealField::zeros(grid(16));
        assert!(matches!(sp.forward(&f), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn analytic_derivatives_of_sine() {
        let l = 3.0;
        let g = Grid::new(32, l).unwrap();
        let sp = Spectral::new(g);
        let k = 2.0 * PI / l;
        let f = RealField::from_fn(g, |x, _| (k * x).sin()).unwrap();
        let (fx, fy) = sp.gradient(&f).unwrap();
        let lap = sp.laplacian(&f).unwrap();
        let div = sp.divergence(&f, &RealField::zeros(g)).unwrap();
        for j in 0..32 {
            for i in 0..32 {
                let x = g.coord(i);
                assert!((fx.get(i, j) - k * (k * x).cos()).abs() < 1e-12);
                assert!(fy.get(i, j).abs() < 1e-12);
                assert!((lap.get(i, j) + k * k * (k * x).sin()).abs() < 1e-12);
                assert!((div.get(i, j) - k * (k * x).cos()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_has_zero_derivatives() {
        let g = grid(16);
        let sp = Spectral::new(g);
        let c = RealField::constant(g, 7.0);
        let (fx, fy) = sp.gradient(&c).unwrap();
        assert!(fx.max_abs() < 1e-13 && fy.max_abs() < 1e-13);
        assert!(sp.laplacian(&c).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn nyquist_mode_has_zero_derivative() {
        let g = grid(16);
        let sp = Spectral::new(g);
        // cos(8x) lives entirely in the Nyquist column
        let f = RealField::from_fn(g, |x, _| (8.0 * x).cos()).unwrap();
        let (fx, _) = sp.gradient(&f).unwrap();
        assert!(fx.max_abs() < 1e-12);
        let lap = sp.laplacian(&f).unwrap();
        assert!((lap.get(0, 0) + 64.0).abs() < 1e-10);
    }

    #[test]
    fn leray_kills_gradient_and_keeps_solenoidal_field() {
        let g = grid(32);
        let sp = Spectral::new(g);
        let phi = RealField::from_fn(g, |x, _| x.sin()).unwrap();
        let (gx, gy) = sp.gradient(&phi).unwrap();
        let (px, py) = sp.leray_project(&gx, &gy).unwrap();
        assert!(px.max_abs() < 1e-12 && py.max_abs() < 1e-12);

        let psi = RealField::from_fn(g, |x, y| (x + 2.0 * y).sin() * (3.0 * x).cos()).unwrap();
        let (px_, py_) = sp.gradient(&psi).unwrap();
        let (u1, u2) = (py_.scale(-1.0), px_);
        assert!(sp.divergence(&u1, &u2).unwrap().max_abs() < 1e-11);
        let (p1, p2) = sp.leray_project(&u1, &u2).unwrap();
        assert!(p1.sub(&u1).unwrap().max_abs() < 1e-12);
        assert!(p2.sub(&u2).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn dealias_keeps_band_and_removes_high_modes() {
        let g = grid(32);
        let sp = Spectral::new(g);
        // cutoff = 10
        let low = RealField::from_fn(g, |x, y| (10.0 * x).sin() + (3.0 * y).cos()).unwrap();
        let kept = sp.dealias_field(&low).unwrap();
        assert!(kept.sub(&low).unwrap().max_abs() < 1e-13);
        let high = RealField::from_fn(g, |x, y| (11.0 * x).sin() * (2.0 * y).cos()).unwrap();
        assert!(sp.dealias_field(&high).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn heat_factor_matches_exponential() {
        let g = grid(16);
        let sp = Spectral::new(g);
        let f = RealField::from_fn(g, |x, y| (2.0 * x).sin() * y.cos()).unwrap();
        let out = sp.inverse(&sp.heat_factor_hat(&sp.forward(&f).unwrap(), 0.5, 0.3));
        let expected = f.scale((-0.5 * 5.0 * 0.3_f64).exp());
        assert!(out.sub(&expected).unwrap().max_abs() < 1e-14);
    }
}
