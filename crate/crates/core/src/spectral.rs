//! Periodic grids, Fourier transforms, spectral derivatives and norms.
//!
//! Spectra are stored in FFT order (bins `0..M/2`, then `-M/2..0`) and are the
//! coefficients of the field in the orthonormal basis `e^{ik'x}/sqrt(L)`, so
//! that `sum |f_k|^2` equals the L2 norm squared over the box.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("grid size {0} must be a power of two and at least 8")]
    BadSize(usize),
    #[error("box length {0} must be positive and finite")]
    BadLength(f64),
    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("oversample factor {0} not in {{1, 2, 4}}")]
    BadOversample(usize),
}

/// Uniform periodic grid on `[-L/2, L/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid {
    length: f64,
    size: usize,
}

impl PeriodicGrid {
    pub fn new(length: f64, size: usize) -> Result<Self, SpectralError> {
        if !(length.is_finite() && length > 0.0) {
            return Err(SpectralError::BadLength(length));
        }
        if size < 8 || !size.is_power_of_two() {
            return Err(SpectralError::BadSize(size));
        }
        Ok(PeriodicGrid { length, size })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.size as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.size).map(|j| self.node(j)).collect()
    }

    /// Integer wavenumber stored at FFT index `idx`.
    pub fn mode(&self, idx: usize) -> i64 {
        mode_of(idx, self.size)
    }

    /// Physical wavenumber `2 pi k / L` at FFT index `idx`.
    pub fn wavenumber(&self, idx: usize) -> f64 {
        2.0 * PI * self.mode(idx) as f64 / self.length
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.size).map(|i| self.wavenumber(i)).collect()
    }

    /// FFT index of the Nyquist bin `-M/2`.
    pub fn nyquist(&self) -> usize {
        self.size / 2
    }
}

fn mode_of(idx: usize, size: usize) -> i64 {
    if idx < size / 2 {
        idx as i64
    } else {
        idx as i64 - size as i64
    }
}

fn index_of(mode: i64, size: usize) -> usize {
    if mode >= 0 {
        mode as usize
    } else {
        (size as i64 + mode) as usize
    }
}

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<usize, Plans>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plans(size: usize) -> Plans {
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        if let Some(p) = cache.get(&size) {
            return p.clone();
        }
        let p = (planner.plan_fft_forward(size), planner.plan_fft_inverse(size));
        cache.insert(size, p.clone());
        p
    })
}

fn sign(mode: i64) -> f64 {
    if mode.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Samples on a grid of `size` nodes over a box of `length` -> orthonormal coefficients.
pub(crate) fn forward(samples: &[Complex64], length: f64) -> Vec<Complex64> {
    let size = samples.len();
    let mut buf = samples.to_vec();
    plans(size).0.process(&mut buf);
    let scale = length.sqrt() / size as f64;
    for (idx, c) in buf.iter_mut().enumerate() {
        // the grid starts at -L/2, which contributes (-1)^k
        *c *= scale * sign(mode_of(idx, size));
    }
    buf
}

/// Inverse of [`forward`] for coefficients laid out on `coeffs.len()` bins.
pub(crate) fn inverse(coeffs: &[Complex64], length: f64) -> Vec<Complex64> {
    let size = coeffs.len();
    let scale = 1.0 / length.sqrt();
    let mut buf: Vec<Complex64> = coeffs
        .iter()
        .enumerate()
        .map(|(idx, c)| c * (scale * sign(mode_of(idx, size))))
        .collect();
    plans(size).1.process(&mut buf);
    buf
}

/// Re-lay `coeffs` (size M, FFT order) on `target >= M` bins; the Nyquist bin
/// is split evenly between `+M/2` and `-M/2` so the interpolant is preserved.
pub(crate) fn pad(coeffs: &[Complex64], target: usize) -> Vec<Complex64> {
    let m = coeffs.len();
    debug_assert!(target >= m);
    if target == m {
        return coeffs.to_vec();
    }
    let mut out = vec![Complex64::new(0.0, 0.0); target];
    for (idx, c) in coeffs.iter().enumerate() {
        let k = mode_of(idx, m);
        if idx == m / 2 {
            let half = 0.5 * c;
            out[index_of(k, target)] += half;
            out[index_of(-k, target)] += half;
        } else {
            out[index_of(k, target)] += c;
        }
    }
    out
}

/// Keep the modes `|k| < M/2` of a padded spectrum; the Nyquist bin is zeroed.
pub(crate) fn truncate(coeffs: &[Complex64], size: usize) -> Vec<Complex64> {
    let big = coeffs.len();
    let mut out = vec![Complex64::new(0.0, 0.0); size];
    for (idx, slot) in out.iter_mut().enumerate() {
        if idx == size / 2 {
            continue;
        }
        *slot = coeffs[index_of(mode_of(idx, size), big)];
    }
    out
}

/// Smallest even size at least `(factors + 1) * M / 2`; products of that many
/// band-limited factors are then free of aliasing on the retained modes.
pub fn dealiased_size(size: usize, factors: usize) -> usize {
    let need = ((factors.max(1) + 1) * size).div_ceil(2);
    need + need % 2
}

/// An `n`-component complex field sampled on a periodic grid.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: PeriodicGrid,
    values: Vec<Vec<Complex64>>,
    spectrum: OnceLock<Vec<Vec<Complex64>>>,
}

impl SpectralField {
    pub fn from_values(grid: PeriodicGrid, values: Vec<Vec<Complex64>>) -> Result<Self, SpectralError> {
        check_components(&grid, &values)?;
        Ok(SpectralField {
            grid,
            values,
            spectrum: OnceLock::new(),
        })
    }

    pub fn scalar(grid: PeriodicGrid, values: Vec<Complex64>) -> Result<Self, SpectralError> {
        Self::from_values(grid, vec![values])
    }

    pub fn from_real(grid: PeriodicGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().into_iter().map(|x| Complex64::new(f(x), 0.0)).collect();
        SpectralField {
            grid,
            values: vec![values],
            spectrum: OnceLock::new(),
        }
    }

    pub fn zeros(grid: PeriodicGrid, components: usize) -> Self {
        SpectralField {
            grid,
            values: vec![vec![Complex64::new(0.0, 0.0); grid.size()]; components],
            spectrum: OnceLock::new(),
        }
    }

    pub fn from_spectrum(grid: PeriodicGrid, coeffs: Vec<Vec<Complex64>>) -> Result<Self, SpectralError> {
        check_components(&grid, &coeffs)?;
        let values = coeffs.iter().map(|c| inverse(c, grid.length())).collect();
        let spectrum = OnceLock::new();
        let _ = spectrum.set(coeffs);
        Ok(SpectralField { grid, values, spectrum })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Vec<Complex64>] {
        &self.values
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        &self.values[c]
    }

    pub fn spectrum(&self) -> &[Vec<Complex64>] {
        self.spectrum.get_or_init(|| {
            self.values
                .iter()
                .map(|v| forward(v, self.grid.length()))
                .collect()
        })
    }

    pub fn into_values(self) -> Vec<Vec<Complex64>> {
        self.values
    }

    /// Multiply every bin by `(i k')^order`; the Nyquist bin is dropped for odd orders.
    pub fn derivative(&self, order: u32) -> SpectralField {
        if order == 0 {
            return self.clone();
        }
        let ks = self.grid.wavenumbers();
        let nyq = self.grid.nyquist();
        let coeffs = self
            .spectrum()
            .iter()
            .map(|c| {
                c.iter()
                    .zip(&ks)
                    .enumerate()
                    .map(|(idx, (z, &k))| {
                        if idx == nyq && order % 2 == 1 {
                            Complex64::new(0.0, 0.0)
                        } else {
                            z * Complex64::new(0.0, k).powu(order)
                        }
                    })
                    .collect()
            })
            .collect();
        SpectralField::from_spectrum(self.grid, coeffs).expect("same grid")
    }

    /// `( sum_k (1+k'^2)^s |f_k|^2 )^{1/2}`, summed over components.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let ks = self.grid.wavenumbers();
        self.spectrum()
            .iter()
            .flat_map(|c| c.iter().zip(&ks).map(|(z, k)| (1.0 + k * k).powf(s) * z.norm_sqr()))
            .sum::<f64>()
            .sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.sobolev_norm(0.0)
    }

    /// Largest modulus of the trigonometric interpolant over the box.
    ///
    /// The interpolant is scanned on a zero-padded grid `oversample` times finer,
    /// and the best local maxima are then polished by golden-section search on
    /// the exact interpolant.
    pub fn sup_norm(&self, oversample: usize) -> Result<f64, SpectralError> {
        if !matches!(oversample, 1 | 2 | 4) {
            return Err(SpectralError::BadOversample(oversample));
        }
        let m = self.grid.size();
        let fine = m * oversample;
        let h = self.grid.length() / fine as f64;
        let mut best = 0.0f64;
        for (c, coeffs) in self.spectrum().iter().enumerate() {
            let dense = if oversample == 1 {
                self.values[c].clone()
            } else {
                inverse(&pad(coeffs, fine), self.grid.length())
            };
            let moduli: Vec<f64> = dense.iter().map(|z| z.norm()).collect();
            best = best.max(moduli.iter().cloned().fold(0.0, f64::max));
            // candidate local maxima, largest first
            let mut peaks: Vec<usize> = (0..fine)
                .filter(|&j| {
                    let l = moduli[(j + fine - 1) % fine];
                    let r = moduli[(j + 1) % fine];
                    moduli[j] >= l && moduli[j] >= r && moduli[j] > 0.0
                })
                .collect();
            peaks.sort_by(|a, b| moduli[*b].total_cmp(&moduli[*a]));
            let interp = Interpolant::new(&self.grid, coeffs);
            for &j in peaks.iter().take(4) {
                let centre = -0.5 * self.grid.length() + j as f64 * h;
                best = best.max(golden_max(|x| interp.modulus(x), centre - h, centre + h));
            }
        }
        Ok(best)
    }

    /// Max modulus over the two nodes adjacent to the box edge.
    pub fn edge_amplitude(&self) -> f64 {
        let m = self.grid.size();
        self.values
            .iter()
            .map(|v| v[0].norm().max(v[m - 1].norm()))
            .fold(0.0, f64::max)
    }

    pub fn linear_combination(&self, a: Complex64, other: &SpectralField, b: Complex64) -> SpectralField {
        assert_eq!(self.components(), other.components());
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| u.iter().zip(v).map(|(p, q)| a * p + b * q).collect())
            .collect();
        SpectralField {
            grid: self.grid,
            values,
            spectrum: OnceLock::new(),
        }
    }

    pub fn scale(&self, a: Complex64) -> SpectralField {
        let values = self
            .values
            .iter()
            .map(|u| u.iter().map(|p| a * p).collect())
            .collect();
        SpectralField {
            grid: self.grid,
            values,
            spectrum: OnceLock::new(),
        }
    }

    /// Largest pointwise modulus of `self - other` on the nodes.
    pub fn max_abs_diff(&self, other: &SpectralField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .flat_map(|(u, v)| u.iter().zip(v).map(|(p, q)| (p - q).norm()))
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|u| u.iter().map(|p| p.norm()))
            .fold(0.0, f64::max)
    }

    /// `<self, other>` in L2 of the box, summed over components.
    pub fn inner(&self, other: &SpectralField) -> Complex64 {
        self.spectrum()
            .iter()
            .zip(other.spectrum())
            .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| p * q.conj()))
            .sum()
    }

    /// Copy with the Nyquist bin of every component removed.
    pub fn without_nyquist(&self) -> SpectralField {
        let nyq = self.grid.nyquist();
        let coeffs = self
            .spectrum()
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c[nyq] = Complex64::new(0.0, 0.0);
                c
            })
            .collect();
        SpectralField::from_spectrum(self.grid, coeffs).expect("same grid")
    }
}

fn check_components(grid: &PeriodicGrid, comps: &[Vec<Complex64>]) -> Result<(), SpectralError> {
    for c in comps {
        if c.len() != grid.size() {
            return Err(SpectralError::SizeMismatch {
                expected: grid.size(),
                found: c.len(),
            });
        }
    }
    Ok(())
}

/// Direct evaluation of the trigonometric interpolant at arbitrary `x`.
pub struct Interpolant {
    modes: Vec<(f64, Complex64)>,
}

impl Interpolant {
    pub fn new(grid: &PeriodicGrid, coeffs: &[Complex64]) -> Self {
        let scale = 1.0 / grid.length().sqrt();
        let m = grid.size();
        let mut modes = Vec::with_capacity(m + 1);
        for (idx, c) in coeffs.iter().enumerate() {
            if *c == Complex64::new(0.0, 0.0) {
                continue;
            }
            let k = grid.wavenumber(idx);
            if idx == m / 2 {
                modes.push((k, 0.5 * c * scale));
                modes.push((-k, 0.5 * c * scale));
            } else {
                modes.push((k, c * scale));
            }
        }
        Interpolant { modes }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.modes
            .iter()
            .map(|(k, c)| c * Complex64::from_polar(1.0, k * x))
            .sum()
    }

    pub fn modulus(&self, x: f64) -> f64 {
        self.eval(x).norm()
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = fc.max(fd);
    while (b - a).abs() > 1e-13 * (1.0 + a.abs()) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        best = best.max(fc).max(fd);
    }
    best
}
