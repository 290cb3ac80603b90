//! Analytic energy functional and radius-of-analyticity measurements.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral::SpectralField;

pub const DEFAULT_N_MAX: usize = 24;
/// Bins below this fraction of the peak amplitude are treated as round-off.
pub const NOISE_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("N_max = {0} is below the minimum of 8")]
    TruncationTooSmall(usize),
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("time {t} lies outside the lifespan of {oracle}")]
    OutsideLifespan { oracle: &'static str, t: f64 },
    #[error("degree p must be an integer >= 2, got {0}")]
    BadDegree(u32),
}

/// Log of `||d^N f||_s` with sub-floor bins removed; `None` when the result is zero.
fn log_derivative_norm(f: &SpectralField, order: u32, s: f64) -> Option<f64> {
    let grid = f.grid();
    let ks = grid.wavenumbers();
    let nyq = grid.nyquist();
    let spec = f.spectrum();
    let peak = spec
        .iter()
        .flat_map(|c| c.iter().map(|z| z.norm()))
        .fold(0.0, f64::max);
    if peak == 0.0 {
        return None;
    }
    let floor = NOISE_FLOOR * peak;
    let mut logs = Vec::new();
    for comp in spec {
        for (idx, (z, &k)) in comp.iter().zip(&ks).enumerate() {
            let a = z.norm();
            if a < floor || (idx == nyq && order % 2 == 1) {
                continue;
            }
            if order > 0 && k == 0.0 {
                continue;
            }
            let mut l = 2.0 * a.ln() + s * (1.0 + k * k).ln();
            if order > 0 {
                l += 2.0 * order as f64 * k.abs().ln();
            }
            logs.push(l);
        }
    }
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return None;
    }
    let sum: f64 = logs.iter().map(|l| (l - m).exp()).sum();
    Some(0.5 * (m + sum.ln()))
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn log_energy_term(f: &SpectralField, epsilon: f64, order: u32, s: f64) -> Option<f64> {
    let l = log_derivative_norm(f, order, s)?;
    Some((order as f64 - 1.0) * epsilon.ln() - ln_factorial(order) + l)
}

/// `eps^{N-1}/N! * ||d^N f||_s` in one space dimension, computed in log domain.
pub fn energy_term(f: &SpectralField, epsilon: f64, order: u32, s: f64) -> f64 {
    assert!(order >= 1, "energy terms start at N = 1");
    log_energy_term(f, epsilon, order, s).map_or(0.0, f64::exp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticProfile {
    pub epsilon: f64,
    pub s: f64,
    pub n_max: usize,
    /// `ln E_N` for `N = 1..=n_max`; `-inf` for vanishing terms.
    pub log_terms: Vec<f64>,
    pub sup_value: f64,
    pub argmax: usize,
    pub converged: bool,
}

impl AnalyticProfile {
    pub fn terms(&self) -> Vec<f64> {
        self.log_terms.iter().map(|l| l.exp()).collect()
    }

    pub fn term(&self, n: usize) -> f64 {
        self.log_terms[n - 1].exp()
    }
}

/// Truncated profile of `sup_N E^eps_N[f]`. Convergence means the last five
/// terms are strictly decreasing (or the field is zero).
pub fn analytic_profile(f: &SpectralField, epsilon: f64, n_max: usize, s: f64) -> Result<AnalyticProfile, AnalyticError> {
    if n_max < 8 {
        return Err(AnalyticError::TruncationTooSmall(n_max));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(AnalyticError::BadEpsilon(epsilon));
    }
    let log_terms: Vec<f64> = (1..=n_max as u32)
        .map(|n| log_energy_term(f, epsilon, n, s).unwrap_or(f64::NEG_INFINITY))
        .collect();
    let (argmax_idx, max_log) = log_terms
        .iter()
        .cloned()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, l)| if l > acc.1 { (i, l) } else { acc });
    let all_zero = max_log == f64::NEG_INFINITY;
    let argmax = argmax_idx + 1;
    let converged = all_zero
        || (argmax + 5 <= n_max && (n_max - 5..n_max).all(|i| log_terms[i] < log_terms[i - 1]));
    Ok(AnalyticProfile {
        epsilon,
        s,
        n_max,
        log_terms,
        sup_value: if all_zero { 0.0 } else { max_log.exp() },
        argmax,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusMethod {
    SpectrumFit,
    Pole,
    Oracle,
}

impl RadiusMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            RadiusMethod::SpectrumFit => "spectrum_fit",
            RadiusMethod::Pole => "pole",
            RadiusMethod::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    /// Lower band edge as a fraction of the Nyquist wavenumber.
    pub low_fraction: f64,
    /// Bins below `noise_floor * peak` end the band.
    pub noise_floor: f64,
    pub min_decades: f64,
    pub max_residual: f64,
    pub min_bins: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            low_fraction: 0.1,
            noise_floor: NOISE_FLOOR,
            min_decades: 4.0,
            max_residual: 0.5,
            min_bins: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusEstimate {
    pub value: Option<f64>,
    pub method: RadiusMethod,
    /// Wavenumber interval `[k_lo, k_hi]` used by the fit.
    pub fit_band: Option<(f64, f64)>,
    pub decades: f64,
    pub residual: f64,
    pub bins: usize,
    pub reliable: bool,
    /// The spectrum hits the noise floor before the fit band starts, so the
    /// radius is larger than the grid can resolve; `value` is then a lower estimate.
    pub below_resolution: bool,
}

impl RadiusEstimate {
    pub fn exact(value: f64, method: RadiusMethod) -> Self {
        RadiusEstimate {
            value: Some(value),
            method,
            fit_band: None,
            decades: f64::INFINITY,
            residual: 0.0,
            bins: 0,
            reliable: true,
            below_resolution: false,
        }
    }
}

/// Per-|k| envelope: root-sum-square over components, max over the `+k`/`-k` pair.
fn envelope(f: &SpectralField) -> Vec<(f64, f64)> {
    let grid = f.grid();
    let m = grid.size();
    let spec = f.spectrum();
    let amp = |idx: usize| -> f64 { spec.iter().map(|c| c[idx].norm_sqr()).sum::<f64>().sqrt() };
    (0..m / 2)
        .map(|k| {
            let a = if k == 0 { amp(0) } else { amp(k).max(amp(m - k)) };
            (grid.wavenumber(k), a)
        })
        .collect()
}

/// Fit `ln|f_k| ~ c - r |k'|` over the band between `low_fraction` of the
/// Nyquist wavenumber and the first bin below the noise floor; `r` is the radius.
pub fn radius_from_spectrum(f: &SpectralField, opts: &FitOptions) -> RadiusEstimate {
    let env = envelope(f);
    let peak = env.iter().map(|e| e.1).fold(0.0, f64::max);
    let mut est = RadiusEstimate {
        value: None,
        method: RadiusMethod::SpectrumFit,
        fit_band: None,
        decades: 0.0,
        residual: f64::INFINITY,
        bins: 0,
        reliable: false,
        below_resolution: false,
    };
    if peak == 0.0 {
        return est;
    }
    let floor = opts.noise_floor * peak;
    let k_nyq = env.len() as f64 * env[1].0;
    let k_lo = opts.low_fraction * k_nyq;
    let cutoff = env.iter().position(|e| e.1 < floor).unwrap_or(env.len());
    let band: Vec<(f64, f64)> = env[..cutoff]
        .iter()
        .filter(|e| e.0 >= k_lo && e.0 > 0.0)
        .map(|e| (e.0, e.1.ln()))
        .collect();
    if cutoff < env.len() && env[cutoff].0 < k_lo {
        // decays to round-off before the band: decay rate is at least ln(1/floor)/k_cut
        est.below_resolution = true;
        est.value = Some((1.0 / opts.noise_floor).ln() / env[cutoff].0);
    }
    est.bins = band.len();
    if band.len() < opts.min_bins.max(2) {
        return est;
    }
    let n = band.len() as f64;
    let mx = band.iter().map(|b| b.0).sum::<f64>() / n;
    let my = band.iter().map(|b| b.1).sum::<f64>() / n;
    let sxx: f64 = band.iter().map(|b| (b.0 - mx).powi(2)).sum();
    let sxy: f64 = band.iter().map(|b| (b.0 - mx) * (b.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (band
        .iter()
        .map(|b| (b.1 - intercept - slope * b.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let (lo, hi) = (band[0].0, band[band.len() - 1].0);
    est.fit_band = Some((lo, hi));
    est.decades = (-slope) * (hi - lo) / std::f64::consts::LN_10;
    est.residual = residual;
    est.value = Some(-slope);
    est.below_resolution = false;
    est.reliable = slope < 0.0 && est.decades >= opts.min_decades && residual <= opts.max_residual;
    est
}

/// Closed-form solutions with known complex singularities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleId {
    /// `u = (1 + x^2 e^{2t})^{-1}`, solving `u_t - x u_x = 0`.
    Example1,
    /// `u = ((1+x^2)^{p-1} - t)^{-1/(p-1)}`, solving `u_t = u^p/(p-1)` on `[0, 1)`.
    Example2 { p: u32 },
}

/// Distance from the real axis to the nearest singularity of the oracle at time `t`.
pub fn pole_radius(oracle: OracleId, t: f64) -> Result<f64, AnalyticError> {
    match oracle {
        OracleId::Example1 => Ok((-t).exp()),
        OracleId::Example2 { p } => {
            if p < 2 {
                return Err(AnalyticError::BadDegree(p));
            }
            if !(0.0..1.0).contains(&t) {
                return Err(AnalyticError::OutsideLifespan { oracle: "example2", t });
            }
            Ok((1.0 - t.powf(1.0 / (p as f64 - 1.0))).sqrt())
        }
    }
}
