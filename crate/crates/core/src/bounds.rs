//! Lower bound on the radius of analyticity, the a priori budget, and a
//! Gronwall calculator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{analytic_profile, AnalyticError, AnalyticProfile};
use crate::spectral::SpectralField;

/// Relative margin used to realize strict inequalities.
pub const STRICT_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error("analytic profile did not converge (argmax N = {argmax} of {n_max}); use a smaller epsilon0 or a larger N_max")]
    NotConverged { argmax: usize, n_max: usize },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("sampled functions must share one nonempty time grid")]
    LengthMismatch,
}

fn positive(name: &'static str, value: f64) -> Result<(), BoundsError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(BoundsError::NonPositive { name, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateInputs {
    pub eps0: f64,
    pub s: f64,
    pub degree: u32,
    pub n_max: usize,
    pub kappa: f64,
    /// Value returned for linear equations.
    pub linear_constant: f64,
}

/// `(||u0||_s + sup_N E^{eps0}_N[u0])`, with the profile it was computed from.
pub fn datum_size(u0: &SpectralField, eps0: f64, s: f64, n_max: usize) -> Result<(f64, AnalyticProfile), BoundsError> {
    let profile = analytic_profile(u0, eps0, n_max, s)?;
    if !profile.converged {
        return Err(BoundsError::NotConverged {
            argmax: profile.argmax,
            n_max,
        });
    }
    Ok((u0.sobolev_norm(s) + profile.sup_value, profile))
}

/// `max(1, kappa (||u0||_s + sup_N E^{eps0}_N[u0])^{p-1})`; linear equations get
/// the configured constant, which does not depend on the datum.
pub fn estimate_a(u0: &SpectralField, inputs: &RateInputs) -> Result<f64, BoundsError> {
    if inputs.degree <= 1 {
        positive("linear constant", inputs.linear_constant)?;
        return Ok(inputs.linear_constant);
    }
    positive("kappa", inputs.kappa)?;
    positive("epsilon0", inputs.eps0)?;
    let (size, _) = datum_size(u0, inputs.eps0, inputs.s, inputs.n_max)?;
    Ok((inputs.kappa * size.powi(inputs.degree as i32 - 1)).max(1.0))
}

/// `eps0 exp(-A I(t))`.
pub fn radius_lower_bound(i_samples: &[f64], eps0: f64, a: f64) -> Vec<f64> {
    i_samples.iter().map(|i| eps0 * (-a * i).exp()).collect()
}

/// `(1/B) exp(-A I(t))`.
pub fn radius_lower_bound_remark(i_samples: &[f64], b_const: f64, a: f64) -> Result<Vec<f64>, BoundsError> {
    positive("B", b_const)?;
    Ok(radius_lower_bound(i_samples, 1.0 / b_const, a))
}

/// Smallest admissible `C0 > C max(4 sup_N E, 2)`, with a relative margin.
pub fn c0_floor(profile: &AnalyticProfile, c: f64) -> Result<f64, BoundsError> {
    positive("C", c)?;
    if !profile.converged {
        return Err(BoundsError::NotConverged {
            argmax: profile.argmax,
            n_max: profile.n_max,
        });
    }
    Ok(c0_floor_value(profile.sup_value, c))
}

pub fn c0_floor_value(sup_value: f64, c: f64) -> f64 {
    c * (4.0 * sup_value).max(2.0) * (1.0 + STRICT_MARGIN)
}

/// `C0 exp(C0 I(t))`.
pub fn phi_budget(i_samples: &[f64], c0: f64) -> Vec<f64> {
    i_samples.iter().map(|i| c0 * (c0 * i).exp()).collect()
}

fn cumulative_trapezoid(times: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    out.push(0.0);
    for j in 1..times.len() {
        acc += 0.5 * (times[j] - times[j - 1]) * (f[j] + f[j - 1]);
        out.push(acc);
    }
    out
}

/// `g(t) + a(t) e^{H(t)} int_0^t e^{-H} h g / a`, with `H = int_0^t h`, by trapezoid rule.
pub fn gronwall_bound(times: &[f64], g: &[f64], h: &[f64], a: &[f64]) -> Result<Vec<f64>, BoundsError> {
    let n = times.len();
    if n == 0 || g.len() != n || h.len() != n || a.len() != n {
        return Err(BoundsError::LengthMismatch);
    }
    if let Some(bad) = a.iter().find(|v| !(**v > 0.0)) {
        return Err(BoundsError::NonPositive { name: "a", value: *bad });
    }
    let big_h = cumulative_trapezoid(times, h);
    let inner: Vec<f64> = (0..n).map(|j| (-big_h[j]).exp() * h[j] * g[j] / a[j]).collect();
    let outer = cumulative_trapezoid(times, &inner);
    Ok((0..n).map(|j| g[j] + a[j] * big_h[j].exp() * outer[j]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundVariant {
    /// `eps0 exp(-A I)`.
    #[default]
    Theorem,
    /// `(1/B) exp(-A I)` with `B` taken from the datum.
    Remark,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsTrace {
    pub times: Vec<f64>,
    pub integral: Vec<f64>,
    pub epsilon_lower: Vec<f64>,
    pub a: f64,
    pub b_const: Option<f64>,
    /// Absent when the datum's profile does not converge at `eps0`.
    pub phi: Option<Vec<f64>>,
    pub c0: Option<f64>,
    pub variant: BoundVariant,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::PeriodicGrid;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn single_mode() -> SpectralField {
        let g = PeriodicGrid::new(2.0 * PI, 16).unwrap();
        SpectralField::scalar(g, g.nodes().iter().map(|&x| Complex64::from_polar(1.0, x)).collect()).unwrap()
    }

    fn inputs(degree: u32) -> RateInputs {
        RateInputs {
            eps0: 0.5,
            s: 2.0,
            degree,
            n_max: 24,
            kappa: 1.0,
            linear_constant: 1.0,
        }
    }

    #[test]
    fn estimate_a_examples() {
        let g = PeriodicGrid::new(2.0 * PI, 16).unwrap();
        assert_eq!(estimate_a(&SpectralField::zeros(g, 1), &inputs(2)).unwrap(), 1.0);
        let lin = RateInputs { linear_constant: 3.7, ..inputs(1) };
        assert_eq!(estimate_a(&single_mode(), &lin).unwrap(), 3.7);

        // single mode: ||d^N f||_s = ||f||_s = 2 sqrt(pi) * 2, E_N = eps^{N-1}/N! ||f||_s, max at N = 1
        let hs = (2.0 * PI).sqrt() * 2.0;
        let expected = hs + hs;
        let got = estimate_a(&single_mode(), &inputs(2)).unwrap();
        assert!((got - expected).abs() < 1e-12 * expected);
        let cubic = estimate_a(&single_mode(), &inputs(3)).unwrap();
        assert!((cubic - expected * expected).abs() < 1e-10 * expected * expected);
    }

    #[test]
    fn estimate_a_requires_convergence() {
        let g = PeriodicGrid::new(40.0 * PI, 4096).unwrap();
        let lor = crate::oracles::periodized_lorentzian(g, 1.0);
        let wide = RateInputs { eps0: 2.0, ..inputs(2) };
        assert!(matches!(estimate_a(&lor, &wide), Err(BoundsError::NotConverged { .. })));
    }

    #[test]
    fn lower_bound_examples() {
        assert_eq!(radius_lower_bound(&[0.0; 4], 0.7, 3.0), vec![0.7; 4]);
        let ts = [0.0, 0.3, 0.6, 0.9];
        let i: Vec<f64> = ts.iter().map(|t: &f64| -(1.0 - t).ln()).collect();
        for (eps, t) in radius_lower_bound(&i, 1.0, 0.5).iter().zip(ts) {
            assert!((eps - (1.0 - t).sqrt()).abs() < 1e-15);
        }
        let i: Vec<f64> = ts.to_vec();
        for (eps, t) in radius_lower_bound(&i, 0.8, 2.0).iter().zip(ts) {
            assert!((eps - 0.8 * (-2.0 * t).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn remark_variant() {
        let i = [0.0, 0.2, 0.5];
        assert_eq!(radius_lower_bound_remark(&i, 1.0, 2.0).unwrap(), radius_lower_bound(&i, 1.0, 2.0));
        assert_eq!(radius_lower_bound_remark(&[0.0; 3], 2.0, 1.0).unwrap(), vec![0.5; 3]);
        assert!(radius_lower_bound_remark(&i, 0.0, 1.0).is_err());

        let (b, _) = datum_size(&single_mode(), 0.5, 2.0, 24).unwrap();
        let ts: Vec<f64> = (0..10).map(|j| j as f64 * 0.09).collect();
        let trace: Vec<f64> = ts.iter().map(|t| -(1.0 - t).ln()).collect();
        let eps = radius_lower_bound_remark(&trace, b, 0.5).unwrap();
        for (e, t) in eps.iter().zip(&ts) {
            assert!((e * b - (1.0 - t).sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn c0_examples() {
        let c = c0_floor_value(1.0, 1.0);
        assert!(c > 4.0 && c < 4.0 * (1.0 + 2e-6));
        let c = c0_floor_value(0.1, 1.0);
        assert!(c > 2.0 && c < 2.0 * (1.0 + 2e-6));
        let c = c0_floor_value(1.0, 3.0);
        assert!(c > 12.0 && c < 12.0 * (1.0 + 2e-6));
        let prof = analytic_profile(&single_mode(), 0.5, 24, 2.0).unwrap();
        assert_eq!(c0_floor(&prof, 1.0).unwrap(), c0_floor_value(prof.sup_value, 1.0));
        assert!(c0_floor(&prof, -1.0).is_err());
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi_budget(&[0.0; 3], 2.5), vec![2.5; 3]);
        let ts = [0.0, 0.5, 1.0];
        for (phi, t) in phi_budget(&ts, 2.0).iter().zip(ts) {
            assert!((phi - 2.0 * (2.0 * t).exp()).abs() < 1e-12);
        }
        let i: Vec<f64> = ts.iter().map(|t| 2.0 * t).collect();
        for (phi, t) in phi_budget(&i, 3.0).iter().zip(ts) {
            assert!((phi - 3.0 * (6.0 * t).exp()).abs() < 1e-9);
        }
    }

    fn constant_case(n: usize, c: f64) -> f64 {
        let times: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
        let ones = vec![1.0; n + 1];
        let h = vec![c; n + 1];
        *gronwall_bound(&times, &ones, &h, &ones).unwrap().last().unwrap()
    }

    #[test]
    fn gronwall_examples() {
        let exact = 2.0f64.exp();
        assert!((constant_case(10_000, 2.0) - exact).abs() < 1e-8 * exact);
        let times = [0.0, 0.5, 1.0];
        let g = [1.0, 2.0, 0.5];
        assert_eq!(gronwall_bound(&times, &g, &[0.0; 3], &[1.0; 3]).unwrap(), g.to_vec());
        assert!(gronwall_bound(&times, &g, &[0.0; 3], &[1.0, 0.0, 1.0]).is_err());
        assert!(gronwall_bound(&times, &g, &[0.0; 2], &[1.0; 3]).is_err());
    }

    #[test]
    fn gronwall_second_order() {
        let exact = 2.0f64.exp();
        let e1 = (constant_case(100, 2.0) - exact).abs();
        let e2 = (constant_case(200, 2.0) - exact).abs();
        let ratio = e1 / e2;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn semigroup_restart() {
        let times: Vec<f64> = (0..=1000).map(|j| j as f64 * 1e-3).collect();
        let linf: Vec<f64> = times.iter().map(|t| 1.0 + t.sin()).collect();
        let i = crate::evolution::integrate_path(&times, &linf, 2, crate::evolution::IntegralVariant::Conservative);
        let full = radius_lower_bound(&i, 0.9, 1.5);
        let split = 400;
        let shifted: Vec<f64> = i[split..].iter().map(|v| v - i[split]).collect();
        let restarted = radius_lower_bound(&shifted, full[split], 1.5);
        for (a, b) in restarted.iter().zip(&full[split..]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn bound_monotone(incs in proptest::collection::vec(0.0f64..0.5, 1..40), a in 0.1f64..5.0, eps0 in 0.1f64..3.0) {
            let mut i = vec![0.0];
            for d in incs {
                i.push(i.last().unwrap() + d);
            }
            let eps = radius_lower_bound(&i, eps0, a);
            prop_assert_eq!(eps[0], eps0);
            prop_assert!(eps.windows(2).all(|w| w[1] <= w[0]));
            let tighter = radius_lower_bound(&i, eps0, a * 1.5);
            for (j, (x, y)) in tighter.iter().zip(&eps).enumerate() {
                if i[j] > 0.0 { prop_assert!(x < y); } else { prop_assert_eq!(x, y); }
            }
        }

        #[test]
        fn gronwall_dominates_g(vals in proptest::collection::vec((0.0f64..3.0, 0.0f64..2.0, 0.1f64..4.0), 2..60)) {
            let times: Vec<f64> = (0..vals.len()).map(|j| j as f64 * 0.05).collect();
            let g: Vec<f64> = vals.iter().map(|v| v.0).collect();
            let h: Vec<f64> = vals.iter().map(|v| v.1).collect();
            let a: Vec<f64> = vals.iter().map(|v| v.2).collect();
            let psi = gronwall_bound(&times, &g, &h, &a).unwrap();
            prop_assert!(psi.iter().zip(&g).all(|(p, g)| p >= g));
        }

        #[test]
        fn phi_nondecreasing(incs in proptest::collection::vec(0.0f64..0.5, 1..40), c0 in 2.0f64..10.0) {
            let mut i = vec![0.0];
            for d in incs {
                i.push(i.last().unwrap() + d);
            }
            let phi = phi_budget(&i, c0);
            prop_assert_eq!(phi[0], c0);
            prop_assert!(phi.windows(2).all(|w| w[1] >= w[0]));
        }
    }
}
