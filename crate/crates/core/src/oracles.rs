//! Closed-form solutions with known singularities and the runner that sets
//! measured radii against the lower bound.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{pole_radius, radius_from_spectrum, AnalyticError, FitOptions, OracleId, RadiusEstimate, RadiusMethod};
use crate::bounds::{self, BoundVariant, BoundsError, BoundsTrace, RateInputs};
use crate::evolution::{self, BlowUp, EnergyReport, EvolutionError, IntegralVariant, SolveOptions};
use crate::expr::{parse_expr, Expr};
use crate::spectral::{PeriodicGrid, SpectralError, SpectralField};
use crate::system::{self, Monomial, SystemError, SystemSpec};

/// Raw edge values above this make the periodic surrogate meaningless.
pub const MAX_EDGE_VALUE: f64 = 1e-2;
/// Relative tolerance of a comparison row.
pub const ROW_TOLERANCE: f64 = 1e-3;
/// Pole distance of the transport datum.
pub const TRANSPORT_R0: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("box of length {length} is too narrow: the datum is still {edge:e} at the edge")]
    InsufficientBox { length: f64, edge: f64 },
    #[error("solution blew up at t = {} before the requested time {requested}", .blow_up.time)]
    BlowUp { blow_up: BlowUp, requested: f64 },
    #[error("{0}")]
    BadCase(String),
}

impl OracleError {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            OracleError::BlowUp { .. } | OracleError::Evolution(EvolutionError::Cfl { .. }) | OracleError::Bounds(BoundsError::NotConverged { .. })
        )
    }
}

/// Sum over periods of `1 / (r^2 + (x + mL)^2)`.
pub fn periodized_kernel(x: f64, r: f64, length: f64) -> f64 {
    let a = 2.0 * PI * r / length;
    let b = PI * x / length;
    let denom = 2.0 * (0.5 * a).sinh().powi(2) + 2.0 * b.sin().powi(2);
    PI / (r * length) * a.sinh() / denom
}

/// Periodic image of `(1 + x^2/r^2)^{-1}`; its coefficients decay exactly like `e^{-r|k'|}`.
pub fn periodized_lorentzian(grid: PeriodicGrid, r: f64) -> SpectralField {
    let length = grid.length();
    SpectralField::from_real(grid, |x| r * r * periodized_kernel(x, r, length))
}

/// A closed form sampled on a grid.
#[derive(Debug, Clone)]
pub struct OracleSample {
    pub field: SpectralField,
    pub exact_radius: f64,
    /// Largest difference between the periodic surrogate and the whole-line function on the nodes.
    pub box_error: f64,
}

fn check_box(grid: &PeriodicGrid, edge: f64) -> Result<(), OracleError> {
    if edge > MAX_EDGE_VALUE {
        return Err(OracleError::InsufficientBox {
            length: grid.length(),
            edge,
        });
    }
    Ok(())
}

fn box_error(field: &SpectralField, raw: impl Fn(f64) -> f64) -> f64 {
    let grid = field.grid();
    grid.nodes()
        .iter()
        .zip(field.component(0))
        .map(|(&x, z)| (z.re - raw(x)).abs())
        .fold(0.0, f64::max)
}

/// `(1 + x^2 e^{2t})^{-1}` on the whole line.
pub fn example1_value(t: f64, x: f64) -> f64 {
    1.0 / (1.0 + x * x * (2.0 * t).exp())
}

/// `((1+x^2)^{p-1} - t)^{-1/(p-1)}` on the whole line.
pub fn example2_value(p: u32, t: f64, x: f64) -> f64 {
    let q = p as f64 - 1.0;
    ((1.0 + x * x).powf(q) - t).powf(-1.0 / q)
}

/// Solution of `u_t - x u_x = 0` with `u_0 = (1+x^2)^{-1}`, periodized.
pub fn example1(t: f64, grid: PeriodicGrid) -> Result<OracleSample, OracleError> {
    check_box(&grid, example1_value(t, 0.5 * grid.length()))?;
    let r = (-t).exp();
    let field = periodized_lorentzian(grid, r);
    Ok(OracleSample {
        box_error: box_error(&field, |x| example1_value(t, x)),
        field,
        exact_radius: pole_radius(OracleId::Example1, t)?,
    })
}

/// Solution of `u_t = u^p/(p-1)` with `u_0 = (1+x^2)^{-1}`, periodized.
///
/// For `p = 2` this is a Lorentzian of width `sqrt(1-t)`; otherwise the
/// remainder after subtracting `(1+x^2)^{-1}` decays like `|x|^{-2p}` and is
/// summed over images directly.
pub fn example2(p: u32, t: f64, grid: PeriodicGrid) -> Result<OracleSample, OracleError> {
    let exact_radius = pole_radius(OracleId::Example2 { p }, t)?;
    let length = grid.length();
    check_box(&grid, example2_value(p, t, 0.5 * length))?;
    let field = if p == 2 {
        SpectralField::from_real(grid, |x| periodized_kernel(x, (1.0 - t).sqrt(), length))
    } else {
        SpectralField::from_real(grid, |x| {
            let images: f64 = (-64..=64)
                .map(|m| {
                    let y = x + m as f64 * length;
                    example2_value(p, t, y) - 1.0 / (1.0 + y * y)
                })
                .sum();
            periodized_kernel(x, 1.0, length) + images
        })
    };
    Ok(OracleSample {
        box_error: box_error(&field, |x| example2_value(p, t, x)),
        field,
        exact_radius,
    })
}

/// `sinh(r0) / (cosh(r0) - cos x)`: coefficients proportional to `e^{-r0 |k|}`.
pub fn transport_datum(grid: PeriodicGrid, r0: f64) -> SpectralField {
    SpectralField::from_real(grid, |x| r0.sinh() / (r0.cosh() - x.cos()))
}

/// Foot at time 0 of the characteristic of `dx/dt = sin x` through `(t, x)`,
/// by classical RK4 on the backward flow.
pub fn characteristic_foot(x: f64, t: f64, substeps: usize) -> f64 {
    let h = t / substeps as f64;
    let f = |y: f64| -y.sin();
    let mut y = x;
    for _ in 0..substeps {
        let k1 = f(y);
        let k2 = f(y + 0.5 * h * k1);
        let k3 = f(y + 0.5 * h * k2);
        let k4 = f(y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    y
}

/// Reference solution of `u_t + sin(x) u_x = 0` from [`transport_datum`].
pub fn transport_reference(grid: PeriodicGrid, r0: f64, t: f64) -> SpectralField {
    let substeps = ((t / 1e-3).ceil() as usize).max(1);
    SpectralField::from_real(grid, |x| {
        let x0 = characteristic_foot(x, t, substeps);
        r0.sinh() / (r0.cosh() - x0.cos())
    })
}

/// Exact radius of the transported datum: `2 artanh(min(c, 1/c))`, `c = e^t tanh(r0/2)`.
/// The singularities pass through infinity when `c = 1`.
pub fn transport_radius(r0: f64, t: f64) -> f64 {
    let c = t.exp() * (0.5 * r0).tanh();
    if (c - 1.0).abs() < 1e-15 {
        return f64::INFINITY;
    }
    2.0 * c.min(1.0 / c).atanh()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseId {
    Example1,
    Example2,
    TransportSinx,
    SchrodingerFree,
    SchrodingerPotential,
    Custom,
}

impl CaseId {
    pub const ALL: [CaseId; 6] = [
        CaseId::Example1,
        CaseId::Example2,
        CaseId::TransportSinx,
        CaseId::SchrodingerFree,
        CaseId::SchrodingerPotential,
        CaseId::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseId::Example1 => "example1",
            CaseId::Example2 => "example2",
            CaseId::TransportSinx => "transport_sinx",
            CaseId::SchrodingerFree => "schrodinger_free",
            CaseId::SchrodingerPotential => "schrodinger_potential",
            CaseId::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<CaseId> {
        CaseId::ALL.into_iter().find(|c| c.as_str() == s)
    }

    pub fn is_closed_form(self) -> bool {
        matches!(self, CaseId::Example1 | CaseId::Example2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    /// Pole locations for closed forms, spectrum fit otherwise.
    #[default]
    Auto,
    SpectrumFit,
    Pole,
}

/// Everything [`run_case`] needs, fully resolved.
#[derive(Debug, Clone)]
pub struct CaseSetup {
    pub id: CaseId,
    pub grid: PeriodicGrid,
    pub times: Vec<f64>,
    pub dt: f64,
    pub s: f64,
    pub eps0: f64,
    pub n_max: usize,
    pub oversample: usize,
    pub fit: FitOptions,
    pub variant: IntegralVariant,
    pub bound: BoundVariant,
    pub kappa: f64,
    pub linear_constant: f64,
    /// Overrides the estimated rate constant.
    pub a: Option<f64>,
    /// Constant `C` in the `C0` floor.
    pub c: f64,
    pub method: MethodChoice,
    /// Degree of the closed-form nonlinearity (example2).
    pub p: u32,
    /// Solve numerically next to the closed form and report the discrepancy.
    pub cross_check: bool,
    pub spec: Option<SystemSpec>,
    pub u0: Option<SpectralField>,
}

impl CaseSetup {
    /// Defaults for a named case. `custom` still needs a spec and datum.
    pub fn preset(id: CaseId) -> CaseSetup {
        let wide = PeriodicGrid::new(40.0 * PI, 4096).expect("valid grid");
        let torus = PeriodicGrid::new(2.0 * PI, 128).expect("valid grid");
        let mut setup = CaseSetup {
            id,
            grid: torus,
            times: vec![0.0, 0.5, 1.0],
            dt: 0.01,
            s: 2.0,
            eps0: 0.5,
            n_max: crate::analytic::DEFAULT_N_MAX,
            oversample: 4,
            fit: FitOptions::default(),
            variant: IntegralVariant::Conservative,
            bound: BoundVariant::Theorem,
            kappa: 1.0,
            linear_constant: 1.0,
            a: None,
            c: 1.0,
            method: MethodChoice::Auto,
            p: 2,
            cross_check: false,
            spec: None,
            u0: None,
        };
        match id {
            CaseId::Example1 => {
                setup.grid = wide;
                setup.eps0 = 1.0;
                setup.p = 1;
            }
            CaseId::Example2 => {
                setup.grid = wide;
                setup.times = vec![0.0, 0.25, 0.5, 0.75];
                setup.eps0 = 1.0;
                setup.a = Some(0.5);
                setup.variant = IntegralVariant::Example;
                setup.dt = 1e-3;
            }
            CaseId::TransportSinx => {
                setup.times = vec![0.0, 0.5, 1.5, 2.0, 2.5];
                setup.spec = Some(SystemSpec::scalar_transport(parse_expr("sin(x)").expect("valid")));
                setup.u0 = Some(transport_datum(torus, TRANSPORT_R0));
                setup.cross_check = true;
            }
            CaseId::SchrodingerFree => {
                setup.spec = Some(system::schrodinger_system(&[Expr::zero()], Expr::zero(), vec![]).expect("valid"));
                setup.u0 = Some(transport_datum(torus, TRANSPORT_R0));
            }
            CaseId::SchrodingerPotential => {
                let v = parse_expr("cos(x)").expect("valid");
                setup.spec = Some(system::schrodinger_system(&[Expr::zero()], v, vec![]).expect("valid"));
                setup.u0 = Some(transport_datum(torus, TRANSPORT_R0));
            }
            CaseId::Custom => {}
        }
        setup
    }

    fn degree(&self) -> u32 {
        match (self.id, &self.spec) {
            (CaseId::Example1, _) => 1,
            (CaseId::Example2, _) => self.p,
            (_, Some(spec)) => spec.degree(),
            (_, None) => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub t: f64,
    pub measured: Option<f64>,
    pub method: RadiusMethod,
    pub reliable: bool,
    pub exact: Option<f64>,
    pub bound: f64,
    pub margin: Option<f64>,
    pub pass: bool,
}

impl ComparisonRow {
    pub fn new(t: f64, estimate: &RadiusEstimate, exact: Option<f64>, bound: f64) -> Self {
        let margin = estimate.value.map(|m| m - bound);
        ComparisonRow {
            t,
            measured: estimate.value,
            method: estimate.method,
            reliable: estimate.reliable || estimate.method != RadiusMethod::SpectrumFit,
            exact,
            bound,
            margin,
            pass: margin.is_some_and(|m| m >= -ROW_TOLERANCE * bound),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub steps: usize,
    pub dt: f64,
    pub max_cfl: f64,
    pub boundary_decay_initial: f64,
    pub boundary_decay_final: f64,
    pub padded_size: usize,
    pub blow_up: Option<BlowUp>,
    /// Largest nodal difference from the reference solution over the checkpoints.
    pub reference_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub case: CaseId,
    pub rows: Vec<ComparisonRow>,
    pub estimates: Vec<RadiusEstimate>,
    pub trace: BoundsTrace,
    pub box_error: Option<f64>,
    pub solve: Option<SolveSummary>,
    pub energy: Option<EnergyReport>,
}

impl CaseOutcome {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Fine trapezoid grid from 0 to `t_end` that contains every requested time.
fn quadrature_grid(times: &[f64], per_unit: usize) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut sorted: Vec<f64> = times.iter().cloned().filter(|t| *t > 0.0).collect();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut start = 0.0;
    for t in sorted {
        let n = (((t - start) * per_unit as f64).ceil() as usize).max(1);
        for j in 1..=n {
            out.push(if j == n { t } else { start + (t - start) * j as f64 / n as f64 });
        }
        start = t;
    }
    out
}

fn lookup(grid_times: &[f64], values: &[f64], t: f64) -> f64 {
    let idx = grid_times
        .iter()
        .position(|g| (g - t).abs() <= 1e-12 * t.max(1.0))
        .expect("requested times lie on the quadrature grid");
    values[idx]
}

fn check_times(times: &[f64]) -> Result<(), OracleError> {
    if times.is_empty() {
        return Err(OracleError::BadCase("at least one time is required".into()));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(OracleError::BadCase("times must be finite and nonnegative".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(OracleError::BadCase("times must be strictly increasing".into()));
    }
    Ok(())
}

struct Measured {
    estimate: RadiusEstimate,
    exact: Option<f64>,
}

/// Compare measured radii with the lower bound at the requested times.
pub fn run_case(setup: &CaseSetup) -> Result<CaseOutcome, OracleError> {
    check_times(&setup.times)?;
    if !(setup.eps0 > 0.0) {
        return Err(OracleError::BadCase(format!("eps0 must be positive, got {}", setup.eps0)));
    }
    if setup.id.is_closed_form() {
        run_closed_form(setup)
    } else {
        run_solver(setup)
    }
}

fn rate_inputs(setup: &CaseSetup) -> RateInputs {
    RateInputs {
        eps0: setup.eps0,
        s: setup.s,
        degree: setup.degree(),
        n_max: setup.n_max,
        kappa: setup.kappa,
        linear_constant: setup.linear_constant,
    }
}

/// Rate constant, remark prefactor and `C0` for the datum. The datum's
/// profile is only required where the constants depend on it; `C0` is left
/// out when the profile does not converge at `eps0`.
fn constants(setup: &CaseSetup, u0: &SpectralField) -> Result<(f64, Option<f64>, Option<f64>), OracleError> {
    let a = match setup.a {
        Some(a) if a > 0.0 => a,
        Some(a) => return Err(OracleError::BadCase(format!("A must be positive, got {a}"))),
        None => bounds::estimate_a(u0, &rate_inputs(setup))?,
    };
    if !(setup.c > 0.0) {
        return Err(OracleError::BadCase(format!("C must be positive, got {}", setup.c)));
    }
    let datum = bounds::datum_size(u0, setup.eps0, setup.s, setup.n_max);
    let b = match setup.bound {
        BoundVariant::Theorem => None,
        BoundVariant::Remark => Some(datum.clone()?.0.powi(setup.degree() as i32 - 1)),
    };
    let c0 = datum.ok().map(|(_, profile)| bounds::c0_floor_value(profile.sup_value, setup.c));
    Ok((a, b, c0))
}

fn trace(setup: &CaseSetup, integral: Vec<f64>, conservative: Vec<f64>, a: f64, b: Option<f64>, c0: Option<f64>) -> Result<BoundsTrace, OracleError> {
    let epsilon_lower = match b {
        None => bounds::radius_lower_bound(&integral, setup.eps0, a),
        Some(b) => bounds::radius_lower_bound_remark(&integral, b, a)?,
    };
    Ok(BoundsTrace {
        times: setup.times.clone(),
        integral,
        epsilon_lower,
        a,
        b_const: b,
        phi: c0.map(|c0| bounds::phi_budget(&conservative, c0)),
        c0,
        variant: setup.bound,
    })
}

fn run_closed_form(setup: &CaseSetup) -> Result<CaseOutcome, OracleError> {
    let p = setup.degree();
    let sample = |t: f64| match setup.id {
        CaseId::Example1 => example1(t, setup.grid),
        _ => example2(setup.p, t, setup.grid),
    };
    // sup over the line of the closed form, which sits at x = 0
    let linf = |t: f64| match setup.id {
        CaseId::Example1 => 1.0,
        _ => (1.0 - t).powf(-1.0 / (setup.p as f64 - 1.0)),
    };
    let oracle = match setup.id {
        CaseId::Example1 => OracleId::Example1,
        _ => OracleId::Example2 { p: setup.p },
    };

    let quad = quadrature_grid(&setup.times, 10_000);
    let linf_path: Vec<f64> = quad.iter().map(|&t| linf(t)).collect();
    let i_variant = evolution::integrate_path(&quad, &linf_path, p, setup.variant);
    let i_cons = evolution::integrate_path(&quad, &linf_path, p, IntegralVariant::Conservative);

    let u0 = sample(0.0)?;
    let (a, b, c0) = constants(setup, &u0.field)?;

    let mut measured = Vec::new();
    let mut box_err = 0.0f64;
    for &t in &setup.times {
        let s = sample(t)?;
        box_err = box_err.max(s.box_error);
        let estimate = match setup.method {
            MethodChoice::Auto | MethodChoice::Pole => RadiusEstimate::exact(pole_radius(oracle, t)?, RadiusMethod::Pole),
            MethodChoice::SpectrumFit => radius_from_spectrum(&s.field, &setup.fit),
        };
        measured.push(Measured {
            estimate,
            exact: Some(s.exact_radius),
        });
    }

    let solve = if setup.cross_check && setup.id == CaseId::Example2 {
        Some(example2_cross_check(setup, &u0.field)?)
    } else {
        None
    };

    let integral: Vec<f64> = setup.times.iter().map(|&t| lookup(&quad, &i_variant, t)).collect();
    let conservative: Vec<f64> = setup.times.iter().map(|&t| lookup(&quad, &i_cons, t)).collect();
    let trace = trace(setup, integral, conservative, a, b, c0)?;
    Ok(assemble(setup, measured, trace, Some(box_err), solve, None))
}

/// Solve the pointwise ODE on the sampled datum and compare with its exact solution.
fn example2_cross_check(setup: &CaseSetup, u0: &SpectralField) -> Result<SolveSummary, OracleError> {
    let p = setup.p;
    let mut exps = vec![p];
    exps.truncate(1);
    let spec = SystemSpec::new(
        1,
        None,
        system::zero_matrix(1),
        system::zero_matrix(1),
        vec![Monomial {
            component: 0,
            exponents: exps,
            coeff: Expr::Num(1.0 / (p as f64 - 1.0)),
        }],
        None,
    )?;
    let checkpoints: Vec<f64> = setup.times.iter().cloned().filter(|t| *t > 0.0).collect();
    let opts = SolveOptions {
        stride: usize::MAX,
        s: setup.s,
        oversample: setup.oversample,
    };
    let mut summary = SolveSummary {
        steps: 0,
        dt: setup.dt,
        max_cfl: 0.0,
        boundary_decay_initial: u0.edge_amplitude(),
        boundary_decay_final: u0.edge_amplitude(),
        padded_size: 0,
        blow_up: None,
        reference_error: Some(0.0),
    };
    if checkpoints.is_empty() {
        return Ok(summary);
    }
    let res = evolution::solve_at(&spec, u0, &checkpoints, setup.dt, &opts)?;
    if let Some(b) = res.blow_up {
        return Err(OracleError::BlowUp {
            blow_up: b,
            requested: *checkpoints.last().unwrap(),
        });
    }
    let q = p as f64 - 1.0;
    let mut err = 0.0f64;
    for (t, f) in res.snapshots.iter().skip(1) {
        for (z0, z) in u0.component(0).iter().zip(f.component(0)) {
            let exact = (z0.re.powf(-q) - t).powf(-1.0 / q);
            err = err.max((z - exact).norm() / exact);
        }
    }
    summary.steps = res.times.len() - 1;
    summary.padded_size = res.diagnostics.padded_size;
    summary.boundary_decay_final = res.diagnostics.boundary_decay_final;
    summary.reference_error = Some(err);
    Ok(summary)
}

fn run_solver(setup: &CaseSetup) -> Result<CaseOutcome, OracleError> {
    let spec = setup
        .spec
        .as_ref()
        .ok_or_else(|| OracleError::BadCase(format!("case {} needs a system", setup.id.as_str())))?;
    let u0 = setup
        .u0
        .as_ref()
        .ok_or_else(|| OracleError::BadCase(format!("case {} needs an initial datum", setup.id.as_str())))?;
    if setup.method == MethodChoice::Pole {
        return Err(OracleError::BadCase(format!("case {} has no pole oracle", setup.id.as_str())));
    }
    let p = setup.degree();
    let (a, b, c0) = constants(setup, u0)?;
    let t_end = *setup.times.last().unwrap();
    let opts = SolveOptions {
        stride: usize::MAX,
        s: setup.s,
        oversample: setup.oversample,
    };

    let (fields, integral, conservative, solve, energy) = if t_end > 0.0 {
        let res = evolution::solve_at(spec, u0, &setup.times, setup.dt, &opts)?;
        if let Some(b) = res.blow_up {
            return Err(OracleError::BlowUp { blow_up: b, requested: t_end });
        }
        let field_at = |t: f64| -> SpectralField {
            res.snapshots
                .iter()
                .find(|(s, _)| (s - t).abs() <= 1e-9 * t.max(1.0))
                .map(|(_, f)| f.clone())
                .expect("checkpoint kept")
        };
        let fields: Vec<SpectralField> = setup.times.iter().map(|&t| field_at(t)).collect();
        let i_var = evolution::accumulate_integral(&res, p, setup.variant);
        let i_cons = evolution::accumulate_integral(&res, p, IntegralVariant::Conservative);
        let at = |path: &[f64], t: f64| lookup(&res.times, path, t);
        let integral = setup.times.iter().map(|&t| at(&i_var, t)).collect();
        let conservative = setup.times.iter().map(|&t| at(&i_cons, t)).collect();
        let reference_error = match setup.id {
            CaseId::TransportSinx if setup.cross_check => Some(
                setup
                    .times
                    .iter()
                    .zip(&fields)
                    .map(|(&t, f)| f.max_abs_diff(&transport_reference(setup.grid, TRANSPORT_R0, t)))
                    .fold(0.0, f64::max),
            ),
            _ => None,
        };
        let summary = SolveSummary {
            steps: res.times.len() - 1,
            dt: res.dt,
            max_cfl: res.diagnostics.max_cfl,
            boundary_decay_initial: res.diagnostics.boundary_decay_initial,
            boundary_decay_final: res.diagnostics.boundary_decay_final,
            padded_size: res.diagnostics.padded_size,
            blow_up: None,
            reference_error,
        };
        let energy = evolution::energy_monitor(&res, spec, setup.s)?;
        (fields, integral, conservative, Some(summary), Some(energy))
    } else {
        (vec![u0.clone()], vec![0.0], vec![0.0], None, None)
    };

    let measured = setup
        .times
        .iter()
        .zip(&fields)
        .map(|(&t, f)| Measured {
            estimate: radius_from_spectrum(f, &setup.fit),
            exact: exact_radius(setup, t),
        })
        .collect();
    let trace = trace(setup, integral, conservative, a, b, c0)?;
    Ok(assemble(setup, measured, trace, None, solve, energy))
}

/// The field at each requested time: sampled for closed forms, solved otherwise.
pub fn case_fields(setup: &CaseSetup) -> Result<Vec<(f64, SpectralField)>, OracleError> {
    check_times(&setup.times)?;
    if setup.id.is_closed_form() {
        return setup
            .times
            .iter()
            .map(|&t| {
                let s = match setup.id {
                    CaseId::Example1 => example1(t, setup.grid)?,
                    _ => example2(setup.p, t, setup.grid)?,
                };
                Ok((t, s.field))
            })
            .collect();
    }
    let spec = setup
        .spec
        .as_ref()
        .ok_or_else(|| OracleError::BadCase(format!("case {} needs a system", setup.id.as_str())))?;
    let u0 = setup
        .u0
        .as_ref()
        .ok_or_else(|| OracleError::BadCase(format!("case {} needs an initial datum", setup.id.as_str())))?;
    let t_end = *setup.times.last().unwrap();
    if t_end == 0.0 {
        return Ok(vec![(0.0, u0.clone())]);
    }
    let opts = SolveOptions {
        stride: usize::MAX,
        s: setup.s,
        oversample: setup.oversample,
    };
    let res = evolution::solve_at(spec, u0, &setup.times, setup.dt, &opts)?;
    if let Some(b) = res.blow_up {
        return Err(OracleError::BlowUp { blow_up: b, requested: t_end });
    }
    Ok(setup
        .times
        .iter()
        .map(|&t| {
            let f = res
                .snapshots
                .iter()
                .find(|(s, _)| (s - t).abs() <= 1e-9 * t.max(1.0))
                .map(|(_, f)| f.clone())
                .expect("checkpoint kept");
            (t, f)
        })
        .collect())
}

/// Known radius of the case at time `t`, if any.
pub fn case_exact_radius(setup: &CaseSetup, t: f64) -> Option<f64> {
    match setup.id {
        CaseId::Example1 => pole_radius(OracleId::Example1, t).ok(),
        CaseId::Example2 => pole_radius(OracleId::Example2 { p: setup.p }, t).ok(),
        _ => exact_radius(setup, t),
    }
}

fn exact_radius(setup: &CaseSetup, t: f64) -> Option<f64> {
    match setup.id {
        CaseId::TransportSinx => Some(transport_radius(TRANSPORT_R0, t)),
        // the free flow only rotates the phases of the coefficients
        CaseId::SchrodingerFree => Some(TRANSPORT_R0),
        _ => None,
    }
}

fn assemble(
    setup: &CaseSetup,
    measured: Vec<Measured>,
    trace: BoundsTrace,
    box_error: Option<f64>,
    solve: Option<SolveSummary>,
    energy: Option<EnergyReport>,
) -> CaseOutcome {
    let rows = measured
        .iter()
        .zip(&trace.epsilon_lower)
        .zip(&setup.times)
        .map(|((m, &bound), &t)| ComparisonRow::new(t, &m.estimate, m.exact, bound))
        .collect();
    CaseOutcome {
        case: setup.id,
        rows,
        estimates: measured.into_iter().map(|m| m.estimate).collect(),
        trace,
        box_error,
        solve,
        energy,
    }
}

/// Sample a real or complex expression of `x` at `t = 0` on the grid.
pub fn datum_from_exprs(grid: PeriodicGrid, exprs: &[Expr]) -> Result<SpectralField, OracleError> {
    let values = exprs
        .iter()
        .map(|e| {
            crate::expr::eval_on_grid(e, &grid, 0.0).map_err(|source| SystemError::Eval {
                what: format!("initial datum `{e}`"),
                source,
            })
        })
        .collect::<Result<Vec<Vec<Complex64>>, _>>()?;
    Ok(SpectralField::from_values(grid, values)?)
}
