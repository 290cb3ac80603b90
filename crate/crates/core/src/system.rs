//! The operator `L = d_t + i A0(D) + A1(t,x) d_x + B(t,x)` and the polynomial
//! nonlinearity `N[u]_k = sum_gamma g_{k,gamma}(t,x) u^gamma`, in one space dimension.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, EvalError, Expr, Point, Var};
use crate::spectral::{self, PeriodicGrid, SpectralField};

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);

/// Worst Hermitian deviation that still counts as a pass.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;
/// Minimum eigenvalue separation for strict hyperbolicity.
pub const EIGENVALUE_GAP: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("{what} must be {n}x{n}")]
    Shape { what: String, n: usize },
    #[error("monomial {index}: {reason}")]
    BadMonomial { index: usize, reason: String },
    #[error("degree {degree} is inconsistent with the nonlinearity (max |gamma| = {max})")]
    BadDegree { degree: u32, max: u32 },
    #[error("evaluating {what}: {source}")]
    Eval {
        what: String,
        #[source]
        source: EvalError,
    },
    #[error("field has {found} components, system has {expected}")]
    ComponentMismatch { expected: usize, found: usize },
    #[error("{0}")]
    NotApplicable(String),
    #[error("eigenvalue solver failed at sample {0}")]
    EigenFailure(usize),
}

pub type ExprMatrix = Vec<Vec<Expr>>;

pub fn zero_matrix(n: usize) -> ExprMatrix {
    vec![vec![Expr::zero(); n]; n]
}

/// One term `coeff * prod_c u_c^{exponents[c]}` of `N[u]_component`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub component: usize,
    pub exponents: Vec<u32>,
    pub coeff: Expr,
}

impl Monomial {
    pub fn order(&self) -> u32 {
        self.exponents.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    n: usize,
    a0: Option<ExprMatrix>,
    a1: ExprMatrix,
    b: ExprMatrix,
    nonlinearity: Vec<Monomial>,
    degree: u32,
}

fn check_square(m: &ExprMatrix, n: usize, what: &str) -> Result<(), SystemError> {
    if m.len() != n || m.iter().any(|row| row.len() != n) {
        return Err(SystemError::Shape { what: what.into(), n });
    }
    Ok(())
}

fn eval_matrix(m: &ExprMatrix, at: Point, what: &str) -> Result<DMatrix<C>, SystemError> {
    let n = m.len();
    let mut out = DMatrix::zeros(n, n);
    for (r, row) in m.iter().enumerate() {
        for (c, e) in row.iter().enumerate() {
            out[(r, c)] = e.eval(at).map_err(|source| SystemError::Eval {
                what: format!("{what}[{r}][{c}]"),
                source,
            })?;
        }
    }
    Ok(out)
}

fn hermitian_deviation(m: &DMatrix<C>) -> f64 {
    (m - m.adjoint()).norm()
}

fn spectral_norm(m: &DMatrix<C>) -> f64 {
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

impl SystemSpec {
    /// `degree = None` takes the largest monomial order, or 1 for linear systems.
    pub fn new(
        n: usize,
        a0: Option<ExprMatrix>,
        a1: ExprMatrix,
        b: ExprMatrix,
        nonlinearity: Vec<Monomial>,
        degree: Option<u32>,
    ) -> Result<Self, SystemError> {
        if n == 0 {
            return Err(SystemError::Shape { what: "system".into(), n });
        }
        if let Some(m) = &a0 {
            check_square(m, n, "A0")?;
        }
        check_square(&a1, n, "A1")?;
        check_square(&b, n, "B")?;
        let mut max_order = 0;
        for (index, mono) in nonlinearity.iter().enumerate() {
            if mono.component >= n {
                return Err(SystemError::BadMonomial {
                    index,
                    reason: format!("target component {} out of range", mono.component),
                });
            }
            if mono.exponents.len() != n {
                return Err(SystemError::BadMonomial {
                    index,
                    reason: format!("needs {n} exponents, got {}", mono.exponents.len()),
                });
            }
            if mono.order() < 2 {
                return Err(SystemError::BadMonomial {
                    index,
                    reason: "total order must be at least 2".into(),
                });
            }
            max_order = max_order.max(mono.order());
        }
        let degree = match degree {
            None => max_order.max(1),
            Some(p) if nonlinearity.is_empty() && p >= 1 => p,
            Some(p) if p >= 2 && p >= max_order => p,
            Some(p) => return Err(SystemError::BadDegree { degree: p, max: max_order }),
        };
        Ok(SystemSpec {
            n,
            a0: a0.filter(|m| !m.iter().flatten().all(Expr::is_zero)),
            a1,
            b,
            nonlinearity,
            degree,
        })
    }

    /// Scalar transport `u_t + a(t,x) u_x = 0`.
    pub fn scalar_transport(a: Expr) -> Self {
        Self::new(1, None, vec![vec![a]], zero_matrix(1), Vec::new(), None).expect("valid scalar spec")
    }

    pub fn components(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn is_linear(&self) -> bool {
        self.nonlinearity.is_empty()
    }

    pub fn a0(&self) -> Option<&ExprMatrix> {
        self.a0.as_ref()
    }

    pub fn a1(&self) -> &ExprMatrix {
        &self.a1
    }

    pub fn b(&self) -> &ExprMatrix {
        &self.b
    }

    pub fn nonlinearity(&self) -> &[Monomial] {
        &self.nonlinearity
    }

    /// True when no coefficient depends on `x` or `t`.
    pub fn has_constant_coefficients(&self) -> bool {
        let varies = |e: &Expr| e.depends_on(Var::X) || e.depends_on(Var::T);
        !self.a1.iter().flatten().any(varies)
            && !self.b.iter().flatten().any(varies)
            && !self.nonlinearity.iter().any(|m| varies(&m.coeff))
    }

    pub fn a0_symbol(&self, xi: f64) -> Result<DMatrix<C>, SystemError> {
        match &self.a0 {
            Some(m) => eval_matrix(m, Point::symbol(xi), "A0"),
            None => Ok(DMatrix::zeros(self.n, self.n)),
        }
    }

    pub fn a1_at(&self, x: f64, t: f64) -> Result<DMatrix<C>, SystemError> {
        eval_matrix(&self.a1, Point::new(x, t), "A1")
    }

    pub fn b_at(&self, x: f64, t: f64) -> Result<DMatrix<C>, SystemError> {
        eval_matrix(&self.b, Point::new(x, t), "B")
    }
}

/// Scalar magnetic Schrodinger operator `d_t - i Delta_a - i V` written in the
/// form of `L`: `A0 = xi^2`, `A1 = 2a`, `B = a' + i a^2 - i V`.
pub fn schrodinger_system(a: &[Expr], v: Expr, nonlinearity: Vec<Monomial>) -> Result<SystemSpec, SystemError> {
    if a.len() != 1 {
        return Err(SystemError::NotApplicable(format!(
            "one space dimension supported, got {} magnetic components",
            a.len()
        )));
    }
    let a = &a[0];
    let two_a = expr::mul(Expr::Num(2.0), a.clone());
    let a_sq = expr::mul(Expr::ImagUnit, expr::mul(a.clone(), a.clone()));
    let b = expr::sub(expr::add(a.derivative(Var::X), a_sq), expr::mul(Expr::ImagUnit, v));
    let xi_sq = Expr::Pow(Box::new(Expr::Var(Var::Xi)), 2);
    SystemSpec::new(1, Some(vec![vec![xi_sq]]), vec![vec![two_a]], vec![vec![b]], nonlinearity, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotChecked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermitianCheck {
    pub pass: bool,
    pub worst_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub hermitian_a0: HermitianCheck,
    pub hermitian_aj: HermitianCheck,
    pub bounded_b: f64,
    pub strict_hyperbolic: CheckStatus,
    pub messages: Vec<String>,
}

/// Sample lattice: times {0, 0.5, 1}, 16 points across the box, xi in -4..=4.
pub fn default_samples(grid: &PeriodicGrid) -> Vec<Point> {
    let mut out = Vec::new();
    for &t in &[0.0, 0.5, 1.0] {
        for j in 0..16 {
            let x = -0.5 * grid.length() + (j as f64 + 0.5) * grid.length() / 16.0;
            for k in -4..=4 {
                out.push(Point { x, t, xi: k as f64 });
            }
        }
    }
    out
}

/// Sampled check that `A0(xi)` and `A1(t,x)` are Hermitian; records `sup ||B||`.
pub fn validate_symmetric(spec: &SystemSpec, samples: &[Point]) -> Result<ValidationReport, SystemError> {
    if samples.is_empty() {
        return Err(SystemError::NotApplicable("no sample points".into()));
    }
    let mut a0_worst = 0.0f64;
    let mut aj_worst = 0.0f64;
    let mut b_sup = 0.0f64;
    for p in samples {
        a0_worst = a0_worst.max(hermitian_deviation(&spec.a0_symbol(p.xi)?));
        aj_worst = aj_worst.max(hermitian_deviation(&spec.a1_at(p.x, p.t)?));
        b_sup = b_sup.max(spectral_norm(&spec.b_at(p.x, p.t)?));
    }
    let hermitian_a0 = HermitianCheck {
        pass: a0_worst < HERMITIAN_TOLERANCE,
        worst_deviation: a0_worst,
    };
    let hermitian_aj = HermitianCheck {
        pass: aj_worst < HERMITIAN_TOLERANCE,
        worst_deviation: aj_worst,
    };
    let mut messages = Vec::new();
    if !hermitian_a0.pass {
        messages.push(format!("A0 symbol is not Hermitian (deviation {a0_worst:e})"));
    }
    if !hermitian_aj.pass {
        messages.push(format!("A1 is not Hermitian (deviation {aj_worst:e})"));
    }
    if !b_sup.is_finite() {
        messages.push("B is unbounded on the samples".into());
    }
    Ok(ValidationReport {
        pass: hermitian_a0.pass && hermitian_aj.pass && b_sup.is_finite(),
        hermitian_a0,
        hermitian_aj,
        bounded_b: b_sup,
        strict_hyperbolic: CheckStatus::NotChecked,
        messages,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicityCheck {
    pub pass: bool,
    /// Smallest pairwise eigenvalue gap over all samples.
    pub min_gap: f64,
    /// Largest imaginary part of an eigenvalue over all samples.
    pub max_imag: f64,
}

/// At `xi = 1`, the eigenvalues of `A1(t,x)` must be real and pairwise separated.
pub fn strict_hyperbolicity_check(spec: &SystemSpec, samples: &[Point]) -> Result<HyperbolicityCheck, SystemError> {
    if spec.a0.is_some() {
        return Err(SystemError::NotApplicable(
            "strict hyperbolicity is checked for differential systems (A0 = 0) only".into(),
        ));
    }
    let mut min_gap = f64::INFINITY;
    let mut max_imag = 0.0f64;
    for (idx, p) in samples.iter().enumerate() {
        let m = spec.a1_at(p.x, p.t)?;
        if spec.n == 1 {
            max_imag = max_imag.max(m[(0, 0)].im.abs());
            continue;
        }
        let eig = nalgebra::Schur::try_new(m, 1e-14, 10_000)
            .and_then(|s| s.eigenvalues())
            .ok_or(SystemError::EigenFailure(idx))?;
        let vals: Vec<C> = eig.iter().cloned().collect();
        for (i, a) in vals.iter().enumerate() {
            max_imag = max_imag.max(a.im.abs() / (1.0 + a.norm()));
            for b in &vals[i + 1..] {
                min_gap = min_gap.min((a - b).norm());
            }
        }
    }
    Ok(HyperbolicityCheck {
        pass: min_gap > EIGENVALUE_GAP && max_imag < HERMITIAN_TOLERANCE,
        min_gap,
        max_imag,
    })
}

/// A coefficient resolved on a grid.
#[derive(Debug, Clone)]
enum Coef {
    Zero,
    Const(C),
    /// x-dependent, time independent: M-grid interpolant (no Nyquist) and its padded samples.
    Field { field: SpectralField, lifted: Vec<C> },
    Dynamic(Expr),
}

/// A [`SystemSpec`] bound to a grid: symbols per bin, coefficients sampled
/// once where they do not depend on time, and a dealiasing size for products.
#[derive(Debug, Clone)]
pub struct Discretization<'a> {
    spec: &'a SystemSpec,
    grid: PeriodicGrid,
    padded: usize,
    a0: Option<Vec<DMatrix<C>>>,
    a1: Vec<Vec<Coef>>,
    b: Vec<Vec<Coef>>,
    g: Vec<Coef>,
}

impl<'a> Discretization<'a> {
    pub fn new(spec: &'a SystemSpec, grid: PeriodicGrid) -> Result<Self, SystemError> {
        let mut factors = 2usize;
        for m in &spec.nonlinearity {
            let varies = m.coeff.depends_on(Var::X) || m.coeff.depends_on(Var::T);
            factors = factors.max(m.order() as usize + usize::from(varies));
        }
        let padded = spectral::dealiased_size(grid.size(), factors);
        let a0 = match &spec.a0 {
            None => None,
            Some(_) => Some(
                (0..grid.size())
                    .map(|idx| spec.a0_symbol(grid.wavenumber(idx)))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
        };
        let mut disc = Discretization {
            spec,
            grid,
            padded,
            a0,
            a1: Vec::new(),
            b: Vec::new(),
            g: Vec::new(),
        };
        disc.a1 = spec
            .a1
            .iter()
            .map(|row| row.iter().map(|e| disc.resolve(e)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<_, _>>()?;
        disc.b = spec
            .b
            .iter()
            .map(|row| row.iter().map(|e| disc.resolve(e)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<_, _>>()?;
        disc.g = spec
            .nonlinearity
            .iter()
            .map(|m| disc.resolve(&m.coeff))
            .collect::<Result<_, _>>()?;
        Ok(disc)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn spec(&self) -> &SystemSpec {
        self.spec
    }

    pub fn padded_size(&self) -> usize {
        self.padded
    }

    fn resolve(&self, e: &Expr) -> Result<Coef, SystemError> {
        if let Some(c) = e.constant_value() {
            return Ok(if c == ZERO { Coef::Zero } else { Coef::Const(c) });
        }
        if e.depends_on(Var::T) {
            return Ok(Coef::Dynamic(e.clone()));
        }
        self.sample(e, 0.0)
    }

    fn sample(&self, e: &Expr, t: f64) -> Result<Coef, SystemError> {
        let values = expr::eval_on_grid(e, &self.grid, t).map_err(|source| SystemError::Eval {
            what: format!("coefficient `{e}` at t = {t}"),
            source,
        })?;
        let field = SpectralField::scalar(self.grid, values)
            .expect("grid-sized samples")
            .without_nyquist();
        let lifted = self.lift(&field.spectrum()[0]);
        Ok(Coef::Field { field, lifted })
    }

    fn at_time(&self, coef: &Coef, t: f64) -> Result<Coef, SystemError> {
        match coef {
            Coef::Dynamic(e) => self.sample(e, t),
            other => Ok(other.clone()),
        }
    }

    fn lift(&self, coeffs: &[C]) -> Vec<C> {
        spectral::inverse(&spectral::pad(coeffs, self.padded), self.grid.length())
    }

    fn lower(&self, values: &[C]) -> Vec<C> {
        spectral::truncate(&spectral::forward(values, self.grid.length()), self.grid.size())
    }

    fn check(&self, f: &SpectralField) -> Result<(), SystemError> {
        if f.components() != self.spec.n {
            return Err(SystemError::ComponentMismatch {
                expected: self.spec.n,
                found: f.components(),
            });
        }
        Ok(())
    }

    fn accumulate(acc: &mut [C], coef: &Coef, lifted: &[C]) {
        match coef {
            Coef::Zero => {}
            Coef::Const(c) => acc.iter_mut().zip(lifted).for_each(|(a, v)| *a += c * v),
            Coef::Field { lifted: w, .. } => acc
                .iter_mut()
                .zip(lifted.iter().zip(w))
                .for_each(|(a, (v, w))| *a += w * v),
            Coef::Dynamic(_) => unreachable!("resolved before use"),
        }
    }

    /// Padded-space sums `linear_scale * (A1 f' + B f) + N[f]` per component, lowered to spectra.
    fn padded_terms(&self, f: &SpectralField, t: f64, linear_scale: Option<f64>, nonlinear: bool) -> Result<Vec<Vec<C>>, SystemError> {
        self.check(f)?;
        let n = self.spec.n;
        let p = self.padded;
        let lifted_f: Vec<Vec<C>> = f.spectrum().iter().map(|c| self.lift(c)).collect();
        let mut acc = vec![vec![ZERO; p]; n];
        if let Some(scale) = linear_scale {
            let df = f.derivative(1);
            let lifted_df: Vec<Vec<C>> = df.spectrum().iter().map(|c| self.lift(c)).collect();
            for r in 0..n {
                let mut row = vec![ZERO; p];
                for c in 0..n {
                    Self::accumulate(&mut row, &self.at_time(&self.a1[r][c], t)?, &lifted_df[c]);
                    Self::accumulate(&mut row, &self.at_time(&self.b[r][c], t)?, &lifted_f[c]);
                }
                acc[r].iter_mut().zip(&row).for_each(|(a, v)| *a += scale * v);
            }
        }
        if nonlinear {
            for (mono, g) in self.spec.nonlinearity.iter().zip(&self.g) {
                let mut prod = vec![C::new(1.0, 0.0); p];
                for (c, &e) in mono.exponents.iter().enumerate() {
                    for _ in 0..e {
                        prod.iter_mut().zip(&lifted_f[c]).for_each(|(a, v)| *a *= v);
                    }
                }
                Self::accumulate(&mut acc[mono.component], &self.at_time(g, t)?, &prod);
            }
        }
        Ok(acc.iter().map(|v| self.lower(v)).collect())
    }

    fn field(&self, spectra: Vec<Vec<C>>) -> SpectralField {
        SpectralField::from_spectrum(self.grid, spectra).expect("grid-sized spectra")
    }

    /// `i A0(D) f`.
    pub fn multiplier_part(&self, f: &SpectralField) -> Result<SpectralField, SystemError> {
        self.check(f)?;
        let n = self.spec.n;
        let spec = f.spectrum();
        let mut out = vec![vec![ZERO; self.grid.size()]; n];
        if let Some(symbols) = &self.a0 {
            for (idx, m) in symbols.iter().enumerate() {
                for r in 0..n {
                    let mut s = ZERO;
                    for c in 0..n {
                        s += m[(r, c)] * spec[c][idx];
                    }
                    out[r][idx] = C::i() * s;
                }
            }
        }
        Ok(self.field(out))
    }

    /// `A1 f' + B f` with dealiased products.
    pub fn coefficient_part(&self, f: &SpectralField, t: f64) -> Result<SpectralField, SystemError> {
        Ok(self.field(self.padded_terms(f, t, Some(1.0), false)?))
    }

    /// `N[f]` with dealiased products.
    pub fn nonlinear_part(&self, f: &SpectralField, t: f64) -> Result<SpectralField, SystemError> {
        Ok(self.field(self.padded_terms(f, t, None, true)?))
    }

    /// `-(A1 f' + B f) + N[f]`: everything in `d_t u` except the multiplier.
    pub fn explicit_rhs(&self, f: &SpectralField, t: f64) -> Result<SpectralField, SystemError> {
        Ok(self.field(self.padded_terms(f, t, Some(-1.0), true)?))
    }

    /// Spatial part of `L`: `i A0(D) f + A1 f' + B f`.
    pub fn apply_spatial(&self, f: &SpectralField, t: f64) -> Result<SpectralField, SystemError> {
        let m = self.multiplier_part(f)?;
        let c = self.coefficient_part(f, t)?;
        Ok(m.linear_combination(C::new(1.0, 0.0), &c, C::new(1.0, 0.0)))
    }

    /// Per-bin propagators `exp(-i A0(k') tau)`; `None` when `A0 = 0`.
    pub fn propagators(&self, tau: f64) -> Option<Vec<DMatrix<C>>> {
        let symbols = self.a0.as_ref()?;
        Some(
            symbols
                .iter()
                .map(|m| {
                    if m.nrows() == 1 {
                        return DMatrix::from_element(1, 1, (-C::i() * m[(0, 0)] * tau).exp());
                    }
                    let herm = (m + m.adjoint()).scale(0.5);
                    let eig = nalgebra::SymmetricEigen::new(herm);
                    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (-C::i() * l * tau).exp()));
                    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
                })
                .collect(),
        )
    }

    /// Largest spectral norm of `A1` over the nodes at the given times.
    pub fn max_transport_speed(&self, times: &[f64]) -> Result<f64, SystemError> {
        let mut best = 0.0f64;
        for &t in times {
            for x in self.grid.nodes() {
                best = best.max(spectral_norm(&self.spec.a1_at(x, t)?));
            }
        }
        Ok(best)
    }

    /// Leibniz expansion of `[L, d^alpha] f = -sum_{1<=g<=alpha} C(alpha,g)
    /// [ (d^g A1) d^{alpha-g+1} f + (d^g B) d^{alpha-g} f ]`.
    pub fn commutator(&self, f: &SpectralField, alpha: u32, t: f64) -> Result<SpectralField, SystemError> {
        self.check(f)?;
        if alpha > 6 {
            return Err(SystemError::NotApplicable(format!("derivative order {alpha} exceeds 6")));
        }
        let n = self.spec.n;
        let p = self.padded;
        let lifted_derivs: Vec<Vec<Vec<C>>> = (0..=alpha + 1)
            .map(|k| f.derivative(k).spectrum().iter().map(|c| self.lift(c)).collect())
            .collect();
        let mut acc = vec![vec![ZERO; p]; n];
        for r in 0..n {
            for c in 0..n {
                for (coef, shift) in [(&self.a1[r][c], 1u32), (&self.b[r][c], 0u32)] {
                    let Coef::Field { field, .. } = self.at_time(coef, t)? else {
                        continue;
                    };
                    for g in 1..=alpha {
                        let w = self.lift(&field.derivative(g).spectrum()[0]);
                        let v = &lifted_derivs[(alpha - g + shift) as usize][c];
                        let weight = -binomial(alpha, g);
                        acc[r].iter_mut().zip(w.iter().zip(v)).for_each(|(a, (w, v))| *a += weight * w * v);
                    }
                }
            }
        }
        Ok(self.field(acc.iter().map(|v| self.lower(v)).collect()))
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * (n + 1 - i) as f64 / i as f64)
}

/// `i A0(D) f + A1 f' + B f` at time `t`.
pub fn apply_l_spatial(spec: &SystemSpec, f: &SpectralField, t: f64) -> Result<SpectralField, SystemError> {
    Discretization::new(spec, *f.grid())?.apply_spatial(f, t)
}

pub fn apply_nonlinearity(spec: &SystemSpec, f: &SpectralField, t: f64) -> Result<SpectralField, SystemError> {
    Discretization::new(spec, *f.grid())?.nonlinear_part(f, t)
}

pub fn commutator_action(spec: &SystemSpec, f: &SpectralField, alpha: u32, t: f64) -> Result<SpectralField, SystemError> {
    Discretization::new(spec, *f.grid())?.commutator(f, alpha, t)
}
