//! Acceptance checks. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use strip_radius_core::analytic::{pole_radius, radius_from_spectrum, FitOptions, OracleId};
use strip_radius_core::bounds::{c0_floor_value, gronwall_bound, radius_lower_bound};
use strip_radius_core::evolution::{energy_monitor, integrate_path, solve, IntegralVariant, SolveOptions, SolveResult};
use strip_radius_core::oracles::{self, CaseId, CaseSetup};
use strip_radius_core::system::{
    apply_l_spatial, commutator_action, schrodinger_system, zero_matrix, ExprMatrix, Monomial,
};
use strip_radius_core::{parse_expr, Expr, PeriodicGrid, SpectralField, SystemSpec};

type Outcome = Result<String, String>;

fn e(s: &str) -> Expr {
    parse_expr(s).unwrap()
}

fn m(rows: &[&[&str]]) -> ExprMatrix {
    rows.iter().map(|r| r.iter().map(|s| e(s)).collect()).collect()
}

fn ensure(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn random_field(grid: PeriodicGrid, n: usize, rng: &mut impl Rng) -> SpectralField {
    let size = grid.size();
    let comps = (0..n)
        .map(|_| {
            (0..size)
                .map(|idx| {
                    let k = grid.mode(idx).unsigned_abs();
                    if k <= (size / 8) as u64 {
                        C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * (-0.25 * k as f64).exp()
                    } else {
                        C::new(0.0, 0.0)
                    }
                })
                .collect()
        })
        .collect();
    SpectralField::from_spectrum(grid, comps).unwrap()
}

fn example1_radius_law() -> Outcome {
    let start = Instant::now();
    let grid = PeriodicGrid::new(40.0 * PI, 4096).map_err(err)?;
    let mut worst: f64 = 0.0;
    for t in [0.0, 0.5, 1.0] {
        let exact = (-t as f64).exp();
        let pole = pole_radius(OracleId::Example1, t).map_err(err)?;
        ensure(pole == exact, format!("pole radius {pole} at t = {t}"))?;
        let sample = oracles::example1(t, grid).map_err(err)?;
        let est = radius_from_spectrum(&sample.field, &FitOptions::default());
        let r = est.value.ok_or(format!("no estimate at t = {t}"))?;
        let rel = (r - exact).abs() / exact;
        ensure(rel < 0.05, format!("t = {t}: fitted {r}, expected {exact}"))?;
        worst = worst.max(rel);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, format!("took {secs:.2} s"))?;
    Ok(format!("worst relative fit error {worst:.2e}, {secs:.3} s"))
}

fn example2_identity() -> Outcome {
    let n = 10_000;
    let times: Vec<f64> = (0..=n).map(|j| 0.99 * j as f64 / n as f64).collect();
    let linf: Vec<f64> = times.iter().map(|t| 1.0 / (1.0 - t)).collect();
    let i = integrate_path(&times, &linf, 2, IntegralVariant::Example);
    let eps = radius_lower_bound(&i, 1.0, 0.5);
    let worst = times
        .iter()
        .zip(&eps)
        .map(|(t, r)| (r - (1.0 - t).sqrt()).abs())
        .fold(0.0, f64::max);
    ensure(worst < 1e-6, format!("max deviation {worst:.3e}"))?;
    for &t in &times[..n] {
        let pole = pole_radius(OracleId::Example2 { p: 2 }, t).map_err(err)?;
        ensure(pole == (1.0 - t).sqrt(), format!("pole radius {pole} at t = {t}"))?;
    }
    Ok(format!("max deviation {worst:.3e}"))
}

fn quadratic_ode() -> SystemSpec {
    SystemSpec::new(1, None, zero_matrix(1), zero_matrix(1), vec![Monomial { component: 0, exponents: vec![2], coeff: e("1") }], None)
        .unwrap()
}

fn blow_up_solve() -> Outcome {
    let grid = PeriodicGrid::new(2.0 * PI, 8).map_err(err)?;
    let u0 = SpectralField::from_real(grid, |_| 1.0);
    let res = solve(&quadratic_ode(), &u0, 0.5, 1e-3, &SolveOptions::default()).map_err(err)?;
    ensure(res.blow_up.is_none(), "spurious blow-up before t = 0.5".into())?;
    let u_half = res.final_field().component(0)[0].re;
    ensure((u_half - 2.0).abs() < 1e-6, format!("u(0.5) = {u_half}"))?;
    let res = solve(&quadratic_ode(), &u0, 1.2, 1e-4, &SolveOptions::default()).map_err(err)?;
    let b = res.blow_up.ok_or("no blow-up flagged")?;
    ensure(
        (0.98..=1.0).contains(&b.last_stable_time) && b.time <= 1.0 + 1e-12,
        format!("blow-up flagged at {} (last stable {})", b.time, b.last_stable_time),
    )?;
    Ok(format!("u(0.5) error {:.1e}, blow-up flagged at t = {}", (u_half - 2.0).abs(), b.time))
}

fn conservative_runs() -> Result<Vec<(SystemSpec, SolveResult)>, String> {
    let grid = PeriodicGrid::new(2.0 * PI, 64).map_err(err)?;
    let specs = [
        SystemSpec::new(2, None, m(&[&["0", "1"], &["1", "0"]]), zero_matrix(2), vec![], None),
        SystemSpec::new(2, None, m(&[&["1", "2-i"], &["2+i", "-3"]]), m(&[&["0", "1"], &["-1", "0"]]), vec![], None),
        SystemSpec::new(1, Some(m(&[&["xi^2"]])), m(&[&["0.5"]]), m(&[&["i"]]), vec![], None),
    ];
    let mut rng = rand::rngs::StdRng::seed_from_u64(4);
    specs
        .into_iter()
        .map(|spec| {
            let spec = spec.map_err(err)?;
            let u0 = random_field(grid, spec.components(), &mut rng);
            let res = solve(&spec, &u0, 1.0, 5e-4, &SolveOptions { stride: 100, ..Default::default() }).map_err(err)?;
            Ok((spec, res))
        })
        .collect()
}

fn energy_estimate() -> Outcome {
    let runs = conservative_runs()?;
    let mut worst_drift: f64 = 0.0;
    let mut worst_c: f64 = 0.0;
    for (k, (spec, res)) in runs.iter().enumerate() {
        let hs0 = res.hs_path[0];
        let drift = res.hs_path.iter().map(|h| (h - hs0).abs() / hs0).fold(0.0, f64::max);
        ensure(drift < 1e-9, format!("system {k}: relative H^s drift {drift:.2e}"))?;
        let rep = energy_monitor(res, spec, 2.0).map_err(err)?;
        ensure(rep.fitted_c < 0.01 && !rep.violation, format!("system {k}: fitted constant {}", rep.fitted_c))?;
        worst_drift = worst_drift.max(drift);
        worst_c = worst_c.max(rep.fitted_c);

        let mut injected = res.clone();
        for (h, t) in injected.hs_path.iter_mut().zip(&injected.times) {
            *h *= (t * t).exp();
        }
        let rep = energy_monitor(&injected, spec, 2.0).map_err(err)?;
        ensure(rep.violation, format!("system {k}: e^(t^2) trace not flagged (fitted {})", rep.fitted_c))?;
    }
    Ok(format!("drift {worst_drift:.2e}, fitted constant {worst_c:.2e}, injected traces flagged"))
}

fn commutator_exactness() -> Outcome {
    let grid = PeriodicGrid::new(2.0 * PI, 128).map_err(err)?;
    let specs = [
        SystemSpec::new(1, None, m(&[&["sin(x)"]]), m(&[&["tanh(x)"]]), vec![], None).map_err(err)?,
        SystemSpec::new(1, None, m(&[&["tanh(x)"]]), m(&[&["sin(x)"]]), vec![], None).map_err(err)?,
    ];
    let mut rng = rand::rngs::StdRng::seed_from_u64(20);
    let one = C::new(1.0, 0.0);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let spec = &specs[trial % 2];
        let f = random_field(grid, 1, &mut rng);
        for alpha in 0..=2 {
            let got = commutator_action(spec, &f, alpha, 0.0).map_err(err)?;
            let l_of_d = apply_l_spatial(spec, &f.derivative(alpha), 0.0).map_err(err)?;
            let d_of_l = apply_l_spatial(spec, &f, 0.0).map_err(err)?.derivative(alpha);
            let direct = l_of_d.linear_combination(one, &d_of_l, -one);
            let rel = got.max_abs_diff(&direct) / l_of_d.max_abs().max(d_of_l.max_abs());
            ensure(rel < 1e-9, format!("field {trial}, alpha {alpha}: relative error {rel:.2e}"))?;
            worst = worst.max(rel);
        }
    }
    Ok(format!("worst relative error {worst:.2e} over 20 fields"))
}

fn gronwall_constant_case(samples: usize, c: f64) -> Result<f64, String> {
    let times: Vec<f64> = (0..=samples).map(|j| j as f64 / samples as f64).collect();
    let n = times.len();
    let psi = gronwall_bound(&times, &vec![1.0; n], &vec![c; n], &vec![1.0; n]).map_err(err)?;
    Ok(psi[n - 1])
}

fn gronwall_calculator() -> Outcome {
    let exact = 2.0f64.exp();
    let v = gronwall_constant_case(10_000, 2.0)?;
    let rel = (v - exact).abs() / exact;
    ensure(rel < 1e-8, format!("relative error {rel:.2e} at t = 1"))?;
    let mut ratios = Vec::new();
    for n in [100, 200, 400] {
        let e1 = (gronwall_constant_case(n, 2.0)? - exact).abs();
        let e2 = (gronwall_constant_case(2 * n, 2.0)? - exact).abs();
        let ratio = e1 / e2;
        ensure((3.5..=4.5).contains(&ratio), format!("ratio {ratio:.3} at {n} samples"))?;
        ratios.push(format!("{ratio:.3}"));
    }
    Ok(format!("relative error {rel:.2e}, doubling ratios {}", ratios.join(", ")))
}

fn bound_dominance() -> Outcome {
    let mut notes = Vec::new();
    for id in [CaseId::Example1, CaseId::TransportSinx, CaseId::SchrodingerPotential] {
        let setup = CaseSetup::preset(id);
        let out = oracles::run_case(&setup).map_err(err)?;
        for row in &out.rows {
            ensure(row.pass, format!("{} at t = {}: measured {:?}, bound {}", id.as_str(), row.t, row.measured, row.bound))?;
        }
        let tr = &out.trace;
        ensure(
            tr.epsilon_lower.windows(2).all(|w| w[1] <= w[0]),
            format!("{}: lower bound increases", id.as_str()),
        )?;
        ensure(tr.a > 0.0, format!("{}: rate constant {}", id.as_str(), tr.a))?;
        if let (Some(c0), Some(phi)) = (tr.c0, &tr.phi) {
            ensure(c0 >= c0_floor_value(0.0, setup.c), format!("{}: C0 {c0} below floor", id.as_str()))?;
            ensure(phi.windows(2).all(|w| w[1] >= w[0]), format!("{}: budget decreases", id.as_str()))?;
        }
        let min_margin = out.rows.iter().filter_map(|r| r.margin).fold(f64::INFINITY, f64::min);
        notes.push(format!("{} {} rows (min margin {min_margin:.3})", id.as_str(), out.rows.len()));
    }
    Ok(notes.join("; "))
}

fn estimator_calibration() -> Outcome {
    let grid = PeriodicGrid::new(40.0 * PI, 4096).map_err(err)?;
    let mut worst: f64 = 0.0;
    for r in [0.3, 0.5, 1.0, 2.0] {
        let f = oracles::periodized_lorentzian(grid, r);
        let est = radius_from_spectrum(&f, &FitOptions::default());
        let got = est.value.ok_or(format!("no estimate for r = {r}"))?;
        let rel = (got - r).abs() / r;
        ensure(rel < 0.05, format!("r = {r}: fitted {got}"))?;
        worst = worst.max(rel);
    }
    let small = PeriodicGrid::new(2.0 * PI, 256).map_err(err)?;
    for r in [0.1, 0.3] {
        let coeffs = (0..256).map(|idx| C::new((-r * small.wavenumber(idx).abs()).exp(), 0.0)).collect();
        let f = SpectralField::from_spectrum(small, vec![coeffs]).map_err(err)?;
        let est = radius_from_spectrum(&f, &FitOptions::default());
        let got = est.value.ok_or("no estimate for synthetic spectrum")?;
        ensure(
            (got - r).abs() < 1e-12 && est.residual < 1e-12,
            format!("synthetic r = {r}: fitted {got}, residual {:.2e}", est.residual),
        )?;
    }
    Ok(format!("worst Lorentzian relative error {worst:.2e}; synthetic spectra exact"))
}

fn transport_error(dt: f64) -> Result<f64, String> {
    let grid = PeriodicGrid::new(2.0 * PI, 256).map_err(err)?;
    let spec = SystemSpec::scalar_transport(e("1"));
    let u0 = SpectralField::from_real(grid, |x| x.sin().exp());
    let res = solve(&spec, &u0, 1.0, dt, &SolveOptions { stride: 1000, ..Default::default() }).map_err(err)?;
    let exact = SpectralField::from_real(grid, |x| (x - 1.0).sin().exp());
    Ok(res.final_field().max_abs_diff(&exact))
}

fn rk4_order() -> Outcome {
    let errs = [transport_error(4e-3)?, transport_error(2e-3)?, transport_error(1e-3)?];
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    for r in &ratios {
        ensure((12.0..=20.0).contains(r), format!("ratio {r:.3} (errors {errs:?})"))?;
    }
    Ok(format!("ratios {:.3}, {:.3}", ratios[0], ratios[1]))
}

fn schrodinger_mapping() -> Outcome {
    let grid = PeriodicGrid::new(2.0 * PI, 64).map_err(err)?;
    let spec = schrodinger_system(&[e("sin(x)")], e("cos(x)"), vec![]).map_err(err)?;
    let nodes = grid.nodes();
    let mut rng = rand::rngs::StdRng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let u = random_field(grid, 1, &mut rng);
        let got = apply_l_spatial(&spec, &u, 0.0).map_err(err)?;
        let (u0, u1, u2) = (u.component(0), u.derivative(1), u.derivative(2));
        let i = C::i();
        let direct: Vec<C> = nodes
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                let (a, da, v) = (x.sin(), x.cos(), x.cos());
                let lap = u2.component(0)[j] + 2.0 * i * a * u1.component(0)[j] + i * da * u0[j] - a * a * u0[j];
                -i * lap - i * v * u0[j]
            })
            .collect();
        let direct = SpectralField::scalar(grid, direct).map_err(err)?;
        let rel = got.max_abs_diff(&direct) / direct.max_abs();
        ensure(rel < 1e-10, format!("relative error {rel:.2e}"))?;
        worst = worst.max(rel);
    }
    Ok(format!("worst relative error {worst:.2e}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("example1 radius law", example1_radius_law),
        ("example2 identity", example2_identity),
        ("blow-up solve", blow_up_solve),
        ("energy estimate", energy_estimate),
        ("commutator exactness", commutator_exactness),
        ("gronwall calculator", gronwall_calculator),
        ("bound dominance", bound_dominance),
        ("estimator calibration", estimator_calibration),
        ("rk4 order", rk4_order),
        ("schrodinger mapping", schrodinger_mapping),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail}", k + 1),
            Err(reason) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {reason}", k + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
