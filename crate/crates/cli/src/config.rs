//! Strict JSON run configuration, defaults, and conversion to a case setup.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use strip_radius_core::analytic::FitOptions;
use strip_radius_core::bounds::BoundVariant;
use strip_radius_core::evolution::IntegralVariant;
use strip_radius_core::expr::{parse_expr, Expr};
use strip_radius_core::oracles::{datum_from_exprs, CaseId, CaseSetup, MethodChoice};
use strip_radius_core::spectral::PeriodicGrid;
use strip_radius_core::system::{self, Monomial, SystemSpec};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<CaseId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemConfig>,
    /// One expression in `x` per component.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<String>>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oversample: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<IntegralVariant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundVariant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear_constant: Option<f64>,
    /// Fixed rate constant; estimated from the datum when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    General {
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a0: Option<Vec<Vec<String>>>,
        a1: Vec<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<Vec<Vec<String>>>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        nonlinearity: Vec<MonomialConfig>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        degree: Option<u32>,
    },
    Schrodinger {
        magnetic: Vec<String>,
        potential: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        nonlinearity: Vec<MonomialConfig>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialConfig {
    pub component: usize,
    pub exponents: Vec<u32>,
    pub coeff: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<PathBuf>,
}

/// Strict parse of a config file; unknown keys and type errors carry a JSON pointer.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
        pointer: String::new(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = pointer_of(e.path());
        CliError::Config {
            message: e.inner().to_string(),
            pointer,
        }
    })
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => {}
        }
    }
    out
}

fn invalid(pointer: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        pointer: pointer.into(),
        message: message.into(),
    }
}

fn check(ok: bool, pointer: &str, message: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(invalid(pointer, message))
    }
}

fn expr(src: &str, pointer: &str) -> Result<Expr, CliError> {
    parse_expr(src).map_err(|e| invalid(pointer, format!("`{src}`: {e}")))
}

fn matrix(rows: &[Vec<String>], pointer: &str) -> Result<Vec<Vec<Expr>>, CliError> {
    rows.iter()
        .enumerate()
        .map(|(r, row)| {
            row.iter()
                .enumerate()
                .map(|(c, s)| expr(s, &format!("{pointer}/{r}/{c}")))
                .collect()
        })
        .collect()
}

fn monomials(list: &[MonomialConfig], pointer: &str) -> Result<Vec<Monomial>, CliError> {
    list.iter()
        .enumerate()
        .map(|(i, m)| {
            Ok(Monomial {
                component: m.component,
                exponents: m.exponents.clone(),
                coeff: expr(&m.coeff, &format!("{pointer}/{i}/coeff"))?,
            })
        })
        .collect()
}

impl SystemConfig {
    pub fn build(&self) -> Result<SystemSpec, CliError> {
        let spec = match self {
            SystemConfig::General {
                n,
                a0,
                a1,
                b,
                nonlinearity,
                degree,
            } => {
                let a0 = a0.as_ref().map(|m| matrix(m, "/system/a0")).transpose()?;
                let b = match b {
                    Some(b) => matrix(b, "/system/b")?,
                    None => system::zero_matrix(*n),
                };
                SystemSpec::new(
                    *n,
                    a0,
                    matrix(a1, "/system/a1")?,
                    b,
                    monomials(nonlinearity, "/system/nonlinearity")?,
                    *degree,
                )
            }
            SystemConfig::Schrodinger {
                magnetic,
                potential,
                nonlinearity,
            } => {
                let a = magnetic
                    .iter()
                    .enumerate()
                    .map(|(i, s)| expr(s, &format!("/system/magnetic/{i}")))
                    .collect::<Result<Vec<_>, _>>()?;
                system::schrodinger_system(
                    &a,
                    expr(potential, "/system/potential")?,
                    monomials(nonlinearity, "/system/nonlinearity")?,
                )
            }
        };
        spec.map_err(|e| invalid("/system", e.to_string()))
    }
}

/// The equation behind a case; closed forms get their whole-line equations.
pub fn case_system(cfg: &RunConfig) -> Result<SystemSpec, CliError> {
    let case = cfg.case.ok_or_else(|| invalid("/case", "no case selected"))?;
    let one = |s: &str| vec![vec![parse_expr(s).expect("valid literal")]];
    let spec = match case {
        CaseId::Example1 => SystemSpec::new(1, None, one("-x"), system::zero_matrix(1), vec![], None),
        CaseId::Example2 => {
            let p = cfg.analysis.p.unwrap_or(2);
            SystemSpec::new(
                1,
                None,
                system::zero_matrix(1),
                system::zero_matrix(1),
                vec![Monomial {
                    component: 0,
                    exponents: vec![p],
                    coeff: Expr::Num(1.0 / (p as f64 - 1.0)),
                }],
                None,
            )
        }
        CaseId::Custom => {
            return cfg
                .system
                .as_ref()
                .ok_or_else(|| invalid("/system", "the custom case needs a system"))?
                .build()
        }
        other => Ok(CaseSetup::preset(other).spec.expect("preset system")),
    };
    spec.map_err(|e| invalid("/system", e.to_string()))
}

impl RunConfig {
    /// Fill every default for the selected case and check ranges. The
    /// result is a fixed point: resolving it again changes nothing.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let case = self.case.ok_or_else(|| invalid("/case", "no case selected (set `case` or pass --case)"))?;
        if case != CaseId::Custom {
            check(self.system.is_none(), "/system", "only the custom case accepts a system")?;
            check(self.initial.is_none(), "/initial", "only the custom case accepts initial data")?;
        }
        let preset = CaseSetup::preset(case);
        let mut out = self.clone();

        let times = out.times.get_or_insert_with(|| preset.times.clone());
        check(!times.is_empty(), "/times", "at least one time is required")?;
        check(times.iter().all(|t| t.is_finite() && *t >= 0.0), "/times", "times must be finite and nonnegative")?;
        check(times.windows(2).all(|w| w[1] > w[0]), "/times", "times must be strictly increasing")?;

        let length = *out.grid.length.get_or_insert(preset.grid.length());
        let size = *out.grid.size.get_or_insert(preset.grid.size());
        check(length > 0.0 && length.is_finite(), "/grid/length", "grid length must be positive")?;
        check(size >= 8 && size.is_power_of_two(), "/grid/size", "grid size must be a power of two and at least 8")?;
        PeriodicGrid::new(length, size).map_err(|e| invalid("/grid", e.to_string()))?;

        let dt = *out.solver.dt.get_or_insert(preset.dt);
        check(dt > 0.0 && dt.is_finite(), "/solver/dt", "dt must be positive")?;
        let stride = *out.solver.stride.get_or_insert(10);
        check(stride >= 1, "/solver/stride", "stride must be at least 1")?;

        let a = &mut out.analysis;
        let s = *a.s.get_or_insert(preset.s);
        check(s > 0.5 && s.is_finite(), "/analysis/s", "s must exceed d/2 = 0.5")?;
        let eps0 = *a.eps0.get_or_insert(preset.eps0);
        check(eps0 > 0.0 && eps0.is_finite(), "/analysis/eps0", "eps0 must be positive")?;
        let n_max = *a.n_max.get_or_insert(preset.n_max);
        check(n_max >= 8, "/analysis/n_max", "n_max must be at least 8")?;
        let oversample = *a.oversample.get_or_insert(preset.oversample);
        check(matches!(oversample, 1 | 2 | 4), "/analysis/oversample", "oversample must be 1, 2 or 4")?;
        let fit = *a.fit.get_or_insert(preset.fit);
        check((0.0..1.0).contains(&fit.low_fraction), "/analysis/fit/low_fraction", "must lie in [0, 1)")?;
        check(fit.noise_floor > 0.0 && fit.noise_floor < 1.0, "/analysis/fit/noise_floor", "must lie in (0, 1)")?;
        check(fit.min_decades >= 0.0, "/analysis/fit/min_decades", "must be nonnegative")?;
        check(fit.max_residual > 0.0, "/analysis/fit/max_residual", "must be positive")?;
        check(fit.min_bins >= 2, "/analysis/fit/min_bins", "must be at least 2")?;
        a.variant.get_or_insert(preset.variant);
        a.bound.get_or_insert(preset.bound);
        let kappa = *a.kappa.get_or_insert(preset.kappa);
        check(kappa > 0.0, "/analysis/kappa", "kappa must be positive")?;
        let lc = *a.linear_constant.get_or_insert(preset.linear_constant);
        check(lc > 0.0, "/analysis/linear_constant", "linear_constant must be positive")?;
        if a.a.is_none() {
            a.a = preset.a;
        }
        if let Some(v) = a.a {
            check(v > 0.0 && v.is_finite(), "/analysis/a", "A must be positive")?;
        }
        let c = *a.c.get_or_insert(preset.c);
        check(c > 0.0, "/analysis/c", "C must be positive")?;
        a.method.get_or_insert(preset.method);
        let p = *a.p.get_or_insert(preset.p);
        if case == CaseId::Example2 {
            check(p >= 2, "/analysis/p", "p must be at least 2")?;
            check(times.iter().all(|t| *t < 1.0), "/times", "example2 lives on [0, 1)")?;
        }
        a.cross_check.get_or_insert(preset.cross_check);
        out.seed.get_or_insert(0);

        if case == CaseId::Custom {
            let spec = case_system(&out)?;
            let initial = out.initial.as_ref().ok_or_else(|| invalid("/initial", "the custom case needs initial data"))?;
            check(initial.len() == spec.components(), "/initial", "one expression per component is required")?;
            for (i, s) in initial.iter().enumerate() {
                expr(s, &format!("/initial/{i}"))?;
            }
        }
        Ok(out)
    }

    /// Core setup from a resolved config.
    pub fn setup(&self) -> Result<CaseSetup, CliError> {
        let case = self.case.expect("resolved");
        let a = &self.analysis;
        let grid = PeriodicGrid::new(self.grid.length.unwrap(), self.grid.size.unwrap()).map_err(|e| invalid("/grid", e.to_string()))?;
        let mut setup = CaseSetup::preset(case);
        setup.grid = grid;
        setup.times = self.times.clone().unwrap();
        setup.dt = self.solver.dt.unwrap();
        setup.s = a.s.unwrap();
        setup.eps0 = a.eps0.unwrap();
        setup.n_max = a.n_max.unwrap();
        setup.oversample = a.oversample.unwrap();
        setup.fit = a.fit.unwrap();
        setup.variant = a.variant.unwrap();
        setup.bound = a.bound.unwrap();
        setup.kappa = a.kappa.unwrap();
        setup.linear_constant = a.linear_constant.unwrap();
        setup.a = a.a;
        setup.c = a.c.unwrap();
        setup.method = a.method.unwrap();
        setup.p = a.p.unwrap();
        setup.cross_check = a.cross_check.unwrap();
        match case {
            CaseId::Custom => {
                setup.spec = Some(case_system(self)?);
                let exprs = self
                    .initial
                    .as_ref()
                    .unwrap()
                    .iter()
                    .enumerate()
                    .map(|(i, s)| expr(s, &format!("/initial/{i}")))
                    .collect::<Result<Vec<_>, _>>()?;
                setup.u0 = Some(datum_from_exprs(grid, &exprs).map_err(|e| invalid("/initial", e.to_string()))?);
            }
            CaseId::TransportSinx | CaseId::SchrodingerFree | CaseId::SchrodingerPotential => {
                setup.u0 = Some(strip_radius_core::oracles::transport_datum(grid, strip_radius_core::oracles::TRANSPORT_R0));
            }
            _ => {}
        }
        Ok(setup)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_example1_gets_defaults() {
        let cfg = parse_config(r#"{"case": "example1"}"#).unwrap().resolve().unwrap();
        assert_eq!(cfg.analysis.s, Some(2.0));
        assert_eq!(cfg.analysis.n_max, Some(24));
        assert_eq!(cfg.analysis.oversample, Some(4));
        assert_eq!(cfg.times, Some(vec![0.0, 0.5, 1.0]));
    }

    #[test]
    fn unknown_key_is_reported_with_pointer() {
        let err = parse_config(r#"{"case": "example1", "analysis": {"epsilon": 1}}"#).unwrap_err();
        match err {
            CliError::Config { pointer, message } => {
                assert_eq!(pointer, "/analysis/epsilon");
                assert!(message.contains("epsilon"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn type_error_pointer() {
        let err = parse_config(r#"{"case": "example1", "grid": {"size": "big"}}"#).unwrap_err();
        assert!(matches!(err, CliError::Config { ref pointer, .. } if pointer == "/grid/size"));
    }

    #[test]
    fn effective_config_round_trips() {
        let texts = [
            r#"{"case": "example1"}"#,
            r#"{"case": "transport_sinx", "times": [0, 0.5], "solver": {"dt": 0.005}}"#,
            r#"{"case": "custom", "system": {"kind": "general", "n": 1, "a1": [["sin(x)"]], "nonlinearity": [{"component": 0, "exponents": [2], "coeff": "0.1"}]}, "initial": ["exp(-x^2)"], "grid": {"length": 20, "size": 128}}"#,
            r#"{"case": "custom", "system": {"kind": "schrodinger", "magnetic": ["sin(x)"], "potential": "cos(x)"}, "initial": ["1/(2-cos(x))"]}"#,
        ];
        for text in texts {
            let eff = parse_config(text).unwrap().resolve().unwrap();
            let emitted = serde_json::to_string_pretty(&eff).unwrap();
            let reloaded = parse_config(&emitted).unwrap();
            assert_eq!(reloaded, eff);
            assert_eq!(reloaded.resolve().unwrap(), eff);
        }
    }

    #[test]
    fn range_checks() {
        for (text, ptr) in [
            (r#"{"case": "example1", "analysis": {"eps0": -1}}"#, "/analysis/eps0"),
            (r#"{"case": "example1", "grid": {"size": 100}}"#, "/grid/size"),
            (r#"{"case": "example1", "times": [0.5, 0.1]}"#, "/times"),
            (r#"{"case": "example2", "times": [0, 1.5]}"#, "/times"),
            (r#"{"case": "transport_sinx", "initial": ["x"]}"#, "/initial"),
            (r#"{"case": "custom"}"#, "/system"),
            (r#"{"case": "custom", "system": {"kind": "general", "n": 1, "a1": [["sin(x"]]}, "initial": ["1"]}"#, "/system/a1/0/0"),
        ] {
            match parse_config(text).unwrap().resolve() {
                Err(CliError::Config { pointer, .. }) => assert_eq!(pointer, ptr, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn cfl_violation_loads() {
        let cfg = parse_config(r#"{"case": "transport_sinx", "solver": {"dt": 0.5}, "times": [0, 1]}"#).unwrap();
        assert!(cfg.resolve().unwrap().setup().is_ok());
    }
}
