//! The six subcommands. Each returns the files to write and a report for
//! standard output; nothing here touches the filesystem.

use std::f64::consts::PI;
use std::fmt;

use liouville::algebra::{
    classify_region, critical_values, frak_m, lambda_l, q_point, CoefficientMatrix, RhoVector,
    SingularityProfile,
};
use liouville::blowup::{
    leading_term_general, leading_term_q, location_residual, BlowupConfiguration,
    CoefficientField, Regime, SURFACE_TOL,
};
use liouville::energy::extract_summary;
use liouville::export::{gstar_table, profile_csv, SummaryRecord, Table, VERSION};
use liouville::green::{gstar_matrix, inradius, regular_diagonal, voronoi_cell, TorusGreen};
use liouville::radial::{integrate, ProblemSpec};
use liouville::scaling::{bubble_distance, d_relation_residual};
use liouville::shooting::invert_sigma;
use liouville::Error;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{check_len, require, singularity, ConfigError, ExperimentConfig, Geometry};

#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Solver(Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solver(e) => match e {
                Error::InvalidInput { .. }
                | Error::Domain(_)
                | Error::Geometry(_)
                | Error::WrongRegime(_)
                | Error::UndefinedRegion => 2,
                Error::NonConvergence { .. } => 4,
                _ => 3,
            },
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "{e}"),
            Failure::Solver(Error::NonConvergence { iterations, residual, best }) => write!(
                f,
                "no convergence after {iterations} iterations (residual {residual:e}); \
                 best iterate {best:?}"
            ),
            Failure::Solver(e) => write!(f, "{e}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Solver(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Invert,
    Surface,
    Compare,
    Leading,
    Green,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Invert => "invert",
            Command::Surface => "surface",
            Command::Compare => "compare",
            Command::Leading => "leading",
            Command::Green => "green",
        }
    }
}

/// Files keyed by name plus the report echoed on standard output.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub files: Vec<(String, String)>,
    pub report: Value,
}

struct Provenance<'a> {
    command: Command,
    config: &'a ExperimentConfig,
}

impl Provenance<'_> {
    fn comments(&self) -> Vec<String> {
        vec![
            format!("liouville {VERSION} {}", self.command.name()),
            format!(
                "config {}",
                serde_json::to_string(self.config).expect("config is serializable")
            ),
        ]
    }

    fn json<T: Serialize>(&self, result: &T) -> String {
        let v = json!({
            "version": VERSION,
            "command": self.command.name(),
            "config": self.config,
            "result": result,
        });
        let mut s = serde_json::to_string_pretty(&v).expect("report is serializable");
        s.push('\n');
        s
    }
}

pub fn run(command: Command, config: &ExperimentConfig) -> Result<Output, Failure> {
    config.check()?;
    let prov = Provenance { command, config };
    let (report, mut files) = match command {
        Command::Solve => solve(config, &prov)?,
        Command::Invert => invert(config)?,
        Command::Surface => surface(config, &prov)?,
        Command::Compare => compare(config)?,
        Command::Leading => leading(config, &prov)?,
        Command::Green => green(config, &prov)?,
    };
    files.push((format!("{}.json", command.name()), prov.json(&report)));
    Ok(Output { files, report })
}

type Produced = (Value, Vec<(String, String)>);

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("result is serializable")
}

fn solve(config: &ExperimentConfig, prov: &Provenance) -> Result<Produced, Failure> {
    let spec = config.problem()?;
    let profile = integrate(&spec, config.r_max, config.tol)?;
    let summary = extract_summary(&profile)?;
    let record = SummaryRecord::from(&summary);
    let files = vec![
        ("profile.csv".into(), profile_csv(&profile, &prov.comments())),
        ("summary.json".into(), prov.json(&record)),
    ];
    Ok((to_value(&record), files))
}

fn invert(config: &ExperimentConfig) -> Result<Produced, Failure> {
    let block = require(&config.invert, "invert")?;
    let a = config.matrix()?;
    let n = a.n();
    check_len("invert.target_sigma", block.target_sigma.len(), n - 1)?;
    let guess = block.guess.clone().unwrap_or_else(|| vec![0.0; n - 1]);
    check_len("invert.guess", guess.len(), n - 1)?;
    let point = invert_sigma(&a, config.singularity()?, &block.target_sigma, &guess)?;
    Ok((to_value(&point), Vec::new()))
}

fn surface(config: &ExperimentConfig, prov: &Provenance) -> Result<Produced, Failure> {
    let block = require(&config.surface, "surface")?;
    let a = config.matrix()?;
    let q = q_point(&a, block.n_l)?;
    let rho = match &block.rho {
        Some(r) => RhoVector::new(r.clone())?,
        None => q.clone(),
    };
    let strengths = block
        .strengths
        .iter()
        .map(|g| singularity("surface.strengths", *g))
        .collect::<Result<Vec<_>, _>>()?;
    let sigma = critical_values(&strengths, block.m_max)?;
    let lambda = lambda_l(&rho, &a, block.n_l)?;
    let region = classify_region(&rho, &a, &sigma)?;
    let report = json!({
        "n_l": block.n_l,
        "Q": q.values(),
        "rho": rho.values(),
        "lambda": lambda,
        "on_surface": lambda.abs() <= SURFACE_TOL,
        "frak_m": frak_m(&rho, &a, block.n_l)?,
        "critical_values": sigma,
        "critical_values_over_pi": sigma.iter().map(|s| s / PI).collect::<Vec<_>>(),
        "region": region,
    });
    let mut files = Vec::new();
    if let Some(sweep) = &block.sweep {
        let mut table = Table::new(["t", "lambda"]);
        for t in sweep.values()? {
            let r = RhoVector::new(q.values().iter().map(|v| t * v).collect())?;
            table.push(vec![t, lambda_l(&r, &a, block.n_l)?]);
        }
        files.push(("sweep.csv".into(), table.to_csv(&prov.comments())));
    }
    Ok((report, files))
}

fn compare(config: &ExperimentConfig) -> Result<Produced, Failure> {
    let block = require(&config.compare, "compare")?;
    let spec_q = config.problem()?;
    let profile_q = integrate(&spec_q, config.r_max, config.tol)?;
    let summary_q = extract_summary(&profile_q)?;
    let singular_p = SingularityProfile::from_mu(block.mu_p).map_err(|_| {
        ConfigError(format!(
            "config field `compare.mu_p`: {} is outside the valid range (0, 1]",
            block.mu_p
        ))
    })?;
    let alpha_p = match &block.reduced_alpha_p {
        Some(r) => std::iter::once(0.0).chain(r.iter().copied()).collect(),
        None => spec_q.alpha0.clone(),
    };
    check_len("compare.reduced_alpha_p", alpha_p.len(), spec_q.n())?;
    let spec_p = ProblemSpec::new(spec_q.a.clone(), singular_p, alpha_p)?;
    let summary_p = extract_summary(&integrate(&spec_p, config.r_max, config.tol)?)?;
    let relation = d_relation_residual(&profile_q, block.mu_p, block.m_p, block.m_q)?;
    let rows = bubble_distance(&summary_p, &summary_q, Some(&relation.heights))?;
    let report = json!({
        "p": SummaryRecord::from(&summary_p),
        "q": SummaryRecord::from(&summary_q),
        "d_relation": relation,
        "distances": rows,
    });
    Ok((report, Vec::new()))
}

fn geometry(g: &Geometry) -> Result<TorusGreen, Failure> {
    Ok(TorusGreen::rectangular(g.lx, g.modes)?)
}

fn blowup_configuration(
    config: &ExperimentConfig,
    a: CoefficientMatrix,
) -> Result<BlowupConfiguration, Failure> {
    let block = require(&config.blowup, "blowup")?;
    let n = a.n();
    let big_n = block.points.len();
    let gammas = block.gammas.clone().unwrap_or_else(|| vec![0.0; big_n]);
    check_len("blowup.gammas", gammas.len(), big_n)?;
    let strengths = gammas
        .iter()
        .map(|g| singularity("blowup.gammas", *g))
        .collect::<Result<Vec<_>, _>>()?;
    let rho = match &block.rho {
        Some(r) => RhoVector::new(r.clone())?,
        None => q_point(&a, strengths.iter().map(|s| s.mu()).sum())?,
    };
    let h = block
        .h
        .clone()
        .unwrap_or_else(|| vec![CoefficientField::constant(1.0); n]);
    let curvature = block.curvature.clone().unwrap_or_else(|| vec![0.0; big_n]);
    check_len("blowup.curvature", curvature.len(), big_n)?;
    let (d, alpha) = match (&block.d, &block.alpha) {
        (Some(d), Some(alpha)) => (d.clone(), alpha.clone()),
        (None, None) => {
            let profile = integrate(&config.problem()?, config.r_max, config.tol)?;
            let s = extract_summary(&profile)?;
            (s.d, s.alpha)
        }
        _ => {
            return Err(ConfigError(
                "config field `blowup.D`: give D and alpha together or neither".into(),
            )
            .into())
        }
    };
    let c = BlowupConfiguration {
        points: block.points.clone(),
        strengths,
        a,
        rho,
        h,
        curvature,
        d,
        alpha,
        nl_term: block.nl_term,
    };
    c.validate()?;
    Ok(c)
}

#[derive(Serialize)]
struct LocationRow {
    t: usize,
    residual: [f64; 2],
}

fn leading(config: &ExperimentConfig, prov: &Provenance) -> Result<Produced, Failure> {
    let block = require(&config.blowup, "blowup")?;
    let geom = geometry(&block.geometry)?;
    let c = blowup_configuration(config, config.matrix()?)?;
    let locations = c
        .regular_set()
        .into_iter()
        .map(|t| {
            location_residual(&geom, &c, t, block.regime).map(|residual| LocationRow {
                t: t + 1,
                residual,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut files = Vec::new();
    let leading = match block.regime {
        Regime::Q => json!({
            "regime": block.regime,
            "eps": block.eps,
            "prediction": leading_term_q(&geom, &c, block.eps)?,
        }),
        Regime::General => {
            let lt = leading_term_general(&geom, &c, block.delta0, block.eps)?;
            let mut table = Table::new(["i", "t", "delta0", "a_coarse", "a_fine", "limit", "b"]);
            for r in &lt.rows {
                table.push(vec![
                    (r.i + 1) as f64,
                    (r.t + 1) as f64,
                    r.delta0,
                    r.a_coarse,
                    r.a_fine,
                    r.limit,
                    r.b,
                ]);
            }
            files.push(("stability.csv".into(), table.to_csv(&prov.comments())));
            json!({ "regime": block.regime, "leading": lt })
        }
    };
    let report = json!({
        "configuration": c,
        "lambda": c.lambda()?,
        "is_q": c.is_q()?,
        "frak_m": c.frak_m()?,
        "limit_factor": (0..c.n()).map(|i| c.limit_factor(i)).collect::<Vec<_>>(),
        "location_residuals": locations,
        "result": leading,
    });
    Ok((report, files))
}

#[derive(Serialize)]
struct CellRow {
    t: usize,
    vertices: Vec<[f64; 2]>,
    inradius: f64,
}

fn green(config: &ExperimentConfig, prov: &Provenance) -> Result<Produced, Failure> {
    let block = require(&config.green, "green")?;
    let geom = geometry(&block.geometry)?;
    let g = gstar_matrix(&geom, &block.points)?;
    let cells: Vec<CellRow> = (0..block.points.len())
        .map(|t| {
            let vertices = voronoi_cell(&geom, &block.points, t);
            CellRow {
                t: t + 1,
                inradius: inradius(&vertices),
                vertices,
            }
        })
        .collect();
    let report = json!({
        "periods": [geom.lx, geom.ly],
        "regular_diagonal": regular_diagonal(&geom),
        "gstar": g.values,
        "cells": cells,
    });
    let files = vec![("gstar.csv".into(), gstar_table(&g).to_csv(&prov.comments()))];
    Ok((report, files))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(text).unwrap()
    }

    fn file<'a>(out: &'a Output, name: &str) -> &'a str {
        &out.files.iter().find(|(n, _)| n == name).unwrap().1
    }

    #[test]
    fn exit_codes() {
        assert_eq!(Failure::Config(ConfigError("x".into())).exit_code(), 2);
        assert_eq!(Failure::Solver(Error::WrongRegime("x".into())).exit_code(), 2);
        let nc = Error::NonConvergence {
            iterations: 3,
            residual: 1.0,
            best: vec![0.5],
        };
        assert!(Failure::Solver(nc.clone()).to_string().contains("[0.5]"));
        assert_eq!(Failure::Solver(nc).exit_code(), 4);
        assert_eq!(Failure::Solver(Error::Extraction("x".into())).exit_code(), 3);
    }

    #[test]
    fn solve_embeds_provenance() {
        let out = run(Command::Solve, &cfg(r#"{"r_max": 1000}"#)).unwrap();
        let csv = file(&out, "profile.csv");
        assert!(csv.starts_with(&format!("# liouville {VERSION} solve\n# config {{")));
        assert!(csv.contains("\"r_max\":1000.0"));
        let summary: Value = serde_json::from_str(file(&out, "summary.json")).unwrap();
        assert_eq!(summary["version"], VERSION);
        assert_eq!(summary["config"]["tol"], 1e-12);
        assert!((out.report["sigma"][0].as_f64().unwrap() - 4.0).abs() < 1e-6);
    }

    #[test]
    fn missing_block_is_config_error() {
        let e = run(Command::Invert, &cfg("{}")).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("`invert`"));
    }

    #[test]
    fn surface_on_q() {
        let out = run(
            Command::Surface,
            &cfg(r#"{"matrix": [[1, 2], [2, 1]], "surface": {}}"#),
        )
        .unwrap();
        assert_eq!(out.report["on_surface"], true);
        assert_eq!(out.report["region"]["on_surface"], 1);
        assert!(out.report["lambda"].as_f64().unwrap().abs() < 1e-12);
    }

    #[test]
    fn green_table() {
        let out = run(
            Command::Green,
            &cfg(r#"{"green": {"points": [[0.25, 0.25], [0.75, 0.75]]}}"#),
        )
        .unwrap();
        let rows: Vec<&str> = file(&out, "gstar.csv").lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], "G_1,G_2");
        assert_eq!(rows.len(), 3);
        assert_eq!(out.report["cells"].as_array().unwrap().len(), 2);
    }
}
