//! Convergence studies: configuration, level sweep and table output.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::Deserialize;

use crate::error::{Result, WgError};
use crate::local_ops::QuadDegrees;
use crate::mesh::{gen_honeycomb, gen_quadrilateral, gen_triangular, PolyMesh2};
use crate::postprocess::{convergence_rates, error_norms};
use crate::problems::lookup;
use crate::solver::{solve, SolveParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFamily {
    Triangular,
    Quadrilateral,
    Honeycomb,
}

impl MeshFamily {
    /// Triangular and honeycomb levels are subdivision counts; quadrilateral
    /// levels count refinements of the initial mesh.
    pub fn generate(self, level: usize) -> Result<PolyMesh2> {
        match self {
            Self::Triangular => gen_triangular(level),
            Self::Quadrilateral => gen_quadrilateral(level),
            Self::Honeycomb => gen_honeycomb(level),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Triangular => "triangular",
            Self::Quadrilateral => "quadrilateral",
            Self::Honeycomb => "honeycomb",
        }
    }
}

impl fmt::Display for MeshFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MeshFamily {
    type Err = WgError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triangular" => Ok(Self::Triangular),
            "quadrilateral" => Ok(Self::Quadrilateral),
            "honeycomb" => Ok(Self::Honeycomb),
            _ => Err(WgError::Config(format!(
                "unknown mesh family `{s}` (expected triangular, quadrilateral or honeycomb)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Markdown,
}

impl FromStr for OutputFormat {
    type Err = WgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(Self::Csv),
            "md" | "markdown" => Ok(Self::Markdown),
            other => Err(WgError::Config(format!("unknown output format `{other}` (expected csv or md)"))),
        }
    }
}

pub fn parse_formats(s: &str) -> Result<Vec<OutputFormat>> {
    let mut out = Vec::new();
    for f in s.split(',').filter(|x| !x.trim().is_empty()) {
        let f = f.parse()?;
        if !out.contains(&f) {
            out.push(f);
        }
    }
    if out.is_empty() {
        return Err(WgError::Config("no output format given".into()));
    }
    Ok(out)
}

/// Parses `a..b` or a comma-separated list. Ranges double from `a` up to
/// `b` for triangular and honeycomb meshes and step by one for the
/// quadrilateral family.
pub fn parse_levels(s: &str, family: MeshFamily) -> Result<Vec<usize>> {
    let bad = |why: &str| WgError::Config(format!("bad level list `{s}`: {why}"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad("levels must be non-negative integers"));
    let levels = if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (num(a)?, num(b)?);
        if a > b {
            return Err(bad("range start exceeds end"));
        }
        match family {
            MeshFamily::Quadrilateral => (a..=b).collect(),
            _ => {
                if a == 0 {
                    return Err(bad("doubling ranges must start above 0"));
                }
                std::iter::successors(Some(a), |&x| Some(x * 2)).take_while(|&x| x <= b).collect()
            }
        }
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    validate_levels(&levels)?;
    Ok(levels)
}

fn validate_levels(levels: &[usize]) -> Result<()> {
    if levels.is_empty() {
        return Err(WgError::Config("level list is empty".into()));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(WgError::Config(format!("levels must increase strictly, got {levels:?}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub problem: String,
    pub family: MeshFamily,
    pub levels: Vec<usize>,
    pub order: usize,
    pub rho: f64,
    pub quad: QuadDegrees,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub condense: bool,
    pub out_dir: Option<PathBuf>,
    pub formats: Vec<OutputFormat>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            problem: "ex2-poisson".into(),
            family: MeshFamily::Triangular,
            levels: vec![2, 4, 8, 16, 32],
            order: 1,
            rho: 1.0,
            quad: QuadDegrees::for_order(1),
            rel_tol: 1e-12,
            max_iter: 50_000,
            condense: true,
            out_dir: None,
            formats: vec![OutputFormat::Csv, OutputFormat::Markdown],
        }
    }
}

/// On-disk config layout (TOML). Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub study: StudySection,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub problem: Option<String>,
    pub family: Option<MeshFamily>,
    pub levels: Option<LevelSpec>,
    pub k: Option<usize>,
    pub rho: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum LevelSpec {
    List(Vec<usize>),
    Text(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    pub volume: Option<usize>,
    pub edge: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub condense: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub format: Option<Vec<String>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| WgError::Config(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| WgError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| WgError::Config(format!("{}: {e}", path.display())))
    }
}

/// Command-line values; `None` falls back to the config file, then to
/// [`StudyConfig::default`].
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub problem: Option<String>,
    pub family: Option<MeshFamily>,
    pub levels: Option<String>,
    pub order: Option<usize>,
    pub rho: Option<f64>,
    pub quad_degree: Option<usize>,
    pub tol: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub formats: Option<String>,
}

impl StudyConfig {
    pub fn resolve(file: &ConfigFile, cli: &Overrides) -> Result<Self> {
        let d = Self::default();
        let family = cli.family.or(file.study.family).unwrap_or(d.family);
        let order = cli.order.or(file.study.k).unwrap_or(d.order);
        if !(1..=3).contains(&order) {
            return Err(WgError::Config(format!("k must be 1, 2 or 3, got {order}")));
        }
        let levels = match (&cli.levels, &file.study.levels) {
            (Some(s), _) => parse_levels(s, family)?,
            (None, Some(LevelSpec::Text(s))) => parse_levels(s, family)?,
            (None, Some(LevelSpec::List(l))) => {
                validate_levels(l)?;
                l.clone()
            }
            (None, None) => match family {
                MeshFamily::Quadrilateral => vec![1, 2, 3, 4, 5],
                MeshFamily::Honeycomb => vec![3, 6, 12, 24],
                MeshFamily::Triangular => d.levels.clone(),
            },
        };
        let base = QuadDegrees::for_order(order);
        let quad = match cli.quad_degree {
            Some(q) => QuadDegrees { volume: q, edge: q },
            None => QuadDegrees {
                volume: file.quadrature.volume.unwrap_or(base.volume),
                edge: file.quadrature.edge.unwrap_or(base.edge),
            },
        };
        let rho = cli.rho.or(file.study.rho).unwrap_or(d.rho);
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(WgError::Config(format!("rho must be positive, got {rho}")));
        }
        let rel_tol = cli.tol.or(file.solver.tol).unwrap_or(d.rel_tol);
        if !(rel_tol > 0.0 && rel_tol < 1.0) {
            return Err(WgError::Config(format!("solver tolerance must lie in (0, 1), got {rel_tol}")));
        }
        let formats = match (&cli.formats, &file.output.format) {
            (Some(s), _) => parse_formats(s)?,
            (None, Some(list)) => parse_formats(&list.join(","))?,
            (None, None) => d.formats.clone(),
        };
        let problem = cli.problem.clone().or_else(|| file.study.problem.clone()).unwrap_or(d.problem);
        lookup(&problem)?;
        Ok(Self {
            problem,
            family,
            levels,
            order,
            rho,
            quad,
            rel_tol,
            max_iter: file.solver.max_iter.unwrap_or(d.max_iter),
            condense: file.solver.condense.unwrap_or(d.condense),
            out_dir: cli.out_dir.clone().or_else(|| file.output.dir.clone()),
            formats,
        })
    }

    pub fn solve_params(&self) -> SolveParams {
        SolveParams {
            order: self.order,
            rho: self.rho,
            quad: self.quad,
            rel_tol: self.rel_tol,
            max_iter: self.max_iter,
            condense: self.condense,
        }
    }

    /// Output file stem, e.g. `ex2-poisson_triangular_k1`.
    pub fn stem(&self) -> String {
        format!("{}_{}_k{}", self.problem, self.family, self.order)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub level: usize,
    pub h: f64,
    pub cells: usize,
    pub unknowns: usize,
    pub triple_bar: f64,
    pub l2_cell: f64,
    pub l2_edge: f64,
    pub h1_discrete: f64,
    pub iterations: usize,
    pub residual: f64,
    pub max_conservation: f64,
    pub max_jump: f64,
    pub seconds: f64,
}

/// Error columns, in table order.
pub const NORMS: [&str; 4] = ["triple_bar", "l2_cell", "l2_edge", "h1_discrete"];

impl StudyRow {
    pub fn norms(&self) -> [f64; 4] {
        [self.triple_bar, self.l2_cell, self.l2_edge, self.h1_discrete]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub rows: Vec<StudyRow>,
}

impl StudyReport {
    /// Pairwise rate into row `i` for norm `n`, if defined.
    pub fn rate(&self, n: usize, i: usize) -> Option<f64> {
        if i == 0 || i >= self.rows.len() {
            return None;
        }
        let (a, b) = (&self.rows[i - 1], &self.rows[i]);
        convergence_rates(&[(a.h, a.norms()[n]), (b.h, b.norms()[n])]).ok().map(|r| r.pairwise[0])
    }

    /// Least-squares exponent over all rows for norm `n`.
    pub fn fitted(&self, n: usize) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self.rows.iter().map(|r| (r.h, r.norms()[n])).collect();
        convergence_rates(&pts).ok().map(|r| r.fitted)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["level".to_string(), "h".into(), "cells".into(), "unknowns".into()];
        for n in NORMS {
            header.push(n.into());
            header.push(format!("rate_{n}"));
        }
        header.extend(["iterations", "residual", "max_conservation", "max_jump"].map(String::from));
        w.write_record(&header).unwrap();
        for (i, r) in self.rows.iter().enumerate() {
            let mut rec = vec![r.level.to_string(), sci(r.h), r.cells.to_string(), r.unknowns.to_string()];
            for (n, v) in r.norms().into_iter().enumerate() {
                rec.push(sci(v));
                rec.push(self.rate(n, i).map(rate).unwrap_or_default());
            }
            rec.extend([r.iterations.to_string(), sci(r.residual), sci(r.max_conservation), sci(r.max_jump)]);
            w.write_record(&rec).unwrap();
        }
        let mut rec = vec!["fitted".to_string(), String::new(), String::new(), String::new()];
        for n in 0..NORMS.len() {
            rec.push(String::new());
            rec.push(self.fitted(n).map(rate).unwrap_or_default());
        }
        rec.extend(std::iter::repeat(String::new()).take(4));
        w.write_record(&rec).unwrap();
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn to_markdown(&self) -> String {
        let c = &self.config;
        let mut header = vec!["h".to_string()];
        for n in ["⦀e⦀", "‖e0‖", "‖e‖_E", "‖e‖_1,h"] {
            header.push(n.into());
            header.push("rate".into());
        }
        header.extend(["iters".into(), "time [s]".into()]);
        let mut rows: Vec<Vec<String>> = Vec::new();
        for (i, r) in self.rows.iter().enumerate() {
            let mut row = vec![sci(r.h)];
            for (n, v) in r.norms().into_iter().enumerate() {
                row.push(sci(v));
                row.push(self.rate(n, i).map(rate).unwrap_or_default());
            }
            row.push(r.iterations.to_string());
            row.push(format!("{:.2}", r.seconds));
            rows.push(row);
        }
        let mut fit = vec!["O(h^r), r=".to_string()];
        for n in 0..NORMS.len() {
            fit.push(self.fitted(n).map(rate).unwrap_or_default());
            fit.push(String::new());
        }
        fit.extend([String::new(), String::new()]);
        rows.push(fit);

        let widths: Vec<usize> = (0..header.len())
            .map(|j| rows.iter().map(|r| r[j].chars().count()).chain([header[j].chars().count()]).max().unwrap())
            .collect();
        let line = |cells: &[String]| {
            let padded: Vec<String> =
                cells.iter().zip(&widths).map(|(s, &w)| format!("{s}{}", " ".repeat(w - s.chars().count()))).collect();
            format!("| {} |\n", padded.join(" | "))
        };
        let mut out = format!(
            "## {} on {} meshes, k = {}, rho = {}\n\n",
            c.problem, c.family, c.order, c.rho
        );
        out.push_str(&line(&header));
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
        for r in &rows {
            out.push_str(&line(r));
        }
        out
    }

    /// Writes the requested formats into `dir`; returns the paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for f in &self.config.formats {
            let (ext, text) = match f {
                OutputFormat::Csv => ("csv", self.to_csv()),
                OutputFormat::Markdown => ("md", self.to_markdown()),
            };
            let path = dir.join(format!("{}.{ext}", self.config.stem()));
            std::fs::write(&path, text)?;
            paths.push(path);
        }
        Ok(paths)
    }
}

/// Five significant digits with a signed two-digit exponent: `1.3240e+00`.
pub fn sci(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.4e}");
    let (m, e) = s.split_once('e').unwrap();
    let e: i32 = e.parse().unwrap();
    format!("{m}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
}

fn rate(r: f64) -> String {
    format!("{r:.4}")
}

/// A study aborted at some level, with the rows completed before it.
#[derive(Debug)]
pub struct StudyFailure {
    pub partial: StudyReport,
    pub level: usize,
    pub error: WgError,
}

impl fmt::Display for StudyFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "level {}: {}", self.level, self.error)
    }
}

impl std::error::Error for StudyFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

pub fn run_study(config: &StudyConfig) -> std::result::Result<StudyReport, StudyFailure> {
    run_study_with(config, |_| {})
}

/// Runs the levels in order, calling `progress` after each one.
pub fn run_study_with(
    config: &StudyConfig,
    mut progress: impl FnMut(&StudyRow),
) -> std::result::Result<StudyReport, StudyFailure> {
    let mut report = StudyReport { config: config.clone(), rows: Vec::new() };
    let problem = match lookup(&config.problem) {
        Ok(p) => p,
        Err(error) => return Err(StudyFailure { partial: report, level: 0, error }),
    };
    let params = config.solve_params();
    for &level in &config.levels {
        let started = Instant::now();
        let row = config.family.generate(level).and_then(|mesh| {
            let sol = solve(&mesh, &problem, &params)?;
            let err = error_norms(&sol.discretization, &sol.u, &problem)?;
            Ok(StudyRow {
                level,
                h: mesh.nominal_h(),
                cells: mesh.num_cells(),
                unknowns: sol.stats.unknowns,
                triple_bar: err.triple_bar,
                l2_cell: err.l2_cell,
                l2_edge: err.l2_edge,
                h1_discrete: err.h1_discrete,
                iterations: sol.stats.iterations,
                residual: sol.stats.residual,
                max_conservation: err.conservation.iter().fold(0.0, |m: f64, v| m.max(*v)),
                max_jump: err.jumps.iter().flat_map(|j| j.moments.iter()).fold(0.0, |m: f64, v| m.max(v.abs())),
                seconds: started.elapsed().as_secs_f64(),
            })
        });
        match row {
            Ok(row) => {
                progress(&row);
                report.rows.push(row);
            }
            Err(error) => return Err(StudyFailure { partial: report, level, error }),
        }
    }
    Ok(report)
}
