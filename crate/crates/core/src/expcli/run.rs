use super::config::*;
use super::csv::{fmt_num, Table, CSV_SCHEMA_VERSION};
use super::slope::{slope_report, SlopeReport};
use super::ExpError;
use crate::covmodels::CorrelationModel;
use crate::fieldsim::{derive_seed, minkowski_m0, write_field, GaussianSampler};
use crate::lsmodel::{
    fit_loglog_slope, LsError, LsModel, MiVariant, SlopeFit, SubordinationSpec, DEFAULT_QUAD_NODES,
};
use crate::polybasis::{MarginalDensity, OrthonormalBasis};
use crate::special::norm_sf;
use crate::stfunctional::{mi_surface, CorrelationOperator, StSampler, TimeBasis, DEFAULT_TIME_NODES};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
/// Environment variable naming the directory that relative output
/// directories are resolved against.
pub const OUTPUT_ROOT_ENV: &str = "LSFIELD_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeSummary {
    pub curve: String,
    pub fit: Option<SlopeFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub csv_schema_version: u32,
    pub name: String,
    pub scenario: String,
    pub config_sha256: String,
    pub library_version: String,
    pub output_dir: String,
    pub wall_clock_seconds: f64,
    pub budget_seconds: Option<f64>,
    pub within_budget: Option<bool>,
    pub artifacts: Vec<Artifact>,
    pub slopes: Vec<SlopeSummary>,
    pub summaries: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    /// Checks that every listed artifact exists with its recorded length.
    pub fn verify(&self) -> Result<(), String> {
        let dir = Path::new(&self.output_dir);
        for a in &self.artifacts {
            let len = fs::metadata(dir.join(&a.path)).map_err(|e| format!("{}: {e}", a.path))?.len();
            if len != a.bytes {
                return Err(format!("{}: {len} bytes, manifest says {}", a.path, a.bytes));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the output root (otherwise the environment variable, then
    /// the working directory).
    pub output_root: Option<PathBuf>,
    /// Directory that relative input paths resolve against.
    pub base_dir: Option<PathBuf>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Single writer for one run; files are recorded in the order written.
struct Outputs {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl Outputs {
    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), ExpError> {
        let path = self.dir.join(rel);
        fs::write(&path, bytes).map_err(|e| ExpError::io(&path, e))?;
        self.record(rel)
    }

    fn record(&mut self, rel: &str) -> Result<(), ExpError> {
        let path = self.dir.join(rel);
        let bytes = fs::read(&path).map_err(|e| ExpError::io(&path, e))?;
        self.artifacts.push(Artifact {
            path: rel.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }
}

#[derive(Default)]
struct Report {
    slopes: Vec<SlopeSummary>,
    summaries: BTreeMap<String, f64>,
    warnings: Vec<String>,
}

impl Report {
    fn slope(&mut self, curve: &str, fit: Result<SlopeFit, String>) {
        let (fit, error) = match fit {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e)),
        };
        self.slopes.push(SlopeSummary {
            curve: curve.to_string(),
            fit,
            error,
        });
    }
}

/// Parses, validates and runs a configuration given as JSON text.
pub fn run_config_text(text: &str, options: &RunOptions) -> Result<RunManifest, ExpError> {
    let config = ExperimentConfig::from_json(text).map_err(ExpError::Parse)?;
    let violations = config.violations();
    if !violations.is_empty() {
        return Err(ExpError::Config { violations });
    }
    let start = Instant::now();
    let root = match &options.output_root {
        Some(r) => r.clone(),
        None => std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".")),
    };
    let dir = root.join(&config.output_dir);
    fs::create_dir_all(&dir).map_err(|e| ExpError::io(&dir, e))?;
    let mut out = Outputs {
        dir: dir.clone(),
        artifacts: Vec::new(),
    };
    let mut report = Report::default();
    match config.scenario {
        Scenario::MiCurve | Scenario::RenyiCurve | Scenario::SubordinatedCurve => {
            run_curve(&config, &mut out, &mut report)?
        }
        Scenario::FieldSim => run_field(&config, &mut out, &mut report)?,
        Scenario::StSurface => run_st(&config, &mut out, &mut report)?,
        Scenario::SlopeReport => run_slope(&config, options, &mut out, &mut report)?,
    }
    let elapsed = start.elapsed().as_secs_f64();
    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        csv_schema_version: CSV_SCHEMA_VERSION,
        name: config.name.clone(),
        scenario: config.scenario.name().to_string(),
        config_sha256: sha256_hex(text.as_bytes()),
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        output_dir: dir.to_string_lossy().into_owned(),
        wall_clock_seconds: elapsed,
        budget_seconds: config.budget_seconds,
        within_budget: config.budget_seconds.map(|b| elapsed <= b),
        artifacts: out.artifacts,
        slopes: report.slopes,
        summaries: report.summaries,
        warnings: report.warnings,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let path = dir.join("manifest.json");
    fs::write(&path, json + "\n").map_err(|e| ExpError::io(&path, e))?;
    Ok(manifest)
}

pub fn run_config_file(path: &Path, options: &RunOptions) -> Result<RunManifest, ExpError> {
    let text = fs::read_to_string(path).map_err(|e| ExpError::io(path, e))?;
    let mut options = options.clone();
    if options.base_dir.is_none() {
        options.base_dir = path.parent().map(Path::to_path_buf);
    }
    run_config_text(&text, &options)
}

fn build_model(m: &ModelBlock) -> Result<LsModel, ExpError> {
    let corr = CorrelationModel::new(m.correlation.clone(), m.dim)?;
    Ok(LsModel::with_options(
        m.marginal,
        corr,
        m.truncation,
        m.quad_nodes.unwrap_or(DEFAULT_QUAD_NODES),
        m.policy.unwrap_or_default(),
    )?)
}

fn q_column(q: f64) -> String {
    format!("mi_q{}", fmt_num(q))
}

fn run_curve(config: &ExperimentConfig, out: &mut Outputs, report: &mut Report) -> Result<(), ExpError> {
    let model = build_model(config.model.as_ref().expect("validated"))?;
    let d = config.distances.as_ref().expect("validated").points().map_err(ExpError::Parse)?;
    let window = config.fit_window.map(|[lo, hi]| (lo, hi));
    let fit_window = window.unwrap_or((d[d.len() - 1] / 10.0, d[d.len() - 1]));
    let spec = match &config.subordinator {
        Some(s) => Some(SubordinationSpec::new(s.clone(), model.engine())?),
        None => None,
    };
    report.warnings.extend(model.correlation_model().warnings().iter().cloned());

    let mut names = vec!["d".to_string()];
    let mut columns: Vec<Vec<f64>> = vec![d.clone()];
    let gammas: Vec<f64> = d.iter().map(|&r| model.gamma(r)).collect();
    let mut clamped: Option<Vec<f64>> = None;

    let variants: Vec<(String, MiVariant)> = match config.scenario {
        Scenario::MiCurve => vec![("mi".into(), MiVariant::Shannon)],
        Scenario::RenyiCurve => config.q.iter().map(|&q| (q_column(q), MiVariant::Renyi(q))).collect(),
        _ if config.q.is_empty() => vec![("mi".into(), MiVariant::Subordinated(None))],
        _ => config.q.iter().map(|&q| (q_column(q), MiVariant::Subordinated(Some(q)))).collect(),
    };
    for (name, variant) in &variants {
        let values = if config.renyi_method == RenyiMethod::Multinomial {
            let q = match variant {
                MiVariant::Renyi(q) => *q,
                _ => unreachable!("validated"),
            };
            let mi: Vec<f64> = d
                .par_iter()
                .map(|&r| model.renyi_mi_multinomial(r, q))
                .collect::<Result<_, LsError>>()?;
            let fit = fit_loglog_slope(&d, &mi, fit_window).map(|(f, w)| {
                report.warnings.extend(w);
                f
            });
            report.slope(name, fit.map_err(|e| e.to_string()));
            mi
        } else {
            let curve = model.mi_curve(variant, spec.as_ref(), &d, window)?;
            report.slope(name, curve.slope_fit.clone().map_err(|e| e.to_string()));
            for w in &curve.warnings {
                if !report.warnings.contains(w) {
                    report.warnings.push(w.clone());
                }
            }
            if clamped.is_none() {
                clamped = curve.clamped_mass.clone();
            }
            if config.bounds && config.scenario == Scenario::MiCurve {
                names.extend([name.clone(), "lower".into(), "upper".into()]);
                columns.extend([curve.mi.clone(), curve.lower.expect("shannon"), curve.upper.expect("shannon")]);
                continue;
            }
            curve.mi
        };
        names.push(name.clone());
        columns.push(values);
    }
    if config.bounds && config.scenario == Scenario::SubordinatedCurve {
        // data processing: g(X) carries no more information than X
        let upper: Vec<f64> = gammas
            .iter()
            .map(|&g| {
                if g.abs() < 1.0 {
                    model.engine().bounds(g).map(|b| b.1)
                } else {
                    Ok(f64::NAN)
                }
            })
            .collect::<Result<_, LsError>>()?;
        names.push("upper".into());
        columns.push(upper);
    }

    let mut table = Table::new(names);
    for i in 0..d.len() {
        table.push(columns.iter().map(|c| c[i]).collect());
    }
    out.write("curve.csv", table.to_csv().as_bytes())?;

    let mut detail = Table::new(["d", "gamma", "clamped_mass"]);
    for i in 0..d.len() {
        detail.push(vec![d[i], gammas[i], clamped.as_ref().map_or(0.0, |c| c[i])]);
    }
    out.write("detail.csv", detail.to_csv().as_bytes())?;
    if let Some(c) = &clamped {
        report.summaries.insert("max_clamped_mass".into(), c.iter().copied().fold(0.0, f64::max));
    }

    if let Some(block) = &config.slope {
        let (lo, hi) = (block.window[0], block.window[1]);
        let mut text = String::new();
        let mut csv = String::new();
        let cols: Vec<String> = if table.header.contains(&block.column) {
            vec![block.column.clone()]
        } else {
            variants.iter().map(|v| v.0.clone()).collect()
        };
        let mut all_pass = true;
        for col in &cols {
            let r: SlopeReport = slope_report(&table, col, (lo, hi), &block.expected, block.tolerance, block.min_points)?;
            all_pass &= r.passed();
            text.push_str(&r.to_text());
            let body = r.to_csv();
            if csv.is_empty() {
                csv.push_str(&body);
            } else {
                csv.push_str(body.split_once('\n').map_or("", |x| x.1));
            }
            report.summaries.insert(format!("slope_{col}"), r.fit.slope);
        }
        report.summaries.insert("slope_pass".into(), f64::from(u8::from(all_pass)));
        out.write("slope.csv", csv.as_bytes())?;
        out.write("slope.txt", text.as_bytes())?;
    }
    Ok(())
}

/// `1 - mean((X(x + h) - X(x))²) / (2 var)` along the last grid axis.
fn variogram_correlation(fields: &[Vec<f64>], sizes: &[usize], lag: usize, variance: f64) -> f64 {
    let cols = *sizes.last().expect("grid");
    let rows: usize = sizes.iter().rev().skip(1).product();
    let mut acc = 0.0;
    let mut count = 0usize;
    for f in fields {
        for row in 0..rows {
            for col in 0..cols - lag {
                let diff = f[row * cols + col + lag] - f[row * cols + col];
                acc += diff * diff;
                count += 1;
            }
        }
    }
    1.0 - acc / count as f64 / (2.0 * variance)
}

fn run_field(config: &ExperimentConfig, out: &mut Outputs, report: &mut Report) -> Result<(), ExpError> {
    let block = config.field.as_ref().expect("validated");
    let m = config.model.as_ref().expect("validated");
    let corr = CorrelationModel::new(m.correlation.clone(), block.grid.dim())?;
    report.warnings.extend(corr.warnings().iter().cloned());
    let sampler = GaussianSampler::new(&block.grid, &corr, block.method)?;
    let dof = block.chi2_dof;
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..block.replicates as u64)
        .into_par_iter()
        .map(|i| {
            let g = sampler.realize(derive_seed(config.seed, 2 * i));
            let c = sampler.chi_square(dof, derive_seed(config.seed, 2 * i + 1))?;
            Ok((g.values, c.values))
        })
        .collect::<Result<_, crate::fieldsim::SimError>>()?;
    let (gauss, chi): (Vec<Vec<f64>>, Vec<Vec<f64>>) = pairs.into_iter().unzip();

    let sizes = &block.grid.sizes;
    let mut table = Table::new(["lag", "distance", "analytic", "empirical", "analytic_chi2", "empirical_chi2"]);
    for lag in 1..=block.max_lag {
        let r = lag as f64 * block.grid.spacing;
        let g = corr.correlation(r);
        table.push(vec![
            lag as f64,
            r,
            g,
            variogram_correlation(&gauss, sizes, lag, 1.0),
            g * g,
            variogram_correlation(&chi, sizes, lag, dof as f64 / 2.0),
        ]);
    }
    out.write("correlation.csv", table.to_csv().as_bytes())?;

    let volume = block.grid.volume();
    let first = sampler.realize(derive_seed(config.seed, 0));
    let ratios: Vec<f64> = gauss
        .iter()
        .map(|values| {
            let f = crate::fieldsim::FieldRealization {
                values: values.clone(),
                ..first.clone()
            };
            minkowski_m0(&f, block.nu) / volume
        })
        .collect();
    let n = ratios.len() as f64;
    let mean = ratios.iter().sum::<f64>() / n;
    let sd = (ratios.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut m0 = Table::new(["nu", "mean_ratio", "stderr", "expected"]);
    m0.push(vec![block.nu, mean, sd / n.sqrt(), norm_sf(block.nu)]);
    out.write("m0.csv", m0.to_csv().as_bytes())?;
    report.summaries.insert("m0_mean_ratio".into(), mean);
    report.summaries.insert("m0_stderr".into(), sd / n.sqrt());

    if block.export_first {
        write_field(&first, &out.dir.join("field")).map_err(ExpError::from)?;
        out.record("field.f64le")?;
        out.record("field.hdr")?;
        let chi_first = sampler.chi_square(dof, derive_seed(config.seed, 1))?;
        write_field(&chi_first, &out.dir.join("chi2")).map_err(ExpError::from)?;
        out.record("chi2.f64le")?;
        out.record("chi2.hdr")?;
    }
    Ok(())
}

fn run_st(config: &ExperimentConfig, out: &mut Outputs, report: &mut Report) -> Result<(), ExpError> {
    let st = config.st.as_ref().expect("validated");
    let basis = TimeBasis::cosine(st.t_max, st.basis_count)?;
    let nodes = st.time_nodes.unwrap_or(DEFAULT_TIME_NODES);
    let op = CorrelationOperator::with_nodes(st.covariance, basis, nodes)?;
    let engine = crate::lsmodel::LsEngine::new(
        OrthonormalBasis::new(MarginalDensity::StandardGaussian, st.truncation)?,
        st.truncation,
    )?;
    let mesh = st.mesh.points().map_err(ExpError::Parse)?;
    let distances = config.distances.as_ref().expect("validated").points().map_err(ExpError::Parse)?;

    let mut surface = Table::new(["r", "t", "s", "k"]);
    let mut entries = Table::new(["r", "n", "m", "gamma", "mi"]);
    let mut levels = Vec::new();
    let b = basis.count;
    for &r in &distances {
        let s = mi_surface(&op, &engine, r, &mesh)?;
        for (i, &t) in mesh.iter().enumerate() {
            for (j, &u) in mesh.iter().enumerate() {
                surface.push(vec![r, t, u, s.surface[i * mesh.len() + j]]);
            }
        }
        for n in 0..b {
            for m in 0..b {
                entries.push(vec![r, (n + 1) as f64, (m + 1) as f64, s.correlations[n * b + m], s.entries[n * b + m]]);
            }
        }
        report.summaries.insert(format!("mean_level_r{}", fmt_num(r)), s.mean_level());
        levels.push(s.mean_level());
    }
    out.write("surface.csv", surface.to_csv().as_bytes())?;
    out.write("entries.csv", entries.to_csv().as_bytes())?;
    let sidecar = serde_json::json!({
        "covariance": st.covariance,
        "basis": basis,
        "truncation": st.truncation,
        "time_nodes": nodes,
        "mesh": mesh,
        "distances": distances,
        "mean_levels": levels,
    });
    out.write("surface.json", (serde_json::to_string_pretty(&sidecar).expect("json") + "\n").as_bytes())?;

    if let Some(sim) = &st.simulate {
        let sampler = StSampler::new(&sim.space, &sim.times, &st.covariance)?;
        let field = sampler.realize(config.seed);
        for k in 0..sim.times.len() {
            let stem = format!("st_field_{k:03}");
            write_field(&field.at_time(k), &out.dir.join(&stem)).map_err(ExpError::from)?;
            out.record(&format!("{stem}.f64le"))?;
            out.record(&format!("{stem}.hdr"))?;
        }
    }
    Ok(())
}

fn run_slope(
    config: &ExperimentConfig,
    options: &RunOptions,
    out: &mut Outputs,
    report: &mut Report,
) -> Result<(), ExpError> {
    let block = config.slope.as_ref().expect("validated");
    let input = PathBuf::from(block.input_csv.as_ref().expect("validated"));
    let path = match &options.base_dir {
        Some(base) if input.is_relative() => base.join(input),
        _ => input,
    };
    let text = fs::read_to_string(&path).map_err(|e| ExpError::io(&path, e))?;
    let table = Table::parse(&text).map_err(ExpError::Csv)?;
    let r = slope_report(
        &table,
        &block.column,
        (block.window[0], block.window[1]),
        &block.expected,
        block.tolerance,
        block.min_points,
    )?;
    report.slope(&block.column, Ok(r.fit.clone()));
    report.warnings.extend(r.warnings.iter().cloned());
    report.summaries.insert("slope_pass".into(), f64::from(u8::from(r.passed())));
    out.write("slope.csv", r.to_csv().as_bytes())?;
    out.write("slope.txt", r.to_text().as_bytes())?;
    Ok(())
}
