//! Batch front-end: one JSON configuration per run, CSV/JSON artifacts out.

mod config;
mod verify;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

pub use config::{parse_config, Command, RunConfig};
pub use verify::{verify_all, InvariantResult, VerifySummary};

use crate::error::{FockError, Result};
use crate::export::{self, KernelSample};
use crate::geometry::{build_lattice_with, covering_multiplicity, Connectivity, LatticeOptions, MetricGraph};
use crate::kernels::{verify_kernel_bounds, KernelSeries};
use crate::numerics::linspace;
use crate::operators::{
    default_test_family, fredholm_probe, hankel_norm_probe, smallest_singular_value, spectral_norm, toeplitz_matrix,
    FredholmThresholds,
};
use crate::transforms::{annulus_samples, build_cutoff, classify_symbol, oscillation_report, BerezinField};
use crate::weights::{fit_growth_exponent, InducedRadiusField, WeightModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "fockprobe", about = "Numerical probes of doubling Fock spaces")]
struct Args {
    /// JSON run configuration
    config: PathBuf,
    /// Output path prefix, overriding the `out` key
    #[arg(long)]
    out: Option<String>,
}

/// Files written by a run and whether every check it made passed.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub passed: bool,
}

/// Series covering `|z| ≤ radius` with at least `min_degree + 1` terms.
pub fn series_for(weight: &WeightModel, radius: f64, min_degree: usize) -> Result<KernelSeries> {
    let s = KernelSeries::for_radius(weight, radius)?;
    if s.max_degree() >= min_degree + s.valid_from() {
        return Ok(s);
    }
    KernelSeries::basis_norms(weight, min_degree + s.valid_from())
}

fn square_grid(extent: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        vec![0.0]
    } else {
        linspace(-extent, extent, n)
    }
}

struct Sink {
    prefix: String,
    files: Vec<PathBuf>,
}

impl Sink {
    fn path(&mut self, command: Command, suffix: &str) -> PathBuf {
        let p = PathBuf::from(format!("{}_{}{suffix}", self.prefix, command.name()));
        self.files.push(p.clone());
        p
    }

    fn json<T: Serialize + ?Sized>(&mut self, command: Command, report: &T) -> Result<()> {
        let p = self.path(command, ".json");
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| FockError::Io(format!("{}: {e}", dir.display())))?;
        }
        export::write_json(&p, report)
    }

    fn csv(&mut self, command: Command, write: impl FnOnce(std::fs::File) -> Result<()>) -> Result<()> {
        let p = self.path(command, ".csv");
        write(export::create_file(&p)?)
    }
}

/// Runs the configured command, writing outputs under `prefix`.
pub fn execute(config: &RunConfig, prefix: &str) -> Result<Outcome> {
    config.validate()?;
    let weight = config.weight_model()?;
    let field = InducedRadiusField::new(weight.clone());
    let cmd = config.command;
    let mut sink = Sink {
        prefix: prefix.to_string(),
        files: Vec::new(),
    };
    let mut passed = true;
    match cmd {
        Command::WeightInfo => {
            let origin = Complex64::new(0.0, 0.0);
            let samples: Vec<Complex64> = annulus_samples(0.0, config.grid_extent, 16);
            let doubling = weight.doubling_constant_estimate(&samples, &[0.5, 1.0, 2.0])?;
            let moduli: Vec<f64> = linspace(1.0, config.grid_extent.max(2.0), 8);
            let (growth_constant, growth_exponent) = fit_growth_exponent(&field, &moduli)?;
            let report = json!({
                "weight": weight.to_string(),
                "rho": field.rho(origin)?,
                "laplacian_at_origin": weight.laplacian_radial(0.0).ok(),
                "atom_mass_at_origin": weight.atom_mass_at_origin(),
                "doubling_estimate": doubling,
                "rho_growth_exponent": growth_exponent,
                "rho_growth_constant": growth_constant,
            });
            sink.json(cmd, &report)?;
        }
        Command::RhoMap => {
            let axis = square_grid(config.grid_extent, config.grid_points);
            let mut rows = Vec::with_capacity(axis.len() * axis.len());
            for &y in &axis {
                for &x in &axis {
                    let z = Complex64::new(x, y);
                    rows.push((z, field.rho(z)?));
                }
            }
            sink.csv(cmd, |f| export::write_rho_map_csv(f, &rows))?;
        }
        Command::Lattice => {
            let opts = LatticeOptions {
                packing: config.lattice_packing,
                ..LatticeOptions::default()
            };
            let lattice = build_lattice_with(&field, config.r, config.domain_radius, &opts)?;
            let uncovered = lattice.uncovered_probes(&field, opts.probe_divisor)?;
            let probes = annulus_samples(0.0, 0.98 * config.domain_radius, 400);
            let multiplicity = covering_multiplicity(&lattice, &field, 1.0, &probes)?;
            let violations = lattice.disjointness_violations();
            passed = violations == 0 && uncovered.is_empty();
            sink.csv(cmd, |f| export::write_lattice_csv(f, &lattice))?;
            sink.json(
                cmd,
                &json!({
                    "weight": weight.to_string(),
                    "r": config.r,
                    "domain_radius": config.domain_radius,
                    "packing": lattice.packing,
                    "points": lattice.len(),
                    "disjointness_violations": violations,
                    "uncovered_probes": uncovered.len(),
                    "covering_multiplicity": multiplicity,
                }),
            )?;
        }
        Command::DistanceField => {
            let graph = MetricGraph::new(&field, config.graph_half_width, config.graph_spacing, Connectivity::Sixteen)?;
            let df = graph.distance_field()?;
            sink.csv(cmd, |f| export::write_distance_field_csv(f, df.nodes()))?;
        }
        Command::KernelCheck => {
            let series = series_for(&weight, config.grid_extent * std::f64::consts::SQRT_2, 0)?;
            let axis = square_grid(config.grid_extent, config.grid_points);
            let points: Vec<Complex64> = axis
                .iter()
                .flat_map(|&y| axis.iter().map(move |&x| Complex64::new(x, y)))
                .collect();
            let mut samples = Vec::new();
            let mut pairs = Vec::new();
            for &z in &points {
                for &w in &points {
                    let k = series.kernel_eval(z, w, config.kernel_tolerance)?;
                    samples.push(KernelSample {
                        z,
                        w,
                        value: k.value,
                        tail_bound: k.truncation_bound,
                    });
                    pairs.push((z, w));
                }
            }
            let report = verify_kernel_bounds(&series, &field, &pairs)?;
            passed = report.violations == 0;
            sink.csv(cmd, |f| export::write_kernel_field_csv(f, &samples))?;
            sink.json(cmd, &report)?;
        }
        Command::BerezinField => {
            let f = config.symbol_function()?;
            let series = series_for(&weight, config.grid_extent * std::f64::consts::SQRT_2 + 4.0, 0)?;
            let axis = square_grid(config.grid_extent, config.grid_points);
            let bfield = BerezinField::on_grid(&series, &f, axis.clone(), axis)?;
            sink.csv(cmd, |out| export::write_berezin_csv(out, &bfield))?;
        }
        Command::Classify => {
            let f = config.symbol_function()?;
            let graph = MetricGraph::new(&field, config.graph_half_width, config.graph_spacing, Connectivity::Sixteen)?;
            let annuli: Vec<(f64, f64)> = config.classify_annuli.iter().map(|a| (a[0], a[1])).collect();
            let report = oscillation_report(&field, &graph, &f, &annuli, config.per_annulus, config.p, config.r)?;
            let diagnostics = classify_symbol(&report)?;
            sink.json(cmd, &json!({ "report": report, "diagnostics": diagnostics }))?;
        }
        Command::Toeplitz => {
            let f = config.symbol_function()?;
            let series = series_for(&weight, 1.0, config.size)?;
            let t = toeplitz_matrix(&series, &f, config.size)?;
            let sigma_min = smallest_singular_value(&t)?;
            let norm = spectral_norm(&t.entries)?;
            sink.csv(cmd, |out| export::write_truncation_csv(out, &t))?;
            sink.json(
                cmd,
                &json!({
                    "symbol": t.symbol,
                    "weight": weight.to_string(),
                    "size": t.size,
                    "first_degree": t.first_degree,
                    "diagonal_only": t.diagonal_only,
                    "complete": t.complete,
                    "sigma_min": sigma_min,
                    "spectral_norm": norm,
                }),
            )?;
        }
        Command::FredholmProbe => {
            let f = config.symbol_function()?;
            let annuli = config.annulus_pairs();
            let outer = annuli.iter().map(|a| a.1).fold(0.0, f64::max);
            let largest = config.sizes.iter().copied().max().unwrap_or(1);
            let series = series_for(&weight, outer + 4.0, largest)?;
            let thresholds = FredholmThresholds {
                c_low: config.c_low,
                stabilization: config.stabilization,
                angular_samples: config.angular_samples,
            };
            let report = fredholm_probe(&series, &f, &config.sizes, &annuli, &thresholds)?;
            sink.json(cmd, &report)?;
        }
        Command::HankelProbe => {
            let graph = MetricGraph::new(&field, config.graph_half_width, config.graph_spacing, Connectivity::Sixteen)?;
            let f = match config.cutoff_radius {
                Some(r) => build_cutoff(graph.clone(), r)?,
                None => config.symbol_function()?,
            };
            let series = series_for(&weight, 6.0, 0)?;
            let family = default_test_family(&series)?;
            let bo_samples = annulus_samples(0.0, 0.8 * config.graph_half_width, 96);
            let probe = hankel_norm_probe(&series, &graph, &f, config.p, &family, &bo_samples)?;
            sink.json(
                cmd,
                &json!({ "symbol": f.name(), "weight": weight.to_string(), "probe": probe }),
            )?;
        }
        Command::VerifyAll => {
            let summary = verify_all(config)?;
            passed = summary.failed == 0;
            sink.json(cmd, &summary)?;
        }
    }
    Ok(Outcome {
        files: sink.files,
        passed,
    })
}

fn read_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| FockError::config("<file>", format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// Entry point of the `fockprobe` binary; returns the process exit code.
///
/// 0 on success, 1 on numerical or domain errors and failed verify-all
/// checks, 2 on configuration errors.
pub fn run<I, T>(args: I, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = write!(stderr, "{e}");
            return code;
        }
    };
    let config = match read_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    let prefix = args.out.unwrap_or_else(|| config.out.clone());
    match execute(&config, &prefix) {
        Ok(outcome) if outcome.passed => EXIT_OK,
        Ok(outcome) => {
            let _ = writeln!(stderr, "{}: checks failed (see {:?})", config.command.name(), outcome.files);
            EXIT_NUMERICAL
        }
        Err(e) if e.is_config_error() => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_NUMERICAL
        }
    }
}
