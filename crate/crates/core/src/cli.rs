//! Command-line front end.
//!
//! Every command is a thin shell over library calls: it loads inputs, runs
//! the matching analysis, and writes the report (plus optional plot CSVs).
//! Exit status is 0 on success, 1 for invalid input or arguments, 2 when a
//! numerical step failed; in the last case the report is still written with
//! per-entry error markers.

use std::ffi::OsString;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::bandsolver::{
    solve_self_consistent_with, sweep_design, BandError, MaterialTable, SolverOptions,
    StackProblem, SweepAxis,
};
use crate::extraction::pipeline::{
    charge_on_transfer_grid, cv_report, device_report, dibl_report, load_device_dir,
    mobility_report, output_report, transfer_report, DeviceData, PipelineOptions, Region,
};
use crate::extraction::report::ExtractionReport;
use crate::extraction::{extract_gm, extract_mobility, integrate_charge_over_gate, DiblMethod, ExtractionError};
use crate::measurement::{ingest_sweep_file, DeviceGeometry, Metadata, SweepFamily};
use crate::numerics::SmoothingSpec;
use crate::synth::{generate_fixture, CompactModelParams, SweepPlan};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "hemtkit", version, about = "HEMT parameter extraction and band simulation")]
pub struct Cli {
    /// Worker threads for batch and sweep work (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// g_m, SS, V_th, ON/OFF and DIBL from a transfer family.
    ExtractTransfer(TransferArgs),
    /// R_ON and knee voltage from an output family.
    ExtractOutput(SweepArgs),
    /// C–V threshold and integrated channel charge.
    ExtractCv(SweepArgs),
    /// Field-effect mobility from a transfer family and a C–V sweep.
    Mobility(MobilityArgs),
    /// Threshold shift per volt of drain bias.
    Dibl(DiblArgs),
    /// Equilibrium band diagram of a layer stack.
    Bandsim(BandArgs),
    /// Synthetic device fixture from the compact model.
    Synth(SynthArgs),
    /// Every extraction for one or more fixture directories.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SmoothingArgs {
    /// Savitzky–Golay window length (odd).
    #[arg(long)]
    pub window: Option<usize>,
    /// Savitzky–Golay polynomial order.
    #[arg(long)]
    pub order: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Report path.
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for plot-data CSVs.
    #[arg(long)]
    pub plots: Option<PathBuf>,
    /// Free-form stamp recorded in the report.
    #[arg(long)]
    pub stamp: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub meta: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegionArg {
    Linear,
    Saturation,
}

#[derive(Debug, Clone, Args)]
pub struct TransferArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,
    #[arg(long, value_enum, default_value_t = RegionArg::Linear)]
    pub region: RegionArg,
    #[arg(long, value_enum, default_value_t = DiblArg::MaxGm)]
    pub dibl_method: DiblArg,
}

#[derive(Debug, Clone, Args)]
pub struct MobilityArgs {
    /// Linear-region transfer family.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub meta: PathBuf,
    /// C–V sweep.
    #[arg(long)]
    pub cv: PathBuf,
    #[arg(long)]
    pub cv_meta: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DiblArg {
    /// Max-g_m tangent intercepts.
    MaxGm,
    /// Constant current of 1 µA·W/L.
    ConstantCurrent,
}

#[derive(Debug, Clone, Args)]
pub struct DiblArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Low drain bias (default: lowest in the file), V.
    #[arg(long)]
    pub low: Option<f64>,
    /// High drain bias (default: highest in the file), V.
    #[arg(long)]
    pub high: Option<f64>,
    #[arg(long, value_enum, default_value_t = DiblArg::MaxGm)]
    pub method: DiblArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    BarrierThickness,
    AlFraction,
    Doping,
}

#[derive(Debug, Clone, Args)]
pub struct BandArgs {
    /// Stack JSON.
    #[arg(long)]
    pub stack: PathBuf,
    /// Profile CSV, or the sweep table with --sweep.
    #[arg(long)]
    pub out: PathBuf,
    /// Summary JSON (default: next to --out with a .summary.json suffix).
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Couple the Schrödinger equation.
    #[arg(long)]
    pub quantum: bool,
    #[arg(long, value_enum, requires = "values")]
    pub sweep: Option<AxisArg>,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',', requires = "sweep")]
    pub values: Vec<f64>,
    #[arg(long)]
    pub plots: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Ground-truth parameter JSON (default: the built-in reference device).
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Sweep plan JSON (default: the reference bias plan).
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "synthetic")]
    pub device_id: String,
    /// Relative multiplicative noise, overriding the parameter file.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Fixture directory; repeat for a batch.
    #[arg(long = "in", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Report file, or a directory of `<dir name>.json` reports for a batch.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub plots: Option<PathBuf>,
    #[arg(long)]
    pub stamp: Option<String>,
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
    #[arg(long, value_enum, default_value_t = DiblArg::MaxGm)]
    pub dibl_method: DiblArg,
}

/// Outcome of a command that did not succeed cleanly.
#[derive(Debug, Clone, PartialEq)]
enum Failure {
    Invalid(String),
    Numerical(String),
}

impl Failure {
    fn invalid(e: impl Display) -> Self {
        Self::Invalid(e.to_string())
    }

    fn code(&self) -> i32 {
        match self {
            Self::Invalid(_) => EXIT_INVALID,
            Self::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Invalid(m) | Self::Numerical(m) => m,
        }
    }
}

impl From<ExtractionError> for Failure {
    fn from(e: ExtractionError) -> Self {
        if e.is_numerical() {
            Self::Numerical(e.to_string())
        } else {
            Self::Invalid(e.to_string())
        }
    }
}

impl From<BandError> for Failure {
    fn from(e: BandError) -> Self {
        if e.is_numerical() {
            Self::Numerical(e.to_string())
        } else {
            Self::Invalid(e.to_string())
        }
    }
}

type Outcome = Result<(), Failure>;

/// Parses `args` (program name first), runs the command and returns the exit
/// status. Diagnostics go to stderr.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    run(&cli)
}

pub fn run(cli: &Cli) -> i32 {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        pool = pool.num_threads(n.max(1));
    }
    let result = match pool.build() {
        Ok(pool) => pool.install(|| dispatch(&cli.command)),
        Err(e) => Err(Failure::invalid(e)),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("hemtkit: {}", f.message());
            f.code()
        }
    }
}

fn dispatch(command: &Command) -> Outcome {
    match command {
        Command::ExtractTransfer(a) => extract_transfer(a),
        Command::ExtractOutput(a) => extract_output(a),
        Command::ExtractCv(a) => extract_cv(a),
        Command::Mobility(a) => mobility(a),
        Command::Dibl(a) => dibl(a),
        Command::Bandsim(a) => bandsim(a),
        Command::Synth(a) => synth(a),
        Command::Report(a) => report(a),
    }
}

fn smoothing(a: &SmoothingArgs) -> Result<SmoothingSpec, Failure> {
    let d = SmoothingSpec::default();
    SmoothingSpec::new(a.window.unwrap_or(d.window()), a.order.unwrap_or(d.poly_order()))
        .map_err(Failure::invalid)
}

fn dibl_method(arg: DiblArg, geometry: &DeviceGeometry) -> DiblMethod {
    match arg {
        DiblArg::MaxGm => DiblMethod::MaxGmExtrapolation,
        DiblArg::ConstantCurrent => DiblMethod::constant_current_for(geometry),
    }
}

fn load(input: &Path, meta: &Path) -> Result<(Metadata, SweepFamily), Failure> {
    let meta = Metadata::from_path(meta).map_err(Failure::invalid)?;
    let family = ingest_sweep_file(input, &meta).map_err(Failure::invalid)?;
    Ok((meta, family))
}

fn write_file(path: &Path, contents: &[u8]) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::invalid(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

/// Writes the report; failed entries turn into a numerical-failure status.
fn finish(mut report: ExtractionReport, out: &OutputArgs) -> Outcome {
    report.stamp = out.stamp.clone();
    write_file(&out.out, report.to_json().as_bytes())?;
    check_failures(&report)
}

fn check_failures(report: &ExtractionReport) -> Outcome {
    let failed: Vec<String> = report
        .failures()
        .map(|e| {
            let conds: Vec<String> = e.conditions.iter().map(|(k, v)| format!("{k}={v}")).collect();
            format!("{} [{}]: {}", e.name, conds.join(", "), e.error.as_deref().unwrap_or(""))
        })
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numerical(format!(
            "{} extraction(s) failed for {}:\n  {}",
            failed.len(),
            report.device_id,
            failed.join("\n  ")
        )))
    }
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Vec<u8> {
    let mut out = header.join(",").into_bytes();
    out.push(b'\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.extend_from_slice(cells.join(",").as_bytes());
        out.push(b'\n');
    }
    out
}

fn transfer_plots(family: &SweepFamily, spec: SmoothingSpec, dir: &Path) -> Outcome {
    let mut gm_rows = Vec::new();
    let mut log_rows = Vec::new();
    for c in family.curves() {
        let vds = c.fixed_bias();
        if let Ok(g) = extract_gm(c, spec) {
            for ((v, i), gm) in c.x().iter().zip(c.y()).zip(&g.gm) {
                gm_rows.push(vec![vds, *v, *i, *gm]);
            }
        }
        for (v, i) in c.x().iter().zip(c.y()) {
            if *i != 0.0 {
                log_rows.push(vec![vds, *v, i.abs().log10()]);
            }
        }
    }
    write_file(&dir.join("gm.csv"), &csv_table(&["vds_V", "vgs_V", "id_A", "gm_S"], gm_rows))?;
    write_file(&dir.join("log_id.csv"), &csv_table(&["vds_V", "vgs_V", "log10_id_A"], log_rows))
}

fn charge_plot(cv: &SweepFamily, geometry: &DeviceGeometry, dir: &Path) -> Outcome {
    let Some(curve) = cv.curves().first() else {
        return Ok(());
    };
    let Ok(q) = integrate_charge_over_gate(curve, geometry) else {
        return Ok(());
    };
    let rows = q.vgs.iter().zip(&q.charge).map(|(v, c)| vec![*v, *c]);
    write_file(&dir.join("charge.csv"), &csv_table(&["vgs_V", "charge_C_cm2"], rows))
}

fn mobility_plot(transfer: &SweepFamily, cv: &SweepFamily, geometry: &DeviceGeometry, dir: &Path) -> Outcome {
    let Ok(charge) = charge_on_transfer_grid(transfer, cv, geometry) else {
        return Ok(());
    };
    let mut rows = Vec::new();
    for c in transfer.curves() {
        if let Ok(m) = extract_mobility(c, &charge, geometry) {
            rows.extend(m.vgs.iter().zip(&m.mobility).map(|(v, mu)| vec![m.vds, *v, *mu]));
        }
    }
    write_file(&dir.join("mobility.csv"), &csv_table(&["vds_V", "vgs_V", "mobility_cm2_Vs"], rows))
}

fn extract_transfer(a: &TransferArgs) -> Outcome {
    let spec = smoothing(&a.sweep.smoothing)?;
    let (meta, family) = load(&a.sweep.input, &a.sweep.meta)?;
    let geometry = meta.geometry().map_err(Failure::invalid)?;
    let opts = PipelineOptions {
        smoothing: spec,
        dibl: dibl_method(a.dibl_method, &geometry),
    };
    let region = match a.region {
        RegionArg::Linear => Region::Linear,
        RegionArg::Saturation => Region::Saturation,
    };
    let report = transfer_report(&family, region, &opts, &meta.device_id)?;
    if let Some(dir) = &a.sweep.output.plots {
        transfer_plots(&family, spec, dir)?;
    }
    finish(report, &a.sweep.output)
}

fn extract_output(a: &SweepArgs) -> Outcome {
    let spec = smoothing(&a.smoothing)?;
    let (meta, family) = load(&a.input, &a.meta)?;
    let geometry = meta.geometry().map_err(Failure::invalid)?;
    let opts = PipelineOptions {
        smoothing: spec,
        ..PipelineOptions::default()
    };
    let report = output_report(&family, &geometry, &opts, &meta.device_id)?;
    finish(report, &a.output)
}

fn extract_cv(a: &SweepArgs) -> Outcome {
    let spec = smoothing(&a.smoothing)?;
    let (meta, family) = load(&a.input, &a.meta)?;
    let geometry = meta.geometry().map_err(Failure::invalid)?;
    let opts = PipelineOptions {
        smoothing: spec,
        ..PipelineOptions::default()
    };
    let report = cv_report(&family, &geometry, &opts, &meta.device_id)?;
    if let Some(dir) = &a.output.plots {
        charge_plot(&family, &geometry, dir)?;
    }
    finish(report, &a.output)
}

fn mobility(a: &MobilityArgs) -> Outcome {
    let (meta, transfer) = load(&a.input, &a.meta)?;
    let (_, cv) = load(&a.cv, &a.cv_meta)?;
    let geometry = meta.geometry().map_err(Failure::invalid)?;
    let report = mobility_report(&transfer, &cv, &geometry, &meta.device_id)?;
    if let Some(dir) = &a.output.plots {
        charge_plot(&cv, &geometry, dir)?;
        mobility_plot(&transfer, &cv, &geometry, dir)?;
    }
    finish(report, &a.output)
}

fn dibl(a: &DiblArgs) -> Outcome {
    let spec = smoothing(&a.sweep.smoothing)?;
    let (meta, family) = load(&a.sweep.input, &a.sweep.meta)?;
    let geometry = meta.geometry().map_err(Failure::invalid)?;
    let biases = family.fixed_biases();
    let low = a.low.unwrap_or(biases[0]);
    let high = a.high.unwrap_or(biases[biases.len() - 1]);
    let opts = PipelineOptions {
        smoothing: spec,
        dibl: dibl_method(a.method, &geometry),
    };
    let report = dibl_report(&family, low, high, &opts, &meta.device_id)?;
    finish(report, &a.sweep.output)
}

fn bandsim(a: &BandArgs) -> Outcome {
    let problem = StackProblem::from_path(&a.stack)?;
    let table = MaterialTable::load()?;
    let opts = SolverOptions::default();
    if let Some(axis) = a.sweep {
        let axis = match axis {
            AxisArg::BarrierThickness => SweepAxis::BarrierThickness,
            AxisArg::AlFraction => SweepAxis::AlFraction,
            AxisArg::Doping => SweepAxis::Doping,
        };
        let points = sweep_design(&problem, axis, &a.values, a.quantum, &table, &opts)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Failure::invalid(e);
        w.write_record(["value", "ns_cm2", "converged", "error"]).map_err(io)?;
        for p in &points {
            w.write_record([
                format!("{:?}", p.value),
                p.sheet_density.map(|n| format!("{n:?}")).unwrap_or_default(),
                p.converged.to_string(),
                p.error.clone().unwrap_or_default(),
            ])
            .map_err(io)?;
        }
        let body = w.into_inner().map_err(Failure::invalid)?;
        write_file(&a.out, &body)?;
        let failed: Vec<String> = points
            .iter()
            .filter_map(|p| p.error.as_ref().map(|e| format!("value {}: {e}", p.value)))
            .collect();
        return if failed.is_empty() {
            Ok(())
        } else {
            Err(Failure::Numerical(failed.join("\n  ")))
        };
    }

    let solution = solve_self_consistent_with(&problem, a.quantum, &table, &opts)?;
    let mut profile = Vec::new();
    solution.write_profile_csv(&mut profile)?;
    write_file(&a.out, &profile)?;
    let summary = a.summary.clone().unwrap_or_else(|| summary_path(&a.out));
    write_file(&summary, solution.summary_json().as_bytes())?;
    if let Some(dir) = &a.plots {
        let rows = solution.z.iter().zip(&solution.ec).map(|(z, e)| vec![*z, *e]);
        write_file(&dir.join("ec.csv"), &csv_table(&["z_nm", "ec_eV"], rows))?;
    }
    match solution.require_converged() {
        Ok(_) => Ok(()),
        Err(e) => Err(e.into()),
    }
}

/// `band.csv` → `band.summary.json`.
pub fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn synth(a: &SynthArgs) -> Outcome {
    let mut params = match &a.params {
        Some(p) => read_json::<CompactModelParams>(p)?,
        None => CompactModelParams::reference_device(),
    };
    if let Some(n) = a.noise {
        params.noise_amplitude = n;
    }
    if let Some(s) = a.seed {
        params.seed = s;
    }
    let plan = match &a.plan {
        Some(p) => read_json::<SweepPlan>(p)?,
        None => SweepPlan::reference(),
    };
    generate_fixture(&params, &plan, &a.out, &a.device_id).map_err(Failure::invalid)?;
    Ok(())
}

fn device_plots(data: &DeviceData, spec: SmoothingSpec, dir: &Path) -> Outcome {
    if let Some(f) = &data.linear {
        transfer_plots(f, spec, dir)?;
    }
    if let Some(cv) = &data.cv {
        charge_plot(cv, &data.geometry, dir)?;
        if let Some(f) = &data.linear {
            mobility_plot(f, cv, &data.geometry, dir)?;
        }
    }
    Ok(())
}

fn one_report(dir: &Path, a: &ReportArgs, out: &Path, plots: Option<PathBuf>) -> Outcome {
    let spec = smoothing(&a.smoothing)?;
    let data = load_device_dir(dir).map_err(Failure::invalid)?;
    let opts = PipelineOptions {
        smoothing: spec,
        dibl: dibl_method(a.dibl_method, &data.geometry),
    };
    let mut report = device_report(&data, &opts)?;
    report.stamp = a.stamp.clone();
    if let Some(p) = plots {
        device_plots(&data, spec, &p)?;
    }
    write_file(out, report.to_json().as_bytes())?;
    check_failures(&report)
}

fn report(a: &ReportArgs) -> Outcome {
    if let [dir] = a.inputs.as_slice() {
        return one_report(dir, a, &a.out, a.plots.clone());
    }
    let names: Vec<String> = a
        .inputs
        .iter()
        .map(|d| {
            d.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "device".into())
        })
        .collect();
    let mut seen = std::collections::BTreeSet::new();
    if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
        return Err(Failure::Invalid(format!("two inputs share the directory name {dup}")));
    }
    let results: Vec<Outcome> = a
        .inputs
        .par_iter()
        .zip(&names)
        .map(|(dir, name)| {
            let out = a.out.join(format!("{name}.json"));
            one_report(dir, a, &out, a.plots.as_ref().map(|p| p.join(name)))
        })
        .collect();
    // Worst status wins; messages keep input order.
    let mut worst: Option<Failure> = None;
    for (r, name) in results.into_iter().zip(&names) {
        if let Err(f) = r {
            let _ = writeln!(std::io::stderr(), "hemtkit: {name}: {}", f.message());
            if worst.as_ref().is_none_or(|w| f.code() < w.code()) {
                worst = Some(f);
            }
        }
    }
    match worst {
        None => Ok(()),
        Some(f) => Err(match f {
            Failure::Invalid(_) => Failure::Invalid("batch had invalid inputs".into()),
            Failure::Numerical(_) => Failure::Numerical("batch had failed extractions".into()),
        }),
    }
}
