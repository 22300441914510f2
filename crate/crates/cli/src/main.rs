//! Command-line front end: layout synthesis, resonator frequency planning,
//! CZ fidelity sweeps, and S21 trace analysis.
//!
//! Exit codes: 0 success, 2 validation or I/O error, 3 infeasible
//! allocation, 4 numerical failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use pseudo2d::cz::{
    avg_gate_fidelity, avg_gate_fidelity_haar_mc, channel_tomography, crossing_q, phase_correct,
    q_sweep, write_sweep_csv, DeviceParams, DeviceParamsFile, QuantumChannel, SimError, TWO_PI,
};
use pseudo2d::freq::{allocate, crossing_graph, verify, FreqError, FrequencyPlan};
use pseudo2d::layout::{
    build_grid, fold, resource_estimate, Encoding, LayoutError, PhysicalLayout, SurfaceCodeSpec,
};
use pseudo2d::s21::{
    avg_photon_number, crosstalk_spectrum, dbm_to_watts, fit_resonance, read_trace_csv, FitError,
    PHOTON_NUMBER_CONVENTION,
};
use pseudo2d::svg::emit_svg;

const EXIT_VALIDATION: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "pseudo2d",
    about = "Bi-linear surface-code layout, frequency planning, CZ fidelity, and S21 analysis",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a surface-code layout, print its resource summary, and export
    /// JSON/SVG.
    Layout(LayoutArgs),
    /// Derive the crossing graph of a folded layout and assign resonator
    /// frequencies.
    Freqalloc(FreqAllocArgs),
    /// Sweep CZ-gate infidelity against the resonator quality factor.
    Czsweep(CzSweepArgs),
    /// Fit a notch-resonator S21 trace for quality factors.
    Fitres(FitresArgs),
    /// Compute the crosstalk spectrum of an S21 trace.
    Crosstalk(CrosstalkArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EncodingArg {
    Square,
    Rotated,
}

impl From<EncodingArg> for Encoding {
    fn from(e: EncodingArg) -> Self {
        match e {
            EncodingArg::Square => Encoding::Square,
            EncodingArg::Rotated => Encoding::Rotated,
        }
    }
}

#[derive(Args)]
struct LayoutArgs {
    /// Code distance (odd, >= 3).
    #[arg(long)]
    d: Option<u32>,
    /// Logical qubit count.
    #[arg(long)]
    n: Option<u32>,
    /// Encoding variant.
    #[arg(long, value_enum)]
    encoding: Option<EncodingArg>,
    /// Keep the pre-fold 2D grid instead of the folded bi-linear layout.
    #[arg(long)]
    prefold: bool,
    /// Write the layout as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write an SVG rendering.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// JSON config block overriding defaults (flags win over the file).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct LayoutConfig {
    d: Option<u32>,
    n: Option<u32>,
    encoding: Option<String>,
    prefold: Option<bool>,
}

#[derive(Args)]
struct FreqAllocArgs {
    /// Folded layout JSON produced by `layout`.
    #[arg(long)]
    layout: PathBuf,
    /// Lower band edge in Hz.
    #[arg(long)]
    f_min_hz: Option<f64>,
    /// Upper band edge in Hz.
    #[arg(long)]
    f_max_hz: Option<f64>,
    /// Minimum detuning between crossing resonators in Hz.
    #[arg(long)]
    delta_min_hz: Option<f64>,
    /// Write the plan as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Verify an existing plan instead of allocating.
    #[arg(long)]
    check: Option<PathBuf>,
    /// JSON config block overriding defaults (flags win over the file).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FreqAllocConfig {
    f_min_hz: Option<f64>,
    f_max_hz: Option<f64>,
    delta_min_hz: Option<f64>,
}

#[derive(Args)]
struct CzSweepArgs {
    /// Device parameter JSON (linear Hz); defaults to the reference CZ
    /// operating point.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Comma-separated quality factors; `inf` is allowed.
    #[arg(long, value_delimiter = ',')]
    q: Option<Vec<f64>>,
    /// Gate time override in seconds (skips calibration).
    #[arg(long)]
    t_gate_s: Option<f64>,
    /// Write the sweep as CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the optional Monte-Carlo fidelity cross-check.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Haar samples for the Monte-Carlo cross-check (0 disables it).
    #[arg(long, default_value_t = 0)]
    mc_samples: usize,
    /// JSON config block overriding defaults (flags win over the file).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct CzSweepConfig {
    params: Option<DeviceParamsFile>,
    q: Option<Vec<f64>>,
    t_gate_s: Option<f64>,
}

#[derive(Args)]
struct FitresArgs {
    /// Trace CSV with header `frequency_hz,s21_re,s21_im`.
    #[arg(long)]
    trace: PathBuf,
    /// Applied power in dBm; adds the average photon number to the output.
    #[arg(long, allow_negative_numbers = true)]
    power_dbm: Option<f64>,
    /// Write the fit as JSON (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CrosstalkArgs {
    /// Trace CSV with header `frequency_hz,s21_re,s21_im`.
    #[arg(long)]
    trace: PathBuf,
    /// Write the result as JSON (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }
}

impl From<LayoutError> for CliError {
    fn from(e: LayoutError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<FreqError> for CliError {
    fn from(e: FreqError) -> Self {
        let code = match e {
            FreqError::Infeasible { .. } => EXIT_INFEASIBLE,
            _ => EXIT_VALIDATION,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        let code = match e {
            SimError::Integrator { .. } => EXIT_NUMERICAL,
            _ => EXIT_VALIDATION,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        let code = match e {
            FitError::NoConvergence { .. } => EXIT_NUMERICAL,
            _ => EXIT_VALIDATION,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))
}

fn load_config<T: Default + for<'de> Deserialize<'de>>(
    path: &Option<PathBuf>,
) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => serde_json::from_str(&read_file(p)?)
            .map_err(|e| CliError::validation(format!("bad config {}: {e}", p.display()))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Layout(args) => cmd_layout(args),
        Command::Freqalloc(args) => cmd_freqalloc(args),
        Command::Czsweep(args) => cmd_czsweep(args),
        Command::Fitres(args) => cmd_fitres(args),
        Command::Crosstalk(args) => cmd_crosstalk(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn cmd_layout(args: LayoutArgs) -> Result<(), CliError> {
    let config: LayoutConfig = load_config(&args.config)?;
    let encoding = match args.encoding {
        Some(e) => e.into(),
        None => match config.encoding.as_deref() {
            None | Some("square") | Some("Square") => Encoding::Square,
            Some("rotated") | Some("Rotated") => Encoding::Rotated,
            Some(other) => {
                return Err(CliError::validation(format!("unknown encoding `{other}`")))
            }
        },
    };
    let d = args.d.or(config.d).unwrap_or(3);
    let n = args.n.or(config.n).unwrap_or(1);
    let prefold = args.prefold || config.prefold.unwrap_or(false);

    let spec = SurfaceCodeSpec::new(d, n, encoding)?;
    let summary = resource_estimate(&spec)?;
    let mut layout = build_grid(&spec)?;
    if !prefold {
        layout = fold(&layout)?;
    }
    let max_crossings = layout.resonators.iter().map(|e| e.crossings).max().unwrap_or(0);

    println!("{summary}");
    if !prefold {
        let (r0, r1) = layout.rail_sizes();
        println!("rail sizes                   {r0:>4}/{r1:<4}");
        println!("max crossings found          {max_crossings:>8}");
    }

    if let Some(path) = &args.out {
        let json = serde_json::to_string_pretty(&layout)
            .map_err(|e| CliError::validation(e.to_string()))?;
        write_file(path, &json)?;
        println!("layout written to {}", path.display());
    }
    if let Some(path) = &args.svg {
        write_file(path, &emit_svg(&layout)?)?;
        println!("svg written to {}", path.display());
    }
    Ok(())
}

fn cmd_freqalloc(args: FreqAllocArgs) -> Result<(), CliError> {
    let config: FreqAllocConfig = load_config(&args.config)?;
    let f_min = args.f_min_hz.or(config.f_min_hz).unwrap_or(7.0e9);
    let f_max = args.f_max_hz.or(config.f_max_hz).unwrap_or(10.2e9);
    let delta_min = args.delta_min_hz.or(config.delta_min_hz).unwrap_or(1.0e7);

    let layout: PhysicalLayout = serde_json::from_str(&read_file(&args.layout)?)
        .map_err(|e| CliError::validation(format!("bad layout JSON: {e}")))?;
    let graph = crossing_graph(&layout)?;
    println!(
        "crossing graph: {} resonators, {} crossing pairs, max degree {}",
        graph.nodes.len(),
        graph.edges.len(),
        graph.max_degree()
    );

    if let Some(plan_path) = &args.check {
        let plan: FrequencyPlan = serde_json::from_str(&read_file(plan_path)?)
            .map_err(|e| CliError::validation(format!("bad plan JSON: {e}")))?;
        let violations = verify(&plan, &graph)?;
        println!("{} violations", violations.len());
        for v in &violations {
            println!(
                "  resonators {} and {}: detuning {:.4e} Hz < {:.4e} Hz",
                v.i, v.j, v.detuning_hz, plan.delta_min
            );
        }
        if violations.is_empty() {
            return Ok(());
        }
        return Err(CliError {
            code: EXIT_INFEASIBLE,
            message: format!("{} detuning violations", violations.len()),
        });
    }

    let plan = allocate(&graph, (f_min, f_max), delta_min)?;
    let violations = verify(&plan, &graph)?;
    println!(
        "assigned {} resonators over [{:.4e}, {:.4e}] Hz with delta_min {:.4e} Hz: {} violations",
        plan.assignment.len(),
        f_min,
        f_max,
        delta_min,
        violations.len()
    );
    if let Some(path) = &args.out {
        let json = serde_json::to_string_pretty(&plan)
            .map_err(|e| CliError::validation(e.to_string()))?;
        write_file(path, &json)?;
        println!("plan written to {}", path.display());
    }
    Ok(())
}

fn cmd_czsweep(args: CzSweepArgs) -> Result<(), CliError> {
    let config: CzSweepConfig = load_config(&args.config)?;
    let mut params: DeviceParams = match &args.params {
        Some(path) => {
            let file: DeviceParamsFile = serde_json::from_str(&read_file(path)?)
                .map_err(|e| CliError::validation(format!("bad params JSON: {e}")))?;
            file.into_params()?
        }
        None => match config.params {
            Some(file) => file.into_params()?,
            None => DeviceParams::reference_cz(),
        },
    };
    if let Some(t) = args.t_gate_s.or(config.t_gate_s) {
        params.t_gate = Some(t);
    }
    let qs = args
        .q
        .or(config.q)
        .unwrap_or_else(|| vec![1.0e2, 3.0e2, 1.0e3, 3.0e3, 1.0e4, 1.0e5, 1.0e6]);

    let sweep = q_sweep(&params, &qs)?;
    let mut csv = Vec::new();
    write_sweep_csv(&mut csv, &sweep).map_err(|e| CliError::validation(e.to_string()))?;
    let summary_to_stdout = match &args.out {
        Some(path) => {
            write_file(path, &String::from_utf8_lossy(&csv))?;
            true
        }
        None => {
            std::io::stdout()
                .write_all(&csv)
                .map_err(|e| CliError::validation(e.to_string()))?;
            false
        }
    };
    let report = |line: String| {
        if summary_to_stdout {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    };
    report(format!(
        "g_eff/2pi = {:.4} MHz, t_gate = {:.4} ns, seed = {}",
        sweep.g_eff_rad_s / TWO_PI / 1e6,
        sweep.t_gate_s * 1e9,
        args.seed
    ));
    report(match crossing_q(&sweep.points, 0.0075) {
        Some(q) => format!("corrected infidelity crosses 0.75% at Q = {q:.4e}"),
        None => "corrected infidelity does not cross 0.75% on this grid".into(),
    });

    if args.mc_samples > 0 {
        // Cross-check the closed-form fidelity against Haar sampling at the
        // highest-Q point.
        let q_ref = qs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let point_params = params.clone().with_quality_factor(q_ref);
        let channel = channel_tomography(&point_params, sweep.t_gate_s)?;
        let (corrected, _) = phase_correct(&channel);
        let cz = QuantumChannel::cz();
        let exact = avg_gate_fidelity(&corrected, &cz)?;
        let (mc, se) = avg_gate_fidelity_haar_mc(&corrected, &cz, args.mc_samples, args.seed);
        report(format!(
            "mc check at Q = {q_ref:.1e}: exact F = {exact:.6}, Haar MC = {mc:.6} +- {se:.1e} \
             ({} samples, seed {})",
            args.mc_samples, args.seed
        ));
    }
    Ok(())
}

fn cmd_fitres(args: FitresArgs) -> Result<(), CliError> {
    let file = fs::File::open(&args.trace)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", args.trace.display())))?;
    let trace = read_trace_csv(file, args.power_dbm)?;
    let fit = fit_resonance(&trace)?;
    let mut json = serde_json::to_value(fit).map_err(|e| CliError::validation(e.to_string()))?;
    if let Some(dbm) = args.power_dbm {
        let n = avg_photon_number(&fit, dbm_to_watts(dbm))?;
        let obj = json.as_object_mut().expect("fit serializes to an object");
        obj.insert("avg_photon_number".into(), n.into());
        obj.insert(
            "photon_number_convention".into(),
            PHOTON_NUMBER_CONVENTION.into(),
        );
        obj.insert("applied_power_dbm".into(), dbm.into());
    }
    emit_json(&args.out, &json)
}

fn cmd_crosstalk(args: CrosstalkArgs) -> Result<(), CliError> {
    let file = fs::File::open(&args.trace)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", args.trace.display())))?;
    let trace = read_trace_csv(file, None)?;
    let result = crosstalk_spectrum(&trace)?;
    let json = serde_json::to_value(&result).map_err(|e| CliError::validation(e.to_string()))?;
    emit_json(&args.out, &json)
}

fn emit_json(out: &Option<PathBuf>, json: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(json).map_err(|e| CliError::validation(e.to_string()))?;
    match out {
        Some(path) => {
            write_file(path, &text)?;
            println!("written to {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}
