//! `am` — analyzer, filter designer, and Monte Carlo simulator for
//! modulo-lattice joint source-channel coding over colored Gaussian
//! channels.
//!
//! Subcommands:
//! * `analyze`    — entropy powers, prediction gains, water-filling, and
//!   the R(D) = C optimum for the configured system (JSON).
//! * `design`     — write the complete filter set as JSON.
//! * `simulate`   — end-to-end Monte Carlo, one CSV row per (SNR, seed),
//!   plus a JSON summary.
//! * `robustness` — closed-form unknown-SNR curves; `--compare` emits all
//!   curve families.
//!
//! Exit codes: 0 success, 2 configuration error, 3 analysis/solver error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use analog_matching::filters::{design_matching, design_zero_forcing, MatchingFilterSet};
use analog_matching::robustness::{
    build_curve, distortion_slope, log_snr_grid, CurveScheme, RobustnessCurve,
};
use analog_matching::sim::{run_with_filters, SimReport, SweepRow};
use analog_matching::spectra::{opta, reverse_waterfill, shannon_bounds, waterfill};

use config::{ExperimentConfig, ModeSection};

#[derive(Parser)]
#[command(name = "am", version, about = "Analog matching of colored sources to colored channels")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic summary of the configured system
    Analyze(CommonArgs),
    /// Design the filter set and write it to <out>/filters.json
    Design(CommonArgs),
    /// Monte Carlo simulation; sweeps over [sweep].snr_db when present
    Simulate(SimulateArgs),
    /// Unknown-SNR closed-form curves and slope estimates
    Robustness(RobustnessArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the configured master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (falls back to AM_THREADS, then all cores)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Reuse a previously designed filter set instead of redesigning
    #[arg(long)]
    filters: Option<PathBuf>,
    /// Also dump one block's raw tap sequences (little-endian f64 arrays
    /// plus a JSON sidecar describing the shapes) into the output directory
    #[arg(long)]
    dump_taps: bool,
}

#[derive(Args)]
struct RobustnessArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Emit every curve family (fixed-encoder, reported, outer bound,
    /// high-SNR limit) instead of the fixed-encoder curve alone
    #[arg(long)]
    compare: bool,
}

enum CliError {
    Config(String),
    Run(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 3,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Run(m) => m,
        }
    }
}

fn run_err(e: impl std::fmt::Display) -> CliError {
    CliError::Run(e.to_string())
}

/// Every emitted JSON document carries the resolved configuration and the
/// library version.
#[derive(Serialize)]
struct Provenance<'a, T: Serialize> {
    version: &'static str,
    config: &'a ExperimentConfig,
    results: T,
}

fn write_json<T: Serialize>(
    path: &Path,
    cfg: &ExperimentConfig,
    results: T,
) -> Result<String, CliError> {
    let doc = Provenance {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        results,
    };
    let text = serde_json::to_string_pretty(&doc).map_err(run_err)?;
    std::fs::write(path, &text).map_err(run_err)?;
    Ok(text)
}

fn provenance_comment(cfg: &ExperimentConfig) -> String {
    format!(
        "# version={} config={}\n",
        env!("CARGO_PKG_VERSION"),
        serde_json::to_string(cfg).unwrap_or_default()
    )
}

fn load(common: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| CliError::Config(format!("{}: {e}", common.config.display())))?;
    let cfg = ExperimentConfig::parse(&text).map_err(CliError::Config)?;
    let threads = common
        .threads
        .or_else(|| std::env::var("AM_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        // Ignore the error if a global pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    std::fs::create_dir_all(&common.out)
        .map_err(|e| CliError::Run(format!("{}: {e}", common.out.display())))?;
    Ok(cfg)
}

#[derive(Serialize)]
struct Analysis {
    rho: f64,
    snr: f64,
    snr_db: f64,
    source_variance: f64,
    noise_power: f64,
    source_entropy_power: f64,
    noise_entropy_power: f64,
    gamma_source: f64,
    gamma_noise: f64,
    capacity_nats: f64,
    capacity_bits: f64,
    theta_c: f64,
    theta_s: f64,
    d_opt: f64,
    sdr_opt: f64,
    sdr_opt_db: f64,
    slb_nats: f64,
    sub_nats: f64,
}

fn analyze(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = load(args)?;
    let spec = cfg.system().map_err(CliError::Config)?;
    let wf = waterfill(&spec.noise, spec.power).map_err(run_err)?;
    let o = opta(&spec).map_err(run_err)?;
    let rw = reverse_waterfill(&spec.source, o.distortion).map_err(run_err)?;
    let (slb, sub) = shannon_bounds(&spec).map_err(run_err)?;
    let results = Analysis {
        rho: spec.rho(),
        snr: spec.snr(),
        snr_db: 10.0 * spec.snr().log10(),
        source_variance: spec.source_variance(),
        noise_power: spec.noise_power(),
        source_entropy_power: spec.source.entropy_power().map_err(run_err)?,
        noise_entropy_power: spec.noise.entropy_power().map_err(run_err)?,
        gamma_source: spec.source.prediction_gain().map_err(run_err)?,
        gamma_noise: spec.noise.prediction_gain().map_err(run_err)?,
        capacity_nats: o.capacity,
        capacity_bits: o.capacity / std::f64::consts::LN_2,
        theta_c: wf.water_level,
        theta_s: rw.water_level,
        d_opt: o.distortion,
        sdr_opt: o.sdr,
        sdr_opt_db: 10.0 * o.sdr.log10(),
        slb_nats: slb,
        sub_nats: sub,
    };
    let text = write_json(&args.out.join("analysis.json"), &cfg, results)?;
    println!("{text}");
    Ok(())
}

fn design_set(cfg: &ExperimentConfig) -> Result<MatchingFilterSet, CliError> {
    let spec = cfg.system().map_err(CliError::Config)?;
    let params = cfg.design_params();
    let fs = match cfg.mode {
        ModeSection::ZeroForcing => design_zero_forcing(&spec, &params),
        _ => design_matching(&spec, &params),
    }
    .map_err(run_err)?;
    Ok(fs)
}

fn design(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = load(args)?;
    let fs = design_set(&cfg)?;
    let path = args.out.join("filters.json");
    write_json(&path, &cfg, &fs)?;
    println!(
        "filter set written to {} (predictors: {} + {} taps, pre/post: {} + {} taps)",
        path.display(),
        fs.p_s.len(),
        fs.p_c.len(),
        fs.f1.len(),
        fs.g1.len()
    );
    Ok(())
}

const SWEEP_HEADER: &str = "snr_db,seed,theory_sdr_db,empirical_sdr_db,conditioned_sdr_db,gap_db,gap_db_conditioned,power,failure_rate,failure_rate_actual,samples";

// The CSV carries only seed-deterministic columns; wall-clock runtimes live
// in the JSON summary.
fn sweep_csv_row(snr_db: f64, seed: u64, r: &SimReport) -> String {
    format!(
        "{snr_db},{seed},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6e},{:.6e},{}",
        10.0 * r.theory_sdr.log10(),
        10.0 * r.empirical_sdr.log10(),
        10.0 * r.empirical_sdr_conditioned.log10(),
        r.gap_db,
        r.gap_db_conditioned,
        r.empirical_power,
        r.failure_rate,
        r.failure_rate_actual,
        r.samples
    )
}

fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let cfg = load(&args.common)?;
    let opts = cfg.sim_options(args.common.seed);
    let spec = cfg.system().map_err(CliError::Config)?;

    let fs = match &args.filters {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let doc: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("filters: {e}")))?;
            let results = doc
                .get("results")
                .ok_or_else(|| CliError::Config("filters file lacks results".into()))?;
            serde_json::from_value::<MatchingFilterSet>(results.clone())
                .map_err(|e| CliError::Config(format!("filters: {e}")))?
        }
        None => design_set(&cfg)?,
    };

    let seed = args.common.seed.unwrap_or(cfg.stream.seed);
    let mut rows: Vec<SweepRow> = Vec::new();
    match &cfg.sweep {
        Some(sw) => {
            let n_total = spec.noise.integral();
            for &snr_db in &sw.snr_db {
                let snr = 10f64.powf(snr_db / 10.0);
                let scaled = analog_matching::spectra::SystemSpec::new(
                    spec.source.clone(),
                    spec.noise.clone(),
                    snr * n_total,
                )
                .map_err(run_err)?;
                // Redesign at each sweep point; the supplied filter set (if
                // any) applies only to the configured operating point.
                let report = if (snr * n_total - spec.power).abs() < 1e-12 * spec.power {
                    run_with_filters(&scaled, &fs, &opts).map_err(run_err)?
                } else {
                    analog_matching::sim::run_end_to_end(&scaled, &opts).map_err(run_err)?
                };
                rows.push(SweepRow { snr_db, report });
            }
        }
        None => {
            let report = run_with_filters(&spec, &fs, &opts).map_err(run_err)?;
            rows.push(SweepRow {
                snr_db: 10.0 * spec.snr().log10(),
                report,
            });
        }
    }

    let mut csv = provenance_comment(&cfg);
    csv.push_str(SWEEP_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(&sweep_csv_row(row.snr_db, seed, &row.report));
        csv.push('\n');
    }
    let csv_path = args.common.out.join("sweep.csv");
    std::fs::write(&csv_path, &csv).map_err(run_err)?;
    write_json(&args.common.out.join("summary.json"), &cfg, &rows)?;

    if args.dump_taps {
        let dump =
            analog_matching::sim::dump_taps(&spec, &opts, 0).map_err(run_err)?;
        let write_bin = |name: &str, data: &[f64]| -> Result<(), CliError> {
            let mut bytes = Vec::with_capacity(8 * data.len());
            for v in data {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            std::fs::write(args.common.out.join(name), bytes).map_err(run_err)
        };
        write_bin("taps_t.bin", &dump.t)?;
        write_bin("taps_z_eq.bin", &dump.z_eq)?;
        write_bin("taps_z_prime.bin", &dump.z_prime)?;
        let sidecar = serde_json::json!({
            "format": "f64-le",
            "order": "column-major",
            "shape": {"columns": dump.columns, "rows": dump.rows},
            "fields": {
                "taps_t.bin": "decoder modulo input (forced-correct path)",
                "taps_z_eq.bin": "equivalent additive noise",
                "taps_z_prime.bin": "whitened forward-channel noise",
            },
        });
        std::fs::write(
            args.common.out.join("taps.json"),
            serde_json::to_string_pretty(&sidecar).map_err(run_err)?,
        )
        .map_err(run_err)?;
    }
    for row in &rows {
        println!(
            "snr {:6.2} dB: theory {:6.2} dB, conditioned {:6.2} dB (gap {:5.2} dB), failures {:.2e}",
            row.snr_db,
            10.0 * row.report.theory_sdr.log10(),
            10.0 * row.report.empirical_sdr_conditioned.log10(),
            row.report.gap_db_conditioned,
            row.report.failure_rate,
        );
    }
    println!("wrote {}", csv_path.display());
    Ok(())
}

#[derive(Serialize)]
struct CurveOut {
    scheme: CurveScheme,
    curve: RobustnessCurve,
    slope: Option<f64>,
}

fn robustness(args: &RobustnessArgs) -> Result<(), CliError> {
    let cfg = load(&args.common)?;
    let section = cfg
        .robustness
        .clone()
        .ok_or_else(|| CliError::Config("missing [robustness] section".into()))?;
    let snr0 = 10f64.powf(section.snr0_db / 10.0);
    let snrs = log_snr_grid(
        snr0,
        snr0 * 10f64.powf(section.decades),
        section.points_per_decade,
    );
    let mut schemes = vec![CurveScheme::Am];
    if args.compare {
        schemes.push(CurveScheme::ReportedHda);
        if section.rho > 1.0 {
            schemes.push(CurveScheme::OuterBound);
        }
        schemes.push(CurveScheme::HighSnrLimit);
        schemes.push(CurveScheme::Opta);
    }

    let mut curves = Vec::new();
    for scheme in schemes {
        let mut curve = build_curve(scheme, section.rho, snr0, &snrs).map_err(run_err)?;
        if let (CurveScheme::HighSnrLimit, Some((gs, gc))) = (scheme, section.gains) {
            for v in &mut curve.sdr_points {
                *v *= gs * gc;
            }
        }
        let slope = distortion_slope(&curve).ok();
        curves.push(CurveOut { scheme, curve, slope });
    }

    let mut csv = provenance_comment(&cfg);
    csv.push_str("scheme,rho,snr0_db,snr_db,sdr_db\n");
    for c in &curves {
        let name = serde_json::to_string(&c.scheme).unwrap();
        let name = name.trim_matches('"');
        for (s, d) in c.curve.snr_points.iter().zip(&c.curve.sdr_points) {
            csv.push_str(&format!(
                "{name},{},{},{:.6},{:.6}\n",
                section.rho,
                section.snr0_db,
                10.0 * s.log10(),
                10.0 * d.log10()
            ));
        }
    }
    let csv_path = args.common.out.join("curves.csv");
    std::fs::write(&csv_path, &csv).map_err(run_err)?;
    write_json(&args.common.out.join("curves.json"), &cfg, &curves)?;
    for c in &curves {
        println!(
            "{:?}: {} points, high-SNR slope {}",
            c.scheme,
            c.curve.snr_points.len(),
            c.slope.map_or("n/a".into(), |s| format!("{s:.3}")),
        );
    }
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Command::Analyze(a) => analyze(a),
        Command::Design(a) => design(a),
        Command::Simulate(a) => simulate(a),
        Command::Robustness(a) => robustness(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
