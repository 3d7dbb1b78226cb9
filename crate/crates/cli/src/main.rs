//! `pacer` — fit a rider's fatigue/recovery model from lab traces, compute a
//! minimum-time pacing plan over a course, and run closed-loop ride
//! simulations against the saved lookup tables.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use pacer_core::config::load_rider_config;
use pacer_core::course::{load_course_file, write_profile_csv};
use pacer_core::fitting::{
    fit_cp_awc, fit_max_power_curve, fit_recovery_protocol, load_interval_manifest,
    read_trace_csv, FitDiagnostics,
};
use pacer_core::sil::{
    read_ridelog_csv, simulate_hold_power, simulate_ride, write_ridelog_csv, RiderBehavior,
};
use pacer_core::solver::{
    extract_plan, read_plan_csv, solve_backward, write_plan_csv, SolverConfig,
};
use pacer_core::tables::{export_tables, import_tables};
use pacer_core::Error;

mod plot;

const EXIT_INPUT: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;
const EXIT_FINGERPRINT: u8 = 5;

#[derive(Parser)]
#[command(
    name = "pacer",
    version,
    about = "Time-trial pacing: model fitting, DP planning, and SIL simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit CP and AWC from a 3-min all-out trace CSV
    FitCp {
        /// Trace CSV with header time_s,power_w[,smo2_pct]
        trace: PathBuf,
        /// Where to write the rider fragment JSON
        #[arg(long, default_value = "rider_fragment.json")]
        out: PathBuf,
    },
    /// Fit the recovery line from an interval-test manifest JSON
    FitRecovery {
        /// Manifest JSON listing segment CSVs, recovery powers and durations
        manifest: PathBuf,
    },
    /// Fit the quadratic max-power curve from a 3-min all-out trace CSV
    FitMaxpower {
        /// Trace CSV with header time_s,power_w[,smo2_pct]
        trace: PathBuf,
        /// Critical power (W)
        #[arg(long)]
        cp: f64,
        /// Anaerobic work capacity (J)
        #[arg(long)]
        awc: f64,
    },
    /// Solve the minimum-time plan for a course
    Plan {
        /// Course file: .gpx or CSV with header distance_m,elevation_m
        #[arg(long)]
        course: PathBuf,
        /// Rider config JSON
        #[arg(long)]
        rider: PathBuf,
        /// Drop the aerodynamic drag term (stationary trainer)
        #[arg(long)]
        lab_mode: bool,
        /// Distance interval (m)
        #[arg(long, default_value_t = 100.0)]
        dx: f64,
        /// Velocity nodes
        #[arg(long, default_value_t = 32)]
        nv: usize,
        /// Energy nodes
        #[arg(long, default_value_t = 100)]
        nw: usize,
        /// Velocity ceiling (m/s); defaults to the rider config value
        #[arg(long)]
        vmax: Option<f64>,
        /// Moving-average window (points) for noisy elevation
        #[arg(long, default_value_t = 1)]
        smooth: usize,
        /// Output directory
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Print the detailed solve summary
        #[arg(long)]
        summary: bool,
    },
    /// Simulate a closed-loop ride against saved tables
    Simulate {
        /// Tables binary produced by `plan`
        #[arg(long)]
        tables: PathBuf,
        /// Rider config JSON
        #[arg(long)]
        rider: PathBuf,
        /// Course file: .gpx or CSV
        #[arg(long)]
        course: PathBuf,
        /// Rider power noise standard deviation (W)
        #[arg(long, default_value_t = 0.0)]
        noise_sd: f64,
        /// PRNG seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Constant rider power bias (W)
        #[arg(long, default_value_t = 0.0)]
        bias: f64,
        /// Noise response lag time constant (s)
        #[arg(long, default_value_t = 0.0)]
        lag: f64,
        /// Ignore recommendations and hold this power instead (baseline)
        #[arg(long)]
        hold_power: Option<f64>,
        /// Output directory
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Render a plan (and optional recorded ride) as an SVG figure
    ExportPlot {
        /// Plan CSV produced by `plan`
        #[arg(long)]
        plan: PathBuf,
        /// Ride log CSV to overlay
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Output SVG path
        #[arg(long, default_value = "plan.svg")]
        out: PathBuf,
    },
}

/// Resolved invocation: inputs checked to exist, output directory writable.
struct RunManifest {
    subcommand: &'static str,
    inputs: Vec<PathBuf>,
    out_dir: Option<PathBuf>,
    tool_version: &'static str,
}

impl RunManifest {
    fn new(subcommand: &'static str, inputs: Vec<PathBuf>, out_dir: Option<PathBuf>) -> Self {
        RunManifest {
            subcommand,
            inputs,
            out_dir,
            tool_version: env!("CARGO_PKG_VERSION"),
        }
    }

    fn validate(&self) -> Result<(), Error> {
        for input in &self.inputs {
            if !input.is_file() {
                return Err(Error::Parse {
                    path: input.display().to_string(),
                    detail: "file does not exist".into(),
                });
            }
        }
        if let Some(dir) = &self.out_dir {
            std::fs::create_dir_all(dir)?;
        }
        Ok(())
    }

    fn describe(&self) -> String {
        let inputs: Vec<String> = self.inputs.iter().map(|p| p.display().to_string()).collect();
        format!(
            "{} v{} inputs=[{}] out={}",
            self.subcommand,
            self.tool_version,
            inputs.join(", "),
            self.out_dir
                .as_ref()
                .map(|d| d.display().to_string())
                .unwrap_or_else(|| "-".into())
        )
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Infeasible(_) => EXIT_INFEASIBLE,
        Error::FingerprintMismatch(_) => EXIT_FINGERPRINT,
        _ => EXIT_INPUT,
    }
}

fn configure_threads() {
    if let Ok(raw) = std::env::var("PACER_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn print_diagnostics(diag: &FitDiagnostics) {
    println!("residual_rms: {:.6}", diag.residual_rms);
    println!("r_squared: {:.6}", diag.r_squared);
    println!("n_points: {}", diag.n_points);
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::FitCp { trace, out } => {
            let manifest = RunManifest::new("fit-cp", vec![trace.clone()], None);
            manifest.validate()?;
            let power_trace = read_trace_csv(&trace)?;
            let (cp, awc) = fit_cp_awc(&power_trace)?;
            println!("cp_w: {cp}");
            println!("awc_j: {awc}");
            let fragment = serde_json::json!({ "cp_w": cp, "awc_j": awc });
            std::fs::write(&out, serde_json::to_string_pretty(&fragment).unwrap())?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::FitRecovery { manifest } => {
            let run_manifest = RunManifest::new("fit-recovery", vec![manifest.clone()], None);
            run_manifest.validate()?;
            let (cp, awc, records) = load_interval_manifest(&manifest)?;
            let fit = fit_recovery_protocol(&records, cp, awc)?;
            println!("a: {}", fit.a);
            println!("b: {}", fit.b);
            print_diagnostics(&fit.diagnostics);
            let excluded = fit.points.iter().filter(|p| p.excluded).count();
            if excluded > 0 {
                println!(
                    "excluded_points: {excluded} (negative recovered energy, kept out of the fit)"
                );
            }
            Ok(())
        }
        Command::FitMaxpower { trace, cp, awc } => {
            let manifest = RunManifest::new("fit-maxpower", vec![trace.clone()], None);
            manifest.validate()?;
            let power_trace = read_trace_csv(&trace)?;
            let (a1, a2, diag) = fit_max_power_curve(&power_trace, cp, awc)?;
            println!("a1: {a1}");
            println!("a2: {a2}");
            print_diagnostics(&diag);
            Ok(())
        }
        Command::Plan {
            course,
            rider,
            lab_mode,
            dx,
            nv,
            nw,
            vmax,
            smooth,
            out_dir,
            summary,
        } => {
            let manifest = RunManifest::new(
                "plan",
                vec![course.clone(), rider.clone()],
                Some(out_dir.clone()),
            );
            manifest.validate()?;
            let (model, mut prm) = load_rider_config(&rider)?;
            if lab_mode {
                prm.lab_mode = true;
            }
            let mut cfg = SolverConfig::for_model(&model);
            cfg.dx = dx;
            cfg.n_v = nv;
            cfg.n_w = nw;
            if let Some(v) = vmax {
                cfg.v_max = v;
            }
            let profile = load_course_file(&course, dx, smooth)?;

            let start = Instant::now();
            let tables = solve_backward(&profile, &model, &prm, &cfg)?;
            let solve_seconds = start.elapsed().as_secs_f64();
            let plan = extract_plan(&tables, &profile, &model, &prm)?;

            let plan_path = out_dir.join("plan.csv");
            let tables_path = out_dir.join("tables.bin");
            let profile_path = out_dir.join("profile.csv");
            write_plan_csv(&plan_path, &plan)?;
            export_tables(&tables, &tables_path)?;
            write_profile_csv(&profile_path, &profile)?;

            println!("total_time_s: {:.3}", plan.total_time);
            if summary {
                println!("run: {}", manifest.describe());
                println!(
                    "course: {} intervals x {} m ({} m total)",
                    profile.n_intervals(),
                    cfg.dx,
                    profile.total_length()
                );
                println!(
                    "grid: {} velocity x {} energy nodes, v in [{}, {}] m/s",
                    cfg.n_v, cfg.n_w, cfg.v_min, cfg.v_max
                );
                println!("solve_time_s: {solve_seconds:.3}");
                println!(
                    "final_energy_j: {:.1} of awc {:.0}",
                    plan.final_energy, model.awc
                );
                println!("lab_mode: {}", prm.lab_mode);
            }
            println!("wrote {}", plan_path.display());
            println!("wrote {}", tables_path.display());
            println!("wrote {}", profile_path.display());
            Ok(())
        }
        Command::Simulate {
            tables,
            rider,
            course,
            noise_sd,
            seed,
            bias,
            lag,
            hold_power,
            out_dir,
        } => {
            let manifest = RunManifest::new(
                "simulate",
                vec![tables.clone(), rider.clone(), course.clone()],
                Some(out_dir.clone()),
            );
            manifest.validate()?;
            let (model, prm) = load_rider_config(&rider)?;
            let value_tables = import_tables(&tables)?;
            let cfg = *value_tables.config();
            let profile = load_course_file(&course, cfg.dx, 1)?;
            let behavior = RiderBehavior {
                power_bias: bias,
                power_noise_sd: noise_sd,
                response_lag: lag,
                seed,
            };
            let result = match hold_power {
                Some(p) => {
                    value_tables.verify_fingerprint(&model, &prm, &profile)?;
                    simulate_hold_power(&profile, &model, &prm, &cfg, p, &behavior)?
                }
                None => simulate_ride(&profile, &model, &prm, &value_tables, &behavior)?,
            };
            let log_path = out_dir.join("ridelog.csv");
            write_ridelog_csv(&log_path, &result)?;
            println!("achieved_time_s: {:.3}", result.achieved_time);
            println!("clamp_events: {}", result.clamp_events);
            println!("infeasible_ticks: {}", result.infeasible_ticks);
            println!("wrote {}", log_path.display());
            Ok(())
        }
        Command::ExportPlot {
            plan,
            baseline,
            out,
        } => {
            let mut inputs = vec![plan.clone()];
            if let Some(b) = &baseline {
                inputs.push(b.clone());
            }
            let manifest = RunManifest::new("export-plot", inputs, None);
            manifest.validate()?;
            let pacing_plan = read_plan_csv(&plan)?;
            let baseline_rows = match &baseline {
                Some(path) => Some(read_ridelog_csv(path)?),
                None => None,
            };
            let svg = plot::render_plan_svg(&pacing_plan, baseline_rows.as_deref());
            std::fs::write(&out, svg)?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_map_per_contract() {
        assert_eq!(
            exit_code_for(&Error::Infeasible("x".into())),
            EXIT_INFEASIBLE
        );
        assert_eq!(
            exit_code_for(&Error::FingerprintMismatch("x".into())),
            EXIT_FINGERPRINT
        );
        assert_eq!(
            exit_code_for(&Error::Parse {
                path: "f".into(),
                detail: "d".into()
            }),
            EXIT_INPUT
        );
        assert_eq!(
            exit_code_for(&Error::InvalidInput("x".into())),
            EXIT_INPUT
        );
        assert_eq!(exit_code_for(&Error::TableFormat("x".into())), EXIT_INPUT);
    }
}
