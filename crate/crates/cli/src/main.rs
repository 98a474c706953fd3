//! Command-line driver: threshold analysis, localized minimization, time
//! evolution, and the orbital-stability experiment.
//!
//! Exit codes: 0 success, 1 usage/config/i-o error, 2 mass–coupling
//! smallness condition failed, 3 critical-exponent threshold failed,
//! 4 fewer converged minimizers than coefficient maxima, 5 integrator
//! blow-up guard.

mod config;
mod output;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use nls_core::dynamics::{evolve, extract_rotation_frequency, stability_experiment, DynError};
use nls_core::field::io::{read_nsf1, write_nsf1};
use nls_core::landscape::LandscapeReport;
use nls_core::optimizer::solve_multiplicity;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "nls", version, about = "Normalized-state solver for modulated dispersive equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides the config's `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the threshold analysis and write the scalar report.
    Landscape {
        #[command(flatten)]
        common: Common,
    },
    /// Find one localized minimizer per coefficient maximum.
    Minimize {
        #[command(flatten)]
        common: Common,
    },
    /// Evolve a saved state under the time-dependent flow.
    Evolve {
        #[command(flatten)]
        common: Common,
        /// Initial state (NSF1 file).
        #[arg(long)]
        field: PathBuf,
    },
    /// Perturb a saved minimizer and measure its orbital excursion.
    Stability {
        #[command(flatten)]
        common: Common,
        /// Minimizer state (NSF1 file written by `minimize`).
        #[arg(long)]
        record: PathBuf,
        /// Perturbation size (overrides the config's first `gamma`).
        #[arg(long)]
        gamma: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not usage errors.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    };
    ExitCode::from(code)
}

struct Run {
    cfg: RunConfig,
    out_dir: PathBuf,
    seed: u64,
    quiet: bool,
    hash: String,
}

impl Run {
    fn new(common: &Common) -> Result<Self> {
        let cfg = config::load(&common.config)?;
        let out_dir = common
            .out
            .clone()
            .or_else(|| cfg.out.clone().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&out_dir)
            .map_err(|e| anyhow!("cannot create output directory {}: {e}", out_dir.display()))?;
        let seed = common.seed.unwrap_or(cfg.seed);
        let hash = cfg.hash();
        Ok(Self { cfg, out_dir, seed, quiet: common.quiet, hash })
    }

    fn header(&self) -> String {
        format!("# config_sha256 = {}\n", self.hash)
    }

    fn say(&self, text: &str) {
        if !self.quiet {
            println!("{text}");
        }
    }

    fn write_text(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, body).map_err(|e| anyhow!("cannot write {}: {e}", path.display()))?;
        Ok(path)
    }

    fn landscape(&self) -> Result<(LandscapeReport, u8)> {
        let spec = self.cfg.build_spec()?;
        let report = LandscapeReport::compute(&self.cfg.params, spec.h_max())
            .map_err(|e| anyhow!("landscape: {e}"))?;
        let body = format!("{}{}", self.header(), report.to_report_string());
        self.write_text("landscape.txt", &body)?;
        let code = if !report.smallness_ok {
            self.say(&format!(
                "smallness condition FAILED (margin {:.6e}); no truncation thresholds exist",
                report.smallness_margin
            ));
            2
        } else if !report.critical_ok {
            self.say(&format!(
                "critical-exponent threshold FAILED (margin {:.6e})",
                report.critical_margin
            ));
            3
        } else {
            0
        };
        Ok((report, code))
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Landscape { common } => cmd_landscape(&Run::new(&common)?),
        Command::Minimize { common } => cmd_minimize(&Run::new(&common)?),
        Command::Evolve { common, field } => cmd_evolve(&Run::new(&common)?, &field),
        Command::Stability { common, record, gamma } => {
            cmd_stability(&Run::new(&common)?, &record, gamma)
        }
    }
}

fn cmd_landscape(run: &Run) -> Result<u8> {
    let (report, code) = run.landscape()?;
    if code == 0 {
        let (r0, r1) = report.zeros.expect("smallness holds");
        run.say(&format!(
            "thresholds: r0 = {:.9e}, R0 = {:.9e}, R1 = {:.9e}, w_max = {:.9e}",
            report.r0, r0, r1, report.w_max
        ));
        run.say(&format!("report written to {}", run.out_dir.join("landscape.txt").display()));
    }
    Ok(code)
}

fn cmd_minimize(run: &Run) -> Result<u8> {
    let (_, gate) = run.landscape()?;
    if gate != 0 {
        return Ok(gate);
    }
    let spec = run.cfg.build_spec()?;
    run.cfg.validate_box_for_regions(&spec)?;
    let grid = run.cfg.build_grid()?;
    let settings = run.cfg.solver_settings(run.seed);
    let report = solve_multiplicity(&run.cfg.params, &spec, grid, &settings)
        .map_err(|e| anyhow!("minimize: {e}"))?;

    let mut body = run.header();
    body.push_str(&output::records_table(&report, &spec));
    run.write_text("records.txt", &body)?;
    run.say(body.trim_end());

    for record in &report.records {
        let base = format!("record_{}", record.region);
        let path = run.out_dir.join(format!("{base}.nsf"));
        write_nsf1(&record.u, &path).map_err(|e| anyhow!("cannot write {}: {e}", path.display()))?;
        let meta = output::record_meta(record, &run.hash);
        run.write_text(&format!("{base}.meta"), &meta)?;
    }

    if report.complete(&spec) {
        run.say(&format!(
            "{} converged records written to {}",
            report.records.len(),
            run.out_dir.display()
        ));
        Ok(0)
    } else {
        for (region, err) in &report.failures {
            eprintln!("region {region}: {err}");
        }
        Ok(4)
    }
}

fn cmd_evolve(run: &Run, field_path: &Path) -> Result<u8> {
    let (report, gate) = run.landscape()?;
    if gate != 0 {
        return Ok(gate);
    }
    let profile = report.truncation_profile().expect("gate passed");
    let spec = run.cfg.build_spec()?;
    let psi0 = read_nsf1(field_path).map_err(|e| anyhow!("cannot read {}: {e}", field_path.display()))?;
    let coeff = spec.sample(psi0.grid(), run.cfg.params.epsilon);
    let settings = run.cfg.evolve_settings();
    match evolve(&psi0, &run.cfg.params, &coeff, &profile, &settings, Some(&psi0)) {
        Ok(outcome) => {
            let csv = outcome.trace.to_csv(&run.header());
            run.write_text("trace.csv", &csv)?;
            let final_path = run.out_dir.join("final.nsf");
            write_nsf1(&outcome.final_state, &final_path)
                .map_err(|e| anyhow!("cannot write {}: {e}", final_path.display()))?;
            run.write_text("final.meta", &format!("config_sha256 = {}\n", run.hash))?;
            let last = outcome.trace.times.len() - 1;
            run.say(&format!(
                "evolved to t = {} ({} samples): mass drift {:.3e}, energy drift {:.3e}",
                outcome.trace.times[last],
                outcome.trace.times.len(),
                outcome.trace.mass_drift[last],
                outcome.trace.energy_drift[last]
            ));
            if let Some(freq) = extract_rotation_frequency(&outcome.trace) {
                run.say(&format!("overlap phase rotation frequency {freq:.9e}"));
            }
            Ok(0)
        }
        Err(DynError::BlowUpGuard { time, grad_norm, guard, trace }) => {
            let csv = trace.to_csv(&run.header());
            run.write_text("trace.csv", &csv)?;
            eprintln!("blow-up guard at t = {time}: gradient norm {grad_norm:.3e} > {guard:.3e}");
            Ok(5)
        }
        Err(e) => Err(anyhow!("evolve: {e}")),
    }
}

fn cmd_stability(run: &Run, record_path: &Path, gamma_flag: Option<f64>) -> Result<u8> {
    let (report, gate) = run.landscape()?;
    if gate != 0 {
        return Ok(gate);
    }
    let profile = report.truncation_profile().expect("gate passed");
    let spec = run.cfg.build_spec()?;
    let reference =
        read_nsf1(record_path).map_err(|e| anyhow!("cannot read {}: {e}", record_path.display()))?;
    let coeff = spec.sample(reference.grid(), run.cfg.params.epsilon);
    let gamma = gamma_flag
        .or_else(|| run.cfg.dynamics.gammas.first().copied())
        .ok_or_else(|| anyhow!("no perturbation size given"))?;
    let settings = run.cfg.evolve_settings();
    match stability_experiment(
        &reference,
        gamma,
        run.cfg.dynamics.theta_target,
        run.seed,
        &run.cfg.params,
        &coeff,
        &profile,
        &settings,
    ) {
        Ok(verdict) => {
            let csv = verdict.trace.to_csv(&run.header());
            run.write_text("stability_trace.csv", &csv)?;
            let body = format!("{}{}", run.header(), output::verdict_text(&verdict));
            run.write_text("stability.txt", &body)?;
            run.say(&format!(
                "{}: sup distance {:.6e} (translated {:.6e}) over horizon {}, guard_ok = {}",
                if verdict.pass { "PASS" } else { "FAIL" },
                verdict.theta,
                verdict.theta_translated,
                verdict.horizon,
                verdict.guard_ok
            ));
            Ok(0)
        }
        Err(DynError::BlowUpGuard { time, grad_norm, guard, trace }) => {
            let csv = trace.to_csv(&run.header());
            run.write_text("stability_trace.csv", &csv)?;
            eprintln!("blow-up guard at t = {time}: gradient norm {grad_norm:.3e} > {guard:.3e}");
            Ok(5)
        }
        Err(e) => Err(anyhow!("stability: {e}")),
    }
}
