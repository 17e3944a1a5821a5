//! `hinf` — closed-form SISO H-infinity limits with an SDP cross-check.
//!
//! Subcommands:
//! * `gamma`  — compute `gamma*` for a plant JSON file;
//! * `zeros`  — report invariant zeros of the control and measurement
//!   channels;
//! * `verify` — compare the closed form against the LMI bisection oracle;
//! * `bench`  — run a seeded random suite and emit CSV.
//!
//! Exit codes: 0 success, 1 computation error, 2 verification mismatch.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hinf::gamma::{gamma_star, GammaResult};
use hinf::plant::{channel_realization, Channel, StateSpacePlant};
use hinf::sdp::{
    assemble_lmi_full, bisect_gamma, facial_reduce_dual, BisectOptions, DualKind, PerpKind,
};
use hinf::suite::{run_suite, run_suite_sequential, SuiteSpec, VerifyRow};
use hinf::zeros::{zero_data, ZeroData};
use hinf::{HinfError, Tolerances};

#[derive(Parser)]
#[command(name = "hinf", about = "SISO H-infinity performance limits", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ToleranceArgs {
    /// Axis-classification tolerance factor.
    #[arg(long, default_value_t = 1e-8)]
    tol_axis: f64,
}

impl ToleranceArgs {
    fn build(&self) -> Result<Tolerances, HinfError> {
        if self.tol_axis <= 0.0 {
            return Err(HinfError::Parse("--tol-axis must be positive".to_string()));
        }
        Ok(Tolerances {
            axis_factor: self.tol_axis,
            ..Tolerances::default()
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute gamma* from a plant JSON file.
    Gamma {
        plant: PathBuf,
        /// Emit machine-readable JSON.
        #[arg(long)]
        json: bool,
        /// List every component entering the maximum.
        #[arg(long)]
        components: bool,
        #[command(flatten)]
        tols: ToleranceArgs,
    },
    /// Report invariant zeros per channel (JSON).
    Zeros {
        plant: PathBuf,
        #[command(flatten)]
        tols: ToleranceArgs,
    },
    /// Compare the closed form against the SDP bisection oracle.
    Verify {
        plant: PathBuf,
        /// Agreement tolerance.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        /// Emit machine-readable JSON.
        #[arg(long)]
        json: bool,
        /// Write the full LMI in sparse SDPA format to this path.
        #[arg(long)]
        dump_sdp: Option<PathBuf>,
        #[command(flatten)]
        tols: ToleranceArgs,
    },
    /// Seeded random suite comparing closed form and oracle (CSV).
    Bench {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 2)]
        n_min: usize,
        #[arg(long, default_value_t = 6)]
        n_max: usize,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Force the sequential path even when built with rayon.
        #[arg(long)]
        sequential: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("HINF_LOG")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err((err, json)) => {
            if json {
                let payload = serde_json::json!({ "error": err.to_string() });
                let _ = writeln!(std::io::stderr(), "{payload}");
            } else {
                let _ = writeln!(std::io::stderr(), "error: {err}");
            }
            ExitCode::from(1)
        }
    }
}

fn load_plant(path: &PathBuf) -> Result<StateSpacePlant, HinfError> {
    let text = std::fs::read_to_string(path).map_err(|e| HinfError::Io(e.to_string()))?;
    StateSpacePlant::from_json(&text)
}

fn run(cli: Cli) -> Result<ExitCode, (HinfError, bool)> {
    match cli.command {
        Command::Gamma { plant, json, components, tols } => {
            let wants_json = json;
            let go = || -> Result<GammaResult, HinfError> {
                let tol = tols.build()?;
                let plant = load_plant(&plant)?;
                gamma_star(&plant, &tol)
            };
            let result = go().map_err(|e| (e, wants_json))?;
            if json {
                println!("{}", serde_json::to_string_pretty(&gamma_json(&result)).unwrap());
            } else {
                println!("gamma_star = {:.12}", result.gamma_star);
                println!("case       = {:?}", result.case_id);
                if components {
                    println!("hat_gamma  = {:.12}", result.hat_gamma);
                    for (w, t) in &result.imag_terms_zu {
                        println!("axis term (control,  w={w:+.6}) = {t:.12}");
                    }
                    for (w, t) in &result.imag_terms_yw {
                        println!("axis term (measure,  w={w:+.6}) = {t:.12}");
                    }
                    if let Some(t) = result.feedthrough_term {
                        println!("feedthrough floor             = {t:.12}");
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Zeros { plant, tols } => {
            let go = || -> Result<serde_json::Value, HinfError> {
                let tol = tols.build()?;
                let plant = load_plant(&plant)?;
                let zu = zero_data(&channel_realization(&plant, Channel::Zu), &tol)?;
                let yw = zero_data(&channel_realization(&plant, Channel::Yw), &tol)?;
                Ok(serde_json::json!({
                    "zu": channel_json(&zu),
                    "yw": channel_json(&yw),
                }))
            };
            let value = go().map_err(|e| (e, true))?;
            println!("{}", serde_json::to_string_pretty(&value).unwrap());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { plant, tol, json, dump_sdp, tols } => {
            let wants_json = json;
            let go = || -> Result<(serde_json::Value, bool), HinfError> {
                let tols = tols.build()?;
                let plant = load_plant(&plant)?;
                let closed = gamma_star(&plant, &tols)?;
                let opts = BisectOptions::default();
                let oracle = bisect_gamma(&plant, 0.0, opts.hi_init, &opts, &tols)?;
                let gap = (closed.gamma_star - oracle.gamma).abs();
                let pass = gap <= tol && oracle.conclusive;
                let zu = zero_data(&channel_realization(&plant, Channel::Zu), &tols)?;
                let yw = zero_data(&channel_realization(&plant, Channel::Yw), &tols)?;
                let kind = if plant.d12 == 0.0 || plant.d21 == 0.0 {
                    DualKind::Singular
                } else {
                    DualKind::Biproper
                };
                let (_, report) = facial_reduce_dual(&plant, &zu, &yw, kind)?;
                if let Some(path) = &dump_sdp {
                    let lmi = assemble_lmi_full(&plant, &zu, &yw, PerpKind::NullVector, &tols)?;
                    std::fs::write(path, lmi.min_gamma().to_sdpa())
                        .map_err(|e| HinfError::Io(e.to_string()))?;
                }
                Ok((
                    serde_json::json!({
                        "gamma_star": closed.gamma_star,
                        "case": format!("{:?}", closed.case_id),
                        "gamma_oracle": oracle.gamma,
                        "gap": gap,
                        "tol": tol,
                        "conclusive": oracle.conclusive,
                        "oracle_solves": oracle.solves,
                        "reduction": report,
                        "pass": pass,
                    }),
                    pass,
                ))
            };
            let (value, pass) = go().map_err(|e| (e, wants_json))?;
            if json {
                println!("{}", serde_json::to_string_pretty(&value).unwrap());
            } else {
                println!("closed form : {:.12}", value["gamma_star"].as_f64().unwrap());
                println!("oracle      : {:.12}", value["gamma_oracle"].as_f64().unwrap());
                println!("gap         : {:.3e}", value["gap"].as_f64().unwrap());
                println!(
                    "reduction   : {} -> {} ({})",
                    value["reduction"]["dims_before"],
                    value["reduction"]["dims_after"],
                    value["reduction"]["pattern"].as_str().unwrap_or(""),
                );
                println!("{}", if pass { "PASS" } else { "FAIL" });
            }
            Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Bench { seed, count, n_min, n_max, out, sequential } => {
            let spec = SuiteSpec {
                seed,
                count,
                n_min,
                n_max,
                ..SuiteSpec::default()
            };
            let rows = if sequential {
                run_suite_sequential(&spec)
            } else {
                run_suite(&spec)
            };
            let mut text = String::from(VerifyRow::csv_header());
            text.push('\n');
            for r in &rows {
                text.push_str(&r.to_csv());
                text.push('\n');
            }
            match out {
                Some(path) => std::fs::write(&path, text)
                    .map_err(|e| (HinfError::Io(e.to_string()), false))?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn gamma_json(result: &GammaResult) -> serde_json::Value {
    serde_json::json!({
        "gamma_star": result.gamma_star,
        "case": format!("{:?}", result.case_id),
        "hat_gamma": result.hat_gamma,
        "imag_terms_zu": result.imag_terms_zu,
        "imag_terms_yw": result.imag_terms_yw,
        "feedthrough_term": result.feedthrough_term,
        "diagnostics": result.diagnostics,
    })
}

fn channel_json(zd: &ZeroData) -> serde_json::Value {
    let zeros: Vec<serde_json::Value> = zd
        .zeros
        .iter()
        .map(|z| {
            serde_json::json!({
                "value": [z.value.re, z.value.im],
                "multiplicity": z.multiplicity,
                "class": format!("{:?}", z.klass),
            })
        })
        .collect();
    serde_json::json!({
        "zeros": zeros,
        "relative_degree": zd.relative_degree,
        "residual": zd.residual,
        "s_condition": zd.s_condition,
    })
}
