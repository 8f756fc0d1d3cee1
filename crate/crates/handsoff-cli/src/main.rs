// Copyright 2026 Handsoff Contributors
// SPDX-License-Identifier: Apache-2.0

//! Command-line front end: problem files in; solutions, packets, traces
//! and plots out.
//!
//! Exit codes: 0 success, 2 malformed input, 3 infeasible problem,
//! 4 iteration cap reached, 5 codec/structure violation, 6 divergence.

mod problem;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use handsoff::codec::bit_count;
use handsoff::{
    build_reachability, decode, encode, extract_switching, is_controllable, l0_measure,
    minimum_time, run_closed_loop, solve_l1, spectral_info, sweep_bits, theoretical_bits,
    verify_structure, AdmmSettings, ChannelModel, CodecError, ControlProblem, SimConfig, SimError,
    SolveStatus, SolverError, SwitchingSignal,
};

use problem::load_problem;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_MAX_ITERS: u8 = 4;
pub const EXIT_CODEC: u8 = 5;
pub const EXIT_DIVERGENCE: u8 = 6;

/// Error carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: String) -> Self {
        Self {
            code: EXIT_INPUT,
            message,
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: e.to_string(),
        }
    }
}

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        CliError {
            code: EXIT_CODEC,
            message: e.to_string(),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        let code = match &e {
            SimError::Divergence { .. } => EXIT_DIVERGENCE,
            SimError::Codec(_) => EXIT_CODEC,
            _ => EXIT_INPUT,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "handsoff",
    version,
    about = "Sparsest (maximum hands-off) control: solve, verify, encode, simulate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report controllability, spectral data and a minimum-time estimate.
    Check {
        /// Problem JSON file.
        problem: PathBuf,
        /// Emit the machine-readable JSON form.
        #[arg(long)]
        json: bool,
    },
    /// Solve the weighted-L1 steering problem; print a summary, write CSV.
    Solve {
        problem: PathBuf,
        /// Grid intervals (overrides the problem file and default).
        #[arg(long = "n-grid")]
        n_grid: Option<usize>,
        /// Solver tolerance (sets the feasibility and relative stops).
        #[arg(long)]
        tol: Option<f64>,
        /// Control CSV output path (columns t,u1..um).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Encode a switching-signal JSON file into a .hoc packet.
    Encode {
        signal: PathBuf,
        /// Bits per quantized switching time.
        #[arg(long, default_value_t = 8)]
        bits: u8,
        /// Packet output path (defaults to the input with .hoc).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Problem file for the theoretical bit-budget comparison.
        #[arg(long)]
        plant: Option<PathBuf>,
    },
    /// Decode a .hoc packet back into switching-signal JSON.
    Decode {
        packet: PathBuf,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the closed networked loop and write trace CSV/JSON/SVG.
    Simulate {
        problem: PathBuf,
        /// Number of horizons.
        #[arg(long, default_value_t = 1)]
        horizons: usize,
        /// Packet loss probability in [0, 1].
        #[arg(long, default_value_t = 0.0)]
        loss: f64,
        /// Channel seed (HANDSOFF_SEED env is used when the flag is absent).
        #[arg(long)]
        seed: Option<u64>,
        /// Bit budget per packet (0 = unlimited).
        #[arg(long, default_value_t = 0)]
        budget: u64,
        /// Output prefix for `<prefix>`.csv/.json/.svg.
        #[arg(long, default_value = "sim")]
        out: String,
    },
    /// Sweep the time-quantization bits over a lossless channel.
    Sweep {
        problem: PathBuf,
        /// Bit values: "4..12", "4,6,8" or a single number.
        #[arg(long, default_value = "4..12")]
        bits: String,
        /// CSV output path (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Check { problem, json } => cmd_check(&problem, json),
        Command::Solve {
            problem,
            n_grid,
            tol,
            out,
        } => cmd_solve(&problem, n_grid, tol, out),
        Command::Encode {
            signal,
            bits,
            out,
            plant,
        } => cmd_encode(&signal, bits, out, plant),
        Command::Decode { packet, out } => cmd_decode(&packet, out),
        Command::Simulate {
            problem,
            horizons,
            loss,
            seed,
            budget,
            out,
        } => cmd_simulate(&problem, horizons, loss, seed, budget, &out),
        Command::Sweep { problem, bits, out } => cmd_sweep(&problem, &bits, out),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

#[derive(Serialize)]
struct CheckReport {
    n: usize,
    m: usize,
    controllable: bool,
    rank: usize,
    omega: f64,
    a_nonsingular: bool,
    minimum_time: Option<f64>,
}

fn cmd_check(path: &Path, json: bool) -> Result<(), CliError> {
    let p = load_problem(path)?;
    let (controllable, rank) = is_controllable(&p.plant);
    let info = spectral_info(p.plant.a()).map_err(|e| CliError::input(e.to_string()))?;
    let min_time = if controllable {
        minimum_time(&p.plant, &p.x0, 50.0, 0.02).ok()
    } else {
        None
    };
    let report = CheckReport {
        n: p.plant.state_dim(),
        m: p.plant.input_dim(),
        controllable,
        rank,
        omega: info.omega,
        a_nonsingular: info.a_nonsingular,
        minimum_time: min_time,
    };
    if json {
        println!("{}", serde_json::to_string(&report).unwrap());
    } else {
        println!("plant: n={} states, m={} inputs", report.n, report.m);
        println!(
            "controllable: {} (rank {})",
            report.controllable, report.rank
        );
        println!("omega (largest |Im eigenvalue|): {}", report.omega);
        println!("A nonsingular: {}", report.a_nonsingular);
        match report.minimum_time {
            Some(t) => println!("minimum-time estimate: {t:.4}"),
            None => println!("minimum-time estimate: unavailable"),
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveSummary {
    status: SolveStatus,
    j1: f64,
    j0: f64,
    iterations: usize,
    primal_residual: f64,
    dual_residual: f64,
    n_grid: usize,
    dt: f64,
    switch_count: usize,
    bound: f64,
    bound_applicable: bool,
    bang_bang_fraction: f64,
}

fn cmd_solve(
    path: &Path,
    n_grid: Option<usize>,
    tol: Option<f64>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let p = load_problem(path)?;
    let n_grid = n_grid
        .or(p.n_grid)
        .unwrap_or_else(|| handsoff::solver::default_num_intervals(p.horizon, p.plant.state_dim()));
    let mut settings = AdmmSettings::default();
    if let Some(t) = tol {
        if t <= 0.0 || !t.is_finite() {
            return Err(CliError::input(format!(
                "tolerance must be positive, got {t}"
            )));
        }
        settings.eps_feas = t;
        settings.eps_rel = t;
        settings.eps_abs = 0.01 * t;
    }
    let problem = ControlProblem::new(p.plant.clone(), p.x0, p.horizon, n_grid, p.lambda.clone())?;
    let program = build_reachability(&problem)?;
    let result = solve_l1(&program, &settings)?;
    let (signal, fraction) = extract_switching(&result.u, p.horizon, 0.25)
        .map_err(|e| CliError::input(e.to_string()))?;
    let report = verify_structure(&signal, &p.plant, fraction)
        .map_err(|e| CliError::input(e.to_string()))?;

    let summary = SolveSummary {
        status: result.status,
        j1: result.j1,
        j0: l0_measure(&result.u, program.dt, 1e-3, &p.lambda),
        iterations: result.iterations,
        primal_residual: result.primal_residual,
        dual_residual: result.dual_residual,
        n_grid,
        dt: program.dt,
        switch_count: report.total_switches,
        bound: report.bound,
        bound_applicable: report.bound_applicable,
        bang_bang_fraction: report.bang_bang_fraction,
    };
    println!("{}", serde_json::to_string(&summary).unwrap());

    if let Some(out) = out {
        let mut csv = String::from("t");
        for i in 1..=result.u.ncols() {
            csv.push_str(&format!(",u{i}"));
        }
        csv.push('\n');
        for k in 0..result.u.nrows() {
            csv.push_str(&format!("{}", k as f64 * program.dt));
            for i in 0..result.u.ncols() {
                csv.push_str(&format!(",{}", result.u[(k, i)]));
            }
            csv.push('\n');
        }
        write_file(&out, &csv)?;
    }
    match result.status {
        SolveStatus::Optimal => Ok(()),
        SolveStatus::Infeasible => Err(CliError {
            code: EXIT_INFEASIBLE,
            message: "problem is infeasible at this horizon".into(),
        }),
        SolveStatus::MaxIters => Err(CliError {
            code: EXIT_MAX_ITERS,
            message: format!(
                "iteration cap reached (primal {:.3e}, dual {:.3e})",
                result.primal_residual, result.dual_residual
            ),
        }),
    }
}

#[derive(Serialize)]
struct EncodeReport {
    packet: String,
    total_bytes: usize,
    header_bits: u64,
    payload_bits: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    theoretical_total_bits: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theoretical_bitrate_bps: Option<f64>,
}

fn read_signal(path: &Path) -> Result<SwitchingSignal, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let signal: SwitchingSignal = serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(signal)
}

fn cmd_encode(
    signal_path: &Path,
    bits: u8,
    out: Option<PathBuf>,
    plant: Option<PathBuf>,
) -> Result<(), CliError> {
    let signal = read_signal(signal_path)?;
    let packet = encode(&signal, bits)?;
    let out = out.unwrap_or_else(|| signal_path.with_extension("hoc"));
    std::fs::write(&out, packet.as_bytes())
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", out.display())))?;
    let (header_bits, payload_bits) = bit_count(packet.as_bytes())?;

    let (theory_total, theory_rate) = match plant {
        Some(pp) => {
            let p = load_problem(&pp)?;
            let info = spectral_info(p.plant.a()).map_err(|e| CliError::input(e.to_string()))?;
            let (total, rate) = theoretical_bits(
                p.plant.state_dim(),
                p.plant.input_dim(),
                bits as u32,
                signal.horizon,
                info.omega,
            );
            (Some(total), Some(rate))
        }
        None => (None, None),
    };
    let report = EncodeReport {
        packet: out.display().to_string(),
        total_bytes: packet.len(),
        header_bits,
        payload_bits,
        theoretical_total_bits: theory_total,
        theoretical_bitrate_bps: theory_rate,
    };
    println!("{}", serde_json::to_string(&report).unwrap());
    Ok(())
}

fn cmd_decode(packet_path: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let bytes = std::fs::read(packet_path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", packet_path.display())))?;
    let signal = decode(&bytes)?;
    let json = serde_json::to_string_pretty(&signal).unwrap();
    match out {
        Some(path) => write_file(&path, &json)?,
        None => println!("{json}"),
    }
    Ok(())
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("HANDSOFF_SEED") {
        Ok(text) => text
            .trim()
            .parse()
            .map_err(|_| CliError::input(format!("HANDSOFF_SEED is not a u64: {text:?}"))),
        Err(_) => Ok(0),
    }
}

fn cmd_simulate(
    path: &Path,
    horizons: usize,
    loss: f64,
    seed: Option<u64>,
    budget: u64,
    out_prefix: &str,
) -> Result<(), CliError> {
    let p = load_problem(path)?;
    let mut config = SimConfig::new(horizons, p.horizon);
    config.bits = p.bits;
    config.weights = Some(p.lambda.clone());
    if let Some(n) = p.n_grid {
        config.num_intervals = n;
    } else {
        config.num_intervals =
            handsoff::solver::default_num_intervals(p.horizon, p.plant.state_dim());
    }
    let channel = ChannelModel {
        bit_budget: budget,
        loss_prob: loss,
        seed: resolve_seed(seed)?,
    };
    let trace = run_closed_loop(&p.plant, &p.x0, &config, &channel)?;

    write_file(Path::new(&format!("{out_prefix}.csv")), &trace.to_csv())?;
    write_file(
        Path::new(&format!("{out_prefix}.json")),
        &serde_json::to_string_pretty(&trace).unwrap(),
    )?;
    let title = format!(
        "closed loop: K={horizons}, T={}, b={}, loss={loss}, budget={budget}",
        p.horizon, p.bits
    );
    write_file(
        Path::new(&format!("{out_prefix}.svg")),
        &svg::render_trace(&trace, &title),
    )?;
    println!("{}", serde_json::to_string(&trace.summary).unwrap());
    Ok(())
}

/// Accepts "A..B" (inclusive), "a,b,c" or a single integer.
fn parse_bits_spec(spec: &str) -> Result<Vec<u8>, CliError> {
    let bad = |s: &str| CliError::input(format!("cannot parse bits spec {s:?}"));
    let spec = spec.trim();
    if let Some((a, b)) = spec.split_once("..") {
        let lo: u8 = a.trim().parse().map_err(|_| bad(spec))?;
        let hi: u8 = b.trim().parse().map_err(|_| bad(spec))?;
        if lo == 0 || hi < lo || hi > 32 {
            return Err(bad(spec));
        }
        return Ok((lo..=hi).collect());
    }
    if spec.contains(',') {
        return spec
            .split(',')
            .map(|s| s.trim().parse::<u8>().map_err(|_| bad(spec)))
            .collect();
    }
    let single: u8 = spec.parse().map_err(|_| bad(spec))?;
    Ok(vec![single])
}

fn cmd_sweep(path: &Path, bits_spec: &str, out: Option<PathBuf>) -> Result<(), CliError> {
    let p = load_problem(path)?;
    let b_list = parse_bits_spec(bits_spec)?;
    let mut config = SimConfig::new(1, p.horizon);
    config.weights = Some(p.lambda.clone());
    if let Some(n) = p.n_grid {
        config.num_intervals = n;
    } else {
        config.num_intervals =
            handsoff::solver::default_num_intervals(p.horizon, p.plant.state_dim());
    }
    let rows = sweep_bits(&p.plant, &p.x0, &config, &b_list)?;
    let mut csv = String::from("b,final_error,total_bits\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{}\n",
            row.b, row.final_error, row.total_bits
        ));
    }
    match out {
        Some(path) => write_file(&path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bits_spec_forms() {
        assert_eq!(parse_bits_spec("4..7").unwrap(), vec![4, 5, 6, 7]);
        assert_eq!(parse_bits_spec("8").unwrap(), vec![8]);
        assert_eq!(parse_bits_spec("4, 6, 12").unwrap(), vec![4, 6, 12]);
        assert!(parse_bits_spec("12..4").is_err());
        assert!(parse_bits_spec("x").is_err());
        assert!(parse_bits_spec("0..3").is_err());
    }
}
