// Copyright 2026 Handsoff Contributors
// SPDX-License-Identifier: Apache-2.0

//! Closed networked control loop over a lossy, bit-budgeted channel.
//!
//! At each sampling instant `k T` the controller re-measures the state,
//! solves the weighted-L1 steering problem over the next horizon,
//! extracts the switching structure, encodes it, and transmits the
//! packet. The channel drops the packet when it exceeds the bit budget
//! or loses it at random; the plant then applies zero control for the
//! whole horizon (the hands-off fallback). Delivered packets are decoded
//! and the quantized signal is applied through exact propagation.

use nalgebra::DVector;
use serde::Serialize;
use thiserror::Error;

use crate::codec::{self, CodecError};
use crate::model::{self, ModelError, PlantModel};
use crate::solver::{
    build_reachability, solve_l1, AdmmSettings, ControlProblem, SolveStatus, SolverError,
};
use crate::structure::{extract_switching, StructureError, SwitchingSignal};

/// State norm beyond which a run is declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("state diverged at horizon {horizon}: |x| = {norm:.3e}")]
    Divergence { horizon: usize, norm: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Lossy channel: packets above `bit_budget` bits are refused
/// (0 = unlimited), and delivered packets are lost independently with
/// probability `loss_prob`. Loss draws come from the deterministic
/// stream seeded by `seed`.
#[derive(Debug, Clone, Serialize)]
pub struct ChannelModel {
    pub bit_budget: u64,
    pub loss_prob: f64,
    pub seed: u64,
}

impl ChannelModel {
    pub fn lossless() -> Self {
        Self {
            bit_budget: 0,
            loss_prob: 0.0,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        if !(0.0..=1.0).contains(&self.loss_prob) {
            return Err(SimError::InvalidConfig(format!(
                "loss probability must lie in [0, 1], got {}",
                self.loss_prob
            )));
        }
        Ok(())
    }
}

/// Closed-loop run parameters.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Number of horizons to run.
    pub horizons: usize,
    /// Length of each horizon (seconds).
    pub horizon: f64,
    /// Bits per quantized switching time.
    pub bits: u8,
    /// Grid intervals per horizon solve.
    pub num_intervals: usize,
    /// Per-channel objective weights; `None` means all ones.
    pub weights: Option<DVector<f64>>,
    pub admm: AdmmSettings,
    /// Level tolerance for switching extraction.
    pub eps_level: f64,
    /// Final-state norm below which the run counts as converged.
    pub terminal_tol: f64,
    /// Dense state samples recorded per horizon.
    pub samples_per_horizon: usize,
}

impl SimConfig {
    pub fn new(horizons: usize, horizon: f64) -> Self {
        Self {
            horizons,
            horizon,
            bits: 8,
            num_intervals: crate::solver::default_num_intervals(horizon, 1),
            weights: None,
            admm: AdmmSettings::default(),
            eps_level: 0.25,
            terminal_tol: 1e-2,
            samples_per_horizon: 128,
        }
    }

    fn validate(&self, plant: &PlantModel) -> Result<(), SimError> {
        if self.horizons == 0 {
            return Err(SimError::InvalidConfig("need at least one horizon".into()));
        }
        if self.horizon <= 0.0 || !self.horizon.is_finite() {
            return Err(SimError::InvalidConfig(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if !(1..=32).contains(&self.bits) {
            return Err(SimError::InvalidConfig(format!(
                "bits must lie in [1, 32], got {}",
                self.bits
            )));
        }
        if !self.eps_level.is_finite() || self.eps_level <= 0.0 || self.eps_level >= 0.5 {
            return Err(SimError::InvalidConfig(format!(
                "eps_level must lie in (0, 0.5), got {}",
                self.eps_level
            )));
        }
        if self.samples_per_horizon == 0 {
            return Err(SimError::InvalidConfig(
                "need at least one sample per horizon".into(),
            ));
        }
        if self.terminal_tol <= 0.0 || self.terminal_tol.is_nan() {
            return Err(SimError::InvalidConfig(
                "terminal tolerance must be positive".into(),
            ));
        }
        if self.num_intervals * plant.input_dim() < plant.state_dim() {
            return Err(SimError::InvalidConfig(format!(
                "grid too coarse: N*m = {} < n = {}",
                self.num_intervals * plant.input_dim(),
                plant.state_dim()
            )));
        }
        if let Some(w) = &self.weights {
            if w.len() != plant.input_dim() || w.iter().any(|x| *x <= 0.0 || !x.is_finite()) {
                return Err(SimError::InvalidConfig(
                    "weights must be positive, one per input channel".into(),
                ));
            }
        }
        Ok(())
    }
}

const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The `k`-th uniform draw in `[0, 1)` of the stream with the given
/// seed; a pure function of `(seed, k)` (splitmix-style mixer).
pub fn uniform_at(seed: u64, k: u64) -> f64 {
    let mut z = seed.wrapping_add(k.wrapping_add(1).wrapping_mul(SPLITMIX_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Deterministic uniform stream; draw `k` equals `uniform_at(seed, k)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    next: u64,
}

impl RngStream {
    pub fn next_uniform(&mut self) -> f64 {
        let v = uniform_at(self.seed, self.next);
        self.next += 1;
        v
    }
}

/// Opens the deterministic draw stream for a seed.
pub fn rng_stream(seed: u64) -> RngStream {
    RngStream { seed, next: 0 }
}

/// Per-horizon record of the loop.
#[derive(Debug, Clone, Serialize)]
pub struct HorizonRecord {
    pub index: usize,
    pub state_start: Vec<f64>,
    pub status: SolveStatus,
    /// Switches in the extracted (pre-quantization) signal.
    pub switch_count: usize,
    /// Wire size of the packet put on the channel (0 when no packet was
    /// sent: failed solve or budget refusal).
    pub packet_bits: u64,
    pub dropped: bool,
    /// Weighted fuel of the control actually applied this horizon.
    pub fuel: f64,
    /// Weighted support measure of the applied control.
    pub support: f64,
    pub applied: SwitchingSignal,
}

/// A dense state/control sample (CSV output only).
#[derive(Debug, Clone)]
pub struct DenseSample {
    pub t: f64,
    pub state: Vec<f64>,
    pub control: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimSummary {
    pub final_state: Vec<f64>,
    pub final_norm: f64,
    pub total_bits: u64,
    pub total_fuel: f64,
    pub total_support: f64,
    pub drops: usize,
    pub converged: bool,
}

/// Full record of a closed-loop run. Serializes to JSON as the
/// per-horizon records plus the summary; the dense samples go to CSV.
#[derive(Debug, Clone, Serialize)]
pub struct SimTrace {
    pub horizons: Vec<HorizonRecord>,
    #[serde(skip)]
    pub samples: Vec<DenseSample>,
    pub summary: SimSummary,
}

impl SimTrace {
    /// Dense samples as CSV with header `t,x1..xn,u1..um`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let n = self.samples.first().map_or(0, |s| s.state.len());
        let m = self.samples.first().map_or(0, |s| s.control.len());
        out.push('t');
        for i in 1..=n {
            out.push_str(&format!(",x{i}"));
        }
        for i in 1..=m {
            out.push_str(&format!(",u{i}"));
        }
        out.push('\n');
        for s in &self.samples {
            out.push_str(&format!("{}", s.t));
            for v in &s.state {
                out.push_str(&format!(",{v}"));
            }
            for v in &s.control {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Weighted fuel and support of a switching signal.
fn signal_cost(signal: &SwitchingSignal, weights: &DVector<f64>) -> (f64, f64) {
    let mut fuel = 0.0;
    let mut support = 0.0;
    for (ci, ch) in signal.channels.iter().enumerate() {
        for (start, end, value) in ch.segments(signal.horizon) {
            if !value.is_zero() {
                fuel += weights[ci] * (end - start) * value.as_f64().abs();
                support += weights[ci] * (end - start);
            }
        }
    }
    (fuel, support)
}

/// Merged breakpoints of all channels, so the vector control is constant
/// on each piece.
fn vector_segments(signal: &SwitchingSignal) -> Vec<(f64, f64, Vec<f64>)> {
    let mut cuts: Vec<f64> = vec![0.0, signal.horizon];
    for ch in &signal.channels {
        cuts.extend(ch.switches.iter().map(|s| s.time));
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut out = Vec::with_capacity(cuts.len() - 1);
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let u: Vec<f64> = signal
            .channels
            .iter()
            .map(|ch| ch.value_at(a).as_f64())
            .collect();
        out.push((a, b, u));
    }
    out
}

/// Applies a switching signal over one horizon with exact propagation,
/// recording dense samples. Returns the state at the horizon end.
fn apply_signal(
    plant: &PlantModel,
    x: &DVector<f64>,
    signal: &SwitchingSignal,
    t_offset: f64,
    samples_target: usize,
    samples: &mut Vec<DenseSample>,
) -> Result<DVector<f64>, SimError> {
    let mut state = x.clone();
    let target_dt = signal.horizon / samples_target as f64;
    for (start, end, u) in vector_segments(signal) {
        let len = end - start;
        let substeps = (len / target_dt).ceil().max(1.0) as usize;
        let step = len / substeps as f64;
        let disc = model::discretize_zoh(plant, step)?;
        let u_vec = DVector::from_vec(u.clone());
        let bu = &disc.bd * &u_vec;
        for i in 0..substeps {
            state = &disc.ad * &state + &bu;
            samples.push(DenseSample {
                t: t_offset + start + (i + 1) as f64 * step,
                state: state.iter().copied().collect(),
                control: u.clone(),
            });
        }
    }
    Ok(state)
}

/// Runs the closed loop for `config.horizons` horizons from `x0`.
///
/// Per horizon: solve from the measured state, extract and encode the
/// switching signal, transmit (or drop), apply the decoded signal (zero
/// on drop or failed solve) with exact propagation, and record
/// everything. Identical inputs give bit-identical traces.
pub fn run_closed_loop(
    plant: &PlantModel,
    x0: &DVector<f64>,
    config: &SimConfig,
    channel: &ChannelModel,
) -> Result<SimTrace, SimError> {
    config.validate(plant)?;
    channel.validate()?;
    if x0.len() != plant.state_dim() || x0.iter().any(|v| !v.is_finite()) {
        return Err(SimError::InvalidConfig("bad initial state".into()));
    }
    let (controllable, rank) = model::is_controllable(plant);
    if !controllable {
        return Err(SimError::InvalidConfig(format!(
            "plant is not controllable (rank {rank} < {})",
            plant.state_dim()
        )));
    }
    let m = plant.input_dim();
    let weights = config
        .weights
        .clone()
        .unwrap_or_else(|| DVector::from_element(m, 1.0));

    let mut x = x0.clone();
    let mut stream = rng_stream(channel.seed);
    let mut horizons = Vec::with_capacity(config.horizons);
    let mut samples = Vec::new();
    samples.push(DenseSample {
        t: 0.0,
        state: x.iter().copied().collect(),
        control: vec![0.0; m],
    });
    let mut total_bits = 0u64;
    let mut total_fuel = 0.0;
    let mut total_support = 0.0;
    let mut drops = 0usize;

    for k in 0..config.horizons {
        if x.norm() > DIVERGENCE_NORM {
            return Err(SimError::Divergence {
                horizon: k,
                norm: x.norm(),
            });
        }
        let state_start: Vec<f64> = x.iter().copied().collect();
        let problem = ControlProblem::new(
            plant.clone(),
            x.clone(),
            config.horizon,
            config.num_intervals,
            weights.clone(),
        )?;
        let program = build_reachability(&problem)?;
        let result = solve_l1(&program, &config.admm)?;
        // One loss draw per horizon, taken unconditionally so the stream
        // position depends only on the horizon index.
        let draw = stream.next_uniform();

        let (applied, switch_count, packet_bits, dropped) = if result.status == SolveStatus::Optimal
        {
            let (signal, _) = extract_switching(&result.u, config.horizon, config.eps_level)?;
            let packet = codec::encode(&signal, config.bits)?;
            let bits = packet.len() as u64 * 8;
            let budget_refused = channel.bit_budget > 0 && bits > channel.bit_budget;
            let lost = draw < channel.loss_prob;
            if budget_refused {
                (
                    SwitchingSignal::zero(m, config.horizon),
                    signal.total_switches(),
                    0,
                    true,
                )
            } else if lost {
                (
                    SwitchingSignal::zero(m, config.horizon),
                    signal.total_switches(),
                    bits,
                    true,
                )
            } else {
                let decoded = codec::decode(packet.as_bytes())?;
                (decoded, signal.total_switches(), bits, false)
            }
        } else {
            (SwitchingSignal::zero(m, config.horizon), 0, 0, false)
        };

        x = apply_signal(
            plant,
            &x,
            &applied,
            k as f64 * config.horizon,
            config.samples_per_horizon,
            &mut samples,
        )?;
        if x.iter().any(|v| !v.is_finite()) || x.norm() > DIVERGENCE_NORM {
            return Err(SimError::Divergence {
                horizon: k,
                norm: x.norm(),
            });
        }

        let (fuel, support) = signal_cost(&applied, &weights);
        total_bits += packet_bits;
        total_fuel += fuel;
        total_support += support;
        if dropped {
            drops += 1;
        }
        horizons.push(HorizonRecord {
            index: k,
            state_start,
            status: result.status,
            switch_count,
            packet_bits,
            dropped,
            fuel,
            support,
            applied,
        });
    }

    let final_norm = x.norm();
    Ok(SimTrace {
        horizons,
        samples,
        summary: SimSummary {
            final_state: x.iter().copied().collect(),
            final_norm,
            total_bits,
            total_fuel,
            total_support,
            drops,
            converged: final_norm <= config.terminal_tol,
        },
    })
}

/// One row of the time-quantization sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub b: u8,
    pub final_error: f64,
    pub total_bits: u64,
}

/// Runs the closed loop once per entry of `b_list` over a lossless,
/// unlimited channel and tabulates final error against bits spent.
pub fn sweep_bits(
    plant: &PlantModel,
    x0: &DVector<f64>,
    config: &SimConfig,
    b_list: &[u8],
) -> Result<Vec<SweepRow>, SimError> {
    let channel = ChannelModel::lossless();
    let mut rows = Vec::with_capacity(b_list.len());
    for &b in b_list {
        let mut cfg = config.clone();
        cfg.bits = b;
        let trace = run_closed_loop(plant, x0, &cfg, &channel)?;
        rows.push(SweepRow {
            b,
            final_error: trace.summary.final_norm,
            total_bits: trace.summary.total_bits,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::Ternary;
    use nalgebra::{dmatrix, dvector, DMatrix};

    fn harmonic_oscillator() -> PlantModel {
        PlantModel::new(dmatrix![0.0, 1.0; -1.0, 0.0], dmatrix![0.0; 1.0]).unwrap()
    }

    fn double_integrator() -> PlantModel {
        PlantModel::new(dmatrix![0.0, 1.0; 0.0, 0.0], dmatrix![0.0; 1.0]).unwrap()
    }

    #[test]
    fn rng_stream_is_pure_in_seed_and_index() {
        let mut a = rng_stream(42);
        let mut b = rng_stream(42);
        for k in 0..50u64 {
            let va = a.next_uniform();
            assert_eq!(va, b.next_uniform());
            assert_eq!(va, uniform_at(42, k));
        }
        let first: Vec<f64> = (0..10).map(|k| uniform_at(1, k)).collect();
        let second: Vec<f64> = (0..10).map(|k| uniform_at(2, k)).collect();
        assert_ne!(first, second);
    }

    #[test]
    fn rng_stream_mean() {
        let mut s = rng_stream(7);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| s.next_uniform()).sum::<f64>() / n as f64;
        assert!(mean > 0.49 && mean < 0.51, "mean = {mean}");
    }

    #[test]
    fn zero_state_stays_at_origin() {
        let plant = harmonic_oscillator();
        let mut config = SimConfig::new(3, 1.0);
        config.num_intervals = 100;
        let channel = ChannelModel {
            bit_budget: 0,
            loss_prob: 0.5,
            seed: 9,
        };
        let trace = run_closed_loop(&plant, &dvector![0.0, 0.0], &config, &channel).unwrap();
        assert_eq!(trace.summary.final_norm, 0.0);
        assert_eq!(trace.summary.total_fuel, 0.0);
        assert_eq!(trace.summary.total_support, 0.0);
        for h in &trace.horizons {
            assert_eq!(h.switch_count, 0);
        }
    }

    #[test]
    fn full_loss_gives_free_response() {
        let plant = harmonic_oscillator();
        let mut config = SimConfig::new(3, 2.0);
        config.num_intervals = 200;
        let channel = ChannelModel {
            bit_budget: 0,
            loss_prob: 1.0,
            seed: 1,
        };
        let x0 = dvector![0.3, 0.0];
        let trace = run_closed_loop(&plant, &x0, &config, &channel).unwrap();
        assert_eq!(trace.summary.drops, 3);
        assert_eq!(trace.summary.total_fuel, 0.0);
        assert!(trace
            .horizons
            .iter()
            .all(|h| h.status == SolveStatus::Optimal && h.dropped));
        let free = crate::model::expm(&(plant.a() * 6.0)).unwrap() * &x0;
        let final_state = DVector::from_vec(trace.summary.final_state.clone());
        assert!((final_state - free).norm() < 1e-8);
    }

    #[test]
    fn runs_are_deterministic() {
        let plant = harmonic_oscillator();
        let mut config = SimConfig::new(2, 2.0);
        config.num_intervals = 150;
        let channel = ChannelModel {
            bit_budget: 120,
            loss_prob: 0.3,
            seed: 77,
        };
        let x0 = dvector![0.8, -0.2];
        let t1 = run_closed_loop(&plant, &x0, &config, &channel).unwrap();
        let t2 = run_closed_loop(&plant, &x0, &config, &channel).unwrap();
        assert_eq!(t1.to_csv(), t2.to_csv());
        assert_eq!(
            serde_json::to_string(&t1).unwrap(),
            serde_json::to_string(&t2).unwrap()
        );
    }

    #[test]
    fn dropped_horizons_apply_zero_control() {
        let plant = double_integrator();
        let mut config = SimConfig::new(4, 2.0);
        config.num_intervals = 200;
        // Budget below any real packet size forces budget drops whenever
        // the solve produces switches.
        let channel = ChannelModel {
            bit_budget: 8,
            loss_prob: 0.0,
            seed: 0,
        };
        let trace = run_closed_loop(&plant, &dvector![0.3, 0.0], &config, &channel).unwrap();
        for h in &trace.horizons {
            if h.dropped {
                assert_eq!(h.fuel, 0.0);
                assert_eq!(h.support, 0.0);
                assert_eq!(h.packet_bits, 0);
                assert!(h
                    .applied
                    .channels
                    .iter()
                    .all(|c| c.switches.is_empty() && c.initial == Ternary::Zero));
            }
        }
        assert!(trace.horizons.iter().any(|h| h.dropped));
    }

    #[test]
    fn quantized_closed_loop_converges() {
        let plant = harmonic_oscillator();
        let mut config = SimConfig::new(1, 2.0 * std::f64::consts::PI);
        config.num_intervals = 700;
        config.bits = 12;
        let trace = run_closed_loop(
            &plant,
            &dvector![1.0, 0.0],
            &config,
            &ChannelModel::lossless(),
        )
        .unwrap();
        assert_eq!(trace.summary.drops, 0);
        assert!(
            trace.summary.final_norm <= 1e-2,
            "final norm {}",
            trace.summary.final_norm
        );
        assert!(trace.summary.converged);
    }

    #[test]
    fn lossless_single_horizon_tracks_open_loop() {
        // With no loss, no budget and fine quantization, the closed loop
        // must land within an order of magnitude of what the open-loop
        // extracted signal achieves.
        let plant = harmonic_oscillator();
        let horizon = 2.0 * std::f64::consts::PI;
        let x0 = dvector![1.0, 0.0];
        let problem = ControlProblem::new(
            plant.clone(),
            x0.clone(),
            horizon,
            700,
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        let program = build_reachability(&problem).unwrap();
        let solved = solve_l1(&program, &AdmmSettings::default()).unwrap();
        assert_eq!(solved.status, SolveStatus::Optimal);
        let (signal, _) = extract_switching(&solved.u, horizon, 0.25).unwrap();
        let mut open_loop = x0.clone();
        for (start, end, value) in signal.channels[0].segments(horizon) {
            let u = DVector::from_element(1, value.as_f64());
            open_loop =
                crate::model::propagate_segment(&plant, &open_loop, &u, end - start).unwrap();
        }
        let open_loop_error = open_loop.norm();

        for bits in [16u8, 20] {
            let mut config = SimConfig::new(1, horizon);
            config.num_intervals = 700;
            config.bits = bits;
            let trace = run_closed_loop(&plant, &x0, &config, &ChannelModel::lossless()).unwrap();
            assert!(
                trace.summary.final_norm <= 10.0 * open_loop_error.max(1e-9),
                "b={bits}: closed-loop error {} vs open-loop {}",
                trace.summary.final_norm,
                open_loop_error
            );
        }
    }

    #[test]
    fn unstable_plant_under_full_loss_diverges() {
        let plant =
            PlantModel::new(DMatrix::identity(2, 2) * 2.0, DMatrix::identity(2, 2)).unwrap();
        let mut config = SimConfig::new(10, 2.0);
        config.num_intervals = 100;
        let channel = ChannelModel {
            bit_budget: 0,
            loss_prob: 1.0,
            seed: 0,
        };
        let err = run_closed_loop(&plant, &dvector![1.0, 1.0], &config, &channel);
        match err {
            Err(SimError::Divergence { horizon, norm }) => {
                assert!(norm > DIVERGENCE_NORM);
                assert!(horizon > 0 && horizon < 10, "horizon = {horizon}");
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn sweep_rows_are_lossless_and_ordered() {
        let plant = harmonic_oscillator();
        let mut config = SimConfig::new(1, 2.0 * std::f64::consts::PI);
        config.num_intervals = 400;
        let rows = sweep_bits(&plant, &dvector![1.0, 0.0], &config, &[1, 4, 8, 12]).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].b, 1);
        assert_eq!(rows[3].b, 12);
        // Same switch structure costs strictly more bits at higher b.
        assert!(rows[1].total_bits < rows[2].total_bits);
        assert!(rows[2].total_bits < rows[3].total_bits);
        // One-bit switching times are far too coarse to land anywhere
        // near the origin.
        assert!(rows[3].final_error < rows[0].final_error);
        assert!(rows[3].final_error < rows[1].final_error);
    }

    #[test]
    fn uncontrollable_plant_is_refused() {
        let plant = PlantModel::new(DMatrix::identity(2, 2), dmatrix![1.0; 1.0]).unwrap();
        let config = SimConfig::new(1, 1.0);
        let err = run_closed_loop(
            &plant,
            &dvector![0.1, 0.1],
            &config,
            &ChannelModel::lossless(),
        );
        assert!(matches!(err, Err(SimError::InvalidConfig(_))));
    }

    #[test]
    fn csv_header_and_continuity() {
        let plant = double_integrator();
        let mut config = SimConfig::new(2, 2.0);
        config.num_intervals = 150;
        config.samples_per_horizon = 40;
        let trace = run_closed_loop(
            &plant,
            &dvector![0.2, 0.0],
            &config,
            &ChannelModel::lossless(),
        )
        .unwrap();
        let csv = trace.to_csv();
        assert!(csv.starts_with("t,x1,x2,u1\n"));
        // Time column strictly increasing.
        let times: Vec<f64> = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap().parse().unwrap())
            .collect();
        assert!(times.windows(2).all(|w| w[1] > w[0]));
        assert!((times.last().unwrap() - 4.0).abs() < 1e-9);
    }
}
