// Copyright 2026 Handsoff Contributors
// SPDX-License-Identifier: Apache-2.0

//! Switching-signal representation and structural checks.
//!
//! Grid controls coming out of the solver are converted to explicit
//! run-length (bang-off-bang) form here, checked against the structural
//! guarantees that hold for sparsest admissible controls (ternary
//! values, no direct sign flips, bounded switch count), and priced
//! against the theoretical bit budget for transmitting one horizon.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{self, ModelError, PlantModel};

#[derive(Debug, Error)]
pub enum StructureError {
    #[error("eps_level must lie in (0, 0.5), got {0}")]
    InvalidEpsLevel(f64),
    #[error("invalid switching signal: {0}")]
    InvalidSignal(String),
    #[error("grid must have at least one sample per channel")]
    EmptyGrid,
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
}

/// One of the three admissible control levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Ternary {
    NegOne,
    Zero,
    PosOne,
}

impl Ternary {
    pub fn as_f64(self) -> f64 {
        match self {
            Ternary::NegOne => -1.0,
            Ternary::Zero => 0.0,
            Ternary::PosOne => 1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Ternary::NegOne => -1,
            Ternary::Zero => 0,
            Ternary::PosOne => 1,
        }
    }

    pub fn is_zero(self) -> bool {
        self == Ternary::Zero
    }

    /// Nearest ternary level; half-way points round away from zero.
    pub fn nearest(x: f64) -> Ternary {
        if x >= 0.5 {
            Ternary::PosOne
        } else if x <= -0.5 {
            Ternary::NegOne
        } else {
            Ternary::Zero
        }
    }
}

impl From<Ternary> for i8 {
    fn from(v: Ternary) -> i8 {
        v.as_i8()
    }
}

impl TryFrom<i8> for Ternary {
    type Error = String;
    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            -1 => Ok(Ternary::NegOne),
            0 => Ok(Ternary::Zero),
            1 => Ok(Ternary::PosOne),
            other => Err(format!("control level must be -1, 0 or 1, got {other}")),
        }
    }
}

/// A switch event: at `time` the channel jumps to `value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, i8)", into = "(f64, i8)")]
pub struct SwitchEvent {
    pub time: f64,
    pub value: Ternary,
}

impl From<SwitchEvent> for (f64, i8) {
    fn from(e: SwitchEvent) -> (f64, i8) {
        (e.time, e.value.as_i8())
    }
}

impl TryFrom<(f64, i8)> for SwitchEvent {
    type Error = String;
    fn try_from(t: (f64, i8)) -> Result<Self, Self::Error> {
        Ok(SwitchEvent {
            time: t.0,
            value: Ternary::try_from(t.1)?,
        })
    }
}

/// Per-channel run-length form: initial level plus ordered switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSignal {
    #[serde(rename = "init")]
    pub initial: Ternary,
    pub switches: Vec<SwitchEvent>,
}

impl ChannelSignal {
    pub fn constant(value: Ternary) -> Self {
        Self {
            initial: value,
            switches: Vec::new(),
        }
    }

    /// Piecewise-constant segments `(start, end, value)` covering `[0, horizon]`.
    pub fn segments(&self, horizon: f64) -> Vec<(f64, f64, Ternary)> {
        let mut out = Vec::with_capacity(self.switches.len() + 1);
        let mut t = 0.0;
        let mut v = self.initial;
        for sw in &self.switches {
            out.push((t, sw.time, v));
            t = sw.time;
            v = sw.value;
        }
        out.push((t, horizon, v));
        out
    }

    /// Signal value at time `t` (right-continuous at switches).
    pub fn value_at(&self, t: f64) -> Ternary {
        let mut v = self.initial;
        for sw in &self.switches {
            if sw.time <= t {
                v = sw.value;
            } else {
                break;
            }
        }
        v
    }
}

/// A ternary piecewise-constant control signal over `[0, T]`, one
/// run-length channel per input.
///
/// Serializes as `{"T": ..., "channels": [{"init": i, "switches": [[t, v], ...]}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingSignal {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub channels: Vec<ChannelSignal>,
}

impl SwitchingSignal {
    /// The all-off signal on `m` channels.
    pub fn zero(m: usize, horizon: f64) -> Self {
        Self {
            horizon,
            channels: vec![ChannelSignal::constant(Ternary::Zero); m],
        }
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn total_switches(&self) -> usize {
        self.channels.iter().map(|c| c.switches.len()).sum()
    }

    /// Checks the representation invariants: positive horizon, at least
    /// one channel, switch times strictly increasing inside `(0, T)`,
    /// and adjacent values distinct.
    pub fn validate(&self) -> Result<(), StructureError> {
        if self.horizon <= 0.0 || !self.horizon.is_finite() {
            return Err(StructureError::InvalidHorizon(self.horizon));
        }
        if self.channels.is_empty() {
            return Err(StructureError::InvalidSignal("no channels".into()));
        }
        for (ci, ch) in self.channels.iter().enumerate() {
            let mut prev_time = 0.0;
            let mut prev_value = ch.initial;
            for (si, sw) in ch.switches.iter().enumerate() {
                if !sw.time.is_finite() || sw.time <= prev_time || sw.time >= self.horizon {
                    return Err(StructureError::InvalidSignal(format!(
                        "channel {ci} switch {si}: time {} out of order or outside (0, {})",
                        sw.time, self.horizon
                    )));
                }
                if sw.value == prev_value {
                    return Err(StructureError::InvalidSignal(format!(
                        "channel {ci} switch {si}: value repeats {}",
                        sw.value.as_i8()
                    )));
                }
                prev_time = sw.time;
                prev_value = sw.value;
            }
        }
        Ok(())
    }

    /// Dense sampling on a uniform `n`-cell grid: sample `k` carries the
    /// value on `[k dt, (k+1) dt)`.
    pub fn sample_grid(&self, n: usize) -> DMatrix<f64> {
        let m = self.num_channels();
        let dt = self.horizon / n as f64;
        let mut out = DMatrix::zeros(n, m);
        for (ci, ch) in self.channels.iter().enumerate() {
            let mut v = ch.initial;
            let mut next = 0usize;
            for k in 0..n {
                let t = k as f64 * dt;
                while next < ch.switches.len() && ch.switches[next].time <= t {
                    v = ch.switches[next].value;
                    next += 1;
                }
                out[(k, ci)] = v.as_f64();
            }
        }
        out
    }
}

/// Result of checking a switching signal against the structural
/// guarantees for a given plant.
#[derive(Debug, Clone, Serialize)]
pub struct StructureReport {
    pub per_channel_switches: Vec<usize>,
    pub total_switches: usize,
    /// The switch-count ceiling `2 n m (1 + T omega / pi)`.
    pub bound: f64,
    /// True when the hypotheses behind the ceiling hold: `(A, B)`
    /// controllable and `A` nonsingular.
    pub bound_applicable: bool,
    /// Number of direct `+1 <-> -1` transitions.
    pub sign_flip_violations: usize,
    /// Fraction of grid samples that sat within `eps_level` of a ternary
    /// level during extraction (1.0 for synthetic signals).
    pub bang_bang_fraction: f64,
}

/// Quantizes an `N x m` grid of control samples to ternary levels, merges
/// runs, and returns the run-length signal together with the fraction of
/// samples that were within `eps_level` of a ternary level. Switch times
/// sit on the left edge of the first sample of each new run.
pub fn extract_switching(
    samples: &DMatrix<f64>,
    horizon: f64,
    eps_level: f64,
) -> Result<(SwitchingSignal, f64), StructureError> {
    if !eps_level.is_finite() || eps_level <= 0.0 || eps_level >= 0.5 {
        return Err(StructureError::InvalidEpsLevel(eps_level));
    }
    if horizon <= 0.0 || !horizon.is_finite() {
        return Err(StructureError::InvalidHorizon(horizon));
    }
    let n = samples.nrows();
    let m = samples.ncols();
    if n == 0 || m == 0 {
        return Err(StructureError::EmptyGrid);
    }
    let dt = horizon / n as f64;
    let mut channels = Vec::with_capacity(m);
    let mut off_level = 0usize;
    for ci in 0..m {
        let mut current = Ternary::nearest(samples[(0, ci)]);
        if (samples[(0, ci)] - current.as_f64()).abs() > eps_level {
            off_level += 1;
        }
        let mut ch = ChannelSignal::constant(current);
        for k in 1..n {
            let x = samples[(k, ci)];
            let q = Ternary::nearest(x);
            if (x - q.as_f64()).abs() > eps_level {
                off_level += 1;
            }
            if q != current {
                ch.switches.push(SwitchEvent {
                    time: k as f64 * dt,
                    value: q,
                });
                current = q;
            }
        }
        channels.push(ch);
    }
    let fraction = 1.0 - off_level as f64 / (n * m) as f64;
    Ok((SwitchingSignal { horizon, channels }, fraction))
}

/// Checks a switching signal against the structural guarantees: counts
/// switches per channel, compares against `2 n m (1 + T omega / pi)`,
/// and counts direct sign flips. `bang_bang_fraction` is carried through
/// from extraction (pass 1.0 for signals that are ternary by construction).
pub fn verify_structure(
    signal: &SwitchingSignal,
    plant: &PlantModel,
    bang_bang_fraction: f64,
) -> Result<StructureReport, ModelError> {
    let info = model::spectral_info(plant.a())?;
    let (controllable, _) = model::is_controllable(plant);
    let n = plant.state_dim() as f64;
    let m = plant.input_dim() as f64;
    let bound = 2.0 * n * m * (1.0 + signal.horizon * info.omega / std::f64::consts::PI);
    let per_channel: Vec<usize> = signal.channels.iter().map(|c| c.switches.len()).collect();
    let total = per_channel.iter().sum();
    let mut sign_flips = 0usize;
    for ch in &signal.channels {
        let mut prev = ch.initial;
        for sw in &ch.switches {
            if prev.as_i8() as i32 * sw.value.as_i8() as i32 == -1 {
                sign_flips += 1;
            }
            prev = sw.value;
        }
    }
    Ok(StructureReport {
        per_channel_switches: per_channel,
        total_switches: total,
        bound,
        bound_applicable: controllable && info.a_nonsingular,
        sign_flip_violations: sign_flips,
        bang_bang_fraction,
    })
}

/// Theoretical budget for transmitting one horizon of a sparsest
/// admissible control with `b`-bit switching times: total bits
/// `1 + 2 n m b (1 + T omega / pi)` and the corresponding rate
/// `1/T + 2 n m b (1/T + omega / pi)` in bits per second.
pub fn theoretical_bits(n: usize, m: usize, b: u32, horizon: f64, omega: f64) -> (f64, f64) {
    debug_assert!(n >= 1 && m >= 1 && b >= 1 && horizon > 0.0 && omega >= 0.0);
    let nmb = 2.0 * n as f64 * m as f64 * b as f64;
    let pi = std::f64::consts::PI;
    let total = 1.0 + nmb * (1.0 + horizon * omega / pi);
    let rate = 1.0 / horizon + nmb * (1.0 / horizon + omega / pi);
    (total, rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    fn double_integrator() -> PlantModel {
        PlantModel::new(dmatrix![0.0, 1.0; 0.0, 0.0], dmatrix![0.0; 1.0]).unwrap()
    }

    fn harmonic_oscillator() -> PlantModel {
        PlantModel::new(dmatrix![0.0, 1.0; -1.0, 0.0], dmatrix![0.0; 1.0]).unwrap()
    }

    #[test]
    fn extract_all_zero() {
        let u = DMatrix::zeros(50, 1);
        let (sig, frac) = extract_switching(&u, 1.0, 0.25).unwrap();
        assert_eq!(sig.channels[0].initial, Ternary::Zero);
        assert!(sig.channels[0].switches.is_empty());
        assert_eq!(frac, 1.0);
    }

    #[test]
    fn extract_three_runs() {
        let n = 400;
        let u = DMatrix::from_fn(n, 1, |k, _| {
            if k < 25 {
                -1.0
            } else if k < 375 {
                0.0
            } else {
                1.0
            }
        });
        let (sig, frac) = extract_switching(&u, 4.0, 0.25).unwrap();
        assert_eq!(frac, 1.0);
        let ch = &sig.channels[0];
        assert_eq!(ch.initial, Ternary::NegOne);
        assert_eq!(ch.switches.len(), 2);
        assert_eq!(ch.switches[0].time, 0.25);
        assert_eq!(ch.switches[0].value, Ternary::Zero);
        assert_eq!(ch.switches[1].time, 3.75);
        assert_eq!(ch.switches[1].value, Ternary::PosOne);
    }

    #[test]
    fn extract_half_level_sample() {
        let n = 10;
        let mut u = DMatrix::zeros(n, 1);
        u[(4, 0)] = 0.5;
        let (sig, frac) = extract_switching(&u, 1.0, 0.1).unwrap();
        // 0.5 quantizes up to +1 and counts as off-level.
        assert!((frac - (1.0 - 1.0 / n as f64)).abs() < 1e-12);
        assert_eq!(sig.channels[0].switches.len(), 2);
        assert_eq!(sig.channels[0].switches[0].value, Ternary::PosOne);
    }

    #[test]
    fn extract_rejects_bad_eps() {
        let u = DMatrix::zeros(4, 1);
        assert!(extract_switching(&u, 1.0, 0.0).is_err());
        assert!(extract_switching(&u, 1.0, 0.5).is_err());
    }

    #[test]
    fn verify_harmonic_oscillator_bound() {
        let plant = harmonic_oscillator();
        let sig = SwitchingSignal {
            horizon: std::f64::consts::PI,
            channels: vec![ChannelSignal {
                initial: Ternary::Zero,
                switches: vec![
                    SwitchEvent {
                        time: 0.5,
                        value: Ternary::PosOne,
                    },
                    SwitchEvent {
                        time: 1.0,
                        value: Ternary::Zero,
                    },
                    SwitchEvent {
                        time: 2.0,
                        value: Ternary::NegOne,
                    },
                    SwitchEvent {
                        time: 2.5,
                        value: Ternary::Zero,
                    },
                ],
            }],
        };
        sig.validate().unwrap();
        let report = verify_structure(&sig, &plant, 1.0).unwrap();
        // omega = 1, T = pi: bound = 2*2*1*(1+1) = 8.
        assert!((report.bound - 8.0).abs() < 1e-9);
        assert!(report.bound_applicable);
        assert_eq!(report.total_switches, 4);
        assert!(report.total_switches as f64 <= report.bound);
        assert_eq!(report.sign_flip_violations, 0);
    }

    #[test]
    fn verify_singular_a_not_applicable() {
        let sig = SwitchingSignal::zero(1, 4.0);
        let report = verify_structure(&sig, &double_integrator(), 1.0).unwrap();
        assert!(!report.bound_applicable);
        assert!((report.bound - 4.0).abs() < 1e-12); // omega = 0
    }

    #[test]
    fn verify_counts_sign_flips() {
        let sig = SwitchingSignal {
            horizon: 1.0,
            channels: vec![ChannelSignal {
                initial: Ternary::PosOne,
                switches: vec![SwitchEvent {
                    time: 0.5,
                    value: Ternary::NegOne,
                }],
            }],
        };
        let report = verify_structure(&sig, &double_integrator(), 1.0).unwrap();
        assert_eq!(report.sign_flip_violations, 1);
    }

    #[test]
    fn theoretical_bits_worked_examples() {
        let (total, _) = theoretical_bits(2, 1, 8, std::f64::consts::PI, 1.0);
        assert_eq!(total, 65.0);
        let (total, rate) = theoretical_bits(1, 1, 1, 1.0, 0.0);
        assert_eq!(total, 3.0);
        assert_eq!(rate, 3.0);
        // At omega = 0: total = T * rate.
        let (total, rate) = theoretical_bits(3, 2, 6, 2.5, 0.0);
        assert!((total - 2.5 * rate).abs() < 1e-12);
    }

    #[test]
    fn theoretical_bits_monotone() {
        let base = theoretical_bits(2, 1, 8, 2.0, 1.0).0;
        assert!(theoretical_bits(3, 1, 8, 2.0, 1.0).0 >= base);
        assert!(theoretical_bits(2, 2, 8, 2.0, 1.0).0 >= base);
        assert!(theoretical_bits(2, 1, 9, 2.0, 1.0).0 >= base);
        assert!(theoretical_bits(2, 1, 8, 2.5, 1.0).0 >= base);
        assert!(theoretical_bits(2, 1, 8, 2.0, 1.5).0 >= base);
    }

    #[test]
    fn signal_json_round_trip() {
        let sig = SwitchingSignal {
            horizon: 4.0,
            channels: vec![ChannelSignal {
                initial: Ternary::NegOne,
                switches: vec![
                    SwitchEvent {
                        time: 0.25,
                        value: Ternary::Zero,
                    },
                    SwitchEvent {
                        time: 3.75,
                        value: Ternary::PosOne,
                    },
                ],
            }],
        };
        let json = serde_json::to_string(&sig).unwrap();
        assert!(json.contains("\"T\":4.0"));
        assert!(json.contains("\"init\":-1"));
        assert!(json.contains("[0.25,0]"));
        let back: SwitchingSignal = serde_json::from_str(&json).unwrap();
        assert_eq!(back, sig);
        // Out-of-range level is rejected on parse.
        let bad = json.replace("\"init\":-1", "\"init\":-2");
        assert!(serde_json::from_str::<SwitchingSignal>(&bad).is_err());
    }

    #[test]
    fn validate_catches_violations() {
        let mut sig = SwitchingSignal::zero(1, 1.0);
        sig.channels[0].switches = vec![SwitchEvent {
            time: 0.0,
            value: Ternary::PosOne,
        }];
        assert!(sig.validate().is_err()); // time not in (0, T)
        sig.channels[0].switches = vec![SwitchEvent {
            time: 0.5,
            value: Ternary::Zero,
        }];
        assert!(sig.validate().is_err()); // repeated value
        sig.channels[0].switches = vec![
            SwitchEvent {
                time: 0.6,
                value: Ternary::PosOne,
            },
            SwitchEvent {
                time: 0.4,
                value: Ternary::Zero,
            },
        ];
        assert!(sig.validate().is_err()); // out of order
    }

    // Strategy: signals whose switch times sit on a sampling grid with
    // every run at least one cell long.
    fn grid_signal_strategy() -> impl Strategy<Value = (SwitchingSignal, usize)> {
        (1usize..=3, 1usize..=6, 20usize..=64).prop_flat_map(|(m, switches, n)| {
            let cells = proptest::collection::vec(
                proptest::sample::subsequence((1..n).collect::<Vec<_>>(), switches.min(n - 1)),
                m,
            );
            let inits = proptest::collection::vec(-1i8..=1, m);
            let choices = proptest::collection::vec(proptest::bool::ANY, m * switches);
            (cells, inits, choices, Just(n)).prop_map(|(cells, inits, choices, n)| {
                let horizon = 2.0;
                let dt = horizon / n as f64;
                let mut channels = Vec::new();
                for (ci, cell_list) in cells.iter().enumerate() {
                    let initial = Ternary::try_from(inits[ci]).unwrap();
                    let mut prev = initial;
                    let mut sw = Vec::new();
                    for (si, &cell) in cell_list.iter().enumerate() {
                        // Pick any level different from prev.
                        let options: Vec<Ternary> =
                            [Ternary::NegOne, Ternary::Zero, Ternary::PosOne]
                                .into_iter()
                                .filter(|v| *v != prev)
                                .collect();
                        let pick = choices[ci * cell_list.len().max(1) + si % cell_list.len()];
                        let v = options[if pick { 0 } else { 1 }];
                        sw.push(SwitchEvent {
                            time: cell as f64 * dt,
                            value: v,
                        });
                        prev = v;
                    }
                    channels.push(ChannelSignal {
                        initial,
                        switches: sw,
                    });
                }
                (SwitchingSignal { horizon, channels }, n)
            })
        })
    }

    proptest! {
        #[test]
        fn extraction_round_trip((sig, n) in grid_signal_strategy()) {
            sig.validate().unwrap();
            let samples = sig.sample_grid(n);
            let (back, frac) = extract_switching(&samples, sig.horizon, 0.25).unwrap();
            prop_assert_eq!(frac, 1.0);
            prop_assert_eq!(back, sig);
        }
    }
}
