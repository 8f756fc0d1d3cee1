// Copyright 2026 Handsoff Contributors
// SPDX-License-Identifier: Apache-2.0

//! Brute-force bang-off-bang oracle.
//!
//! Independent of the convex machinery in the parent module: enumerates
//! every ternary piecewise-constant signal with up to `k_max` switches
//! on a uniform time grid, keeps the candidates whose exact propagation
//! lands near the origin, then refines the switch times of the kept
//! candidates by damped Gauss-Newton on the terminal map until the
//! terminal state is at numerical zero. The minimum-support certificate
//! among the refined candidates is returned.
//!
//! Restricted to single-input plants with at most two states; the
//! enumeration is exponential in the switch count.

use nalgebra::{DMatrix, DVector};

use crate::model::{self, PlantModel};
use crate::structure::{ChannelSignal, SwitchEvent, SwitchingSignal, Ternary};

use super::SolverError;

/// Certificate produced by the exhaustive search.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub feasible: bool,
    /// The minimum-support signal, when one was found.
    pub signal: Option<SwitchingSignal>,
    /// Support measure of the certificate (infinite when infeasible).
    pub j0: f64,
    /// L1 cost of the certificate; equals `j0` for ternary signals.
    pub j1: f64,
    /// Norm of the certificate's terminal state under exact propagation.
    pub terminal_norm: f64,
    /// The feasibility tolerance the certificate is held to.
    pub tolerance: f64,
}

const MAX_STATE_DIM: usize = 2;
const MAX_SWITCHES: usize = 4;
const MAX_GRID: usize = 200;
const MIN_GRID: usize = 4;
const POOL_PER_PATTERN: usize = 2;
const POLISH_ITERS: usize = 60;

struct Candidate {
    values: Vec<i8>,
    indices: Vec<usize>,
    j0_grid: f64,
}

/// All value sequences `(v_0, ..., v_s)` with levels in {-1, 0, 1} and
/// adjacent entries distinct.
fn value_patterns(switches: usize) -> Vec<Vec<i8>> {
    let mut out: Vec<Vec<i8>> = vec![vec![-1], vec![0], vec![1]];
    for _ in 0..switches {
        let mut next = Vec::with_capacity(out.len() * 2);
        for p in &out {
            let last = *p.last().unwrap();
            for v in [-1i8, 0, 1] {
                if v != last {
                    let mut q = p.clone();
                    q.push(v);
                    next.push(q);
                }
            }
        }
        out = next;
    }
    out
}

fn pool_insert(pool: &mut Vec<Candidate>, cand: Candidate) {
    let pos = pool
        .binary_search_by(|c| c.j0_grid.total_cmp(&cand.j0_grid))
        .unwrap_or_else(|e| e);
    pool.insert(pos, cand);
    pool.truncate(POOL_PER_PATTERN);
}

/// `H(t) = Phi(T - t) Psi(t) B`: the terminal-state contribution of a
/// unit control held on `[0, t]`.
fn unit_hold_response(
    plant: &PlantModel,
    horizon: f64,
    t: f64,
) -> Result<DVector<f64>, SolverError> {
    let n = plant.state_dim();
    if t <= 0.0 {
        return Ok(DVector::zeros(n));
    }
    let psi_b = model::discretize_zoh(plant, t)?.bd.column(0).into_owned();
    if horizon - t <= 0.0 {
        return Ok(psi_b);
    }
    let phi = model::expm(&(plant.a() * (horizon - t)))?;
    Ok(phi * psi_b)
}

/// Damped Gauss-Newton on the switch times of a fixed value pattern,
/// driving the terminal state to zero. Returns the terminal norm on
/// success.
fn polish_times(
    plant: &PlantModel,
    x0: &DVector<f64>,
    horizon: f64,
    values: &[i8],
    times: &mut [f64],
    tol: f64,
    step_cap: f64,
) -> Option<f64> {
    let n = plant.state_dim();
    let s = times.len();
    let phi_t = model::expm(&(plant.a() * horizon)).ok()?;
    let h_full = unit_hold_response(plant, horizon, horizon).ok()?;
    let fixed = &phi_t * x0 + &h_full * (values[s] as f64);
    let d: Vec<f64> = (1..=s)
        .map(|i| (values[i - 1] - values[i]) as f64)
        .collect();
    let margin = 1e-9 * horizon;

    for _ in 0..POLISH_ITERS {
        let mut f = fixed.clone();
        for i in 0..s {
            let h = unit_hold_response(plant, horizon, times[i]).ok()?;
            f += h * d[i];
        }
        if f.norm() <= tol {
            return Some(f.norm());
        }
        if s == 0 {
            return None;
        }
        let mut jac = DMatrix::<f64>::zeros(n, s);
        for i in 0..s {
            let phi = model::expm(&(plant.a() * (horizon - times[i]))).ok()?;
            let col = phi * plant.b().column(0) * d[i];
            jac.set_column(i, &col);
        }
        let delta = jac.svd(true, true).solve(&(-f), 1e-12).ok()?;
        let biggest = delta.amax();
        let scale = if biggest > step_cap {
            step_cap / biggest
        } else {
            1.0
        };
        for i in 0..s {
            times[i] += scale * delta[i];
        }
        // Keep times ordered and strictly inside (0, T).
        for i in 0..s {
            let lo = if i == 0 {
                margin
            } else {
                times[i - 1] + margin
            };
            times[i] = times[i].max(lo);
        }
        for i in (0..s).rev() {
            let hi = if i + 1 == s {
                horizon - margin
            } else {
                times[i + 1] - margin
            };
            times[i] = times[i].min(hi);
        }
        if times.windows(2).any(|w| w[1] <= w[0])
            || (s > 0 && (times[0] <= 0.0 || times[s - 1] >= horizon))
        {
            return None;
        }
    }
    None
}

fn build_signal(horizon: f64, values: &[i8], times: &[f64]) -> SwitchingSignal {
    let initial = Ternary::try_from(values[0]).unwrap();
    let switches = times
        .iter()
        .zip(values.iter().skip(1))
        .map(|(&t, &v)| SwitchEvent {
            time: t,
            value: Ternary::try_from(v).unwrap(),
        })
        .collect();
    SwitchingSignal {
        horizon,
        channels: vec![ChannelSignal { initial, switches }],
    }
}

fn support_measure(horizon: f64, values: &[i8], times: &[f64]) -> f64 {
    let s = times.len();
    let mut total = 0.0;
    for i in 0..=s {
        let start = if i == 0 { 0.0 } else { times[i - 1] };
        let end = if i == s { horizon } else { times[i] };
        if values[i] != 0 {
            total += end - start;
        }
    }
    total
}

/// Propagates a single-channel signal segment by segment and returns the
/// terminal state norm.
fn propagate_terminal_norm(
    plant: &PlantModel,
    x0: &DVector<f64>,
    signal: &SwitchingSignal,
) -> Result<f64, SolverError> {
    let mut x = x0.clone();
    for (start, end, value) in signal.channels[0].segments(signal.horizon) {
        let u = DVector::from_element(1, value.as_f64());
        x = model::propagate_segment(plant, &x, &u, end - start)?;
    }
    Ok(x.norm())
}

/// Exhaustive minimum-support search over ternary signals with at most
/// `k_max` switches, switch times seeded on a uniform grid of `grid`
/// cells and refined off-grid. Guard limits: single input, `n <= 2`,
/// `k_max <= 4`, `4 <= grid <= 200`.
pub fn oracle_bang_off_bang(
    plant: &PlantModel,
    x0: &DVector<f64>,
    horizon: f64,
    k_max: usize,
    grid: usize,
) -> Result<OracleResult, SolverError> {
    if plant.input_dim() != 1 {
        return Err(SolverError::OracleGuard(format!(
            "single-input plants only, got m = {}",
            plant.input_dim()
        )));
    }
    if plant.state_dim() > MAX_STATE_DIM {
        return Err(SolverError::OracleGuard(format!(
            "state dimension at most {MAX_STATE_DIM}, got n = {}",
            plant.state_dim()
        )));
    }
    if k_max > MAX_SWITCHES {
        return Err(SolverError::OracleGuard(format!(
            "at most {MAX_SWITCHES} switches, got k_max = {k_max}"
        )));
    }
    if !(MIN_GRID..=MAX_GRID).contains(&grid) {
        return Err(SolverError::OracleGuard(format!(
            "grid must lie in [{MIN_GRID}, {MAX_GRID}], got {grid}"
        )));
    }
    if horizon <= 0.0 || !horizon.is_finite() {
        return Err(SolverError::InvalidProblem(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if x0.len() != plant.state_dim() || x0.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::InvalidProblem("bad initial state".into()));
    }

    let n = plant.state_dim();
    let delta = horizon / grid as f64;
    let disc = model::discretize_zoh(plant, delta)?;

    // Terminal kernel of each grid cell: cell j contributes
    // Ad^(grid-1-j) Bd per unit of control value.
    let mut kern = vec![[0.0f64; 2]; grid];
    {
        let mut block = disc.bd.column(0).into_owned();
        for j in (0..grid).rev() {
            kern[j] = [block[0], if n > 1 { block[1] } else { 0.0 }];
            if j > 0 {
                block = &disc.ad * block;
            }
        }
    }
    let mut sx = vec![0.0f64; grid + 1];
    let mut sy = vec![0.0f64; grid + 1];
    for j in 0..grid {
        sx[j + 1] = sx[j] + kern[j][0];
        sy[j + 1] = sy[j] + kern[j][1];
    }
    // Suffix ranges of the prefix sums over valid switch indices, for
    // pruning the innermost loop.
    let mut suf_min_x = vec![f64::INFINITY; grid + 1];
    let mut suf_max_x = vec![f64::NEG_INFINITY; grid + 1];
    let mut suf_min_y = vec![f64::INFINITY; grid + 1];
    let mut suf_max_y = vec![f64::NEG_INFINITY; grid + 1];
    for j in (1..grid).rev() {
        suf_min_x[j] = sx[j].min(suf_min_x[j + 1]);
        suf_max_x[j] = sx[j].max(suf_max_x[j + 1]);
        suf_min_y[j] = sy[j].min(suf_min_y[j + 1]);
        suf_max_y[j] = sy[j].max(suf_max_y[j + 1]);
    }

    let mut free = x0.clone();
    for _ in 0..grid {
        free = &disc.ad * free;
    }
    let base_free = [free[0], if n > 1 { free[1] } else { 0.0 }];

    let max_kernel = kern
        .iter()
        .map(|k| (k[0] * k[0] + k[1] * k[1]).sqrt())
        .fold(0.0, f64::max);
    // Snapping a continuous switch onto the grid moves the terminal state
    // by at most ~2 kernels per switch; accept within twice that.
    let tol_grid = 2.0 * (k_max.max(1) as f64) * max_kernel + 1e-12 * (1.0 + x0.norm());
    let tol_polish = 1e-8 * (1.0 + x0.norm());
    let tolerance = 1e-6 * (1.0 + x0.norm());

    let mut patterns: Vec<Vec<i8>> = Vec::new();
    for s in 0..=k_max {
        patterns.extend(value_patterns(s));
    }
    let mut pools: Vec<Vec<Candidate>> = patterns.iter().map(|_| Vec::new()).collect();

    for (pi, pat) in patterns.iter().enumerate() {
        let s = pat.len() - 1;
        let bx = base_free[0] + pat[s] as f64 * sx[grid];
        let by = base_free[1] + pat[s] as f64 * sy[grid];
        let d: Vec<f64> = (1..=s).map(|i| (pat[i - 1] - pat[i]) as f64).collect();
        let pool = &mut pools[pi];

        let accept = |idxs: &[usize], pool: &mut Vec<Candidate>| {
            let mut j0 = 0.0;
            for i in 0..=s {
                let start = if i == 0 { 0 } else { idxs[i - 1] };
                let end = if i == s { grid } else { idxs[i] };
                if pat[i] != 0 {
                    j0 += (end - start) as f64 * delta;
                }
            }
            pool_insert(
                pool,
                Candidate {
                    values: pat.clone(),
                    indices: idxs.to_vec(),
                    j0_grid: j0,
                },
            );
        };

        // Positive/negative parts of the remaining coefficients after each
        // level; the unplaced terms d_i * S[g_i] then range inside
        // [pos * suf_min + neg * suf_max, pos * suf_max + neg * suf_min]
        // for any start index, which prunes whole subtrees.
        let mut pos_rest = vec![0.0f64; s + 1];
        let mut neg_rest = vec![0.0f64; s + 1];
        for level in (0..s).rev() {
            pos_rest[level] = pos_rest[level + 1] + d[level].max(0.0);
            neg_rest[level] = neg_rest[level + 1] + d[level].min(0.0);
        }
        // `level` terms are already placed; remaining indices start at `lo`.
        let reachable = |px: f64, py: f64, lo: usize, level: usize| -> bool {
            if lo >= grid {
                return false;
            }
            let (p, ng) = (pos_rest[level], neg_rest[level]);
            let xa = px + p * suf_min_x[lo] + ng * suf_max_x[lo];
            let xb = px + p * suf_max_x[lo] + ng * suf_min_x[lo];
            if xa > tol_grid || xb < -tol_grid {
                return false;
            }
            let ya = py + p * suf_min_y[lo] + ng * suf_max_y[lo];
            let yb = py + p * suf_max_y[lo] + ng * suf_min_y[lo];
            ya <= tol_grid && yb >= -tol_grid
        };

        match s {
            0 => {
                if bx.abs() <= tol_grid && by.abs() <= tol_grid {
                    accept(&[], pool);
                }
            }
            1 => {
                if reachable(bx, by, 1, 0) {
                    for g1 in 1..grid {
                        let rx = bx + d[0] * sx[g1];
                        if rx.abs() > tol_grid {
                            continue;
                        }
                        let ry = by + d[0] * sy[g1];
                        if ry.abs() <= tol_grid {
                            accept(&[g1], pool);
                        }
                    }
                }
            }
            2 => {
                if reachable(bx, by, 1, 0) {
                    for g1 in 1..grid - 1 {
                        let p1x = bx + d[0] * sx[g1];
                        let p1y = by + d[0] * sy[g1];
                        if !reachable(p1x, p1y, g1 + 1, 1) {
                            continue;
                        }
                        for g2 in g1 + 1..grid {
                            let rx = p1x + d[1] * sx[g2];
                            if rx.abs() > tol_grid {
                                continue;
                            }
                            let ry = p1y + d[1] * sy[g2];
                            if ry.abs() <= tol_grid {
                                accept(&[g1, g2], pool);
                            }
                        }
                    }
                }
            }
            3 => {
                if reachable(bx, by, 1, 0) {
                    for g1 in 1..grid - 2 {
                        let p1x = bx + d[0] * sx[g1];
                        let p1y = by + d[0] * sy[g1];
                        if !reachable(p1x, p1y, g1 + 1, 1) {
                            continue;
                        }
                        for g2 in g1 + 1..grid - 1 {
                            let p2x = p1x + d[1] * sx[g2];
                            let p2y = p1y + d[1] * sy[g2];
                            if !reachable(p2x, p2y, g2 + 1, 2) {
                                continue;
                            }
                            for g3 in g2 + 1..grid {
                                let rx = p2x + d[2] * sx[g3];
                                if rx.abs() > tol_grid {
                                    continue;
                                }
                                let ry = p2y + d[2] * sy[g3];
                                if ry.abs() <= tol_grid {
                                    accept(&[g1, g2, g3], pool);
                                }
                            }
                        }
                    }
                }
            }
            4 => {
                if reachable(bx, by, 1, 0) {
                    for g1 in 1..grid.saturating_sub(3) {
                        let p1x = bx + d[0] * sx[g1];
                        let p1y = by + d[0] * sy[g1];
                        if !reachable(p1x, p1y, g1 + 1, 1) {
                            continue;
                        }
                        for g2 in g1 + 1..grid - 2 {
                            let p2x = p1x + d[1] * sx[g2];
                            let p2y = p1y + d[1] * sy[g2];
                            if !reachable(p2x, p2y, g2 + 1, 2) {
                                continue;
                            }
                            for g3 in g2 + 1..grid - 1 {
                                let p3x = p2x + d[2] * sx[g3];
                                let p3y = p2y + d[2] * sy[g3];
                                if !reachable(p3x, p3y, g3 + 1, 3) {
                                    continue;
                                }
                                for g4 in g3 + 1..grid {
                                    let rx = p3x + d[3] * sx[g4];
                                    if rx.abs() > tol_grid {
                                        continue;
                                    }
                                    let ry = p3y + d[3] * sy[g4];
                                    if ry.abs() <= tol_grid {
                                        accept(&[g1, g2, g3, g4], pool);
                                    }
                                }
                            }
                        }
                    }
                }
            }
            _ => unreachable!("guard limits k_max"),
        }
    }

    // Refine the pooled candidates in ascending grid-support order; a
    // candidate far above the best refined support cannot win, since
    // refinement only moves switch times within a few grid cells.
    let mut queue: Vec<&Candidate> = pools.iter().flatten().collect();
    queue.sort_by(|a, b| a.j0_grid.total_cmp(&b.j0_grid));
    let skip_margin = 6.0 * k_max.max(1) as f64 * delta;
    let mut best: Option<(f64, usize, SwitchingSignal, f64)> = None;
    {
        for cand in queue {
            if let Some((best_j0, _, _, _)) = &best {
                if cand.j0_grid > best_j0 + skip_margin {
                    continue;
                }
            }
            let mut times: Vec<f64> = cand.indices.iter().map(|&g| g as f64 * delta).collect();
            let polished = polish_times(
                plant,
                x0,
                horizon,
                &cand.values,
                &mut times,
                tol_polish,
                delta,
            );
            if polished.is_none() {
                continue;
            }
            let signal = build_signal(horizon, &cand.values, &times);
            if signal.validate().is_err() {
                continue;
            }
            let terminal = propagate_terminal_norm(plant, x0, &signal)?;
            if terminal > tolerance {
                continue;
            }
            let j0 = support_measure(horizon, &cand.values, &times);
            let switches = times.len();
            let better = match &best {
                None => true,
                Some((best_j0, best_sw, _, _)) => {
                    j0 < best_j0 - 1e-12 || (j0 < best_j0 + 1e-12 && switches < *best_sw)
                }
            };
            if better {
                best = Some((j0, switches, signal, terminal));
            }
        }
    }

    match best {
        Some((j0, _, signal, terminal)) => Ok(OracleResult {
            feasible: true,
            signal: Some(signal),
            j0,
            j1: j0,
            terminal_norm: terminal,
            tolerance,
        }),
        None => Ok(OracleResult {
            feasible: false,
            signal: None,
            j0: f64::INFINITY,
            j1: f64::INFINITY,
            terminal_norm: f64::INFINITY,
            tolerance,
        }),
    }
}
