// Copyright 2026 Handsoff Contributors
// SPDX-License-Identifier: Apache-2.0

//! Discretized reachability program and the weighted-L1 solve.
//!
//! The continuous problem (steer `x0` to the origin in time `T` with
//! `|u_i(t)| <= 1` while minimizing the weighted L1 cost) is discretized
//! with piecewise-constant controls on a uniform `N`-interval grid. The
//! terminal condition becomes a linear system `G u = c`, and the solve
//! is a two-block operator splitting: exact projection onto the affine
//! set alternating with a weighted soft-threshold clipped to the box.

mod oracle;

pub use oracle::{oracle_bang_off_bang, OracleResult};

use nalgebra::{DMatrix, DVector, Dyn};
use serde::Serialize;
use thiserror::Error;

use crate::model::{self, ModelError, PlantModel};

/// Grid values with magnitude below this count as "off" when measuring
/// support.
pub const DEFAULT_L0_THRESHOLD: f64 = 1e-3;

/// Magnitude bound of every control sample.
pub const BOX_BOUND: f64 = 1.0;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error(
        "degenerate reachability program (G G^T is not positive definite): \
         check controllability or increase the grid size"
    )]
    DegenerateProgram,
    #[error("no feasible horizon found below {cap}")]
    UnboundedSearch { cap: f64 },
    #[error("oracle complexity guard exceeded: {0}")]
    OracleGuard(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Steering task: drive `x0` to the origin over `[0, T]` on an
/// `N`-interval grid with per-channel weights `lambda`.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    pub plant: PlantModel,
    pub x0: DVector<f64>,
    pub horizon: f64,
    pub num_intervals: usize,
    pub weights: DVector<f64>,
}

impl ControlProblem {
    pub fn new(
        plant: PlantModel,
        x0: DVector<f64>,
        horizon: f64,
        num_intervals: usize,
        weights: DVector<f64>,
    ) -> Result<Self, SolverError> {
        if horizon <= 0.0 || !horizon.is_finite() {
            return Err(SolverError::InvalidProblem(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if x0.len() != plant.state_dim() {
            return Err(SolverError::InvalidProblem(format!(
                "x0 has length {}, expected {}",
                x0.len(),
                plant.state_dim()
            )));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::InvalidProblem(
                "x0 has non-finite entries".into(),
            ));
        }
        if weights.len() != plant.input_dim() {
            return Err(SolverError::InvalidProblem(format!(
                "lambda has length {}, expected {}",
                weights.len(),
                plant.input_dim()
            )));
        }
        if weights.iter().any(|w| *w <= 0.0 || !w.is_finite()) {
            return Err(SolverError::InvalidProblem(
                "all lambda weights must be positive and finite".into(),
            ));
        }
        if num_intervals * plant.input_dim() < plant.state_dim() {
            return Err(SolverError::InvalidProblem(format!(
                "grid too coarse: N*m = {} < n = {}",
                num_intervals * plant.input_dim(),
                plant.state_dim()
            )));
        }
        Ok(Self {
            plant,
            x0,
            horizon,
            num_intervals,
            weights,
        })
    }

    /// Problem with unit weights and the default grid.
    pub fn with_default_grid(
        plant: PlantModel,
        x0: DVector<f64>,
        horizon: f64,
    ) -> Result<Self, SolverError> {
        let m = plant.input_dim();
        let n = plant.state_dim();
        let num = default_num_intervals(horizon, n);
        Self::new(plant, x0, horizon, num, DVector::from_element(m, 1.0))
    }
}

/// Default grid size: 100 intervals per unit of horizon, clamped to
/// `[n, 5000]`. Balances switch-time resolution against runtime.
pub fn default_num_intervals(horizon: f64, state_dim: usize) -> usize {
    let base = 100usize.saturating_mul(horizon.ceil().max(1.0) as usize);
    base.clamp(state_dim.max(1), 5000)
}

/// Finite-dimensional form of the steering task. A grid control `u`
/// (flattened sample-major, channel-minor) meets the terminal condition
/// iff `G u = c`.
#[derive(Debug, Clone)]
pub struct ReachabilityProgram {
    /// `n x (N m)`; block column `k` is `Ad^(N-1-k) Bd`.
    pub g: DMatrix<f64>,
    /// `-Ad^N x0`.
    pub c: DVector<f64>,
    /// Per-sample objective weights `lambda_i * dt`.
    pub weights: DVector<f64>,
    pub dt: f64,
    pub num_intervals: usize,
    pub input_dim: usize,
    /// False when the plant failed the Kalman rank test; the program may
    /// still be feasible for specific initial states.
    pub controllable: bool,
}

impl ReachabilityProgram {
    /// Reshape a flat solution vector into an `N x m` sample grid.
    pub fn grid_from_flat(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let n = self.num_intervals;
        let m = self.input_dim;
        DMatrix::from_fn(n, m, |k, i| u[k * m + i])
    }
}

/// Stopping and penalty parameters for the operator-splitting solve.
#[derive(Debug, Clone)]
pub struct AdmmSettings {
    pub rho: f64,
    pub max_iter: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_feas: f64,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iter: 20_000,
            eps_abs: 1e-8,
            eps_rel: 1e-6,
            eps_feas: 1e-6,
        }
    }
}

impl AdmmSettings {
    fn validate(&self) -> Result<(), SolverError> {
        let ok = self.rho > 0.0
            && self.max_iter > 0
            && self.eps_abs > 0.0
            && self.eps_rel > 0.0
            && self.eps_feas > 0.0;
        if ok {
            Ok(())
        } else {
            Err(SolverError::InvalidProblem(
                "all solver settings must be positive".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIters,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::MaxIters => "max_iters",
        };
        f.write_str(s)
    }
}

/// Solver output: the control grid plus cost and convergence data.
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// `N x m` control samples.
    pub u: DMatrix<f64>,
    pub status: SolveStatus,
    /// Weighted L1 cost `sum_i lambda_i sum_k |u_i[k]| dt`.
    pub j1: f64,
    /// Weighted support measure at the default threshold.
    pub j0: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Builds `G`, `c` and the per-sample weights for a steering task.
pub fn build_reachability(problem: &ControlProblem) -> Result<ReachabilityProgram, SolverError> {
    let n = problem.plant.state_dim();
    let m = problem.plant.input_dim();
    let big_n = problem.num_intervals;
    let dt = problem.horizon / big_n as f64;
    let disc = model::discretize_zoh(&problem.plant, dt)?;

    let mut g = DMatrix::<f64>::zeros(n, big_n * m);
    // Fill from the right: block N-1 is Bd, each step left multiplies by Ad.
    let mut block = disc.bd.clone();
    for k in (0..big_n).rev() {
        g.view_mut((0, k * m), (n, m)).copy_from(&block);
        if k > 0 {
            block = &disc.ad * block;
        }
    }
    // c = -Ad^N x0.
    let mut v = problem.x0.clone();
    for _ in 0..big_n {
        v = &disc.ad * v;
    }
    let c = -v;

    let mut weights = DVector::<f64>::zeros(big_n * m);
    for k in 0..big_n {
        for i in 0..m {
            weights[k * m + i] = problem.weights[i] * dt;
        }
    }
    let (controllable, _) = model::is_controllable(&problem.plant);
    Ok(ReachabilityProgram {
        g,
        c,
        weights,
        dt,
        num_intervals: big_n,
        input_dim: m,
        controllable,
    })
}

/// Exact Euclidean projector onto the affine set `{u : G u = c}`, with
/// row equilibration and a one-time Cholesky factorization of `G G^T`.
struct AffineProjector {
    g: DMatrix<f64>,
    gt: DMatrix<f64>,
    c: DVector<f64>,
    chol: nalgebra::linalg::Cholesky<f64, Dyn>,
}

impl AffineProjector {
    fn new(g: &DMatrix<f64>, c: &DVector<f64>) -> Result<Self, SolverError> {
        let mut ge = g.clone();
        let mut ce = c.clone();
        for i in 0..ge.nrows() {
            let norm = ge.row(i).norm();
            if norm < 1e-300 {
                return Err(SolverError::DegenerateProgram);
            }
            let inv = 1.0 / norm;
            ge.row_mut(i).apply(|x| *x *= inv);
            ce[i] *= inv;
        }
        let ggt = &ge * ge.transpose();
        let chol = nalgebra::linalg::Cholesky::new(ggt).ok_or(SolverError::DegenerateProgram)?;
        let gt = ge.transpose();
        Ok(Self {
            g: ge,
            gt,
            c: ce,
            chol,
        })
    }

    fn project(&self, y: &DVector<f64>) -> DVector<f64> {
        let resid = &self.g * y - &self.c;
        let corr = self.chol.solve(&resid);
        y - &self.gt * corr
    }
}

fn shrink_clip(w: &DVector<f64>, weights: &DVector<f64>, rho: f64) -> DVector<f64> {
    DVector::from_fn(w.len(), |j, _| {
        let kappa = weights[j] / rho;
        let x = w[j];
        let shrunk = if x > kappa {
            x - kappa
        } else if x < -kappa {
            x + kappa
        } else {
            0.0
        };
        shrunk.clamp(-BOX_BOUND, BOX_BOUND)
    })
}

/// Minimizes the weighted L1 cost subject to `G u = c` and `|u_j| <= 1`.
///
/// Infeasibility is detected by a residual stall: the primal residual
/// failing to improve by 1% over 500 iterations while sitting above
/// `1000 * eps_feas`.
pub fn solve_l1(
    program: &ReachabilityProgram,
    settings: &AdmmSettings,
) -> Result<SolveResult, SolverError> {
    settings.validate()?;
    let p = program.g.ncols();
    let proj = AffineProjector::new(&program.g, &program.c)?;
    // The penalty lives on the scale of the sample weights: with controls
    // of order one, shrinkage thresholds w_j / rho near one give the
    // fastest splitting. `settings.rho` is in units of the mean weight.
    let mean_weight = program.weights.mean().max(f64::MIN_POSITIVE);
    let rho0 = settings.rho * mean_weight;
    let mut rho = rho0;
    let sqrt_p = (p as f64).sqrt();

    let mut z = DVector::<f64>::zeros(p);
    let mut v = DVector::<f64>::zeros(p);
    let mut u = DVector::<f64>::zeros(p);
    let mut status = SolveStatus::MaxIters;
    let mut iterations = settings.max_iter;
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut best_primal = f64::INFINITY;
    let mut last_improve = 0usize;

    // Over-relaxation factor for the splitting updates.
    let alpha = 1.6;
    for iter in 1..=settings.max_iter {
        u = proj.project(&(&z - &v));
        let u_relaxed = &u * alpha + &z * (1.0 - alpha);
        let w = &u_relaxed + &v;
        let z_new = shrink_clip(&w, &program.weights, rho);
        primal = (&u - &z_new).norm();
        dual = rho * (&z_new - &z).norm();
        v += u_relaxed - &z_new;
        z = z_new;

        let eps_primal = sqrt_p * settings.eps_abs + settings.eps_rel * u.norm().max(z.norm());
        let eps_dual = sqrt_p * settings.eps_abs + settings.eps_rel * rho * v.norm();
        if primal <= eps_primal && dual <= eps_dual {
            status = SolveStatus::Optimal;
            iterations = iter;
            break;
        }
        if primal < 0.99 * best_primal {
            best_primal = primal;
            last_improve = iter;
        } else if iter - last_improve >= 500 && primal > 1e3 * settings.eps_feas {
            status = SolveStatus::Infeasible;
            iterations = iter;
            break;
        }
        // Residual balancing on the tolerance-normalized residuals: the
        // residual lagging furthest behind its own stopping threshold
        // drives the penalty, one factor of two at a time. The scaled
        // dual variable is rescaled with the penalty (the unscaled dual
        // prices rho*v stay put), and the stall window restarts since
        // the trajectory is perturbed.
        if iter % 50 == 0 && rho < 1e4 * rho0 && rho > 1e-4 * rho0 {
            let rel_primal = primal / eps_primal.max(f64::MIN_POSITIVE);
            let rel_dual = dual / eps_dual.max(f64::MIN_POSITIVE);
            if rel_primal > 4.0 * rel_dual {
                rho *= 2.0;
                v /= 2.0;
                best_primal = f64::INFINITY;
                last_improve = iter;
            } else if rel_dual > 4.0 * rel_primal {
                rho /= 2.0;
                v *= 2.0;
                best_primal = f64::INFINITY;
                last_improve = iter;
            }
        }
    }

    // Final polish and certificate: alternating projections between the
    // box and the affine set wash out the residual-level box overshoot
    // while keeping the iterate affine-feasible.
    u = proj.project(&u);
    for _ in 0..200 {
        if u.amax() - BOX_BOUND <= 0.1 * settings.eps_feas {
            break;
        }
        u = proj.project(&u.map(|x| x.clamp(-BOX_BOUND, BOX_BOUND)));
    }
    if status == SolveStatus::Optimal {
        let terminal = (&program.g * &u - &program.c).norm();
        let box_violation = u.amax() - BOX_BOUND;
        if terminal > settings.eps_feas || box_violation > settings.eps_feas {
            status = SolveStatus::MaxIters;
        }
    }

    let j1: f64 = (0..p).map(|j| program.weights[j] * u[j].abs()).sum();
    let j0: f64 = (0..p)
        .map(|j| {
            if u[j].abs() > DEFAULT_L0_THRESHOLD {
                program.weights[j]
            } else {
                0.0
            }
        })
        .sum();
    Ok(SolveResult {
        u: program.grid_from_flat(&u),
        status,
        j1,
        j0,
        iterations,
        primal_residual: primal,
        dual_residual: dual,
    })
}

/// Existence check for an admissible grid control, by alternating
/// projection between the affine set and the box. Returns the final gap
/// along with the verdict; the verdict is `true` once the gap falls
/// below `eps_feas`.
pub fn check_feasible(
    program: &ReachabilityProgram,
    settings: &AdmmSettings,
) -> Result<(bool, f64), SolverError> {
    settings.validate()?;
    let p = program.g.ncols();
    let proj = AffineProjector::new(&program.g, &program.c)?;
    let mut y = DVector::<f64>::zeros(p);
    let mut gap = f64::INFINITY;
    let mut best = f64::INFINITY;
    let mut last_improve = 0usize;
    for iter in 1..=settings.max_iter {
        let u = proj.project(&y);
        y = u.map(|x| x.clamp(-BOX_BOUND, BOX_BOUND));
        gap = (&u - &y).norm();
        if gap <= settings.eps_feas {
            return Ok((true, gap));
        }
        if gap < 0.99 * best {
            best = gap;
            last_improve = iter;
        } else if iter - last_improve >= 500 {
            break;
        }
    }
    Ok((false, gap))
}

/// Smallest horizon (within `tol`) for which the steering task admits a
/// grid control, found by doubling then bisection on `check_feasible`.
/// `grid_density` is the number of grid intervals per unit of horizon.
pub fn minimum_time(
    plant: &PlantModel,
    x0: &DVector<f64>,
    grid_density: f64,
    tol: f64,
) -> Result<f64, SolverError> {
    if tol <= 0.0 || !tol.is_finite() {
        return Err(SolverError::InvalidProblem(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if grid_density <= 0.0 || !grid_density.is_finite() {
        return Err(SolverError::InvalidProblem(format!(
            "grid density must be positive, got {grid_density}"
        )));
    }
    let n = plant.state_dim();
    let m = plant.input_dim();
    let settings = AdmmSettings {
        max_iter: 5000,
        ..AdmmSettings::default()
    };
    let feasible_at = |t: f64| -> Result<bool, SolverError> {
        let num = ((grid_density * t).ceil() as usize).clamp(n.max(1), 5000);
        let problem = ControlProblem::new(
            plant.clone(),
            x0.clone(),
            t,
            num.max(n.div_ceil(m)),
            DVector::from_element(m, 1.0),
        )?;
        let program = build_reachability(&problem)?;
        Ok(check_feasible(&program, &settings)?.0)
    };

    let cap = 40.0 * (1.0 + x0.norm());
    let mut hi = tol.max(1e-9);
    if feasible_at(hi)? {
        return Ok(hi);
    }
    let mut lo = hi;
    loop {
        hi *= 2.0;
        if hi > cap {
            return Err(SolverError::UnboundedSearch { cap });
        }
        if feasible_at(hi)? {
            break;
        }
        lo = hi;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible_at(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Weighted support measure of a grid control: samples with magnitude
/// above `threshold` contribute `lambda_i * dt` each.
pub fn l0_measure(samples: &DMatrix<f64>, dt: f64, threshold: f64, weights: &DVector<f64>) -> f64 {
    debug_assert!(threshold > 0.0);
    debug_assert_eq!(weights.len(), samples.ncols());
    let mut total = 0.0;
    for i in 0..samples.ncols() {
        let count = samples
            .column(i)
            .iter()
            .filter(|x| x.abs() > threshold)
            .count();
        total += weights[i] * dt * count as f64;
    }
    total
}

/// Unweighted per-channel support measure, in seconds.
pub fn l0_measure_per_channel(samples: &DMatrix<f64>, dt: f64, threshold: f64) -> Vec<f64> {
    debug_assert!(threshold > 0.0);
    (0..samples.ncols())
        .map(|i| {
            let count = samples
                .column(i)
                .iter()
                .filter(|x| x.abs() > threshold)
                .count();
            dt * count as f64
        })
        .collect()
}
