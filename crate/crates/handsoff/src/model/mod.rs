// Copyright 2026 Handsoff Contributors
// SPDX-License-Identifier: Apache-2.0

//! Exact linear-systems kernel for LTI plants `dx/dt = A x + B u`.
//!
//! Everything here is dense and desk-scale (`n <= 16` states): matrix
//! exponential by scaling-and-squaring, zero-order-hold discretization
//! through the augmented block exponential, the Kalman controllability
//! test, eigenvalues by Hessenberg reduction plus shifted QR, and exact
//! state propagation under piecewise-constant input.

mod eig;

use nalgebra::{Complex, DMatrix, DVector};
use thiserror::Error;

/// Relative tolerance below which an eigenvalue counts as zero when
/// deciding whether `A` is nonsingular.
pub const SINGULARITY_RTOL: f64 = 1e-9;

/// Relative tolerance for the controllability rank decision.
pub const RANK_RTOL: f64 = 1e-10;

/// Largest state dimension accepted by the spectral routines.
pub const MAX_SPECTRAL_DIM: usize = 16;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("time step must be positive, got {0}")]
    InvalidTimeStep(f64),
    #[error("segment duration must be nonnegative, got {0}")]
    NegativeDuration(f64),
    #[error("denominator of the rational exponential approximant is singular")]
    ExpmSingular,
    #[error(
        "eigenvalue iteration did not converge: {converged} of {dim} eigenvalues \
         found within {cap} QR steps"
    )]
    EigenNoConvergence {
        converged: usize,
        dim: usize,
        cap: usize,
    },
    #[error("spectral routines are limited to n <= {max}, got n = {got}")]
    TooLarge { max: usize, got: usize },
}

/// An LTI plant `dx/dt = A x + B u` with `n` states and `m` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl PlantModel {
    /// Validates dimensions (`A` square `n x n`, `B` is `n x m`,
    /// `n, m >= 1`) and finiteness of all entries.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self, ModelError> {
        if a.nrows() != a.ncols() {
            return Err(ModelError::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if a.nrows() == 0 {
            return Err(ModelError::Dimension("state dimension must be >= 1".into()));
        }
        if b.nrows() != a.nrows() {
            return Err(ModelError::Dimension(format!(
                "B has {} rows, expected {}",
                b.nrows(),
                a.nrows()
            )));
        }
        if b.ncols() == 0 {
            return Err(ModelError::Dimension("input dimension must be >= 1".into()));
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite("A"));
        }
        if b.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite("B"));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }
}

/// Zero-order-hold discretization of a plant at step `dt`:
/// `Ad = exp(A dt)`, `Bd = (integral of exp(A s) ds over [0, dt]) B`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedSystem {
    pub ad: DMatrix<f64>,
    pub bd: DMatrix<f64>,
    pub dt: f64,
}

/// Eigenvalue summary of a state matrix.
#[derive(Debug, Clone)]
pub struct SpectralInfo {
    /// All `n` eigenvalues; conjugate-closed for real input.
    pub eigenvalues: Vec<Complex<f64>>,
    /// Largest absolute imaginary part among the eigenvalues.
    pub omega: f64,
    /// True when no eigenvalue modulus falls below the relative
    /// singularity tolerance.
    pub a_nonsingular: bool,
}

// Pade(13) numerator/denominator coefficients for exp(x); the classical
// integer values, exact in f64.
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

// Scaling threshold for the degree-13 approximant (Higham 2005).
const THETA13: f64 = 5.371_920_351_148_152;

fn matrix_1_norm(m: &DMatrix<f64>) -> f64 {
    let mut max = 0.0f64;
    for j in 0..m.ncols() {
        let s: f64 = m.column(j).iter().map(|x| x.abs()).sum();
        max = max.max(s);
    }
    max
}

/// Matrix exponential `exp(M)` by scaling-and-squaring with a Pade(13)
/// rational approximant. Relative accuracy around 1e-13 for moderate
/// norms; well inside 1e-10 for `||M|| <= 100`.
pub fn expm(m: &DMatrix<f64>) -> Result<DMatrix<f64>, ModelError> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(ModelError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(ModelError::NonFinite("expm input"));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }

    let norm = matrix_1_norm(m);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as u32
    } else {
        0
    };
    let scaled = m * 2f64.powi(-(s as i32));

    let eye = DMatrix::<f64>::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let w1 = &a6 * PADE13[13] + &a4 * PADE13[11] + &a2 * PADE13[9];
    let w2 = &w1 * &a6 + &a6 * PADE13[7] + &a4 * PADE13[5] + &a2 * PADE13[3] + &eye * PADE13[1];
    let u = &scaled * w2;

    let v1 = &a6 * PADE13[12] + &a4 * PADE13[10] + &a2 * PADE13[8];
    let v = &v1 * &a6 + &a6 * PADE13[6] + &a4 * PADE13[4] + &a2 * PADE13[2] + &eye * PADE13[0];

    let num = &v + &u;
    let den = &v - &u;
    let mut r = den.lu().solve(&num).ok_or(ModelError::ExpmSingular)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// Zero-order-hold discretization via the augmented block exponential:
/// exponentiate `[[A, B], [0, 0]] * dt` and read `Ad`, `Bd` off the top
/// blocks. One primitive yields both matrices.
pub fn discretize_zoh(plant: &PlantModel, dt: f64) -> Result<DiscretizedSystem, ModelError> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(ModelError::InvalidTimeStep(dt));
    }
    let n = plant.state_dim();
    let m = plant.input_dim();
    let mut aug = DMatrix::<f64>::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(plant.a());
    aug.view_mut((0, n), (n, m)).copy_from(plant.b());
    let e = expm(&(aug * dt))?;
    Ok(DiscretizedSystem {
        ad: e.view((0, 0), (n, n)).into_owned(),
        bd: e.view((0, n), (n, m)).into_owned(),
        dt,
    })
}

/// Rank of a dense matrix by Householder QR with column pivoting.
/// A diagonal entry counts toward the rank while it exceeds
/// `rtol` times the first (largest) pivot.
fn rank_col_piv(mut m: DMatrix<f64>, rtol: f64) -> usize {
    let (nr, nc) = m.shape();
    let kmax = nr.min(nc);
    let mut rank = 0;
    let mut first_pivot = 0.0f64;
    for k in 0..kmax {
        // Pivot: bring the column with the largest remaining norm to k.
        let mut best = k;
        let mut best_norm = 0.0f64;
        for j in k..nc {
            let s: f64 = (k..nr).map(|i| m[(i, j)] * m[(i, j)]).sum();
            if s > best_norm {
                best_norm = s;
                best = j;
            }
        }
        if best != k {
            m.swap_columns(k, best);
        }
        let alpha = best_norm.sqrt();
        if k == 0 {
            first_pivot = alpha;
        }
        if alpha <= rtol * first_pivot || alpha == 0.0 {
            break;
        }
        rank += 1;
        // Householder reflector zeroing column k below the diagonal.
        let mut v: Vec<f64> = (k..nr).map(|i| m[(i, k)]).collect();
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * alpha;
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;
        for j in k..nc {
            let s: f64 = (k..nr).map(|i| v[i - k] * m[(i, j)]).sum::<f64>() * beta;
            for i in k..nr {
                m[(i, j)] -= s * v[i - k];
            }
        }
    }
    rank
}

/// Kalman controllability test: rank of `[B, AB, ..., A^(n-1) B]`.
/// Returns the pair (controllable, rank).
pub fn is_controllable(plant: &PlantModel) -> (bool, usize) {
    let n = plant.state_dim();
    let m = plant.input_dim();
    let mut kalman = DMatrix::<f64>::zeros(n, n * m);
    let mut blk = plant.b().clone();
    for k in 0..n {
        kalman.view_mut((0, k * m), (n, m)).copy_from(&blk);
        if k + 1 < n {
            blk = plant.a() * blk;
        }
    }
    let rank = rank_col_piv(kalman, RANK_RTOL);
    (rank == n, rank)
}

/// Eigenvalues of a real square matrix (`n <= 16`) by Householder
/// reduction to Hessenberg form followed by shifted QR iteration, plus
/// the derived quantities used by the switching-count and bit-budget
/// formulas.
pub fn spectral_info(a: &DMatrix<f64>) -> Result<SpectralInfo, ModelError> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(ModelError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if n > MAX_SPECTRAL_DIM {
        return Err(ModelError::TooLarge {
            max: MAX_SPECTRAL_DIM,
            got: n,
        });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(ModelError::NonFinite("spectral_info input"));
    }
    let cap = 100 * n;
    let mut h = a.clone();
    eig::hessenberg_in_place(&mut h);
    let eigenvalues = eig::hessenberg_eigenvalues(h, cap).map_err(|converged| {
        ModelError::EigenNoConvergence {
            converged,
            dim: n,
            cap,
        }
    })?;
    let omega = eigenvalues.iter().map(|l| l.im.abs()).fold(0.0, f64::max);
    let max_mod = eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let min_mod = eigenvalues
        .iter()
        .map(|l| l.norm())
        .fold(f64::INFINITY, f64::min);
    let a_nonsingular = min_mod > SINGULARITY_RTOL * max_mod.max(1.0);
    Ok(SpectralInfo {
        eigenvalues,
        omega,
        a_nonsingular,
    })
}

/// Exact state after holding `u_const` for `tau` seconds from state `x`:
/// `exp(A tau) x + (integral of exp(A s) ds) B u_const`.
pub fn propagate_segment(
    plant: &PlantModel,
    x: &DVector<f64>,
    u_const: &DVector<f64>,
    tau: f64,
) -> Result<DVector<f64>, ModelError> {
    if x.len() != plant.state_dim() {
        return Err(ModelError::Dimension(format!(
            "state has length {}, expected {}",
            x.len(),
            plant.state_dim()
        )));
    }
    if u_const.len() != plant.input_dim() {
        return Err(ModelError::Dimension(format!(
            "input has length {}, expected {}",
            u_const.len(),
            plant.input_dim()
        )));
    }
    if tau < 0.0 || !tau.is_finite() {
        return Err(ModelError::NegativeDuration(tau));
    }
    if tau == 0.0 {
        return Ok(x.clone());
    }
    let disc = discretize_zoh(plant, tau)?;
    Ok(&disc.ad * x + &disc.bd * u_const)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |_, _| rng.random_range(-scale..scale))
    }

    fn double_integrator() -> PlantModel {
        PlantModel::new(dmatrix![0.0, 1.0; 0.0, 0.0], dmatrix![0.0; 1.0]).unwrap()
    }

    #[test]
    fn expm_zero_is_identity() {
        let e = expm(&DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(e, DMatrix::identity(2, 2));
    }

    #[test]
    fn expm_diagonal() {
        let e = expm(&dmatrix![1.0, 0.0; 0.0, -1.0]).unwrap();
        assert_relative_eq!(e[(0, 0)], 1f64.exp(), max_relative = 1e-12);
        assert_relative_eq!(e[(1, 1)], (-1f64).exp(), max_relative = 1e-12);
        assert!(e[(0, 1)].abs() < 1e-14 && e[(1, 0)].abs() < 1e-14);
    }

    #[test]
    fn expm_rotation_quarter_turn() {
        let theta = std::f64::consts::FRAC_PI_2;
        let e = expm(&dmatrix![0.0, theta; -theta, 0.0]).unwrap();
        let expected = dmatrix![0.0, 1.0; -1.0, 0.0];
        assert!((e - expected).norm() < 1e-10);
    }

    #[test]
    fn expm_large_norm_scaling() {
        let e = expm(&dmatrix![100.0, 0.0; 0.0, -100.0]).unwrap();
        assert_relative_eq!(e[(0, 0)], 100f64.exp(), max_relative = 1e-10);
    }

    #[test]
    fn expm_rejects_bad_input() {
        assert!(matches!(
            expm(&DMatrix::zeros(2, 3)),
            Err(ModelError::NotSquare { .. })
        ));
        assert!(matches!(
            expm(&dmatrix![f64::NAN, 0.0; 0.0, 0.0]),
            Err(ModelError::NonFinite(_))
        ));
    }

    #[test]
    fn expm_semigroup_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 3, 1.0);
            let s = rng.random_range(0.0..2.0);
            let t = rng.random_range(0.0..2.0);
            let lhs = expm(&(&a * (s + t))).unwrap();
            let rhs = expm(&(&a * s)).unwrap() * expm(&(&a * t)).unwrap();
            assert!((lhs - rhs).norm() < 1e-8);
            let prod = expm(&a).unwrap() * expm(&(-&a)).unwrap();
            assert!((prod - DMatrix::identity(3, 3)).norm() < 1e-8);
        }
    }

    #[test]
    fn zoh_double_integrator_closed_form() {
        let disc = discretize_zoh(&double_integrator(), 0.1).unwrap();
        assert!((disc.ad - dmatrix![1.0, 0.1; 0.0, 1.0]).norm() < 1e-13);
        assert!((disc.bd - dmatrix![0.005; 0.1]).norm() < 1e-13);
    }

    #[test]
    fn zoh_zero_dynamics() {
        let plant = PlantModel::new(DMatrix::zeros(2, 2), DMatrix::identity(2, 2)).unwrap();
        let disc = discretize_zoh(&plant, 0.37).unwrap();
        assert!((disc.ad - DMatrix::identity(2, 2)).norm() < 1e-14);
        assert!((disc.bd - DMatrix::identity(2, 2) * 0.37).norm() < 1e-14);
    }

    #[test]
    fn zoh_small_step_first_order() {
        let plant = double_integrator();
        let dt = 1e-8;
        let disc = discretize_zoh(&plant, dt).unwrap();
        let taylor = DMatrix::identity(2, 2) + plant.a() * dt;
        assert!((disc.ad - taylor).norm() < 1e-15);
    }

    #[test]
    fn zoh_rejects_nonpositive_step() {
        assert!(matches!(
            discretize_zoh(&double_integrator(), 0.0),
            Err(ModelError::InvalidTimeStep(_))
        ));
        assert!(matches!(
            discretize_zoh(&double_integrator(), -1.0),
            Err(ModelError::InvalidTimeStep(_))
        ));
    }

    #[test]
    fn controllability_examples() {
        assert_eq!(is_controllable(&double_integrator()), (true, 2));
        let uncontrollable = PlantModel::new(DMatrix::identity(2, 2), dmatrix![1.0; 1.0]).unwrap();
        assert_eq!(is_controllable(&uncontrollable), (false, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=4 {
            let plant =
                PlantModel::new(random_matrix(&mut rng, n, 2.0), DMatrix::identity(n, n)).unwrap();
            assert_eq!(is_controllable(&plant), (true, n));
        }
    }

    #[test]
    fn controllability_rank_similarity_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let n = 3;
            let a = random_matrix(&mut rng, n, 2.0);
            let b = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-2.0..2.0));
            let plant = PlantModel::new(a.clone(), b.clone()).unwrap();
            // Well-conditioned transform: identity plus a small perturbation.
            let p = DMatrix::identity(n, n) + random_matrix(&mut rng, n, 0.2);
            let p_inv = p.clone().try_inverse().unwrap();
            let transformed = PlantModel::new(&p_inv * &a * &p, &p_inv * &b).unwrap();
            assert_eq!(is_controllable(&plant).1, is_controllable(&transformed).1);
        }
    }

    #[test]
    fn spectral_rotation() {
        let info = spectral_info(&dmatrix![0.0, 2.0; -2.0, 0.0]).unwrap();
        assert_relative_eq!(info.omega, 2.0, epsilon = 1e-10);
        assert!(info.a_nonsingular);
        let mut mods: Vec<f64> = info.eigenvalues.iter().map(|l| l.norm()).collect();
        mods.sort_by(f64::total_cmp);
        assert_relative_eq!(mods[0], 2.0, epsilon = 1e-10);
        assert_relative_eq!(mods[1], 2.0, epsilon = 1e-10);
    }

    #[test]
    fn spectral_real_diagonal() {
        let info = spectral_info(&dmatrix![-1.0, 0.0; 0.0, -3.0]).unwrap();
        assert_eq!(info.omega, 0.0);
        assert!(info.a_nonsingular);
    }

    #[test]
    fn spectral_nilpotent() {
        let info = spectral_info(&dmatrix![0.0, 1.0; 0.0, 0.0]).unwrap();
        assert_eq!(info.omega, 0.0);
        assert!(!info.a_nonsingular);
    }

    #[test]
    fn spectral_matches_trace_and_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for n in [2usize, 3, 5, 8] {
            for _ in 0..10 {
                let a = random_matrix(&mut rng, n, 2.0);
                let info = spectral_info(&a).unwrap();
                let sum: Complex<f64> = info.eigenvalues.iter().sum();
                let prod: Complex<f64> = info.eigenvalues.iter().product();
                assert_relative_eq!(sum.re, a.trace(), epsilon = 1e-7 * (n as f64));
                assert!(sum.im.abs() < 1e-7);
                assert_relative_eq!(
                    prod.re,
                    a.determinant(),
                    epsilon = 1e-6 * a.determinant().abs().max(1.0)
                );
            }
        }
    }

    #[test]
    fn spectral_conjugate_closure() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..25 {
            let a = random_matrix(&mut rng, 4, 2.0);
            let info = spectral_info(&a).unwrap();
            // Every eigenvalue's conjugate must appear in the multiset.
            let mut used = vec![false; info.eigenvalues.len()];
            for l in &info.eigenvalues {
                let conj = l.conj();
                let found = info
                    .eigenvalues
                    .iter()
                    .enumerate()
                    .find(|(i, other)| !used[*i] && (*other - conj).norm() < 1e-8);
                let (i, _) = found.expect("conjugate missing");
                used[i] = true;
            }
        }
    }

    #[test]
    fn propagate_zero_duration_is_identity() {
        let plant = double_integrator();
        let x = dvector![1.0, -2.0];
        let got = propagate_segment(&plant, &x, &dvector![0.7], 0.0).unwrap();
        assert_eq!(got, x);
    }

    #[test]
    fn propagate_double_integrator_closed_form() {
        let plant = double_integrator();
        for t in [0.25, 1.0, 2.5] {
            let got = propagate_segment(&plant, &dvector![0.0, 0.0], &dvector![1.0], t).unwrap();
            assert_relative_eq!(got[0], t * t / 2.0, epsilon = 1e-12);
            assert_relative_eq!(got[1], t, epsilon = 1e-12);
        }
    }

    #[test]
    fn propagate_free_response() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 3, 1.5);
        let plant = PlantModel::new(a.clone(), DMatrix::identity(3, 3)).unwrap();
        let x = dvector![0.3, -0.4, 1.1];
        let got = propagate_segment(&plant, &x, &DVector::zeros(3), 0.8).unwrap();
        let expected = expm(&(a * 0.8)).unwrap() * &x;
        assert!((got - expected).norm() < 1e-12);
    }

    #[test]
    fn propagate_consistency_split_segment() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 3, 1.0);
            let b = DMatrix::from_fn(3, 2, |_, _| rng.random_range(-1.0..1.0));
            let plant = PlantModel::new(a, b).unwrap();
            let x = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            let u = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            let s = rng.random_range(0.01..1.0);
            let t = rng.random_range(0.01..1.0);
            let whole = propagate_segment(&plant, &x, &u, s + t).unwrap();
            let mid = propagate_segment(&plant, &x, &u, s).unwrap();
            let split = propagate_segment(&plant, &mid, &u, t).unwrap();
            assert!((whole - split).norm() < 1e-8);
        }
    }

    #[test]
    fn propagate_rejects_negative_duration() {
        let plant = double_integrator();
        assert!(matches!(
            propagate_segment(&plant, &dvector![0.0, 0.0], &dvector![0.0], -0.1),
            Err(ModelError::NegativeDuration(_))
        ));
    }

    #[test]
    fn plant_validation() {
        assert!(PlantModel::new(DMatrix::zeros(2, 3), DMatrix::zeros(2, 1)).is_err());
        assert!(PlantModel::new(DMatrix::zeros(2, 2), DMatrix::zeros(3, 1)).is_err());
        assert!(PlantModel::new(dmatrix![f64::INFINITY], dmatrix![1.0]).is_err());
    }
}
