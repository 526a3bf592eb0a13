//! Closed-form solutions of the kicked spin models.
//!
//! Spin-1/2: with `mu = (2-p) lambda / 2` the quasienergies are
//! `eps_n = p lambda / 2 + (-1)^n E(mu, gamma, T)` and the eigenvectors are spin
//! coherent states with polar half-angle `Q(mu, gamma, T)`, where
//!
//! ```text
//! cos E = cos mu cos T - sin mu sin T cos gamma
//! Q     = atan2(sin mu sin gamma, cos mu sin T + sin mu cos T cos gamma) / 2
//! ```
//!
//! `Q` is only meaningful on a continuous branch. The complex number
//! `z(mu) = sin T cos mu + (cos T cos gamma + i sin gamma) sin mu` traces an
//! ellipse whose argument moves monotonically with rate sign
//! `sign(sin T sin gamma)`, which gives a closed-form unwrapping in `mu`.
//!
//! Spin-3/2 uses the same `E` and `Q` with doubly degenerate levels.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eigenframe::Frame;
use crate::error::{HolonomyError, Result};
use crate::matrix::{block2x2, c, cis, diag, from_rows, identity, pauli, zeros, CMatrix, C64, I, ZERO};
use crate::models::{self, Coord, ModelKind, ModelSpec, ParameterPoint};

/// Distance of `E` from `0` or `pi` below which the gap counts as closed.
pub const GAP_TOL: f64 = 1e-9;
/// Eigenvalue-equation residual accepted for closed-form frames.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;
/// Random draws used to settle the spin-3/2 phase convention.
pub const THETA_RESOLUTION_DRAWS: usize = 100;
/// Default seed for randomized utilities when `HOLONOMY_LAB_SEED` is unset.
pub const DEFAULT_SEED: u64 = 0x5eed_2007;

/// Seed for randomized utilities, overridable through `HOLONOMY_LAB_SEED`.
pub fn seed_from_env() -> u64 {
    std::env::var("HOLONOMY_LAB_SEED").ok().and_then(|s| s.trim().parse().ok()).unwrap_or(DEFAULT_SEED)
}

/// Quasienergy half-splitting `E` on the principal branch `[0, pi]`.
pub fn e_function(lambda: f64, gamma: f64, t: f64) -> f64 {
    let x = lambda.cos() * t.cos() - lambda.sin() * t.sin() * gamma.cos();
    x.clamp(-1.0, 1.0).acos()
}

/// Half of the principal two-argument arctangent, in `(-pi/2, pi/2]`.
pub fn q_principal(lambda: f64, gamma: f64, t: f64) -> f64 {
    0.5 * (lambda.sin() * gamma.sin()).atan2(lambda.cos() * t.sin() + lambda.sin() * t.cos() * gamma.cos())
}

/// `Q` unwrapped continuously in its first argument, starting from the principal
/// value at `lambda = 0` (which is `0` whenever `sin T > 0`).
pub fn q_function(lambda: f64, gamma: f64, t: f64) -> f64 {
    let a = t.sin();
    let b = C64::new(t.cos() * gamma.cos(), gamma.sin());
    let rate = a * gamma.sin();
    let sign = if rate < 0.0 { -1.0 } else { 1.0 };
    let theta0 = if a.abs() > 1e-300 { 0f64.atan2(a) } else { b.arg() };

    let turns = (lambda / PI).floor();
    let reduced = lambda - turns * PI;
    let z = a * reduced.cos() + b * reduced.sin();
    let raw = z.arg() - theta0;
    // Inside one half turn the argument moves by less than pi in the rate direction.
    let centre = if rate == 0.0 { 0.0 } else { sign * FRAC_PI_2 };
    let within = raw - TAU * ((raw - centre) / TAU).round();
    0.5 * (theta0 + turns * PI * sign + within)
}

/// Shifts a `Q` value by a multiple of `pi` to the branch closest to `reference`.
pub fn q_nearest_branch(q: f64, reference: f64) -> f64 {
    q - PI * ((q - reference) / PI).round()
}

/// `(E, Q)` with `Q` unwrapped in `lambda`.
pub fn eq_functions(lambda: f64, gamma: f64, t: f64) -> (f64, f64) {
    (e_function(lambda, gamma, t), q_function(lambda, gamma, t))
}

fn check_gap(e: f64) -> Result<()> {
    if e < GAP_TOL || e > PI - GAP_TOL {
        Err(HolonomyError::GapClosed { e })
    } else {
        Ok(())
    }
}

/// Closed-form spin-1/2 frame at `(lambda, gamma, xi)` with an explicit `Q` branch.
pub fn analytic_frame_spin_half_with_q(p: i32, lambda: f64, gamma: f64, xi: f64, t: f64, q: f64) -> Result<Frame> {
    let mu = (2 - p) as f64 * lambda / 2.0;
    let e = e_function(mu, gamma, t);
    check_gap(e)?;
    let (s, co) = q.sin_cos();
    let (lo, hi) = (cis(-xi / 2.0), cis(xi / 2.0));
    let vectors = from_rows(2, 2, &[lo * co, -lo * s, hi * s, hi * co]);
    let base = p as f64 * lambda / 2.0;
    Ok(Frame {
        point: ParameterPoint::spin_half(lambda, gamma, xi),
        quasienergies: vec![base + e, base - e],
        vectors,
        blocks: vec![vec![0], vec![1]],
        quasienergy_period: Some(TAU),
    })
}

/// Closed-form spin-1/2 frame with `Q` unwrapped in `lambda`.
pub fn analytic_frame_spin_half(p: i32, lambda: f64, gamma: f64, xi: f64, t: f64) -> Result<Frame> {
    let q = q_function((2 - p) as f64 * lambda / 2.0, gamma, t);
    analytic_frame_spin_half_with_q(p, lambda, gamma, xi, t, q)
}

/// Candidate definitions of the phases `theta_+` and `theta_-` in the spin-3/2
/// eigenvectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaConvention {
    /// `theta_+ = xi/2`, `theta_- = zeta/2`.
    HalfAngles,
    /// `theta_+- = (xi +- zeta)/2`.
    SumAndDifference,
}

impl ThetaConvention {
    pub const CANDIDATES: [ThetaConvention; 2] = [ThetaConvention::HalfAngles, ThetaConvention::SumAndDifference];

    pub fn thetas(&self, xi: f64, zeta: f64) -> (f64, f64) {
        match self {
            ThetaConvention::HalfAngles => (xi / 2.0, zeta / 2.0),
            ThetaConvention::SumAndDifference => ((xi + zeta) / 2.0, (xi - zeta) / 2.0),
        }
    }

    pub fn describe(&self) -> &'static str {
        match self {
            ThetaConvention::HalfAngles => "theta_plus = xi/2, theta_minus = zeta/2",
            ThetaConvention::SumAndDifference => "theta_plus = (xi+zeta)/2, theta_minus = (xi-zeta)/2",
        }
    }
}

fn spin_three_half_vectors(eta: f64, q: f64, theta_plus: f64, theta_minus: f64) -> CMatrix {
    let (s, co) = q.sin_cos();
    let (se, ce) = eta.sin_cos();
    let (pm, pp) = (cis(-theta_plus), cis(theta_plus));
    let (mm, mp) = (cis(-theta_minus), cis(theta_minus));
    // Columns v00, v01, v10, v11.
    let cols = [
        [pm * co, ZERO, mm * se * s, mp * ce * s],
        [ZERO, pp * co, -mm * ce * s, mp * se * s],
        [-pm * se * s, pp * ce * s, mm * co, ZERO],
        [-pm * ce * s, -pp * se * s, ZERO, mp * co],
    ];
    CMatrix::from_fn(4, 4, |i, j| cols[j][i])
}

/// Largest `||U v_n - e^{-i eps_n} v_n||` over the columns of a frame.
pub fn eigen_residual(u: &CMatrix, frame: &Frame) -> f64 {
    let mut worst: f64 = 0.0;
    for (j, eps) in frame.quasienergies.iter().enumerate() {
        let v = frame.vectors.column(j);
        let lhs = u * v;
        let rhs = v * cis(-eps);
        worst = worst.max((lhs - rhs).norm());
    }
    worst
}

fn spin_three_half_frame(
    convention: ThetaConvention,
    p: i32,
    alpha: [f64; 5],
    t: f64,
    q: f64,
) -> Result<Frame> {
    let [lambda, gamma, eta, xi, zeta] = alpha;
    let mu = (2 - p) as f64 * lambda / 2.0;
    let e = e_function(mu, gamma, t);
    check_gap(e)?;
    let (tp, tm) = convention.thetas(xi, zeta);
    let base = p as f64 * lambda / 2.0;
    Ok(Frame {
        point: ParameterPoint::spin_three_half(lambda, gamma, eta, xi, zeta),
        quasienergies: vec![base + e, base + e, base - e, base - e],
        vectors: spin_three_half_vectors(eta, q, tp, tm),
        blocks: vec![vec![0, 1], vec![2, 3]],
        quasienergy_period: Some(TAU),
    })
}

/// Picks the first candidate phase convention whose frames satisfy the Floquet
/// eigenvalue equation over random draws. The result is computed once per process.
pub fn resolve_theta_convention() -> Result<ThetaConvention> {
    static RESOLVED: OnceLock<Result<ThetaConvention>> = OnceLock::new();
    RESOLVED.get_or_init(|| resolve_theta_convention_with_seed(seed_from_env())).clone()
}

pub fn resolve_theta_convention_with_seed(seed: u64) -> Result<ThetaConvention> {
    let mut best_residual = f64::INFINITY;
    for convention in ThetaConvention::CANDIDATES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        let mut draws = 0;
        while draws < THETA_RESOLUTION_DRAWS {
            let p = rng.random_range(0..4);
            let alpha: [f64; 5] = std::array::from_fn(|_| rng.random_range(0.0..TAU));
            let t = rng.random_range(0.0..TAU);
            let mu = (2 - p) as f64 * alpha[0] / 2.0;
            let frame = match spin_three_half_frame(convention, p, alpha, t, q_function(mu, alpha[1], t)) {
                Ok(f) => f,
                Err(HolonomyError::GapClosed { .. }) => continue,
                Err(e) => return Err(e),
            };
            let spec = ModelSpec::spin_three_half(t, p);
            let u = models::floquet_operator(&spec, &frame.point)?;
            worst = worst.max(eigen_residual(&u, &frame));
            draws += 1;
        }
        if worst <= EIGEN_RESIDUAL_TOL {
            return Ok(convention);
        }
        best_residual = best_residual.min(worst);
    }
    Err(HolonomyError::ThetaResolutionFailure { best_residual })
}

/// Closed-form spin-3/2 frame with an explicit `Q` branch. The eigenvalue equation
/// is checked on construction.
pub fn analytic_frame_spin_threehalf_with_q(
    p: i32,
    alpha: [f64; 5],
    t: f64,
    q: f64,
) -> Result<Frame> {
    let convention = resolve_theta_convention()?;
    let frame = spin_three_half_frame(convention, p, alpha, t, q)?;
    let u = models::floquet_operator(&ModelSpec::spin_three_half(t, p), &frame.point)?;
    let residual = eigen_residual(&u, &frame);
    if residual > EIGEN_RESIDUAL_TOL {
        return Err(HolonomyError::ThetaResolutionFailure { best_residual: residual });
    }
    Ok(frame)
}

/// Closed-form spin-3/2 frame with columns `v00, v01, v10, v11`.
pub fn analytic_frame_spin_threehalf(
    p: i32,
    lambda: f64,
    gamma: f64,
    eta: f64,
    xi: f64,
    zeta: f64,
    t: f64,
) -> Result<Frame> {
    let q = q_function((2 - p) as f64 * lambda / 2.0, gamma, t);
    analytic_frame_spin_threehalf_with_q(p, [lambda, gamma, eta, xi, zeta], t, q)
}

/// Closed-form frames along a path, with `Q` kept on one continuous branch.
pub fn analytic_frames_along(spec: &ModelSpec, points: &[ParameterPoint]) -> Result<Vec<Frame>> {
    let p = spec.winding;
    let t = spec.t_field;
    let mut out = Vec::with_capacity(points.len());
    let mut prev_q: Option<f64> = None;
    for point in points {
        let mu = (2 - p) as f64 * point.lambda / 2.0;
        let gamma = *point.sphere.first().ok_or(HolonomyError::DimensionMismatch { expected: 2, found: 0 })?;
        let q_lambda = q_function(mu, gamma, t);
        let q = match prev_q {
            Some(r) => q_nearest_branch(q_lambda, r),
            None => q_lambda,
        };
        prev_q = Some(q);
        let frame = match spec.kind {
            ModelKind::KickedSpinHalf => {
                let [gamma, xi]: [f64; 2] = point.sphere.as_slice().try_into().map_err(|_| {
                    HolonomyError::DimensionMismatch { expected: 2, found: point.sphere.len() }
                })?;
                analytic_frame_spin_half_with_q(p, point.lambda, gamma, xi, t, q)?
            }
            ModelKind::KickedSpinThreeHalf => {
                let s: [f64; 4] = point.sphere.as_slice().try_into().map_err(|_| {
                    HolonomyError::DimensionMismatch { expected: 4, found: point.sphere.len() }
                })?;
                analytic_frame_spin_threehalf_with_q(p, [point.lambda, s[0], s[1], s[2], s[3]], t, q)?
            }
            ModelKind::CustomStatic(_) => return Err(HolonomyError::UnsupportedModel(spec.name())),
        };
        out.push(frame);
    }
    Ok(out)
}

/// Closed-form `E`, `Q`, base-point eigenvectors and the `W`, `B`, `M` factors of one loop.
#[derive(Debug, Clone)]
pub struct OracleValues {
    pub e: f64,
    pub q: f64,
    pub eigvecs: CMatrix,
    pub w: CMatrix,
    pub b: CMatrix,
    pub m: CMatrix,
    pub blocks: Vec<Vec<usize>>,
    pub frame: Frame,
}

fn sigma_rotation(angle: f64) -> CMatrix {
    identity(2) * c(angle.cos(), 0.0) - pauli(2) * (I * angle.sin())
}

/// Closed-form holonomy factors for a `2 pi` sweep of `loop_coord` starting at `base`.
///
/// Supported: spin-1/2 loops in `xi` and `gamma` at `T = 0` (with `sin mu > 0`,
/// so band 0 is the state aligned with the kick field), spin-1/2 and spin-3/2 loops
/// in `lambda` with `sin T sin gamma > 0` (the branch on which `Q` advances by
/// `+pi/2` per half turn).
pub fn analytic_holonomies(spec: &ModelSpec, loop_coord: Coord, base: &ParameterPoint) -> Result<OracleValues> {
    let p = spec.winding;
    let t = spec.t_field;
    let gamma = *base.sphere.first().ok_or(HolonomyError::DimensionMismatch { expected: 2, found: 0 })?;
    let mu = (2 - p) as f64 * base.lambda / 2.0;
    let (e, q) = eq_functions(mu, gamma, t);
    let unsupported = |why: &str| HolonomyError::UnsupportedLoop(format!("{} / {}: {why}", spec.name(), loop_coord.name()));
    let half_turn = (2 - p) as f64 * PI / 2.0;

    match (&spec.kind, loop_coord) {
        (ModelKind::KickedSpinHalf, Coord::Xi | Coord::Gamma) => {
            if t != 0.0 {
                return Err(unsupported("closed form requires T = 0"));
            }
            if !(mu.sin() > 0.0) {
                return Err(unsupported("closed form requires sin((2-p) lambda / 2) > 0"));
            }
            let frame = analytic_frames_along(spec, std::slice::from_ref(base))?.remove(0);
            let minus = identity(2) * c(-1.0, 0.0);
            let (b, m) = if loop_coord == Coord::Xi {
                let cg = gamma.cos();
                (
                    diag(&[cis(PI * cg), cis(-PI * cg)]),
                    diag(&[cis(-PI * (1.0 - cg)), cis(-PI * (1.0 + cg))]),
                )
            } else {
                (identity(2), minus.clone())
            };
            Ok(OracleValues { e, q, eigvecs: frame.vectors.clone(), w: minus, b, m, blocks: frame.blocks.clone(), frame })
        }
        (ModelKind::KickedSpinHalf, Coord::Lambda) => {
            if !(t.sin() * gamma.sin() > 0.0) {
                return Err(unsupported("closed form requires sin T sin gamma > 0"));
            }
            let frame = analytic_frames_along(spec, std::slice::from_ref(base))?.remove(0);
            let q_end = q_function((2 - p) as f64 * PI, gamma, t);
            Ok(OracleValues {
                e,
                q,
                eigvecs: frame.vectors.clone(),
                w: sigma_rotation(q_end),
                b: identity(2),
                m: sigma_rotation(half_turn),
                blocks: frame.blocks.clone(),
                frame,
            })
        }
        (ModelKind::KickedSpinThreeHalf, Coord::Lambda) => {
            if !(t.sin() * gamma.sin() > 0.0) {
                return Err(unsupported("closed form requires sin T sin gamma > 0"));
            }
            let eta = base.sphere[1];
            let frame = analytic_frames_along(spec, std::slice::from_ref(base))?.remove(0);
            let m = spin_three_half_lambda_holonomy(p, eta);
            // The block-diagonal connection vanishes along lambda in the closed-form gauge.
            Ok(OracleValues { e, q, eigvecs: frame.vectors.clone(), w: m.clone(), b: identity(4), m, blocks: frame.blocks.clone(), frame })
        }
        _ => Err(unsupported("no closed form available")),
    }
}

/// `M(C_lambda)` of the spin-3/2 model in the closed-form basis.
pub fn spin_three_half_lambda_holonomy(p: i32, eta: f64) -> CMatrix {
    let half_turn = (2 - p) as f64 * PI / 2.0;
    let z = zeros(2, 2);
    let id = identity(2);
    let mixing = block2x2(&z, &(id.clone() * (-I)), &(id * I), &z) * c(eta.sin(), 0.0)
        + block2x2(&z, &pauli(2), &pauli(2), &z) * c(eta.cos(), 0.0);
    identity(4) * c(half_turn.cos(), 0.0) - mixing * (I * half_turn.sin())
}
