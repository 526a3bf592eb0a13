//! Instantaneous eigenframes along discretized closed loops.
//!
//! A [`Frame`] is the eigenbasis of the one-period operator (or of `H`) at one
//! parameter point. [`bundle_along`] samples a loop, diagonalizes at every grid
//! point and then runs one sequential continuation pass: columns are matched to
//! the previous frame by overlap (band tracking), quasienergies are unwrapped onto
//! the continuous branch and the gauge policy fixes phases or block rotations.
//! The last frame is never re-gauged against the first; the mismatch between them
//! is exactly what the Wilson-line factor measures.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{HolonomyError, Result};
use crate::matrix::{self, submatrix, CMatrix};
use crate::models::{self, Coord, ModelSpec, ParameterPoint};
use crate::oracles;

/// Smallest per-block singular value of a consecutive overlap accepted as continuous.
pub const DEFAULT_MIN_OVERLAP: f64 = 0.1;
/// Two candidate block assignments closer than this relative margin are ambiguous.
pub const DEFAULT_AMBIGUITY_MARGIN: f64 = 0.1;
/// Relative degeneracy tolerance, multiplied by the quasienergy period.
pub const DEFAULT_DEG_TOL_FRACTION: f64 = 1e-6;
/// Minimum number of grid steps per loop.
pub const MIN_LOOP_STEPS: usize = 16;

const CLOSURE_TOL: f64 = 1e-9;

/// Default degeneracy tolerance: `1e-6 * 2 pi / T_p` for kicked models, `1e-6` for static ones.
pub fn default_deg_tol(spec: &ModelSpec) -> f64 {
    DEFAULT_DEG_TOL_FRACTION * spec.quasienergy_period().unwrap_or(1.0)
}

/// Eigenbasis at one parameter point.
#[derive(Debug, Clone)]
pub struct Frame {
    pub point: ParameterPoint,
    /// Principal values straight from the solver; unwrapped once continued.
    pub quasienergies: Vec<f64>,
    pub vectors: CMatrix,
    /// Partition of column indices into degenerate clusters.
    pub blocks: Vec<Vec<usize>>,
    /// `Some(2 pi / T_p)` when quasienergies are only defined modulo a period.
    pub quasienergy_period: Option<f64>,
}

impl Frame {
    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    /// Block index of every column.
    pub fn block_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for (b, block) in self.blocks.iter().enumerate() {
            for &i in block {
                out[i] = b;
            }
        }
        out
    }

    /// Applies a column permutation: output column `j` is input column `perm[j]`.
    /// Blocks are remapped accordingly.
    pub fn permuted(&self, perm: &[usize]) -> Frame {
        let mut inverse = vec![0; perm.len()];
        for (j, &src) in perm.iter().enumerate() {
            inverse[src] = j;
        }
        Frame {
            point: self.point.clone(),
            quasienergies: perm.iter().map(|&i| self.quasienergies[i]).collect(),
            vectors: matrix::permute_columns(&self.vectors, perm),
            blocks: self.blocks.iter().map(|b| b.iter().map(|&i| inverse[i]).collect()).collect(),
            quasienergy_period: self.quasienergy_period,
        }
    }
}

/// How frame phases (and degenerate-block rotations) are fixed along a loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaugePolicy {
    /// Keep the solver's canonical phases.
    RawSolver,
    /// Rotate each block so its overlap with the previous frame is Hermitian positive.
    SmoothPhase,
    /// Same construction as `SmoothPhase`; the discrete diagonal connection vanishes.
    ParallelTransport,
    /// Closed-form eigenvectors of the kicked models.
    AnalyticOracle,
}

impl GaugePolicy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "raw" | "raw_solver" => Some(GaugePolicy::RawSolver),
            "smooth" | "smooth_phase" => Some(GaugePolicy::SmoothPhase),
            "parallel" | "parallel_transport" => Some(GaugePolicy::ParallelTransport),
            "analytic" | "analytic_oracle" => Some(GaugePolicy::AnalyticOracle),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GaugePolicy::RawSolver => "raw_solver",
            GaugePolicy::SmoothPhase => "smooth_phase",
            GaugePolicy::ParallelTransport => "parallel_transport",
            GaugePolicy::AnalyticOracle => "analytic_oracle",
        }
    }
}

/// Thresholds for band continuation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationOptions {
    pub min_overlap: f64,
    pub ambiguity_margin: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self { min_overlap: DEFAULT_MIN_OVERLAP, ambiguity_margin: DEFAULT_AMBIGUITY_MARGIN }
    }
}

/// Clusters sorted values into blocks by gap. With a period the values live on a
/// circle and the first and last clusters merge when they wrap around.
fn cluster(values: &[f64], tol: f64, period: Option<f64>) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let joins = i > 0 && (values[i] - values[i - 1]).abs() < tol;
        if joins {
            blocks.last_mut().expect("non-empty").push(i);
        } else {
            blocks.push(vec![i]);
        }
    }
    if let Some(p) = period {
        if blocks.len() > 1 && matrix::circular_distance(values[n - 1], values[0], p) < tol {
            let last = blocks.pop().expect("non-empty");
            blocks[0].splice(0..0, last);
        }
    }
    blocks
}

/// Diagonalizes the model at `alpha`.
///
/// Kicked models: quasienergies `eps = -arg(u)/T_p` as principal values in
/// `[0, 2 pi / T_p)`, ascending. Static models: energies ascending.
pub fn frame_at(spec: &ModelSpec, alpha: &ParameterPoint, deg_tol: f64) -> Result<Frame> {
    let period = spec.quasienergy_period();
    let (quasienergies, vectors) = match period {
        Some(p) => {
            let u = models::floquet_operator(spec, alpha)?;
            let eig = matrix::eig_unitary(&u, matrix::DEFAULT_UNITARY_TOL)?;
            let eps = eig.values.iter().map(|z| matrix::wrap_positive(-z.arg() / spec.period, p)).collect();
            (eps, eig.vectors)
        }
        None => {
            let h = models::static_hamiltonian(spec, alpha)?;
            matrix::eig_hermitian(&h, matrix::DEFAULT_HERMITIAN_TOL)?
        }
    };
    let blocks = cluster(&quasienergies, deg_tol, period);
    Ok(Frame { point: alpha.clone(), quasienergies, vectors, blocks, quasienergy_period: period })
}

/// Continues `prev` onto the raw frame `next_raw` with default thresholds.
pub fn continue_frame(prev: &Frame, next_raw: &Frame, policy: GaugePolicy) -> Result<Frame> {
    continue_frame_with(prev, next_raw, policy, &ContinuationOptions::default())
}

/// Band tracking plus gauge fixing for one grid step.
///
/// Blocks of `next_raw` are matched to blocks of `prev` greedily by the smallest
/// singular value of their overlap sub-block. The match is rejected as a band
/// crossing when the best overlap falls below `min_overlap` or the runner-up is
/// within `ambiguity_margin` of it. Reported `BandCrossing` errors carry segment 0;
/// [`bundle_along`] rewrites it to the offending segment.
pub fn continue_frame_with(
    prev: &Frame,
    next_raw: &Frame,
    policy: GaugePolicy,
    opts: &ContinuationOptions,
) -> Result<Frame> {
    let dim = prev.dim();
    if next_raw.dim() != dim {
        return Err(HolonomyError::DimensionMismatch { expected: dim, found: next_raw.dim() });
    }
    let crossing = |detail: String| HolonomyError::BandCrossing { segment: 0, detail };

    let mut prev_sizes: Vec<usize> = prev.blocks.iter().map(Vec::len).collect();
    let mut next_sizes: Vec<usize> = next_raw.blocks.iter().map(Vec::len).collect();
    prev_sizes.sort_unstable();
    next_sizes.sort_unstable();
    if prev_sizes != next_sizes {
        return Err(crossing(format!(
            "degeneracy structure changed from {:?} to {:?}",
            prev_sizes, next_sizes
        )));
    }

    let overlap = prev.vectors.adjoint() * &next_raw.vectors;
    let np = prev.blocks.len();
    let mut weights = vec![vec![0.0; np]; np];
    for (a, pa) in prev.blocks.iter().enumerate() {
        for (b, nb) in next_raw.blocks.iter().enumerate() {
            if pa.len() == nb.len() {
                weights[a][b] = matrix::smallest_singular_value(&submatrix(&overlap, pa, nb));
            }
        }
    }

    let mut candidates: Vec<(usize, usize)> = (0..np).flat_map(|a| (0..np).map(move |b| (a, b))).collect();
    candidates.sort_by(|x, y| weights[y.0][y.1].total_cmp(&weights[x.0][x.1]).then(x.cmp(y)));
    let mut assigned: Vec<Option<usize>> = vec![None; np];
    let mut taken = vec![false; np];
    for (a, b) in candidates {
        if assigned[a].is_none() && !taken[b] && prev.blocks[a].len() == next_raw.blocks[b].len() {
            assigned[a] = Some(b);
            taken[b] = true;
        }
    }

    for a in 0..np {
        let b = assigned[a].ok_or_else(|| crossing(format!("block {a} has no partner")))?;
        let best = weights[a][b];
        if best < opts.min_overlap {
            return Err(crossing(format!("block {a} overlap {best:.3e} below {:.3e}", opts.min_overlap)));
        }
        let runner_up = (0..np).filter(|&x| x != b).map(|x| weights[a][x]).fold(0.0, f64::max);
        if runner_up >= (1.0 - opts.ambiguity_margin) * best {
            return Err(crossing(format!(
                "block {a}: candidate overlaps {best:.3e} and {runner_up:.3e} within margin"
            )));
        }
    }

    let mut vectors = CMatrix::zeros(next_raw.vectors.nrows(), dim);
    let mut quasienergies = vec![0.0; dim];
    for (a, pa) in prev.blocks.iter().enumerate() {
        let nb = &next_raw.blocks[assigned[a].expect("checked above")];
        for (&dst, &src) in pa.iter().zip(nb) {
            vectors.set_column(dst, &next_raw.vectors.column(src));
            let raw = next_raw.quasienergies[src];
            let prev_eps = prev.quasienergies[dst];
            quasienergies[dst] = match next_raw.quasienergy_period {
                Some(p) => prev_eps + matrix::wrap_centered(raw - prev_eps, p),
                None => raw,
            };
        }
    }

    if matches!(policy, GaugePolicy::SmoothPhase | GaugePolicy::ParallelTransport) {
        for block in &prev.blocks {
            let prev_cols = submatrix(&prev.vectors, &(0..prev.vectors.nrows()).collect::<Vec<_>>(), block);
            let next_cols = submatrix(&vectors, &(0..vectors.nrows()).collect::<Vec<_>>(), block);
            let rotation = matrix::unitarize(&(prev_cols.adjoint() * &next_cols))?;
            let aligned = next_cols * rotation.adjoint();
            for (j, &col) in block.iter().enumerate() {
                vectors.set_column(col, &aligned.column(j));
            }
        }
    }

    Ok(Frame {
        point: next_raw.point.clone(),
        quasienergies,
        vectors,
        blocks: prev.blocks.clone(),
        quasienergy_period: next_raw.quasienergy_period,
    })
}

/// A closed path in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopDef {
    /// Every grid point equals `point`.
    Constant { point: ParameterPoint },
    /// `coord` swept from its value at `base` by `sweep` (a multiple of `2 pi`).
    Coordinate { coord: Coord, base: ParameterPoint, sweep: f64 },
    /// Piecewise-linear path through the waypoints in flat coordinate space.
    Waypoints { points: Vec<ParameterPoint> },
}

impl LoopDef {
    /// Full `2 pi` sweep of one coordinate.
    pub fn coordinate(coord: Coord, base: ParameterPoint) -> Self {
        LoopDef::Coordinate { coord, base, sweep: TAU }
    }

    pub fn base(&self) -> &ParameterPoint {
        match self {
            LoopDef::Constant { point } => point,
            LoopDef::Coordinate { base, .. } => base,
            LoopDef::Waypoints { points } => &points[0],
        }
    }

    pub fn describe(&self) -> String {
        match self {
            LoopDef::Constant { .. } => "constant".into(),
            LoopDef::Coordinate { coord, sweep, .. } => format!("{} sweep {:.6}", coord.name(), sweep),
            LoopDef::Waypoints { points } => format!("waypoints ({} points)", points.len()),
        }
    }

    /// Checks that the loop returns to its start modulo the manifold periodicities.
    pub fn check_closed(&self) -> Result<()> {
        match self {
            LoopDef::Constant { .. } => Ok(()),
            LoopDef::Coordinate { coord, base, sweep } => {
                if !coord.is_present(base) {
                    return Err(HolonomyError::InvalidInput(format!(
                        "coordinate {} not defined for this model",
                        coord.name()
                    )));
                }
                let periodic = base.is_periodic(coord.flat_index(base));
                let closed = if periodic {
                    matrix::wrap_centered(*sweep, TAU).abs() <= CLOSURE_TOL && sweep.abs() > 0.0
                } else {
                    false
                };
                if closed {
                    Ok(())
                } else {
                    Err(HolonomyError::LoopNotClosed(format!(
                        "sweep of {} by {sweep} does not return to the start",
                        coord.name()
                    )))
                }
            }
            LoopDef::Waypoints { points } => {
                if points.len() < 2 {
                    return Err(HolonomyError::LoopNotClosed("need at least two waypoints".into()));
                }
                let first = &points[0];
                if points.iter().any(|p| p.len() != first.len() || p.sphere.len() != first.sphere.len()) {
                    return Err(HolonomyError::InvalidInput("waypoints have inconsistent layouts".into()));
                }
                let start = first.to_flat();
                let end = points[points.len() - 1].to_flat();
                for (i, (s, e)) in start.iter().zip(&end).enumerate() {
                    let gap = if first.is_periodic(i) { matrix::wrap_centered(e - s, TAU).abs() } else { (e - s).abs() };
                    if gap > CLOSURE_TOL {
                        return Err(HolonomyError::LoopNotClosed(format!(
                            "coordinate {i} starts at {s} and ends at {e}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// `steps + 1` grid points with the path parameter at each. The last point is
    /// the loop end, equal to the start modulo periodicities.
    pub fn sample(&self, steps: usize) -> Result<(Vec<ParameterPoint>, Vec<f64>)> {
        self.check_closed()?;
        if steps == 0 {
            return Err(HolonomyError::InvalidInput("loop needs at least one step".into()));
        }
        match self {
            LoopDef::Constant { point } => {
                let params = (0..=steps).map(|k| TAU * k as f64 / steps as f64).collect();
                Ok((vec![point.clone(); steps + 1], params))
            }
            LoopDef::Coordinate { coord, base, sweep } => {
                let start = base.get(*coord);
                let mut points = Vec::with_capacity(steps + 1);
                let mut params = Vec::with_capacity(steps + 1);
                for k in 0..=steps {
                    let s = sweep * k as f64 / steps as f64;
                    points.push(base.with(*coord, start + s));
                    params.push(s.abs());
                }
                Ok((points, params))
            }
            LoopDef::Waypoints { points: waypoints } => sample_waypoints(waypoints, steps),
        }
    }
}

fn sample_waypoints(waypoints: &[ParameterPoint], steps: usize) -> Result<(Vec<ParameterPoint>, Vec<f64>)> {
    let flats: Vec<Vec<f64>> = waypoints.iter().map(ParameterPoint::to_flat).collect();
    let lengths: Vec<f64> = flats
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt())
        .collect();
    let total: f64 = lengths.iter().sum();
    if total <= 0.0 {
        let params = (0..=steps).map(|k| TAU * k as f64 / steps as f64).collect();
        return Ok((vec![waypoints[0].clone(); steps + 1], params));
    }
    let live: Vec<usize> = (0..lengths.len()).filter(|&j| lengths[j] > 0.0).collect();
    if steps < live.len() {
        return Err(HolonomyError::InvalidInput(format!(
            "{steps} steps cannot cover {} path segments",
            live.len()
        )));
    }
    let mut counts = vec![0usize; lengths.len()];
    for &j in &live {
        counts[j] = ((steps as f64 * lengths[j] / total).round() as usize).max(1);
    }
    // Fix rounding drift on the longest segment.
    let longest = *live.iter().max_by(|&&a, &&b| lengths[a].total_cmp(&lengths[b])).expect("non-empty");
    let assigned: usize = counts.iter().sum();
    if assigned > steps {
        let excess = assigned - steps;
        if counts[longest] <= excess {
            return Err(HolonomyError::InvalidInput("too few steps for this waypoint path".into()));
        }
        counts[longest] -= excess;
    } else {
        counts[longest] += steps - assigned;
    }

    let template = &waypoints[0];
    let mut points = vec![template.clone()];
    let mut params = vec![0.0];
    let mut travelled = 0.0;
    for &j in &live {
        let (a, b) = (&flats[j], &flats[j + 1]);
        for step in 1..=counts[j] {
            let t = step as f64 / counts[j] as f64;
            let flat: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect();
            points.push(template.with_flat(&flat));
            params.push(travelled + t * lengths[j]);
        }
        travelled += lengths[j];
    }
    Ok((points, params))
}

/// Descriptive data about the loop a bundle was built on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopMeta {
    pub description: String,
    pub steps: usize,
    /// Total path parameter swept.
    pub swept: f64,
}

/// Gauge-continued frames along a closed loop; `frames[K]` sits at the loop end.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub frames: Vec<Frame>,
    /// Path parameter at each frame.
    pub path: Vec<f64>,
    pub policy: GaugePolicy,
    pub loop_meta: LoopMeta,
}

impl Bundle {
    /// Number of grid steps `K`.
    pub fn steps(&self) -> usize {
        self.frames.len() - 1
    }

    /// Parameter increment of segment `k` (from frame `k` to `k + 1`).
    pub fn step_size(&self, k: usize) -> f64 {
        self.path[k + 1] - self.path[k]
    }

    pub fn dim(&self) -> usize {
        self.frames[0].dim()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.frames[0].blocks
    }
}

fn with_segment(err: HolonomyError, segment: usize) -> HolonomyError {
    match err {
        HolonomyError::BandCrossing { detail, .. } => HolonomyError::BandCrossing { segment, detail },
        other => other,
    }
}

/// Raw (uncontinued) frames at the given points under `policy`.
fn raw_frames(spec: &ModelSpec, points: &[ParameterPoint], policy: GaugePolicy, deg_tol: f64) -> Result<Vec<Frame>> {
    match policy {
        GaugePolicy::AnalyticOracle => oracles::analytic_frames_along(spec, points),
        _ => points.iter().map(|p| frame_at(spec, p, deg_tol)).collect(),
    }
}

/// Continues frames along an open path of points.
pub fn track_path(
    spec: &ModelSpec,
    points: &[ParameterPoint],
    policy: GaugePolicy,
    deg_tol: f64,
    opts: &ContinuationOptions,
) -> Result<Vec<Frame>> {
    let raw = raw_frames(spec, points, policy, deg_tol)?;
    let mut frames = Vec::with_capacity(raw.len());
    let mut iter = raw.into_iter();
    let Some(first) = iter.next() else {
        return Ok(frames);
    };
    frames.push(first);
    for (segment, next) in iter.enumerate() {
        let prev = frames.last().expect("non-empty");
        let continued = continue_frame_with(prev, &next, policy, opts).map_err(|e| with_segment(e, segment))?;
        frames.push(continued);
    }
    Ok(frames)
}

/// Samples `loop_def` with `steps` segments and continues frames around it.
pub fn bundle_along(
    spec: &ModelSpec,
    loop_def: &LoopDef,
    steps: usize,
    policy: GaugePolicy,
    deg_tol: f64,
) -> Result<Bundle> {
    bundle_along_with(spec, loop_def, steps, policy, deg_tol, &ContinuationOptions::default())
}

pub fn bundle_along_with(
    spec: &ModelSpec,
    loop_def: &LoopDef,
    steps: usize,
    policy: GaugePolicy,
    deg_tol: f64,
    opts: &ContinuationOptions,
) -> Result<Bundle> {
    if steps < MIN_LOOP_STEPS {
        return Err(HolonomyError::InvalidInput(format!("K = {steps} is below the minimum {MIN_LOOP_STEPS}")));
    }
    let (points, path) = loop_def.sample(steps)?;
    let frames = track_path(spec, &points, policy, deg_tol, opts)?;
    let swept = path[path.len() - 1] - path[0];
    Ok(Bundle {
        frames,
        path,
        policy,
        loop_meta: LoopMeta { description: loop_def.describe(), steps, swept },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::max_abs_diff;
    use std::f64::consts::PI;

    fn spin_half() -> ModelSpec {
        ModelSpec::spin_half(1.0, 1)
    }

    #[test]
    fn frame_at_without_kick_is_standard_basis() {
        let spec = spin_half();
        let f = frame_at(&spec, &ParameterPoint::spin_half(0.0, 0.7, 0.0), default_deg_tol(&spec)).unwrap();
        assert!((f.quasienergies[0] - 1.0).abs() < 1e-14);
        assert!((f.quasienergies[1] - (2.0 * PI - 1.0)).abs() < 1e-14);
        assert!(max_abs_diff(&f.vectors, &matrix::identity(2)) < 1e-14);
        assert_eq!(f.blocks, vec![vec![0], vec![1]]);
    }

    #[test]
    fn spin_three_half_has_two_doublets() {
        let spec = ModelSpec::spin_three_half(1.0, 1);
        let alpha = ParameterPoint::spin_three_half(1.1, 0.7, 0.4, 0.3, 1.2);
        let f = frame_at(&spec, &alpha, default_deg_tol(&spec)).unwrap();
        assert_eq!(f.blocks.len(), 2);
        assert!(f.blocks.iter().all(|b| b.len() == 2));
    }

    #[test]
    fn clustering_wraps_around_circle() {
        let blocks = cluster(&[1e-9, 1.0, TAU - 1e-9], 1e-6, Some(TAU));
        assert_eq!(blocks, vec![vec![2, 0], vec![1]]);
        let blocks = cluster(&[1e-9, 1.0, TAU - 1e-9], 1e-6, None);
        assert_eq!(blocks.len(), 3);
    }

    #[test]
    fn continuation_of_identical_frame_is_identity() {
        let spec = spin_half();
        let f = frame_at(&spec, &ParameterPoint::spin_half(1.0, 0.7, 0.2), 1e-6).unwrap();
        for policy in [GaugePolicy::RawSolver, GaugePolicy::SmoothPhase, GaugePolicy::ParallelTransport] {
            let g = continue_frame(&f, &f, policy).unwrap();
            assert!(max_abs_diff(&g.vectors, &f.vectors) < 1e-14);
            assert_eq!(g.quasienergies, f.quasienergies);
        }
    }

    #[test]
    fn continuation_undoes_column_swap() {
        let spec = spin_half();
        let f = frame_at(&spec, &ParameterPoint::spin_half(1.0, 0.7, 0.2), 1e-6).unwrap();
        let swapped = f.permuted(&[1, 0]);
        let g = continue_frame(&f, &swapped, GaugePolicy::RawSolver).unwrap();
        assert!(max_abs_diff(&g.vectors, &f.vectors) < 1e-14);
        assert!((g.quasienergies[0] - f.quasienergies[0]).abs() < 1e-14);
    }

    #[test]
    fn ambiguous_overlap_is_a_band_crossing() {
        let spec = spin_half();
        let f = frame_at(&spec, &ParameterPoint::spin_half(1.0, 0.7, 0.2), 1e-6).unwrap();
        let mut g = f.clone();
        // Rotate the basis by 45 degrees: both assignments look equally good.
        let h = matrix::pauli(2);
        g.vectors = &f.vectors * matrix::expm_antihermitian_generator(&h, PI / 4.0).unwrap();
        let err = continue_frame(&f, &g, GaugePolicy::RawSolver).unwrap_err();
        assert!(matches!(err, HolonomyError::BandCrossing { .. }));
    }

    #[test]
    fn loops_must_close() {
        let base = ParameterPoint::spin_half(0.0, 0.7, 0.0);
        let open = LoopDef::Coordinate { coord: Coord::Lambda, base: base.clone(), sweep: PI };
        assert!(matches!(open.check_closed(), Err(HolonomyError::LoopNotClosed(_))));
        let wp = LoopDef::Waypoints {
            points: vec![base.clone(), base.with(Coord::Gamma, 1.0), base.with(Coord::Gamma, 0.9)],
        };
        assert!(matches!(wp.check_closed(), Err(HolonomyError::LoopNotClosed(_))));
        let wp = LoopDef::Waypoints {
            points: vec![base.clone(), base.with(Coord::Xi, PI), base.with(Coord::Xi, TAU)],
        };
        assert!(wp.check_closed().is_ok());
        let (pts, params) = wp.sample(20).unwrap();
        assert_eq!(pts.len(), 21);
        assert!((params[20] - TAU).abs() < 1e-12);
    }

    #[test]
    fn constant_loop_frames_are_identical() {
        let spec = spin_half();
        let point = ParameterPoint::spin_half(1.0, 0.7, 0.2);
        let bundle = bundle_along(&spec, &LoopDef::Constant { point }, 32, GaugePolicy::SmoothPhase, 1e-6).unwrap();
        assert_eq!(bundle.steps(), 32);
        for f in &bundle.frames {
            assert!(max_abs_diff(&f.vectors, &bundle.frames[0].vectors) < 1e-14);
        }
    }

    #[test]
    fn too_few_steps_rejected() {
        let spec = spin_half();
        let l = LoopDef::coordinate(Coord::Lambda, ParameterPoint::spin_half(0.0, 0.7, 0.0));
        assert!(matches!(
            bundle_along(&spec, &l, 8, GaugePolicy::SmoothPhase, 1e-6),
            Err(HolonomyError::InvalidInput(_))
        ));
    }

    #[test]
    fn lambda_loop_exchanges_bands() {
        // Q shifts by pi/2 per half turn of (2-p) lambda / 2, so after the loop band 0
        // lies along band 1 of the start frame.
        let spec = spin_half();
        let l = LoopDef::coordinate(Coord::Lambda, ParameterPoint::spin_half(0.0, 0.7, 0.0));
        let bundle = bundle_along(&spec, &l, 512, GaugePolicy::SmoothPhase, 1e-6).unwrap();
        let first = &bundle.frames[0].vectors;
        let last = &bundle.frames[512].vectors;
        let o = first.adjoint() * last;
        assert!((o[(1, 0)].norm() - 1.0).abs() < 1e-10);
        assert!((o[(0, 1)].norm() - 1.0).abs() < 1e-10);
    }
}
