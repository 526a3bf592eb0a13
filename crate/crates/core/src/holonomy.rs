//! Gauge connection, Wilson line `W`, ordered diagonal factor `B` and the
//! holonomy matrix `M = W B` of a continued bundle.
//!
//! Both factors come from overlaps of consecutive frames `O_k = V_k^dagger V_{k+1}`:
//!
//! ```text
//! W = polar(O_0) polar(O_1) ... polar(O_{K-1})
//! B = polar(D_{K-1})^dagger ... polar(D_1)^dagger polar(D_0)^dagger,   D_k = blockdiag(O_k)
//! ```
//!
//! Under any block-diagonal gauge `V_k -> V_k G_k` these transform as
//! `W -> G_0^dagger W G_K` and `B -> G_K^dagger B G_0`, so `M -> G_0^dagger M G_0`
//! holds exactly at every grid size.

use serde::{Deserialize, Serialize};

use crate::eigenframe::{Bundle, Frame};
use crate::error::{HolonomyError, Result};
use crate::matrix::{self, cis, submatrix, CMatrix, C64, I, ONE, ZERO};

/// Default entry-modulus tolerance for permutation extraction.
pub const DEFAULT_PERMUTATION_TOL: f64 = 1e-3;

/// Finite-difference connection component along the path at one grid point.
#[derive(Debug, Clone)]
pub struct ConnectionSample {
    pub k: usize,
    pub a: CMatrix,
    pub a_diag: CMatrix,
}

fn connection_from_overlap(k: usize, overlap: &CMatrix, step: f64, blocks: &[Vec<usize>]) -> Result<ConnectionSample> {
    if step == 0.0 {
        return Err(HolonomyError::InvalidInput(format!("zero path increment at grid point {k}")));
    }
    let log = matrix::log_unitary(&matrix::unitarize(overlap)?)?;
    let a = matrix::hermitian_part(&(log * (I / step)));
    let a_diag = matrix::block_diagonal_part(&a, blocks);
    Ok(ConnectionSample { k, a, a_diag })
}

/// Forward-difference connection on segment `k`.
pub fn connection_at(bundle: &Bundle, k: usize) -> Result<ConnectionSample> {
    if k >= bundle.steps() {
        return Err(HolonomyError::InvalidInput(format!("grid index {k} outside 0..{}", bundle.steps())));
    }
    let overlap = bundle.frames[k].vectors.adjoint() * &bundle.frames[k + 1].vectors;
    connection_from_overlap(k, &overlap, bundle.step_size(k), bundle.blocks())
}

/// Symmetric-difference connection at interior grid point `k`.
pub fn connection_centered(bundle: &Bundle, k: usize) -> Result<ConnectionSample> {
    if k == 0 || k >= bundle.steps() {
        return Err(HolonomyError::InvalidInput(format!("grid index {k} is not interior")));
    }
    let overlap = bundle.frames[k - 1].vectors.adjoint() * &bundle.frames[k + 1].vectors;
    connection_from_overlap(k, &overlap, bundle.path[k + 1] - bundle.path[k - 1], bundle.blocks())
}

fn check_blocks(bundle: &Bundle) -> Result<()> {
    let blocks = bundle.blocks();
    for (k, f) in bundle.frames.iter().enumerate() {
        if f.blocks != blocks {
            return Err(HolonomyError::BlockMismatch { segment: k.saturating_sub(1) });
        }
    }
    Ok(())
}

/// Wilson line over frames `from..=to` of the bundle.
pub fn wilson_segment(bundle: &Bundle, from: usize, to: usize) -> Result<CMatrix> {
    if from > to || to > bundle.steps() {
        return Err(HolonomyError::InvalidInput(format!("segment {from}..{to} outside 0..={}", bundle.steps())));
    }
    let mut w = matrix::identity(bundle.dim());
    for k in from..to {
        let overlap = bundle.frames[k].vectors.adjoint() * &bundle.frames[k + 1].vectors;
        w *= matrix::unitarize(&overlap)?;
    }
    Ok(w)
}

/// Discrete Wilson line `W`, earlier factors on the left.
pub fn wilson_w(bundle: &Bundle) -> Result<CMatrix> {
    wilson_segment(bundle, 0, bundle.steps())
}

fn block_polar(overlap: &CMatrix, blocks: &[Vec<usize>]) -> Result<CMatrix> {
    let n = overlap.nrows();
    let mut out = matrix::zeros(n, n);
    for block in blocks {
        let u = matrix::unitarize(&submatrix(overlap, block, block))?;
        for (i, &r) in block.iter().enumerate() {
            for (j, &c) in block.iter().enumerate() {
                out[(r, c)] = u[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Ordered (block-)diagonal factor `B`, later factors on the left.
pub fn ordered_b(bundle: &Bundle) -> Result<CMatrix> {
    check_blocks(bundle)?;
    let blocks = bundle.blocks();
    let mut b = matrix::identity(bundle.dim());
    for k in 0..bundle.steps() {
        let overlap = bundle.frames[k].vectors.adjoint() * &bundle.frames[k + 1].vectors;
        b = block_polar(&overlap, blocks)?.adjoint() * b;
    }
    Ok(b)
}

/// Whether a permutation acts on single bands or on degenerate blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Band,
    Block,
}

/// Outcome of [`holonomy_m`].
#[derive(Debug, Clone)]
pub struct HolonomyResult {
    pub w: CMatrix,
    pub b: CMatrix,
    pub m: CMatrix,
    pub granularity: Granularity,
    /// Column (or block) `n` is carried onto row (or block) `permutation[n]`.
    pub permutation: Option<Vec<usize>>,
    /// Dominant entry phases, or determinant phases of the block unitaries.
    pub phases: Vec<C64>,
    /// Sub-block of `M` connecting each block to its image (degenerate case only).
    pub block_unitaries: Vec<CMatrix>,
    pub delta_n: Vec<i64>,
    pub dynamical_phases: Option<Vec<f64>>,
}

/// `M = W B` with permutation extraction and `Delta n` from band tracking.
pub fn holonomy_m(bundle: &Bundle) -> Result<HolonomyResult> {
    holonomy_m_with_tol(bundle, DEFAULT_PERMUTATION_TOL)
}

pub fn holonomy_m_with_tol(bundle: &Bundle, tol: f64) -> Result<HolonomyResult> {
    let w = wilson_w(bundle)?;
    let b = ordered_b(bundle)?;
    let m = &w * &b;
    let blocks = bundle.blocks();
    let degenerate = blocks.iter().any(|blk| blk.len() > 1);
    let (granularity, permutation, phases, block_unitaries) = if degenerate {
        match classify_block_permutation(&m, blocks, tol) {
            Some(bp) => (Granularity::Block, Some(bp.map), bp.det_phases, bp.unitaries),
            None => (Granularity::Block, None, Vec::new(), Vec::new()),
        }
    } else {
        match classify_permutation(&m, tol) {
            Some(p) => (Granularity::Band, Some(p.map), p.phases, Vec::new()),
            None => (Granularity::Band, None, Vec::new(), Vec::new()),
        }
    };
    let delta_n = delta_n(bundle);
    Ok(HolonomyResult { w, b, m, granularity, permutation, phases, block_unitaries, delta_n, dynamical_phases: None })
}

/// Gauge transformation applied to every frame of a bundle.
#[derive(Debug, Clone)]
pub enum GaugeTwist {
    /// `phases[k][n] = g_n(alpha_k)`; columns become `e^{i g_n} |v_n>`.
    Diagonal(Vec<Vec<f64>>),
    /// `V_k -> V_k G_k` with `G_k` block-diagonal in the bundle's blocks.
    Block(Vec<CMatrix>),
}

/// Re-gauges a bundle. Quasienergies are untouched; twists at the loop end may differ
/// from those at the start.
pub fn apply_gauge(bundle: &Bundle, twist: &GaugeTwist) -> Result<Bundle> {
    let count = bundle.frames.len();
    let dim = bundle.dim();
    let mut out = bundle.clone();
    match twist {
        GaugeTwist::Diagonal(phases) => {
            if phases.len() != count {
                return Err(HolonomyError::DimensionMismatch { expected: count, found: phases.len() });
            }
            for (frame, g) in out.frames.iter_mut().zip(phases) {
                if g.len() != dim {
                    return Err(HolonomyError::DimensionMismatch { expected: dim, found: g.len() });
                }
                for (j, &gj) in g.iter().enumerate() {
                    let mut col = frame.vectors.column_mut(j);
                    col *= cis(gj);
                }
            }
        }
        GaugeTwist::Block(rotations) => {
            if rotations.len() != count {
                return Err(HolonomyError::DimensionMismatch { expected: count, found: rotations.len() });
            }
            let blocks = bundle.blocks();
            for (frame, g) in out.frames.iter_mut().zip(rotations) {
                if g.nrows() != dim || g.ncols() != dim {
                    return Err(HolonomyError::DimensionMismatch { expected: dim, found: g.nrows() });
                }
                let off = g - matrix::block_diagonal_part(g, blocks);
                if off.iter().any(|z| z.norm() > 1e-12) {
                    return Err(HolonomyError::InvalidInput("block twist mixes different blocks".into()));
                }
                frame.vectors = &frame.vectors * g;
            }
        }
    }
    Ok(out)
}

/// Phased permutation found in a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Permutation {
    pub map: Vec<usize>,
    pub phases: Vec<C64>,
}

/// Finds for every column the row whose entry has modulus at least `1 - tol`.
/// Returns `None` when some column has no dominant entry or two columns share a row.
pub fn classify_permutation(m: &CMatrix, tol: f64) -> Option<Permutation> {
    let n = m.ncols();
    let mut map = Vec::with_capacity(n);
    let mut phases = Vec::with_capacity(n);
    let mut used = vec![false; m.nrows()];
    for col in 0..n {
        let row = (0..m.nrows()).find(|&r| m[(r, col)].norm() >= 1.0 - tol)?;
        if used[row] {
            return None;
        }
        used[row] = true;
        let z = m[(row, col)];
        map.push(row);
        phases.push(z / z.norm());
    }
    Some(Permutation { map, phases })
}

/// Block permutation with the intra-block unitaries it carries.
#[derive(Debug, Clone)]
pub struct BlockPermutation {
    pub map: Vec<usize>,
    pub unitaries: Vec<CMatrix>,
    pub det_phases: Vec<C64>,
}

/// Block analogue of [`classify_permutation`]: block `b` maps to block `a` when the
/// sub-block `M[a, b]` has all singular values at least `1 - tol`.
pub fn classify_block_permutation(m: &CMatrix, blocks: &[Vec<usize>], tol: f64) -> Option<BlockPermutation> {
    let mut map = Vec::with_capacity(blocks.len());
    let mut unitaries = Vec::with_capacity(blocks.len());
    let mut det_phases = Vec::with_capacity(blocks.len());
    let mut used = vec![false; blocks.len()];
    for cols in blocks {
        let target = blocks.iter().position(|rows| {
            rows.len() == cols.len() && matrix::smallest_singular_value(&submatrix(m, rows, cols)) >= 1.0 - tol
        })?;
        if used[target] {
            return None;
        }
        used[target] = true;
        let sub = submatrix(m, &blocks[target], cols);
        let det = sub.determinant();
        map.push(target);
        det_phases.push(if det.norm() > 0.0 { det / det.norm() } else { ONE });
        unitaries.push(sub);
    }
    Some(BlockPermutation { map, unitaries, det_phases })
}

/// Representative quasienergy of every block of a frame, reduced to the principal range.
fn block_representatives(frame: &Frame) -> Vec<f64> {
    frame
        .blocks
        .iter()
        .map(|blk| {
            let e = frame.quasienergies[blk[0]];
            match frame.quasienergy_period {
                Some(p) => matrix::wrap_positive(e, p),
                None => e,
            }
        })
        .collect()
}

/// Index of `value` on the level ladder built from the base frame: blocks sorted by
/// principal quasienergy and replicated every quasienergy period.
fn ladder_index(sorted: &[f64], period: Option<f64>, value: f64) -> i64 {
    let nb = sorted.len() as i64;
    let nearest = |v: f64| {
        sorted
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| (*a - v).abs().total_cmp(&(*b - v).abs()))
            .map(|(i, _)| i as i64)
            .unwrap_or(0)
    };
    match period {
        Some(p) => {
            let turns = (value / p).floor();
            let reduced = value - turns * p;
            // Compare against neighbours across the period boundary as well.
            let mut best = (f64::INFINITY, 0i64);
            for shift in [-1.0, 0.0, 1.0] {
                for (i, &s) in sorted.iter().enumerate() {
                    let d = (reduced - (s + shift * p)).abs();
                    if d < best.0 {
                        best = (d, i as i64 + shift as i64 * nb);
                    }
                }
            }
            turns as i64 * nb + best.1
        }
        None => nearest(value),
    }
}

/// Ladder ranks of the base frame's blocks, one per band.
fn band_ranks(frame: &Frame) -> (Vec<f64>, Vec<usize>) {
    let reps = block_representatives(frame);
    let mut order: Vec<usize> = (0..reps.len()).collect();
    order.sort_by(|&a, &b| reps[a].total_cmp(&reps[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| reps[i]).collect();
    let mut rank_of_block = vec![0usize; reps.len()];
    for (r, &b) in order.iter().enumerate() {
        rank_of_block[b] = r;
    }
    let block_of = frame.block_of();
    (sorted, block_of.iter().map(|&b| rank_of_block[b]).collect())
}

/// Level-label shift of every tracked band over the loop.
pub fn delta_n(bundle: &Bundle) -> Vec<i64> {
    let first = &bundle.frames[0];
    let last = &bundle.frames[bundle.steps()];
    let period = first.quasienergy_period;
    let (sorted, _) = band_ranks(first);
    (0..first.dim())
        .map(|n| {
            ladder_index(&sorted, period, last.quasienergies[n]) - ladder_index(&sorted, period, first.quasienergies[n])
        })
        .collect()
}

/// Checks the label shifts against the permutation read off `M`: band `n` must land on
/// the block whose ladder rank is `rank(n) + delta_n` modulo the number of blocks.
pub fn delta_n_matches_permutation(bundle: &Bundle, result: &HolonomyResult) -> bool {
    let Some(perm) = &result.permutation else { return false };
    let first = &bundle.frames[0];
    let (sorted, ranks) = band_ranks(first);
    let nb = sorted.len() as i64;
    let block_of = first.block_of();
    (0..first.dim()).all(|n| {
        let target_rank = match result.granularity {
            Granularity::Band => ranks[perm[n]],
            Granularity::Block => {
                let blk = perm[block_of[n]];
                ranks[first.blocks[blk][0]]
            }
        } as i64;
        (ranks[n] as i64 + result.delta_n[n]).rem_euclid(nb) == target_rank
    })
}

/// `min_D ||D^dagger x D - y||_F` over diagonal unitaries `D`, with the minimizing phases.
pub fn diagonal_conjugation_distance(x: &CMatrix, y: &CMatrix) -> (f64, Vec<f64>) {
    let n = x.nrows();
    let mut g = vec![0.0; n];
    let conjugated = |g: &[f64]| CMatrix::from_fn(n, n, |i, j| x[(i, j)] * cis(g[j] - g[i]));
    let mut best = matrix::frobenius_distance(&conjugated(&g), y);
    for _ in 0..200 {
        for j in 0..n {
            let mut s = ZERO;
            for m in 0..n {
                if m != j {
                    s += x[(m, j)] * y[(m, j)].conj() * cis(-g[m]);
                    s += (x[(j, m)] * y[(j, m)].conj() * cis(g[m])).conj();
                }
            }
            if s.norm() > 0.0 {
                g[j] = -s.arg();
            }
        }
        let d = matrix::frobenius_distance(&conjugated(&g), y);
        let done = best - d <= 1e-15;
        best = best.min(d);
        if done {
            break;
        }
    }
    (best, g)
}

/// `min_G ||G^dagger x G - y||_F` over block-diagonal unitaries `G`, by block-wise
/// Procrustes sweeps started from the identity and from `init`.
pub fn block_conjugation_distance(
    x: &CMatrix,
    y: &CMatrix,
    blocks: &[Vec<usize>],
    init: Option<&CMatrix>,
) -> Result<(f64, CMatrix)> {
    let n = x.nrows();
    let mut starts = vec![matrix::identity(n)];
    if let Some(g0) = init {
        starts.push(block_polar(g0, blocks)?);
    }
    let distance = |g: &CMatrix| matrix::frobenius_distance(&(g.adjoint() * x * g), y);
    let mut best = (f64::INFINITY, matrix::identity(n));
    for mut g in starts {
        let mut d = distance(&g);
        for _ in 0..500 {
            let before = d;
            for (j, rows) in blocks.iter().enumerate() {
                let mut z = matrix::zeros(rows.len(), rows.len());
                for (a, other) in blocks.iter().enumerate() {
                    let ga = submatrix(&g, other, other);
                    let x_ja = submatrix(x, rows, other);
                    let y_ja = submatrix(y, rows, other);
                    z += &x_ja * &ga * y_ja.adjoint();
                    if a != j {
                        let x_aj = submatrix(x, other, rows);
                        let y_aj = submatrix(y, other, rows);
                        z += x_aj.adjoint() * &ga * &y_aj;
                    }
                }
                let Ok(gj) = matrix::unitarize(&z) else { continue };
                let mut trial = g.clone();
                for (i, &r) in rows.iter().enumerate() {
                    for (k, &c) in rows.iter().enumerate() {
                        trial[(r, c)] = gj[(i, k)];
                    }
                }
                let dt = distance(&trial);
                if dt < d {
                    d = dt;
                    g = trial;
                }
            }
            if before - d <= 1e-15 {
                break;
            }
        }
        if d < best.0 {
            best = (d, g);
        }
    }
    Ok(best)
}

/// Columns of `frame` reordered so that each reference block is matched by the block of
/// `frame` spanning the same subspace at the base point.
pub fn alignment_order(frame: &Frame, reference: &Frame) -> Result<Vec<usize>> {
    if frame.dim() != reference.dim() {
        return Err(HolonomyError::DimensionMismatch { expected: reference.dim(), found: frame.dim() });
    }
    let overlap = reference.vectors.adjoint() * &frame.vectors;
    let mut order = vec![0usize; frame.dim()];
    let mut used = vec![false; frame.blocks.len()];
    for rows in &reference.blocks {
        let found = frame.blocks.iter().enumerate().find(|(b, cols)| {
            !used[*b] && cols.len() == rows.len() && matrix::smallest_singular_value(&submatrix(&overlap, rows, cols)) > 0.5
        });
        let Some((b, cols)) = found else {
            return Err(HolonomyError::InvalidInput("frames do not span matching eigenspaces".into()));
        };
        used[b] = true;
        for (&r, &c) in rows.iter().zip(cols) {
            order[r] = c;
        }
    }
    Ok(order)
}

/// Frobenius distance between `m` (expressed in `frame`) and `m_ref` (expressed in
/// `reference`) after matching eigenspaces and minimizing over base-point conjugation
/// by block-diagonal unitaries.
pub fn aligned_distance(m: &CMatrix, frame: &Frame, m_ref: &CMatrix, reference: &Frame) -> Result<f64> {
    let order = alignment_order(frame, reference)?;
    let m_p = CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(order[i], order[j])]);
    let v_p = matrix::permute_columns(&frame.vectors, &order);
    let g0 = reference.vectors.adjoint() * v_p;
    let (d, _) = block_conjugation_distance(m_ref, &m_p, &reference.blocks, Some(&g0))?;
    if reference.blocks.iter().all(|b| b.len() == 1) {
        let (dd, _) = diagonal_conjugation_distance(m_ref, &m_p);
        return Ok(d.min(dd));
    }
    Ok(d)
}
