//! Parametrized systems: kicked spin-1/2 and spin-3/2 Floquet models, plus a hook
//! for caller-supplied static Hamiltonians.
//!
//! The kicked models evolve one unit period as the symmetric sandwich
//! `U = e^{-i T/2 D} e^{-i lambda V} e^{-i T/2 D}` with drift `D` (`sigma_3` or
//! `tau_5`) and kick `V = p/2 + (2-p)/2 sum_i b_i G_i`, where `b` is a unit vector
//! on the sphere and the `G_i` anticommute and square to one. That form makes
//! `e^{i 2 pi V} = 1`, so the models are `2 pi` periodic in `lambda`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{HolonomyError, Result};
use crate::matrix::{self, block2x2, cis, diag, identity, pauli, zeros, CMatrix, C64, I};

/// A point on the parameter manifold.
///
/// `sphere` holds `(gamma, xi)` for the spin-1/2 model and `(gamma, eta, xi, zeta)`
/// for spin-3/2. Angles are stored unwrapped; reduction modulo `2 pi` only happens
/// inside formulas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterPoint {
    pub lambda: f64,
    pub sphere: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generic: Option<Vec<f64>>,
}

impl ParameterPoint {
    pub fn spin_half(lambda: f64, gamma: f64, xi: f64) -> Self {
        Self { lambda, sphere: vec![gamma, xi], generic: None }
    }

    pub fn spin_three_half(lambda: f64, gamma: f64, eta: f64, xi: f64, zeta: f64) -> Self {
        Self { lambda, sphere: vec![gamma, eta, xi, zeta], generic: None }
    }

    pub fn generic(coords: Vec<f64>) -> Self {
        Self { lambda: 0.0, sphere: Vec::new(), generic: Some(coords) }
    }

    /// Number of coordinates in the flat layout `[lambda, sphere.., generic..]`.
    pub fn len(&self) -> usize {
        1 + self.sphere.len() + self.generic.as_ref().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.push(self.lambda);
        v.extend_from_slice(&self.sphere);
        if let Some(g) = &self.generic {
            v.extend_from_slice(g);
        }
        v
    }

    /// Inverse of [`to_flat`](Self::to_flat), using `self` as the layout template.
    pub fn with_flat(&self, flat: &[f64]) -> Self {
        assert_eq!(flat.len(), self.len(), "flat coordinate count mismatch");
        let ns = self.sphere.len();
        Self {
            lambda: flat[0],
            sphere: flat[1..1 + ns].to_vec(),
            generic: self.generic.as_ref().map(|_| flat[1 + ns..].to_vec()),
        }
    }

    /// Whether flat coordinate `i` is an angle (periodic with `2 pi`).
    pub fn is_periodic(&self, i: usize) -> bool {
        i <= self.sphere.len()
    }

    pub fn get(&self, coord: Coord) -> f64 {
        self.to_flat()[coord.flat_index(self)]
    }

    pub fn with(&self, coord: Coord, value: f64) -> Self {
        let mut flat = self.to_flat();
        flat[coord.flat_index(self)] = value;
        self.with_flat(&flat)
    }
}

/// Named coordinate of a [`ParameterPoint`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coord {
    Lambda,
    Gamma,
    Eta,
    Xi,
    Zeta,
    Generic(usize),
}

impl Coord {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "lambda" => Some(Coord::Lambda),
            "gamma" => Some(Coord::Gamma),
            "eta" => Some(Coord::Eta),
            "xi" => Some(Coord::Xi),
            "zeta" => Some(Coord::Zeta),
            other => other
                .strip_prefix("g")
                .and_then(|i| i.parse().ok())
                .map(Coord::Generic),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Coord::Lambda => "lambda".into(),
            Coord::Gamma => "gamma".into(),
            Coord::Eta => "eta".into(),
            Coord::Xi => "xi".into(),
            Coord::Zeta => "zeta".into(),
            Coord::Generic(i) => format!("g{i}"),
        }
    }

    /// Index into the flat layout of `point`. Panics if the point lacks the coordinate.
    pub fn flat_index(&self, point: &ParameterPoint) -> usize {
        let ns = point.sphere.len();
        let idx = match (self, ns) {
            (Coord::Lambda, _) => 0,
            (Coord::Gamma, 2 | 4) => 1,
            (Coord::Xi, 2) => 2,
            (Coord::Eta, 4) => 2,
            (Coord::Xi, 4) => 3,
            (Coord::Zeta, 4) => 4,
            (Coord::Generic(i), _) if point.generic.as_ref().is_some_and(|g| *i < g.len()) => 1 + ns + i,
            _ => panic!("coordinate {} not present on this parameter point", self.name()),
        };
        idx
    }

    pub fn is_present(&self, point: &ParameterPoint) -> bool {
        let ns = point.sphere.len();
        match self {
            Coord::Lambda => true,
            Coord::Gamma => ns == 2 || ns == 4,
            Coord::Xi => ns == 2 || ns == 4,
            Coord::Eta | Coord::Zeta => ns == 4,
            Coord::Generic(i) => point.generic.as_ref().is_some_and(|g| *i < g.len()),
        }
    }
}

/// Caller-supplied Hermitian-matrix-valued function for static models.
#[derive(Clone)]
pub struct CustomModel {
    pub name: String,
    pub dim: usize,
    pub hamiltonian: Arc<dyn Fn(&ParameterPoint) -> CMatrix + Send + Sync>,
}

impl fmt::Debug for CustomModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomModel").field("name", &self.name).field("dim", &self.dim).finish()
    }
}

#[derive(Debug, Clone)]
pub enum ModelKind {
    KickedSpinHalf,
    KickedSpinThreeHalf,
    CustomStatic(CustomModel),
}

#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Constant-field strength `T`.
    pub t_field: f64,
    /// Winding integer `p`.
    pub winding: i32,
    /// Unit period `T_p`; 1 for the kicked models.
    pub period: f64,
}

impl ModelSpec {
    pub fn spin_half(t_field: f64, winding: i32) -> Self {
        Self { kind: ModelKind::KickedSpinHalf, t_field, winding, period: 1.0 }
    }

    pub fn spin_three_half(t_field: f64, winding: i32) -> Self {
        Self { kind: ModelKind::KickedSpinThreeHalf, t_field, winding, period: 1.0 }
    }

    pub fn custom_static(model: CustomModel) -> Self {
        Self { kind: ModelKind::CustomStatic(model), t_field: 0.0, winding: 0, period: 1.0 }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            ModelKind::KickedSpinHalf => 2,
            ModelKind::KickedSpinThreeHalf => 4,
            ModelKind::CustomStatic(m) => m.dim,
        }
    }

    pub fn is_kicked(&self) -> bool {
        !matches!(self.kind, ModelKind::CustomStatic(_))
    }

    /// Quasienergy period `2 pi / T_p` for kicked models; `None` for static models,
    /// whose energies live on the real line.
    pub fn quasienergy_period(&self) -> Option<f64> {
        self.is_kicked().then(|| 2.0 * std::f64::consts::PI / self.period)
    }

    pub fn name(&self) -> String {
        match &self.kind {
            ModelKind::KickedSpinHalf => "kicked_spin_half".into(),
            ModelKind::KickedSpinThreeHalf => "kicked_spin_three_half".into(),
            ModelKind::CustomStatic(m) => format!("custom_static:{}", m.name),
        }
    }

    /// The kick operator `V` at `alpha`.
    pub fn kick(&self, alpha: &ParameterPoint) -> Result<CMatrix> {
        match &self.kind {
            ModelKind::KickedSpinHalf => {
                let [gamma, xi] = sphere_coords::<2>(alpha)?;
                Ok(build_v_spin_half(self.winding, gamma, xi))
            }
            ModelKind::KickedSpinThreeHalf => {
                let [gamma, eta, xi, zeta] = sphere_coords::<4>(alpha)?;
                Ok(build_v_spin_threehalf(self.winding, gamma, eta, xi, zeta))
            }
            ModelKind::CustomStatic(_) => Err(HolonomyError::UnsupportedModel(self.name())),
        }
    }
}

fn sphere_coords<const N: usize>(alpha: &ParameterPoint) -> Result<[f64; N]> {
    alpha.sphere.as_slice().try_into().map_err(|_| HolonomyError::DimensionMismatch {
        expected: N,
        found: alpha.sphere.len(),
    })
}

/// Unit vector on S^2: `(sin g cos x, sin g sin x, cos g)`.
pub fn unit_vector_s2(gamma: f64, xi: f64) -> [f64; 3] {
    [gamma.sin() * xi.cos(), gamma.sin() * xi.sin(), gamma.cos()]
}

/// Unit vector on S^4.
pub fn unit_vector_s4(gamma: f64, eta: f64, xi: f64, zeta: f64) -> [f64; 5] {
    let (sg, cg) = gamma.sin_cos();
    let (se, ce) = eta.sin_cos();
    [sg * ce * xi.cos(), sg * ce * xi.sin(), sg * se * zeta.cos(), sg * se * zeta.sin(), cg]
}

/// Clifford generator `tau_i`, `i` in 1..=5. Entries are exactly 0, +-1 or +-i.
pub fn tau(i: usize) -> CMatrix {
    let z = zeros(2, 2);
    let id = identity(2);
    match i {
        1 => block2x2(&z, &(pauli(2) * I), &(pauli(2) * (-I)), &z),
        2 => block2x2(&z, &(pauli(1) * (-I)), &(pauli(1) * I), &z),
        3 => block2x2(&z, &id, &id, &z),
        4 => block2x2(&z, &(pauli(3) * (-I)), &(pauli(3) * I), &z),
        5 => block2x2(&id, &z, &z, &(-id.clone())),
        _ => panic!("tau index must be in 1..=5, got {i}"),
    }
}

fn kick_from_generators(p: i32, b: &[f64], generator: impl Fn(usize) -> CMatrix, dim: usize) -> CMatrix {
    let mut field = zeros(dim, dim);
    for (i, bi) in b.iter().enumerate() {
        field += generator(i + 1) * C64::new(*bi, 0.0);
    }
    identity(dim) * C64::new(p as f64 / 2.0, 0.0) + field * C64::new((2 - p) as f64 / 2.0, 0.0)
}

/// `V = p/2 + (2-p)/2 b.sigma`.
pub fn build_v_spin_half(p: i32, gamma: f64, xi: f64) -> CMatrix {
    kick_from_generators(p, &unit_vector_s2(gamma, xi), pauli, 2)
}

/// `V = p/2 + (2-p)/2 b.tau`.
pub fn build_v_spin_threehalf(p: i32, gamma: f64, eta: f64, xi: f64, zeta: f64) -> CMatrix {
    kick_from_generators(p, &unit_vector_s4(gamma, eta, xi, zeta), tau, 4)
}

/// Drift half-step `e^{-i T/2 D}`; `D` is diagonal with entries +-1.
fn drift_half_step(spec: &ModelSpec) -> CMatrix {
    let signs: &[f64] = match spec.kind {
        ModelKind::KickedSpinHalf => &[1.0, -1.0],
        _ => &[1.0, 1.0, -1.0, -1.0],
    };
    let phases: Vec<C64> = signs.iter().map(|s| cis(-0.5 * spec.t_field * s)).collect();
    diag(&phases)
}

/// One-period Floquet operator of a kicked model.
pub fn floquet_operator(spec: &ModelSpec, alpha: &ParameterPoint) -> Result<CMatrix> {
    let v = spec.kick(alpha)?;
    let kick = matrix::expm_antihermitian_generator(&v, alpha.lambda)?;
    let half = drift_half_step(spec);
    Ok(&half * kick * &half)
}

/// `H(alpha)` of a static model, checked for Hermiticity.
pub fn static_hamiltonian(spec: &ModelSpec, alpha: &ParameterPoint) -> Result<CMatrix> {
    match &spec.kind {
        ModelKind::CustomStatic(m) => {
            let h = (m.hamiltonian)(alpha);
            if h.nrows() != m.dim || h.ncols() != m.dim {
                return Err(HolonomyError::DimensionMismatch { expected: m.dim, found: h.nrows() });
            }
            let defect = matrix::hermiticity_defect(&h);
            if !(defect <= matrix::DEFAULT_HERMITIAN_TOL) {
                return Err(HolonomyError::NotHermitian { defect, tol: matrix::DEFAULT_HERMITIAN_TOL });
            }
            Ok(h)
        }
        _ => Err(HolonomyError::UnsupportedModel(spec.name())),
    }
}

/// Evolution over one unit period: the Floquet operator for kicked models,
/// `e^{-i H T_p}` for static ones.
pub fn one_period_operator(spec: &ModelSpec, alpha: &ParameterPoint) -> Result<CMatrix> {
    if spec.is_kicked() {
        floquet_operator(spec, alpha)
    } else {
        matrix::expm_antihermitian_generator(&static_hamiltonian(spec, alpha)?, spec.period)
    }
}

/// Spin-1/2 Zeeman Hamiltonian `b(gamma, xi).sigma` as a static model on
/// coordinates `(gamma, xi)` carried in the sphere slot.
pub fn zeeman_model() -> CustomModel {
    CustomModel {
        name: "zeeman".into(),
        dim: 2,
        hamiltonian: Arc::new(|alpha: &ParameterPoint| {
            let b = unit_vector_s2(alpha.sphere[0], alpha.sphere[1]);
            pauli(1) * C64::new(b[0], 0.0) + pauli(2) * C64::new(b[1], 0.0) + pauli(3) * C64::new(b[2], 0.0)
        }),
    }
}

/// Index permutation grouping spin-3/2 components `{1,3}` and `{2,4}` (1-based).
pub const SPLIT_PERMUTATION: [usize; 4] = [0, 2, 1, 3];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{eig_hermitian, max_abs_diff, permute_columns, unitarity_defect, ONE};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn spin_half_kick_examples() {
        for xi in [0.0, 1.3, -2.0] {
            assert!(max_abs_diff(&build_v_spin_half(0, 0.0, xi), &pauli(3)) < 1e-15);
            assert!(max_abs_diff(&build_v_spin_half(2, 0.4, xi), &identity(2)) < 1e-15);
        }
        let v = build_v_spin_half(1, PI / 2.0, 0.0);
        let expect = identity(2) * C64::new(0.5, 0.0) + pauli(1) * C64::new(0.5, 0.0);
        assert!(max_abs_diff(&v, &expect) < 1e-15);
        let (w, _) = eig_hermitian(&v, 1e-12).unwrap();
        assert!((w[0] - 0.0).abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn spin_three_half_kick_examples() {
        let v = build_v_spin_threehalf(0, 0.0, 0.3, 0.2, 0.1);
        assert!(max_abs_diff(&v, &diag(&[ONE, ONE, -ONE, -ONE])) < 1e-15);

        let v = build_v_spin_threehalf(1, PI / 2.0, 0.0, 0.0, 0.0);
        let expect = identity(4) * C64::new(0.5, 0.0) + tau(1) * C64::new(0.5, 0.0);
        assert!(max_abs_diff(&v, &expect) < 1e-15);
        let (w, _) = eig_hermitian(&v, 1e-12).unwrap();
        for (got, want) in w.iter().zip([0.0, 0.0, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn clifford_relations_are_exact() {
        for i in 1..=5 {
            for j in 1..=5 {
                let anti = tau(i) * tau(j) + tau(j) * tau(i);
                let expect = if i == j { identity(4) * C64::new(2.0, 0.0) } else { zeros(4, 4) };
                assert_eq!(anti, expect, "tau_{i} tau_{j}");
            }
        }
    }

    #[test]
    fn sphere_vectors_are_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let a: [f64; 4] = std::array::from_fn(|_| rng.random_range(-7.0..7.0));
            let n: f64 = unit_vector_s4(a[0], a[1], a[2], a[3]).iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn floquet_without_kick_is_drift() {
        let spec = ModelSpec::spin_half(0.8, 1);
        let u = floquet_operator(&spec, &ParameterPoint::spin_half(0.0, 0.5, 0.3)).unwrap();
        assert!(max_abs_diff(&u, &diag(&[cis(-0.8), cis(0.8)])) < 1e-14);
    }

    #[test]
    fn floquet_without_drift_is_kick() {
        let spec = ModelSpec::spin_half(0.0, 1);
        let u = floquet_operator(&spec, &ParameterPoint::spin_half(PI, PI / 2.0, 0.0)).unwrap();
        // V = (1 + sigma_1)/2 is a projector, so e^{-i pi V} = 1 - 2V = -sigma_1.
        let expect = pauli(1) * C64::new(-1.0, 0.0);
        assert!(max_abs_diff(&u, &expect) < 1e-14);
        assert!(unitarity_defect(&u) < 1e-12);
    }

    #[test]
    fn custom_static_requires_custom_model() {
        let spec = ModelSpec::spin_half(1.0, 1);
        assert!(matches!(
            static_hamiltonian(&spec, &ParameterPoint::spin_half(0.0, 0.0, 0.0)),
            Err(HolonomyError::UnsupportedModel(_))
        ));
        let custom = ModelSpec::custom_static(zeeman_model());
        assert!(matches!(
            floquet_operator(&custom, &ParameterPoint::spin_half(0.0, 0.0, 0.0)),
            Err(HolonomyError::UnsupportedModel(_))
        ));
    }

    #[test]
    fn static_hamiltonian_examples() {
        let constant = CustomModel { name: "s3".into(), dim: 2, hamiltonian: Arc::new(|_| pauli(3)) };
        let spec = ModelSpec::custom_static(constant);
        let h = static_hamiltonian(&spec, &ParameterPoint::generic(vec![0.1])).unwrap();
        assert!(max_abs_diff(&h, &pauli(3)) < 1e-15);

        let spec = ModelSpec::custom_static(zeeman_model());
        let (g, x) = (PI / 3.0, PI / 4.0);
        let h = static_hamiltonian(&spec, &ParameterPoint::spin_half(0.0, g, x)).unwrap();
        let (w, vecs) = eig_hermitian(&h, 1e-12).unwrap();
        assert!((w[0] + 1.0).abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14);
        // Spin-coherent state aligned with b: (e^{-ix/2} cos g/2, e^{ix/2} sin g/2).
        let up = [cis(-x / 2.0) * (g / 2.0).cos(), cis(x / 2.0) * (g / 2.0).sin()];
        let overlap = vecs[(0, 1)].conj() * up[0] + vecs[(1, 1)].conj() * up[1];
        assert!((overlap.norm() - 1.0).abs() < 1e-14);

        let broken = CustomModel {
            name: "broken".into(),
            dim: 2,
            hamiltonian: Arc::new(|_| crate::matrix::from_rows(2, 2, &[ONE, ONE, -ONE, ONE])),
        };
        let spec = ModelSpec::custom_static(broken);
        assert!(matches!(
            static_hamiltonian(&spec, &ParameterPoint::generic(vec![0.0])),
            Err(HolonomyError::NotHermitian { .. })
        ));
    }

    #[test]
    fn kick_spectrum_and_periodicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in 0..4 {
            for _ in 0..25 {
                let a: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..2.0 * PI));
                let v = build_v_spin_threehalf(p, a[0], a[1], a[2], a[3]);
                let (w, _) = eig_hermitian(&v, 1e-12).unwrap();
                let lo = p as f64 / 2.0 - (2 - p) as f64 / 2.0;
                let hi = p as f64 / 2.0 + (2 - p) as f64 / 2.0;
                let (lo, hi) = (lo.min(hi), lo.max(hi));
                for (got, want) in w.iter().zip([lo, lo, hi, hi]) {
                    assert!((got - want).abs() < 1e-12);
                }
                let full = matrix::expm_antihermitian_generator(&v, -2.0 * PI).unwrap();
                assert!(max_abs_diff(&full, &identity(4)) < 1e-10);
            }
        }
    }

    #[test]
    fn eta_half_pi_splits_into_two_spin_half_systems() {
        let (t, p, lambda, gamma, zeta) = (0.9, 1, 1.7, 0.6, 0.4);
        let spec = ModelSpec::spin_three_half(t, p);
        let u = floquet_operator(&spec, &ParameterPoint::spin_three_half(lambda, gamma, PI / 2.0, 0.25, zeta))
            .unwrap();
        let perm = SPLIT_PERMUTATION;
        let permuted = permute_columns(&permute_columns(&u, &perm).transpose(), &perm).transpose();
        let half = ModelSpec::spin_half(t, p);
        let upper = floquet_operator(&half, &ParameterPoint::spin_half(lambda, gamma, zeta)).unwrap();
        let lower = floquet_operator(&half, &ParameterPoint::spin_half(lambda, gamma, -zeta)).unwrap();
        let expect = block2x2(&upper, &zeros(2, 2), &zeros(2, 2), &lower);
        assert!(max_abs_diff(&permuted, &expect) < 1e-13);
    }
}
