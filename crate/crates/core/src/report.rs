//! JSON encoding of results.
//!
//! Complex numbers are `[re, im]`, matrices are row-major nested arrays of those,
//! phases are `{ "re": .., "im": .. }`. Object keys are emitted sorted, so the same
//! value always serializes to the same bytes. [`seal`] records a SHA-256 of the
//! document without its `timestamp` and `canonical_hash` fields.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::HolonomyError;
use crate::holonomy::{Granularity, HolonomyResult};
use crate::matrix::{CMatrix, C64};

/// Serde adapter for a complex matrix as nested `[re, im]` rows.
pub mod matrix_serde {
    use super::*;

    pub fn to_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix, String> {
        let n = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err("ragged matrix rows".into());
        }
        Ok(CMatrix::from_fn(n, cols, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
    }

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

mod matrices_serde {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[CMatrix], s: S) -> Result<S::Ok, S::Error> {
        ms.iter().map(matrix_serde::to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMatrix>, D::Error> {
        let all = Vec::<Vec<Vec<[f64; 2]>>>::deserialize(d)?;
        all.iter().map(|rows| matrix_serde::from_rows(rows).map_err(serde::de::Error::custom)).collect()
    }
}

/// A unit-modulus phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for Phase {
    fn from(z: C64) -> Self {
        Phase { re: z.re, im: z.im }
    }
}

impl From<Phase> for C64 {
    fn from(p: Phase) -> Self {
        C64::new(p.re, p.im)
    }
}

/// Serializable form of a [`HolonomyResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolonomyRecord {
    #[serde(with = "matrix_serde")]
    pub w: CMatrix,
    #[serde(with = "matrix_serde")]
    pub b: CMatrix,
    #[serde(with = "matrix_serde")]
    pub m: CMatrix,
    pub granularity: Granularity,
    pub permutation: Option<Vec<usize>>,
    pub phases: Vec<Phase>,
    #[serde(with = "matrices_serde")]
    pub block_unitaries: Vec<CMatrix>,
    pub delta_n: Vec<i64>,
    pub dynamical_phases: Option<Vec<f64>>,
}

impl From<&HolonomyResult> for HolonomyRecord {
    fn from(r: &HolonomyResult) -> Self {
        HolonomyRecord {
            w: r.w.clone(),
            b: r.b.clone(),
            m: r.m.clone(),
            granularity: r.granularity,
            permutation: r.permutation.clone(),
            phases: r.phases.iter().copied().map(Phase::from).collect(),
            block_unitaries: r.block_unitaries.clone(),
            delta_n: r.delta_n.clone(),
            dynamical_phases: r.dynamical_phases.clone(),
        }
    }
}

impl From<HolonomyRecord> for HolonomyResult {
    fn from(r: HolonomyRecord) -> Self {
        HolonomyResult {
            w: r.w,
            b: r.b,
            m: r.m,
            granularity: r.granularity,
            permutation: r.permutation,
            phases: r.phases.into_iter().map(C64::from).collect(),
            block_unitaries: r.block_unitaries,
            delta_n: r.delta_n,
            dynamical_phases: r.dynamical_phases,
        }
    }
}

/// Where a result came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub model: String,
    pub t_field: f64,
    pub winding: i32,
    pub base_point: Vec<f64>,
    #[serde(rename = "loop")]
    pub loop_description: String,
    pub steps: Option<usize>,
    pub policy: Option<String>,
    pub periods: Option<usize>,
    pub tolerances: BTreeMap<String, f64>,
}

/// Hex SHA-256 of the compact serialization of `value` with `timestamp` and
/// `canonical_hash` removed from the top-level object.
pub fn canonical_hash(value: &Value) -> String {
    let mut v = value.clone();
    if let Value::Object(map) = &mut v {
        map.remove("timestamp");
        map.remove("canonical_hash");
    }
    let bytes = serde_json::to_vec(&v).expect("JSON values always serialize");
    hex::encode(Sha256::digest(&bytes))
}

/// Adds `canonical_hash` and, when given, `timestamp` to a top-level object.
pub fn seal(mut value: Value, timestamp: Option<String>) -> Value {
    let hash = canonical_hash(&value);
    if let Value::Object(map) = &mut value {
        map.insert("canonical_hash".into(), Value::String(hash));
        if let Some(t) = timestamp {
            map.insert("timestamp".into(), Value::String(t));
        }
    }
    value
}

/// Structured error document `{"error": {"kind", "message", ...}}`.
pub fn error_json(err: &HolonomyError) -> Value {
    let mut body = serde_json::Map::new();
    body.insert("kind".into(), Value::from(err.kind()));
    body.insert("message".into(), Value::from(err.to_string()));
    match err {
        HolonomyError::BandCrossing { segment, .. } | HolonomyError::BlockMismatch { segment } => {
            body.insert("segment".into(), Value::from(*segment));
        }
        HolonomyError::SingularOverlap { sigma_min } => {
            body.insert("sigma_min".into(), Value::from(*sigma_min));
        }
        HolonomyError::GapClosed { e } => {
            body.insert("e".into(), Value::from(*e));
        }
        _ => {}
    }
    let mut top = serde_json::Map::new();
    top.insert("error".into(), Value::Object(body));
    Value::Object(top)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    fn arb_matrix(n: usize) -> impl Strategy<Value = CMatrix> {
        proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), n * n)
            .prop_map(move |v| CMatrix::from_fn(n, n, |i, j| C64::new(v[i * n + j].0, v[i * n + j].1)))
    }

    proptest! {
        #[test]
        fn holonomy_record_round_trips_bit_exactly(
            w in arb_matrix(2),
            b in arb_matrix(2),
            m in arb_matrix(2),
            phase in -3.2f64..3.2,
            dn in -5i64..5,
            phi in proptest::option::of(proptest::collection::vec(-1e4f64..1e4, 2)),
        ) {
            let r = HolonomyResult {
                w, b, m,
                granularity: Granularity::Band,
                permutation: Some(vec![1, 0]),
                phases: vec![C64::from_polar(1.0, phase), C64::new(-1.0, 0.0)],
                block_unitaries: vec![],
                delta_n: vec![dn, dn],
                dynamical_phases: phi,
            };
            let text = serde_json::to_string(&HolonomyRecord::from(&r)).unwrap();
            let back: HolonomyResult = serde_json::from_str::<HolonomyRecord>(&text).unwrap().into();
            prop_assert_eq!(&back.w, &r.w);
            prop_assert_eq!(&back.b, &r.b);
            prop_assert_eq!(&back.m, &r.m);
            prop_assert_eq!(&back.phases, &r.phases);
            prop_assert_eq!(&back.dynamical_phases, &r.dynamical_phases);
            prop_assert_eq!(back.delta_n, r.delta_n);
        }
    }

    #[test]
    fn matrix_layout_is_row_major_pairs() {
        let m = CMatrix::from_fn(2, 2, |i, j| C64::new(i as f64, j as f64));
        let v = serde_json::to_value(matrix_serde::to_rows(&m)).unwrap();
        assert_eq!(v, json!([[[0.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [1.0, 1.0]]]));
    }

    #[test]
    fn hash_ignores_timestamp() {
        let doc = json!({"b": 1, "a": [1.5, 2]});
        let a = seal(doc.clone(), Some("2020-01-01T00:00:00Z".into()));
        let b = seal(doc, Some("2030-06-01T12:00:00Z".into()));
        assert_eq!(a["canonical_hash"], b["canonical_hash"]);
        assert_eq!(canonical_hash(&a), canonical_hash(&b));
        assert_eq!(a["canonical_hash"].as_str().unwrap().len(), 64);
    }

    #[test]
    fn error_objects_carry_kind() {
        let v = error_json(&HolonomyError::BandCrossing { segment: 7, detail: "x".into() });
        assert_eq!(v["error"]["kind"], "BandCrossing");
        assert_eq!(v["error"]["segment"], 7);
    }
}
