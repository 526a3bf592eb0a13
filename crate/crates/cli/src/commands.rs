use std::fmt::Write as _;

use holonomy_core::eigenframe::{bundle_along, track_path, Bundle, ContinuationOptions};
use holonomy_core::holonomy::{self, aligned_distance, classify_block_permutation, classify_permutation, holonomy_m_with_tol};
use holonomy_core::matrix::{self, max_abs_diff, unitarity_defect, wrap_positive, CMatrix};
use holonomy_core::models::ModelKind;
use holonomy_core::oracles::{analytic_holonomies, resolve_theta_convention, OracleValues};
use holonomy_core::propagate::{dynamical_phase, extract_geometric, stroboscopic_evolve, Schedule};
use holonomy_core::report::{matrix_serde, HolonomyRecord, Provenance};
use holonomy_core::{Frame, HolonomyError};
use serde_json::{json, Value};

use crate::config::{ConfigError, RunConfig};

/// Permutation tolerance applied to brute-force matrices, which carry adiabatic leakage.
pub const PROPAGATED_PERM_TOL: f64 = 0.1;

pub enum Failure {
    Config(ConfigError),
    Pipeline(HolonomyError),
}

impl From<HolonomyError> for Failure {
    fn from(e: HolonomyError) -> Self {
        Failure::Pipeline(e)
    }
}

pub enum Document {
    Json(Value),
    Csv(String),
}

pub struct Outcome {
    pub document: Document,
    pub within_tolerance: bool,
    pub summary: String,
}

fn provenance(cfg: &RunConfig, steps: Option<usize>, include_policy: bool) -> Value {
    let p = Provenance {
        tool: "holonomy-lab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        model: cfg.spec.name(),
        t_field: cfg.spec.t_field,
        winding: cfg.spec.winding,
        base_point: cfg.base.to_flat(),
        loop_description: cfg.loop_def.describe(),
        steps,
        policy: include_policy.then(|| cfg.policy.name().to_string()),
        periods: cfg.periods,
        tolerances: cfg.tolerances(),
    };
    serde_json::to_value(p).expect("provenance serializes")
}

fn matrix_json(m: &CMatrix) -> Value {
    serde_json::to_value(matrix_serde::to_rows(m)).expect("matrix serializes")
}

fn numeric_bundle(cfg: &RunConfig) -> Result<Bundle, Failure> {
    Ok(bundle_along(&cfg.spec, &cfg.loop_def, cfg.steps, cfg.policy, cfg.deg_tol)?)
}

pub fn holonomy(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let bundle = numeric_bundle(cfg)?;
    let r = holonomy_m_with_tol(&bundle, cfg.perm_tol)?;
    let consistent = r.permutation.is_some().then(|| holonomy::delta_n_matches_permutation(&bundle, &r));
    let summary = format!("permutation {:?}, delta_n {:?}", r.permutation, r.delta_n);
    let doc = json!({
        "command": "holonomy",
        "provenance": provenance(cfg, Some(cfg.steps), true),
        "result": serde_json::to_value(HolonomyRecord::from(&r)).expect("record serializes"),
        "diagnostics": {
            "unitarity_defect": {
                "w": unitarity_defect(&r.w),
                "b": unitarity_defect(&r.b),
                "m": unitarity_defect(&r.m),
            },
            "factor_identity_defect": max_abs_diff(&(&r.w * &r.b), &r.m),
            "delta_n_consistent": consistent,
        },
    });
    Ok(Outcome { document: Document::Json(doc), within_tolerance: true, summary })
}

pub fn spectrum(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let n = cfg.sweep_steps;
    let values: Vec<f64> =
        (0..=n).map(|k| cfg.sweep_from + (cfg.sweep_to - cfg.sweep_from) * k as f64 / n as f64).collect();
    let points: Vec<_> = values.iter().map(|&v| cfg.base.with(cfg.sweep, v)).collect();
    let frames = track_path(&cfg.spec, &points, cfg.policy, cfg.deg_tol, &ContinuationOptions::default())?;
    let dim = cfg.spec.dim();
    let period = cfg.spec.quasienergy_period();

    let mut csv = String::from("sweep");
    for i in 0..dim {
        write!(csv, ",tracked_{i}").expect("string write");
    }
    for i in 0..dim {
        write!(csv, ",principal_{i}").expect("string write");
    }
    csv.push('\n');
    for (v, frame) in values.iter().zip(&frames) {
        write!(csv, "{v}").expect("string write");
        for e in &frame.quasienergies {
            write!(csv, ",{e}").expect("string write");
        }
        for e in &frame.quasienergies {
            let principal = period.map_or(*e, |p| wrap_positive(*e, p));
            write!(csv, ",{principal}").expect("string write");
        }
        csv.push('\n');
    }
    let summary = format!("{} rows, {} bands, sweep over {}", frames.len(), dim, cfg.sweep.name());
    Ok(Outcome { document: Document::Csv(csv), within_tolerance: true, summary })
}

struct Propagated {
    m: CMatrix,
    frame0: Frame,
    phases: Vec<f64>,
}

fn run_propagation(cfg: &RunConfig, periods: usize) -> Result<Propagated, Failure> {
    let sched = Schedule::new(periods, cfg.loop_def.clone());
    let bundle = bundle_along(&cfg.spec, &sched.loop_def, periods, cfg.policy, cfg.deg_tol)?;
    let phases = dynamical_phase(&cfg.spec, &bundle, &sched)?;
    let u = stroboscopic_evolve(&cfg.spec, &sched)?;
    let m = extract_geometric(&u, &bundle.frames[0], &phases)?;
    Ok(Propagated { m, frame0: bundle.frames[0].clone(), phases })
}

fn oracle_for(cfg: &RunConfig) -> Result<OracleValues, HolonomyError> {
    let coord = cfg
        .loop_coord
        .ok_or_else(|| HolonomyError::UnsupportedLoop(format!("{} has no closed form", cfg.loop_def.describe())))?;
    analytic_holonomies(&cfg.spec, coord, &cfg.base)
}

/// Permutation structure of `m` (expressed in `frame`) in the reference ordering.
fn structure_in_reference(m: &CMatrix, frame: &Frame, reference: &OracleValues, tol: f64) -> Result<Option<Vec<usize>>, Failure> {
    let order = holonomy::alignment_order(frame, &reference.frame)?;
    let m_p = CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(order[i], order[j])]);
    Ok(structure(&m_p, &reference.blocks, tol))
}

fn structure(m: &CMatrix, blocks: &[Vec<usize>], tol: f64) -> Option<Vec<usize>> {
    if blocks.iter().all(|b| b.len() == 1) {
        classify_permutation(m, tol).map(|p| p.map)
    } else {
        classify_block_permutation(m, blocks, tol).map(|p| p.map)
    }
}

pub fn compare(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let oracle = match oracle_for(cfg) {
        Ok(o) => Some(o),
        Err(HolonomyError::UnsupportedLoop(msg)) if cfg.periods.is_some() => {
            eprintln!("note: {msg}; comparing against propagation only");
            None
        }
        Err(e) => return Err(Failure::Pipeline(e)),
    };
    let bundle = numeric_bundle(cfg)?;
    let r = holonomy_m_with_tol(&bundle, cfg.perm_tol)?;
    let frame0 = &bundle.frames[0];
    let mut pass = true;
    let mut summary = Vec::new();

    let oracle_section = match &oracle {
        Some(o) => {
            let raw = matrix::frobenius_distance(&r.m, &o.m);
            let minimized = aligned_distance(&r.m, frame0, &o.m, &o.frame)?;
            let numeric_structure = structure_in_reference(&r.m, frame0, o, cfg.perm_tol)?;
            let oracle_structure = structure(&o.m, &o.blocks, cfg.perm_tol);
            let structure_match = numeric_structure.is_some() && numeric_structure == oracle_structure;
            let ok = minimized <= cfg.compare_tol && structure_match;
            pass &= ok;
            summary.push(format!("oracle distance {minimized:.3e} (tol {:.1e})", cfg.compare_tol));
            let theta_convention = match cfg.spec.kind {
                ModelKind::KickedSpinThreeHalf => Some(resolve_theta_convention()?.describe()),
                _ => None,
            };
            json!({
                "m_oracle": matrix_json(&o.m),
                "raw_distance": raw,
                "conjugation_minimized_distance": minimized,
                "tolerance": cfg.compare_tol,
                "granularity": if o.blocks.iter().all(|b| b.len() == 1) { "band" } else { "block" },
                "numeric_structure": numeric_structure,
                "oracle_structure": oracle_structure,
                "structure_match": structure_match,
                "theta_convention": theta_convention,
                "within_tolerance": ok,
            })
        }
        None => Value::Null,
    };

    let propagate_section = match cfg.periods {
        Some(n) => {
            let prop = run_propagation(cfg, n)?;
            let d = aligned_distance(&prop.m, &prop.frame0, &r.m, frame0)?;
            let ok = d <= cfg.propagate_tol;
            pass &= ok;
            summary.push(format!("propagated distance {d:.3e} (tol {:.1e})", cfg.propagate_tol));
            json!({
                "periods": n,
                "m_propagated": matrix_json(&prop.m),
                "distance": d,
                "tolerance": cfg.propagate_tol,
                "unitarity_defect": unitarity_defect(&prop.m),
                "within_tolerance": ok,
            })
        }
        None => Value::Null,
    };

    let doc = json!({
        "command": "compare",
        "provenance": provenance(cfg, Some(cfg.steps), true),
        "m_numeric": matrix_json(&r.m),
        "oracle": oracle_section,
        "propagated": propagate_section,
        "pass": pass,
    });
    Ok(Outcome { document: Document::Json(doc), within_tolerance: pass, summary: summary.join(", ") })
}

pub fn propagate(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let Some(n) = cfg.periods else {
        return Err(Failure::Config(ConfigError("propagate needs N (number of periods)".into())));
    };
    let prop = run_propagation(cfg, n)?;
    let permutation = structure(&prop.m, &prop.frame0.blocks, PROPAGATED_PERM_TOL);
    let oracle_distance = match oracle_for(cfg) {
        Ok(o) => Some(aligned_distance(&prop.m, &prop.frame0, &o.m, &o.frame)?),
        Err(HolonomyError::UnsupportedLoop(_)) => None,
        Err(e) => return Err(Failure::Pipeline(e)),
    };
    let summary = match oracle_distance {
        Some(d) => format!("N = {n}, permutation {permutation:?}, oracle distance {d:.3e}"),
        None => format!("N = {n}, permutation {permutation:?}"),
    };
    let doc = json!({
        "command": "propagate",
        "provenance": provenance(cfg, None, true),
        "m_numeric": matrix_json(&prop.m),
        "unitarity_defect": unitarity_defect(&prop.m),
        "dynamical_phases": prop.phases,
        "permutation": permutation,
        "permutation_tolerance": PROPAGATED_PERM_TOL,
        "oracle_distance": oracle_distance,
    });
    Ok(Outcome { document: Document::Json(doc), within_tolerance: true, summary })
}
