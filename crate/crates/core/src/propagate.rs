//! Brute-force adiabatic evolution around a loop.
//!
//! The parameter is stepped once per unit period, `alpha_k` = loop point at fraction
//! `k / N` for kicked models (midpoints for static ones), and the full evolution
//! `U = U(alpha_{N-1}) ... U(alpha_0)` is compared with the frame at the base point
//! after the dynamical phases are removed.

use serde::{Deserialize, Serialize};

use crate::eigenframe::{Bundle, Frame, LoopDef};
use crate::error::{HolonomyError, Result};
use crate::matrix::{self, cis, CMatrix};
use crate::models::{self, ModelSpec, ParameterPoint};

/// Sweep schedule: the loop is traversed in `n_periods` unit periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub n_periods: usize,
    pub loop_def: LoopDef,
    pub samples_per_period: usize,
}

impl Schedule {
    pub fn new(n_periods: usize, loop_def: LoopDef) -> Self {
        Self { n_periods, loop_def, samples_per_period: 1 }
    }

    /// Parameter value used during each period.
    pub fn period_points(&self, spec: &ModelSpec) -> Result<Vec<ParameterPoint>> {
        if self.n_periods == 0 {
            return Err(HolonomyError::InvalidInput("schedule needs at least one period".into()));
        }
        if spec.is_kicked() {
            let (mut points, _) = self.loop_def.sample(self.n_periods)?;
            points.truncate(self.n_periods);
            Ok(points)
        } else {
            let (points, _) = self.loop_def.sample(2 * self.n_periods)?;
            Ok(points.into_iter().skip(1).step_by(2).collect())
        }
    }
}

/// Ordered product of one-period operators, earlier periods rightmost.
pub fn stroboscopic_evolve(spec: &ModelSpec, sched: &Schedule) -> Result<CMatrix> {
    let mut u = matrix::identity(spec.dim());
    for point in sched.period_points(spec)? {
        u = models::one_period_operator(spec, &point)? * u;
    }
    Ok(u)
}

/// Accumulated `sum_k eps_n(alpha_k) T_p` for every tracked band. The bundle must sample
/// the schedule's loop with `K = N`.
pub fn dynamical_phase(spec: &ModelSpec, bundle: &Bundle, sched: &Schedule) -> Result<Vec<f64>> {
    if bundle.steps() != sched.n_periods {
        return Err(HolonomyError::InvalidInput(format!(
            "bundle has {} steps but the schedule has {} periods",
            bundle.steps(),
            sched.n_periods
        )));
    }
    let dim = bundle.dim();
    let mut phases = vec![0.0; dim];
    for k in 0..sched.n_periods {
        let (a, b) = (&bundle.frames[k], &bundle.frames[k + 1]);
        for (n, phase) in phases.iter_mut().enumerate() {
            let eps = if spec.is_kicked() {
                a.quasienergies[n]
            } else {
                0.5 * (a.quasienergies[n] + b.quasienergies[n])
            };
            *phase += eps * spec.period;
        }
    }
    Ok(phases)
}

/// `M[m, n] = <v_m| U |v_n> e^{i phi_n}` in the base frame, without unitarization.
pub fn extract_geometric(u_total: &CMatrix, frame0: &Frame, phases: &[f64]) -> Result<CMatrix> {
    if phases.len() != frame0.dim() {
        return Err(HolonomyError::DimensionMismatch { expected: frame0.dim(), found: phases.len() });
    }
    let mut m = frame0.vectors.adjoint() * u_total * &frame0.vectors;
    for (n, &phi) in phases.iter().enumerate() {
        let mut col = m.column_mut(n);
        col *= cis(phi);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenframe::{bundle_along, GaugePolicy};
    use crate::matrix::{diag, identity, max_abs_diff, pauli, I};
    use crate::models::Coord;
    use std::f64::consts::PI;

    #[test]
    fn single_period_is_floquet_operator() {
        let spec = ModelSpec::spin_half(1.0, 1);
        let point = ParameterPoint::spin_half(0.8, 0.7, 0.2);
        let u = stroboscopic_evolve(&spec, &Schedule::new(1, LoopDef::Constant { point: point.clone() })).unwrap();
        assert!(max_abs_diff(&u, &models::floquet_operator(&spec, &point).unwrap()) < 1e-15);
    }

    #[test]
    fn frozen_loop_gives_power() {
        let spec = ModelSpec::spin_half(1.0, 1);
        let point = ParameterPoint::spin_half(0.8, 0.7, 0.2);
        let u1 = models::floquet_operator(&spec, &point).unwrap();
        let u = stroboscopic_evolve(&spec, &Schedule::new(5, LoopDef::Constant { point: point.clone() })).unwrap();
        assert!(max_abs_diff(&u, &(&u1 * &u1 * &u1 * &u1 * &u1)) < 1e-13);

        let sched = Schedule::new(16, LoopDef::Constant { point: point.clone() });
        let bundle = bundle_along(&spec, &sched.loop_def, 16, GaugePolicy::SmoothPhase, 1e-6).unwrap();
        let phases = dynamical_phase(&spec, &bundle, &sched).unwrap();
        for (n, phi) in phases.iter().enumerate() {
            assert!((phi - 16.0 * bundle.frames[0].quasienergies[n]).abs() < 1e-12);
        }
        let u = stroboscopic_evolve(&spec, &sched).unwrap();
        let m = extract_geometric(&u, &bundle.frames[0], &phases).unwrap();
        assert!(max_abs_diff(&m, &identity(2)) < 1e-10);
    }

    #[test]
    fn pure_dynamical_evolution_extracts_identity() {
        let spec = ModelSpec::spin_half(1.0, 1);
        let frame = crate::eigenframe::frame_at(&spec, &ParameterPoint::spin_half(0.8, 0.7, 0.2), 1e-6).unwrap();
        let phases = [0.4, -2.3];
        let u = &frame.vectors * diag(&[cis(-phases[0]), cis(-phases[1])]) * frame.vectors.adjoint();
        let m = extract_geometric(&u, &frame, &phases).unwrap();
        assert!(max_abs_diff(&m, &identity(2)) < 1e-14);
    }

    #[test]
    fn p2_dynamical_phase_has_closed_form() {
        // V = 1 for p = 2, so eps = lambda +- T on the tracked branches.
        let spec = ModelSpec::spin_half(1.0, 2);
        let n = 400;
        let sched = Schedule::new(n, LoopDef::coordinate(Coord::Lambda, ParameterPoint::spin_half(0.0, 0.7, 0.0)));
        let bundle = bundle_along(&spec, &sched.loop_def, n, GaugePolicy::SmoothPhase, 1e-6).unwrap();
        let phases = dynamical_phase(&spec, &bundle, &sched).unwrap();
        let lambda_sum: f64 = (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).sum();
        let e0 = bundle.frames[0].quasienergies.clone();
        for (i, phi) in phases.iter().enumerate() {
            assert!((phi - (lambda_sum + n as f64 * e0[i])).abs() < 1e-8);
        }
    }

    #[test]
    fn slow_lambda_sweep_exchanges_bands() {
        let spec = ModelSpec::spin_half(1.0, 1);
        let n = 4000;
        let sched = Schedule::new(n, LoopDef::coordinate(Coord::Lambda, ParameterPoint::spin_half(0.0, 0.7, 0.0)));
        let bundle = bundle_along(&spec, &sched.loop_def, n, GaugePolicy::SmoothPhase, 1e-6).unwrap();
        let phases = dynamical_phase(&spec, &bundle, &sched).unwrap();
        let u = stroboscopic_evolve(&spec, &sched).unwrap();
        let m = extract_geometric(&u, &bundle.frames[0], &phases).unwrap();
        let expect = pauli(2) * (-I);
        let (dist, _) = crate::holonomy::diagonal_conjugation_distance(&m, &expect);
        assert!(dist < 5e-2, "distance {dist}");
    }

    #[test]
    fn zeeman_berry_phase() {
        let spec = ModelSpec::custom_static(models::zeeman_model());
        let gamma = PI / 3.0;
        let base = ParameterPoint { lambda: 0.0, sphere: vec![gamma, 0.0], generic: None };
        let n = 2000;
        let sched = Schedule::new(n, LoopDef::coordinate(Coord::Xi, base));
        let bundle = bundle_along(&spec, &sched.loop_def, n, GaugePolicy::ParallelTransport, 1e-6).unwrap();
        let phases = dynamical_phase(&spec, &bundle, &sched).unwrap();
        let u = stroboscopic_evolve(&spec, &sched).unwrap();
        let m = extract_geometric(&u, &bundle.frames[0], &phases).unwrap();
        let r = crate::holonomy::holonomy_m(&bundle).unwrap();
        assert!(max_abs_diff(&m, &r.m) < 2e-2);
    }
}
