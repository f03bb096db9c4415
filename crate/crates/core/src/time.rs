//! Adaptive Dormand-Prince RK5(4) with a PI step-size controller.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub atol: f64,
    pub rtol: f64,
    pub safety: f64,
    pub k_p: f64,
    pub k_i: f64,
    /// First step; chosen from the initial derivative when absent.
    pub h_initial: Option<f64>,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            atol: 1e-10,
            rtol: 1e-10,
            safety: 0.9,
            k_p: 0.4 / 5.0,
            k_i: 0.7 / 5.0,
            h_initial: None,
            h_min: 1e-14,
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SolverError::Config(format!("integrator: {m}")));
        if !(self.atol > 0.0 && self.rtol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.safety > 0.0 && self.safety < 1.0) {
            return bad("safety factor must lie in (0, 1)");
        }
        if !(self.k_i >= 0.0 && self.k_p >= 0.0) {
            return bad("controller gains must be non-negative");
        }
        if !(self.h_min > 0.0 && self.h_max >= self.h_min) {
            return bad("need 0 < h_min <= h_max");
        }
        if let Some(h) = self.h_initial {
            if !(h > 0.0) {
                return bad("initial step must be positive");
            }
        }
        Ok(())
    }
}

// Dormand-Prince tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus the embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Result of one trial step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCandidate {
    pub y: Vec<f64>,
    /// Difference between the fifth- and fourth-order solutions.
    pub error: Vec<f64>,
    /// Derivative at the candidate, reused as the first stage of the next step.
    pub dydt: Vec<f64>,
}

/// One Dormand-Prince step from `(t, y)` with first stage `k1 = f(t, y)`.
pub fn dopri_step<F>(y: &[f64], k1: &[f64], t: f64, h: f64, rhs: &mut F) -> Result<StepCandidate>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    debug_assert!(h > 0.0);
    let n = y.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(k1.to_vec());
    let mut stage = vec![0.0; n];
    for s in 1..7 {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate() {
                acc += A[s][j] * kj[i];
            }
            stage[i] = y[i] + h * acc;
        }
        let mut ks = vec![0.0; n];
        rhs(t + C[s] * h, &stage, &mut ks)?;
        k.push(ks);
    }
    // the last stage point is the fifth-order solution
    let error = (0..n)
        .map(|i| h * (0..7).map(|s| E[s] * k[s][i]).sum::<f64>())
        .collect();
    let dydt = k.pop().expect("seven stages");
    Ok(StepCandidate { y: stage, error, dydt })
}

/// Weighted RMS norm with scale `atol + rtol·max(|y|, |y_new|)`.
pub fn error_norm(error: &[f64], y: &[f64], y_new: &[f64], atol: f64, rtol: f64) -> f64 {
    if error.is_empty() {
        return 0.0;
    }
    let sum: f64 = error
        .iter()
        .zip(y.iter().zip(y_new))
        .map(|(e, (a, b))| {
            let sc = atol + rtol * a.abs().max(b.abs());
            (e / sc) * (e / sc)
        })
        .sum();
    (sum / error.len() as f64).sqrt()
}

/// Memory of the controller between steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerHistory {
    /// Error norm of the last accepted step.
    pub prev_norm: f64,
}

impl Default for ControllerHistory {
    fn default() -> Self {
        ControllerHistory { prev_norm: 1.0 }
    }
}

const NORM_FLOOR: f64 = 1e-10;
const MAX_GROWTH: f64 = 5.0;
const MIN_SHRINK: f64 = 0.2;

/// Accept/reject decision and next step size. The history is advanced only on
/// acceptance.
pub fn pi_controller(norm: f64, h: f64, cfg: &IntegratorConfig, history: &mut ControllerHistory) -> (bool, f64) {
    let norm = norm.max(NORM_FLOOR);
    let accept = norm <= 1.0;
    let mut factor = if accept {
        cfg.safety * norm.powf(-cfg.k_i) * history.prev_norm.powf(cfg.k_p)
    } else {
        (cfg.safety * norm.powf(-cfg.k_i)).min(0.5)
    };
    factor = factor.clamp(MIN_SHRINK, MAX_GROWTH);
    if accept {
        history.prev_norm = norm;
    }
    (accept, (h * factor).min(cfg.h_max))
}

/// Passed to the step callback after every accepted step.
#[derive(Debug)]
pub struct AcceptedStep<'a> {
    pub step: usize,
    pub t: f64,
    pub h: f64,
    pub y: &'a [f64],
    pub dydt: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationOutcome {
    pub y: Vec<f64>,
    pub t: f64,
    pub accepted: usize,
    pub rejected: usize,
    /// Steps rejected because a stage state was inadmissible.
    pub inadmissible: usize,
}

fn initial_step<F>(y: &[f64], f0: &[f64], t: f64, cfg: &IntegratorConfig, rhs: &mut F) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let scale: Vec<f64> = y.iter().map(|v| cfg.atol + cfg.rtol * v.abs()).collect();
    let rms = |v: &[f64]| {
        if v.is_empty() {
            return 0.0;
        }
        (v.iter().zip(&scale).map(|(a, s)| (a / s) * (a / s)).sum::<f64>() / v.len() as f64).sqrt()
    };
    let d0 = rms(y);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(cfg.h_max);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; y.len()];
    rhs(t + h0, &y1, &mut f1)?;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    Ok((100.0 * h0).min(h1).min(cfg.h_max).max(cfg.h_min))
}

/// Integrates from `t0` to `t_end`. The callback may stop the run early by
/// returning `Break`.
pub fn integrate<F, C>(
    y0: Vec<f64>,
    t0: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
    mut rhs: F,
    mut on_step: C,
) -> Result<IntegrationOutcome>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    C: FnMut(&AcceptedStep) -> Result<ControlFlow<()>>,
{
    cfg.validate()?;
    if !(t0.is_finite() && t_end.is_finite()) {
        return Err(SolverError::Config(format!("integration interval [{t0}, {t_end}] is not finite")));
    }
    let mut y = y0;
    let mut t = t0;
    let mut k1 = vec![0.0; y.len()];
    rhs(t, &y, &mut k1)?;
    let mut h = match cfg.h_initial {
        Some(h) => h.min(cfg.h_max),
        None => initial_step(&y, &k1, t, cfg, &mut rhs)?,
    };
    let mut history = ControllerHistory::default();
    let mut out = IntegrationOutcome {
        y: Vec::new(),
        t,
        accepted: 0,
        rejected: 0,
        inadmissible: 0,
    };
    // steps closer than this to the end time are absorbed into the last one
    let eps = 1e-12 * (t_end - t0).abs().max(1.0);
    while t_end - t > eps {
        if out.accepted + out.rejected >= cfg.max_steps {
            return Err(SolverError::MaxSteps(cfg.max_steps));
        }
        let last = t + h >= t_end - eps;
        let h_try = if last { t_end - t } else { h };
        let cand = match dopri_step(&y, &k1, t, h_try, &mut rhs) {
            Ok(c) => c,
            Err(e) if e.is_admissibility() => {
                out.inadmissible += 1;
                out.rejected += 1;
                h = 0.5 * h_try;
                if h < cfg.h_min {
                    return Err(SolverError::StepUnderflow { step: h, min: cfg.h_min, time: t });
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        let norm = error_norm(&cand.error, &y, &cand.y, cfg.atol, cfg.rtol);
        let (accept, h_next) = pi_controller(norm, h_try, cfg, &mut history);
        if accept {
            t = if last { t_end } else { t + h_try };
            y = cand.y;
            k1 = cand.dydt;
            out.accepted += 1;
            // a shortened final step does not limit the controller
            h = if last { h_next.max(h) } else { h_next };
            let flow = on_step(&AcceptedStep {
                step: out.accepted,
                t,
                h: h_try,
                y: &y,
                dydt: &k1,
            })?;
            if flow.is_break() {
                break;
            }
        } else {
            out.rejected += 1;
            h = h_next;
            if h < cfg.h_min {
                return Err(SolverError::StepUnderflow { step: h, min: cfg.h_min, time: t });
            }
        }
    }
    out.y = y;
    out.t = t;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_t: f64, y: &[f64], d: &mut [f64]) -> Result<()> {
        for (a, b) in d.iter_mut().zip(y) {
            *a = -b;
        }
        Ok(())
    }

    #[test]
    fn tableau_consistency() {
        for s in 0..7 {
            let row: f64 = A[s].iter().sum();
            assert!((row - C[s]).abs() < 1e-15, "row {s}");
        }
        assert!(E.iter().sum::<f64>().abs() < 1e-16);
    }

    #[test]
    fn single_step_exponential() {
        let y = [1.0];
        let step = dopri_step(&y, &[-1.0], 0.0, 0.1, &mut decay).unwrap();
        assert!((step.y[0] - (-0.1f64).exp()).abs() <= 1e-8);
        assert!((step.dydt[0] + step.y[0]).abs() < 1e-16);
    }

    #[test]
    fn local_error_estimate_is_fifth_order() {
        // y' = cos(t) y has a non-trivial local error at every order
        let mut f = |t: f64, y: &[f64], d: &mut [f64]| -> Result<()> {
            d[0] = t.cos() * y[0];
            Ok(())
        };
        let mut prev = None;
        for i in 0..5 {
            let h = 0.2 / 2f64.powi(i);
            let s = dopri_step(&[1.0], &[1.0], 0.0, h, &mut f).unwrap();
            let e = s.error[0].abs();
            if let Some(p) = prev {
                let ratio: f64 = p / e;
                assert!((ratio.log2() - 5.0).abs() < 0.3, "rate {}", ratio.log2());
            }
            prev = Some(e);
        }
    }

    #[test]
    fn zero_rhs_leaves_state() {
        let mut zero = |_t: f64, _y: &[f64], d: &mut [f64]| -> Result<()> {
            d.fill(0.0);
            Ok(())
        };
        let y = [1.5, -2.0];
        let s = dopri_step(&y, &[0.0, 0.0], 0.0, 0.3, &mut zero).unwrap();
        assert_eq!(s.y, y.to_vec());
        assert_eq!(s.error, vec![0.0, 0.0]);
    }

    #[test]
    fn controller_fixed_point_and_rejection() {
        let cfg = IntegratorConfig::default();
        let mut hist = ControllerHistory::default();
        let (acc, h) = pi_controller(1.0, 0.2, &cfg, &mut hist);
        assert!(acc);
        assert!((h - cfg.safety * 0.2).abs() < 1e-15);
        let (acc, h) = pi_controller(10.0, 0.2, &cfg, &mut hist);
        assert!(!acc);
        assert!(h <= 0.1);
        assert_eq!(hist.prev_norm, 1.0);
    }

    #[test]
    fn controller_settles_under_constant_error_model() {
        // error norm modelled as (h / h_ref)^5: the recurrence converges to a fixed step
        let cfg = IntegratorConfig::default();
        let mut hist = ControllerHistory::default();
        let mut h = 0.01;
        let mut seq = Vec::new();
        for _ in 0..200 {
            let norm = (h / 0.05f64).powi(5);
            let (_, next) = pi_controller(norm, h, &cfg, &mut hist);
            h = next;
            seq.push(h);
        }
        let tail = &seq[150..];
        let spread = tail.iter().cloned().fold(0.0f64, f64::max) - tail.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-10 * h, "{spread}");
        assert!(h < 0.05);
    }

    fn run_decay(rtol: f64) -> f64 {
        let cfg = IntegratorConfig { rtol, atol: rtol, ..Default::default() };
        let out = integrate(vec![1.0, 2.0], 0.0, 2.0, &cfg, decay, |_| Ok(ControlFlow::Continue(()))).unwrap();
        assert_eq!(out.t, 2.0);
        let exact = (-2.0f64).exp();
        (out.y[0] - exact).abs().max((out.y[1] - 2.0 * exact).abs())
    }

    #[test]
    fn tolerance_sweep_reduces_global_error() {
        let mut prev = f64::MAX;
        for i in 0..8 {
            let err = run_decay(1e-6 / 2f64.powi(i));
            assert!(err <= prev * 1.1, "{i}: {err} vs {prev}");
            prev = err;
        }
        assert!(prev < 1e-7);
    }

    #[test]
    fn inadmissible_stage_shrinks_step() {
        // the first trial step hits an inadmissible stage
        let mut calls = 0;
        let mut rhs = |_t: f64, y: &[f64], d: &mut [f64]| -> Result<()> {
            calls += 1;
            if calls == 3 {
                return Err(SolverError::NonPositiveDensity { rho: -y[0] });
            }
            d[0] = 1.0;
            Ok(())
        };
        let cfg = IntegratorConfig { h_initial: Some(1.0), ..Default::default() };
        let out = integrate(vec![0.0], 0.0, 1.0, &cfg, &mut rhs, |_| Ok(ControlFlow::Continue(()))).unwrap();
        assert!(out.inadmissible > 0);
        assert!((out.y[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn callback_can_stop_early() {
        let cfg = IntegratorConfig { h_max: 0.01, ..Default::default() };
        let mut seen = 0;
        let out = integrate(vec![1.0], 0.0, 10.0, &cfg, decay, |s| {
            seen = s.step;
            Ok(if s.step == 7 { ControlFlow::Break(()) } else { ControlFlow::Continue(()) })
        })
        .unwrap();
        assert_eq!((out.accepted, seen), (7, 7));
        assert!(out.t < 0.1);
    }

    #[test]
    fn underflow_is_reported() {
        let bad = |_t: f64, _y: &[f64], _d: &mut [f64]| -> Result<()> {
            Err(SolverError::NonPositiveTemperature { temperature: -1.0 })
        };
        let mut calls = 0;
        let mut rhs = |t: f64, y: &[f64], d: &mut [f64]| {
            calls += 1;
            if calls == 1 { decay(t, y, d) } else { bad(t, y, d) }
        };
        let cfg = IntegratorConfig { h_initial: Some(0.1), h_min: 1e-3, ..Default::default() };
        let err = integrate(vec![1.0], 0.0, 1.0, &cfg, &mut rhs, |_| Ok(ControlFlow::Continue(())));
        assert!(matches!(err, Err(SolverError::StepUnderflow { .. })));
    }
}
