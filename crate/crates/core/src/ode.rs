//! Adaptive Dormand–Prince 5(4) integrator for real autonomous or
//! time-dependent systems.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step (absolute value); chosen automatically when `None`.
    pub h0: Option<f64>,
    /// Steps below `h_min · max(1, |t|)` count as a collapse.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-12,
            h0: None,
            h_min: 1e-12,
            max_steps: 2_000_000,
        }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Self::default()
        }
    }
}

/// Accepted steps of one integration, including both endpoints.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub rejected: usize,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least one state")
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
///
/// A right-hand side returning [`Error::OutsideDomain`] at a trial stage
/// rejects the step and halves it; any other error aborts. A step shrinking
/// below the collapse threshold yields [`Error::IncompletenessSuspected`].
pub fn integrate<F>(mut f: F, t0: f64, y0: &[f64], t1: f64, opts: &OdeOptions) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::InvalidParameter("ODE tolerances must be positive".into()));
    }
    let dim = y0.len();
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![y0.to_vec()],
        rejected: 0,
    };
    if t1 == t0 {
        return Ok(traj);
    }
    let dir = (t1 - t0).signum();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k0 = f(t, &y)?;
    let mut h = opts.h0.unwrap_or_else(|| {
        let scale: f64 = y.iter().map(|v| opts.atol + opts.rtol * v.abs()).fold(f64::MAX, f64::min);
        let speed = k0.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if speed > 0.0 {
            (0.01 * (scale / opts.rtol.max(1e-300)).max(1e-3) / speed).min((t1 - t0).abs())
        } else {
            (t1 - t0).abs()
        }
        .max(1e-6)
    });
    let mut stages = vec![vec![0.0; dim]; 7];
    let mut tmp = vec![0.0; dim];
    for _ in 0..opts.max_steps {
        if (t1 - t) * dir <= 0.0 {
            return Ok(traj);
        }
        let last = dir * (t + dir * h - t1) >= 0.0;
        let step = if last { t1 - t } else { dir * h };
        stages[0].clone_from(&k0);
        let mut outside = false;
        for s in 1..7 {
            for i in 0..dim {
                tmp[i] = y[i] + step * (0..s).map(|j| A[s][j] * stages[j][i]).sum::<f64>();
            }
            match f(t + C[s] * step, &tmp) {
                Ok(k) => stages[s] = k,
                Err(Error::OutsideDomain(_)) => {
                    outside = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        let mut err = f64::INFINITY;
        let mut y_new = vec![0.0; dim];
        if !outside {
            let mut acc = 0.0;
            for i in 0..dim {
                y_new[i] = y[i] + step * (0..7).map(|s| B5[s] * stages[s][i]).sum::<f64>();
                let e = step * (0..7).map(|s| (B5[s] - B4[s]) * stages[s][i]).sum::<f64>();
                let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
                acc += (e / sc).powi(2);
            }
            err = (acc / dim as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::NonFinite(format!("ODE error estimate at t = {t}")));
            }
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + step };
            y = y_new;
            k0 = stages[6].clone();
            traj.times.push(t);
            traj.states.push(y.clone());
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if !last {
                h = step.abs() * fac;
            }
        } else {
            traj.rejected += 1;
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.5) } else { 0.5 };
            h = step.abs() * fac;
        }
        if h < opts.h_min * t.abs().max(1.0) {
            return Err(Error::IncompletenessSuspected { t, h });
        }
    }
    Err(Error::NoConvergence(format!(
        "ODE exceeded {} steps before t = {t1}",
        opts.max_steps
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth_and_decay() {
        let opts = OdeOptions::with_tol(1e-12);
        let tr = integrate(|_, y| Ok(vec![y[0]]), 0.0, &[1.0], 2.0, &opts).unwrap();
        assert!((tr.last()[0] - 2f64.exp()).abs() < 1e-10);
        assert_eq!(*tr.times.last().unwrap(), 2.0);
        let back = integrate(|_, y| Ok(vec![y[0]]), 0.0, &[1.0], -3.0, &opts).unwrap();
        assert!((back.last()[0] - (-3f64).exp()).abs() < 1e-12);
        assert!(back.times.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn harmonic_oscillator_preserves_energy() {
        let opts = OdeOptions::with_tol(1e-11);
        let tr = integrate(|_, y| Ok(vec![y[1], -y[0]]), 0.0, &[1.0, 0.0], 50.0, &opts).unwrap();
        for s in &tr.states {
            assert!((s[0] * s[0] + s[1] * s[1] - 1.0).abs() < 1e-8);
        }
        assert!((tr.last()[0] - 50f64.cos()).abs() < 1e-8);
    }

    #[test]
    fn blow_up_is_reported_as_incompleteness() {
        // y' = y², y(0) = 1 blows up at t = 1
        let opts = OdeOptions::with_tol(1e-10);
        let res = integrate(
            |_, y| {
                if y[0] > 1e12 {
                    Err(Error::OutsideDomain("test".into()))
                } else {
                    Ok(vec![y[0] * y[0]])
                }
            },
            0.0,
            &[1.0],
            2.0,
            &opts,
        );
        match res {
            Err(Error::IncompletenessSuspected { t, .. }) => assert!((t - 1.0).abs() < 1e-6),
            other => panic!("expected collapse, got {other:?}"),
        }
    }

    #[test]
    fn zero_length_interval() {
        let tr = integrate(|_, y| Ok(y.to_vec()), 1.0, &[3.0], 1.0, &OdeOptions::default()).unwrap();
        assert_eq!(tr.states.len(), 1);
    }
}
