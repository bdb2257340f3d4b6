//! Adaptive DOP853 over real state vectors, with dense output on a fixed grid.

use ode_solvers::dop853::Dop853;
use ode_solvers::{DVector, OutputType, System};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: u32,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-10, atol: 1e-13, max_steps: 5_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub evaluations: u64,
    pub accepted: u64,
    pub rejected: u64,
}

struct Rhs<F>(F);

// The last state component carries the time. ode_solvers 0.6 evaluates the twelfth DOP853 stage
// at the wrong abscissa, which drops the order to ~2 on explicitly time-dependent systems; the
// autonomous form only uses the (correct) stage weights.
impl<F: Fn(f64, &[f64], &mut [f64])> System<f64, DVector<f64>> for Rhs<F> {
    fn system(&self, _t: f64, y: &DVector<f64>, dy: &mut DVector<f64>) {
        let n = y.len() - 1;
        (self.0)(y[n], &y.as_slice()[..n], &mut dy.as_mut_slice()[..n]);
        dy[n] = 1.0;
    }
}

/// Integrates y' = f(t, y) from 0 past `t_final`, returning states at the multiples of `dt_out`
/// up to `t_final`.
pub fn integrate<F>(
    f: F,
    y0: Vec<f64>,
    t_final: f64,
    dt_out: f64,
    tol: Tolerances,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, IntegrationStats)>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    if !(t_final > 0.0 && dt_out > 0.0) {
        return Err(Error::StepFailure { t: 0.0, reason: "t_final and dt_out must be positive".into() });
    }
    let n = y0.len();
    let mut y0 = y0;
    y0.push(0.0);
    let mut solver = Dop853::from_param(
        Rhs(f),
        0.0,
        // the endpoint sample of the dense output is unreliable; stop half a sample beyond
        t_final + 0.5 * dt_out,
        dt_out,
        DVector::from_vec(y0),
        tol.rtol,
        tol.atol,
        0.9,
        0.0,
        0.333,
        6.0,
        dt_out,
        0.0,
        tol.max_steps,
        u32::MAX,
        OutputType::Dense,
    );
    let stats = solver.integrate().map_err(|e| {
        let t = match e {
            ode_solvers::dop_shared::IntegrationError::MaxNumStepReached { x, .. }
            | ode_solvers::dop_shared::IntegrationError::StepSizeUnderflow { x }
            | ode_solvers::dop_shared::IntegrationError::StiffnessDetected { x } => x,
        };
        Error::StepFailure { t, reason: e.to_string() }
    })?;
    let keep = solver.x_out().iter().take_while(|&&t| t <= t_final * (1.0 + 1e-12)).count();
    let t = solver.x_out()[..keep].to_vec();
    let y = solver.y_out()[..keep].iter().map(|v| v.as_slice()[..n].to_vec()).collect();
    Ok((
        t,
        y,
        IntegrationStats {
            evaluations: stats.num_eval as u64,
            accepted: stats.accepted_steps as u64,
            rejected: stats.rejected_steps as u64,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let (t, y, _) = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            vec![1.0, 0.0],
            10.0,
            0.5,
            Tolerances::default(),
        )
        .unwrap();
        assert_eq!(t.len(), 21);
        for (ti, yi) in t.iter().zip(&y) {
            assert!((yi[0] - ti.cos()).abs() < 1e-8);
        }
    }

    #[test]
    fn explicit_time_dependence_keeps_high_order() {
        let (t, y, stats) = integrate(|t, _, dy| dy[0] = t.cos(), vec![0.0], 10.0, 1.0, Tolerances::default()).unwrap();
        assert!(stats.accepted < 200, "{stats:?}");
        for (ti, yi) in t.iter().zip(&y) {
            assert!((yi[0] - ti.sin()).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_interval() {
        assert!(integrate(|_, _, _| {}, vec![0.0], -1.0, 0.1, Tolerances::default()).is_err());
    }
}
