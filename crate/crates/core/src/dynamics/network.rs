use serde::{Deserialize, Serialize};

use super::evolve::{evolve_with, fit_decay_rate, Trajectory};
use super::field::{field_on_ring, FieldSnapshot, NEAR_FIELD_EXCLUSION};
use super::system::EmissionSystem;
use crate::error::{invalid, Error, Result};
use crate::ode::Tolerances;

#[derive(Debug, Clone)]
pub struct TwoNodeRun {
    pub trajectory: Trajectory,
    pub snapshots: Vec<FieldSnapshot>,
    pub separation: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TwoNodeReport {
    pub separation: f64,
    /// Decay rate of qubit 1 fitted on 0.9 ≥ |c₁|² ≥ 0.1, before anything can return from qubit 2.
    pub gamma_fit: f64,
    /// Time and value of the maximum of |c₂|².
    pub t_peak: f64,
    pub peak_population: f64,
    /// Arrival delay τ from a least-squares fit of the rising edge of |c₂|² to
    /// A·(Γ(t−τ))²e^{−Γ(t−τ)}, the response of a cascaded receiver to an exponential pulse,
    /// with Γ = `gamma_fit`.
    pub delay: f64,
    pub vg_delay: f64,
    /// Speed of the half-maximum leading edge of the transmitted packet, regressed over the
    /// snapshots in which the edge lies beyond x₂ + 5λ_d.
    pub vg_front: Option<f64>,
    /// max(|c₁|² − e^{−Γt}) for t ≥ 2τ: population returned to qubit 1 above its isolated decay.
    pub re_excitation: f64,
}

/// Two qubits excited from qubit 1, field snapshots on the whole ring at `n_snapshots`
/// equally spaced times in (0, t_final].
pub fn two_node_run(
    sys: &EmissionSystem,
    vg_max: f64,
    t_final: f64,
    dt_out: f64,
    n_snapshots: usize,
    tol: Tolerances,
) -> Result<TwoNodeRun> {
    if sys.n_qubits() != 2 {
        return Err(invalid("qubits", format!("two-node run needs 2 qubits, got {}", sys.n_qubits())));
    }
    let separation = sys.qubits[1].x - sys.qubits[0].x;
    let travel = t_final * vg_max.abs();
    let limit = 0.5 * sys.modes.length - separation.abs();
    if travel > limit {
        return Err(Error::WrapAround { travel, limit });
    }
    let trajectory = evolve_with(sys, &sys.excited(0), t_final, dt_out, tol)?;
    let snapshots = (1..=n_snapshots)
        .map(|s| {
            let target = t_final * s as f64 / n_snapshots as f64;
            let j = nearest(&trajectory.t, target);
            field_on_ring(sys, &trajectory.states[j], trajectory.t[j], 4)
        })
        .collect();
    Ok(TwoNodeRun { trajectory, snapshots, separation })
}

fn nearest(t: &[f64], target: f64) -> usize {
    t.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
        .map(|(j, _)| j)
        .unwrap_or(0)
}

/// Position of the maximum of sampled data, refined by a parabola through the neighbours.
pub fn refined_peak(t: &[f64], p: &[f64]) -> (f64, f64) {
    let j = p.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(j, _)| j).unwrap_or(0);
    if j == 0 || j + 1 >= p.len() {
        return (t[j], p[j]);
    }
    let (a, b, c) = (p[j - 1], p[j], p[j + 1]);
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return (t[j], b);
    }
    let s = 0.5 * (a - c) / denom;
    let h = t[j + 1] - t[j];
    (t[j] + s * h, b - 0.25 * (a - c) * s)
}

/// Least-squares τ for |c₂|² ≈ A·(Γ(t−τ))²e^{−Γ(t−τ)} on the rising edge, from 2% of the peak
/// up to the peak. The tail is left out: dispersion of the pulse reshapes it.
pub fn fit_arrival_delay(t: &[f64], p: &[f64], gamma: f64) -> f64 {
    let (j_peak, peak) = p.iter().cloned().enumerate().fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    let sel: Vec<usize> = (0..=j_peak).filter(|&j| p[j] >= 0.02 * peak).collect();
    let residual = |tau: f64| -> f64 {
        let f: Vec<f64> = sel
            .iter()
            .map(|&j| {
                let s = gamma * (t[j] - tau).max(0.0);
                s * s * (-s).exp()
            })
            .collect();
        let ff: f64 = f.iter().map(|x| x * x).sum();
        if ff == 0.0 {
            return f64::INFINITY;
        }
        let a = sel.iter().zip(&f).map(|(&j, fj)| p[j] * fj).sum::<f64>() / ff;
        sel.iter().zip(&f).map(|(&j, fj)| (p[j] - a * fj).powi(2)).sum()
    };
    let t_hi = sel.first().map(|&j| t[j]).unwrap_or(0.0);
    let n = 2000;
    let step = t_hi / n as f64;
    let best = (0..=n).map(|i| i as f64 * step).min_by(|a, b| residual(*a).total_cmp(&residual(*b))).unwrap_or(0.0);
    // golden-section refinement inside the bracketing scan cells
    let (mut a, mut b) = ((best - step).max(0.0), best + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if residual(c) < residual(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

/// Leading-edge position of the right-going packet: the outermost point where |ψ|², averaged
/// over one λ_d, reaches half its maximum beyond `from`.
pub fn leading_edge(snap: &FieldSnapshot, from: f64, lambda_d: f64) -> Option<f64> {
    let n = snap.x_grid.len();
    if n < 2 {
        return None;
    }
    let dx = snap.x_grid[1] - snap.x_grid[0];
    let w = ((lambda_d / dx).round() as usize).max(1);
    let mut smooth = vec![0.0; n];
    let mut acc = 0.0;
    for j in 0..n {
        acc += snap.psi[j].norm_sqr();
        if j >= w {
            acc -= snap.psi[j - w].norm_sqr();
        }
        smooth[j] = acc / w as f64;
    }
    let right: Vec<usize> = (w..n).filter(|&j| snap.x_grid[j] - 0.5 * w as f64 * dx > from).collect();
    let max = right.iter().map(|&j| smooth[j]).fold(0.0, f64::max);
    if max == 0.0 {
        return None;
    }
    right.iter().rev().find(|&&j| smooth[j] > 0.5 * max).map(|&j| snap.x_grid[j] - 0.5 * w as f64 * dx)
}

fn regression_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

pub fn analyze_two_node(run: &TwoNodeRun, sys: &EmissionSystem) -> Result<TwoNodeReport> {
    let traj = &run.trajectory;
    let p1 = traj.excitation(0);
    let p2 = traj.excitation(1);
    let gamma_fit = fit_decay_rate(&traj.t, &p1, 0.9, 0.1)
        .ok_or_else(|| invalid("t_final", "qubit 1 did not decay through 0.9..0.1 within the run"))?;
    let (t_peak, peak_population) = refined_peak(&traj.t, &p2);
    let delay = fit_arrival_delay(&traj.t, &p2, gamma_fit);
    let re_excitation = traj
        .t
        .iter()
        .zip(&p1)
        .filter(|(t, _)| **t >= 2.0 * delay)
        .map(|(t, p)| p - (-gamma_fit * t).exp())
        .fold(0.0, f64::max);
    let lambda_d = sys.modes.spec.lambda_d();
    let cut = sys.qubits[1].x + NEAR_FIELD_EXCLUSION * lambda_d;
    let edges: Vec<(f64, f64)> = run
        .snapshots
        .iter()
        .filter_map(|s| leading_edge(s, sys.qubits[0].x + NEAR_FIELD_EXCLUSION * lambda_d, lambda_d).map(|x| (s.t, x)))
        .filter(|(_, x)| *x > cut)
        .collect();
    Ok(TwoNodeReport {
        separation: run.separation,
        gamma_fit,
        t_peak,
        peak_population,
        delay,
        vg_delay: run.separation / delay,
        vg_front: regression_slope(&edges),
        re_excitation,
    })
}
