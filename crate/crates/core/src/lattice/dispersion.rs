use std::f64::consts::PI;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::SpaceTimeRecord;
use crate::error::Result;
use crate::floquet::{solve_band, BandGap, C64};
use crate::params::WaveguideSpec;

/// |Φ(k, ω)|² of a space-time record for ω ≥ 0, with field components read as e^{i(kx − ωt)}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionMap {
    /// Ascending wavenumbers (rad/m).
    pub k: Vec<f64>,
    /// Ascending angular frequencies from 0 (rad/s).
    pub omega: Vec<f64>,
    /// `power[i][j]` at k[i], ω[j].
    pub power: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgePoint {
    pub k: f64,
    pub omega: f64,
    pub power: f64,
}

/// A Floquet component seen in the lab frame: wavenumber q, frequency ω_l(k) + nΩ and weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabBranch {
    pub band: usize,
    pub omega: f64,
    pub weight: f64,
}

fn hann(n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![1.0; n];
    }
    (0..n).map(|j| 0.5 - 0.5 * (2.0 * PI * j as f64 / (n - 1) as f64).cos()).collect()
}

/// Hann-windowed 2D transform of the record. Set `window_x` false for records that are
/// periodic in space.
pub fn extract_dispersion(record: &SpaceTimeRecord, window_x: bool) -> DispersionMap {
    let nt = record.data.len();
    let nx = record.data.first().map_or(0, |r| r.len());
    if nt == 0 || nx == 0 {
        return DispersionMap { k: Vec::new(), omega: Vec::new(), power: Vec::new() };
    }
    let wt = hann(nt);
    let wx = if window_x { hann(nx) } else { vec![1.0; nx] };
    let mut planner = FftPlanner::new();
    let fx = planner.plan_fft_forward(nx);
    let ft = planner.plan_fft_inverse(nt);

    let mut rows: Vec<Vec<C64>> = record
        .data
        .iter()
        .zip(&wt)
        .map(|(row, w)| {
            let mut r: Vec<C64> = row.iter().zip(&wx).map(|(v, u)| C64::new(v * u * w, 0.0)).collect();
            fx.process(&mut r);
            r
        })
        .collect();
    let n_omega = nt / 2 + 1;
    let mut power = vec![vec![0.0; n_omega]; nx];
    let mut col = vec![C64::new(0.0, 0.0); nt];
    for ik in 0..nx {
        for (c, row) in col.iter_mut().zip(rows.iter_mut()) {
            *c = row[ik];
        }
        ft.process(&mut col);
        // reorder k to ascending: FFT index ik ↦ signed index
        let signed = if ik <= (nx - 1) / 2 { ik as i64 } else { ik as i64 - nx as i64 };
        let slot = (signed + (nx as i64) / 2) as usize;
        for (j, p) in power[slot.min(nx - 1)].iter_mut().enumerate() {
            *p = col[j].norm_sqr();
        }
    }
    let dk = 2.0 * PI / (nx as f64 * record.dx);
    let k = (0..nx).map(|i| (i as i64 - nx as i64 / 2) as f64 * dk).collect();
    let dw = 2.0 * PI / (nt as f64 * record.dt);
    let omega = (0..n_omega).map(|j| j as f64 * dw).collect();
    DispersionMap { k, omega, power }
}

/// Local maxima in ω of each k-column with power at least `rel_threshold` of that column's
/// maximum, refined by a parabola through the logarithms of the neighbours.
pub fn ridges(map: &DispersionMap, rel_threshold: f64, omega_range: (f64, f64)) -> Vec<RidgePoint> {
    let dw = if map.omega.len() > 1 { map.omega[1] - map.omega[0] } else { 0.0 };
    let mut out = Vec::new();
    for (k, col) in map.k.iter().zip(&map.power) {
        let inside = |j: usize| map.omega[j] >= omega_range.0 && map.omega[j] <= omega_range.1;
        let peak = (0..col.len()).filter(|&j| inside(j)).map(|j| col[j]).fold(0.0, f64::max);
        if peak <= 0.0 {
            continue;
        }
        for j in 1..col.len().saturating_sub(1) {
            let p = col[j];
            if !inside(j) || p < rel_threshold * peak || p < col[j - 1] || p <= col[j + 1] {
                continue;
            }
            let (a, b, c) = (col[j - 1].max(1e-300).ln(), p.ln(), col[j + 1].max(1e-300).ln());
            let denom = a - 2.0 * b + c;
            let s = if denom < 0.0 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
            out.push(RidgePoint { k: *k, omega: map.omega[j] + s * dw, power: p });
        }
    }
    out
}

/// Floquet components at lab wavenumber `q` with positive lab frequency.
pub fn floquet_lab_frequencies(spec: &WaveguideSpec, q: f64) -> Result<Vec<LabBranch>> {
    let n = (q / spec.kd).round();
    let k = q - n * spec.kd;
    let point = solve_band(spec, k)?;
    let i = (n as i64 + spec.n_floquet as i64) as usize;
    if n.abs() > spec.n_floquet as f64 {
        return Ok(Vec::new());
    }
    let mut out: Vec<LabBranch> = point
        .omega
        .iter()
        .zip(&point.u)
        .enumerate()
        .map(|(band, (w, u))| LabBranch { band, omega: w.re + n * spec.omega_d(), weight: u[i].norm_sqr() })
        .filter(|b| b.omega > 0.0)
        .collect();
    out.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    Ok(out)
}

/// A Floquet branch paired with the nearest ridge in its k-column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchCheck {
    pub q: f64,
    pub band: usize,
    pub floquet: f64,
    pub weight: f64,
    pub ridge: Option<f64>,
    /// |ridge/floquet − 1|, infinite without a ridge.
    pub rel_dev: f64,
}

fn pair(q: f64, b: &LabBranch, pts: &[RidgePoint]) -> BranchCheck {
    let ridge = pts
        .iter()
        .filter(|p| p.k == q)
        .map(|p| p.omega)
        .min_by(|x, y| (x - b.omega).abs().total_cmp(&(y - b.omega).abs()));
    let rel_dev = ridge.map_or(f64::INFINITY, |r| (r / b.omega - 1.0).abs());
    BranchCheck { q, band: b.band, floquet: b.omega, weight: b.weight, ridge, rel_dev }
}

/// Branches of weight ≥ `min_weight` below `omega_max` at every map wavenumber with
/// `q_range.0 < |q| ≤ q_range.1`.
pub fn compare_ridges(
    spec: &WaveguideSpec,
    map: &DispersionMap,
    pts: &[RidgePoint],
    q_range: (f64, f64),
    omega_max: f64,
    min_weight: f64,
) -> Result<Vec<BranchCheck>> {
    let mut out = Vec::new();
    for &q in map.k.iter().filter(|q| q.abs() > q_range.0 && q.abs() <= q_range.1) {
        for b in floquet_lab_frequencies(spec, q)? {
            if b.weight >= min_weight && b.omega < omega_max {
                out.push(pair(q, &b, pts));
            }
        }
    }
    Ok(out)
}

/// Top of band 0 and bottom of band 1 at the map wavenumber closest to each avoided crossing.
pub fn compare_gap_edges(
    spec: &WaveguideSpec,
    gaps: &[BandGap],
    map: &DispersionMap,
    pts: &[RidgePoint],
) -> Result<Vec<BranchCheck>> {
    let mut out = Vec::new();
    for g in gaps {
        let Some(q) = map.k.iter().copied().min_by(|a, b| (a - g.k_center).abs().total_cmp(&(b - g.k_center).abs()))
        else {
            continue;
        };
        let branches = floquet_lab_frequencies(spec, q)?;
        for band in [0, 1] {
            if let Some(b) = branches.iter().find(|b| b.band == band) {
                out.push(pair(q, b, pts));
            }
        }
    }
    Ok(out)
}
