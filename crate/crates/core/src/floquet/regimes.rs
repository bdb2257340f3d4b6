use serde::{Deserialize, Serialize};

use super::BandStructure;
use crate::markov::{find_resonances_grid, ResonanceRoot};

/// Floquet weight below which a resonance does not count as an emission channel.
pub const DEFAULT_WEIGHT_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Bidirectional,
    RightChiral,
    LeftChiral,
    Gap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeWindow {
    pub omega_lo: f64,
    pub omega_hi: f64,
    pub regime: Regime,
}

/// Direct gap between the two lowest bands at the avoided crossing on one side of the zone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandGap {
    pub omega_lo: f64,
    pub omega_hi: f64,
    pub k_center: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub gaps: Vec<BandGap>,
    pub windows: Vec<RegimeWindow>,
}

impl GapReport {
    pub fn regime_at(&self, omega: f64) -> Option<Regime> {
        self.windows.iter().find(|w| omega >= w.omega_lo && omega < w.omega_hi).map(|w| w.regime)
    }

    pub fn has_gap_window(&self) -> bool {
        self.windows.iter().any(|w| w.regime == Regime::Gap)
    }
}

/// Labels one frequency from its resonance roots.
pub fn classify_roots(roots: &[ResonanceRoot], weight_threshold: f64) -> Regime {
    let live: Vec<&ResonanceRoot> = roots.iter().filter(|r| !r.edge_flag).collect();
    let Some(dominant) =
        live.iter().filter(|r| r.weight >= weight_threshold).max_by(|a, b| a.weight.total_cmp(&b.weight))
    else {
        return Regime::Gap;
    };
    let right = dominant.vg > 0.0;
    let opposite: f64 = live.iter().filter(|r| (r.vg > 0.0) != right).map(|r| r.weight).sum();
    match (opposite < weight_threshold, right) {
        (true, true) => Regime::RightChiral,
        (true, false) => Regime::LeftChiral,
        _ => Regime::Bidirectional,
    }
}

/// Direct gaps between bands 1 and 2, one per half of the zone.
pub fn local_gaps(bs: &BandStructure) -> Vec<BandGap> {
    if bs.n_bands() < 2 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for positive in [false, true] {
        let best = (0..bs.n_k()).filter(|&j| (bs.k_grid[j] > 0.0) == positive).min_by(|&a, &b| {
            let sa = bs.omega[1][a] - bs.omega[0][a];
            let sb = bs.omega[1][b] - bs.omega[0][b];
            sa.total_cmp(&sb)
        });
        if let Some(j) = best {
            if bs.omega[1][j] > bs.omega[0][j] {
                out.push(BandGap { omega_lo: bs.omega[0][j], omega_hi: bs.omega[1][j], k_center: bs.k_grid[j] });
            }
        }
    }
    out
}

/// Classifies the span of the two lowest bands with scan step `gap_threshold` (rad/s).
/// The bottom 1% of the span is skipped: near ω = 0 every root sits on the k = 0 kink.
pub fn classify_regimes(bs: &BandStructure, weight_threshold: f64, gap_threshold: Option<f64>) -> GapReport {
    let hi = bs.band_max(1.min(bs.n_bands() - 1)).0;
    let lo = bs.band_min(0).0.max(0.01 * hi);
    classify_regimes_in(bs, weight_threshold, gap_threshold, lo, hi)
}

pub fn classify_regimes_in(
    bs: &BandStructure,
    weight_threshold: f64,
    gap_threshold: Option<f64>,
    omega_lo: f64,
    omega_hi: f64,
) -> GapReport {
    let step = gap_threshold.unwrap_or(bs.spec.v0() * bs.dk());
    let n = (((omega_hi - omega_lo) / step).ceil() as usize).max(1);
    let h = (omega_hi - omega_lo) / n as f64;
    let labels: Vec<Regime> = (0..n)
        .map(|i| {
            let w = omega_lo + (i as f64 + 0.5) * h;
            classify_roots(&find_resonances_grid(bs, w), weight_threshold)
        })
        .collect();
    let mut windows: Vec<RegimeWindow> = Vec::new();
    for (i, &regime) in labels.iter().enumerate() {
        let (a, b) = (omega_lo + i as f64 * h, omega_lo + (i + 1) as f64 * h);
        match windows.last_mut() {
            Some(last) if last.regime == regime => last.omega_hi = b,
            _ => windows.push(RegimeWindow { omega_lo: a, omega_hi: b, regime }),
        }
    }
    GapReport { gaps: local_gaps(bs), windows }
}
