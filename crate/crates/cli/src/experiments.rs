use std::f64::consts::PI;

use chiralguide::cascade::{build_cascaded_generator, compare_with_exact, PropagationPhases, MARKOV_WARN};
use chiralguide::dynamics::{
    analyze_two_node, default_t_final, discretize_modes, evolve_with, field_on_ring, fit_decay_rate, two_node_run,
    EmissionSystem, FieldSnapshot, WINDOW_MARGIN_GAMMA0,
};
use chiralguide::floquet::{
    band_structure, classify_regimes, classify_regimes_in, classify_roots, local_gaps, BandStructure, Regime,
};
use chiralguide::lattice::{compare_gap_edges, compare_ridges, extract_dispersion, kicked_ring, ridges, BranchCheck};
use chiralguide::markov::{chiral_report, gamma0_from_circuit, gamma0_from_g0, ChiralReport};
use chiralguide::ode::Tolerances;
use chiralguide::params::CJ_RATIO_WARN;
use chiralguide::WaveguideSpec;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{Config, Qubit, QubitCoupling, DEFAULT_WINDOW_HALF_WIDTH};
use crate::error::{CliError, CoreContext};
use crate::output::{Cell, Table, Writer};

const GHZ: f64 = 2.0 * PI * 1e9;
/// Field snapshots are averaged into at most this many bins.
const MAX_FIELD_POINTS: usize = 4096;
/// β above which a frequency counts as chiral.
const CHIRAL_BETA: f64 = 0.9;
/// Half-width of the localization region around the emitter, in λ_d.
const LOCALIZATION_RADIUS: f64 = 20.0;
/// Γ₀ for sweeps without a qubit; β does not depend on it.
const NOMINAL_GAMMA0: f64 = 2.0 * PI * 1e6;

fn ghz(omega: f64) -> f64 {
    omega / GHZ
}

fn checked_spec(spec: &WaveguideSpec) -> Result<(), CliError> {
    spec.validate().module("params")?;
    spec.check_regime().module("params")
}

fn band_structure_of(spec: &WaveguideSpec, n_k: usize) -> Result<BandStructure, CliError> {
    checked_spec(spec)?;
    band_structure(spec, n_k).module("floquet")
}

fn tolerances(cfg: &Config) -> Tolerances {
    Tolerances { rtol: cfg.numerics.rtol, atol: cfg.numerics.atol, ..Tolerances::default() }
}

fn ring_length(cfg: &Config) -> f64 {
    cfg.numerics.n_cells as f64 * cfg.waveguide.lambda_d()
}

/// Configured mode window, or the default half-width around the qubit frequencies.
fn mode_window(cfg: &Config, omegas: &[f64]) -> (f64, f64) {
    cfg.numerics.window.unwrap_or_else(|| {
        let lo = omegas.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = omegas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo - DEFAULT_WINDOW_HALF_WIDTH, hi + DEFAULT_WINDOW_HALF_WIDTH)
    })
}

fn gamma0_of(q: &Qubit, spec: &WaveguideSpec, omega: f64, l: f64) -> Result<f64, CliError> {
    let dens = spec.densities();
    match q.coupling {
        QubitCoupling::Gamma0(g) => Ok(g),
        QubitCoupling::Direct(g) => Ok(gamma0_from_g0(g, &dens, l)),
        QubitCoupling::Circuit(c, _) => gamma0_from_circuit(&c, &dens, omega, l).module("markov"),
    }
}

/// Markov report, or `None` inside a gap.
fn markov(bs: &BandStructure, omega: f64, gamma0: f64) -> Result<Option<ChiralReport>, CliError> {
    match chiral_report(bs, omega, gamma0) {
        Ok(r) => Ok(Some(r)),
        Err(chiralguide::Error::DegenerateChirality { .. }) => Ok(None),
        Err(e) => Err(CliError::from_core("markov", e)),
    }
}

fn max_speed(report: Option<&ChiralReport>, spec: &WaveguideSpec) -> f64 {
    report
        .and_then(|r| r.roots.iter().filter(|r| !r.edge_flag).map(|r| r.vg.abs()).reduce(f64::max))
        .unwrap_or(spec.v0())
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Bidirectional => "bidirectional",
        Regime::RightChiral => "right-chiral",
        Regime::LeftChiral => "left-chiral",
        Regime::Gap => "gap",
    }
}

/// Emission system for the configured qubits, plus the ring length.
fn emission_system(cfg: &Config, bs: &BandStructure, qubits: &[Qubit]) -> Result<EmissionSystem, CliError> {
    let omegas: Vec<f64> = qubits.iter().map(|q| q.omega_q).collect();
    let modes = discretize_modes(bs, cfg.numerics.n_cells, &cfg.numerics.bands, mode_window(cfg, &omegas))
        .module("dynamics")?;
    let l = modes.length;
    let specs = qubits.iter().map(|q| q.spec(&cfg.waveguide, l)).collect();
    EmissionSystem::new(modes, specs).module("dynamics")
}

/// |ψ|² averaged into at most [`MAX_FIELD_POINTS`] bins.
fn binned_intensity(snap: &FieldSnapshot) -> Vec<(f64, f64)> {
    let n = snap.x_grid.len();
    let per = n.div_ceil(MAX_FIELD_POINTS).max(1);
    (0..n)
        .step_by(per)
        .map(|a| {
            let b = (a + per).min(n);
            let x = snap.x_grid[a..b].iter().sum::<f64>() / (b - a) as f64;
            let i = snap.psi[a..b].iter().map(|p| p.norm_sqr()).sum::<f64>() / (b - a) as f64;
            (x, i)
        })
        .collect()
}

fn field_table(snaps: &[FieldSnapshot], lambda_d: f64) -> Table {
    let mut t = Table::new(&["t_ns", "x_over_lambda_d", "intensity"]);
    for s in snaps {
        for (x, i) in binned_intensity(s) {
            t.push(vec![(s.t * 1e9).into(), (x / lambda_d).into(), i.into()]);
        }
    }
    t
}

pub fn bands(cfg: &Config, out: &mut Writer) -> Result<(), CliError> {
    let spec = &cfg.waveguide;
    let bs = band_structure_of(spec, cfg.numerics.n_k)?;
    let v0 = spec.v0();
    let nf = spec.n_floquet as i32;
    let mut headers: Vec<String> = ["k_rad_per_m", "k_over_kd", "band", "freq_ghz", "vg_over_v0", "stable"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    headers.extend((-nf..=nf).map(|n| format!("weight_n{n}")));
    let mut table = Table { headers, rows: Vec::new() };
    for l in 0..bs.n_bands() {
        for (j, &k) in bs.k_grid.iter().enumerate() {
            let mut row: Vec<Cell> = vec![
                k.into(),
                (k / spec.kd).into(),
                l.into(),
                ghz(bs.omega[l][j]).into(),
                (bs.vg[l][j] / v0).into(),
                bs.stable[j].into(),
            ];
            row.extend((0..spec.n_harmonics()).map(|i| Cell::from(bs.weight(l, i, j))));
            table.push(row);
        }
    }
    out.table("bands", &table)?;
    let gaps: Vec<_> = local_gaps(&bs)
        .iter()
        .map(|g| json!({"lo_ghz": ghz(g.omega_lo), "hi_ghz": ghz(g.omega_hi), "k_over_kd": g.k_center / spec.kd}))
        .collect();
    let extent: Vec<_> = (0..bs.n_bands())
        .map(|l| json!({"band": l, "min_ghz": ghz(bs.band_min(l).0), "max_ghz": ghz(bs.band_max(l).0)}))
        .collect();
    out.json(
        "bands_summary",
        &json!({
            "v0_m_per_s": v0,
            "lambda_d_m": spec.lambda_d(),
            "drive_ghz": ghz(spec.omega_d()),
            "vd_over_v0": spec.vd / v0,
            "cj_ratio": spec.cj_ratio(spec.k_max()),
            "all_stable": bs.all_stable(),
            "gaps": gaps,
            "bands": extent,
        }),
    )
}

pub fn regimes(cfg: &Config, out: &mut Writer) -> Result<(), CliError> {
    let bs = band_structure_of(&cfg.waveguide, cfg.numerics.n_k)?;
    let report = classify_regimes(&bs, cfg.numerics.weight_threshold, None);
    let mut table = Table::new(&["lo_ghz", "hi_ghz", "regime"]);
    for w in &report.windows {
        table.push(vec![ghz(w.omega_lo).into(), ghz(w.omega_hi).into(), regime_name(w.regime).into()]);
    }
    out.table("regimes", &table)?;
    let gaps: Vec<_> = report
        .gaps
        .iter()
        .map(|g| json!({"lo_ghz": ghz(g.omega_lo), "hi_ghz": ghz(g.omega_hi), "k_over_kd": g.k_center / cfg.waveguide.kd}))
        .collect();
    out.json("regimes_summary", &json!({"gaps": gaps, "has_gap_window": report.has_gap_window()}))
}

pub fn emit(cfg: &Config, out: &mut Writer) -> Result<(), CliError> {
    if cfg.qubits.is_empty() {
        return Err(CliError::Config("qubits: emit needs at least one qubit".into()));
    }
    let spec = &cfg.waveguide;
    let bs = band_structure_of(spec, cfg.numerics.n_k)?;
    let sys = emission_system(cfg, &bs, &cfg.qubits)?;
    let l = sys.modes.length;
    let omega_q = cfg.qubits[0].omega_q;
    let gamma0 = sys.gamma0(0);
    let report = markov(&bs, omega_q, gamma0)?;
    let gamma_t = report.as_ref().map_or(gamma0, ChiralReport::gamma_total);
    let t_final = cfg.numerics.t_final.unwrap_or_else(|| default_t_final(gamma_t, l, max_speed(report.as_ref(), spec)));
    let dt_out = cfg.numerics.dt_out.unwrap_or(t_final / 400.0);
    let traj = evolve_with(&sys, &sys.excited(0), t_final, dt_out, tolerances(cfg)).module("dynamics")?;

    let mut headers = vec!["t_ns".to_string()];
    headers.extend((0..sys.n_qubits()).map(|i| format!("p{i}")));
    headers.push("norm".into());
    let pops: Vec<Vec<f64>> = (0..sys.n_qubits()).map(|i| traj.excitation(i)).collect();
    let mut table = Table { headers, rows: Vec::new() };
    for (j, t) in traj.t.iter().enumerate() {
        let mut row = vec![Cell::from(t * 1e9)];
        row.extend(pops.iter().map(|p| Cell::from(p[j])));
        row.push(traj.norm(j).into());
        table.push(row);
    }
    out.table("populations", &table)?;

    let n_snap = cfg.numerics.snapshots.max(1);
    let snaps: Vec<FieldSnapshot> = (1..=n_snap)
        .map(|s| {
            let target = t_final * s as f64 / n_snap as f64;
            let j = traj
                .t
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
                .map_or(0, |(j, _)| j);
            field_on_ring(&sys, &traj.states[j], traj.t[j], 4)
        })
        .collect();
    out.table("field", &field_table(&snaps, spec.lambda_d()))?;

    let last = snaps.last().expect("at least one snapshot");
    let x0 = cfg.qubits[0].x;
    let r = LOCALIZATION_RADIUS * spec.lambda_d();
    let gamma_fit = fit_decay_rate(&traj.t, &pops[0], 0.9, 0.1);
    let regime = report.as_ref().map_or(Regime::Gap, |r| classify_roots(&r.roots, cfg.numerics.weight_threshold));
    out.json(
        "emit_summary",
        &json!({
            "omega_q_ghz": ghz(omega_q),
            "regime": regime_name(regime),
            "gamma0_rad_per_s": gamma0,
            "gamma_markov_rad_per_s": report.as_ref().map(ChiralReport::gamma_total),
            "beta_plus_markov": report.as_ref().map(|r| r.beta_plus),
            "gamma_fit_rad_per_s": gamma_fit,
            "gamma_fit_over_markov": gamma_fit.zip(report.as_ref()).map(|(g, r)| g / r.gamma_total()),
            "beta_plus_field": last.beta_plus(),
            "final_population": pops[0].last(),
            "localized_fraction": last.energy_between(x0 - r, x0 + r) / last.total_energy(),
            "norm_drift": traj.max_norm_drift(),
            "t_final_s": t_final,
            "n_modes": sys.n_modes(),
        }),
    )
}

#[derive(Serialize)]
struct SweepSummary {
    vd_over_v0: f64,
    points: usize,
    failed: usize,
    gap_points: usize,
    beta_plus_min: Option<f64>,
    beta_plus_max: Option<f64>,
    /// Width of the widest run of consecutive points with β₊ > 0.9.
    right_chiral_bandwidth_ghz: f64,
    left_chiral_bandwidth_ghz: f64,
    has_gap_window: Option<bool>,
}

enum Outcome {
    Chiral(ChiralReport, Regime),
    Gap,
    Failed(String),
}

fn widest_run(omega: &[f64], outcomes: &[Outcome], pick: impl Fn(&ChiralReport) -> bool) -> f64 {
    let mut best = 0.0f64;
    let mut start: Option<f64> = None;
    for (w, o) in omega.iter().zip(outcomes) {
        match o {
            Outcome::Chiral(r, _) if pick(r) => {
                let s = *start.get_or_insert(*w);
                best = best.max(w - s);
            }
            _ => start = None,
        }
    }
    best
}

pub fn sweep_beta(cfg: &Config, out: &mut Writer) -> Result<(), CliError> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| CliError::Config("sweep: sweep-beta needs a [sweep] table".into()))?;
    let l = ring_length(cfg);
    let (lo, hi) = (sweep.omega[0], *sweep.omega.last().expect("non-empty"));
    let per_vd: Vec<(Vec<Outcome>, Option<bool>)> = sweep
        .vd
        .par_iter()
        .map(|&vd| {
            let spec = WaveguideSpec { vd, ..cfg.waveguide };
            let bs = match band_structure_of(&spec, cfg.numerics.n_k) {
                Ok(bs) => bs,
                Err(e) => return (sweep.omega.iter().map(|_| Outcome::Failed(e.to_string())).collect(), None),
            };
            let outcomes = sweep
                .omega
                .iter()
                .map(|&w| {
                    let gamma0 = match cfg.qubits.first() {
                        Some(q) => gamma0_of(q, &spec, w, l),
                        None => Ok(NOMINAL_GAMMA0),
                    };
                    match gamma0.and_then(|g| markov(&bs, w, g)) {
                        Ok(Some(r)) => match classify_roots(&r.roots, cfg.numerics.weight_threshold) {
                            Regime::Gap => Outcome::Gap,
                            regime => Outcome::Chiral(r, regime),
                        },
                        Ok(None) => Outcome::Gap,
                        Err(e) => Outcome::Failed(e.to_string()),
                    }
                })
                .collect();
            let gap_window = (hi > lo)
                .then(|| classify_regimes_in(&bs, cfg.numerics.weight_threshold, None, lo, hi).has_gap_window());
            (outcomes, gap_window)
        })
        .collect();

    let mut table = Table::new(&[
        "vd_over_v0",
        "freq_ghz",
        "regime",
        "beta_plus",
        "beta_minus",
        "gamma_r_over_gamma0",
        "gamma_l_over_gamma0",
        "status",
    ]);
    let mut failures = Vec::new();
    let mut summaries = Vec::new();
    for (&vd, (outcomes, gap_window)) in sweep.vd.iter().zip(&per_vd) {
        let v = vd / cfg.waveguide.v0();
        for (&w, o) in sweep.omega.iter().zip(outcomes) {
            let row: Vec<Cell> = match o {
                Outcome::Chiral(r, regime) => vec![
                    v.into(),
                    ghz(w).into(),
                    regime_name(*regime).into(),
                    r.beta_plus.into(),
                    r.beta_minus.into(),
                    (r.gamma_r / r.gamma_0).into(),
                    (r.gamma_l / r.gamma_0).into(),
                    "ok".into(),
                ],
                Outcome::Gap => {
                    vec![
                        v.into(),
                        ghz(w).into(),
                        "gap".into(),
                        "".into(),
                        "".into(),
                        0.0.into(),
                        0.0.into(),
                        "ok".into(),
                    ]
                }
                Outcome::Failed(msg) => {
                    failures.push(format!("vd = {v:.4} v0, {:.4} GHz: {msg}", ghz(w)));
                    vec![
                        v.into(),
                        ghz(w).into(),
                        "".into(),
                        "".into(),
                        "".into(),
                        "".into(),
                        "".into(),
                        format!("failed: {msg}").into(),
                    ]
                }
            };
            table.push(row);
        }
        let betas: Vec<f64> = outcomes
            .iter()
            .filter_map(|o| if let Outcome::Chiral(r, _) = o { Some(r.beta_plus) } else { None })
            .collect();
        summaries.push(SweepSummary {
            vd_over_v0: v,
            points: outcomes.len(),
            failed: outcomes.iter().filter(|o| matches!(o, Outcome::Failed(_))).count(),
            gap_points: outcomes.iter().filter(|o| matches!(o, Outcome::Gap)).count(),
            beta_plus_min: betas.iter().cloned().reduce(f64::min),
            beta_plus_max: betas.iter().cloned().reduce(f64::max),
            right_chiral_bandwidth_ghz: ghz(widest_run(&sweep.omega, outcomes, |r| r.beta_plus > CHIRAL_BETA)),
            left_chiral_bandwidth_ghz: ghz(widest_run(&sweep.omega, outcomes, |r| r.beta_minus > CHIRAL_BETA)),
            has_gap_window: *gap_window,
        });
    }
    out.table("sweep", &table)?;
    out.json("sweep_summary", &json!({"series": summaries, "failures": failures}))?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Partial(format!(
            "{} of {} points failed:\n  {}",
            failures.len(),
            table.rows.len(),
            failures.join("\n  ")
        )))
    }
}

pub fn network(cfg: &Config, out: &mut Writer) -> Result<(), CliError> {
    let nw = cfg
        .network
        .ok_or_else(|| CliError::Config("network: the network experiment needs a [network] table".into()))?;
    let [first] = cfg.qubits.as_slice() else {
        return Err(CliError::Config(format!(
            "qubits: network takes one template qubit, got {}; the second node sits at network.separation",
            cfg.qubits.len()
        )));
    };
    if !(nw.separation > 0.0) {
        return Err(CliError::Config("network.separation: must be > 0".into()));
    }
    let spec = &cfg.waveguide;
    let bs = band_structure_of(spec, cfg.numerics.n_k)?;
    let second = Qubit { x: first.x + nw.separation, ..*first };
    let sys = emission_system(cfg, &bs, &[*first, second])?;
    let report = markov(&bs, first.omega_q, sys.gamma0(0))?.ok_or_else(|| {
        CliError::Config("qubits[0].frequency: lies in a gap; no photon reaches the second node".into())
    })?;
    let dominant = *report.dominant().expect("non-degenerate report has a root");
    let vg_max = max_speed(Some(&report), spec);
    let l = sys.modes.length;
    let t_final = cfg.numerics.t_final.unwrap_or_else(|| {
        let wanted = nw.separation / dominant.vg.abs() + 8.0 / report.gamma_total();
        wanted.min(0.95 * (0.5 * l - nw.separation) / vg_max)
    });
    let dt_out = cfg.numerics.dt_out.unwrap_or(t_final / 800.0);
    let run = two_node_run(&sys, vg_max, t_final, dt_out, cfg.numerics.snapshots.max(1), tolerances(cfg))
        .module("dynamics")?;
    let two_node = analyze_two_node(&run, &sys).module("dynamics")?;

    let phases = nw.phases.then(|| PropagationPhases::from_report(&report, spec.kd));
    let gen =
        build_cascaded_generator(report.gamma_r, report.gamma_l, &[first.x, second.x], phases).module("cascade")?;
    let cmp = compare_with_exact(&gen, &run.trajectory).module("cascade")?;
    let markov_parameter = gen.markov_parameter(dominant.vg);
    let warning = gen.markov_warning(dominant.vg);
    if let Some(w) = &warning {
        eprintln!("warning: cascade: {w}");
    }

    let traj = &run.trajectory;
    let (p1, p2) = (traj.excitation(0), traj.excitation(1));
    let mut table = Table::new(&["t_ns", "p1_exact", "p2_exact", "p1_cascade", "p2_cascade"]);
    for j in 0..cmp.populations[0].len() {
        table.push(vec![
            (traj.t[j] * 1e9).into(),
            p1[j].into(),
            p2[j].into(),
            cmp.populations[0][j].into(),
            cmp.populations[1][j].into(),
        ]);
    }
    out.table("populations", &table)?;
    out.table("field", &field_table(&run.snapshots, spec.lambda_d()))?;
    let v0 = spec.v0();
    out.json(
        "network_report",
        &json!({
            "separation_lambda_d": nw.separation / spec.lambda_d(),
            "omega_q_ghz": ghz(first.omega_q),
            "markov": {
                "gamma_r_rad_per_s": report.gamma_r,
                "gamma_l_rad_per_s": report.gamma_l,
                "beta_plus": report.beta_plus,
                "vg_over_v0": dominant.vg / v0,
                "expected_delay_s": nw.separation / dominant.vg.abs(),
            },
            "dynamics": {
                "gamma_fit_rad_per_s": two_node.gamma_fit,
                "t_peak_s": two_node.t_peak,
                "peak_population": two_node.peak_population,
                "delay_s": two_node.delay,
                "vg_delay_over_v0": two_node.vg_delay / v0,
                "vg_front_over_v0": two_node.vg_front.map(|v| v / v0),
                "re_excitation": two_node.re_excitation,
                "norm_drift": traj.max_norm_drift(),
            },
            "cascade": {
                "phases": phases,
                "sup_norm": cmp.sup_norm,
                "max_sup_norm": cmp.max_sup_norm,
                "markov_parameter": markov_parameter,
                "warning": warning,
            },
        }),
    )
}

fn branch_row(spec: &WaveguideSpec, c: &BranchCheck) -> Vec<Cell> {
    vec![
        (c.q / spec.kd).into(),
        c.band.into(),
        ghz(c.floquet).into(),
        c.weight.into(),
        c.ridge.map_or(Cell::from(""), |r| ghz(r).into()),
        c.rel_dev.into(),
    ]
}

pub fn oracle(cfg: &Config, out: &mut Writer) -> Result<(), CliError> {
    let spec = cfg.waveguide;
    let o = cfg.oracle;
    let bs = band_structure_of(&spec, cfg.numerics.n_k)?;
    let (_, record) = kicked_ring(spec, o.wavelengths, o.coarse, o.duration, 1.125 * o.max_omega).module("lattice")?;
    let map = extract_dispersion(&record, false);
    let pts = ridges(&map, o.threshold, (0.125 * o.max_omega, 1.125 * o.max_omega));
    let mut ridge_table = Table::new(&["k_rad_per_m", "k_over_kd", "freq_ghz", "power"]);
    for p in &pts {
        ridge_table.push(vec![p.k.into(), (p.k / spec.kd).into(), ghz(p.omega).into(), p.power.into()]);
    }
    out.table("ridges", &ridge_table)?;

    let headers = ["k_over_kd", "band", "floquet_ghz", "weight", "ridge_ghz", "rel_dev"];
    let branches =
        compare_ridges(&spec, &map, &pts, (0.2 * spec.kd, 1.5 * spec.kd), o.max_omega, 0.5).module("lattice")?;
    let mut table = Table::new(&headers);
    branches.iter().for_each(|c| table.push(branch_row(&spec, c)));
    out.table("comparison", &table)?;
    let edges = compare_gap_edges(&spec, &local_gaps(&bs), &map, &pts).module("lattice")?;
    let mut table = Table::new(&headers);
    edges.iter().for_each(|c| table.push(branch_row(&spec, c)));
    out.table("gap_edges", &table)?;

    if o.write_map {
        let mut t = Table::new(&["k_over_kd", "freq_ghz", "power"]);
        for (ik, k) in map.k.iter().enumerate() {
            for (iw, w) in map.omega.iter().enumerate().filter(|(_, w)| **w <= 1.125 * o.max_omega) {
                t.push(vec![(k / spec.kd).into(), ghz(*w).into(), map.power[ik][iw].into()]);
            }
        }
        out.table("dispersion_map", &t)?;
    }
    let worst = |c: &[BranchCheck]| c.iter().map(|c| c.rel_dev).fold(0.0, f64::max);
    out.json(
        "oracle_summary",
        &json!({
            "ridge_points": pts.len(),
            "compared_branches": branches.len(),
            "worst_rel_dev": worst(&branches),
            "gap_edges": edges.len(),
            "worst_gap_edge_rel_dev": worst(&edges),
        }),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub value: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Warn,
    Fail,
    Skipped,
}

fn check(name: impl Into<String>, status: Status, value: Option<f64>, detail: impl Into<String>) -> Check {
    Check { name: name.into(), status, value, detail: detail.into() }
}

/// Report-only checks of a configuration; never fails.
pub fn validate_checks(cfg: &Config) -> Vec<Check> {
    let spec = &cfg.waveguide;
    let mut checks = Vec::new();
    let structural = spec.validate();
    checks.push(match &structural {
        Ok(()) => check("structure", Status::Pass, None, "all waveguide parameters finite and in range"),
        Err(e) => check("structure", Status::Fail, None, e.to_string()),
    });
    let v0 = spec.v0();
    let ratio = (spec.vd / v0).abs();
    checks.push(if !(ratio < 1.0) {
        check("stability", Status::Fail, Some(ratio), "|vd|/v0 >= 1: quasi-energies turn complex")
    } else if ratio > 0.1 {
        check("stability", Status::Warn, Some(ratio), "|vd|/v0 > 0.1: modulation is not slow compared with the wave")
    } else {
        check("stability", Status::Pass, Some(ratio), "|vd|/v0 < 0.1")
    });
    let depth = (spec.delta_alpha / spec.alpha0).abs();
    checks.push(if depth < 1.0 {
        check("modulation_depth", Status::Pass, Some(depth), "|delta_alpha|/alpha0 < 1")
    } else {
        check("modulation_depth", Status::Fail, Some(depth), "|delta_alpha|/alpha0 >= 1: inductance changes sign")
    });
    let cj = spec.cj_ratio(spec.k_max());
    checks.push(if cj < CJ_RATIO_WARN {
        check("cj_ratio", Status::Pass, Some(cj), format!("c_J d0^2 k_max^2 / c_g below {CJ_RATIO_WARN}"))
    } else {
        check(
            "cj_ratio",
            Status::Warn,
            Some(cj),
            format!(
                "c_J d0^2 k_max^2 / c_g = {cj:.3} at k_max = {:.1} k_d; c_J shifts the upper harmonics",
                spec.k_max() / spec.kd
            ),
        )
    });
    let usable = structural.is_ok() && ratio < 1.0;
    let l = ring_length(cfg);
    let omegas: Vec<f64> = cfg.qubits.iter().map(|q| q.omega_q).collect();
    let window = (!omegas.is_empty()).then(|| mode_window(cfg, &omegas));
    for (i, q) in cfg.qubits.iter().enumerate() {
        let name = format!("window_margin[{i}]");
        let (Some((lo, hi)), true) = (window, usable) else {
            checks.push(check(name, Status::Skipped, None, "waveguide invalid"));
            continue;
        };
        match gamma0_of(q, spec, q.omega_q, l) {
            Ok(g0) => {
                let margin = (q.omega_q - lo).min(hi - q.omega_q);
                let need = WINDOW_MARGIN_GAMMA0 * g0;
                let status = if margin >= need { Status::Pass } else { Status::Fail };
                checks.push(check(
                    name,
                    status,
                    Some(margin / g0),
                    format!("window margin {:.1} Gamma0 (need {WINDOW_MARGIN_GAMMA0})", margin / g0),
                ));
            }
            Err(e) => checks.push(check(name, Status::Fail, None, e.to_string())),
        }
    }
    if !usable {
        return checks;
    }
    let bs = match band_structure(spec, cfg.numerics.n_k) {
        Ok(bs) => bs,
        Err(e) => {
            checks.push(check("band_structure", Status::Fail, None, e.to_string()));
            return checks;
        }
    };
    let mut reports = Vec::new();
    for (i, q) in cfg.qubits.iter().enumerate() {
        let name = format!("regime[{i}]");
        let report = gamma0_of(q, spec, q.omega_q, l).and_then(|g0| markov(&bs, q.omega_q, g0));
        match report {
            Ok(Some(r)) => {
                let regime = classify_roots(&r.roots, cfg.numerics.weight_threshold);
                checks.push(check(
                    name,
                    Status::Pass,
                    Some(r.beta_plus),
                    format!("{} at {:.4} GHz, beta_plus = {:.3}", regime_name(regime), ghz(q.omega_q), r.beta_plus),
                ));
                reports.push(Some(r));
            }
            Ok(None) => {
                checks.push(check(
                    name,
                    Status::Warn,
                    None,
                    format!("gap at {:.4} GHz: bound state, no emission", ghz(q.omega_q)),
                ));
                reports.push(None);
            }
            Err(e) => {
                checks.push(check(name, Status::Fail, None, e.to_string()));
                reports.push(None);
            }
        }
    }
    if let (Some(nw), Some(Some(r))) = (cfg.network, reports.first()) {
        let vg = r.dominant().map_or(v0, |d| d.vg.abs());
        let tau_gamma = nw.separation / vg * r.gamma_total();
        checks.push(if tau_gamma > MARKOV_WARN {
            check(
                "markov_cascade",
                Status::Warn,
                Some(tau_gamma),
                format!("delay x decay rate = {tau_gamma:.3} exceeds {MARKOV_WARN}; the cascade drops retardation"),
            )
        } else {
            check("markov_cascade", Status::Pass, Some(tau_gamma), format!("delay x decay rate = {tau_gamma:.3}"))
        });
        checks.push(check(
            "markov_dynamics",
            Status::Pass,
            Some(tau_gamma),
            "exact dynamics keeps the propagation delay",
        ));
    }
    checks
}

pub fn validate(cfg: &Config, out: &mut Writer) -> Result<(), CliError> {
    let checks = validate_checks(cfg);
    for c in &checks {
        let tag = match c.status {
            Status::Pass => "PASS",
            Status::Warn => "WARN",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        println!("{tag}  {}: {}", c.name, c.detail);
    }
    let ok = checks.iter().all(|c| c.status != Status::Fail);
    out.json("validate", &json!({"ok": ok, "checks": checks}))
}
