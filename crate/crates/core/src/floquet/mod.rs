//! Bloch-Floquet quasi-energies of the travelling-wave-modulated chain.
//!
//! Harmonic n of a mode at quasi-wavenumber k carries wavenumber q_n = k + n·k_d and lab
//! frequency ω + nΩ, so the field is Σ_n u_n e^{i(q_n x − (ω + nΩ) t)}. Positive q is a
//! right-mover. At δα = 0 the positive branches are ω = v₀|k + n k_d| − nΩ.

mod bands;
mod regimes;

pub use bands::{band_structure, band_structure_with, BandStructure};
pub use regimes::{
    classify_regimes, classify_regimes_in, classify_roots, local_gaps, BandGap, GapReport, Regime, RegimeWindow,
    DEFAULT_WEIGHT_THRESHOLD,
};

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::WaveguideSpec;

pub type C64 = Complex<f64>;

/// Relative imaginary-part tolerance: |Im ω| ≤ TOL_IM_REL·|ω_d| counts as real.
pub const TOL_IM_REL: f64 = 1e-6;

/// Quadratic eigenproblem (ω² M₂ + ω M₁ + M₀) u = 0 in SI units. All entries are real.
#[derive(Debug, Clone)]
pub struct Qep {
    pub m2: DMatrix<f64>,
    pub m1: DMatrix<f64>,
    pub m0: DMatrix<f64>,
}

/// Eigenpairs at one k, ascending in Re ω.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandPoint {
    pub k: f64,
    pub omega: Vec<C64>,
    /// `u[l][j]` is the coefficient of harmonic n = j − n_floquet on branch l.
    pub u: Vec<Vec<C64>>,
    pub stable: bool,
}

/// Harmonic indices −n_floquet..=n_floquet.
pub fn harmonics(spec: &WaveguideSpec) -> impl Iterator<Item = i32> + Clone {
    let nf = spec.n_floquet as i32;
    -nf..=nf
}

pub fn assemble_qep(spec: &WaveguideSpec, k: f64) -> Qep {
    let d = spec.densities();
    let dim = spec.n_harmonics();
    let om = spec.omega_d();
    let q: Vec<f64> = harmonics(spec).map(|n| k + n as f64 * spec.kd).collect();
    let mut m2 = DMatrix::zeros(dim, dim);
    let mut m1 = DMatrix::zeros(dim, dim);
    let mut m0 = DMatrix::zeros(dim, dim);
    for (j, n) in harmonics(spec).enumerate() {
        let mass = d.cj * spec.d0 * spec.d0 * q[j] * q[j] + d.cg;
        let nw = n as f64 * om;
        m2[(j, j)] = -mass;
        m1[(j, j)] = -2.0 * nw * mass;
        m0[(j, j)] = -nw * nw * mass + spec.alpha0 / d.lj * q[j] * q[j];
        if j + 1 < dim {
            let t = spec.delta_alpha / (2.0 * d.lj) * q[j] * q[j + 1];
            m0[(j, j + 1)] = t;
            m0[(j + 1, j)] = t;
        }
    }
    Qep { m2, m1, m0 }
}

/// The QEP divided through so that ω and k are measured in units of v₀k_d and k_d.
struct Scaled {
    a2: DVector<f64>,
    a1: DVector<f64>,
    a0: DMatrix<f64>,
    omega_scale: f64,
}

impl Scaled {
    fn new(spec: &WaveguideSpec, k: f64) -> Self {
        let qep = assemble_qep(spec, k);
        let d = spec.densities();
        let ws = d.v0 * spec.kd;
        Scaled {
            a2: qep.m2.diagonal() / d.cg,
            a1: qep.m1.diagonal() / (d.cg * ws),
            a0: qep.m0 / (d.cg * ws * ws),
            omega_scale: ws,
        }
    }

    fn dim(&self) -> usize {
        self.a2.len()
    }

    fn companion(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut c = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            c[(i, n + i)] = 1.0;
            for j in 0..n {
                c[(n + i, j)] = -self.a0[(i, j)] / self.a2[i];
            }
            c[(n + i, n + i)] = -self.a1[i] / self.a2[i];
        }
        c
    }

    fn real_matrix(&self, w: f64) -> DMatrix<f64> {
        let mut q = self.a0.clone();
        for i in 0..self.dim() {
            q[(i, i)] += w * w * self.a2[i] + w * self.a1[i];
        }
        q
    }

    /// Null vector of the real symmetric Q(w); also returns the polished eigenvalue.
    fn real_pair(&self, w: f64) -> (f64, DVector<f64>) {
        let null = |w: f64| {
            let eig = SymmetricEigen::new(self.real_matrix(w));
            let j = eig.eigenvalues.iamin();
            eig.eigenvectors.column(j).into_owned()
        };
        let mut u = null(w);
        // Rayleigh quotient of the symmetric QEP: stationary, so one step squares the error.
        let a = u.dot(&self.a2.component_mul(&u));
        let b = u.dot(&self.a1.component_mul(&u));
        let c = u.dot(&(&self.a0 * &u));
        let disc = b * b - 4.0 * a * c;
        let mut w_new = w;
        if disc >= 0.0 {
            let s = disc.sqrt();
            let r1 = (-b + s) / (2.0 * a);
            let r2 = (-b - s) / (2.0 * a);
            w_new = if (r1 - w).abs() < (r2 - w).abs() { r1 } else { r2 };
            if (w_new - w).abs() > 1e-6 * w.abs().max(1e-3) {
                w_new = w;
            } else {
                u = null(w_new);
            }
        }
        (w_new, u)
    }

    fn complex_vector(&self, w: C64) -> DVector<C64> {
        let n = self.dim();
        let mut q = self.a0.map(|x| C64::new(x, 0.0));
        for i in 0..n {
            q[(i, i)] += w * w * self.a2[i] + w * self.a1[i];
        }
        let svd = q.svd(false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let j = svd.singular_values.imin();
        v_t.row(j).transpose().map(|z| z.conj())
    }
}

/// Rotates `u` so its largest component is real and positive, then normalizes to unit 2-norm.
fn fix_gauge(u: &mut [C64]) {
    let norm = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let pivot = u.iter().copied().max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr())).unwrap_or(C64::new(1.0, 0.0));
    let phase = pivot.conj() / pivot.norm();
    for z in u.iter_mut() {
        *z = *z * phase / norm;
    }
}

pub fn solve_band(spec: &WaveguideSpec, k: f64) -> Result<BandPoint> {
    solve_band_with(spec, k, TOL_IM_REL * spec.omega_d().abs())
}

/// Solves the QEP at `k` and keeps the 2·n_floquet + 1 eigenvalues of largest real part.
pub fn solve_band_with(spec: &WaveguideSpec, k: f64, tol_im: f64) -> Result<BandPoint> {
    let sc = Scaled::new(spec, k);
    let n = sc.dim();
    let schur =
        nalgebra::linalg::Schur::try_new(sc.companion(), f64::EPSILON, 10_000).ok_or(Error::NumericalFailure { k })?;
    let mut eig: Vec<C64> = schur.complex_eigenvalues().iter().copied().collect();
    if eig.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NumericalFailure { k });
    }
    eig.sort_by(|a, b| b.re.total_cmp(&a.re));
    eig.truncate(n);
    eig.sort_by(|a, b| a.re.total_cmp(&b.re));

    let mut omega = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut stable = true;
    for w in eig {
        if w.im == 0.0 {
            let (w_real, vec) = sc.real_pair(w.re);
            let mut v: Vec<C64> = vec.iter().map(|&x| C64::new(x, 0.0)).collect();
            fix_gauge(&mut v);
            omega.push(C64::new(w_real * sc.omega_scale, 0.0));
            u.push(v);
        } else {
            let mut v: Vec<C64> = sc.complex_vector(w).iter().copied().collect();
            fix_gauge(&mut v);
            let w_si = w * sc.omega_scale;
            if w_si.im.abs() > tol_im {
                stable = false;
            }
            omega.push(w_si);
            u.push(v);
        }
    }
    // Polishing can reorder nearly degenerate pairs.
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| omega[a].re.total_cmp(&omega[b].re));
    let omega = idx.iter().map(|&i| omega[i]).collect();
    let u = idx.iter().map(|&i| u[i].clone()).collect();
    Ok(BandPoint { k, omega, u, stable })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unmodulated(vd_frac: f64) -> WaveguideSpec {
        WaveguideSpec { delta_alpha: 0.0, c_j: 0.0, ..WaveguideSpec::table1(vd_frac) }
    }

    fn closed_form(spec: &WaveguideSpec, k: f64) -> Vec<f64> {
        let v0 = spec.v0();
        let mut w: Vec<f64> =
            harmonics(spec).map(|n| v0 * (k + n as f64 * spec.kd).abs() - n as f64 * spec.omega_d()).collect();
        w.sort_by(f64::total_cmp);
        w
    }

    #[test]
    fn unmodulated_m0_is_diagonal() {
        let spec = WaveguideSpec { delta_alpha: 0.0, ..WaveguideSpec::table1(0.05) };
        let qep = assemble_qep(&spec, 0.1 * spec.kd);
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    assert_eq!(qep.m0[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn free_mass_matrix() {
        let spec = WaveguideSpec { c_j: 0.0, ..WaveguideSpec::table1(0.05) };
        let qep = assemble_qep(&spec, 0.3 * spec.kd);
        let cg = spec.densities().cg;
        assert_eq!(qep.m2, DMatrix::from_diagonal_element(5, 5, -cg));
    }

    #[test]
    fn entries_by_hand() {
        // n_floquet = 1, k = 0.1 k_d, every entry written out from the circuit values
        let spec = WaveguideSpec { n_floquet: 1, ..WaveguideSpec::table1(0.05) };
        let k = 0.1 * spec.kd;
        let qep = assemble_qep(&spec, k);
        let (cg, cj, lj) = (0.2e-15 / 1e-6, 100e-15 / 1e-6, 0.2e-9 / 1e-6);
        let kd = 2.0 * std::f64::consts::PI * 2500.0;
        let om = spec.vd * kd;
        for (j, n) in [-1.0f64, 0.0, 1.0].iter().enumerate() {
            let q = k + n * kd;
            let mass = cj * 1e-12 * q * q + cg;
            assert_relative_eq!(qep.m2[(j, j)], -mass, max_relative = 1e-14);
            assert_relative_eq!(qep.m1[(j, j)], -2.0 * n * om * mass, max_relative = 1e-14);
            let t = -(n * om).powi(2) * mass + 0.3 / lj * q * q;
            assert_relative_eq!(qep.m0[(j, j)], t, max_relative = 1e-12);
        }
        let (qm, q0, qp) = (k - kd, k, k + kd);
        assert_relative_eq!(qep.m0[(0, 1)], 0.09 / (2.0 * lj) * qm * q0, max_relative = 1e-14);
        assert_relative_eq!(qep.m0[(1, 2)], 0.09 / (2.0 * lj) * q0 * qp, max_relative = 1e-14);
        assert_eq!(qep.m0[(0, 2)], 0.0);
        assert_eq!(qep.m0[(0, 1)], qep.m0[(1, 0)]);
    }

    #[test]
    fn closed_form_limit() {
        let spec = unmodulated(0.05);
        for j in 0..40 {
            let k = spec.kd * (-0.5 + (j as f64 + 0.5) / 40.0);
            let bp = solve_band(&spec, k).unwrap();
            let expect = closed_form(&spec, k);
            for (w, e) in bp.omega.iter().zip(&expect) {
                assert!((w.re - e).abs() <= 1e-9 * e.abs().max(1.0), "{} vs {}", w.re, e);
                assert_eq!(w.im, 0.0);
            }
            for u in &bp.u {
                let big = u.iter().filter(|z| z.norm() > 1e-12).count();
                assert_eq!(big, 1);
            }
        }
    }

    #[test]
    fn zero_wavenumber_keeps_full_branch_count() {
        let spec = WaveguideSpec::table1(0.05);
        let bp = solve_band(&spec, 0.0).unwrap();
        assert_eq!(bp.omega.len(), 5);
        assert!(bp.omega[0].re.abs() < 1e-3 * spec.omega_d());
    }

    #[test]
    fn eigenpairs_satisfy_qep() {
        let spec = WaveguideSpec::table1(0.05);
        for &kf in &[-0.49, -0.2, 0.013, 0.31, 0.5] {
            let k = kf * spec.kd;
            let bp = solve_band(&spec, k).unwrap();
            let qep = assemble_qep(&spec, k);
            for (w, u) in bp.omega.iter().zip(&bp.u) {
                let uv = DVector::from_vec(u.clone());
                let to_c = |m: &DMatrix<f64>| m.map(|x| C64::new(x, 0.0));
                let r = (to_c(&qep.m2) * *w * *w + to_c(&qep.m1) * *w + to_c(&qep.m0)) * &uv;
                let scale = qep.m0.norm();
                assert!(r.norm() < 1e-10 * scale, "residual {} at k/kd = {kf}", r.norm() / scale);
            }
        }
    }

    #[test]
    fn unstable_beyond_v0() {
        let spec = WaveguideSpec::table1(1.3);
        let unstable =
            (0..64).map(|j| spec.kd * (-0.5 + (j as f64 + 1.0) / 64.0)).any(|k| !solve_band(&spec, k).unwrap().stable);
        assert!(unstable);
    }

    #[test]
    fn drive_reversal_mirrors_k() {
        let spec = WaveguideSpec::table1(0.05);
        let rev = WaveguideSpec { vd: -spec.vd, ..spec };
        for &kf in &[0.07, 0.23, 0.41, 0.48] {
            let a = solve_band(&spec, kf * spec.kd).unwrap();
            let b = solve_band(&rev, -kf * spec.kd).unwrap();
            for (x, y) in a.omega.iter().zip(&b.omega) {
                assert_relative_eq!(x.re, y.re, max_relative = 1e-10);
            }
        }
    }

    fn truncation_shift(base: &WaveguideSpec, nf: usize) -> f64 {
        let lo = WaveguideSpec { n_floquet: nf, ..*base };
        let hi = WaveguideSpec { n_floquet: nf + 1, ..*base };
        let mut worst = 0.0f64;
        for j in 0..100 {
            let k = base.kd * (-0.5 + (j as f64 + 0.5) / 100.0);
            let a = solve_band(&lo, k).unwrap();
            let b = solve_band(&hi, k).unwrap();
            // the two lowest bands of the smaller problem reappear in the larger spectrum
            for w in &a.omega[..2] {
                let best = b.omega.iter().map(|z| (z.re - w.re).abs()).fold(f64::INFINITY, f64::min);
                worst = worst.max(best / w.re.abs().max(1e8));
            }
        }
        worst
    }

    #[test]
    fn truncation_convergence() {
        let base = WaveguideSpec::table1(0.05);
        let shifts: Vec<f64> = (1..=4).map(|nf| truncation_shift(&base, nf)).collect();
        // measured: 1.9e-2, 1.0e-3, 4.3e-5, 1.8e-6
        assert!(shifts[1] < 2e-3, "{shifts:?}");
        assert!(shifts[3] < 5e-6, "{shifts:?}");
        for pair in shifts.windows(2) {
            assert!(pair[1] < 0.2 * pair[0], "{shifts:?}");
        }
    }

    proptest! {
        #[test]
        fn unit_norm(kf in -0.4999f64..0.5, frac in 0.0f64..0.09) {
            let spec = WaveguideSpec::table1(frac.max(0.001));
            let bp = solve_band(&spec, kf * spec.kd).unwrap();
            for u in &bp.u {
                let s: f64 = u.iter().map(|z| z.norm_sqr()).sum();
                prop_assert!((s - 1.0).abs() < 1e-10);
            }
        }

        #[test]
        fn real_in_table1_regime(kf in -0.4999f64..0.5, frac in 0.001f64..0.1) {
            let spec = WaveguideSpec::table1(frac);
            let bp = solve_band(&spec, kf * spec.kd).unwrap();
            prop_assert!(bp.stable);
            for w in &bp.omega {
                prop_assert!(w.im.abs() <= 1e-9 * w.re.abs());
            }
        }

        #[test]
        fn analytic_limit(kf in -0.4999f64..0.5, frac in 0.001f64..0.2) {
            let spec = unmodulated(frac);
            let k = kf * spec.kd;
            let bp = solve_band(&spec, k).unwrap();
            for (w, e) in bp.omega.iter().zip(closed_form(&spec, k)) {
                prop_assert!((w.re - e).abs() <= 1e-9 * e.abs().max(1e-3 * spec.omega_d()));
            }
        }

        #[test]
        fn pencil_comes_in_pairs(kf in -0.4999f64..0.5) {
            // at δα = 0 each harmonic contributes the pair ±v₀|q_n| − nΩ
            let spec = unmodulated(0.05);
            let k = kf * spec.kd;
            let sc = Scaled::new(&spec, k);
            let schur = nalgebra::linalg::Schur::new(sc.companion());
            let mut eig: Vec<f64> = schur.complex_eigenvalues().iter().map(|z| z.re).collect();
            eig.sort_by(f64::total_cmp);
            let om = spec.omega_d() / sc.omega_scale;
            let mut expect: Vec<f64> = harmonics(&spec)
                .flat_map(|n| {
                    let q = (k / spec.kd + n as f64).abs();
                    [q - n as f64 * om, -q - n as f64 * om]
                })
                .collect();
            expect.sort_by(f64::total_cmp);
            for (a, b) in eig.iter().zip(&expect) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
