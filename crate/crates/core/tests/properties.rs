use std::f64::consts::PI;

use chiralguide::cascade::{build_cascaded_generator, evolve_network, NetworkState, PropagationPhases};
use chiralguide::dynamics::{discretize_modes, evolve, EmissionSystem};
use chiralguide::floquet::{band_structure, C64};
use chiralguide::markov::{chiral_report, g0_for_gamma0};
use chiralguide::{QubitSpec, WaveguideSpec};
use proptest::prelude::*;

const GHZ: f64 = 2.0 * PI * 1e9;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn drive_reversal_swaps_rates(vd in 0.02f64..0.09, f in 2.6f64..3.1) {
        let spec = WaveguideSpec::table1(vd);
        let a = chiral_report(&band_structure(&spec, 128).unwrap(), f * GHZ, 1e7);
        let b = chiral_report(&band_structure(&WaveguideSpec { vd: -spec.vd, ..spec }, 128).unwrap(), f * GHZ, 1e7);
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!((a.gamma_r - b.gamma_l).abs() <= 1e-9 * a.gamma_total());
            prop_assert!((a.gamma_l - b.gamma_r).abs() <= 1e-9 * a.gamma_total());
        }
    }

    #[test]
    fn emission_conserves_norm(f in 2.8f64..3.1, x in -5.0f64..5.0) {
        let spec = WaveguideSpec::table1(0.05);
        let bs = band_structure(&spec, 64).unwrap();
        let modes = discretize_modes(&bs, 300, &[0, 1], ((f - 0.2) * GHZ, (f + 0.2) * GHZ)).unwrap();
        let g0 = g0_for_gamma0(2.0 * PI * 5e6, &spec.densities(), modes.length);
        let sys = EmissionSystem::new(modes, vec![QubitSpec::new(f * GHZ, x * spec.lambda_d(), g0)]).unwrap();
        let traj = evolve(&sys, &sys.excited(0), 20e-9, 1e-9).unwrap();
        prop_assert!(traj.max_norm_drift() < 1e-8);
    }

    #[test]
    fn cascade_density_matrix_stays_physical(
        gr in 0.1f64..2.0,
        gl in 0.0f64..1.0,
        gap in 0.1f64..3.0,
        k in -2.0f64..2.0,
        re in prop::collection::vec(-1.0f64..1.0, 8),
        im in prop::collection::vec(-1.0f64..1.0, 8),
    ) {
        let phases = PropagationPhases { k_right: k, k_left: 0.5 * k };
        let gen = build_cascaded_generator(gr, gl, &[0.0, gap, 2.0 * gap], Some(phases)).unwrap();
        let amps: Vec<C64> = re.iter().zip(&im).take(gen.dim()).map(|(a, b)| C64::new(*a, *b) + 0.1).collect();
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let amps: Vec<C64> = amps.iter().map(|z| z / norm).collect();
        let traj = evolve_network(&gen, &NetworkState::pure(&gen, &amps).unwrap(), 4.0, 0.1).unwrap();
        prop_assert!(traj.max_trace_error() < 1e-10);
        prop_assert!(traj.max_hermiticity_error() < 1e-10);
        prop_assert!(traj.min_eigenvalue() > -1e-10);
    }
}
