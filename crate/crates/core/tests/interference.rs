use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rbphoton_core::two_photon_interference::{
    coincidence_rate, ideal_opo_psi, reconstruct_wavefunction, simulate_records, CoherentRef, RecordSimulation,
};

proptest! {
    #[test]
    fn rate_has_period_pi(psi_phase in -PI..PI, amp in 0.01..2.0f64, phi in -PI..PI, floor in 0.0..1.0f64) {
        let psi = ideal_opo_psi(8.1e6, psi_phase, 1e-9, 40).unwrap();
        let r = |p| CoherentRef { amplitude: Complex64::new(amp, 0.0), phase_rad: p };
        for i in 0..psi.psi.len() {
            let a = coincidence_rate(&psi, &r(phi), i, floor);
            let b = coincidence_rate(&psi, &r(phi + PI), i, floor);
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }
    }

    #[test]
    fn noise_free_records_invert_exactly(psi_phase in -PI..PI, settings in 3usize..8, floor in 0.0..0.1f64) {
        let psi = ideal_opo_psi(8.1e6, psi_phase, 1e-9, 30).unwrap();
        let amplitude = (2.0 * psi.centre().norm()).sqrt();
        let sim = RecordSimulation {
            amplitude,
            phases_rad: (0..settings).map(|k| k as f64 * PI / settings as f64).collect(),
            exposure: 100.0,
            floor_rate: floor,
            noise: false,
            seed: 0,
        };
        let rec = reconstruct_wavefunction(&simulate_records(&psi, &sim).unwrap(), amplitude, 0.0).unwrap();
        for (a, b) in rec.psi.psi.iter().zip(&psi.psi) {
            prop_assert!((a - b).norm() <= 1e-10 * b.norm());
        }
    }
}
