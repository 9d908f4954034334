use cat_amp::hamiltonian::{Detuning, DrivenJc};
use cat_amp::hilbert::{partial_trace_qubit, BasisDims, QuantumState};
use cat_amp::lindblad::lindblad_rhs;
use cat_amp::protocol::{qubit_reset, snap_gate, snap_operator, ProtocolConfig};
use cat_amp::pulses::ScheduleOptions;
use cat_amp::states::{cat_ket, coherent_ket, shift_op, CatSpec, FidelityWith, Parity};
use cat_amp::wigner::displacement_op;
use cat_amp::{DeviceParams, FockKet, C64};
use proptest::prelude::*;

fn parity() -> impl Strategy<Value = Parity> {
    prop_oneof![Just(Parity::Even), Just(Parity::Odd)]
}

/// Normalized joint ket with amplitudes drawn from `[-1, 1]²`.
fn joint_ket(nc: usize) -> impl Strategy<Value = FockKet> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2 * nc).prop_filter_map("zero vector", move |v| {
        let amps: Vec<C64> = v.into_iter().map(|(re, im)| C64::new(re, im)).collect();
        FockKet::from_slice(&amps, BasisDims::joint(nc)).ok()?.normalized().ok()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cats_are_normalized_with_pure_parity(alpha in 0.2f64..2.5, p in parity()) {
        let ket = cat_ket(&CatSpec::real(alpha, p).unwrap(), 30).unwrap();
        prop_assert!((ket.norm() - 1.0).abs() < 1e-9);
        let wrong: f64 = ket.populations().iter().enumerate().filter(|(n, _)| !p.matches(*n)).map(|(_, q)| q).sum();
        prop_assert_eq!(wrong, 0.0);
    }

    #[test]
    fn shift_flips_parity_k_times(alpha in 0.2f64..2.0, p in parity(), k in 1usize..=2) {
        let nc = 30;
        let ket = cat_ket(&CatSpec::real(alpha, p).unwrap(), nc).unwrap();
        let out = ket.apply(&shift_op(nc, k).unwrap()).unwrap();
        let expected = p.after_shift(k);
        let wrong: f64 = out.populations().iter().enumerate().filter(|(n, _)| !expected.matches(*n)).map(|(_, q)| q).sum();
        prop_assert_eq!(wrong, 0.0);
        let pops = ket.populations();
        let shifted = out.populations();
        for n in 0..nc - k {
            prop_assert!((shifted[n + k] - pops[n]).abs() < 1e-15);
        }
    }

    #[test]
    fn snap_is_unitary_and_keeps_populations(
        phases in prop::collection::vec(-3.2f64..3.2, 1..=6),
        ket in joint_ket(6),
    ) {
        let op = snap_operator(&phases, ket.dims()).unwrap();
        prop_assert!(op.unitarity_defect() < 1e-12);
        let out = snap_gate(&QuantumState::Pure(ket.clone()), &phases).unwrap();
        let before = ket.populations();
        let after = out.to_density().populations();
        for (a, b) in before.iter().zip(&after) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn reset_keeps_cavity_and_swaps_qubit(ket in joint_ket(5)) {
        let cfg = ProtocolConfig::new(DeviceParams::default().with_cavity_dim(5), &ScheduleOptions::default()).unwrap();
        let rho = ket.to_density();
        let out = qubit_reset(&QuantumState::Mixed(rho.clone()), &cfg).unwrap().to_density();
        let dist = partial_trace_qubit(&rho).unwrap().trace_distance(&partial_trace_qubit(&out).unwrap()).unwrap();
        prop_assert!(dist < 1e-12);
        let (p, q) = (rho.populations(), out.populations());
        for n in 0..5 {
            prop_assert!((p[n] - q[5 + n]).abs() < 1e-12);
            prop_assert!((p[5 + n] - q[n]).abs() < 1e-12);
        }
    }

    #[test]
    fn generator_is_traceless_and_hermitian(
        ket in joint_ket(4),
        delta in -5.0f64..5.0,
        kappa in 0.0f64..1.0,
        gamma in 0.0f64..1.0,
    ) {
        let p = DeviceParams {
            kappa,
            gamma_minus: gamma,
            gamma_phi: 0.5 * gamma,
            lambda: 2.0,
            ..DeviceParams::default().with_cavity_dim(4)
        };
        let h = DrivenJc::new(&p, Detuning::Constant(delta), None).unwrap();
        let d = lindblad_rhs(&ket.to_density(), 0.0, &h, &p).unwrap();
        prop_assert!(d.trace().norm() < 1e-10);
        prop_assert!((&d - d.adjoint()).norm() < 1e-10);
    }

    #[test]
    fn displacement_of_vacuum_is_coherent(re in -1.5f64..1.5, im in -1.5f64..1.5) {
        let beta = C64::new(re, im);
        let nc = 40;
        let d = displacement_op(beta, nc).unwrap();
        prop_assert!(d.unitarity_defect() < 1e-8);
        let out = FockKet::fock(nc, 0).unwrap().apply(&d).unwrap();
        let f = out.fidelity_with(&coherent_ket(beta, nc).unwrap()).unwrap();
        prop_assert!(f > 1.0 - 1e-8);
    }
}
