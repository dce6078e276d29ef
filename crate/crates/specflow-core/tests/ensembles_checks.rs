//! Cross-source consistency of the ensemble quantities, including the
//! randomized invariants: monotone Gibbs entropy and the thermodynamic
//! identity at arbitrary temperatures.

use proptest::prelude::*;
use specflow_core::asymptotics::{CoefficientSet, HeatTraceModel};
use specflow_core::ensembles::{gibbs_entropy, internal_energy, ln_partition, ZSource};
use specflow_core::spectrum::{disk_spectrum, rectangle_spectrum};
use std::sync::OnceLock;

const PI: f64 = std::f64::consts::PI;

fn square_source() -> &'static ZSource {
    static S: OnceLock<ZSource> = OnceLock::new();
    S.get_or_init(|| ZSource::Spectrum(rectangle_spectrum(1.0, 1.0, 2.0e4).unwrap()))
}

#[test]
fn disk_gibbs_dual_path_within_two_percent() {
    let spec = ZSource::Spectrum(disk_spectrum(1.0, 4.0e4).unwrap());
    let model = ZSource::HeatTrace(HeatTraceModel::flat_open_d2(
        PI,
        2.0 * PI,
        2.0 * PI,
        CoefficientSet::Classical,
    ));
    for i in 0..=8 {
        let t = 10.0 + 5.0 * i as f64;
        let s_spec = gibbs_entropy(&spec, t).unwrap();
        let s_model = gibbs_entropy(&model, t).unwrap();
        assert!(
            (s_spec - s_model).abs() / s_spec.abs() < 0.02,
            "T {t}: {s_spec} vs {s_model}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gibbs_entropy_monotone_in_t(t1 in 5.0f64..60.0, dt in 0.1f64..20.0) {
        let s1 = gibbs_entropy(square_source(), t1).unwrap();
        let s2 = gibbs_entropy(square_source(), t1 + dt).unwrap();
        prop_assert!(s2 >= s1 - 1e-10, "S({t1}) = {s1} > S({}) = {s2}", t1 + dt);
    }

    #[test]
    fn thermodynamic_identity_random_t(t in 5.0f64..60.0) {
        let s = gibbs_entropy(square_source(), t).unwrap();
        let u = internal_energy(square_source(), t).unwrap();
        let lnz = ln_partition(square_source(), t).unwrap();
        prop_assert!((s - (u / t + lnz)).abs() < 1e-8, "identity off at T = {t}");
    }
}
