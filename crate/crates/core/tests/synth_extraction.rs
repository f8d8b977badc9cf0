//! Synthetic devices pushed through the full extraction pipeline.

mod common;

use common::*;
use hemtkit::extraction::integrate_charge;
use hemtkit::extraction::pipeline::{device_report, PipelineOptions};
use hemtkit::measurement::{CurveKind, SweepCurve};
use hemtkit::synth::*;
use proptest::prelude::*;

#[test]
fn oracle_closure_grid() {
    for vth in GRID_VTH {
        for mu0 in GRID_MU0 {
            for eta in GRID_ETA {
                let c = closure_errors(vth, mu0, eta);
                let at = format!("vth {vth} mu0 {mu0} eta {eta}");
                assert!(c.vth <= 0.020, "{at}: vth error {}", c.vth);
                assert!(c.ss <= 0.02, "{at}: ss error {}", c.ss);
                assert!(c.mu <= 0.03, "{at}: mobility error {}", c.mu);
                assert!(c.r_total <= 0.01, "{at}: r_total error {}", c.r_total);
                assert!(c.dibl <= 0.02, "{at}: dibl error {}", c.dibl);
                assert!(c.endpoints_exact, "{at}: endpoints");
                assert!(c.cv_vs_transfer <= 0.15, "{at}: cv vs transfer {}", c.cv_vs_transfer);
            }
        }
    }
}

#[test]
fn same_seed_same_noise() {
    let mut p = closure_device(-1.5, 1200.0, 1.34);
    p.noise_amplitude = 0.01;
    p.seed = 7;
    let plan = closure_plan(-1.5);
    let a = synthesize(&p, &plan).unwrap();
    let b = synthesize(&p, &plan).unwrap();
    assert_eq!(a, b);
    p.seed = 8;
    assert_ne!(synthesize(&p, &plan).unwrap().output, a.output);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn current_scaling_covariance(log_alpha in -3.0f64..3.0) {
        let alpha = 10f64.powf(log_alpha);
        let base = reference_report();
        let scaled = device_report(&scale_currents(&data_of(reference_fixture()), alpha), &PipelineOptions::default()).unwrap();
        for (e0, e1) in paired(base, &scaled) {
            prop_assert_eq!(&e0.conditions, &e1.conditions);
            let (Some(v0), Some(v1)) = (e0.value, e1.value) else { continue };
            let expect = match e0.name.as_str() {
                "gm_peak" | "i_on" | "i_off" | "mobility_peak" => v0 * alpha,
                "ron" => v0 / alpha,
                _ => v0,
            };
            prop_assert!(close(v1, expect, input_scale(e0)), "{} {:?}: {} vs {}", e0.name, e0.conditions, v1, expect);
        }
    }

    #[test]
    fn gate_shift_covariance(delta in -1.0f64..1.0) {
        let base = reference_report();
        let shifted = device_report(&shift_gate(&data_of(reference_fixture()), delta), &PipelineOptions::default()).unwrap();
        for (e0, e1) in paired(base, &shifted) {
            for ((k0, c0), (k1, c1)) in e0.conditions.iter().zip(&e1.conditions) {
                prop_assert_eq!(k0, k1);
                let moved = if k0.starts_with("vgs") { delta } else { 0.0 };
                prop_assert!(close(*c1, c0 + moved, 1.0));
            }
            let (Some(v0), Some(v1)) = (e0.value, e1.value) else { continue };
            let expect = if e0.name == "vth" { v0 + delta } else { v0 };
            prop_assert!(close(v1, expect, input_scale(e0).max(1.0)), "{} {:?}: {} vs {}", e0.name, e0.conditions, v1, expect);
        }
    }

    #[test]
    fn charge_monotone_for_nonnegative_capacitance(
        c in prop::collection::vec(0.0f64..1e-12, 4..60),
        steps in prop::collection::vec(0.001f64..0.2, 60),
    ) {
        let mut x = vec![-3.0];
        for s in &steps[..c.len() - 1] {
            x.push(x[x.len() - 1] + s);
        }
        let curve = SweepCurve::new(x, c, 0.0, CurveKind::Cv).unwrap();
        let q = integrate_charge(&curve, 1e-8).unwrap();
        prop_assert!(q.charge.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn current_monotone_in_both_biases(
        vgs in -4.0f64..2.0, dvg in 0.0f64..0.5,
        vds in 0.0f64..3.0, dvd in 0.0f64..0.5,
    ) {
        let p = CompactModelParams::reference_device();
        let i = model_current(&p, vgs, vds, T);
        prop_assert!(model_current(&p, vgs + dvg, vds, T) >= i);
        prop_assert!(model_current(&p, vgs, vds + dvd, T) >= i);
    }
}
