//! Invariants checked over randomised inputs.

use proptest::prelude::*;

use csl_modes::background::{Background, CosmologyParams, EraSchedule};
use csl_modes::coupling::{gamma_of_lambda, lambda_of_gamma, Bracket, Coupling, CslParams};
use csl_modes::exclusion::{
    gamma_bounds, log10_gamma_of_lambda, log10_lambda_of_gamma, parse_lab_overlay, scan_grid, ScanSpec,
};
use csl_modes::modes::{MatchingRule, Modes};
use csl_modes::moments::{evolve_final, MomentOptions};
use csl_modes::riccati::{integrate_omega, OmegaOptions};
use csl_modes::spectrum::{evaluation_time, power_spectrum, Route, SpectrumOptions};
use csl_modes::units::{convert_units, Constants, Dimension, UnitSystem};

fn cosmo(delta_n: f64) -> CosmologyParams {
    CosmologyParams::new(1e-5, 0.005, 0.0, -1e5, delta_n).unwrap()
}

fn final_q(gamma_hat: f64, r_c: f64, k_factor: f64, radiation_efolds: f64) -> f64 {
    let cm = cosmo(4.0);
    let bg = Background::new(cm);
    let c = Coupling::new(cm, CslParams::new(gamma_hat, r_c, 1.0, 0.0).unwrap(), Bracket::Full);
    let m = Modes::new(bg, cm.k_ref() * k_factor, MatchingRule::CurvatureContinuous);
    let sch = EraSchedule::new(&bg, m.k, 50.0, radiation_efolds).unwrap();
    integrate_omega(&c, &m, &sch, &[], &OmegaOptions::default())
        .unwrap()
        .last()
        .q
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    // In the radiation era R turns back up once 1/R - 1 reaches a few
    // thousand (from γ̂ ≈ 10^5.4 at k = k_ref, later for larger k); see
    // `radiation_era_ratio_turns_over_in_strong_collapse`.
    #[test]
    fn collapse_ratio_lies_in_unit_interval_and_falls_with_gamma(
        lg in -2.0f64..5.0,
        lrc in 2.0f64..5.0,
        lk in 0.0f64..1.0,
    ) {
        let (g, rc, kf) = (10f64.powf(lg), 10f64.powf(lrc), 10f64.powf(lk));
        let q1 = final_q(g, rc, kf, 1.0);
        let q2 = final_q(3.0 * g, rc, kf, 1.0);
        let (r1, r2) = (1.0 / (1.0 + q1), 1.0 / (1.0 + q2));
        prop_assert!(r1 > 0.0 && r1 <= 1.0, "R = {r1}");
        prop_assert!(r2 <= r1, "R not monotone: {r1} -> {r2}");
    }

    #[test]
    fn ratio_at_end_of_inflation_falls_with_gamma(
        lg in -2.0f64..8.0,
        lrc in 2.0f64..5.0,
        lk in 0.0f64..1.0,
    ) {
        let (g, rc, kf) = (10f64.powf(lg), 10f64.powf(lrc), 10f64.powf(lk));
        let (q1, q2) = (final_q(g, rc, kf, 0.0), final_q(3.0 * g, rc, kf, 0.0));
        prop_assert!(q1 >= 0.0 && q2 >= q1, "1/R - 1 not monotone: {q1} -> {q2}");
    }

    #[test]
    fn moments_respect_uncertainty_and_spectrum_is_non_negative(
        lg in -2.0f64..5.0,
        lrc in 2.0f64..5.0,
        lk in 0.0f64..1.0,
    ) {
        let cm = cosmo(6.0);
        let bg = Background::new(cm);
        let p = CslParams::new(10f64.powf(lg), 10f64.powf(lrc), 1.0, 0.0).unwrap();
        let c = Coupling::new(cm, p, Bracket::Full);
        let k = cm.k_ref() * 10f64.powf(lk);
        let m = Modes::new(bg, k, MatchingRule::CurvatureContinuous);
        let sch = EraSchedule::new(&bg, k, 50.0, 1.0).unwrap();
        let s = evolve_final(&c, &m, &sch, &MomentOptions::default()).unwrap();
        prop_assert!(s.full().uncertainty_margin() >= -1e-8);
        prop_assert!(s.delta().p_vv >= 0.0);
        let opts = SpectrumOptions::default();
        let eta = evaluation_time(&cm, &[k], &opts).unwrap();
        let pt = power_spectrum(k, Route::Lindblad, &cm, &p, eta, &opts).unwrap();
        prop_assert!(pt.p_v >= 0.0 && pt.p_v.is_finite());
    }
}

#[test]
fn radiation_era_ratio_turns_over_in_strong_collapse() {
    let (rc, kf) = (1e2, 10f64.powf(0.1945));
    let q = |lg: f64| final_q(10f64.powf(lg), rc, kf, 1.0);
    let (a, b, c) = (q(5.5), q(5.784), q(6.26));
    assert!(a < b && c < b, "{a} {b} {c}");
    assert!((b / 4785.947 - 1.0).abs() < 1e-5, "{b}");
    assert!((c / 3474.577 - 1.0).abs() < 1e-5, "{c}");
}

proptest! {
    // λ ∝ γ/r_c³ leaves the normal f64 range near λ ~ 1e-308; the log10
    // forms cover the rest
    #[test]
    fn lambda_gamma_round_trip(lg in -150.0f64..0.0, lrc in -10.0f64..40.0) {
        let (g, rc) = (10f64.powf(lg), 10f64.powf(lrc));
        let back = gamma_of_lambda(lambda_of_gamma(g, rc), rc);
        prop_assert!((back - g).abs() <= 1e-12 * g);
    }

    #[test]
    fn log10_lambda_gamma_round_trip(lg in -400.0f64..100.0, lrc in -40.0f64..100.0) {
        let back = log10_gamma_of_lambda(log10_lambda_of_gamma(lg, lrc), lrc);
        prop_assert!((back - lg).abs() <= 1e-12 * lg.abs().max(1.0));
        // consistent with the linear form where both are representable
        if (-100.0..0.0).contains(&lg) && (-5.0..20.0).contains(&lrc) {
            let lin = lambda_of_gamma(10f64.powf(lg), 10f64.powf(lrc)).log10();
            prop_assert!((lin - log10_lambda_of_gamma(lg, lrc)).abs() < 1e-10);
        }
    }

    #[test]
    fn unit_conversion_round_trip(v in 1e-30f64..1e30) {
        let c = Constants::default();
        for dim in [Dimension::Length, Dimension::Time, Dimension::Rate, Dimension::Mass, Dimension::Strength, Dimension::Wavenumber] {
            let si = convert_units(v, dim, UnitSystem::Planck, UnitSystem::Si, &c);
            let back = convert_units(si, dim, UnitSystem::Si, UnitSystem::Planck, &c);
            prop_assert!((back - v).abs() <= 1e-13 * v, "{dim:?}");
        }
    }

    #[test]
    fn upper_bound_scales_inversely_with_epsilon(lrc in 0.0f64..60.0, f in 0.1f64..10.0) {
        let cm = CosmologyParams::fiducial();
        let m0 = Constants::default().amu_planck();
        let cm2 = CosmologyParams { epsilon1: cm.epsilon1 * f, ..cm };
        let rc = 10f64.powf(lrc);
        let (a, b) = (gamma_bounds(rc, m0, &cm).unwrap(), gamma_bounds(rc, m0, &cm2).unwrap());
        prop_assert!((a.log10_gamma_max - b.log10_gamma_max - f.log10()).abs() < 1e-10);
        prop_assert!((a.log10_gamma_min - b.log10_gamma_min).abs() < 1e-12);
        prop_assert!(a.log10_gamma_max.is_finite() && a.log10_gamma_min.is_finite());
    }

    #[test]
    fn rectangles_contain_their_interior_and_holes_cut_it_out(
        x0 in -10.0f64..0.0, w in 0.5f64..5.0,
        y0 in -100.0f64..0.0, h in 0.5f64..20.0,
        u in 0.01f64..0.99, v in 0.01f64..0.99,
    ) {
        let (x1, y1) = (x0 + w, y0 + h);
        let ccw = format!(
            "polygon_id,vertex_index,log10_rc_m,log10_lambda_s\nr,0,{x0},{y0}\nr,1,{x1},{y0}\nr,2,{x1},{y1}\nr,3,{x0},{y1}\n"
        );
        let o = parse_lab_overlay(ccw.as_bytes()).unwrap();
        let p = (x0 + u * w, y0 + v * h);
        prop_assert!(o.excludes(p.0, p.1));
        prop_assert!(!o.excludes(x1 + 1.0, p.1));
        prop_assert!(!o.excludes(p.0, y0 - 1.0));
        // the same rectangle listed clockwise is a hole inside the first
        let both = format!("{ccw}h,0,{x0},{y0}\nh,1,{x0},{y1}\nh,2,{x1},{y1}\nh,3,{x1},{y0}\n");
        let o2 = parse_lab_overlay(both.as_bytes()).unwrap();
        prop_assert!(!o2.excludes(p.0, p.1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn scan_is_deterministic(n_rc in 2usize..40, n_l in 2usize..40) {
        let c = Constants::default();
        let spec = ScanSpec { n_rc, n_lambda: n_l, ..ScanSpec::default() };
        let cm = CosmologyParams::fiducial();
        let a = scan_grid(&spec, &cm, c.amu_planck(), &c, None).unwrap();
        let b = scan_grid(&spec, &cm, c.amu_planck(), &c, None).unwrap();
        prop_assert_eq!(a.cells.len(), n_rc * n_l);
        prop_assert_eq!(
            serde_json::to_string(&a.cells).unwrap(),
            serde_json::to_string(&b.cells).unwrap()
        );
    }
}
