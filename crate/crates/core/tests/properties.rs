//! Property tests for the optical and detector invariants.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use blindsim::detector::{
    bias_at_t1, geiger_click, linear_click, ClickThresholds, DetectorModel, GeigerParams,
};
use blindsim::optics::{amplify, attenuate, encode_phase, interfere, OpticalFrame};
use blindsim::protocol::Basis;

proptest! {
    #[test]
    fn interference_conserves_energy(power in 0.0..10.0f64, phase in -10.0..10.0f64) {
        let (p0, p1) = interfere(power, phase);
        prop_assert!(p0 >= 0.0 && p1 >= -1e-300);
        prop_assert!((p0 + p1 - power).abs() <= 1e-12 * power.abs());
    }

    #[test]
    fn attenuation_composes(cw in 0.0..1.0f64, a in 0.0..30.0f64, b in 0.0..30.0f64) {
        let f = OpticalFrame::classical(0, cw, cw / 2.0, 0.0);
        let two_step = attenuate(&attenuate(&f, a).unwrap(), b).unwrap();
        let one_step = attenuate(&f, a + b).unwrap();
        prop_assert!((two_step.cw_power - one_step.cw_power).abs() <= 1e-12 * f.cw_power);
        prop_assert!(
            (two_step.pulse_peak_power - one_step.pulse_peak_power).abs()
                <= 1e-12 * f.pulse_peak_power
        );
    }

    #[test]
    fn amplify_inverts_attenuate(cw in 1e-9..1.0f64, x in 0.0..30.0f64) {
        let f = OpticalFrame::classical(0, cw, 0.0, 0.0);
        let back = amplify(&attenuate(&f, x).unwrap(), x).unwrap();
        prop_assert!((back.cw_power - f.cw_power).abs() <= 1e-12 * f.cw_power);
    }

    #[test]
    fn bias_at_t1_is_monotone(p1 in 0.0..0.01f64, p2 in 0.0..0.01f64) {
        let d = DetectorModel::preset("clavis2-det0").unwrap();
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        prop_assert!(bias_at_t1(hi, &d.elec) <= bias_at_t1(lo, &d.elec));
    }

    #[test]
    fn blinding_threshold_is_sharp(preset in prop::sample::select(vec![
        "clavis2-det0", "clavis2-det1", "qpn5505-det0", "qpn5505-det1",
    ]), factor in 0.01..2.0f64) {
        let d = DetectorModel::preset(preset).unwrap();
        let p = factor * d.thresholds.p_blind;
        // sharp threshold up to float rounding at the exact onset
        if factor < 0.999 {
            prop_assert!(!d.is_blinded(p));
        } else if factor > 1.001 {
            prop_assert!(d.is_blinded(p));
        }
    }
}

#[test]
fn matched_bases_decode_to_zero_or_pi() {
    for (bit, basis) in [(false, Basis::Z), (true, Basis::Z), (false, Basis::X), (true, Basis::X)] {
        for bob in [Basis::Z, Basis::X] {
            let delta = blindsim::optics::analyzer_phase(bob) - encode_phase(bit, basis);
            let reduced = delta.rem_euclid(std::f64::consts::PI);
            let on_axis = reduced.abs() < 1e-9 || (reduced - std::f64::consts::PI).abs() < 1e-9;
            assert_eq!(on_axis, bob == basis);
        }
    }
}

#[test]
fn linear_click_probability_is_monotone() {
    let th = ClickThresholds { p_never: 647e-6, p_always: 808e-6, p_blind: 397e-6 };
    let trials = 20_000;
    let mut prev = -1.0f64;
    for i in 0..=10 {
        let p = 600e-6 + i as f64 * 30e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(42 + i);
        let clicks = (0..trials).filter(|_| linear_click(p, &th, &mut rng).clicked).count();
        let rate = clicks as f64 / trials as f64;
        // allow 3 sigma of slack between neighbouring empirical rates
        let sigma = (0.25f64 / trials as f64).sqrt();
        assert!(rate >= prev - 3.0 * sigma, "rate {rate} fell below {prev} at {p}");
        prev = rate;
    }
}

#[test]
fn geiger_rate_matches_closed_form_on_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for &mu in &[0.05, 0.1, 0.5, 1.0] {
        for &eta in &[0.1, 0.5, 1.0] {
            for &p_dc in &[0.0, 1e-3] {
                let g = GeigerParams { efficiency: eta, dark_count_prob: p_dc };
                let trials = 200_000u64;
                let clicks = (0..trials).filter(|_| geiger_click(mu, &g, &mut rng).clicked).count();
                let expected = 1.0 - (1.0 - p_dc) * (-eta * mu).exp();
                let sigma = (expected * (1.0 - expected) / trials as f64).sqrt();
                let rate = clicks as f64 / trials as f64;
                assert!(
                    (rate - expected).abs() < 3.0 * sigma.max(1e-9),
                    "mu={mu} eta={eta} pdc={p_dc}: rate {rate} vs {expected}"
                );
            }
        }
    }
}
