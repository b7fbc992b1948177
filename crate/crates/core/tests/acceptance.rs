//! Acceptance suite: one test per release criterion, each printing a
//! single PASS/FAIL line with the measured quantities before asserting.
//!
//! Criteria 4-6 and 8 are Monte Carlo; their tolerances are statistical
//! bands at fixed seeds, everything else is analytic.

use analog_matching::codec::FailureHandling;
use analog_matching::filters::{design_matching, verify_exact_identities, DesignParams};
use analog_matching::lattice::{goodness_probe, Lattice, LatticeKind};
use analog_matching::robustness::{
    build_curve, comparison_curves, cor1_curve, distortion_slope, log_snr_grid,
    mismatched_distortion_spectrum, CurveScheme,
};
use analog_matching::sim::{
    run_end_to_end, run_mismatched, DesignMode, SimOptions,
};
use analog_matching::spectra::{opta, Spectrum, SystemSpec, DEFAULT_GRID};

const M: usize = DEFAULT_GRID;

fn verdict(name: &str, pass: bool, detail: &str) -> bool {
    println!(
        "criterion {name}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

fn white_band_system(rho: f64, snr: f64) -> SystemSpec {
    // Unit total noise power; band limits arranged so B_C/B_S = rho.
    let (source, noise) = if rho >= 1.0 {
        let b_s = 1.0 / rho;
        (
            Spectrum::flat_band(1.0, b_s, M).unwrap(),
            Spectrum::flat(1.0, M),
        )
    } else {
        (
            Spectrum::flat(1.0, M),
            Spectrum::flat_band(1.0 / rho, rho, M).unwrap(),
        )
    };
    SystemSpec::new(source, noise, snr).unwrap()
}

#[test]
fn criterion_01_opta_closed_forms() {
    let t0 = std::time::Instant::now();
    let mut worst = 0.0_f64;
    for rho in [0.5, 1.0, 2.0] {
        for snr in [1.0, 10.0, 100.0] {
            let spec = white_band_system(rho, snr);
            let o = opta(&spec).unwrap();
            let expect = (1.0 + snr).powf(rho);
            worst = worst.max((o.sdr / expect - 1.0).abs());
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    let pass = worst < 1e-9 && dt < 1.0;
    assert!(verdict(
        "01 (white-system optimum = (1+SNR)^rho)",
        pass,
        &format!("worst relative error {worst:.2e}, runtime {dt:.2} s")
    ));
}

#[test]
fn criterion_02_gain_product_bound_and_limit() {
    let t0 = std::time::Instant::now();
    let source = Spectrum::ar1(0.9, 1.0, M).unwrap();
    let noise = Spectrum::two_level(1.0, 3.0, M);
    let gamma = source.prediction_gain().unwrap() * noise.prediction_gain().unwrap();
    let n = noise.integral();
    let mut bound_ok = true;
    for snr in [0.1, 1.0, 10.0, 100.0, 1e4, 1e6] {
        let spec = SystemSpec::new(source.clone(), noise.clone(), snr * n).unwrap();
        let o = opta(&spec).unwrap();
        if o.sdr > gamma * (1.0 + snr) * (1.0 + 1e-9) {
            bound_ok = false;
        }
    }
    let spec = SystemSpec::new(source, noise, 1e6 * n).unwrap();
    let o = opta(&spec).unwrap();
    let ratio = o.sdr / 1e6 / gamma;
    let dt = t0.elapsed().as_secs_f64();
    let pass = bound_ok && (ratio - 1.0).abs() < 0.02 && dt < 10.0;
    assert!(verdict(
        "02 (gain-product bound and high-SNR limit)",
        pass,
        &format!("bound held: {bound_ok}, SDR/(G SNR) at 1e6 = {ratio:.5}, runtime {dt:.2} s")
    ));
}

#[test]
fn criterion_03_exact_identity_suite() {
    let mut worst_source = 0.0_f64;
    let mut worst_channel = 0.0_f64;
    let mut worst_var_t = 0.0_f64;
    for i in 0..10 {
        let a = 0.05 + 0.088 * i as f64;
        let source = Spectrum::ar1(a, 1.0, M).unwrap();
        let noise = if i % 2 == 0 {
            Spectrum::two_level(1.0, 1.0 + 0.35 * i as f64, M)
        } else {
            Spectrum::ar1(0.25 + 0.05 * i as f64, 0.5, M).unwrap()
        };
        let snr = 10f64.powf((i as f64 - 4.0) / 2.5);
        let spec = SystemSpec::new(source, noise.clone(), snr * noise.integral()).unwrap();
        let fs = design_matching(&spec, &DesignParams::default()).unwrap();
        let rep = verify_exact_identities(&fs, &spec).unwrap();
        worst_source = worst_source.max(rep.source_rel_err);
        worst_channel = worst_channel.max(rep.channel_rel_err);
        worst_var_t = worst_var_t.max(rep.var_t_rel_err);
    }
    let pass = worst_source < 1e-4 && worst_channel < 1e-4 && worst_var_t < 1e-6;
    assert!(verdict(
        "03 (conditional-variance identities, 10 systems)",
        pass,
        &format!(
            "worst source {worst_source:.2e}, channel {worst_channel:.2e}, VarT@beta0 {worst_var_t:.2e}"
        )
    ));
}

fn white20_opts(lattice: LatticeKind, rows: usize, blocks: usize, margin: f64) -> SimOptions {
    SimOptions {
        mode: DesignMode::Matching,
        lattice,
        rows,
        cols: 2048,
        blocks,
        design: DesignParams {
            predictor_len: 128,
            prefilter_len: 257,
            beta_margin: margin,
        },
        master_seed: 20,
        failure_handling: FailureHandling::ResetOnFailure,
        init_repeats: 0,
        synthesis_len: 64,
    }
}

fn white20_spec() -> SystemSpec {
    SystemSpec::new(Spectrum::flat(1.0, M), Spectrum::flat(1.0, M), 100.0).unwrap()
}

#[test]
fn criterion_04_equivalent_noise_whiteness() {
    // E8, margin 0.2, white/white at 20 dB, >= 1e6 recorded symbols.
    let spec = white20_spec();
    let opts = white20_opts(LatticeKind::E8, 8, 67, 0.2);
    let r = run_end_to_end(&spec, &opts).unwrap();
    let w = &r.whiteness;
    let lags_ok = w.max_abs_lag_corr < w.threshold;
    let cross_ok = w.max_abs_cross_corr < w.threshold;
    let zp_ok = (w.var_zprime / w.var_zprime_expected - 1.0).abs() < 0.03;
    let zeq_ok = (w.var_zeq / w.var_zeq_expected - 1.0).abs() < 0.03;
    let pass = w.n_samples >= 1_000_000 && lags_ok && cross_ok && zp_ok && zeq_ok;
    assert!(verdict(
        "04 (whitened-noise statistics at 1e6 symbols)",
        pass,
        &format!(
            "n {}, max|lag corr| {:.2e} (< {:.2e}), max|cross| {:.2e}, VarZ'/expect {:.4}, VarZeq/expect {:.4}",
            w.n_samples,
            w.max_abs_lag_corr,
            w.threshold,
            w.max_abs_cross_corr,
            w.var_zprime / w.var_zprime_expected,
            w.var_zeq / w.var_zeq_expected
        )
    ));
}

#[test]
fn criterion_05_end_to_end_distortion_band() {
    let t0 = std::time::Instant::now();
    let spec = white20_spec();
    let e8 = run_end_to_end(&spec, &white20_opts(LatticeKind::E8, 8, 67, 0.2)).unwrap();
    let scalar =
        run_end_to_end(&spec, &white20_opts(LatticeKind::ScaledInteger, 1, 530, 0.2)).unwrap();
    let dt = t0.elapsed().as_secs_f64();

    let gap = e8.gap_db_conditioned;
    let band_ok = (0.0..=3.2).contains(&gap);
    let e8_better = e8.distortion_total < scalar.distortion_total;
    let failure_ok = e8.failure_rate < 1e-3;
    println!(
        "criterion 05 detail: conditioned gap {gap:.2} dB (band 0..3.2), \
         total distortion E8 {:.4e} vs scalar {:.4e}, \
         failure rate E8 {:.3e} (scalar {:.3e}), runtime {dt:.1} s",
        e8.distortion_total, scalar.distortion_total, e8.failure_rate, scalar.failure_rate
    );
    let pass = band_ok && e8_better && failure_ok && dt < 300.0;
    assert!(
        verdict(
            "05 (distortion band, lattice ordering, failure rate)",
            pass,
            &format!(
                "gap in band: {band_ok}, E8 beats scalar: {e8_better}, \
                 failure < 1e-3: {failure_ok} (measured {:.3e}): an 8-dimensional cell at \
                 zoom margin 0.2 has an escape probability two orders above this target; \
                 E8 first reaches 1e-3 near margin 0.7, where the margin loss alone \
                 (4.6 dB) already exceeds the 3.2 dB band",
                e8.failure_rate
            )
        ),
        "the failure-rate clause is unattainable at desk-scale lattice dimension; \
         see the detail line for measured values"
    );
}

#[test]
fn criterion_06_zero_forcing_high_snr() {
    let source = Spectrum::ar1(0.9, 1.0, M).unwrap();
    let noise = Spectrum::ma1(0.5, 0.8, M).unwrap();
    let n = noise.integral();
    let snr = 1e4; // 40 dB
    let spec = SystemSpec::new(source.clone(), noise.clone(), snr * n).unwrap();
    let gamma = source.prediction_gain().unwrap() * noise.prediction_gain().unwrap();
    let opts = SimOptions {
        mode: DesignMode::ZeroForcing,
        lattice: LatticeKind::E8,
        rows: 8,
        cols: 2048,
        blocks: 16,
        design: DesignParams {
            predictor_len: 128,
            prefilter_len: 257,
            beta_margin: 0.05,
        },
        master_seed: 640,
        failure_handling: FailureHandling::ResetOnFailure,
        init_repeats: 0,
        synthesis_len: 64,
    };
    let r = run_end_to_end(&spec, &opts).unwrap();
    let ratio_db = 10.0 * (r.empirical_sdr_conditioned / (gamma * snr)).log10();
    let pass = ratio_db.abs() < 1.0;
    assert!(verdict(
        "06 (zero-forcing chain at 40 dB)",
        pass,
        &format!(
            "SDR/(Gamma_S Gamma_C SNR) = {ratio_db:+.2} dB (margin loss {:.2} dB expected), failures {:.2e}",
            20.0 * (1.05_f64).log10(),
            r.failure_rate
        )
    ));
}

#[test]
fn criterion_07_robustness_curves() {
    // Matched points recover the optimum exactly.
    let mut matched_ok = true;
    for (rho, snr0) in [(0.5, 10.0), (1.0, 10.0), (2.0, 10.0)] {
        let sdr = cor1_curve(rho, snr0, snr0).unwrap();
        if (sdr / (1.0 + snr0).powf(rho) - 1.0).abs() > 1e-12 {
            matched_ok = false;
        }
    }
    // Ordering at (rho = 2, snr0 = 10, snr = 100).
    let p = comparison_curves(2.0, 10.0, 100.0).unwrap();
    let outer = p.outer.unwrap();
    let order_ok = outer >= p.reported && p.reported >= p.am;
    // Mutual convergence within 1% at snr = 1e6 (snr0 = 100).
    let q = comparison_curves(2.0, 100.0, 1e6).unwrap();
    let vals = [q.am, q.reported, q.outer.unwrap()];
    let spread =
        vals.iter().cloned().fold(f64::MIN, f64::max) / vals.iter().cloned().fold(f64::MAX, f64::min)
            - 1.0;
    let converge_ok = spread < 0.01;
    let pass = matched_ok && order_ok && converge_ok;
    assert!(verdict(
        "07 (unknown-SNR comparison curves)",
        pass,
        &format!(
            "matched exact: {matched_ok}; ordering outer {outer:.1} >= reported {:.1} >= fixed {:.1}; \
             mutual spread at 1e6: {spread:.4e}",
            p.reported, p.am
        )
    ));
}

#[test]
fn criterion_08_mismatched_decoder_cross_validation() {
    let spec0 = SystemSpec::new(Spectrum::flat(1.0, M), Spectrum::flat(1.0, M), 10.0).unwrap();
    let actual = Spectrum::flat(0.1, M);
    let opts = SimOptions {
        mode: DesignMode::Matching,
        lattice: LatticeKind::E8,
        rows: 8,
        cols: 2048,
        blocks: 16,
        design: DesignParams {
            predictor_len: 128,
            prefilter_len: 257,
            beta_margin: 0.02,
        },
        master_seed: 88,
        failure_handling: FailureHandling::ResetOnFailure,
        init_repeats: 0,
        synthesis_len: 64,
    };
    let r = run_mismatched(&spec0, &actual, &opts).unwrap();
    // Compare the conditioned simulated distortion with the nominal-zoom
    // closed form.
    let fs = design_matching(&spec0, &opts.design).unwrap();
    let (_, d_formula) = mismatched_distortion_spectrum(&fs, &spec0, &actual).unwrap();
    let gap_db = 10.0 * (r.distortion_conditioned / d_formula).log10();
    let pass = gap_db.abs() < 0.3;
    assert!(verdict(
        "08 (mismatched decoder vs distortion formula)",
        pass,
        &format!(
            "simulated {:.4e} vs formula {d_formula:.4e}: {gap_db:+.3} dB (budget 0.3 dB)",
            r.distortion_conditioned
        )
    ));
}

#[test]
fn criterion_09_distortion_slopes() {
    let snrs = log_snr_grid(1e2, 1e6, 10);
    let mut results = Vec::new();
    let mut pass = true;
    for rho in [0.5, 1.0, 2.0] {
        let c = build_curve(CurveScheme::Opta, rho, 1e2, &snrs).unwrap();
        let lam = distortion_slope(&c).unwrap();
        if (lam - rho).abs() > 0.05 {
            pass = false;
        }
        results.push(format!("opta rho {rho}: {lam:.3}"));
        let f = build_curve(CurveScheme::Am, rho, 1e2, &snrs).unwrap();
        let lam_f = distortion_slope(&f).unwrap();
        let expect = if rho >= 1.0 { 1.0 } else { 0.0 };
        if (lam_f - expect).abs() > 0.05 {
            pass = false;
        }
        results.push(format!("fixed rho {rho}: {lam_f:.3}"));
    }
    assert!(verdict(
        "09 (distortion slopes)",
        pass,
        &results.join(", ")
    ));
}

#[test]
fn criterion_10_goodness_probe() {
    let scalar = Lattice::scaled_integer(1.0).unwrap();
    let rate = goodness_probe(&scalar, &[1.0], 1_000_000, 101).unwrap();
    let tail = 0.0832645; // 2 Q(sqrt(3))
    let tail_ok = (rate - tail).abs() < 0.005;

    // Monotone decrease with composition power (nested scalings).
    let r_a = goodness_probe(&scalar, &[1.0, 0.0], 300_000, 102).unwrap();
    let r_b = goodness_probe(&scalar, &[0.9, 0.0], 300_000, 102).unwrap();
    let r_c = goodness_probe(&scalar, &[0.8, 0.5], 300_000, 103).unwrap();
    let r_d = goodness_probe(&scalar, &[0.64, 0.4], 300_000, 103).unwrap();
    let mono_ok = r_b < r_a && r_d < r_c;

    // E8 beats the scalar cell at an equal (mixed) composition.
    let comp = [0.55, 0.3];
    let s_rate = goodness_probe(&scalar, &comp, 400_000, 104).unwrap();
    let e8_rate = goodness_probe(&Lattice::e8(), &comp, 400_000, 104).unwrap();
    let e8_ok = e8_rate < s_rate;

    let pass = tail_ok && mono_ok && e8_ok;
    assert!(verdict(
        "10 (lattice goodness probe)",
        pass,
        &format!(
            "scalar Gaussian rate {rate:.5} vs 2Q(sqrt3) {tail:.5}; monotone {mono_ok}; \
             E8 {e8_rate:.2e} < scalar {s_rate:.2e} at composition {comp:?}"
        )
    ));
}
