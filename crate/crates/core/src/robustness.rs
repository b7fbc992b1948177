//! Unknown-SNR analysis: mismatched Wiener decoders, distortion spectra
//! under noise mismatch, closed-form comparison curves for white
//! bandwidth-mismatch systems, and distortion-slope estimation.
//!
//! The encoder is always the one designed for the worst-case noise
//! spectrum; only the receive filters adapt. Decoding stays correct as
//! long as the actual equivalent noise is no more powerful than the design
//! one, which holds in particular for spectrally degraded noise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{zero_phase_fir, FirFilter, MatchingFilterSet};
use crate::spectra::{Spectrum, SystemSpec};

/// Frequency masks of the water-filling passbands.
#[derive(Debug, Clone)]
pub struct PassbandSet {
    /// Source bins above the distortion water level.
    pub f_s: Vec<bool>,
    /// Channel bins below the power water level.
    pub f_c: Vec<bool>,
    /// Intersection: bins that actually carry source through channel.
    pub f_0: Vec<bool>,
}

impl PassbandSet {
    /// Masks from a designed system: `f_s = {S_S >= theta_s}`,
    /// `f_c = {S_Z0 <= theta_c}` (within the channel band), intersected.
    pub fn new(design: &MatchingFilterSet, spec0: &SystemSpec) -> Self {
        let m = spec0.source.grid_len();
        let mut f_s = vec![false; m];
        let mut f_c = vec![false; m];
        let mut f_0 = vec![false; m];
        for i in 0..m {
            f_s[i] = spec0.source.band_weight(i) > 0.0
                && spec0.source.values()[i] >= design.theta_s;
            f_c[i] = spec0.noise.band_weight(i) > 0.0
                && spec0.noise.values()[i] <= design.theta_c;
            f_0[i] = f_s[i] && f_c[i];
        }
        PassbandSet { f_s, f_c, f_0 }
    }
}

/// Equivalent post-prediction noise spectrum when the actual noise is
/// `s_z` but the encoder (and its channel predictor) were designed for
/// `spec0.noise`, with the receive filter replaced by the Wiener filter.
/// Equals the flat design level `(1-alpha) theta_c` when matched.
pub fn equivalent_noise_spectrum(
    design: &MatchingFilterSet,
    spec0: &SystemSpec,
    s_z: &Spectrum,
) -> Result<Spectrum> {
    let m = spec0.source.grid_len();
    if s_z.grid_len() != m {
        return Err(Error::domain("actual noise grid mismatch"));
    }
    let bands = PassbandSet::new(design, spec0);
    let s0 = design.zeq_var;
    let tc = design.theta_c;
    let values: Vec<f64> = (0..m)
        .map(|i| {
            if bands.f_c[i] {
                let z0 = spec0.noise.values()[i];
                let z = s_z.values()[i];
                s0 * (z / z0) * tc / (tc - z0 + z)
            } else {
                s0
            }
        })
        .collect();
    Spectrum::from_values(values, None)
}

/// Distortion spectrum and total distortion achieved by a suitable decoder
/// when the actual noise is `s_z`: `S_S / (1 + Phi)` on the source-channel
/// passband, the matched floor `min(S_S, theta_s)` elsewhere. Evaluated at
/// the nominal zoom `beta0`.
///
/// Refuses when correct decoding is not guaranteed: `s_z` must be degraded
/// with respect to the design noise on the channel passband, or the
/// integral of the equivalent noise spectrum must not exceed the matched
/// one (a heuristic gate for the non-degraded case).
pub fn mismatched_distortion_spectrum(
    design: &MatchingFilterSet,
    spec0: &SystemSpec,
    s_z: &Spectrum,
) -> Result<(Spectrum, f64)> {
    check_decodable(design, spec0, s_z)?;
    let m = spec0.source.grid_len();
    let bands = PassbandSet::new(design, spec0);
    let ts = design.theta_s;
    let tc = design.theta_c;
    let values: Vec<f64> = (0..m)
        .map(|i| {
            let s = spec0.source.values()[i];
            if bands.f_0[i] {
                let z0 = spec0.noise.values()[i];
                let z = s_z.values()[i];
                let phi = (z0 / z) * (1.0 - (z0 - z) / tc) * (s - ts) / ts;
                s / (1.0 + phi)
            } else {
                s.min(ts)
            }
        })
        .collect();
    let d_spec = Spectrum::from_values(values, spec0.source.band_limit())?;
    let d = d_spec.integral();
    Ok((d_spec, d))
}

/// Distortion of the Wiener-adapted decoder at an arbitrary operating zoom
/// (`beta = design.beta0` reduces to [`mismatched_distortion_spectrum`]):
/// `D(f) = S_S N / (|F1|^2 S_S + N)` with `N = S_eq / beta^2`.
pub fn mismatched_distortion_with_zoom(
    design: &MatchingFilterSet,
    spec0: &SystemSpec,
    s_z: &Spectrum,
    beta: f64,
) -> Result<(Spectrum, f64)> {
    check_decodable(design, spec0, s_z)?;
    let m = spec0.source.grid_len();
    let s_eq = equivalent_noise_spectrum(design, spec0, s_z)?;
    let values: Vec<f64> = (0..m)
        .map(|i| {
            let s = spec0.source.values()[i];
            let f2 = design.f1_amp[i] * design.f1_amp[i];
            if s == 0.0 {
                return 0.0;
            }
            if f2 == 0.0 {
                return s.min(design.theta_s);
            }
            let n_eq = s_eq.values()[i] / (beta * beta);
            s * n_eq / (f2 * s + n_eq)
        })
        .collect();
    let d_spec = Spectrum::from_values(values, spec0.source.band_limit())?;
    let d = d_spec.integral();
    Ok((d_spec, d))
}

fn check_decodable(
    design: &MatchingFilterSet,
    spec0: &SystemSpec,
    s_z: &Spectrum,
) -> Result<()> {
    let bands = PassbandSet::new(design, spec0);
    let m = spec0.source.grid_len();
    let degraded = (0..m).all(|i| {
        !bands.f_c[i] || s_z.values()[i] <= spec0.noise.values()[i] * (1.0 + 1e-9)
    });
    if degraded {
        return Ok(());
    }
    let s_eq = equivalent_noise_spectrum(design, spec0, s_z)?;
    let total = s_eq.integral();
    if total <= design.zeq_var * (1.0 + 1e-9) {
        return Ok(());
    }
    Err(Error::domain(format!(
        "correct decoding not guaranteed: equivalent noise power {total} exceeds design {}",
        design.zeq_var
    )))
}

/// Receive-side filter replacements adapting a fixed encoder to the actual
/// noise spectrum: Wiener channel post filter, the design whitening path,
/// and a Wiener source post filter (built at the operating zoom).
#[derive(Debug, Clone)]
pub struct MismatchedDecoder {
    pub g2: FirFilter,
    pub f2: FirFilter,
    /// Equivalent post-prediction noise spectrum under the replacement.
    pub s_eq: Spectrum,
    /// Whether the plain degradedness condition held (vs the integral gate).
    pub degraded: bool,
}

/// Design the SNR-adapted decoder for a fixed encoder.
pub fn mismatched_decoder(
    design: &MatchingFilterSet,
    spec0: &SystemSpec,
    s_z: &Spectrum,
    prefilter_len: usize,
) -> Result<MismatchedDecoder> {
    check_decodable(design, spec0, s_z)?;
    let m = spec0.source.grid_len();
    let bands = PassbandSet::new(design, spec0);
    let tc = design.theta_c;

    // Wiener estimator of the folded signal from the received row.
    let g2_amp: Vec<f64> = (0..m)
        .map(|i| {
            let g1 = design.g1_amp[i];
            if g1 == 0.0 {
                0.0
            } else {
                tc * g1 / (g1 * g1 * tc + s_z.values()[i])
            }
        })
        .collect();
    let s_eq = equivalent_noise_spectrum(design, spec0, s_z)?;

    // Wiener source estimator from the unfolded observation V = U + Z_eq/beta.
    let beta2 = design.beta * design.beta;
    let f2_amp: Vec<f64> = (0..m)
        .map(|i| {
            let f1 = design.f1_amp[i];
            let s = spec0.source.values()[i];
            let n_eq = s_eq.values()[i] / beta2;
            if f1 == 0.0 || s == 0.0 {
                0.0
            } else {
                f1 * s / (f1 * f1 * s + n_eq)
            }
        })
        .collect();

    let degraded = (0..m).all(|i| {
        !bands.f_c[i] || s_z.values()[i] <= spec0.noise.values()[i] * (1.0 + 1e-9)
    });

    Ok(MismatchedDecoder {
        g2: zero_phase_fir(&g2_amp, prefilter_len),
        f2: zero_phase_fir(&f2_amp, prefilter_len),
        s_eq,
        degraded,
    })
}

/// Fixed-encoder SDR for white spectra with bandwidth ratio `rho`, encoder
/// designed at `snr0`, decoder adapted to `snr >= snr0`.
pub fn cor1_curve(rho: f64, snr0: f64, snr: f64) -> Result<f64> {
    if !(snr0 > 0.0) || !(rho > 0.0) {
        return Err(Error::domain("need snr0 > 0 and rho > 0"));
    }
    if snr < snr0 {
        return Err(Error::domain(format!(
            "snr {snr} below the design point {snr0}: encoder assumes the worst case"
        )));
    }
    let phi = (1.0 + snr) / (1.0 + snr0) * ((1.0 + snr0).powf(rho) - 1.0);
    Ok(sdr_from_phi(rho, snr0, phi))
}

fn sdr_from_phi(rho: f64, snr0: f64, phi: f64) -> f64 {
    let frac = rho.min(1.0);
    let inv = (1.0 - frac) / (1.0 + snr0).powf(rho) + frac / (1.0 + phi);
    1.0 / inv
}

/// Closed-form comparison points at one `(rho, snr0, snr)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ComparisonPoint {
    /// This scheme's fixed-encoder curve.
    pub am: f64,
    /// Best previously reported hybrid curves (same functional family).
    pub reported: f64,
    /// Outer bound on any scheme optimal at `snr0` (bandwidth expansion
    /// only).
    pub outer: Option<f64>,
    /// Common high-SNR limit of all of the above.
    pub high_snr: f64,
}

/// Evaluate the comparison family. The outer bound exists only for
/// bandwidth expansion; requesting it at `rho <= 1` yields an error from
/// [`outer_bound_sdr`], while this function simply omits it.
pub fn comparison_curves(rho: f64, snr0: f64, snr: f64) -> Result<ComparisonPoint> {
    let am = cor1_curve(rho, snr0, snr)?;
    let phi_rep = (1.0 + snr) * (1.0 + snr0).powf(rho - 1.0) - 1.0;
    let reported = sdr_from_phi(rho, snr0, phi_rep);
    let outer = if rho > 1.0 {
        Some(outer_bound_sdr(rho, snr0, snr)?)
    } else {
        None
    };
    let frac = rho.min(1.0);
    let inv_high =
        (1.0 - frac) / snr0.powf(rho) + frac / (snr * snr0.powf(rho - 1.0));
    Ok(ComparisonPoint {
        am,
        reported,
        outer,
        high_snr: 1.0 / inv_high,
    })
}

/// Outer bound for bandwidth expansion on any scheme optimal at `snr0`.
pub fn outer_bound_sdr(rho: f64, snr0: f64, snr: f64) -> Result<f64> {
    if rho <= 1.0 {
        return Err(Error::domain(format!(
            "outer bound only proven for bandwidth expansion (rho > 1), got {rho}"
        )));
    }
    if snr < snr0 || !(snr0 > 0.0) {
        return Err(Error::domain("need snr >= snr0 > 0"));
    }
    let phi = snr / snr0 * ((1.0 + snr0).powf(rho) - 1.0);
    Ok(sdr_from_phi(rho, snr0, phi))
}

/// High-SNR limit rescaled by the spectral prediction gains.
pub fn high_snr_sdr_with_gains(
    rho: f64,
    snr0: f64,
    snr: f64,
    gamma_s: f64,
    gamma_c: f64,
) -> Result<f64> {
    let p = comparison_curves(rho, snr0, snr)?;
    Ok(gamma_s * gamma_c * p.high_snr)
}

/// Which family a robustness curve belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveScheme {
    Am,
    ReportedHda,
    OuterBound,
    HighSnrLimit,
    Opta,
}

/// SDR-vs-SNR samples of one scheme.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustnessCurve {
    pub rho: f64,
    pub snr0: f64,
    pub snr_points: Vec<f64>,
    pub sdr_points: Vec<f64>,
    pub scheme: CurveScheme,
}

/// Log-spaced SNR grid, `points_per_decade` samples per decade.
pub fn log_snr_grid(snr_lo: f64, snr_hi: f64, points_per_decade: usize) -> Vec<f64> {
    let lo = snr_lo.log10();
    let hi = snr_hi.log10();
    let n = ((hi - lo) * points_per_decade as f64).ceil() as usize + 1;
    (0..n)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64))
        .collect()
}

/// Build a closed-form curve of the requested scheme over an SNR grid.
pub fn build_curve(
    scheme: CurveScheme,
    rho: f64,
    snr0: f64,
    snrs: &[f64],
) -> Result<RobustnessCurve> {
    let mut sdr_points = Vec::with_capacity(snrs.len());
    for &snr in snrs {
        let v = match scheme {
            CurveScheme::Am => cor1_curve(rho, snr0, snr)?,
            CurveScheme::ReportedHda => comparison_curves(rho, snr0, snr)?.reported,
            CurveScheme::OuterBound => outer_bound_sdr(rho, snr0, snr)?,
            CurveScheme::HighSnrLimit => comparison_curves(rho, snr0, snr)?.high_snr,
            CurveScheme::Opta => (1.0 + snr).powf(rho),
        };
        sdr_points.push(v);
    }
    Ok(RobustnessCurve {
        rho,
        snr0,
        snr_points: snrs.to_vec(),
        sdr_points,
        scheme,
    })
}

/// High-SNR distortion slope: least-squares slope of `log SDR` against
/// `log SNR` over the curve's top decade. Requires at least three points
/// there and at least two decades of total span.
pub fn distortion_slope(curve: &RobustnessCurve) -> Result<f64> {
    let n = curve.snr_points.len();
    if n < 3 {
        return Err(Error::domain("need at least three curve points"));
    }
    let max = curve.snr_points.iter().cloned().fold(f64::MIN, f64::max);
    let min = curve.snr_points.iter().cloned().fold(f64::MAX, f64::min);
    if max / min < 100.0 * (1.0 - 1e-9) {
        return Err(Error::domain(format!(
            "curve spans {:.2} decades; need at least 2",
            (max / min).log10()
        )));
    }
    let top: Vec<(f64, f64)> = curve
        .snr_points
        .iter()
        .zip(&curve.sdr_points)
        .filter(|(s, _)| **s >= max / 10.0 * (1.0 - 1e-9))
        .map(|(s, d)| (s.ln(), d.ln()))
        .collect();
    if top.len() < 3 {
        return Err(Error::domain("need at least three points in the top decade"));
    }
    let nn = top.len() as f64;
    let mx = top.iter().map(|p| p.0).sum::<f64>() / nn;
    let my = top.iter().map(|p| p.1).sum::<f64>() / nn;
    let sxy: f64 = top.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = top.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{design_matching, DesignParams};
    use crate::spectra::{opta, DEFAULT_GRID};

    const M: usize = DEFAULT_GRID;

    #[test]
    fn cor1_matched_points_recover_opta() {
        for (rho, snr0) in [(1.0, 10.0), (2.0, 10.0), (0.5, 10.0), (2.0, 100.0)] {
            let sdr = cor1_curve(rho, snr0, snr0).unwrap();
            let opta_w = (1.0 + snr0).powf(rho);
            assert!(
                (sdr / opta_w - 1.0).abs() < 1e-12,
                "rho {rho} snr0 {snr0}: {sdr} vs {opta_w}"
            );
        }
    }

    #[test]
    fn cor1_expansion_example() {
        let sdr = cor1_curve(2.0, 10.0, 100.0).unwrap();
        let phi = 101.0 / 11.0 * 120.0;
        assert!((sdr - (1.0 + phi)).abs() < 1e-9);
        assert!((sdr - 1102.8181818181818).abs() < 1e-9);
    }

    #[test]
    fn cor1_rejects_below_design_point() {
        assert!(cor1_curve(2.0, 10.0, 5.0).is_err());
        assert!(cor1_curve(2.0, 0.0, 5.0).is_err());
    }

    #[test]
    fn cor1_compression_high_snr_saturates() {
        // rho < 1: as snr grows the out-of-band term dominates and SDR
        // saturates at (1+snr0)^rho / (1 - rho) asymptote scale.
        let hi = cor1_curve(0.5, 10.0, 1e9).unwrap();
        let lim = (1.0 + 10.0_f64).powf(0.5) / 0.5;
        assert!((hi / lim - 1.0).abs() < 1e-3, "{hi} vs {lim}");
    }

    #[test]
    fn comparison_ordering_at_finite_snr() {
        let p = comparison_curves(2.0, 10.0, 100.0).unwrap();
        let outer = p.outer.unwrap();
        assert!(outer >= p.reported && p.reported >= p.am, "{p:?}");
        assert!((outer - 1201.0).abs() < 1e-9);
        assert!((p.reported - 1111.0).abs() < 1e-9);
    }

    #[test]
    fn comparison_pairwise_convergence_high_snr() {
        let p = comparison_curves(2.0, 100.0, 1e6).unwrap();
        let vals = [p.am, p.reported, p.outer.unwrap()];
        let max = vals.iter().cloned().fold(f64::MIN, f64::max);
        let min = vals.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min - 1.0 < 0.01, "spread {}", max / min - 1.0);
    }

    #[test]
    fn outer_bound_only_for_expansion() {
        assert!(outer_bound_sdr(1.0, 10.0, 100.0).is_err());
        assert!(outer_bound_sdr(0.5, 10.0, 100.0).is_err());
        assert!(comparison_curves(0.5, 10.0, 100.0).unwrap().outer.is_none());
    }

    #[test]
    fn gains_scale_high_snr_limit() {
        let base = comparison_curves(1.0, 10.0, 1e4).unwrap().high_snr;
        let with = high_snr_sdr_with_gains(1.0, 10.0, 1e4, 5.26, 1.25).unwrap();
        assert!((with / (base * 5.26 * 1.25) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn slope_of_opta_is_rho() {
        for rho in [0.5, 1.0, 2.0] {
            let snrs = log_snr_grid(1e2, 1e6, 10);
            let curve = build_curve(CurveScheme::Opta, rho, 1e2, &snrs).unwrap();
            let lam = distortion_slope(&curve).unwrap();
            assert!((lam - rho).abs() < 0.05, "rho {rho}: slope {lam}");
        }
    }

    #[test]
    fn slope_of_fixed_encoder() {
        let snrs = log_snr_grid(1e2, 1e6, 10);
        let c2 = build_curve(CurveScheme::Am, 2.0, 1e2, &snrs).unwrap();
        let lam2 = distortion_slope(&c2).unwrap();
        assert!((lam2 - 1.0).abs() < 0.05, "rho 2 slope {lam2}");
        let c_half = build_curve(CurveScheme::Am, 0.5, 1e2, &snrs).unwrap();
        let lam_h = distortion_slope(&c_half).unwrap();
        assert!(lam_h.abs() < 0.05, "rho 1/2 slope {lam_h}");
        let c1 = build_curve(CurveScheme::Am, 1.0, 1e2, &snrs).unwrap();
        let lam1 = distortion_slope(&c1).unwrap();
        assert!((lam1 - 1.0).abs() < 0.05, "rho 1 slope {lam1}");
    }

    #[test]
    fn curves_monotone_in_snr() {
        let snrs = log_snr_grid(1e1, 1e6, 10);
        for scheme in [CurveScheme::Am, CurveScheme::OuterBound, CurveScheme::Opta] {
            let c = build_curve(scheme, 2.0, 1e1, &snrs).unwrap();
            for w in c.sdr_points.windows(2) {
                assert!(w[1] >= w[0], "{scheme:?} not nondecreasing");
            }
        }
    }

    #[test]
    fn slope_rejects_thin_curves() {
        let snrs = log_snr_grid(1e2, 1e3, 10);
        let c = build_curve(CurveScheme::Opta, 1.0, 1e2, &snrs).unwrap();
        assert!(distortion_slope(&c).is_err());
        let c2 = RobustnessCurve {
            rho: 1.0,
            snr0: 1.0,
            snr_points: vec![1.0, 10.0],
            sdr_points: vec![2.0, 11.0],
            scheme: CurveScheme::Opta,
        };
        assert!(distortion_slope(&c2).is_err());
    }

    fn white_design(snr0: f64) -> (SystemSpec, MatchingFilterSet) {
        let spec = SystemSpec::new(Spectrum::flat(1.0, M), Spectrum::flat(1.0, M), snr0).unwrap();
        let fs = design_matching(&spec, &DesignParams::default()).unwrap();
        (spec, fs)
    }

    #[test]
    fn matched_distortion_recovers_water_level() {
        let (spec, fs) = white_design(10.0);
        let (d_spec, d) = mismatched_distortion_spectrum(&fs, &spec, &spec.noise).unwrap();
        for (i, v) in d_spec.values().iter().enumerate() {
            let _ = i;
            assert!((v - fs.theta_s).abs() < 1e-9);
        }
        let o = opta(&spec).unwrap();
        assert!((d / o.distortion - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mismatched_white_closed_form() {
        let (spec, fs) = white_design(10.0);
        let s_z = Spectrum::flat(0.1, M);
        let (_, d) = mismatched_distortion_spectrum(&fs, &spec, &s_z).unwrap();
        // Phi = 10 * snr0 * (P + 0.1 N)/(P + N) with snr0 = 10, P = 10, N = 1.
        let phi = 10.0 * 10.0 * (10.0 + 0.1) / 11.0;
        let expect = 1.0 / (1.0 + phi);
        assert!((d / expect - 1.0).abs() < 1e-9, "{d} vs {expect}");
    }

    #[test]
    fn mismatched_outside_passband_is_floor() {
        // Band-limited channel: out-of-band distortion stays min(S_S, theta_s)
        // no matter how clean the actual noise is.
        let spec = SystemSpec::new(
            Spectrum::flat(1.0, M),
            Spectrum::flat_band(0.2, 0.5, M).unwrap(),
            1.0,
        )
        .unwrap();
        let fs = design_matching(&spec, &DesignParams::default()).unwrap();
        let cleaner = Spectrum::flat_band(0.02, 0.5, M).unwrap();
        let (d_spec, _) = mismatched_distortion_spectrum(&fs, &spec, &cleaner).unwrap();
        for i in 0..M {
            if spec.noise.band_weight(i) == 0.0 {
                assert!((d_spec.values()[i] - fs.theta_s.min(1.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn distortion_decreases_with_cleaner_noise_inside_passband() {
        let (spec, fs) = white_design(10.0);
        let mut last = f64::INFINITY;
        for scale in [1.0, 0.5, 0.2, 0.1, 0.02] {
            let s_z = Spectrum::flat(scale, M);
            let (_, d) = mismatched_distortion_spectrum(&fs, &spec, &s_z).unwrap();
            assert!(d < last + 1e-15);
            last = d;
        }
        // And the improvement is at most linear: SDR slope <= 1 in SNR.
        let (_, d1) = mismatched_distortion_spectrum(&fs, &spec, &Spectrum::flat(0.1, M)).unwrap();
        let (_, d2) =
            mismatched_distortion_spectrum(&fs, &spec, &Spectrum::flat(0.01, M)).unwrap();
        let sdr_ratio = d1 / d2;
        assert!(sdr_ratio <= 10.0 + 1e-9, "super-linear gain {sdr_ratio}");
    }

    #[test]
    fn band_swap_changes_mismatched_but_not_matched() {
        let noise0 = Spectrum::flat(1.0, M);
        let actual = Spectrum::two_level(0.02, 0.4, M);
        let mk = |src: Spectrum| -> (f64, f64) {
            let spec = SystemSpec::new(src, noise0.clone(), 10.0).unwrap();
            let fs = design_matching(&spec, &DesignParams::default()).unwrap();
            let (_, dm) = mismatched_distortion_spectrum(&fs, &spec, &spec.noise).unwrap();
            let (_, du) = mismatched_distortion_spectrum(&fs, &spec, &actual).unwrap();
            (dm, du)
        };
        let (m1, u1) = mk(Spectrum::two_level(4.0, 1.0, M));
        let (m2, u2) = mk(Spectrum::two_level(1.0, 4.0, M));
        assert!((m1 / m2 - 1.0).abs() < 1e-9, "matched D must be symmetric");
        assert!(
            (u1 / u2 - 1.0).abs() > 1e-3,
            "band swap should change mismatched D: {u1} vs {u2}"
        );
    }

    #[test]
    fn refuses_noisier_channels() {
        let (spec, fs) = white_design(10.0);
        let worse = Spectrum::flat(2.0, M);
        assert!(mismatched_distortion_spectrum(&fs, &spec, &worse).is_err());
        assert!(mismatched_decoder(&fs, &spec, &worse, 257).is_err());
    }

    #[test]
    fn mismatched_decoder_matched_fixed_point() {
        let (spec, fs) = white_design(10.0);
        let md = mismatched_decoder(&fs, &spec, &spec.noise, 257).unwrap();
        assert!(md.degraded);
        // Scalar filters equal the design post filters.
        assert_eq!(md.g2.taps.len(), 1);
        assert!((md.g2.taps[0] - fs.g2.taps[0]).abs() < 1e-9);
        assert_eq!(md.f2.taps.len(), 1);
        // At beta (not beta0) the Wiener source filter differs from the
        // design by the margin-induced noise inflation only.
        let alpha = fs.alpha;
        let n_eq = fs.zeq_var / (fs.beta * fs.beta);
        let expect = alpha.sqrt() * 1.0 / (alpha * 1.0 + n_eq);
        assert!((md.f2.taps[0] - expect).abs() < 1e-9);
        // Equivalent noise is the flat design level.
        for v in md.s_eq.values() {
            assert!((v - fs.zeq_var).abs() < 1e-9);
        }
    }

    #[test]
    fn mismatched_decoder_clean_limit() {
        let (spec, fs) = white_design(10.0);
        let tiny = Spectrum::flat(1e-9, M);
        let md = mismatched_decoder(&fs, &spec, &tiny, 257).unwrap();
        // Equivalent noise collapses inside the passband.
        for v in md.s_eq.values() {
            assert!(*v < fs.zeq_var * 1e-6);
        }
    }

    #[test]
    fn fixed_encoder_stays_within_ten_percent_of_opta_for_rho_one() {
        // delta = 0.1 is achieved at a finite design point: snr0 = 10 gives
        // SDR >= (1 - delta) SDR_opt for every snr >= snr0.
        let snr0 = 10.0;
        for &snr in &log_snr_grid(snr0, 1e8, 5) {
            let fixed = cor1_curve(1.0, snr0, snr).unwrap();
            let optimum = 1.0 + snr;
            assert!(
                fixed >= 0.9 * optimum,
                "snr {snr}: fixed {fixed} < 0.9 * {optimum}"
            );
        }
    }
}
