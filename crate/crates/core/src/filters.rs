//! Spectral factorization, optimal FIR predictors, pre/post filter design,
//! and assembly of the complete filter set for a source/channel system.
//!
//! All design happens on the spectrum grid. Pre/post filters are zero-phase
//! (symmetric FIR, delay compensated downstream), so a post filter is the
//! conjugate of its pre filter exactly. Predictors are strictly causal
//! (`delay = 1`) and come from the cepstral minimum-phase factor of the
//! spectrum they whiten.

use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::spectra::{opta, reverse_waterfill, waterfill, Spectrum, SystemSpec, LOG_FLOOR_REL};

/// Finite impulse response with an integer input lag offset: output
/// `y[n] = sum_k taps[k] * x[n - delay - k]`, so `taps[0]` acts at lag
/// `delay`. Strictly causal predictors use `delay = 1`; zero-phase filters
/// use `delay = 0` with symmetric taps and compensate their group delay at
/// the block level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirFilter {
    pub taps: Vec<f64>,
    pub delay: usize,
}

impl FirFilter {
    pub fn identity() -> Self {
        FirFilter {
            taps: vec![1.0],
            delay: 0,
        }
    }

    pub fn scalar(gain: f64) -> Self {
        FirFilter {
            taps: vec![gain],
            delay: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Center index of a symmetric (zero-phase) filter; its group delay.
    pub fn symmetric_center(&self) -> usize {
        (self.taps.len().saturating_sub(1)) / 2
    }

    /// Filter a row with zero padding before the first sample.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for (n, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, t) in self.taps.iter().enumerate() {
                let lag = self.delay + k;
                if lag <= n {
                    acc += t * x[n - lag];
                }
            }
            *out = acc;
        }
        y
    }

    /// Dot product of the taps against history ending at `x[upto - 1]`:
    /// the filter output at index `upto - 1 + delay`. Used by predictors
    /// (`delay = 1`: prediction for index `upto`).
    pub fn predict_next(&self, x: &[f64], upto: usize) -> f64 {
        debug_assert_eq!(self.delay, 1);
        let mut acc = 0.0;
        for (k, t) in self.taps.iter().enumerate() {
            if k < upto {
                acc += t * x[upto - 1 - k];
            }
        }
        acc
    }

    /// Squared magnitude response at grid frequency `m/grid`.
    pub fn response_power(&self, m: usize, grid: usize) -> f64 {
        let w = -2.0 * std::f64::consts::PI * m as f64 / grid as f64;
        let mut acc = Complex::new(0.0, 0.0);
        for (k, t) in self.taps.iter().enumerate() {
            let ph = w * (self.delay + k) as f64;
            acc += Complex::new(t * ph.cos(), t * ph.sin());
        }
        acc.norm_sqr()
    }
}

/// Zero-phase FIR whose frequency response approximates the given real,
/// even-symmetric amplitude grid. The result has odd length `<= max_len`
/// (negligible symmetric tap pairs are trimmed) and `delay = 0`; its group
/// delay equals [`FirFilter::symmetric_center`].
pub fn zero_phase_fir(amplitude: &[f64], max_len: usize) -> FirFilter {
    let m = amplitude.len();
    let c = fft::idft_real_even(amplitude);
    let half = (max_len.max(1) - 1) / 2;
    let half = half.min(m / 2 - 1);
    let mut taps = Vec::with_capacity(2 * half + 1);
    for j in 0..(2 * half + 1) {
        let lag = j as isize - half as isize;
        let idx = lag.rem_euclid(m as isize) as usize;
        taps.push(c[idx]);
    }
    // Trim symmetric pairs of numerically-zero outer taps.
    let maxabs = taps.iter().fold(0.0_f64, |a, t| a.max(t.abs()));
    let tol = 1e-12 * maxabs;
    let mut h = half;
    while h > 0 && taps[half - h].abs() <= tol && taps[half + h].abs() <= tol {
        h -= 1;
    }
    let taps = taps[(half - h)..=(half + h)].to_vec();
    FirFilter { taps, delay: 0 }
}

/// Cepstral spectral factorization: `S(f) ~ |Q(f)|^2 * pe` with `Q` monic,
/// causal, minimum-phase, truncated to `max_len` taps; `pe` is the entropy
/// power of the spectrum.
pub fn spectral_factorize(s: &Spectrum, max_len: usize) -> Result<(FirFilter, f64)> {
    let m = s.grid_len();
    if s.band_limit().is_some() {
        return Err(Error::domain(
            "spectral factorization needs a full-band spectrum; fill the stopband first",
        ));
    }
    if max_len == 0 || max_len > m / 4 {
        return Err(Error::domain(format!(
            "factor length {max_len} outside 1..={}",
            m / 4
        )));
    }
    let maxv = s.values().iter().cloned().fold(0.0_f64, f64::max);
    if !(maxv > 0.0) {
        return Err(Error::domain("cannot factorize an all-zero spectrum"));
    }
    let floor = LOG_FLOOR_REL * maxv;
    let logs: Vec<f64> = s.values().iter().map(|&v| v.max(floor).ln()).collect();

    // Real cepstrum of the log-spectrum.
    let ceps = fft::idft_real_even(&logs);
    let pe = ceps[0].exp();

    // Causal fold: keep positive-time quefrencies, half weight at Nyquist.
    let mut h = vec![Complex::new(0.0, 0.0); m];
    for k in 1..m / 2 {
        h[k] = Complex::new(ceps[k], 0.0);
    }
    h[m / 2] = Complex::new(0.5 * ceps[m / 2], 0.0);

    let log_q = fft::dft(&h);
    let q_grid: Vec<Complex<f64>> = log_q.iter().map(|c| c.exp()).collect();
    let q_time = fft::idft(&q_grid);

    let mut taps: Vec<f64> = q_time.iter().take(max_len).map(|c| c.re).collect();
    let lead = taps[0];
    if !(lead.is_finite()) || lead.abs() < 1e-6 {
        return Err(Error::solver(format!(
            "factorization produced non-monic leading tap {lead}"
        )));
    }
    for t in &mut taps {
        *t /= lead;
    }
    // Drop a numerically-zero tail.
    let tol = 1e-14;
    while taps.len() > 1 && taps.last().unwrap().abs() < tol {
        taps.pop();
    }
    Ok((FirFilter { taps, delay: 0 }, pe))
}

/// Strictly-causal optimal one-step predictor of a process with spectrum
/// `s`: the expansion of `1 - 1/Q(z)` truncated to `max_len` taps at
/// `delay = 1`. Whitening a realization with `1 - P` leaves residual
/// variance approaching the entropy power as the length grows.
pub fn optimal_predictor(s: &Spectrum, max_len: usize) -> Result<FirFilter> {
    let m = s.grid_len();
    if s.band_limit().is_some() {
        return Err(Error::domain(
            "predictor design needs a full-band spectrum; fill the stopband first",
        ));
    }
    if max_len == 0 || max_len > m / 4 {
        return Err(Error::domain(format!(
            "predictor length {max_len} outside 1..={}",
            m / 4
        )));
    }
    let maxv = s.values().iter().cloned().fold(0.0_f64, f64::max);
    if !(maxv > 0.0) {
        return Err(Error::domain("cannot design a predictor for a zero spectrum"));
    }
    let floor = LOG_FLOOR_REL * maxv;
    let logs: Vec<f64> = s.values().iter().map(|&v| v.max(floor).ln()).collect();
    let ceps = fft::idft_real_even(&logs);
    let mut h = vec![Complex::new(0.0, 0.0); m];
    for k in 1..m / 2 {
        h[k] = Complex::new(ceps[k], 0.0);
    }
    h[m / 2] = Complex::new(0.5 * ceps[m / 2], 0.0);
    let log_q = fft::dft(&h);
    let p_grid: Vec<Complex<f64>> = log_q
        .iter()
        .map(|lq| Complex::new(1.0, 0.0) - (-lq).exp())
        .collect();
    let p_time = fft::idft(&p_grid);
    let taps: Vec<f64> = p_time.iter().skip(1).take(max_len).map(|c| c.re).collect();
    Ok(FirFilter { taps, delay: 1 })
}

/// Tunable lengths and the zoom margin for filter-set design.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DesignParams {
    /// Predictor length (strictly causal taps).
    pub predictor_len: usize,
    /// Pre/post filter length bound (odd, zero-phase).
    pub prefilter_len: usize,
    /// Zoom shrink margin: `beta = beta0 / (1 + beta_margin)`. Positive
    /// margins keep the decoder modulo input strictly inside the cell
    /// variance budget.
    pub beta_margin: f64,
}

impl Default for DesignParams {
    fn default() -> Self {
        DesignParams {
            predictor_len: 128,
            prefilter_len: 257,
            beta_margin: 0.05,
        }
    }
}

/// Complete designed filter set plus the scalars tying it to the system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchingFilterSet {
    pub f1: FirFilter,
    pub f2: FirFilter,
    pub g1: FirFilter,
    pub g2: FirFilter,
    pub p_s: FirFilter,
    pub p_c: FirFilter,
    /// Wiener coefficient `1 - e^{-2C}` shared by source and channel sides.
    pub alpha: f64,
    /// Zoom that makes the equivalent end-to-end noise hit the distortion
    /// water level exactly.
    pub beta0: f64,
    /// Operating zoom (`beta0` shrunk by the design margin).
    pub beta: f64,
    pub theta_s: f64,
    pub theta_c: f64,
    /// Distortion at the system optimum.
    pub d_opt: f64,
    /// Variance of the pre-filtered source.
    pub u_var: f64,
    /// Predicted variance of the equivalent additive noise after channel
    /// prediction.
    pub zeq_var: f64,
    /// Spectrum seen by the source predictor (pre-filtered source plus
    /// equivalent noise).
    pub s_v: Spectrum,
    /// Spectrum seen by the channel predictor (post-filtered channel error).
    pub s_tilde_z: Spectrum,
    /// Designed amplitude of the source pre-filter on the grid.
    pub f1_amp: Vec<f64>,
    /// Designed amplitude of the channel pre-filter on the grid.
    pub g1_amp: Vec<f64>,
}

/// Design the full filter set for a system: water-filling both sides,
/// amplitude pre/post filters, zoom scalars, and the two predictors.
pub fn design_matching(spec: &SystemSpec, params: &DesignParams) -> Result<MatchingFilterSet> {
    let m = spec.source.grid_len();
    let wf = waterfill(&spec.noise, spec.power)?;
    let capacity = wf.rate;
    let theta_c = wf.water_level;
    let alpha = 1.0 - (-2.0 * capacity).exp();
    if !(alpha > 0.0) {
        return Err(Error::domain("zero-capacity channel: nothing to design"));
    }

    let o = opta(spec)?;
    let rw = reverse_waterfill(&spec.source, o.distortion)?;
    let theta_s = rw.water_level;

    let f1_amp: Vec<f64> = (0..m)
        .map(|i| {
            let s = spec.source.values()[i];
            if s > 0.0 && spec.source.band_weight(i) > 0.0 {
                (1.0 - rw.allocation[i] / s).max(0.0).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let g1_amp: Vec<f64> = (0..m).map(|i| (wf.allocation[i] / theta_c).sqrt()).collect();

    let f1 = zero_phase_fir(&f1_amp, params.prefilter_len);
    let g1 = zero_phase_fir(&g1_amp, params.prefilter_len);

    let beta0 = ((1.0 - alpha) * theta_c / theta_s).sqrt();
    let beta = beta0 / (1.0 + params.beta_margin);
    let zeq_var = (1.0 - alpha) * theta_c;

    let s_v = Spectrum::from_values(
        (0..m)
            .map(|i| f1_amp[i] * f1_amp[i] * spec.source.values()[i] + zeq_var / (beta * beta))
            .collect(),
        None,
    )?;
    let s_tilde_z = Spectrum::from_values(
        (0..m)
            .map(|i| {
                let g2v = g1_amp[i] * g1_amp[i];
                if g2v == 0.0 {
                    // Nothing is transmitted here; the channel error is pure
                    // self-interference at the water level, regardless of how
                    // large the physical noise is.
                    theta_c
                } else {
                    let interior =
                        (1.0 - g2v) * (1.0 - g2v) * theta_c + g2v * spec.noise.values()[i];
                    let w = spec.noise.band_weight(i);
                    if w >= 1.0 {
                        interior
                    } else {
                        // Band-edge bin: half in the passband, half at the
                        // stopband level; split geometrically so log-domain
                        // quantities stay measure-consistent.
                        (w * interior.ln() + (1.0 - w) * theta_c.ln()).exp()
                    }
                }
            })
            .collect(),
        None,
    )?;

    let p_s = optimal_predictor(&s_v, params.predictor_len)?;
    let p_c = optimal_predictor(&s_tilde_z, params.predictor_len)?;

    let u_var = (0..m)
        .map(|i| spec.source.band_weight(i) * f1_amp[i] * f1_amp[i] * spec.source.values()[i])
        .sum::<f64>()
        / m as f64;

    Ok(MatchingFilterSet {
        f2: f1.clone(),
        g2: g1.clone(),
        f1,
        g1,
        p_s,
        p_c,
        alpha,
        beta0,
        beta,
        theta_s,
        theta_c,
        d_opt: o.distortion,
        u_var,
        zeq_var,
        s_v,
        s_tilde_z,
        f1_amp,
        g1_amp,
    })
}

/// High-SNR zero-forcing variant for matched bandwidths: unit pre/post
/// filters, plain predictors of the source and noise spectra, and
/// `beta0^2 = P / P_e(S_S)` with the lattice scaled to the transmit power.
pub fn design_zero_forcing(spec: &SystemSpec, params: &DesignParams) -> Result<MatchingFilterSet> {
    if (spec.rho() - 1.0).abs() > 1e-12 {
        return Err(Error::domain(format!(
            "zero-forcing design requires matched bandwidths, got rho = {}",
            spec.rho()
        )));
    }
    let m = spec.source.grid_len();
    let pe_s = spec.source.entropy_power()?;
    let pe_z = spec.noise.entropy_power()?;
    let capacity = waterfill(&spec.noise, spec.power)?.rate;
    let alpha = 1.0 - (-2.0 * capacity).exp();

    let p_s = optimal_predictor(&spec.source, params.predictor_len)?;
    let p_c = optimal_predictor(&spec.noise, params.predictor_len)?;

    let beta0 = (spec.power / pe_s).sqrt();
    let beta = beta0 / (1.0 + params.beta_margin);
    let d_pred = pe_s * pe_z / spec.power;

    let s_v = Spectrum::from_values(
        (0..m)
            .map(|i| spec.source.values()[i] + pe_z / (beta * beta))
            .collect(),
        None,
    )?;

    Ok(MatchingFilterSet {
        f1: FirFilter::identity(),
        f2: FirFilter::identity(),
        g1: FirFilter::identity(),
        g2: FirFilter::identity(),
        p_s,
        p_c,
        alpha,
        beta0,
        beta,
        theta_s: d_pred,
        theta_c: spec.power,
        d_opt: d_pred,
        u_var: spec.source_variance(),
        zeq_var: pe_z,
        s_v,
        s_tilde_z: spec.noise.clone(),
        f1_amp: vec![1.0; m],
        g1_amp: vec![1.0; m],
    })
}

/// Numeric check of the exact conditional-variance identities implied by a
/// consistent design, plus the zoom boundary condition.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IdentityReport {
    /// Noisy one-step prediction error of the pre-filtered source from the
    /// decoder observation process.
    pub source_lhs: f64,
    /// `alpha/(1-alpha) * theta_s`.
    pub source_rhs: f64,
    pub source_rel_err: f64,
    /// Equivalent-noise conditional variance recovered from the entropy
    /// power of the post-filtered channel error spectrum.
    pub channel_lhs: f64,
    /// `(1-alpha)/alpha * theta_c`.
    pub channel_rhs: f64,
    pub channel_rel_err: f64,
    /// Analytic modulo-input variance at `beta = beta0`.
    pub var_t_at_beta0: f64,
    pub theta_c: f64,
    pub var_t_rel_err: f64,
}

/// Evaluate the design identities on the grid for a designed set.
pub fn verify_exact_identities(fs: &MatchingFilterSet, spec: &SystemSpec) -> Result<IdentityReport> {
    let m = spec.source.grid_len();
    let s_u = Spectrum::from_values(
        (0..m)
            .map(|i| fs.f1_amp[i] * fs.f1_amp[i] * spec.source.values()[i])
            .collect(),
        spec.source.band_limit(),
    )?;
    let theta = fs.zeq_var / (fs.beta0 * fs.beta0); // equals theta_s
    let source_lhs = s_u.noisy_prediction_error(theta)?;
    let a = fs.alpha;
    let source_rhs = a / (1.0 - a) * fs.theta_s;
    let rel = |lhs: f64, rhs: f64| (lhs - rhs).abs() / rhs.abs().max(1e-300);

    let pe_zt = fs.s_tilde_z.entropy_power()?;
    let channel_lhs = (pe_zt - (1.0 - a) * (1.0 - a) * fs.theta_c) / (a * a);
    let channel_rhs = (1.0 - a) / a * fs.theta_c;

    let var_t_at_beta0 = fs.beta0 * fs.beta0 * source_lhs + fs.zeq_var;

    Ok(IdentityReport {
        source_lhs,
        source_rhs,
        source_rel_err: rel(source_lhs, source_rhs),
        channel_lhs,
        channel_rhs,
        channel_rel_err: rel(channel_lhs, channel_rhs),
        var_t_at_beta0,
        theta_c: fs.theta_c,
        var_t_rel_err: rel(var_t_at_beta0, fs.theta_c),
    })
}

/// Analytic modulo-input variance as a function of the operating zoom:
/// `beta^2 * Var{U - J}(beta) + Var{Z_eq}`, using the noisy-prediction
/// closed form for the source term. Equals `theta_c` at `beta = beta0`
/// and increases with `beta`.
pub fn analytic_mod_input_variance(
    fs: &MatchingFilterSet,
    spec: &SystemSpec,
    beta: f64,
) -> Result<f64> {
    let m = spec.source.grid_len();
    let s_u = Spectrum::from_values(
        (0..m)
            .map(|i| fs.f1_amp[i] * fs.f1_amp[i] * spec.source.values()[i])
            .collect(),
        spec.source.band_limit(),
    )?;
    let theta = fs.zeq_var / (beta * beta);
    let var_uj = s_u.noisy_prediction_error(theta)?;
    Ok(beta * beta * var_uj + fs.zeq_var)
}
