//! Colored Gaussian process generation and the ISI front-end conversion.
//!
//! Stationary Gaussian rows are synthesized by driving the minimum-phase
//! spectral factor with white Gaussian innovations of the entropy-power
//! variance; a warm-up prefix is discarded so every returned sample sees a
//! fully populated filter history.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::filters::{spectral_factorize, zero_phase_fir, FirFilter};
use crate::spectra::Spectrum;

/// Warm-up length in units of the factor length.
const WARMUP_FACTOR: usize = 4;

/// Seeded generator of a stationary Gaussian process with a given spectrum.
///
/// Full-band spectra drive the minimum-phase factor with white innovations
/// of the entropy-power variance. Band-limited spectra are synthesized by a
/// windowed zero-phase amplitude filter instead, so the generated process
/// is itself band-limited (stopband leakage well under 1% of the power).
#[derive(Debug, Clone)]
pub struct GaussianProcess {
    factor: FirFilter,
    innovation_std: f64,
    rng: ChaCha12Rng,
    history: Vec<f64>,
}

impl GaussianProcess {
    pub fn new(spectrum: &Spectrum, factor_len: usize, seed: u64) -> Result<Self> {
        let (factor, innovation_std) = if spectrum.band_limit().is_some() {
            (band_limited_shaper(spectrum, factor_len), 1.0)
        } else {
            let (q, pe) = spectral_factorize(spectrum, factor_len)?;
            (q, pe.sqrt())
        };
        let mut gp = GaussianProcess {
            factor,
            innovation_std,
            rng: ChaCha12Rng::seed_from_u64(seed),
            history: Vec::new(),
        };
        gp.warm_up();
        Ok(gp)
    }

    fn warm_up(&mut self) {
        let n = WARMUP_FACTOR * self.factor.len();
        self.history = (0..n)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut self.rng);
                self.innovation_std * g
            })
            .collect();
    }

    /// Generate `n` consecutive samples of the process.
    pub fn generate(&mut self, n: usize) -> Vec<f64> {
        let l = self.factor.len();
        let start = self.history.len();
        self.history.reserve(n);
        for _ in 0..n {
            let g: f64 = StandardNormal.sample(&mut self.rng);
            self.history.push(self.innovation_std * g);
        }
        let mut out = Vec::with_capacity(n);
        for i in start..start + n {
            let mut acc = 0.0;
            for (k, t) in self.factor.taps.iter().enumerate() {
                if k <= i {
                    acc += t * self.history[i - k];
                }
            }
            out.push(acc);
        }
        // Keep only the tail needed for future convolutions.
        if self.history.len() > 8 * l {
            let cut = self.history.len() - 2 * l;
            self.history.drain(..cut);
        }
        out
    }
}

/// Windowed zero-phase shaping filter with amplitude `sqrt(S(f))`; the
/// window tames truncation sidelobes so the stopband stays deep.
fn band_limited_shaper(spectrum: &Spectrum, factor_len: usize) -> FirFilter {
    let amp: Vec<f64> = spectrum.values().iter().map(|v| v.sqrt()).collect();
    let len = (8 * factor_len + 1).max(513).min(spectrum.grid_len() / 2 - 1);
    let mut fir = zero_phase_fir(&amp, len);
    let c = fir.taps.len() / 2;
    for (j, t) in fir.taps.iter_mut().enumerate() {
        let x = (j as f64 - c as f64) / (c as f64 + 1.0);
        *t *= 0.5 * (1.0 + (std::f64::consts::PI * x).cos());
    }
    fir
}

/// One simulated colored-noise channel: `y = x + z` with seeded noise.
#[derive(Debug, Clone)]
pub struct ChannelInstance {
    noise: GaussianProcess,
}

impl ChannelInstance {
    pub fn new(noise_spectrum: &Spectrum, factor_len: usize, seed: u64) -> Result<Self> {
        Ok(ChannelInstance {
            noise: GaussianProcess::new(noise_spectrum, factor_len, seed)?,
        })
    }

    /// Generate `n` noise samples.
    pub fn generate_noise(&mut self, n: usize) -> Vec<f64> {
        self.noise.generate(n)
    }

    /// Add noise to a transmitted row.
    pub fn apply(&mut self, x: &[f64]) -> Vec<f64> {
        let z = self.generate_noise(x.len());
        x.iter().zip(&z).map(|(a, b)| a + b).collect()
    }
}

/// Convert an intersymbol-interference channel (filter `h`, white noise of
/// variance `innovation_var`) into the equivalent additive colored-noise
/// spectrum `innovation_var / |H(f)|^2`, assuming an inverting front end.
///
/// Rejects filters with an (approximate) in-band zero: the front end would
/// not be invertible there.
pub fn isi_to_colored(h: &FirFilter, innovation_var: f64, m: usize) -> Result<Spectrum> {
    if !(innovation_var > 0.0) {
        return Err(Error::domain("innovation variance must be positive"));
    }
    let mut values = Vec::with_capacity(m);
    let mut peak = 0.0_f64;
    let mut powers = Vec::with_capacity(m);
    for i in 0..m {
        let p = h.response_power(i, m);
        peak = peak.max(p);
        powers.push(p);
    }
    if !(peak > 0.0) {
        return Err(Error::domain("ISI filter has zero response"));
    }
    for (i, p) in powers.iter().enumerate() {
        if *p < 1e-10 * peak {
            return Err(Error::domain(format!(
                "ISI filter has an in-band zero near f = {}; front end not invertible",
                i as f64 / m as f64
            )));
        }
        values.push(innovation_var / p);
    }
    Spectrum::from_values(values, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::DEFAULT_GRID;

    const M: usize = DEFAULT_GRID;

    fn sample_var(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
    }

    #[test]
    fn flat_noise_is_white_with_right_variance() {
        let mut ch = ChannelInstance::new(&Spectrum::flat(2.0, M), 64, 7).unwrap();
        let z = ch.generate_noise(200_000);
        let v = sample_var(&z);
        assert!((v / 2.0 - 1.0).abs() < 0.03, "variance {v}");
        // lag-1 correlation ~ 0
        let c1: f64 = z.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (z.len() - 1) as f64;
        assert!((c1 / v).abs() < 0.01);
    }

    #[test]
    fn ar1_noise_matches_autocovariance_oracle() {
        let a = 0.8;
        let s = Spectrum::ar1(a, 1.0, M).unwrap();
        let mut ch = ChannelInstance::new(&s, 128, 11).unwrap();
        let z = ch.generate_noise(400_000);
        let v = sample_var(&z);
        let var_expect = 1.0 / (1.0 - a * a);
        assert!((v / var_expect - 1.0).abs() < 0.03);
        // Autocovariance oracle from the spectrum's inverse transform:
        // r_k = a^k / (1 - a^2) for AR(1).
        for lag in 1..=3usize {
            let c: f64 = z.windows(lag + 1).map(|w| w[0] * w[lag]).sum::<f64>()
                / (z.len() - lag) as f64;
            let expect = a.powi(lag as i32) * var_expect;
            assert!(
                (c / expect - 1.0).abs() < 0.05,
                "lag {lag}: {c} vs {expect}"
            );
        }
    }

    #[test]
    fn band_limited_noise_has_little_outband_power() {
        let s = Spectrum::flat_band(1.0, 0.5, 1024).unwrap();
        let mut ch = ChannelInstance::new(&s, 128, 13).unwrap();
        let z = ch.generate_noise(1 << 18);
        // Bartlett periodogram over 256-point segments.
        let seg = 256;
        let mut psd = vec![0.0; seg];
        let mut count = 0;
        for chunk in z.chunks_exact(seg) {
            let spec = crate::fft::dft_real(chunk);
            for (i, c) in spec.iter().enumerate() {
                psd[i] += c.norm_sqr() / seg as f64;
            }
            count += 1;
        }
        for p in &mut psd {
            *p /= count as f64;
        }
        let total: f64 = psd.iter().sum();
        let outband: f64 = psd
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let mm = (*i).min(seg - *i) as f64 / seg as f64;
                mm > 0.25 + 2.0 / seg as f64 // past the transition band
            })
            .map(|(_, p)| *p)
            .sum();
        assert!(
            outband / total < 0.01,
            "out-of-band fraction {}",
            outband / total
        );
        // Total power close to the band integral.
        let var = total / seg as f64;
        assert!((var / s.integral() - 1.0).abs() < 0.05, "power {var}");
    }

    #[test]
    fn additivity() {
        let mut ch = ChannelInstance::new(&Spectrum::flat(0.5, M), 32, 3).unwrap();
        let mut ch2 = ChannelInstance::new(&Spectrum::flat(0.5, M), 32, 3).unwrap();
        let x: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.1).sin()).collect();
        let y = ch.apply(&x);
        let z = ch2.generate_noise(1000);
        for i in 0..1000 {
            assert!((y[i] - x[i] - z[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn isi_identity_and_ma1() {
        let ident = FirFilter::identity();
        let s = isi_to_colored(&ident, 2.0, M).unwrap();
        for v in s.values() {
            assert!((v - 2.0).abs() < 1e-12);
        }
        let h = FirFilter {
            taps: vec![1.0, -0.5],
            delay: 0,
        };
        let s = isi_to_colored(&h, 1.0, M).unwrap();
        for i in 0..M {
            let f = i as f64 / M as f64;
            let denom = 1.0 + 0.25 - (2.0 * std::f64::consts::PI * f).cos();
            assert!((s.values()[i] - 1.0 / denom).abs() < 1e-9);
        }
        // Linearity in the innovation variance.
        let s3 = isi_to_colored(&h, 3.0, M).unwrap();
        for i in 0..M {
            assert!((s3.values()[i] - 3.0 * s.values()[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn isi_rejects_inband_zero() {
        // H(z) = 1 - z^{-1} has a zero at f = 0.
        let h = FirFilter {
            taps: vec![1.0, -1.0],
            delay: 0,
        };
        assert!(isi_to_colored(&h, 1.0, M).is_err());
    }
}
