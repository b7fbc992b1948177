//! Thin FFT helpers over `rustfft` for real, even-symmetric grid data.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Forward DFT: `X_k = sum_n x_n e^{-j 2 pi k n / M}` (unnormalized).
pub fn dft(x: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let mut buf = x.to_vec();
    let fft = FftPlanner::new().plan_fft_forward(buf.len());
    fft.process(&mut buf);
    buf
}

/// Inverse DFT with 1/M normalization: `x_n = (1/M) sum_k X_k e^{+j 2 pi k n / M}`.
pub fn idft(x: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let mut buf = x.to_vec();
    let fft = FftPlanner::new().plan_fft_inverse(buf.len());
    fft.process(&mut buf);
    let scale = 1.0 / buf.len() as f64;
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

/// Inverse DFT of a real, even-symmetric spectrum; returns the real part.
/// The output is real and even up to roundoff for valid inputs.
pub fn idft_real_even(values: &[f64]) -> Vec<f64> {
    let cplx: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    idft(&cplx).into_iter().map(|c| c.re).collect()
}

/// Forward DFT of a real sequence.
pub fn dft_real(x: &[f64]) -> Vec<Complex<f64>> {
    let cplx: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    dft(&cplx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let x: Vec<Complex<f64>> = (0..16)
            .map(|i| Complex::new((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let back = idft(&dft(&x));
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn even_spectrum_gives_real_even_taps() {
        let m = 64;
        let vals: Vec<f64> = (0..m)
            .map(|i| 1.5 + (2.0 * std::f64::consts::PI * i as f64 / m as f64).cos())
            .collect();
        let taps = idft_real_even(&vals);
        for k in 1..m {
            assert!((taps[k] - taps[m - k]).abs() < 1e-12);
        }
    }
}
