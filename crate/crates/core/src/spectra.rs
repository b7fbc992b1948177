//! Power spectral densities on a uniform frequency grid, entropy power,
//! prediction gains, water-filling solvers, and the `R(D) = C` optimum.
//!
//! A [`Spectrum`] holds `M` samples of a nonnegative, even-symmetric power
//! density on the grid `f_m = m/M`, `m = 0..M`, interpreted over the unit
//! frequency interval `[-1/2, 1/2)`. All integrals are Riemann sums over bin
//! centers. An optional band limit `B` restricts the support to `|f| <= B/2`;
//! grid bins that land exactly on the band edge carry quadrature weight 1/2,
//! so band fractions like `B = 1/2` are represented exactly on power-of-two
//! grids and the white bandwidth-mismatch closed forms are reproduced to
//! solver precision rather than grid precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default frequency-grid length (power of two, FFT-compatible).
pub const DEFAULT_GRID: usize = 4096;

/// Relative floor applied to in-band densities before taking logs.
pub const LOG_FLOOR_REL: f64 = 1e-12;

/// Relative tolerance on conserved quantities in water-filling bisections.
pub const BISECT_REL_TOL: f64 = 1e-9;

/// Iteration cap for all bisections in this module.
pub const BISECT_MAX_ITER: usize = 200;

/// Sampled power spectral density, even-symmetric on a power-of-two grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Spectrum {
    values: Vec<f64>,
    band_limit: Option<f64>,
}

impl Spectrum {
    /// Build from raw grid values, validating symmetry and nonnegativity.
    /// If `band_limit` is set, out-of-band values are forced to zero.
    pub fn from_values(values: Vec<f64>, band_limit: Option<f64>) -> Result<Self> {
        let m = values.len();
        if !m.is_power_of_two() || m < 4 {
            return Err(Error::domain(format!(
                "grid length {m} must be a power of two >= 4"
            )));
        }
        if let Some(b) = band_limit {
            if !(b > 0.0 && b <= 1.0) {
                return Err(Error::domain(format!("band limit {b} outside (0, 1]")));
            }
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::domain(format!("density[{i}] = {v} is invalid")));
            }
        }
        for i in 1..m {
            let j = m - i;
            let (a, b) = (values[i], values[j]);
            if (a - b).abs() > 1e-9 * (1.0 + a.abs().max(b.abs())) {
                return Err(Error::domain(format!(
                    "density not even-symmetric at bins {i}/{j}: {a} vs {b}"
                )));
            }
        }
        let mut s = Spectrum { values, band_limit };
        if s.band_limit.is_some() {
            for i in 0..m {
                if s.band_weight(i) == 0.0 {
                    s.values[i] = 0.0;
                }
            }
        }
        Ok(s)
    }

    /// Flat density `level` over the full band.
    pub fn flat(level: f64, m: usize) -> Self {
        Spectrum::from_values(vec![level; m], None).expect("flat spectrum is valid")
    }

    /// Flat density over `|f| <= band/2`, zero elsewhere (brick wall).
    pub fn flat_band(level: f64, band: f64, m: usize) -> Result<Self> {
        Spectrum::from_values(vec![level; m], Some(band))
    }

    /// Two-level density: `high` on `|f| < 1/4`, `low` on `|f| > 1/4`.
    ///
    /// The two crossover bins at `|f| = 1/4` straddle the jump and take the
    /// midpoint value, which keeps the arithmetic mean (variance, power
    /// bookkeeping) exact on the grid; log-domain quantities are then
    /// accurate to `O(1/M)`.
    pub fn two_level(high: f64, low: f64, m: usize) -> Self {
        let q = m / 4;
        let cross = 0.5 * (high + low);
        let values: Vec<f64> = (0..m)
            .map(|i| {
                let mm = i.min(m - i);
                if mm < q {
                    high
                } else if mm == q {
                    cross
                } else {
                    low
                }
            })
            .collect();
        Spectrum::from_values(values, None).expect("two-level spectrum is valid")
    }

    /// First-order autoregressive shape: `innovation / |1 - a e^{-j2pi f}|^2`.
    pub fn ar1(a: f64, innovation: f64, m: usize) -> Result<Self> {
        if a.abs() >= 1.0 {
            return Err(Error::domain(format!("AR(1) pole {a} not inside unit circle")));
        }
        let values: Vec<f64> = (0..m)
            .map(|i| {
                let f = i as f64 / m as f64;
                innovation / (1.0 + a * a - 2.0 * a * (2.0 * std::f64::consts::PI * f).cos())
            })
            .collect();
        Spectrum::from_values(values, None)
    }

    /// First-order moving-average shape: `innovation * |1 - b e^{-j2pi f}|^2`.
    pub fn ma1(b: f64, innovation: f64, m: usize) -> Result<Self> {
        let values: Vec<f64> = (0..m)
            .map(|i| {
                let f = i as f64 / m as f64;
                innovation * (1.0 + b * b - 2.0 * b * (2.0 * std::f64::consts::PI * f).cos())
            })
            .collect();
        Spectrum::from_values(values, None)
    }

    /// Load from `(frequency, density)` pairs with `f` in `[0, 0.5]`,
    /// linearly interpolated onto the grid and mirrored to negative
    /// frequencies.
    pub fn from_points(points: &[(f64, f64)], band_limit: Option<f64>, m: usize) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Parse("need at least two (f, density) points".into()));
        }
        let mut pts = points.to_vec();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(f, d) in &pts {
            if !(0.0..=0.5).contains(&f) {
                return Err(Error::Parse(format!("frequency {f} outside [0, 0.5]")));
            }
            if !d.is_finite() || d < 0.0 {
                return Err(Error::Parse(format!("density {d} invalid")));
            }
        }
        let interp = |f: f64| -> f64 {
            if f <= pts[0].0 {
                return pts[0].1;
            }
            if f >= pts[pts.len() - 1].0 {
                return pts[pts.len() - 1].1;
            }
            let idx = pts.partition_point(|p| p.0 <= f);
            let (f0, d0) = pts[idx - 1];
            let (f1, d1) = pts[idx];
            if f1 == f0 {
                d0
            } else {
                d0 + (d1 - d0) * (f - f0) / (f1 - f0)
            }
        };
        let values: Vec<f64> = (0..m)
            .map(|i| {
                let f = i.min(m - i) as f64 / m as f64;
                interp(f)
            })
            .collect();
        Spectrum::from_values(values, band_limit)
    }

    /// Parse a two-column CSV (`f,density`), `#`-comments and header allowed.
    pub fn from_csv(text: &str, band_limit: Option<f64>, m: usize) -> Result<Self> {
        let mut pts = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (a, b) = (cols.next().unwrap_or(""), cols.next().unwrap_or(""));
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(f), Ok(d)) => pts.push((f, d)),
                _ if lineno == 0 => continue, // header row
                _ => {
                    return Err(Error::Parse(format!(
                        "line {}: expected two numeric columns, got {line:?}",
                        lineno + 1
                    )))
                }
            }
        }
        Spectrum::from_points(&pts, band_limit, m)
    }

    pub fn grid_len(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn band_limit(&self) -> Option<f64> {
        self.band_limit
    }

    /// Quadrature weight of bin `i`: 1 strictly inside the band, 1/2 exactly
    /// on the band edge, 0 outside. Full-band spectra weigh every bin 1;
    /// `B = 1` is full band (the edge coincides with the single Nyquist
    /// bin, which the wrap-around interval covers in full).
    pub fn band_weight(&self, i: usize) -> f64 {
        match self.band_limit {
            None => 1.0,
            Some(b) if b >= 1.0 => 1.0,
            Some(b) => {
                let m = self.values.len();
                let half_edge = b * m as f64; // compare 2*mm against B*M
                let mm = 2 * i.min(m - i);
                let mm = mm as f64;
                if mm < half_edge {
                    1.0
                } else if mm == half_edge {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }

    /// Occupied fraction of the unit band (equals `band_limit` when the edge
    /// falls on the grid, 1 for full-band spectra).
    pub fn band_fraction(&self) -> f64 {
        let m = self.values.len();
        (0..m).map(|i| self.band_weight(i)).sum::<f64>() / m as f64
    }

    /// Riemann integral of the density over `[-1/2, 1/2)` = process variance.
    pub fn integral(&self) -> f64 {
        let m = self.values.len();
        (0..m)
            .map(|i| self.band_weight(i) * self.values[i])
            .sum::<f64>()
            / m as f64
    }

    /// In-band mean density (integral normalized by the band fraction).
    pub fn band_mean(&self) -> f64 {
        self.integral() / self.band_fraction()
    }

    /// Entropy power: exponentiated in-band mean of the log density.
    ///
    /// For band-limited spectra the mean is taken over the band only
    /// (the downsampled-process convention). In-band densities are floored
    /// at `LOG_FLOOR_REL * max` before the log.
    pub fn entropy_power(&self) -> Result<f64> {
        let m = self.values.len();
        let maxv = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.band_weight(*i) > 0.0)
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        if !(maxv > 0.0) {
            return Err(Error::domain("spectrum is zero on its band"));
        }
        let floor = LOG_FLOOR_REL * maxv;
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for i in 0..m {
            let w = self.band_weight(i);
            if w > 0.0 {
                let v = self.values[i].max(floor);
                acc += w * v.ln();
                wsum += w;
            }
        }
        Ok((acc / wsum).exp())
    }

    /// Prediction gain: in-band mean over entropy power (>= 1, = 1 iff flat).
    pub fn prediction_gain(&self) -> Result<f64> {
        Ok(self.band_mean() / self.entropy_power()?)
    }

    /// One-step prediction error of the process observed in additive white
    /// noise of variance `theta`: `P_e(S + theta) - theta`, with the constant
    /// added over the full unit band (the sum is full-band even when `S` is
    /// band-limited). A band-edge bin straddles the support boundary, so its
    /// log contribution splits by the band weight — the same quadrature the
    /// linear integrals use, which keeps the conditional-variance identities
    /// exact for band-limited spectra. `theta = 0` reduces to
    /// [`entropy_power`](Self::entropy_power).
    pub fn noisy_prediction_error(&self, theta: f64) -> Result<f64> {
        if theta < 0.0 {
            return Err(Error::domain(format!("noise level {theta} negative")));
        }
        if theta == 0.0 {
            return self.entropy_power();
        }
        let m = self.values.len();
        let log_theta = theta.ln();
        let mean_log = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let w = self.band_weight(i);
                if w > 0.0 {
                    w * (v + theta).ln() + (1.0 - w) * log_theta
                } else {
                    log_theta
                }
            })
            .sum::<f64>()
            / m as f64;
        Ok(mean_log.exp() - theta)
    }

    /// Pointwise map preserving the grid and band.
    pub fn map(&self, f: impl Fn(usize, f64) -> f64) -> Result<Spectrum> {
        let values: Vec<f64> = self.values.iter().enumerate().map(|(i, v)| f(i, *v)).collect();
        Spectrum::from_values(values, self.band_limit)
    }
}

/// Which water-filling problem a solution answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaterfillKind {
    /// Reverse water-filling of a source: allocation is a distortion spectrum.
    Source,
    /// Forward water-filling of a channel: allocation is an input spectrum.
    Channel,
}

/// Water level, per-bin allocation, and the resulting rate (nats/sample).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaterfillSolution {
    pub water_level: f64,
    pub allocation: Vec<f64>,
    pub rate: f64,
    pub kind: WaterfillKind,
}

/// Reverse water-filling: find the distortion spectrum `min(theta, S(f))`
/// whose integral is `target_distortion`, and the corresponding rate.
pub fn reverse_waterfill(source: &Spectrum, target_distortion: f64) -> Result<WaterfillSolution> {
    if !(target_distortion > 0.0) {
        return Err(Error::domain(format!(
            "target distortion {target_distortion} must be positive"
        )));
    }
    let m = source.grid_len();
    let var = source.integral();
    let max_s = source.values().iter().cloned().fold(0.0, f64::max);

    let alloc_for = |theta: f64| -> Vec<f64> {
        source
            .values()
            .iter()
            .map(|&s| s.min(theta))
            .collect::<Vec<f64>>()
    };
    let dist_of = |theta: f64| -> f64 {
        (0..m)
            .map(|i| source.band_weight(i) * source.values()[i].min(theta))
            .sum::<f64>()
            / m as f64
    };
    let rate_of = |theta: f64| -> f64 {
        let mut acc = 0.0;
        for i in 0..m {
            let s = source.values()[i];
            if s > theta {
                acc += source.band_weight(i) * (s / theta).ln();
            }
        }
        0.5 * acc / m as f64
    };

    if target_distortion >= var {
        // Degenerate zero-rate solution.
        return Ok(WaterfillSolution {
            water_level: max_s,
            allocation: alloc_for(max_s),
            rate: 0.0,
            kind: WaterfillKind::Source,
        });
    }

    // Bisect to machine precision on the interval; this over-delivers the
    // 1e-9 contract on the conserved quantity.
    let (mut lo, mut hi) = (0.0_f64, max_s);
    for _ in 0..BISECT_MAX_ITER {
        let theta = 0.5 * (lo + hi);
        if dist_of(theta) > target_distortion {
            hi = theta;
        } else {
            lo = theta;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let theta = 0.5 * (lo + hi);
    let d = dist_of(theta);
    if (d - target_distortion).abs() > BISECT_REL_TOL * target_distortion {
        return Err(Error::solver(format!(
            "reverse water-filling stalled: wanted D = {target_distortion}, got {d}"
        )));
    }
    Ok(WaterfillSolution {
        water_level: theta,
        allocation: alloc_for(theta),
        rate: rate_of(theta),
        kind: WaterfillKind::Source,
    })
}

/// Forward water-filling: allocate transmit power `power` over the noise
/// band, `max(theta - S_Z(f), 0)` in-band, and return the capacity.
pub fn waterfill(noise: &Spectrum, power: f64) -> Result<WaterfillSolution> {
    if !(power > 0.0) {
        return Err(Error::domain(format!("power {power} must be positive")));
    }
    let m = noise.grid_len();
    let band_frac = noise.band_fraction();
    if band_frac <= 0.0 {
        return Err(Error::domain("channel band is empty"));
    }
    let maxv = noise
        .values()
        .iter()
        .enumerate()
        .filter(|(i, _)| noise.band_weight(*i) > 0.0)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(maxv.is_finite()) || maxv < 0.0 {
        return Err(Error::domain("noise spectrum invalid on its band"));
    }
    let floor = if maxv > 0.0 { LOG_FLOOR_REL * maxv } else { f64::MIN_POSITIVE };
    let floored: Vec<f64> = noise.values().iter().map(|&v| v.max(floor)).collect();

    let power_of = |theta: f64| -> f64 {
        (0..m)
            .map(|i| noise.band_weight(i) * (theta - floored[i]).max(0.0))
            .sum::<f64>()
            / m as f64
    };
    let min_inband = (0..m)
        .filter(|&i| noise.band_weight(i) > 0.0)
        .map(|i| floored[i])
        .fold(f64::INFINITY, f64::min);

    let (mut lo, mut hi) = (min_inband, maxv + power / band_frac + 1.0);
    for _ in 0..BISECT_MAX_ITER {
        let theta = 0.5 * (lo + hi);
        if power_of(theta) > power {
            hi = theta;
        } else {
            lo = theta;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let theta = 0.5 * (lo + hi);
    let p = power_of(theta);
    if (p - power).abs() > BISECT_REL_TOL * power {
        return Err(Error::solver(format!(
            "water-filling stalled: wanted P = {power}, got {p}"
        )));
    }

    let mut allocation = vec![0.0; m];
    let mut rate = 0.0;
    for i in 0..m {
        let w = noise.band_weight(i);
        if w > 0.0 {
            let a = (theta - floored[i]).max(0.0);
            allocation[i] = a;
            rate += w * (1.0 + a / floored[i]).ln();
        }
    }
    rate *= 0.5 / m as f64;
    Ok(WaterfillSolution {
        water_level: theta,
        allocation,
        rate,
        kind: WaterfillKind::Channel,
    })
}

/// A source/channel pair with a transmit power constraint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemSpec {
    pub source: Spectrum,
    pub noise: Spectrum,
    pub power: f64,
}

impl SystemSpec {
    pub fn new(source: Spectrum, noise: Spectrum, power: f64) -> Result<Self> {
        if source.grid_len() != noise.grid_len() {
            return Err(Error::domain(format!(
                "source grid {} != noise grid {}",
                source.grid_len(),
                noise.grid_len()
            )));
        }
        if !(power > 0.0) {
            return Err(Error::domain(format!("power {power} must be positive")));
        }
        Ok(SystemSpec { source, noise, power })
    }

    /// Bandwidth ratio: channel band over source band.
    pub fn rho(&self) -> f64 {
        self.noise.band_fraction() / self.source.band_fraction()
    }

    /// Total in-band noise power.
    pub fn noise_power(&self) -> f64 {
        self.noise.integral()
    }

    /// Signal-to-noise ratio `P / N`.
    pub fn snr(&self) -> f64 {
        self.power / self.noise_power()
    }

    pub fn source_variance(&self) -> f64 {
        self.source.integral()
    }
}

/// Solution of `R(D) = C` for a system.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Opta {
    /// Minimum achievable distortion.
    pub distortion: f64,
    /// `Var{S} / distortion`.
    pub sdr: f64,
    /// Channel capacity in nats per channel use.
    pub capacity: f64,
}

/// Optimum attainable performance: capacity via water-filling, then the
/// distortion solving `R(D) = C` by bisection on `D`.
pub fn opta(spec: &SystemSpec) -> Result<Opta> {
    let cap = waterfill(&spec.noise, spec.power)?.rate;
    let var = spec.source_variance();
    if cap <= 0.0 {
        return Ok(Opta {
            distortion: var,
            sdr: 1.0,
            capacity: cap,
        });
    }
    let rate_at = |d: f64| -> Result<f64> { Ok(reverse_waterfill(&spec.source, d)?.rate) };
    let (mut lo, mut hi) = (var * 1e-30, var);
    if rate_at(lo)? < cap {
        // Capacity exceeds the rate at (absurdly small) floor distortion;
        // clamp to the floor rather than chasing denormals.
        return Ok(Opta {
            distortion: lo,
            sdr: var / lo,
            capacity: cap,
        });
    }
    for _ in 0..BISECT_MAX_ITER {
        let mid = (lo * hi).sqrt(); // geometric bisection: R is log-like in D
        let r = rate_at(mid)?;
        if r > cap {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    let d = (lo * hi).sqrt();
    Ok(Opta {
        distortion: d,
        sdr: var / d,
        capacity: cap,
    })
}

/// Rate-domain Shannon bounds evaluated at the system optimum:
/// the prediction-gain lower bound on `R(D_opt)` and the upper bound on `C`.
pub fn shannon_bounds(spec: &SystemSpec) -> Result<(f64, f64)> {
    let o = opta(spec)?;
    let gamma_s = spec.source.prediction_gain()?;
    let gamma_c = spec.noise.prediction_gain()?;
    let b_s = spec.source.band_fraction();
    let b_c = spec.noise.band_fraction();
    let slb = 0.5 * b_s * (o.sdr / gamma_s).ln();
    let sub = 0.5 * b_c * (gamma_c * (1.0 + spec.snr())).ln();
    Ok((slb, sub))
}
