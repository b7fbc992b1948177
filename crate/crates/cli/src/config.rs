//! Experiment configuration: JSON schema, validation, and construction of
//! core objects. Unknown keys are rejected everywhere.

use serde::{Deserialize, Serialize};

use analog_matching::codec::FailureHandling;
use analog_matching::filters::DesignParams;
use analog_matching::lattice::LatticeKind;
use analog_matching::sim::{DesignMode, SimOptions};
use analog_matching::spectra::{Spectrum, SystemSpec, DEFAULT_GRID};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum SpectrumConfig {
    /// Flat density, optionally band-limited.
    Flat {
        level: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        band: Option<f64>,
    },
    /// Two flat levels split at |f| = 1/4.
    TwoLevel { high: f64, low: f64 },
    /// First-order autoregressive shape.
    Ar1 { a: f64, innovation: f64 },
    /// First-order moving-average shape.
    Ma1 { b: f64, innovation: f64 },
    /// Two-column CSV (f in [0, 0.5], density), linearly interpolated.
    Csv {
        path: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        band: Option<f64>,
    },
    /// Intersymbol-interference channel given by its filter taps and white
    /// noise variance; converted to the equivalent colored-noise spectrum
    /// through the inverting front end.
    Isi { taps: Vec<f64>, innovation: f64 },
}

impl SpectrumConfig {
    pub fn build(&self, grid: usize) -> Result<Spectrum, String> {
        match self {
            SpectrumConfig::Flat { level, band } => match band {
                None => Ok(Spectrum::flat(*level, grid)),
                Some(b) => Spectrum::flat_band(*level, *b, grid).map_err(|e| e.to_string()),
            },
            SpectrumConfig::TwoLevel { high, low } => Ok(Spectrum::two_level(*high, *low, grid)),
            SpectrumConfig::Ar1 { a, innovation } => {
                Spectrum::ar1(*a, *innovation, grid).map_err(|e| e.to_string())
            }
            SpectrumConfig::Ma1 { b, innovation } => {
                Spectrum::ma1(*b, *innovation, grid).map_err(|e| e.to_string())
            }
            SpectrumConfig::Csv { path, band } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("system.*.csv {path}: {e}"))?;
                Spectrum::from_csv(&text, *band, grid).map_err(|e| e.to_string())
            }
            SpectrumConfig::Isi { taps, innovation } => {
                let h = analog_matching::filters::FirFilter {
                    taps: taps.clone(),
                    delay: 0,
                };
                analog_matching::channel::isi_to_colored(&h, *innovation, grid)
                    .map_err(|e| e.to_string())
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub source: SpectrumConfig,
    pub noise: SpectrumConfig,
    pub power: f64,
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_grid() -> usize {
    DEFAULT_GRID
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StreamSection {
    /// Interleaver rows (lattice dimension).
    pub rows: usize,
    /// Source samples per row and block.
    pub cols: usize,
    /// Predictor length.
    pub predictor_len: usize,
    /// Pre/post filter length bound.
    pub prefilter_len: usize,
    /// Zoom shrink margin.
    pub beta_margin: f64,
    /// Master seed for all derived streams.
    pub seed: u64,
    /// 0 = automatic repeat count.
    pub init_repeats: usize,
    /// Monte Carlo blocks.
    pub blocks: usize,
    pub failure_handling: FailureHandling,
}

impl Default for StreamSection {
    fn default() -> Self {
        StreamSection {
            rows: 8,
            cols: 2048,
            predictor_len: 128,
            prefilter_len: 257,
            beta_margin: 0.2,
            seed: 1,
            init_repeats: 0,
            blocks: 200,
            failure_handling: FailureHandling::ResetOnFailure,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSection {
    #[default]
    Matching,
    ZeroForcing,
    BwExpansion,
    BwCompression,
    Robustness,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub snr_db: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessSection {
    /// Bandwidth ratio of the closed-form curves.
    pub rho: f64,
    /// Design point in dB.
    pub snr0_db: f64,
    /// Curve extent above the design point, in decades.
    #[serde(default = "default_decades")]
    pub decades: f64,
    #[serde(default = "default_ppd")]
    pub points_per_decade: usize,
    /// Optional prediction gains applied to the high-SNR limit curve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<(f64, f64)>,
}

fn default_decades() -> f64 {
    4.0
}

fn default_ppd() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSection,
    #[serde(default)]
    pub stream: StreamSection,
    #[serde(default = "default_lattice")]
    pub lattice: LatticeKind,
    #[serde(default)]
    pub mode: ModeSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robustness: Option<RobustnessSection>,
}

fn default_lattice() -> LatticeKind {
    LatticeKind::E8
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| format!("config: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        if !self.system.power.is_finite() || self.system.power <= 0.0 {
            return Err("system.power must be a positive finite number".into());
        }
        if !self.system.grid.is_power_of_two() {
            return Err(format!("system.grid {} must be a power of two", self.system.grid));
        }
        if self.mode == ModeSection::Robustness && self.robustness.is_none() {
            return Err("mode \"robustness\" needs a [robustness] section".into());
        }
        Ok(())
    }

    pub fn system(&self) -> Result<SystemSpec, String> {
        let grid = self.system.grid;
        let source = self.system.source.build(grid)?;
        let noise = self.system.noise.build(grid)?;
        let spec =
            SystemSpec::new(source, noise, self.system.power).map_err(|e| e.to_string())?;
        match self.mode {
            ModeSection::BwExpansion if spec.rho() <= 1.0 => Err(format!(
                "bw_expansion preset needs rho > 1, got {}",
                spec.rho()
            )),
            ModeSection::BwCompression if spec.rho() >= 1.0 => Err(format!(
                "bw_compression preset needs rho < 1, got {}",
                spec.rho()
            )),
            ModeSection::ZeroForcing if (spec.rho() - 1.0).abs() > 1e-12 => {
                Err("zero_forcing needs matched bandwidths".into())
            }
            _ => Ok(spec),
        }
    }

    pub fn design_mode(&self) -> DesignMode {
        match self.mode {
            ModeSection::ZeroForcing => DesignMode::ZeroForcing,
            _ => DesignMode::Matching,
        }
    }

    pub fn design_params(&self) -> DesignParams {
        DesignParams {
            predictor_len: self.stream.predictor_len,
            prefilter_len: self.stream.prefilter_len,
            beta_margin: self.stream.beta_margin,
        }
    }

    pub fn sim_options(&self, seed_override: Option<u64>) -> SimOptions {
        SimOptions {
            mode: self.design_mode(),
            lattice: self.lattice,
            rows: self.stream.rows,
            cols: self.stream.cols,
            blocks: self.stream.blocks,
            design: self.design_params(),
            master_seed: seed_override.unwrap_or(self.stream.seed),
            failure_handling: self.stream.failure_handling,
            init_repeats: self.stream.init_repeats,
            synthesis_len: 192,
        }
    }
}
