//! The modulo-lattice encoder and decoder.
//!
//! `K` parallel rows are carved out of the source by an interleaving table:
//! every filter and predictor runs row-wise, while the dithered
//! modulo-lattice operation acts column-wise on `K`-dimensional vectors.
//! The encoder pre-filters the source, zooms by `beta`, cancels its own
//! predicted channel interference, and folds into the basic Voronoi cell;
//! the decoder post-filters the channel output, whitens the channel error
//! with the same predictor, subtracts its source prediction and the shared
//! dither, unfolds, and post-filters.
//!
//! A transmission is framed as: `L` forced-zero columns (channel-predictor
//! priming), `L` source columns sent `R` times each at a reduced zoom
//! (source-predictor priming), then steady-state columns. The overhead is
//! `L * (1 + R)` channel uses per row.
//!
//! With genie access to the encoder internals, the decoder additionally
//! tracks the forced-correct-decoding path and per-column test taps, so
//! steady-state decoding failures and the equivalent-noise statistics can
//! be measured without perturbing the signal path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{FirFilter, MatchingFilterSet};
use crate::lattice::{DitherStream, Lattice};

/// Interleaver geometry and codec scalars for one stream pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamConfig {
    /// Lattice dimension = number of interleaved rows.
    pub k: usize,
    /// Source samples per row (the steady-state payload).
    pub n: usize,
    /// Predictor length; also the initialization span.
    pub l: usize,
    /// Operating zoom factor.
    pub beta: f64,
    /// Shared dither seed (common randomness).
    pub dither_seed: u64,
    /// Repetitions per initialization column; 0 selects the automatic
    /// `ceil((beta / beta_init)^2)`.
    pub init_repeats: usize,
}

impl StreamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 {
            return Err(Error::domain("stream needs k >= 1 and n >= 1"));
        }
        if self.n < 8 * self.l {
            return Err(Error::domain(format!(
                "block length {} too short for predictor length {} (need n >= 8 l)",
                self.n, self.l
            )));
        }
        if !(self.beta > 0.0) {
            return Err(Error::domain("beta must be positive"));
        }
        Ok(())
    }
}

/// Initialization overhead in channel uses per row.
pub fn initialization_overhead(l: usize, init_repeats: usize) -> usize {
    l * (1 + init_repeats)
}

/// Column phases of a framed transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnPhase {
    /// Forced `xt = 0`, no modulo, no dither.
    ForcedZero,
    /// Initialization column: source index `j`, repeat `rep`.
    Init { j: usize, rep: usize },
    /// Steady state: source index `u_idx`.
    Steady { u_idx: usize },
}

/// Frame layout shared by encoder and decoder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameLayout {
    pub k: usize,
    pub l: usize,
    pub repeats: usize,
    /// Filtered-source length (payload columns reach `u_idx < n_src`).
    pub n_src: usize,
    /// Extra steady columns past the payload so the decoder can flush its
    /// alignment lookahead.
    pub pad: usize,
}

impl FrameLayout {
    pub fn total_columns(&self) -> usize {
        self.l + self.l * self.repeats + (self.n_src + self.pad - self.l)
    }

    pub fn phase(&self, c: usize) -> ColumnPhase {
        if c < self.l {
            ColumnPhase::ForcedZero
        } else if c < self.l + self.l * self.repeats {
            let off = c - self.l;
            ColumnPhase::Init {
                j: off / self.repeats,
                rep: off % self.repeats,
            }
        } else {
            ColumnPhase::Steady {
                u_idx: self.l + (c - self.l - self.l * self.repeats),
            }
        }
    }

    /// Dither draws consumed by the first `cols` columns.
    pub fn dither_draws(&self, cols: usize) -> u64 {
        cols.saturating_sub(self.l) as u64
    }
}

/// Genie record of one encoded transmission: everything the simulator needs
/// to follow the forced-correct path and to reconstruct the test taps.
#[derive(Debug, Clone)]
pub struct EncoderRecord {
    pub layout: FrameLayout,
    /// Pre-filtered source rows (`u`), length `n_src`.
    pub u_rows: Vec<Vec<f64>>,
    /// Modulo-folded rows, length = total columns.
    pub xt_rows: Vec<Vec<f64>>,
    /// Encoder interference term `I` per column (0 in the forced-zero phase).
    pub i_rows: Vec<Vec<f64>>,
    /// Lattice point removed by the encoder modulo, per column per row.
    pub qa_rows: Vec<Vec<f64>>,
    pub dither_seed: u64,
    pub dither_count: u64,
}

/// Encoder state for one transmission.
#[derive(Debug, Clone)]
pub struct EncoderState {
    f1: FirFilter,
    g1: FirFilter,
    p_c: FirFilter,
    beta: f64,
    beta_init: f64,
    repeats: usize,
    lattice: Lattice,
    dither: DitherStream,
    k: usize,
    l: usize,
    spent: bool,
}

fn check_lattice(fs: &MatchingFilterSet, lattice: &Lattice, k: usize) -> Result<()> {
    if lattice.dimension() != k {
        return Err(Error::contract(format!(
            "lattice dimension {} != configured rows {k}",
            lattice.dimension()
        )));
    }
    let rel = (lattice.second_moment() - fs.theta_c).abs() / fs.theta_c;
    if rel > 1e-6 {
        return Err(Error::contract(format!(
            "lattice second moment {} not scaled to the water level {}",
            lattice.second_moment(),
            fs.theta_c
        )));
    }
    Ok(())
}

/// Reduced zoom for the predictor-free initialization columns and the
/// repeat count that restores steady-state estimate quality.
pub fn init_zoom(fs: &MatchingFilterSet, beta: f64) -> Result<(f64, usize)> {
    let headroom = fs.theta_c - fs.zeq_var;
    if !(headroom > 0.0) || !(fs.u_var > 0.0) {
        return Err(Error::domain(
            "no zoom headroom for initialization (equivalent noise fills the cell)",
        ));
    }
    // Margin carried over from the operating zoom.
    let shrink = beta / fs.beta0;
    let beta_init = (headroom / fs.u_var).sqrt() * shrink;
    let repeats = ((beta / beta_init).powi(2)).ceil().max(1.0) as usize;
    Ok((beta_init, repeats))
}

impl EncoderState {
    pub fn new(fs: &MatchingFilterSet, lattice: Lattice, cfg: &StreamConfig) -> Result<Self> {
        cfg.validate()?;
        check_lattice(fs, &lattice, cfg.k)?;
        let (beta_init, auto_repeats) = init_zoom(fs, cfg.beta)?;
        let repeats = if cfg.init_repeats == 0 {
            auto_repeats
        } else {
            cfg.init_repeats
        };
        Ok(EncoderState {
            f1: fs.f1.clone(),
            g1: fs.g1.clone(),
            p_c: fs.p_c.clone(),
            beta: cfg.beta,
            beta_init,
            repeats,
            lattice: lattice.clone(),
            dither: DitherStream::new(lattice, cfg.dither_seed),
            k: cfg.k,
            l: cfg.l,
            spent: false,
        })
    }

    pub fn repeats(&self) -> usize {
        self.repeats
    }

    pub fn beta_init(&self) -> f64 {
        self.beta_init
    }

    /// Encode a complete framed transmission of the given source rows.
    /// Returns the channel-input rows and the genie record.
    pub fn encode_transmission(
        &mut self,
        source_rows: &[Vec<f64>],
    ) -> Result<(Vec<Vec<f64>>, EncoderRecord)> {
        if self.spent {
            return Err(Error::contract("encoder state already used for a transmission"));
        }
        if source_rows.len() != self.k {
            return Err(Error::contract(format!(
                "expected {} source rows, got {}",
                self.k,
                source_rows.len()
            )));
        }
        let n_src = source_rows[0].len();
        if source_rows.iter().any(|r| r.len() != n_src) {
            return Err(Error::contract("ragged source rows"));
        }
        if n_src <= 2 * self.l {
            return Err(Error::contract("source rows shorter than the initialization span"));
        }
        self.spent = true;

        let u_rows: Vec<Vec<f64>> = source_rows.iter().map(|r| self.f1.apply(r)).collect();
        let pad = 2 * self.g1.symmetric_center() + 2 * self.f1.symmetric_center() + 64;
        let layout = FrameLayout {
            k: self.k,
            l: self.l,
            repeats: self.repeats,
            n_src,
            pad,
        };
        let total = layout.total_columns();

        let mut xt_rows = vec![Vec::with_capacity(total); self.k];
        let mut i_rows = vec![Vec::with_capacity(total); self.k];
        let mut qa_rows = vec![Vec::with_capacity(total); self.k];

        let mut arg = vec![0.0; self.k];
        for c in 0..total {
            match layout.phase(c) {
                ColumnPhase::ForcedZero => {
                    for k in 0..self.k {
                        xt_rows[k].push(0.0);
                        i_rows[k].push(0.0);
                        qa_rows[k].push(0.0);
                    }
                }
                ColumnPhase::Init { j, .. } => {
                    let zoom = self.beta_init;
                    self.mod_column(&u_rows, j, zoom, &mut arg, &mut xt_rows, &mut i_rows, &mut qa_rows);
                }
                ColumnPhase::Steady { u_idx } => {
                    self.mod_column(
                        &u_rows,
                        u_idx,
                        self.beta,
                        &mut arg,
                        &mut xt_rows,
                        &mut i_rows,
                        &mut qa_rows,
                    );
                }
            }
        }

        let x_rows: Vec<Vec<f64>> = xt_rows.iter().map(|r| self.g1.apply(r)).collect();
        let record = EncoderRecord {
            layout,
            u_rows,
            xt_rows,
            i_rows,
            qa_rows,
            dither_seed: self.dither.seed(),
            dither_count: self.dither.counter(),
        };
        Ok((x_rows, record))
    }

    #[allow(clippy::too_many_arguments)]
    fn mod_column(
        &mut self,
        u_rows: &[Vec<f64>],
        u_idx: usize,
        zoom: f64,
        arg: &mut [f64],
        xt_rows: &mut [Vec<f64>],
        i_rows: &mut [Vec<f64>],
        qa_rows: &mut [Vec<f64>],
    ) {
        let d = self.dither.draw();
        for k in 0..self.k {
            let u = if u_idx < u_rows[k].len() {
                u_rows[k][u_idx]
            } else {
                0.0
            };
            let pred = self.p_c.predict_next(&xt_rows[k], xt_rows[k].len());
            // Interference term I = -pred; the modulo argument subtracts it.
            arg[k] = zoom * u + pred + d[k];
            i_rows[k].push(-pred);
        }
        let xt = self.lattice.modulo(arg);
        for k in 0..self.k {
            qa_rows[k].push(arg[k] - xt[k]);
            xt_rows[k].push(xt[k]);
        }
    }
}

/// How the decoder handles a detected (genie) decoding failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureHandling {
    /// Let errors propagate through the predictor memories.
    Continue,
    /// Patch the decoder state with the forced-correct value (diagnostic
    /// mode isolating steady-state statistics). Requires genie data.
    ResetOnFailure,
}

/// Per-column test taps recorded during a genie-assisted decode.
#[derive(Debug, Clone, Default)]
pub struct TestTaps {
    /// Steady-state decoder modulo input on the forced-correct path,
    /// one `K`-vector per steady payload column.
    pub t: Vec<Vec<f64>>,
    /// Equivalent additive noise per column.
    pub z_eq: Vec<Vec<f64>>,
    /// Whitened forward-channel noise per column.
    pub z_prime: Vec<Vec<f64>>,
    /// Pre-filtered source value per column (steady payload region).
    pub u: Vec<Vec<f64>>,
    /// Forced-correct-path failure flags (steady-state conditional).
    pub fail_ideal: Vec<bool>,
    /// Actual-path failure flags (includes propagation).
    pub fail_actual: Vec<bool>,
}

/// Summary of the correct-decoding check over recorded taps.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GenieReport {
    pub failures: usize,
    pub columns: usize,
    pub failure_rate: f64,
    /// Empirical per-dimension variance of the modulo input.
    pub var_t: f64,
    /// The bound it must stay under: the lattice second moment.
    pub theta_c: f64,
}

/// Count columns whose recorded modulo input leaves the basic cell, and
/// compare its empirical variance against the second moment.
pub fn genie_check(taps: &TestTaps, lattice: &Lattice) -> GenieReport {
    let mut failures = 0usize;
    let mut acc = 0.0;
    let mut n = 0usize;
    for t in &taps.t {
        if !lattice.decodes_to_zero(t) {
            failures += 1;
        }
        for v in t {
            acc += v * v;
            n += 1;
        }
    }
    let columns = taps.t.len();
    GenieReport {
        failures,
        columns,
        failure_rate: if columns > 0 {
            failures as f64 / columns as f64
        } else {
            0.0
        },
        var_t: if n > 0 { acc / n as f64 } else { 0.0 },
        theta_c: lattice.second_moment(),
    }
}

/// Output of a decoded transmission.
#[derive(Debug, Clone)]
pub struct DecodeOutcome {
    /// Decoded rows before the post filter (actual path), `n_src` each.
    pub v_rows: Vec<Vec<f64>>,
    /// Post-filtered reconstruction rows (actual path).
    pub recon_rows: Vec<Vec<f64>>,
    /// Forced-correct reconstruction rows (genie only).
    pub recon_rows_ideal: Option<Vec<Vec<f64>>>,
    /// Reconstruction lag: `recon[j]` estimates `source[j - recon_lag]`.
    pub recon_lag: usize,
    /// Recorded taps (genie only).
    pub taps: Option<TestTaps>,
    /// Failures detected in the initialization phase (genie only).
    pub init_failures: usize,
}

/// Decoder state for one transmission.
#[derive(Debug, Clone)]
pub struct DecoderState {
    g2: FirFilter,
    f2: FirFilter,
    p_s: FirFilter,
    p_c: FirFilter,
    alpha: f64,
    beta: f64,
    beta_init: f64,
    repeats: usize,
    lattice: Lattice,
    dither: DitherStream,
    k: usize,
    l: usize,
    /// Group delay of the pre/post channel filter pair.
    align_shift: usize,
    /// Group delay of the pre/post source filter pair.
    recon_lag: usize,
    /// Tail padding the encoder appends (protocol constant).
    enc_pad: usize,
    spent: bool,
}

impl DecoderState {
    pub fn new(fs: &MatchingFilterSet, lattice: Lattice, cfg: &StreamConfig) -> Result<Self> {
        cfg.validate()?;
        check_lattice(fs, &lattice, cfg.k)?;
        let (beta_init, auto_repeats) = init_zoom(fs, cfg.beta)?;
        let repeats = if cfg.init_repeats == 0 {
            auto_repeats
        } else {
            cfg.init_repeats
        };
        Ok(DecoderState {
            g2: fs.g2.clone(),
            f2: fs.f2.clone(),
            p_s: fs.p_s.clone(),
            p_c: fs.p_c.clone(),
            alpha: fs.alpha,
            beta: cfg.beta,
            beta_init,
            repeats,
            lattice: lattice.clone(),
            dither: DitherStream::new(lattice, cfg.dither_seed),
            k: cfg.k,
            l: cfg.l,
            align_shift: fs.g1.symmetric_center() + fs.g2.symmetric_center(),
            recon_lag: fs.f1.symmetric_center() + fs.f2.symmetric_center(),
            enc_pad: 2 * fs.g1.symmetric_center() + 2 * fs.f1.symmetric_center() + 64,
            spent: false,
        })
    }

    /// Replace the receive-side filters (mismatched-decoder operation),
    /// keeping the encoder-side group delays consistent.
    pub fn with_filters(mut self, fs_encoder: &MatchingFilterSet, g2: FirFilter, f2: FirFilter) -> Self {
        self.align_shift = fs_encoder.g1.symmetric_center() + g2.symmetric_center();
        self.recon_lag = fs_encoder.f1.symmetric_center() + f2.symmetric_center();
        self.g2 = g2;
        self.f2 = f2;
        self
    }

    /// Decode a complete framed transmission. `genie` enables the
    /// forced-correct path, tap recording, and failure containment.
    #[allow(clippy::needless_range_loop)] // column sweep indexes many parallel tables
    pub fn decode_transmission(
        &mut self,
        y_rows: &[Vec<f64>],
        genie: Option<&EncoderRecord>,
        handling: FailureHandling,
    ) -> Result<DecodeOutcome> {
        if self.spent {
            return Err(Error::contract("decoder state already used for a transmission"));
        }
        if y_rows.len() != self.k {
            return Err(Error::contract(format!(
                "expected {} received rows, got {}",
                self.k,
                y_rows.len()
            )));
        }
        if handling == FailureHandling::ResetOnFailure && genie.is_none() {
            return Err(Error::contract("reset-on-failure requires genie data"));
        }
        if let Some(rec) = genie {
            if rec.dither_seed != self.dither.seed() {
                return Err(Error::contract(format!(
                    "dither streams desynchronized: encoder seed {} != decoder seed {}",
                    rec.dither_seed,
                    self.dither.seed()
                )));
            }
            if rec.layout.repeats != self.repeats {
                return Err(Error::contract("initialization repeat count mismatch"));
            }
        }
        self.spent = true;

        let total = y_rows[0].len();
        let shift = self.align_shift;
        if shift > self.enc_pad {
            return Err(Error::contract(format!(
                "decoder alignment lookahead {shift} exceeds the encoder tail padding {}",
                self.enc_pad
            )));
        }
        if total <= shift + 2 * self.l + 1 {
            return Err(Error::contract("received rows too short for alignment"));
        }

        // Post filter + alignment: yt[c] corresponds to xt column c.
        let yt_rows: Vec<Vec<f64>> = y_rows
            .iter()
            .map(|r| {
                let full = self.g2.apply(r);
                full[shift..].to_vec()
            })
            .collect();
        // Channel-error whitening path.
        let yp_rows: Vec<Vec<f64>> = yt_rows
            .iter()
            .map(|r| {
                let mut yp = Vec::with_capacity(r.len());
                for n in 0..r.len() {
                    yp.push(r[n] - self.p_c.predict_next(r, n));
                }
                yp
            })
            .collect();
        let usable = yp_rows[0].len();

        // Layout must be re-derived exactly as the encoder framed it.
        let layout = match genie {
            Some(rec) => rec.layout.clone(),
            None => {
                // Without genie data the frame geometry is protocol state,
                // reconstructed from the stream configuration and the known
                // encoder padding.
                let overhead = self.enc_pad + self.l * self.repeats;
                let n_src = total.checked_sub(overhead).filter(|n| *n > self.l).ok_or_else(
                    || {
                        Error::contract(format!(
                            "received {total} columns, shorter than the frame overhead {overhead}"
                        ))
                    },
                )?;
                FrameLayout {
                    k: self.k,
                    l: self.l,
                    repeats: self.repeats,
                    n_src,
                    pad: self.enc_pad,
                }
            }
        };
        let n_src = layout.n_src;

        let mut v_rows: Vec<Vec<f64>> = vec![Vec::with_capacity(n_src); self.k];
        let mut v_ideal: Vec<Vec<f64>> = vec![Vec::with_capacity(n_src); self.k];
        // (row, index, value): erroneous outputs whose predictor-state copy
        // was patched by the reset diagnostic mode.
        let mut out_overrides: Vec<(usize, usize, f64)> = Vec::new();
        let mut taps = TestTaps::default();
        let mut init_failures = 0usize;

        let mut init_acc = vec![vec![0.0; self.k]; self.l.max(1)];
        let mut init_acc_ideal = vec![vec![0.0; self.k]; self.l.max(1)];

        let mut w = vec![0.0; self.k];
        let mut t_ideal = vec![0.0; self.k];
        let sweep = usable.min(layout.total_columns());
        for c in 0..sweep {
            match layout.phase(c) {
                ColumnPhase::ForcedZero => {}
                ColumnPhase::Init { j, rep } => {
                    let d = self.dither.draw();
                    for k in 0..self.k {
                        w[k] = yp_rows[k][c] - d[k];
                    }
                    let m = self.lattice.modulo(&w);
                    for k in 0..self.k {
                        init_acc[j][k] += m[k] / self.beta_init;
                    }
                    if let Some(rec) = genie {
                        for k in 0..self.k {
                            let z_eq = yp_rows[k][c] - rec.i_rows[k][c] - rec.xt_rows[k][c];
                            let u = rec.u_rows[k][j];
                            init_acc_ideal[j][k] += u + z_eq / self.beta_init;
                            t_ideal[k] = self.beta_init * u + z_eq;
                        }
                        if !self.lattice.decodes_to_zero(&t_ideal) {
                            init_failures += 1;
                        }
                    }
                    if rep + 1 == self.repeats {
                        let norm = 1.0 / self.repeats as f64;
                        for k in 0..self.k {
                            v_rows[k].push(init_acc[j][k] * norm);
                            if genie.is_some() {
                                v_ideal[k].push(init_acc_ideal[j][k] * norm);
                            }
                        }
                    }
                }
                ColumnPhase::Steady { u_idx } => {
                    let d = self.dither.draw();
                    // Actual path.
                    let mut j_act = vec![0.0; self.k];
                    for k in 0..self.k {
                        j_act[k] = self.p_s.predict_next(&v_rows[k], v_rows[k].len());
                        w[k] = yp_rows[k][c] - self.beta * j_act[k] - d[k];
                    }
                    let m = self.lattice.modulo(&w);
                    let mut v_act = vec![0.0; self.k];
                    for k in 0..self.k {
                        v_act[k] = m[k] / self.beta + j_act[k];
                    }

                    if let Some(rec) = genie {
                        let payload = u_idx < n_src;
                        let mut fail_act = false;
                        let mut col_t = vec![0.0; self.k];
                        let mut col_zeq = vec![0.0; self.k];
                        let mut col_zp = vec![0.0; self.k];
                        let mut col_u = vec![0.0; self.k];
                        let mut v_id_col = vec![0.0; self.k];
                        for k in 0..self.k {
                            let i_n = rec.i_rows[k][c];
                            let xt = rec.xt_rows[k][c];
                            let z_eq = yp_rows[k][c] - i_n - xt;
                            let u = if u_idx < rec.u_rows[k].len() {
                                rec.u_rows[k][u_idx]
                            } else {
                                0.0
                            };
                            let j_id = self.p_s.predict_next(&v_ideal[k], v_ideal[k].len());
                            col_t[k] = self.beta * (u - j_id) + z_eq;
                            col_zeq[k] = z_eq;
                            col_zp[k] = (yp_rows[k][c] - i_n) / self.alpha - xt;
                            col_u[k] = u;
                            v_id_col[k] = u + z_eq / self.beta;
                            // Actual-path modulo input recovered exactly from
                            // the encoder's removed lattice point.
                            w[k] += rec.qa_rows[k][c];
                        }
                        let fail_id = !self.lattice.decodes_to_zero(&col_t);
                        if !self.lattice.decodes_to_zero(&w) {
                            fail_act = true;
                        }
                        if payload {
                            taps.t.push(col_t);
                            taps.z_eq.push(col_zeq);
                            taps.z_prime.push(col_zp);
                            taps.u.push(col_u);
                            taps.fail_ideal.push(fail_id);
                            taps.fail_actual.push(fail_act);
                        }
                        for k in 0..self.k {
                            v_ideal[k].push(v_id_col[k]);
                        }
                        if handling == FailureHandling::ResetOnFailure && fail_act {
                            // Contain propagation: the erroneous value still
                            // reaches the output row, but the predictor
                            // history is patched with the correct one.
                            for k in 0..self.k {
                                v_rows[k].push(v_id_col[k]);
                                out_overrides.push((k, v_rows[k].len() - 1, v_act[k]));
                            }
                            continue;
                        }
                    }
                    for k in 0..self.k {
                        v_rows[k].push(v_act[k]);
                    }
                }
            }
        }

        // Lockstep contract: the sweep must have consumed exactly the dither
        // draws the frame prescribes for the columns it covered.
        let expected_draws = layout.dither_draws(sweep);
        if self.dither.counter() != expected_draws {
            return Err(Error::contract(format!(
                "dither stream desynchronized: consumed {} draws, frame prescribes {expected_draws}",
                self.dither.counter()
            )));
        }

        let mut v_out = v_rows;
        for (r, idx, val) in out_overrides {
            if idx < v_out[r].len() {
                v_out[r][idx] = val;
            }
        }
        for row in v_out.iter_mut().chain(v_ideal.iter_mut()) {
            row.truncate(n_src);
        }

        let recon_rows: Vec<Vec<f64>> = v_out.iter().map(|r| self.f2.apply(r)).collect();
        let recon_rows_ideal = if genie.is_some() {
            Some(v_ideal.iter().map(|r| self.f2.apply(r)).collect())
        } else {
            None
        };

        Ok(DecodeOutcome {
            v_rows: v_out,
            recon_rows,
            recon_rows_ideal,
            recon_lag: self.recon_lag,
            taps: genie.map(|_| taps),
            init_failures,
        })
    }
}
