//! Lattice quantizers, modulo-lattice arithmetic, dither streams, and
//! empirical decoding-failure probes.
//!
//! Supported lattices: the scaled integers (K = 1), scaled cubic grids,
//! the hexagonal A2, the checkerboard D4, and E8. Second moments are exact
//! closed forms; nearest-point decoding uses the standard coset
//! constructions with deterministic tie-breaking, so every Voronoi cell is
//! a half-open region and results are reproducible across platforms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{counter_uniform, derive_seed};

/// Per-dimension second moments of the base (unit-scale) constructions.
const SIGMA2_INTEGER: f64 = 1.0 / 12.0;
const SIGMA2_A2: f64 = 5.0 / 72.0; // generator [[1,0],[1/2,sqrt(3)/2]]
const SIGMA2_D4: f64 = 13.0 / 120.0; // integer D4, cell volume 2
const SIGMA2_E8: f64 = 929.0 / 12960.0; // integer E8, cell volume 1

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    /// `delta * Z` (K = 1).
    ScaledInteger,
    /// `delta * Z^K`.
    Cubic,
    /// Hexagonal lattice (K = 2).
    HexA2,
    /// Checkerboard lattice (K = 4).
    D4,
    /// Gosset lattice (K = 8).
    E8,
}

/// A scaled lattice with its nearest-neighbor quantizer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lattice {
    kind: LatticeKind,
    dimension: usize,
    /// Row-major K x K generator of the *scaled* lattice (rows are basis
    /// vectors).
    generator: Vec<f64>,
    scale: f64,
    second_moment: f64,
}

fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

/// Round every coordinate; on a tie the residual lands at -1/2 (half-open
/// cell convention).
fn round_all(x: &[f64], out: &mut [f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o = round_half_up(*v);
    }
}

/// Nearest point of the integer D_n lattice (even coordinate sum): round
/// everything, and if the sum is odd re-round the worst coordinate the
/// other way.
fn nearest_dn(x: &[f64], out: &mut [f64]) {
    round_all(x, out);
    let sum: i64 = out.iter().map(|v| *v as i64).sum();
    if sum.rem_euclid(2) != 0 {
        let mut worst = 0usize;
        let mut werr = -1.0;
        for (i, (&xi, &fi)) in x.iter().zip(out.iter()).enumerate() {
            let e = (xi - fi).abs();
            if e > werr {
                werr = e;
                worst = i;
            }
        }
        if x[worst] >= out[worst] {
            out[worst] += 1.0;
        } else {
            out[worst] -= 1.0;
        }
    }
}

impl Lattice {
    pub fn scaled_integer(delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::domain(format!("step {delta} must be positive")));
        }
        Ok(Lattice {
            kind: LatticeKind::ScaledInteger,
            dimension: 1,
            generator: vec![delta],
            scale: delta,
            second_moment: delta * delta * SIGMA2_INTEGER,
        })
    }

    pub fn cubic(dimension: usize, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || dimension == 0 {
            return Err(Error::domain("cubic lattice needs positive step and dimension"));
        }
        let mut generator = vec![0.0; dimension * dimension];
        for i in 0..dimension {
            generator[i * dimension + i] = delta;
        }
        Ok(Lattice {
            kind: LatticeKind::Cubic,
            dimension,
            generator,
            scale: delta,
            second_moment: delta * delta * SIGMA2_INTEGER,
        })
    }

    pub fn hex_a2() -> Self {
        let s3 = 3.0_f64.sqrt();
        Lattice {
            kind: LatticeKind::HexA2,
            dimension: 2,
            generator: vec![1.0, 0.0, 0.5, 0.5 * s3],
            scale: 1.0,
            second_moment: SIGMA2_A2,
        }
    }

    pub fn d4() -> Self {
        #[rustfmt::skip]
        let generator = vec![
            1.0,  1.0, 0.0,  0.0,
            1.0, -1.0, 0.0,  0.0,
            0.0,  1.0, -1.0, 0.0,
            0.0,  0.0, 1.0, -1.0,
        ];
        Lattice {
            kind: LatticeKind::D4,
            dimension: 4,
            generator,
            scale: 1.0,
            second_moment: SIGMA2_D4,
        }
    }

    pub fn e8() -> Self {
        #[rustfmt::skip]
        let generator = vec![
            2.0,  0.0,  0.0,  0.0,  0.0,  0.0,  0.0, 0.0,
           -1.0,  1.0,  0.0,  0.0,  0.0,  0.0,  0.0, 0.0,
            0.0, -1.0,  1.0,  0.0,  0.0,  0.0,  0.0, 0.0,
            0.0,  0.0, -1.0,  1.0,  0.0,  0.0,  0.0, 0.0,
            0.0,  0.0,  0.0, -1.0,  1.0,  0.0,  0.0, 0.0,
            0.0,  0.0,  0.0,  0.0, -1.0,  1.0,  0.0, 0.0,
            0.0,  0.0,  0.0,  0.0,  0.0, -1.0,  1.0, 0.0,
            0.5,  0.5,  0.5,  0.5,  0.5,  0.5,  0.5, 0.5,
        ];
        Lattice {
            kind: LatticeKind::E8,
            dimension: 8,
            generator,
            scale: 1.0,
            second_moment: SIGMA2_E8,
        }
    }

    /// Construct by kind at unit scale (`delta = 1` for integer kinds).
    pub fn by_kind(kind: LatticeKind) -> Self {
        match kind {
            LatticeKind::ScaledInteger => Lattice::scaled_integer(1.0).unwrap(),
            LatticeKind::Cubic => Lattice::cubic(1, 1.0).unwrap(),
            LatticeKind::HexA2 => Lattice::hex_a2(),
            LatticeKind::D4 => Lattice::d4(),
            LatticeKind::E8 => Lattice::e8(),
        }
    }

    /// Uniformly rescale so the per-dimension second moment hits `target`.
    pub fn scaled_to_second_moment(&self, target: f64) -> Result<Lattice> {
        if !(target > 0.0) {
            return Err(Error::domain(format!("second moment {target} must be positive")));
        }
        let factor = (target / self.second_moment).sqrt();
        let mut out = self.clone();
        out.scale *= factor;
        for g in &mut out.generator {
            *g *= factor;
        }
        out.second_moment = target;
        Ok(out)
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    pub fn generator(&self) -> &[f64] {
        &self.generator
    }

    /// Nearest lattice point in Euclidean distance, deterministic ties.
    pub fn nearest_point(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dimension, "dimension mismatch");
        let s = self.scale;
        match self.kind {
            LatticeKind::ScaledInteger | LatticeKind::Cubic => {
                x.iter().map(|&v| s * round_half_up(v / s)).collect()
            }
            LatticeKind::HexA2 => self.nearest_a2(x),
            LatticeKind::D4 => {
                let xs: Vec<f64> = x.iter().map(|&v| v / s).collect();
                let mut out = vec![0.0; 4];
                nearest_dn(&xs, &mut out);
                out.iter().map(|&v| v * s).collect()
            }
            LatticeKind::E8 => self.nearest_e8(x),
        }
    }

    fn nearest_a2(&self, x: &[f64]) -> Vec<f64> {
        let s = self.scale;
        let s3 = 3.0_f64.sqrt();
        // Basis coordinates of x (unit-scale generator [[1,0],[1/2,sqrt3/2]]).
        let c1 = x[1] / (0.5 * s3 * s);
        let c0 = x[0] / s - 0.5 * c1;
        let (r0, r1) = (round_half_up(c0), round_half_up(c1));
        let mut best: Option<(f64, Vec<f64>)> = None;
        for i in -2..=2_i64 {
            for j in -2..=2_i64 {
                let k0 = r0 + i as f64;
                let k1 = r1 + j as f64;
                let px = s * (k0 + 0.5 * k1);
                let py = s * (0.5 * s3 * k1);
                let d = (x[0] - px) * (x[0] - px) + (x[1] - py) * (x[1] - py);
                let cand = vec![px, py];
                match &best {
                    None => best = Some((d, cand)),
                    Some((bd, bc)) => {
                        // Prefer smaller distance; on a tie, the candidate
                        // whose residual is lexicographically smaller.
                        if d < *bd - 1e-12 * (1.0 + *bd) {
                            best = Some((d, cand));
                        } else if (d - *bd).abs() <= 1e-12 * (1.0 + *bd) {
                            let r_new = [x[0] - cand[0], x[1] - cand[1]];
                            let r_old = [x[0] - bc[0], x[1] - bc[1]];
                            if r_new < r_old {
                                best = Some((d, cand));
                            }
                        }
                    }
                }
            }
        }
        best.expect("candidate set nonempty").1
    }

    fn nearest_e8(&self, x: &[f64]) -> Vec<f64> {
        let s = self.scale;
        let xs: Vec<f64> = x.iter().map(|&v| v / s).collect();
        let mut d8 = vec![0.0; 8];
        nearest_dn(&xs, &mut d8);
        let shifted: Vec<f64> = xs.iter().map(|&v| v - 0.5).collect();
        let mut coset = vec![0.0; 8];
        nearest_dn(&shifted, &mut coset);
        for c in &mut coset {
            *c += 0.5;
        }
        let dist = |p: &[f64]| -> f64 {
            xs.iter()
                .zip(p)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        };
        let (d0, d1) = (dist(&d8), dist(&coset));
        let pick = if d0 < d1 {
            d8
        } else if d1 < d0 {
            coset
        } else {
            // Tie: lexicographically smaller residual.
            let r0: Vec<f64> = xs.iter().zip(&d8).map(|(a, b)| a - b).collect();
            let r1: Vec<f64> = xs.iter().zip(&coset).map(|(a, b)| a - b).collect();
            if r0 <= r1 {
                d8
            } else {
                coset
            }
        };
        pick.iter().map(|&v| v * s).collect()
    }

    /// `x mod Lambda = x - Q(x)`: the residual in the basic Voronoi cell.
    pub fn modulo(&self, x: &[f64]) -> Vec<f64> {
        let q = self.nearest_point(x);
        x.iter().zip(&q).map(|(a, b)| a - b).collect()
    }

    /// Whether `x` already lies in the basic cell (its quantization is 0).
    pub fn decodes_to_zero(&self, x: &[f64]) -> bool {
        self.nearest_point(x).iter().all(|&v| v == 0.0)
    }
}

/// Reproducible stream of dither vectors, i.i.d. uniform over the basic
/// Voronoi cell. Draws are a pure function of `(seed, counter)`: a uniform
/// point of the fundamental parallelepiped (exactly samplable) folded into
/// the cell by the modulo map, which preserves uniformity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DitherStream {
    lattice: Lattice,
    seed: u64,
    counter: u64,
}

impl DitherStream {
    pub fn new(lattice: Lattice, seed: u64) -> Self {
        DitherStream {
            lattice,
            seed,
            counter: 0,
        }
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Draw the next dither vector and advance the counter.
    pub fn draw(&mut self) -> Vec<f64> {
        let k = self.lattice.dimension();
        let mut point = vec![0.0; k];
        for j in 0..k {
            let u = counter_uniform(self.seed, self.counter * k as u64 + j as u64) - 0.5;
            let row = &self.lattice.generator()[j * k..(j + 1) * k];
            for (p, g) in point.iter_mut().zip(row) {
                *p += u * g;
            }
        }
        self.counter += 1;
        self.lattice.modulo(&point)
    }

    /// Draw `n` vectors.
    pub fn draw_many(&mut self, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.draw()).collect()
    }
}

/// Empirical probability that a combination of one Gaussian component (at
/// the lattice second moment) and self-noise components (uniform over the
/// cell) escapes the basic cell.
///
/// `composition[0]` scales the Gaussian; `composition[1..]` scale
/// independent uniform components. Requires the self-noise energy
/// `sum_{l>=1} composition[l]^2 < 1`.
pub fn goodness_probe(
    lattice: &Lattice,
    composition: &[f64],
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if composition.is_empty() {
        return Err(Error::domain("composition must have at least one coefficient"));
    }
    let self_energy: f64 = composition[1..].iter().map(|a| a * a).sum();
    // The asymptotic hypothesis is strict; the boundary (pure self-noise at
    // unit energy) is still an exactly decodable probe input, so only
    // energies beyond 1 are rejected here.
    if self_energy > 1.0 {
        return Err(Error::domain(format!(
            "self-noise composition energy {self_energy} exceeds 1"
        )));
    }
    use rand::SeedableRng;
    use rand_distr::Distribution;
    let mut gauss_rng = rand_chacha::ChaCha12Rng::seed_from_u64(derive_seed(seed, "probe-gauss", 0));
    let normal = rand_distr::StandardNormal;
    let sigma = lattice.second_moment().sqrt();
    let k = lattice.dimension();
    let mut dithers: Vec<DitherStream> = (1..composition.len())
        .map(|l| DitherStream::new(lattice.clone(), derive_seed(seed, "probe-dither", l as u64)))
        .collect();

    let mut failures = 0usize;
    let mut z = vec![0.0; k];
    for _ in 0..trials {
        for v in z.iter_mut() {
            let g: f64 = normal.sample(&mut gauss_rng);
            *v = composition[0] * sigma * g;
        }
        for (l, ds) in dithers.iter_mut().enumerate() {
            let d = ds.draw();
            let a = composition[l + 1];
            for (v, di) in z.iter_mut().zip(&d) {
                *v += a * di;
            }
        }
        if !lattice.decodes_to_zero(&z) {
            failures += 1;
        }
    }
    Ok(failures as f64 / trials as f64)
}
