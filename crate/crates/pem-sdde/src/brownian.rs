//! Reproducible discretized Brownian paths with bit-exact coarse/fine
//! coupling.
//!
//! Increments are sampled at the finest step and coarser grids consume sums
//! of consecutive fine increments, so every step size sees the same
//! underlying path. To make that coupling bit-exact, each increment is
//! rounded onto the grid of multiples of 2^-32 after sampling: sums of such
//! values are computed without any rounding error while the running total
//! stays below 2^21 (far beyond any realistic path), so block sums and
//! partial sums are independent of association and telescope exactly. The
//! rounding perturbs each increment by at most 2^-33, about nine orders of
//! magnitude below the standard deviation of the coarsest increments used
//! here, which is invisible next to Monte-Carlo error.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Result, SddeError};
use crate::grid::SeedInfo;

/// How standard normal draws are produced, recorded in output metadata.
/// Box-Muller over ChaCha12 uniforms, increments rounded to the 2^-32 grid.
pub const NORMAL_METHOD: &str = "box-muller-q32";

const QUANT_SCALE: f64 = 4294967296.0; // 2^32

pub(crate) fn quantize(x: f64) -> f64 {
    (x * QUANT_SCALE).round() / QUANT_SCALE
}

/// Standard normal source: Box-Muller pairs over a counter-based stream, one
/// independent stream per (master_seed, path_index).
pub(crate) struct NormalSource {
    rng: ChaCha12Rng,
    spare: Option<f64>,
}

impl NormalSource {
    pub(crate) fn new(master_seed: u64, path_index: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
        rng.set_stream(path_index);
        NormalSource { rng, spare: None }
    }

    pub(crate) fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1: f64 = 1.0 - self.rng.random::<f64>();
        let u2: f64 = self.rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    /// Uniform draw from [0, 1) off the same stream; discards any cached
    /// spare normal so the draw order stays well defined.
    pub(crate) fn uniform(&mut self) -> f64 {
        self.spare = None;
        self.rng.random::<f64>()
    }
}

/// Wiener increments of one path at the finest resolution: `fine_count`
/// steps of length `fine_step`, each an R^dim_noise increment, stored
/// row-major (step-major).
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianGrid {
    dim_noise: usize,
    fine_step: f64,
    fine_count: usize,
    increments: Vec<f64>,
    seed_info: SeedInfo,
}

/// Samples the increments of path `path_index` from the deterministic stream
/// keyed by (master_seed, path_index). Identical arguments reproduce the
/// path bit-for-bit; distinct path indices give independent streams.
pub fn generate_path(
    master_seed: u64,
    path_index: u64,
    dim_noise: usize,
    fine_step: f64,
    fine_count: usize,
) -> Result<BrownianGrid> {
    if dim_noise == 0 {
        return Err(SddeError::invalid("dim_noise must be >= 1"));
    }
    if !(fine_step.is_finite() && fine_step > 0.0) {
        return Err(SddeError::invalid(format!("fine_step must be finite and > 0, got {fine_step}")));
    }
    if fine_count == 0 {
        return Err(SddeError::invalid("fine_count must be >= 1"));
    }
    let sqrt_dt = fine_step.sqrt();
    let mut source = NormalSource::new(master_seed, path_index);
    let mut increments = Vec::with_capacity(fine_count * dim_noise);
    for _ in 0..fine_count * dim_noise {
        increments.push(quantize(sqrt_dt * source.next()));
    }
    Ok(BrownianGrid {
        dim_noise,
        fine_step,
        fine_count,
        increments,
        seed_info: SeedInfo { master_seed, path_index },
    })
}

impl BrownianGrid {
    /// Assembles a grid from pre-made increments; used by tests that splice
    /// or perturb paths. Length must be `fine_count * dim_noise`.
    #[cfg(test)]
    pub(crate) fn from_raw_parts(
        dim_noise: usize,
        fine_step: f64,
        increments: Vec<f64>,
        seed_info: SeedInfo,
    ) -> Self {
        assert!(dim_noise >= 1 && !increments.is_empty());
        assert_eq!(increments.len() % dim_noise, 0);
        let fine_count = increments.len() / dim_noise;
        BrownianGrid { dim_noise, fine_step, fine_count, increments, seed_info }
    }

    pub fn dim_noise(&self) -> usize {
        self.dim_noise
    }

    pub fn fine_step(&self) -> f64 {
        self.fine_step
    }

    pub fn fine_count(&self) -> usize {
        self.fine_count
    }

    /// All increments, row-major: increment of step `l` (zero-based) occupies
    /// `[l * dim_noise, (l + 1) * dim_noise)`.
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// The R^dim_noise increment of zero-based step `l`.
    pub fn increment(&self, l: usize) -> &[f64] {
        &self.increments[l * self.dim_noise..(l + 1) * self.dim_noise]
    }

    pub fn seed_info(&self) -> SeedInfo {
        self.seed_info
    }

    /// Debug dump: header (dim_noise, fine_step, fine_count, master_seed,
    /// path_index as little-endian u64/f64-bits/u64/u64/u64) followed by the
    /// increments as little-endian 64-bit floats in storage order.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&(self.dim_noise as u64).to_le_bytes())?;
        w.write_all(&self.fine_step.to_bits().to_le_bytes())?;
        w.write_all(&(self.fine_count as u64).to_le_bytes())?;
        w.write_all(&self.seed_info.master_seed.to_le_bytes())?;
        w.write_all(&self.seed_info.path_index.to_le_bytes())?;
        for v in &self.increments {
            w.write_all(&v.to_bits().to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a dump produced by [`BrownianGrid::write_binary`].
    pub fn read_binary<R: Read>(r: &mut R) -> Result<Self> {
        let mut buf = [0u8; 8];
        let mut next_u64 = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut buf)?;
            Ok(u64::from_le_bytes(buf))
        };
        let dim_noise = next_u64(r)? as usize;
        let fine_step = f64::from_bits(next_u64(r)?);
        let fine_count = next_u64(r)? as usize;
        let master_seed = next_u64(r)?;
        let path_index = next_u64(r)?;
        if dim_noise == 0 || fine_count == 0 || !(fine_step.is_finite() && fine_step > 0.0) {
            return Err(SddeError::invalid("malformed Brownian path header"));
        }
        let n = fine_count
            .checked_mul(dim_noise)
            .ok_or_else(|| SddeError::invalid("Brownian path header overflows"))?;
        let mut increments = Vec::with_capacity(n);
        let mut word = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut word)?;
            increments.push(f64::from_bits(u64::from_le_bytes(word)));
        }
        Ok(BrownianGrid {
            dim_noise,
            fine_step,
            fine_count,
            increments,
            seed_info: SeedInfo { master_seed, path_index },
        })
    }
}

/// Coarsening factor for [`coarsen`]; the factor must divide the number of
/// fine steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoarsenSpec {
    pub factor: usize,
}

impl CoarsenSpec {
    pub fn new(factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(SddeError::invalid("coarsening factor must be >= 1"));
        }
        Ok(CoarsenSpec { factor })
    }
}

/// Sums consecutive groups of `factor` fine increments (ascending index
/// order within each block) into coarse increments, row-major like the
/// input. Errors if the factor does not divide the number of steps.
pub fn coarsen(path: &BrownianGrid, spec: CoarsenSpec) -> Result<Vec<f64>> {
    if spec.factor == 0 {
        return Err(SddeError::invalid("coarsening factor must be >= 1"));
    }
    if path.fine_count % spec.factor != 0 {
        return Err(SddeError::invalid(format!(
            "factor {} does not divide the {} fine steps into whole coarse steps",
            spec.factor, path.fine_count
        )));
    }
    sum_blocks(&path.increments, path.dim_noise, spec.factor)
}

/// Block summation behind [`coarsen`], exposed for array-level checks: sums
/// each run of `factor` consecutive R^dim_noise increments in ascending
/// index order.
pub fn sum_blocks(increments: &[f64], dim_noise: usize, factor: usize) -> Result<Vec<f64>> {
    if dim_noise == 0 || increments.len() % dim_noise != 0 {
        return Err(SddeError::invalid("increment array is not a whole number of steps"));
    }
    if factor == 0 {
        return Err(SddeError::invalid("coarsening factor must be >= 1"));
    }
    let steps = increments.len() / dim_noise;
    if steps % factor != 0 {
        return Err(SddeError::invalid(format!(
            "factor {factor} does not divide {steps} steps into whole blocks"
        )));
    }
    let mut out = vec![0.0; increments.len() / factor];
    for (j, block) in out.chunks_exact_mut(dim_noise).enumerate() {
        for l in 0..factor {
            let row = &increments[(j * factor + l) * dim_noise..(j * factor + l + 1) * dim_noise];
            for (acc, &v) in block.iter_mut().zip(row) {
                *acc += v;
            }
        }
    }
    Ok(out)
}

/// Sums the `factor` fine increments feeding coarse step `step` (zero-based)
/// into `out`, in the same ascending order as [`coarsen`].
pub(crate) fn block_sum_into(path: &BrownianGrid, step: usize, factor: usize, out: &mut [f64]) {
    let m = path.dim_noise;
    debug_assert_eq!(out.len(), m);
    debug_assert!((step + 1) * factor <= path.fine_count);
    out.fill(0.0);
    for l in step * factor..(step + 1) * factor {
        let row = path.increment(l);
        for (acc, &v) in out.iter_mut().zip(row) {
            *acc += v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regeneration_is_bit_identical_and_streams_differ() {
        let a = generate_path(42, 7, 2, 2f64.powi(-10), 512).unwrap();
        let b = generate_path(42, 7, 2, 2f64.powi(-10), 512).unwrap();
        assert_eq!(a, b);
        let c = generate_path(42, 8, 2, 2f64.powi(-10), 512).unwrap();
        assert_ne!(a.increments(), c.increments());
        let d = generate_path(43, 7, 2, 2f64.powi(-10), 512).unwrap();
        assert_ne!(a.increments(), d.increments());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(generate_path(1, 0, 0, 0.5, 4).is_err());
        assert!(generate_path(1, 0, 1, 0.0, 4).is_err());
        assert!(generate_path(1, 0, 1, 0.5, 0).is_err());
    }

    #[test]
    fn increment_moments_match_the_normal_law() {
        let n = 100_000;
        let dt = 2f64.powi(-10);
        let path = generate_path(42, 0, 1, dt, n).unwrap();
        let inc = path.increments();
        let mean = inc.iter().sum::<f64>() / n as f64;
        let var = inc.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
        // 4 sigma bound on the sample mean and a wide (>10 sigma) band on the
        // sample variance of n draws from N(0, dt).
        assert!(mean.abs() < 4.0 * (dt / n as f64).sqrt(), "mean {mean}");
        assert!((var / dt - 1.0).abs() < 0.05, "variance {var} vs {dt}");
    }

    #[test]
    fn cross_stream_correlation_is_negligible() {
        let n = 100_000;
        let dt = 2f64.powi(-10);
        let a = generate_path(42, 0, 1, dt, n).unwrap();
        let b = generate_path(42, 1, 1, dt, n).unwrap();
        let dot: f64 = a.increments().iter().zip(b.increments()).map(|(x, y)| x * y).sum();
        let na: f64 = a.increments().iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.increments().iter().map(|x| x * x).sum::<f64>().sqrt();
        let corr = dot / (na * nb);
        assert!(corr.abs() < 0.02, "correlation {corr}");
    }

    #[test]
    fn coarsen_sums_blocks_in_ascending_order() {
        let hand = sum_blocks(&[0.1, -0.2, 0.05, 0.15], 1, 4).unwrap();
        assert_eq!(hand, vec![0.1f64 - 0.2 + 0.05 + 0.15]);

        let path = generate_path(3, 0, 3, 0.25, 8).unwrap();
        let same = coarsen(&path, CoarsenSpec::new(1).unwrap()).unwrap();
        assert_eq!(same, path.increments());

        assert!(coarsen(&path, CoarsenSpec::new(3).unwrap()).is_err());
    }

    #[test]
    fn partial_sums_telescope_bit_exactly() {
        let path = generate_path(42, 5, 1, 2f64.powi(-13), 1 << 12).unwrap();
        for factor in [2usize, 4, 8, 16] {
            let coarse = coarsen(&path, CoarsenSpec::new(factor).unwrap()).unwrap();
            let mut fine_sum = 0.0;
            let mut coarse_sum = 0.0;
            for (j, c) in coarse.iter().enumerate() {
                coarse_sum += c;
                for l in j * factor..(j + 1) * factor {
                    fine_sum += path.increments()[l];
                }
                assert_eq!(fine_sum.to_bits(), coarse_sum.to_bits(), "factor {factor} node {j}");
            }
        }
    }

    #[test]
    fn dyadic_coarsening_composes_bit_exactly() {
        let path = generate_path(9, 2, 2, 2f64.powi(-11), 256).unwrap();
        let twice = sum_blocks(&sum_blocks(path.increments(), 2, 2).unwrap(), 2, 2).unwrap();
        let once = sum_blocks(path.increments(), 2, 4).unwrap();
        assert_eq!(twice, once);
    }

    #[test]
    fn binary_dump_round_trips() {
        let path = generate_path(11, 4, 2, 2f64.powi(-9), 64).unwrap();
        let mut buf = Vec::new();
        path.write_binary(&mut buf).unwrap();
        let back = BrownianGrid::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(path, back);
    }
}
