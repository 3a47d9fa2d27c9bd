//! Random tree source codes.
//!
//! A [`TreeCode`] assigns a reproduction letter to every branch of a Cayley
//! tree with branching ratio `d = e^R`; branch `(t, j)` carries the codeword
//! symbol for time `t` on the walk whose `t`-th index is `j`. Symbols are
//! drawn lazily from `(master_seed, t, j)` so encoder and decoder agree
//! without shipping a table.
//!
//! For a fixed source sequence the branch distortions `ρ(x_t, Y_{t,j})` form a
//! directed-polymer instance ([`InducedEnergies`]); the exact encoder is its
//! ground state.

mod bitstream;
mod ensemble;

pub use bitstream::{
    decode_file, encode_file, pack, packed_bit_len, unpack, Bitstream, SequentialDecoder,
    FILE_HEADER_LEN, FILE_MAGIC,
};
pub use ensemble::{simulate_ensemble, source_sequence, EnsembleReport, SequenceMode};

use serde::Serialize;

use crate::dprm::{ground_state, BranchEnergies, TreeShape, Walk};
use crate::error::{Error, Result};
use crate::model::{CodingDistribution, DistortionMatrix};
use crate::rng::{self, domain};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeCode {
    master_seed: u64,
    coding: CodingDistribution,
    shape: TreeShape,
}

impl TreeCode {
    pub fn new(master_seed: u64, coding: CodingDistribution, shape: TreeShape) -> Self {
        Self {
            master_seed,
            coding,
            shape,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn coding(&self) -> &CodingDistribution {
        &self.coding
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    /// Unchecked symbol on branch `(t, j)`.
    #[inline]
    pub fn symbol(&self, t: usize, j: u64) -> usize {
        self.coding.sample(rng::uniform(
            self.master_seed,
            domain::CODEBOOK,
            t as u64,
            j,
        ))
    }

    /// Codeword symbol at time `t` reached through `path = (j_1, …, j_t)`.
    pub fn codeword_symbol(&self, t: usize, path: &[u64]) -> Result<usize> {
        if t < 1 || t > self.shape.n() {
            return Err(Error::IndexOutOfRange(format!(
                "time {t} outside 1..={}",
                self.shape.n()
            )));
        }
        if path.len() != t {
            return Err(Error::IndexOutOfRange(format!(
                "path of length {} given for time {t}",
                path.len()
            )));
        }
        let d = self.shape.d();
        let mut parent = 0u64;
        for (k, &j) in path.iter().enumerate() {
            if j / d != parent {
                return Err(Error::IndexOutOfRange(format!(
                    "index {j} at step {} is not a child of {parent}",
                    k + 1
                )));
            }
            parent = j;
        }
        Ok(self.symbol(t, parent))
    }

    /// Reproduction sequence along a walk.
    pub fn reproduction(&self, walk: &Walk) -> Vec<usize> {
        walk.steps()
            .iter()
            .enumerate()
            .map(|(t, &j)| self.symbol(t + 1, j))
            .collect()
    }
}

/// Branch energies `ρ(x_t, Y_{t,j})` of a code against a fixed source sequence.
#[derive(Debug, Clone, Copy)]
pub struct InducedEnergies<'a> {
    code: &'a TreeCode,
    source: &'a [usize],
    rho: &'a DistortionMatrix,
}

impl<'a> InducedEnergies<'a> {
    pub fn new(code: &'a TreeCode, source: &'a [usize], rho: &'a DistortionMatrix) -> Result<Self> {
        validate_inputs(code, source, rho)?;
        Ok(Self { code, source, rho })
    }
}

impl BranchEnergies for InducedEnergies<'_> {
    fn shape(&self) -> TreeShape {
        self.code.shape
    }

    #[inline]
    fn energy(&self, i: usize, j: u64) -> f64 {
        self.rho.get(self.source[i - 1], self.code.symbol(i, j))
    }
}

fn validate_inputs(code: &TreeCode, source: &[usize], rho: &DistortionMatrix) -> Result<()> {
    if source.len() != code.shape.n() {
        return Err(Error::DimensionMismatch(format!(
            "source sequence has {} letters, code depth is {}",
            source.len(),
            code.shape.n()
        )));
    }
    if rho.cols() != code.coding.alphabet_size() {
        return Err(Error::DimensionMismatch(format!(
            "distortion matrix has {} columns, coding alphabet has {} letters",
            rho.cols(),
            code.coding.alphabet_size()
        )));
    }
    if let Some(&x) = source.iter().find(|&&x| x >= rho.rows()) {
        return Err(Error::IndexOutOfRange(format!(
            "source letter {x} >= {}",
            rho.rows()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncodingResult {
    pub walk: Walk,
    /// Sum of `per_symbol`, accumulated front to back.
    pub total_distortion: f64,
    pub per_symbol: Vec<f64>,
    pub reproduction: Vec<usize>,
}

impl EncodingResult {
    fn from_walk(code: &TreeCode, source: &[usize], rho: &DistortionMatrix, walk: Walk) -> Self {
        let reproduction = code.reproduction(&walk);
        let per_symbol: Vec<f64> = source
            .iter()
            .zip(&reproduction)
            .map(|(&x, &y)| rho.get(x, y))
            .collect();
        let total_distortion = per_symbol.iter().sum();
        Self {
            walk,
            total_distortion,
            per_symbol,
            reproduction,
        }
    }

    pub fn distortion_per_symbol(&self) -> f64 {
        self.total_distortion / self.per_symbol.len() as f64
    }
}

/// Minimum-distortion walk over the whole tree; ties go to the
/// lexicographically smallest walk.
pub fn encode_exact(
    code: &TreeCode,
    source: &[usize],
    rho: &DistortionMatrix,
) -> Result<EncodingResult> {
    let energies = InducedEnergies::new(code, source, rho)?;
    let gs = ground_state(&energies);
    Ok(EncodingResult::from_walk(code, source, rho, gs.walk))
}

/// M-algorithm: keep the `beam_width` best partial walks per generation,
/// ranked by partial distortion and then by walk order.
pub fn encode_beam(
    code: &TreeCode,
    source: &[usize],
    rho: &DistortionMatrix,
    beam_width: usize,
) -> Result<EncodingResult> {
    validate_inputs(code, source, rho)?;
    if beam_width == 0 {
        return Err(Error::InvalidArgument(
            "beam width must be at least 1".into(),
        ));
    }
    let d = code.shape.d();
    // The last index determines the whole partial walk, and orders it
    // lexicographically.
    let mut survivors: Vec<(f64, u64)> = vec![(0.0, 0)];
    let mut candidates: Vec<(f64, u64)> = Vec::new();
    for (t, &x) in source.iter().enumerate() {
        let t = t + 1;
        candidates.clear();
        for &(dist, j) in &survivors {
            for k in 0..d {
                let child = j * d + k;
                candidates.push((dist + rho.get(x, code.symbol(t, child)), child));
            }
        }
        let by_rank = |a: &(f64, u64), b: &(f64, u64)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if candidates.len() > beam_width {
            candidates.select_nth_unstable_by(beam_width - 1, by_rank);
            candidates.truncate(beam_width);
        }
        candidates.sort_unstable_by(by_rank);
        std::mem::swap(&mut survivors, &mut candidates);
    }
    let leaf = survivors[0].1;
    Ok(EncodingResult::from_walk(
        code,
        source,
        rho,
        Walk::from_leaf(leaf, code.shape),
    ))
}

/// Reproduction sequence of a packed walk, one symbol per step.
pub fn decode_sequential(code: &TreeCode, stream: &Bitstream) -> Result<Vec<usize>> {
    SequentialDecoder::new(code, stream)?.collect()
}
