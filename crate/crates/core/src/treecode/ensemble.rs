use rayon::prelude::*;
use serde::Serialize;

use super::{encode_exact, TreeCode};
use crate::dprm::TreeShape;
use crate::error::{Error, Result};
use crate::model::{check_symmetry, CodingDistribution, DistortionMatrix, SourceModel};
use crate::rd::{distortion_rate, DistortionRate};
use crate::rng::{self, domain};
use crate::stats::SampleStats;
use crate::theory::{d0_of_r, DistortionBound, SYMMETRY_TOL};

/// How source sequences are drawn across trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceMode {
    /// One source sequence, held fixed while the code is redrawn.
    Fixed,
    /// A fresh source sequence and a fresh code in every trial.
    Redraw,
}

/// Source letters `0..n` of stream `stream` under `master_seed`.
pub fn source_sequence(
    source: &SourceModel,
    master_seed: u64,
    stream: u64,
    n: usize,
) -> Vec<usize> {
    (0..n as u64)
        .map(|t| source.sample(rng::uniform(master_seed, domain::SOURCE, stream, t)))
        .collect()
}

/// Seed of the tree code used in ensemble trial `t`.
pub fn code_seed(master_seed: u64, t: u64) -> u64 {
    rng::derive_seed(master_seed, domain::CODE_TRIAL, t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleReport {
    pub d: u64,
    pub n: usize,
    pub trials: usize,
    pub mode: SequenceMode,
    /// Per-symbol distortion of the exact encoder, one slot per trial.
    pub distortion: SampleStats,
    pub d0: DistortionBound,
    pub d_of_r: DistortionRate,
    /// mean − D₀(R)
    pub gap_to_d0: f64,
    /// mean − D(R)
    pub gap_to_d_of_r: f64,
}

/// Monte-Carlo performance of the random tree-code ensemble under exact
/// encoding, compared with D₀(ln d) and D(ln d).
///
/// Refuses instances that violate the symmetry condition.
#[allow(clippy::too_many_arguments)]
pub fn simulate_ensemble(
    source: &SourceModel,
    coding: &CodingDistribution,
    rho: &DistortionMatrix,
    d: u64,
    n: usize,
    trials: usize,
    master_seed: u64,
    mode: SequenceMode,
) -> Result<EnsembleReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if source.alphabet_size() != rho.rows() {
        return Err(Error::DimensionMismatch(format!(
            "source has {} letters, distortion matrix has {} rows",
            source.alphabet_size(),
            rho.rows()
        )));
    }
    let report = check_symmetry(coding, rho, SYMMETRY_TOL)?;
    if !report.symmetric {
        return Err(Error::SymmetryViolation(report.to_string()));
    }
    let shape = TreeShape::new(d, n)?;
    let rate = (d as f64).ln();
    let d0 = d0_of_r(coding, rho, rate)?;
    let d_of_r = distortion_rate(source, rho, rate)?;

    let fixed = source_sequence(source, master_seed, 0, n);
    let values = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let code = TreeCode::new(code_seed(master_seed, t), coding.clone(), shape);
            let redrawn;
            let x = match mode {
                SequenceMode::Fixed => &fixed,
                SequenceMode::Redraw => {
                    redrawn = source_sequence(source, master_seed, t + 1, n);
                    &redrawn
                }
            };
            encode_exact(&code, x, rho).map(|r| r.distortion_per_symbol())
        })
        .collect::<Result<Vec<f64>>>()?;
    let distortion = SampleStats::from_values(values);
    Ok(EnsembleReport {
        d,
        n,
        trials,
        mode,
        gap_to_d0: distortion.mean - d0.value,
        gap_to_d_of_r: distortion.mean - d_of_r.distortion,
        distortion,
        d0,
        d_of_r,
    })
}
