//! Experiment configuration files.
//!
//! A config is a single TOML document. Everything is checked by
//! [`ExperimentConfig::resolve`] before any computation starts.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dprm::TreeShape;
use crate::error::{Error, Result};
use crate::model::{CodingDistribution, DistortionMatrix, EnergyDistribution, SourceModel};
use crate::treecode::SequenceMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    DprmConverge,
    PhaseScan,
    Encode,
    Decode,
    RdCurve,
    VerifyTheorem,
    Ensemble,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        Self::DprmConverge,
        Self::PhaseScan,
        Self::Encode,
        Self::Decode,
        Self::RdCurve,
        Self::VerifyTheorem,
        Self::Ensemble,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::DprmConverge => "dprm-converge",
            Self::PhaseScan => "phase-scan",
            Self::Encode => "encode",
            Self::Decode => "decode",
            Self::RdCurve => "rd-curve",
            Self::VerifyTheorem => "verify-theorem",
            Self::Ensemble => "ensemble",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistortionConfig {
    /// Hamming distortion; the size defaults to the source alphabet size.
    Hamming {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        size: Option<usize>,
    },
    Matrix {
        rows: Vec<Vec<f64>>,
    },
    Constant {
        rows: usize,
        cols: usize,
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnergyConfig {
    Gaussian {
        #[serde(default)]
        mean: f64,
        #[serde(default = "one")]
        std: f64,
    },
    Discrete {
        values: Vec<f64>,
        probs: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl BetaGrid {
    /// `start + k·step` for `k = 0, 1, …` while the point stays within
    /// `stop` (up to a relative slack of 1e-9 steps).
    pub fn points(&self) -> Result<Vec<f64>> {
        let BetaGrid { start, stop, step } = *self;
        if !(step > 0.0
            && step.is_finite()
            && start.is_finite()
            && stop.is_finite()
            && stop >= start)
        {
            return Err(Error::Config(format!(
                "beta_grid needs finite start <= stop and step > 0, got {start}..{stop} by {step}"
            )));
        }
        let count = ((stop - start) / step + 1e-9).floor();
        if count > 10_000_000.0 {
            return Err(Error::Config(format!("beta_grid has {count} points")));
        }
        Ok((0..=count as usize)
            .map(|k| start + k as f64 * step)
            .collect())
    }
}

/// The raw contents of a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<ExperimentKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coding: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distortion: Option<DistortionConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergyConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_grid: Option<BetaGrid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beam_width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_sequence: Option<bool>,
    /// Encode: file of whitespace-separated source letters.
    /// Decode: a file written by `encode`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Tolerance on |D₀ − D| for verify-theorem.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// verify-theorem: optional bound on the last ensemble gap to D(R).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_gap_tol: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; relative `input` and `output` paths are taken
    /// relative to the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut config = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if let Some(dir) = path.parent() {
            for p in [&mut config.input, &mut config.output]
                .into_iter()
                .flatten()
            {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Validates every field needed by `kind` and builds the models.
    pub fn resolve(&self, kind: ExperimentKind) -> Result<Plan> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(Error::Config(format!("config is for `{k}`, not `{kind}`")));
            }
        }
        let seed = self.seed.ok_or_else(|| missing("seed"))?;
        let unused = |fields: &[(&str, bool)]| -> Result<()> {
            match fields.iter().find(|(_, set)| *set) {
                Some((name, _)) => Err(Error::Config(format!("`{name}` is not used by {kind}"))),
                None => Ok(()),
            }
        };
        let plan = match kind {
            ExperimentKind::DprmConverge => {
                unused(&self.flags(&[
                    "source",
                    "coding",
                    "distortion",
                    "beam_width",
                    "fixed_sequence",
                    "input",
                    "tol",
                    "final_gap_tol",
                ]))?;
                let d = self.d()?;
                let n_list = self.n_list()?;
                for &n in &n_list {
                    TreeShape::new(d, n)?;
                }
                Plan::DprmConverge(DprmConvergePlan {
                    seed,
                    energy: self.energy()?,
                    d,
                    n_list,
                    betas: self.betas()?,
                    trials: self.trials()?,
                })
            }
            ExperimentKind::PhaseScan => {
                unused(&self.flags(&[
                    "source",
                    "coding",
                    "distortion",
                    "n",
                    "n_list",
                    "trials",
                    "beam_width",
                    "fixed_sequence",
                    "input",
                    "tol",
                    "final_gap_tol",
                ]))?;
                let d = self.d()?;
                if d < 1 {
                    return Err(Error::Config("d must be at least 1".into()));
                }
                Plan::PhaseScan(PhaseScanPlan {
                    seed,
                    energy: self.energy()?,
                    d,
                    betas: self.betas()?,
                })
            }
            ExperimentKind::RdCurve => {
                unused(&self.flags(&[
                    "coding",
                    "energy",
                    "d",
                    "n",
                    "n_list",
                    "trials",
                    "beam_width",
                    "fixed_sequence",
                    "input",
                    "tol",
                    "final_gap_tol",
                ]))?;
                let (source, rho) = self.source_and_rho()?;
                let betas = self.betas()?;
                if betas.iter().any(|&b| b < 0.0) {
                    return Err(Error::Config("slopes must be >= 0".into()));
                }
                Plan::RdCurve(RdCurvePlan {
                    seed,
                    source,
                    rho,
                    betas,
                })
            }
            ExperimentKind::VerifyTheorem => {
                unused(&self.flags(&[
                    "coding",
                    "energy",
                    "n",
                    "beta",
                    "betas",
                    "beta_grid",
                    "beam_width",
                    "input",
                ]))?;
                let (source, rho) = self.source_and_rho()?;
                let d = self.d()?;
                if d < 2 {
                    return Err(Error::Config("verify-theorem needs d >= 2".into()));
                }
                let n_list = match &self.n_list {
                    Some(_) => self.n_list()?,
                    None => Vec::new(),
                };
                for &n in &n_list {
                    TreeShape::new(d, n)?;
                }
                let trials = if n_list.is_empty() {
                    self.trials.unwrap_or(0)
                } else {
                    self.trials()?
                };
                let tol = self.tol.unwrap_or(1e-4);
                if !(tol >= 0.0) {
                    return Err(Error::Config(format!("tol must be >= 0, got {tol}")));
                }
                if let Some(g) = self.final_gap_tol {
                    if !(g >= 0.0) {
                        return Err(Error::Config(format!(
                            "final_gap_tol must be >= 0, got {g}"
                        )));
                    }
                }
                Plan::VerifyTheorem(VerifyTheoremPlan {
                    seed,
                    source,
                    rho,
                    d,
                    n_list,
                    trials,
                    mode: self.mode(),
                    tol,
                    final_gap_tol: self.final_gap_tol,
                })
            }
            ExperimentKind::Ensemble => {
                unused(&self.flags(&[
                    "energy",
                    "n",
                    "beta",
                    "betas",
                    "beta_grid",
                    "beam_width",
                    "input",
                    "tol",
                    "final_gap_tol",
                ]))?;
                let (source, rho) = self.source_and_rho()?;
                let coding = self.coding(&rho)?;
                let d = self.d()?;
                if d < 2 {
                    return Err(Error::Config("ensemble needs d >= 2".into()));
                }
                let n_list = self.n_list()?;
                for &n in &n_list {
                    TreeShape::new(d, n)?;
                }
                Plan::Ensemble(EnsemblePlan {
                    seed,
                    source,
                    coding,
                    rho,
                    d,
                    n_list,
                    trials: self.trials()?,
                    mode: self.mode(),
                })
            }
            ExperimentKind::Encode => {
                unused(&self.flags(&[
                    "energy",
                    "n_list",
                    "beta",
                    "betas",
                    "beta_grid",
                    "trials",
                    "fixed_sequence",
                    "tol",
                    "final_gap_tol",
                ]))?;
                let (source, rho) = self.source_and_rho()?;
                let coding = self.coding(&rho)?.ok_or_else(|| missing("coding"))?;
                let d = self.d()?;
                let letters = match &self.input {
                    Some(path) => {
                        let letters = read_letters(path)?;
                        if let Some(n) = self.n {
                            if n != letters.len() {
                                return Err(Error::Config(format!(
                                    "n = {n} but {} holds {} letters",
                                    path.display(),
                                    letters.len()
                                )));
                            }
                        }
                        if let Some(&x) = letters.iter().find(|&&x| x >= source.alphabet_size()) {
                            return Err(Error::Config(format!(
                                "source letter {x} outside alphabet of size {}",
                                source.alphabet_size()
                            )));
                        }
                        Some(letters)
                    }
                    None => None,
                };
                let n = match &letters {
                    Some(l) => l.len(),
                    None => self.n.ok_or_else(|| missing("n"))?,
                };
                let shape = TreeShape::new(d, n)?;
                if self.beam_width == Some(0) {
                    return Err(Error::Config("beam_width must be at least 1".into()));
                }
                if d > u32::MAX as u64 {
                    return Err(Error::Config(format!(
                        "d = {d} does not fit the file header"
                    )));
                }
                Plan::Encode(EncodePlan {
                    seed,
                    source,
                    coding,
                    rho,
                    shape,
                    letters,
                    beam_width: self.beam_width,
                })
            }
            ExperimentKind::Decode => {
                unused(&self.flags(&[
                    "source",
                    "distortion",
                    "energy",
                    "d",
                    "n",
                    "n_list",
                    "beta",
                    "betas",
                    "beta_grid",
                    "trials",
                    "beam_width",
                    "fixed_sequence",
                    "tol",
                    "final_gap_tol",
                ]))?;
                let probs = self.coding.as_ref().ok_or_else(|| missing("coding"))?;
                let input = self.input.clone().ok_or_else(|| missing("input"))?;
                Plan::Decode(DecodePlan {
                    seed,
                    coding: CodingDistribution::new(probs)?,
                    input,
                })
            }
        };
        Ok(plan)
    }

    fn flags(&self, names: &[&'static str]) -> Vec<(&'static str, bool)> {
        names
            .iter()
            .map(|&name| {
                let set = match name {
                    "source" => self.source.is_some(),
                    "coding" => self.coding.is_some(),
                    "distortion" => self.distortion.is_some(),
                    "energy" => self.energy.is_some(),
                    "d" => self.d.is_some(),
                    "n" => self.n.is_some(),
                    "n_list" => self.n_list.is_some(),
                    "beta" => self.beta.is_some(),
                    "betas" => self.betas.is_some(),
                    "beta_grid" => self.beta_grid.is_some(),
                    "trials" => self.trials.is_some(),
                    "beam_width" => self.beam_width.is_some(),
                    "fixed_sequence" => self.fixed_sequence.is_some(),
                    "input" => self.input.is_some(),
                    "tol" => self.tol.is_some(),
                    "final_gap_tol" => self.final_gap_tol.is_some(),
                    _ => unreachable!("unknown field {name}"),
                };
                (name, set)
            })
            .collect()
    }

    fn d(&self) -> Result<u64> {
        let d = self.d.ok_or_else(|| missing("d"))?;
        if d == 0 {
            return Err(Error::Config("d must be at least 1".into()));
        }
        Ok(d)
    }

    fn n_list(&self) -> Result<Vec<usize>> {
        let list = match (self.n, &self.n_list) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either `n` or `n_list`, not both".into(),
                ))
            }
            (Some(n), None) => vec![n],
            (None, Some(list)) => list.clone(),
            (None, None) => return Err(missing("n_list")),
        };
        if list.is_empty() || list.contains(&0) {
            return Err(Error::Config(
                "depths must be >= 1 and at least one is needed".into(),
            ));
        }
        Ok(list)
    }

    fn betas(&self) -> Result<Vec<f64>> {
        let betas = match (self.beta, &self.betas, &self.beta_grid) {
            (Some(b), None, None) => vec![b],
            (None, Some(list), None) => list.clone(),
            (None, None, Some(grid)) => grid.points()?,
            (None, None, None) => return Err(missing("beta")),
            _ => {
                return Err(Error::Config(
                    "give exactly one of `beta`, `betas`, `beta_grid`".into(),
                ))
            }
        };
        if betas.is_empty() || betas.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::Config(
                "betas must be finite, non-negative and non-empty".into(),
            ));
        }
        Ok(betas)
    }

    fn trials(&self) -> Result<usize> {
        match self.trials {
            Some(0) => Err(Error::Config("trials must be at least 1".into())),
            Some(t) => Ok(t),
            None => Err(missing("trials")),
        }
    }

    fn mode(&self) -> SequenceMode {
        if self.fixed_sequence.unwrap_or(false) {
            SequenceMode::Fixed
        } else {
            SequenceMode::Redraw
        }
    }

    fn energy(&self) -> Result<EnergyDistribution> {
        match self.energy.as_ref().ok_or_else(|| missing("energy"))? {
            EnergyConfig::Gaussian { mean, std } => EnergyDistribution::gaussian(*mean, *std),
            EnergyConfig::Discrete { values, probs } => EnergyDistribution::discrete(values, probs),
        }
    }

    fn source_and_rho(&self) -> Result<(SourceModel, DistortionMatrix)> {
        let source = SourceModel::new(self.source.as_ref().ok_or_else(|| missing("source"))?)?;
        let rho = match self
            .distortion
            .as_ref()
            .ok_or_else(|| missing("distortion"))?
        {
            DistortionConfig::Hamming { size } => {
                DistortionMatrix::hamming(size.unwrap_or(source.alphabet_size()))?
            }
            DistortionConfig::Matrix { rows } => DistortionMatrix::new(rows.clone())?,
            DistortionConfig::Constant { rows, cols, value } => {
                DistortionMatrix::constant(*rows, *cols, *value)?
            }
        };
        if rho.rows() != source.alphabet_size() {
            return Err(Error::Config(format!(
                "distortion has {} rows for a source alphabet of {}",
                rho.rows(),
                source.alphabet_size()
            )));
        }
        Ok((source, rho))
    }

    fn coding(&self, rho: &DistortionMatrix) -> Result<Option<CodingDistribution>> {
        self.coding
            .as_ref()
            .map(|probs| {
                let q = CodingDistribution::new(probs)?;
                if q.alphabet_size() != rho.cols() {
                    return Err(Error::Config(format!(
                        "coding distribution has {} letters, distortion has {} columns",
                        q.alphabet_size(),
                        rho.cols()
                    )));
                }
                Ok(q)
            })
            .transpose()
    }
}

fn missing(field: &str) -> Error {
    Error::Config(format!("missing field `{field}`"))
}

fn read_letters(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)?;
    let letters = text
        .split_whitespace()
        .map(|tok| {
            tok.parse::<usize>().map_err(|_| {
                Error::Config(format!(
                    "{}: `{tok}` is not a source letter",
                    path.display()
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if letters.is_empty() {
        return Err(Error::Config(format!(
            "{} holds no source letters",
            path.display()
        )));
    }
    Ok(letters)
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub enum Plan {
    DprmConverge(DprmConvergePlan),
    PhaseScan(PhaseScanPlan),
    RdCurve(RdCurvePlan),
    VerifyTheorem(VerifyTheoremPlan),
    Ensemble(EnsemblePlan),
    Encode(EncodePlan),
    Decode(DecodePlan),
}

#[derive(Debug, Clone)]
pub struct DprmConvergePlan {
    pub seed: u64,
    pub energy: EnergyDistribution,
    pub d: u64,
    pub n_list: Vec<usize>,
    pub betas: Vec<f64>,
    pub trials: usize,
}

#[derive(Debug, Clone)]
pub struct PhaseScanPlan {
    pub seed: u64,
    pub energy: EnergyDistribution,
    pub d: u64,
    pub betas: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RdCurvePlan {
    pub seed: u64,
    pub source: SourceModel,
    pub rho: DistortionMatrix,
    pub betas: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct VerifyTheoremPlan {
    pub seed: u64,
    pub source: SourceModel,
    pub rho: DistortionMatrix,
    pub d: u64,
    /// Depths of the ensemble trajectory; empty skips the simulation.
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub mode: SequenceMode,
    pub tol: f64,
    pub final_gap_tol: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EnsemblePlan {
    pub seed: u64,
    pub source: SourceModel,
    /// `None`: use the optimal output marginal Q*.
    pub coding: Option<CodingDistribution>,
    pub rho: DistortionMatrix,
    pub d: u64,
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub mode: SequenceMode,
}

#[derive(Debug, Clone)]
pub struct EncodePlan {
    pub seed: u64,
    pub source: SourceModel,
    pub coding: CodingDistribution,
    pub rho: DistortionMatrix,
    pub shape: TreeShape,
    /// `None`: draw the sequence from the source under `seed`.
    pub letters: Option<Vec<usize>>,
    pub beam_width: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct DecodePlan {
    pub seed: u64,
    pub coding: CodingDistribution,
    pub input: PathBuf,
}
