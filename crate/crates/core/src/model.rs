//! Sources, distortion measures, coding distributions and branch-energy laws,
//! plus the symmetry check that the tree-coding theorem requires.
//!
//! Alphabets are index sets `0..k`; labels are the caller's business.

use std::fmt;

use serde::Serialize;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

/// Tolerance on the sum of a probability vector before renormalization.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Distortion values closer than this are one atom of an induced distribution.
pub const VALUE_MERGE_TOL: f64 = 1e-9;

fn validate_probs(probs: &[f64], what: &str) -> Result<Vec<f64>> {
    if probs.is_empty() {
        return Err(Error::InvalidDistribution(format!(
            "{what}: empty alphabet"
        )));
    }
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidDistribution(format!("{what}: bad entry {p}")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::InvalidDistribution(format!(
            "{what}: probabilities sum to {sum}"
        )));
    }
    Ok(probs.iter().map(|p| p / sum).collect())
}

/// Inverse-transform sample from a cumulative table whose last entry is 1.
#[inline]
fn sample_index(cdf: &[f64], u: f64) -> usize {
    let i = cdf.partition_point(|&c| c <= u);
    i.min(cdf.len() - 1)
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    cdf
}

/// A discrete memoryless source over `0..alphabet_size`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceModel {
    probs: Vec<f64>,
    #[serde(skip)]
    cdf: Vec<f64>,
}

impl SourceModel {
    pub fn new(probs: &[f64]) -> Result<Self> {
        let probs = validate_probs(probs, "source")?;
        let cdf = cumulative(&probs);
        Ok(Self { probs, cdf })
    }

    pub fn uniform(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidDistribution("source: empty alphabet".into()));
        }
        Self::new(&vec![1.0 / size as f64; size])
    }

    pub fn alphabet_size(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Letter drawn by inverse transform from `u` in (0, 1).
    pub fn sample(&self, u: f64) -> usize {
        sample_index(&self.cdf, u)
    }
}

/// The random-coding distribution Q on the reproduction alphabet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodingDistribution {
    probs: Vec<f64>,
    #[serde(skip)]
    cdf: Vec<f64>,
}

impl CodingDistribution {
    pub fn new(probs: &[f64]) -> Result<Self> {
        let probs = validate_probs(probs, "coding distribution")?;
        let cdf = cumulative(&probs);
        Ok(Self { probs, cdf })
    }

    pub fn uniform(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidDistribution(
                "coding distribution: empty alphabet".into(),
            ));
        }
        Self::new(&vec![1.0 / size as f64; size])
    }

    pub fn alphabet_size(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample(&self, u: f64) -> usize {
        sample_index(&self.cdf, u)
    }
}

/// Per-letter distortion ρ(x, y) ≥ 0, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DistortionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::InvalidDistortion("no rows".into()));
        }
        let c = rows[0].len();
        if c == 0 {
            return Err(Error::InvalidDistortion("no columns".into()));
        }
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidDistortion("ragged rows".into()));
        }
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidDistortion(format!(
                "entries must be finite and nonnegative, found {v}"
            )));
        }
        Ok(Self {
            rows: r,
            cols: c,
            values,
        })
    }

    /// Hamming distortion on a `size`-letter alphabet.
    pub fn hamming(size: usize) -> Result<Self> {
        Self::new(
            (0..size)
                .map(|x| (0..size).map(|y| if x == y { 0.0 } else { 1.0 }).collect())
                .collect(),
        )
    }

    pub fn constant(rows: usize, cols: usize, c: f64) -> Result<Self> {
        Self::new(vec![vec![c; cols]; rows])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[x * self.cols + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.values[x * self.cols..(x + 1) * self.cols]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Law of a single branch energy.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnergyDistribution {
    /// Finitely many atoms, sorted by value, with positive masses.
    Discrete {
        values: Vec<f64>,
        probs: Vec<f64>,
        #[serde(skip)]
        cdf: Vec<f64>,
    },
    Gaussian {
        mean: f64,
        std: f64,
    },
}

impl EnergyDistribution {
    /// Builds a discrete law. Atoms closer than [`VALUE_MERGE_TOL`] are merged
    /// and zero-mass atoms are dropped.
    pub fn discrete(values: &[f64], probs: &[f64]) -> Result<Self> {
        if values.len() != probs.len() {
            return Err(Error::InvalidEnergy(format!(
                "{} values but {} probabilities",
                values.len(),
                probs.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidEnergy(format!("non-finite atom {v}")));
        }
        let probs = validate_probs(probs, "energy distribution")?;
        let atoms = merge_atoms(values.iter().copied().zip(probs), VALUE_MERGE_TOL);
        Ok(Self::from_merged(atoms))
    }

    fn from_merged(atoms: Vec<(f64, f64)>) -> Self {
        let (values, probs): (Vec<f64>, Vec<f64>) =
            atoms.into_iter().filter(|&(_, p)| p > 0.0).unzip();
        let cdf = cumulative(&probs);
        Self::Discrete { values, probs, cdf }
    }

    pub fn point_mass(c: f64) -> Result<Self> {
        Self::discrete(&[c], &[1.0])
    }

    pub fn gaussian(mean: f64, std: f64) -> Result<Self> {
        if !mean.is_finite() || !std.is_finite() || std <= 0.0 {
            return Err(Error::InvalidEnergy(format!(
                "gaussian needs finite mean and std > 0, got ({mean}, {std})"
            )));
        }
        Ok(Self::Gaussian { mean, std })
    }

    /// Inverse-transform sample from `u` in (0, 1).
    pub fn sample(&self, u: f64) -> f64 {
        match self {
            Self::Discrete { values, cdf, .. } => values[sample_index(cdf, u)],
            Self::Gaussian { mean, std } => mean + std * standard_normal_quantile(u),
        }
    }

    /// Smallest atom of a discrete law; `None` for unbounded laws.
    pub fn min_atom(&self) -> Option<f64> {
        match self {
            Self::Discrete { values, .. } => values.first().copied(),
            Self::Gaussian { .. } => None,
        }
    }

    pub fn max_atom(&self) -> Option<f64> {
        match self {
            Self::Discrete { values, .. } => values.last().copied(),
            Self::Gaussian { .. } => None,
        }
    }

    /// `(value, mass)` pairs of a discrete law.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            Self::Discrete { values, probs, .. } => {
                Some(values.iter().copied().zip(probs.iter().copied()).collect())
            }
            Self::Gaussian { .. } => None,
        }
    }
}

/// Standard normal quantile, Φ⁻¹(u) = −√2 · erfc⁻¹(2u).
pub fn standard_normal_quantile(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

/// Sorts atoms by value and merges runs whose values lie within `tol` of the
/// first value of the run.
fn merge_atoms(atoms: impl IntoIterator<Item = (f64, f64)>, tol: f64) -> Vec<(f64, f64)> {
    let mut atoms: Vec<(f64, f64)> = atoms.into_iter().collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (v, p) in atoms {
        match merged.last_mut() {
            Some(last) if (v - last.0).abs() <= tol => last.1 += p,
            _ => merged.push((v, p)),
        }
    }
    merged
}

fn check_dims(q: &CodingDistribution, rho: &DistortionMatrix) -> Result<()> {
    if q.alphabet_size() != rho.cols() {
        return Err(Error::DimensionMismatch(format!(
            "coding distribution has {} letters but distortion matrix has {} columns",
            q.alphabet_size(),
            rho.cols()
        )));
    }
    Ok(())
}

/// Law of ρ(x, Y) with Y ~ Q, as a discrete energy distribution.
pub fn induced_energy_distribution(
    q: &CodingDistribution,
    rho: &DistortionMatrix,
    x: usize,
) -> Result<EnergyDistribution> {
    check_dims(q, rho)?;
    if x >= rho.rows() {
        return Err(Error::IndexOutOfRange(format!(
            "source letter {x} >= {}",
            rho.rows()
        )));
    }
    let atoms = merge_atoms(
        rho.row(x).iter().copied().zip(q.probs().iter().copied()),
        VALUE_MERGE_TOL,
    );
    Ok(EnergyDistribution::from_merged(atoms))
}

/// First pair of rows whose induced distortion laws differ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryMismatch {
    pub row_a: usize,
    pub row_b: usize,
    /// Distortion value at which the masses disagree.
    pub value: f64,
    pub mass_a: f64,
    pub mass_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub symmetric: bool,
    pub mismatch: Option<SymmetryMismatch>,
}

impl fmt::Display for SymmetryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.mismatch {
            None => write!(f, "symmetric"),
            Some(m) => write!(
                f,
                "rows {} and {} differ at distortion {}: mass {} vs {}",
                m.row_a, m.row_b, m.value, m.mass_a, m.mass_b
            ),
        }
    }
}

/// Checks that ρ(x, Y), Y ~ Q, has the same law for every source letter x.
///
/// Distortion values within `tol` are merged into one atom, and masses are
/// compared within `tol`. Every row is compared against row 0.
pub fn check_symmetry(
    q: &CodingDistribution,
    rho: &DistortionMatrix,
    tol: f64,
) -> Result<SymmetryReport> {
    check_dims(q, rho)?;
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol}")));
    }
    let law = |x: usize| {
        merge_atoms(
            rho.row(x).iter().copied().zip(q.probs().iter().copied()),
            tol,
        )
    };
    let reference = law(0);
    for x in 1..rho.rows() {
        if let Some((value, mass_a, mass_b)) = first_mass_mismatch(&reference, &law(x), tol) {
            return Ok(SymmetryReport {
                symmetric: false,
                mismatch: Some(SymmetryMismatch {
                    row_a: 0,
                    row_b: x,
                    value,
                    mass_a,
                    mass_b,
                }),
            });
        }
    }
    Ok(SymmetryReport {
        symmetric: true,
        mismatch: None,
    })
}

/// Walks two sorted atom lists in step; a value missing from one side has mass 0.
fn first_mass_mismatch(a: &[(f64, f64)], b: &[(f64, f64)], tol: f64) -> Option<(f64, f64, f64)> {
    let (mut i, mut k) = (0, 0);
    while i < a.len() || k < b.len() {
        let (value, ma, mb) = match (a.get(i), b.get(k)) {
            (Some(&(va, pa)), Some(&(vb, pb))) if (va - vb).abs() <= tol => {
                i += 1;
                k += 1;
                (va, pa, pb)
            }
            (Some(&(va, pa)), Some(&(vb, _))) if va < vb => {
                i += 1;
                (va, pa, 0.0)
            }
            (Some(&(va, pa)), None) => {
                i += 1;
                (va, pa, 0.0)
            }
            (_, Some(&(vb, pb))) => {
                k += 1;
                (vb, 0.0, pb)
            }
            (None, None) => unreachable!(),
        };
        if (ma - mb).abs() > tol {
            return Some((value, ma, mb));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn probability_validation() {
        assert!(SourceModel::new(&[0.5, 0.5]).is_ok());
        assert!(SourceModel::new(&[0.5, 0.6]).is_err());
        assert!(SourceModel::new(&[1.5, -0.5]).is_err());
        assert!(SourceModel::new(&[]).is_err());
        assert!(CodingDistribution::new(&[f64::NAN, 1.0]).is_err());
        let q = CodingDistribution::new(&[0.1, 0.2, 0.7]).unwrap();
        assert!((q.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn distortion_validation() {
        assert!(DistortionMatrix::new(vec![vec![0.0, -1.0]]).is_err());
        assert!(DistortionMatrix::new(vec![vec![0.0, 1.0], vec![1.0]]).is_err());
        assert!(DistortionMatrix::new(vec![vec![0.0, f64::INFINITY]]).is_err());
        let h = DistortionMatrix::hamming(3).unwrap();
        assert_eq!(h.get(1, 1), 0.0);
        assert_eq!(h.get(1, 2), 1.0);
    }

    #[test]
    fn energy_validation() {
        assert!(EnergyDistribution::gaussian(0.0, 0.0).is_err());
        assert!(EnergyDistribution::discrete(&[0.0, 1.0], &[0.3]).is_err());
        assert!(EnergyDistribution::discrete(&[0.0, 1.0], &[0.3, 0.3]).is_err());
        let e = EnergyDistribution::discrete(&[1.0, 0.0, 1.0 + 1e-12], &[0.25, 0.5, 0.25]).unwrap();
        assert_eq!(e.atoms().unwrap(), vec![(0.0, 0.5), (1.0, 0.5)]);
    }

    #[test]
    fn discrete_sampling_is_inverse_transform() {
        let e = EnergyDistribution::discrete(&[0.0, 1.0], &[0.5, 0.5]).unwrap();
        assert_eq!(e.sample(0.25), 0.0);
        assert_eq!(e.sample(0.75), 1.0);
        let g = EnergyDistribution::gaussian(1.0, 2.0).unwrap();
        assert!((g.sample(0.5) - 1.0).abs() < 1e-12);
        // Φ⁻¹(0.975) = 1.959963984540054
        assert!((standard_normal_quantile(0.975) - 1.959963984540054).abs() < 1e-12);
    }

    #[test]
    fn symmetry_uniform_binary_hamming() {
        let q = CodingDistribution::uniform(2).unwrap();
        let rho = DistortionMatrix::hamming(2).unwrap();
        assert!(check_symmetry(&q, &rho, 1e-9).unwrap().symmetric);
    }

    #[test]
    fn symmetry_skewed_binary_hamming() {
        let q = CodingDistribution::new(&[0.9, 0.1]).unwrap();
        let rho = DistortionMatrix::hamming(2).unwrap();
        let report = check_symmetry(&q, &rho, 1e-9).unwrap();
        assert!(!report.symmetric);
        let m = report.mismatch.unwrap();
        assert_eq!((m.row_a, m.row_b), (0, 1));
        // row 0 puts 0.9 on distortion 0, row 1 puts 0.1 there
        assert_eq!(m.value, 0.0);
        assert!((m.mass_a - 0.9).abs() < 1e-12 && (m.mass_b - 0.1).abs() < 1e-12);
    }

    #[test]
    fn symmetry_swap_requires_equal_masses() {
        let rho = DistortionMatrix::new(vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 2.0]]).unwrap();
        // row 0 -> {0: .5, 1: .3, 2: .2}; row 1 -> {0: .3, 1: .5, 2: .2}
        let q = CodingDistribution::new(&[0.5, 0.3, 0.2]).unwrap();
        assert!(!check_symmetry(&q, &rho, 1e-9).unwrap().symmetric);
        // q(a) = q(b) makes the swap legal
        let q = CodingDistribution::new(&[0.3, 0.3, 0.4]).unwrap();
        assert!(check_symmetry(&q, &rho, 1e-9).unwrap().symmetric);
    }

    #[test]
    fn symmetry_dimension_mismatch() {
        let q = CodingDistribution::uniform(3).unwrap();
        let rho = DistortionMatrix::hamming(2).unwrap();
        assert!(matches!(
            check_symmetry(&q, &rho, 1e-9),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(induced_energy_distribution(&q, &rho, 0).is_err());
    }

    #[test]
    fn induced_distribution_examples() {
        let q = CodingDistribution::uniform(2).unwrap();
        let rho = DistortionMatrix::hamming(2).unwrap();
        let e = induced_energy_distribution(&q, &rho, 0).unwrap();
        assert_eq!(e.atoms().unwrap(), vec![(0.0, 0.5), (1.0, 0.5)]);

        let q = CodingDistribution::new(&[1.0, 0.0]).unwrap();
        let e = induced_energy_distribution(&q, &rho, 0).unwrap();
        assert_eq!(e.atoms().unwrap(), vec![(0.0, 1.0)]);

        let q = CodingDistribution::uniform(4).unwrap();
        let rho = DistortionMatrix::hamming(4).unwrap();
        for x in 0..4 {
            let atoms = induced_energy_distribution(&q, &rho, x)
                .unwrap()
                .atoms()
                .unwrap();
            assert_eq!(atoms.len(), 2);
            assert_eq!(atoms[0], (0.0, 0.25));
            assert!((atoms[1].0 - 1.0).abs() < 1e-15 && (atoms[1].1 - 0.75).abs() < 1e-15);
        }
        assert!(induced_energy_distribution(&q, &rho, 4).is_err());
    }

    fn permuted_matrix() -> impl Strategy<Value = DistortionMatrix> {
        (2usize..6)
            .prop_flat_map(|k| {
                (
                    proptest::collection::vec(0.0f64..5.0, k),
                    proptest::collection::vec(
                        Just((0..k).collect::<Vec<_>>()).prop_shuffle(),
                        1..5,
                    ),
                )
            })
            .prop_map(|(base, perms)| {
                let rows = perms
                    .iter()
                    .map(|p| p.iter().map(|&i| base[i]).collect())
                    .collect();
                DistortionMatrix::new(rows).unwrap()
            })
    }

    proptest! {
        #[test]
        fn uniform_q_with_permuted_rows_is_symmetric(rho in permuted_matrix()) {
            let q = CodingDistribution::uniform(rho.cols()).unwrap();
            prop_assert!(check_symmetry(&q, &rho, 1e-9).unwrap().symmetric);
            let first = induced_energy_distribution(&q, &rho, 0).unwrap().atoms().unwrap();
            for x in 1..rho.rows() {
                let other = induced_energy_distribution(&q, &rho, x).unwrap().atoms().unwrap();
                prop_assert_eq!(first.len(), other.len());
                for (a, b) in first.iter().zip(&other) {
                    prop_assert!((a.0 - b.0).abs() <= 1e-9 && (a.1 - b.1).abs() <= 1e-9);
                }
            }
        }
    }
}
