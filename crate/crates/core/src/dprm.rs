//! Exact computations on one realization of a random Cayley tree.
//!
//! Branch `(i, j)` lives in generation `i` (1-based, `i = 1` are the `d`
//! branches leaving the root) at position `j` in `0..d^i`. The children of
//! branch `(i, j)` are `(i + 1, d·j + k)` for `k` in `0..d`. A walk is fixed by
//! its leaf index alone, and leaves are visited in increasing order, which is
//! also lexicographic order on `(j_1, …, j_n)`.
//!
//! Traversals keep an explicit stack of depth `n`, never the tree itself.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::EnergyDistribution;
use crate::rng::{self, domain};
use crate::stats::SampleStats;

/// A full balanced tree with branching ratio `d` and `n` generations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TreeShape {
    d: u64,
    n: usize,
}

impl TreeShape {
    pub fn new(d: u64, n: usize) -> Result<Self> {
        if d < 1 {
            return Err(Error::InvalidShape(format!("branching ratio {d} < 1")));
        }
        if n < 1 {
            return Err(Error::InvalidShape("depth must be at least 1".into()));
        }
        let shape = Self { d, n };
        if d > 1 && shape.total_branches().is_none() {
            return Err(Error::InvalidShape(format!(
                "branch count of a d={d}, n={n} tree overflows 64 bits"
            )));
        }
        Ok(shape)
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `d^i`, the number of branches in generation `i`.
    pub fn branches_at(&self, i: usize) -> u64 {
        self.d.pow(i as u32)
    }

    /// Number of walks, `d^n`.
    pub fn walk_count(&self) -> u64 {
        self.branches_at(self.n)
    }

    /// `Σ_{i=1..n} d^i`, or `None` on overflow.
    pub fn total_branches(&self) -> Option<u64> {
        if self.d == 1 {
            return Some(self.n as u64);
        }
        let mut total: u64 = 0;
        let mut level: u64 = 1;
        for _ in 0..self.n {
            level = level.checked_mul(self.d)?;
            total = total.checked_add(level)?;
        }
        Some(total)
    }

    fn check_branch(&self, i: usize, j: u64) -> Result<()> {
        if i < 1 || i > self.n {
            return Err(Error::IndexOutOfRange(format!(
                "generation {i} outside 1..={}",
                self.n
            )));
        }
        if j >= self.branches_at(i) {
            return Err(Error::IndexOutOfRange(format!(
                "branch {j} outside 0..{} in generation {i}",
                self.branches_at(i)
            )));
        }
        Ok(())
    }
}

/// A root-to-leaf walk `(j_1, …, j_n)` of absolute branch indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Walk {
    steps: Vec<u64>,
}

impl Walk {
    /// Validates the parent/child constraint `d·j_i ≤ j_{i+1} ≤ d·j_i + d − 1`.
    pub fn new(steps: Vec<u64>, shape: TreeShape) -> Result<Self> {
        if steps.len() != shape.n() {
            return Err(Error::InvalidArgument(format!(
                "walk has {} steps, tree depth is {}",
                steps.len(),
                shape.n()
            )));
        }
        let mut parent = 0u64;
        for (t, &j) in steps.iter().enumerate() {
            let lo = parent * shape.d();
            if j < lo || j >= lo + shape.d() {
                return Err(Error::InvalidArgument(format!(
                    "step {} index {j} is not a child of {parent}",
                    t + 1
                )));
            }
            parent = j;
        }
        Ok(Self { steps })
    }

    /// The walk ending at leaf `leaf`.
    pub fn from_leaf(leaf: u64, shape: TreeShape) -> Self {
        let d = shape.d();
        let mut steps = vec![0u64; shape.n()];
        let mut j = leaf;
        for slot in steps.iter_mut().rev() {
            *slot = j;
            j /= d;
        }
        Self { steps }
    }

    /// Builds a walk from child offsets `j_t − d·j_{t−1}`, each in `0..d`.
    pub fn from_relative(relative: &[u64], d: u64) -> Result<Self> {
        let mut steps = Vec::with_capacity(relative.len());
        let mut parent = 0u64;
        for (t, &r) in relative.iter().enumerate() {
            if r >= d {
                return Err(Error::InvalidArgument(format!(
                    "relative index {r} at step {} is not below d={d}",
                    t + 1
                )));
            }
            parent = parent
                .checked_mul(d)
                .and_then(|p| p.checked_add(r))
                .ok_or_else(|| Error::InvalidArgument("walk index overflows".into()))?;
            steps.push(parent);
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[u64] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn leaf(&self) -> Option<u64> {
        self.steps.last().copied()
    }

    pub fn relative_indices(&self, d: u64) -> Vec<u64> {
        let mut parent = 0u64;
        self.steps
            .iter()
            .map(|&j| {
                let r = j - parent * d;
                parent = j;
                r
            })
            .collect()
    }
}

/// Anything that assigns an energy to every branch of a tree.
pub trait BranchEnergies: Sync {
    fn shape(&self) -> TreeShape;

    /// Energy of branch `(i, j)`; callers guarantee the indices are in range.
    fn energy(&self, i: usize, j: u64) -> f64;

    /// Total energy of a walk.
    fn walk_energy(&self, walk: &Walk) -> f64 {
        walk.steps()
            .iter()
            .enumerate()
            .fold(0.0, |acc, (t, &j)| acc + self.energy(t + 1, j))
    }
}

/// Branch energies drawn lazily and deterministically from `(master_seed, i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchEnergyOracle {
    master_seed: u64,
    energy_dist: EnergyDistribution,
    shape: TreeShape,
}

impl BranchEnergyOracle {
    pub fn new(master_seed: u64, energy_dist: EnergyDistribution, shape: TreeShape) -> Self {
        Self {
            master_seed,
            energy_dist,
            shape,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn energy_dist(&self) -> &EnergyDistribution {
        &self.energy_dist
    }

    /// Checked energy lookup.
    pub fn branch_energy(&self, i: usize, j: u64) -> Result<f64> {
        self.shape.check_branch(i, j)?;
        Ok(self.energy(i, j))
    }
}

impl BranchEnergies for BranchEnergyOracle {
    fn shape(&self) -> TreeShape {
        self.shape
    }

    #[inline]
    fn energy(&self, i: usize, j: u64) -> f64 {
        let u = rng::uniform(self.master_seed, domain::BRANCH_ENERGY, i as u64, j);
        self.energy_dist.sample(u)
    }
}

/// Branch energies given explicitly, one vector of length `d^i` per generation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplicitEnergies {
    shape: TreeShape,
    levels: Vec<Vec<f64>>,
}

impl ExplicitEnergies {
    pub fn new(d: u64, levels: Vec<Vec<f64>>) -> Result<Self> {
        let shape = TreeShape::new(d, levels.len())?;
        for (i, level) in levels.iter().enumerate() {
            if level.len() as u64 != shape.branches_at(i + 1) {
                return Err(Error::InvalidShape(format!(
                    "generation {} has {} energies, expected {}",
                    i + 1,
                    level.len(),
                    shape.branches_at(i + 1)
                )));
            }
        }
        Ok(Self { shape, levels })
    }

    /// Every branch of a `d`, `n` tree carries energy `c`.
    pub fn constant(d: u64, n: usize, c: f64) -> Result<Self> {
        let shape = TreeShape::new(d, n)?;
        Self::new(
            d,
            (1..=n)
                .map(|i| vec![c; shape.branches_at(i) as usize])
                .collect(),
        )
    }

    /// Copies the energies of any other source (small trees only).
    pub fn materialize<E: BranchEnergies + ?Sized>(source: &E) -> Self {
        let shape = source.shape();
        let levels = (1..=shape.n())
            .map(|i| {
                (0..shape.branches_at(i))
                    .map(|j| source.energy(i, j))
                    .collect()
            })
            .collect();
        Self { shape, levels }
    }

    pub fn set(&mut self, i: usize, j: u64, value: f64) {
        self.levels[i - 1][j as usize] = value;
    }
}

impl BranchEnergies for ExplicitEnergies {
    fn shape(&self) -> TreeShape {
        self.shape
    }

    #[inline]
    fn energy(&self, i: usize, j: u64) -> f64 {
        self.levels[i - 1][j as usize]
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveBeta(beta))
    }
}

/// Log-partition function and Boltzmann-averaged energy of one realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thermodynamics {
    pub log_z: f64,
    pub mean_energy: f64,
}

/// Streaming combination of child subtrees at one node: accumulates
/// `ln Σ e^{a_k}` together with the `e^{a_k}`-weighted mean of `u_k`.
#[derive(Debug, Clone, Copy)]
struct NodeAccumulator {
    max: f64,
    sum: f64,
    weighted: f64,
}

impl NodeAccumulator {
    const EMPTY: Self = Self {
        max: f64::NEG_INFINITY,
        sum: 0.0,
        weighted: 0.0,
    };

    #[inline]
    fn push(&mut self, a: f64, u: f64) {
        if a > self.max {
            let scale = (self.max - a).exp();
            self.sum = self.sum * scale + 1.0;
            self.weighted = self.weighted * scale + u;
            self.max = a;
        } else {
            let w = (a - self.max).exp();
            self.sum += w;
            self.weighted += w * u;
        }
    }

    #[inline]
    fn finish(&self) -> (f64, f64) {
        (self.max + self.sum.ln(), self.weighted / self.sum)
    }
}

struct ThermoFrame {
    j: u64,
    next: u64,
    acc: NodeAccumulator,
}

/// Exact `ln Z_n(β)` and `⟨E⟩` in one depth-first pass.
///
/// Each node carries the pair (subtree log-partition, subtree mean energy);
/// a child branch of energy `ε` contributes `(−βε + L, ε + U)`.
pub fn thermodynamics<E: BranchEnergies + ?Sized>(
    energies: &E,
    beta: f64,
) -> Result<Thermodynamics> {
    check_beta(beta)?;
    let shape = energies.shape();
    let (d, n) = (shape.d(), shape.n());
    let mut stack: Vec<ThermoFrame> = Vec::with_capacity(n);
    stack.push(ThermoFrame {
        j: 0,
        next: 0,
        acc: NodeAccumulator::EMPTY,
    });
    loop {
        let depth = stack.len() - 1;
        let top = stack.last_mut().expect("non-empty stack");
        if depth + 1 == n {
            // children are leaves
            let base = top.j * d;
            for k in 0..d {
                let e = energies.energy(n, base + k);
                top.acc.push(-beta * e, e);
            }
            top.next = d;
        }
        if top.next < d {
            let child = top.j * d + top.next;
            top.next += 1;
            stack.push(ThermoFrame {
                j: child,
                next: 0,
                acc: NodeAccumulator::EMPTY,
            });
            continue;
        }
        let (log_z, mean_energy) = top.acc.finish();
        let finished_j = top.j;
        stack.pop();
        match stack.last_mut() {
            None => return Ok(Thermodynamics { log_z, mean_energy }),
            Some(parent) => {
                let e = energies.energy(depth, finished_j);
                parent.acc.push(-beta * e + log_z, e + mean_energy);
            }
        }
    }
}

/// `ln Z_n(β) = ln Σ_w exp(−β E(w))`.
pub fn log_partition_function<E: BranchEnergies + ?Sized>(energies: &E, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let shape = energies.shape();
    let (d, n) = (shape.d(), shape.n());
    // (j, next child, accumulator) per level; same walk as `thermodynamics`
    // without the energy bookkeeping.
    let mut stack: Vec<(u64, u64, crate::stats::LogSumExp)> = Vec::with_capacity(n);
    stack.push((0, 0, crate::stats::LogSumExp::new()));
    loop {
        let depth = stack.len() - 1;
        let top = stack.last_mut().expect("non-empty stack");
        if depth + 1 == n {
            let base = top.0 * d;
            for k in 0..d {
                top.2.push(-beta * energies.energy(n, base + k));
            }
            top.1 = d;
        }
        if top.1 < d {
            let child = top.0 * d + top.1;
            top.1 += 1;
            stack.push((child, 0, crate::stats::LogSumExp::new()));
            continue;
        }
        let value = top.2.value();
        let finished_j = top.0;
        stack.pop();
        match stack.last_mut() {
            None => return Ok(value),
            Some(parent) => parent
                .2
                .push(-beta * energies.energy(depth, finished_j) + value),
        }
    }
}

/// Per-step free energy `f_n(β) = ln Z_n(β) / (nβ)`.
pub fn free_energy_per_step<E: BranchEnergies + ?Sized>(energies: &E, beta: f64) -> Result<f64> {
    let log_z = log_partition_function(energies, beta)?;
    Ok(log_z / (energies.shape().n() as f64 * beta))
}

/// Boltzmann-averaged walk energy `Σ_w E(w) e^{−βE(w)} / Z`.
pub fn internal_energy<E: BranchEnergies + ?Sized>(energies: &E, beta: f64) -> Result<f64> {
    Ok(thermodynamics(energies, beta)?.mean_energy)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundState {
    pub walk: Walk,
    pub energy: f64,
}

/// Minimum-energy walk, ties broken towards the lexicographically smallest walk.
///
/// Walk energies are accumulated front to back, `((ε_1 + ε_2) + …) + ε_n`.
pub fn ground_state<E: BranchEnergies + ?Sized>(energies: &E) -> GroundState {
    let shape = energies.shape();
    let (d, n) = (shape.d(), shape.n());
    let mut best = f64::INFINITY;
    let mut best_leaf = 0u64;
    // (j, next child, energy of the path down to and including branch j)
    let mut stack: Vec<(u64, u64, f64)> = Vec::with_capacity(n);
    stack.push((0, 0, 0.0));
    while !stack.is_empty() {
        let depth = stack.len() - 1;
        let top = &mut stack[depth];
        if depth + 1 == n {
            let (j, prefix) = (top.0, top.2);
            for k in 0..d {
                let leaf = j * d + k;
                let total = prefix + energies.energy(n, leaf);
                if total < best {
                    best = total;
                    best_leaf = leaf;
                }
            }
            stack.pop();
            continue;
        }
        if top.1 < d {
            let child = top.0 * d + top.1;
            top.1 += 1;
            let prefix = top.2 + energies.energy(depth + 1, child);
            stack.push((child, 0, prefix));
        } else {
            stack.pop();
        }
    }
    GroundState {
        walk: Walk::from_leaf(best_leaf, shape),
        energy: best,
    }
}

/// Statistics of `f_n(β)` over independent tree realizations.
///
/// Trial `t` uses the oracle seeded by `derive_seed(master_seed, t)`; slots
/// are filled in parallel and reduced in slot order.
pub fn monte_carlo_free_energy(
    shape: TreeShape,
    energy_dist: &EnergyDistribution,
    beta: f64,
    trials: usize,
    master_seed: u64,
) -> Result<SampleStats> {
    check_beta(beta)?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let values = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let oracle =
                BranchEnergyOracle::new(trial_seed(master_seed, t), energy_dist.clone(), shape);
            free_energy_per_step(&oracle, beta)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SampleStats::from_values(values))
}

/// Oracle seed of Monte-Carlo trial `t`.
pub fn trial_seed(master_seed: u64, t: u64) -> u64 {
    rng::derive_seed(master_seed, domain::DPRM_TRIAL, t)
}
