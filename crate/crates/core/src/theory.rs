//! Closed-form limits: the log moment generating function, the annealed curve
//! φ(β) = ln[d·E e^{−βε}]/β, its minimizer β_c, the piecewise free-energy
//! limit, and the tree-code distortion bound D₀(R) = −φ(β_c).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    check_symmetry, induced_energy_distribution, CodingDistribution, DistortionMatrix,
    EnergyDistribution,
};
use crate::stats::LogSumExp;

/// Largest inverse temperature explored when bracketing β_c.
pub const BETA_MAX: f64 = 1e4;

/// Relative bisection tolerance for β_c.
pub const BETA_C_REL_TOL: f64 = 1e-10;

/// Tolerance used when `d0_of_r` checks the symmetry hypothesis.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// `ln E{e^{−βε}}`.
pub fn log_mgf(dist: &EnergyDistribution, beta: f64) -> f64 {
    match dist {
        EnergyDistribution::Discrete { values, probs, .. } => {
            let mut acc = LogSumExp::new();
            for (v, p) in values.iter().zip(probs) {
                acc.push(p.ln() - beta * v);
            }
            acc.value()
        }
        EnergyDistribution::Gaussian { mean, std } => -beta * mean + 0.5 * beta * beta * std * std,
    }
}

/// Mean of ε under the tilted law `e^{−βε} q(ε) / M(β)`, i.e. `−(d/dβ) ln M(β)`.
pub fn tilted_mean(dist: &EnergyDistribution, beta: f64) -> f64 {
    match dist {
        EnergyDistribution::Discrete { values, probs, .. } => {
            let (sum, weighted) = shifted_moments(values, probs, beta);
            values[0] + weighted / sum
        }
        EnergyDistribution::Gaussian { mean, std } => mean - beta * std * std,
    }
}

/// `(S, T)` with `S = Σ p e^{−β(ε−ε_min)}` and `T = Σ p (ε−ε_min) e^{−β(ε−ε_min)}`.
/// Atoms are sorted, so `values[0]` is ε_min.
fn shifted_moments(values: &[f64], probs: &[f64], beta: f64) -> (f64, f64) {
    let lo = values[0];
    values.iter().zip(probs).fold((0.0, 0.0), |(s, t), (v, p)| {
        let delta = v - lo;
        let w = p * (-beta * delta).exp();
        (s + w, t + w * delta)
    })
}

/// `ln(d·S)`, with the ε_min atom split off so that `d·p_min ≈ 1` does not
/// lose everything to cancellation.
fn ln_d_shifted(values: &[f64], probs: &[f64], d: u64, beta: f64) -> f64 {
    let df = d as f64;
    let lo = values[0];
    let rest: f64 = values[1..]
        .iter()
        .zip(&probs[1..])
        .map(|(v, p)| p * (-beta * (v - lo)).exp())
        .sum();
    (df.mul_add(probs[0], -1.0) + df * rest).ln_1p()
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveBeta(beta))
    }
}

fn check_d(d: u64) -> Result<()> {
    if d < 1 {
        return Err(Error::InvalidShape(format!("branching ratio {d} < 1")));
    }
    Ok(())
}

/// φ(β) = (ln d + ln E e^{−βε}) / β.
pub fn phi(dist: &EnergyDistribution, d: u64, beta: f64) -> Result<f64> {
    check_d(d)?;
    check_beta(beta)?;
    let num = match dist {
        EnergyDistribution::Discrete { values, probs, .. } => {
            ln_d_shifted(values, probs, d, beta) - beta * values[0]
        }
        EnergyDistribution::Gaussian { .. } => (d as f64).ln() + log_mgf(dist, beta),
    };
    Ok(num / beta)
}

/// β²·φ′(β) = −β⟨ε⟩_β − ln d − ln M(β), evaluated without cancelling large terms.
///
/// Nondecreasing in β (its derivative is β·Var_β(ε)); starts at −ln d.
pub fn stationarity(dist: &EnergyDistribution, d: u64, beta: f64) -> f64 {
    let ln_d = (d as f64).ln();
    match dist {
        EnergyDistribution::Discrete { values, probs, .. } => {
            let (s, t) = shifted_moments(values, probs, beta);
            -beta * t / s - ln_d_shifted(values, probs, d, beta)
        }
        EnergyDistribution::Gaussian { std, .. } => 0.5 * beta * beta * std * std - ln_d,
    }
}

/// Why β_c does not exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoTransition {
    /// d = 1: there is no branching, φ has no interior minimum.
    NoBranching,
    /// φ keeps decreasing up to [`BETA_MAX`].
    MonotonePhi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalBeta {
    Finite(f64),
    Infinite(NoTransition),
}

impl CriticalBeta {
    pub fn finite(&self) -> Option<f64> {
        match self {
            Self::Finite(b) => Some(*b),
            Self::Infinite(_) => None,
        }
    }
}

/// The minimizer of φ, found by bracketing and bisecting the stationarity
/// condition β·(ln M)′ = ln d + ln M.
pub fn beta_c(dist: &EnergyDistribution, d: u64) -> Result<CriticalBeta> {
    check_d(d)?;
    if d == 1 {
        return Ok(CriticalBeta::Infinite(NoTransition::NoBranching));
    }
    let ln_d = (d as f64).ln();
    // Rounding can leave g a few ulps above 0 when the limit is exactly 0.
    let positive = |g: f64| g > 1e-12 * ln_d.max(1.0);

    let mut lo = 0.0;
    let mut hi = 1.0;
    while !positive(stationarity(dist, d, hi)) {
        if hi >= BETA_MAX {
            return Ok(CriticalBeta::Infinite(NoTransition::MonotonePhi));
        }
        lo = hi;
        hi = (hi * 2.0).min(BETA_MAX);
    }
    while hi - lo > BETA_C_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if stationarity(dist, d, mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(CriticalBeta::Finite(0.5 * (lo + hi)))
}

/// The almost-sure limit of the per-step free energy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeEnergyLimit {
    pub beta_c: CriticalBeta,
    /// φ(β_c) when β_c is finite.
    pub phi_at_beta_c: Option<f64>,
    pub energy_dist: EnergyDistribution,
    pub d: u64,
}

impl FreeEnergyLimit {
    pub fn new(energy_dist: EnergyDistribution, d: u64) -> Result<Self> {
        let beta_c = beta_c(&energy_dist, d)?;
        let phi_at_beta_c = match beta_c {
            CriticalBeta::Finite(b) => Some(phi(&energy_dist, d, b)?),
            CriticalBeta::Infinite(_) => None,
        };
        Ok(Self {
            beta_c,
            phi_at_beta_c,
            energy_dist,
            d,
        })
    }

    pub fn phi(&self, beta: f64) -> Result<f64> {
        phi(&self.energy_dist, self.d, beta)
    }

    /// f(β) = φ(β) for β ≤ β_c and φ(β_c) beyond.
    pub fn f(&self, beta: f64) -> Result<f64> {
        check_beta(beta)?;
        match (self.beta_c, self.phi_at_beta_c) {
            (CriticalBeta::Finite(bc), Some(frozen)) if beta > bc => Ok(frozen),
            _ => self.phi(beta),
        }
    }
}

/// f(β) for a single β; see [`FreeEnergyLimit`] to evaluate many.
pub fn f_limit(dist: &EnergyDistribution, d: u64, beta: f64) -> Result<f64> {
    FreeEnergyLimit::new(dist.clone(), d)?.f(beta)
}

/// Recovers `d` from `R = ln d`.
pub fn branching_from_rate(rate: f64) -> Result<u64> {
    if !rate.is_finite() || rate <= 0.0 {
        return Err(Error::RateNotLogInteger(rate));
    }
    let d = rate.exp().round();
    if d < 2.0 || d > u64::MAX as f64 || (d.ln() - rate).abs() > 1e-9 {
        return Err(Error::RateNotLogInteger(rate));
    }
    Ok(d as u64)
}

/// The ensemble's almost-sure per-symbol distortion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionBound {
    pub value: f64,
    pub beta_c: CriticalBeta,
    /// β_c is infinite: the maximum over β is a supremum approached as β → ∞.
    pub degenerate: bool,
    /// −φ(β) at [`BETA_MAX`], reported alongside degenerate values.
    pub value_at_beta_max: f64,
}

/// D₀(R) = max_{β>0} −(ln E e^{−βρ(x,Y)} + R)/β = −φ(β_c).
///
/// When β_c is infinite, −φ increases towards its supremum, the smallest atom
/// of ρ(x, Y); that limit is returned with `degenerate` set.
pub fn d0_of_r(
    q: &CodingDistribution,
    rho: &DistortionMatrix,
    rate: f64,
) -> Result<DistortionBound> {
    let d = branching_from_rate(rate)?;
    let report = check_symmetry(q, rho, SYMMETRY_TOL)?;
    if !report.symmetric {
        return Err(Error::SymmetryViolation(report.to_string()));
    }
    let dist = induced_energy_distribution(q, rho, 0)?;
    let limit = FreeEnergyLimit::new(dist, d)?;
    let value_at_beta_max = -limit.phi(BETA_MAX)?;
    Ok(match limit.phi_at_beta_c {
        Some(frozen) => DistortionBound {
            value: -frozen,
            beta_c: limit.beta_c,
            degenerate: false,
            value_at_beta_max,
        },
        None => DistortionBound {
            value: limit
                .energy_dist
                .min_atom()
                .expect("induced laws are discrete"),
            beta_c: limit.beta_c,
            degenerate: true,
            value_at_beta_max,
        },
    })
}
