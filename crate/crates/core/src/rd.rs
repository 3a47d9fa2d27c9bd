//! Rate-distortion numerics.
//!
//! The curve is traced by slope: for each β ≥ 0, Blahut–Arimoto minimizes
//! `I(X;Y) + β·E ρ(X,Y)` and returns the point `(R(β), D(β))` together with
//! the optimal output marginal Q*. Rates are in nats.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    check_symmetry, induced_energy_distribution, CodingDistribution, DistortionMatrix, SourceModel,
    SymmetryReport,
};
use crate::stats::LogSumExp;
use crate::theory::{d0_of_r, log_mgf, tilted_mean};

/// Stopping tolerance (total variation between successive marginals) used by
/// [`distortion_rate`].
pub const BA_TOL: f64 = 1e-13;
pub const BA_MAX_ITER: usize = 200_000;

/// Slope at which the curve is taken to have reached its zero-distortion end.
pub const RD_BETA_MAX: f64 = 1e4;

/// |R(β) − target| accepted by the slope bisection.
pub const RATE_MATCH_TOL: f64 = 1e-8;

/// Tolerance used when checking Q* against the symmetry condition.
pub const Q_STAR_SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RdPoint {
    pub beta: f64,
    /// Nats per symbol.
    pub rate: f64,
    pub distortion: f64,
    pub q_star: CodingDistribution,
    pub iterations: usize,
    pub converged: bool,
}

fn check_dims(source: &SourceModel, rho: &DistortionMatrix) -> Result<()> {
    if source.alphabet_size() != rho.rows() {
        return Err(Error::DimensionMismatch(format!(
            "source has {} letters, distortion matrix has {} rows",
            source.alphabet_size(),
            rho.rows()
        )));
    }
    Ok(())
}

/// Test channel `W(y|x) ∝ q(y) e^{−βρ(x,y)}`, row-major.
fn test_channel(source: &SourceModel, rho: &DistortionMatrix, q: &[f64], beta: f64) -> Vec<f64> {
    let ny = rho.cols();
    let mut w = vec![0.0; source.alphabet_size() * ny];
    let mut logits = vec![0.0; ny];
    for x in 0..source.alphabet_size() {
        let mut acc = LogSumExp::new();
        for y in 0..ny {
            logits[y] = q[y].ln() - beta * rho.get(x, y);
            acc.push(logits[y]);
        }
        let norm = acc.value();
        for y in 0..ny {
            w[x * ny + y] = (logits[y] - norm).exp();
        }
    }
    w
}

fn output_marginal(source: &SourceModel, w: &[f64], ny: usize) -> Vec<f64> {
    let mut q = vec![0.0; ny];
    for (x, p) in source.probs().iter().enumerate() {
        for y in 0..ny {
            q[y] += p * w[x * ny + y];
        }
    }
    q
}

/// Blahut–Arimoto at slope `beta`, started from the uniform output marginal.
///
/// Stops once successive output marginals are within `tol` in total
/// variation. Hitting `max_iter` is reported through `converged`, not as an
/// error.
pub fn blahut_arimoto(
    source: &SourceModel,
    rho: &DistortionMatrix,
    beta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<RdPoint> {
    check_dims(source, rho)?;
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "slope must be >= 0, got {beta}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be > 0, got {tol}"
        )));
    }
    let ny = rho.cols();

    if beta == 0.0 {
        // Rate-zero end: every x maps to the single y minimizing E_P ρ(X, y).
        let expected: Vec<f64> = (0..ny)
            .map(|y| {
                source
                    .probs()
                    .iter()
                    .enumerate()
                    .map(|(x, p)| p * rho.get(x, y))
                    .sum()
            })
            .collect();
        let best = (0..ny)
            .min_by(|&a, &b| expected[a].total_cmp(&expected[b]))
            .expect("non-empty alphabet");
        let mut q = vec![0.0; ny];
        q[best] = 1.0;
        return Ok(RdPoint {
            beta,
            rate: 0.0,
            distortion: expected[best],
            q_star: CodingDistribution::new(&q)?,
            iterations: 0,
            converged: true,
        });
    }

    let mut q = vec![1.0 / ny as f64; ny];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let w = test_channel(source, rho, &q, beta);
        let next = output_marginal(source, &w, ny);
        let tv = 0.5 * next.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum::<f64>();
        q = next;
        if tv < tol {
            converged = true;
            break;
        }
    }

    let w = test_channel(source, rho, &q, beta);
    let q_out = output_marginal(source, &w, ny);
    let (mut rate, mut distortion) = (0.0, 0.0);
    for (x, p) in source.probs().iter().enumerate() {
        for y in 0..ny {
            let wy = w[x * ny + y];
            if wy > 0.0 {
                rate += p * wy * (wy / q_out[y]).ln();
                distortion += p * wy * rho.get(x, y);
            }
        }
    }
    let sum: f64 = q_out.iter().sum();
    let q_norm: Vec<f64> = q_out.iter().map(|v| v / sum).collect();
    Ok(RdPoint {
        beta,
        rate: rate.max(0.0),
        distortion,
        q_star: CodingDistribution::new(&q_norm)?,
        iterations,
        converged,
    })
}

/// `(R, D)` from the single-letter representation
/// `R = −min_β [βD + ln Σ_y q*(y) e^{−βρ(x,y)}]` at slope `beta`.
///
/// D is the stationary point, the `e^{−βρ}`-tilted mean of ρ(x, Y) under Q*;
/// x is immaterial under the symmetry condition, which is checked.
pub fn rd_point_parametric(
    source: &SourceModel,
    q_star: &CodingDistribution,
    rho: &DistortionMatrix,
    beta: f64,
) -> Result<(f64, f64)> {
    check_dims(source, rho)?;
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "slope must be >= 0, got {beta}"
        )));
    }
    let report = check_symmetry(q_star, rho, Q_STAR_SYMMETRY_TOL)?;
    if !report.symmetric {
        return Err(Error::SymmetryViolation(report.to_string()));
    }
    let law = induced_energy_distribution(q_star, rho, 0)?;
    let distortion = tilted_mean(&law, beta);
    let rate = -(beta * distortion + log_mgf(&law, beta));
    Ok((rate, distortion))
}

/// A point of the distortion-rate function at a prescribed rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionRate {
    pub rate: f64,
    pub distortion: f64,
    /// Matching slope, `None` for the degenerate end.
    pub beta: Option<f64>,
    pub q_star: CodingDistribution,
    /// The rate reaches R(D_min): D(R) is the smallest achievable distortion
    /// and no finite slope attains it.
    pub degenerate: bool,
}

/// D(R) by bisection on the slope until `|R(β) − rate| ≤ 1e-8`.
pub fn distortion_rate(
    source: &SourceModel,
    rho: &DistortionMatrix,
    rate: f64,
) -> Result<DistortionRate> {
    check_dims(source, rho)?;
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "rate must be >= 0, got {rate}"
        )));
    }
    let solve = |beta: f64| blahut_arimoto(source, rho, beta, BA_TOL, BA_MAX_ITER);

    let top = solve(RD_BETA_MAX)?;
    if rate >= top.rate - RATE_MATCH_TOL {
        let d_min = source
            .probs()
            .iter()
            .enumerate()
            .map(|(x, p)| p * rho.row(x).iter().copied().fold(f64::INFINITY, f64::min))
            .sum();
        return Ok(DistortionRate {
            rate,
            distortion: d_min,
            beta: None,
            q_star: top.q_star,
            degenerate: true,
        });
    }
    if rate == 0.0 {
        let p = solve(0.0)?;
        return Ok(DistortionRate {
            rate,
            distortion: p.distortion,
            beta: Some(0.0),
            q_star: p.q_star,
            degenerate: false,
        });
    }

    let (mut lo, mut hi) = (1e-4, 50.0);
    while solve(hi)?.rate < rate && hi < RD_BETA_MAX {
        lo = hi;
        hi = (hi * 2.0).min(RD_BETA_MAX);
    }
    while solve(lo)?.rate > rate && lo > 1e-12 {
        hi = lo;
        lo *= 0.5;
    }
    let mut best = solve(0.5 * (lo + hi))?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        best = solve(mid)?;
        if (best.rate - rate).abs() <= RATE_MATCH_TOL {
            break;
        }
        if best.rate < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(DistortionRate {
        rate,
        distortion: best.distortion,
        beta: Some(best.beta),
        q_star: best.q_star,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum Verdict {
    Pass,
    Fail,
    /// The symmetry hypothesis fails for Q*.
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremCheck {
    pub d: u64,
    pub rate: f64,
    pub d_of_r: DistortionRate,
    pub symmetry: SymmetryReport,
    /// D₀(R) with Q = Q*; absent when the symmetry check fails.
    pub d0: Option<f64>,
    pub d0_degenerate: Option<bool>,
    pub gap: Option<f64>,
    pub tol: f64,
    pub verdict: Verdict,
}

/// Computes D(ln d), Q*, and D₀(ln d) with Q = Q*, and compares them.
pub fn verify_d0_equals_d(
    source: &SourceModel,
    rho: &DistortionMatrix,
    d: u64,
    tol: f64,
) -> Result<TheoremCheck> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("branching ratio {d} < 2")));
    }
    let rate = (d as f64).ln();
    let d_of_r = distortion_rate(source, rho, rate)?;
    let symmetry = check_symmetry(&d_of_r.q_star, rho, Q_STAR_SYMMETRY_TOL)?;
    if !symmetry.symmetric {
        return Ok(TheoremCheck {
            d,
            rate,
            d_of_r,
            symmetry,
            d0: None,
            d0_degenerate: None,
            gap: None,
            tol,
            verdict: Verdict::NotApplicable,
        });
    }
    let bound = d0_of_r(&d_of_r.q_star, rho, rate)?;
    let gap = (bound.value - d_of_r.distortion).abs();
    let verdict = if gap <= tol && bound.degenerate == d_of_r.degenerate {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(TheoremCheck {
        d,
        rate,
        d0: Some(bound.value),
        d0_degenerate: Some(bound.degenerate),
        gap: Some(gap),
        d_of_r,
        symmetry,
        tol,
        verdict,
    })
}
