use serde::Serialize;

/// Sample summary of a vector of per-trial values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleStats {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single value.
    pub std: f64,
    pub values: Vec<f64>,
}

impl SampleStats {
    /// Summarizes `values` in slot order, so the result does not depend on the
    /// order in which the slots were filled.
    pub fn from_values(values: Vec<f64>) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                values,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std, values }
    }
}

/// Numerically stable `ln(sum(exp(x)))` over an iterator.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = LogSumExp::new();
    for x in xs {
        acc.push(x);
    }
    acc.value()
}

/// Streaming log-sum-exp accumulator.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSumExp {
    pub fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.sum += (x - self.max).exp();
        }
    }

    pub fn value(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_basic() {
        let s = SampleStats::from_values(vec![1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 1.0).abs() < 1e-15);
        assert_eq!(SampleStats::from_values(vec![4.0]).std, 0.0);
    }

    #[test]
    fn lse_matches_naive() {
        let xs = [0.1, -2.0, 3.5, 1.0];
        let naive = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(xs) - naive).abs() < 1e-14);
        assert_eq!(log_sum_exp(Vec::<f64>::new()), f64::NEG_INFINITY);
        // far below underflow
        assert!((log_sum_exp([-2000.0, -2000.0]) - (-2000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
