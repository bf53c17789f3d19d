//! Two-sample hypothesis tests, p-value knee selection, and Gaussian kernel
//! density estimation.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

/// Outcome of a two-sample test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Which two-sample test to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TestKind {
    #[default]
    Ks,
    Student,
}

impl TestKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "ks" => Ok(TestKind::Ks),
            "student" => Ok(TestKind::Student),
            other => Err(Error::validation(format!("unknown test kind: {other}"))),
        }
    }

    pub fn run(&self, x: &[f64], y: &[f64]) -> Result<TestResult> {
        match self {
            TestKind::Ks => ks_two_sample(x, y),
            TestKind::Student => welch_t_two_sample(x, y),
        }
    }
}

/// Survival function of the Kolmogorov distribution,
/// Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2k²λ²), truncated at 100 terms.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test.
///
/// The statistic is sup |ECDF_x − ECDF_y|; the p-value comes from the
/// asymptotic Kolmogorov distribution at λ = √n_e · D with the effective
/// size n_e = |x||y| / (|x| + |y|).
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::validation("KS test requires non-empty samples"));
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let n = xs.len();
    let m = ys.len();
    let mut stat = 0.0f64;
    let (mut i, mut j) = (0usize, 0usize);
    while i < n && j < m {
        let v = xs[i].min(ys[j]);
        while i < n && xs[i] == v {
            i += 1;
        }
        while j < m && ys[j] == v {
            j += 1;
        }
        let diff = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        if diff > stat {
            stat = diff;
        }
    }
    let effective = (n * m) as f64 / (n + m) as f64;
    let p_value = kolmogorov_sf(effective.sqrt() * stat);
    Ok(TestResult { statistic: stat, p_value })
}

/// Welch's unequal-variance t test with a two-sided p-value.
pub fn welch_t_two_sample(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::validation("Welch test requires at least 2 samples per side"));
    }
    let n = x.len() as f64;
    let m = y.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / m;
    let var_x = x.iter().map(|v| (v - mean_x).powi(2)).sum::<f64>() / (n - 1.0);
    let var_y = y.iter().map(|v| (v - mean_y).powi(2)).sum::<f64>() / (m - 1.0);
    let se2 = var_x / n + var_y / m;
    if se2 == 0.0 {
        // Degenerate: both samples constant.
        return Ok(if mean_x == mean_y {
            TestResult { statistic: 0.0, p_value: 1.0 }
        } else {
            TestResult { statistic: f64::INFINITY, p_value: 0.0 }
        });
    }
    let statistic = (mean_x - mean_y) / se2.sqrt();
    let df = se2.powi(2)
        / ((var_x / n).powi(2) / (n - 1.0) + (var_y / m).powi(2) / (m - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::validation(format!("invalid t distribution: {e}")))?;
    let p_value = (2.0 * dist.cdf(-statistic.abs())).clamp(0.0, 1.0);
    Ok(TestResult { statistic, p_value })
}

/// Picks a confidence level from observed p-values by knee detection.
///
/// Sorts ascending and returns the p-value whose point lies farthest from
/// the chord joining the smallest and largest values, clamped to (0, 0.2].
pub fn pvalue_threshold(pvalues: &[f64]) -> Result<f64> {
    if pvalues.len() < 3 {
        return Err(Error::validation("knee detection requires at least 3 p-values"));
    }
    let mut sorted = pvalues.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let (y0, y1) = (sorted[0], sorted[n - 1]);
    let alpha = if y1 == y0 {
        y0
    } else {
        // Perpendicular distance from (i, p_i) to the chord through
        // (0, y0) and (n−1, y1); the scale factor is common to every point
        // so the slope-normalized form suffices for the argmax.
        let slope = (y1 - y0) / (n - 1) as f64;
        let mut best_idx = 0;
        let mut best = -1.0;
        for (i, &p) in sorted.iter().enumerate() {
            let d = (y0 + slope * i as f64 - p).abs();
            if d > best {
                best = d;
                best_idx = i;
            }
        }
        sorted[best_idx]
    };
    Ok(alpha.clamp(1e-12, 0.2))
}

/// Scott's rule-of-thumb bandwidth h = 1.06·σ·n^(−1/5).
pub fn scott_bandwidth(sigma: f64, n: usize) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::validation(format!("sigma must be positive, got {sigma}")));
    }
    if n == 0 {
        return Err(Error::validation("bandwidth requires at least one sample"));
    }
    Ok(1.06 * sigma * (n as f64).powf(-0.2))
}

/// Gaussian kernel density model over a fixed set of centers.
#[derive(Debug, Clone)]
pub struct KdeModel {
    centers: Vec<f64>,
    bandwidth: f64,
}

const DENSITY_FLOOR: f64 = 1e-300;

impl KdeModel {
    pub fn new(centers: Vec<f64>, bandwidth: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::validation("KDE requires at least one center"));
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::validation(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(KdeModel { centers, bandwidth })
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// log f̂(x) for a single point, evaluated with log-sum-exp and floored
    /// at 1e-300 so downstream likelihood sums stay finite.
    pub fn log_density(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let n = self.centers.len() as f64;
        let log_norm = -(n.ln() + h.ln() + 0.5 * (2.0 * std::f64::consts::PI).ln());
        let mut max_exp = f64::NEG_INFINITY;
        for &c in &self.centers {
            let z = (x - c) / h;
            let e = -0.5 * z * z;
            if e > max_exp {
                max_exp = e;
            }
        }
        if max_exp == f64::NEG_INFINITY {
            return DENSITY_FLOOR.ln();
        }
        let sum: f64 = self.centers.iter().map(|&c| {
            let z = (x - c) / h;
            (-0.5 * z * z - max_exp).exp()
        }).sum();
        let log_density = log_norm + max_exp + sum.ln();
        log_density.max(DENSITY_FLOOR.ln())
    }
}

/// Evaluates log densities for a batch of points.
pub fn kde_log_density(model: &KdeModel, points: &[f64]) -> Vec<f64> {
    points.iter().map(|&x| model.log_density(x)).collect()
}
