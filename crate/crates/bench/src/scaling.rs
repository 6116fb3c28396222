//! Log-log slope of query depth against 1/ε.

use std::collections::BTreeMap;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{BenchError, Result};
use crate::record::CsvRow;

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    /// 95% confidence band for the slope.
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

/// Least-squares fit of log y against log x. Needs at least three distinct
/// x values spanning a factor of 8.
pub fn fit_log_log(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(BenchError::Invalid("x and y lengths differ".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(BenchError::Invalid("values must be positive and finite".into()));
    }
    let mut distinct: Vec<f64> = xs.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 || distinct[distinct.len() - 1] / distinct[0] < 8.0 * (1.0 - 1e-12) {
        return Err(BenchError::Invalid("need at least 3 distinct values spanning 8x".into()));
    }
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let dof = n - 2.0;
    let stderr = if dof > 0.0 { (sse / dof / sxx).sqrt() } else { 0.0 };
    let t = if dof > 0.0 {
        StudentsT::new(0.0, 1.0, dof).map(|d| d.inverse_cdf(0.975)).unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    };
    let half = if stderr == 0.0 { 0.0 } else { t * stderr };
    Ok(SlopeFit {
        slope,
        intercept,
        stderr,
        lo: slope - half,
        hi: slope + half,
        points: xs.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingLine {
    pub method: String,
    pub problem: String,
    pub d: usize,
    pub fit: SlopeFit,
}

/// One fit per (method, problem, d) group of rows, regressing every row's
/// query depth on 1/ε.
pub fn depth_scaling_report(rows: &[CsvRow]) -> Vec<std::result::Result<ScalingLine, (String, BenchError)>> {
    let mut groups: BTreeMap<(String, String, usize), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let g = groups.entry((r.method.clone(), r.problem.clone(), r.d)).or_default();
        g.0.push(1.0 / r.eps);
        g.1.push(r.query_depth as f64);
    }
    groups
        .into_iter()
        .map(|((method, problem, d), (x, y))| {
            let label = format!("{method}/{problem}/d={d}");
            fit_log_log(&x, &y)
                .map(|fit| ScalingLine { method, problem, d, fit })
                .map_err(|e| (label, e))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let xs = [5.0, 10.0, 20.0, 40.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(2.0 / 3.0)).collect();
        let f = fit_log_log(&xs, &ys).unwrap();
        assert!((f.slope - 2.0 / 3.0).abs() < 1e-6);
        assert!(f.stderr < 1e-9);
    }

    #[test]
    fn narrow_range_rejected() {
        assert!(fit_log_log(&[1.0, 2.0, 4.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_log_log(&[1.0, 8.0], &[1.0, 2.0]).is_err());
        assert!(fit_log_log(&[1.0, 2.0, 8.0], &[1.0, 2.0, 3.0]).is_ok());
    }
}
