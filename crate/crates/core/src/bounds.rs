//! Asymptotic ARL and EDD bounds for the consensus detector.
//!
//! All `o(1)` corrections are evaluated as zero: the functions return the
//! asymptotic dominant term only, which is what gets overlaid on simulations.
//!
//! ```text
//! ARL ≥ exp{ (−μ₁) b/σ₁² · [2N − 2(N/(N+1))²]
//!            + √(−μ₁) μ₁ λ₂ / (σ₁²(1−λ₂)) · (4N² − 4N(N/(N+1))²) · √b }
//! EDD ≤ b / μ₂
//! EDD ≤ log γ / (N μ₂) · σ₁² / (−2μ₁ (1 − N/(N+1)²))     when ARL ≥ γ
//! ```

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::stats::format_float;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub b: f64,
    pub n: usize,
    pub mu1: f64,
    pub sigma1: f64,
    pub mu2: f64,
    pub lambda2: f64,
    pub gamma: Option<f64>,
}

fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

impl BoundInputs {
    fn check_arl(&self) -> Result<()> {
        if self.n == 0 {
            return Err(domain("N must be at least 1"));
        }
        if !(self.b.is_finite() && self.b >= 0.0) {
            return Err(domain(format!("threshold must be finite and >= 0, got {}", self.b)));
        }
        if !(self.mu1 < 0.0) {
            return Err(domain(format!("mu1 must be negative, got {}", self.mu1)));
        }
        if !(self.sigma1 > 0.0) {
            return Err(domain(format!("sigma1 must be positive, got {}", self.sigma1)));
        }
        if !(0.0..1.0).contains(&self.lambda2) {
            return Err(domain(format!(
                "lambda2 must lie in [0, 1), got {}; the bound degenerates at lambda2 = 1",
                self.lambda2
            )));
        }
        Ok(())
    }

    /// Coefficients `(a, c)` of the exponent `a·b + c·√b`.
    fn arl_exponent_coefficients(&self) -> (f64, f64) {
        let n = self.n as f64;
        let ratio_sq = (n / (n + 1.0)).powi(2);
        let var = self.sigma1 * self.sigma1;
        let linear = -self.mu1 / var * (2.0 * n - 2.0 * ratio_sq);
        let root = (-self.mu1).sqrt() * self.mu1 * self.lambda2 / (var * (1.0 - self.lambda2))
            * (4.0 * n * n - 4.0 * n * ratio_sq);
        (linear, root)
    }
}

/// Lower bound on the ARL.
pub fn arl_lower_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.check_arl()?;
    let (a, c) = inputs.arl_exponent_coefficients();
    Ok((a * inputs.b + c * inputs.b.sqrt()).exp())
}

/// Threshold at the vertex of the exponent, viewed as a quadratic in `√b`.
/// The ARL bound is strictly increasing for `b` beyond it.
pub fn arl_bound_vertex(inputs: &BoundInputs) -> Result<f64> {
    inputs.check_arl()?;
    let (a, c) = inputs.arl_exponent_coefficients();
    let root = (-c / (2.0 * a)).max(0.0);
    Ok(root * root)
}

/// Upper bound `b/μ₂` on the EDD.
pub fn edd_upper_bound(inputs: &BoundInputs) -> Result<f64> {
    if !(inputs.mu2 > 0.0) {
        return Err(domain(format!("mu2 must be positive, got {}", inputs.mu2)));
    }
    if !(inputs.b.is_finite() && inputs.b >= 0.0) {
        return Err(domain(format!("threshold must be finite and >= 0, got {}", inputs.b)));
    }
    Ok(inputs.b / inputs.mu2)
}

/// Upper bound on the EDD of a procedure whose ARL is at least `gamma`.
pub fn edd_given_arl_bound(inputs: &BoundInputs) -> Result<f64> {
    let gamma = inputs
        .gamma
        .ok_or_else(|| domain("the EDD-given-ARL bound needs a target ARL gamma"))?;
    if !(gamma > 1.0 && gamma.is_finite()) {
        return Err(domain(format!("gamma must be finite and > 1, got {gamma}")));
    }
    if inputs.n == 0 {
        return Err(domain("N must be at least 1"));
    }
    if !(inputs.mu2 > 0.0) {
        return Err(domain(format!("mu2 must be positive, got {}", inputs.mu2)));
    }
    if !(inputs.mu1 < 0.0) {
        return Err(domain(format!("mu1 must be negative, got {}", inputs.mu1)));
    }
    if !(inputs.sigma1 > 0.0) {
        return Err(domain(format!("sigma1 must be positive, got {}", inputs.sigma1)));
    }
    let n = inputs.n as f64;
    let var = inputs.sigma1 * inputs.sigma1;
    Ok(gamma.ln() / (n * inputs.mu2) * var / (-2.0 * inputs.mu1 * (1.0 - n / ((n + 1.0) * (n + 1.0)))))
}

pub const BOUND_CSV_HEADER: [&str; 4] = ["b", "arl_lower_bound", "edd_upper_bound", "edd_given_arl_bound"];

/// Bound curves over a threshold grid.
///
/// With `inputs.gamma` unset, the EDD-given-ARL column uses `γ` equal to the
/// row's ARL bound and is left empty where that is not above 1.
pub fn write_bound_curves<W: Write>(mut out: W, inputs: &BoundInputs, grid: &[f64]) -> Result<W> {
    let io_err = |e: io::Error| Error::usage(format!("write failed: {e}"));
    writeln!(out, "{}", BOUND_CSV_HEADER.join(",")).map_err(io_err)?;
    for &b in grid {
        let row = BoundInputs { b, ..*inputs };
        let arl = arl_lower_bound(&row)?;
        let edd = edd_upper_bound(&row)?;
        let gamma = inputs.gamma.unwrap_or(arl);
        let given = if gamma > 1.0 {
            format_float(edd_given_arl_bound(&BoundInputs { gamma: Some(gamma), ..row })?)
        } else {
            String::new()
        };
        writeln!(out, "{},{},{},{given}", format_float(b), format_float(arl), format_float(edd)).map_err(io_err)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> BoundInputs {
        BoundInputs {
            b: 10.0,
            n: 1,
            mu1: -0.5,
            sigma1: 1.0,
            mu2: 0.5,
            lambda2: 0.0,
            gamma: None,
        }
    }

    #[test]
    fn arl_bound_spot_values() {
        // 0.5 · 10 · (2 − 2/4) = 7.5
        let v = arl_lower_bound(&base()).unwrap();
        assert!((v / 7.5f64.exp() - 1.0).abs() < 1e-12);
        assert_eq!(arl_lower_bound(&BoundInputs { b: 0.0, ..base() }).unwrap(), 1.0);
        let mixed = BoundInputs { lambda2: 0.9, n: 4, ..base() };
        let perfect = BoundInputs { lambda2: 0.0, n: 4, ..base() };
        assert!(arl_lower_bound(&mixed).unwrap() < arl_lower_bound(&perfect).unwrap());
    }

    #[test]
    fn arl_bound_rejects_unit_lambda2() {
        let e = arl_lower_bound(&BoundInputs { lambda2: 1.0, ..base() }).unwrap_err();
        assert!(matches!(e, Error::Domain(_)));
    }

    #[test]
    fn arl_bound_increases_past_vertex() {
        let inputs = BoundInputs { n: 2, lambda2: 0.5, ..base() };
        let vertex = arl_bound_vertex(&inputs).unwrap();
        assert!(vertex > 0.0);
        let mut prev = 0.0;
        for k in 0..100 {
            let b = vertex + 0.5 * k as f64 + 1e-6;
            let v = arl_lower_bound(&BoundInputs { b, ..inputs }).unwrap();
            assert!(v > prev, "not increasing at b = {b}");
            prev = v;
        }
        assert_eq!(arl_bound_vertex(&base()).unwrap(), 0.0);
    }

    #[test]
    fn edd_bound_is_linear() {
        assert_eq!(edd_upper_bound(&base()).unwrap(), 20.0);
        assert_eq!(edd_upper_bound(&BoundInputs { b: 0.0, ..base() }).unwrap(), 0.0);
        assert_eq!(edd_upper_bound(&BoundInputs { b: 40.0, ..base() }).unwrap(), 80.0);
        for b in [0.3, 1.0, 7.5, 123.0] {
            let f = |b| edd_upper_bound(&BoundInputs { b, ..base() }).unwrap();
            assert_eq!(f(2.0 * b), 2.0 * f(b));
        }
        assert!(edd_upper_bound(&BoundInputs { mu2: 0.0, ..base() }).is_err());
    }

    #[test]
    fn edd_given_arl_spot_values() {
        let at_e = BoundInputs { gamma: Some(std::f64::consts::E), ..base() };
        assert!((edd_given_arl_bound(&at_e).unwrap() - 8.0 / 3.0).abs() < 1e-12);
        let near_one = BoundInputs { gamma: Some(1.0 + 1e-12), ..base() };
        assert!(edd_given_arl_bound(&near_one).unwrap() < 1e-10);
        assert!(edd_given_arl_bound(&BoundInputs { gamma: Some(1.0), ..base() }).is_err());
        assert!(edd_given_arl_bound(&base()).is_err());
    }

    #[test]
    fn edd_given_arl_decreases_in_n() {
        let mut prev = f64::INFINITY;
        for n in 1..=20 {
            let v = edd_given_arl_bound(&BoundInputs { n, gamma: Some(1e4), ..base() }).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn bound_curve_csv() {
        let grid: Vec<f64> = (0..=10).map(f64::from).collect();
        let out = write_bound_curves(Vec::new(), &base(), &grid).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "b,arl_lower_bound,edd_upper_bound,edd_given_arl_bound");
        assert_eq!(lines[1], "0,1,0,");
        let last: Vec<f64> = lines[11].split(',').map(|f| f.parse().unwrap()).collect();
        assert!((last[1] - 1808.042).abs() < 1e-3);
        assert_eq!(last[2], 20.0);
        assert!(write_bound_curves(Vec::new(), &BoundInputs { lambda2: 1.0, ..base() }, &grid).is_err());
    }
}
