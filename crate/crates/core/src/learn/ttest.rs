//! Two-sample t-tests on fold accuracy lists.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestMode {
    /// Unequal-variance two-sample test.
    #[default]
    Welch,
    /// Paired test on per-fold differences.
    Paired,
}

impl std::str::FromStr for TTestMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "welch" => Ok(TTestMode::Welch),
            "paired" => Ok(TTestMode::Paired),
            _ => Err(format!("unknown t-test mode {s:?} (expected welch or paired)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub dof: f64,
    /// Two-sided p-value.
    pub p: f64,
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var)
}

fn check(v: &[f64], name: &str) -> Result<()> {
    if v.len() < 2 {
        return Err(Error::invalid(format!("sample {name} needs at least 2 values, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("sample {name} contains non-finite values")));
    }
    Ok(())
}

/// Two-sided Student-t tail probability `P(|T| >= |t|)`.
pub fn two_sided_p(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(dof / 2.0, 0.5, dof / (dof + t * t)).min(1.0)
}

/// Result for a zero standard error: no evidence when the means agree, and a
/// certain difference otherwise.
fn degenerate(diff: f64, dof: f64) -> TTestResult {
    if diff == 0.0 {
        TTestResult { t: 0.0, dof, p: 1.0 }
    } else {
        TTestResult {
            t: diff.signum() * f64::INFINITY,
            dof,
            p: 0.0,
        }
    }
}

/// Welch's unequal-variance t-test with Welch–Satterthwaite degrees of freedom.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    check(a, "a")?;
    check(b, "b")?;
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (qa, qb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = qa + qb;
    if se2 == 0.0 {
        return Ok(degenerate(ma - mb, (a.len() + b.len() - 2) as f64));
    }
    let t = (ma - mb) / se2.sqrt();
    let dof = se2 * se2 / (qa * qa / (a.len() - 1) as f64 + qb * qb / (b.len() - 1) as f64);
    Ok(TTestResult { t, dof, p: two_sided_p(t, dof) })
}

/// Paired t-test on `a[i] - b[i]`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    check(a, "a")?;
    check(b, "b")?;
    if a.len() != b.len() {
        return Err(Error::invalid(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (md, vd) = mean_var(&d);
    let dof = (d.len() - 1) as f64;
    if vd == 0.0 {
        return Ok(degenerate(md, dof));
    }
    let t = md / (vd / d.len() as f64).sqrt();
    Ok(TTestResult { t, dof, p: two_sided_p(t, dof) })
}

pub fn t_test(a: &[f64], b: &[f64], mode: TTestMode) -> Result<TTestResult> {
    match mode {
        TTestMode::Welch => welch_t_test(a, b),
        TTestMode::Paired => paired_t_test(a, b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_instance() {
        let r = welch_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert!((r.t + 1.0).abs() < 1e-12);
        assert!((r.dof - 8.0).abs() < 1e-12);
        assert!((r.p - 0.3466).abs() < 1e-3, "{}", r.p);
    }

    #[test]
    fn identical_samples() {
        let a = [0.7, 0.8, 0.9];
        assert_eq!(welch_t_test(&a, &a).unwrap().p, 1.0);
        let r = welch_t_test(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
        assert_eq!(welch_t_test(&[0.5, 0.5], &[0.6, 0.6]).unwrap().p, 0.0);
    }

    #[test]
    fn antisymmetry_and_affine_invariance() {
        let a = [0.61, 0.72, 0.55, 0.8, 0.66];
        let b = [0.5, 0.58, 0.62, 0.49, 0.7, 0.52];
        let ab = welch_t_test(&a, &b).unwrap();
        let ba = welch_t_test(&b, &a).unwrap();
        assert!((ab.t + ba.t).abs() < 1e-12 && (ab.p - ba.p).abs() < 1e-12);
        let f = |v: &[f64]| v.iter().map(|x| 2.0 * x + 3.0).collect::<Vec<_>>();
        let aff = welch_t_test(&f(&a), &f(&b)).unwrap();
        assert!((aff.t - ab.t).abs() < 1e-9 && (aff.p - ab.p).abs() < 1e-9);
    }

    #[test]
    fn paired_mode() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [1.5, 2.4, 3.6, 4.3];
        let r = paired_t_test(&a, &b).unwrap();
        assert_eq!(r.dof, 3.0);
        assert!(r.t < 0.0);
        assert!(paired_t_test(&a, &b[..3]).is_err());
        assert!(welch_t_test(&[1.0], &b).is_err());
    }
}
