//! Nodal error norms and per-report-time records.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

fn check(exact: &[f64], approx: &[f64]) -> Result<()> {
    if exact.is_empty() {
        return Err(Error::invalid("error norms need at least one value"));
    }
    if exact.len() != approx.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} exact vs {} approximate values",
            exact.len(),
            approx.len()
        )));
    }
    Ok(())
}

/// `max_i |f_i - g_i|`.
pub fn linf_error(exact: &[f64], approx: &[f64]) -> Result<f64> {
    check(exact, approx)?;
    Ok(exact.iter().zip(approx).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// `sqrt(mean |f_i - g_i|²)`.
pub fn rms_error(exact: &[f64], approx: &[f64]) -> Result<f64> {
    check(exact, approx)?;
    let s: f64 = exact.iter().zip(approx).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((s / exact.len() as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub time: f64,
    pub linf: f64,
    pub rms: f64,
    pub kappa: f64,
    /// Largest relative residual `‖E u - rhs‖∞ / ‖rhs‖∞` seen since the
    /// previous row.
    pub residual: f64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ErrorReport {
    rows: Vec<ReportRow>,
    /// Residual warnings, one line each.
    pub warnings: Vec<String>,
}

pub const CSV_HEADER: &str = "time,linf,rms,kappa,residual,wall_seconds";

impl ErrorReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self) -> &[ReportRow] {
        &self.rows
    }

    pub fn push(&mut self, row: ReportRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.time <= last.time {
                return Err(Error::invalid(format!(
                    "report times must increase ({} after {})",
                    row.time, last.time
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                sig9(r.time),
                sig9(r.linf),
                sig9(r.rms),
                sig9(r.kappa),
                sig9(r.residual),
                sig9(r.wall_seconds)
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// Nine significant digits in scientific notation.
pub fn sig9(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.8e}")
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn examples() {
        assert_eq!(linf_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rms_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(linf_error(&[1.0, 2.0], &[1.0, 2.5]).unwrap(), 0.5);
        let r = rms_error(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((r - 12.5f64.sqrt()).abs() < 1e-15);
        assert!((r - 3.53553).abs() < 1e-5);
        assert!(linf_error(&[], &[]).is_err());
        assert!(rms_error(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let n = rng.gen_range(1..40);
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let mut scan = 0.0f64;
            for i in 0..n {
                let d = (a[i] - b[i]).abs();
                if d > scan {
                    scan = d;
                }
            }
            let linf = linf_error(&a, &b).unwrap();
            let rms = rms_error(&a, &b).unwrap();
            assert_eq!(linf, scan);
            assert!(rms <= linf * (1.0 + 1e-15));
            let mut perm: Vec<usize> = (0..n).collect();
            perm.reverse();
            let ap: Vec<f64> = perm.iter().map(|&i| a[i]).collect();
            let bp: Vec<f64> = perm.iter().map(|&i| b[i]).collect();
            assert_eq!(linf_error(&ap, &bp).unwrap(), linf);
            assert!((rms_error(&ap, &bp).unwrap() - rms).abs() <= 1e-14 * rms.max(1.0));
            let s = 3.0;
            let sa: Vec<f64> = a.iter().map(|v| s * v + 7.0).collect();
            let sb: Vec<f64> = b.iter().map(|v| s * v + 7.0).collect();
            assert!((linf_error(&sa, &sb).unwrap() - s * linf).abs() < 1e-12);
        }
    }

    #[test]
    fn report_csv() {
        let mut r = ErrorReport::new();
        let row = |t: f64| ReportRow {
            time: t,
            linf: 0.0326,
            rms: 0.0043,
            kappa: 3.4e5,
            residual: 1e-14,
            wall_seconds: 0.0,
        };
        r.push(row(1.0)).unwrap();
        assert!(r.push(row(1.0)).is_err());
        r.push(row(3.0)).unwrap();
        let csv = r.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(
            lines[1],
            "1.00000000e0,3.26000000e-2,4.30000000e-3,3.40000000e5,1.00000000e-14,0.00000000e0"
        );
        assert_eq!(lines.len(), 3);
    }
}
