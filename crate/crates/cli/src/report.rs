//! Output plumbing: the run configuration header, CSV writing with
//! round-trip precision, and the small regressions printed by `bench`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use smoothdist::{BuildConfig, Tolerances};

/// Parameters of a run, written as the first line of every artifact.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub epsilon: Vec<f64>,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub lambda_c: Option<f64>,
    pub lambda_p: Option<f64>,
    pub samples: BTreeMap<String, usize>,
}

impl RunConfig {
    pub fn new(command: &str, epsilon: Vec<f64>, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            epsilon,
            seed,
            tolerances: Tolerances::default(),
            lambda_c: None,
            lambda_p: None,
            samples: BTreeMap::new(),
        }
    }

    pub fn from_build(command: &str, config: &BuildConfig) -> Self {
        let mut rc = Self::new(command, vec![config.epsilon], config.seed);
        rc.tolerances = config.tolerances;
        rc.lambda_c = config.lambda_c;
        rc.lambda_p = config.lambda_p;
        rc.samples.insert("min_samples".into(), config.min_samples);
        rc.samples.insert("verify_rounds".into(), config.verify_rounds);
        rc
    }

    pub fn with_samples(mut self, name: &str, n: usize) -> Self {
        self.samples.insert(name.to_string(), n);
        self
    }

    /// `# smoothdist {json}`
    pub fn header_line(&self) -> String {
        format!("# smoothdist {}", serde_json::to_string(self).expect("run config serializes"))
    }
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// CSV file that starts with the run configuration header.
pub struct CsvOut {
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    pub fn create(path: &Path, config: &RunConfig, columns: &[String]) -> Result<Self> {
        let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
        let mut buf = BufWriter::new(file);
        writeln!(buf, "{}", config.header_line())?;
        let mut writer = csv::Writer::from_writer(buf);
        writer.write_record(columns)?;
        Ok(Self { writer })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

/// Least-squares slope of `y` against `x`; `None` for fewer than two distinct `x`.
pub fn slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

/// Slope of `ln y` against `ln(1 / eps)`.
pub fn log_log_slope(eps: &[f64], y: &[f64]) -> Option<f64> {
    let x: Vec<f64> = eps.iter().map(|e| (1.0 / e).ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    slope(&x, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        assert!((slope(&x, &y).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(slope(&[1.0], &[2.0]), None);
        assert_eq!(slope(&[1.0, 1.0], &[2.0, 3.0]), None);
    }

    #[test]
    fn power_law_slope() {
        let eps = [0.2, 0.1, 0.05, 0.025];
        let y: Vec<f64> = eps.iter().map(|e: &f64| 7.0 * e.powf(-1.5)).collect();
        assert!((log_log_slope(&eps, &y).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 123456.789] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
            assert_eq!(s.split('e').next().unwrap().replace(['-', '.'], "").len(), 17);
        }
    }

    #[test]
    fn header_carries_the_config() {
        let rc = RunConfig::new("grid", vec![0.1], 4).with_samples("res", 8);
        let line = rc.header_line();
        assert!(line.starts_with("# smoothdist {"));
        let v: serde_json::Value = serde_json::from_str(line.trim_start_matches("# smoothdist ")).unwrap();
        assert_eq!(v["seed"], 4);
        assert_eq!(v["samples"]["res"], 8);
    }
}
