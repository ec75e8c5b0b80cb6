use std::fmt::Write;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::detector::DetectorConfig;

/// Results of one detector on one dataset over all rounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub config: DetectorConfig,
    /// Over successful rounds; `None` when every round failed.
    pub roc_mean: Option<f64>,
    pub roc_std: Option<f64>,
    pub prn_mean: Option<f64>,
    pub prn_std: Option<f64>,
    /// Mean wall-clock seconds per fit, only when timing was requested.
    pub seconds: Option<f64>,
    pub roc: Vec<f64>,
    pub prn: Vec<f64>,
    pub failures: Vec<RoundFailure>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundFailure {
    pub round: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub samples: usize,
    pub dim: usize,
    pub outlier_percent: f64,
    /// Set when the dataset could not be loaded; every cell then fails.
    pub error: Option<String>,
    pub detectors: IndexMap<String, CellReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rounds: usize,
    pub master_seed: u64,
    pub train_fraction: f64,
    pub datasets: IndexMap<String, DatasetReport>,
}

/// Mean and population standard deviation.
pub(crate) fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (Some(mean), Some(var.sqrt()))
}

impl CellReport {
    pub(crate) fn from_rounds(
        config: DetectorConfig,
        roc: Vec<f64>,
        prn: Vec<f64>,
        seconds: Option<f64>,
        failures: Vec<RoundFailure>,
    ) -> Self {
        let (roc_mean, roc_std) = mean_std(&roc);
        let (prn_mean, prn_std) = mean_std(&prn);
        CellReport {
            config,
            roc_mean,
            roc_std,
            prn_mean,
            prn_std,
            seconds,
            roc,
            prn,
            failures,
        }
    }
}

impl BenchmarkReport {
    pub fn n_failures(&self) -> usize {
        self.datasets
            .values()
            .flat_map(|d| d.detectors.values())
            .map(|c| c.failures.len())
            .sum()
    }

    pub fn cell(&self, dataset: &str, detector: &str) -> Option<&CellReport> {
        self.datasets.get(dataset)?.detectors.get(detector)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Detector names in first-seen order.
    fn detector_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = Vec::new();
        for d in self.datasets.values() {
            for k in d.detectors.keys() {
                if !names.contains(&k.as_str()) {
                    names.push(k);
                }
            }
        }
        names
    }

    fn table(&self, title: &str, pick: impl Fn(&CellReport) -> Option<f64>) -> String {
        let detectors = self.detector_names();
        let mut header = vec![
            "Data".to_string(),
            "Samples".to_string(),
            "Dim.".to_string(),
            "Out. Perc.".to_string(),
        ];
        header.extend(detectors.iter().map(|s| s.to_string()));
        let mut rows = vec![header];
        for (name, d) in &self.datasets {
            let mut row = vec![
                name.clone(),
                d.samples.to_string(),
                d.dim.to_string(),
                format!("{:.4}", d.outlier_percent),
            ];
            for det in &detectors {
                let v = d.detectors.get(*det).and_then(&pick);
                row.push(v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}")));
            }
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = format!("{title}\n");
        for (i, row) in rows.iter().enumerate() {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (s, &w))| if c == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
            if i == 0 {
                let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
                let _ = writeln!(out, "{}", "-".repeat(total));
            }
        }
        out
    }

    /// ROC and precision@n tables: one row per dataset, one column per detector.
    pub fn render_tables(&self) -> String {
        let mut out = self.table("ROC Performance", |c| c.roc_mean);
        out.push('\n');
        out.push_str(&self.table("Precision @ N Performance", |c| c.prn_mean));
        let failures = self.n_failures();
        if failures > 0 {
            let _ = writeln!(out, "\n{failures} failed round(s):");
            for (dname, d) in &self.datasets {
                for (det, c) in &d.detectors {
                    for f in &c.failures {
                        let _ = writeln!(out, "  {dname} / {det} / round {}: {}", f.round, f.message);
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::Method;

    #[test]
    fn mean_and_population_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, Some(2.5));
        assert!((s.unwrap() - 1.25f64.sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[]), (None, None));
    }

    #[test]
    fn table_layout() {
        let cell = CellReport::from_rounds(
            DetectorConfig::new(Method::Dl),
            vec![0.9, 0.8],
            vec![0.5, 0.5],
            None,
            vec![],
        );
        let failed = CellReport::from_rounds(
            DetectorConfig::new(Method::Sdl),
            vec![],
            vec![],
            None,
            vec![RoundFailure {
                round: 0,
                message: "boom".into(),
            }],
        );
        let mut detectors = IndexMap::new();
        detectors.insert("DL".to_string(), cell);
        detectors.insert("SDL".to_string(), failed);
        let mut datasets = IndexMap::new();
        datasets.insert(
            "sparse".to_string(),
            DatasetReport {
                samples: 576,
                dim: 64,
                outlier_percent: 100.0 / 9.0,
                error: None,
                detectors,
            },
        );
        let report = BenchmarkReport {
            rounds: 2,
            master_seed: 0,
            train_fraction: 0.6,
            datasets,
        };
        let text = report.render_tables();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "ROC Performance");
        assert!(lines[1].starts_with("Data"));
        assert!(lines[1].ends_with("SDL"));
        assert!(lines[3].contains("11.1111"));
        assert!(lines[3].contains("0.8500"));
        assert!(lines[3].ends_with("n/a"));
        assert!(text.contains("sparse / SDL / round 0: boom"));
        assert_eq!(report.n_failures(), 1);
        let back: BenchmarkReport = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(back, report);
    }
}
