//! Evaluation report JSON and its text table.

use std::fmt::Write as _;

use maxent_debias_core::{FairnessBound, FairnessReport, ReportSource};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Closeness {
    Kl,
    Covariance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnReport {
    pub name: String,
    pub source: String,
    pub statistical_rate: f64,
    pub representation_rate: f64,
    pub group_masses: Vec<f64>,
    pub group_conditionals: Vec<f64>,
    /// KL divergence from this column to the raw data, or the covariance
    /// difference norm, depending on [`EvaluationReport::closeness`].
    pub closeness_to_raw: Option<f64>,
}

impl ColumnReport {
    pub fn new(name: &str, r: &FairnessReport, closeness_to_raw: Option<f64>) -> Self {
        Self {
            name: name.to_string(),
            source: match r.source {
                ReportSource::ExactDistribution => "exact",
                ReportSource::EmpiricalDataset => "empirical",
            }
            .to_string(),
            statistical_rate: r.statistical_rate,
            representation_rate: r.representation_rate,
            group_masses: r.group_masses.clone(),
            group_conditionals: r.group_conditionals.clone(),
            closeness_to_raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub tau: f64,
    pub c: f64,
    pub delta: f64,
    pub tau_prime: f64,
    pub theta_protected: f64,
    pub hypothesis_holds: bool,
}

impl BoundReport {
    pub fn new(tau: f64, c: f64, b: &FairnessBound) -> Self {
        Self {
            tau,
            c,
            delta: b.delta,
            tau_prime: b.tau_prime,
            theta_protected: b.theta_protected,
            hypothesis_holds: b.hypothesis_holds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub protected: String,
    pub label: String,
    pub label_value: String,
    pub closeness: Closeness,
    pub columns: Vec<ColumnReport>,
    pub fairness_bound: Option<BoundReport>,
    pub notices: Vec<String>,
}

impl EvaluationReport {
    pub fn column(&self, name: &str) -> Option<&ColumnReport> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Aligned text table with one column per evaluated distribution.
    pub fn table(&self) -> String {
        let closeness = match self.closeness {
            Closeness::Kl => "KL vs raw",
            Closeness::Covariance => "Cov-norm vs raw",
        };
        let rows: [(&str, Box<dyn Fn(&ColumnReport) -> String>); 3] = [
            ("Data SR", Box::new(|c| format!("{:.4}", c.statistical_rate))),
            ("Data RR", Box::new(|c| format!("{:.4}", c.representation_rate))),
            (
                closeness,
                Box::new(|c| c.closeness_to_raw.map_or("-".to_string(), |x| format!("{x:.4}"))),
            ),
        ];
        let label_width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let cells: Vec<Vec<String>> = rows
            .iter()
            .map(|(_, f)| self.columns.iter().map(f).collect())
            .collect();
        let widths: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .map(|(j, c)| cells.iter().map(|r| r[j].len()).max().unwrap_or(0).max(c.name.len()))
            .collect();
        let mut out = String::new();
        let _ = write!(out, "{:label_width$}", "");
        for (c, w) in self.columns.iter().zip(&widths) {
            let _ = write!(out, "  {:>w$}", capitalize(&c.name));
        }
        out.push('\n');
        for ((label, _), row) in rows.iter().zip(&cells) {
            let _ = write!(out, "{label:label_width$}");
            for (cell, w) in row.iter().zip(&widths) {
                let _ = write!(out, "  {cell:>w$}");
            }
            out.push('\n');
        }
        if let Some(b) = &self.fairness_bound {
            let _ = writeln!(
                out,
                "bound: delta = {:.4}, tau' = {:.4} (tau = {}, C = {}){}",
                b.delta,
                b.tau_prime,
                b.tau,
                b.c,
                if b.hypothesis_holds { "" } else { ", hypothesis on theta not met" }
            );
        }
        for n in &self.notices {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}
