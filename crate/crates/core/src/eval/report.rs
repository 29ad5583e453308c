use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::profile::ResourceProfile;
use crate::error::{Error, Result};
use crate::metrics::ScorePair;

/// Generated pair counts used for reader training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSize {
    pub train: usize,
    pub validation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_domain: BTreeMap<String, ScorePair>,
    /// Unweighted mean of the domain scores.
    pub average: ScorePair,
    pub dataset_sizes: BTreeMap<String, DatasetSize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource_profile: Option<ResourceProfile>,
}

const COLUMN_ORDER: [(&str, &str); 4] = [
    ("amazon", "Amazon"),
    ("wiki", "Wiki"),
    ("nyt", "NYT"),
    ("reddit", "Reddit"),
];

fn ordered_domains<'a>(domains: impl Iterator<Item = &'a String>) -> Vec<String> {
    let mut all: Vec<String> = domains.cloned().collect();
    all.sort_by_key(|d| {
        let rank = COLUMN_ORDER
            .iter()
            .position(|(k, _)| *k == d.to_lowercase())
            .unwrap_or(COLUMN_ORDER.len());
        (rank, d.clone())
    });
    all.dedup();
    all
}

fn heading(domain: &str) -> String {
    COLUMN_ORDER
        .iter()
        .find(|(k, _)| *k == domain.to_lowercase())
        .map(|(_, h)| h.to_string())
        .unwrap_or_else(|| domain.to_string())
}

impl EvalReport {
    pub fn new(
        per_domain: BTreeMap<String, ScorePair>,
        dataset_sizes: BTreeMap<String, DatasetSize>,
    ) -> Result<Self> {
        if per_domain.is_empty() {
            return Err(Error::EmptyInput("domain scores"));
        }
        let n = per_domain.len() as f64;
        let average = ScorePair {
            f1: per_domain.values().map(|s| s.f1).sum::<f64>() / n,
            exact_match: per_domain.values().map(|s| s.exact_match).sum::<f64>() / n,
        };
        Ok(Self {
            per_domain,
            average,
            dataset_sizes,
            resource_profile: None,
        })
    }

    pub fn with_resource_profile(mut self, profile: ResourceProfile) -> Self {
        self.resource_profile = Some(profile);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }

    /// One table with a row per labelled report and `F1/EM` cells:
    /// `| Model | Average | Amazon | Wiki | NYT | Reddit |`.
    pub fn markdown_table(rows: &[(&str, &EvalReport)]) -> String {
        let domains = ordered_domains(rows.iter().flat_map(|(_, r)| r.per_domain.keys()));
        let mut out = String::from("| Model | Average |");
        for d in &domains {
            out.push_str(&format!(" {} |", heading(d)));
        }
        out.push_str("\n|---|---|");
        out.push_str(&"---|".repeat(domains.len()));
        out.push('\n');
        for (label, report) in rows {
            out.push_str(&format!("| {label} | {} |", report.average));
            for d in &domains {
                match report.per_domain.get(d) {
                    Some(s) => out.push_str(&format!(" {s} |")),
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self, label: &str) -> String {
        Self::markdown_table(&[(label, self)])
    }
}

/// One CSV line of downsampling output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownsampleRow {
    pub trial: usize,
    pub domain: String,
    pub f1: f64,
    pub em: f64,
}

/// Writes `trial,domain,f1,em` with a header line; scores are percentages.
pub fn write_downsample_csv<W: Write>(writer: W, rows: &[DownsampleRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
