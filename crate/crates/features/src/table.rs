//! CSV exchange formats for feature matrices, augmented rows and mood
//! datasets.

use std::collections::BTreeMap;
use std::io;

use memorability_learn::PrecomputedAugmenter;

use crate::error::{FeatureError, Result};
use crate::extract::AugmentedRow;
use crate::mood::MoodRow;

/// Feature rows keyed by clip, with column names.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub clip_ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| FeatureError::Validation(format!("{what}: {s:?} is not a number")))?;
    if !v.is_finite() {
        return Err(FeatureError::Validation(format!("{what}: {s:?} is not finite")));
    }
    Ok(v)
}

impl FeatureTable {
    pub fn new(names: Vec<String>) -> Self {
        FeatureTable {
            names,
            clip_ids: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, clip_id: &str, row: Vec<f64>) -> Result<()> {
        if row.len() != self.names.len() {
            return Err(FeatureError::Validation(format!(
                "row for {clip_id} has {} values for {} columns",
                row.len(),
                self.names.len()
            )));
        }
        self.clip_ids.push(clip_id.to_string());
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `clip_id` then one column per feature. Floats use the shortest
    /// representation that round-trips, so output is byte-stable.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["clip_id".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (id, row) in self.clip_ids.iter().zip(&self.rows) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn read_csv<R: io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.get(0) != Some("clip_id") {
            return Err(FeatureError::Validation("first column must be clip_id".into()));
        }
        let mut table = FeatureTable::new(headers.iter().skip(1).map(str::to_string).collect());
        for rec in r.records() {
            let rec = rec?;
            let id = rec[0].to_string();
            let row = table
                .names
                .iter()
                .zip(rec.iter().skip(1))
                .map(|(name, s)| parse_f64(s, &format!("{id}/{name}")))
                .collect::<Result<Vec<f64>>>()?;
            table.push(&id, row)?;
        }
        Ok(table)
    }

    /// Rows that have a label, in table order, with their labels.
    pub fn join_labels(&self, labels: &BTreeMap<String, f64>) -> Result<(FeatureTable, Vec<f64>)> {
        let mut out = FeatureTable::new(self.names.clone());
        let mut y = Vec::new();
        for (id, row) in self.clip_ids.iter().zip(&self.rows) {
            if let Some(&label) = labels.get(id) {
                out.push(id, row.clone())?;
                y.push(label);
            }
        }
        if out.is_empty() {
            return Err(FeatureError::Empty("no clip has both features and a label".into()));
        }
        Ok((out, y))
    }

    /// Augmented rows grouped by the index of their source clip.
    pub fn augmenter(&self, augmented: &AugmentedTable) -> Result<PrecomputedAugmenter> {
        if augmented.names != self.names {
            return Err(FeatureError::Validation(
                "augmented rows use different feature columns".into(),
            ));
        }
        let index: BTreeMap<&str, usize> = self.clip_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let mut rows = vec![Vec::new(); self.len()];
        for r in &augmented.rows {
            if let Some(&i) = index.get(r.clip_id.as_str()) {
                rows[i].push(r.values.clone());
            }
        }
        Ok(PrecomputedAugmenter { rows })
    }
}

/// Augmented feature rows tagged with the transform that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedTable {
    pub names: Vec<String>,
    pub rows: Vec<AugmentedRow>,
}

impl AugmentedTable {
    /// `clip_id,augmentation,<features>`; the augmentation column holds its
    /// parameters as JSON.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["clip_id".to_string(), "augmentation".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.clip_id.clone(), serde_json::to_string(&r.augmentation)?];
            rec.extend(r.values.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.get(0) != Some("clip_id") || headers.get(1) != Some("augmentation") {
            return Err(FeatureError::Validation(
                "augmented table must start with clip_id,augmentation".into(),
            ));
        }
        let names: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let clip_id = rec[0].to_string();
            let values = names
                .iter()
                .zip(rec.iter().skip(2))
                .map(|(name, s)| parse_f64(s, &format!("{clip_id}/{name}")))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(AugmentedRow {
                augmentation: serde_json::from_str(&rec[1])?,
                clip_id,
                values,
            });
        }
        Ok(AugmentedTable { names, rows })
    }
}

/// Emotion dataset: `valence` and `arousal` columns, an optional `clip_id`
/// column, and every other column an input feature.
pub fn read_mood_dataset<R: io::Read>(input: R) -> Result<(Vec<String>, Vec<MoodRow>)> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| FeatureError::Validation(format!("mood dataset has no {name} column")))
    };
    let (vi, ai) = (find("valence")?, find("arousal")?);
    let inputs: Vec<usize> = (0..headers.len())
        .filter(|&j| j != vi && j != ai && &headers[j] != "clip_id")
        .collect();
    let names = inputs.iter().map(|&j| headers[j].to_string()).collect();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let what = |j: usize| format!("row {} column {}", line + 1, &headers[j]);
        rows.push(MoodRow {
            features: inputs
                .iter()
                .map(|&j| parse_f64(&rec[j], &what(j)))
                .collect::<Result<_>>()?,
            valence: parse_f64(&rec[vi], &what(vi))?,
            arousal: parse_f64(&rec[ai], &what(ai))?,
        });
    }
    Ok((names, rows))
}
