//! Pulse description word (PDW) data model and file I/O.
//!
//! Units are fixed across the crate: time of arrival in microseconds,
//! frequency in MHz, pulse width in nanoseconds, level in dB. The CSV
//! schema is `toa_us,freq_mhz,pw_ns,level_db[,emitter][,label]`.

use std::fmt;
use std::path::Path;

use crate::{Error, Result};

/// One pulse description word.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    /// Time of arrival, µs.
    pub toa: f64,
    /// Carrier frequency, MHz.
    pub freq: f64,
    /// Pulse width, ns.
    pub pw: f64,
    /// Received level, dB.
    pub level: f64,
}

impl Pulse {
    pub fn new(toa: f64, freq: f64, pw: f64, level: f64) -> Result<Self> {
        if !toa.is_finite() {
            return Err(Error::validation("toa must be finite"));
        }
        if !(freq.is_finite() && freq > 0.0) {
            return Err(Error::validation(format!("freq must be positive, got {freq}")));
        }
        if !(pw.is_finite() && pw > 0.0) {
            return Err(Error::validation(format!("pw must be positive, got {pw}")));
        }
        if !level.is_finite() {
            return Err(Error::validation("level must be finite"));
        }
        Ok(Pulse { toa, freq, pw, level })
    }
}

/// An ordered pulse collection with optional ground-truth emitter ids.
///
/// Pulses are kept sorted by TOA; truth ids (when present) ride along with
/// their pulses through the sort. Emitter id −1 marks injected outliers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PulseTrain {
    pulses: Vec<Pulse>,
    truth: Option<Vec<i32>>,
}

impl PulseTrain {
    pub fn new(pulses: Vec<Pulse>, truth: Option<Vec<i32>>) -> Result<Self> {
        if let Some(t) = &truth {
            if t.len() != pulses.len() {
                return Err(Error::validation(format!(
                    "truth length {} does not match pulse count {}",
                    t.len(),
                    pulses.len()
                )));
            }
        }
        let mut train = PulseTrain { pulses, truth };
        train.sort_by_toa();
        Ok(train)
    }

    fn sort_by_toa(&mut self) {
        let mut order: Vec<usize> = (0..self.pulses.len()).collect();
        order.sort_by(|&a, &b| {
            self.pulses[a]
                .toa
                .partial_cmp(&self.pulses[b].toa)
                .unwrap()
                .then(a.cmp(&b))
        });
        self.pulses = order.iter().map(|&i| self.pulses[i]).collect();
        if let Some(t) = &self.truth {
            self.truth = Some(order.iter().map(|&i| t[i]).collect());
        }
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn truth(&self) -> Option<&[i32]> {
        self.truth.as_deref()
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    pub fn toas(&self) -> Vec<f64> {
        self.pulses.iter().map(|p| p.toa).collect()
    }

    pub fn freqs(&self) -> Vec<f64> {
        self.pulses.iter().map(|p| p.freq).collect()
    }

    pub fn pws(&self) -> Vec<f64> {
        self.pulses.iter().map(|p| p.pw).collect()
    }

    pub fn levels(&self) -> Vec<f64> {
        self.pulses.iter().map(|p| p.level).collect()
    }
}

/// Per-pulse integer cluster assignment; −1 is the reserved outlier label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labeling {
    labels: Vec<i32>,
}

impl Labeling {
    pub fn new(labels: Vec<i32>) -> Self {
        Labeling { labels }
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of distinct non-outlier labels.
    pub fn cluster_count(&self) -> usize {
        let mut seen: Vec<i32> = self.labels.iter().copied().filter(|&l| l >= 0).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Fraction of pulses labeled −1.
    pub fn outlier_fraction(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.labels.iter().filter(|&&l| l < 0).count() as f64 / self.labels.len() as f64
    }

    /// Renames non-negative labels to {0..K−1} in order of first appearance.
    /// −1 is preserved.
    pub fn canonicalize(&self) -> Labeling {
        let mut mapping: Vec<(i32, i32)> = Vec::new();
        let mut next = 0;
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                if l < 0 {
                    return -1;
                }
                match mapping.iter().find(|(old, _)| *old == l) {
                    Some(&(_, new)) => new,
                    None => {
                        let new = next;
                        mapping.push((l, new));
                        next += 1;
                        new
                    }
                }
            })
            .collect();
        Labeling { labels }
    }
}

/// A named pulse feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Feature {
    Toa,
    Freq,
    Pw,
    Level,
}

impl Feature {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "toa" => Ok(Feature::Toa),
            "freq" => Ok(Feature::Freq),
            "pw" => Ok(Feature::Pw),
            "level" => Ok(Feature::Level),
            other => Err(Error::validation(format!("unknown feature column: {other}"))),
        }
    }

    fn extract(&self, p: &Pulse) -> f64 {
        match self {
            Feature::Toa => p.toa,
            Feature::Freq => p.freq,
            Feature::Pw => p.pw,
            Feature::Level => p.level,
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Feature::Toa => "toa",
            Feature::Freq => "freq",
            Feature::Pw => "pw",
            Feature::Level => "level",
        };
        f.write_str(s)
    }
}

/// Row-major feature matrix, one row per pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    columns: Vec<Feature>,
    data: Vec<f64>,
    nrows: usize,
}

impl FeatureMatrix {
    /// Builds a matrix directly from row data. Used when the values do not
    /// come straight out of a pulse train (e.g. clustering raw TOA columns).
    pub fn from_rows(columns: Vec<Feature>, rows: &[Vec<f64>]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::validation("matrix requires at least one column"));
        }
        let width = columns.len();
        let mut data = Vec::with_capacity(rows.len() * width);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::validation(format!(
                    "row {i} has {} values, expected {width}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!("row {i} contains non-finite values")));
            }
            data.extend_from_slice(row);
        }
        Ok(FeatureMatrix { columns, data, nrows: rows.len() })
    }

    /// Single-column matrix over raw values.
    pub fn single_column(feature: Feature, values: &[f64]) -> Result<Self> {
        let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
        FeatureMatrix::from_rows(vec![feature], &rows)
    }

    pub fn columns(&self) -> &[Feature] {
        &self.columns
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.columns.len();
        &self.data[i * w..(i + 1) * w]
    }

    /// Copies column `c` out as a vector.
    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i)[c]).collect()
    }
}

/// Extracts the selected features of every pulse, in declared column order.
pub fn feature_matrix(train: &PulseTrain, columns: &[Feature]) -> Result<FeatureMatrix> {
    if columns.is_empty() {
        return Err(Error::validation("feature_matrix requires at least one column"));
    }
    let mut seen = Vec::new();
    for c in columns {
        if seen.contains(c) {
            return Err(Error::validation(format!("duplicate feature column: {c}")));
        }
        seen.push(*c);
    }
    let mut data = Vec::with_capacity(train.len() * columns.len());
    for p in train.pulses() {
        for c in columns {
            data.push(c.extract(p));
        }
    }
    Ok(FeatureMatrix { columns: columns.to_vec(), data, nrows: train.len() })
}

/// Maps each column to [0,1] by empirical rank.
///
/// A value at rank r (average rank over ties) maps to r/(N−1), so the
/// transform preserves each column's ordering and is idempotent up to ties.
/// A constant column lands on 0.5 everywhere.
pub fn quantile_normalize(features: &FeatureMatrix) -> Result<FeatureMatrix> {
    let n = features.nrows();
    if n < 2 {
        return Err(Error::validation("quantile normalization requires at least 2 rows"));
    }
    let mut out = features.clone();
    let ncols = features.ncols();
    for c in 0..ncols {
        let col = features.column(c);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| col[a].partial_cmp(&col[b]).unwrap().then(a.cmp(&b)));
        let mut ranks = vec![0.0; n];
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && col[order[j + 1]] == col[order[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for &idx in &order[i..=j] {
                ranks[idx] = avg;
            }
            i = j + 1;
        }
        let denom = (n - 1) as f64;
        for r in 0..n {
            out.data[r * ncols + c] = ranks[r] / denom;
        }
    }
    Ok(out)
}

const BASE_HEADER: [&str; 4] = ["toa_us", "freq_mhz", "pw_ns", "level_db"];

/// Reads a pulse train from a PDW CSV file.
///
/// The optional `emitter` column becomes ground truth; an optional `label`
/// column is ignored here (use [`load_labeled`] to recover it).
pub fn load_pulses(path: impl AsRef<Path>) -> Result<PulseTrain> {
    let (train, _) = load_labeled(path)?;
    Ok(train)
}

/// Reads a pulse train together with its `label` column when present.
pub fn load_labeled(path: impl AsRef<Path>) -> Result<(PulseTrain, Option<Labeling>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())
        .map_err(|e| Error::Parse { line: 0, msg: e.to_string() })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
        .clone();
    let mut col_index = Vec::with_capacity(4);
    for name in BASE_HEADER {
        let idx = headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            msg: format!("missing column {name}"),
        })?;
        col_index.push(idx);
    }
    let emitter_col = headers.iter().position(|h| h == "emitter");
    let label_col = headers.iter().position(|h| h == "label");

    let mut pulses = Vec::new();
    let mut truth = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // 1-based, after the header
        let record = record.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        let mut values = [0.0; 4];
        for (k, &idx) in col_index.iter().enumerate() {
            let field = record.get(idx).ok_or_else(|| Error::Parse {
                line,
                msg: format!("missing field {}", BASE_HEADER[k]),
            })?;
            values[k] = field.trim().parse::<f64>().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid {} value: {field:?}", BASE_HEADER[k]),
            })?;
        }
        let pulse = Pulse::new(values[0], values[1], values[2], values[3])
            .map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        pulses.push(pulse);
        if let Some(idx) = emitter_col {
            let field = record.get(idx).unwrap_or("").trim();
            truth.push(field.parse::<i32>().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid emitter id: {field:?}"),
            })?);
        }
        if let Some(idx) = label_col {
            let field = record.get(idx).unwrap_or("").trim();
            labels.push(field.parse::<i32>().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid label: {field:?}"),
            })?);
        }
    }
    // Labels must survive the TOA sort; sort them with the pulses by
    // temporarily treating them as a second id channel.
    let n = pulses.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pulses[a].toa.partial_cmp(&pulses[b].toa).unwrap().then(a.cmp(&b)));
    let pulses: Vec<Pulse> = order.iter().map(|&i| pulses[i]).collect();
    let truth = if emitter_col.is_some() {
        Some(order.iter().map(|&i| truth[i]).collect())
    } else {
        None
    };
    let labeling = if label_col.is_some() {
        Some(Labeling::new(order.iter().map(|&i| labels[i]).collect()))
    } else {
        None
    };
    let train = PulseTrain { pulses, truth };
    Ok((train, labeling))
}

/// Writes a pulse train to a PDW CSV file.
///
/// Emits the `emitter` column when the train carries truth ids and the
/// `label` column when a labeling is given. Values round-trip exactly
/// (shortest f64 representation).
pub fn save_pulses(
    train: &PulseTrain,
    labels: Option<&Labeling>,
    path: impl AsRef<Path>,
) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != train.len() {
            return Err(Error::validation(format!(
                "label count {} does not match pulse count {}",
                l.len(),
                train.len()
            )));
        }
    }
    let mut writer =
        csv::Writer::from_path(path.as_ref()).map_err(|e| Error::validation(e.to_string()))?;
    let mut header: Vec<&str> = BASE_HEADER.to_vec();
    if train.truth().is_some() {
        header.push("emitter");
    }
    if labels.is_some() {
        header.push("label");
    }
    writer
        .write_record(&header)
        .map_err(|e| Error::validation(e.to_string()))?;
    for (i, p) in train.pulses().iter().enumerate() {
        let mut record = vec![
            p.toa.to_string(),
            p.freq.to_string(),
            p.pw.to_string(),
            p.level.to_string(),
        ];
        if let Some(t) = train.truth() {
            record.push(t[i].to_string());
        }
        if let Some(l) = labels {
            record.push(l.labels()[i].to_string());
        }
        writer
            .write_record(&record)
            .map_err(|e| Error::validation(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn train_from(rows: &[(f64, f64, f64, f64)]) -> PulseTrain {
        let pulses = rows
            .iter()
            .map(|&(toa, freq, pw, level)| Pulse::new(toa, freq, pw, level).unwrap())
            .collect();
        PulseTrain::new(pulses, None).unwrap()
    }

    #[test]
    fn load_sorts_and_attaches_truth() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pdw.csv");
        std::fs::write(
            &path,
            "toa_us,freq_mhz,pw_ns,level_db,emitter\n30.0,900,15,40,1\n10.0,800,14,41,0\n20.0,850,16,39,0\n",
        )
        .unwrap();
        let train = load_pulses(&path).unwrap();
        assert_eq!(train.len(), 3);
        assert_eq!(train.toas(), vec![10.0, 20.0, 30.0]);
        assert_eq!(train.truth(), Some(&[0, 0, 1][..]));
    }

    #[test]
    fn load_rejects_nonpositive_pw() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pdw.csv");
        std::fs::write(&path, "toa_us,freq_mhz,pw_ns,level_db\n1.0,800,0.0,40\n").unwrap();
        let err = load_pulses(&path).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn load_reports_malformed_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pdw.csv");
        std::fs::write(&path, "toa_us,freq_mhz,pw_ns,level_db\n1.0,800,15,40\n2.0,oops,15,40\n")
            .unwrap();
        let err = load_pulses(&path).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pdw.csv");
        let pulses = vec![
            Pulse::new(1.2345678901234, 825.123456, 15.3000001, -3.25).unwrap(),
            Pulse::new(71.999999999, 1100.5, 14.9, 42.0).unwrap(),
        ];
        let train = PulseTrain::new(pulses, Some(vec![2, 0])).unwrap();
        let labels = Labeling::new(vec![1, -1]);
        save_pulses(&train, Some(&labels), &path).unwrap();
        let (loaded, loaded_labels) = load_labeled(&path).unwrap();
        assert_eq!(loaded, train);
        assert_eq!(loaded_labels.unwrap(), labels);
    }

    #[test]
    fn save_rejects_mismatched_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pdw.csv");
        let train = train_from(&[(1.0, 800.0, 15.0, 40.0)]);
        let labels = Labeling::new(vec![0, 1]);
        assert!(matches!(save_pulses(&train, Some(&labels), &path), Err(Error::Validation(_))));
    }

    #[test]
    fn quantile_maps_ranks() {
        let train = train_from(&[
            (1.0, 10.0, 1.0, 0.0),
            (2.0, 20.0, 1.0, 0.0),
            (3.0, 30.0, 1.0, 0.0),
        ]);
        let m = feature_matrix(&train, &[Feature::Freq]).unwrap();
        let q = quantile_normalize(&m).unwrap();
        assert_eq!(q.column(0), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn quantile_averages_tied_ranks() {
        // Ranks of [5, 5, 9] are [0.5, 0.5, 2]; divided by N−1 = 2.
        let train = train_from(&[
            (1.0, 5.0, 1.0, 0.0),
            (2.0, 5.0, 1.0, 0.0),
            (3.0, 9.0, 1.0, 0.0),
        ]);
        let m = feature_matrix(&train, &[Feature::Freq]).unwrap();
        let q = quantile_normalize(&m).unwrap();
        assert_eq!(q.column(0), vec![0.25, 0.25, 1.0]);
    }

    #[test]
    fn quantile_constant_column_is_half() {
        let train = train_from(&[
            (1.0, 7.0, 1.0, 0.0),
            (2.0, 7.0, 1.0, 0.0),
            (3.0, 7.0, 1.0, 0.0),
            (4.0, 7.0, 1.0, 0.0),
        ]);
        let m = feature_matrix(&train, &[Feature::Freq]).unwrap();
        let q = quantile_normalize(&m).unwrap();
        assert!(q.column(0).iter().all(|&v| v == 0.5));
    }

    #[test]
    fn feature_matrix_orders_columns() {
        let train = train_from(&[(1.0, 800.0, 15.0, 40.0), (2.0, 900.0, 16.0, 41.0)]);
        let m = feature_matrix(&train, &[Feature::Freq, Feature::Pw]).unwrap();
        assert_eq!(m.nrows(), 2);
        assert_eq!(m.row(0), &[800.0, 15.0]);
        assert_eq!(m.row(1), &[900.0, 16.0]);
        let m3 = feature_matrix(&train, &[Feature::Toa, Feature::Freq, Feature::Pw]).unwrap();
        assert_eq!(m3.ncols(), 3);
        assert_eq!(m3.row(0), &[1.0, 800.0, 15.0]);
    }

    #[test]
    fn feature_matrix_rejects_empty_and_unknown() {
        let train = train_from(&[(1.0, 800.0, 15.0, 40.0), (2.0, 900.0, 16.0, 41.0)]);
        assert!(feature_matrix(&train, &[]).is_err());
        assert!(Feature::parse("doa").is_err());
    }

    #[test]
    fn canonicalize_uses_first_appearance() {
        let l = Labeling::new(vec![7, 7, -1, 3, 7, 3, 9]);
        assert_eq!(l.canonicalize().labels(), &[0, 0, -1, 1, 0, 1, 2]);
    }

    proptest! {
        #[test]
        fn quantile_is_monotone_and_idempotent(values in proptest::collection::vec(-1e6f64..1e6, 2..60)) {
            let rows: Vec<(f64, f64, f64, f64)> =
                values.iter().map(|&v| (v, 1.0 + v.abs(), 1.0, 0.0)).collect();
            let train = train_from(&rows);
            let m = feature_matrix(&train, &[Feature::Toa]).unwrap();
            let q = quantile_normalize(&m).unwrap();
            let col = q.column(0);
            prop_assert!(col.iter().all(|&v| (0.0..=1.0).contains(&v)));
            // Argsort preserved.
            let orig = m.column(0);
            for i in 0..orig.len() {
                for j in 0..orig.len() {
                    if orig[i] < orig[j] {
                        prop_assert!(col[i] < col[j]);
                    } else if orig[i] == orig[j] {
                        prop_assert!(col[i] == col[j]);
                    }
                }
            }
            // Idempotent.
            let qq = quantile_normalize(&q).unwrap();
            for (a, b) in qq.column(0).iter().zip(col.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
