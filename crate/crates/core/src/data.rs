//! Tabular ingestion: delimited-text loading, schema-driven encoding,
//! stratified splitting, and a planted-disparity generator for desk-scale
//! experiments.
//!
//! The pipeline is `load_table → train_test_split → encode(train) →
//! encode(test, train stats)`, after which `fedsim`'s split helpers carve
//! the encoded rows into client shards. Every step is deterministic given
//! the file bytes, the schema, and the seed.

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::ClientShard;
use crate::scalar::Scalar;

/// Cells treated as missing everywhere (Adult-style files use `?`).
pub const MISSING_MARKERS: [&str; 3] = ["", "?", "NA"];

/// Sentinel level assigned to missing categorical cells, so "missing" becomes
/// an ordinary one-hot category instead of a hole.
pub const MISSING_CATEGORY: &str = "__missing__";

/// Declares how to read a table: which columns carry the label and the
/// sensitive attribute, which are features, and how to binarize.
#[derive(Clone, Debug)]
pub struct TableSchema {
    pub label_column: String,
    /// Raw cell value counted as the positive label.
    pub positive_label_value: String,
    pub sensitive_column: String,
    /// Raw cell value mapped to sensitive group 1.
    pub positive_sensitive_value: String,
    pub numeric_columns: Vec<String>,
    pub categorical_columns: Vec<String>,
    /// Column identifying the client a row belongs to (hospital, region, …),
    /// if the dataset has one.
    pub client_key_column: Option<String>,
    /// Append the binarized sensitive attribute as a feature. Off by
    /// default: the model should not see the protected attribute directly.
    pub include_sensitive_feature: bool,
}

impl TableSchema {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for name in self
            .numeric_columns
            .iter()
            .chain(&self.categorical_columns)
        {
            if !seen.insert(name.as_str()) {
                return Err(Error::Data(format!(
                    "column {name:?} declared as a feature twice"
                )));
            }
            if *name == self.label_column {
                return Err(Error::Data(format!(
                    "label column {name:?} cannot also be a feature"
                )));
            }
            if *name == self.sensitive_column {
                return Err(Error::Data(format!(
                    "sensitive column {name:?} cannot also be a feature; use \
                     include_sensitive_feature instead"
                )));
            }
        }
        if self.numeric_columns.is_empty() && self.categorical_columns.is_empty() {
            return Err(Error::Data("schema declares no feature columns".into()));
        }
        Ok(())
    }

    fn required_columns(&self) -> Vec<&str> {
        let mut cols: Vec<&str> = vec![&self.label_column, &self.sensitive_column];
        cols.extend(self.numeric_columns.iter().map(String::as_str));
        cols.extend(self.categorical_columns.iter().map(String::as_str));
        if let Some(key) = &self.client_key_column {
            cols.push(key);
        }
        cols
    }
}

#[derive(Clone, Debug)]
enum Column {
    Numeric(Vec<f64>),
    Text(Vec<String>),
}

/// A loaded, imputed table: numeric feature columns parsed to `f64`,
/// everything else kept as text. Row order is file order (minus drops).
#[derive(Clone, Debug)]
pub struct Table {
    headers: Vec<String>,
    columns: Vec<Column>,
    n_rows: usize,
}

impl Table {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("column {name:?} not found in table")))
    }

    /// Text cells of a column; errors if the column was parsed as numeric.
    pub fn text_column(&self, name: &str) -> Result<&[String]> {
        match &self.columns[self.column_index(name)?] {
            Column::Text(cells) => Ok(cells),
            Column::Numeric(_) => Err(Error::Data(format!(
                "column {name:?} is numeric; splits and matchers need a text column"
            ))),
        }
    }

    pub fn numeric_column(&self, name: &str) -> Result<&[f64]> {
        match &self.columns[self.column_index(name)?] {
            Column::Numeric(cells) => Ok(cells),
            Column::Text(_) => Err(Error::Data(format!("column {name:?} is not numeric"))),
        }
    }

    /// New table holding the given rows (indices must be in range).
    pub fn subset_rows(&self, rows: &[usize]) -> Table {
        let columns = self
            .columns
            .iter()
            .map(|col| match col {
                Column::Numeric(cells) => {
                    Column::Numeric(rows.iter().map(|&i| cells[i]).collect())
                }
                Column::Text(cells) => {
                    Column::Text(rows.iter().map(|&i| cells[i].clone()).collect())
                }
            })
            .collect();
        Table {
            headers: self.headers.clone(),
            columns,
            n_rows: rows.len(),
        }
    }

    fn bool_column(&self, name: &str, positive: &str) -> Result<Vec<bool>> {
        Ok(self
            .text_column(name)?
            .iter()
            .map(|cell| cell == positive)
            .collect())
    }
}

/// What loading did to the file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub rows_read: usize,
    /// Rows dropped for a missing label or sensitive cell.
    pub rows_dropped: usize,
    pub imputed_numeric_cells: usize,
    pub imputed_categorical_cells: usize,
}

fn is_missing(cell: &str) -> bool {
    MISSING_MARKERS.contains(&cell)
}

/// Reads a delimited text file with a header row, drops rows whose label or
/// sensitive cell is missing, imputes missing numeric cells with the column
/// median and missing text cells with [`MISSING_CATEGORY`], and parses the
/// schema's numeric columns.
pub fn load_table(
    path: impl AsRef<Path>,
    delimiter: u8,
    schema: &TableSchema,
) -> Result<(Table, LoadReport)> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.as_ref().display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Data(format!("bad header row: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    for required in schema.required_columns() {
        if !headers.iter().any(|h| h == required) {
            return Err(Error::Data(format!(
                "schema column {required:?} missing from file header"
            )));
        }
    }

    let label_idx = headers.iter().position(|h| *h == schema.label_column).unwrap();
    let sens_idx = headers
        .iter()
        .position(|h| *h == schema.sensitive_column)
        .unwrap();

    let mut report = LoadReport::default();
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for record in reader.records() {
        let record = record.map_err(|e| Error::Data(format!("unparseable row: {e}")))?;
        report.rows_read += 1;
        if record.len() != headers.len() {
            return Err(Error::Data(format!(
                "row {} has {} fields, header has {}",
                report.rows_read,
                record.len(),
                headers.len()
            )));
        }
        if is_missing(&record[label_idx]) || is_missing(&record[sens_idx]) {
            report.rows_dropped += 1;
            continue;
        }
        for (col, field) in cells.iter_mut().zip(record.iter()) {
            col.push(field.to_owned());
        }
    }
    let n_rows = cells[0].len();

    let mut columns = Vec::with_capacity(headers.len());
    for (header, raw) in headers.iter().zip(cells) {
        if schema.numeric_columns.contains(header) {
            let mut present: Vec<f64> = Vec::with_capacity(raw.len());
            for cell in raw.iter().filter(|c| !is_missing(c)) {
                let v: f64 = cell.parse().map_err(|_| {
                    Error::Data(format!(
                        "column {header:?}: cannot parse {cell:?} as a number"
                    ))
                })?;
                present.push(v);
            }
            let fill = median(&mut present).unwrap_or(0.0);
            let parsed = raw
                .iter()
                .map(|cell| {
                    if is_missing(cell) {
                        report.imputed_numeric_cells += 1;
                        fill
                    } else {
                        cell.parse().unwrap()
                    }
                })
                .collect();
            columns.push(Column::Numeric(parsed));
        } else {
            let parsed = raw
                .into_iter()
                .map(|cell| {
                    if is_missing(&cell) {
                        report.imputed_categorical_cells += 1;
                        MISSING_CATEGORY.to_owned()
                    } else {
                        cell
                    }
                })
                .collect();
            columns.push(Column::Text(parsed));
        }
    }
    if report.rows_dropped > 0 {
        log::warn!(
            "dropped {} of {} rows for missing label/sensitive cells",
            report.rows_dropped,
            report.rows_read
        );
    }
    Ok((
        Table {
            headers,
            columns,
            n_rows,
        },
        report,
    ))
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    })
}

/// Normalization and category statistics computed on the training split and
/// reused verbatim for test data.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodeStats {
    /// Per numeric column: (name, mean, stdev). A zero stdev encodes the
    /// column as all zeros.
    pub numeric: Vec<(String, f64, f64)>,
    /// Per categorical column: levels in first-appearance order.
    pub categorical: Vec<(String, Vec<String>)>,
}

/// Fully numeric view of a table: z-scored numerics, one-hot categoricals,
/// binarized label and sensitive vectors.
#[derive(Clone, Debug)]
pub struct EncodedDataset<F: Scalar> {
    features: Vec<F>,
    feature_dim: usize,
    feature_names: Vec<String>,
    labels: Vec<bool>,
    sensitive: Vec<bool>,
}

impl<F: Scalar> EncodedDataset<F> {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn sensitive(&self) -> &[bool] {
        &self.sensitive
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    /// One shard out of the listed rows.
    pub fn subset(&self, client_id: &str, rows: &[usize]) -> Result<ClientShard<F>> {
        let mut features = Vec::with_capacity(rows.len() * self.feature_dim);
        let mut labels = Vec::with_capacity(rows.len());
        let mut sensitive = Vec::with_capacity(rows.len());
        for &i in rows {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
            sensitive.push(self.sensitive[i]);
        }
        ClientShard::from_flat(client_id, features, self.feature_dim, labels, sensitive)
    }

    /// The whole dataset as a single shard.
    pub fn as_shard(&self, client_id: &str) -> Result<ClientShard<F>> {
        let rows: Vec<usize> = (0..self.n_rows()).collect();
        self.subset(client_id, &rows)
    }
}

/// Encodes a table. With `stats = None` the statistics (means, stdevs,
/// category orders) are computed from this table and returned for reuse;
/// passing training stats encodes test data on the training scale, mapping
/// unseen categories to an all-zero block.
pub fn encode<F: Scalar>(
    table: &Table,
    schema: &TableSchema,
    stats: Option<&EncodeStats>,
) -> Result<(EncodedDataset<F>, EncodeStats)> {
    schema.validate()?;
    let stats = match stats {
        Some(s) => s.clone(),
        None => compute_stats(table, schema)?,
    };

    let mut feature_names = Vec::new();
    for (name, _, _) in &stats.numeric {
        feature_names.push(name.clone());
    }
    for (name, levels) in &stats.categorical {
        for level in levels {
            feature_names.push(format!("{name}={level}"));
        }
    }
    if schema.include_sensitive_feature {
        feature_names.push(format!(
            "{}={}",
            schema.sensitive_column, schema.positive_sensitive_value
        ));
    }
    let feature_dim = feature_names.len();

    let labels = table.bool_column(&schema.label_column, &schema.positive_label_value)?;
    let sensitive =
        table.bool_column(&schema.sensitive_column, &schema.positive_sensitive_value)?;

    let mut numeric_cols = Vec::new();
    for (name, mean, std) in &stats.numeric {
        numeric_cols.push((table.numeric_column(name)?, *mean, *std));
    }
    let mut categorical_cols = Vec::new();
    for (name, levels) in &stats.categorical {
        categorical_cols.push((table.text_column(name)?, levels));
    }

    let mut unseen_logged = BTreeSet::new();
    let mut features = Vec::with_capacity(table.n_rows() * feature_dim);
    for i in 0..table.n_rows() {
        for (cells, mean, std) in &numeric_cols {
            let z = if *std > 0.0 {
                (cells[i] - mean) / std
            } else {
                0.0
            };
            features.push(F::cast(z));
        }
        for (cells, levels) in &categorical_cols {
            let hit = levels.iter().position(|l| *l == cells[i]);
            if hit.is_none() && unseen_logged.insert(cells[i].clone()) {
                log::warn!(
                    "category {:?} unseen in training data; encoding as zeros",
                    cells[i]
                );
            }
            for (j, _) in levels.iter().enumerate() {
                features.push(if hit == Some(j) { F::one() } else { F::zero() });
            }
        }
        if schema.include_sensitive_feature {
            features.push(if sensitive[i] { F::one() } else { F::zero() });
        }
    }

    Ok((
        EncodedDataset {
            features,
            feature_dim,
            feature_names,
            labels,
            sensitive,
        },
        stats,
    ))
}

fn compute_stats(table: &Table, schema: &TableSchema) -> Result<EncodeStats> {
    let mut numeric = Vec::new();
    for name in &schema.numeric_columns {
        let cells = table.numeric_column(name)?;
        let n = cells.len().max(1) as f64;
        let mean = cells.iter().sum::<f64>() / n;
        let var = cells.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if std == 0.0 {
            log::warn!("numeric column {name:?} is constant; it will encode as zeros");
        }
        numeric.push((name.clone(), mean, std));
    }
    let mut categorical = Vec::new();
    for name in &schema.categorical_columns {
        let cells = table.text_column(name)?;
        let mut levels = Vec::new();
        for cell in cells {
            if !levels.contains(cell) {
                levels.push(cell.clone());
            }
        }
        categorical.push((name.clone(), levels));
    }
    Ok(EncodeStats {
        numeric,
        categorical,
    })
}

/// Seeded split stratified by the (label, sensitive) cell so both sides keep
/// every group that has at least two rows. Returns `(train, test)`.
pub fn train_test_split(
    table: &Table,
    schema: &TableSchema,
    test_fraction: f64,
    seed: u64,
) -> Result<(Table, Table)> {
    if !(0.0..1.0).contains(&test_fraction) || test_fraction <= 0.0 {
        return Err(Error::Data(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let labels = table.bool_column(&schema.label_column, &schema.positive_label_value)?;
    let sensitive =
        table.bool_column(&schema.sensitive_column, &schema.positive_sensitive_value)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_rows: Vec<usize> = Vec::new();
    // Fixed stratum order keeps the single RNG stream reproducible.
    for cell in [(false, false), (false, true), (true, false), (true, true)] {
        let mut members: Vec<usize> = (0..table.n_rows())
            .filter(|&i| (labels[i], sensitive[i]) == cell)
            .collect();
        if members.is_empty() {
            continue;
        }
        if members.len() == 1 {
            log::warn!(
                "stratum (label={}, sensitive={}) has a single row; keeping it in train",
                cell.0,
                cell.1
            );
            continue;
        }
        // Fisher-Yates with the shared stream.
        for i in (1..members.len()).rev() {
            let j = rng.gen_range(0..=i);
            members.swap(i, j);
        }
        let want = (members.len() as f64 * test_fraction).round() as usize;
        let take = want.clamp(1, members.len() - 1);
        test_rows.extend(&members[..take]);
    }
    test_rows.sort_unstable();
    let test_set: BTreeSet<usize> = test_rows.iter().copied().collect();
    let train_rows: Vec<usize> = (0..table.n_rows())
        .filter(|i| !test_set.contains(i))
        .collect();
    Ok((table.subset_rows(&train_rows), table.subset_rows(&test_rows)))
}

/// One client of a planted-disparity dataset.
#[derive(Clone, Debug)]
pub struct PlantedClient {
    pub client_id: String,
    pub samples: usize,
    /// Target positive-label rate.
    pub base_rate: f64,
    /// Target gap between the groups' positive-label rates, which an
    /// unconstrained fit then roughly reproduces as its demographic gap.
    pub disparity_strength: f64,
}

/// Generator settings shared by all clients.
#[derive(Clone, Debug)]
pub struct PlantedSpec {
    pub clients: Vec<PlantedClient>,
    /// Informative feature count (feature 0 is the group proxy on top).
    pub feature_dim: usize,
    /// Mean shift of the proxy feature between groups; larger means the
    /// model can infer the group more reliably, so more of the planted gap
    /// survives training.
    pub proxy_strength: f64,
    /// Scale of the ground-truth logistic weights on the signal features.
    pub signal_strength: f64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            clients: Vec::new(),
            feature_dim: 5,
            proxy_strength: 2.0,
            signal_strength: 1.5,
        }
    }
}

/// Draws per-client shards: group `a ~ Bernoulli(1/2)`, features Gaussian
/// with a group-shifted proxy coordinate, labels from a logistic ground
/// truth whose group-dependent intercepts are calibrated (via the probit
/// approximation of a logistic-Gaussian integral) so the groups' label
/// rates straddle `base_rate` by `disparity_strength`.
pub fn generate_planted<F: Scalar>(spec: &PlantedSpec, seed: u64) -> Result<Vec<ClientShard<F>>> {
    if spec.clients.is_empty() {
        return Err(Error::Data("planted spec lists no clients".into()));
    }
    if spec.feature_dim < 2 {
        return Err(Error::Data(
            "planted generator needs at least 2 features (proxy + signal)".into(),
        ));
    }
    for c in &spec.clients {
        if c.samples == 0 {
            return Err(Error::Data(format!("client {:?} has no samples", c.client_id)));
        }
        if !(0.0..=1.0).contains(&c.base_rate) || !(0.0..=1.0).contains(&c.disparity_strength) {
            return Err(Error::Data(format!(
                "client {:?}: base_rate and disparity_strength must lie in [0, 1]",
                c.client_id
            )));
        }
    }

    let d = spec.feature_dim;
    let n_signal = (d - 1) as f64;
    // Ground-truth weights: nothing on the proxy, equal mass on the rest.
    let w_signal = spec.signal_strength / n_signal.sqrt();
    let w_sq_norm = spec.signal_strength * spec.signal_strength;
    // E[sigmoid(z)] for z ~ N(m, s²) ≈ sigmoid(m / sqrt(1 + π s² / 8)).
    let probit_scale = (1.0 + std::f64::consts::PI * w_sq_norm / 8.0).sqrt();
    let logit = |p: f64| (p / (1.0 - p)).ln();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shards = Vec::with_capacity(spec.clients.len());
    for client in &spec.clients {
        let rate0 = (client.base_rate - client.disparity_strength / 2.0).clamp(0.02, 0.98);
        let rate1 = (client.base_rate + client.disparity_strength / 2.0).clamp(0.02, 0.98);
        // Intercepts that hit the per-group target rates; the proxy carries
        // no ground-truth weight, so group means do not enter.
        let intercept0 = probit_scale * logit(rate0);
        let intercept1 = probit_scale * logit(rate1);

        let mut features = Vec::with_capacity(client.samples * d);
        let mut labels = Vec::with_capacity(client.samples);
        let mut sensitive = Vec::with_capacity(client.samples);
        for _ in 0..client.samples {
            let a = rng.gen::<f64>() < 0.5;
            let proxy_mean = if a { spec.proxy_strength } else { 0.0 };
            let mut z = if a { intercept1 } else { intercept0 };
            features.push(F::cast(proxy_mean + standard_normal(&mut rng)));
            for _ in 1..d {
                let x = standard_normal(&mut rng);
                z += w_signal * x;
                features.push(F::cast(x));
            }
            let p = 1.0 / (1.0 + (-z).exp());
            labels.push(rng.gen::<f64>() < p);
            sensitive.push(a);
        }
        shards.push(ClientShard::from_flat(
            client.client_id.clone(),
            features,
            d,
            labels,
            sensitive,
        )?);
    }
    Ok(shards)
}

/// Box-Muller standard normal from the shared uniform stream.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::io::Write;

    fn schema() -> TableSchema {
        TableSchema {
            label_column: "income".into(),
            positive_label_value: ">50K".into(),
            sensitive_column: "sex".into(),
            positive_sensitive_value: "Female".into(),
            numeric_columns: vec!["age".into()],
            categorical_columns: vec!["edu".into()],
            client_key_column: None,
            include_sensitive_feature: false,
        }
    }

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_and_types_columns() {
        let f = write_csv("age,edu,sex,income\n39,PhD,Male,>50K\n50,BSc,Female,<=50K\n28,PhD,Female,>50K\n");
        let (table, report) = load_table(f.path(), b',', &schema()).unwrap();
        assert_eq!(table.n_rows(), 3);
        assert_eq!(report.rows_read, 3);
        assert_eq!(report.rows_dropped, 0);
        assert_eq!(table.numeric_column("age").unwrap(), &[39.0, 50.0, 28.0]);
        assert_eq!(table.text_column("edu").unwrap()[1], "BSc");
    }

    #[test]
    fn drops_rows_missing_label_or_sensitive() {
        let f = write_csv("age,edu,sex,income\n39,PhD,Male,>50K\n50,BSc,,<=50K\n28,PhD,Female,?\n");
        let (table, report) = load_table(f.path(), b',', &schema()).unwrap();
        assert_eq!(table.n_rows(), 1);
        assert_eq!(report.rows_dropped, 2);
    }

    #[test]
    fn imputes_numeric_median_and_categorical_sentinel() {
        let f = write_csv(
            "age,edu,sex,income\n10,PhD,Male,>50K\n?,?,Female,<=50K\n20,BSc,Male,>50K\n40,BSc,Female,<=50K\n",
        );
        let (table, report) = load_table(f.path(), b',', &schema()).unwrap();
        // Median of {10, 20, 40} = 20.
        assert_eq!(table.numeric_column("age").unwrap()[1], 20.0);
        assert_eq!(table.text_column("edu").unwrap()[1], MISSING_CATEGORY);
        assert_eq!(report.imputed_numeric_cells, 1);
        assert_eq!(report.imputed_categorical_cells, 1);
    }

    #[test]
    fn missing_schema_column_is_named() {
        let f = write_csv("age,edu,income\n39,PhD,>50K\n");
        let err = load_table(f.path(), b',', &schema()).unwrap_err().to_string();
        assert!(err.contains("sex"), "message was {err:?}");
    }

    #[test]
    fn unparseable_numeric_cell_is_an_error() {
        let f = write_csv("age,edu,sex,income\nabc,PhD,Male,>50K\n");
        let err = load_table(f.path(), b',', &schema()).unwrap_err().to_string();
        assert!(err.contains("age"), "message was {err:?}");
    }

    #[test]
    fn encode_one_hot_and_zscore() {
        let f = write_csv(
            "age,edu,sex,income\n10,PhD,Male,>50K\n20,BSc,Female,<=50K\n30,PhD,Male,>50K\n",
        );
        let (table, _) = load_table(f.path(), b',', &schema()).unwrap();
        let (enc, stats) = encode::<f64>(&table, &schema(), None).unwrap();
        assert_eq!(
            enc.feature_names(),
            &["age".to_string(), "edu=PhD".to_string(), "edu=BSc".to_string()]
        );
        // age: mean 20, population stdev sqrt(200/3).
        let std = (200.0f64 / 3.0).sqrt();
        assert_relative_eq!(enc.row(0)[0], -10.0 / std, max_relative = 1e-12);
        assert_eq!(&enc.row(0)[1..], &[1.0, 0.0]);
        assert_eq!(&enc.row(1)[1..], &[0.0, 1.0]);
        assert_eq!(enc.labels(), &[true, false, true]);
        assert_eq!(enc.sensitive(), &[false, true, false]);

        // One-hot round-trip: the argmax index recovers the category.
        let levels = &stats.categorical[0].1;
        for (i, expected) in ["PhD", "BSc", "PhD"].iter().enumerate() {
            let block = &enc.row(i)[1..];
            let arg = block.iter().position(|&v| v == 1.0).unwrap();
            assert_eq!(levels[arg], *expected);
        }
    }

    #[test]
    fn encode_reuses_train_stats_and_zeroes_unseen() {
        let train = write_csv("age,edu,sex,income\n10,PhD,Male,>50K\n30,BSc,Female,<=50K\n");
        let (train_table, _) = load_table(train.path(), b',', &schema()).unwrap();
        let (_, stats) = encode::<f64>(&train_table, &schema(), None).unwrap();

        // Test data shifted by +100: encoded with TRAIN mean/stdev.
        let test = write_csv("age,edu,sex,income\n120,MSc,Male,>50K\n");
        let (test_table, _) = load_table(test.path(), b',', &schema()).unwrap();
        let (enc, _) = encode::<f64>(&test_table, &schema(), Some(&stats)).unwrap();
        assert_relative_eq!(enc.row(0)[0], (120.0 - 20.0) / 10.0, max_relative = 1e-12);
        // Unseen category "MSc": whole block zero.
        assert_eq!(&enc.row(0)[1..], &[0.0, 0.0]);
    }

    #[test]
    fn constant_numeric_encodes_as_zeros() {
        let f = write_csv("age,edu,sex,income\n10,PhD,Male,>50K\n10,BSc,Female,<=50K\n");
        let (table, _) = load_table(f.path(), b',', &schema()).unwrap();
        let (enc, stats) = encode::<f64>(&table, &schema(), None).unwrap();
        assert_eq!(stats.numeric[0].2, 0.0);
        assert_eq!(enc.row(0)[0], 0.0);
        assert_eq!(enc.row(1)[0], 0.0);
    }

    #[test]
    fn include_sensitive_feature_appends_indicator() {
        let f = write_csv("age,edu,sex,income\n10,PhD,Male,>50K\n20,BSc,Female,<=50K\n");
        let (table, _) = load_table(f.path(), b',', &schema()).unwrap();
        let mut s = schema();
        s.include_sensitive_feature = true;
        let (enc, _) = encode::<f64>(&table, &s, None).unwrap();
        assert_eq!(enc.feature_names().last().unwrap(), "sex=Female");
        assert_eq!(enc.row(0).last(), Some(&0.0));
        assert_eq!(enc.row(1).last(), Some(&1.0));
    }

    fn stratified_table(rows: usize) -> Table {
        let mut content = String::from("age,edu,sex,income\n");
        for i in 0..rows {
            let sex = if i % 2 == 0 { "Male" } else { "Female" };
            let income = if i % 4 < 2 { ">50K" } else { "<=50K" };
            content.push_str(&format!("{i},PhD,{sex},{income}\n"));
        }
        let f = write_csv(&content);
        load_table(f.path(), b',', &schema()).unwrap().0
    }

    #[test]
    fn split_is_seeded_and_stratified() {
        let table = stratified_table(40);
        // 4 strata of 10 rows; 0.3 of each stratum lands in test.
        let (train, test) = train_test_split(&table, &schema(), 0.3, 42).unwrap();
        assert_eq!(train.n_rows() + test.n_rows(), 40);
        assert_eq!(test.n_rows(), 12);

        let (train2, test2) = train_test_split(&table, &schema(), 0.3, 42).unwrap();
        assert_eq!(train.numeric_column("age").unwrap(), train2.numeric_column("age").unwrap());
        assert_eq!(test.numeric_column("age").unwrap(), test2.numeric_column("age").unwrap());

        // Every (label, sensitive) cell appears on both sides.
        for side in [&train, &test] {
            let labels = side.bool_column("income", ">50K").unwrap();
            let sens = side.bool_column("sex", "Female").unwrap();
            for cell in [(false, false), (false, true), (true, false), (true, true)] {
                assert!(
                    labels.iter().zip(&sens).any(|(&l, &s)| (l, s) == cell),
                    "cell {cell:?} missing"
                );
            }
        }
    }

    #[test]
    fn tiny_stratum_stays_in_train() {
        let f = write_csv(
            "age,edu,sex,income\n1,PhD,Male,>50K\n2,PhD,Male,<=50K\n3,PhD,Male,<=50K\n4,PhD,Male,<=50K\n",
        );
        let (table, _) = load_table(f.path(), b',', &schema()).unwrap();
        let (train, test) = train_test_split(&table, &schema(), 0.5, 1).unwrap();
        // The single >50K row cannot be split; it must remain in train.
        assert!(train.bool_column("income", ">50K").unwrap().contains(&true));
        assert!(!test.bool_column("income", ">50K").unwrap().contains(&true));
    }

    fn planted_two_client_spec() -> PlantedSpec {
        PlantedSpec {
            clients: vec![
                PlantedClient {
                    client_id: "low".into(),
                    samples: 4000,
                    base_rate: 0.4,
                    disparity_strength: 0.1,
                },
                PlantedClient {
                    client_id: "high".into(),
                    samples: 4000,
                    base_rate: 0.4,
                    disparity_strength: 0.3,
                },
            ],
            ..PlantedSpec::default()
        }
    }

    #[test]
    fn planted_rates_match_targets() {
        let shards = generate_planted::<f64>(&planted_two_client_spec(), 5).unwrap();
        for (shard, strength) in shards.iter().zip([0.1, 0.3]) {
            // Realized per-group label rates straddle the base rate by the
            // requested strength, up to sampling noise on 4000 draws.
            let mut rate = [0.0f64; 2];
            let mut count = [0usize; 2];
            for (&y, &a) in shard.labels().iter().zip(shard.sensitive()) {
                let g = a as usize;
                count[g] += 1;
                rate[g] += y as u8 as f64;
            }
            let gap = rate[1] / count[1] as f64 - rate[0] / count[0] as f64;
            assert!(
                (gap - strength).abs() < 0.05,
                "label-rate gap {gap} vs planted {strength}"
            );
        }
    }

    #[test]
    fn planted_is_deterministic() {
        let a = generate_planted::<f64>(&planted_two_client_spec(), 9).unwrap();
        let b = generate_planted::<f64>(&planted_two_client_spec(), 9).unwrap();
        for (sa, sb) in a.iter().zip(&b) {
            assert_eq!(sa.labels(), sb.labels());
            assert_eq!(sa.sensitive(), sb.sensitive());
            assert_eq!(sa.row(0), sb.row(0));
        }
        let c = generate_planted::<f64>(&planted_two_client_spec(), 10).unwrap();
        assert_ne!(a[0].labels(), c[0].labels());
    }
}
