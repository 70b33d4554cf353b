//! CSV ingestion and preprocessing for the UCI Adult and Default-of-Credit-Card
//! datasets.

use crate::data::{standardize_columns, stratified_split, Dataset, SplitTag};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Label,
    /// Read and discarded, e.g. a row id.
    Ignored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Other header spellings accepted for this column.
    #[serde(default)]
    pub aliases: Vec<String>,
}

impl ColumnSpec {
    pub fn new(name: &str, kind: ColumnKind) -> Self {
        Self { name: name.into(), kind, aliases: Vec::new() }
    }

    fn matches(&self, header: &str) -> bool {
        self.name.eq_ignore_ascii_case(header) || self.aliases.iter().any(|a| a.eq_ignore_ascii_case(header))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub columns: Vec<ColumnSpec>,
    pub missing: Vec<String>,
    /// When false, columns are taken positionally in schema order.
    pub has_header: bool,
    /// Lines starting with this prefix are skipped.
    pub comment_prefix: Option<String>,
}

impl TableSchema {
    pub fn validate(&self) -> Result<()> {
        let labels = self.columns.iter().filter(|c| c.kind == ColumnKind::Label).count();
        if labels != 1 {
            return Err(Error::Schema(format!("schema needs exactly one label column, has {labels}")));
        }
        if !self.columns.iter().any(|c| matches!(c.kind, ColumnKind::Numeric | ColumnKind::Categorical)) {
            return Err(Error::Schema("schema has no feature columns".into()));
        }
        Ok(())
    }

    pub fn label_index(&self) -> usize {
        self.columns.iter().position(|c| c.kind == ColumnKind::Label).expect("validated schema")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Num(f64),
    Text(String),
    Missing,
}

/// Parsed rows in schema column order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub schema: TableSchema,
    pub rows: Vec<Vec<Value>>,
    /// Rows with a missing-value sentinel in any column.
    pub flagged: Vec<bool>,
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn clean_rows(&self) -> impl Iterator<Item = &Vec<Value>> {
        self.rows.iter().zip(&self.flagged).filter(|(_, &f)| !f).map(|(r, _)| r)
    }

    /// Appends the rows of `other`, which must share the schema.
    pub fn extend(&mut self, other: RawTable) -> Result<()> {
        if other.schema.columns != self.schema.columns {
            return Err(Error::Schema("cannot concatenate tables with different columns".into()));
        }
        self.rows.extend(other.rows);
        self.flagged.extend(other.flagged);
        Ok(())
    }

    /// Writes the table with a header row; missing cells use the first sentinel.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.schema.columns.iter().map(|c| c.name.as_str()))?;
        let missing = self.schema.missing.first().cloned().unwrap_or_default();
        for row in &self.rows {
            w.write_record(row.iter().map(|v| match v {
                Value::Num(x) => x.to_string(),
                Value::Text(s) => s.clone(),
                Value::Missing => missing.clone(),
            }))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Reads a CSV file according to `schema`. Cells are trimmed; blank lines and
/// comment lines are skipped.
pub fn load_csv(path: impl AsRef<Path>, schema: &TableSchema) -> Result<RawTable> {
    schema.validate()?;
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, schema).map_err(|e| e.context(path.display().to_string()))
}

pub fn parse_csv(text: &str, schema: &TableSchema) -> Result<RawTable> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records().filter(|r| match r {
        Ok(rec) => {
            let blank = rec.iter().all(|f| f.is_empty());
            let comment = schema.comment_prefix.as_deref().is_some_and(|p| rec.get(0).is_some_and(|f| f.starts_with(p)));
            !blank && !comment
        }
        Err(_) => true,
    });

    let positions: Vec<usize> = if schema.has_header {
        let header = records.next().ok_or_else(|| Error::Schema("file has no header row".into()))??;
        let names: Vec<&str> = header.iter().collect();
        schema
            .columns
            .iter()
            .map(|c| {
                names
                    .iter()
                    .position(|h| c.matches(h))
                    .ok_or_else(|| Error::Schema(format!("column `{}` not found in header", c.name)))
            })
            .collect::<Result<_>>()?
    } else {
        (0..schema.columns.len()).collect()
    };

    let mut rows = Vec::new();
    let mut flagged = Vec::new();
    for (row, rec) in records.enumerate() {
        let rec = rec?;
        let mut values = Vec::with_capacity(schema.columns.len());
        let mut missing = false;
        for (spec, &pos) in schema.columns.iter().zip(&positions) {
            let cell = rec.get(pos).ok_or_else(|| Error::RowParse {
                row,
                detail: format!("expected column `{}` at position {pos}, row has {} fields", spec.name, rec.len()),
            })?;
            if schema.missing.iter().any(|m| m == cell) {
                missing = true;
                values.push(Value::Missing);
                continue;
            }
            values.push(match spec.kind {
                ColumnKind::Numeric => Value::Num(cell.parse::<f64>().map_err(|e| Error::RowParse {
                    row,
                    detail: format!("column `{}`: cannot parse `{cell}` as a number: {e}", spec.name),
                })?),
                _ => Value::Text(cell.to_string()),
            });
        }
        rows.push(values);
        flagged.push(missing);
    }
    Ok(RawTable { schema: schema.clone(), rows, flagged })
}

pub const ADULT_ROWS: usize = 45_222;
pub const ADULT_FEATURES: usize = 104;
pub const CREDIT_FEATURES: usize = 23;

pub fn adult_schema() -> TableSchema {
    use ColumnKind::*;
    let cols = [
        ("age", Numeric),
        ("workclass", Categorical),
        ("fnlwgt", Numeric),
        ("education", Categorical),
        ("education-num", Numeric),
        ("marital-status", Categorical),
        ("occupation", Categorical),
        ("relationship", Categorical),
        ("race", Categorical),
        ("sex", Categorical),
        ("capital-gain", Numeric),
        ("capital-loss", Numeric),
        ("hours-per-week", Numeric),
        ("native-country", Categorical),
        ("income", Label),
    ];
    TableSchema {
        columns: cols.iter().map(|&(n, k)| ColumnSpec::new(n, k)).collect(),
        missing: vec!["?".into()],
        has_header: false,
        comment_prefix: Some("|".into()),
    }
}

pub fn credit_schema() -> TableSchema {
    use ColumnKind::*;
    let mut columns = vec![ColumnSpec::new("ID", Ignored)];
    let mut numeric = |name: &str| columns.push(ColumnSpec::new(name, Numeric));
    for n in ["LIMIT_BAL", "SEX", "EDUCATION", "MARRIAGE", "AGE"] {
        numeric(n);
    }
    let mut pay = ColumnSpec::new("PAY_0", Numeric);
    pay.aliases.push("PAY_1".into());
    columns.push(pay);
    for i in 2..=6 {
        columns.push(ColumnSpec::new(&format!("PAY_{i}"), Numeric));
    }
    for i in 1..=6 {
        columns.push(ColumnSpec::new(&format!("BILL_AMT{i}"), Numeric));
    }
    for i in 1..=6 {
        columns.push(ColumnSpec::new(&format!("PAY_AMT{i}"), Numeric));
    }
    columns.push(ColumnSpec {
        name: "default payment next month".into(),
        kind: Label,
        aliases: vec!["default.payment.next.month".into(), "default".into(), "Y".into()],
    });
    TableSchema { columns, missing: vec![], has_header: true, comment_prefix: None }
}

/// Loads and concatenates `adult.data` and `adult.test` from `dir`.
pub fn load_adult(dir: impl AsRef<Path>) -> Result<RawTable> {
    let dir = dir.as_ref();
    let schema = adult_schema();
    let mut table = load_csv(dir.join("adult.data"), &schema)?;
    table.extend(load_csv(dir.join("adult.test"), &schema)?)?;
    Ok(table)
}

pub fn load_credit(path: impl AsRef<Path>) -> Result<RawTable> {
    load_csv(path, &credit_schema())
}

/// Outcome of encoding a raw table, carried next to the datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessSummary {
    pub rows_read: usize,
    pub rows_dropped: usize,
    pub features: usize,
    pub expected_features: usize,
    /// Set when the encoded width differs from `expected_features`.
    pub warning: Option<String>,
}

fn label_of(v: &Value, positive: &dyn Fn(&str) -> Option<bool>, row: usize) -> Result<usize> {
    let text = match v {
        Value::Text(s) => s.clone(),
        Value::Num(x) => x.to_string(),
        Value::Missing => unreachable!("flagged rows are dropped"),
    };
    positive(&text)
        .map(usize::from)
        .ok_or_else(|| Error::RowParse { row, detail: format!("unrecognised label `{text}`") })
}

/// One-hot encodes categoricals (full sorted vocabulary, no dropped level),
/// splits 80/20 stratified, and standardizes the numeric columns on train.
fn encode(
    raw: &RawTable,
    name: &str,
    expected: usize,
    positive: &dyn Fn(&str) -> Option<bool>,
    seed: u64,
) -> Result<(Dataset, Dataset, PreprocessSummary)> {
    let schema = &raw.schema;
    let clean: Vec<&Vec<Value>> = raw.clean_rows().collect();
    let mut feature_names = Vec::new();
    let mut numeric_cols = Vec::new();
    let mut vocabularies = Vec::new();
    for (c, spec) in schema.columns.iter().enumerate() {
        match spec.kind {
            ColumnKind::Numeric => {
                numeric_cols.push(feature_names.len());
                feature_names.push(spec.name.clone());
                vocabularies.push((c, None));
            }
            ColumnKind::Categorical => {
                let vocab: BTreeSet<&str> = clean
                    .iter()
                    .map(|r| match &r[c] {
                        Value::Text(s) => s.as_str(),
                        _ => unreachable!("categorical cells are text"),
                    })
                    .collect();
                let vocab: Vec<String> = vocab.into_iter().map(String::from).collect();
                feature_names.extend(vocab.iter().map(|v| format!("{}={v}", spec.name)));
                vocabularies.push((c, Some(vocab)));
            }
            _ => {}
        }
    }
    let d = feature_names.len();
    let label_col = schema.label_index();
    let mut x = Matrix::zeros(clean.len(), d);
    let mut y = Vec::with_capacity(clean.len());
    for (i, row) in clean.iter().enumerate() {
        let out = x.row_mut(i);
        let mut j = 0;
        for (c, vocab) in &vocabularies {
            match (vocab, &row[*c]) {
                (None, Value::Num(v)) => {
                    out[j] = *v;
                    j += 1;
                }
                (Some(vocab), Value::Text(s)) => {
                    let k = vocab.binary_search(s).expect("vocabulary built from these rows");
                    out[j + k] = 1.0;
                    j += vocab.len();
                }
                _ => unreachable!("cell kinds follow the schema"),
            }
        }
        y.push(label_of(&row[label_col], positive, i)?);
    }

    let warning = (d != expected).then(|| {
        format!("{name}: encoded {d} features, expected {expected}; category vocabularies differ by file version")
    });
    if let Some(w) = &warning {
        log::warn!("{w}");
    }

    let (train_idx, test_idx) = stratified_split(&y, 0.2, seed)?;
    let (train_x, test_x, standardization) =
        standardize_columns(&x.select_rows(&train_idx), &x.select_rows(&test_idx), &numeric_cols)?;
    let make = |split, xm: Matrix, idx: &[usize], baseline: Vec<f64>| Dataset {
        name: name.into(),
        split,
        seed,
        feature_names: feature_names.clone(),
        x: xm,
        y: idx.iter().map(|&i| y[i]).collect(),
        num_classes: 2,
        informative_mask: None,
        ground_truth: None,
        degenerate: vec![false; idx.len()],
        baseline,
        standardization: Some(standardization.clone()),
    };
    let baseline = train_x.column_means();
    let summary = PreprocessSummary {
        rows_read: raw.len(),
        rows_dropped: raw.len() - clean.len(),
        features: d,
        expected_features: expected,
        warning,
    };
    Ok((
        make(SplitTag::Train, train_x, &train_idx, baseline.clone()),
        make(SplitTag::Test, test_x, &test_idx, baseline),
        summary,
    ))
}

/// Drops rows with missing values, maps `>50K` (with or without the trailing
/// period of the test file) to 1 and `<=50K` to 0.
pub fn preprocess_adult(raw: &RawTable, seed: u64) -> Result<(Dataset, Dataset, PreprocessSummary)> {
    let positive = |s: &str| match s.trim_end_matches('.') {
        ">50K" => Some(true),
        "<=50K" => Some(false),
        _ => None,
    };
    encode(raw, "adult", ADULT_FEATURES, &positive, seed)
}

/// All 23 features numeric; default maps to 1.
pub fn preprocess_credit(raw: &RawTable, seed: u64) -> Result<(Dataset, Dataset, PreprocessSummary)> {
    let positive = |s: &str| match s.parse::<f64>() {
        Ok(v) if v == 1.0 => Some(true),
        Ok(v) if v == 0.0 => Some(false),
        _ => None,
    };
    encode(raw, "credit", CREDIT_FEATURES, &positive, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_schema() -> TableSchema {
        TableSchema {
            columns: vec![
                ColumnSpec::new("a", ColumnKind::Numeric),
                ColumnSpec::new("colour", ColumnKind::Categorical),
                ColumnSpec::new("y", ColumnKind::Label),
            ],
            missing: vec!["?".into()],
            has_header: true,
            comment_prefix: None,
        }
    }

    #[test]
    fn sentinel_rows_are_flagged() {
        let t = parse_csv("a,colour,y\n1.5,red,1\n?,blue,0\n-2,blue,0\n", &small_schema()).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.flagged, vec![false, true, false]);
        assert_eq!(t.clean_rows().count(), 2);
        assert_eq!(t.rows[2][0], Value::Num(-2.0));
    }

    #[test]
    fn header_mismatch_names_the_column() {
        let err = parse_csv("a,color,y\n1,red,1\n", &small_schema()).unwrap_err();
        assert!(matches!(&err, Error::Schema(m) if m.contains("colour")), "{err}");
        assert!(matches!(parse_csv("", &small_schema()), Err(Error::Schema(_))));
    }

    #[test]
    fn bad_number_reports_row() {
        let err = parse_csv("a,colour,y\n1,red,1\n2,red,0\nx,red,1\n", &small_schema()).unwrap_err();
        assert!(matches!(err, Error::RowParse { row: 2, .. }), "{err}");
    }

    #[test]
    fn columns_found_by_name_in_any_order() {
        let t = parse_csv("y,colour,extra,a\n1, red ,z,0.25\n", &small_schema()).unwrap();
        assert_eq!(t.rows[0], vec![Value::Num(0.25), Value::Text("red".into()), Value::Text("1".into())]);
    }

    #[test]
    fn export_round_trip() {
        let t = parse_csv("a,colour,y\n0.1,red,1\n?,blue,0\n3.000000000001,blue,0\n", &small_schema()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        t.write_csv(&p).unwrap();
        assert_eq!(load_csv(&p, &small_schema()).unwrap(), t);
    }

    #[test]
    fn adult_quirks_are_handled() {
        let text = "|1x3 Cross validator\n\
            39, State-gov, 77516, Bachelors, 13, Never-married, Adm-clerical, Not-in-family, White, Male, 2174, 0, 40, United-States, <=50K.\n\
            50, ?, 83311, Bachelors, 13, Married-civ-spouse, Exec-managerial, Husband, White, Male, 0, 0, 13, United-States, >50K\n\
            \n";
        let t = parse_csv(text, &adult_schema()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.flagged, vec![false, true]);
        assert_eq!(t.rows[0][14], Value::Text("<=50K.".into()));
    }

    fn synthetic_adult(n: usize) -> RawTable {
        let mut lines = String::new();
        for i in 0..n {
            let work = ["Private", "State-gov", "?"][i % 3];
            let label = if i % 4 == 0 { ">50K." } else { "<=50K" };
            lines.push_str(&format!(
                "{}, {work}, {}, Bachelors, {}, Never-married, Sales, Own-child, White, {}, {}, {}, {}, Peru, {label}\n",
                20 + i % 40,
                1000 + 37 * i,
                9 + i % 5,
                ["Male", "Female"][i % 2],
                (i % 7) * 100,
                (i % 11) * 10,
                30 + i % 20
            ));
        }
        parse_csv(&lines, &adult_schema()).unwrap()
    }

    #[test]
    fn adult_encoding() {
        let raw = synthetic_adult(90);
        let (train, test, summary) = preprocess_adult(&raw, 0).unwrap();
        assert_eq!(summary.rows_dropped, 30);
        // 6 numeric + workclass 2 + one level each for 6 columns + sex 2
        assert_eq!(summary.features, 6 + 2 + 6 + 2);
        assert!(summary.warning.is_some());
        assert_eq!(train.len() + test.len(), 60);
        assert_eq!(train.feature_names[1], "workclass=Private");
        for row in train.x.row_iter().chain(test.x.row_iter()) {
            assert_eq!(row[1] + row[2], 1.0);
            assert_eq!(row[10] + row[11], 1.0);
        }
        let means = train.x.column_means();
        assert!(means[0].abs() < 1e-9);
        assert!(train.y.iter().any(|&v| v == 1) && train.y.iter().any(|&v| v == 0));
    }

    #[test]
    fn credit_fixture() {
        let schema = credit_schema();
        let header: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
        let mut text = header.join(",") + "\n";
        for i in 0..50 {
            let mut row = vec![i.to_string()];
            row.extend((0..23).map(|j| ((i * 7 + j * 13) % 29).to_string()));
            row.push(usize::from(i % 5 == 0).to_string());
            text.push_str(&(row.join(",") + "\n"));
        }
        let raw = parse_csv(&text, &schema).unwrap();
        let (train, test, summary) = preprocess_credit(&raw, 1).unwrap();
        assert_eq!(summary.features, 23);
        assert!(summary.warning.is_none());
        assert_eq!((train.len(), test.len()), (40, 10));
        assert!(train.x.column_means().iter().all(|m| m.abs() < 1e-9));
        assert!(train.y.iter().chain(&test.y).all(|&v| v <= 1));
        assert_eq!(train.y.iter().chain(&test.y).filter(|&&v| v == 1).count(), 10);
    }

    #[test]
    fn schemas_are_valid() {
        adult_schema().validate().unwrap();
        credit_schema().validate().unwrap();
        let mut bad = small_schema();
        bad.columns[0].kind = ColumnKind::Label;
        assert!(bad.validate().is_err());
    }
}
