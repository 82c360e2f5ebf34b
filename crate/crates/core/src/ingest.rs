//! Scorecard CSV ingestion: cell classification, multi-year concatenation and
//! construction of the coalesced net-price label.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const YEAR: &str = "YEAR";
pub const NPT4_PUB: &str = "NPT4_PUB";
pub const NPT4_PRIV: &str = "NPT4_PRIV";

pub const NULL_SENTINEL: &str = "NULL";
pub const PRIVACY_SENTINEL: &str = "PrivacySuppressed";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingReason {
    Empty,
    NullSentinel,
    PrivacySuppressed,
    Unparseable,
}

/// One parsed cell. Serializes compactly: numbers as JSON numbers, text as
/// strings and missing cells as `{"missing": "<reason>"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CellValue {
    Numeric(f64),
    Text(String),
    Missing { missing: MissingReason },
}

impl CellValue {
    pub fn missing(reason: MissingReason) -> Self {
        CellValue::Missing { missing: reason }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            CellValue::Numeric(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, CellValue::Missing { .. })
    }

    pub fn missing_reason(&self) -> Option<MissingReason> {
        match self {
            CellValue::Missing { missing } => Some(*missing),
            _ => None,
        }
    }
}

/// Per-reason tally of missing cells seen while parsing.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingCounts(pub BTreeMap<MissingReason, u64>);

impl MissingCounts {
    pub fn record(&mut self, reason: MissingReason) {
        *self.0.entry(reason).or_insert(0) += 1;
    }

    pub fn get(&self, reason: MissingReason) -> u64 {
        self.0.get(&reason).copied().unwrap_or(0)
    }

    pub fn merge(&mut self, other: &MissingCounts) {
        for (reason, n) in &other.0 {
            *self.0.entry(*reason).or_insert(0) += n;
        }
    }
}

/// Classify one raw CSV field. Total: every input maps to exactly one cell,
/// and an unparseable numeric bumps the `unparseable` counter.
pub fn parse_cell(text: &str, kind: ColumnKind, counts: &mut MissingCounts) -> CellValue {
    let reason = match text {
        "" => Some(MissingReason::Empty),
        NULL_SENTINEL => Some(MissingReason::NullSentinel),
        PRIVACY_SENTINEL => Some(MissingReason::PrivacySuppressed),
        _ => None,
    };
    if let Some(reason) = reason {
        counts.record(reason);
        return CellValue::missing(reason);
    }
    match kind {
        ColumnKind::Categorical => CellValue::Text(text.to_owned()),
        ColumnKind::Numeric => match text.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => CellValue::Numeric(v),
            _ => {
                counts.record(MissingReason::Unparseable);
                CellValue::missing(MissingReason::Unparseable)
            }
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub cells: Vec<CellValue>,
}

impl Column {
    pub fn missing_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_missing()).count()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub path: String,
    pub year: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawTable {
    pub columns: Vec<Column>,
    pub n_rows: usize,
    pub provenance: Vec<Provenance>,
}

impl RawTable {
    /// Builds a table and checks the shape invariants.
    pub fn new(columns: Vec<Column>, n_rows: usize, provenance: Vec<Provenance>) -> Result<Self> {
        let mut seen = HashSet::new();
        for col in &columns {
            if !seen.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column {:?}", col.name)));
            }
            if col.cells.len() != n_rows {
                return Err(Error::Schema(format!(
                    "column {:?} has {} cells, expected {}",
                    col.name,
                    col.cells.len(),
                    n_rows
                )));
            }
        }
        if let Some(year) = columns.iter().find(|c| c.name == YEAR) {
            let ok = year
                .cells
                .iter()
                .all(|c| matches!(c, CellValue::Numeric(v) if v.fract() == 0.0));
            if !ok {
                return Err(Error::Schema("YEAR column has a non-integer cell".into()));
            }
        }
        Ok(RawTable {
            columns,
            n_rows,
            provenance,
        })
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    /// Rows restricted to `rows`, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> RawTable {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                kind: c.kind,
                cells: rows.iter().map(|&r| c.cells[r].clone()).collect(),
            })
            .collect();
        RawTable {
            columns,
            n_rows: rows.len(),
            provenance: self.provenance.clone(),
        }
    }

    /// Drops columns whose missing fraction exceeds `max_fraction`, except the
    /// ones named in `keep`. Returns the dropped `(name, fraction)` pairs.
    pub fn drop_sparse_columns(&mut self, max_fraction: f64, keep: &[&str]) -> Vec<DroppedColumn> {
        if self.n_rows == 0 {
            return Vec::new();
        }
        let n = self.n_rows as f64;
        let mut dropped = Vec::new();
        self.columns.retain(|c| {
            if keep.contains(&c.name.as_str()) {
                return true;
            }
            let frac = c.missing_count() as f64 / n;
            if frac > max_fraction {
                log::warn!(
                    "dropping column {} ({:.1}% missing)",
                    c.name,
                    100.0 * frac
                );
                dropped.push(DroppedColumn {
                    name: c.name.clone(),
                    missing_fraction: frac,
                });
                false
            } else {
                true
            }
        });
        dropped
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub name: String,
    pub missing_fraction: f64,
}

/// Declared kind of one selected column.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDecl {
    pub name: String,
    pub kind: ColumnKind,
}

/// The column-spec file: a JSON list of `{name, kind}` declarations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColumnSpec(pub Vec<ColumnDecl>);

impl Default for ColumnSpec {
    fn default() -> Self {
        let decl = |name: &str, kind| ColumnDecl {
            name: name.to_owned(),
            kind,
        };
        ColumnSpec(vec![
            decl("COSTT4_A", ColumnKind::Numeric),
            decl("CONTROL", ColumnKind::Categorical),
            decl("TUITIONFEE_IN", ColumnKind::Numeric),
            decl("TUITIONFEE_OUT", ColumnKind::Numeric),
            decl(YEAR, ColumnKind::Numeric),
        ])
    }
}

impl ColumnSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: ColumnSpec =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for d in &self.0 {
            if !seen.insert(d.name.as_str()) {
                return Err(Error::Schema(format!("column {:?} declared twice", d.name)));
            }
            if d.name == NPT4_PUB || d.name == NPT4_PRIV {
                return Err(Error::Schema(format!(
                    "label column {} cannot be a feature",
                    d.name
                )));
            }
        }
        Ok(())
    }

    /// Kind used when parsing `name`. Label columns and YEAR are always
    /// numeric; undeclared columns are kept verbatim as text.
    pub fn kind_of(&self, name: &str) -> ColumnKind {
        if name == NPT4_PUB || name == NPT4_PRIV || name == YEAR {
            return ColumnKind::Numeric;
        }
        self.0
            .iter()
            .find(|d| d.name == name)
            .map(|d| d.kind)
            .unwrap_or(ColumnKind::Categorical)
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.0.iter().map(|d| d.name.as_str()).collect()
    }
}

/// Reads one yearly CSV file and appends a YEAR column filled with `year`.
pub fn load_table(path: &Path, year: i64, spec: &ColumnSpec) -> Result<(RawTable, MissingCounts)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes.as_slice());

    let headers: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').to_owned())
        .collect();
    let mut seen = HashSet::new();
    for h in &headers {
        if !seen.insert(h.as_str()) {
            return Err(Error::Schema(format!(
                "{}: duplicate header {:?}",
                path.display(),
                h
            )));
        }
    }
    if seen.contains(YEAR) {
        return Err(Error::Schema(format!(
            "{}: file already has a {} column",
            path.display(),
            YEAR
        )));
    }

    let kinds: Vec<ColumnKind> = headers.iter().map(|h| spec.kind_of(h)).collect();
    let mut cells: Vec<Vec<CellValue>> = vec![Vec::new(); headers.len()];
    let mut counts = MissingCounts::default();
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record).map_err(csv_err)? {
        if record.len() != headers.len() {
            return Err(Error::RaggedRow {
                path: path.to_path_buf(),
                line: record.position().map(|p| p.line()).unwrap_or(0),
                expected: headers.len(),
                found: record.len(),
            });
        }
        for (i, field) in record.iter().enumerate() {
            cells[i].push(parse_cell(field, kinds[i], &mut counts));
        }
    }

    let n_rows = cells.first().map(Vec::len).unwrap_or(0);
    let mut columns: Vec<Column> = headers
        .into_iter()
        .zip(kinds)
        .zip(cells)
        .map(|((name, kind), cells)| Column { name, kind, cells })
        .collect();
    columns.push(Column {
        name: YEAR.to_owned(),
        kind: ColumnKind::Numeric,
        cells: vec![CellValue::Numeric(year as f64); n_rows],
    });
    let table = RawTable::new(
        columns,
        n_rows,
        vec![Provenance {
            path: path.display().to_string(),
            year,
        }],
    )?;
    Ok((table, counts))
}

/// Row-wise concatenation over the union of column names.
///
/// Inputs are ordered by (year, source path) first, so the result does not
/// depend on the order in which files were loaded. Columns a table lacks are
/// filled with `Missing(empty)`.
pub fn concat_years(tables: Vec<RawTable>) -> Result<RawTable> {
    if tables.is_empty() {
        return Err(Error::Schema("no tables to concatenate".into()));
    }
    for t in &tables {
        if t.column(YEAR).is_none() {
            return Err(Error::Schema(format!(
                "table from {:?} has no {} column",
                t.provenance.first().map(|p| p.path.as_str()).unwrap_or("?"),
                YEAR
            )));
        }
    }
    let mut tables = tables;
    tables.sort_by(|a, b| {
        let key = |t: &RawTable| {
            t.provenance
                .first()
                .map(|p| (p.year, p.path.clone()))
                .unwrap_or_default()
        };
        key(a).cmp(&key(b))
    });

    let mut order: Vec<(String, ColumnKind)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for t in &tables {
        for c in &t.columns {
            match index.get(&c.name) {
                Some(&i) if order[i].1 != c.kind => {
                    return Err(Error::Schema(format!(
                        "column {} is {:?} in one year and {:?} in another",
                        c.name, order[i].1, c.kind
                    )));
                }
                Some(_) => {}
                None => {
                    index.insert(c.name.clone(), order.len());
                    order.push((c.name.clone(), c.kind));
                }
            }
        }
    }

    let n_rows: usize = tables.iter().map(|t| t.n_rows).sum();
    let mut columns: Vec<Column> = order
        .into_iter()
        .map(|(name, kind)| Column {
            name,
            kind,
            cells: Vec::with_capacity(n_rows),
        })
        .collect();
    let mut provenance = Vec::new();
    for t in tables {
        let mut by_name: HashMap<String, Vec<CellValue>> =
            t.columns.into_iter().map(|c| (c.name, c.cells)).collect();
        for col in &mut columns {
            match by_name.remove(&col.name) {
                Some(cells) => col.cells.extend(cells),
                None => col
                    .cells
                    .extend(std::iter::repeat_n(CellValue::missing(MissingReason::Empty), t.n_rows)),
            }
        }
        provenance.extend(t.provenance);
    }
    RawTable::new(columns, n_rows, provenance)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Public,
    Private,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelPolicy {
    #[default]
    Combined,
    PublicOnly,
    PrivateOnly,
}

impl LabelPolicy {
    pub fn admits(self, source: LabelSource) -> bool {
        match self {
            LabelPolicy::Combined => true,
            LabelPolicy::PublicOnly => source == LabelSource::Public,
            LabelPolicy::PrivateOnly => source == LabelSource::Private,
        }
    }
}

/// Feature columns plus the coalesced net-price label (USD per year).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledTable {
    pub table: RawTable,
    pub label: Vec<f64>,
    pub label_source: Vec<LabelSource>,
    /// Rows of the source table that had no usable net price.
    pub dropped_rows: usize,
}

impl LabeledTable {
    pub fn n_rows(&self) -> usize {
        self.label.len()
    }

    pub fn select_rows(&self, rows: &[usize]) -> LabeledTable {
        LabeledTable {
            table: self.table.select_rows(rows),
            label: rows.iter().map(|&r| self.label[r]).collect(),
            label_source: rows.iter().map(|&r| self.label_source[r]).collect(),
            dropped_rows: 0,
        }
    }

    /// Keeps only rows whose label source the policy admits.
    pub fn filter_policy(&self, policy: LabelPolicy) -> LabeledTable {
        let rows: Vec<usize> = (0..self.n_rows())
            .filter(|&r| policy.admits(self.label_source[r]))
            .collect();
        let mut out = self.select_rows(&rows);
        out.dropped_rows = self.dropped_rows;
        out
    }
}

fn usable_label(cell: &CellValue) -> Option<f64> {
    cell.as_f64().filter(|v| *v >= 0.0)
}

/// Coalesces NPT4_PUB then NPT4_PRIV into the label and restricts the table
/// to `feature_columns` (in that order). Rows with neither are dropped.
pub fn build_labeled(table: &RawTable, feature_columns: &[&str]) -> Result<LabeledTable> {
    let public = table
        .column(NPT4_PUB)
        .ok_or_else(|| Error::Schema(format!("missing label column {NPT4_PUB}")))?;
    let private = table
        .column(NPT4_PRIV)
        .ok_or_else(|| Error::Schema(format!("missing label column {NPT4_PRIV}")))?;
    let mut features = Vec::with_capacity(feature_columns.len());
    for &name in feature_columns {
        if name == NPT4_PUB || name == NPT4_PRIV {
            return Err(Error::Schema(format!("label column {name} listed as a feature")));
        }
        let col = table
            .column(name)
            .ok_or_else(|| Error::Schema(format!("feature column {name} not in table")))?;
        features.push(col);
    }

    let mut keep = Vec::with_capacity(table.n_rows);
    let mut label = Vec::with_capacity(table.n_rows);
    let mut label_source = Vec::with_capacity(table.n_rows);
    for r in 0..table.n_rows {
        if let Some(v) = usable_label(&public.cells[r]) {
            label.push(v);
            label_source.push(LabelSource::Public);
        } else if let Some(v) = usable_label(&private.cells[r]) {
            label.push(v);
            label_source.push(LabelSource::Private);
        } else {
            continue;
        }
        keep.push(r);
    }
    let dropped_rows = table.n_rows - keep.len();
    if keep.is_empty() {
        return Err(Error::EmptyLabel {
            dropped: dropped_rows,
        });
    }

    let columns = features
        .into_iter()
        .map(|c| Column {
            name: c.name.clone(),
            kind: c.kind,
            cells: keep.iter().map(|&r| c.cells[r].clone()).collect(),
        })
        .collect();
    Ok(LabeledTable {
        table: RawTable::new(columns, keep.len(), table.provenance.clone())?,
        label,
        label_source,
        dropped_rows,
    })
}

/// Summary written next to the snapshot by `ingest`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub sources: Vec<Provenance>,
    pub rows_read: usize,
    pub rows_dropped_no_label: usize,
    pub rows_dropped_by_policy: usize,
    pub rows_kept: usize,
    pub label_policy: LabelPolicy,
    pub missing_cells: MissingCounts,
    pub columns_dropped_for_missingness: Vec<DroppedColumn>,
    pub feature_columns: Vec<String>,
}

/// Input file paired with the academic year it covers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearFile {
    pub path: PathBuf,
    pub year: i64,
}

/// Full ingest: load every file (concurrently), concatenate, drop sparse
/// feature columns, build the label and apply the label policy.
pub fn ingest_files(
    files: &[YearFile],
    spec: &ColumnSpec,
    policy: LabelPolicy,
    max_missing_fraction: f64,
) -> Result<(LabeledTable, IngestReport)> {
    use rayon::prelude::*;

    let loaded: Vec<(RawTable, MissingCounts)> = files
        .par_iter()
        .map(|f| load_table(&f.path, f.year, spec))
        .collect::<Result<_>>()?;
    let mut missing_cells = MissingCounts::default();
    let mut tables = Vec::with_capacity(loaded.len());
    for (t, c) in loaded {
        missing_cells.merge(&c);
        tables.push(t);
    }
    let mut table = concat_years(tables)?;
    let rows_read = table.n_rows;

    let declared = spec.feature_names();
    // only declared feature columns are subject to the sparsity rule
    let protected: Vec<String> = table
        .column_names()
        .into_iter()
        .filter(|n| !declared.contains(n) || *n == YEAR)
        .map(str::to_owned)
        .collect();
    let protected: Vec<&str> = protected.iter().map(String::as_str).collect();
    let dropped_cols = table.drop_sparse_columns(max_missing_fraction, &protected);

    let features: Vec<&str> = declared
        .iter()
        .copied()
        .filter(|name| {
            let present = table.column(name).is_some();
            if !present && !dropped_cols.iter().any(|d| d.name == *name) {
                log::warn!("declared column {name} not found in any input file");
            }
            present
        })
        .collect();
    let labeled = build_labeled(&table, &features)?;
    let filtered = labeled.filter_policy(policy);
    if filtered.n_rows() == 0 {
        return Err(Error::EmptyLabel {
            dropped: labeled.dropped_rows,
        });
    }
    let report = IngestReport {
        sources: table.provenance.clone(),
        rows_read,
        rows_dropped_no_label: labeled.dropped_rows,
        rows_dropped_by_policy: labeled.n_rows() - filtered.n_rows(),
        rows_kept: filtered.n_rows(),
        label_policy: policy,
        missing_cells,
        columns_dropped_for_missingness: dropped_cols,
        feature_columns: features.iter().map(|s| s.to_string()).collect(),
    };
    Ok((filtered, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(dir: &Path, name: &str, body: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    fn counts() -> MissingCounts {
        MissingCounts::default()
    }

    #[test]
    fn parse_cell_classification() {
        let mut c = counts();
        assert_eq!(
            parse_cell("13415", ColumnKind::Numeric, &mut c),
            CellValue::Numeric(13415.0)
        );
        assert_eq!(
            parse_cell("NULL", ColumnKind::Numeric, &mut c),
            CellValue::missing(MissingReason::NullSentinel)
        );
        assert_eq!(
            parse_cell("", ColumnKind::Categorical, &mut c),
            CellValue::missing(MissingReason::Empty)
        );
        assert_eq!(
            parse_cell("PrivacySuppressed", ColumnKind::Numeric, &mut c),
            CellValue::missing(MissingReason::PrivacySuppressed)
        );
        assert_eq!(c.get(MissingReason::Unparseable), 0);
        assert_eq!(
            parse_cell("abc", ColumnKind::Numeric, &mut c),
            CellValue::missing(MissingReason::Unparseable)
        );
        assert_eq!(c.get(MissingReason::Unparseable), 1);
        assert_eq!(
            parse_cell("abc", ColumnKind::Categorical, &mut c),
            CellValue::Text("abc".into())
        );
        // sentinels are case-sensitive
        assert_eq!(
            parse_cell("null", ColumnKind::Categorical, &mut c),
            CellValue::Text("null".into())
        );
        assert_eq!(
            parse_cell("inf", ColumnKind::Numeric, &mut c),
            CellValue::missing(MissingReason::Unparseable)
        );
    }

    #[test]
    fn load_single_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_csv(dir.path(), "a.csv", "UNITID,CONTROL,NPT4_PUB\n100654,1,13415\n");
        let (t, _) = load_table(&p, 2015, &ColumnSpec::default()).unwrap();
        assert_eq!(t.n_rows, 1);
        assert_eq!(t.column_names(), vec!["UNITID", "CONTROL", "NPT4_PUB", "YEAR"]);
        assert_eq!(t.column("YEAR").unwrap().cells[0], CellValue::Numeric(2015.0));
        assert_eq!(t.column("NPT4_PUB").unwrap().cells[0], CellValue::Numeric(13415.0));
        assert_eq!(t.column("CONTROL").unwrap().cells[0], CellValue::Text("1".into()));
        assert_eq!(t.provenance.len(), 1);
        assert_eq!(t.provenance[0].year, 2015);
    }

    #[test]
    fn load_privacy_and_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_csv(dir.path(), "a.csv", "COSTT4_A,NPT4_PUB\nPrivacySuppressed,1\n");
        let (t, c) = load_table(&p, 2011, &ColumnSpec::default()).unwrap();
        assert_eq!(
            t.column("COSTT4_A").unwrap().cells[0],
            CellValue::missing(MissingReason::PrivacySuppressed)
        );
        assert_eq!(c.get(MissingReason::PrivacySuppressed), 1);

        let p = write_csv(dir.path(), "b.csv", "COSTT4_A,NPT4_PUB\n");
        let (t, _) = load_table(&p, 2011, &ColumnSpec::default()).unwrap();
        assert_eq!(t.n_rows, 0);
        assert_eq!(t.columns.len(), 3);
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.csv");
        assert!(matches!(
            load_table(&missing, 2010, &ColumnSpec::default()),
            Err(Error::Io { .. })
        ));
        let p = write_csv(dir.path(), "dup.csv", "A,A\n1,2\n");
        assert!(matches!(
            load_table(&p, 2010, &ColumnSpec::default()),
            Err(Error::Schema(_))
        ));
        let p = write_csv(dir.path(), "ragged.csv", "A,B\n1,2\n3\n");
        match load_table(&p, 2010, &ColumnSpec::default()) {
            Err(Error::RaggedRow {
                line, expected, found, ..
            }) => {
                assert_eq!((line, expected, found), (3, 2, 1));
            }
            other => panic!("expected ragged row error, got {other:?}"),
        }
    }

    #[test]
    fn load_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_csv(
            dir.path(),
            "a.csv",
            "CONTROL,COSTT4_A,NPT4_PUB,NPT4_PRIV\n1,2.5,NULL,3\n2,,4,PrivacySuppressed\n",
        );
        let a = load_table(&p, 2012, &ColumnSpec::default()).unwrap();
        let b = load_table(&p, 2012, &ColumnSpec::default()).unwrap();
        assert_eq!(
            serde_json::to_vec(&a.0).unwrap(),
            serde_json::to_vec(&b.0).unwrap()
        );
    }

    fn table(year: i64, cols: &[(&str, ColumnKind, Vec<CellValue>)]) -> RawTable {
        let n = cols.first().map(|c| c.2.len()).unwrap_or(0);
        let mut columns: Vec<Column> = cols
            .iter()
            .map(|(n, k, c)| Column {
                name: n.to_string(),
                kind: *k,
                cells: c.clone(),
            })
            .collect();
        columns.push(Column {
            name: YEAR.into(),
            kind: ColumnKind::Numeric,
            cells: vec![CellValue::Numeric(year as f64); n],
        });
        RawTable::new(
            columns,
            n,
            vec![Provenance {
                path: format!("{year}.csv"),
                year,
            }],
        )
        .unwrap()
    }

    #[test]
    fn concat_two_years_and_union_fill() {
        use CellValue::Numeric as N;
        let a = table(2010, &[("COSTT4_A", ColumnKind::Numeric, vec![N(1.0)])]);
        let b = table(2011, &[("OTHER", ColumnKind::Numeric, vec![N(2.0)])]);
        // reversed input order must not matter
        let t = concat_years(vec![b.clone(), a.clone()]).unwrap();
        assert_eq!(t, concat_years(vec![a, b]).unwrap());
        assert_eq!(t.n_rows, 2);
        assert_eq!(t.column(YEAR).unwrap().cells, vec![N(2010.0), N(2011.0)]);
        assert_eq!(
            t.column("COSTT4_A").unwrap().cells[1],
            CellValue::missing(MissingReason::Empty)
        );
        assert_eq!(
            t.column("OTHER").unwrap().cells[0],
            CellValue::missing(MissingReason::Empty)
        );
    }

    #[test]
    fn concat_twelve_years() {
        let tables: Vec<_> = (2010..2022)
            .map(|y| table(y, &[("X", ColumnKind::Numeric, vec![CellValue::Numeric(1.0); 3])]))
            .collect();
        let t = concat_years(tables).unwrap();
        assert_eq!(t.provenance.len(), 12);
        assert_eq!(t.n_rows, 36);
    }

    #[test]
    fn concat_kind_conflict() {
        let a = table(2010, &[("X", ColumnKind::Numeric, vec![CellValue::Numeric(1.0)])]);
        let b = table(2011, &[("X", ColumnKind::Categorical, vec![CellValue::Text("1".into())])]);
        assert!(matches!(concat_years(vec![a, b]), Err(Error::Schema(_))));
        assert!(concat_years(vec![]).is_err());
    }

    #[test]
    fn labels_coalesce_and_drop() {
        use CellValue::Numeric as N;
        let m = || CellValue::missing(MissingReason::NullSentinel);
        let t = table(
            2015,
            &[
                ("CONTROL", ColumnKind::Categorical, vec![
                    CellValue::Text("1".into()),
                    CellValue::Text("2".into()),
                    CellValue::Text("3".into()),
                ]),
                (NPT4_PUB, ColumnKind::Numeric, vec![N(13415.0), m(), m()]),
                (NPT4_PRIV, ColumnKind::Numeric, vec![m(), N(25000.0), m()]),
            ],
        );
        let l = build_labeled(&t, &["CONTROL"]).unwrap();
        assert_eq!(l.label, vec![13415.0, 25000.0]);
        assert_eq!(l.label_source, vec![LabelSource::Public, LabelSource::Private]);
        assert_eq!(l.dropped_rows, 1);
        assert_eq!(l.table.column_names(), vec!["CONTROL"]);
        assert_eq!(l.filter_policy(LabelPolicy::PublicOnly).label, vec![13415.0]);
        assert_eq!(l.filter_policy(LabelPolicy::PrivateOnly).label, vec![25000.0]);

        assert!(matches!(
            build_labeled(&t, &[NPT4_PUB]),
            Err(Error::Schema(_))
        ));
        assert!(matches!(build_labeled(&t, &["NOPE"]), Err(Error::Schema(_))));

        let empty = table(
            2015,
            &[
                (NPT4_PUB, ColumnKind::Numeric, vec![m()]),
                (NPT4_PRIV, ColumnKind::Numeric, vec![m()]),
            ],
        );
        assert!(matches!(
            build_labeled(&empty, &[]),
            Err(Error::EmptyLabel { dropped: 1 })
        ));
    }

    #[test]
    fn sparse_columns_dropped() {
        use CellValue::Numeric as N;
        let m = || CellValue::missing(MissingReason::Empty);
        let mut t = table(
            2015,
            &[
                ("A", ColumnKind::Numeric, vec![N(1.0), m(), m()]),
                ("B", ColumnKind::Numeric, vec![N(1.0), N(2.0), m()]),
            ],
        );
        let dropped = t.drop_sparse_columns(0.5, &[]);
        assert_eq!(dropped.len(), 1);
        assert_eq!(dropped[0].name, "A");
        assert!(t.column("B").is_some());
    }

    #[test]
    fn cell_json_shape() {
        let cells = vec![
            CellValue::Numeric(1.5),
            CellValue::Text("2".into()),
            CellValue::missing(MissingReason::PrivacySuppressed),
        ];
        let s = serde_json::to_string(&cells).unwrap();
        assert_eq!(s, r#"[1.5,"2",{"missing":"privacy_suppressed"}]"#);
        let back: Vec<CellValue> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cells);
    }
}
