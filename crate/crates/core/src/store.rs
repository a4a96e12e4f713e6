//! Workspace directory: definitions, one file per table, system tables and an
//! append-only write audit. Every write is a whole-file atomic replacement.
//!
//! ```text
//! ROOT/defs/*.ddr        definitions
//! ROOT/tables/*.ddr      TYPE__NAME__v1-v2.ddr, values ordered by dimension name
//! ROOT/system/*.ddr      ltpd, ltpin, lrre
//! ROOT/audit.log
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lang::{parse_workspace, Diagnostic, Loaded, Source, Workspace};
use crate::table::{bind_table, parse_table, series_items, write_table, Table, TableError, TableKey};

const TEMP_SUFFIX: &str = ".tmp";
const ENCODE: &AsciiSet = &NON_ALPHANUMERIC.remove(b'.');

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))]
    Parse(Vec<Diagnostic>),
    #[error("{path}: {error}")]
    Table { path: PathBuf, error: TableError },
    #[error("`{0}` is not a table file name")]
    BadFileName(String),
    #[error("injected crash at write {index} ({point:?})")]
    Crash { index: usize, point: FaultPoint },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Where inside one atomic write a simulated crash happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaultPoint {
    BeforeWrite,
    AfterTemp,
    AfterAudit,
    AfterRename,
}

impl FaultPoint {
    pub const ALL: [FaultPoint; 4] = [FaultPoint::BeforeWrite, FaultPoint::AfterTemp, FaultPoint::AfterAudit, FaultPoint::AfterRename];
}

/// Crash the `index`-th write (counting from 0) at `point`. Once fired, every later
/// write fails too, as if the process were gone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaultInjector {
    pub index: usize,
    pub point: FaultPoint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditRecord {
    pub timestamp: u64,
    pub id: String,
    pub sha256: String,
    pub changed: bool,
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    fault: Option<FaultInjector>,
    writes: usize,
    crashed: bool,
}

pub fn encode(s: &str) -> String {
    utf8_percent_encode(s, ENCODE).to_string()
}

fn decode(s: &str) -> Result<String, StoreError> {
    percent_decode_str(s)
        .decode_utf8()
        .map(|c| c.into_owned())
        .map_err(|_| StoreError::BadFileName(s.to_string()))
}

/// `TYPE__NAME__v1-v2.ddr`, with attribute values ordered by dimension name.
pub fn file_name(key: &TableKey) -> String {
    let mut attrs = key.attrs.clone();
    attrs.sort();
    let values: Vec<String> = attrs.iter().map(|(_, v)| encode(v)).collect();
    let name = key.name.as_deref().map(encode).unwrap_or_else(|| "-".into());
    format!("{}__{}__{}.ddr", encode(&key.series), name, values.join("-"))
}

/// Inverse of [`file_name`]; dimension names come from the series definition.
pub fn parse_file_name(ws: &Workspace, file: &str) -> Result<TableKey, StoreError> {
    let bad = || StoreError::BadFileName(file.to_string());
    let stem = file.strip_suffix(".ddr").ok_or_else(bad)?;
    let mut parts = stem.split("__");
    let (Some(series), Some(name), Some(values), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
        return Err(bad());
    };
    let series = decode(series)?;
    let name = match name {
        "-" => None,
        n => Some(decode(n)?),
    };
    let mut dims: Vec<String> = series_items(ws, &series)
        .map_err(|_| bad())?
        .into_iter()
        .map(|i| i.dimension)
        .collect();
    dims.sort();
    let values: Vec<&str> = if values.is_empty() { Vec::new() } else { values.split('-').collect() };
    if values.len() != dims.len() {
        return Err(bad());
    }
    let attrs = dims.into_iter().zip(values).map(|(d, v)| Ok((d, decode(v)?))).collect::<Result<_, StoreError>>()?;
    Ok(TableKey { series, name, attrs })
}

fn sorted_files(dir: &Path) -> Result<Vec<PathBuf>, StoreError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io(dir))? {
        let path = entry.map_err(io(dir))?.path();
        if path.extension().is_some_and(|e| e == "ddr") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

impl Store {
    /// Open a workspace directory, creating missing parts and removing temp files
    /// left by an interrupted write.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for sub in ["defs", "tables", "system"] {
            let dir = root.join(sub);
            fs::create_dir_all(&dir).map_err(io(&dir))?;
            for entry in fs::read_dir(&dir).map_err(io(&dir))? {
                let path = entry.map_err(io(&dir))?.path();
                if path.to_string_lossy().ends_with(TEMP_SUFFIX) {
                    fs::remove_file(&path).map_err(io(&path))?;
                }
            }
        }
        Ok(Store {
            root,
            fault: None,
            writes: 0,
            crashed: false,
        })
    }

    pub fn with_fault(mut self, fault: FaultInjector) -> Self {
        self.fault = Some(fault);
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Number of atomic writes attempted so far.
    pub fn writes(&self) -> usize {
        self.writes
    }

    pub fn load_workspace(&self) -> Result<Loaded, StoreError> {
        let mut sources = Vec::new();
        for path in sorted_files(&self.root.join("defs"))? {
            let text = fs::read_to_string(&path).map_err(io(&path))?;
            let name = path.strip_prefix(&self.root).unwrap_or(&path).to_string_lossy().into_owned();
            sources.push(Source::new(name, text));
        }
        parse_workspace(&sources).map_err(StoreError::Parse)
    }

    pub fn table_path(&self, key: &TableKey) -> PathBuf {
        self.root.join("tables").join(file_name(key))
    }

    /// Every stored table, in file name order.
    pub fn load_tables(&self, ws: &Workspace) -> Result<Vec<Table>, StoreError> {
        self.tables_where(ws, |_| true)
    }

    pub fn tables_of(&self, ws: &Workspace, series: &str) -> Result<Vec<Table>, StoreError> {
        let prefix = format!("{}__", encode(series));
        self.tables_where(ws, |f| f.starts_with(&prefix))
    }

    fn tables_where(&self, ws: &Workspace, keep: impl Fn(&str) -> bool) -> Result<Vec<Table>, StoreError> {
        let mut out = Vec::new();
        for path in sorted_files(&self.root.join("tables"))? {
            let file = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
            if !keep(&file) {
                continue;
            }
            out.push(read_table(ws, &path)?);
        }
        Ok(out)
    }

    pub fn read_system(&self, name: &str) -> Result<Option<String>, StoreError> {
        let path = self.root.join("system").join(format!("{name}.ddr"));
        match fs::read_to_string(&path) {
            Ok(t) => Ok(Some(t)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io(&path)(e)),
        }
    }

    pub fn write_system(&mut self, name: &str, content: &str) -> Result<bool, StoreError> {
        let path = self.root.join("system").join(format!("{name}.ddr"));
        self.write_atomic(&path, &format!("system/{name}"), content)
    }

    /// Replace a table file. Returns whether the content changed.
    pub fn replace_table(&mut self, table: &Table) -> Result<bool, StoreError> {
        let key = table.key();
        let path = self.table_path(&key);
        let id = format!("tables/{}", file_name(&key));
        self.write_atomic(&path, &id, &write_table(table))
    }

    pub fn would_change(&self, table: &Table) -> bool {
        fs::read_to_string(self.table_path(&table.key())).ok().as_deref() != Some(write_table(table).as_str())
    }

    /// Write the canonical source of a workspace under `defs/`.
    pub fn save_defs(&mut self, ws: &Workspace, file: &str) -> Result<bool, StoreError> {
        let path = self.root.join("defs").join(file);
        self.write_atomic(&path, &format!("defs/{file}"), &ws.to_source())
    }

    fn fault(&mut self, index: usize, point: FaultPoint) -> Result<(), StoreError> {
        if self.fault == Some(FaultInjector { index, point }) {
            self.crashed = true;
            return Err(StoreError::Crash { index, point });
        }
        Ok(())
    }

    /// Temp file, then audit record, then rename into place.
    fn write_atomic(&mut self, path: &Path, id: &str, content: &str) -> Result<bool, StoreError> {
        let index = self.writes;
        self.writes += 1;
        if self.crashed {
            return Err(StoreError::Crash {
                index,
                point: FaultPoint::BeforeWrite,
            });
        }
        self.fault(index, FaultPoint::BeforeWrite)?;
        let changed = fs::read_to_string(path).ok().as_deref() != Some(content);
        let tmp = PathBuf::from(format!("{}{TEMP_SUFFIX}", path.display()));
        {
            let mut f = fs::File::create(&tmp).map_err(io(&tmp))?;
            f.write_all(content.as_bytes()).map_err(io(&tmp))?;
            f.sync_all().map_err(io(&tmp))?;
        }
        self.fault(index, FaultPoint::AfterTemp)?;
        let record = AuditRecord {
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            id: id.to_string(),
            sha256: hex::encode(Sha256::digest(content.as_bytes())),
            changed,
        };
        self.append_audit(&record)?;
        self.fault(index, FaultPoint::AfterAudit)?;
        fs::rename(&tmp, path).map_err(io(path))?;
        self.fault(index, FaultPoint::AfterRename)?;
        Ok(changed)
    }

    fn append_audit(&self, r: &AuditRecord) -> Result<(), StoreError> {
        let path = self.root.join("audit.log");
        let mut f = fs::OpenOptions::new().create(true).append(true).open(&path).map_err(io(&path))?;
        let flag = if r.changed { "changed" } else { "unchanged" };
        writeln!(f, "{} {} {} {flag}", r.timestamp, r.id, r.sha256).map_err(io(&path))
    }

    pub fn audit(&self) -> Result<Vec<AuditRecord>, StoreError> {
        let path = self.root.join("audit.log");
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io(&path)(e)),
        };
        Ok(text
            .lines()
            .filter_map(|l| {
                let f: Vec<&str> = l.split(' ').collect();
                let [ts, id, sha, flag] = f.as_slice() else { return None };
                Some(AuditRecord {
                    timestamp: ts.parse().ok()?,
                    id: id.to_string(),
                    sha256: sha.to_string(),
                    changed: *flag == "changed",
                })
            })
            .collect())
    }
}

pub fn read_table(ws: &Workspace, path: &Path) -> Result<Table, StoreError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    let table_err = |error| StoreError::Table {
        path: path.to_path_buf(),
        error,
    };
    bind_table(ws, &parse_table(&text).map_err(table_err)?).map_err(table_err)
}
