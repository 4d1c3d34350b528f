//! Command implementations behind the CLI, and the on-disk database of
//! computed polyhedra and quotient complexes.
//!
//! Layout of a database directory:
//!
//! ```text
//! DB/index.json            summary of every record, sorted by |disc|
//! DB/m<m>/polyhedron.json  hemisphere list, vertices and cells
//! DB/m<m>/complex.json     quotient complex
//! DB/m<m>/record.json      hashes of the two files, table row, timings
//! ```
//!
//! All files are canonical JSON (sorted keys, pretty-printed, trailing
//! newline) and are replaced atomically. A stored file is trusted only if its
//! SHA-256 matches the record; anything else is recomputed.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::complex::{build_quotient, ComplexError, QuotientComplex};
use crate::hemis::Hemisphere;
use crate::homology::{spectral_checks, table_row_from, HomologyError, TableRow};
use crate::qfield::{is_square_free, FieldCtx, FieldError, Rational};
use crate::swan::{
    audit_termination, compute_polyhedron, FacePolygon, HemisphereList, Polyhedron, PruneRule,
    SwanConfig, SwanError, Vertex, VertexSet,
};
use crate::AlgInt;

/// Version of every JSON document written by this module.
pub const SCHEMA: u32 = 1;

/// Environment variable naming the default database directory.
pub const DB_ENV: &str = "BIANCHI_DB";

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    InvalidInput(#[from] FieldError),
    #[error("m = {m}: {source}")]
    Swan { m: i64, source: SwanError },
    #[error("m = {m}: {source}")]
    Complex { m: i64, source: ComplexError },
    #[error("m = {m}: {source}")]
    Homology { m: i64, source: HomologyError },
    #[error("m = {m}: termination audit found {violations} violations")]
    Audit { m: i64, violations: usize },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

impl CommandError {
    /// Process exit code: 2 for bad input, 3 for a violated invariant, 1 for
    /// environmental failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::InvalidInput(_) => 2,
            CommandError::Swan { .. }
            | CommandError::Complex { .. }
            | CommandError::Homology { .. }
            | CommandError::Audit { .. } => 3,
            CommandError::Io { .. } | CommandError::Json { .. } => 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub db: PathBuf,
    pub prune: PruneRule,
    /// Worker threads for batch runs.
    pub jobs: usize,
    /// Reuse stored artifacts whose hashes check out.
    pub resume: bool,
    /// Re-verify the termination criterion after computing a polyhedron.
    pub audit: bool,
}

impl RunConfig {
    pub fn new(db: impl Into<PathBuf>) -> Self {
        RunConfig {
            db: db.into(),
            prune: PruneRule::default(),
            jobs: 1,
            resume: true,
            audit: false,
        }
    }
}

/// Wall-clock milliseconds spent on each stage in the run that wrote a
/// record; `None` when the stage was served from the cache.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timings {
    pub polyhedron_ms: Option<u64>,
    pub complex_ms: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbRecord {
    pub schema: u32,
    pub m: i64,
    pub disc: i64,
    pub prune_rule: PruneRule,
    pub polyhedron_sha256: String,
    pub complex_sha256: Option<String>,
    pub row: Option<TableRow>,
    pub timings: Timings,
}

/// Record fields that do not depend on the run; this is what the index holds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub m: i64,
    pub disc: i64,
    pub polyhedron_sha256: String,
    pub complex_sha256: Option<String>,
    pub row: Option<TableRow>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Index {
    pub schema: u32,
    pub records: Vec<IndexEntry>,
}

/// Where an artifact came from in a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Computed,
    Cached,
}

#[derive(Clone, Debug)]
pub struct PolyhedronOutcome {
    pub path: PathBuf,
    pub polyhedron: Polyhedron,
    pub source: Source,
}

#[derive(Clone, Debug)]
pub struct HomologyOutcome {
    pub row: TableRow,
    pub polyhedron: Source,
    pub complex: Source,
}

/// One table line: a row or the reason it could not be produced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableLine {
    pub m: i64,
    pub disc: i64,
    pub row: Option<TableRow>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    pub dmax: i64,
    pub lines: Vec<TableLine>,
}

// ---------------------------------------------------------------------------
// canonical JSON and file plumbing

/// Sorted-key, pretty-printed JSON with a trailing newline.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<Vec<u8>, serde_json::Error> {
    // `Value` maps are ordered by key, which is what makes this canonical
    let v = serde_json::to_value(value)?;
    let mut out = serde_json::to_vec_pretty(&v)?;
    out.push(b'\n');
    Ok(out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CommandError + '_ {
    move |source| CommandError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> CommandError + '_ {
    move |source| CommandError::Json {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes through a temporary file in the same directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CommandError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| CommandError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<String, CommandError> {
    let bytes = canonical_json(value).map_err(json_err(path))?;
    write_atomic(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}

/// Reads a stored document if its bytes hash to `expected`; any mismatch,
/// parse failure or missing file is logged and yields `None`.
fn read_verified<T: DeserializeOwned>(path: &Path, expected: &str) -> Option<T> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) => {
            warn!("{}: {e}; recomputing", path.display());
            return None;
        }
    };
    if sha256_hex(&bytes) != expected {
        warn!("{}: hash mismatch; recomputing", path.display());
        return None;
    }
    match serde_json::from_slice(&bytes) {
        Ok(v) => Some(v),
        Err(e) => {
            warn!("{}: {e}; recomputing", path.display());
            None
        }
    }
}

pub fn record_dir(db: &Path, m: i64) -> PathBuf {
    db.join(format!("m{m}"))
}

pub fn polyhedron_path(db: &Path, m: i64) -> PathBuf {
    record_dir(db, m).join("polyhedron.json")
}

pub fn complex_path(db: &Path, m: i64) -> PathBuf {
    record_dir(db, m).join("complex.json")
}

pub fn record_path(db: &Path, m: i64) -> PathBuf {
    record_dir(db, m).join("record.json")
}

pub fn index_path(db: &Path) -> PathBuf {
    db.join("index.json")
}

fn load_record(db: &Path, m: i64) -> Option<DbRecord> {
    let path = record_path(db, m);
    let bytes = fs::read(&path).ok()?;
    match serde_json::from_slice::<DbRecord>(&bytes) {
        Ok(r) if r.schema == SCHEMA && r.m == m => Some(r),
        Ok(_) => {
            warn!("{}: stale schema or wrong m; ignoring", path.display());
            None
        }
        Err(e) => {
            warn!("{}: {e}; ignoring", path.display());
            None
        }
    }
}

// ---------------------------------------------------------------------------
// polyhedron documents

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct PolyhedronDoc {
    schema: u32,
    m: i64,
    prune_rule: PruneRule,
    /// `(mu_a, mu_b, lam_a, lam_b)` in the basis `1, omega`.
    hemispheres: Vec<[String; 4]>,
    vertices: Vec<Vertex>,
    faces: Vec<FacePolygon>,
    #[serde(with = "crate::serial::rational")]
    zeta_sq: Rational,
    examined_norm: String,
    #[serde(with = "crate::serial::rational")]
    e_estimate: Rational,
    horizons: Vec<String>,
}

impl PolyhedronDoc {
    fn from_polyhedron(poly: &Polyhedron, prune: PruneRule) -> Self {
        PolyhedronDoc {
            schema: SCHEMA,
            m: poly.ctx.m(),
            prune_rule: prune,
            hemispheres: poly
                .list
                .items
                .iter()
                .map(|h| {
                    [
                        h.mu.a.to_string(),
                        h.mu.b.to_string(),
                        h.lam.a.to_string(),
                        h.lam.b.to_string(),
                    ]
                })
                .collect(),
            vertices: poly.vertices.vertices.clone(),
            faces: poly.faces.clone(),
            zeta_sq: poly.zeta_sq.clone(),
            examined_norm: poly.examined_norm.to_string(),
            e_estimate: poly.e_estimate.clone(),
            horizons: poly.horizons.iter().map(|h| h.to_string()).collect(),
        }
    }

    fn into_polyhedron(self) -> Result<Polyhedron, String> {
        let ctx = FieldCtx::new(self.m).map_err(|e| e.to_string())?;
        let int = |s: &str| s.parse::<i64>().map_err(|_| format!("bad integer {s:?}"));
        let big = |s: &str| s.parse().map_err(|_| format!("bad integer {s:?}"));
        let mut items = Vec::with_capacity(self.hemispheres.len());
        for [ma, mb, la, lb] in &self.hemispheres {
            let mu = AlgInt::from_big(big(ma)?, big(mb)?);
            let lam = AlgInt::from_big(big(la)?, big(lb)?);
            items.push(Hemisphere::new(mu, lam, &ctx).map_err(|e| e.to_string())?);
        }
        let n = items.len();
        if self
            .vertices
            .iter()
            .flat_map(|v| &v.supports)
            .any(|(i, _)| *i >= n)
            || self.faces.iter().any(|f| f.hemi >= n)
        {
            return Err("hemisphere index out of range".into());
        }
        Ok(Polyhedron {
            ctx,
            list: HemisphereList { ctx, items },
            vertices: VertexSet {
                vertices: self.vertices,
            },
            faces: self.faces,
            zeta_sq: self.zeta_sq,
            examined_norm: int(&self.examined_norm)?,
            e_estimate: self.e_estimate,
            horizons: self
                .horizons
                .iter()
                .map(|h| int(h))
                .collect::<Result<_, _>>()?,
        })
    }
}

/// Canonical bytes of the polyhedron file.
pub fn polyhedron_json(poly: &Polyhedron, prune: PruneRule) -> Vec<u8> {
    canonical_json(&PolyhedronDoc::from_polyhedron(poly, prune)).expect("polyhedron serializes")
}

/// Parses a polyhedron file back into a [`Polyhedron`].
pub fn parse_polyhedron(bytes: &[u8]) -> Result<Polyhedron, String> {
    let doc: PolyhedronDoc = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    if doc.schema != SCHEMA {
        return Err(format!("schema {} (expected {SCHEMA})", doc.schema));
    }
    doc.into_polyhedron()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct ComplexDoc {
    schema: u32,
    complex: QuotientComplex,
}

/// Canonical bytes of the quotient complex file.
pub fn complex_json(qc: &QuotientComplex) -> Vec<u8> {
    canonical_json(&ComplexDoc {
        schema: SCHEMA,
        complex: qc.clone(),
    })
    .expect("complex serializes")
}

/// Parses a quotient complex file.
pub fn parse_complex(bytes: &[u8]) -> Result<QuotientComplex, String> {
    let doc: ComplexDoc = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    if doc.schema != SCHEMA {
        return Err(format!("schema {} (expected {SCHEMA})", doc.schema));
    }
    Ok(doc.complex)
}

// ---------------------------------------------------------------------------
// commands

fn stored_polyhedron(config: &RunConfig, record: Option<&DbRecord>) -> Option<Polyhedron> {
    let r = record?;
    if r.prune_rule != config.prune {
        info!("m={}: stored polyhedron used another prune rule", r.m);
        return None;
    }
    let path = polyhedron_path(&config.db, r.m);
    let doc: PolyhedronDoc = read_verified(&path, &r.polyhedron_sha256)?;
    if doc.schema != SCHEMA {
        return None;
    }
    match doc.into_polyhedron() {
        Ok(p) => Some(p),
        Err(e) => {
            warn!("{}: {e}; recomputing", path.display());
            None
        }
    }
}

/// Computes (or loads) the polyhedron for `m` and stores it.
pub fn cmd_polyhedron(m: i64, config: &RunConfig) -> Result<PolyhedronOutcome, CommandError> {
    let out = polyhedron_stage(m, config)?;
    rebuild_index(&config.db)?;
    Ok(out)
}

fn polyhedron_stage(m: i64, config: &RunConfig) -> Result<PolyhedronOutcome, CommandError> {
    let ctx = FieldCtx::new(m)?;
    let record = if config.resume {
        load_record(&config.db, m)
    } else {
        None
    };
    let path = polyhedron_path(&config.db, m);
    if let Some(poly) = stored_polyhedron(config, record.as_ref()) {
        info!("m={m}: polyhedron loaded from {}", path.display());
        audit(&poly, config)?;
        return Ok(PolyhedronOutcome {
            path,
            polyhedron: poly,
            source: Source::Cached,
        });
    }
    let start = Instant::now();
    let swan = SwanConfig {
        prune: config.prune,
        max_horizon: None,
    };
    let poly = compute_polyhedron(&ctx, swan).map_err(|source| CommandError::Swan { m, source })?;
    let elapsed = start.elapsed().as_millis() as u64;
    audit(&poly, config)?;
    let hash = write_json(&path, &PolyhedronDoc::from_polyhedron(&poly, config.prune))?;
    let record = DbRecord {
        schema: SCHEMA,
        m,
        disc: ctx.discriminant(),
        prune_rule: config.prune,
        polyhedron_sha256: hash,
        complex_sha256: None,
        row: None,
        timings: Timings {
            polyhedron_ms: Some(elapsed),
            complex_ms: None,
        },
    };
    write_json(&record_path(&config.db, m), &record)?;
    Ok(PolyhedronOutcome {
        path,
        polyhedron: poly,
        source: Source::Computed,
    })
}

fn audit(poly: &Polyhedron, config: &RunConfig) -> Result<(), CommandError> {
    if !config.audit {
        return Ok(());
    }
    let report = audit_termination(poly);
    if !report.violations.is_empty() {
        return Err(CommandError::Audit {
            m: poly.ctx.m(),
            violations: report.violations.len(),
        });
    }
    Ok(())
}

fn row_of(qc: &QuotientComplex, ctx: &FieldCtx) -> Result<TableRow, CommandError> {
    let m = ctx.m();
    spectral_checks(qc, ctx).map_err(|source| CommandError::Homology { m, source })?;
    table_row_from(qc, ctx).map_err(|source| CommandError::Homology { m, source })
}

/// Runs the whole pipeline for `m`, reusing whatever the database holds.
pub fn cmd_homology(m: i64, config: &RunConfig) -> Result<HomologyOutcome, CommandError> {
    let out = homology_stage(m, config)?;
    rebuild_index(&config.db)?;
    Ok(out)
}

fn homology_stage(m: i64, config: &RunConfig) -> Result<HomologyOutcome, CommandError> {
    let ctx = FieldCtx::new(m)?;
    if config.resume {
        if let Some(r) = load_record(&config.db, m) {
            let cached = r.complex_sha256.as_deref().and_then(|h| {
                read_verified::<ComplexDoc>(&complex_path(&config.db, m), h)
                    .filter(|d| d.schema == SCHEMA && d.complex.m == m)
            });
            if let (Some(doc), true) = (cached, r.prune_rule == config.prune) {
                info!("m={m}: quotient complex loaded from cache");
                let row = row_of(&doc.complex, &ctx)?;
                if r.row.as_ref() != Some(&row) {
                    // the complex is authentic, so the stored row was stale
                    let record = DbRecord {
                        row: Some(row.clone()),
                        ..r
                    };
                    write_json(&record_path(&config.db, m), &record)?;
                }
                return Ok(HomologyOutcome {
                    row,
                    polyhedron: Source::Cached,
                    complex: Source::Cached,
                });
            }
        }
    }
    let poly = polyhedron_stage(m, config)?;
    let start = Instant::now();
    let qc =
        build_quotient(&poly.polyhedron).map_err(|source| CommandError::Complex { m, source })?;
    let row = row_of(&qc, &ctx)?;
    let elapsed = start.elapsed().as_millis() as u64;
    let complex_hash = write_json(
        &complex_path(&config.db, m),
        &ComplexDoc {
            schema: SCHEMA,
            complex: qc,
        },
    )?;
    // the polyhedron stage always leaves a valid record behind
    let mut record = load_record(&config.db, m).ok_or_else(|| CommandError::Io {
        path: record_path(&config.db, m),
        source: std::io::Error::new(std::io::ErrorKind::NotFound, "record vanished"),
    })?;
    if poly.source == Source::Cached {
        record.timings.polyhedron_ms = None;
    }
    record.complex_sha256 = Some(complex_hash);
    record.row = Some(row.clone());
    record.timings.complex_ms = Some(elapsed);
    write_json(&record_path(&config.db, m), &record)?;
    Ok(HomologyOutcome {
        row,
        polyhedron: poly.source,
        complex: Source::Computed,
    })
}

/// Admissible `m` with `|disc| <= dmax`, ordered by `|disc|`.
pub fn table_range(dmax: i64) -> Vec<i64> {
    let mut ms: Vec<i64> = (2..=dmax.max(1))
        .filter(|&m| m != 3 && is_square_free(m))
        .filter(|&m| {
            FieldCtx::new(m)
                .map(|c| c.discriminant().abs() <= dmax)
                .unwrap_or(false)
        })
        .collect();
    ms.sort_by_key(|&m| (FieldCtx::new(m).unwrap().discriminant().abs(), m));
    ms
}

/// One row per admissible `m` up to `dmax`; failures are kept per row.
pub fn cmd_table(dmax: i64, config: &RunConfig) -> Result<Table, CommandError> {
    let ms = table_range(dmax);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.max(1))
        .build()
        .expect("thread pool");
    let lines: Vec<TableLine> = pool.install(|| {
        ms.par_iter()
            .map(|&m| {
                let disc = FieldCtx::new(m).map(|c| c.discriminant()).unwrap_or(0);
                match homology_stage(m, config) {
                    Ok(out) => TableLine {
                        m,
                        disc,
                        row: Some(out.row),
                        error: None,
                    },
                    Err(e) => {
                        warn!("m={m}: {e}");
                        TableLine {
                            m,
                            disc,
                            row: None,
                            error: Some(e.to_string()),
                        }
                    }
                }
            })
            .collect()
    });
    rebuild_index(&config.db)?;
    Ok(Table { dmax, lines })
}

/// Rewrites the index from the per-m records currently in the database.
pub fn rebuild_index(db: &Path) -> Result<Index, CommandError> {
    let mut records = vec![];
    if db.is_dir() {
        for entry in fs::read_dir(db).map_err(io_err(db))? {
            let entry = entry.map_err(io_err(db))?;
            let name = entry.file_name();
            let Some(m) = name
                .to_str()
                .and_then(|s| s.strip_prefix('m'))
                .and_then(|s| s.parse().ok())
            else {
                continue;
            };
            if let Some(r) = load_record(db, m) {
                records.push(IndexEntry {
                    m: r.m,
                    disc: r.disc,
                    polyhedron_sha256: r.polyhedron_sha256,
                    complex_sha256: r.complex_sha256,
                    row: r.row,
                });
            }
        }
    }
    records.sort_by_key(|e| (e.disc.abs(), e.m));
    let index = Index {
        schema: SCHEMA,
        records,
    };
    write_json(&index_path(db), &index)?;
    Ok(index)
}

// ---------------------------------------------------------------------------
// rendering

impl Table {
    pub fn render_text(&self) -> String {
        let mut out = TableRow::header();
        out.push('\n');
        for line in &self.lines {
            match (&line.row, &line.error) {
                (Some(row), _) => out.push_str(&row.render()),
                (None, e) => out.push_str(&format!(
                    "{:>6}  {:>4}  FAILED: {}",
                    line.disc,
                    line.m,
                    e.as_deref().unwrap_or("unknown error")
                )),
            }
            out.push('\n');
        }
        out
    }

    pub fn render_json(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            m: i64,
            disc: i64,
            class_group: Option<String>,
            h1_cusp: Option<String>,
            farrell_supplement: Option<String>,
            error: Option<&'a str>,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            schema: u32,
            dmax: i64,
            rows: Vec<Line<'a>>,
        }
        let rows = self
            .lines
            .iter()
            .map(|l| Line {
                m: l.m,
                disc: l.disc,
                class_group: l
                    .row
                    .as_ref()
                    .map(|r| r.class_group.render_multiplicative()),
                h1_cusp: l.row.as_ref().map(|r| r.h1_cusp.render_additive()),
                farrell_supplement: l
                    .row
                    .as_ref()
                    .map(|r| r.farrell_supplement.render_additive()),
                error: l.error.as_deref(),
            })
            .collect();
        let bytes = canonical_json(&Doc {
            schema: SCHEMA,
            dmax: self.dmax,
            rows,
        })
        .expect("table serializes");
        String::from_utf8(bytes).expect("utf-8")
    }

    pub fn failures(&self) -> usize {
        self.lines.iter().filter(|l| l.row.is_none()).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dir: &Path) -> RunConfig {
        RunConfig::new(dir)
    }

    #[test]
    fn canonical_json_sorts_keys() {
        #[derive(Serialize)]
        struct S {
            zebra: u8,
            apple: u8,
        }
        let s = String::from_utf8(canonical_json(&S { zebra: 1, apple: 2 }).unwrap()).unwrap();
        assert!(s.find("apple").unwrap() < s.find("zebra").unwrap());
        assert!(s.ends_with("}\n"));
    }

    #[test]
    fn table_range_small() {
        assert_eq!(table_range(24), vec![7, 2, 11, 15, 19, 5, 23, 6]);
        assert!(table_range(6).is_empty());
        assert!(table_range(-5).is_empty());
    }

    #[test]
    fn invalid_m_is_input_error() {
        let dir = tempfile::tempdir().unwrap();
        for (m, needle) in [
            (1, "excluded case"),
            (3, "excluded case"),
            (12, "not square-free"),
        ] {
            let e = cmd_polyhedron(m, &config(dir.path())).unwrap_err();
            assert_eq!(e.exit_code(), 2);
            assert!(e.to_string().contains(needle), "{e}");
        }
    }

    #[test]
    fn polyhedron_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let out = cmd_polyhedron(2, &config(dir.path())).unwrap();
        let bytes = fs::read(&out.path).unwrap();
        let back = parse_polyhedron(&bytes).unwrap();
        assert_eq!(polyhedron_json(&back, PruneRule::ThreeVertex), bytes);
        assert_eq!(back.vertices, out.polyhedron.vertices);
    }

    #[test]
    fn warm_cache_skips_work() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path());
        let first = cmd_homology(7, &cfg).unwrap();
        assert_eq!(first.complex, Source::Computed);
        let second = cmd_homology(7, &cfg).unwrap();
        assert_eq!(second.complex, Source::Cached);
        assert_eq!(first.row, second.row);
    }

    #[test]
    fn corrupted_complex_is_recomputed() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path());
        let first = cmd_homology(2, &cfg).unwrap();
        let path = complex_path(dir.path(), 2);
        let good = fs::read(&path).unwrap();
        // change one boundary coefficient; the JSON stays well formed
        let text = String::from_utf8(good.clone())
            .unwrap()
            .replacen("\"-1\"", "\"1\"", 1);
        fs::write(&path, text).unwrap();
        let again = cmd_homology(2, &cfg).unwrap();
        assert_eq!(again.complex, Source::Computed);
        assert_eq!(again.polyhedron, Source::Cached);
        assert_eq!(again.row, first.row);
        assert_eq!(fs::read(&path).unwrap(), good);
    }
}
