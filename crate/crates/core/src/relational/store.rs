use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::PathBuf;
use std::sync::{Mutex, MutexGuard, PoisonError};
use std::time::{Duration, Instant};

use chrono::NaiveDateTime;
use rusqlite::types::ValueRef;
use rusqlite::{Connection, ErrorCode, OpenFlags};

use super::sql::{render_sql, SqlSelect, SqlValue};
use super::{Cell, Column, ConnectionSpec, ForeignKey, RelationalCatalog, RowSet, StoreError, Table, TypeClass};

/// When set, every statement sent to a store is also appended to this file.
pub const SQL_LOG_ENV: &str = "S3AI_SQL_LOG";

static LOG: Mutex<Vec<String>> = Mutex::new(Vec::new());

fn log_guard() -> MutexGuard<'static, Vec<String>> {
    LOG.lock().unwrap_or_else(PoisonError::into_inner)
}

fn record(sql: &str) {
    log_guard().push(sql.to_owned());
    if let Some(path) = std::env::var_os(SQL_LOG_ENV) {
        if let Ok(mut f) = OpenOptions::new().create(true).append(true).open(path) {
            let _ = writeln!(f, "{}", sql.replace('\n', " "));
        }
    }
}

/// Statements executed by this process so far.
pub fn statement_log() -> Vec<String> {
    log_guard().clone()
}

pub fn clear_statement_log() {
    log_guard().clear();
}

fn is_select(sql: &str) -> bool {
    let head = sql.trim_start();
    head.len() >= 6 && head[..6].eq_ignore_ascii_case("select") && !sql.contains(';')
}

#[derive(Clone, Debug)]
pub struct StoreOptions {
    pub timeout: Duration,
    /// Queries returning more rows fail with [`StoreError::RowCap`].
    pub max_rows: usize,
    /// Idle connections kept for reuse.
    pub pool_size: usize,
}

impl Default for StoreOptions {
    fn default() -> Self {
        Self { timeout: Duration::from_secs(30), max_rows: 1_000_000, pool_size: 4 }
    }
}

/// A read-only handle on one database with a small connection pool.
pub struct Store {
    spec: ConnectionSpec,
    path: PathBuf,
    opts: StoreOptions,
    idle: Mutex<Vec<Connection>>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("spec", &self.spec).finish_non_exhaustive()
    }
}

impl Store {
    /// Opens the store and checks that it is reachable.
    pub fn open(spec: &ConnectionSpec, opts: StoreOptions) -> Result<Self, StoreError> {
        let (engine, rest) = spec.engine()?;
        if engine != "sqlite" {
            return Err(StoreError::UnsupportedEngine(engine.to_owned()));
        }
        let store = Self { spec: spec.clone(), path: PathBuf::from(rest), opts, idle: Mutex::new(Vec::new()) };
        let conn = store.connect()?;
        store.release(conn);
        Ok(store)
    }

    pub fn spec(&self) -> &ConnectionSpec {
        &self.spec
    }

    pub fn options(&self) -> &StoreOptions {
        &self.opts
    }

    fn connect(&self) -> Result<Connection, StoreError> {
        Connection::open_with_flags(&self.path, OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX)
            .map_err(|e| StoreError::Connection { locator: self.spec.locator.clone(), message: e.to_string() })
    }

    fn acquire(&self) -> Result<Connection, StoreError> {
        let pooled = self.idle.lock().unwrap_or_else(PoisonError::into_inner).pop();
        match pooled {
            Some(c) => Ok(c),
            None => self.connect(),
        }
    }

    fn release(&self, conn: Connection) {
        let mut idle = self.idle.lock().unwrap_or_else(PoisonError::into_inner);
        if idle.len() < self.opts.pool_size {
            idle.push(conn);
        }
    }

    pub fn execute(&self, q: &SqlSelect) -> Result<RowSet, StoreError> {
        q.validate().map_err(StoreError::Rejected)?;
        self.query(&render_sql(q), &q.parameters())
    }

    /// Runs one SELECT statement. Anything else is refused before it
    /// reaches the store.
    pub(crate) fn query(&self, sql: &str, params: &[SqlValue]) -> Result<RowSet, StoreError> {
        record(sql);
        if !is_select(sql) {
            return Err(StoreError::NotSelect);
        }
        let conn = self.acquire()?;
        let result = self.run(&conn, sql, params);
        conn.progress_handler(0, None::<fn() -> bool>);
        if !matches!(result, Err(StoreError::Connection { .. })) {
            self.release(conn);
        }
        result
    }

    fn run(&self, conn: &Connection, sql: &str, params: &[SqlValue]) -> Result<RowSet, StoreError> {
        let deadline = Instant::now() + self.opts.timeout;
        conn.progress_handler(1000, Some(move || Instant::now() > deadline));
        let timeout_ms = self.opts.timeout.as_millis() as u64;
        let map_err = |e: rusqlite::Error| match e.sqlite_error_code() {
            Some(ErrorCode::OperationInterrupted) => StoreError::Timeout(timeout_ms),
            Some(ErrorCode::CannotOpen) | Some(ErrorCode::NotADatabase) => {
                StoreError::Connection { locator: self.spec.locator.clone(), message: e.to_string() }
            }
            _ => StoreError::Rejected(e.to_string()),
        };
        let mut stmt = conn.prepare_cached(sql).map_err(map_err)?;
        let columns: Vec<String> = stmt.column_names().iter().map(|s| s.to_string()).collect();
        let classes: Vec<TypeClass> =
            stmt.columns().iter().map(|c| TypeClass::of(c.decl_type().unwrap_or(""))).collect();
        let bound: Vec<rusqlite::types::Value> = params
            .iter()
            .map(|p| match p {
                SqlValue::Integer(i) => rusqlite::types::Value::Integer(*i),
                SqlValue::Text(s) => rusqlite::types::Value::Text(s.clone()),
            })
            .collect();
        let mut rows = stmt.query(rusqlite::params_from_iter(bound)).map_err(map_err)?;
        let mut out = RowSet { columns, rows: Vec::new() };
        while let Some(row) = rows.next().map_err(map_err)? {
            if out.rows.len() >= self.opts.max_rows {
                return Err(StoreError::RowCap(self.opts.max_rows));
            }
            let mut cells = Vec::with_capacity(classes.len());
            for (i, class) in classes.iter().enumerate() {
                cells.push(to_cell(row.get_ref(i).map_err(map_err)?, *class));
            }
            out.rows.push(cells);
        }
        Ok(out)
    }

    /// Tables, columns and keys, sorted by table name.
    pub fn introspect(&self) -> Result<RelationalCatalog, StoreError> {
        let names = self.query(
            "SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite\\_%' ESCAPE '\\' ORDER BY name",
            &[],
        )?;
        let mut tables = Vec::new();
        for row in names.rows {
            let Some(name) = row[0].lexical() else {
                continue;
            };
            let arg = [SqlValue::Text(name.clone())];
            let cols = self.query("SELECT name, type, \"notnull\", pk FROM pragma_table_info(?) ORDER BY cid", &arg)?;
            let mut columns = Vec::new();
            let mut pk: Vec<(i64, String)> = Vec::new();
            for c in cols.rows {
                let col_name = c[0].lexical().unwrap_or_default();
                let pk_pos = int(&c[3]);
                if pk_pos > 0 {
                    pk.push((pk_pos, col_name.clone()));
                }
                columns.push(Column {
                    name: col_name,
                    sql_type: c[1].lexical().unwrap_or_default(),
                    nullable: int(&c[2]) == 0 && pk_pos == 0,
                });
            }
            pk.sort();
            let fks = self.query(
                "SELECT id, seq, \"table\", \"from\", \"to\" FROM pragma_foreign_key_list(?) ORDER BY id, seq",
                &arg,
            )?;
            let mut foreign_keys: Vec<(i64, ForeignKey)> = Vec::new();
            for f in fks.rows {
                let id = int(&f[0]);
                let target = f[2].lexical().unwrap_or_default();
                let from = f[3].lexical().unwrap_or_default();
                let to = f[4].lexical();
                match foreign_keys.last_mut() {
                    Some((last, fk)) if *last == id => {
                        fk.columns.push(from);
                        fk.referenced_columns.extend(to);
                    }
                    _ => foreign_keys.push((
                        id,
                        ForeignKey {
                            columns: vec![from],
                            referenced_table: target,
                            referenced_columns: to.into_iter().collect(),
                        },
                    )),
                }
            }
            tables.push(Table {
                name,
                columns,
                primary_key: pk.into_iter().map(|(_, c)| c).collect(),
                foreign_keys: foreign_keys.into_iter().map(|(_, fk)| fk).collect(),
            });
        }
        // a foreign key without target columns refers to the target's primary key
        let snapshot = tables.clone();
        for t in &mut tables {
            for fk in &mut t.foreign_keys {
                if fk.referenced_columns.is_empty() {
                    if let Some(target) = snapshot.iter().find(|x| x.name == fk.referenced_table) {
                        fk.referenced_columns = target.primary_key.clone();
                    }
                }
            }
        }
        Ok(RelationalCatalog { tables })
    }
}

fn int(c: &Cell) -> i64 {
    match c {
        Cell::Integer(i) => *i,
        Cell::Boolean(b) => *b as i64,
        other => other.lexical().and_then(|s| s.parse().ok()).unwrap_or(0),
    }
}

fn format_real(f: f64) -> String {
    let s = f.to_string();
    if s.contains(['.', 'e', 'E', 'N', 'i']) {
        s
    } else {
        format!("{s}.0")
    }
}

/// ISO-8601 form of a stored date/time; zero dates become NULL.
fn date_time_cell(s: &str) -> Cell {
    let t = s.trim();
    if t.starts_with("0000-00-00") {
        return Cell::Null;
    }
    let iso = if t.len() == 10 { format!("{t}T00:00:00") } else { t.replacen(' ', "T", 1) };
    if NaiveDateTime::parse_from_str(&iso, "%Y-%m-%dT%H:%M:%S%.f").is_ok() {
        Cell::DateTime(iso)
    } else {
        Cell::Text(s.to_owned())
    }
}

fn to_cell(v: ValueRef<'_>, class: TypeClass) -> Cell {
    match (v, class) {
        (ValueRef::Null, _) => Cell::Null,
        (ValueRef::Integer(i), TypeClass::Boolean) => Cell::Boolean(i != 0),
        (ValueRef::Integer(i), TypeClass::Decimal) => Cell::Decimal(i.to_string()),
        (ValueRef::Integer(i), _) => Cell::Integer(i),
        (ValueRef::Real(f), _) => Cell::Decimal(format_real(f)),
        (ValueRef::Text(t), class) => {
            let s = String::from_utf8_lossy(t).into_owned();
            match class {
                TypeClass::DateTime => date_time_cell(&s),
                TypeClass::Boolean => match s.as_str() {
                    "1" | "true" => Cell::Boolean(true),
                    "0" | "false" => Cell::Boolean(false),
                    _ => Cell::Text(s),
                },
                TypeClass::Integer => s.parse().map(Cell::Integer).unwrap_or(Cell::Text(s)),
                TypeClass::Decimal if s.parse::<f64>().is_ok() => Cell::Decimal(s),
                _ => Cell::Text(s),
            }
        }
        (ValueRef::Blob(b), _) => Cell::Text(String::from_utf8_lossy(b).into_owned()),
    }
}

/// Opens `conn` and reads its schema.
pub fn introspect(conn: &ConnectionSpec) -> Result<RelationalCatalog, StoreError> {
    Store::open(conn, StoreOptions::default())?.introspect()
}

/// Opens `conn` and runs `q`.
pub fn execute_select(conn: &ConnectionSpec, q: &SqlSelect) -> Result<RowSet, StoreError> {
    Store::open(conn, StoreOptions::default())?.execute(q)
}
