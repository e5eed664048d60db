//! Relational side: connection specs, the introspected catalog, a
//! select-only SQL model and the embedded SQLite driver.

mod sql;
mod store;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use sql::{render_sql, ColumnRef, CompareOp, Condition, SelectColumn, SqlSelect, SqlValue, TableRef};
pub use store::{clear_statement_log, execute_select, introspect, statement_log, Store, StoreOptions, SQL_LOG_ENV};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StoreError {
    #[error("unsupported database engine '{0}'")]
    UnsupportedEngine(String),
    #[error("malformed DSN '{0}'")]
    BadLocator(String),
    #[error("cannot connect to '{locator}': {message}")]
    Connection { locator: String, message: String },
    #[error("store rejected SQL: {0}")]
    Rejected(String),
    #[error("query exceeded the {0} ms timeout")]
    Timeout(u64),
    #[error("result exceeded the row cap of {0}")]
    RowCap(usize),
    #[error("refusing to run a non-SELECT statement")]
    NotSelect,
    #[error("invalid catalog: {0}")]
    Catalog(String),
}

/// Where a database lives and how to log in. `Debug` never prints the
/// password.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct ConnectionSpec {
    pub locator: String,
    pub username: String,
    pub password: String,
    pub properties: BTreeMap<String, String>,
}

impl fmt::Debug for ConnectionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConnectionSpec")
            .field("locator", &self.locator)
            .field("username", &self.username)
            .field("password", &"***")
            .field("properties", &self.properties)
            .finish()
    }
}

pub const USER_ENV: &str = "S3AI_DB_USER";
pub const PASS_ENV: &str = "S3AI_DB_PASS";

impl ConnectionSpec {
    pub fn new(locator: impl Into<String>) -> Self {
        Self { locator: locator.into(), ..Self::default() }
    }

    /// Replaces the credentials with `S3AI_DB_USER` / `S3AI_DB_PASS` when set.
    pub fn with_env_credentials(mut self) -> Self {
        if let Ok(u) = std::env::var(USER_ENV) {
            self.username = u;
        }
        if let Ok(p) = std::env::var(PASS_ENV) {
            self.password = p;
        }
        self
    }

    /// Engine token and the engine-specific remainder. A leading `jdbc:` is
    /// ignored, so `jdbc:sqlite:x.db` and `sqlite:x.db` are the same store.
    pub fn engine(&self) -> Result<(&str, &str), StoreError> {
        let s = self.locator.strip_prefix("jdbc:").unwrap_or(&self.locator);
        match s.split_once(':') {
            Some((engine, rest)) if !engine.is_empty() && !rest.is_empty() => Ok((engine, rest)),
            _ => Err(StoreError::BadLocator(self.locator.clone())),
        }
    }

    /// Conventional JDBC driver class for the engine.
    pub fn driver_class(&self) -> &'static str {
        match self.engine().map(|(e, _)| e) {
            Ok("mysql") => "com.mysql.jdbc.Driver",
            Ok("postgresql") => "org.postgresql.Driver",
            _ => "org.sqlite.JDBC",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub sql_type: String,
    pub nullable: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForeignKey {
    pub columns: Vec<String>,
    pub referenced_table: String,
    pub referenced_columns: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
    pub primary_key: Vec<String>,
    pub foreign_keys: Vec<ForeignKey>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Whether `name` is the sole local column of some foreign key.
    pub fn is_fk_column(&self, name: &str) -> bool {
        self.foreign_keys.iter().any(|fk| fk.columns.iter().any(|c| c == name))
    }

    /// Whether equal values on `cols` identify a single row: the columns
    /// cover the primary key, or the table has none and they cover every
    /// column.
    pub fn is_identified_by(&self, cols: &[&str]) -> bool {
        if self.primary_key.is_empty() {
            self.columns.iter().all(|c| cols.contains(&c.name.as_str()))
        } else {
            self.primary_key.iter().all(|k| cols.contains(&k.as_str()))
        }
    }
}

/// Introspected schema, tables sorted by name.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RelationalCatalog {
    pub tables: Vec<Table>,
}

impl RelationalCatalog {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Checks uniqueness of names and that key columns exist with matching
    /// arity.
    pub fn validate(&self) -> Result<(), StoreError> {
        let err = |m: String| Err(StoreError::Catalog(m));
        for (i, t) in self.tables.iter().enumerate() {
            if self.tables[..i].iter().any(|o| o.name == t.name) {
                return err(format!("duplicate table {}", t.name));
            }
            for k in &t.primary_key {
                if t.column(k).is_none() {
                    return err(format!("primary key column {}.{k} does not exist", t.name));
                }
            }
            for fk in &t.foreign_keys {
                if fk.columns.len() != fk.referenced_columns.len() || fk.columns.is_empty() {
                    return err(format!("foreign key arity mismatch on {}", t.name));
                }
                let Some(target) = self.table(&fk.referenced_table) else {
                    return err(format!("foreign key target {} does not exist", fk.referenced_table));
                };
                for c in &fk.columns {
                    if t.column(c).is_none() {
                        return err(format!("foreign key column {}.{c} does not exist", t.name));
                    }
                }
                for c in &fk.referenced_columns {
                    if target.column(c).is_none() {
                        return err(format!("foreign key target column {}.{c} does not exist", target.name));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Value class of a declared SQL column type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TypeClass {
    Integer,
    Decimal,
    Boolean,
    DateTime,
    Text,
}

impl TypeClass {
    pub fn of(sql_type: &str) -> Self {
        let t = sql_type.trim().to_ascii_lowercase();
        let compact: String = t.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.starts_with("tinyint(1)") || t.starts_with("bool") || t == "bit" || t.starts_with("bit(1)") {
            TypeClass::Boolean
        } else if t.contains("int") {
            TypeClass::Integer
        } else if ["dec", "numeric", "float", "double", "real"].iter().any(|k| t.starts_with(k)) {
            TypeClass::Decimal
        } else if t.starts_with("date") || t.starts_with("timestamp") {
            TypeClass::DateTime
        } else {
            TypeClass::Text
        }
    }
}

/// One nullable cell of a result row.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Null,
    Text(String),
    Integer(i64),
    /// Decimal value in its textual form.
    Decimal(String),
    Boolean(bool),
    /// ISO-8601 `YYYY-MM-DDTHH:MM:SS[.fff]`.
    DateTime(String),
}

impl Cell {
    pub fn is_null(&self) -> bool {
        matches!(self, Cell::Null)
    }

    /// Lexical form; `None` for NULL.
    pub fn lexical(&self) -> Option<String> {
        Some(match self {
            Cell::Null => return None,
            Cell::Text(s) | Cell::Decimal(s) | Cell::DateTime(s) => s.clone(),
            Cell::Integer(i) => i.to_string(),
            Cell::Boolean(b) => b.to_string(),
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RowSet {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type_classes() {
        assert_eq!(TypeClass::of("TINYINT(1)"), TypeClass::Boolean);
        assert_eq!(TypeClass::of("tinyint(4)"), TypeClass::Integer);
        assert_eq!(TypeClass::of("INTEGER"), TypeClass::Integer);
        assert_eq!(TypeClass::of("int(11) unsigned"), TypeClass::Integer);
        assert_eq!(TypeClass::of("DECIMAL(10,2)"), TypeClass::Decimal);
        assert_eq!(TypeClass::of("DATETIME"), TypeClass::DateTime);
        assert_eq!(TypeClass::of("timestamp"), TypeClass::DateTime);
        assert_eq!(TypeClass::of("VARCHAR(255)"), TypeClass::Text);
        assert_eq!(TypeClass::of(""), TypeClass::Text);
    }

    #[test]
    fn debug_hides_password() {
        let mut c = ConnectionSpec::new("sqlite:x.db");
        c.password = "hunter2".into();
        assert!(!format!("{c:?}").contains("hunter2"));
    }

    #[test]
    fn engine_token() {
        assert_eq!(ConnectionSpec::new("jdbc:sqlite:a/b.db").engine().unwrap(), ("sqlite", "a/b.db"));
        assert_eq!(ConnectionSpec::new("jdbc:mysql://h/db").engine().unwrap().0, "mysql");
        assert!(ConnectionSpec::new("nothing").engine().is_err());
    }
}
