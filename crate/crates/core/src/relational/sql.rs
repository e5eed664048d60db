use std::fmt::Write;

/// `table AS alias` in a FROM list.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TableRef {
    pub table: String,
    pub alias: String,
}

/// Column qualified by a table alias.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColumnRef {
    pub alias: String,
    pub column: String,
}

impl ColumnRef {
    pub fn new(alias: impl Into<String>, column: impl Into<String>) -> Self {
        Self { alias: alias.into(), column: column.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SelectColumn {
    pub column: ColumnRef,
    pub alias: String,
}

/// A bind-parameter value.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SqlValue {
    Integer(i64),
    Text(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "<>",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Condition {
    Compare(ColumnRef, CompareOp, SqlValue),
    ColumnsEqual(ColumnRef, ColumnRef),
    /// `LIKE` with `\` as the escape character.
    Like(ColumnRef, String),
    IsNull(ColumnRef),
    IsNotNull(ColumnRef),
}

impl Condition {
    fn columns(&self) -> Vec<&ColumnRef> {
        match self {
            Condition::Compare(c, ..) | Condition::Like(c, _) | Condition::IsNull(c) | Condition::IsNotNull(c) => {
                vec![c]
            }
            Condition::ColumnsEqual(a, b) => vec![a, b],
        }
    }
}

/// A read-only query. There is no way to express anything but SELECT.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SqlSelect {
    pub distinct: bool,
    pub columns: Vec<SelectColumn>,
    pub from: Vec<TableRef>,
    /// Inner-join equalities; each is attached to the first table at which
    /// both sides are in scope.
    pub joins: Vec<(ColumnRef, ColumnRef)>,
    pub conditions: Vec<Condition>,
    pub limit: Option<u64>,
    pub offset: Option<u64>,
}

impl SqlSelect {
    /// Every column reference must name an alias of the FROM list.
    pub fn validate(&self) -> Result<(), String> {
        if self.from.is_empty() {
            return Err("empty FROM list".into());
        }
        for (i, t) in self.from.iter().enumerate() {
            if self.from[..i].iter().any(|o| o.alias == t.alias) {
                return Err(format!("duplicate alias {}", t.alias));
            }
        }
        let known = |c: &ColumnRef| self.from.iter().any(|t| t.alias == c.alias);
        let refs = self
            .columns
            .iter()
            .map(|c| &c.column)
            .chain(self.joins.iter().flat_map(|(a, b)| [a, b]))
            .chain(self.conditions.iter().flat_map(Condition::columns));
        for c in refs {
            if !known(c) {
                return Err(format!("unknown alias {} for column {}", c.alias, c.column));
            }
        }
        Ok(())
    }

    /// Bind values in placeholder order.
    pub fn parameters(&self) -> Vec<SqlValue> {
        self.conditions
            .iter()
            .filter_map(|c| match c {
                Condition::Compare(_, _, v) => Some(v.clone()),
                Condition::Like(_, p) => Some(SqlValue::Text(p.clone())),
                _ => None,
            })
            .collect()
    }
}

pub(crate) fn quote_ident(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn col(c: &ColumnRef) -> String {
    format!("{}.{}", quote_ident(&c.alias), quote_ident(&c.column))
}

fn condition(c: &Condition) -> String {
    match c {
        Condition::Compare(a, op, _) => format!("{} {} ?", col(a), op.symbol()),
        Condition::ColumnsEqual(a, b) => format!("{} = {}", col(a), col(b)),
        Condition::Like(a, _) => format!("{} LIKE ? ESCAPE '\\'", col(a)),
        Condition::IsNull(a) => format!("{} IS NULL", col(a)),
        Condition::IsNotNull(a) => format!("{} IS NOT NULL", col(a)),
    }
}

/// Deterministic SELECT text with quoted identifiers and `?` placeholders.
pub fn render_sql(q: &SqlSelect) -> String {
    let mut out = String::from("SELECT ");
    if q.distinct {
        out.push_str("DISTINCT ");
    }
    if q.columns.is_empty() {
        out.push('1');
    } else {
        let cols: Vec<String> =
            q.columns.iter().map(|c| format!("{} AS {}", col(&c.column), quote_ident(&c.alias))).collect();
        out.push_str(&cols.join(", "));
    }
    let mut pending: Vec<&(ColumnRef, ColumnRef)> = q.joins.iter().collect();
    let mut scope: Vec<&str> = Vec::new();
    for (i, t) in q.from.iter().enumerate() {
        scope.push(&t.alias);
        let table = format!("{} AS {}", quote_ident(&t.table), quote_ident(&t.alias));
        if i == 0 {
            let _ = write!(out, " FROM {table}");
            continue;
        }
        let (now, later): (Vec<_>, Vec<_>) = pending
            .into_iter()
            .partition(|(a, b)| scope.contains(&a.alias.as_str()) && scope.contains(&b.alias.as_str()));
        pending = later;
        if now.is_empty() {
            let _ = write!(out, " CROSS JOIN {table}");
        } else {
            let on: Vec<String> = now.iter().map(|(a, b)| format!("{} = {}", col(a), col(b))).collect();
            let _ = write!(out, " INNER JOIN {table} ON {}", on.join(" AND "));
        }
    }
    let mut wheres: Vec<String> = pending.iter().map(|(a, b)| format!("{} = {}", col(a), col(b))).collect();
    wheres.extend(q.conditions.iter().map(condition));
    if !wheres.is_empty() {
        let _ = write!(out, " WHERE {}", wheres.join(" AND "));
    }
    match (q.limit, q.offset) {
        (Some(l), Some(o)) => {
            let _ = write!(out, " LIMIT {l} OFFSET {o}");
        }
        (Some(l), None) => {
            let _ = write!(out, " LIMIT {l}");
        }
        (None, Some(o)) => {
            let _ = write!(out, " LIMIT -1 OFFSET {o}");
        }
        (None, None) => {}
    }
    out
}
