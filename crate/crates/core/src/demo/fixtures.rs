use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rusqlite::types::Value;
use rusqlite::Connection;

use super::DemoError;
use crate::align::HELPDESK_ONTOLOGY;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    OsTicket,
    Glpi,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::OsTicket => "osticket",
            Variant::Glpi => "glpi",
        }
    }
}

/// Shape of one generated store. Counts are totals including the fixed
/// seed rows; counts below the seed size keep a prefix of the seed rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixtureSpec {
    pub variant: Variant,
    pub tickets: usize,
    /// Computers for the GLPI variant; ignored for osTicket.
    pub assets: usize,
    pub seed: u64,
    /// `table.column` entries left out of generated mappings.
    pub privacy_mask: Vec<String>,
}

impl FixtureSpec {
    /// Exactly the seed rows.
    pub fn minimal(variant: Variant) -> Self {
        let (tickets, assets) = match variant {
            Variant::OsTicket => (OST_SEED.len(), 0),
            Variant::Glpi => (GLPI_TICKET_SEED.len(), GLPI_COMPUTER_SEED.len()),
        };
        Self { variant, tickets, assets, seed: 0, privacy_mask: Vec::new() }
    }

    /// Seed rows plus `extra` generated tickets (and one computer per
    /// three GLPI tickets).
    pub fn with_extra(variant: Variant, extra: usize, seed: u64) -> Self {
        let mut s = Self::minimal(variant);
        s.tickets += extra;
        if variant == Variant::Glpi {
            s.assets += extra.div_ceil(3);
        }
        s.seed = seed;
        s
    }

    /// Roughly `triples` materialized triples under a generated mapping.
    pub fn sized(variant: Variant, triples: usize, seed: u64) -> Self {
        let probe = Self::with_extra(variant, 300, seed);
        let data = generate(&probe);
        let per_ticket = data.predicted_triples(&[]) as f64 / probe.tickets as f64;
        let tickets = ((triples as f64 / per_ticket).round() as usize).max(1);
        let mut s = Self::with_extra(variant, tickets.saturating_sub(Self::minimal(variant).tickets), seed);
        s.tickets = s.tickets.max(1);
        s
    }
}

/// Column declaration: name, SQL type, referenced `(table, column)`.
struct ColumnDef {
    name: &'static str,
    decl: &'static str,
    references: Option<(&'static str, &'static str)>,
}

const fn col(name: &'static str, decl: &'static str) -> ColumnDef {
    ColumnDef { name, decl, references: None }
}

const fn fk(name: &'static str, decl: &'static str, table: &'static str, column: &'static str) -> ColumnDef {
    ColumnDef { name, decl, references: Some((table, column)) }
}

struct TableDef {
    name: &'static str,
    /// The first column is the integer primary key.
    columns: &'static [ColumnDef],
}

const OST_TICKET: TableDef = TableDef {
    name: "ost_ticket",
    columns: &[
        col("ticket_id", "INTEGER"),
        col("dept_id", "INT(10)"),
        col("priority_id", "INT(10)"),
        col("topic_id", "INT(10)"),
        col("staff_id", "INT(10)"),
        col("email", "VARCHAR(120)"),
        col("name", "VARCHAR(32)"),
        col("subject", "VARCHAR(64)"),
        col("helptopic", "VARCHAR(255)"),
        col("phone", "VARCHAR(16)"),
        col("phone_ext", "VARCHAR(8)"),
        col("ip_address", "VARCHAR(16)"),
        col("status", "VARCHAR(16)"),
        col("source", "VARCHAR(32)"),
        col("isoverdue", "TINYINT(1)"),
        col("isanswered", "TINYINT(1)"),
        col("lastmessage", "DATETIME"),
        col("lastresponse", "DATETIME"),
        col("created", "DATETIME"),
        col("updated", "DATETIME"),
        col("closed", "DATETIME"),
    ],
};

const GLPI_COMPUTERS: TableDef = TableDef {
    name: "glpi_computers",
    columns: &[
        col("id", "INTEGER"),
        col("name", "VARCHAR(255)"),
        col("serial", "VARCHAR(255)"),
        col("comment", "TEXT"),
    ],
};

const GLPI_TICKETS: TableDef = TableDef {
    name: "glpi_tickets",
    columns: &[
        col("id", "INTEGER"),
        col("name", "VARCHAR(255)"),
        col("content", "TEXT"),
        col("date", "DATETIME"),
        col("closedate", "DATETIME"),
        col("status", "INT(11)"),
        col("priority", "INT(11)"),
        fk("computers_id", "INT(11)", "glpi_computers", "id"),
    ],
};

const GLPI_SOLUTIONS: TableDef = TableDef {
    name: "glpi_itilsolutions",
    columns: &[
        col("id", "INTEGER"),
        fk("tickets_id", "INT(11)", "glpi_tickets", "id"),
        col("content", "TEXT"),
        col("date_creation", "DATETIME"),
    ],
};

fn tables(variant: Variant) -> &'static [TableDef] {
    match variant {
        Variant::OsTicket => std::slice::from_ref(&OST_TICKET),
        Variant::Glpi => &[GLPI_COMPUTERS, GLPI_TICKETS, GLPI_SOLUTIONS],
    }
}

fn ddl(t: &TableDef) -> String {
    let mut parts: Vec<String> = t
        .columns
        .iter()
        .enumerate()
        .map(
            |(i, c)| {
                if i == 0 {
                    format!("{} {} PRIMARY KEY", c.name, c.decl)
                } else {
                    format!("{} {}", c.name, c.decl)
                }
            },
        )
        .collect();
    for c in t.columns {
        if let Some((table, column)) = c.references {
            parts.push(format!("FOREIGN KEY ({}) REFERENCES {table}({column})", c.name));
        }
    }
    format!("CREATE TABLE {} (\n  {}\n)", t.name, parts.join(",\n  "))
}

type Row = Vec<Value>;

fn t(s: &str) -> Value {
    Value::Text(s.to_owned())
}

fn i(n: i64) -> Value {
    Value::Integer(n)
}

const NULL: Value = Value::Null;

// ticket_id dept priority topic staff email name subject helptopic phone
// phone_ext ip status source isoverdue isanswered lastmessage lastresponse
// created updated closed
const OST_SEED: [[&str; 21]; 3] = [
    [
        "1147",
        "2",
        "1",
        "1",
        "3",
        "m.kalogirou@samos.gr",
        "Kalogirou Maria",
        "Printer not responding",
        "",
        "",
        "",
        "10.129.46.31",
        "open",
        "Email",
        "0",
        "0",
        "2013-04-04 11:02:51",
        "0000-00-00 00:00:00",
        "2013-04-04 11:02:51",
        "2013-04-04 11:02:51",
        "",
    ],
    [
        "1148",
        "1",
        "3",
        "2",
        "1",
        "g.papadopoulos@samos.gr",
        "Papadopoulos Giorgos",
        "Email quota exceeded",
        "Mail",
        "22730",
        "12",
        "10.129.46.77",
        "closed",
        "Web",
        "0",
        "1",
        "2013-04-04 15:20:10",
        "2013-04-05 08:12:44",
        "2013-04-04 15:20:10",
        "2013-04-05 08:13:02",
        "2013-04-05 08:13:02",
    ],
    [
        "1149",
        "1",
        "2",
        "0",
        "0",
        "h.athanasakis@samos.gr",
        "Athanasakis Iraklis",
        "\"No Video\" error",
        "",
        "",
        "",
        "10.129.46.92",
        "closed",
        "Phone",
        "0",
        "1",
        "2013-04-05 09:38:14",
        "2013-04-05 09:38:56",
        "2013-04-05 09:38:14",
        "2013-04-05 09:38:59",
        "2013-04-05 09:38:59",
    ],
];

const GLPI_COMPUTER_SEED: [(i64, &str, &str, Option<&str>); 2] =
    [(1, "PC-IKARIA-01", "CZC1234XYZ", Some("Front desk")), (2, "PC-IKARIA-02", "CZC5678QRS", None)];

// id name content date closedate status priority computers_id
#[allow(clippy::type_complexity)]
const GLPI_TICKET_SEED: [(i64, &str, &str, &str, Option<&str>, i64, i64, Option<i64>); 3] = [
    (
        1,
        "No Video on second monitor",
        "The second monitor shows no video after the docking station was moved.",
        "2013-05-02 10:14:00",
        Some("2013-05-02 12:40:00"),
        6,
        3,
        Some(1),
    ),
    (2, "Printer offline", "Shared printer in room 4 is offline.", "2013-05-03 09:01:00", None, 2, 2, Some(2)),
    (
        3,
        "New user account",
        "Account for the new clerk.",
        "2013-05-06 08:30:00",
        Some("2013-05-06 09:00:00"),
        6,
        1,
        None,
    ),
];

// id tickets_id content date_creation
const GLPI_SOLUTION_SEED: [(i64, i64, &str, &str); 2] = [
    (1, 1, "Replaced the DisplayPort cable and reset the display settings.", "2013-05-02 12:39:00"),
    (2, 3, "Account created in the directory.", "2013-05-06 08:59:00"),
];

const SUBJECTS: &[&str] = &[
    "\"No Video\" error",
    "No video signal on projector",
    "Printer jam",
    "Password reset",
    "Network down in building B",
    "Slow computer",
    "Email not syncing",
    "Software install request",
    "VPN access",
    "Scanner driver missing",
    "Εκτυπωτής εκτός λειτουργίας",
    "Monitor flickering",
    "Keyboard_not_working 100%",
];

const NAMES: &[&str] = &[
    "Athanasakis Iraklis",
    "Kalogirou Maria",
    "Papadopoulos Giorgos",
    "Nikolaou Eleni",
    "Samiou Katerina",
    "Ikariotis Petros",
];

const SOURCES: &[&str] = &["Phone", "Email", "Web", "Other"];

/// Generated rows per table, in insertion order.
pub struct FixtureData {
    variant: Variant,
    rows: Vec<(&'static TableDef, Vec<Row>)>,
}

fn fmt_dt(d: NaiveDateTime) -> String {
    d.format("%Y-%m-%d %H:%M:%S").to_string()
}

fn is_null_like(v: &Value) -> bool {
    match v {
        Value::Null => true,
        Value::Text(s) => s.starts_with("0000-00-00"),
        _ => false,
    }
}

impl FixtureData {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn row_counts(&self) -> BTreeMap<&'static str, usize> {
        self.rows.iter().map(|(t, r)| (t.name, r.len())).collect()
    }

    /// Triples a generated mapping yields, counted from the rows: one type
    /// triple per row, one per non-null non-key-reference column not in
    /// `mask`, one per reference whose target row exists.
    pub fn predicted_triples(&self, mask: &[String]) -> usize {
        let mut keys: BTreeMap<&str, std::collections::HashSet<i64>> = BTreeMap::new();
        for (t, rows) in &self.rows {
            let set = rows
                .iter()
                .filter_map(|r| match r[0] {
                    Value::Integer(k) => Some(k),
                    _ => None,
                })
                .collect();
            keys.insert(t.name, set);
        }
        let mut n = 0;
        for (t, rows) in &self.rows {
            for r in rows {
                n += 1;
                for (c, v) in t.columns.iter().zip(r) {
                    match (c.references, v) {
                        (Some((target, _)), Value::Integer(k)) => {
                            n += usize::from(keys.get(target).is_some_and(|s| s.contains(k)));
                        }
                        (Some(_), _) => {}
                        (None, v) => {
                            let masked = mask.iter().any(|m| *m == format!("{}.{}", t.name, c.name));
                            n += usize::from(!masked && !is_null_like(v));
                        }
                    }
                }
            }
        }
        n
    }

    pub fn write(&self, path: &Path) -> Result<(), DemoError> {
        if path.exists() {
            fs::remove_file(path)?;
        }
        let mut conn = Connection::open(path)?;
        let tx = conn.transaction()?;
        for (t, rows) in &self.rows {
            tx.execute(&ddl(t), [])?;
            let marks = vec!["?"; t.columns.len()].join(", ");
            let mut stmt = tx.prepare(&format!("INSERT INTO {} VALUES ({marks})", t.name))?;
            for r in rows {
                stmt.execute(rusqlite::params_from_iter(r.iter()))?;
            }
        }
        tx.commit()?;
        Ok(())
    }
}

fn ost_seed_row(s: &[&str; 21]) -> Row {
    s.iter()
        .enumerate()
        .map(|(k, v)| match k {
            0..=4 | 14 | 15 => i(v.parse().expect("seed integer")),
            20 if v.is_empty() => NULL,
            _ => t(v),
        })
        .collect()
}

fn random_ip(rng: &mut ChaCha8Rng) -> String {
    format!("10.129.{}.{}", rng.random_range(40..50), rng.random_range(2..250))
}

fn osticket(spec: &FixtureSpec, rng: &mut ChaCha8Rng) -> Vec<Row> {
    let mut rows: Vec<Row> = OST_SEED.iter().take(spec.tickets).map(ost_seed_row).collect();
    let start = NaiveDate::from_ymd_opt(2013, 4, 6).expect("date").and_hms_opt(8, 0, 0).expect("time");
    let mut at = start;
    for k in rows.len()..spec.tickets {
        let id = 1147 + k as i64;
        at += Duration::seconds(rng.random_range(60..20_000));
        let name = *NAMES.choose(rng).expect("names");
        let email = format!("{}@samos.gr", name.split(' ').next().unwrap_or("user").to_lowercase());
        let closed = rng.random_bool(0.6);
        let answered = closed || rng.random_bool(0.3);
        let response = at + Duration::seconds(rng.random_range(30..7_200));
        let updated = response + Duration::seconds(rng.random_range(1..600));
        rows.push(vec![
            i(id),
            i(rng.random_range(1..4)),
            i(rng.random_range(1..5)),
            i(rng.random_range(0..6)),
            i(rng.random_range(0..5)),
            t(&email),
            t(name),
            t(SUBJECTS.choose(rng).expect("subjects")),
            t(if rng.random_bool(0.2) { "Hardware" } else { "" }),
            t(if rng.random_bool(0.3) { "22730" } else { "" }),
            t(""),
            t(&random_ip(rng)),
            t(if closed { "closed" } else { "open" }),
            t(SOURCES.choose(rng).expect("sources")),
            i(i64::from(!closed && rng.random_bool(0.2))),
            i(i64::from(answered)),
            t(&fmt_dt(at)),
            if answered { t(&fmt_dt(response)) } else { t("0000-00-00 00:00:00") },
            t(&fmt_dt(at)),
            t(&fmt_dt(updated)),
            if closed { t(&fmt_dt(updated)) } else { NULL },
        ]);
    }
    rows
}

fn glpi(spec: &FixtureSpec, rng: &mut ChaCha8Rng) -> Vec<(&'static TableDef, Vec<Row>)> {
    let mut computers: Vec<Row> = GLPI_COMPUTER_SEED
        .iter()
        .take(spec.assets)
        .map(|(id, n, s, c)| vec![i(*id), t(n), t(s), c.map_or(NULL, t)])
        .collect();
    for k in computers.len()..spec.assets {
        let id = k as i64 + 1;
        computers.push(vec![
            i(id),
            t(&format!("PC-IKARIA-{id:02}")),
            t(&format!("CZC{:06}", rng.random_range(0..1_000_000))),
            if rng.random_bool(0.3) { t("Office") } else { NULL },
        ]);
    }
    let mut tickets: Vec<Row> = GLPI_TICKET_SEED
        .iter()
        .take(spec.tickets)
        .map(|(id, n, c, d, cd, st, pr, comp)| {
            let comp = comp.filter(|c| (*c as usize) <= spec.assets);
            vec![i(*id), t(n), t(c), t(d), cd.map_or(NULL, t), i(*st), i(*pr), comp.map_or(NULL, i)]
        })
        .collect();
    let mut solutions: Vec<Row> = GLPI_SOLUTION_SEED
        .iter()
        .filter(|(_, tid, _, _)| (*tid as usize) <= tickets.len())
        .map(|(id, tid, c, d)| vec![i(*id), i(*tid), t(c), t(d)])
        .collect();
    let start = NaiveDate::from_ymd_opt(2013, 5, 7).expect("date").and_hms_opt(8, 0, 0).expect("time");
    let mut at = start;
    for k in tickets.len()..spec.tickets {
        let id = k as i64 + 1;
        at += Duration::seconds(rng.random_range(60..20_000));
        let closed = rng.random_bool(0.6);
        let done = at + Duration::seconds(rng.random_range(300..30_000));
        let subject = *SUBJECTS.choose(rng).expect("subjects");
        let computer =
            if spec.assets > 0 && rng.random_bool(0.8) { i(rng.random_range(1..=spec.assets as i64)) } else { NULL };
        tickets.push(vec![
            i(id),
            t(subject),
            t(&format!("Reported: {}", subject.to_lowercase())),
            t(&fmt_dt(at)),
            if closed { t(&fmt_dt(done)) } else { NULL },
            i(if closed { 6 } else { rng.random_range(1..5) }),
            i(rng.random_range(1..6)),
            computer,
        ]);
        if closed {
            let sid = solutions.len() as i64 + 1;
            solutions.push(vec![
                i(sid),
                i(id),
                t(&format!("Resolved {subject}")),
                t(&fmt_dt(done - Duration::seconds(60))),
            ]);
        }
    }
    vec![(&GLPI_COMPUTERS, computers), (&GLPI_TICKETS, tickets), (&GLPI_SOLUTIONS, solutions)]
}

/// Rows for `spec`; the same spec always yields the same rows.
pub fn generate(spec: &FixtureSpec) -> FixtureData {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rows = match spec.variant {
        Variant::OsTicket => vec![(&OST_TICKET, osticket(spec, &mut rng))],
        Variant::Glpi => glpi(spec, &mut rng),
    };
    debug_assert_eq!(rows.len(), tables(spec.variant).len());
    FixtureData { variant: spec.variant, rows }
}

/// Demo alignment from the osTicket vocabulary, as CURIEs over the
/// mapping's `vocab:` prefix.
pub const OSTICKET_ALIGNMENT: &str = "\
# source\ttarget\tconfidence\torigin
vocab:ost_ticket\thdo:ItSupportTicket\t1\tmanual
vocab:ost_ticket_subject\thdo:ticketTitle\t1\tmanual
vocab:ost_ticket_ticket_id\thdo:ticketId\t1\tmanual
";

pub const GLPI_ALIGNMENT: &str = "\
# source\ttarget\tconfidence\torigin
vocab:glpi_itilsolutions\thdo:ItSupportTask\t1\tmanual
vocab:glpi_itilsolutions_tickets_id\tdul:associatedWith\t1\tmanual
vocab:glpi_tickets\thdo:ItSupportTicket\t1\tmanual
vocab:glpi_tickets_id\thdo:ticketId\t1\tmanual
vocab:glpi_tickets_name\thdo:ticketTitle\t1\tmanual
";

/// Tickets (from any site) about the "No Video" problem.
pub const NO_VIDEO_QUERY: &str = "\
PREFIX hdo: <http://www.samos.gr/ontologies/helpdeskOnto.owl#>
SELECT ?ticket ?title WHERE {
  ?ticket a hdo:ItSupportTicket ;
          hdo:ticketTitle ?title .
  FILTER regex(?title, \"No Video\", \"i\")
}
";

/// Solutions (from any site) for tickets about the "No Video" problem.
pub const SOLUTIONS_QUERY: &str = "\
PREFIX hdo: <http://www.samos.gr/ontologies/helpdeskOnto.owl#>
PREFIX dul: <http://www.ontologydesignpatterns.org/ont/dul/DUL.owl#>
SELECT ?ticket ?title ?task WHERE {
  ?ticket a hdo:ItSupportTicket ;
          hdo:ticketTitle ?title .
  ?task a hdo:ItSupportTask ;
        dul:associatedWith ?ticket .
  FILTER regex(?title, \"No Video\", \"i\")
}
";

/// Query files shipped with the demo, by file name.
pub const GOLDEN_QUERIES: [(&str, &str); 5] = [
    ("novideo.rq", NO_VIDEO_QUERY),
    ("solutions.rq", SOLUTIONS_QUERY),
    (
        "ticket-ids.rq",
        "PREFIX hdo: <http://www.samos.gr/ontologies/helpdeskOnto.owl#>\n\
         SELECT ?ticket ?id WHERE { ?ticket hdo:ticketId ?id } LIMIT 50\n",
    ),
    ("empty.rq", "SELECT * WHERE { }\n"),
    ("classes.rq", "SELECT DISTINCT ?class WHERE { ?s a ?class }\n"),
];

/// Files of a built demo directory.
#[derive(Clone, Debug)]
pub struct DemoLayout {
    pub dir: PathBuf,
    pub osticket_db: PathBuf,
    pub glpi_db: PathBuf,
    pub ontology: PathBuf,
    pub osticket_alignment: PathBuf,
    pub glpi_alignment: PathBuf,
    pub queries: PathBuf,
}

impl DemoLayout {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            osticket_db: dir.join("osticket.db"),
            glpi_db: dir.join("glpi.db"),
            ontology: dir.join("helpdesk.ttl"),
            osticket_alignment: dir.join("alignment-osticket.tsv"),
            glpi_alignment: dir.join("alignment-glpi.tsv"),
            queries: dir.join("queries"),
        }
    }

    pub fn db(&self, variant: Variant) -> &Path {
        match variant {
            Variant::OsTicket => &self.osticket_db,
            Variant::Glpi => &self.glpi_db,
        }
    }

    pub fn alignment(&self, variant: Variant) -> &Path {
        match variant {
            Variant::OsTicket => &self.osticket_alignment,
            Variant::Glpi => &self.glpi_alignment,
        }
    }
}

/// Writes both stores, the ontology, the alignments and the query files
/// into `dir`.
pub fn build_fixtures(dir: &Path, osticket: &FixtureSpec, glpi: &FixtureSpec) -> Result<DemoLayout, DemoError> {
    let layout = DemoLayout::new(dir);
    fs::create_dir_all(&layout.queries)?;
    generate(osticket).write(&layout.osticket_db)?;
    generate(glpi).write(&layout.glpi_db)?;
    fs::write(&layout.ontology, HELPDESK_ONTOLOGY)?;
    fs::write(&layout.osticket_alignment, OSTICKET_ALIGNMENT)?;
    fs::write(&layout.glpi_alignment, GLPI_ALIGNMENT)?;
    for (name, text) in GOLDEN_QUERIES {
        fs::write(layout.queries.join(name), text)?;
    }
    Ok(layout)
}
