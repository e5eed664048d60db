mod common;

use std::path::Path;

use common::{get, get_query, run, ServeProcess};
use s3ai::demo::{GOLDEN_QUERIES, NO_VIDEO_QUERY};
use s3ai::rdf::{parse_turtle, read_results_json, RdfTerm};
use s3ai::sparql::{evaluate_algebra, parse_query};
use s3ai::vgraph::GraphSource;

const SECRET: &str = "s3cr3t-Pa55word";

const HEADER: &str = "\
@prefix map: <#> .
@prefix db: <> .
@prefix vocab: <vocab/> .
@prefix rdf: <http://www.w3.org/1999/02/22-rdf-syntax-ns#> .
@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .
@prefix xsd: <http://www.w3.org/2001/XMLSchema#> .
@prefix d2rq: <http://www.wiwiss.fu-berlin.de/suhl/bizer/D2RQ/0.1#> .
@prefix jdbc: <http://d2rq.org/terms/jdbc/> .

map:database a d2rq:Database;
  d2rq:jdbcDriver \"org.sqlite.JDBC\";
  d2rq:jdbcDSN \"sqlite:osticket.db\";
  d2rq:username \"XXXXXXXX\";
  d2rq:password \"XXXXX\";
  jdbc:autoReconnect \"true\";
  jdbc:zeroDateTimeBehavior \"convertToNull\";
  .

# Table ost_ticket
map:ost_ticket a d2rq:ClassMap;
  d2rq:dataStorage map:database;
  d2rq:uriPattern \"ost_ticket/@@ost_ticket.ticket_id@@\";
  d2rq:class vocab:ost_ticket;
";

fn fixtures(extra: usize) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), &["fixtures", "-o", ".", "--extra", &extra.to_string()], &[], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    dir
}

fn generate(dir: &Path, db: &str, out: &str) {
    let r = run(dir, &["generate-mapping", "-o", out, &format!("sqlite:{db}")], &[], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
}

fn align(dir: &Path, mapping: &str, alignment: &str, out: &str) {
    let r = run(
        dir,
        &["align", "apply", "--mapping", mapping, "--ontology", "helpdesk.ttl", "--alignment", alignment, "-o", out],
        &[],
        None,
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
}

fn dump(dir: &Path, mapping: &str) -> s3ai::rdf::Graph {
    let r = run(dir, &["dump", mapping], &[], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    parse_turtle(&r.stdout, None).unwrap()
}

#[test]
fn generated_mapping_matches_the_golden_file() {
    let dir = fixtures(0);
    let r = run(dir.path(), &["generate-mapping", "-u", "helpdesk", "-p", SECRET, "sqlite:osticket.db"], &[], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.starts_with(HEADER), "{}", r.stdout);
    let golden =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/mapping_osticket.ttl"))
            .unwrap();
    assert_eq!(r.stdout, golden);
}

#[test]
fn passwords_are_never_echoed() {
    let dir = fixtures(0);
    let from_flag = run(
        dir.path(),
        &["generate-mapping", "-u", "helpdesk", "-p", SECRET, "-o", "flag.ttl", "sqlite:osticket.db"],
        &[],
        None,
    );
    let from_env = run(
        dir.path(),
        &["generate-mapping", "-o", "env.ttl", "sqlite:osticket.db"],
        &[("S3AI_DB_USER", "helpdesk"), ("S3AI_DB_PASS", SECRET), ("RUST_LOG", "trace")],
        None,
    );
    let failing = run(
        dir.path(),
        &["generate-mapping", "-p", SECRET, "sqlite:missing/nowhere.db"],
        &[("RUST_LOG", "trace")],
        None,
    );
    let help = run(dir.path(), &["generate-mapping", "--help"], &[("S3AI_DB_PASS", SECRET)], None);
    assert_eq!((from_flag.code, from_env.code, failing.code, help.code), (0, 0, 2, 0));
    for r in [&from_flag, &from_env, &failing, &help] {
        assert!(!r.stdout.contains(SECRET) && !r.stderr.contains(SECRET));
    }
    for f in ["flag.ttl", "env.ttl"] {
        let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(!text.contains(SECRET));
        assert!(!text.contains("helpdesk\""));
        assert!(text.contains("d2rq:password \"XXXXX\""));
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = run(dir.path(), &["--version"], &[], None);
    assert_eq!(ok.code, 0);
    let usage = run(dir.path(), &["serve"], &[], None);
    assert_eq!(usage.code, 1);
    let unknown = run(dir.path(), &["frobnicate"], &[], None);
    assert_eq!(unknown.code, 1);
    let missing = run(dir.path(), &["dump", "no-such-mapping.ttl"], &[], None);
    assert_eq!(missing.code, 2);
    assert!(missing.stderr.starts_with("error: "), "{}", missing.stderr);
    let no_target = run(dir.path(), &["query", "--registry", "r.txt"], &[], Some("SELECT * WHERE {}"));
    assert_eq!(no_target.code, 1);
}

#[test]
fn alignment_rewrites_classes_without_changing_the_data() {
    let dir = fixtures(5);
    generate(dir.path(), "osticket.db", "plain.ttl");
    align(dir.path(), "plain.ttl", "alignment-osticket.tsv", "aligned.ttl");
    let text = std::fs::read_to_string(dir.path().join("aligned.ttl")).unwrap();
    assert!(text.contains("@prefix hdo: <http://www.samos.gr/ontologies/helpdeskOnto.owl#> ."));
    let class_map = text.split("map:ost_ticket a d2rq:ClassMap;").nth(1).unwrap();
    let class_map = &class_map[..class_map.find("\n  .").unwrap()];
    assert!(class_map.contains("d2rq:uriPattern \"ost_ticket/@@ost_ticket.ticket_id@@\";"));
    assert!(class_map.contains("d2rq:class hdo:ItSupportTicket;"));
    assert!(!class_map.contains("vocab:ost_ticket;"));
    assert_eq!(dump(dir.path(), "plain.ttl").len(), dump(dir.path(), "aligned.ttl").len());
}

#[test]
fn dump_answers_like_the_live_endpoint() {
    let dir = fixtures(10);
    for (db, alignment) in [("osticket.db", "alignment-osticket.tsv"), ("glpi.db", "alignment-glpi.tsv")] {
        generate(dir.path(), db, "plain.ttl");
        align(dir.path(), "plain.ttl", alignment, "aligned.ttl");
        let g = dump(dir.path(), "aligned.ttl");
        let server = ServeProcess::start(dir.path(), Path::new("aligned.ttl"), "http://localhost:2020/");
        let registry = dir.path().join("registry.txt");
        std::fs::write(&registry, format!("site {}sparql true 10000\n", server.url)).unwrap();
        for (name, q) in GOLDEN_QUERIES {
            let r = run(dir.path(), &["query", "--site", "site", "--registry", "registry.txt"], &[], Some(q));
            assert_eq!(r.code, 0, "{name}: {}", r.stderr);
            let live = read_results_json(&r.stdout).unwrap();
            let want = evaluate_algebra(&GraphSource::new(&g), &parse_query(q).unwrap(), false).unwrap();
            assert!(live.bag_eq(&want), "{db} {name}: {} vs {}", live.len(), want.len());
        }
    }
}

#[test]
fn served_mapping_dereferences_and_answers() {
    let dir = fixtures(0);
    generate(dir.path(), "osticket.db", "plain.ttl");
    align(dir.path(), "plain.ttl", "alignment-osticket.tsv", "aligned.ttl");
    let port = common::free_port();
    let base = format!("http://127.0.0.1:{port}/");
    let mut child = std::process::Command::new(common::bin())
        .current_dir(dir.path())
        .args(["serve", "-b", &base, "-p", &port.to_string(), "aligned.ttl"])
        .stderr(std::process::Stdio::null())
        .spawn()
        .unwrap();
    let deadline = std::time::Instant::now() + std::time::Duration::from_secs(30);
    while std::net::TcpStream::connect(("127.0.0.1", port)).is_err() {
        assert!(std::time::Instant::now() < deadline);
        std::thread::sleep(std::time::Duration::from_millis(50));
    }
    let r = get(&format!("{base}resource/ost_ticket/1149"), Some("text/turtle"));
    assert_eq!(r.status, 200);
    let g = parse_turtle(&r.body, None).unwrap();
    assert!(g.iter().any(|t| t.predicate().as_str().ends_with("#ticketId")
        && matches!(t.object(), RdfTerm::Literal(l) if l.lexical() == "1149")));
    let answers = read_results_json(&get_query(&format!("{base}sparql"), NO_VIDEO_QUERY).body).unwrap();
    assert!(!answers.is_empty());
    child.kill().unwrap();
    child.wait().unwrap();
}

#[test]
fn mediated_query_reaches_every_site() {
    let dir = fixtures(5);
    let mut servers = Vec::new();
    for (i, (db, alignment)) in
        [("osticket.db", "alignment-osticket.tsv"), ("glpi.db", "alignment-glpi.tsv")].iter().enumerate()
    {
        let (plain, aligned) = (format!("plain-{i}.ttl"), format!("aligned-{i}.ttl"));
        generate(dir.path(), db, &plain);
        align(dir.path(), &plain, alignment, &aligned);
        servers.push(ServeProcess::start(dir.path(), Path::new(&aligned), &format!("http://site{i}.test/")));
    }
    let registry = format!("samos {}sparql true 10000\nikaria {}sparql true 10000\n", servers[0].url, servers[1].url);
    std::fs::write(dir.path().join("registry.txt"), registry).unwrap();
    std::fs::write(dir.path().join("q.rq"), NO_VIDEO_QUERY).unwrap();
    let r = run(dir.path(), &["query", "--mediated", "--registry", "registry.txt", "-f", "q.rq"], &[], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let got = read_results_json(&r.stdout).unwrap();
    for site in ["samos", "ikaria"] {
        assert!(got.rows.iter().any(|row| row["site"].string_value() == site), "{site} missing");
    }
}
