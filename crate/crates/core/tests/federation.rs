mod common;

use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use common::{demo, random_query, site};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use s3ai::demo::{Variant, NO_VIDEO_QUERY, SOLUTIONS_QUERY};
use s3ai::federate::{
    evaluate_federated, evaluate_service, mediate, EndpointRegistry, FederationError, FederationOptions, ServiceClient,
};
use s3ai::rdf::{Iri, Literal, RdfTerm, Solution, SolutionSequence};
use s3ai::sparql::{parse_query, AlgebraExpr};
use s3ai::vgraph::VirtualGraph;

const SAMOS: &str = "http://samos.test/sparql";
const IKARIA: &str = "http://ikaria.test/sparql";

/// Answers SERVICE requests from in-process virtual graphs and records
/// how many requests overlap.
struct LocalSites {
    sites: HashMap<String, VirtualGraph>,
    down: BTreeSet<String>,
    delay: Duration,
    in_flight: AtomicUsize,
    peak: AtomicUsize,
    calls: AtomicUsize,
}

impl LocalSites {
    fn new(sites: Vec<(&str, VirtualGraph)>) -> Self {
        Self {
            sites: sites.into_iter().map(|(k, v)| (k.to_owned(), v)).collect(),
            down: BTreeSet::new(),
            delay: Duration::ZERO,
            in_flight: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
        }
    }
}

impl ServiceClient for LocalSites {
    fn select(&self, endpoint: &Iri, query: &str, _timeout: Duration) -> Result<SolutionSequence, String> {
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        self.calls.fetch_add(1, Ordering::SeqCst);
        std::thread::sleep(self.delay);
        let out = if self.down.contains(endpoint.as_str()) {
            Err("connection refused".to_owned())
        } else {
            let key = endpoint.as_str().split('#').next().unwrap_or_default();
            match self.sites.get(key) {
                Some(vg) => parse_query(query)
                    .map_err(|e| e.to_string())
                    .and_then(|a| vg.evaluate(&a).map_err(|e| e.to_string())),
                None => Err(format!("no such endpoint {endpoint}")),
            }
        };
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        out
    }
}

fn two_sites() -> (tempfile::TempDir, LocalSites) {
    let (dir, layout) = demo(40);
    let client =
        LocalSites::new(vec![(SAMOS, site(&layout, Variant::OsTicket)), (IKARIA, site(&layout, Variant::Glpi))]);
    (dir, client)
}

fn registry(ikaria_active: bool) -> EndpointRegistry {
    EndpointRegistry::parse(&format!("samos {SAMOS} true 5000\nikaria {IKARIA} {ikaria_active} 5000\n")).unwrap()
}

fn tagged(rows: Vec<Solution>, site: &str) -> Vec<Solution> {
    rows.into_iter()
        .map(|mut r| {
            r.insert("site".into(), RdfTerm::Literal(Literal::simple(site)));
            r
        })
        .collect()
}

fn opts() -> FederationOptions {
    FederationOptions { provenance_var: Some("site".into()), ..FederationOptions::default() }
}

/// Mediated answers equal the per-site answers, each tagged with its site.
fn check_sound(client: &LocalSites, reg: &EndpointRegistry, q: &str) -> usize {
    let a = parse_query(q).unwrap();
    let got = evaluate_federated(&mediate(&a, reg, &opts()).unwrap(), reg, &opts(), client).unwrap();
    let mut want = Vec::new();
    for e in reg.active() {
        want.extend(tagged(client.sites[e.service.as_str()].evaluate(&a).unwrap().rows, &e.site));
    }
    let want = SolutionSequence::new(got.solutions.variables.clone(), want);
    assert!(got.solutions.bag_eq(&want), "mediation differs for\n{q}");
    assert!(got.warnings.is_empty());
    got.solutions.len()
}

#[test]
fn mediated_demo_queries_union_the_sites() {
    let (_dir, client) = two_sites();
    let reg = registry(true);
    assert!(check_sound(&client, &reg, NO_VIDEO_QUERY) >= 2);
    check_sound(&client, &reg, SOLUTIONS_QUERY);

    let a = parse_query(NO_VIDEO_QUERY).unwrap();
    let r = evaluate_federated(&mediate(&a, &reg, &opts()).unwrap(), &reg, &opts(), &client).unwrap();
    let sites: BTreeSet<&str> = r.solutions.rows.iter().map(|s| s["site"].string_value()).collect();
    assert_eq!(sites, BTreeSet::from(["ikaria", "samos"]));
    assert_eq!(r.solutions.variables, ["ticket", "title", "site"]);
}

#[test]
fn mediation_is_sound_on_random_queries() {
    let (_dir, client) = two_sites();
    let reg = registry(true);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let graphs = [client.sites[SAMOS].materialize().unwrap(), client.sites[IKARIA].materialize().unwrap()];
    let mut checked = 0;
    for i in 0..60 {
        let q = random_query(&mut rng, &graphs[i % 2]);
        // DISTINCT over the union is not the union of per-site DISTINCTs
        if q.contains("DISTINCT") {
            continue;
        }
        check_sound(&client, &reg, &q);
        checked += 1;
    }
    assert!(checked > 20);
}

#[test]
fn one_site_mediates_to_a_plain_service_call() {
    let (_dir, client) = two_sites();
    let reg = EndpointRegistry::parse(&format!("samos {SAMOS} true 1000\n")).unwrap();
    let a = parse_query(NO_VIDEO_QUERY).unwrap();
    let m = mediate(&a, &reg, &FederationOptions::default()).unwrap();
    let (_, pattern) = m.split_modifiers();
    assert!(matches!(pattern, AlgebraExpr::Service { .. }));
    let got = evaluate_federated(&m, &reg, &FederationOptions::default(), &client).unwrap();
    assert!(got.solutions.bag_eq(&client.sites[SAMOS].evaluate(&a).unwrap()));
}

#[test]
fn two_active_sites_give_a_union_of_two_services() {
    let reg = registry(true);
    let m = mediate(&parse_query(NO_VIDEO_QUERY).unwrap(), &reg, &opts()).unwrap();
    let (_, pattern) = m.split_modifiers();
    let AlgebraExpr::Union(l, r) = pattern else { panic!("{pattern:?}") };
    let mut targets = Vec::new();
    for side in [l, r] {
        let AlgebraExpr::Extend { inner, .. } = side.as_ref() else { panic!() };
        let AlgebraExpr::Service { endpoint, .. } = inner.as_ref() else { panic!() };
        targets.push(format!("{endpoint:?}"));
    }
    assert!(targets[0].contains(SAMOS) && targets[1].contains(IKARIA));
}

#[test]
fn identical_endpoints_double_the_cardinality() {
    let (_dir, layout) = demo(10);
    let client = LocalSites::new(vec![
        (SAMOS, site(&layout, Variant::OsTicket)),
        ("http://samos.test/sparql2", site(&layout, Variant::OsTicket)),
    ]);
    let reg = EndpointRegistry::default();
    let body = "?t <http://www.samos.gr/ontologies/helpdeskOnto.owl#ticketId> ?id";
    let one = format!("SELECT * WHERE {{ SERVICE <{SAMOS}> {{ {body} }} }}");
    let two = format!("SELECT * WHERE {{ {{ SERVICE <{SAMOS}> {{ {body} }} }} UNION {{ SERVICE <http://samos.test/sparql2> {{ {body} }} }} }}");
    let fo = FederationOptions::default();
    let n1 = evaluate_federated(&parse_query(&one).unwrap(), &reg, &fo, &client).unwrap().solutions.len();
    let n2 = evaluate_federated(&parse_query(&two).unwrap(), &reg, &fo, &client).unwrap().solutions.len();
    assert!(n1 > 0);
    assert_eq!(n2, 2 * n1);
}

#[test]
fn service_blocks_join_locally() {
    let (_dir, client) = two_sites();
    let hdo = "http://www.samos.gr/ontologies/helpdeskOnto.owl#";
    let q = format!(
        "SELECT * WHERE {{ SERVICE <{SAMOS}> {{ ?t a <{hdo}ItSupportTicket> }} SERVICE <{SAMOS}> {{ ?t <{hdo}ticketTitle> ?title }} }}"
    );
    let direct = format!("SELECT * WHERE {{ ?t a <{hdo}ItSupportTicket> . ?t <{hdo}ticketTitle> ?title }}");
    let got =
        evaluate_federated(&parse_query(&q).unwrap(), &registry(true), &FederationOptions::default(), &client).unwrap();
    let want = client.sites[SAMOS].evaluate(&parse_query(&direct).unwrap()).unwrap();
    assert!(!want.is_empty());
    assert!(got.solutions.bag_eq(&want));
}

#[test]
fn in_flight_requests_never_exceed_the_bound() {
    let (_dir, layout) = demo(0);
    let mut client = LocalSites::new(vec![(SAMOS, site(&layout, Variant::OsTicket))]);
    client.delay = Duration::from_millis(25);
    // eight distinct SERVICE leaves against the same site
    let branches: Vec<String> = (0..8).map(|i| format!("{{ SERVICE <{SAMOS}#{i}> {{ ?s a ?c }} }}")).collect();
    let q = parse_query(&format!("SELECT * WHERE {{ {} }}", branches.join(" UNION "))).unwrap();
    for bound in [1, 2, 3] {
        client.peak.store(0, Ordering::SeqCst);
        client.calls.store(0, Ordering::SeqCst);
        let fo = FederationOptions { max_parallel: bound, ..FederationOptions::default() };
        let r = evaluate_federated(&q, &EndpointRegistry::default(), &fo, &client).unwrap();
        assert!(!r.solutions.is_empty());
        assert_eq!(client.calls.load(Ordering::SeqCst), 8);
        let peak = client.peak.load(Ordering::SeqCst);
        assert!(peak <= bound, "peak {peak} > bound {bound}");
        if cfg!(feature = "parallel") && bound > 1 {
            assert!(peak > 1, "requests never overlapped with bound {bound}");
        }
    }
}

#[test]
fn silent_services_degrade_to_empty_with_a_warning() {
    let (_dir, mut client) = two_sites();
    client.down.insert(IKARIA.to_owned());
    let reg = EndpointRegistry::default();
    let fo = FederationOptions::default();
    let silent = parse_query(&format!("SELECT * WHERE {{ SERVICE SILENT <{IKARIA}> {{ ?s ?p ?o }} }}")).unwrap();
    let r = evaluate_federated(&silent, &reg, &fo, &client).unwrap();
    assert!(r.solutions.is_empty());
    assert_eq!(r.warnings.len(), 1);
    assert!(r.warnings[0].contains("connection refused"));

    let loud = parse_query(&format!("SELECT * WHERE {{ SERVICE <{IKARIA}> {{ ?s ?p ?o }} }}")).unwrap();
    let (_, node) = loud.split_modifiers();
    let err = evaluate_service(node, &reg, &fo, &client).unwrap_err();
    assert!(matches!(err, FederationError::Service { .. }), "{err}");
    assert!(evaluate_federated(&loud, &reg, &fo, &client).is_err());
}

#[test]
fn partial_results_keep_the_live_sites() {
    let (_dir, mut client) = two_sites();
    client.down.insert(IKARIA.to_owned());
    let reg = registry(true);
    let a = parse_query(NO_VIDEO_QUERY).unwrap();
    let m = mediate(&a, &reg, &opts()).unwrap();
    assert!(evaluate_federated(&m, &reg, &opts(), &client).is_err());
    let partial = FederationOptions { partial_results: true, ..opts() };
    let r = evaluate_federated(&m, &reg, &partial, &client).unwrap();
    assert_eq!(r.warnings.len(), 1);
    let samos_only = tagged(client.sites[SAMOS].evaluate(&a).unwrap().rows, "samos");
    assert!(r.solutions.bag_eq(&SolutionSequence::new(r.solutions.variables.clone(), samos_only)));
}

#[test]
fn deactivating_a_site_removes_only_its_rows() {
    let (_dir, client) = two_sites();
    let a = parse_query(NO_VIDEO_QUERY).unwrap();
    let all =
        evaluate_federated(&mediate(&a, &registry(true), &opts()).unwrap(), &registry(true), &opts(), &client).unwrap();
    let reg = registry(false);
    let some = evaluate_federated(&mediate(&a, &reg, &opts()).unwrap(), &reg, &opts(), &client).unwrap();
    let kept: Vec<Solution> =
        all.solutions.rows.iter().filter(|r| r["site"].string_value() == "samos").cloned().collect();
    assert!(some.solutions.bag_eq(&SolutionSequence::new(some.solutions.variables.clone(), kept)));

    // a hand-written SERVICE to an inactive site counts as a failure
    let q = parse_query(&format!("SELECT * WHERE {{ SERVICE SILENT <{IKARIA}> {{ ?s ?p ?o }} }}")).unwrap();
    let r = evaluate_federated(&q, &reg, &FederationOptions::default(), &client).unwrap();
    assert!(r.solutions.is_empty() && r.warnings[0].contains("inactive"));
}

#[test]
fn refusals() {
    let (_dir, client) = two_sites();
    let fo = FederationOptions::default();
    let var = parse_query("SELECT * WHERE { SERVICE ?e { ?s ?p ?o } }").unwrap();
    assert!(matches!(evaluate_federated(&var, &registry(true), &fo, &client), Err(FederationError::Unsupported(_))));
    let none = EndpointRegistry::parse(&format!("samos {SAMOS} false 10\n")).unwrap();
    assert!(matches!(mediate(&parse_query(NO_VIDEO_QUERY).unwrap(), &none, &fo), Err(FederationError::NoActiveSites)));
    let has_service = parse_query(&format!("SELECT * WHERE {{ SERVICE <{SAMOS}> {{ ?s ?p ?o }} }}")).unwrap();
    assert!(mediate(&has_service, &registry(true), &fo).is_err());
    // a local pattern at the integration site sees no data
    let local = parse_query("SELECT * WHERE { ?s ?p ?o }").unwrap();
    assert!(evaluate_federated(&local, &registry(true), &fo, &client).unwrap().solutions.is_empty());
}

#[test]
fn modifiers_apply_after_the_union() {
    let (_dir, client) = two_sites();
    let reg = registry(true);
    let q = "PREFIX hdo: <http://www.samos.gr/ontologies/helpdeskOnto.owl#>\nSELECT ?id WHERE { ?t hdo:ticketId ?id } LIMIT 5";
    let r =
        evaluate_federated(&mediate(&parse_query(q).unwrap(), &reg, &opts()).unwrap(), &reg, &opts(), &client).unwrap();
    assert_eq!(r.solutions.len(), 5);
    assert_eq!(r.solutions.variables, ["id", "site"]);
}
