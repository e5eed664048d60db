use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use s3ai::align::{
    apply_alignment, load_ontology, parse_alignment, suggest_alignment, write_alignment, SuggestOptions,
};
use s3ai::demo::bench::{run_bench, BenchConfig, DEFAULT_TRIPLES};
use s3ai::demo::{alignment_prefixes, build_fixtures, FixtureSpec, Variant, NO_VIDEO_QUERY};
use s3ai::endpoint::gateway::{serve_gateway, GatewayConfig, DEFAULT_PORT};
use s3ai::endpoint::{serve, EndpointConfig};
use s3ai::federate::{evaluate_federated, mediate, EndpointRegistry, FederationOptions, HttpClient, ServiceClient};
use s3ai::mapping::{generate_mapping, parse_mapping, serialize_mapping, GenerateOptions, MappingDocument};
use s3ai::rdf::{serialize_turtle, write_results_json};
use s3ai::relational::{introspect, ConnectionSpec, StoreOptions, PASS_ENV, USER_ENV};
use s3ai::sparql::parse_query;
use s3ai::vgraph::VirtualGraph;

#[derive(Parser)]
#[command(
    name = "s3ai",
    version,
    about = "Relational databases as virtual RDF graphs, SPARQL endpoints and a federation gateway"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a mapping document for a database
    GenerateMapping(GenerateArgs),
    /// Serve a mapping as a SPARQL endpoint
    Serve(ServeArgs),
    /// Suggest or apply an ontology alignment
    #[command(subcommand)]
    Align(AlignCommand),
    /// Materialize a mapping to Turtle
    Dump(DumpArgs),
    /// Run a query against one site, a federation or all sites mediated
    Query(QueryArgs),
    /// Serve the federation gateway
    ServeGateway(GatewayArgs),
    /// Measure memory and latency against the number of sites
    Bench(BenchArgs),
    /// Write the helpdesk demo stores, ontology, alignments and queries
    Fixtures(FixtureArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Output file; stdout when absent
    #[arg(short = 'o')]
    out: Option<PathBuf>,
    #[arg(short = 'u', env = USER_ENV, hide_env_values = true)]
    user: Option<String>,
    #[arg(short = 'p', env = PASS_ENV, hide_env_values = true)]
    password: Option<String>,
    /// Base IRI the mapping resolves against
    #[arg(short = 'b', long = "base", default_value = "http://localhost:2020/")]
    base: String,
    /// Namespace of generated classes and properties
    #[arg(long)]
    vocab: Option<String>,
    /// table.column to leave unmapped; repeatable
    #[arg(long = "exclude")]
    exclude: Vec<String>,
    /// Database locator, e.g. sqlite:osticket.db
    dsn: String,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(short = 'b', default_value = "http://localhost:2020/")]
    base: String,
    #[arg(short = 'p', default_value_t = 2020)]
    port: u16,
    /// Accepted for compatibility; has no effect
    #[arg(long)]
    fast: bool,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long = "timeout-ms", default_value_t = 60_000)]
    timeout_ms: u64,
    #[arg(long = "no-html")]
    no_html: bool,
    mapping: PathBuf,
}

#[derive(Subcommand)]
enum AlignCommand {
    /// Propose correspondences by name similarity
    Suggest {
        #[arg(long)]
        mapping: PathBuf,
        #[arg(long)]
        ontology: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(short = 'o')]
        out: Option<PathBuf>,
    },
    /// Rewrite a mapping with a reviewed alignment
    Apply {
        #[arg(long)]
        mapping: PathBuf,
        #[arg(long)]
        ontology: PathBuf,
        #[arg(long)]
        alignment: PathBuf,
        #[arg(short = 'o')]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DumpArgs {
    #[arg(short = 'o')]
    out: Option<PathBuf>,
    mapping: PathBuf,
}

#[derive(Args)]
#[group(id = "target", required = true, multiple = false, args = ["site", "federated", "mediated"])]
struct QueryArgs {
    /// Send the query unchanged to this registered site
    #[arg(long)]
    site: Option<String>,
    /// Evaluate SERVICE blocks against their endpoints
    #[arg(long)]
    federated: bool,
    /// Send the query to every active site and union the answers
    #[arg(long)]
    mediated: bool,
    #[arg(long)]
    registry: PathBuf,
    /// Query file; stdin when absent
    #[arg(short = 'f')]
    file: Option<PathBuf>,
    #[command(flatten)]
    fed: FedArgs,
}

#[derive(Args)]
struct FedArgs {
    #[arg(long = "max-parallel", default_value_t = 4)]
    max_parallel: usize,
    /// Skip failing sites with a warning instead of failing
    #[arg(long)]
    partial: bool,
    /// Variable bound to the site name in mediated answers
    #[arg(long, default_value = "site")]
    provenance: String,
}

impl FedArgs {
    fn options(&self) -> FederationOptions {
        FederationOptions {
            max_parallel: self.max_parallel.max(1),
            partial_results: self.partial,
            provenance_var: Some(self.provenance.clone()).filter(|p| !p.is_empty()),
            ..FederationOptions::default()
        }
    }
}

#[derive(Args)]
struct GatewayArgs {
    #[arg(long)]
    registry: PathBuf,
    #[arg(short = 'p', default_value_t = DEFAULT_PORT)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[command(flatten)]
    fed: FedArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated, strictly increasing site counts
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    sites: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_TRIPLES)]
    triples: usize,
    /// Divide the per-site triple count
    #[arg(long, default_value_t = 1)]
    scale: usize,
    #[arg(long, default_value_t = 10)]
    rounds: usize,
    /// Workload query files; the "No Video" query when absent
    #[arg(long = "query")]
    queries: Vec<PathBuf>,
    #[arg(long = "max-parallel", default_value_t = 1)]
    max_parallel: usize,
    /// Scratch directory; a temporary one when absent
    #[arg(long)]
    workdir: Option<PathBuf>,
    /// Also write the CSV rows here
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(short = 'o', long = "out")]
    out: PathBuf,
    /// Generated tickets per site beyond the seed rows
    #[arg(long, default_value_t = 0)]
    extra: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// table.column to blank out; repeatable
    #[arg(long = "mask")]
    mask: Vec<String>,
}

type Failure = Box<dyn std::error::Error>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display()))?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn load_mapping(path: &Path, base: &str) -> Result<MappingDocument, Failure> {
    let mut doc = parse_mapping(&read(path)?, base)?;
    doc.database.connection = doc.database.connection.clone().with_env_credentials();
    Ok(doc)
}

fn generate(a: GenerateArgs) -> Result<(), Failure> {
    let mut conn = ConnectionSpec::new(a.dsn);
    conn.username = a.user.unwrap_or_default();
    conn.password = a.password.unwrap_or_default();
    let catalog = introspect(&conn)?;
    let opts =
        GenerateOptions { base: a.base, vocab_namespace: a.vocab, mask_credentials: true, exclude_columns: a.exclude };
    let doc = generate_mapping(&catalog, &conn, &opts);
    emit(a.out.as_deref(), &serialize_mapping(&doc))?;
    eprintln!("mapped {} tables", doc.class_maps.len());
    Ok(())
}

fn run_serve(a: ServeArgs) -> Result<(), Failure> {
    let mut doc = load_mapping(&a.mapping, &a.base)?;
    doc.base = a.base.clone();
    let vg = VirtualGraph::open(doc, StoreOptions::default())?;
    let mut cfg = EndpointConfig::new(a.base, a.port)?;
    cfg.host = a.host;
    cfg.timeout = Duration::from_millis(a.timeout_ms);
    cfg.html = !a.no_html;
    let handle = serve(cfg, vg)?;
    eprintln!("serving on {} (Ctrl-C to stop)", handle.url());
    wait_for_ctrl_c();
    eprintln!("draining in-flight queries");
    handle.stop()?;
    Ok(())
}

fn wait_for_ctrl_c() {
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build();
    match rt {
        Ok(rt) => {
            let _ = rt.block_on(tokio::signal::ctrl_c());
        }
        Err(_) => loop {
            std::thread::park();
        },
    }
}

fn align(c: AlignCommand) -> Result<(), Failure> {
    match c {
        AlignCommand::Suggest { mapping, ontology, threshold, out } => {
            let doc = parse_mapping(&read(&mapping)?, "http://localhost:2020/")?;
            let onto = load_ontology(&read(&ontology)?)?;
            let opts = SuggestOptions { threshold, ..SuggestOptions::default() };
            let a = suggest_alignment(&doc.terms(), &onto, &opts);
            eprintln!("{} correspondences suggested; review before applying", a.len());
            emit(out.as_deref(), &write_alignment(&a))
        }
        AlignCommand::Apply { mapping, ontology, alignment, out } => {
            let doc = parse_mapping(&read(&mapping)?, "http://localhost:2020/")?;
            let onto = load_ontology(&read(&ontology)?)?;
            let a = parse_alignment(&read(&alignment)?, &alignment_prefixes(&doc, &onto.prefixes))?;
            let rewritten = apply_alignment(&doc, &a, &onto)?;
            emit(out.as_deref(), &serialize_mapping(&rewritten))
        }
    }
}

fn dump(a: DumpArgs) -> Result<(), Failure> {
    let doc = load_mapping(&a.mapping, "http://localhost:2020/")?;
    let g = VirtualGraph::open(doc, StoreOptions::default())?.materialize()?;
    eprintln!("{} triples", g.len());
    emit(a.out.as_deref(), &serialize_turtle(&g))
}

fn query(a: QueryArgs) -> Result<(), Failure> {
    let registry = EndpointRegistry::parse(&read(&a.registry)?)?;
    let text = match &a.file {
        Some(f) => read(f)?,
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            s
        }
    };
    let algebra = parse_query(&text)?;
    let client = HttpClient::new();
    let solutions = if let Some(name) = &a.site {
        let site = registry.site(name).ok_or_else(|| format!("unknown site '{name}'"))?;
        if !site.active {
            return Err(format!("site '{name}' is inactive").into());
        }
        client.select(&site.service, &text, site.timeout).map_err(|e| format!("{name}: {e}"))?
    } else {
        let opts = a.fed.options();
        let algebra = if a.mediated { mediate(&algebra, &registry, &opts)? } else { algebra };
        let r = evaluate_federated(&algebra, &registry, &opts, &client)?;
        for w in &r.warnings {
            eprintln!("warning: {w}");
        }
        r.solutions
    };
    emit(None, &(write_results_json(&solutions) + "\n"))?;
    eprintln!("{} solutions", solutions.len());
    Ok(())
}

fn gateway(a: GatewayArgs) -> Result<(), Failure> {
    EndpointRegistry::parse(&read(&a.registry)?)?;
    let mut cfg = GatewayConfig::new(a.registry, a.port);
    cfg.host = a.host;
    cfg.options = a.fed.options();
    let client: Arc<dyn ServiceClient> = Arc::new(HttpClient::new());
    let handle = serve_gateway(cfg, client)?;
    eprintln!("gateway on {} (Ctrl-C to stop)", handle.url());
    wait_for_ctrl_c();
    handle.stop()?;
    Ok(())
}

fn bench(a: BenchArgs) -> Result<(), Failure> {
    let scratch;
    let workdir = match a.workdir {
        Some(d) => d,
        None => {
            scratch = tempfile::tempdir()?;
            scratch.path().to_path_buf()
        }
    };
    let mut cfg = BenchConfig::new(std::env::current_exe()?, workdir);
    cfg.sites = a.sites;
    cfg.triples_per_site = a.triples;
    cfg.scale = a.scale.max(1);
    cfg.rounds = a.rounds;
    cfg.max_parallel = a.max_parallel.max(1);
    cfg.workload = if a.queries.is_empty() {
        vec![NO_VIDEO_QUERY.to_owned()]
    } else {
        a.queries.iter().map(|q| read(q)).collect::<Result<_, _>>()?
    };
    let report = run_bench(&cfg)?;
    eprint!("{}", report.to_table());
    if let Some(p) = &a.csv {
        std::fs::write(p, report.to_csv())?;
    }
    emit(None, &report.to_csv())
}

fn fixtures(a: FixtureArgs) -> Result<(), Failure> {
    let spec = |v| FixtureSpec { privacy_mask: a.mask.clone(), ..FixtureSpec::with_extra(v, a.extra, a.seed) };
    let layout = build_fixtures(&a.out, &spec(Variant::OsTicket), &spec(Variant::Glpi))?;
    eprintln!("demo written to {}", layout.dir.display());
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::GenerateMapping(a) => generate(a),
        Command::Serve(a) => run_serve(a),
        Command::Align(c) => align(c),
        Command::Dump(a) => dump(a),
        Command::Query(a) => query(a),
        Command::ServeGateway(a) => gateway(a),
        Command::Bench(a) => bench(a),
        Command::Fixtures(a) => fixtures(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
