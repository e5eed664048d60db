//! Scalability harness: N replicated sites, each an `s3ai serve` child
//! process, behind an `s3ai serve-gateway` child. Mediated queries run
//! through the gateway while resident memory of all serving processes is
//! sampled once a second.

use std::fmt::Write as _;
use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::{aligned_mapping, build_fixtures, DemoError, FixtureSpec, Variant, NO_VIDEO_QUERY};
use crate::mapping::serialize_mapping;

/// The per-site triple count of the original deployment.
pub const DEFAULT_TRIPLES: usize = 84_192;

#[derive(Clone, Debug)]
pub struct BenchConfig {
    /// The `s3ai` executable to launch.
    pub binary: PathBuf,
    /// Strictly increasing site counts.
    pub sites: Vec<usize>,
    pub triples_per_site: usize,
    /// Divides `triples_per_site`.
    pub scale: usize,
    /// Timed executions of each workload query per point, after one warm-up.
    pub rounds: usize,
    pub workload: Vec<String>,
    pub workdir: PathBuf,
    /// Concurrent site requests at the gateway.
    pub max_parallel: usize,
    pub seed: u64,
}

impl BenchConfig {
    pub fn new(binary: impl Into<PathBuf>, workdir: impl Into<PathBuf>) -> Self {
        Self {
            binary: binary.into(),
            sites: vec![1, 2, 4, 8],
            triples_per_site: DEFAULT_TRIPLES,
            scale: 1,
            rounds: 10,
            workload: vec![NO_VIDEO_QUERY.to_owned()],
            workdir: workdir.into(),
            max_parallel: 1,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchPoint {
    pub sites: usize,
    pub triples: usize,
    pub mem_bytes: u64,
    pub mean_ms: f64,
    pub p95_ms: f64,
}

/// Least-squares line `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub points: Vec<BenchPoint>,
    /// `None` with fewer than two distinct site counts.
    pub memory_fit: Option<Fit>,
    pub latency_fit: Option<Fit>,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<Fit> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Some(Fit { slope, intercept, r2 })
}

impl BenchReport {
    pub fn from_points(points: Vec<BenchPoint>) -> Self {
        let xs: Vec<f64> = points.iter().map(|p| p.sites as f64).collect();
        let mem: Vec<f64> = points.iter().map(|p| p.mem_bytes as f64).collect();
        let lat: Vec<f64> = points.iter().map(|p| p.mean_ms).collect();
        Self { memory_fit: linear_fit(&xs, &mem), latency_fit: linear_fit(&xs, &lat), points }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,triples,memBytes,meanMs,p95Ms\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{},{:.3},{:.3}", p.sites, p.triples, p.mem_bytes, p.mean_ms, p.p95_ms);
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{:>4} {:>10} {:>12} {:>10} {:>10}\n", "N", "triples", "peak MiB", "mean ms", "p95 ms");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{:>4} {:>10} {:>12.1} {:>10.2} {:>10.2}",
                p.sites,
                p.triples,
                p.mem_bytes as f64 / (1024.0 * 1024.0),
                p.mean_ms,
                p.p95_ms
            );
        }
        for (name, fit) in [("memory", self.memory_fit), ("latency", self.latency_fit)] {
            match fit {
                Some(f) => {
                    let _ = writeln!(
                        out,
                        "{name} vs N: slope {:.4e}, intercept {:.4e}, R^2 {:.4}",
                        f.slope, f.intercept, f.r2
                    );
                }
                None => {
                    let _ = writeln!(out, "{name} vs N: fit undefined (fewer than two site counts)");
                }
            }
        }
        out
    }
}

/// Resident set size of a process, from `/proc`.
pub fn rss_bytes(pid: u32) -> Option<u64> {
    let status = fs::read_to_string(format!("/proc/{pid}/status")).ok()?;
    let line = status.lines().find(|l| l.starts_with("VmRSS:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

fn free_port() -> Result<u16, DemoError> {
    Ok(TcpListener::bind(("127.0.0.1", 0))?.local_addr()?.port())
}

/// Child processes killed on drop.
struct Fleet {
    children: Vec<Child>,
}

impl Fleet {
    fn pids(&self) -> Vec<u32> {
        self.children.iter().map(Child::id).collect()
    }
}

impl Drop for Fleet {
    fn drop(&mut self) {
        for c in &mut self.children {
            let _ = c.kill();
            let _ = c.wait();
        }
    }
}

fn spawn(binary: &Path, args: &[String]) -> Result<Child, DemoError> {
    Ok(Command::new(binary).args(args).stdin(Stdio::null()).stdout(Stdio::null()).stderr(Stdio::null()).spawn()?)
}

fn wait_ready(agent: &ureq::Agent, url: &str, child: &mut Child) -> Result<(), DemoError> {
    let deadline = Instant::now() + Duration::from_secs(60);
    while Instant::now() < deadline {
        if let Ok(Some(status)) = child.try_wait() {
            return Err(DemoError::Other(format!("server for {url} exited early with {status}")));
        }
        if agent.get(url).call().is_ok_and(|r| r.status().is_success()) {
            return Ok(());
        }
        std::thread::sleep(Duration::from_millis(50));
    }
    Err(DemoError::Other(format!("server at {url} did not become ready")))
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Peak summed RSS of `pids`, sampled at 1 Hz until stopped.
struct Sampler {
    peak: Arc<AtomicU64>,
    stop: Arc<AtomicBool>,
    thread: Option<std::thread::JoinHandle<()>>,
    pids: Vec<u32>,
}

fn total_rss(pids: &[u32]) -> u64 {
    pids.iter().filter_map(|p| rss_bytes(*p)).sum()
}

impl Sampler {
    fn start(pids: Vec<u32>) -> Self {
        let peak = Arc::new(AtomicU64::new(total_rss(&pids)));
        let stop = Arc::new(AtomicBool::new(false));
        let thread = {
            let (peak, stop, pids) = (peak.clone(), stop.clone(), pids.clone());
            std::thread::spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    peak.fetch_max(total_rss(&pids), Ordering::SeqCst);
                    for _ in 0..20 {
                        if stop.load(Ordering::SeqCst) {
                            return;
                        }
                        std::thread::sleep(Duration::from_millis(50));
                    }
                }
            })
        };
        Self { peak, stop, thread: Some(thread), pids }
    }

    /// An extra sample outside the 1 Hz schedule.
    fn sample(&self) {
        self.peak.fetch_max(total_rss(&self.pids), Ordering::SeqCst);
    }

    fn finish(mut self) -> u64 {
        self.sample();
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
        self.peak.load(Ordering::SeqCst)
    }
}

fn mediated(agent: &ureq::Agent, gateway: &str, query: &str) -> Result<(), DemoError> {
    let body = serde_json::json!({ "mode": "mediated", "query": query }).to_string();
    let mut resp = agent
        .post(format!("{gateway}api/query"))
        .header("Content-Type", "application/json")
        .send(body.as_str())
        .map_err(|e| DemoError::Other(format!("gateway request failed: {e}")))?;
    let status = resp.status();
    let text = resp.body_mut().with_config().limit(1 << 30).read_to_string().unwrap_or_default();
    if !status.is_success() {
        return Err(DemoError::Other(format!("gateway answered {status}: {}", text.trim())));
    }
    Ok(())
}

fn measure(cfg: &BenchConfig, n: usize, mappings: &[PathBuf; 2], triples: usize) -> Result<BenchPoint, DemoError> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(600)))
        .build()
        .into();
    let mut fleet = Fleet { children: Vec::new() };
    let mut registry = String::new();
    for i in 0..n {
        let port = free_port()?;
        let base = format!("http://127.0.0.1:{port}/");
        let mapping = &mappings[i % 2];
        let args = vec![
            "serve".into(),
            "-b".into(),
            base.clone(),
            "-p".into(),
            port.to_string(),
            mapping.display().to_string(),
        ];
        let mut child = spawn(&cfg.binary, &args)?;
        wait_ready(&agent, &base, &mut child)?;
        fleet.children.push(child);
        let _ = writeln!(registry, "site{i} {base}sparql true 600000");
    }
    let registry_path = cfg.workdir.join(format!("registry-{n}.txt"));
    fs::write(&registry_path, registry)?;
    let port = free_port()?;
    let gateway = format!("http://127.0.0.1:{port}/");
    let args = vec![
        "serve-gateway".into(),
        "--registry".into(),
        registry_path.display().to_string(),
        "-p".into(),
        port.to_string(),
        "--max-parallel".into(),
        cfg.max_parallel.to_string(),
    ];
    let mut child = spawn(&cfg.binary, &args)?;
    wait_ready(&agent, &gateway, &mut child)?;
    fleet.children.push(child);

    let sampler = Sampler::start(fleet.pids());
    for q in &cfg.workload {
        mediated(&agent, &gateway, q)?;
    }
    let mut times = Vec::new();
    for _ in 0..cfg.rounds.max(1) {
        for q in &cfg.workload {
            let t = Instant::now();
            mediated(&agent, &gateway, q)?;
            times.push(t.elapsed().as_secs_f64() * 1000.0);
            sampler.sample();
        }
    }
    let mem_bytes = sampler.finish();
    drop(fleet);
    times.sort_by(f64::total_cmp);
    Ok(BenchPoint {
        sites: n,
        triples: triples * n,
        mem_bytes,
        mean_ms: times.iter().sum::<f64>() / times.len() as f64,
        p95_ms: percentile(&times, 0.95),
    })
}

/// Builds one sized fixture per schema variant, then measures every site
/// count in turn; sites alternate between the two variants.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport, DemoError> {
    if cfg.sites.is_empty() || cfg.sites.windows(2).any(|w| w[0] >= w[1]) || cfg.sites[0] == 0 {
        return Err(DemoError::Other("site counts must be positive and strictly increasing".into()));
    }
    let triples = cfg.triples_per_site / cfg.scale.max(1);
    fs::create_dir_all(&cfg.workdir)?;
    let data_dir = cfg.workdir.join("fixtures");
    let layout = build_fixtures(
        &data_dir,
        &FixtureSpec::sized(Variant::OsTicket, triples, cfg.seed),
        &FixtureSpec::sized(Variant::Glpi, triples, cfg.seed),
    )?;
    let mut mappings = Vec::new();
    for variant in [Variant::OsTicket, Variant::Glpi] {
        let mut doc = aligned_mapping(&layout, variant, "http://127.0.0.1/", &[])?;
        let db = fs::canonicalize(layout.db(variant))?;
        doc.database.connection.locator = super::dsn(&db);
        let path = cfg.workdir.join(format!("mapping-{}.ttl", variant.name()));
        fs::write(&path, serialize_mapping(&doc))?;
        mappings.push(path);
    }
    let mappings: [PathBuf; 2] = mappings.try_into().expect("two variants");
    let mut points = Vec::new();
    for &n in &cfg.sites {
        tracing::info!(sites = n, "bench point");
        points.push(measure(cfg, n, &mappings, triples)?);
    }
    Ok(BenchReport::from_points(points))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_fits_perfectly() {
        let f = linear_fit(&[1.0, 2.0, 4.0, 8.0], &[5.0, 7.0, 11.0, 19.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 3.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
        assert!(linear_fit(&[2.0, 2.0], &[1.0, 3.0]).is_none());
    }

    #[test]
    fn r2_of_noisy_points() {
        let xs = [1.0, 2.0, 3.0];
        let ys = [1.5, 1.0, 3.5];
        let f = linear_fit(&xs, &ys).unwrap();
        let my = 2.0;
        let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
        let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - f.intercept - f.slope * x).powi(2)).sum();
        assert!((f.r2 - (1.0 - ss_res / ss_tot)).abs() < 1e-12);
        assert!((f.slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_and_percentile() {
        let r = BenchReport::from_points(vec![BenchPoint {
            sites: 1,
            triples: 10,
            mem_bytes: 2048,
            mean_ms: 1.5,
            p95_ms: 2.0,
        }]);
        assert_eq!(r.to_csv(), "N,triples,memBytes,meanMs,p95Ms\n1,10,2048,1.500,2.000\n");
        assert!(r.memory_fit.is_none());
        assert!(r.to_table().contains("fit undefined"));
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.95), 19.0);
        assert_eq!(percentile(&v[..1], 0.95), 1.0);
    }
}
