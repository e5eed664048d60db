use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use s3ai::demo::{aligned_mapping, build_fixtures, FixtureSpec, Variant, NO_VIDEO_QUERY, SOLUTIONS_QUERY};
use s3ai::par::{self, Execution};
use s3ai::relational::StoreOptions;
use s3ai::sparql::parse_query;
use s3ai::vgraph::VirtualGraph;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn sites(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    let layout = build_fixtures(
        dir.path(),
        &FixtureSpec::sized(Variant::OsTicket, 20_000, 1),
        &FixtureSpec::sized(Variant::Glpi, 20_000, 1),
    )
    .unwrap();
    let open = |variant, exec| {
        let doc = aligned_mapping(&layout, variant, "http://localhost:2020/", &[]).unwrap();
        VirtualGraph::open(doc, StoreOptions::default()).unwrap().with_execution(exec)
    };

    let mut g = c.benchmark_group("materialize");
    g.sample_size(10);
    for (name, exec) in MODES {
        let vg = open(Variant::Glpi, exec);
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| black_box(vg.materialize().unwrap().len())));
    }
    g.finish();

    let mut g = c.benchmark_group("evaluate");
    g.sample_size(20);
    for (query, text) in [("no-video", NO_VIDEO_QUERY), ("solutions", SOLUTIONS_QUERY)] {
        let algebra = parse_query(text).unwrap();
        for (name, exec) in MODES {
            let vg = open(Variant::Glpi, exec);
            g.bench_with_input(BenchmarkId::new(query, name), &algebra, |b, a| {
                b.iter(|| black_box(vg.evaluate(a).unwrap().len()))
            });
        }
    }
    g.finish();
}

fn map(c: &mut Criterion) {
    let items: Vec<u64> = (0..4096).collect();
    let work = |x: &u64| (0..2_000u64).fold(*x, |acc, i| acc.rotate_left(5) ^ i.wrapping_mul(0x9e37_79b9));
    let mut g = c.benchmark_group("par_map");
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| black_box(par::map(exec, &items, work))));
    }
    g.finish();
}

criterion_group!(benches, sites, map);
criterion_main!(benches);
