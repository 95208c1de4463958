use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use exea_bench::{dataset, view, Owned};
use exea_core::adg::build_adg;
use exea_core::embed::similarity_topk;
use exea_core::repair::{mine_rules, repair, RelationAlignment};
use exea_core::synth::write_dataset;
use exea_core::{AdgConfig, ExplainContext, Kg, PathMode, RepairConfig, Side};

fn load(c: &mut Criterion) {
    let d = dataset(2000);
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &d).unwrap();
    let kg1 = dir.path().join("kg1");
    c.bench_function("load_tsv_2000", |b| {
        b.iter(|| {
            Kg::load(kg1.join("triples.tsv"), kg1.join("ent_ids.tsv"), kg1.join("rel_ids.tsv"), Side::Source).unwrap()
        })
    });
}

fn neighborhoods(c: &mut Criterion) {
    let d = dataset(2000);
    let mut g = c.benchmark_group("neighborhood");
    for h in [1, 2] {
        g.bench_with_input(BenchmarkId::new("paths", h), &h, |b, &h| {
            b.iter(|| d.kg1.entities().take(200).map(|e| d.kg1.enumerate_paths(e, h).unwrap().len()).sum::<usize>())
        });
    }
    g.finish();
}

fn topk(c: &mut Criterion) {
    let mut g = c.benchmark_group("topk");
    for n in [500, 2000] {
        let d = dataset(n);
        let o = Owned::of(&d);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| similarity_topk(&d.store, &o.sources, &o.targets, 5).unwrap())
        });
    }
    g.finish();
}

fn explain_and_adg(c: &mut Criterion) {
    let d = dataset(500);
    let v = view(&d);
    let mut g = c.benchmark_group("explain");
    for h in [1, 2] {
        let ctx = ExplainContext::new(&d.kg1, &d.kg2, &d.store, h, PathMode::Unsigned).unwrap();
        g.bench_with_input(BenchmarkId::new("explanations", h), &h, |b, _| {
            b.iter(|| d.predictions.iter().map(|&p| ctx.explain(p, &v).unwrap().triple_count()).sum::<usize>())
        });
        let expls: Vec<_> = d.predictions.iter().map(|&p| ctx.explain(p, &v).unwrap()).collect();
        g.bench_with_input(BenchmarkId::new("adgs", h), &h, |b, _| {
            b.iter(|| {
                expls
                    .iter()
                    .map(|e| build_adg(e, &d.kg1, &d.kg2, &d.store, &AdgConfig::default()).unwrap().confidence)
                    .sum::<f64>()
            })
        });
    }
    g.finish();
}

fn rules(c: &mut Criterion) {
    let d = dataset(2000);
    c.bench_function("mine_rules_2000", |b| b.iter(|| mine_rules(black_box(&d.kg1), &RelationAlignment::default())));
}

fn full_repair(c: &mut Criterion) {
    let mut g = c.benchmark_group("repair");
    g.sample_size(10);
    for n in [200, 500] {
        let d = dataset(n);
        let o = Owned::of(&d);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| repair(&o.input(&d), &RepairConfig::default()).unwrap())
        });
    }
    g.finish();
}

criterion_group!(graph, load, neighborhoods, rules);
criterion_group!(pipeline, topk, explain_and_adg, full_repair);
criterion_main!(graph, pipeline);
