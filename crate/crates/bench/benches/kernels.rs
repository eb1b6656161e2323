use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rotbox::perf::{overlapping_pairs, random_boxes};
use rotbox::{multiscale_pool, rotated_nms, skew_iou, RotatedBox, ScoredBox, Tensor};

fn iou(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pairs = overlapping_pairs(&mut rng, 4096);
    let mut g = c.benchmark_group("skew_iou");
    g.throughput(Throughput::Elements(pairs.len() as u64));
    g.bench_function("overlapping_pairs", |b| {
        b.iter(|| {
            pairs
                .iter()
                .map(|(p, q)| skew_iou(black_box(p), black_box(q)))
                .sum::<f64>()
        })
    });
    g.finish();
}

fn nms(c: &mut Criterion) {
    let mut g = c.benchmark_group("rotated_nms");
    g.sample_size(20);
    for n in [1_000usize, 10_000] {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let boxes = random_boxes(&mut rng, n, 5_000.0 * (n as f64 / 10_000.0).sqrt(), 80.0);
        let items: Vec<ScoredBox> = boxes
            .iter()
            .enumerate()
            .map(|(i, b)| ScoredBox::new(*b, ((i * 7919) % n) as f64 / n as f64, i))
            .collect();
        g.bench_with_input(BenchmarkId::from_parameter(n), &items, |b, items| {
            b.iter(|| rotated_nms(black_box(items), 0.5))
        });
    }
    g.finish();
}

fn roi(c: &mut Criterion) {
    let feature = Tensor::from_fn(vec![256, 64, 64], |i| (i % 97) as f32 / 97.0);
    let proposal = RotatedBox::new(128.0, 128.0, 24.0, 120.0, -30.0).unwrap();
    c.bench_function("multiscale_pool_256ch", |b| {
        b.iter(|| multiscale_pool(black_box(&feature), black_box(&proposal), 4.0, 2).unwrap())
    });
}

criterion_group!(benches, iou, nms, roi);
criterion_main!(benches);
