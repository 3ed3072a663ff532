use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mvga_bench::{featured_sphere, narrow_model, noise_stack};
use mvga_core::data::ClassWeights;
use mvga_core::model::{
    encoder_forward, forward_batch, init_params, LossConfig, Mode, Phase, Sample,
};
use mvga_core::render::{rasterize, render_views};
use mvga_core::RenderConfig;

fn bench_rasterize(c: &mut Criterion) {
    let mut group = c.benchmark_group("rasterize");
    for level in [3u32, 5] {
        let mesh = featured_sphere(level);
        let rig = RenderConfig::default().rig().unwrap();
        group.bench_with_input(BenchmarkId::new("level", level), &mesh, |b, mesh| {
            b.iter(|| rasterize(mesh, &rig.cameras[0], rig.resolution).unwrap())
        });
    }
    group.finish();
}

fn bench_render(c: &mut Criterion) {
    let mesh = featured_sphere(4);
    let rig = RenderConfig::default().rig().unwrap();
    c.bench_function("render_views/level4_224px", |b| {
        b.iter(|| render_views(&mesh, &rig).unwrap())
    });
}

fn bench_model(c: &mut Criterion) {
    let cfg = narrow_model();
    let params = init_params(&cfg, 0).unwrap();
    let stack = noise_stack(12, 4, 64);
    c.bench_function("encoder_forward/12x4x64", |b| {
        b.iter(|| encoder_forward(&stack, &cfg.encoder, &params, Mode::Eval).unwrap())
    });

    let stacks: Vec<_> = (0..4).map(|_| noise_stack(12, 4, 64)).collect();
    let batch: Vec<Sample> = stacks
        .iter()
        .enumerate()
        .map(|(i, stack)| Sample {
            stack,
            ga_weeks: 30.0 + i as f64,
            class: i,
            index: i as u64,
        })
        .collect();
    let loss_cfg = LossConfig::new(1.0, ClassWeights::uniform(5)).unwrap();
    c.bench_function("forward_backward/batch4", |b| {
        b.iter(|| {
            let fwd = forward_batch(&params, &cfg, &batch, Phase::Eval).unwrap();
            fwd.backward(&params, &cfg, &loss_cfg).unwrap()
        })
    });
}

criterion_group!(benches, bench_rasterize, bench_render, bench_model);
criterion_main!(benches);
