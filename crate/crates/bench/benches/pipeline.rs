use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use crowdshield_core::fusion::{claim_vector, fuse};
use crowdshield_core::pipeline::PipelineConfig;
use crowdshield_core::q_learning::{q_list, train_q, ThreadEnv};
use crowdshield_core::synth::{generate_dataset, SynthConfig};
use crowdshield_core::text_encoder::{encode_combined, HashingEncoder};
use crowdshield_core::{QTrainConfig, Split, TextEncoder, TrainedPipeline};

fn corpus() -> crowdshield_core::Dataset {
    generate_dataset(&SynthConfig {
        n_threads: 120,
        ..Default::default()
    })
    .unwrap()
}

fn encoding(c: &mut Criterion) {
    let ds = corpus();
    let enc = HashingEncoder::new(256, 0);
    let t = &ds.threads[0];
    c.bench_function("hashing_encode_reply", |b| {
        b.iter(|| enc.encode(black_box(&t.replies[0].text)).unwrap())
    });
    c.bench_function("encode_combined_thread", |b| {
        b.iter(|| encode_combined(black_box(t), &enc).unwrap())
    });
}

fn q_learning(c: &mut Criterion) {
    let ds = corpus();
    let enc = HashingEncoder::new(256, 0);
    let train = ds.threads_in(Split::Train);
    let cfg = QTrainConfig {
        episodes: 200,
        ..Default::default()
    };
    let (q, _) = train_q(&train, &enc, &cfg).unwrap();
    let env = ThreadEnv::new(&train[0], &enc).unwrap();
    c.bench_function("q_list_thread", |b| {
        b.iter(|| q_list(&q, black_box(&env)).unwrap())
    });
    let mut g = c.benchmark_group("train_q");
    g.sample_size(10);
    g.bench_function("200_episodes", |b| {
        b.iter(|| train_q(&train, &enc, &cfg).unwrap())
    });
    g.finish();
}

fn fusion_and_predict(c: &mut Criterion) {
    let ds = corpus();
    let enc = HashingEncoder::new(256, 0);
    let t = &ds.threads[0];
    let f: Vec<f64> = (0..64).map(|i| i as f64 * 0.01).collect();
    let cv = claim_vector(t, 64).unwrap();
    let s = encode_combined(t, &enc).unwrap();
    c.bench_function("fuse", |b| {
        b.iter(|| fuse(black_box(&f), &cv, 2.0, &s).unwrap())
    });

    let mut pc = PipelineConfig::default();
    pc.q.episodes = 200;
    let trained = TrainedPipeline::fit(&ds.threads_in(Split::Train), &enc, &pc).unwrap();
    c.bench_function("predict_thread", |b| {
        b.iter(|| trained.predict(black_box(t), &enc).unwrap())
    });
}

criterion_group!(benches, encoding, q_learning, fusion_and_predict);
criterion_main!(benches);
