//! Acceptance criteria 1-11. Prints one line per criterion and exits nonzero
//! if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use crowdshield_core::analysis::cohens_kappa;
use crowdshield_core::classifier::train_classifier;
use crowdshield_core::evaluation::{
    ablation_run, early_detection_sweep, macro_f1_of, prf, Confusion,
};
use crowdshield_core::fusion::{claim_vector, fuse, FusedVector};
use crowdshield_core::q_learning::{
    reward, state_features, train_q_envs, Behavior, StateFeatures, ThreadEnv,
};
use crowdshield_core::synth::{generate_dataset, StanceDist, SynthConfig};
use crowdshield_core::text_encoder::{build_encoder, HashingEncoder};
use crowdshield_core::{
    Ablation, ClaimLabel, ClfTrainConfig, Embedding, LinearClassifier, Milestone, QNetwork,
    QTrainConfig, Reply, RunConfig, Split, Stance, TextEncoder, Thread, TrainedPipeline,
    VeracityLabel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Outcome::*;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

/// Claim bonus plus stance bonus, written out case by case.
fn expected_reward(claim: bool, a: Stance) -> f64 {
    match (claim, a) {
        (true, Stance::Support | Stance::Query | Stance::Root) => 2.0,
        (true, Stance::Comment) => 1.0,
        (true, Stance::Deny) => 0.0,
        (false, Stance::Support | Stance::Query | Stance::Root) => 1.0,
        (false, Stance::Comment) => 0.0,
        (false, Stance::Deny) => -1.0,
    }
}

fn c1_rewards() -> Outcome {
    let mut image = std::collections::BTreeSet::new();
    let mut bad = Vec::new();
    for claim in [true, false] {
        for a in Stance::ALL {
            let got = reward(claim.into(), a);
            if got != expected_reward(claim, a) {
                bad.push(format!("{claim}/{a:?}={got}"));
            }
            image.insert(got as i64);
        }
    }
    let image: Vec<i64> = image.into_iter().collect();
    check(
        bad.is_empty() && image == [-1, 0, 1, 2],
        format!("10 pairs, image {image:?}, mismatches {bad:?}"),
    )
}

fn rel_err(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d < 1e-10 {
        0.0
    } else {
        d / a.abs().max(b.abs())
    }
}

fn c2_gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-6;
    let mut worst_q: f64 = 0.0;
    let mut worst_c: f64 = 0.0;
    for _ in 0..20 {
        let d = rng.random_range(1..6);
        let mut q = QNetwork::zeros(d);
        let p: Vec<f64> = (0..q.n_params())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        q.set_params(&p);
        let states: Vec<StateFeatures> = (0..5)
            .map(|_| StateFeatures((0..d).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect();
        let batch: Vec<_> = states
            .iter()
            .map(|s| {
                (
                    s,
                    Stance::ALL[rng.random_range(0..5)],
                    rng.random_range(-1.0..2.0),
                )
            })
            .collect();
        let (_, g) = q.mse_and_grad(&batch).unwrap();
        for i in 0..p.len() {
            let at = |delta: f64| {
                let mut pp = p.clone();
                pp[i] += delta;
                let mut qq = q.clone();
                qq.set_params(&pp);
                qq.mse_and_grad(&batch).unwrap().0
            };
            worst_q = worst_q.max(rel_err((at(h) - at(-h)) / (2.0 * h), g[i]));
        }

        let mut m = LinearClassifier::init(d, rng.random());
        let p: Vec<f64> = (0..m.n_params())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        m.set_params(&p);
        let xs: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let batch: Vec<(&[f64], VeracityLabel)> = xs
            .iter()
            .map(|x| (x.as_slice(), VeracityLabel::ALL[rng.random_range(0..2)]))
            .collect();
        let (_, g) = m.ce_and_grad(&batch, [1.0, 1.0]).unwrap();
        for i in 0..p.len() {
            let at = |delta: f64| {
                let mut pp = p.clone();
                pp[i] += delta;
                let mut mm = m.clone();
                mm.set_params(&pp);
                mm.ce_and_grad(&batch, [1.0, 1.0]).unwrap().0
            };
            worst_c = worst_c.max(rel_err((at(h) - at(-h)) / (2.0 * h), g[i]));
        }
    }
    check(
        worst_q <= 1e-4 && worst_c <= 1e-4,
        format!("20+20 instances, worst rel err Q {worst_q:.2e}, classifier {worst_c:.2e}"),
    )
}

const WORDS: [&str; 12] = [
    "vaccine", "hospital", "fake", "source", "police", "report", "video", "photo", "city", "mayor",
    "truth", "denied",
];

fn random_thread(rng: &mut impl Rng, id: usize, max_replies: usize) -> Thread {
    let text = |rng: &mut dyn rand::RngCore| -> String {
        (0..rng.random_range(2..7))
            .map(|_| WORDS[rng.random_range(0..WORDS.len())])
            .collect::<Vec<_>>()
            .join(" ")
    };
    let source = Reply {
        id: format!("t{id}-s"),
        parent_id: None,
        text: format!("{} post{id}s", text(rng)),
        time: 0,
        stance: Stance::Root,
        claim: ClaimLabel::from(rng.random_bool(0.7)),
    };
    let n = rng.random_range(0..=max_replies);
    let mut time = 0;
    let mut replies: Vec<Reply> = Vec::new();
    for j in 0..n {
        time += rng.random_range(1..5000);
        let parent = if j == 0 || rng.random_bool(0.5) {
            source.id.clone()
        } else {
            replies[rng.random_range(0..j)].id.clone()
        };
        replies.push(Reply {
            id: format!("t{id}-r{j}"),
            parent_id: Some(parent),
            text: format!("{} post{id}r{j}", text(rng)),
            time,
            stance: Stance::REPLY[rng.random_range(0..4)],
            claim: ClaimLabel::from(rng.random_bool(0.5)),
        });
    }
    let label = VeracityLabel::ALL[rng.random_range(0..2)];
    Thread::new(format!("t{id}"), source, replies, label)
}

/// Sweeps `V(j) <- r(j) + discount * V(j + 1)` over the annotated chain to a
/// fixed point.
fn chain_values(t: &Thread, discount: f64) -> Vec<f64> {
    let r: Vec<f64> = t
        .nodes()
        .map(|n| expected_reward(n.claim.is_claim(), n.stance))
        .collect();
    let mut v = vec![0.0; r.len()];
    loop {
        let mut delta: f64 = 0.0;
        for j in 0..r.len() {
            let next = v.get(j + 1).copied().unwrap_or(0.0);
            let nv = r[j] + discount * next;
            delta = delta.max((nv - v[j]).abs());
            v[j] = nv;
        }
        if delta == 0.0 {
            return v;
        }
    }
}

fn c3_value_iteration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let threads: Vec<Thread> = (0..10).map(|i| random_thread(&mut rng, i, 4)).collect();
    let enc = HashingEncoder::new(64, 3);
    let cfg = QTrainConfig {
        episodes: 2000,
        explore_rate: 0.0,
        behavior: Behavior::Gold,
        lr: 0.01,
        seed: 3,
        ..Default::default()
    };
    let envs: Vec<ThreadEnv> = threads
        .iter()
        .map(|t| ThreadEnv::new(t, &enc).unwrap())
        .collect();
    let net = train_q_envs(&envs, &cfg).unwrap().net;
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for t in &threads {
        let v = chain_values(t, cfg.discount);
        for (j, node) in t.nodes().enumerate() {
            let s = state_features(t, j, &enc).unwrap();
            let q = net.q_value(&s, node.stance).unwrap();
            worst = worst.max((q - v[j]).abs());
            pairs += 1;
        }
    }
    check(
        worst <= 0.05,
        format!("{pairs} pairs, max |Q - V| {worst:.4}"),
    )
}

fn c4_zero_discount() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let threads: Vec<Thread> = (0..10).map(|i| random_thread(&mut rng, i, 4)).collect();
    let enc = HashingEncoder::new(64, 4);
    let cfg = QTrainConfig {
        discount: 0.0,
        explore_rate: 0.0,
        episodes: 4000,
        lr: 0.01,
        seed: 4,
        ..Default::default()
    };
    let envs: Vec<ThreadEnv> = threads
        .iter()
        .map(|t| ThreadEnv::new(t, &enc).unwrap())
        .collect();
    let out = train_q_envs(&envs, &cfg).unwrap();
    let mut worst: f64 = 0.0;
    for tr in out.buffer.iter() {
        let q = out.net.q_value(&tr.state, tr.action).unwrap();
        worst = worst.max((q - tr.reward).abs());
    }
    check(
        worst <= 0.05,
        format!(
            "{} visited transitions, max |Q - r| {worst:.4}",
            out.buffer.len()
        ),
    )
}

fn c5_fusion() -> Outcome {
    let ds = generate_dataset(&SynthConfig {
        n_threads: 100,
        replies_range: [0, 80],
        seed: 5,
        ..Default::default()
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let l = 64;
    let mut bad = 0;
    for t in &ds.threads {
        let f: Vec<f64> = (0..l).map(|_| rng.random_range(-3.0..3.0)).collect();
        let s = Embedding {
            values: (0..16).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let c = claim_vector(t, l).unwrap();
        let one = fuse(&f, &c, 1.0, &s).unwrap();
        let concat: Vec<f64> = f.iter().chain(&s.values).copied().collect();
        if one.values != concat {
            bad += 1;
        }
        let two = fuse(&f, &c, 2.0, &s).unwrap();
        let claims: Vec<bool> = t
            .nodes()
            .map(|n| n.claim.is_claim())
            .chain(std::iter::repeat(false))
            .take(l)
            .collect();
        let ok = (0..l).all(|j| two.values[j] == if claims[j] { 2.0 * f[j] } else { f[j] })
            && two.values[l..] == s.values[..];
        if !ok {
            bad += 1;
        }
    }
    check(bad == 0, format!("100 threads, {bad} mismatches"))
}

fn separable(rng: &mut impl Rng, n: usize, w: &[f64]) -> (Vec<FusedVector>, Vec<VeracityLabel>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    while x.len() < n {
        let v: Vec<f64> = (0..w.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
        if m.abs() < 0.2 {
            continue;
        }
        y.push(if m > 0.0 {
            VeracityLabel::Misinformation
        } else {
            VeracityLabel::NonMisinformation
        });
        x.push(FusedVector { values: v });
    }
    (x, y)
}

fn c6_separable() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let w: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (x, y) = separable(&mut rng, 500, &w);
    let (dx, dy) = separable(&mut rng, 100, &w);
    let cfg = ClfTrainConfig::default();
    let (m, hist) = train_classifier(&x, &y, &dx, &dy, &cfg).unwrap();
    let preds: Vec<VeracityLabel> = dx.iter().map(|v| m.predict(v).unwrap().0).collect();
    let f1 = macro_f1_of(&Confusion::from_pairs(&dy, &preds).unwrap());
    check(
        f1 >= 0.95 && hist.epochs.len() <= 20,
        format!("dev macro-F1 {f1:.4} after {} epochs", hist.epochs.len()),
    )
}

fn synth_run(seed: u64, synth: SynthConfig) -> (RunConfig, Box<dyn TextEncoder>) {
    let mut cfg = RunConfig {
        seed,
        ..Default::default()
    };
    cfg.dataset.synth = Some(synth);
    cfg.resolve_seeds();
    cfg.validate().unwrap();
    let enc = build_encoder(&cfg.encoder).unwrap();
    (cfg, enc)
}

fn c7_end_to_end() -> Outcome {
    let (cfg, enc) = synth_run(7, SynthConfig::default());
    let ds = generate_dataset(cfg.dataset.synth.as_ref().unwrap()).unwrap();
    let pc = cfg.pipeline_config();
    let full = ablation_run(&ds, Ablation::Full, enc.as_ref(), &pc)
        .unwrap()
        .macro_f1;
    let no_q = ablation_run(&ds, Ablation::NoQ, enc.as_ref(), &pc)
        .unwrap()
        .macro_f1;
    check(
        full >= 0.85 && full - no_q >= 0.10,
        format!("full {full:.4}, no_q {no_q:.4}, gap {:.4}", full - no_q),
    )
}

fn c8_early_detection() -> Outcome {
    let (cfg, enc) = synth_run(
        8,
        SynthConfig {
            signal_replies: Some(5),
            misinfo_stances: StanceDist::new(0.05, 0.70, 0.05, 0.20),
            non_misinfo_stances: StanceDist::new(0.70, 0.05, 0.05, 0.20),
            ..Default::default()
        },
    );
    let ds = generate_dataset(cfg.dataset.synth.as_ref().unwrap()).unwrap();
    let trained = TrainedPipeline::fit(
        &ds.threads_in(Split::Train),
        enc.as_ref(),
        &cfg.pipeline_config(),
    )
    .unwrap();
    let r = early_detection_sweep(
        &trained,
        &ds.threads_in(Split::Test),
        &[Milestone::Count(0), Milestone::Count(10), Milestone::All],
        enc.as_ref(),
    )
    .unwrap();
    let (t0, t10, all) = (r[0].macro_f1, r[1].macro_f1, r[2].macro_f1);
    check(
        (t10 - all).abs() <= 0.05 && t0 < t10,
        format!("tau=0 {t0:.4}, tau=10 {t10:.4}, tau=all {all:.4}"),
    )
}

fn confusion(counts: [[usize; 2]; 2]) -> Confusion {
    let mut g = Vec::new();
    let mut p = Vec::new();
    for (gi, row) in counts.iter().enumerate() {
        for (pi, &k) in row.iter().enumerate() {
            for _ in 0..k {
                g.push(VeracityLabel::ALL[gi]);
                p.push(VeracityLabel::ALL[pi]);
            }
        }
    }
    Confusion::from_pairs(&g, &p).unwrap()
}

fn c9_metrics() -> Outcome {
    // [gold][pred], index 0 = non-misinformation. Expected per class:
    // (p, r, f1) for non-misinformation, then misinformation, then macro-F1.
    type Prf = (f64, f64, f64);
    let cases: [([[usize; 2]; 2], Prf, Prf, f64); 5] = [
        ([[5, 0], [0, 5]], (1.0, 1.0, 1.0), (1.0, 1.0, 1.0), 1.0),
        (
            [[3, 1], [2, 4]],
            (0.6, 0.75, 2.0 / 3.0),
            (0.8, 4.0 / 6.0, 8.0 / 11.0),
            23.0 / 33.0,
        ),
        (
            [[4, 0], [4, 0]],
            (0.5, 1.0, 2.0 / 3.0),
            (0.0, 0.0, 0.0),
            1.0 / 3.0,
        ),
        (
            [[0, 0], [3, 2]],
            (0.0, 0.0, 0.0),
            (1.0, 0.4, 4.0 / 7.0),
            2.0 / 7.0,
        ),
        ([[0, 6], [3, 0]], (0.0, 0.0, 0.0), (0.0, 0.0, 0.0), 0.0),
    ];
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
    let mut bad = Vec::new();
    for (i, (counts, non, mis, macro_f1)) in cases.iter().enumerate() {
        let c = confusion(*counts);
        let got = [
            prf(&c, VeracityLabel::NonMisinformation),
            prf(&c, VeracityLabel::Misinformation),
        ];
        let ok = [non, mis]
            .iter()
            .zip(got)
            .all(|(w, g)| close(w.0, g.0) && close(w.1, g.1) && close(w.2, g.2))
            && close(macro_f1_of(&c), *macro_f1);
        if !ok {
            bad.push(format!("case {i}"));
        }
    }

    let mut a = vec!["yes"; 25];
    a.extend(vec!["no"; 25]);
    let mut b = vec!["yes"; 20];
    b.extend(vec!["no"; 5]);
    b.extend(vec!["yes"; 10]);
    b.extend(vec!["no"; 15]);
    let kappas = [
        (vec!["a", "b", "a", "c"], vec!["a", "b", "a", "c"], 1.0),
        (vec!["x", "x", "y", "y"], vec!["x", "y", "x", "y"], 0.0),
        (a, b, 0.4),
    ];
    for (i, (a, b, want)) in kappas.iter().enumerate() {
        let k = cohens_kappa(a, b).unwrap();
        if !close(k, *want) {
            bad.push(format!("kappa {i}: {k}"));
        }
    }
    check(
        bad.is_empty(),
        format!("5 confusions, 3 rater pairs, failures {bad:?}"),
    )
}

fn run_bin(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_crowdshield"))
        .args(args)
        .output()
        .unwrap()
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"format": "crowdshield-config/1", "seed": 10, "dataset": {"synth": {}},
            "ablations": ["no_q", "no_text"], "alphas": [1, 3]}"#,
    )
    .unwrap();
    let mut reports = Vec::new();
    for (name, par) in [("a", "1"), ("b", "4")] {
        let out = dir.path().join(name);
        let o = run_bin(&[
            "pipeline",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--parallel-conditions",
            par,
        ]);
        if !o.status.success() {
            return Fail(format!(
                "pipeline failed: {}",
                String::from_utf8_lossy(&o.stderr)
            ));
        }
        reports.push(std::fs::read(out.join("report.json")).unwrap());
    }
    check(
        reports[0] == reports[1],
        format!(
            "two runs, {} bytes each, identical: {}",
            reports[0].len(),
            reports[0] == reports[1]
        ),
    )
}

/// Mis/non-mis counts per split from `stats.csv`.
fn stats_counts(dir: &Path, out: &Path) -> Result<[[u64; 2]; 3], String> {
    let o = run_bin(&[
        "stats",
        "--format",
        "rumoureval",
        "--input",
        dir.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    if !o.status.success() {
        return Err(String::from_utf8_lossy(&o.stderr).trim().to_string());
    }
    let csv = std::fs::read_to_string(out.join("stats.csv")).map_err(|e| e.to_string())?;
    let mut counts = [[0u64; 2]; 3];
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let row = match f[0] {
            "train" => 0,
            "test" => 1,
            _ => 2,
        };
        let col = match f[1] {
            "misinformation" => 0,
            "non-misinformation" => 1,
            _ => continue,
        };
        counts[row][col] = f[2].parse().map_err(|_| line.to_string())?;
    }
    Ok(counts)
}

fn c11_semeval_stats() -> Outcome {
    let vars = [
        (
            "CROWDSHIELD_SEMEVAL_TWITTER",
            [[190, 135], [24, 32], [214, 167]],
        ),
        ("CROWDSHIELD_SEMEVAL_REDDIT", [[12, 28], [14, 11], [26, 39]]),
    ];
    let present: Vec<_> = vars
        .iter()
        .filter_map(|(v, want)| std::env::var(v).ok().map(|p| (*v, p, want)))
        .collect();
    if present.is_empty() {
        return Skip(
            "SemEval-2019 Task 7 corpus not available (set CROWDSHIELD_SEMEVAL_TWITTER / _REDDIT)"
                .into(),
        );
    }
    let tmp = tempfile::tempdir().unwrap();
    let mut notes = Vec::new();
    let mut ok = true;
    for (var, path, want) in present {
        match stats_counts(Path::new(&path), &tmp.path().join(var)) {
            Ok(got) => {
                ok &= &got == want;
                notes.push(format!("{var}: train/test/total {got:?} want {want:?}"));
            }
            Err(e) => {
                ok = false;
                notes.push(format!("{var}: {e}"));
            }
        }
    }
    check(ok, notes.join("; "))
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() {
    let criteria: [Criterion; 11] = [
        ("reward table", c1_rewards, Duration::from_secs(1)),
        ("gradient checks", c2_gradients, Duration::from_secs(10)),
        (
            "value-iteration oracle",
            c3_value_iteration,
            Duration::from_secs(60),
        ),
        (
            "zero-discount convergence",
            c4_zero_discount,
            Duration::from_secs(60),
        ),
        ("fusion identity", c5_fusion, Duration::from_secs(5)),
        (
            "classifier separability",
            c6_separable,
            Duration::from_secs(30),
        ),
        (
            "end-to-end synthetic",
            c7_end_to_end,
            Duration::from_secs(300),
        ),
        (
            "early detection",
            c8_early_detection,
            Duration::from_secs(300),
        ),
        ("metrics oracle", c9_metrics, Duration::from_secs(1)),
        ("determinism", c10_determinism, Duration::from_secs(600)),
        ("dataset stats", c11_semeval_stats, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let over = took > *budget;
        let (status, detail) = match outcome {
            Pass(d) if !over => ("PASS", d),
            Pass(d) => ("FAIL", format!("{d}; over budget {budget:?}")),
            Fail(d) => ("FAIL", d),
            Skip(d) => ("SKIP", d),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "criterion {:>2} {status} {name}: {detail} ({:.2}s)",
            i + 1,
            took.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
