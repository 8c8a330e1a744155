//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line; run with
//! `cargo test --test acceptance -- --nocapture --test-threads=1` to see them.

mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use hiertune::cli::{run, CommandSpec};
use hiertune::metrics::{self, MetricsReport, DEFAULT_BETAS, DEFAULT_CUTS_PER_BETA};
use hiertune::objectives::finite_diff_check;
use hiertune::synth::{gen_synth, Fixture, SynthConfig};
use hiertune::trainer::{train, TrainConfig};
use hiertune::treecut::{
    blocked_mask, build_matrices, correct_flags, cut_from_flags, enumerate_treecuts,
    label_set_from_mask, sample_treecut, KeepFlags,
};
use hiertune::{LabelSet, PromptParams, Rng64, TaxonomyTree};

use clap::Parser;
use common::{random_embeddings, random_samples, random_tree, t6};

fn report(criterion: u32, pass: bool, detail: &str) {
    println!(
        "{} criterion {criterion}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

/// Every label set reachable from the matrix pipeline over all raw flag vectors.
fn pipeline_image(tree: &TaxonomyTree) -> BTreeSet<Vec<usize>> {
    let bundle = build_matrices(tree).unwrap();
    let k = bundle.k();
    (0u64..1 << (k - 1))
        .map(|bits| {
            let mut p = vec![1u8];
            p.extend((0..k - 1).map(|i| ((bits >> i) & 1) as u8));
            let cut = cut_from_flags(&KeepFlags::raw(p).unwrap(), &bundle).unwrap();
            cut.members().to_vec()
        })
        .collect()
}

#[test]
fn criterion_1_worked_example_fidelity() {
    let start = Instant::now();
    let tree = t6();
    let bundle = build_matrices(&tree).unwrap();
    // p = (1, 0, 1) corrects to p̃ = (1, 0, 0).
    let ptilde = correct_flags(&KeepFlags::raw(vec![1, 0, 1]).unwrap(), &bundle).unwrap();
    let mask = blocked_mask(&ptilde, &bundle).unwrap();
    let labels = label_set_from_mask(&mask, &bundle);
    let names = labels.names(&tree);

    let cuts = enumerate_treecuts(&tree).unwrap();
    let named: BTreeSet<Vec<&str>> = cuts
        .iter()
        .map(|c| c.iter().map(|&n| tree.name(n)).collect())
        .collect();
    let want: BTreeSet<Vec<&str>> = [
        vec!["n1", "n6"],
        vec!["n2", "n3", "n6"],
        vec!["n3", "n4", "n5", "n6"],
    ]
    .into_iter()
    .collect();
    let elapsed = start.elapsed();

    let pass = ptilde.flags() == [1, 0, 0]
        && mask == vec![0, 1, 1, 2, 2, 0]
        && names == ["n1", "n6"]
        && named == want
        && elapsed < Duration::from_secs(1);
    report(
        1,
        pass,
        &format!(
            "b={mask:?} labels={names:?} cuts={} in {elapsed:?}",
            named.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_sampler_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = Rng64::new(2024);
    let mut failures = Vec::new();
    let mut checked_cuts = 0;
    for i in 0..200 {
        let tree = random_tree(&mut rng, 40, 12);
        assert!(tree.len() <= 40 && tree.internal_nodes().len() <= 12);
        let image = pipeline_image(&tree);
        let oracle = enumerate_treecuts(&tree).unwrap();
        if image != oracle {
            failures.push(format!(
                "tree {i}: image {} vs oracle {}",
                image.len(),
                oracle.len()
            ));
        }
        for members in &image {
            checked_cuts += 1;
            if LabelSet::treecut(&tree, members.clone()).is_err() {
                failures.push(format!("tree {i}: {members:?} violates treecut invariants"));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(30);
    report(
        2,
        pass,
        &format!(
            "200 trees, {checked_cuts} cuts checked, {} failures, {elapsed:?}",
            failures.len()
        ),
    );
    assert!(pass, "{failures:?}");
}

#[test]
fn criterion_3_degenerate_beta_guarantees() {
    let mut rng = Rng64::new(3);
    let mut bad = 0;
    for _ in 0..50 {
        let tree = random_tree(&mut rng, 40, 12);
        let bundle = build_matrices(&tree).unwrap();
        for seed in 0..10 {
            let mut r = Rng64::new(seed);
            let zero = sample_treecut(&tree, &bundle, 0.0, &mut r).unwrap();
            let one = sample_treecut(&tree, &bundle, 1.0, &mut r).unwrap();
            if zero.members() != tree.leaves() || one.members() != tree.children(tree.root()) {
                bad += 1;
            }
        }
    }
    let pass = bad == 0;
    report(
        3,
        pass,
        &format!("500 (tree, seed) pairs, {bad} mismatches"),
    );
    assert!(pass);
}

#[test]
fn criterion_4_gradient_correctness() {
    let start = Instant::now();
    let mut rng = Rng64::new(44);
    let lambdas = [0.0, 0.5, 1.0];
    let mut worst_random: f64 = 0.0;
    let mut worst_identity: f64 = 0.0;
    for i in 0..20 {
        let tree = random_tree(&mut rng, 14, 5);
        let dim = 2 + (rng.next_u64() % 31) as usize;
        let emb = random_embeddings(&tree, dim, &mut rng);
        let batch_len = 1 + (rng.next_u64() % 16) as usize;
        let batch = random_samples(&tree, &emb, batch_len, 0.5, &mut rng);
        let bundle = build_matrices(&tree).unwrap();
        let cut = sample_treecut(&tree, &bundle, 0.4, &mut rng).unwrap();
        let lambda = lambdas[i % 3];
        let tau = 0.07;

        let identity = PromptParams::identity(dim, tau).unwrap();
        let err =
            finite_diff_check(&batch, &cut, lambda, &identity, &emb, &tree, i as u64).unwrap();
        worst_identity = worst_identity.max(err);

        let mut randomized = identity.clone();
        for a in randomized.a.iter_mut() {
            *a += 0.3 * common::gaussian(&mut rng);
        }
        for c in randomized.c.iter_mut() {
            *c = 0.1 * common::gaussian(&mut rng);
        }
        let err =
            finite_diff_check(&batch, &cut, lambda, &randomized, &emb, &tree, i as u64).unwrap();
        worst_random = worst_random.max(err);
    }
    let elapsed = start.elapsed();
    let pass = worst_random <= 1e-4 && worst_identity <= 1e-6 && elapsed < Duration::from_secs(60);
    report(
        4,
        pass,
        &format!(
            "max rel err randomized {worst_random:.3e} (<= 1e-4), identity {worst_identity:.3e} (<= 1e-6), {elapsed:?}"
        ),
    );
    assert!(pass);
}

const TRAIN_EPOCHS: usize = 200;

struct DeskRun {
    fixture: Fixture,
    baseline: MetricsReport,
    protect: MetricsReport,
    elapsed: Duration,
}

fn desk_run() -> &'static DeskRun {
    static RUN: OnceLock<DeskRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = Instant::now();
        let fixture = gen_synth(&SynthConfig {
            leaves: 27,
            depth: 3,
            dim: 64,
            per_leaf_train: 30,
            per_leaf_test: 30,
            noise: 0.6,
            seed: 0,
        })
        .unwrap();
        let eval = |params: &PromptParams| {
            metrics::evaluate(
                &fixture.tree,
                params,
                &fixture.emb,
                &fixture.test,
                &DEFAULT_BETAS,
                DEFAULT_CUTS_PER_BETA,
                0,
            )
            .unwrap()
        };
        let base_cfg = TrainConfig {
            epochs: TRAIN_EPOCHS,
            base_lr: 0.02,
            lambda: 0.0,
            beta: 0.0,
            seed: 0,
            ..TrainConfig::default()
        };
        let protect_cfg = TrainConfig {
            lambda: 0.5,
            beta: 0.1,
            ..base_cfg.clone()
        };
        let (base_params, _) =
            train(&base_cfg, &fixture.tree, &fixture.emb, &fixture.train).unwrap();
        let (protect_params, _) =
            train(&protect_cfg, &fixture.tree, &fixture.emb, &fixture.train).unwrap();
        let baseline = eval(&base_params);
        let protect = eval(&protect_params);
        DeskRun {
            fixture,
            baseline,
            protect,
            elapsed: start.elapsed(),
        }
    })
}

fn check_metric_invariants(
    label: &str,
    tree: &TaxonomyTree,
    params: &PromptParams,
    fixture_emb: &hiertune::EmbeddingTable,
    data: &hiertune::SampleSet,
    failures: &mut Vec<String>,
) {
    let full = metrics::evaluate(tree, params, fixture_emb, data, &DEFAULT_BETAS, 5, 0).unwrap();
    if full.hca > full.leaf_acc {
        failures.push(format!(
            "{label}: hca {} > leaf {}",
            full.hca, full.leaf_acc
        ));
    }
    let zero = metrics::mta(tree, params, fixture_emb, data, &[0.0], 5, 0).unwrap();
    if zero.mta != full.leaf_acc {
        failures.push(format!(
            "{label}: mta(beta=0) {} != leaf {}",
            zero.mta, full.leaf_acc
        ));
    }
    if tree.max_depth() == 1 && !(full.leaf_acc == full.hca && full.hca == full.mta.mta) {
        failures.push(format!(
            "{label}: depth-1 tree leaf {} hca {} mta {}",
            full.leaf_acc, full.hca, full.mta.mta
        ));
    }
}

#[test]
fn criterion_5_metric_invariants() {
    let mut failures = Vec::new();
    let mut fixtures = 0;
    for (leaves, depth, dim, noise, seed) in [
        (4, 2, 8, 0.0, 0),
        (4, 2, 8, 0.5, 1),
        (8, 1, 8, 0.4, 2),
        (6, 1, 6, 1.0, 3),
        (9, 2, 12, 0.7, 4),
        (16, 4, 16, 0.3, 5),
    ] {
        let f = gen_synth(&SynthConfig {
            leaves,
            depth,
            dim,
            per_leaf_train: 5,
            per_leaf_test: 20,
            noise,
            seed,
        })
        .unwrap();
        let params = PromptParams::identity(dim, 0.07).unwrap();
        let label = format!("fixture({leaves},{depth},{dim},{noise})");
        check_metric_invariants(&label, &f.tree, &params, &f.emb, &f.test, &mut failures);
        let (trained, _) = train(
            &TrainConfig {
                epochs: 5,
                batch_size: 8,
                ..TrainConfig::default()
            },
            &f.tree,
            &f.emb,
            &f.train,
        )
        .unwrap();
        check_metric_invariants(
            &format!("{label}+trained"),
            &f.tree,
            &trained,
            &f.emb,
            &f.test,
            &mut failures,
        );
        fixtures += 2;
    }
    let mut rng = Rng64::new(55);
    for i in 0..10 {
        let tree = random_tree(&mut rng, 30, 8);
        let emb = random_embeddings(&tree, 6, &mut rng);
        let data = random_samples(&tree, &emb, 40, 0.8, &mut rng);
        let params = PromptParams::identity(6, 0.07).unwrap();
        check_metric_invariants(
            &format!("random tree {i}"),
            &tree,
            &params,
            &emb,
            &data,
            &mut failures,
        );
        fixtures += 1;
    }
    let pass = failures.is_empty();
    report(
        5,
        pass,
        &format!("{fixtures} evaluations, {} violations", failures.len()),
    );
    assert!(pass, "{failures:?}");
}

#[test]
fn criterion_6_directional_desk_scale_replication() {
    let run = desk_run();
    let (a, b) = (&run.baseline, &run.protect);
    let hca_ok = b.hca >= a.hca + 0.05;
    let mta_ok = b.mta.mta >= a.mta.mta;
    let leaf_ok = b.leaf_acc >= a.leaf_acc - 0.02;
    let time_ok = run.elapsed < Duration::from_secs(300);
    let pass = hca_ok && mta_ok && leaf_ok && time_ok;
    report(
        6,
        pass,
        &format!(
            "baseline leaf {:.4} hca {:.4} mta {:.4} | protect leaf {:.4} hca {:.4} mta {:.4} | \
             hca+5pt {hca_ok} mta {mta_ok} leaf-2pt {leaf_ok} | {} test samples, {:?}",
            a.leaf_acc,
            a.hca,
            a.mta.mta,
            b.leaf_acc,
            b.hca,
            b.mta.mta,
            run.fixture.test.len(),
            run.elapsed
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_mta_not_below_leaf_after_training() {
    let run = desk_run();
    let b = &run.protect;
    let pass = b.mta.mta >= b.leaf_acc;
    report(
        7,
        pass,
        &format!("protect mta {:.4} vs leaf {:.4}", b.mta.mta, b.leaf_acc),
    );
    assert!(pass);
}

fn run_cli(args: &[&str]) {
    let spec = CommandSpec::try_parse_from(std::iter::once("hiertune").chain(args.iter().copied()))
        .unwrap();
    run(&spec).unwrap();
}

fn pipeline(dir: &Path) {
    let d = |name: &str| dir.join(name).display().to_string();
    run_cli(&[
        "gen-synth",
        "--out",
        &d("fx"),
        "--leaves",
        "9",
        "--depth",
        "2",
        "--dim",
        "12",
        "--per-leaf",
        "6",
        "--noise",
        "0.5",
        "--seed",
        "7",
    ]);
    run_cli(&[
        "train",
        "--tree",
        &d("fx/tree.tsv"),
        "--emb",
        &d("fx/emb.tsv"),
        "--samples",
        &d("fx/train.tsv"),
        "--out",
        &d("p.tsv"),
        "--epochs",
        "20",
        "--batch-size",
        "8",
        "--seed",
        "7",
    ]);
    run_cli(&[
        "eval",
        "--tree",
        &d("fx/tree.tsv"),
        "--emb",
        &d("fx/emb.tsv"),
        "--samples",
        &d("fx/test.tsv"),
        "--params",
        &d("p.tsv"),
        "--out",
        &d("report.tsv"),
        "--seed",
        "7",
    ]);
    run_cli(&[
        "sample-cuts",
        "--tree",
        &d("fx/tree.tsv"),
        "--beta",
        "0.5",
        "--count",
        "4",
        "--seed",
        "7",
        "--out",
        &d("cuts.tsv"),
    ]);
}

#[test]
fn criterion_8_determinism() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    pipeline(first.path());
    pipeline(second.path());
    let files = [
        "fx/tree.tsv",
        "fx/emb.tsv",
        "fx/train.tsv",
        "fx/test.tsv",
        "p.tsv",
        "p.tsv.log.tsv",
        "report.tsv",
        "report.tsv.cuts.tsv",
        "cuts.tsv",
    ];
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| {
            std::fs::read(first.path().join(f)).unwrap()
                != std::fs::read(second.path().join(f)).unwrap()
        })
        .collect();
    let pass = differing.is_empty();
    report(
        8,
        pass,
        &format!("{} files compared, differing: {differing:?}", files.len()),
    );
    assert!(pass);
}
