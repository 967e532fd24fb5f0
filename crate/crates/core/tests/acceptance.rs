//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Criteria 6 and 7 train full-size models on MNIST (roughly an hour and a
//! half on one core). The files are looked up in `$LGAE_DATA_DIR`, then in
//! `data/mnist` at the workspace root; if they are missing those criteria
//! fail with a message saying so.

use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use lgae::cli::{cmd_eval, cmd_gradcheck, cmd_train, DatasetKind, TrainConfig};
use lgae::liegroup::{
    diag_exp_map, diag_exp_map_jacobian, diag_log_map, exp_map, geodesic_distance, group_inv,
    group_mul, log_map, matrix_exp, matrix_log, DiagGaussian, TangentDiag, Utdat,
};
use lgae::linalg::DenseMatrix;
use lgae::models::{ModelVariant, RepresentationKind};
use lgae::nn::Rng;

const SEEDS: [u64; 3] = [1, 2, 3];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn rel_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.max_abs_diff(b) / (1.0 + b.max_abs())
}

fn random_diag(rng: &mut Rng, k: usize) -> DiagGaussian {
    let mu = (0..k).map(|_| rng.uniform_range(-10.0, 10.0)).collect();
    let sigma = (0..k).map(|_| rng.uniform_range(0.1, 10.0)).collect();
    DiagGaussian::new(mu, sigma).unwrap()
}

fn random_utdat(rng: &mut Rng, n: usize) -> Utdat {
    random_utdat_scaled(rng, n, 2.0)
}

/// Diagonal entries log-uniform in `[1/spread, spread]`.
fn random_utdat_scaled(rng: &mut Rng, n: usize, spread: f64) -> Utdat {
    let u = DenseMatrix::from_fn(n, n, |i, j| {
        if i == j {
            rng.uniform_range(-spread.ln(), spread.ln()).exp()
        } else if i < j {
            rng.uniform_range(-1.0, 1.0)
        } else {
            0.0
        }
    });
    let mu = (0..n).map(|_| rng.uniform_range(-3.0, 3.0)).collect();
    Utdat::new(u, mu).unwrap()
}

fn diag_corpus() -> Vec<DiagGaussian> {
    let mut rng = Rng::new(2024);
    [1, 2, 5, 10]
        .iter()
        .flat_map(|&k| {
            (0..1000)
                .map(|_| random_diag(&mut rng, k))
                .collect::<Vec<_>>()
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let mut worst_log = 0.0f64;
    let mut worst_exp = 0.0f64;
    for q in diag_corpus() {
        let t = diag_log_map(&q);
        let g = q.to_utdat().to_matrix();
        let general_log = match matrix_log(&g) {
            Ok(l) => l,
            Err(e) => return outcome(false, format!("matrix_log failed: {e}")),
        };
        worst_log = worst_log.max(t.to_tangent_matrix().to_matrix().max_abs_diff(&general_log));
        let general_exp = matrix_exp(&t.to_tangent_matrix().to_matrix());
        worst_exp = worst_exp.max(
            diag_exp_map(&t)
                .to_utdat()
                .to_matrix()
                .max_abs_diff(&general_exp),
        );
    }
    let worst = worst_log.max(worst_exp);
    outcome(
        worst < 1e-10,
        format!("4000 Gaussians, max abs error log {worst_log:.2e}, exp {worst_exp:.2e} (< 1e-10)"),
    )
}

fn criterion_2() -> Outcome {
    let mut diag_worst = 0.0f64;
    for q in diag_corpus() {
        let back = diag_exp_map(&diag_log_map(&q));
        for (a, b) in back
            .mu
            .iter()
            .zip(&q.mu)
            .chain(back.sigma.iter().zip(&q.sigma))
        {
            diag_worst = diag_worst.max((a - b).abs() / (1.0 + b.abs()));
        }
        let t = diag_log_map(&q);
        let again = diag_log_map(&diag_exp_map(&t));
        for (a, b) in again
            .phi
            .iter()
            .zip(&t.phi)
            .chain(again.theta.iter().zip(&t.theta))
        {
            diag_worst = diag_worst.max((a - b).abs() / (1.0 + b.abs()));
        }
    }
    let mut rng = Rng::new(77);
    let mut full_worst = 0.0f64;
    let mut cases = 0;
    for n in 1..=8 {
        for _ in 0..125 {
            let g = random_utdat_scaled(&mut rng, n, 10.0);
            let base = random_utdat_scaled(&mut rng, n, 10.0);
            let (t, back) =
                match log_map(&g, &base).and_then(|t| Ok((t.clone(), exp_map(&t, &base)?))) {
                    Ok(v) => v,
                    Err(e) => return outcome(false, format!("n={n}: {e}")),
                };
            full_worst = full_worst.max(rel_diff(&back.to_matrix(), &g.to_matrix()));
            let t2 = log_map(&back, &base).unwrap();
            full_worst = full_worst.max(rel_diff(&t2.to_matrix(), &t.to_matrix()));
            cases += 1;
        }
    }
    let worst = diag_worst.max(full_worst);
    outcome(
        worst < 1e-9,
        format!(
            "diagonal corpus {diag_worst:.2e}, {cases} full UTDATs n<=8 {full_worst:.2e} (< 1e-9 relative)"
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut worst = 0.0f64;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
    for &theta in &[-7.5, -1.0, 0.3, 2.0, 10.0] {
        for &phi in &[1e-9, -1e-9, 0.0] {
            let t = TangentDiag::new(vec![phi], vec![theta]).unwrap();
            let q = diag_exp_map(&t);
            let j = diag_exp_map_jacobian(&t);
            worst = worst
                .max(rel(q.mu[0], theta))
                .max(rel(j.dmu_dtheta[0], 1.0))
                .max(rel(j.dmu_dphi[0], theta / 2.0));
        }
    }
    outcome(
        worst < 1e-6,
        format!("max relative deviation from the phi = 0 limit {worst:.2e} (< 1e-6)"),
    )
}

fn criterion_4() -> Outcome {
    match cmd_gradcheck(false) {
        Ok(r) => {
            let parts: Vec<String> = r
                .entries
                .iter()
                .map(|e| format!("{} {:.2e}", e.variant, e.report.max_rel_error))
                .collect();
            let negative = cmd_gradcheck(true).map(|c| !c.passed()).unwrap_or(false);
            outcome(
                r.passed() && negative,
                format!(
                    "max relative error {} (< 1e-4); corrupted gradient rejected: {negative}",
                    parts.join(", ")
                ),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn criterion_5() -> Outcome {
    const CASES: usize = 1000;
    let mut rng = Rng::new(555);
    let mut worst = [0.0f64; 5];
    for c in 0..CASES {
        let n = 1 + c % 5;
        let a = random_utdat(&mut rng, n);
        let b = random_utdat(&mut rng, n);
        let g = random_utdat(&mut rng, n);
        let ab = group_mul(&a, &b).unwrap();
        let closed = ab.u().is_upper_triangular() && ab.u().diag().iter().all(|&d| d > 0.0);
        let dense = a.to_matrix().matmul(&b.to_matrix());
        worst[0] = worst[0].max(if closed {
            rel_diff(&ab.to_matrix(), &dense)
        } else {
            f64::INFINITY
        });
        let left = group_mul(&ab, &g).unwrap();
        let right = group_mul(&a, &group_mul(&b, &g).unwrap()).unwrap();
        worst[1] = worst[1].max(rel_diff(&left.to_matrix(), &right.to_matrix()));
        let id = Utdat::identity(n).to_matrix();
        worst[2] = worst[2].max(rel_diff(
            &group_mul(&a, &group_inv(&a)).unwrap().to_matrix(),
            &id,
        ));
        worst[2] = worst[2].max(rel_diff(
            &group_mul(&group_inv(&a), &a).unwrap().to_matrix(),
            &id,
        ));
        let d_ab = geodesic_distance(&a, &b).unwrap();
        let d_ba = geodesic_distance(&b, &a).unwrap();
        worst[3] = worst[3].max((d_ab - d_ba).abs() / (1.0 + d_ab));
        let d_g =
            geodesic_distance(&group_mul(&g, &a).unwrap(), &group_mul(&g, &b).unwrap()).unwrap();
        worst[4] = worst[4].max((d_ab - d_g).abs() / (1.0 + d_ab));
    }
    let names = [
        "closure",
        "associativity",
        "inverse",
        "symmetry",
        "left invariance",
    ];
    let detail: Vec<String> = names
        .iter()
        .zip(&worst)
        .map(|(n, w)| format!("{n} {w:.1e}"))
        .collect();
    outcome(
        worst.iter().all(|&w| w < 1e-9),
        format!("{CASES} cases each: {} (< 1e-9)", detail.join(", ")),
    )
}

fn mnist_dir() -> Option<PathBuf> {
    let candidates = [
        std::env::var_os("LGAE_DATA_DIR").map(PathBuf::from),
        Some(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")),
    ];
    candidates.into_iter().flatten().find(|d| {
        d.join("train-images-idx3-ubyte").exists() && d.join("t10k-images-idx3-ubyte").exists()
    })
}

fn run_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR"))
        .join("acceptance")
        .join(name)
}

fn mnist_config(variant: ModelVariant, seed: u64, data: &Path) -> TrainConfig {
    TrainConfig {
        variant,
        k: 10,
        epochs: 30,
        seed,
        data_dir: Some(data.to_path_buf()),
        out_dir: Some(run_dir(&format!("mnist-{variant}-seed{seed}"))),
        ..TrainConfig::default()
    }
}

fn criterion_6() -> Outcome {
    let Some(data) = mnist_dir() else {
        return outcome(
            false,
            "MNIST files not found (run scripts/fetch_mnist.sh or set LGAE_DATA_DIR)",
        );
    };
    let mut means = Vec::new();
    let mut lines = Vec::new();
    for variant in [ModelVariant::Vae, ModelVariant::LgaeKl] {
        let mut train_sum = 0.0;
        let mut per_seed = Vec::new();
        for seed in SEEDS {
            let start = Instant::now();
            let run = match cmd_train(&mnist_config(variant, seed, &data), None, &mut io::sink()) {
                Ok(r) => r,
                Err(e) => return outcome(false, format!("{variant} seed {seed}: {e}")),
            };
            let last = *run.curve.last().expect("30 epochs");
            eprintln!(
                "  [6] {variant} seed {seed}: epoch 30 train {:.3} test {:.3} ({:.0}s)",
                last.train_total,
                last.test_total,
                start.elapsed().as_secs_f64()
            );
            train_sum += last.train_total;
            per_seed.push(format!("{:.2}/{:.2}", last.train_total, last.test_total));
        }
        let mean = train_sum / SEEDS.len() as f64;
        means.push(mean);
        lines.push(format!(
            "{variant} mean {mean:.3} [train/test {}]",
            per_seed.join(", ")
        ));
    }
    outcome(
        means[1] <= means[0],
        format!(
            "epoch-30 train loss: {}; need lgae_kl <= vae",
            lines.join("; ")
        ),
    )
}

fn criterion_7() -> Outcome {
    let Some(data) = mnist_dir() else {
        return outcome(
            false,
            "MNIST files not found (run scripts/fetch_mnist.sh or set LGAE_DATA_DIR)",
        );
    };
    let mut above_70 = 0;
    let mut beats_mu = 0;
    let mut per_seed = Vec::new();
    for seed in SEEDS {
        let start = Instant::now();
        let run = match cmd_train(
            &mnist_config(ModelVariant::Lgae, seed, &data),
            None,
            &mut io::sink(),
        ) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("seed {seed}: {e}")),
        };
        let acc = |kind| cmd_eval(&run.checkpoint_path, kind, Some(&data)).map(|r| r.accuracy);
        let (g, mu) = match (
            acc(RepresentationKind::LieAlgebra),
            acc(RepresentationKind::Mu),
        ) {
            (Ok(g), Ok(mu)) => (g, mu),
            (Err(e), _) | (_, Err(e)) => return outcome(false, format!("seed {seed}: {e}")),
        };
        eprintln!(
            "  [7] lgae seed {seed}: lie_algebra {g:.2}%  mu {mu:.2}% ({:.0}s)",
            start.elapsed().as_secs_f64()
        );
        above_70 += usize::from(g >= 70.0);
        beats_mu += usize::from(g >= mu);
        per_seed.push(format!("seed {seed}: g {g:.2}% mu {mu:.2}%"));
    }
    outcome(
        above_70 == SEEDS.len() && beats_mu >= 2,
        format!(
            "{}; lie_algebra >= 70% in {above_70}/3, >= mu in {beats_mu}/3",
            per_seed.join(", ")
        ),
    )
}

fn blob_config(variant: ModelVariant, seed: u64, epochs: usize, name: &str) -> TrainConfig {
    TrainConfig {
        variant,
        epochs,
        seed,
        dataset: DatasetKind::Blobs,
        blob_n: 512,
        out_dir: Some(run_dir(name)),
        ..TrainConfig::default()
    }
}

fn criterion_8() -> Outcome {
    let mut checked = 0;
    for variant in ModelVariant::ALL {
        let mut outputs = Vec::new();
        for copy in ["a", "b"] {
            let c = blob_config(variant, 42, 5, &format!("determinism-{variant}-{copy}"));
            let run = match cmd_train(&c, None, &mut io::sink()) {
                Ok(r) => r,
                Err(e) => return outcome(false, e.to_string()),
            };
            let read = |p: &Path| std::fs::read(p).unwrap_or_default();
            outputs.push((read(&run.csv_path), read(&run.checkpoint_path)));
        }
        if outputs[0] != outputs[1] || outputs[0].0.is_empty() {
            return outcome(
                false,
                format!("{variant}: outputs differ between identical runs"),
            );
        }
        checked += 1;
    }
    outcome(
        true,
        format!("loss.csv and checkpoint.json byte-identical for {checked} variants"),
    )
}

fn criterion_9() -> Outcome {
    let mut failures = Vec::new();
    let mut ratios = Vec::new();
    for variant in ModelVariant::ALL {
        for seed in SEEDS {
            let c = blob_config(variant, seed, 50, &format!("blobs-{variant}-seed{seed}"));
            let run = match cmd_train(&c, None, &mut io::sink()) {
                Ok(r) => r,
                Err(e) => return outcome(false, e.to_string()),
            };
            let rows = run.curve.rows();
            let (first, last) = (rows[0].train_total, rows[49].train_total);
            ratios.push(last / first);
            if !(last < first) {
                failures.push(format!("{variant} seed {seed}: {first:.3} -> {last:.3}"));
            }
        }
    }
    let worst = ratios.iter().cloned().fold(0.0f64, f64::max);
    if failures.is_empty() {
        outcome(
            true,
            format!("9 runs, largest epoch50/epoch1 loss ratio {worst:.3}"),
        )
    } else {
        outcome(false, failures.join("; "))
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 oracle equivalence of diagonal closed forms", criterion_1),
        ("2 exp/log round trips", criterion_2),
        ("3 removable singularity at phi = 0", criterion_3),
        ("4 gradient check of all variants", criterion_4),
        ("5 group and metric properties", criterion_5),
        ("6 loss curves: lgae_kl vs vae on MNIST", criterion_6),
        ("7 nearest-centroid accuracy on MNIST", criterion_7),
        ("8 determinism of training outputs", criterion_8),
        ("9 loss decrease on synthetic blobs", criterion_9),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, run) in criteria {
        let id = name.split(' ').next().unwrap_or_default();
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let start = Instant::now();
        let r = run();
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!(
            "criterion {name}: {status} ({:.1}s) {}",
            start.elapsed().as_secs_f64(),
            r.detail
        );
        failed += usize::from(!r.passed);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
