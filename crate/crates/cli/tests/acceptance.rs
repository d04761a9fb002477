//! Acceptance suite: one `PASS`/`FAIL` line per criterion.
//!
//! Criteria 7 and 8 need the Texas and Cora datasets in the dataset-directory
//! layout under `$EEGNN_DATA_DIR/{texas,cora}`. Without them those lines are
//! printed as `FAIL (unverified)` and do not affect the exit status; a
//! Texas-sized synthetic stand-in is reported on `INFO` lines instead. Every
//! other failure makes the run exit non-zero.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::Rng;

use eegnn::dist::{truncated_poisson, truncated_poisson_mean};
use eegnn::generate::{gnm, ls_slope, sparsity_bench, GenParams};
use eegnn::linalg::DenseMatrix;
use eegnn::mcmc::geweke::{run_geweke, GewekeConfig};
use eegnn::mcmc::hmc::LogDensity;
use eegnn::mcmc::{
    posterior_mean_multiplicity, run_chain, Chain, ChainConfig, ClusterMode, McmcState,
};
use eegnn::rng::stream_rng;
use eegnn::stats::{rolling_median, std_dev};
use eegnn::train::{
    self, loss_and_gradient, synthetic_dataset, Backbone, CsbmParams, Dataset, DmpgmSource,
    EdgeMode, SgcModel, TrainConfig,
};
use eegnn::{build_p_hat, build_p_tilde, SimpleGraph};

enum Verdict {
    Pass(String),
    Fail(String),
    /// Needs data that is not present.
    Unverified(String),
}

struct Tally {
    failed: usize,
    unverified: usize,
    passed: usize,
}

impl Tally {
    fn record(&mut self, id: u32, name: &str, secs: f64, v: Verdict) {
        let (tag, detail) = match &v {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => ("FAIL", d),
            Verdict::Unverified(d) => ("FAIL (unverified)", d),
        };
        println!("[{tag}] {id}. {name}: {detail} [{secs:.1}s]");
        match v {
            Verdict::Pass(_) => self.passed += 1,
            Verdict::Fail(_) => self.failed += 1,
            Verdict::Unverified(_) => self.unverified += 1,
        }
    }
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

// 1 ---------------------------------------------------------------------

fn geweke() -> Verdict {
    let cfg = GewekeConfig {
        num_nodes: 8,
        hyper: eegnn::mcmc::Hyper {
            alpha_dp: 1.0,
            kappa_mass: 4.0,
        },
        rounds: 10_000,
        seed: 2024,
        ..GewekeConfig::default()
    };
    match run_geweke(&cfg) {
        Err(e) => Verdict::Fail(e.to_string()),
        Ok(stats) => {
            let ok = stats.iter().all(|s| s.z_score().abs() < 3.0);
            let detail = stats
                .iter()
                .map(|s| format!("{} z={:+.2}", s.name, s.z_score()))
                .collect::<Vec<_>>()
                .join(", ");
            verdict(ok, format!("{detail} (|z| < 3 required)"))
        }
    }
}

// 2 ---------------------------------------------------------------------

fn hmc_gradient_error() -> f64 {
    let mut worst: f64 = 0.0;
    let mut rng = stream_rng(77, 0);
    for trial in 0..100u64 {
        let g = gnm(12 + (trial as usize % 10), 20, &mut rng).unwrap();
        let cfg = ChainConfig {
            seed: trial,
            cluster_mode: if trial % 2 == 0 {
                ClusterMode::Adaptive
            } else {
                ClusterMode::Fixed(3)
            },
            k_init: 3,
            ..ChainConfig::default()
        };
        let mut s = McmcState::init(&g, &cfg, &mut rng);
        for _ in 0..(trial % 5) {
            s.sweep(&mut rng, None);
        }
        let t = s.w0_target();
        let mut x: Vec<f64> = s.weights()[0].as_slice().iter().map(|v| v.ln()).collect();
        for v in x.iter_mut() {
            *v += rng.random_range(-0.5..0.5);
        }
        let mut grad = vec![0.0; t.dim()];
        t.gradient(&x, &mut grad);
        for i in 0..t.dim() {
            let h = 1e-5 * x[i].abs().max(1.0);
            let (mut up, mut dn) = (x.clone(), x.clone());
            up[i] += h;
            dn[i] -= h;
            let fd = (t.ln_density(&up) - t.ln_density(&dn)) / (2.0 * h);
            worst = worst.max((fd - grad[i]).abs() / grad[i].abs().max(1.0));
        }
    }
    worst
}

fn classifier_gradient_error() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = stream_rng(seed, 1);
        let g = gnm(6, 7, &mut rng).unwrap();
        let p = build_p_tilde(&g);
        let (n, m, c) = (6, 3, 3);
        let x = DenseMatrix::from_vec(
            n,
            m,
            (0..n * m).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let mut model = SgcModel::zeros(m, c, 1 + seed as usize % 4);
        for v in model.w.as_mut_slice().iter_mut().chain(model.b.iter_mut()) {
            *v = rng.random_range(-1.0..1.0);
        }
        let nodes = [0, 1, 3, 4];
        for backbone in [Backbone::Sgc, Backbone::Appnp] {
            let f = |md: &SgcModel| {
                loss_and_gradient(backbone, &p, &x, &y, &nodes, md, 5e-3, 0.2)
                    .unwrap()
                    .0
            };
            let (_, grad) =
                loss_and_gradient(backbone, &p, &x, &y, &nodes, &model, 5e-3, 0.2).unwrap();
            let h = 1e-5;
            let rel = |a: f64, fd: f64| (a - fd).abs() / a.abs().max(fd.abs()).max(1e-3);
            let nw = model.w.as_slice().len();
            for k in 0..nw + c {
                let (mut up, mut dn) = (model.clone(), model.clone());
                let analytic = if k < nw {
                    up.w.as_mut_slice()[k] += h;
                    dn.w.as_mut_slice()[k] -= h;
                    grad.w.as_slice()[k]
                } else {
                    up.b[k - nw] += h;
                    dn.b[k - nw] -= h;
                    grad.b[k - nw]
                };
                worst = worst.max(rel(analytic, (f(&up) - f(&dn)) / (2.0 * h)));
            }
        }
    }
    worst
}

fn gradients() -> Verdict {
    let hmc = hmc_gradient_error();
    let clf = classifier_gradient_error();
    verdict(
        hmc < 1e-5 && clf < 1e-5,
        format!("HMC max rel err {hmc:.2e} over 100 states, classifier {clf:.2e} over 20 instances x 2 backbones (< 1e-5)"),
    )
}

// 3 ---------------------------------------------------------------------

fn csbm(n: usize, seed: u64) -> Dataset {
    synthetic_dataset(
        "csbm",
        &CsbmParams {
            num_nodes: n,
            classes: 4,
            feature_dim: 8,
            p_in: 0.08,
            p_out: 0.01,
            signal: 1.0,
            seed,
        },
    )
    .unwrap()
}

fn degenerate_equivalence() -> Verdict {
    let d = csbm(120, 3);
    let unit = d.graph.to_multigraph(1);
    let diff = build_p_hat(&unit.to_weights())
        .matrix
        .to_dense()
        .max_abs_diff(&build_p_tilde(&d.graph).matrix.to_dense());
    let base = TrainConfig {
        layers: 32,
        max_epochs: 200,
        patience: 50,
        seeds: (0..4).collect(),
        ..TrainConfig::default()
    };
    let ee = TrainConfig {
        edge_mode: EdgeMode::EeSampled,
        ..base.clone()
    };
    let a = train::train(&d.graph, &d.features, &d.labels, None, &base, None).unwrap();
    let src = DmpgmSource::Snapshots(vec![unit; 3]);
    let b = train::train(&d.graph, &d.features, &d.labels, None, &ee, Some(&src)).unwrap();
    let bitwise = a
        .accuracies()
        .iter()
        .zip(b.accuracies())
        .all(|(x, y)| x.to_bits() == y.to_bits());
    verdict(
        diff <= 1e-12 && bitwise && a.results.len() == 4,
        format!("max |P_hat - P_tilde| = {diff:.1e}, EE accuracies bit-identical over 4 seeds at L=32: {bitwise}"),
    )
}

// 4 ---------------------------------------------------------------------

fn truncated_poisson_means() -> Verdict {
    let n = 1_000_000;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (i, lambda) in [0.1, 1.0, 10.0].into_iter().enumerate() {
        let mut rng = stream_rng(404, i as u64);
        let sum: u64 = (0..n)
            .map(|_| truncated_poisson(lambda, &mut rng).unwrap())
            .sum();
        let emp = sum as f64 / n as f64;
        let exact = truncated_poisson_mean(lambda);
        let rel = (emp / exact - 1.0).abs();
        worst = worst.max(rel);
        parts.push(format!("lambda={lambda}: {emp:.4} vs {exact:.4}"));
    }
    verdict(
        worst < 0.01,
        format!(
            "{} (max rel dev {:.3}% < 1%)",
            parts.join(", "),
            100.0 * worst
        ),
    )
}

// 5 ---------------------------------------------------------------------

fn sparsity() -> Verdict {
    let grid = [20.0, 40.0, 80.0, 160.0, 320.0];
    let mut slopes = Vec::new();
    for seed in 0..10 {
        let p = GenParams {
            alpha_dp: 1.0,
            kappa_mass: grid[0],
            k_gen: 10,
            num_nodes: 100_000,
            seed,
        };
        match sparsity_bench(&p, &grid, 5) {
            Ok(fit) => slopes.push(fit.slope),
            Err(e) => return Verdict::Fail(format!("seed {seed}: {e}")),
        }
    }
    let max = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
    let sd = std_dev(&slopes);
    verdict(
        max < 1.9 && sd < 0.1,
        format!("log|E| vs log|V| slope mean {mean:.3}, max {max:.3} (< 1.9), std {sd:.3} over 10 seeds (< 0.1)"),
    )
}

// 6 ---------------------------------------------------------------------

fn complexity() -> Verdict {
    let sizes = [1_000usize, 3_000, 10_000, 30_000, 100_000];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut parts = Vec::new();
    for (i, &m) in sizes.iter().enumerate() {
        let mut rng = stream_rng(606, i as u64);
        let g = gnm(m / 2, m, &mut rng).unwrap();
        let cfg = ChainConfig {
            cluster_mode: ClusterMode::Fixed(5),
            k_init: 5,
            epochs: 1_000,
            seed: i as u64,
            ..ChainConfig::default()
        };
        let mut chain = Chain::new(&g, &cfg).unwrap();
        for _ in 0..20 {
            chain.step().unwrap();
        }
        let mut times: Vec<f64> = (0..7)
            .map(|_| {
                let t = Instant::now();
                chain.step().unwrap();
                t.elapsed().as_secs_f64()
            })
            .collect();
        times.sort_by(f64::total_cmp);
        let med = times[times.len() / 2];
        xs.push((m as f64).ln());
        ys.push(med.ln());
        parts.push(format!("{m}:{:.1}ms", 1e3 * med));
    }
    let slope = ls_slope(&xs, &ys).unwrap();
    verdict(
        (slope - 1.0).abs() <= 0.2,
        format!(
            "per-epoch time slope {slope:.3} (1.0 +/- 0.2); {}",
            parts.join(" ")
        ),
    )
}

// 7 ---------------------------------------------------------------------

fn convergence_on(g: &SimpleGraph, epochs: usize, seed: u64) -> (bool, String) {
    let cfg = ChainConfig {
        epochs,
        seed,
        ..ChainConfig::default()
    };
    let out = match run_chain(g, &cfg) {
        Ok(o) => o,
        Err(e) => return (false, e.to_string()),
    };
    let lj: Vec<f64> = out.trace.epochs.iter().map(|e| e.log_joint).collect();
    let med = rolling_median(&lj, 500);
    let (end, start) = (med[epochs - 1], med[epochs - 1 - epochs / 4]);
    let change = ((end - start) / start.abs()).abs();
    let mean = posterior_mean_multiplicity(&out.trace).unwrap();
    let multi = g
        .edges()
        .iter()
        .filter(|&&(i, j)| mean.get(i, j) > 1.0)
        .count();
    let frac = multi as f64 / g.num_edges().max(1) as f64;
    (
        change < 1e-3 && frac > 0.3,
        format!(
            "window-500 median log joint change {:.4}% over last {} epochs (< 0.1%), {:.1}% of edges with mean multiplicity > 1 (> 30%)",
            100.0 * change,
            epochs / 4,
            100.0 * frac
        ),
    )
}

fn data_dir(name: &str) -> Option<PathBuf> {
    let root = std::env::var_os("EEGNN_DATA_DIR")?;
    let dir = Path::new(&root).join(name);
    dir.join(train::GRAPH_FILE).exists().then_some(dir)
}

/// Texas-sized heterophilous stand-in: 183 nodes, 5 classes, ~300 edges.
fn texas_proxy() -> Dataset {
    synthetic_dataset(
        "texas-proxy",
        &CsbmParams {
            num_nodes: 183,
            classes: 5,
            feature_dim: 32,
            p_in: 0.006,
            p_out: 0.021,
            signal: 1.5,
            seed: 183,
        },
    )
    .unwrap()
}

fn convergence() -> Verdict {
    match data_dir("texas") {
        Some(dir) => match Dataset::load(&dir) {
            Ok(d) => {
                let (ok, detail) = convergence_on(&d.graph, 20_000, 0);
                verdict(ok, format!("texas: {detail}"))
            }
            Err(e) => Verdict::Fail(format!("texas: {e}")),
        },
        None => {
            let (ok, detail) = convergence_on(&texas_proxy().graph, 20_000, 0);
            println!(
                "[INFO] 7. synthetic texas-sized proxy ({}): {detail}",
                if ok {
                    "meets thresholds"
                } else {
                    "misses thresholds"
                }
            );
            Verdict::Unverified("Texas dataset not found under $EEGNN_DATA_DIR/texas".into())
        }
    }
}

// 8 ---------------------------------------------------------------------

fn ee_delta(d: &Dataset, seeds: usize) -> eegnn::Result<(f64, f64, f64)> {
    let base = TrainConfig {
        layers: 32,
        seeds: (0..seeds as u64).collect(),
        ..TrainConfig::default()
    };
    let ee = TrainConfig {
        edge_mode: EdgeMode::EeSampled,
        ..base.clone()
    };
    let chain = ChainConfig {
        epochs: 2_000,
        ..ChainConfig::default()
    };
    let snaps = run_chain(&d.graph, &chain)?.trace.snapshot_multigraphs();
    let src = DmpgmSource::Snapshots(snaps);
    let mean = |v: Vec<f64>| 100.0 * v.iter().sum::<f64>() / v.len() as f64;
    let a = mean(
        train::train(
            &d.graph,
            &d.features,
            &d.labels,
            d.split.as_deref(),
            &base,
            None,
        )?
        .accuracies(),
    );
    let b = mean(
        train::train(
            &d.graph,
            &d.features,
            &d.labels,
            d.split.as_deref(),
            &ee,
            Some(&src),
        )?
        .accuracies(),
    );
    Ok((a, b, b - a))
}

fn ee_gain() -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    let mut missing = Vec::new();
    for (name, min_delta) in [("cora", 2.0), ("texas", 0.0)] {
        match data_dir(name) {
            None => missing.push(name),
            Some(dir) => {
                match Dataset::load(&dir).and_then(|d| ee_delta(&d, 10)) {
                    Ok((a, b, delta)) => {
                        ok &= delta >= min_delta;
                        parts.push(format!("{name}: SGC {a:.2}%, EE-SGC {b:.2}%, delta {delta:+.2} (>= {min_delta:+})"));
                    }
                    Err(e) => {
                        ok = false;
                        parts.push(format!("{name}: {e}"));
                    }
                }
            }
        }
    }
    if !missing.is_empty() {
        if let Ok((a, b, delta)) = ee_delta(&texas_proxy(), 10) {
            println!("[INFO] 8. synthetic texas-sized proxy at L=32: SGC {a:.2}%, EE-SGC {b:.2}%, delta {delta:+.2}");
        }
        parts.push(format!(
            "dataset(s) not found under $EEGNN_DATA_DIR: {}",
            missing.join(", ")
        ));
        return Verdict::Unverified(parts.join("; "));
    }
    verdict(ok, parts.join("; "))
}

// 9 ---------------------------------------------------------------------

fn eegnn(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_eegnn"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// All files under `dir`, with manifest `wall_secs` lines dropped.
fn snapshot_tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let mut bytes = std::fs::read(&p).unwrap();
                if p.file_name().unwrap() == "manifest.json" {
                    let text = String::from_utf8(bytes).unwrap();
                    bytes = text
                        .lines()
                        .filter(|l| !l.contains("\"wall_secs\""))
                        .collect::<Vec<_>>()
                        .join("\n")
                        .into_bytes();
                }
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), bytes));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Verdict {
    let root = std::env::temp_dir().join(format!("eegnn-accept-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&root);
    let ds = root.join("data");
    csbm(60, 9).save(&ds).unwrap();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let mut failures = Vec::new();
    let mut commands = 0;
    // Inputs always come from run `a`, so the two runs differ only in --out.
    let a = root.join("a");
    let inputs_of = |p: &[&str]| s(&p.iter().fold(a.clone(), |acc, c| acc.join(c)));
    let snaps = inputs_of(&["inf", "snapshots"]);
    let base_report = inputs_of(&["base", "report.csv"]);
    let ee_report = inputs_of(&["ee", "report.csv"]);
    let graph = s(&ds.join("graph.txt"));
    let data = s(&ds);
    for run in ["a", "b"] {
        let out = root.join(run);
        let o = |name: &str| s(&out.join(name));
        let steps: Vec<Vec<String>> = [
            vec![
                "generate",
                "--nodes",
                "50",
                "--kappa",
                "20",
                "--alpha",
                "1",
                "--seed",
                "7",
                "--out",
                &o("gen"),
            ],
            vec![
                "infer",
                "--graph",
                &graph,
                "--epochs",
                "60",
                "--seed",
                "3",
                "--out",
                &o("inf"),
            ],
            vec![
                "train",
                "--dataset",
                &data,
                "--layers",
                "4",
                "--seeds",
                "2",
                "--max-epochs",
                "50",
                "--patience",
                "20",
                "--out",
                &o("base"),
            ],
            vec![
                "train",
                "--dataset",
                &data,
                "--layers",
                "4",
                "--seeds",
                "2",
                "--max-epochs",
                "50",
                "--patience",
                "20",
                "--edge-mode",
                "ee_sampled",
                "--snapshots",
                &snaps,
                "--out",
                &o("ee"),
            ],
            vec!["report", &base_report, &ee_report, "--out", &o("report")],
        ]
        .into_iter()
        .map(|v| v.into_iter().map(String::from).collect())
        .collect();
        commands = steps.len();
        for st in &steps {
            let args: Vec<&str> = st.iter().map(String::as_str).collect();
            let r = eegnn(&args);
            if !r.status.success() {
                failures.push(format!(
                    "`{}` failed: {}",
                    st[0],
                    String::from_utf8_lossy(&r.stderr).trim()
                ));
            }
        }
    }
    for sub in ["gen", "inf", "base", "ee", "report"] {
        let a = snapshot_tree(&root.join("a").join(sub));
        let b = snapshot_tree(&root.join("b").join(sub));
        if a.is_empty() || a != b {
            failures.push(format!("{sub} outputs differ"));
        }
    }
    let _ = std::fs::remove_dir_all(&root);
    if failures.is_empty() {
        Verdict::Pass(format!("{commands} commands run twice, all outputs byte-identical (manifest wall time excluded)"))
    } else {
        Verdict::Fail(failures.join("; "))
    }
}

fn main() {
    // `cargo test -- --list` and filters are not meaningful here.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut tally = Tally {
        failed: 0,
        unverified: 0,
        passed: 0,
    };
    type Criterion = (u32, &'static str, fn() -> Verdict);
    let criteria: [Criterion; 9] = [
        (1, "Geweke joint-distribution test", geweke),
        (2, "gradient fidelity", gradients),
        (3, "degenerate equivalence", degenerate_equivalence),
        (4, "truncated Poisson sampler", truncated_poisson_means),
        (5, "empirical sparsity", sparsity),
        (6, "per-epoch complexity", complexity),
        (7, "convergence on Texas", convergence),
        (8, "edge-enhanced gain at L=32", ee_gain),
        (9, "CLI determinism", determinism),
    ];
    for (id, name, f) in criteria {
        let t = Instant::now();
        let v = f();
        tally.record(id, name, t.elapsed().as_secs_f64(), v);
    }
    println!(
        "acceptance: {} passed, {} failed, {} unverified (missing datasets)",
        tally.passed, tally.failed, tally.unverified
    );
    if tally.failed > 0 {
        std::process::exit(1);
    }
}
