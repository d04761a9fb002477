//! `eegnn`: generate graphs from the mixture model, infer latent
//! multigraphs, train edge-enhanced classifiers and merge reports.
//!
//! Exit codes: 0 success, 2 usage or configuration, 3 I/O or malformed
//! input, 4 numerical abort, 5 missing artifact, 1 anything else.

mod manifest;
mod settings;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use eegnn::config::KeyValues;
use eegnn::generate::generate_multigraph;
use eegnn::graph::collapse;
use eegnn::io;
use eegnn::mcmc::{self, histogram, posterior_mean_multiplicity, trace_csv, ChainConfig};
use eegnn::report::{self, ReportRow};
use eegnn::rng::stream_rng;
use eegnn::train::{self, Dataset, DmpgmSource, EdgeMode};
use eegnn::{build_p_hat, Error};

use manifest::RunManifest;

#[derive(Parser, Debug)]
#[command(
    name = "eegnn",
    version,
    about = "Latent multigraph inference and edge-enhanced GNN training"
)]
struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// `key = value` file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a multigraph and its collapsed simple graph.
    Generate(GenerateArgs),
    /// Run the sampler on an observed graph.
    Infer(InferArgs),
    /// Train a classifier on a dataset directory.
    Train(TrainArgs),
    /// Merge report CSVs and add edge-enhanced deltas.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    kappa: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Explicit clusters before the remainder.
    #[arg(long)]
    k_gen: Option<usize>,
}

#[derive(Args, Debug)]
struct InferArgs {
    /// Edge list (`nodes N` header, then `i j` lines).
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    kappa: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long)]
    k_init: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// Burn-in as a fraction of the epochs.
    #[arg(long)]
    burn_in: Option<f64>,
    /// adaptive | fixed
    #[arg(long)]
    cluster_mode: Option<String>,
    #[arg(long)]
    hmc_step: Option<f64>,
    #[arg(long)]
    leapfrog: Option<usize>,
    #[arg(long)]
    mh_scale: Option<f64>,
    /// finite | levy
    #[arg(long)]
    w0_prior: Option<String>,
    /// Bins of the expected-multiplicity histogram.
    #[arg(long, default_value_t = 20)]
    hist_bins: usize,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Directory with graph.txt, features.csv, labels.csv and optional split.csv.
    #[arg(long)]
    dataset: PathBuf,
    /// sgc | appnp
    #[arg(long)]
    backbone: Option<String>,
    #[arg(long)]
    layers: Option<usize>,
    /// baseline | ee_sampled | ee_mean
    #[arg(long)]
    edge_mode: Option<String>,
    /// Snapshot archive written by `infer`.
    #[arg(long)]
    snapshots: Option<PathBuf>,
    /// Run one sampler sweep per training epoch instead of reading snapshots
    /// (ee_sampled only; small graphs).
    #[arg(long)]
    live_chain: bool,
    /// Number of seeds, starting at --seed.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    teleport_alpha: Option<f64>,
    #[arg(long)]
    split_fraction: Option<f64>,
    /// Write per-epoch training loss for every seed.
    #[arg(long)]
    log_loss: bool,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Report CSVs written by `train`.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Domain(_) => 2,
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::Validation { .. }
        | Error::Index { .. }
        | Error::Dimension(_)
        | Error::Schema(_) => 3,
        Error::Numerical { .. } => 4,
        Error::MissingArtifact(_) | Error::EmptyTrace => 5,
        Error::DegenerateFit(_) | Error::EmptyMask => 1,
    }
}

fn describe(e: &Error) -> String {
    match e {
        Error::Config(_) | Error::Domain(_) => settings::name_flags(&e.to_string()),
        Error::Numerical { last_good, .. } => match last_good {
            Some(g) => format!("{e} (last good epoch {g})"),
            None => format!("{e} (no epoch completed)"),
        },
        _ => e.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = ["warn", "info", "debug", "trace"][usize::from(cli.verbose.min(3))];
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: &Cli) -> eegnn::Result<()> {
    let file = match &cli.config {
        Some(p) => Some(
            KeyValues::parse(&io::read_to_string(p)?)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        ),
        None => None,
    };
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::Io {
        path: cli.out.clone(),
        source: e,
    })?;
    let start = Instant::now();
    let mut manifest = match &cli.command {
        Command::Generate(a) => cmd_generate(cli, a, file.as_ref())?,
        Command::Infer(a) => cmd_infer(cli, a, file.as_ref())?,
        Command::Train(a) => cmd_train(cli, a, file.as_ref())?,
        Command::Report(a) => cmd_report(cli, a)?,
    };
    if let Some(p) = &cli.config {
        manifest.add_input(p)?;
    }
    manifest.wall_secs = start.elapsed().as_secs_f64();
    manifest.write(&cli.out)
}

/// Flags that were given, as config key-values.
fn flag_kv(pairs: &[(&str, Option<String>)]) -> KeyValues {
    let mut kv = KeyValues::default();
    for (k, v) in pairs {
        if let Some(v) = v {
            kv.set(k, v);
        }
    }
    kv
}

fn s<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(T::to_string)
}

fn write_output(
    out: &Path,
    manifest: &mut RunManifest,
    name: &str,
    text: &str,
) -> eegnn::Result<()> {
    io::write_string(&out.join(name), text)?;
    manifest.add_output(out, name)
}

fn cmd_generate(
    cli: &Cli,
    a: &GenerateArgs,
    file: Option<&KeyValues>,
) -> eegnn::Result<RunManifest> {
    let flags = flag_kv(&[
        ("num_nodes", s(&a.nodes)),
        ("kappa_mass", s(&a.kappa)),
        ("alpha_dp", s(&a.alpha)),
        ("k_gen", s(&a.k_gen)),
        ("seed", s(&cli.seed)),
    ]);
    let kv = settings::resolve(settings::gen_defaults(), file, &flags);
    let p = settings::gen_params(&kv)?;
    let mut rng = stream_rng(p.seed, 0);
    let out = generate_multigraph(&p, &mut rng);
    let g = collapse(&out.multigraph);

    let mut m = RunManifest::new("generate", &kv, p.seed);
    write_output(
        &cli.out,
        &mut m,
        "multigraph.txt",
        &io::write_multigraph(&out.multigraph),
    )?;
    write_output(&cli.out, &mut m, "graph.txt", &io::write_edge_list(&g))?;
    m.notes
        .insert("total_edge_draws".into(), out.total_edges.to_string());
    m.notes
        .insert("slack_edge_draws".into(), out.slack_edges.to_string());
    m.notes
        .insert("observed_edges".into(), g.num_edges().to_string());
    m.notes
        .insert("active_nodes".into(), g.num_active_nodes().to_string());
    log::info!(
        "generated {} edges over {} active nodes",
        g.num_edges(),
        g.num_active_nodes()
    );
    Ok(m)
}

fn cmd_infer(cli: &Cli, a: &InferArgs, file: Option<&KeyValues>) -> eegnn::Result<RunManifest> {
    let flags = flag_kv(&[
        ("epochs", s(&a.epochs)),
        ("kappa_mass", s(&a.kappa)),
        ("alpha_dp", s(&a.alpha)),
        ("k_init", s(&a.k_init)),
        ("k_max", s(&a.k_max)),
        ("thin", s(&a.thin)),
        ("burn_in_frac", s(&a.burn_in)),
        ("cluster_mode", a.cluster_mode.clone()),
        ("hmc_step", s(&a.hmc_step)),
        ("hmc_leapfrog", s(&a.leapfrog)),
        ("mh_scale", s(&a.mh_scale)),
        ("w0_prior", a.w0_prior.clone()),
        ("seed", s(&cli.seed)),
    ]);
    let kv = settings::resolve(ChainConfig::default().to_kv(), file, &flags);
    let cfg = ChainConfig::from_kv(&kv)?;
    if a.hist_bins == 0 {
        return Err(Error::Config("--hist-bins must be at least 1".into()));
    }
    let g = io::load_simple_graph(&a.graph)?;
    let out = mcmc::run_chain(&g, &cfg)?;
    let trace = out.trace;

    let mut m = RunManifest::new("infer", &kv, cfg.seed);
    m.add_input(&a.graph)?;
    write_output(&cli.out, &mut m, "trace.csv", &trace_csv(&trace))?;

    let snaps: Vec<_> = trace
        .snapshots
        .iter()
        .zip(trace.snapshot_multigraphs())
        .map(|(s, mg)| (s.epoch, mg))
        .collect();
    let snap_dir = cli.out.join("snapshots");
    for name in io::save_snapshot_archive(&snap_dir, &snaps)? {
        m.add_output(&cli.out, &format!("snapshots/{name}"))?;
    }

    let mean = posterior_mean_multiplicity(&trace)?;
    write_output(
        &cli.out,
        &mut m,
        "posterior_mean.txt",
        &io::write_multiplicity_map(&mean),
    )?;
    write_output(
        &cli.out,
        &mut m,
        "p_hat_triplets.txt",
        &io::write_triplets(&build_p_hat(&mean).matrix),
    )?;

    // expected multiplicity of each observed edge
    let values: Vec<f64> = g.edges().iter().map(|&(i, j)| mean.get(i, j)).collect();
    let hi = values.iter().copied().fold(2.0, f64::max).ceil();
    let mut hist = String::from("bin_lo,bin_hi,count\n");
    for (lo, hi, c) in histogram(&values, 1.0, hi, a.hist_bins) {
        writeln!(hist, "{lo},{hi},{c}").unwrap();
    }
    write_output(&cli.out, &mut m, "multiplicity_hist.csv", &hist)?;

    let above = values.iter().filter(|&&v| v > 1.0).count();
    m.notes
        .insert("snapshots".into(), trace.snapshots.len().to_string());
    m.notes.insert(
        "edges_with_mean_multiplicity_above_1".into(),
        format!("{above}/{}", values.len()),
    );
    Ok(m)
}

fn cmd_train(cli: &Cli, a: &TrainArgs, file: Option<&KeyValues>) -> eegnn::Result<RunManifest> {
    let flags = flag_kv(&[
        ("backbone", a.backbone.clone()),
        ("layers", s(&a.layers)),
        ("edge_mode", a.edge_mode.clone()),
        ("num_seeds", s(&a.seeds)),
        ("lr", s(&a.lr)),
        ("weight_decay", s(&a.weight_decay)),
        ("max_epochs", s(&a.max_epochs)),
        ("patience", s(&a.patience)),
        ("teleport_alpha", s(&a.teleport_alpha)),
        ("split_fraction", s(&a.split_fraction)),
        ("seed", s(&cli.seed)),
    ]);
    let kv = settings::resolve(settings::train_defaults(), file, &flags);
    let mut cfg = settings::train_config(&kv)?;
    cfg.record_loss = a.log_loss;

    let mut m = RunManifest::new("train", &kv, cfg.seeds[0]);
    let source = match (cfg.edge_mode, &a.snapshots, a.live_chain) {
        (EdgeMode::Baseline, None, false) => None,
        (EdgeMode::Baseline, _, _) => {
            return Err(Error::Config(
                "--snapshots and --live-chain need an edge-enhanced --edge-mode".into(),
            ))
        }
        (_, Some(_), true) => {
            return Err(Error::Config(
                "--snapshots and --live-chain are exclusive".into(),
            ))
        }
        (_, None, true) => Some(DmpgmSource::LiveChain(ChainConfig::default())),
        (mode, None, false) => {
            return Err(Error::MissingArtifact(format!(
                "--edge-mode {} needs --snapshots (or --live-chain)",
                mode.name()
            )))
        }
        (_, Some(dir), false) => {
            let snaps = io::load_snapshot_archive(dir)?;
            m.add_input(&dir.join(io::SNAPSHOT_INDEX))?;
            Some(DmpgmSource::Snapshots(
                snaps.into_iter().map(|(_, mg)| mg).collect(),
            ))
        }
    };

    let d = Dataset::load(&a.dataset)?;
    for f in [
        train::GRAPH_FILE,
        train::FEATURES_FILE,
        train::LABELS_FILE,
        train::SPLIT_FILE,
    ] {
        let p = a.dataset.join(f);
        if p.exists() {
            m.add_input(&p)?;
        }
    }
    let outcome = train::train(
        &d.graph,
        &d.features,
        &d.labels,
        d.split.as_deref(),
        &cfg,
        source.as_ref(),
    )?;
    if outcome.results.is_empty() {
        let (seed, msg) = &outcome.aborted[0];
        return Err(Error::Numerical {
            epoch: 0,
            last_good: None,
            msg: format!("every seed aborted; seed {seed}: {msg}"),
        });
    }

    let row = ReportRow::from_accuracies(
        &cfg.model_name(),
        &d.name,
        cfg.layers,
        &outcome.accuracies(),
    );
    write_output(
        &cli.out,
        &mut m,
        "report.csv",
        &report::write_report(&[row]),
    )?;
    let mut seeds = String::from("seed,test_accuracy,epochs_run,best_epoch,best_loss\n");
    for r in &outcome.results {
        writeln!(
            seeds,
            "{},{},{},{},{}",
            r.seed, r.test_accuracy, r.epochs_run, r.best_epoch, r.best_loss
        )
        .unwrap();
    }
    write_output(&cli.out, &mut m, "seeds.csv", &seeds)?;
    if !outcome.aborted.is_empty() {
        let mut ab = String::from("seed,message\n");
        for (seed, msg) in &outcome.aborted {
            writeln!(ab, "{seed},\"{}\"", msg.replace('"', "'")).unwrap();
        }
        write_output(&cli.out, &mut m, "aborted.csv", &ab)?;
    }
    if a.log_loss {
        for r in &outcome.results {
            let mut text = String::from("epoch,loss\n");
            for (e, l) in r.losses.iter().enumerate() {
                writeln!(text, "{e},{l}").unwrap();
            }
            write_output(
                &cli.out,
                &mut m,
                &format!("loss_seed_{}.csv", r.seed),
                &text,
            )?;
        }
    }
    m.notes
        .insert("seeds_requested".into(), cfg.seeds.len().to_string());
    m.notes
        .insert("seeds_reported".into(), outcome.results.len().to_string());
    m.notes
        .insert("live_chain".into(), a.live_chain.to_string());
    Ok(m)
}

fn cmd_report(cli: &Cli, a: &ReportArgs) -> eegnn::Result<RunManifest> {
    let mut inputs = Vec::new();
    let mut m = RunManifest::new("report", &KeyValues::default(), cli.seed.unwrap_or(0));
    for p in &a.reports {
        let rows = report::parse_report(&io::read_to_string(p)?)
            .map_err(|e| Error::Schema(format!("{}: {e}", p.display())))?;
        m.add_input(p)?;
        inputs.push((p.display().to_string(), rows));
    }
    let merged = report::merge_reports(&inputs)?;
    write_output(
        &cli.out,
        &mut m,
        "merged.csv",
        &report::write_merged(&merged),
    )?;
    let rows: Vec<ReportRow> = merged.into_iter().map(|r| r.row).collect();
    write_output(&cli.out, &mut m, "table.csv", &report::wide_table(&rows))?;
    Ok(m)
}
