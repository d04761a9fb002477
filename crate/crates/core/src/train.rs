//! Full-batch node classification with a linear predictor on top of a fixed
//! propagation operator, for the SGC and APPNP backbones and their
//! edge-enhanced variants.
//!
//! Both backbones compute `logits = F(P) (X W) + b`, where `F(P)` is `P^L`
//! for SGC and the truncated personalized-PageRank recursion for APPNP.
//! `F(P)` is symmetric whenever `P` is, so the gradient with respect to `XW`
//! is the same recursion applied to the logit residuals. Propagating `XW`
//! rather than `X` keeps the per-epoch cost at `O(L * nnz(P) * C)`, which is
//! what makes redrawing `P` every epoch affordable.

use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{MultiGraph, MultiplicityMap, SimpleGraph};
use crate::io::{self, Split};
use crate::linalg::DenseMatrix;
use crate::mcmc::{run_chain, Chain, ChainConfig};
use crate::propagation::{
    appnp_propagate, build_p_hat, build_p_tilde, propagate, PropagationMatrix,
};
use crate::report::{ReportRow, EE_PREFIX};
use crate::rng::stream_rng;

const SPLIT_STREAM: u64 = 0x5b1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backbone {
    Sgc,
    Appnp,
}

impl Backbone {
    pub fn name(&self) -> &'static str {
        match self {
            Backbone::Sgc => "sgc",
            Backbone::Appnp => "appnp",
        }
    }

    pub fn display(&self) -> &'static str {
        match self {
            Backbone::Sgc => "SGC",
            Backbone::Appnp => "APPNP",
        }
    }
}

impl FromStr for Backbone {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgc" => Ok(Backbone::Sgc),
            "appnp" => Ok(Backbone::Appnp),
            _ => Err(Error::Config(format!(
                "unknown backbone `{s}` (expected sgc|appnp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeMode {
    /// Self-loop-augmented observed graph.
    Baseline,
    /// A fresh multiplicity sample each epoch.
    EeSampled,
    /// Posterior-mean multiplicities, built once.
    EeMean,
}

impl EdgeMode {
    pub fn name(&self) -> &'static str {
        match self {
            EdgeMode::Baseline => "baseline",
            EdgeMode::EeSampled => "ee_sampled",
            EdgeMode::EeMean => "ee_mean",
        }
    }
}

impl FromStr for EdgeMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(EdgeMode::Baseline),
            "ee_sampled" => Ok(EdgeMode::EeSampled),
            "ee_mean" => Ok(EdgeMode::EeMean),
            _ => Err(Error::Config(format!(
                "unknown edge mode `{s}` (expected baseline|ee_sampled|ee_mean)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seeds: Vec<u64>,
    pub backbone: Backbone,
    pub edge_mode: EdgeMode,
    pub layers: usize,
    /// APPNP restart probability.
    pub teleport_alpha: f64,
    /// Train share of the random split used when no split is given.
    pub split_fraction: f64,
    /// Keep the per-epoch loss curve in the results.
    pub record_loss: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            weight_decay: 5e-4,
            max_epochs: 1000,
            patience: 100,
            seeds: (0..10).collect(),
            backbone: Backbone::Sgc,
            edge_mode: EdgeMode::Baseline,
            layers: 2,
            teleport_alpha: 0.1,
            split_fraction: 0.6,
            record_loss: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            ));
        }
        if self.patience > self.max_epochs {
            return bad(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            ));
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.backbone == Backbone::Appnp
            && !(self.teleport_alpha > 0.0 && self.teleport_alpha < 1.0)
        {
            return bad(format!(
                "teleport_alpha must lie in (0, 1), got {}",
                self.teleport_alpha
            ));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad(format!(
                "split_fraction must lie in (0, 1), got {}",
                self.split_fraction
            ));
        }
        Ok(())
    }

    /// Report name, e.g. `SGC`, `EE-APPNP` or `EE-SGC(mean)`.
    pub fn model_name(&self) -> String {
        let b = self.backbone.display();
        match self.edge_mode {
            EdgeMode::Baseline => b.to_string(),
            EdgeMode::EeSampled => format!("{EE_PREFIX}{b}"),
            EdgeMode::EeMean => format!("{EE_PREFIX}{b}(mean)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgcModel {
    /// `m x C`.
    pub w: DenseMatrix,
    pub b: Vec<f64>,
    pub layers: usize,
}

impl SgcModel {
    pub fn zeros(features: usize, classes: usize, layers: usize) -> Self {
        Self {
            w: DenseMatrix::zeros(features, classes),
            b: vec![0.0; classes],
            layers,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.b.len()
    }

    fn is_finite(&self) -> bool {
        self.w
            .as_slice()
            .iter()
            .chain(&self.b)
            .all(|v| v.is_finite())
    }
}

/// Linear backbone applied to `H`; `F(P) H`.
fn apply(
    backbone: Backbone,
    p: &PropagationMatrix,
    h: &DenseMatrix,
    layers: usize,
    alpha: f64,
) -> Result<DenseMatrix> {
    match backbone {
        Backbone::Sgc => propagate(p, h, layers),
        Backbone::Appnp => appnp_propagate(p, h, alpha, layers),
    }
}

/// `P^L X W + b`, computed as `P^L (X W) + b`.
pub fn sgc_forward(
    p: &PropagationMatrix,
    x: &DenseMatrix,
    model: &SgcModel,
) -> Result<DenseMatrix> {
    forward(Backbone::Sgc, p, x, model, 0.1)
}

pub fn forward(
    backbone: Backbone,
    p: &PropagationMatrix,
    x: &DenseMatrix,
    model: &SgcModel,
    teleport_alpha: f64,
) -> Result<DenseMatrix> {
    if x.rows() != p.dim() {
        return Err(Error::Dimension(format!(
            "{} feature rows for a {}-node operator",
            x.rows(),
            p.dim()
        )));
    }
    let mut logits = apply(
        backbone,
        p,
        &x.matmul(&model.w)?,
        model.layers,
        teleport_alpha,
    )?;
    for r in 0..logits.rows() {
        for (o, b) in logits.row_mut(r).iter_mut().zip(&model.b) {
            *o += b;
        }
    }
    Ok(logits)
}

/// Mean cross-entropy over `nodes` and its logit residuals
/// `(softmax - onehot) / |nodes|` (zero rows elsewhere).
fn cross_entropy(logits: &DenseMatrix, y: &[usize], nodes: &[usize]) -> (f64, DenseMatrix) {
    let c = logits.cols();
    let scale = 1.0 / nodes.len() as f64;
    let mut resid = DenseMatrix::zeros(logits.rows(), c);
    let mut loss = 0.0;
    for &i in nodes {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let lse = max + z.ln();
        loss += lse - row[y[i]];
        let r = resid.row_mut(i);
        for (k, o) in r.iter_mut().enumerate() {
            *o = scale * ((row[k] - lse).exp() - if k == y[i] { 1.0 } else { 0.0 });
        }
    }
    (loss * scale, resid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w: DenseMatrix,
    pub b: Vec<f64>,
}

/// Regularized training loss `CE + (wd/2) ||W||^2` and its gradient.
pub fn loss_and_gradient(
    backbone: Backbone,
    p: &PropagationMatrix,
    x: &DenseMatrix,
    y: &[usize],
    nodes: &[usize],
    model: &SgcModel,
    weight_decay: f64,
    teleport_alpha: f64,
) -> Result<(f64, Gradient)> {
    if nodes.is_empty() {
        return Err(Error::EmptyMask);
    }
    let logits = forward(backbone, p, x, model, teleport_alpha)?;
    let (ce, resid) = cross_entropy(&logits, y, nodes);
    let mut gb = vec![0.0; model.num_classes()];
    for &i in nodes {
        for (g, r) in gb.iter_mut().zip(resid.row(i)) {
            *g += r;
        }
    }
    let back = apply(backbone, p, &resid, model.layers, teleport_alpha)?;
    let mut gw = x.transpose_matmul(&back)?;
    let mut penalty = 0.0;
    for (g, &w) in gw.as_mut_slice().iter_mut().zip(model.w.as_slice()) {
        *g += weight_decay * w;
        penalty += w * w;
    }
    Ok((ce + 0.5 * weight_decay * penalty, Gradient { w: gw, b: gb }))
}

/// Fraction of masked nodes whose arg-max logit (first on ties) is the label.
pub fn evaluate_accuracy(logits: &DenseMatrix, y: &[usize], mask: &[bool]) -> Result<f64> {
    if y.len() != logits.rows() || mask.len() != logits.rows() {
        return Err(Error::Dimension(format!(
            "{} logit rows, {} labels, {} mask entries",
            logits.rows(),
            y.len(),
            mask.len()
        )));
    }
    let (mut hit, mut total) = (0usize, 0usize);
    for i in (0..y.len()).filter(|&i| mask[i]) {
        let row = logits.row(i);
        let pred = (0..row.len()).fold(0, |best, k| if row[k] > row[best] { k } else { best });
        hit += usize::from(pred == y[i]);
        total += 1;
    }
    if total == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(hit as f64 / total as f64)
}

/// Train/test split with `round(fraction * n)` training nodes; a pure
/// function of its arguments.
pub fn random_split(num_nodes: usize, seed: u64, fraction: f64) -> Vec<Split> {
    let mut order: Vec<usize> = (0..num_nodes).collect();
    order.shuffle(&mut stream_rng(seed, SPLIT_STREAM));
    let n_train = (fraction * num_nodes as f64).round() as usize;
    let mut split = vec![Split::Test; num_nodes];
    for &i in &order[..n_train] {
        split[i] = Split::Train;
    }
    split
}

/// Where edge-enhanced operators come from.
#[derive(Debug, Clone)]
pub enum DmpgmSource {
    /// Thinned sampler snapshots, cycled in order for `ee_sampled` and
    /// averaged for `ee_mean`.
    Snapshots(Vec<MultiGraph>),
    /// Posterior-mean multiplicities (`ee_mean` only).
    Mean(MultiplicityMap),
    /// One sampler sweep per training epoch, seeded per training seed
    /// (`ee_sampled` only; meant for small graphs).
    LiveChain(ChainConfig),
}

/// Element-wise mean of snapshot multiplicities.
pub fn mean_multiplicity(snapshots: &[MultiGraph]) -> Result<MultiplicityMap> {
    let first = snapshots.first().ok_or(Error::EmptyTrace)?;
    let mut sum = MultiplicityMap::new(first.num_nodes());
    for s in snapshots {
        for ((i, j), m) in s.iter() {
            sum.set(i, j, sum.get(i, j) + m as f64);
        }
    }
    Ok(sum.scaled(1.0 / snapshots.len() as f64))
}

enum Operators<'a> {
    Fixed(&'a PropagationMatrix),
    Cycle(&'a [PropagationMatrix]),
    Live(Box<Chain>),
}

impl Operators<'_> {
    fn next(&mut self, epoch: usize) -> Result<PropagationMatrix> {
        Ok(match self {
            Operators::Fixed(p) => (*p).clone(),
            Operators::Cycle(ps) => ps[epoch % ps.len()].clone(),
            Operators::Live(chain) => {
                chain.step()?;
                build_p_hat(&chain.state.multigraph().to_weights())
            }
        })
    }
}

enum Prepared {
    Fixed(PropagationMatrix),
    Cycle(Vec<PropagationMatrix>),
    Live(ChainConfig),
}

fn prepare(g: &SimpleGraph, cfg: &TrainConfig, source: Option<&DmpgmSource>) -> Result<Prepared> {
    let n = g.num_nodes();
    let check = |m: usize| {
        if m == n {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "multigraph has {m} nodes, graph has {n}"
            )))
        }
    };
    match (cfg.edge_mode, source) {
        (EdgeMode::Baseline, None) => Ok(Prepared::Fixed(build_p_tilde(g))),
        (EdgeMode::Baseline, Some(_)) => Err(Error::Config(
            "baseline training takes no multigraph source".into(),
        )),
        (mode, None) => Err(Error::MissingArtifact(format!(
            "edge mode {} needs a multigraph source",
            mode.name()
        ))),
        (EdgeMode::EeSampled, Some(DmpgmSource::Snapshots(s))) => {
            if s.is_empty() {
                return Err(Error::EmptyTrace);
            }
            s.iter().try_for_each(|m| check(m.num_nodes()))?;
            Ok(Prepared::Cycle(
                s.iter().map(|m| build_p_hat(&m.to_weights())).collect(),
            ))
        }
        (EdgeMode::EeSampled, Some(DmpgmSource::LiveChain(c))) => Ok(Prepared::Live(c.clone())),
        (EdgeMode::EeMean, Some(DmpgmSource::Snapshots(s))) => {
            let mean = mean_multiplicity(s)?;
            check(mean.num_nodes())?;
            Ok(Prepared::Fixed(build_p_hat(&mean)))
        }
        (EdgeMode::EeMean, Some(DmpgmSource::Mean(m))) => {
            check(m.num_nodes())?;
            Ok(Prepared::Fixed(build_p_hat(m)))
        }
        (mode, Some(_)) => Err(Error::Config(format!(
            "edge mode {} cannot use this multigraph source",
            mode.name()
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub model: SgcModel,
    pub test_accuracy: f64,
    pub epochs_run: usize,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_loss: f64,
    /// Per-epoch training loss when `record_loss` is set.
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub results: Vec<SeedResult>,
    /// Seeds that hit a non-finite loss, with the diagnostic.
    pub aborted: Vec<(u64, String)>,
}

impl TrainOutcome {
    pub fn accuracies(&self) -> Vec<f64> {
        self.results.iter().map(|r| r.test_accuracy).collect()
    }
}

/// Trains every seed in parallel. A split of `None` means a fresh
/// `split_fraction` random split per seed. Nodes marked `Val` drive early
/// stopping when present; otherwise the training loss does.
pub fn train(
    g: &SimpleGraph,
    x: &DenseMatrix,
    y: &[usize],
    split: Option<&[Split]>,
    cfg: &TrainConfig,
    source: Option<&DmpgmSource>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n = g.num_nodes();
    if x.rows() != n || y.len() != n || split.is_some_and(|s| s.len() != n) {
        return Err(Error::Dimension(format!(
            "graph has {n} nodes; features {}, labels {}, split {}",
            x.rows(),
            y.len(),
            split.map_or(n, |s| s.len())
        )));
    }
    let prepared = prepare(g, cfg, source)?;
    let per_seed: Vec<(u64, Result<SeedResult>)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| (seed, train_seed(g, x, y, split, cfg, &prepared, seed)))
        .collect();
    let mut out = TrainOutcome {
        results: Vec::new(),
        aborted: Vec::new(),
    };
    for (seed, r) in per_seed {
        match r {
            Ok(r) => out.results.push(r),
            Err(e @ Error::Numerical { .. }) => {
                log::warn!("seed {seed} aborted: {e}");
                out.aborted.push((seed, e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn train_seed(
    g: &SimpleGraph,
    x: &DenseMatrix,
    y: &[usize],
    split: Option<&[Split]>,
    cfg: &TrainConfig,
    prepared: &Prepared,
    seed: u64,
) -> Result<SeedResult> {
    let own_split;
    let split = match split {
        Some(s) => s,
        None => {
            own_split = random_split(g.num_nodes(), seed, cfg.split_fraction);
            &own_split
        }
    };
    let select =
        |want: Split| -> Vec<usize> { (0..split.len()).filter(|&i| split[i] == want).collect() };
    let (train_nodes, val_nodes) = (select(Split::Train), select(Split::Val));
    let test_mask: Vec<bool> = split.iter().map(|&s| s == Split::Test).collect();
    if train_nodes.is_empty() {
        return Err(Error::EmptyMask);
    }
    let classes = y.iter().max().map_or(1, |&c| c + 1);
    if let Some(&bad) = y.iter().find(|&&c| c >= classes) {
        return Err(Error::Domain(format!("label {bad} out of range")));
    }

    let mut ops = match prepared {
        Prepared::Fixed(p) => Operators::Fixed(p),
        Prepared::Cycle(ps) => Operators::Cycle(ps),
        Prepared::Live(c) => {
            let c = ChainConfig { seed, ..c.clone() };
            Operators::Live(Box::new(Chain::new(g, &c)?))
        }
    };

    let mut model = SgcModel::zeros(x.cols(), classes, cfg.layers);
    let mut best = (
        f64::INFINITY,
        model.clone(),
        0usize,
        None::<PropagationMatrix>,
    );
    let mut since_best = 0;
    let mut losses = Vec::new();
    let mut last_good = None;
    let mut epochs_run = 0;
    for epoch in 0..cfg.max_epochs {
        let p = ops.next(epoch)?;
        let (loss, grad) = loss_and_gradient(
            cfg.backbone,
            &p,
            x,
            y,
            &train_nodes,
            &model,
            cfg.weight_decay,
            cfg.teleport_alpha,
        )?;
        if !loss.is_finite() {
            return Err(Error::Numerical {
                epoch,
                last_good,
                msg: format!("training loss is {loss} (seed {seed})"),
            });
        }
        let monitor = if val_nodes.is_empty() {
            loss
        } else {
            let logits = forward(cfg.backbone, &p, x, &model, cfg.teleport_alpha)?;
            cross_entropy(&logits, y, &val_nodes).0
        };
        if cfg.record_loss {
            losses.push(loss);
        }
        last_good = Some(epoch);
        epochs_run = epoch + 1;
        if monitor < best.0 {
            best = (monitor, model.clone(), epoch, Some(p));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
        for (w, g) in model.w.as_mut_slice().iter_mut().zip(grad.w.as_slice()) {
            *w -= cfg.lr * g;
        }
        for (b, g) in model.b.iter_mut().zip(&grad.b) {
            *b -= cfg.lr * g;
        }
        if !model.is_finite() {
            return Err(Error::Numerical {
                epoch,
                last_good,
                msg: format!("parameters became non-finite (seed {seed})"),
            });
        }
    }

    let (best_loss, model, best_epoch, p) = best;
    // Evaluate with the operator the kept parameters were scored under.
    let p = match p {
        Some(p) => p,
        None => ops.next(0)?,
    };
    let logits = forward(cfg.backbone, &p, x, &model, cfg.teleport_alpha)?;
    let test_accuracy = evaluate_accuracy(&logits, y, &test_mask)?;
    Ok(SeedResult {
        seed,
        model,
        test_accuracy,
        epochs_run,
        best_epoch,
        best_loss,
        losses,
    })
}

/// A node-classification dataset held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graph: SimpleGraph,
    pub features: DenseMatrix,
    pub labels: Vec<usize>,
    pub split: Option<Vec<Split>>,
}

pub const GRAPH_FILE: &str = "graph.txt";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const SPLIT_FILE: &str = "split.csv";

impl Dataset {
    /// Reads `graph.txt`, `features.csv`, `labels.csv` and, if present,
    /// `split.csv` from `dir`. Features are row-normalized.
    pub fn load(dir: &Path) -> Result<Self> {
        let graph = io::load_simple_graph(&dir.join(GRAPH_FILE))?;
        let n = graph.num_nodes();
        let mut features = io::parse_features(&io::read_to_string(&dir.join(FEATURES_FILE))?, n)?;
        features.row_normalize();
        let labels = io::parse_labels(&io::read_to_string(&dir.join(LABELS_FILE))?, n)?;
        let split_path = dir.join(SPLIT_FILE);
        let split = if split_path.exists() {
            Some(io::parse_split(&io::read_to_string(&split_path)?, n)?)
        } else {
            None
        };
        let name = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into());
        Ok(Self {
            name,
            graph,
            features,
            labels,
            split,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        io::save_simple_graph(&dir.join(GRAPH_FILE), &self.graph)?;
        io::write_string(
            &dir.join(FEATURES_FILE),
            &io::write_features(&self.features),
        )?;
        io::write_string(&dir.join(LABELS_FILE), &io::write_labels(&self.labels))?;
        if let Some(s) = &self.split {
            io::write_string(&dir.join(SPLIT_FILE), &io::write_split(s))?;
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |&c| c + 1)
    }
}

/// Parameters of a contextual stochastic block model: planted classes,
/// Bernoulli edges with within/between-class probabilities, and Gaussian
/// features around per-class means.
#[derive(Debug, Clone, PartialEq)]
pub struct CsbmParams {
    pub num_nodes: usize,
    pub classes: usize,
    pub feature_dim: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Distance of class means from the origin, in noise standard deviations.
    pub signal: f64,
    pub seed: u64,
}

pub fn synthetic_dataset(name: &str, p: &CsbmParams) -> Result<Dataset> {
    if p.classes == 0 || p.feature_dim == 0 {
        return Err(Error::Domain(
            "need at least one class and one feature".into(),
        ));
    }
    for (k, v) in [("p_in", p.p_in), ("p_out", p.p_out)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("{k} must lie in [0, 1], got {v}")));
        }
    }
    use rand::Rng;
    let mut rng = stream_rng(p.seed, 0);
    let labels: Vec<usize> = (0..p.num_nodes).map(|i| i % p.classes).collect();
    let means: Vec<Vec<f64>> = (0..p.classes)
        .map(|_| {
            let v: Vec<f64> = (0..p.feature_dim)
                .map(|_| crate::dist::standard_normal(&mut rng))
                .collect();
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
            v.into_iter().map(|a| p.signal * a / norm).collect()
        })
        .collect();
    let mut features = DenseMatrix::zeros(p.num_nodes, p.feature_dim);
    for i in 0..p.num_nodes {
        for (o, mu) in features.row_mut(i).iter_mut().zip(&means[labels[i]]) {
            *o = mu + crate::dist::standard_normal(&mut rng);
        }
    }
    let mut edges = Vec::new();
    for i in 0..p.num_nodes {
        for j in i + 1..p.num_nodes {
            let q = if labels[i] == labels[j] {
                p.p_in
            } else {
                p.p_out
            };
            if rng.random::<f64>() < q {
                edges.push((i, j));
            }
        }
    }
    Ok(Dataset {
        name: name.to_string(),
        graph: SimpleGraph::from_edges(p.num_nodes, edges)?,
        features,
        labels,
        split: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOutput {
    pub rows: Vec<ReportRow>,
    /// `(dataset, model, seed, diagnostic)` for every aborted seed.
    pub aborted: Vec<(String, String, u64, String)>,
    /// Wall-clock seconds per dataset, sampler included.
    pub wall_secs: Vec<(String, f64)>,
}

/// Datasets under `dataset_dir`: the directory itself if it holds a graph
/// file, otherwise each subdirectory that does, in name order.
pub fn discover_datasets(dataset_dir: &Path) -> Result<Vec<Dataset>> {
    if dataset_dir.join(GRAPH_FILE).exists() {
        return Ok(vec![Dataset::load(dataset_dir)?]);
    }
    let mut dirs: Vec<_> = std::fs::read_dir(dataset_dir)
        .map_err(|e| Error::io(dataset_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(GRAPH_FILE).exists())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::MissingArtifact(format!(
            "no {GRAPH_FILE} under {}",
            dataset_dir.display()
        )));
    }
    dirs.iter().map(|d| Dataset::load(d)).collect()
}

/// Trains every configuration on every dataset. Edge-enhanced entries share
/// one sampler run per dataset, configured by `chain`.
pub fn run_benchmark(
    datasets: &[Dataset],
    grid: &[TrainConfig],
    chain: &ChainConfig,
) -> Result<BenchmarkOutput> {
    let mut out = BenchmarkOutput {
        rows: Vec::new(),
        aborted: Vec::new(),
        wall_secs: Vec::new(),
    };
    for d in datasets {
        let start = Instant::now();
        let needs_chain = grid.iter().any(|c| c.edge_mode != EdgeMode::Baseline);
        let source = if needs_chain {
            let trace = run_chain(&d.graph, chain)?.trace;
            Some(DmpgmSource::Snapshots(trace.snapshot_multigraphs()))
        } else {
            None
        };
        for cfg in grid {
            let src = (cfg.edge_mode != EdgeMode::Baseline)
                .then_some(())
                .and(source.as_ref());
            let outcome = train(
                &d.graph,
                &d.features,
                &d.labels,
                d.split.as_deref(),
                cfg,
                src,
            )?;
            let name = cfg.model_name();
            for (seed, msg) in &outcome.aborted {
                out.aborted
                    .push((d.name.clone(), name.clone(), *seed, msg.clone()));
            }
            out.rows.push(ReportRow::from_accuracies(
                &name,
                &d.name,
                cfg.layers,
                &outcome.accuracies(),
            ));
        }
        out.wall_secs
            .push((d.name.clone(), start.elapsed().as_secs_f64()));
    }
    Ok(out)
}
