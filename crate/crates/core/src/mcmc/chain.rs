use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::SimpleGraph;
use crate::rng::stream_rng;

use super::state::McmcState;
use super::trace::{ChainTrace, EpochStats, Snapshot};
use super::ChainConfig;

/// A single chain advanced one epoch at a time.
#[derive(Debug, Clone)]
pub struct Chain {
    pub state: McmcState,
    cfg: ChainConfig,
    rng: ChaCha8Rng,
    epoch: usize,
    last_good: Option<usize>,
}

impl Chain {
    pub fn new(g: &SimpleGraph, cfg: &ChainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = stream_rng(cfg.seed, 0);
        let state = McmcState::init(g, cfg, &mut rng);
        Ok(Self {
            state,
            cfg: cfg.clone(),
            rng,
            epoch: 0,
            last_good: None,
        })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn config(&self) -> &ChainConfig {
        &self.cfg
    }

    /// Runs one sweep; fails if the log joint stops being finite.
    pub fn step(&mut self) -> Result<EpochStats> {
        let adapt =
            (self.cfg.adapt && self.epoch < self.cfg.burn_in_epochs()).then_some(self.epoch);
        let stats = self.state.sweep(&mut self.rng, adapt);
        if self.state.underflows > 0 {
            log::warn!(
                "epoch {}: {} edge rate(s) underflowed; multiplicity forced to 1",
                self.epoch,
                self.state.underflows
            );
            self.state.underflows = 0;
        }
        let log_joint = self.state.log_joint();
        if !log_joint.is_finite() {
            return Err(Error::Numerical {
                epoch: self.epoch,
                last_good: self.last_good,
                msg: format!("log joint is {log_joint}"),
            });
        }
        let n = self.state.num_nodes().max(1) as f64;
        let out = EpochStats {
            epoch: self.epoch,
            log_joint,
            k: self.state.num_clusters(),
            hmc_accept: stats.hmc_accept,
            mh_accept: stats.mh_accept,
            mult_per_node: 2.0 * self.state.total_multiplicity() as f64 / n,
        };
        self.last_good = Some(self.epoch);
        self.epoch += 1;
        Ok(out)
    }

    pub fn snapshot(&self, epoch: usize) -> Snapshot {
        let s = &self.state;
        Snapshot {
            epoch,
            z: (0..s.edges().len())
                .map(|e| s.edge_multiplicity(e))
                .collect(),
            z_self: (0..s.num_nodes()).map(|i| s.self_multiplicity(i)).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub trace: ChainTrace,
    pub state: McmcState,
}

/// Runs `cfg.epochs` epochs, keeping every `thin`-th post-burn-in snapshot.
pub fn run_chain(g: &SimpleGraph, cfg: &ChainConfig) -> Result<ChainOutput> {
    let mut chain = Chain::new(g, cfg)?;
    let burn_in = cfg.burn_in_epochs();
    let mut trace = ChainTrace {
        num_nodes: g.num_nodes(),
        edges: g.edges().to_vec(),
        epochs: Vec::with_capacity(cfg.epochs),
        snapshots: Vec::new(),
        burn_in,
        thin: cfg.thin,
    };
    for e in 0..cfg.epochs {
        trace.epochs.push(chain.step()?);
        if e >= burn_in && (e - burn_in).is_multiple_of(cfg.thin) {
            trace.snapshots.push(chain.snapshot(e));
        }
    }
    Ok(ChainOutput {
        trace,
        state: chain.state,
    })
}
