//! Resolution of `key = value` settings: built-in defaults, then the config
//! file, then command-line flags.

use eegnn::config::KeyValues;
use eegnn::generate::GenParams;
use eegnn::train::TrainConfig;
use eegnn::{Error, Result};

/// Config key -> command-line flag, for error messages.
const FLAGS: &[(&str, &str)] = &[
    ("alpha_dp", "--alpha"),
    ("kappa_mass", "--kappa"),
    ("num_nodes", "--nodes"),
    ("k_gen", "--k-gen"),
    ("epochs", "--epochs"),
    ("burn_in_frac", "--burn-in"),
    ("thin", "--thin"),
    ("k_init", "--k-init"),
    ("k_max", "--k-max"),
    ("hmc_step", "--hmc-step"),
    ("hmc_leapfrog", "--leapfrog"),
    ("mh_scale", "--mh-scale"),
    ("cluster_mode", "--cluster-mode"),
    ("w0_prior", "--w0-prior"),
    ("lr", "--lr"),
    ("weight_decay", "--weight-decay"),
    ("max_epochs", "--max-epochs"),
    ("patience", "--patience"),
    ("num_seeds", "--seeds"),
    ("backbone", "--backbone"),
    ("edge_mode", "--edge-mode"),
    ("layers", "--layers"),
    ("teleport_alpha", "--teleport-alpha"),
    ("split_fraction", "--split-fraction"),
    ("seed", "--seed"),
];

/// Rewrites config key names in a message as the flags that set them.
pub fn name_flags(msg: &str) -> String {
    let mut out = msg.to_string();
    for (key, flag) in FLAGS {
        if out.contains(key) {
            out = out.replace(key, &format!("{flag} ({key})"));
            break;
        }
    }
    out
}

/// `defaults`, overlaid with `file`, overlaid with `flags`.
pub fn resolve(defaults: KeyValues, file: Option<&KeyValues>, flags: &KeyValues) -> KeyValues {
    let mut kv = defaults;
    if let Some(f) = file {
        kv.overlay(f);
    }
    kv.overlay(flags);
    kv
}

fn required<T: std::str::FromStr>(kv: &KeyValues, key: &str) -> Result<T> {
    kv.get(key)?
        .ok_or_else(|| Error::Config(format!("{key} is not set")))
}

pub const GEN_KEYS: &[&str] = &["alpha_dp", "kappa_mass", "k_gen", "num_nodes", "seed"];

pub fn gen_defaults() -> KeyValues {
    let mut kv = KeyValues::default();
    kv.set("alpha_dp", 1.0);
    kv.set("kappa_mass", 10.0);
    kv.set("k_gen", 10);
    kv.set("num_nodes", 100);
    kv.set("seed", 0);
    kv
}

pub fn gen_params(kv: &KeyValues) -> Result<GenParams> {
    kv.check_known(GEN_KEYS)?;
    let p = GenParams {
        alpha_dp: required(kv, "alpha_dp")?,
        kappa_mass: required(kv, "kappa_mass")?,
        k_gen: required(kv, "k_gen")?,
        num_nodes: required(kv, "num_nodes")?,
        seed: required(kv, "seed")?,
    };
    p.validate()?;
    Ok(p)
}

pub const TRAIN_KEYS: &[&str] = &[
    "lr",
    "weight_decay",
    "max_epochs",
    "patience",
    "num_seeds",
    "seed",
    "backbone",
    "edge_mode",
    "layers",
    "teleport_alpha",
    "split_fraction",
];

pub fn train_defaults() -> KeyValues {
    let d = TrainConfig::default();
    let mut kv = KeyValues::default();
    kv.set("lr", d.lr);
    kv.set("weight_decay", d.weight_decay);
    kv.set("max_epochs", d.max_epochs);
    kv.set("patience", d.patience);
    kv.set("num_seeds", d.seeds.len());
    kv.set("seed", 0);
    kv.set("backbone", d.backbone.name());
    kv.set("edge_mode", d.edge_mode.name());
    kv.set("layers", d.layers);
    kv.set("teleport_alpha", d.teleport_alpha);
    kv.set("split_fraction", d.split_fraction);
    kv
}

/// Seeds are `seed, seed + 1, ..., seed + num_seeds - 1`.
pub fn train_config(kv: &KeyValues) -> Result<TrainConfig> {
    kv.check_known(TRAIN_KEYS)?;
    let base: u64 = required(kv, "seed")?;
    let count: u64 = required(kv, "num_seeds")?;
    let backbone: String = required(kv, "backbone")?;
    let edge_mode: String = required(kv, "edge_mode")?;
    let cfg = TrainConfig {
        lr: required(kv, "lr")?,
        weight_decay: required(kv, "weight_decay")?,
        max_epochs: required(kv, "max_epochs")?,
        patience: required(kv, "patience")?,
        seeds: (base..base + count).collect(),
        backbone: backbone.parse()?,
        edge_mode: edge_mode.parse()?,
        layers: required(kv, "layers")?,
        teleport_alpha: required(kv, "teleport_alpha")?,
        split_fraction: required(kv, "split_fraction")?,
        record_loss: false,
    };
    cfg.validate()?;
    Ok(cfg)
}
