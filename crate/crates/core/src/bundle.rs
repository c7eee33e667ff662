//! Checkpoint directory: a manifest plus one checkpoint file per network.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::nnet::checkpoint;
use crate::policy::TwoBranchPolicy;
use crate::values::ValueNets;

pub const MANIFEST: &str = "manifest.txt";

/// Where an output came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct Bundle {
    pub policy: TwoBranchPolicy,
    pub values: Option<ValueNets>,
    pub provenance: Provenance,
    /// Manifest entries beyond the ones this module manages.
    pub extra: BTreeMap<String, String>,
}

fn parse_manifest(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: "expected key = value".into(),
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn save_bundle(
    dir: &Path,
    policy: &TwoBranchPolicy,
    values: Option<&ValueNets>,
    provenance: &Provenance,
    extra: &BTreeMap<String, String>,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut manifest = String::from("# pdvn checkpoint bundle\nformat = 1\n");
    manifest += &format!("config_hash = {}\nseed = {}\ntop_k = {}\n", provenance.config_hash, provenance.seed, policy.k());
    checkpoint::save(policy.reference(), &dir.join("reference.ckpt"))?;
    checkpoint::save(policy.learnable(), &dir.join("learnable.ckpt"))?;
    if let Some(values) = values {
        for (name, net) in values.nets() {
            let file = format!("{name}.ckpt");
            checkpoint::save(net, &dir.join(&file))?;
            manifest += &format!("{name} = {file}\n");
        }
    }
    for (k, v) in extra {
        manifest += &format!("{k} = {v}\n");
    }
    fs::write(dir.join(MANIFEST), manifest)?;
    Ok(())
}

pub fn load_bundle(dir: &Path) -> Result<Bundle> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
    let mut entries = parse_manifest(&text)?;
    let mut take = |k: &str| entries.remove(k);
    if take("format").as_deref() != Some("1") {
        return Err(Error::Checkpoint("unsupported bundle format".into()));
    }
    let config_hash = take("config_hash").ok_or_else(|| Error::Checkpoint("manifest lacks config_hash".into()))?;
    let seed = take("seed")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Checkpoint("manifest lacks a numeric seed".into()))?;
    let k = take("top_k")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Checkpoint("manifest lacks top_k".into()))?;
    let load = |file: &str| checkpoint::load(&dir.join(file));
    let reference = load("reference.ckpt")?;
    let learnable = load("learnable.ckpt")?;
    let policy = TwoBranchPolicy::with_learnable(Arc::new(reference), learnable, k)?;
    let mut net = |name: &str| -> Result<Option<_>> {
        match take(name) {
            Some(file) => Ok(Some(load(&file)?)),
            None => Ok(None),
        }
    };
    let (syn, cost, single) = (net("syn")?, net("cost")?, net("single")?);
    let values = if syn.is_none() && cost.is_none() && single.is_none() {
        None
    } else {
        Some(ValueNets::from_nets(syn, cost, single)?)
    };
    Ok(Bundle {
        policy,
        values,
        provenance: Provenance { config_hash, seed },
        extra: entries,
    })
}
