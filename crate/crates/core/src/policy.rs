//! Two-branch single-step policy and supervised pretraining of the reference
//! branch.
//!
//! The frozen reference network picks which templates are realistic for a
//! molecule (its top-k that actually apply); the learnable network only
//! redistributes probability inside that set.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nnet::{self, masked_softmax, Head, Loss, Mlp, Trainable};
use crate::route::{Expansion, Molecule, RouteTree, TemplateId};
use crate::world::{Fingerprint, WorldSpec, FINGERPRINT_BITS};

pub const DEFAULT_TOP_K: usize = 50;

#[derive(Clone, Debug)]
pub struct TwoBranchPolicy {
    reference: Arc<Mlp>,
    learnable: Mlp,
    k: usize,
}

impl TwoBranchPolicy {
    /// Both branches start from `reference`.
    pub fn new(reference: Mlp, k: usize) -> Result<Self> {
        let learnable = reference.clone();
        Self::with_learnable(Arc::new(reference), learnable, k)
    }

    pub fn with_learnable(reference: Arc<Mlp>, learnable: Mlp, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Parameter("top-k must be positive".into()));
        }
        if reference.head() != Head::Logits
            || learnable.head() != Head::Logits
            || reference.input_dim() != learnable.input_dim()
            || reference.output_dim() != learnable.output_dim()
        {
            return Err(Error::Dimension("policy branches must be matching logit networks".into()));
        }
        Ok(TwoBranchPolicy {
            reference,
            learnable,
            k,
        })
    }

    pub fn reference(&self) -> &Mlp {
        &self.reference
    }

    pub fn shared_reference(&self) -> Arc<Mlp> {
        Arc::clone(&self.reference)
    }

    pub fn learnable(&self) -> &Mlp {
        &self.learnable
    }

    pub fn learnable_mut(&mut self) -> &mut Mlp {
        &mut self.learnable
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn vocab_size(&self) -> usize {
        self.reference.output_dim()
    }

    fn check_world(&self, world: &WorldSpec) -> Result<()> {
        if world.vocab_size() != self.vocab_size() {
            return Err(Error::Dimension(format!(
                "policy has {} templates, world has {}",
                self.vocab_size(),
                world.vocab_size()
            )));
        }
        Ok(())
    }

    /// The reference's top-k templates that apply to `m`, in reference rank
    /// order (ties by ascending index).
    pub fn realistic_set(&self, world: &WorldSpec, m: &Molecule) -> Result<Vec<TemplateId>> {
        self.check_world(world)?;
        let applicable = world.applicable_templates(m)?;
        if applicable.is_empty() {
            return Ok(Vec::new());
        }
        let logits = self.reference.predict(&Fingerprint::of(m).active())?;
        Ok(top_k(&logits, self.k)
            .into_iter()
            .map(TemplateId::from_index)
            .filter(|t| applicable.binary_search(t).is_ok())
            .collect())
    }

    /// Expansions for `m` with learnable-branch priors renormalised over the
    /// realistic set, highest prior first. Empty when no realistic template
    /// applies; callers treat that molecule as a dead leaf.
    pub fn propose(&self, world: &WorldSpec, m: &Molecule) -> Result<Vec<Expansion>> {
        if world.is_building_block(m)? {
            return Err(Error::TerminalTarget(m.id().to_string()));
        }
        let support = self.realistic_set(world, m)?;
        if support.is_empty() {
            return Ok(Vec::new());
        }
        let logits = self.learnable.predict(&Fingerprint::of(m).active())?;
        let idx: Vec<usize> = support.iter().map(|t| t.index()).collect();
        let priors = masked_softmax(&logits, &idx);
        let mut out = support
            .iter()
            .zip(priors)
            .map(|(&t, p)| Expansion::new(t, world.reactants(m, t)?, p.clamp(0.0, 1.0)))
            .collect::<Result<Vec<_>>>()?;
        out.sort_by(|a, b| b.prior.total_cmp(&a.prior).then(a.template.cmp(&b.template)));
        Ok(out)
    }
}

/// Indices of the `k` largest values, descending, ties by ascending index.
pub fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// (molecule, template) pairs along the reactions of sampled routes.
pub fn sl_corpus<'a>(routes: impl IntoIterator<Item = &'a RouteTree>) -> Vec<(Molecule, TemplateId)> {
    routes
        .into_iter()
        .flat_map(|r| r.reactions().into_iter().map(|(m, t)| (m.clone(), t)))
        .collect()
}

#[derive(Clone, Debug)]
pub struct SlConfig {
    pub epochs: usize,
    pub hidden: usize,
    pub mini_batch: usize,
    pub lr: f64,
    pub dropout: f64,
    /// Fraction of the corpus held out for accuracy reporting.
    pub holdout: f64,
    pub top_k: usize,
    pub seed: u64,
}

impl Default for SlConfig {
    fn default() -> Self {
        SlConfig {
            epochs: 8,
            hidden: nnet::HIDDEN_UNITS,
            mini_batch: nnet::MINI_BATCH,
            lr: nnet::Adam::DEFAULT_LR,
            dropout: nnet::DROPOUT,
            holdout: 0.1,
            top_k: DEFAULT_TOP_K,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlReport {
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub train_top1: f64,
    pub holdout_top1: f64,
    pub holdout_topk: f64,
    pub n_train: usize,
    pub n_holdout: usize,
}

/// Top-1 and top-k accuracy of `net` on `(features, class)` pairs.
pub fn accuracy(net: &Mlp, data: &[(Vec<u32>, usize)], k: usize) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Ok((0.0, 0.0));
    }
    let (mut top1, mut topk) = (0usize, 0usize);
    for (x, class) in data {
        let ranked = top_k(&net.predict(x)?, k);
        top1 += usize::from(ranked.first() == Some(class));
        topk += usize::from(ranked.contains(class));
    }
    Ok((top1 as f64 / data.len() as f64, topk as f64 / data.len() as f64))
}

/// Trains the reference single-step classifier with cross-entropy.
pub fn pretrain_reference(
    world: &WorldSpec,
    corpus: &[(Molecule, TemplateId)],
    cfg: &SlConfig,
) -> Result<(Mlp, SlReport)> {
    if corpus.is_empty() {
        return Err(Error::Empty("SL corpus"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut data: Vec<(Vec<u32>, usize)> = corpus
        .iter()
        .map(|(m, t)| (Fingerprint::of(m).active(), t.index()))
        .collect();
    if let Some(&(_, bad)) = data.iter().find(|(_, t)| *t >= world.vocab_size()) {
        return Err(Error::Target(format!("template {bad} outside vocabulary")));
    }
    // shuffle once, hold out the tail
    let order = nnet::minibatches(data.len(), data.len(), &mut rng).remove(0);
    data = order.into_iter().map(|i| data[i].clone()).collect();
    let n_holdout = ((data.len() as f64) * cfg.holdout).floor() as usize;
    let holdout = data.split_off(data.len() - n_holdout);
    let train = data;
    if train.is_empty() {
        return Err(Error::Empty("SL training split"));
    }

    let net = Mlp::new(FINGERPRINT_BITS, cfg.hidden, world.vocab_size(), Head::Logits, cfg.dropout, cfg.seed)?;
    let mut model = Trainable::new(net, cfg.lr);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut total = 0.0;
        for chunk in nnet::minibatches(train.len(), cfg.mini_batch, &mut rng) {
            let xs: Vec<&[u32]> = chunk.iter().map(|&i| train[i].0.as_slice()).collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| train[i].1).collect();
            total += model.step(&xs, &Loss::CrossEntropy(&ys), &mut rng)? * chunk.len() as f64;
        }
        epoch_losses.push(total / train.len() as f64);
    }
    let (train_top1, _) = accuracy(&model.net, &train, cfg.top_k)?;
    let (holdout_top1, holdout_topk) = accuracy(&model.net, &holdout, cfg.top_k)?;
    Ok((
        model.net,
        SlReport {
            epoch_losses,
            train_top1,
            holdout_top1,
            holdout_topk,
            n_train: train.len(),
            n_holdout: holdout.len(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::generate_world;
    use std::collections::HashSet;

    fn small_policy(world: &WorldSpec, seed: u64) -> TwoBranchPolicy {
        let net = Mlp::new(FINGERPRINT_BITS, 16, world.vocab_size(), Head::Logits, 0.0, seed).unwrap();
        TwoBranchPolicy::new(net, 5).unwrap()
    }

    #[test]
    fn top_k_ties_by_index() {
        assert_eq!(top_k(&[1.0, 3.0, 3.0, 0.5, 2.0], 3), vec![1, 2, 4]);
        assert_eq!(top_k(&[1.0, 1.0], 5), vec![0, 1]);
    }

    #[test]
    fn priors_at_init_match_reference() {
        let w = generate_world(30, 4).unwrap();
        let pol = small_policy(&w, 2);
        let targets = crate::world::sample_targets(&w, 30, 4, 1, &HashSet::new()).unwrap();
        for m in &targets {
            let props = pol.propose(&w, m).unwrap();
            let support = pol.realistic_set(&w, m).unwrap();
            assert_eq!(props.len(), support.len());
            if props.is_empty() {
                continue;
            }
            let logits = pol.reference().predict(&Fingerprint::of(m).active()).unwrap();
            let idx: Vec<usize> = support.iter().map(|t| t.index()).collect();
            let want = masked_softmax(&logits, &idx);
            for e in &props {
                let pos = support.iter().position(|&t| t == e.template).unwrap();
                assert!((e.prior - want[pos]).abs() < 1e-12);
            }
            let total: f64 = props.iter().map(|e| e.prior).sum();
            assert!((total - 1.0).abs() < 1e-9);
            let applicable = w.applicable_templates(m).unwrap();
            assert!(props.iter().all(|e| applicable.contains(&e.template)));
            assert!(props.len() <= pol.k());
        }
    }

    #[test]
    fn building_block_cannot_be_proposed_for() {
        let w = generate_world(20, 4).unwrap();
        let pol = small_policy(&w, 2);
        assert!(pol.propose(&w, &w.molecule("AB").unwrap()).is_err());
    }

    #[test]
    fn sl_pretraining_reduces_loss_and_reports_sane_accuracy() {
        let w = generate_world(30, 8).unwrap();
        let routes = crate::world::sample_training_routes(&w, 150, 4, 3, &HashSet::new()).unwrap();
        let corpus = sl_corpus(routes.iter().map(|(r, _)| r));
        let cfg = SlConfig { hidden: 64, seed: 5, ..SlConfig::default() };
        let (_, report) = pretrain_reference(&w, &corpus, &cfg).unwrap();
        assert_eq!(report.epoch_losses.len(), 8);
        assert!(report.epoch_losses[7] < report.epoch_losses[0]);
        for acc in [report.train_top1, report.holdout_top1, report.holdout_topk] {
            assert!((0.0..=1.0).contains(&acc));
        }
        assert!(report.holdout_topk >= report.holdout_top1);
        assert!(pretrain_reference(&w, &[], &cfg).is_err());
    }
}
