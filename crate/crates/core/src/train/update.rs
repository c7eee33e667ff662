use rand_chacha::ChaCha8Rng;

use super::extract::{Examples, ValueExample};
use crate::error::Result;
use crate::nnet::{minibatches, Adam, Loss, MaskedTarget, Mlp};
use crate::policy::TwoBranchPolicy;
use crate::values::ValueNets;
use crate::world::Fingerprint;

/// Mean loss per head over one update pass; `None` when the head had no examples.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossReport {
    pub policy: Option<f64>,
    pub syn: Option<f64>,
    pub cost: Option<f64>,
    pub single: Option<f64>,
}

/// Trainable networks and their optimizer states. The policy's reference
/// branch has no optimizer and never changes.
#[derive(Clone, Debug)]
pub struct Learner {
    pub policy: TwoBranchPolicy,
    pub values: Option<ValueNets>,
    policy_adam: Adam,
    value_adams: Vec<Adam>,
}

impl Learner {
    pub fn new(policy: TwoBranchPolicy, values: Option<ValueNets>, lr: f64) -> Self {
        let policy_adam = Adam::new(policy.learnable().num_params(), lr);
        let value_adams = values
            .iter()
            .flat_map(|v| v.nets())
            .map(|(_, net)| Adam::new(net.num_params(), lr))
            .collect();
        Learner {
            policy,
            values,
            policy_adam,
            value_adams,
        }
    }

    /// One shuffled pass per head over `examples` in mini-batches.
    pub fn update(&mut self, examples: &Examples, mini_batch: usize, rng: &mut ChaCha8Rng) -> Result<LossReport> {
        let mut report = LossReport::default();
        if !examples.policy.is_empty() {
            let xs: Vec<Vec<u32>> = examples.policy.iter().map(|e| Fingerprint::of(&e.molecule).active()).collect();
            let ys: Vec<MaskedTarget> = examples
                .policy
                .iter()
                .map(|e| MaskedTarget {
                    mask: e.mask.clone(),
                    target: e.target,
                })
                .collect();
            report.policy = Some(pass(
                self.policy.learnable_mut(),
                &mut self.policy_adam,
                &xs,
                mini_batch,
                rng,
                |idx| Loss::MaskedCrossEntropy(idx),
                &ys,
            )?);
        }
        let Some(values) = self.values.as_mut() else {
            return Ok(report);
        };
        for ((name, net), adam) in values.nets_mut().into_iter().zip(&mut self.value_adams) {
            let set: &[ValueExample] = match name {
                "syn" => &examples.syn,
                "cost" => &examples.cost,
                _ => &examples.single,
            };
            if set.is_empty() {
                continue;
            }
            let xs: Vec<Vec<u32>> = set.iter().map(|e| Fingerprint::of(&e.molecule).active()).collect();
            let ys: Vec<f64> = set.iter().map(|e| e.target).collect();
            let loss = if name == "syn" {
                pass(net, adam, &xs, mini_batch, rng, |t| Loss::BinaryCrossEntropy(t), &ys)?
            } else {
                pass(net, adam, &xs, mini_batch, rng, |t| Loss::MeanSquared(t), &ys)?
            };
            match name {
                "syn" => report.syn = Some(loss),
                "cost" => report.cost = Some(loss),
                _ => report.single = Some(loss),
            }
        }
        Ok(report)
    }
}

fn pass<T: Clone>(
    net: &mut Mlp,
    adam: &mut Adam,
    xs: &[Vec<u32>],
    mini_batch: usize,
    rng: &mut ChaCha8Rng,
    loss: impl for<'a> Fn(&'a [T]) -> Loss<'a>,
    ys: &[T],
) -> Result<f64> {
    let mut total = 0.0;
    for chunk in minibatches(xs.len(), mini_batch, rng) {
        let bx: Vec<&[u32]> = chunk.iter().map(|&i| xs[i].as_slice()).collect();
        let by: Vec<T> = chunk.iter().map(|&i| ys[i].clone()).collect();
        let (value, grads) = net.backward(&bx, &loss(&by), Some(rng))?;
        adam.step(net.params_mut(), &grads)?;
        total += value * chunk.len() as f64;
    }
    Ok(total / xs.len() as f64)
}
