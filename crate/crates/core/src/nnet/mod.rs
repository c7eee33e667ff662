//! Small feed-forward networks with hand-written gradients.
//!
//! Every network in the system is the same shape: sparse binary fingerprint
//! input, one ELU hidden layer with dropout, and an output head. Dropout is
//! applied to the hidden layer of every network in training mode.

mod adam;
pub mod checkpoint;
mod gradcheck;
mod mlp;

pub use adam::Adam;
pub use gradcheck::{compare_gradients, grad_check, FD_STEP};
pub use mlp::{masked_softmax, Head, Loss, MaskedTarget, Mlp};

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

pub const HIDDEN_UNITS: usize = 512;
pub const DROPOUT: f64 = 0.1;
pub const MINI_BATCH: usize = 128;

/// A network with its optimizer state.
#[derive(Clone, Debug)]
pub struct Trainable {
    pub net: Mlp,
    pub adam: Adam,
}

impl Trainable {
    pub fn new(net: Mlp, lr: f64) -> Self {
        let adam = Adam::new(net.num_params(), lr);
        Trainable { net, adam }
    }

    /// One Adam step on a mini-batch in training mode; returns the batch loss.
    pub fn step<I: AsRef<[u32]>>(&mut self, batch: &[I], loss: &Loss<'_>, rng: &mut ChaCha8Rng) -> Result<f64> {
        let (value, grads) = self.net.backward(batch, loss, Some(rng))?;
        self.adam.step(self.net.params_mut(), &grads)?;
        Ok(value)
    }
}

/// Shuffled mini-batch index chunks covering `0..n`.
pub fn minibatches(n: usize, size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(size.max(1)).map(<[usize]>::to_vec).collect()
}
