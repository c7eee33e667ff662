use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Output activation of the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Head {
    /// Raw logits, for classification with (masked) cross-entropy.
    Logits,
    Sigmoid,
    Softplus,
}

impl Head {
    pub(crate) fn code(self) -> u8 {
        match self {
            Head::Logits => 0,
            Head::Sigmoid => 1,
            Head::Softplus => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Head::Logits),
            1 => Some(Head::Sigmoid),
            2 => Some(Head::Softplus),
            _ => None,
        }
    }

    fn apply(self, z: f64) -> f64 {
        match self {
            Head::Logits => z,
            Head::Sigmoid => sigmoid(z),
            Head::Softplus => softplus(z),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Head::Logits => 1.0,
            Head::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Head::Softplus => sigmoid(z),
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// Classification target restricted to a support set.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedTarget {
    pub mask: Vec<usize>,
    pub target: usize,
}

/// Loss head together with its per-row targets.
#[derive(Clone, Copy, Debug)]
pub enum Loss<'a> {
    CrossEntropy(&'a [usize]),
    MaskedCrossEntropy(&'a [MaskedTarget]),
    BinaryCrossEntropy(&'a [f64]),
    /// Row-major, `batch * outputs` targets.
    MeanSquared(&'a [f64]),
}

/// Two-layer perceptron over sparse binary inputs: `input -> hidden (ELU,
/// dropout) -> output (head)`.
///
/// Inputs are lists of active feature indices. Parameters live in one flat
/// vector laid out as `w1[input][hidden]`, `b1`, `w2[hidden][output]`, `b2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    input: usize,
    hidden: usize,
    output: usize,
    head: Head,
    dropout: f64,
    seed: u64,
    params: Vec<f64>,
}

/// Forward activations kept for backpropagation.
struct Trace {
    pre: Vec<f64>,
    act: Vec<f64>,
    mask: Option<Vec<f64>>,
    z: Vec<f64>,
}

impl Mlp {
    /// He-style uniform initialisation: weights ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)), biases 0.
    pub fn new(input: usize, hidden: usize, output: usize, head: Head, dropout: f64, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(input, hidden, output, head, dropout, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l1 = (6.0 / input as f64).sqrt();
        let l2 = (6.0 / hidden as f64).sqrt();
        let (w1, w2) = (net.w1_range(), net.w2_range());
        for p in &mut net.params[w1] {
            *p = rng.gen_range(-l1..l1);
        }
        for p in &mut net.params[w2] {
            *p = rng.gen_range(-l2..l2);
        }
        Ok(net)
    }

    pub fn zeros(input: usize, hidden: usize, output: usize, head: Head, dropout: f64, seed: u64) -> Result<Self> {
        if input == 0 || hidden == 0 || output == 0 {
            return Err(Error::Parameter("layer sizes must be positive".into()));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::Parameter(format!("dropout {dropout} outside [0,1)")));
        }
        let n = input * hidden + hidden + hidden * output + output;
        Ok(Mlp {
            input,
            hidden,
            output,
            head,
            dropout,
            seed,
            params: vec![0.0; n],
        })
    }

    pub(crate) fn from_parts(
        input: usize,
        hidden: usize,
        output: usize,
        head: Head,
        dropout: f64,
        seed: u64,
        params: Vec<f64>,
    ) -> Result<Self> {
        let mut net = Self::zeros(input, hidden, output, head, dropout, seed)?;
        if params.len() != net.params.len() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn output_dim(&self) -> usize {
        self.output
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn w1_range(&self) -> std::ops::Range<usize> {
        0..self.input * self.hidden
    }

    fn b1_offset(&self) -> usize {
        self.input * self.hidden
    }

    fn w2_range(&self) -> std::ops::Range<usize> {
        let start = self.b1_offset() + self.hidden;
        start..start + self.hidden * self.output
    }

    fn b2_offset(&self) -> usize {
        self.w2_range().end
    }

    fn check_row(&self, x: &[u32]) -> Result<()> {
        match x.iter().find(|&&i| i as usize >= self.input) {
            Some(i) => Err(Error::Dimension(format!(
                "feature index {i} outside input width {}",
                self.input
            ))),
            None => Ok(()),
        }
    }

    fn trace_row(&self, x: &[u32], rng: Option<&mut ChaCha8Rng>) -> Trace {
        let h = self.hidden;
        let b1 = self.b1_offset();
        let mut pre = self.params[b1..b1 + h].to_vec();
        for &i in x {
            let row = &self.params[i as usize * h..(i as usize + 1) * h];
            for (p, w) in pre.iter_mut().zip(row) {
                *p += w;
            }
        }
        let mut act: Vec<f64> = pre.iter().map(|&p| elu(p)).collect();
        let mask = match rng {
            Some(rng) if self.dropout > 0.0 => {
                let keep = 1.0 / (1.0 - self.dropout);
                let mask: Vec<f64> = (0..h)
                    .map(|_| if rng.gen::<f64>() < self.dropout { 0.0 } else { keep })
                    .collect();
                for (a, m) in act.iter_mut().zip(&mask) {
                    *a *= m;
                }
                Some(mask)
            }
            _ => None,
        };
        let o = self.output;
        let mut z = self.params[self.b2_offset()..self.b2_offset() + o].to_vec();
        let w2 = self.w2_range().start;
        for (j, &a) in act.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let row = &self.params[w2 + j * o..w2 + (j + 1) * o];
            for (zk, w) in z.iter_mut().zip(row) {
                *zk += a * w;
            }
        }
        Trace { pre, act, mask, z }
    }

    /// Eval-mode output for one input row (head applied).
    pub fn predict(&self, x: &[u32]) -> Result<Vec<f64>> {
        self.check_row(x)?;
        let t = self.trace_row(x, None);
        Ok(t.z.into_iter().map(|z| self.head.apply(z)).collect())
    }

    /// Batched forward pass. Passing an RNG turns on training mode (dropout).
    pub fn forward<I: AsRef<[u32]>>(&self, batch: &[I], mut rng: Option<&mut ChaCha8Rng>) -> Result<Vec<Vec<f64>>> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        batch.iter().try_for_each(|x| self.check_row(x.as_ref()))?;
        Ok(batch
            .iter()
            .map(|x| {
                let t = self.trace_row(x.as_ref(), rng.as_deref_mut());
                t.z.into_iter().map(|z| self.head.apply(z)).collect()
            })
            .collect())
    }

    fn check_loss(&self, rows: usize, loss: &Loss<'_>) -> Result<()> {
        let o = self.output;
        let need_head = |want: Head| {
            if self.head == want {
                Ok(())
            } else {
                Err(Error::Target(format!("loss needs a {want:?} head, network has {:?}", self.head)))
            }
        };
        let len = |n: usize| {
            if n == rows {
                Ok(())
            } else {
                Err(Error::Dimension(format!("{n} targets for {rows} rows")))
            }
        };
        match *loss {
            Loss::CrossEntropy(t) => {
                need_head(Head::Logits)?;
                len(t.len())?;
                if let Some(bad) = t.iter().find(|&&c| c >= o) {
                    return Err(Error::Target(format!("class {bad} outside {o} outputs")));
                }
            }
            Loss::MaskedCrossEntropy(t) => {
                need_head(Head::Logits)?;
                len(t.len())?;
                for mt in t {
                    let mut sorted = mt.mask.clone();
                    sorted.sort_unstable();
                    sorted.dedup();
                    if sorted.is_empty() || sorted.len() != mt.mask.len() || sorted.last().is_some_and(|&m| m >= o) {
                        return Err(Error::Target("mask must be non-empty, unique and in range".into()));
                    }
                    if !mt.mask.contains(&mt.target) {
                        return Err(Error::Target(format!("target {} outside its mask", mt.target)));
                    }
                }
            }
            Loss::BinaryCrossEntropy(t) => {
                need_head(Head::Sigmoid)?;
                len(t.len())?;
                if let Some(bad) = t.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                    return Err(Error::Target(format!("BCE target {bad} outside [0,1]")));
                }
            }
            Loss::MeanSquared(t) => {
                if t.len() != rows * o {
                    return Err(Error::Dimension(format!("{} targets for {rows}x{o} outputs", t.len())));
                }
                if t.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Target("non-finite MSE target".into()));
                }
            }
        }
        Ok(())
    }

    /// Loss and its gradient w.r.t. the pre-activation outputs of one row.
    fn row_loss(&self, row: usize, z: &[f64], loss: &Loss<'_>, dz: &mut [f64]) -> f64 {
        match *loss {
            Loss::CrossEntropy(t) => {
                let lse = log_sum_exp(z.iter().copied());
                for (d, &zk) in dz.iter_mut().zip(z) {
                    *d = (zk - lse).exp();
                }
                dz[t[row]] -= 1.0;
                lse - z[t[row]]
            }
            Loss::MaskedCrossEntropy(t) => {
                let mt = &t[row];
                let lse = log_sum_exp(mt.mask.iter().map(|&k| z[k]));
                dz.iter_mut().for_each(|d| *d = 0.0);
                for &k in &mt.mask {
                    dz[k] = (z[k] - lse).exp();
                }
                dz[mt.target] -= 1.0;
                lse - z[mt.target]
            }
            Loss::BinaryCrossEntropy(t) => {
                let (zk, y) = (z[0], t[row]);
                dz[0] = sigmoid(zk) - y;
                softplus(zk) - y * zk
            }
            Loss::MeanSquared(t) => {
                let o = self.output;
                let mut total = 0.0;
                for k in 0..o {
                    let y = self.head.apply(z[k]);
                    let diff = y - t[row * o + k];
                    total += diff * diff;
                    dz[k] = 2.0 * diff * self.head.derivative(z[k]) / o as f64;
                }
                total / o as f64
            }
        }
    }

    /// Mean loss over the batch without gradients; eval mode.
    pub fn loss<I: AsRef<[u32]>>(&self, batch: &[I], loss: &Loss<'_>) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        batch.iter().try_for_each(|x| self.check_row(x.as_ref()))?;
        self.check_loss(batch.len(), loss)?;
        let mut dz = vec![0.0; self.output];
        let mut total = 0.0;
        for (r, x) in batch.iter().enumerate() {
            let t = self.trace_row(x.as_ref(), None);
            total += self.row_loss(r, &t.z, loss, &mut dz);
        }
        Ok(total / batch.len() as f64)
    }

    /// Mean loss and its gradient for every parameter. Passing an RNG samples
    /// a dropout mask per row (training mode).
    pub fn backward<I: AsRef<[u32]>>(
        &self,
        batch: &[I],
        loss: &Loss<'_>,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        batch.iter().try_for_each(|x| self.check_row(x.as_ref()))?;
        self.check_loss(batch.len(), loss)?;
        let (h, o) = (self.hidden, self.output);
        let scale = 1.0 / batch.len() as f64;
        let mut grads = vec![0.0; self.params.len()];
        let (b1, w2, b2) = (self.b1_offset(), self.w2_range().start, self.b2_offset());
        let mut dz = vec![0.0; o];
        let mut dpre = vec![0.0; h];
        let mut total = 0.0;
        for (r, x) in batch.iter().enumerate() {
            let x = x.as_ref();
            let t = self.trace_row(x, rng.as_deref_mut());
            total += self.row_loss(r, &t.z, loss, &mut dz);
            dz.iter_mut().for_each(|d| *d *= scale);
            for (g, d) in grads[b2..b2 + o].iter_mut().zip(&dz) {
                *g += d;
            }
            for j in 0..h {
                let row = w2 + j * o;
                let a = t.act[j];
                let mut da = 0.0;
                for k in 0..o {
                    grads[row + k] += a * dz[k];
                    da += self.params[row + k] * dz[k];
                }
                if let Some(mask) = &t.mask {
                    da *= mask[j];
                }
                dpre[j] = da * elu_grad(t.pre[j]);
            }
            for (g, d) in grads[b1..b1 + h].iter_mut().zip(&dpre) {
                *g += d;
            }
            for &i in x {
                let row = i as usize * h;
                for (g, d) in grads[row..row + h].iter_mut().zip(&dpre) {
                    *g += d;
                }
            }
        }
        Ok((total * scale, grads))
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Softmax over `logits` restricted to `support`, in support order.
pub fn masked_softmax(logits: &[f64], support: &[usize]) -> Vec<f64> {
    let lse = log_sum_exp(support.iter().map(|&k| logits[k]));
    support.iter().map(|&k| (logits[k] - lse).exp()).collect()
}
