//! Encoder–decoder network: parameter layout, initialization, and the batched
//! forward and backward passes.

use crate::numerics::{gemm, random_orthogonal, Op, SeedRng};

use super::config::{DecoderKind, ModelConfig};
use super::lstm::{lstm_backward, lstm_forward, LstmGrads, LstmInput, LstmTrace, LstmWeights};
use super::SeqError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LstmSlot {
    pub offset: usize,
    pub input: usize,
    pub hidden: usize,
}

impl LstmSlot {
    pub fn len(&self) -> usize {
        (self.input + self.hidden + 1) * 4 * self.hidden
    }

    fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }

    pub fn weights<'a>(&self, params: &'a [f64]) -> LstmWeights<'a> {
        LstmWeights::from_block(&params[self.range()], self.input, self.hidden)
    }

    pub fn grads<'a>(&self, grads: &'a mut [f64]) -> LstmGrads<'a> {
        LstmGrads::from_block(&mut grads[self.range()], self.input, self.hidden)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct DenseSlot {
    pub offset: usize,
    pub input: usize,
    pub output: usize,
}

impl DenseSlot {
    pub fn len(&self) -> usize {
        (self.input + 1) * self.output
    }

    fn split<'a>(&self, params: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        params[self.offset..self.offset + self.len()].split_at(self.input * self.output)
    }

    fn split_mut<'a>(&self, params: &'a mut [f64]) -> (&'a mut [f64], &'a mut [f64]) {
        params[self.offset..self.offset + self.len()].split_at_mut(self.input * self.output)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct DecoderSlots {
    pub kind: DecoderKind,
    pub start: usize,
    pub end: usize,
    pub lstm0: LstmSlot,
    pub lstm1: LstmSlot,
    pub dense: DenseSlot,
}

impl DecoderSlots {
    pub fn steps(&self) -> usize {
        self.end - self.start
    }
}

/// Where each weight tensor lives inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct NetLayout {
    pub dim: usize,
    pub input_steps: usize,
    pub enc0: LstmSlot,
    pub enc1: LstmSlot,
    pub decoders: Vec<DecoderSlots>,
    pub total: usize,
}

/// Name and shape of one weight tensor, with its offset in the flat vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl NetLayout {
    pub fn new(config: &ModelConfig) -> Self {
        let mut offset = 0;
        let mut lstm = |input, hidden| {
            let slot = LstmSlot {
                offset,
                input,
                hidden,
            };
            offset += slot.len();
            slot
        };
        let enc0 = lstm(config.dim, config.encoder.first);
        let enc1 = lstm(config.encoder.first, config.encoder.second);
        let mut decoders = Vec::new();
        for ((kind, start, end), units) in config.spans().into_iter().zip(&config.decoders) {
            let lstm0 = lstm(config.encoder.second, units.first);
            let lstm1 = lstm(units.first, units.second);
            decoders.push((kind, start, end, lstm0, lstm1, units.second));
        }
        let decoders = decoders
            .into_iter()
            .map(|(kind, start, end, lstm0, lstm1, width)| {
                let dense = DenseSlot {
                    offset,
                    input: width,
                    output: config.dim,
                };
                offset += dense.len();
                DecoderSlots {
                    kind,
                    start,
                    end,
                    lstm0,
                    lstm1,
                    dense,
                }
            })
            .collect();
        Self {
            dim: config.dim,
            input_steps: config.split_index,
            enc0,
            enc1,
            decoders,
            total: offset,
        }
    }

    pub fn tensors(&self) -> Vec<TensorSpec> {
        let mut out = Vec::new();
        let push_lstm = |prefix: &str, s: &LstmSlot, out: &mut Vec<TensorSpec>| {
            let g = 4 * s.hidden;
            out.push(TensorSpec {
                name: format!("{prefix}.kernel"),
                shape: vec![s.input, g],
                offset: s.offset,
            });
            out.push(TensorSpec {
                name: format!("{prefix}.recurrent"),
                shape: vec![s.hidden, g],
                offset: s.offset + s.input * g,
            });
            out.push(TensorSpec {
                name: format!("{prefix}.bias"),
                shape: vec![g],
                offset: s.offset + (s.input + s.hidden) * g,
            });
        };
        push_lstm("encoder.lstm0", &self.enc0, &mut out);
        push_lstm("encoder.lstm1", &self.enc1, &mut out);
        for d in &self.decoders {
            let p = d.kind.name();
            push_lstm(&format!("{p}.lstm0"), &d.lstm0, &mut out);
            push_lstm(&format!("{p}.lstm1"), &d.lstm1, &mut out);
        }
        for d in &self.decoders {
            let p = d.kind.name();
            out.push(TensorSpec {
                name: format!("{p}.dense.kernel"),
                shape: vec![d.dense.input, d.dense.output],
                offset: d.dense.offset,
            });
            out.push(TensorSpec {
                name: format!("{p}.dense.bias"),
                shape: vec![d.dense.output],
                offset: d.dense.offset + d.dense.input * d.dense.output,
            });
        }
        out.sort_by_key(|t| t.offset);
        out
    }

    fn lstm_slots(&self) -> Vec<LstmSlot> {
        let mut v = vec![self.enc0, self.enc1];
        for d in &self.decoders {
            v.push(d.lstm0);
            v.push(d.lstm1);
        }
        v
    }

    /// Glorot-uniform kernels, orthogonal recurrent weights, forget bias 1.
    pub fn initialize(&self, rng: &mut SeedRng) -> Vec<f64> {
        let mut params = vec![0.0; self.total];
        for slot in self.lstm_slots() {
            let g = 4 * slot.hidden;
            let limit = (6.0 / (slot.input + g) as f64).sqrt();
            let kernel = rng.uniform_vec(slot.input * g, limit);
            let recurrent = random_orthogonal(slot.hidden, g, rng).into_vec();
            let block = &mut params[slot.range()];
            block[..slot.input * g].copy_from_slice(&kernel);
            block[slot.input * g..(slot.input + slot.hidden) * g].copy_from_slice(&recurrent);
            let bias = &mut block[(slot.input + slot.hidden) * g..];
            bias[slot.hidden..2 * slot.hidden].fill(1.0);
        }
        for d in &self.decoders {
            let limit = (6.0 / (d.dense.input + d.dense.output) as f64).sqrt();
            let kernel = rng.uniform_vec(d.dense.input * d.dense.output, limit);
            let (k, _bias) = d.dense.split_mut(&mut params);
            k.copy_from_slice(&kernel);
        }
        params
    }
}

/// Inverted-dropout masks, one `batch×width` mask per LSTM layer, reused at every step.
pub(crate) struct DropoutMasks {
    pub enc0: Vec<f64>,
    pub enc1: Vec<f64>,
    pub decoders: Vec<(Vec<f64>, Vec<f64>)>,
}

impl DropoutMasks {
    pub fn sample(layout: &NetLayout, batch: usize, rate: f64, rng: &mut SeedRng) -> Self {
        let keep = 1.0 - rate;
        let mut mask = |width: usize| -> Vec<f64> {
            (0..batch * width)
                .map(|_| if rng.unit() < keep { 1.0 / keep } else { 0.0 })
                .collect()
        };
        let enc0 = mask(layout.enc0.hidden);
        let enc1 = mask(layout.enc1.hidden);
        let decoders = layout
            .decoders
            .iter()
            .map(|d| (mask(d.lstm0.hidden), mask(d.lstm1.hidden)))
            .collect();
        Self {
            enc0,
            enc1,
            decoders,
        }
    }
}

/// Multiplies each step of a time-major sequence by a per-sequence mask.
fn apply_mask(seq: &[f64], mask: &[f64]) -> Vec<f64> {
    let mut out = seq.to_vec();
    mask_in_place(&mut out, mask);
    out
}

fn mask_in_place(seq: &mut [f64], mask: &[f64]) {
    for chunk in seq.chunks_exact_mut(mask.len()) {
        chunk.iter_mut().zip(mask).for_each(|(v, m)| *v *= m);
    }
}

pub(crate) struct DecoderPass {
    trace0: LstmTrace,
    y0: Vec<f64>,
    trace1: LstmTrace,
    y1: Vec<f64>,
    /// Predictions, time-major `steps·batch × dim`.
    pub output: Vec<f64>,
}

pub(crate) struct ForwardPass {
    pub batch: usize,
    input: Vec<f64>,
    trace0: LstmTrace,
    y0: Vec<f64>,
    trace1: LstmTrace,
    bottleneck: Vec<f64>,
    pub decoders: Vec<DecoderPass>,
}

/// Runs the network on a time-major `input_steps·batch × dim` input.
pub(crate) fn forward(
    layout: &NetLayout,
    params: &[f64],
    input: Vec<f64>,
    batch: usize,
    masks: Option<&DropoutMasks>,
) -> Result<ForwardPass, SeqError> {
    let steps = layout.input_steps;
    if input.len() != steps * batch * layout.dim {
        return Err(SeqError::Shape(format!(
            "expected {steps} input steps of dimension {} for {batch} words, got {} values",
            layout.dim,
            input.len()
        )));
    }
    let masked = |seq: &[f64], m: Option<&Vec<f64>>| match m {
        Some(m) => apply_mask(seq, m),
        None => seq.to_vec(),
    };

    let trace0 = lstm_forward(
        layout.enc0.weights(params),
        LstmInput::Sequence(&input),
        steps,
        batch,
    )?;
    let y0 = masked(&trace0.outputs, masks.map(|m| &m.enc0));
    let trace1 = lstm_forward(
        layout.enc1.weights(params),
        LstmInput::Sequence(&y0),
        steps,
        batch,
    )?;
    let bottleneck = masked(trace1.last_output(), masks.map(|m| &m.enc1));

    let mut decoders = Vec::with_capacity(layout.decoders.len());
    for (k, d) in layout.decoders.iter().enumerate() {
        let n = d.steps();
        let dm = masks.map(|m| &m.decoders[k]);
        let t0 = lstm_forward(
            d.lstm0.weights(params),
            LstmInput::Repeated(&bottleneck),
            n,
            batch,
        )?;
        let y0d = masked(&t0.outputs, dm.map(|m| &m.0));
        let t1 = lstm_forward(d.lstm1.weights(params), LstmInput::Sequence(&y0d), n, batch)?;
        let y1d = masked(&t1.outputs, dm.map(|m| &m.1));
        let (kernel, bias) = d.dense.split(params);
        let mut output = vec![0.0; n * batch * layout.dim];
        gemm(
            Op::N,
            Op::N,
            n * batch,
            d.dense.input,
            layout.dim,
            &y1d,
            kernel,
            0.0,
            &mut output,
        );
        for row in output.chunks_exact_mut(layout.dim) {
            row.iter_mut().zip(bias).for_each(|(v, b)| *v += b);
        }
        decoders.push(DecoderPass {
            trace0: t0,
            y0: y0d,
            trace1: t1,
            y1: y1d,
            output,
        });
    }
    Ok(ForwardPass {
        batch,
        input,
        trace0,
        y0,
        trace1,
        bottleneck,
        decoders,
    })
}

/// Sum over decoders of the mean squared error, and `∂loss/∂output` per decoder.
pub(crate) fn mse_loss(
    layout: &NetLayout,
    pass: &ForwardPass,
    targets: &[Vec<f64>],
) -> (f64, Vec<Vec<f64>>) {
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(targets.len());
    for (dec, target) in pass.decoders.iter().zip(targets) {
        let n = dec.output.len() as f64;
        let mut sq = 0.0;
        let g: Vec<f64> = dec
            .output
            .iter()
            .zip(target)
            .map(|(p, a)| {
                let diff = p - a;
                sq += diff * diff;
                2.0 * diff / n
            })
            .collect();
        total += sq / n;
        grads.push(g);
    }
    let _ = layout;
    (total, grads)
}

/// Accumulates `∂loss/∂params` into `grads` given `∂loss/∂output` per decoder.
pub(crate) fn backward(
    layout: &NetLayout,
    params: &[f64],
    pass: &ForwardPass,
    d_outputs: Vec<Vec<f64>>,
    masks: Option<&DropoutMasks>,
    grads: &mut [f64],
) {
    let batch = pass.batch;
    let dim = layout.dim;
    let mut d_bottleneck = vec![0.0; batch * layout.enc1.hidden];

    for (k, ((d, dec), d_out)) in layout
        .decoders
        .iter()
        .zip(&pass.decoders)
        .zip(d_outputs)
        .enumerate()
    {
        let n = d.steps();
        let dm = masks.map(|m| &m.decoders[k]);
        let (kernel, _) = d.dense.split(params);
        {
            let (gk, gb) = d.dense.split_mut(grads);
            gemm(
                Op::T,
                Op::N,
                d.dense.input,
                n * batch,
                dim,
                &dec.y1,
                &d_out,
                1.0,
                gk,
            );
            for row in d_out.chunks_exact(dim) {
                gb.iter_mut().zip(row).for_each(|(g, v)| *g += v);
            }
        }
        let mut d_h1 = vec![0.0; n * batch * d.dense.input];
        gemm(
            Op::N,
            Op::T,
            n * batch,
            dim,
            d.dense.input,
            &d_out,
            kernel,
            0.0,
            &mut d_h1,
        );
        if let Some(m) = dm {
            mask_in_place(&mut d_h1, &m.1);
        }
        let mut d_h0 = lstm_backward(
            d.lstm1.weights(params),
            &dec.trace1,
            LstmInput::Sequence(&dec.y0),
            &mut d_h1,
            d.lstm1.grads(grads),
            true,
        )
        .expect("input gradient requested");
        if let Some(m) = dm {
            mask_in_place(&mut d_h0, &m.0);
        }
        let dz = lstm_backward(
            d.lstm0.weights(params),
            &dec.trace0,
            LstmInput::Repeated(&pass.bottleneck),
            &mut d_h0,
            d.lstm0.grads(grads),
            true,
        )
        .expect("input gradient requested");
        d_bottleneck.iter_mut().zip(&dz).for_each(|(a, b)| *a += b);
    }

    if let Some(m) = masks {
        mask_in_place(&mut d_bottleneck, &m.enc1);
    }
    let steps = layout.input_steps;
    let h1 = layout.enc1.hidden;
    let mut d_enc1 = vec![0.0; steps * batch * h1];
    d_enc1[(steps - 1) * batch * h1..].copy_from_slice(&d_bottleneck);
    let mut d_y0 = lstm_backward(
        layout.enc1.weights(params),
        &pass.trace1,
        LstmInput::Sequence(&pass.y0),
        &mut d_enc1,
        layout.enc1.grads(grads),
        true,
    )
    .expect("input gradient requested");
    if let Some(m) = masks {
        mask_in_place(&mut d_y0, &m.enc0);
    }
    lstm_backward(
        layout.enc0.weights(params),
        &pass.trace0,
        LstmInput::Sequence(&pass.input),
        &mut d_y0,
        layout.enc0.grads(grads),
        false,
    );
}
