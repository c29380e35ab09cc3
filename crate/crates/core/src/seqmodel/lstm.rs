//! Batched LSTM layer with backpropagation through time.
//!
//! Sequences are time-major: row `t·batch + b` holds step `t` of sequence `b`.
//! Gate blocks are ordered input, forget, candidate, output along the `4h` axis.

use crate::numerics::{gemm, Op};

use super::SeqError;

/// Borrowed weights of one layer: `kernel` is `input×4h`, `recurrent` is `h×4h`.
#[derive(Clone, Copy)]
pub struct LstmWeights<'a> {
    pub kernel: &'a [f64],
    pub recurrent: &'a [f64],
    pub bias: &'a [f64],
    pub input: usize,
    pub hidden: usize,
}

impl<'a> LstmWeights<'a> {
    /// Splits a contiguous `[kernel | recurrent | bias]` block.
    pub fn from_block(block: &'a [f64], input: usize, hidden: usize) -> Self {
        let g = 4 * hidden;
        let (kernel, rest) = block.split_at(input * g);
        let (recurrent, bias) = rest.split_at(hidden * g);
        debug_assert_eq!(bias.len(), g);
        Self {
            kernel,
            recurrent,
            bias,
            input,
            hidden,
        }
    }
}

pub struct LstmGrads<'a> {
    pub kernel: &'a mut [f64],
    pub recurrent: &'a mut [f64],
    pub bias: &'a mut [f64],
}

impl<'a> LstmGrads<'a> {
    pub fn from_block(block: &'a mut [f64], input: usize, hidden: usize) -> Self {
        let g = 4 * hidden;
        let (kernel, rest) = block.split_at_mut(input * g);
        let (recurrent, bias) = rest.split_at_mut(hidden * g);
        Self {
            kernel,
            recurrent,
            bias,
        }
    }
}

/// Layer input: a full sequence, or one vector per sequence repeated at every step.
#[derive(Clone, Copy)]
pub enum LstmInput<'a> {
    Sequence(&'a [f64]),
    Repeated(&'a [f64]),
}

/// Everything the backward pass needs from a forward pass.
pub struct LstmTrace {
    pub steps: usize,
    pub batch: usize,
    pub hidden: usize,
    /// Post-activation gates, `steps·batch × 4h`.
    gates: Vec<f64>,
    cells: Vec<f64>,
    tanh_cells: Vec<f64>,
    /// Hidden states `h_t`, `steps·batch × h`.
    pub outputs: Vec<f64>,
}

impl LstmTrace {
    /// Hidden state of the final step, `batch × h`.
    pub fn last_output(&self) -> &[f64] {
        let n = self.batch * self.hidden;
        &self.outputs[(self.steps - 1) * n..self.steps * n]
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Runs the recurrence from zero initial state.
pub fn lstm_forward(
    w: LstmWeights<'_>,
    input: LstmInput<'_>,
    steps: usize,
    batch: usize,
) -> Result<LstmTrace, SeqError> {
    let h = w.hidden;
    let g4 = 4 * h;
    let rows = steps * batch;
    let mut gates = vec![0.0; rows * g4];
    match input {
        LstmInput::Sequence(x) => {
            if x.len() != rows * w.input {
                return Err(SeqError::Shape(format!(
                    "lstm input has {} values, expected {steps}x{batch}x{}",
                    x.len(),
                    w.input
                )));
            }
            gemm(Op::N, Op::N, rows, w.input, g4, x, w.kernel, 0.0, &mut gates);
        }
        LstmInput::Repeated(z) => {
            if z.len() != batch * w.input {
                return Err(SeqError::Shape(format!(
                    "repeated lstm input has {} values, expected {batch}x{}",
                    z.len(),
                    w.input
                )));
            }
            if steps > 0 {
                let (first, rest) = gates.split_at_mut(batch * g4);
                gemm(Op::N, Op::N, batch, w.input, g4, z, w.kernel, 0.0, first);
                for chunk in rest.chunks_exact_mut(batch * g4) {
                    chunk.copy_from_slice(first);
                }
            }
        }
    }
    for row in gates.chunks_exact_mut(g4) {
        row.iter_mut().zip(w.bias).for_each(|(v, b)| *v += b);
    }

    let mut cells = vec![0.0; rows * h];
    let mut tanh_cells = vec![0.0; rows * h];
    let mut outputs = vec![0.0; rows * h];
    let bh = batch * h;
    for t in 0..steps {
        let gate_t = &mut gates[t * batch * g4..(t + 1) * batch * g4];
        if t > 0 {
            let prev = &outputs[(t - 1) * bh..t * bh];
            gemm(Op::N, Op::N, batch, h, g4, prev, w.recurrent, 1.0, gate_t);
        }
        for b in 0..batch {
            let gr = &mut gate_t[b * g4..(b + 1) * g4];
            for j in 0..h {
                gr[j] = sigmoid(gr[j]);
                gr[h + j] = sigmoid(gr[h + j]);
                gr[2 * h + j] = gr[2 * h + j].tanh();
                gr[3 * h + j] = sigmoid(gr[3 * h + j]);
            }
            let idx = t * bh + b * h;
            for j in 0..h {
                let c_prev = if t > 0 { cells[idx - bh + j] } else { 0.0 };
                let c = gr[h + j] * c_prev + gr[j] * gr[2 * h + j];
                let tc = c.tanh();
                cells[idx + j] = c;
                tanh_cells[idx + j] = tc;
                outputs[idx + j] = gr[3 * h + j] * tc;
            }
        }
    }
    Ok(LstmTrace {
        steps,
        batch,
        hidden: h,
        gates,
        cells,
        tanh_cells,
        outputs,
    })
}

/// Backpropagates `d_outputs` (gradient w.r.t. every `h_t`, consumed in place),
/// accumulating parameter gradients into `grads`.
///
/// Returns the input gradient when `want_input` is set: `steps·batch × input`
/// for a sequence, `batch × input` (summed over steps) for a repeated input.
pub fn lstm_backward(
    w: LstmWeights<'_>,
    trace: &LstmTrace,
    input: LstmInput<'_>,
    d_outputs: &mut [f64],
    grads: LstmGrads<'_>,
    want_input: bool,
) -> Option<Vec<f64>> {
    let h = w.hidden;
    let g4 = 4 * h;
    let steps = trace.steps;
    let batch = trace.batch;
    let bh = batch * h;
    let rows = steps * batch;
    debug_assert_eq!(d_outputs.len(), rows * h);

    let mut d_pre = vec![0.0; rows * g4];
    let mut dc_next = vec![0.0; bh];
    for t in (0..steps).rev() {
        {
            let gate_t = &trace.gates[t * batch * g4..(t + 1) * batch * g4];
            let dp_t = &mut d_pre[t * batch * g4..(t + 1) * batch * g4];
            for b in 0..batch {
                let gr = &gate_t[b * g4..(b + 1) * g4];
                let dp = &mut dp_t[b * g4..(b + 1) * g4];
                let idx = t * bh + b * h;
                for j in 0..h {
                    let i_g = gr[j];
                    let f_g = gr[h + j];
                    let c_g = gr[2 * h + j];
                    let o_g = gr[3 * h + j];
                    let tc = trace.tanh_cells[idx + j];
                    let dh = d_outputs[idx + j];
                    let d_o = dh * tc;
                    let dc = dc_next[b * h + j] + dh * o_g * (1.0 - tc * tc);
                    let c_prev = if t > 0 { trace.cells[idx - bh + j] } else { 0.0 };
                    dp[j] = dc * c_g * i_g * (1.0 - i_g);
                    dp[h + j] = dc * c_prev * f_g * (1.0 - f_g);
                    dp[2 * h + j] = dc * i_g * (1.0 - c_g * c_g);
                    dp[3 * h + j] = d_o * o_g * (1.0 - o_g);
                    dc_next[b * h + j] = dc * f_g;
                }
            }
        }
        if t > 0 {
            let dp_t = &d_pre[t * batch * g4..(t + 1) * batch * g4];
            let dh_prev = &mut d_outputs[(t - 1) * bh..t * bh];
            gemm(Op::N, Op::T, batch, g4, h, dp_t, w.recurrent, 1.0, dh_prev);
        }
    }

    if steps > 1 {
        let prev = &trace.outputs[..(steps - 1) * bh];
        let dp = &d_pre[batch * g4..];
        gemm(
            Op::T,
            Op::N,
            h,
            (steps - 1) * batch,
            g4,
            prev,
            dp,
            1.0,
            grads.recurrent,
        );
    }
    for row in d_pre.chunks_exact(g4) {
        grads.bias.iter_mut().zip(row).for_each(|(g, d)| *g += d);
    }

    match input {
        LstmInput::Sequence(x) => {
            gemm(Op::T, Op::N, w.input, rows, g4, x, &d_pre, 1.0, grads.kernel);
            want_input.then(|| {
                let mut dx = vec![0.0; rows * w.input];
                gemm(Op::N, Op::T, rows, g4, w.input, &d_pre, w.kernel, 0.0, &mut dx);
                dx
            })
        }
        LstmInput::Repeated(z) => {
            let mut summed = vec![0.0; batch * g4];
            for chunk in d_pre.chunks_exact(batch * g4) {
                summed.iter_mut().zip(chunk).for_each(|(s, d)| *s += d);
            }
            gemm(Op::T, Op::N, w.input, batch, g4, z, &summed, 1.0, grads.kernel);
            want_input.then(|| {
                let mut dz = vec![0.0; batch * w.input];
                gemm(Op::N, Op::T, batch, g4, w.input, &summed, w.kernel, 0.0, &mut dz);
                dz
            })
        }
    }
}
