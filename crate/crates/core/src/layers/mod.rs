//! Differentiable building blocks with explicit forward/backward pairs.
//!
//! Every layer works on batches: a `[batch × features]` tensor per call (per
//! timestep for the LSTM). Parameter gradients come back in the same struct
//! type as the parameters themselves.

mod dense;
mod dropout;
mod lstm;
mod standardizer;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

pub use dense::{dense_backward, dense_forward, DenseCache, DenseGrads, DenseParams};
pub use dropout::{dropout_backward, dropout_forward};
pub use lstm::{
    lstm_backward, lstm_forward, lstm_seq_backward, lstm_seq_forward, LstmCache, LstmParams,
    LstmSeqOutput,
};
pub use standardizer::{Standardizer, STD_FLOOR};

use crate::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A named view of one parameter block.
#[derive(Debug)]
pub struct ParamRef<'a> {
    pub name: String,
    pub tensor: &'a Tensor,
    /// Weight matrices are subject to l1/l2 penalties, biases are not.
    pub regularized: bool,
}

/// Uniform access to the parameter blocks of a layer or model.
///
/// `collect` and `collect_mut` must visit blocks in the same order; that
/// order is also the on-disk order of checkpoints.
pub trait Parameters {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<ParamRef<'a>>);
    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>);

    fn param_refs(&self) -> Vec<ParamRef<'_>> {
        let mut out = Vec::new();
        self.collect("", &mut out);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        self.collect_mut(&mut out);
        out
    }

    fn param_count(&self) -> usize {
        self.param_refs().iter().map(|p| p.tensor.len()).sum()
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        String::from(name)
    } else {
        format!("{prefix}.{name}")
    }
}

/// Glorot/Xavier uniform limit.
pub(crate) fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    libm::sqrt(6.0 / (fan_in + fan_out) as f64)
}
