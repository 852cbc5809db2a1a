//! Joint objective: hinge ranking over in-batch negatives plus seen-relation
//! cross entropy, with exact subgradients.
//!
//! ```text
//! L = (1 − α) Σ_i max(0, γ − a_i·â_i + max_{j: y_j ≠ y_i} a_i·â_j)
//!   +  α      Σ_i −log p_i[y_i]
//! ```

use crate::error::{Error, Result};
use crate::head::{self, ForwardTrace, HeadParams};
use crate::scalar::{dot, Scalar};
use crate::tensor::Matrix;

/// Smallest probability fed to `log` in the cross-entropy term.
pub const PROB_FLOOR: f64 = 1e-12;

/// Forward traces of one mini-batch with each instance's frozen attribute
/// vector and seen-class label.
#[derive(Clone, Debug)]
pub struct Batch<T> {
    pub traces: Vec<ForwardTrace<T>>,
    pub attrs: Vec<Vec<T>>,
    pub labels: Vec<usize>,
}

impl<T: Scalar> Batch<T> {
    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    fn check(&self) -> Result<()> {
        if self.traces.is_empty() {
            return Err(Error::Invalid("empty batch".into()));
        }
        if self.attrs.len() != self.len() || self.labels.len() != self.len() {
            return Err(Error::Shape(format!(
                "batch has {} traces, {} attribute rows, {} labels",
                self.len(),
                self.attrs.len(),
                self.labels.len()
            )));
        }
        for (i, (t, a)) in self.traces.iter().zip(&self.attrs).enumerate() {
            if t.a_hat.len() != a.len() {
                return Err(Error::Shape(format!(
                    "instance {i}: embedding length {} != attribute length {}",
                    t.a_hat.len(),
                    a.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarginOutput<T> {
    pub value: T,
    pub per_instance: Vec<T>,
    /// Hardest negative per instance; `None` when the batch holds no other label.
    pub argmax_negative: Vec<Option<usize>>,
}

/// Hinge ranking term. Ties among negatives go to the lowest batch index.
pub fn margin_ranking_loss<T: Scalar>(batch: &Batch<T>, gamma: T) -> MarginOutput<T> {
    let n = batch.len();
    let mut per_instance = Vec::with_capacity(n);
    let mut argmax_negative = Vec::with_capacity(n);
    for i in 0..n {
        let a = &batch.attrs[i];
        let mut best: Option<(usize, T)> = None;
        for j in (0..n).filter(|&j| batch.labels[j] != batch.labels[i]) {
            let s = dot(a, &batch.traces[j].a_hat);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((j, s));
            }
        }
        let term = match best {
            Some((_, neg)) => hinge(gamma - dot(a, &batch.traces[i].a_hat) + neg),
            None => T::zero(),
        };
        per_instance.push(term);
        argmax_negative.push(best.map(|(j, _)| j));
    }
    MarginOutput { value: per_instance.iter().copied().sum(), per_instance, argmax_negative }
}

// `max` would turn NaN into the other operand and hide a diverged model.
fn hinge<T: Scalar>(x: T) -> T {
    if x < T::zero() { T::zero() } else { x }
}

/// `−log(max(p[label], 1e-12))`. NaN propagates.
pub fn cross_entropy<T: Scalar>(probs: &[T], label: usize) -> Result<T> {
    let &p = probs.get(label).ok_or_else(|| {
        Error::Invalid(format!("label {label} out of range for {} classes", probs.len()))
    })?;
    let floor = T::lit(PROB_FLOOR);
    Ok(-(if p < floor { floor } else { p }).ln())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossReport<T> {
    pub margin_term: T,
    pub ce_term: T,
    pub total: T,
    pub per_instance_margin: Vec<T>,
    pub argmax_negative: Vec<Option<usize>>,
}

impl<T: Scalar> LossReport<T> {
    /// Which piece of each piecewise term is in effect: hinge active, chosen
    /// negative, probability floor hit. Equal signatures at two parameter
    /// points mean the loss is smooth between them.
    pub fn kink_signature(&self, batch: &Batch<T>) -> Vec<(bool, Option<usize>, bool)> {
        let floor = T::lit(PROB_FLOOR);
        self.per_instance_margin
            .iter()
            .zip(&self.argmax_negative)
            .zip(batch.traces.iter().zip(&batch.labels))
            .map(|((&m, &j), (t, &y))| (m > T::zero(), j, t.probs[y] < floor))
            .collect()
    }
}

pub fn joint_loss<T: Scalar>(batch: &Batch<T>, gamma: T, alpha: T) -> Result<LossReport<T>> {
    batch.check()?;
    if !(alpha >= T::zero() && alpha <= T::one()) {
        return Err(Error::Config(format!("alpha must be in [0, 1], got {alpha}")));
    }
    let margin = margin_ranking_loss(batch, gamma);
    let mut ce_term = T::zero();
    for (t, &y) in batch.traces.iter().zip(&batch.labels) {
        ce_term = ce_term + cross_entropy(&t.probs, y)?;
    }
    Ok(LossReport {
        margin_term: margin.value,
        ce_term,
        total: (T::one() - alpha) * margin.value + alpha * ce_term,
        per_instance_margin: margin.per_instance,
        argmax_negative: margin.argmax_negative,
    })
}

/// Head gradients plus, per instance, the gradient with respect to its
/// hidden-state matrix (for the encoder).
#[derive(Clone, Debug)]
pub struct BatchGrads<T> {
    pub head: HeadParams<T>,
    pub hidden: Vec<Matrix<T>>,
    pub report: LossReport<T>,
}

/// Exact subgradient of [`joint_loss`]. Attribute vectors are constants.
pub fn backward<T: Scalar>(batch: &Batch<T>, params: &HeadParams<T>, gamma: T, alpha: T) -> Result<BatchGrads<T>> {
    let report = joint_loss(batch, gamma, alpha)?;
    let n = batch.len();
    let d = params.w1.rows();
    let n_classes = params.w_star.rows();
    let hinge_weight = T::one() - alpha;

    let mut d_a_hat = vec![vec![T::zero(); d]; n];
    for i in 0..n {
        if report.per_instance_margin[i] <= T::zero() {
            continue;
        }
        let j = report.argmax_negative[i].expect("active hinge has a negative");
        for (k, &a) in batch.attrs[i].iter().enumerate() {
            let g = hinge_weight * a;
            d_a_hat[i][k] = d_a_hat[i][k] - g;
            d_a_hat[j][k] = d_a_hat[j][k] + g;
        }
    }

    let floor = T::lit(PROB_FLOOR);
    let mut grads = HeadParams::zeros(params.dims());
    let mut hidden = Vec::with_capacity(n);
    for (i, trace) in batch.traces.iter().enumerate() {
        let y = batch.labels[i];
        if y >= n_classes || trace.probs.len() != n_classes {
            return Err(Error::Shape(format!("instance {i}: label {y} with {n_classes} classes")));
        }
        let d_logits: Vec<T> = if trace.probs[y] < floor {
            vec![T::zero(); n_classes]
        } else {
            trace
                .probs
                .iter()
                .enumerate()
                .map(|(c, &p)| alpha * (if c == y { p - T::one() } else { p }))
                .collect()
        };
        hidden.push(head::backward(trace, &d_a_hat[i], &d_logits, params, &mut grads));
    }
    Ok(BatchGrads { head: grads, hidden, report })
}
