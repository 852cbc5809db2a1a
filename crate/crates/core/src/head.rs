//! Sentence-embedding head and seen-relation classifier.
//!
//! ```text
//! H0'  = W0 tanh(H0) + b0
//! He_c = We tanh(mean(H[q..=r])) + be        (c = 1, 2; shared We, be)
//! â    = W1 tanh([H0' ; He_1 ; He_2]) + b1
//! p    = softmax(W* tanh(â) + b*)
//! ```

use serde::{Deserialize, Serialize};

use crate::dataset::Span;
use crate::encoding::EncodedSentence;
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::scalar::{tanh_vec, Scalar};
use crate::tensor::{cast_vec, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadDims {
    pub hidden: usize,
    pub d_attr: usize,
    pub n_classes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadParams<T> {
    pub w0: Matrix<T>,
    pub b0: Vec<T>,
    pub we: Matrix<T>,
    pub be: Vec<T>,
    pub w1: Matrix<T>,
    pub b1: Vec<T>,
    pub w_star: Matrix<T>,
    pub b_star: Vec<T>,
}

pub const HEAD_TENSORS: [&str; 8] = ["w0", "b0", "we", "be", "w1", "b1", "w_star", "b_star"];

impl<T: Scalar> HeadParams<T> {
    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn init(dims: HeadDims, rng: &mut SeededRng) -> Self {
        let HeadDims { hidden: h, d_attr: d, n_classes: n } = dims;
        let r = rng.inner();
        HeadParams {
            w0: Matrix::uniform_fan_in(h, h, r),
            b0: vec![T::zero(); h],
            we: Matrix::uniform_fan_in(h, h, r),
            be: vec![T::zero(); h],
            w1: Matrix::uniform_fan_in(d, 3 * h, r),
            b1: vec![T::zero(); d],
            w_star: Matrix::uniform_fan_in(n, d, r),
            b_star: vec![T::zero(); n],
        }
    }

    pub fn zeros(dims: HeadDims) -> Self {
        let HeadDims { hidden: h, d_attr: d, n_classes: n } = dims;
        HeadParams {
            w0: Matrix::zeros(h, h),
            b0: vec![T::zero(); h],
            we: Matrix::zeros(h, h),
            be: vec![T::zero(); h],
            w1: Matrix::zeros(d, 3 * h),
            b1: vec![T::zero(); d],
            w_star: Matrix::zeros(n, d),
            b_star: vec![T::zero(); n],
        }
    }

    pub fn cast<U: Scalar>(&self) -> HeadParams<U> {
        HeadParams {
            w0: self.w0.cast(),
            b0: cast_vec(&self.b0),
            we: self.we.cast(),
            be: cast_vec(&self.be),
            w1: self.w1.cast(),
            b1: cast_vec(&self.b1),
            w_star: self.w_star.cast(),
            b_star: cast_vec(&self.b_star),
        }
    }

    pub fn dims(&self) -> HeadDims {
        HeadDims { hidden: self.w0.rows(), d_attr: self.w1.rows(), n_classes: self.w_star.rows() }
    }

    /// Checks every tensor against the dimensions implied by `w0`, `w1` and `w_star`.
    pub fn check_shapes(&self) -> Result<()> {
        let HeadDims { hidden: h, d_attr: d, n_classes: n } = self.dims();
        let expect = [
            ("w0", self.w0.shape(), (h, h)),
            ("we", self.we.shape(), (h, h)),
            ("w1", self.w1.shape(), (d, 3 * h)),
            ("w_star", self.w_star.shape(), (n, d)),
            ("b0", (self.b0.len(), 1), (h, 1)),
            ("be", (self.be.len(), 1), (h, 1)),
            ("b1", (self.b1.len(), 1), (d, 1)),
            ("b_star", (self.b_star.len(), 1), (n, 1)),
        ];
        for (name, got, want) in expect {
            if got != want {
                return Err(Error::Shape(format!("{name} is {got:?}, expected {want:?}")));
            }
        }
        Ok(())
    }

    pub fn tensors(&self) -> Vec<(&'static str, &[T])> {
        vec![
            ("w0", self.w0.as_slice()),
            ("b0", &self.b0),
            ("we", self.we.as_slice()),
            ("be", &self.be),
            ("w1", self.w1.as_slice()),
            ("b1", &self.b1),
            ("w_star", self.w_star.as_slice()),
            ("b_star", &self.b_star),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [T])> {
        vec![
            ("w0", self.w0.as_mut_slice()),
            ("b0", &mut self.b0),
            ("we", self.we.as_mut_slice()),
            ("be", &mut self.be),
            ("w1", self.w1.as_mut_slice()),
            ("b1", &mut self.b1),
            ("w_star", self.w_star.as_mut_slice()),
            ("b_star", &mut self.b_star),
        ]
    }
}

/// `W0 tanh(H0) + b0`.
pub fn cls_projection<T: Scalar>(h0: &[T], params: &HeadParams<T>) -> Result<Vec<T>> {
    params.w0.affine(&tanh_vec(h0), &params.b0)
}

fn span_mean<T: Scalar>(hidden: &Matrix<T>, span: Span) -> Result<Vec<T>> {
    // token position t lives on row t + 1, after CLS
    if span.is_empty() || span.end + 2 >= hidden.rows() {
        return Err(Error::Shape(format!(
            "span [{}, {}] outside {} token rows",
            span.start,
            span.end,
            hidden.rows().saturating_sub(2)
        )));
    }
    let mut mean = vec![T::zero(); hidden.cols()];
    for t in span.start..=span.end {
        crate::tensor::add_assign(&mut mean, hidden.row(t + 1));
    }
    let inv = T::one() / T::lit(span.len() as f64);
    mean.iter_mut().for_each(|x| *x = *x * inv);
    Ok(mean)
}

/// `We tanh(mean of token rows q..=r) + be`; the same parameters serve both entities.
pub fn entity_pool<T: Scalar>(hidden: &Matrix<T>, span: Span, params: &HeadParams<T>) -> Result<Vec<T>> {
    let mean = span_mean(hidden, span)?;
    params.we.affine(&tanh_vec(&mean), &params.be)
}

/// `W1 tanh(H0' ⊕ He1 ⊕ He2) + b1`, concatenated in that order.
pub fn sentence_embedding<T: Scalar>(h0p: &[T], he1: &[T], he2: &[T], params: &HeadParams<T>) -> Result<Vec<T>> {
    let concat: Vec<T> = h0p.iter().chain(he1).chain(he2).map(|x| x.tanh()).collect();
    params.w1.affine(&concat, &params.b1)
}

/// Max-shifted softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `softmax(W* tanh(â) + b*)`.
pub fn classify_seen<T: Scalar>(a_hat: &[T], params: &HeadParams<T>) -> Result<Vec<T>> {
    Ok(softmax(&params.w_star.affine(&tanh_vec(a_hat), &params.b_star)?))
}

/// Every intermediate of one forward pass, kept for the backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace<T> {
    pub head_span: Span,
    pub tail_span: Span,
    pub hidden_rows: usize,
    pub tanh_h0: Vec<T>,
    pub h0p: Vec<T>,
    pub tanh_mean1: Vec<T>,
    pub tanh_mean2: Vec<T>,
    pub he1: Vec<T>,
    pub he2: Vec<T>,
    /// `tanh(H0' ⊕ He1 ⊕ He2)`
    pub tanh_concat: Vec<T>,
    pub a_hat: Vec<T>,
    pub tanh_a_hat: Vec<T>,
    pub logits: Vec<T>,
    pub probs: Vec<T>,
}

/// Composes the projections above for one sentence.
pub fn forward<T: Scalar>(encoded: &EncodedSentence<T>, head: Span, tail: Span, params: &HeadParams<T>) -> Result<ForwardTrace<T>> {
    let hidden = &encoded.hidden;
    if hidden.cols() != params.w0.cols() {
        return Err(Error::Shape(format!(
            "hidden width {} != head hidden size {}",
            hidden.cols(),
            params.w0.cols()
        )));
    }
    let tanh_h0 = tanh_vec(encoded.cls());
    let h0p = params.w0.affine(&tanh_h0, &params.b0)?;
    let tanh_mean1 = tanh_vec(&span_mean(hidden, head)?);
    let tanh_mean2 = tanh_vec(&span_mean(hidden, tail)?);
    let he1 = params.we.affine(&tanh_mean1, &params.be)?;
    let he2 = params.we.affine(&tanh_mean2, &params.be)?;
    let tanh_concat: Vec<T> = h0p.iter().chain(&he1).chain(&he2).map(|x| x.tanh()).collect();
    let a_hat = params.w1.affine(&tanh_concat, &params.b1)?;
    let tanh_a_hat = tanh_vec(&a_hat);
    let logits = params.w_star.affine(&tanh_a_hat, &params.b_star)?;
    let probs = softmax(&logits);
    Ok(ForwardTrace {
        head_span: head,
        tail_span: tail,
        hidden_rows: hidden.rows(),
        tanh_h0,
        h0p,
        tanh_mean1,
        tanh_mean2,
        he1,
        he2,
        tanh_concat,
        a_hat,
        tanh_a_hat,
        logits,
        probs,
    })
}

/// Pulls `d_a_hat` and `d_logits` back through the head, accumulating into
/// `grads`. Returns the gradient with respect to the hidden-state matrix.
pub fn backward<T: Scalar>(
    trace: &ForwardTrace<T>,
    d_a_hat: &[T],
    d_logits: &[T],
    params: &HeadParams<T>,
    grads: &mut HeadParams<T>,
) -> Matrix<T> {
    let one = T::one();
    let h = params.w0.rows();

    grads.w_star.add_outer(d_logits, &trace.tanh_a_hat);
    crate::tensor::add_assign(&mut grads.b_star, d_logits);
    let mut d_a: Vec<T> = params.w_star.matvec_t(d_logits);
    for ((d, &t), &extra) in d_a.iter_mut().zip(&trace.tanh_a_hat).zip(d_a_hat) {
        *d = *d * (one - t * t) + extra;
    }

    grads.w1.add_outer(&d_a, &trace.tanh_concat);
    crate::tensor::add_assign(&mut grads.b1, &d_a);
    let d_concat: Vec<T> = params
        .w1
        .matvec_t(&d_a)
        .into_iter()
        .zip(&trace.tanh_concat)
        .map(|(d, &t)| d * (one - t * t))
        .collect();
    let (d_h0p, rest) = d_concat.split_at(h);
    let (d_he1, d_he2) = rest.split_at(h);

    let mut d_hidden = Matrix::zeros(trace.hidden_rows, h);

    grads.w0.add_outer(d_h0p, &trace.tanh_h0);
    crate::tensor::add_assign(&mut grads.b0, d_h0p);
    let d_h0 = params.w0.matvec_t(d_h0p);
    for ((dst, d), &t) in d_hidden.row_mut(0).iter_mut().zip(d_h0).zip(&trace.tanh_h0) {
        *dst = d * (one - t * t);
    }

    for (d_he, tanh_mean, span) in [
        (d_he1, &trace.tanh_mean1, trace.head_span),
        (d_he2, &trace.tanh_mean2, trace.tail_span),
    ] {
        grads.we.add_outer(d_he, tanh_mean);
        crate::tensor::add_assign(&mut grads.be, d_he);
        let inv = one / T::lit(span.len() as f64);
        let d_mean: Vec<T> = params
            .we
            .matvec_t(d_he)
            .into_iter()
            .zip(tanh_mean)
            .map(|(d, &t)| d * (one - t * t) * inv)
            .collect();
        for row in span.start..=span.end {
            crate::tensor::add_assign(d_hidden.row_mut(row + 1), &d_mean);
        }
    }
    d_hidden
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn identity_params(h: usize, d: usize, n: usize) -> HeadParams<f64> {
        let mut p = HeadParams::zeros(HeadDims { hidden: h, d_attr: d, n_classes: n });
        p.w0 = Matrix::identity(h);
        p.we = Matrix::identity(h);
        if d == 3 * h {
            p.w1 = Matrix::identity(d);
        }
        p
    }

    fn sentence(rows: &[Vec<f64>]) -> EncodedSentence<f64> {
        EncodedSentence { hidden: Matrix::from_rows(rows).unwrap(), marker: vec![0; rows.len()], token_ids: vec![] }
    }

    #[test]
    fn cls_projection_cases() {
        let mut p = identity_params(2, 6, 2);
        assert_eq!(cls_projection(&[0.0, 0.0], &p).unwrap(), vec![0.0, 0.0]);
        let out = cls_projection(&[1.0, -1.0], &p).unwrap();
        assert_abs_diff_eq!(out[0], 0.76159, epsilon = 1e-5);
        assert_abs_diff_eq!(out[1], -0.76159, epsilon = 1e-5);
        p.b0 = vec![5.0, 5.0];
        let out = cls_projection(&[1.0, -1.0], &p).unwrap();
        assert_abs_diff_eq!(out[0] - 1f64.tanh(), 5.0, epsilon = 1e-12);
        assert!(cls_projection(&[1.0], &p).is_err());
    }

    #[test]
    fn entity_pool_cases() {
        let p = identity_params(2, 6, 2);
        let hidden = Matrix::from_rows(&[vec![9.0, 9.0], vec![0.2, 0.4], vec![0.6, 0.0], vec![9.0, 9.0]]).unwrap();
        let single = entity_pool(&hidden, Span::new(0, 0), &p).unwrap();
        assert_abs_diff_eq!(single[0], 0.19738, epsilon = 1e-5);
        assert_abs_diff_eq!(single[1], 0.37995, epsilon = 1e-5);
        let pair = entity_pool(&hidden, Span::new(0, 1), &p).unwrap();
        assert_abs_diff_eq!(pair[0], 0.37995, epsilon = 1e-5);
        assert_abs_diff_eq!(pair[1], 0.19738, epsilon = 1e-5);
        assert!(entity_pool(&hidden, Span::new(1, 2), &p).is_err());
    }

    #[test]
    fn shared_entity_parameters() {
        let p = HeadParams::<f64>::init(HeadDims { hidden: 3, d_attr: 4, n_classes: 2 }, &mut SeededRng::new(3));
        let s = sentence(&[vec![0.1, 0.2, 0.3], vec![0.4, -0.5, 0.6], vec![0.7, 0.8, -0.9], vec![0.0; 3]]);
        let a = forward(&s, Span::new(1, 1), Span::new(0, 0), &p).unwrap();
        let b = forward(&s, Span::new(0, 0), Span::new(1, 1), &p).unwrap();
        assert_eq!(a.he1, b.he2);
        assert_eq!(a.he2, b.he1);
        assert_eq!(a.he1, entity_pool(&s.hidden, Span::new(1, 1), &p).unwrap());
    }

    #[test]
    fn sentence_embedding_order() {
        let p = identity_params(1, 3, 2);
        assert_eq!(sentence_embedding(&[0.0], &[0.0], &[0.0], &p).unwrap(), vec![0.0; 3]);
        let a = sentence_embedding(&[1.0], &[0.0], &[-1.0], &p).unwrap();
        assert_abs_diff_eq!(a[0], 1f64.tanh(), epsilon = 1e-15);
        assert_abs_diff_eq!(a[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a[2], -(1f64.tanh()), epsilon = 1e-15);
        let swapped = sentence_embedding(&[1.0], &[-1.0], &[0.0], &p).unwrap();
        assert_ne!(a, swapped);
    }

    #[test]
    fn softmax_cases() {
        let p = HeadParams::<f64>::zeros(HeadDims { hidden: 2, d_attr: 3, n_classes: 4 });
        assert_eq!(classify_seen(&[1.0, 2.0, 3.0], &p).unwrap(), vec![0.25; 4]);
        let s = softmax(&[1000.0, 0.0]);
        assert_eq!(s[0], 1.0);
        assert!(s[1] >= 0.0 && s[1] < 1e-300);
        let a = softmax(&[0.3, -1.2, 2.5]);
        let b = softmax(&[100.3, 98.8, 102.5]);
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn forward_composition_and_zero_params() {
        let dims = HeadDims { hidden: 3, d_attr: 5, n_classes: 4 };
        let s = sentence(&[vec![0.1, 0.2, 0.3], vec![0.4, -0.5, 0.6], vec![0.7, 0.8, -0.9], vec![1.0, 0.0, -1.0], vec![0.0; 3]]);
        let mut zero = HeadParams::<f64>::zeros(dims);
        zero.b1 = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let t = forward(&s, Span::new(0, 1), Span::new(2, 2), &zero).unwrap();
        assert_eq!(t.a_hat, zero.b1);
        assert_eq!(t.probs, vec![0.25; 4]);

        let p = HeadParams::<f64>::init(dims, &mut SeededRng::new(8));
        let t = forward(&s, Span::new(0, 1), Span::new(2, 2), &p).unwrap();
        let h0p = cls_projection(s.cls(), &p).unwrap();
        let he1 = entity_pool(&s.hidden, Span::new(0, 1), &p).unwrap();
        let he2 = entity_pool(&s.hidden, Span::new(2, 2), &p).unwrap();
        assert_eq!(t.a_hat, sentence_embedding(&h0p, &he1, &he2, &p).unwrap());
        assert_eq!(t.probs, classify_seen(&t.a_hat, &p).unwrap());
        assert_abs_diff_eq!(t.probs.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        assert_eq!(t, forward(&s, Span::new(0, 1), Span::new(2, 2), &p).unwrap());
    }

    #[test]
    fn a_hat_is_continuous_in_weights() {
        let dims = HeadDims { hidden: 3, d_attr: 4, n_classes: 2 };
        let s = sentence(&[vec![0.1, 0.2, 0.3], vec![0.4, -0.5, 0.6], vec![0.7, 0.8, -0.9], vec![0.0; 3]]);
        let p = HeadParams::<f64>::init(dims, &mut SeededRng::new(5));
        let base = forward(&s, Span::new(0, 0), Span::new(1, 1), &p).unwrap().a_hat;
        let eps = 1e-6;
        let n_tensors = p.tensors().len();
        for ti in 0..n_tensors {
            let mut q = p.clone();
            q.tensors_mut()[ti].1[0] += eps;
            let moved = forward(&s, Span::new(0, 0), Span::new(1, 1), &q).unwrap().a_hat;
            let delta = base.iter().zip(&moved).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(delta <= 10.0 * eps, "tensor {ti}: {delta}");
        }
    }
}
