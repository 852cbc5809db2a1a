//! Central finite-difference verification of analytic gradients.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::Instance;
use crate::ddouble::DoubleDouble;
use crate::encoding::HiddenStates;
use crate::error::Result;
use crate::model::Model;
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::tensor::cast_vec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub step: f64,
    pub tol: f64,
    /// Coordinates sampled per tensor; smaller tensors are checked in full.
    pub coords_per_tensor: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig { step: 1e-5, tol: 1e-4, coords_per_tensor: 32, seed: 0 }
    }
}

/// `|a − f| / max(|a|, |f|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// `(f(x + h) − f(x − h)) / 2h`.
pub fn central_difference(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    /// Coordinates where a hinge, negative choice or probability floor
    /// switches within `±step`; the loss has a kink there.
    pub skipped: Vec<usize>,
    pub max_rel_error: f64,
    pub worst_coordinate: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub tol: f64,
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn passes(&self) -> bool {
        self.tensors.iter().all(|t| t.max_rel_error <= self.tol)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<10} {:>8} {:>8} {:>14}\n", "tensor", "checked", "skipped", "max_rel_err");
        for t in &self.tensors {
            let mark = if t.max_rel_error <= self.tol { "ok" } else { "FAIL" };
            s += &format!(
                "{:<10} {:>8} {:>8} {:>14.3e} {mark}\n",
                t.name,
                t.checked,
                t.skipped.len(),
                t.max_rel_error
            );
        }
        s
    }
}

type Signature = Vec<(bool, Option<usize>, bool)>;

/// Compares the analytic gradient of the joint loss on one batch with central
/// differences, tensor by tensor.
///
/// The perturbed losses are evaluated in [`DoubleDouble`], so the difference
/// quotient carries truncation error only; `f64` rounding of an `O(1)` loss
/// would otherwise add noise near `1e-11` to every coordinate.
#[allow(clippy::too_many_arguments)]
pub fn grad_check<T: Scalar>(
    model: &Model<T>,
    items: &[(usize, &Instance)],
    class_attrs: &[Vec<T>],
    states: Option<&HiddenStates>,
    gamma: T,
    alpha: T,
    config: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let grads = model.gradients(items, class_attrs, states, gamma, alpha)?;
    let analytic: Vec<(&'static str, Vec<T>)> = grads.tensors().into_iter().map(|(n, t)| (n, t.to_vec())).collect();
    let (base_report, base_batch) = model.batch_loss(items, class_attrs, states, gamma, alpha)?;
    let analytic_sig = base_report.kink_signature(&base_batch);

    let hp: Model<DoubleDouble> = model.cast();
    let hp_attrs: Vec<Vec<DoubleDouble>> = class_attrs.iter().map(|a| cast_vec(a)).collect();
    let (hp_gamma, hp_alpha) = (DoubleDouble::of(gamma.as_f64()), DoubleDouble::of(alpha.as_f64()));
    let eval = |m: &Model<DoubleDouble>| -> Result<(DoubleDouble, Signature)> {
        let (report, batch) = m.batch_loss(items, &hp_attrs, states, hp_gamma, hp_alpha)?;
        Ok((report.total, report.kink_signature(&batch)))
    };
    let (_, base_sig) = eval(&hp)?;

    let mut rng = SeededRng::new(config.seed);
    let h = model.config.hidden_size;
    let used_rows: BTreeSet<usize> = items
        .iter()
        .flat_map(|(_, inst)| inst.tokens.iter().map(|t| model.vocab.id(t)))
        .collect();
    let step = DoubleDouble::of(config.step);

    let mut tensors = Vec::new();
    for (ti, (name, grad)) in analytic.iter().enumerate() {
        let candidates: Vec<usize> = if *name == "embedding" {
            used_rows.iter().flat_map(|&r| r * h..(r + 1) * h).collect()
        } else {
            (0..grad.len()).collect()
        };
        let k = config.coords_per_tensor.min(candidates.len());
        let mut coords: Vec<usize> = rng.sample_indices(candidates.len(), k).into_iter().map(|p| candidates[p]).collect();
        coords.sort_unstable();

        let mut check = TensorCheck {
            name: name.to_string(),
            checked: 0,
            skipped: Vec::new(),
            max_rel_error: 0.0,
            worst_coordinate: None,
        };
        for c in coords {
            let probe = |delta: DoubleDouble| -> Result<(DoubleDouble, Signature)> {
                let mut m = hp.clone();
                {
                    let mut ts = m.trainable_tensors_mut(states);
                    let x = &mut ts[ti].1[c];
                    *x = *x + delta;
                }
                eval(&m)
            };
            let (plus, sig_plus) = probe(step)?;
            let (minus, sig_minus) = probe(-step)?;
            if sig_plus != base_sig || sig_minus != base_sig || analytic_sig != base_sig {
                check.skipped.push(c);
                continue;
            }
            let numeric = ((plus - minus) / (step + step)).as_f64();
            let err = relative_error(grad[c].as_f64(), numeric);
            check.checked += 1;
            if err > check.max_rel_error || check.worst_coordinate.is_none() {
                check.max_rel_error = check.max_rel_error.max(err);
                check.worst_coordinate = Some(c);
            }
        }
        tensors.push(check);
    }
    Ok(GradCheckReport { tol: config.tol, tensors })
}
