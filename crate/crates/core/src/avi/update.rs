use std::collections::BTreeMap;

use crate::exec;
use crate::model::Mdp;
use crate::rollout::{
    bellman_update, dot, FeatureMap, LinearValueFn, MdpConfig, RolloutError, Sample,
};

/// `3 / (1 + k/100)`.
pub fn learning_rate(k: usize) -> f64 {
    3.0 / (1.0 + k as f64 / 100.0)
}

/// Sigmoidal step compression: near 1 for small average errors, 1/2 when
/// `|b_avg| = r_scale`, and towards 0 beyond.
pub fn kappa(b_avg: f64, r_scale: f64) -> f64 {
    1.0 / (1.0 + (-4.0 * (1.0 - b_avg.abs() / r_scale)).exp())
}

/// -1, 0 or +1; zero is its own class.
pub fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Feature values and Bellman error of every training state.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub phi: Vec<Vec<f64>>,
    pub errors: Vec<f64>,
}

/// `U(V)(s) - V(s)` for each state, plus `Φ(s)`. States must be live.
pub fn residuals<M: Mdp, F: FeatureMap<M>>(
    v: &LinearValueFn<F>,
    samples: &[Sample<M>],
    cfg: &MdpConfig,
) -> Result<Residuals, RolloutError> {
    let rows = exec::par_map_slice(samples, |s| {
        let phi = v.features.eval(&*s.mdp, &s.state);
        let u = bellman_update(v, &*s.mdp, &s.state, cfg)?;
        let e = u - dot(&v.weights, &phi);
        Ok((phi, e))
    });
    let mut out = Residuals {
        phi: Vec::with_capacity(rows.len()),
        errors: Vec::with_capacity(rows.len()),
    };
    for r in rows {
        let (phi, e) = r?;
        out.phi.push(phi);
        out.errors.push(e);
    }
    Ok(out)
}

pub fn statewise_errors<M: Mdp, F: FeatureMap<M>>(
    v: &LinearValueFn<F>,
    samples: &[Sample<M>],
    cfg: &MdpConfig,
) -> Result<Vec<f64>, RolloutError> {
    residuals(v, samples, cfg).map(|r| r.errors)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub b_avg: f64,
    pub kappa: f64,
}

/// Per-feature step `(1/n_i) Σ_j α f_i(s_j) e_j`, zero where `n_i = 0`.
pub fn raw_step(r: &Residuals, num_features: usize, alpha: f64) -> Vec<f64> {
    let mut sum = vec![0.0; num_features];
    let mut n = vec![0usize; num_features];
    for (phi, e) in r.phi.iter().zip(&r.errors) {
        for (i, &f) in phi.iter().enumerate() {
            if f != 0.0 {
                n[i] += 1;
                sum[i] += alpha * f * e;
            }
        }
    }
    sum.iter()
        .zip(&n)
        .map(|(s, &n)| if n == 0 { 0.0 } else { s / n as f64 })
        .collect()
}

/// New weights from one batch. With `r_scale = Some(r)` the step is scaled by
/// `kappa(B_avg, r)`; with `None` it is applied as is.
pub fn apply_update(
    weights: &[f64],
    r: &Residuals,
    alpha: f64,
    r_scale: Option<f64>,
) -> (Vec<f64>, UpdateStats) {
    let b_avg = if r.errors.is_empty() {
        0.0
    } else {
        r.errors.iter().sum::<f64>() / r.errors.len() as f64
    };
    let k = r_scale.map_or(1.0, |rs| kappa(b_avg, rs));
    let step = raw_step(r, weights.len(), alpha);
    let w = weights.iter().zip(&step).map(|(w, d)| w + k * d).collect();
    (w, UpdateStats { b_avg, kappa: k })
}

/// Replaces any proposed weight whose sign differs from its lock with the
/// current weight.
pub fn enforce_locks(current: &[f64], proposed: &mut [f64], locks: &BTreeMap<usize, i8>) {
    for (&i, &s) in locks {
        if sign(proposed[i]) != s {
            proposed[i] = current[i];
        }
    }
}

/// One weight update over a training set, ignoring locks.
pub fn weight_update<M: Mdp, F: FeatureMap<M> + Clone>(
    v: &LinearValueFn<F>,
    samples: &[Sample<M>],
    alpha: f64,
    cfg: &MdpConfig,
    r_scale: Option<f64>,
) -> Result<(LinearValueFn<F>, UpdateStats), RolloutError> {
    let r = residuals(v, samples, cfg)?;
    let (w, stats) = apply_update(&v.weights, &r, alpha, r_scale);
    Ok((v.with_weights(w), stats))
}
