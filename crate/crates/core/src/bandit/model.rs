use std::collections::HashSet;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::store::{SampleId, SampleStore};
use crate::error::Result;
use crate::kernels::{cross, gram, KernelKind, KernelParams};
use crate::linalg::Cholesky;
use crate::scenario::Context;

/// Kernel-ridge estimate of the reward at a query context.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub mean: f64,
    /// Confidence width, in `[0, lambda_k^{-1/2}]`.
    pub deviation: f64,
}

/// Posterior of the reward at `query` given samples `(contexts, rewards)`:
/// mean `k^T (K + lambda I)^{-1} R` and deviation
/// `lambda^{-1/2} sqrt(kappa(x, x) - k^T (K + lambda I)^{-1} k)`.
pub fn posterior(
    query: &Context,
    contexts: &[Context],
    rewards: &[f64],
    params: &KernelParams,
    kind: KernelKind,
) -> Result<Posterior> {
    let lambda = params.lambda_k;
    let mut a = gram(contexts, params, kind);
    for i in 0..a.nrows() {
        a[(i, i)] += lambda;
    }
    let chol = Cholesky::factor(&a, lambda)?;
    let k = cross(query, contexts, params, kind);
    let weights = chol.solve(rewards);
    Ok(finish(query, &chol, &k, &weights, params, kind))
}

fn finish(
    query: &Context,
    chol: &Cholesky,
    k: &DVector<f64>,
    weights: &DVector<f64>,
    params: &KernelParams,
    kind: KernelKind,
) -> Posterior {
    let prior = params.eval(kind, query, query);
    let v = chol.forward(k.as_slice());
    let variance = (prior - v.norm_squared()).clamp(0.0, prior);
    Posterior {
        mean: k.dot(weights),
        deviation: (variance / params.lambda_k).sqrt(),
    }
}

/// Cached factorization over one sample store, updated incrementally as the
/// store gains and loses samples.
#[derive(Debug, Clone)]
pub struct KernelModel {
    kind: KernelKind,
    params: KernelParams,
    ids: Vec<SampleId>,
    contexts: Vec<Context>,
    rewards: Vec<f64>,
    chol: Cholesky,
    weights: Option<DVector<f64>>,
}

impl KernelModel {
    pub fn new(kind: KernelKind, params: KernelParams) -> Self {
        Self {
            kind,
            params,
            ids: Vec::new(),
            contexts: Vec::new(),
            rewards: Vec::new(),
            chol: Cholesky::new(params.lambda_k),
            weights: None,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn factor(&self) -> &Cholesky {
        &self.chol
    }

    /// Brings the factorization in line with `store`.
    pub fn sync(&mut self, store: &SampleStore) -> Result<()> {
        let samples = store.samples();
        if self.ids.len() == samples.len() && self.ids.iter().zip(samples).all(|(a, s)| *a == s.id) {
            return Ok(());
        }
        self.weights = None;
        let current: HashSet<SampleId> = samples.iter().map(|s| s.id).collect();
        let stale: Vec<usize> = (0..self.ids.len()).filter(|&i| !current.contains(&self.ids[i])).collect();
        let kept = self.ids.len() - stale.len();
        let prefix_ok = {
            let mut kept_ids = self.ids.iter().filter(|id| current.contains(id));
            samples.iter().take(kept).all(|s| kept_ids.next() == Some(&s.id))
        };
        if !prefix_ok || stale.len() * 4 > self.ids.len().max(1) {
            self.rebuild(store)?;
            return Ok(());
        }
        for &i in stale.iter().rev() {
            self.chol.remove(i)?;
            self.ids.remove(i);
            self.contexts.remove(i);
            self.rewards.remove(i);
        }
        for s in &samples[kept..] {
            self.append(s.id, s.context, s.reward)?;
        }
        Ok(())
    }

    fn rebuild(&mut self, store: &SampleStore) -> Result<()> {
        self.ids.clear();
        self.contexts.clear();
        self.rewards.clear();
        self.chol = Cholesky::new(self.params.lambda_k);
        for s in store.samples() {
            self.append(s.id, s.context, s.reward)?;
        }
        Ok(())
    }

    fn append(&mut self, id: SampleId, context: Context, reward: f64) -> Result<()> {
        let mut column: Vec<f64> = self.contexts.iter().map(|c| self.params.eval(self.kind, &context, c)).collect();
        column.push(self.params.eval(self.kind, &context, &context) + self.params.lambda_k);
        self.chol.push(&column)?;
        self.ids.push(id);
        self.contexts.push(context);
        self.rewards.push(reward);
        Ok(())
    }

    pub fn posterior(&mut self, query: &Context) -> Posterior {
        if self.weights.is_none() {
            self.weights = Some(self.chol.solve(&self.rewards));
        }
        let k = cross(query, &self.contexts, &self.params, self.kind);
        finish(query, &self.chol, &k, self.weights.as_ref().expect("just computed"), &self.params, self.kind)
    }

    /// `log det(I + K/lambda)` over samples `start..` conditioned on the
    /// samples before `start`.
    pub fn conditional_log_det(&self, start: usize) -> f64 {
        let n = self.len();
        let start = start.min(n);
        self.chol.log_det_range(start, n) - (n - start) as f64 * self.params.lambda_k.ln()
    }

    /// `log det(I + K/lambda)` over all samples.
    pub fn log_det(&self) -> f64 {
        self.conditional_log_det(0)
    }

    /// `log det(I + K/lambda)` over samples `start..` alone.
    pub fn marginal_log_det(&self, start: usize) -> Result<f64> {
        let start = start.min(self.len());
        let tail = &self.contexts[start..];
        let mut a = gram(tail, &self.params, self.kind);
        for i in 0..a.nrows() {
            a[(i, i)] += self.params.lambda_k;
        }
        let chol = Cholesky::factor(&a, self.params.lambda_k)?;
        Ok(chol.log_det() - tail.len() as f64 * self.params.lambda_k.ln())
    }
}
