//! Per-feature influence of a trained reward model.
//!
//! For each feature i, the raw influence is the symmetric finite difference
//! `(f(x + delta e_i) - f(x - delta e_i)) / (2 delta)` averaged over
//! evaluation points drawn from the feature domain (shrunk by `delta` per
//! axis so perturbed points stay inside bounds). The normalized report
//! divides by the sum of absolute raw influences, so entries sum to one in
//! magnitude while keeping the sign of locally negative sensitivities.

use crate::error::{Error, Result};
use crate::reward::RewardNet;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Sampling {
    /// Uniform draws over the shrunk feature box.
    MonteCarloUniform,
    /// Full cartesian grid with this many points per axis.
    FullGrid { points_per_axis: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceConfig {
    pub delta: f64,
    /// Number of Monte Carlo points (ignored for the full grid).
    pub sample_count: usize,
    pub sampling: Sampling,
    pub seed: u64,
}

impl Default for InfluenceConfig {
    fn default() -> Self {
        InfluenceConfig {
            delta: 0.1,
            sample_count: 8192,
            sampling: Sampling::MonteCarloUniform,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceReport {
    /// Mean symmetric difference quotient per feature.
    pub raw: Vec<f64>,
    /// `raw / sum(|raw|)`; entries sum to 1 when all raw values are positive.
    pub normalized: Vec<f64>,
    /// Evaluation points actually used.
    pub sample_count: usize,
}

impl InfluenceReport {
    pub fn to_csv(&self, feature_names: &[String]) -> String {
        let mut out = String::from("feature,raw,normalized\n");
        for ((name, raw), norm) in feature_names.iter().zip(&self.raw).zip(&self.normalized) {
            out.push_str(&format!("{name},{raw},{norm}\n"));
        }
        out
    }
}

/// Kahan-compensated accumulator; keeps reductions order-stable well below
/// the 1e-12 reproducibility bound.
#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, value: f64) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Computes per-feature influence of `model` under `config`.
pub fn feature_influence(model: &RewardNet, config: &InfluenceConfig) -> Result<InfluenceReport> {
    let schema = model.schema();
    let n = schema.len();
    if config.delta.is_nan() || config.delta <= 0.0 || !config.delta.is_finite() {
        return Err(Error::Config("delta must be positive and finite".into()));
    }
    if config.delta >= schema.min_range() / 2.0 {
        return Err(Error::Config(format!(
            "delta out of range: {} must be below half the smallest feature range ({})",
            config.delta,
            schema.min_range() / 2.0
        )));
    }

    let points = evaluation_points(model, config)?;
    let count = points.len();
    let mut acc = vec![Kahan::default(); n];
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    for x in &points {
        for i in 0..n {
            plus.copy_from_slice(x);
            minus.copy_from_slice(x);
            plus[i] = x[i] + config.delta;
            minus[i] = x[i] - config.delta;
            let diff = model.forward_unchecked(&plus) - model.forward_unchecked(&minus);
            acc[i].add(diff);
        }
    }

    let raw: Vec<f64> = acc
        .iter()
        .map(|k| k.sum / (2.0 * config.delta * count as f64))
        .collect();
    let total: f64 = raw.iter().map(|d| d.abs()).sum();
    if total == 0.0 {
        return Err(Error::Numeric("zero total influence".into()));
    }
    let normalized: Vec<f64> = raw.iter().map(|d| d / total).collect();
    Ok(InfluenceReport {
        raw,
        normalized,
        sample_count: count,
    })
}

fn evaluation_points(model: &RewardNet, config: &InfluenceConfig) -> Result<Vec<Vec<f64>>> {
    let schema = model.schema();
    let n = schema.len();
    let lo: Vec<f64> = schema
        .features()
        .iter()
        .map(|f| f.min + config.delta)
        .collect();
    let hi: Vec<f64> = schema
        .features()
        .iter()
        .map(|f| f.max - config.delta)
        .collect();
    match &config.sampling {
        Sampling::MonteCarloUniform => {
            if config.sample_count == 0 {
                return Err(Error::Config("sample_count must be positive".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut points = Vec::with_capacity(config.sample_count);
            for _ in 0..config.sample_count {
                let x: Vec<f64> = (0..n).map(|i| rng.gen_range(lo[i]..hi[i])).collect();
                points.push(x);
            }
            Ok(points)
        }
        Sampling::FullGrid { points_per_axis } => {
            let p = *points_per_axis;
            if p < 2 {
                return Err(Error::Config("points_per_axis must be at least 2".into()));
            }
            let total = p.checked_pow(n as u32).ok_or_else(|| {
                Error::Config(format!("grid {p}^{n} overflows; use Monte Carlo sampling"))
            })?;
            if total > 2_000_000 {
                return Err(Error::Config(format!(
                    "grid {p}^{n} = {total} points is too large; use Monte Carlo sampling"
                )));
            }
            let axes: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..p)
                        .map(|k| lo[i] + (hi[i] - lo[i]) * k as f64 / (p - 1) as f64)
                        .collect()
                })
                .collect();
            let mut points = Vec::with_capacity(total);
            let mut idx = vec![0usize; n];
            loop {
                points.push((0..n).map(|i| axes[i][idx[i]]).collect());
                // Mixed-radix increment.
                let mut d = n;
                loop {
                    if d == 0 {
                        return Ok(points);
                    }
                    d -= 1;
                    idx[d] += 1;
                    if idx[d] < p {
                        break;
                    }
                    idx[d] = 0;
                }
            }
        }
    }
}
