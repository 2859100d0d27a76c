//! Training-side math: large-margin cosine loss, triplet hinge, their sum,
//! and generalized-mean pooling.
//!
//! These work on plain `f64` slices so they can be checked against numeric
//! differentiation without any tensor machinery.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosfaceParams {
    /// Logit scale.
    pub s: f64,
    /// Additive cosine margin on the target class.
    pub m: f64,
}

impl Default for CosfaceParams {
    fn default() -> Self {
        Self { s: 30.0, m: 0.35 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletParams {
    pub alpha: f64,
}

impl Default for TripletParams {
    fn default() -> Self {
        Self { alpha: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GemExponent {
    Shared(f64),
    PerChannel(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GemParams {
    pub p: GemExponent,
}

impl GemParams {
    pub fn shared(p: f64) -> Self {
        Self {
            p: GemExponent::Shared(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CosfaceOutput {
    pub loss: f64,
    /// `∂loss/∂cosines`, same shape as the input.
    pub grad: Vec<Vec<f64>>,
}

/// Mean over samples of `-log softmax` where the target logit is
/// `s (cos θ_y - m)` and every other logit is `s cos θ_j`.
pub fn cosface_loss(
    cosines: &[Vec<f64>],
    labels: &[usize],
    params: &CosfaceParams,
) -> Result<CosfaceOutput> {
    if cosines.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} cosine rows for {} labels",
            cosines.len(),
            labels.len()
        )));
    }
    if cosines.is_empty() {
        return Err(Error::Param(
            "cosface loss needs at least one sample".into(),
        ));
    }
    if !(params.s > 0.0 && params.s.is_finite()) || !(params.m >= 0.0 && params.m.is_finite()) {
        return Err(Error::Param(format!("invalid cosface params {params:?}")));
    }
    let n = cosines.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(cosines.len());
    for (i, (row, &y)) in cosines.iter().zip(labels).enumerate() {
        if y >= row.len() {
            return Err(Error::Param(format!(
                "sample {i}: label {y} out of range for {} classes",
                row.len()
            )));
        }
        if let Some(c) = row.iter().find(|c| !(-1.0..=1.0).contains(*c)) {
            return Err(Error::Param(format!(
                "sample {i}: cosine {c} outside [-1, 1]"
            )));
        }
        let logits: Vec<f64> = row
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                if j == y {
                    params.s * (c - params.m)
                } else {
                    params.s * c
                }
            })
            .collect();
        let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shifted: Vec<f64> = logits.iter().map(|z| (z - top).exp()).collect();
        let partition: f64 = shifted.iter().sum();
        // When the target holds the max logit, log1p keeps tiny losses exact.
        loss += if logits[y] == top {
            let rest: f64 = shifted
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != y)
                .map(|(_, e)| e)
                .sum();
            rest.ln_1p()
        } else {
            top - logits[y] + partition.ln()
        };
        grad.push(
            shifted
                .iter()
                .enumerate()
                .map(|(j, &e)| {
                    let p = e / partition;
                    let target = if j == y { 1.0 } else { 0.0 };
                    params.s * (p - target) / n
                })
                .collect(),
        );
    }
    Ok(CosfaceOutput {
        loss: loss / n,
        grad,
    })
}

/// `max(d_p - d_n + α, 0)`.
pub fn triplet_loss(d_p: f64, d_n: f64, params: &TripletParams) -> Result<f64> {
    if !(d_p >= 0.0 && d_n >= 0.0) {
        return Err(Error::Param(format!(
            "triplet distances must be non-negative, got d_p={d_p} d_n={d_n}"
        )));
    }
    Ok((d_p - d_n + params.alpha).max(0.0))
}

/// Mean triplet loss over every (anchor, positive, negative) in a labeled
/// square distance matrix.
pub fn batch_triplet_loss(
    dist: &[Vec<f64>],
    labels: &[usize],
    params: &TripletParams,
) -> Result<f64> {
    let n = labels.len();
    if dist.len() != n || dist.iter().any(|r| r.len() != n) {
        return Err(Error::Shape(format!("distance matrix must be {n}x{n}")));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for a in 0..n {
        for p in (0..n).filter(|&p| p != a && labels[p] == labels[a]) {
            for neg in (0..n).filter(|&x| labels[x] != labels[a]) {
                total += triplet_loss(dist[a][p], dist[a][neg], params)?;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::Param("no valid triplets in batch".into()));
    }
    Ok(total / count as f64)
}

pub fn total_loss(l_id: f64, l_triplet: f64) -> f64 {
    l_id + l_triplet
}

/// Power mean of each channel's activations, clamped at zero first.
pub fn gem_pool(channels: &[Vec<f64>], params: &GemParams) -> Result<Vec<f64>> {
    let exponents: Vec<f64> = match &params.p {
        GemExponent::Shared(p) => vec![*p; channels.len()],
        GemExponent::PerChannel(ps) => {
            if ps.len() != channels.len() {
                return Err(Error::Shape(format!(
                    "{} exponents for {} channels",
                    ps.len(),
                    channels.len()
                )));
            }
            ps.clone()
        }
    };
    channels
        .iter()
        .zip(exponents)
        .enumerate()
        .map(|(k, (xs, p))| {
            if xs.is_empty() {
                return Err(Error::Param(format!("channel {k} is empty")));
            }
            if !(p >= 1.0 && p.is_finite()) {
                return Err(Error::Param(format!(
                    "channel {k}: GeM exponent {p} must be finite and >= 1"
                )));
            }
            Ok(power_mean(xs, p))
        })
        .collect()
}

fn power_mean(xs: &[f64], p: f64) -> f64 {
    let n = xs.len() as f64;
    let clamped = xs.iter().map(|&x| x.max(0.0));
    if p == 1.0 {
        return clamped.sum::<f64>() / n;
    }
    let top = clamped.clone().fold(0.0, f64::max);
    if top == 0.0 {
        return 0.0;
    }
    // Scale by the max so large p cannot overflow.
    let mean = clamped.map(|x| (x / top).powf(p)).sum::<f64>() / n;
    top * mean.powf(1.0 / p)
}
