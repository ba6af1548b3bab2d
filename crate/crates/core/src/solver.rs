//! Least-squares spot-filter design by conjugate gradients on the normal
//! equations, plus rendering of driving signals and receptions.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::conv::{fft_conv, ConvDims, SystemOperator};
use crate::error::{dim, invalid, Error, Result};
use crate::room::RirSet;
use crate::signal::Waveform;

/// K×L spot filters g_kℓ, each M taps.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSet {
    filters: Vec<Vec<Vec<f64>>>,
}

impl FilterSet {
    pub fn new(filters: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let len = filters
            .first()
            .and_then(|r| r.first())
            .map(Vec::len)
            .ok_or_else(|| dim("empty filter set"))?;
        let cols = filters[0].len();
        if len == 0 {
            return Err(dim("filters must have at least one tap"));
        }
        for row in &filters {
            if row.len() != cols || row.iter().any(|g| g.len() != len) {
                return Err(dim("ragged filter set"));
            }
            if row.iter().flatten().any(|v| !v.is_finite()) {
                return Err(invalid("filter taps must be finite"));
            }
        }
        Ok(Self { filters })
    }

    pub fn zeros(users: usize, loudspeakers: usize, len: usize) -> Result<Self> {
        Self::new(vec![vec![vec![0.0; len]; loudspeakers]; users])
    }

    /// Unstacks a vector in loudspeaker-major order.
    pub fn from_stacked(g: &[f64], dims: &ConvDims) -> Result<Self> {
        if g.len() != dims.cols() {
            return Err(dim(format!(
                "{} taps for {} expected",
                g.len(),
                dims.cols()
            )));
        }
        let filters = (0..dims.users)
            .map(|k| {
                (0..dims.loudspeakers)
                    .map(|l| {
                        let off = dims.filter_offset(k, l);
                        g[off..off + dims.filter_len].to_vec()
                    })
                    .collect()
            })
            .collect();
        Self::new(filters)
    }

    /// Stacks as [g_1; …; g_L] with g_ℓ = [g_1ℓ; …; g_Kℓ].
    pub fn to_stacked(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.users() * self.loudspeakers() * self.len());
        for l in 0..self.loudspeakers() {
            for k in 0..self.users() {
                out.extend_from_slice(&self.filters[k][l]);
            }
        }
        out
    }

    pub fn users(&self) -> usize {
        self.filters.len()
    }

    pub fn loudspeakers(&self) -> usize {
        self.filters[0].len()
    }

    pub fn len(&self) -> usize {
        self.filters[0][0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn filter(&self, k: usize, l: usize) -> &[f64] {
        &self.filters[k][l]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// ‖ξ − H X̃ g‖₂ after each iteration.
    pub residual_history: Vec<f64>,
    pub iterations_run: usize,
    /// Final ‖r‖ / ‖ξ‖ (0 for a zero target).
    pub relative_residual: f64,
    pub converged: bool,
    /// Seconds; kept out of serialized reports so re-runs stay byte-identical.
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TargetSpec {
    pub delay: usize,
    pub total_length: usize,
}

impl TargetSpec {
    pub fn new(delay: usize, dims: &ConvDims) -> Result<Self> {
        let max = dims.filter_len + dims.rir_len - 2;
        if delay > max {
            return Err(invalid(format!(
                "target delay {delay} exceeds M + P − 2 = {max}"
            )));
        }
        Ok(Self {
            delay,
            total_length: dims.reception_len(),
        })
    }
}

/// Default target delay: peak of the mean absolute RIR plus M/2, capped at
/// the largest admissible delay.
pub fn default_delay(rirs: &RirSet, filter_len: usize) -> usize {
    let mut mean = vec![0.0; rirs.len()];
    for k in 0..rirs.rows() {
        for l in 0..rirs.loudspeakers() {
            for (m, v) in mean.iter_mut().zip(rirs.rir(k, l)) {
                *m += v.abs();
            }
        }
    }
    let peak = mean
        .iter()
        .enumerate()
        .fold(
            (0, f64::MIN),
            |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
        )
        .0;
    (peak + filter_len / 2).min(filter_len + rirs.len() - 2)
}

/// Stacked delayed messages ξ.
pub fn build_target(messages: &[Waveform], spec: &TargetSpec) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(messages.len() * spec.total_length);
    for (k, msg) in messages.iter().enumerate() {
        if spec.delay + msg.len() > spec.total_length {
            return Err(invalid(format!(
                "message {k} ({} samples) delayed by {} does not fit in {}",
                msg.len(),
                spec.delay,
                spec.total_length
            )));
        }
        let mut row = vec![0.0; spec.total_length];
        row[spec.delay..spec.delay + msg.len()].copy_from_slice(msg.samples());
        out.extend(row);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgnrOptions {
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Tikhonov weight on ‖g‖²; 0 solves the plain least-squares problem.
    pub damping: f64,
}

impl Default for CgnrOptions {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            rel_tol: 1e-4,
            damping: 0.0,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Conjugate gradients on (X̃ᵀHᵀHX̃ + λI) g = X̃ᵀHᵀξ from g = 0.
///
/// Stops after `max_iters` or once either ‖r‖/‖ξ‖ or the normal-equation
/// residual ‖Aᵀr − λg‖/‖Aᵀξ‖ drops to `rel_tol`.
pub fn solve_cgnr(
    op: &SystemOperator,
    target: &[f64],
    opts: &CgnrOptions,
) -> Result<(FilterSet, SolveReport)> {
    let dims = *op.dims();
    if target.len() != dims.rows() {
        return Err(dim(format!(
            "target has {} samples, expected {}",
            target.len(),
            dims.rows()
        )));
    }
    if opts.max_iters == 0 {
        return Err(invalid("max_iters must be at least 1"));
    }
    if !(opts.rel_tol > 0.0 && opts.rel_tol < 1.0) {
        return Err(invalid(format!("rel_tol {} outside (0, 1)", opts.rel_tol)));
    }
    if !(opts.damping >= 0.0) {
        return Err(invalid("damping must be non-negative"));
    }
    let started = Instant::now();
    let lambda = opts.damping;
    let target_norm = norm(target);
    let mut g = vec![0.0; dims.cols()];
    let mut history = Vec::new();

    if target_norm == 0.0 {
        return Ok((
            FilterSet::from_stacked(&g, &dims)?,
            SolveReport {
                residual_history: history,
                iterations_run: 0,
                relative_residual: 0.0,
                converged: true,
                wall_time: started.elapsed().as_secs_f64(),
            },
        ));
    }

    let mut r = target.to_vec();
    let mut s = op.apply_adjoint(&r)?;
    let normal0 = norm(&s);
    let mut p = s.clone();
    let mut gamma = dot(&s, &s);
    let mut converged = false;

    for iter in 1..=opts.max_iters {
        let q = op.apply(&p)?;
        let denom = dot(&q, &q) + lambda * dot(&p, &p);
        if !denom.is_finite() || !gamma.is_finite() {
            return Err(Error::NumericalBreakdown {
                iteration: iter,
                reason: "non-finite curvature".into(),
            });
        }
        if denom == 0.0 {
            // search direction vanished: exact solution reached
            converged = true;
            break;
        }
        let alpha = gamma / denom;
        g.iter_mut().zip(&p).for_each(|(x, d)| *x += alpha * d);
        r.iter_mut().zip(&q).for_each(|(x, d)| *x -= alpha * d);
        s = op.apply_adjoint(&r)?;
        if lambda > 0.0 {
            s.iter_mut().zip(&g).for_each(|(x, v)| *x -= lambda * v);
        }
        let res = norm(&r);
        if !res.is_finite() {
            return Err(Error::NumericalBreakdown {
                iteration: iter,
                reason: "non-finite residual".into(),
            });
        }
        history.push(res);
        let gamma_next = dot(&s, &s);
        if res / target_norm <= opts.rel_tol || gamma_next.sqrt() <= opts.rel_tol * normal0 {
            converged = true;
            break;
        }
        let beta = gamma_next / gamma;
        gamma = gamma_next;
        p.iter_mut().zip(&s).for_each(|(d, x)| *d = x + beta * *d);
    }

    let relative_residual = history.last().map_or(1.0, |r| r / target_norm);
    Ok((
        FilterSet::from_stacked(&g, &dims)?,
        SolveReport {
            iterations_run: history.len(),
            residual_history: history,
            relative_residual,
            converged,
            wall_time: started.elapsed().as_secs_f64(),
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendering {
    pub driving: Vec<Waveform>,
    pub receptions: Vec<Waveform>,
}

impl Rendering {
    /// max over ℓ, n of |s_ℓ[n]|, for clipping checks.
    pub fn driving_peak(&self) -> f64 {
        self.driving.iter().map(Waveform::peak).fold(0.0, f64::max)
    }
}

/// Driving signals and design-point receptions at `sample_rate`.
pub fn render(op: &SystemOperator, g: &FilterSet, sample_rate: u32) -> Result<Rendering> {
    let out = op.forward(g)?;
    let wrap = |v: Vec<Vec<f64>>| -> Result<Vec<Waveform>> {
        v.into_iter()
            .map(|s| Waveform::new(s, sample_rate))
            .collect()
    };
    Ok(Rendering {
        driving: wrap(out.driving)?,
        receptions: wrap(out.receptions)?,
    })
}

/// Receptions y_j = Σ_ℓ h_jℓ ⊛ s_ℓ at arbitrary evaluation points.
pub fn evaluate_at(rirs: &RirSet, driving: &[Waveform]) -> Result<Vec<Waveform>> {
    if rirs.loudspeakers() != driving.len() {
        return Err(dim(format!(
            "{} driving signals for {} RIR columns",
            driving.len(),
            rirs.loudspeakers()
        )));
    }
    let len = driving.first().map_or(0, Waveform::len);
    if len == 0 || driving.iter().any(|s| s.len() != len) {
        return Err(dim("driving signals must be nonempty and of equal length"));
    }
    let out_len = len + rirs.len() - 1;
    (0..rirs.rows())
        .map(|j| {
            let mut acc = vec![0.0; out_len];
            for (l, s) in driving.iter().enumerate() {
                let y = fft_conv(rirs.rir(j, l), s.samples())?;
                acc.iter_mut().zip(&y).for_each(|(a, v)| *a += v);
            }
            Waveform::new(acc, driving[0].sample_rate())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_shift() {
        let dims = ConvDims::new(3, 4, 5, 1, 2).unwrap();
        let spec = TargetSpec::new(5, &dims).unwrap();
        let x = Waveform::new(vec![1.0, 2.0, 3.0], 100).unwrap();
        let t = build_target(&[x.clone()], &spec).unwrap();
        assert_eq!(t, vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 0.0, 0.0]);
        let t0 = build_target(&[x.clone()], &TargetSpec::new(0, &dims).unwrap()).unwrap();
        assert_eq!(&t0[..3], x.samples());
        assert_eq!(t0.len(), dims.reception_len());
        assert!(TargetSpec::new(8, &dims).is_err());
        for delay in 0..=7 {
            let t = build_target(&[x.clone()], &TargetSpec::new(delay, &dims).unwrap()).unwrap();
            assert!((norm(&t) - x.energy().sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn stacking_order() {
        let dims = ConvDims::new(4, 2, 3, 2, 3).unwrap();
        let g: Vec<f64> = (0..dims.cols()).map(|i| i as f64).collect();
        let f = FilterSet::from_stacked(&g, &dims).unwrap();
        assert_eq!(f.filter(0, 0), &[0.0, 1.0]);
        assert_eq!(f.filter(1, 0), &[2.0, 3.0]);
        assert_eq!(f.filter(0, 1), &[4.0, 5.0]);
        assert_eq!(f.to_stacked(), g);
    }

    #[test]
    fn filter_set_validation() {
        assert!(FilterSet::new(vec![]).is_err());
        assert!(FilterSet::new(vec![vec![vec![1.0], vec![1.0, 2.0]]]).is_err());
        assert!(FilterSet::new(vec![vec![vec![f64::NAN]]]).is_err());
    }
}
