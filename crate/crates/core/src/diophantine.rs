//! Simultaneous distance to the integers, envelope fits of the Diophantine
//! condition, and box-counting dimension.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ifs::Ifs;
use crate::stats;

/// Below this, a scanned distance counts as an exact alignment.
pub const ZERO_DISTANCE: f64 = 1e-9;
pub const MIN_ENVELOPE_POINTS: usize = 8;
pub const BINS_PER_DECADE: f64 = 8.0;

/// `t · x mod 1` in `[0, 1)`, using the exact product `t·x = p + e`.
#[inline]
pub fn frac_mul(t: f64, x: f64) -> f64 {
    let p = t * x;
    let e = t.mul_add(x, -p);
    let f = (p - p.floor()) + e;
    let f = f - f.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// `d(s, ℤ)` for `s` already reduced to `[0, 1)`.
#[inline]
fn circle_norm(f: f64) -> f64 {
    f.min(1.0 - f)
}

/// `inf_y max_i d(t_i x + y, ℤ)`: half the complement of the largest gap
/// between the points `t_i x mod 1` on the circle.
pub fn dio_distance(t: &[f64], x: f64) -> f64 {
    if t.len() <= 1 {
        return 0.0;
    }
    let mut pts: Vec<f64> = t.iter().map(|&ti| frac_mul(ti, x)).collect();
    pts.sort_by(f64::total_cmp);
    let mut gap = pts[0] + 1.0 - pts[pts.len() - 1];
    for w in pts.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    ((1.0 - gap) / 2.0).max(0.0)
}

/// `max_i d(t_i x, ℤ)` (no free translation).
pub fn dio_distance_ls(t: &[f64], x: f64) -> f64 {
    t.iter()
        .map(|&ti| circle_norm(frac_mul(ti, x)))
        .fold(0.0, f64::max)
}

/// `t_i = -log f'_i(x_i)` at the fixed points.
pub fn ratio_logs(ifs: &Ifs) -> Vec<f64> {
    ifs.maps()
        .iter()
        .map(|m| -m.deriv(m.fixed_point()).ln())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanConfig {
    pub x_min: f64,
    pub x_max: f64,
    /// Log-spaced nodes before the absolute step cap is applied.
    pub points: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            x_min: 10.0,
            x_max: 1e4,
            points: 4096,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Classification {
    /// A scanned distance fell to `≤ 1e-9` at `x_witness`.
    NonDiophantine { x_witness: f64 },
    /// Envelope `C / x^ℓ` bounds every refined minimum over the range.
    Diophantine { c: f64, ell: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DioProfile {
    pub t: Vec<f64>,
    pub x_min: f64,
    pub x_max: f64,
    pub xs: Vec<f64>,
    pub distances: Vec<f64>,
    /// Refined local minima `(x, d)`.
    pub minima: Vec<(f64, f64)>,
    /// Lowest refined minimum in each log-spaced bin, left to right.
    pub envelope: Vec<(f64, f64)>,
    pub classification: Classification,
    /// Residual RMS of the log-log envelope fit.
    pub rms: Option<f64>,
}

fn scan_grid(cfg: &ScanConfig, speed: f64) -> Vec<f64> {
    let growth = (cfg.x_max / cfg.x_min).powf(1.0 / cfg.points.max(1) as f64) - 1.0;
    let cap = if speed > 0.0 {
        1.0 / (16.0 * speed)
    } else {
        f64::INFINITY
    };
    let mut xs = vec![cfg.x_min];
    let mut x = cfg.x_min;
    while x < cfg.x_max {
        x = (x + (x * growth).min(cap)).min(cfg.x_max);
        xs.push(x);
    }
    xs
}

/// Lower envelope as the deepest minimum per log-spaced bin.
fn binned_lows(minima: &[(f64, f64)], cfg: &ScanConfig) -> Vec<(f64, f64)> {
    let bins = ((cfg.x_max / cfg.x_min).log10() * BINS_PER_DECADE).ceil().max(1.0) as usize;
    let width = (cfg.x_max / cfg.x_min).ln() / bins as f64;
    let mut lows: Vec<Option<(f64, f64)>> = vec![None; bins];
    for &(x, d) in minima {
        let b = (((x / cfg.x_min).ln() / width) as usize).min(bins - 1);
        if lows[b].is_none_or(|(_, e)| d < e) {
            lows[b] = Some((x, d));
        }
    }
    lows.into_iter().flatten().filter(|e| e.1 > 0.0).collect()
}

fn golden_min(f: &(impl Fn(f64) -> f64 + Sync), mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        if b - a <= 1e-15 * b.abs().max(1.0) {
            break;
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

fn profile(
    t: &[f64],
    cfg: &ScanConfig,
    speed: f64,
    f: impl Fn(f64) -> f64 + Sync,
) -> Result<DioProfile> {
    if !(cfg.x_min > 0.0 && cfg.x_max / cfg.x_min >= 1e3) {
        return Err(Error::InvalidInput(
            "scan needs x_min > 0 and x_max / x_min >= 1e3".into(),
        ));
    }
    let xs = scan_grid(cfg, speed);
    let distances: Vec<f64> = xs.par_iter().map(|&x| f(x)).collect();
    let mut minima: Vec<(f64, f64)> = (1..xs.len() - 1)
        .into_par_iter()
        .filter(|&i| distances[i] <= distances[i - 1] && distances[i] <= distances[i + 1])
        .map(|i| {
            let (x, d) = golden_min(&f, xs[i - 1], xs[i + 1]);
            if d < distances[i] {
                (x, d)
            } else {
                (xs[i], distances[i])
            }
        })
        .collect();
    // a minimum sitting on the scan boundary is still a sample
    for &i in &[0, xs.len() - 1] {
        if minima.is_empty() || distances[i] <= ZERO_DISTANCE {
            minima.push((xs[i], distances[i]));
        }
    }
    minima.sort_by(|a, b| a.0.total_cmp(&b.0));

    let zero = minima.iter().find(|m| m.1 <= ZERO_DISTANCE).copied();
    let envelope = binned_lows(&minima, cfg);
    let (classification, rms) = match zero {
        Some((x, _)) => (Classification::NonDiophantine { x_witness: x }, None),
        None => {
            if envelope.len() < MIN_ENVELOPE_POINTS {
                return Err(Error::TooFewPoints {
                    found: envelope.len(),
                    needed: MIN_ENVELOPE_POINTS,
                });
            }
            let lx: Vec<f64> = envelope.iter().map(|e| e.0.ln()).collect();
            let ld: Vec<f64> = envelope.iter().map(|e| e.1.ln()).collect();
            let fit = stats::linear_fit(&lx, &ld)?;
            let ell = -fit.slope;
            let c = minima
                .iter()
                .map(|&(x, d)| d * x.powf(ell))
                .fold(f64::INFINITY, f64::min);
            (Classification::Diophantine { c, ell }, Some(fit.rms))
        }
    };
    Ok(DioProfile {
        t: t.to_vec(),
        x_min: cfg.x_min,
        x_max: cfg.x_max,
        xs,
        distances,
        minima,
        envelope,
        classification,
        rms,
    })
}

/// Envelope scan of `inf_y max_i d(t_i x + y, ℤ)` over `[x_min, x_max]`.
///
/// The distance is even in `x`, so the positive range covers both signs.
/// Steps are capped at `1/(16 · max|t_i - t_j|)` so that no alignment is
/// skipped between nodes; every local minimum is refined by golden section.
pub fn dio_exponent(t: &[f64], cfg: &ScanConfig) -> Result<DioProfile> {
    let lo = t.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    profile(t, cfg, hi - lo, |x| dio_distance(t, x))
}

/// Envelope scan of `max_i d(t_i x, ℤ)`.
pub fn dio_condition_ls(t: &[f64], cfg: &ScanConfig) -> Result<DioProfile> {
    let speed = t.iter().map(|v| v.abs()).fold(0.0, f64::max);
    profile(t, cfg, speed, |x| dio_distance_ls(t, x))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoxDim {
    pub dimension: f64,
    /// All values equal: the set is a point.
    pub degenerate: bool,
    /// `(ε, N(ε))`.
    pub counts: Vec<(f64, usize)>,
    pub rms: f64,
}

pub fn dyadic_scales(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 2f64.powi(-k)).collect()
}

/// Box-counting slope of `log N(ε)` against `log(1/ε)`.
pub fn box_dim_estimate(values: &[f64], scales: &[f64]) -> Result<BoxDim> {
    if values.len() < 10_000 {
        return Err(Error::TooFewPoints {
            found: values.len(),
            needed: 10_000,
        });
    }
    if scales.len() < 5 {
        return Err(Error::TooFewPoints {
            found: scales.len(),
            needed: 5,
        });
    }
    if scales.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidInput("scales must be positive".into()));
    }
    let counts: Vec<(f64, usize)> = scales
        .iter()
        .map(|&eps| {
            let boxes: HashSet<i64> = values.iter().map(|v| (v / eps).floor() as i64).collect();
            (eps, boxes.len())
        })
        .collect();
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Ok(BoxDim {
            dimension: 0.0,
            degenerate: true,
            counts,
            rms: 0.0,
        });
    }
    let xs: Vec<f64> = counts.iter().map(|c| -c.0.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|c| (c.1 as f64).ln()).collect();
    let fit = stats::linear_fit(&xs, &ys)?;
    Ok(BoxDim {
        dimension: fit.slope,
        degenerate: false,
        counts,
        rms: fit.rms,
    })
}
