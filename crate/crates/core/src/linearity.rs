//! Temporal distance functions, the linearity test, and recovery of a
//! smooth conjugacy to an affine system.
//!
//! Words here act forward in time: `ξ|n` applies `f_{ξ_1}` first and
//! `f_{ξ_n}` last, so points along the orbit contract together and the
//! truncations converge as `n` grows.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ifs::{Ifs, IfsMap, Interval, Word};
use crate::mc::{self, tag};
use crate::stats;

/// Coding points are built from at least this many symbols.
pub const MIN_CODING_LEN: usize = 20;
pub const CODING_SAMPLE_LEN: usize = 30;
const SERIES_TOL: f64 = 1e-14;
const SERIES_MAX_TERMS: usize = 100_000;
const GL_ORDER: usize = 8;
const TABLE_CELLS: usize = 1000;

/// `log (f_{w_n} ∘ … ∘ f_{w_1})'(x)`.
pub fn forward_log_derivative(ifs: &Ifs, w: &[u8], x: f64) -> f64 {
    let mut y = x;
    let mut sum = 0.0;
    for &a in w {
        let (v, d) = ifs.map(a).value_deriv(y);
        sum += d.ln();
        y = v;
    }
    sum
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TemporalDistance {
    pub value: f64,
    /// Bound on `|D - D_n|`.
    pub tail_bound: f64,
}

/// `D_n(ξ, ζ, ω, η)`, the fourfold difference of forward log-derivatives at
/// the coding points `x_ω`, `x_η`.
pub fn temporal_distance(
    ifs: &Ifs,
    xi: &Word,
    zeta: &Word,
    omega: &Word,
    eta: &Word,
    n: usize,
) -> Result<TemporalDistance> {
    for (w, name) in [(xi, "ξ"), (zeta, "ζ")] {
        if w.len() < n || n == 0 {
            return Err(Error::WordTooShort {
                len: w.len(),
                reason: format!("{name} needs at least n = {n} >= 1 symbols"),
            });
        }
    }
    for (w, name) in [(omega, "ω"), (eta, "η")] {
        if w.len() < MIN_CODING_LEN {
            return Err(Error::WordTooShort {
                len: w.len(),
                reason: format!("coding word {name} needs {MIN_CODING_LEN} symbols"),
            });
        }
    }
    let xo = ifs.coding_point(omega);
    let xe = ifs.coding_point(eta);
    let a = forward_log_derivative(ifs, &xi.0[..n], xo);
    let b = forward_log_derivative(ifs, &xi.0[..n], xe);
    let c = forward_log_derivative(ifs, &zeta.0[..n], xo);
    let d = forward_log_derivative(ifs, &zeta.0[..n], xe);
    let rho = ifs.rho();
    let tail_bound = 2.0 * ifs.log_derivative_lipschitz() * ifs.interval().len() * rho.powi(n as i32)
        / (1.0 - rho);
    Ok(TemporalDistance {
        value: (a - b) - (c - d),
        tail_bound,
    })
}

/// `D_n` on `samples` independent draws of `(ξ, ζ, ω, η)` from the measure.
pub fn sample_temporal(ifs: &Ifs, n: usize, samples: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let sampler = ifs.sampler();
    let out = mc::sample_vec(samples, seed, tag::TEMPORAL, |rng| {
        let xi = sampler.word(rng, n);
        let zeta = sampler.word(rng, n);
        let omega = sampler.word(rng, CODING_SAMPLE_LEN);
        let eta = sampler.word(rng, CODING_SAMPLE_LEN);
        temporal_distance(ifs, &xi, &zeta, &omega, &eta, n).map(|t| t.value)
    });
    out.into_iter().collect()
}

/// `d/dx log (f_{w_k} ∘ … ∘ f_{w_1})'(x)` for every prefix length `k`,
/// by the chain-rule sum of `f''/f'` weighted by the prefix derivative.
fn log_derivative_slopes(ifs: &Ifs, w: &[u8], x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(w.len() + 1);
    let mut y = x;
    let mut dprod = 1.0;
    let mut sum = 0.0;
    out.push(0.0);
    for &a in w {
        let m = ifs.map(a);
        let (v, d) = m.value_deriv(y);
        sum += m.deriv2(y) / d * dprod;
        dprod *= d;
        y = v;
        out.push(sum);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearityReport {
    pub ns: Vec<usize>,
    pub sups: Vec<f64>,
    pub samples: usize,
}

impl LinearityReport {
    /// `sup(n_j) / sup(n_{j+1})`.
    pub fn decay_factors(&self) -> Vec<f64> {
        self.sups.windows(2).map(|w| w[0] / w[1]).collect()
    }

    /// True if the last sup is negligible or a quarter of the first.
    pub fn decays(&self) -> bool {
        match (self.sups.first(), self.sups.last()) {
            (Some(&first), Some(&last)) => last <= 1e-12 || last <= 0.25 * first,
            _ => false,
        }
    }
}

/// `max |d/dx (log f'_{ξ|n} - log f'_{ζ|n})(x)|` over sampled `ξ, ζ` and
/// attractor points `x`, for each `n` in `ns`.
pub fn linearity_sup(ifs: &Ifs, ns: &[usize], samples: usize, seed: u64) -> Result<LinearityReport> {
    if ns.is_empty() || ns.iter().any(|&n| n < 2) {
        return Err(Error::InvalidInput("linearity_sup needs every n >= 2".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidInput("linearity_sup needs samples > 0".into()));
    }
    let n_max = *ns.iter().max().unwrap();
    let sampler = ifs.sampler();
    let per_chunk = mc::chunked(samples, seed, tag::LINEARITY, |rng, range| {
        let mut best = vec![0.0f64; ns.len()];
        for _ in range {
            let xi = sampler.word(rng, n_max);
            let zeta = sampler.word(rng, n_max);
            let x = ifs.coding_point(&sampler.word(rng, CODING_SAMPLE_LEN));
            let a = log_derivative_slopes(ifs, &xi.0, x);
            let b = log_derivative_slopes(ifs, &zeta.0, x);
            for (j, &n) in ns.iter().enumerate() {
                best[j] = best[j].max((a[n] - b[n]).abs());
            }
        }
        best
    });
    let mut sups = vec![0.0f64; ns.len()];
    for chunk in per_chunk {
        for (s, c) in sups.iter_mut().zip(chunk) {
            *s = s.max(c);
        }
    }
    Ok(LinearityReport {
        ns: ns.to_vec(),
        sups,
        samples,
    })
}

/// `h(x) = lo + |I| · H(x) / H(hi)` with `H' = exp(φ₁)`, tabulated on cell
/// edges and completed by Gauss-Legendre inside a cell.
#[derive(Clone, Debug)]
struct Primitive {
    map: IfsMap,
    x0: f64,
    interval: Interval,
    edges: Vec<f64>,
    cumulative: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Primitive {
    fn phi(&self, x: f64) -> f64 {
        phi_series(&self.map, self.x0, x)
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * self.phi(mid + half * t).exp())
            .sum();
        half * s
    }

    fn build(map: IfsMap, x0: f64, interval: Interval, cells: usize) -> Result<Self> {
        let (nodes, weights) = stats::gauss_legendre(GL_ORDER);
        let edges: Vec<f64> = (0..=cells)
            .map(|i| interval.from_unit(i as f64 / cells as f64))
            .collect();
        let mut p = Self {
            map,
            x0,
            interval,
            edges,
            cumulative: Vec::new(),
            nodes,
            weights,
        };
        let pieces: Vec<f64> = p
            .edges
            .par_windows(2)
            .map(|w| p.integral(w[0], w[1]))
            .collect();
        let mut cumulative = Vec::with_capacity(cells + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for piece in pieces {
            if !(piece > 0.0) || !piece.is_finite() {
                return Err(Error::Numerical("h is not strictly increasing".into()));
            }
            acc += piece;
            cumulative.push(acc);
        }
        p.cumulative = cumulative;
        Ok(p)
    }

    fn cell_of(&self, x: f64) -> usize {
        let cells = self.edges.len() - 1;
        ((self.interval.to_unit(x) * cells as f64).floor().max(0.0) as usize).min(cells - 1)
    }

    fn raw(&self, x: f64) -> f64 {
        let j = self.cell_of(x);
        self.cumulative[j] + self.integral(self.edges[j], x)
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn eval(&self, x: f64) -> f64 {
        self.interval.from_unit(self.raw(x) / self.total())
    }

    fn inverse(&self, y: f64) -> f64 {
        let target = self.interval.to_unit(y) * self.total();
        let j = match self
            .cumulative
            .binary_search_by(|c| c.total_cmp(&target))
        {
            Ok(j) => return self.edges[j],
            Err(j) => j.clamp(1, self.edges.len() - 1) - 1,
        };
        let (mut a, mut b) = (self.edges[j], self.edges[j + 1]);
        let (ca, cb) = (self.cumulative[j], self.cumulative[j + 1]);
        let mut x = a + (b - a) * (target - ca) / (cb - ca);
        for _ in 0..60 {
            let r = self.raw(x) - target;
            if r > 0.0 {
                b = x;
            } else {
                a = x;
            }
            let step = r / self.phi(x).exp();
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
            let next = x - step;
            x = if next >= a && next <= b { next } else { 0.5 * (a + b) };
            if b - a <= 1e-16 {
                break;
            }
        }
        x
    }
}

/// `φ₁(x) = Σ_j [log f'(f^j x) - log f'(f^j x₀)]`, stopped once an
/// increment drops below `1e-14`.
fn phi_series(map: &IfsMap, x0: f64, x: f64) -> f64 {
    let (mut y, mut z) = (x, x0);
    let mut sum = 0.0;
    for _ in 0..SERIES_MAX_TERMS {
        let (vy, dy) = map.value_deriv(y);
        let (vz, dz) = map.value_deriv(z);
        let inc = dy.ln() - dz.ln();
        sum += inc;
        if inc.abs() < SERIES_TOL {
            break;
        }
        y = vy;
        z = vz;
    }
    sum
}

#[derive(Clone, Debug)]
pub struct ConjugacyRow {
    pub x: f64,
    pub phi1: f64,
    pub h: f64,
    /// `max_i |g_i''(h(x))|`.
    pub residual_g2: f64,
}

#[derive(Clone, Debug)]
pub struct ConjugacyResult {
    pub rows: Vec<ConjugacyRow>,
    /// `sup_i |g_i''|` over the image of an attractor sample.
    pub sup_residual: f64,
    /// Step used in the second differences.
    pub delta: f64,
    pub linearity: LinearityReport,
    primitive: Primitive,
    maps: Vec<IfsMap>,
}

impl ConjugacyResult {
    pub fn h(&self, x: f64) -> f64 {
        self.primitive.eval(x)
    }

    pub fn h_inv(&self, y: f64) -> f64 {
        self.primitive.inverse(y)
    }

    /// `g_i = h ∘ f_i ∘ h⁻¹`.
    pub fn conjugated(&self, i: usize, y: f64) -> f64 {
        self.h(self.maps[i].value(self.h_inv(y)))
    }

    fn g2(&self, y: f64) -> f64 {
        let iv = self.primitive.interval;
        let d = self.delta;
        let y = y.clamp(iv.lo + d, iv.hi - d);
        (0..self.maps.len())
            .map(|i| {
                let g = |t| self.conjugated(i, t);
                ((g(y + d) - 2.0 * g(y) + g(y - d)) / (d * d)).abs()
            })
            .fold(0.0, f64::max)
    }
}

pub const LINEARITY_NS: [usize; 4] = [2, 4, 8, 16];
const ATTRACTOR_SAMPLE: usize = 256;

/// Recovers `h` with `h ∘ f_i ∘ h⁻¹` affine from the first map's
/// log-derivative series, and measures how far from affine the result is.
///
/// Unless `force` is set, the linearity test must show decay first.
pub fn conjugacy_construct(ifs: &Ifs, grid: usize, force: bool, seed: u64) -> Result<ConjugacyResult> {
    if grid < 3 {
        return Err(Error::InvalidInput("conjugacy grid needs at least 3 points".into()));
    }
    let linearity = linearity_sup(ifs, &LINEARITY_NS, 1024, seed)?;
    if !force && !linearity.decays() {
        return Err(Error::Precondition(format!(
            "linearity test does not decay (sups {:?}); the system does not look conjugate to affine",
            linearity.sups
        )));
    }
    let iv = ifs.interval();
    let primitive = Primitive::build(ifs.maps()[0].clone(), ifs.base_point(), iv, TABLE_CELLS)?;
    let mut result = ConjugacyResult {
        rows: Vec::new(),
        sup_residual: 0.0,
        delta: 1e-3 * iv.len(),
        linearity,
        primitive,
        maps: ifs.maps().to_vec(),
    };
    let xs: Vec<f64> = (0..grid)
        .map(|i| iv.from_unit(i as f64 / (grid - 1) as f64))
        .collect();
    let rows: Vec<ConjugacyRow> = xs
        .par_iter()
        .map(|&x| {
            let h = result.h(x);
            ConjugacyRow {
                x,
                phi1: result.primitive.phi(x),
                h,
                residual_g2: result.g2(h),
            }
        })
        .collect();
    let sampler = ifs.sampler();
    let sample = mc::sample_vec(ATTRACTOR_SAMPLE, seed, tag::LINEARITY ^ 0x100, |rng| {
        ifs.coding_point(&sampler.word(rng, CODING_SAMPLE_LEN))
    });
    let sup = sample
        .par_iter()
        .map(|&x| result.g2(result.h(x)))
        .reduce(|| 0.0, f64::max);
    if rows.windows(2).any(|w| !(w[1].h > w[0].h)) {
        return Err(Error::Numerical("h is not strictly increasing".into()));
    }
    result.rows = rows;
    result.sup_residual = sup;
    Ok(result)
}

/// `max |f(x+δ) - 2f(x) + f(x-δ)| / δ²` over `n` interior grid points.
pub fn second_difference_residual(f: impl Fn(f64) -> f64, iv: Interval, n: usize) -> f64 {
    let delta = iv.len() / n as f64;
    (1..n)
        .map(|i| {
            let x = iv.lo + i as f64 * delta;
            ((f(x + delta) - 2.0 * f(x) + f(x - delta)) / (delta * delta)).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;

    #[test]
    fn affine_temporal_distance_vanishes() {
        let ifs = examples::two_ratio();
        let w = Word::from_one_based(&[1, 2, 1, 1, 2]);
        let c = Word::repeat(0, 25);
        let d = Word::repeat(1, 25);
        let t = temporal_distance(&ifs, &w, &Word::repeat(1, 5), &c, &d, 5).unwrap();
        assert_eq!(t.value, 0.0);
    }

    #[test]
    fn short_coding_word_rejected() {
        let ifs = examples::nonlinear();
        let w = Word::repeat(0, 5);
        let e = temporal_distance(&ifs, &w, &w, &Word::repeat(0, 10), &Word::repeat(1, 25), 5);
        assert!(matches!(e, Err(Error::WordTooShort { .. })));
    }

    #[test]
    fn chain_rule_matches_finite_difference() {
        let ifs = examples::nonlinear();
        let w = [0u8, 1, 0, 0, 1, 1];
        let x = 0.37;
        let h = 1e-6;
        let fd = (forward_log_derivative(&ifs, &w, x + h) - forward_log_derivative(&ifs, &w, x - h))
            / (2.0 * h);
        let s = log_derivative_slopes(&ifs, &w, x);
        assert!((s[w.len()] - fd).abs() < 1e-7);
    }

    #[test]
    fn primitive_inverse_roundtrip() {
        let ifs = examples::exp_conjugated_lebesgue();
        let p = Primitive::build(ifs.maps()[0].clone(), ifs.base_point(), ifs.interval(), 200).unwrap();
        for &x in &[0.0, 0.1, 0.5, 0.77, 1.0, 0.3337] {
            assert!((p.inverse(p.eval(x)) - x).abs() < 1e-13);
        }
    }
}
