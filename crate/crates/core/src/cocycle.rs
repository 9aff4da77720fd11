//! Derivative cocycle `c(a, ω) = -log f'_a(x_ω)`, its Birkhoff sums, the
//! Lyapunov exponent and variance, first-passage times, partition cells and
//! overshoot laws.

use crate::error::{Error, Result};
use crate::ifs::{Ifs, Word};
use crate::mc::{self, tag};

/// Extra symbols appended past the steps that are actually read, so the tail
/// point `x_{σⁿω}` is accurate to `ρ^40 · |I|`.
pub const DEFAULT_TAIL: usize = 40;

/// Relative slack when comparing Birkhoff sums against thresholds, so that
/// `n · log 2` summed step by step still counts as reaching `n · log 2`.
const THRESHOLD_SLACK: f64 = 1e-12;

/// Below this `r₀²` the walk is treated as degenerate.
pub const DEGENERATE_VARIANCE: f64 = 1e-10;

/// `c(a, w) = -log f'_a(x_w)`.
pub fn cocycle_value(ifs: &Ifs, a: u8, w: &Word) -> f64 {
    -ifs.map(a).deriv(ifs.coding_point(w)).ln()
}

/// `n`-step cocycle `-log f'_u(x_w)`.
pub fn cocycle_word(ifs: &Ifs, u: &Word, w: &Word) -> Result<f64> {
    Ok(-ifs.log_derivative_word(u, ifs.coding_point(w))?)
}

/// Steps `X_i = c(w_i, σ^i ω)` of the walk along `w`, with `σ^{|w|} ω`
/// approximated by `tail` (closed with the base point).
pub fn walk_steps(ifs: &Ifs, w: &[u8], tail: &Word) -> Vec<f64> {
    let mut y = ifs.coding_point(tail);
    let mut steps = vec![0.0; w.len()];
    for i in (0..w.len()).rev() {
        let (v, d) = ifs.map(w[i]).value_deriv(y);
        steps[i] = -d.ln();
        y = v;
    }
    steps
}

/// `S_{|w|}(ω) = -log f'_w(x_{σ^{|w|} ω})` with the tail standing in for
/// `σ^{|w|} ω`.
pub fn birkhoff_sum(ifs: &Ifs, w: &Word, tail: &Word) -> f64 {
    walk_steps(ifs, &w.0, tail).iter().sum()
}

/// Partial sums `S_1, S_2, …` along one sampled trajectory.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub word: Word,
    pub sums: Vec<f64>,
}

impl Trajectory {
    /// The whole word is read; its end is closed with the base point.
    pub fn new(ifs: &Ifs, word: Word) -> Self {
        let steps = walk_steps(ifs, &word.0, &Word::empty());
        let mut acc = 0.0;
        let sums = steps
            .iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect();
        Self { word, sums }
    }

    /// `S_n` (with `S_0 = 0`).
    pub fn sum(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.sums[n - 1]
        }
    }

    /// `τ_k = min{n ≥ 1 : S_n ≥ kχ}`.
    pub fn tau(&self, k: f64, chi: f64) -> Result<usize> {
        first_crossing(&self.sums, k * chi).ok_or_else(|| Error::WordTooShort {
            len: self.word.len(),
            reason: format!("S_n never reaches k·chi = {}", k * chi),
        })
    }
}

fn first_crossing(sums: &[f64], level: f64) -> Option<usize> {
    let target = level - THRESHOLD_SLACK * level.abs().max(1.0);
    sums.iter().position(|&s| s >= target).map(|i| i + 1)
}

/// `τ_k(w)` for a finite word closed with the base point.
pub fn tau_k(ifs: &Ifs, w: &Word, k: f64, chi: f64) -> Result<usize> {
    Trajectory::new(ifs, w.clone()).tau(k, chi)
}

/// `min{n ≥ 1 : -log max_x f'_{w|n}(x) ≥ hχ}`.
pub fn tilde_tau_h(ifs: &Ifs, w: &Word, h: f64, chi: f64) -> Result<usize> {
    tilde_tau_slice(ifs, &w.0, h, chi)
}

fn tilde_tau_slice(ifs: &Ifs, w: &[u8], h: f64, chi: f64) -> Result<usize> {
    let level = h * chi;
    let target = level - THRESHOLD_SLACK * level.abs().max(1.0);
    for n in 1..=w.len() {
        if -ifs.max_derivative_word(&w[..n]).ln() >= target {
            return Ok(n);
        }
    }
    Err(Error::WordTooShort {
        len: w.len(),
        reason: format!("-log max f'_w stays below h·chi = {level}"),
    })
}

/// A cell of the partition indexed by `(k, h')`.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionCell {
    pub k: f64,
    pub h_prime: f64,
    /// `η' = (σ^{τ_k - 1} w)|_{τ̃}`.
    pub label: Word,
    pub tau_k: usize,
    pub tilde_tau: usize,
}

/// Cell of the trajectory `w`.
pub fn partition_cell(ifs: &Ifs, w: &Word, k: f64, h_prime: f64, chi: f64) -> Result<PartitionCell> {
    let traj = Trajectory::new(ifs, w.clone());
    cell_of(ifs, &traj, k, h_prime, chi)
}

pub(crate) fn cell_of(
    ifs: &Ifs,
    traj: &Trajectory,
    k: f64,
    h_prime: f64,
    chi: f64,
) -> Result<PartitionCell> {
    let tau = traj.tau(k, chi)?;
    let shifted = &traj.word.0[tau - 1..];
    let tt = tilde_tau_slice(ifs, shifted, h_prime, chi)?;
    Ok(PartitionCell {
        k,
        h_prime,
        label: Word(shifted[..tt].to_vec()),
        tau_k: tau,
        tilde_tau: tt,
    })
}

/// Trajectory length that covers `τ_k + τ̃_{h'}` for every path, plus the
/// default tail.
pub fn trajectory_length(ifs: &Ifs, k: f64, h_prime: f64, chi: f64) -> usize {
    let reach = k * chi + ifs.d_max() + h_prime * chi;
    (reach / ifs.d_min()).ceil() as usize + 2 + DEFAULT_TAIL
}

/// Estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// `χ = ∫ c dp dℙ`; exact for affine families, else the Monte Carlo mean
/// of `S_n / n` over random words (stationary steps, so unbiased up to the
/// tail truncation).
pub fn lyapunov_chi(ifs: &Ifs, samples: usize, n: usize, seed: u64) -> Result<Estimate> {
    if let Ok(c) = ifs.affine_coefficients() {
        let v = -ifs
            .probabilities()
            .iter()
            .zip(&c)
            .map(|(p, (r, _))| p * r.ln())
            .sum::<f64>();
        return Ok(Estimate {
            value: v,
            stderr: 0.0,
        });
    }
    if n < 20 {
        return Err(Error::Precondition(format!("lyapunov_chi needs n >= 20, got {n}")));
    }
    let sums = random_sums(ifs, samples, &[n], seed, tag::CHI);
    let per: Vec<f64> = sums.iter().map(|s| s[0] / n as f64).collect();
    let (value, stderr) = mc::mean_stderr(&per);
    Ok(Estimate { value, stderr })
}

/// `S_n` at each requested `n` for `samples` random words of length
/// `max(n) + DEFAULT_TAIL`.
pub fn random_sums(
    ifs: &Ifs,
    samples: usize,
    ns: &[usize],
    seed: u64,
    purpose: u64,
) -> Vec<Vec<f64>> {
    let len = ns.iter().copied().max().unwrap_or(0) + DEFAULT_TAIL;
    mc::sample_vec(samples, seed, purpose, |rng| {
        let w = ifs.sampler().word(rng, len);
        let steps = walk_steps(ifs, &w.0, &Word::empty());
        let mut prefix = vec![0.0; len + 1];
        for (i, x) in steps.iter().enumerate() {
            prefix[i + 1] = prefix[i] + x;
        }
        ns.iter().map(|&n| prefix[n]).collect()
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceEstimate {
    pub r0_sq: f64,
    pub stderr: f64,
    pub degenerate: bool,
}

/// Asymptotic variance `r₀² = lim Var(S_n)/n`.
///
/// Exact for affine families (i.i.d. steps). Otherwise `Var(S_n)/n` from
/// Monte Carlo over random words.
pub fn variance_r0(ifs: &Ifs, samples: usize, n: usize, seed: u64) -> Result<VarianceEstimate> {
    if let Some(v) = affine_variance(ifs) {
        return Ok(VarianceEstimate {
            r0_sq: v,
            stderr: 0.0,
            degenerate: v < DEGENERATE_VARIANCE,
        });
    }
    if n < 50 {
        return Err(Error::Precondition(format!("variance_r0 needs n >= 50, got {n}")));
    }
    let sums = random_sums(ifs, samples, &[n], seed, tag::VARIANCE);
    let s: Vec<f64> = sums.iter().map(|v| v[0]).collect();
    let (v, se) = sample_variance(&s);
    let r0_sq = v / n as f64;
    Ok(VarianceEstimate {
        r0_sq,
        stderr: se / n as f64,
        degenerate: r0_sq < DEGENERATE_VARIANCE,
    })
}

/// `r₀²` from `(Var S_{2n} - Var S_n)/n`, which cancels the `O(1)`
/// correlation term in `Var S_n = n r₀² + c + o(1)`.
pub fn variance_r0_difference(
    ifs: &Ifs,
    samples: usize,
    n: usize,
    seed: u64,
) -> Result<VarianceEstimate> {
    if let Some(v) = affine_variance(ifs) {
        return Ok(VarianceEstimate {
            r0_sq: v,
            stderr: 0.0,
            degenerate: v < DEGENERATE_VARIANCE,
        });
    }
    let sums = random_sums(ifs, samples, &[n, 2 * n], seed, tag::VARIANCE);
    let a: Vec<f64> = sums.iter().map(|v| v[0]).collect();
    let b: Vec<f64> = sums.iter().map(|v| v[1]).collect();
    let (va, sa) = sample_variance(&a);
    let (vb, sb) = sample_variance(&b);
    let r0_sq = (vb - va) / n as f64;
    Ok(VarianceEstimate {
        r0_sq,
        stderr: (sa * sa + sb * sb).sqrt() / n as f64,
        degenerate: r0_sq < DEGENERATE_VARIANCE,
    })
}

fn affine_variance(ifs: &Ifs) -> Option<f64> {
    let c = ifs.affine_coefficients().ok()?;
    let p = ifs.probabilities();
    let m1: f64 = p.iter().zip(&c).map(|(p, (r, _))| p * r.ln()).sum();
    let m2: f64 = p.iter().zip(&c).map(|(p, (r, _))| p * r.ln() * r.ln()).sum();
    Some((m2 - m1 * m1).max(0.0))
}

/// Unbiased variance and its standard error `sqrt((m₄ - s⁴)/N)`.
fn sample_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = mc::pairwise_sum(xs) / n;
    let d2: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let d4: Vec<f64> = xs.iter().map(|x| (x - mean).powi(4)).collect();
    let var = mc::pairwise_sum(&d2) / (n - 1.0);
    let m4 = mc::pairwise_sum(&d4) / n;
    (var, ((m4 - var * var).max(0.0) / n).sqrt())
}

/// Overshoot law of `S_{τ_k}` on `[kχ, kχ + D']` for one partition cell.
///
/// `X₁` is sampled over tails `η' · ω''` with random `ω''`; the CDF is
/// `E[min(t - kχ, X₁)⁺] / E[X₁]`.
#[derive(Clone, Debug)]
pub struct GammaLaw {
    pub k: f64,
    pub chi: f64,
    pub first_steps: Vec<f64>,
    mean: f64,
}

impl GammaLaw {
    pub fn sample(
        ifs: &Ifs,
        label: &Word,
        k: f64,
        chi: f64,
        samples: usize,
        seed: u64,
    ) -> Result<Self> {
        if samples == 0 || label.is_empty() {
            return Err(Error::EmptyCell(label.label()));
        }
        // one stream family per label
        let h = label
            .0
            .iter()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, &s| (h ^ s as u64).wrapping_mul(0x100_0000_01b3));
        let a = label.0[0];
        let rest = &label.0[1..];
        let first_steps = mc::sample_vec(samples, seed ^ h, tag::GAMMA, |rng| {
            let mut tail = rest.to_vec();
            tail.extend((0..DEFAULT_TAIL).map(|_| ifs.sampler().sample(rng)));
            let x = ifs.compose_unchecked(&tail, ifs.base_point());
            -ifs.map(a).deriv(x).ln()
        });
        Ok(Self::from_steps(first_steps, k, chi))
    }

    pub fn from_steps(first_steps: Vec<f64>, k: f64, chi: f64) -> Self {
        let mean = mc::pairwise_sum(&first_steps) / first_steps.len() as f64;
        Self {
            k,
            chi,
            first_steps,
            mean,
        }
    }

    /// `Γ((-∞, t])`; values of `t` outside the support are clamped.
    pub fn cdf(&self, t: f64) -> f64 {
        let s = t - self.k * self.chi;
        if s <= 0.0 {
            return 0.0;
        }
        let v: Vec<f64> = self.first_steps.iter().map(|x| x.min(s)).collect();
        (mc::pairwise_sum(&v) / self.first_steps.len() as f64 / self.mean).min(1.0)
    }

    /// `Γ([a, b])`.
    pub fn prob(&self, a: f64, b: f64) -> f64 {
        (self.cdf(b) - self.cdf(a)).max(0.0)
    }

    /// Upper bound on the density, `1/E[X₁]`.
    pub fn density_bound(&self) -> f64 {
        1.0 / self.mean
    }
}

/// `Γ` CDF of a cell at `t`.
pub fn gamma_cdf(
    ifs: &Ifs,
    cell: &PartitionCell,
    t: f64,
    chi: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    Ok(GammaLaw::sample(ifs, &cell.label, cell.k, chi, samples, seed)?.cdf(t))
}
