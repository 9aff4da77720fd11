//! Central and local limit theorems for the centred walk `S_n - nχ`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::cocycle::{self, GammaLaw, Trajectory, VarianceEstimate, DEFAULT_TAIL};
use crate::error::{Error, Result};
use crate::ifs::{Ifs, Word};
use crate::mc::{self, tag};
use crate::stats::{self, normal_cdf};

/// Which formula `G_n` uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DensityConvention {
    /// Density of `N(0, n r₀²)`.
    #[default]
    Standard,
    /// `e^{-v² r₀²/(2n)} / √(2πn)`, kept for literal comparison.
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianModel {
    pub n: usize,
    pub r0: f64,
    pub chi: f64,
    pub convention: DensityConvention,
}

impl GaussianModel {
    pub fn new(n: usize, r0: f64, chi: f64) -> Self {
        Self {
            n,
            r0,
            chi,
            convention: DensityConvention::Standard,
        }
    }

    /// `G_n(v)`.
    pub fn density(&self, v: f64) -> f64 {
        let n = self.n as f64;
        match self.convention {
            DensityConvention::Standard => {
                let s2 = n * self.r0 * self.r0;
                (-v * v / (2.0 * s2)).exp() / (2.0 * PI * s2).sqrt()
            }
            DensityConvention::Literal => {
                (-v * v * self.r0 * self.r0 / (2.0 * n)).exp() / (2.0 * PI * n).sqrt()
            }
        }
    }
}

/// Exact `χ` and `r₀²` for affine families; Monte Carlo otherwise, with
/// the difference estimator for `r₀²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WalkStats {
    pub chi: f64,
    pub chi_stderr: f64,
    pub variance: VarianceEstimate,
}

impl WalkStats {
    pub fn estimate(ifs: &Ifs, samples: usize, n: usize, seed: u64) -> Result<Self> {
        let chi = cocycle::lyapunov_chi(ifs, samples, n, seed)?;
        let variance = cocycle::variance_r0_difference(ifs, samples, n, seed)?;
        Ok(Self {
            chi: chi.value,
            chi_stderr: chi.stderr,
            variance,
        })
    }

    pub fn r0(&self) -> f64 {
        self.variance.r0_sq.max(0.0).sqrt()
    }

    fn require_nondegenerate(&self) -> Result<()> {
        if self.variance.degenerate {
            return Err(Error::DegenerateVariance(format!(
                "r0^2 = {:.3e}",
                self.variance.r0_sq
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CltMethod {
    /// Binomial atom enumeration (two-map affine families only).
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

/// `sup_z |ℙ((S_n - nχ)/√n ≤ z) - Φ(z/r₀)|`.
pub fn clt_error(ifs: &Ifs, n: usize, method: CltMethod, stats: &WalkStats) -> Result<f64> {
    stats.require_nondegenerate()?;
    if n == 0 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    let r0 = stats.r0();
    let sqrt_n = (n as f64).sqrt();
    let mut atoms: Vec<(f64, f64)> = match method {
        CltMethod::Exact => {
            let c = ifs.affine_coefficients()?;
            if c.len() != 2 {
                return Err(Error::InvalidInput(
                    "the exact oracle needs exactly two affine maps".into(),
                ));
            }
            let (a, b) = (-c[0].0.ln(), -c[1].0.ln());
            let p = ifs.probabilities()[0];
            let ln_choose = |k: usize| ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0);
            (0..=n)
                .map(|k| {
                    let s = k as f64 * a + (n - k) as f64 * b;
                    let w = (ln_choose(k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp();
                    ((s - n as f64 * stats.chi) / sqrt_n, w)
                })
                .collect()
        }
        CltMethod::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidInput("need samples > 0".into()));
            }
            let sums = cocycle::random_sums(ifs, samples, &[n], seed, tag::WALK);
            let w = 1.0 / samples as f64;
            sums.iter()
                .map(|s| ((s[0] - n as f64 * stats.chi) / sqrt_n, w))
                .collect()
        }
    };
    atoms.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut best: f64 = 0.0;
    let mut cdf = 0.0;
    let mut i = 0;
    while i < atoms.len() {
        let z = atoms[i].0;
        let phi = normal_cdf(z / r0);
        best = best.max((cdf - phi).abs());
        while i < atoms.len() && atoms[i].0 == z {
            cdf += atoms[i].1;
            i += 1;
        }
        best = best.max((cdf.min(1.0) - phi).abs());
    }
    Ok(best.min(1.0))
}

/// Distinct step values when the step law is finitely supported (≤ 16
/// values), else `None`.
pub fn lattice_steps(ifs: &Ifs, seed: u64) -> Option<Vec<f64>> {
    let mut vals: Vec<f64> = if let Ok(c) = ifs.affine_coefficients() {
        c.iter().map(|(r, _)| -r.ln()).collect()
    } else {
        mc::sample_vec(4096, seed, tag::LATTICE, |rng| {
            let w = ifs.sampler().word(rng, 1 + DEFAULT_TAIL);
            cocycle::walk_steps(ifs, &w.0[..1], &Word(w.0[1..].to_vec()))[0]
        })
    };
    vals.sort_by(f64::total_cmp);
    vals.dedup_by(|a, b| (*a - *b).abs() <= 1e-9);
    (vals.len() <= 16).then_some(vals)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LltReport {
    pub n: usize,
    pub tail: String,
    pub c_lo: f64,
    pub c_hi: f64,
    pub v: f64,
    pub mass: f64,
    pub gn: f64,
    pub ratio: f64,
    pub lambda_c: f64,
    pub stderr: f64,
    pub lattice: bool,
    /// Lattice span when the step law is lattice.
    pub lattice_gap: Option<f64>,
    /// Set when `λ(C) < 4 · gap` on a lattice walk.
    pub warning: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LltConfig {
    pub n: usize,
    pub tail: Word,
    pub c_lo: f64,
    pub c_hi: f64,
    pub v: f64,
    pub samples: usize,
    pub seed: u64,
    /// Moderate-deviation constant: `|v| ≤ √(R n log n)`.
    pub r_const: f64,
    pub convention: DensityConvention,
}

/// Centred sums `S_n - nχ` over random length-`n` words closed by `tail`.
fn centred_sums(ifs: &Ifs, n: usize, tail: &Word, chi: f64, samples: usize, seed: u64) -> Vec<f64> {
    let x_tail = ifs.coding_point(tail);
    mc::sample_vec(samples, seed, tag::LLT, |rng| {
        let s = ifs.sampler();
        let mut y = x_tail;
        let mut acc = 0.0;
        for _ in 0..n {
            let (v, d) = ifs.map(s.sample(rng)).value_deriv(y);
            acc -= d.ln();
            y = v;
        }
        acc - n as f64 * chi
    })
}

/// `μ_{n,ω}(C + v) / G_n(v)`, to be compared with `λ(C)`.
pub fn llt_ratio(ifs: &Ifs, cfg: &LltConfig, stats: &WalkStats) -> Result<LltReport> {
    stats.require_nondegenerate()?;
    let n = cfg.n;
    if n < 2 {
        return Err(Error::InvalidInput("llt needs n >= 2".into()));
    }
    let bound = (cfg.r_const * n as f64 * (n as f64).ln()).sqrt();
    if cfg.v.abs() > bound {
        return Err(Error::Precondition(format!(
            "|v| = {} exceeds sqrt(R n log n) = {bound}",
            cfg.v.abs()
        )));
    }
    let lambda_c = (cfg.c_hi - cfg.c_lo).max(0.0);
    let model = GaussianModel {
        n,
        r0: stats.r0(),
        chi: stats.chi,
        convention: cfg.convention,
    };
    let gn = model.density(cfg.v);
    let lattice = lattice_steps(ifs, cfg.seed);
    let gap = lattice.as_ref().map(|vals| {
        vals.windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    });
    let warning = match gap {
        Some(g) if lambda_c < 4.0 * g => Some(format!(
            "lattice walk (gap {g:.6}); interval of length {lambda_c} is not resolved"
        )),
        _ => None,
    };
    let (mass, stderr) = if lambda_c == 0.0 || cfg.samples == 0 {
        (0.0, 0.0)
    } else {
        let sums = centred_sums(ifs, n, &cfg.tail, stats.chi, cfg.samples, cfg.seed);
        let (lo, hi) = (cfg.c_lo + cfg.v, cfg.c_hi + cfg.v);
        let hits = sums.iter().filter(|&&s| s >= lo && s <= hi).count();
        let m = hits as f64 / cfg.samples as f64;
        (m, (m * (1.0 - m) / cfg.samples as f64).sqrt())
    };
    Ok(LltReport {
        n,
        tail: cfg.tail.label(),
        c_lo: cfg.c_lo,
        c_hi: cfg.c_hi,
        v: cfg.v,
        mass,
        gn,
        ratio: mass / gn,
        lambda_c,
        stderr: stderr / gn,
        lattice: lattice.is_some(),
        lattice_gap: gap,
        warning,
    })
}

/// `ψ_{ε,C} = 𝟙_C * α_ε` for the Gaussian mollifier `α`.
pub fn smoothed_indicator(v: f64, c_lo: f64, c_hi: f64, eps: f64) -> f64 {
    normal_cdf((v - c_lo) / eps) - normal_cdf((v - c_hi) / eps)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothLltReport {
    /// Monte Carlo `E ψ(S_n - nχ)`.
    pub lhs: f64,
    pub lhs_stderr: f64,
    /// `∫ ψ G_n` by quadrature.
    pub rhs: f64,
    pub difference: f64,
}

/// Both sides of the smoothed local limit statement.
#[allow(clippy::too_many_arguments)]
pub fn smooth_llt(
    ifs: &Ifs,
    tail: &Word,
    n: usize,
    c_lo: f64,
    c_hi: f64,
    eps: f64,
    samples: usize,
    seed: u64,
    stats: &WalkStats,
) -> Result<SmoothLltReport> {
    stats.require_nondegenerate()?;
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let sums = centred_sums(ifs, n, tail, stats.chi, samples, seed);
    let vals: Vec<f64> = sums
        .iter()
        .map(|&s| smoothed_indicator(s, c_lo, c_hi, eps))
        .collect();
    let (lhs, lhs_stderr) = mc::mean_stderr(&vals);
    let model = GaussianModel::new(n, stats.r0(), stats.chi);
    let sigma = (n as f64).sqrt() * stats.r0();
    let reach = 10.0 * (sigma + eps);
    let a = (c_lo - reach).min(-reach);
    let b = (c_hi + reach).max(reach);
    let rhs = stats::integrate(
        |v| smoothed_indicator(v, c_lo, c_hi, eps) * model.density(v),
        a,
        b,
        400,
        16,
    );
    Ok(SmoothLltReport {
        lhs,
        lhs_stderr,
        rhs,
        difference: lhs - rhs,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellReport {
    pub label: Word,
    pub count: usize,
    pub hits: usize,
    pub emp_prob: f64,
    pub gamma_prob: f64,
    pub abs_err: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalLltReport {
    pub k: f64,
    pub h_prime: f64,
    pub chi: f64,
    pub j: (f64, f64),
    pub cells: Vec<CellReport>,
    pub total: usize,
    pub total_hits: usize,
    pub retained: usize,
    pub dropped_cells: usize,
    pub retained_fraction: f64,
    /// `Σ (count/retained) · |emp - Γ|` over retained cells.
    pub weighted_error: f64,
    /// Standard error of the weighted error from the binomial cell noise.
    pub weighted_stderr: f64,
    /// Unconditional `ℙ(S_{τ_k} ∈ J)`.
    pub unconditional: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalLltConfig {
    pub k: f64,
    pub h_prime: f64,
    pub j_lo: f64,
    pub j_hi: f64,
    pub samples: usize,
    pub gamma_samples: usize,
    pub min_cell: usize,
    pub seed: u64,
}

/// Per-cell comparison of `ℙ(S_{τ_k} ∈ J | cell)` with the cell's `Γ(J)`.
pub fn conditional_llt(
    ifs: &Ifs,
    cfg: &ConditionalLltConfig,
    chi: f64,
) -> Result<ConditionalLltReport> {
    let (k, h) = (cfg.k, cfg.h_prime);
    let (lo, hi) = (k * chi, k * chi + ifs.d_max());
    if !(cfg.j_lo >= lo - 1e-12 && cfg.j_hi <= hi + 1e-12 && cfg.j_lo <= cfg.j_hi) {
        return Err(Error::InvalidInput(format!(
            "J = [{}, {}] must lie in [{lo}, {hi}]",
            cfg.j_lo, cfg.j_hi
        )));
    }
    let len = cocycle::trajectory_length(ifs, k, h, chi);
    let parts = mc::chunked(cfg.samples, cfg.seed, tag::CLLT, |rng, r| {
        let mut counts: BTreeMap<Vec<u8>, (usize, usize)> = BTreeMap::new();
        for _ in r {
            let w = ifs.sampler().word(rng, len);
            let traj = Trajectory::new(ifs, w);
            let cell = cocycle::cell_of(ifs, &traj, k, h, chi)?;
            let s = traj.sum(cell.tau_k);
            let e = counts.entry(cell.label.0).or_insert((0, 0));
            e.0 += 1;
            if s >= cfg.j_lo && s <= cfg.j_hi {
                e.1 += 1;
            }
        }
        Ok(counts)
    });
    let mut counts: BTreeMap<Vec<u8>, (usize, usize)> = BTreeMap::new();
    for part in parts {
        for (label, (c, hits)) in part? {
            let e = counts.entry(label).or_insert((0, 0));
            e.0 += c;
            e.1 += hits;
        }
    }
    let total: usize = counts.values().map(|v| v.0).sum();
    let total_hits: usize = counts.values().map(|v| v.1).sum();
    let kept: Vec<(&Vec<u8>, &(usize, usize))> =
        counts.iter().filter(|(_, v)| v.0 >= cfg.min_cell).collect();
    if kept.is_empty() {
        return Err(Error::EmptyCell(format!(
            "no cell reaches {} samples",
            cfg.min_cell
        )));
    }
    let retained: usize = kept.iter().map(|(_, v)| v.0).sum();
    let cells = kept
        .iter()
        .map(|(label, &(count, hits))| {
            let label = Word((*label).clone());
            let gamma = GammaLaw::sample(ifs, &label, k, chi, cfg.gamma_samples, cfg.seed)?;
            let g = gamma.prob(cfg.j_lo, cfg.j_hi);
            let emp = hits as f64 / count as f64;
            Ok(CellReport {
                label,
                count,
                hits,
                emp_prob: emp,
                gamma_prob: g,
                abs_err: (emp - g).abs(),
                stderr: (emp * (1.0 - emp) / count as f64).sqrt(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let weighted_error = cells
        .iter()
        .map(|c| c.count as f64 / retained as f64 * c.abs_err)
        .sum();
    let weighted_stderr = cells
        .iter()
        .map(|c| (c.count as f64 / retained as f64 * c.stderr).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(ConditionalLltReport {
        k,
        h_prime: h,
        chi,
        j: (cfg.j_lo, cfg.j_hi),
        dropped_cells: counts.len() - cells.len(),
        cells,
        total,
        total_hits,
        retained,
        retained_fraction: retained as f64 / total as f64,
        weighted_error,
        weighted_stderr,
        unconditional: total_hits as f64 / total as f64,
    })
}
