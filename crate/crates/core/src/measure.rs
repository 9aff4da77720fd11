//! The self-conformal measure: sampling, Fourier transform, decay fits and
//! ball masses.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ifs::{Ifs, Word};
use crate::mc::{self, tag};
use crate::stats;

/// Automatically chosen depths resolve `MARGIN · |q|` rather than `|q|`,
/// which keeps the truncation bias far below Monte Carlo noise.
pub const AUTO_DEPTH_MARGIN: f64 = 1e3;
pub const MAX_AUTO_DEPTH: usize = 2000;

/// Smallest depth `m` with `ρ^m · |I| ≤ 1/(8|q|)`.
pub fn min_depth(ifs: &Ifs, q: f64) -> usize {
    let need = 8.0 * q.abs() * ifs.interval().len();
    if need <= 1.0 {
        return 0;
    }
    let m = (need.ln() / -ifs.rho().ln()).ceil();
    let mut m = m.max(0.0) as usize;
    // guard against ceil landing one short through rounding
    while ifs.rho().powi(m as i32) * ifs.interval().len() > 1.0 / (8.0 * q.abs()) {
        m += 1;
    }
    m
}

/// Depth used when the caller does not fix one.
pub fn auto_depth(ifs: &Ifs, q: f64) -> Result<usize> {
    let m = min_depth(ifs, q * AUTO_DEPTH_MARGIN).max(1);
    if m > MAX_AUTO_DEPTH {
        return Err(Error::Resolution {
            frequency: q,
            depth: MAX_AUTO_DEPTH,
            min_depth: m,
        });
    }
    Ok(m)
}

#[inline]
fn frac_product(q: f64, x: f64) -> f64 {
    let p = q * x;
    let e = q.mul_add(x, -p);
    let f = (p - p.floor()) + e;
    f - f.floor()
}

#[inline]
fn phase(q: f64, x: f64) -> Complex64 {
    let t = 2.0 * PI * frac_product(q, x);
    Complex64::new(t.cos(), t.sin())
}

/// Monte Carlo estimate of a Fourier coefficient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierEstimate {
    pub q: f64,
    pub value: Complex64,
    pub stderr: f64,
    pub depth: usize,
}

impl FourierEstimate {
    pub fn modulus(&self) -> f64 {
        self.value.norm()
    }
}

/// `N` points `f_w(x₀)` for i.i.d. words `w` of length `m`.
#[derive(Clone, Debug)]
pub struct MeasureSampler<'a> {
    pub ifs: &'a Ifs,
    pub depth: usize,
    pub seed: u64,
    pub count: usize,
    /// Optional outer word `u`: samples become `f_u(f_w(x₀))`.
    pub prefix: Word,
}

impl<'a> MeasureSampler<'a> {
    pub fn new(ifs: &'a Ifs, depth: usize, seed: u64, count: usize) -> Self {
        Self {
            ifs,
            depth,
            seed,
            count,
            prefix: Word::empty(),
        }
    }

    pub fn with_prefix(mut self, prefix: Word) -> Self {
        self.prefix = prefix;
        self
    }

    /// Worst-case distance between a sample and the point it stands for.
    pub fn resolution(&self) -> f64 {
        self.ifs
            .rho()
            .powi((self.depth + self.prefix.len()) as i32)
            * self.ifs.interval().len()
    }

    fn check_frequency(&self, q: f64) -> Result<()> {
        if q != 0.0 && self.resolution() > 1.0 / (8.0 * q.abs()) {
            let m = min_depth(self.ifs, q);
            return Err(Error::Resolution {
                frequency: q,
                depth: self.depth,
                min_depth: m.saturating_sub(self.prefix.len()),
            });
        }
        Ok(())
    }

    #[inline]
    fn draw(&self, rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
        // words are i.i.d., so drawing the innermost symbol first is the same law
        let s = self.ifs.sampler();
        let mut x = self.ifs.base_point();
        for _ in 0..self.depth {
            x = self.ifs.map(s.sample(rng)).value(x);
        }
        self.ifs.compose_unchecked(&self.prefix.0, x)
    }

    pub fn sample_points(&self) -> Vec<f64> {
        mc::sample_vec(self.count, self.seed, tag::MEASURE, |rng| self.draw(rng))
    }

    pub fn fourier_mc(&self, q: f64) -> Result<FourierEstimate> {
        Ok(self.fourier_mc_many(&[q])?.remove(0))
    }

    /// Several frequencies from one sample set.
    pub fn fourier_mc_many(&self, qs: &[f64]) -> Result<Vec<FourierEstimate>> {
        for &q in qs {
            self.check_frequency(q)?;
        }
        let n = self.count;
        let parts = mc::chunked(n, self.seed, tag::MEASURE, |rng, r| {
            let xs: Vec<f64> = r.map(|_| self.draw(rng)).collect();
            qs.iter()
                .map(|&q| {
                    let (re, im): (Vec<f64>, Vec<f64>) = xs
                        .iter()
                        .map(|&x| {
                            let z = phase(q, x);
                            (z.re, z.im)
                        })
                        .unzip();
                    Complex64::new(mc::pairwise_sum(&re), mc::pairwise_sum(&im))
                })
                .collect::<Vec<_>>()
        });
        Ok(qs
            .iter()
            .enumerate()
            .map(|(j, &q)| {
                if q == 0.0 || n == 0 {
                    return FourierEstimate {
                        q,
                        value: Complex64::new(1.0, 0.0),
                        stderr: 0.0,
                        depth: self.depth,
                    };
                }
                let re: Vec<f64> = parts.iter().map(|p| p[j].re).collect();
                let im: Vec<f64> = parts.iter().map(|p| p[j].im).collect();
                let value =
                    Complex64::new(mc::pairwise_sum(&re), mc::pairwise_sum(&im)) / n as f64;
                let stderr = ((1.0 - value.norm_sqr()).max(0.0) / n as f64).sqrt();
                FourierEstimate {
                    q,
                    value,
                    stderr,
                    depth: self.depth,
                }
            })
            .collect())
    }

    /// Empirical `ν(B_r(y))`.
    pub fn ball_mass(&self, y: f64, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        if r >= self.ifs.interval().len() || self.count == 0 {
            return Ok(1.0);
        }
        let pts = self.sample_points();
        Ok(ball_mass_of(&pts, y, r))
    }

    fn check_radius(&self, r: f64) -> Result<()> {
        if !(r > 2.0 * self.resolution()) {
            let need = 2.0 * self.ifs.interval().len() / r;
            let m = if need <= 1.0 {
                0
            } else {
                (need.ln() / -self.ifs.rho().ln()).ceil() as usize + 1
            };
            return Err(Error::Resolution {
                frequency: 1.0 / r,
                depth: self.depth,
                min_depth: m,
            });
        }
        Ok(())
    }

    /// Frostman exponent from `sup_y ν(B_r(y))` over the given radii.
    pub fn frostman_fit(&self, radii: &[f64]) -> Result<FrostmanFit> {
        for &r in radii {
            self.check_radius(r)?;
        }
        let mut pts = self.sample_points();
        pts.sort_by(f64::total_cmp);
        let masses: Vec<f64> = radii.iter().map(|&r| sup_ball_mass(&pts, r)).collect();
        let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
        let ys: Vec<f64> = masses.iter().map(|m| m.ln()).collect();
        let fit = stats::linear_fit(&xs, &ys)?;
        Ok(FrostmanFit {
            radii: radii.to_vec(),
            sup_masses: masses,
            exponent: fit.slope,
            constant: fit.intercept.exp(),
            rms: fit.rms,
        })
    }
}

/// Fraction of `pts` within distance `r` of `y`.
pub fn ball_mass_of(pts: &[f64], y: f64, r: f64) -> f64 {
    if pts.is_empty() {
        return 0.0;
    }
    pts.iter().filter(|&&x| (x - y).abs() <= r).count() as f64 / pts.len() as f64
}

/// `sup_y` of the empirical ball mass; `sorted` must be ascending.
pub fn sup_ball_mass(sorted: &[f64], r: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let mut best = 0;
    let mut j = 0;
    for i in 0..sorted.len() {
        if j < i {
            j = i;
        }
        while j + 1 < sorted.len() && sorted[j + 1] - sorted[i] <= 2.0 * r {
            j += 1;
        }
        best = best.max(j - i + 1);
    }
    best as f64 / sorted.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrostmanFit {
    pub radii: Vec<f64>,
    pub sup_masses: Vec<f64>,
    /// Fitted `d` in `sup_y ν(B_r(y)) ≈ C r^d`.
    pub exponent: f64,
    pub constant: f64,
    pub rms: f64,
}

/// Fourier coefficient of a self-similar measure from the functional
/// equation `F(q) = Σ p_i e^{2πi q b_i} F(r_i q)`.
///
/// Branches stop once `|q|·|I| < tol` and use `e^{2πi q m}` with `m` the
/// mean of the measure, which is within `2π²(q|I|)² Var ≤ 5 tol²` of the
/// true value; the result is a convex combination of such leaves, so the
/// total error is at most `5 tol²`.
pub fn fourier_ss(ifs: &Ifs, q: f64, tol: f64) -> Result<Complex64> {
    let coeffs = ifs.affine_coefficients()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tol must be positive".into()));
    }
    let p = ifs.probabilities();
    let denom: f64 = 1.0 - p.iter().zip(&coeffs).map(|(p, (r, _))| p * r).sum::<f64>();
    let mean = p.iter().zip(&coeffs).map(|(p, (_, b))| p * b).sum::<f64>() / denom;
    let mut memo = HashMap::new();
    Ok(ss_rec(
        q,
        tol,
        ifs.interval().len(),
        mean,
        p,
        &coeffs,
        &mut memo,
    ))
}

fn ss_rec(
    q: f64,
    tol: f64,
    len: f64,
    mean: f64,
    p: &[f64],
    coeffs: &[(f64, f64)],
    memo: &mut HashMap<(bool, i64), Complex64>,
) -> Complex64 {
    if q.abs() * len < tol {
        return phase(q, mean);
    }
    let key = (q < 0.0, (q.abs().ln() * 1e12).round() as i64);
    if let Some(&v) = memo.get(&key) {
        return v;
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (pi, &(r, b)) in p.iter().zip(coeffs) {
        acc += *pi * phase(q, b) * ss_rec(r * q, tol, len, mean, p, coeffs, memo);
    }
    memo.insert(key, acc);
    acc
}

/// Result of fitting `|F_q| ≈ C (log q)^{-α}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    pub frequencies: Vec<f64>,
    pub moduli: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub alpha_hat: f64,
    pub c_hat: f64,
    pub rms: f64,
    pub noise_floor: f64,
    pub n_points: usize,
    /// Residual of each point used in the fit; `None` below the noise gate.
    pub residuals: Vec<Option<f64>>,
    pub depth: usize,
}

fn check_geometric(q: &[f64]) -> Result<()> {
    if q.len() < 8 {
        return Err(Error::TooFewPoints {
            found: q.len(),
            needed: 8,
        });
    }
    if q.iter().any(|&v| !(v > 1.0 && v.is_finite())) {
        return Err(Error::InvalidInput("decay grid needs frequencies > 1".into()));
    }
    let ratio = q[1] / q[0];
    let geometric = ratio > 1.0
        && q
            .windows(2)
            .all(|w| ((w[1] / w[0]) / ratio - 1.0).abs() < 1e-6);
    if !geometric {
        return Err(Error::InvalidInput(
            "decay grid must be increasing and geometric".into(),
        ));
    }
    Ok(())
}

/// Geometric grid of `n` frequencies from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (r * i as f64).exp()).collect()
}

/// Fits the logarithmic decay model over the points above `3/√N`.
pub fn decay_fit(ifs: &Ifs, q_grid: &[f64], samples: usize, seed: u64) -> Result<DecayFit> {
    check_geometric(q_grid)?;
    let qmax = q_grid.iter().cloned().fold(0.0, f64::max);
    let depth = auto_depth(ifs, qmax)?;
    let est = MeasureSampler::new(ifs, depth, seed, samples).fourier_mc_many(q_grid)?;
    decay_fit_from(&est, samples, depth)
}

/// Same fit on precomputed estimates.
pub fn decay_fit_from(est: &[FourierEstimate], samples: usize, depth: usize) -> Result<DecayFit> {
    let floor = 1.0 / (samples as f64).sqrt();
    let gate = 3.0 * floor;
    let moduli: Vec<f64> = est.iter().map(|e| e.modulus()).collect();
    let used: Vec<usize> = (0..est.len()).filter(|&i| moduli[i] > gate).collect();
    if used.len() < 3 {
        return Err(Error::Unresolvable(format!(
            "{} of {} moduli exceed 3/sqrt(N) = {gate:.3e}",
            used.len(),
            est.len()
        )));
    }
    let xs: Vec<f64> = used.iter().map(|&i| est[i].q.ln().ln()).collect();
    let ys: Vec<f64> = used.iter().map(|&i| moduli[i].ln()).collect();
    let fit = stats::linear_fit(&xs, &ys)?;
    let mut residuals = vec![None; est.len()];
    for (k, &i) in used.iter().enumerate() {
        residuals[i] = Some(fit.residuals[k]);
    }
    Ok(DecayFit {
        frequencies: est.iter().map(|e| e.q).collect(),
        moduli,
        stderrs: est.iter().map(|e| e.stderr).collect(),
        alpha_hat: -fit.slope,
        c_hat: fit.intercept.exp(),
        rms: fit.rms,
        noise_floor: floor,
        n_points: used.len(),
        residuals,
        depth,
    })
}

/// Trapezoid average over `z ∈ [z_lo, z_hi]` of `|F_{q e^{-z}}(ν)|²`.
pub fn scaled_fourier_avg(
    ifs: &Ifs,
    q: f64,
    z_lo: f64,
    z_hi: f64,
    grid: usize,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if !(z_hi > z_lo) {
        return Err(Error::InvalidInput("need z_hi > z_lo".into()));
    }
    if grid < 2 {
        return Err(Error::InvalidInput("need at least two z nodes".into()));
    }
    if q == 0.0 {
        return Ok(1.0);
    }
    let zs: Vec<f64> = (0..grid)
        .map(|i| z_lo + (z_hi - z_lo) * i as f64 / (grid - 1) as f64)
        .collect();
    let qs: Vec<f64> = zs.iter().map(|z| q * (-z).exp()).collect();
    let qmax = qs.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let depth = auto_depth(ifs, qmax)?;
    let est = MeasureSampler::new(ifs, depth, seed, samples).fourier_mc_many(&qs)?;
    let vals: Vec<f64> = est.iter().map(|e| e.value.norm_sqr()).collect();
    let inner: f64 = vals[1..grid - 1].iter().sum();
    Ok((0.5 * (vals[0] + vals[grid - 1]) + inner) / (grid - 1) as f64)
}

/// `|F_{q e^{-t}}(f_w ν)|²` by Monte Carlo.
pub fn g_mode(
    ifs: &Ifs,
    q: f64,
    t: f64,
    support_word: &Word,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if support_word.is_empty() {
        return Err(Error::InvalidInput("support word must be nonempty".into()));
    }
    let qe = q * (-t).exp();
    if qe == 0.0 {
        return Ok(1.0);
    }
    let depth = auto_depth(ifs, qe)?
        .saturating_sub(support_word.len())
        .max(1);
    let s = MeasureSampler::new(ifs, depth, seed, samples).with_prefix(support_word.clone());
    Ok(s.fourier_mc(qe)?.value.norm_sqr())
}
