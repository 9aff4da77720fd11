//! Complex transfer operators `P_{iθ}` acting on functions that are constant
//! on depth-`m` cylinders.
//!
//! Cylinder `[w₁ … w_m]` has index `Σ w_i n^{m-i}` (first symbol most
//! significant). Its representative point is `f_w(x₀)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::cocycle::VarianceEstimate;
use crate::error::{Error, Result};
use crate::ifs::Ifs;
use crate::mc::{self, tag};
use crate::stats;

/// Largest number of cylinders an operator may carry.
pub const MAX_CYLINDERS: usize = 10_000_000;
/// `leading_eigen` is restricted to `|θ|` up to this radius.
pub const EIGEN_RADIUS: f64 = 0.1;
pub const EIGEN_MAX_ITER: usize = 100_000;
const PAR_THRESHOLD: usize = 1 << 14;

/// Default depth: 8 for up to three symbols, 5 otherwise.
pub fn default_depth(symbols: usize) -> usize {
    if symbols <= 3 {
        8
    } else {
        5
    }
}

fn cylinder_count(symbols: usize, depth: usize) -> Result<usize> {
    let mut total: usize = 1;
    for _ in 0..depth {
        total = total
            .checked_mul(symbols)
            .filter(|&t| t <= MAX_CYLINDERS)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "{symbols}^{depth} cylinders exceed the budget of {MAX_CYLINDERS}"
                ))
            })?;
    }
    Ok(total)
}

/// Digits of a cylinder index, first symbol first.
pub fn index_word(mut idx: usize, depth: usize, symbols: usize) -> Vec<u8> {
    let mut w = vec![0u8; depth];
    for k in (0..depth).rev() {
        w[k] = (idx % symbols) as u8;
        idx /= symbols;
    }
    w
}

/// Function on the shift space constant on depth-`m` cylinders.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderFunction {
    pub depth: usize,
    pub symbols: usize,
    /// Metric parameter ρ of `d_ρ(u, v) = ρ^{first differing index}`.
    pub rho: f64,
    pub values: Vec<Complex64>,
}

impl CylinderFunction {
    pub fn constant(depth: usize, symbols: usize, rho: f64, c: Complex64) -> Result<Self> {
        let len = cylinder_count(symbols, depth)?;
        Ok(Self {
            depth,
            symbols,
            rho,
            values: vec![c; len],
        })
    }

    pub fn one(depth: usize, symbols: usize, rho: f64) -> Result<Self> {
        Self::constant(depth, symbols, rho, Complex64::new(1.0, 0.0))
    }

    /// Values from a function of the cylinder word.
    pub fn from_fn(
        depth: usize,
        symbols: usize,
        rho: f64,
        f: impl Fn(&[u8]) -> Complex64,
    ) -> Result<Self> {
        let len = cylinder_count(symbols, depth)?;
        let values = (0..len)
            .map(|i| f(&index_word(i, depth, symbols)))
            .collect();
        Ok(Self {
            depth,
            symbols,
            rho,
            values,
        })
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `c₁(φ) = max_{u ≠ v} |φ(u) - φ(v)| / ρ^{s(u,v)}` with `s` the first
    /// (1-based) differing index.
    ///
    /// Pairs splitting at index `s` share a prefix of length `s - 1`, so it is
    /// enough to take, at each prefix level, the diameter of every block.
    pub fn lipschitz_constant(&self) -> f64 {
        let mut best: f64 = 0.0;
        let mut block = self.values.len();
        for j in 0..self.depth {
            let weight = self.rho.powi(-(j as i32 + 1));
            for chunk in self.values.chunks(block) {
                best = best.max(diameter(chunk) * weight);
            }
            block /= self.symbols;
        }
        best
    }

    /// `‖φ‖∞ + c₁(φ)`.
    pub fn norm_lip(&self) -> f64 {
        self.sup_norm() + self.lipschitz_constant()
    }

    /// `max(‖φ‖∞, c₁(φ)/(2 C₆ |θ|))`.
    pub fn norm_theta(&self, theta: f64, c6: f64) -> Result<f64> {
        norm_theta_parts(self.sup_norm(), self.lipschitz_constant(), theta, c6)
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }
}

/// Norm from precomputed `‖φ‖∞` and `c₁(φ)`.
pub fn norm_theta_parts(sup: f64, c1: f64, theta: f64, c6: f64) -> Result<f64> {
    if theta == 0.0 {
        return Err(Error::InvalidInput("the theta-norm needs theta != 0".into()));
    }
    if !(c6 > 0.0) {
        return Err(Error::InvalidInput("C6 must be positive".into()));
    }
    Ok(sup.max(c1 / (2.0 * c6 * theta.abs())))
}

fn cross(o: Complex64, a: Complex64, b: Complex64) -> f64 {
    (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
}

/// Largest pairwise distance: convex hull (monotone chain), then all pairs
/// of hull vertices.
fn diameter(pts: &[Complex64]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let first = pts[0];
    if pts.iter().all(|&p| p == first) {
        return 0.0;
    }
    let mut p: Vec<Complex64> = pts.to_vec();
    p.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    p.dedup();
    if p.len() <= 3 {
        return max_pair(&p);
    }
    let mut hull: Vec<Complex64> = Vec::with_capacity(2 * p.len());
    for &q in &p {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
            hull.pop();
        }
        hull.push(q);
    }
    let lower = hull.len() + 1;
    for &q in p.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
            hull.pop();
        }
        hull.push(q);
    }
    max_pair(&hull)
}

fn max_pair(p: &[Complex64]) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            best = best.max((p[i] - p[j]).norm());
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatorConfig {
    pub theta: f64,
    pub depth: usize,
    /// Replace `c` by `c - χ`, i.e. multiply by `e^{-2πiθχ}`.
    pub recentred: bool,
    pub chi: f64,
}

/// `P_{iθ} φ(w) = Σ_a p_a e^{2πiθ c(a, w)} φ((a w)|_m)`.
#[derive(Clone, Debug)]
pub struct TransferOperator {
    pub config: OperatorConfig,
    symbols: usize,
    rho: f64,
    /// `weights[idx * n + a]`.
    weights: Vec<Complex64>,
    /// `ℙ([w])` per cylinder.
    masses: Vec<f64>,
    high: usize,
}

impl TransferOperator {
    pub fn new(ifs: &Ifs, config: OperatorConfig) -> Result<Self> {
        if config.depth == 0 {
            return Err(Error::InvalidInput("operator depth must be >= 1".into()));
        }
        let n = ifs.len();
        let len = cylinder_count(n, config.depth)?;
        let p = ifs.probabilities();
        let shift = if config.recentred { config.chi } else { 0.0 };
        let build = |idx: usize| -> (Vec<Complex64>, f64) {
            let w = index_word(idx, config.depth, n);
            let x = ifs.compose_unchecked(&w, ifs.base_point());
            let ws = (0..n)
                .map(|a| {
                    let c = -ifs.map(a as u8).deriv(x).ln() - shift;
                    Complex64::from_polar(p[a], 2.0 * PI * config.theta * c)
                })
                .collect();
            let mass = w.iter().map(|&s| p[s as usize]).product();
            (ws, mass)
        };
        let built: Vec<(Vec<Complex64>, f64)> = if len >= PAR_THRESHOLD {
            (0..len).into_par_iter().map(build).collect()
        } else {
            (0..len).map(build).collect()
        };
        let mut weights = Vec::with_capacity(len * n);
        let mut masses = Vec::with_capacity(len);
        for (w, m) in built {
            weights.extend(w);
            masses.push(m);
        }
        Ok(Self {
            config,
            symbols: n,
            rho: ifs.rho(),
            weights,
            masses,
            high: len / n,
        })
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn one(&self) -> CylinderFunction {
        CylinderFunction {
            depth: self.config.depth,
            symbols: self.symbols,
            rho: self.rho,
            values: vec![Complex64::new(1.0, 0.0); self.len()],
        }
    }

    pub fn apply(&self, phi: &CylinderFunction) -> Result<CylinderFunction> {
        if phi.depth != self.config.depth || phi.symbols != self.symbols {
            return Err(Error::DepthMismatch {
                expected: self.config.depth,
                found: phi.depth,
            });
        }
        let n = self.symbols;
        let cell = |idx: usize| -> Complex64 {
            let tail = idx / n;
            let w = &self.weights[idx * n..idx * n + n];
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, wa) in w.iter().enumerate() {
                acc += wa * phi.values[a * self.high + tail];
            }
            acc
        };
        let values = if self.len() >= PAR_THRESHOLD {
            (0..self.len()).into_par_iter().map(cell).collect()
        } else {
            (0..self.len()).map(cell).collect()
        };
        Ok(CylinderFunction {
            depth: phi.depth,
            symbols: n,
            rho: phi.rho,
            values,
        })
    }

    pub fn apply_n(&self, phi: &CylinderFunction, n: usize) -> Result<CylinderFunction> {
        let mut out = phi.clone();
        for _ in 0..n {
            out = self.apply(&out)?;
        }
        Ok(out)
    }

    /// `ℙ`-weighted mean `Σ ℙ([w]) φ(w)`.
    pub fn mean(&self, phi: &CylinderFunction) -> Complex64 {
        phi.values
            .iter()
            .zip(&self.masses)
            .map(|(v, m)| v * m)
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct Eigen {
    pub lambda: Complex64,
    /// Normalised to `ℙ`-mean 1.
    pub vector: CylinderFunction,
    pub iterations: usize,
}

/// Dominant eigenpair by power iteration for small `|θ|`.
///
/// The iterate is kept at `ℙ`-mean 1, so `λ_k = mean(P φ_k)`; at `θ = 0`
/// this is exactly 1 because `ℙ` is stationary. Stops once both `λ` and the
/// iterate move by less than `1e-12`.
pub fn leading_eigen(op: &TransferOperator) -> Result<Eigen> {
    if op.config.theta.abs() > EIGEN_RADIUS {
        return Err(Error::Precondition(format!(
            "leading_eigen is limited to |theta| <= {EIGEN_RADIUS}, got {}",
            op.config.theta
        )));
    }
    let mut rng = mc::stream_rng(0x5eed, tag::EIGEN, 0);
    let mut phi = op.one();
    for v in &mut phi.values {
        *v += Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 0.01;
    }
    let m = op.mean(&phi);
    phi.values.iter_mut().for_each(|v| *v /= m);
    let mut lambda = Complex64::new(f64::NAN, 0.0);
    for it in 1..=EIGEN_MAX_ITER {
        let next = op.apply(&phi)?;
        let new_lambda = op.mean(&next);
        if new_lambda.norm() < 1e-300 {
            return Err(Error::Numerical(
                "iterate lost its mean; eigenvector orthogonal to the start".into(),
            ));
        }
        let normed: Vec<Complex64> = next.values.iter().map(|v| v / new_lambda).collect();
        let moved = normed
            .iter()
            .zip(&phi.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let dl = (new_lambda - lambda).norm();
        phi.values = normed;
        lambda = new_lambda;
        if dl < 1e-12 && moved < 1e-12 {
            return Ok(Eigen {
                lambda,
                vector: phi,
                iterations: it,
            });
        }
    }
    Err(Error::NonConvergence(EIGEN_MAX_ITER))
}

/// Test functions for operator-norm lower bounds. Kinds cycle through
/// multiscale Lipschitz, oscillatory, rough and sign-switching functions.
pub fn probe_set(
    depth: usize,
    symbols: usize,
    rho: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<CylinderFunction>> {
    (0..count)
        .map(|i| {
            let mut rng = mc::stream_rng(seed, tag::PROBE, i as u64);
            let unit = |rng: &mut rand_chacha::ChaCha8Rng| {
                let r: f64 = rng.gen::<f64>().sqrt();
                Complex64::from_polar(r, 2.0 * PI * rng.gen::<f64>())
            };
            let table: Vec<Vec<Complex64>> = (0..depth)
                .map(|_| (0..symbols).map(|_| unit(&mut rng)).collect())
                .collect();
            match i % 4 {
                0 => CylinderFunction::from_fn(depth, symbols, rho, |w| {
                    w.iter()
                        .enumerate()
                        .map(|(j, &s)| table[j][s as usize] * rho.powi(j as i32))
                        .sum()
                }),
                1 => {
                    let amp = 1.0 + 99.0 * rng.gen::<f64>();
                    CylinderFunction::from_fn(depth, symbols, rho, |w| {
                        let t: f64 = w
                            .iter()
                            .enumerate()
                            .map(|(j, &s)| table[j][s as usize].re * rho.powi(j as i32))
                            .sum();
                        Complex64::from_polar(1.0, amp * t)
                    })
                }
                2 => {
                    let len = cylinder_count(symbols, depth)?;
                    let vals: Vec<Complex64> = (0..len).map(|_| unit(&mut rng)).collect();
                    Ok(CylinderFunction {
                        depth,
                        symbols,
                        rho,
                        values: vals,
                    })
                }
                _ => {
                    let level = rng.gen_range(0..depth);
                    CylinderFunction::from_fn(depth, symbols, rho, |w| {
                        let base = Complex64::new(1.0, 0.0)
                            + table[0][w[0] as usize] * 0.25;
                        if table[level][w[level] as usize].re >= 0.0 {
                            base
                        } else {
                            -base
                        }
                    })
                }
            }
        })
        .collect()
}

/// Largest `‖P^n φ‖_(θ)` over normalised probes and `n = 1..=n_max`,
/// probe `𝟙` included. Returns the maximum ratio at `n_max` and the maximum
/// over all `n`.
fn probe_ratios(
    op: &TransferOperator,
    probes: &[CylinderFunction],
    n_max: usize,
    c6: f64,
) -> Result<(f64, f64)> {
    let theta = op.config.theta;
    let mut at_n = 0.0f64;
    let mut over_all = 0.0f64;
    let one = op.one();
    for probe in std::iter::once(&one).chain(probes.iter()) {
        let norm0 = probe.norm_theta(theta, c6)?;
        if norm0 == 0.0 {
            continue;
        }
        let mut phi = probe.clone();
        phi.scale(1.0 / norm0);
        for k in 1..=n_max {
            phi = op.apply(&phi)?;
            let r = phi.norm_theta(theta, c6)?;
            over_all = over_all.max(r);
            if k == n_max {
                at_n = at_n.max(r);
            }
        }
        if n_max == 0 {
            at_n = at_n.max(1.0);
        }
    }
    Ok((at_n, over_all))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub c6: f64,
    pub start: f64,
    pub doublings: usize,
}

/// Smallest `C₆ = start · 2^j` such that no probe grows in the θ-norm
/// under `P_{iθ}^n`, `n ≤ n_max`, for every θ of the grid.
///
/// `start = max(Lip(c)/(1 - ρ), 1)`.
pub fn c6_calibrate(
    ifs: &Ifs,
    theta_grid: &[f64],
    n_max: usize,
    depth: usize,
    probes: usize,
    seed: u64,
) -> Result<Calibration> {
    let start = (ifs.cocycle_lipschitz() / (1.0 - ifs.rho())).max(1.0);
    let probe_fns = probe_set(depth, ifs.len(), ifs.rho(), probes, seed)?;
    let ops = theta_grid
        .iter()
        .filter(|&&t| t != 0.0)
        .map(|&theta| {
            TransferOperator::new(
                ifs,
                OperatorConfig {
                    theta,
                    depth,
                    recentred: false,
                    chi: 0.0,
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    for j in 0..=20 {
        let c6 = start * 2f64.powi(j);
        let worst = ops
            .par_iter()
            .map(|op| probe_ratios(op, &probe_fns, n_max, c6).map(|r| r.1))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        if worst <= 1.0 + 1e-12 {
            return Ok(Calibration {
                c6,
                start,
                doublings: j as usize,
            });
        }
    }
    Err(Error::Calibration(20))
}

/// `n(β, θ) = ⌊β log|θ|⌋`.
pub fn n_beta_theta(beta: f64, theta: f64) -> usize {
    (beta * theta.abs().ln()).floor().max(0.0) as usize
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DolgopyatRow {
    pub theta: f64,
    pub n: usize,
    /// Probe lower bound on `‖P_{iθ}^n‖_(θ)`.
    pub norm_estimate: f64,
    pub one_minus_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DolgopyatReport {
    pub rows: Vec<DolgopyatRow>,
    /// `(C, α)` in `1 - g(θ) ≈ C θ^{-α}`, when at least two rows have a gap.
    pub fit: Option<(f64, f64)>,
    /// Log-residuals of the rows used in the fit.
    pub residuals: Vec<f64>,
    pub c6: f64,
    pub probes: usize,
}

/// Probe estimates of `‖P_{iθ}^{n(β,θ)}‖_(θ)` over a grid of `|θ| > 1`.
pub fn dolgopyat_check(
    ifs: &Ifs,
    theta_grid: &[f64],
    beta: f64,
    depth: usize,
    c6: f64,
    probes: usize,
    seed: u64,
) -> Result<DolgopyatReport> {
    if theta_grid.iter().any(|t| t.abs() <= 1.0) {
        return Err(Error::Precondition("dolgopyat_check needs |theta| > 1".into()));
    }
    let probe_fns = probe_set(depth, ifs.len(), ifs.rho(), probes, seed)?;
    let rows = theta_grid
        .par_iter()
        .map(|&theta| {
            let op = TransferOperator::new(
                ifs,
                OperatorConfig {
                    theta,
                    depth,
                    recentred: false,
                    chi: 0.0,
                },
            )?;
            let n = n_beta_theta(beta, theta);
            let (g, _) = probe_ratios(&op, &probe_fns, n, c6)?;
            if g > 1.0 + 1e-9 {
                return Err(Error::NormExceeded { theta, norm: g });
            }
            Ok(DolgopyatRow {
                theta,
                n,
                norm_estimate: g,
                one_minus_norm: 1.0 - g,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let used: Vec<&DolgopyatRow> = rows.iter().filter(|r| r.one_minus_norm > 0.0).collect();
    let (fit, residuals) = if used.len() >= 2 {
        let xs: Vec<f64> = used.iter().map(|r| r.theta.abs().ln()).collect();
        let ys: Vec<f64> = used.iter().map(|r| r.one_minus_norm.ln()).collect();
        match stats::linear_fit(&xs, &ys) {
            Ok(f) => (Some((f.intercept.exp(), -f.slope)), f.residuals),
            Err(_) => (None, Vec::new()),
        }
    } else {
        (None, Vec::new())
    };
    Ok(DolgopyatReport {
        rows,
        fit,
        residuals,
        c6,
        probes,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureFit {
    /// Fitted `c` in `log ‖P^n 𝟙‖∞ ≈ -c θ² n`.
    pub c: f64,
    /// `(θ, n, ‖P^n 𝟙‖∞)`.
    pub points: Vec<(f64, usize, f64)>,
}

/// Through-origin fit of `log ‖P_{iθ}^n 𝟙‖∞` against `θ² n`.
pub fn curvature_check(
    ifs: &Ifs,
    thetas: &[f64],
    n_max: usize,
    depth: usize,
    variance: &VarianceEstimate,
    chi: f64,
) -> Result<CurvatureFit> {
    if variance.degenerate {
        return Err(Error::DegenerateVariance(format!(
            "r0^2 = {:.3e}",
            variance.r0_sq
        )));
    }
    let mut points = Vec::new();
    for &theta in thetas {
        let op = TransferOperator::new(
            ifs,
            OperatorConfig {
                theta,
                depth,
                recentred: true,
                chi,
            },
        )?;
        let mut phi = op.one();
        for n in 1..=n_max {
            phi = op.apply(&phi)?;
            points.push((theta, n, phi.sup_norm()));
        }
    }
    let xs: Vec<f64> = points.iter().map(|(t, n, _)| t * t * *n as f64).collect();
    let ys: Vec<f64> = points.iter().map(|(_, _, v)| -v.ln()).collect();
    let c = stats::origin_fit(&xs, &ys)?;
    Ok(CurvatureFit { c, points })
}

/// `‖P_{iθ}^n 𝟙‖∞` for `|θ| > 1`, `n > 2β log|θ|`.
pub fn decay_of_one(op: &TransferOperator, n: usize, beta: f64) -> Result<f64> {
    let theta = op.config.theta;
    if theta.abs() <= 1.0 {
        return Err(Error::Precondition(format!("need |theta| > 1, got {theta}")));
    }
    if (n as f64) <= 2.0 * beta * theta.abs().ln() {
        return Err(Error::Precondition(format!(
            "need n > 2·beta·log|theta| = {:.3}, got {n}",
            2.0 * beta * theta.abs().ln()
        )));
    }
    Ok(op.apply_n(&op.one(), n)?.sup_norm())
}
