//! Iterated function systems of `C²` contractions on an interval.

mod map;
pub mod poly;

use std::fmt;

use rand::Rng;

pub use map::{Conjugacy, DerivativeTrend, IfsMap, Interval, MapKind, MAX_POLY_DEGREE};

use crate::error::{Error, Result};

/// Finite word over the alphabet `{0, .., n-1}` (0-based internally).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(pub Vec<u8>);

impl Word {
    pub fn new(symbols: Vec<u8>) -> Self {
        Word(symbols)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// Builds a word from 1-based symbols as they are usually written.
    pub fn from_one_based(symbols: &[u8]) -> Self {
        Word(symbols.iter().map(|&s| s - 1).collect())
    }

    pub fn repeat(symbol: u8, len: usize) -> Self {
        Word(vec![symbol; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word(self.0[..n.min(self.len())].to_vec())
    }

    /// Word label in 1-based notation, e.g. `1.2.2`.
    pub fn label(&self) -> String {
        if self.0.is_empty() {
            return "-".into();
        }
        self.0
            .iter()
            .map(|s| (s + 1).to_string())
            .collect::<Vec<_>>()
            .join(".")
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Draws i.i.d. symbols with law `p` by inverse CDF.
#[derive(Clone, Debug)]
pub struct SymbolSampler {
    cumulative: Vec<f64>,
}

impl SymbolSampler {
    pub fn new(p: &[f64]) -> Self {
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = p
            .iter()
            .map(|&pi| {
                acc += pi;
                acc
            })
            .collect();
        if let Some(last) = cumulative.last_mut() {
            *last = f64::INFINITY;
        }
        Self { cumulative }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u8 {
        let u: f64 = rng.gen();
        self.cumulative.partition_point(|&c| c <= u) as u8
    }

    pub fn word<R: Rng + ?Sized>(&self, rng: &mut R, len: usize) -> Word {
        Word((0..len).map(|_| self.sample(rng)).collect())
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, buf: &mut [u8]) {
        for s in buf.iter_mut() {
            *s = self.sample(rng);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub witness: Option<f64>,
    pub detail: String,
}

/// Outcome of checking every standing hypothesis on an IFS.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    /// `sup f'` over all maps.
    pub rho: f64,
    /// `min (-log f')`.
    pub d_min: f64,
    /// `max (-log f')`.
    pub d_max: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: impl Into<String>, passed: bool, witness: Option<f64>, detail: String) {
        self.checks.push(CheckResult {
            name: name.into(),
            passed,
            witness,
            detail,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            write!(f, "[{}] {}", if c.passed { "pass" } else { "FAIL" }, c.name)?;
            if let Some(x) = c.witness {
                write!(f, " (x = {x})")?;
            }
            if !c.detail.is_empty() {
                write!(f, ": {}", c.detail)?;
            }
            writeln!(f)?;
        }
        write!(
            f,
            "rho = {}, D = {}, D' = {}",
            self.rho, self.d_min, self.d_max
        )
    }
}

/// Contraction family, probability vector and cached constants.
#[derive(Clone, Debug)]
pub struct Ifs {
    maps: Vec<IfsMap>,
    probs: Vec<f64>,
    interval: Interval,
    rho: f64,
    d_min: f64,
    d_max: f64,
    trends: Vec<DerivativeTrend>,
    sampler: SymbolSampler,
}

impl Ifs {
    /// Builds and validates; fails with the full report if any check fails.
    pub fn new(maps: Vec<IfsMap>, probs: Vec<f64>, interval: Interval) -> Result<Self> {
        let ifs = Self::new_unchecked(maps, probs, interval)?;
        let report = ifs.validate();
        if report.passed() {
            Ok(ifs)
        } else {
            Err(Error::Validation(Box::new(report)))
        }
    }

    /// Builds without checking the contraction hypotheses (shape checks only).
    pub fn new_unchecked(maps: Vec<IfsMap>, probs: Vec<f64>, interval: Interval) -> Result<Self> {
        if maps.is_empty() || maps.len() > u8::MAX as usize {
            return Err(Error::InvalidInput(format!(
                "need between 1 and 255 maps, got {}",
                maps.len()
            )));
        }
        if probs.len() != maps.len() {
            return Err(Error::InvalidInput(format!(
                "{} probabilities for {} maps",
                probs.len(),
                maps.len()
            )));
        }
        if maps.iter().any(|m| m.domain() != interval) {
            return Err(Error::InvalidInput(
                "every map must share the IFS interval as its domain".into(),
            ));
        }
        let mut rho = f64::NEG_INFINITY;
        let mut d_min = f64::INFINITY;
        let mut d_max = f64::NEG_INFINITY;
        for m in &maps {
            let (lo, _, hi, _) = m.derivative_range();
            rho = rho.max(hi);
            d_min = d_min.min(-hi.ln());
            d_max = d_max.max(-lo.ln());
        }
        let trends = maps.iter().map(|m| m.derivative_trend()).collect();
        let sampler = SymbolSampler::new(&probs);
        Ok(Self {
            maps,
            probs,
            interval,
            rho,
            d_min,
            d_max,
            trends,
            sampler,
        })
    }

    /// Two-map affine family `{r1 x + b1, r2 x + b2}` with probabilities `p`.
    pub fn affine(ratios_offsets: &[(f64, f64)], probs: Vec<f64>, interval: Interval) -> Result<Self> {
        let maps = ratios_offsets
            .iter()
            .map(|&(r, b)| IfsMap::affine(r, b, interval))
            .collect::<Result<Vec<_>>>()?;
        Self::new(maps, probs, interval)
    }

    /// Replaces every (affine) map `g` by `H ∘ g ∘ H⁻¹`.
    pub fn conjugate(&self, conjugacy: Conjugacy) -> Result<Self> {
        let maps = self
            .maps
            .iter()
            .map(|m| IfsMap::conjugate_of(m, conjugacy))
            .collect::<Result<Vec<_>>>()?;
        Self::new(maps, self.probs.clone(), self.interval)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport {
            checks: Vec::new(),
            rho: self.rho,
            d_min: self.d_min,
            d_max: self.d_max,
        };
        let iv = self.interval;
        let slack = 1e-12 * iv.len();

        let sum: f64 = self.probs.iter().sum();
        let positive = self.probs.iter().all(|&p| p > 0.0 && p.is_finite());
        rep.push(
            "probabilities positive and summing to 1",
            positive && (sum - 1.0).abs() <= 1e-12,
            None,
            format!("sum = {sum}"),
        );

        for (i, m) in self.maps.iter().enumerate() {
            let label = i + 1;
            let mut worst: Option<(f64, f64)> = None;
            for x in m.value_extremum_candidates() {
                let y = m.value(x);
                let excess = (iv.lo - y).max(y - iv.hi);
                if worst.map_or(true, |(e, _)| excess > e) {
                    worst = Some((excess, x));
                }
            }
            let (excess, wx) = worst.unwrap_or((f64::NEG_INFINITY, iv.lo));
            rep.push(
                format!("map {label}: self-map f(I) ⊆ I"),
                excess <= slack,
                (excess > slack).then_some(wx),
                if excess > slack {
                    format!("f(x) = {} leaves {iv}", m.value(wx))
                } else {
                    String::new()
                },
            );

            let (lo, argmin, hi, argmax) = m.derivative_range();
            rep.push(
                format!("map {label}: inf f' > 0"),
                lo > 0.0,
                Some(argmin),
                format!("inf f' = {lo}"),
            );
            rep.push(
                format!("map {label}: sup f' < 1"),
                hi < 1.0,
                Some(argmax),
                format!("sup f' = {hi}"),
            );
        }

        let fixed: Vec<f64> = self.maps.iter().map(|m| m.fixed_point()).collect();
        let distinct = fixed
            .iter()
            .any(|&a| fixed.iter().any(|&b| (a - b).abs() > 1e-12));
        rep.push(
            "at least two maps with distinct fixed points",
            self.maps.len() >= 2 && distinct,
            None,
            format!("fixed points {fixed:?}"),
        );
        rep.push(
            "0 < D <= D' < inf",
            self.d_min > 0.0 && self.d_min <= self.d_max && self.d_max.is_finite(),
            None,
            String::new(),
        );
        rep
    }

    pub fn maps(&self) -> &[IfsMap] {
        &self.maps
    }

    pub fn map(&self, a: u8) -> &IfsMap {
        &self.maps[a as usize]
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn sampler(&self) -> &SymbolSampler {
        &self.sampler
    }

    /// `ρ = sup f'`.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `D = min(-log f')`.
    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    /// `D' = max(-log f')`.
    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn base_point(&self) -> f64 {
        self.interval.midpoint()
    }

    pub fn all_affine(&self) -> bool {
        self.maps.iter().all(|m| m.is_affine())
    }

    /// `(r_i, b_i)` for an all-affine family.
    pub fn affine_coefficients(&self) -> Result<Vec<(f64, f64)>> {
        self.maps
            .iter()
            .map(|m| match m.kind() {
                MapKind::Affine { ratio, offset } => Ok((*ratio, *offset)),
                _ => Err(Error::NonAffine(format!("map {m} is not affine"))),
            })
            .collect()
    }

    pub fn fixed_points(&self) -> Vec<f64> {
        self.maps.iter().map(|m| m.fixed_point()).collect()
    }

    /// `max_a sup |f_a''/f_a'| · |I| / ρ`: Lipschitz constant of the cocycle
    /// `c(a, ·)` in the symbolic metric with parameter ρ.
    pub fn cocycle_lipschitz(&self) -> f64 {
        let l = self
            .maps
            .iter()
            .map(|m| m.log_derivative_lipschitz())
            .fold(0.0, f64::max);
        l * self.interval.len() / self.rho
    }

    /// `max_a sup |f_a''/f_a'|`.
    pub fn log_derivative_lipschitz(&self) -> f64 {
        self.maps
            .iter()
            .map(|m| m.log_derivative_lipschitz())
            .fold(0.0, f64::max)
    }

    fn check_symbols(&self, w: &[u8]) -> Result<()> {
        match w.iter().find(|&&s| s as usize >= self.maps.len()) {
            Some(s) => Err(Error::InvalidInput(format!(
                "symbol {} out of range for {} maps",
                s + 1,
                self.maps.len()
            ))),
            None => Ok(()),
        }
    }

    /// `f_{w_1} ∘ … ∘ f_{w_m}(x)`; the last symbol acts first.
    pub fn compose_eval(&self, w: &Word, x: f64) -> Result<f64> {
        self.interval.check(x)?;
        self.check_symbols(&w.0)?;
        Ok(self.compose_unchecked(&w.0, x))
    }

    #[inline]
    pub(crate) fn compose_unchecked(&self, w: &[u8], x: f64) -> f64 {
        w.iter().rev().fold(x, |y, &a| self.maps[a as usize].value(y))
    }

    /// `f'_w(x)` by the chain rule.
    pub fn derivative_word(&self, w: &Word, x: f64) -> Result<f64> {
        self.interval.check(x)?;
        self.check_symbols(&w.0)?;
        let mut y = x;
        let mut d = 1.0;
        for &a in w.0.iter().rev() {
            let (v, dv) = self.maps[a as usize].value_deriv(y);
            d *= dv;
            y = v;
        }
        Ok(d)
    }

    /// `log f'_w(x)`, safe for long words.
    pub fn log_derivative_word(&self, w: &Word, x: f64) -> Result<f64> {
        self.interval.check(x)?;
        self.check_symbols(&w.0)?;
        Ok(self.log_derivative_unchecked(&w.0, x))
    }

    pub(crate) fn log_derivative_unchecked(&self, w: &[u8], x: f64) -> f64 {
        let mut y = x;
        let mut s = 0.0;
        for &a in w.iter().rev() {
            let (v, dv) = self.maps[a as usize].value_deriv(y);
            s += dv.ln();
            y = v;
        }
        s
    }

    /// `f_w(x₀)`, within `ρ^|w| · |I|` of `x_ω` for any extension `ω` of `w`.
    pub fn coding_point(&self, w: &Word) -> f64 {
        self.compose_unchecked(&w.0, self.base_point())
    }

    /// `max_{x ∈ I} f'_w(x)`.
    ///
    /// When every map in `w` has monotone `f'` of the same direction, so does
    /// the composition and the maximum sits at an endpoint. Otherwise a dense
    /// grid plus golden-section refinement is used.
    pub fn max_derivative_word(&self, w: &[u8]) -> f64 {
        let iv = self.interval;
        let deriv = |x: f64| {
            let mut y = x;
            let mut d = 1.0;
            for &a in w.iter().rev() {
                let (v, dv) = self.maps[a as usize].value_deriv(y);
                d *= dv;
                y = v;
            }
            d
        };
        let nondecreasing = w.iter().all(|&a| {
            matches!(
                self.trends[a as usize],
                DerivativeTrend::Constant | DerivativeTrend::Increasing
            )
        });
        if nondecreasing {
            return deriv(iv.hi);
        }
        let nonincreasing = w.iter().all(|&a| {
            matches!(
                self.trends[a as usize],
                DerivativeTrend::Constant | DerivativeTrend::Decreasing
            )
        });
        if nonincreasing {
            return deriv(iv.lo);
        }
        let grid = map::dense_grid(iv, 257);
        let (mut best, mut arg) = (f64::NEG_INFINITY, iv.lo);
        for &x in &grid {
            let d = deriv(x);
            if d > best {
                best = d;
                arg = x;
            }
        }
        let step = iv.len() / 256.0;
        let (mut a, mut b) = ((arg - step).max(iv.lo), (arg + step).min(iv.hi));
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..60 {
            let c = b - inv_phi * (b - a);
            let d = a + inv_phi * (b - a);
            if deriv(c) > deriv(d) {
                b = d;
            } else {
                a = c;
            }
        }
        best.max(deriv(0.5 * (a + b)))
    }
}

impl fmt::Display for Ifs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "interval {}", self.interval)?;
        for (i, (m, p)) in self.maps.iter().zip(&self.probs).enumerate() {
            writeln!(f, "f{} = {m}  (p = {p})", i + 1)?;
        }
        Ok(())
    }
}
