use std::fmt;

use super::poly;
use crate::error::{Error, Result};

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidInput(format!("bad interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Maps `x` to the unit coordinate `(x - lo) / len`.
    pub fn to_unit(&self, x: f64) -> f64 {
        (x - self.lo) / self.len()
    }

    pub fn from_unit(&self, t: f64) -> f64 {
        self.lo + t * self.len()
    }

    pub(crate) fn check(&self, x: f64) -> Result<()> {
        // a few ulps of slack for points produced by composing maps
        let slack = 1e-12 * self.len();
        if x >= self.lo - slack && x <= self.hi + slack {
            Ok(())
        } else {
            Err(Error::OutsideInterval {
                x,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Smooth increasing self-diffeomorphism `H` of the domain used to build
/// conjugated-affine maps `H ∘ (r x + b) ∘ H⁻¹`.
///
/// Both families are written on the unit coordinate `t ∈ [0, 1]` and fix the
/// endpoints, so `H` maps the domain onto itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Conjugacy {
    /// `η(t) = (e^{a t} - 1) / (e^a - 1)`; `log η'` is affine in `t`.
    Exp { rate: f64 },
    /// `η(t) = (t + c t²) / (1 + c)` with `c > -1/2`.
    Quadratic { curvature: f64 },
}

impl Conjugacy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Conjugacy::Exp { rate } if rate == 0.0 || !rate.is_finite() => Err(
                Error::InvalidInput("exp conjugacy needs a nonzero finite rate".into()),
            ),
            Conjugacy::Quadratic { curvature } if !(curvature > -0.5 && curvature.is_finite()) => {
                Err(Error::InvalidInput(
                    "quadratic conjugacy needs curvature > -1/2".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Conjugacy::Exp { .. } => "exp",
            Conjugacy::Quadratic { .. } => "quadratic",
        }
    }

    pub fn parameter(&self) -> f64 {
        match *self {
            Conjugacy::Exp { rate } => rate,
            Conjugacy::Quadratic { curvature } => curvature,
        }
    }

    pub fn eta(&self, t: f64) -> f64 {
        match *self {
            Conjugacy::Exp { rate } => (rate * t).exp_m1() / rate.exp_m1(),
            Conjugacy::Quadratic { curvature: c } => (t + c * t * t) / (1.0 + c),
        }
    }

    pub fn eta_d1(&self, t: f64) -> f64 {
        match *self {
            Conjugacy::Exp { rate } => rate * (rate * t).exp() / rate.exp_m1(),
            Conjugacy::Quadratic { curvature: c } => (1.0 + 2.0 * c * t) / (1.0 + c),
        }
    }

    pub fn eta_d2(&self, t: f64) -> f64 {
        match *self {
            Conjugacy::Exp { rate } => rate * rate * (rate * t).exp() / rate.exp_m1(),
            Conjugacy::Quadratic { curvature: c } => 2.0 * c / (1.0 + c),
        }
    }

    pub fn eta_inv(&self, s: f64) -> f64 {
        match *self {
            Conjugacy::Exp { rate } => (s * rate.exp_m1()).ln_1p() / rate,
            Conjugacy::Quadratic { curvature: c } => {
                if c == 0.0 {
                    s
                } else {
                    // stable root of c t^2 + t - s (1 + c) = 0
                    let k = s * (1.0 + c);
                    2.0 * k / (1.0 + (1.0 + 4.0 * c * k).sqrt())
                }
            }
        }
    }
}

/// How `f'` varies over the domain; used to locate `max f'_w` exactly for
/// composed words.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivativeTrend {
    Constant,
    Increasing,
    Decreasing,
    Mixed,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MapKind {
    Affine {
        ratio: f64,
        offset: f64,
    },
    /// Coefficients `a_0 .. a_d`, `d <= 4`.
    Polynomial {
        coefficients: Vec<f64>,
    },
    ConjugatedAffine {
        ratio: f64,
        offset: f64,
        conjugacy: Conjugacy,
    },
}

/// One orientation-preserving contraction of the domain, stored symbolically
/// so that first and second derivatives are exact.
#[derive(Clone, Debug, PartialEq)]
pub struct IfsMap {
    kind: MapKind,
    domain: Interval,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

pub const MAX_POLY_DEGREE: usize = 4;

impl IfsMap {
    pub fn affine(ratio: f64, offset: f64, domain: Interval) -> Result<Self> {
        if !(ratio.is_finite() && offset.is_finite()) {
            return Err(Error::InvalidInput("non-finite affine coefficient".into()));
        }
        Ok(Self::build(MapKind::Affine { ratio, offset }, domain))
    }

    pub fn polynomial(coefficients: Vec<f64>, domain: Interval) -> Result<Self> {
        if coefficients.is_empty() || coefficients.len() > MAX_POLY_DEGREE + 1 {
            return Err(Error::InvalidInput(format!(
                "polynomial maps need 1..={} coefficients, got {}",
                MAX_POLY_DEGREE + 1,
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite polynomial coefficient".into()));
        }
        Ok(Self::build(MapKind::Polynomial { coefficients }, domain))
    }

    pub fn conjugated_affine(
        ratio: f64,
        offset: f64,
        conjugacy: Conjugacy,
        domain: Interval,
    ) -> Result<Self> {
        conjugacy.validate()?;
        if !(ratio.is_finite() && offset.is_finite()) {
            return Err(Error::InvalidInput("non-finite affine coefficient".into()));
        }
        Ok(Self::build(
            MapKind::ConjugatedAffine {
                ratio,
                offset,
                conjugacy,
            },
            domain,
        ))
    }

    /// `H ∘ g ∘ H⁻¹` for an affine `g`, where `H` is the conjugacy on `domain`.
    pub fn conjugate_of(inner: &IfsMap, conjugacy: Conjugacy) -> Result<Self> {
        match inner.kind {
            MapKind::Affine { ratio, offset } => {
                Self::conjugated_affine(ratio, offset, conjugacy, inner.domain)
            }
            _ => Err(Error::NonAffine(
                "only affine maps can be conjugated".into(),
            )),
        }
    }

    fn build(kind: MapKind, domain: Interval) -> Self {
        let (d1, d2) = match &kind {
            MapKind::Polynomial { coefficients } => {
                let d1 = poly::derivative(coefficients);
                let d2 = poly::derivative(&d1);
                (d1, d2)
            }
            _ => (Vec::new(), Vec::new()),
        };
        Self {
            kind,
            domain,
            d1,
            d2,
        }
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn is_affine(&self) -> bool {
        matches!(self.kind, MapKind::Affine { .. })
    }

    /// Ratio `r` of an affine map.
    pub fn affine_ratio(&self) -> Option<f64> {
        match self.kind {
            MapKind::Affine { ratio, .. } => Some(ratio),
            _ => None,
        }
    }

    pub fn affine_offset(&self) -> Option<f64> {
        match self.kind {
            MapKind::Affine { offset, .. } => Some(offset),
            _ => None,
        }
    }

    // H and its derivatives in the original coordinate.
    fn h(&self, c: &Conjugacy, x: f64) -> f64 {
        self.domain.from_unit(c.eta(self.domain.to_unit(x)))
    }
    fn h_inv(&self, c: &Conjugacy, y: f64) -> f64 {
        self.domain.from_unit(c.eta_inv(self.domain.to_unit(y)))
    }
    fn h_d1(&self, c: &Conjugacy, x: f64) -> f64 {
        c.eta_d1(self.domain.to_unit(x))
    }
    fn h_d2(&self, c: &Conjugacy, x: f64) -> f64 {
        c.eta_d2(self.domain.to_unit(x)) / self.domain.len()
    }

    pub fn value(&self, x: f64) -> f64 {
        match &self.kind {
            MapKind::Affine { ratio, offset } => ratio * x + offset,
            MapKind::Polynomial { coefficients } => poly::eval(coefficients, x),
            MapKind::ConjugatedAffine {
                ratio,
                offset,
                conjugacy,
            } => {
                let u = self.h_inv(conjugacy, x);
                self.h(conjugacy, ratio * u + offset)
            }
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match &self.kind {
            MapKind::Affine { ratio, .. } => *ratio,
            MapKind::Polynomial { .. } => poly::eval(&self.d1, x),
            MapKind::ConjugatedAffine {
                ratio,
                offset,
                conjugacy,
            } => {
                let u = self.h_inv(conjugacy, x);
                ratio * self.h_d1(conjugacy, ratio * u + offset) / self.h_d1(conjugacy, u)
            }
        }
    }

    pub fn deriv2(&self, x: f64) -> f64 {
        match &self.kind {
            MapKind::Affine { .. } => 0.0,
            MapKind::Polynomial { .. } => poly::eval(&self.d2, x),
            MapKind::ConjugatedAffine {
                ratio,
                offset,
                conjugacy,
            } => {
                let u = self.h_inv(conjugacy, x);
                let v = ratio * u + offset;
                let (a, b) = (ratio * self.h_d1(conjugacy, v), self.h_d1(conjugacy, u));
                let a1 = ratio * ratio * self.h_d2(conjugacy, v);
                let b1 = self.h_d2(conjugacy, u);
                (a1 * b - a * b1) / (b * b * b)
            }
        }
    }

    /// `(f(x), f'(x))` in one call.
    #[inline]
    pub fn value_deriv(&self, x: f64) -> (f64, f64) {
        (self.value(x), self.deriv(x))
    }

    /// Candidate points where `f'` can attain its extrema on the domain: the
    /// endpoints plus the real roots of `f''` for polynomials. Conjugated maps
    /// fall back to a dense grid (refined by the caller).
    pub(crate) fn derivative_extremum_candidates(&self) -> Vec<f64> {
        let (lo, hi) = (self.domain.lo, self.domain.hi);
        match &self.kind {
            MapKind::Affine { .. } => vec![lo, hi],
            MapKind::Polynomial { .. } => {
                let mut pts = vec![lo, hi];
                pts.extend(poly::real_roots_in(&self.d2, lo, hi));
                pts
            }
            MapKind::ConjugatedAffine { .. } => dense_grid(self.domain, 1025),
        }
    }

    /// Candidate points where `f` can attain extrema: endpoints plus real
    /// critical points of `f`.
    pub(crate) fn value_extremum_candidates(&self) -> Vec<f64> {
        let (lo, hi) = (self.domain.lo, self.domain.hi);
        match &self.kind {
            MapKind::Polynomial { .. } => {
                let mut pts = vec![lo, hi];
                pts.extend(poly::real_roots_in(&self.d1, lo, hi));
                pts.extend(poly::real_roots_in(&self.d2, lo, hi));
                pts
            }
            // monotone whenever f' > 0, which validation checks separately
            _ => self.derivative_extremum_candidates(),
        }
    }

    /// `(min f', argmin, max f', argmax)` over the domain.
    pub fn derivative_range(&self) -> (f64, f64, f64, f64) {
        let cands = self.derivative_extremum_candidates();
        let mut res = (f64::INFINITY, f64::NAN, f64::NEG_INFINITY, f64::NAN);
        for &x in &cands {
            let d = self.deriv(x);
            if d < res.0 {
                res.0 = d;
                res.1 = x;
            }
            if d > res.2 {
                res.2 = d;
                res.3 = x;
            }
        }
        if matches!(self.kind, MapKind::ConjugatedAffine { .. }) {
            let step = self.domain.len() / (cands.len() - 1) as f64;
            let (xmin, xmax) = (res.1, res.3);
            let (m1, a1) = golden_extremum(|x| self.deriv(x), xmin, step, self.domain, false);
            if m1 < res.0 {
                res.0 = m1;
                res.1 = a1;
            }
            let (m2, a2) = golden_extremum(|x| self.deriv(x), xmax, step, self.domain, true);
            if m2 > res.2 {
                res.2 = m2;
                res.3 = a2;
            }
        }
        res
    }

    /// `sup |f''/f'|` over the domain (dense scan for non-affine maps).
    pub fn log_derivative_lipschitz(&self) -> f64 {
        if self.is_affine() {
            return 0.0;
        }
        dense_grid(self.domain, 2049)
            .into_iter()
            .map(|x| (self.deriv2(x) / self.deriv(x)).abs())
            .fold(0.0, f64::max)
    }

    pub fn derivative_trend(&self) -> DerivativeTrend {
        match &self.kind {
            MapKind::Affine { .. } => DerivativeTrend::Constant,
            MapKind::ConjugatedAffine { ratio, conjugacy, .. } => match conjugacy {
                // log f' is affine in H^{-1}(x) with slope a (r - 1) / len
                Conjugacy::Exp { rate } => {
                    let slope = rate * (ratio - 1.0);
                    if slope == 0.0 {
                        DerivativeTrend::Constant
                    } else if slope > 0.0 {
                        DerivativeTrend::Increasing
                    } else {
                        DerivativeTrend::Decreasing
                    }
                }
                Conjugacy::Quadratic { .. } => self.scan_trend(),
            },
            MapKind::Polynomial { .. } => self.scan_trend(),
        }
    }

    fn scan_trend(&self) -> DerivativeTrend {
        let (lo, hi) = (self.domain.lo, self.domain.hi);
        let samples: Vec<f64> = match &self.kind {
            MapKind::Polynomial { .. } => {
                if self.d2.iter().all(|&c| c == 0.0) {
                    return DerivativeTrend::Constant;
                }
                // sign of f'' between consecutive roots
                let mut breaks = vec![lo];
                breaks.extend(poly::real_roots_in(&self.d2, lo, hi));
                breaks.push(hi);
                breaks
                    .windows(2)
                    .map(|w| poly::eval(&self.d2, 0.5 * (w[0] + w[1])))
                    .collect()
            }
            _ => dense_grid(self.domain, 513)
                .into_iter()
                .map(|x| self.deriv2(x))
                .collect(),
        };
        let pos = samples.iter().any(|&v| v > 0.0);
        let neg = samples.iter().any(|&v| v < 0.0);
        match (pos, neg) {
            (false, false) => DerivativeTrend::Constant,
            (true, false) => DerivativeTrend::Increasing,
            (false, true) => DerivativeTrend::Decreasing,
            (true, true) => DerivativeTrend::Mixed,
        }
    }

    /// The unique fixed point, by bisection on `f(x) - x` to 1e-14.
    ///
    /// Assumes the map is a contraction of its domain, so `f(lo) >= lo` and
    /// `f(hi) <= hi`.
    pub fn fixed_point(&self) -> f64 {
        if let MapKind::Affine { ratio, offset } = self.kind {
            if ratio != 1.0 {
                return offset / (1.0 - ratio);
            }
        }
        let g = |x: f64| self.value(x) - x;
        let (mut a, mut b) = (self.domain.lo, self.domain.hi);
        let (ga, gb) = (g(a), g(b));
        if ga <= 0.0 {
            return a;
        }
        if gb >= 0.0 {
            return b;
        }
        while b - a > 1e-14 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if g(mid) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }
}

impl fmt::Display for IfsMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            MapKind::Affine { ratio, offset } => write!(f, "{ratio}·x + {offset}"),
            MapKind::Polynomial { coefficients } => {
                let terms: Vec<String> = coefficients
                    .iter()
                    .enumerate()
                    .map(|(k, c)| match k {
                        0 => format!("{c}"),
                        1 => format!("{c}·x"),
                        _ => format!("{c}·x^{k}"),
                    })
                    .collect();
                write!(f, "{}", terms.join(" + "))
            }
            MapKind::ConjugatedAffine {
                ratio,
                offset,
                conjugacy,
            } => write!(
                f,
                "H∘({ratio}·x + {offset})∘H⁻¹ [{}({})]",
                conjugacy.tag(),
                conjugacy.parameter()
            ),
        }
    }
}

pub(crate) fn dense_grid(domain: Interval, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| domain.lo + domain.len() * i as f64 / (n - 1) as f64)
        .collect()
}

/// Golden-section refinement of an extremum bracketed by `center ± step`.
fn golden_extremum(
    f: impl Fn(f64) -> f64,
    center: f64,
    step: f64,
    domain: Interval,
    maximize: bool,
) -> (f64, f64) {
    let sign = if maximize { -1.0 } else { 1.0 };
    let g = |x: f64| sign * f(x);
    let mut a = (center - step).max(domain.lo);
    let mut b = (center + step).min(domain.hi);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    for _ in 0..80 {
        if g(c) < g(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - inv_phi * (b - a);
        d = a + inv_phi * (b - a);
    }
    let x = 0.5 * (a + b);
    (f(x), x)
}
