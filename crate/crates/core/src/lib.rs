//! Numerical toolkit for self-conformal measures of interval IFSs: Fourier
//! transforms, the derivative cocycle and its limit theorems, complex transfer
//! operators, and Diophantine and linearity diagnostics.
//!
//! Symbols are 0-based in code (`Word(vec![0, 1])` is `f₁ ∘ f₂`).

pub mod cocycle;
pub mod diophantine;
pub mod error;
pub mod ifs;
pub mod limit;
pub mod linearity;
pub mod mc;
pub mod measure;
pub mod stats;
pub mod transfer;

pub use error::{Error, Result};
pub use ifs::{Conjugacy, Ifs, IfsMap, Interval, MapKind, ValidationReport, Word};

/// Standard example families on `[0, 1]` with uniform weights.
pub mod examples {
    use crate::ifs::{Conjugacy, Ifs, IfsMap, Interval};

    fn unit() -> Interval {
        Interval { lo: 0.0, hi: 1.0 }
    }

    /// `{x/2, x/2 + 1/2}`: the invariant measure is Lebesgue.
    pub fn lebesgue() -> Ifs {
        Ifs::affine(&[(0.5, 0.0), (0.5, 0.5)], vec![0.5, 0.5], unit()).unwrap()
    }

    /// `{x/3, x/3 + 2/3}`: the middle-thirds Cantor measure.
    pub fn cantor() -> Ifs {
        Ifs::affine(&[(1.0 / 3.0, 0.0), (1.0 / 3.0, 2.0 / 3.0)], vec![0.5, 0.5], unit()).unwrap()
    }

    /// `{x/2, x/3 + 2/3}`: two distinct contraction ratios.
    pub fn two_ratio() -> Ifs {
        Ifs::affine(&[(0.5, 0.0), (1.0 / 3.0, 2.0 / 3.0)], vec![0.5, 0.5], unit()).unwrap()
    }

    /// `{x/2 + x²/8, (x + 2)/3}`: genuinely nonlinear.
    pub fn nonlinear() -> Ifs {
        let iv = unit();
        Ifs::new(
            vec![
                IfsMap::polynomial(vec![0.0, 0.5, 0.125], iv).unwrap(),
                IfsMap::affine(1.0 / 3.0, 2.0 / 3.0, iv).unwrap(),
            ],
            vec![0.5, 0.5],
            iv,
        )
        .unwrap()
    }

    /// The Lebesgue family conjugated by `h₀(x) = (eˣ - 1)/(e - 1)`.
    pub fn exp_conjugated_lebesgue() -> Ifs {
        lebesgue().conjugate(Conjugacy::Exp { rate: 1.0 }).unwrap()
    }
}
