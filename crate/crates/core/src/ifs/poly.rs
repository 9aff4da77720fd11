//! Small dense polynomials in the monomial basis, lowest degree first.

/// Horner evaluation of `c[0] + c[1] x + ... + c[d] x^d`.
pub fn eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

/// Drops trailing zero coefficients so the degree is honest.
fn trimmed(coeffs: &[f64]) -> &[f64] {
    let mut end = coeffs.len();
    while end > 0 && coeffs[end - 1] == 0.0 {
        end -= 1;
    }
    &coeffs[..end]
}

/// All real roots of the polynomial inside `[lo, hi]`, sorted.
///
/// Roots of the derivative split the interval into monotone pieces; each piece
/// holds at most one root, located by bisection. Exact for degree <= 1 and
/// bisection-accurate otherwise. An identically zero polynomial has no
/// isolated roots and yields an empty list.
pub fn real_roots_in(coeffs: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let c = trimmed(coeffs);
    match c.len() {
        0 | 1 => Vec::new(),
        2 => {
            let r = -c[0] / c[1];
            if (lo..=hi).contains(&r) {
                vec![r]
            } else {
                Vec::new()
            }
        }
        _ => {
            let mut breaks = vec![lo];
            breaks.extend(real_roots_in(&derivative(c), lo, hi));
            breaks.push(hi);
            let zero_tol = 1e-14 * c.iter().map(|v| v.abs()).sum::<f64>();
            let mut roots: Vec<f64> = Vec::new();
            for w in breaks.windows(2) {
                let (a, b) = (w[0], w[1]);
                let (fa, fb) = (eval(c, a), eval(c, b));
                let root = if fa.abs() <= zero_tol {
                    Some(a)
                } else if fb.abs() <= zero_tol {
                    Some(b)
                } else if fa.signum() != fb.signum() {
                    Some(bisect(|x| eval(c, x), a, b, fa))
                } else {
                    None
                };
                if let Some(r) = root {
                    if roots.last().map_or(true, |&last| (r - last).abs() > 1e-14) {
                        roots.push(r);
                    }
                }
            }
            roots
        }
    }
}

/// Bisection for a sign change on `[a, b]`; `fa` is `f(a)`.
pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_matches_direct() {
        let c = [1.0, -2.0, 0.5, 3.0];
        let x = 0.7_f64;
        let direct = 1.0 - 2.0 * x + 0.5 * x * x + 3.0 * x.powi(3);
        assert!((eval(&c, x) - direct).abs() < 1e-15);
    }

    #[test]
    fn cubic_roots() {
        // (x - 0.2)(x - 0.5)(x - 0.9)
        let c = [-0.09, 0.73, -1.6, 1.0];
        let r = real_roots_in(&c, 0.0, 1.0);
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([0.2, 0.5, 0.9]) {
            assert!((got - want).abs() < 1e-13, "{got} vs {want}");
        }
        assert_eq!(real_roots_in(&c, 0.3, 0.4).len(), 0);
    }

    #[test]
    fn quartic_double_root_is_found() {
        // (x - 0.5)^2 (x + 3)(x - 4): the double root touches zero without a sign
        // change and is caught at the derivative break.
        let c = [-3.0, 11.75, -10.75, -2.0, 1.0];
        let r = real_roots_in(&c, 0.0, 1.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constants_have_no_roots() {
        assert!(real_roots_in(&[0.0], 0.0, 1.0).is_empty());
        assert!(real_roots_in(&[2.0, 0.0, 0.0], 0.0, 1.0).is_empty());
    }
}
