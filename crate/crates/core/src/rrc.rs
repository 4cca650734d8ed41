//! Randomized Reference Classifier.
//!
//! Each class support `g_i` is modelled as a beta random variable with mean
//! `g_i` and concentration `M`. The probability that class `i` wins is
//!
//! ```text
//! P_i = ∫₀¹ pdf_i(u) · Π_{k≠i} cdf_k(u) du
//! ```
//!
//! evaluated with composite Simpson quadrature on 513 equally spaced nodes.
//! The integrand behaves like `u^(M-1)` near zero, so only `u = 1` can be
//! singular, and only for the single class whose `b_i < 1`. That class is
//! obtained as the complement of the others.

use statrs::function::gamma::ln_gamma;

use crate::data::{argmax_with_tie_break, ClassLabel, SupportVector};
use crate::error::{Error, Result};

pub const SUPPORT_CLIP: f64 = 1e-9;
pub const QUADRATURE_NODES: usize = 513;

const CF_EPS: f64 = f64::EPSILON;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 10_000;

/// Class-assignment probabilities of the randomized model.
#[derive(Debug, Clone, PartialEq)]
pub struct RrcProbabilities(Vec<f64>);

impl RrcProbabilities {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn argmax(&self) -> ClassLabel {
        argmax_with_tie_break(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
}

/// Beta parameters `a_i = M g̃_i`, `b_i = M (1 - g̃_i)` with `g̃` clipped to
/// `[1e-9, 1 - 1e-9]`.
pub fn beta_params(supports: &SupportVector) -> Vec<BetaParams> {
    let m = supports.len() as f64;
    supports
        .values()
        .iter()
        .map(|g| {
            let g = g.clamp(SUPPORT_CLIP, 1.0 - SUPPORT_CLIP);
            BetaParams {
                a: m * g,
                b: m * (1.0 - g),
            }
        })
        .collect()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized incomplete beta function `I_u(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, u: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("beta parameters a={a}, b={b}")));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!("u={u} outside [0,1]")));
    }
    Ok(inc_beta(a, b, u, ln_beta(a, b)))
}

fn inc_beta(a: f64, b: f64, u: f64, lnb: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let front = (a * u.ln() + b * (1.0 - u).ln() - lnb).exp();
    if u < (a + 1.0) / (a + b + 2.0) {
        (front * beta_cf(a, b, u) / a).clamp(0.0, 1.0)
    } else {
        (1.0 - front * beta_cf(b, a, 1.0 - u) / b).clamp(0.0, 1.0)
    }
}

/// Continued fraction for the incomplete beta function, modified Lentz.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let guard = |v: f64| if v.abs() < CF_TINY { CF_TINY } else { v };
    let mut c = 1.0;
    let mut d = 1.0 / guard(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() <= CF_EPS {
            break;
        }
    }
    h
}

fn beta_pdf(p: BetaParams, lnb: f64, u: f64) -> f64 {
    if u <= 0.0 {
        return if p.a > 1.0 {
            0.0
        } else if p.a == 1.0 {
            (-lnb).exp()
        } else {
            f64::INFINITY
        };
    }
    if u >= 1.0 {
        return if p.b > 1.0 {
            0.0
        } else if p.b == 1.0 {
            (-lnb).exp()
        } else {
            f64::INFINITY
        };
    }
    ((p.a - 1.0) * u.ln() + (p.b - 1.0) * (1.0 - u).ln() - lnb).exp()
}

/// `P(ψ_RRC(x) = i)` for every class.
pub fn rrc_probabilities(supports: &SupportVector) -> RrcProbabilities {
    let m = supports.len();
    if m == 1 {
        return RrcProbabilities(vec![1.0]);
    }
    let params = beta_params(supports);
    let lnbs: Vec<f64> = params.iter().map(|p| ln_beta(p.a, p.b)).collect();
    let intervals = QUADRATURE_NODES - 1;
    let h = 1.0 / intervals as f64;
    let nodes: Vec<f64> = (0..QUADRATURE_NODES).map(|k| k as f64 * h).collect();
    // At most one class can have b < 1: that needs g > 1 - 1/M.
    let dominant = params.iter().position(|p| p.b < 1.0);
    // With two classes and a dominant one, only the dominant CDF is used.
    let cdf: Vec<Vec<f64>> = params
        .iter()
        .zip(&lnbs)
        .enumerate()
        .map(|(c, (p, lnb))| {
            if m == 2 && dominant.is_some_and(|d| d != c) {
                Vec::new()
            } else {
                nodes.iter().map(|&u| inc_beta(p.a, p.b, u, *lnb)).collect()
            }
        })
        .collect();
    let mut probs = vec![0.0; m];
    for i in 0..m {
        if Some(i) == dominant {
            continue;
        }
        let mut acc = 0.0;
        // u = 0 contributes nothing: the integrand vanishes like u^(M-1).
        for (k, &u) in nodes.iter().enumerate().skip(1) {
            let mut f = beta_pdf(params[i], lnbs[i], u);
            if f == 0.0 {
                continue;
            }
            for (c, col) in cdf.iter().enumerate() {
                if c != i {
                    f *= col[k];
                }
            }
            let w = if k == intervals {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * f;
        }
        probs[i] = acc * h / 3.0;
    }
    if let Some(d) = dominant {
        probs[d] = (1.0 - probs.iter().sum::<f64>()).max(0.0);
    }
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p = (*p / total).clamp(0.0, 1.0);
    }
    RrcProbabilities(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(v: &[f64]) -> SupportVector {
        SupportVector::new(v.to_vec()).unwrap()
    }

    /// Composite Simpson on the Beta(2,5) density with a very fine grid; the
    /// density is a polynomial, so this is accurate to rounding.
    fn beta25_cdf_oracle(u: f64) -> f64 {
        let n = 200_000;
        let h = u / n as f64;
        let pdf = |x: f64| 30.0 * x * (1.0 - x).powi(4);
        let mut s = pdf(0.0) + pdf(u);
        for k in 1..n {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * pdf(k as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn incomplete_beta_examples() {
        assert_eq!(regularized_incomplete_beta(2.0, 3.0, 0.0).unwrap(), 0.0);
        assert_eq!(regularized_incomplete_beta(2.0, 3.0, 1.0).unwrap(), 1.0);
        assert!((regularized_incomplete_beta(1.0, 1.0, 0.5).unwrap() - 0.5).abs() < 1e-15);
        let oracle = beta25_cdf_oracle(0.3);
        assert!((oracle - 0.579_825).abs() < 1e-6);
        let v = regularized_incomplete_beta(2.0, 5.0, 0.3).unwrap();
        assert!((v - oracle).abs() < 1e-10, "{v} vs {oracle}");
    }

    #[test]
    fn incomplete_beta_domain() {
        assert!(regularized_incomplete_beta(0.0, 1.0, 0.5).is_err());
        assert!(regularized_incomplete_beta(1.0, -1.0, 0.5).is_err());
        assert!(regularized_incomplete_beta(1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn incomplete_beta_matches_quadrature_for_smooth_cases() {
        // Integer parameters give polynomial densities; compare with a fine
        // Simpson rule.
        for (a, b) in [(1.0, 3.0), (3.0, 1.0), (4.0, 4.0), (2.0, 6.0)] {
            let lnb = ln_beta(a, b);
            for u in [0.05, 0.3, 0.5, 0.77, 0.95] {
                let n = 20_000;
                let h = u / n as f64;
                let pdf = |x: f64| beta_pdf(BetaParams { a, b }, lnb, x);
                let mut s = pdf(0.0) + pdf(u);
                for k in 1..n {
                    s += if k % 2 == 1 { 4.0 } else { 2.0 } * pdf(k as f64 * h);
                }
                let oracle = s * h / 3.0;
                let v = regularized_incomplete_beta(a, b, u).unwrap();
                assert!((v - oracle).abs() < 1e-10, "a={a} b={b} u={u}: {v} vs {oracle}");
            }
        }
    }

    #[test]
    fn beta_param_examples() {
        let p = beta_params(&sv(&[0.5, 0.5]));
        assert!(p.iter().all(|q| (q.a - 1.0).abs() < 1e-15 && (q.b - 1.0).abs() < 1e-15));
        let p = beta_params(&sv(&[1.0, 0.0, 0.0]));
        assert_eq!(p[0].a, 3.0 * (1.0 - 1e-9));
        assert_eq!(p[1].a, 3.0 * 1e-9);
        assert_eq!(p[2].b, 3.0 * (1.0 - 1e-9));
        let p = beta_params(&sv(&[0.25; 4]));
        assert!(p.iter().all(|q| q.a == 1.0 && q.b == 3.0));
    }

    #[test]
    fn uniform_and_degenerate_supports() {
        let p = rrc_probabilities(&sv(&[0.5, 0.5]));
        assert!((p.values()[0] - 0.5).abs() < 1e-6);
        let p = rrc_probabilities(&sv(&[1.0 - 1e-12, 1e-12]));
        assert!(p.values()[0] >= 0.999 && p.values()[1] <= 0.001);
        let p = rrc_probabilities(&sv(&[1.0, 0.0, 0.0]));
        assert!(p.values()[0] >= 0.999);
    }

    /// Frozen Monte Carlo values (10^6 independent beta triples drawn with
    /// numpy, argmax counted) for supports (0.6, 0.3, 0.1).
    #[test]
    fn three_class_reference_value() {
        let p = rrc_probabilities(&sv(&[0.6, 0.3, 0.1]));
        let expected = [0.785_958, 0.181_985, 0.032_057];
        for (v, e) in p.values().iter().zip(expected) {
            assert!((v - e).abs() < 2e-3, "{p:?}");
        }
    }

    fn random_supports() -> impl Strategy<Value = Vec<f64>> {
        (2usize..=6)
            .prop_flat_map(|m| proptest::collection::vec(0.001f64..1.0, m))
            .prop_map(|w| {
                let s: f64 = w.iter().sum();
                w.into_iter().map(|v| v / s).collect()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn probabilities_are_normalized(g in random_supports()) {
            let p = rrc_probabilities(&SupportVector::from_weights(g));
            let s: f64 = p.values().iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(p.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn permutation_equivariance(g in random_supports(), rot in 0usize..6) {
            let m = g.len();
            let p = rrc_probabilities(&SupportVector::from_weights(g.clone()));
            let rotated: Vec<f64> = (0..m).map(|i| g[(i + rot) % m]).collect();
            let q = rrc_probabilities(&SupportVector::from_weights(rotated));
            for i in 0..m {
                prop_assert!((q.values()[i] - p.values()[(i + rot) % m]).abs() < 1e-9);
            }
        }

        #[test]
        fn monotone_in_own_support(g in random_supports(), i in 0usize..6, bump in 0.0f64..0.5) {
            let i = i % g.len();
            let p = rrc_probabilities(&SupportVector::from_weights(g.clone()));
            let new_gi = g[i] + bump * (1.0 - g[i]);
            let rest = 1.0 - g[i];
            let scale = if rest > 0.0 { (1.0 - new_gi) / rest } else { 0.0 };
            let h: Vec<f64> = g.iter().enumerate()
                .map(|(k, v)| if k == i { new_gi } else { v * scale })
                .collect();
            let q = rrc_probabilities(&SupportVector::from_weights(h));
            prop_assert!(q.values()[i] >= p.values()[i] - 1e-9);
        }

        #[test]
        fn argmax_preserved(g in random_supports()) {
            let sv = SupportVector::from_weights(g);
            let mut sorted = sv.values().to_vec();
            sorted.sort_by(|a, b| b.total_cmp(a));
            prop_assume!(sorted[0] - sorted[1] > 1e-6);
            prop_assert_eq!(rrc_probabilities(&sv).argmax(), sv.argmax());
        }
    }
}
