//! Graded response model probabilities.
//!
//! Grades are numbered `1..=k` and thresholds `1..=k-1`. Grade `m` sits
//! between thresholds `m-1` and `m`:
//!
//! ```text
//! P_1 = 1 - s(x_1)
//! P_m = s(x_{m-1}) - s(x_m)        2 <= m <= k-1
//! P_k = s(x_{k-1})
//! x_m = D * alpha * (theta - beta_m)
//! ```
//!
//! In the arithmetic model the thresholds are `beta_m = beta_1 + (m-1) * gamma`
//! and every interior grade has the closed form
//! `phi (e^c - 1) / ((1 + phi)(1 + phi e^c))` with `c = D alpha gamma` and
//! `phi = e^{-x_{m-1}}`. That expression is evaluated here in the factored
//! form `s(x_{m-1}) * s(c - x_{m-1}) * (1 - e^{-c})`, which is algebraically
//! identical and never overflows.

use serde::{Deserialize, Serialize};

use crate::error::{arg, AgrmError, Result};

/// Default scaling constant `D`.
pub const DEFAULT_D: f64 = 1.7;
/// Default discrimination `alpha`.
pub const DEFAULT_ALPHA: f64 = 1.0;
/// Default number of grades.
pub const DEFAULT_K: usize = 5;
/// Allowed drift of a probability vector's sum away from one.
pub const SUM_TOL: f64 = 1e-12;

/// Logistic function, branching on sign so `exp` never overflows.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Derivative of [`sigmoid`], computed as `s(x) s(-x)`.
#[inline]
pub fn sigmoid_prime(x: f64) -> f64 {
    sigmoid(x) * sigmoid(-x)
}

/// One evaluation point of the arithmetic graded response model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgrmParams {
    pub theta: f64,
    pub beta1: f64,
    pub gamma: f64,
    pub d: f64,
    pub alpha: f64,
    pub k: usize,
}

impl AgrmParams {
    pub fn new(theta: f64, beta1: f64, gamma: f64, d: f64, alpha: f64, k: usize) -> Result<Self> {
        let p = Self {
            theta,
            beta1,
            gamma,
            d,
            alpha,
            k,
        };
        p.validate()?;
        Ok(p)
    }

    /// Shorthand using the default `D`, `alpha` and `k`.
    pub fn with_defaults(theta: f64, beta1: f64, gamma: f64) -> Result<Self> {
        Self::new(theta, beta1, gamma, DEFAULT_D, DEFAULT_ALPHA, DEFAULT_K)
    }

    pub fn validate(&self) -> Result<()> {
        check_scale(self.d, self.alpha)?;
        if self.k < 2 {
            return arg(format!("grade count k must be >= 2, got {}", self.k));
        }
        for (name, v) in [("theta", self.theta), ("beta1", self.beta1), ("gamma", self.gamma)] {
            if !v.is_finite() {
                return arg(format!("{name} must be finite, got {v}"));
            }
        }
        Ok(())
    }

    /// Copy of these parameters evaluated at a different ability.
    pub fn at(&self, theta: f64) -> Self {
        Self { theta, ..*self }
    }

    /// `D * alpha`.
    #[inline]
    pub fn slope(&self) -> f64 {
        self.d * self.alpha
    }

    /// Threshold `beta_m` for `m` in `1..=k-1`. No range check.
    #[inline]
    pub fn threshold(&self, m: usize) -> f64 {
        self.beta1 + (m as f64 - 1.0) * self.gamma
    }

    pub fn thresholds(&self) -> Vec<f64> {
        (1..self.k).map(|m| self.threshold(m)).collect()
    }

    /// Midpoint of the first and last thresholds; the distribution is
    /// palindromic there.
    pub fn center(&self) -> f64 {
        0.5 * (self.beta1 + self.threshold(self.k - 1))
    }

    /// The same model expressed with an explicit threshold vector.
    pub fn to_general(&self) -> GeneralGrmParams {
        GeneralGrmParams {
            theta: self.theta,
            thresholds: self.thresholds(),
            d: self.d,
            discrimination: self.alpha,
        }
    }
}

/// Classical graded response model with arbitrary non-decreasing thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralGrmParams {
    pub theta: f64,
    pub thresholds: Vec<f64>,
    pub d: f64,
    pub discrimination: f64,
}

impl GeneralGrmParams {
    pub fn new(theta: f64, thresholds: Vec<f64>, d: f64, discrimination: f64) -> Result<Self> {
        let p = Self {
            theta,
            thresholds,
            d,
            discrimination,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_scale(self.d, self.discrimination)?;
        if self.thresholds.is_empty() {
            return arg("at least one threshold is required");
        }
        if !self.theta.is_finite() || self.thresholds.iter().any(|b| !b.is_finite()) {
            return arg("theta and thresholds must be finite");
        }
        if let Some(w) = self.thresholds.windows(2).position(|w| w[1] < w[0]) {
            return arg(format!(
                "thresholds must be non-decreasing: beta_{} = {} > beta_{} = {}",
                w + 1,
                self.thresholds[w],
                w + 2,
                self.thresholds[w + 1]
            ));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.thresholds.len() + 1
    }
}

fn check_scale(d: f64, alpha: f64) -> Result<()> {
    if !(d.is_finite() && d > 0.0) {
        return arg(format!("scaling constant D must be positive and finite, got {d}"));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return arg(format!("discrimination must be positive and finite, got {alpha}"));
    }
    Ok(())
}

/// Anything that exposes cumulative category curves.
pub trait GradedModel {
    fn grade_count(&self) -> usize;
    fn ability(&self) -> f64;
    fn slope(&self) -> f64;
    /// Threshold `beta_m`, `m` in `1..=k-1`.
    fn threshold_at(&self, m: usize) -> f64;
}

impl GradedModel for AgrmParams {
    fn grade_count(&self) -> usize {
        self.k
    }
    fn ability(&self) -> f64 {
        self.theta
    }
    fn slope(&self) -> f64 {
        AgrmParams::slope(self)
    }
    fn threshold_at(&self, m: usize) -> f64 {
        self.threshold(m)
    }
}

impl GradedModel for GeneralGrmParams {
    fn grade_count(&self) -> usize {
        self.k()
    }
    fn ability(&self) -> f64 {
        self.theta
    }
    fn slope(&self) -> f64 {
        self.d * self.discrimination
    }
    fn threshold_at(&self, m: usize) -> f64 {
        self.thresholds[m - 1]
    }
}

/// Probability of responding in grade `m` or above: `s(D a (theta - beta_m))`.
pub fn cumulative_prob<M: GradedModel>(p: &M, m: usize) -> Result<f64> {
    let k = p.grade_count();
    if m == 0 || m >= k {
        return arg(format!("threshold index {m} out of range 1..={}", k - 1));
    }
    Ok(sigmoid(p.slope() * (p.ability() - p.threshold_at(m))))
}

/// Probability distribution over grades `1..=k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return arg(format!("a probability vector needs >= 2 entries, got {}", probs.len()));
        }
        if let Some(i) = probs.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(AgrmError::Domain(format!(
                "probability P_{} = {} outside [0, 1]",
                i + 1,
                probs[i]
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(AgrmError::Domain(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(Self(probs))
    }

    /// Uniform distribution over `k` grades.
    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Probability of grade `m` (1-based).
    pub fn grade(&self, m: usize) -> f64 {
        self.0[m - 1]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = AgrmError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(v: ProbVector) -> Self {
        v.0
    }
}

impl AsRef<[f64]> for ProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Category probabilities as direct differences of cumulative curves.
pub fn category_probs(p: &GeneralGrmParams) -> Result<ProbVector> {
    p.validate()?;
    let slope = p.d * p.discrimination;
    let cum: Vec<f64> = p
        .thresholds
        .iter()
        .map(|b| sigmoid(slope * (p.theta - b)))
        .collect();
    let k = p.k();
    let mut probs = Vec::with_capacity(k);
    probs.push(1.0 - cum[0]);
    for w in cum.windows(2) {
        probs.push((w[0] - w[1]).max(0.0));
    }
    probs.push(cum[k - 2]);
    ProbVector::new(probs)
}

/// Raw arithmetic-model probabilities without constructing a [`ProbVector`].
///
/// `gamma` must be non-negative; callers are expected to have validated.
pub(crate) fn agrm_probs_raw(theta: f64, beta1: f64, gamma: f64, slope: f64, k: usize) -> Vec<f64> {
    let c = slope * gamma;
    // 1 - e^{-c}
    let spread = -(-c).exp_m1();
    let x1 = slope * (theta - beta1);
    let mut probs = Vec::with_capacity(k);
    probs.push(sigmoid(-x1));
    for m in 2..k {
        let x = x1 - (m as f64 - 2.0) * c;
        probs.push(sigmoid(x) * sigmoid(c - x) * spread);
    }
    probs.push(sigmoid(x1 - (k as f64 - 2.0) * c));
    probs
}

/// Category probabilities of the arithmetic model via the closed form.
pub fn agrm_probs(p: &AgrmParams) -> Result<ProbVector> {
    p.validate()?;
    if p.gamma < 0.0 {
        return arg(format!(
            "gamma must be non-negative for ordered thresholds, got {}",
            p.gamma
        ));
    }
    let probs = agrm_probs_raw(p.theta, p.beta1, p.gamma, p.slope(), p.k);
    if let Some(i) = probs.iter().position(|v| !v.is_finite()) {
        return Err(AgrmError::Domain(format!("P_{} is not finite", i + 1)));
    }
    ProbVector::new(probs)
}

/// Smallest common difference that guarantees a unimodal distribution:
/// `2 ln 2 / (D alpha)`.
pub fn gamma_threshold(d: f64, alpha: f64) -> Result<f64> {
    check_scale(d, alpha)?;
    Ok(2.0 * std::f64::consts::LN_2 / (d * alpha))
}

/// Ability at which interior grade `m` peaks: `(beta_{m-1} + beta_m) / 2`.
pub fn peak_ability(p: &AgrmParams, m: usize) -> Result<f64> {
    if m < 2 || m + 1 > p.k {
        return arg(format!(
            "grade {m} has no interior peak; interior grades are 2..={}",
            p.k - 1
        ));
    }
    Ok(0.5 * (p.threshold(m - 1) + p.threshold(m)))
}

/// Abilities where `P_1 = P_2` and `P_{k-1} = P_k`.
pub fn boundary_thetas(p: &AgrmParams) -> Result<(f64, f64)> {
    p.validate()?;
    if p.k < 3 {
        return arg(format!(
            "boundary intersections need an interior grade (k >= 3), got k = {}",
            p.k
        ));
    }
    let slope = p.slope();
    let c = slope * p.gamma;
    if c <= std::f64::consts::LN_2 {
        return Err(AgrmError::Domain(format!(
            "ln(1 - 2 e^(-D alpha gamma)) and ln(e^(D alpha gamma) - 2) are undefined for \
             D alpha gamma = {c} <= ln 2"
        )));
    }
    // ln(1 - 2 e^{-c})
    let lower_log = (-2.0 * (-c).exp()).ln_1p();
    // ln(e^c - 2) = c + ln(1 - 2 e^{-c})
    let upper_log = c + lower_log;
    let theta1 = p.beta1 - lower_log / slope;
    let theta2 = p.threshold(p.k - 2) + upper_log / slope;
    Ok((theta1, theta2))
}

/// Smallest grade (1-based) attaining the maximum probability.
pub fn modal_grade(v: &ProbVector) -> usize {
    let p = v.as_slice();
    let mut best = 0;
    for (i, &x) in p.iter().enumerate().skip(1) {
        if x > p[best] {
            best = i;
        }
    }
    best + 1
}

/// Single peak with strictly monotone flanks.
///
/// The mode and its right neighbour may form a two-entry plateau when they
/// differ by at most `tol`; every other adjacent pair must be strictly
/// ordered.
pub fn is_unimodal(v: &ProbVector, tol: f64) -> bool {
    let p = v.as_slice();
    let mode = modal_grade(v) - 1;
    if p[..=mode].windows(2).any(|w| w[0] >= w[1]) {
        return false;
    }
    p[mode..].windows(2).enumerate().all(|(i, w)| {
        if i == 0 && (w[0] - w[1]).abs() <= tol {
            // plateau at the peak; the entry after it must still fall
            p.get(mode + 2).is_none_or(|&next| w[1] > next)
        } else {
            w[0] > w[1]
        }
    })
}

/// Expected grade `sum m * P_m`, in `[1, k]`.
pub fn expected_score(v: &ProbVector) -> f64 {
    let q: f64 = v
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, p)| (i as f64 + 1.0) * p)
        .sum();
    // rounding in a saturated distribution can push q a few ulps outside [1, k]
    q.clamp(1.0, v.k() as f64)
}

/// Map an expected grade from `[1, k]` onto `[0, 5]`.
pub fn rescale_score(q: f64, k: usize) -> Result<f64> {
    if k < 2 {
        return arg(format!("grade count k must be >= 2, got {k}"));
    }
    Ok((q - 1.0) * 5.0 / (k as f64 - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(p: &AgrmParams) -> Vec<f64> {
        // literal sigmoid differences, independent of the closed form
        let s = |x: f64| 1.0 / (1.0 + (-x).exp());
        let c: Vec<f64> = p.thresholds().iter().map(|b| s(p.slope() * (p.theta - b))).collect();
        let mut out = vec![1.0 - c[0]];
        out.extend(c.windows(2).map(|w| w[0] - w[1]));
        out.push(c[c.len() - 1]);
        out
    }

    #[test]
    fn cumulative_at_threshold_is_half() {
        let p = AgrmParams::with_defaults(0.5, 0.5, 1.0).unwrap();
        assert_eq!(cumulative_prob(&p, 1).unwrap(), 0.5);
        assert!(cumulative_prob(&p, 0).is_err());
        assert!(cumulative_prob(&p, 5).is_err());
    }

    #[test]
    fn cumulative_limits() {
        let lo = AgrmParams::with_defaults(-1e6, 0.0, 1.0).unwrap();
        let hi = AgrmParams::with_defaults(1e6, 0.0, 1.0).unwrap();
        assert_eq!(cumulative_prob(&lo, 2).unwrap(), 0.0);
        assert_eq!(cumulative_prob(&hi, 2).unwrap(), 1.0);
    }

    #[test]
    fn cumulative_reference_value() {
        let p = GeneralGrmParams::new(0.0, vec![-1.0, 0.0], 1.7, 1.0).unwrap();
        // s(1.7), high-precision reference
        let want = 0.845_534_734_916_465_3;
        assert!((cumulative_prob(&p, 1).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn category_probs_two_grades() {
        let p = GeneralGrmParams::new(0.3, vec![0.3], 1.7, 1.0).unwrap();
        assert_eq!(category_probs(&p).unwrap().as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn category_probs_equal_thresholds_give_empty_grade() {
        let p = GeneralGrmParams::new(0.2, vec![-1.0, 0.5, 0.5, 2.0], 1.7, 1.0).unwrap();
        assert_eq!(category_probs(&p).unwrap().grade(3), 0.0);
    }

    #[test]
    fn category_probs_reference_vector() {
        let p = GeneralGrmParams::new(0.0, vec![-2.0, -1.0, 0.0, 1.0], 1.7, 1.0).unwrap();
        // 40-digit evaluation of the sigmoid differences
        let want = [
            0.032_295_464_698_450_51,
            0.122_169_800_385_084_19,
            0.345_534_734_916_465_3,
            0.345_534_734_916_465_3,
            0.154_465_265_083_534_7,
        ];
        for (a, b) in category_probs(&p).unwrap().as_slice().iter().zip(want) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn category_probs_rejects_decreasing() {
        assert!(GeneralGrmParams::new(0.0, vec![1.0, 0.0], 1.7, 1.0).is_err());
    }

    #[test]
    fn agrm_reference_vector() {
        let p = AgrmParams::with_defaults(0.0, -1.0, 1.0).unwrap();
        let want = [
            0.154_465_265_083_534_7,
            0.345_534_734_916_465_3,
            0.345_534_734_916_465_3,
            0.122_169_800_385_084_19,
            0.032_295_464_698_450_51,
        ];
        let got = agrm_probs(&p).unwrap();
        for ((a, b), c) in got.as_slice().iter().zip(want).zip(naive(&p)) {
            assert!((a - b).abs() < 1e-15);
            assert!((a - c).abs() < 1e-15);
        }
    }

    #[test]
    fn agrm_two_grades_is_boundary_only() {
        let p = AgrmParams::new(0.4, 0.0, 3.0, 1.7, 1.0, 2).unwrap();
        let s = sigmoid(1.7 * 0.4);
        let v = agrm_probs(&p).unwrap();
        assert_eq!(v.as_slice(), &[sigmoid(-1.7 * 0.4), s]);
    }

    #[test]
    fn agrm_palindromic_at_center() {
        for k in 2..=9 {
            let p = AgrmParams::new(0.0, -0.7, 1.3, 1.7, 1.0, k).unwrap();
            let v = agrm_probs(&p.at(p.center())).unwrap();
            let s = v.as_slice();
            for m in 0..k {
                assert!((s[m] - s[k - 1 - m]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn agrm_huge_gamma_stays_finite() {
        let p = AgrmParams::with_defaults(10.0, 0.0, 1000.0).unwrap();
        let v = agrm_probs(&p).unwrap();
        assert!(v.as_slice().iter().all(|x| x.is_finite()));
        assert_eq!(modal_grade(&v), 2);
    }

    #[test]
    fn agrm_rejects_bad_params() {
        assert!(AgrmParams::new(0.0, 0.0, 1.0, 1.7, 1.0, 1).is_err());
        assert!(AgrmParams::new(0.0, 0.0, 1.0, 0.0, 1.0, 5).is_err());
        assert!(AgrmParams::new(f64::NAN, 0.0, 1.0, 1.7, 1.0, 5).is_err());
        let p = AgrmParams::with_defaults(0.0, 0.0, -1.0).unwrap();
        assert!(agrm_probs(&p).is_err());
    }

    #[test]
    fn gamma_threshold_values() {
        let ln2 = std::f64::consts::LN_2;
        assert!((gamma_threshold(1.0, 2.0 * ln2).unwrap() - 1.0).abs() < 1e-15);
        assert!((gamma_threshold(1.7, 1.0).unwrap() - 0.815_467_271_246_994_5).abs() < 1e-15);
        let a = gamma_threshold(1.3, 0.8).unwrap();
        let b = gamma_threshold(2.6, 0.8).unwrap();
        assert!((a - 2.0 * b).abs() < 1e-15);
        assert!(gamma_threshold(0.0, 1.0).is_err());
        assert!(gamma_threshold(1.0, -1.0).is_err());
    }

    #[test]
    fn peak_ability_midpoint_and_maximum() {
        let p = AgrmParams::new(0.0, 0.0, 2.0, 1.7, 1.0, 5).unwrap();
        assert_eq!(peak_ability(&p, 2).unwrap(), 1.0);
        assert!(peak_ability(&p, 1).is_err());
        assert!(peak_ability(&p, 5).is_err());
        for m in 2..=4 {
            let peak = peak_ability(&p, m).unwrap();
            let top = agrm_probs(&p.at(peak)).unwrap().grade(m);
            for delta in [0.1, 1.0, 5.0] {
                assert!(agrm_probs(&p.at(peak + delta)).unwrap().grade(m) < top);
                assert!(agrm_probs(&p.at(peak - delta)).unwrap().grade(m) < top);
            }
        }
        let shifted = AgrmParams { beta1: 3.5, ..p };
        assert_eq!(peak_ability(&shifted, 3).unwrap(), peak_ability(&p, 3).unwrap() + 3.5);
    }

    #[test]
    fn boundary_thetas_reference() {
        let p = AgrmParams::with_defaults(0.0, 0.0, 1.0).unwrap();
        let (t1, t2) = boundary_thetas(&p).unwrap();
        // root of P_1 - P_2 found with a 40-digit solver
        assert!((t1 - 0.267_475_573_955_812_03).abs() < 1e-14);
        assert!((t1 + t2 - 2.0 * p.center()).abs() < 1e-13);
        let v = agrm_probs(&p.at(t1)).unwrap();
        assert!((v.grade(1) - v.grade(2)).abs() < 1e-12);
    }

    #[test]
    fn boundary_thetas_domain() {
        let ln2 = std::f64::consts::LN_2;
        let p = AgrmParams::new(0.0, 0.0, ln2, 1.0, 1.0, 5).unwrap();
        assert!(matches!(boundary_thetas(&p), Err(AgrmError::Domain(_))));
        let p = AgrmParams::new(0.0, 0.0, 2.0, 1.0, 1.0, 2).unwrap();
        assert!(boundary_thetas(&p).is_err());
        let far = AgrmParams::new(0.0, 1.5, 500.0, 1.0, 1.0, 4).unwrap();
        assert!((boundary_thetas(&far).unwrap().0 - 1.5).abs() < 1e-15);
    }

    #[test]
    fn modal_grade_cases() {
        assert_eq!(modal_grade(&ProbVector::new(vec![0.7, 0.2, 0.1]).unwrap()), 1);
        assert_eq!(modal_grade(&ProbVector::new(vec![0.2, 0.6, 0.2]).unwrap()), 2);
        assert_eq!(modal_grade(&ProbVector::new(vec![0.4, 0.4, 0.2]).unwrap()), 1);
        let p = AgrmParams::with_defaults(40.0, 0.0, 1.0).unwrap();
        assert_eq!(modal_grade(&agrm_probs(&p).unwrap()), 5);
    }

    #[test]
    fn unimodal_predicate() {
        let v = |x: Vec<f64>| ProbVector::new(x).unwrap();
        assert!(is_unimodal(&v(vec![0.5, 0.3, 0.15, 0.05]), 1e-12));
        assert!(is_unimodal(&v(vec![0.05, 0.15, 0.3, 0.5]), 1e-12));
        assert!(is_unimodal(&v(vec![0.1, 0.4, 0.4, 0.1]), 1e-12));
        assert!(!is_unimodal(&v(vec![0.4, 0.1, 0.4, 0.1]), 1e-12));
        assert!(!is_unimodal(&v(vec![0.3, 0.3, 0.3, 0.1]), 1e-12));
        assert!(!is_unimodal(&v(vec![0.5, 0.2, 0.2, 0.1]), 1e-12));
    }

    #[test]
    fn sub_threshold_counterexample() {
        // gamma = 0.1 is far below 2 ln 2 / 1.7; a grid search over
        // theta in [-5, 5] found every point bimodal
        let p = AgrmParams::with_defaults(0.15, 0.0, 0.1).unwrap();
        let v = agrm_probs(&p).unwrap();
        assert!(!is_unimodal(&v, 1e-12));
        assert!(v.grade(1) > v.grade(2) && v.grade(5) > v.grade(4));
    }

    #[test]
    fn expected_score_cases() {
        assert_eq!(expected_score(&ProbVector::uniform(5).unwrap()), 3.0);
        let p = AgrmParams::new(0.0, -1.0, 1.2, 1.7, 1.0, 6).unwrap();
        let mid = expected_score(&agrm_probs(&p.at(p.center())).unwrap());
        assert!((mid - 3.5).abs() < 1e-13);
        assert!((expected_score(&agrm_probs(&p.at(-1e4)).unwrap()) - 1.0).abs() < 1e-15);
        assert!((expected_score(&agrm_probs(&p.at(1e4)).unwrap()) - 6.0).abs() < 1e-15);
    }

    #[test]
    fn rescale_cases() {
        assert_eq!(rescale_score(1.0, 5).unwrap(), 0.0);
        assert_eq!(rescale_score(5.0, 5).unwrap(), 5.0);
        assert_eq!(rescale_score(3.0, 5).unwrap(), 2.5);
        assert!(rescale_score(1.0, 1).is_err());
    }

    #[test]
    fn prob_vector_validation() {
        assert!(ProbVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(vec![1.2, -0.2]).is_err());
        assert!(ProbVector::new(vec![1.0]).is_err());
        let v: ProbVector = serde_json::from_str("[0.25,0.75]").unwrap();
        assert_eq!(v.k(), 2);
        assert!(serde_json::from_str::<ProbVector>("[0.25,0.25]").is_err());
    }
}
