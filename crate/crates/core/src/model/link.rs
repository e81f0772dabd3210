//! Link functions mapping the linear predictor `m = d + aᵀθ` to a response
//! probability.
//!
//! Every link exposes the probability `f(m)`, its complement `1 - f(m)`
//! (computed directly, not by subtraction), the derivative `f'(m)`, and the
//! derivative of the per-cell negative log-likelihood with respect to `m`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

/// Floor applied to probabilities inside log terms of the objective.
pub const PROB_FLOOR: f64 = 1e-12;

/// Above this magnitude the probit score uses a continued-fraction Mills ratio.
const MILLS_SWITCH: f64 = 6.0;

/// The link family used by the item response function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkFunction {
    /// Logistic link (multidimensional 2PL model).
    #[default]
    Logit,
    /// Standard normal CDF (normal ogive model).
    Probit,
    /// Complementary log-log: `1 - exp(-exp(x))`.
    Cloglog,
}

impl LinkFunction {
    pub const ALL: [LinkFunction; 3] = [LinkFunction::Logit, LinkFunction::Probit, LinkFunction::Cloglog];

    pub fn name(self) -> &'static str {
        match self {
            LinkFunction::Logit => "logit",
            LinkFunction::Probit => "probit",
            LinkFunction::Cloglog => "cloglog",
        }
    }

    /// `f(x)`, without any clamping.
    #[inline]
    pub fn prob(self, x: f64) -> f64 {
        match self {
            LinkFunction::Logit => sigmoid(x),
            LinkFunction::Probit => std_normal_cdf(x),
            LinkFunction::Cloglog => -(-x.exp()).exp_m1(),
        }
    }

    /// `1 - f(x)`, computed without cancellation.
    #[inline]
    pub fn complement(self, x: f64) -> f64 {
        match self {
            LinkFunction::Logit => sigmoid(-x),
            LinkFunction::Probit => std_normal_cdf(-x),
            LinkFunction::Cloglog => (-x.exp()).exp(),
        }
    }

    /// `f(x)` clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]`.
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        self.prob(x).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
    }

    /// `f'(x)`.
    #[inline]
    pub fn deriv(self, x: f64) -> f64 {
        match self {
            LinkFunction::Logit => {
                let p = sigmoid(x);
                p * sigmoid(-x)
            }
            LinkFunction::Probit => std_normal_pdf(x),
            LinkFunction::Cloglog => (x - x.exp()).exp(),
        }
    }

    /// `ln f'(x)`, finite wherever the closed form is.
    pub fn ln_deriv(self, x: f64) -> f64 {
        match self {
            LinkFunction::Logit => ln_sigmoid(x) + ln_sigmoid(-x),
            LinkFunction::Probit => -0.5 * x * x - 0.5 * (2.0 * PI).ln(),
            LinkFunction::Cloglog => x - x.exp(),
        }
    }

    /// Negative log-likelihood of a single response `y` at predictor `m`,
    /// with the probability floored at [`PROB_FLOOR`].
    #[inline]
    pub fn cell_nll(self, m: f64, y: u8) -> f64 {
        if self == LinkFunction::Logit {
            // -ln σ(±m) = softplus(∓m), with the same floor applied in log space
            let z = if y == 1 { -m } else { m };
            let nll = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            return nll.clamp(-(1.0 - PROB_FLOOR).ln(), -PROB_FLOOR.ln());
        }
        let p = if y == 1 { self.prob(m) } else { self.complement(m) };
        -p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR).ln()
    }

    /// Derivative of the unclamped per-cell negative log-likelihood with
    /// respect to `m`: `f'(m) (f(m) - y) / (f(m) (1 - f(m)))`.
    #[inline]
    pub fn cell_score(self, m: f64, y: u8) -> f64 {
        match self {
            LinkFunction::Logit => sigmoid(m) - f64::from(y),
            LinkFunction::Probit => {
                if y == 1 {
                    -inverse_mills(-m)
                } else {
                    inverse_mills(m)
                }
            }
            LinkFunction::Cloglog => {
                let u = m.exp();
                if y == 1 {
                    // -f'/f = -u e^{-u} / (1 - e^{-u}) = -u / (e^u - 1)
                    if u == 0.0 {
                        -1.0
                    } else {
                        -u / u.exp_m1()
                    }
                } else {
                    u
                }
            }
        }
    }

    /// The two ratios bounded by the link regularity condition at `x`:
    /// `f'(x) / (f(x)(1-f(x)))` and `f(x)(1-f(x)) / f'(x)^2`.
    ///
    /// Both are formed in log space so they stay finite as long as the true
    /// value fits in an `f64`.
    pub fn regularity_ratios(self, x: f64) -> (f64, f64) {
        let ln_var = ln_prob(self, x) + ln_complement(self, x);
        let ln_d = self.ln_deriv(x);
        ((ln_d - ln_var).exp(), (ln_var - 2.0 * ln_d).exp())
    }

    /// Largest values of [`regularity_ratios`](Self::regularity_ratios) on an
    /// evenly spaced grid over `|x| <= bound`.
    pub fn regularity_check(self, bound: f64, grid_points: usize) -> RegularityCheck {
        let grid_points = grid_points.max(2);
        let mut sup_score = 0.0_f64;
        let mut sup_info = 0.0_f64;
        for g in 0..grid_points {
            let x = -bound + 2.0 * bound * g as f64 / (grid_points - 1) as f64;
            let (r1, r2) = self.regularity_ratios(x);
            sup_score = if r1.is_nan() { f64::NAN } else { sup_score.max(r1) };
            sup_info = if r2.is_nan() { f64::NAN } else { sup_info.max(r2) };
        }
        RegularityCheck { bound, sup_score_ratio: sup_score, sup_information_ratio: sup_info }
    }
}

impl std::fmt::Display for LinkFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LinkFunction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "logit" | "logistic" => Ok(LinkFunction::Logit),
            "probit" | "normal-ogive" => Ok(LinkFunction::Probit),
            "cloglog" => Ok(LinkFunction::Cloglog),
            other => Err(format!("unknown link function `{other}` (expected logit, probit or cloglog)")),
        }
    }
}

/// Result of [`LinkFunction::regularity_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityCheck {
    pub bound: f64,
    pub sup_score_ratio: f64,
    pub sup_information_ratio: f64,
}

impl RegularityCheck {
    pub fn is_finite(&self) -> bool {
        self.sup_score_ratio.is_finite() && self.sup_information_ratio.is_finite()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn ln_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[inline]
fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

#[inline]
fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn ln_prob(link: LinkFunction, x: f64) -> f64 {
    match link {
        LinkFunction::Logit => ln_sigmoid(x),
        LinkFunction::Probit => ln_std_normal_cdf(x),
        LinkFunction::Cloglog => {
            let u = x.exp();
            // ln(1 - e^{-u}); for tiny u this is ln(u) - u/2 + ...
            if u < 1e-10 {
                x - 0.5 * u
            } else {
                (-(-u).exp_m1()).ln()
            }
        }
    }
}

fn ln_complement(link: LinkFunction, x: f64) -> f64 {
    match link {
        LinkFunction::Logit => ln_sigmoid(-x),
        LinkFunction::Probit => ln_std_normal_cdf(-x),
        LinkFunction::Cloglog => -x.exp(),
    }
}

/// `ln Φ(x)`, using the Mills ratio in the far left tail.
fn ln_std_normal_cdf(x: f64) -> f64 {
    if x > -MILLS_SWITCH {
        std_normal_cdf(x).ln()
    } else {
        // Φ(x) = φ(x) R(-x)
        -0.5 * x * x - 0.5 * (2.0 * PI).ln() + mills_ratio(-x).ln()
    }
}

/// Mills ratio `R(t) = (1 - Φ(t)) / φ(t)` for `t > 0`, by Lentz's method on
/// the continued fraction `1 / (t + 1/(t + 2/(t + 3/(t + ...))))`.
fn mills_ratio(t: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = t;
    let mut c = t;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64;
        d = t + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = t + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// Inverse Mills ratio `φ(t) / (1 - Φ(t))`.
#[inline]
fn inverse_mills(t: f64) -> f64 {
    if t > MILLS_SWITCH {
        1.0 / mills_ratio(t)
    } else {
        std_normal_pdf(t) / std_normal_cdf(-t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_links_are_one_half_at_zero() {
        assert_eq!(LinkFunction::Logit.eval(0.0), 0.5);
        assert!((LinkFunction::Probit.eval(0.0) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn logit_at_ln3_is_three_quarters() {
        assert!((LinkFunction::Logit.eval(3.0_f64.ln()) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn cloglog_matches_closed_form() {
        for &x in &[-3.0, -0.5, 0.0, 0.7, 1.5] {
            let expected = 1.0 - (-(x as f64).exp()).exp();
            assert!((LinkFunction::Cloglog.prob(x) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn eval_stays_in_open_interval() {
        for link in LinkFunction::ALL {
            for &x in &[-1e6, -800.0, -40.0, 0.0, 40.0, 800.0, 1e6] {
                let p = link.eval(x);
                assert!(p > 0.0 && p < 1.0, "{link} at {x}: {p}");
            }
        }
    }

    #[test]
    fn links_are_strictly_increasing_on_bounded_grid() {
        // cloglog reaches 1.0 in f64 just above x = 3.5
        for (link, hi) in [(LinkFunction::Logit, 6.0), (LinkFunction::Probit, 6.0), (LinkFunction::Cloglog, 3.0)] {
            let mut prev = link.prob(-6.0);
            for g in 1..=((hi + 6.0) * 100.0) as usize {
                let x = -6.0 + g as f64 * 0.01;
                let p = link.prob(x);
                assert!(p > prev, "{link} not increasing at {x}");
                prev = p;
            }
        }
    }

    #[test]
    fn prob_and_complement_sum_to_one() {
        for link in LinkFunction::ALL {
            for g in -50..=50 {
                let x = g as f64 * 0.1;
                assert!((link.prob(x) + link.complement(x) - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let h = 1e-6;
        for link in LinkFunction::ALL {
            for g in -40..=40 {
                let x = g as f64 * 0.1;
                let fd = (link.prob(x + h) - link.prob(x - h)) / (2.0 * h);
                assert!((link.deriv(x) - fd).abs() < 1e-8, "{link} at {x}");
                assert!((link.ln_deriv(x) - link.deriv(x).ln()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cell_score_matches_derivative_of_cell_nll() {
        let h = 1e-6;
        for link in LinkFunction::ALL {
            // stay where the probability floor is inactive
            let (lo, hi) = if link == LinkFunction::Cloglog { (-20, 20) } else { (-30, 30) };
            for g in lo..=hi {
                let m = g as f64 * 0.15;
                for y in [0u8, 1] {
                    let fd = (link.cell_nll(m + h, y) - link.cell_nll(m - h, y)) / (2.0 * h);
                    let an = link.cell_score(m, y);
                    assert!((an - fd).abs() < 1e-7 * (1.0 + an.abs()), "{link} m={m} y={y}: {an} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn probit_score_is_continuous_across_mills_switch() {
        for y in [0u8, 1] {
            let below = LinkFunction::Probit.cell_score(MILLS_SWITCH - 1e-9, y);
            let above = LinkFunction::Probit.cell_score(MILLS_SWITCH + 1e-9, y);
            assert!((below - above).abs() < 1e-7);
            let below = LinkFunction::Probit.cell_score(-MILLS_SWITCH + 1e-9, y);
            let above = LinkFunction::Probit.cell_score(-MILLS_SWITCH - 1e-9, y);
            assert!((below - above).abs() < 1e-7);
        }
        // Deep left tail with y = 1: score approaches m (the Mills asymptote).
        let s = LinkFunction::Probit.cell_score(-30.0, 1);
        assert!((s - (-30.0 - 1.0 / 30.0)).abs() < 1e-3, "{s}");
    }

    #[test]
    fn mills_ratio_matches_high_precision_values() {
        // (1 - Φ(t)) / φ(t) evaluated with 40-digit arithmetic
        let reference = [
            (6.0, 0.162_377_660_896_867_461_82),
            (6.5, 0.150_436_988_736_269_084_28),
            (7.5, 0.131_079_355_804_491_763_49),
            (9.0, 0.109_787_282_578_308_291_23),
            (12.0, 0.082_766_286_501_369_177_252),
        ];
        for (t, expected) in reference {
            let rel = (mills_ratio(t) - expected).abs() / expected;
            assert!(rel < 1e-14, "t = {t}: {rel}");
        }
    }

    #[test]
    fn regularity_ratios_are_finite_on_moderate_bounds() {
        for link in LinkFunction::ALL {
            let check = link.regularity_check(4.0, 801);
            assert!(check.is_finite(), "{link}: {check:?}");
        }
        // logistic: the score ratio is identically one
        let (r1, r2) = LinkFunction::Logit.regularity_ratios(2.0);
        assert!((r1 - 1.0).abs() < 1e-12);
        let p = LinkFunction::Logit.prob(2.0);
        assert!((r2 - 1.0 / (p * (1.0 - p))).abs() < 1e-9);
    }

    #[test]
    fn logit_regularity_holds_at_default_radius_squared() {
        // C = 5√3, C² = 75
        assert!(LinkFunction::Logit.regularity_check(75.0, 1501).is_finite());
    }

    #[test]
    fn parses_names() {
        assert_eq!("Probit".parse::<LinkFunction>().unwrap(), LinkFunction::Probit);
        assert!("identity".parse::<LinkFunction>().is_err());
    }
}
