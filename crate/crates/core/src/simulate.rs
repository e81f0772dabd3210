//! Generators for synthetic factor-analysis studies.
//!
//! Person rows, item rows, mask rows and response rows each draw from their
//! own `(seed, purpose, row)` stream (see [`crate::rng`]), so generation is
//! reproducible and can run in parallel without changing the output.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identify::standardize;
use crate::model::{person_radius, LinkFunction, ParameterSet, ResponseData};
use crate::optimizer::FitConfig;
use crate::rng::{substream, Purpose};

/// Largest K for which loading patterns are enumerated.
pub const MAX_PATTERN_FACTORS: usize = 20;

/// Distribution of the raw person parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaLaw {
    /// K-variate standard normal restricted to `‖x‖ ≤ 4√K`.
    #[default]
    TruncatedNormal,
    StandardNormal,
    /// Independent `(ζ − 2/7) / √(5/196)` with `ζ ~ Beta(2, 5)`: mean 0,
    /// variance 1, right-skewed.
    ScaledBeta,
}

impl std::str::FromStr for ThetaLaw {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "truncated-normal" => Ok(ThetaLaw::TruncatedNormal),
            "standard-normal" | "normal" => Ok(ThetaLaw::StandardNormal),
            "scaled-beta" | "beta" => Ok(ThetaLaw::ScaledBeta),
            other => Err(format!(
                "unknown theta law `{other}` (expected truncated-normal, standard-normal or scaled-beta)"
            )),
        }
    }
}

impl std::fmt::Display for ThetaLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ThetaLaw::TruncatedNormal => "truncated-normal",
            ThetaLaw::StandardNormal => "standard-normal",
            ThetaLaw::ScaledBeta => "scaled-beta",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// J.
    pub n_items: usize,
    /// τ, with N = τ·J (rounded).
    pub person_ratio: f64,
    pub n_factors: usize,
    pub theta_law: ThetaLaw,
    /// Probability that a cell is observed.
    pub missing_rate: f64,
    pub link: LinkFunction,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(n_items: usize, person_ratio: f64, n_factors: usize, seed: u64) -> Self {
        Self {
            n_items,
            person_ratio,
            n_factors,
            theta_law: ThetaLaw::TruncatedNormal,
            missing_rate: 1.0,
            link: LinkFunction::Logit,
            seed,
        }
    }

    pub fn n_persons(&self) -> usize {
        (self.person_ratio * self.n_items as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_items == 0 {
            return Err(Error::InvalidConfig("number of items must be positive".into()));
        }
        if !(self.person_ratio.is_finite() && self.person_ratio >= 1.0) {
            return Err(Error::InvalidConfig(format!("person ratio must be at least 1, got {}", self.person_ratio)));
        }
        if self.n_factors == 0 || self.n_factors > MAX_PATTERN_FACTORS {
            return Err(Error::InvalidConfig(format!(
                "number of factors must lie in 1..={MAX_PATTERN_FACTORS}, got {}",
                self.n_factors
            )));
        }
        if !(self.missing_rate > 0.0 && self.missing_rate <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "observation rate must lie in (0, 1], got {}",
                self.missing_rate
            )));
        }
        Ok(())
    }
}

/// A simulated dataset with the parameters that generated it.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Raw draws `(Θ⁰, A⁰, d⁰)`.
    pub params0: ParameterSet,
    /// Standardized truth `(Θ*, A*, d*)`.
    pub params_star: ParameterSet,
    pub data: ResponseData,
    /// Expected number of observed cells, `rate · N · J`.
    pub mask_expected_count: f64,
}

/// Person parameters from `law`.
pub fn gen_theta(law: ThetaLaw, n: usize, k: usize, seed: u64) -> Array2<f64> {
    gen_theta_with_draws(law, n, k, seed).0
}

/// [`gen_theta`], also returning how many candidate rows were drawn (more
/// than `n` only when truncation rejected some).
pub fn gen_theta_with_draws(law: ThetaLaw, n: usize, k: usize, seed: u64) -> (Array2<f64>, usize) {
    let bound_sq = 16.0 * k as f64;
    let beta = Beta::new(2.0, 5.0).expect("valid Beta parameters");
    let beta_scale = (5.0_f64 / 196.0).sqrt();
    let rows: Vec<(Vec<f64>, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, Purpose::Theta, i as u64);
            match law {
                ThetaLaw::TruncatedNormal => {
                    let mut draws = 0;
                    loop {
                        draws += 1;
                        let row: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
                        if row.iter().map(|x| x * x).sum::<f64>() <= bound_sq {
                            return (row, draws);
                        }
                    }
                }
                ThetaLaw::StandardNormal => ((0..k).map(|_| rng.sample(StandardNormal)).collect(), 1),
                ThetaLaw::ScaledBeta => {
                    ((0..k).map(|_| (beta.sample(&mut rng) - 2.0 / 7.0) / beta_scale).collect(), 1)
                }
            }
        })
        .collect();
    let draws = rows.iter().map(|r| r.1).sum();
    let flat: Vec<f64> = rows.into_iter().flat_map(|r| r.0).collect();
    (Array2::from_shape_vec((n, k), flat).expect("n·k entries"), draws)
}

/// Item parameters: `d_j ~ U[−2, 2]`, a loading pattern `q_j` drawn
/// uniformly from the `2^K − 1` non-zero binary vectors, and
/// `a_jk = q_jk γ_jk` with `γ_jk ~ U[0.5, 2.5]`.
pub fn gen_items(j: usize, k: usize, seed: u64) -> Result<(Array2<f64>, Array1<f64>)> {
    if k == 0 || k > MAX_PATTERN_FACTORS {
        return Err(Error::InvalidConfig(format!("pattern enumeration needs 1 <= K <= {MAX_PATTERN_FACTORS}")));
    }
    let n_patterns: u32 = (1 << k) - 1;
    let mut loadings = Array2::zeros((j, k));
    let mut intercepts = Array1::zeros(j);
    for item in 0..j {
        let mut rng = substream(seed, Purpose::Items, item as u64);
        intercepts[item] = rng.random_range(-2.0..=2.0);
        let pattern = rng.random_range(1..=n_patterns);
        for f in 0..k {
            let gamma: f64 = rng.random_range(0.5..=2.5);
            if pattern >> f & 1 == 1 {
                loadings[[item, f]] = gamma;
            }
        }
    }
    Ok((loadings, intercepts))
}

/// Observation mask with independent `Bernoulli(rate)` cells.
pub fn gen_mask(n: usize, j: usize, rate: f64, seed: u64) -> Array2<bool> {
    if rate >= 1.0 {
        return Array2::from_elem((n, j), true);
    }
    let mut mask = Array2::from_elem((n, j), false);
    mask.outer_iter_mut().into_par_iter().enumerate().for_each(|(i, mut row)| {
        let mut rng = substream(seed, Purpose::Mask, i as u64);
        for cell in row.iter_mut() {
            *cell = rng.random::<f64>() < rate;
        }
    });
    mask
}

/// Draws `y_ij ~ Bernoulli(f(d_j + a_jᵀθ_i))` for every observed cell.
pub fn gen_responses(params: &ParameterSet, link: LinkFunction, mask: &Array2<bool>, seed: u64) -> Result<ResponseData> {
    if mask.dim() != (params.n_persons(), params.n_items()) {
        return Err(Error::Shape(format!(
            "mask is {:?} but parameters describe {}×{}",
            mask.dim(),
            params.n_persons(),
            params.n_items()
        )));
    }
    let mut y = Array2::zeros(mask.dim());
    y.outer_iter_mut().into_par_iter().enumerate().for_each(|(i, mut row)| {
        let mut rng = substream(seed, Purpose::Responses, i as u64);
        for (j, cell) in row.iter_mut().enumerate() {
            // one uniform per cell, observed or not, keeps cells aligned across masks
            let u: f64 = rng.random();
            if mask[[i, j]] {
                *cell = u8::from(u < link.prob(params.linear_predictor(i, j)));
            }
        }
    });
    ResponseData::new(y, mask.clone())
}

/// Full study replicate: raw parameters, standardized truth, mask and
/// responses drawn from the standardized truth.
pub fn generate(config: &SimConfig) -> Result<GroundTruth> {
    config.validate()?;
    let (n, j, k) = (config.n_persons(), config.n_items, config.n_factors);
    let theta = gen_theta(config.theta_law, n, k, config.seed);
    let (loadings, intercepts) = gen_items(j, k, config.seed)?;
    let params0 = ParameterSet::new(theta, loadings, intercepts)?;

    let radius = FitConfig::default_radius(k);
    if params0.max_person_norm() > person_radius(radius) {
        log::warn!(
            "generated person parameters exceed the default radius (max ‖θ‖ = {:.3} > {:.3})",
            params0.max_person_norm(),
            person_radius(radius)
        );
    }

    let params_star = standardize(&params0)?.into_params();
    let mask = gen_mask(n, j, config.missing_rate, config.seed);
    let data = gen_responses(&params_star, config.link, &mask, config.seed)?;
    Ok(GroundTruth { params0, params_star, data, mask_expected_count: config.missing_rate * (n * j) as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_normal_rows_respect_bound_and_rarely_reject() {
        let k = 3;
        let (theta, draws) = gen_theta_with_draws(ThetaLaw::TruncatedNormal, 20_000, k, 1);
        let bound = 4.0 * (k as f64).sqrt();
        assert!(theta.rows().into_iter().all(|r| r.dot(&r).sqrt() <= bound));
        assert!(20_000.0 / draws as f64 > 0.999);
    }

    #[test]
    fn scaled_beta_has_zero_mean_unit_variance() {
        let (n, k) = (20_000, 2);
        let theta = gen_theta(ThetaLaw::ScaledBeta, n, k, 2);
        let count = (n * k) as f64;
        let mean = theta.sum() / count;
        let var = theta.mapv(|x| (x - mean).powi(2)).sum() / (count - 1.0);
        assert!(mean.abs() < 3.0 * var.sqrt() / count.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn standard_normal_moments() {
        let theta = gen_theta(ThetaLaw::StandardNormal, 10_000, 3, 3);
        let mean = theta.mean().unwrap();
        assert!(mean.abs() < 0.03);
    }

    #[test]
    fn item_patterns_are_nonzero_and_in_range() {
        let (a, d) = gen_items(2_000, 4, 5).unwrap();
        for row in a.rows() {
            assert!(row.iter().any(|&x| x != 0.0));
            assert!(row.iter().all(|&x| x == 0.0 || (0.5..=2.5).contains(&x)));
        }
        assert!(d.iter().all(|&x| (-2.0..=2.0).contains(&x)));
        assert!(gen_items(3, 21, 0).is_err());
    }

    #[test]
    fn full_observation_rate_gives_full_mask() {
        assert!(gen_mask(10, 7, 1.0, 0).iter().all(|&b| b));
    }

    #[test]
    fn mask_fraction_concentrates() {
        let (n, j, p) = (400, 100, 0.3);
        let mask = gen_mask(n, j, p, 6);
        let frac = mask.iter().filter(|&&b| b).count() as f64 / (n * j) as f64;
        assert!((frac - p).abs() < 3.0 * (p * (1.0 - p) / (n * j) as f64).sqrt());
    }

    #[test]
    fn saturated_probabilities_give_all_ones() {
        let mut p = ParameterSet::zeros(5, 4, 1);
        p.intercepts.fill(60.0);
        let data = gen_responses(&p, LinkFunction::Logit, &gen_mask(5, 4, 0.7, 1), 1).unwrap();
        for (i, j) in data.observed_cells() {
            assert_eq!(data.response(i, j), 1);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SimConfig { missing_rate: 0.5, ..SimConfig::new(20, 10.0, 2, 42) };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.params0, b.params0);
        let c = generate(&SimConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn parallel_and_serial_generation_agree() {
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let cfg = SimConfig { missing_rate: 0.6, ..SimConfig::new(30, 10.0, 3, 9) };
        let a = serial.install(|| generate(&cfg).unwrap());
        let b = wide.install(|| generate(&cfg).unwrap());
        assert_eq!(a.data, b.data);
        assert_eq!(a.params_star, b.params_star);
    }

    #[test]
    fn standardized_truth_preserves_predictors() {
        let truth = generate(&SimConfig::new(40, 10.0, 3, 11)).unwrap();
        let m0 = truth.params0.predictor_matrix();
        let ms = truth.params_star.predictor_matrix();
        for (x, y) in m0.iter().zip(ms.iter()) {
            assert!((x - y).abs() < 1e-8);
        }
        assert_eq!(truth.data.n_persons(), 400);
        assert_eq!(truth.mask_expected_count, 400.0 * 40.0);
    }

    #[test]
    fn rejects_invalid_configs() {
        assert!(generate(&SimConfig { missing_rate: 0.0, ..SimConfig::new(10, 10.0, 2, 0) }).is_err());
        assert!(generate(&SimConfig::new(10, 0.5, 2, 0)).is_err());
        assert!("scaled_beta".parse::<ThetaLaw>().unwrap() == ThetaLaw::ScaledBeta);
    }
}
