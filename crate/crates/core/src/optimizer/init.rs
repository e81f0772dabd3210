//! Spectral starting point.
//!
//! The observed responses are coded as ±1 (0 for missing cells) and
//! rescaled by `NJ / n_observed`. Of the top `K + 1` singular triplets, the
//! one whose left vector is best aligned with the all-ones person direction
//! supplies the intercepts; the other `K` give `Θ⁰ = √N U` and
//! `A⁰ = V S / √N`. Rows are then projected onto the feasible balls.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use super::config::FitConfig;
use super::steps::project_ball;
use crate::error::Result;
use crate::linalg::symmetric_eigen_desc;
use crate::model::{person_radius, ParameterSet, ResponseData};
use crate::rng::{substream, Purpose};

/// Scale of the random start used for degenerate data.
const FALLBACK_SCALE: f64 = 0.1;

/// Feasible starting parameters from a truncated SVD of the coded responses.
///
/// If every observed response is identical the SVD carries no factor
/// information and small random parameters (seeded by `config.seed`) are
/// returned instead.
pub fn initialize(data: &ResponseData, config: &FitConfig) -> Result<ParameterSet> {
    let (n, j) = (data.n_persons(), data.n_items());
    config.validate_for(n, j)?;
    let k = config.n_factors;

    let first = data.observed_cells()[0];
    let first_value = data.response(first.0, first.1);
    let constant = data.observed_cells().iter().all(|&(p, i)| data.response(p, i) == first_value);
    if constant {
        log::warn!("all observed responses are {first_value}; using a random start");
        return Ok(project_feasible(random_start(n, j, k, config.seed), config));
    }

    let scale = (n * j) as f64 / data.n_observed() as f64;
    let z = Array2::from_shape_fn((n, j), |(p, i)| {
        if data.is_observed(p, i) {
            scale * (2.0 * f64::from(data.response(p, i)) - 1.0)
        } else {
            0.0
        }
    });

    let rank = k + 1;
    let (u, s, v) = top_singular_triplets(&z, rank);

    // intercept component: largest |1ᵀu| / √N
    let intercept_idx = (0..rank)
        .max_by(|&a, &b| u.column(a).sum().abs().total_cmp(&u.column(b).sum().abs()))
        .expect("rank >= 2");
    let mean_u = u.column(intercept_idx).mean().unwrap_or(0.0);
    let intercepts = v.column(intercept_idx).mapv(|x| s[intercept_idx] * mean_u * x);

    let sqrt_n = (n as f64).sqrt();
    let mut theta = Array2::zeros((n, k));
    let mut loadings = Array2::zeros((j, k));
    let s_max = s[0].max(f64::MIN_POSITIVE);
    let mut rng = substream(config.seed, Purpose::Init, 0);
    for (col, idx) in (0..rank).filter(|&c| c != intercept_idx).enumerate() {
        if s[idx] <= 1e-10 * s_max {
            // no signal in this direction: random person column, zero loadings
            for p in 0..n {
                theta[[p, col]] = rng.sample::<f64, _>(StandardNormal);
            }
            continue;
        }
        theta.column_mut(col).assign(&u.column(idx).mapv(|x| x * sqrt_n));
        loadings.column_mut(col).assign(&v.column(idx).mapv(|x| x * s[idx] / sqrt_n));
    }

    Ok(project_feasible(ParameterSet { theta, loadings, intercepts }, config))
}

/// Top `rank` singular triplets `(U, s, V)` via the eigendecomposition of
/// the smaller Gram matrix.
fn top_singular_triplets(z: &Array2<f64>, rank: usize) -> (Array2<f64>, Array1<f64>, Array2<f64>) {
    let (n, j) = z.dim();
    let small_side_items = j <= n;
    let gram = if small_side_items { z.t().dot(z) } else { z.dot(&z.t()) };
    let (values, vectors) = symmetric_eigen_desc(&gram);
    let s = values.slice(ndarray::s![..rank]).mapv(|l| l.max(0.0).sqrt());
    let small = vectors.slice(ndarray::s![.., ..rank]).to_owned();
    // the other side's singular vectors: Z v / s (or Zᵀ u / s)
    let mut other = if small_side_items { z.dot(&small) } else { z.t().dot(&small) };
    for (mut col, &sv) in other.axis_iter_mut(Axis(1)).zip(s.iter()) {
        if sv > 0.0 {
            col.mapv_inplace(|x| x / sv);
        } else {
            col.fill(0.0);
        }
    }
    if small_side_items {
        (other, s, small)
    } else {
        (small, s, other)
    }
}

fn random_start(n: usize, j: usize, k: usize, seed: u64) -> ParameterSet {
    let mut rng = substream(seed, Purpose::Init, 1);
    let mut draw = |rows: usize, cols: usize| {
        Array2::from_shape_simple_fn((rows, cols), || FALLBACK_SCALE * rng.sample::<f64, _>(StandardNormal))
    };
    let theta = draw(n, k);
    let loadings = draw(j, k);
    ParameterSet { theta, loadings, intercepts: Array1::zeros(j) }
}

/// Projects every person row and item row onto its feasible ball.
pub(crate) fn project_feasible(mut params: ParameterSet, config: &FitConfig) -> ParameterSet {
    let c = config.effective_radius();
    let r = person_radius(c);
    for mut row in params.theta.rows_mut() {
        let projected = project_ball(row.view(), r);
        row.assign(&projected);
    }
    let k = params.n_factors();
    for j in 0..params.n_items() {
        let mut item = Array1::zeros(k + 1);
        item[0] = params.intercepts[j];
        item.slice_mut(ndarray::s![1..]).assign(&params.loadings.row(j));
        let projected = project_ball(item.view(), c);
        params.intercepts[j] = projected[0];
        params.loadings.row_mut(j).assign(&projected.slice(ndarray::s![1..]));
    }
    params
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinkFunction;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn synthetic(seed: u64, n: usize, j: usize, k: usize) -> (ResponseData, Array2<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = Array2::from_shape_simple_fn((n, k), || rng.sample::<f64, _>(StandardNormal));
        let a = Array2::from_shape_simple_fn((j, k), || 2.0 * rng.sample::<f64, _>(StandardNormal));
        let d = Array1::from_shape_simple_fn(j, || rng.random_range(-1.0..1.0));
        let m = theta.dot(&a.t()) + &d;
        let y = m.mapv(|x| u8::from(rng.random::<f64>() < LinkFunction::Logit.prob(x)));
        (ResponseData::complete(y).unwrap(), m)
    }

    #[test]
    fn start_is_feasible() {
        let (data, _) = synthetic(1, 60, 20, 2);
        let cfg = FitConfig { radius: Some(2.0), ..FitConfig::new(2) };
        let p = initialize(&data, &cfg).unwrap();
        assert!(p.is_feasible(2.0));
    }

    #[test]
    fn start_correlates_with_true_logits() {
        let (data, m) = synthetic(2, 400, 60, 3);
        let p = initialize(&data, &FitConfig::new(3)).unwrap();
        let est = p.predictor_matrix();
        let r = pearson(est.iter().copied(), m.iter().copied());
        assert!(r > 0.5, "pearson r = {r}");
    }

    #[test]
    fn deterministic_for_same_seed() {
        let (data, _) = synthetic(3, 50, 15, 2);
        let cfg = FitConfig { seed: 9, ..FitConfig::new(2) };
        assert_eq!(initialize(&data, &cfg).unwrap(), initialize(&data, &cfg).unwrap());
    }

    #[test]
    fn constant_data_falls_back_to_random_start() {
        let data = ResponseData::complete(Array2::from_elem((10, 6), 1u8)).unwrap();
        let cfg = FitConfig { seed: 4, ..FitConfig::new(2) };
        let p = initialize(&data, &cfg).unwrap();
        assert!(p.is_feasible(cfg.effective_radius()));
        assert!(p.theta.iter().any(|&v| v != 0.0));
        assert_eq!(p, initialize(&data, &cfg).unwrap());
        let other = initialize(&data, &FitConfig { seed: 5, ..cfg }).unwrap();
        assert_ne!(p, other);
    }

    #[test]
    fn wide_matrices_use_the_other_gram() {
        let (data, m) = synthetic(6, 30, 80, 2);
        let p = initialize(&data, &FitConfig::new(2)).unwrap();
        let r = pearson(p.predictor_matrix().iter().copied(), m.iter().copied());
        assert!(r > 0.3, "pearson r = {r}");
    }

    fn pearson(x: impl Iterator<Item = f64>, y: impl Iterator<Item = f64>) -> f64 {
        let (x, y): (Vec<f64>, Vec<f64>) = x.zip(y).unzip();
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    }
}
