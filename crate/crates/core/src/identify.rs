//! Identifiability standardization, Procrustes alignment of loadings and
//! recovery metrics.
//!
//! Standardization re-expresses `(Θ, A, d)` so that the person matrix has
//! centered, orthogonal columns with `(1/N) ΘᵀΘ = I`, without changing
//! `ΘAᵀ + 1dᵀ`. Loadings standardized this way are identified up to an
//! orthogonal rotation, which [`procrustes_align`] removes when comparing
//! against a reference.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::linalg::thin_svd;
use crate::model::{LinkFunction, ParameterSet};

/// Parameters satisfying the identifiability normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedSolution {
    pub theta_std: Array2<f64>,
    pub loadings_std: Array2<f64>,
    pub intercepts_std: Array1<f64>,
}

impl StandardizedSolution {
    pub fn into_params(self) -> ParameterSet {
        ParameterSet { theta: self.theta_std, loadings: self.loadings_std, intercepts: self.intercepts_std }
    }

    pub fn as_params(&self) -> ParameterSet {
        self.clone().into_params()
    }
}

/// Centers `Θ` (absorbing the means into the intercepts) and rotates/scales
/// it to `√N U` from the thin SVD `Θ_c = U S Vᵀ`, with `Ã = A V S / √N`.
///
/// Columns are signed so that the largest-magnitude entry of each column of
/// `Ã` is positive.
pub fn standardize(params: &ParameterSet) -> Result<StandardizedSolution> {
    let n = params.n_persons();
    let k = params.n_factors();
    if n == 0 || k == 0 {
        return Err(Error::Shape("standardization needs at least one person and one factor".into()));
    }
    let mu = params.theta.mean_axis(Axis(0)).expect("n > 0");
    let intercepts = &params.intercepts + &params.loadings.dot(&mu);
    let centered = &params.theta - &mu.view().insert_axis(Axis(0));

    if n < k {
        return Err(Error::RankDeficient { rank: n, n_factors: k, deficient: n });
    }
    let svd = thin_svd(&centered);
    let tol = svd.s[0].max(f64::MIN_POSITIVE) * f64::EPSILON * n.max(k) as f64;
    if let Some(idx) = svd.s.iter().position(|&s| s <= tol) {
        return Err(Error::RankDeficient { rank: idx, n_factors: k, deficient: idx });
    }

    let sqrt_n = (n as f64).sqrt();
    let mut theta_std = svd.u.slice(ndarray::s![.., ..k]).mapv(|x| x * sqrt_n);
    // A V S / √N
    let v = svd.vt.t();
    let mut loadings_std = params.loadings.dot(&v);
    for (mut col, &s) in loadings_std.axis_iter_mut(Axis(1)).zip(svd.s.iter()) {
        col.mapv_inplace(|x| x * s / sqrt_n);
    }

    for c in 0..k {
        let col = loadings_std.column(c);
        let pivot = col.iter().copied().fold(0.0_f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            loadings_std.column_mut(c).mapv_inplace(|x| -x);
            theta_std.column_mut(c).mapv_inplace(|x| -x);
        }
    }

    Ok(StandardizedSolution { theta_std, loadings_std, intercepts_std: intercepts })
}

/// Optimal orthogonal alignment of a candidate loading matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// Orthogonal `Q` minimizing `‖reference − candidate·Q‖_F`.
    pub rotation: Array2<f64>,
    /// `(1/(JK)) ‖reference − candidate·Q‖²_F`.
    pub loss: f64,
}

/// Solves the orthogonal Procrustes problem: with `candidateᵀ·reference =
/// U Σ Vᵀ`, the minimizer is `Q = U Vᵀ`.
pub fn procrustes_align(reference: &Array2<f64>, candidate: &Array2<f64>) -> Result<Alignment> {
    if reference.dim() != candidate.dim() {
        return Err(Error::Shape(format!(
            "reference loadings are {:?} but candidate is {:?}",
            reference.dim(),
            candidate.dim()
        )));
    }
    let cross = candidate.t().dot(reference);
    let svd = thin_svd(&cross);
    let rotation = svd.u.dot(&svd.vt);
    let loss = scaled_sq_distance(reference, &candidate.dot(&rotation));
    Ok(Alignment { rotation, loss })
}

/// `(1/(JK)) ‖reference − candidate‖²_F` with no rotation.
pub fn unaligned_loss(reference: &Array2<f64>, candidate: &Array2<f64>) -> Result<f64> {
    if reference.dim() != candidate.dim() {
        return Err(Error::Shape(format!("{:?} vs {:?}", reference.dim(), candidate.dim())));
    }
    Ok(scaled_sq_distance(reference, candidate))
}

fn scaled_sq_distance(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let sq: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    sq / a.len().max(1) as f64
}

fn check_same_shape(est: &ParameterSet, truth: &ParameterSet) -> Result<()> {
    if est.n_persons() != truth.n_persons() || est.n_items() != truth.n_items() {
        return Err(Error::Shape(format!(
            "estimate is {}×{} but truth is {}×{}",
            est.n_persons(),
            est.n_items(),
            truth.n_persons(),
            truth.n_items()
        )));
    }
    Ok(())
}

/// `(1/(NJ)) ‖Θ̂Âᵀ + 1d̂ᵀ − Θ*A*ᵀ − 1d*ᵀ‖²_F`.
///
/// The two parameter sets may have different latent dimensions.
pub fn probability_loss(est: &ParameterSet, truth: &ParameterSet) -> Result<f64> {
    check_same_shape(est, truth)?;
    Ok(scaled_sq_distance(&est.predictor_matrix(), &truth.predictor_matrix()))
}

/// `(1/(NJ)) Σ_ij (f(m̂_ij) − f(m*_ij))²`.
pub fn probability_recovery_error(est: &ParameterSet, truth: &ParameterSet, link: LinkFunction) -> Result<f64> {
    check_same_shape(est, truth)?;
    let pe = est.predictor_matrix().mapv(|m| link.prob(m));
    let pt = truth.predictor_matrix().mapv(|m| link.prob(m));
    Ok(scaled_sq_distance(&pe, &pt))
}

/// `σ_K(A) / √J`, the scale-free strength of the weakest loading direction.
pub fn check_identification(loadings: &Array2<f64>) -> Result<f64> {
    let (j, k) = loadings.dim();
    if k == 0 || j < k {
        return Err(Error::Shape(format!("need J >= K >= 1, got J = {j}, K = {k}")));
    }
    let svd = thin_svd(loadings);
    Ok(svd.s[k - 1] / (j as f64).sqrt())
}
