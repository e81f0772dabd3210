//! Projected gradient half-steps over person rows and item rows.

use ndarray::{Array1, ArrayView1, Zip};
use rayon::prelude::*;

use super::config::{FitConfig, LineSearch};
use crate::model::{grad_item, grad_person, item_nll, person_nll, person_radius, LinkFunction, ParameterSet, ResponseData};

/// Euclidean projection onto the ball of radius `radius`:
/// `v` if `‖v‖ ≤ radius`, else `(radius / ‖v‖) v`.
pub fn project_ball(v: ArrayView1<'_, f64>, radius: f64) -> Array1<f64> {
    let mut out = v.to_owned();
    project_in_place(&mut out, radius);
    out
}

fn project_in_place(v: &mut Array1<f64>, radius: f64) {
    let norm = v.dot(v).sqrt();
    if norm > radius {
        let scale = radius / norm;
        v.mapv_inplace(|x| x * scale);
        // rounding can leave the norm one ulp above the radius
        let n2 = v.dot(v).sqrt();
        if n2 > radius {
            let fix = radius / n2;
            v.mapv_inplace(|x| x * fix);
        }
    }
}

/// What happened to one row during a half-step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowStep {
    /// Accepted step size.
    Accepted(f64),
    /// Gradient was exactly zero; the row was not touched.
    ZeroGradient,
    /// No trial step decreased the objective; the row kept its value.
    Exhausted,
}

impl RowStep {
    /// Accepted step size, or 0 for rows that did not move.
    pub fn step_size(self) -> f64 {
        match self {
            RowStep::Accepted(eta) => eta,
            _ => 0.0,
        }
    }
}

/// Per-row outcomes of one half-step.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfStep {
    pub rows: Vec<RowStep>,
}

impl HalfStep {
    pub fn accepted_step_sizes(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.step_size()).collect()
    }

    pub fn exhausted(&self) -> usize {
        self.rows.iter().filter(|r| matches!(r, RowStep::Exhausted)).count()
    }

    pub fn zero_gradient(&self) -> usize {
        self.rows.iter().filter(|r| matches!(r, RowStep::ZeroGradient)).count()
    }
}

/// Backtracking projected gradient step for a single row.
fn backtrack<F>(
    current: ArrayView1<'_, f64>,
    grad: &Array1<f64>,
    radius: f64,
    ls: &LineSearch,
    mut objective: F,
) -> (Option<Array1<f64>>, RowStep)
where
    F: FnMut(ArrayView1<'_, f64>) -> f64,
{
    if grad.iter().all(|&g| g == 0.0) {
        return (None, RowStep::ZeroGradient);
    }
    let start = objective(current);
    let mut eta = ls.initial_step;
    let mut trial = Array1::zeros(current.len());
    for _ in 0..=ls.max_backtracks {
        Zip::from(&mut trial).and(current).and(grad).for_each(|t, &c, &g| *t = c - eta * g);
        project_in_place(&mut trial, radius);
        if objective(trial.view()) < start {
            return (Some(trial), RowStep::Accepted(eta));
        }
        eta *= ls.shrink;
    }
    (None, RowStep::Exhausted)
}

/// Replaces every `θ_i` by `Prox_{√(C²−1)}(θ_i − η g_i)` with a per-row
/// backtracked `η`. Item parameters are read but not modified.
///
/// Rows are processed in parallel on the current rayon pool; each row's
/// result depends only on that row, so the outcome is identical for any
/// number of workers.
pub fn update_persons(data: &ResponseData, params: &mut ParameterSet, link: LinkFunction, config: &FitConfig) -> HalfStep {
    let radius = person_radius(config.effective_radius());
    let ls = config.line_search;
    let frozen: &ParameterSet = params;
    let results: Vec<(Option<Array1<f64>>, RowStep)> = (0..frozen.n_persons())
        .into_par_iter()
        .map(|i| {
            let g = grad_person(data, frozen, link, i);
            backtrack(frozen.theta.row(i), &g, radius, &ls, |theta| person_nll(data, frozen, link, i, theta))
        })
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    for (i, (new_row, step)) in results.into_iter().enumerate() {
        if let Some(row) = new_row {
            params.theta.row_mut(i).assign(&row);
        }
        rows.push(step);
    }
    HalfStep { rows }
}

/// Replaces every `(d_j, a_j)` by `Prox_C((d_j, a_j) − η g̃_j)` with a
/// per-row backtracked `η`. Person parameters are read but not modified.
pub fn update_items(data: &ResponseData, params: &mut ParameterSet, link: LinkFunction, config: &FitConfig) -> HalfStep {
    let radius = config.effective_radius();
    let ls = config.line_search;
    let k = params.n_factors();
    let frozen: &ParameterSet = params;
    let results: Vec<(Option<Array1<f64>>, RowStep)> = (0..frozen.n_items())
        .into_par_iter()
        .map(|j| {
            let g = grad_item(data, frozen, link, j);
            let mut current = Array1::zeros(k + 1);
            current[0] = frozen.intercepts[j];
            current.slice_mut(ndarray::s![1..]).assign(&frozen.loadings.row(j));
            backtrack(current.view(), &g, radius, &ls, |x| {
                item_nll(data, frozen, link, j, x[0], x.slice(ndarray::s![1..]))
            })
        })
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    for (j, (new_row, step)) in results.into_iter().enumerate() {
        if let Some(row) = new_row {
            params.intercepts[j] = row[0];
            params.loadings.row_mut(j).assign(&row.slice(ndarray::s![1..]));
        }
        rows.push(step);
    }
    HalfStep { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn projection_examples() {
        let v = array![3.0, 4.0];
        assert_eq!(project_ball(v.view(), 10.0), array![3.0, 4.0]);
        assert_eq!(project_ball(v.view(), 5.0), array![3.0, 4.0]);
        let p = project_ball(v.view(), 1.0);
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_loadings_leave_theta_unchanged() {
        let data = ResponseData::complete(array![[1u8, 0], [0, 1], [1, 1]]).unwrap();
        let mut p = ParameterSet::zeros(3, 2, 2);
        p.theta = array![[0.1, 0.2], [-0.3, 0.0], [1.0, 1.0]];
        let before = p.theta.clone();
        let step = update_persons(&data, &mut p, LinkFunction::Logit, &FitConfig::new(2));
        assert_eq!(p.theta, before);
        assert_eq!(step.zero_gradient(), 3);
        assert_eq!(step.accepted_step_sizes(), vec![0.0; 3]);
    }

    #[test]
    fn single_correct_response_pushes_theta_along_loading() {
        let data = ResponseData::complete(array![[1u8]]).unwrap();
        let mut p = ParameterSet::zeros(1, 1, 2);
        p.loadings[[0, 0]] = 1.0;
        let step = update_persons(&data, &mut p, LinkFunction::Logit, &FitConfig::new(2));
        assert!(p.theta[[0, 0]] > 0.0);
        assert_eq!(p.theta[[0, 1]], 0.0);
        assert!(matches!(step.rows[0], RowStep::Accepted(_)));
    }

    #[test]
    fn balanced_item_with_zero_theta_is_unchanged() {
        let data = ResponseData::complete(array![[1u8], [0], [1], [0]]).unwrap();
        let mut p = ParameterSet::zeros(4, 1, 2);
        update_items(&data, &mut p, LinkFunction::Logit, &FitConfig::new(2));
        assert_eq!(p.intercepts[0], 0.0);
        assert!(p.loadings.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn all_correct_item_raises_intercept() {
        let data = ResponseData::complete(Array2::from_elem((6, 1), 1u8)).unwrap();
        let mut p = ParameterSet::zeros(6, 1, 1);
        update_items(&data, &mut p, LinkFunction::Logit, &FitConfig::new(1));
        assert!(p.intercepts[0] > 0.0);
    }

    #[test]
    fn updates_respect_the_balls() {
        let y = Array2::from_shape_fn((8, 5), |(i, j)| u8::from((i * 7 + j * 3) % 4 == 0));
        let data = ResponseData::complete(y).unwrap();
        let cfg = FitConfig { radius: Some(1.5), ..FitConfig::new(2) };
        let mut p = ParameterSet::zeros(8, 5, 2);
        p.loadings = Array2::from_shape_fn((5, 2), |(j, k)| 0.5 + 0.1 * (j + k) as f64);
        p.loadings.mapv_inplace(|v| v.min(0.9));
        for _ in 0..5 {
            update_persons(&data, &mut p, LinkFunction::Logit, &cfg);
            assert!(p.max_person_norm() <= person_radius(1.5) * (1.0 + 1e-12));
            update_items(&data, &mut p, LinkFunction::Logit, &cfg);
            assert!(p.max_item_norm() <= 1.5 * (1.0 + 1e-12));
        }
    }
}
