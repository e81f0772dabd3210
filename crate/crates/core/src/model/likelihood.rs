//! Joint negative log-likelihood over observed cells and its row-wise
//! gradients.

use std::borrow::Cow;

use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;

use super::data::{predictor_slice, ParameterSet, ResponseData};
use super::link::LinkFunction;
use crate::error::{Error, Result};

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Borrows a matrix as a row-major slice, copying only if its layout is not
/// already standard.
fn row_major(a: &Array2<f64>) -> Cow<'_, [f64]> {
    match a.as_slice() {
        Some(s) => Cow::Borrowed(s),
        None => Cow::Owned(a.iter().copied().collect()),
    }
}

fn vector<'a>(v: &'a ArrayView1<'_, f64>) -> Cow<'a, [f64]> {
    match v.as_slice() {
        Some(s) => Cow::Borrowed(s),
        None => Cow::Owned(v.to_vec()),
    }
}

/// Negative log-likelihood of person `i` over that person's observed items,
/// evaluated at an arbitrary person vector `theta`.
pub fn person_nll(
    data: &ResponseData,
    params: &ParameterSet,
    link: LinkFunction,
    person: usize,
    theta: ArrayView1<'_, f64>,
) -> f64 {
    let k = params.n_factors();
    let loadings = row_major(&params.loadings);
    let theta = vector(&theta);
    let mut sum = CompensatedSum::default();
    for (&j, &y) in data.items_of(person).iter().zip(data.person_responses(person)) {
        let m = predictor_slice(params.intercepts[j], &loadings[j * k..(j + 1) * k], &theta);
        sum.add(link.cell_nll(m, y));
    }
    sum.value()
}

/// Negative log-likelihood of item `j` over the persons who answered it,
/// evaluated at an arbitrary intercept and loading vector.
pub fn item_nll(
    data: &ResponseData,
    params: &ParameterSet,
    link: LinkFunction,
    item: usize,
    intercept: f64,
    loading: ArrayView1<'_, f64>,
) -> f64 {
    let k = params.n_factors();
    let theta = row_major(&params.theta);
    let loading = vector(&loading);
    let mut sum = CompensatedSum::default();
    for (&i, &y) in data.persons_of(item).iter().zip(data.item_responses(item)) {
        let m = predictor_slice(intercept, &loading, &theta[i * k..(i + 1) * k]);
        sum.add(link.cell_nll(m, y));
    }
    sum.value()
}

/// Sum of the per-person terms, in person order. Rows are evaluated in
/// parallel on the ambient rayon pool; the reduction is serial so the result
/// does not depend on the worker count.
pub(crate) fn total_nll(data: &ResponseData, params: &ParameterSet, link: LinkFunction) -> f64 {
    let rows: Vec<f64> = (0..data.n_persons())
        .into_par_iter()
        .map(|i| person_nll(data, params, link, i, params.theta.row(i)))
        .collect();
    rows.into_iter().collect::<CompensatedSum>().value()
}

/// Joint negative log-likelihood over the observed cells,
/// `-Σ_{ω_ij = 1} [y_ij ln f(m_ij) + (1 - y_ij) ln(1 - f(m_ij))]`.
///
/// A non-finite value is reported as [`Error::NonFinite`].
pub fn joint_nll(data: &ResponseData, params: &ParameterSet, link: LinkFunction) -> Result<f64> {
    params.check_shape(data)?;
    let value = total_nll(data, params, link);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(format!("joint negative log-likelihood evaluated to {value}")))
    }
}

/// Gradient of [`person_nll`] with respect to `θ_i`, at `params.theta.row(i)`.
///
/// A person with no observed responses gets the zero vector.
pub fn grad_person(data: &ResponseData, params: &ParameterSet, link: LinkFunction, person: usize) -> Array1<f64> {
    let k = params.n_factors();
    let loadings = row_major(&params.loadings);
    let row = params.theta.row(person);
    let theta = vector(&row);
    let mut g = vec![0.0; k];
    for (&j, &y) in data.items_of(person).iter().zip(data.person_responses(person)) {
        let a = &loadings[j * k..(j + 1) * k];
        let s = link.cell_score(predictor_slice(params.intercepts[j], a, &theta), y);
        for (gk, ak) in g.iter_mut().zip(a) {
            *gk += s * ak;
        }
    }
    Array1::from(g)
}

/// Gradient of [`item_nll`] with respect to `(d_j, a_j)`: intercept first,
/// then the K loading components.
pub fn grad_item(data: &ResponseData, params: &ParameterSet, link: LinkFunction, item: usize) -> Array1<f64> {
    let k = params.n_factors();
    let theta = row_major(&params.theta);
    let row = params.loadings.row(item);
    let a = vector(&row);
    let d = params.intercepts[item];
    let mut g = vec![0.0; k + 1];
    for (&i, &y) in data.persons_of(item).iter().zip(data.item_responses(item)) {
        let t = &theta[i * k..(i + 1) * k];
        let s = link.cell_score(predictor_slice(d, &a, t), y);
        g[0] += s;
        for (gk, tk) in g[1..].iter_mut().zip(t) {
            *gk += s * tk;
        }
    }
    Array1::from(g)
}
