use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// A binary response matrix together with its observation mask.
///
/// Unobserved cells carry `y = 0` internally and are never read by the
/// likelihood. Index lists of observed cells per person and per item are
/// cached at construction so the row- and column-wise updates only touch
/// observed entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseData {
    y: Array2<u8>,
    mask: Array2<bool>,
    n_observed: usize,
    by_person: Vec<Vec<usize>>,
    by_item: Vec<Vec<usize>>,
    // responses aligned with `by_person` / `by_item`
    person_y: Vec<Vec<u8>>,
    item_y: Vec<Vec<u8>>,
}

impl ResponseData {
    /// Builds a dataset from responses and a mask of the same shape.
    ///
    /// Observed cells must hold 0 or 1; unobserved cells are ignored and
    /// zeroed.
    pub fn new(mut y: Array2<u8>, mask: Array2<bool>) -> Result<Self> {
        if y.dim() != mask.dim() {
            return Err(Error::Shape(format!(
                "responses are {:?} but mask is {:?}",
                y.dim(),
                mask.dim()
            )));
        }
        let (n, j) = y.dim();
        if n == 0 || j == 0 {
            return Err(Error::InvalidData("response matrix has no rows or columns".into()));
        }
        let mut by_person = vec![Vec::new(); n];
        let mut by_item = vec![Vec::new(); j];
        let mut person_y = vec![Vec::new(); n];
        let mut item_y = vec![Vec::new(); j];
        let mut n_observed = 0;
        for ((row, col), &seen) in mask.indexed_iter() {
            if seen {
                let v = y[[row, col]];
                if v > 1 {
                    return Err(Error::InvalidData(format!(
                        "observed cell ({row}, {col}) holds {v}, expected 0 or 1"
                    )));
                }
                by_person[row].push(col);
                by_item[col].push(row);
                person_y[row].push(v);
                item_y[col].push(v);
                n_observed += 1;
            } else {
                y[[row, col]] = 0;
            }
        }
        if n_observed == 0 {
            return Err(Error::InvalidData("no observed responses".into()));
        }
        Ok(Self { y, mask, n_observed, by_person, by_item, person_y, item_y })
    }

    /// A fully observed dataset.
    pub fn complete(y: Array2<u8>) -> Result<Self> {
        let mask = Array2::from_elem(y.dim(), true);
        Self::new(y, mask)
    }

    /// Builds a dataset from optional cells (`None` = missing).
    pub fn from_options(cells: &Array2<Option<u8>>) -> Result<Self> {
        let y = cells.mapv(|c| c.unwrap_or(0));
        let mask = cells.mapv(|c| c.is_some());
        Self::new(y, mask)
    }

    pub fn n_persons(&self) -> usize {
        self.y.nrows()
    }

    pub fn n_items(&self) -> usize {
        self.y.ncols()
    }

    pub fn n_observed(&self) -> usize {
        self.n_observed
    }

    pub fn responses(&self) -> &Array2<u8> {
        &self.y
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    #[inline]
    pub fn response(&self, person: usize, item: usize) -> u8 {
        self.y[[person, item]]
    }

    #[inline]
    pub fn is_observed(&self, person: usize, item: usize) -> bool {
        self.mask[[person, item]]
    }

    /// Items answered by `person`, in increasing order.
    #[inline]
    pub fn items_of(&self, person: usize) -> &[usize] {
        &self.by_person[person]
    }

    /// Persons who answered `item`, in increasing order.
    #[inline]
    pub fn persons_of(&self, item: usize) -> &[usize] {
        &self.by_item[item]
    }

    /// Responses of `person`, aligned with [`Self::items_of`].
    #[inline]
    pub(crate) fn person_responses(&self, person: usize) -> &[u8] {
        &self.person_y[person]
    }

    /// Responses to `item`, aligned with [`Self::persons_of`].
    #[inline]
    pub(crate) fn item_responses(&self, item: usize) -> &[u8] {
        &self.item_y[item]
    }

    /// The same responses restricted to a sub-mask.
    ///
    /// Cells outside `self.mask()` stay unobserved whatever `keep` says.
    pub fn restrict(&self, keep: &Array2<bool>) -> Result<Self> {
        if keep.dim() != self.mask.dim() {
            return Err(Error::Shape(format!(
                "restriction mask is {:?} but data is {:?}",
                keep.dim(),
                self.mask.dim()
            )));
        }
        let mask = ndarray::Zip::from(&self.mask).and(keep).map_collect(|&a, &b| a && b);
        Self::new(self.y.clone(), mask)
    }

    /// Observed cells as `(person, item)` pairs in row-major order.
    pub fn observed_cells(&self) -> Vec<(usize, usize)> {
        self.by_person
            .iter()
            .enumerate()
            .flat_map(|(i, items)| items.iter().map(move |&j| (i, j)))
            .collect()
    }
}

/// Person matrix `Θ` (N×K), loading matrix `A` (J×K) and intercepts `d` (J).
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    pub theta: Array2<f64>,
    pub loadings: Array2<f64>,
    pub intercepts: Array1<f64>,
}

impl ParameterSet {
    pub fn new(theta: Array2<f64>, loadings: Array2<f64>, intercepts: Array1<f64>) -> Result<Self> {
        if theta.ncols() != loadings.ncols() {
            return Err(Error::Shape(format!(
                "theta has {} factors but loadings have {}",
                theta.ncols(),
                loadings.ncols()
            )));
        }
        if loadings.nrows() != intercepts.len() {
            return Err(Error::Shape(format!(
                "loadings have {} items but intercepts have {}",
                loadings.nrows(),
                intercepts.len()
            )));
        }
        Ok(Self { theta, loadings, intercepts })
    }

    pub fn zeros(n_persons: usize, n_items: usize, n_factors: usize) -> Self {
        Self {
            theta: Array2::zeros((n_persons, n_factors)),
            loadings: Array2::zeros((n_items, n_factors)),
            intercepts: Array1::zeros(n_items),
        }
    }

    pub fn n_persons(&self) -> usize {
        self.theta.nrows()
    }

    pub fn n_items(&self) -> usize {
        self.loadings.nrows()
    }

    pub fn n_factors(&self) -> usize {
        self.theta.ncols()
    }

    /// `m_ij = d_j + a_jᵀ θ_i`.
    #[inline]
    pub fn linear_predictor(&self, person: usize, item: usize) -> f64 {
        predictor(self.intercepts[item], self.loadings.row(item), self.theta.row(person))
    }

    /// The full N×J predictor matrix `Θ Aᵀ + 1 dᵀ`.
    pub fn predictor_matrix(&self) -> Array2<f64> {
        let mut m = self.theta.dot(&self.loadings.t());
        m += &self.intercepts.view().insert_axis(Axis(0));
        m
    }

    /// Checks both ball constraints, with a small relative slack for the
    /// rounding of a projected row's norm.
    pub fn is_feasible(&self, radius: f64) -> bool {
        self.max_person_norm() <= person_radius(radius) * (1.0 + 1e-12)
            && self.max_item_norm() <= radius * (1.0 + 1e-12)
    }

    /// Largest `‖θ_i‖`.
    pub fn max_person_norm(&self) -> f64 {
        self.theta.rows().into_iter().map(|r| r.dot(&r).sqrt()).fold(0.0, f64::max)
    }

    /// Largest `‖(d_j, a_j)‖`.
    pub fn max_item_norm(&self) -> f64 {
        self.loadings
            .rows()
            .into_iter()
            .zip(self.intercepts.iter())
            .map(|(a, &d)| (d * d + a.dot(&a)).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn check_shape(&self, data: &ResponseData) -> Result<()> {
        if self.n_persons() != data.n_persons() || self.n_items() != data.n_items() {
            return Err(Error::Shape(format!(
                "parameters are for {}×{} responses but data is {}×{}",
                self.n_persons(),
                self.n_items(),
                data.n_persons(),
                data.n_items()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().chain(self.loadings.iter()).chain(self.intercepts.iter()).all(|v| v.is_finite())
    }
}

/// Radius of the person ball, `√(C² − 1)`.
#[inline]
pub fn person_radius(radius: f64) -> f64 {
    (radius * radius - 1.0).max(0.0).sqrt()
}

#[inline]
pub(crate) fn predictor(intercept: f64, loading: ArrayView1<'_, f64>, theta: ArrayView1<'_, f64>) -> f64 {
    let mut m = intercept;
    for (a, t) in loading.iter().zip(theta.iter()) {
        m += a * t;
    }
    m
}

/// [`predictor`] on plain slices, with the same summation order.
#[inline]
pub(crate) fn predictor_slice(intercept: f64, loading: &[f64], theta: &[f64]) -> f64 {
    let mut m = intercept;
    for (a, t) in loading.iter().zip(theta) {
        m += a * t;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn counts_observed_cells_and_builds_indices() {
        let y = array![[1u8, 0, 1], [0, 1, 1]];
        let mask = array![[true, false, true], [true, true, false]];
        let data = ResponseData::new(y, mask).unwrap();
        assert_eq!(data.n_observed(), 4);
        assert_eq!(data.items_of(0), &[0, 2]);
        assert_eq!(data.persons_of(2), &[0]);
        assert_eq!(data.response(1, 2), 0, "unobserved cells are zeroed");
        assert_eq!(data.observed_cells(), vec![(0, 0), (0, 2), (1, 0), (1, 1)]);
    }

    #[test]
    fn rejects_non_binary_observed_values() {
        let y = array![[2u8, 0]];
        assert!(matches!(ResponseData::complete(y), Err(Error::InvalidData(_))));
        // a bad value in an unobserved cell is fine
        let ok = ResponseData::new(array![[2u8, 0]], array![[false, true]]);
        assert!(ok.is_ok());
    }

    #[test]
    fn rejects_empty_mask() {
        let r = ResponseData::new(array![[1u8]], array![[false]]);
        assert!(matches!(r, Err(Error::InvalidData(_))));
    }

    #[test]
    fn restrict_intersects_masks() {
        let data = ResponseData::new(array![[1u8, 1], [0, 1]], array![[true, false], [true, true]]).unwrap();
        let sub = data.restrict(&array![[true, true], [false, true]]).unwrap();
        assert_eq!(sub.n_observed(), 2);
        assert!(!sub.is_observed(0, 1));
    }

    #[test]
    fn predictor_matrix_matches_cellwise() {
        let p = ParameterSet::new(
            array![[0.5, -1.0], [2.0, 0.25]],
            array![[1.0, 0.0], [0.3, -0.7], [0.0, 2.0]],
            array![0.1, -0.2, 0.3],
        )
        .unwrap();
        let m = p.predictor_matrix();
        for i in 0..2 {
            for j in 0..3 {
                assert!((m[[i, j]] - p.linear_predictor(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn feasibility_uses_both_balls() {
        let mut p = ParameterSet::zeros(2, 2, 1);
        assert!(p.is_feasible(2.0));
        p.theta[[0, 0]] = 3.0_f64.sqrt(); // √(1 + 3) = 2
        assert!(p.is_feasible(2.0));
        p.theta[[0, 0]] = 1.8;
        assert!(!p.is_feasible(2.0));
        p.theta[[0, 0]] = 0.0;
        p.intercepts[1] = 2.1;
        assert!(!p.is_feasible(2.0));
    }
}
