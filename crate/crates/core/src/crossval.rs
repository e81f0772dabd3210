//! Entry-wise B-fold cross-validation over observed cells for choosing the
//! number of latent factors.
//!
//! The observed cells are shuffled once and dealt into `B` folds. For every
//! candidate K and fold b, the model is fitted on the observed cells outside
//! fold b and scored on the cells inside it.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CompensatedSum, LinkFunction, ResponseData};
use crate::optimizer::{fit, in_pool, FitConfig, FitReport};
use crate::rng::{substream, Purpose};

pub const DEFAULT_FOLDS: usize = 5;

/// Random partition of the observed cells into folds.
#[derive(Debug, Clone, PartialEq)]
pub struct CvPlan {
    folds: usize,
    candidate_ks: Vec<usize>,
    seed: u64,
    /// Observed cells in row-major order.
    cells: Vec<(usize, usize)>,
    /// Fold of `cells[c]`, in `0..folds`.
    assignment: Vec<usize>,
}

impl CvPlan {
    /// Shuffles the observed cells of `data` and deals them round-robin into
    /// `folds` folds, so fold sizes differ by at most one and the first
    /// `n_observed % folds` folds get the extra cell.
    ///
    /// Candidates are sorted and de-duplicated.
    pub fn new(data: &ResponseData, folds: usize, candidate_ks: &[usize], seed: u64) -> Result<Self> {
        if folds < 2 {
            return Err(Error::InvalidConfig(format!("cross-validation needs at least 2 folds, got {folds}")));
        }
        if folds > data.n_observed() {
            return Err(Error::InvalidConfig(format!(
                "{folds} folds requested but only {} cells are observed",
                data.n_observed()
            )));
        }
        if candidate_ks.is_empty() {
            return Err(Error::InvalidConfig("no candidate factor counts given".into()));
        }
        let mut ks = candidate_ks.to_vec();
        ks.sort_unstable();
        ks.dedup();

        let cells = data.observed_cells();
        let mut order: Vec<usize> = (0..cells.len()).collect();
        order.shuffle(&mut substream(seed, Purpose::Folds, 0));
        let mut assignment = vec![0; cells.len()];
        for (position, &cell) in order.iter().enumerate() {
            assignment[cell] = position % folds;
        }
        Ok(Self { folds, candidate_ks: ks, seed, cells, assignment })
    }

    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn candidate_ks(&self) -> &[usize] {
        &self.candidate_ks
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Fold label of every observed cell, keyed by `(person, item)`.
    pub fn assignments(&self) -> impl Iterator<Item = ((usize, usize), usize)> + '_ {
        self.cells.iter().copied().zip(self.assignment.iter().copied())
    }

    /// Cells held out in fold `b`, in row-major order.
    pub fn fold_cells(&self, b: usize) -> Vec<(usize, usize)> {
        self.assignments().filter(|&(_, f)| f == b).map(|(c, _)| c).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }

    /// Mask of the cells used for fitting when fold `b` is held out.
    pub fn training_mask(&self, b: usize, shape: (usize, usize)) -> Array2<bool> {
        let mut mask = Array2::from_elem(shape, false);
        for ((i, j), f) in self.assignments() {
            mask[[i, j]] = f != b;
        }
        mask
    }
}

/// Per-cell loss on held-out responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvCriterion {
    /// `(y − f(m))²`.
    #[default]
    SquaredError,
    /// `−y ln f(m) − (1 − y) ln(1 − f(m))`, with the probability floor.
    LogLoss,
}

impl CvCriterion {
    fn loss(self, link: LinkFunction, m: f64, y: u8) -> f64 {
        match self {
            CvCriterion::SquaredError => (f64::from(y) - link.prob(m)).powi(2),
            CvCriterion::LogLoss => link.cell_nll(m, y),
        }
    }
}

impl std::str::FromStr for CvCriterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "squared-error" | "squared" | "brier" => Ok(CvCriterion::SquaredError),
            "log-loss" | "logloss" => Ok(CvCriterion::LogLoss),
            other => Err(format!("unknown criterion `{other}` (expected squared-error or log-loss)")),
        }
    }
}

impl std::fmt::Display for CvCriterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CvCriterion::SquaredError => "squared-error",
            CvCriterion::LogLoss => "log-loss",
        })
    }
}

/// Held-out errors for one candidate K.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvEntry {
    pub k: usize,
    /// `err^(b)(K)` for `b = 0..B`.
    pub fold_errors: Vec<f64>,
    /// Left-to-right sum of `fold_errors`.
    pub total: f64,
    /// Whether each fold's fit converged.
    pub converged: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub criterion: CvCriterion,
    /// One entry per candidate, in increasing K.
    pub per_k: Vec<CvEntry>,
    /// Candidate with the smallest total; ties go to the smaller K.
    pub selected_k: usize,
    pub warnings: Vec<String>,
}

impl CvReport {
    pub fn entry(&self, k: usize) -> Option<&CvEntry> {
        self.per_k.iter().find(|e| e.k == k)
    }
}

/// Fits factor count `k` on the training cells of fold `b`.
///
/// The config is `template` with `k` factors (a default radius follows `k`)
/// and runs on the ambient rayon pool.
pub fn fit_fold(
    data: &ResponseData,
    link: LinkFunction,
    template: &FitConfig,
    plan: &CvPlan,
    k: usize,
    b: usize,
) -> Result<FitReport> {
    let training = data.restrict(&plan.training_mask(b, data.responses().dim()))?;
    let config = FitConfig { threads: 0, ..template.with_factors(k) };
    fit(&training, link, &config, None)
}

/// Cross-validation error with the squared-error criterion.
pub fn cv_error(data: &ResponseData, link: LinkFunction, template: &FitConfig, plan: &CvPlan) -> Result<CvReport> {
    cv_error_with(data, link, template, plan, CvCriterion::SquaredError)
}

/// Cross-validation error under `criterion`.
///
/// The K × fold fits are independent jobs on a pool of `template.threads`
/// workers (the ambient pool when 0); results are combined serially, so the
/// report does not depend on the worker count.
pub fn cv_error_with(
    data: &ResponseData,
    link: LinkFunction,
    template: &FitConfig,
    plan: &CvPlan,
    criterion: CvCriterion,
) -> Result<CvReport> {
    if plan.cells.len() != data.n_observed() || plan.cells != data.observed_cells() {
        return Err(Error::Shape("cross-validation plan was built for different data".into()));
    }
    let (n, j) = data.responses().dim();
    for &k in plan.candidate_ks() {
        template.with_factors(k).validate_for(n, j)?;
    }

    let mut warnings = Vec::new();
    for b in 0..plan.folds() {
        let training = data.restrict(&plan.training_mask(b, (n, j)))?;
        let empty_persons = (0..n).filter(|&i| training.items_of(i).is_empty()).count();
        let empty_items = (0..j).filter(|&i| training.persons_of(i).is_empty()).count();
        if empty_persons + empty_items > 0 {
            let msg = format!(
                "fold {}: {empty_persons} persons and {empty_items} items have no training responses",
                b + 1
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }

    let jobs: Vec<(usize, usize)> =
        plan.candidate_ks().iter().flat_map(|&k| (0..plan.folds()).map(move |b| (k, b))).collect();
    let results: Vec<Result<(f64, bool)>> = in_pool(template.threads, || {
        jobs.par_iter()
            .map(|&(k, b)| {
                let report = fit_fold(data, link, template, plan, k, b)?;
                let params = &report.params;
                let err = plan
                    .fold_cells(b)
                    .into_iter()
                    .map(|(i, item)| criterion.loss(link, params.linear_predictor(i, item), data.response(i, item)))
                    .collect::<CompensatedSum>()
                    .value();
                Ok((err, report.converged))
            })
            .collect()
    })?;

    let mut per_k = Vec::with_capacity(plan.candidate_ks().len());
    let mut results = results.into_iter();
    for &k in plan.candidate_ks() {
        let mut fold_errors = Vec::with_capacity(plan.folds());
        let mut converged = Vec::with_capacity(plan.folds());
        for b in 0..plan.folds() {
            let (err, ok) = results.next().expect("one result per job")?;
            if !ok {
                let msg = format!("K = {k}, fold {}: fit stopped at the iteration limit", b + 1);
                log::warn!("{msg}");
                warnings.push(msg);
            }
            fold_errors.push(err);
            converged.push(ok);
        }
        let total = fold_errors.iter().sum();
        per_k.push(CvEntry { k, fold_errors, total, converged });
    }

    let selected_k = per_k
        .iter()
        .fold(None::<&CvEntry>, |best, e| match best {
            Some(b) if b.total <= e.total => Some(b),
            _ => Some(e),
        })
        .map(|e| e.k)
        .expect("at least one candidate");
    Ok(CvReport { criterion, per_k, selected_k, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::InitStrategy;
    use crate::simulate::{generate, SimConfig};

    fn toy(n: usize, j: usize) -> ResponseData {
        let y = Array2::from_shape_fn((n, j), |(i, c)| u8::from((i * 7 + c * 3 + i * c) % 5 < 2));
        ResponseData::complete(y).unwrap()
    }

    #[test]
    fn equal_folds_when_divisible() {
        let plan = CvPlan::new(&toy(40, 25), 5, &[1], 0).unwrap();
        assert_eq!(plan.fold_sizes(), vec![200; 5]);
    }

    #[test]
    fn remainder_goes_to_leading_folds() {
        let mut mask = Array2::from_elem((59, 17), false);
        for idx in 0..1003 {
            mask[[idx / 17, idx % 17]] = true;
        }
        let y = Array2::from_shape_fn((59, 17), |(i, c)| u8::from((i + c) % 2 == 0));
        let data = ResponseData::new(y, mask).unwrap();
        let plan = CvPlan::new(&data, 5, &[1], 3).unwrap();
        assert_eq!(plan.fold_sizes(), vec![201, 201, 201, 200, 200]);
    }

    #[test]
    fn folds_partition_the_observed_cells() {
        let mut mask = Array2::from_elem((30, 12), true);
        mask[[3, 4]] = false;
        mask[[10, 0]] = false;
        let data = ResponseData::new(toy(30, 12).responses().clone(), mask.clone()).unwrap();
        let plan = CvPlan::new(&data, 4, &[1, 2], 8).unwrap();
        let mut union = Array2::from_elem((30, 12), 0usize);
        for b in 0..4 {
            for (i, j) in plan.fold_cells(b) {
                union[[i, j]] += 1;
            }
            let train = plan.training_mask(b, (30, 12));
            for (i, j) in plan.fold_cells(b) {
                assert!(!train[[i, j]]);
            }
        }
        for ((i, j), &count) in union.indexed_iter() {
            assert_eq!(count, usize::from(mask[[i, j]]));
        }
    }

    #[test]
    fn plan_is_deterministic_per_seed() {
        let data = toy(20, 10);
        assert_eq!(CvPlan::new(&data, 5, &[1], 4).unwrap(), CvPlan::new(&data, 5, &[1], 4).unwrap());
        assert_ne!(CvPlan::new(&data, 5, &[1], 4).unwrap(), CvPlan::new(&data, 5, &[1], 5).unwrap());
    }

    #[test]
    fn rejects_bad_fold_counts() {
        let data = ResponseData::new(Array2::zeros((2, 2)), ndarray::array![[true, false], [false, true]]).unwrap();
        assert!(CvPlan::new(&data, 1, &[1], 0).is_err());
        assert!(CvPlan::new(&data, 3, &[1], 0).is_err());
        assert!(CvPlan::new(&data, 2, &[1], 0).is_ok());
        assert!(CvPlan::new(&data, 2, &[], 0).is_err());
    }

    #[test]
    fn constant_predictor_gives_quarter_per_cell() {
        let data = toy(30, 10);
        let plan = CvPlan::new(&data, 5, &[1, 2, 3], 1).unwrap();
        let template = FitConfig { max_iters: 0, init: InitStrategy::Zero, ..FitConfig::new(1) };
        let report = cv_error(&data, LinkFunction::Logit, &template, &plan).unwrap();
        for e in &report.per_k {
            assert_eq!(e.total, 0.25 * data.n_observed() as f64);
            assert_eq!(e.total, e.fold_errors.iter().sum::<f64>());
        }
        assert_eq!(report.selected_k, 1);
    }

    #[test]
    fn held_out_responses_do_not_affect_fits() {
        let truth = generate(&SimConfig::new(12, 5.0, 2, 3)).unwrap();
        let data = truth.data;
        let plan = CvPlan::new(&data, 3, &[2], 2).unwrap();
        let mut flipped = data.responses().clone();
        for (i, j) in plan.fold_cells(0) {
            flipped[[i, j]] = 1 - flipped[[i, j]];
        }
        let perturbed = ResponseData::complete(flipped).unwrap();
        let template = FitConfig::new(2);
        let a = fit_fold(&data, LinkFunction::Logit, &template, &plan, 2, 0).unwrap();
        let b = fit_fold(&perturbed, LinkFunction::Logit, &template, &plan, 2, 0).unwrap();
        assert_eq!(a.params, b.params);
        let ra = cv_error(&data, LinkFunction::Logit, &template, &plan).unwrap();
        let rb = cv_error(&perturbed, LinkFunction::Logit, &template, &plan).unwrap();
        // only the error term of fold 0 sees the flipped cells
        let fold0 = plan.fold_cells(0);
        let expected: f64 = fold0
            .iter()
            .map(|&(i, j)| (f64::from(perturbed.response(i, j)) - LinkFunction::Logit.prob(a.params.linear_predictor(i, j))).powi(2))
            .sum();
        assert!((rb.per_k[0].fold_errors[0] - expected).abs() < 1e-9);
        assert_ne!(ra.per_k[0].fold_errors[0], rb.per_k[0].fold_errors[0]);
    }

    #[test]
    fn report_independent_of_worker_count() {
        let data = generate(&SimConfig::new(15, 4.0, 2, 5)).unwrap().data;
        let plan = CvPlan::new(&data, 3, &[1, 2], 6).unwrap();
        let one = cv_error(&data, LinkFunction::Logit, &FitConfig { threads: 1, ..FitConfig::new(1) }, &plan).unwrap();
        let four = cv_error(&data, LinkFunction::Logit, &FitConfig { threads: 4, ..FitConfig::new(1) }, &plan).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn ties_go_to_the_smaller_k() {
        let data = toy(20, 10);
        let plan = CvPlan::new(&data, 2, &[3, 1, 2, 2], 0).unwrap();
        assert_eq!(plan.candidate_ks(), &[1, 2, 3]);
        let template = FitConfig { max_iters: 0, init: InitStrategy::Zero, ..FitConfig::new(1) };
        assert_eq!(cv_error(&data, LinkFunction::Logit, &template, &plan).unwrap().selected_k, 1);
    }

    #[test]
    fn log_loss_of_constant_predictor() {
        let data = toy(20, 10);
        let plan = CvPlan::new(&data, 4, &[1], 0).unwrap();
        let template = FitConfig { max_iters: 0, init: InitStrategy::Zero, ..FitConfig::new(1) };
        let report = cv_error_with(&data, LinkFunction::Logit, &template, &plan, CvCriterion::LogLoss).unwrap();
        assert!((report.per_k[0].total - 200.0 * 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn sparse_folds_warn_but_fit() {
        let mut mask = Array2::from_elem((10, 6), true);
        for j in 1..6 {
            mask[[0, j]] = false;
        }
        let data = ResponseData::new(toy(10, 6).responses().clone(), mask).unwrap();
        let plan = CvPlan::new(&data, 2, &[1], 0).unwrap();
        let report = cv_error(&data, LinkFunction::Logit, &FitConfig::new(1), &plan).unwrap();
        assert!(!report.warnings.is_empty());
    }

    #[test]
    fn rejects_plan_from_other_data() {
        let plan = CvPlan::new(&toy(10, 6), 2, &[1], 0).unwrap();
        assert!(cv_error(&toy(12, 6), LinkFunction::Logit, &FitConfig::new(1), &plan).is_err());
    }
}
