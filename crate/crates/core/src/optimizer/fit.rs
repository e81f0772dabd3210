use std::time::Instant;

use super::config::{FitConfig, FitDiagnostics, FitReport, InitStrategy};
use super::init::{initialize, project_feasible};
use super::steps::{update_items, update_persons, HalfStep};
use crate::error::{Error, Result};
use crate::model::{total_nll, LinkFunction, ParameterSet, ResponseData};

/// State handed to a fit observer after every completed iteration.
#[derive(Debug)]
pub struct IterationState<'a> {
    pub iteration: usize,
    pub nll: f64,
    pub params: &'a ParameterSet,
    pub persons: &'a HalfStep,
    pub items: &'a HalfStep,
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the ambient
/// rayon pool when `threads == 0`.
pub(crate) fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::ThreadPool(e.to_string()))?;
    Ok(pool.install(f))
}

/// Alternating projected gradient descent for the constrained joint
/// maximum likelihood problem.
///
/// Each iteration updates all person rows with the items held fixed, then
/// all item rows with the new persons held fixed, until the relative change
/// of the objective falls below `config.tol` or `config.max_iters` is hit.
/// Without a `start`, the initial point comes from `config.init`. A start
/// outside the feasible set is projected onto it.
pub fn fit(data: &ResponseData, link: LinkFunction, config: &FitConfig, start: Option<ParameterSet>) -> Result<FitReport> {
    fit_with_observer(data, link, config, start, |_| {})
}

/// [`fit`], calling `observer` after every iteration.
pub fn fit_with_observer<F>(
    data: &ResponseData,
    link: LinkFunction,
    config: &FitConfig,
    start: Option<ParameterSet>,
    observer: F,
) -> Result<FitReport>
where
    F: FnMut(&IterationState<'_>) + Send,
{
    config.validate_for(data.n_persons(), data.n_items())?;
    if let Some(s) = &start {
        s.check_shape(data)?;
        if s.n_factors() != config.n_factors {
            return Err(Error::Shape(format!(
                "start has {} factors but config asks for {}",
                s.n_factors(),
                config.n_factors
            )));
        }
        if !s.is_finite() {
            return Err(Error::NonFinite("start parameters contain NaN or infinity".into()));
        }
    }
    in_pool(config.threads, || run(data, link, config, start, observer))?
}

fn run<F>(
    data: &ResponseData,
    link: LinkFunction,
    config: &FitConfig,
    start: Option<ParameterSet>,
    mut observer: F,
) -> Result<FitReport>
where
    F: FnMut(&IterationState<'_>),
{
    let clock = Instant::now();
    let radius = config.effective_radius();
    let mut params = match start {
        Some(s) if s.is_feasible(radius) => s,
        Some(s) => {
            log::warn!("start point is infeasible for C = {radius}; projecting it");
            project_feasible(s, config)
        }
        None => match config.init {
            InitStrategy::Spectral => initialize(data, config)?,
            InitStrategy::Zero => ParameterSet::zeros(data.n_persons(), data.n_items(), config.n_factors),
        },
    };

    let mut previous = total_nll(data, &params, link);
    if !previous.is_finite() {
        return Err(Error::Diverged { iteration: 0, value: previous });
    }
    let mut trace = vec![previous];
    let mut diagnostics = FitDiagnostics::default();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iters {
        iterations += 1;
        let persons = update_persons(data, &mut params, link, config);
        let items = update_items(data, &mut params, link, config);
        diagnostics.exhausted_person_steps += persons.exhausted();
        diagnostics.exhausted_item_steps += items.exhausted();
        diagnostics.zero_gradient_rows += persons.zero_gradient() + items.zero_gradient();

        let nll = total_nll(data, &params, link);
        if !nll.is_finite() {
            return Err(Error::Diverged { iteration: iterations, value: nll });
        }
        trace.push(nll);
        observer(&IterationState { iteration: iterations, nll, params: &params, persons: &persons, items: &items });

        if (nll - previous).abs() / (1.0 + previous.abs()) < config.tol {
            converged = true;
            break;
        }
        previous = nll;
    }

    log::debug!(
        "fit finished after {iterations} iterations (converged: {converged}, nll {:.6})",
        trace.last().copied().unwrap_or(f64::NAN)
    );
    Ok(FitReport {
        params,
        nll_trace: trace,
        iterations,
        converged,
        wall_time: clock.elapsed().as_secs_f64(),
        diagnostics,
    })
}
