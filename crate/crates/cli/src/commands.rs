use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cjmle::crossval::{cv_error_with, CvPlan};
use cjmle::identify::{
    check_identification, probability_loss, probability_recovery_error, procrustes_align, standardize,
};
use cjmle::simulate::{generate, SimConfig};
use cjmle::{FitConfig, ParameterSet};
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::io::{self, default_ids, parse_responses, read_bytes, Dataset, Table};
use crate::manifest::{FileDigest, RunManifest};
use crate::{CvArgs, EvaluateArgs, FitArgs, SimulateArgs, SolverArgs};

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random();
        log::info!("no --seed given; using {s}");
        s
    })
}

fn solver_config(solver: &SolverArgs, k: usize, seed: u64) -> FitConfig {
    FitConfig {
        radius: solver.c_radius,
        max_iters: solver.max_iters,
        tol: solver.tol,
        threads: solver.threads,
        seed,
        init: solver.init,
        ..FitConfig::new(k)
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn load_dataset(path: &Path) -> CliResult<(Dataset, FileDigest)> {
    let bytes = read_bytes(path)?;
    let dataset = parse_responses(&bytes, &path.display().to_string())?;
    Ok((dataset, FileDigest::of_bytes(path, &bytes)))
}

fn to_json<T: serde::Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("plain data serializes")
}

pub fn fit(args: FitArgs) -> CliResult<()> {
    let clock = Instant::now();
    let (dataset, digest) = load_dataset(&args.input)?;
    let data = &dataset.data;
    let seed = resolve_seed(args.solver.seed);
    let mut config = solver_config(&args.solver, args.k, seed);
    config.radius = Some(config.effective_radius());
    let link = args.solver.link;

    let report = cjmle::fit(data, link, &config, None)?;
    let params = if args.standardize { standardize(&report.params)?.into_params() } else { report.params.clone() };

    create_dir(&args.out)?;
    let mut outputs = io::write_params(&args.out, "", &params, &dataset.person_ids, &dataset.item_ids)?;
    let trace = Table {
        row_ids: (0..report.nll_trace.len()).map(|t| t.to_string()).collect(),
        columns: vec!["nll".into()],
        values: ndarray::Array2::from_shape_vec((report.nll_trace.len(), 1), report.nll_trace.clone())
            .expect("one column"),
    };
    io::write_table(&args.out.join("nll_trace.csv"), "iteration", &trace)?;
    outputs.push("nll_trace.csv".into());

    let mut manifest = RunManifest::new(
        "fit",
        Some(seed),
        json!({
            "input": args.input.display().to_string(),
            "link": link,
            "standardize": args.standardize,
            "allow_nonconverged": args.allow_nonconverged,
            "fit": to_json(&config),
        }),
    );
    manifest.inputs.push(digest);
    manifest.add_outputs(&args.out, &outputs)?;
    manifest.results = json!({
        "n_persons": data.n_persons(),
        "n_items": data.n_items(),
        "n_observed": data.n_observed(),
        "iterations": report.iterations,
        "converged": report.converged,
        "final_nll": report.final_nll(),
        "fit_seconds": report.wall_time,
        "diagnostics": to_json(&report.diagnostics),
    });
    manifest.wall_time_seconds = clock.elapsed().as_secs_f64();
    manifest.write(&args.out)?;

    if !report.converged && !args.allow_nonconverged {
        return Err(CliError::NotConverged { iterations: report.iterations });
    }
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> CliResult<()> {
    let clock = Instant::now();
    let seed = resolve_seed(args.seed);
    let config = SimConfig {
        n_items: args.j,
        person_ratio: args.tau,
        n_factors: args.k,
        theta_law: args.theta_law,
        missing_rate: args.missing_rate,
        link: args.link,
        seed,
    };
    let truth = generate(&config)?;

    create_dir(&args.out)?;
    let dataset = Dataset {
        person_ids: default_ids("p", truth.data.n_persons()),
        item_ids: default_ids("i", truth.data.n_items()),
        data: truth.data,
    };
    io::write_responses(&args.out.join("responses.csv"), &dataset)?;
    let mut outputs = vec!["responses.csv".to_owned()];
    outputs.extend(io::write_params(&args.out, "truth_", &truth.params_star, &dataset.person_ids, &dataset.item_ids)?);

    let mut manifest = RunManifest::new("simulate", Some(seed), to_json(&config));
    manifest.add_outputs(&args.out, &outputs)?;
    manifest.results = json!({
        "n_persons": dataset.data.n_persons(),
        "n_items": dataset.data.n_items(),
        "n_observed": dataset.data.n_observed(),
        "expected_observed": truth.mask_expected_count,
    });
    manifest.wall_time_seconds = clock.elapsed().as_secs_f64();
    manifest.write(&args.out)
}

pub fn cv(args: CvArgs) -> CliResult<()> {
    let clock = Instant::now();
    let (dataset, digest) = load_dataset(&args.input)?;
    let data = &dataset.data;
    let seed = resolve_seed(args.solver.seed);
    let template = solver_config(&args.solver, args.ks[0], seed);
    let plan = CvPlan::new(data, args.folds, &args.ks, seed)?;
    let report = cv_error_with(data, args.solver.link, &template, &plan, args.criterion)?;

    create_dir(&args.out)?;
    let mut columns: Vec<String> = (1..=plan.folds()).map(|b| format!("fold_{b}")).collect();
    columns.push("total".into());
    let values = ndarray::Array2::from_shape_fn((report.per_k.len(), plan.folds() + 1), |(r, c)| {
        let entry = &report.per_k[r];
        entry.fold_errors.get(c).copied().unwrap_or(entry.total)
    });
    let table = Table { row_ids: report.per_k.iter().map(|e| e.k.to_string()).collect(), columns, values };
    io::write_table(&args.out.join("cv_errors.csv"), "k", &table)?;

    let mut manifest = RunManifest::new(
        "cv",
        Some(seed),
        json!({
            "input": args.input.display().to_string(),
            "link": args.solver.link,
            "folds": plan.folds(),
            "candidate_ks": plan.candidate_ks(),
            "criterion": args.criterion,
            // C = 5√K per candidate unless fixed
            "c_radius": args.solver.c_radius,
            "fit_template": to_json(&template),
        }),
    );
    manifest.inputs.push(digest);
    manifest.add_outputs(&args.out, &["cv_errors.csv".to_owned()])?;
    manifest.results = json!({
        "selected_k": report.selected_k,
        "totals": report.per_k.iter().map(|e| (e.k.to_string(), json!(e.total))).collect::<serde_json::Map<_, _>>(),
        "fold_sizes": plan.fold_sizes(),
        "n_observed": data.n_observed(),
        "warnings": report.warnings,
    });
    manifest.wall_time_seconds = clock.elapsed().as_secs_f64();
    manifest.write(&args.out)?;
    println!("selected K = {}", report.selected_k);
    Ok(())
}

/// The three parameter files in `dir`, trying each prefix in turn.
fn param_files(dir: &Path, prefixes: &[&str]) -> CliResult<[PathBuf; 3]> {
    for prefix in prefixes {
        let files = ["theta", "loadings", "intercepts"].map(|n| dir.join(format!("{prefix}{n}.csv")));
        if files.iter().all(|f| f.is_file()) {
            return Ok(files);
        }
    }
    Err(CliError::input(format!(
        "{}: no complete set of theta/loadings/intercepts CSV files",
        dir.display()
    )))
}

fn check_dims(est: &ParameterSet, truth: &ParameterSet) -> CliResult<()> {
    let dims = |p: &ParameterSet| (p.n_persons(), p.n_items(), p.n_factors());
    let (e, t) = (dims(est), dims(truth));
    if e != t {
        return Err(CliError::input(format!(
            "estimate has N = {}, J = {}, K = {} but truth has N = {}, J = {}, K = {}",
            e.0, e.1, e.2, t.0, t.1, t.2
        )));
    }
    Ok(())
}

pub fn evaluate(args: EvaluateArgs) -> CliResult<()> {
    let clock = Instant::now();
    let est_files = param_files(&args.estimate, &["", "truth_"])?;
    let truth_files = param_files(&args.truth, &["truth_", ""])?;
    let est = io::read_params(&est_files[0], &est_files[1], &est_files[2])?;
    let truth = io::read_params(&truth_files[0], &truth_files[1], &truth_files[2])?;
    check_dims(&est, &truth)?;

    let alignment = procrustes_align(&truth.loadings, &est.loadings)?;
    let rotation: Vec<Vec<f64>> = alignment.rotation.rows().into_iter().map(|r| r.to_vec()).collect();
    let sigma = match check_identification(&est.loadings) {
        Ok(v) => Some(v),
        Err(e) => {
            log::warn!("identification check failed: {e}");
            None
        }
    };
    let metrics = json!({
        "probability_loss": probability_loss(&est, &truth)?,
        "probability_recovery_error": probability_recovery_error(&est, &truth, args.link)?,
        "procrustes": { "loss": alignment.loss, "rotation": rotation },
        "sigma_k_over_sqrt_j": sigma,
        "n_persons": est.n_persons(),
        "n_items": est.n_items(),
        "n_factors": est.n_factors(),
    });

    create_dir(&args.out)?;
    let text = serde_json::to_string_pretty(&metrics).map_err(|e| CliError::Other(e.to_string()))?;
    io::write_text(&args.out.join("metrics.json"), &(text + "\n"))?;

    let mut manifest = RunManifest::new(
        "evaluate",
        None,
        json!({
            "estimate": args.estimate.display().to_string(),
            "truth": args.truth.display().to_string(),
            "link": args.link,
        }),
    );
    for f in est_files.iter().chain(&truth_files) {
        manifest.inputs.push(FileDigest::of_file(f)?);
    }
    manifest.add_outputs(&args.out, &["metrics.json".to_owned()])?;
    manifest.results = metrics;
    manifest.wall_time_seconds = clock.elapsed().as_secs_f64();
    manifest.write(&args.out)
}
