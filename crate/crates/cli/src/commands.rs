use std::fs::File;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use log::{info, warn};
use nndm::classifier::{brier_score, fit_classifier, roc_auc, threshold_metrics, ClassifierOptions};
use nndm::evaluation::{coverage_experiment, k_sweep, l1_error, TestDensity};
use nndm::model_io::{load_model, to_json_string};
use nndm::sampling::draw_values_on_grid;
use nndm::{Dataset, Delta0Choice, FitOptions, FittedModel};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{
    AlphaArg, BenchCmd, ClassifyCmd, CoverageCmd, CvCmd, Delta0Arg, DensityCmd, FitCmd, GridArgs, KSweepCmd,
    SampleCmd,
};
use crate::io::{csv_with_echo, fmt_f64, json_bytes, read_table, split_labels, with_extension, Staged};

/// Configuration echo embedded in every artifact: the parsed arguments plus
/// values resolved at run time.
fn echo<T: Serialize>(command: &str, args: &T, resolved: Value) -> Result<Value> {
    Ok(json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "threads": rayon::current_num_threads(),
        "args": serde_json::to_value(args)?,
        "resolved": resolved,
    }))
}

fn fit_summary(model: &FittedModel) -> Value {
    let h = model.hyper();
    json!({
        "n": model.n(),
        "p": model.p(),
        "k": h.k(),
        "delta0sq": h.delta0sq(),
        "delta0_source": model.provenance().delta0,
        "alpha": h.alpha(),
        "alpha_source": model.provenance().alpha,
        "mu0": h.mu0(),
        "nu0": h.nu0(),
        "gamma0": h.gamma0(),
        "seed": model.provenance().seed,
    })
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    read_table(path)?.to_dataset(path)
}

fn load(path: &Path) -> Result<FittedModel> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    load_model(std::io::BufReader::new(file)).with_context(|| format!("{}", path.display()))
}

fn options(args: &crate::args::FitArgs, delta0: Delta0Arg, alpha: AlphaArg) -> Result<FitOptions> {
    args.options(delta0, alpha).map_err(|e| anyhow!(e))
}

pub fn fit(cmd: &FitCmd) -> Result<()> {
    let data = read_dataset(&cmd.input)?;
    let model = nndm::fit(&data, &options(&cmd.fit, Delta0Arg::Default, AlphaArg::Default)?)?;
    info!("fitted n = {}, p = {}, k = {}", model.n(), model.p(), model.hyper().k());
    let report = json!({
        "config": echo("fit", cmd, fit_summary(&model))?,
        "result": { "cv": model.cv() },
    });
    let mut out = Staged::default();
    out.add(&cmd.model, to_json_string(&model).as_bytes())?;
    out.add(&cmd.report, &json_bytes(&report)?)?;
    out.commit()
}

struct Grid {
    names: Vec<String>,
    points: Vec<Vec<f64>>,
    summary: Value,
}

fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|i| if i + 1 == steps { hi } else { lo + (hi - lo) * i as f64 / (steps - 1) as f64 })
        .collect()
}

/// Grid from a CSV file, from explicit bounds, or spanning the data range
/// widened by three sample standard deviations on each side.
fn resolve_grid(args: &GridArgs, p: usize) -> Result<Grid> {
    if let Some(path) = &args.grid {
        let table = read_table(path)?;
        if table.width() != p {
            bail!("{}: grid has {} columns but the model has p = {}", path.display(), table.width(), p);
        }
        let names = table
            .header
            .clone()
            .unwrap_or_else(|| (1..=p).map(|j| format!("x{j}")).collect());
        return Ok(Grid {
            names,
            summary: json!({ "file": path, "points": table.rows.len() }),
            points: table.rows,
        });
    }
    let Some(auto) = args.grid_auto else {
        bail!("one of --grid or --grid-auto is required");
    };
    if p != 1 {
        bail!("--grid-auto needs a univariate model, this one has p = {p}; pass --grid");
    }
    let (lo, hi) = match (auto.lo, auto.hi) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => {
            let path = args
                .input
                .as_ref()
                .ok_or_else(|| anyhow!("--grid-auto without bounds needs --input for the data range"))?;
            let data = read_dataset(path)?;
            if data.p() != 1 {
                bail!("{}: expected one column, found {}", path.display(), data.p());
            }
            let v = data.values();
            let min = v.iter().copied().fold(f64::INFINITY, f64::min);
            let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sd = data.sample_covariance()?[0].sqrt();
            (min - 3.0 * sd, max + 3.0 * sd)
        }
    };
    Ok(Grid {
        names: vec!["x1".into()],
        points: linspace(lo, hi, auto.steps).into_iter().map(|x| vec![x]).collect(),
        summary: json!({ "lo": lo, "hi": hi, "steps": auto.steps }),
    })
}

pub fn density(cmd: &DensityCmd) -> Result<()> {
    let model = load(&cmd.model)?;
    let grid = resolve_grid(&cmd.grid, model.p())?;
    let seed = cmd.seed.unwrap_or(model.provenance().seed);
    let rows = model.density_on_grid(&grid.points, cmd.draws, cmd.level, seed)?;
    let mut header = grid.names.clone();
    header.push("mean".into());
    if cmd.draws > 0 {
        header.extend(["lo".into(), "hi".into()]);
    }
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut line: Vec<String> = r.x.iter().map(|v| fmt_f64(*v)).collect();
            line.push(fmt_f64(r.mean));
            line.extend(r.lo.into_iter().chain(r.hi).map(fmt_f64));
            line
        })
        .collect();
    let config = echo("density", cmd, json!({ "seed": seed, "grid": grid.summary, "model": fit_summary(&model) }))?;
    let mut out = Staged::default();
    out.add(&cmd.output, &csv_with_echo(&config, &header, &body)?)?;
    out.commit()
}

pub fn sample(cmd: &SampleCmd) -> Result<()> {
    if cmd.draws == 0 {
        bail!("--draws must be at least 1");
    }
    let model = load(&cmd.model)?;
    let grid = resolve_grid(&cmd.grid, model.p())?;
    let seed = cmd.seed.unwrap_or(model.provenance().seed);
    let values = draw_values_on_grid(&model, &grid.points, cmd.draws, seed)?;
    let mut header = vec!["draw".to_string()];
    header.extend(grid.names.iter().cloned());
    header.push("density".into());
    let mut body = Vec::with_capacity(cmd.draws * grid.points.len());
    for (t, draw) in values.iter().enumerate() {
        for (x, f) in grid.points.iter().zip(draw) {
            let mut line = vec![(t + 1).to_string()];
            line.extend(x.iter().map(|v| fmt_f64(*v)));
            line.push(fmt_f64(*f));
            body.push(line);
        }
    }
    let config = echo("sample", cmd, json!({ "seed": seed, "grid": grid.summary, "model": fit_summary(&model) }))?;
    let mut out = Staged::default();
    out.add(&cmd.output, &csv_with_echo(&config, &header, &body)?)?;
    out.commit()
}

pub fn cv(cmd: &CvCmd) -> Result<()> {
    let data = read_dataset(&cmd.input)?;
    let grid = match cmd.cv_grid {
        Some(r) => Some(nndm::hyper::log_spaced_grid(r.lo, r.hi, r.steps)?),
        None => None,
    };
    let options = FitOptions {
        k: cmd.k,
        delta0: Delta0Choice::Cv(grid),
        nu0: cmd.nu0,
        gamma0: cmd.gamma0,
        ..Default::default()
    };
    let model = nndm::fit(&data, &options)?;
    let result = model.cv().ok_or_else(|| anyhow!("cross-validation produced no result"))?;
    let config = echo("cv", cmd, fit_summary(&model))?;
    let body: Vec<Vec<String>> = result
        .grid
        .iter()
        .zip(&result.scores)
        .map(|(d, s)| vec![fmt_f64(*d), fmt_f64(*s)])
        .collect();
    let mut out = Staged::default();
    out.add(
        &with_extension(&cmd.output, "json"),
        &json_bytes(&json!({ "config": config, "result": result }))?,
    )?;
    out.add(
        &with_extension(&cmd.output, "csv"),
        &csv_with_echo(&config, &["delta0sq".into(), "score".into()], &body)?,
    )?;
    out.commit()
}

pub fn classify(cmd: &ClassifyCmd) -> Result<()> {
    let (x_train, y_train) = split_labels(&read_table(&cmd.train)?, cmd.label.as_deref(), &cmd.train)?;
    let (x_test, y_test) = split_labels(&read_table(&cmd.test)?, cmd.label.as_deref(), &cmd.test)?;
    if x_test.p() != x_train.p() {
        bail!(
            "{} has {} features but {} has {}",
            cmd.test.display(),
            x_test.p(),
            cmd.train.display(),
            x_train.p()
        );
    }
    let opts = ClassifierOptions {
        fit: options(&cmd.fit, Delta0Arg::Default, AlphaArg::Default)?,
        priors: cmd.priors.map(|p| (p.0, p.1)),
        standardize: cmd.standardize,
    };
    let model = fit_classifier(&x_train, &y_train, &opts)?;
    let points: Vec<Vec<f64>> = x_test.rows().map(<[f64]>::to_vec).collect();
    let predictions = model.predict_mean_batch(&points)?;
    let probs: Vec<f64> = predictions.iter().map(|q| q.prob).collect();
    let draws = if cmd.draws > 0 {
        model.predict_draws(&points, cmd.draws, cmd.fit.seed)?
    } else {
        Vec::new()
    };
    let at_half = threshold_metrics(&probs, &y_test, 0.5)?;
    let roc = roc_auc(&probs, &y_test)?;
    let (brier, brier_from) = if draws.is_empty() {
        (brier_score(std::slice::from_ref(&probs), &y_test)?, "mean")
    } else {
        (brier_score(&draws, &y_test)?, "draws")
    };
    let extrapolated = predictions.iter().filter(|q| q.extrapolated).count();
    if extrapolated > 0 {
        warn!("{extrapolated} test points lie outside both class supports; their probability is the class-1 prior");
    }

    let mut header: Vec<String> = ["row", "label", "prob", "extrapolated"].map(String::from).to_vec();
    header.extend((1..=draws.len()).map(|t| format!("draw_{t}")));
    let body: Vec<Vec<String>> = predictions
        .iter()
        .enumerate()
        .map(|(j, q)| {
            let mut line = vec![
                (j + 1).to_string(),
                y_test[j].to_string(),
                fmt_f64(q.prob),
                u8::from(q.extrapolated).to_string(),
            ];
            line.extend(draws.iter().map(|d| fmt_f64(d[j])));
            line
        })
        .collect();
    let resolved = json!({
        "priors": model.priors(),
        "prior_source": model.prior_source(),
        "standardization": model.standardization(),
        "class_models": [fit_summary(model.class_model(0)), fit_summary(model.class_model(1))],
    });
    let config = echo("classify", cmd, resolved)?;
    let metrics = json!({
        "config": config,
        "result": {
            "n_train": x_train.n(),
            "n_test": x_test.n(),
            "p": x_train.p(),
            "threshold": 0.5,
            "sensitivity": at_half.sensitivity,
            "specificity": at_half.specificity,
            "accuracy": at_half.accuracy,
            "auc": roc.auc,
            "brier_mean": brier.mean,
            "brier_from": brier_from,
            "extrapolated": extrapolated,
        },
    });
    let mut out = Staged::default();
    out.add(&cmd.predictions, &csv_with_echo(&config, &header, &body)?)?;
    out.add(&cmd.metrics, &json_bytes(&metrics)?)?;
    out.commit()
}

fn replicate_cell(value: Option<f64>) -> String {
    value.map(fmt_f64).unwrap_or_default()
}

pub fn bench(cmd: &BenchCmd) -> Result<()> {
    let density = TestDensity::by_name(&cmd.density, cmd.p)?;
    let opts = options(&cmd.fit, Delta0Arg::Cv, AlphaArg::Default)?;
    let report = l1_error(&density, &opts, cmd.n, cmd.nt, cmd.reps, cmd.fit.seed)?;
    if report.failures > 0 {
        warn!("{} of {} replicates failed", report.failures, report.reps);
    }
    info!("mean L1 = {} (se {})", report.mean, report.std_error);
    let config = echo("bench", cmd, json!({ "density": density_name(&density) }))?;
    let body: Vec<Vec<String>> = report
        .replicates
        .iter()
        .map(|r| vec![r.replicate.to_string(), replicate_cell(r.value), r.error.clone().unwrap_or_default()])
        .collect();
    let mut out = Staged::default();
    out.add(
        &with_extension(&cmd.output, "json"),
        &json_bytes(&json!({ "config": config, "result": report }))?,
    )?;
    out.add(
        &with_extension(&cmd.output, "csv"),
        &csv_with_echo(&config, &["replicate".into(), "l1".into(), "error".into()], &body)?,
    )?;
    out.commit()
}

fn density_name(density: &TestDensity) -> String {
    use nndm::evaluation::TargetDensity;
    density.name()
}

pub fn coverage(cmd: &CoverageCmd) -> Result<()> {
    let density = TestDensity::by_name(&cmd.density, cmd.p)?;
    let opts = options(&cmd.fit, Delta0Arg::Cv, AlphaArg::Auto)?;
    let report = coverage_experiment(&density, &opts, cmd.n, cmd.nt, cmd.reps, cmd.draws, cmd.level, cmd.fit.seed)?;
    if report.failures > 0 {
        warn!("{} of {} replicates failed", report.failures, report.reps);
    }
    let config = echo("coverage", cmd, json!({ "density": density_name(&density) }))?;
    let body: Vec<Vec<String>> = report
        .coverage_by_replicate
        .iter()
        .zip(&report.length_by_replicate)
        .map(|(r, len)| {
            vec![
                r.replicate.to_string(),
                replicate_cell(r.value),
                replicate_cell(*len),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    let mut out = Staged::default();
    out.add(
        &with_extension(&cmd.output, "json"),
        &json_bytes(&json!({ "config": config, "result": report }))?,
    )?;
    out.add(
        &with_extension(&cmd.output, "csv"),
        &csv_with_echo(
            &config,
            &["replicate".into(), "coverage".into(), "mean_length".into(), "error".into()],
            &body,
        )?,
    )?;
    out.commit()
}

pub fn k_sweep_cmd(cmd: &KSweepCmd) -> Result<()> {
    if cmd.fit.k.is_some() {
        bail!("k-sweep takes neighborhood sizes from --ks, not --k");
    }
    let density = TestDensity::by_name(&cmd.density, cmd.p)?;
    let opts = options(&cmd.fit, Delta0Arg::Cv, AlphaArg::Default)?;
    let rows = k_sweep(&density, &opts, cmd.n, cmd.nt, &cmd.ks, cmd.reps, cmd.fit.seed)?;
    let config = echo("k-sweep", cmd, json!({ "density": density_name(&density) }))?;
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let failures = r.replicates.iter().filter(|o| o.value.is_none()).count();
            vec![r.k.to_string(), fmt_f64(r.mean_oosll), fmt_f64(r.std_error), failures.to_string()]
        })
        .collect();
    let mut out = Staged::default();
    out.add(
        &with_extension(&cmd.output, "json"),
        &json_bytes(&json!({ "config": config, "result": rows }))?,
    )?;
    out.add(
        &with_extension(&cmd.output, "csv"),
        &csv_with_echo(
            &config,
            &["k".into(), "mean_oosll".into(), "std_error".into(), "failures".into()],
            &body,
        )?,
    )?;
    out.commit()
}
