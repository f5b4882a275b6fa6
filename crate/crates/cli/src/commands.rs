use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::sync::atomic::{AtomicBool, Ordering};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use alphareg::ingestion::{format_number, write_csv, write_dataset};
use alphareg::selection::{default_alpha_grid, default_bandwidth_grid, default_k_grid, SCHEMA_VERSION};
use alphareg::{
    csv_header, frechet_path, generate, js_divergence, kl_divergence, load_csv, load_predictors, load_responses,
    run_bench, tune, Alpha, Axis, BenchScenario, CompositionMatrix, Dataset, DatasetSchema, Family, Kernel,
    KldModel, KldOptions, Link, LogRatio, LogRatioOlsModel, Metric, ModelSpec, PredictorMatrix,
    Scoring, SimSpec, Standardization, TuningGrid,
};
use serde_json::{json, Value};

use crate::args::*;
use crate::CliError;

type Res<T> = Result<T, CliError>;

pub fn run(cmd: Command) -> Res<()> {
    match cmd {
        Command::Tune(a) => cmd_tune(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::FrechetPath(a) => cmd_frechet_path(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Validate(a) => cmd_validate(a),
    }
}

fn kernel(k: KernelArg) -> Kernel {
    match k {
        KernelArg::Gaussian => Kernel::Gaussian,
        KernelArg::Exponential => Kernel::Exponential,
        KernelArg::Laplacian => Kernel::Laplacian,
    }
}

fn model_name(m: ModelKind) -> &'static str {
    match m {
        ModelKind::Aknn => "aknn",
        ModelKind::Akernel => "akernel",
        ModelKind::Kld => "kld",
        ModelKind::Ols => "ols",
    }
}

/// Parses `a,b,c` or `start:stop:step` (inclusive of `stop` up to rounding).
fn parse_reals(flag: &str, s: &str) -> Res<Vec<f64>> {
    let bad = || CliError::usage(format!("{flag}: cannot parse '{s}'"));
    let out = if s.contains(':') {
        let parts: Vec<f64> = s.split(':').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Res<_>>()?;
        let [start, stop, step] = parts[..] else { return Err(bad()) };
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect()
    } else {
        s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Res<Vec<f64>>>()?
    };
    if out.is_empty() || out.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(out)
}

fn parse_counts(flag: &str, s: &str) -> Res<Vec<usize>> {
    let vals = parse_reals(flag, s)?;
    vals.iter()
        .map(|&v| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(CliError::usage(format!("{flag}: '{v}' is not a positive integer")))
            }
        })
        .collect()
}

fn alphas(flag: &str, s: &str) -> Res<Vec<Alpha<f64>>> {
    parse_reals(flag, s)?
        .into_iter()
        .map(|a| Alpha::new(a).map_err(|e| CliError::usage(format!("{flag}: {e}"))))
        .collect()
}

fn schema(d: &DataArgs) -> Res<DatasetSchema> {
    let s = DatasetSchema::new(d.response_cols.clone(), d.predictor_cols.clone());
    match d.geo_cols.as_slice() {
        [] => Ok(s),
        [lat, lon] => Ok(s.with_geo(lat.clone(), lon.clone())),
        _ => Err(CliError::usage("--geo-cols takes exactly two columns: latitude,longitude")),
    }
}

fn load(d: &DataArgs) -> Res<(Dataset<f64>, Option<Standardization>)> {
    let s = schema(d)?;
    s.validate(true)?;
    let mut data = load_csv::<f64>(&d.input, &s)?;
    let st = if d.standardize {
        let (x, st) = alphareg::standardize(&data.x)?;
        data.x = x;
        Some(st)
    } else {
        None
    };
    Ok((data, st))
}

fn sink(output: Option<&Path>) -> Res<Box<dyn Write>> {
    Ok(match output {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::io(&p.display().to_string(), e))?)),
        None => Box::new(BufWriter::new(Stdout)),
    })
}

/// Set once stdout's reader has gone away (`alphareg ... | head`).
pub static STDOUT_CLOSED: AtomicBool = AtomicBool::new(false);

struct Stdout;

impl Write for Stdout {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        io::stdout().lock().write(buf).inspect_err(note_closed)
    }

    fn flush(&mut self) -> io::Result<()> {
        io::stdout().lock().flush().inspect_err(note_closed)
    }
}

fn note_closed(e: &io::Error) {
    if e.kind() == io::ErrorKind::BrokenPipe {
        STDOUT_CLOSED.store(true, Ordering::Relaxed);
    }
}

fn write_json(value: &impl serde::Serialize, output: Option<&Path>) -> Res<()> {
    let mut w = sink(output)?;
    serde_json::to_writer(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io("write", e))
}

fn cmd_tune(a: TuneArgs) -> Res<()> {
    let family = match a.model {
        ModelKind::Aknn => Family::AlphaKnn,
        ModelKind::Akernel => Family::AlphaKernel(kernel(a.kernel)),
        m => return Err(CliError::usage(format!("tune supports --model aknn or akernel, not {}", model_name(m)))),
    };
    if family == Family::AlphaKnn && a.h_grid.is_some() {
        return Err(CliError::usage("--h-grid applies to --model akernel"));
    }
    if family != Family::AlphaKnn && a.k_grid.is_some() {
        return Err(CliError::usage("--k-grid applies to --model aknn"));
    }
    let scoring = Scoring::new(
        match a.metric {
            MetricArg::Kl => Metric::Kl,
            MetricArg::Js => Metric::Js,
        },
        a.clamp,
    )?;
    if a.folds < 2 {
        return Err(CliError::usage("--folds must be >= 2"));
    }
    let alpha_grid = a.alpha_grid.as_deref().map(|s| alphas("--alpha-grid", s)).transpose()?;
    let k_grid = a.k_grid.as_deref().map(|s| parse_counts("--k-grid", s)).transpose()?;
    let h_grid = a.h_grid.as_deref().map(|s| parse_reals("--h-grid", s)).transpose()?;

    let (data, _) = load(&a.data)?;
    let alphas = alpha_grid.unwrap_or_else(|| default_alpha_grid(data.u.has_zeros()));
    let axis = match family {
        Family::AlphaKnn => Axis::K(k_grid.unwrap_or_else(default_k_grid)),
        Family::AlphaKernel(_) => Axis::H(match h_grid {
            Some(h) => h,
            None => default_bandwidth_grid(&data.x, a.seed)?,
        }),
    };
    let grid = TuningGrid::new(alphas, axis, a.folds, a.seed)?;
    let report = tune(&data.x, &data.u, family, &grid, scoring)?;
    write_json(&report, a.output.as_deref())?;
    let sel = &report.selected;
    let param = match (sel.k, sel.h) {
        (Some(k), _) => format!("k = {k}"),
        (_, Some(h)) => format!("h = {}", format_number(h)),
        _ => String::new(),
    };
    let summary = format!(
        "selected alpha = {}, {param}; cross-validated {} = {}",
        format_number(sel.alpha),
        if scoring.metric == Metric::Kl { "KL" } else { "JS" },
        format_number(sel.score)
    );
    if a.output.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

/// Builds the model specification from flags, rejecting flags that do not
/// belong to the chosen model.
fn model_spec(m: &ModelArgs) -> Res<ModelSpec<f64>> {
    let forbid = |set: bool, flag: &str| {
        if set {
            Err(CliError::usage(format!("{flag} does not apply to --model {}", model_name(m.model))))
        } else {
            Ok(())
        }
    };
    let need_alpha = || {
        m.alpha
            .ok_or_else(|| CliError::usage(format!("--model {} needs --alpha", model_name(m.model))))
            .and_then(|a| Alpha::new(a).map_err(|e| CliError::usage(format!("--alpha: {e}"))))
    };
    Ok(match m.model {
        ModelKind::Aknn => {
            forbid(m.h.is_some(), "--h")?;
            let k = m.k.ok_or_else(|| CliError::usage("--model aknn needs --k"))?;
            ModelSpec::AlphaKnn { alpha: need_alpha()?, k }
        }
        ModelKind::Akernel => {
            forbid(m.k.is_some(), "--k")?;
            let h = m.h.ok_or_else(|| CliError::usage("--model akernel needs --h"))?;
            ModelSpec::AlphaKernel { alpha: need_alpha()?, h, kernel: kernel(m.kernel) }
        }
        ModelKind::Kld | ModelKind::Ols => {
            forbid(m.alpha.is_some(), "--alpha")?;
            forbid(m.k.is_some(), "--k")?;
            forbid(m.h.is_some(), "--h")?;
            if m.model == ModelKind::Kld {
                ModelSpec::Kld(KldOptions::default())
            } else {
                ModelSpec::LogRatioOls(match m.log_ratio {
                    LogRatioArg::Alr => LogRatio::Alr,
                    LogRatioArg::Ilr => LogRatio::Ilr,
                })
            }
        }
    })
}

fn rows_of(coef: &[f64], width: usize) -> Vec<Vec<f64>> {
    coef.chunks(width).map(<[f64]>::to_vec).collect()
}

fn cmd_fit(a: FitArgs) -> Res<()> {
    let spec = model_spec(&a.model)?;
    let (data, st) = load(&a.data)?;
    let d = data.u.dim();
    let mut out = json!({
        "schema_version": SCHEMA_VERSION,
        "model": model_name(a.model.model),
        "training_input": a.data.input.display().to_string(),
        "rows": data.u.nrows(),
        "response_cols": data.response_names,
        "predictor_cols": data.x.names(),
        "standardization": st,
    });
    let extra = match spec {
        ModelSpec::AlphaKnn { alpha, k } => {
            spec.fit(Arc::new(data.x.clone()), Arc::new(data.u.clone()))?;
            json!({ "alpha": alpha.value(), "k": k })
        }
        ModelSpec::AlphaKernel { alpha, h, kernel } => {
            spec.fit(Arc::new(data.x.clone()), Arc::new(data.u.clone()))?;
            json!({ "alpha": alpha.value(), "h": h, "kernel": kernel })
        }
        ModelSpec::Kld(opts) => {
            let m = KldModel::fit(&data.x, &data.u, opts)?;
            json!({
                "coefficients": rows_of(m.coefficients(), d - 1),
                "iterations": m.iterations(),
                "objective_trace": m.objective_trace(),
                "ridge_damped": m.ridge_damped(),
            })
        }
        ModelSpec::LogRatioOls(t) => {
            let m = LogRatioOlsModel::fit(&data.x, &data.u, t)?;
            json!({ "log_ratio": t, "coefficients": rows_of(m.coefficients(), d - 1) })
        }
    };
    if let (Value::Object(o), Value::Object(e)) = (&mut out, extra) {
        o.extend(e);
    }
    write_json(&out, a.output.as_deref())
}

fn cmd_predict(a: PredictArgs) -> Res<()> {
    let spec = model_spec(&a.model)?;
    if !(a.clamp >= 0.0) || !a.clamp.is_finite() {
        return Err(CliError::usage("--clamp must be finite and >= 0"));
    }
    let (data, st) = load(&a.data)?;
    let (queries, truth): (PredictorMatrix<f64>, Option<CompositionMatrix<f64>>) = match &a.queries {
        None => (data.x.clone(), Some(data.u.clone())),
        Some(path) => {
            let header = csv_header(path, b',')?;
            let mut s = schema(&a.data)?;
            if !s.responses.iter().all(|c| header.contains(c)) {
                s.responses.clear();
            }
            let (x, u) = load_predictors::<f64>(path, &s)?;
            let x = match &st {
                Some(st) => st.apply(&x)?,
                None => x,
            };
            (x, u)
        }
    };
    let model = spec.fit(Arc::new(data.x), Arc::new(data.u))?;
    let pred = model.predict(&queries)?;
    let mut header = data.response_names.clone();
    let rows: Vec<Vec<f64>> = match &truth {
        Some(t) => {
            header.extend(["kl".to_string(), "js".to_string()]);
            pred.rows()
                .zip(t.rows())
                .map(|(p, y)| {
                    let mut r = p.to_vec();
                    r.push(kl_divergence(y, p, a.clamp)?);
                    r.push(js_divergence(y, p)?);
                    Ok(r)
                })
                .collect::<Res<_>>()?
        }
        None => pred.rows().map(<[f64]>::to_vec).collect(),
    };
    let w = sink(a.output.as_deref())?;
    write_csv(w, &header, &rows)?;
    Ok(())
}

fn truth_path(a: &SimulateArgs) -> Option<PathBuf> {
    a.truth.clone().or_else(|| {
        a.output.as_ref().map(|p| {
            let mut s = p.as_os_str().to_owned();
            s.push(".truth.json");
            PathBuf::from(s)
        })
    })
}

fn cmd_simulate(a: SimulateArgs) -> Res<()> {
    let mut spec = match a.link {
        LinkArg::Polynomial => SimSpec::polynomial(a.n, a.d, a.predictors, a.degree, a.seed),
        LinkArg::Segmented => {
            if a.predictors != 1 {
                return Err(CliError::usage("--link segmented takes one predictor"));
            }
            SimSpec::segmented(a.n, a.d, a.seed)
        }
    };
    if matches!(spec.link, Link::Segmented) && a.degree != 1 {
        return Err(CliError::usage("--degree applies to --link polynomial"));
    }
    spec.noise_sd = a.noise;
    spec.zero_fraction = a.zero_fraction;
    spec.validate()?;
    let data = generate::<f64>(&spec)?;
    let pnames: Vec<String> = (1..=spec.p).map(|j| format!("z{j}")).collect();
    let rnames: Vec<String> = (1..=spec.d).map(|j| format!("y{j}")).collect();
    let w = sink(a.output.as_deref())?;
    write_dataset(w, &data.x, &data.u, &pnames, &rnames)?;
    if let Some(p) = truth_path(&a) {
        let body = json!({
            "schema_version": SCHEMA_VERSION,
            "seed": a.seed,
            "degree": match spec.link { Link::Polynomial { degree } => Some(degree), Link::Segmented => None },
            "truth": data.truth,
        });
        write_json(&body, Some(&p))?;
    }
    Ok(())
}

fn cmd_frechet_path(a: PathArgs) -> Res<()> {
    let grid = alphas("--alpha-grid", &a.alpha_grid)?;
    let s = DatasetSchema::new(a.response_cols.clone(), Vec::new());
    let data = load_responses::<f64>(&a.input, &s)?;
    let u = if a.rows.is_empty() {
        data.u
    } else {
        if let Some(&r) = a.rows.iter().find(|&&r| r >= data.u.nrows()) {
            return Err(CliError::usage(format!("--rows: row {r} out of range ({} rows)", data.u.nrows())));
        }
        data.u.select(&a.rows)
    };
    let path = frechet_path(&u, &grid)?;
    let header: Vec<String> = std::iter::once("alpha".to_string()).chain(data.response_names).collect();
    let rows: Vec<Vec<f64>> = path
        .iter()
        .map(|(al, m)| std::iter::once(al.value()).chain(m.values().iter().copied()).collect())
        .collect();
    write_csv(sink(a.output.as_deref())?, &header, &rows)?;
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Res<()> {
    let s = BenchScenario {
        ns: a.n,
        ds: a.d,
        p: a.predictors,
        queries: a.query_rows,
        repeats: a.repeats,
        seed: a.seed,
        ..Default::default()
    };
    s.validate()?;
    let report = run_bench(&s)?;
    write_json(&report, a.output.as_deref())
}

fn cmd_validate(a: ValidateArgs) -> Res<()> {
    let s = DatasetSchema::new(a.response_cols.clone(), a.predictor_cols.clone());
    let data = if a.predictor_cols.is_empty() {
        load_responses::<f64>(&a.input, &s)?
    } else {
        load_csv::<f64>(&a.input, &s)?
    };
    let body = json!({
        "schema_version": SCHEMA_VERSION,
        "rows": data.u.nrows(),
        "components": data.u.dim(),
        "predictors": data.x.ncols(),
        "zeros": data.u.zero_report(),
    });
    write_json(&body, None)
}
