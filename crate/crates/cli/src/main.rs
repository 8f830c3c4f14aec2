//! `barfima` command-line front-end.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use barfima::diagnostics::diagnose;
use barfima::forecast::{forecast_with, write_forecast_csv};
use barfima::inference::{lr_test, z_statistics};
use barfima::io::{read_dataset, read_matrix, write_sample, DatasetOptions};
use barfima::mc::{run_design, McDesign};
use barfima::{
    fit, fit_nested, information_criteria, simulate, Error, FitOptions, FitResult, ForecastRequest,
    Link, ModelSpec, ParamVector, Sample, SimConfig,
};
use clap::{Args, Parser, Subcommand};

const LJUNG_BOX_LAGS: usize = 20;

#[derive(Parser)]
#[command(name = "barfima", version, about = "Beta ARFIMA modelling of series on (0,1)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and print the estimation report.
    Fit(FitArgs),
    /// Simulate a sample and write it as CSV.
    Simulate(SimulateArgs),
    /// Fit (or load) a model and forecast ahead.
    Forecast(ForecastArgs),
    /// Fit a model and report residual diagnostics.
    Diagnose(DiagnoseArgs),
    /// Run a Monte Carlo design file.
    Mc(McArgs),
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// AR order.
    #[arg(long, default_value_t = 0)]
    p: usize,
    /// MA order.
    #[arg(long, default_value_t = 0)]
    q: usize,
    /// Fix d = 0 (a short-memory model).
    #[arg(long)]
    no_d: bool,
    #[arg(long, default_value = "logit")]
    link: String,
    /// Truncation point of the MA(∞) sums.
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long)]
    no_intercept: bool,
}

impl ModelArgs {
    fn spec(&self, l: usize) -> Result<ModelSpec, Error> {
        let link: Link = self.link.parse()?;
        let mut spec = ModelSpec::new(self.p, self.q, l).with_link(link).with_truncation(self.m);
        if self.no_intercept {
            spec = spec.without_intercept();
        }
        spec.validate()?;
        Ok(spec)
    }

    fn options(&self) -> FitOptions {
        FitOptions {
            fix_d_at_zero: self.no_d,
            ..FitOptions::default()
        }
    }
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Response column.
    #[arg(long, default_value = "y")]
    y_column: String,
    /// Comma-separated covariate columns; defaults to every other column.
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    /// Observations live on (a,b) and are mapped to (0,1), e.g. `0,100`.
    #[arg(long, value_parser = parse_interval)]
    rescale: Option<(f64, f64)>,
}

impl DataArgs {
    fn load(&self) -> Result<Sample, Error> {
        read_dataset(
            &self.data,
            &DatasetOptions {
                y_column: Some(self.y_column.clone()),
                covariates: self.covariates.clone(),
                rescale: self.rescale,
            },
        )
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Write the report here as well as to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write `parameter,estimate,std_error` rows.
    #[arg(long)]
    estimates: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 40.0)]
    nu: f64,
    #[arg(long, default_value_t = 0.0)]
    d: f64,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    beta: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    phi: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Vec<f64>,
    #[arg(long, default_value_t = barfima::simulate::DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// CSV of covariates with `burn_in + n` rows.
    #[arg(long)]
    covariates: Option<PathBuf>,
    /// Map the sample to (a,b) on output.
    #[arg(long, value_parser = parse_interval)]
    rescale: Option<(f64, f64)>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct ForecastArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    horizon: usize,
    /// CSV of covariates for steps 1..=horizon; required with covariates.
    #[arg(long)]
    future_covariates: Option<PathBuf>,
    /// Use estimates written by `fit --estimates` instead of refitting.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = LJUNG_BOX_LAGS)]
    lags: usize,
    /// Write `t,y,mu,standardized,weighted` rows.
    #[arg(long)]
    residuals: Option<PathBuf>,
    /// Write `lag,acf` rows.
    #[arg(long)]
    acf: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    /// TOML design with `[[scenario]]` blocks.
    #[arg(long)]
    design: PathBuf,
    /// Directory receiving estimates.csv, rejections.csv and failures.csv.
    #[arg(long)]
    output_dir: PathBuf,
    /// Worker threads.
    #[arg(long, env = "BARFIMA_THREADS")]
    threads: Option<usize>,
}

enum Failure {
    Model(String),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Request(_)
            | Error::Design(_)
            | Error::InvalidSample(_)
            | Error::InvalidSpec(_)
            | Error::InvalidParams(_) => Failure::Input(e.to_string()),
            _ => Failure::Model(e.to_string()),
        }
    }
}

fn parse_interval(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [a, b] = parts.as_slice() else {
        return Err(format!("expected 'a,b', got '{s}'"));
    };
    let a: f64 = a.trim().parse().map_err(|_| format!("cannot parse '{a}'"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("cannot parse '{b}'"))?;
    if !(a < b) {
        return Err(format!("need a < b, got {a} and {b}"));
    }
    Ok((a, b))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn fit_report(fit: &FitResult, sample: &Sample) -> String {
    let mut s = String::new();
    let spec = &fit.spec;
    let _ = writeln!(
        s,
        "βARFIMA({},d,{}) with {} covariate(s), {} link, m = {}",
        spec.p, spec.q, spec.l, spec.link, spec.m
    );
    let _ = writeln!(s, "Observations: {} (likelihood over {})", sample.len(), fit.n_obs);
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<10} {:>12} {:>12} {:>10} {:>10}", "Parameter", "Estimate", "Std. Error", "z", "p-value");
    let names = spec.param_names();
    let est = fit.estimates();
    let z = z_statistics(fit);
    for (i, name) in names.iter().enumerate() {
        if !fit.free[i] {
            let _ = writeln!(s, "{:<10} {:>12.4} {:>12} {:>10} {:>10}", name, est[i], "fixed", "", "");
            continue;
        }
        let se = fit.std_errors[i].map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"));
        let (zs, ps) = match &z[i] {
            Some(t) => (format!("{:.4}", t.statistic), format!("{:.4}", t.p_value)),
            None => ("NA".to_string(), "NA".to_string()),
        };
        let _ = writeln!(s, "{:<10} {:>12.4} {:>12} {:>10} {:>10}", name, est[i], se, zs, ps);
    }
    let _ = writeln!(s);
    let c = information_criteria(fit);
    let _ = writeln!(s, "Log-likelihood: {:.4}", fit.loglik);
    let _ = writeln!(s, "AIC: {:.4}  BIC: {:.4}  HQ: {:.4}", c.aic, c.bic, c.hq);
    let _ = writeln!(
        s,
        "Optimizer: {:?} after {} iterations (projected gradient {:.2e})",
        fit.termination, fit.iterations, fit.projected_gradient_norm
    );
    s
}

fn run_fit(args: &FitArgs) -> Result<(), Failure> {
    let sample = args.data.load()?;
    let spec = args.model.spec(sample.covariate_count())?;
    let opts = args.model.options();
    let free_d = !args.model.no_d;
    let (fitted, restricted) = if free_d {
        let (f, r) = fit_nested(&spec, &sample, &opts)?;
        (f, Some(r))
    } else {
        (fit(&spec, &sample, &opts)?, None)
    };
    let mut report = fit_report(&fitted, &sample);
    let _ = writeln!(report);
    if let Some(r) = &restricted {
        match lr_test(&fitted, r) {
            Ok(t) => {
                let _ = writeln!(report, "LR test of d = 0: LR = {:.4}, df = {}, p-value = {:.4}", t.statistic, t.df, t.p_value);
            }
            Err(e) => {
                let _ = writeln!(report, "LR test of d = 0 unavailable: {e}");
            }
        }
    }
    match diagnose(&fitted, &sample, LJUNG_BOX_LAGS) {
        Ok(d) => {
            let lb = &d.ljung_box;
            let _ = writeln!(
                report,
                "Ljung-Box ({} lags): Q = {:.4}, df = {}, p-value = {:.4}",
                LJUNG_BOX_LAGS, lb.statistic, lb.df, lb.p_value
            );
        }
        Err(e) => {
            let _ = writeln!(report, "Ljung-Box unavailable: {e}");
        }
    }
    print!("{report}");
    if let Some(path) = &args.output {
        write_text(path, &report)?;
    }
    if let Some(path) = &args.estimates {
        write_estimates(path, &fitted)?;
    }
    if !fitted.converged {
        return Err(Failure::Model(format!("optimizer did not converge: {:?}", fitted.termination)));
    }
    Ok(())
}

fn write_estimates(path: &Path, fit: &FitResult) -> Result<(), Failure> {
    let mut s = String::from("parameter,estimate,std_error\n");
    for ((name, v), se) in fit.spec.param_names().iter().zip(fit.estimates()).zip(&fit.std_errors) {
        let se = se.map_or_else(|| "NA".to_string(), |x| x.to_string());
        let _ = writeln!(s, "{name},{v},{se}");
    }
    write_text(path, &s)
}

fn read_estimates(path: &Path, spec: &ModelSpec) -> Result<ParamVector, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let names = spec.param_names();
    let mut values = vec![None; names.len()];
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let bad = || Failure::Input(format!("{}: line {}: expected 'parameter,estimate,...'", path.display(), i + 1));
        if fields.len() < 2 {
            return Err(bad());
        }
        let v: f64 = fields[1].trim().parse().map_err(|_| bad())?;
        match names.iter().position(|n| n == fields[0].trim()) {
            Some(k) => values[k] = Some(v),
            None => {
                return Err(Failure::Input(format!(
                    "{}: line {}: parameter '{}' is not in the model",
                    path.display(),
                    i + 1,
                    fields[0].trim()
                )))
            }
        }
    }
    let v = values
        .iter()
        .zip(&names)
        .map(|(v, n)| v.ok_or_else(|| Failure::Input(format!("{}: missing parameter '{n}'", path.display()))))
        .collect::<Result<Vec<f64>, Failure>>()?;
    let params = ParamVector::from_slice(spec, &v)?;
    params.validate(spec)?;
    Ok(params)
}

fn run_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let covariates = args.covariates.as_deref().map(read_matrix).transpose()?;
    let l = covariates.as_ref().and_then(|rows| rows.first()).map_or(0, Vec::len);
    let spec = args.model.spec(l)?;
    let d = if args.model.no_d { 0.0 } else { args.d };
    let params = ParamVector::new(args.nu, d, args.alpha, args.beta.clone(), args.phi.clone(), args.theta.clone());
    params.validate(&spec)?;
    let mut config = SimConfig::new(spec, params, args.n, args.seed).with_burn_in(args.burn_in);
    if let Some(rows) = covariates {
        config = config.with_covariates(rows);
    }
    let sample = simulate(&config)?;
    write_sample(&args.output, &sample, args.rescale)?;
    Ok(())
}

fn run_forecast(args: &ForecastArgs) -> Result<(), Failure> {
    if args.horizon == 0 {
        return Err(Failure::Input("--horizon must be at least 1".into()));
    }
    let sample = args.data.load()?;
    let spec = args.model.spec(sample.covariate_count())?;
    let params = match &args.params {
        Some(path) => read_estimates(path, &spec)?,
        None => {
            let fitted = fit(&spec, &sample, &args.model.options())?;
            if !fitted.converged {
                return Err(Failure::Model(format!("optimizer did not converge: {:?}", fitted.termination)));
            }
            fitted.params_hat
        }
    };
    let mut request = ForecastRequest::new(args.horizon);
    if spec.l > 0 {
        let Some(path) = &args.future_covariates else {
            return Err(Failure::Input("the model has covariates; --future-covariates is required".into()));
        };
        request = request.with_covariates(read_matrix(path)?);
    }
    let predictions = forecast_with(&spec, &params, &sample, &request)?;
    println!("{:>4} {:>12}", "step", "prediction");
    for (j, p) in predictions.iter().enumerate() {
        println!("{:>4} {:>12.4}", j + 1, p);
    }
    if let Some(path) = &args.output {
        write_forecast_csv(path, &predictions)?;
    }
    Ok(())
}

fn run_diagnose(args: &DiagnoseArgs) -> Result<(), Failure> {
    let sample = args.data.load()?;
    let spec = args.model.spec(sample.covariate_count())?;
    let fitted = fit(&spec, &sample, &args.model.options())?;
    if !fitted.converged {
        return Err(Failure::Model(format!("optimizer did not converge: {:?}", fitted.termination)));
    }
    let report = diagnose(&fitted, &sample, args.lags)?;
    print!("{}", report.to_text());
    if let Some(path) = &args.residuals {
        report.write_residuals_csv(path)?;
    }
    if let Some(path) = &args.acf {
        report.write_acf_csv(path)?;
    }
    Ok(())
}

fn run_mc(args: &McArgs) -> Result<(), Failure> {
    let design = McDesign::from_path(&args.design)?;
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Input(format!("cannot start {threads} threads: {e}")))?;
    }
    let report = run_design(&design)?;
    fs::create_dir_all(&args.output_dir).map_err(|e| Failure::Input(format!("{}: {e}", args.output_dir.display())))?;
    report.write_csv(&args.output_dir)?;
    print!("{}", report.summarize());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Forecast(a) => run_forecast(a),
        Command::Diagnose(a) => run_diagnose(a),
        Command::Mc(a) => run_mc(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Model(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
