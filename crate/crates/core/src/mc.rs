//! Monte Carlo harness: repeated simulate-and-fit runs aggregated into bias,
//! variance and MSE tables and into rejection rates for tests of `d = 0`.
//!
//! Designs are TOML files with one `[[scenario]]` table per scenario:
//!
//! ```toml
//! [[scenario]]
//! name = "s1"
//! p = 1
//! q = 1
//! nu = 40.0
//! d = 0.15
//! alpha = 0.05
//! phi = [0.2]
//! theta = [-0.3]
//! sizes = [1000]
//! replicates = 200
//! seed = 1
//! tests = ["lr", "z"]
//! levels = [0.01, 0.05, 0.10]
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::estimation::{fit, fit_nested, FitOptions, FitResult};
use crate::inference::{lr_test, rao_score_test, z_statistics};
use crate::link::Link;
use crate::model::{ModelSpec, ParamVector, Sample};
use crate::simulate::{simulate, SimConfig, DEFAULT_BURN_IN};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Statistic {
    Lr,
    Z,
    Score,
}

impl Statistic {
    pub fn name(self) -> &'static str {
        match self {
            Statistic::Lr => "LR",
            Statistic::Z => "z",
            Statistic::Score => "Score",
        }
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lr" => Ok(Statistic::Lr),
            "z" | "wald" => Ok(Statistic::Z),
            "score" | "rao" => Ok(Statistic::Score),
            other => Err(Error::Design(format!("unknown statistic '{other}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub spec: ModelSpec,
    pub truth: ParamVector,
    pub sizes: Vec<usize>,
    pub replicates: usize,
    pub base_seed: u64,
    pub burn_in: usize,
    pub tests: Vec<Statistic>,
    pub levels: Vec<f64>,
    pub fit_options: FitOptions,
}

impl Scenario {
    pub fn new(name: &str, spec: ModelSpec, truth: ParamVector, sizes: Vec<usize>, replicates: usize, base_seed: u64) -> Self {
        Self {
            name: name.to_string(),
            spec,
            truth,
            sizes,
            replicates,
            base_seed,
            burn_in: DEFAULT_BURN_IN,
            tests: Vec::new(),
            levels: vec![0.01, 0.05, 0.10],
            fit_options: FitOptions::default(),
        }
    }

    pub fn with_tests(mut self, tests: Vec<Statistic>) -> Self {
        self.tests = tests;
        self
    }

    fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.truth.validate(&self.spec)?;
        if self.replicates < 2 {
            return Err(Error::Design(format!("scenario '{}' needs at least 2 replicates", self.name)));
        }
        if self.sizes.is_empty() {
            return Err(Error::Design(format!("scenario '{}' lists no sample sizes", self.name)));
        }
        if self.spec.l > 0 {
            return Err(Error::Design("covariates are not supported in designs".into()));
        }
        if self.burn_in <= self.spec.m {
            return Err(Error::Design(format!("burn-in must exceed m = {}", self.spec.m)));
        }
        if self.levels.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return Err(Error::Design("levels must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct McDesign {
    pub scenarios: Vec<Scenario>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DesignFile {
    #[serde(default)]
    scenario: Vec<ScenarioFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    #[serde(default)]
    p: usize,
    #[serde(default)]
    q: usize,
    m: Option<usize>,
    link: Option<String>,
    nu: f64,
    d: f64,
    #[serde(default)]
    alpha: f64,
    #[serde(default)]
    phi: Vec<f64>,
    #[serde(default)]
    theta: Vec<f64>,
    sizes: Vec<usize>,
    replicates: usize,
    #[serde(default)]
    seed: u64,
    burn_in: Option<usize>,
    #[serde(default)]
    tests: Vec<String>,
    levels: Option<Vec<f64>>,
}

impl McDesign {
    pub fn parse(text: &str) -> Result<Self> {
        let file: DesignFile = toml::from_str(text).map_err(|e| Error::Design(e.to_string()))?;
        let scenarios = file
            .scenario
            .into_iter()
            .map(|s| {
                if s.phi.len() != s.p || s.theta.len() != s.q {
                    return Err(Error::Design(format!(
                        "scenario '{}': phi/theta lengths must equal p = {} and q = {}",
                        s.name, s.p, s.q
                    )));
                }
                let mut spec = ModelSpec::new(s.p, s.q, 0);
                if let Some(m) = s.m {
                    spec = spec.with_truncation(m);
                }
                if let Some(link) = &s.link {
                    spec = spec.with_link(link.parse()?);
                }
                let truth = ParamVector::new(s.nu, s.d, s.alpha, vec![], s.phi, s.theta);
                let mut sc = Scenario::new(&s.name, spec, truth, s.sizes, s.replicates, s.seed);
                if let Some(b) = s.burn_in {
                    sc.burn_in = b;
                }
                sc.tests = s.tests.iter().map(|t| t.parse()).collect::<Result<_>>()?;
                if let Some(levels) = s.levels {
                    sc.levels = levels;
                }
                sc.validate()?;
                Ok(sc)
            })
            .collect::<Result<_>>()?;
        Ok(Self { scenarios })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// One replicate's raw outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct Replicate {
    pub index: usize,
    pub seed: u64,
    /// Free-model estimates; `None` when the replicate failed.
    pub estimates: Option<Vec<f64>>,
    /// p-values in the scenario's test order.
    pub p_values: Vec<f64>,
    pub failure: Option<String>,
}

fn usable(fit: &FitResult) -> bool {
    fit.converged
}

/// Simulates and fits replicate `index` of `scenario` at size `n`.
pub fn run_replicate(scenario: &Scenario, n: usize, index: usize) -> Replicate {
    let seed = scenario.base_seed.wrapping_add(index as u64);
    let fail = |msg: String| Replicate {
        index,
        seed,
        estimates: None,
        p_values: Vec::new(),
        failure: Some(msg),
    };
    let config = SimConfig::new(scenario.spec.clone(), scenario.truth.clone(), n, seed).with_burn_in(scenario.burn_in);
    let sample = match simulate(&config) {
        Ok(s) => s,
        Err(e) => return fail(format!("simulation: {e}")),
    };
    match fit_replicate(scenario, &sample) {
        Ok((estimates, p_values)) => Replicate {
            index,
            seed,
            estimates: Some(estimates),
            p_values,
            failure: None,
        },
        Err(msg) => fail(msg),
    }
}

fn fit_replicate(scenario: &Scenario, sample: &Sample) -> std::result::Result<(Vec<f64>, Vec<f64>), String> {
    let spec = &scenario.spec;
    let needs_restricted = scenario.tests.iter().any(|t| matches!(t, Statistic::Lr | Statistic::Score));
    let (free, restricted) = if needs_restricted {
        let (f, r) = fit_nested(spec, sample, &scenario.fit_options).map_err(|e| format!("fit: {e}"))?;
        (f, Some(r))
    } else {
        (fit(spec, sample, &scenario.fit_options).map_err(|e| format!("fit: {e}"))?, None)
    };
    if !usable(&free) {
        return Err(format!("free fit did not converge ({:?})", free.termination));
    }
    if let Some(r) = &restricted {
        if !usable(r) {
            return Err(format!("restricted fit did not converge ({:?})", r.termination));
        }
    }
    let mut p_values = Vec::with_capacity(scenario.tests.len());
    for stat in &scenario.tests {
        let p = match stat {
            Statistic::Lr => lr_test(&free, restricted.as_ref().expect("restricted fit")).map(|r| r.p_value),
            Statistic::Score => rao_score_test(spec, sample, restricted.as_ref().expect("restricted fit")).map(|r| r.p_value),
            Statistic::Z => z_statistics(&free)[spec.index_d()]
                .as_ref()
                .map(|r| r.p_value)
                .ok_or_else(|| Error::TestUnavailable("no standard error for d".into())),
        }
        .map_err(|e| format!("{} test: {e}", stat.name()))?;
        p_values.push(p);
    }
    Ok((free.params_hat.to_vec(), p_values))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateCell {
    pub scenario: String,
    pub n: usize,
    pub parameter: String,
    pub truth: f64,
    pub mean: f64,
    /// `100·(mean − truth)/truth`; `None` when the truth is zero.
    pub rb: Option<f64>,
    /// Divisor is the number of usable replicates.
    pub var: f64,
    pub mse: f64,
    pub used: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RejectionCell {
    pub scenario: String,
    pub n: usize,
    pub statistic: String,
    pub level: f64,
    pub rate: f64,
    pub used: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FailureCell {
    pub scenario: String,
    pub n: usize,
    pub replicates: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct McReport {
    pub estimates: Vec<EstimateCell>,
    pub rejections: Vec<RejectionCell>,
    pub failures: Vec<FailureCell>,
}

/// Per-parameter mean, relative bias, variance and MSE of `draws` around `truth`.
pub fn aggregate(scenario: &str, n: usize, names: &[String], truth: &[f64], draws: &[Vec<f64>]) -> Vec<EstimateCell> {
    let r = draws.len() as f64;
    names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let values: Vec<f64> = draws.iter().map(|d| d[j]).collect();
            let mean = values.iter().sum::<f64>() / r;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / r;
            let mse = values.iter().map(|v| (v - truth[j]).powi(2)).sum::<f64>() / r;
            EstimateCell {
                scenario: scenario.to_string(),
                n,
                parameter: name.clone(),
                truth: truth[j],
                mean,
                rb: (truth[j] != 0.0).then(|| 100.0 * (mean - truth[j]) / truth[j]),
                var,
                mse,
                used: draws.len(),
            }
        })
        .collect()
}

/// Runs replicates `0..R` of every scenario and size, in parallel, and
/// aggregates them in replicate order.
pub fn run_design(design: &McDesign) -> Result<McReport> {
    let mut report = McReport::default();
    for sc in &design.scenarios {
        sc.validate()?;
        for &n in &sc.sizes {
            let reps: Vec<Replicate> = (0..sc.replicates).into_par_iter().map(|i| run_replicate(sc, n, i)).collect();
            report.append(sc, n, &reps);
        }
    }
    Ok(report)
}

impl McReport {
    /// Adds the cells for one `(scenario, n)` block.
    pub fn append(&mut self, sc: &Scenario, n: usize, reps: &[Replicate]) {
        let ok: Vec<&Replicate> = reps.iter().filter(|r| r.estimates.is_some()).collect();
        self.failures.push(FailureCell {
            scenario: sc.name.clone(),
            n,
            replicates: reps.len(),
            failed: reps.len() - ok.len(),
        });
        if ok.is_empty() {
            return;
        }
        let draws: Vec<Vec<f64>> = ok.iter().map(|r| r.estimates.clone().expect("usable")).collect();
        self.estimates
            .extend(aggregate(&sc.name, n, &sc.spec.param_names(), &sc.truth.to_vec(), &draws));
        for (k, stat) in sc.tests.iter().enumerate() {
            for &level in &sc.levels {
                let rejected = ok.iter().filter(|r| r.p_values[k] < level).count();
                self.rejections.push(RejectionCell {
                    scenario: sc.name.clone(),
                    n,
                    statistic: stat.name().to_string(),
                    level,
                    rate: rejected as f64 / ok.len() as f64,
                    used: ok.len(),
                });
            }
        }
    }

    pub fn estimate(&self, scenario: &str, n: usize, parameter: &str) -> Option<&EstimateCell> {
        self.estimates
            .iter()
            .find(|c| c.scenario == scenario && c.n == n && c.parameter == parameter)
    }

    pub fn rejection(&self, scenario: &str, n: usize, statistic: &str, level: f64) -> Option<&RejectionCell> {
        self.rejections
            .iter()
            .find(|c| c.scenario == scenario && c.n == n && c.statistic == statistic && (c.level - level).abs() < 1e-12)
    }

    /// Tables with rows Mean/RB/Var/MSE and one column per parameter, one
    /// block per `(scenario, n)`, followed by rejection rates in percent.
    pub fn summarize(&self) -> String {
        let mut out = String::new();
        let mut blocks: BTreeMap<(String, usize), Vec<&EstimateCell>> = BTreeMap::new();
        let mut order: Vec<(String, usize)> = Vec::new();
        for c in &self.estimates {
            let key = (c.scenario.clone(), c.n);
            if !blocks.contains_key(&key) {
                order.push(key.clone());
            }
            blocks.entry(key).or_default().push(c);
        }
        for key in &order {
            let cells = &blocks[key];
            let used = cells.first().map_or(0, |c| c.used);
            let _ = writeln!(out, "Scenario {}, n = {} ({} replicates used)", key.0, key.1, used);
            let _ = write!(out, "{:<10}", "");
            for c in cells {
                let _ = write!(out, "{:>12}", c.parameter);
            }
            let _ = writeln!(out);
            let _ = write!(out, "{:<10}", "Truth");
            for c in cells {
                let _ = write!(out, "{:>12.3}", c.truth);
            }
            let _ = writeln!(out);
            let rows: [(&str, fn(&EstimateCell) -> Option<f64>); 4] = [
                ("Mean", |c| Some(c.mean)),
                ("RB", |c| c.rb),
                ("Var", |c| Some(c.var)),
                ("MSE", |c| Some(c.mse)),
            ];
            for (label, get) in rows {
                let _ = write!(out, "{label:<10}");
                for c in cells {
                    match get(c) {
                        Some(v) => {
                            let _ = write!(out, "{v:>12.3}");
                        }
                        None => {
                            let _ = write!(out, "{:>12}", "-");
                        }
                    }
                }
                let _ = writeln!(out);
            }
            let _ = writeln!(out);
        }
        if !self.rejections.is_empty() {
            let _ = writeln!(out, "Rejection rates (%) for H0: d = 0");
            let _ = writeln!(out, "{:<12}{:>8}{:>8}{:>8}{:>10}", "scenario", "n", "stat", "level", "rate");
            for c in &self.rejections {
                let _ = writeln!(
                    out,
                    "{:<12}{:>8}{:>8}{:>8.2}{:>10.1}",
                    c.scenario,
                    c.n,
                    c.statistic,
                    c.level,
                    100.0 * c.rate
                );
            }
            let _ = writeln!(out);
        }
        for f in &self.failures {
            if f.failed > 0 {
                let _ = writeln!(out, "Scenario {}, n = {}: {} of {} replicates failed", f.scenario, f.n, f.failed, f.replicates);
            }
        }
        out
    }

    /// Writes `estimates.csv`, `rejections.csv` and `failures.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("estimates.csv"))?;
        w.write_record(["scenario", "n", "parameter", "truth", "mean", "rb", "var", "mse", "used"])?;
        for c in &self.estimates {
            w.write_record([
                c.scenario.clone(),
                c.n.to_string(),
                c.parameter.clone(),
                c.truth.to_string(),
                c.mean.to_string(),
                c.rb.map_or_else(String::new, |v| v.to_string()),
                c.var.to_string(),
                c.mse.to_string(),
                c.used.to_string(),
            ])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("rejections.csv"))?;
        w.write_record(["scenario", "n", "statistic", "level", "rate", "used"])?;
        for c in &self.rejections {
            w.write_record([
                c.scenario.clone(),
                c.n.to_string(),
                c.statistic.clone(),
                c.level.to_string(),
                c.rate.to_string(),
                c.used.to_string(),
            ])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("failures.csv"))?;
        w.write_record(["scenario", "n", "replicates", "failed"])?;
        for c in &self.failures {
            w.write_record([c.scenario.clone(), c.n.to_string(), c.replicates.to_string(), c.failed.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the files written by [`McReport::write_csv`].
    pub fn read_csv(dir: &Path) -> Result<Self> {
        fn num<T: FromStr>(s: &str, line: usize) -> Result<T> {
            s.parse().map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse '{s}'"),
            })
        }
        fn line_of(r: &csv::StringRecord) -> usize {
            r.position().map_or(0, |p| p.line() as usize)
        }
        let mut report = McReport::default();
        let mut rd = csv::Reader::from_path(dir.join("estimates.csv"))?;
        for rec in rd.records() {
            let rec = rec?;
            let line = line_of(&rec);
            report.estimates.push(EstimateCell {
                scenario: rec[0].to_string(),
                n: num(&rec[1], line)?,
                parameter: rec[2].to_string(),
                truth: num(&rec[3], line)?,
                mean: num(&rec[4], line)?,
                rb: if rec[5].is_empty() { None } else { Some(num(&rec[5], line)?) },
                var: num(&rec[6], line)?,
                mse: num(&rec[7], line)?,
                used: num(&rec[8], line)?,
            });
        }
        let mut rd = csv::Reader::from_path(dir.join("rejections.csv"))?;
        for rec in rd.records() {
            let rec = rec?;
            let line = line_of(&rec);
            report.rejections.push(RejectionCell {
                scenario: rec[0].to_string(),
                n: num(&rec[1], line)?,
                statistic: rec[2].to_string(),
                level: num(&rec[3], line)?,
                rate: num(&rec[4], line)?,
                used: num(&rec[5], line)?,
            });
        }
        let mut rd = csv::Reader::from_path(dir.join("failures.csv"))?;
        for rec in rd.records() {
            let rec = rec?;
            let line = line_of(&rec);
            report.failures.push(FailureCell {
                scenario: rec[0].to_string(),
                n: num(&rec[1], line)?,
                replicates: num(&rec[2], line)?,
                failed: num(&rec[3], line)?,
            });
        }
        Ok(report)
    }
}

/// The two simulation scenarios with `ν = 40`: `(1,d,1)` with `α = 0.05`,
/// `φ₁ = 0.2`, `θ₁ = −0.3` and `d = 0.15` or `d = 0.30`.
pub fn reference_truth(d: f64, nu: f64) -> (ModelSpec, ParamVector) {
    (
        ModelSpec::new(1, 1, 0).with_link(Link::Logit),
        ParamVector::new(nu, d, 0.05, vec![], vec![0.2], vec![-0.3]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregation_of_exact_estimates() {
        let names = vec!["a".to_string(), "b".to_string()];
        let truth = vec![0.5, 0.0];
        let cells = aggregate("s", 10, &names, &truth, &[truth.clone(), truth.clone()]);
        assert_eq!(cells[0].rb, Some(0.0));
        assert_eq!(cells[0].var, 0.0);
        assert_eq!(cells[0].mse, 0.0);
        assert_eq!(cells[1].rb, None);
    }

    #[test]
    fn mse_decomposes() {
        let names = vec!["a".to_string()];
        let draws: Vec<Vec<f64>> = [0.1, 0.4, 0.35, 0.9, -0.2].iter().map(|&v| vec![v]).collect();
        let c = &aggregate("s", 5, &names, &[0.3], &draws)[0];
        let bias = c.mean - 0.3;
        assert!((c.mse - (c.var + bias * bias)).abs() < 1e-12);
    }

    #[test]
    fn design_parsing() {
        let text = r#"
[[scenario]]
name = "s1"
p = 1
q = 1
m = 50
nu = 40.0
d = 0.15
alpha = 0.05
phi = [0.2]
theta = [-0.3]
sizes = [300, 600]
replicates = 4
seed = 7
tests = ["lr", "z", "score"]
"#;
        let d = McDesign::parse(text).unwrap();
        assert_eq!(d.scenarios.len(), 1);
        let s = &d.scenarios[0];
        assert_eq!(s.spec.m, 50);
        assert_eq!(s.tests, vec![Statistic::Lr, Statistic::Z, Statistic::Score]);
        assert_eq!(s.levels, vec![0.01, 0.05, 0.10]);
        assert!(McDesign::parse("[[scenario]]\nname='x'\nnu=1.0\nd=0.1\nsizes=[10]\nreplicates=1\n").is_err());
        assert!(McDesign::parse("bogus = 1").is_err());
        assert!(McDesign::parse("").unwrap().scenarios.is_empty());
    }

    #[test]
    fn empty_design_gives_empty_report() {
        let r = run_design(&McDesign::default()).unwrap();
        assert_eq!(r, McReport::default());
        assert_eq!(r.summarize(), "");
    }
}
