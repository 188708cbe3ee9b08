use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use detchoice::data::{Dataset, DatasetSchema};
use detchoice::error::Error;
use detchoice::evaluation::{
    evaluate_model, run_sweep_experiment, CiMethod, DetMethod, DeterminantalSource, SweepConfig,
    MCC_ZERO_CONVENTION,
};
use detchoice::inference::{
    adaptive_mh, diagnostics, laplace_covariance, map_fit, predict_from_draws, FitResult, MapConfig, McmcConfig,
    ParamDraws, PosteriorChains, RhatGate,
};
use detchoice::kernel::ModelParams;
use detchoice::likelihood::LikelihoodConfig;
use detchoice::prior::PriorSpec;
use detchoice::rng::RngState;
use detchoice::simulation::{
    gen_lora_dataset, gen_spatial_dataset, spatial_schema, CaptureRule, LoraGenConfig, LoraScenario, SpatialConfig,
};
use detchoice::verify::{run_all, VerifyConfig};

use crate::manifest::{RunDir, RunManifest};
use crate::{exit, Ci, Command, Dgp, EvaluateArgs, FitArgs, McmcArgs, Method, PredictArgs, PriorArgs, ReplayArgs};
use crate::{Scenario, SimulateArgs, SweepArgs, VerifyArgs};

pub const FIT_FILE: &str = "fit.json";
pub const CHAINS_FILE: &str = "chains.json";

/// Runs one command in its own run directory and writes the manifest.
pub fn run(command: &Command, seed: u64) -> Result<u8> {
    if let Command::Replay(a) = command {
        return replay(a);
    }
    let mut dir = RunDir::create(command.out_dir())?;
    let code = match command {
        Command::Simulate(a) => simulate(a, seed, &mut dir)?,
        Command::Fit(a) => fit(a, seed, &mut dir)?,
        Command::Verify(a) => verify(a, seed, &mut dir)?,
        Command::Sweep(a) => sweep(a, seed, &mut dir)?,
        Command::Predict(a) => predict(a, seed, &mut dir)?,
        Command::Evaluate(a) => evaluate(a, seed, &mut dir)?,
        Command::Replay(_) => unreachable!("handled above"),
    };
    dir.finish(command, seed)?;
    Ok(code)
}

fn replay(a: &ReplayArgs) -> Result<u8> {
    let m = RunManifest::load(&a.manifest)?;
    m.check_inputs()?;
    let rerun = m.config.clone().with_out_dir(a.out.clone());
    let code = run(&rerun, m.seed)?;
    let differing = m.differing_outputs(&a.out);
    for f in &m.outputs {
        let status = if differing.contains(&f.path) { "DIFFERS" } else { "identical" };
        println!("{:<20} {status}", f.path);
    }
    if differing.is_empty() {
        Ok(code)
    } else {
        eprintln!("replay produced different bytes for: {}", differing.join(", "));
        Ok(exit::VERIFY)
    }
}

fn simulate(a: &SimulateArgs, seed: u64, dir: &mut RunDir) -> Result<u8> {
    let rng = RngState::new(seed);
    let data = match a.dgp {
        Dgp::Spatial => gen_spatial_dataset(&SpatialConfig::with_radius(a.radius), a.n_obs, "obs-", &rng)?,
        Dgp::Lora => {
            let base = LoraGenConfig { n_devices: a.k, d_max: a.dmax, ..LoraGenConfig::default() };
            let scenario = match a.scenario {
                Scenario::Fixed => LoraScenario::Fixed,
                Scenario::Varied => LoraScenario::Varied,
            };
            let rule = CaptureRule::FirstLock { tie_window: a.tie_window };
            gen_lora_dataset(&base, &scenario, &rule, a.n_obs, &rng)?
        }
    };
    dir.write("data.jsonl", data.to_jsonl_string().as_bytes())?;
    println!("wrote {} observations to {}", data.len(), a.out.join("data.jsonl").display());
    Ok(exit::OK)
}

/// One row of the parameter table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub estimate: f64,
    pub sd: Option<f64>,
    pub rhat: Option<f64>,
    pub ess: Option<f64>,
}

/// Everything `predict` and `evaluate` need from a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    pub method: Method,
    /// Training schema, including the standardization applied before fitting.
    pub schema: DatasetSchema,
    pub prior: PriorSpec,
    /// MAP estimate or posterior mean.
    pub estimate: ModelParams,
    pub parameters: Vec<ParamSummary>,
    pub map: Option<FitResult>,
    pub acceptance_rates: Option<Vec<f64>>,
    pub chains_file: Option<String>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn parameter_names(schema: &DatasetSchema) -> Vec<String> {
    let mut names: Vec<String> =
        schema.quality_mask.iter().map(|&c| format!("beta[{}]", schema.feature_names[c])).collect();
    let n_groups = schema.lengthscale_groups.iter().map(|g| g + 1).max().unwrap_or(0);
    for g in 0..n_groups {
        let members: Vec<&str> = schema
            .similarity_mask
            .iter()
            .zip(&schema.lengthscale_groups)
            .filter(|(_, &k)| k == g)
            .map(|(&c, _)| schema.feature_names[c].as_str())
            .collect();
        let label = match members.as_slice() {
            [one] => one.to_string(),
            [first, .., last] => format!("{first}..{last}"),
            [] => format!("group{g}"),
        };
        names.push(format!("log_lengthscale[{label}]"));
    }
    names
}

fn summary_table(art: &FitArtifact) -> String {
    let mut s = String::new();
    let est = if art.method == Method::Map { "map" } else { "mean" };
    let _ = writeln!(s, "{:<34} {:>11} {:>10} {:>8} {:>9}", "parameter", est, "sd", "rhat", "ess");
    let opt = |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |x| format!("{x:.prec$}"));
    for p in &art.parameters {
        let _ = writeln!(
            s,
            "{:<34} {:>11.4} {:>10} {:>8} {:>9}",
            p.name,
            p.estimate,
            opt(p.sd, 4),
            opt(p.rhat, 3),
            opt(p.ess, 0)
        );
    }
    if let Some(m) = &art.map {
        let _ = writeln!(
            s,
            "log posterior {:.6}, |grad|_inf {:.2e}, {} iterations, converged: {}",
            m.log_posterior, m.grad_norm, m.iterations, m.converged
        );
    }
    if let Some(acc) = &art.acceptance_rates {
        let mean = acc.iter().sum::<f64>() / acc.len().max(1) as f64;
        let _ = writeln!(s, "{} chains, mean acceptance {mean:.3}", acc.len());
    }
    s
}

fn read_dataset(dir: &mut RunDir, path: &Path) -> Result<Dataset> {
    let bytes = dir.read_input(path)?;
    Dataset::read_jsonl(&bytes[..]).with_context(|| format!("in {}", path.display()))
}

fn priors_for(schema: &DatasetSchema, p: &PriorArgs) -> PriorSpec {
    let layout = schema.layout();
    PriorSpec::isotropic(layout.n_quality(), p.beta_sd, layout.n_lengthscales(), p.loglen_sd)
}

fn mcmc_config(m: &McmcArgs) -> McmcConfig {
    McmcConfig { chains: m.chains, warmup: m.warmup, steps: m.steps, ..McmcConfig::default() }
}

fn fit(a: &FitArgs, seed: u64, dir: &mut RunDir) -> Result<u8> {
    let raw = read_dataset(dir, &a.data)?;
    if raw.is_empty() {
        bail!("{} has no observations to fit", a.data.display());
    }
    let data = if !a.no_standardize && raw.schema.standardization.is_none() && !raw.schema.continuous.is_empty() {
        raw.standardized(&raw.fit_standardization())?
    } else {
        raw
    };
    let priors = priors_for(&data.schema, &a.prior);
    let names = parameter_names(&data.schema);
    let art = match a.method {
        Method::Map => {
            let f = map_fit(&data, &priors, &MapConfig::default())?;
            let cov = laplace_covariance(&f.params, &data, &priors, &LikelihoodConfig::default())?;
            let parameters = names
                .iter()
                .zip(f.params.to_vec())
                .enumerate()
                .map(|(k, (n, v))| ParamSummary {
                    name: n.clone(),
                    estimate: v,
                    sd: cov.as_ref().and_then(|c| finite(c[(k, k)].sqrt())),
                    rhat: None,
                    ess: None,
                })
                .collect();
            FitArtifact {
                method: Method::Map,
                schema: data.schema.clone(),
                prior: priors,
                estimate: f.params.clone(),
                parameters,
                map: Some(f),
                acceptance_rates: None,
                chains_file: None,
            }
        }
        Method::Mcmc => {
            let chains = adaptive_mh(&data, &priors, &mcmc_config(&a.mcmc), &RngState::new(seed))?;
            // Too-short runs still produce chains, just without diagnostics.
            let diag = diagnostics(&chains).ok();
            let mean = chains.posterior_mean();
            let total = (chains.n_chains() * chains.n_steps()) as f64;
            let parameters = (0..chains.dim())
                .map(|k| {
                    let var = chains.draws.iter().flatten().map(|t| (t[k] - mean[k]).powi(2)).sum::<f64>()
                        / (total - 1.0).max(1.0);
                    ParamSummary {
                        name: names[k].clone(),
                        estimate: mean[k],
                        sd: finite(var.sqrt()),
                        rhat: diag.as_ref().and_then(|d| finite(d.rhat[k])),
                        ess: diag.as_ref().and_then(|d| finite(d.ess[k])),
                    }
                })
                .collect();
            dir.write_json(CHAINS_FILE, &chains)?;
            FitArtifact {
                method: Method::Mcmc,
                schema: data.schema.clone(),
                prior: priors,
                estimate: ModelParams::from_vec(&chains.layout, &mean)?,
                parameters,
                map: None,
                acceptance_rates: Some(chains.acceptance_rates.clone()),
                chains_file: Some(CHAINS_FILE.to_string()),
            }
        }
    };
    let table = summary_table(&art);
    dir.write_json(FIT_FILE, &art)?;
    dir.write("summary.txt", table.as_bytes())?;
    print!("{table}");
    Ok(exit::OK)
}

fn load_fit(dir: &mut RunDir, path: &Path) -> Result<FitArtifact> {
    let bytes = dir.read_input(path)?;
    serde_json::from_slice(&bytes).with_context(|| format!("{} is not a fit artifact", path.display()))
}

/// Checks the evaluation schema against the fit and applies the stored standardization.
fn align_eval(dir: &mut RunDir, path: &Path, fit: &FitArtifact) -> Result<Dataset> {
    let data = read_dataset(dir, path)?;
    let diffs = fit.schema.mismatches(&data.schema);
    if !diffs.is_empty() {
        return Err(Error::Data(format!("schema mismatch between fit and data: {}", diffs.join("; "))).into());
    }
    match (&fit.schema.standardization, &data.schema.standardization) {
        (Some(st), None) => Ok(data.standardized(st)?),
        (a, b) if a == b => Ok(data),
        _ => Err(Error::Data("data carries a standardization different from the fit's".into()).into()),
    }
}

fn load_pool(dir: &mut RunDir, fit_path: &Path, fit: &FitArtifact, allow_unconverged: bool) -> Result<ParamDraws> {
    let Some(name) = &fit.chains_file else { return Ok(ParamDraws::point(&fit.estimate)) };
    let path = fit_path.parent().unwrap_or(Path::new(".")).join(name);
    let bytes = dir.read_input(&path)?;
    let chains: PosteriorChains =
        serde_json::from_slice(&bytes).with_context(|| format!("malformed chains file {}", path.display()))?;
    let gate = RhatGate { allow_override: allow_unconverged, ..RhatGate::default() };
    if !gate.allow_override {
        let worst = diagnostics(&chains)?.max_rhat();
        if !(worst <= gate.max_rhat) {
            return Err(Error::Diagnostics(format!(
                "max split R-hat {worst:.4} exceeds {}; pass --allow-unconverged to predict anyway",
                gate.max_rhat
            ))
            .into());
        }
    }
    Ok(ParamDraws::from_chains(&chains))
}

fn predict(a: &PredictArgs, seed: u64, dir: &mut RunDir) -> Result<u8> {
    let fit = load_fit(dir, &a.fit)?;
    let data = align_eval(dir, &a.data, &fit)?;
    let pool = load_pool(dir, &a.fit, &fit, a.allow_unconverged)?;
    let preds = predict_from_draws(&data, &pool, &LikelihoodConfig::default(), &RngState::new(seed), a.n_draws)?;
    let index: std::collections::HashMap<&str, &detchoice::data::Observation> =
        data.observations.iter().map(|o| (o.id.as_str(), o)).collect();
    let mut out = String::new();
    for p in &preds {
        let obs = index[p.observation.as_str()];
        let items: Vec<&str> = p.chosen.iter().map(|i| obs.assortment.ids()[i].as_str()).collect();
        out.push_str(&serde_json::to_string(&json!({ "id": p.observation, "draw": p.draw, "chosen": items }))?);
        out.push('\n');
    }
    dir.write("predictions.jsonl", out.as_bytes())?;
    println!("wrote {} predictions ({} draws x {} observations)", preds.len(), a.n_draws, data.len());
    Ok(exit::OK)
}

fn ci_method(ci: Ci, resamples: usize) -> CiMethod {
    match ci {
        Ci::Normal => CiMethod::Normal,
        Ci::Bootstrap => CiMethod::Bootstrap { resamples },
    }
}

fn evaluate(a: &EvaluateArgs, seed: u64, dir: &mut RunDir) -> Result<u8> {
    let fit = load_fit(dir, &a.fit)?;
    let data = align_eval(dir, &a.data, &fit)?;
    let pool = load_pool(dir, &a.fit, &fit, a.allow_unconverged)?;
    let source = DeterminantalSource::new(&pool, LikelihoodConfig::default())?;
    let ci = ci_method(a.ci, a.resamples);
    let score = evaluate_model(&source, &data, a.n_draws, &RngState::new(seed), ci)?;
    dir.write_json(
        "scores.json",
        &json!({
            "model": "determinantal",
            "method": fit.method,
            "ci": ci,
            "mcc_convention": MCC_ZERO_CONVENTION,
            "score": score,
        }),
    )?;
    println!(
        "MCC {:.4} +/- {:.4} over {} observations, {} draws",
        score.mcc_mean, score.ci_half, score.n_obs, score.n_draws
    );
    Ok(exit::OK)
}

fn verify(a: &VerifyArgs, seed: u64, dir: &mut RunDir) -> Result<u8> {
    let cfg = VerifyConfig { trials: a.trials, draws: a.draws, inject_fault: a.inject_fault };
    let report = run_all(&cfg, seed)?;
    dir.write_json("verify.json", &report)?;
    for c in &report.checks {
        println!(
            "{} {:<24} instances {:>5}  max deviation {:.3e}  tolerance {:.1e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.instances,
            c.max_deviation,
            c.tolerance
        );
    }
    if report.passed {
        return Ok(exit::OK);
    }
    for c in report.checks.iter().filter(|c| !c.passed) {
        if let Some(inst) = &c.failing_instance {
            eprintln!("failing instance for {}: {}", c.name, serde_json::to_string(inst)?);
        }
    }
    Ok(exit::VERIFY)
}

fn sweep(a: &SweepArgs, seed: u64, dir: &mut RunDir) -> Result<u8> {
    let det = match a.method {
        Method::Map => DetMethod::Map,
        Method::Mcmc => DetMethod::Mcmc(mcmc_config(&a.mcmc)),
    };
    let cfg = SweepConfig {
        radii: a.radii.clone(),
        n_train: a.n_train,
        n_eval: a.n_eval,
        n_draws: a.n_draws,
        det,
        ci: ci_method(a.ci, a.resamples),
        ..SweepConfig::default()
    };
    let priors = priors_for(&spatial_schema(), &a.prior);
    let report = run_sweep_experiment(&cfg, Some(&priors), seed)?;
    let csv = report.to_csv();
    dir.write("sweep.csv", csv.as_bytes())?;
    dir.write_json("sweep.json", &report)?;
    print!("{csv}");
    if report.failures.is_empty() {
        return Ok(exit::OK);
    }
    for f in &report.failures {
        eprintln!("radius {}: {}", f.radius, f.error);
    }
    Ok(exit::DATA)
}
