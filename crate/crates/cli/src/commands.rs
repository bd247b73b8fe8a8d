use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use specmix_core::family::{self, general_constants, general_learn, general_select_params_with, general_test, GeneralTesterParams, MlrSource};
use specmix_core::geometry::epsilon_close;
use specmix_core::hard::{build_moment_matched_pair, HardInstancePair};
use specmix_core::learner::{learn as run_learn, LearnResult, LearnerConfig, DEFAULT_CANDIDATE_CAP, DEFAULT_SAMPLE_BUDGET};
use specmix_core::sampling::{generate_separated_means, sample as draw, sample_mlr, MixtureSource, RecordedSource, SampleSource};
use specmix_core::tester::{self, select_params_with, Constants, Profile, TesterParams, DEFAULT_BUDGET_CAP};
use specmix_core::verify::{self, Suite, VerifyOptions};
use specmix_core::{Error, FamilyId, MixtureModel, RngStream};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{apply_overrides, constants_map, ExperimentConfig, Format, Side};
use crate::CliError;

// RNG stream ids; one per role so that commands sharing a seed stay independent.
const STREAM_MEANS: u64 = 0;
const STREAM_SAMPLES: u64 = 1;
const STREAM_TESTER: u64 = 2;
const STREAM_LEARNER: u64 = 3;
const STREAM_SWEEP: u64 = 4;

pub struct Output {
    pub path: Option<PathBuf>,
}

impl Output {
    fn write(&self, text: &str) -> Result<(), CliError> {
        match &self.path {
            Some(p) => std::fs::write(p, text).map_err(|e| CliError::usage(format!("writing {}: {e}", p.display()))),
            None => {
                let mut so = std::io::stdout().lock();
                so.write_all(text.as_bytes()).and_then(|_| so.flush()).map_err(|e| CliError::failed(e.to_string()))
            }
        }
    }
}

/// Effective config on stderr; result documents also embed it under "config".
fn echo(cfg: &ExperimentConfig) {
    eprintln!("{}", json!({ "config": cfg }));
}

fn with_config<T: Serialize>(value: &T, cfg: &ExperimentConfig) -> Value {
    let mut v = serde_json::to_value(value).unwrap_or(Value::Null);
    if let Value::Object(m) = &mut v {
        m.insert("config".into(), serde_json::to_value(cfg).unwrap_or(Value::Null));
    }
    v
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).unwrap_or_default();
    s.push('\n');
    s
}

fn json_only(cfg: &ExperimentConfig) -> Result<(), CliError> {
    if cfg.format == Some(Format::Csv) {
        return Err(CliError::usage(format!("--format csv is not available for `{}`", cfg.command.as_deref().unwrap_or(""))));
    }
    Ok(())
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("reading {}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<MixtureModel, CliError> {
    Ok(MixtureModel::from_json(&read(path)?)?)
}

fn load_pair(path: &Path) -> Result<HardInstancePair, CliError> {
    Ok(HardInstancePair::from_json(&read(path)?)?)
}

/// Reads numeric CSV rows; `#` lines are comments and a non-numeric first row is a header.
pub fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::usage(format!("reading {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::usage(e.to_string()))?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(r) => rows.push(r),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(CliError::usage(format!("{} row {}: {e}", path.display(), i + 1))),
        }
    }
    if rows.is_empty() {
        return Err(CliError::usage(format!("{} holds no samples", path.display())));
    }
    Ok(rows)
}

fn to_csv<I: IntoIterator<Item = Vec<String>>>(header: Option<&[&str]>, rows: I) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if let Some(h) = header {
        w.write_record(h).map_err(|e| CliError::failed(e.to_string()))?;
    }
    for r in rows {
        w.write_record(&r).map_err(|e| CliError::failed(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::failed(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::failed(e.to_string()))
}

/// Counts the samples pulled through it.
struct Counting<'a> {
    inner: &'a mut dyn SampleSource,
    drawn: u64,
}

impl SampleSource for Counting<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn fill(&mut self, out: &mut [f64]) -> specmix_core::Result<()> {
        self.drawn += (out.len() / self.inner.dim().max(1)) as u64;
        self.inner.fill(out)
    }
}

/// Where samples come from, plus what is known about the truth.
struct Resolved {
    source: Box<dyn SampleSource>,
    family: FamilyId,
    k: Option<usize>,
    truth: Option<Vec<Vec<f64>>>,
}

fn resolve_source(cfg: &mut ExperimentConfig, rng: RngStream) -> Result<Resolved, CliError> {
    let chosen = [cfg.model.is_some(), cfg.samples.is_some(), cfg.hard_instance.is_some(), cfg.mlr_weights.is_some()]
        .iter()
        .filter(|x| **x)
        .count();
    if chosen != 1 {
        return Err(CliError::usage("give exactly one of --model, --samples, --hard-instance, --mlr-weights"));
    }
    if let Some(p) = &cfg.model {
        let model = load_model(p)?;
        if cfg.family.is_some_and(|f| f != model.family) {
            return Err(CliError::usage("--family disagrees with the model file"));
        }
        cfg.family = Some(model.family);
        let truth = model.means.clone();
        return Ok(Resolved { family: model.family, k: Some(model.k), truth: Some(truth), source: Box::new(MixtureSource::new(model, rng)) });
    }
    if let Some(p) = &cfg.hard_instance {
        let pair = load_pair(p)?;
        let side = ExperimentConfig::require(&cfg.side, "side")?;
        let (mp, mq) = pair.models()?;
        let model = if side == Side::P { mp } else { mq };
        cfg.family = Some(FamilyId::Gaussian);
        let truth = model.means.clone();
        return Ok(Resolved { family: FamilyId::Gaussian, k: Some(model.k), truth: Some(truth), source: Box::new(MixtureSource::new(model, rng)) });
    }
    if let Some(w) = &cfg.mlr_weights {
        cfg.family = Some(FamilyId::Gaussian);
        let truth = w.iter().map(|x| vec![*x]).collect();
        return Ok(Resolved { family: FamilyId::Gaussian, k: Some(w.len()), truth: Some(truth), source: Box::new(MlrSource::new(w.clone(), rng)) });
    }
    let rows = read_rows(cfg.samples.as_deref().unwrap_or(Path::new("")))?;
    let family = *cfg.family.get_or_insert(FamilyId::Gaussian);
    Ok(Resolved { family, k: None, truth: None, source: Box::new(RecordedSource::new(&rows)?) })
}

/// Active constants: the family's profile defaults with config overrides applied; echoed back in full.
fn resolve_constants(cfg: &mut ExperimentConfig, family: FamilyId) -> Result<Constants, CliError> {
    let profile = cfg.profile();
    let base = if family == FamilyId::Gaussian { Constants::for_profile(profile) } else { general_constants(profile) };
    let c = apply_overrides(base, cfg.constants.as_ref())?;
    cfg.constants = Some(constants_map(&c));
    Ok(c)
}

fn problem(cfg: &mut ExperimentConfig, k_known: Option<usize>, d_known: usize) -> Result<(usize, usize, f64, f64), CliError> {
    let k = match (k_known, cfg.k) {
        (Some(a), Some(b)) if a != b => return Err(CliError::usage(format!("k={b} disagrees with the source (k={a})"))),
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => return Err(CliError::usage("missing required setting `k`")),
    };
    if cfg.d.is_some_and(|d| d != d_known) {
        return Err(CliError::usage(format!("d disagrees with the source (d={d_known})")));
    }
    cfg.k = Some(k);
    cfg.d = Some(d_known);
    let delta = ExperimentConfig::require(&cfg.delta, "delta")?;
    let eps = ExperimentConfig::require(&cfg.eps, "eps")?;
    Ok((k, d_known, delta, eps))
}

fn fill_defaults(cfg: &mut ExperimentConfig) {
    cfg.seed.get_or_insert(0);
    cfg.profile.get_or_insert(Profile::Practical);
}

pub fn generate(mut cfg: ExperimentConfig, out: &Output) -> Result<u8, CliError> {
    fill_defaults(&mut cfg);
    json_only(&cfg)?;
    let k = ExperimentConfig::require(&cfg.k, "k")?;
    let d = *cfg.d.get_or_insert(1);
    let delta = ExperimentConfig::require(&cfg.delta, "delta")?;
    let family = *cfg.family.get_or_insert(FamilyId::Gaussian);
    let radius = *cfg.radius.get_or_insert(delta * (k as f64).powf(1.0 / d as f64));
    echo(&cfg);
    let mut rng = RngStream::new(cfg.seed(), STREAM_MEANS);
    let means = generate_separated_means(k, d, delta, radius, &mut rng)?;
    let model = MixtureModel::new(family, means)?;
    out.write(&(model.to_json() + "\n"))?;
    Ok(0)
}

pub fn sample(mut cfg: ExperimentConfig, out: &Output) -> Result<u8, CliError> {
    fill_defaults(&mut cfg);
    let n = ExperimentConfig::require(&cfg.n, "n")? as usize;
    let format = *cfg.format.get_or_insert(Format::Csv);
    let mut rng = RngStream::new(cfg.seed(), STREAM_SAMPLES);
    let rows: Vec<Vec<f64>> = if let Some(w) = cfg.mlr_weights.clone() {
        if cfg.model.is_some() {
            return Err(CliError::usage("give either --model or --mlr-weights"));
        }
        echo(&cfg);
        sample_mlr(&w, n, &mut rng).into_iter().map(|(x, y)| vec![x, y]).collect()
    } else {
        let model = load_model(&ExperimentConfig::require(&cfg.model, "model")?)?;
        echo(&cfg);
        draw(&model, n, &mut rng)
    };
    let text = match format {
        Format::Json => serde_json::to_string(&rows).map_err(|e| CliError::failed(e.to_string()))? + "\n",
        Format::Csv => to_csv(None, rows.iter().map(|r| r.iter().map(|x| x.to_string()).collect()))?,
    };
    out.write(&text)?;
    Ok(0)
}

enum AnyParams {
    Gaussian(TesterParams),
    General(GeneralTesterParams),
}

pub fn test(mut cfg: ExperimentConfig, out: &Output) -> Result<u8, CliError> {
    fill_defaults(&mut cfg);
    json_only(&cfg)?;
    let seed = cfg.seed();
    let mut res = resolve_source(&mut cfg, RngStream::new(seed, STREAM_SAMPLES))?;
    let d = res.source.dim();
    let mu_star = ExperimentConfig::require(&cfg.mu_star, "mu_star")?;
    if mu_star.len() != d {
        return Err(CliError::usage(format!("mu_star has {} coordinates, samples have {d}", mu_star.len())));
    }
    let params = if let Some(p) = &cfg.params {
        let v: Value = serde_json::from_str(&read(p)?).map_err(|e| CliError::usage(e.to_string()))?;
        if v.get("delta_m").is_some() {
            AnyParams::General(serde_json::from_value(v).map_err(|e| CliError::usage(e.to_string()))?)
        } else {
            AnyParams::Gaussian(serde_json::from_value(v).map_err(|e| CliError::usage(e.to_string()))?)
        }
    } else {
        let (k, d, delta, eps) = problem(&mut cfg, res.k, d)?;
        let c = resolve_constants(&mut cfg, res.family)?;
        let cap = *cfg.budget_cap.get_or_insert(DEFAULT_BUDGET_CAP);
        if res.family == FamilyId::Gaussian {
            AnyParams::Gaussian(select_params_with(k, d, delta, eps, cfg.profile(), &c, cap)?)
        } else {
            AnyParams::General(general_select_params_with(k, d, delta, eps, res.family, cfg.profile(), &c, cap)?)
        }
    };
    echo(&cfg);
    let rng = RngStream::new(seed, STREAM_TESTER);
    let (verdict, params_json) = match &params {
        AnyParams::Gaussian(p) => {
            p.validate()?;
            (tester::test(res.source.as_mut(), &mu_star, p, &rng)?, serde_json::to_value(p))
        }
        AnyParams::General(p) => (general_test(res.source.as_mut(), &mu_star, p, &rng)?, serde_json::to_value(p)),
    };
    let mut doc = with_config(&verdict, &cfg);
    doc["params"] = params_json.unwrap_or(Value::Null);
    out.write(&pretty(&doc))?;
    Ok(if verdict.accepted() { 0 } else { 1 })
}

fn learner_config(cfg: &mut ExperimentConfig, k: usize, d: usize, delta: f64, eps: f64, c: Constants) -> LearnerConfig {
    let mut lc = LearnerConfig::new(k, d, delta, eps, cfg.profile());
    lc.constants = Some(c);
    lc.vote_multiplier = *cfg.vote_multiplier.get_or_insert(c.c_vote);
    lc.candidate_cap = *cfg.candidate_cap.get_or_insert(DEFAULT_CANDIDATE_CAP);
    lc.sample_budget = *cfg.sample_budget.get_or_insert(DEFAULT_SAMPLE_BUDGET);
    lc.tester_budget_cap = *cfg.budget_cap.get_or_insert(DEFAULT_BUDGET_CAP);
    lc
}

fn learn_any(source: &mut dyn SampleSource, family: FamilyId, lc: &LearnerConfig, rng: &RngStream) -> Result<LearnResult, Error> {
    if family == FamilyId::Gaussian {
        run_learn(source, lc, rng)
    } else {
        general_learn(source, family, lc, rng)
    }
}

pub fn learn(mut cfg: ExperimentConfig, out: &Output) -> Result<u8, CliError> {
    fill_defaults(&mut cfg);
    json_only(&cfg)?;
    let seed = cfg.seed();
    let mut res = resolve_source(&mut cfg, RngStream::new(seed, STREAM_SAMPLES))?;
    if let Some(p) = &cfg.truth {
        res.truth = Some(load_model(p)?.means);
    }
    let (k, d, delta, eps) = problem(&mut cfg, res.k, res.source.dim())?;
    let c = resolve_constants(&mut cfg, res.family)?;
    let lc = learner_config(&mut cfg, k, d, delta, eps, c);
    echo(&cfg);
    let mut counting = Counting { inner: res.source.as_mut(), drawn: 0 };
    let result = learn_any(&mut counting, res.family, &lc, &RngStream::new(seed, STREAM_LEARNER))?;
    let mut doc = with_config(&result, &cfg);
    doc["samples_used"] = json!(counting.drawn);
    let mut code = 0;
    if let Some(truth) = &res.truth {
        let m = epsilon_close(&result.means_hat, truth, eps)?;
        doc["epsilon_close"] = json!({ "matched": m.matched, "max_distance": m.max_distance, "eps": eps });
        if !m.matched {
            code = 1;
        }
    }
    out.write(&pretty(&doc))?;
    Ok(code)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    pub d: usize,
    pub status: String,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_samples: f64,
    pub wall_time_ms: u64,
    pub error: String,
}

pub const SWEEP_COLUMNS: [&str; 9] =
    ["delta", "d", "status", "trials", "successes", "success_rate", "mean_samples", "wall_time_ms", "error"];

fn sweep_cell(cfg: &ExperimentConfig, family: FamilyId, c: Constants, cell: u64, delta: f64, d: usize) -> SweepRow {
    let start = Instant::now();
    let k = cfg.k.unwrap_or(1);
    let eps = cfg.eps.unwrap_or(0.0);
    let trials = cfg.trials.unwrap_or(0);
    let mut row = SweepRow {
        delta,
        d,
        status: "ok".into(),
        trials,
        successes: 0,
        success_rate: 0.0,
        mean_samples: 0.0,
        wall_time_ms: 0,
        error: String::new(),
    };
    let mut scratch = cfg.clone();
    let lc = learner_config(&mut scratch, k, d, delta, eps, c);
    let gate = lc.validate().and_then(|_| {
        if family == FamilyId::Gaussian {
            lc.tester_params().map(|_| ())
        } else {
            general_select_params_with(k, d, delta, eps, family, lc.profile, &c, lc.tester_budget_cap).map(|_| ())
        }
    });
    if let Err(e) = gate {
        row.status = if matches!(e, Error::Precondition(_) | Error::Hypothesis(_)) { "skipped" } else { "error" }.into();
        row.error = e.to_string();
        row.wall_time_ms = start.elapsed().as_millis() as u64;
        return row;
    }
    let base = RngStream::new(cfg.seed(), STREAM_SWEEP).substream(cell);
    let radius = delta * (k as f64).powf(1.0 / d as f64);
    let mut total_samples = 0u64;
    let mut hard_errors = 0;
    for trial in 0..trials {
        let rng = base.substream(trial as u64);
        let mut means_rng = rng.substream(0);
        let outcome = generate_separated_means(k, d, delta, radius, &mut means_rng)
            .and_then(|means| MixtureModel::new(family, means))
            .and_then(|model| {
                let truth = model.means.clone();
                let mut src = MixtureSource::new(model, rng.substream(1));
                let mut counting = Counting { inner: &mut src, drawn: 0 };
                let r = learn_any(&mut counting, family, &lc, &rng.substream(2));
                total_samples += counting.drawn;
                match r {
                    Ok(r) => epsilon_close(&r.means_hat, &truth, eps).map(|m| m.matched),
                    Err(Error::ClusterCountMismatch { .. }) => Ok(false),
                    Err(e) => Err(e),
                }
            });
        match outcome {
            Ok(true) => row.successes += 1,
            Ok(false) => {}
            Err(e) => {
                hard_errors += 1;
                if row.error.is_empty() {
                    row.error = e.to_string();
                }
            }
        }
    }
    if trials > 0 {
        row.success_rate = row.successes as f64 / trials as f64;
        row.mean_samples = total_samples as f64 / trials as f64;
        if hard_errors == trials {
            row.status = "error".into();
        }
    }
    row.wall_time_ms = start.elapsed().as_millis() as u64;
    row
}

pub fn sweep(mut cfg: ExperimentConfig, out: &Output) -> Result<u8, CliError> {
    fill_defaults(&mut cfg);
    let format = *cfg.format.get_or_insert(Format::Csv);
    ExperimentConfig::require(&cfg.k, "k")?;
    ExperimentConfig::require(&cfg.eps, "eps")?;
    let deltas = ExperimentConfig::require(&cfg.deltas, "deltas")?;
    let dims = ExperimentConfig::require(&cfg.dims, "dims")?;
    cfg.trials.get_or_insert(10);
    let family = *cfg.family.get_or_insert(FamilyId::Gaussian);
    if family != FamilyId::Gaussian && dims.iter().any(|d| *d != 1) {
        return Err(CliError::usage(format!("{family} supports d = 1 only")));
    }
    let c = resolve_constants(&mut cfg, family)?;
    let mut scratch = cfg.clone();
    learner_config(&mut scratch, 1, 1, 1.0, 0.1, c);
    cfg = scratch;
    echo(&cfg);
    let grid: Vec<(f64, usize)> = dims.iter().flat_map(|d| deltas.iter().map(move |delta| (*delta, *d))).collect();
    // Indexed parallel collect keeps grid order regardless of completion order.
    let rows: Vec<SweepRow> = grid
        .par_iter()
        .enumerate()
        .map(|(i, (delta, d))| sweep_cell(&cfg, family, c, i as u64, *delta, *d))
        .collect();
    let text = match format {
        Format::Json => pretty(&json!({ "config": cfg, "cells": rows })),
        Format::Csv => to_csv(
            Some(&SWEEP_COLUMNS),
            rows.iter().map(|r| {
                vec![
                    r.delta.to_string(),
                    r.d.to_string(),
                    r.status.clone(),
                    r.trials.to_string(),
                    r.successes.to_string(),
                    r.success_rate.to_string(),
                    r.mean_samples.to_string(),
                    r.wall_time_ms.to_string(),
                    r.error.clone(),
                ]
            }),
        )?,
    };
    out.write(&text)?;
    Ok(0)
}

pub fn hard_instance(mut cfg: ExperimentConfig, out: &Output) -> Result<u8, CliError> {
    fill_defaults(&mut cfg);
    json_only(&cfg)?;
    let n = *cfg.n.get_or_insert(6) as usize;
    let t = *cfg.t.get_or_insert(2);
    let delta = *cfg.delta.get_or_insert(0.05);
    let r = *cfg.r.get_or_insert(1.0);
    let eps_tail = *cfg.eps_tail.get_or_insert(0.01);
    echo(&cfg);
    let pair = build_moment_matched_pair(n, t, delta, r)?.with_tv(eps_tail)?;
    out.write(&pretty(&with_config(&pair, &cfg)))?;
    Ok(0)
}

pub fn families(mut cfg: ExperimentConfig, out: &Output) -> Result<u8, CliError> {
    let format = *cfg.format.get_or_insert(Format::Json);
    echo(&cfg);
    let reg = family::registry();
    let text = match format {
        Format::Json => {
            let list: Vec<Value> = reg
                .iter()
                .map(|f| json!({ "id": f.id, "density": f.density, "cf": f.cf, "reductions": f.reductions }))
                .collect();
            pretty(&json!({ "config": cfg, "families": list }))
        }
        Format::Csv => to_csv(
            Some(&["id", "density", "cf", "reductions"]),
            reg.iter().map(|f| vec![f.id.to_string(), f.density.into(), f.cf.into(), f.reductions.into()]),
        )?,
    };
    out.write(&text)?;
    Ok(0)
}

pub fn verify(mut cfg: ExperimentConfig, out: &Output) -> Result<u8, CliError> {
    cfg.seed.get_or_insert(0);
    let format = *cfg.format.get_or_insert(Format::Json);
    let suites = cfg.suites.get_or_insert_with(|| Suite::ALL.to_vec()).clone();
    let defaults = VerifyOptions::default();
    let constants = apply_overrides(defaults.constants, cfg.constants.as_ref())?;
    let general = apply_overrides(defaults.general_constants, cfg.general_constants.as_ref())?;
    cfg.constants = Some(constants_map(&constants));
    cfg.general_constants = Some(constants_map(&general));
    echo(&cfg);
    let opts = VerifyOptions { seed: cfg.seed(), constants, general_constants: general, ..defaults };
    let report = verify::run(&suites, &opts)?;
    let text = match format {
        Format::Json => pretty(&with_config(&report, &cfg)),
        Format::Csv => to_csv(
            Some(&["suite", "check", "measured", "bound", "passed"]),
            report.suites.iter().flat_map(|s| {
                s.checks.iter().map(move |c| {
                    vec![s.suite.to_string(), c.name.clone(), c.measured.to_string(), c.bound.to_string(), c.passed.to_string()]
                })
            }),
        )?,
    };
    out.write(&text)?;
    Ok(if report.passed { 0 } else { 1 })
}
