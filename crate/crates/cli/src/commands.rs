use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sodbayes::aerom::{
    data_scaling_study, evaluate_autoencoder, latent_sweep, pod_baseline, train_autoencoder, train_forward_operator, AeRomBundle,
    SweepResult,
};
use sodbayes::bayes::{metrics_csv, run_inversion, InversionMetrics, InversionSettings};
use sodbayes::sampling::{generate_dataset, lhs_sample, load_dataset, save_dataset, split_dataset, Dataset};

use crate::config::PipelineConfig;
use crate::manifest::RunManifest;
use crate::CliError;

pub const DATASET: &str = "dataset.sstb";
pub const BUNDLE: &str = "bundle.sstb";
pub const AE_LOSS: &str = "ae_loss.csv";
pub const FORWARD_LOSS: &str = "forward_loss.csv";
pub const TRAIN_METRICS: &str = "train_metrics.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
/// Split R-hat at or above this is reported as non-convergence.
pub const RHAT_WARNING: f64 = 1.05;

/// Files written by `infer` inside [`infer_dir`].
pub const INFER_FILES: [&str; 7] =
    ["observations.csv", "observations.json", "draws.csv", "diagnostics.json", "summary_rho.csv", "summary_p.csv", "metrics.json"];

pub fn infer_dir(n_obs: usize) -> String {
    format!("infer_n{n_obs}")
}

pub fn manifest_name(tag: &str) -> String {
    format!("manifest_{tag}.json")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn write(dir: &Path, rel: &str, contents: &[u8]) -> Result<(), CliError> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    std::fs::write(&path, contents).map_err(io_err(&path))
}

fn json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn require(dir: &Path, rel: &str, producer: &str) -> Result<PathBuf, CliError> {
    let p = dir.join(rel);
    if !p.exists() {
        return Err(CliError::MissingArtifacts { dir: dir.to_path_buf(), missing: vec![format!("{rel} (run `{producer}` first)")] });
    }
    Ok(p)
}

fn finish(mut m: RunManifest, out: &Path, tag: &str, start: Instant) -> Result<RunManifest, CliError> {
    m.timings.insert("total_seconds".into(), start.elapsed().as_secs_f64());
    m.write(&out.join(manifest_name(tag)))?;
    Ok(m)
}

/// Latin-hypercube design plus high-fidelity solves.
pub fn gen_data(config: &PipelineConfig) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let out = &config.out;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let seeds = config.seeds();
    let n = config.sampling.n_sim;
    let thetas = lhs_sample(n, &config.sampling.ranges, seeds.lhs);
    let chunk = n.div_ceil(10).max(1);
    let mut pairs = Vec::with_capacity(n);
    for (k, block) in thetas.chunks(chunk).enumerate() {
        let part = generate_dataset(block, &config.grid, &config.solver, seeds.lhs).map_err(|e| match e {
            sodbayes::sampling::DatasetError::Solver { index, source } => {
                CliError::Config(format!("simulation {} failed: {source}", k * chunk + index))
            }
            other => other.into(),
        })?;
        pairs.extend(part.pairs);
        eprintln!("gen-data: solved {}/{n}", pairs.len());
    }
    let dataset = Dataset { grid: config.grid.clone(), solver: config.solver.clone(), seed: seeds.lhs, pairs };
    save_dataset(&dataset, &out.join(DATASET))?;
    let mut m = RunManifest::new("gen-data", config);
    m.output(out, DATASET)?;
    finish(m, out, "gen-data", start)
}

fn training_data(config: &PipelineConfig) -> Result<Dataset, CliError> {
    let data = load_dataset(&require(&config.out, DATASET, "gen-data")?)?;
    if data.grid != config.grid {
        return Err(CliError::Config(format!("dataset grid {:?} differs from the configured grid {:?}", data.grid, config.grid)));
    }
    Ok(match config.training.n_sim {
        Some(n) if n > data.len() => {
            return Err(CliError::Config(format!("training.n_sim = {n} exceeds the {} pairs on disk", data.len())))
        }
        Some(n) => data.truncated(n),
        None => data,
    })
}

/// Scores written next to the checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub latent_dim: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub val_mse: f64,
    pub val_mse_per_channel: [f64; 3],
    pub pod_val_mse: f64,
    pub forward_val_mse: f64,
    /// Normalized error of the full `theta -> final state` surrogate.
    pub prediction_val_mse: f64,
}

fn prediction_error(bundle: &AeRomBundle, data: &Dataset, val: &[usize]) -> Result<f64, CliError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for &i in val {
        let pair = &data.pairs[i];
        let pred = bundle.stats.normalize(&bundle.predict_final(&pair.theta)?);
        let truth = bundle.stats.normalize(&pair.xf);
        sum += pred.iter().zip(&truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        count += truth.len();
    }
    Ok(sum / count as f64)
}

/// Autoencoder then forward operator; writes the checkpoint and curves.
pub fn train(config: &PipelineConfig) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let out = &config.out;
    let data = training_data(config)?;
    let cfg = &config.training;
    let (tr, val) = split_dataset(data.len(), config.sampling.train_fraction, cfg.seed)?;
    eprintln!("train: autoencoder on {} pairs, {} epochs", tr.len(), cfg.epochs);
    let t = Instant::now();
    let mut bundle = train_autoencoder(&data, &tr, &val, cfg)?;
    let ae_seconds = t.elapsed().as_secs_f64();
    let recon = evaluate_autoencoder(&bundle, &data, &val)?;
    let pod = pod_baseline(&data, &tr, &val, &bundle.stats, cfg.latent_dim)?;
    eprintln!("train: validation MSE {:.3e} (POD-{} {:.3e})", recon.total, cfg.latent_dim, pod.total);
    let t = Instant::now();
    let fwd = train_forward_operator(&mut bundle, &data, &tr, &val, cfg)?;
    let forward_seconds = t.elapsed().as_secs_f64();
    let metrics = TrainMetrics {
        latent_dim: cfg.latent_dim,
        n_train: tr.len(),
        n_val: val.len(),
        val_mse: recon.total,
        val_mse_per_channel: recon.per_channel,
        pod_val_mse: pod.total,
        forward_val_mse: fwd.val.last().copied().unwrap_or(f64::NAN),
        prediction_val_mse: prediction_error(&bundle, &data, &val)?,
    };
    eprintln!("train: surrogate prediction MSE {:.3e}", metrics.prediction_val_mse);
    bundle.save(&out.join(BUNDLE))?;
    write(out, AE_LOSS, bundle.metadata.ae_history.to_csv().as_bytes())?;
    write(out, FORWARD_LOSS, fwd.to_csv().as_bytes())?;
    write(out, TRAIN_METRICS, &json(&metrics))?;
    let mut m = RunManifest::new("train", config);
    m.input(out, DATASET)?;
    for f in [BUNDLE, AE_LOSS, FORWARD_LOSS, TRAIN_METRICS] {
        m.output(out, f)?;
    }
    m.timings.insert("autoencoder_seconds".into(), ae_seconds);
    m.timings.insert("forward_seconds".into(), forward_seconds);
    finish(m, out, "train", start)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepKind {
    Latent,
    Data,
}

impl SweepKind {
    pub fn file(self) -> &'static str {
        match self {
            SweepKind::Latent => "sweep_latent.csv",
            SweepKind::Data => "sweep_data.csv",
        }
    }

    fn tag(self) -> &'static str {
        match self {
            SweepKind::Latent => "sweep-latent",
            SweepKind::Data => "sweep-data",
        }
    }
}

/// Latent-dimension or data-budget study.
pub fn sweep(config: &PipelineConfig, kind: SweepKind) -> Result<(RunManifest, SweepResult), CliError> {
    let start = Instant::now();
    let out = &config.out;
    let result = match kind {
        SweepKind::Latent => latent_sweep(&training_data(config)?, &config.sweep.latent_dims, &config.training)?,
        SweepKind::Data => {
            let data = load_dataset(&require(out, DATASET, "gen-data")?)?;
            let cfg = sodbayes::aerom::TrainingConfig { n_sim: None, ..config.training.clone() };
            data_scaling_study(&data, &config.sweep.budgets, &cfg)?
        }
    };
    write(out, kind.file(), result.to_csv().as_bytes())?;
    let mut m = RunManifest::new(kind.tag(), config);
    m.input(out, DATASET)?;
    m.output(out, kind.file())?;
    Ok((finish(m, out, kind.tag(), start)?, result))
}

pub fn inversion_settings(config: &PipelineConfig) -> InversionSettings {
    let inf = &config.inference;
    InversionSettings {
        theta_true: inf.theta_true,
        sigma: inf.sigma,
        prior: inf.prior,
        nuts: inf.nuts.clone(),
        solver: config.solver.clone(),
        noise_seed: config.seeds().noise,
    }
}

/// Synthetic observations and posterior sampling for each sensor count.
pub fn infer(config: &PipelineConfig, n_obs: &[usize]) -> Result<Vec<InversionMetrics>, CliError> {
    let out = &config.out;
    let bundle = AeRomBundle::load(&require(out, BUNDLE, "train")?)?;
    let settings = inversion_settings(config);
    let mut rows = Vec::new();
    for &n in n_obs {
        let start = Instant::now();
        eprintln!("infer: N_obs = {n}, {} chains x ({} + {})", settings.nuts.chains, settings.nuts.warmup, settings.nuts.draws);
        let run = run_inversion(n, &bundle, &settings)?;
        let dir = infer_dir(n);
        let metrics = run.metrics();
        let files: [(&str, Vec<u8>); 7] = [
            ("observations.csv", run.observations.to_csv().into_bytes()),
            ("observations.json", json(&run.observations)),
            ("draws.csv", run.samples.to_csv().into_bytes()),
            ("diagnostics.json", json(&run.samples.diagnostics)),
            ("summary_rho.csv", run.summary.field_csv(&run.summary.rho).into_bytes()),
            ("summary_p.csv", run.summary.field_csv(&run.summary.p).into_bytes()),
            ("metrics.json", json(&metrics)),
        ];
        let mut m = RunManifest::new(&format!("infer --n-obs {n}"), config);
        m.input(out, BUNDLE)?;
        for (name, bytes) in &files {
            let rel = format!("{dir}/{name}");
            write(out, &rel, bytes)?;
            m.output(out, &rel)?;
        }
        finish(m, out, &format!("infer-n{n}"), start)?;
        let d = &run.samples.diagnostics;
        eprintln!(
            "infer: RMSE rho {:.3e} p {:.3e}, mean std rho {:.3e} p {:.3e}, max R-hat {:.4}, divergences {}",
            metrics.rmse_rho, metrics.rmse_p, metrics.mean_std_rho, metrics.mean_std_p, metrics.max_rhat, d.divergences
        );
        if let Some(worst) = d.rhat.iter().copied().reduce(f64::max).filter(|&r| !(r < RHAT_WARNING)) {
            eprintln!("infer: warning: split R-hat {worst:.3} >= {RHAT_WARNING}; chains disagree, inspect draws.csv per chain");
        }
        if d.divergence_rate > config.inference.max_divergence_rate {
            return Err(CliError::Divergence { n_obs: n, rate: d.divergence_rate, limit: config.inference.max_divergence_rate });
        }
        rows.push(metrics);
    }
    Ok(rows)
}

/// Percentage reductions between the smallest and largest sensor counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reductions {
    pub from_n_obs: usize,
    pub to_n_obs: usize,
    pub mean_std_rho_pct: f64,
    pub mean_std_p_pct: f64,
    pub rmse_rho_pct: f64,
    pub rmse_p_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<InversionMetrics>,
    pub reductions: Option<Reductions>,
}

fn pct(from: f64, to: f64) -> f64 {
    100.0 * (from - to) / from
}

/// Aggregates the inversion metrics of every configured sensor count.
pub fn report(config: &PipelineConfig) -> Result<Report, CliError> {
    let start = Instant::now();
    let out = &config.out;
    let mut ns = config.inference.n_obs.clone();
    ns.sort_unstable();
    ns.dedup();
    let missing: Vec<String> =
        ns.iter().map(|&n| format!("{}/metrics.json", infer_dir(n))).filter(|rel| !out.join(rel).exists()).collect();
    if !missing.is_empty() {
        return Err(CliError::MissingArtifacts { dir: out.clone(), missing });
    }
    let mut m = RunManifest::new("report", config);
    let mut rows = Vec::new();
    for &n in &ns {
        let rel = format!("{}/metrics.json", infer_dir(n));
        let path = out.join(&rel);
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        rows.push(serde_json::from_str::<InversionMetrics>(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?);
        m.input(out, &rel)?;
    }
    let reductions = (rows.len() >= 2).then(|| {
        let (a, b) = (&rows[0], &rows[rows.len() - 1]);
        Reductions {
            from_n_obs: a.n_obs,
            to_n_obs: b.n_obs,
            mean_std_rho_pct: pct(a.mean_std_rho, b.mean_std_rho),
            mean_std_p_pct: pct(a.mean_std_p, b.mean_std_p),
            rmse_rho_pct: pct(a.rmse_rho, b.rmse_rho),
            rmse_p_pct: pct(a.rmse_p, b.rmse_p),
        }
    });
    let report = Report { rows, reductions };
    write(out, REPORT_JSON, &json(&report))?;
    write(out, REPORT_CSV, metrics_csv(&report.rows).as_bytes())?;
    m.output(out, REPORT_JSON)?;
    m.output(out, REPORT_CSV)?;
    finish(m, out, "report", start)?;
    Ok(report)
}
