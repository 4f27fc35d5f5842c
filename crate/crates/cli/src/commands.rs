//! Subcommand bodies and output persistence.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use picnn::io::{fingerprint, to_json_sig17};
use picnn::problems::problem_library;
use picnn::sphere::sample_uniform;
use picnn::theory::{
    rate_exponent, recommend_architecture, ArchConstants, ArchRecommendation, RateInputs,
    Smoothness,
};
use picnn::trainer::{run_replicates, test_data, train, ExperimentTable, RunRecord, SizePlan};
use picnn::{Error, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::verify::{run_suite, Check};

/// Writes `bytes` unless `path` already holds different content.
pub fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Ok(existing) = fs::read(path) {
        if existing == bytes {
            return Ok(());
        }
        return Err(Error::RunFailed(format!(
            "refusing to overwrite {} with different content",
            path.display()
        )));
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Writes `<stem>.csv` (per-epoch history) and `<stem>.json` (the record).
pub fn write_run(dir: &Path, stem: &str, record: &RunRecord) -> Result<()> {
    let csv = csv_bytes(|b| record.write_history_csv(b))?;
    write_output(&dir.join(format!("{stem}.csv")), &csv)?;
    write_output(
        &dir.join(format!("{stem}.json")),
        to_json_sig17(record)?.as_bytes(),
    )
}

#[derive(Serialize)]
struct ResolvedConfig<'a> {
    config_fingerprint: &'a str,
    config: &'a ExperimentConfig,
}

fn write_config(out: &Path, cfg: &ExperimentConfig, fp: &str) -> Result<()> {
    let doc = ResolvedConfig {
        config_fingerprint: fp,
        config: cfg,
    };
    let name = format!("config_{}.json", &fp[..fp.len().min(12)]);
    write_output(&out.join(name), to_json_sig17(&doc)?.as_bytes())
}

pub fn cmd_sample(n: usize, d: usize, seed: u64, out: &Path) -> Result<PathBuf> {
    #[derive(Serialize)]
    struct Key {
        n: usize,
        d: usize,
        seed: u64,
    }
    let fp = fingerprint(&Key { n, d, seed })?;
    let s = sample_uniform(n, d, seed)?;
    let path = out.join(format!("samples_d{d}_n{n}_seed{seed}.csv"));
    write_output(&path, &csv_bytes(|b| s.write_csv_tagged(b, Some(&fp)))?)?;
    Ok(path)
}

/// One training run per problem variant at `train.train_size`.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    write_config(out, cfg, &fingerprint(cfg)?)?;
    let mut records = Vec::new();
    for v in cfg.variants()? {
        let problem = problem_library(&v.family, v.d, v.r)?;
        let arch = cfg.arch.for_dim(problem.d);
        let test = test_data(&problem, cfg.train.test_size, cfg.test_seed)?;
        let rec = train(&arch, &problem, &cfg.train, &test, cfg.test_seed)?;
        let stem = format!("train_n{}_seed{}", cfg.train.train_size, cfg.train.seed);
        write_run(&out.join(&problem.label), &stem, &rec)?;
        info!(
            "{}: best epoch {:?}, {:.1}s",
            problem.label, rec.best_epoch, rec.wall_time_s
        );
        records.push(rec);
    }
    Ok(records)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeReport {
    pub label: String,
    pub slope: Option<f64>,
    pub r2: Option<f64>,
    pub std_error: Option<f64>,
    pub sizes: Vec<usize>,
    pub replicates: usize,
    /// Set when some size had too few successful replicates.
    pub partial: bool,
    pub config_fingerprint: String,
}

/// Replicate seeds `train.seed + j`.
pub fn plan(cfg: &ExperimentConfig) -> Vec<SizePlan> {
    cfg.sizes
        .iter()
        .map(|&n| SizePlan {
            train_size: n,
            seeds: (0..cfg.replicates as u64)
                .map(|j| cfg.train.seed + j)
                .collect(),
        })
        .collect()
}

/// Runs the size ladder for every variant and writes per-run records,
/// `sizes.csv`, `slope.json` (two or more usable sizes) and `slopes.csv`.
pub fn cmd_experiment(cfg: &ExperimentConfig) -> Result<Vec<(SlopeReport, ExperimentTable)>> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    let fp = fingerprint(cfg)?;
    write_config(out, cfg, &fp)?;
    let mut reports = Vec::new();
    for v in cfg.variants()? {
        let problem = problem_library(&v.family, v.d, v.r)?;
        let arch = cfg.arch.for_dim(problem.d);
        let test = test_data(&problem, cfg.train.test_size, cfg.test_seed)?;
        let table = run_replicates(
            &plan(cfg),
            &arch,
            &problem,
            &cfg.train,
            &test,
            cfg.test_seed,
        )?;
        let dir = out.join(&problem.label);
        for r in &table.runs {
            write_run(
                &dir.join("runs"),
                &format!("n{}_seed{}", r.train_size, r.seed),
                r,
            )?;
        }
        write_output(
            &dir.join("sizes.csv"),
            &csv_bytes(|b| table.write_sizes_csv(b, &fp))?,
        )?;
        let report = SlopeReport {
            label: problem.label.clone(),
            slope: table.fit.map(|f| f.slope),
            r2: table.fit.map(|f| f.r2),
            std_error: table.fit.and_then(|f| f.std_error),
            sizes: cfg.sizes.clone(),
            replicates: cfg.replicates,
            partial: !table.complete(),
            config_fingerprint: fp.clone(),
        };
        if table.fit.is_some() {
            write_output(&dir.join("slope.json"), to_json_sig17(&report)?.as_bytes())?;
        }
        info!("{}: slope {:?}", report.label, report.slope);
        reports.push((report, table));
    }
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["label", "slope", "r2", "partial", "config_fingerprint"])?;
        for (r, _) in &reports {
            let f = |v: Option<f64>| v.map(picnn::io::format_sig17).unwrap_or_default();
            w.write_record([
                r.label.clone(),
                f(r.slope),
                f(r.r2),
                r.partial.to_string(),
                fp.clone(),
            ])?;
        }
        w.flush()?;
    }
    write_output(&out.join("slopes.csv"), &buf)?;
    Ok(reports)
}

pub fn cmd_verify(suite: &str) -> Result<Vec<Check>> {
    run_suite(suite)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub inputs: RateInputs,
    pub n: u64,
    #[serde(flatten)]
    pub recommendation: ArchRecommendation,
}

/// The three reference cases shown when no inputs are given.
pub fn reference_rate_inputs() -> Vec<RateInputs> {
    vec![
        RateInputs {
            r: Smoothness::Infinite,
            s: 2,
            d: 3,
            k: 3,
        },
        RateInputs {
            r: Smoothness::Finite(4.0),
            s: 2,
            d: 3,
            k: 3,
        },
        RateInputs {
            r: Smoothness::Finite(3.0),
            s: 2,
            d: 4,
            k: 9,
        },
    ]
}

pub fn cmd_rates(inputs: &[RateInputs], n: u64, constants: &ArchConstants) -> Result<Vec<RateRow>> {
    inputs
        .iter()
        .map(|i| {
            rate_exponent(i)?;
            Ok(RateRow {
                inputs: *i,
                n,
                recommendation: recommend_architecture(n, i, constants)?,
            })
        })
        .collect()
}

pub fn format_rates_text(rows: &[RateRow]) -> String {
    let mut s = format!(
        "{:>5} {:>3} {:>3} {:>3} {:>17} {:>24} {:>6} {:>10} {:>8} {:>10}\n",
        "r", "s", "d", "k", "branch", "a", "L", "d_L+1", "d_L+2", "S"
    );
    for row in rows {
        let i = &row.inputs;
        let a = &row.recommendation;
        s.push_str(&format!(
            "{:>5} {:>3} {:>3} {:>3} {:>17} {:>24} {:>6} {:>10} {:>8} {:>10}\n",
            i.r.to_string(),
            i.s,
            i.d,
            i.k,
            format!("{:?}", a.branch),
            a.a.to_string(),
            a.conv_layers,
            a.width_first,
            a.width_second,
            a.free_params
        ));
    }
    s
}
