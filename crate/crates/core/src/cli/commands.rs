//! The `generate`, `run` and `report` subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;

use crate::base::BaseKind;
use crate::data::read_stream_csv;
use crate::error::{Error, Result};
use crate::eval::{parse_summary_rows, prequential_run, Metrics};
use crate::gen::{generate, write_stream};
use crate::wrapper::{Strategy, StreamClassifier, WrapperConfig};

use super::config::{stream_name, ExperimentConfig};
use super::report::{build_base_report, reports_to_csv, reports_to_plot_csv, reports_to_text};

pub fn streams_dir(out: &Path) -> PathBuf {
    out.join("streams")
}

pub fn runs_dir(out: &Path) -> PathBuf {
    out.join("runs")
}

pub fn report_dir(out: &Path) -> PathBuf {
    out.join("report")
}

pub fn run_file_name(stream: &str, base: BaseKind, strategy: Strategy) -> String {
    format!("{stream}__{}__{}.csv", base.tag(), strategy.tag())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        b = b.num_threads(j);
    }
    b.build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))
}

/// Generates every configured stream; returns the written CSV paths.
pub fn cmd_generate(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let dir = streams_dir(out);
    create_dir(&dir)?;
    let pool = pool(cfg.jobs)?;
    pool.install(|| {
        cfg.streams
            .par_iter()
            .map(|s| {
                let path = dir.join(format!("{}.csv", stream_name(s)));
                let data = generate(s)?;
                write_stream(&path, s, &data)?;
                Ok(path)
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub stream: String,
    pub base: BaseKind,
    pub strategy: Strategy,
    pub status: RunStatus,
    pub wall_ms: Option<u128>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Incomplete,
    Complete,
    Failed,
}

impl RunStatus {
    fn tag(self) -> &'static str {
        match self {
            RunStatus::Incomplete => "incomplete",
            RunStatus::Complete => "complete",
            RunStatus::Failed => "failed",
        }
    }
}

fn manifest_csv(rows: &[ManifestRow]) -> String {
    let mut s = String::from("stream,base,strategy,status,wall_ms,file\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.stream,
            r.base.tag(),
            r.strategy.tag(),
            r.status.tag(),
            r.wall_ms.map_or(String::new(), |w| w.to_string()),
            run_file_name(&r.stream, r.base, r.strategy)
        ));
    }
    s
}

/// Runs every (stream, base, strategy) combination and writes one metrics
/// CSV per run plus `manifest.csv`.
pub fn cmd_run(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<ManifestRow>> {
    cfg.validate()?;
    let sdir = streams_dir(out);
    let names: Vec<String> = cfg.streams.iter().map(stream_name).collect();
    for name in &names {
        let p = sdir.join(format!("{name}.csv"));
        if !p.is_file() {
            return Err(Error::MissingInput(format!("stream file {}", p.display())));
        }
    }
    let rdir = runs_dir(out);
    create_dir(&rdir)?;
    let manifest_path = rdir.join("manifest.csv");

    let mut rows = Vec::new();
    for name in &names {
        for &base in &cfg.bases {
            for &strategy in &cfg.strategies {
                rows.push(ManifestRow {
                    stream: name.clone(),
                    base,
                    strategy,
                    status: RunStatus::Incomplete,
                    wall_ms: None,
                });
            }
        }
    }
    write_atomic(&manifest_path, &manifest_csv(&rows))?;
    let manifest = Mutex::new(rows);

    let wrapper = WrapperConfig {
        chunk_size: cfg.initial_chunk,
        delta: cfg.delta,
        ..WrapperConfig::default()
    };
    let pool = pool(cfg.jobs)?;
    let results: Vec<Result<()>> = pool.install(|| {
        cfg.streams
            .par_iter()
            .zip(names.par_iter())
            .map(|(s, name)| -> Result<()> {
                let data = read_stream_csv(sdir.join(format!("{name}.csv")), s.dim, s.classes)?;
                for &base in &cfg.bases {
                    for &strategy in &cfg.strategies {
                        let start = Instant::now();
                        let mut clf =
                            StreamClassifier::new(strategy, base, data.dim, data.classes, wrapper);
                        let outcome = prequential_run(&mut clf, &data, cfg.chunk).and_then(|r| {
                            write_atomic(&rdir.join(run_file_name(name, base, strategy)), &r.to_csv())
                        });
                        let elapsed = start.elapsed().as_millis();
                        let mut m = manifest.lock().expect("manifest lock");
                        if let Some(row) = m
                            .iter_mut()
                            .find(|r| &r.stream == name && r.base == base && r.strategy == strategy)
                        {
                            row.status = if outcome.is_ok() {
                                RunStatus::Complete
                            } else {
                                RunStatus::Failed
                            };
                            row.wall_ms = Some(elapsed);
                        }
                        write_atomic(&manifest_path, &manifest_csv(&m))?;
                        drop(m);
                        outcome?;
                    }
                }
                Ok(())
            })
            .collect()
    });
    for r in results {
        r?;
    }
    Ok(manifest.into_inner().expect("manifest lock"))
}

/// Reads the pooled metrics of every configured run and writes
/// `report.csv`, `report.txt` and `ranks_plot.csv`.
pub fn cmd_report(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    cfg.validate()?;
    let rdir = runs_dir(out);
    let algorithms: Vec<String> = cfg.strategies.iter().map(|s| s.tag().to_string()).collect();
    let mut reports = Vec::new();
    for &base in &cfg.bases {
        let mut scores: Vec<Vec<Metrics>> = Vec::new();
        for s in &cfg.streams {
            let name = stream_name(s);
            let mut row = Vec::new();
            for &strategy in &cfg.strategies {
                let file = rdir.join(run_file_name(&name, base, strategy));
                let text = fs::read_to_string(&file).map_err(|_| {
                    Error::MissingInput(format!(
                        "run {name} / {} / {} ({})",
                        base.tag(),
                        strategy.tag(),
                        file.display()
                    ))
                })?;
                row.push(parse_summary_rows(&text)?.0);
            }
            scores.push(row);
        }
        reports.push(build_base_report(base.tag(), &algorithms, &scores, cfg.alpha)?);
    }
    let dir = report_dir(out);
    create_dir(&dir)?;
    let text = reports_to_text(&reports);
    write_atomic(&dir.join("report.csv"), &reports_to_csv(&reports))?;
    write_atomic(&dir.join("report.txt"), &text)?;
    write_atomic(&dir.join("ranks_plot.csv"), &reports_to_plot_csv(&reports))?;
    Ok(text)
}
