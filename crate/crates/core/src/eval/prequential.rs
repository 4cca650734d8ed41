//! Test-then-update evaluation with per-chunk metrics.

use std::fmt::Write as _;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::wrapper::{Event, OnlineClassifier};

use super::metrics::{macro_fdr, macro_fnr, macro_mcc_loss, ConfusionAccumulator};

pub const DEFAULT_EVAL_CHUNK: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub mafdr: f64,
    pub mafnr: f64,
    pub mamcc_loss: f64,
}

impl Metrics {
    pub fn from_accumulator(acc: &ConfusionAccumulator) -> Result<Self> {
        Ok(Metrics {
            mafdr: macro_fdr(acc)?,
            mafnr: macro_fnr(acc)?,
            mamcc_loss: macro_mcc_loss(acc)?,
        })
    }

    fn mean_of(rows: &[Metrics]) -> Metrics {
        let n = rows.len() as f64;
        let avg = |f: fn(&Metrics) -> f64| rows.iter().map(f).sum::<f64>() / n;
        Metrics {
            mafdr: avg(|m| m.mafdr),
            mafnr: avg(|m| m.mafnr),
            mamcc_loss: avg(|m| m.mamcc_loss),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamEvent {
    /// 0-based position of the instance whose observation raised the event.
    pub position: usize,
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkMetrics {
    pub index: usize,
    pub metrics: Metrics,
    pub events: Vec<StreamEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkMetricsReport {
    pub chunk_size: usize,
    /// Completed chunks only; a trailing partial chunk is folded into
    /// `pooled` but gets no row.
    pub chunks: Vec<ChunkMetrics>,
    /// Micro-pooled over every scored instance.
    pub pooled: Metrics,
    /// Unweighted mean over completed chunks (equals `pooled` when there are
    /// none).
    pub mean: Metrics,
    pub events: Vec<StreamEvent>,
    pub scored: usize,
}

impl ChunkMetricsReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("chunk_index,mafdr,mafnr,mamcc_loss,events\n");
        let row = |s: &mut String, key: &str, m: &Metrics, events: &str| {
            let _ = writeln!(
                s,
                "{key},{:.12},{:.12},{:.12},{events}",
                m.mafdr, m.mafnr, m.mamcc_loss
            );
        };
        for c in &self.chunks {
            let events: Vec<String> = c
                .events
                .iter()
                .map(|e| format!("{}@{}", e.event.tag(), e.position))
                .collect();
            row(&mut s, &c.index.to_string(), &c.metrics, &events.join(";"));
        }
        row(&mut s, "pooled", &self.pooled, "");
        row(&mut s, "mean", &self.mean, "");
        s
    }
}

/// Reads the `pooled` and `mean` rows back from a metrics CSV.
pub fn parse_summary_rows(csv: &str) -> Result<(Metrics, Metrics)> {
    let mut pooled = None;
    let mut mean = None;
    for (row, line) in csv.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                row,
                msg: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let num = |i: usize| -> Result<f64> {
            fields[i].parse().map_err(|_| Error::Parse {
                row,
                msg: format!("bad number {:?}", fields[i]),
            })
        };
        let slot = match fields[0] {
            "pooled" => &mut pooled,
            "mean" => &mut mean,
            _ => continue,
        };
        *slot = Some(Metrics {
            mafdr: num(1)?,
            mafnr: num(2)?,
            mamcc_loss: num(3)?,
        });
    }
    match (pooled, mean) {
        (Some(p), Some(m)) => Ok((p, m)),
        _ => Err(Error::Parse {
            row: 0,
            msg: "missing pooled/mean summary rows".into(),
        }),
    }
}

/// Predicts each instance, records it, then lets the classifier observe it.
pub fn prequential_run<C: OnlineClassifier + ?Sized>(
    clf: &mut C,
    stream: &Dataset,
    chunk: usize,
) -> Result<ChunkMetricsReport> {
    if stream.is_empty() {
        return Err(Error::EmptyStream);
    }
    if chunk == 0 {
        return Err(Error::Config("chunk size must be positive".into()));
    }
    let mut pooled = ConfusionAccumulator::new(stream.classes);
    let mut current = ConfusionAccumulator::new(stream.classes);
    let mut chunk_events = Vec::new();
    let mut chunks = Vec::new();
    let mut events = Vec::new();
    for (pos, inst) in stream.iter().enumerate() {
        let predicted = clf.predict(&inst.x)?;
        current.record(inst.label, predicted);
        if let Some(event) = clf.observe(inst)? {
            let e = StreamEvent {
                position: pos,
                event,
            };
            events.push(e);
            chunk_events.push(e);
        }
        if current.total() as usize == chunk {
            chunks.push(ChunkMetrics {
                index: chunks.len(),
                metrics: Metrics::from_accumulator(&current)?,
                events: std::mem::take(&mut chunk_events),
            });
            pooled.merge(&current);
            current = ConfusionAccumulator::new(stream.classes);
        }
    }
    pooled.merge(&current);
    let pooled_metrics = Metrics::from_accumulator(&pooled)?;
    let rows: Vec<Metrics> = chunks.iter().map(|c| c.metrics).collect();
    let mean = if rows.is_empty() {
        pooled_metrics
    } else {
        Metrics::mean_of(&rows)
    };
    Ok(ChunkMetricsReport {
        chunk_size: chunk,
        chunks,
        pooled: pooled_metrics,
        mean,
        events,
        scored: stream.len(),
    })
}
