//! Rank tables and significance matrices over a grid of runs.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::eval::{
    average_ranks, friedman_test, holm_correction, wilcoxon_signed_rank, Metrics, TestResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    MaFdr,
    MaFnr,
    MaMccLoss,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::MaFdr, Criterion::MaFnr, Criterion::MaMccLoss];

    pub fn tag(self) -> &'static str {
        match self {
            Criterion::MaFdr => "mafdr",
            Criterion::MaFnr => "mafnr",
            Criterion::MaMccLoss => "mamcc_loss",
        }
    }

    pub fn of(self, m: &Metrics) -> f64 {
        match self {
            Criterion::MaFdr => m.mafdr,
            Criterion::MaFnr => m.mafnr,
            Criterion::MaMccLoss => m.mamcc_loss,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionSection {
    pub criterion: Criterion,
    pub average_ranks: Vec<f64>,
    pub friedman: TestResult,
    /// Friedman p adjusted across the criteria of one base classifier.
    pub friedman_adjusted: f64,
    /// `None` where the pair has too few non-zero differences.
    pub wilcoxon: Vec<Vec<Option<f64>>>,
    pub wilcoxon_adjusted: Vec<Vec<Option<f64>>>,
    /// Groups of algorithms, adjacent in rank order, with no significant
    /// pairwise difference among them.
    pub cliques: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseReport {
    pub base: String,
    pub algorithms: Vec<String>,
    pub alpha: f64,
    pub sections: Vec<CriterionSection>,
}

/// `scores[stream][algorithm]` are pooled metrics; lower is better for all
/// criteria.
pub fn build_base_report(
    base: &str,
    algorithms: &[String],
    scores: &[Vec<Metrics>],
    alpha: f64,
) -> Result<BaseReport> {
    let k = algorithms.len();
    let mut sections = Vec::new();
    for criterion in Criterion::ALL {
        let matrix: Vec<Vec<f64>> = scores
            .iter()
            .map(|row| row.iter().map(|m| criterion.of(m)).collect())
            .collect();
        let table = average_ranks(&matrix, true)?;
        let friedman = friedman_test(&table)?;
        let mut raw = vec![vec![None; k]; k];
        let mut pairs = Vec::new();
        for a in 0..k {
            for b in a + 1..k {
                let xa: Vec<f64> = matrix.iter().map(|r| r[a]).collect();
                let xb: Vec<f64> = matrix.iter().map(|r| r[b]).collect();
                match wilcoxon_signed_rank(&xa, &xb) {
                    Ok(t) => {
                        raw[a][b] = Some(t.p_value);
                        raw[b][a] = Some(t.p_value);
                        pairs.push((a, b, t.p_value));
                    }
                    Err(Error::TooFewDifferences(_)) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        let mut adjusted = vec![vec![None; k]; k];
        if !pairs.is_empty() {
            let ps: Vec<f64> = pairs.iter().map(|p| p.2).collect();
            let holm = holm_correction(&ps, alpha)?;
            for ((a, b, _), p) in pairs.iter().zip(holm.adjusted) {
                adjusted[*a][*b] = Some(p);
                adjusted[*b][*a] = Some(p);
            }
        }
        let average = table.average_ranks();
        let cliques = cliques(&average, &adjusted, alpha);
        sections.push(CriterionSection {
            criterion,
            average_ranks: average,
            friedman,
            friedman_adjusted: friedman.p_value,
            wilcoxon: raw,
            wilcoxon_adjusted: adjusted,
            cliques,
        });
    }
    let fp: Vec<f64> = sections.iter().map(|s| s.friedman.p_value).collect();
    let holm = holm_correction(&fp, alpha)?;
    for (s, p) in sections.iter_mut().zip(holm.adjusted) {
        s.friedman_adjusted = p;
    }
    Ok(BaseReport {
        base: base.to_string(),
        algorithms: algorithms.to_vec(),
        alpha,
        sections,
    })
}

fn cliques(ranks: &[f64], adjusted: &[Vec<Option<f64>>], alpha: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..ranks.len()).collect();
    order.sort_by(|&a, &b| ranks[a].total_cmp(&ranks[b]).then(a.cmp(&b)));
    let similar = |a: usize, b: usize| adjusted[a][b].is_none_or(|p| p > alpha);
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut last_end = 0;
    for start in 0..order.len() {
        let mut end = start + 1;
        while end < order.len() && order[start..end].iter().all(|&a| similar(a, order[end])) {
            end += 1;
        }
        if end - start >= 2 && end > last_end {
            out.push(order[start..end].to_vec());
            last_end = end;
        }
    }
    out
}

fn fmt_p(p: Option<f64>) -> String {
    p.map_or_else(|| "n/a".to_string(), |v| v.to_string())
}

pub fn reports_to_csv(reports: &[BaseReport]) -> String {
    let mut s = String::from("base,criterion,item,algorithm,versus,value\n");
    for r in reports {
        for sec in &r.sections {
            let c = sec.criterion.tag();
            let _ = writeln!(s, "{},{c},friedman_statistic,,,{}", r.base, sec.friedman.statistic);
            let _ = writeln!(s, "{},{c},friedman_p,,,{}", r.base, sec.friedman.p_value);
            let _ = writeln!(s, "{},{c},friedman_p_holm,,,{}", r.base, sec.friedman_adjusted);
            for (a, rank) in r.algorithms.iter().zip(&sec.average_ranks) {
                let _ = writeln!(s, "{},{c},average_rank,{a},,{rank}", r.base);
            }
            for (i, a) in r.algorithms.iter().enumerate() {
                for (j, b) in r.algorithms.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let _ = writeln!(s, "{},{c},wilcoxon_p,{a},{b},{}", r.base, fmt_p(sec.wilcoxon[i][j]));
                    let _ = writeln!(
                        s,
                        "{},{c},wilcoxon_p_holm,{a},{b},{}",
                        r.base,
                        fmt_p(sec.wilcoxon_adjusted[i][j])
                    );
                }
            }
        }
    }
    s
}

pub fn reports_to_plot_csv(reports: &[BaseReport]) -> String {
    let mut s = String::from("base,criterion,algorithm,average_rank,cliques\n");
    for r in reports {
        for sec in &r.sections {
            for (i, a) in r.algorithms.iter().enumerate() {
                let ids: Vec<String> = sec
                    .cliques
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.contains(&i))
                    .map(|(id, _)| (id + 1).to_string())
                    .collect();
                let _ = writeln!(
                    s,
                    "{},{},{a},{},{}",
                    r.base,
                    sec.criterion.tag(),
                    sec.average_ranks[i],
                    ids.join(";")
                );
            }
        }
    }
    s
}

pub fn reports_to_text(reports: &[BaseReport]) -> String {
    let mut s = String::new();
    for r in reports {
        let _ = writeln!(s, "== base classifier {} ==", r.base);
        for sec in &r.sections {
            let _ = writeln!(
                s,
                "\n{}  Friedman chi2 = {:.3}, p = {:.4e} (Holm {:.4e})",
                sec.criterion.tag(),
                sec.friedman.statistic,
                sec.friedman.p_value,
                sec.friedman_adjusted
            );
            let _ = write!(s, "{:<8}{:>10}", "", "avg rank");
            for a in &r.algorithms {
                let _ = write!(s, "{a:>10}");
            }
            s.push('\n');
            for (i, a) in r.algorithms.iter().enumerate() {
                let _ = write!(s, "{a:<8}{:>10.2}", sec.average_ranks[i]);
                for j in 0..r.algorithms.len() {
                    let cell = if i == j {
                        "-".to_string()
                    } else {
                        sec.wilcoxon_adjusted[i][j].map_or("n/a".to_string(), |p| format!("{p:.4}"))
                    };
                    let _ = write!(s, "{cell:>10}");
                }
                s.push('\n');
            }
        }
        s.push('\n');
    }
    s
}
