//! CSV, JSON-lines and text renderings of traces and summaries.
//!
//! Summary CSV columns: `policy, episodes`, then `<metric>_mean, <metric>_std`
//! for first_domestic_year, processed, co2, unfulfilled_pct, profit and
//! discounted_reward, then `first_domestic_median, never_domestic`.
//!
//! Trace CSV columns: `policy, seed, t, action, demand, feed, sold, r1, r2,
//! r3, r4, reward`, then per site `extracted_j, loss_j, reserve_j,
//! operating_j, built_j, reading_j` (sites 1-based, reading -1 when absent,
//! reserves before the step).
//!
//! Belief CSV columns: `policy, seed, t, mean_1..mean_n, std_1..std_n`, one
//! row per decision point plus the terminal belief.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{EpisodeTrace, MetricStat, MetricsSummary};
use crate::config::ProblemConfig;
use crate::domain::Action;
use crate::error::{Error, Result};

const SUMMARY_METRICS: [&str; 6] = [
    "first_domestic_year",
    "processed",
    "co2",
    "unfulfilled_pct",
    "profit",
    "discounted_reward",
];

pub fn summary_header() -> Vec<String> {
    let mut h = vec!["policy".to_string(), "episodes".to_string()];
    for m in SUMMARY_METRICS {
        h.push(format!("{m}_mean"));
        h.push(format!("{m}_std"));
    }
    h.push("first_domestic_median".into());
    h.push("never_domestic".into());
    h
}

fn stats(row: &MetricsSummary) -> [MetricStat; 6] {
    [
        row.first_domestic_year,
        row.processed,
        row.co2,
        row.unfulfilled_pct,
        row.profit,
        row.discounted_reward,
    ]
}

/// Empty cell for undefined values.
fn cell(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

pub fn write_summary_csv<W: Write>(out: W, rows: &[MetricsSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(summary_header())?;
    for row in rows {
        let mut rec = vec![row.policy.clone(), row.episodes.to_string()];
        for s in stats(row) {
            rec.push(cell(s.mean));
            rec.push(cell(s.std));
        }
        rec.push(row.first_domestic_median.map(cell).unwrap_or_default());
        rec.push(row.never_domestic.to_string());
        w.write_record(rec)?;
    }
    w.flush().map_err(|e| Error::Output(e.to_string()))
}

/// Fixed-width text table with `mean ± std` cells.
pub fn summary_table(rows: &[MetricsSummary]) -> String {
    let head = [
        "policy",
        "n",
        "domestic year",
        "processed",
        "CO2",
        "unfulfilled %",
        "profit ($M)",
        "disc. reward",
    ];
    let fmt = |s: MetricStat, prec: usize| {
        if s.mean.is_finite() {
            format!("{:.*} ± {:.*}", prec, s.mean, prec, s.std)
        } else {
            "never".to_string()
        }
    };
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.policy.clone(),
                r.episodes.to_string(),
                fmt(r.first_domestic_year, 1),
                fmt(r.processed, 0),
                fmt(r.co2, 2),
                fmt(r.unfulfilled_pct, 2),
                fmt(r.profit, 1),
                fmt(r.discounted_reward, 1),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..head.len())
        .map(|i| {
            body.iter()
                .map(|r| r[i].chars().count())
                .chain([head[i].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut s = String::new();
    let line = |s: &mut String, cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                let pad = w - c.chars().count();
                if i == 0 {
                    format!("{c}{}", " ".repeat(pad))
                } else {
                    format!("{}{c}", " ".repeat(pad))
                }
            })
            .collect();
        let _ = writeln!(s, "{}", parts.join("  ").trim_end());
    };
    line(&mut s, &head.map(String::from));
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(&mut s, &rule);
    for r in &body {
        line(&mut s, r);
    }
    s
}

/// One step of one episode, flattened for export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub policy: String,
    pub seed: u64,
    pub t: u32,
    pub action: Action,
    pub demand: f64,
    pub feed: f64,
    pub sold: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    pub reward: f64,
    pub extracted: Vec<f64>,
    pub losses: Vec<f64>,
    pub reserves: Vec<f64>,
    pub operating: Vec<bool>,
    pub built: Vec<bool>,
    /// Sentinel-encoded readings.
    pub observation: Vec<f64>,
}

impl TraceRecord {
    pub fn from_trace(trace: &EpisodeTrace, config: &ProblemConfig) -> Vec<TraceRecord> {
        trace
            .steps
            .iter()
            .map(|s| TraceRecord {
                policy: trace.policy.clone(),
                seed: trace.seed,
                t: s.state.t,
                action: s.action,
                demand: s.demand,
                feed: s.feed,
                sold: s.sold(config),
                r1: s.reward_parts.r1_domestic_penalty,
                r2: s.reward_parts.r2_emissions,
                r3: s.reward_parts.r3_unfulfilled,
                r4: s.reward_parts.r4_profit,
                reward: s.reward_total,
                extracted: s.extracted.clone(),
                losses: s.losses.clone(),
                reserves: s.state.reserves.clone(),
                operating: s.state.operating.clone(),
                built: s.state.built.clone(),
                observation: s.observation.to_sentinel(),
            })
            .collect()
    }
}

pub fn trace_header(n: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "policy", "seed", "t", "action", "demand", "feed", "sold", "r1", "r2", "r3", "r4", "reward",
    ]
    .map(String::from)
    .to_vec();
    for prefix in ["extracted", "loss", "reserve", "operating", "built", "reading"] {
        h.extend((1..=n).map(|j| format!("{prefix}_{j}")));
    }
    h
}

pub fn write_trace_csv<W: Write>(out: W, traces: &[EpisodeTrace], config: &ProblemConfig) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(config.n_sites()))?;
    let num = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let flag = |v: &[bool]| v.iter().map(|&b| u8::from(b).to_string()).collect::<Vec<_>>();
    for trace in traces {
        for r in TraceRecord::from_trace(trace, config) {
            let mut rec = vec![r.policy.clone(), r.seed.to_string(), r.t.to_string(), r.action.to_string()];
            rec.extend(num(&[r.demand, r.feed, r.sold, r.r1, r.r2, r.r3, r.r4, r.reward]));
            rec.extend(num(&r.extracted));
            rec.extend(num(&r.losses));
            rec.extend(num(&r.reserves));
            rec.extend(flag(&r.operating));
            rec.extend(flag(&r.built));
            rec.extend(num(&r.observation));
            w.write_record(rec)?;
        }
    }
    w.flush().map_err(|e| Error::Output(e.to_string()))
}

pub fn write_trace_jsonl<W: Write>(mut out: W, traces: &[EpisodeTrace], config: &ProblemConfig) -> Result<()> {
    for trace in traces {
        for r in TraceRecord::from_trace(trace, config) {
            serde_json::to_writer(&mut out, &r)?;
            out.write_all(b"\n").map_err(|e| Error::Output(e.to_string()))?;
        }
    }
    out.flush().map_err(|e| Error::Output(e.to_string()))
}

pub fn beliefs_header(n: usize) -> Vec<String> {
    let mut h = vec!["policy".to_string(), "seed".to_string()];
    h.extend(crate::belief::belief_csv_header(n));
    h
}

pub fn write_beliefs_csv<W: Write>(out: W, traces: &[EpisodeTrace]) -> Result<()> {
    let n = traces
        .first()
        .and_then(|t| t.beliefs.first())
        .map_or(0, |b| b.n_sites());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(beliefs_header(n))?;
    for trace in traces {
        for b in &trace.beliefs {
            let mut rec = vec![trace.policy.clone(), trace.seed.to_string(), b.observables.t.to_string()];
            rec.extend(b.mean.iter().map(|v| v.to_string()));
            rec.extend(b.std.iter().map(|v| v.to_string()));
            w.write_record(rec)?;
        }
    }
    w.flush().map_err(|e| Error::Output(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::GreedyPolicy;
    use crate::harness::{run_episode, Scenario};

    #[test]
    fn summary_header_is_stable() {
        assert_eq!(
            summary_header().join(","),
            "policy,episodes,first_domestic_year_mean,first_domestic_year_std,processed_mean,\
             processed_std,co2_mean,co2_std,unfulfilled_pct_mean,unfulfilled_pct_std,profit_mean,\
             profit_std,discounted_reward_mean,discounted_reward_std,first_domestic_median,never_domestic"
        );
    }

    #[test]
    fn trace_header_is_stable() {
        assert_eq!(
            trace_header(2).join(","),
            "policy,seed,t,action,demand,feed,sold,r1,r2,r3,r4,reward,extracted_1,extracted_2,\
             loss_1,loss_2,reserve_1,reserve_2,operating_1,operating_2,built_1,built_2,reading_1,reading_2"
        );
    }

    #[test]
    fn beliefs_header_is_stable() {
        assert_eq!(beliefs_header(2).join(","), "policy,seed,t,mean_1,mean_2,std_1,std_2");
    }

    #[test]
    fn trace_exports_have_one_row_per_step() {
        let s = Scenario::accurate(ProblemConfig::table1()).unwrap();
        let t = run_episode(&s, &mut GreedyPolicy, 1).unwrap();
        let mut csv_buf = Vec::new();
        write_trace_csv(&mut csv_buf, std::slice::from_ref(&t), &s.config).unwrap();
        let text = String::from_utf8(csv_buf).unwrap();
        assert_eq!(text.lines().count(), 31);
        let second = text.lines().nth(1).unwrap();
        assert!(second.starts_with("greedy,1,0,BUILD(3),"), "{second}");

        let mut js = Vec::new();
        write_trace_jsonl(&mut js, &[t], &s.config).unwrap();
        let text = String::from_utf8(js).unwrap();
        let recs: Vec<TraceRecord> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(recs.len(), 30);
        assert_eq!(recs[0].action, Action::Build(2));
    }

    #[test]
    fn text_table_lists_each_policy() {
        let m = crate::harness::MetricsSummary::from_metrics("greedy", &[]);
        let table = summary_table(&[m]);
        assert!(table.lines().nth(2).unwrap().starts_with("greedy"));
    }
}
