//! Runs a plan and renders the results as CSV.
//!
//! Column layout is described in `docs/csv-format.md`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;

use crate::harness::plan::{ExperimentPlan, RunSpec};
use crate::metrics::{aggregate, compute_metrics, MetricsReport, Summary};
use crate::sim::engine::run;

pub const CSV_HEADER: &str =
    "protocol,pause_time_s,wait_time_s,seed,pdf,ad_s,nro,cep_mj,sdcen_j,generated,delivered,control_tx";

#[derive(Debug, Clone)]
pub struct RunResult {
    pub spec: RunSpec,
    pub outcome: Result<MetricsReport, String>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions<'a> {
    /// Worker threads; 0 lets rayon decide.
    pub parallel: usize,
    pub quiet: bool,
    /// Write each run's trace as JSON lines into this directory.
    pub trace_dir: Option<&'a Path>,
}

fn trace_file_name(spec: &RunSpec) -> String {
    let wait = spec.wait_time_s.map(|w| format!("_w{w}")).unwrap_or_default();
    format!("{}_p{}{}_s{}.jsonl", spec.protocol, spec.pause_time_s, wait, spec.seed)
}

fn run_one(plan: &ExperimentPlan, spec: &RunSpec, opts: &RunOptions) -> RunResult {
    let config = spec.config(&plan.base);
    let outcome = run(&config).map_err(|e| e.to_string()).and_then(|trace| {
        if let Some(dir) = opts.trace_dir {
            let path = dir.join(trace_file_name(spec));
            let file = File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            trace
                .write_jsonl(BufWriter::new(file))
                .map_err(|e| format!("{}: {e}", path.display()))?;
        }
        Ok(compute_metrics(&trace, config.node_count))
    });
    if !opts.quiet {
        let wait = spec.wait_time_s.map(|w| format!(" wait={w}")).unwrap_or_default();
        let status = match &outcome {
            Ok(r) => format!("delivered {}/{}", r.delivered, r.generated),
            Err(e) => format!("FAILED: {e}"),
        };
        eprintln!("{} pause={}{} seed={}: {status}", spec.protocol, spec.pause_time_s, wait, spec.seed);
    }
    RunResult { spec: spec.clone(), outcome }
}

/// Runs every simulation in the plan. Results come back in plan order no
/// matter how many workers are used.
pub fn run_experiment(plan: &ExperimentPlan, opts: &RunOptions) -> Vec<RunResult> {
    let specs = plan.runs();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.parallel)
        .build()
        .expect("thread pool");
    pool.install(|| specs.par_iter().map(|s| run_one(plan, s, opts)).collect())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn key_fields(spec: &RunSpec) -> String {
    let wait = spec.wait_time_s.map(|w| w.to_string()).unwrap_or_default();
    format!("{},{},{}", spec.protocol, spec.pause_time_s, wait)
}

fn summary_row(key: &str, label: &str, stats: [&Summary; 8], pick: fn(&Summary) -> Option<f64>) -> String {
    let mut row = format!("{key},{label}");
    for (i, s) in stats.iter().enumerate() {
        // cep is stored in joules and reported in millijoules.
        let v = pick(s).map(|x| if i == 3 { x * 1e3 } else { x });
        row.push(',');
        row.push_str(&opt(v));
    }
    row
}

/// Renders per-seed rows followed by `mean` and `std` rows for each
/// (protocol, pause time, wait time) group. A failed run becomes an error
/// row and its group gets no aggregate rows. Returns the CSV text and
/// whether every run succeeded.
pub fn render_csv(results: &[RunResult]) -> (String, bool) {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let mut all_ok = true;
    let mut i = 0;
    while i < results.len() {
        let key = key_fields(&results[i].spec);
        let mut j = i;
        while j < results.len() && key_fields(&results[j].spec) == key {
            j += 1;
        }
        let group = &results[i..j];
        let mut reports = Vec::new();
        let mut group_ok = true;
        for r in group {
            match &r.outcome {
                Ok(m) => {
                    writeln!(
                        out,
                        "{key},{},{},{},{},{},{},{},{},{}",
                        r.spec.seed,
                        opt(m.pdf),
                        opt(m.ad_s),
                        opt(m.nro),
                        opt(m.cep_j.map(|c| c * 1e3)),
                        m.sdcen_j,
                        m.generated,
                        m.delivered,
                        m.control_tx
                    )
                    .unwrap();
                    reports.push(m.clone());
                }
                Err(_) => {
                    writeln!(out, "{key},{},ERROR,,,,,,,", r.spec.seed).unwrap();
                    group_ok = false;
                }
            }
        }
        if group_ok {
            let a = aggregate(&reports);
            let stats = [&a.pdf, &a.ad_s, &a.nro, &a.cep_j, &a.sdcen_j, &a.generated, &a.delivered, &a.control_tx];
            writeln!(out, "{}", summary_row(&key, "mean", stats, |s| s.mean)).unwrap();
            writeln!(out, "{}", summary_row(&key, "std", stats, |s| s.std)).unwrap();
        }
        all_ok &= group_ok;
        i = j;
    }
    (out, all_ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::Protocol;

    fn report(pdf: f64) -> MetricsReport {
        MetricsReport {
            pdf: Some(pdf),
            ad_s: Some(0.01),
            nro: None,
            cep_j: Some(0.003),
            sdcen_j: 0.5,
            generated: 10,
            delivered: 8,
            control_tx: 4,
            total_consumed_j: 1.0,
            per_node_energy: vec![],
        }
    }

    fn spec(protocol: Protocol, seed: u64) -> RunSpec {
        let wait_time_s = (protocol == Protocol::MeaDsr).then_some(0.03);
        RunSpec { protocol, pause_time_s: 0.0, wait_time_s, seed }
    }

    #[test]
    fn rows_and_aggregates() {
        let results = vec![
            RunResult { spec: spec(Protocol::MeaDsr, 1), outcome: Ok(report(0.8)) },
            RunResult { spec: spec(Protocol::MeaDsr, 2), outcome: Ok(report(1.0)) },
            RunResult { spec: spec(Protocol::Dsr, 1), outcome: Err("boom".into()) },
        ];
        let (csv, ok) = render_csv(&results);
        assert!(!ok);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "mea-dsr,0,0.03,1,0.8,0.01,NA,3,0.5,10,8,4");
        assert_eq!(lines[3], "mea-dsr,0,0.03,mean,0.9,0.01,NA,3,0.5,10,8,4");
        assert!(lines[4].starts_with("mea-dsr,0,0.03,std,0.1414"));
        assert_eq!(lines[5], "dsr,0,,1,ERROR,,,,,,,");
        assert_eq!(lines.len(), 6);
        for l in &lines {
            assert_eq!(l.split(',').count(), 12, "{l}");
        }
    }
}
