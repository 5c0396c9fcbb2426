//! Library side of the scenario runner: report formats and the registry
//! of named verification scenarios.

pub mod report;
pub mod scenarios;

use rayon::prelude::*;
use report::RunReport;
use scenarios::{scenarios, Overrides};

/// Match scenario ids against a filter: empty matches everything; a
/// trailing '*' matches by prefix; otherwise exact.
pub fn id_matches(filter: &str, id: &str) -> bool {
    if filter.is_empty() {
        return true;
    }
    match filter.strip_suffix('*') {
        Some(prefix) => id.starts_with(prefix),
        None => id == filter,
    }
}

/// Run every registered scenario matching the filter; deterministic order
/// independent of the worker count.
pub fn run_all(filter: &str, o: &Overrides, timings: bool) -> Vec<RunReport> {
    let selected: Vec<_> = scenarios()
        .into_iter()
        .filter(|s| id_matches(filter, s.id))
        .collect();
    let jobs = o.jobs.unwrap_or(1).max(1);
    let mut reports: Vec<RunReport> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        pool.install(|| {
            selected
                .par_iter()
                .map(|s| scenarios::run_one(s, o, timings))
                .collect()
        })
    } else {
        selected.iter().map(|s| scenarios::run_one(s, o, timings)).collect()
    };
    reports.sort_by(|a, b| a.scenario.cmp(&b.scenario));
    reports
}
