use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use super::config::SimConfig;
use super::sim::{run_simulation, RunReport};
use super::trace::TraceRecord;
use super::HarnessError;

/// Runs every config over the same trace on up to `workers` threads.
///
/// Runs share only the read-only trace; results come back in config order.
pub fn run_sweep(configs: &[SimConfig], trace: &[TraceRecord], workers: usize) -> Vec<Result<RunReport, HarnessError>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<RunReport, HarnessError>>>> = configs.iter().map(|_| Mutex::new(None)).collect();
    thread::scope(|s| {
        for _ in 0..workers.clamp(1, configs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cfg) = configs.get(i) else { break };
                *slots[i].lock().unwrap() = Some(run_simulation(cfg, trace));
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().unwrap().expect("every slot ran")).collect()
}

/// Writes `<name>.json` and `<name>.csv` under `dir`.
pub fn write_report_files(dir: &Path, name: &str, report: &RunReport) -> Result<(PathBuf, PathBuf), HarnessError> {
    fs::create_dir_all(dir)?;
    let json = dir.join(format!("{name}.json"));
    let csv = dir.join(format!("{name}.csv"));
    fs::write(&json, report.to_json())?;
    fs::write(&csv, report.to_csv())?;
    Ok((json, csv))
}
