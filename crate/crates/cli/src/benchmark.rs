use std::io::Write;

use anyhow::bail;
use serde::Serialize;

use interdict::masters::SolverConfig;
use interdict::report::{Method, Report};
use interdict::generate_grid;

pub const CSV_HEADER: [&str; 8] = ["size", "budget", "levels", "method", "runtime_s", "solved", "refinements", "gap"];

#[derive(Debug, Clone)]
pub struct Sweep {
    pub sizes: Vec<usize>,
    pub budgets: Vec<u32>,
    pub levels: Vec<u32>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub config: SolverConfig,
}

/// Outcome of one solve in a sweep.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub size: usize,
    pub budget: u32,
    pub levels: u32,
    pub method: Method,
    pub seed: u64,
    pub outcome: Result<Report, String>,
}

/// Runs every (setting, seed, method) combination in a fixed order. A
/// failing solve is recorded and the sweep continues.
pub fn run_sweep(sweep: &Sweep) -> anyhow::Result<Vec<RunRecord>> {
    if sweep.seeds.is_empty() {
        bail!("the seed list is empty");
    }
    let mut records = Vec::new();
    for &size in &sweep.sizes {
        for &budget in &sweep.budgets {
            for &levels in &sweep.levels {
                for &seed in &sweep.seeds {
                    let inst = generate_grid(size, size, budget, levels, seed);
                    for &method in &sweep.methods {
                        let outcome = match &inst {
                            Ok(inst) => crate::solve(inst, method, &sweep.config).map_err(|e| e.to_string()),
                            Err(e) => Err(e.to_string()),
                        };
                        records.push(RunRecord {
                            size,
                            budget,
                            levels,
                            method,
                            seed,
                            outcome,
                        });
                    }
                }
            }
        }
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    /// Grid side length.
    pub size: usize,
    pub budget: u32,
    pub levels: u32,
    pub method: String,
    /// Mean wall time over solved seeds.
    pub runtime_s: String,
    pub solved: usize,
    /// Mean refinement count over solved seeds.
    pub refinements: String,
    /// Mean relative gap over unsolved seeds.
    pub gap: String,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// One row per (setting, method), in sweep order.
pub fn summarize(records: &[RunRecord]) -> Vec<CsvRow> {
    let mut keys: Vec<(usize, u32, u32, Method)> = Vec::new();
    for r in records {
        let key = (r.size, r.budget, r.levels, r.method);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(size, budget, levels, method)| {
            let group: Vec<&RunRecord> = records
                .iter()
                .filter(|r| (r.size, r.budget, r.levels, r.method) == (size, budget, levels, method))
                .collect();
            let reports: Vec<&Report> = group.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
            let failed = group.len() - reports.len();
            let solved: Vec<&Report> = reports.iter().copied().filter(|r| r.is_solved()).collect();
            let unsolved: Vec<&Report> = reports.iter().copied().filter(|r| !r.is_solved()).collect();
            let runtime = mean(&solved.iter().map(|r| r.wall_time_s).collect::<Vec<_>>());
            let refinements = mean(&solved.iter().map(|r| r.refinements as f64).collect::<Vec<_>>());
            let gap = if failed > 0 {
                "error".to_string()
            } else if unsolved.is_empty() {
                String::new()
            } else {
                let gaps: Vec<f64> = unsolved.iter().map(|r| r.gap.unwrap_or(f64::INFINITY)).collect();
                format!("{:.6}", mean(&gaps).unwrap())
            };
            CsvRow {
                size,
                budget,
                levels,
                method: method.to_string(),
                runtime_s: runtime.map(|t| format!("{t:.4}")).unwrap_or_default(),
                solved: solved.len(),
                refinements: refinements.map(|r| format!("{r:.1}")).unwrap_or_default(),
                gap,
            }
        })
        .collect()
}

pub fn write_csv<W: Write>(out: W, rows: &[CsvRow]) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
