use coast_core::bench::{run_benchmark, BenchResult};
use rayon::prelude::*;

use crate::config::BenchStage;
use crate::output::OutputDir;
use crate::CliError;

fn cell_name(c: &coast_core::BenchConfig) -> String {
    format!("q{}_k{}_s{}", c.q, c.k_true, c.sigma)
}

/// Run every grid cell (cells in parallel, seeds in parallel within a cell)
/// and write one JSON and CSV per cell plus a combined table.
pub fn run(stage: &BenchStage, out: &mut OutputDir) -> Result<Vec<BenchResult>, CliError> {
    let cells = stage.cells();
    for c in &cells {
        c.validate().map_err(|e| CliError::usage(format!("bench cell {}: {e}", cell_name(c))))?;
    }
    let results: Vec<BenchResult> = cells
        .par_iter()
        .map(|c| run_benchmark(c).map_err(|e| CliError::from_core(e).context(&format!("bench cell {}", cell_name(c)))))
        .collect::<Result<_, _>>()?;
    let mut table = String::new();
    for r in &results {
        let name = cell_name(&r.config);
        out.write_json(&format!("bench/{name}.json"), "bench", r)?;
        let csv = r.csv_table();
        out.write_text(&format!("bench/{name}.csv"), "bench", &csv)?;
        let mut lines = csv.lines();
        let header = lines.next().unwrap_or_default();
        if table.is_empty() {
            table.push_str(header);
            table.push('\n');
        }
        for l in lines {
            table.push_str(l);
            table.push('\n');
        }
        log::info!("{name}: {:.1}s across {} seeds", r.total_runtime(), r.per_seed.len());
        println!(
            "{name}: recall@k coast {:.3} mda {:.3} | tp@k coast {:.2} mda {:.2} | avg_tp coast {:.2} mda {:.2}",
            r.coast.recall_at_k, r.mda.recall_at_k, r.coast.tp_at_k, r.mda.tp_at_k, r.coast.avg_tp, r.mda.avg_tp
        );
    }
    out.write_text("bench/table.csv", "bench", &table)?;
    Ok(results)
}
