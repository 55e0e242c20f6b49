//! Simulates the SMT vs gateway speedup grid on the bundled platform model.

use topomap::graph::Domain;
use topomap::sim::{grid_cells, run_cell, PlatformModel, GRID_HW_SUBSCRIBERS, GRID_SIZES};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let platform = PlatformModel::default();
    let cells = grid_cells(&GRID_SIZES, &GRID_HW_SUBSCRIBERS);
    println!("{:>3} {:>3} {:>10} {:>8} {:>8}", "pub", "k", "size", "hw", "sw");
    for cell in cells {
        let r = run_cell(&platform, cell, 50, 42)?;
        println!(
            "{:>3} {:>3} {:>10} {:>8.3} {:>8.3}",
            cell.publisher,
            cell.hw_subscribers,
            cell.size_bytes,
            r.speedup(Domain::Hardware),
            r.speedup(Domain::Software)
        );
    }
    Ok(())
}
