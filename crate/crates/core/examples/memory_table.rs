//! Prints the storage needed between time steps by each scheme and rank.
//!
//! ```text
//! cargo run --example memory_table -- [cells dirs groups]
//! ```

use mlqd::cli::cmd_memtable;
use mlqd::compression::StorageDims;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .map(|a| a.parse())
        .collect::<Result<_, _>>()?;
    let dims = match args.as_slice() {
        [] => StorageDims {
            cells: 100,
            dirs: 8,
            groups: 17,
        },
        [cells, dirs, groups] => StorageDims {
            cells: *cells,
            dirs: *dirs,
            groups: *groups,
        },
        _ => return Err("expected no arguments or `cells dirs groups`".into()),
    };
    let table = cmd_memtable(dims)?;
    println!("J = {}, M = {}, G = {}", dims.cells, dims.dirs, dims.groups);
    println!(
        "{:<10} {:>5} {:>10} {:>11}",
        "scheme", "rank", "elements", "reduction"
    );
    for row in &table.rows {
        println!(
            "{:<10} {:>5} {:>10} {:>10.1}%",
            row.key, row.values[0], row.values[1], row.values[2]
        );
    }
    Ok(())
}
