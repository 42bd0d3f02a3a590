//! Split a follow-up of eight times into windows of six.
//!
//! Usage: `cargo run --example split_intervals`

use trajcausal::paneldata::split_data;
use trajcausal::sim::{simulate_cohort, DgpSpec};

fn main() -> trajcausal::Result<()> {
    let spec = DgpSpec { timedep_outcome: true, ..DgpSpec::new(200, 8, 6) };
    let panel = simulate_cohort(&spec)?.to_panel(&spec.roles())?;
    let set = split_data(&panel, 6)?;
    for d in 0..set.n_intervals() {
        let labels = &set.source().time_labels;
        println!("interval {}: times {}..{}, {} individuals still at risk", d + 1, labels[d], labels[d + 5], set.members(d).len());
    }
    let pooled = set.pooled()?;
    println!("pooled long table: {} rows, columns {:?}", pooled.n_rows(), pooled.column_names());
    Ok(())
}
