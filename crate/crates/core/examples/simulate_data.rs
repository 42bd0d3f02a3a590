//! Simulate a cohort with treatment-confounder feedback and print it in both
//! layouts.
//!
//! Usage: `cargo run --example simulate_data`

use trajcausal::sim::{gendata, DgpSpec};
use trajcausal::Layout;

fn main() -> trajcausal::Result<()> {
    let spec = DgpSpec::new(5, 3, 345);
    let wide = gendata(&spec)?;
    println!("wide layout:");
    wide.write_csv(std::io::stdout())?;
    println!("\nlong layout:");
    wide.reshape(Layout::Long)?.write_csv(std::io::stdout())?;
    println!("\nroles sidecar: {}", serde_json::to_string(&spec.roles())?);
    Ok(())
}
