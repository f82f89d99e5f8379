//! Convergence study on a built-in problem.
//!
//! `cargo run --release --example convergence -- p1_czero 1.25`

use relaxbc::harness::{convergence_study, ExperimentSpec, PresetId, ProblemRef};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let preset: PresetId = serde_json::from_value(serde_json::Value::String(args.next().unwrap_or_else(|| "p1_czero".into())))?;
    let exponent: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1.25);

    let mut spec = ExperimentSpec::new(ProblemRef::Preset(preset), vec![2e-2, 1e-2, 5e-3, 2.5e-3]);
    spec.grid.exponent = exponent;
    let table = convergence_study(&spec)?;

    println!("{:>10} {:>8} {:>12} {:>12} {:>12}", "eps", "N", "L2", "H1", "L2 vs u0bar");
    for r in &table.rows {
        let e: Vec<String> = r.entries.iter().map(|e| format!("{:.4e}{}", e.error, if e.refinement_ok { " " } else { "*" })).collect();
        println!("{:>10.2e} {:>8} {:>12} {:>12} {:>12}", r.eps, r.n_cells, e[0], e[1], e[2]);
    }
    for f in &table.fits {
        println!("{:<12} slope {:?} pairwise {:?}", f.norm.name(), f.slope, f.pairwise);
    }
    Ok(())
}
