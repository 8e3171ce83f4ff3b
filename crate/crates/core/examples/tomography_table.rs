//! Simulated tomography of the 16 tabulated dual-rail states.
//!
//! cargo run --release --example tomography_table -- [shots]

use qumem::tomography::{fit_global_phase, round_trip, table_fixtures, TomographyShots};

fn main() -> qumem::Result<()> {
    let shots = match std::env::args().nth(1) {
        Some(s) => TomographyShots::Finite(s.parse().map_err(|_| qumem::Error::Config(format!("bad shot count '{s}'")))?),
        None => TomographyShots::Exact,
    };
    println!("row  |b|^2  R     fidelity  purity  theory  iters");
    let mut phases = Vec::new();
    for (i, f) in table_fixtures()?.iter().enumerate() {
        let rep = round_trip(f, shots, 100 + i as u64)?;
        println!(
            "{:<3}  {:.2}   {:.2}  {:.5}   {:.4}  {:.4}  {}",
            rep.row, rep.beta2, rep.reflectivity, rep.fidelity, rep.purity, rep.purity_theory, rep.iterations
        );
        let [re, im] = rep.rho_exp[1][2];
        phases.push((f.reflectivity, num_complex::Complex64::new(re, im)));
    }
    println!("fitted global phase {:.4} rad", fit_global_phase(&phases)?);
    Ok(())
}
