//! Output states of a single quantum memristor and their purity.

use qumem::memristor::{
    output_expectation, output_state_dual_rail, output_state_single_rail, purity_closed_form,
    purity_dual_rail_closed_form, QubitInput,
};

fn main() -> qumem::Result<()> {
    let q = QubitInput::from_beta2(0.3)?;
    let r = 0.7;
    let single = output_state_single_rail(q, r)?;
    let dual = output_state_dual_rail(q, r)?;
    println!("|beta|^2 = 0.3, R = 0.7, <n_out> = {:.3}", output_expectation(0.3, r)?);
    println!("single-rail rho:{:.3}", single.to_density());
    println!("dual-rail rho:{:.3}", dual.to_density());
    println!(
        "purity single {:.4} (1-2b^4R(1-R) = {:.4}), dual {:.4} (1-2b^2R(1-b^2R) = {:.4})",
        single.purity(),
        purity_closed_form(0.3, r),
        dual.purity(),
        purity_dual_rail_closed_form(0.3, r)
    );
    Ok(())
}
