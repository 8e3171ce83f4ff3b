//! Two photons on a beam splitter: coincidence probability vs reflectivity.

use qumem::fock::{lift_unitary, ModeUnitary, OccupationBasis};

fn main() -> qumem::Result<()> {
    let basis = OccupationBasis::enumerate(2, 2)?;
    let input = basis.index_of(&[1, 1]).expect("|1,1> is in the basis");
    println!("R     P(1,1)  P(2,0)  P(0,2)");
    for k in 0..=10 {
        let r = k as f64 / 10.0;
        let u = lift_unitary(&ModeUnitary::coupler(r), &basis)?;
        let p = |occ: &[u8]| u[(basis.index_of(occ).unwrap(), input)].norm_sqr();
        println!("{r:.1}   {:.4}  {:.4}  {:.4}", p(&[1, 1]), p(&[2, 0]), p(&[0, 2]));
    }
    Ok(())
}
