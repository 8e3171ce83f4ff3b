//! Helpers shared by the integration tests.

use nalgebra::DMatrix;
use num_complex::Complex64;
use qumem::fock::{CMatrix, CVector, ModeUnitary, OccupationBasis};
use rand::Rng;
use rand_distr::StandardNormal;

/// Haar unitary from the QR decomposition of a complex Gaussian matrix.
pub fn haar_unitary(m: usize, rng: &mut impl Rng) -> ModeUnitary {
    let z = DMatrix::from_fn(m, m, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let qr = z.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = DMatrix::from_diagonal(&r.diagonal().map(|d| if d.norm() > 0.0 { d / d.norm() } else { Complex64::from(1.0) }));
    ModeUnitary::new(q * phases).unwrap()
}

fn kron_power(u: &CMatrix, p: usize) -> CMatrix {
    let mut out = CMatrix::identity(1, 1);
    for _ in 0..p {
        out = out.kronecker(u);
    }
    out
}

/// Normalised symmetric tensor for an occupation pattern.
fn symmetric_vector(occ: &[u8]) -> CVector {
    let m = occ.len();
    let p: usize = occ.iter().map(|&n| n as usize).sum();
    let mut v = CVector::zeros(m.pow(p as u32));
    for idx in 0..m.pow(p as u32) {
        let mut counts = vec![0u8; m];
        let mut rest = idx;
        for _ in 0..p {
            counts[rest % m] += 1;
            rest /= m;
        }
        if counts == occ {
            v[idx] = Complex64::from(1.0);
        }
    }
    let n = v.norm();
    v / Complex64::from(n)
}

pub fn oracle_lift(u: &ModeUnitary, basis: &OccupationBasis) -> CMatrix {
    let p = basis.photon_number(0);
    let big = kron_power(u.matrix(), p);
    let sym: Vec<CVector> = basis.states().map(symmetric_vector).collect();
    CMatrix::from_fn(basis.len(), basis.len(), |i, j| (sym[i].adjoint() * &big * &sym[j])[(0, 0)])
}
