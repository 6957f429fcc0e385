use nalgebra::DMatrix;
use rand::Rng;

use super::gaussian_matrix;

/// Haar-distributed `d × d` orthogonal matrix.
///
/// QR of a standard Gaussian matrix, with each column of `Q` multiplied by
/// the sign of the matching diagonal entry of `R`; without that correction
/// the Householder sign convention biases the distribution.
pub fn haar_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    assert!(d >= 1, "Haar matrix needs d >= 1");
    let qr = gaussian_matrix(d, d, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for (k, mut col) in q.column_iter_mut().enumerate() {
        if r[(k, k)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

/// Uniformly random rank-`rank` orthogonal projection `V Λ Vᵀ`.
pub fn random_projection<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> DMatrix<f64> {
    assert!(rank <= d, "projection rank {rank} exceeds dimension {d}");
    let v = haar_orthogonal(d, rng);
    let basis = v.columns(0, rank);
    basis * basis.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    #[test]
    fn one_by_one_is_a_sign() {
        let mut rng = seeded_rng(11);
        for _ in 0..20 {
            let q = haar_orthogonal(1, &mut rng);
            assert_eq!(q[(0, 0)].abs(), 1.0);
        }
    }

    #[test]
    fn orthogonality() {
        let mut rng = seeded_rng(12);
        for d in [2, 5, 16, 40] {
            let q = haar_orthogonal(d, &mut rng);
            let resid = q.transpose() * &q - DMatrix::identity(d, d);
            assert!(resid.amax() <= 1e-10, "d = {d}: {}", resid.amax());
        }
    }

    #[test]
    fn projection_is_idempotent_with_given_rank() {
        let mut rng = seeded_rng(13);
        let p = random_projection(9, 4, &mut rng);
        assert!((&p * &p - &p).amax() < 1e-12);
        assert!((p.trace() - 4.0).abs() < 1e-12);
        assert_eq!(random_projection(5, 0, &mut rng), DMatrix::zeros(5, 5));
    }
}
