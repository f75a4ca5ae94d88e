use nalgebra::DMatrix;

use crate::error::{OdError, Result};
use crate::matrix::OdMatrix;

/// A feasible matrix together with its distance from the input.
#[derive(Debug, Clone)]
pub struct Projection {
    pub matrix: OdMatrix,
    /// Frobenius norm of `input − matrix`.
    pub violation: f64,
}

/// Maps a reconstruction onto the feasible set: symmetric, nonnegative
/// (constraint C1) and zero on the diagonal (constraint C2).
pub fn project_constraints(r: &DMatrix<f64>) -> Result<Projection> {
    let n = r.nrows();
    if r.ncols() != n {
        return Err(OdError::Dimension(format!(
            "cannot project a {}x{} matrix",
            n,
            r.ncols()
        )));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(OdError::Numeric("non-finite entry in reconstructed matrix".into()));
    }
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = (0.5 * (r[(i, j)] + r[(j, i)])).max(0.0);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    let violation = (r - &out).norm();
    Ok(Projection {
        matrix: OdMatrix::from_matrix(out)?,
        violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn feasible_input_unchanged() {
        let m = crate::reference_matrix();
        let p = project_constraints(m.entries()).unwrap();
        assert_eq!(p.matrix.entries(), m.entries());
        assert_eq!(p.violation, 0.0);
    }

    #[test]
    fn full_clipping() {
        let r = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, -2.0, 1.0]);
        let p = project_constraints(&r).unwrap();
        assert_eq!(p.matrix.entries(), &DMatrix::zeros(2, 2));
        assert!((p.violation - 10f64.sqrt()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn projection_is_idempotent(vals in proptest::collection::vec(-50.0f64..50.0, 36)) {
            let a = DMatrix::from_row_slice(6, 6, &vals);
            let sym = (&a + a.transpose()) * 0.5;
            let once = project_constraints(&sym).unwrap();
            let twice = project_constraints(once.matrix.entries()).unwrap();
            prop_assert_eq!(once.matrix.entries(), twice.matrix.entries());
            prop_assert_eq!(twice.violation, 0.0);
            prop_assert!(once.matrix.is_symmetric());
        }
    }
}
