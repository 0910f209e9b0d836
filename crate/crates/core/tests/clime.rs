mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;

use common::*;
use varfdr::clime::{estimate_precision, estimate_precision_auto, Lambda1Strategy};
use varfdr::Error;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn certificate_and_symmetry(seed in any::<u64>(), p in 1usize..9, lambda1 in 0.0f64..0.5) {
        check_clime_certificate(seed, p, lambda1).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn tiny_lambda_recovers_inverse(seed in any::<u64>(), p in 1usize..=6) {
        check_clime_inverse(seed, p).map_err(TestCaseError::fail)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn columns_reach_vertex_optimum(seed in any::<u64>(), p in 1usize..=4, lambda1 in 0.0f64..0.4) {
        check_clime_vertex(seed, p, lambda1).map_err(TestCaseError::fail)?;
    }
}

#[test]
fn singular_matrix_is_infeasible_at_zero() {
    let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
    assert!(matches!(estimate_precision(&sigma, 0.0, 0.0), Err(Error::ClimeInfeasible { .. })));
    // the path moves to a feasible level; a ridge also restores feasibility
    let path = estimate_precision_auto(&sigma, &Lambda1Strategy::default(), 0.0).unwrap();
    assert!(path.lambda1 > 0.0);
    assert!(estimate_precision(&sigma, 0.0, 0.1).is_ok());
}
