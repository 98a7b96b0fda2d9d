mod common;

use common::props::*;
use proptest::prelude::*;

proptest! {
    #[test]
    fn projection_is_idempotent_and_nonexpansive((limits, y, z) in box_case()) {
        projection_idempotent_nonexpansive(limits, y, z)?;
    }

    #[test]
    fn prox_is_firmly_nonexpansive((x, y, index, a, b) in prox_case()) {
        prox_firmly_nonexpansive(x, y, index, a, b)?;
    }

    #[test]
    fn unsaturated_step_keeps_the_predicted_proxy((mem, dq, fc, fd) in step_case()) {
        unsaturated_transparency(mem, dq, fc, fd)?;
    }

    #[test]
    fn saturated_steps_satisfy_the_variational_inequality((mem, dq, forces, probes) in planar_case()) {
        vi_residual_at_saturation(mem, dq, forces, probes)?;
    }

    #[test]
    fn two_link_inertia_derivative_minus_twice_coriolis_is_skew(
        q in vec_of(2, 3.0),
        qd in vec_of(2, 5.0),
        x in vec_of(2, 2.0),
    ) {
        two_link_skew(q, qd, x)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn reruns_are_bit_identical((which, seed) in rerun_case()) {
        bit_identical_rerun(RERUN_PRESETS[which], 0.3, seed)?;
    }
}
