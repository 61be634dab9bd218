mod common;

use common::gradcheck::{run, LOSSES};

#[test]
fn analytic_gradients_match_finite_differences() {
    let r = run(50, 1000);
    for (name, err) in LOSSES.iter().zip(r.max_rel_err) {
        println!("{name}: max relative error {err:.3e}");
        assert!(err <= 1e-5, "{name}: {err:e}");
    }
}
