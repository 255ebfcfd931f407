//! Verify the analytic gradients against central finite differences:
//! the focal/cross-entropy logit gradients over a gamma grid, and the
//! end-to-end head gradients for every parameter.

use tailfuse::cli::gradcheck::{run_gradcheck, TOLERANCE};

fn main() {
    let report = run_gradcheck(42, 0.0);
    println!("loss-level suite, max relative error per gamma:");
    for (gamma, err) in &report.per_gamma {
        println!("  gamma {gamma:<4} {err:.3e}");
    }
    println!("end-to-end head suite: {:.3e}", report.max_head_err);
    println!(
        "overall {:.3e} (tolerance {TOLERANCE:.0e}) -> {}",
        report.max_rel_err(),
        if report.passed() { "PASS" } else { "FAIL" }
    );
}
