//! Fit minimal models to a range of mean/variance targets and show the
//! structure each one gets.
//!
//! ```text
//! cargo run --example fit_two_moments
//! ```

use phasefit::analysis;
use phasefit::fitting;

fn main() -> phasefit::Result<()> {
    let mu = 2.0;
    println!(
        "{:>6} {:>15} {:>7} {:>12} {:>12}",
        "Cv2", "family", "stages", "mean", "variance"
    );
    for cv2 in [0.1, 0.3, 0.5, 1.0, 2.0, 10.0] {
        let fit = fitting::fit_two_moments(mu, cv2 * mu * mu)?;
        println!(
            "{cv2:>6} {:>15} {:>7} {:>12.9} {:>12.9}",
            fit.family.to_string(),
            fit.n_transient,
            analysis::mean(&fit.model),
            analysis::variance(&fit.model),
        );
    }

    let fit = fitting::fit_two_moments(1.0, 0.4)?;
    println!("\nmean 1, variance 0.4:\n{}", fit.model.to_json());
    for (j, b) in fit.model.branches().iter().enumerate() {
        let means: Vec<String> = b.stage_means().map(|x| format!("{x:.6}")).collect();
        println!(
            "  branch {j}: prob {:.6}, stage means [{}]",
            b.prob,
            means.join(", ")
        );
    }

    // a one-parameter family of hyperexponential fits with the same moments
    for p in [0.1, 0.3, 0.5] {
        let h = fitting::hyper_family(1.0, 3.0, p)?;
        println!("hyper p={p}: {}", h.model.to_json());
    }
    Ok(())
}
