//! Smallest second moment reachable by a branch structure with a fixed mean,
//! and how the fitted models compare to it.

use phasefit::analysis;
use phasefit::fitting;

fn main() -> phasefit::Result<()> {
    let r = analysis::min_second_moment(&[0.2, 0.5, 0.3], &[1, 2, 4], 1.0)?;
    println!("branch lengths [1, 2, 4], probs [0.2, 0.5, 0.3], mean 1");
    println!("  min E[T^2]/mean^2 = {:.6}", r.ratio_min);
    println!(
        "  lower bound        = {:.6} (longest branch {})",
        r.lower_bound, r.jstar
    );
    println!("  optimal stage means {:?}", r.optimal_x);

    println!("\nfitted models against the bound for their own structure:");
    for cv2 in [0.2, 0.45, 0.9] {
        let fit = fitting::fit_two_moments(1.0, cv2)?;
        let probs: Vec<f64> = fit.model.branches().iter().map(|b| b.prob).collect();
        let lengths: Vec<usize> = fit.model.branches().iter().map(|b| b.len()).collect();
        let r = analysis::min_second_moment(&probs, &lengths, 1.0)?;
        println!(
            "  Cv2 {cv2}: {} stages, E[T^2] {:.4} >= min {:.4}",
            fit.n_transient,
            1.0 + cv2,
            r.ratio_min
        );
    }
    Ok(())
}
