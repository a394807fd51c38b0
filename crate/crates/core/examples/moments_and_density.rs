//! Moments, Laplace transform, density and distribution function of a model
//! with an atom at zero.

use num_complex::Complex64;
use phasefit::analysis;
use phasefit::{Branch, GeneralizedCoxModel};

fn main() -> phasefit::Result<()> {
    let model = GeneralizedCoxModel::new(vec![
        Branch::instantaneous(0.1),
        Branch::new(0.6, vec![3.0, 3.0]),
        Branch::new(0.3, vec![0.5]),
    ])?;
    let s = analysis::summary_with_higher(&model, 5)?;
    println!(
        "mean {:.6}  variance {:.6}  Cv2 {:.6}",
        s.mean, s.variance, s.cv2
    );
    for (k, m) in s.higher.iter().enumerate() {
        println!("E[T^{}] = {m:.6}", k + 3);
    }
    println!(
        "L(0.5+1i) = {:.6}",
        analysis::laplace(&model, Complex64::new(0.5, 1.0))?
    );

    println!("\n{:>6} {:>10} {:>10}", "t", "pdf", "cdf");
    for i in 0..=10 {
        let t = 0.5 * i as f64;
        let c = analysis::cdf(&model, t)?;
        println!(
            "{t:>6.2} {:>10.6} {:>10.6}",
            analysis::pdf(&model, t)?,
            c.total
        );
    }
    println!("atom at zero: {}", analysis::cdf(&model, 0.0)?.atom0);
    Ok(())
}
