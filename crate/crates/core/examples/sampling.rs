//! Reproducible sampling and an empirical check of the draws.

use phasefit::fitting;
use phasefit::sampling::{self, SamplerState};

fn main() -> phasefit::Result<()> {
    let fit = fitting::fit_two_moments(1.0, 5.0)?;
    let mut state = SamplerState::new(2024);
    let first: Vec<String> = sampling::sample_n(&fit.model, &mut state, 5)
        .iter()
        .map(|x| format!("{x:.5}"))
        .collect();
    println!("first draws: {}", first.join(" "));
    println!("uniforms consumed: {}", state.counter());

    let report = sampling::empirical_check(&fit.model, 1_000_000, 2024)?;
    println!(
        "mean {:.5} (target {}, z {:.2}), variance {:.5} (target {}, z {:.2})",
        report.sample_mean,
        report.target_mean,
        report.mean_z(),
        report.sample_variance,
        report.target_variance,
        report.variance_z()
    );
    println!(
        "zero fraction {:.4}, passed: {}",
        report.zero_fraction,
        report.passed()
    );

    let draws = sampling::sample_n(&fit.model, &mut SamplerState::new(7), 100_000);
    let (d, n) = sampling::ks_continuous_part(&fit.model, &draws)?;
    println!(
        "KS on {n} positive draws: D = {d:.5}, critical (alpha 0.001) = {:.5}",
        sampling::ks_critical_value(n, 0.001)
    );
    Ok(())
}
