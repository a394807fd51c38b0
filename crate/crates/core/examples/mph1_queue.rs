//! Single-server queue with Poisson arrivals and fitted service times,
//! compared against the Pollaczek-Khinchine mean wait.

use phasefit::analysis;
use phasefit::des;
use phasefit::fitting;

fn main() -> phasefit::Result<()> {
    println!(
        "{:>5} {:>4} {:>10} {:>10} {:>8}",
        "Cv2", "rho", "sim wait", "P-K", "se"
    );
    for cv2 in [0.25, 1.0, 4.0] {
        let fit = fitting::fit_two_moments(1.0, cv2)?;
        for rho in [0.3, 0.6] {
            let rate = rho / analysis::mean(&fit.model);
            let stats = des::run_mph1(rate, &fit.model, 500_000, 11)?;
            let pk = des::pk_mean_wait(rate, &fit.target)?;
            println!(
                "{cv2:>5} {rho:>4} {:>10.4} {pk:>10.4} {:>8.4}",
                stats.mean_wait, stats.se_wait
            );
        }
    }
    Ok(())
}
